#include "mew/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mew {

namespace {

constexpr char kMagic[8] = {'M', 'E', 'W', 'U', 'N', 'E', 'T', '1'};

void put_u64(std::ostream& os, uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

void put_f64(std::ostream& os, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    if constexpr (std::endian::native == std::endian::big)
        v = __builtin_bswap64(v);
    char b[8];
    std::memcpy(b, &v, 8);
    os.write(b, 8);
}

void put_string(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

double get_f64(std::istream& is) {
    uint64_t v = 0;
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::memcpy(&v, b, 8);
    if constexpr (std::endian::native == std::endian::big)
        v = __builtin_bswap64(v);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

std::string get_string(std::istream& is) {
    const uint64_t n = get_u64(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

void put_tensor(std::ostream& os, const std::string& name, const Tensor& t, bool trainable) {
    put_string(os, name);
    os.put(trainable ? 1 : 0);
    put_u64(os, static_cast<uint64_t>(t.shape().rank()));
    for (int i = 0; i < t.shape().rank(); ++i)
        put_u64(os, static_cast<uint64_t>(t.shape()[i]));
    for (double v : t.values()) put_f64(os, v);
}

struct TensorRecord {
    std::string name;
    bool trainable;
    Shape shape;
    std::vector<double> data;
};

TensorRecord get_tensor(std::istream& is) {
    TensorRecord r;
    r.name = get_string(is);
    const int flag = is.get();
    if (flag < 0) throw std::runtime_error("checkpoint: truncated record");
    r.trainable = flag != 0;
    const uint64_t rank = get_u64(is);
    if (rank < 1 || rank > 4) throw std::runtime_error("checkpoint: bad tensor rank");
    std::vector<int64_t> dims(rank);
    for (auto& d : dims) d = static_cast<int64_t>(get_u64(is));
    switch (rank) {
    case 1: r.shape = Shape{dims[0]}; break;
    case 2: r.shape = Shape{dims[0], dims[1]}; break;
    case 3: r.shape = Shape{dims[0], dims[1], dims[2]}; break;
    default: r.shape = Shape{dims[0], dims[1], dims[2], dims[3]}; break;
    }
    r.data.resize(static_cast<size_t>(r.shape.numel()));
    for (double& v : r.data) v = get_f64(is);
    return r;
}

} // namespace

void save_checkpoint(const std::string& path, const Network& net, const TrainerState* trainer) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 8);
    put_u64(os, 1); // format version
    put_string(os, net.config().to_text());
    const auto& entries = net.params().entries();
    put_u64(os, entries.size());
    for (const auto& e : entries) put_tensor(os, e.name, e.tensor, e.trainable);

    os.put(trainer ? 1 : 0);
    if (trainer) {
        put_u64(os, static_cast<uint64_t>(trainer->epoch));
        put_u64(os, static_cast<uint64_t>(trainer->step));
        put_f64(os, trainer->best_val_dsc);
        put_string(os, trainer->optimizer_kind);
        put_u64(os, trainer->slots.size());
        for (const auto& [name, t] : trainer->slots) put_tensor(os, name, t, true);
        put_string(os, trainer->rng_state);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

Network load_checkpoint(const std::string& path, std::optional<TrainerState>* trainer) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
    const uint64_t version = get_u64(is);
    if (version != 1)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

    const NetworkConfig cfg = NetworkConfig::from_text(get_string(is));
    Network net = Network::build(cfg, /*seed=*/0);

    const uint64_t count = get_u64(is);
    auto& entries = net.params().entries();
    if (count != entries.size())
        throw std::runtime_error("checkpoint: parameter count mismatch (" +
                                 std::to_string(count) + " stored vs " +
                                 std::to_string(entries.size()) + " built)");
    for (uint64_t i = 0; i < count; ++i) {
        TensorRecord r = get_tensor(is);
        auto& e = entries[i];
        if (e.name != r.name)
            throw std::runtime_error("checkpoint: parameter order mismatch at '" + r.name +
                                     "', expected '" + e.name + "'");
        if (!(e.tensor.shape() == r.shape))
            throw std::runtime_error("checkpoint: shape mismatch for '" + r.name + "': stored " +
                                     r.shape.str() + " vs built " + e.tensor.shape().str());
        std::copy(r.data.begin(), r.data.end(), e.tensor.values().begin());
    }

    const int has_trainer = is.get();
    if (has_trainer == 1) {
        TrainerState ts;
        ts.epoch = static_cast<int64_t>(get_u64(is));
        ts.step = static_cast<int64_t>(get_u64(is));
        ts.best_val_dsc = get_f64(is);
        ts.optimizer_kind = get_string(is);
        const uint64_t n = get_u64(is);
        for (uint64_t i = 0; i < n; ++i) {
            TensorRecord r = get_tensor(is);
            ts.slots.emplace_back(r.name, Tensor::from_data(r.shape, std::move(r.data)));
        }
        ts.rng_state = get_string(is);
        if (trainer) *trainer = std::move(ts);
    } else if (trainer) {
        trainer->reset();
    }
    return net;
}

} // namespace mew
