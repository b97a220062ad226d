#include "mew/unet.hpp"

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mew {

namespace {

void probe_finite(const Tensor& t, const std::string& where) {
    if (!t.all_finite())
        throw std::runtime_error("Network: non-finite values after " + where);
}

std::string bools_csv(const std::array<bool, 4>& b) {
    std::string s;
    for (int i = 0; i < 4; ++i) {
        if (i) s += ',';
        s += b[static_cast<size_t>(i)] ? '1' : '0';
    }
    return s;
}

std::array<bool, 4> parse_bools(const std::string& s) {
    std::array<bool, 4> out{};
    std::istringstream is(s);
    std::string tok;
    int i = 0;
    while (std::getline(is, tok, ',') && i < 4) out[static_cast<size_t>(i++)] = (tok == "1");
    if (i != 4) throw std::invalid_argument("NetworkConfig: expected 4 flags in '" + s + "'");
    return out;
}

} // namespace

void NetworkConfig::validate() const {
    if (in_channels < 1) throw std::invalid_argument("NetworkConfig: in_channels must be >= 1");
    if (num_classes < 1) throw std::invalid_argument("NetworkConfig: num_classes must be >= 1");
    if (input_h < 16 || input_w < 16 || input_h % 16 != 0 || input_w % 16 != 0)
        throw std::invalid_argument("NetworkConfig: input extents (" + std::to_string(input_h) +
                                    "," + std::to_string(input_w) +
                                    ") must be divisible by 16");
    for (int64_t c : stage_channels)
        if (c < 1) throw std::invalid_argument("NetworkConfig: stage channels must be >= 1");
    for (size_t s = 1; s < 5; ++s)
        if (stage_channels[s] % 4 != 0)
            throw std::invalid_argument("NetworkConfig: stage " + std::to_string(s + 1) +
                                        " channels " + std::to_string(stage_channels[s]) +
                                        " must be divisible by 4");
    for (int64_t n : mewb_counts)
        if (n < 1)
            throw std::invalid_argument("NetworkConfig: MewBlock counts must be >= 1");
    if (base_weight_extent < 1)
        throw std::invalid_argument("NetworkConfig: base_weight_extent must be >= 1");
    if (ffn_expansion <= 0.0)
        throw std::invalid_argument("NetworkConfig: ffn_expansion must be > 0");
}

std::string NetworkConfig::to_text() const {
    std::ostringstream os;
    os << "in_channels=" << in_channels << '\n';
    os << "num_classes=" << num_classes << '\n';
    os << "stage_channels=";
    for (size_t i = 0; i < 5; ++i) os << (i ? "," : "") << stage_channels[i];
    os << '\n';
    os << "mewb_counts=";
    for (size_t i = 0; i < 4; ++i) os << (i ? "," : "") << mewb_counts[i];
    os << '\n';
    os << "input_h=" << input_h << '\n';
    os << "input_w=" << input_w << '\n';
    os << "branches=" << bools_csv(branch_enabled) << '\n';
    os << "norm=" << (norm_kind == NormKind::Group ? "group" : "batch") << '\n';
    os << "base_weight_extent=" << base_weight_extent << '\n';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", ffn_expansion);
    os << "ffn_expansion=" << buf << '\n';
    return os.str();
}

NetworkConfig NetworkConfig::from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("NetworkConfig: bad line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    NetworkConfig cfg;
    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw std::invalid_argument(std::string("NetworkConfig: missing key '") + key + "'");
        return it->second;
    };
    cfg.in_channels = std::stoll(get("in_channels"));
    cfg.num_classes = std::stoll(get("num_classes"));
    {
        std::istringstream ss(get("stage_channels"));
        std::string tok;
        size_t i = 0;
        while (std::getline(ss, tok, ',') && i < 5) cfg.stage_channels[i++] = std::stoll(tok);
        if (i != 5) throw std::invalid_argument("NetworkConfig: stage_channels needs 5 values");
    }
    {
        std::istringstream ss(get("mewb_counts"));
        std::string tok;
        size_t i = 0;
        while (std::getline(ss, tok, ',') && i < 4) cfg.mewb_counts[i++] = std::stoll(tok);
        if (i != 4) throw std::invalid_argument("NetworkConfig: mewb_counts needs 4 values");
    }
    cfg.input_h = std::stoll(get("input_h"));
    cfg.input_w = std::stoll(get("input_w"));
    cfg.branch_enabled = parse_bools(get("branches"));
    const std::string& norm = get("norm");
    if (norm == "group")
        cfg.norm_kind = NormKind::Group;
    else if (norm == "batch")
        cfg.norm_kind = NormKind::Batch;
    else
        throw std::invalid_argument("NetworkConfig: norm must be group|batch, got '" + norm + "'");
    cfg.base_weight_extent = std::stoll(get("base_weight_extent"));
    cfg.ffn_expansion = std::stod(get("ffn_expansion"));
    return cfg;
}

Network Network::build(const NetworkConfig& cfg, uint64_t seed) {
    cfg.validate();
    Network net;
    net.cfg_ = cfg;
    Rng rng(seed);

    auto mew_cfg_for_stage = [&](int stage) { // stage in 2..5
        MewConfig mc;
        mc.channels = cfg.stage_channels[static_cast<size_t>(stage - 1)];
        mc.height = cfg.input_h >> (stage - 1);
        mc.width = cfg.input_w >> (stage - 1);
        mc.branch_enabled = cfg.branch_enabled;
        mc.norm_kind = cfg.norm_kind;
        mc.base_weight_extent = cfg.base_weight_extent;
        mc.ffn_expansion = cfg.ffn_expansion;
        return mc;
    };

    net.enc1_ = SeparableConv::make(net.params_, "enc1", cfg.in_channels, cfg.stage_channels[0],
                                    1, rng);
    for (int stage = 2; stage <= 5; ++stage) {
        EncStage& es = net.enc_[static_cast<size_t>(stage - 2)];
        const std::string prefix = "enc" + std::to_string(stage);
        es.down = SeparableConv::make(net.params_, prefix + ".down",
                                      cfg.stage_channels[static_cast<size_t>(stage - 2)],
                                      cfg.stage_channels[static_cast<size_t>(stage - 1)], 2, rng);
        const MewConfig mc = mew_cfg_for_stage(stage);
        const int64_t n = cfg.mewb_counts[static_cast<size_t>(stage - 2)];
        for (int64_t i = 0; i < n; ++i)
            es.blocks.push_back(
                MewBlock::make(net.params_, prefix + ".block" + std::to_string(i), mc, rng));
    }
    for (int level = 4; level >= 1; --level) {
        DecStage& ds = net.dec_[static_cast<size_t>(4 - level)];
        const std::string prefix = "dec" + std::to_string(level);
        ds.conv = SeparableConv::make(net.params_, prefix + ".conv",
                                      cfg.stage_channels[static_cast<size_t>(level)],
                                      cfg.stage_channels[static_cast<size_t>(level - 1)], 1, rng);
        if (level >= 2) {
            const MewConfig mc = mew_cfg_for_stage(level);
            const int64_t n = cfg.mewb_counts[static_cast<size_t>(level - 2)];
            for (int64_t i = 0; i < n; ++i)
                ds.blocks.push_back(
                    MewBlock::make(net.params_, prefix + ".block" + std::to_string(i), mc, rng));
        }
    }
    net.head_ = PointwiseConv::make(net.params_, "head", cfg.stage_channels[0],
                                    cfg.num_classes, rng);
    return net;
}

Tensor Network::forward(const Tensor& x, bool training) const {
    return forward_probed(x, training, nullptr);
}

Tensor Network::forward_probed(const Tensor& x, bool training,
                               std::vector<Tensor>* encoder_stages) const {
    if (x.shape().rank() != 4)
        throw std::invalid_argument("Network::forward: expected rank-4 input, got " +
                                    x.shape().str());
    if (x.shape()[1] != cfg_.in_channels || x.shape()[2] != cfg_.input_h ||
        x.shape()[3] != cfg_.input_w)
        throw std::invalid_argument("Network::forward: input " + x.shape().str() +
                                    " does not match configured (*, " +
                                    std::to_string(cfg_.in_channels) + ", " +
                                    std::to_string(cfg_.input_h) + ", " +
                                    std::to_string(cfg_.input_w) + ")");

    std::array<Tensor, 5> enc_out;
    enc_out[0] = enc1_.forward(x);
    probe_finite(enc_out[0], "enc1");
    for (int stage = 2; stage <= 5; ++stage) {
        const EncStage& es = enc_[static_cast<size_t>(stage - 2)];
        Tensor h = es.down.forward(enc_out[static_cast<size_t>(stage - 2)]);
        for (const MewBlock& b : es.blocks) h = b.forward(h, training);
        probe_finite(h, "enc" + std::to_string(stage));
        enc_out[static_cast<size_t>(stage - 1)] = h;
    }
    if (encoder_stages)
        encoder_stages->assign(enc_out.begin(), enc_out.end());

    Tensor h = enc_out[4];
    for (int level = 4; level >= 1; --level) {
        const DecStage& ds = dec_[static_cast<size_t>(4 - level)];
        h = bilinear_interpolate(h, h.shape()[2] * 2, h.shape()[3] * 2);
        h = ds.conv.forward(h);
        for (const MewBlock& b : ds.blocks) h = b.forward(h, training);
        h = add(h, enc_out[static_cast<size_t>(level - 1)]);
        probe_finite(h, "dec" + std::to_string(level));
    }
    Tensor logits = head_.forward(h);
    probe_finite(logits, "head");
    return logits;
}

} // namespace mew
