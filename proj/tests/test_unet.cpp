#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mew/autodiff.hpp"
#include "mew/checkpoint.hpp"
#include "mew/ops.hpp"
#include "mew/unet.hpp"
#include "testing/oracles.hpp"

using namespace mew;
using testing::max_abs_diff;
using testing::random_tensor;

namespace {

NetworkConfig toy_config() {
    NetworkConfig cfg;
    cfg.in_channels = 3;
    cfg.num_classes = 2;
    cfg.stage_channels = {4, 8, 16, 32, 64};
    cfg.mewb_counts = {1, 1, 1, 1};
    cfg.input_h = 16;
    cfg.input_w = 16;
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

// Independent census of learnable scalars, summed layer by layer from the
// architecture description.
int64_t expected_parameter_count(const NetworkConfig& cfg) {
    auto sep = [](int64_t cin, int64_t cout) { return cin * 9 + cout * cin + cout; };
    auto pointwise = [](int64_t cin, int64_t cout) { return cout * cin + cout; };
    auto inverted_residual = [&](int64_t c, int64_t kh, int64_t kw) {
        const int64_t hidden = 4 * c;
        return pointwise(c, hidden) + hidden * kh * kw + pointwise(hidden, c);
    };
    auto generator = [&](int64_t cq, int64_t t1, int64_t t2, int64_t kh, int64_t kw,
                         int64_t base_extent) {
        const int64_t base = cq * std::min(base_extent, t1) * std::min(base_extent, t2);
        return base + 3 * inverted_residual(cq, kh, kw);
    };
    auto mewb = [&](int64_t c, int64_t h, int64_t w) {
        const int64_t cq = c / 4;
        const int64_t e = cfg.base_weight_extent;
        int64_t n = 2 * c + 2 * c; // two norms, gamma+beta each
        n += generator(cq, h, w / 2 + 1, 3, 3, e);          // HW
        n += generator(cq, h, w / 2 + 1, 1, 3, e);          // CW
        n += generator(cq, h / 2 + 1, w, 3, 1, e);          // CH
        n += cq * 9;                                        // DW branch kernel
        const int64_t hidden = static_cast<int64_t>(c * cfg.ffn_expansion);
        n += pointwise(c, hidden) + pointwise(hidden, c);   // FFN
        return n;
    };

    const auto& sc = cfg.stage_channels;
    int64_t total = sep(cfg.in_channels, sc[0]);
    for (int s = 2; s <= 5; ++s) {
        const int64_t h = cfg.input_h >> (s - 1), w = cfg.input_w >> (s - 1);
        total += sep(sc[static_cast<size_t>(s - 2)], sc[static_cast<size_t>(s - 1)]);
        total += cfg.mewb_counts[static_cast<size_t>(s - 2)] *
                 mewb(sc[static_cast<size_t>(s - 1)], h, w);
    }
    for (int level = 4; level >= 1; --level) {
        total += sep(sc[static_cast<size_t>(level)], sc[static_cast<size_t>(level - 1)]);
        if (level >= 2) {
            const int64_t h = cfg.input_h >> (level - 1), w = cfg.input_w >> (level - 1);
            total += cfg.mewb_counts[static_cast<size_t>(level - 2)] *
                     mewb(sc[static_cast<size_t>(level - 1)], h, w);
        }
    }
    total += pointwise(sc[0], cfg.num_classes);
    return total;
}

} // namespace

TEST_CASE("build: two builds with the same seed are bitwise identical") {
    const NetworkConfig cfg = toy_config();
    Network a = Network::build(cfg, 1234);
    Network b = Network::build(cfg, 1234);
    REQUIRE(a.params().entries().size() == b.params().entries().size());
    for (size_t i = 0; i < a.params().entries().size(); ++i) {
        const auto& ea = a.params().entries()[i];
        const auto& eb = b.params().entries()[i];
        CHECK(ea.name == eb.name);
        auto va = ea.tensor.values();
        auto vb = eb.tensor.values();
        REQUIRE(va.size() == vb.size());
        for (size_t j = 0; j < va.size(); ++j) CHECK(va[j] == vb[j]);
    }
    Network c = Network::build(cfg, 1235);
    bool differs = false;
    for (size_t i = 0; i < a.params().entries().size() && !differs; ++i) {
        auto va = a.params().entries()[i].tensor.values();
        auto vc = c.params().entries()[i].tensor.values();
        for (size_t j = 0; j < va.size(); ++j)
            if (va[j] != vc[j]) {
                differs = true;
                break;
            }
    }
    CHECK(differs);
}

TEST_CASE("toy config: forward shape contract and determinism") {
    const NetworkConfig cfg = toy_config();
    Network net = Network::build(cfg, 7);
    Rng rng(77);
    Tensor x = random_tensor(Shape{1, 3, 16, 16}, rng);
    Tensor y1 = net.forward(x);
    CHECK(y1.shape() == Shape{1, 2, 16, 16});
    CHECK(y1.all_finite());
    Tensor y2 = net.forward(x);
    CHECK(max_abs_diff(y1.values(), y2.values()) == 0.0);

    // Same seed, new build: bitwise-equal logits.
    Network net2 = Network::build(cfg, 7);
    Tensor y3 = net2.forward(x);
    auto v1 = y1.values();
    auto v3 = y3.values();
    for (size_t i = 0; i < v1.size(); ++i) CHECK(v1[i] == v3[i]);
}

TEST_CASE("config validation rejects extents not divisible by 16") {
    NetworkConfig cfg = toy_config();
    cfg.input_h = 100;
    cfg.input_w = 100;
    CHECK_THROWS_AS(Network::build(cfg, 1), std::invalid_argument);

    NetworkConfig bad = toy_config();
    bad.stage_channels[2] = 18; // not divisible by 4
    CHECK_THROWS_AS(Network::build(bad, 1), std::invalid_argument);

    NetworkConfig zero = toy_config();
    zero.mewb_counts[1] = 0;
    CHECK_THROWS_AS(Network::build(zero, 1), std::invalid_argument);
}

TEST_CASE("forward rejects extent mismatches") {
    Network net = Network::build(toy_config(), 3);
    CHECK_THROWS_AS(net.forward(Tensor::zeros(Shape{1, 3, 32, 32})), std::invalid_argument);
    CHECK_THROWS_AS(net.forward(Tensor::zeros(Shape{1, 4, 16, 16})), std::invalid_argument);
}

TEST_CASE("parameter census matches an independent hand-summed count") {
    const NetworkConfig cfg = toy_config();
    Network net = Network::build(cfg, 5);
    CHECK(net.parameter_count() == expected_parameter_count(cfg));
    CHECK(net.parameter_count() > 0);

    // Doubling num_classes changes only the head contribution.
    NetworkConfig cfg2 = toy_config();
    cfg2.num_classes = 4;
    Network net2 = Network::build(cfg2, 5);
    const int64_t head_delta = (cfg.stage_channels[0] + 1) * (cfg2.num_classes - cfg.num_classes);
    CHECK(net2.parameter_count() - net.parameter_count() == head_delta);
}

TEST_CASE("parameter census matches on the default-shaped config at reduced depth") {
    // Default channel plan at a smaller input keeps the census fast while
    // still exercising the {32,64,128,256,512}/{1,2,2,4} structure.
    NetworkConfig cfg;
    cfg.input_h = 32;
    cfg.input_w = 32;
    Network net = Network::build(cfg, 11);
    CHECK(net.parameter_count() == expected_parameter_count(cfg));
}

TEST_CASE("encoder feature extents follow the stage plan (paper-scale input)") {
    NetworkConfig cfg;
    cfg.input_h = 224;
    cfg.input_w = 224;
    cfg.in_channels = 3;
    cfg.num_classes = 9;
    Network net = Network::build(cfg, 21);
    Rng rng(78);
    Tensor x = random_tensor(Shape{1, 3, 224, 224}, rng, 0, 1);
    std::vector<Tensor> stages;
    Tensor logits = net.forward_probed(x, false, &stages);
    CHECK(logits.shape() == Shape{1, 9, 224, 224});
    REQUIRE(stages.size() == 5);
    CHECK(stages[0].shape() == Shape{1, 32, 224, 224});
    CHECK(stages[4].shape() == Shape{1, 512, 14, 14});
    CHECK(logits.all_finite());
}

TEST_CASE("checkpoint: byte-identical save/load/save and bitwise logits") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mewnet_ckpt_test";
    fs::create_directories(dir);
    const std::string p1 = (dir / "a.ckpt").string();
    const std::string p2 = (dir / "b.ckpt").string();

    Network net = Network::build(toy_config(), 99);
    save_checkpoint(p1, net);
    Network loaded = load_checkpoint(p1);
    save_checkpoint(p2, loaded);
    CHECK(read_file(p1) == read_file(p2));
    CHECK(!read_file(p1).empty());

    Rng rng(79);
    Tensor probe = random_tensor(Shape{1, 3, 16, 16}, rng);
    auto y1 = net.forward(probe).values();
    auto y2 = loaded.forward(probe).values();
    for (size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);

    // Trainer-state section round-trips too.
    TrainerState ts;
    ts.epoch = 17;
    ts.step = 123;
    ts.best_val_dsc = 0.75;
    ts.optimizer_kind = "adamw";
    ts.slots.emplace_back("adamw.m:head.bias", Tensor::from_data(Shape{2}, {0.5, -0.25}));
    ts.rng_state = Rng(5).serialize();
    save_checkpoint(p1, net, &ts);
    std::optional<TrainerState> back;
    Network l2 = load_checkpoint(p1, &back);
    REQUIRE(back.has_value());
    CHECK(back->epoch == 17);
    CHECK(back->step == 123);
    CHECK(back->optimizer_kind == "adamw");
    REQUIRE(back->slots.size() == 1);
    CHECK(back->slots[0].first == "adamw.m:head.bias");
    CHECK(back->slots[0].second.values()[1] == -0.25);
    save_checkpoint(p2, l2, &*back);
    CHECK(read_file(p1) == read_file(p2));

    fs::remove_all(dir);
}

TEST_CASE("checkpoint: corrupt magic is rejected") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mewnet_ckpt_bad";
    fs::create_directories(dir);
    const std::string p = (dir / "bad.ckpt").string();
    std::ofstream(p, std::ios::binary) << "NOTACKPT garbage";
    CHECK_THROWS_AS(load_checkpoint(p), std::runtime_error);
    fs::remove_all(dir);
}
