#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mew/autodiff.hpp"
#include "mew/data.hpp"
#include "mew/loss.hpp"
#include "mew/optim.hpp"
#include "mew/train.hpp"
#include "testing/oracles.hpp"

using namespace mew;
namespace fs = std::filesystem;
using testing::gradcheck_max_rel_err;
using testing::random_tensor;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("mewnet_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

MaskArray checkerboard(int64_t h, int64_t w) {
    MaskArray m = MaskArray::zeros(1, h, w);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) m.at(0, y, x) = static_cast<int32_t>((x + y) % 2);
    return m;
}

} // namespace

TEST_CASE("bce_dice_loss: perfect predictions drive the loss to zero") {
    const MaskArray gt = checkerboard(4, 4);
    Tensor logits = Tensor::zeros(Shape{1, 2, 4, 4});
    auto lv = logits.values();
    for (int64_t i = 0; i < 16; ++i) {
        const int32_t y = gt.v[static_cast<size_t>(i)];
        lv[static_cast<size_t>(y * 16 + i)] = 40.0; // saturate the right class
        lv[static_cast<size_t>((1 - y) * 16 + i)] = -40.0;
    }
    const Tensor loss = bce_dice_loss(logits, gt, LossWeights{0.5, 0.5});
    CHECK(loss.values()[0] < 1e-4);

    // Single-logit head, same idea.
    Tensor single = Tensor::zeros(Shape{1, 1, 4, 4});
    for (int64_t i = 0; i < 16; ++i)
        single.values()[static_cast<size_t>(i)] = gt.v[static_cast<size_t>(i)] ? 40.0 : -40.0;
    CHECK(bce_dice_loss(single, gt, LossWeights{0.5, 0.5}).values()[0] < 1e-4);
}

TEST_CASE("bce_dice_loss: uniform probability gives ln 2 cross-entropy per pixel") {
    const MaskArray gt = checkerboard(4, 4);
    // Equal logits -> softmax 0.5 everywhere.
    Tensor logits = Tensor::zeros(Shape{1, 2, 4, 4});
    const Tensor ce_only = bce_dice_loss(logits, gt, LossWeights{1.0, 0.0});
    CHECK(ce_only.values()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tensor single = Tensor::zeros(Shape{1, 1, 4, 4});
    const Tensor ce_sig = bce_dice_loss(single, gt, LossWeights{1.0, 0.0});
    CHECK(ce_sig.values()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("bce_dice_loss: gradient matches finite differences on a 4x4 toy case") {
    Rng rng(110);
    const LossWeights w{0.5, 0.5};

    // Softmax path with three classes.
    MaskArray gt = MaskArray::zeros(1, 4, 4);
    for (int64_t i = 0; i < 16; ++i) gt.v[static_cast<size_t>(i)] = static_cast<int32_t>(i % 3);
    Tensor logits = random_tensor(Shape{1, 3, 4, 4}, rng, -1, 1, true);
    Tape tape;
    {
        Tape::Scope scope(tape);
        tape.backward(bce_dice_loss(logits, gt, w));
    }
    auto eval = [&]() { return bce_dice_loss(logits, gt, w).values()[0]; };
    CHECK(gradcheck_max_rel_err(logits, eval, logits.grad()) < 1e-4);

    // Sigmoid path.
    const MaskArray gt2 = checkerboard(4, 4);
    Tensor single = random_tensor(Shape{1, 1, 4, 4}, rng, -1, 1, true);
    Tape tape2;
    {
        Tape::Scope scope(tape2);
        tape2.backward(bce_dice_loss(single, gt2, w));
    }
    auto eval2 = [&]() { return bce_dice_loss(single, gt2, w).values()[0]; };
    CHECK(gradcheck_max_rel_err(single, eval2, single.grad()) < 1e-4);
}

TEST_CASE("bce_dice_loss: out-of-range labels and shape mismatches are rejected") {
    MaskArray gt = MaskArray::zeros(1, 4, 4);
    gt.v[3] = 5;
    CHECK_THROWS_AS(bce_dice_loss(Tensor::zeros(Shape{1, 2, 4, 4}), gt, LossWeights{}),
                    std::invalid_argument);
    MaskArray ok = MaskArray::zeros(1, 4, 4);
    CHECK_THROWS_AS(bce_dice_loss(Tensor::zeros(Shape{1, 2, 8, 8}), ok, LossWeights{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(bce_dice_loss(Tensor::zeros(Shape{1, 2, 4, 4}), ok, LossWeights{0.0, 0.0}),
                    std::invalid_argument);
}

TEST_CASE("cosine_lr: endpoints and midpoint") {
    CHECK(cosine_lr(0, 100, 1e-3, 1e-6) == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(cosine_lr(100, 100, 1e-3, 1e-6) == doctest::Approx(1e-6).epsilon(1e-15));
    CHECK(cosine_lr(50, 100, 1e-3, 1e-6) ==
          doctest::Approx((1e-3 + 1e-6) / 2).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_lr(101, 100, 1e-3, 1e-6), std::invalid_argument);
}

TEST_CASE("adamw: zero gradient is a no-op from fresh state; decay-only shrinks weights") {
    ParamStore ps;
    Tensor w = ps.add("w", Tensor::from_data(Shape{3}, {1.0, -2.0, 0.5}));
    w.grad(); // allocate zero grads

    auto opt = make_adamw(0.9, 0.999, 1e-8, 0.0);
    opt->step(ps, 1e-3);
    CHECK(w.values()[0] == 1.0);
    CHECK(w.values()[1] == -2.0);
    CHECK(w.values()[2] == 0.5);

    auto opt_wd = make_adamw(0.9, 0.999, 1e-8, 0.01);
    ParamStore ps2;
    Tensor w2 = ps2.add("w", Tensor::from_data(Shape{1}, {2.0}));
    w2.grad();
    opt_wd->step(ps2, 0.1);
    CHECK(w2.values()[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-15));
}

TEST_CASE("adamw: three steps on f(w) = w^2 match a scalar hand trace") {
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;

    ParamStore ps;
    Tensor w = ps.add("w", Tensor::from_data(Shape{1}, {1.0}));
    auto opt = make_adamw(b1, b2, eps, wd);

    // Independent scalar re-derivation of the update equations.
    double ref_w = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
        const double g = 2.0 * w.values()[0];
        w.zero_grad();
        w.grad()[0] = g;
        opt->step(ps, lr);

        const double ref_g = 2.0 * ref_w;
        ref_w -= lr * wd * ref_w;
        m = b1 * m + (1 - b1) * ref_g;
        v = b2 * v + (1 - b2) * ref_g * ref_g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        ref_w -= lr * mh / (std::sqrt(vh) + eps);

        CHECK(w.values()[0] == doctest::Approx(ref_w).epsilon(1e-14));
    }
}

TEST_CASE("sgd: plain step, velocity coast, and a two-step hand trace") {
    ParamStore ps;
    Tensor w = ps.add("w", Tensor::from_data(Shape{1}, {1.0}));
    auto plain = make_sgd(0.0, 0.0);
    w.grad()[0] = 0.5;
    plain->step(ps, 0.2);
    CHECK(w.values()[0] == doctest::Approx(1.0 - 0.2 * 0.5).epsilon(1e-15));

    // Velocity coast: zero gradient with prior velocity v keeps moving by
    // lr * momentum * v.
    ParamStore ps2;
    Tensor w2 = ps2.add("w", Tensor::from_data(Shape{1}, {1.0}));
    auto mom = make_sgd(0.9, 0.0);
    w2.grad()[0] = 1.0; // builds velocity v = 1
    mom->step(ps2, 0.1);
    const double after_first = w2.values()[0];
    CHECK(after_first == doctest::Approx(0.9).epsilon(1e-15));
    w2.zero_grad();
    mom->step(ps2, 0.1);
    CHECK(w2.values()[0] == doctest::Approx(after_first - 0.1 * 0.9 * 1.0).epsilon(1e-14));

    // Two steps on f(w)=w^2, reference recomputed by hand.
    ParamStore ps3;
    Tensor w3 = ps3.add("w", Tensor::from_data(Shape{1}, {1.0}));
    auto opt = make_sgd(0.9, 0.0);
    double ref_w = 1.0, vel = 0.0;
    for (int t = 0; t < 2; ++t) {
        const double g = 2.0 * w3.values()[0];
        w3.zero_grad();
        w3.grad()[0] = g;
        opt->step(ps3, 0.05);
        vel = 0.9 * vel + 2.0 * ref_w;
        ref_w -= 0.05 * vel;
        CHECK(w3.values()[0] == doctest::Approx(ref_w).epsilon(1e-14));
    }
}

TEST_CASE("train: one epoch emits one record; missing dataset fails before any epoch") {
    const fs::path data = temp_dir("train_one");
    SynthConfig sc;
    sc.count = 6;
    sc.extent = 16;
    sc.seed = 3;
    sc.train_fraction = 1.0;
    synth_generate(data.string(), sc);

    TrainConfig tc;
    tc.data_dir = data.string();
    tc.train_split = "train";
    tc.val_split = "train";
    tc.net.in_channels = 1;
    tc.net.num_classes = 2;
    tc.net.stage_channels = {4, 8, 16, 32, 64};
    tc.net.mewb_counts = {1, 1, 1, 1};
    tc.net.input_h = 16;
    tc.net.input_w = 16;
    tc.epochs = 1;
    tc.batch_size = 4;
    tc.seed = 1;
    tc.out_dir = (data / "run").string();

    const TrainResult res = train(tc);
    CHECK(res.log.size() == 1);
    CHECK(res.log[0].epoch == 0);
    CHECK(std::isfinite(res.log[0].loss));
    CHECK(res.log[0].lr == doctest::Approx(tc.lr));
    CHECK(fs::exists(res.best_checkpoint));
    CHECK(fs::exists(res.final_checkpoint));

    // Log format: epoch<TAB>loss<TAB>lr<TAB>val_dsc<TAB>val_miou.
    const std::string log = read_file(res.log_path);
    CHECK(std::count(log.begin(), log.end(), '\n') == 1);
    CHECK(std::count(log.begin(), log.end(), '\t') == 4);

    TrainConfig missing = tc;
    missing.data_dir = (data / "nope").string();
    CHECK_THROWS_AS(train(missing), std::runtime_error);

    fs::remove_all(data);
}

TEST_CASE("train: identical seeds produce byte-identical logs") {
    const fs::path data = temp_dir("train_det");
    SynthConfig sc;
    sc.count = 8;
    sc.extent = 16;
    sc.seed = 11;
    sc.train_fraction = 0.75;
    synth_generate(data.string(), sc);

    TrainConfig tc;
    tc.data_dir = data.string();
    tc.val_split = "test";
    tc.net.in_channels = 1;
    tc.net.num_classes = 2;
    tc.net.stage_channels = {4, 8, 16, 32, 64};
    tc.net.mewb_counts = {1, 1, 1, 1};
    tc.net.input_h = 16;
    tc.net.input_w = 16;
    tc.epochs = 3;
    tc.batch_size = 4;
    tc.seed = 21;

    tc.out_dir = (data / "runA").string();
    const TrainResult a = train(tc);
    tc.out_dir = (data / "runB").string();
    const TrainResult b = train(tc);
    CHECK(read_file(a.log_path) == read_file(b.log_path));
    CHECK(!read_file(a.log_path).empty());

    TrainConfig other = tc;
    other.seed = 22;
    other.out_dir = (data / "runC").string();
    const TrainResult c = train(other);
    CHECK(read_file(a.log_path) != read_file(c.log_path));

    fs::remove_all(data);
}

TEST_CASE("train + evaluate: checkpoint round-trip reproduces logits and reports") {
    const fs::path data = temp_dir("train_eval");
    SynthConfig sc;
    sc.count = 8;
    sc.extent = 16;
    sc.seed = 13;
    sc.train_fraction = 0.5;
    synth_generate(data.string(), sc);

    TrainConfig tc;
    tc.data_dir = data.string();
    tc.val_split = "test";
    tc.net.in_channels = 1;
    tc.net.num_classes = 2;
    tc.net.stage_channels = {4, 8, 16, 32, 64};
    tc.net.mewb_counts = {1, 1, 1, 1};
    tc.net.input_h = 16;
    tc.net.input_w = 16;
    tc.epochs = 2;
    tc.batch_size = 4;
    tc.seed = 8;
    tc.out_dir = (data / "run").string();
    const TrainResult res = train(tc);

    // Bitwise-identical probe logits through the checkpoint.
    std::optional<TrainerState> ts;
    const Network net = load_checkpoint(res.final_checkpoint, &ts);
    REQUIRE(ts.has_value());
    CHECK(ts->optimizer_kind == "adamw");
    Rng rng(120);
    Tensor probe = testing::random_tensor(Shape{1, 1, 16, 16}, rng, 0, 1);
    const Network net2 = load_checkpoint(res.final_checkpoint);
    auto y1 = net.forward(probe).values();
    auto y2 = net2.forward(probe).values();
    for (size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);

    EvalConfig ec;
    ec.checkpoint = res.final_checkpoint;
    ec.data_dir = data.string();
    ec.split = "test";
    ec.report_prefix = (data / "report").string();
    ec.export_masks_dir = (data / "pred").string();
    const MetricsReport r1 = evaluate(ec);
    const MetricsReport r2 = evaluate(ec);
    CHECK(r1.mean_dsc == r2.mean_dsc);
    CHECK(r1.mean_iou == r2.mean_iou);
    CHECK(fs::exists(ec.report_prefix + ".tsv"));
    CHECK(fs::exists(ec.report_prefix + ".json"));
    const std::string tsv = read_file(ec.report_prefix + ".tsv");
    CHECK(tsv.find("class\tmIoU\tDSC\tAcc\tSpe\tSen\tHD95") == 0);
    // Exported prediction masks exist for every test sample.
    size_t exported = 0;
    for ([[maybe_unused]] const auto& p : fs::directory_iterator(ec.export_masks_dir))
        ++exported;
    CHECK(exported == 4);

    fs::remove_all(data);
}
