#include "mew/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mew/autodiff.hpp"
#include "mew/optim.hpp"
#include "mew/pgm.hpp"

namespace fs = std::filesystem;

namespace mew {

namespace {

std::vector<Sample> load_split(const DatasetManifest& m, const std::string& split,
                               int num_classes) {
    std::vector<Sample> out;
    for (const ManifestEntry* e : m.split_entries(split)) out.push_back(load_sample(m, *e, num_classes));
    if (out.empty())
        throw std::runtime_error("train: split '" + split + "' is empty in " + m.root);
    return out;
}

double grad_norm(ParamStore& ps) {
    double s = 0;
    for (auto& e : ps.entries()) {
        if (!e.trainable) continue;
        for (double g : e.tensor.grad()) s += g * g;
    }
    return std::sqrt(s);
}

void scale_grads(ParamStore& ps, double factor) {
    for (auto& e : ps.entries()) {
        if (!e.trainable) continue;
        for (double& g : e.tensor.grad()) g *= factor;
    }
}

// Mean DSC / mIoU of argmax predictions over a sample list.
std::pair<double, double> validate(const Network& net, const std::vector<Sample>& samples,
                                   int64_t batch_size, int num_classes) {
    MetricsAccumulator acc(num_classes, 1.0, 1.0, /*with_hd95=*/false);
    for (const Batch& b : batch_iter(samples, batch_size, /*shuffle_seed=*/0)) {
        const Tensor logits = net.forward(b.images, /*training=*/false);
        acc.add(argmax_mask(logits), b.masks);
    }
    const MetricsReport r = acc.report();
    return {r.mean_dsc, r.mean_iou};
}

std::string fmt_log(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.8g", v);
    return buf;
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& kind, double momentum, double wd) {
    if (kind == "adamw") return make_adamw(0.9, 0.999, 1e-8, wd);
    if (kind == "sgd") return make_sgd(momentum, wd);
    throw std::invalid_argument("train: unknown optimizer '" + kind + "' (adamw|sgd)");
}

} // namespace

TrainResult train(const TrainConfig& cfg) {
    if (cfg.lr <= 0) throw std::invalid_argument("train: lr must be > 0");
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (cfg.loss_weights.bce + cfg.loss_weights.dice <= 0)
        throw std::invalid_argument("train: loss weights must sum to > 0");

    const DatasetManifest manifest = DatasetManifest::load(
        (fs::path(cfg.data_dir) / "manifest.tsv").string());
    const int num_classes = std::max<int>(2, static_cast<int>(cfg.net.num_classes));
    std::vector<Sample> train_samples = load_split(manifest, cfg.train_split, num_classes);
    std::vector<Sample> val_samples = cfg.val_split == cfg.train_split
                                          ? train_samples
                                          : load_split(manifest, cfg.val_split, num_classes);

    fs::create_directories(cfg.out_dir);
    const std::string log_path = (fs::path(cfg.out_dir) / "train_log.tsv").string();
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("train: cannot open log '" + log_path + "'");

    const Rng master(cfg.seed);
    Network net = Network::build(cfg.net, master.fork(1).seed());
    auto opt = make_optimizer(cfg.optimizer, cfg.momentum, cfg.weight_decay);

    TrainResult result;
    result.log_path = log_path;
    result.best_checkpoint = (fs::path(cfg.out_dir) / "best.ckpt").string();
    result.final_checkpoint = (fs::path(cfg.out_dir) / "final.ckpt").string();
    result.best_val_dsc = -1.0;

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr, cfg.lr_min);
        const uint64_t shuffle_seed = master.fork(2).fork(static_cast<uint64_t>(epoch)).seed();
        const Rng aug_rng = master.fork(3).fork(static_cast<uint64_t>(epoch));

        std::vector<Sample> epoch_samples;
        epoch_samples.reserve(train_samples.size());
        for (size_t i = 0; i < train_samples.size(); ++i)
            epoch_samples.push_back(cfg.augment
                                        ? augment(train_samples[i], aug_rng.fork(i).seed())
                                        : train_samples[i]);

        double loss_sum = 0;
        int64_t seen = 0;
        for (Batch& b : batch_iter(epoch_samples, cfg.batch_size, shuffle_seed)) {
            Tape tape;
            double batch_loss;
            {
                Tape::Scope scope(tape);
                const Tensor logits = net.forward(b.images, /*training=*/true);
                const Tensor loss = bce_dice_loss(logits, b.masks, cfg.loss_weights);
                batch_loss = loss.values()[0];
                net.params().zero_grads();
                tape.backward(loss);
            }
            if (cfg.clip_norm > 0) {
                const double n = grad_norm(net.params());
                if (n > cfg.clip_norm) scale_grads(net.params(), cfg.clip_norm / n);
            }
            opt->step(net.params(), lr);
            const int64_t bs = b.images.shape()[0];
            loss_sum += batch_loss * static_cast<double>(bs);
            seen += bs;
        }
        const double epoch_loss = loss_sum / static_cast<double>(seen);

        const auto [val_dsc, val_miou] = validate(net, val_samples, cfg.batch_size, num_classes);
        log << epoch << '\t' << fmt_log(epoch_loss) << '\t' << fmt_log(lr) << '\t'
            << fmt_log(val_dsc) << '\t' << fmt_log(val_miou) << '\n';
        log.flush();
        result.log.push_back(EpochRecord{epoch, epoch_loss, lr, val_dsc, val_miou});

        if (val_dsc > result.best_val_dsc) {
            result.best_val_dsc = val_dsc;
            TrainerState ts;
            ts.epoch = epoch;
            ts.step = opt->step_count();
            ts.best_val_dsc = val_dsc;
            ts.optimizer_kind = opt->kind();
            ts.slots = opt->slots();
            ts.rng_state = master.serialize();
            save_checkpoint(result.best_checkpoint, net, &ts);
        }
    }

    TrainerState ts;
    ts.epoch = cfg.epochs - 1;
    ts.step = opt->step_count();
    ts.best_val_dsc = result.best_val_dsc;
    ts.optimizer_kind = opt->kind();
    ts.slots = opt->slots();
    ts.rng_state = master.serialize();
    save_checkpoint(result.final_checkpoint, net, &ts);
    return result;
}

MetricsReport evaluate(const EvalConfig& cfg) {
    const Network net = load_checkpoint(cfg.checkpoint);
    const DatasetManifest manifest = DatasetManifest::load(
        (fs::path(cfg.data_dir) / "manifest.tsv").string());
    const int num_classes = std::max<int>(2, static_cast<int>(net.config().num_classes));
    const std::vector<Sample> samples = load_split(manifest, cfg.split, num_classes);

    if (!cfg.export_masks_dir.empty()) fs::create_directories(cfg.export_masks_dir);

    MetricsAccumulator acc(num_classes, cfg.spacing_h, cfg.spacing_w);
    for (const Batch& b : batch_iter(samples, 8, /*shuffle_seed=*/0)) {
        const Tensor logits = net.forward(b.images, /*training=*/false);
        const MaskArray pred = argmax_mask(logits);
        acc.add(pred, b.masks);
        if (!cfg.export_masks_dir.empty()) {
            const int scale = num_classes > 1 ? 255 / (num_classes - 1) : 255;
            for (int64_t i = 0; i < pred.batch; ++i) {
                PgmImage out;
                out.width = pred.width;
                out.height = pred.height;
                out.maxval = 255;
                out.pixels.resize(static_cast<size_t>(pred.height * pred.width));
                for (int64_t p = 0; p < pred.height * pred.width; ++p)
                    out.pixels[static_cast<size_t>(p)] = static_cast<uint16_t>(
                        pred.v[static_cast<size_t>(i * pred.height * pred.width + p)] * scale);
                save_pgm(out, (fs::path(cfg.export_masks_dir) / (b.ids[static_cast<size_t>(i)] + ".pgm"))
                                  .string());
            }
        }
    }

    const MetricsReport report = acc.report();
    if (!cfg.report_prefix.empty()) {
        std::ofstream tsv(cfg.report_prefix + ".tsv", std::ios::trunc);
        tsv << report_tsv(report);
        std::ofstream json(cfg.report_prefix + ".json", std::ios::trunc);
        json << report_json(report);
    }
    return report;
}

namespace {

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

} // namespace

std::vector<AblateRow> ablate(const AblateConfig& cfg) {
    struct RowSpec {
        const char* name;
        std::array<bool, 4> branches; // HW, CW, CH, DW
        NormKind norm;
    };
    // Branch sets follow the ablation ladder: depthwise only (with the
    // BatchNorm variant), then spectral branches added one axis at a time,
    // the three spectral axes without the depthwise path, and the full block.
    const RowSpec specs[6] = {
        {"dw-only+batchnorm", {false, false, false, true}, NormKind::Batch},
        {"dw-only", {false, false, false, true}, NormKind::Group},
        {"dw+hw", {true, false, false, true}, NormKind::Group},
        {"dw+hw+cw", {true, true, false, true}, NormKind::Group},
        {"hw+cw+ch", {true, true, true, false}, NormKind::Group},
        {"all-branches", {true, true, true, true}, NormKind::Group},
    };

    std::vector<AblateRow> rows;
    for (const RowSpec& spec : specs) {
        AblateRow row;
        row.name = spec.name;
        row.branches = spec.branches;
        row.norm = spec.norm;
        for (uint64_t seed : cfg.seeds) {
            TrainConfig tc;
            tc.data_dir = cfg.data_dir;
            tc.train_split = "train";
            tc.val_split = "test";
            tc.net = cfg.net;
            tc.net.branch_enabled = spec.branches;
            tc.net.norm_kind = spec.norm;
            tc.optimizer = cfg.optimizer;
            tc.lr = cfg.lr;
            tc.lr_min = cfg.lr_min;
            tc.weight_decay = cfg.weight_decay;
            tc.epochs = cfg.epochs;
            tc.batch_size = cfg.batch_size;
            tc.augment = cfg.augment;
            tc.seed = seed;
            tc.out_dir = (fs::path(cfg.out_dir) / (row.name + "_seed" + std::to_string(seed)))
                             .string();
            const TrainResult res = train(tc);

            EvalConfig ec;
            ec.checkpoint = res.final_checkpoint;
            ec.data_dir = cfg.data_dir;
            ec.split = "test";
            const MetricsReport r = evaluate(ec);
            row.miou_per_seed.push_back(r.mean_iou);
            row.dsc_per_seed.push_back(r.mean_dsc);
        }
        row.median_miou = median3(row.miou_per_seed);
        row.median_dsc = median3(row.dsc_per_seed);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_table(const std::vector<AblateRow>& rows) {
    std::ostringstream os;
    os << "config\tHW\tCW\tCH\tDW\tnorm\tmiou_median\tdsc_median\tmiou_seeds\tdsc_seeds\n";
    auto mark = [](bool b) { return b ? "x" : "-"; };
    for (const AblateRow& r : rows) {
        os << r.name << '\t' << mark(r.branches[0]) << '\t' << mark(r.branches[1]) << '\t'
           << mark(r.branches[2]) << '\t' << mark(r.branches[3]) << '\t'
           << (r.norm == NormKind::Group ? "group" : "batch") << '\t';
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f", r.median_miou);
        os << buf << '\t';
        std::snprintf(buf, sizeof(buf), "%.4f", r.median_dsc);
        os << buf << '\t';
        for (size_t i = 0; i < r.miou_per_seed.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.4f", r.miou_per_seed[i]);
            os << (i ? "," : "") << buf;
        }
        os << '\t';
        for (size_t i = 0; i < r.dsc_per_seed.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.4f", r.dsc_per_seed[i]);
            os << (i ? "," : "") << buf;
        }
        os << '\n';
    }
    return os.str();
}

} // namespace mew
