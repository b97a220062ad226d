#include "mew/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mew/pgm.hpp"

namespace fs = std::filesystem;

namespace mew {

namespace {

std::string join(const std::string& root, const std::string& rel) {
    return (fs::path(root) / rel).string();
}

// Analytic shape in continuous pixel coordinates.
struct ShapeSpec {
    bool ellipse = true;
    double cy = 0, cx = 0, ry = 1, rx = 1;
    int cls = 1;
    bool inside(double y, double x) const {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        return ellipse ? dy * dy + dx * dx <= 1.0 : std::abs(y - cy) <= ry && std::abs(x - cx) <= rx;
    }
};

double coverage(const ShapeSpec& s, int64_t y, int64_t x) {
    int in = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (s.inside(static_cast<double>(y) + (i + 0.5) / 4.0,
                         static_cast<double>(x) + (j + 0.5) / 4.0))
                ++in;
    return in / 16.0;
}

std::vector<ShapeSpec> sample_shapes(Rng& rng, int64_t extent, int num_classes) {
    const double e = static_cast<double>(extent);
    std::vector<ShapeSpec> shapes;
    for (int cls = 1; cls < num_classes; ++cls) {
        ShapeSpec s;
        s.cls = cls;
        s.ellipse = rng.coin();
        s.cy = rng.uniform(0.3, 0.7) * e;
        s.cx = rng.uniform(0.3, 0.7) * e;
        const double lo = num_classes > 2 ? 0.12 : 0.16;
        const double hi = num_classes > 2 ? 0.20 : 0.34;
        s.ry = rng.uniform(lo, hi) * e;
        s.rx = rng.uniform(lo, hi) * e;
        if (!s.ellipse) { // same area scale for rectangles
            s.ry *= 0.886;
            s.rx *= 0.886;
        }
        shapes.push_back(s);
    }
    return shapes;
}

// Deterministic fallback: disjoint ellipses that always land in range.
std::vector<ShapeSpec> fallback_shapes(int64_t extent, int num_classes) {
    const double e = static_cast<double>(extent);
    const double centers[3][2] = {{0.32, 0.32}, {0.32, 0.68}, {0.68, 0.5}};
    std::vector<ShapeSpec> shapes;
    for (int cls = 1; cls < num_classes && cls <= 3; ++cls) {
        ShapeSpec s;
        s.cls = cls;
        s.cy = centers[cls - 1][0] * e;
        s.cx = centers[cls - 1][1] * e;
        s.ry = s.rx = 0.15 * e;
        shapes.push_back(s);
    }
    return shapes;
}

MaskArray render_mask(const std::vector<ShapeSpec>& shapes, int64_t extent) {
    MaskArray m = MaskArray::zeros(1, extent, extent);
    for (int64_t y = 0; y < extent; ++y)
        for (int64_t x = 0; x < extent; ++x)
            for (const ShapeSpec& s : shapes)
                if (s.inside(static_cast<double>(y) + 0.5, static_cast<double>(x) + 0.5))
                    m.at(0, y, x) = s.cls;
    return m;
}

double foreground_fraction(const MaskArray& m) {
    int64_t fg = 0;
    for (int32_t v : m.v)
        if (v != 0) ++fg;
    return static_cast<double>(fg) / static_cast<double>(m.v.size());
}

uint16_t quantize8(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<uint16_t>(std::lround(c * 255.0));
}

} // namespace

std::vector<const ManifestEntry*> DatasetManifest::split_entries(const std::string& split) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
        if (e.split == split) out.push_back(&e);
    return out;
}

DatasetManifest DatasetManifest::load(const std::string& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) throw std::runtime_error("manifest: cannot open '" + manifest_path + "'");
    DatasetManifest m;
    m.root = fs::path(manifest_path).parent_path().string();
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::array<std::string, 4> f;
        std::istringstream ls(line);
        for (int i = 0; i < 4; ++i)
            if (!std::getline(ls, f[static_cast<size_t>(i)], '\t'))
                throw std::runtime_error("manifest: " + manifest_path + ":" +
                                         std::to_string(lineno) + ": expected 4 tab fields");
        m.entries.push_back(ManifestEntry{f[0], f[1], f[2], f[3]});
    }
    for (size_t i = 0; i < m.entries.size(); ++i)
        for (size_t j = i + 1; j < m.entries.size(); ++j)
            if (m.entries[i].id == m.entries[j].id)
                throw std::runtime_error("manifest: duplicate id '" + m.entries[i].id + "'");
    for (const auto& e : m.entries) {
        std::string img = e.image_path;
        if (img.size() > 4 && img.substr(img.size() - 4) == ".rgb")
            img = img.substr(0, img.size() - 4) + ".r.pgm";
        if (!fs::exists(join(m.root, img)))
            throw std::runtime_error("manifest: missing image file '" + img + "' for id '" +
                                     e.id + "'");
        if (!fs::exists(join(m.root, e.mask_path)))
            throw std::runtime_error("manifest: missing mask file '" + e.mask_path +
                                     "' for id '" + e.id + "'");
    }
    return m;
}

void DatasetManifest::save(const std::string& manifest_path) const {
    std::ofstream os(manifest_path, std::ios::trunc);
    if (!os) throw std::runtime_error("manifest: cannot open '" + manifest_path + "' for writing");
    for (const auto& e : entries)
        os << e.id << '\t' << e.image_path << '\t' << e.mask_path << '\t' << e.split << '\n';
}

DatasetManifest synth_generate(const std::string& root_dir, const SynthConfig& cfg) {
    if (cfg.extent < 16 || cfg.extent % 16 != 0)
        throw std::invalid_argument("synth_generate: extent must be divisible by 16");
    if (cfg.num_classes < 2 || cfg.num_classes > 4)
        throw std::invalid_argument("synth_generate: num_classes must be in [2,4]");
    if (cfg.count < 1) throw std::invalid_argument("synth_generate: count must be >= 1");

    fs::create_directories(fs::path(root_dir) / "images");
    fs::create_directories(fs::path(root_dir) / "masks");

    const Rng master(cfg.seed);
    DatasetManifest m;
    m.root = root_dir;

    for (int64_t i = 0; i < cfg.count; ++i) {
        Rng shape_rng = master.fork(0x100000 + static_cast<uint64_t>(i));
        Rng pixel_rng = master.fork(0x200000 + static_cast<uint64_t>(i));

        std::vector<ShapeSpec> shapes;
        MaskArray mask;
        bool ok = false;
        for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
            shapes = sample_shapes(shape_rng, cfg.extent, cfg.num_classes);
            mask = render_mask(shapes, cfg.extent);
            const double f = foreground_fraction(mask);
            ok = f > 0.06 && f < 0.55;
        }
        if (!ok) {
            shapes = fallback_shapes(cfg.extent, cfg.num_classes);
            mask = render_mask(shapes, cfg.extent);
        }

        // Textured background: linear ramp plus uniform noise.
        const double base = pixel_rng.uniform(0.18, 0.32);
        const double gy = pixel_rng.uniform(-0.18, 0.18);
        const double gx = pixel_rng.uniform(-0.18, 0.18);
        const double fg_val = pixel_rng.uniform(0.62, 0.85);
        const double noise_amp = 0.05;

        PgmImage img;
        img.width = cfg.extent;
        img.height = cfg.extent;
        img.maxval = 255;
        img.pixels.resize(static_cast<size_t>(cfg.extent * cfg.extent));
        const double e1 = static_cast<double>(cfg.extent - 1);
        for (int64_t y = 0; y < cfg.extent; ++y)
            for (int64_t x = 0; x < cfg.extent; ++x) {
                double cov = 0.0;
                for (const ShapeSpec& s : shapes) cov = std::max(cov, coverage(s, y, x));
                const double bg =
                    base + gy * static_cast<double>(y) / e1 + gx * static_cast<double>(x) / e1;
                const double v = bg + (fg_val - bg) * cov +
                                 noise_amp * (pixel_rng.uniform() * 2.0 - 1.0);
                img.pixels[static_cast<size_t>(y * cfg.extent + x)] = quantize8(v);
            }

        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "s%04lld", static_cast<long long>(i));
        const std::string id = idbuf;
        const std::string img_rel = "images/" + id + ".pgm";
        const std::string mask_rel = "masks/" + id + ".pgm";
        save_pgm(img, join(root_dir, img_rel));

        PgmImage mimg;
        mimg.width = cfg.extent;
        mimg.height = cfg.extent;
        mimg.maxval = std::max(1, cfg.num_classes - 1);
        mimg.pixels.assign(mask.v.begin(), mask.v.end());
        save_pgm(mimg, join(root_dir, mask_rel));

        m.entries.push_back(ManifestEntry{id, img_rel, mask_rel, ""});
    }

    // Seeded shuffle, first `train_fraction` to train, rest to test.
    const auto order = shuffled_indices(static_cast<size_t>(cfg.count),
                                        master.fork(0x300000).seed());
    const auto n_train = static_cast<size_t>(
        std::llround(cfg.train_fraction * static_cast<double>(cfg.count)));
    for (size_t r = 0; r < order.size(); ++r)
        m.entries[order[r]].split = r < n_train ? "train" : "test";

    m.save(join(root_dir, "manifest.tsv"));
    return m;
}

Sample load_sample(const DatasetManifest& m, const ManifestEntry& e, int num_classes) {
    Sample s;
    s.id = e.id;

    std::vector<PgmImage> planes;
    if (e.image_path.size() > 4 && e.image_path.substr(e.image_path.size() - 4) == ".rgb") {
        const std::string stem = e.image_path.substr(0, e.image_path.size() - 4);
        for (const char* suf : {".r.pgm", ".g.pgm", ".b.pgm"})
            planes.push_back(load_pgm(join(m.root, stem + suf)));
    } else {
        planes.push_back(load_pgm(join(m.root, e.image_path)));
    }
    const int64_t H = planes[0].height, W = planes[0].width;
    for (const auto& p : planes)
        if (p.height != H || p.width != W)
            throw std::runtime_error("load_sample: plane extents differ for id '" + e.id + "'");

    const int64_t C = static_cast<int64_t>(planes.size());
    s.image = Tensor::zeros(Shape{C, H, W});
    auto iv = s.image.values();
    for (int64_t c = 0; c < C; ++c) {
        const PgmImage& p = planes[static_cast<size_t>(c)];
        const double inv = 1.0 / static_cast<double>(p.maxval);
        for (int64_t i = 0; i < H * W; ++i)
            iv[static_cast<size_t>(c * H * W + i)] = p.pixels[static_cast<size_t>(i)] * inv;
    }

    const PgmImage mp = load_pgm(join(m.root, e.mask_path));
    if (mp.height != H || mp.width != W)
        throw std::runtime_error("load_sample: mask extents differ from image for id '" + e.id +
                                 "'");
    s.mask = MaskArray::zeros(1, H, W);
    for (int64_t i = 0; i < H * W; ++i) {
        const int32_t label = mp.pixels[static_cast<size_t>(i)];
        if (label >= num_classes)
            throw std::runtime_error("load_sample: label " + std::to_string(label) +
                                     " >= num_classes " + std::to_string(num_classes) +
                                     " in id '" + e.id + "'");
        s.mask.v[static_cast<size_t>(i)] = label;
    }
    return s;
}

namespace {

template <typename T>
std::vector<T> flip_h(const std::vector<T>& src, int64_t C, int64_t H, int64_t W) {
    std::vector<T> out(src.size());
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x)
                out[static_cast<size_t>((c * H + y) * W + x)] =
                    src[static_cast<size_t>((c * H + y) * W + (W - 1 - x))];
    return out;
}

template <typename T>
std::vector<T> flip_v(const std::vector<T>& src, int64_t C, int64_t H, int64_t W) {
    std::vector<T> out(src.size());
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x)
                out[static_cast<size_t>((c * H + y) * W + x)] =
                    src[static_cast<size_t>((c * H + (H - 1 - y)) * W + x)];
    return out;
}

// Counterclockwise quarter turn; output extents are (W, H).
template <typename T>
std::vector<T> rot90_ccw(const std::vector<T>& src, int64_t C, int64_t H, int64_t W) {
    std::vector<T> out(src.size());
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < W; ++y)     // new height = W
            for (int64_t x = 0; x < H; ++x) // new width = H
                out[static_cast<size_t>((c * W + y) * H + x)] =
                    src[static_cast<size_t>((c * H + x) * W + (W - 1 - y))];
    return out;
}

} // namespace

Sample augment_with(const Sample& s, bool hflip, bool vflip, int quarter_turns) {
    const Shape& is = s.image.shape();
    int64_t C = is[0], H = is[1], W = is[2];
    std::vector<double> img(s.image.values().begin(), s.image.values().end());
    std::vector<int32_t> msk = s.mask.v;

    if (hflip) {
        img = flip_h(img, C, H, W);
        msk = flip_h(msk, 1, H, W);
    }
    if (vflip) {
        img = flip_v(img, C, H, W);
        msk = flip_v(msk, 1, H, W);
    }
    for (int k = 0; k < ((quarter_turns % 4) + 4) % 4; ++k) {
        img = rot90_ccw(img, C, H, W);
        msk = rot90_ccw(msk, 1, H, W);
        std::swap(H, W);
    }

    Sample out;
    out.id = s.id;
    out.image = Tensor::from_data(Shape{C, H, W}, std::move(img));
    out.mask = MaskArray{1, H, W, std::move(msk)};
    return out;
}

Sample augment(const Sample& s, uint64_t seed) {
    Rng rng(seed);
    const bool hf = rng.uniform() < 0.5;
    const bool vf = rng.uniform() < 0.5;
    const int rot = static_cast<int>(rng.below(4));
    return augment_with(s, hf, vf, rot);
}

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    for (size_t i = n; i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.below(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

std::vector<Batch> batch_iter(const std::vector<Sample>& samples, int64_t batch_size,
                              uint64_t shuffle_seed) {
    if (samples.empty()) throw std::invalid_argument("batch_iter: empty sample list");
    if (batch_size < 1) throw std::invalid_argument("batch_iter: batch_size must be >= 1");
    const Shape& is = samples[0].image.shape();
    for (const Sample& s : samples)
        if (!(s.image.shape() == is))
            throw std::invalid_argument("batch_iter: mixed image extents (" + is.str() + " vs " +
                                        s.image.shape().str() + ")");

    const auto order = shuffled_indices(samples.size(), shuffle_seed);
    const int64_t C = is[0], H = is[1], W = is[2];
    std::vector<Batch> out;
    for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(batch_size)) {
        const size_t bs = std::min(static_cast<size_t>(batch_size), order.size() - pos);
        Batch b;
        b.images = Tensor::zeros(Shape{static_cast<int64_t>(bs), C, H, W});
        b.masks = MaskArray::zeros(static_cast<int64_t>(bs), H, W);
        auto bi = b.images.values();
        for (size_t k = 0; k < bs; ++k) {
            const Sample& s = samples[order[pos + k]];
            auto sv = s.image.values();
            std::copy(sv.begin(), sv.end(), bi.begin() + static_cast<int64_t>(k) * C * H * W);
            std::copy(s.mask.v.begin(), s.mask.v.end(),
                      b.masks.v.begin() + static_cast<int64_t>(k) * H * W);
            b.ids.push_back(s.id);
        }
        out.push_back(std::move(b));
    }
    return out;
}

} // namespace mew
