#include "mew/pgm.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mew {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg, std::streamoff off) {
    throw std::runtime_error("pgm: " + path + ": " + msg + " at byte " + std::to_string(off));
}

// Skips whitespace and '#' comments, then reads one unsigned decimal token.
int64_t read_header_int(std::istream& is, const std::string& path, const char* what) {
    for (;;) {
        const int c = is.peek();
        if (c == EOF) fail(path, std::string("unexpected end of header reading ") + what, is.tellg());
        if (std::isspace(c)) {
            is.get();
            continue;
        }
        if (c == '#') {
            std::string line;
            std::getline(is, line);
            continue;
        }
        break;
    }
    if (!std::isdigit(is.peek()))
        fail(path, std::string("expected digit for ") + what, is.tellg());
    int64_t v = 0;
    while (std::isdigit(is.peek())) v = v * 10 + (is.get() - '0');
    return v;
}

} // namespace

PgmImage load_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("pgm: cannot open '" + path + "'");

    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    if (!is || m0 != 'P' || (m1 != '2' && m1 != '5'))
        fail(path, "bad magic (expected P2 or P5)", 0);
    const bool binary = m1 == '5';

    PgmImage img;
    img.width = read_header_int(is, path, "width");
    img.height = read_header_int(is, path, "height");
    const int64_t maxval = read_header_int(is, path, "maxval");
    if (img.width <= 0 || img.height <= 0) fail(path, "non-positive extents", is.tellg());
    if (maxval <= 0 || maxval > 65535) fail(path, "maxval out of range (1..65535)", is.tellg());
    img.maxval = static_cast<int>(maxval);

    const int64_t count = img.width * img.height;
    img.pixels.resize(static_cast<size_t>(count));
    if (binary) {
        // Exactly one whitespace byte separates the header from raster data.
        const int sep = is.get();
        if (sep == EOF || !std::isspace(sep)) fail(path, "missing raster separator", is.tellg());
        const int bytes_per = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(static_cast<size_t>(count * bytes_per));
        is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (is.gcount() != static_cast<std::streamsize>(raw.size()))
            fail(path, "truncated raster (" + std::to_string(is.gcount()) + " of " +
                           std::to_string(raw.size()) + " bytes)",
                 is.tellg());
        for (int64_t i = 0; i < count; ++i) {
            uint16_t v;
            if (bytes_per == 2)
                v = static_cast<uint16_t>((raw[static_cast<size_t>(2 * i)] << 8) |
                                          raw[static_cast<size_t>(2 * i + 1)]);
            else
                v = raw[static_cast<size_t>(i)];
            if (v > maxval) fail(path, "sample exceeds maxval", is.tellg());
            img.pixels[static_cast<size_t>(i)] = v;
        }
    } else {
        for (int64_t i = 0; i < count; ++i) {
            const int64_t v = read_header_int(is, path, "sample");
            if (v > maxval) fail(path, "sample exceeds maxval", is.tellg());
            img.pixels[static_cast<size_t>(i)] = static_cast<uint16_t>(v);
        }
    }
    return img;
}

void save_pgm(const PgmImage& img, const std::string& path, bool binary) {
    if (img.width <= 0 || img.height <= 0 ||
        img.pixels.size() != static_cast<size_t>(img.width * img.height))
        throw std::invalid_argument("save_pgm: inconsistent image");
    if (img.maxval <= 0 || img.maxval > 65535)
        throw std::invalid_argument("save_pgm: maxval out of range");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("pgm: cannot open '" + path + "' for writing");
    os << (binary ? "P5" : "P2") << '\n'
       << img.width << ' ' << img.height << '\n'
       << img.maxval << '\n';
    if (binary) {
        const bool wide = img.maxval > 255;
        std::vector<unsigned char> raw;
        raw.reserve(img.pixels.size() * (wide ? 2 : 1));
        for (uint16_t v : img.pixels) {
            if (wide) {
                raw.push_back(static_cast<unsigned char>(v >> 8));
                raw.push_back(static_cast<unsigned char>(v & 0xff));
            } else {
                raw.push_back(static_cast<unsigned char>(v));
            }
        }
        os.write(reinterpret_cast<const char*>(raw.data()),
                 static_cast<std::streamsize>(raw.size()));
    } else {
        for (int64_t y = 0; y < img.height; ++y) {
            for (int64_t x = 0; x < img.width; ++x) {
                if (x) os << ' ';
                os << img.at(y, x);
            }
            os << '\n';
        }
    }
    if (!os) throw std::runtime_error("pgm: write failed for '" + path + "'");
}

} // namespace mew
