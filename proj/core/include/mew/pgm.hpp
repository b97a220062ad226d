#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mew {

/// NetPBM grayscale image, P2 (ASCII) or P5 (binary), maxval <= 65535.
struct PgmImage {
    int64_t width = 0, height = 0;
    int maxval = 255;
    std::vector<uint16_t> pixels; // row-major

    uint16_t at(int64_t y, int64_t x) const {
        return pixels[static_cast<size_t>(y * width + x)];
    }
};

/// Parses P2/P5 with header comments. Malformed input throws
/// std::runtime_error naming the byte offset.
PgmImage load_pgm(const std::string& path);

/// Writes P5 when `binary`, else P2. Samples above 255 use the two-byte
/// big-endian encoding of the NetPBM spec. Byte-lossless round-trip.
void save_pgm(const PgmImage& img, const std::string& path, bool binary = true);

} // namespace mew
