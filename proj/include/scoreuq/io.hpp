#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace scoreuq {

/// Dense row-major tensor of 64-bit floats.
struct Tensor {
    std::vector<uint32_t> shape;
    std::vector<double> values;

    size_t element_count() const {
        size_t n = 1;
        for (uint32_t d : shape) n *= d;
        return n;
    }
};

/// UDT1 container, bit-exact:
///   bytes 0-3  ASCII "UDT1"
///   byte  4    dtype code 0x01 (IEEE-754 binary64, little-endian)
///   byte  5    ndim
///   bytes 6-7  zero
///   ndim x u32 little-endian dims, then row-major payload.
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

/// Binary PGM (P5), maxval 255. Values are min-max normalized per map;
/// constant maps render all-zero.
void write_pgm(const std::filesystem::path& path, int width, int height,
               std::span<const double> values);

/// Binary PPM (P6) for RGB data (values.size() == 3*width*height, interleaved
/// RGB). Values are clamped to [0,1] and scaled to 255.
void write_ppm(const std::filesystem::path& path, int width, int height,
               std::span<const double> values);

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(const std::string& text);
std::string sha256_hex_file(const std::filesystem::path& path);

std::string iso8601_utc_now();

/// Formats a double with enough digits to round-trip (used by every CSV and
/// JSON writer so outputs are byte-stable).
std::string format_double(double v);

/// CSV with a header row; all doubles go through format_double.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

    void row(const std::vector<std::string>& fields);
    void close();

    static std::string field(double v) { return format_double(v); }
    static std::string field(long long v) { return std::to_string(v); }
    static std::string field(int v) { return std::to_string(v); }
    static std::string field(size_t v) { return std::to_string(v); }
    static std::string field(const std::string& v) { return v; }

private:
    std::ofstream out_;
    size_t columns_;
};

}  // namespace scoreuq
