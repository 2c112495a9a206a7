#include "scoreuq/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>

#include "scoreuq/errors.hpp"

namespace scoreuq {

namespace {

constexpr unsigned char kDtypeF64 = 0x01;

void put_u32_le(std::vector<unsigned char>& buf, uint32_t v) {
    buf.push_back(static_cast<unsigned char>(v & 0xFF));
    buf.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
    buf.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
    buf.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

void put_f64_le(std::vector<unsigned char>& buf, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFF));
}

uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

double get_f64_le(const unsigned char* p) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(p[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw_io("write failed for " + path.string());
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
    if (tensor.shape.empty()) throw_config("tensor must have at least one dimension");
    if (tensor.shape.size() > 255) throw_config("tensor rank exceeds UDT1 limit of 255");
    for (uint32_t d : tensor.shape)
        if (d == 0) throw_config("tensor dimensions must be positive");
    if (tensor.element_count() != tensor.values.size())
        throw_config("tensor value count does not match shape");

    std::vector<unsigned char> buf;
    buf.reserve(8 + 4 * tensor.shape.size() + 8 * tensor.values.size());
    buf.insert(buf.end(), {'U', 'D', 'T', '1'});
    buf.push_back(kDtypeF64);
    buf.push_back(static_cast<unsigned char>(tensor.shape.size()));
    buf.push_back(0x00);
    buf.push_back(0x00);
    for (uint32_t d : tensor.shape) put_u32_le(buf, d);
    for (double v : tensor.values) put_f64_le(buf, v);
    write_file_bytes(path, buf);
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::vector<unsigned char> bytes = read_file_bytes(path);
    if (bytes.size() < 8) throw_io(path.string() + ": truncated UDT1 header");
    if (std::memcmp(bytes.data(), "UDT1", 4) != 0)
        throw_io(path.string() + ": bad magic, not a UDT1 tensor");
    if (bytes[4] != kDtypeF64)
        throw_io(path.string() + ": unsupported dtype code " + std::to_string(bytes[4]));
    size_t ndim = bytes[5];
    if (bytes[6] != 0 || bytes[7] != 0) throw_io(path.string() + ": nonzero reserved bytes");
    if (ndim == 0) throw_io(path.string() + ": tensor rank is zero");
    if (bytes.size() < 8 + 4 * ndim) throw_io(path.string() + ": truncated dimension table");

    Tensor t;
    t.shape.resize(ndim);
    size_t count = 1;
    for (size_t i = 0; i < ndim; ++i) {
        t.shape[i] = get_u32_le(bytes.data() + 8 + 4 * i);
        if (t.shape[i] == 0) throw_io(path.string() + ": zero dimension");
        count *= t.shape[i];
    }
    size_t payload_at = 8 + 4 * ndim;
    if (bytes.size() != payload_at + 8 * count)
        throw_io(path.string() + ": truncated or oversized payload");
    t.values.resize(count);
    for (size_t i = 0; i < count; ++i) t.values[i] = get_f64_le(bytes.data() + payload_at + 8 * i);
    return t;
}

void write_pgm(const std::filesystem::path& path, int width, int height,
               std::span<const double> values) {
    if (width <= 0 || height <= 0) throw_config("image dimensions must be positive");
    if (values.size() != static_cast<size_t>(width) * static_cast<size_t>(height))
        throw_config("pgm value count does not match width*height");

    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double range = hi - lo;

    std::vector<unsigned char> pixels(values.size());
    if (range > 0.0) {
        for (size_t i = 0; i < values.size(); ++i) {
            double norm = (values[i] - lo) / range;
            pixels[i] = static_cast<unsigned char>(std::lround(norm * 255.0));
        }
    }
    // constant map: all zeros, already the state of `pixels`

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open " + path.string() + " for writing");
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw_io("write failed for " + path.string());
}

void write_ppm(const std::filesystem::path& path, int width, int height,
               std::span<const double> values) {
    if (width <= 0 || height <= 0) throw_config("image dimensions must be positive");
    if (values.size() != 3 * static_cast<size_t>(width) * static_cast<size_t>(height))
        throw_config("ppm value count does not match 3*width*height");

    std::vector<unsigned char> pixels(values.size());
    for (size_t i = 0; i < values.size(); ++i) {
        double v = std::clamp(values[i], 0.0, 1.0);
        pixels[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open " + path.string() + " for writing");
    out << "P6\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw_io("write failed for " + path.string());
}

std::string sha256_hex(std::span<const unsigned char> bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw_io("EVP_MD_CTX_new failed");
    bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
              EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
              EVP_DigestFinal_ex(ctx, digest.data(), &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw_io("sha256 computation failed");

    static const char* hex = "0123456789abcdef";
    std::string out(2 * len, '0');
    for (unsigned int i = 0; i < len; ++i) {
        out[2 * i] = hex[digest[i] >> 4];
        out[2 * i + 1] = hex[digest[i] & 0x0F];
    }
    return out;
}

std::string sha256_hex(const std::string& text) {
    return sha256_hex(std::span<const unsigned char>(
        reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string sha256_hex_file(const std::filesystem::path& path) {
    std::vector<unsigned char> bytes = read_file_bytes(path);
    return sha256_hex(std::span<const unsigned char>(bytes.data(), bytes.size()));
}

std::string iso8601_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::trunc), columns_(header.size()) {
    if (!out_) throw_io("cannot open " + path.string() + " for writing");
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw_config("csv row width does not match header");
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
    if (!out_) throw_io("csv write failed");
}

void CsvWriter::close() { out_.close(); }

}  // namespace scoreuq
