#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "scoreuq/errors.hpp"
#include "scoreuq/io.hpp"
#include "scoreuq/rng.hpp"

using namespace scoreuq;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    fs::path dir = fs::temp_directory_path() / "scoreuq_io_test";
    fs::create_directories(dir);
    return dir;
}

std::vector<unsigned char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("udt1 header layout is bit-exact") {
    fs::path p = temp_dir() / "pair.udt1";
    write_tensor(p, Tensor{{2}, {1.0, 2.0}});

    std::vector<unsigned char> bytes = slurp(p);
    REQUIRE(bytes.size() == 8 + 4 + 16);
    const unsigned char header[8] = {0x55, 0x44, 0x54, 0x31, 0x01, 0x01, 0x00, 0x00};
    for (int i = 0; i < 8; ++i) CHECK(bytes[static_cast<size_t>(i)] == header[i]);
    const unsigned char dims[4] = {0x02, 0x00, 0x00, 0x00};
    for (int i = 0; i < 4; ++i) CHECK(bytes[8 + static_cast<size_t>(i)] == dims[i]);
    // 1.0 and 2.0 as little-endian IEEE-754 doubles
    const unsigned char one[8] = {0, 0, 0, 0, 0, 0, 0xF0, 0x3F};
    const unsigned char two[8] = {0, 0, 0, 0, 0, 0, 0x00, 0x40};
    for (int i = 0; i < 8; ++i) {
        CHECK(bytes[12 + static_cast<size_t>(i)] == one[i]);
        CHECK(bytes[20 + static_cast<size_t>(i)] == two[i]);
    }
}

TEST_CASE("udt1 roundtrip is exact for random tensors") {
    RngStream rng(11, 0);
    fs::path p = temp_dir() / "roundtrip.udt1";
    for (int trial = 0; trial < 10; ++trial) {
        Tensor t;
        t.shape = {static_cast<uint32_t>(1 + rng.uniform_index(5)),
                   static_cast<uint32_t>(1 + rng.uniform_index(7))};
        t.values = rng.gaussian_vector(t.element_count());
        write_tensor(p, t);
        Tensor back = read_tensor(p);
        CHECK(back.shape == t.shape);
        REQUIRE(back.values.size() == t.values.size());
        for (size_t i = 0; i < t.values.size(); ++i) CHECK(back.values[i] == t.values[i]);
    }
}

TEST_CASE("udt1 read rejects bad magic, dtype and truncation") {
    fs::path p = temp_dir() / "bad.udt1";
    {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out << "UDT2";
        const unsigned char rest[8] = {0x01, 0x01, 0, 0, 0x01, 0, 0, 0};
        out.write(reinterpret_cast<const char*>(rest), 8);
    }
    CHECK_THROWS_AS(read_tensor(p), Error);

    write_tensor(p, Tensor{{3}, {1.0, 2.0, 3.0}});
    std::vector<unsigned char> bytes = slurp(p);
    bytes.resize(bytes.size() - 5);
    {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(read_tensor(p), Error);

    write_tensor(p, Tensor{{1}, {0.5}});
    bytes = slurp(p);
    bytes[4] = 0x02;  // unknown dtype
    {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(read_tensor(p), Error);
}

TEST_CASE("write_tensor validates shape") {
    fs::path p = temp_dir() / "invalid.udt1";
    CHECK_THROWS_AS(write_tensor(p, Tensor{{2}, {1.0}}), Error);
    CHECK_THROWS_AS(write_tensor(p, Tensor{{0}, {}}), Error);
}

TEST_CASE("pgm examples") {
    fs::path p = temp_dir() / "map.pgm";

    write_pgm(p, 2, 1, std::vector<double>{0.0, 1.0});
    std::vector<unsigned char> bytes = slurp(p);
    REQUIRE(bytes.size() >= 2);
    CHECK(bytes[bytes.size() - 2] == 0x00);
    CHECK(bytes[bytes.size() - 1] == 0xFF);

    write_pgm(p, 2, 2, std::vector<double>{3.0, 3.0, 3.0, 3.0});
    bytes = slurp(p);
    REQUIRE(bytes.size() >= 4);
    for (size_t i = bytes.size() - 4; i < bytes.size(); ++i) CHECK(bytes[i] == 0x00);

    CHECK_THROWS_AS(write_pgm(p, 2, 2, std::vector<double>{1.0}), Error);
}

TEST_CASE("ppm clamps to [0,1]") {
    fs::path p = temp_dir() / "rgb.ppm";
    write_ppm(p, 1, 1, std::vector<double>{-0.5, 0.5, 1.5});
    std::vector<unsigned char> bytes = slurp(p);
    REQUIRE(bytes.size() >= 3);
    CHECK(bytes[bytes.size() - 3] == 0x00);
    CHECK(bytes[bytes.size() - 2] == 0x80);
    CHECK(bytes[bytes.size() - 1] == 0xFF);
}

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex(std::string("abc")) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex(std::string("")) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("format_double round-trips") {
    for (double v : {1.0, -0.1, 3.141592653589793, 1e-300, 12345.6789}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

}  // TEST_SUITE
