#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>

#include "eafpmed/checkpoint.hpp"
#include "eafpmed/errors.hpp"

using namespace eafpmed;

namespace {

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("checkpoint byte layout is pinned") {
    const auto path = temp_file("ckpt_layout.bin");
    save_checkpoint(path, {{"ab", Shape{2}, {1.0f, -2.0f}}});
    const std::string bytes = slurp(path);

    std::string expected;
    expected += "EAFP";
    expected += '\x01';  // version 1, little-endian u16
    expected += '\x00';
    expected += '\x01';  // one array, u32
    expected += '\x00';
    expected += '\x00';
    expected += '\x00';
    expected += '\x02';  // name length 2
    expected += '\x00';
    expected += "ab";
    expected += '\x01';  // rank 1
    expected += '\x02';  // dim 2
    expected += '\x00';
    expected += '\x00';
    expected += '\x00';
    expected += std::string("\x00\x00\x80\x3f", 4);  // 1.0f
    expected += std::string("\x00\x00\x00\xc0", 4);  // -2.0f
    CHECK(bytes == expected);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint round trip preserves names, shapes and bits") {
    const auto path = temp_file("ckpt_roundtrip.bin");
    std::vector<NamedArray> arrays;
    arrays.push_back({"w", Shape{2, 3}, {0.1f, -0.25f, 3.5f, 1e-20f, 1e20f, -0.0f}});
    arrays.push_back({"scalar", Shape{}, {42.0f}});
    arrays.push_back({"deep.name.with.dots", Shape{1, 2, 1, 2}, {1, 2, 3, 4}});
    save_checkpoint(path, arrays);
    const auto loaded = load_checkpoint(path);
    REQUIRE(loaded.size() == arrays.size());
    for (std::size_t i = 0; i < arrays.size(); ++i) {
        CHECK(loaded[i].name == arrays[i].name);
        CHECK(loaded[i].shape == arrays[i].shape);
        REQUIRE(loaded[i].values.size() == arrays[i].values.size());
        for (std::size_t j = 0; j < arrays[i].values.size(); ++j) {
            CHECK(std::memcmp(&loaded[i].values[j], &arrays[i].values[j], 4) == 0);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects bad magic and truncation") {
    const auto path = temp_file("ckpt_bad.bin");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    save_checkpoint(path, {{"x", Shape{4}, {1, 2, 3, 4}}});
    auto bytes = slurp(path);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
    }
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    std::filesystem::remove(path);
}
