#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eafpmed/shape.hpp"

namespace eafpmed {

struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

// Binary checkpoint shared by every persisted parameter set.
// Layout: magic "EAFP", u16 version, u32 array count; per array:
// u16 name length + UTF-8 name, u8 rank, u32 per dim, float32 values.
// All integers and floats little-endian.
inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path);

}  // namespace eafpmed
