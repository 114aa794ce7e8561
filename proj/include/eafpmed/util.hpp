#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace eafpmed {

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);
std::string hash_file_hex(const std::filesystem::path& path);

// Locale-free shortest round-trip formatting (deterministic output files).
std::string format_double(double v);
// Fixed decimal places, e.g. format_fixed(0.11377, 4) -> "0.1138".
std::string format_fixed(double v, int decimals);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

}  // namespace eafpmed
