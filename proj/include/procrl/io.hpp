#ifndef PROCRL_IO_HPP_
#define PROCRL_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace procrl {

// Shortest round-trip decimal form; identical inputs give identical bytes.
std::string format_double(double v);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames into place.
void write_file(const std::filesystem::path& path, std::string_view contents);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t v);
std::string file_digest(const std::filesystem::path& path);

}  // namespace procrl

#endif  // PROCRL_IO_HPP_
