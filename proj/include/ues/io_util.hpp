#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ues {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

// Writes via a temp file in the same directory plus rename, so readers
// never observe partial artifacts.
void atomic_write_file(const std::string& path, std::span<const std::uint8_t> bytes);
void atomic_write_file(const std::string& path, const std::string& text);

std::string read_file_text(const std::string& path);
std::vector<std::uint8_t> read_file_bytes(const std::string& path);

}  // namespace ues
