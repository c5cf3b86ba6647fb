#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mobility {

using Json = nlohmann::ordered_json;

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char delim);

// 64-bit FNV-1a; used for digests and deterministic seeding, not security.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

// Dumps with stable key order; invalid UTF-8 (the Foursquare files carry some
// Latin-1 category names) is replaced rather than throwing.
std::string dump_json(const Json& j, int indent = 2);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace mobility
