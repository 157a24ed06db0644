#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace branchlab {

inline constexpr const char* kToolVersion = "branchlab 0.1.0";

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

/// Everything needed to reproduce a run bit-for-bit (given the same build).
/// The hash covers only the deterministic core; wall-clock is reported but
/// never hashed, so reruns with identical parameters share the hash and
/// produce byte-identical artifacts.
struct RunManifest {
  std::string subcommand;
  std::string model_name;
  std::string model_serialized;  // canonical form; hashed
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> parameters;  // sorted by key
  double wall_clock_seconds = 0.0;  // volatile

  void set(const std::string& key, const std::string& value);
  std::string core_string() const;  // deterministic hashed content
  std::string hash() const;
  std::string to_json() const;  // includes hash and volatile fields
};

/// First line stamped into every CSV artifact.
std::string csv_hash_header(const RunManifest& manifest);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace branchlab
