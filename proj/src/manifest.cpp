#include "branchlab/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

#include "branchlab/errors.hpp"

namespace branchlab {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

void RunManifest::set(const std::string& key, const std::string& value) {
  for (auto& kv : parameters) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  parameters.emplace_back(key, value);
  std::sort(parameters.begin(), parameters.end());
}

std::string RunManifest::core_string() const {
  std::string core;
  core += std::string(kToolVersion) + "\n";
  core += "subcommand=" + subcommand + "\n";
  core += "model=" + model_name + "\n";
  core += "model_hash=" + hex64(fnv1a64(model_serialized)) + "\n";
  core += "seed=" + std::to_string(seed) + "\n";
  for (const auto& [k, v] : parameters) core += k + "=" + v + "\n";
  return core;
}

std::string RunManifest::hash() const { return hex64(fnv1a64(core_string())); }

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["manifest_hash"] = hash();
  j["tool_version"] = kToolVersion;
  j["subcommand"] = subcommand;
  j["model"] = model_name;
  j["model_hash"] = hex64(fnv1a64(model_serialized));
  j["seed"] = seed;
  nlohmann::ordered_json params;
  for (const auto& [k, v] : parameters) params[k] = v;
  j["parameters"] = params;
  j["wall_clock_seconds"] = wall_clock_seconds;  // informational; not hashed
  return j.dump(2) + "\n";
}

std::string csv_hash_header(const RunManifest& manifest) {
  return "# manifest_hash=" + manifest.hash() + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_error(ErrorCode::ParseError, path + ": cannot open for writing");
  out << content;
}

}  // namespace branchlab
