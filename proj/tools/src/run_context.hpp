#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace glom::cli {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

/// Output directory of one command run. Files written through it are hashed
/// into the manifest; write_manifest() records config, version and hashes.
class RunContext {
 public:
  RunContext(std::string command, fs::path out_dir, nlohmann::json config);

  const fs::path& out_dir() const { return out_dir_; }
  fs::path path(const std::string& name) const { return out_dir_ / name; }

  void write(const std::string& name, const std::string& text);
  /// Registers a file written by other means (binary maps, images).
  void record(const std::string& name);

  void write_manifest() const;

 private:
  std::string command_;
  fs::path out_dir_;
  nlohmann::json config_;
  std::vector<std::pair<std::string, std::string>> outputs_;  // name, hash
};

}  // namespace glom::cli
