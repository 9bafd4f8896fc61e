#include "run_context.hpp"

#include <algorithm>

#include "glomkit/io.hpp"

namespace glom::cli {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

RunContext::RunContext(std::string command, fs::path out_dir, nlohmann::json config)
    : command_(std::move(command)), out_dir_(std::move(out_dir)), config_(std::move(config)) {
  fs::create_directories(out_dir_);
}

void RunContext::write(const std::string& name, const std::string& text) {
  io::write_text(path(name), text);
  record(name);
}

void RunContext::record(const std::string& name) {
  const std::string hash = "fnv1a64:" + hex64(fnv1a64(io::read_text(path(name))));
  auto it = std::find_if(outputs_.begin(), outputs_.end(), [&](const auto& o) { return o.first == name; });
  if (it != outputs_.end()) {
    it->second = hash;
  } else {
    outputs_.emplace_back(name, hash);
  }
}

void RunContext::write_manifest() const {
  nlohmann::json outputs = nlohmann::json::object();
  for (const auto& [name, hash] : outputs_) outputs[name] = hash;
  const nlohmann::json manifest = {
      {"tool", "glomkit"},
      {"version", GLOMKIT_VERSION},
      {"command", command_},
      {"config", config_},
      {"config_hash", "fnv1a64:" + hex64(fnv1a64(config_.dump()))},
      {"outputs", outputs},
  };
  io::write_text(path("manifest.json"), manifest.dump(2) + "\n");
}

}  // namespace glom::cli
