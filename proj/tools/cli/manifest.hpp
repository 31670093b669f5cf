#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace embstats::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Hex SHA-256 of a file's contents.
std::string file_sha256(const std::filesystem::path& path);

// Collects what a run needs to be reproduced and writes it as manifest.json.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void param(const std::string& key, nlohmann::json value) {
    params_[key] = std::move(value);
  }
  // Records the digest of an input file; "-" (stdin) is recorded without one.
  void input(const std::string& path);
  void seed(std::uint64_t seed) { seed_ = seed; }
  void output(const std::string& name) { outputs_.push_back(name); }

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& out_dir) const;

 private:
  std::string command_;
  nlohmann::json params_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  std::chrono::system_clock::time_point wall_start_ = std::chrono::system_clock::now();
};

}  // namespace embstats::cli
