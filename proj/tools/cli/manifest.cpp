#include "manifest.hpp"

#include <array>
#include <fstream>
#include <memory>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "embstats/error.hpp"

namespace embstats::cli {

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  for (unsigned i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

RunManifest::RunManifest(std::string command) : command_(std::move(command)) {}

void RunManifest::input(const std::string& path) {
  nlohmann::json entry{{"path", path}};
  entry["sha256"] = path == "-" ? nlohmann::json(nullptr) : nlohmann::json(file_sha256(path));
  inputs_.push_back(std::move(entry));
}

nlohmann::json RunManifest::to_json() const {
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_);
  nlohmann::json j;
  j["command"] = command_;
  j["parameters"] = params_;
  j["inputs"] = inputs_;
  j["seed"] = seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr);
  j["outputs"] = outputs_;
  j["tool_version"] = kToolVersion;
  j["started_at"] = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(
      std::chrono::system_clock::to_time_t(wall_start_)));
  j["duration_seconds"] = elapsed.count();
  return j;
}

void RunManifest::write(const std::filesystem::path& out_dir) const {
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw InputError(fmt::format("cannot write manifest in '{}'", out_dir.string()));
  out << to_json().dump(2) << '\n';
}

}  // namespace embstats::cli
