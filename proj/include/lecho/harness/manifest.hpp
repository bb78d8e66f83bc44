#pragma once

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <system_error>
#include <unistd.h>
#include <vector>

#include "lecho/core/error.hpp"

#ifndef LECHO_VERSION
#define LECHO_VERSION "unknown"
#endif

namespace lecho::harness {

namespace fs = std::filesystem;

inline constexpr int manifest_format_version = 1;

/// Hex SHA-256 of a file's bytes.
inline std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::io, "sha256: cannot open '" + p.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error(Errc::io, "sha256: init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Output directory staged in a hidden sibling and renamed into place on
/// commit, so an interrupted run leaves nothing at the destination. The
/// manifest is written when staging starts and finalized with checksums of
/// every produced file on commit.
class StagedOutput {
 public:
  StagedOutput(fs::path destination, nlohmann::json manifest)
      : dest_(fs::absolute(std::move(destination)).lexically_normal()), manifest_(std::move(manifest)) {
    if (dest_.filename().empty()) dest_ = dest_.parent_path();
    if (fs::exists(dest_) && !fs::is_empty(dest_) && !fs::exists(dest_ / "manifest.json")) {
      throw Error(Errc::io, "output directory '" + dest_.string() + "' exists and is not a previous run");
    }
    fs::create_directories(dest_.parent_path());
    static int counter = 0;
    stage_ = dest_.parent_path() /
             ("." + dest_.filename().string() + ".partial-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(stage_);
    fs::create_directories(stage_);
    start_ = std::chrono::steady_clock::now();
    manifest_["format_version"] = manifest_format_version;
    manifest_["code_version"] = LECHO_VERSION;
    manifest_["status"] = "running";
    manifest_["timing"] = {{"started", utc_timestamp()}};
    write_manifest();
  }

  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;

  ~StagedOutput() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(stage_, ec);
    }
  }

  /// Path of a new artifact, relative to the output directory.
  fs::path file(const std::string& rel) {
    const fs::path p = stage_ / rel;
    fs::create_directories(p.parent_path());
    files_.push_back(rel);
    return p;
  }

  nlohmann::json& manifest() { return manifest_; }
  const fs::path& destination() const { return dest_; }

  void commit() {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& rel : files_) {
      const fs::path p = stage_ / rel;
      list.push_back({{"path", rel}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
    }
    manifest_["files"] = list;
    manifest_["status"] = "complete";
    manifest_["timing"]["finished"] = utc_timestamp();
    manifest_["timing"]["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_manifest();
    if (fs::exists(dest_)) fs::remove_all(dest_);
    fs::rename(stage_, dest_);
    committed_ = true;
  }

 private:
  void write_manifest() {
    std::ofstream os(stage_ / "manifest.json");
    os << manifest_.dump(2) << '\n';
    if (!os) throw Error(Errc::io, "cannot write manifest in '" + stage_.string() + "'");
  }

  fs::path dest_;
  fs::path stage_;
  nlohmann::json manifest_;
  std::vector<std::string> files_;
  std::chrono::steady_clock::time_point start_;
  bool committed_ = false;
};

}  // namespace lecho::harness
