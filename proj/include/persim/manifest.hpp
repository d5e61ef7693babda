#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "persim/io.hpp"
#include "persim/version.hpp"

namespace persim {

struct ArtifactRecord {
  std::string name;
  std::string path;
  std::uint64_t bytes = 0;
  std::string checksum;  // fnv1a64, hex
};

/// Run provenance: config snapshot plus a checksum per artifact. Written
/// once, at the end of a run, before the process exits.
struct RunManifest {
  std::string tool_version = kVersion;
  std::string command;
  std::string created_utc;
  std::string config_text;
  std::string config_checksum;
  std::vector<ArtifactRecord> artifacts;
  std::vector<std::string> notes;
  double runtime_seconds = 0.0;

  void set_config(const std::string& text) {
    config_text = text;
    config_checksum = io::hex64(io::fnv1a64(text.data(), text.size()));
  }

  void add_artifact(const std::string& name,
                    const std::filesystem::path& path) {
    ArtifactRecord rec;
    rec.name = name;
    rec.path = path.string();
    rec.bytes = static_cast<std::uint64_t>(std::filesystem::file_size(path));
    rec.checksum = io::hex64(io::file_checksum(path));
    artifacts.push_back(std::move(rec));
  }
};

inline std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_manifest(const RunManifest& m,
                           const std::filesystem::path& path) {
  nlohmann::json j;
  j["tool_version"] = m.tool_version;
  j["command"] = m.command;
  j["created_utc"] = m.created_utc;
  j["config_checksum"] = m.config_checksum;
  j["config"] = m.config_text;
  j["runtime_seconds"] = m.runtime_seconds;
  j["artifacts"] = nlohmann::json::array();
  for (const auto& a : m.artifacts)
    j["artifacts"].push_back({{"name", a.name},
                              {"path", a.path},
                              {"bytes", a.bytes},
                              {"fnv1a64", a.checksum}});
  j["notes"] = m.notes;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write manifest " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw io_error("write failed for manifest " + path.string());
}

}  // namespace persim
