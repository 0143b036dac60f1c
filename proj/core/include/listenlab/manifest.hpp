#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace listenlab {

// One dataset clip. Paths are relative to the manifest's directory.
struct ClipManifestRecord {
  std::string id;
  std::string video_path;
  std::string audio_path;
  int label = 0;           // 0 real, 1 fake
  std::string method;      // "real" or a forgery method tag
  double duration_s = 0.0;
  std::string split;       // train | val | test

  bool operator==(const ClipManifestRecord&) const = default;
};

// First line of every manifest file.
struct ManifestHeader {
  int version = 1;
  uint64_t seed = 0;
  nlohmann::json stats;  // generator-recorded metadata; optional

  bool operator==(const ManifestHeader&) const = default;
};

// Validates a record against the schema invariants; throws ValidationError
// naming the offending field.
void validate_record(const ClipManifestRecord& rec);

// JSON-lines manifest: one header object, then one record object per line.
void write_manifest(const std::string& path, const ManifestHeader& header,
                    const std::vector<ClipManifestRecord>& records);

// Loads and validates; preserves file order. Malformed lines raise
// ValidationError with the 1-based line number. An empty file yields an
// empty list (and a default header).
std::vector<ClipManifestRecord> load_manifest(const std::string& path,
                                              ManifestHeader* header = nullptr);

}  // namespace listenlab
