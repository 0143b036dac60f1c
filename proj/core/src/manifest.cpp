#include "listenlab/manifest.hpp"

#include <fstream>

#include "listenlab/common.hpp"

using nlohmann::json;

namespace listenlab {

void validate_record(const ClipManifestRecord& rec) {
  if (rec.id.empty()) throw ValidationError("manifest record: empty id");
  if (rec.label != 0 && rec.label != 1)
    throw ValidationError("manifest record " + rec.id + ": label must be 0 or 1");
  bool is_real = rec.method == "real";
  if ((rec.label == 0) != is_real)
    throw ValidationError("manifest record " + rec.id + ": label " + std::to_string(rec.label) +
                          " inconsistent with method \"" + rec.method +
                          "\" (label must be 0 iff method is real)");
  if (!(rec.duration_s > 0.0))
    throw ValidationError("manifest record " + rec.id + ": duration_s must be positive");
  if (rec.split != "train" && rec.split != "val" && rec.split != "test")
    throw ValidationError("manifest record " + rec.id + ": split must be train/val/test, got \"" +
                          rec.split + "\"");
  if (rec.video_path.empty() || rec.audio_path.empty())
    throw ValidationError("manifest record " + rec.id + ": media paths must be nonempty");
}

void write_manifest(const std::string& path, const ManifestHeader& header,
                    const std::vector<ClipManifestRecord>& records) {
  for (const auto& rec : records) validate_record(rec);
  std::ofstream out(path, std::ios::binary);  // binary: no platform newline translation
  if (!out) throw IoError("cannot open manifest for writing: " + path);
  json h = {{"schema", "listenlab-manifest"}, {"version", header.version}, {"seed", header.seed}};
  if (!header.stats.is_null()) h["stats"] = header.stats;
  out << h.dump() << "\n";
  for (const auto& rec : records) {
    json j = {{"id", rec.id},         {"video_path", rec.video_path},
              {"audio_path", rec.audio_path}, {"label", rec.label},
              {"method", rec.method}, {"duration_s", rec.duration_s},
              {"split", rec.split}};
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("manifest write failed: " + path);
}

std::vector<ClipManifestRecord> load_manifest(const std::string& path, ManifestHeader* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest: " + path);

  std::vector<ClipManifestRecord> records;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("manifest line " + std::to_string(line_no) +
                            ": malformed JSON: " + e.what());
    }
    try {
      if (!saw_header) {
        if (!j.contains("schema") || j.at("schema") != "listenlab-manifest")
          throw ValidationError("header must declare schema \"listenlab-manifest\"");
        if (j.at("version").get<int>() != 1)
          throw ValidationError("unsupported manifest version");
        if (header) {
          header->version = j.at("version").get<int>();
          header->seed = j.at("seed").get<uint64_t>();
          header->stats = j.contains("stats") ? j.at("stats") : json();
        }
        saw_header = true;
        continue;
      }
      ClipManifestRecord rec;
      rec.id = j.at("id").get<std::string>();
      rec.video_path = j.at("video_path").get<std::string>();
      rec.audio_path = j.at("audio_path").get<std::string>();
      rec.label = j.at("label").get<int>();
      rec.method = j.at("method").get<std::string>();
      rec.duration_s = j.at("duration_s").get<double>();
      rec.split = j.at("split").get<std::string>();
      validate_record(rec);
      records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace listenlab
