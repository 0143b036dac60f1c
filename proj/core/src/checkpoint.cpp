#include "listenlab/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "listenlab/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace listenlab {

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"in_channels", cfg.in_channels},
              {"frame_h", cfg.frame_h},
              {"frame_w", cfg.frame_w},
              {"channels", cfg.channels},
              {"reduce_ratio", cfg.reduce_ratio},
              {"bottleneck_ratio", cfg.bottleneck_ratio},
              {"spa_hidden", cfg.spa_hidden},
              {"d_model", cfg.d_model},
              {"heads", cfg.heads},
              {"ffn_hidden", cfg.ffn_hidden},
              {"audio_dim_raw", cfg.audio_dim_raw},
              {"audio_dim", cfg.audio_dim},
              {"positional_encoding", cfg.positional_encoding},
              {"variant", variant_name(cfg.variant)},
              {"fusion", fusion_name(cfg.fusion)},
              {"seed", cfg.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.in_channels = j.at("in_channels").get<int64_t>();
  cfg.frame_h = j.at("frame_h").get<int64_t>();
  cfg.frame_w = j.at("frame_w").get<int64_t>();
  cfg.channels = j.at("channels").get<int64_t>();
  cfg.reduce_ratio = j.at("reduce_ratio").get<int64_t>();
  cfg.bottleneck_ratio = j.at("bottleneck_ratio").get<int64_t>();
  cfg.spa_hidden = j.at("spa_hidden").get<int64_t>();
  cfg.d_model = j.at("d_model").get<int64_t>();
  cfg.heads = j.at("heads").get<int64_t>();
  cfg.ffn_hidden = j.at("ffn_hidden").get<int64_t>();
  cfg.audio_dim_raw = j.at("audio_dim_raw").get<int64_t>();
  cfg.audio_dim = j.at("audio_dim").get<int64_t>();
  cfg.positional_encoding = j.at("positional_encoding").get<bool>();
  cfg.variant = parse_variant(j.at("variant").get<std::string>());
  cfg.fusion = parse_fusion(j.at("fusion").get<std::string>());
  cfg.seed = j.at("seed").get<uint64_t>();
  return cfg;
}

void save_checkpoint(const std::string& dir, ModelParams<float>& params,
                     const std::string& source_manifest) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory: " + dir + ": " + ec.message());

  json meta;
  meta["config"] = model_config_to_json(params.cfg);
  if (!source_manifest.empty()) meta["source_manifest"] = source_manifest;
  json plist = json::array();
  for (auto& [name, var] : params.named_params()) {
    json p;
    p["name"] = name;
    p["shape"] = var.shape();
    plist.push_back(p);
    save_tensor((fs::path(dir) / (name + ".mtns")).string(), var.value());
  }
  meta["params"] = plist;
  std::ofstream out(fs::path(dir) / "checkpoint.json", std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint metadata in: " + dir);
  out << meta.dump(2) << "\n";
  if (!out) throw IoError("checkpoint metadata write failed in: " + dir);
}

std::string checkpoint_source_manifest(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "checkpoint.json", std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint metadata: " + dir + "/checkpoint.json");
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint metadata is not valid JSON: " + std::string(e.what()));
  }
  return meta.contains("source_manifest") ? meta.at("source_manifest").get<std::string>() : "";
}

ModelParams<float> load_checkpoint(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "checkpoint.json", std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint metadata: " + dir + "/checkpoint.json");
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint metadata is not valid JSON: " + std::string(e.what()));
  }

  ModelParams<float> params;
  params.init(model_config_from_json(meta.at("config")));
  for (auto& [name, var] : params.named_params()) {
    Tensor<float> t = load_tensor<float>((fs::path(dir) / (name + ".mtns")).string());
    if (t.shape() != var.shape())
      throw ValidationError("checkpoint parameter " + name + " has shape " + shape_str(t.shape()) +
                            ", expected " + shape_str(var.shape()));
    var.mutable_value() = std::move(t);
  }
  return params;
}

}  // namespace listenlab
