#include "gazemae/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "gazemae/errors.hpp"

namespace gazemae {

namespace {

constexpr char kMagic[8] = {'G', 'Z', 'M', 'A', 'E', 'C', 'K', '1'};

nlohmann::json model_config_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["image_size"] = cfg.image_size;
  j["patch_size"] = cfg.patch_size;
  j["tubelet_size"] = cfg.tubelet_size;
  j["frames"] = cfg.frames;
  j["embed_dim"] = cfg.embed_dim;
  j["depth"] = cfg.depth;
  j["heads"] = cfg.heads;
  j["decoder_dim"] = cfg.decoder_dim;
  j["decoder_depth"] = cfg.decoder_depth;
  j["mask_ratio"] = cfg.mask_ratio;
  j["num_classes"] = cfg.num_classes;
  j["variant"] = cfg.variant;
  j["pixel_mean"] = cfg.pixel_mean;
  j["pixel_std"] = cfg.pixel_std;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.image_size = j.at("image_size").get<int>();
  cfg.patch_size = j.at("patch_size").get<int>();
  cfg.tubelet_size = j.at("tubelet_size").get<int>();
  cfg.frames = j.at("frames").get<int>();
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.depth = j.at("depth").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.decoder_dim = j.at("decoder_dim").get<int>();
  cfg.decoder_depth = j.at("decoder_depth").get<int>();
  cfg.mask_ratio = j.at("mask_ratio").get<double>();
  cfg.num_classes = j.at("num_classes").get<int>();
  cfg.variant = j.at("variant").get<std::string>();
  cfg.pixel_mean = j.at("pixel_mean").get<std::array<double, 3>>();
  cfg.pixel_std = j.at("pixel_std").get<std::array<double, 3>>();
  return cfg;
}

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::ifstream& in, std::size_t n) {
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw Error("checkpoint truncated while reading tensors");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["model_config"] = model_config_json(ckpt.model_config);
  header["n_params"] = ckpt.params.size();
  header["adam_steps"] = ckpt.adam_steps;
  header["epoch"] = ckpt.epoch;
  header["global_step"] = ckpt.global_step;
  header["root_seed"] = ckpt.root_seed;
  header["rng_state"] = ckpt.rng_state;
  header["config_echo"] = ckpt.config_echo;
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& m : ckpt.history) {
    nlohmann::json row;
    row["epoch"] = m.epoch;
    row["train_loss"] = m.train_loss;
    if (m.val_map) row["val_map"] = *m.val_map;
    if (m.val_acc) row["val_acc"] = *m.val_acc;
    row["lr"] = m.lr;
    hist.push_back(row);
  }
  header["history"] = hist;

  if (ckpt.adam_m.size() != ckpt.params.size() || ckpt.adam_v.size() != ckpt.params.size()) {
    throw ValidationError("save_checkpoint: optimizer state size mismatch");
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::string header_text = header.dump();
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  write_doubles(out, ckpt.params);
  write_doubles(out, ckpt.adam_m);
  write_doubles(out, ckpt.adam_v);
  if (!out) throw Error("failed while writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError("not a checkpoint file (bad magic): " + path.string());
  }
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in) throw Error("checkpoint truncated: " + path.string());
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw Error("checkpoint truncated: " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.model_config = model_config_from_json(header.at("model_config"));
  const auto n = header.at("n_params").get<std::size_t>();
  ckpt.adam_steps = header.at("adam_steps").get<std::int64_t>();
  ckpt.epoch = header.at("epoch").get<int>();
  ckpt.global_step = header.at("global_step").get<std::int64_t>();
  ckpt.root_seed = header.at("root_seed").get<std::uint64_t>();
  ckpt.rng_state = header.at("rng_state").get<std::string>();
  ckpt.config_echo = header.value("config_echo", std::string{});
  for (const auto& row : header.at("history")) {
    EpochMetrics m;
    m.epoch = row.at("epoch").get<int>();
    m.train_loss = row.at("train_loss").get<double>();
    if (row.contains("val_map")) m.val_map = row.at("val_map").get<double>();
    if (row.contains("val_acc")) m.val_acc = row.at("val_acc").get<double>();
    m.lr = row.at("lr").get<double>();
    ckpt.history.push_back(m);
  }
  ckpt.params = read_doubles(in, n);
  ckpt.adam_m = read_doubles(in, n);
  ckpt.adam_v = read_doubles(in, n);
  return ckpt;
}

VideoMae model_from_checkpoint(const Checkpoint& ckpt) {
  VideoMae model(ckpt.model_config, ckpt.root_seed);
  if (model.params().size() != ckpt.params.size()) {
    throw ValidationError("checkpoint parameter count does not match its model config");
  }
  model.params().values() = ckpt.params;
  return model;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<EpochMetrics>& history) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write metrics csv: " + path.string());
  out << "epoch,train_loss,val_mAP,val_acc,lr\n";
  char buf[64];
  for (const auto& m : history) {
    out << m.epoch << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", m.train_loss);
    out << buf << ',';
    if (m.val_map) {
      std::snprintf(buf, sizeof(buf), "%.17g", *m.val_map);
      out << buf;
    }
    out << ',';
    if (m.val_acc) {
      std::snprintf(buf, sizeof(buf), "%.17g", *m.val_acc);
      out << buf;
    }
    out << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", m.lr);
    out << buf << '\n';
  }
}

}  // namespace gazemae
