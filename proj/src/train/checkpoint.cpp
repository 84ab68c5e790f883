#include "train/checkpoint.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "pretext/pretext.h"

namespace dgad {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  net.validate();
  weights.validate();
  if (protocol_id < 1 || protocol_id > 3) fail("protocol must be 1, 2 or 3");
  if (net.label_dim != Protocol::from_int(protocol_id).label_dim()) {
    fail("label_dim " + std::to_string(net.label_dim) + " does not match protocol " + std::to_string(protocol_id));
  }
  if (batch_size < 2) fail("batch_size must be >= 2");
  if (learning_rate <= 0.0) fail("learning_rate must be positive");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) fail("adam betas must lie in [0,1)");
  if (epochs < 0) fail("epochs must be >= 0");
  if (epochs == 0 && iterations < 1) fail("iterations must be >= 1");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (run_dir.empty()) fail("run_dir must be set");
}

// ---------------------------------------------------------------------------
// tensor blob
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'G', 'A', 'D', 'T', 'N', 'S', 'R'};
constexpr uint32_t kBlobVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail("truncated tensor blob: " + path);
  return v;
}

}  // namespace

void write_tensor_blob(const std::string& path, const std::map<std::string, Tensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(out, kBlobVersion);
  write_pod<uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(t.rank()));
    for (int64_t d = 0; d < t.rank(); ++d) write_pod<uint64_t>(out, static_cast<uint64_t>(t.dim(d)));
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) fail("write failed: " + path);
}

std::map<std::string, Tensor> read_tensor_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("checkpoint missing tensor blob: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) fail("not a tensor blob: " + path);
  uint32_t version = read_pod<uint32_t>(in, path);
  if (version != kBlobVersion) fail("unsupported tensor blob version " + std::to_string(version));
  uint64_t count = read_pod<uint64_t>(in, path);
  std::map<std::string, Tensor> out;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t name_len = read_pod<uint32_t>(in, path);
    if (name_len > 4096) fail("corrupt tensor blob (name too long): " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint32_t rank = read_pod<uint32_t>(in, path);
    if (rank > 8) fail("corrupt tensor blob (rank " + std::to_string(rank) + "): " + path);
    std::vector<int64_t> shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int64_t>(read_pod<uint64_t>(in, path));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) fail("truncated tensor blob: " + path);
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

namespace {

json config_to_json(const TrainConfig& c) {
  json net{{"image_size", c.net.image_size},       {"image_channels", c.net.image_channels},
           {"latent_channels", c.net.latent_channels}, {"base_width", c.net.base_width},
           {"padding", c.net.padding == PadMode::kZero ? "zero" : "symmetric"},
           {"use_coord", c.net.use_coord},         {"label_dim", c.net.label_dim}};
  return json{{"protocol", c.protocol_id},
              {"net", net},
              {"weights", {{"cls", c.weights.cls}, {"rec", c.weights.rec}, {"cmp", c.weights.cmp}}},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"iterations", c.iterations},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"checkpoint_every", c.checkpoint_every},
              {"compactness", c.compactness_enabled},
              {"pixel_restoration", c.pixel_restoration},
              {"augment_zoom", c.augment_zoom},
              {"run_dir", c.run_dir}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.protocol_id = j.at("protocol").get<int>();
  const json& net = j.at("net");
  c.net.image_size = net.at("image_size").get<int64_t>();
  c.net.image_channels = net.at("image_channels").get<int64_t>();
  c.net.latent_channels = net.at("latent_channels").get<int64_t>();
  c.net.base_width = net.at("base_width").get<int64_t>();
  std::string pad = net.at("padding").get<std::string>();
  if (pad != "zero" && pad != "symmetric") fail("unknown padding mode '" + pad + "'");
  c.net.padding = pad == "zero" ? PadMode::kZero : PadMode::kSymmetric;
  c.net.use_coord = net.at("use_coord").get<bool>();
  c.net.label_dim = net.at("label_dim").get<int64_t>();
  c.weights.cls = j.at("weights").at("cls").get<double>();
  c.weights.rec = j.at("weights").at("rec").get<double>();
  c.weights.cmp = j.at("weights").at("cmp").get<double>();
  c.batch_size = j.at("batch_size").get<int64_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.iterations = j.at("iterations").get<int64_t>();
  c.epochs = j.at("epochs").get<int64_t>();
  c.seed = j.at("seed").get<uint64_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<int64_t>();
  c.compactness_enabled = j.at("compactness").get<bool>();
  c.pixel_restoration = j.at("pixel_restoration").get<bool>();
  c.augment_zoom = j.at("augment_zoom").get<bool>();
  c.run_dir = j.at("run_dir").get<std::string>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& dir, const CheckpointData& data) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail("cannot create checkpoint directory " + dir + ": " + ec.message());
  write_tensor_blob(dir + "/tensors.bin", data.tensors);
  json manifest{{"format", 1},
                {"iteration", data.iteration},
                {"steps_g", data.steps_g},
                {"steps_d", data.steps_d},
                {"rng", data.rng_state},
                {"config", config_to_json(data.cfg)}};
  std::ofstream out(dir + "/manifest.json");
  if (!out) fail("cannot write " + dir + "/manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) fail("write failed: " + dir + "/manifest.json");
}

CheckpointData load_checkpoint(const std::string& dir) {
  if (!fs::exists(dir)) fail("checkpoint directory not found: " + dir);
  std::string manifest_path = dir + "/manifest.json";
  std::ifstream in(manifest_path);
  if (!in) fail("checkpoint missing manifest.json: " + dir);
  json manifest;
  try {
    in >> manifest;
  } catch (const std::exception& e) {
    fail("corrupt checkpoint manifest " + manifest_path + ": " + e.what());
  }
  CheckpointData data;
  try {
    if (manifest.at("format").get<int>() != 1) fail("unsupported checkpoint format");
    data.iteration = manifest.at("iteration").get<int64_t>();
    data.steps_g = manifest.at("steps_g").get<int64_t>();
    data.steps_d = manifest.at("steps_d").get<int64_t>();
    data.rng_state = manifest.at("rng").get<std::string>();
    data.cfg = config_from_json(manifest.at("config"));
  } catch (const json::exception& e) {
    fail("checkpoint manifest missing component: " + std::string(e.what()));
  }
  data.cfg.validate();
  data.tensors = read_tensor_blob(dir + "/tensors.bin");
  return data;
}

void require_compatible(const TrainConfig& stored, const TrainConfig& requested) {
  auto mismatch = [](const std::string& what) { fail("checkpoint does not match requested configuration: " + what); };
  if (stored.protocol_id != requested.protocol_id) mismatch("protocol");
  const NetConfig &a = stored.net, &b = requested.net;
  if (a.image_size != b.image_size) mismatch("image_size");
  if (a.image_channels != b.image_channels) mismatch("image_channels");
  if (a.latent_channels != b.latent_channels) mismatch("latent_channels");
  if (a.base_width != b.base_width) mismatch("base_width");
  if (a.padding != b.padding) mismatch("padding");
  if (a.use_coord != b.use_coord) mismatch("use_coord");
  if (a.label_dim != b.label_dim) mismatch("label_dim");
}

}  // namespace dgad
