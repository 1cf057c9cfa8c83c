#include "gahcda/checkpoint.hpp"

#include <fstream>

#include "gahcda/binary_io.hpp"
#include "gahcda/hashing.hpp"

namespace gahcda {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json tensor_entries(const ParamSet& set, const char* group) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& t : set) list.push_back({{"name", t.name}, {"shape", t.shape}, {"group", group}});
  return list;
}

[[noreturn]] void integrity_failure(const std::string& detail) {
  throw DataError("checkpoint integrity failure: " + detail);
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["arch"] = {{"depth", ckpt.model.arch.depth},
                    {"base_channels", ckpt.model.arch.base_channels},
                    {"in_channels", ckpt.model.arch.in_channels}};
  header["seed"] = ckpt.model.seed;
  header["epoch"] = ckpt.model.epoch;
  auto tensors = tensor_entries(ckpt.model.weights, "model");
  if (ckpt.gaa) {
    header["gaa"] = {{"extractor_widths", ckpt.gaa->arch.extractor_widths}};
    for (auto& e : tensor_entries(ckpt.gaa->weights, "gaa")) tensors.push_back(std::move(e));
  } else {
    header["gaa"] = nullptr;
  }
  header["tensors"] = std::move(tensors);
  header["info"] = ckpt.info;
  const std::string text = header.dump();

  std::vector<std::uint8_t> buf;
  binio::put_bytes(buf, "GZCK");
  binio::put_u32(buf, kCheckpointVersion);
  binio::put_u32(buf, static_cast<std::uint32_t>(text.size()));
  binio::put_bytes(buf, text);
  auto put_set = [&](const ParamSet& set) {
    for (const auto& t : set) {
      for (float v : t.values) binio::put_f32(buf, v);
    }
  };
  put_set(ckpt.model.weights);
  if (ckpt.gaa) put_set(ckpt.gaa->weights);
  binio::put_u32(buf, crc32(buf));
  return buf;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) integrity_failure("file too short");
  const auto body = bytes.first(bytes.size() - 4);
  binio::Reader tail(bytes.last(4), "checkpoint");
  if (tail.u32() != crc32(body)) integrity_failure("checksum mismatch");

  try {
    binio::Reader r(body, "checkpoint");
    if (r.bytes(4) != "GZCK") integrity_failure("bad magic");
    if (r.u32() != kCheckpointVersion) integrity_failure("unsupported version");
    const auto header = nlohmann::json::parse(r.bytes(r.u32()));

    Checkpoint ckpt;
    const auto& arch = header.at("arch");
    ckpt.model.arch = UNetArch{arch.at("depth").get<int>(), arch.at("base_channels").get<int>(),
                               arch.at("in_channels").get<int>()};
    ckpt.model.seed = header.at("seed").get<std::uint64_t>();
    ckpt.model.epoch = header.at("epoch").get<int>();
    ckpt.info = header.value("info", nlohmann::json::object());

    std::vector<NamedTensor> model_tensors, gaa_tensors;
    for (const auto& e : header.at("tensors")) {
      NamedTensor t;
      t.name = e.at("name").get<std::string>();
      t.shape = e.at("shape").get<std::vector<int>>();
      std::size_t n = 1;
      for (int d : t.shape) {
        if (d < 0) integrity_failure("negative tensor extent");
        n *= static_cast<std::size_t>(d);
      }
      if (n > r.remaining() / 4) integrity_failure("payload shorter than header");
      t.values.resize(n);
      for (auto& v : t.values) v = r.f32();
      (e.at("group").get<std::string>() == "gaa" ? gaa_tensors : model_tensors).push_back(std::move(t));
    }
    if (r.remaining() != 0) integrity_failure("trailing bytes");
    ckpt.model.weights = ParamSet(std::move(model_tensors));

    const auto specs = unet_param_specs(ckpt.model.arch);
    if (specs.size() != ckpt.model.weights.size()) integrity_failure("tensor count does not match architecture");
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (specs[i].name != ckpt.model.weights[i].name || specs[i].shape != ckpt.model.weights[i].shape) {
        integrity_failure("tensor '" + ckpt.model.weights[i].name + "' does not match architecture");
      }
    }
    if (!header.at("gaa").is_null()) {
      GaaParams gaa;
      gaa.arch.extractor_widths = header.at("gaa").at("extractor_widths").get<std::vector<int>>();
      gaa.weights = ParamSet(std::move(gaa_tensors));
      if (gaa.weights.size() != gaa_param_specs(gaa.arch).size()) integrity_failure("gaa tensor count");
      ckpt.gaa = std::move(gaa);
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    integrity_failure(std::string("bad header: ") + e.what());
  } catch (const ValidationError& e) {
    integrity_failure(e.what());
  } catch (const DataError& e) {
    const std::string what = e.what();
    if (what.rfind("checkpoint integrity failure", 0) == 0) throw;
    integrity_failure(what);
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  save_checkpoint(Checkpoint{params, std::nullopt, nlohmann::json::object()}, path);
}

Checkpoint load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const auto bytes = binio::slurp(in);
  return deserialize_checkpoint(bytes);
}

ModelParams load_checkpoint(const std::filesystem::path& path) { return load_checkpoint_file(path).model; }

std::string checkpoint_hash(const Checkpoint& ckpt) { return git_blob_hash(serialize_checkpoint(ckpt)); }

std::string checkpoint_hash(const ModelParams& params) {
  return checkpoint_hash(Checkpoint{params, std::nullopt, nlohmann::json::object()});
}

void save_feature_map(const std::filesystem::path& path, const FeatureMap& map) {
  std::vector<std::uint8_t> buf;
  binio::put_bytes(buf, "GZF1");
  binio::put_u32(buf, static_cast<std::uint32_t>(map.channels));
  binio::put_u32(buf, static_cast<std::uint32_t>(map.height));
  binio::put_u32(buf, static_cast<std::uint32_t>(map.width));
  for (float v : map.data) binio::put_f32(buf, v);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed writing " + path.string());
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const auto bytes = binio::slurp(in);
  binio::Reader r(bytes, "feature dump");
  if (r.bytes(4) != "GZF1") throw DataError("feature dump: bad magic");
  const int c = static_cast<int>(r.u32()), h = static_cast<int>(r.u32()), w = static_cast<int>(r.u32());
  if (r.remaining() != 4ull * c * h * w) throw DataError("feature dump: payload size does not match header");
  FeatureMap map(c, h, w);
  for (auto& v : map.data) v = r.f32();
  return map;
}

}  // namespace gahcda
