#include "gahcda/config.hpp"

#include <toml.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "gahcda/hashing.hpp"

namespace gahcda {

void apply_profile(RunConfig& cfg, const std::string& profile) {
  if (profile == "reference") {
    cfg.teacher = PhaseConfig{200, 32, 1e-5};
    cfg.adapt = PhaseConfig{200, 32, 1e-5};
  } else if (profile == "desk") {
    cfg.teacher = PhaseConfig{15, 8, 3e-4};
    cfg.adapt = PhaseConfig{10, 8, 1e-4};
  } else {
    throw ValidationError("unknown profile '" + profile + "' (expected reference or desk)");
  }
  cfg.profile = profile;
}

void validate(const RunConfig& cfg) {
  for (const auto* phase : {&cfg.teacher, &cfg.adapt}) {
    if (!(phase->learning_rate > 0.0) || !std::isfinite(phase->learning_rate)) {
      throw ValidationError("learning rate must be > 0");
    }
    if (phase->epochs < 1) throw ValidationError("epochs must be >= 1");
    if (phase->batch_size < 1) throw ValidationError("batch size must be >= 1");
  }
  if (!(cfg.rmsprop.alpha >= 0.0 && cfg.rmsprop.alpha < 1.0)) throw ValidationError("rmsprop.alpha must be in [0,1)");
  if (!(cfg.rmsprop.eps > 0.0)) throw ValidationError("rmsprop.eps must be > 0");
  if (!(cfg.rmsprop.momentum >= 0.0 && cfg.rmsprop.momentum < 1.0)) {
    throw ValidationError("rmsprop.momentum must be in [0,1)");
  }
  validate(cfg.lambdas, true);
  if (!(cfg.gaze_sigma >= 0.0)) throw ValidationError("bad kernel width");
  if (!(cfg.w_floor > 0.0 && cfg.w_floor <= 1.0)) throw ValidationError("bad weight floor");
  validate(cfg.backbone);
  if (!(cfg.pseudo_threshold > 0.0 && cfg.pseudo_threshold < 1.0)) {
    throw ValidationError("pseudo-label threshold must be in (0,1)");
  }
  validate(cfg.synth, cfg.backbone.stride());
}

namespace {

nlohmann::json parse_int(const std::string& s) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw ValidationError("expected an integer, got '" + s + "'");
  return v;
}

nlohmann::json parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw ValidationError("expected a number, got '" + s + "'");
  return v;
}

nlohmann::json parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ValidationError("expected a boolean, got '" + s + "'");
}

nlohmann::json parse_string(const std::string& s) { return s; }

nlohmann::json parse_double_list(const std::string& s) {
  nlohmann::json list = nlohmann::json::array();
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) list.push_back(parse_double(item));
  if (list.empty()) throw ValidationError("expected a comma-separated list of numbers");
  return list;
}

template <class T>
T as(const nlohmann::json& j, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, int>) {
      if (!j.is_number_integer()) throw ValidationError("");
      return j.get<int>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)) {
        throw ValidationError("");
      }
      return j.get<std::uint64_t>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) throw ValidationError("");
      return j.get<double>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ValidationError("");
      return j.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ValidationError("");
      return j.get<std::string>();
    } else {
      return j.get<T>();
    }
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "' has the wrong type");
  }
}

template <class T, class Access>
ConfigKey make_key(std::string name, std::string help, Access access) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.get = [access](const RunConfig& c) { return nlohmann::json(access(const_cast<RunConfig&>(c))); };
  k.set = [access, name](RunConfig& c, const nlohmann::json& v) { access(c) = as<T>(v, name); };
  if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
    k.parse = parse_int;
  } else if constexpr (std::is_same_v<T, double>) {
    k.parse = parse_double;
  } else if constexpr (std::is_same_v<T, bool>) {
    k.parse = parse_bool;
  } else if constexpr (std::is_same_v<T, std::string>) {
    k.parse = parse_string;
  } else {
    k.parse = parse_double_list;
  }
  return k;
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> keys;
  auto add = [&](ConfigKey k) { keys.push_back(std::move(k)); };
  add(make_key<std::string>("profile", "preset applied before other keys: reference | desk",
                            [](RunConfig& c) -> auto& { return c.profile; }));
  add(make_key<int>("teacher.epochs", "teacher training epochs", [](RunConfig& c) -> auto& { return c.teacher.epochs; }));
  add(make_key<int>("teacher.batch_size", "teacher batch size",
                    [](RunConfig& c) -> auto& { return c.teacher.batch_size; }));
  add(make_key<double>("teacher.learning_rate", "teacher RMSProp learning rate",
                       [](RunConfig& c) -> auto& { return c.teacher.learning_rate; }));
  add(make_key<int>("adapt.epochs", "student adaptation epochs", [](RunConfig& c) -> auto& { return c.adapt.epochs; }));
  add(make_key<int>("adapt.batch_size", "student adaptation batch size",
                    [](RunConfig& c) -> auto& { return c.adapt.batch_size; }));
  add(make_key<double>("adapt.learning_rate", "student RMSProp learning rate",
                       [](RunConfig& c) -> auto& { return c.adapt.learning_rate; }));
  add(make_key<double>("rmsprop.alpha", "squared-gradient smoothing",
                       [](RunConfig& c) -> auto& { return c.rmsprop.alpha; }));
  add(make_key<double>("rmsprop.eps", "denominator epsilon", [](RunConfig& c) -> auto& { return c.rmsprop.eps; }));
  add(make_key<double>("rmsprop.momentum", "momentum (0 disables)",
                       [](RunConfig& c) -> auto& { return c.rmsprop.momentum; }));
  add(make_key<std::uint64_t>("seed", "training seed (init, shuffling)", [](RunConfig& c) -> auto& { return c.seed; }));
  add(make_key<double>("lambda.gaa", "weight of the gaze alignment loss",
                       [](RunConfig& c) -> auto& { return c.lambdas.gaa; }));
  add(make_key<double>("lambda.gb", "weight of the gaze balance loss", [](RunConfig& c) -> auto& { return c.lambdas.gb; }));
  add(make_key<double>("lambda.dice", "weight of the Dice loss", [](RunConfig& c) -> auto& { return c.lambdas.dice; }));
  add(make_key<double>("lambda.ce", "weight of the cross-entropy loss",
                       [](RunConfig& c) -> auto& { return c.lambdas.ce; }));
  add(make_key<double>("gaze.sigma", "heatmap Gaussian width in pixels (0 = 5% of width)",
                       [](RunConfig& c) -> auto& { return c.gaze_sigma; }));
  add(make_key<double>("gaze.w_floor", "minimum gaze weight", [](RunConfig& c) -> auto& { return c.w_floor; }));
  add(make_key<int>("backbone.depth", "U-Net pooling levels", [](RunConfig& c) -> auto& { return c.backbone.depth; }));
  add(make_key<int>("backbone.base_channels", "channels at the first level",
                    [](RunConfig& c) -> auto& { return c.backbone.base_channels; }));
  add(make_key<double>("pseudo.threshold", "teacher probability cut for pseudo-labels (>=)",
                       [](RunConfig& c) -> auto& { return c.pseudo_threshold; }));
  add(make_key<bool>("strict", "deterministic serial execution", [](RunConfig& c) -> auto& { return c.strict; }));
  add(make_key<std::string>("output_dir", "run directory", [](RunConfig& c) -> auto& { return c.output_dir; }));
  add(make_key<std::vector<double>>("sweep.values", "lambda grid for sweep",
                                    [](RunConfig& c) -> auto& { return c.sweep_values; }));

  add(make_key<int>("synth.image_size", "frame side in pixels", [](RunConfig& c) -> auto& { return c.synth.image_size; }));
  add(make_key<int>("synth.n_source", "source items", [](RunConfig& c) -> auto& { return c.synth.n_source; }));
  add(make_key<int>("synth.n_target", "target items", [](RunConfig& c) -> auto& { return c.synth.n_target; }));
  add(make_key<double>("synth.center_jitter", "centre offset range, fraction of size",
                       [](RunConfig& c) -> auto& { return c.synth.center_jitter; }));
  add(make_key<double>("synth.semi_axis_min", "outer semi-axis minimum, fraction of size",
                       [](RunConfig& c) -> auto& { return c.synth.semi_axis_min; }));
  add(make_key<double>("synth.semi_axis_max", "outer semi-axis maximum, fraction of size",
                       [](RunConfig& c) -> auto& { return c.synth.semi_axis_max; }));
  add(make_key<double>("synth.wall_min", "wall thickness minimum (px)",
                       [](RunConfig& c) -> auto& { return c.synth.wall_min; }));
  add(make_key<double>("synth.wall_max", "wall thickness maximum (px)",
                       [](RunConfig& c) -> auto& { return c.synth.wall_max; }));
  add(make_key<double>("synth.area_min", "minimum foreground fraction",
                       [](RunConfig& c) -> auto& { return c.synth.area_min; }));
  add(make_key<double>("synth.area_max", "maximum foreground fraction",
                       [](RunConfig& c) -> auto& { return c.synth.area_max; }));
  add(make_key<double>("synth.background_level", "background intensity",
                       [](RunConfig& c) -> auto& { return c.synth.background_level; }));
  add(make_key<double>("synth.wall_level", "wall intensity", [](RunConfig& c) -> auto& { return c.synth.wall_level; }));
  add(make_key<double>("synth.cavity_level", "cavity intensity",
                       [](RunConfig& c) -> auto& { return c.synth.cavity_level; }));
  add(make_key<int>("synth.clutter_blobs", "background clutter blobs per frame",
                    [](RunConfig& c) -> auto& { return c.synth.clutter_blobs; }));
  add(make_key<double>("synth.clutter_level", "clutter peak above background",
                       [](RunConfig& c) -> auto& { return c.synth.clutter_level; }));
  add(make_key<double>("synth.source_noise", "source additive Gaussian noise",
                       [](RunConfig& c) -> auto& { return c.synth.source_noise; }));
  add(make_key<double>("synth.speckle", "target Rayleigh speckle strength (0 off)",
                       [](RunConfig& c) -> auto& { return c.synth.speckle; }));
  add(make_key<double>("synth.gamma", "target gamma (1 off)", [](RunConfig& c) -> auto& { return c.synth.gamma; }));
  add(make_key<double>("synth.offset", "target intensity offset", [](RunConfig& c) -> auto& { return c.synth.offset; }));
  add(make_key<double>("synth.blur_sigma", "target blur sigma in px (0 off)",
                       [](RunConfig& c) -> auto& { return c.synth.blur_sigma; }));
  add(make_key<double>("synth.target_noise", "target additive noise",
                       [](RunConfig& c) -> auto& { return c.synth.target_noise; }));
  add(make_key<int>("synth.gaze_samples", "gaze samples per frame (5 Hz)",
                    [](RunConfig& c) -> auto& { return c.synth.gaze_samples; }));
  add(make_key<double>("synth.gaze_jitter", "gaze offset from the boundary, sigma in px",
                       [](RunConfig& c) -> auto& { return c.synth.gaze_jitter; }));
  add(make_key<std::uint64_t>("synth.seed", "data generation seed", [](RunConfig& c) -> auto& { return c.synth.seed; }));
  return keys;
}

const ConfigKey& find_key(const std::string& name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return k;
  }
  throw ValidationError("unknown config key '" + name + "'");
}

void flatten(const nlohmann::json& j, const std::string& prefix, std::vector<std::pair<std::string, nlohmann::json>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten(*it, key, out);
    } else {
      out.emplace_back(key, *it);
    }
  }
}

nlohmann::json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    nlohmann::json obj = nlohmann::json::object();
    for (const auto& [k, v] : *t) obj[std::string(k.str())] = toml_to_json(v);
    return obj;
  }
  if (const auto* a = node.as_array()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : *a) arr.push_back(toml_to_json(v));
    return arr;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  throw ValidationError("unsupported TOML value type");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const nlohmann::json& value) {
  const ConfigKey& k = find_key(key);
  if (key == "profile") {
    apply_profile(cfg, as<std::string>(value, key));
    return;
  }
  k.set(cfg, value);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  set_config_value(cfg, key, find_key(key).parse(assignment.substr(eq + 1)));
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config root must be a table/object");
  std::vector<std::pair<std::string, nlohmann::json>> flat;
  flatten(j, "", flat);
  RunConfig cfg;
  for (const auto& [k, v] : flat) {
    if (k == "profile") set_config_value(cfg, k, v);
  }
  for (const auto& [k, v] : flat) {
    if (k != "profile") set_config_value(cfg, k, v);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  if (path.extension() == ".toml") {
    try {
      return config_from_json(toml_to_json(toml::parse(in, path.string())));
    } catch (const toml::parse_error& e) {
      std::ostringstream msg;
      msg << "config parse error: " << e.description() << " at line " << e.source().begin.line;
      throw ValidationError(msg.str());
    }
  }
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : config_keys()) j[k.name] = k.get(cfg);
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  auto j = config_to_json(cfg);
  j.erase("output_dir");
  const std::string text = j.dump();
  return sha1_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string describe_config_keys(const RunConfig& defaults) {
  std::ostringstream out;
  out << "Config keys (set in the config file or with --set key=value):\n";
  for (const auto& k : config_keys()) {
    out << "  " << k.name;
    for (std::size_t pad = k.name.size(); pad < 26; ++pad) out << ' ';
    out << " default " << k.get(defaults).dump() << "  " << k.help << '\n';
  }
  return out.str();
}

}  // namespace gahcda
