#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "camspoof/attacker.hpp"
#include "camspoof/defense.hpp"
#include "camspoof/detectors.hpp"
#include "camspoof/error.hpp"
#include "camspoof/pixel.hpp"
#include "camspoof/scene.hpp"
#include "camspoof/sim.hpp"

namespace camspoof {

inline constexpr int kScenarioSchemaVersion = 1;

struct ScenarioOutputs {
  std::string capture = "capture.gvsc";
  std::string verdicts = "verdicts.csv";
  std::string width_verdicts = "width_verdicts.csv";
  std::string summary = "summary.json";
};

struct Scenario {
  SimConfig sim;
  std::optional<AttackPlan> attack;
  std::optional<DefensePlan> defense;
  DetectorConfig detectors;
  ScenarioOutputs outputs;
  nlohmann::json attack_payload = nullptr;  // payload block as written, for echoes
};

namespace detail {

using json = nlohmann::json;

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

// Reads one object, tracking which keys were consumed so strays can be reported.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const std::string& path() const noexcept { return path_; }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw SchemaError(join_path(path_, key), "required field missing");
    return j_.at(key);
  }

  template <class T>
  T req(const std::string& key) {
    return convert<T>(raw(key), join_path(path_, key));
  }

  template <class T>
  T opt(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    return convert<T>(j_.at(key), join_path(path_, key));
  }

  std::optional<ObjectReader> child(const std::string& key, bool required) {
    seen_.insert(key);
    if (!has(key)) {
      if (required) throw SchemaError(join_path(path_, key), "required field missing");
      return std::nullopt;
    }
    return ObjectReader(j_.at(key), join_path(path_, key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw SchemaError(join_path(path_, k), "unknown field");
  }

  template <class T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw SchemaError(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw SchemaError(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw SchemaError(path, "expected a number");
      return v.get<T>();
    } else {
      static_assert(std::is_integral_v<T>);
      if (!v.is_number_integer()) throw SchemaError(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) {
          const auto u = v.get<std::uint64_t>();
          if (u > std::numeric_limits<T>::max()) throw SchemaError(path, "integer out of range");
          return static_cast<T>(u);
        }
        const auto s = v.get<std::int64_t>();
        if (s < 0) throw SchemaError(path, "expected a non-negative integer");
        if (static_cast<std::uint64_t>(s) > std::numeric_limits<T>::max()) throw SchemaError(path, "integer out of range");
        return static_cast<T>(s);
      } else {
        const auto s = v.get<std::int64_t>();
        if (s < std::numeric_limits<T>::min() || s > std::numeric_limits<T>::max())
          throw SchemaError(path, "integer out of range");
        return static_cast<T>(s);
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline Bytes parse_hex(const std::string& hex, const std::string& path) {
  if (hex.empty() || hex.size() % 2 != 0) throw SchemaError(path, "expected an even-length hex string");
  Bytes out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    auto nib = [&](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      throw SchemaError(path, "invalid hex digit");
    };
    out.push_back(static_cast<std::uint8_t>(nib(hex[i]) * 16 + nib(hex[i + 1])));
  }
  return out;
}

inline std::string to_hex(std::span<const std::uint8_t> b) {
  static const char* d = "0123456789abcdef";
  std::string s;
  for (auto x : b) {
    s += d[x >> 4];
    s += d[x & 15];
  }
  return s;
}

// Relative payload paths resolve against the scenario file's directory.
inline std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || p.front() == '/' || base_dir.empty()) return p;
  return base_dir + "/" + p;
}

inline SceneConfig parse_scene(ObjectReader o) {
  SceneConfig s;
  s.seed = o.req<std::uint64_t>("seed");
  s.width = o.opt<std::uint32_t>("width", s.width);
  s.height = o.opt<std::uint32_t>("height", s.height);
  s.motion_dx = o.opt<int>("motion_dx", s.motion_dx);
  s.motion_dy = o.opt<int>("motion_dy", s.motion_dy);
  s.texture_scale = o.opt<double>("texture_scale", s.texture_scale);
  s.corner_density = o.opt<double>("corner_density", s.corner_density);
  o.finish();
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw SchemaError(o.path(), e.what());
  }
  return s;
}

inline SimConfig parse_sim(ObjectReader o) {
  SimConfig c;
  c.fps = o.opt<double>("fps", c.fps);
  c.loss_prob = o.opt<double>("loss_prob", c.loss_prob);
  c.camera_delay_frames = o.opt<unsigned>("camera_delay_frames", c.camera_delay_frames);
  c.duration_frames = o.req<std::uint64_t>("duration_frames");
  c.seed = o.req<std::uint64_t>("seed");
  c.max_payload = o.opt<std::uint32_t>("max_payload", c.max_payload);
  c.link_gbps = o.opt<double>("link_gbps", c.link_gbps);
  c.scene = parse_scene(*o.child("scene", true));
  o.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw SchemaError(o.path(), e.what());
  }
  return c;
}

inline SignLabel parse_label(const std::string& s, const std::string& path) {
  if (s == "stop_sign") return SignLabel::StopSign;
  if (s == "red_light") return SignLabel::RedLight;
  throw SchemaError(path, "expected \"stop_sign\" or \"red_light\"");
}

inline AttackPlan parse_attack(ObjectReader o, const std::string& base_dir, json& payload_echo) {
  AttackPlan a;
  const auto kind = o.req<std::string>("kind");
  if (kind == "full_frame") a.kind = AttackKind::FullFrame;
  else if (kind == "stripe") a.kind = AttackKind::Stripe;
  else if (kind == "patch") a.kind = AttackKind::Patch;
  else throw SchemaError(join_path(o.path(), "kind"), "expected full_frame, stripe or patch");
  a.start_frame = o.req<std::uint64_t>("start_frame");
  a.duration_frames = o.req<std::uint64_t>("duration_frames");
  a.injected_width = o.req<std::uint32_t>("injected_width");
  a.stripe_rows = o.opt<std::uint32_t>("stripe_rows", 0);
  if (o.has("patch_position")) {
    const auto& pp = o.raw("patch_position");
    const std::string path = join_path(o.path(), "patch_position");
    if (!pp.is_array() || pp.size() != 2) throw SchemaError(path, "expected [row, col]");
    a.patch_row = ObjectReader::convert<std::uint32_t>(pp[0], path + "[0]");
    a.patch_col = ObjectReader::convert<std::uint32_t>(pp[1], path + "[1]");
  } else {
    o.opt<bool>("patch_position", false);
  }
  const auto policy = o.opt<std::string>("metadata_policy", "static");
  if (policy == "static") a.metadata_policy = MetadataPolicy::Static;
  else if (policy == "sniff_adaptive") a.metadata_policy = MetadataPolicy::SniffAdaptive;
  else throw SchemaError(join_path(o.path(), "metadata_policy"), "expected static or sniff_adaptive");
  a.rate_multiplier = o.opt<double>("rate_multiplier", 1.0);
  a.static_first_block_id = o.opt<std::uint64_t>("static_first_block_id", 1);
  a.sniff_timestamps = o.opt<bool>("sniff_timestamps", false);

  auto p = *o.child("payload", true);
  if (p.has("pxb")) {
    const auto file = p.req<std::string>("pxb");
    try {
      a.payload = load_pxb(resolve(base_dir, file));
    } catch (const Error& e) {
      throw SchemaError(join_path(p.path(), "pxb"), e.what());
    }
    payload_echo = {{"pxb", file}};
    a.payload_source = "pxb:" + file;
  } else {
    const auto label = parse_label(p.req<std::string>("template"), join_path(p.path(), "template"));
    const auto size = p.req<std::uint32_t>("size");
    try {
      a.payload = make_template(label, size);
    } catch (const Error& e) {
      throw SchemaError(join_path(p.path(), "size"), e.what());
    }
    payload_echo = {{"template", to_string(label)}, {"size", size}};
    a.payload_source = to_string(label) + ":" + std::to_string(size);
  }
  p.finish();
  o.finish();
  try {
    a.validate();
  } catch (const ConfigError& e) {
    throw SchemaError(o.path(), e.what());
  }
  return a;
}

inline DefensePlan parse_defense(ObjectReader o) {
  DefensePlan d;
  d.key = parse_hex(o.req<std::string>("key_hex"), join_path(o.path(), "key_hex"));
  if (d.key.size() > 256) throw SchemaError(join_path(o.path(), "key_hex"), "key longer than 256 bytes");
  d.bits = o.opt<unsigned>("bits", 1);
  d.d_max = o.opt<unsigned>("d_max", 1);
  if (d.bits < 1 || d.bits > 8) throw SchemaError(join_path(o.path(), "bits"), "must be in [1, 8]");
  o.finish();
  return d;
}

}  // namespace detail

inline DetectorConfig parse_detectors(const nlohmann::json& j, const std::string& path, DetectorConfig d) {
  detail::ObjectReader o(j, path);
  d.expected_width = o.opt<std::uint32_t>("expected_width", d.expected_width);
  d.expected_height = o.opt<std::uint32_t>("expected_height", d.expected_height);
  d.expected_format = o.opt<std::uint32_t>("expected_format", d.expected_format);
  d.id_window = o.opt<std::uint64_t>("id_window", d.id_window);
  d.period_ns = o.opt<std::uint64_t>("period_ns", d.period_ns);
  d.ts_tolerance_ns = o.opt<std::uint64_t>("ts_tolerance_ns", d.ts_tolerance_ns);
  d.mse_threshold = o.opt<double>("mse_threshold", d.mse_threshold);
  d.hist_threshold = o.opt<double>("hist_threshold", d.hist_threshold);
  d.flow_error_threshold = o.opt<double>("flow_error_threshold", d.flow_error_threshold);
  d.flow_min_match_fraction = o.opt<double>("flow_min_match_fraction", d.flow_min_match_fraction);
  d.hue_bins = o.opt<std::uint32_t>("hue_bins", d.hue_bins);
  d.sat_bins = o.opt<std::uint32_t>("sat_bins", d.sat_bins);
  d.flow_min_corners = o.opt<std::size_t>("flow_min_corners", d.flow_min_corners);
  d.corners.max_corners = o.opt<std::size_t>("max_corners", d.corners.max_corners);
  d.lk.levels = o.opt<int>("lk_levels", d.lk.levels);
  d.lk.window = o.opt<int>("lk_window", d.lk.window);
  o.finish();
  try {
    d.validate();
  } catch (const ConfigError& e) {
    throw SchemaError(path, e.what());
  }
  return d;
}

inline nlohmann::json detectors_to_json(const DetectorConfig& d) {
  return {{"expected_width", d.expected_width},
          {"expected_height", d.expected_height},
          {"expected_format", d.expected_format},
          {"id_window", d.id_window},
          {"period_ns", d.period_ns},
          {"ts_tolerance_ns", d.ts_tolerance_ns},
          {"mse_threshold", d.mse_threshold},
          {"hist_threshold", d.hist_threshold},
          {"flow_error_threshold", d.flow_error_threshold},
          {"flow_min_match_fraction", d.flow_min_match_fraction},
          {"hue_bins", d.hue_bins},
          {"sat_bins", d.sat_bins},
          {"flow_min_corners", d.flow_min_corners},
          {"max_corners", d.corners.max_corners},
          {"lk_levels", d.lk.levels},
          {"lk_window", d.lk.window}};
}

// `base_dir` anchors relative payload paths.
inline Scenario parse_scenario(const nlohmann::json& j, const std::string& base_dir = {}) {
  detail::ObjectReader root(j, "");
  const int version = root.req<int>("schema_version");
  if (version != kScenarioSchemaVersion)
    throw SchemaError("schema_version", "unsupported version " + std::to_string(version));
  Scenario s;
  s.sim = detail::parse_sim(*root.child("sim", true));
  if (auto a = root.child("attack", false)) s.attack = detail::parse_attack(*a, base_dir, s.attack_payload);
  if (auto d = root.child("defense", false)) s.defense = detail::parse_defense(*d);
  s.detectors = DetectorConfig::for_stream(s.sim.scene.width, s.sim.scene.height, s.sim.fps);
  if (root.has("detectors")) s.detectors = parse_detectors(root.raw("detectors"), "detectors", s.detectors);
  else root.opt<bool>("detectors", false);
  if (auto o = root.child("outputs", false)) {
    s.outputs.capture = o->opt<std::string>("capture", s.outputs.capture);
    s.outputs.verdicts = o->opt<std::string>("verdicts", s.outputs.verdicts);
    s.outputs.width_verdicts = o->opt<std::string>("width_verdicts", s.outputs.width_verdicts);
    s.outputs.summary = o->opt<std::string>("summary", s.outputs.summary);
    o->finish();
  }
  root.finish();
  if (s.attack) {
    try {
      validate_attack(*s.attack, s.sim);
    } catch (const ConfigError& e) {
      throw SchemaError("attack", e.what());
    }
  }
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  const Bytes raw = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("<root>", std::string("not valid JSON: ") + e.what());
  }
  const auto slash = path.find_last_of('/');
  return parse_scenario(j, slash == std::string::npos ? std::string{} : path.substr(0, slash));
}

// Effective configuration with every default filled in. The RC4 key is
// replaced by its length unless `include_key` is set.
inline nlohmann::json scenario_to_json(const Scenario& s, bool include_key = false) {
  nlohmann::json j;
  j["schema_version"] = kScenarioSchemaVersion;
  const auto& c = s.sim;
  j["sim"] = {{"fps", c.fps},
              {"loss_prob", c.loss_prob},
              {"camera_delay_frames", c.camera_delay_frames},
              {"duration_frames", c.duration_frames},
              {"seed", c.seed},
              {"max_payload", c.max_payload},
              {"link_gbps", c.link_gbps},
              {"scene",
               {{"seed", c.scene.seed},
                {"width", c.scene.width},
                {"height", c.scene.height},
                {"motion_dx", c.scene.motion_dx},
                {"motion_dy", c.scene.motion_dy},
                {"texture_scale", c.scene.texture_scale},
                {"corner_density", c.scene.corner_density}}}};
  if (s.attack) {
    const auto& a = *s.attack;
    j["attack"] = {{"kind", to_string(a.kind)},
                   {"start_frame", a.start_frame},
                   {"duration_frames", a.duration_frames},
                   {"injected_width", a.injected_width},
                   {"stripe_rows", a.stripe_rows},
                   {"patch_position", {a.patch_row, a.patch_col}},
                   {"metadata_policy", to_string(a.metadata_policy)},
                   {"rate_multiplier", a.rate_multiplier},
                   {"static_first_block_id", a.static_first_block_id},
                   {"sniff_timestamps", a.sniff_timestamps},
                   {"payload", s.attack_payload}};
  } else {
    j["attack"] = nullptr;
  }
  if (s.defense) {
    j["defense"] = {{"bits", s.defense->bits}, {"d_max", s.defense->d_max}};
    if (include_key) j["defense"]["key_hex"] = detail::to_hex(s.defense->key);
    else j["defense"]["key_bytes"] = s.defense->key.size();
  } else {
    j["defense"] = nullptr;
  }
  j["detectors"] = detectors_to_json(s.detectors);
  j["outputs"] = {{"capture", s.outputs.capture},
                  {"verdicts", s.outputs.verdicts},
                  {"width_verdicts", s.outputs.width_verdicts},
                  {"summary", s.outputs.summary}};
  return j;
}

}  // namespace camspoof
