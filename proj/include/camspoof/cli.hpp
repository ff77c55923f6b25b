#pragma once

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "camspoof/analytics.hpp"
#include "camspoof/detectors.hpp"
#include "camspoof/scenario.hpp"
#include "camspoof/sim.hpp"

namespace camspoof {

struct SimulateOptions {
  std::string scenario;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;  // overrides sim.seed and sim.scene.seed
  std::optional<double> fps;
  bool records_csv = false;
  bool export_frames = false;
};

struct ReplayOptions {
  std::string capture;
  std::string out_dir = ".";
  std::optional<std::string> detectors;  // JSON object with detector overrides
};

struct AnalyzeOptions {
  std::string kind;  // prob | runs | det | protect
  std::string out_dir = ".";
  std::vector<unsigned> b = {1, 2, 3};
  unsigned d_max = 1;
  double fps = 20.0;
  std::vector<double> t_stop = {2.58, 5.25};
  unsigned r_max = 10;
  std::uint64_t frames = 100'000;
  std::uint64_t trials = 500;
  std::uint64_t seed = 1;
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path.string(), std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

inline std::string comment_line(const nlohmann::json& j) { return "# " + j.dump() + "\n"; }

// Shortest round-trippable decimal; keeps CSVs stable across runs.
inline std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline DetectorConfig detectors_from_header(const nlohmann::json& header) {
  const auto& scene = header.at("scene");
  DetectorConfig d = DetectorConfig::for_stream(scene.at("width").get<std::uint32_t>(),
                                                scene.at("height").get<std::uint32_t>(), header.at("fps").get<double>());
  if (header.contains("extra") && header["extra"].contains("detectors"))
    d = parse_detectors(header["extra"]["detectors"], "detectors", d);
  return d;
}

struct VerdictFiles {
  std::string verdicts;
  std::string width_verdicts;
};

inline VerdictFiles verdict_files(const Capture& cap, const std::vector<FrameResult>& frames,
                                  const DetectorConfig& det, std::vector<DetectorVerdict>* out = nullptr) {
  const nlohmann::json cfg = {{"capture_header", cap.header}, {"detectors", detectors_to_json(det)}};
  auto verdicts = run_detectors(observed_frames(frames), det);
  VerdictFiles f;
  f.verdicts = verdict_csv(verdicts, cfg.dump());
  f.width_verdicts = comment_line(cfg) + width_verdict_csv(frames);
  if (out) *out = std::move(verdicts);
  return f;
}

inline nlohmann::json alert_counts(const std::vector<DetectorVerdict>& v, const std::vector<FrameResult>& frames,
                                   bool attack_only) {
  std::map<std::string, std::uint64_t> c = {{"constant_meta", 0}, {"frame_id", 0},  {"timestamp", 0},
                                            {"timestamp_rate", 0}, {"mse", 0},     {"histogram", 0},
                                            {"optical_flow", 0},   {"combined", 0}};
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (attack_only && !frames[i].attacked()) continue;
    c["constant_meta"] += v[i].constant_meta;
    c["frame_id"] += v[i].frame_id;
    c["timestamp"] += v[i].timestamp;
    c["timestamp_rate"] += v[i].timestamp_rate;
    c["mse"] += v[i].mse;
    c["histogram"] += v[i].histogram;
    c["optical_flow"] += v[i].optical_flow;
    c["combined"] += v[i].combined;
  }
  return c;
}

}  // namespace detail

inline nlohmann::json load_scenario_json(const std::string& path) {
  const Bytes raw = read_file(path);
  try {
    return nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("<root>", std::string("not valid JSON: ") + e.what());
  }
}

// Runs a scenario and writes capture, verdict CSVs and a JSON summary.
// Returns the summary.
inline nlohmann::json cmd_simulate(const SimulateOptions& opt) {
  nlohmann::json j = load_scenario_json(opt.scenario);
  if (j.is_object() && j.contains("sim") && j["sim"].is_object()) {
    if (opt.seed) {
      j["sim"]["seed"] = *opt.seed;
      if (j["sim"].contains("scene") && j["sim"]["scene"].is_object()) j["sim"]["scene"]["seed"] = *opt.seed;
    }
    if (opt.fps) j["sim"]["fps"] = *opt.fps;
  }
  const auto slash = opt.scenario.find_last_of('/');
  const Scenario sc = parse_scenario(j, slash == std::string::npos ? std::string{} : opt.scenario.substr(0, slash));
  const nlohmann::json effective = scenario_to_json(sc);

  SessionResult s = run_session(sc.sim, sc.attack, sc.defense, effective);
  const auto dir = detail::prepare_dir(opt.out_dir);
  write_file((dir / sc.outputs.capture).string(), encode_capture(s.capture));

  std::vector<DetectorVerdict> verdicts;
  const auto files = detail::verdict_files(s.capture, s.frames, sc.detectors, &verdicts);
  detail::write_text(dir / sc.outputs.verdicts, files.verdicts);
  if (sc.defense) detail::write_text(dir / sc.outputs.width_verdicts, files.width_verdicts);
  if (opt.records_csv) detail::write_text(dir / "records.csv", records_csv(s.capture));
  if (opt.export_frames) {
    const auto fdir = detail::prepare_dir((dir / "frames").string());
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%05zu.pxb", i);
      save_pxb((fdir / name).string(), s.frames[i].reassembly.buffer);
    }
  }

  nlohmann::json sum;
  sum["config"] = effective;
  sum["seed"] = sc.sim.seed;
  std::uint64_t attack_frames = 0, forged_leaders = 0, incomplete = 0;
  for (const auto& f : s.frames) {
    attack_frames += f.attacked();
    forged_leaders += f.source == Link::AttackerToAdas;
    incomplete += !f.reassembly.complete();
  }
  sum["frames"] = s.frames.size();
  sum["attack_frames"] = attack_frames;
  sum["camera_frames"] = s.frames.size() - forged_leaders;
  sum["incomplete_frames"] = incomplete;
  sum["alerts"] = detail::alert_counts(verdicts, s.frames, false);
  sum["alerts_on_attack_frames"] = detail::alert_counts(verdicts, s.frames, true);
  if (sc.defense) {
    std::uint64_t valid = 0, invalid = 0, abstain = 0, invalid_attack = 0;
    for (const auto& f : s.frames) {
      if (!f.width_verdict) continue;
      if (f.width_verdict->abstained) ++abstain;
      if (f.width_verdict->valid()) ++valid;
      else {
        ++invalid;
        invalid_attack += f.attacked();
      }
    }
    sum["width_defense"] = {{"valid", valid}, {"invalid", invalid}, {"abstained", abstain},
                            {"invalid_attack_frames", invalid_attack}, {"forwarded", valid}};
  } else {
    sum["width_defense"] = nullptr;
  }
  sum["payload_packets"] = {{"sent", s.payload_packets_sent},
                            {"lost", s.payload_packets_lost},
                            {"missing_fraction", s.payload_packets_sent
                                                     ? static_cast<double>(s.payload_packets_lost) /
                                                           static_cast<double>(s.payload_packets_sent)
                                                     : 0.0}};
  sum["attack_log"] = s.log;
  detail::write_text(dir / sc.outputs.summary, sum.dump(2) + "\n");
  return sum;
}

// Re-derives verdict CSVs from a saved capture.
inline void cmd_replay(const ReplayOptions& opt) {
  const Capture cap = decode_capture(read_file(opt.capture));
  DetectorConfig det;
  try {
    det = detail::detectors_from_header(cap.header);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseError::Kind::InvalidField, std::string("capture header: ") + e.what());
  }
  if (opt.detectors) det = parse_detectors(load_scenario_json(*opt.detectors), "detectors", det);
  const auto frames = replay(cap);
  const auto files = detail::verdict_files(cap, frames, det);
  std::string verdicts_name = "verdicts.csv", width_name = "width_verdicts.csv";
  if (cap.header.contains("extra") && cap.header["extra"].contains("outputs")) {
    verdicts_name = cap.header["extra"]["outputs"].value("verdicts", verdicts_name);
    width_name = cap.header["extra"]["outputs"].value("width_verdicts", width_name);
  }
  const auto dir = detail::prepare_dir(opt.out_dir);
  detail::write_text(dir / verdicts_name, files.verdicts);
  if (!cap.header.at("defense").is_null()) detail::write_text(dir / width_name, files.width_verdicts);
}

inline nlohmann::json analyze_params(const AnalyzeOptions& o) {
  return {{"kind", o.kind}, {"b", o.b},           {"d_max", o.d_max},   {"fps", o.fps},  {"t_stop", o.t_stop},
          {"r_max", o.r_max}, {"frames", o.frames}, {"trials", o.trials}, {"seed", o.seed}};
}

// Writes CSV/JSON reports for one analysis kind; returns the JSON report.
inline nlohmann::json cmd_analyze(const AnalyzeOptions& o) {
  for (unsigned b : o.b)
    if (b < 1 || b > 8) throw ConfigError("--b values must be in [1, 8]");
  if (!(o.fps > 0.0)) throw ConfigError("--fps must be positive");
  const auto dir = detail::prepare_dir(o.out_dir);
  const nlohmann::json params = analyze_params(o);
  nlohmann::json rep = {{"params", params}};
  using detail::num;

  if (o.kind == "prob") {
    std::ostringstream curve, times;
    curve << detail::comment_line(params) << "variant,b,d_max,t_stop,n_stop,r,p,p_run\n";
    times << detail::comment_line(params) << "variant,b,d_max,r,p,expected_attempts,expected_time_s\n";
    nlohmann::json rows = nlohmann::json::array();
    for (RunVariant v : {RunVariant::FullFrame, RunVariant::StripePatch}) {
      const std::string vname = v == RunVariant::FullFrame ? "full_frame" : "stripe_patch";
      for (unsigned b : o.b) {
        const double p = evasion_probability(v, b, o.d_max);
        for (double ts : o.t_stop) {
          const auto n = n_stop(ts, o.fps);
          for (unsigned r = 1; r <= o.r_max; ++r)
            curve << vname << ',' << b << ',' << o.d_max << ',' << num(ts) << ',' << n << ',' << r << ',' << num(p)
                  << ',' << num(p_run(n, r, p)) << '\n';
        }
        for (unsigned r = 1; r <= o.r_max; ++r)
          times << vname << ',' << b << ',' << o.d_max << ',' << r << ',' << num(p) << ','
                << num(expected_attempts(r, p)) << ',' << num(expected_time(r, p, o.fps)) << '\n';
        rows.push_back({{"variant", vname}, {"b", b}, {"p", p},
                        {"expected_time_r5_s", expected_time(5, p, o.fps)}});
      }
    }
    detail::write_text(dir / "prob.csv", curve.str());
    detail::write_text(dir / "expected_time.csv", times.str());
    rep["summary"] = rows;
    detail::write_text(dir / "prob.json", rep.dump(2) + "\n");
  } else if (o.kind == "runs") {
    std::ostringstream csv;
    csv << detail::comment_line(params) << "b,run_length,count\n";
    nlohmann::json rows = nlohmann::json::array();
    for (unsigned b : o.b) {
      AttackRecipe rc;
      rc.bits = b;
      rc.d_max = o.d_max;
      rc.frames = o.frames;
      rc.fps = o.fps;
      rc.seed = o.seed;
      const auto mc = monte_carlo_attack(rc);
      for (const auto& [len, n] : mc.run_histogram) csv << b << ',' << len << ',' << n << '\n';
      rows.push_back({{"b", b},
                      {"attack_frames", mc.attack_frames},
                      {"detection_rate", mc.detection_rate},
                      {"closed_form_detection", mc.closed_form},
                      {"mode_run", mc.mode_run},
                      {"max_run", mc.max_run},
                      {"max_run_seconds", mc.max_run_seconds},
                      {"max_run_share", mc.max_run_share},
                      {"reference_longest_run_seconds", 0.2},
                      {"reference_success_probability", 0.002}});
    }
    detail::write_text(dir / "runs.csv", csv.str());
    rep["summary"] = rows;
    detail::write_text(dir / "runs.json", rep.dump(2) + "\n");
  } else if (o.kind == "det") {
    const DetExperiment ex = det_experiment(o.trials, o.seed);
    std::ostringstream csv;
    csv << detail::comment_line(params) << "detector,threshold,false_positive_rate,false_negative_rate\n";
    nlohmann::json rows = nlohmann::json::object();
    auto emit = [&](const std::string& name, const DetScores& s, std::vector<double> grid, bool below) {
      const DetCurve c = det_curve(s.normal, s.attack, std::move(grid), below);
      std::uint64_t zero = 0;
      for (const auto& p : c.points) {
        csv << name << ',' << num(p.threshold) << ',' << num(p.false_positive_rate) << ','
            << num(p.false_negative_rate) << '\n';
        zero += p.false_positive_rate == 0.0 && p.false_negative_rate == 0.0;
      }
      rows[name] = {{"thresholds_with_zero_error", zero}, {"points", c.points.size()}};
    };
    emit("mse", ex.mse, threshold_grid(0, 500, 5), true);
    emit("histogram", ex.histogram, threshold_grid(0, 1, 0.01), false);
    emit("optical_flow", ex.flow, threshold_grid(0, 60, 0.5), false);
    detail::write_text(dir / "det.csv", csv.str());
    rep["summary"] = rows;
    detail::write_text(dir / "det.json", rep.dump(2) + "\n");
  } else if (o.kind == "protect") {
    std::ostringstream csv;
    csv << detail::comment_line(params) << "b,kind,width_difference,injections,recognized,defense_rate\n";
    nlohmann::json rows = nlohmann::json::array();
    for (unsigned b : o.b) {
      ProtectionRecipe rc;
      rc.bits = b;
      rc.trials = o.trials;
      rc.seed = o.seed;
      const auto pr = protection_eval(rc);
      for (const auto& k : pr.buckets)
        csv << b << ',' << to_string(k.kind) << ',' << k.width_difference << ',' << k.injections << ','
            << k.recognized << ',' << num(k.defense_rate()) << '\n';
      rows.push_back({{"b", b},
                      {"stripe_total_defense", pr.stripe_total_defense},
                      {"patch_total_defense", pr.patch_total_defense},
                      {"p_protection", pr.closed_form}});
    }
    detail::write_text(dir / "protect.csv", csv.str());
    rep["summary"] = rows;
    detail::write_text(dir / "protect.json", rep.dump(2) + "\n");
  } else {
    throw ConfigError("unknown analysis kind '" + o.kind + "' (expected prob, runs, det or protect)");
  }
  return rep;
}

}  // namespace camspoof
