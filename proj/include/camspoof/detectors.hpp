#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "camspoof/gvsp.hpp"
#include "camspoof/pixel.hpp"
#include "camspoof/vision.hpp"

namespace camspoof {

struct DetectorConfig {
  std::uint32_t expected_width = 1936;
  std::uint32_t expected_height = 1216;
  std::uint32_t expected_format = static_cast<std::uint32_t>(PixelFormat::BayerRG8);
  std::uint64_t id_window = 3;
  std::uint64_t period_ns = 50'000'000;
  std::uint64_t ts_tolerance_ns = 10'000'000;  // 20% of the period by default
  double mse_threshold = 10.0;
  double hist_threshold = 0.4;
  double flow_error_threshold = 12.0;  // median tracking residual, grey levels
  double flow_min_match_fraction = 0.5;
  std::uint32_t hue_bins = 50;
  std::uint32_t sat_bins = 60;
  std::size_t flow_min_corners = 8;
  CornerParams corners{};
  LkParams lk{};

  static DetectorConfig for_stream(std::uint32_t width, std::uint32_t height, double fps) {
    DetectorConfig cfg;
    cfg.expected_width = width;
    cfg.expected_height = height;
    cfg.period_ns = static_cast<std::uint64_t>(std::llround(1e9 / fps));
    cfg.ts_tolerance_ns = cfg.period_ns / 5;
    return cfg;
  }

  void validate() const {
    if (id_window == 0 || period_ns == 0 || ts_tolerance_ns == 0) throw ConfigError("detector windows must be positive");
    if (!(mse_threshold > 0) || !(hist_threshold > 0) || !(flow_error_threshold > 0) ||
        !(flow_min_match_fraction > 0))
      throw ConfigError("detector thresholds must be positive");
    if (hist_threshold > 1.0 || flow_min_match_fraction > 1.0) throw ConfigError("fractional thresholds must be <= 1");
    if (hue_bins == 0 || sat_bins == 0) throw ConfigError("histogram bins must be positive");
  }
};

// --- protocol-based -------------------------------------------------------

inline bool constant_meta_check(const LeaderPacket& leader, const DetectorConfig& cfg) {
  return leader.width != cfg.expected_width || leader.height != cfg.expected_height ||
         leader.pixel_format != cfg.expected_format;
}

// Accepted IDs: (prev, prev + id_window].
inline bool frame_id_check(const LeaderPacket& leader, const LeaderPacket* prev, const DetectorConfig& cfg) {
  if (!prev) return false;
  return !(leader.block_id > prev->block_id && leader.block_id - prev->block_id <= cfg.id_window);
}

// Timestamp delta must match the ID gap times the nominal period.
inline bool timestamp_check(const LeaderPacket& leader, const LeaderPacket* prev, const DetectorConfig& cfg) {
  if (!prev) return false;
  const double gap = static_cast<double>(leader.block_id) - static_cast<double>(prev->block_id);
  const double dts = static_cast<double>(leader.timestamp_ns) - static_cast<double>(prev->timestamp_ns);
  return std::abs(dts - gap * static_cast<double>(cfg.period_ns)) > static_cast<double>(cfg.ts_tolerance_ns);
}

// Timestamp delta must match the receiver's own clock delta.
inline bool timestamp_rate_check(const LeaderPacket& leader, const LeaderPacket* prev,
                                 std::optional<std::int64_t> external_clock_delta_ns, const DetectorConfig& cfg) {
  if (!prev || !external_clock_delta_ns) return false;
  const double dts = static_cast<double>(leader.timestamp_ns) - static_cast<double>(prev->timestamp_ns);
  return std::abs(dts - static_cast<double>(*external_clock_delta_ns)) > static_cast<double>(cfg.ts_tolerance_ns);
}

// --- video-based -----------------------------------------------------------

// Mean squared difference of raw mosaic bytes over the overlapping
// (row, column) region of the two frames.
inline double frame_mse(const PixelBuffer& cur, const PixelBuffer& prev) {
  const std::uint32_t w = std::min(cur.width(), prev.width());
  const std::uint32_t h = std::min(cur.height(), prev.height());
  double acc = 0.0;
  for (std::uint32_t r = 0; r < h; ++r) {
    auto a = cur.row(r);
    auto b = prev.row(r);
    for (std::uint32_t c = 0; c < w; ++c) {
      const double d = static_cast<double>(a[c]) - static_cast<double>(b[c]);
      acc += d * d;
    }
  }
  return acc / (static_cast<double>(w) * h);
}

inline bool mse_check(const PixelBuffer& cur, const PixelBuffer& prev, const DetectorConfig& cfg) {
  return frame_mse(cur, prev) < cfg.mse_threshold;
}

inline double histogram_score(const RgbImage& cur, const RgbImage& prev, const DetectorConfig& cfg) {
  return bhattacharyya_distance(hs_histogram(prev, cfg.hue_bins, cfg.sat_bins),
                                hs_histogram(cur, cfg.hue_bins, cfg.sat_bins));
}

inline bool histogram_check(const RgbImage& cur, const RgbImage& prev, const DetectorConfig& cfg) {
  return histogram_score(cur, prev, cfg) > cfg.hist_threshold;
}

struct FlowResult {
  bool abstained = false;  // too few corners on the previous frame
  std::size_t corners = 0;
  double matched_fraction = 0.0;
  double median_error = 0.0;
  std::vector<TrackedFeature> features;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lo + hi) / 2.0;
}

inline FlowResult optical_flow(const GrayImage& cur, const GrayImage& prev, const DetectorConfig& cfg) {
  FlowResult out;
  const auto corners = shi_tomasi(prev, cfg.corners);
  out.corners = corners.size();
  if (corners.size() < cfg.flow_min_corners) {
    out.abstained = true;
    return out;
  }
  out.features = track_features(prev, cur, corners, cfg.lk);
  std::vector<double> errs;
  for (const auto& f : out.features)
    if (f.ok) errs.push_back(f.residual);
  out.matched_fraction = static_cast<double>(errs.size()) / static_cast<double>(corners.size());
  out.median_error = median(std::move(errs));
  return out;
}

inline bool flow_alert(const FlowResult& r, const DetectorConfig& cfg) {
  if (r.abstained) return false;
  return r.matched_fraction < cfg.flow_min_match_fraction || r.median_error > cfg.flow_error_threshold;
}

inline bool optical_flow_check(const RgbImage& cur, const RgbImage& prev, const DetectorConfig& cfg) {
  return flow_alert(optical_flow(to_gray(cur), to_gray(prev), cfg), cfg);
}

// --- combined --------------------------------------------------------------

struct DetectorScores {
  double mse = 0.0;
  double histogram = 0.0;
  double flow_matched_fraction = 1.0;
  double flow_median_error = 0.0;
  bool flow_abstained = false;
};

struct DetectorVerdict {
  std::size_t frame_index = 0;
  std::uint64_t block_id = 0;
  bool constant_meta = false;
  bool frame_id = false;
  bool timestamp = false;
  bool timestamp_rate = false;
  bool mse = false;
  bool histogram = false;
  bool optical_flow = false;
  bool combined = false;
  DetectorScores scores;

  void combine() noexcept {
    combined = constant_meta || frame_id || timestamp || timestamp_rate || mse || histogram || optical_flow;
  }
};

// A reassembled frame as seen by the receiver.
struct ObservedFrame {
  LeaderPacket leader;
  PixelBuffer buffer;
  std::uint64_t arrival_ns = 0;
};

// Stateful per-stream evaluator; each verdict depends only on (previous, current).
class DetectorBank {
 public:
  explicit DetectorBank(DetectorConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const DetectorConfig& config() const noexcept { return cfg_; }

  DetectorVerdict observe(const ObservedFrame& f) {
    DetectorVerdict v;
    v.frame_index = index_++;
    v.block_id = f.leader.block_id;
    RgbImage rgb = demosaic(f.buffer);
    GrayImage gray = to_gray(rgb);
    if (prev_) {
      v.constant_meta = constant_meta_check(f.leader, cfg_);
      v.frame_id = frame_id_check(f.leader, &prev_->leader, cfg_);
      v.timestamp = timestamp_check(f.leader, &prev_->leader, cfg_);
      v.timestamp_rate = timestamp_rate_check(
          f.leader, &prev_->leader,
          static_cast<std::int64_t>(f.arrival_ns) - static_cast<std::int64_t>(prev_->arrival_ns), cfg_);
      v.scores.mse = frame_mse(f.buffer, prev_->buffer);
      v.mse = v.scores.mse < cfg_.mse_threshold;
      v.scores.histogram = bhattacharyya_distance(hs_histogram(prev_rgb_->rgb, cfg_.hue_bins, cfg_.sat_bins),
                                                  hs_histogram(rgb, cfg_.hue_bins, cfg_.sat_bins));
      v.histogram = v.scores.histogram > cfg_.hist_threshold;
      const FlowResult flow = optical_flow(gray, prev_rgb_->gray, cfg_);
      v.scores.flow_abstained = flow.abstained;
      v.scores.flow_matched_fraction = flow.matched_fraction;
      v.scores.flow_median_error = flow.median_error;
      v.optical_flow = flow_alert(flow, cfg_);
      v.combine();
    }
    prev_ = f;
    prev_rgb_ = Cached{std::move(rgb), std::move(gray)};
    return v;
  }

 private:
  struct Cached {
    RgbImage rgb;
    GrayImage gray;
  };

  DetectorConfig cfg_;
  std::size_t index_ = 0;
  std::optional<ObservedFrame> prev_;
  std::optional<Cached> prev_rgb_;
};

// Applies all seven detectors to each frame in order; the first frame yields all-false.
inline std::vector<DetectorVerdict> run_detectors(const std::vector<ObservedFrame>& frames, const DetectorConfig& cfg) {
  DetectorBank bank(cfg);
  std::vector<DetectorVerdict> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(bank.observe(f));
  return out;
}

inline std::string verdict_csv(const std::vector<DetectorVerdict>& verdicts, const std::string& header_comment = {}) {
  std::ostringstream os;
  if (!header_comment.empty()) os << "# " << header_comment << "\n";
  os << "frame_index,block_id,constant_meta,frame_id,timestamp,timestamp_rate,mse,histogram,optical_flow,combined\n";
  for (const auto& v : verdicts)
    os << v.frame_index << ',' << v.block_id << ',' << v.constant_meta << ',' << v.frame_id << ',' << v.timestamp
       << ',' << v.timestamp_rate << ',' << v.mse << ',' << v.histogram << ',' << v.optical_flow << ',' << v.combined
       << '\n';
  return os.str();
}

}  // namespace camspoof
