// SPDX-License-Identifier: Apache-2.0
#include "stressdet/prosody.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace stressdet {

using nlohmann::json;

FrameGrid word_frame_grid(double start_s, double end_s) {
  FrameGrid grid;
  grid.start_s = start_s;
  const double duration = end_s - start_s;
  grid.frame_count = static_cast<int>(std::floor(duration / grid.hop_s + 1e-9));
  return grid;
}

namespace {

// Window samples centered on t, zero-padded beyond the signal edges.
std::vector<double> window_at(const AudioSignal& audio, double center_s,
                              double window_s) {
  const int n = static_cast<int>(std::lround(window_s * audio.sample_rate));
  const int center = static_cast<int>(std::lround(center_s * audio.sample_rate));
  const int first = center - n / 2;
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  const int size = static_cast<int>(audio.samples.size());
  for (int i = 0; i < n; ++i) {
    const int idx = first + i;
    if (idx >= 0 && idx < size) w[static_cast<std::size_t>(i)] = audio.samples[static_cast<std::size_t>(idx)];
  }
  return w;
}

double window_rms(const std::vector<double>& w) {
  double acc = 0.0;
  for (double v : w) acc += v * v;
  return std::sqrt(acc / static_cast<double>(w.size()));
}

// Normalized cross-correlation of the window with itself at integer lag.
double normalized_autocorr(const std::vector<double>& w, int lag) {
  const int n = static_cast<int>(w.size());
  const int m = n - lag;
  if (m <= 1) return 0.0;
  double num = 0.0, e0 = 0.0, e1 = 0.0;
  for (int i = 0; i < m; ++i) {
    const double a = w[static_cast<std::size_t>(i)];
    const double b = w[static_cast<std::size_t>(i + lag)];
    num += a * b;
    e0 += a * a;
    e1 += b * b;
  }
  const double denom = std::sqrt(e0 * e1);
  if (denom <= 0.0) return 0.0;
  return num / denom;
}

// Same at a fractional lag, shifting by linear interpolation.
double normalized_autocorr_frac(const std::vector<double>& w, double lag) {
  const int n = static_cast<int>(w.size());
  const int lo = static_cast<int>(std::floor(lag));
  const double frac = lag - lo;
  const int m = n - lo - 2;
  if (m <= 1) return 0.0;
  double num = 0.0, e0 = 0.0, e1 = 0.0;
  for (int i = 0; i < m; ++i) {
    const double a = w[static_cast<std::size_t>(i)];
    const double b = (1.0 - frac) * w[static_cast<std::size_t>(i + lo)] +
                     frac * w[static_cast<std::size_t>(i + lo + 1)];
    num += a * b;
    e0 += a * a;
    e1 += b * b;
  }
  const double denom = std::sqrt(e0 * e1);
  if (denom <= 0.0) return 0.0;
  return num / denom;
}

struct FramePitch {
  double f0_hz = 0.0;
  bool voiced = false;
};

FramePitch analyze_pitch_frame(const AudioSignal& audio, double center_s,
                               const FrameGrid& grid, const PitchConfig& cfg) {
  std::vector<double> w = window_at(audio, center_s, grid.window_s);
  const double rms = window_rms(w);
  if (rms < cfg.silence_rms_floor) return {};

  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  for (double& v : w) v -= mean;

  const int min_lag = static_cast<int>(std::floor(audio.sample_rate / cfg.max_f0_hz));
  const int max_lag = static_cast<int>(std::floor(audio.sample_rate / cfg.min_f0_hz));
  std::vector<double> r(static_cast<std::size_t>(max_lag + 2), 0.0);
  for (int lag = min_lag - 1; lag <= max_lag + 1; ++lag) {
    if (lag < 1) continue;
    r[static_cast<std::size_t>(lag)] = normalized_autocorr(w, lag);
  }

  // Candidates are local maxima; near-equal peaks at lag multiples are
  // disambiguated toward the smaller lag by the octave cost.
  int best_lag = -1;
  double best_score = -2.0;
  for (int lag = min_lag; lag <= max_lag; ++lag) {
    const double v = r[static_cast<std::size_t>(lag)];
    if (v < r[static_cast<std::size_t>(lag - 1)] ||
        v < r[static_cast<std::size_t>(lag + 1)]) {
      continue;
    }
    const double score =
        v - cfg.octave_cost * std::log2(static_cast<double>(lag) / min_lag);
    if (score > best_score) {
      best_score = score;
      best_lag = lag;
    }
  }
  if (best_lag < 0) return {};
  if (r[static_cast<std::size_t>(best_lag)] < cfg.voicing_threshold) return {};

  // Two-stage parabolic refinement: integer neighborhood first, then a
  // half-sample neighborhood around the stage-one vertex.
  auto parabolic = [](double ym, double y0, double yp) {
    const double denom = ym - 2.0 * y0 + yp;
    if (std::abs(denom) < 1e-15) return 0.0;
    const double d = 0.5 * (ym - yp) / denom;
    return std::clamp(d, -0.5, 0.5);
  };
  double lag = static_cast<double>(best_lag) +
               parabolic(r[static_cast<std::size_t>(best_lag - 1)],
                         r[static_cast<std::size_t>(best_lag)],
                         r[static_cast<std::size_t>(best_lag + 1)]);
  const double ym = normalized_autocorr_frac(w, lag - 0.5);
  const double y0 = normalized_autocorr_frac(w, lag);
  const double yp = normalized_autocorr_frac(w, lag + 0.5);
  lag += 0.5 * parabolic(ym, y0, yp);
  lag = std::clamp(lag, static_cast<double>(min_lag) - 1.0,
                   static_cast<double>(max_lag) + 1.0);
  return {audio.sample_rate / lag, true};
}

}  // namespace

PitchTrack compute_f0(const AudioSignal& audio, const FrameGrid& grid,
                      const PitchConfig& config, Exec exec) {
  if (audio.samples.empty() ||
      audio.duration_s() < grid.window_s) {
    throw std::invalid_argument("audio shorter than one analysis window (" +
                                std::to_string(grid.window_s) + " s)");
  }
  PitchTrack track;
  track.f0_hz.assign(static_cast<std::size_t>(grid.frame_count), 0.0);
  track.voiced.assign(static_cast<std::size_t>(grid.frame_count), 0);
  parallel_for(exec, grid.frame_count, [&](std::ptrdiff_t i) {
    const FramePitch fp =
        analyze_pitch_frame(audio, grid.center_s(static_cast<int>(i)), grid, config);
    track.f0_hz[static_cast<std::size_t>(i)] = fp.f0_hz;
    track.voiced[static_cast<std::size_t>(i)] = fp.voiced ? 1 : 0;
  });
  return track;
}

bool interpolate_unvoiced(std::vector<double>& f0_hz,
                          const std::vector<std::uint8_t>& voiced,
                          double fill_hz) {
  const int n = static_cast<int>(f0_hz.size());
  int first = -1, last = -1;
  for (int i = 0; i < n; ++i) {
    if (voiced[static_cast<std::size_t>(i)]) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) {
    std::fill(f0_hz.begin(), f0_hz.end(), fill_hz);
    return true;
  }
  for (int i = 0; i < first; ++i) f0_hz[static_cast<std::size_t>(i)] = f0_hz[static_cast<std::size_t>(first)];
  for (int i = last + 1; i < n; ++i) f0_hz[static_cast<std::size_t>(i)] = f0_hz[static_cast<std::size_t>(last)];
  int prev = first;
  for (int i = first + 1; i <= last; ++i) {
    if (!voiced[static_cast<std::size_t>(i)]) continue;
    if (i > prev + 1) {
      const double lo = f0_hz[static_cast<std::size_t>(prev)];
      const double hi = f0_hz[static_cast<std::size_t>(i)];
      for (int j = prev + 1; j < i; ++j) {
        const double t = static_cast<double>(j - prev) / (i - prev);
        f0_hz[static_cast<std::size_t>(j)] = lo + t * (hi - lo);
      }
    }
    prev = i;
  }
  return false;
}

std::vector<double> compute_intensity(const AudioSignal& audio,
                                      const FrameGrid& grid, Exec exec) {
  std::vector<double> out(static_cast<std::size_t>(grid.frame_count), 0.0);
  parallel_for(exec, grid.frame_count, [&](std::ptrdiff_t i) {
    const std::vector<double> w =
        window_at(audio, grid.center_s(static_cast<int>(i)), grid.window_s);
    const double db = 20.0 * std::log10(window_rms(w) + 1e-10) + 100.0;
    out[static_cast<std::size_t>(i)] = std::max(db, 0.0);
  });
  return out;
}

std::vector<double> scaled_f0(const ProsodicFeatures& f) {
  std::vector<double> out(f.f0_hz.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.f0_hz[i] / kF0Scale;
  return out;
}

std::vector<double> scaled_intensity(const ProsodicFeatures& f) {
  std::vector<double> out(f.intensity_db.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.intensity_db[i] / kIntensityScale;
  return out;
}

std::vector<double> scaled_durations(const ProsodicFeatures& f) {
  std::vector<double> out(f.subphoneme_durations_s.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.subphoneme_durations_s[i] / kDurationScale;
  return out;
}

ProsodicFeatures extract_features(const AudioSignal& audio,
                                  const WordAlignment& alignment,
                                  const PitchConfig& config, Exec exec) {
  validate_alignment(alignment);
  const double start = alignment.start_s();
  const double end = alignment.end_s();
  if (start < -1e-9 || end > audio.duration_s() + 1e-9) {
    throw std::invalid_argument("word '" + alignment.word +
                                "' alignment [" + std::to_string(start) + ", " +
                                std::to_string(end) + "] s lies outside the " +
                                std::to_string(audio.duration_s()) + " s audio");
  }
  const FrameGrid grid = word_frame_grid(start, end);
  if (grid.frame_count < 1) {
    throw std::invalid_argument("word '" + alignment.word +
                                "' span shorter than one frame");
  }

  ProsodicFeatures out;
  out.uid = alignment.uid;
  PitchTrack pitch = compute_f0(audio, grid, config, exec);
  out.voiced = pitch.voiced;
  out.f0_hz = std::move(pitch.f0_hz);
  out.f0_fallback =
      interpolate_unvoiced(out.f0_hz, out.voiced, config.unvoiced_fill_hz);
  out.intensity_db = compute_intensity(audio, grid, exec);

  const std::vector<SubPhoneme> subs = split_subphonemes(alignment);
  out.subphoneme_durations_s.reserve(subs.size());
  for (const auto& sp : subs) out.subphoneme_durations_s.push_back(sp.duration_s());

  out.frame_to_subphoneme.resize(static_cast<std::size_t>(grid.frame_count));
  int cursor = 0;
  const int last = static_cast<int>(subs.size()) - 1;
  for (int i = 0; i < grid.frame_count; ++i) {
    const double t = grid.center_s(i);
    while (cursor < last && t >= subs[static_cast<std::size_t>(cursor)].end_s) ++cursor;
    out.frame_to_subphoneme[static_cast<std::size_t>(i)] = cursor;
  }
  return out;
}

double round_sig(double value, int digits) {
  if (value == 0.0 || !std::isfinite(value)) return value == 0.0 ? 0.0 : value;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
  return std::strtod(buf, nullptr);
}

namespace {

json rounded_array(const std::vector<double>& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(round_sig(x, 6));
  return arr;
}

}  // namespace

std::string features_to_json_line(const ProsodicFeatures& f) {
  json rec;
  rec["uid"] = f.uid;
  rec["f0_hz"] = rounded_array(f.f0_hz);
  rec["intensity_db"] = rounded_array(f.intensity_db);
  json voiced = json::array();
  for (auto v : f.voiced) voiced.push_back(static_cast<int>(v));
  rec["voiced"] = std::move(voiced);
  rec["subphoneme_durations_s"] = rounded_array(f.subphoneme_durations_s);
  rec["frame_to_subphoneme"] = f.frame_to_subphoneme;
  rec["f0_fallback"] = f.f0_fallback;
  return rec.dump();
}

ProsodicFeatures features_from_json_line(const std::string& line) {
  const json rec = json::parse(line);
  ProsodicFeatures f;
  f.uid = rec.value("uid", "");
  f.f0_hz = rec.at("f0_hz").get<std::vector<double>>();
  f.intensity_db = rec.at("intensity_db").get<std::vector<double>>();
  for (const auto& v : rec.at("voiced")) f.voiced.push_back(static_cast<std::uint8_t>(v.get<int>()));
  f.subphoneme_durations_s = rec.at("subphoneme_durations_s").get<std::vector<double>>();
  f.frame_to_subphoneme = rec.at("frame_to_subphoneme").get<std::vector<int>>();
  f.f0_fallback = rec.value("f0_fallback", false);
  const std::size_t t = f.f0_hz.size();
  if (f.intensity_db.size() != t || f.voiced.size() != t ||
      f.frame_to_subphoneme.size() != t) {
    throw std::invalid_argument("feature record '" + f.uid +
                                "': track lengths disagree");
  }
  for (int idx : f.frame_to_subphoneme) {
    if (idx < 0 || idx >= static_cast<int>(f.subphoneme_durations_s.size())) {
      throw std::invalid_argument("feature record '" + f.uid +
                                  "': frame map index out of range");
    }
  }
  return f;
}

std::vector<ProsodicFeatures> read_feature_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature file '" + path + "'");
  std::vector<ProsodicFeatures> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(features_from_json_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": record " + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return out;
}

void write_feature_file(const std::vector<ProsodicFeatures>& records,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write feature file '" + path + "'");
  for (const auto& f : records) out << features_to_json_line(f) << '\n';
  if (!out) throw std::runtime_error("short write to feature file '" + path + "'");
}

}  // namespace stressdet
