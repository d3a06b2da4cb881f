// Copyright 2026 The refseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef REFSEG_EVALUATION_HPP_
#define REFSEG_EVALUATION_HPP_

#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "refseg/masks.hpp"
#include "refseg/numerics.hpp"

namespace refseg {

struct SampleResult {
  std::uint64_t intersection = 0;
  std::uint64_t uni = 0;
  double iou = 0.0;

  static SampleResult from_counts(std::uint64_t intersection, std::uint64_t uni) {
    require(intersection <= uni, "SampleResult: intersection exceeds union");
    return {intersection, uni, uni == 0 ? 0.0 : static_cast<double>(intersection) / static_cast<double>(uni)};
  }
};

// A missing prediction scores zero with the ground-truth area as union.
inline SampleResult score_prediction(const std::optional<BinaryMask>& predicted, const BinaryMask& truth) {
  if (!predicted) return SampleResult::from_counts(0, truth.area());
  const std::uint64_t inter = intersection_area(*predicted, truth);
  return SampleResult::from_counts(inter, predicted->area() + truth.area() - inter);
}

inline double overall_iou(const std::vector<SampleResult>& results) {
  require(!results.empty(), "overall_iou: no results");
  std::uint64_t inter = 0, uni = 0;
  for (const auto& r : results) {
    inter += r.intersection;
    uni += r.uni;
  }
  require(uni > 0, "overall_iou: all unions are zero");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double mean_iou(const std::vector<SampleResult>& results) {
  require(!results.empty(), "mean_iou: no results");
  double total = 0.0;
  for (const auto& r : results) total += r.iou;
  return total / static_cast<double>(results.size());
}

// Fraction of results with iou strictly above k.
inline double precision_at_k(const std::vector<SampleResult>& results, double k) {
  require(k > 0.0 && k < 1.0, "precision_at_k: k must lie in (0, 1)");
  if (results.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : results)
    if (r.iou > k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

// Thresholds 0.50, 0.55, ..., 0.95 built from integers so each is the
// closest double to its decimal value.
inline std::array<double, 10> map_thresholds() {
  std::array<double, 10> t{};
  for (int i = 0; i < 10; ++i) t[static_cast<std::size_t>(i)] = (50 + 5 * i) / 100.0;
  return t;
}

inline double map_50_95(const std::vector<SampleResult>& results) {
  require(!results.empty(), "map_50_95: no results");
  double total = 0.0;
  for (double k : map_thresholds()) total += precision_at_k(results, k);
  return total / 10.0;
}

struct MetricReport {
  std::size_t samples = 0;
  double overall_iou = 0.0;
  double mean_iou = 0.0;
  std::array<double, 5> precision{};  // P@0.5 .. P@0.9
  double map = 0.0;
  double accuracy = 0.0;  // fraction of frames whose chosen candidate is the referent
};

inline constexpr std::array<double, 5> kReportThresholds = {0.5, 0.6, 0.7, 0.8, 0.9};

inline MetricReport summarize(const std::vector<SampleResult>& results, double accuracy = 0.0) {
  MetricReport r;
  r.samples = results.size();
  r.accuracy = accuracy;
  if (results.empty()) return r;
  std::uint64_t uni = 0;
  for (const auto& s : results) uni += s.uni;
  r.overall_iou = uni ? overall_iou(results) : 0.0;
  r.mean_iou = mean_iou(results);
  for (std::size_t i = 0; i < kReportThresholds.size(); ++i) r.precision[i] = precision_at_k(results, kReportThresholds[i]);
  r.map = map_50_95(results);
  return r;
}

inline std::string format_fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// "key=value" lines under `prefix`, stable order.
inline std::string report_key_values(const MetricReport& r, const std::string& prefix) {
  std::string out;
  auto line = [&](const std::string& key, const std::string& value) { out += prefix + key + "=" + value + "\n"; };
  line("samples", std::to_string(r.samples));
  line("accuracy", format_fixed(r.accuracy));
  line("overall_iou", format_fixed(r.overall_iou));
  line("mean_iou", format_fixed(r.mean_iou));
  for (std::size_t i = 0; i < kReportThresholds.size(); ++i) {
    char key[16];
    std::snprintf(key, sizeof key, "p@%.1f", kReportThresholds[i]);
    line(key, format_fixed(r.precision[i]));
  }
  line("map", format_fixed(r.map));
  return out;
}

// Human-readable table: one row per group.
inline std::string report_table(const std::map<std::string, MetricReport>& groups) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %7s %8s %8s %8s %7s %7s %7s %7s %7s %7s\n", "group", "frames", "acc",
                "oIoU", "mIoU", "P@0.5", "P@0.6", "P@0.7", "P@0.8", "P@0.9", "mAP");
  out += buf;
  for (const auto& [name, r] : groups) {
    std::snprintf(buf, sizeof buf, "%-18s %7zu %8.4f %8.4f %8.4f %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f\n", name.c_str(),
                  r.samples, r.accuracy, r.overall_iou, r.mean_iou, r.precision[0], r.precision[1], r.precision[2],
                  r.precision[3], r.precision[4], r.map);
    out += buf;
  }
  return out;
}

}  // namespace refseg

#endif  // REFSEG_EVALUATION_HPP_
