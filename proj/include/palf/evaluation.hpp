#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "palf/assignment.hpp"
#include "palf/geometry.hpp"
#include "palf/session.hpp"

namespace palf {

struct GtPair {
  std::size_t candidate = 0;
  std::size_t gt = 0;
  double iou3d = 0.0;

  bool operator==(const GtPair&) const = default;
};

struct GtMatch {
  std::vector<GtPair> pairs;
  std::vector<std::size_t> unmatched_candidates;
  std::vector<std::size_t> unmatched_gt;

  std::size_t tp() const { return pairs.size(); }
  std::size_t fp() const { return unmatched_candidates.size(); }
  std::size_t fn() const { return unmatched_gt.size(); }
};

inline constexpr double kDefaultMinIou3d = 0.25;

/// One-to-one matching maximizing total 3D IoU; pairs under `min_iou3d`
/// count as a false positive plus a false negative.
inline GtMatch match_to_ground_truth(std::span<const Box3D> candidates,
                                     std::span<const Box3D> gt,
                                     double min_iou3d = kDefaultMinIou3d) {
  CostMatrix<double> costs(candidates.size(), gt.size());
  CostMatrix<double> ious(candidates.size(), gt.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j) {
      ious(i, j) = iou3d(candidates[i], gt[j]);
      costs(i, j) = 1.0 - ious(i, j);
    }
  const Matching m = solve_assignment(costs);

  GtMatch out;
  std::vector<char> gt_used(gt.size(), 0);
  std::vector<char> cand_used(candidates.size(), 0);
  for (const auto& [i, j] : m.pairs) {
    if (ious(i, j) >= min_iou3d && ious(i, j) > 0.0) {
      out.pairs.push_back({i, j, ious(i, j)});
      cand_used[i] = gt_used[j] = 1;
    }
  }
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (!cand_used[i]) out.unmatched_candidates.push_back(i);
  for (std::size_t j = 0; j < gt.size(); ++j)
    if (!gt_used[j]) out.unmatched_gt.push_back(j);
  return out;
}

struct FrameMetrics {
  std::string frame_id;
  std::size_t tp = 0, fp = 0, fn = 0;
  std::optional<double> mean_iou3d;
  std::optional<double> time_s;
};

/// Annotation quality against ground truth plus annotator timing.
struct MetricsReport {
  std::optional<double> mean_iou3d;  // over true positives; absent if none
  double precision = 1.0;
  double recall = 1.0;
  double miss_rate = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t num_objects = 0;  // candidate boxes
  std::optional<double> total_time_s;
  std::optional<double> time_per_object_s;
  std::vector<FrameMetrics> per_frame;
};

/// Seconds between the first and last event, or nullopt with fewer than one
/// event.
inline std::optional<double> session_span_s(const AnnotationSession& s) {
  if (s.timing_events.empty()) return std::nullopt;
  auto [lo, hi] = std::minmax_element(
      s.timing_events.begin(), s.timing_events.end(),
      [](const TimingEvent& a, const TimingEvent& b) { return a.timestamp < b.timestamp; });
  return hi->timestamp - lo->timestamp;
}

namespace detail {

inline void finish_metrics(MetricsReport& r, double iou_sum) {
  const std::size_t tp = r.true_positives;
  const std::size_t cand = tp + r.false_positives;
  const std::size_t gt = tp + r.false_negatives;
  r.num_objects = cand;
  r.mean_iou3d = tp > 0 ? std::optional<double>(iou_sum / static_cast<double>(tp))
                        : std::nullopt;
  // Empty denominators count as vacuously perfect on both sides, so that
  // swapping candidates and ground truth swaps precision and recall.
  r.precision = cand == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(cand);
  r.recall = gt == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(gt);
  r.miss_rate = 1.0 - r.recall;
  if (r.total_time_s && r.num_objects > 0)
    r.time_per_object_s = *r.total_time_s / static_cast<double>(r.num_objects);
  else
    r.time_per_object_s = std::nullopt;
}

}  // namespace detail

inline MetricsReport compute_metrics(const GtMatch& match,
                                     const AnnotationSession* timing = nullptr) {
  MetricsReport r;
  r.true_positives = match.tp();
  r.false_positives = match.fp();
  r.false_negatives = match.fn();
  double iou_sum = 0.0;
  for (const auto& p : match.pairs) iou_sum += p.iou3d;
  if (timing) r.total_time_s = session_span_s(*timing);
  detail::finish_metrics(r, iou_sum);
  return r;
}

struct FrameEvaluation {
  std::string frame_id;
  GtMatch match;
  std::optional<AnnotationSession> session;
};

/// Pools counts over frames; IoU is averaged over every true positive and
/// time is the sum of per-frame session spans.
inline MetricsReport aggregate_metrics(std::span<const FrameEvaluation> frames) {
  MetricsReport r;
  double iou_sum = 0.0;
  for (const auto& f : frames) {
    FrameMetrics fm;
    fm.frame_id = f.frame_id;
    fm.tp = f.match.tp();
    fm.fp = f.match.fp();
    fm.fn = f.match.fn();
    double frame_sum = 0.0;
    for (const auto& p : f.match.pairs) frame_sum += p.iou3d;
    if (fm.tp > 0) fm.mean_iou3d = frame_sum / static_cast<double>(fm.tp);
    if (f.session) fm.time_s = session_span_s(*f.session);
    if (fm.time_s) r.total_time_s = r.total_time_s.value_or(0.0) + *fm.time_s;
    r.true_positives += fm.tp;
    r.false_positives += fm.fp;
    r.false_negatives += fm.fn;
    iou_sum += frame_sum;
    r.per_frame.push_back(std::move(fm));
  }
  detail::finish_metrics(r, iou_sum);
  return r;
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json frames = json::array();
  for (const auto& f : r.per_frame)
    frames.push_back({{"frame_id", f.frame_id},
                      {"tp", f.tp},
                      {"fp", f.fp},
                      {"fn", f.fn},
                      {"mean_iou3d", opt(f.mean_iou3d)},
                      {"time_s", opt(f.time_s)}});
  return json{{"palf_metrics", 1},
              {"mean_iou3d", opt(r.mean_iou3d)},
              {"precision", r.precision},
              {"recall", r.recall},
              {"miss_rate", r.miss_rate},
              {"true_positives", r.true_positives},
              {"false_positives", r.false_positives},
              {"false_negatives", r.false_negatives},
              {"num_objects", r.num_objects},
              {"total_time_s", opt(r.total_time_s)},
              {"time_per_object_s", opt(r.time_per_object_s)},
              {"per_frame", frames}};
}

/// Plain-text table with the columns of the annotation-quality report.
inline std::string metrics_table(const MetricsReport& r, const std::string& method = "PALF") {
  auto cell = [](const std::optional<double>& v, double scale, int prec) {
    if (!v) return std::string("-");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, *v * scale);
    return std::string(buf);
  };
  const std::vector<std::string> head = {"Method",     "Time (s)",          "3D IoU (%)",
                                         "Precision (%)", "Recall (%)",     "Miss Rate (%)",
                                         "Number of objects", "Time per object (s)"};
  const std::vector<std::string> row = {method,
                                        cell(r.total_time_s, 1.0, 1),
                                        cell(r.mean_iou3d, 100.0, 1),
                                        cell(r.precision, 100.0, 1),
                                        cell(r.recall, 100.0, 1),
                                        cell(r.miss_rate, 100.0, 1),
                                        std::to_string(r.num_objects),
                                        cell(r.time_per_object_s, 1.0, 1)};
  std::ostringstream out;
  for (const auto* line : {&head, &row}) {
    for (std::size_t i = 0; i < line->size(); ++i) {
      const std::size_t w = std::max(head[i].size(), row[i].size());
      std::string c = (*line)[i];
      if (i == 0)
        c += std::string(w - c.size(), ' ');
      else
        c = std::string(w - c.size(), ' ') + c;
      out << c << (i + 1 < line->size() ? " | " : "\n");
    }
  }
  return out.str();
}

}  // namespace palf
