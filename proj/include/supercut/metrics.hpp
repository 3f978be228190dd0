#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "supercut/core.hpp"

namespace supercut {

struct ClassQuality {
  double pq = 0.0, rq = 0.0, sq = 0.0;  // percentages
  std::size_t tp = 0, fp = 0, fn = 0;
  double iou_sum = 0.0;
  double precision = 0.0, recall = 0.0;  // percentages
  bool present = false;                  // class occurs in the ground truth
};

struct PanopticMetrics {
  std::vector<ClassQuality> per_class;
  double pq = 0.0, rq = 0.0, sq = 0.0;  // averages over present classes
  double miou = 0.0;
  std::size_t present_classes = 0;
};

namespace detail {

inline std::uint64_t segment_key(Label cls, Label obj) {
  return (static_cast<std::uint64_t>(cls) << 32) | obj;
}

struct PairHash {
  std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const {
    return std::hash<std::uint64_t>{}(p.first * 0x9e3779b97f4a7c15ULL ^ p.second);
  }
};

}  // namespace detail

/// Semantic mean IoU over classes present in the ground truth. Points with an IGNORE ground
/// truth class are skipped; IGNORE predictions count as misses.
inline double miou(std::span<const Label> pred, std::span<const Label> gt, const ClassTable& table,
                   std::vector<double>* per_class = nullptr) {
  if (pred.size() != gt.size()) throw StructuralError("miou: prediction and ground truth differ in length");
  const std::size_t c_count = table.size();
  std::vector<std::size_t> inter(c_count, 0), gt_n(c_count, 0), pred_n(c_count, 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == IGNORE) continue;
    if (gt[i] >= c_count) throw DataError("miou: ground truth class out of range");
    ++gt_n[gt[i]];
    if (pred[i] < c_count) {
      ++pred_n[pred[i]];
      if (pred[i] == gt[i]) ++inter[gt[i]];
    }
  }
  double sum = 0.0;
  std::size_t present = 0;
  if (per_class) per_class->assign(c_count, 0.0);
  for (std::size_t c = 0; c < c_count; ++c) {
    if (gt_n[c] == 0) continue;
    const double iou = 100.0 * static_cast<double>(inter[c]) /
                       static_cast<double>(gt_n[c] + pred_n[c] - inter[c]);
    if (per_class) (*per_class)[c] = iou;
    sum += iou;
    ++present;
  }
  return present ? sum / static_cast<double>(present) : 0.0;
}

/// Panoptic, recognition and segmentation quality. Segments are (class, object) point sets;
/// a prediction matches a ground-truth segment of the same class when IoU > 0.5. Points whose
/// ground-truth class or object is IGNORE are removed from both sides first.
inline PanopticMetrics panoptic_quality(const PanopticLabels& pred, const PanopticLabels& gt,
                                        const ClassTable& table) {
  const std::size_t n = gt.semantic.size();
  if (gt.object.size() != n || pred.semantic.size() != n || pred.object.size() != n)
    throw StructuralError("panoptic_quality: label arrays differ in length");
  const std::size_t c_count = table.size();

  std::unordered_map<std::uint64_t, std::size_t> gt_area, pred_area;
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, std::size_t, detail::PairHash> inter;
  for (std::size_t i = 0; i < n; ++i) {
    if (gt.semantic[i] == IGNORE || gt.object[i] == IGNORE) continue;
    if (gt.semantic[i] >= c_count) throw DataError("panoptic_quality: ground truth class out of range");
    const auto gk = detail::segment_key(gt.semantic[i], gt.object[i]);
    ++gt_area[gk];
    if (pred.semantic[i] == IGNORE || pred.object[i] == IGNORE || pred.semantic[i] >= c_count) continue;
    const auto pk = detail::segment_key(pred.semantic[i], pred.object[i]);
    ++pred_area[pk];
    if (pred.semantic[i] == gt.semantic[i]) ++inter[{gk, pk}];
  }

  PanopticMetrics m;
  m.per_class.assign(c_count, {});
  std::unordered_map<std::uint64_t, char> gt_matched, pred_matched;
  std::vector<std::pair<std::uint64_t, double>> matches;
  for (const auto& [key, count] : inter) {
    const auto [gk, pk] = key;
    const double uni = static_cast<double>(gt_area[gk] + pred_area[pk] - count);
    const double iou = static_cast<double>(count) / uni;
    if (!(iou > 0.5)) continue;
    if (gt_matched[gk] || pred_matched[pk])
      throw std::logic_error("panoptic_quality: segment matched twice above IoU 0.5");
    gt_matched[gk] = pred_matched[pk] = 1;
    matches.emplace_back(gk, iou);
  }
  // Fixed summation order keeps results independent of hash iteration order.
  std::sort(matches.begin(), matches.end());
  for (const auto& [gk, iou] : matches) {
    auto& q = m.per_class[gk >> 32];
    ++q.tp;
    q.iou_sum += iou;
  }
  for (const auto& [gk, area] : gt_area) {
    m.per_class[gk >> 32].present = true;
    if (!gt_matched[gk]) ++m.per_class[gk >> 32].fn;
  }
  for (const auto& [pk, area] : pred_area)
    if (!pred_matched[pk]) ++m.per_class[pk >> 32].fp;

  for (auto& q : m.per_class) {
    const double denom = static_cast<double>(q.tp) + 0.5 * static_cast<double>(q.fp + q.fn);
    if (denom > 0.0) {
      q.pq = 100.0 * q.iou_sum / denom;
      q.rq = 100.0 * static_cast<double>(q.tp) / denom;
    }
    q.sq = q.tp ? 100.0 * q.iou_sum / static_cast<double>(q.tp) : 0.0;
    if (q.tp + q.fp) q.precision = 100.0 * static_cast<double>(q.tp) / static_cast<double>(q.tp + q.fp);
    if (q.tp + q.fn) q.recall = 100.0 * static_cast<double>(q.tp) / static_cast<double>(q.tp + q.fn);
    if (!q.present) continue;
    m.pq += q.pq;
    m.rq += q.rq;
    m.sq += q.sq;
    ++m.present_classes;
  }
  if (m.present_classes) {
    const double k = static_cast<double>(m.present_classes);
    m.pq /= k;
    m.rq /= k;
    m.sq /= k;
  }
  m.miou = miou(pred.semantic, gt.semantic, table);
  return m;
}

inline PanopticMetrics panoptic_quality(const PanopticLabels& pred, const PointCloud& gt,
                                        const ClassTable& table) {
  gt.check_structure();
  if (!gt.labeled()) throw StructuralError("panoptic_quality: ground truth cloud has no labels");
  if (pred.size() != gt.size()) throw StructuralError("panoptic_quality: point counts differ");
  return panoptic_quality(pred, PanopticLabels{gt.semantic, gt.object}, table);
}

struct PrecisionRecall {
  Label cls;
  double precision, recall;  // percentages
};

/// Per-class precision and recall under the panoptic matching. Classes with neither
/// predictions nor ground truth are omitted.
inline std::vector<PrecisionRecall> precision_recall(const PanopticLabels& pred, const PanopticLabels& gt,
                                                     const ClassTable& table) {
  const auto m = panoptic_quality(pred, gt, table);
  std::vector<PrecisionRecall> out;
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const auto& q = m.per_class[c];
    if (q.tp + q.fp + q.fn == 0) continue;
    out.push_back({static_cast<Label>(c), q.precision, q.recall});
  }
  return out;
}

/// Negative log-probability of the true class, clamped at 1e-12.
inline double class_loss(std::span<const double> pred, Label true_class) {
  if (true_class >= pred.size()) throw ParameterError("class_loss: class id out of range");
  return -std::log(std::max(pred[true_class], 1e-12));
}

/// Bernoulli cross-entropy of predicted agreement `a` against target `target`.
inline double agreement_loss(double a, double target) {
  const double p = std::clamp(a, 1e-12, 1.0 - 1e-12);
  double loss = 0.0;
  if (target != 0.0) loss -= target * std::log(p);
  if (target != 1.0) loss -= (1.0 - target) * std::log1p(-p);
  return loss;
}

/// Mean class loss over nodes plus mean agreement loss over edges. NaN entries mark ignored
/// terms and are left out of both sums and denominators.
inline double combined_loss(std::span<const double> class_losses, std::span<const double> agreement_losses) {
  double cs = 0.0, as = 0.0;
  std::size_t cn = 0, an = 0;
  for (double v : class_losses)
    if (!std::isnan(v)) {
      cs += v;
      ++cn;
    }
  for (double v : agreement_losses)
    if (!std::isnan(v)) {
      as += v;
      ++an;
    }
  if (cn == 0 || an == 0) throw ParameterError("combined_loss: no valid node or edge terms");
  return cs / static_cast<double>(cn) + as / static_cast<double>(an);
}

}  // namespace supercut
