#pragma once

// Focal-plane customization: depth histogram, multi-threshold Otsu search,
// depth segmentation and resolution of a user mask to one depth class.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vabokeh/errors.hpp"
#include "vabokeh/grid.hpp"

namespace vabokeh {

inline constexpr int kDefaultHistogramBins = 256;
inline constexpr int kDefaultClassCount = 3;

struct DepthHistogram {
  int bins = 0;
  std::vector<std::uint64_t> counts;
  std::vector<double> probability;  // P(i)
  double global_mean = 0.0;         // mu_T, in bin-index units

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
  int occupied_bins() const {
    return static_cast<int>(std::count_if(counts.begin(), counts.end(),
                                          [](std::uint64_t c) { return c > 0; }));
  }
};

// Bin of a normalized depth value: round(v * (bins - 1)).
inline int depth_bin(double v, int bins) {
  const int b = static_cast<int>(std::floor(std::clamp(v, 0.0, 1.0) * (bins - 1) + 0.5));
  return std::clamp(b, 0, bins - 1);
}

// Builds P(i) from raw counts; shared by build_histogram and callers that
// already hold tallies.
inline DepthHistogram histogram_from_counts(std::vector<std::uint64_t> counts) {
  if (counts.size() < 2) throw ArgumentError("histogram needs at least 2 bins");
  DepthHistogram h;
  h.bins = static_cast<int>(counts.size());
  h.counts = std::move(counts);
  const std::uint64_t total = h.total();
  if (total == 0) throw ArgumentError("histogram has no mass");
  h.probability.resize(h.counts.size());
  const double inv = 1.0 / static_cast<double>(total);
  for (int i = 0; i < h.bins; ++i) {
    h.probability[i] = static_cast<double>(h.counts[i]) * inv;
    h.global_mean += i * h.probability[i];
  }
  return h;
}

inline DepthHistogram build_histogram(const DepthMap& depth, int bins = kDefaultHistogramBins) {
  if (bins < 2) throw ArgumentError("bins must be >= 2, got " + std::to_string(bins));
  if (depth.empty()) throw ArgumentError("depth map is empty");
  std::vector<std::uint64_t> counts(bins, 0);
  for (double v : depth.data()) ++counts[depth_bin(v, bins)];
  return histogram_from_counts(std::move(counts));
}

struct ThresholdSet {
  int classes = 0;              // K
  int bins = 0;                 // B of the source histogram
  std::vector<int> thresholds;  // t_1 < ... < t_{K-1}, each in [0, B-2]
  double score = 0.0;           // between-class variance at the optimum
};

namespace detail {

// Scores within this relative distance are treated as equal so the
// lexicographic tie-break is stable under rounding.
inline constexpr double kScoreTieTolerance = 1e-12;

inline bool strictly_better(double candidate, double best) {
  return candidate > best + kScoreTieTolerance * std::max(1.0, std::abs(best));
}

class OtsuSearch {
 public:
  OtsuSearch(const DepthHistogram& hist, int classes)
      : bins_(hist.bins), classes_(classes), mean_total_(hist.global_mean) {
    // Prefix sums of P(i) and i*P(i) over bins [0, i).
    weight_prefix_.assign(bins_ + 1, 0.0);
    moment_prefix_.assign(bins_ + 1, 0.0);
    for (int i = 0; i < bins_; ++i) {
      weight_prefix_[i + 1] = weight_prefix_[i] + hist.probability[i];
      moment_prefix_[i + 1] = moment_prefix_[i] + i * hist.probability[i];
    }
    current_.resize(classes_ - 1);
    best_.resize(classes_ - 1);
  }

  ThresholdSet run() {
    recurse(0, 0, 0.0);
    return {classes_, bins_, best_, best_score_};
  }

 private:
  // Contribution of the class covering bins [lo, hi].
  double class_term(int lo, int hi) const {
    const double w = weight_prefix_[hi + 1] - weight_prefix_[lo];
    if (w <= 0.0) return 0.0;
    const double mu = (moment_prefix_[hi + 1] - moment_prefix_[lo]) / w;
    return w * (mu - mean_total_) * (mu - mean_total_);
  }

  // Thresholds are enumerated in lexicographic order, so keeping only strict
  // improvements yields the smallest optimal tuple.
  void recurse(int depth, int first_bin, double partial) {
    const int remaining = classes_ - 1 - depth;
    if (remaining == 0) {
      const double score = partial + class_term(first_bin, bins_ - 1);
      if (!found_ || strictly_better(score, best_score_)) {
        found_ = true;
        best_score_ = score;
        best_ = current_;
      }
      return;
    }
    // Leave room for the remaining thresholds: t <= B - 1 - remaining.
    for (int t = first_bin; t <= bins_ - 1 - remaining; ++t) {
      current_[depth] = t;
      recurse(depth + 1, t + 1, partial + class_term(first_bin, t));
    }
  }

  int bins_;
  int classes_;
  double mean_total_;
  std::vector<double> weight_prefix_;
  std::vector<double> moment_prefix_;
  std::vector<int> current_;
  std::vector<int> best_;
  double best_score_ = 0.0;
  bool found_ = false;
};

}  // namespace detail

// Exhaustive maximization of sum_j w_j (mu_j - mu_T)^2 over all threshold
// tuples; class j covers bins (t_{j-1}, t_j] with t_0 = -1, t_K = B - 1.
// Cost is C(B-1, K-1) tuples, which is trivial for the default K = 3.
inline ThresholdSet multi_otsu(const DepthHistogram& hist, int classes = kDefaultClassCount) {
  if (classes < 2) throw ArgumentError("class count must be >= 2, got " + std::to_string(classes));
  if (hist.bins < classes) {
    throw DegenerateInputError("histogram has " + std::to_string(hist.bins) +
                               " bins, fewer than " + std::to_string(classes) + " classes");
  }
  const int occupied = hist.occupied_bins();
  if (occupied < classes) {
    throw DegenerateInputError("histogram has " + std::to_string(occupied) +
                               " nonempty bins, need at least " + std::to_string(classes));
  }
  return detail::OtsuSearch(hist, classes).run();
}

struct DepthInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

struct DepthClass {
  std::size_t pixel_count = 0;
  std::optional<DepthInterval> extent;  // empty class has no extent
};

struct DepthRegions {
  LabelMap labels;
  DepthMap depth;  // source depth, kept for focal statistics
  ThresholdSet thresholds;
  std::vector<DepthClass> classes;
};

// Class index of a bin given ordered thresholds.
inline int class_of_bin(int bin, const std::vector<int>& thresholds) {
  return static_cast<int>(std::lower_bound(thresholds.begin(), thresholds.end(), bin) -
                          thresholds.begin());
}

inline DepthRegions segment_depth(const DepthMap& depth, const ThresholdSet& ts) {
  if (ts.classes < 2 || static_cast<int>(ts.thresholds.size()) != ts.classes - 1) {
    throw ArgumentError("threshold set is inconsistent with its class count");
  }
  for (std::size_t i = 0; i < ts.thresholds.size(); ++i) {
    if (ts.thresholds[i] < 0 || ts.thresholds[i] > ts.bins - 2 ||
        (i > 0 && ts.thresholds[i] <= ts.thresholds[i - 1])) {
      throw ArgumentError("thresholds must be strictly increasing within [0, bins-2]");
    }
  }
  DepthRegions regions{LabelMap(depth.height(), depth.width()), depth, ts,
                       std::vector<DepthClass>(ts.classes)};
  for (std::size_t p = 0; p < depth.size(); ++p) {
    const double v = depth.values()[p];
    const int label = class_of_bin(depth_bin(v, ts.bins), ts.thresholds);
    regions.labels.values()[p] = label;
    DepthClass& cls = regions.classes[label];
    ++cls.pixel_count;
    if (!cls.extent) {
      cls.extent = DepthInterval{v, v};
    } else {
      cls.extent->lo = std::min(cls.extent->lo, v);
      cls.extent->hi = std::max(cls.extent->hi, v);
    }
  }
  return regions;
}

struct FocalPlane {
  BinaryMask region_mask;
  int selected_class = 0;
  double focus_depth = 0.0;  // d_f, median normalized depth of the region
  DepthInterval dof;         // [d_near, d_far]
  ThresholdSet thresholds;
};

inline double median_of(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// Majority overlap with the mask picks the class; equal overlaps go to the
// nearer (lower-index) class.
inline FocalPlane select_focal_region(const DepthRegions& regions, const BinaryMask& user_mask) {
  require_same_extent(regions.labels, user_mask, "select_focal_region");
  std::vector<std::size_t> overlap(regions.classes.size(), 0);
  std::size_t marked = 0;
  for (std::size_t p = 0; p < user_mask.size(); ++p) {
    if (!user_mask.values()[p]) continue;
    ++marked;
    ++overlap[regions.labels.values()[p]];
  }
  if (marked == 0) throw ArgumentError("focal-plane mask is empty");

  int chosen = 0;
  for (int k = 1; k < static_cast<int>(overlap.size()); ++k) {
    if (overlap[k] > overlap[chosen]) chosen = k;
  }

  FocalPlane fp;
  fp.region_mask = BinaryMask(user_mask.height(), user_mask.width());
  fp.selected_class = chosen;
  fp.thresholds = regions.thresholds;
  std::vector<double> member_depths;
  member_depths.reserve(regions.classes[chosen].pixel_count);
  for (std::size_t p = 0; p < regions.labels.size(); ++p) {
    if (regions.labels.values()[p] == chosen) {
      fp.region_mask.values()[p] = 1;
      member_depths.push_back(regions.depth.values()[p]);
    }
  }
  fp.focus_depth = median_of(member_depths);
  fp.dof = *regions.classes[chosen].extent;
  return fp;
}

// Histogram -> thresholds -> regions -> focal plane in one call.
inline FocalPlane resolve_focal_plane(const DepthMap& depth, const BinaryMask& mask,
                                      int classes = kDefaultClassCount,
                                      int bins = kDefaultHistogramBins) {
  require_same_extent(depth, mask, "resolve_focal_plane");
  if (count_set(mask) == 0) throw ArgumentError("focal-plane mask is empty");
  const DepthHistogram hist = build_histogram(depth, bins);
  const ThresholdSet ts = multi_otsu(hist, classes);
  return select_focal_region(segment_depth(depth, ts), mask);
}

}  // namespace vabokeh
