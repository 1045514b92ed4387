#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace errp {

// Finite nonnegative-integer-support distribution.  pmf[k] = P(D = k).
struct DemandDistribution {
  std::vector<double> pmf;

  int max_value() const { return static_cast<int>(pmf.size()) - 1; }
  double mean() const;
  // P(D = k), zero outside the stored support.
  double prob(int k) const {
    return (k >= 0 && k < static_cast<int>(pmf.size())) ? pmf[k] : 0.0;
  }
  // Validates nonnegativity and unit mass (1e-12); throws otherwise.
  void validate() const;
  bool operator==(const DemandDistribution&) const = default;
};

// Poisson(mean) conditioned on D <= truncate_at, renormalized.
DemandDistribution truncated_poisson(double mean, int truncate_at);

// Distribution with all mass at `value`.
DemandDistribution point_mass(int value);

// Exact distribution of the sum of two independent demands.
DemandDistribution convolve(const DemandDistribution& a,
                            const DemandDistribution& b);

// First-order loss function: E[max(D - q, 0)].  q may be fractional.
double loss(const DemandDistribution& d, double q);

// Complementary loss: E[max(q - D, 0)] = loss(q) + q - E[D].
double complementary_loss(const DemandDistribution& d, double q);

enum class LossKind { loss, complementary };

// Piecewise-linear under-approximation of a (complementary) loss function,
// stored as the max-envelope of supporting lines.
struct PiecewiseLinearLoss {
  struct Cut {
    double slope = 0.0;
    double intercept = 0.0;
  };

  LossKind kind = LossKind::loss;
  std::vector<Cut> cuts;  // sorted by slope, all on the envelope
  // Intersections of consecutive cuts, strictly increasing in q.
  std::vector<std::pair<double, double>> breakpoints;  // (q, value)
  // sup over q of (exact - envelope); the approximation is one-sided.
  double max_gap = 0.0;
  // Set when the requested segment count exceeded the support size.
  bool clamped = false;

  int segment_count() const { return static_cast<int>(cuts.size()); }
  double value(double q) const;
};

// Supporting-line construction: one tangent at the conditional mean of each
// of `segments` equal-probability buckets of D.  When a tangent point lands
// on an atom of the distribution both one-sided subgradients are kept, so a
// point mass comes out exact with any segment count.
PiecewiseLinearLoss piecewise_linearize(const DemandDistribution& d,
                                        int segments, LossKind kind);

}  // namespace errp
