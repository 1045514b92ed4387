#include "errp/demand.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace errp {

double DemandDistribution::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) m += static_cast<double>(k) * pmf[k];
  return m;
}

void DemandDistribution::validate() const {
  if (pmf.empty()) throw std::runtime_error("demand distribution: empty pmf");
  double sum = 0.0;
  for (double p : pmf) {
    if (p < 0.0) throw std::runtime_error("demand distribution: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::runtime_error("demand distribution: pmf sums to " + std::to_string(sum) +
                             ", expected 1");
}

DemandDistribution truncated_poisson(double mean, int truncate_at) {
  if (mean < 0.0) throw std::runtime_error("truncated_poisson: negative mean");
  if (truncate_at < 0) throw std::runtime_error("truncated_poisson: negative truncation point");
  DemandDistribution d;
  d.pmf.resize(truncate_at + 1);
  // Unnormalized terms mean^k / k!; the common e^-mean factor cancels.
  double term = 1.0, sum = 0.0;
  for (int k = 0; k <= truncate_at; ++k) {
    if (k > 0) term *= mean / k;
    d.pmf[k] = term;
    sum += term;
  }
  for (double& p : d.pmf) p /= sum;
  return d;
}

DemandDistribution point_mass(int value) {
  if (value < 0) throw std::runtime_error("point_mass: negative value");
  DemandDistribution d;
  d.pmf.assign(value + 1, 0.0);
  d.pmf[value] = 1.0;
  return d;
}

DemandDistribution convolve(const DemandDistribution& a,
                            const DemandDistribution& b) {
  a.validate();
  b.validate();
  DemandDistribution c;
  c.pmf.assign(a.pmf.size() + b.pmf.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.pmf.size(); ++i) {
    if (a.pmf[i] == 0.0) continue;
    for (std::size_t j = 0; j < b.pmf.size(); ++j)
      c.pmf[i + j] += a.pmf[i] * b.pmf[j];
  }
  return c;
}

double loss(const DemandDistribution& d, double q) {
  double v = 0.0;
  for (std::size_t k = 0; k < d.pmf.size(); ++k)
    if (static_cast<double>(k) > q) v += d.pmf[k] * (static_cast<double>(k) - q);
  return v;
}

double complementary_loss(const DemandDistribution& d, double q) {
  double v = 0.0;
  for (std::size_t k = 0; k < d.pmf.size(); ++k)
    if (q > static_cast<double>(k)) v += d.pmf[k] * (q - static_cast<double>(k));
  return v;
}

double PiecewiseLinearLoss::value(double q) const {
  double v = -std::numeric_limits<double>::infinity();
  for (const Cut& c : cuts) v = std::max(v, c.intercept + c.slope * q);
  return v;
}

namespace {

// Exact (complementary) loss value together with the one-sided subgradients
// at q; for the loss function these are -P(D >= q) and -P(D > q).
struct PointInfo {
  double value, slope_left, slope_right;
};

PointInfo loss_info(const DemandDistribution& d, double q, LossKind kind) {
  double ge = 0.0, gt = 0.0, le = 0.0, lt = 0.0;
  for (std::size_t u = 0; u < d.pmf.size(); ++u) {
    const double k = static_cast<double>(u);
    if (k > q) gt += d.pmf[u];
    if (k >= q - 1e-12) ge += d.pmf[u];
    if (k < q) lt += d.pmf[u];
    if (k <= q + 1e-12) le += d.pmf[u];
  }
  if (kind == LossKind::loss) return {loss(d, q), -ge, -gt};
  return {complementary_loss(d, q), lt, le};
}

}  // namespace

PiecewiseLinearLoss piecewise_linearize(const DemandDistribution& d,
                                        int segments, LossKind kind) {
  d.validate();
  if (segments < 1) throw std::runtime_error("piecewise_linearize: segments must be >= 1");

  int support = 0;
  for (double p : d.pmf)
    if (p > 0.0) ++support;

  PiecewiseLinearLoss out;
  out.kind = kind;
  if (segments > support) {
    std::fprintf(stderr,
                 "piecewise_linearize: %d segments requested but the distribution has "
                 "only %d support points; clamping\n",
                 segments, support);
    segments = support;
    out.clamped = true;
  }

  // Conditional means of `segments` equal-probability buckets, splitting
  // atoms fractionally across bucket boundaries.
  std::vector<double> tangent_points;
  {
    const double bucket = 1.0 / segments;
    double cum = 0.0;
    std::size_t atom = 0;
    double remaining_mass = d.pmf.empty() ? 0.0 : d.pmf[0];
    for (int j = 0; j < segments; ++j) {
      const double hi = (j + 1 == segments) ? 1.0 : (j + 1) * bucket;
      double mass = 0.0, weighted = 0.0;
      while (cum < hi - 1e-15 && atom < d.pmf.size()) {
        const double take = std::min(remaining_mass, hi - cum);
        mass += take;
        weighted += take * static_cast<double>(atom);
        cum += take;
        remaining_mass -= take;
        if (remaining_mass <= 1e-15) {
          ++atom;
          while (atom < d.pmf.size() && d.pmf[atom] == 0.0) ++atom;
          remaining_mass = atom < d.pmf.size() ? d.pmf[atom] : 0.0;
        }
      }
      if (mass > 0.0) tangent_points.push_back(weighted / mass);
    }
  }

  // Supporting lines.  On an atom of the distribution the function has a
  // kink; keep both one-sided subgradients there (this is what makes point
  // masses exact).
  std::vector<PiecewiseLinearLoss::Cut> lines;
  for (double q0 : tangent_points) {
    const double nearest = std::round(q0);
    const bool on_atom = std::abs(q0 - nearest) < 1e-9 && nearest >= 0.0 &&
                         nearest < static_cast<double>(d.pmf.size()) &&
                         d.pmf[static_cast<std::size_t>(nearest)] > 0.0;
    const PointInfo info = loss_info(d, on_atom ? nearest : q0, kind);
    const double at = on_atom ? nearest : q0;
    lines.push_back({info.slope_right, info.value - info.slope_right * at});
    if (on_atom && std::abs(info.slope_left - info.slope_right) > 1e-12)
      lines.push_back({info.slope_left, info.value - info.slope_left * at});
  }

  // Sort by slope, drop duplicates and lines strictly below the envelope.
  std::sort(lines.begin(), lines.end(),
            [](const auto& a, const auto& b) { return a.slope < b.slope; });
  std::vector<PiecewiseLinearLoss::Cut> envelope;
  auto intersect_x = [](const PiecewiseLinearLoss::Cut& a,
                        const PiecewiseLinearLoss::Cut& b) {
    return (b.intercept - a.intercept) / (a.slope - b.slope);
  };
  for (const auto& ln : lines) {
    if (!envelope.empty() && std::abs(ln.slope - envelope.back().slope) < 1e-12) {
      if (ln.intercept > envelope.back().intercept) envelope.back() = ln;
      continue;
    }
    while (envelope.size() >= 2 &&
           intersect_x(envelope[envelope.size() - 2], ln) <=
               intersect_x(envelope[envelope.size() - 2], envelope.back()))
      envelope.pop_back();
    envelope.push_back(ln);
  }
  out.cuts = envelope;

  for (std::size_t i = 0; i + 1 < out.cuts.size(); ++i) {
    const double x = intersect_x(out.cuts[i], out.cuts[i + 1]);
    out.breakpoints.emplace_back(x, out.cuts[i].intercept + out.cuts[i].slope * x);
  }

  // Largest one-sided error over the inventory-relevant range [0, max
  // support], measured against the envelope floored at zero (the bound as it
  // acts in the optimization model, where the shortage variables are
  // nonnegative anyway).  The difference is piecewise linear, so checking
  // every kink of either side is exact.
  {
    std::vector<double> candidates = {0.0, static_cast<double>(d.max_value())};
    for (std::size_t k = 0; k < d.pmf.size(); ++k)
      if (d.pmf[k] > 0.0) candidates.push_back(static_cast<double>(k));
    for (const auto& bp : out.breakpoints) candidates.push_back(bp.first);
    for (const auto& c : out.cuts)
      if (c.slope != 0.0) candidates.push_back(-c.intercept / c.slope);
    double gap = 0.0;
    for (double q : candidates) {
      if (q < 0.0 || q > static_cast<double>(d.max_value())) continue;
      const double exact = kind == LossKind::loss ? loss(d, q) : complementary_loss(d, q);
      gap = std::max(gap, exact - std::max(out.value(q), 0.0));
    }
    out.max_gap = gap;
  }
  return out;
}

}  // namespace errp
