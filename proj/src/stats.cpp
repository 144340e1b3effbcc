#include "dynssep/stats.hpp"

#include <algorithm>
#include <cmath>

#include "dynssep/errors.hpp"

namespace dynssep {

Moments moments(const std::vector<double>& xs) {
  Moments m;
  m.n = int(xs.size());
  if (m.n < 2) throw UsageError("moments: need at least 2 samples");
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / m.n;
  double s2 = 0.0, s4 = 0.0;
  for (double x : xs) {
    const double d = x - m.mean;
    s2 += d * d;
    s4 += d * d * d * d;
  }
  m.var = s2 / (m.n - 1);
  const double m4 = s4 / m.n;
  const double v = (m4 - m.var * m.var * (m.n - 3.0) / (m.n - 1.0)) / m.n;
  m.se_var = std::sqrt(std::max(v, 0.0));
  return m;
}

LinearFit linear_fit(const std::vector<double>& xs,
                     const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw UsageError("linear fit: need >= 2 matched points");
  const int n = int(xs.size());
  double sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw UsageError("linear fit: degenerate abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double ks_distance_gaussian(std::vector<double> samples, double mean,
                            double sd) {
  if (samples.empty()) throw UsageError("ks: empty sample");
  const int n = int(samples.size());
  if (sd <= 0.0) {
    // Point mass at `mean`: the sup of |F̂ − 1{x ≥ mean}| is attained just
    // left of the atom and at it.
    double below = 0.0, above = 0.0;
    for (double x : samples) {
      if (x < mean) below += 1.0;
      if (x > mean) above += 1.0;
    }
    return std::max(below, above) / n;
  }
  std::sort(samples.begin(), samples.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = normal_cdf((samples[i] - mean) / sd);
    d = std::max(d, std::abs(double(i + 1) / n - f));
    d = std::max(d, std::abs(double(i) / n - f));
  }
  return d;
}

double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.18) return 1.0;  // series converges slowly; tail is 1 to 7 digits
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1) ? term : -term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

TwoSampleKs two_sample_ks(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw UsageError("ks: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const int n = int(a.size()), m = int(b.size());
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(double(i) / n - double(j) / m));
  }
  TwoSampleKs out;
  out.d = d;
  const double ne = std::sqrt(double(n) * m / (double(n) + m));
  out.p = kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d);
  return out;
}

}  // namespace dynssep
