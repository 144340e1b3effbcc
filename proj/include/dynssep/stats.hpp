#pragma once
// Small statistics toolbox shared by the verification surfaces: moments
// with an honest standard error for the sample variance, least squares,
// Kolmogorov–Smirnov distances (one-sample Gaussian and two-sample with the
// asymptotic p-value), and the Kolmogorov tail series.

#include <vector>

namespace dynssep {

struct Moments {
  double mean = 0.0;
  double var = 0.0;     // unbiased
  double se_var = 0.0;  // sqrt((m4 - s^4 (n-3)/(n-1)) / n)
  int n = 0;
};

Moments moments(const std::vector<double>& xs);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LinearFit linear_fit(const std::vector<double>& xs,
                     const std::vector<double>& ys);

double normal_cdf(double z);

// sup_x |F_emp(x) − Φ((x−mean)/sd)|. sd = 0 compares against the point mass.
double ks_distance_gaussian(std::vector<double> samples, double mean,
                            double sd);

struct TwoSampleKs {
  double d = 0.0;
  double p = 1.0;
};

// Asymptotic p-value via the Kolmogorov distribution with the standard
// finite-sample effective-size correction.
TwoSampleKs two_sample_ks(std::vector<double> a, std::vector<double> b);

// Q(x) = 2 Σ_{k>=1} (−1)^{k−1} exp(−2k²x²), the Kolmogorov tail.
double kolmogorov_tail(double x);

}  // namespace dynssep
