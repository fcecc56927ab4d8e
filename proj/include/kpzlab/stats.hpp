#pragma once

#include <functional>
#include <span>
#include <vector>

namespace kpzlab::stats {

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double se = 0.0;        // standard error of the mean
};

Summary summarize(std::span<const double> xs);

// Sample skewness g1 and its standard error under normality.
struct Skewness {
  double value = 0.0;
  double se = 0.0;
};
Skewness skewness(std::span<const double> xs);
// Skewness of the pooled samples of all groups; the error is the delete-one-group jackknife,
// so samples may be dependent within a group (e.g. translates on one trajectory).
Skewness pooled_skewness(std::span<const std::vector<double>> groups);

// Standard error of the unbiased variance estimator, from the sample fourth moment.
double variance_se(std::span<const double> xs);

// Standard error of the sample covariance of paired data.
double covariance(std::span<const double> xs, std::span<const double> ys);
double covariance_se(std::span<const double> xs, std::span<const double> ys);

double median(std::vector<double> xs);

// Kolmogorov distribution tail P(K > lambda).
double kolmogorov_tail(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf);

double chi_square_p_value(double statistic, double dof);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace kpzlab::stats
