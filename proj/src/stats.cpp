#include "kpzlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace kpzlab::stats {

Summary summarize(std::span<const double> xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  s.mean = m;
  if (xs.size() > 1) {
    s.variance = v / static_cast<double>(xs.size() - 1);
    s.se = std::sqrt(s.variance / static_cast<double>(xs.size()));
  }
  return s;
}

Skewness skewness(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  if (xs.size() < 3) throw std::invalid_argument("skewness needs at least 3 samples");
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : xs) {
    const double d = x - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  Skewness out;
  out.value = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  out.se = std::sqrt(6.0 * n * (n - 1.0) / ((n - 2.0) * (n + 1.0) * (n + 3.0)));
  return out;
}

Skewness pooled_skewness(std::span<const std::vector<double>> groups) {
  if (groups.size() < 3) throw std::invalid_argument("pooled_skewness needs at least 3 groups");
  struct Sums {
    double n = 0, s1 = 0, s2 = 0, s3 = 0;
  };
  auto skew = [](const Sums& s) {
    const double m = s.s1 / s.n, v = s.s2 / s.n - m * m;
    const double m3 = s.s3 / s.n - 3.0 * m * s.s2 / s.n + 2.0 * m * m * m;
    return v > 0.0 ? m3 / std::pow(v, 1.5) : 0.0;
  };
  std::vector<Sums> per(groups.size());
  Sums total;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (double x : groups[g]) {
      per[g].n += 1;
      per[g].s1 += x;
      per[g].s2 += x * x;
      per[g].s3 += x * x * x;
    }
    total.n += per[g].n;
    total.s1 += per[g].s1;
    total.s2 += per[g].s2;
    total.s3 += per[g].s3;
  }
  const double G = static_cast<double>(groups.size());
  std::vector<double> jk(groups.size());
  double jm = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const Sums d{total.n - per[g].n, total.s1 - per[g].s1, total.s2 - per[g].s2, total.s3 - per[g].s3};
    jk[g] = skew(d);
    jm += jk[g] / G;
  }
  double v = 0.0;
  for (double x : jk) v += (x - jm) * (x - jm);
  return {skew(total), std::sqrt(v * (G - 1.0) / G)};
}

double variance_se(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  if (xs.size() < 4) throw std::invalid_argument("variance_se needs at least 4 samples");
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = (x - m) * (x - m);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  return std::sqrt(std::max(0.0, (m4 - (n - 3.0) / (n - 1.0) * m2 * m2) / n));
}

double covariance(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("covariance: size mismatch");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double c = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) c += (xs[i] - mx) * (ys[i] - my);
  return c / (n - 1.0);
}

double covariance_se(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  std::vector<double> prod(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) prod[i] = (xs[i] - mx) * (ys[i] - my);
  return summarize(prod).se;
}

double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t h = xs.size() / 2;
  return xs.size() % 2 ? xs[h] : 0.5 * (xs[h - 1] + xs[h]);
}

double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double sq = std::sqrt(ne);
  return {d, kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d)};
}

KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw std::invalid_argument("ks_one_sample: empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double sq = std::sqrt(n);
  return {d, kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d)};
}

double chi_square_p_value(double statistic, double dof) {
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("least_squares: bad input");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

}  // namespace kpzlab::stats
