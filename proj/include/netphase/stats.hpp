#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace netphase {

// Maps an angle to the principal interval (-pi, pi].
inline double wrap_to_pi(double a) {
  const double two_pi = 2.0 * M_PI;
  double r = std::fmod(a, two_pi);
  if (r <= -M_PI) r += two_pi;
  else if (r > M_PI) r -= two_pi;
  return r;
}

// Streaming mean/variance (Welford). merge() combines two disjoint streams
// and is associative, so block-wise parallel reduction in fixed block order
// gives the same result as a single sequential pass.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  void merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) { *this = o; return; }
    double d = o.mean_ - mean_;
    long long n = n_ + o.n_;
    m2_ += o.m2_ + d * d * (static_cast<double>(n_) * static_cast<double>(o.n_) / static_cast<double>(n));
    mean_ += d * static_cast<double>(o.n_) / static_cast<double>(n);
    n_ = n;
  }
  long long count() const { return n_; }
  double mean() const {
    if (n_ == 0) throw std::logic_error("RunningStats::mean: empty");
    return mean_;
  }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double stderr_mean() const {
    if (n_ == 0) throw std::logic_error("RunningStats::stderr_mean: empty");
    return std::sqrt(variance() / static_cast<double>(n_));
  }

 private:
  long long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need two equal-length series with >= 2 points");
  double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  if (std::fabs(denom) < 1e-300) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

// Fixed-grid histogram over [lo, hi); out-of-range values are counted but not
// binned, and enter the density normalization.
class Histogram {
 public:
  Histogram(double lo, double hi, int bins) : lo_(lo), hi_(hi), counts_(bins, 0.0) {
    if (!(hi > lo) || bins < 1) throw std::invalid_argument("Histogram: need hi > lo, bins >= 1");
    width_ = (hi - lo) / bins;
  }
  void add(double x) {
    ++total_;
    if (x < lo_) { ++under_; return; }
    if (x >= hi_) { ++over_; return; }
    int i = static_cast<int>((x - lo_) / width_);
    if (i >= static_cast<int>(counts_.size())) i = static_cast<int>(counts_.size()) - 1;
    counts_[static_cast<std::size_t>(i)] += 1.0;
  }
  int bins() const { return static_cast<int>(counts_.size()); }
  double bin_left(int i) const { return lo_ + width_ * i; }
  double bin_right(int i) const { return lo_ + width_ * (i + 1); }
  double count(int i) const { return counts_[static_cast<std::size_t>(i)]; }
  long long total() const { return total_; }
  long long underflow() const { return under_; }
  long long overflow() const { return over_; }
  double density(int i) const {
    return total_ > 0 ? counts_[static_cast<std::size_t>(i)] / (static_cast<double>(total_) * width_) : 0.0;
  }
  const std::vector<double>& counts() const { return counts_; }

 private:
  double lo_, hi_, width_;
  std::vector<double> counts_;
  long long total_ = 0, under_ = 0, over_ = 0;
};

namespace detail {

inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 1000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double beta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 1000; ++m) {
    double md = static_cast<double>(m);
    double m2 = 2.0 * md;
    double aa = md * (b - md) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + md) * (qab + md) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h;
}

}  // namespace detail

// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw std::invalid_argument("gamma_q: need a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  return (x < a + 1.0) ? 1.0 - detail::gamma_p_series(a, x) : detail::gamma_q_cf(a, x);
}

// Survival function of a chi-square variable with `dof` degrees of freedom.
inline double chi_square_sf(double stat, int dof) {
  if (dof < 1 || !(stat >= 0.0)) throw std::invalid_argument("chi_square_sf: need dof >= 1, stat >= 0");
  return gamma_q(0.5 * dof, 0.5 * stat);
}

// Regularized incomplete beta I_x(a, b).
inline double betai(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("betai: need a > 0, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::beta_cf(a, b, x) / a;
  return 1.0 - bt * detail::beta_cf(b, a, 1.0 - x) / b;
}

// Kolmogorov tail Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  double sum = 0.0, sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-18) break;
    sign = -sign;
  }
  return std::min(1.0, std::max(0.0, 2.0 * sum));
}

// Critical value D* for the one-sample KS test at level alpha (asymptotic):
// reject when the statistic exceeds D* = lambda_alpha / sqrt(n).
inline double ks_critical(double alpha, std::size_t n) {
  if (!(alpha > 0.0 && alpha < 1.0) || n == 0)
    throw std::invalid_argument("ks_critical: need 0 < alpha < 1, n >= 1");
  double lo = 1e-4, hi = 6.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (kolmogorov_q(mid) > alpha) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi) / std::sqrt(static_cast<double>(n));
}

// One-sample KS statistic sup_x |F_n(x) - F(x)| against a model CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(samples.begin(), samples.end());
  double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double f = cdf(samples[i]);
    d = std::max(d, std::fabs(f - static_cast<double>(i + 1) / n));
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
  }
  return d;
}

struct GofResult {
  double stat = 0.0;
  int dof = 0;
  double p_value = 1.0;
  int pooled_bins = 0;  // number of cells after pooling
};

// Pearson chi-square goodness of fit. `probs` are model bin probabilities
// (renormalized internally); adjacent bins are pooled until every expected
// count reaches `min_expected`, the standard validity rule for the test.
inline GofResult chi_square_gof(const std::vector<double>& observed,
                                const std::vector<double>& probs,
                                double min_expected = 5.0) {
  if (observed.size() != probs.size() || observed.empty())
    throw std::invalid_argument("chi_square_gof: need equal-length non-empty inputs");
  double total = 0.0, psum = 0.0;
  for (double o : observed) total += o;
  for (double p : probs) {
    if (p < -1e-15) throw std::invalid_argument("chi_square_gof: negative model probability");
    psum += p;
  }
  if (!(total > 0.0) || !(psum > 0.0))
    throw std::invalid_argument("chi_square_gof: empty sample or zero model mass");

  std::vector<std::pair<double, double>> cells;  // (observed, expected)
  double obs_acc = 0.0, exp_acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    obs_acc += observed[i];
    exp_acc += total * probs[i] / psum;
    if (exp_acc >= min_expected) {
      cells.emplace_back(obs_acc, exp_acc);
      obs_acc = 0.0;
      exp_acc = 0.0;
    }
  }
  if (exp_acc > 0.0 || obs_acc > 0.0) {
    if (!cells.empty() && exp_acc < min_expected) {
      cells.back().first += obs_acc;
      cells.back().second += exp_acc;
    } else {
      cells.emplace_back(obs_acc, exp_acc);
    }
  }

  GofResult r;
  r.pooled_bins = static_cast<int>(cells.size());
  if (cells.size() < 2) return r;  // not enough resolution to test; p = 1
  for (auto& [o, e] : cells) r.stat += (o - e) * (o - e) / e;
  r.dof = static_cast<int>(cells.size()) - 1;
  r.p_value = chi_square_sf(r.stat, r.dof);
  return r;
}

}  // namespace netphase
