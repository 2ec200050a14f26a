#pragma once
#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace rws {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double sigmoid(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow for large |z|.
inline double softplus(double z) {
  if (z > 36.0) return z;          // log1p(e^z) == z to double precision
  if (z < -36.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

// log Bernoulli(x; sigmoid(z)) for x in {0,1}, computed from the logit so the
// result stays finite even for saturated units.
inline double bernoulli_log_prob(double x, double z) {
  return x > 0.5 ? -softplus(-z) : -softplus(z);
}

inline double log_sum_exp(const Vec& v) {
  if (v.size() == 0) return kNegInf;
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a stray +inf/NaN propagates)
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// softmax(v) computed by max subtraction; sums to 1 exactly up to rounding.
inline Vec softmax(const Vec& v) {
  Vec out(v.size());
  const double m = v.maxCoeff();
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    s += out[i];
  }
  out /= s;
  return out;
}

// Streaming accumulator for log-weights: supports log-sum-exp, the sum of
// squared (shifted) weights for effective-sample-size, and merging, so test
// evaluation can run K=100,000 in chunks with O(chunk) memory.
class LogWeightStats {
 public:
  void add(double lw) {
    if (lw > max_) {
      const double r = std::exp(max_ - lw);  // exp(-inf - lw) == 0: safe start
      s1_ *= r;
      s2_ *= r * r;
      max_ = lw;
    }
    const double e = std::exp(lw - max_);
    s1_ += e;
    s2_ += e * e;
    ++n_;
  }

  void merge(const LogWeightStats& o) {
    if (o.n_ == 0) return;
    if (o.max_ > max_) {
      const double r = std::exp(max_ - o.max_);
      s1_ = s1_ * r + o.s1_;
      s2_ = s2_ * r * r + o.s2_;
      max_ = o.max_;
    } else {
      const double r = std::exp(o.max_ - max_);
      s1_ += o.s1_ * r;
      s2_ += o.s2_ * r * r;
    }
    n_ += o.n_;
  }

  long long count() const { return n_; }

  double log_sum() const { return n_ == 0 ? kNegInf : max_ + std::log(s1_); }

  // log( (1/n) sum_k w_k )
  double log_mean() const {
    return n_ == 0 ? kNegInf : log_sum() - std::log(static_cast<double>(n_));
  }

  // 1 / sum_k normalized_w_k^2  ==  s1^2 / s2 (shift-invariant).
  double effective_sample_size() const {
    return n_ == 0 ? 0.0 : s1_ * s1_ / s2_;
  }

 private:
  double max_ = kNegInf;
  double s1_ = 0.0;
  double s2_ = 0.0;
  long long n_ = 0;
};

// Streaming mean/variance (Welford).
class RunningMoments {
 public:
  void add(double v) {
    ++n_;
    const double d = v - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (v - mean_);
  }
  long long count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
  }
  double stddev() const { return std::sqrt(variance()); }
  double standard_error() const {
    return n_ > 0 ? stddev() / std::sqrt(static_cast<double>(n_)) : 0.0;
  }

 private:
  long long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace rws
