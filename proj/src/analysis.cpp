#include "rws/analysis.hpp"

#include <cmath>
#include <cstdio>

#include "rws/errors.hpp"
#include "rws/oracle.hpp"
#include "rws/training.hpp"

namespace rws {

namespace {

void check_study_args(int reference_K, const std::vector<int>& sizes, int n_resamples,
                      const Mat& datapoints) {
  if (datapoints.rows() < 1) throw ShapeError("bootstrap study needs datapoints");
  if (n_resamples < 1) throw ConfigError("n_resamples must be >= 1");
  if (sizes.empty()) throw ConfigError("subset_sizes must be nonempty");
  int prev = 0;
  for (int s : sizes) {
    if (s <= prev)
      throw ConfigError("subset_sizes must be strictly increasing and positive");
    if (s > reference_K)
      throw ConfigError("subset size " + std::to_string(s) + " exceeds reference_K = " +
                        std::to_string(reference_K));
    prev = s;
  }
}

// One datapoint's primary draw: log-weights plus (optionally) the per-sample
// flattened p-gradients as columns.
struct PrimarySamples {
  Vec log_weights;
  Mat flat_grads;  // P x K, only filled for the gradient study
};

PrimarySamples draw_primary(const GenerativeModel& p, const Proposal& q, const Vec& x,
                            int K, const RngStream& rng, bool with_grads) {
  PrimarySamples out;
  out.log_weights.resize(K);
  ModelGrad tmp = p.make_grad();
  const long long P = tmp.size();
  if (with_grads) out.flat_grads.resize(P, K);
  for (int k = 0; k < K; ++k) {
    RngStream sk = rng.substream(k);
    double log_q = 0.0;
    const std::vector<Vec> h = q.sample_latents(x, sk, &log_q);
    out.log_weights[k] = p.joint_log_prob(x, h) - log_q;
    if (with_grads) {
      tmp.zero();
      p.accumulate_grad(x, h, 1.0, tmp);
      out.flat_grads.col(k) = tmp.flatten();
    }
  }
  return out;
}

Vec subset_softmax(const Vec& log_weights, const std::vector<int>& idx) {
  Vec lw(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) lw[i] = log_weights[idx[i]];
  return softmax(lw);
}

std::vector<int> resample_indices(int s, int K, RngStream& rng) {
  std::vector<int> idx(s);
  for (int i = 0; i < s; ++i) idx[i] = static_cast<int>(rng.below(K));
  return idx;
}

}  // namespace

BootstrapReport bootstrap_gradient_study(const GenerativeModel& p, const Proposal& q,
                                         const Mat& datapoints, int reference_K,
                                         const std::vector<int>& subset_sizes,
                                         int n_resamples, const RngStream& rng,
                                         bool identity_at_reference) {
  check_study_args(reference_K, subset_sizes, n_resamples, datapoints);
  const int D = static_cast<int>(datapoints.rows());
  const int S = static_cast<int>(subset_sizes.size());
  const long long P = p.make_grad().size();

  // acc[i] column r = sum over datapoints of the resampled gradient
  std::vector<Mat> acc(S, Mat::Zero(P, n_resamples));
  Vec reference = Vec::Zero(P);

  for (int d = 0; d < D; ++d) {
    const Vec x = datapoints.row(d).transpose();
    const PrimarySamples prim =
        draw_primary(p, q, x, reference_K, rng.substream(2 * d), /*with_grads=*/true);
    reference += prim.flat_grads * softmax(prim.log_weights);
    const RngStream resample_root = rng.substream(2 * d + 1);
    for (int i = 0; i < S; ++i) {
      const int s = subset_sizes[i];
      if (identity_at_reference && s == reference_K) continue;
      const RngStream size_stream = resample_root.substream(i);
      for (int r = 0; r < n_resamples; ++r) {
        RngStream rs = size_stream.substream(r);
        const std::vector<int> idx = resample_indices(s, reference_K, rs);
        const Vec w = subset_softmax(prim.log_weights, idx);
        for (int j = 0; j < s; ++j) acc[i].col(r) += w[j] * prim.flat_grads.col(idx[j]);
      }
    }
  }

  reference /= D;
  BootstrapReport rep;
  rep.subset_sizes = subset_sizes;
  rep.n_resamples = n_resamples;
  rep.reference_K = reference_K;
  for (int i = 0; i < S; ++i) {
    if (identity_at_reference && subset_sizes[i] == reference_K) {
      // the identity subset reproduces the reference estimate by definition
      rep.bias.push_back(0.0);
      rep.spread.push_back(0.0);
      continue;
    }
    acc[i] /= D;  // columns are now the per-resample statistics
    const Vec mean = acc[i].rowwise().mean();
    rep.bias.push_back((mean - reference).norm());
    double var_sum = 0.0;
    if (n_resamples > 1)
      for (long long c = 0; c < P; ++c)
        var_sum += (acc[i].row(c).array() - mean[c]).square().sum() / (n_resamples - 1);
    rep.spread.push_back(std::sqrt(var_sum));
  }
  return rep;
}

BootstrapReport bootstrap_ll_study(const GenerativeModel& p, const Proposal& q,
                                   const Mat& datapoints, int reference_K,
                                   const std::vector<int>& subset_sizes, int n_resamples,
                                   const RngStream& rng, bool identity_at_reference) {
  check_study_args(reference_K, subset_sizes, n_resamples, datapoints);
  const int D = static_cast<int>(datapoints.rows());
  const int S = static_cast<int>(subset_sizes.size());

  std::vector<Vec> acc(S, Vec::Zero(n_resamples));
  double reference = 0.0;
  const double logKref = std::log(static_cast<double>(reference_K));

  for (int d = 0; d < D; ++d) {
    const Vec x = datapoints.row(d).transpose();
    const PrimarySamples prim =
        draw_primary(p, q, x, reference_K, rng.substream(2 * d), /*with_grads=*/false);
    reference += log_sum_exp(prim.log_weights) - logKref;
    const RngStream resample_root = rng.substream(2 * d + 1);
    for (int i = 0; i < S; ++i) {
      const int s = subset_sizes[i];
      if (identity_at_reference && s == reference_K) continue;
      const RngStream size_stream = resample_root.substream(i);
      Vec lw(s);
      for (int r = 0; r < n_resamples; ++r) {
        RngStream rs = size_stream.substream(r);
        for (int j = 0; j < s; ++j)
          lw[j] = prim.log_weights[static_cast<int>(rs.below(reference_K))];
        acc[i][r] += log_sum_exp(lw) - std::log(static_cast<double>(s));
      }
    }
  }

  reference /= D;
  BootstrapReport rep;
  rep.subset_sizes = subset_sizes;
  rep.n_resamples = n_resamples;
  rep.reference_K = reference_K;
  for (int i = 0; i < S; ++i) {
    if (identity_at_reference && subset_sizes[i] == reference_K) {
      rep.bias.push_back(0.0);
      rep.spread.push_back(0.0);
      continue;
    }
    acc[i] /= D;
    const double mean = acc[i].mean();
    rep.bias.push_back(mean - reference);
    const double var =
        n_resamples > 1 ? (acc[i].array() - mean).square().sum() / (n_resamples - 1) : 0.0;
    rep.spread.push_back(std::sqrt(var));
  }
  return rep;
}

std::string BootstrapReport::to_csv() const {
  std::string out = "size,bias_l2,std,n_resamples\n";
  char buf[128];
  for (size_t i = 0; i < subset_sizes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%d\n", subset_sizes[i], bias[i],
                  spread[i], n_resamples);
    out += buf;
  }
  return out;
}

std::vector<LlVsKRow> ll_vs_k_curve(const GenerativeModel& p, const Proposal& q,
                                    const Mat& datapoints,
                                    const std::vector<long long>& k_values,
                                    const RngStream& rng) {
  if (k_values.empty()) throw ConfigError("k_values must be nonempty");
  long long prev = 0;
  for (long long k : k_values) {
    if (k <= prev) throw ConfigError("k_values must be strictly increasing and positive");
    prev = k;
  }
  const int D = static_cast<int>(datapoints.rows());
  const long long kmax = k_values.back();
  std::vector<RunningMoments> per_k(k_values.size());

  for (int d = 0; d < D; ++d) {
    const Vec x = datapoints.row(d).transpose();
    const RngStream ds = rng.substream(d);
    LogWeightStats stats;
    size_t next_mark = 0;
    for (long long k = 0; k < kmax; ++k) {
      RngStream sk = ds.substream(static_cast<std::uint64_t>(k));
      double log_q = 0.0;
      const std::vector<Vec> h = q.sample_latents(x, sk, &log_q);
      stats.add(p.joint_log_prob(x, h) - log_q);
      while (next_mark < k_values.size() && stats.count() == k_values[next_mark]) {
        per_k[next_mark].add(stats.log_mean());
        ++next_mark;
      }
    }
  }

  std::vector<LlVsKRow> rows;
  for (size_t i = 0; i < k_values.size(); ++i)
    rows.push_back({k_values[i], per_k[i].mean(), per_k[i].standard_error()});
  return rows;
}

std::string ll_vs_k_to_csv(const std::vector<LlVsKRow>& rows) {
  std::string out = "k,mean_ll,se\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld,%.12g,%.12g\n", r.k, r.mean_ll, r.se);
    out += buf;
  }
  return out;
}

}  // namespace rws
