#include "rws/estimators.hpp"

#include <cmath>

#include "rws/errors.hpp"

namespace rws {

ImportanceBatch draw_importance_batch(const GenerativeModel& p, const Proposal& q,
                                      const Vec& x, int K, const RngStream& rng) {
  if (K < 1) throw ShapeError("importance batch needs K >= 1");
  ImportanceBatch out;
  out.x = x;
  out.samples.resize(K);
  out.log_weights.resize(K);
  for (int k = 0; k < K; ++k) {
    RngStream sk = rng.substream(k);
    WeightedSample& s = out.samples[k];
    s.h = q.sample_latents(x, sk, &s.log_q);
    s.log_joint = p.joint_log_prob(x, s.h);
    out.log_weights[k] = s.log_joint - s.log_q;
  }
  return out;
}

Vec normalize_weights(const ImportanceBatch& batch) {
  if (!batch.log_weights.allFinite())
    throw RwsError("importance batch contains non-finite log-weights");
  return softmax(batch.log_weights);
}

double log_marginal_estimate(const ImportanceBatch& batch) {
  return log_sum_exp(batch.log_weights) - std::log(static_cast<double>(batch.K()));
}

double elbo_estimate(const ImportanceBatch& batch) {
  // mean computed relative to the max so a constant vector returns exactly max
  const double m = batch.log_weights.maxCoeff();
  double s = 0.0;
  for (Eigen::Index i = 0; i < batch.log_weights.size(); ++i)
    s += batch.log_weights[i] - m;
  return m + s / static_cast<double>(batch.K());
}

double effective_sample_size(const Vec& tilde_omega) {
  return 1.0 / tilde_omega.squaredNorm();
}

double effective_sample_size(const ImportanceBatch& batch) {
  return effective_sample_size(normalize_weights(batch));
}

double streamed_log_marginal(const GenerativeModel& p, const Proposal& q, const Vec& x,
                             long long K, const RngStream& rng, int chunk,
                             double* ess_out) {
  // Sample k always uses rng.substream(k), so the estimate is independent of
  // the chunk size; chunking only bounds transient memory.
  LogWeightStats stats;
  long long done = 0;
  while (done < K) {
    const long long n = std::min<long long>(chunk, K - done);
    for (long long k = 0; k < n; ++k) {
      RngStream sk = rng.substream(static_cast<std::uint64_t>(done + k));
      double log_q = 0.0;
      std::vector<Vec> h = q.sample_latents(x, sk, &log_q);
      stats.add(p.joint_log_prob(x, h) - log_q);
    }
    done += n;
  }
  if (ess_out) *ess_out = stats.effective_sample_size();
  return stats.log_mean();
}

}  // namespace rws
