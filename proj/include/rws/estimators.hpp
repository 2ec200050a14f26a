#pragma once
#include <vector>

#include "rws/model.hpp"
#include "rws/numerics.hpp"
#include "rws/rng.hpp"

namespace rws {

struct WeightedSample {
  std::vector<Vec> h;  // bottom-up latents
  double log_q;
  double log_joint;
};

// K proposal samples for one visible vector, with log importance weights
// log w_k = log p(x, h_k) - log q(h_k | x).
struct ImportanceBatch {
  Vec x;
  std::vector<WeightedSample> samples;
  Vec log_weights;

  int K() const { return static_cast<int>(samples.size()); }
};

// Sample k uses rng.substream(k), so the K draws can be evaluated in any order
// (or in parallel) without changing the result. Callers hand a dedicated
// stream per (datapoint, purpose).
ImportanceBatch draw_importance_batch(const GenerativeModel& p, const Proposal& q,
                                      const Vec& x, int K, const RngStream& rng);

// softmax of the log weights (max subtraction); entries sum to 1.
Vec normalize_weights(const ImportanceBatch& batch);

// log( (1/K) sum_k w_k ): consistent, unbiased in w, underestimates log p(x).
double log_marginal_estimate(const ImportanceBatch& batch);

// (1/K) sum_k log w_k: the variational lower bound, always <= the estimate
// above by Jensen. Computed through the same max shift so equal weights give
// exact equality.
double elbo_estimate(const ImportanceBatch& batch);

// 1 / sum_k tilde_w_k^2, in [1, K]; K for uniform weights.
double effective_sample_size(const Vec& tilde_omega);
double effective_sample_size(const ImportanceBatch& batch);

// Streamed per-datapoint evaluation at large K: chunked draws merged through
// LogWeightStats, memory O(chunk). Returns the log-marginal estimate; ess_out
// (if given) receives the effective sample size of all K weights.
double streamed_log_marginal(const GenerativeModel& p, const Proposal& q, const Vec& x,
                             long long K, const RngStream& rng, int chunk = 1024,
                             double* ess_out = nullptr);

}  // namespace rws
