#include "rws/oracle.hpp"

#include <cmath>
#include <string>

#include "rws/errors.hpp"

namespace rws {

namespace {

int total_bits(const std::vector<int>& widths) {
  int t = 0;
  for (int w : widths) t += w;
  return t;
}

void check_latent_budget(const GenerativeModel& p, const EnumerationBudget& budget) {
  const int bits = total_bits(p.latent_widths());
  if (bits > budget.max_total_latent_bits)
    throw BudgetError("enumeration refused: " + std::to_string(bits) +
                      " latent bits exceed budget of " +
                      std::to_string(budget.max_total_latent_bits));
}

}  // namespace

std::vector<Vec> latent_config_from_index(std::uint64_t index,
                                          const std::vector<int>& widths) {
  const int bits = total_bits(widths);
  std::vector<Vec> h(widths.size());
  int pos = 0;  // position in the concatenated big-endian string
  for (size_t l = 0; l < widths.size(); ++l) {
    h[l].resize(widths[l]);
    for (int u = 0; u < widths[l]; ++u, ++pos)
      h[l][u] = (index >> (bits - 1 - pos)) & 1u ? 1.0 : 0.0;
  }
  return h;
}

std::uint64_t latent_index_from_config(const std::vector<Vec>& h) {
  std::uint64_t idx = 0;
  for (const auto& layer : h)
    for (Eigen::Index u = 0; u < layer.size(); ++u)
      idx = (idx << 1) | (layer[u] > 0.5 ? 1u : 0u);
  return idx;
}

double exact_log_marginal(const GenerativeModel& p, const Vec& x,
                          const EnumerationBudget& budget) {
  check_latent_budget(p, budget);
  const auto widths = p.latent_widths();
  const std::uint64_t n = std::uint64_t{1} << total_bits(widths);
  LogWeightStats acc;
  for (std::uint64_t i = 0; i < n; ++i)
    acc.add(p.joint_log_prob(x, latent_config_from_index(i, widths)));
  return acc.log_sum();
}

PosteriorTable exact_posterior(const GenerativeModel& p, const Vec& x,
                               const EnumerationBudget& budget) {
  check_latent_budget(p, budget);
  PosteriorTable t;
  t.widths = p.latent_widths();
  const std::uint64_t n = std::uint64_t{1} << total_bits(t.widths);
  Vec log_joint(n);
  for (std::uint64_t i = 0; i < n; ++i)
    log_joint[i] = p.joint_log_prob(x, latent_config_from_index(i, t.widths));
  t.log_marginal = log_sum_exp(log_joint);
  t.log_posterior = log_joint.array() - t.log_marginal;
  return t;
}

ModelGrad exact_marginal_gradient(const GenerativeModel& p, const Vec& x,
                                  const EnumerationBudget& budget) {
  PosteriorTable t = exact_posterior(p, x, budget);
  ModelGrad g = p.make_grad();
  const int L = p.num_latent_layers();
  static const Vec kEmpty = Vec(0);
  const std::uint64_t n = std::uint64_t{1} << total_bits(t.widths);
  for (std::uint64_t i = 0; i < n; ++i) {
    const double w = std::exp(t.log_posterior[i]);
    if (w == 0.0) continue;
    const auto h = latent_config_from_index(i, t.widths);
    p.layers[0]->accumulate_grad(h[L - 1], kEmpty, w, g.layers[0]);
    for (int l = 1; l < L; ++l)
      p.layers[l]->accumulate_grad(h[L - 1 - l], h[L - l], w, g.layers[l]);
    p.layers[L]->accumulate_grad(x, h[0], w, g.layers[L]);
  }
  return g;
}

double total_visible_probability(const GenerativeModel& p,
                                 const EnumerationBudget& budget) {
  const int vis = p.visible_width();
  if (vis > budget.max_visible_bits)
    throw BudgetError("visible enumeration refused: " + std::to_string(vis) +
                      " bits exceed budget of " + std::to_string(budget.max_visible_bits));
  double total = 0.0;
  Vec x(vis);
  const std::uint64_t n = std::uint64_t{1} << vis;
  for (std::uint64_t i = 0; i < n; ++i) {
    for (int u = 0; u < vis; ++u) x[u] = (i >> (vis - 1 - u)) & 1u ? 1.0 : 0.0;
    total += std::exp(exact_log_marginal(p, x, budget));
  }
  return total;
}

ExactPosteriorProposal::ExactPosteriorProposal(const GenerativeModel& p, const Vec& x,
                                               const EnumerationBudget& budget)
    : x_(x), table_(exact_posterior(p, x, budget)) {
  cdf_.resize(table_.log_posterior.size());
  double run = 0.0;
  for (Eigen::Index i = 0; i < cdf_.size(); ++i) {
    run += std::exp(table_.log_posterior[i]);
    cdf_[i] = run;
  }
  cdf_[cdf_.size() - 1] = 1.0;  // guard against rounding at the tail
}

std::vector<Vec> ExactPosteriorProposal::sample_latents(const Vec& x, RngStream& rng,
                                                        double* log_q_out) const {
  if (x != x_)
    throw RwsError("exact-posterior proposal queried with a different x than it was built for");
  const double u = rng.uniform();
  // first index with cdf >= u
  Eigen::Index lo = 0, hi = cdf_.size() - 1;
  while (lo < hi) {
    const Eigen::Index mid = (lo + hi) / 2;
    if (cdf_[mid] < u)
      lo = mid + 1;
    else
      hi = mid;
  }
  if (log_q_out) *log_q_out = table_.log_posterior[lo];
  return latent_config_from_index(static_cast<std::uint64_t>(lo), table_.widths);
}

double ExactPosteriorProposal::log_prob(const Vec& x, const std::vector<Vec>& h) const {
  if (x != x_)
    throw RwsError("exact-posterior proposal queried with a different x than it was built for");
  return table_.log_posterior[latent_index_from_config(h)];
}

}  // namespace rws
