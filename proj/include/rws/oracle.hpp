#pragma once
#include <cstdint>
#include <vector>

#include "rws/estimators.hpp"
#include "rws/model.hpp"

namespace rws {

// Brute-force exact references for small models. Enumeration is refused above
// these budgets (2^bits blow-up guard).
struct EnumerationBudget {
  int max_total_latent_bits = 16;
  int max_visible_bits = 12;
};

// Latent configurations are indexed by a big-endian counter over the
// concatenated bottom-up layers: bit 0 of the concatenated string is the first
// unit of the layer adjacent to x, and the LAST unit of the top layer varies
// fastest as the index increments.
std::vector<Vec> latent_config_from_index(std::uint64_t index,
                                          const std::vector<int>& widths);
std::uint64_t latent_index_from_config(const std::vector<Vec>& h);

double exact_log_marginal(const GenerativeModel& p, const Vec& x,
                          const EnumerationBudget& budget = {});

// Posterior over every latent configuration, stored by enumeration index.
struct PosteriorTable {
  std::vector<int> widths;  // bottom-up latent widths
  Vec log_posterior;        // size 2^total_bits, sums (in prob) to 1
  double log_marginal;
};

PosteriorTable exact_posterior(const GenerativeModel& p, const Vec& x,
                               const EnumerationBudget& budget = {});

// d/dtheta log p(x) = sum_h posterior(h|x) d/dtheta log p(x,h).
ModelGrad exact_marginal_gradient(const GenerativeModel& p, const Vec& x,
                                  const EnumerationBudget& budget = {});

// sum over all visible vectors of exp(exact_log_marginal): should be 1.
double total_visible_probability(const GenerativeModel& p,
                                 const EnumerationBudget& budget = {});

// The optimal proposal q*(h|x) = p(h|x), realized as a lookup table plus a
// categorical draw (single uniform walks the CDF in enumeration-index order).
// Importance weights under this proposal all equal p(x): zero variance.
class ExactPosteriorProposal : public Proposal {
 public:
  ExactPosteriorProposal(const GenerativeModel& p, const Vec& x,
                         const EnumerationBudget& budget = {});

  std::vector<Vec> sample_latents(const Vec& x, RngStream& rng,
                                  double* log_q_out = nullptr) const override;
  double log_prob(const Vec& x, const std::vector<Vec>& h) const override;

  const PosteriorTable& table() const { return table_; }

 private:
  Vec x_;
  PosteriorTable table_;
  Vec cdf_;
};

}  // namespace rws
