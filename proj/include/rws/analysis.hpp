#pragma once
#include <string>
#include <vector>

#include "rws/estimators.hpp"
#include "rws/model.hpp"

namespace rws {

// Bias/spread of a low-sample estimator versus a large-K reference, measured
// by resampling subsets of the reference's primary samples with replacement.
struct BootstrapReport {
  std::vector<int> subset_sizes;   // strictly increasing, each <= reference_K
  std::vector<double> bias;        // gradient study: L2 norm of the mean
                                   // deviation; LL study: signed mean deviation
  std::vector<double> spread;      // gradient study: L2 norm of per-coordinate
                                   // stds; LL study: std of the estimate
  int n_resamples = 0;
  int reference_K = 0;

  std::string to_csv() const;  // header "size,bias_l2,std,n_resamples"
};

// Wake-phase p-gradient study: reference_K primary importance samples per
// datapoint are drawn once; the reference gradient (averaged over datapoints)
// uses all of them. For each subset size s, n_resamples resamples of s indices
// (with replacement, independent per datapoint) recompute the self-normalized
// gradient; the report holds the deviation statistics against the reference.
//
// identity_at_reference: when a subset size equals reference_K, use the
// identity subset instead of resampling — bias and spread are then exactly 0.
BootstrapReport bootstrap_gradient_study(const GenerativeModel& p, const Proposal& q,
                                         const Mat& datapoints, int reference_K,
                                         const std::vector<int>& subset_sizes,
                                         int n_resamples, const RngStream& rng,
                                         bool identity_at_reference = false);

// Same resampling scheme, statistic = mean log-marginal estimate over the
// datapoints. Bias is signed (the estimator underestimates, so it should come
// out <= 0 against an exact reference on tractable models).
BootstrapReport bootstrap_ll_study(const GenerativeModel& p, const Proposal& q,
                                   const Mat& datapoints, int reference_K,
                                   const std::vector<int>& subset_sizes, int n_resamples,
                                   const RngStream& rng,
                                   bool identity_at_reference = false);

struct LlVsKRow {
  long long k;
  double mean_ll;  // over datapoints
  double se;       // over datapoints
};

// Mean log-marginal estimate per K, with nested sample reuse: the K-sample
// batch is a prefix of the largest batch, so the curve is monotone-comparable
// point to point.
std::vector<LlVsKRow> ll_vs_k_curve(const GenerativeModel& p, const Proposal& q,
                                    const Mat& datapoints,
                                    const std::vector<long long>& k_values,
                                    const RngStream& rng);

std::string ll_vs_k_to_csv(const std::vector<LlVsKRow>& rows);

}  // namespace rws
