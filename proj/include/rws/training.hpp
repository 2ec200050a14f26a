#pragma once
#include <string>

#include "rws/estimators.hpp"
#include "rws/model.hpp"

namespace rws {

enum class QUpdateMode { Sleep, Wake, Both };

QUpdateMode parse_q_update_mode(const std::string& s);
const char* to_string(QUpdateMode m);

struct TrainConfig {
  int k_train = 5;
  double learning_rate = 0.001;
  double momentum = 0.95;
  int batch_size = 25;
  QUpdateMode q_update_mode = QUpdateMode::Both;
  double lr_decay_per_epoch = 1.0;  // lr is divided by this each epoch; 1 = none
  int epochs = 1;
  std::uint64_t seed = 0;

  // Knobs the base recipe leaves open (defaults = the minimal assumption):
  double sleep_grad_weight = 1.0;      // scale of the sleep term in mode=both
  int dream_samples_per_datapoint = 1;
  double grad_clip = 0.0;              // global-L2 clip per minibatch; 0 = off

  void validate() const;  // throws ConfigError on range violations
  double lr_at_epoch(int epoch) const;
};

struct OptimizerState {
  ModelGrad v_p;
  ModelGrad v_q;
};

OptimizerState make_optimizer_state(const GenerativeModel& p, const InferenceModel& q);

// The three gradient estimators. Each accumulates scale * gradient into out.
//
// Wake-phase p update: sum_k tilde_w_k d/dtheta log p(x, h_k). Biased at
// finite K (self-normalized weights), consistent as K grows.
void accumulate_wake_p_gradient(const GenerativeModel& p, const ImportanceBatch& batch,
                                double scale, ModelGrad& out);

// Wake-phase q update: sum_k tilde_w_k d/dphi log q(h_k | x) — the same
// weights, driving q toward the posterior where the posterior has mass.
void accumulate_wake_q_gradient(const InferenceModel& q, const ImportanceBatch& batch,
                                double scale, ModelGrad& out);

// Sleep-phase q update: draw a dream pair (x', h') from p, follow
// d/dphi log q(h' | x').
void accumulate_sleep_q_gradient(const GenerativeModel& p, const InferenceModel& q,
                                 RngStream& rng, double scale, ModelGrad& out);

ModelGrad wake_p_gradient(const GenerativeModel& p, const ImportanceBatch& batch);
ModelGrad wake_q_gradient(const InferenceModel& q, const ImportanceBatch& batch);
ModelGrad sleep_q_gradient(const GenerativeModel& p, const InferenceModel& q,
                           RngStream& rng);

struct EpochMetrics {
  double mean_ll = 0.0;   // mean over items of the K_train log-marginal estimate
  double mean_ess = 0.0;  // mean effective sample size of the training weights
  long long items = 0;
};

// One pass of the training loop. Per shuffled minibatch: importance batches of
// K_train per datapoint; p always gets the wake update; q gets wake and/or
// sleep updates per cfg.q_update_mode; gradients are averaged over the
// minibatch, then one momentum step per model.
//
// Random-stream layout (fixed so results are independent of worker count, and
// so a resumed run continues bit-identically):
//   root    = RngStream(cfg.seed)
//   epoch e = channel(root, StreamChannel::Epochs).substream(e)
//   shuffle = epoch.substream(0)
//   batch b = epoch.substream(1 + b)
//   item i  : wake draws  batch.substream(i)
//             dream draws batch.substream(cfg.batch_size + i), one substream
//             per dream sample
// Per-item gradients land in per-item slots and are reduced in item order.
EpochMetrics train_epoch(GenerativeModel& p, InferenceModel& q, const Mat& data,
                         const TrainConfig& cfg, OptimizerState& opt, int epoch_index,
                         int workers = 1);

// Per-datapoint held-out evaluation: datapoint d uses rng.substream(d); each
// uses the chunked streaming estimator. Returns one estimate per row.
Vec evaluate_dataset_ll(const GenerativeModel& p, const Proposal& q, const Mat& data,
                        long long K, const RngStream& rng, int chunk = 1024,
                        Vec* ess_out = nullptr, int workers = 1);

}  // namespace rws
