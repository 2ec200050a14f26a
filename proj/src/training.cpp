#include "rws/training.hpp"

#include <cmath>
#include <thread>
#include <vector>

#include "rws/data.hpp"
#include "rws/errors.hpp"

namespace rws {

QUpdateMode parse_q_update_mode(const std::string& s) {
  if (s == "sleep") return QUpdateMode::Sleep;
  if (s == "wake") return QUpdateMode::Wake;
  if (s == "both") return QUpdateMode::Both;
  throw ConfigError("unknown q-update mode '" + s + "' (expected sleep, wake or both)");
}

const char* to_string(QUpdateMode m) {
  switch (m) {
    case QUpdateMode::Sleep: return "sleep";
    case QUpdateMode::Wake: return "wake";
    case QUpdateMode::Both: return "both";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (k_train < 1) throw ConfigError("k_train must be >= 1");
  if (learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
  if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must be in [0, 1)");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lr_decay_per_epoch < 1) throw ConfigError("lr_decay_per_epoch must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (sleep_grad_weight < 0) throw ConfigError("sleep_grad_weight must be >= 0");
  if (dream_samples_per_datapoint < 1)
    throw ConfigError("dream_samples_per_datapoint must be >= 1");
  if (grad_clip < 0) throw ConfigError("grad_clip must be >= 0");
}

double TrainConfig::lr_at_epoch(int epoch) const {
  return learning_rate / std::pow(lr_decay_per_epoch, epoch);
}

OptimizerState make_optimizer_state(const GenerativeModel& p, const InferenceModel& q) {
  return OptimizerState{p.make_grad(), q.make_grad()};
}

void accumulate_wake_p_gradient(const GenerativeModel& p, const ImportanceBatch& batch,
                                double scale, ModelGrad& out) {
  const Vec w = normalize_weights(batch);
  for (int k = 0; k < batch.K(); ++k) {
    const double wk = scale * w[k];
    if (wk == 0.0) continue;
    p.accumulate_grad(batch.x, batch.samples[k].h, wk, out);
  }
}

void accumulate_wake_q_gradient(const InferenceModel& q, const ImportanceBatch& batch,
                                double scale, ModelGrad& out) {
  const Vec w = normalize_weights(batch);
  for (int k = 0; k < batch.K(); ++k) {
    const double wk = scale * w[k];
    if (wk == 0.0) continue;
    q.accumulate_grad(batch.x, batch.samples[k].h, wk, out);
  }
}

void accumulate_sleep_q_gradient(const GenerativeModel& p, const InferenceModel& q,
                                 RngStream& rng, double scale, ModelGrad& out) {
  std::vector<Vec> h;
  const Vec x = p.ancestral_sample(rng, &h);
  q.accumulate_grad(x, h, scale, out);
}

ModelGrad wake_p_gradient(const GenerativeModel& p, const ImportanceBatch& batch) {
  ModelGrad g = p.make_grad();
  accumulate_wake_p_gradient(p, batch, 1.0, g);
  return g;
}

ModelGrad wake_q_gradient(const InferenceModel& q, const ImportanceBatch& batch) {
  ModelGrad g = q.make_grad();
  accumulate_wake_q_gradient(q, batch, 1.0, g);
  return g;
}

ModelGrad sleep_q_gradient(const GenerativeModel& p, const InferenceModel& q,
                           RngStream& rng) {
  ModelGrad g = q.make_grad();
  accumulate_sleep_q_gradient(p, q, rng, 1.0, g);
  return g;
}

namespace {

struct ItemResult {
  ModelGrad gp;
  ModelGrad gq;
  double ll = 0.0;
  double ess = 0.0;
};

void clip_grad(ModelGrad& g, double clip) {
  if (clip <= 0.0) return;
  const double n = std::sqrt(g.squared_norm());
  if (n > clip) g.scale(clip / n);
}

}  // namespace

EpochMetrics train_epoch(GenerativeModel& p, InferenceModel& q, const Mat& data,
                         const TrainConfig& cfg, OptimizerState& opt, int epoch_index,
                         int workers) {
  cfg.validate();
  if (data.rows() < 1) throw ShapeError("training data is empty");
  const int N = static_cast<int>(data.rows());
  const bool do_wake_q =
      cfg.q_update_mode == QUpdateMode::Wake || cfg.q_update_mode == QUpdateMode::Both;
  const bool do_sleep_q =
      cfg.q_update_mode == QUpdateMode::Sleep || cfg.q_update_mode == QUpdateMode::Both;
  const double sleep_scale =
      cfg.q_update_mode == QUpdateMode::Both ? cfg.sleep_grad_weight : 1.0;
  const double lr = cfg.lr_at_epoch(epoch_index);

  RngStream epoch_stream =
      channel(RngStream(cfg.seed), StreamChannel::Epochs).substream(epoch_index);
  RngStream shuffle_stream = epoch_stream.substream(0);
  const std::vector<int> order = shuffled_indices(N, shuffle_stream);

  ModelGrad batch_gp = p.make_grad();
  ModelGrad batch_gq = q.make_grad();
  std::vector<ItemResult> slots(cfg.batch_size);
  for (auto& s : slots) {
    s.gp = p.make_grad();
    s.gq = q.make_grad();
  }

  EpochMetrics metrics;
  double ll_sum = 0.0, ess_sum = 0.0;

  const int num_batches = (N + cfg.batch_size - 1) / cfg.batch_size;
  for (int b = 0; b < num_batches; ++b) {
    const int begin = b * cfg.batch_size;
    const int count = std::min(cfg.batch_size, N - begin);
    RngStream batch_stream = epoch_stream.substream(1 + b);
    const double item_scale = 1.0 / count;

    auto run_item = [&](int i) {
      ItemResult& slot = slots[i];
      slot.gp.zero();
      slot.gq.zero();
      const Vec x = data.row(order[begin + i]).transpose();
      RngStream wake_stream = batch_stream.substream(i);
      ImportanceBatch ib = draw_importance_batch(p, q, x, cfg.k_train, wake_stream);
      accumulate_wake_p_gradient(p, ib, item_scale, slot.gp);
      if (do_wake_q) accumulate_wake_q_gradient(q, ib, item_scale, slot.gq);
      if (do_sleep_q) {
        RngStream dream_stream = batch_stream.substream(cfg.batch_size + i);
        const double s =
            item_scale * sleep_scale / cfg.dream_samples_per_datapoint;
        for (int j = 0; j < cfg.dream_samples_per_datapoint; ++j) {
          RngStream dj = dream_stream.substream(j);
          accumulate_sleep_q_gradient(p, q, dj, s, slot.gq);
        }
      }
      slot.ll = log_marginal_estimate(ib);
      slot.ess = effective_sample_size(normalize_weights(ib));
    };

    if (workers > 1 && count > 1) {
      std::vector<std::thread> pool;
      const int nw = std::min(workers, count);
      pool.reserve(nw);
      for (int w = 0; w < nw; ++w)
        pool.emplace_back([&, w] {
          for (int i = w; i < count; i += nw) run_item(i);
        });
      for (auto& t : pool) t.join();
    } else {
      for (int i = 0; i < count; ++i) run_item(i);
    }

    // reduce in item order: bitwise independent of the worker count
    batch_gp.zero();
    batch_gq.zero();
    for (int i = 0; i < count; ++i) {
      batch_gp.add_scaled(slots[i].gp, 1.0);
      batch_gq.add_scaled(slots[i].gq, 1.0);
      ll_sum += slots[i].ll;
      ess_sum += slots[i].ess;
    }
    clip_grad(batch_gp, cfg.grad_clip);
    clip_grad(batch_gq, cfg.grad_clip);

    sgd_momentum_step(p, batch_gp, opt.v_p, lr, cfg.momentum);
    sgd_momentum_step(q, batch_gq, opt.v_q, lr, cfg.momentum);
    metrics.items += count;
  }

  metrics.mean_ll = ll_sum / metrics.items;
  metrics.mean_ess = ess_sum / metrics.items;
  return metrics;
}

Vec evaluate_dataset_ll(const GenerativeModel& p, const Proposal& q, const Mat& data,
                        long long K, const RngStream& rng, int chunk, Vec* ess_out,
                        int workers) {
  const int N = static_cast<int>(data.rows());
  Vec ll(N);
  if (ess_out) ess_out->resize(N);
  auto run = [&](int d) {
    double ess = 0.0;
    RngStream ds = rng.substream(d);
    ll[d] = streamed_log_marginal(p, q, data.row(d).transpose(), K, ds, chunk, &ess);
    if (ess_out) (*ess_out)[d] = ess;
  };
  if (workers > 1 && N > 1) {
    std::vector<std::thread> pool;
    const int nw = std::min(workers, N);
    for (int w = 0; w < nw; ++w)
      pool.emplace_back([&, w] {
        for (int d = w; d < N; d += nw) run(d);
      });
    for (auto& t : pool) t.join();
  } else {
    for (int d = 0; d < N; ++d) run(d);
  }
  return ll;
}

}  // namespace rws
