#include "rws/model.hpp"

#include <string>

#include "rws/errors.hpp"

namespace rws {

void ModelGrad::add_scaled(const ModelGrad& o, double s) {
  for (size_t l = 0; l < layers.size(); ++l)
    for (size_t k = 0; k < layers[l].g.size(); ++k)
      layers[l].g[k] += s * o.layers[l].g[k];
}

void ModelGrad::scale(double s) {
  for (auto& l : layers)
    for (auto& m : l.g) m *= s;
}

double ModelGrad::squared_norm() const {
  double t = 0.0;
  for (const auto& l : layers)
    for (const auto& m : l.g) t += m.squaredNorm();
  return t;
}

long long ModelGrad::size() const {
  long long n = 0;
  for (const auto& l : layers)
    for (const auto& m : l.g) n += m.size();
  return n;
}

Vec ModelGrad::flatten() const {
  Vec out(size());
  Eigen::Index at = 0;
  for (const auto& l : layers)
    for (const auto& m : l.g) {
      out.segment(at, m.size()) = Eigen::Map<const Vec>(m.data(), m.size());
      at += m.size();
    }
  return out;
}

ModelGrad LayerStack::make_grad() const {
  ModelGrad out;
  out.layers.reserve(layers.size());
  for (const auto& l : layers) out.layers.push_back(l->make_grad());
  return out;
}

long long LayerStack::num_params() const {
  long long n = 0;
  for (const auto& l : layers) n += l->num_params();
  return n;
}

void LayerStack::init_params(RngStream& rng) {
  for (size_t i = 0; i < layers.size(); ++i) {
    RngStream s = rng.substream(i);
    layers[i]->init_params(s);
  }
}

void sgd_momentum_step(LayerStack& model, const ModelGrad& grad, ModelGrad& velocity,
                       double lr, double beta) {
  for (size_t l = 0; l < model.layers.size(); ++l) {
    auto blocks = model.layers[l]->blocks();
    for (size_t k = 0; k < blocks.size(); ++k) {
      Mat& v = velocity.layers[l].g[k];
      v = beta * v + grad.layers[l].g[k];
      *blocks[k].m += lr * v;
    }
  }
}

std::vector<int> GenerativeModel::latent_widths() const {
  const int L = num_latent_layers();
  std::vector<int> w(L);
  for (int i = 0; i < L; ++i) w[L - 1 - i] = layers[i]->d_out();
  return w;
}

void GenerativeModel::validate() const {
  if (layers.empty()) throw ShapeError("generative model has no layers");
  if (layers[0]->d_in() != 0)
    throw ShapeError("generative top layer must be unconditioned (d_in == 0)");
  for (size_t i = 1; i < layers.size(); ++i) {
    if (layers[i]->d_in() != layers[i - 1]->d_out())
      throw ShapeError("generative layer " + std::to_string(i) + " expects input width " +
                       std::to_string(layers[i]->d_in()) + " but layer above emits " +
                       std::to_string(layers[i - 1]->d_out()));
  }
}

double GenerativeModel::joint_log_prob(const Vec& x, const std::vector<Vec>& h) const {
  const int L = num_latent_layers();
  if (static_cast<int>(h.size()) != L)
    throw ShapeError("latent config depth " + std::to_string(h.size()) +
                     " does not match model depth " + std::to_string(L));
  static const Vec kEmpty = Vec(0);
  // layers[i] emits h[L-1-i] for i < L; layers[L] emits x given h[0]
  double lp = layers[0]->log_prob(h[L - 1], kEmpty);
  for (int i = 1; i < L; ++i) lp += layers[i]->log_prob(h[L - 1 - i], h[L - i]);
  lp += layers[L]->log_prob(x, h[0]);
  return lp;
}

void GenerativeModel::accumulate_grad(const Vec& x, const std::vector<Vec>& h,
                                      double scale, ModelGrad& out) const {
  const int L = num_latent_layers();
  static const Vec kEmpty = Vec(0);
  layers[0]->accumulate_grad(h[L - 1], kEmpty, scale, out.layers[0]);
  for (int i = 1; i < L; ++i)
    layers[i]->accumulate_grad(h[L - 1 - i], h[L - i], scale, out.layers[i]);
  layers[L]->accumulate_grad(x, h[0], scale, out.layers[L]);
}

Vec GenerativeModel::ancestral_sample(RngStream& rng, std::vector<Vec>* h_out,
                                      double* log_joint_out, Vec* bottom_probs_out) const {
  const int L = num_latent_layers();
  static const Vec kEmpty = Vec(0);
  double lp_total = 0.0;
  std::vector<Vec> h(L);
  Vec cur = kEmpty;
  for (int i = 0; i < L; ++i) {
    double lp = 0.0;
    cur = layers[i]->sample(cur, rng, &lp);
    lp_total += lp;
    h[L - 1 - i] = cur;
  }
  double lp = 0.0;
  Vec x = layers[L]->sample(L > 0 ? h[0] : kEmpty, rng, &lp, bottom_probs_out);
  lp_total += lp;
  if (h_out) *h_out = std::move(h);
  if (log_joint_out) *log_joint_out = lp_total;
  return x;
}

std::vector<int> InferenceModel::latent_widths() const {
  std::vector<int> w(layers.size());
  for (size_t i = 0; i < layers.size(); ++i) w[i] = layers[i]->d_out();
  return w;
}

void InferenceModel::validate() const {
  if (layers.empty()) throw ShapeError("inference model has no layers");
  for (size_t i = 1; i < layers.size(); ++i) {
    if (layers[i]->d_in() != layers[i - 1]->d_out())
      throw ShapeError("inference layer " + std::to_string(i) + " expects input width " +
                       std::to_string(layers[i]->d_in()) + " but previous layer emits " +
                       std::to_string(layers[i - 1]->d_out()));
  }
}

std::vector<Vec> InferenceModel::sample_latents(const Vec& x, RngStream& rng,
                                                double* log_q_out) const {
  std::vector<Vec> h(layers.size());
  double total = 0.0;
  const Vec* cur = &x;
  for (size_t i = 0; i < layers.size(); ++i) {
    double lp = 0.0;
    h[i] = layers[i]->sample(*cur, rng, &lp);
    total += lp;
    cur = &h[i];
  }
  if (log_q_out) *log_q_out = total;
  return h;
}

double InferenceModel::log_prob(const Vec& x, const std::vector<Vec>& h) const {
  if (h.size() != layers.size())
    throw ShapeError("latent config depth does not match inference model depth");
  double total = layers[0]->log_prob(h[0], x);
  for (size_t i = 1; i < layers.size(); ++i) total += layers[i]->log_prob(h[i], h[i - 1]);
  return total;
}

void InferenceModel::accumulate_grad(const Vec& x, const std::vector<Vec>& h,
                                     double scale, ModelGrad& out) const {
  layers[0]->accumulate_grad(h[0], x, scale, out.layers[0]);
  for (size_t i = 1; i < layers.size(); ++i)
    layers[i]->accumulate_grad(h[i], h[i - 1], scale, out.layers[i]);
}

void validate_pair(const GenerativeModel& p, const InferenceModel& q) {
  p.validate();
  q.validate();
  if (p.visible_width() != q.visible_width())
    throw ShapeError("p emits " + std::to_string(p.visible_width()) +
                     " visible units but q consumes " + std::to_string(q.visible_width()));
  const auto pw = p.latent_widths();
  const auto qw = q.latent_widths();
  if (pw != qw) {
    auto str = [](const std::vector<int>& v) {
      std::string s;
      for (size_t i = 0; i < v.size(); ++i) s += (i ? "-" : "") + std::to_string(v[i]);
      return s;
    };
    throw ShapeError("latent width chains differ: p has " + str(pw) + ", q has " + str(qw));
  }
}

}  // namespace rws
