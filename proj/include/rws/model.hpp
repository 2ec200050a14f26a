#pragma once
#include <memory>
#include <vector>

#include "rws/layers.hpp"

namespace rws {

// Gradient/velocity storage shaped like a whole layer stack.
struct ModelGrad {
  std::vector<LayerGrad> layers;

  void zero() {
    for (auto& l : layers) l.zero();
  }
  void add_scaled(const ModelGrad& o, double s);
  void scale(double s);
  double squared_norm() const;
  long long size() const;
  // All coordinates in a fixed order (layer, block, column-major entries).
  Vec flatten() const;
};

struct LayerStack {
  std::vector<std::unique_ptr<Layer>> layers;

  LayerStack() = default;
  LayerStack(const LayerStack& o) { *this = o; }
  LayerStack& operator=(const LayerStack& o) {
    layers.clear();
    layers.reserve(o.layers.size());
    for (const auto& l : o.layers) layers.push_back(l->clone());
    return *this;
  }
  LayerStack(LayerStack&&) = default;
  LayerStack& operator=(LayerStack&&) = default;

  ModelGrad make_grad() const;
  long long num_params() const;
  void init_params(RngStream& rng);  // layer i uses rng.substream(i)
};

// Applies v <- beta*v + g; params <- params + lr*v (gradient ascent).
void sgd_momentum_step(LayerStack& model, const ModelGrad& grad, ModelGrad& velocity,
                       double lr, double beta);

// Anything that can propose latent configurations for a given visible vector
// and report their log-probability. Latents are listed bottom-up: h[0] is the
// layer adjacent to x, h.back() the top layer.
class Proposal {
 public:
  virtual ~Proposal() = default;
  virtual std::vector<Vec> sample_latents(const Vec& x, RngStream& rng,
                                          double* log_q_out = nullptr) const = 0;
  virtual double log_prob(const Vec& x, const std::vector<Vec>& h) const = 0;
};

// Directed generative stack: layers[0] is the unconditioned top layer,
// layers[i+1] is conditioned on layers[i]'s output, layers.back() emits x.
struct GenerativeModel : LayerStack {
  int num_latent_layers() const { return static_cast<int>(layers.size()) - 1; }
  int visible_width() const { return layers.back()->d_out(); }
  // Bottom-up latent widths: [0] = width adjacent to x.
  std::vector<int> latent_widths() const;

  // Throws ShapeError unless the width chain is consistent and layers[0] is
  // unconditioned.
  void validate() const;

  double joint_log_prob(const Vec& x, const std::vector<Vec>& h) const;

  // scale * d/dtheta log p(x, h), added into out.
  void accumulate_grad(const Vec& x, const std::vector<Vec>& h, double scale,
                       ModelGrad& out) const;

  // Top-down dream sample. h_out (if given) receives latents bottom-up;
  // bottom_probs_out receives the visible layer's Bernoulli means.
  Vec ancestral_sample(RngStream& rng, std::vector<Vec>* h_out = nullptr,
                       double* log_joint_out = nullptr,
                       Vec* bottom_probs_out = nullptr) const;
};

// Inference stack: layers[0] maps x to the first latent layer, layers[i] maps
// latent i-1 to latent i. Implements Proposal.
struct InferenceModel : LayerStack, Proposal {
  int num_latent_layers() const { return static_cast<int>(layers.size()); }
  int visible_width() const { return layers.front()->d_in(); }
  std::vector<int> latent_widths() const;
  void validate() const;

  std::vector<Vec> sample_latents(const Vec& x, RngStream& rng,
                                  double* log_q_out = nullptr) const override;
  double log_prob(const Vec& x, const std::vector<Vec>& h) const override;

  // scale * d/dphi log q(h | x), added into out.
  void accumulate_grad(const Vec& x, const std::vector<Vec>& h, double scale,
                       ModelGrad& out) const;
};

// Throws ShapeError unless q's latent widths mirror p's and the visible widths
// agree.
void validate_pair(const GenerativeModel& p, const InferenceModel& q);

}  // namespace rws
