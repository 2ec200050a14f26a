#pragma once
#include <memory>
#include <string>
#include <vector>

#include "rws/numerics.hpp"
#include "rws/rng.hpp"

namespace rws {

// One named parameter block of a layer. Biases are stored as D x 1 matrices so
// every block is uniformly a matrix (simplifies optimizer/checkpoint code).
struct BlockRef {
  std::string name;
  Mat* m;
};

// Gradient (or velocity) storage shaped like a layer's blocks, in block order.
struct LayerGrad {
  std::vector<Mat> g;
  void zero() {
    for (auto& m : g) m.setZero();
  }
};

// A stochastic binary layer: a conditional distribution over a bit vector x of
// width d_out given a parent bit vector y of width d_in (d_in == 0 means an
// unconditioned top layer; pass an empty Vec). All three families share this
// interface so generative and inference stacks are plain layer lists.
//
// Sampling contract: exactly one uniform draw per output unit, consumed in
// unit order 0..d_out-1. Checkpoint/veloctiy code and the hand-rolled
// reference implementations in the tests rely on this order.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual const char* family() const = 0;
  virtual int d_out() const = 0;
  virtual int d_in() const = 0;

  virtual double log_prob(const Vec& x, const Vec& y) const = 0;

  // Draws x ~ p(.|y). Optionally reports log p(x|y) and the per-unit Bernoulli
  // means used (the "pixel probabilities" for visualization).
  virtual Vec sample(const Vec& y, RngStream& rng, double* log_prob_out = nullptr,
                     Vec* probs_out = nullptr) const = 0;

  // g += weight * d/dparams log p(x|y), block-aligned with blocks().
  virtual void accumulate_grad(const Vec& x, const Vec& y, double weight,
                               LayerGrad& g) const = 0;

  virtual std::vector<BlockRef> blocks() = 0;
  std::vector<BlockRef> blocks() const {
    return const_cast<Layer*>(this)->blocks();
  }

  virtual std::unique_ptr<Layer> clone() const = 0;

  // Fills weight blocks with U(-1/sqrt(fan_in), +1/sqrt(fan_in)) and zeroes
  // biases; one uniform per entry, block order, column-major within a block.
  virtual void init_params(RngStream& rng) = 0;

  LayerGrad make_grad() const {
    LayerGrad out;
    for (const auto& b : blocks()) out.g.emplace_back(Mat::Zero(b.m->rows(), b.m->cols()));
    return out;
  }

  long long num_params() const {
    long long n = 0;
    for (const auto& b : blocks()) n += b.m->size();
    return n;
  }
};

std::unique_ptr<Layer> make_layer(const std::string& family, int d_out, int d_in,
                                  int nade_hidden = 0);

// Conditionally independent Bernoulli units with logits W y + b.
class SbnLayer : public Layer {
 public:
  SbnLayer(int d_out, int d_in);

  const char* family() const override { return "sbn"; }
  int d_out() const override { return static_cast<int>(b.rows()); }
  int d_in() const override { return static_cast<int>(W.cols()); }

  double log_prob(const Vec& x, const Vec& y) const override;
  Vec sample(const Vec& y, RngStream& rng, double* log_prob_out,
             Vec* probs_out) const override;
  void accumulate_grad(const Vec& x, const Vec& y, double weight,
                       LayerGrad& g) const override;
  std::vector<BlockRef> blocks() override;
  std::unique_ptr<Layer> clone() const override;
  void init_params(RngStream& rng) override;

  Mat W;  // d_out x d_in (absent from blocks() when d_in == 0)
  Mat b;  // d_out x 1
};

// SBN plus strictly-lower-triangular autoregressive links among the output
// units: logits_i = (W y)_i + sum_{j<i} S_ij x_j + b_i.
class ArSbnLayer : public Layer {
 public:
  ArSbnLayer(int d_out, int d_in);

  const char* family() const override { return "arsbn"; }
  int d_out() const override { return static_cast<int>(b.rows()); }
  int d_in() const override { return static_cast<int>(W.cols()); }

  double log_prob(const Vec& x, const Vec& y) const override;
  Vec sample(const Vec& y, RngStream& rng, double* log_prob_out,
             Vec* probs_out) const override;
  void accumulate_grad(const Vec& x, const Vec& y, double weight,
                       LayerGrad& g) const override;
  std::vector<BlockRef> blocks() override;
  std::unique_ptr<Layer> clone() const override;
  void init_params(RngStream& rng) override;

  Mat W;  // d_out x d_in
  Mat S;  // d_out x d_out, strictly lower triangular (upper+diag kept at 0)
  Mat b;  // d_out x 1
};

// Autoregressive layer with a shared accumulating hidden state, conditioned on
// the parent layer y:
//   act_0 = a + Ua y
//   hid_i = sigmoid(act_i)
//   logit_i = V.row(i) hid_i + (Ub y)_i + b_i
//   act_{i+1} = act_i + W.col(i) * x_i
class CNadeLayer : public Layer {
 public:
  CNadeLayer(int d_out, int d_in, int hidden);

  const char* family() const override { return "nade"; }
  int d_out() const override { return static_cast<int>(b.rows()); }
  int d_in() const override { return static_cast<int>(Ua.cols()); }
  int hidden() const { return static_cast<int>(a.rows()); }

  double log_prob(const Vec& x, const Vec& y) const override;
  Vec sample(const Vec& y, RngStream& rng, double* log_prob_out,
             Vec* probs_out) const override;
  void accumulate_grad(const Vec& x, const Vec& y, double weight,
                       LayerGrad& g) const override;
  std::vector<BlockRef> blocks() override;
  std::unique_ptr<Layer> clone() const override;
  void init_params(RngStream& rng) override;

  Mat W;   // hidden x d_out: column i feeds x_i into the running activation
  Mat V;   // d_out x hidden
  Mat a;   // hidden x 1
  Mat b;   // d_out x 1
  Mat Ua;  // hidden x d_in
  Mat Ub;  // d_out x d_in
};

}  // namespace rws
