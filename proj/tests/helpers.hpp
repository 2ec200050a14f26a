#pragma once
#include <memory>
#include <vector>

#include "rws/layers.hpp"
#include "rws/model.hpp"
#include "rws/model_spec.hpp"
#include "rws/oracle.hpp"
#include "rws/rng.hpp"

namespace rws::test {

// Fills every parameter block with U(-amp, +amp), preserving each family's
// structural zeros (the AR link matrix stays strictly lower triangular).
inline void randomize_params(LayerStack& stack, RngStream& rng, double amp = 1.0) {
  for (size_t l = 0; l < stack.layers.size(); ++l) {
    RngStream ls = rng.substream(l);
    int at = 0;
    for (auto& blk : stack.layers[l]->blocks()) {
      RngStream bs = ls.substream(at++);
      Mat& m = *blk.m;
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
          m(r, c) = amp * (2.0 * bs.uniform() - 1.0);
    }
    if (auto* ar = dynamic_cast<ArSbnLayer*>(stack.layers[l].get()))
      ar->S.triangularView<Eigen::Upper>().setZero();
  }
}

inline GenerativeModel random_generative(const std::string& spec, int visible,
                                         std::uint64_t seed, double amp = 1.0) {
  GenerativeModel p = build_generative(parse_model_spec(spec), visible);
  RngStream rng(seed, 101);
  randomize_params(p, rng, amp);
  return p;
}

inline InferenceModel random_inference(const std::string& spec, int visible,
                                       std::uint64_t seed, double amp = 1.0) {
  InferenceModel q = build_inference(parse_model_spec(spec), visible);
  RngStream rng(seed, 202);
  randomize_params(q, rng, amp);
  return q;
}

// The AR link matrix is only parameterized on its strictly lower triangle;
// the rest is structurally zero and must not be finite-difference perturbed.
inline bool is_free_entry(const Layer& layer, const std::string& block, Eigen::Index r,
                          Eigen::Index c) {
  if (block == "S" && dynamic_cast<const ArSbnLayer*>(&layer)) return c < r;
  return true;
}

// Central finite differences of layer->log_prob over every free parameter.
inline LayerGrad fd_layer_grad(Layer& layer, const Vec& x, const Vec& y,
                               double eps = 1e-5) {
  LayerGrad out = layer.make_grad();
  auto blocks = layer.blocks();
  for (size_t k = 0; k < blocks.size(); ++k) {
    Mat& m = *blocks[k].m;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (!is_free_entry(layer, blocks[k].name, r, c)) continue;
        const double orig = m(r, c);
        m(r, c) = orig + eps;
        const double up = layer.log_prob(x, y);
        m(r, c) = orig - eps;
        const double dn = layer.log_prob(x, y);
        m(r, c) = orig;
        out.g[k](r, c) = (up - dn) / (2.0 * eps);
      }
  }
  return out;
}

// Central finite differences of the enumerated log-marginal.
inline ModelGrad fd_marginal_grad(GenerativeModel& p, const Vec& x, double eps = 1e-5) {
  ModelGrad out = p.make_grad();
  for (size_t l = 0; l < p.layers.size(); ++l) {
    auto blocks = p.layers[l]->blocks();
    for (size_t k = 0; k < blocks.size(); ++k) {
      Mat& m = *blocks[k].m;
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          if (!is_free_entry(*p.layers[l], blocks[k].name, r, c)) continue;
          const double orig = m(r, c);
          m(r, c) = orig + eps;
          const double up = exact_log_marginal(p, x);
          m(r, c) = orig - eps;
          const double dn = exact_log_marginal(p, x);
          m(r, c) = orig;
          out.layers[l].g[k](r, c) = (up - dn) / (2.0 * eps);
        }
    }
  }
  return out;
}

inline double max_abs_diff(const ModelGrad& a, const ModelGrad& b) {
  double worst = 0.0;
  for (size_t l = 0; l < a.layers.size(); ++l)
    for (size_t k = 0; k < a.layers[l].g.size(); ++k) {
      const double d = (a.layers[l].g[k] - b.layers[l].g[k]).cwiseAbs().maxCoeff();
      if (d > worst) worst = d;
    }
  return worst;
}

inline double max_abs_param_diff(const LayerStack& a, const LayerStack& b) {
  double worst = 0.0;
  for (size_t l = 0; l < a.layers.size(); ++l) {
    const auto ba = a.layers[l]->blocks();
    const auto bb = b.layers[l]->blocks();
    for (size_t k = 0; k < ba.size(); ++k) {
      const double d = (*ba[k].m - *bb[k].m).cwiseAbs().maxCoeff();
      if (d > worst) worst = d;
    }
  }
  return worst;
}

inline Vec bits_from_index(std::uint64_t idx, int n) {
  Vec x(n);
  for (int u = 0; u < n; ++u) x[u] = (idx >> (n - 1 - u)) & 1u ? 1.0 : 0.0;
  return x;
}

}  // namespace rws::test
