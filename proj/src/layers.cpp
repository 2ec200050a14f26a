#include "rws/layers.hpp"

#include <cmath>

#include "rws/errors.hpp"

namespace rws {

namespace {

void uniform_fill(Mat& m, double scale, RngStream& rng) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      m(r, c) = scale * (2.0 * rng.uniform() - 1.0);
}

double inv_sqrt(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

std::unique_ptr<Layer> make_layer(const std::string& family, int d_out, int d_in,
                                  int nade_hidden) {
  if (d_out < 1) throw ShapeError("layer width must be >= 1, got " + std::to_string(d_out));
  if (d_in < 0) throw ShapeError("layer input width must be >= 0");
  if (family == "sbn") return std::make_unique<SbnLayer>(d_out, d_in);
  if (family == "arsbn") return std::make_unique<ArSbnLayer>(d_out, d_in);
  if (family == "nade")
    return std::make_unique<CNadeLayer>(d_out, d_in, nade_hidden > 0 ? nade_hidden : d_out);
  throw ConfigError("unknown layer family '" + family + "' (expected sbn, arsbn or nade)");
}

// ---------------------------------------------------------------- SbnLayer

SbnLayer::SbnLayer(int d_out, int d_in)
    : W(Mat::Zero(d_out, d_in)), b(Mat::Zero(d_out, 1)) {}

double SbnLayer::log_prob(const Vec& x, const Vec& y) const {
  double lp = 0.0;
  if (d_in() == 0) {
    for (int i = 0; i < d_out(); ++i) lp += bernoulli_log_prob(x[i], b(i, 0));
    return lp;
  }
  Vec z = W * y + b.col(0);
  for (int i = 0; i < d_out(); ++i) lp += bernoulli_log_prob(x[i], z[i]);
  return lp;
}

Vec SbnLayer::sample(const Vec& y, RngStream& rng, double* log_prob_out,
                     Vec* probs_out) const {
  Vec z = d_in() == 0 ? Vec(b.col(0)) : Vec(W * y + b.col(0));
  Vec x(d_out());
  double lp = 0.0;
  if (probs_out) probs_out->resize(d_out());
  for (int i = 0; i < d_out(); ++i) {
    const double p = sigmoid(z[i]);
    x[i] = rng.uniform() < p ? 1.0 : 0.0;
    lp += bernoulli_log_prob(x[i], z[i]);
    if (probs_out) (*probs_out)[i] = p;
  }
  if (log_prob_out) *log_prob_out = lp;
  return x;
}

void SbnLayer::accumulate_grad(const Vec& x, const Vec& y, double weight,
                               LayerGrad& g) const {
  // d/dz log Bern(x; sigmoid(z)) = x - sigmoid(z)
  Vec e(d_out());
  if (d_in() == 0) {
    for (int i = 0; i < d_out(); ++i) e[i] = weight * (x[i] - sigmoid(b(i, 0)));
    g.g[0].col(0) += e;
    return;
  }
  Vec z = W * y + b.col(0);
  for (int i = 0; i < d_out(); ++i) e[i] = weight * (x[i] - sigmoid(z[i]));
  g.g[0].noalias() += e * y.transpose();
  g.g[1].col(0) += e;
}

std::vector<BlockRef> SbnLayer::blocks() {
  if (d_in() == 0) return {{"b", &b}};
  return {{"W", &W}, {"b", &b}};
}

std::unique_ptr<Layer> SbnLayer::clone() const {
  return std::make_unique<SbnLayer>(*this);
}

void SbnLayer::init_params(RngStream& rng) {
  if (d_in() > 0) uniform_fill(W, inv_sqrt(d_in()), rng);
  b.setZero();
}

// -------------------------------------------------------------- ArSbnLayer

ArSbnLayer::ArSbnLayer(int d_out, int d_in)
    : W(Mat::Zero(d_out, d_in)), S(Mat::Zero(d_out, d_out)), b(Mat::Zero(d_out, 1)) {}

double ArSbnLayer::log_prob(const Vec& x, const Vec& y) const {
  // S is strictly lower triangular, so (S x)_i only sees x_{<i}.
  Vec z = S * x + b.col(0);
  if (d_in() > 0) z.noalias() += W * y;
  double lp = 0.0;
  for (int i = 0; i < d_out(); ++i) lp += bernoulli_log_prob(x[i], z[i]);
  return lp;
}

Vec ArSbnLayer::sample(const Vec& y, RngStream& rng, double* log_prob_out,
                       Vec* probs_out) const {
  Vec base = d_in() == 0 ? Vec(b.col(0)) : Vec(W * y + b.col(0));
  Vec x(d_out());
  double lp = 0.0;
  if (probs_out) probs_out->resize(d_out());
  for (int i = 0; i < d_out(); ++i) {
    double z = base[i];
    if (i > 0) z += S.row(i).head(i).dot(x.head(i));
    const double p = sigmoid(z);
    x[i] = rng.uniform() < p ? 1.0 : 0.0;
    lp += bernoulli_log_prob(x[i], z);
    if (probs_out) (*probs_out)[i] = p;
  }
  if (log_prob_out) *log_prob_out = lp;
  return x;
}

void ArSbnLayer::accumulate_grad(const Vec& x, const Vec& y, double weight,
                                 LayerGrad& g) const {
  Vec z = S * x + b.col(0);
  if (d_in() > 0) z.noalias() += W * y;
  Vec e(d_out());
  for (int i = 0; i < d_out(); ++i) e[i] = weight * (x[i] - sigmoid(z[i]));
  int blk = 0;
  if (d_in() > 0) {
    g.g[blk].noalias() += e * y.transpose();
    ++blk;
  }
  // only the strictly lower triangle of S is a free parameter
  Mat& gS = g.g[blk];
  for (int i = 1; i < d_out(); ++i)
    gS.row(i).head(i) += e[i] * x.head(i).transpose();
  g.g[blk + 1].col(0) += e;
}

std::vector<BlockRef> ArSbnLayer::blocks() {
  if (d_in() == 0) return {{"S", &S}, {"b", &b}};
  return {{"W", &W}, {"S", &S}, {"b", &b}};
}

std::unique_ptr<Layer> ArSbnLayer::clone() const {
  return std::make_unique<ArSbnLayer>(*this);
}

void ArSbnLayer::init_params(RngStream& rng) {
  if (d_in() > 0) uniform_fill(W, inv_sqrt(d_in()), rng);
  // fill then mask keeps the one-uniform-per-entry contract simple
  uniform_fill(S, inv_sqrt(d_out()), rng);
  S.triangularView<Eigen::Upper>().setZero();
  b.setZero();
}

// -------------------------------------------------------------- CNadeLayer

CNadeLayer::CNadeLayer(int d_out, int d_in, int hidden)
    : W(Mat::Zero(hidden, d_out)),
      V(Mat::Zero(d_out, hidden)),
      a(Mat::Zero(hidden, 1)),
      b(Mat::Zero(d_out, 1)),
      Ua(Mat::Zero(hidden, d_in)),
      Ub(Mat::Zero(d_out, d_in)) {
  if (hidden < 1) throw ShapeError("nade hidden width must be >= 1");
}

double CNadeLayer::log_prob(const Vec& x, const Vec& y) const {
  Vec act = a.col(0);
  if (d_in() > 0) act.noalias() += Ua * y;
  Vec uby;
  if (d_in() > 0) uby = Ub * y;
  double lp = 0.0;
  Vec hid(hidden());
  for (int i = 0; i < d_out(); ++i) {
    for (int j = 0; j < hidden(); ++j) hid[j] = sigmoid(act[j]);
    double z = V.row(i).dot(hid) + b(i, 0);
    if (d_in() > 0) z += uby[i];
    lp += bernoulli_log_prob(x[i], z);
    if (x[i] > 0.5) act += W.col(i);
  }
  return lp;
}

Vec CNadeLayer::sample(const Vec& y, RngStream& rng, double* log_prob_out,
                       Vec* probs_out) const {
  Vec act = a.col(0);
  if (d_in() > 0) act.noalias() += Ua * y;
  Vec uby;
  if (d_in() > 0) uby = Ub * y;
  Vec x(d_out());
  double lp = 0.0;
  if (probs_out) probs_out->resize(d_out());
  Vec hid(hidden());
  for (int i = 0; i < d_out(); ++i) {
    for (int j = 0; j < hidden(); ++j) hid[j] = sigmoid(act[j]);
    double z = V.row(i).dot(hid) + b(i, 0);
    if (d_in() > 0) z += uby[i];
    const double p = sigmoid(z);
    x[i] = rng.uniform() < p ? 1.0 : 0.0;
    lp += bernoulli_log_prob(x[i], z);
    if (probs_out) (*probs_out)[i] = p;
    if (x[i] > 0.5) act += W.col(i);
  }
  if (log_prob_out) *log_prob_out = lp;
  return x;
}

void CNadeLayer::accumulate_grad(const Vec& x, const Vec& y, double weight,
                                 LayerGrad& g) const {
  const int D = d_out();
  const int H = hidden();
  Vec act = a.col(0);
  if (d_in() > 0) act.noalias() += Ua * y;
  Vec uby;
  if (d_in() > 0) uby = Ub * y;

  // forward pass, keeping per-step hidden activations and logit residuals
  Mat hids(H, D);
  Vec e(D);
  for (int i = 0; i < D; ++i) {
    for (int j = 0; j < H; ++j) hids(j, i) = sigmoid(act[j]);
    double z = V.row(i).dot(hids.col(i)) + b(i, 0);
    if (d_in() > 0) z += uby[i];
    e[i] = weight * (x[i] - sigmoid(z));
    if (x[i] > 0.5) act += W.col(i);
  }

  int blk = 0;
  Mat& gW = g.g[blk++];
  Mat& gV = g.g[blk++];
  Mat& ga = g.g[blk++];
  Mat& gb = g.g[blk++];

  // da_i = dlogit_i/dact_i contribution: V.row(i)^T e_i * hid*(1-hid)
  // act_i depends on a, Ua y and W.col(j) x_j for j < i, hence the reverse
  // suffix sum for W.
  Vec da(H);
  Vec suffix = Vec::Zero(H);
  Vec total = Vec::Zero(H);
  for (int i = D - 1; i >= 0; --i) {
    for (int j = 0; j < H; ++j) {
      const double h = hids(j, i);
      da[j] = V(i, j) * e[i] * h * (1.0 - h);
    }
    if (x[i] > 0.5) gW.col(i) += suffix;  // dact_k/dW.col(i) = x_i for k > i
    suffix += da;
    total += da;
    gV.row(i) += e[i] * hids.col(i).transpose();
    gb(i, 0) += e[i];
  }
  ga.col(0) += total;
  if (d_in() > 0) {
    g.g[blk].noalias() += total * y.transpose();      // Ua
    g.g[blk + 1].noalias() += e * y.transpose();      // Ub
  }
}

std::vector<BlockRef> CNadeLayer::blocks() {
  if (d_in() == 0) return {{"W", &W}, {"V", &V}, {"a", &a}, {"b", &b}};
  return {{"W", &W}, {"V", &V}, {"a", &a}, {"b", &b}, {"Ua", &Ua}, {"Ub", &Ub}};
}

std::unique_ptr<Layer> CNadeLayer::clone() const {
  return std::make_unique<CNadeLayer>(*this);
}

void CNadeLayer::init_params(RngStream& rng) {
  uniform_fill(W, inv_sqrt(d_out()), rng);
  uniform_fill(V, inv_sqrt(hidden()), rng);
  a.setZero();
  b.setZero();
  if (d_in() > 0) {
    uniform_fill(Ua, inv_sqrt(d_in()), rng);
    uniform_fill(Ub, inv_sqrt(d_in()), rng);
  }
}

}  // namespace rws
