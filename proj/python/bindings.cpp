#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rws/analysis.hpp"
#include "rws/data.hpp"
#include "rws/errors.hpp"
#include "rws/estimators.hpp"
#include "rws/model_spec.hpp"
#include "rws/oracle.hpp"
#include "rws/training.hpp"

namespace py = pybind11;
using namespace rws;

namespace {

TrainConfig config_from_kwargs(const py::dict& kw) {
  TrainConfig cfg;
  for (const auto& item : kw) {
    const std::string key = py::cast<std::string>(item.first);
    if (key == "k") cfg.k_train = py::cast<int>(item.second);
    else if (key == "lr") cfg.learning_rate = py::cast<double>(item.second);
    else if (key == "momentum") cfg.momentum = py::cast<double>(item.second);
    else if (key == "batch_size") cfg.batch_size = py::cast<int>(item.second);
    else if (key == "q_update")
      cfg.q_update_mode = parse_q_update_mode(py::cast<std::string>(item.second));
    else if (key == "lr_decay") cfg.lr_decay_per_epoch = py::cast<double>(item.second);
    else if (key == "epochs") cfg.epochs = py::cast<int>(item.second);
    else if (key == "seed") cfg.seed = py::cast<std::uint64_t>(item.second);
    else if (key == "grad_clip") cfg.grad_clip = py::cast<double>(item.second);
    else throw ConfigError("unknown train option '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

// A generative/inference pair with the operations the CLI exposes, minus the
// file plumbing.
struct ModelPair {
  GenerativeModel p;
  InferenceModel q;

  ModelPair(const std::string& p_spec, const std::string& q_spec, int visible,
            std::uint64_t seed) {
    p = build_generative(parse_model_spec(p_spec), visible);
    q = build_inference(parse_model_spec(q_spec), visible);
    RngStream root(seed);
    RngStream ip = channel(root, StreamChannel::InitP);
    RngStream iq = channel(root, StreamChannel::InitQ);
    p.init_params(ip);
    q.init_params(iq);
  }
  ModelPair(GenerativeModel pp, InferenceModel qq) : p(std::move(pp)), q(std::move(qq)) {}

  std::string describe_p() const { return describe(p); }
  std::string describe_q() const { return describe(q); }

  py::list train(const Mat& data, const py::kwargs& kw) {
    const TrainConfig cfg = config_from_kwargs(kw);
    OptimizerState opt = make_optimizer_state(p, q);
    py::list rows;
    for (int e = 0; e < cfg.epochs; ++e) {
      const EpochMetrics m = train_epoch(p, q, data, cfg, opt, e);
      py::dict row;
      row["epoch"] = e + 1;
      row["ll"] = m.mean_ll;
      row["ess"] = m.mean_ess;
      rows.append(row);
    }
    return rows;
  }

  Vec evaluate(const Mat& data, long long k, std::uint64_t seed) const {
    RngStream root(seed);
    RngStream es = channel(root, StreamChannel::Eval);
    return evaluate_dataset_ll(p, q, data, k, es);
  }

  double log_marginal(const Vec& x, int k, std::uint64_t seed) const {
    RngStream root(seed);
    const ImportanceBatch b =
        draw_importance_batch(p, q, x, k, channel(root, StreamChannel::Eval));
    return log_marginal_estimate(b);
  }

  double exact_log_marginal_of(const Vec& x) const { return exact_log_marginal(p, x); }

  Mat sample(int n, std::uint64_t seed) const {
    RngStream root(seed);
    RngStream ss = channel(root, StreamChannel::Sampling);
    Mat out(n, p.visible_width());
    for (int i = 0; i < n; ++i) {
      RngStream is = ss.substream(i);
      out.row(i) = p.ancestral_sample(is).transpose();
    }
    return out;
  }

  void save(const std::string& dir) const {
    save_checkpoint(dir, p, q, TrainConfig{}, make_optimizer_state(p, q), 0);
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reweighted wake-sleep core (C++)";

  py::register_exception<RwsError>(m, "RwsError");

  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"),
           py::arg("stream_id") = 0)
      .def("uniform", &RngStream::uniform)
      .def("substream", &RngStream::substream);

  py::class_<ModelPair>(m, "ModelPair")
      .def(py::init<const std::string&, const std::string&, int, std::uint64_t>(),
           py::arg("p"), py::arg("q"), py::arg("visible"), py::arg("seed") = 0)
      .def_property_readonly("p_spec", &ModelPair::describe_p)
      .def_property_readonly("q_spec", &ModelPair::describe_q)
      .def("train", &ModelPair::train, py::arg("data"),
           "Run epochs of the training loop; returns per-epoch metrics dicts. "
           "Keywords: k, lr, momentum, batch_size, q_update, lr_decay, epochs, "
           "seed, grad_clip.")
      .def("evaluate", &ModelPair::evaluate, py::arg("data"), py::arg("k") = 1000,
           py::arg("seed") = 0, "Per-datapoint log-marginal estimates.")
      .def("log_marginal", &ModelPair::log_marginal, py::arg("x"), py::arg("k") = 1000,
           py::arg("seed") = 0)
      .def("exact_log_marginal", &ModelPair::exact_log_marginal_of, py::arg("x"),
           "Enumeration oracle (small latent spaces only).")
      .def("sample", &ModelPair::sample, py::arg("n"), py::arg("seed") = 0)
      .def("save", &ModelPair::save, py::arg("dir"));

  m.def(
      "load_pair",
      [](const std::string& dir) {
        Checkpoint ck = load_checkpoint(dir);
        return ModelPair(std::move(ck.p), std::move(ck.q));
      },
      py::arg("dir"), "Load a model pair from a checkpoint directory.");

  m.def(
      "bars_dataset",
      [](int side, int n, std::uint64_t seed) {
        RngStream root(seed);
        RngStream s = channel(root, StreamChannel::Data);
        return make_bars_dataset(side, n, s).rows;
      },
      py::arg("side"), py::arg("n"), py::arg("seed") = 0);

  m.def(
      "bars_process_ll",
      [](int side, const Mat& rows) { return bars_process_ll(side, rows); },
      py::arg("side"), py::arg("rows"),
      "Exact mean log-likelihood of rows under the bars generating process.");

  m.def(
      "load_amat", [](const std::string& path) { return load_amat(path).rows; },
      py::arg("path"));
}
