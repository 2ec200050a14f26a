#include "rws/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "rws/analysis.hpp"
#include "rws/data.hpp"
#include "rws/errors.hpp"
#include "rws/json_io.hpp"
#include "rws/model_spec.hpp"
#include "rws/oracle.hpp"
#include "rws/training.hpp"

namespace rws {

namespace fs = std::filesystem;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

struct RunConfig {
  std::string p_spec;
  std::string q_spec;

  std::string train_path, valid_path, test_path;
  int bars_side = 0;
  int bars_train_n = 0;
  int bars_valid_n = 0;
  std::uint64_t bars_seed = 0;

  TrainConfig train;
  long long eval_k = 100000;
  long long k_valid = 1000;
  int chunk = 1024;
  int bootstrap_resamples = 1000;

  std::string out_dir = "run";
  int workers = 1;
  bool visible_bias_from_marginals = true;
};

RunConfig parse_run_config(const json& j) {
  reject_unknown_keys(j,
                      {"model", "data", "train", "eval", "out", "workers", "init", "name",
                       "notes", "expected_test_nll"},
                      "run config");
  RunConfig cfg;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown_keys(m, {"p", "q"}, "model");
    cfg.p_spec = m.value("p", "");
    cfg.q_spec = m.value("q", "");
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown_keys(d, {"train", "valid", "test", "bars"}, "data");
    cfg.train_path = d.value("train", "");
    cfg.valid_path = d.value("valid", "");
    cfg.test_path = d.value("test", "");
    if (d.contains("bars")) {
      const auto& b = d.at("bars");
      reject_unknown_keys(b, {"side", "train_n", "valid_n", "seed"}, "data.bars");
      cfg.bars_side = b.value("side", 3);
      cfg.bars_train_n = b.value("train_n", 1000);
      cfg.bars_valid_n = b.value("valid_n", 0);
      cfg.bars_seed = b.value("seed", std::uint64_t{0});
    }
  }
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    reject_unknown_keys(e, {"k", "k_valid", "chunk", "bootstrap_resamples"}, "eval");
    cfg.eval_k = e.value("k", cfg.eval_k);
    cfg.k_valid = e.value("k_valid", cfg.k_valid);
    cfg.chunk = e.value("chunk", cfg.chunk);
    cfg.bootstrap_resamples = e.value("bootstrap_resamples", cfg.bootstrap_resamples);
  }
  if (j.contains("init")) {
    const auto& i = j.at("init");
    reject_unknown_keys(i, {"visible_bias_from_marginals"}, "init");
    cfg.visible_bias_from_marginals =
        i.value("visible_bias_from_marginals", cfg.visible_bias_from_marginals);
  }
  cfg.out_dir = j.value("out", cfg.out_dir);
  cfg.workers = j.value("workers", cfg.workers);
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_run_config(j);
}

std::optional<BinaryDataset> load_split(const RunConfig& cfg, const std::string& split) {
  if (cfg.bars_side > 0) {
    RngStream root(cfg.bars_seed);
    RngStream stream = channel(root, StreamChannel::Data);
    if (split == "train") {
      RngStream s = stream.substream(0);
      auto ds = make_bars_dataset(cfg.bars_side, cfg.bars_train_n, s);
      ds.split = split;
      return ds;
    }
    if (cfg.bars_valid_n > 0 && (split == "valid" || split == "test")) {
      RngStream s = stream.substream(split == "valid" ? 1 : 2);
      auto ds = make_bars_dataset(cfg.bars_side, cfg.bars_valid_n, s);
      ds.split = split;
      return ds;
    }
    return std::nullopt;
  }
  const std::string& path = split == "train"   ? cfg.train_path
                            : split == "valid" ? cfg.valid_path
                                               : cfg.test_path;
  if (path.empty()) return std::nullopt;
  auto ds = load_amat(path);
  ds.split = split;
  return ds;
}

void append_metrics(std::ofstream& out, int epoch, const std::string& split, double ll,
                    double ess, double lr, double seconds) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "%d,%s,%.10g,%.10g,%.10g,%.3f\n", epoch, split.c_str(),
                ll, ess, lr, seconds);
  out << buf;
  out.flush();
}

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

int cmd_train(const std::string& config_path, const std::optional<std::string>& resume,
              const json& overrides) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + config_path + "': " + e.what());
  }
  // CLI overrides land in the json before parsing so validation sees the result
  for (const auto& [key, val] : overrides.items()) {
    if (key == "out")
      j["out"] = val;
    else if (key == "workers")
      j["workers"] = val;
    else
      j["train"][key] = val;
  }
  RunConfig cfg = parse_run_config(j);
  if (cfg.p_spec.empty() || cfg.q_spec.empty())
    throw ConfigError("config must name model.p and model.q");

  const auto train_ds = load_split(cfg, "train");
  if (!train_ds) throw ConfigError("config names no training data");
  const auto valid_ds = load_split(cfg, "valid");
  const int visible = train_ds->d();

  GenerativeModel p;
  InferenceModel q;
  OptimizerState opt;
  int start_epoch = 0;
  if (resume) {
    Checkpoint ck = load_checkpoint(*resume);
    const int epochs_target = cfg.train.epochs;
    const double lr0 = cfg.train.learning_rate;
    cfg.train = ck.cfg;
    cfg.train.epochs = epochs_target;
    cfg.train.learning_rate = lr0;
    p = std::move(ck.p);
    q = std::move(ck.q);
    opt = std::move(ck.opt);
    start_epoch = ck.epoch;
    if (p.visible_width() != visible)
      throw ShapeError("checkpoint visible width does not match the dataset");
  } else {
    p = build_generative(parse_model_spec(cfg.p_spec), visible);
    q = build_inference(parse_model_spec(cfg.q_spec), visible);
    RngStream root(cfg.train.seed);
    RngStream init_p = channel(root, StreamChannel::InitP);
    RngStream init_q = channel(root, StreamChannel::InitQ);
    p.init_params(init_p);
    q.init_params(init_q);
    if (cfg.visible_bias_from_marginals) {
      auto blocks = p.layers.back()->blocks();
      Mat& bias = *blocks.back().m;  // every family lists "b" last among its
                                     // unconditional-direction blocks
      for (int u = 0; u < visible; ++u) {
        const double m =
            std::clamp(train_ds->rows.col(u).mean(), 1e-3, 1.0 - 1e-3);
        bias(u, 0) = logit(m);
      }
    }
    opt = make_optimizer_state(p, q);
  }
  validate_pair(p, q);

  fs::create_directories(fs::path(cfg.out_dir) / "checkpoints");
  std::ofstream metrics(fs::path(cfg.out_dir) / "metrics.csv",
                        resume ? std::ios::app : std::ios::out);
  if (!metrics) throw RwsError("cannot write metrics.csv in '" + cfg.out_dir + "'");
  if (!resume) metrics << "epoch,split,ll_estimate,ess_mean,lr,seconds\n";

  auto checkpoint_dir = [&](int epoch) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch-%04d", epoch);
    return (fs::path(cfg.out_dir) / "checkpoints" / name).string();
  };

  if (start_epoch == 0)
    save_checkpoint(checkpoint_dir(0), p, q, cfg.train, opt, 0);

  RngStream root(cfg.train.seed);
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int epoch = start_epoch; epoch < cfg.train.epochs; ++epoch) {
    const double t0 = now_seconds();
    const EpochMetrics em =
        train_epoch(p, q, train_ds->rows, cfg.train, opt, epoch, cfg.workers);
    const double train_secs = now_seconds() - t0;
    const double lr = cfg.train.lr_at_epoch(epoch);
    append_metrics(metrics, epoch + 1, "train", em.mean_ll, em.mean_ess, lr, train_secs);

    double score = em.mean_ll;
    if (valid_ds) {
      const double v0 = now_seconds();
      RngStream vs = channel(root, StreamChannel::Validation).substream(epoch);
      Vec ess;
      const Vec ll = evaluate_dataset_ll(p, q, valid_ds->rows, cfg.k_valid, vs, cfg.chunk,
                                         &ess, cfg.workers);
      score = ll.mean();
      append_metrics(metrics, epoch + 1, "valid", score, ess.mean(), lr,
                     now_seconds() - v0);
    }

    save_checkpoint(checkpoint_dir(epoch + 1), p, q, cfg.train, opt, epoch + 1);
    if (score > best_ll) {
      best_ll = score;
      save_checkpoint((fs::path(cfg.out_dir) / "checkpoints" / "best").string(), p, q,
                      cfg.train, opt, epoch + 1);
    }
  }
  std::cout << "trained " << describe(p) << " / " << describe(q) << " for "
            << cfg.train.epochs - start_epoch << " epochs; outputs in " << cfg.out_dir
            << "\n";
  return 0;
}

struct BarsArg {
  int side = 0;
  int n = 0;
  std::uint64_t seed = 0;
};

BarsArg parse_bars_arg(const std::string& s) {
  BarsArg b;
  if (std::sscanf(s.c_str(), "%d:%d:%llu", &b.side, &b.n,
                  reinterpret_cast<unsigned long long*>(&b.seed)) != 3)
    throw ConfigError("--bars expects SIDE:N:SEED, got '" + s + "'");
  return b;
}

Mat load_eval_rows(const std::string& data_path, const std::string& bars_arg) {
  if (!data_path.empty()) return load_amat(data_path).rows;
  if (!bars_arg.empty()) {
    const BarsArg b = parse_bars_arg(bars_arg);
    RngStream root(b.seed);
    RngStream s = channel(root, StreamChannel::Data);
    return make_bars_dataset(b.side, b.n, s).rows;
  }
  throw ConfigError("need --data PATH or --bars SIDE:N:SEED");
}

int cmd_eval(const std::string& checkpoint, const std::string& data_path,
             const std::string& bars_arg, long long K, std::uint64_t seed, int chunk,
             int workers, int bootstrap_resamples, const std::string& out_path) {
  Checkpoint ck = load_checkpoint(checkpoint);
  const Mat rows = load_eval_rows(data_path, bars_arg);
  if (rows.cols() != ck.p.visible_width())
    throw ShapeError("dataset width " + std::to_string(rows.cols()) +
                     " does not match model visible width " +
                     std::to_string(ck.p.visible_width()));
  RngStream root(seed);
  RngStream es = channel(root, StreamChannel::Eval);
  Vec ess;
  const Vec ll = evaluate_dataset_ll(ck.p, ck.q, rows, K, es, chunk, &ess, workers);
  const double mean = ll.mean();

  // datapoint bootstrap for a 95% CI on the mean
  const int N = static_cast<int>(ll.size());
  RngStream bs = es.substream(static_cast<std::uint64_t>(N) + 7);
  Vec boots(bootstrap_resamples);
  for (int r = 0; r < bootstrap_resamples; ++r) {
    RngStream rs = bs.substream(r);
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += ll[static_cast<int>(rs.below(N))];
    boots[r] = s / N;
  }
  std::sort(boots.data(), boots.data() + boots.size());
  const auto pick = [&](double frac) {
    const int i = std::clamp(static_cast<int>(frac * (bootstrap_resamples - 1)), 0,
                             bootstrap_resamples - 1);
    return boots[i];
  };
  char line[256];
  std::snprintf(line, sizeof line,
                "mean LL estimate: %.6f  (95%% CI [%.6f, %.6f], n=%d, K=%lld, mean "
                "ESS=%.1f)\n",
                mean, pick(0.025), pick(0.975), N, K, ess.mean());
  std::cout << line;
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw RwsError("cannot write '" + out_path + "'");
    out << line;
  }
  return 0;
}

int cmd_sample(const std::string& checkpoint, int n, const std::string& out_path,
               int width, int height, std::uint64_t seed) {
  if (n < 1) throw ConfigError("--n must be >= 1");
  Checkpoint ck = load_checkpoint(checkpoint);
  const int visible = ck.p.visible_width();
  if (width <= 0 || height <= 0) {
    const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(visible))));
    if (s * s != visible)
      throw ConfigError("visible width " + std::to_string(visible) +
                        " is not square; pass --width and --height");
    width = height = s;
  } else if (width * height != visible) {
    throw ConfigError("--width*--height must equal the visible width");
  }

  RngStream root(seed);
  RngStream ss = channel(root, StreamChannel::Sampling);
  const int grid_cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int grid_rows = (n + grid_cols - 1) / grid_cols;
  const int W = grid_cols * width + (grid_cols - 1);
  const int H = grid_rows * height + (grid_rows - 1);
  std::vector<unsigned char> img(static_cast<size_t>(W) * H, 0);

  for (int i = 0; i < n; ++i) {
    RngStream is = ss.substream(i);
    Vec probs;
    ck.p.ancestral_sample(is, nullptr, nullptr, &probs);
    const int gr = i / grid_cols, gc = i % grid_cols;
    const int y0 = gr * (height + 1), x0 = gc * (width + 1);
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        img[static_cast<size_t>(y0 + r) * W + (x0 + c)] =
            static_cast<unsigned char>(std::lround(255.0 * probs[r * width + c]));
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw RwsError("cannot write '" + out_path + "'");
  out << "P5\n" << W << " " << H << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()),
            static_cast<std::streamsize>(img.size()));
  std::cout << "wrote " << n << " sample tiles (" << W << "x" << H << ") to " << out_path
            << "\n";
  return 0;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string tok =
        s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!tok.empty()) out.push_back(std::stoi(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("expected a comma-separated integer list");
  return out;
}

int cmd_analyze(const std::string& checkpoint, const std::string& mode,
                const std::string& data_path, const std::string& bars_arg, int k_ref,
                const std::string& sizes_arg, int resamples, const std::string& kvals_arg,
                int n_points, std::uint64_t seed, const std::string& out_path) {
  Checkpoint ck = load_checkpoint(checkpoint);
  Mat rows = load_eval_rows(data_path, bars_arg);
  if (rows.cols() != ck.p.visible_width())
    throw ShapeError("dataset width does not match model visible width");
  if (n_points < rows.rows()) rows = rows.topRows(n_points).eval();

  RngStream root(seed);
  RngStream as = channel(root, StreamChannel::Analysis);
  std::string csv;
  if (mode == "grad-bias" || mode == "ll-bias") {
    std::vector<int> sizes;
    if (!sizes_arg.empty()) {
      sizes = parse_int_list(sizes_arg);
    } else {
      for (int base = 1; base <= k_ref; base *= 10)
        for (int m : {1, 2, 5})
          if (base * m <= k_ref) sizes.push_back(base * m);
    }
    const BootstrapReport rep =
        mode == "grad-bias"
            ? bootstrap_gradient_study(ck.p, ck.q, rows, k_ref, sizes, resamples, as)
            : bootstrap_ll_study(ck.p, ck.q, rows, k_ref, sizes, resamples, as);
    csv = rep.to_csv();
  } else if (mode == "ll-vs-k") {
    std::vector<long long> ks;
    if (!kvals_arg.empty()) {
      for (int v : parse_int_list(kvals_arg)) ks.push_back(v);
    } else {
      for (long long k = 1; k <= 1024; k *= 2) ks.push_back(k);
    }
    csv = ll_vs_k_to_csv(ll_vs_k_curve(ck.p, ck.q, rows, ks, as));
  } else {
    throw ConfigError("unknown analyze mode '" + mode +
                      "' (expected grad-bias, ll-bias or ll-vs-k)");
  }
  std::ofstream out(out_path);
  if (!out) throw RwsError("cannot write '" + out_path + "'");
  out << csv;
  std::cout << "wrote " << mode << " report to " << out_path << "\n";
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"Reweighted wake-sleep training for deep directed binary models"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a model pair from a JSON config");
  std::string config_path;
  train->add_option("--config", config_path, "JSON run config")->required();
  std::string resume_path;
  train->add_option("--resume", resume_path, "checkpoint directory to resume from");
  std::optional<int> ov_k, ov_epochs, ov_workers;
  std::optional<double> ov_lr;
  std::optional<std::uint64_t> ov_seed;
  std::optional<std::string> ov_mode, ov_out;
  train->add_option("--k", ov_k, "override train.k_train");
  train->add_option("--lr", ov_lr, "override train.learning_rate");
  train->add_option("--epochs", ov_epochs, "override train.epochs");
  train->add_option("--seed", ov_seed, "override train.seed");
  train->add_option("--q-update", ov_mode, "override train.q_update (sleep|wake|both)");
  train->add_option("--workers", ov_workers, "worker threads");
  train->add_option("--out", ov_out, "output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "Estimate held-out log-likelihood");
  std::string ckpt, data_path, bars_arg, out_path;
  long long eval_k = 100000;
  std::uint64_t seed = 0;
  int chunk = 1024, workers = 1, boots = 1000;
  eval->add_option("--checkpoint", ckpt, "checkpoint directory")->required();
  eval->add_option("--data", data_path, "amat dataset path");
  eval->add_option("--bars", bars_arg, "synthetic bars data SIDE:N:SEED");
  eval->add_option("--k", eval_k, "samples per datapoint");
  eval->add_option("--seed", seed, "evaluation seed");
  eval->add_option("--chunk", chunk, "streaming chunk size");
  eval->add_option("--workers", workers, "worker threads");
  eval->add_option("--bootstrap", boots, "bootstrap resamples for the CI");
  eval->add_option("--out", out_path, "also write the report line to this file");

  // sample
  auto* sample = app.add_subcommand("sample", "Write a PGM grid of model samples");
  int n = 25, width = 0, height = 0;
  sample->add_option("--checkpoint", ckpt, "checkpoint directory")->required();
  sample->add_option("--n", n, "number of tiles");
  sample->add_option("--out", out_path, "output .pgm path")->required();
  sample->add_option("--width", width, "tile width (when visible is not square)");
  sample->add_option("--height", height, "tile height");
  sample->add_option("--seed", seed, "sampling seed");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Estimator bias/variance reports");
  std::string mode, sizes_arg, kvals_arg;
  int k_ref = 5000, resamples = 1000, n_points = 25;
  analyze->add_option("--checkpoint", ckpt, "checkpoint directory")->required();
  analyze->add_option("--mode", mode, "grad-bias | ll-bias | ll-vs-k")->required();
  analyze->add_option("--data", data_path, "amat dataset path");
  analyze->add_option("--bars", bars_arg, "synthetic bars data SIDE:N:SEED");
  analyze->add_option("--k-ref", k_ref, "reference sample count");
  analyze->add_option("--sizes", sizes_arg, "comma list of subset sizes");
  analyze->add_option("--resamples", resamples, "bootstrap resamples");
  analyze->add_option("--k-values", kvals_arg, "comma list of K values (ll-vs-k)");
  analyze->add_option("--n-points", n_points, "datapoints to analyze");
  analyze->add_option("--seed", seed, "analysis seed");
  analyze->add_option("--out", out_path, "output CSV path")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) {
      json overrides;
      if (ov_k) overrides["k_train"] = *ov_k;
      if (ov_lr) overrides["learning_rate"] = *ov_lr;
      if (ov_epochs) overrides["epochs"] = *ov_epochs;
      if (ov_seed) overrides["seed"] = *ov_seed;
      if (ov_mode) overrides["q_update"] = *ov_mode;
      if (ov_workers) overrides["workers"] = *ov_workers;
      if (ov_out) overrides["out"] = *ov_out;
      return cmd_train(config_path,
                       resume_path.empty() ? std::nullopt
                                           : std::optional<std::string>(resume_path),
                       overrides);
    }
    if (*eval)
      return cmd_eval(ckpt, data_path, bars_arg, eval_k, seed, chunk, workers, boots,
                      out_path);
    if (*sample) return cmd_sample(ckpt, n, out_path, width, height, seed);
    if (*analyze)
      return cmd_analyze(ckpt, mode, data_path, bars_arg, k_ref, sizes_arg, resamples,
                         kvals_arg, n_points, seed, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args);
}

}  // namespace rws
