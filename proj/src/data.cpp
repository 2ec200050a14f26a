#include "rws/data.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rws/errors.hpp"
#include "rws/json_io.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint arrays are written little-endian; this build targets "
              "little-endian hosts only");

namespace rws {

namespace fs = std::filesystem;

// ------------------------------------------------------------------ datasets

BinaryDataset load_amat(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      size_t used = 0;
      double v = 0.0;
      bool ok = true;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok || used != tok.size())
        throw ParseError(path + ":" + std::to_string(lineno) + ": non-numeric token '" +
                         tok + "'");
      if (std::abs(v) < 1e-9)
        row.push_back(0.0);
      else if (std::abs(v - 1.0) < 1e-9)
        row.push_back(1.0);
      else
        throw ParseError(path + ":" + std::to_string(lineno) + ": non-binary token '" +
                         tok + "'");
    }
    if (row.empty()) continue;  // blank line
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw ParseError(path + ":" + std::to_string(lineno) + ": row has " +
                       std::to_string(row.size()) + " columns, expected " +
                       std::to_string(width));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");
  BinaryDataset ds;
  ds.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < width; ++j) ds.rows(i, j) = rows[i][j];
  ds.name = path;
  return ds;
}

void save_amat(const std::string& path, const Mat& rows) {
  std::ofstream out(path);
  if (!out) throw RwsError("cannot write dataset file '" + path + "'");
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (j) out << ' ';
      out << (rows(i, j) > 0.5 ? '1' : '0');
    }
    out << '\n';
  }
}

BinaryDataset make_bars_dataset(int side, int n, RngStream& rng) {
  if (side < 2) throw ConfigError("bars side must be >= 2");
  BinaryDataset ds;
  ds.rows = Mat::Zero(n, side * side);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < side; ++r)
      if (rng.uniform() < 0.5)
        for (int c = 0; c < side; ++c) ds.rows(i, r * side + c) = 1.0;
    for (int c = 0; c < side; ++c)
      if (rng.uniform() < 0.5)
        for (int r = 0; r < side; ++r) ds.rows(i, r * side + c) = 1.0;
  }
  ds.name = "bars" + std::to_string(side);
  return ds;
}

std::uint64_t pack_bits(const Vec& x) {
  std::uint64_t key = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) key = (key << 1) | (x[i] > 0.5 ? 1u : 0u);
  return key;
}

std::map<std::uint64_t, double> bars_log_prob_table(int side) {
  std::map<std::uint64_t, std::uint64_t> counts;
  const std::uint64_t patterns = std::uint64_t{1} << (2 * side);
  Vec img(side * side);
  for (std::uint64_t bits = 0; bits < patterns; ++bits) {
    img.setZero();
    for (int r = 0; r < side; ++r)
      if ((bits >> r) & 1u)
        for (int c = 0; c < side; ++c) img[r * side + c] = 1.0;
    for (int c = 0; c < side; ++c)
      if ((bits >> (side + c)) & 1u)
        for (int r = 0; r < side; ++r) img[r * side + c] = 1.0;
    counts[pack_bits(img)] += 1;
  }
  std::map<std::uint64_t, double> table;
  const double log_total = std::log(static_cast<double>(patterns));
  for (const auto& [key, cnt] : counts)
    table[key] = std::log(static_cast<double>(cnt)) - log_total;
  return table;
}

double bars_process_ll(int side, const Mat& rows) {
  const auto table = bars_log_prob_table(side);
  double total = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const auto it = table.find(pack_bits(rows.row(i).transpose()));
    if (it == table.end())
      throw RwsError("row " + std::to_string(i) + " is not a reachable bars image");
    total += it->second;
  }
  return total / static_cast<double>(rows.rows());
}

std::vector<int> shuffled_indices(int n, RngStream& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

// -------------------------------------------------------------- json helpers

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"k_train", cfg.k_train},
              {"learning_rate", cfg.learning_rate},
              {"momentum", cfg.momentum},
              {"batch_size", cfg.batch_size},
              {"q_update", to_string(cfg.q_update_mode)},
              {"lr_decay_per_epoch", cfg.lr_decay_per_epoch},
              {"epochs", cfg.epochs},
              {"seed", cfg.seed},
              {"sleep_grad_weight", cfg.sleep_grad_weight},
              {"dream_samples_per_datapoint", cfg.dream_samples_per_datapoint},
              {"grad_clip", cfg.grad_clip}};
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& context) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const auto& a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(context + ": unknown key '" + key + "'");
  }
}

TrainConfig train_config_from_json(const json& j, bool reject_unknown) {
  if (reject_unknown)
    reject_unknown_keys(j,
                        {"k_train", "learning_rate", "momentum", "batch_size", "q_update",
                         "lr_decay_per_epoch", "epochs", "seed", "sleep_grad_weight",
                         "dream_samples_per_datapoint", "grad_clip"},
                        "train config");
  TrainConfig cfg;
  try {
    cfg.k_train = j.value("k_train", cfg.k_train);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    if (j.contains("q_update"))
      cfg.q_update_mode = parse_q_update_mode(j.at("q_update").get<std::string>());
    cfg.lr_decay_per_epoch = j.value("lr_decay_per_epoch", cfg.lr_decay_per_epoch);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.sleep_grad_weight = j.value("sleep_grad_weight", cfg.sleep_grad_weight);
    cfg.dream_samples_per_datapoint =
        j.value("dream_samples_per_datapoint", cfg.dream_samples_per_datapoint);
    cfg.grad_clip = j.value("grad_clip", cfg.grad_clip);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json layer_to_json(const Layer& l) {
  json j{{"family", l.family()}, {"d_out", l.d_out()}, {"d_in", l.d_in()}};
  if (const auto* nade = dynamic_cast<const CNadeLayer*>(&l)) j["hidden"] = nade->hidden();
  return j;
}

std::unique_ptr<Layer> layer_from_json(const json& j) {
  reject_unknown_keys(j, {"family", "d_out", "d_in", "hidden"}, "layer descriptor");
  try {
    return make_layer(j.at("family").get<std::string>(), j.at("d_out").get<int>(),
                      j.at("d_in").get<int>(), j.value("hidden", 0));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("layer descriptor: ") + e.what());
  }
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr int kFormatVersion = 1;

void write_block(const fs::path& dir, const std::string& name, const Mat& m,
                 json& block_list) {
  block_list.push_back(json{{"name", name},
                            {"rows", static_cast<long long>(m.rows())},
                            {"cols", static_cast<long long>(m.cols())}});
  std::ofstream out(dir / (name + ".f64"), std::ios::binary);
  if (!out) throw RwsError("cannot write checkpoint block '" + name + "'");
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

void append_stack_blocks(const fs::path& dir, const std::string& prefix,
                         const LayerStack& stack, json& block_list) {
  for (size_t l = 0; l < stack.layers.size(); ++l)
    for (const auto& blk : stack.layers[l]->blocks())
      write_block(dir, prefix + ".layer" + std::to_string(l) + "." + blk.name, *blk.m,
                  block_list);
}

void append_grad_blocks(const fs::path& dir, const std::string& prefix,
                        const LayerStack& stack, const ModelGrad& g, json& block_list) {
  for (size_t l = 0; l < stack.layers.size(); ++l) {
    const auto blocks = stack.layers[l]->blocks();
    for (size_t k = 0; k < blocks.size(); ++k)
      write_block(dir, prefix + ".layer" + std::to_string(l) + "." + blocks[k].name,
                  g.layers[l].g[k], block_list);
  }
}

struct BlockReader {
  fs::path dir;
  std::map<std::string, std::pair<long long, long long>> shapes;

  void read_into(const std::string& name, Mat& m) const {
    const auto it = shapes.find(name);
    if (it == shapes.end())
      throw CheckpointShapeError("manifest is missing block '" + name + "'");
    const auto [rows, cols] = it->second;
    if (rows != m.rows() || cols != m.cols())
      throw CheckpointShapeError(
          "block '" + name + "' has manifest shape " + std::to_string(rows) + "x" +
          std::to_string(cols) + " but the model expects " + std::to_string(m.rows()) +
          "x" + std::to_string(m.cols()));
    const fs::path file = dir / (name + ".f64");
    std::ifstream in(file, std::ios::binary);
    if (!in) throw CheckpointDataError("missing checkpoint block file '" + name + ".f64'");
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<long long>(in.tellg());
    const long long expected = rows * cols * static_cast<long long>(sizeof(double));
    if (bytes != expected)
      throw CheckpointShapeError("block '" + name + "' holds " + std::to_string(bytes) +
                                 " bytes but its declared shape needs " +
                                 std::to_string(expected));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(m.data()), expected);
    if (!in) throw CheckpointDataError("failed reading checkpoint block '" + name + "'");
  }

  void read_stack(const std::string& prefix, LayerStack& stack) const {
    for (size_t l = 0; l < stack.layers.size(); ++l)
      for (auto& blk : stack.layers[l]->blocks())
        read_into(prefix + ".layer" + std::to_string(l) + "." + blk.name, *blk.m);
  }

  void read_grad(const std::string& prefix, const LayerStack& stack, ModelGrad& g) const {
    for (size_t l = 0; l < stack.layers.size(); ++l) {
      const auto blocks = stack.layers[l]->blocks();
      for (size_t k = 0; k < blocks.size(); ++k)
        read_into(prefix + ".layer" + std::to_string(l) + "." + blocks[k].name,
                  g.layers[l].g[k]);
    }
  }
};

}  // namespace

void save_checkpoint(const std::string& dir, const GenerativeModel& p,
                     const InferenceModel& q, const TrainConfig& cfg,
                     const OptimizerState& opt, int epoch) {
  fs::create_directories(dir);
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["epoch"] = epoch;
  manifest["config"] = train_config_to_json(cfg);
  manifest["p"] = json::array();
  for (const auto& l : p.layers) manifest["p"].push_back(layer_to_json(*l));
  manifest["q"] = json::array();
  for (const auto& l : q.layers) manifest["q"].push_back(layer_to_json(*l));
  // training streams are derived from (seed, epoch), so this is all a resume needs
  manifest["rng"] = json{{"seed", cfg.seed}, {"next_epoch", epoch}};
  json blocks = json::array();
  const fs::path d(dir);
  append_stack_blocks(d, "p", p, blocks);
  append_stack_blocks(d, "q", q, blocks);
  append_grad_blocks(d, "opt.p", p, opt.v_p, blocks);
  append_grad_blocks(d, "opt.q", q, opt.v_q, blocks);
  manifest["blocks"] = std::move(blocks);
  std::ofstream out(d / "manifest.json");
  if (!out) throw RwsError("cannot write checkpoint manifest in '" + dir + "'");
  out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path d(dir);
  std::ifstream in(d / "manifest.json");
  if (!in) throw CheckpointDataError("missing manifest.json in '" + dir + "'");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw CheckpointDataError("unreadable manifest in '" + dir + "': " + e.what());
  }
  const int version = manifest.value("format_version", -1);
  if (version != kFormatVersion)
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) +
                                 " is not supported (expected " +
                                 std::to_string(kFormatVersion) + ")");
  Checkpoint ck;
  try {
    ck.cfg = train_config_from_json(manifest.at("config"), /*reject_unknown=*/false);
    ck.epoch = manifest.at("epoch").get<int>();
    for (const auto& lj : manifest.at("p")) ck.p.layers.push_back(layer_from_json(lj));
    for (const auto& lj : manifest.at("q")) ck.q.layers.push_back(layer_from_json(lj));
  } catch (const json::exception& e) {
    throw CheckpointDataError("manifest missing required fields: " + std::string(e.what()));
  }
  ck.p.validate();
  ck.q.validate();
  validate_pair(ck.p, ck.q);
  ck.opt = make_optimizer_state(ck.p, ck.q);

  BlockReader reader{d, {}};
  try {
    for (const auto& bj : manifest.at("blocks"))
      reader.shapes[bj.at("name").get<std::string>()] = {bj.at("rows").get<long long>(),
                                                         bj.at("cols").get<long long>()};
  } catch (const json::exception& e) {
    throw CheckpointDataError("bad block table in manifest: " + std::string(e.what()));
  }
  reader.read_stack("p", ck.p);
  reader.read_stack("q", ck.q);
  reader.read_grad("opt.p", ck.p, ck.opt.v_p);
  reader.read_grad("opt.q", ck.q, ck.opt.v_q);
  return ck;
}

}  // namespace rws
