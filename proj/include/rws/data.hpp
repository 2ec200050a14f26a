#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rws/model.hpp"
#include "rws/numerics.hpp"
#include "rws/rng.hpp"
#include "rws/training.hpp"

namespace rws {

struct BinaryDataset {
  Mat rows;  // N x D, entries exactly 0.0 or 1.0
  std::string name;
  std::string split;  // train / valid / test

  int n() const { return static_cast<int>(rows.rows()); }
  int d() const { return static_cast<int>(rows.cols()); }
};

// Whitespace-separated text, one example per line. Tokens must be 0/1 (the
// forms "0", "1", "0.0000", "1.0000" are accepted); anything else or a ragged
// row is a ParseError naming the line.
BinaryDataset load_amat(const std::string& path);
void save_amat(const std::string& path, const Mat& rows);

// Each of the `side` row-bars and `side` column-bars turns on independently
// with probability 0.5; the image is their union. The generating process is
// enumerable: 2^(2*side) bar patterns.
BinaryDataset make_bars_dataset(int side, int n, RngStream& rng);

// log prob of each reachable image under the bars process, keyed by the image
// bits packed big-endian (first pixel = highest bit).
std::map<std::uint64_t, double> bars_log_prob_table(int side);
std::uint64_t pack_bits(const Vec& x);

// Exact log-likelihood of a dataset under the bars generating process.
double bars_process_ll(int side, const Mat& rows);

// Fisher-Yates permutation of 0..n-1 driven by rng.
std::vector<int> shuffled_indices(int n, RngStream& rng);

// ---------------------------------------------------------------------------
// Checkpoints: a directory holding manifest.json plus one raw array file per
// named parameter block ("p.layer0.W.f64", "opt.q.layer1.b.f64", ...). Arrays
// are little-endian float64, column-major, shapes declared in the manifest.
// ---------------------------------------------------------------------------

struct Checkpoint {
  GenerativeModel p;
  InferenceModel q;
  TrainConfig cfg;
  OptimizerState opt;
  int epoch = 0;  // number of completed epochs
};

void save_checkpoint(const std::string& dir, const GenerativeModel& p,
                     const InferenceModel& q, const TrainConfig& cfg,
                     const OptimizerState& opt, int epoch);
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace rws
