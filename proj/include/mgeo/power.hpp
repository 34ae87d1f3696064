#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mgeo/common.hpp"

namespace mgeo {

// Model-selection power study over the discriminating-path family: data are
// drawn from the G_k structural model with path correlations shrinking in s,
// and both G_k and G_k' are fit by deviance.
struct PowerConfig {
  std::vector<int> k_values{2};
  std::vector<int> s_values{0, 1, 2, 3};
  std::map<int, long> n_init{{2, 32}, {3, 250}, {4, 800}, {5, 5000}};
  int replicates = 2500;
  uint64_t seed = 0;
  long budget = 10'000'000;  // per-replicate sample size cap; above it the
                             // cell is skipped and flagged
  double n_multiplier = 1.0;       // 4.0 gives the denser variant
  double exponent_multiplier = 2.0;  // n = n_init * 2^(mult*k*s); 1.0 is the
                                     // deliberately-too-slow scaling
  int nthreads = 0;  // 0 = hardware concurrency
};

struct PowerCell {
  int k = 0;
  int s = 0;
  long n = 0;  // 0 when the target exceeds the 64-bit range
  bool skipped = false;
  int replicates_done = 0;  // converged replicates entering the accuracy
  int nonconverged = 0;
  bool nonconv_flag = false;  // nonconverged >= 1% of requested replicates
  double accuracy = 0.0;      // wins + ties/2 over replicates_done
};

struct PowerResult {
  PowerConfig config;
  std::vector<PowerCell> cells;  // k-major, then s, in config order
};

// Deterministic per (seed, k, s, replicate); the accuracy is a ratio of
// integer tallies, so the output does not depend on the worker count.
// Throws ConfigError on an empty grid, replicates < 1, or a k without an
// n_init entry.
PowerResult run_discpath_power(const PowerConfig& cfg);

// Columns k,s,n,accuracy,replicates,nonconverged,skipped,flagged plus the
// seed trailer.  Skipped cells leave the accuracy field empty.
std::string power_csv(const PowerResult& r);

// One wide row per catalog pair: name, slope, stderr, then one fitted
// distance per radius.  An empty name list yields a header-only CSV.
// Throws ConfigError on an unknown name or an unusable radius grid.
std::string run_order_estimates(const std::vector<std::string>& names,
                                const std::vector<double>& radii,
                                uint64_t seed, int nsamples = 400);

// Structure-recovery experiment driven by a JSON config: keys "dag" (graph
// text), "gamma", "delta", "h_scale", "h", "n_grid", "replicates",
// "nthreads", "seed"; all but "dag" and "n_grid" optional.  Returns a CSV
// with columns n,fraction,replicates.  Throws ConfigError on malformed
// input.
std::string run_bn_experiment(const std::string& config_json);

}  // namespace mgeo
