#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mgeo/common.hpp"
#include "mgeo/gaussian.hpp"
#include "mgeo/graphs.hpp"
#include "mgeo/loglinear.hpp"

namespace mgeo {

// Observed cell counts of a discrete sample.
struct CountTable {
  std::vector<int> arity;
  std::vector<long> counts;
  long n = 0;
};

void validate_counts(const CountTable& t);
CountTable make_counts(std::vector<int> arity, std::vector<long> counts);

// Exact multinomial draw via sequential conditional binomials.
CountTable sample_counts(const JointTable& p, long n, uint64_t seed);

// (counts + smooth) / (n + smooth * cells); smooth = 0 requires all counts
// positive.
JointTable empirical_table(const CountTable& t, double smooth = 0.0);

// CSV: one row per cell ("x0,...,xk,count").
std::string write_counts_csv(const CountTable& t);
CountTable read_counts_csv(const std::string& text);

// Support of an estimate: interaction subsets with nonzero lambda, or
// off-diagonal matrix positions with nonzero sigma.
struct SparsityPattern {
  std::vector<int> subsets;                    // bitmasks, ascending
  std::vector<std::pair<int, int>> positions;  // i < j, lexicographic

  friend bool operator==(const SparsityPattern&,
                         const SparsityPattern&) = default;
};

struct LassoFit {
  LogLinearParams lambda;  // lambda_empty renormalized so the table sums to 1
  SparsityPattern pattern;
  double objective = 0.0;  // penalized NLL in the lambda_empty = 0 gauge
  double kkt_residual = 0.0;
  int iters = 0;
};

// Minimizes -sum_x n(x) (M lambda)_x + n log sum_x exp((M lambda)_x)
//           + nu sum_{A != empty} |lambda_A|
// by proximal gradient descent with backtracking; soft-thresholding yields
// exact zeros.  Binary variables only, at most 12.  init (optional) gives
// starting values per subset mask.  Throws NumericError if the objective is
// still moving by more than 1e-10 (relative) after 50000 iterations.
LassoFit loglin_lasso(const CountTable& data, double nu,
                      const Vector& init = Vector());

struct LearnedStructure {
  int nvars = 0;
  double delta = 0.0;
  double nu = 0.0;
  std::vector<std::pair<int, int>> skeleton;       // i < j
  std::vector<std::array<int, 3>> colliders;       // {i, k, j}: i -> k <- j
  std::vector<std::array<int, 3>> noncolliders;    // unshielded, not oriented
  std::vector<int> higher_order;                   // nonzero masks, >= 3 bits
  LassoFit fit;
};

// Lasso at nu = n^delta, delta in (0.5, 1); skeleton from pairwise nonzeros,
// unshielded triples oriented as colliders when the triple interaction
// survives.
LearnedStructure learn_bn(const CountTable& data, double delta = 0.75);

// Skeleton with collider orientations folded in: an endpoint collects an
// arrowhead per collider pointing at it, so edges come out undirected,
// directed, or (under conflicting orientations) bidirected.
MixedGraph structure_graph(const LearnedStructure& s);
std::string structure_json(const LearnedStructure& s);

// Small generating tables for learner experiments: fair coins with
// conditionals given by half-logits, e.g. logit P(Z=1|x,y)/2 =
// gx sx + gy sy + gxy sx sy on sign levels s = 2 level - 1.
JointTable collider3_table(double gx = 0.2, double gy = 0.2,
                           double gxy = 0.12);
JointTable chain3_table(double gxz = 0.3, double gzy = 0.3);

// Interaction subsets a DAG supports: A with v in A subseteq {v} u pa(v).
std::vector<int> dag_pattern(const MixedGraph& dag);

struct Theorem71Config {
  MixedGraph dag;  // directed edges only, acyclic
  double gamma = 0.3;
  double delta = 0.75;
  double h_scale = 3.0;
  std::vector<double> h;  // per pattern coordinate; empty = all h_scale
  std::vector<long> n_grid;
  int replicates = 100;
  int nthreads = 0;
  uint64_t seed = 0;
};

struct RecoveryCurve {
  std::vector<int> target;  // dag_pattern masks
  std::vector<long> n;
  std::vector<double> fraction;  // replicates recovering the target exactly
};

// Local-alternative recovery experiment: at each n the generating
// coordinates are h_A n^-gamma on the DAG pattern, data is sampled, and the
// learned pattern is compared to the target.  gamma must lie in (1/4, 1/2)
// and every h component must be nonzero.
RecoveryCurve theorem71_experiment(const Theorem71Config& cfg);

struct CovSelect {
  Matrix sigma;
  SparsityPattern pattern;  // positions only
  int rounds = 0;
  double threshold = 0.0;  // t = n^(delta-1)
};

// Soft-thresholds off-diagonals at t/2, then alternates an eigenvalue floor
// (1e-8) with re-thresholding until the thresholded matrix is already
// positive definite; at most 100 rounds, else NumericError.
CovSelect cov_select_moment(const SampleCov& sc, double delta = 0.75);

}  // namespace mgeo
