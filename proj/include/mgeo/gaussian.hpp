#pragma once

#include <cstdint>
#include <vector>

#include "mgeo/common.hpp"
#include "mgeo/graphs.hpp"

namespace mgeo {

// Throws ConfigError unless P is symmetric with unit diagonal and positive
// definite (smallest eigenvalue > 1e-10).
void check_correlation(const Matrix& P);

// Linear SEM over a graph with directed and bidirected edges.
// B(i,j) is the coefficient attached to the edge i -> j; Omega is the noise
// covariance, with off-diagonal entries only on bidirected pairs.
struct SemParams {
  MixedGraph graph{0};
  Matrix B;
  Matrix Omega;
};

// Throws ConfigError if shapes or sparsity disagree with the graph, or if
// Omega is not symmetric positive definite.
void validate_sem(const SemParams& p);

// Sigma = (I-B)^-T Omega (I-B)^-1.  Throws NumericError if I-B is singular.
Matrix sem_to_covariance(const SemParams& p);

enum class DiscVariant { Gk, GkPrime };

// SEM over build_discpath_graphs(k): edges along the path 0,...,k weighted
// 0.4 * 2^-s, the remaining directed edges 0.5, error variances as given.
// Throws NumericError if the implied covariance is not positive definite.
SemParams disc_path_sem(int k, double s, DiscVariant variant,
                        double error_variance = 1.0);

// rho_{ij.C} from the Schur complement, normalized by the conditional
// standard deviations.
double partial_correlation(const Matrix& sigma, int i, int j,
                           const std::vector<int>& cond);

// The two quartic-model constraints on a 4x4 correlation matrix
// (vertices 0..3): fb = rho_14 - rho_12 rho_24 and the companion
// polynomial fa with rho_13 = 0 substituted.
double constraint_fa(const Matrix& pi);
double constraint_fb(const Matrix& pi);

struct SampleCov {
  Matrix S;
  long n = 0;
};

// Covariance (divisor n, known zero mean) of n Gaussian draws from sigma.
// Deterministic per seed.  Requires n >= dim + 1.
SampleCov sample_cov(const Matrix& sigma, long n, uint64_t seed);

// n * (tr(S K) - log det(S K) - p) with K = sigma_hat^-1.
double gaussian_deviance(const SampleCov& sc, const Matrix& sigma_hat);

struct MagFit {
  Matrix sigma;
  double deviance = 0.0;
  int sweeps = 0;
};

// Thrown when the iterative fit stops without meeting the tolerance; carries
// the last iterate so callers can inspect or discard the replicate.
struct RicfError : NumericError {
  RicfError(const std::string& what, Matrix last)
      : NumericError(what), last_sigma(std::move(last)) {}
  Matrix last_sigma;
};

// ML fit of the Gaussian model of g (directed + bidirected edges only) by
// iterative conditional regression with pseudo-variables for spouses.
MagFit fit_mag_gaussian(const MixedGraph& g, const SampleCov& sc,
                        int max_sweeps = 500, double tol = 1e-9);

}  // namespace mgeo
