#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mgeo/common.hpp"
#include "mgeo/geometry.hpp"
#include "mgeo/loglinear.hpp"

namespace mgeo {

// Stationary ARMA(p, q) innovation model.
struct ArmaSpec {
  std::vector<double> phi;
  std::vector<double> theta;
  double sigma2 = 1.0;
};

// Throws ConfigError unless the AR polynomial has all roots outside the
// unit circle (checked on the companion matrix) and sigma2 > 0.
void check_stationary(const ArmaSpec& spec);

// gamma_0..gamma_maxlag, exactly: psi-weight recursion for the MA cross
// terms, then the extended Yule-Walker system for the first p+1 lags.
Vector arma_autocovariance(const ArmaSpec& spec, int max_lag);

struct ArmaTangentReport {
  int order = 0;
  double eps = 0.0;
  // max over coefficients and lags of the difference between the AR- and
  // MA-coefficient directional derivatives, and of either from the lag
  // indicator they should both equal
  double max_discrepancy = 0.0;
  // |d^2 gamma_2 / d phi_1^2 - d^2 gamma_2 / d theta_1^2| at the origin;
  // nonzero, showing the agreement is first-order only
  double second_gap = 0.0;
};

// Finite-difference comparison of d gamma / d phi_i and d gamma / d theta_i
// at the all-zero coefficient point.
ArmaTangentReport arma_tangent_check(int p_order, double eps = 1e-4);
std::string arma_tangent_json(const ArmaTangentReport& rep);

// Joint table plus the causal role of each variable, in table order.
struct DiscreteCausalTable {
  JointTable table;
  std::vector<std::string> roles;
};

struct VermaResult {
  int na = 0, nb = 0, ny = 0;
  Vector q;  // index a + na * (b + nb * y)
  // max over (b, y) of the range of q over a; zero iff the functional is
  // constant in a
  double variation = 0.0;
};

double verma_q(const VermaResult& r, int a, int b, int y);

// q(y; a, b) = sum_l p(l | a) p(y | a, l, b) for a table with roles
// (A, L, B, Y) in variable order.
VermaResult verma_functional(const DiscreteCausalTable& p);

// max over (x, y) of |p(y|x) - sum_z p(z) p(y|x, z)| for roles (X, Y, Z).
double adjustment_bias(const DiscreteCausalTable& p);

struct QuadraticReport {
  bool pass = false;
  double slope = 0.0;
  std::vector<double> scales;
  std::vector<Vector> directions;  // unit probe directions
  Matrix values;                   // |f| per (direction, scale)
  std::vector<double> max_values;  // per scale
  std::string detail;
};

// Checks |f(theta + h)| = O(|h|^2): f must vanish on every submodel
// (sampled, tol 1e-8) and the sampled submodel cones must jointly span the
// ambient space; then the log-log slope of max |f| over shrinking probe
// scales must be at least 1.9.  Precondition failures throw ConfigError
// naming a witness point.
QuadraticReport quadratic_vanishing_check(
    const std::function<double(const Vector&)>& f,
    const std::vector<ImplicitModel>& submodels, const Vector& theta,
    int ndirs = 64, double eps0 = 0.05, uint64_t seed = 0);
std::string quadratic_report_json(const QuadraticReport& rep);

// The adjustment-bias robustness instance on three binary variables
// (X, Y, Z), expressed in log-linear coordinates h in R^7 (subset masks
// 1..7): f(h) = adjustment_bias(table(h)), submodels {X indep Z} and
// {Y indep Z | X}.
JointTable table_from_coords(const Vector& h);
QuadraticReport adjustment_bias_quadratic(int ndirs = 64, double eps0 = 0.05,
                                          uint64_t seed = 0);

}  // namespace mgeo
