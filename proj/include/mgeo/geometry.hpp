#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mgeo/common.hpp"

namespace mgeo {

// Model given implicitly as the zero set of smooth constraints.  Gradients
// may be supplied per constraint; missing ones fall back to central
// differences.  Optional box bounds restrict the search region.
struct ImplicitModel {
  int ambient_dim = 0;
  std::vector<std::function<double(const Vector&)>> constraints;
  std::vector<std::function<Vector(const Vector&)>> gradients;
  double membership_tol = 1e-9;
  Vector lo, hi;  // empty = unbounded
};

bool membership(const ImplicitModel& m, const Vector& x);
Vector constraint_values(const ImplicitModel& m, const Vector& x);
// k x d Jacobian; rows without a closed-form gradient use central differences.
Matrix constraint_jacobian(const ImplicitModel& m, const Vector& x);
// Both models' constraints stacked over the same ambient space.
ImplicitModel intersect_models(const ImplicitModel& a, const ImplicitModel& b);

struct ProjectOptions {
  int starts = 16;
  int feas_iters = 60;
  int refine_iters = 80;
  uint64_t seed = 0;
};

// Nearest-point search: multi-start Gauss-Newton descent onto the zero set,
// then distance refinement along the tangent space.  Deterministic per seed.
// Throws NumericError if no start reaches a feasible point.
Vector project_to_model(const ImplicitModel& m, const Vector& x,
                        const ProjectOptions& opt = {});

// Monte Carlo sup-inf distance between the models inside the eps-ball at
// theta, symmetrized by taking the larger direction.  Throws NumericError
// if either model yields no sample points in the ball.
double local_hausdorff(const ImplicitModel& m1, const ImplicitModel& m2,
                       const Vector& theta, double eps, int nsamples,
                       uint64_t seed);

struct OrderEstimate {
  std::vector<double> radii;      // strictly decreasing
  std::vector<double> distances;  // estimated D(eps) per radius
  double slope = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
  bool truncated = false;  // largest radius dropped by the curvature check
};

// Log-log slope of the distance estimates over the radii.  Needs at least
// 4 radii spanning at least 3 octaves.  If the full fit has R^2 < 0.98 and
// dropping the largest radius lifts it above 0.995, the truncated fit is
// reported instead.
OrderEstimate equivalence_order(const ImplicitModel& m1,
                                const ImplicitModel& m2, const Vector& theta,
                                const std::vector<double>& radii, int nsamples,
                                uint64_t seed);

// Largest integer c with slope >= c - 0.15, as a report string.
std::string near_equivalence_class(double slope);

// "epsilon,dhat" rows, summary line, and the seed/version trailer.
std::string order_estimate_csv(const OrderEstimate& est, uint64_t seed);

struct ConeSample {
  Vector theta;
  std::vector<Vector> directions;  // unit vectors, deduplicated at 2 degrees
  std::vector<double> radii;
};

// Unit directions (x - theta)/|x - theta| of model points sampled at the
// smallest radius.
ConeSample tangent_cone_sample(const ImplicitModel& m, const Vector& theta,
                               const std::vector<double>& radii, int nsamples,
                               uint64_t seed);

struct OverlapReport {
  std::vector<Vector> witnesses;
  bool verdict = false;  // "overlap evidence", never proof
  std::string detail;
};

// Heuristic probe: directions shared by both sampled cones (within 5
// degrees) that stay at least 15 degrees from every sampled direction of
// the intersection model.
OverlapReport overlap_probe(const ImplicitModel& m1, const ImplicitModel& m2,
                            const Vector& theta,
                            const std::vector<double>& radii, int nsamples,
                            uint64_t seed);

struct CatalogEntry {
  std::string name;
  std::string description;
  ImplicitModel m1, m2;
  Vector theta;
  double expected_slope = 0.0;  // 0 = not pinned
};

// Named model pairs: line vs parabola, transversal lines, the overlap pair
// in R^3, marginal vs conditional Gaussian independence, and the two
// quartic-model constraint surfaces (rho_13 = 0 slice).
const std::map<std::string, CatalogEntry>& catalog();
const CatalogEntry& catalog_lookup(const std::string& name);
// JSON descriptor (ambient dim, constraint labels, base point) per entry.
std::string catalog_json();

std::vector<double> default_radii();  // 2^-3 .. 2^-8

}  // namespace mgeo
