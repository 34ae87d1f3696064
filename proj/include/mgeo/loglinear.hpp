#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgeo/common.hpp"
#include "mgeo/graphs.hpp"

namespace mgeo {

// Strictly positive joint distribution over finitely many discrete
// variables.  Cells are mixed-radix indexed with the first variable
// cycling fastest, so for binary variables the cell index is the bitmask
// of which variables are at level 1.
struct JointTable {
  std::vector<int> arity;
  Vector probs;
};

// Validates arities >= 2, strict positivity, and total mass 1 (tol 1e-12).
void validate_joint(const JointTable& p);
JointTable make_joint(std::vector<int> arity, Vector probs);

long table_size(const std::vector<int>& arity);
bool all_binary(const JointTable& p);
long cell_index(const std::vector<int>& arity, const std::vector<int>& levels);
std::vector<int> cell_levels(const std::vector<int>& arity, long index);

// Log-linear coordinates of a (margin of a) binary joint distribution.
// vars holds the original variable ids in ascending order; values is
// indexed by subset bitmask over positions within vars.
struct LogLinearParams {
  std::vector<int> vars;
  Vector values;
};

// In-place Walsh transform: v <- M v with M_{A,B} = (-1)^{|A & B|}.
// Size must be a power of two.  The integer overload is exact.
void wht_inplace(Vector& v);
void wht_inplace(std::vector<std::int64_t>& v);

using DesignMatrix =
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// The full 2^n x 2^n matrix M in binary-counter subset order.  n <= 16.
DesignMatrix design_matrix(int nvars);

// lambda = 2^-n M log p (binary variables only).
LogLinearParams to_loglinear(const JointTable& p);

// p proportional to exp(M lambda), renormalized; lambda_empty is ignored.
JointTable from_loglinear(const LogLinearParams& l);

// Margin of p over the variables K (ascending), any arities.
JointTable margin_table(const JointTable& p, const std::vector<int>& K);

// Log-linear parameters of the K-margin (binary variables only).
LogLinearParams marginal_loglinear(const JointTable& p,
                                   const std::vector<int>& K);

// Identifier of one marginal log-linear parameter: the margin it lives in
// and the interaction subset, both as ascending variable lists.
struct CiParamId {
  std::vector<int> margin;
  std::vector<int> subset;
};

// The 2^|C| parameters whose joint vanishing is X_a independent of X_b
// given X_C: lambda over margin {a,b} u C with subset {a,b} u D, D subseteq C.
std::vector<CiParamId> ci_constraint_params(int a, int b,
                                            const std::vector<int>& C);

// Max-cell factorization residual test of the statement, any arities.
bool check_ci_discrete(const JointTable& p, const IndependenceStatement& stmt,
                       double tol = 1e-10);

// General-arity log-linear parameter:
//   |X_V|^-1 sum_y log p(y) prod_{v in A} (|X_v| 1{x_v = y_v} - 1).
// The block over all level assignments is linearly redundant (each
// one-variable slice sums to zero); callers index it directly.
double general_loglinear(const JointTable& p, const std::vector<int>& A,
                         const std::vector<int>& xA);

// CSV: one row per cell ("x0,...,xk,prob"), levels as integers.
std::string write_joint_csv(const JointTable& p);
JointTable read_joint_csv(const std::string& text);
// CSV: one row per subset ("mask,vars,value").
std::string write_loglinear_csv(const LogLinearParams& l);
LogLinearParams read_loglinear_csv(const std::string& text);

}  // namespace mgeo
