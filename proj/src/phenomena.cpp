#include "mgeo/phenomena.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "mgeo/rng.hpp"
#include "nlohmann/json.hpp"

namespace mgeo {
namespace {

double spectral_radius(const std::vector<double>& phi) {
  const int p = static_cast<int>(phi.size());
  if (p == 0) return 0.0;
  Matrix C = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) C(0, i) = phi[i];
  for (int i = 1; i < p; ++i) C(i, i - 1) = 1.0;
  Eigen::EigenSolver<Matrix> es(C, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::string format_point(const Vector& x) {
  std::ostringstream os;
  os << "(";
  for (Index i = 0; i < x.size(); ++i) {
    if (i) os << ", ";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", x[i]);
    os << buf;
  }
  os << ")";
  return os.str();
}

double loglog_slope(const std::vector<double>& xs,
                    const std::vector<double>& ys) {
  const int n = static_cast<int>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double lx = std::log(xs[i]);
    const double ly = std::log(std::max(ys[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void require_roles(const DiscreteCausalTable& p,
                   const std::vector<std::string>& want) {
  if (p.roles != want) {
    std::string msg = "causal table roles must be (";
    for (size_t i = 0; i < want.size(); ++i)
      msg += (i ? ", " : "") + want[i];
    throw ConfigError(msg + ") in variable order");
  }
  if (p.table.arity.size() != want.size())
    throw ConfigError("role count does not match variable count");
  validate_joint(p.table);
}

}  // namespace

void check_stationary(const ArmaSpec& spec) {
  if (!(spec.sigma2 > 0.0))
    throw ConfigError("innovation variance must be positive");
  for (double v : spec.phi)
    if (!std::isfinite(v)) throw ConfigError("non-finite AR coefficient");
  for (double v : spec.theta)
    if (!std::isfinite(v)) throw ConfigError("non-finite MA coefficient");
  const double rho = spectral_radius(spec.phi);
  if (rho >= 1.0 - 1e-9) {
    char buf[96];
    std::snprintf(buf, sizeof(buf),
                  "AR polynomial is not stationary (companion radius %.6g)",
                  rho);
    throw ConfigError(buf);
  }
}

Vector arma_autocovariance(const ArmaSpec& spec, int max_lag) {
  check_stationary(spec);
  if (max_lag < 0) throw ConfigError("max_lag must be nonnegative");
  const int p = static_cast<int>(spec.phi.size());
  const int q = static_cast<int>(spec.theta.size());

  // MA-representation weights psi_0..psi_q (only these enter the
  // innovation cross-covariances c_k).
  std::vector<double> psi(q + 1, 0.0);
  psi[0] = 1.0;
  for (int j = 1; j <= q; ++j) {
    double s = spec.theta[j - 1];
    for (int i = 1; i <= std::min(j, p); ++i) s += spec.phi[i - 1] * psi[j - i];
    psi[j] = s;
  }

  // c_k = sigma2 * sum_{j=k..q} theta_j psi_{j-k}, theta_0 = 1.
  const int top = std::max(max_lag, p);
  std::vector<double> c(top + 1, 0.0);
  for (int k = 0; k <= std::min(top, q); ++k) {
    double s = 0.0;
    for (int j = k; j <= q; ++j)
      s += (j == 0 ? 1.0 : spec.theta[j - 1]) * psi[j - k];
    c[k] = spec.sigma2 * s;
  }

  // Extended Yule-Walker for gamma_0..gamma_p, then the AR recursion.
  Matrix A = Matrix::Identity(p + 1, p + 1);
  Vector rhs(p + 1);
  for (int k = 0; k <= p; ++k) {
    for (int i = 1; i <= p; ++i) A(k, std::abs(k - i)) -= spec.phi[i - 1];
    rhs[k] = c[k];
  }
  Vector head = A.fullPivLu().solve(rhs);

  std::vector<double> gam(top + 1, 0.0);
  for (int k = 0; k <= p; ++k) gam[k] = head[k];
  for (int k = p + 1; k <= top; ++k) {
    double s = c[k];
    for (int i = 1; i <= p; ++i) s += spec.phi[i - 1] * gam[k - i];
    gam[k] = s;
  }
  Vector out(max_lag + 1);
  for (int k = 0; k <= max_lag; ++k) out[k] = gam[k];
  return out;
}

ArmaTangentReport arma_tangent_check(int p_order, double eps) {
  if (p_order < 1) throw ConfigError("order must be at least 1");
  if (!(eps > 0.0)) throw ConfigError("step must be positive");
  const int nlag = p_order + 2;

  auto gamma = [&](int coef, double phi_v, double theta_v) {
    ArmaSpec s;
    s.phi.assign(p_order, 0.0);
    s.theta.assign(p_order, 0.0);
    s.phi[coef] = phi_v;
    s.theta[coef] = theta_v;
    return arma_autocovariance(s, nlag);
  };

  ArmaTangentReport rep;
  rep.order = p_order;
  rep.eps = eps;
  for (int i = 0; i < p_order; ++i) {
    Vector dphi = (gamma(i, eps, 0.0) - gamma(i, -eps, 0.0)) / (2 * eps);
    Vector dth = (gamma(i, 0.0, eps) - gamma(i, 0.0, -eps)) / (2 * eps);
    Vector ind = Vector::Zero(nlag + 1);
    ind[i + 1] = 1.0;
    rep.max_discrepancy = std::max(
        {rep.max_discrepancy, (dphi - dth).cwiseAbs().maxCoeff(),
         (dphi - ind).cwiseAbs().maxCoeff(),
         (dth - ind).cwiseAbs().maxCoeff()});
  }

  // Second derivative of gamma_2 in the first coefficient: 2 sigma2 along
  // phi_1, zero along theta_1.
  const Vector g0 = gamma(0, 0.0, 0.0);
  const double d2phi =
      (gamma(0, eps, 0.0)[2] - 2 * g0[2] + gamma(0, -eps, 0.0)[2]) /
      (eps * eps);
  const double d2th =
      (gamma(0, 0.0, eps)[2] - 2 * g0[2] + gamma(0, 0.0, -eps)[2]) /
      (eps * eps);
  rep.second_gap = std::abs(d2phi - d2th);
  return rep;
}

std::string arma_tangent_json(const ArmaTangentReport& rep) {
  nlohmann::json j;
  j["order"] = rep.order;
  j["eps"] = rep.eps;
  j["max_discrepancy"] = rep.max_discrepancy;
  j["second_gap"] = rep.second_gap;
  j["version"] = kVersion;
  return j.dump(2);
}

double verma_q(const VermaResult& r, int a, int b, int y) {
  return r.q[a + static_cast<long>(r.na) * (b + static_cast<long>(r.nb) * y)];
}

VermaResult verma_functional(const DiscreteCausalTable& p) {
  require_roles(p, {"A", "L", "B", "Y"});
  const auto& ar = p.table.arity;
  const int na = ar[0], nl = ar[1], nb = ar[2], ny = ar[3];

  JointTable pa = margin_table(p.table, {0});
  JointTable pal = margin_table(p.table, {0, 1});
  JointTable palb = margin_table(p.table, {0, 1, 2});

  VermaResult res;
  res.na = na;
  res.nb = nb;
  res.ny = ny;
  res.q = Vector::Zero(static_cast<long>(na) * nb * ny);
  for (int y = 0; y < ny; ++y)
    for (int b = 0; b < nb; ++b)
      for (int a = 0; a < na; ++a) {
        double s = 0.0;
        for (int l = 0; l < nl; ++l) {
          const double p_l_a = pal.probs[cell_index(pal.arity, {a, l})] /
                               pa.probs[cell_index(pa.arity, {a})];
          const double p_y_alb =
              p.table.probs[cell_index(ar, {a, l, b, y})] /
              palb.probs[cell_index(palb.arity, {a, l, b})];
          s += p_l_a * p_y_alb;
        }
        res.q[a + static_cast<long>(na) * (b + static_cast<long>(nb) * y)] = s;
      }

  for (int y = 0; y < ny; ++y)
    for (int b = 0; b < nb; ++b) {
      double lo = 2.0, hi = -2.0;
      for (int a = 0; a < na; ++a) {
        const double v = verma_q(res, a, b, y);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      res.variation = std::max(res.variation, hi - lo);
    }
  return res;
}

double adjustment_bias(const DiscreteCausalTable& p) {
  require_roles(p, {"X", "Y", "Z"});
  const auto& ar = p.table.arity;
  const int nx = ar[0], ny = ar[1], nz = ar[2];

  JointTable px = margin_table(p.table, {0});
  JointTable pxy = margin_table(p.table, {0, 1});
  JointTable pz = margin_table(p.table, {2});
  JointTable pxz = margin_table(p.table, {0, 2});

  double worst = 0.0;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) {
      const double cond = pxy.probs[cell_index(pxy.arity, {x, y})] /
                          px.probs[cell_index(px.arity, {x})];
      double adj = 0.0;
      for (int z = 0; z < nz; ++z)
        adj += pz.probs[cell_index(pz.arity, {z})] *
               p.table.probs[cell_index(ar, {x, y, z})] /
               pxz.probs[cell_index(pxz.arity, {x, z})];
      worst = std::max(worst, std::abs(cond - adj));
    }
  return worst;
}

QuadraticReport quadratic_vanishing_check(
    const std::function<double(const Vector&)>& f,
    const std::vector<ImplicitModel>& submodels, const Vector& theta,
    int ndirs, double eps0, uint64_t seed) {
  if (submodels.empty()) throw ConfigError("need at least one submodel");
  if (ndirs < 2) throw ConfigError("need at least two probe directions");
  if (!(eps0 > 0.0)) throw ConfigError("probe scale must be positive");
  const int d = static_cast<int>(theta.size());
  for (const auto& m : submodels)
    if (m.ambient_dim != d)
      throw ConfigError("submodel ambient dimension does not match theta");

  // f must vanish at theta and on sampled submodel points nearby.
  constexpr double kVanishTol = 1e-8;
  for (size_t k = 0; k < submodels.size(); ++k) {
    const auto& m = submodels[k];
    if (!membership(m, theta))
      throw ConfigError("theta is not on submodel " + std::to_string(k));
    auto eng = make_engine(derive_seed(seed, 101, k));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int s = 0; s < 32; ++s) {
      Vector step(d);
      for (int i = 0; i < d; ++i) step[i] = gauss(eng);
      const double r = eps0 * (0.25 + 0.75 * (s % 8) / 7.0);
      Vector pt;
      try {
        ProjectOptions po;
        po.seed = derive_seed(seed, 102, k, s);
        pt = project_to_model(m, theta + r * step.normalized(), po);
      } catch (const NumericError&) {
        continue;  // stray infeasible start; coverage comes from the rest
      }
      if (std::abs(f(pt)) > kVanishTol)
        throw ConfigError("f does not vanish on submodel " +
                          std::to_string(k) + " at witness " +
                          format_point(pt));
    }
  }

  // Sampled cones must jointly span the ambient space.
  std::vector<Vector> dirs;
  for (size_t k = 0; k < submodels.size(); ++k) {
    ConeSample cs = tangent_cone_sample(submodels[k], theta,
                                        {eps0 * 0.02}, 160,
                                        derive_seed(seed, 103, k));
    dirs.insert(dirs.end(), cs.directions.begin(), cs.directions.end());
  }
  Matrix D(d, static_cast<Index>(dirs.size()));
  for (size_t i = 0; i < dirs.size(); ++i) D.col(static_cast<Index>(i)) = dirs[i];
  Eigen::JacobiSVD<Matrix> svd(D);
  int rank = 0;
  const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0;
  for (Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-6 * std::max(1.0, smax)) ++rank;
  if (rank < d)
    throw ConfigError("sampled submodel cones span only rank " +
                      std::to_string(rank) + " of " + std::to_string(d) +
                      " at theta " + format_point(theta));

  QuadraticReport rep;
  auto eng = make_engine(derive_seed(seed, 104));
  std::normal_distribution<double> gauss(0.0, 1.0);
  rep.directions.reserve(ndirs);
  for (int i = 0; i < ndirs; ++i) {
    Vector u(d);
    for (int j = 0; j < d; ++j) u[j] = gauss(eng);
    rep.directions.push_back(u.normalized());
  }
  const int nscales = 6;
  rep.values.resize(ndirs, nscales);
  for (int t = 0; t < nscales; ++t) {
    const double e = eps0 * std::pow(2.0, -t);
    rep.scales.push_back(e);
    double mx = 0.0;
    for (int i = 0; i < ndirs; ++i) {
      const double v = std::abs(f(theta + e * rep.directions[i]));
      rep.values(i, t) = v;
      mx = std::max(mx, v);
    }
    rep.max_values.push_back(mx);
  }
  rep.slope = loglog_slope(rep.scales, rep.max_values);
  rep.pass = rep.slope >= 1.9;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max |f| decays with slope %.3f over %d scales",
                rep.slope, nscales);
  rep.detail = buf;
  return rep;
}

std::string quadratic_report_json(const QuadraticReport& rep) {
  nlohmann::json j;
  j["pass"] = rep.pass;
  j["slope"] = rep.slope;
  j["detail"] = rep.detail;
  j["scales"] = rep.scales;
  j["max_values"] = rep.max_values;
  auto& samples = j["samples"];
  for (int t = 0; t < static_cast<int>(rep.scales.size()); ++t)
    for (size_t i = 0; i < rep.directions.size(); ++i) {
      nlohmann::json rec;
      std::vector<double> h(rep.directions[i].size());
      for (Index c = 0; c < rep.directions[i].size(); ++c)
        h[c] = rep.scales[t] * rep.directions[i][c];
      rec["h"] = h;
      rec["value"] = rep.values(static_cast<Index>(i), t);
      samples.push_back(std::move(rec));
    }
  j["version"] = kVersion;
  return j.dump(2);
}

JointTable table_from_coords(const Vector& h) {
  if (h.size() != 7)
    throw ConfigError("log-linear coordinates must have dimension 7");
  LogLinearParams l;
  l.vars = {0, 1, 2};
  l.values = Vector::Zero(8);
  for (int mask = 1; mask < 8; ++mask) l.values[mask] = h[mask - 1];
  return from_loglinear(l);
}

QuadraticReport adjustment_bias_quadratic(int ndirs, double eps0,
                                          uint64_t seed) {
  auto f = [](const Vector& h) {
    return adjustment_bias({table_from_coords(h), {"X", "Y", "Z"}});
  };

  // X indep Z: the {X,Z}-marginal interaction vanishes (nonlinear in h).
  ImplicitModel mx;
  mx.ambient_dim = 7;
  mx.constraints.push_back([](const Vector& h) {
    LogLinearParams l = marginal_loglinear(table_from_coords(h), {0, 2});
    return l.values[3];
  });
  mx.gradients.emplace_back();  // central differences

  // Y indep Z given X: two joint coordinates vanish (masks YZ=6, XYZ=7).
  ImplicitModel myz;
  myz.ambient_dim = 7;
  for (int mask : {6, 7}) {
    myz.constraints.push_back(
        [mask](const Vector& h) { return h[mask - 1]; });
    myz.gradients.push_back([mask](const Vector&) {
      Vector g = Vector::Zero(7);
      g[mask - 1] = 1.0;
      return g;
    });
  }

  return quadratic_vanishing_check(f, {mx, myz}, Vector::Zero(7), ndirs, eps0,
                                   seed);
}

}  // namespace mgeo
