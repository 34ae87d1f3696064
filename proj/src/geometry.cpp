#include "mgeo/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "mgeo/csv.hpp"
#include "mgeo/rng.hpp"

namespace mgeo {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_point(const ImplicitModel& m, const Vector& x) {
  if (x.size() != m.ambient_dim) throw ConfigError("point dimension mismatch");
  if (m.lo.size() == m.ambient_dim && m.hi.size() == m.ambient_dim)
    for (Index i = 0; i < x.size(); ++i)
      if (x(i) < m.lo(i) || x(i) > m.hi(i))
        throw ConfigError("point outside the model's box bounds");
}

Vector clamp_box(const ImplicitModel& m, Vector x) {
  if (m.lo.size() == m.ambient_dim && m.hi.size() == m.ambient_dim)
    for (Index i = 0; i < x.size(); ++i)
      x(i) = std::min(std::max(x(i), m.lo(i)), m.hi(i));
  return x;
}

Vector fd_gradient(const std::function<double(const Vector&)>& f,
                   const Vector& x) {
  Vector g(x.size());
  double h = 1e-6;
  for (Index i = 0; i < x.size(); ++i) {
    Vector up = x, dn = x;
    up(i) += h;
    dn(i) -= h;
    g(i) = (f(up) - f(dn)) / (2 * h);
  }
  return g;
}

// Gauss-Newton descent of |g(y)| to the zero set.  Returns true on success.
bool to_feasible(const ImplicitModel& m, Vector& y, int iters) {
  for (int it = 0; it < iters; ++it) {
    Vector g = constraint_values(m, y);
    if (g.cwiseAbs().maxCoeff() <= m.membership_tol) return true;
    Matrix J = constraint_jacobian(m, y);
    Vector step = J.completeOrthogonalDecomposition().solve(g);
    double base = g.norm();
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      Vector cand = clamp_box(m, y - t * step);
      if (constraint_values(m, cand).norm() < base) {
        y = cand;
        moved = true;
        break;
      }
    }
    if (!moved) return constraint_values(m, y).cwiseAbs().maxCoeff() <=
                       m.membership_tol;
  }
  return constraint_values(m, y).cwiseAbs().maxCoeff() <= m.membership_tol;
}

// Component of r orthogonal to the constraint normals at y.
Vector tangential(const ImplicitModel& m, const Vector& y, const Vector& r) {
  Matrix Jt = constraint_jacobian(m, y).transpose();  // d x k
  Eigen::ColPivHouseholderQR<Matrix> qr(Jt);
  long rank = qr.rank();
  if (rank == 0) return r;
  Matrix Q = qr.householderQ();
  Matrix Qr = Q.leftCols(rank);
  return r - Qr * (Qr.transpose() * r);
}

}  // namespace

bool membership(const ImplicitModel& m, const Vector& x) {
  if (x.size() != m.ambient_dim) return false;
  return constraint_values(m, x).cwiseAbs().maxCoeff() <= m.membership_tol;
}

Vector constraint_values(const ImplicitModel& m, const Vector& x) {
  if (m.constraints.empty()) throw ConfigError("model has no constraints");
  Vector g(m.constraints.size());
  for (size_t i = 0; i < m.constraints.size(); ++i) g(i) = m.constraints[i](x);
  return g;
}

Matrix constraint_jacobian(const ImplicitModel& m, const Vector& x) {
  Matrix J(m.constraints.size(), m.ambient_dim);
  for (size_t i = 0; i < m.constraints.size(); ++i) {
    Vector row = (i < m.gradients.size() && m.gradients[i])
                     ? m.gradients[i](x)
                     : fd_gradient(m.constraints[i], x);
    J.row(i) = row;
  }
  return J;
}

ImplicitModel intersect_models(const ImplicitModel& a, const ImplicitModel& b) {
  if (a.ambient_dim != b.ambient_dim)
    throw ConfigError("cannot intersect models of different dimension");
  ImplicitModel out = a;
  out.constraints.insert(out.constraints.end(), b.constraints.begin(),
                         b.constraints.end());
  out.gradients.resize(a.constraints.size());
  auto bg = b.gradients;
  bg.resize(b.constraints.size());
  out.gradients.insert(out.gradients.end(), bg.begin(), bg.end());
  out.membership_tol = std::min(a.membership_tol, b.membership_tol);
  return out;
}

Vector project_to_model(const ImplicitModel& m, const Vector& x,
                        const ProjectOptions& opt) {
  check_point(m, x);
  bool found = false;
  Vector best;
  double best_dist = 0.0;
  const double scales[4] = {0.0, 0.02, 0.2, 1.0};
  for (int s = 0; s < opt.starts; ++s) {
    Vector y = x;
    if (s > 0) {
      auto rng = make_engine(derive_seed(opt.seed, 0x9e0, s));
      std::normal_distribution<double> gauss(0.0, 1.0);
      double scale = scales[s % 4] * std::max(1.0, x.norm());
      if (scale == 0.0) scale = 0.02;
      for (Index i = 0; i < y.size(); ++i) y(i) += scale * gauss(rng);
      y = clamp_box(m, y);
    }
    if (!to_feasible(m, y, opt.feas_iters)) continue;

    // walk along the model to reduce |y - x|
    for (int it = 0; it < opt.refine_iters; ++it) {
      Vector r = y - x;
      Vector d = tangential(m, y, r);
      if (d.norm() <= 1e-12 * std::max(1.0, r.norm())) break;
      double t = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 25; ++ls, t *= 0.5) {
        Vector cand = clamp_box(m, y - t * d);
        if (!to_feasible(m, cand, opt.feas_iters)) continue;
        if ((cand - x).norm() < (y - x).norm() - 1e-15) {
          y = cand;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }

    double dist = (y - x).norm();
    if (!found || dist < best_dist) {
      found = true;
      best = y;
      best_dist = dist;
    }
  }
  if (!found)
    throw NumericError("projection found no feasible point from any start");
  return best;
}

double local_hausdorff(const ImplicitModel& m1, const ImplicitModel& m2,
                       const Vector& theta, double eps, int nsamples,
                       uint64_t seed) {
  if (eps <= 0.0) throw ConfigError("radius must be positive");
  if (nsamples < 1) throw ConfigError("need at least one sample");
  if (!membership(m1, theta) || !membership(m2, theta))
    throw ConfigError("base point must lie in both models");

  auto side = [&](const ImplicitModel& a, const ImplicitModel& b,
                  uint64_t side_tag) {
    double sup = 0.0;
    int kept = 0;
    for (int i = 0; i < nsamples; ++i) {
      auto rng = make_engine(derive_seed(seed, side_tag, i));
      std::normal_distribution<double> gauss(0.0, 1.0);
      Vector u(theta.size());
      for (Index t = 0; t < u.size(); ++t) u(t) = gauss(rng);
      double un = u.norm();
      if (un == 0.0) continue;
      u /= un;
      ProjectOptions popt;
      popt.seed = derive_seed(seed, side_tag + 2, i);
      Vector px;
      try {
        px = project_to_model(a, theta + eps * u, popt);
      } catch (const NumericError&) {
        continue;
      }
      if ((px - theta).norm() > eps * (1 + 1e-12)) continue;
      ++kept;
      Vector q = project_to_model(b, px, popt);
      sup = std::max(sup, (px - q).norm());
    }
    if (kept == 0)
      throw NumericError("no model points sampled inside the ball");
    return sup;
  };
  return std::max(side(m1, m2, 0), side(m2, m1, 1));
}

namespace {

struct LineFit {
  double slope, intercept, stderr_, r2;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  size_t n = x.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (size_t i = 0; i < n; ++i) {
    double e = y[i] - (f.intercept + f.slope * x[i]);
    rss += e * e;
  }
  f.r2 = (syy > 0) ? 1.0 - rss / syy : 1.0;
  f.stderr_ = (n > 2) ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
  return f;
}

}  // namespace

OrderEstimate equivalence_order(const ImplicitModel& m1,
                                const ImplicitModel& m2, const Vector& theta,
                                const std::vector<double>& radii, int nsamples,
                                uint64_t seed) {
  if (radii.size() < 4) throw ConfigError("need at least 4 radii");
  for (size_t i = 0; i + 1 < radii.size(); ++i)
    if (radii[i] <= radii[i + 1])
      throw ConfigError("radii must be strictly decreasing");
  if (radii.front() <= 0 || radii.back() <= 0)
    throw ConfigError("radii must be positive");
  if (radii.front() / radii.back() < 8.0 * (1 - 1e-9))
    throw ConfigError("radii must span at least 3 octaves");

  OrderEstimate est;
  est.radii = radii;
  for (size_t r = 0; r < radii.size(); ++r) {
    double d = local_hausdorff(m1, m2, theta, radii[r], nsamples,
                               derive_seed(seed, 0x5a, r));
    if (d <= 0.0)
      throw NumericError(
          "zero distance estimate; models locally indistinguishable");
    est.distances.push_back(d);
  }

  std::vector<double> lx, ly;
  for (size_t i = 0; i < radii.size(); ++i) {
    lx.push_back(std::log(radii[i]));
    ly.push_back(std::log(est.distances[i]));
  }
  LineFit full = fit_line(lx, ly);
  est.slope = full.slope;
  est.slope_stderr = full.stderr_;
  est.r2 = full.r2;
  if (full.r2 < 0.98) {
    // largest radius may sit outside the asymptotic regime
    std::vector<double> tx(lx.begin() + 1, lx.end());
    std::vector<double> ty(ly.begin() + 1, ly.end());
    LineFit trunc = fit_line(tx, ty);
    if (trunc.r2 >= 0.995) {
      est.slope = trunc.slope;
      est.slope_stderr = trunc.stderr_;
      est.r2 = trunc.r2;
      est.truncated = true;
    }
  }
  return est;
}

std::string near_equivalence_class(double slope) {
  int c = static_cast<int>(std::floor(slope + 0.15));
  std::ostringstream os;
  if (c < 1)
    os << "not 1-near-equivalent (slope " << slope << ")";
  else
    os << "at least " << c << "-near-equivalent";
  return os.str();
}

std::string order_estimate_csv(const OrderEstimate& est, uint64_t seed) {
  CsvBuilder csv({"epsilon", "dhat"});
  for (size_t i = 0; i < est.radii.size(); ++i)
    csv.row({fmt_double(est.radii[i]), fmt_double(est.distances[i])});
  std::ostringstream extra;
  extra << "slope=" << fmt_double(est.slope) << ", stderr="
        << fmt_double(est.slope_stderr) << ", r2=" << fmt_double(est.r2)
        << ", truncated=" << (est.truncated ? 1 : 0) << ", class=\""
        << near_equivalence_class(est.slope) << "\"";
  return csv.finish(seed, extra.str());
}

ConeSample tangent_cone_sample(const ImplicitModel& m, const Vector& theta,
                               const std::vector<double>& radii, int nsamples,
                               uint64_t seed) {
  if (radii.empty()) throw ConfigError("need at least one radius");
  if (!membership(m, theta)) throw ConfigError("base point must lie in model");
  double eps = *std::min_element(radii.begin(), radii.end());
  ConeSample cs;
  cs.theta = theta;
  cs.radii = radii;
  double dedup_cos = std::cos(2.0 * kPi / 180.0);
  for (int i = 0; i < nsamples; ++i) {
    auto rng = make_engine(derive_seed(seed, 0xc0, i));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector u(theta.size());
    for (Index t = 0; t < u.size(); ++t) u(t) = gauss(rng);
    if (u.norm() == 0.0) continue;
    u /= u.norm();
    ProjectOptions popt;
    popt.seed = derive_seed(seed, 0xc1, i);
    Vector px;
    try {
      px = project_to_model(m, theta + eps * u, popt);
    } catch (const NumericError&) {
      continue;
    }
    double nrm = (px - theta).norm();
    // keep only points at the sampled scale: projections that collapse far
    // inside the ball sit in the tolerance slack of the constraints (width
    // ~ sqrt(tol) at degenerate zeros) and yield spurious directions
    if (nrm < 0.2 * eps || nrm > eps * (1 + 1e-12)) continue;
    Vector dir = (px - theta) / nrm;
    bool fresh = true;
    for (const Vector& d : cs.directions)
      if (d.dot(dir) >= dedup_cos) {
        fresh = false;
        break;
      }
    if (fresh) cs.directions.push_back(dir);
  }
  return cs;
}

OverlapReport overlap_probe(const ImplicitModel& m1, const ImplicitModel& m2,
                            const Vector& theta,
                            const std::vector<double>& radii, int nsamples,
                            uint64_t seed) {
  if (!membership(m1, theta) || !membership(m2, theta))
    throw ConfigError("base point must lie in both models");
  ConeSample c1 = tangent_cone_sample(m1, theta, radii, nsamples,
                                      derive_seed(seed, 1));
  ConeSample c2 = tangent_cone_sample(m2, theta, radii, nsamples,
                                      derive_seed(seed, 2));
  ConeSample c12 = tangent_cone_sample(intersect_models(m1, m2), theta, radii,
                                       nsamples, derive_seed(seed, 3));
  double near_cos = std::cos(5.0 * kPi / 180.0);
  double far_cos = std::cos(15.0 * kPi / 180.0);

  OverlapReport rep;
  for (const Vector& d : c1.directions) {
    bool shared = false;
    for (const Vector& e : c2.directions)
      if (d.dot(e) >= near_cos) {
        shared = true;
        break;
      }
    if (!shared) continue;
    bool clear = true;
    for (const Vector& e : c12.directions)
      if (d.dot(e) > far_cos) {
        clear = false;
        break;
      }
    if (clear) rep.witnesses.push_back(d);
  }
  rep.verdict = !rep.witnesses.empty();
  std::ostringstream os;
  os << (rep.verdict ? "overlap evidence" : "no overlap evidence") << ": "
     << rep.witnesses.size() << " witness direction(s) shared within 5 deg, "
     << ">= 15 deg from " << c12.directions.size()
     << " sampled intersection direction(s)";
  rep.detail = os.str();
  return rep;
}

namespace {

ImplicitModel hyperplane(int dim, int coord) {
  ImplicitModel m;
  m.ambient_dim = dim;
  m.constraints.push_back([coord](const Vector& x) { return x(coord); });
  m.gradients.push_back([dim, coord](const Vector&) {
    Vector g = Vector::Zero(dim);
    g(coord) = 1.0;
    return g;
  });
  return m;
}

std::map<std::string, CatalogEntry> build_catalog() {
  std::map<std::string, CatalogEntry> cat;

  {
    CatalogEntry e;
    e.name = "example_1_1";
    e.description = "line theta2=0 vs parabola theta2=theta1^2 in R^2";
    e.m1 = hyperplane(2, 1);
    e.m2.ambient_dim = 2;
    e.m2.constraints.push_back(
        [](const Vector& x) { return x(0) * x(0) - x(1); });
    e.m2.gradients.push_back([](const Vector& x) {
      Vector g(2);
      g << 2 * x(0), -1.0;
      return g;
    });
    e.theta = Vector::Zero(2);
    e.expected_slope = 2.0;
    cat[e.name] = e;
  }
  {
    CatalogEntry e;
    e.name = "transversal_lines";
    e.description = "theta2=0 vs theta2=theta1: transversal lines in R^2";
    e.m1 = hyperplane(2, 1);
    e.m2.ambient_dim = 2;
    e.m2.constraints.push_back([](const Vector& x) { return x(1) - x(0); });
    e.m2.gradients.push_back([](const Vector&) {
      Vector g(2);
      g << -1.0, 1.0;
      return g;
    });
    e.theta = Vector::Zero(2);
    e.expected_slope = 1.0;
    cat[e.name] = e;
  }
  {
    CatalogEntry e;
    e.name = "figure_3c";
    e.description = "x-axis {y=z=0} vs cylinder {z=-x^2} in R^3";
    e.m1.ambient_dim = 3;
    e.m1.constraints.push_back([](const Vector& x) { return x(1); });
    e.m1.constraints.push_back([](const Vector& x) { return x(2); });
    e.m1.gradients.push_back([](const Vector&) {
      Vector g(3);
      g << 0, 1, 0;
      return g;
    });
    e.m1.gradients.push_back([](const Vector&) {
      Vector g(3);
      g << 0, 0, 1;
      return g;
    });
    e.m2.ambient_dim = 3;
    e.m2.constraints.push_back(
        [](const Vector& x) { return x(2) + x(0) * x(0); });
    e.m2.gradients.push_back([](const Vector& x) {
      Vector g(3);
      g << 2 * x(0), 0, 1;
      return g;
    });
    e.theta = Vector::Zero(3);
    e.expected_slope = 1.0;
    cat[e.name] = e;
  }
  {
    CatalogEntry e;
    e.name = "gauss_marg_vs_cond";
    e.description =
        "marginal vs conditional independence over (r_xy, r_xz, r_yz)";
    e.m1 = hyperplane(3, 0);
    e.m2.ambient_dim = 3;
    e.m2.constraints.push_back(
        [](const Vector& x) { return x(0) - x(1) * x(2); });
    e.m2.gradients.push_back([](const Vector& x) {
      Vector g(3);
      g << 1.0, -x(2), -x(1);
      return g;
    });
    e.theta = Vector::Zero(3);
    e.expected_slope = 2.0;
    cat[e.name] = e;
  }
  {
    // coordinates (r12, r14, r23, r24, r34) on the rho_13 = 0 slice
    CatalogEntry e;
    e.name = "discpath_k";
    e.description =
        "quartic-model constraint surfaces fa vs fb on the rho_13=0 slice";
    e.m1.ambient_dim = 5;
    e.m1.constraints.push_back([](const Vector& x) {
      return x(1) - x(0) * x(3) + x(0) * x(4) * x(2) - x(1) * x(2) * x(2);
    });
    e.m1.gradients.push_back([](const Vector& x) {
      Vector g(5);
      g << -x(3) + x(4) * x(2), 1.0 - x(2) * x(2),
          x(0) * x(4) - 2.0 * x(1) * x(2), -x(0), x(0) * x(2);
      return g;
    });
    e.m2.ambient_dim = 5;
    e.m2.constraints.push_back(
        [](const Vector& x) { return x(1) - x(0) * x(3); });
    e.m2.gradients.push_back([](const Vector& x) {
      Vector g(5);
      g << -x(3), 1.0, 0.0, -x(0), 0.0;
      return g;
    });
    e.theta = Vector::Zero(5);
    e.expected_slope = 3.0;
    cat[e.name] = e;
    CatalogEntry alias = e;
    alias.name = "discpath_3";
    cat[alias.name] = alias;
  }
  return cat;
}

}  // namespace

const std::map<std::string, CatalogEntry>& catalog() {
  static const std::map<std::string, CatalogEntry> cat = build_catalog();
  return cat;
}

const CatalogEntry& catalog_lookup(const std::string& name) {
  const auto& cat = catalog();
  auto it = cat.find(name);
  if (it == cat.end()) throw ConfigError("unknown catalog entry: " + name);
  return it->second;
}

std::string catalog_json() {
  std::ostringstream os;
  os << "{\n";
  bool first = true;
  for (const auto& [name, e] : catalog()) {
    if (!first) os << ",\n";
    first = false;
    os << "  \"" << name << "\": {\"ambient_dim\": " << e.m1.ambient_dim
       << ", \"constraints\": [" << e.m1.constraints.size() << ", "
       << e.m2.constraints.size() << "], \"theta\": [";
    for (Index i = 0; i < e.theta.size(); ++i)
      os << (i ? ", " : "") << fmt_double(e.theta(i));
    os << "], \"description\": \"" << e.description << "\"}";
  }
  os << "\n}\n";
  return os.str();
}

std::vector<double> default_radii() {
  std::vector<double> r;
  for (int k = 3; k <= 8; ++k) r.push_back(std::pow(2.0, -k));
  return r;
}

}  // namespace mgeo
