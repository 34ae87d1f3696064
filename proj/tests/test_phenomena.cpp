#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "mgeo/loglinear.hpp"
#include "mgeo/phenomena.hpp"
#include "mgeo/rng.hpp"
#include "nlohmann/json.hpp"

using namespace mgeo;

namespace {

// Truncated MA(inf) oracle: gamma_k = sigma2 sum_j psi_j psi_{j+k}.
Vector psi_truncation_gamma(const ArmaSpec& s, int max_lag, int terms) {
  const int p = static_cast<int>(s.phi.size());
  const int q = static_cast<int>(s.theta.size());
  std::vector<double> psi(terms, 0.0);
  psi[0] = 1.0;
  for (int j = 1; j < terms; ++j) {
    double v = j <= q ? s.theta[j - 1] : 0.0;
    for (int i = 1; i <= std::min(j, p); ++i) v += s.phi[i - 1] * psi[j - i];
    psi[j] = v;
  }
  Vector g = Vector::Zero(max_lag + 1);
  for (int k = 0; k <= max_lag; ++k) {
    double v = 0.0;
    for (int j = 0; j + k < terms; ++j) v += psi[j] * psi[j + k];
    g[k] = s.sigma2 * v;
  }
  return g;
}

Vector random_positive(int n, std::mt19937_64& eng) {
  std::normal_distribution<double> gauss(0.0, 0.6);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = std::exp(gauss(eng));
  return v / v.sum();
}

DiscreteCausalTable random_causal(std::vector<int> arity,
                                  std::vector<std::string> roles,
                                  uint64_t seed) {
  auto eng = make_engine(seed);
  JointTable t = make_joint(arity, random_positive(
                                       static_cast<int>(table_size(arity)), eng));
  return {std::move(t), std::move(roles)};
}

ImplicitModel hyperplane(int dim, int coord) {
  ImplicitModel m;
  m.ambient_dim = dim;
  m.constraints.push_back([coord](const Vector& x) { return x[coord]; });
  m.gradients.push_back([dim, coord](const Vector&) {
    Vector g = Vector::Zero(dim);
    g[coord] = 1.0;
    return g;
  });
  return m;
}

ImplicitModel coordinate_axis(int dim, int keep) {
  ImplicitModel m;
  m.ambient_dim = dim;
  for (int c = 0; c < dim; ++c) {
    if (c == keep) continue;
    m.constraints.push_back([c](const Vector& x) { return x[c]; });
    m.gradients.push_back([dim, c](const Vector&) {
      Vector g = Vector::Zero(dim);
      g[c] = 1.0;
      return g;
    });
  }
  return m;
}

}  // namespace

TEST_CASE("autocovariance closed forms") {
  ArmaSpec wn;
  wn.sigma2 = 2.5;
  Vector g = arma_autocovariance(wn, 4);
  CHECK(g[0] == doctest::Approx(2.5).epsilon(1e-14));
  for (int k = 1; k <= 4; ++k) CHECK(g[k] == 0.0);

  for (double th : {-0.8, -0.3, 0.4, 0.95, 1.4}) {
    ArmaSpec ma;
    ma.theta = {th};
    ma.sigma2 = 1.7;
    Vector gm = arma_autocovariance(ma, 3);
    CHECK(gm[0] == doctest::Approx(1.7 * (1 + th * th)).epsilon(1e-14));
    CHECK(gm[1] == doctest::Approx(1.7 * th).epsilon(1e-14));
    CHECK(std::abs(gm[2]) < 1e-14);
    CHECK(std::abs(gm[3]) < 1e-14);
  }

  for (double ph = -0.9; ph <= 0.9001; ph += 0.1) {
    ArmaSpec ar;
    ar.phi = {ph};
    ar.sigma2 = 0.8;
    Vector ga = arma_autocovariance(ar, 6);
    for (int k = 0; k <= 6; ++k) {
      const double want = 0.8 * std::pow(ph, k) / (1 - ph * ph);
      CHECK(std::abs(ga[k] - want) < 1e-12);
    }
  }

  // ARMA(1,1) textbook form.
  const double ph = 0.6, th = 0.3, s2 = 1.3;
  ArmaSpec mix;
  mix.phi = {ph};
  mix.theta = {th};
  mix.sigma2 = s2;
  Vector gx = arma_autocovariance(mix, 5);
  const double g0 = s2 * (1 + th * th + 2 * ph * th) / (1 - ph * ph);
  const double g1 = s2 * (1 + ph * th) * (ph + th) / (1 - ph * ph);
  CHECK(gx[0] == doctest::Approx(g0).epsilon(1e-13));
  CHECK(gx[1] == doctest::Approx(g1).epsilon(1e-13));
  for (int k = 2; k <= 5; ++k)
    CHECK(gx[k] == doctest::Approx(ph * gx[k - 1]).epsilon(1e-13));
}

TEST_CASE("autocovariance matches truncated psi expansion") {
  std::vector<ArmaSpec> specs;
  {
    ArmaSpec a;
    a.phi = {0.5, -0.3};
    a.theta = {0.4, 0.2};
    a.sigma2 = 1.1;
    specs.push_back(a);
  }
  {
    ArmaSpec b;
    b.phi = {0.2, 0.1, -0.25};
    b.theta = {-0.7};
    b.sigma2 = 0.6;
    specs.push_back(b);
  }
  {
    ArmaSpec c;
    c.phi = {-0.85};
    c.theta = {0.3, -0.2, 0.1};
    c.sigma2 = 2.0;
    specs.push_back(c);
  }
  for (const auto& s : specs) {
    Vector exact = arma_autocovariance(s, 10);
    Vector approx = psi_truncation_gamma(s, 10, 4000);
    CHECK((exact - approx).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("autocovariance input validation") {
  ArmaSpec unit;
  unit.phi = {1.0};
  CHECK_THROWS_AS(arma_autocovariance(unit, 3), ConfigError);

  ArmaSpec root_one;
  root_one.phi = {0.5, 0.5};  // z = 1 is a root
  CHECK_THROWS_AS(arma_autocovariance(root_one, 3), ConfigError);

  ArmaSpec explosive;
  explosive.phi = {1.3};
  CHECK_THROWS_AS(check_stationary(explosive), ConfigError);

  ArmaSpec bad_var;
  bad_var.sigma2 = 0.0;
  CHECK_THROWS_AS(check_stationary(bad_var), ConfigError);

  ArmaSpec fine;
  fine.phi = {0.99};
  CHECK_NOTHROW(check_stationary(fine));
  CHECK_THROWS_AS(arma_autocovariance(fine, -1), ConfigError);
}

TEST_CASE("tangent directions agree to first order only") {
  for (int order : {1, 2, 3}) {
    ArmaTangentReport rep = arma_tangent_check(order);
    CHECK(rep.order == order);
    CHECK(rep.max_discrepancy < 1e-6);
    CHECK(rep.second_gap == doctest::Approx(2.0).epsilon(1e-5));
  }
  ArmaTangentReport rep = arma_tangent_check(2, 1e-3);
  CHECK(rep.max_discrepancy < 1e-5);
  CHECK(rep.second_gap == doctest::Approx(2.0).epsilon(1e-5));
  auto parsed = nlohmann::json::parse(arma_tangent_json(rep));
  CHECK(parsed["order"] == 2);
  CHECK(parsed["second_gap"].get<double>() == doctest::Approx(rep.second_gap));
  CHECK_THROWS_AS(arma_tangent_check(0), ConfigError);
}

TEST_CASE("verma functional against brute-force oracle") {
  for (uint64_t rep = 0; rep < 6; ++rep) {
    std::vector<int> ar =
        rep % 2 ? std::vector<int>{3, 2, 2, 3} : std::vector<int>{2, 3, 2, 2};
    DiscreteCausalTable p =
        random_causal(ar, {"A", "L", "B", "Y"}, derive_seed(90210, rep));
    VermaResult r = verma_functional(p);

    const int na = ar[0], nl = ar[1], nb = ar[2], ny = ar[3];
    auto cell = [&](int a, int l, int b, int y) {
      return p.table.probs[a + na * (l + nl * (b + static_cast<long>(nb) * y))];
    };
    for (int a = 0; a < na; ++a) {
      double pa = 0;
      for (int l = 0; l < nl; ++l)
        for (int b = 0; b < nb; ++b)
          for (int y = 0; y < ny; ++y) pa += cell(a, l, b, y);
      for (int b = 0; b < nb; ++b)
        for (int y = 0; y < ny; ++y) {
          double want = 0;
          for (int l = 0; l < nl; ++l) {
            double pal = 0, palb = 0;
            for (int bb = 0; bb < nb; ++bb)
              for (int yy = 0; yy < ny; ++yy) pal += cell(a, l, bb, yy);
            for (int yy = 0; yy < ny; ++yy) palb += cell(a, l, b, yy);
            want += (pal / pa) * (cell(a, l, b, y) / palb);
          }
          CHECK(verma_q(r, a, b, y) == doctest::Approx(want).epsilon(1e-14));
        }
    }

    // q(.; a, b) is a distribution over y
    for (int a = 0; a < na; ++a)
      for (int b = 0; b < nb; ++b) {
        double s = 0;
        for (int y = 0; y < ny; ++y) s += verma_q(r, a, b, y);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
    CHECK(r.variation > 1e-3);  // generic tables are not constant in a
  }
}

TEST_CASE("verma functional factorization cases") {
  auto eng = make_engine(derive_seed(424242));

  // L independent of B given A: q reduces to p(y | a, b).
  {
    const int na = 2, nl = 3, nb = 2, ny = 2;
    Vector pa = random_positive(na, eng);
    Matrix pla(nl, na), pba(nb, na);
    for (int a = 0; a < na; ++a) {
      pla.col(a) = random_positive(nl, eng);
      pba.col(a) = random_positive(nb, eng);
    }
    std::vector<double> pyalb(na * nl * nb * ny);
    Vector probs(na * nl * nb * ny);
    for (int a = 0; a < na; ++a)
      for (int l = 0; l < nl; ++l)
        for (int b = 0; b < nb; ++b) {
          Vector py = random_positive(ny, eng);
          for (int y = 0; y < ny; ++y) {
            long idx = a + na * (l + nl * (b + static_cast<long>(nb) * y));
            pyalb[idx] = py[y];
            probs[idx] = pa[a] * pla(l, a) * pba(b, a) * py[y];
          }
        }
    DiscreteCausalTable p{make_joint({na, nl, nb, ny}, probs),
                          {"A", "L", "B", "Y"}};
    VermaResult r = verma_functional(p);
    JointTable paby = margin_table(p.table, {0, 2, 3});
    JointTable pab = margin_table(p.table, {0, 2});
    for (int a = 0; a < na; ++a)
      for (int b = 0; b < nb; ++b)
        for (int y = 0; y < ny; ++y) {
          double cond = paby.probs[cell_index(paby.arity, {a, b, y})] /
                        pab.probs[cell_index(pab.arity, {a, b})];
          CHECK(verma_q(r, a, b, y) == doctest::Approx(cond).epsilon(1e-12));
        }
  }

  // Latent-confounder generation: A -> L -> B -> Y with U -> L, U -> Y
  // marginalized out makes q constant in a.
  {
    const int na = 2, nl = 2, nb = 2, ny = 3, nu = 3;
    Vector pu = random_positive(nu, eng);
    Vector pa = random_positive(na, eng);
    std::vector<Vector> plau(na * nu), pyu(nb * nu), pbl(nl);
    for (auto& v : plau) v = random_positive(nl, eng);
    for (auto& v : pyu) v = random_positive(ny, eng);
    for (auto& v : pbl) v = random_positive(nb, eng);
    Vector probs = Vector::Zero(na * nl * nb * ny);
    for (int a = 0; a < na; ++a)
      for (int l = 0; l < nl; ++l)
        for (int b = 0; b < nb; ++b)
          for (int y = 0; y < ny; ++y) {
            double s = 0;
            for (int u = 0; u < nu; ++u)
              s += pu[u] * pa[a] * plau[a + na * u][l] * pbl[l][b] *
                   pyu[b + nb * u][y];
            probs[a + na * (l + nl * (b + static_cast<long>(nb) * y))] = s;
          }
    DiscreteCausalTable p{make_joint({na, nl, nb, ny}, probs),
                          {"A", "L", "B", "Y"}};
    CHECK(verma_functional(p).variation < 1e-12);
    // the table itself still depends on a
    CHECK(!check_ci_discrete(p.table, {0, 3, {1, 2}}, 1e-6));
  }

  DiscreteCausalTable wrong =
      random_causal({2, 2, 2}, {"X", "Y", "Z"}, derive_seed(7));
  CHECK_THROWS_AS(verma_functional(wrong), ConfigError);
}

TEST_CASE("adjustment bias oracle and zero cases") {
  for (uint64_t rep = 0; rep < 6; ++rep) {
    std::vector<int> ar =
        rep % 2 ? std::vector<int>{2, 3, 3} : std::vector<int>{2, 2, 2};
    DiscreteCausalTable p =
        random_causal(ar, {"X", "Y", "Z"}, derive_seed(5150, rep));
    const int nx = ar[0], ny = ar[1], nz = ar[2];
    auto cell = [&](int x, int y, int z) {
      return p.table.probs[x + nx * (y + static_cast<long>(ny) * z)];
    };
    double want = 0;
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < ny; ++y) {
        double px = 0, pxy = 0, adj = 0;
        for (int yy = 0; yy < ny; ++yy)
          for (int z = 0; z < nz; ++z) px += cell(x, yy, z);
        for (int z = 0; z < nz; ++z) pxy += cell(x, y, z);
        for (int z = 0; z < nz; ++z) {
          double pz = 0, pxz = 0;
          for (int xx = 0; xx < nx; ++xx)
            for (int yy = 0; yy < ny; ++yy) pz += cell(xx, yy, z);
          for (int yy = 0; yy < ny; ++yy) pxz += cell(x, yy, z);
          adj += pz * cell(x, y, z) / pxz;
        }
        want = std::max(want, std::abs(pxy / px - adj));
      }
    CHECK(adjustment_bias(p) == doctest::Approx(want).epsilon(1e-14));
    CHECK(adjustment_bias(p) > 1e-4);  // generic tables are confounded
  }

  auto eng = make_engine(derive_seed(31337));
  // X independent of Z
  {
    const int nx = 2, ny = 2, nz = 3;
    Vector px = random_positive(nx, eng), pz = random_positive(nz, eng);
    Vector probs(nx * ny * nz);
    for (int x = 0; x < nx; ++x)
      for (int z = 0; z < nz; ++z) {
        Vector py = random_positive(ny, eng);
        for (int y = 0; y < ny; ++y)
          probs[x + nx * (y + static_cast<long>(ny) * z)] =
              px[x] * pz[z] * py[y];
      }
    DiscreteCausalTable p{make_joint({nx, ny, nz}, probs), {"X", "Y", "Z"}};
    CHECK(adjustment_bias(p) < 1e-12);
  }
  // Y independent of Z given X
  {
    const int nx = 2, ny = 3, nz = 2;
    Matrix pxz(nx, nz);
    double tot = 0;
    std::normal_distribution<double> gauss(0.0, 0.5);
    for (int x = 0; x < nx; ++x)
      for (int z = 0; z < nz; ++z) {
        pxz(x, z) = std::exp(gauss(eng));
        tot += pxz(x, z);
      }
    pxz /= tot;
    std::vector<Vector> pyx(nx);
    for (auto& v : pyx) v = random_positive(ny, eng);
    Vector probs(nx * ny * nz);
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < ny; ++y)
        for (int z = 0; z < nz; ++z)
          probs[x + nx * (y + static_cast<long>(ny) * z)] =
              pxz(x, z) * pyx[x][y];
    DiscreteCausalTable p{make_joint({nx, ny, nz}, probs), {"X", "Y", "Z"}};
    CHECK(adjustment_bias(p) < 1e-12);
  }
}

TEST_CASE("adjustment bias invariant under z relabeling") {
  DiscreteCausalTable p =
      random_causal({2, 2, 3}, {"X", "Y", "Z"}, derive_seed(222));
  const double base = adjustment_bias(p);
  const std::vector<int> perm{2, 0, 1};
  Vector relab(p.table.probs.size());
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 3; ++z)
        relab[x + 2 * (y + 2L * perm[z])] = p.table.probs[x + 2 * (y + 2L * z)];
  DiscreteCausalTable q{make_joint({2, 2, 3}, relab), {"X", "Y", "Z"}};
  // summation order changes with the labels, so allow roundoff
  CHECK(adjustment_bias(q) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("adjustment bias shrinks quadratically along coordinate paths") {
  std::vector<double> scales, values;
  for (int t = 0; t <= 5; ++t) {
    const double e = 0.1 * std::pow(2.0, -t);
    Vector h = Vector::Zero(7);
    h[4] = e;  // XZ interaction (mask 5)
    h[5] = e;  // YZ interaction (mask 6)
    scales.push_back(e);
    values.push_back(
        adjustment_bias({table_from_coords(h), {"X", "Y", "Z"}}));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < scales.size(); ++i) {
    double lx = std::log(scales[i]), ly = std::log(values[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(scales.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope > 1.9);
  CHECK(slope < 2.1);
}

TEST_CASE("coordinate chart for three binary variables") {
  CHECK_THROWS_AS(table_from_coords(Vector::Zero(5)), ConfigError);
  JointTable uni = table_from_coords(Vector::Zero(7));
  for (int i = 0; i < 8; ++i)
    CHECK(uni.probs[i] == doctest::Approx(0.125).epsilon(1e-14));

  auto eng = make_engine(derive_seed(99));
  std::normal_distribution<double> gauss(0.0, 0.3);
  Vector h(7);
  for (int i = 0; i < 7; ++i) h[i] = gauss(eng);
  LogLinearParams l = to_loglinear(table_from_coords(h));
  for (int mask = 1; mask < 8; ++mask)
    CHECK(l.values[mask] == doctest::Approx(h[mask - 1]).epsilon(1e-12));
}

TEST_CASE("quadratic vanishing: product of coordinates") {
  auto f = [](const Vector& x) { return x[0] * x[1]; };
  QuadraticReport rep = quadratic_vanishing_check(
      f, {hyperplane(2, 0), hyperplane(2, 1)}, Vector::Zero(2), 48, 0.1, 11);
  CHECK(rep.pass);
  CHECK(rep.slope == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(rep.scales.size() == 6);
  CHECK(rep.max_values.front() > rep.max_values.back());

  auto parsed = nlohmann::json::parse(quadratic_report_json(rep));
  CHECK(parsed["pass"].get<bool>());
  CHECK(parsed["samples"].size() == 48 * 6);
  CHECK(parsed["samples"][0]["h"].size() == 2);
  CHECK(parsed["samples"][0].contains("value"));
}

TEST_CASE("quadratic vanishing: three coordinate axes") {
  auto f = [](const Vector& x) {
    return x[0] * x[1] + x[1] * x[2] + x[2] * x[0];
  };
  std::vector<ImplicitModel> axes{coordinate_axis(3, 0), coordinate_axis(3, 1),
                                  coordinate_axis(3, 2)};
  QuadraticReport rep =
      quadratic_vanishing_check(f, axes, Vector::Zero(3), 48, 0.1, 12);
  CHECK(rep.pass);
  CHECK(rep.slope == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("quadratic vanishing: precondition and slope failures") {
  // f does not vanish on the second submodel
  auto g = [](const Vector& x) { return x[0] + x[1]; };
  try {
    quadratic_vanishing_check(g, {hyperplane(2, 0), hyperplane(2, 1)},
                              Vector::Zero(2), 16, 0.1, 13);
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("witness") != std::string::npos);
  }

  // cones do not span: the same line twice
  auto f = [](const Vector& x) { return x[0] * x[1]; };
  try {
    quadratic_vanishing_check(f, {hyperplane(2, 1), hyperplane(2, 1)},
                              Vector::Zero(2), 16, 0.1, 14);
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("rank") != std::string::npos);
  }

  // vanishes on both axes but only first-order small off them
  auto h = [](const Vector& x) {
    const double r = x.norm();
    return r == 0.0 ? 0.0 : x[0] * x[1] / r;
  };
  QuadraticReport rep = quadratic_vanishing_check(
      h, {hyperplane(2, 0), hyperplane(2, 1)}, Vector::Zero(2), 32, 0.1, 15);
  CHECK(!rep.pass);
  CHECK(rep.slope == doctest::Approx(1.0).epsilon(1e-2));

  // theta off the submodel
  CHECK_THROWS_AS(quadratic_vanishing_check(f, {hyperplane(2, 0)},
                                            Vector::Ones(2), 16, 0.1, 16),
                  ConfigError);
}

TEST_CASE("adjustment bias is quadratic at the doubly robust intersection") {
  QuadraticReport rep = adjustment_bias_quadratic(48, 0.05, 20240815);
  CHECK(rep.pass);
  CHECK(rep.slope > 1.9);
  CHECK(rep.slope < 2.3);
  auto parsed = nlohmann::json::parse(quadratic_report_json(rep));
  CHECK(parsed["slope"].get<double>() == doctest::Approx(rep.slope));
}
