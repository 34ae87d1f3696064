#include "mgeo/gaussian.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <random>
#include <sstream>

#include "mgeo/rng.hpp"

namespace mgeo {

namespace {

bool symmetric(const Matrix& M, double tol = 1e-12) {
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol;
}

double smallest_eigenvalue(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Matrix submatrix(const Matrix& M, const std::vector<int>& rows,
                 const std::vector<int>& cols) {
  Matrix out(rows.size(), cols.size());
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < cols.size(); ++c) out(r, c) = M(rows[r], cols[c]);
  return out;
}

}  // namespace

void check_correlation(const Matrix& P) {
  if (P.rows() != P.cols()) throw ConfigError("correlation matrix not square");
  if (!symmetric(P)) throw ConfigError("correlation matrix not symmetric");
  for (Index i = 0; i < P.rows(); ++i)
    if (P(i, i) != 1.0) throw ConfigError("correlation diagonal must be 1");
  if (smallest_eigenvalue(P) <= 1e-10)
    throw ConfigError("correlation matrix not positive definite");
}

void validate_sem(const SemParams& p) {
  int n = p.graph.num_vertices();
  if (p.B.rows() != n || p.B.cols() != n || p.Omega.rows() != n ||
      p.Omega.cols() != n)
    throw ConfigError("SEM matrices must be n x n");
  if (!symmetric(p.Omega)) throw ConfigError("Omega not symmetric");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto e = p.graph.edge_between(i, j);
      bool directed_ij =
          e && e->kind == EdgeKind::Directed && e->tail == i && e->head == j;
      if (p.B(i, j) != 0.0 && !directed_ij)
        throw ConfigError("B nonzero off the directed edges");
      if (i != j) {
        bool bidirected = e && e->kind == EdgeKind::Bidirected;
        if (p.Omega(i, j) != 0.0 && !bidirected)
          throw ConfigError("Omega nonzero off the bidirected edges");
      }
    }
  if (smallest_eigenvalue(p.Omega) <= 0.0)
    throw ConfigError("Omega not positive definite");
}

Matrix sem_to_covariance(const SemParams& p) {
  validate_sem(p);
  int n = p.graph.num_vertices();
  Matrix ImB = Matrix::Identity(n, n) - p.B;
  Eigen::FullPivLU<Matrix> lu(ImB);
  if (!lu.isInvertible()) throw NumericError("I - B is singular");
  Matrix inv = lu.inverse();
  return inv.transpose() * p.Omega * inv;
}

SemParams disc_path_sem(int k, double s, DiscVariant variant,
                        double error_variance) {
  if (error_variance <= 0.0) throw ConfigError("error variance must be > 0");
  auto [g, gp] = build_discpath_graphs(k);
  SemParams p;
  p.graph = (variant == DiscVariant::Gk) ? g : gp;
  int n = k + 1;
  p.B = Matrix::Zero(n, n);
  p.Omega = Matrix::Identity(n, n) * error_variance;
  double rho = 0.4 * std::pow(2.0, -s);
  for (const Edge& e : p.graph.edges()) {
    bool on_path = std::abs(e.head - e.tail) == 1;  // consecutive on 0..k
    double w = on_path ? rho : 0.5;
    if (e.kind == EdgeKind::Directed)
      p.B(e.tail, e.head) = w;
    else
      p.Omega(e.tail, e.head) = p.Omega(e.head, e.tail) = w * error_variance;
  }
  Matrix sigma = sem_to_covariance(p);
  if (smallest_eigenvalue(sigma) <= 0.0) {
    std::ostringstream os;
    os << "disc_path_sem covariance not positive definite at k=" << k
       << ", s=" << s;
    throw NumericError(os.str());
  }
  return p;
}

double partial_correlation(const Matrix& sigma, int i, int j,
                           const std::vector<int>& cond) {
  int n = static_cast<int>(sigma.rows());
  if (i < 0 || i >= n || j < 0 || j >= n || i == j)
    throw ConfigError("partial_correlation needs distinct vertices in range");
  for (int c : cond)
    if (c < 0 || c >= n || c == i || c == j)
      throw ConfigError("conditioning set must exclude the endpoints");
  double sii = sigma(i, i), sjj = sigma(j, j), sij = sigma(i, j);
  if (!cond.empty()) {
    Matrix scc = submatrix(sigma, cond, cond);
    Eigen::LDLT<Matrix> ldlt(scc);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw NumericError("conditioning block not positive definite");
    Matrix sic = submatrix(sigma, {i}, cond);
    Matrix sjc = submatrix(sigma, {j}, cond);
    Matrix sol_i = ldlt.solve(sic.transpose());
    Matrix sol_j = ldlt.solve(sjc.transpose());
    sii -= (sic * sol_i)(0, 0);
    sjj -= (sjc * sol_j)(0, 0);
    sij -= (sic * sol_j)(0, 0);
  }
  if (sii <= 0.0 || sjj <= 0.0)
    throw NumericError("nonpositive conditional variance");
  return sij / std::sqrt(sii * sjj);
}

double constraint_fb(const Matrix& pi) {
  if (pi.rows() != 4 || pi.cols() != 4)
    throw ConfigError("constraint needs a 4 x 4 matrix");
  return pi(0, 3) - pi(0, 1) * pi(1, 3);
}

double constraint_fa(const Matrix& pi) {
  if (pi.rows() != 4 || pi.cols() != 4)
    throw ConfigError("constraint needs a 4 x 4 matrix");
  return pi(0, 3) - pi(0, 1) * pi(1, 3) + pi(0, 1) * pi(2, 3) * pi(1, 2) -
         pi(0, 3) * pi(1, 2) * pi(1, 2);
}

SampleCov sample_cov(const Matrix& sigma, long n, uint64_t seed) {
  Index p = sigma.rows();
  if (n < p + 1) throw ConfigError("sample size must exceed the dimension");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NumericError("covariance not positive definite");
  Matrix L = llt.matrixL();
  auto rng = make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector z(p), x(p);
  Matrix acc = Matrix::Zero(p, p);
  for (long t = 0; t < n; ++t) {
    for (Index r = 0; r < p; ++r) z(r) = gauss(rng);
    x.noalias() = L * z;
    acc.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  Matrix S = acc.selfadjointView<Eigen::Lower>();
  S /= static_cast<double>(n);
  return {S, n};
}

double gaussian_deviance(const SampleCov& sc, const Matrix& sigma_hat) {
  Index p = sigma_hat.rows();
  Eigen::LLT<Matrix> llt(sigma_hat);
  if (llt.info() != Eigen::Success)
    throw NumericError("fitted covariance not positive definite");
  Matrix K = llt.solve(Matrix::Identity(p, p));
  Matrix SK = sc.S * K;
  Eigen::PartialPivLU<Matrix> lu(SK);
  double logdet = lu.matrixLU().diagonal().array().abs().log().sum();
  return static_cast<double>(sc.n) * (SK.trace() - logdet - p);
}

MagFit fit_mag_gaussian(const MixedGraph& g, const SampleCov& sc,
                        int max_sweeps, double tol) {
  int p = g.num_vertices();
  if (sc.S.rows() != p || sc.S.cols() != p)
    throw ConfigError("sample covariance dimension mismatch");
  if (sc.n <= p) throw ConfigError("need n > dimension");
  for (const Edge& e : g.edges())
    if (e.kind == EdgeKind::Undirected)
      throw ConfigError("fitter handles directed and bidirected edges only");

  const Matrix& S = sc.S;
  // row-acting orientation internally: X = BX + eps, B(i, j) != 0 for j -> i.
  Matrix B = Matrix::Zero(p, p);
  Matrix Om = Matrix::Zero(p, p);
  Om.diagonal() = S.diagonal();

  auto sigma_of = [&]() -> Matrix {
    Matrix ImB = Matrix::Identity(p, p) - B;
    Matrix inv = ImB.inverse();
    return inv * Om * inv.transpose();
  };

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (int i = 0; i < p; ++i) {
      auto pa = g.parents(i);
      auto sp = g.spouses(i);
      std::vector<int> rest;
      for (int v = 0; v < p; ++v)
        if (v != i) rest.push_back(v);

      int np = static_cast<int>(pa.size());
      int ns = static_cast<int>(sp.size());
      if (np + ns == 0) {
        double nv = S(i, i);
        max_change = std::max(max_change, std::abs(nv - Om(i, i)));
        Om(i, i) = nv;
        continue;
      }

      // Covariances of the regressors [X_pa; Z_sp] with each other and with
      // X_i, where Z = (Om_{-i,-i})^-1 eps_{-i} and eps = (I - B) X.
      Matrix ImB_rest(rest.size(), p);
      for (size_t r = 0; r < rest.size(); ++r) {
        ImB_rest.row(r) = -B.row(rest[r]);
        ImB_rest(r, rest[r]) += 1.0;
      }
      Matrix cov_eps = ImB_rest * S * ImB_rest.transpose();  // cov(eps_{-i})
      Matrix cov_x_eps = S * ImB_rest.transpose();           // cov(X, eps_{-i})

      Matrix O = submatrix(Om, rest, rest);
      Eigen::LDLT<Matrix> oldlt(O);
      if (oldlt.info() != Eigen::Success || !oldlt.isPositive())
        throw RicfError("noise covariance lost positive definiteness",
                        sigma_of());
      Matrix Oinv = oldlt.solve(Matrix::Identity(p - 1, p - 1));

      // positions of the spouses inside `rest`
      std::vector<int> sp_pos(ns);
      for (int t = 0; t < ns; ++t) {
        auto it = std::lower_bound(rest.begin(), rest.end(), sp[t]);
        sp_pos[t] = static_cast<int>(it - rest.begin());
      }

      int m = np + ns;
      Matrix G(m, m);
      Vector h(m);
      Matrix cov_z = Oinv * cov_eps * Oinv;      // cov(Z)
      Matrix cov_x_z = cov_x_eps * Oinv;         // cov(X, Z)
      for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) {
          double v;
          if (a < np && b < np)
            v = S(pa[a], pa[b]);
          else if (a < np)
            v = cov_x_z(pa[a], sp_pos[b - np]);
          else if (b < np)
            v = cov_x_z(pa[b], sp_pos[a - np]);
          else
            v = cov_z(sp_pos[a - np], sp_pos[b - np]);
          G(a, b) = v;
        }
        h(a) = (a < np) ? S(i, pa[a]) : cov_x_z(i, sp_pos[a - np]);
      }
      Eigen::LDLT<Matrix> gldlt(G);
      if (gldlt.info() != Eigen::Success)
        throw RicfError("singular regression system", sigma_of());
      Vector coef = gldlt.solve(h);

      // residual variance of the regression
      double resid = S(i, i) - 2.0 * coef.dot(h) + coef.dot(G * coef);

      for (int t = 0; t < np; ++t) {
        double nv = coef(t);
        max_change = std::max(max_change, std::abs(nv - B(i, pa[t])));
        B(i, pa[t]) = nv;
      }
      Matrix Oinv_ss(ns, ns);
      for (int a = 0; a < ns; ++a)
        for (int b = 0; b < ns; ++b) Oinv_ss(a, b) = Oinv(sp_pos[a], sp_pos[b]);
      Vector lam = coef.tail(ns);
      for (int t = 0; t < ns; ++t) {
        double nv = lam(t);
        max_change = std::max(max_change, std::abs(nv - Om(i, sp[t])));
        Om(i, sp[t]) = Om(sp[t], i) = nv;
      }
      double om_ii = resid + (ns > 0 ? double(lam.transpose() * Oinv_ss * lam)
                                     : 0.0);
      max_change = std::max(max_change, std::abs(om_ii - Om(i, i)));
      Om(i, i) = om_ii;
    }
    if (max_change < tol) {
      Matrix sigma = sigma_of();
      return {sigma, gaussian_deviance(sc, sigma), sweep};
    }
  }
  std::ostringstream os;
  os << "fit did not converge in " << max_sweeps << " sweeps";
  throw RicfError(os.str(), sigma_of());
}

}  // namespace mgeo
