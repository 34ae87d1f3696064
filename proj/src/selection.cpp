#include "mgeo/selection.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mgeo/csv.hpp"
#include "mgeo/parallel.hpp"
#include "mgeo/rng.hpp"
#include "nlohmann/json.hpp"

namespace mgeo {
namespace {

double logsumexp(const Vector& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

double soft(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// max violation of the subgradient conditions at (lam, grad)
double kkt_residual_at(const Vector& lam, const Vector& grad, double nu) {
  double worst = 0.0;
  for (Index a = 1; a < lam.size(); ++a) {
    if (lam[a] == 0.0)
      worst = std::max(worst, std::abs(grad[a]) - nu);
    else
      worst = std::max(worst,
                       std::abs(grad[a] + nu * (lam[a] > 0 ? 1.0 : -1.0)));
  }
  return worst;
}

double half_logit_cell(double g) { return 1.0 / (1.0 + std::exp(-2.0 * g)); }

}  // namespace

void validate_counts(const CountTable& t) {
  if (t.arity.empty()) throw ConfigError("count table needs variables");
  for (int a : t.arity)
    if (a < 2) throw ConfigError("count table arities must be at least 2");
  if (static_cast<long>(t.counts.size()) != table_size(t.arity))
    throw ConfigError("count table has wrong number of cells");
  long total = 0;
  for (long c : t.counts) {
    if (c < 0) throw ConfigError("negative cell count");
    total += c;
  }
  if (total != t.n || t.n < 1)
    throw ConfigError("count table total does not match n >= 1");
}

CountTable make_counts(std::vector<int> arity, std::vector<long> counts) {
  CountTable t;
  t.arity = std::move(arity);
  t.counts = std::move(counts);
  t.n = 0;
  for (long c : t.counts) t.n += c;
  validate_counts(t);
  return t;
}

CountTable sample_counts(const JointTable& p, long n, uint64_t seed) {
  validate_joint(p);
  if (n < 1) throw ConfigError("sample size must be at least 1");
  auto eng = make_engine(seed);
  const long cells = p.probs.size();
  CountTable t;
  t.arity = p.arity;
  t.counts.assign(cells, 0);
  t.n = n;
  long remaining = n;
  double mass = 1.0;
  for (long i = 0; i + 1 < cells && remaining > 0; ++i) {
    const double q = std::clamp(p.probs[i] / mass, 0.0, 1.0);
    std::binomial_distribution<long> bin(remaining, q);
    const long c = bin(eng);
    t.counts[i] = c;
    remaining -= c;
    mass -= p.probs[i];
  }
  t.counts[cells - 1] += remaining;
  return t;
}

JointTable empirical_table(const CountTable& t, double smooth) {
  validate_counts(t);
  if (smooth < 0) throw ConfigError("smoothing must be nonnegative");
  const long cells = static_cast<long>(t.counts.size());
  Vector probs(cells);
  const double denom = static_cast<double>(t.n) + smooth * cells;
  for (long i = 0; i < cells; ++i)
    probs[i] = (t.counts[i] + smooth) / denom;
  return make_joint(t.arity, probs);  // rejects zero cells when smooth = 0
}

std::string write_counts_csv(const CountTable& t) {
  validate_counts(t);
  std::ostringstream os;
  for (size_t v = 0; v < t.arity.size(); ++v) os << "x" << v << ",";
  os << "count\n";
  for (size_t idx = 0; idx < t.counts.size(); ++idx) {
    for (int lev : cell_levels(t.arity, static_cast<long>(idx)))
      os << lev << ",";
    os << t.counts[idx] << "\n";
  }
  return os.str();
}

CountTable read_counts_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty count table CSV");
  size_t nv = split_csv_line(line).size();
  if (nv < 2) throw ConfigError("count table CSV needs levels and count");
  --nv;
  std::vector<std::vector<int>> levels;
  std::vector<long> counts;
  std::vector<int> arity(nv, 2);
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (fields.size() != nv + 1)
      throw ConfigError("count table CSV row width mismatch");
    std::vector<int> lev(nv);
    for (size_t v = 0; v < nv; ++v) {
      lev[v] = std::stoi(fields[v]);
      if (lev[v] < 0) throw ConfigError("negative level");
      arity[v] = std::max(arity[v], lev[v] + 1);
    }
    levels.push_back(lev);
    counts.push_back(std::stol(fields[nv]));
  }
  long sz = table_size(arity);
  if (static_cast<long>(levels.size()) != sz)
    throw ConfigError("count table CSV does not cover the state space once");
  std::vector<long> cells(sz, 0);
  std::vector<char> seen(sz, 0);
  for (size_t r = 0; r < levels.size(); ++r) {
    long idx = cell_index(arity, levels[r]);
    if (seen[idx]) throw ConfigError("duplicate cell in count table CSV");
    seen[idx] = 1;
    cells[idx] = counts[r];
  }
  return make_counts(arity, cells);
}

LassoFit loglin_lasso(const CountTable& data, double nu, const Vector& init) {
  validate_counts(data);
  const int nvars = static_cast<int>(data.arity.size());
  for (int a : data.arity)
    if (a != 2) throw ConfigError("lasso requires binary variables");
  if (nvars > 12) throw ConfigError("lasso supports at most 12 variables");
  if (!(nu >= 0.0) || !std::isfinite(nu))
    throw ConfigError("penalty must be a nonnegative number");
  const long N = 1L << nvars;
  const double n = static_cast<double>(data.n);

  Vector cnt(N);
  for (long i = 0; i < N; ++i) cnt[i] = static_cast<double>(data.counts[i]);

  Vector lam;
  if (init.size() == 0) {
    lam = Vector::Zero(N);
  } else {
    if (init.size() != N) throw ConfigError("init has wrong dimension");
    lam = init;
    lam[0] = 0.0;
  }

  auto smooth_value = [&](const Vector& l, Vector& eta_out) {
    eta_out = l;
    wht_inplace(eta_out);
    return -cnt.dot(eta_out) + n * logsumexp(eta_out);
  };
  auto gradient = [&](const Vector& eta) {
    const double lz = logsumexp(eta);
    Vector g = n * (eta.array() - lz).exp().matrix() - cnt;
    wht_inplace(g);  // M is symmetric
    return g;
  };
  auto penalty = [&](const Vector& l) {
    return nu * (l.cwiseAbs().sum() - std::abs(l[0]));
  };

  Vector eta;
  double g_val = smooth_value(lam, eta);
  double obj = g_val + penalty(lam);
  double L = std::max(1.0, n);
  const double L_cap = 8.0 * n * static_cast<double>(N) + 1e6;
  double kkt = kkt_residual_at(lam, gradient(eta), nu);

  LassoFit fit;
  const int max_iters = 50000;
  bool moving = true;
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    Vector grad = gradient(eta);
    kkt = kkt_residual_at(lam, grad, nu);
    if (!moving && kkt <= 1e-7) break;

    Vector cand, eta_cand;
    double g_cand = 0.0;
    for (;;) {
      cand = lam - grad / L;
      for (Index a = 1; a < cand.size(); ++a) cand[a] = soft(cand[a], nu / L);
      cand[0] = 0.0;
      g_cand = smooth_value(cand, eta_cand);
      const Vector d = cand - lam;
      const double model = g_val + grad.dot(d) + 0.5 * L * d.squaredNorm();
      if (g_cand <= model + 1e-10 * (std::abs(g_val) + 1.0)) break;
      L *= 2.0;
      if (L > L_cap) throw NumericError("lasso step size collapsed");
    }
    const double obj_cand = g_cand + penalty(cand);
    moving = std::abs(obj - obj_cand) > 1e-10 * (std::abs(obj) + 1.0);
    lam.swap(cand);
    eta.swap(eta_cand);
    g_val = g_cand;
    obj = obj_cand;
  }
  if (iter == max_iters && moving)
    throw NumericError("lasso did not converge in 50000 iterations");
  kkt = kkt_residual_at(lam, gradient(eta), nu);

  fit.iters = iter;
  fit.objective = obj;
  fit.kkt_residual = kkt;
  fit.lambda.vars.resize(nvars);
  for (int v = 0; v < nvars; ++v) fit.lambda.vars[v] = v;
  fit.lambda.values = lam;
  fit.lambda.values[0] = -logsumexp(eta);  // normalize the table to mass 1
  for (long a = 1; a < N; ++a)
    if (lam[a] != 0.0) fit.pattern.subsets.push_back(static_cast<int>(a));
  return fit;
}

LearnedStructure learn_bn(const CountTable& data, double delta) {
  if (!(delta > 0.5 && delta < 1.0))
    throw ConfigError("delta must lie in (0.5, 1)");
  LearnedStructure s;
  s.nvars = static_cast<int>(data.arity.size());
  s.delta = delta;
  s.nu = std::pow(static_cast<double>(data.n), delta);
  s.fit = loglin_lasso(data, s.nu);

  std::set<std::pair<int, int>> skel;
  std::set<int> active(s.fit.pattern.subsets.begin(),
                       s.fit.pattern.subsets.end());
  for (int mask : s.fit.pattern.subsets) {
    const int bits = std::popcount(static_cast<unsigned>(mask));
    if (bits == 2) {
      const int i = std::countr_zero(static_cast<unsigned>(mask));
      const int j = 31 - std::countl_zero(static_cast<unsigned>(mask));
      skel.insert({i, j});
    } else if (bits >= 3) {
      s.higher_order.push_back(mask);
    }
  }
  s.skeleton.assign(skel.begin(), skel.end());

  for (int k = 0; k < s.nvars; ++k)
    for (int i = 0; i < s.nvars; ++i) {
      if (i == k || !skel.count({std::min(i, k), std::max(i, k)})) continue;
      for (int j = i + 1; j < s.nvars; ++j) {
        if (j == k || !skel.count({std::min(j, k), std::max(j, k)})) continue;
        if (skel.count({i, j})) continue;  // shielded
        const int triple = (1 << i) | (1 << j) | (1 << k);
        if (active.count(triple))
          s.colliders.push_back({i, k, j});
        else
          s.noncolliders.push_back({i, k, j});
      }
    }
  return s;
}

MixedGraph structure_graph(const LearnedStructure& s) {
  std::map<std::pair<int, int>, std::pair<bool, bool>> heads;
  for (auto [i, j] : s.skeleton) heads[{i, j}];
  for (const auto& t : s.colliders)
    for (int end : {t[0], t[2]}) {
      auto key = std::minmax(end, t[1]);
      if (end == key.first)
        heads[key].second = true;  // arrow into t[1] = key.second
      else
        heads[key].first = true;
    }
  MixedGraph g(s.nvars);
  for (const auto& [pair, h] : heads) {
    if (h.first && h.second)
      g.add_edge(pair.first, pair.second, EdgeKind::Bidirected);
    else if (h.first)
      g.add_edge(pair.second, pair.first, EdgeKind::Directed);
    else if (h.second)
      g.add_edge(pair.first, pair.second, EdgeKind::Directed);
    else
      g.add_edge(pair.first, pair.second, EdgeKind::Undirected);
  }
  return g;
}

std::string structure_json(const LearnedStructure& s) {
  nlohmann::json j;
  j["nvars"] = s.nvars;
  j["delta"] = s.delta;
  j["nu"] = s.nu;
  auto& sk = j["skeleton"];
  sk = nlohmann::json::array();
  for (auto [a, b] : s.skeleton) sk.push_back({a, b});
  j["colliders"] = s.colliders;
  j["noncolliders"] = s.noncolliders;
  j["higher_order"] = s.higher_order;
  j["pattern"] = s.fit.pattern.subsets;
  auto& lv = j["lambda"];
  lv = nlohmann::json::array();
  for (Index a = 0; a < s.fit.lambda.values.size(); ++a)
    lv.push_back({{"mask", a}, {"value", s.fit.lambda.values[a]}});
  j["diagnostics"] = {{"objective", s.fit.objective},
                      {"kkt_residual", s.fit.kkt_residual},
                      {"iters", s.fit.iters}};
  j["version"] = kVersion;
  return j.dump(2);
}

JointTable collider3_table(double gx, double gy, double gxy) {
  Vector probs(8);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      const double sx = 2 * x - 1, sy = 2 * y - 1;
      const double g = gx * sx + gy * sy + gxy * sx * sy;
      for (int z = 0; z < 2; ++z)
        probs[x + 2 * y + 4 * z] =
            0.25 * half_logit_cell((2 * z - 1) * g);
    }
  return make_joint({2, 2, 2}, probs);
}

JointTable chain3_table(double gxz, double gzy) {
  Vector probs(8);
  for (int x = 0; x < 2; ++x)
    for (int z = 0; z < 2; ++z)
      for (int y = 0; y < 2; ++y) {
        const double sx = 2 * x - 1, sz = 2 * z - 1, sy = 2 * y - 1;
        probs[x + 2 * y + 4 * z] = 0.5 * half_logit_cell(gxz * sx * sz) *
                                   half_logit_cell(gzy * sz * sy);
      }
  return make_joint({2, 2, 2}, probs);
}

std::vector<int> dag_pattern(const MixedGraph& dag) {
  const int n = dag.num_vertices();
  if (n < 1 || n > 12) throw ConfigError("DAG must have 1..12 vertices");
  for (const Edge& e : dag.edges())
    if (e.kind != EdgeKind::Directed)
      throw ConfigError("generating graph must be a DAG (directed edges only)");
  if (!is_ancestral(dag)) throw ConfigError("generating graph has a cycle");

  std::set<int> masks;
  for (int v = 0; v < n; ++v) {
    int pa_mask = 0;
    for (int p : dag.parents(v)) pa_mask |= 1 << p;
    // all A with v in A subseteq {v} u pa(v)
    for (int sub = pa_mask;; sub = (sub - 1) & pa_mask) {
      masks.insert(sub | (1 << v));
      if (sub == 0) break;
    }
  }
  return {masks.begin(), masks.end()};
}

RecoveryCurve theorem71_experiment(const Theorem71Config& cfg) {
  if (!(cfg.gamma > 0.25 && cfg.gamma < 0.5))
    throw ConfigError("gamma must lie in (1/4, 1/2)");
  if (!(cfg.delta > 0.5 && cfg.delta < 1.0))
    throw ConfigError("delta must lie in (0.5, 1)");
  if (cfg.n_grid.empty()) throw ConfigError("empty n grid");
  for (size_t i = 0; i < cfg.n_grid.size(); ++i) {
    if (cfg.n_grid[i] < 2) throw ConfigError("n grid entries must be >= 2");
    if (i && cfg.n_grid[i] <= cfg.n_grid[i - 1])
      throw ConfigError("n grid must be strictly increasing");
  }
  if (cfg.replicates < 1) throw ConfigError("need at least one replicate");

  RecoveryCurve curve;
  curve.target = dag_pattern(cfg.dag);
  std::vector<double> h = cfg.h;
  if (h.empty()) h.assign(curve.target.size(), cfg.h_scale);
  if (h.size() != curve.target.size())
    throw ConfigError("h must have one component per pattern coordinate");
  for (double v : h)
    if (v == 0.0 || !std::isfinite(v))
      throw ConfigError(
          "h has a zero component on a tangent coordinate of the pattern");

  const int nvars = cfg.dag.num_vertices();
  const long N = 1L << nvars;
  curve.n = cfg.n_grid;
  curve.fraction.assign(cfg.n_grid.size(), 0.0);

  const long jobs =
      static_cast<long>(cfg.n_grid.size()) * cfg.replicates;
  std::vector<char> hit(jobs, 0);
  parallel_for(
      jobs,
      [&](long job) {
        const size_t ni = static_cast<size_t>(job) / cfg.replicates;
        const long rep = job % cfg.replicates;
        const long n = cfg.n_grid[ni];
        LogLinearParams l;
        l.vars.resize(nvars);
        for (int v = 0; v < nvars; ++v) l.vars[v] = v;
        l.values = Vector::Zero(N);
        const double scale = std::pow(static_cast<double>(n), -cfg.gamma);
        for (size_t t = 0; t < curve.target.size(); ++t)
          l.values[curve.target[t]] = scale * h[t];
        CountTable data = sample_counts(from_loglinear(l), n,
                                        derive_seed(cfg.seed, ni, rep));
        try {
          LearnedStructure st = learn_bn(data, cfg.delta);
          hit[job] = st.fit.pattern.subsets == curve.target;
        } catch (const NumericError&) {
          // a non-converged fit counts as a miss
        }
      },
      cfg.nthreads);
  for (size_t i = 0; i < cfg.n_grid.size(); ++i) {
    long hits = 0;
    for (long r = 0; r < cfg.replicates; ++r)
      hits += hit[i * cfg.replicates + r];
    curve.fraction[i] = static_cast<double>(hits) / cfg.replicates;
  }
  return curve;
}

CovSelect cov_select_moment(const SampleCov& sc, double delta) {
  const Index d = sc.S.rows();
  if (d < 1 || sc.S.cols() != d) throw ConfigError("S must be square");
  if (sc.n < 2) throw ConfigError("sample size must be at least 2");
  if (!(delta > 0.5 && delta < 1.0))
    throw ConfigError("delta must lie in (0.5, 1)");
  if ((sc.S - sc.S.transpose()).cwiseAbs().maxCoeff() >
      1e-8 * std::max(1.0, sc.S.cwiseAbs().maxCoeff()))
    throw ConfigError("S must be symmetric");

  CovSelect out;
  out.threshold = std::pow(static_cast<double>(sc.n), delta - 1.0);
  const double half = 0.5 * out.threshold;
  const Matrix Ssym = 0.5 * (sc.S + sc.S.transpose());

  auto soft_offdiag = [&](const Matrix& A) {
    Matrix X = A;
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j)
        if (i != j) X(i, j) = soft(A(i, j), half);
    return X;
  };

  Matrix X = soft_offdiag(Ssym);
  constexpr double kFloor = 1e-8;
  bool ok = false;
  for (out.rounds = 1; out.rounds <= 100; ++out.rounds) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(X);
    if (es.eigenvalues().minCoeff() >= kFloor * (1.0 - 1e-9)) {
      ok = true;
      break;
    }
    Vector ev = es.eigenvalues().cwiseMax(kFloor);
    Matrix floored =
        es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    X = soft_offdiag(0.5 * (floored + floored.transpose()));
  }
  if (!ok) throw NumericError("no positive definite fixpoint in 100 rounds");

  out.sigma = X;
  for (Index i = 0; i < d; ++i)
    for (Index j = i + 1; j < d; ++j)
      if (X(i, j) != 0.0)
        out.pattern.positions.emplace_back(static_cast<int>(i),
                                           static_cast<int>(j));
  return out;
}

}  // namespace mgeo
