#include "mgeo/loglinear.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "mgeo/csv.hpp"

namespace mgeo {

long table_size(const std::vector<int>& arity) {
  long n = 1;
  for (int a : arity) {
    if (a < 2) throw ConfigError("arities must be at least 2");
    if (n > (1L << 40) / a) throw ConfigError("state space too large");
    n *= a;
  }
  return n;
}

void validate_joint(const JointTable& p) {
  long n = table_size(p.arity);
  if (p.probs.size() != n) throw ConfigError("table size mismatch");
  if (p.probs.minCoeff() <= 0.0)
    throw ConfigError("joint table entries must be strictly positive");
  if (std::abs(p.probs.sum() - 1.0) > 1e-12)
    throw ConfigError("joint table must sum to 1");
}

JointTable make_joint(std::vector<int> arity, Vector probs) {
  JointTable p{std::move(arity), std::move(probs)};
  validate_joint(p);
  return p;
}

bool all_binary(const JointTable& p) {
  return std::all_of(p.arity.begin(), p.arity.end(),
                     [](int a) { return a == 2; });
}

long cell_index(const std::vector<int>& arity, const std::vector<int>& levels) {
  if (levels.size() != arity.size()) throw ConfigError("level count mismatch");
  long idx = 0, stride = 1;
  for (size_t v = 0; v < arity.size(); ++v) {
    if (levels[v] < 0 || levels[v] >= arity[v])
      throw ConfigError("level out of range");
    idx += levels[v] * stride;
    stride *= arity[v];
  }
  return idx;
}

std::vector<int> cell_levels(const std::vector<int>& arity, long index) {
  std::vector<int> lev(arity.size());
  for (size_t v = 0; v < arity.size(); ++v) {
    lev[v] = static_cast<int>(index % arity[v]);
    index /= arity[v];
  }
  return lev;
}

namespace {

template <typename Vec>
void wht_impl(Vec& v, long n) {
  if (n == 0 || (n & (n - 1)) != 0)
    throw ConfigError("transform length must be a power of two");
  for (long half = 1; half < n; half <<= 1)
    for (long block = 0; block < n; block += 2 * half)
      for (long t = block; t < block + half; ++t) {
        auto a = v[t];
        auto b = v[t + half];
        v[t] = a + b;
        v[t + half] = a - b;
      }
}

}  // namespace

void wht_inplace(Vector& v) { wht_impl(v, v.size()); }
void wht_inplace(std::vector<std::int64_t>& v) {
  wht_impl(v, static_cast<long>(v.size()));
}

DesignMatrix design_matrix(int nvars) {
  if (nvars < 0 || nvars > 16)
    throw ConfigError("design matrix limited to 16 variables");
  long n = 1L << nvars;
  DesignMatrix M(n, n);
  for (long a = 0; a < n; ++a)
    for (long b = 0; b < n; ++b)
      M(a, b) = (std::popcount(static_cast<uint64_t>(a & b)) % 2 == 0) ? 1 : -1;
  return M;
}

LogLinearParams to_loglinear(const JointTable& p) {
  validate_joint(p);
  if (!all_binary(p)) throw ConfigError("log-linear map needs binary variables");
  LogLinearParams l;
  l.vars.resize(p.arity.size());
  for (size_t v = 0; v < p.arity.size(); ++v) l.vars[v] = static_cast<int>(v);
  l.values = p.probs.array().log();
  wht_inplace(l.values);
  l.values /= static_cast<double>(p.probs.size());
  return l;
}

JointTable from_loglinear(const LogLinearParams& l) {
  long n = 1L << l.vars.size();
  if (l.values.size() != n) throw ConfigError("parameter block size mismatch");
  Vector eta = l.values;
  wht_inplace(eta);
  eta.array() -= eta.maxCoeff();  // overflow guard; drops into lambda_empty
  Vector p = eta.array().exp();
  p /= p.sum();
  return {std::vector<int>(l.vars.size(), 2), p};
}

JointTable margin_table(const JointTable& p, const std::vector<int>& K) {
  validate_joint(p);
  if (K.empty()) throw ConfigError("margin needs a nonempty variable set");
  if (!std::is_sorted(K.begin(), K.end()) ||
      std::adjacent_find(K.begin(), K.end()) != K.end())
    throw ConfigError("margin variables must be ascending and distinct");
  for (int v : K)
    if (v < 0 || v >= static_cast<int>(p.arity.size()))
      throw ConfigError("margin variable out of range");
  std::vector<int> arity_k(K.size());
  for (size_t t = 0; t < K.size(); ++t) arity_k[t] = p.arity[K[t]];
  JointTable out{arity_k, Vector::Zero(table_size(arity_k))};
  std::vector<int> lev_k(K.size());
  for (long idx = 0; idx < p.probs.size(); ++idx) {
    auto lev = cell_levels(p.arity, idx);
    for (size_t t = 0; t < K.size(); ++t) lev_k[t] = lev[K[t]];
    out.probs(cell_index(arity_k, lev_k)) += p.probs(idx);
  }
  return out;
}

LogLinearParams marginal_loglinear(const JointTable& p,
                                   const std::vector<int>& K) {
  JointTable pk = margin_table(p, K);
  if (!all_binary(pk))
    throw ConfigError("log-linear map needs binary variables");
  LogLinearParams l = to_loglinear(pk);
  l.vars = K;
  return l;
}

std::vector<CiParamId> ci_constraint_params(int a, int b,
                                            const std::vector<int>& C) {
  if (a == b) throw ConfigError("endpoints must differ");
  for (int c : C)
    if (c == a || c == b)
      throw ConfigError("conditioning set must exclude the endpoints");
  std::vector<int> margin{a, b};
  margin.insert(margin.end(), C.begin(), C.end());
  std::sort(margin.begin(), margin.end());
  if (std::adjacent_find(margin.begin(), margin.end()) != margin.end())
    throw ConfigError("conditioning set has repeats");
  std::vector<CiParamId> out;
  for (uint32_t mask = 0; mask < (1u << C.size()); ++mask) {
    std::vector<int> subset{a, b};
    for (size_t t = 0; t < C.size(); ++t)
      if (mask & (1u << t)) subset.push_back(C[t]);
    std::sort(subset.begin(), subset.end());
    out.push_back({margin, subset});
  }
  return out;
}

bool check_ci_discrete(const JointTable& p, const IndependenceStatement& stmt,
                       double tol) {
  validate_joint(p);
  std::vector<int> abc{stmt.i, stmt.j};
  abc.insert(abc.end(), stmt.cond.begin(), stmt.cond.end());
  std::sort(abc.begin(), abc.end());
  JointTable pabc = margin_table(p, abc);

  auto pos_of = [&](int v) {
    return static_cast<int>(std::lower_bound(abc.begin(), abc.end(), v) -
                            abc.begin());
  };
  int pi = pos_of(stmt.i), pj = pos_of(stmt.j);

  // margins of the (i, j, C)-table with i and/or j summed out, aligned by
  // zeroing the summed coordinate
  long sz = pabc.probs.size();
  auto margin_drop = [&](bool drop_i, bool drop_j) {
    Vector m = Vector::Zero(sz);
    for (long idx = 0; idx < sz; ++idx) {
      auto lev = cell_levels(pabc.arity, idx);
      if (drop_i) lev[pi] = 0;
      if (drop_j) lev[pj] = 0;
      m(cell_index(pabc.arity, lev)) += pabc.probs(idx);
    }
    return m;
  };
  Vector p_ic = margin_drop(false, true);
  Vector p_jc = margin_drop(true, false);
  Vector p_c = margin_drop(true, true);

  double worst = 0.0;
  for (long idx = 0; idx < sz; ++idx) {
    auto lev = cell_levels(pabc.arity, idx);
    auto lev_ic = lev, lev_jc = lev, lev_c = lev;
    lev_ic[pj] = 0;
    lev_jc[pi] = 0;
    lev_c[pi] = lev_c[pj] = 0;
    double resid = pabc.probs(idx) * p_c(cell_index(pabc.arity, lev_c)) -
                   p_ic(cell_index(pabc.arity, lev_ic)) *
                       p_jc(cell_index(pabc.arity, lev_jc));
    worst = std::max(worst, std::abs(resid));
  }
  return worst <= tol;
}

double general_loglinear(const JointTable& p, const std::vector<int>& A,
                         const std::vector<int>& xA) {
  validate_joint(p);
  if (xA.size() != A.size()) throw ConfigError("assignment length mismatch");
  for (size_t t = 0; t < A.size(); ++t) {
    int v = A[t];
    if (v < 0 || v >= static_cast<int>(p.arity.size()))
      throw ConfigError("variable out of range");
    if (xA[t] < 0 || xA[t] >= p.arity[v])
      throw ConfigError("level out of range");
  }
  double acc = 0.0;
  for (long idx = 0; idx < p.probs.size(); ++idx) {
    auto lev = cell_levels(p.arity, idx);
    double w = std::log(p.probs(idx));
    for (size_t t = 0; t < A.size(); ++t)
      w *= (lev[A[t]] == xA[t] ? p.arity[A[t]] : 0) - 1;
    acc += w;
  }
  return acc / static_cast<double>(p.probs.size());
}

std::string write_joint_csv(const JointTable& p) {
  validate_joint(p);
  std::ostringstream os;
  for (size_t v = 0; v < p.arity.size(); ++v) os << "x" << v << ",";
  os << "prob\n";
  for (long idx = 0; idx < p.probs.size(); ++idx) {
    for (int lev : cell_levels(p.arity, idx)) os << lev << ",";
    os << fmt_double(p.probs(idx)) << "\n";
  }
  return os.str();
}

JointTable read_joint_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty joint table CSV");
  size_t nv = split_csv_line(line).size();
  if (nv < 2) throw ConfigError("joint table CSV needs levels and prob");
  --nv;
  std::vector<std::vector<int>> levels;
  std::vector<double> probs;
  std::vector<int> arity(nv, 2);
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (fields.size() != nv + 1)
      throw ConfigError("joint table CSV row width mismatch");
    std::vector<int> lev(nv);
    for (size_t v = 0; v < nv; ++v) {
      lev[v] = std::stoi(fields[v]);
      if (lev[v] < 0) throw ConfigError("negative level");
      arity[v] = std::max(arity[v], lev[v] + 1);
    }
    levels.push_back(lev);
    probs.push_back(std::stod(fields[nv]));
  }
  long sz = table_size(arity);
  if (static_cast<long>(levels.size()) != sz)
    throw ConfigError("joint table CSV does not cover the state space once");
  Vector pv(sz);
  std::vector<char> seen(sz, 0);
  for (size_t r = 0; r < levels.size(); ++r) {
    long idx = cell_index(arity, levels[r]);
    if (seen[idx]) throw ConfigError("duplicate cell in joint table CSV");
    seen[idx] = 1;
    pv(idx) = probs[r];
  }
  return make_joint(arity, pv);
}

std::string write_loglinear_csv(const LogLinearParams& l) {
  std::ostringstream os;
  os << "mask,vars,value\n";
  for (long mask = 0; mask < l.values.size(); ++mask) {
    os << mask << ",";
    bool first = true;
    for (size_t t = 0; t < l.vars.size(); ++t)
      if (mask & (1L << t)) {
        if (!first) os << " ";
        os << l.vars[t];
        first = false;
      }
    os << "," << fmt_double(l.values(mask)) << "\n";
  }
  return os.str();
}

LogLinearParams read_loglinear_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || split_csv_line(line).size() != 3)
    throw ConfigError("log-linear CSV needs a mask,vars,value header");

  std::vector<long> masks;
  std::vector<std::vector<int>> varlists;
  std::vector<double> vals;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw ConfigError("log-linear CSV row width mismatch");
    long mask = std::stol(fields[0]);
    if (mask < 0) throw ConfigError("negative mask");
    std::vector<int> vl;
    std::istringstream vs(fields[1]);
    int v;
    while (vs >> v) vl.push_back(v);
    masks.push_back(mask);
    varlists.push_back(vl);
    vals.push_back(std::stod(fields[2]));
  }

  const long sz = static_cast<long>(masks.size());
  if (sz == 0 || (sz & (sz - 1)))
    throw ConfigError("log-linear CSV row count must be a power of two");
  int nvars = 0;
  while ((1L << nvars) < sz) ++nvars;

  LogLinearParams out;
  out.vars.assign(nvars, -1);
  out.values = Vector::Zero(sz);
  std::vector<char> seen(sz, 0);
  for (long r = 0; r < sz; ++r) {
    if (masks[r] >= sz) throw ConfigError("mask outside the subset range");
    if (seen[masks[r]]) throw ConfigError("duplicate mask");
    seen[masks[r]] = 1;
    out.values(masks[r]) = vals[r];
    // singleton rows name the variables
    for (int t = 0; t < nvars; ++t)
      if (masks[r] == (1L << t)) {
        if (varlists[r].size() != 1)
          throw ConfigError("singleton mask row must list one variable");
        out.vars[t] = varlists[r][0];
      }
  }
  for (int t = 0; t < nvars; ++t)
    if (out.vars[t] < 0) throw ConfigError("missing singleton mask row");

  // every row's variable list must match its mask bit for bit
  for (long r = 0; r < sz; ++r) {
    std::vector<int> expect;
    for (int t = 0; t < nvars; ++t)
      if (masks[r] & (1L << t)) expect.push_back(out.vars[t]);
    if (varlists[r] != expect)
      throw ConfigError("vars column disagrees with mask " +
                        std::to_string(masks[r]));
  }
  return out;
}

}  // namespace mgeo
