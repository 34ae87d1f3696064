#include "mgeo/power.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "mgeo/csv.hpp"
#include "mgeo/gaussian.hpp"
#include "mgeo/geometry.hpp"
#include "mgeo/graphs.hpp"
#include "mgeo/parallel.hpp"
#include "mgeo/rng.hpp"
#include "mgeo/selection.hpp"
#include "nlohmann/json.hpp"

namespace mgeo {

namespace {

// outcome codes per replicate; fixed before tallying so the result cannot
// depend on which worker ran which index
constexpr char kWin = 'w', kTie = 't', kLoss = 'l', kNonconv = 'x';

constexpr double kTieTol = 1e-9;  // deviances this close count half each way

// target sample size as a real number; 0 means out of 64-bit range
long sample_size(const PowerConfig& cfg, int k, int s, bool* overflow) {
  const long double base = static_cast<long double>(cfg.n_init.at(k));
  const long double target = base * cfg.n_multiplier *
                             std::exp2(static_cast<long double>(
                                 cfg.exponent_multiplier * k * s));
  *overflow = !(target < 9.0e18L);
  if (*overflow) return 0;
  return static_cast<long>(std::llroundl(target));
}

}  // namespace

PowerResult run_discpath_power(const PowerConfig& cfg) {
  if (cfg.k_values.empty() || cfg.s_values.empty())
    throw ConfigError("empty k or s grid");
  if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
  if (cfg.budget < 1) throw ConfigError("budget must be positive");
  for (int k : cfg.k_values)
    if (!cfg.n_init.count(k) || cfg.n_init.at(k) < 1)
      throw ConfigError("missing or non-positive n_init for k=" +
                        std::to_string(k));

  PowerResult result;
  result.config = cfg;
  for (int k : cfg.k_values) {
    const auto [gk, gkp] = build_discpath_graphs(k);
    for (int s : cfg.s_values) {
      PowerCell cell;
      cell.k = k;
      cell.s = s;
      bool overflow = false;
      cell.n = sample_size(cfg, k, s, &overflow);
      if (overflow || cell.n > cfg.budget) {
        cell.skipped = true;
        result.cells.push_back(cell);
        continue;
      }

      const Matrix sigma =
          sem_to_covariance(disc_path_sem(k, s, DiscVariant::Gk));
      std::vector<char> outcome(cfg.replicates, kNonconv);
      parallel_for(
          cfg.replicates,
          [&](long rep) {
            const SampleCov sc = sample_cov(
                sigma, cell.n, derive_seed(cfg.seed, k, s, rep));
            try {
              const double dev_k = fit_mag_gaussian(gk, sc).deviance;
              const double dev_kp = fit_mag_gaussian(gkp, sc).deviance;
              if (std::abs(dev_k - dev_kp) <= kTieTol)
                outcome[rep] = kTie;
              else
                outcome[rep] = dev_k < dev_kp ? kWin : kLoss;
            } catch (const RicfError&) {
              outcome[rep] = kNonconv;
            }
          },
          cfg.nthreads);

      long wins = 0, ties = 0;
      for (char c : outcome) {
        wins += c == kWin;
        ties += c == kTie;
        cell.nonconverged += c == kNonconv;
      }
      cell.replicates_done = cfg.replicates - cell.nonconverged;
      cell.nonconv_flag = cell.nonconverged * 100 >= cfg.replicates;
      cell.accuracy = cell.replicates_done
                          ? (wins + 0.5 * ties) / cell.replicates_done
                          : 0.0;
      result.cells.push_back(cell);
    }
  }
  return result;
}

std::string power_csv(const PowerResult& r) {
  CsvBuilder csv({"k", "s", "n", "accuracy", "replicates", "nonconverged",
                  "skipped", "flagged"});
  for (const PowerCell& c : r.cells)
    csv.row({std::to_string(c.k), std::to_string(c.s), std::to_string(c.n),
             c.skipped ? "" : fmt_double(c.accuracy),
             std::to_string(c.replicates_done),
             std::to_string(c.nonconverged), c.skipped ? "1" : "0",
             c.nonconv_flag ? "1" : "0"});
  return csv.finish(r.config.seed);
}

std::string run_order_estimates(const std::vector<std::string>& names,
                                const std::vector<double>& radii,
                                uint64_t seed, int nsamples) {
  std::vector<std::string> header{"name", "slope", "stderr"};
  for (double r : radii) header.push_back("dhat_" + fmt_double(r));
  CsvBuilder csv(header);
  for (const std::string& name : names) {
    const CatalogEntry& entry = catalog_lookup(name);
    const OrderEstimate est = equivalence_order(entry.m1, entry.m2,
                                                entry.theta, radii, nsamples,
                                                seed);
    std::vector<std::string> row{name, fmt_double(est.slope),
                                 fmt_double(est.slope_stderr)};
    for (double d : est.distances) row.push_back(fmt_double(d));
    csv.row(row);
  }
  return csv.finish(seed);
}

std::string run_bn_experiment(const std::string& config_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  static const std::set<std::string> known = {
      "dag",        "gamma",    "delta", "h_scale", "h",
      "n_grid",     "replicates", "nthreads", "seed"};
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      throw ConfigError("unknown config key \"" + item.key() + "\"");

  Theorem71Config cfg;
  try {
    cfg.dag = parse_graph(j.at("dag").get<std::string>());
    cfg.n_grid = j.at("n_grid").get<std::vector<long>>();
    if (j.contains("gamma")) cfg.gamma = j["gamma"].get<double>();
    if (j.contains("delta")) cfg.delta = j["delta"].get<double>();
    if (j.contains("h_scale")) cfg.h_scale = j["h_scale"].get<double>();
    if (j.contains("h")) cfg.h = j["h"].get<std::vector<double>>();
    if (j.contains("replicates"))
      cfg.replicates = j["replicates"].get<int>();
    if (j.contains("nthreads")) cfg.nthreads = j["nthreads"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config JSON: ") + e.what());
  }

  const RecoveryCurve curve = theorem71_experiment(cfg);
  CsvBuilder csv({"n", "fraction", "replicates"});
  for (size_t i = 0; i < curve.n.size(); ++i)
    csv.row({std::to_string(curve.n[i]), fmt_double(curve.fraction[i]),
             std::to_string(cfg.replicates)});
  return csv.finish(cfg.seed);
}

}  // namespace mgeo
