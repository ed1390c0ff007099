#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailspec/approximation.hpp"
#include "tailspec/autocovariance.hpp"
#include "tailspec/filter_spectrum.hpp"
#include "tailspec/io.hpp"
#include "tailspec/limit_laws.hpp"
#include "tailspec/linear_process.hpp"
#include "tailspec/lsd.hpp"
#include "tailspec/noise.hpp"

namespace tailspec {

using json = nlohmann::json;

// Version tag for the pass/fail thresholds written into reports.
inline constexpr const char* kThresholdsVersion = "1";

struct LimitsOptions {
  Eigen::Index reps = 10000;   // replications of the limit simulators
  int kmax = 3;                // ratio depth
  Eigen::Index n_trunc = 10000;  // truncation of the stable series
  double frechet_ks_threshold = 0.15;
  double ratio_ks_threshold = 0.15;
};

struct LsdOptions {
  double gamma = 0.0;  // 0 -> use p / n
  int grid = 64;
  double eps = 1e-3;
  double x_min = 0.0;  // 0 -> automatic
  double x_max = 0.0;  // 0 -> automatic
  int points = 100;
  double tol = 1e-10;
  int max_iter = 20000;
  double damping = 0.5;
};

struct SpectrumOptions {
  std::string input_csv;  // empty -> simulate
  std::string matrix = "power";  // "power" or "symmetrized"
  int emit_vectors = 0;   // leading eigenvectors to dump
  bool emit_data = false;
};

struct CompareThresholds {
  double alignment = 0.99;
  int alignment_count = 4;
  double seed_fraction = 0.9;
};

struct ExperimentConfig {
  std::string kind;  // spectrum | predict | compare | limits | lsd
  FilterCoefficients filter;
  TailDistribution dist;
  Eigen::Index p = 0;
  Eigen::Index n = 0;
  int s1 = 0;
  int s2 = 0;
  int s_max = -1;  // -1 -> s2
  CenteringPolicy centering;
  std::vector<std::uint64_t> seeds;
  Eigen::Index k = 0;  // 0 -> floor(p^{1/4})
  std::string out_dir = "out";
  int threads = 1;
  LimitsOptions limits;
  LsdOptions lsd;
  SpectrumOptions spectrum;
  std::optional<CompareThresholds> compare_thresholds;

  int effective_s_max() const { return s_max >= 0 ? std::max(s_max, s2) : s2; }
  Eigen::Index effective_k() const {
    return k > 0 ? k : default_block_count(p);
  }

  void validate() const {
    static const std::vector<std::string> kinds = {"spectrum", "predict",
                                                   "compare", "limits", "lsd"};
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
      throw std::invalid_argument("config: unknown kind '" + kind + "'");
    filter.validate();
    dist.validate();
    if (kind != "spectrum" || spectrum.input_csv.empty()) {
      if (p < 1 || n < 1)
        throw std::invalid_argument("config: p and n must be >= 1");
    }
    if (s1 < 0 || s1 > s2)
      throw std::invalid_argument("config: need 0 <= s1 <= s2");
    if (s_max >= 0 && s_max < s2)
      throw std::invalid_argument("config: s_max must be >= s2");
    if (kind == "compare" || kind == "predict" || kind == "limits") {
      if (!dist.regularly_varying() || !(dist.alpha > 0.0 && dist.alpha < 4.0))
        throw std::invalid_argument(
            "config: kind '" + kind +
            "' requires a regularly varying distribution with alpha in (0, 4)");
    }
    if (kind == "limits" && seeds.empty())
      throw std::invalid_argument("config: empty replication set");
    if (kind == "lsd") {
      if (dist.kind != TailKind::kGaussian || dist.scale != 1.0)
        throw std::invalid_argument(
            "config: kind 'lsd' requires gaussian noise with scale 1");
    }
    if (threads < 1)
      throw std::invalid_argument("config: threads must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
T require_key(const json& j, const std::string& key, const char* where) {
  if (!j.contains(key))
    throw std::invalid_argument(std::string("config: missing key '") + where +
                                key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config: bad value for key '") +
                                where + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const char* where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config: bad value for key '") +
                                where + key + "'");
  }
}

}  // namespace detail

inline json filter_to_json(const FilterCoefficients& filter) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < filter.coeffs.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < filter.coeffs.cols(); ++c) {
      row.push_back(filter.coeffs(r, c));
    }
    rows.push_back(row);
  }
  return json{{"k_min", filter.k_min}, {"l_min", filter.l_min}, {"coeffs", rows}};
}

inline FilterCoefficients filter_from_json(const json& j) {
  FilterCoefficients f;
  if (j.contains("separable")) {
    const json& s = j.at("separable");
    auto d = detail::require_key<std::vector<double>>(s, "d", "filter.separable.");
    auto c = detail::require_key<std::vector<double>>(s, "c", "filter.separable.");
    f = FilterCoefficients::separable(
        Eigen::Map<const Eigen::VectorXd>(d.data(), d.size()),
        Eigen::Map<const Eigen::VectorXd>(c.data(), c.size()));
    return f;
  }
  auto rows = detail::require_key<std::vector<std::vector<double>>>(j, "coeffs",
                                                                    "filter.");
  if (rows.empty() || rows.front().empty())
    throw std::invalid_argument("config: bad value for key 'filter.coeffs'");
  f.coeffs.resize(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size())
      throw std::invalid_argument("config: ragged 'filter.coeffs'");
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      f.coeffs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
    }
  }
  f.k_min = detail::get_or<std::int64_t>(j, "k_min", 0, "filter.");
  f.l_min = detail::get_or<std::int64_t>(j, "l_min", 0, "filter.");
  return f;
}

inline json dist_to_json(const TailDistribution& d) {
  json j{{"kind", to_string(d.kind)}, {"scale", d.scale}};
  if (d.kind != TailKind::kGaussian) j["alpha"] = d.alpha;
  if (d.kind == TailKind::kSymmetricPareto) {
    j["p_plus"] = d.p_plus;
    j["p_minus"] = d.p_minus;
  }
  return j;
}

inline TailDistribution dist_from_json(const json& j) {
  const auto kind = detail::require_key<std::string>(j, "kind", "dist.");
  const double scale = detail::get_or<double>(j, "scale", 1.0, "dist.");
  if (kind == "gaussian") return TailDistribution::gaussian(scale);
  const double alpha = detail::require_key<double>(j, "alpha", "dist.");
  if (kind == "pareto") return TailDistribution::pareto(alpha, scale);
  if (kind == "symmetric_pareto") {
    const double p_plus = detail::get_or<double>(j, "p_plus", 0.5, "dist.");
    return TailDistribution::symmetric_pareto(alpha, p_plus, scale);
  }
  if (kind == "student_t") return TailDistribution::student_t(alpha, scale);
  throw std::invalid_argument("config: bad value for key 'dist.kind'");
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = c.kind;
  j["filter"] = filter_to_json(c.filter);
  j["dist"] = dist_to_json(c.dist);
  j["p"] = c.p;
  j["n"] = c.n;
  j["s1"] = c.s1;
  j["s2"] = c.s2;
  j["s_max"] = c.s_max;
  json cent{{"mode", to_string(c.centering.mode)}};
  if (c.centering.beta_hint) cent["beta_hint"] = *c.centering.beta_hint;
  j["centering"] = cent;
  j["seeds"] = c.seeds;
  j["k"] = c.k;
  j["out"] = c.out_dir;
  j["threads"] = c.threads;
  j["limits"] = json{{"reps", c.limits.reps},
                     {"kmax", c.limits.kmax},
                     {"n_trunc", c.limits.n_trunc},
                     {"frechet_ks_threshold", c.limits.frechet_ks_threshold},
                     {"ratio_ks_threshold", c.limits.ratio_ks_threshold}};
  j["lsd"] = json{{"gamma", c.lsd.gamma},   {"grid", c.lsd.grid},
                  {"eps", c.lsd.eps},       {"x_min", c.lsd.x_min},
                  {"x_max", c.lsd.x_max},   {"points", c.lsd.points},
                  {"tol", c.lsd.tol},       {"max_iter", c.lsd.max_iter},
                  {"damping", c.lsd.damping}};
  j["spectrum"] = json{{"input_csv", c.spectrum.input_csv},
                       {"matrix", c.spectrum.matrix},
                       {"emit_vectors", c.spectrum.emit_vectors},
                       {"emit_data", c.spectrum.emit_data}};
  if (c.compare_thresholds) {
    j["compare_thresholds"] =
        json{{"alignment", c.compare_thresholds->alignment},
             {"alignment_count", c.compare_thresholds->alignment_count},
             {"seed_fraction", c.compare_thresholds->seed_fraction}};
  }
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.kind = detail::require_key<std::string>(j, "kind", "");
  if (!j.contains("filter"))
    throw std::invalid_argument("config: missing key 'filter'");
  c.filter = filter_from_json(j.at("filter"));
  if (!j.contains("dist"))
    throw std::invalid_argument("config: missing key 'dist'");
  c.dist = dist_from_json(j.at("dist"));
  c.p = detail::get_or<Eigen::Index>(j, "p", 0, "");
  c.n = detail::get_or<Eigen::Index>(j, "n", 0, "");
  c.s1 = detail::get_or<int>(j, "s1", 0, "");
  c.s2 = detail::get_or<int>(j, "s2", 0, "");
  c.s_max = detail::get_or<int>(j, "s_max", -1, "");
  if (j.contains("centering")) {
    const json& cent = j.at("centering");
    std::string mode;
    if (cent.is_string()) {
      mode = cent.get<std::string>();
    } else {
      mode = detail::get_or<std::string>(cent, "mode", "auto", "centering.");
      if (cent.contains("beta_hint"))
        c.centering.beta_hint =
            detail::require_key<double>(cent, "beta_hint", "centering.");
    }
    if (mode == "auto") c.centering.mode = CenteringMode::kAuto;
    else if (mode == "on") c.centering.mode = CenteringMode::kOn;
    else if (mode == "off") c.centering.mode = CenteringMode::kOff;
    else
      throw std::invalid_argument(
          "config: bad value for key 'centering.mode'");
  }
  c.seeds = detail::get_or<std::vector<std::uint64_t>>(j, "seeds", {}, "");
  c.k = detail::get_or<Eigen::Index>(j, "k", 0, "");
  c.out_dir = detail::get_or<std::string>(j, "out", "out", "");
  c.threads = detail::get_or<int>(j, "threads", 1, "");
  if (j.contains("limits")) {
    const json& l = j.at("limits");
    c.limits.reps = detail::get_or<Eigen::Index>(l, "reps", c.limits.reps, "limits.");
    c.limits.kmax = detail::get_or<int>(l, "kmax", c.limits.kmax, "limits.");
    c.limits.n_trunc =
        detail::get_or<Eigen::Index>(l, "n_trunc", c.limits.n_trunc, "limits.");
    c.limits.frechet_ks_threshold = detail::get_or<double>(
        l, "frechet_ks_threshold", c.limits.frechet_ks_threshold, "limits.");
    c.limits.ratio_ks_threshold = detail::get_or<double>(
        l, "ratio_ks_threshold", c.limits.ratio_ks_threshold, "limits.");
  }
  if (j.contains("lsd")) {
    const json& l = j.at("lsd");
    c.lsd.gamma = detail::get_or<double>(l, "gamma", c.lsd.gamma, "lsd.");
    c.lsd.grid = detail::get_or<int>(l, "grid", c.lsd.grid, "lsd.");
    c.lsd.eps = detail::get_or<double>(l, "eps", c.lsd.eps, "lsd.");
    c.lsd.x_min = detail::get_or<double>(l, "x_min", c.lsd.x_min, "lsd.");
    c.lsd.x_max = detail::get_or<double>(l, "x_max", c.lsd.x_max, "lsd.");
    c.lsd.points = detail::get_or<int>(l, "points", c.lsd.points, "lsd.");
    c.lsd.tol = detail::get_or<double>(l, "tol", c.lsd.tol, "lsd.");
    c.lsd.max_iter = detail::get_or<int>(l, "max_iter", c.lsd.max_iter, "lsd.");
    c.lsd.damping = detail::get_or<double>(l, "damping", c.lsd.damping, "lsd.");
  }
  if (j.contains("spectrum")) {
    const json& s = j.at("spectrum");
    c.spectrum.input_csv =
        detail::get_or<std::string>(s, "input_csv", "", "spectrum.");
    c.spectrum.matrix =
        detail::get_or<std::string>(s, "matrix", "power", "spectrum.");
    c.spectrum.emit_vectors =
        detail::get_or<int>(s, "emit_vectors", 0, "spectrum.");
    c.spectrum.emit_data =
        detail::get_or<bool>(s, "emit_data", false, "spectrum.");
    if (c.spectrum.matrix != "power" && c.spectrum.matrix != "symmetrized")
      throw std::invalid_argument(
          "config: bad value for key 'spectrum.matrix'");
  }
  if (j.contains("compare_thresholds")) {
    const json& t = j.at("compare_thresholds");
    CompareThresholds ct;
    ct.alignment = detail::get_or<double>(t, "alignment", ct.alignment,
                                          "compare_thresholds.");
    ct.alignment_count = detail::get_or<int>(
        t, "alignment_count", ct.alignment_count, "compare_thresholds.");
    ct.seed_fraction = detail::get_or<double>(
        t, "seed_fraction", ct.seed_fraction, "compare_thresholds.");
    c.compare_thresholds = ct;
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: parse error in " + path.string() +
                                ": " + e.what());
  }
  return config_from_json(j);
}

inline std::string config_hash(const ExperimentConfig& c) {
  return hex64(fnv1a_hash(to_json(c).dump()));
}

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

// Runs fn(i) for i in [0, count) on `threads` workers.  The first exception
// wins and is rethrown on the caller thread after all workers drain.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::vector<std::string> output_header(const ExperimentConfig& c,
                                              std::optional<std::uint64_t> seed) {
  std::vector<std::string> lines;
  lines.push_back("config_hash=" + config_hash(c));
  if (seed) lines.push_back("seed=" + std::to_string(*seed));
  lines.push_back(std::string("thresholds_version=") + kThresholdsVersion);
  return lines;
}

inline void write_json_report(const std::filesystem::path& path, json j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace detail

// Per-seed result of a compare run.
struct CompareSeedResult {
  std::uint64_t seed = 0;
  Eigen::VectorXd lambda;           // spectrum of P(s1, s2)
  ApproxSpectrum gamma;
  ApproxSpectrum delta;
  std::vector<double> alignments;   // i < k, when predictions exist
  std::vector<double> lambda1_by_lag;  // lambda_1(s, s) for s = 0..s_max
  double error_stat_all = 0.0;      // a_np^{-4} max_i |lambda_i - gamma_i|
  double error_stat_top10 = 0.0;
  bool predictions_ok = true;
};

struct CompareReport {
  std::vector<CompareSeedResult> seeds;
  json summary;
};

inline CompareSeedResult compare_one_seed(const ExperimentConfig& c,
                                          const KSpectrum& kspec,
                                          std::uint64_t seed) {
  CompareSeedResult res;
  res.seed = seed;
  const int s_top = c.effective_s_max();
  const DataMatrix x =
      generate_process(c.filter, c.dist, c.p, c.n, s_top, seed);
  const RowSums rowsums = row_sum_squares(x.core_noise(), c.dist, c.centering,
                                          derive_seed(seed, 0x7165));

  const Eigen::MatrixXd power = power_sum(x, c.s1, c.s2, c.centering);
  SpectralResult spec = symmetric_eigen(power);
  res.lambda = std::move(spec.eigenvalues);

  const double a_np = normalizing_constant(
      c.dist, static_cast<std::uint64_t>(c.n) * static_cast<std::uint64_t>(c.p));
  res.gamma = gamma_values(rowsums, kspec, c.p);
  res.gamma.a_np4 = std::pow(a_np, 4.0);
  res.delta = delta_values(x.noise, c.p, c.n, kspec);
  res.delta.a_np4 = res.gamma.a_np4;

  res.error_stat_all = approximation_error(res.lambda, res.gamma, a_np);
  const Eigen::Index top = std::min<Eigen::Index>(10, c.p);
  res.error_stat_top10 = approximation_error(
      res.lambda.head(top), res.gamma.values.head(top), a_np);

  const Eigen::Index kcount = std::min(c.effective_k(), c.p);
  if (kspec.has_strict_gaps()) {
    const auto preds =
        predicted_eigenvectors(res.gamma, kspec, rowsums, c.p, kcount);
    for (Eigen::Index i = 0; i < kcount; ++i) {
      res.alignments.push_back(
          alignment(spec.eigenvectors.col(i), preds[static_cast<std::size_t>(i)]));
    }
  } else {
    res.predictions_ok = false;
  }

  for (int s = 0; s <= s_top; ++s) {
    const Eigen::MatrixXd ps = power_sum(x, s, s, c.centering);
    res.lambda1_by_lag.push_back(symmetric_eigen(ps).eigenvalues(0));
  }
  return res;
}

inline CompareReport run_compare(const ExperimentConfig& c) {
  c.validate();
  if (c.seeds.empty())
    throw std::invalid_argument("config: empty replication set");
  const KSpectrum kspec = build_K(c.filter, c.s1, c.s2);

  std::filesystem::create_directories(c.out_dir);
  CompareReport report;
  report.seeds.resize(c.seeds.size());
  parallel_for(c.seeds.size(), c.threads, [&](std::size_t i) {
    report.seeds[i] = compare_one_seed(c, kspec, c.seeds[i]);
    const auto& r = report.seeds[i];
    CsvWriter csv(std::filesystem::path(c.out_dir) /
                  ("compare_seed" + std::to_string(r.seed) + ".csv"));
    for (const auto& line : detail::output_header(c, r.seed)) csv.comment(line);
    csv.row({"i", "lambda", "gamma", "delta", "a", "b", "alignment"});
    for (Eigen::Index j = 0; j < r.lambda.size(); ++j) {
      std::vector<std::string> cells;
      cells.push_back(std::to_string(j + 1));
      cells.push_back(format_double(r.lambda(j)));
      cells.push_back(format_double(r.gamma.values(j)));
      cells.push_back(format_double(r.delta.values(j)));
      cells.push_back(std::to_string(r.gamma.row_index[j] + 1));
      cells.push_back(std::to_string(r.gamma.eig_index[j] + 1));
      cells.push_back(j < static_cast<Eigen::Index>(r.alignments.size())
                          ? format_double(r.alignments[j])
                          : "");
      csv.row(cells);
    }
  });

  // Summary: ratio medians per lag, alignment fractions, error statistics.
  json summary;
  summary["config_hash"] = config_hash(c);
  summary["thresholds_version"] = kThresholdsVersion;
  summary["kind"] = "compare";
  const auto resolution = c.centering.resolve(c.dist, c.p, c.n);
  summary["centering"] = json{{"centered", resolution.center},
                              {"beta", resolution.beta},
                              {"boundary", resolution.boundary},
                              {"beta_rule", "log(p)/log(n)"}};

  const int s_top = c.effective_s_max();
  json ratios = json::object();
  for (int s = 1; s <= s_top; ++s) {
    std::vector<double> r;
    for (const auto& res : report.seeds) {
      r.push_back(res.lambda1_by_lag[s] / res.lambda1_by_lag[0]);
    }
    ratios["lag" + std::to_string(s)] =
        json{{"median", detail::median(r)}, {"values", r}};
  }
  {
    std::vector<double> r;
    for (const auto& res : report.seeds)
      r.push_back(res.lambda(0) / res.lambda1_by_lag[0]);
    ratios["window"] = json{{"median", detail::median(r)}, {"values", r}};
  }
  summary["lambda1_ratios"] = ratios;

  std::vector<double> err_all, err_top;
  for (const auto& res : report.seeds) {
    err_all.push_back(res.error_stat_all);
    err_top.push_back(res.error_stat_top10);
  }
  summary["error_stat"] = json{{"median_all", detail::median(err_all)},
                               {"median_top10", detail::median(err_top)},
                               {"values_top10", err_top}};

  if (!report.seeds.empty() && report.seeds.front().predictions_ok) {
    json al;
    std::vector<double> min_align;
    for (const auto& res : report.seeds) {
      min_align.push_back(
          *std::min_element(res.alignments.begin(), res.alignments.end()));
    }
    al["min_over_predictions"] = min_align;
    if (c.compare_thresholds) {
      const auto& t = *c.compare_thresholds;
      int pass = 0;
      for (const auto& res : report.seeds) {
        const int count = std::min<int>(t.alignment_count,
                                        static_cast<int>(res.alignments.size()));
        bool ok = true;
        for (int i = 0; i < count; ++i)
          ok = ok && res.alignments[static_cast<std::size_t>(i)] > t.alignment;
        pass += ok;
      }
      const double fraction =
          static_cast<double>(pass) / static_cast<double>(report.seeds.size());
      al["threshold"] = t.alignment;
      al["seed_fraction"] = fraction;
      al["pass"] = fraction >= t.seed_fraction;
    }
    summary["alignment"] = al;
  } else {
    summary["alignment"] =
        json{{"skipped", "K-eigenvalue ties; predictions undefined"}};
  }

  report.summary = summary;
  detail::write_json_report(std::filesystem::path(c.out_dir) / "summary.json",
                            summary);
  return report;
}

// ---------------------------------------------------------------------------

struct LimitsReport {
  std::vector<double> lambda1_normalized;
  Eigen::MatrixXd ratio_samples;       // per seed, lambda_{i+1}/lambda_i
  std::vector<double> self_normalized;  // lambda_1 / trace
  json report;
};

inline LimitsReport run_limits(const ExperimentConfig& c) {
  c.validate();
  const KSpectrum kspec = build_K(c.filter, c.s1, c.s2);
  const double v1_sq = kspec.eigenvalues(0);
  const double a_np = normalizing_constant(
      c.dist, static_cast<std::uint64_t>(c.n) * static_cast<std::uint64_t>(c.p));
  const double a_np4 = std::pow(a_np, 4.0);
  const int kmax = c.limits.kmax;

  LimitsReport out;
  out.lambda1_normalized.resize(c.seeds.size());
  out.self_normalized.resize(c.seeds.size());
  out.ratio_samples.resize(static_cast<Eigen::Index>(c.seeds.size()), kmax);
  parallel_for(c.seeds.size(), c.threads, [&](std::size_t i) {
    const DataMatrix x = generate_process(c.filter, c.dist, c.p, c.n,
                                          c.effective_s_max(), c.seeds[i]);
    const Eigen::MatrixXd power = power_sum(x, c.s1, c.s2, c.centering);
    const SpectralResult spec = symmetric_eigen(power);
    out.lambda1_normalized[i] = spec.eigenvalues(0) / a_np4;
    out.self_normalized[i] = spec.eigenvalues(0) / spec.eigenvalues.sum();
    const RatioStatistics rs = ratio_statistics(spec.eigenvalues, kmax);
    out.ratio_samples.row(static_cast<Eigen::Index>(i)) = rs.ratios.transpose();
  });

  const double frechet_ks = ks_distance(
      out.lambda1_normalized,
      [&](double x) { return x <= 0.0 ? 0.0 : frechet_cdf(x, c.dist.alpha, v1_sq); });

  // Ratio laws against the simulated limit, one two-sample KS per depth.
  const Eigen::MatrixXd limit_ratios =
      limit_ratio_sample(kmax, c.dist.alpha, derive_seed(c.seeds.front(), 0x11),
                         c.limits.reps);
  std::vector<double> ratio_ks(static_cast<std::size_t>(kmax));
  for (int i = 0; i < kmax; ++i) {
    std::vector<double> limit_col(limit_ratios.rows());
    for (Eigen::Index r = 0; r < limit_ratios.rows(); ++r)
      limit_col[static_cast<std::size_t>(r)] = limit_ratios(r, i);
    std::sort(limit_col.begin(), limit_col.end());
    auto ecdf = [&limit_col](double x) {
      const auto it = std::upper_bound(limit_col.begin(), limit_col.end(), x);
      return static_cast<double>(it - limit_col.begin()) /
             static_cast<double>(limit_col.size());
    };
    std::vector<double> sim(out.ratio_samples.rows());
    for (Eigen::Index r = 0; r < out.ratio_samples.rows(); ++r)
      sim[static_cast<std::size_t>(r)] = out.ratio_samples(r, i);
    ratio_ks[static_cast<std::size_t>(i)] = ks_distance(sim, ecdf);
  }

  std::filesystem::create_directories(c.out_dir);
  {
    CsvWriter csv(std::filesystem::path(c.out_dir) / "limits_samples.csv");
    for (const auto& line : detail::output_header(c, std::nullopt))
      csv.comment(line);
    std::vector<std::string> head = {"seed", "lambda1_normalized",
                                     "lambda1_over_trace"};
    for (int i = 1; i <= kmax; ++i) head.push_back("ratio" + std::to_string(i));
    csv.row(head);
    for (std::size_t i = 0; i < c.seeds.size(); ++i) {
      std::vector<std::string> cells = {std::to_string(c.seeds[i]),
                                        format_double(out.lambda1_normalized[i]),
                                        format_double(out.self_normalized[i])};
      for (int r = 0; r < kmax; ++r)
        cells.push_back(
            format_double(out.ratio_samples(static_cast<Eigen::Index>(i), r)));
      csv.row(cells);
    }
  }

  json rep;
  rep["config_hash"] = config_hash(c);
  rep["thresholds_version"] = kThresholdsVersion;
  rep["kind"] = "limits";
  rep["v1_sq"] = v1_sq;
  rep["frechet"] = json{{"statistic", frechet_ks},
                        {"threshold", c.limits.frechet_ks_threshold},
                        {"pass", frechet_ks < c.limits.frechet_ks_threshold}};
  json rj = json::array();
  for (int i = 0; i < kmax; ++i) {
    rj.push_back(json{{"i", i + 1},
                      {"statistic", ratio_ks[static_cast<std::size_t>(i)]},
                      {"threshold", c.limits.ratio_ks_threshold},
                      {"pass", ratio_ks[static_cast<std::size_t>(i)] <
                                   c.limits.ratio_ks_threshold}});
  }
  rep["ratios"] = rj;
  out.report = rep;
  detail::write_json_report(
      std::filesystem::path(c.out_dir) / "limits_report.json", rep);
  return out;
}

// ---------------------------------------------------------------------------

struct LsdReport {
  std::vector<double> grid_x;
  std::vector<double> density;
  std::vector<double> esd_histogram;
  Eigen::VectorXd esd;  // eigenvalues of n^{-1} X X'
  json report;
};

inline LsdReport run_lsd(const ExperimentConfig& c) {
  c.validate();
  if (c.seeds.empty())
    throw std::invalid_argument("config: empty replication set");
  const double gamma = c.lsd.gamma > 0.0
                           ? c.lsd.gamma
                           : static_cast<double>(c.p) / static_cast<double>(c.n);

  LsdReport out;
  // ESD of n^{-1} X X' from one simulated gaussian run.
  const DataMatrix x =
      generate_process(c.filter, c.dist, c.p, c.n, 0, c.seeds.front());
  const Eigen::MatrixXd cov = lagged_view(x, 0) * lagged_view(x, 0).transpose() /
                              static_cast<double>(c.n);
  out.esd = symmetric_eigen(0.5 * (cov + cov.transpose())).eigenvalues;

  const CoeffAutocovariance gammas = coeff_autocovariance(c.filter);
  double f_max = 0.0;
  for (int i = 0; i <= 32; ++i) {
    for (int j = 0; j <= 32; ++j) {
      f_max = std::max(f_max, spectral_density(gammas, i / 32.0, j / 32.0));
    }
  }
  const double root = std::sqrt(gamma);
  const double x_min = c.lsd.x_min > 0.0 ? c.lsd.x_min : 1e-3;
  const double x_max =
      c.lsd.x_max > 0.0 ? c.lsd.x_max : (1.0 + root) * (1.0 + root) * f_max;

  const int points = c.lsd.points;
  out.grid_x.resize(static_cast<std::size_t>(points));
  out.density.resize(static_cast<std::size_t>(points));
  std::vector<std::complex<double>> s_values(static_cast<std::size_t>(points));
  Eigen::VectorXcd warm;
  int max_iterations = 0;
  double max_residual = 0.0;
  for (int i = 0; i < points; ++i) {
    const double xv =
        x_min + (x_max - x_min) * static_cast<double>(i) / (points - 1);
    out.grid_x[static_cast<std::size_t>(i)] = xv;
    const StieltjesSolution sol = solve_stieltjes(
        c.filter, gamma, {xv, c.lsd.eps}, c.lsd.grid, c.lsd.tol, c.lsd.max_iter,
        c.lsd.damping, warm.size() ? &warm : nullptr);
    warm = sol.h;
    s_values[static_cast<std::size_t>(i)] = sol.s;
    max_iterations = std::max(max_iterations, sol.iterations);
    max_residual = std::max(max_residual, sol.residual);
  }
  out.density = density_from_stieltjes(s_values, c.lsd.eps);

  // Histogram of the ESD over the same grid (bin centers at grid points).
  const double step = (x_max - x_min) / (points - 1);
  out.esd_histogram.assign(static_cast<std::size_t>(points), 0.0);
  for (Eigen::Index i = 0; i < out.esd.size(); ++i) {
    const double v = out.esd(i);
    const int bin = static_cast<int>(std::lround((v - x_min) / step));
    if (bin >= 0 && bin < points) {
      out.esd_histogram[static_cast<std::size_t>(bin)] +=
          1.0 / (static_cast<double>(c.p) * step);
    }
  }

  std::filesystem::create_directories(c.out_dir);
  {
    CsvWriter csv(std::filesystem::path(c.out_dir) / "lsd_density.csv");
    for (const auto& line : detail::output_header(c, c.seeds.front()))
      csv.comment(line);
    csv.row({"x", "density", "esd_histogram"});
    for (int i = 0; i < points; ++i) {
      csv.row({format_double(out.grid_x[static_cast<std::size_t>(i)]),
               format_double(out.density[static_cast<std::size_t>(i)]),
               format_double(out.esd_histogram[static_cast<std::size_t>(i)])});
    }
  }

  // Mass check and distance between the ESD and the integrated density.
  double mass = 0.0;
  std::vector<double> cdf(static_cast<std::size_t>(points), 0.0);
  for (int i = 1; i < points; ++i) {
    mass += 0.5 * step *
            (out.density[static_cast<std::size_t>(i)] +
             out.density[static_cast<std::size_t>(i - 1)]);
    cdf[static_cast<std::size_t>(i)] = mass;
  }
  std::vector<double> esd_vec(out.esd.data(), out.esd.data() + out.esd.size());
  auto cdf_fn = [&](double v) {
    if (v <= x_min) return 0.0;
    if (v >= x_max) return mass;
    const double pos = (v - x_min) / step;
    const int lo = static_cast<int>(pos);
    const double frac = pos - lo;
    return cdf[static_cast<std::size_t>(lo)] +
           frac * (cdf[static_cast<std::size_t>(lo + 1)] -
                   cdf[static_cast<std::size_t>(lo)]);
  };
  const double esd_ks = ks_distance(esd_vec, cdf_fn);

  json rep;
  rep["config_hash"] = config_hash(c);
  rep["thresholds_version"] = kThresholdsVersion;
  rep["kind"] = "lsd";
  rep["gamma"] = gamma;
  rep["grid"] = json{{"x_min", x_min}, {"x_max", x_max}, {"points", points}};
  rep["density_mass"] = mass;
  rep["esd_ks"] = esd_ks;
  rep["solver"] =
      json{{"max_iterations", max_iterations}, {"max_residual", max_residual}};
  out.report = rep;
  detail::write_json_report(std::filesystem::path(c.out_dir) / "lsd_report.json",
                            rep);
  return out;
}

// ---------------------------------------------------------------------------

inline json run_spectrum(const ExperimentConfig& c) {
  c.validate();
  std::filesystem::create_directories(c.out_dir);

  Eigen::MatrixXd values;
  std::uint64_t seed = c.seeds.empty() ? 0 : c.seeds.front();
  Eigen::Index p = c.p;
  Eigen::Index n = c.n;
  std::optional<DataMatrix> simulated;
  if (!c.spectrum.input_csv.empty()) {
    values = load_matrix_csv(c.spectrum.input_csv);
    p = values.rows();
    n = values.cols() - c.effective_s_max();
    if (n < 1)
      throw std::invalid_argument(
          "spectrum: input matrix has too few columns for the requested lags");
  } else {
    if (c.seeds.empty())
      throw std::invalid_argument("config: empty replication set");
    simulated =
        generate_process(c.filter, c.dist, c.p, c.n, c.effective_s_max(), seed);
    values = simulated->values;
  }

  DataMatrix x;
  x.values = std::move(values);
  x.p = p;
  x.n = n;
  x.s_max = c.effective_s_max();
  x.filter = c.filter;
  if (simulated) {
    x.noise = std::move(simulated->noise);
  } else {
    x.noise.dist = c.dist;  // provenance only; no samples behind a CSV input
    x.noise.values.resize(0, 0);
  }

  CenteringPolicy centering = c.centering;
  if (!simulated) centering.mode = CenteringMode::kOff;
  const Eigen::MatrixXd m = c.spectrum.matrix == "power"
                                ? power_sum(x, c.s1, c.s2, centering)
                                : symmetrized_sum(x, c.s1, c.s2, centering);
  SpectralResult spec = symmetric_eigen(m);
  if (c.spectrum.matrix == "symmetrized") spec = singular_order(spec);

  {
    CsvWriter csv(std::filesystem::path(c.out_dir) / "spectrum.csv");
    for (const auto& line : detail::output_header(c, seed)) csv.comment(line);
    csv.comment("p=" + std::to_string(p) + " n=" + std::to_string(n) +
                " s1=" + std::to_string(c.s1) + " s2=" + std::to_string(c.s2));
    csv.row({"i", "eigenvalue"});
    for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i) {
      csv.row({std::to_string(i + 1), format_double(spec.eigenvalues(i))});
    }
  }
  if (c.spectrum.emit_vectors > 0) {
    const Eigen::Index cols =
        std::min<Eigen::Index>(c.spectrum.emit_vectors, spec.eigenvectors.cols());
    write_matrix_csv(std::filesystem::path(c.out_dir) / "eigenvectors.csv",
                     spec.eigenvectors.leftCols(cols),
                     detail::output_header(c, seed));
  }
  if (c.spectrum.emit_data && simulated) {
    auto header = detail::output_header(c, seed);
    header.push_back("p=" + std::to_string(p) + " n=" + std::to_string(n) +
                     " s1=" + std::to_string(c.s1) +
                     " s2=" + std::to_string(c.s2) +
                     " seed=" + std::to_string(seed));
    write_matrix_csv(std::filesystem::path(c.out_dir) / "data_matrix.csv",
                     x.values, header);
  }

  json rep;
  rep["config_hash"] = config_hash(c);
  rep["kind"] = "spectrum";
  rep["p"] = p;
  rep["n"] = n;
  rep["matrix"] = c.spectrum.matrix;
  rep["top_eigenvalue"] = spec.eigenvalues(0);
  return rep;
}

inline json kspectrum_to_json(const KSpectrum& k) {
  json vecs = json::array();
  for (Eigen::Index c = 0; c < k.eigenvectors.cols(); ++c) {
    json col = json::array();
    for (Eigen::Index r = 0; r < k.eigenvectors.rows(); ++r)
      col.push_back(k.eigenvectors(r, c));
    vecs.push_back(col);
  }
  json eigs = json::array();
  for (Eigen::Index i = 0; i < k.eigenvalues.size(); ++i)
    eigs.push_back(k.eigenvalues(i));
  return json{{"s1", k.s1},
              {"s2", k.s2},
              {"eigenvalues", eigs},
              {"eigenvectors", vecs},
              {"rank", k.rank},
              {"k_min", k.k_min},
              {"symmetrized", k.symmetrized}};
}

inline json run_predict(const ExperimentConfig& c) {
  c.validate();
  if (c.seeds.empty())
    throw std::invalid_argument("config: empty replication set");
  const KSpectrum kspec = build_K(c.filter, c.s1, c.s2);
  std::filesystem::create_directories(c.out_dir);
  detail::write_json_report(std::filesystem::path(c.out_dir) / "kspectrum.json",
                            kspectrum_to_json(kspec));

  parallel_for(c.seeds.size(), c.threads, [&](std::size_t i) {
    const std::uint64_t seed = c.seeds[i];
    const NoiseField noise = sample_noise(c.dist, c.p, c.n, seed);
    const RowSums rowsums = row_sum_squares(
        noise.values, c.dist, c.centering, derive_seed(seed, 0x7165));
    const ApproxSpectrum gamma = gamma_values(rowsums, kspec, c.p);
    const ApproxSpectrum delta = delta_values(noise, c.p, c.n, kspec);
    CsvWriter csv(std::filesystem::path(c.out_dir) /
                  ("predict_seed" + std::to_string(seed) + ".csv"));
    for (const auto& line : detail::output_header(c, seed)) csv.comment(line);
    csv.row({"i", "gamma", "delta", "a", "b"});
    for (Eigen::Index j = 0; j < gamma.values.size(); ++j) {
      csv.row({std::to_string(j + 1), format_double(gamma.values(j)),
               format_double(delta.values(j)),
               std::to_string(gamma.row_index[static_cast<std::size_t>(j)] + 1),
               std::to_string(gamma.eig_index[static_cast<std::size_t>(j)] + 1)});
    }
  });

  json rep;
  rep["config_hash"] = config_hash(c);
  rep["kind"] = "predict";
  rep["rank"] = kspec.rank;
  rep["v1_sq"] = kspec.eigenvalues(0);
  return rep;
}

}  // namespace tailspec
