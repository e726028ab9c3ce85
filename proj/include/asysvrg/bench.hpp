#pragma once

// The benchmark commands behind the `asysvrg` executable. Every command
// writes to caller-supplied streams and returns a process exit status, so
// tests drive them in-process.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "asysvrg/baselines.hpp"
#include "asysvrg/engine.hpp"
#include "asysvrg/libsvm.hpp"
#include "asysvrg/metrics.hpp"
#include "asysvrg/model.hpp"
#include "asysvrg/schedule.hpp"
#include "asysvrg/simulator.hpp"
#include "asysvrg/synthetic.hpp"
#include "asysvrg/theory.hpp"

#ifndef ASYSVRG_BUILD_ID
#define ASYSVRG_BUILD_ID "unknown"
#endif

namespace asysvrg::bench {

enum Exit : int { kOk = 0, kError = 1, kDiverged = 2, kInvalid = 3, kCheckFailed = 4 };

using Header = std::vector<std::pair<std::string, std::string>>;

inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return detail::format_real(x);
}

/// Parses a real or one of "inf", "none", "off" (the latter two as +inf).
inline double parse_number(const std::string& s) {
  if (s == "inf" || s == "none" || s == "off") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

// ---------------------------------------------------------------- datasets

struct LoadedData {
  Dataset data;
  DatasetMeta meta;
};

/// `synthetic[:k=v,...]` (keys n, d, seed, separation) or a LibSVM path,
/// optionally gzip-compressed.
inline LoadedData load_dataset(const std::string& source, std::optional<std::size_t> dim = std::nullopt) {
  if (source.rfind("synthetic", 0) == 0) {
    SyntheticSpec spec;
    std::string rest = source.substr(std::string("synthetic").size());
    if (!rest.empty() && rest[0] != ':') throw std::invalid_argument("bad synthetic descriptor '" + source + "'");
    if (!rest.empty()) rest.erase(0, 1);
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("bad synthetic key '" + item + "'");
      const auto key = item.substr(0, eq), val = item.substr(eq + 1);
      if (key == "n")
        spec.n = std::stoull(val);
      else if (key == "d")
        spec.d = std::stoull(val);
      else if (key == "seed")
        spec.seed = std::stoull(val);
      else if (key == "separation" || key == "sep")
        spec.separation = parse_number(val);
      else
        throw std::invalid_argument("unknown synthetic key '" + key + "'");
    }
    Dataset data = generate_synthetic(spec);
    std::string desc = "synthetic:n=" + std::to_string(spec.n) + ",d=" + std::to_string(spec.d) +
                       ",seed=" + std::to_string(spec.seed) + ",separation=" + num(spec.separation);
    DatasetMeta meta = dataset_stats(data, desc);
    return {std::move(data), std::move(meta)};
  }
  Dataset data = load_libsvm(source, dim);
  DatasetMeta meta = dataset_stats(data, source);
  return {std::move(data), std::move(meta)};
}

/// FNV-1a over the dataset contents and lambda.
inline std::uint64_t fingerprint(const Dataset& data, double lambda) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(data.size());
  mix(data.dim());
  mix(std::bit_cast<std::uint64_t>(lambda));
  for (const auto& ex : data.examples()) {
    mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(ex.label)));
    mix(ex.indices.size());
    for (std::size_t k = 0; k < ex.indices.size(); ++k) {
      mix(ex.indices[k]);
      mix(std::bit_cast<std::uint64_t>(ex.values[k]));
    }
  }
  return h;
}

// --------------------------------------------------------- reference cache

inline std::filesystem::path cache_dir() {
  const char* env = std::getenv("ASYSVRG_CACHE_DIR");
  return env != nullptr && *env != '\0' ? std::filesystem::path(env) : std::filesystem::path(".asysvrg_cache");
}

struct Reference {
  double f = 0.0;
  double grad_norm = 0.0;
  ParamVector w;
  bool from_cache = false;
  std::filesystem::path file;
};

namespace detail {

inline std::optional<Reference> read_reference(const std::filesystem::path& file, std::size_t dim) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  try {
    Reference ref;
    if (std::stoull(kv.at("d")) != dim) return std::nullopt;
    ref.f = asysvrg::detail::parse_real(kv.at("f"), 0);
    ref.grad_norm = asysvrg::detail::parse_real(kv.at("grad_norm"), 0);
    std::stringstream ws(kv.at("w"));
    std::string cell;
    while (std::getline(ws, cell, ',')) ref.w.push_back(asysvrg::detail::parse_real(cell, 0));
    if (ref.w.size() != dim) return std::nullopt;
    ref.from_cache = true;
    ref.file = file;
    return ref;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// The reference optimum for (data, lambda): read from the cache directory,
/// or computed by a long sequential SVRG run and stored there. A corrupt or
/// mismatched cache entry is recomputed.
inline Reference reference_for(const Dataset& data, double lambda) {
  std::ostringstream name;
  name << "wstar-" << std::hex << std::setw(16) << std::setfill('0') << fingerprint(data, lambda) << ".txt";
  const auto file = cache_dir() / name.str();
  if (auto cached = detail::read_reference(file, data.dim())) return *cached;

  const auto ref = reference_optimum(data, lambda);
  Reference out{ref.f, ref.grad_norm, ref.w, false, file};
  std::error_code ec;
  std::filesystem::create_directories(file.parent_path(), ec);
  const auto tmp = file.string() + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream o(tmp);
    o << "d=" << data.dim() << "\nlambda=" << num(lambda) << "\nf=" << num(ref.f) << "\ngrad_norm=" << num(ref.grad_norm)
      << "\nepochs=" << ref.epochs << "\nw=";
    for (std::size_t j = 0; j < ref.w.size(); ++j) o << (j ? "," : "") << num(ref.w[j]);
    o << '\n';
  }
  std::filesystem::rename(tmp, file, ec);
  if (ec) std::filesystem::remove(tmp, ec);
  return out;
}

// ------------------------------------------------------------ run configs

enum class Algorithm { AsySvrg, Hogwild };

struct RunSpec {
  Algorithm algorithm = Algorithm::AsySvrg;
  Scheme scheme = Scheme::LockFree;
  unsigned threads = 1;
  std::optional<double> eta;  // unset: pick from the step grid
  double lambda = 1e-4;
  std::size_t epochs = 30;
  std::optional<double> tol = 1e-4;
  std::uint64_t seed = 1;
  IterateOption option = IterateOption::CurrentIterate;
  std::optional<std::size_t> inner;  // unset: 2n/p
  double decay = 0.9;

  std::string label() const {
    std::string s = algorithm == Algorithm::AsySvrg ? "asysvrg" : "hogwild";
    s += "-";
    s += to_string(scheme);
    s += "-p" + std::to_string(threads);
    return s;
  }
};

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "asysvrg" || s == "svrg") return Algorithm::AsySvrg;
  if (s == "hogwild") return Algorithm::Hogwild;
  throw std::invalid_argument("unknown algorithm '" + s + "'");
}

/// Tolerance from a flag value: inf, 0 or a negative value disable early stopping.
inline std::optional<double> parse_tol(const std::string& s) {
  const double v = parse_number(s);
  if (!(v > 0.0) || std::isinf(v)) return std::nullopt;
  return v;
}

inline std::optional<double> parse_eta(const std::string& s) {
  if (s == "auto") return std::nullopt;
  const double v = parse_number(s);
  if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("eta must be finite and >= 0");
  return v;
}

/// `algo[:key=value,...]` with keys scheme, threads, eta, seed, option, inner, decay.
inline RunSpec parse_config(const std::string& text, const RunSpec& base) {
  RunSpec spec = base;
  const auto colon = text.find(':');
  spec.algorithm = parse_algorithm(text.substr(0, colon));
  if (colon == std::string::npos) return spec;
  std::stringstream ss(text.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("bad config item '" + item + "'");
    const auto key = item.substr(0, eq), val = item.substr(eq + 1);
    if (key == "scheme")
      spec.scheme = parse_scheme(val);
    else if (key == "threads" || key == "p")
      spec.threads = static_cast<unsigned>(std::stoul(val));
    else if (key == "eta")
      spec.eta = parse_eta(val);
    else if (key == "seed")
      spec.seed = std::stoull(val);
    else if (key == "option")
      spec.option = val == "2" ? IterateOption::AverageIterate : IterateOption::CurrentIterate;
    else if (key == "inner" || key == "M")
      spec.inner = std::stoull(val);
    else if (key == "decay")
      spec.decay = parse_number(val);
    else
      throw std::invalid_argument("unknown config key '" + key + "'");
  }
  return spec;
}

inline std::size_t inner_iters(const RunSpec& spec, std::size_t n) {
  return spec.inner.value_or(default_inner_iters(n, spec.threads));
}

inline double passes_per_epoch(const RunSpec& spec, std::size_t n) {
  if (spec.algorithm == Algorithm::Hogwild) {
    HogwildConfig h;
    h.workers = spec.threads;
    return static_cast<double>(spec.threads * hogwild_iters(n, h)) / static_cast<double>(n);
  }
  SolverConfig c;
  c.workers = spec.threads;
  c.inner_iters = inner_iters(spec, n);
  return asysvrg_passes_per_epoch(n, c);
}

/// One run with a fixed step; throws DivergenceError.
inline RunResult execute(const Dataset& data, const RunSpec& spec, double eta, std::optional<double> f_star,
                         std::optional<double> tol) {
  const ParamVector w0(data.dim(), 0.0);
  RunOptions opts{f_star, tol};
  if (spec.algorithm == Algorithm::Hogwild) {
    HogwildConfig h;
    h.step = eta;
    h.decay = spec.decay;
    h.workers = spec.threads;
    h.epochs = spec.epochs;
    h.seed = spec.seed;
    h.lambda = spec.lambda;
    return hogwild_run(data, h, spec.scheme != Scheme::LockFree, w0, opts);
  }
  SolverConfig c;
  c.scheme = spec.scheme;
  c.step = eta;
  c.inner_iters = inner_iters(spec, data.size());
  c.workers = spec.threads;
  c.option = spec.option;
  c.epochs = spec.epochs;
  c.seed = spec.seed;
  c.lambda = spec.lambda;
  return solve_asysvrg(data, c, w0, opts);
}

/// The explicit step, or the grid step (scale / L) with the lowest final
/// objective over the configured epochs.
inline double choose_step(const Dataset& data, const RunSpec& spec) {
  if (spec.eta) return *spec.eta;
  const double L = smoothness_constant(data, spec.lambda);
  return tune_step(L, [&](double eta) {
    const auto r = execute(data, spec, eta, std::nullopt, std::nullopt);
    return r.rows.empty() ? r.initial_objective : r.rows.back().objective;
  });
}

inline Header base_header(const std::string& command, const DatasetMeta& meta, double lambda) {
  return {{"command", command},
          {"dataset", meta.source},
          {"n", std::to_string(meta.n)},
          {"d", std::to_string(meta.d)},
          {"nnz", std::to_string(meta.nnz)},
          {"lambda", num(lambda)},
          {"build", ASYSVRG_BUILD_ID},
          {"hardware_concurrency", std::to_string(std::thread::hardware_concurrency())}};
}

inline void append_run_header(Header& h, const RunSpec& spec, double eta, std::size_t n) {
  h.emplace_back("algorithm", spec.algorithm == Algorithm::AsySvrg ? "asysvrg" : "hogwild");
  h.emplace_back("scheme", std::string(to_string(spec.scheme)));
  h.emplace_back("threads", std::to_string(spec.threads));
  h.emplace_back("eta", num(eta));
  h.emplace_back("eta_source", spec.eta ? "fixed" : "grid");
  if (spec.algorithm == Algorithm::AsySvrg) {
    h.emplace_back("inner_iters", std::to_string(inner_iters(spec, n)));
    h.emplace_back("option", spec.option == IterateOption::CurrentIterate ? "1" : "2");
  } else {
    h.emplace_back("decay", num(spec.decay));
  }
  h.emplace_back("epochs", std::to_string(spec.epochs));
  h.emplace_back("tol", spec.tol ? num(*spec.tol) : "off");
  h.emplace_back("seed", std::to_string(spec.seed));
  h.emplace_back("passes_per_epoch", num(passes_per_epoch(spec, n)));
  h.emplace_back("reproducible", spec.threads == 1 ? "true" : "false (thread interleaving varies run to run)");
}

// ------------------------------------------------------------------- run

struct RunArgs {
  std::string data;
  std::optional<std::size_t> dim;
  RunSpec spec;
};

inline int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
  const auto loaded = load_dataset(args.data, args.dim);
  const auto& data = loaded.data;
  const auto ref = reference_for(data, args.spec.lambda);
  Header h = base_header("run", loaded.meta, args.spec.lambda);
  h.emplace_back("L", num(smoothness_constant(data, args.spec.lambda)));
  h.emplace_back("f_star", num(ref.f));
  h.emplace_back("f_star_source", ref.from_cache ? "cache" : "computed");
  double eta = 0.0;
  try {
    eta = choose_step(data, args.spec);
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << '\n';
    return kDiverged;
  }
  append_run_header(h, args.spec, eta, data.size());
  write_metrics_header(out, h);
  try {
    const auto res = execute(data, args.spec, eta, ref.f, args.spec.tol);
    for (const auto& r : res.rows) write_metrics_row(out, r);
    out << "# converged=" << (res.converged ? "true" : "false") << '\n';
    if (res.converged) out << "# seconds_to_tol=" << num(res.seconds_to_tol) << '\n';
  } catch (const DivergenceError& e) {
    for (const auto& r : e.rows()) write_metrics_row(out, r);
    out << "# diverged epoch=" << e.epoch() << " objective=" << num(e.objective()) << '\n';
    err << "error: " << e.what() << '\n';
    return kDiverged;
  }
  return kOk;
}

// --------------------------------------------------------------- compare

inline constexpr const char* kCompareSchema = "asysvrg-compare/1";

struct CompareArgs {
  std::string data;
  std::optional<std::size_t> dim;
  double budget = 30.0;  // effective passes
  std::vector<RunSpec> configs;
};

/// Runs every config for floor(budget / passes_per_epoch) epochs without
/// early stopping. A single config prints exactly the `run` format.
inline int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err) {
  if (args.configs.empty()) {
    err << "error: compare needs at least one --config\n";
    return kError;
  }
  const double lambda = args.configs.front().lambda;
  for (const auto& c : args.configs)
    if (c.lambda != lambda) {
      err << "error: all configs must share lambda\n";
      return kError;
    }
  const auto loaded = load_dataset(args.data, args.dim);
  const auto& data = loaded.data;
  const auto ref = reference_for(data, lambda);
  const bool single = args.configs.size() == 1;

  Header h = base_header("compare", loaded.meta, lambda);
  h.emplace_back("budget_passes", num(args.budget));
  h.emplace_back("f_star", num(ref.f));
  struct Planned {
    RunSpec spec;
    double eta = 0.0;
    bool failed = false;
  };
  std::vector<Planned> plan;
  for (const auto& base : args.configs) {
    Planned p{base};
    p.spec.tol = std::nullopt;
    p.spec.epochs = static_cast<std::size_t>(std::floor(args.budget / passes_per_epoch(base, data.size()) + 1e-9));
    try {
      p.eta = p.spec.epochs > 0 ? choose_step(data, p.spec) : base.eta.value_or(0.0);
    } catch (const std::runtime_error& e) {
      err << "error: " << p.spec.label() << ": " << e.what() << '\n';
      p.failed = true;
    }
    plan.push_back(p);
  }
  if (single) {
    append_run_header(h, plan[0].spec, plan[0].eta, data.size());
    write_metrics_header(out, h);
  } else {
    for (std::size_t k = 0; k < plan.size(); ++k)
      h.emplace_back("config" + std::to_string(k), plan[k].spec.label() + " eta=" + num(plan[k].eta));
    out << "# schema=" << kCompareSchema << '\n';
    for (const auto& [key, val] : h) out << "# " << key << '=' << val << '\n';
    out << "config," << kMetricsColumns << '\n';
  }
  int status = kOk;
  for (const auto& p : plan) {
    if (p.failed) {
      status = kDiverged;
      continue;
    }
    if (p.spec.epochs == 0) continue;
    std::vector<EpochRow> rows;
    try {
      rows = execute(data, p.spec, p.eta, ref.f, std::nullopt).rows;
    } catch (const DivergenceError& e) {
      rows = e.rows();
      out << "# diverged config=" << p.spec.label() << " epoch=" << e.epoch() << '\n';
      status = kDiverged;
    }
    for (const auto& r : rows) {
      if (!single) out << p.spec.label() << ',';
      write_metrics_row(out, r);
    }
  }
  return status;
}

// --------------------------------------------------------------- speedup

struct SpeedupArgs {
  std::string data;
  std::optional<std::size_t> dim;
  RunSpec spec;  // threads is overridden per row
  std::vector<unsigned> threads{1, 2, 4};
  std::size_t seeds = 3;
};

struct SpeedupRow {
  unsigned threads = 1;
  std::size_t runs = 0, converged = 0;
  double median_seconds = std::numeric_limits<double>::quiet_NaN();
  double speedup = std::numeric_limits<double>::quiet_NaN();
  bool flagged = false;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

/// Median wall time to reach gap < tol per thread count; speedup is relative
/// to the one-thread median. Rows where any seed fails to converge are flagged
/// and get no speedup.
inline std::vector<SpeedupRow> measure_speedup(const Dataset& data, const RunSpec& base, double eta, double f_star,
                                               const std::vector<unsigned>& threads, std::size_t seeds) {
  std::vector<SpeedupRow> rows;
  for (unsigned p : threads) {
    RunSpec spec = base;
    spec.threads = p;
    SpeedupRow row{p};
    std::vector<double> times;
    for (std::size_t s = 0; s < seeds; ++s) {
      spec.seed = base.seed + s;
      ++row.runs;
      try {
        const auto res = execute(data, spec, eta, f_star, spec.tol);
        if (res.converged) {
          ++row.converged;
          times.push_back(res.seconds_to_tol);
        }
      } catch (const DivergenceError&) {
      }
    }
    row.flagged = row.converged < row.runs;
    if (!row.flagged) row.median_seconds = median(times);
    rows.push_back(row);
  }
  const auto one = std::find_if(rows.begin(), rows.end(), [](const SpeedupRow& r) { return r.threads == 1; });
  for (auto& r : rows)
    if (!r.flagged && one != rows.end() && !one->flagged) r.speedup = one->median_seconds / r.median_seconds;
  return rows;
}

inline int cmd_speedup(const SpeedupArgs& args, std::ostream& out, std::ostream& err) {
  if (!args.spec.tol) {
    err << "error: speedup needs a finite tolerance\n";
    return kError;
  }
  const auto loaded = load_dataset(args.data, args.dim);
  const auto& data = loaded.data;
  const auto ref = reference_for(data, args.spec.lambda);
  RunSpec one = args.spec;
  one.threads = 1;
  double eta = 0.0;
  try {
    eta = choose_step(data, one);
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << '\n';
    return kDiverged;
  }
  Header h = base_header("speedup", loaded.meta, args.spec.lambda);
  h.emplace_back("algorithm", args.spec.algorithm == Algorithm::AsySvrg ? "asysvrg" : "hogwild");
  h.emplace_back("scheme", std::string(to_string(args.spec.scheme)));
  h.emplace_back("eta", num(eta));
  h.emplace_back("tol", num(*args.spec.tol));
  h.emplace_back("max_epochs", std::to_string(args.spec.epochs));
  h.emplace_back("seeds", std::to_string(args.seeds));
  h.emplace_back("f_star", num(ref.f));
  for (const auto& [k, v] : h) out << "# " << k << '=' << v << '\n';
  out << "threads,runs,converged,median_seconds,speedup,flag\n";
  const auto rows = measure_speedup(data, args.spec, eta, ref.f, args.threads, args.seeds);
  for (const auto& r : rows)
    out << r.threads << ',' << r.runs << ',' << r.converged << ',' << num(r.median_seconds) << ',' << num(r.speedup)
        << ',' << (r.flagged ? "not_converged" : "ok") << '\n';
  return kOk;
}

// --------------------------------------------------------------- certify

struct CertifyArgs {
  std::optional<double> L, mu;
  std::optional<std::string> data;  // derive L and mu = lambda from a dataset
  std::optional<std::size_t> dim;
  double lambda = 1e-4;
  unsigned tau = 0;
  std::optional<double> m_tilde;  // default 2n with a dataset
  Scheme scheme = Scheme::ConsistentLock;
  std::optional<double> eta;  // unset: sweep
  std::optional<double> r;
};

inline int cmd_certify(const CertifyArgs& args, std::ostream& out, std::ostream& err) {
  double L = 0.0, mu = 0.0, mt = 0.0;
  if (args.data) {
    const auto loaded = load_dataset(*args.data, args.dim);
    L = smoothness_constant(loaded.data, args.lambda);
    mu = strong_convexity_constant(args.lambda);
    mt = args.m_tilde.value_or(2.0 * static_cast<double>(loaded.data.size()));
  }
  if (args.L) L = *args.L;
  if (args.mu) mu = *args.mu;
  if (args.m_tilde) mt = *args.m_tilde;
  if (!(L > 0.0) || !(mu > 0.0) || !(mt > 0.0)) {
    err << "error: need positive L, mu and M~ (give --L/--mu/--mtilde or --data)\n";
    return kError;
  }
  if (args.eta) {
    const auto cert = certify(args.scheme, L, mu, *args.eta, args.tau, mt, args.r);
    out << cert.serialize();
    if (!cert.valid) {
      err << "invalid certificate: ";
      for (std::size_t k = 0; k < cert.violated.size(); ++k) err << (k ? ", " : "") << cert.violated[k];
      err << '\n';
      return kInvalid;
    }
    return kOk;
  }
  if (args.scheme == Scheme::LockFree) {
    out << certify(args.scheme, L, mu, 0.5 / L, args.tau, mt).serialize();
    err << "invalid certificate: " << cond::kNoAnalysis << '\n';
    return kInvalid;
  }
  // Sweep: a log grid up to 1/(2L), then the largest certified step.
  const auto best = max_certified_step(L, mu, args.tau, mt, args.scheme);
  for (int k = 12; k >= 0; --k) {
    const double eta = 0.5 / L * std::pow(10.0, -0.5 * k);
    out << certify(args.scheme, L, mu, eta, args.tau, mt).serialize() << '\n';
  }
  if (!best) {
    out << "eta_max=none\n";
    err << "no certified step size for these constants\n";
    return kInvalid;
  }
  out << certify(args.scheme, L, mu, *best, args.tau, mt).serialize();
  out << "eta_max=" << num(*best) << '\n';
  return kOk;
}

// -------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string data;
  std::optional<std::size_t> dim;
  std::optional<std::string> schedule_file;  // otherwise random schedules
  ScheduleSpec random{4, 0, 3, false, MaskPolicy::None};  // updates_per_worker 0: 2n/p
  Scheme scheme = Scheme::ConsistentLock;
  std::optional<double> eta;  // unset: max certified step, else 0.1/L
  double lambda = 1e-4;
  std::size_t epochs = 3;
  std::uint64_t seed = 1;
  IterateOption option = IterateOption::AverageIterate;
  std::optional<std::string> trajectory_out;
  bool vectors = false;
  std::size_t validate_seeds = 0;  // > 0: Monte-Carlo check of the certificate
};

inline int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  const auto loaded = load_dataset(args.data, args.dim);
  const auto& data = loaded.data;
  const double L = smoothness_constant(data, args.lambda);
  const bool inconsistent = args.scheme == Scheme::InconsistentLock;

  Schedule file_schedule;
  ScheduleSpec spec = args.random;
  if (spec.updates_per_worker == 0) spec.updates_per_worker = default_inner_iters(data.size(), spec.workers);
  if (args.schedule_file) {
    std::ifstream in(*args.schedule_file);
    if (!in) {
      err << "error: cannot open schedule " << *args.schedule_file << '\n';
      return kError;
    }
    try {
      file_schedule = parse_schedule(in);
      validate_schedule(file_schedule, data.dim(), inconsistent);
    } catch (const std::exception& e) {
      err << "error: schedule " << *args.schedule_file << ": " << e.what() << '\n';
      return kError;
    }
    const unsigned p = std::max(1U, file_schedule.workers());
    spec = {p, std::max<std::size_t>(1, file_schedule.updates() / p), file_schedule.tau, false,
            inconsistent ? MaskPolicy::Random : MaskPolicy::None};
  }
  const unsigned tau = args.schedule_file ? file_schedule.tau : spec.tau;
  const double m_tilde = args.schedule_file ? static_cast<double>(file_schedule.updates())
                                            : static_cast<double>(spec.workers * spec.updates_per_worker);
  const double mu = strong_convexity_constant(args.lambda);
  double eta = 0.0;
  if (args.eta) {
    eta = *args.eta;
  } else {
    const auto best = args.scheme == Scheme::LockFree ? std::nullopt : max_certified_step(L, mu, tau, m_tilde, args.scheme);
    eta = best.value_or(0.1 / L);
  }
  const auto cert_at = certify(args.scheme, L, mu, eta, tau, m_tilde);

  SimConfig cfg;
  cfg.scheme = args.scheme;
  cfg.step = eta;
  cfg.lambda = args.lambda;
  cfg.epochs = args.epochs;
  cfg.seed = args.seed;
  cfg.option = args.option;
  const ParamVector w0(data.dim(), 0.0);
  const ScheduleSource source = args.schedule_file ? ScheduleSource([&](std::size_t) { return file_schedule; })
                                                   : random_schedule_source(spec, data.dim(), args.seed);
  TrajectoryLog log;
  try {
    log = simulate(data, cfg, source, w0);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kError;
  }
  const auto ref = reference_for(data, args.lambda);
  measure_q_sequence(log, data, args.lambda);

  if (args.trajectory_out) {
    std::ofstream t(*args.trajectory_out);
    write_trajectory_csv(t, log, args.vectors);
  }

  bool ok = true;
  auto report = [&](const InequalityCheck& c, bool expect_zero) {
    const bool pass = !expect_zero || c.violations == 0;
    ok = ok && pass;
    out << "check " << c.name << " checked=" << c.checked << " violations=" << c.violations
        << " worst_ratio=" << num(c.worst_ratio) << ' ' << (expect_zero ? (pass ? "PASS" : "FAIL") : "INFO") << '\n';
  };
  out << "# dataset=" << loaded.meta.source << " n=" << data.size() << " d=" << data.dim() << '\n';
  out << "# scheme=" << to_string(args.scheme) << " eta=" << num(eta) << " tau=" << tau << " m_tilde=" << num(m_tilde)
      << " epochs=" << args.epochs << " steps=" << log.steps.size() << " max_delay=" << log.max_delay << '\n';
  report(check_delay_bound(log, tau), true);
  report(check_variance_bound(log, data, args.lambda, L, ref.f), true);
  if (inconsistent) {
    report(check_read_deviation(log, ReadBound::Four), tau <= 4);
    report(check_read_deviation(log, ReadBound::Delay), true);
  }

  // Zero-delay single-worker schedules must reproduce sequential SVRG.
  const bool sequential = log.max_delay == 0 && spec.workers == 1;
  if (sequential) {
    const std::size_t per_epoch = log.steps.size() / std::max<std::size_t>(1, args.epochs);
    const auto seq = svrg_sequential(data, w0, eta, per_epoch, args.epochs, args.seed, args.lambda, args.option);
    const bool match = seq.snapshots == log.snapshots;
    ok = ok && match;
    out << "check sequential_svrg_bitwise " << (match ? "match PASS" : "differs FAIL") << '\n';
  }

  out << "certificate valid=" << (cert_at.valid ? "true" : "false") << " alpha=" << num(cert_at.alpha) << '\n';
  if (args.validate_seeds > 0) {
    if (!cert_at.valid) {
      out << "check empirical_rate SKIPPED (no valid certificate at this step)\n";
    } else {
      const auto rep = validate_certificate(data, cfg, cert_at, spec, args.validate_seeds, ref.f, w0);
      const bool pass = rep.max_ratio <= cert_at.alpha + 0.1;
      ok = ok && pass;
      out << "check empirical_rate seeds=" << rep.seeds << " epochs_measured=" << rep.ratios.size()
          << " max_ratio=" << num(rep.max_ratio) << " alpha=" << num(cert_at.alpha) << " bound=alpha+0.1 "
          << (pass ? "PASS" : "FAIL") << '\n';
    }
  }
  for (std::size_t t = 0; t < log.objectives.size(); ++t)
    out << "epoch " << t << " objective=" << num(log.objectives[t]) << " gap=" << num(log.objectives[t] - ref.f) << '\n';
  return ok ? kOk : kCheckFailed;
}

// -------------------------------------------------------------- gen-data

struct GenDataArgs {
  SyntheticSpec spec;
  std::string out;
};

/// Writes the LibSVM file plus a `<out>.meta` descriptor.
inline int cmd_gen_data(const GenDataArgs& args, std::ostream& out, std::ostream& err) {
  const auto data = generate_synthetic(args.spec);
  std::ofstream f(args.out);
  if (!f) {
    err << "error: cannot write " << args.out << '\n';
    return kError;
  }
  write_libsvm(f, data);
  std::ofstream(args.out + ".meta") << args.spec.to_header();
  const auto meta = dataset_stats(data);
  out << "wrote " << args.out << " n=" << meta.n << " d=" << meta.d << " nnz=" << meta.nnz << '\n';
  return kOk;
}

}  // namespace asysvrg::bench
