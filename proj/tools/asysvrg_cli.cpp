// asysvrg: run, compare, time and certify asynchronous SVRG solvers.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "asysvrg/bench.hpp"

using namespace asysvrg;
namespace b = asysvrg::bench;

namespace {

struct Output {
  std::unique_ptr<std::ofstream> file;
  std::ostream& stream() { return file ? *file : std::cout; }
  void open(const std::string& path) {
    if (path.empty() || path == "-") return;
    file = std::make_unique<std::ofstream>(path);
    if (!*file) throw std::runtime_error("cannot write " + path);
  }
};

struct Common {
  std::string data;
  std::optional<std::size_t> dim;
  std::string out;
  double lambda = 1e-4;

  void add(CLI::App* app, bool needs_data = true) {
    auto* d = app->add_option("--data", data, "LibSVM file (optionally .gz) or synthetic[:n=,d=,seed=,separation=]");
    if (needs_data) d->required();
    app->add_option("--dim", dim, "Feature dimension (default: max index in the file)");
    app->add_option("--lambda", lambda, "L2 regularization")->check(CLI::PositiveNumber);
    app->add_option("-o,--out", out, "Output file (default stdout)");
  }
};

struct RunFlags {
  std::string algorithm = "asysvrg", scheme = "lockfree", eta = "auto", tol = "1e-4";
  unsigned threads = 1;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  int option = 1;
  std::optional<std::size_t> inner;
  double decay = 0.9;

  void add(CLI::App* app, bool with_threads = true) {
    app->add_option("--algorithm", algorithm, "asysvrg | hogwild")->check(CLI::IsMember({"asysvrg", "svrg", "hogwild"}));
    app->add_option("--scheme", scheme, "consistent | inconsistent | lockfree");
    if (with_threads) app->add_option("-p,--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app->add_option("--eta", eta, "Step size, or 'auto' to pick from the grid {1,0.5,0.1,0.05}/L");
    app->add_option("--epochs", epochs, "Outer iterations (maximum when a tolerance is set)");
    app->add_option("--tol", tol, "Stop once f(w)-f* < tol; 'inf' or <= 0 disables");
    app->add_option("--seed", seed, "RNG seed");
    app->add_option("--option", option, "Snapshot rule: 1 = last iterate, 2 = average")->check(CLI::IsMember({1, 2}));
    app->add_option("--inner", inner, "Inner iterations per worker (default 2n/p)");
    app->add_option("--decay", decay, "Hogwild step decay per epoch")->check(CLI::Range(1e-12, 1.0));
  }

  b::RunSpec spec(double lambda) const {
    b::RunSpec s;
    s.algorithm = b::parse_algorithm(algorithm);
    s.scheme = parse_scheme(scheme);
    s.threads = threads;
    s.eta = b::parse_eta(eta);
    s.lambda = lambda;
    s.epochs = epochs;
    s.tol = b::parse_tol(tol);
    s.seed = seed;
    s.option = option == 2 ? IterateOption::AverageIterate : IterateOption::CurrentIterate;
    s.inner = inner;
    s.decay = decay;
    return s;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous SVRG for L2-regularized logistic regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("asysvrg ") + ASYSVRG_BUILD_ID);

  Common run_c;
  RunFlags run_f;
  auto* run = app.add_subcommand("run", "Train once and write per-epoch metrics CSV");
  run_c.add(run);
  run_f.add(run);

  Common cmp_c;
  RunFlags cmp_f;
  double budget = 30.0;
  std::vector<std::string> configs;
  auto* compare = app.add_subcommand("compare", "Run several solvers for the same effective-pass budget");
  cmp_c.add(compare);
  cmp_f.add(compare);
  compare->add_option("--budget", budget, "Effective passes per solver")->check(CLI::NonNegativeNumber);
  compare
      ->add_option("--config", configs,
                   "algo[:scheme=,threads=,eta=,seed=,option=,inner=,decay=]; repeatable; unset keys come from the flags")
      ->required();

  Common sp_c;
  RunFlags sp_f;
  std::vector<unsigned> sp_threads{1, 2, 4};
  std::size_t sp_seeds = 3;
  auto* speedup = app.add_subcommand("speedup", "Median wall time to tolerance per thread count");
  sp_c.add(speedup);
  sp_f.add(speedup, false);
  speedup->add_option("--threads", sp_threads, "Thread counts")->delimiter(',');
  speedup->add_option("--seeds", sp_seeds, "Runs per thread count")->check(CLI::PositiveNumber);

  Common ct_c;
  b::CertifyArgs ct;
  std::string ct_scheme = "consistent", ct_eta;
  auto* certify_cmd = app.add_subcommand("certify", "Evaluate the convergence certificate for given constants");
  ct_c.add(certify_cmd, false);
  certify_cmd->add_option("--L", ct.L, "Smoothness constant");
  certify_cmd->add_option("--mu", ct.mu, "Strong convexity constant");
  certify_cmd->add_option("--tau", ct.tau, "Delay bound");
  certify_cmd->add_option("--mtilde", ct.m_tilde, "Updates per epoch over all workers");
  certify_cmd->add_option("--scheme", ct_scheme, "consistent | inconsistent | lockfree");
  certify_cmd->add_option("--eta", ct_eta, "Step size; omit for a sweep and the largest certified step");
  certify_cmd->add_option("--r", ct.r, "Free parameter r of the inconsistent bound (default 1/eta)");

  Common sm_c;
  b::SimulateArgs sm;
  std::string sm_scheme = "consistent", sm_eta = "auto", sm_masks = "none", sm_traj;
  std::optional<std::string> sm_schedule;
  int sm_option = 2;
  auto* simulate_cmd = app.add_subcommand("simulate", "Replay deterministic schedules and check the analysis inequalities");
  sm_c.add(simulate_cmd);
  simulate_cmd->add_option("--schedule", sm_schedule, "Schedule file (default: random tau-bounded schedules)");
  simulate_cmd->add_option("--workers", sm.random.workers, "Workers for random schedules")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--updates-per-worker", sm.random.updates_per_worker, "Default 2n/p");
  simulate_cmd->add_option("--tau", sm.random.tau, "Delay bound for random schedules");
  simulate_cmd->add_flag("--saturate", sm.random.saturate, "Drive delays to tau whenever possible");
  simulate_cmd->add_option("--masks", sm_masks, "Partial reads: none | random | all-newer")
      ->check(CLI::IsMember({"none", "random", "all-newer"}));
  simulate_cmd->add_option("--scheme", sm_scheme, "consistent | inconsistent | lockfree");
  simulate_cmd->add_option("--eta", sm_eta, "Step size, or 'auto' for the largest certified step");
  simulate_cmd->add_option("--epochs", sm.epochs, "Outer iterations");
  simulate_cmd->add_option("--seed", sm.seed, "RNG seed");
  simulate_cmd->add_option("--option", sm_option, "Snapshot rule: 1 = last iterate, 2 = average")
      ->check(CLI::IsMember({1, 2}));
  simulate_cmd->add_option("--trajectory", sm_traj, "Write the per-step trajectory CSV here");
  simulate_cmd->add_flag("--vectors", sm.vectors, "Include u and v vectors in the trajectory CSV");
  simulate_cmd->add_option("--validate", sm.validate_seeds, "Monte-Carlo check of the certificate over N seeds");

  b::GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic LibSVM dataset and its .meta descriptor");
  gen_cmd->add_option("--n", gen.spec.n, "Examples")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--d", gen.spec.d, "Features")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.spec.seed, "RNG seed");
  gen_cmd->add_option("--separation", gen.spec.separation, "Margin scale ('inf' for noiseless labels)");
  gen_cmd->add_option("-o,--out", gen.out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : b::kError;
  }

  try {
    Output out;
    if (*run) {
      out.open(run_c.out);
      b::RunArgs a{run_c.data, run_c.dim, run_f.spec(run_c.lambda)};
      return b::cmd_run(a, out.stream(), std::cerr);
    }
    if (*compare) {
      out.open(cmp_c.out);
      b::CompareArgs a{cmp_c.data, cmp_c.dim, budget, {}};
      const auto base = cmp_f.spec(cmp_c.lambda);
      for (const auto& c : configs) a.configs.push_back(b::parse_config(c, base));
      return b::cmd_compare(a, out.stream(), std::cerr);
    }
    if (*speedup) {
      out.open(sp_c.out);
      b::SpeedupArgs a{sp_c.data, sp_c.dim, sp_f.spec(sp_c.lambda), sp_threads, sp_seeds};
      return b::cmd_speedup(a, out.stream(), std::cerr);
    }
    if (*certify_cmd) {
      out.open(ct_c.out);
      if (!ct_c.data.empty()) ct.data = ct_c.data;
      ct.dim = ct_c.dim;
      ct.lambda = ct_c.lambda;
      ct.scheme = parse_scheme(ct_scheme);
      if (!ct_eta.empty()) ct.eta = b::parse_number(ct_eta);
      return b::cmd_certify(ct, out.stream(), std::cerr);
    }
    if (*simulate_cmd) {
      out.open(sm_c.out);
      sm.data = sm_c.data;
      sm.dim = sm_c.dim;
      sm.lambda = sm_c.lambda;
      sm.schedule_file = sm_schedule;
      sm.scheme = parse_scheme(sm_scheme);
      sm.eta = b::parse_eta(sm_eta);
      sm.option = sm_option == 2 ? IterateOption::AverageIterate : IterateOption::CurrentIterate;
      sm.random.masks = sm_masks == "random"      ? MaskPolicy::Random
                        : sm_masks == "all-newer" ? MaskPolicy::AllNewer
                                                  : MaskPolicy::None;
      if (!sm_traj.empty()) sm.trajectory_out = sm_traj;
      return b::cmd_simulate(sm, out.stream(), std::cerr);
    }
    if (*gen_cmd) return b::cmd_gen_data(gen, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return b::kError;
  }
  return b::kError;
}
