// bai: command-line front end for allocation queries, Monte Carlo experiments
// and martingale diagnostics.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bai/bai.hpp"

namespace {

/// Value rounded to 10 significant digits, so JSON output matches %.10g.
double round10(double x) { return std::strtod(bai::format_number(x).c_str(), nullptr); }

std::string human(double x) { return bai::format_number(x, "%.6g"); }

unsigned threads_from_env() {
  const char* v = std::getenv("BAI_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0') throw bai::Error("BAI_THREADS must be a non-negative integer");
  return static_cast<unsigned>(n);
}

struct AllocateArgs {
  std::vector<double> means;
  std::vector<double> vars;
  std::vector<double> probs;
  std::string format = "text";
  double tol = 1e-12;
};

int cmd_allocate(const AllocateArgs& args) {
  if (args.vars.empty() == args.probs.empty()) {
    throw bai::Error("give exactly one of --vars or --probs");
  }
  std::vector<bai::ArmDistribution> arms;
  if (!args.probs.empty()) {
    if (!args.means.empty()) throw bai::Error("--probs replaces --means for Bernoulli arms");
    for (double p : args.probs) arms.push_back(bai::ArmDistribution::bernoulli(p));
  } else {
    if (args.means.size() != args.vars.size()) {
      throw bai::Error("--means and --vars must have the same length");
    }
    for (std::size_t a = 0; a < args.means.size(); ++a) {
      arms.push_back(bai::ArmDistribution::gaussian(args.means[a], args.vars[a]));
    }
  }
  const bai::BanditInstance instance(std::move(arms));
  const std::size_t best = bai::best_arm(instance);
  const auto solution = bai::solve_optimal_allocation(instance, bai::SolverOptions{args.tol, 200});
  const auto h = bai::complexity_measures(instance);

  if (args.format == "json") {
    nlohmann::json out;
    out["best_arm"] = best + 1;
    std::vector<double> w;
    for (double x : solution.allocation.weights()) w.push_back(round10(x));
    out["w"] = w;
    out["y_star"] = round10(solution.y_star);
    out["gamma_star"] = round10(solution.gamma_star);
    out["H1"] = round10(h.h1);
    out["H2"] = round10(h.h2);
    out["Hsigma"] = round10(h.hsigma);
    std::cout << out.dump() << '\n';
  } else {
    std::cout << "best arm: " << best + 1 << '\n' << "w*:";
    for (double x : solution.allocation.weights()) std::cout << ' ' << human(x);
    std::cout << '\n'
              << "y*: " << human(solution.y_star) << '\n'
              << "Gamma*: " << human(solution.gamma_star) << '\n'
              << "H1: " << human(h.h1) << '\n'
              << "H2: " << human(h.h2) << '\n'
              << "Hsigma: " << human(h.hsigma) << '\n';
  }
  return 0;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bai::Error("cannot write " + path);
  return out;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path) {
  bai::ExperimentConfig config = bai::load_config(config_path);
  config.threads = threads_from_env();
  const bai::ResultTable table = bai::run_experiment(config);
  auto out = open_output(out_path);
  bai::write_csv(out, table);
  if (!out) throw bai::Error("failed writing " + out_path);

  const std::size_t last = config.record_rounds.back();
  for (const auto& spec : config.strategies) {
    const auto& row = table.at(spec.id, last);
    std::cout << spec.id << ": p_hat(t=" << last << ") = " << human(row.p_hat)
              << " (stderr " << human(row.std_error) << ", n=" << row.n << ")\n";
  }
  return 0;
}

int cmd_diagnose(const std::string& config_path, const std::string& out_path) {
  bai::ExperimentConfig config = bai::load_config(config_path);
  config.threads = threads_from_env();
  const bai::DiagnosticsReport report = bai::estimate_V_T(config, config.checkpoints);
  auto out = open_output(out_path);
  bai::write_diagnostics_csv(out, report);
  if (!out) throw bai::Error("failed writing " + out_path);
  for (const auto& row : report.rows) {
    std::cout << row.strategy << ": T=" << row.checkpoint << " V_hat=" << human(row.v_hat)
              << " xi_mean=" << human(row.xi_mean) << " gamma_star=" << human(row.gamma_star)
              << '\n';
  }
  return 0;
}

int cmd_scenarios() {
  for (const auto& line : bai::catalogue_lines()) std::cout << line << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-budget best-arm identification laboratory"};
  app.require_subcommand(1);

  AllocateArgs alloc;
  auto* allocate = app.add_subcommand("allocate", "Optimal allocation w*, exponent and complexity");
  allocate->add_option("--means", alloc.means, "Comma-separated arm means")->delimiter(',');
  allocate->add_option("--vars", alloc.vars, "Comma-separated arm variances (Gaussian arms)")
      ->delimiter(',');
  allocate->add_option("--probs", alloc.probs, "Comma-separated success probabilities (Bernoulli arms)")
      ->delimiter(',');
  allocate->add_option("--format", alloc.format, "Output format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();
  allocate->add_option("--tol", alloc.tol, "Bisection tolerance on |F(y) - 1|")
      ->capture_default_str();

  std::string config_path, out_path;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo experiment, write a CSV table");
  simulate->add_option("--config", config_path, "Experiment config (JSON)")->required();
  simulate->add_option("--out", out_path, "Output CSV path")->required();

  std::string diag_config, diag_out;
  auto* diagnose = app.add_subcommand("diagnose", "Martingale diagnostics, write a CSV report");
  diagnose->add_option("--config", diag_config, "Experiment config (JSON)")->required();
  diagnose->add_option("--out", diag_out, "Output CSV path")->required();

  auto* scenarios = app.add_subcommand("scenarios", "List benchmark scenarios and case recipes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (allocate->parsed()) {
      if (alloc.means.empty() && alloc.probs.empty()) throw bai::Error("--means is required");
      return cmd_allocate(alloc);
    }
    if (simulate->parsed()) return cmd_simulate(config_path, out_path);
    if (diagnose->parsed()) return cmd_diagnose(diag_config, diag_out);
    if (scenarios->parsed()) return cmd_scenarios();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
