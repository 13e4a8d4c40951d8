#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sgfbsde/sgfbsde.hpp"

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitValidation = 4;
constexpr int kExitIo = 5;

sgfbsde::ErrorNormSpec parse_norm(const std::string& text, bool all_levels) {
  sgfbsde::ErrorNormSpec spec;
  spec.all_levels = all_levels;
  if (text == "max") return spec;
  if (text == "rms") {
    spec.kind = sgfbsde::ErrorNorm::rms;
    return spec;
  }
  if (text.rfind("point:", 0) == 0) {
    spec.kind = sgfbsde::ErrorNorm::point;
    std::stringstream ss(text.substr(6));
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        spec.point.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw sgfbsde::InvalidParameter("bad coordinate '" + cell + "' in --norm");
      }
    }
    if (spec.point.empty()) throw sgfbsde::InvalidParameter("--norm point: needs coordinates");
    return spec;
  }
  throw sgfbsde::InvalidParameter("--norm must be max, rms or point:<x1,...,xq>");
}

void write_or_print(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw sgfbsde::IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw sgfbsde::IoError("failed writing '" + path + "'");
}

struct SolveOptions {
  sgfbsde::ExperimentSpec spec;
  std::string norm = "max";
  bool all_levels = false;
  bool no_timing = false;
};

int run_solve(SolveOptions& o) {
  o.spec.norm = parse_norm(o.norm, o.all_levels);
  o.spec.timing = !o.no_timing;
  const auto result = sgfbsde::run_experiment(o.spec);
  write_or_print(sgfbsde::format_csv(result), o.spec.output);

  bool diverged = false;
  for (const auto& row : result.rows) {
    if (row.ok) {
      std::fprintf(stderr, "N=%d  err_y=%.3e  err_z=%.3e  picard max=%d mean=%.2f  out-of-box=%zu\n", row.N,
                   row.err_y, row.err_z, row.max_picard, row.mean_picard, row.out_of_box);
    } else {
      diverged = true;
      std::fprintf(stderr, "N=%d  failed: %s\n", row.N, row.failure.c_str());
    }
  }
  auto pairwise = [](const sgfbsde::RateFit& f) {
    std::string s;
    for (double r : f.pairwise) {
      char buf[16];
      std::snprintf(buf, sizeof buf, " %.3f", r);
      s += buf;
    }
    return s;
  };
  std::fprintf(stderr, "CR_Y=%.3f (pairwise%s)%s\n", result.cr_y.rate, pairwise(result.cr_y).c_str(),
               result.cr_y.reliable ? "" : "  [fewer than 3 rows]");
  std::fprintf(stderr, "CR_Z=%.3f (pairwise%s)%s\n", result.cr_z.rate, pairwise(result.cr_z).c_str(),
               result.cr_z.reliable ? "" : "  [fewer than 3 rows]");
  return diverged ? kExitDivergence : 0;
}

int run_scaling(const std::string& family, const std::vector<int>& qs, int N, int k, int threads,
                const std::string& out) {
  const auto rows = sgfbsde::scaling_report(family, qs, N, k, threads);
  write_or_print(sgfbsde::format_scaling_csv(family, N, rows), out);
  return 0;
}

int run_validate(const std::string& id, double T) {
  const auto prob = sgfbsde::problem_by_id(id, T);
  bool ok = true;
  auto report = [&](const char* what, double value, double limit) {
    const bool pass = value <= limit;
    ok = ok && pass;
    std::printf("%-28s %.3e  (limit %.0e)  %s\n", what, value, limit, pass ? "ok" : "FAILED");
  };
  report("feynman-kac residual", sgfbsde::feynman_kac_residual(prob), 1e-6);
  report("terminal consistency", sgfbsde::terminal_consistency_error(prob), 1e-12);
  report("z identity", sgfbsde::z_identity_error(prob), 1e-6);
  if (prob.domain.strategy == sgfbsde::DomainStrategy::propagated) {
    const auto b = sgfbsde::sample_coefficient_bounds(prob);
    report("drift bound excess", std::max(0.0, b.drift - prob.domain.drift_bound), 0.0);
    report("diffusion bound excess", std::max(0.0, b.diffusion - prob.domain.diffusion_bound), 0.0);
  }
  return ok ? 0 : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-grid multistep solver for forward-backward SDEs"};
  app.require_subcommand(1);

  SolveOptions so;
  auto* solve = app.add_subcommand("solve", "Run a convergence sweep over N and print CSV");
  solve->add_option("--problem", so.spec.problem, "example1, example2:q=<n> or example3:q=<n>")->required();
  solve->add_option("--k", so.spec.k, "Number of steps (1..6)")->check(CLI::Range(1, 6));
  solve->add_option("--N", so.spec.N, "Time step counts, e.g. 8,16,32")->delimiter(',');
  solve->add_option("--p", so.spec.p, "Interpolation level (default: reference setting)");
  solve->add_option("--pq", so.spec.pq, "Quadrature level (default: reference setting)");
  solve->add_option("--tol", so.spec.tol, "Picard tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--T", so.spec.T, "Time horizon")->check(CLI::PositiveNumber);
  solve->add_option("--norm", so.norm, "max, rms or point:<x1,...,xq>");
  solve->add_flag("--all-levels", so.all_levels, "Measure errors over every time level");
  solve->add_option("--threads", so.spec.threads, "Worker threads")->check(CLI::PositiveNumber);
  solve->add_option("--out", so.spec.output, "CSV output path (default: stdout)");
  solve->add_flag("--no-timing", so.no_timing, "Write zero runtimes for reproducible output");

  std::string family = "example2", scaling_out;
  std::vector<int> qs{3, 4, 5};
  int scaling_n = 128, scaling_k = 1, scaling_threads = 1;
  auto* scaling = app.add_subcommand("scaling", "Runtime versus dimension at fixed N");
  scaling->add_option("--problem", family, "Problem family (example2 or example3)");
  scaling->add_option("--q", qs, "Dimensions, e.g. 3,4,5")->delimiter(',');
  scaling->add_option("--N", scaling_n, "Time steps")->check(CLI::PositiveNumber);
  scaling->add_option("--k", scaling_k, "Number of steps")->check(CLI::Range(1, 6));
  scaling->add_option("--threads", scaling_threads, "Worker threads")->check(CLI::PositiveNumber);
  scaling->add_option("--out", scaling_out, "CSV output path (default: stdout)");

  std::string validate_id;
  double validate_t = 1.0;
  auto* validate = app.add_subcommand("validate", "Check a problem's coefficients against its exact solution");
  validate->add_option("--problem", validate_id, "Problem id")->required();
  validate->add_option("--T", validate_t, "Time horizon")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*solve) return run_solve(so);
    if (*scaling) return run_scaling(family, qs, scaling_n, scaling_k, scaling_threads, scaling_out);
    if (*validate) return run_validate(validate_id, validate_t);
  } catch (const sgfbsde::InvalidParameter& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const sgfbsde::SolverDivergence& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDivergence;
  } catch (const sgfbsde::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const sgfbsde::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
