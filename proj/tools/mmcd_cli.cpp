// mmcd: robust matrix-variate location/scatter fitting, outlier detection,
// Shapley explanations and simulation runs.
//
// Exit codes: 0 success, 2 input error, 3 precondition error, 4 numerical error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mmcd/mmcd.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitNumerical = 4;

struct InputOptions {
  std::string path;
  std::optional<std::size_t> rows;
  std::optional<std::size_t> cols;

  void add(CLI::App& cmd) {
    cmd.add_option("input", path, "Observations: .mxt file, or CSV with --rows/--cols")->required();
    cmd.add_option("--rows", rows, "Rows p of each observation (CSV input)");
    cmd.add_option("--cols", cols, "Columns q of each observation (CSV input)");
  }

  mmcd::MatrixStack load() const {
    if (rows || cols) {
      if (!rows || !cols) throw mmcd::InputError("CSV input needs both --rows and --cols");
      return mmcd::io::read_csv_stack(path, *rows, *cols);
    }
    return mmcd::io::read_mxt(path);
  }
};

mmcd::ParamSet pick(const mmcd::io::FitRecord& f, const std::string& which) {
  return which == "raw" ? f.raw : f.reweighted;
}

void check_shape(const mmcd::MatrixStack& x, const mmcd::io::FitRecord& f) {
  if (x.p() != f.p || x.q() != f.q)
    throw mmcd::PreconditionError("data are " + std::to_string(x.p()) + "x" + std::to_string(x.q()) +
                                  " but the fit is " + std::to_string(f.p) + "x" + std::to_string(f.q));
}

void emit(const std::string& output, const std::string& content) {
  if (output.empty() || output == "-") std::cout << content;
  else mmcd::io::atomic_write(output, content);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix minimum covariance determinant toolkit"};
  app.require_subcommand(1);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit the reweighted MMCD estimator");
  fit->set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
  InputOptions fit_in;
  fit_in.add(*fit);
  std::optional<std::size_t> h;
  std::size_t m = 500;
  std::size_t keep = 10;
  std::uint64_t seed = 0;
  std::string subsampling = "auto";
  std::string fit_out;
  fit->add_option("--h", h, "Subset size (default floor((n+d+2)/2))");
  fit->add_option("-m,--subsets", m, "Number of elemental starts")->capture_default_str();
  fit->add_option("--keep", keep, "Candidates refined to convergence")->capture_default_str();
  fit->add_option("--seed", seed, "Random seed")->capture_default_str();
  fit->add_option("--subsampling", subsampling, "auto or off")
      ->check(CLI::IsMember({"auto", "off"}))
      ->capture_default_str();
  bool converge_trials = false;
  fit->add_flag("--converge-trials", converge_trials,
                "Run trial-phase MLEs to convergence (affine equivariant, slower)");
  fit->add_option("-o,--output", fit_out, "Fit JSON path (stdout if omitted)");

  // detect
  auto* det = app.add_subcommand("detect", "Flag outliers against a fit");
  InputOptions det_in;
  det_in.add(*det);
  std::string det_fit;
  double quantile = 0.975;
  std::string det_params = "reweighted";
  std::string det_out;
  det->add_option("--fit", det_fit, "Fit JSON")->required();
  det->add_option("--quantile", quantile, "Chi-square quantile for the cutoff")->capture_default_str();
  det->add_option("--params", det_params, "raw or reweighted")
      ->check(CLI::IsMember({"raw", "reweighted"}))
      ->capture_default_str();
  det->add_option("-o,--output", det_out, "CSV path (stdout if omitted)");

  // explain
  auto* exp = app.add_subcommand("explain", "Shapley decomposition of one observation's distance");
  InputOptions exp_in;
  exp_in.add(*exp);
  std::string exp_fit;
  std::string level = "cell";
  std::size_t index = 0;
  std::string exp_params = "reweighted";
  std::string exp_out;
  exp->add_option("--fit", exp_fit, "Fit JSON")->required();
  exp->add_option("--level", level, "cell, row or col")
      ->check(CLI::IsMember({"cell", "row", "col"}))
      ->capture_default_str();
  exp->add_option("--index", index, "Observation index (0-based)")->required();
  exp->add_option("--params", exp_params, "raw or reweighted")
      ->check(CLI::IsMember({"raw", "reweighted"}))
      ->capture_default_str();
  exp->add_option("-o,--output", exp_out, "CSV path (stdout if omitted)");

  // simulate
  auto* simc = app.add_subcommand("simulate", "Run a simulation scenario");
  std::string scenario_path;
  std::string sim_out;
  bool timing = false;
  simc->add_option("scenario", scenario_path, "Scenario file")->required();
  simc->add_option("-o,--output", sim_out, "CSV path (stdout if omitted)");
  simc->add_flag("--timing", timing, "Add a runtime column (output is then not reproducible)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*fit) {
      const auto x = fit_in.load();
      mmcd::MMCDConfig cfg;
      cfg.h = h;
      cfg.n_initial_subsets = m;
      cfg.n_keep = keep;
      cfg.rng_seed = seed;
      cfg.converge_trials = converge_trials;
      cfg.subsampling = subsampling == "off" ? mmcd::Subsampling::off : mmcd::Subsampling::automatic;
      const auto result = mmcd::fast_mmcd(x, cfg);
      emit(fit_out, mmcd::io::format_fit(mmcd::io::FitRecord::from_fit(result, x.n(), x.p(), x.q(), cfg)));
    } else if (*det) {
      const auto x = det_in.load();
      const auto f = mmcd::io::read_fit(det_fit);
      check_shape(x, f);
      emit(det_out, mmcd::io::format_detection(mmcd::detect(x, pick(f, det_params), quantile)));
    } else if (*exp) {
      const auto x = exp_in.load();
      const auto f = mmcd::io::read_fit(exp_fit);
      check_shape(x, f);
      if (index >= x.n())
        throw mmcd::PreconditionError("index " + std::to_string(index) + " is out of range for n = " +
                                      std::to_string(x.n()));
      const auto lvl = level == "row"   ? mmcd::io::ShapleyLevel::row
                       : level == "col" ? mmcd::io::ShapleyLevel::col
                                        : mmcd::io::ShapleyLevel::cell;
      emit(exp_out, mmcd::io::format_shapley(mmcd::shapley(x.at(index), pick(f, exp_params)), lvl));
    } else if (*simc) {
      const auto plan = mmcd::io::parse_scenario(mmcd::io::read_file(scenario_path), scenario_path);
      const bool eff = plan.experiment == mmcd::io::Experiment::efficiency;
      const auto result = eff ? mmcd::sim::efficiency_experiment(plan.scenario, plan.n_grid)
                              : mmcd::sim::contamination_experiment(plan.scenario);
      emit(sim_out, mmcd::io::format_sim_result(result, eff, timing));
    }
  } catch (const mmcd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case mmcd::ErrorKind::input: return kExitInput;
      case mmcd::ErrorKind::precondition: return kExitPrecondition;
      case mmcd::ErrorKind::numerical: return kExitNumerical;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
