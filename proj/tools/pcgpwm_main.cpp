#include "pcgpwm/benchmarks.hpp"
#include "pcgpwm/calibration.hpp"
#include "pcgpwm/csv.hpp"
#include "pcgpwm/data_model.hpp"
#include "pcgpwm/parallel.hpp"
#include "pcgpwm/surrogate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace pcgpwm;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitInternal = 1;

struct Globals {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out = ".";
  bool verbose = false;
};

struct SurrogateFlags {
  double variance_fraction = kDefaultVarianceFraction;
  double alpha = 0.3;
  double eta = 10.0;
  int restarts = 4;
  std::string kernel = "matern52";
  bool fix_beta = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--variance-fraction", variance_fraction, "Squared singular mass kept")
        ->check(CLI::Range(1e-12, 1.0))
        ->capture_default_str();
    cmd->add_option("--alpha", alpha, "Inflation exponent")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--eta", eta, "Inflation cap")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--restarts", restarts, "Optimizer restarts per component")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--kernel", kernel, "Correlation kernel")
        ->check(CLI::IsMember({"matern52", "sq_exp"}))
        ->capture_default_str();
    cmd->add_flag("--fix-beta", fix_beta, "Keep beta at 1");
  }

  SurrogateConfig config(std::uint64_t seed) const {
    SurrogateConfig c;
    c.variance_fraction = variance_fraction;
    c.alpha = alpha;
    c.eta = eta;
    c.restarts = restarts;
    c.kernel = parse_kernel(kernel);
    c.fix_beta = fix_beta;
    c.seed = seed;
    return c;
  }

  json to_json() const {
    return {{"variance_fraction", variance_fraction}, {"alpha", alpha}, {"eta", eta},
            {"restarts", restarts}, {"kernel", kernel}, {"fix_beta", fix_beta}};
  }
};

json vector_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

class Run {
public:
  Run(const Globals& g, std::string command) : globals_(g), command_(std::move(command)) {
    fs::create_directories(g.out);
    manifest_["command"] = command_;
    manifest_["versions"] = {{"pcgpwm", PCGPWM_VERSION},
                             {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                           std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                           std::to_string(EIGEN_MINOR_VERSION)},
                             {"compiler", __VERSION__}};
    manifest_["seed"] = g.seed;
    manifest_["threads"] = num_threads();
    manifest_["out"] = g.out;
  }

  fs::path path(const std::string& name) const { return fs::path(globals_.out) / name; }
  json& manifest() { return manifest_; }

  void log(const std::string& msg) const {
    if (globals_.verbose) std::cerr << "[" << command_ << "] " << msg << '\n';
  }

  void output(const std::string& name) { manifest_["outputs"].push_back(name); }

  void finish() { write_json(path("manifest.json"), manifest_); }

private:
  Globals globals_;
  std::string command_;
  json manifest_;
};

void require_file(const std::string& p) {
  if (!fs::is_regular_file(p)) throw InputError("file not found: " + p);
}

std::vector<std::string> prediction_header(Index m) {
  std::vector<std::string> header;
  for (Index j = 0; j < m; ++j) header.push_back("mean_" + std::to_string(j));
  for (Index j = 0; j < m; ++j) header.push_back("std_" + std::to_string(j));
  return header;
}

struct DataFlags {
  std::string theta, locations, responses;
  void add(CLI::App* cmd) {
    cmd->add_option("--theta", theta, "n x d parameters on [0,1]")->required();
    cmd->add_option("--locations", locations, "m x p locations")->required();
    cmd->add_option("--responses", responses, "n x m responses, empty or nan for missing")->required();
  }
  SimulationDataset load() const {
    for (const auto& f : {theta, locations, responses}) require_file(f);
    return load_dataset(theta, locations, responses);
  }
  json to_json() const { return {{"theta", theta}, {"locations", locations}, {"responses", responses}}; }
};

void cmd_fit(const Globals& g, const DataFlags& data, const SurrogateFlags& flags) {
  Run run(g, "fit");
  run.manifest()["inputs"] = data.to_json();
  run.manifest()["surrogate"] = flags.to_json();
  const SimulationDataset ds = data.load();
  const Index total = ds.n_runs() * ds.n_locations();
  run.log("loaded " + std::to_string(ds.n_runs()) + " x " + std::to_string(ds.n_locations()) + ", " +
          std::to_string(total - ds.n_available()) + " missing");
  const Surrogate sur = fit_surrogate(ds, flags.config(g.seed));
  save_surrogate(sur, run.path("model.json"));
  run.output("model.json");

  json comps = json::array();
  for (const auto& c : sur.components)
    comps.push_back({{"lambda", c.lambda},
                     {"beta", c.beta},
                     {"lengthscales", vector_json(c.hyper.lengthscales())},
                     {"nugget", c.hyper.nugget()},
                     {"neg_log_lik", c.nll}});
  json report = {{"n", ds.n_runs()},
                 {"m", ds.n_locations()},
                 {"missing_fraction", static_cast<double>(total - ds.n_available()) / static_cast<double>(total)},
                 {"complete_rows", ds.complete_rows().size()},
                 {"dropped_columns", sur.dropped_columns()},
                 {"kappa", sur.kappa()},
                 {"lambda", vector_json(sur.subspace.lambda)},
                 {"epsilon", sur.subspace.epsilon},
                 {"em_iterations", sur.em_iterations},
                 {"em_converged", sur.em_converged},
                 {"components", comps}};
  write_json(run.path("fit_report.json"), report);
  run.output("fit_report.json");
  run.log("kappa " + std::to_string(sur.kappa()));
  run.finish();
}

void cmd_predict(const Globals& g, const std::string& model, const std::string& theta_star) {
  Run run(g, "predict");
  run.manifest()["inputs"] = {{"model", model}, {"theta_star", theta_star}};
  require_file(model);
  require_file(theta_star);
  const Surrogate sur = load_surrogate(model);
  CsvOptions opts;
  opts.allow_missing = false;
  const Matrix star = read_csv_matrix(theta_star, opts);
  const Index m = sur.m_total;
  Matrix out(star.rows(), 2 * m);
  if (star.rows() > 0) {
    if (star.cols() != sur.n_params())
      throw InputError(theta_star + " has " + std::to_string(star.cols()) + " columns, model expects " +
                       std::to_string(sur.n_params()));
    const auto [mean, var] = sur.predict_diag(star);
    out << mean, var.cwiseSqrt();
  }
  write_csv_matrix(run.path("predictions.csv"), out, prediction_header(m));
  run.output("predictions.csv");
  run.log(std::to_string(star.rows()) + " rows");
  run.finish();
}

struct CalibrateFlags {
  std::string model, observations;
  int samples = 1000;
  int temps = 4;
  int burnin = -1;
  double level = 0.9;
};

void cmd_calibrate(const Globals& g, const CalibrateFlags& f) {
  Run run(g, "calibrate");
  run.manifest()["inputs"] = {{"model", f.model}, {"observations", f.observations}};
  require_file(f.model);
  require_file(f.observations);
  auto sur = std::make_shared<const Surrogate>(load_surrogate(f.model));
  const Matrix obs = read_csv_matrix(f.observations);
  if (obs.cols() != 2) throw InputError(f.observations + ": expected two columns (y, w_diag)");
  if (obs.rows() != sur->m_total)
    throw InputError(f.observations + " has " + std::to_string(obs.rows()) + " rows, model has m = " +
                     std::to_string(sur->m_total));
  const CalibrationProblem problem(obs.col(0), obs.col(1), sur);

  PtlmcOptions opts;
  opts.n_samples = f.samples;
  opts.n_temps = f.temps;
  opts.burn_in = f.burnin;
  opts.seed = g.seed;
  run.manifest()["sampler"] = {{"samples", opts.n_samples},
                               {"temps", opts.n_temps},
                               {"burnin", opts.burn_in < 0 ? opts.n_samples : opts.burn_in},
                               {"t_max", opts.t_max},
                               {"target_accept", opts.target_accept},
                               {"level", f.level}};
  const PosteriorChain chain = ptlmc_sample(problem, opts);

  std::vector<std::string> header;
  for (Index l = 0; l < chain.samples.cols(); ++l) header.push_back("theta_" + std::to_string(l));
  write_csv_matrix(run.path("chain.csv"), chain.samples, header);
  run.output("chain.csv");

  json dims = json::array();
  for (const auto& s : posterior_summary(chain.samples, f.level))
    dims.push_back({{"mean", s.mean}, {"lo", s.lo}, {"hi", s.hi}, {"width", s.width}});
  json summary = {{"level", f.level},
               {"samples", chain.samples.rows()},
               {"used_columns", problem.used_columns().size()},
               {"dimensions", dims},
               {"acceptance_rates", vector_json(chain.acceptance_rates)},
               {"swap_rates", vector_json(chain.swap_rates)},
               {"temperatures", vector_json(chain.temperatures)},
               {"step_sizes", vector_json(chain.step_sizes)}};
  write_json(run.path("summary.json"), summary);
  run.output("summary.json");
  run.finish();
}

void cmd_benchmark(const Globals& g, const std::string& config, bool seed_given) {
  Run run(g, "benchmark");
  require_file(config);
  ExperimentConfig cfg = load_experiment_config(config);
  if (seed_given) cfg.seed = g.seed;
  json resolved = {{"config_file", config},
                {"functions", json::array()},
                {"n", cfg.n_values},
                {"scenarios", json::array()},
                {"methods", cfg.methods},
                {"replications", cfg.replications},
                {"m", cfg.m},
                {"holdout", cfg.holdout},
                {"knn_k", cfg.knn_k},
                {"seed", cfg.seed},
                {"budget_seconds", cfg.budget_seconds},
                {"record_timing", cfg.record_timing},
                {"surrogate",
                 {{"variance_fraction", cfg.surrogate.variance_fraction},
                  {"alpha", cfg.surrogate.alpha},
                  {"eta", cfg.surrogate.eta},
                  {"restarts", cfg.surrogate.restarts},
                  {"kernel", to_string(cfg.surrogate.kernel)},
                  {"fix_beta", cfg.surrogate.fix_beta}}}};
  for (TestFunction tf : cfg.functions) resolved["functions"].push_back(info(tf).name);
  for (const auto& [mech, rate] : cfg.scenarios)
    resolved["scenarios"].push_back({{"mechanism", to_string(mech)}, {"rate", rate}});
  run.manifest()["config"] = resolved;

  const auto rows = run_experiment(cfg, [&](const ResultRow& r) {
    run.log(r.function + " " + r.method + " n=" + std::to_string(r.n) + " " + r.mechanism + " " +
            std::to_string(r.rate) + " rep " + std::to_string(r.rep) + ": " + r.status);
  });
  write_results_csv(run.path("results.csv"), rows);
  run.output("results.csv");
  run.finish();
}

void cmd_impute(const Globals& g, const DataFlags& data, const SurrogateFlags& flags, const std::string& method,
                int k) {
  Run run(g, "impute");
  run.manifest()["inputs"] = data.to_json();
  run.manifest()["method"] = method;
  const SimulationDataset ds = data.load();
  std::vector<std::string> header;
  for (Index j = 0; j < ds.n_locations(); ++j) header.push_back("f_" + std::to_string(j));
  if (method == "knn") {
    run.manifest()["knn_k"] = k;
    write_csv_matrix(run.path("imputed.csv"), knn_impute(ds, k), header);
    run.output("imputed.csv");
  } else {
    run.manifest()["surrogate"] = flags.to_json();
    const CompletedResponses done = complete_responses(ds, flags.config(g.seed));
    write_csv_matrix(run.path("imputed.csv"), done.responses, header);
    std::vector<std::string> wh;
    for (Index c = 0; c < done.w.cols(); ++c) wh.push_back("w_" + std::to_string(c));
    write_csv_matrix(run.path("imputation_weights.csv"), done.w, wh);
    run.output("imputed.csv");
    run.output("imputation_weights.csv");
    run.manifest()["em_iterations"] = done.em_iterations;
    run.manifest()["em_converged"] = done.em_converged;
  }
  run.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Principal-component GP emulation with missing responses"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(PCGPWM_VERSION));
  Globals g;
  app.add_option("--seed", g.seed, "Root seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (default: PCGPWM_THREADS or 1)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("-v,--verbose", g.verbose, "Progress on stderr");

  DataFlags fit_data;
  SurrogateFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "Fit a surrogate and write model.json");
  fit_data.add(fit);
  fit_flags.add(fit);

  std::string model, theta_star;
  auto* predict = app.add_subcommand("predict", "Predict means and standard deviations");
  predict->add_option("--model", model, "model.json from fit")->required();
  predict->add_option("--theta-star", theta_star, "q x d parameters on [0,1]")->required();

  CalibrateFlags cal;
  auto* calibrate = app.add_subcommand("calibrate", "Sample the calibration posterior");
  calibrate->add_option("--model", cal.model, "model.json from fit")->required();
  calibrate->add_option("--observations", cal.observations, "m rows: y, w_diag")->required();
  calibrate->add_option("--samples", cal.samples, "Retained draws")->check(CLI::PositiveNumber)->capture_default_str();
  calibrate->add_option("--temps", cal.temps, "Temperatures")->check(CLI::PositiveNumber)->capture_default_str();
  calibrate->add_option("--burnin", cal.burnin, "Burn-in iterations (default: --samples)")
      ->check(CLI::NonNegativeNumber);
  calibrate->add_option("--level", cal.level, "Credible level")->check(CLI::Range(0.01, 0.999))->capture_default_str();

  std::string config;
  auto* bench = app.add_subcommand("benchmark", "Run a simulation study and write results.csv");
  bench->add_option("--config", config, "Experiment JSON")->required();

  DataFlags imp_data;
  SurrogateFlags imp_flags;
  std::string imp_method = "em";
  int imp_k = 5;
  auto* impute = app.add_subcommand("impute", "Fill missing responses");
  imp_data.add(impute);
  imp_flags.add(impute);
  impute->add_option("--method", imp_method, "em or knn")->check(CLI::IsMember({"em", "knn"}))->capture_default_str();
  impute->add_option("--k", imp_k, "Neighbours for knn")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (g.threads > 0) {
      set_num_threads(g.threads);
    } else if (const char* env = std::getenv("PCGPWM_THREADS"); env != nullptr) {
      const int n = std::atoi(env);
      if (n <= 0) throw InputError("PCGPWM_THREADS must be a positive integer");
      set_num_threads(n);
    }
    if (fit->parsed()) cmd_fit(g, fit_data, fit_flags);
    if (predict->parsed()) cmd_predict(g, model, theta_star);
    if (calibrate->parsed()) cmd_calibrate(g, cal);
    if (bench->parsed()) cmd_benchmark(g, config, app.count("--seed") > 0);
    if (impute->parsed()) cmd_impute(g, imp_data, imp_flags, imp_method, imp_k);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return 0;
}
