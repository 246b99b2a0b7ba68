#include "pcgpwm/benchmarks.hpp"

#include "pcgpwm/parallel.hpp"

#include <json.hpp>

#include <mutex>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace pcgpwm {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  throw InputError("config " + path + ": " + what);
}

const json& expect(const json& j, const std::string& path, json::value_t type, const char* type_name) {
  const bool ok = type == json::value_t::number_float ? j.is_number() : j.type() == type ||
                  (type == json::value_t::number_unsigned && j.is_number_integer() && j.get<long long>() >= 0);
  if (!ok) config_error(path, std::string("expected ") + type_name);
  return j;
}

double get_number(const json& j, const std::string& path) {
  return expect(j, path, json::value_t::number_float, "a number").get<double>();
}

long long get_count(const json& j, const std::string& path, long long min) {
  expect(j, path, json::value_t::number_unsigned, "a nonnegative integer");
  const long long v = j.get<long long>();
  if (v < min) config_error(path, "must be at least " + std::to_string(min));
  return v;
}

std::uint64_t cell_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t p : parts) h = derive_seed(h, p);
  return h;
}

std::uint64_t rate_key(double rate) { return static_cast<std::uint64_t>(std::llround(rate * 1e6)); }

std::uint64_t function_index(TestFunction tf) { return static_cast<std::uint64_t>(tf); }

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) config_error("$", "expected an object");

  ExperimentConfig cfg;
  bool full_grid = false;
  if (doc.contains("full_grid")) full_grid = expect(doc["full_grid"], "$.full_grid", json::value_t::boolean, "a boolean").get<bool>();
  if (full_grid) {
    cfg.n_values = {50, 100, 250, 1000, 2500};
    cfg.replications = 20;
  }
  const std::set<std::string> known{"functions", "n",       "scenarios",      "methods",       "replications",
                                    "m",         "holdout", "knn_k",          "seed",          "budget_seconds",
                                    "record_timing", "surrogate", "full_grid"};
  for (const auto& [key, value] : doc.items())
    if (!known.count(key)) config_error("$." + key, "unknown field");

  if (doc.contains("functions")) {
    const json& f = expect(doc["functions"], "$.functions", json::value_t::array, "an array");
    cfg.functions.clear();
    for (std::size_t a = 0; a < f.size(); ++a) {
      const std::string path = "$.functions[" + std::to_string(a) + "]";
      const std::string name = expect(f[a], path, json::value_t::string, "a string").get<std::string>();
      try {
        cfg.functions.push_back(parse_test_function(name));
      } catch (const InputError& e) {
        config_error(path, e.what());
      }
    }
  }
  if (doc.contains("n")) {
    const json& n = expect(doc["n"], "$.n", json::value_t::array, "an array");
    cfg.n_values.clear();
    for (std::size_t a = 0; a < n.size(); ++a) cfg.n_values.push_back(get_count(n[a], "$.n[" + std::to_string(a) + "]", 2));
  }
  if (doc.contains("scenarios")) {
    const json& s = doc["scenarios"];
    if (s.is_string()) {
      if (s.get<std::string>() != "full") config_error("$.scenarios", "the only string value allowed is \"full\"");
    } else {
      expect(s, "$.scenarios", json::value_t::array, "an array or \"full\"");
      for (std::size_t a = 0; a < s.size(); ++a) {
        const std::string path = "$.scenarios[" + std::to_string(a) + "]";
        expect(s[a], path, json::value_t::object, "an object");
        for (const auto& [key, value] : s[a].items())
          if (key != "mechanism" && key != "rate") config_error(path + "." + key, "unknown field");
        if (!s[a].contains("mechanism")) config_error(path + ".mechanism", "missing");
        if (!s[a].contains("rate")) config_error(path + ".rate", "missing");
        Mechanism mech;
        try {
          mech = parse_mechanism(expect(s[a]["mechanism"], path + ".mechanism", json::value_t::string, "a string").get<std::string>());
        } catch (const InputError& e) {
          config_error(path + ".mechanism", e.what());
        }
        const double rate = get_number(s[a]["rate"], path + ".rate");
        if (!(rate >= 0.0 && rate < 1.0)) config_error(path + ".rate", "must lie in [0, 1)");
        cfg.scenarios.emplace_back(mech, rate);
      }
    }
  }
  if (cfg.scenarios.empty())
    for (Mechanism mech : {Mechanism::mcar, Mechanism::mnar, Mechanism::mar})
      for (double rate : {0.01, 0.05, 0.25}) cfg.scenarios.emplace_back(mech, rate);

  if (doc.contains("methods")) {
    const json& m = expect(doc["methods"], "$.methods", json::value_t::array, "an array");
    cfg.methods.clear();
    for (std::size_t a = 0; a < m.size(); ++a) {
      const std::string path = "$.methods[" + std::to_string(a) + "]";
      const std::string name = expect(m[a], path, json::value_t::string, "a string").get<std::string>();
      if (name != "pcgpwm" && name != "pcgp_knn" && name != "colgp" && name != "complete_rows")
        config_error(path, "unknown method '" + name + "'");
      cfg.methods.push_back(name);
    }
  }
  if (doc.contains("replications")) cfg.replications = static_cast<int>(get_count(doc["replications"], "$.replications", 1));
  if (doc.contains("m")) cfg.m = get_count(doc["m"], "$.m", 2);
  if (doc.contains("holdout")) cfg.holdout = get_count(doc["holdout"], "$.holdout", 1);
  if (doc.contains("knn_k")) cfg.knn_k = static_cast<int>(get_count(doc["knn_k"], "$.knn_k", 1));
  if (doc.contains("seed")) cfg.seed = static_cast<std::uint64_t>(get_count(doc["seed"], "$.seed", 0));
  if (doc.contains("budget_seconds")) {
    cfg.budget_seconds = get_number(doc["budget_seconds"], "$.budget_seconds");
    if (!(cfg.budget_seconds > 0.0)) config_error("$.budget_seconds", "must be positive");
  }
  if (doc.contains("record_timing"))
    cfg.record_timing = expect(doc["record_timing"], "$.record_timing", json::value_t::boolean, "a boolean").get<bool>();
  if (doc.contains("surrogate")) {
    const json& s = expect(doc["surrogate"], "$.surrogate", json::value_t::object, "an object");
    for (const auto& [key, value] : s.items()) {
      const std::string path = "$.surrogate." + key;
      if (key == "variance_fraction") {
        cfg.surrogate.variance_fraction = get_number(value, path);
        if (!(cfg.surrogate.variance_fraction > 0.0 && cfg.surrogate.variance_fraction <= 1.0))
          config_error(path, "must lie in (0, 1]");
      } else if (key == "alpha") {
        cfg.surrogate.alpha = get_number(value, path);
        if (!(cfg.surrogate.alpha > 0.0)) config_error(path, "must be positive");
      } else if (key == "eta") {
        cfg.surrogate.eta = get_number(value, path);
        if (!(cfg.surrogate.eta > 0.0)) config_error(path, "must be positive");
      } else if (key == "restarts") {
        cfg.surrogate.restarts = static_cast<int>(get_count(value, path, 1));
      } else if (key == "fix_beta") {
        cfg.surrogate.fix_beta = expect(value, path, json::value_t::boolean, "a boolean").get<bool>();
      } else if (key == "kernel") {
        const auto name = expect(value, path, json::value_t::string, "a string").get<std::string>();
        try {
          cfg.surrogate.kernel = parse_kernel(name);
        } catch (const InputError& e) {
          config_error(path, e.what());
        }
      } else {
        config_error(path, "unknown field");
      }
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

CellData make_cell_data(const ExperimentConfig& cfg, TestFunction tf, Index n, Mechanism mech, double rate, int rep) {
  const TestFunctionInfo& fi = info(tf);
  const std::uint64_t fidx = function_index(tf);
  const auto urep = static_cast<std::uint64_t>(rep);

  // Locations are shared by every cell of a function.
  Rng loc_rng = make_rng(cfg.seed, stream::kLocations, fidx);
  std::uniform_real_distribution<double> u01;
  Matrix loc_unit(cfg.m, fi.p());
  for (Index j = 0; j < cfg.m; ++j)
    for (Index l = 0; l < fi.p(); ++l) loc_unit(j, l) = u01(loc_rng);
  const Matrix locations = x_from_unit(tf, loc_unit);

  const Matrix theta = latin_hypercube(n, fi.d(), derive_seed(cfg.seed, stream::kDesign, cell_key({fidx, static_cast<std::uint64_t>(n), urep})));
  Rng hold_rng = make_rng(cfg.seed, stream::kHoldout, cell_key({fidx, urep}));
  Matrix hold_theta(cfg.holdout, fi.d());
  for (Index i = 0; i < cfg.holdout; ++i)
    for (Index l = 0; l < fi.d(); ++l) hold_theta(i, l) = u01(hold_rng);

  Matrix stacked(n + cfg.holdout, cfg.m);
  stacked.topRows(n) = evaluate_grid(tf, theta, locations);
  stacked.bottomRows(cfg.holdout) = evaluate_grid(tf, hold_theta, locations);
  MissingnessSpec spec;
  spec.mechanism = mech;
  spec.rate = rate;
  spec.seed = derive_seed(cfg.seed, stream::kMissingness,
                          cell_key({fidx, static_cast<std::uint64_t>(n), urep, static_cast<std::uint64_t>(mech), rate_key(rate)}));
  const Matrix masked = apply_missingness(stacked, spec, tf, locations);
  return CellData{SimulationDataset(theta, locations, masked.topRows(n)), hold_theta, masked.bottomRows(cfg.holdout)};
}

namespace {

struct Cell {
  TestFunction tf;
  Index n;
  Mechanism mech;
  double rate;
  int rep;
};

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '"') c = ' ';
  return s;
}

std::vector<ResultRow> run_cell(const ExperimentConfig& cfg, const Cell& cell) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto seconds_since = [](clock::time_point t) { return std::chrono::duration<double>(clock::now() - t).count(); };

  std::vector<ResultRow> rows;
  auto base_row = [&](const std::string& method) {
    ResultRow r;
    r.function = std::string(info(cell.tf).name);
    r.method = method;
    r.n = cell.n;
    r.mechanism = std::string(to_string(cell.mech));
    r.rate = cell.rate;
    r.rep = cell.rep;
    r.metrics = {kMissing, kMissing, kMissing, 0};
    return r;
  };

  // Data generation failures propagate; run_experiment records them per method.
  const CellData data = make_cell_data(cfg, cell.tf, cell.n, cell.mech, cell.rate, cell.rep);

  SurrogateConfig sc = cfg.surrogate;
  sc.seed = derive_seed(cfg.seed, stream::kHyperStart,
                        cell_key({function_index(cell.tf), static_cast<std::uint64_t>(cell.n), static_cast<std::uint64_t>(cell.rep),
                                  static_cast<std::uint64_t>(cell.mech), rate_key(cell.rate)}));
  for (const auto& method : cfg.methods) {
    ResultRow r = base_row(method);
    if (seconds_since(start) > cfg.budget_seconds) {
      r.status = "budget_exceeded";
      rows.push_back(r);
      continue;
    }
    const auto t0 = clock::now();
    try {
      std::pair<Matrix, Matrix> pred;
      if (method == "pcgpwm") {
        pred = fit_surrogate(data.train, sc).predict_diag(data.holdout_theta);
      } else if (method == "pcgp_knn") {
        pred = baseline_knn_impute(data.train, cfg.knn_k, sc).predict_diag(data.holdout_theta);
      } else if (method == "complete_rows") {
        pred = baseline_complete_rows(data.train, sc).predict_diag(data.holdout_theta);
      } else {
        pred = baseline_colgp(data.train, sc.restarts, sc.seed).predict_diag(data.holdout_theta);
      }
      const double elapsed = seconds_since(t0);
      if (seconds_since(start) > cfg.budget_seconds) {
        r.status = "budget_exceeded";
      } else {
        r.metrics = compute_metrics(pred.first, pred.second, data.holdout_truth);
      }
      r.fit_seconds = cfg.record_timing ? elapsed : 0.0;
    } catch (const std::exception& e) {
      r.status = "error: " + sanitize(e.what());
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const std::function<void(const ResultRow&)>& progress) {
  std::vector<Cell> cells;
  for (TestFunction tf : cfg.functions)
    for (Index n : cfg.n_values)
      for (const auto& [mech, rate] : cfg.scenarios)
        for (int rep = 0; rep < cfg.replications; ++rep) cells.push_back({tf, n, mech, rate, rep});

  std::vector<std::vector<ResultRow>> per_cell(cells.size());
  std::mutex progress_mutex;
  parallel_for(static_cast<Index>(cells.size()), [&](Index c) {
    std::vector<ResultRow> rows;
    try {
      rows = run_cell(cfg, cells[static_cast<std::size_t>(c)]);
    } catch (const std::exception& e) {
      const Cell& cell = cells[static_cast<std::size_t>(c)];
      for (const auto& m : cfg.methods) {
        ResultRow r;
        r.function = std::string(info(cell.tf).name);
        r.method = m;
        r.n = cell.n;
        r.mechanism = std::string(to_string(cell.mech));
        r.rate = cell.rate;
        r.rep = cell.rep;
        r.metrics = {kMissing, kMissing, kMissing, 0};
        r.status = "error: " + sanitize(e.what());
        rows.push_back(r);
      }
    }
    if (progress) {
      const std::lock_guard lock(progress_mutex);
      for (const auto& r : rows) progress(r);
    }
    per_cell[static_cast<std::size_t>(c)] = std::move(rows);
  });

  std::vector<ResultRow> out;
  for (auto& rows : per_cell)
    for (auto& r : rows) out.push_back(std::move(r));
  return out;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "function,method,n,mechanism,rate,rep,rmse,coverage90,width90,fit_seconds,status\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%lld,%s,%.6g,%d,%.10g,%.10g,%.10g,%.4f,", r.function.c_str(), r.method.c_str(),
                  static_cast<long long>(r.n), r.mechanism.c_str(), r.rate, r.rep, r.metrics.rmse, r.metrics.coverage,
                  r.metrics.width, r.fit_seconds);
    out << buf << r.status << '\n';
  }
}

}  // namespace pcgpwm
