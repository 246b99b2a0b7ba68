#include "pcgpwm/surrogate.hpp"

#include <json.hpp>

#include <fstream>

namespace pcgpwm {

using nlohmann::json;

namespace {

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
  return rows;
}

Vector vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

Matrix matrix_from(const json& j, Index cols) {
  Matrix m(static_cast<Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = vector_from(j[i]);
    if (row.size() != cols) throw InputError("model file: ragged matrix");
    m.row(static_cast<Index>(i)) = row.transpose();
  }
  return m;
}

}  // namespace

void save_surrogate(const Surrogate& sur, const std::filesystem::path& path) {
  json doc;
  doc["format"] = "pcgpwm-surrogate";
  doc["version"] = 1;
  doc["m_total"] = sur.m_total;
  doc["kept_columns"] = sur.kept_columns;
  doc["alpha"] = sur.alpha_infl;
  doc["eta"] = sur.eta_cap;
  doc["em_iterations"] = sur.em_iterations;
  doc["em_converged"] = sur.em_converged;
  doc["subspace"] = {{"phi", to_json(sur.subspace.phi)},
                     {"lambda", to_json(sur.subspace.lambda)},
                     {"epsilon", sur.subspace.epsilon}};
  doc["stats"] = {{"center", to_json(sur.stats.col_center)}, {"scale", to_json(sur.stats.col_scale)}};
  if (!sur.components.empty()) doc["theta"] = to_json(sur.components.front().theta);
  json comps = json::array();
  for (const auto& c : sur.components) {
    comps.push_back({{"log_lengthscales", to_json(c.hyper.log_lengthscales)},
                     {"log_nugget", c.hyper.log_nugget},
                     {"kernel", to_string(c.hyper.kernel)},
                     {"beta", c.beta},
                     {"g", to_json(c.g)},
                     {"v", to_json(c.v)}});
  }
  doc["components"] = comps;

  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump() << '\n';
}

Surrogate load_surrogate(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("file not found: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  try {
    if (doc.value("format", "") != "pcgpwm-surrogate") throw InputError(path.string() + ": not a model file");
    Surrogate sur;
    sur.m_total = doc.at("m_total").get<Index>();
    sur.kept_columns = doc.at("kept_columns").get<IndexSet>();
    sur.alpha_infl = doc.at("alpha").get<double>();
    sur.eta_cap = doc.at("eta").get<double>();
    sur.em_iterations = doc.value("em_iterations", 0);
    sur.em_converged = doc.value("em_converged", true);
    const Index m = static_cast<Index>(sur.kept_columns.size());
    sur.subspace.lambda = vector_from(doc.at("subspace").at("lambda"));
    sur.subspace.phi = matrix_from(doc.at("subspace").at("phi"), sur.subspace.lambda.size());
    sur.subspace.epsilon = doc.at("subspace").at("epsilon").get<double>();
    sur.stats.col_center = vector_from(doc.at("stats").at("center"));
    sur.stats.col_scale = vector_from(doc.at("stats").at("scale"));
    if (sur.subspace.phi.rows() != m || sur.stats.col_center.size() != m)
      throw InputError(path.string() + ": inconsistent column counts");
    const json& comps = doc.at("components");
    if (static_cast<Index>(comps.size()) != sur.subspace.kappa())
      throw InputError(path.string() + ": component count does not match subspace");
    const Matrix theta = comps.empty() ? Matrix() : matrix_from(doc.at("theta"), doc.at("theta").at(0).size());
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const json& c = comps[k];
      KernelHyper h;
      h.log_lengthscales = vector_from(c.at("log_lengthscales"));
      h.log_nugget = c.at("log_nugget").get<double>();
      h.kernel = parse_kernel(c.at("kernel").get<std::string>());
      sur.components.push_back(make_component(theta, vector_from(c.at("g")), vector_from(c.at("v")),
                                              sur.subspace.lambda(static_cast<Index>(k)), h,
                                              c.at("beta").get<double>()));
    }
    return sur;
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace pcgpwm
