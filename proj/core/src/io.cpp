#include "ddlqr/io.hpp"

#include <fstream>
#include <iomanip>

#include <json.hpp>

namespace ddlqr {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << std::setprecision(17);
  return out;
}

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw ValidationError(std::string("expected a matrix (array of rows) for ") + what);
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(std::string("ragged matrix rows for ") + what);
    for (Eigen::Index jdx = 0; jdx < cols; ++jdx)
      M(i, jdx) = row.at(static_cast<std::size_t>(jdx)).get<double>();
  }
  return M;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array())
    throw ValidationError(std::string("expected an array for ") + what);
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

json input_to_json(const SinusoidInput& input) {
  json channels = json::array();
  for (const auto& ch : input.channels) {
    json terms = json::array();
    for (const auto& term : ch.terms)
      terms.push_back({{"amplitude", term.amplitude},
                       {"omega", term.angular_frequency},
                       {"phase", term.phase}});
    channels.push_back({{"offset", ch.offset}, {"terms", std::move(terms)}});
  }
  return {{"channels", std::move(channels)}};
}

SinusoidInput input_from_json(const json& j) {
  SinusoidInput input;
  if (!j.contains("channels") || !j.at("channels").is_array())
    throw ValidationError("input spec needs a channels array");
  for (const json& jc : j.at("channels")) {
    SinusoidChannel ch;
    ch.offset = jc.value("offset", 0.0);
    if (jc.contains("terms"))
      for (const json& jt : jc.at("terms"))
        ch.terms.push_back({jt.at("amplitude").get<double>(),
                            jt.at("omega").get<double>(),
                            jt.value("phase", 0.0)});
    if (ch.terms.empty() && ch.offset == 0.0)
      throw ValidationError("input channel needs at least one term or offset");
    input.channels.push_back(std::move(ch));
  }
  return input;
}

void write_json(const std::string& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << "\n";
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open for reading: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed JSON in " + path + ": " + e.what());
  }
  return doc;
}

}  // namespace

void save_trajectory_csv(const std::string& path, const Trajectory& traj) {
  auto out = open_out(path);
  out << "t";
  for (Eigen::Index i = 0; i < traj.states.rows(); ++i) out << ",x" << i + 1;
  for (Eigen::Index i = 0; i < traj.inputs.rows(); ++i) out << ",u" << i + 1;
  for (Eigen::Index i = 0; i < traj.outputs.rows(); ++i) out << ",y" << i + 1;
  out << "\n";
  for (Eigen::Index k = 0; k < traj.samples(); ++k) {
    out << traj.time_at(k);
    for (Eigen::Index i = 0; i < traj.states.rows(); ++i) out << "," << traj.states(i, k);
    for (Eigen::Index i = 0; i < traj.inputs.rows(); ++i) out << "," << traj.inputs(i, k);
    for (Eigen::Index i = 0; i < traj.outputs.rows(); ++i) out << "," << traj.outputs(i, k);
    out << "\n";
  }
}

void save_generated_csv(const std::string& path, const GeneratedTrajectory& gen) {
  auto out = open_out(path);
  out << "t";
  for (Eigen::Index i = 0; i < gen.u_bar.rows(); ++i) out << ",u" << i + 1;
  for (Eigen::Index i = 0; i < gen.y_bar.rows(); ++i) out << ",y" << i + 1;
  out << "\n";
  for (Eigen::Index k = 0; k < gen.samples(); ++k) {
    out << gen.time_at(k);
    for (Eigen::Index i = 0; i < gen.u_bar.rows(); ++i) out << "," << gen.u_bar(i, k);
    for (Eigen::Index i = 0; i < gen.y_bar.rows(); ++i) out << "," << gen.y_bar(i, k);
    out << "\n";
  }
}

void save_trace_csv(const std::string& path, const SolveReport& report) {
  auto out = open_out(path);
  out << "iter,gain_delta,sigma_delta,abscissa\n";
  for (std::size_t i = 0; i < report.per_iteration.size(); ++i) {
    const auto& rec = report.per_iteration[i];
    out << i << "," << rec.gain_delta << "," << rec.sigma_delta << ",";
    if (rec.closed_loop_abscissa.has_value()) out << *rec.closed_loop_abscissa;
    out << "\n";
  }
}

void save_matrix_csv(const std::string& path, const Matrix& M) {
  auto out = open_out(path);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      out << (j ? "," : "") << M(i, j);
    out << "\n";
  }
}

void save_plant_spec_json(const std::string& path, const LtiPlant& plant,
                          const CostSpec& cost, const SinusoidInput& input) {
  json doc = {
      {"schema", 1},
      {"kind", "plant_spec"},
      {"plant", {{"A", matrix_to_json(plant.A)},
                 {"B", matrix_to_json(plant.B)},
                 {"C", matrix_to_json(plant.C)}}},
      {"cost", {{"Q", matrix_to_json(cost.Q)}, {"R", matrix_to_json(cost.R)}}},
      {"input", input_to_json(input)},
  };
  write_json(path, doc);
}

PlantSpecFile load_plant_spec_json(const std::string& path) {
  json doc = read_json(path);
  if (doc.value("kind", "") != "plant_spec" || doc.value("schema", 0) != 1)
    throw ValidationError(path + " is not a schema-1 plant spec file");
  PlantSpecFile file;
  file.A = matrix_from_json(doc.at("plant").at("A"), "A");
  file.B = matrix_from_json(doc.at("plant").at("B"), "B");
  file.C = matrix_from_json(doc.at("plant").at("C"), "C");
  file.Q = matrix_from_json(doc.at("cost").at("Q"), "Q");
  file.R = matrix_from_json(doc.at("cost").at("R"), "R");
  file.input = input_from_json(doc.at("input"));
  return file;
}

void save_dataset_json(const std::string& path, const RawDataset& data,
                       const FilterBank& bank, const SinusoidInput& input) {
  json eigs = json::array();
  for (const auto& lambda : bank.observer_eigenvalues)
    eigs.push_back({{"re", lambda.real()}, {"im", lambda.imag()}});
  json doc = {
      {"schema", 1},
      {"kind", "dataset"},
      {"n", data.n},
      {"m", data.m},
      {"p", data.p},
      {"t0", data.t0},
      {"sample_dt", data.sample_dt},
      {"T", data.T},
      {"U0", matrix_to_json(data.U0)},
      {"Y0", matrix_to_json(data.Y0)},
      {"E0", matrix_to_json(data.E0)},
      {"E1", matrix_to_json(data.E1)},
      {"observer_eigenvalues", std::move(eigs)},
      {"eta0_eps", vector_to_json(bank.eta0_eps)},
      {"input", input_to_json(input)},
  };
  write_json(path, doc);
}

DatasetFile load_dataset_json(const std::string& path) {
  json doc = read_json(path);
  if (doc.value("kind", "") != "dataset" || doc.value("schema", 0) != 1)
    throw ValidationError(path + " is not a schema-1 dataset file");

  DatasetFile file;
  file.data.n = doc.at("n").get<int>();
  file.data.m = doc.at("m").get<int>();
  file.data.p = doc.at("p").get<int>();
  file.data.t0 = doc.at("t0").get<double>();
  file.data.sample_dt = doc.at("sample_dt").get<double>();
  file.data.T = doc.at("T").get<Eigen::Index>();
  file.data.U0 = matrix_from_json(doc.at("U0"), "U0");
  file.data.Y0 = matrix_from_json(doc.at("Y0"), "Y0");
  file.data.E0 = matrix_from_json(doc.at("E0"), "E0");
  file.data.E1 = matrix_from_json(doc.at("E1"), "E1");
  for (const json& je : doc.at("observer_eigenvalues"))
    file.observer_eigenvalues.emplace_back(je.at("re").get<double>(),
                                           je.at("im").get<double>());
  file.eta0_eps = vector_from_json(doc.at("eta0_eps"), "eta0_eps");
  file.input = input_from_json(doc.at("input"));
  return file;
}

FilterBank bank_from_dataset(const DatasetFile& file) {
  return build_filter_bank(file.observer_eigenvalues, file.data.m, file.data.p,
                           file.eta0_eps);
}

void save_projected_json(const std::string& path, const ProjectedData& proj) {
  json doc = {
      {"schema", 1},
      {"kind", "projected"},
      {"rank", proj.rank_r},
      {"order_estimate", proj.order_estimate},
      {"min_singular_Phi0", proj.min_singular_Phi0},
      {"tolerance_used", proj.tolerance_used},
      {"e0_singular_values", vector_to_json(proj.e0_singular_values)},
      {"F1", matrix_to_json(proj.F1)},
      {"Phi0", matrix_to_json(proj.Phi0)},
      {"Phi1", matrix_to_json(proj.Phi1)},
      {"B_F", matrix_to_json(proj.B_F)},
  };
  write_json(path, doc);
}

void save_solve_report_json(const std::string& path, const SolveReport& report) {
  json iters = json::array();
  for (const auto& rec : report.per_iteration) {
    json entry = {{"gain_delta", rec.gain_delta}, {"sigma_delta", rec.sigma_delta}};
    if (rec.closed_loop_abscissa.has_value())
      entry["abscissa"] = *rec.closed_loop_abscissa;
    iters.push_back(std::move(entry));
  }
  json doc = {
      {"schema", 1},
      {"kind", "solve_report"},
      {"method", report.method},
      {"iterations", report.iterations_run},
      {"termination", to_string(report.termination)},
      {"resets", report.resets},
      {"final_gain", matrix_to_json(report.final_gain)},
      {"final_sigma", matrix_to_json(report.final_sigma)},
      {"per_iteration", std::move(iters)},
  };
  write_json(path, doc);
}

}  // namespace ddlqr
