#pragma once

#include <complex>
#include <string>
#include <vector>

#include "ddlqr/filter_pipeline.hpp"
#include "ddlqr/lti.hpp"
#include "ddlqr/solvers.hpp"
#include "ddlqr/trajectory_generation.hpp"

namespace ddlqr {

// CSV exports. Trajectories use the header t,x1..xn,u1..um,y1..yp; synthesized
// trajectories have no accessible state and use t,u1..um,y1..yp.
void save_trajectory_csv(const std::string& path, const Trajectory& traj);
void save_generated_csv(const std::string& path, const GeneratedTrajectory& gen);
void save_trace_csv(const std::string& path, const SolveReport& report);

// Bare matrix dump (one row per line), for inspecting E0 / Phi0 and friends.
void save_matrix_csv(const std::string& path, const Matrix& M);

// Self-contained dataset container: sampled matrices plus everything needed
// to rebuild the filter bank downstream. The fine recording is not persisted.
struct DatasetFile {
  RawDataset data;
  std::vector<std::complex<double>> observer_eigenvalues;
  Vector eta0_eps;
  SinusoidInput input;
};

void save_dataset_json(const std::string& path, const RawDataset& data,
                       const FilterBank& bank, const SinusoidInput& input);
DatasetFile load_dataset_json(const std::string& path);
FilterBank bank_from_dataset(const DatasetFile& file);

void save_projected_json(const std::string& path, const ProjectedData& proj);
void save_solve_report_json(const std::string& path, const SolveReport& report);

// Plant/cost/input specification document (the model-based side; datasets
// deliberately never contain the plant).
struct PlantSpecFile {
  Matrix A, B, C, Q, R;
  SinusoidInput input;
};

void save_plant_spec_json(const std::string& path, const LtiPlant& plant,
                          const CostSpec& cost, const SinusoidInput& input);
PlantSpecFile load_plant_spec_json(const std::string& path);

}  // namespace ddlqr
