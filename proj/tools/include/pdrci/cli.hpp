#pragma once

// pdrci command line: synthesize, verify, export-plot, plus the result file
// format shared with the tests.

#include "pdrci/synthesis.hpp"
#include "pdrci/verify.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pdrci::cli {

/// Everything a result.json carries back.
struct StoredResult {
  ProblemSpec problem;
  synthesis::SynthesisOptions options;
  geometry::ParamPolytope set;
  std::vector<MatrixXd> K;
  geometry::ParamPolytope stage1_set;
  bool performance_certified = false;
  double gamma = 0.0;
  std::vector<synthesis::IterationRecord> trace;
  std::vector<std::string> warnings;
};

class ResultFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// result.json text. `timestamp` adds {"utc", "wall_s"}; everything else is a
/// pure function of problem and result.
std::string result_json(const ProblemSpec& problem, const synthesis::SynthesisResult& result,
                        std::optional<double> wall_s = std::nullopt);
StoredResult parse_result(const std::string& text);
StoredResult load_result(const std::string& path);

/// iter,stage,detW,sigma_sum,mc_volume,exact_area,solver_status,wall_s
void write_trace_csv(std::ostream& os, const std::vector<synthesis::IterationRecord>& trace);

/// Slice polygons on the simplex grid (slice_id 0), the vertex-slice
/// intersection (1, xi_index -1) and the stage-one set (2, xi_index -1).
std::vector<geometry::PolygonRecord> plot_polygons(const StoredResult& r, int grid_resolution);

/// run,t,x1..,u1..,xi1.. from every vertex of the vertex-slice intersection.
void write_trajectories_csv(std::ostream& os, const StoredResult& r, int steps, std::uint64_t seed);

std::string report_json(const verify::VerificationReport& report);

/// Entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pdrci::cli
