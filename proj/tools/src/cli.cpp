#include "pdrci/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

namespace pdrci::cli {
namespace {

using nlohmann::json;
using synthesis::IterationRecord;
using synthesis::SynthesisOptions;
using synthesis::SynthesisResult;

constexpr int kExitViolation = 1;
constexpr int kExitBadResult = 2;
constexpr int kExitFailure = 3;

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double get_num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw ResultFileError("expected a number");
  return j.get<double>();
}

json mat(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd get_mat(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw ResultFileError(std::string(what) + ": expected a nested array");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ResultFileError(std::string(what) + ": ragged matrix");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get_num(row[static_cast<std::size_t>(c)]);
  }
  return m;
}

json polytope_json(const geometry::ParamPolytope& pp) {
  json P = json::array();
  for (const MatrixXd& Pk : pp.P) P.push_back(mat(Pk));
  return {{"W", mat(pp.W)}, {"P", P}};
}

geometry::ParamPolytope get_polytope(const json& j, const char* what) {
  geometry::ParamPolytope pp;
  pp.W = get_mat(j.at("W"), what);
  for (const json& Pk : j.at("P")) pp.P.push_back(get_mat(Pk, what));
  if (pp.P.empty() || pp.W.rows() != pp.W.cols()) throw ResultFileError(std::string(what) + ": bad shape");
  for (const MatrixXd& Pk : pp.P) {
    if (Pk.cols() != pp.W.rows() || Pk.rows() != pp.P.front().rows()) {
      throw ResultFileError(std::string(what) + ": bad shape");
    }
  }
  return pp;
}

json options_json(const SynthesisOptions& o) {
  return {{"n_p", o.n_p},
          {"d", o.d},
          {"iters1", o.iters_stage1},
          {"iters2", o.iters_stage2},
          {"epsilon", o.epsilon},
          {"grid", o.grid_resolution},
          {"samples", o.extra_boundary_samples},
          {"gamma", o.gamma ? json(*o.gamma) : json(nullptr)},
          {"seed", o.seed},
          {"convergence_tol", o.convergence_tol},
          {"mc_samples", o.mc_samples}};
}

SynthesisOptions get_options(const json& j) {
  SynthesisOptions o;
  o.n_p = j.at("n_p").get<int>();
  o.d = j.at("d").get<int>();
  o.iters_stage1 = j.at("iters1").get<int>();
  o.iters_stage2 = j.at("iters2").get<int>();
  o.epsilon = j.at("epsilon").get<double>();
  o.grid_resolution = j.at("grid").get<int>();
  o.extra_boundary_samples = j.at("samples").get<int>();
  if (!j.at("gamma").is_null()) o.gamma = j.at("gamma").get<double>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.convergence_tol = j.at("convergence_tol").get<double>();
  o.mc_samples = j.at("mc_samples").get<std::int64_t>();
  return o;
}

json record_json(const IterationRecord& r) {
  return {{"iter", r.iter},
          {"stage", r.stage},
          {"detW", num(r.detW)},
          {"sigma_sum", num(r.sigma_sum)},
          {"mc_volume", num(r.mc_volume)},
          {"exact_area", num(r.exact_area)},
          {"solver_status", r.solver_status},
          {"epsilon", r.epsilon},
          {"solver_iterations", r.solver_iterations}};
}

IterationRecord get_record(const json& j) {
  IterationRecord r;
  r.iter = j.at("iter").get<int>();
  r.stage = j.at("stage").get<int>();
  r.detW = get_num(j.at("detW"));
  r.sigma_sum = get_num(j.at("sigma_sum"));
  r.mc_volume = get_num(j.at("mc_volume"));
  r.exact_area = get_num(j.at("exact_area"));
  r.solver_status = j.at("solver_status").get<std::string>();
  r.epsilon = j.at("epsilon").get<double>();
  r.solver_iterations = j.at("solver_iterations").get<int>();
  return r;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + p.string());
}

template <typename F>
void write_stream(const std::filesystem::path& p, F&& body) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  body(f);
  if (!f) throw std::runtime_error("write failed: " + p.string());
}

std::string g17(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

int emit_error(std::ostream& err, const std::filesystem::path& out_dir, const std::string& kind,
               const std::string& message, const std::string& status, int code) {
  json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
  if (!status.empty()) j["status"] = status;
  if (kind == "infeasible") j["suggestion"] = "increase --np or --d";
  err << j.dump() << '\n';
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!ec) {
      std::ofstream f(out_dir / "error.json");
      f << j.dump(2) << '\n';
    }
  }
  return code;
}

ProblemSpec load_input(const std::string& preset_name, const std::string& problem_path) {
  if (!preset_name.empty() && !problem_path.empty()) throw ModelError("give either --preset or --problem");
  if (!preset_name.empty()) return preset(preset_name);
  if (!problem_path.empty()) return load_problem(problem_path);
  throw ModelError("one of --preset or --problem is required");
}

struct Flags {
  std::string preset, problem, out = ".", result;
  int np = 0, d = 0, iters1 = 0, iters2 = 0, grid = 0, samples = 0, steps = 0;
  double gamma = 0.0, eps = 0.0;
  std::uint64_t seed = 0;
  std::int64_t trials = 100000;
};

verify::Certificate certificate(const StoredResult& r) { return {r.set, r.K}; }

ProblemSpec verification_problem(const StoredResult& r) {
  return synthesis::effective_problem(r.problem, r.options);
}

int cmd_synthesize(const Flags& f, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const std::filesystem::path dir(f.out);
  ProblemSpec problem;
  SynthesisOptions opts;
  try {
    problem = load_input(f.preset, f.problem);
    // defaults, then problem-file options, then flags
    opts = synthesis::resolve_options(problem, SynthesisOptions{});
    if (sub.count("--np")) opts.n_p = f.np;
    if (sub.count("--d")) opts.d = f.d;
    if (sub.count("--iters1")) opts.iters_stage1 = f.iters1;
    if (sub.count("--iters2")) opts.iters_stage2 = f.iters2;
    if (sub.count("--grid")) opts.grid_resolution = f.grid;
    if (sub.count("--samples")) opts.extra_boundary_samples = f.samples;
    if (sub.count("--eps")) opts.epsilon = f.eps;
    if (sub.count("--seed")) opts.seed = f.seed;
    if (sub.count("--gamma")) opts.gamma = f.gamma;
    synthesis::validate(opts, problem.system.n_x);
  } catch (const std::exception& e) {
    return emit_error(err, dir, "invalid-input", e.what(), "", kExitBadResult);
  }

  const auto t0 = std::chrono::steady_clock::now();
  SynthesisResult res;
  try {
    res = synthesis::synthesize(problem, opts);
  } catch (const synthesis::SynthesisError& e) {
    return emit_error(err, dir, "infeasible", e.what(), e.status(), kExitFailure);
  } catch (const std::exception& e) {
    return emit_error(err, dir, "failure", e.what(), "", kExitFailure);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  try {
    std::filesystem::create_directories(dir);
    write_file(dir / "result.json", result_json(problem, res, wall));
    write_stream(dir / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, res.trace); });
    const StoredResult stored = parse_result(result_json(problem, res));
    write_stream(dir / "polygons.csv", [&](std::ostream& os) {
      geometry::write_polygons_csv(os, plot_polygons(stored, opts.grid_resolution));
    });
  } catch (const std::exception& e) {
    return emit_error(err, dir, "io", e.what(), "", kExitFailure);
  }
  const double area = synthesis::exact_measure(res.set);
  out << "area " << g17(area) << "  iterations " << res.trace.size() << "  wall " << wall << " s\n";
  for (const auto& w : res.warnings) out << "warning: " << w << '\n';
  return 0;
}

int cmd_verify(const Flags& f, std::ostream& out, std::ostream& err) {
  const std::filesystem::path dir(f.out);
  StoredResult r;
  try {
    r = load_result(f.result);
  } catch (const std::exception& e) {
    return emit_error(err, dir, "bad-result", e.what(), "", kExitBadResult);
  }
  verify::VerificationReport rep;
  try {
    rep = verify::verify_all(certificate(r), verification_problem(r), r.gamma, r.performance_certified, f.trials,
                             f.seed);
  } catch (const std::exception& e) {
    return emit_error(err, dir, "bad-result", e.what(), "", kExitBadResult);
  }
  try {
    std::filesystem::create_directories(dir);
    write_file(dir / "report.json", report_json(rep));
  } catch (const std::exception& e) {
    return emit_error(err, dir, "io", e.what(), "", kExitFailure);
  }
  for (const auto& c : rep.checks) {
    out << (c.passed() ? "PASS " : "FAIL ") << c.name << "  trials " << c.trials << "  violations "
        << c.violations << "  worst " << g17(c.worst_margin) << '\n';
  }
  return rep.passed() ? 0 : kExitViolation;
}

int cmd_export(const Flags& f, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const std::filesystem::path dir(f.out);
  StoredResult r;
  try {
    r = load_result(f.result);
  } catch (const std::exception& e) {
    return emit_error(err, dir, "bad-result", e.what(), "", kExitBadResult);
  }
  const int grid = sub.count("--grid") ? f.grid : r.options.grid_resolution;
  const int steps = sub.count("--steps") ? f.steps : (r.problem.qlpv.enabled() ? 300 : 100);
  try {
    std::filesystem::create_directories(dir);
    write_stream(dir / "polygons.csv",
                 [&](std::ostream& os) { geometry::write_polygons_csv(os, plot_polygons(r, grid)); });
    write_stream(dir / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, r.trace); });
    write_stream(dir / "trajectories.csv",
                 [&](std::ostream& os) { write_trajectories_csv(os, r, steps, f.seed); });
  } catch (const std::exception& e) {
    return emit_error(err, dir, "io", e.what(), "", kExitFailure);
  }
  out << "wrote polygons.csv, trace.csv, trajectories.csv to " << dir.string() << '\n';
  return 0;
}

}  // namespace

std::string result_json(const ProblemSpec& problem, const SynthesisResult& res, std::optional<double> wall_s) {
  json j;
  j["format"] = "pdrci-result";
  j["version"] = 1;
  j["problem"] = json::parse(serialize_problem(problem));
  j["options"] = options_json(res.options);
  j["set"] = polytope_json(res.set);
  json K = json::array();
  for (const MatrixXd& Kk : res.K) K.push_back(mat(Kk));
  j["K"] = K;
  j["performance"] = {{"certified", res.performance_certified}, {"gamma", num(res.gamma)}};
  j["stage1_set"] = polytope_json(res.stage1_set);
  json trace = json::array();
  for (const auto& r : res.trace) trace.push_back(record_json(r));
  j["trace"] = trace;
  json calls = json::array();
  for (const auto& c : res.calls) {
    calls.push_back({{"stage", c.stage}, {"iter", c.iter}, {"status", c.status}, {"epsilon", c.epsilon}});
  }
  j["solver_calls"] = calls;
  json cx = {{"face_pairs", res.set.n_p() * res.set.N_xi()}};
  if (res.set.n_x() == 2) {
    try {
      cx["irredundant_facets"] =
          geometry::facet_count(geometry::vertex_enumerate_2d(geometry::robust_intersection(res.set)));
    } catch (const geometry::GeometryError&) {
      cx["irredundant_facets"] = nullptr;
    }
  }
  j["complexity"] = cx;
  j["area"] = num(synthesis::exact_measure(res.set));
  j["min_rank_margin"] = num(res.min_rank_margin);
  j["warnings"] = res.warnings;
  if (wall_s) j["timestamp"] = {{"utc", utc_now()}, {"wall_s", *wall_s}};
  return j.dump(2) + "\n";
}

StoredResult parse_result(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ResultFileError(std::string("result.json: ") + e.what());
  }
  try {
    if (j.value("format", "") != "pdrci-result") throw ResultFileError("result.json: not a pdrci result");
    StoredResult r;
    r.problem = parse_problem(j.at("problem").dump());
    r.options = get_options(j.at("options"));
    r.set = get_polytope(j.at("set"), "set");
    for (const json& Kk : j.at("K")) r.K.push_back(get_mat(Kk, "K"));
    r.stage1_set = get_polytope(j.at("stage1_set"), "stage1_set");
    r.performance_certified = j.at("performance").at("certified").get<bool>();
    r.gamma = get_num(j.at("performance").at("gamma"));
    for (const json& t : j.at("trace")) r.trace.push_back(get_record(t));
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    const int n_x = r.problem.system.n_x;
    if (r.set.n_x() != n_x || r.set.N_xi() != r.problem.system.N_xi ||
        static_cast<int>(r.K.size()) != r.problem.system.N_xi) {
      throw ResultFileError("result.json: set or gains do not match the problem");
    }
    for (const MatrixXd& Kk : r.K) {
      if (Kk.rows() != r.problem.system.n_u || Kk.cols() != n_x) throw ResultFileError("result.json: bad K shape");
    }
    if (!r.set.W.allFinite() || std::abs(r.set.W.determinant()) == 0.0) {
      throw ResultFileError("result.json: W is singular");
    }
    return r;
  } catch (const ResultFileError&) {
    throw;
  } catch (const std::exception& e) {
    throw ResultFileError(std::string("result.json: ") + e.what());
  }
}

StoredResult load_result(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ResultFileError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_result(ss.str());
}

void write_trace_csv(std::ostream& os, const std::vector<IterationRecord>& trace) {
  os << "iter,stage,detW,sigma_sum,mc_volume,exact_area,solver_status,wall_s\n";
  for (const auto& r : trace) {
    os << r.iter << ',' << r.stage << ',' << g17(r.detW) << ',' << g17(r.sigma_sum) << ',' << g17(r.mc_volume)
       << ',' << g17(r.exact_area) << ',' << r.solver_status << ',' << g17(r.wall_s) << '\n';
  }
}

std::vector<geometry::PolygonRecord> plot_polygons(const StoredResult& r, int grid_resolution) {
  std::vector<geometry::PolygonRecord> out;
  if (r.set.n_x() != 2) return out;
  const auto grid = synthesis::make_simplex_grid(r.set.N_xi(), grid_resolution);
  for (std::size_t m = 0; m < grid.size(); ++m) {
    out.push_back({static_cast<int>(m), 0, geometry::vertex_enumerate_2d(geometry::slice(r.set, grid[m]))});
  }
  out.push_back({-1, 1, geometry::vertex_enumerate_2d(geometry::robust_intersection(r.set))});
  out.push_back({-1, 2, geometry::vertex_enumerate_2d(geometry::robust_intersection(r.stage1_set))});
  return out;
}

void write_trajectories_csv(std::ostream& os, const StoredResult& r, int steps, std::uint64_t seed) {
  const ProblemSpec problem = verification_problem(r);
  const LpvSystem& sys = problem.system;
  os << "run,t";
  for (int i = 0; i < sys.n_x; ++i) os << ",x" << i + 1;
  for (int i = 0; i < sys.n_u; ++i) os << ",u" << i + 1;
  for (int i = 0; i < sys.N_xi; ++i) os << ",xi" << i + 1;
  os << '\n';

  std::vector<VectorXd> starts;
  if (sys.n_x == 2) {
    starts = verify::robust_set_vertices(r.set);
  } else if (sys.n_x == 1) {
    const double h = 0.5 * synthesis::exact_measure(r.set);
    starts = {VectorXd::Constant(1, h), VectorXd::Constant(1, -h)};
  }
  std::mt19937_64 rng(seed);
  for (std::size_t run = 0; run < starts.size(); ++run) {
    verify::Schedule schedule;
    if (problem.qlpv.enabled()) {
      schedule = problem.qlpv;
    } else {
      std::vector<SimplexPoint> seq;
      for (int t = 0; t < steps; ++t) seq.push_back(verify::random_simplex_point(sys.N_xi, rng));
      schedule = std::move(seq);
    }
    const auto tr = verify::simulate_closed_loop(problem, r.K, starts[run], schedule, {}, steps);
    for (int t = 0; t < tr.steps(); ++t) {
      const auto ti = static_cast<std::size_t>(t);
      os << run << ',' << t;
      for (int i = 0; i < sys.n_x; ++i) os << ',' << g17(tr.x[ti][i]);
      for (int i = 0; i < sys.n_u; ++i) os << ',' << g17(tr.u[ti][i]);
      for (int i = 0; i < sys.N_xi; ++i) os << ',' << g17(tr.xi[ti][i]);
      os << '\n';
    }
  }
}

std::string report_json(const verify::VerificationReport& rep) {
  json checks = json::array();
  for (const auto& c : rep.checks) {
    checks.push_back({{"name", c.name},
                      {"trials", c.trials},
                      {"violations", c.violations},
                      {"worst_margin", num(c.worst_margin)},
                      {"max_value", num(c.max_value)},
                      {"seed", c.seed},
                      {"passed", c.passed()}});
  }
  json j = {{"passed", rep.passed()}, {"trials", rep.trials()}, {"violations", rep.violations()},
            {"checks", checks}};
  return j.dump(2) + "\n";
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pdrci: parameter-dependent robust control invariant sets"};
  app.require_subcommand(1);
  Flags f;

  auto* syn = app.add_subcommand("synthesize", "compute a set and gains; writes result.json, trace.csv, polygons.csv");
  syn->add_option("--preset", f.preset, "built-in problem (" + [] {
    std::string s;
    for (const auto& n : preset_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }() + ")");
  syn->add_option("--problem", f.problem, "problem JSON file");
  syn->add_option("--np", f.np, "face pairs per slice (default 4)");
  syn->add_option("--d", f.d, "Polya degree (default 1)");
  syn->add_option("--iters1", f.iters1, "stage-one iterations including the initial solve (default 10)");
  syn->add_option("--iters2", f.iters2, "stage-two iterations (default 60)");
  syn->add_option("--grid", f.grid, "simplex grid resolution (default 4)");
  syn->add_option("--samples", f.samples, "extra boundary samples for the volume cost (default 0)");
  syn->add_option("--gamma", f.gamma, "quadratic performance bound");
  syn->add_option("--eps", f.eps, "strictness margin (default 1e-7)");
  syn->add_option("--seed", f.seed, "RNG seed (default 0)");
  syn->add_option("--out", f.out, "output directory (default .)");

  auto* ver = app.add_subcommand("verify", "Monte-Carlo checks of a result; writes report.json");
  ver->add_option("--result", f.result, "result.json")->required();
  ver->add_option("--trials", f.trials, "invariance trials (default 100000)");
  ver->add_option("--seed", f.seed, "RNG seed (default 0)");
  ver->add_option("--out", f.out, "output directory (default .)");

  auto* exp = app.add_subcommand("export-plot", "polygons.csv, trace.csv, trajectories.csv from a result");
  exp->add_option("--result", f.result, "result.json")->required();
  exp->add_option("--grid", f.grid, "simplex grid resolution for slices");
  exp->add_option("--steps", f.steps, "trajectory length");
  exp->add_option("--seed", f.seed, "RNG seed for the scheduling sequence (default 0)");
  exp->add_option("--out", f.out, "output directory (default .)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  if (*syn) return cmd_synthesize(f, *syn, out, err);
  if (*ver) return cmd_verify(f, out, err);
  return cmd_export(f, *exp, out, err);
}

}  // namespace pdrci::cli
