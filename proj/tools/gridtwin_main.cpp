#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "gridtwin/fixtures.hpp"
#include "gridtwin/impedance.hpp"
#include "gridtwin/io.hpp"
#include "gridtwin/metrics.hpp"
#include "gridtwin/powerflow.hpp"
#include "gridtwin/topology.hpp"

namespace {

namespace fs = std::filesystem;
using namespace gridtwin;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// Bad inputs and malformed files are data errors; everything the math can
// throw at runtime is a numerical failure.
int exit_code_for(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::parse_error:
    case Errc::io_error:
    case Errc::cycle_detected:
    case Errc::disconnected:
    case Errc::duplicate_downstream_bus:
    case Errc::non_positive_impedance:
    case Errc::not_a_tree:
    case Errc::dimension_mismatch:
    case Errc::too_few_samples:
    case Errc::too_few_points:
    case Errc::universe_mismatch:
      return kExitData;
    case Errc::non_convergence:
    case Errc::missing_child_flow:
    case Errc::zero_voltage:
    case Errc::ill_conditioned:
    case Errc::singular_normal_matrix:
    case Errc::degenerate_row:
    case Errc::no_cluster_found:
    case Errc::all_candidates_degenerate:
    case Errc::unrooted_topology:
    case Errc::constant_row:
      return kExitNumerical;
  }
  return kExitNumerical;
}

struct ConfigError {
  std::string message;
};

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int threads = 1;
  std::string format = "json";
};

// Relative output paths land in --out-dir; absolute paths are used verbatim.
std::string out_path(const GlobalOptions& g, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(g.out_dir) / p).string();
}

void ensure_out_dir(const GlobalOptions& g) {
  std::error_code ec;
  fs::create_directories(g.out_dir, ec);
  if (ec) raise(Errc::io_error, "cannot create \"" + g.out_dir + "\": " + ec.message());
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct ResolvedFixture {
  std::string name;
  io::NetworkDocument doc;
  ConductorLibrary library;
  bool has_library = false;
};

ResolvedFixture resolve_fixture(const std::string& spec, const std::string& library_path) {
  ResolvedFixture out;
  const auto names = builtin_fixture_names();
  if (std::find(names.begin(), names.end(), spec) != names.end()) {
    Fixture fixture = builtin_fixture(spec);
    out.name = fixture.name;
    out.doc.network = std::move(fixture.network);
    out.library = std::move(fixture.library);
    out.has_library = true;
  } else if (fs::exists(spec)) {
    out.doc = io::load_network(spec);
    out.name = fs::path(spec).stem().string();
  } else {
    throw ConfigError{"fixture \"" + spec +
                      "\" is neither a builtin name (feeder13, feeder37, feeder69) "
                      "nor an existing file"};
  }
  if (!library_path.empty()) {
    out.library = io::load_library(library_path);
    out.has_library = true;
  }
  return out;
}

RegressionMethod method_from(const std::string& name) {
  if (name == "lad") return RegressionMethod::lad;
  if (name == "ls") return RegressionMethod::ls;
  throw ConfigError{"unknown method \"" + name + "\" (expected lad or ls)"};
}

double parse_radius(const std::string& xi) {
  if (xi == "auto") return 0.0;
  char* end = nullptr;
  const double value = std::strtod(xi.c_str(), &end);
  if (end != xi.c_str() + xi.size() || !(value > 0.0)) {
    throw ConfigError{"--xi expects a positive radius or \"auto\", got \"" + xi + "\""};
  }
  return value;
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string fixture = "feeder13";
  std::string library_path;
  std::string profiles_path;
  int samples = 200;
  double scale = 1.0;
  double v0 = 1.0;
  NoiseSpec noise;
};

void write_empty_sample_files(const std::string& samples_path,
                              const std::string& sub_path) {
  std::ofstream samples(samples_path);
  samples << "k,bus,p,q,v\n";
  std::ofstream sub(sub_path);
  sub << "k,v0\n";
  if (!samples || !sub) raise(Errc::io_error, "cannot write sample files");
}

struct GenerateOutcome {
  ResolvedFixture fixture;
  int intervals = 0;
};

GenerateOutcome run_generate(const GlobalOptions& g, const GenerateArgs& args) {
  GenerateOutcome outcome;
  outcome.fixture = resolve_fixture(args.fixture, args.library_path);
  const RadialNetwork& net = outcome.fixture.doc.network;

  ensure_out_dir(g);
  io::save_network(outcome.fixture.doc, out_path(g, "network.json"));
  if (outcome.fixture.has_library) {
    io::save_library(outcome.fixture.library, out_path(g, "library.json"));
  }

  Eigen::MatrixXd p, q;
  Eigen::VectorXd v0;
  if (!args.profiles_path.empty()) {
    io::InjectionProfile profile = io::load_injections(args.profiles_path);
    require(profile.p.cols() == net.branch_count(), Errc::dimension_mismatch,
            args.profiles_path + ": profile covers " + std::to_string(profile.p.cols()) +
                " buses but the network has " + std::to_string(net.branch_count()));
    p = std::move(profile.p);
    q = std::move(profile.q);
    v0 = Eigen::VectorXd::Constant(p.rows(), args.v0);
  } else {
    require(args.samples >= 0, Errc::invalid_argument, "-K must be non-negative");
    LoadOptions load;
    load.scale = args.scale;
    load.v0 = args.v0;
    LoadProfile profile = synthesize_loads(net, args.samples, g.seed, load);
    p = std::move(profile.p);
    q = std::move(profile.q);
    v0 = std::move(profile.v0);
  }

  outcome.intervals = static_cast<int>(p.rows());
  if (outcome.intervals == 0) {
    write_empty_sample_files(out_path(g, "samples.csv"), out_path(g, "sub.csv"));
    return outcome;
  }

  GeneratedData data = generate_samples(net, p, q, v0, args.noise, g.seed, g.threads);
  io::save_sample_set(data.measured, out_path(g, "samples.csv"), out_path(g, "sub.csv"));
  return outcome;
}

// --- identify-topology -------------------------------------------------------

struct IdentifyArgs {
  std::string samples_path;
  std::string sub_path;
  int gamma = 0;
  std::string xi = "auto";
  std::string out = "topology.json";
  std::string heatmap;
};

struct IdentifyOutcome {
  LaplacianEstimate fit;
  AdjacencyEstimate adjacency;
};

IdentifyOutcome identify_from_samples(const SampleSet& samples, const IdentifyArgs& args) {
  IdentifyOutcome outcome;
  outcome.fit = fit_laplacian(samples);
  ClusterOptions options;
  options.gamma = args.gamma;
  options.radius = parse_radius(args.xi);
  outcome.adjacency = recover_topology(outcome.fit, options);
  return outcome;
}

IdentifyOutcome run_identify(const GlobalOptions& g, const IdentifyArgs& args) {
  const SampleSet samples = io::load_sample_set(args.samples_path, args.sub_path);
  IdentifyOutcome outcome = identify_from_samples(samples, args);
  ensure_out_dir(g);
  io::save_topology(outcome.adjacency, outcome.fit, out_path(g, args.out));
  if (!args.heatmap.empty()) io::save_heatmap(outcome.fit, out_path(g, args.heatmap));
  return outcome;
}

// --- estimate-impedance ------------------------------------------------------

struct EstimateArgs {
  std::string samples_path;
  std::string sub_path;
  std::string topology_path;
  std::string library_path;
  std::string method = "lad";
  std::string out = "impedances.json";
};

SweepResult estimate_from_parts(const SampleSet& samples, const TreeTopology& tree,
                                const ConductorLibrary& library,
                                const std::string& method) {
  SweepOptions options;
  options.method = method_from(method);
  return sweep(tree, samples, library, options);
}

SweepResult run_estimate(const GlobalOptions& g, const EstimateArgs& args) {
  const SampleSet samples = io::load_sample_set(args.samples_path, args.sub_path);
  const io::TopologyDocument topology = io::load_topology(args.topology_path);
  const TreeTopology tree = orient_adjacency(topology.adjacency);
  const ConductorLibrary library = io::load_library(args.library_path);
  SweepResult result = estimate_from_parts(samples, tree, library, args.method);
  ensure_out_dir(g);
  io::save_impedances(result, out_path(g, args.out));
  return result;
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
  std::string est_path;
  std::string topology_path;
  std::string truth_path;
  std::string method;  // label only
  std::string out;     // default depends on --format
};

std::string format_extension(const std::string& format) {
  if (format == "md") return ".md";
  if (format == "csv") return ".csv";
  return ".json";
}

void write_report(const EvaluationReport& report, const std::string& path,
                  const std::string& fallback_format) {
  std::string ext = fs::path(path).extension().string();
  if (ext != ".json" && ext != ".md" && ext != ".csv") {
    ext = format_extension(fallback_format);
  }
  if (ext == ".md") {
    io::save_report_markdown(report, path);
  } else if (ext == ".csv") {
    io::save_report_csv(report, path);
  } else {
    io::save_report_json(report, path);
  }
}

EvaluationReport build_report(const std::string& network_name,
                              const TopologyScore& topology_score,
                              const Eigen::VectorXd& r_est, const Eigen::VectorXd& x_est,
                              const std::vector<EstimateConfidence>& confidence,
                              const RadialNetwork& truth, double lambda, double residual,
                              double condition, int sample_count,
                              const std::string& method) {
  EvaluationReport report;
  report.network_name = network_name;
  report.topology = topology_score;
  report.impedance = relative_errors(r_est, x_est, truth);
  for (std::size_t j = 0; j < confidence.size() && j < report.impedance.rows.size(); ++j) {
    report.impedance.rows[j].confidence = confidence[j];
  }
  report.laplacian_lambda = lambda;
  report.laplacian_residual = residual;
  report.laplacian_condition = condition;
  report.sample_count = sample_count;
  report.method = method;
  return report;
}

EvaluationReport run_evaluate(const GlobalOptions& g, const EvaluateArgs& args) {
  const io::ImpedanceDocument est = io::load_impedances(args.est_path);
  const io::TopologyDocument topology = io::load_topology(args.topology_path);
  const io::NetworkDocument truth = io::load_network(args.truth_path);

  const TopologyScore score = compare_topology(topology.adjacency, truth.network);
  EvaluationReport report = build_report(
      fs::path(args.truth_path).stem().string(), score, est.r, est.x, est.confidence,
      truth.network, topology.lambda, topology.residual, topology.condition,
      topology.samples, args.method);

  ensure_out_dir(g);
  const std::string out =
      args.out.empty() ? "report" + format_extension(g.format) : args.out;
  write_report(report, out_path(g, out), g.format);
  return report;
}

// --- pipeline ----------------------------------------------------------------

struct PipelineArgs {
  GenerateArgs generate;
  IdentifyArgs identify;
  std::string method = "lad";
};

EvaluationReport run_pipeline(const GlobalOptions& g, const PipelineArgs& args) {
  std::vector<std::pair<std::string, double>> runtimes;
  auto stage_start = std::chrono::steady_clock::now();
  auto finish_stage = [&](const std::string& name) {
    runtimes.emplace_back(name, seconds_since(stage_start));
    stage_start = std::chrono::steady_clock::now();
  };

  GenerateOutcome generated = run_generate(g, args.generate);
  if (!generated.fixture.has_library) {
    throw ConfigError{"pipeline needs a conductor library; pass --library with a "
                      "custom network file"};
  }
  finish_stage("generate");

  const SampleSet samples =
      io::load_sample_set(out_path(g, "samples.csv"), out_path(g, "sub.csv"));
  IdentifyOutcome identified = identify_from_samples(samples, args.identify);
  io::save_topology(identified.adjacency, identified.fit, out_path(g, args.identify.out));
  if (!args.identify.heatmap.empty()) {
    io::save_heatmap(identified.fit, out_path(g, args.identify.heatmap));
  }
  finish_stage("identify-topology");

  const TreeTopology tree = orient_adjacency(identified.adjacency);
  finish_stage("orient");

  SweepResult estimated =
      estimate_from_parts(samples, tree, generated.fixture.library, args.method);
  io::save_impedances(estimated, out_path(g, "impedances.json"));
  finish_stage("estimate-impedance");

  const RadialNetwork& truth = generated.fixture.doc.network;
  const TopologyScore score = compare_topology(identified.adjacency, truth);
  std::vector<EstimateConfidence> confidence;
  for (const BranchEstimate& estimate : estimated.estimates) {
    confidence.push_back(estimate.confidence);
  }
  EvaluationReport report = build_report(
      generated.fixture.name, score, estimated.r(), estimated.x(), confidence, truth,
      identified.fit.lambda, identified.fit.residual, identified.fit.condition,
      identified.fit.samples, args.method);
  finish_stage("evaluate");

  report.runtimes = std::move(runtimes);
  io::save_report_json(report, out_path(g, "report.json"));
  io::save_report_markdown(report, out_path(g, "report.md"));
  io::save_report_csv(report, out_path(g, "report.csv"));
  return report;
}

void add_noise_options(CLI::App* cmd, NoiseSpec& noise) {
  cmd->add_option("--noise-v", noise.sigma_v, "Gaussian sigma on squared voltages")
      ->capture_default_str();
  cmd->add_option("--noise-p", noise.sigma_p, "Gaussian sigma on active injections")
      ->capture_default_str();
  cmd->add_option("--noise-q", noise.sigma_q, "Gaussian sigma on reactive injections")
      ->capture_default_str();
  cmd->add_option("--outlier-fraction", noise.outlier_fraction,
                  "Fraction of intervals with one gross voltage error")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--outlier-magnitude", noise.outlier_magnitude,
                  "Relative size of a gross voltage error")
      ->capture_default_str();
}

void add_generate_options(CLI::App* cmd, GenerateArgs& args, bool with_profiles) {
  cmd->add_option("--fixture", args.fixture,
                  "Builtin feeder (feeder13, feeder37, feeder69) or network JSON path")
      ->capture_default_str();
  cmd->add_option("--library", args.library_path,
                  "Conductor library JSON (defaults to the builtin fixture's)");
  cmd->add_option("-K,--samples", args.samples, "Number of metering intervals")
      ->capture_default_str();
  cmd->add_option("--scale", args.scale, "Total nominal load in p.u.")
      ->capture_default_str();
  cmd->add_option("--v0", args.v0, "Substation squared voltage")->capture_default_str();
  if (with_profiles) {
    cmd->add_option("--profiles", args.profiles_path,
                    "Injection CSV (k,bus,p,q) to use instead of synthetic loads");
  }
  add_noise_options(cmd, args.noise);
}

void add_identify_tuning_options(CLI::App* cmd, IdentifyArgs& args) {
  cmd->add_option("--gamma", args.gamma,
                  "Density threshold (neighbours); 0 picks max(4, 5% of n)")
      ->capture_default_str();
  cmd->add_option("--xi", args.xi, "Neighbourhood radius in normalized units, or auto")
      ->capture_default_str();
  cmd->add_option("--emit-heatmap", args.heatmap,
                  "Also write the row-normalized Laplacian as CSV");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial grid topology and impedance identification from meter data"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for all stochastic choices")
      ->envname("GRIDTWIN_SEED")
      ->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory receiving output artifacts")
      ->envname("GRIDTWIN_OUT_DIR")
      ->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for sample generation")
      ->envname("GRIDTWIN_THREADS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--format", g.format, "Default report format")
      ->envname("GRIDTWIN_FORMAT")
      ->check(CLI::IsMember({"json", "csv", "md"}))
      ->capture_default_str();

  GenerateArgs generate_args;
  CLI::App* generate = app.add_subcommand(
      "generate", "Synthesize loads, solve exact flows and write sample CSVs");
  generate->fallthrough();
  add_generate_options(generate, generate_args, true);

  IdentifyArgs identify_args;
  CLI::App* identify = app.add_subcommand(
      "identify-topology", "Fit the weighted Laplacian and recover bus adjacency");
  identify->fallthrough();
  identify->add_option("--samples", identify_args.samples_path, "Measurement CSV")
      ->required();
  identify->add_option("--sub", identify_args.sub_path, "Substation voltage CSV")
      ->required();
  identify->add_option("--out", identify_args.out, "Topology JSON output")
      ->capture_default_str();
  add_identify_tuning_options(identify, identify_args);

  EstimateArgs estimate_args;
  CLI::App* estimate = app.add_subcommand(
      "estimate-impedance", "Estimate branch r, x layer by layer from the leaves");
  estimate->fallthrough();
  estimate->add_option("--samples", estimate_args.samples_path, "Measurement CSV")
      ->required();
  estimate->add_option("--sub", estimate_args.sub_path, "Substation voltage CSV")
      ->required();
  estimate->add_option("--topology", estimate_args.topology_path, "Topology JSON")
      ->required();
  estimate->add_option("--library", estimate_args.library_path, "Conductor library JSON")
      ->required();
  estimate->add_option("--method", estimate_args.method, "Regression: lad or ls")
      ->check(CLI::IsMember({"lad", "ls"}))
      ->capture_default_str();
  estimate->add_option("--out", estimate_args.out, "Impedance JSON output")
      ->capture_default_str();

  EvaluateArgs evaluate_args;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Score estimates against a ground-truth network");
  evaluate->fallthrough();
  evaluate->add_option("--est", evaluate_args.est_path, "Impedance JSON")->required();
  evaluate->add_option("--topology", evaluate_args.topology_path, "Topology JSON")
      ->required();
  evaluate->add_option("--truth", evaluate_args.truth_path, "Ground-truth network JSON")
      ->required();
  evaluate->add_option("--method", evaluate_args.method, "Method label for the report");
  evaluate->add_option("--out", evaluate_args.out,
                       "Report path (.json/.md/.csv picks the format)");

  PipelineArgs pipeline_args;
  CLI::App* pipeline = app.add_subcommand(
      "pipeline", "generate -> identify-topology -> estimate-impedance -> evaluate");
  pipeline->fallthrough();
  add_generate_options(pipeline, pipeline_args.generate, false);
  add_identify_tuning_options(pipeline, pipeline_args.identify);
  pipeline->add_option("--method", pipeline_args.method, "Regression: lad or ls")
      ->check(CLI::IsMember({"lad", "ls"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (generate->parsed()) {
      const GenerateOutcome outcome = run_generate(g, generate_args);
      std::cout << "wrote " << out_path(g, "samples.csv") << " (" << outcome.intervals
                << " intervals, " << outcome.fixture.doc.network.branch_count()
                << " buses)\n";
    } else if (identify->parsed()) {
      const IdentifyOutcome outcome = run_identify(g, identify_args);
      std::cout << "recovered " << outcome.adjacency.edges.size() << " bus-to-bus edges, "
                << outcome.adjacency.root_adjacent.size()
                << " substation attachments (lambda " << outcome.fit.lambda << ")\n";
    } else if (estimate->parsed()) {
      const SweepResult result = run_estimate(g, estimate_args);
      std::cout << "estimated " << result.estimates.size() << " branches -> "
                << out_path(g, estimate_args.out) << "\n";
    } else if (evaluate->parsed()) {
      const EvaluationReport report = run_evaluate(g, evaluate_args);
      std::cout << "precision " << report.topology.precision << ", recall "
                << report.topology.recall << ", max rel err r "
                << report.impedance.max_rel_r << "%, x " << report.impedance.max_rel_x
                << "%\n";
    } else if (pipeline->parsed()) {
      const EvaluationReport report = run_pipeline(g, pipeline_args);
      std::cout << "pipeline done: precision " << report.topology.precision
                << ", recall " << report.topology.recall << ", max rel err r "
                << report.impedance.max_rel_r << "%, x " << report.impedance.max_rel_x
                << "%\n";
      for (const auto& [stage, seconds] : report.runtimes) {
        std::cout << "  " << stage << ": " << seconds << " s\n";
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.message << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
