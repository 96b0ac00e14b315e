#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gridtwin/fixtures.hpp"
#include "gridtwin/impedance.hpp"
#include "gridtwin/metrics.hpp"
#include "gridtwin/network.hpp"
#include "gridtwin/powerflow.hpp"
#include "gridtwin/topology.hpp"

namespace py = pybind11;
using namespace gridtwin;

namespace {

RadialNetwork network_from_arrays(const std::vector<int>& parents,
                                  const Eigen::VectorXd& r, const Eigen::VectorXd& x,
                                  const std::vector<std::string>& names) {
  const int n = static_cast<int>(parents.size());
  require(r.size() == n && x.size() == n, Errc::dimension_mismatch,
          "parents, r and x must have one entry per branch");
  require(names.empty() || static_cast<int>(names.size()) == n + 1,
          Errc::dimension_mismatch, "names must cover buses 0..n");
  std::vector<Bus> buses;
  for (int i = 0; i <= n; ++i) {
    buses.push_back({i, names.empty() ? std::to_string(i) : names[i]});
  }
  std::vector<Branch> branches;
  for (int j = 1; j <= n; ++j) {
    branches.push_back({j, parents[j - 1], r(j - 1), x(j - 1)});
  }
  return RadialNetwork::build(std::move(buses), std::move(branches));
}

SampleSet make_sample_set(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
                          const Eigen::MatrixXd& v, const Eigen::VectorXd& v0) {
  return SampleSet(p, q, v, v0);
}

const char* confidence_label(EstimateConfidence c) {
  switch (c) {
    case EstimateConfidence::ok: return "ok";
    case EstimateConfidence::underdetermined: return "underdetermined";
    case EstimateConfidence::low: return "low";
  }
  return "ok";
}

RegressionMethod method_from(const std::string& name) {
  if (name == "lad") return RegressionMethod::lad;
  if (name == "ls") return RegressionMethod::ls;
  if (name == "ls_linearized") return RegressionMethod::ls_linearized;
  raise(Errc::invalid_argument,
        "unknown method \"" + name + "\" (expected lad, ls or ls_linearized)");
}

py::dict score_to_dict(const TopologyScore& score) {
  py::dict out;
  out["true_positives"] = score.true_positives;
  out["false_positives"] = score.false_positives;
  out["false_negatives"] = score.false_negatives;
  out["precision"] = score.precision;
  out["recall"] = score.recall;
  return out;
}

}  // namespace

PYBIND11_MODULE(_gridtwin, m) {
  m.doc() = "Radial grid topology and impedance identification from meter data";

  py::register_exception<Error>(m, "GridError", PyExc_RuntimeError);

  py::class_<RadialNetwork>(m, "Network")
      .def(py::init(&network_from_arrays), py::arg("parents"), py::arg("r"),
           py::arg("x"), py::arg("names") = std::vector<std::string>{},
           "Build a radial network from per-branch parent buses and impedances; "
           "branch j feeds bus j.")
      .def_property_readonly("bus_count", &RadialNetwork::bus_count)
      .def_property_readonly("branch_count", &RadialNetwork::branch_count)
      .def_property_readonly("max_depth",
                             [](const RadialNetwork& n) { return n.topology().max_depth(); })
      .def("parents",
           [](const RadialNetwork& n) {
             std::vector<int> out;
             for (int j = 1; j <= n.branch_count(); ++j) {
               out.push_back(n.topology().parent(j));
             }
             return out;
           })
      .def("edges", [](const RadialNetwork& n) { return n.topology().edges(); })
      .def("names",
           [](const RadialNetwork& n) {
             std::vector<std::string> out;
             for (const Bus& bus : n.buses()) out.push_back(bus.name);
             return out;
           })
      .def("resistances", &RadialNetwork::resistances)
      .def("reactances", &RadialNetwork::reactances)
      .def("ratios", &RadialNetwork::ratios)
      .def("weighted_laplacian", &RadialNetwork::weighted_laplacian)
      .def("incidence", [](const RadialNetwork& n) { return n.topology().incidence(); })
      .def("incidence_inverse",
           [](const RadialNetwork& n) { return n.topology().incidence_inverse(); });

  m.def("builtin_fixture_names", &builtin_fixture_names);
  m.def(
      "builtin_fixture",
      [](const std::string& name) {
        Fixture fixture = builtin_fixture(name);
        return py::make_tuple(std::move(fixture.network), fixture.library.ratios());
      },
      py::arg("name"), "Returns (network, library_ratios) for a builtin feeder.");

  m.def(
      "synthesize_loads",
      [](const RadialNetwork& net, int intervals, std::uint64_t seed, double scale,
         double v0) {
        LoadOptions options;
        options.scale = scale;
        options.v0 = v0;
        LoadProfile profile = synthesize_loads(net, intervals, seed, options);
        py::dict out;
        out["p"] = std::move(profile.p);
        out["q"] = std::move(profile.q);
        out["v0"] = std::move(profile.v0);
        return out;
      },
      py::arg("network"), py::arg("intervals"), py::arg("seed") = 1,
      py::arg("scale") = 1.0, py::arg("v0") = 1.0,
      "Seeded synthetic loads (negative injections) and substation voltages.");

  m.def(
      "solve_exact",
      [](const RadialNetwork& net, const Eigen::VectorXd& p, const Eigen::VectorXd& q,
         double v0) {
        ExactSolution solution = solve_exact(net, p, q, v0);
        py::dict out;
        out["v"] = std::move(solution.v);
        out["iterations"] = solution.iterations;
        out["receiving_p"] = solution.flows.receiving_p.row(0).eval();
        out["receiving_q"] = solution.flows.receiving_q.row(0).eval();
        out["sending_p"] = solution.flows.sending_p.row(0).eval();
        out["sending_q"] = solution.flows.sending_q.row(0).eval();
        return out;
      },
      py::arg("network"), py::arg("p"), py::arg("q"), py::arg("v0") = 1.0,
      "Nonlinear branch-flow solve; returns squared voltages and branch flows.");

  m.def("solve_linearized", &solve_linearized, py::arg("network"), py::arg("p"),
        py::arg("q"), py::arg("v0") = 1.0,
        "Loss-free linear voltage model (squared magnitudes).");

  m.def(
      "generate_samples",
      [](const RadialNetwork& net, const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
         const Eigen::VectorXd& v0, std::uint64_t seed, int threads, double sigma_v,
         double sigma_p, double sigma_q, double outlier_fraction,
         double outlier_magnitude) {
        NoiseSpec noise;
        noise.sigma_v = sigma_v;
        noise.sigma_p = sigma_p;
        noise.sigma_q = sigma_q;
        noise.outlier_fraction = outlier_fraction;
        noise.outlier_magnitude = outlier_magnitude;
        GeneratedData data = generate_samples(net, p, q, v0, noise, seed, threads);
        py::dict out;
        out["p"] = data.measured.p();
        out["q"] = data.measured.q();
        out["v"] = data.measured.v();
        out["v0"] = data.measured.v0();
        out["clean_v"] = data.clean.v();
        return out;
      },
      py::arg("network"), py::arg("p"), py::arg("q"), py::arg("v0"), py::arg("seed") = 0,
      py::arg("threads") = 1, py::arg("sigma_v") = 0.0, py::arg("sigma_p") = 0.0,
      py::arg("sigma_q") = 0.0, py::arg("outlier_fraction") = 0.0,
      py::arg("outlier_magnitude") = 0.05,
      "Exact solve per interval plus optional measurement noise.");

  m.def(
      "fit_laplacian",
      [](const Eigen::MatrixXd& p, const Eigen::MatrixXd& q, const Eigen::MatrixXd& v,
         const Eigen::VectorXd& v0) {
        LaplacianEstimate fit = fit_laplacian(make_sample_set(p, q, v, v0));
        py::dict out;
        out["y"] = std::move(fit.y);
        out["lambda_"] = fit.lambda;
        out["residual"] = fit.residual;
        out["condition"] = fit.condition;
        return out;
      },
      py::arg("p"), py::arg("q"), py::arg("v"), py::arg("v0"),
      "Joint least-squares fit of the weighted Laplacian and common r/x ratio.");

  m.def(
      "recover_topology",
      [](const Eigen::MatrixXd& y, int gamma, double radius, bool per_row) {
        LaplacianEstimate fit;
        fit.y = y;
        ClusterOptions options;
        options.gamma = gamma;
        options.radius = radius;
        options.per_row = per_row;
        AdjacencyEstimate adjacency = recover_topology(fit, options);
        py::dict out;
        out["edges"] = adjacency.edges;
        out["root_adjacent"] = adjacency.root_adjacent;
        out["gamma"] = adjacency.gamma;
        return out;
      },
      py::arg("y"), py::arg("gamma") = 0, py::arg("radius") = 0.0,
      py::arg("per_row") = true,
      "Density-based adjacency readout of a fitted Laplacian.");

  m.def(
      "orient_tree",
      [](int n, const std::vector<std::pair<int, int>>& edges) {
        const TreeTopology tree = orient_tree(n, edges);
        std::vector<int> parents;
        for (int j = 1; j <= tree.branch_count(); ++j) parents.push_back(tree.parent(j));
        return parents;
      },
      py::arg("n"), py::arg("edges"),
      "Root an undirected spanning edge set over buses 0..n at the substation; "
      "returns parents[j-1].");

  m.def(
      "sweep",
      [](const std::vector<int>& parents, const Eigen::MatrixXd& p,
         const Eigen::MatrixXd& q, const Eigen::MatrixXd& v, const Eigen::VectorXd& v0,
         const std::vector<double>& ratios, const std::string& method) {
        const TreeTopology tree = TreeTopology::from_parents(parents);
        const ConductorLibrary library(ratios);
        SweepOptions options;
        options.method = method_from(method);
        SweepResult result = sweep(tree, make_sample_set(p, q, v, v0), library, options);
        py::dict out;
        out["r"] = result.r();
        out["x"] = result.x();
        std::vector<int> index;
        std::vector<std::string> confidence;
        std::vector<double> objective;
        for (const BranchEstimate& estimate : result.estimates) {
          index.push_back(estimate.library_index);
          confidence.push_back(confidence_label(estimate.confidence));
          objective.push_back(estimate.objective);
        }
        out["library_index"] = std::move(index);
        out["confidence"] = std::move(confidence);
        out["objective"] = std::move(objective);
        return out;
      },
      py::arg("parents"), py::arg("p"), py::arg("q"), py::arg("v"), py::arg("v0"),
      py::arg("ratios"), py::arg("method") = "lad",
      "Layer-by-layer branch impedance estimation from the leaves up.");

  m.def(
      "compare_edge_sets",
      [](const std::vector<std::pair<int, int>>& estimated,
         const std::vector<std::pair<int, int>>& truth, int n) {
        return score_to_dict(compare_edge_sets(estimated, truth, n));
      },
      py::arg("estimated"), py::arg("truth"), py::arg("n"),
      "Precision/recall of unordered edge sets over buses 0..n.");

  m.def(
      "relative_errors",
      [](const Eigen::VectorXd& r_est, const Eigen::VectorXd& x_est,
         const RadialNetwork& truth) {
        const ErrorSummary summary = relative_errors(r_est, x_est, truth);
        py::dict out;
        out["max_rel_r"] = summary.max_rel_r;
        out["max_rel_x"] = summary.max_rel_x;
        out["mean_rel_r"] = summary.mean_rel_r;
        out["mean_rel_x"] = summary.mean_rel_x;
        Eigen::VectorXd rel_r(summary.rows.size()), rel_x(summary.rows.size());
        for (std::size_t i = 0; i < summary.rows.size(); ++i) {
          rel_r(i) = summary.rows[i].rel_r;
          rel_x(i) = summary.rows[i].rel_x;
        }
        out["rel_r"] = std::move(rel_r);
        out["rel_x"] = std::move(rel_x);
        return out;
      },
      py::arg("r_est"), py::arg("x_est"), py::arg("truth"),
      "Per-branch relative errors in percent against a reference network.");
}
