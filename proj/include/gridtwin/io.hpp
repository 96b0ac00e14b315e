#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "gridtwin/metrics.hpp"
#include "gridtwin/network.hpp"
#include "gridtwin/powerflow.hpp"
#include "gridtwin/topology.hpp"

namespace gridtwin::io {

// Network file with optional per-feeder metadata carried through untouched.
struct NetworkDocument {
  RadialNetwork network;
  nlohmann::json base;  // free-form "base" block (kV, MVA, ...); may be null
};

// Formats a double with full round-trip precision (shortest %.17g form).
std::string format_double(double value);

NetworkDocument load_network(const std::string& path, std::vector<std::string>* warnings = nullptr);
void save_network(const NetworkDocument& doc, const std::string& path);

ConductorLibrary load_library(const std::string& path, std::vector<std::string>* warnings = nullptr);
void save_library(const ConductorLibrary& library, const std::string& path);

// Long-format interval CSVs: measurements are `k,bus,p,q,v` rows, the
// substation file is `k,v0`.  Every (interval, bus) pair must appear exactly
// once and interval ids must be dense from 0.
SampleSet load_sample_set(const std::string& samples_path, const std::string& sub_path);
void save_sample_set(const SampleSet& samples, const std::string& samples_path,
                     const std::string& sub_path);

// Injection-only profile CSV (`k,bus,p,q`), same dense-interval rules as the
// measurement file.  Returns K x n matrices of net injections.
struct InjectionProfile {
  Eigen::MatrixXd p, q;
};
InjectionProfile load_injections(const std::string& path);

// Identified topology with the fit diagnostics needed downstream.
void save_topology(const AdjacencyEstimate& adjacency, const LaplacianEstimate& fit,
                   const std::string& path);
struct TopologyDocument {
  AdjacencyEstimate adjacency;
  double lambda = 0.0;
  double residual = 0.0;
  double condition = 0.0;
  int samples = 0;
};
TopologyDocument load_topology(const std::string& path, std::vector<std::string>* warnings = nullptr);

void save_impedances(const SweepResult& result, const std::string& path);
struct ImpedanceDocument {
  Eigen::VectorXd r, x;
  std::vector<int> library_index;
  std::vector<EstimateConfidence> confidence;
};
ImpedanceDocument load_impedances(const std::string& path, std::vector<std::string>* warnings = nullptr);

// Row-normalized magnitude heatmap of the fitted Laplacian (n x n CSV).
void save_heatmap(const LaplacianEstimate& fit, const std::string& path);

void save_report_json(const EvaluationReport& report, const std::string& path);
void save_report_markdown(const EvaluationReport& report, const std::string& path);
void save_report_csv(const EvaluationReport& report, const std::string& path);

}  // namespace gridtwin::io
