#include "gridtwin/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gridtwin::io {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::io_error, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  require(!in.bad(), Errc::io_error, "read failed on " + path);
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::io_error, "cannot open " + path + " for writing");
  out << content;
  out.flush();
  require(out.good(), Errc::io_error, "write failed on " + path);
}

json parse_json(const std::string& path) {
  const std::string text = read_file(path);
  json doc = json::parse(text, nullptr, false);
  require(!doc.is_discarded(), Errc::parse_error, path + ": invalid JSON");
  return doc;
}

void warn_unknown(const json& object, std::initializer_list<const char*> known,
                  const std::string& where, std::vector<std::string>* warnings) {
  if (!warnings || !object.is_object()) return;
  for (const auto& [key, value] : object.items()) {
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }) == known.end()) {
      warnings->push_back(where + ": ignoring unknown field \"" + key + "\"");
    }
  }
}

const json& expect(const json& object, const char* key, const std::string& where) {
  const auto it = object.find(key);
  require(it != object.end(), Errc::parse_error,
          where + ": missing required field \"" + std::string(key) + "\"");
  return *it;
}

double expect_number(const json& object, const char* key, const std::string& where) {
  const json& value = expect(object, key, where);
  require(value.is_number(), Errc::parse_error,
          where + ": field \"" + std::string(key) + "\" must be a number");
  return value.get<double>();
}

int expect_integer(const json& object, const char* key, const std::string& where) {
  const json& value = expect(object, key, where);
  require(value.is_number_integer(), Errc::parse_error,
          where + ": field \"" + std::string(key) + "\" must be an integer");
  return value.get<int>();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  for (auto& f : fields) {
    const auto first = f.find_first_not_of(" \t");
    const auto last = f.find_last_not_of(" \t");
    f = first == std::string::npos ? std::string() : f.substr(first, last - first + 1);
  }
  return fields;
}

double parse_double(const std::string& text, const std::string& where) {
  require(!text.empty(), Errc::parse_error, where + ": empty numeric field");
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  require(end == text.c_str() + text.size(), Errc::parse_error,
          where + ": cannot parse number \"" + text + "\"");
  return value;
}

long parse_long(const std::string& text, const std::string& where) {
  require(!text.empty(), Errc::parse_error, where + ": empty integer field");
  char* end = nullptr;
  const long value = std::strtol(text.c_str(), &end, 10);
  require(end == text.c_str() + text.size(), Errc::parse_error,
          where + ": cannot parse integer \"" + text + "\"");
  return value;
}

std::string confidence_name(EstimateConfidence c) {
  switch (c) {
    case EstimateConfidence::ok: return "ok";
    case EstimateConfidence::underdetermined: return "underdetermined";
    case EstimateConfidence::low: return "low";
  }
  return "ok";
}

EstimateConfidence confidence_from(const std::string& name, const std::string& where) {
  if (name == "ok") return EstimateConfidence::ok;
  if (name == "underdetermined") return EstimateConfidence::underdetermined;
  if (name == "low") return EstimateConfidence::low;
  raise(Errc::parse_error, where + ": unknown confidence \"" + name + "\"");
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

NetworkDocument load_network(const std::string& path, std::vector<std::string>* warnings) {
  const json doc = parse_json(path);
  require(doc.is_object(), Errc::parse_error, path + ": top level must be an object");
  warn_unknown(doc, {"buses", "branches", "base"}, path, warnings);

  const json& buses_json = expect(doc, "buses", path);
  const json& branches_json = expect(doc, "branches", path);
  require(buses_json.is_array() && branches_json.is_array(), Errc::parse_error,
          path + ": \"buses\" and \"branches\" must be arrays");

  std::vector<Bus> buses;
  for (const json& b : buses_json) {
    const std::string where = path + ": bus " + std::to_string(buses.size());
    require(b.is_object(), Errc::parse_error, where + " must be an object");
    warn_unknown(b, {"id", "name"}, where, warnings);
    Bus bus;
    bus.id = expect_integer(b, "id", where);
    if (const auto it = b.find("name"); it != b.end()) {
      require(it->is_string(), Errc::parse_error, where + ": \"name\" must be a string");
      bus.name = it->get<std::string>();
    }
    buses.push_back(std::move(bus));
  }

  std::vector<Branch> branches;
  for (const json& b : branches_json) {
    const std::string where = path + ": branch " + std::to_string(branches.size());
    require(b.is_object(), Errc::parse_error, where + " must be an object");
    warn_unknown(b, {"id", "parent", "r", "x"}, where, warnings);
    Branch branch;
    branch.id = expect_integer(b, "id", where);
    branch.parent = expect_integer(b, "parent", where);
    branch.r = expect_number(b, "r", where);
    branch.x = expect_number(b, "x", where);
    branches.push_back(branch);
  }

  NetworkDocument out;
  out.network = RadialNetwork::build(std::move(buses), std::move(branches));
  if (const auto it = doc.find("base"); it != doc.end()) out.base = *it;
  return out;
}

void save_network(const NetworkDocument& doc, const std::string& path) {
  json out;
  out["buses"] = json::array();
  for (const Bus& bus : doc.network.buses()) {
    json b{{"id", bus.id}};
    if (!bus.name.empty()) b["name"] = bus.name;
    out["buses"].push_back(std::move(b));
  }
  out["branches"] = json::array();
  for (const Branch& branch : doc.network.branches()) {
    out["branches"].push_back(json{{"id", branch.id},
                                   {"parent", branch.parent},
                                   {"r", branch.r},
                                   {"x", branch.x}});
  }
  if (!doc.base.is_null()) out["base"] = doc.base;
  write_file(path, out.dump(2) + "\n");
}

ConductorLibrary load_library(const std::string& path, std::vector<std::string>* warnings) {
  const json doc = parse_json(path);
  require(doc.is_object(), Errc::parse_error, path + ": top level must be an object");
  warn_unknown(doc, {"ratios"}, path, warnings);
  const json& ratios = expect(doc, "ratios", path);
  require(ratios.is_array() && !ratios.empty(), Errc::parse_error,
          path + ": \"ratios\" must be a non-empty array");
  std::vector<double> values;
  for (const json& r : ratios) {
    require(r.is_number(), Errc::parse_error, path + ": ratios must be numbers");
    values.push_back(r.get<double>());
  }
  return ConductorLibrary(std::move(values));
}

void save_library(const ConductorLibrary& library, const std::string& path) {
  write_file(path, json{{"ratios", library.ratios()}}.dump(2) + "\n");
}

SampleSet load_sample_set(const std::string& samples_path, const std::string& sub_path) {
  std::istringstream samples_in(read_file(samples_path));
  std::string line;
  require(static_cast<bool>(std::getline(samples_in, line)), Errc::parse_error,
          samples_path + ": empty file");
  {
    const auto header = split_csv_line(line);
    require(header == std::vector<std::string>({"k", "bus", "p", "q", "v"}),
            Errc::parse_error, samples_path + ": header must be \"k,bus,p,q,v\"");
  }
  struct Cell {
    double p, q, v;
  };
  std::vector<std::vector<Cell>> rows;          // [k][bus-1]
  std::vector<std::vector<char>> seen;
  long max_bus = 0;
  int line_no = 1;
  while (std::getline(samples_in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = samples_path + ":" + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    require(fields.size() == 5, Errc::parse_error, where + ": expected 5 fields");
    const long k = parse_long(fields[0], where);
    const long bus = parse_long(fields[1], where);
    require(k >= 0, Errc::parse_error, where + ": interval ids must be non-negative");
    require(bus >= 1, Errc::parse_error, where + ": bus ids start at 1");
    max_bus = std::max(max_bus, bus);
    if (static_cast<long>(rows.size()) <= k) {
      rows.resize(k + 1);
      seen.resize(k + 1);
    }
    if (static_cast<long>(rows[k].size()) < max_bus) {
      for (auto& row : rows) row.resize(max_bus);
      for (auto& row : seen) row.resize(max_bus, 0);
    }
    require(!seen[k][bus - 1], Errc::parse_error,
            where + ": duplicate measurement for interval " + std::to_string(k) +
                ", bus " + std::to_string(bus));
    seen[k][bus - 1] = 1;
    rows[k][bus - 1] = {parse_double(fields[2], where), parse_double(fields[3], where),
                        parse_double(fields[4], where)};
  }
  require(!rows.empty(), Errc::parse_error, samples_path + ": no measurements");
  const int K = static_cast<int>(rows.size());
  const int n = static_cast<int>(max_bus);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < n; ++j) {
      require(j < static_cast<int>(seen[k].size()) && seen[k][j], Errc::parse_error,
              samples_path + ": missing measurement for interval " + std::to_string(k) +
                  ", bus " + std::to_string(j + 1));
    }
  }

  std::istringstream sub_in(read_file(sub_path));
  require(static_cast<bool>(std::getline(sub_in, line)), Errc::parse_error,
          sub_path + ": empty file");
  {
    const auto header = split_csv_line(line);
    require(header == std::vector<std::string>({"k", "v0"}), Errc::parse_error,
            sub_path + ": header must be \"k,v0\"");
  }
  Eigen::VectorXd v0(K);
  std::vector<char> seen_v0(K, 0);
  line_no = 1;
  while (std::getline(sub_in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = sub_path + ":" + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    require(fields.size() == 2, Errc::parse_error, where + ": expected 2 fields");
    const long k = parse_long(fields[0], where);
    require(k >= 0 && k < K, Errc::parse_error,
            where + ": interval " + std::to_string(k) + " outside the measurement range");
    require(!seen_v0[k], Errc::parse_error, where + ": duplicate interval");
    seen_v0[k] = 1;
    v0(k) = parse_double(fields[1], where);
  }
  for (int k = 0; k < K; ++k) {
    require(seen_v0[k], Errc::parse_error,
            sub_path + ": missing substation voltage for interval " + std::to_string(k));
  }

  Eigen::MatrixXd p(K, n), q(K, n), v(K, n);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < n; ++j) {
      p(k, j) = rows[k][j].p;
      q(k, j) = rows[k][j].q;
      v(k, j) = rows[k][j].v;
    }
  }
  return SampleSet(std::move(p), std::move(q), std::move(v), std::move(v0));
}

InjectionProfile load_injections(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::parse_error,
          path + ": empty file");
  {
    const auto header = split_csv_line(line);
    require(header == std::vector<std::string>({"k", "bus", "p", "q"}), Errc::parse_error,
            path + ": header must be \"k,bus,p,q\"");
  }
  struct Cell {
    double p, q;
  };
  std::vector<std::vector<Cell>> rows;  // [k][bus-1]
  std::vector<std::vector<char>> seen;
  long max_bus = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    require(fields.size() == 4, Errc::parse_error, where + ": expected 4 fields");
    const long k = parse_long(fields[0], where);
    const long bus = parse_long(fields[1], where);
    require(k >= 0, Errc::parse_error, where + ": interval ids must be non-negative");
    require(bus >= 1, Errc::parse_error, where + ": bus ids start at 1");
    max_bus = std::max(max_bus, bus);
    if (static_cast<long>(rows.size()) <= k) {
      rows.resize(k + 1);
      seen.resize(k + 1);
    }
    if (static_cast<long>(rows[k].size()) < max_bus) {
      for (auto& row : rows) row.resize(max_bus);
      for (auto& row : seen) row.resize(max_bus, 0);
    }
    require(!seen[k][bus - 1], Errc::parse_error,
            where + ": duplicate injection for interval " + std::to_string(k) + ", bus " +
                std::to_string(bus));
    seen[k][bus - 1] = 1;
    rows[k][bus - 1] = {parse_double(fields[2], where), parse_double(fields[3], where)};
  }
  require(!rows.empty(), Errc::parse_error, path + ": no injections");
  const int K = static_cast<int>(rows.size());
  const int n = static_cast<int>(max_bus);
  InjectionProfile out;
  out.p.resize(K, n);
  out.q.resize(K, n);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < n; ++j) {
      require(j < static_cast<int>(seen[k].size()) && seen[k][j], Errc::parse_error,
              path + ": missing injection for interval " + std::to_string(k) + ", bus " +
                  std::to_string(j + 1));
      out.p(k, j) = rows[k][j].p;
      out.q(k, j) = rows[k][j].q;
    }
  }
  return out;
}

void save_sample_set(const SampleSet& samples, const std::string& samples_path,
                     const std::string& sub_path) {
  std::ostringstream out;
  out << "k,bus,p,q,v\n";
  for (int k = 0; k < samples.size(); ++k) {
    for (int j = 0; j < samples.bus_count(); ++j) {
      out << k << ',' << (j + 1) << ',' << format_double(samples.p()(k, j)) << ','
          << format_double(samples.q()(k, j)) << ',' << format_double(samples.v()(k, j))
          << '\n';
    }
  }
  write_file(samples_path, out.str());

  std::ostringstream sub;
  sub << "k,v0\n";
  for (int k = 0; k < samples.size(); ++k) {
    sub << k << ',' << format_double(samples.v0()(k)) << '\n';
  }
  write_file(sub_path, sub.str());
}

void save_topology(const AdjacencyEstimate& adjacency, const LaplacianEstimate& fit,
                   const std::string& path) {
  json out;
  out["buses"] = adjacency.bus_count;
  out["edges"] = json::array();
  for (const auto& [a, b] : adjacency.edges) out["edges"].push_back(json::array({a, b}));
  out["root_adjacent"] = adjacency.root_adjacent;
  out["lambda"] = fit.lambda;
  out["residual"] = fit.residual;
  out["condition"] = fit.condition;
  out["samples"] = fit.samples;
  out["gamma"] = adjacency.gamma;
  out["radius"] = adjacency.radius;
  out["rows"] = json::array();
  for (const RowDiagnostics& row : adjacency.rows) {
    out["rows"].push_back(json{{"bus", row.bus},
                               {"clusters", row.cluster_count},
                               {"outliers", row.outlier_count},
                               {"connected", row.connected_count},
                               {"radius", row.radius},
                               {"boundary", row.boundary}});
  }
  write_file(path, out.dump(2) + "\n");
}

TopologyDocument load_topology(const std::string& path, std::vector<std::string>* warnings) {
  const json doc = parse_json(path);
  require(doc.is_object(), Errc::parse_error, path + ": top level must be an object");
  warn_unknown(doc,
               {"buses", "edges", "root_adjacent", "lambda", "residual", "condition",
                "samples", "gamma", "radius", "rows"},
               path, warnings);

  TopologyDocument out;
  out.adjacency.bus_count = expect_integer(doc, "buses", path);
  require(out.adjacency.bus_count >= 1, Errc::parse_error, path + ": bad bus count");
  const int n = out.adjacency.bus_count;
  out.adjacency.labels = Eigen::MatrixXi::Zero(n, n);

  const json& edges = expect(doc, "edges", path);
  require(edges.is_array(), Errc::parse_error, path + ": \"edges\" must be an array");
  for (const json& e : edges) {
    require(e.is_array() && e.size() == 2 && e[0].is_number_integer() &&
                e[1].is_number_integer(),
            Errc::parse_error, path + ": edges must be [i, j] integer pairs");
    const int a = e[0].get<int>();
    const int b = e[1].get<int>();
    require(a >= 1 && a <= n && b >= 1 && b <= n && a != b, Errc::parse_error,
            path + ": edge endpoints must be distinct buses in 1.." + std::to_string(n));
    out.adjacency.edges.emplace_back(std::min(a, b), std::max(a, b));
    out.adjacency.labels(a - 1, b - 1) = 1;
    out.adjacency.labels(b - 1, a - 1) = 1;
  }

  const json& roots = expect(doc, "root_adjacent", path);
  require(roots.is_array(), Errc::parse_error,
          path + ": \"root_adjacent\" must be an array");
  for (const json& r : roots) {
    require(r.is_number_integer(), Errc::parse_error,
            path + ": root_adjacent entries must be integers");
    const int bus = r.get<int>();
    require(bus >= 1 && bus <= n, Errc::parse_error,
            path + ": root_adjacent bus outside 1.." + std::to_string(n));
    out.adjacency.root_adjacent.push_back(bus);
  }

  if (const auto it = doc.find("lambda"); it != doc.end()) out.lambda = it->get<double>();
  if (const auto it = doc.find("residual"); it != doc.end())
    out.residual = it->get<double>();
  if (const auto it = doc.find("condition"); it != doc.end())
    out.condition = it->get<double>();
  if (const auto it = doc.find("samples"); it != doc.end())
    out.samples = it->get<int>();
  if (const auto it = doc.find("gamma"); it != doc.end())
    out.adjacency.gamma = it->get<int>();
  if (const auto it = doc.find("radius"); it != doc.end())
    out.adjacency.radius = it->get<double>();
  return out;
}

void save_impedances(const SweepResult& result, const std::string& path) {
  json out;
  out["branches"] = json::array();
  for (std::size_t j = 0; j < result.estimates.size(); ++j) {
    const BranchEstimate& est = result.estimates[j];
    json entry{{"id", static_cast<int>(j + 1)},
               {"r", est.r},
               {"x", est.x},
               {"lambda_index", est.library_index},
               {"confidence", confidence_name(est.confidence)}};
    if (std::isfinite(est.objective)) entry["objective"] = est.objective;
    out["branches"].push_back(std::move(entry));
  }
  write_file(path, out.dump(2) + "\n");
}

ImpedanceDocument load_impedances(const std::string& path,
                                  std::vector<std::string>* warnings) {
  const json doc = parse_json(path);
  require(doc.is_object(), Errc::parse_error, path + ": top level must be an object");
  warn_unknown(doc, {"branches"}, path, warnings);
  const json& branches = expect(doc, "branches", path);
  require(branches.is_array() && !branches.empty(), Errc::parse_error,
          path + ": \"branches\" must be a non-empty array");

  const int n = static_cast<int>(branches.size());
  ImpedanceDocument out;
  out.r = Eigen::VectorXd::Zero(n);
  out.x = Eigen::VectorXd::Zero(n);
  out.library_index.assign(n, -1);
  out.confidence.assign(n, EstimateConfidence::ok);
  std::vector<char> seen(n, 0);
  for (const json& b : branches) {
    const std::string where = path + ": branch entry";
    require(b.is_object(), Errc::parse_error, where + " must be an object");
    warn_unknown(b, {"id", "r", "x", "lambda_index", "objective", "confidence"}, where,
                 warnings);
    const int id = expect_integer(b, "id", where);
    require(id >= 1 && id <= n, Errc::parse_error,
            where + ": id outside 1.." + std::to_string(n));
    require(!seen[id - 1], Errc::parse_error,
            path + ": duplicate branch id " + std::to_string(id));
    seen[id - 1] = 1;
    out.r(id - 1) = expect_number(b, "r", where);
    out.x(id - 1) = expect_number(b, "x", where);
    if (const auto it = b.find("lambda_index"); it != b.end())
      out.library_index[id - 1] = it->get<int>();
    if (const auto it = b.find("confidence"); it != b.end())
      out.confidence[id - 1] = confidence_from(it->get<std::string>(), where);
  }
  for (int j = 0; j < n; ++j) {
    require(seen[j], Errc::parse_error,
            path + ": missing entry for branch " + std::to_string(j + 1));
  }
  return out;
}

void save_heatmap(const LaplacianEstimate& fit, const std::string& path) {
  const int n = static_cast<int>(fit.y.rows());
  std::ostringstream out;
  for (int i = 0; i < n; ++i) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      lo = std::min(lo, fit.y(i, j));
      hi = std::max(hi, fit.y(i, j));
    }
    for (int j = 0; j < n; ++j) {
      if (j > 0) out << ',';
      if (j == i || !(hi > lo)) {
        out << 0;
      } else {
        out << format_double((fit.y(i, j) - lo) / (hi - lo));
      }
    }
    out << '\n';
  }
  write_file(path, out.str());
}

namespace {

json report_to_json(const EvaluationReport& report) {
  json out;
  out["network"] = report.network_name;
  out["method"] = report.method;
  out["samples"] = report.sample_count;
  out["topology"] = json{{"true_positives", report.topology.true_positives},
                         {"false_positives", report.topology.false_positives},
                         {"false_negatives", report.topology.false_negatives},
                         {"precision", report.topology.precision},
                         {"recall", report.topology.recall}};
  out["laplacian"] = json{{"lambda", report.laplacian_lambda},
                          {"residual", report.laplacian_residual},
                          {"condition", report.laplacian_condition}};
  json branches = json::array();
  for (const BranchErrorRow& row : report.impedance.rows) {
    branches.push_back(json{{"branch", row.branch},
                            {"depth", row.depth},
                            {"rel_r", row.rel_r},
                            {"rel_x", row.rel_x},
                            {"confidence", confidence_name(row.confidence)}});
  }
  out["impedance"] = json{{"max_rel_r", report.impedance.max_rel_r},
                          {"max_rel_x", report.impedance.max_rel_x},
                          {"mean_rel_r", report.impedance.mean_rel_r},
                          {"mean_rel_x", report.impedance.mean_rel_x},
                          {"branches", std::move(branches)}};
  json layers = json::array();
  for (const LayerErrorStat& stat : report.impedance.by_layer) {
    layers.push_back(json{{"depth", stat.depth},
                          {"mean_rel_r", stat.mean_rel_r},
                          {"max_rel_r", stat.max_rel_r},
                          {"mean_rel_x", stat.mean_rel_x},
                          {"max_rel_x", stat.max_rel_x}});
  }
  out["layers"] = std::move(layers);
  json runtimes = json::object();
  for (const auto& [stage, seconds] : report.runtimes) runtimes[stage] = seconds;
  out["runtimes"] = std::move(runtimes);
  return out;
}

}  // namespace

void save_report_json(const EvaluationReport& report, const std::string& path) {
  write_file(path, report_to_json(report).dump(2) + "\n");
}

void save_report_markdown(const EvaluationReport& report, const std::string& path) {
  std::ostringstream out;
  out << "# Identification report: " << report.network_name << "\n\n";
  out << "- method: " << report.method << "\n";
  out << "- intervals: " << report.sample_count << "\n";
  out << "- fitted ratio: " << format_double(report.laplacian_lambda) << "\n";
  out << "- fit residual: " << format_double(report.laplacian_residual) << "\n";
  out << "- normal-matrix condition: " << format_double(report.laplacian_condition)
      << "\n\n";
  out << "## Topology\n\n";
  out << "| precision | recall | TP | FP | FN |\n|---|---|---|---|---|\n";
  out << "| " << format_double(report.topology.precision) << " | "
      << format_double(report.topology.recall) << " | " << report.topology.true_positives
      << " | " << report.topology.false_positives << " | "
      << report.topology.false_negatives << " |\n\n";
  out << "## Impedances\n\n";
  out << "max relative error: r " << format_double(report.impedance.max_rel_r) << ", x "
      << format_double(report.impedance.max_rel_x) << "\n\n";
  out << "| branch | depth | rel. error r | rel. error x | confidence |\n";
  out << "|---|---|---|---|---|\n";
  for (const BranchErrorRow& row : report.impedance.rows) {
    out << "| " << row.branch << " | " << row.depth << " | " << format_double(row.rel_r)
        << " | " << format_double(row.rel_x) << " | " << confidence_name(row.confidence)
        << " |\n";
  }
  if (!report.runtimes.empty()) {
    out << "\n## Runtimes\n\n| stage | seconds |\n|---|---|\n";
    for (const auto& [stage, seconds] : report.runtimes) {
      out << "| " << stage << " | " << format_double(seconds) << " |\n";
    }
  }
  write_file(path, out.str());
}

void save_report_csv(const EvaluationReport& report, const std::string& path) {
  std::ostringstream out;
  out << "# network," << report.network_name << "\n";
  out << "# method," << report.method << "\n";
  out << "# samples," << report.sample_count << "\n";
  out << "# precision," << format_double(report.topology.precision) << "\n";
  out << "# recall," << format_double(report.topology.recall) << "\n";
  out << "# max_rel_r," << format_double(report.impedance.max_rel_r) << "\n";
  out << "# max_rel_x," << format_double(report.impedance.max_rel_x) << "\n";
  for (const auto& [stage, seconds] : report.runtimes) {
    out << "# runtime_" << stage << ',' << format_double(seconds) << "\n";
  }
  out << "branch,depth,rel_r,rel_x,confidence\n";
  for (const BranchErrorRow& row : report.impedance.rows) {
    out << row.branch << ',' << row.depth << ',' << format_double(row.rel_r) << ','
        << format_double(row.rel_x) << ',' << confidence_name(row.confidence) << "\n";
  }
  write_file(path, out.str());
}

}  // namespace gridtwin::io
