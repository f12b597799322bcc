#include "sbridge/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sbridge::io {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

int node_index(const json& v, int n, const char* what) {
  if (!v.is_number_integer()) invalid_input(std::string(what) + " must be an integer node label");
  const auto label = v.get<long long>();
  if (label < 1 || label > n) {
    invalid_input(std::string(what) + " " + std::to_string(label) + " is outside 1.." +
                  std::to_string(n));
  }
  return static_cast<int>(label - 1);
}

double number(const json& v, const char* what) {
  if (!v.is_number()) invalid_input(std::string(what) + " must be a number");
  return v.get<double>();
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) invalid_input(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

Vector vector_from(const json& j, const char* what) {
  if (!j.is_array()) invalid_input(std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], what);
  return v;
}

Matrix matrix_from(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) invalid_input(std::string(what) + " must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = vector_from(j[static_cast<std::size_t>(r)], what);
    if (row.size() != cols) invalid_input(std::string(what) + " rows differ in length");
    m.row(r) = row.transpose();
  }
  return m;
}

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
  return a;
}

json finite_or_string(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

PartialMarginal side_from(const json& j, int n, const char* side) {
  const json& nodes = field(j, "nodes");
  const json& values = field(j, "values");
  if (!nodes.is_array() || !values.is_array() || nodes.size() != values.size()) {
    invalid_input(std::string(side) + ": nodes and values must be arrays of equal length");
  }
  std::vector<int> idx;
  std::vector<double> val;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    idx.push_back(node_index(nodes[k], n, "marginal node"));
    val.push_back(number(values[k], "marginal value"));
  }
  if (static_cast<int>(idx.size()) == n) {
    Vector dense = Vector::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) dense(idx[k]) += val[k];
    return PartialMarginal::full(dense);
  }
  return PartialMarginal::on_subset(n, std::move(idx), std::move(val));
}

std::optional<SideMoments> side_moments(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const json& s = j.at(key);
  SideMoments m;
  m.mean = number(field(s, "mean"), "mean");
  if (s.contains("second_moment") && !s.at("second_moment").is_null()) {
    m.second_moment = number(s.at("second_moment"), "second_moment");
  }
  return m;
}

}  // namespace

Graph graph_from_json(const json& j) {
  const json& jn = field(j, "n");
  if (!jn.is_number_integer()) invalid_input("n must be an integer");
  const int n = jn.get<int>();
  if (n < 2) invalid_input("graph needs at least two nodes");
  const json& je = field(j, "edges");
  if (!je.is_array()) invalid_input("edges must be an array");
  std::vector<Edge> edges;
  for (const json& e : je) {
    Edge edge;
    if (e.is_array()) {
      if (e.size() != 2 && e.size() != 3) invalid_input("edge arrays are [from, to] or [from, to, length]");
      edge.from = node_index(e[0], n, "edge endpoint");
      edge.to = node_index(e[1], n, "edge endpoint");
      if (e.size() == 3) edge.length = number(e[2], "edge length");
    } else {
      edge.from = node_index(field(e, "from"), n, "edge endpoint");
      edge.to = node_index(field(e, "to"), n, "edge endpoint");
      if (e.contains("length")) edge.length = number(e.at("length"), "edge length");
    }
    edges.push_back(edge);
  }
  return build_graph(n, std::move(edges));
}

Graph load_graph(const std::filesystem::path& path) { return graph_from_json(read_json(path)); }

PriorSpec prior_spec_from_json(const json& j) {
  PriorSpec s;
  const json& type = field(j, "type");
  if (!type.is_string()) invalid_input("prior type must be a string");
  s.type = type.get<std::string>();
  if (s.type == "boltzmann") {
    s.temperature = number(field(j, "T"), "T");
    s.horizon = field(j, "N").get<int>();
  } else if (s.type == "ruelle_bowen") {
    s.horizon = field(j, "N").get<int>();
  } else if (s.type == "custom") {
    s.p0 = vector_from(field(j, "p0"), "p0");
    const json& steps = field(j, "steps");
    if (!steps.is_array()) invalid_input("steps must be an array of matrices");
    for (const json& m : steps) s.steps.push_back(matrix_from(m, "step matrix"));
    s.horizon = static_cast<int>(s.steps.size());
  } else {
    invalid_input("unknown prior type \"" + s.type + "\"");
  }
  return s;
}

MarkovPrior make_prior(const PriorSpec& spec, const std::optional<Graph>& graph) {
  if (spec.type == "custom") {
    if (graph && graph->size() != spec.p0.size()) invalid_input("custom prior size does not match the graph");
    return custom_markov_prior(spec.p0, spec.steps);
  }
  if (!graph) invalid_input(spec.type + " prior needs a graph");
  if (spec.type == "boltzmann") return boltzmann_prior(*graph, spec.temperature, spec.horizon);
  return ruelle_bowen_prior(*graph, spec.horizon);
}

MarginalSpec marginals_from_json(const json& j, int n) {
  if (!j.is_object()) invalid_input("marginal spec must be an object");
  MarginalSpec s;
  if (j.contains("initial") && !j.at("initial").is_null()) s.initial = side_from(j.at("initial"), n, "initial");
  if (j.contains("final") && !j.at("final").is_null()) s.final = side_from(j.at("final"), n, "final");
  return s;
}

MomentSpec moments_from_json(const json& j) {
  if (!j.is_object()) invalid_input("moment spec must be an object");
  MomentSpec s;
  if (j.contains("order")) s.order = j.at("order").get<int>();
  s.initial = side_moments(j, "initial");
  s.final = side_moments(j, "final");
  if (j.contains("node_values")) {
    const Vector v = vector_from(j.at("node_values"), "node_values");
    s.node_values = std::vector<double>(v.data(), v.data() + v.size());
  }
  return s;
}

json solution_to_json(const BridgeSolution& sol, const FlowEvolution* flow, const DualState* dual) {
  json j;
  json nodes = json::array();
  for (Eigen::Index i = 0; i < sol.q0N.rows(); ++i) nodes.push_back(i + 1);
  j["nodes"] = nodes;
  j["phi0"] = to_json(sol.phi0);
  j["phiN"] = to_json(sol.phiN);
  j["phihat0"] = to_json(sol.phihat0);
  j["phihatN"] = to_json(sol.phihatN);
  j["q0N"] = to_json(sol.q0N);
  j["q0_star"] = to_json(sol.q0_star);
  j["qN_star"] = to_json(sol.qN_star);
  j["iterations"] = sol.iterations;
  j["final_gap"] = finite_or_string(sol.final_gap);
  j["kl_value"] = finite_or_string(sol.kl_value);
  j["log_domain"] = sol.log_domain;
  if (flow) j["marginals"] = to_json(flow->marginals);
  if (dual) {
    j["dual"] = {{"theta", dual->theta},         {"lambda", dual->lambda},
                 {"mu", dual->mu},               {"alpha", dual->alpha},
                 {"beta", dual->beta},           {"objective", finite_or_string(dual->objective)},
                 {"grad_norm", dual->grad_norm}, {"iterations", dual->iterations},
                 {"capped", dual->capped},       {"warnings", dual->warnings}};
  }
  return j;
}

std::string format_number(double x) {
  if (x == 0.0) x = 0.0;  // drop the sign of -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string marginals_csv(const Matrix& marginals) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < marginals.cols(); ++i) out << (i ? "," : "") << i + 1;
  out << '\n';
  for (Eigen::Index t = 0; t < marginals.rows(); ++t) {
    for (Eigen::Index i = 0; i < marginals.cols(); ++i) {
      out << (i ? "," : "") << format_number(marginals(t, i));
    }
    out << '\n';
  }
  return out.str();
}

std::string flow_dot(const Graph& g, const Matrix& flow, int t) {
  std::ostringstream out;
  out << "digraph flow_t" << t << " {\n";
  out << "  label=\"t = " << t << " -> " << t + 1 << "\";\n";
  for (int i = 0; i < g.size(); ++i) out << "  " << i + 1 << ";\n";
  for (const Edge& e : g.edges()) {
    out << "  " << e.from + 1 << " -> " << e.to + 1 << " [label=\""
        << format_number(flow(e.from, e.to)) << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace sbridge::io
