#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbridge/bridge.hpp"
#include "sbridge/graph.hpp"
#include "sbridge/marginal.hpp"
#include "sbridge/moments.hpp"
#include "sbridge/prior.hpp"

// JSON/CSV/DOT boundary. Files use 1-based node labels.
namespace sbridge::io {

using nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// {"n": 3, "edges": [[1, 2], [2, 3, 0.5], {"from": 3, "to": 1, "length": 2}]}
Graph graph_from_json(const json& j);
Graph load_graph(const std::filesystem::path& path);

struct PriorSpec {
  std::string type;  // boltzmann | ruelle_bowen | custom
  double temperature = 1.0;
  int horizon = 0;
  Vector p0;
  std::vector<Matrix> steps;
};

PriorSpec prior_spec_from_json(const json& j);
MarkovPrior make_prior(const PriorSpec& spec, const std::optional<Graph>& graph);

struct MarginalSpec {
  std::optional<PartialMarginal> initial;
  std::optional<PartialMarginal> final;
};

MarginalSpec marginals_from_json(const json& j, int n);
MomentSpec moments_from_json(const json& j);

json solution_to_json(const BridgeSolution& sol, const FlowEvolution* flow = nullptr,
                      const DualState* dual = nullptr);

// Header row of node labels, then one row per time step, 10 significant
// digits.
std::string marginals_csv(const Matrix& marginals);

// Mass moved along every graph edge during (t, t + 1).
std::string flow_dot(const Graph& g, const Matrix& flow, int t);

std::string format_number(double x);

}  // namespace sbridge::io
