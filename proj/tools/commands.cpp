#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>

#include "sbridge/bridge.hpp"
#include "sbridge/io.hpp"
#include "sbridge/moments.hpp"
#include "sbridge/oracle.hpp"

namespace sbridge::cli {

namespace {

namespace fs = std::filesystem;

struct Problem {
  Graph graph;
  MarkovPrior prior;
  std::optional<io::MarginalSpec> marginals;
  std::optional<MomentSpec> moments;
};

struct Solved {
  BridgeSolution bridge;
  std::optional<DualState> dual;
};

Problem load_problem(const RunConfig& c) {
  if (c.marginals_path.has_value() == c.moments_path.has_value()) {
    invalid_input("give exactly one of --marginals and --moments");
  }
  if (c.tol && !(*c.tol > 0.0)) invalid_input("--tol must be positive");
  if (c.max_iter && *c.max_iter <= 0) invalid_input("--max-iter must be positive");
  Graph g = io::load_graph(c.graph_path);
  MarkovPrior prior = io::make_prior(io::prior_spec_from_json(io::read_json(c.prior_path)), g);
  Problem p{std::move(g), std::move(prior), std::nullopt, std::nullopt};
  if (c.marginals_path) p.marginals = io::marginals_from_json(io::read_json(*c.marginals_path), p.graph.size());
  if (c.moments_path) p.moments = io::moments_from_json(io::read_json(*c.moments_path));
  return p;
}

Solved solve(const Problem& p, const RunConfig& c) {
  if (p.marginals) {
    SolverOptions opt;
    if (c.tol) opt.tol = *c.tol;
    if (c.max_iter) opt.max_iter = *c.max_iter;
    return {imsbp_solve(p.prior, p.marginals->initial, p.marginals->final, opt), std::nullopt};
  }
  MomentOptions opt;
  if (c.tol) opt.tol = *c.tol;
  if (c.max_iter) opt.max_iter = *c.max_iter;
  const MomentSolution m = solve_moment_bridge(p.prior, *p.moments, opt);
  return {moment_bridge_solution(p.prior, m, *p.moments), m.dual};
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6e", x);
  return buf;
}

// Runs body and maps failures onto exit codes.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const io::IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::kNonConvergence:
        err << "iterations: " << e.iterations() << "\nfinal gap: " << num(e.final_gap()) << '\n';
        return kNonConvergence;
      case ErrorKind::kInfeasible:
        return kInfeasible;
      case ErrorKind::kInvalidInput:
        return kIoFailure;
    }
    return kIoFailure;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIoFailure;
  }
}

}  // namespace

int cmd_solve(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    for (const auto& f : config.formats) {
      if (f != "csv" && f != "json" && f != "dot") invalid_input("unknown output format \"" + f + "\"");
    }
    const Problem p = load_problem(config);
    const Solved s = solve(p, config);
    const FlowEvolution flow = recover_flow(p.prior, s.bridge);

    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io::IoError("cannot create " + dir.string() + ": " + ec.message());
    auto wants = [&](const char* f) {
      return std::find(config.formats.begin(), config.formats.end(), f) != config.formats.end();
    };
    if (wants("csv")) io::write_text(dir / "marginals.csv", io::marginals_csv(flow.marginals));
    if (wants("json")) {
      const auto j = io::solution_to_json(s.bridge, &flow, s.dual ? &*s.dual : nullptr);
      io::write_text(dir / "solution.json", j.dump(2) + "\n");
    }
    if (wants("dot")) {
      for (std::size_t t = 0; t < flow.edge_flows.size(); ++t) {
        io::write_text(dir / ("flows_t" + std::to_string(t) + ".dot"),
                       io::flow_dot(p.graph, flow.edge_flows[t], static_cast<int>(t)));
      }
    }
    out << "iterations: " << s.bridge.iterations << '\n'
        << "final gap: " << num(s.bridge.final_gap) << '\n'
        << "kl: " << num(s.bridge.kl_value) << '\n';
    if (s.dual) {
      for (const auto& w : s.dual->warnings) err << "warning: " << w << '\n';
    }
    return static_cast<int>(kOk);
  });
}

int cmd_verify(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Problem p = load_problem(config);
    const int n = p.prior.size();
    if (n * n > 400) invalid_input("instance too large for the oracle (n^2 > 400)");
    const Matrix p0N = endpoint_joint(p.prior);
    const auto constraints = p.marginals
                                 ? marginal_constraints(n, p.marginals->initial, p.marginals->final)
                                 : moment_constraints(n, *p.moments);

    Solved s;
    try {
      s = solve(p, config);
    } catch (const SolverError& e) {
      if (e.kind() != ErrorKind::kInfeasible) throw;
      err << "solver: " << e.what() << '\n';
      try {
        const OracleResult o = brute_force_bridge(p0N, constraints);
        err << "oracle residual: " << num(o.residual) << '\n';
      } catch (const SolverError& oe) {
        err << "oracle residual: " << num(oe.final_gap()) << '\n';
      }
      return static_cast<int>(kInfeasible);
    }
    const OracleResult o = brute_force_bridge(p0N, constraints);
    const double deviation = (s.bridge.q0N - o.q).cwiseAbs().maxCoeff();
    out << "deviation: " << num(deviation) << '\n'
        << "kl solver: " << num(s.bridge.kl_value) << '\n'
        << "kl oracle: " << num(o.kl) << '\n'
        << "oracle residual: " << num(o.residual) << '\n';
    if (deviation < 1e-6) return static_cast<int>(kOk);
    err << "solver and oracle disagree\n";
    return static_cast<int>(kNonConvergence);
  });
}

int cmd_prior_info(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Graph g = io::load_graph(config.graph_path);
    out << "nodes: " << g.size() << "\nedges: " << g.edges().size() << '\n';
    if (is_strongly_connected(g)) {
      const PerronResult pr = perron(g);
      out << "lambda_A: " << io::format_number(pr.spectral_radius) << '\n'
          << "H_G: " << io::format_number(std::log(pr.spectral_radius)) << '\n'
          << "period: " << pr.period << '\n';
    } else {
      out << "lambda_A: n/a (graph is not strongly connected)\n";
    }
    if (!config.prior_path.empty()) {
      const MarkovPrior prior = io::make_prior(io::prior_spec_from_json(io::read_json(config.prior_path)), g);
      Matrix m(prior.horizon() + 1, prior.size());
      for (int t = 0; t <= prior.horizon(); ++t) m.row(t) = marginal(prior, t).transpose();
      out << "marginals:\n" << io::marginals_csv(m);
    }
    return static_cast<int>(kOk);
  });
}

}  // namespace sbridge::cli
