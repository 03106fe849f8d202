#include "microgrid/reference.hpp"

#include <stdexcept>

namespace microgrid {

StackedProblem assemble_stacked(std::span<Agent* const> agents) {
  if (agents.empty()) throw std::invalid_argument("assemble_stacked: no agents");
  const int t = agents.front()->horizon();

  std::vector<AgentEncoding> encodings;
  encodings.reserve(agents.size());
  Eigen::Index n_total = 0, m_total = 0;
  for (const Agent* a : agents) {
    if (a->horizon() != t)
      throw std::invalid_argument("assemble_stacked: horizon mismatch for " + a->name());
    encodings.push_back(a->encoding());
    n_total += encodings.back().qp.num_vars();
    m_total += encodings.back().qp.num_eq();
  }
  m_total += t;  // power balance rows

  StackedProblem out;
  out.qp.q.resize(n_total);
  out.qp.b = Vec::Zero(m_total);
  out.qp.lower.resize(n_total);
  out.qp.upper.resize(n_total);

  std::vector<Eigen::Triplet<double>> pt, at;
  Eigen::Index voff = 0, roff = 0;
  for (std::size_t i = 0; i < encodings.size(); ++i) {
    const auto& enc = encodings[i];
    const Eigen::Index n = enc.qp.num_vars();
    const Eigen::Index m = enc.qp.num_eq();
    out.offsets.push_back(voff);
    out.sizes.push_back(n);

    for (int k = 0; k < enc.qp.P.outerSize(); ++k) {
      for (qp::SpMat::InnerIterator it(enc.qp.P, k); it; ++it)
        pt.emplace_back(static_cast<int>(it.row() + voff), static_cast<int>(it.col() + voff),
                        it.value());
    }
    for (int k = 0; k < enc.qp.A.outerSize(); ++k) {
      for (qp::SpMat::InnerIterator it(enc.qp.A, k); it; ++it)
        at.emplace_back(static_cast<int>(it.row() + roff), static_cast<int>(it.col() + voff),
                        it.value());
    }
    // balance rows: sum_i (S_i x_i)(tau) = 0
    for (int k = 0; k < enc.schedule_map.outerSize(); ++k) {
      for (qp::SpMat::InnerIterator it(enc.schedule_map, k); it; ++it)
        at.emplace_back(static_cast<int>(m_total - t + it.row()),
                        static_cast<int>(it.col() + voff), it.value());
    }

    out.qp.q.segment(voff, n) = enc.qp.q;
    out.qp.b.segment(roff, m) = enc.qp.b;
    out.qp.lower.segment(voff, n) = enc.qp.lower;
    out.qp.upper.segment(voff, n) = enc.qp.upper;
    voff += n;
    roff += m;
  }

  out.qp.P.resize(n_total, n_total);
  out.qp.P.setFromTriplets(pt.begin(), pt.end());
  out.qp.P.makeCompressed();
  out.qp.A.resize(m_total, n_total);
  out.qp.A.setFromTriplets(at.begin(), at.end());
  out.qp.A.makeCompressed();
  return out;
}

CentralizedSolution solve_centralized(std::span<Agent* const> agents,
                                      qp::SolverSettings settings) {
  auto stacked = assemble_stacked(agents);

  // presolve naming: agent-level bound conflicts are the identifiable case
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto lo = stacked.qp.lower.segment(stacked.offsets[i], stacked.sizes[i]);
    const auto up = stacked.qp.upper.segment(stacked.offsets[i], stacked.sizes[i]);
    for (Eigen::Index k = 0; k < lo.size(); ++k) {
      if (lo[k] > up[k] + 1e-12)
        throw std::runtime_error("solve_centralized: infeasible bounds in agent '" +
                                 agents[i]->name() + "'");
    }
  }

  auto raw = qp::solve_qp(stacked.qp, settings);
  if (raw.status == qp::SolveStatus::Infeasible)
    throw std::runtime_error(
        "solve_centralized: stacked program infeasible (power balance vs agent constraints)");

  CentralizedSolution out;
  out.raw = std::move(raw);
  out.plans.reserve(agents.size());
  out.objective = 0.0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    out.plans.push_back(
        agents[i]->plan_from(out.raw.x.segment(stacked.offsets[i], stacked.sizes[i])));
    out.objective += agents[i]->local_cost(out.plans.back().p);
  }
  return out;
}

SimulationResult run_centralized_mpc(const Scenario& scenario, bool prescient) {
  return run_mpc(scenario, prescient ? RunMode::Prescient : RunMode::Centralized);
}

}  // namespace microgrid
