#pragma once

// Parallel interval decomposition: capital cannot cross fixed points, so the
// dynamics restricted to each X_k evolve independently; the global density is
// recovered as w_{k,t} f_{k,t} with the weight recursion
//   w_{k,t+1} = w_{k,t} E_{k,t}[n] / sum_k' w_{k',t} E_{k',t}[n].

#include <cmath>
#include <optional>
#include <vector>

#include "capflow/distribution.hpp"
#include "capflow/dynamics.hpp"
#include "capflow/errors.hpp"
#include "capflow/function_model.hpp"

namespace capflow {

struct ParallelComponent {
  std::size_t k = 0;                     // interval index into decomp.intervals
  bool skipped = true;                   // geometric-empty or zero initial mass
  double weight = 0.0;                   // w_{k,t}
  std::optional<GridDistribution> dist;  // normalized f_{k,t} on the sub-grid
  std::vector<double> growth_history;    // E_{k,t} for t = 0..
};

struct ParallelState {
  IntervalDecomposition decomp;
  GridPtr global_grid;
  std::vector<ParallelComponent> components;
  int t = 0;
  std::vector<double> growth_history; // global E_t at each step taken

  double weight_sum() const {
    double s = 0.0;
    for (const auto& c : components) s += c.weight;
    return s;
  }
};

// Splits f_0 into normalized restrictions per interval. Initial weights are
// the restriction masses (so they sum to one and reconstruction at t = 0
// reproduces f_0). Intervals with zero mass keep weight 0 forever.
inline ParallelState split_initial(const GridDistribution& f0,
                                   const IntervalDecomposition& decomp) {
  if (f0.has_atoms()) {
    throw ConfigError("split_initial: atomless initial density required");
  }
  ParallelState st;
  st.decomp = decomp;
  st.global_grid = f0.grid_ptr();
  const Grid& g = f0.grid();

  std::vector<double> masses(decomp.intervals.size(), 0.0);
  double total = 0.0;
  st.components.resize(decomp.intervals.size());
  for (std::size_t k = 0; k < decomp.intervals.size(); ++k) {
    ParallelComponent& comp = st.components[k];
    comp.k = k;
    const IntervalInfo& iv = decomp.intervals[k];
    if (iv.empty) continue;
    const double lo = std::max(iv.lo, g.lo());
    const double hi = std::min(iv.hi, g.hi());
    if (!(lo < hi)) continue;
    GridPtr sub = Grid::restricted(g, lo, hi);
    std::vector<double> vals(sub->size());
    for (std::size_t i = 0; i < sub->size(); ++i) {
      vals[i] = f0.density_at(sub->node(i), InterpScheme::Linear);
    }
    GridDistribution restriction(sub, std::move(vals));
    const double mass = restriction.density_mass();
    if (!(mass > 1e-15)) continue; // EmptyIntervalMass: skipped, weight 0
    masses[k] = mass;
    total += mass;
    comp.skipped = false;
    comp.dist = restriction.normalized();
  }
  if (!(total > 0.0)) throw ZeroMass("split_initial: f_0 carries no mass on X");
  for (std::size_t k = 0; k < st.components.size(); ++k) {
    st.components[k].weight = masses[k] / total;
  }
  return st;
}

// Advances every live component one generation and updates the weights.
// Returns the global growth factor E_t = sum_k w_{k,t} E_{k,t}.
inline double step_parallel(ParallelState& st, const FunctionSpec& n,
                            const FunctionSpec& tau, StepOptions opts = {}) {
  double global_growth = 0.0;
  std::vector<double> growths(st.components.size(), 0.0);
  for (auto& comp : st.components) {
    if (comp.skipped) continue;
    StepResult r = step_density(*comp.dist, n, tau, opts);
    comp.dist = std::move(r.dist);
    comp.growth_history.push_back(r.growth);
    growths[comp.k] = r.growth;
    global_growth += comp.weight * r.growth;
  }
  if (!(global_growth > 0.0)) {
    throw ZeroMass("step_parallel: no live component produced mass");
  }
  for (auto& comp : st.components) {
    if (comp.skipped) continue;
    comp.weight = comp.weight * growths[comp.k] / global_growth;
  }
  st.t += 1;
  st.growth_history.push_back(global_growth);
  return global_growth;
}

// Assembles the global density w_k f_{k,t} on the global grid; a node shared
// by two adjacent intervals (a fixed point) takes the average of both sides.
inline GridDistribution reconstruct(const ParallelState& st) {
  const Grid& g = *st.global_grid;
  std::vector<double> vals(g.size(), 0.0);
  std::vector<int> hits(g.size(), 0);
  for (const auto& comp : st.components) {
    if (comp.skipped) continue;
    const Grid& sub = comp.dist->grid();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.node(i);
      if (x < sub.lo() || x > sub.hi()) continue;
      vals[i] += comp.weight * comp.dist->density_at(x, InterpScheme::Linear);
      hits[i] += 1;
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (hits[i] > 1) vals[i] /= static_cast<double>(hits[i]);
  }
  return GridDistribution(st.global_grid, std::move(vals));
}

} // namespace capflow
