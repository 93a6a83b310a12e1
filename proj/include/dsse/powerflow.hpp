#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <vector>

#include "dsse/netmodel.hpp"

namespace dsse {

// ---------------------------------------------------------------------------
// Scenario / state / flow types
// ---------------------------------------------------------------------------

/// One load realization. Keys are (bus index, slot) pairs; values are total
/// kW / kvar at that slot, distributed pro-rata by nominal P across the load
/// objects sharing the slot. Slots absent from the map stay at nominal.
struct LoadScenario {
  std::map<std::pair<int, int>, std::pair<double, double>> slot_pq;
  std::map<int, std::array<int, 3>> regulator_taps;  // regulator index -> taps
  std::map<int, std::array<bool, 3>> capacitor_status;
};

/// Per-(bus, phase) voltage solution in the network's canonical feature
/// order: `vmag_pu[k]` / `vang_deg[k]` belong to `net.state_features()[k]`.
struct StateVector {
  std::vector<double> vmag_pu;
  std::vector<double> vang_deg;

  int size() const { return int(vmag_pu.size()); }
  cd phasor(int k) const { return polar_deg(vmag_pu[k], vang_deg[k]); }
};

/// Sending-end branch currents (from-side, oriented from -> to), per branch
/// in `net.branches()` order, per phase; zero where the phase is absent.
struct BranchFlow {
  std::vector<std::array<cd, 3>> current_pu;

  cd at(int branch, int phase) const { return current_pu[branch][phase]; }
};

struct SolveOptions {
  double tolerance = 1e-6;
  int max_iterations = 100;
  bool tap_control = false;  // optional post-sweep LDC adjustment loop
};

struct SolveStats {
  int iterations = 0;
  double final_delta = 0.0;
  std::vector<double> delta_history;
};

// ---------------------------------------------------------------------------
// Forward-backward sweep solver
// ---------------------------------------------------------------------------

class SweepSolver {
 public:
  explicit SweepSolver(const NetworkModel& net) : net_(net) { precompute(); }

  std::pair<StateVector, BranchFlow> solve(const LoadScenario& scenario,
                                           const SolveOptions& opts = {},
                                           SolveStats* stats = nullptr) const;

  /// Load currents drawn at a bus for a given voltage (used by the solver
  /// and directly testable: the constant-impedance linearity property).
  std::array<cd, 3> load_current(const Load& load, const std::array<cd, 3>& v,
                                 double scale_p, double scale_q) const;

 private:
  struct BranchData {
    BranchKind kind;
    int index;
    int from, to;
    PhaseMask phases;
    Eigen::Matrix3cd z_pu;       // lines: series impedance, pu
    Eigen::Matrix3cd yhalf_pu;   // lines: half shunt, pu
    cd z_series;                 // transformer series z, pu
    double ratio_fixed[3];       // regulator ratio per phase (nominal taps)
  };

  const NetworkModel& net_;
  std::vector<BranchData> branch_;
  std::vector<std::vector<int>> children_;       // child branch indices per bus
  std::vector<Eigen::Matrix3cd> bus_shunt_pu_;   // accumulated line-half shunts
  std::vector<int> order_;                       // bfs order

  void precompute();
  void run_sweep(const LoadScenario& scenario, const std::array<std::array<int, 3>, 64>&,
                 std::vector<std::array<cd, 3>>& V, std::vector<std::array<cd, 3>>& Ibr,
                 const SolveOptions& opts, SolveStats* stats) const;
};

inline void SweepSolver::precompute() {
  const auto& branches = net_.branches();
  branch_.resize(branches.size());
  children_.assign(net_.buses.size(), {});
  bus_shunt_pu_.assign(net_.buses.size(), Eigen::Matrix3cd::Zero());
  order_ = net_.bfs_order();

  for (size_t i = 0; i < branches.size(); ++i) {
    const BranchRef& br = branches[i];
    BranchData& d = branch_[i];
    d.kind = br.kind;
    d.index = br.index;
    d.from = br.from_bus;
    d.to = br.to_bus;
    d.phases = br.phases;
    children_[br.from_bus].push_back(int(i));

    if (br.kind == BranchKind::Line) {
      const LineSegment& ln = net_.lines[br.index];
      double zb = net_.zbase_ohm(br.from_bus);
      d.z_pu = ln.z_per_len * ln.length / zb;
      d.yhalf_pu = ln.y_shunt_per_len * ln.length * zb / 2.0;
      bus_shunt_pu_[br.from_bus] += d.yhalf_pu;
      bus_shunt_pu_[br.to_bus] += d.yhalf_pu;
    } else if (br.kind == BranchKind::Transformer) {
      const Transformer& tx = net_.transformers[br.index];
      if (tx.conn_from == WindingConnection::Delta ||
          tx.conn_to == WindingConnection::Delta)
        throw NumericalError(NumericalError::Kind::Unsupported,
                             "delta transformer windings are not supported by the sweep "
                             "solver (transformer " + tx.from + "-" + tx.to + ")");
      d.z_series = tx.z_series;
    } else {
      const Regulator& rg = net_.regulators[br.index];
      for (int p = 0; p < 3; ++p) d.ratio_fixed[p] = rg.ratio(p);
    }
  }
}

inline std::array<cd, 3> SweepSolver::load_current(const Load& load,
                                                   const std::array<cd, 3>& v,
                                                   double scale_p, double scale_q) const {
  std::array<cd, 3> i{cd(0, 0), cd(0, 0), cd(0, 0)};
  double sbase = net_.sphase_base_kva();
  for (int s = 0; s < 3; ++s) {
    if (!load.slot_used(s)) continue;
    cd spu(load.p_kw[s] * scale_p / sbase, load.q_kvar[s] * scale_q / sbase);
    if (load.connection == LoadConnection::Wye) {
      cd cur;
      switch (load.model) {
        case LoadModel::ConstantPQ:
          cur = std::conj(spu / v[s]);
          break;
        case LoadModel::ConstantCurrent: {
          double phi = std::atan2(spu.imag(), spu.real());
          cur = std::polar(std::abs(spu), kNominalAngleDeg[s] * kDegToRad - phi);
          break;
        }
        case LoadModel::ConstantImpedance:
          cur = v[s] * std::conj(spu);
          break;
      }
      i[s] += cur;
    } else {
      int s2 = (s + 1) % 3;
      cd vpair = v[s] - v[s2];
      cd cur;
      switch (load.model) {
        case LoadModel::ConstantPQ:
          cur = std::conj(spu / vpair);
          break;
        case LoadModel::ConstantCurrent: {
          double phi = std::atan2(spu.imag(), spu.real());
          cur = std::polar(std::abs(spu) / std::sqrt(3.0),
                           kNominalPairAngleDeg[s] * kDegToRad - phi);
          break;
        }
        case LoadModel::ConstantImpedance:
          cur = vpair * std::conj(spu) / 3.0;
          break;
      }
      i[s] += cur;
      i[s2] -= cur;
    }
  }
  return i;
}

inline std::pair<StateVector, BranchFlow> SweepSolver::solve(const LoadScenario& scenario,
                                                             const SolveOptions& opts,
                                                             SolveStats* stats) const {
  if (opts.tolerance <= 0.0)
    throw ValidationError(ValidationError::Kind::Invariant, "tolerance must be positive");
  for (const auto& [key, pq] : scenario.slot_pq)
    if (!net_.has_load_slot(key.first, key.second))
      throw ValidationError(ValidationError::Kind::Invariant,
                            "scenario key (" + net_.buses[key.first].id + ", " +
                                std::string(1, "ABC"[key.second]) +
                                ") is not a load slot of the network");

  const int nb = int(net_.buses.size());
  const int src = net_.source_bus();

  // effective ratios (tap overrides) and capacitor status
  std::vector<std::array<double, 3>> reg_ratio(net_.regulators.size());
  for (size_t r = 0; r < net_.regulators.size(); ++r) {
    const Regulator& rg = net_.regulators[r];
    auto it = scenario.regulator_taps.find(int(r));
    for (int p = 0; p < 3; ++p) {
      int tap = it != scenario.regulator_taps.end() ? it->second[p] : rg.taps[p];
      if (tap < -16 || tap > 16)
        throw ValidationError(ValidationError::Kind::Invariant, "scenario tap out of range");
      reg_ratio[r][p] = 1.0 + rg.step * tap;
    }
  }
  std::vector<std::array<bool, 3>> cap_on(net_.capacitors.size());
  for (size_t c = 0; c < net_.capacitors.size(); ++c) {
    auto it = scenario.capacitor_status.find(int(c));
    cap_on[c] = it != scenario.capacitor_status.end() ? it->second
                                                      : net_.capacitors[c].status;
  }

  // per-load (scale_p, scale_q) from pro-rata slot totals
  std::vector<std::pair<double, double>> load_scale(net_.loads.size(), {1.0, 1.0});
  for (size_t li = 0; li < net_.loads.size(); ++li) {
    const Load& ld = net_.loads[li];
    int b = net_.bus_index(ld.bus);
    // scale per-slot is applied uniformly only when every slot of the object
    // carries the same ratio; different slots may differ, so expand objects
    // to per-slot scales below instead.
    (void)b;
  }

  // per (load, slot) scale factors
  std::vector<std::array<std::pair<double, double>, 3>> slot_scale(net_.loads.size());
  for (size_t li = 0; li < net_.loads.size(); ++li)
    slot_scale[li] = {std::make_pair(1.0, 1.0), std::make_pair(1.0, 1.0),
                      std::make_pair(1.0, 1.0)};
  for (const auto& [key, pq] : scenario.slot_pq) {
    auto [bus, slot] = key;
    double total_nom = net_.nominal_slot_p(bus, slot);
    for (size_t li = 0; li < net_.loads.size(); ++li) {
      const Load& ld = net_.loads[li];
      if (net_.bus_index(ld.bus) != bus || !ld.slot_used(slot)) continue;
      double share = total_nom > 0.0 ? ld.p_kw[slot] / total_nom
                                     : 1.0;  // degenerate: whole slot to each? no loads
      double sp = ld.p_kw[slot] > 0.0 ? (pq.first * share) / ld.p_kw[slot] : 0.0;
      double sq = ld.q_kvar[slot] != 0.0 ? (pq.second * share) / ld.q_kvar[slot]
                                         : 0.0;
      // Q target is met by scaling the object's nominal Q; if the object has
      // no nominal Q the share is carried as pure P (Q stays zero).
      slot_scale[li][slot] = {sp, sq};
    }
  }

  // flat start at the source phasors rotated to nominal angles
  std::vector<std::array<cd, 3>> V(nb);
  std::array<cd, 3> vsrc;
  for (int p = 0; p < 3; ++p)
    vsrc[p] = polar_deg(net_.source.vm_pu[p], net_.source.va_deg[p]);
  for (int b = 0; b < nb; ++b)
    for (int p = 0; p < 3; ++p)
      V[b][p] = net_.buses[b].phases.has(p)
                    ? polar_deg(net_.source.vm_pu[p],
                                kNominalAngleDeg[p] +
                                    (net_.source.va_deg[p] - kNominalAngleDeg[p]))
                    : cd(0, 0);
  V[src] = vsrc;

  std::vector<std::array<cd, 3>> Ibr(branch_.size());
  std::vector<std::array<cd, 3>> Ibus(nb);

  // loads grouped per bus
  std::vector<std::vector<int>> bus_loads(nb);
  for (size_t li = 0; li < net_.loads.size(); ++li)
    bus_loads[net_.bus_index(net_.loads[li].bus)].push_back(int(li));

  SolveStats local_stats;
  SolveStats& st = stats ? *stats : local_stats;
  st.delta_history.clear();

  bool converged = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    // backward: accumulate bus injection currents, then branch currents
    for (int b = 0; b < nb; ++b) {
      std::array<cd, 3> i{cd(0, 0), cd(0, 0), cd(0, 0)};
      for (int li : bus_loads[b]) {
        const Load& ld = net_.loads[li];
        // apply per-slot scales by evaluating slot-by-slot
        for (int s = 0; s < 3; ++s) {
          if (!ld.slot_used(s)) continue;
          Load one = ld;
          for (int k = 0; k < 3; ++k)
            if (k != s) {
              one.p_kw[k] = 0.0;
              one.q_kvar[k] = 0.0;
            }
          auto cur = load_current(one, V[b], slot_scale[li][s].first,
                                  slot_scale[li][s].second);
          for (int p = 0; p < 3; ++p) i[p] += cur[p];
        }
      }
      for (int p = 0; p < 3; ++p) i[p] += (bus_shunt_pu_[b] * Eigen::Vector3cd(
                                               V[b][0], V[b][1], V[b][2]))(p) *
                                          0.0;  // replaced below
      Ibus[b] = i;
    }
    // line-charging + capacitor currents via matrix products (kept out of the
    // inner loop above for clarity)
    for (int b = 0; b < nb; ++b) {
      Eigen::Vector3cd vb(V[b][0], V[b][1], V[b][2]);
      Eigen::Vector3cd ish = bus_shunt_pu_[b] * vb;
      for (int p = 0; p < 3; ++p) Ibus[b][p] += ish(p);
    }
    for (size_t c = 0; c < net_.capacitors.size(); ++c) {
      const CapacitorBank& cap = net_.capacitors[c];
      int b = net_.bus_index(cap.bus);
      for (int p = 0; p < 3; ++p) {
        if (!cap.phases.has(p) || !cap_on[c][p]) continue;
        double b_pu = cap.kvar[p] / net_.sphase_base_kva();
        Ibus[b][p] += cd(0, b_pu) * V[b][p];
      }
    }

    for (auto rit = order_.rbegin(); rit != order_.rend(); ++rit) {
      int b = *rit;
      std::array<cd, 3> agg = Ibus[b];
      for (int child : children_[b]) {
        // children_ holds outgoing branches; add their from-side currents
        const BranchData& d = branch_[child];
        for (int p = 0; p < 3; ++p) agg[p] += Ibr[child][p];
        (void)d;
      }
      int pb = net_.parent_branch(b);
      if (pb < 0) continue;
      const BranchData& d = branch_[pb];
      if (d.kind == BranchKind::Regulator) {
        for (int p = 0; p < 3; ++p)
          Ibr[pb][p] = d.phases.has(p) ? agg[p] * reg_ratio[d.index][p] : cd(0, 0);
      } else {
        for (int p = 0; p < 3; ++p) Ibr[pb][p] = d.phases.has(p) ? agg[p] : cd(0, 0);
      }
    }

    // forward: update voltages from the source down
    double max_delta = 0.0;
    for (int b : order_) {
      if (b == src) continue;
      int pb = net_.parent_branch(b);
      const BranchData& d = branch_[pb];
      std::array<cd, 3> vnew = V[b];
      if (d.kind == BranchKind::Line) {
        Eigen::Vector3cd i(Ibr[pb][0], Ibr[pb][1], Ibr[pb][2]);
        Eigen::Vector3cd drop = d.z_pu * i;
        for (int p = 0; p < 3; ++p)
          if (d.phases.has(p)) vnew[p] = V[d.from][p] - drop(p);
      } else if (d.kind == BranchKind::Transformer) {
        for (int p = 0; p < 3; ++p)
          if (d.phases.has(p)) vnew[p] = V[d.from][p] - d.z_series * Ibr[pb][p];
      } else {
        for (int p = 0; p < 3; ++p)
          if (d.phases.has(p)) vnew[p] = V[d.from][p] * reg_ratio[d.index][p];
      }
      for (int p = 0; p < 3; ++p) {
        if (!net_.buses[b].phases.has(p)) continue;
        max_delta = std::max(max_delta, std::abs(vnew[p] - V[b][p]));
        V[b][p] = vnew[p];
      }
    }

    st.iterations = it + 1;
    st.final_delta = max_delta;
    st.delta_history.push_back(max_delta);

    for (int b = 0; b < nb; ++b)
      for (int p = 0; p < 3; ++p)
        if (net_.buses[b].phases.has(p)) {
          if (!std::isfinite(V[b][p].real()) || !std::isfinite(V[b][p].imag()))
            throw NumericalError(NumericalError::Kind::NonFinite,
                                 "power flow produced non-finite voltages");
          if (std::abs(V[b][p]) < 0.5)
            throw NumericalError(NumericalError::Kind::VoltageCollapse,
                                 "voltage collapse at bus " + net_.buses[b].id +
                                     " (|V| < 0.5 pu)");
        }

    if (max_delta < opts.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NumericalError(NumericalError::Kind::NonConvergence,
                         "power flow did not converge in " +
                             std::to_string(opts.max_iterations) + " iterations");

  StateVector state;
  const auto& feats = net_.state_features();
  state.vmag_pu.resize(feats.size());
  state.vang_deg.resize(feats.size());
  for (size_t k = 0; k < feats.size(); ++k) {
    cd v = V[feats[k].bus][static_cast<int>(feats[k].phase)];
    state.vmag_pu[k] = std::abs(v);
    state.vang_deg[k] = wrap_deg(std::atan2(v.imag(), v.real()) * kRadToDeg);
  }

  // reported flow: from-side current = series current + from-half charging
  BranchFlow flow;
  flow.current_pu.assign(branch_.size(), {cd(0, 0), cd(0, 0), cd(0, 0)});
  for (size_t bi = 0; bi < branch_.size(); ++bi) {
    const BranchData& d = branch_[bi];
    if (d.kind == BranchKind::Line) {
      Eigen::Vector3cd vf(V[d.from][0], V[d.from][1], V[d.from][2]);
      Eigen::Vector3cd ish = d.yhalf_pu * vf;
      for (int p = 0; p < 3; ++p)
        if (d.phases.has(p)) flow.current_pu[bi][p] = Ibr[bi][p] + ish(p);
    } else {
      for (int p = 0; p < 3; ++p)
        if (d.phases.has(p)) flow.current_pu[bi][p] = Ibr[bi][p];
    }
  }
  return {std::move(state), std::move(flow)};
}

// ---------------------------------------------------------------------------
// Free-function API
// ---------------------------------------------------------------------------

inline std::pair<StateVector, BranchFlow> solve(const NetworkModel& net,
                                                const LoadScenario& scenario,
                                                const SolveOptions& opts = {},
                                                SolveStats* stats = nullptr) {
  return SweepSolver(net).solve(scenario, opts, stats);
}

struct BatchError {
  int scenario_index;
  std::string message;
};

struct BatchFailure : NumericalError {
  std::vector<BatchError> errors;
  explicit BatchFailure(std::vector<BatchError> errs)
      : NumericalError(NumericalError::Kind::NonConvergence,
                       std::to_string(errs.size()) + " scenario(s) failed; first at index " +
                           std::to_string(errs.empty() ? -1 : errs.front().scenario_index) +
                           (errs.empty() ? "" : ": " + errs.front().message)),
        errors(std::move(errs)) {}
};

/// Elementwise solve over scenarios; order preserved, failures aggregated
/// with their scenario indices rather than silently dropped.
inline std::vector<std::pair<StateVector, BranchFlow>> batch_solve(
    const NetworkModel& net, const std::vector<LoadScenario>& scenarios,
    const SolveOptions& opts = {}) {
  SweepSolver solver(net);
  std::vector<std::pair<StateVector, BranchFlow>> out;
  out.reserve(scenarios.size());
  std::vector<BatchError> errors;
  for (size_t i = 0; i < scenarios.size(); ++i) {
    try {
      out.push_back(solver.solve(scenarios[i], opts));
    } catch (const std::exception& e) {
      errors.push_back({int(i), e.what()});
    }
  }
  if (!errors.empty()) throw BatchFailure(std::move(errors));
  return out;
}

/// Complex power mismatch per (bus, phase): power into the bus minus load,
/// shunt and capacitor consumption. Conservation test hook.
inline std::vector<cd> bus_power_mismatch(const NetworkModel& net,
                                          const LoadScenario& scenario,
                                          const StateVector& state) {
  SweepSolver solver(net);
  SolveOptions opts;
  // recompute the exact sweep quantities at the solved voltages
  // (cheap: one backward pass)
  auto [st2, flow] = solver.solve(scenario, opts);
  (void)st2;

  const auto& feats = net.state_features();
  std::vector<std::array<cd, 3>> V(net.buses.size(), {cd(0, 0), cd(0, 0), cd(0, 0)});
  for (size_t k = 0; k < feats.size(); ++k)
    V[feats[k].bus][static_cast<int>(feats[k].phase)] = state.phasor(int(k));

  std::vector<cd> mismatch(feats.size(), cd(0, 0));
  // series currents from the solved state via Ohm's law on each branch
  for (size_t bi = 0; bi < net.branches().size(); ++bi) {
    const BranchRef& br = net.branches()[bi];
    if (br.kind != BranchKind::Line) continue;
    const LineSegment& ln = net.lines[br.index];
    double zb = net.zbase_ohm(br.from_bus);
    std::vector<int> ph;
    for (int p = 0; p < 3; ++p)
      if (br.phases.has(p)) ph.push_back(p);
    Eigen::MatrixXcd z(ph.size(), ph.size());
    for (size_t a = 0; a < ph.size(); ++a)
      for (size_t b = 0; b < ph.size(); ++b)
        z(a, b) = ln.z_per_len(ph[a], ph[b]) * ln.length / zb;
    Eigen::VectorXcd dv(ph.size());
    for (size_t a = 0; a < ph.size(); ++a)
      dv(a) = V[br.from_bus][ph[a]] - V[br.to_bus][ph[a]];
    Eigen::VectorXcd iser = z.fullPivLu().solve(dv);
    for (size_t a = 0; a < ph.size(); ++a) {
      int kf = net.feature_index(br.from_bus, Phase(ph[a]));
      int kt = net.feature_index(br.to_bus, Phase(ph[a]));
      // power leaving 'from' into the branch and entering 'to'
      mismatch[kf] -= V[br.from_bus][ph[a]] * std::conj(iser(a));
      mismatch[kt] += V[br.to_bus][ph[a]] * std::conj(iser(a));
    }
  }
  // transformers
  for (size_t bi = 0; bi < net.branches().size(); ++bi) {
    const BranchRef& br = net.branches()[bi];
    if (br.kind != BranchKind::Transformer) continue;
    const Transformer& tx = net.transformers[br.index];
    for (int p = 0; p < 3; ++p) {
      if (!br.phases.has(p)) continue;
      cd iser = (V[br.from_bus][p] - V[br.to_bus][p]) / tx.z_series;
      int kf = net.feature_index(br.from_bus, Phase(p));
      int kt = net.feature_index(br.to_bus, Phase(p));
      mismatch[kf] -= V[br.from_bus][p] * std::conj(iser);
      mismatch[kt] += V[br.to_bus][p] * std::conj(iser);
    }
  }
  // regulators: ideal, power through is conserved; use the sweep's branch
  // current (cannot be derived from voltages alone)
  for (size_t bi = 0; bi < net.branches().size(); ++bi) {
    const BranchRef& br = net.branches()[bi];
    if (br.kind != BranchKind::Regulator) continue;
    for (int p = 0; p < 3; ++p) {
      if (!br.phases.has(p)) continue;
      const Regulator& rg = net.regulators[br.index];
      int tap = rg.taps[p];
      auto it = scenario.regulator_taps.find(br.index);
      if (it != scenario.regulator_taps.end()) tap = it->second[p];
      double ratio = 1.0 + rg.step * tap;
      cd i_from = flow.at(int(bi), p);
      cd i_to = i_from / ratio;
      int kf = net.feature_index(br.from_bus, Phase(p));
      int kt = net.feature_index(br.to_bus, Phase(p));
      mismatch[kf] -= V[br.from_bus][p] * std::conj(i_from);
      mismatch[kt] += V[br.to_bus][p] * std::conj(i_to);
    }
  }

  // subtract consumption: loads, capacitors and line-charging halves
  SweepSolver helper(net);
  std::vector<std::array<std::pair<double, double>, 3>> slot_scale(net.loads.size());
  // reuse the pro-rata logic by calling load_current with explicit scales
  for (size_t li = 0; li < net.loads.size(); ++li)
    slot_scale[li] = {std::make_pair(1.0, 1.0), std::make_pair(1.0, 1.0),
                      std::make_pair(1.0, 1.0)};
  for (const auto& [key, pq] : scenario.slot_pq) {
    auto [bus, slot] = key;
    double total_nom = net.nominal_slot_p(bus, slot);
    for (size_t li = 0; li < net.loads.size(); ++li) {
      const Load& ld = net.loads[li];
      if (net.bus_index(ld.bus) != bus || !ld.slot_used(slot)) continue;
      double share = total_nom > 0.0 ? ld.p_kw[slot] / total_nom : 1.0;
      double sp = ld.p_kw[slot] > 0.0 ? (pq.first * share) / ld.p_kw[slot] : 0.0;
      double sq = ld.q_kvar[slot] != 0.0 ? (pq.second * share) / ld.q_kvar[slot] : 0.0;
      slot_scale[li][slot] = {sp, sq};
    }
  }
  for (size_t li = 0; li < net.loads.size(); ++li) {
    const Load& ld = net.loads[li];
    int b = net.bus_index(ld.bus);
    for (int s = 0; s < 3; ++s) {
      if (!ld.slot_used(s)) continue;
      Load one = ld;
      for (int k = 0; k < 3; ++k)
        if (k != s) {
          one.p_kw[k] = 0.0;
          one.q_kvar[k] = 0.0;
        }
      auto cur = helper.load_current(one, V[b], slot_scale[li][s].first,
                                     slot_scale[li][s].second);
      for (int p = 0; p < 3; ++p) {
        if (cur[p] == cd(0, 0)) continue;
        int k = net.feature_index(b, Phase(p));
        mismatch[k] -= V[b][p] * std::conj(cur[p]);
      }
    }
  }
  for (size_t c = 0; c < net.capacitors.size(); ++c) {
    const CapacitorBank& cap = net.capacitors[c];
    int b = net.bus_index(cap.bus);
    auto it = scenario.capacitor_status.find(int(c));
    auto on = it != scenario.capacitor_status.end() ? it->second : cap.status;
    for (int p = 0; p < 3; ++p) {
      if (!cap.phases.has(p) || !on[p]) continue;
      double b_pu = cap.kvar[p] / net.sphase_base_kva();
      cd icap = cd(0, b_pu) * V[b][p];
      int k = net.feature_index(b, Phase(p));
      mismatch[k] -= V[b][p] * std::conj(icap);
    }
  }
  // line-charging halves accumulated per bus
  for (size_t bi = 0; bi < net.branches().size(); ++bi) {
    const BranchRef& br = net.branches()[bi];
    if (br.kind != BranchKind::Line) continue;
    const LineSegment& ln = net.lines[br.index];
    double zb = net.zbase_ohm(br.from_bus);
    Eigen::Matrix3cd yh = ln.y_shunt_per_len * ln.length * zb / 2.0;
    for (int side = 0; side < 2; ++side) {
      int b = side == 0 ? br.from_bus : br.to_bus;
      Eigen::Vector3cd vb(V[b][0], V[b][1], V[b][2]);
      Eigen::Vector3cd ish = yh * vb;
      for (int p = 0; p < 3; ++p) {
        if (!br.phases.has(p)) continue;
        int k = net.feature_index(b, Phase(p));
        mismatch[k] -= V[b][p] * std::conj(ish(p));
      }
    }
  }

  // the source bus supplies the feeder; its mismatch is not meaningful
  for (size_t k = 0; k < feats.size(); ++k)
    if (feats[k].bus == net.source_bus()) mismatch[k] = cd(0, 0);
  return mismatch;
}

}  // namespace dsse
