#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsse/common.hpp"
#include "dsse/rng.hpp"

namespace dsse {

using json = nlohmann::json;  // std::map-backed: serialization sorts keys,
                              // which is what makes the canonical form stable

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Bus {
  std::string id;
  PhaseMask phases;
  double base_kv = 0.0;  // line-to-line
  bool is_source = false;
};

struct LineSegment {
  std::string from, to;
  PhaseMask phases;
  double length = 1.0;                 // multiplier on the per-unit-length matrices
  Eigen::Matrix3cd z_per_len;          // ohms per unit length, absent phases zeroed
  Eigen::Matrix3cd y_shunt_per_len;    // siemens per unit length (total, split pi)
};

enum class WindingConnection { WyeGrounded, Wye, Delta };

struct Transformer {
  std::string from, to;  // high side, low side
  WindingConnection conn_from = WindingConnection::WyeGrounded;
  WindingConnection conn_to = WindingConnection::WyeGrounded;
  double kv_high = 0.0, kv_low = 0.0;
  cd z_series;  // per-unit on the system power base
};

struct RegulatorControl {
  double vreg_v = 122.0;
  double bandwidth_v = 2.0;
  double pt_ratio = 120.0;
  double ct_primary_a = 100.0;
  double r_v = 0.0, x_v = 0.0;
};

struct Regulator {
  std::string from, to;
  PhaseMask phases;
  std::array<int, 3> taps = {0, 0, 0};  // in [-16, 16]
  double step = 0.00625;                // per-unit voltage per tap
  std::optional<RegulatorControl> control;

  double ratio(int phase) const { return 1.0 + step * taps[phase]; }
};

struct CapacitorBank {
  std::string bus;
  PhaseMask phases;
  std::array<double, 3> kvar = {0, 0, 0};
  std::array<bool, 3> status = {false, false, false};
};

enum class LoadConnection { Wye, Delta };
enum class LoadModel { ConstantPQ, ConstantCurrent, ConstantImpedance };

/// One load object. Slots are per-phase for wye; for delta the slot is the
/// leading phase of the pair (A -> AB, B -> BC, C -> CA).
struct Load {
  std::string bus;
  PhaseMask phases;  // phases physically touched
  LoadConnection connection = LoadConnection::Wye;
  LoadModel model = LoadModel::ConstantPQ;
  std::array<double, 3> p_kw = {0, 0, 0};
  std::array<double, 3> q_kvar = {0, 0, 0};

  bool slot_used(int s) const { return p_kw[s] != 0.0 || q_kvar[s] != 0.0; }
};

struct SourceSpec {
  std::string bus;
  std::array<double, 3> vm_pu = {1.0, 1.0, 1.0};
  std::array<double, 3> va_deg = {0.0, -120.0, 120.0};
  double power_base_mva = 2.5;
};

/// A (bus, phase) pair in the network's canonical feature order.
struct BusPhase {
  int bus = -1;
  Phase phase = Phase::A;
  bool operator==(const BusPhase&) const = default;
  bool operator<(const BusPhase& o) const {
    return bus != o.bus ? bus < o.bus : phase < o.phase;
  }
};

enum class BranchKind { Line, Transformer, Regulator };

/// Flattened branch view used by the solver and observability code.
struct BranchRef {
  BranchKind kind;
  int index;  // into the matching vector
  int from_bus, to_bus;
  PhaseMask phases;
};

class NetworkModel {
 public:
  SourceSpec source;
  std::vector<Bus> buses;
  std::vector<LineSegment> lines;
  std::vector<Transformer> transformers;
  std::vector<Regulator> regulators;
  std::vector<CapacitorBank> capacitors;
  std::vector<Load> loads;

  // -- derived (filled by validate()) --

  int bus_index(const std::string& id) const {
    auto it = bus_index_.find(id);
    if (it == bus_index_.end())
      throw ValidationError(ValidationError::Kind::DanglingId, "unknown bus id: " + id);
    return it->second;
  }
  bool has_bus(const std::string& id) const { return bus_index_.count(id) != 0; }

  int source_bus() const { return source_bus_; }

  const std::vector<BranchRef>& branches() const { return branches_; }
  /// Index of the branch between two buses (either direction), -1 if none.
  int branch_between(int a, int b) const {
    auto it = branch_by_pair_.find(a < b ? std::make_pair(a, b) : std::make_pair(b, a));
    return it == branch_by_pair_.end() ? -1 : it->second;
  }
  const std::vector<int>& branches_at(int bus) const { return bus_branches_[bus]; }

  /// Parent branch in the tree rooted at the source (-1 for the source bus).
  int parent_branch(int bus) const { return parent_branch_[bus]; }
  /// Buses ordered source-first by BFS depth.
  const std::vector<int>& bfs_order() const { return bfs_order_; }

  /// Canonical feature order: buses in document order, phases A<B<C.
  const std::vector<BusPhase>& state_features() const { return features_; }
  int feature_index(int bus, Phase p) const {
    auto it = feature_index_.find({bus, p});
    return it == feature_index_.end() ? -1 : it->second;
  }

  /// Line-to-line voltage base of the bus's zone, kV.
  double zone_kv(int bus) const { return zone_kv_[bus]; }
  double zbase_ohm(int bus) const {
    return zone_kv_[bus] * zone_kv_[bus] / source.power_base_mva;
  }
  /// Per-phase power base, kVA.
  double sphase_base_kva() const { return source.power_base_mva * 1000.0 / 3.0; }

  /// Total nominal P (kW) per (bus, slot), for pro-rata scenario application.
  double nominal_slot_p(int bus, int slot) const {
    auto it = slot_p_.find({bus, slot});
    return it == slot_p_.end() ? 0.0 : it->second;
  }
  bool has_load_slot(int bus, int slot) const { return slot_p_.count({bus, slot}) != 0; }
  /// All (bus, slot) load keys in canonical order.
  const std::vector<std::pair<int, int>>& load_slots() const { return load_slots_; }

  void validate();

 private:
  std::map<std::string, int> bus_index_;
  int source_bus_ = -1;
  std::vector<BranchRef> branches_;
  std::map<std::pair<int, int>, int> branch_by_pair_;
  std::vector<std::vector<int>> bus_branches_;
  std::vector<int> parent_branch_;
  std::vector<int> bfs_order_;
  std::vector<BusPhase> features_;
  std::map<BusPhase, int> feature_index_;
  std::vector<double> zone_kv_;
  std::map<std::pair<int, int>, double> slot_p_;
  std::vector<std::pair<int, int>> load_slots_;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace detail {

inline void require(bool ok, ValidationError::Kind kind, const std::string& msg,
                    const std::string& where = {}) {
  if (!ok) throw ValidationError(kind, msg, where);
}

}  // namespace detail

inline void NetworkModel::validate() {
  using detail::require;
  using VK = ValidationError::Kind;

  bus_index_.clear();
  for (size_t i = 0; i < buses.size(); ++i) {
    const Bus& b = buses[i];
    require(!b.id.empty(), VK::Schema, "bus id empty", "buses[" + std::to_string(i) + "]");
    require(bus_index_.emplace(b.id, int(i)).second, VK::Duplicate,
            "duplicate bus id " + b.id);
    require(!b.phases.empty(), VK::Invariant, "bus " + b.id + " has no phases");
    require(b.base_kv > 0.0, VK::Invariant, "bus " + b.id + " base_kv must be positive");
  }
  require(!buses.empty(), VK::Schema, "no buses");

  source_bus_ = -1;
  for (size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].is_source) {
      require(source_bus_ < 0, VK::Invariant, "more than one source bus");
      source_bus_ = int(i);
    }
  }
  require(source_bus_ >= 0, VK::Invariant, "no source bus");
  require(source.bus == buses[source_bus_].id, VK::Invariant,
          "source.bus disagrees with the bus marked is_source");

  // branch set
  branches_.clear();
  branch_by_pair_.clear();
  auto add_branch = [&](BranchKind kind, int idx, const std::string& f,
                        const std::string& t, PhaseMask ph) {
    int fb = bus_index(f), tb = bus_index(t);
    require(fb != tb, VK::Invariant, "self-loop branch at " + f);
    require(ph.subset_of(buses[fb].phases) && ph.subset_of(buses[tb].phases),
            VK::PhaseMismatch,
            "branch " + f + "-" + t + " phases " + ph.str() +
                " exceed endpoint phases");
    auto key = fb < tb ? std::make_pair(fb, tb) : std::make_pair(tb, fb);
    require(branch_by_pair_.emplace(key, int(branches_.size())).second, VK::Duplicate,
            "parallel branches between " + f + " and " + t);
    branches_.push_back({kind, idx, fb, tb, ph});
  };

  for (size_t i = 0; i < lines.size(); ++i) {
    const auto& ln = lines[i];
    require(!ln.phases.empty(), VK::Invariant, "line with no phases",
            "lines[" + std::to_string(i) + "]");
    add_branch(BranchKind::Line, int(i), ln.from, ln.to, ln.phases);
    // present-phase submatrix must be invertible
    std::vector<int> ph;
    for (int p = 0; p < 3; ++p)
      if (ln.phases.has(p)) ph.push_back(p);
    Eigen::MatrixXcd sub(ph.size(), ph.size());
    for (size_t a = 0; a < ph.size(); ++a)
      for (size_t b = 0; b < ph.size(); ++b) sub(a, b) = ln.z_per_len(ph[a], ph[b]);
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(sub);
    require(lu.isInvertible(), VK::Invariant,
            "line " + ln.from + "-" + ln.to + " impedance submatrix is singular");
  }
  for (size_t i = 0; i < transformers.size(); ++i) {
    const auto& tx = transformers[i];
    require(tx.kv_high > 0 && tx.kv_low > 0, VK::Invariant,
            "transformer " + tx.from + "-" + tx.to + " kv ratings must be positive");
    add_branch(BranchKind::Transformer, int(i), tx.from, tx.to, PhaseMask::all());
  }
  for (size_t i = 0; i < regulators.size(); ++i) {
    const auto& rg = regulators[i];
    for (int p = 0; p < 3; ++p)
      require(rg.taps[p] >= -16 && rg.taps[p] <= 16, VK::Invariant,
              "regulator " + rg.from + "-" + rg.to + " tap out of range");
    add_branch(BranchKind::Regulator, int(i), rg.from, rg.to, rg.phases);
  }

  // radial: connected tree rooted at the source
  require(branches_.size() == buses.size() - 1, VK::Radiality,
          "branch count " + std::to_string(branches_.size()) + " != buses-1");
  bus_branches_.assign(buses.size(), {});
  for (size_t i = 0; i < branches_.size(); ++i) {
    bus_branches_[branches_[i].from_bus].push_back(int(i));
    bus_branches_[branches_[i].to_bus].push_back(int(i));
  }
  parent_branch_.assign(buses.size(), -1);
  bfs_order_.clear();
  std::vector<bool> seen(buses.size(), false);
  std::vector<int> queue{source_bus_};
  seen[source_bus_] = true;
  for (size_t head = 0; head < queue.size(); ++head) {
    int b = queue[head];
    bfs_order_.push_back(b);
    for (int bi : bus_branches_[b]) {
      const BranchRef& br = branches_[bi];
      int other = br.from_bus == b ? br.to_bus : br.from_bus;
      if (seen[other]) {
        require(parent_branch_[b] == bi || parent_branch_[other] == bi, VK::Radiality,
                "cycle detected near bus " + buses[other].id);
        continue;
      }
      require(br.from_bus == b, VK::Radiality,
              "branch " + buses[br.from_bus].id + "-" + buses[br.to_bus].id +
                  " is oriented against the feeder direction");
      seen[other] = true;
      parent_branch_[other] = bi;
      queue.push_back(other);
    }
  }
  require(queue.size() == buses.size(), VK::Radiality,
          "network is not connected (island detected)");

  // phase masks monotone down the feeder
  for (int b : bfs_order_) {
    if (b == source_bus_) continue;
    const BranchRef& br = branches_[parent_branch_[b]];
    require(br.phases.subset_of(buses[br.from_bus].phases), VK::PhaseMismatch,
            "branch into " + buses[b].id + " exceeds upstream phases");
  }

  // zone voltage bases via the tree, flipping across transformers
  zone_kv_.assign(buses.size(), 0.0);
  zone_kv_[source_bus_] = buses[source_bus_].base_kv;
  for (int b : bfs_order_) {
    if (b == source_bus_) continue;
    const BranchRef& br = branches_[parent_branch_[b]];
    double upstream = zone_kv_[br.from_bus];
    if (br.kind == BranchKind::Transformer) {
      const Transformer& tx = transformers[br.index];
      zone_kv_[b] = (bus_index(tx.from) == br.from_bus) ? tx.kv_low : tx.kv_high;
    } else {
      zone_kv_[b] = upstream;
    }
    require(std::abs(zone_kv_[b] - buses[b].base_kv) < 1e-6, VK::Invariant,
            "bus " + buses[b].id + " base_kv disagrees with its voltage zone");
  }

  for (const auto& cap : capacitors) {
    int b = bus_index(cap.bus);
    require(cap.phases.subset_of(buses[b].phases), VK::PhaseMismatch,
            "capacitor at " + cap.bus + " uses absent phases");
    for (int p = 0; p < 3; ++p)
      require(cap.kvar[p] >= 0.0, VK::Invariant,
              "capacitor at " + cap.bus + " has negative rating");
  }

  slot_p_.clear();
  load_slots_.clear();
  for (const auto& ld : loads) {
    int b = bus_index(ld.bus);
    require(ld.phases.subset_of(buses[b].phases), VK::PhaseMismatch,
            "load at " + ld.bus + " uses absent phases");
    if (ld.connection == LoadConnection::Delta)
      require(ld.phases.count() >= 2, VK::Invariant,
              "delta load at " + ld.bus + " needs at least two phases");
    for (int s = 0; s < 3; ++s) {
      require(ld.p_kw[s] >= 0.0, VK::Invariant,
              "load at " + ld.bus + " has negative nominal P");
      if (!ld.slot_used(s)) continue;
      if (ld.connection == LoadConnection::Delta) {
        int p2 = (s + 1) % 3;
        require(buses[b].phases.has(s) && buses[b].phases.has(p2), VK::PhaseMismatch,
                "delta pair at " + ld.bus + " touches absent phase");
      } else {
        require(buses[b].phases.has(s), VK::PhaseMismatch,
                "wye load at " + ld.bus + " on absent phase");
      }
      slot_p_[{b, s}] += ld.p_kw[s];
    }
  }
  for (const auto& [key, p] : slot_p_) load_slots_.push_back(key);

  // every load bus reachable on its load phases: walk up, parent branches
  // must carry the touched phases
  for (const auto& ld : loads) {
    int b = bus_index(ld.bus);
    for (int p = 0; p < 3; ++p) {
      if (!ld.phases.has(p)) continue;
      int cur = b;
      while (cur != source_bus_) {
        const BranchRef& br = branches_[parent_branch_[cur]];
        require(br.phases.has(p), VK::PhaseMismatch,
                "load at " + ld.bus + " phase " + std::string(1, "ABC"[p]) +
                    " unreachable from the source");
        cur = br.from_bus;
      }
    }
  }

  features_.clear();
  feature_index_.clear();
  for (size_t i = 0; i < buses.size(); ++i)
    for (int p = 0; p < 3; ++p)
      if (buses[i].phases.has(p)) {
        feature_index_[{int(i), Phase(p)}] = int(features_.size());
        features_.push_back({int(i), Phase(p)});
      }

  require(source.power_base_mva > 0.0, VK::Invariant, "power base must be positive");
}

// ---------------------------------------------------------------------------
// Zero-injection phases
// ---------------------------------------------------------------------------

/// Every present (bus, phase) with no load, no capacitor and no source.
inline std::set<BusPhase> zero_injection_phases(const NetworkModel& net) {
  std::set<BusPhase> zips;
  for (const auto& f : net.state_features())
    if (f.bus != net.source_bus()) zips.insert(f);
  for (const auto& ld : net.loads) {
    int b = net.bus_index(ld.bus);
    for (int p = 0; p < 3; ++p)
      if (ld.phases.has(p)) zips.erase({b, Phase(p)});
  }
  for (const auto& cap : net.capacitors) {
    int b = net.bus_index(cap.bus);
    for (int p = 0; p < 3; ++p)
      if (cap.phases.has(p) && cap.status[p]) zips.erase({b, Phase(p)});
  }
  return zips;
}

// ---------------------------------------------------------------------------
// JSON serialization (schema documented in docs/network_format.md)
// ---------------------------------------------------------------------------

namespace detail {

inline json complex_to_json(cd z) { return json::array({z.real(), z.imag()}); }

inline cd complex_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ValidationError(ValidationError::Kind::Schema,
                          "complex values are [re, im] pairs", where);
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json mat3_to_json(const Eigen::Matrix3cd& m) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) {
    json row = json::array();
    for (int j = 0; j < 3; ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::Matrix3cd mat3_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw ValidationError(ValidationError::Kind::Schema, "expected 3x3 matrix", where);
  Eigen::Matrix3cd m;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_array() || j[i].size() != 3)
      throw ValidationError(ValidationError::Kind::Schema, "expected 3x3 matrix", where);
    for (int k = 0; k < 3; ++k) m(i, k) = complex_from_json(j[i][k], where);
  }
  return m;
}

inline json phases_to_json(PhaseMask m) {
  json a = json::array();
  for (int p = 0; p < 3; ++p)
    if (m.has(p)) a.push_back(std::string(1, "ABC"[p]));
  return a;
}

inline PhaseMask phases_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw ValidationError(ValidationError::Kind::Schema,
                          "phases must be a non-empty array of \"A\"/\"B\"/\"C\"", where);
  PhaseMask m;
  for (const auto& e : j) {
    std::string s = e.get<std::string>();
    if (s.size() != 1)
      throw ValidationError(ValidationError::Kind::Schema, "bad phase " + s, where);
    m.set(phase_from_char(s[0]));
  }
  return m;
}

template <typename T>
T field(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key))
    throw ValidationError(ValidationError::Kind::Schema, "missing field '" + key + "'",
                          where);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(ValidationError::Kind::Schema, "bad type for '" + key + "'",
                          where);
  }
}

template <typename T, size_t N>
std::array<T, N> fixed_array(const json& j, const std::string& key,
                             const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != N)
    throw ValidationError(ValidationError::Kind::Schema,
                          "'" + key + "' must be an array of " + std::to_string(N),
                          where);
  std::array<T, N> out{};
  for (size_t i = 0; i < N; ++i) out[i] = j.at(key)[i].get<T>();
  return out;
}

inline WindingConnection winding_from_string(const std::string& s, const std::string& where) {
  if (s == "wye-g") return WindingConnection::WyeGrounded;
  if (s == "wye") return WindingConnection::Wye;
  if (s == "delta") return WindingConnection::Delta;
  throw ValidationError(ValidationError::Kind::Schema, "bad winding connection " + s, where);
}

inline std::string winding_to_string(WindingConnection c) {
  switch (c) {
    case WindingConnection::WyeGrounded: return "wye-g";
    case WindingConnection::Wye: return "wye";
    case WindingConnection::Delta: return "delta";
  }
  return {};
}

}  // namespace detail

inline NetworkModel parse_network(const std::string& text) {
  using detail::field;
  using detail::fixed_array;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(ValidationError::Kind::Schema,
                          std::string("invalid JSON: ") + e.what());
  }

  NetworkModel net;
  const json& src = doc.contains("source") ? doc.at("source") : json::object();
  net.source.bus = field<std::string>(src, "bus", "source");
  net.source.vm_pu = fixed_array<double, 3>(src, "vm_pu", "source");
  net.source.va_deg = fixed_array<double, 3>(src, "va_deg", "source");
  net.source.power_base_mva =
      src.contains("power_base_mva") ? src.at("power_base_mva").get<double>() : 2.5;

  if (!doc.contains("buses") || !doc.at("buses").is_array())
    throw ValidationError(ValidationError::Kind::Schema, "missing 'buses' array");
  for (size_t i = 0; i < doc.at("buses").size(); ++i) {
    const json& jb = doc.at("buses")[i];
    std::string where = "buses[" + std::to_string(i) + "]";
    Bus b;
    b.id = field<std::string>(jb, "id", where);
    b.phases = detail::phases_from_json(jb.at("phases"), where);
    b.base_kv = field<double>(jb, "base_kv", where);
    b.is_source = jb.contains("is_source") && jb.at("is_source").get<bool>();
    net.buses.push_back(std::move(b));
  }

  for (size_t i = 0; doc.contains("lines") && i < doc.at("lines").size(); ++i) {
    const json& jl = doc.at("lines")[i];
    std::string where = "lines[" + std::to_string(i) + "]";
    LineSegment ln;
    ln.from = field<std::string>(jl, "from", where);
    ln.to = field<std::string>(jl, "to", where);
    ln.phases = detail::phases_from_json(jl.at("phases"), where);
    ln.length = field<double>(jl, "length", where);
    ln.z_per_len = detail::mat3_from_json(jl.at("series_impedance"), where);
    ln.y_shunt_per_len = jl.contains("shunt_admittance")
                             ? detail::mat3_from_json(jl.at("shunt_admittance"), where)
                             : Eigen::Matrix3cd::Zero().eval();
    net.lines.push_back(std::move(ln));
  }

  for (size_t i = 0; doc.contains("transformers") && i < doc.at("transformers").size();
       ++i) {
    const json& jt = doc.at("transformers")[i];
    std::string where = "transformers[" + std::to_string(i) + "]";
    Transformer tx;
    tx.from = field<std::string>(jt, "from", where);
    tx.to = field<std::string>(jt, "to", where);
    tx.conn_from =
        detail::winding_from_string(field<std::string>(jt, "connection_from", where), where);
    tx.conn_to =
        detail::winding_from_string(field<std::string>(jt, "connection_to", where), where);
    tx.kv_high = field<double>(jt, "kv_high", where);
    tx.kv_low = field<double>(jt, "kv_low", where);
    tx.z_series = detail::complex_from_json(jt.at("series_impedance"), where);
    net.transformers.push_back(std::move(tx));
  }

  for (size_t i = 0; doc.contains("regulators") && i < doc.at("regulators").size(); ++i) {
    const json& jr = doc.at("regulators")[i];
    std::string where = "regulators[" + std::to_string(i) + "]";
    Regulator rg;
    rg.from = field<std::string>(jr, "from", where);
    rg.to = field<std::string>(jr, "to", where);
    rg.phases = detail::phases_from_json(jr.at("phases"), where);
    rg.taps = fixed_array<int, 3>(jr, "taps", where);
    rg.step = jr.contains("step") ? jr.at("step").get<double>() : 0.00625;
    if (jr.contains("control")) {
      const json& jc = jr.at("control");
      RegulatorControl c;
      c.vreg_v = field<double>(jc, "vreg_v", where);
      c.bandwidth_v = field<double>(jc, "bandwidth_v", where);
      c.pt_ratio = field<double>(jc, "pt_ratio", where);
      c.ct_primary_a = field<double>(jc, "ct_primary_a", where);
      c.r_v = field<double>(jc, "r_v", where);
      c.x_v = field<double>(jc, "x_v", where);
      rg.control = c;
    }
    net.regulators.push_back(std::move(rg));
  }

  for (size_t i = 0; doc.contains("capacitors") && i < doc.at("capacitors").size(); ++i) {
    const json& jc = doc.at("capacitors")[i];
    std::string where = "capacitors[" + std::to_string(i) + "]";
    CapacitorBank cap;
    cap.bus = field<std::string>(jc, "bus", where);
    cap.phases = detail::phases_from_json(jc.at("phases"), where);
    cap.kvar = fixed_array<double, 3>(jc, "kvar", where);
    auto st = fixed_array<bool, 3>(jc, "status", where);
    cap.status = st;
    net.capacitors.push_back(std::move(cap));
  }

  for (size_t i = 0; doc.contains("loads") && i < doc.at("loads").size(); ++i) {
    const json& jl = doc.at("loads")[i];
    std::string where = "loads[" + std::to_string(i) + "]";
    Load ld;
    ld.bus = field<std::string>(jl, "bus", where);
    ld.phases = detail::phases_from_json(jl.at("phases"), where);
    std::string conn = field<std::string>(jl, "connection", where);
    if (conn == "wye")
      ld.connection = LoadConnection::Wye;
    else if (conn == "delta")
      ld.connection = LoadConnection::Delta;
    else
      throw ValidationError(ValidationError::Kind::Schema, "bad connection " + conn, where);
    std::string model = field<std::string>(jl, "model", where);
    if (model == "pq")
      ld.model = LoadModel::ConstantPQ;
    else if (model == "i")
      ld.model = LoadModel::ConstantCurrent;
    else if (model == "z")
      ld.model = LoadModel::ConstantImpedance;
    else
      throw ValidationError(ValidationError::Kind::Schema, "bad load model " + model, where);
    ld.p_kw = fixed_array<double, 3>(jl, "p_kw", where);
    ld.q_kvar = fixed_array<double, 3>(jl, "q_kvar", where);
    net.loads.push_back(std::move(ld));
  }

  net.validate();
  return net;
}

inline json serialize_network(const NetworkModel& net) {
  json doc;
  doc["source"] = {{"bus", net.source.bus},
                   {"vm_pu", net.source.vm_pu},
                   {"va_deg", net.source.va_deg},
                   {"power_base_mva", net.source.power_base_mva}};
  doc["buses"] = json::array();
  for (const auto& b : net.buses)
    doc["buses"].push_back({{"id", b.id},
                            {"phases", detail::phases_to_json(b.phases)},
                            {"base_kv", b.base_kv},
                            {"is_source", b.is_source}});
  doc["lines"] = json::array();
  for (const auto& ln : net.lines)
    doc["lines"].push_back({{"from", ln.from},
                            {"to", ln.to},
                            {"phases", detail::phases_to_json(ln.phases)},
                            {"length", ln.length},
                            {"series_impedance", detail::mat3_to_json(ln.z_per_len)},
                            {"shunt_admittance", detail::mat3_to_json(ln.y_shunt_per_len)}});
  doc["transformers"] = json::array();
  for (const auto& tx : net.transformers)
    doc["transformers"].push_back(
        {{"from", tx.from},
         {"to", tx.to},
         {"connection_from", detail::winding_to_string(tx.conn_from)},
         {"connection_to", detail::winding_to_string(tx.conn_to)},
         {"kv_high", tx.kv_high},
         {"kv_low", tx.kv_low},
         {"series_impedance", detail::complex_to_json(tx.z_series)}});
  doc["regulators"] = json::array();
  for (const auto& rg : net.regulators) {
    json jr = {{"from", rg.from},
               {"to", rg.to},
               {"phases", detail::phases_to_json(rg.phases)},
               {"taps", rg.taps},
               {"step", rg.step}};
    if (rg.control) {
      jr["control"] = {{"vreg_v", rg.control->vreg_v},
                       {"bandwidth_v", rg.control->bandwidth_v},
                       {"pt_ratio", rg.control->pt_ratio},
                       {"ct_primary_a", rg.control->ct_primary_a},
                       {"r_v", rg.control->r_v},
                       {"x_v", rg.control->x_v}};
    }
    doc["regulators"].push_back(jr);
  }
  doc["capacitors"] = json::array();
  for (const auto& cap : net.capacitors)
    doc["capacitors"].push_back({{"bus", cap.bus},
                                 {"phases", detail::phases_to_json(cap.phases)},
                                 {"kvar", cap.kvar},
                                 {"status", cap.status}});
  doc["loads"] = json::array();
  for (const auto& ld : net.loads)
    doc["loads"].push_back(
        {{"bus", ld.bus},
         {"phases", detail::phases_to_json(ld.phases)},
         {"connection", ld.connection == LoadConnection::Wye ? "wye" : "delta"},
         {"model", ld.model == LoadModel::ConstantPQ
                       ? "pq"
                       : (ld.model == LoadModel::ConstantCurrent ? "i" : "z")},
         {"p_kw", ld.p_kw},
         {"q_kvar", ld.q_kvar}});
  return doc;
}

inline std::string serialize_network_text(const NetworkModel& net) {
  return serialize_network(net).dump(1);
}

inline NetworkModel load_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError(ValidationError::Kind::Schema, "cannot open network file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_network(text);
}

/// Stable fingerprint of the canonical serialized form (model-file metadata).
inline uint64_t network_hash(const NetworkModel& net) {
  return fnv1a64(serialize_network(net).dump());
}

/// Locate a bundled data file: $DSSE_DATA_DIR first, then data/ walking up
/// from the working directory (tests run from the build tree).
inline std::string find_data_file(const std::string& name) {
  std::vector<std::string> candidates;
  if (const char* env = std::getenv("DSSE_DATA_DIR"))
    candidates.push_back(std::string(env) + "/" + name);
  std::string prefix = "data/";
  for (int up = 0; up < 5; ++up) {
    candidates.push_back(prefix + name);
    prefix = "../" + prefix;
  }
  for (const auto& c : candidates)
    if (std::ifstream(c).good()) return c;
  throw ValidationError(ValidationError::Kind::Schema,
                        "cannot locate data file " + name +
                            " (set DSSE_DATA_DIR or run from the repo root)");
}

/// The bundled IEEE 34-node feeder (data/ieee34.json).
inline NetworkModel load_ieee34_fixture(const std::string& path = {}) {
  return load_network_file(path.empty() ? find_data_file("ieee34.json") : path);
}

}  // namespace dsse
