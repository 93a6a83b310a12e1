#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dsse {

using cd = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kRadToDeg = 180.0 / kPi;

/// Nominal phase angles, degrees (substation phase-A reference).
constexpr std::array<double, 3> kNominalAngleDeg = {0.0, -120.0, 120.0};
/// Nominal delta-pair angles for pairs AB, BC, CA at balanced voltages.
constexpr std::array<double, 3> kNominalPairAngleDeg = {30.0, -90.0, 150.0};

enum class Phase : int { A = 0, B = 1, C = 2 };

inline char phase_char(Phase p) { return "ABC"[static_cast<int>(p)]; }

inline Phase phase_from_char(char c) {
  switch (c) {
    case 'A': return Phase::A;
    case 'B': return Phase::B;
    case 'C': return Phase::C;
  }
  throw std::invalid_argument(std::string("not a phase: ") + c);
}

/// Which of the three phases are present on a bus / branch / load.
struct PhaseMask {
  uint8_t bits = 0;

  static PhaseMask all() { return PhaseMask{0b111}; }
  static PhaseMask of(Phase p) { return PhaseMask{uint8_t(1u << static_cast<int>(p))}; }

  bool has(Phase p) const { return bits & (1u << static_cast<int>(p)); }
  bool has(int p) const { return bits & (1u << p); }
  void set(Phase p) { bits |= uint8_t(1u << static_cast<int>(p)); }
  int count() const { return (bits & 1) + ((bits >> 1) & 1) + ((bits >> 2) & 1); }
  bool empty() const { return bits == 0; }
  bool subset_of(PhaseMask other) const { return (bits & ~other.bits) == 0; }
  bool operator==(const PhaseMask&) const = default;

  std::string str() const {
    std::string s;
    for (int p = 0; p < 3; ++p)
      if (has(p)) s += "ABC"[p];
    return s;
  }
};

/// Wrap an angle in degrees to (-180, 180].
inline double wrap_deg(double a) {
  a = std::fmod(a, 360.0);
  if (a <= -180.0) a += 360.0;
  if (a > 180.0) a -= 360.0;
  return a;
}

/// Smallest absolute angular difference in degrees (wrap-aware).
inline double angle_diff_deg(double a, double b) {
  return std::abs(wrap_deg(a - b));
}

inline cd polar_deg(double mag, double ang_deg) {
  return std::polar(mag, ang_deg * kDegToRad);
}

// ---------------------------------------------------------------------------
// Error kinds. CLI maps ValidationError to exit code 2 and NumericalError
// to exit code 3.
// ---------------------------------------------------------------------------

struct ValidationError : std::runtime_error {
  enum class Kind {
    Schema,
    DanglingId,
    Duplicate,
    Radiality,
    PhaseMismatch,
    Invariant,
  };
  Kind kind;
  std::string path;  // JSON path / field that failed, when known

  ValidationError(Kind k, const std::string& msg, std::string where = {})
      : std::runtime_error(where.empty() ? msg : where + ": " + msg),
        kind(k),
        path(std::move(where)) {}
};

struct NumericalError : std::runtime_error {
  enum class Kind {
    NonConvergence,
    SingularMatrix,
    VoltageCollapse,
    NonFinite,
    RankDeficient,
    Unsupported,
  };
  Kind kind;

  NumericalError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

}  // namespace dsse
