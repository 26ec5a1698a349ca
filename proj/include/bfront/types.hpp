#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace bfront {

using State = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorKind {
  HyperbolicityViolated,
  MultipleCharacteristic,
  SmallDataViolated,
  RiemannFailed,
  CharacteristicHyperbolicBlock,
  DegenerateTraceSystem,
  MarginalSpectrum,
  DaeReductionFailed,
  BoundaryRiemannFailed,
  SmallDataGuard,
  VariationBlowUp,
  FrontExplosion,
  ViscousOutOfRegime,
  InvalidScenario,
  InvalidArgument,
};

const char* to_string(ErrorKind kind);

/// Exception carrying a machine-readable kind; `what()` holds the
/// human-readable message (e.g. "hyperbolicity violated at (1, 0)").
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

std::string format_state(const State& v);

inline double max_norm(const State& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace bfront
