#pragma once

// Bounded feedback laws for the qubit preparation experiments: the
// two-target rotation feedback and a generic label-indexed law with hard
// clamping and clip-event accounting.

#include <atomic>
#include <functional>
#include <memory>

#include "gbqf/qla.hpp"

namespace gbqf {

inline constexpr double kDefaultControlBound = 50.0;

// Hermitian rotation generator used as the control Hamiltonian: i times the
// real antisymmetric qubit matrix, so density evolution stays Hermitian and
// the feedback trace combination below is purely imaginary.
Matrix state_prep_hamiltonian();

// Rotation feedback: -8i tr([G, rho] target) + 5 (1 - tr(rho target)), with
// target the ground projector for labels in [0, 1/2) and the excited
// projector for labels in [1/2, 1].  The result is real for Hermitian
// inputs; values are clamped to [-bound, bound] and clips counted.
double feedback_alpha(double u, const Matrix& rho,
                      double bound = kDefaultControlBound,
                      long* clip_events = nullptr);

// Label-indexed control law.  Copies share one clip counter, so ensembles
// can fan a law out across paths and still report total clip events.
class LabelControlLaw {
 public:
  enum class Kind { Zero, StatePrepFeedback, Custom };

  LabelControlLaw() : LabelControlLaw(Kind::Zero, kDefaultControlBound, {}) {}

  static LabelControlLaw zero();
  static LabelControlLaw state_prep(double bound = kDefaultControlBound);
  static LabelControlLaw custom(
      std::function<double(double t, double u, const Matrix& rho)> fn,
      double bound = kDefaultControlBound);

  double operator()(double t, double u, const Matrix& rho) const;

  Kind kind() const { return kind_; }
  double bound() const { return bound_; }
  bool is_zero() const { return kind_ == Kind::Zero; }
  long clip_events() const { return clips_->load(); }
  void reset_clip_events() { clips_->store(0); }

 private:
  LabelControlLaw(Kind kind, double bound,
                  std::function<double(double, double, const Matrix&)> fn);

  Kind kind_;
  double bound_;
  std::function<double(double, double, const Matrix&)> fn_;
  std::shared_ptr<std::atomic<long>> clips_;
};

}  // namespace gbqf
