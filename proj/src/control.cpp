#include "gbqf/control.hpp"

#include <algorithm>
#include <cmath>

#include "gbqf/errors.hpp"

namespace gbqf {

Matrix state_prep_hamiltonian() {
  Matrix g(2, 2);
  g << cxd(0, 0), cxd(0, -1), cxd(0, 1), cxd(0, 0);
  return g;
}

double feedback_alpha(double u, const Matrix& rho, double bound,
                      long* clip_events) {
  if (rho.rows() != 2 || rho.cols() != 2)
    throw Error(ErrorCode::DimensionMismatch,
                "feedback_alpha: requires a qubit state");
  if (u < 0.0 || u > 1.0)
    throw Error(ErrorCode::InvalidArgument,
                "feedback_alpha: label outside [0, 1]");
  if (!(bound > 0.0))
    throw Error(ErrorCode::InvalidArgument, "feedback_alpha: bound must be > 0");
  const Matrix target = u < 0.5 ? rho_ground() : rho_excited();
  const Matrix g = state_prep_hamiltonian();
  const cxd combo = cxd(0.0, -8.0) * (commutator(g, rho) * target).trace() +
                    5.0 * (cxd(1.0, 0.0) - (rho * target).trace());
  double value = combo.real();
  if (std::abs(value) > bound) {
    if (clip_events) ++(*clip_events);
    value = std::clamp(value, -bound, bound);
  }
  return value;
}

LabelControlLaw::LabelControlLaw(
    Kind kind, double bound,
    std::function<double(double, double, const Matrix&)> fn)
    : kind_(kind),
      bound_(bound),
      fn_(std::move(fn)),
      clips_(std::make_shared<std::atomic<long>>(0)) {
  if (!(bound_ > 0.0))
    throw Error(ErrorCode::InvalidArgument, "control bound must be > 0");
}

LabelControlLaw LabelControlLaw::zero() {
  return LabelControlLaw(Kind::Zero, kDefaultControlBound, {});
}

LabelControlLaw LabelControlLaw::state_prep(double bound) {
  return LabelControlLaw(Kind::StatePrepFeedback, bound, {});
}

LabelControlLaw LabelControlLaw::custom(
    std::function<double(double, double, const Matrix&)> fn, double bound) {
  if (!fn)
    throw Error(ErrorCode::InvalidArgument, "custom control law must be set");
  return LabelControlLaw(Kind::Custom, bound, std::move(fn));
}

double LabelControlLaw::operator()(double t, double u,
                                   const Matrix& rho) const {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::StatePrepFeedback: {
      long clips = 0;
      const double v = feedback_alpha(u, rho, bound_, &clips);
      if (clips > 0) clips_->fetch_add(clips);
      return v;
    }
    case Kind::Custom: {
      double v = fn_(t, u, rho);
      if (std::abs(v) > bound_) {
        clips_->fetch_add(1);
        v = std::clamp(v, -bound_, bound_);
      }
      return v;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown control law kind");
}

}  // namespace gbqf
