#include "bbvi/optim.hpp"

#include <cmath>

#include "bbvi/errors.hpp"

namespace bbvi {

Optimizer::Optimizer(OptimizerKind kind, FamilyLayout family, OptimizerHyper hyper)
    : kind_(kind), family_(family), hyper_(hyper) {
  if (kind_ == OptimizerKind::Ngd && family_.kind != FamilyKind::MeanField)
    throw ArgumentError("natural gradient descent requires the mean-field family");
  const int m = family_.param_count();
  grad_ema_ = Eigen::VectorXd::Zero(m);
  sq_grad_ = Eigen::VectorXd::Zero(m);
}

Eigen::VectorXd Optimizer::direction(const Eigen::VectorXd& grad,
                                     const Eigen::VectorXd& lambda) {
  if (grad.size() != sq_grad_.size()) throw ArgumentError("gradient length mismatch");
  if (!grad.allFinite()) throw OptimizerError("non-finite gradient");
  ++step_count_;
  const double eps = hyper_.stabilizer;

  switch (kind_) {
    case OptimizerKind::Sgd:
      return grad;

    // The adaptive variants rescale the current gradient by the accumulator
    // from before this step, so the denominator is independent of the
    // current draw. The first step has no history and uses the updated value.
    case OptimizerKind::RmsProp: {
      Eigen::VectorXd denom = sq_grad_;
      sq_grad_ = hyper_.beta * sq_grad_ + (1.0 - hyper_.beta) * grad.cwiseProduct(grad);
      if (step_count_ == 1) denom = sq_grad_;
      return grad.array() / (denom.array().sqrt() + eps);
    }

    case OptimizerKind::Adam: {
      grad_ema_ = hyper_.beta1 * grad_ema_ + (1.0 - hyper_.beta1) * grad;
      Eigen::VectorXd denom = sq_grad_;
      long denom_steps = step_count_ - 1;
      sq_grad_ = hyper_.beta2 * sq_grad_ + (1.0 - hyper_.beta2) * grad.cwiseProduct(grad);
      if (step_count_ == 1) {
        denom = sq_grad_;
        denom_steps = 1;
      }
      const double c1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_count_));
      const double c2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(denom_steps));
      return (grad_ema_.array() / c1) / ((denom.array() / c2).sqrt() + eps);
    }

    // The averaged variants rescale by the running mean through the current
    // step; the same-step coupling keeps excursions bounded while the
    // accumulator still converges to a constant.
    case OptimizerKind::AvgRmsProp: {
      // v += (g^2 - v)/k: exact running mean, and a fixed point for constant g.
      sq_grad_ += (grad.cwiseProduct(grad) - sq_grad_) / static_cast<double>(step_count_);
      return grad.array() / (sq_grad_.array().sqrt() + eps);
    }

    case OptimizerKind::AvgAdam: {
      grad_ema_ = hyper_.beta1 * grad_ema_ + (1.0 - hyper_.beta1) * grad;
      sq_grad_ += (grad.cwiseProduct(grad) - sq_grad_) / static_cast<double>(step_count_);
      const double c1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_count_));
      return (grad_ema_.array() / c1) / (sq_grad_.array().sqrt() + eps);
    }

    case OptimizerKind::Ngd: {
      // Inverse Fisher for (tau, psi) coordinates: diag(e^{2 psi}, 1/2).
      const int d = family_.dim;
      Eigen::VectorXd dir(2 * d);
      dir.head(d) = grad.head(d).array() * (2.0 * lambda.tail(d).array()).exp();
      dir.tail(d) = 0.5 * grad.tail(d).array();
      return dir;
    }

    case OptimizerKind::WindowedAdagrad: {
      window_.push_back(grad.cwiseProduct(grad));
      if (static_cast<int>(window_.size()) > hyper_.window) window_.pop_front();
      sq_grad_.setZero();
      for (const auto& s : window_) sq_grad_ += s;
      sq_grad_ /= static_cast<double>(window_.size());
      return grad.array() / (sq_grad_.array().sqrt() + eps);
    }
  }
  throw OptimizerError("unknown optimizer kind");
}

Eigen::VectorXd apply_step(const Eigen::VectorXd& lambda, const Eigen::VectorXd& direction,
                           double gamma) {
  if (lambda.size() != direction.size()) throw ArgumentError("step shape mismatch");
  return lambda - gamma * direction;
}

}  // namespace bbvi
