#pragma once

// Fixed-learning-rate descent-direction engines. The averaged variants use a
// second-moment decay of 1 - 1/k, which makes the accumulator the exact
// running mean of all squared gradients.

#include <deque>

#include <Eigen/Core>

#include "bbvi/variational.hpp"

namespace bbvi {

enum class OptimizerKind { Sgd, RmsProp, Adam, AvgRmsProp, AvgAdam, Ngd, WindowedAdagrad };

struct OptimizerHyper {
  double beta1 = 0.9;        // Adam first-moment decay
  double beta2 = 0.999;      // Adam second-moment decay
  double beta = 0.9;         // RMSProp decay
  double stabilizer = 1e-8;  // added to sqrt(v) in adaptive directions
  int window = 10;           // windowed Adagrad trailing window
};

// One instance per chain; copyable, not meant to be shared across threads.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, FamilyLayout family, OptimizerHyper hyper = {});

  // Consumes one gradient and returns the descent direction. The parameter
  // vector is only read by natural-gradient rescaling. Throws OptimizerError
  // on non-finite gradients.
  Eigen::VectorXd direction(const Eigen::VectorXd& grad, const Eigen::VectorXd& lambda);

  long step_count() const { return step_count_; }
  OptimizerKind kind() const { return kind_; }
  const Eigen::VectorXd& second_moment() const { return sq_grad_; }

 private:
  OptimizerKind kind_;
  FamilyLayout family_;
  OptimizerHyper hyper_;
  long step_count_ = 0;
  Eigen::VectorXd grad_ema_;
  Eigen::VectorXd sq_grad_;
  std::deque<Eigen::VectorXd> window_;  // squared gradients, windowed Adagrad only
};

// lambda - gamma * direction, elementwise.
Eigen::VectorXd apply_step(const Eigen::VectorXd& lambda, const Eigen::VectorXd& direction,
                           double gamma);

}  // namespace bbvi
