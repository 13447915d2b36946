#pragma once

// Small fully connected networks: tanh hidden layers, linear output layer.
// Shared by the actor, the emulator and the PID clone.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lfc {

struct Mlp {
  std::vector<int> layer_sizes;          // input, hidden..., output
  std::vector<Eigen::MatrixXd> weights;  // layer l: layer_sizes[l+1] x layer_sizes[l]
  std::vector<Eigen::VectorXd> biases;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t num_parameters() const;

  // Throws DimensionError / NonFiniteError when the invariants are broken.
  void validate() const;
  bool operator==(const Mlp& other) const;
};

// Same shapes as the network parameters.
struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpGradients zeros_like(const Mlp& net);
  MlpGradients& operator+=(const MlpGradients& other);
  MlpGradients& operator*=(double s);
  bool finite() const;
  double squared_norm() const;
  double dot(const MlpGradients& other) const;
};

// Weights ~ U(-sqrt(3/fan_in), sqrt(3/fan_in)), biases zero.
Mlp init_mlp(std::span<const int> layer_sizes, std::uint64_t seed);

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& x);

// One sample per column.
Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs);

struct BackwardResult {
  MlpGradients params;
  Eigen::VectorXd input;
};

// Reverse-mode gradients of upstream^T * forward(net, x).
BackwardResult backward(const Mlp& net, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& upstream);

struct BatchBackwardResult {
  MlpGradients params;   // summed over the batch
  Eigen::MatrixXd input; // per-sample input gradients, one per column
};

BatchBackwardResult backward_batch(const Mlp& net, const Eigen::MatrixXd& inputs,
                                   const Eigen::MatrixXd& upstream);

enum class Algorithm { kSgd, kAdam };
enum class Direction { kAscent, kDescent };

struct Optimizer {
  Algorithm algorithm = Algorithm::kSgd;
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step_count = 0;
  MlpGradients first_moment;   // adam only, lazily sized
  MlpGradients second_moment;

  static Optimizer sgd(double lr) {
    Optimizer o;
    o.learning_rate = lr;
    return o;
  }
  static Optimizer adam(double lr) {
    Optimizer o = sgd(lr);
    o.algorithm = Algorithm::kAdam;
    return o;
  }
};

// In place. A non-finite gradient throws NonFiniteError and leaves both the
// network and the optimizer untouched.
void apply_update(Mlp& net, const MlpGradients& grads, Optimizer& opt, Direction direction);

struct LossAndGrad {
  double loss;
  Eigen::VectorXd grad;
};

// Mean squared error and its gradient with respect to pred.
LossAndGrad mse_loss_and_grad(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);

// Text checkpoint:
//   mlp v1 <sizes comma-separated> tanh
//   meta <key> <value>            (zero or more)
//   <value per line>              layer by layer: weights row-major, then biases
using CheckpointMetadata = std::vector<std::pair<std::string, double>>;

struct Checkpoint {
  Mlp net;
  CheckpointMetadata metadata;

  // Throws ParseError when the key is absent.
  double meta(const std::string& key) const;
};

void save_checkpoint(const Mlp& net, const std::filesystem::path& path,
                     const CheckpointMetadata& metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace lfc
