#pragma once

// Emulator network phi(s, a) -> Δf_{t+1}, standing in for the critic. The
// action gradient of Q = -Δf_{t+1}^2 is estimated with randomized symmetric
// difference quotients on phi.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lfc/metrics.hpp"
#include "lfc/neural.hpp"
#include "lfc/pid.hpp"
#include "lfc/plant.hpp"
#include "lfc/random.hpp"

namespace lfc {

// Fixed per-feature divisors applied before the first layer.
struct FeatureScales {
  double f_dev = 0.05;   // Hz
  double f_int = 0.05;   // Hz*s
  double f_der = 0.5;    // Hz/s
  double action = 0.03;  // p.u.

  void validate() const;
};

struct EmulatorConfig {
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  FeatureScales scales;
  double validation_split = 0.2;
  int patience = 20;  // early stop after this many non-improving epochs
  std::vector<int> hidden{256, 256};
  std::uint64_t seed = 0;

  void validate() const;
};

struct Emulator {
  Mlp net;  // 4 inputs, scalar output in Hz
  FeatureScales scales;
};

struct EmulatorLog {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = 0;
  double validation_rmse = 0.0;
  double validation_target_rms = 0.0;
};

struct EmulatorFit {
  Emulator emulator;
  EmulatorLog log;
};

// Deterministic shuffle-and-split of the database, then minibatch adam on the
// MSE. Keeps the parameters of the best validation epoch.
EmulatorFit train_emulator(const LfcDatabase& db, const EmulatorConfig& cfg);

// Indices of the held-out records used by train_emulator for `cfg`.
std::vector<std::size_t> validation_indices(std::size_t n_records, const EmulatorConfig& cfg);

Eigen::Vector4d emulator_features(const FeatureScales& scales, const Observation& obs,
                                  double action);

double predict(const Emulator& em, const Observation& obs, double action);

// Exact dphi/da by backpropagation through the action input, Hz per p.u.
double action_gradient(const Emulator& em, const Observation& obs, double action);

enum class ZooSampling {
  kIid,         // K independent standard normals
  kStratified,  // one standard normal per equal-probability stratum
};

struct ZooConfig {
  double epsilon = 1e-4;  // p.u.
  int n_samples = 32;
  std::uint64_t seed = 0;
  ZooSampling sampling = ZooSampling::kStratified;

  void validate() const;
};

// Perturbation directions u_1..u_K with zero mean and unit variance.
std::vector<double> draw_directions(const ZooConfig& zoo, Rng& rng);

// (1/K) sum_k [f(a + eps u_k) - f(a - eps u_k)] / (2 eps) * u_k for any scalar f.
template <typename F>
double zoo_estimate(F&& f, double action, double epsilon, std::span<const double> directions) {
  double acc = 0.0;
  for (double u : directions) {
    acc += (f(action + epsilon * u) - f(action - epsilon * u)) / (2.0 * epsilon) * u;
  }
  return acc / static_cast<double>(directions.size());
}

// Zeroth-order estimate of dphi/da. The overload without an Rng seeds a fresh
// generator from zoo.seed, so equal arguments give equal results.
double zoo_grad(const Emulator& em, const Observation& obs, double action, const ZooConfig& zoo,
                Rng& rng);
double zoo_grad(const Emulator& em, const Observation& obs, double action, const ZooConfig& zoo);

// Batched variant: one estimate per (obs[i], actions[i]) in a single pass.
std::vector<double> zoo_grad_batch(const Emulator& em, std::span<const Observation> obs,
                                   std::span<const double> actions, const ZooConfig& zoo,
                                   Rng& rng);

// dQ/da = -2 * phi(s, a) * dphi/da.
double dq_da_from(double predicted_delta_f, double dphi_da);
double dq_da(const Emulator& em, const Observation& obs, double action, const ZooConfig& zoo,
             Rng& rng);
double dq_da(const Emulator& em, const Observation& obs, double action, const ZooConfig& zoo);

// Neural checkpoint format with the feature scales as metadata lines.
void save_emulator(const Emulator& em, const std::filesystem::path& path);
Emulator load_emulator(const std::filesystem::path& path);

}  // namespace lfc
