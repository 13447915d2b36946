#pragma once

// Model-free DDPG loop: PID-cloned actor, OU exploration, replay buffer and
// zeroth-order policy gradient ascent through the frozen emulator.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "lfc/emulator.hpp"
#include "lfc/environment.hpp"
#include "lfc/metrics.hpp"
#include "lfc/neural.hpp"
#include "lfc/pid.hpp"
#include "lfc/random.hpp"

namespace lfc {

struct ObservationScales {
  double f_dev = 0.05;
  double f_int = 0.05;
  double f_der = 0.5;

  void validate() const;
};

// mu(s) = a_max * tanh(net(s / scales)).
struct Actor {
  Mlp net;
  ObservationScales scales;
  double a_max = kDefaultActionBound;

  Eigen::Vector3d features(const Observation& obs) const;
  double policy(const Observation& obs) const;
};

// Deterministic policy plus exploration noise, clipped to [-a_max, a_max].
double act(const Actor& actor, const Observation& obs, double noise_value);

struct PretrainConfig {
  int epochs = 300;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::vector<int> hidden{256, 256};
  ObservationScales scales;
  double a_max = kDefaultActionBound;
  int patience = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PretrainLog {
  std::vector<double> loss;  // per-epoch MSE against the PID action, p.u.^2
  int best_epoch = 0;
};

// Behaviour cloning of the database's PID controller. The regression target is
// pid_control(obs, db.gains, a_max), i.e. the noise-free action.
Actor pretrain_actor(const LfcDatabase& db, const PretrainConfig& cfg, PretrainLog* log = nullptr);

struct OuNoise {
  double theta = 0.15;  // 1/s
  double sigma = 0.02;  // p.u.
  double decay = 0.97;  // applied to sigma at each episode end
  double value = 0.0;
  Rng rng{0};

  OuNoise() = default;
  OuNoise(double theta, double sigma, double decay, std::uint64_t seed);
  void validate() const;
};

// x <- x - theta*x*dt + sigma*sqrt(dt)*N(0,1).
double ou_step(OuNoise& noise, double dt);
// Resets the state to zero and decays sigma.
void ou_end_episode(OuNoise& noise);

struct Transition {
  Observation obs;
  double action = 0.0;
  Observation next_obs;
  double reward = 0.0;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return storage_[i]; }

  // Uniform with replacement. Throws InsufficientDataError when size() < m.
  std::vector<Transition> sample(std::size_t m, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t cursor_ = 0;
};

// Database records as transitions; next_obs is rebuilt from next_delta_f.
std::vector<Transition> database_transitions(const LfcDatabase& db);

// (1/M) sum_i dQ/da|_{a=mu(s_i)} * dmu/dtheta (s_i).
MlpGradients policy_gradient(const Actor& actor, const Emulator& em,
                             std::span<const Transition> batch, const ZooConfig& zoo, Rng& rng);

// Emulator estimate of mean Q over a batch at the deterministic policy.
double batch_q_estimate(const Actor& actor, const Emulator& em, std::span<const Transition> batch);

struct TrainConfig {
  int episodes = 100;
  std::size_t buffer_capacity = 8000;
  std::size_t minibatch = 64;
  double learning_rate = 5e-4;
  int updates_per_step = 1;
  ZooConfig zoo;
  double ou_theta = 0.15;
  double ou_sigma = 0.02;
  double ou_decay = 0.97;
  std::uint64_t seed = 0;
  bool randomize_schedule = false;
  std::pair<double, double> magnitude_range{-0.03, 0.03};
  int checkpoint_every = 0;  // 0 disables
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

struct EpisodeLog {
  int episode = 0;  // 1-based
  Metrics metrics;
  bool diverged = false;
  int updates = 0;
};

struct TrainResult {
  Actor actor;
  std::vector<EpisodeLog> log;
};

// Called after every control step with the transition just stored.
using TransitionObserver = std::function<void(const Environment& before, const Transition&)>;

// `scenario` is used for every episode unless cfg.randomize_schedule is set.
TrainResult train(const PlantConfig& plant, const Scenario& scenario, const TrainConfig& cfg,
                  Actor actor, const Emulator& em, const LfcDatabase& db,
                  const TransitionObserver& observer = {});

void save_actor(const Actor& actor, const std::filesystem::path& path);
Actor load_actor(const std::filesystem::path& path);

// CSV: episode,reward,mean_abs_f,largest_var,q_sum,diverged
void save_train_log(const std::vector<EpisodeLog>& log, const std::filesystem::path& path);

}  // namespace lfc
