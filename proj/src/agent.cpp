#include "lfc/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>

#include "lfc/error.hpp"

namespace lfc {

void ObservationScales::validate() const {
  if (!(f_dev > 0.0) || !(f_int > 0.0) || !(f_der > 0.0)) {
    throw ConfigError("actor observation scales must be > 0");
  }
}

Eigen::Vector3d Actor::features(const Observation& obs) const {
  return {obs.f_dev / scales.f_dev, obs.f_int / scales.f_int, obs.f_der / scales.f_der};
}

double Actor::policy(const Observation& obs) const {
  return a_max * std::tanh(forward(net, features(obs))(0));
}

double act(const Actor& actor, const Observation& obs, double noise_value) {
  return std::clamp(actor.policy(obs) + noise_value, -actor.a_max, actor.a_max);
}

void PretrainConfig::validate() const {
  scales.validate();
  if (epochs < 1 || batch_size < 1 || patience < 1 || !(learning_rate > 0.0) || !(a_max > 0.0)) {
    throw ConfigError("pretrain epochs, batch_size, patience, learning_rate and a_max must be positive");
  }
  if (hidden.empty()) throw ConfigError("pretrain.hidden needs at least one layer");
}

Actor pretrain_actor(const LfcDatabase& db, const PretrainConfig& cfg, PretrainLog* log) {
  if (db.empty()) throw InsufficientDataError("cannot pretrain the actor on an empty database");
  cfg.validate();

  Actor actor;
  actor.scales = cfg.scales;
  actor.a_max = cfg.a_max;
  std::vector<int> sizes{3};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  actor.net = init_mlp(sizes, derive_seed(cfg.seed, 1));

  const auto n = static_cast<Eigen::Index>(db.size());
  Eigen::MatrixXd x(3, n);
  Eigen::RowVectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = db.records[static_cast<std::size_t>(i)];
    x.col(i) = actor.features(r.obs);
    y(i) = pid_control(r.obs, db.gains, cfg.a_max);
  }

  auto full_loss = [&](const Mlp& net) {
    const Eigen::RowVectorXd out = (cfg.a_max * forward_batch(net, x).array().tanh()).matrix();
    return (out - y).squaredNorm() / static_cast<double>(n);
  };

  Optimizer opt = Optimizer::adam(cfg.learning_rate);
  Rng rng(derive_seed(cfg.seed, 2));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Mlp best = actor.net;
  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto m = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd xb(3, m);
      Eigen::RowVectorXd yb(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        xb.col(j) = x.col(order[start + j]);
        yb(j) = y(order[start + j]);
      }
      const Eigen::ArrayXXd t = forward_batch(actor.net, xb).array().tanh();
      const Eigen::ArrayXXd out = cfg.a_max * t;
      const Eigen::MatrixXd upstream =
          (2.0 / m) * (out.row(0) - yb.array()) * cfg.a_max * (1.0 - t.row(0).square());
      const auto grads = backward_batch(actor.net, xb, upstream);
      if (!grads.params.finite()) {
        throw NonFiniteError("actor pretraining diverged at epoch " + std::to_string(epoch));
      }
      apply_update(actor.net, grads.params, opt, Direction::kDescent);
    }
    const double loss = full_loss(actor.net);
    if (!std::isfinite(loss)) {
      throw NonFiniteError("actor pretraining loss became non-finite at epoch " +
                           std::to_string(epoch));
    }
    if (log) log->loss.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best = actor.net;
      if (log) log->best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  actor.net = std::move(best);
  return actor;
}

OuNoise::OuNoise(double theta_, double sigma_, double decay_, std::uint64_t seed)
    : theta(theta_), sigma(sigma_), decay(decay_), rng(seed) {
  validate();
}

void OuNoise::validate() const {
  if (!(theta >= 0.0) || !(sigma >= 0.0)) throw ConfigError("OU theta and sigma must be >= 0");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("OU decay must lie in (0, 1]");
}

double ou_step(OuNoise& noise, double dt) {
  if (!(dt > 0.0)) throw InvalidStateError("OU step needs dt > 0");
  std::normal_distribution<double> normal(0.0, 1.0);
  // Always draw so the stream does not depend on sigma.
  const double z = normal(noise.rng);
  noise.value += noise.theta * (0.0 - noise.value) * dt + noise.sigma * std::sqrt(dt) * z;
  return noise.value;
}

void ou_end_episode(OuNoise& noise) {
  noise.value = 0.0;
  noise.sigma *= noise.decay;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
  storage_.reserve(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  if (storage_.size() < capacity_) {
    storage_.push_back(t);
  } else {
    storage_[cursor_] = t;
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t m, Rng& rng) const {
  if (m == 0 || storage_.size() < m) {
    throw InsufficientDataError("replay buffer holds " + std::to_string(storage_.size()) +
                                " transitions, minibatch needs " + std::to_string(m));
  }
  std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
  std::vector<Transition> batch;
  batch.reserve(m);
  for (std::size_t i = 0; i < m; ++i) batch.push_back(storage_[pick(rng)]);
  return batch;
}

std::vector<Transition> database_transitions(const LfcDatabase& db) {
  const double period = db.plant.sim.control_period;
  std::vector<Transition> out;
  out.reserve(db.size());
  for (const auto& r : db.records) {
    out.push_back({r.obs, r.action, observe(r.next_delta_f, r.obs.f_int, r.obs.f_dev, period),
                   q_value(r.next_delta_f)});
  }
  return out;
}

MlpGradients policy_gradient(const Actor& actor, const Emulator& em,
                             std::span<const Transition> batch, const ZooConfig& zoo, Rng& rng) {
  if (batch.empty()) throw InsufficientDataError("policy gradient needs a non-empty batch");
  const auto m = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd x(3, m);
  std::vector<Observation> obs(batch.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    obs[i] = batch[i].obs;
    if (!std::isfinite(obs[i].f_dev) || !std::isfinite(obs[i].f_int) || !std::isfinite(obs[i].f_der)) {
      throw NonFiniteError("non-finite observation in transition " + std::to_string(i));
    }
    x.col(i) = actor.features(obs[i]);
  }
  const Eigen::ArrayXXd t = forward_batch(actor.net, x).array().tanh();
  std::vector<double> actions(batch.size());
  Eigen::MatrixXd em_in(4, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    actions[i] = actor.a_max * t(0, i);
    em_in.col(i) = emulator_features(em.scales, obs[i], actions[i]);
  }
  const Eigen::MatrixXd predicted = forward_batch(em.net, em_in);
  const auto dphi = zoo_grad_batch(em, obs, actions, zoo, rng);

  Eigen::MatrixXd upstream(1, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double g_a = dq_da_from(predicted(0, i), dphi[i]);
    if (!std::isfinite(g_a)) {
      throw NonFiniteError("non-finite action gradient for transition " + std::to_string(i));
    }
    upstream(0, i) = g_a * actor.a_max * (1.0 - t(0, i) * t(0, i));
  }
  auto grads = backward_batch(actor.net, x, upstream).params;
  grads *= 1.0 / static_cast<double>(m);
  if (!grads.finite()) throw NonFiniteError("non-finite policy gradient");
  return grads;
}

double batch_q_estimate(const Actor& actor, const Emulator& em, std::span<const Transition> batch) {
  double q = 0.0;
  for (const auto& tr : batch) q += q_value(predict(em, tr.obs, actor.policy(tr.obs)));
  return q / static_cast<double>(batch.size());
}

void TrainConfig::validate() const {
  zoo.validate();
  if (episodes < 1 || buffer_capacity < 1 || minibatch < 1 || updates_per_step < 0 ||
      !(learning_rate > 0.0) || checkpoint_every < 0) {
    throw ConfigError("train settings must be positive");
  }
}

TrainResult train(const PlantConfig& plant, const Scenario& scenario, const TrainConfig& cfg,
                  Actor actor, const Emulator& em, const LfcDatabase& db,
                  const TransitionObserver& observer) {
  cfg.validate();
  ReplayBuffer buffer(cfg.buffer_capacity);
  for (const auto& t : database_transitions(db)) buffer.push(t);

  Rng sample_rng(derive_seed(cfg.seed, 1));
  Rng zoo_rng(derive_seed(cfg.zoo.seed, 2));
  OuNoise noise(cfg.ou_theta, cfg.ou_sigma, cfg.ou_decay, derive_seed(cfg.seed, 3));
  Optimizer opt = Optimizer::sgd(cfg.learning_rate);
  const double period = plant.sim.control_period;

  TrainResult result;
  for (int episode = 1; episode <= cfg.episodes; ++episode) {
    Scenario sc = scenario;
    if (cfg.randomize_schedule) {
      const auto s = derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(episode));
      sc.steps = randomized_training_schedule(s, cfg.magnitude_range, plant.sim.horizon);
      sc.wind.seed = derive_seed(s, 7);
    }
    Environment env(plant, sc);
    std::vector<double> trace;
    trace.reserve(plant.sim.control_steps());
    EpisodeLog entry;
    entry.episode = episode;
    while (!env.done()) {
      const Observation obs = env.observation();
      const double action = act(actor, obs, ou_step(noise, period));
      std::optional<Environment> before;
      if (observer) before.emplace(env);
      const auto out = env.step(action);
      if (out.diverged) break;
      trace.push_back(out.delta_f);
      const Transition tr{obs, action, out.obs, q_value(out.delta_f)};
      buffer.push(tr);
      if (observer) observer(*before, tr);
      for (int u = 0; u < cfg.updates_per_step; ++u) {
        if (buffer.size() < cfg.minibatch) break;
        const auto batch = buffer.sample(cfg.minibatch, sample_rng);
        const auto grads = policy_gradient(actor, em, batch, cfg.zoo, zoo_rng);
        apply_update(actor.net, grads, opt, Direction::kAscent);
        ++entry.updates;
      }
    }
    ou_end_episode(noise);
    entry.diverged = env.diverged();
    entry.metrics = compute_metrics(trace);
    result.log.push_back(entry);
    if (cfg.checkpoint_every > 0 && episode % cfg.checkpoint_every == 0 &&
        !cfg.checkpoint_dir.empty()) {
      std::filesystem::create_directories(cfg.checkpoint_dir);
      save_actor(actor, cfg.checkpoint_dir / ("actor_ep" + std::to_string(episode) + ".mlp"));
    }
  }
  result.actor = std::move(actor);
  return result;
}

void save_actor(const Actor& actor, const std::filesystem::path& path) {
  save_checkpoint(actor.net, path,
                  {{"a_max", actor.a_max},
                   {"scale.f_dev", actor.scales.f_dev},
                   {"scale.f_int", actor.scales.f_int},
                   {"scale.f_der", actor.scales.f_der}});
}

Actor load_actor(const std::filesystem::path& path) {
  auto ckpt = load_checkpoint(path);
  if (ckpt.net.input_size() != 3 || ckpt.net.output_size() != 1) {
    throw ParseError("field 'layer_sizes': actor needs 3 inputs and 1 output");
  }
  Actor actor;
  actor.a_max = ckpt.meta("a_max");
  actor.scales = {ckpt.meta("scale.f_dev"), ckpt.meta("scale.f_int"), ckpt.meta("scale.f_der")};
  actor.net = std::move(ckpt.net);
  return actor;
}

void save_train_log(const std::vector<EpisodeLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "episode,reward,mean_abs_f,largest_var,q_sum,diverged\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%d\n", e.episode,
                  e.metrics.reward, e.metrics.mean_abs_f, e.metrics.largest_var, e.metrics.q_sum,
                  e.diverged ? 1 : 0);
    out << buf;
  }
}

}  // namespace lfc
