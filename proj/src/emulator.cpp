#include "lfc/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "lfc/error.hpp"

namespace lfc {

void FeatureScales::validate() const {
  if (!(f_dev > 0.0) || !(f_int > 0.0) || !(f_der > 0.0) || !(action > 0.0)) {
    throw ConfigError("feature scales must be > 0");
  }
}

void EmulatorConfig::validate() const {
  scales.validate();
  if (!(validation_split > 0.0 && validation_split < 1.0)) {
    throw ConfigError("emulator.validation_split must lie in (0, 1)");
  }
  if (epochs < 1 || batch_size < 1 || patience < 1 || !(learning_rate > 0.0)) {
    throw ConfigError("emulator epochs, batch_size, patience and learning_rate must be positive");
  }
  if (hidden.empty()) throw ConfigError("emulator.hidden needs at least one layer");
}

void ZooConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("zoo.epsilon must be > 0");
  if (n_samples < 1) throw ConfigError("zoo.samples must be >= 1");
}

Eigen::Vector4d emulator_features(const FeatureScales& s, const Observation& obs, double action) {
  return {obs.f_dev / s.f_dev, obs.f_int / s.f_int, obs.f_der / s.f_der, action / s.action};
}

double predict(const Emulator& em, const Observation& obs, double action) {
  return forward(em.net, emulator_features(em.scales, obs, action))(0);
}

double action_gradient(const Emulator& em, const Observation& obs, double action) {
  const auto res = backward(em.net, emulator_features(em.scales, obs, action),
                            Eigen::VectorXd::Ones(1));
  return res.input(3) / em.scales.action;
}

std::vector<std::size_t> validation_indices(std::size_t n_records, const EmulatorConfig& cfg) {
  std::vector<std::size_t> order(n_records);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.seed, 0));
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::lround(cfg.validation_split * n_records));
  n_val = std::clamp<std::size_t>(n_val, n_records > 1 ? 1 : 0, n_records > 1 ? n_records - 1 : 0);
  order.resize(n_val);
  return order;
}

namespace {

double batch_mse(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y) {
  if (x.cols() == 0) return 0.0;
  const Eigen::MatrixXd pred = forward_batch(net, x);
  return (pred.row(0) - y).squaredNorm() / static_cast<double>(x.cols());
}

}  // namespace

EmulatorFit train_emulator(const LfcDatabase& db, const EmulatorConfig& cfg) {
  if (db.empty()) throw InsufficientDataError("cannot train the emulator on an empty database");
  cfg.validate();

  const std::size_t n = db.size();
  std::vector<char> is_val(n, 0);
  for (std::size_t i : validation_indices(n, cfg)) is_val[i] = 1;
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < n; ++i) (is_val[i] ? val_idx : train_idx).push_back(i);
  if (train_idx.empty()) train_idx = val_idx;

  auto gather = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd& x, Eigen::RowVectorXd& y) {
    x.resize(4, static_cast<Eigen::Index>(idx.size()));
    y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto& r = db.records[idx[j]];
      x.col(j) = emulator_features(cfg.scales, r.obs, r.action);
      y(j) = r.next_delta_f;
    }
  };
  Eigen::MatrixXd x_train, x_val;
  Eigen::RowVectorXd y_train, y_val;
  gather(train_idx, x_train, y_train);
  gather(val_idx, x_val, y_val);

  std::vector<int> sizes{4};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  EmulatorFit fit;
  fit.emulator.scales = cfg.scales;
  Mlp net = init_mlp(sizes, derive_seed(cfg.seed, 1));
  Optimizer opt = Optimizer::adam(cfg.learning_rate);
  Rng rng(derive_seed(cfg.seed, 2));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(x_train.cols()));
  std::iota(order.begin(), order.end(), 0);
  Mlp best = net;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;
  const Eigen::Index batch = cfg.batch_size;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch));
      const auto m = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd xb(4, m);
      Eigen::RowVectorXd yb(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        xb.col(j) = x_train.col(order[start + j]);
        yb(j) = y_train(order[start + j]);
      }
      const Eigen::MatrixXd pred = forward_batch(net, xb);
      const Eigen::MatrixXd upstream = 2.0 * (pred.row(0) - yb) / static_cast<double>(m);
      const auto grads = backward_batch(net, xb, upstream);
      if (!grads.params.finite()) {
        throw NonFiniteError("emulator training diverged at epoch " + std::to_string(epoch) +
                             ", batch starting at " + std::to_string(start));
      }
      apply_update(net, grads.params, opt, Direction::kDescent);
    }
    const double train_loss = batch_mse(net, x_train, y_train);
    const double val_loss = val_idx.empty() ? train_loss : batch_mse(net, x_val, y_val);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw NonFiniteError("emulator loss became non-finite at epoch " + std::to_string(epoch) +
                           " (train " + std::to_string(train_loss) + ", validation " +
                           std::to_string(val_loss) + ")");
    }
    fit.log.train_loss.push_back(train_loss);
    fit.log.validation_loss.push_back(val_loss);
    if (val_loss < best_val) {
      best_val = val_loss;
      best = net;
      fit.log.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  fit.emulator.net = std::move(best);
  fit.log.validation_rmse = std::sqrt(best_val);
  const auto& y_ref = val_idx.empty() ? y_train : y_val;
  fit.log.validation_target_rms = std::sqrt(y_ref.squaredNorm() / static_cast<double>(y_ref.size()));
  return fit;
}

std::vector<double> draw_directions(const ZooConfig& zoo, Rng& rng) {
  std::vector<double> u(static_cast<std::size_t>(zoo.n_samples));
  if (zoo.sampling == ZooSampling::kIid) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : u) v = normal(rng);
    return u;
  }
  static const boost::math::normal_distribution<double> standard;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double k = static_cast<double>(zoo.n_samples);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double p = std::clamp((static_cast<double>(i) + unit(rng)) / k, 1e-300, 1.0 - 1e-16);
    u[i] = boost::math::quantile(standard, p);
  }
  return u;
}

double zoo_grad(const Emulator& em, const Observation& obs, double action, const ZooConfig& zoo,
                Rng& rng) {
  const Observation o[] = {obs};
  const double a[] = {action};
  return zoo_grad_batch(em, o, a, zoo, rng).front();
}

double zoo_grad(const Emulator& em, const Observation& obs, double action, const ZooConfig& zoo) {
  Rng rng(zoo.seed);
  return zoo_grad(em, obs, action, zoo, rng);
}

std::vector<double> zoo_grad_batch(const Emulator& em, std::span<const Observation> obs,
                                   std::span<const double> actions, const ZooConfig& zoo,
                                   Rng& rng) {
  zoo.validate();
  if (obs.size() != actions.size()) throw DimensionError("observation/action count mismatch");
  const auto k = static_cast<Eigen::Index>(zoo.n_samples);
  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd x(4, 2 * k * n);
  std::vector<std::vector<double>> dirs(obs.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    dirs[i] = draw_directions(zoo, rng);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double shift = zoo.epsilon * dirs[i][j];
      x.col(2 * (i * k + j)) = emulator_features(em.scales, obs[i], actions[i] + shift);
      x.col(2 * (i * k + j) + 1) = emulator_features(em.scales, obs[i], actions[i] - shift);
    }
  }
  // Chunked so the hidden activations stay cache sized.
  constexpr Eigen::Index kChunk = 256;
  Eigen::RowVectorXd y(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); c += kChunk) {
    const Eigen::Index w = std::min(kChunk, x.cols() - c);
    y.segment(c, w) = forward_batch(em.net, x.middleCols(c, w)).row(0);
  }
  std::vector<double> out(obs.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double diff = y(2 * (i * k + j)) - y(2 * (i * k + j) + 1);
      acc += diff / (2.0 * zoo.epsilon) * dirs[i][j];
    }
    out[i] = acc / static_cast<double>(k);
  }
  return out;
}

double dq_da_from(double predicted_delta_f, double dphi_da) {
  return -2.0 * predicted_delta_f * dphi_da;
}

double dq_da(const Emulator& em, const Observation& obs, double action, const ZooConfig& zoo,
             Rng& rng) {
  return dq_da_from(predict(em, obs, action), zoo_grad(em, obs, action, zoo, rng));
}

double dq_da(const Emulator& em, const Observation& obs, double action, const ZooConfig& zoo) {
  Rng rng(zoo.seed);
  return dq_da(em, obs, action, zoo, rng);
}

void save_emulator(const Emulator& em, const std::filesystem::path& path) {
  save_checkpoint(em.net, path,
                  {{"scale.f_dev", em.scales.f_dev},
                   {"scale.f_int", em.scales.f_int},
                   {"scale.f_der", em.scales.f_der},
                   {"scale.action", em.scales.action}});
}

Emulator load_emulator(const std::filesystem::path& path) {
  auto ckpt = load_checkpoint(path);
  if (ckpt.net.input_size() != 4 || ckpt.net.output_size() != 1) {
    throw ParseError("field 'layer_sizes': emulator needs 4 inputs and 1 output");
  }
  Emulator em;
  em.scales = {ckpt.meta("scale.f_dev"), ckpt.meta("scale.f_int"), ckpt.meta("scale.f_der"),
               ckpt.meta("scale.action")};
  em.net = std::move(ckpt.net);
  return em;
}

}  // namespace lfc
