#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "lfc/emulator.hpp"
#include "lfc/error.hpp"
#include "support.hpp"

namespace lfc {
namespace {

const PidGains kGains{0.1, 1.1, 0.25};

LfcDatabase small_database(int episodes = 6) {
  DatabaseSpec spec;
  spec.episodes = episodes;
  spec.seed = 21;
  return generate_database(PlantConfig{}, kGains, spec);
}

EmulatorConfig small_config() {
  EmulatorConfig cfg;
  cfg.hidden = {32, 32};
  cfg.epochs = 200;
  cfg.learning_rate = 3e-3;
  cfg.seed = 5;
  return cfg;
}

const Emulator& trained() {
  static const Emulator em = train_emulator(small_database(), small_config()).emulator;
  return em;
}

// Emulator whose output is c * action in raw units.
Emulator linear_in_action(double c) {
  Emulator em;
  em.net.layer_sizes = {4, 1};
  em.net.weights = {Eigen::RowVector4d(0, 0, 0, c * em.scales.action)};
  em.net.biases = {Eigen::VectorXd::Zero(1)};
  return em;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

TEST(TrainEmulator, ConstantTarget) {
  auto db = small_database(3);
  for (auto& r : db.records) r.next_delta_f = 0.0125;
  auto cfg = small_config();
  cfg.hidden = {8};
  cfg.epochs = 5000;
  cfg.learning_rate = 1e-3;
  cfg.patience = cfg.epochs;
  const auto fit = train_emulator(db, cfg);
  EXPECT_LT(fit.log.validation_rmse * fit.log.validation_rmse, 1e-8);
  for (const auto& r : db.records) EXPECT_NEAR(predict(fit.emulator, r.obs, r.action), 0.0125, 1e-3);
}

TEST(TrainEmulator, DeterministicPerSeed) {
  const auto db = small_database(2);
  auto cfg = small_config();
  cfg.epochs = 3;
  const auto a = train_emulator(db, cfg);
  const auto b = train_emulator(db, cfg);
  EXPECT_TRUE(a.emulator.net == b.emulator.net);
  EXPECT_EQ(a.log.train_loss, b.log.train_loss);
  cfg.seed = 6;
  EXPECT_FALSE(train_emulator(db, cfg).emulator.net == a.emulator.net);
}

TEST(TrainEmulator, LogAndSplit) {
  const auto db = small_database(2);
  auto cfg = small_config();
  cfg.epochs = 4;
  const auto fit = train_emulator(db, cfg);
  EXPECT_EQ(fit.log.train_loss.size(), 4u);
  EXPECT_EQ(fit.log.validation_loss.size(), 4u);
  EXPECT_EQ(fit.emulator.net.layer_sizes, (std::vector<int>{4, 32, 32, 1}));
  const auto idx = validation_indices(db.size(), cfg);
  EXPECT_EQ(idx.size(), 80u);
  EXPECT_EQ(idx, validation_indices(db.size(), cfg));
}

TEST(TrainEmulator, LinearPlantHeldOutAccuracy) {
  const auto db = small_database();
  const auto fit = train_emulator(db, small_config());
  EXPECT_LE(fit.log.validation_rmse, 0.1 * fit.log.validation_target_rms);
  double se = 0.0;
  const auto idx = validation_indices(db.size(), small_config());
  for (auto i : idx) {
    const auto& r = db.records[i];
    se += std::pow(predict(fit.emulator, r.obs, r.action) - r.next_delta_f, 2);
  }
  EXPECT_NEAR(std::sqrt(se / idx.size()), fit.log.validation_rmse, 1e-12);
}

TEST(TrainEmulator, Errors) {
  EXPECT_THROW(train_emulator(LfcDatabase{}, small_config()), InsufficientDataError);
  auto cfg = small_config();
  cfg.validation_split = 1.0;
  EXPECT_THROW(train_emulator(small_database(1), cfg), ConfigError);
  cfg = small_config();
  cfg.scales.action = 0.0;
  EXPECT_THROW(train_emulator(small_database(1), cfg), ConfigError);
  auto db = small_database(1);
  db.records[3].next_delta_f = 1e308;
  cfg = small_config();
  cfg.epochs = 2;
  EXPECT_THROW(train_emulator(db, cfg), NonFiniteError);
}

TEST(Predict, Pure) {
  const Observation o{0.01, -0.002, 0.05};
  EXPECT_EQ(predict(trained(), o, 0.01), predict(trained(), o, 0.01));
}

TEST(ActionGradient, MatchesFiniteDifference) {
  const auto db = small_database(1);
  for (std::size_t i = 0; i < db.size(); i += 17) {
    const auto& r = db.records[i];
    const double h = 1e-6;
    const double fd = (predict(trained(), r.obs, r.action + h) - predict(trained(), r.obs, r.action - h)) / (2 * h);
    EXPECT_NEAR(action_gradient(trained(), r.obs, r.action), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Zoo, LinearMapConvergesToSlope) {
  const double c = -0.37;
  ZooConfig zoo;
  zoo.n_samples = 10000;
  zoo.sampling = ZooSampling::kIid;
  zoo.seed = 3;
  const auto em = linear_in_action(c);
  const double est = zoo_grad(em, {0.01, 0.0, 0.0}, 0.02, zoo);
  EXPECT_NEAR(est, c, 0.05 * std::abs(c));

  // Per sample the symmetric quotient is exact, so the estimate is c * mean(u^2).
  Rng rng(zoo.seed);
  const auto u = draw_directions(zoo, rng);
  double m2 = 0.0;
  for (double v : u) m2 += v * v;
  m2 /= u.size();
  EXPECT_NEAR(est, c * m2, 1e-9);
}

TEST(Zoo, StratifiedDirectionsHaveUnitSecondMoment) {
  ZooConfig zoo;
  zoo.n_samples = 100;
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const auto u = draw_directions(zoo, rng);
    double m1 = 0.0, m2 = 0.0;
    for (double v : u) {
      m1 += v;
      m2 += v * v;
    }
    EXPECT_NEAR(m1 / 100, 0.0, 0.05);
    EXPECT_NEAR(m2 / 100, 1.0, 0.1);
  }
}

TEST(Zoo, IndependentOfActionGivesZero) {
  Emulator em = linear_in_action(0.0);
  em.net.weights[0] = Eigen::RowVector4d(0.3, -1.0, 2.0, 0.0);
  em.net.biases[0](0) = 0.2;
  for (auto sampling : {ZooSampling::kIid, ZooSampling::kStratified}) {
    ZooConfig zoo;
    zoo.sampling = sampling;
    EXPECT_EQ(zoo_grad(em, {0.01, 0.02, 0.03}, 0.05, zoo), 0.0);
  }
}

TEST(Zoo, QuadraticExactPerSample) {
  const double alpha = 0.3, beta = -1.7, gamma = 40.0, a = 0.02, eps = 1e-3;
  auto f = [&](double x) { return alpha + beta * x + gamma * x * x; };
  for (double u : {-2.0, -0.3, 0.5, 1.7}) {
    const double dirs[] = {u};
    EXPECT_NEAR(zoo_estimate(f, a, eps, dirs), (beta + 2 * gamma * a) * u * u, 1e-10);
  }
}

// Spread of the iid estimator shrinks as 1/sqrt(K): quadrupling K halves the
// standard deviation (variance drops to a quarter).
TEST(Zoo, IidSpreadScalesAsInverseRootK) {
  const double c = 2.0;
  auto spread = [&](int k) {
    ZooConfig zoo;
    zoo.sampling = ZooSampling::kIid;
    zoo.n_samples = k;
    Rng rng(99);
    std::vector<double> est(4000);
    for (auto& e : est) {
      const auto u = draw_directions(zoo, rng);
      e = zoo_estimate([&](double x) { return c * x; }, 0.0, 1e-4, u);
    }
    const double m = mean_of(est);
    double v = 0.0;
    for (double e : est) v += (e - m) * (e - m);
    return std::sqrt(v / est.size());
  };
  const double ratio = spread(16) / spread(64);
  EXPECT_NEAR(ratio, 2.0, 0.3 * 2.0);
  EXPECT_NEAR(spread(64), c * std::sqrt(2.0 / 64), 0.1 * c * std::sqrt(2.0 / 64));
}

TEST(Zoo, BatchMatchesSingle) {
  ZooConfig zoo;
  zoo.seed = 4;
  const std::vector<Observation> obs{{0.01, 0.0, 0.1}, {-0.02, 0.01, -0.3}, {0.0, 0.0, 0.0}};
  const std::vector<double> acts{0.01, -0.02, 0.0};
  Rng r1(7), r2(7);
  const auto batch = zoo_grad_batch(trained(), obs, acts, zoo, r1);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    EXPECT_NEAR(batch[i], zoo_grad(trained(), obs[i], acts[i], zoo, r2), 1e-9);
  }
  EXPECT_EQ(zoo_grad(trained(), obs[0], acts[0], zoo), zoo_grad(trained(), obs[0], acts[0], zoo));
}

TEST(Zoo, TracksBackpropOnTrainedEmulator) {
  const auto db = small_database();
  ZooConfig zoo;
  zoo.n_samples = 100;
  Rng rng(12);
  double rel = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < db.size() && n < 100; i += 11, ++n) {
    const auto& r = db.records[i];
    const double exact = action_gradient(trained(), r.obs, r.action);
    rel += std::abs(zoo_grad(trained(), r.obs, r.action, zoo, rng) - exact) / std::abs(exact);
  }
  EXPECT_LT(rel / n, 0.05);
}

TEST(QValue, HandValues) {
  EXPECT_EQ(q_value(0.0), 0.0);
  EXPECT_DOUBLE_EQ(q_value(0.1), -0.01);
  EXPECT_DOUBLE_EQ(q_value(-0.1), -0.01);
  for (double f : {-3.0, -1e-9, 1e-9, 0.5}) EXPECT_LT(q_value(f), 0.0);
}

TEST(DqDa, HandValues) {
  EXPECT_EQ(dq_da_from(0.0, -123.0), 0.0);
  EXPECT_DOUBLE_EQ(dq_da_from(0.01, -0.5), 0.01);
  EXPECT_GT(dq_da_from(0.02, -0.1), 0.0);
  EXPECT_LT(dq_da_from(-0.02, -0.1), 0.0);
}

TEST(DqDa, MatchesFiniteDifferenceOfSquaredPrediction) {
  const auto db = small_database(2);
  ZooConfig zoo;
  zoo.n_samples = 100;
  Rng rng(2);
  int checked = 0;
  for (std::size_t i = 0; i < db.size(); i += 7) {
    const auto& r = db.records[i];
    const double p = predict(trained(), r.obs, r.action);
    if (std::abs(p) < 1e-5) continue;
    const double h = 1e-6;
    auto sq = [&](double a) { return std::pow(predict(trained(), r.obs, a), 2); };
    const double fd = -(sq(r.action + h) - sq(r.action - h)) / (2 * h);
    const double est = dq_da(trained(), r.obs, r.action, zoo, rng);
    EXPECT_NEAR(est, fd, 0.1 * std::abs(fd)) << i;
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(EmulatorCheckpoint, RoundTrip) {
  test::TempDir dir;
  Emulator em = trained();
  em.scales.f_der = 0.75;
  save_emulator(em, dir / "em.mlp");
  const auto back = load_emulator(dir / "em.mlp");
  EXPECT_TRUE(back.net == em.net);
  EXPECT_EQ(back.scales.f_der, 0.75);
  EXPECT_EQ(back.scales.action, em.scales.action);
  const Observation o{0.01, 0.02, -0.1};
  EXPECT_EQ(predict(back, o, 0.013), predict(em, o, 0.013));

  save_checkpoint(init_mlp(std::vector<int>{3, 4, 1}, 0), dir / "actor.mlp");
  EXPECT_THROW(load_emulator(dir / "actor.mlp"), ParseError);
}

TEST(ZooConfig, Validation) {
  ZooConfig z;
  z.epsilon = 0;
  EXPECT_THROW(z.validate(), ConfigError);
  z = {};
  z.n_samples = 0;
  EXPECT_THROW(z.validate(), ConfigError);
}

}  // namespace
}  // namespace lfc
