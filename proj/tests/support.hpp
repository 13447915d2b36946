#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "lfc/neural.hpp"
#include "lfc/plant.hpp"

namespace lfc::test {

// Open loop stable variant of the plant (larger droop and damping).
inline PlantParams stable_params() {
  PlantParams p;
  p.r_droop = 2.4;
  p.d = 0.0083;
  return p;
}

// x' = A x + b for the linear plant with u_c and p_d held constant.
inline Eigen::Matrix3d plant_matrix(const PlantParams& p) {
  Eigen::Matrix3d a;
  a << -p.d / (2 * p.h), 1 / (2 * p.h), 0,
       0, -1 / p.t_t, 1 / p.t_t,
       -1 / (p.r_droop * p.t_g), 0, -1 / p.t_g;
  return a;
}

inline Eigen::Vector3d plant_input(const PlantParams& p, double u_c, double p_d) {
  return {-p_d / (2 * p.h), 0.0, u_c / p.t_g};
}

// Exact one-step propagator of the affine system via the augmented
// matrix exponential.
inline Eigen::Matrix4d exact_propagator(const PlantParams& p, double u_c, double p_d, double dt) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m.topLeftCorner<3, 3>() = plant_matrix(p);
  m.topRightCorner<3, 1>() = plant_input(p, u_c, p_d);
  return (m * dt).exp();
}

inline Eigen::Vector3d as_vec(const PlantState& s) { return {s.delta_f, s.delta_pm, s.delta_pg}; }

inline double param(const Mlp& net, std::size_t l, bool bias, Eigen::Index r, Eigen::Index c) {
  return bias ? net.biases[l](r) : net.weights[l](r, c);
}

inline double& param(Mlp& net, std::size_t l, bool bias, Eigen::Index r, Eigen::Index c) {
  return bias ? net.biases[l](r) : net.weights[l](r, c);
}

inline double grad_of(const MlpGradients& g, std::size_t l, bool bias, Eigen::Index r, Eigen::Index c) {
  return bias ? g.biases[l](r) : g.weights[l](r, c);
}

// Worst relative mismatch between backward and central differences.
inline double gradient_check(const Mlp& net0, const Eigen::VectorXd& x, const Eigen::VectorXd& up) {
  Mlp net = net0;
  const auto exact = backward(net, x, up);
  const double h = 1e-5;
  auto objective = [&] { return up.dot(forward(net, x)); };
  double worst = 0.0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (int bias = 0; bias < 2; ++bias) {
      const Eigen::Index rows = net.weights[l].rows();
      const Eigen::Index cols = bias ? 1 : net.weights[l].cols();
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          double& p = param(net, l, bias, r, c);
          const double saved = p;
          p = saved + h;
          const double plus = objective();
          p = saved - h;
          const double minus = objective();
          p = saved;
          const double fd = (plus - minus) / (2 * h);
          const double g = grad_of(exact.params, l, bias, r, c);
          worst = std::max(worst, std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-6}));
        }
      }
    }
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const double fd = (up.dot(forward(net, xp)) - up.dot(forward(net, xm))) / (2 * h);
    const double g = exact.input(i);
    worst = std::max(worst, std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-6}));
  }
  return worst;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lfc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace lfc::test
