#include "lfc/neural.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "lfc/error.hpp"

namespace lfc {

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

void Mlp::validate() const {
  if (layer_sizes.size() < 2) throw DimensionError("network needs at least two layers");
  if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size()) {
    throw DimensionError("layer count does not match layer_sizes");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
        biases[l].size() != layer_sizes[l + 1]) {
      throw DimensionError("layer " + std::to_string(l) + " has inconsistent shape");
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw NonFiniteError("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

bool Mlp::operator==(const Mlp& other) const {
  if (layer_sizes != other.layer_sizes) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) return false;
  }
  return true;
}

MlpGradients MlpGradients::zeros_like(const Mlp& net) {
  MlpGradients g;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

MlpGradients& MlpGradients::operator+=(const MlpGradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

MlpGradients& MlpGradients::operator*=(double s) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= s;
    biases[l] *= s;
  }
  return *this;
}

bool MlpGradients::finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

double MlpGradients::squared_norm() const { return dot(*this); }

double MlpGradients::dot(const MlpGradients& other) const {
  double s = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    s += weights[l].cwiseProduct(other.weights[l]).sum();
    s += biases[l].dot(other.biases[l]);
  }
  return s;
}

Mlp init_mlp(std::span<const int> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw DimensionError("network needs at least two layers");
  for (int n : layer_sizes) {
    if (n <= 0) throw DimensionError("layer sizes must be positive");
  }
  Mlp net;
  net.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const double bound = std::sqrt(3.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(layer_sizes[l + 1], fan_in);
    // Row-major fill order keeps the draw sequence identical to the file layout.
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(layer_sizes[l + 1]));
  }
  return net;
}

namespace {

void check_input(const Mlp& net, Eigen::Index rows) {
  if (rows != net.input_size()) {
    throw DimensionError("input has dimension " + std::to_string(rows) + ", network expects " +
                         std::to_string(net.input_size()));
  }
}

// Eigen's double tanh is scalar code and dominated the batched passes. This
// form vectorizes; absolute error stays within a few ulp of 1.
template <typename Derived>
void tanh_inplace(Eigen::PlainObjectBase<Derived>& z) {
  using A = Eigen::Array<double, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
  const A e = (-2.0 * z.array().abs()).exp();
  z = (z.array().sign() * (1.0 - e) / (1.0 + e)).matrix();
}

// Activations of every layer, a[0] = inputs.
std::vector<Eigen::MatrixXd> forward_all(const Mlp& net, const Eigen::MatrixXd& inputs) {
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(net.num_layers() + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Eigen::MatrixXd z = net.weights[l] * acts.back();
    z.colwise() += net.biases[l];
    if (l + 1 < net.num_layers()) tanh_inplace(z);
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& x) {
  check_input(net, x.size());
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Eigen::VectorXd z = net.weights[l] * a + net.biases[l];
    if (l + 1 < net.num_layers()) tanh_inplace(z);
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs) {
  check_input(net, inputs.rows());
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Eigen::MatrixXd z = net.weights[l] * a;
    z.colwise() += net.biases[l];
    if (l + 1 < net.num_layers()) tanh_inplace(z);
    a = std::move(z);
  }
  return a;
}

BatchBackwardResult backward_batch(const Mlp& net, const Eigen::MatrixXd& inputs,
                                   const Eigen::MatrixXd& upstream) {
  check_input(net, inputs.rows());
  if (upstream.rows() != net.output_size() || upstream.cols() != inputs.cols()) {
    throw DimensionError("upstream gradient shape does not match network output");
  }
  const auto acts = forward_all(net, inputs);
  BatchBackwardResult out;
  out.params = MlpGradients::zeros_like(net);
  Eigen::MatrixXd delta = upstream;  // dL/dz for the current layer
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    out.params.weights[l].noalias() = delta * acts[l].transpose();
    out.params.biases[l] = delta.rowwise().sum();
    Eigen::MatrixXd back = net.weights[l].transpose() * delta;
    if (l > 0) {
      back.array() *= 1.0 - acts[l].array().square();
    }
    delta = std::move(back);
  }
  out.input = std::move(delta);
  return out;
}

BackwardResult backward(const Mlp& net, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& upstream) {
  auto batch = backward_batch(net, Eigen::MatrixXd(x), Eigen::MatrixXd(upstream));
  return {std::move(batch.params), batch.input.col(0)};
}

void apply_update(Mlp& net, const MlpGradients& grads, Optimizer& opt, Direction direction) {
  if (grads.weights.size() != net.num_layers()) {
    throw DimensionError("gradient layer count does not match network");
  }
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    if (grads.weights[l].rows() != net.weights[l].rows() ||
        grads.weights[l].cols() != net.weights[l].cols() ||
        grads.biases[l].size() != net.biases[l].size()) {
      throw DimensionError("gradient shape does not match layer " + std::to_string(l));
    }
  }
  if (!grads.finite()) throw NonFiniteError("non-finite gradient rejected");
  const double sign = direction == Direction::kAscent ? 1.0 : -1.0;

  if (opt.algorithm == Algorithm::kSgd) {
    const double scale = sign * opt.learning_rate;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      net.weights[l] += scale * grads.weights[l];
      net.biases[l] += scale * grads.biases[l];
    }
    ++opt.step_count;
    return;
  }

  if (opt.first_moment.weights.size() != net.num_layers()) {
    opt.first_moment = MlpGradients::zeros_like(net);
    opt.second_moment = MlpGradients::zeros_like(net);
  }
  ++opt.step_count;
  const double t = static_cast<double>(opt.step_count);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  const double step = sign * opt.learning_rate;
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
    param.array() += step * (m.array() / c1) / ((v.array() / c2).sqrt() + opt.epsilon);
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    update(net.weights[l], grads.weights[l], opt.first_moment.weights[l],
           opt.second_moment.weights[l]);
    update(net.biases[l], grads.biases[l], opt.first_moment.biases[l],
           opt.second_moment.biases[l]);
  }
}

LossAndGrad mse_loss_and_grad(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (pred.size() != target.size() || pred.size() == 0) {
    throw DimensionError("prediction and target dimensions differ");
  }
  const Eigen::VectorXd diff = pred - target;
  const double n = static_cast<double>(pred.size());
  return {diff.squaredNorm() / n, 2.0 * diff / n};
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double Checkpoint::meta(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  throw ParseError("checkpoint is missing metadata field '" + key + "'");
}

void save_checkpoint(const Mlp& net, const std::filesystem::path& path,
                     const CheckpointMetadata& metadata) {
  net.validate();
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "mlp v1 ";
  for (std::size_t i = 0; i < net.layer_sizes.size(); ++i) {
    out << (i ? "," : "") << net.layer_sizes[i];
  }
  out << " tanh\n";
  for (const auto& [key, value] : metadata) out << "meta " << key << ' ' << format_double(value) << '\n';
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) out << format_double(w(r, c)) << '\n';
    }
    for (Eigen::Index r = 0; r < net.biases[l].size(); ++r) {
      out << format_double(net.biases[l](r)) << '\n';
    }
  }
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

namespace {

double parse_double(const std::string& text, const std::string& field) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ParseError("field '" + field + "': cannot parse '" + text + "' as a number");
  }
  return v;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("field 'header': file is empty");

  std::istringstream header(line);
  std::string magic, version, sizes_text, activation;
  header >> magic >> version >> sizes_text >> activation;
  if (magic != "mlp") throw ParseError("field 'header': expected 'mlp', got '" + magic + "'");
  if (version != "v1") throw ParseError("field 'version': unsupported '" + version + "'");
  if (activation != "tanh") {
    throw ParseError("field 'activation': unsupported '" + activation + "'");
  }
  std::vector<int> sizes;
  {
    std::istringstream ss(sizes_text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      int n = 0;
      auto res = std::from_chars(item.data(), item.data() + item.size(), n);
      if (res.ec != std::errc() || res.ptr != item.data() + item.size() || n <= 0) {
        throw ParseError("field 'layer_sizes': bad entry '" + item + "'");
      }
      sizes.push_back(n);
    }
  }
  if (sizes.size() < 2) throw ParseError("field 'layer_sizes': need at least two layers");

  Checkpoint ckpt;
  std::vector<double> values;
  std::size_t expected = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    expected += static_cast<std::size_t>(sizes[l + 1]) * (sizes[l] + 1);
  }
  values.reserve(expected);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("meta ", 0) == 0) {
      if (!values.empty()) throw ParseError("field 'meta': metadata after parameter payload");
      std::istringstream ms(line.substr(5));
      std::string key, value;
      ms >> key >> value;
      if (key.empty() || value.empty()) throw ParseError("field 'meta': malformed line");
      ckpt.metadata.emplace_back(key, parse_double(value, "meta " + key));
      continue;
    }
    values.push_back(parse_double(line, "parameter " + std::to_string(values.size())));
  }
  if (values.size() != expected) {
    throw ParseError("field 'payload': expected " + std::to_string(expected) +
                     " parameters for the declared layer sizes, found " +
                     std::to_string(values.size()));
  }

  Mlp& net = ckpt.net;
  net.layer_sizes = sizes;
  std::size_t pos = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = values[pos++];
    }
    Eigen::VectorXd b(sizes[l + 1]);
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = values[pos++];
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  net.validate();
  return ckpt;
}

}  // namespace lfc
