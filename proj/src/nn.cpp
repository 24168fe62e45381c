#include "fxchain/nn.hpp"

#include <cmath>
#include <random>

#include "fxchain/error.hpp"
#include "fxchain/kernels.hpp"
#include "fxchain/random.hpp"

namespace fxchain::nn {
namespace {

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

Adam::Adam(std::size_t size, AdamConfig cfg) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> w, std::span<const double> g) {
  if (w.size() != m_.size() || g.size() != m_.size()) throw Error(Errc::ShapeMismatch, "optimizer size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < w.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
    w[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
  }
}

void init_uniform_fan_in(std::span<double> w, std::size_t fan_in, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : w) v = dist(rng);
}

void Mlp::layout() {
  layers_.clear();
  std::size_t wo = 0, ro = 0, in = shape_.inputs;
  for (std::size_t h : shape_.hidden) {
    Layer l{in, h, wo, wo + h * in, 0, 0, 0, ro, ro + h};
    l.gamma = l.b + h;
    l.beta = l.gamma + h;
    l.slope = l.beta + h;
    wo = l.slope + h;
    ro += 2 * h;
    layers_.push_back(l);
    in = h;
  }
  Layer out{in, shape_.outputs, wo, wo + shape_.outputs * in, 0, 0, 0, 0, 0};
  wo = out.b + shape_.outputs;
  layers_.push_back(out);
  weights_.resize(wo);
  running_.resize(ro);
}

Mlp::Mlp(MlpShape shape, std::uint64_t seed) : shape_(std::move(shape)) {
  if (shape_.inputs == 0 || shape_.outputs == 0) throw Error(Errc::InvalidArgument, "MLP needs inputs and outputs");
  layout();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const auto s = derive_seed(seed, {i});
    init_uniform_fan_in(std::span(weights_).subspan(l.w, l.in * l.out), l.in, s);
    init_uniform_fan_in(std::span(weights_).subspan(l.b, l.out), l.in, mix64(s));
    if (i + 1 < layers_.size()) {
      std::fill_n(weights_.begin() + static_cast<std::ptrdiff_t>(l.gamma), l.out, 1.0);
      std::fill_n(weights_.begin() + static_cast<std::ptrdiff_t>(l.beta), l.out, 0.0);
      std::fill_n(weights_.begin() + static_cast<std::ptrdiff_t>(l.slope), l.out, kInitialSlope);
      std::fill_n(running_.begin() + static_cast<std::ptrdiff_t>(l.mean), l.out, 0.0);
      std::fill_n(running_.begin() + static_cast<std::ptrdiff_t>(l.var), l.out, 1.0);
    }
  }
}

Mlp::Mlp(MlpShape shape, std::vector<double> weights, std::vector<double> running) : shape_(std::move(shape)) {
  layout();
  if (weights.size() != weights_.size() || running.size() != running_.size()) {
    throw Error(Errc::ShapeMismatch, "stored weights do not match the network shape");
  }
  weights_ = std::move(weights);
  running_ = std::move(running);
}

std::vector<double> Mlp::predict(std::span<const double> input) const {
  if (input.size() != shape_.inputs) throw Error(Errc::ShapeMismatch, "MLP input has the wrong size");
  std::vector<double> a(input.begin(), input.end());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    std::vector<double> z(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
      z[o] = weights_[l.b + o] + kernels::dot(std::span(weights_).subspan(l.w + o * l.in, l.in), a);
    }
    if (i + 1 == layers_.size()) {
      for (double& v : z) v = sigmoid(v);
      return z;
    }
    for (std::size_t o = 0; o < l.out; ++o) {
      const double xhat = (z[o] - running_[l.mean + o]) / std::sqrt(running_[l.var + o] + kBatchNormEpsilon);
      const double bn = weights_[l.gamma + o] * xhat + weights_[l.beta + o];
      z[o] = bn > 0.0 ? bn : weights_[l.slope + o] * bn;
    }
    a = std::move(z);
  }
  return a;
}

std::vector<double> Mlp::forward_train(std::span<const double> batch, std::size_t rows, Cache& cache) {
  if (rows < 2) throw Error(Errc::InvalidArgument, "batch normalization needs at least 2 rows");
  if (batch.size() != rows * shape_.inputs) throw Error(Errc::ShapeMismatch, "MLP batch has the wrong size");
  const std::size_t hidden = layers_.size() - 1;
  cache = Cache{};
  cache.batch = rows;
  cache.inputs.resize(layers_.size());
  cache.xhat.resize(hidden);
  cache.bn_out.resize(hidden);
  cache.inv_std.resize(hidden);
  std::vector<double> a(batch.begin(), batch.end());
  const double n = static_cast<double>(rows);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    std::vector<double> z(rows * l.out);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::span<const double> row(a.data() + r * l.in, l.in);
      for (std::size_t o = 0; o < l.out; ++o) {
        z[r * l.out + o] = weights_[l.b + o] + kernels::dot(std::span(weights_).subspan(l.w + o * l.in, l.in), row);
      }
    }
    cache.inputs[i] = std::move(a);
    if (i == hidden) {
      for (double& v : z) v = sigmoid(v);
      cache.outputs = z;
      return z;
    }
    auto& xhat = cache.xhat[i];
    auto& bn = cache.bn_out[i];
    auto& inv = cache.inv_std[i];
    xhat.resize(z.size());
    bn.resize(z.size());
    inv.resize(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
      double mu = 0.0;
      for (std::size_t r = 0; r < rows; ++r) mu += z[r * l.out + o];
      mu /= n;
      double var = 0.0;
      for (std::size_t r = 0; r < rows; ++r) var += (z[r * l.out + o] - mu) * (z[r * l.out + o] - mu);
      var /= n;
      inv[o] = 1.0 / std::sqrt(var + kBatchNormEpsilon);
      running_[l.mean + o] = (1.0 - kBatchNormMomentum) * running_[l.mean + o] + kBatchNormMomentum * mu;
      running_[l.var + o] =
          (1.0 - kBatchNormMomentum) * running_[l.var + o] + kBatchNormMomentum * var * n / (n - 1.0);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t k = r * l.out + o;
        xhat[k] = (z[k] - mu) * inv[o];
        bn[k] = weights_[l.gamma + o] * xhat[k] + weights_[l.beta + o];
        z[k] = bn[k] > 0.0 ? bn[k] : weights_[l.slope + o] * bn[k];
      }
    }
    a = std::move(z);
  }
  return {};
}

void Mlp::backward(const Cache& cache, std::span<const double> grad_out, std::span<double> grads) const {
  const std::size_t rows = cache.batch;
  if (grads.size() != weights_.size()) throw Error(Errc::ShapeMismatch, "gradient buffer has the wrong size");
  if (grad_out.size() != rows * shape_.outputs) throw Error(Errc::ShapeMismatch, "output gradient has the wrong size");
  const double n = static_cast<double>(rows);
  // d loss / d pre-activation of the current layer.
  std::vector<double> dz(grad_out.size());
  for (std::size_t k = 0; k < dz.size(); ++k) {
    const double o = cache.outputs[k];
    dz[k] = grad_out[k] * o * (1.0 - o);
  }
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto& l = layers_[i];
    const auto& a = cache.inputs[i];
    std::vector<double> da(rows * l.in, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::span<const double> arow(a.data() + r * l.in, l.in);
      std::span<double> darow(da.data() + r * l.in, l.in);
      for (std::size_t o = 0; o < l.out; ++o) {
        const double g = dz[r * l.out + o];
        grads[l.b + o] += g;
        kernels::axpy(g, arow, grads.subspan(l.w + o * l.in, l.in));
        kernels::axpy(g, std::span(weights_).subspan(l.w + o * l.in, l.in), darow);
      }
    }
    if (i == 0) break;
    // Through PReLU and batch norm of the previous hidden layer.
    const auto& p = layers_[i - 1];
    const auto& xhat = cache.xhat[i - 1];
    const auto& bn = cache.bn_out[i - 1];
    const auto& inv = cache.inv_std[i - 1];
    std::vector<double> next(rows * p.out);
    for (std::size_t o = 0; o < p.out; ++o) {
      double sum_d = 0.0, sum_dx = 0.0;
      std::vector<double> dxhat(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t k = r * p.out + o;
        double dbn = da[k];
        if (bn[k] <= 0.0) {
          grads[p.slope + o] += dbn * bn[k];
          dbn *= weights_[p.slope + o];
        }
        grads[p.gamma + o] += dbn * xhat[k];
        grads[p.beta + o] += dbn;
        dxhat[r] = dbn * weights_[p.gamma + o];
        sum_d += dxhat[r];
        sum_dx += dxhat[r] * xhat[k];
      }
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t k = r * p.out + o;
        next[k] = inv[o] / n * (n * dxhat[r] - sum_d - xhat[k] * sum_dx);
      }
    }
    dz = std::move(next);
  }
}

}  // namespace fxchain::nn
