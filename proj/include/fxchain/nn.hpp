#pragma once

// Small dense networks with flat parameter storage: an MLP head (dense,
// batch norm, PReLU per hidden layer; sigmoid outputs) and the Adam optimizer.

#include <cstdint>
#include <span>
#include <vector>

namespace fxchain::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t size, AdamConfig cfg);
  void step(std::span<double> weights, std::span<const double> grads);
  double learning_rate() const noexcept { return cfg_.learning_rate; }
  void set_learning_rate(double lr) noexcept { cfg_.learning_rate = lr; }
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform_fan_in(std::span<double> w, std::size_t fan_in, std::uint64_t seed);

struct MlpShape {
  std::size_t inputs = 0;
  std::vector<std::size_t> hidden;
  std::size_t outputs = 0;
  bool operator==(const MlpShape&) const = default;
};

class Mlp {
 public:
  static constexpr double kBatchNormEpsilon = 1e-5;
  static constexpr double kBatchNormMomentum = 0.1;
  static constexpr double kInitialSlope = 0.25;

  Mlp() = default;
  Mlp(MlpShape shape, std::uint64_t seed);
  Mlp(MlpShape shape, std::vector<double> weights, std::vector<double> running);

  const MlpShape& shape() const noexcept { return shape_; }
  std::size_t weight_count() const noexcept { return weights_.size(); }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> weights() noexcept { return weights_; }
  // Batch-norm running means then running variances, layer by layer.
  const std::vector<double>& running() const noexcept { return running_; }

  // Inference mode (running statistics). Outputs in (0,1).
  std::vector<double> predict(std::span<const double> input) const;

  struct Cache {
    std::size_t batch = 0;
    std::vector<std::vector<double>> inputs;  // per layer, batch x fan_in
    std::vector<std::vector<double>> xhat, bn_out;
    std::vector<std::vector<double>> inv_std;
    std::vector<double> outputs;
  };
  // Training mode on a row-major batch x inputs block; batch statistics are
  // used and the running statistics updated. Needs batch >= 2.
  std::vector<double> forward_train(std::span<const double> batch, std::size_t rows, Cache& cache);
  // grad_out: d loss / d outputs (batch x outputs). Accumulates into grads.
  void backward(const Cache& cache, std::span<const double> grad_out, std::span<double> grads) const;

 private:
  struct Layer {
    std::size_t in, out;
    std::size_t w, b, gamma, beta, slope;  // offsets into weights_
    std::size_t mean, var;                 // offsets into running_
  };
  void layout();

  MlpShape shape_;
  std::vector<Layer> layers_;  // hidden layers, then the output layer
  std::vector<double> weights_;
  std::vector<double> running_;
};

}  // namespace fxchain::nn
