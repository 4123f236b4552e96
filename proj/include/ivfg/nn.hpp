#pragma once

// Minimal feed-forward network toolkit: dense tensors in CHW layout, a
// handful of layer types with hand-written backward passes, and Adam.
//
// Networks own one flat parameter vector; layers address it by offset.
// Forward/backward are const and keep no per-call state, so one network
// can be evaluated from several threads at once.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ivfg::nn {

struct Shape {
  int channels = 0;
  int height = 1;
  int width = 1;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
  Tensor(Shape s, std::vector<double> values);

  static Tensor vector(std::vector<double> values);

  [[nodiscard]] std::size_t size() const { return data.size(); }
  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x]; }
  [[nodiscard]] double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x];
  }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

struct Linear {
  int in = 0;
  int out = 0;
};

struct Conv2d {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 0;
};

struct ConvTranspose2d {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 4;
  int stride = 2;
  int pad = 1;
};

struct LeakyRelu {
  double slope = 0.2;
};

struct Tanh {};

struct Reshape {
  Shape to;
};

using Layer = std::variant<Linear, Conv2d, ConvTranspose2d, LeakyRelu, Tanh, Reshape>;

/// Per-call record of every intermediate activation; index 0 is the input.
using Trace = std::vector<Tensor>;

class Network {
 public:
  Network() = default;
  explicit Network(Shape input, std::string name_prefix = "");

  // Builders; each infers its input shape from the previous layer.
  Network& linear(int out);
  Network& conv(int out_channels, int kernel, int stride, int pad);
  Network& deconv(int out_channels, int kernel, int stride, int pad);
  Network& leaky_relu(double slope = 0.2);
  Network& tanh();
  Network& reshape(Shape to);

  [[nodiscard]] Shape input_shape() const { return input_; }
  [[nodiscard]] Shape output_shape() const;
  [[nodiscard]] std::size_t layer_count() const { return nodes_.size(); }

  std::span<double> parameters() { return params_; }
  [[nodiscard]] std::span<const double> parameters() const { return params_; }
  [[nodiscard]] std::size_t parameter_count() const { return params_.size(); }
  [[nodiscard]] const std::vector<ParamSpec>& param_specs() const { return specs_; }

  /// Uniform fan-in initialization, biases zero.
  void initialize(std::mt19937_64& rng);

  [[nodiscard]] Tensor forward(const Tensor& x) const;
  Tensor forward(const Tensor& x, Trace& trace) const;

  /// Backpropagates grad_out through the layers recorded in trace and
  /// returns the gradient with respect to the input. Parameter gradients
  /// are accumulated into param_grad when it is non-empty.
  Tensor backward(const Trace& trace, const Tensor& grad_out, std::span<double> param_grad = {}) const;

 private:
  struct Node {
    Layer op;
    Shape in;
    Shape out;
    std::size_t offset = 0;
    std::size_t param_size = 0;
  };

  void push(Layer op, Shape out, std::vector<std::pair<std::string, std::vector<int>>> params);
  [[nodiscard]] Shape current_shape() const;

  Shape input_;
  std::string prefix_;
  std::vector<Node> nodes_;
  std::vector<ParamSpec> specs_;
  std::vector<double> params_;
};

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t parameter_count, AdamConfig cfg);

  void step(std::span<double> params, std::span<const double> grad);
  [[nodiscard]] std::int64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

}  // namespace ivfg::nn
