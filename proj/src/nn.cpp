#include "ivfg/nn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#include "ivfg/errors.hpp"

namespace ivfg::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

int conv_out(int in, int kernel, int stride, int pad) { return (in + 2 * pad - kernel) / stride + 1; }

// Unfolds `image` (channels x height x width) into a (channels*k*k) x (oh*ow)
// patch matrix for a convolution with the given geometry.
void im2col(const double* image, int channels, int height, int width, int kernel, int stride, int pad,
            int oh, int ow, double* cols) {
  const int spatial = oh * ow;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        double* row = cols + static_cast<std::size_t>((c * kernel + ky) * kernel + kx) * spatial;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            row[oy * ow + ox] = (iy >= 0 && iy < height && ix >= 0 && ix < width)
                                    ? image[(static_cast<std::size_t>(c) * height + iy) * width + ix]
                                    : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch columns back, accumulating overlaps.
void col2im(const double* cols, int channels, int height, int width, int kernel, int stride, int pad, int oh,
            int ow, double* image) {
  const int spatial = oh * ow;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const double* row = cols + static_cast<std::size_t>((c * kernel + ky) * kernel + kx) * spatial;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= width) continue;
            image[(static_cast<std::size_t>(c) * height + iy) * width + ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

struct ForwardVisitor {
  const Shape& in;
  const Shape& out;
  std::span<const double> w;
  const Tensor& x;

  Tensor operator()(const Linear& l) const {
    Tensor y(out);
    ConstMatMap weight(w.data(), l.out, l.in);
    ConstVecMap bias(w.data() + static_cast<std::size_t>(l.out) * l.in, l.out);
    VecMap(y.data.data(), l.out) = weight * ConstVecMap(x.data.data(), l.in) + bias;
    return y;
  }

  Tensor operator()(const Conv2d& l) const {
    const int k2 = l.in_channels * l.kernel * l.kernel;
    const int spatial = out.height * out.width;
    std::vector<double> cols(static_cast<std::size_t>(k2) * spatial);
    im2col(x.data.data(), in.channels, in.height, in.width, l.kernel, l.stride, l.pad, out.height, out.width,
           cols.data());
    Tensor y(out);
    ConstMatMap weight(w.data(), l.out_channels, k2);
    ConstVecMap bias(w.data() + static_cast<std::size_t>(l.out_channels) * k2, l.out_channels);
    MatMap ym(y.data.data(), l.out_channels, spatial);
    ym.noalias() = weight * ConstMatMap(cols.data(), k2, spatial);
    ym.colwise() += bias;
    return y;
  }

  Tensor operator()(const ConvTranspose2d& l) const {
    const int k2 = l.out_channels * l.kernel * l.kernel;
    const int spatial = in.height * in.width;
    ConstMatMap weight(w.data(), l.in_channels, k2);
    RowMatrix cols = weight.transpose() * ConstMatMap(x.data.data(), l.in_channels, spatial);
    Tensor y(out);
    col2im(cols.data(), out.channels, out.height, out.width, l.kernel, l.stride, l.pad, in.height, in.width,
           y.data.data());
    const double* bias = w.data() + static_cast<std::size_t>(l.in_channels) * k2;
    const int plane = out.height * out.width;
    for (int c = 0; c < out.channels; ++c) {
      for (int i = 0; i < plane; ++i) y.data[static_cast<std::size_t>(c) * plane + i] += bias[c];
    }
    return y;
  }

  Tensor operator()(const LeakyRelu& l) const {
    Tensor y = x;
    for (double& v : y.data) v = v > 0.0 ? v : l.slope * v;
    return y;
  }

  Tensor operator()(const Tanh&) const {
    Tensor y = x;
    for (double& v : y.data) v = std::tanh(v);
    return y;
  }

  Tensor operator()(const Reshape& l) const { return Tensor(l.to, x.data); }
};

struct BackwardVisitor {
  const Shape& in;
  const Shape& out;
  std::span<const double> w;
  std::span<double> gw;  // empty when parameter gradients are not needed
  const Tensor& x;
  const Tensor& y;
  const Tensor& gy;

  Tensor operator()(const Linear& l) const {
    ConstMatMap weight(w.data(), l.out, l.in);
    ConstVecMap g(gy.data.data(), l.out);
    if (!gw.empty()) {
      MatMap(gw.data(), l.out, l.in).noalias() += g * ConstVecMap(x.data.data(), l.in).transpose();
      VecMap(gw.data() + static_cast<std::size_t>(l.out) * l.in, l.out) += g;
    }
    Tensor gx(in);
    VecMap(gx.data.data(), l.in).noalias() = weight.transpose() * g;
    return gx;
  }

  Tensor operator()(const Conv2d& l) const {
    const int k2 = l.in_channels * l.kernel * l.kernel;
    const int spatial = out.height * out.width;
    ConstMatMap weight(w.data(), l.out_channels, k2);
    ConstMatMap g(gy.data.data(), l.out_channels, spatial);
    if (!gw.empty()) {
      std::vector<double> cols(static_cast<std::size_t>(k2) * spatial);
      im2col(x.data.data(), in.channels, in.height, in.width, l.kernel, l.stride, l.pad, out.height, out.width,
             cols.data());
      MatMap(gw.data(), l.out_channels, k2).noalias() += g * ConstMatMap(cols.data(), k2, spatial).transpose();
      VecMap(gw.data() + static_cast<std::size_t>(l.out_channels) * k2, l.out_channels) += g.rowwise().sum();
    }
    RowMatrix gcols = weight.transpose() * g;
    Tensor gx(in);
    col2im(gcols.data(), in.channels, in.height, in.width, l.kernel, l.stride, l.pad, out.height, out.width,
           gx.data.data());
    return gx;
  }

  Tensor operator()(const ConvTranspose2d& l) const {
    const int k2 = l.out_channels * l.kernel * l.kernel;
    const int spatial = in.height * in.width;
    std::vector<double> gcols(static_cast<std::size_t>(k2) * spatial);
    im2col(gy.data.data(), out.channels, out.height, out.width, l.kernel, l.stride, l.pad, in.height, in.width,
           gcols.data());
    ConstMatMap gc(gcols.data(), k2, spatial);
    ConstMatMap weight(w.data(), l.in_channels, k2);
    if (!gw.empty()) {
      MatMap(gw.data(), l.in_channels, k2).noalias() +=
          ConstMatMap(x.data.data(), l.in_channels, spatial) * gc.transpose();
      double* gb = gw.data() + static_cast<std::size_t>(l.in_channels) * k2;
      const int plane = out.height * out.width;
      for (int c = 0; c < out.channels; ++c) {
        double s = 0.0;
        for (int i = 0; i < plane; ++i) s += gy.data[static_cast<std::size_t>(c) * plane + i];
        gb[c] += s;
      }
    }
    Tensor gx(in);
    MatMap(gx.data.data(), l.in_channels, spatial).noalias() = weight * gc;
    return gx;
  }

  Tensor operator()(const LeakyRelu& l) const {
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.data.size(); ++i) {
      if (!(x.data[i] > 0.0)) gx.data[i] *= l.slope;
    }
    return gx;
  }

  Tensor operator()(const Tanh&) const {
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= 1.0 - y.data[i] * y.data[i];
    return gx;
  }

  Tensor operator()(const Reshape&) const { return Tensor(in, gy.data); }
};

std::size_t fan_in(const Layer& op) {
  if (const auto* l = std::get_if<Linear>(&op)) return static_cast<std::size_t>(l->in);
  if (const auto* c = std::get_if<Conv2d>(&op)) return static_cast<std::size_t>(c->in_channels) * c->kernel * c->kernel;
  if (const auto* d = std::get_if<ConvTranspose2d>(&op)) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(d->in_channels) * d->kernel * d->kernel /
                                        (static_cast<std::size_t>(d->stride) * d->stride));
  }
  return 0;
}

}  // namespace

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << s.channels << "x" << s.height << "x" << s.width;
  return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(s), data(std::move(values)) {
  if (data.size() != shape.size()) {
    throw DimensionError("tensor of shape " + to_string(shape) + " given " + std::to_string(data.size()) +
                         " values");
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const Shape s{static_cast<int>(values.size()), 1, 1};
  return Tensor(s, std::move(values));
}

Network::Network(Shape input, std::string name_prefix) : input_(input), prefix_(std::move(name_prefix)) {}

Shape Network::current_shape() const { return nodes_.empty() ? input_ : nodes_.back().out; }

Shape Network::output_shape() const { return current_shape(); }

void Network::push(Layer op, Shape out, std::vector<std::pair<std::string, std::vector<int>>> params) {
  Node node{std::move(op), current_shape(), out, params_.size(), 0};
  const std::string layer_name = prefix_ + "layer" + std::to_string(nodes_.size());
  for (auto& [suffix, shape] : params) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    specs_.push_back({layer_name + "." + suffix, shape, params_.size(), n});
    params_.resize(params_.size() + n, 0.0);
    node.param_size += n;
  }
  nodes_.push_back(std::move(node));
}

Network& Network::linear(int out) {
  const int in = static_cast<int>(current_shape().size());
  push(Linear{in, out}, Shape{out, 1, 1}, {{"weight", {out, in}}, {"bias", {out}}});
  return *this;
}

Network& Network::conv(int out_channels, int kernel, int stride, int pad) {
  const Shape in = current_shape();
  const Shape out{out_channels, conv_out(in.height, kernel, stride, pad), conv_out(in.width, kernel, stride, pad)};
  if (out.height <= 0 || out.width <= 0) throw DimensionError("conv layer collapses input " + to_string(in));
  push(Conv2d{in.channels, out_channels, kernel, stride, pad}, out,
       {{"weight", {out_channels, in.channels, kernel, kernel}}, {"bias", {out_channels}}});
  return *this;
}

Network& Network::deconv(int out_channels, int kernel, int stride, int pad) {
  const Shape in = current_shape();
  const Shape out{out_channels, (in.height - 1) * stride - 2 * pad + kernel, (in.width - 1) * stride - 2 * pad + kernel};
  push(ConvTranspose2d{in.channels, out_channels, kernel, stride, pad}, out,
       {{"weight", {in.channels, out_channels, kernel, kernel}}, {"bias", {out_channels}}});
  return *this;
}

Network& Network::leaky_relu(double slope) {
  push(LeakyRelu{slope}, current_shape(), {});
  return *this;
}

Network& Network::tanh() {
  push(Tanh{}, current_shape(), {});
  return *this;
}

Network& Network::reshape(Shape to) {
  if (to.size() != current_shape().size()) {
    throw DimensionError("cannot reshape " + to_string(current_shape()) + " to " + to_string(to));
  }
  push(Reshape{to}, to, {});
  return *this;
}

void Network::initialize(std::mt19937_64& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  for (const Node& node : nodes_) {
    const std::size_t fan = fan_in(node.op);
    if (fan == 0) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
    std::uniform_real_distribution<double> dist(-bound, bound);
    // Weights come first in every parametrized layer; biases stay zero.
    const std::size_t bias_count = static_cast<std::size_t>(node.out.channels);
    for (std::size_t i = 0; i < node.param_size - bias_count; ++i) params_[node.offset + i] = dist(rng);
  }
}

Tensor Network::forward(const Tensor& x) const {
  if (x.shape != input_) {
    throw DimensionError("network expects input " + to_string(input_) + ", got " + to_string(x.shape));
  }
  Tensor cur = x;
  for (const Node& node : nodes_) {
    std::span<const double> w(params_.data() + node.offset, node.param_size);
    cur = std::visit(ForwardVisitor{node.in, node.out, w, cur}, node.op);
  }
  return cur;
}

Tensor Network::forward(const Tensor& x, Trace& trace) const {
  if (x.shape != input_) {
    throw DimensionError("network expects input " + to_string(input_) + ", got " + to_string(x.shape));
  }
  trace.clear();
  trace.reserve(nodes_.size() + 1);
  trace.push_back(x);
  for (const Node& node : nodes_) {
    std::span<const double> w(params_.data() + node.offset, node.param_size);
    trace.push_back(std::visit(ForwardVisitor{node.in, node.out, w, trace.back()}, node.op));
  }
  return trace.back();
}

Tensor Network::backward(const Trace& trace, const Tensor& grad_out, std::span<double> param_grad) const {
  if (trace.size() != nodes_.size() + 1) throw PreconditionError("trace does not belong to this network");
  if (!param_grad.empty() && param_grad.size() != params_.size()) {
    throw DimensionError("parameter gradient buffer has wrong size");
  }
  if (grad_out.shape != output_shape()) throw DimensionError("gradient shape does not match network output");
  Tensor g = grad_out;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const Node& node = nodes_[i];
    std::span<const double> w(params_.data() + node.offset, node.param_size);
    std::span<double> gw = param_grad.empty() ? std::span<double>{} : param_grad.subspan(node.offset, node.param_size);
    g = std::visit(BackwardVisitor{node.in, node.out, w, gw, trace[i], trace[i + 1], g}, node.op);
  }
  return g;
}

Adam::Adam(std::size_t parameter_count, AdamConfig cfg)
    : cfg_(cfg), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw DimensionError("Adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    params[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
  }
}

}  // namespace ivfg::nn
