#include "softgfn/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "softgfn/rng.hpp"

namespace softgfn {

namespace {

constexpr double kLeakySlope = 0.01;

double activate(Activation a, double z) {
  switch (a) {
    case Activation::leaky_relu: return z > 0.0 ? z : kLeakySlope * z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
  }
  return z;
}

double activate_grad(Activation a, double z, double y) {
  switch (a) {
    case Activation::leaky_relu: return z > 0.0 ? 1.0 : kLeakySlope;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - y * y;
  }
  return 1.0;
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "leaky-relu" || name == "leaky_relu") return Activation::leaky_relu;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::leaky_relu: return "leaky-relu";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Mlp::Mlp(MlpSpec spec, kernels::Backend backend) : spec_(std::move(spec)), backend_(backend) {
  if (spec_.input_dim == 0 || spec_.output_dim == 0) throw std::invalid_argument("Mlp: dimensions must be positive");
  std::size_t in = spec_.input_dim;
  std::size_t offset = 0;
  std::vector<std::size_t> sizes = spec_.hidden_sizes;
  sizes.push_back(spec_.output_dim);
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    if (sizes[l] == 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
    LayerSlice s;
    s.name = l + 1 == sizes.size() ? "out" : "hidden" + std::to_string(l);
    s.in = in;
    s.out = sizes[l];
    s.weight_offset = offset;
    offset += s.in * s.out;
    s.bias_offset = offset;
    offset += s.out;
    layers_.push_back(s);
    in = sizes[l];
  }
  params_.assign(offset, 0.0);
  grads_.assign(offset, 0.0);
  pre_.resize(layers_.size());
  post_.resize(layers_.size());
  initialize(spec_.seed);
}

void Mlp::initialize(std::uint64_t seed) {
  CounterRng rng(seed, "mlp-init");
  for (auto& s : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
    for (std::size_t k = 0; k < s.in * s.out; ++k) params_[s.weight_offset + k] = bound * (2.0 * rng.uniform() - 1.0);
    for (std::size_t k = 0; k < s.out; ++k) params_[s.bias_offset + k] = bound * (2.0 * rng.uniform() - 1.0);
  }
}

void Mlp::zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

ConstMatrixView Mlp::weights(std::size_t l) const {
  return {params_.data() + layers_[l].weight_offset, layers_[l].in, layers_[l].out};
}
MatrixView Mlp::weight_grads(std::size_t l) {
  return {grads_.data() + layers_[l].weight_offset, layers_[l].in, layers_[l].out};
}
std::span<const double> Mlp::bias(std::size_t l) const {
  return {params_.data() + layers_[l].bias_offset, layers_[l].out};
}
std::span<double> Mlp::bias_grads(std::size_t l) { return {grads_.data() + layers_[l].bias_offset, layers_[l].out}; }

void Mlp::run(ConstMatrixView x, std::vector<Matrix>& pre, std::vector<Matrix>& post) const {
  if (x.cols != spec_.input_dim) throw std::invalid_argument("Mlp::forward: input has wrong width");
  ConstMatrixView cur = x;
  const std::size_t L = layers_.size();
  for (std::size_t l = 0; l < L; ++l) {
    pre[l].resize(x.rows, layers_[l].out);
    kernels::dense_forward(backend_, cur, weights(l), bias(l), pre[l].view());
    post[l].resize(x.rows, layers_[l].out);
    auto z = pre[l].flat();
    auto y = post[l].flat();
    if (l + 1 == L) {
      std::copy(z.begin(), z.end(), y.begin());
    } else {
      for (std::size_t k = 0; k < z.size(); ++k) y[k] = activate(spec_.activation, z[k]);
    }
    cur = post[l].cview();
  }
}

ConstMatrixView Mlp::forward(ConstMatrixView x) {
  input_.resize(x.rows, x.cols);
  std::copy(x.data, x.data + x.size(), input_.flat().begin());
  run(input_.cview(), pre_, post_);
  recorded_ = true;
  return post_.back().cview();
}

void Mlp::predict(ConstMatrixView x, Matrix& out) const {
  std::vector<Matrix> pre(layers_.size()), post(layers_.size());
  run(x, pre, post);
  out = std::move(post.back());
}

void Mlp::backward(ConstMatrixView grad_out) {
  if (!recorded_) throw std::logic_error("Mlp::backward: no recorded forward pass");
  const std::size_t L = layers_.size();
  if (grad_out.rows != input_.rows() || grad_out.cols != spec_.output_dim)
    throw std::invalid_argument("Mlp::backward: gradient shape mismatch");
  delta_.resize(grad_out.rows, grad_out.cols);
  std::copy(grad_out.data, grad_out.data + grad_out.size(), delta_.flat().begin());
  for (std::size_t l = L; l-- > 0;) {
    const ConstMatrixView layer_in = l == 0 ? input_.cview() : post_[l - 1].cview();
    kernels::dense_backward_params(backend_, layer_in, delta_.cview(), weight_grads(l), bias_grads(l));
    if (l == 0) break;
    delta_prev_.resize(delta_.rows(), layers_[l].in);
    kernels::dense_backward_input(backend_, delta_.cview(), weights(l), delta_prev_.view());
    auto d = delta_prev_.flat();
    auto z = pre_[l - 1].flat();
    auto y = post_[l - 1].flat();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] *= activate_grad(spec_.activation, z[k], y[k]);
    std::swap(delta_, delta_prev_);
  }
}

}  // namespace softgfn
