#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "softgfn/kernels.hpp"
#include "softgfn/matrix.hpp"

namespace softgfn {

enum class Activation { leaky_relu, relu, tanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_sizes{256, 256};
  std::size_t output_dim = 0;
  Activation activation = Activation::leaky_relu;
  std::uint64_t seed = 0;
};

/// Offsets of one dense layer inside the flat parameter vector. The weight
/// block is stored transposed, [in][out].
struct LayerSlice {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

/// Fully connected network with hand-written reverse-mode differentiation.
/// forward() records the activations of the last batch; backward() consumes
/// them and accumulates into grads().
class Mlp {
 public:
  explicit Mlp(MlpSpec spec, kernels::Backend backend = kernels::Backend::parallel);

  const MlpSpec& spec() const { return spec_; }
  const std::vector<LayerSlice>& layers() const { return layers_; }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> grads() { return grads_; }
  std::span<const double> grads() const { return grads_; }
  void zero_grad();

  void set_backend(kernels::Backend b) { backend_ = b; }

  /// Returns a view of the output rows; valid until the next forward().
  ConstMatrixView forward(ConstMatrixView x);
  /// Forward without recording (does not disturb a pending backward).
  void predict(ConstMatrixView x, Matrix& out) const;
  /// Accumulate d loss / d params given d loss / d outputs of the last forward().
  void backward(ConstMatrixView grad_out);

  /// Re-draw parameters from `seed` (uniform fan-in scaling).
  void initialize(std::uint64_t seed);

 private:
  ConstMatrixView weights(std::size_t l) const;
  MatrixView weight_grads(std::size_t l);
  std::span<const double> bias(std::size_t l) const;
  std::span<double> bias_grads(std::size_t l);
  void run(ConstMatrixView x, std::vector<Matrix>& pre, std::vector<Matrix>& post) const;

  MlpSpec spec_;
  kernels::Backend backend_;
  std::vector<LayerSlice> layers_;
  std::vector<double> params_;
  std::vector<double> grads_;

  // recorded forward pass
  Matrix input_;
  std::vector<Matrix> pre_;   // pre-activation per layer
  std::vector<Matrix> post_;  // post-activation per hidden layer, output for last
  bool recorded_ = false;
  Matrix delta_, delta_prev_;
};

}  // namespace softgfn
