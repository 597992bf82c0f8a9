#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "softgfn/dag.hpp"
#include "softgfn/matrix.hpp"
#include "softgfn/mlp.hpp"
#include "json.hpp"

namespace softgfn {

/// Q-value assigned to invalid actions. Finite so that softmax / logsumexp and
/// their gradients never see inf - inf.
inline constexpr double kMaskedQ = -1e9;

/// Encode a batch of states, one row per state.
void encode_batch(const Environment& env, std::span<const State> states, Matrix& out);
/// Row-major [states x max_actions] validity mask.
std::vector<std::uint8_t> action_masks(const Environment& env, std::span<const State> states);

/// lambda * log sum_{valid a} exp(q_a / lambda)
double masked_logsumexp(std::span<const double> q, std::span<const std::uint8_t> mask, double lambda);
/// log softmax_lambda over valid actions; invalid entries get kMaskedQ.
void masked_log_softmax(std::span<const double> q, std::span<const std::uint8_t> mask, double lambda,
                        std::span<double> out);

/// State-action value approximator with a parameter vector and gradient.
class QModel {
 public:
  virtual ~QModel() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t num_actions() const = 0;

  /// Masked Q-values, recording what backward() needs.
  virtual void forward(const Environment& env, std::span<const State> states, std::span<const std::uint8_t> masks,
                       Matrix& q) = 0;
  /// Same values as forward() without recording; used for target networks.
  virtual void evaluate(const Environment& env, std::span<const State> states, std::span<const std::uint8_t> masks,
                        Matrix& q) const = 0;
  /// Accumulate d loss / d params from d loss / d Q of the last forward().
  /// Entries at invalid actions are ignored.
  virtual void backward(ConstMatrixView grad_q) = 0;

  virtual std::span<double> params() = 0;
  virtual std::span<const double> params() const = 0;
  virtual std::span<double> grads() = 0;
  void zero_grad();

  virtual std::unique_ptr<QModel> clone() const = 0;
  /// Shape description stored next to checkpoints.
  virtual nlohmann::json metadata() const = 0;
};

/// MLP over one-hot state encodings. With `dueling`, the network emits a value
/// stream V and advantages A and the head returns
///   Q(s, a) = V(s) + A(s, a) - logsumexp_t(A(s, valid)),
/// so logsumexp_t(Q(s, .)) = V(s) for the head temperature t.
class MlpQModel final : public QModel {
 public:
  MlpQModel(const Environment& env, MlpSpec hidden, bool dueling, double dueling_temperature = 1.0,
            kernels::Backend backend = kernels::Backend::parallel);

  std::string kind() const override { return "mlp"; }
  std::size_t num_actions() const override { return actions_; }
  void forward(const Environment& env, std::span<const State> states, std::span<const std::uint8_t> masks,
               Matrix& q) override;
  void evaluate(const Environment& env, std::span<const State> states, std::span<const std::uint8_t> masks,
                Matrix& q) const override;
  void backward(ConstMatrixView grad_q) override;
  std::span<double> params() override { return net_.params(); }
  std::span<const double> params() const override { return net_.params(); }
  std::span<double> grads() override { return net_.grads(); }
  std::unique_ptr<QModel> clone() const override { return std::make_unique<MlpQModel>(*this); }
  nlohmann::json metadata() const override;

  bool dueling() const { return dueling_; }
  double dueling_temperature() const { return temperature_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  /// Value stream of the last forward() (dueling only).
  std::span<const double> last_values() const { return values_; }
  /// Raw advantage stream of the last forward() (dueling only), [batch x actions].
  const Matrix& last_advantages() const { return advantages_; }

 private:
  void combine(ConstMatrixView raw, std::span<const std::uint8_t> masks, Matrix& q, std::vector<double>* values,
               Matrix* advantages) const;

  Mlp net_;
  std::size_t actions_;
  bool dueling_;
  double temperature_;
  Matrix encoded_;
  std::vector<std::uint8_t> masks_;
  std::vector<double> values_;
  Matrix advantages_;
  Matrix grad_raw_;
};

/// One parameter per (state, action) of an enumerable environment.
class TabularQModel final : public QModel {
 public:
  explicit TabularQModel(const Environment& env, std::uint64_t cap = kDefaultStateCap);

  std::string kind() const override { return "tabular"; }
  std::size_t num_actions() const override { return actions_; }
  void forward(const Environment& env, std::span<const State> states, std::span<const std::uint8_t> masks,
               Matrix& q) override;
  void evaluate(const Environment& env, std::span<const State> states, std::span<const std::uint8_t> masks,
                Matrix& q) const override;
  void backward(ConstMatrixView grad_q) override;
  std::span<double> params() override { return table_; }
  std::span<const double> params() const override { return table_; }
  std::span<double> grads() override { return grads_; }
  std::unique_ptr<QModel> clone() const override { return std::make_unique<TabularQModel>(*this); }
  nlohmann::json metadata() const override;

  double& at(StateId s, ActionId a) { return table_[s.value * actions_ + a.value]; }
  double at(StateId s, ActionId a) const { return table_[s.value * actions_ + a.value]; }

 private:
  std::size_t actions_;
  std::uint64_t states_;
  std::vector<double> table_;
  std::vector<double> grads_;
  std::vector<std::uint64_t> rows_;
  std::vector<std::uint8_t> masks_;
};

}  // namespace softgfn
