#include "softgfn/qmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace softgfn {

void encode_batch(const Environment& env, std::span<const State> states, Matrix& out) {
  out.resize(states.size(), env.encoding_dim());
  for (std::size_t b = 0; b < states.size(); ++b) env.encode(states[b], out.row(b));
}

std::vector<std::uint8_t> action_masks(const Environment& env, std::span<const State> states) {
  const std::size_t A = env.max_actions();
  std::vector<std::uint8_t> masks(states.size() * A);
  for (std::size_t b = 0; b < states.size(); ++b)
    env.valid_actions(states[b], std::span<std::uint8_t>(masks).subspan(b * A, A));
  return masks;
}

double masked_logsumexp(std::span<const double> q, std::span<const std::uint8_t> mask, double lambda) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < q.size(); ++a)
    if (mask[a]) m = std::max(m, q[a]);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a)
    if (mask[a]) acc += std::exp((q[a] - m) / lambda);
  return m + lambda * std::log(acc);
}

void masked_log_softmax(std::span<const double> q, std::span<const std::uint8_t> mask, double lambda,
                        std::span<double> out) {
  const double lse = masked_logsumexp(q, mask, lambda);
  for (std::size_t a = 0; a < q.size(); ++a) out[a] = mask[a] ? (q[a] - lse) / lambda : kMaskedQ;
}

void QModel::zero_grad() {
  auto g = grads();
  std::fill(g.begin(), g.end(), 0.0);
}

// ------------------------------------------------------------------ MLP

MlpQModel::MlpQModel(const Environment& env, MlpSpec hidden, bool dueling, double dueling_temperature,
                     kernels::Backend backend)
    : net_([&] {
        hidden.input_dim = env.encoding_dim();
        hidden.output_dim = env.max_actions() + (dueling ? 1 : 0);
        return hidden;
      }(),
           backend),
      actions_(env.max_actions()),
      dueling_(dueling),
      temperature_(dueling_temperature) {
  if (!(temperature_ > 0.0)) throw std::invalid_argument("MlpQModel: dueling temperature must be positive");
}

void MlpQModel::combine(ConstMatrixView raw, std::span<const std::uint8_t> masks, Matrix& q,
                        std::vector<double>* values, Matrix* advantages) const {
  const std::size_t B = raw.rows, A = actions_;
  q.resize(B, A);
  if (values) values->assign(B, 0.0);
  if (advantages) advantages->resize(B, A);
  for (std::size_t b = 0; b < B; ++b) {
    const auto m = masks.subspan(b * A, A);
    auto out = q.row(b);
    if (!dueling_) {
      for (std::size_t a = 0; a < A; ++a) out[a] = m[a] ? raw(b, a) : kMaskedQ;
      continue;
    }
    const double v = raw(b, 0);
    const std::span<const double> adv(raw.data + b * raw.cols + 1, A);
    const double lse = masked_logsumexp(adv, m, temperature_);
    for (std::size_t a = 0; a < A; ++a) out[a] = m[a] ? v + adv[a] - lse : kMaskedQ;
    if (values) (*values)[b] = v;
    if (advantages) std::copy(adv.begin(), adv.end(), advantages->row(b).begin());
  }
}

void MlpQModel::forward(const Environment& env, std::span<const State> states, std::span<const std::uint8_t> masks,
                        Matrix& q) {
  encode_batch(env, states, encoded_);
  masks_.assign(masks.begin(), masks.end());
  const auto raw = net_.forward(encoded_.cview());
  combine(raw, masks, q, &values_, &advantages_);
}

void MlpQModel::evaluate(const Environment& env, std::span<const State> states, std::span<const std::uint8_t> masks,
                         Matrix& q) const {
  Matrix x, raw;
  encode_batch(env, states, x);
  net_.predict(x.cview(), raw);
  combine(raw.cview(), masks, q, nullptr, nullptr);
}

void MlpQModel::backward(ConstMatrixView grad_q) {
  const std::size_t B = grad_q.rows, A = actions_;
  if (grad_q.cols != A || B * A != masks_.size()) throw std::invalid_argument("MlpQModel::backward: shape mismatch");
  grad_raw_.resize(B, net_.spec().output_dim);
  grad_raw_.fill(0.0);
  for (std::size_t b = 0; b < B; ++b) {
    const std::span<const std::uint8_t> m(masks_.data() + b * A, A);
    if (!dueling_) {
      for (std::size_t a = 0; a < A; ++a) grad_raw_(b, a) = m[a] ? grad_q(b, a) : 0.0;
      continue;
    }
    // dQ_a/dV = 1, dQ_a/dA_j = [a = j] - softmax_t(A)_j
    double total = 0.0;
    for (std::size_t a = 0; a < A; ++a)
      if (m[a]) total += grad_q(b, a);
    const auto adv = advantages_.row(b);
    const double lse = masked_logsumexp(adv, m, temperature_);
    grad_raw_(b, 0) = total;
    for (std::size_t j = 0; j < A; ++j) {
      if (!m[j]) continue;
      const double p = std::exp((adv[j] - lse) / temperature_);
      grad_raw_(b, j + 1) = grad_q(b, j) - p * total;
    }
  }
  net_.backward(grad_raw_.cview());
}

nlohmann::json MlpQModel::metadata() const {
  nlohmann::json layers = nlohmann::json::array();
  for (auto& s : net_.layers())
    layers.push_back({{"name", s.name}, {"in", s.in}, {"out", s.out}, {"weight_offset", s.weight_offset},
                      {"bias_offset", s.bias_offset}});
  return {{"kind", kind()},
          {"input_dim", net_.spec().input_dim},
          {"hidden_sizes", net_.spec().hidden_sizes},
          {"output_dim", net_.spec().output_dim},
          {"num_actions", actions_},
          {"activation", to_string(net_.spec().activation)},
          {"dueling", dueling_},
          {"dueling_temperature", temperature_},
          {"seed", net_.spec().seed},
          {"num_params", net_.num_params()},
          {"layers", layers}};
}

// ------------------------------------------------------------------ tabular

TabularQModel::TabularQModel(const Environment& env, std::uint64_t cap)
    : actions_(env.max_actions()), states_(env.state_count()) {
  if (!env.enumerable(cap)) throw CapacityError(env.name() + ": tabular Q needs an enumerable state space");
  table_.assign(states_ * actions_, 0.0);
  grads_.assign(table_.size(), 0.0);
}

void TabularQModel::evaluate(const Environment& env, std::span<const State> states,
                             std::span<const std::uint8_t> masks, Matrix& q) const {
  const std::size_t A = actions_;
  q.resize(states.size(), A);
  for (std::size_t b = 0; b < states.size(); ++b) {
    const std::uint64_t row = env.index(states[b]).value;
    for (std::size_t a = 0; a < A; ++a) q(b, a) = masks[b * A + a] ? table_[row * A + a] : kMaskedQ;
  }
}

void TabularQModel::forward(const Environment& env, std::span<const State> states,
                            std::span<const std::uint8_t> masks, Matrix& q) {
  rows_.resize(states.size());
  for (std::size_t b = 0; b < states.size(); ++b) rows_[b] = env.index(states[b]).value;
  masks_.assign(masks.begin(), masks.end());
  evaluate(env, states, masks, q);
}

void TabularQModel::backward(ConstMatrixView grad_q) {
  const std::size_t A = actions_;
  if (grad_q.cols != A || grad_q.rows != rows_.size()) throw std::invalid_argument("TabularQModel::backward: shape");
  for (std::size_t b = 0; b < rows_.size(); ++b)
    for (std::size_t a = 0; a < A; ++a)
      if (masks_[b * A + a]) grads_[rows_[b] * A + a] += grad_q(b, a);
}

nlohmann::json TabularQModel::metadata() const {
  return {{"kind", kind()}, {"num_states", states_}, {"num_actions", actions_}, {"num_params", table_.size()}};
}

}  // namespace softgfn
