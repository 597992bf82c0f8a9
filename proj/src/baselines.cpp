#include "softgfn/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "softgfn/qmodel.hpp"

namespace softgfn {

namespace {

void check_step(double log_pf) {
  if (!(log_pf > kMaskedQ / 2) || !std::isfinite(log_pf))
    throw std::domain_error("trajectory takes an action with zero forward probability");
}

}  // namespace

double tb_residual(const SoftMdp& mdp, const Trajectory& tau, std::span<const double> log_pf, double log_z) {
  if (log_pf.size() != tau.length()) throw std::invalid_argument("tb_residual: one log P_F per step expected");
  if (tau.states.empty() || !tau.terminal().terminal()) throw std::invalid_argument("tb_residual: incomplete trajectory");
  double res = log_z - std::log(mdp.env->reward(tau.terminal()));
  for (std::size_t t = 0; t < tau.length(); ++t) {
    check_step(log_pf[t]);
    res += log_pf[t] - mdp.pb.log_prob_unchecked(*mdp.env, tau.states[t + 1]);
  }
  return res;
}

double db_residual(const SoftMdp& mdp, const State& s, const State& s_next, double log_f, double log_pf,
                   double log_f_next) {
  check_step(log_pf);
  const double target = s_next.terminal() ? std::log(mdp.env->reward(s_next)) : log_f_next;
  return log_f + log_pf - target - mdp.pb.log_prob_unchecked(*mdp.env, s_next);
}

void BaselineConfig::validate() const {
  if (per_update == 0) throw std::invalid_argument("per_update must be positive");
  if (!(lr > 0.0) || !(logz_lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in [0, 1)");
}

GfnAgent::GfnAgent(const SoftMdp& mdp, BaselineConfig cfg, MlpSpec hidden, std::uint64_t seed,
                   kernels::Backend backend)
    : mdp_(mdp),
      cfg_(cfg),
      net_(
          [&] {
            hidden.input_dim = mdp.env->encoding_dim();
            hidden.output_dim = mdp.env->max_actions() + (cfg.kind == BaselineKind::db ? 1 : 0);
            return hidden;
          }(),
          backend),
      adam_(net_.num_params(), AdamConfig{.lr = cfg.lr}),
      adam_z_(1, AdamConfig{.lr = cfg.logz_lr}),
      rollout_rng_(seed, "rollout") {
  cfg_.validate();
}

ScoreFn GfnAgent::scores() const {
  return [this](std::span<const State> states, std::span<const std::uint8_t> masks, Matrix& out) {
    const Environment& env = *mdp_.env;
    const std::size_t A = env.max_actions(), off = logit_offset();
    Matrix x, raw;
    encode_batch(env, states, x);
    net_.predict(x.cview(), raw);
    out.resize(states.size(), A);
    for (std::size_t b = 0; b < states.size(); ++b)
      for (std::size_t a = 0; a < A; ++a) out(b, a) = masks[b * A + a] ? raw(b, a + off) : kMaskedQ;
  };
}

std::vector<Trajectory> GfnAgent::iterate(BaselineStats* stats) {
  auto trajectories = rollout(*mdp_.env, cfg_.per_update, 1.0, cfg_.epsilon, scores(), rollout_rng_);
  const auto st = train_on(trajectories);
  if (stats) *stats = st;
  return trajectories;
}

BaselineStats GfnAgent::train_on(std::span<const Trajectory> trajectories) {
  const Environment& env = *mdp_.env;
  const std::size_t A = env.max_actions(), off = logit_offset();
  std::vector<State> states;
  std::vector<std::size_t> first_row;
  for (const auto& tr : trajectories) {
    first_row.push_back(states.size());
    for (std::size_t t = 0; t < tr.length(); ++t) states.push_back(tr.states[t]);
  }
  const auto masks = action_masks(env, states);
  Matrix x;
  encode_batch(env, states, x);
  net_.zero_grad();
  const auto raw = net_.forward(x.cview());

  // log-softmax of the logit block per row
  Matrix logp(states.size(), A);
  std::vector<double> logits(A);
  for (std::size_t r = 0; r < states.size(); ++r) {
    for (std::size_t a = 0; a < A; ++a) logits[a] = raw(r, a + off);
    masked_log_softmax(logits, std::span<const std::uint8_t>(masks).subspan(r * A, A), 1.0, logp.row(r));
  }

  Matrix grad(states.size(), net_.spec().output_dim);
  grad.fill(0.0);
  // d log pi(a|s) / d logits = onehot(a) - pi(.|s)
  auto add_logpf_grad = [&](std::size_t r, std::uint32_t a, double g) {
    for (std::size_t j = 0; j < A; ++j)
      if (masks[r * A + j]) grad(r, j + off) -= g * std::exp(logp(r, j));
    grad(r, a + off) += g;
  };

  BaselineStats st;
  double dz = 0.0;
  if (cfg_.kind == BaselineKind::tb) {
    const double inv = 1.0 / static_cast<double>(trajectories.size());
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      const auto& tr = trajectories[i];
      std::vector<double> lp(tr.length());
      for (std::size_t t = 0; t < tr.length(); ++t) lp[t] = logp(first_row[i] + t, tr.actions[t].value);
      const double res = tb_residual(mdp_, tr, lp, log_z_);
      st.loss += res * res * inv;
      const double g = 2.0 * res * inv;
      dz += g;
      for (std::size_t t = 0; t < tr.length(); ++t) add_logpf_grad(first_row[i] + t, tr.actions[t].value, g);
    }
  } else {
    std::size_t edges = 0;
    for (const auto& tr : trajectories) edges += tr.length();
    const double inv = 1.0 / static_cast<double>(edges);
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      const auto& tr = trajectories[i];
      for (std::size_t t = 0; t < tr.length(); ++t) {
        const std::size_t r = first_row[i] + t;
        const bool last = t + 1 == tr.length();
        const double f_next = last ? 0.0 : raw(r + 1, 0);
        const double res =
            db_residual(mdp_, tr.states[t], tr.states[t + 1], raw(r, 0), logp(r, tr.actions[t].value), f_next);
        st.loss += res * res * inv;
        const double g = 2.0 * res * inv;
        grad(r, 0) += g;
        if (!tr.states[t + 1].terminal()) grad(r + 1, 0) -= g;
        add_logpf_grad(r, tr.actions[t].value, g);
      }
    }
  }
  if (!std::isfinite(st.loss)) throw TrainingError("non-finite loss");
  net_.backward(grad.cview());
  adam_.step(net_.params(), net_.grads());
  if (cfg_.kind == BaselineKind::tb) {
    std::span<double> z(&log_z_, 1);
    const double g[1] = {dz};
    adam_z_.step(z, g);
  }
  st.log_z = log_z_;
  return st;
}

double GfnAgent::trajectory_loss(const Trajectory& tau) const {
  const Environment& env = *mdp_.env;
  const std::size_t A = env.max_actions(), off = logit_offset();
  std::vector<State> states(tau.states.begin(), tau.states.end() - 1);
  const auto masks = action_masks(env, states);
  Matrix x, raw, logp(states.size(), A);
  encode_batch(env, states, x);
  net_.predict(x.cview(), raw);
  std::vector<double> logits(A);
  for (std::size_t r = 0; r < states.size(); ++r) {
    for (std::size_t a = 0; a < A; ++a) logits[a] = raw(r, a + off);
    masked_log_softmax(logits, std::span<const std::uint8_t>(masks).subspan(r * A, A), 1.0, logp.row(r));
  }
  if (cfg_.kind == BaselineKind::tb) {
    std::vector<double> lp(tau.length());
    for (std::size_t t = 0; t < tau.length(); ++t) lp[t] = logp(t, tau.actions[t].value);
    const double res = tb_residual(mdp_, tau, lp, log_z_);
    return res * res;
  }
  double total = 0.0;
  for (std::size_t t = 0; t < tau.length(); ++t) {
    const double f_next = t + 1 < tau.length() ? raw(t + 1, 0) : 0.0;
    const double res = db_residual(mdp_, tau.states[t], tau.states[t + 1], raw(t, 0), logp(t, tau.actions[t].value),
                                   f_next);
    total += res * res;
  }
  return total / static_cast<double>(tau.length());
}

}  // namespace softgfn
