#include "softgfn/soft_dqn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace softgfn {

void MunchausenConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("munchausen alpha must be in [0, 1)");
  if (!(l0 <= 0.0)) throw std::invalid_argument("munchausen l0 must be <= 0");
}

void SoftDqnConfig::validate() const {
  if (per_update == 0 || batch == 0 || target_period == 0)
    throw std::invalid_argument("per_update, batch and target_period must be positive");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in (0, 1]");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (!(terminal_loss_weight >= 1.0)) throw std::invalid_argument("terminal_loss_weight must be >= 1");
  if (!(plain_lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (munchausen) munchausen->validate();
}

double huber(double q, double y) {
  const double d = std::abs(q - y);
  return d <= 1.0 ? 0.5 * d * d : d - 0.5;
}

double huber_grad(double q, double y) { return std::clamp(q - y, -1.0, 1.0); }

std::vector<Transition> to_transitions(const Environment& env, std::span<const Trajectory> trajectories) {
  std::vector<Transition> out;
  for (const auto& tr : trajectories) {
    for (std::size_t t = 0; t < tr.length(); ++t) {
      const State& s = tr.states[t];
      Transition x{s, tr.actions[t], tr.states[t + 1], 0.0, false};
      if (s.terminal()) {
        x.done = true;
        x.gfn_reward = env.reward(s);
      }
      out.push_back(std::move(x));
    }
  }
  return out;
}

std::vector<double> td_targets(const SoftMdp& mdp, std::span<const Transition* const> batch, const QModel& target,
                               double lambda, const std::optional<MunchausenConfig>& munchausen) {
  const Environment& env = *mdp.env;
  const std::size_t A = env.max_actions();
  const std::size_t n = batch.size();
  // rows of the single target-network evaluation: s' (bootstrap) and s (Munchausen)
  std::vector<State> states;
  std::vector<std::size_t> next_row(n, SIZE_MAX), cur_row(n, SIZE_MAX);
  for (std::size_t k = 0; k < n; ++k) {
    const Transition& t = *batch[k];
    if (t.done) continue;
    if (!t.s_next.terminal()) {
      next_row[k] = states.size();
      states.push_back(t.s_next);
    }
    if (munchausen) {
      cur_row[k] = states.size();
      states.push_back(t.s);
    }
  }
  Matrix q;
  std::vector<std::uint8_t> masks;
  if (!states.empty()) {
    masks = action_masks(env, states);
    target.evaluate(env, states, masks, q);
  }
  auto mask_row = [&](std::size_t r) { return std::span<const std::uint8_t>(masks).subspan(r * A, A); };

  std::vector<double> y(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Transition& t = *batch[k];
    double v;
    if (t.done) {
      v = std::log(t.gfn_reward);
    } else {
      const double r = mdp.pb.log_prob_unchecked(env, t.s_next);
      const double next = t.s_next.terminal() ? std::log(env.reward(t.s_next))
                                              : masked_logsumexp(q.row(next_row[k]), mask_row(next_row[k]), lambda);
      v = r + next;
      if (munchausen) {
        const auto row = q.row(cur_row[k]);
        // lambda * log pi(a|s) = Q(s, a) - logsumexp_lambda Q(s, .)
        const double scaled_logp = row[t.a.value] - masked_logsumexp(row, mask_row(cur_row[k]), lambda);
        v += munchausen->alpha * std::max(scaled_logp, munchausen->l0);
      }
    }
    if (!std::isfinite(v)) throw TrainingError("non-finite TD target");
    y[k] = v;
  }
  return y;
}

double tabular_sweep(const SoftMdp& mdp, const DagView& dag, TabularQModel& q, double lambda,
                     const std::optional<MunchausenConfig>& munchausen) {
  const Environment& env = dag.env();
  std::vector<Transition> edges;
  edges.reserve(dag.num_edges());
  for (std::size_t e = 0; e < dag.num_edges(); ++e)
    edges.push_back({env.state_at(dag.edge_source(e)), dag.edge_action(e), env.state_at(dag.edge_target(e)), 0.0,
                     false});
  std::vector<const Transition*> ptrs;
  for (auto& t : edges) ptrs.push_back(&t);
  const auto frozen = q.clone();
  const auto y = td_targets(mdp, ptrs, *frozen, lambda, munchausen);
  double change = 0.0;
  for (std::size_t e = 0; e < dag.num_edges(); ++e) {
    double& cell = q.at(dag.edge_source(e), dag.edge_action(e));
    change = std::max(change, std::abs(cell - y[e]));
    cell = y[e];
  }
  return change;
}

ScoreFn q_scores(const Environment& env, const QModel& q) {
  return [&env, &q](std::span<const State> states, std::span<const std::uint8_t> masks, Matrix& out) {
    q.evaluate(env, states, masks, out);
  };
}

SoftDqnAgent::SoftDqnAgent(const SoftMdp& mdp, SoftDqnConfig cfg, std::unique_ptr<QModel> online,
                           std::uint64_t seed)
    : mdp_(mdp),
      cfg_(std::move(cfg)),
      online_(std::move(online)),
      target_(online_->clone()),
      adam_(online_->params().size(), AdamConfig{.lr = cfg_.lr}),
      buffer_(cfg_.use_replay ? cfg_.replay : PerConfig{.capacity = 1}),
      rollout_rng_(seed, "rollout"),
      replay_rng_(seed, "replay") {
  cfg_.validate();
}

std::vector<Trajectory> SoftDqnAgent::sample(std::size_t count, double epsilon) {
  return rollout(*mdp_.env, count, lambda(), epsilon, q_scores(*mdp_.env, *online_), rollout_rng_);
}

StepStats SoftDqnAgent::train_on(std::span<const Transition* const> batch, std::span<const double> weights,
                                 std::vector<double>* per_item_loss) {
  const Environment& env = *mdp_.env;
  const std::size_t n = batch.size(), A = env.max_actions();
  const auto y = td_targets(mdp_, batch, *target_, lambda(), cfg_.munchausen);

  std::vector<State> states;
  states.reserve(n);
  for (auto* t : batch) states.push_back(t->s);
  masks_ = action_masks(env, states);
  online_->zero_grad();
  online_->forward(env, states, masks_, q_);
  grad_q_.resize(n, A);
  grad_q_.fill(0.0);

  StepStats st;
  if (per_item_loss) per_item_loss->assign(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Transition& t = *batch[k];
    const double qa = q_(k, t.a.value);
    const double w = weights[k] * (t.s_next.terminal() ? cfg_.terminal_loss_weight : 1.0);
    double l, g;
    if (cfg_.loss == RegressionLoss::huber) {
      l = huber(qa, y[k]);
      g = huber_grad(qa, y[k]);
    } else {
      l = (qa - y[k]) * (qa - y[k]);
      g = 2.0 * (qa - y[k]);
    }
    st.loss += w * l * inv_n;
    st.mean_target += y[k] * inv_n;
    st.max_abs_td = std::max(st.max_abs_td, std::abs(qa - y[k]));
    grad_q_(k, t.a.value) = w * g * inv_n;
    if (per_item_loss) (*per_item_loss)[k] = l;
  }
  if (!std::isfinite(st.loss)) throw TrainingError("non-finite loss");
  online_->backward(grad_q_.cview());
  adam_.step(online_->params(), online_->grads());
  return st;
}

void SoftDqnAgent::update_target() { polyak_update(target_->params(), online_->params(), cfg_.tau); }

std::vector<Trajectory> SoftDqnAgent::iterate(StepStats* stats) {
  auto trajectories = sample(cfg_.per_update, cfg_.epsilon);
  auto transitions = to_transitions(*mdp_.env, trajectories);
  StepStats st;
  if (cfg_.use_replay) {
    for (auto& t : transitions) buffer_.push(std::move(t));
    if (buffer_.size() >= cfg_.batch) {
      const auto s = buffer_.sample(cfg_.batch, replay_rng_);
      std::vector<double> losses;
      st = train_on(s.items, s.weights, &losses);
      buffer_.update_priorities(s.indices, losses);
    }
  } else {
    std::vector<const Transition*> ptrs;
    for (auto& t : transitions) ptrs.push_back(&t);
    const std::vector<double> ones(ptrs.size(), 1.0);
    st = train_on(ptrs, ones);
  }
  ++iterations_;
  if (iterations_ % cfg_.target_period == 0) update_target();
  if (stats) *stats = st;
  return trajectories;
}

}  // namespace softgfn
