#include "softgfn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "softgfn/checkpoint.hpp"
#include "softgfn/metrics.hpp"
#include "softgfn/oracle.hpp"

#ifndef SOFTGFN_VERSION
#define SOFTGFN_VERSION "unknown"
#endif

namespace softgfn {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

CheckResult make_check(std::string name, double err, double tol, double seconds) {
  return {std::move(name), err, tol, err <= tol, false, seconds};
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

int mode_delta(const EnvSection& e) { return e.mode_delta > 0 ? e.mode_delta : e.n / 4; }

/// A trained sampler reconstructed from either a live agent or a checkpoint.
struct Sampler {
  std::unique_ptr<QModel> q;
  std::unique_ptr<GfnAgent> gfn;
  double lambda = 1.0;

  ScoreFn scores(const Environment& env) const { return q ? q_scores(env, *q) : gfn->scores(); }
};

std::unique_ptr<QModel> make_q_model(const RunConfig& cfg, const Environment& env, std::uint64_t seed) {
  return std::make_unique<MlpQModel>(env, hidden_spec(cfg, seed), cfg.method.dueling, soft_dqn_config(cfg).lambda());
}

/// Strings at Hamming distance 0..n from the modes, spread evenly, for the rank-correlation test set.
std::vector<std::string> bitseq_test_set(const std::vector<std::string>& modes, int n, std::size_t count,
                                         std::uint64_t seed) {
  CounterRng rng(seed, "test-set");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::string x = modes[rng.below(modes.size())];
    const auto flips = rng.below(static_cast<std::uint64_t>(n) + 1);
    for (std::uint64_t f = 0; f < flips; ++f) {
      auto& c = x[rng.below(static_cast<std::uint64_t>(n))];
      c = c == '0' ? '1' : '0';
    }
    out.push_back(std::move(x));
  }
  return out;
}

struct ExactEval {
  double tv = 0.0;
  double l1 = 0.0;
};

ExactEval exact_eval(const DagView& dag, const std::vector<double>& target, const ScoreFn& scores, double lambda) {
  const auto pi = policy_rows(dag, lambda, scores);
  const auto model = exact_model_distribution(dag, pi);
  return {total_variation(model, target), l1_distance(model, target)};
}

}  // namespace

std::string version_string() { return SOFTGFN_VERSION; }

std::vector<CheckResult> run_verify(const RunConfig& cfg, const VerifyOptions& opt) {
  const auto env = make_environment(cfg);
  if (!env->enumerable(cfg.run.exact_state_cap))
    throw CapacityError(env->name() + " is not enumerable within the exact state cap");
  std::vector<CheckResult> out;
  auto t0 = Clock::now();
  const DagView dag = DagView::build(*env, cfg.run.exact_state_cap);
  const SoftMdp mdp(*env, 1.0);

  const auto vt = solve_soft_bellman(mdp, dag);
  const auto flows = compute_flows(dag, mdp.pb);
  double ev = 0.0, eq = 0.0;
  for (std::size_t s = 0; s < dag.num_states(); ++s)
    ev = std::max(ev, std::abs(vt.V[s] - std::log(flows.state[s])));
  for (std::size_t e = 0; e < dag.num_edges(); ++e) eq = std::max(eq, std::abs(vt.Q[e] - std::log(flows.edge[e])));
  const double t_solve = since(t0);
  out.push_back(make_check("optimal_value_equals_log_state_flow", ev, 1e-9, t_solve));
  out.push_back(make_check("optimal_q_equals_log_edge_flow", eq, 1e-9, t_solve));

  t0 = Clock::now();
  const auto pi_star = extract_policy(dag, vt, 1.0);
  const auto target = target_distribution(dag);
  out.push_back(make_check("optimal_policy_samples_reward",
                           total_variation(exact_model_distribution(dag, pi_star), target), 1e-10, since(t0)));

  t0 = Clock::now();
  double db = 0.0, db_loss = 0.0;
  for (std::size_t e = 0; e < dag.num_edges(); ++e) {
    const StateId s = dag.edge_source(e), t = dag.edge_target(e);
    const double res = db_residual(mdp, env->state_at(s), env->state_at(t), vt.V[s.value],
                                   std::log(pi_star.probs[e]), vt.V[t.value]);
    db = std::max(db, std::abs(res));
    db_loss = std::max(db_loss, res * res);
  }
  out.push_back(make_check("detailed_balance_at_optimum", db, 1e-9, since(t0)));
  out.push_back(make_check("db_loss_at_optimum", db_loss, 1e-12, since(t0)));

  const double log_z = vt.V[dag.initial().value];
  auto enumeration_check = [&](const std::string& name, double tol, auto&& body) {
    const auto start = Clock::now();
    try {
      const double err = body();
      out.push_back(make_check(name, err, tol, since(start)));
    } catch (const CapacityError&) {
      out.push_back({name, 0.0, tol, true, true, since(start)});
    }
  };
  enumeration_check("trajectory_balance_at_optimum", 1e-9, [&] {
    double err = 0.0;
    for_each_trajectory(dag, opt.trajectory_cap, [&](const IdTrajectory& tau) {
      const double res =
          log_forward_trajectory_prob(dag, pi_star, tau) - log_backward_trajectory_prob(dag, mdp.pb, tau, log_z);
      err = std::max(err, std::abs(res));
    });
    return err;
  });
  enumeration_check("value_equals_log_z_minus_kl", 1e-8, [&] {
    CounterRng rng(opt.seed, "verify-policies");
    double err = 0.0;
    for (std::size_t i = 0; i < opt.random_policies; ++i) {
      const auto pi = TabularPolicy::random(dag, rng);
      const auto r = check_prop_value_kl(mdp, dag, pi, opt.trajectory_cap);
      err = std::max(err, std::abs(r.lhs - r.rhs));
    }
    return err;
  });
  enumeration_check("tb_gradient_equals_policy_gradient", 1e-6, [&] {
    CounterRng rng(opt.seed, "verify-logits");
    double err = 0.0;
    std::vector<double> logits(dag.num_edges());
    for (std::size_t i = 0; i < opt.random_logits; ++i) {
      for (auto& l : logits) l = 1.5 * rng.normal();
      const double z = log_z + rng.normal();
      err = std::max(err, check_tb_policygrad_identity(mdp, dag, logits, z, opt.trajectory_cap).gap);
    }
    return err;
  });
  return out;
}

nlohmann::json to_json(const std::vector<CheckResult>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name},
                   {"max_error", c.max_error},
                   {"tolerance", c.tolerance},
                   {"pass", c.pass},
                   {"skipped", c.skipped},
                   {"seconds", c.seconds}});
  return arr;
}

std::filesystem::path output_root(const RunConfig& cfg) {
  if (const char* root = std::getenv("SOFTGFN_OUTPUT_ROOT"); root && *root) return root;
  return cfg.run.output;
}

std::filesystem::path run_directory(const RunConfig& cfg, std::uint64_t seed) {
  const auto env = make_environment(cfg);
  std::string name;
  for (char c : env->name()) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      name += c;
    } else if (!name.empty() && name.back() != '-') {
      name += '-';
    }
  }
  while (!name.empty() && name.back() == '-') name.pop_back();
  return output_root(cfg) / (name + "_" + cfg.method.name + "_" + cfg.hash()) / ("seed_" + std::to_string(seed));
}

RunResult train_run(const RunConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir) {
  cfg.validate();
  const auto wall0 = Clock::now();
  std::filesystem::create_directories(dir);
  write_text(dir / "config.ini", cfg.to_ini());
  write_text(dir / "config.json", cfg.to_json().dump(2) + "\n");
  write_text(dir / "seed", std::to_string(seed) + "\n");
  write_text(dir / "version", version_string() + "\n");

  const auto env = make_environment(cfg);
  const bool exact = env->enumerable(cfg.run.exact_state_cap);
  std::optional<DagView> dag;
  std::vector<double> target;
  Partition partition;
  if (exact) {
    dag = DagView::build(*env, cfg.run.exact_state_cap);
    target = target_distribution(*dag);
    partition = exact_partition(*env, cfg.run.exact_state_cap);
  }
  std::optional<ModeTracker> modes;
  std::vector<std::string> mode_set;
  const auto* bitseq = dynamic_cast<const BitSeqEnv*>(env.get());
  if (bitseq) {
    mode_set = bitseq->config().modes;
    modes.emplace(mode_set, mode_delta(cfg.env));
  }

  const SoftMdp mdp(*env, 1.0);
  std::unique_ptr<SoftDqnAgent> dqn;
  std::unique_ptr<GfnAgent> gfn;
  if (is_q_method(cfg.method.name)) {
    dqn = std::make_unique<SoftDqnAgent>(mdp, soft_dqn_config(cfg), make_q_model(cfg, *env, seed), seed);
  } else {
    gfn = std::make_unique<GfnAgent>(mdp, baseline_config(cfg), hidden_spec(cfg, seed), seed);
  }
  const double lambda = dqn ? dqn->lambda() : 1.0;
  const ScoreFn scores = dqn ? dqn->scores() : gfn->scores();

  SampleWindow window(cfg.run.window);
  MetricsWriter csv(dir / "metrics.csv");
  std::uint64_t seen = 0, next_eval = cfg.run.eval_every;
  double last_loss = 0.0;
  MetricsRow last_row;
  while (seen < cfg.run.budget) {
    std::vector<Trajectory> batch;
    if (dqn) {
      StepStats st;
      batch = dqn->iterate(&st);
      last_loss = st.loss;
    } else {
      BaselineStats st;
      batch = gfn->iterate(&st);
      last_loss = st.loss;
    }
    seen += batch.size();
    for (const auto& tr : batch) {
      if (exact) window.push(env->index(tr.terminal()));
      if (modes) modes->observe(bitseq->bits(tr.terminal()));
    }
    if (seen >= next_eval || seen >= cfg.run.budget) {
      MetricsRow row;
      row.trajectories = seen;
      row.loss = last_loss;
      row.seed = seed;
      if (exact) {
        row.l1 = l1_distance(window, partition);
        row.tv_exact = exact_eval(*dag, target, scores, lambda).tv;
      }
      if (modes) row.modes = modes->found();
      if (cfg.run.timing) row.seconds = since(wall0);
      csv.write(row);
      last_row = row;
      while (next_eval <= seen) next_eval += cfg.run.eval_every;
    }
  }

  nlohmann::json summary{{"seed", seed},
                         {"config_hash", cfg.hash()},
                         {"version", version_string()},
                         {"environment", env->name()},
                         {"method", cfg.method.name},
                         {"lambda", lambda},
                         {"trajectories", seen},
                         {"final_loss", last_loss}};
  if (exact) {
    const auto ev = exact_eval(*dag, target, scores, lambda);
    summary["tv_exact"] = ev.tv;
    summary["l1_exact"] = ev.l1;
    summary["l1_window"] = l1_distance(window, partition);
    summary["window_size"] = window.size();
    summary["log_z"] = std::log(partition.Z);
  }
  if (modes) {
    summary["modes_found"] = modes->found();
    summary["modes_total"] = modes->total();
    summary["mode_delta"] = mode_delta(cfg.env);
    const auto tests = bitseq_test_set(mode_set, cfg.env.n, cfg.run.test_set, seed);
    std::vector<double> rewards, probs;
    CounterRng rng(seed, "mc-estimate");
    for (const auto& x : tests) {
      const State s = bitseq->from_bits(x);
      rewards.push_back(env->reward(s));
      probs.push_back(mc_prob_estimate(*env, scores, lambda, s, cfg.run.mc_samples, rng));
    }
    const auto rho = spearman(rewards, probs);
    summary["spearman"] = rho ? nlohmann::json(*rho) : nlohmann::json(nullptr);
  }
  if (gfn) summary["log_z_learned"] = gfn->log_z();

  Checkpoint ckpt;
  if (dqn) {
    ckpt.metadata = {{"model", dqn->online().metadata()}};
    const auto p = dqn->online().params();
    ckpt.params.assign(p.begin(), p.end());
  } else {
    ckpt.metadata = {{"model", {{"kind", "gfn-mlp"}}}, {"log_z", gfn->log_z()}};
    const auto p = gfn->net().params();
    ckpt.params.assign(p.begin(), p.end());
  }
  ckpt.metadata["method"] = cfg.method.name;
  ckpt.metadata["lambda"] = lambda;
  ckpt.metadata["seed"] = seed;
  ckpt.metadata["config_hash"] = cfg.hash();
  save_checkpoint(dir, ckpt);

  // wall time is reported here only; the CSV stays byte-identical across reruns unless timing is on
  summary["wall_seconds"] = since(wall0);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return {dir, summary};
}

void write_optimal_checkpoint(const RunConfig& cfg, const std::filesystem::path& dir) {
  const auto env = make_environment(cfg);
  const DagView dag = DagView::build(*env, cfg.run.exact_state_cap);
  const SoftMdp mdp(*env, 1.0);
  const auto vt = solve_soft_bellman(mdp, dag);
  TabularQModel q(*env, cfg.run.exact_state_cap);
  for (std::size_t e = 0; e < dag.num_edges(); ++e) q.at(dag.edge_source(e), dag.edge_action(e)) = vt.Q[e];
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", cfg.to_json().dump(2) + "\n");
  Checkpoint ckpt;
  ckpt.metadata = {{"model", q.metadata()}, {"method", "oracle"}, {"lambda", 1.0}, {"seed", 0},
                   {"config_hash", cfg.hash()}};
  const auto p = q.params();
  ckpt.params.assign(p.begin(), p.end());
  save_checkpoint(dir, ckpt);
}

nlohmann::json eval_checkpoint(const std::filesystem::path& dir, std::uint64_t seed) {
  if (!std::filesystem::exists(dir / "params.bin") || !std::filesystem::exists(dir / "params.json"))
    throw std::runtime_error("no checkpoint in " + dir.string());
  const RunConfig cfg = load_config(dir / "config.json");
  const Checkpoint ckpt = load_checkpoint(dir);
  const auto env = make_environment(cfg);

  Sampler sampler;
  sampler.lambda = ckpt.metadata.at("lambda").get<double>();
  const std::string kind = ckpt.metadata.at("model").at("kind").get<std::string>();
  std::span<double> params;
  if (kind == "tabular") {
    sampler.q = std::make_unique<TabularQModel>(*env, cfg.run.exact_state_cap);
    params = sampler.q->params();
  } else if (kind == "mlp") {
    const auto& m = ckpt.metadata.at("model");
    sampler.q = std::make_unique<MlpQModel>(*env, hidden_spec(cfg, 0), m.at("dueling").get<bool>(),
                                            m.at("dueling_temperature").get<double>());
    params = sampler.q->params();
  } else if (kind == "gfn-mlp") {
    sampler.gfn = std::make_unique<GfnAgent>(SoftMdp(*env, 1.0), baseline_config(cfg), hidden_spec(cfg, 0), 0);
    sampler.gfn->set_log_z(ckpt.metadata.at("log_z").get<double>());
    params = sampler.gfn->net().params();
  } else {
    throw std::runtime_error("unknown checkpoint model kind '" + kind + "'");
  }
  if (params.size() != ckpt.params.size()) throw std::runtime_error("checkpoint does not match the configured model");
  std::copy(ckpt.params.begin(), ckpt.params.end(), params.begin());
  const ScoreFn scores = sampler.scores(*env);

  nlohmann::json out{{"config_hash", cfg.hash()},
                     {"checkpoint_config_hash", ckpt.metadata.value("config_hash", "")},
                     {"environment", env->name()},
                     {"method", ckpt.metadata.value("method", "")},
                     {"lambda", sampler.lambda}};
  CounterRng rng(seed, "eval-mc");
  if (env->enumerable(cfg.run.exact_state_cap)) {
    const DagView dag = DagView::build(*env, cfg.run.exact_state_cap);
    const auto target = target_distribution(dag);
    const auto pi = policy_rows(dag, sampler.lambda, scores);
    const auto model = exact_model_distribution(dag, pi);
    out["tv_exact"] = total_variation(model, target);
    out["l1_exact"] = l1_distance(model, target);
    // Monte-Carlo estimates for the highest-reward terminals, next to their exact values
    std::vector<std::size_t> order(target.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return target[a] > target[b]; });
    nlohmann::json mc = nlohmann::json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(5, order.size()); ++i) {
      const StateId x = dag.terminals()[order[i]];
      mc.push_back({{"state", env->to_string(env->state_at(x))},
                    {"exact", model[order[i]]},
                    {"estimate", mc_prob_estimate(*env, scores, sampler.lambda, env->state_at(x), cfg.run.mc_samples,
                                                  rng)}});
    }
    out["mc_estimates"] = mc;
  }
  if (const auto* bitseq = dynamic_cast<const BitSeqEnv*>(env.get())) {
    const auto tests = bitseq_test_set(bitseq->config().modes, cfg.env.n, cfg.run.test_set, seed);
    std::vector<double> rewards, probs;
    for (const auto& x : tests) {
      const State s = bitseq->from_bits(x);
      rewards.push_back(env->reward(s));
      probs.push_back(mc_prob_estimate(*env, scores, sampler.lambda, s, cfg.run.mc_samples, rng));
    }
    const auto rho = spearman(rewards, probs);
    out["spearman"] = rho ? nlohmann::json(*rho) : nlohmann::json(nullptr);
  }
  return out;
}

}  // namespace softgfn
