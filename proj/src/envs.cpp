#include "softgfn/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "softgfn/rng.hpp"

namespace softgfn {

namespace {

/// base^exp, or 0 when the result does not fit in 63 bits.
std::uint64_t checked_pow(std::uint64_t base, int exp) {
  constexpr std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 2;
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (r > limit / base) return 0;
    r *= base;
  }
  return r;
}

}  // namespace

// ---------------------------------------------------------------- hypergrid

void HypergridConfig::validate() const {
  if (H < 2) throw std::invalid_argument("hypergrid: H must be >= 2");
  if (D < 1) throw std::invalid_argument("hypergrid: D must be >= 1");
  if (!(0.0 < R0 && R0 < R1 && R1 < R2))
    throw std::invalid_argument("hypergrid: rewards must satisfy 0 < R0 < R1 < R2");
}

double hypergrid_reward(const HypergridConfig& cfg, std::span<const int> coords) {
  if (coords.size() != static_cast<std::size_t>(cfg.D))
    throw std::domain_error("hypergrid_reward: expected " + std::to_string(cfg.D) + " coordinates");
  bool outer = true;
  bool ring = true;
  for (int c : coords) {
    if (c < 0 || c > cfg.H - 1) throw std::domain_error("hypergrid_reward: coordinate out of range");
    const double d = std::abs(static_cast<double>(c) / (cfg.H - 1) - 0.5);
    outer = outer && (0.25 < d);
    ring = ring && (0.3 < d && d < 0.4);
  }
  return cfg.R0 + (outer ? cfg.R1 : 0.0) + (ring ? cfg.R2 : 0.0);
}

HypergridEnv::HypergridEnv(HypergridConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  cells_ = checked_pow(static_cast<std::uint64_t>(cfg_.H), cfg_.D);
}

std::string HypergridEnv::name() const {
  return "hypergrid(H=" + std::to_string(cfg_.H) + ",D=" + std::to_string(cfg_.D) + ")";
}

State HypergridEnv::initial_state() const { return State{std::vector<int>(cfg_.D, 0), StateKind::interior}; }

void HypergridEnv::check(const State& s) const {
  if (s.sink() || s.cells.size() != static_cast<std::size_t>(cfg_.D))
    throw std::domain_error("hypergrid: malformed state");
  for (int c : s.cells)
    if (c < 0 || c >= cfg_.H) throw std::domain_error("hypergrid: coordinate out of range");
}

std::vector<Child> HypergridEnv::children(const State& s) const {
  check(s);
  std::vector<Child> out;
  if (s.terminal()) return out;
  for (int i = 0; i < cfg_.D; ++i) {
    if (s.cells[i] < cfg_.H - 1) {
      State t = s;
      ++t.cells[i];
      out.push_back({ActionId{static_cast<std::uint32_t>(i)}, std::move(t)});
    }
  }
  out.push_back({ActionId{static_cast<std::uint32_t>(cfg_.D)}, State{s.cells, StateKind::terminal}});
  return out;
}

std::vector<Parent> HypergridEnv::parents(const State& s) const {
  check(s);
  std::vector<Parent> out;
  if (s.terminal()) {
    out.push_back({State{s.cells, StateKind::interior}, ActionId{static_cast<std::uint32_t>(cfg_.D)}});
    return out;
  }
  for (int i = 0; i < cfg_.D; ++i) {
    if (s.cells[i] > 0) {
      State p = s;
      --p.cells[i];
      out.push_back({std::move(p), ActionId{static_cast<std::uint32_t>(i)}});
    }
  }
  return out;
}

std::size_t HypergridEnv::num_parents(const State& s) const {
  if (s.terminal()) return 1;
  return static_cast<std::size_t>(std::count_if(s.cells.begin(), s.cells.end(), [](int c) { return c > 0; }));
}

State HypergridEnv::step(const State& s, ActionId a) const {
  if (s.terminal() || s.sink()) throw std::domain_error("hypergrid: step from terminal state");
  if (a.value == static_cast<std::uint32_t>(cfg_.D)) return State{s.cells, StateKind::terminal};
  if (a.value > static_cast<std::uint32_t>(cfg_.D) || s.cells[a.value] >= cfg_.H - 1)
    throw std::domain_error("hypergrid: invalid action " + std::to_string(a.value));
  State t = s;
  ++t.cells[a.value];
  return t;
}

void HypergridEnv::valid_actions(const State& s, std::span<std::uint8_t> mask) const {
  std::fill(mask.begin(), mask.end(), std::uint8_t{0});
  if (s.terminal()) return;
  for (int i = 0; i < cfg_.D; ++i) mask[i] = s.cells[i] < cfg_.H - 1 ? 1 : 0;
  mask[cfg_.D] = 1;
}

double HypergridEnv::reward(const State& x) const {
  check(x);
  if (!x.terminal()) throw std::domain_error("hypergrid: reward of non-terminal state");
  return hypergrid_reward(cfg_, x.cells);
}

void HypergridEnv::encode(const State& s, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < cfg_.D; ++i) out[static_cast<std::size_t>(i * cfg_.H + s.cells[i])] = 1.0;
}

StateId HypergridEnv::index(const State& s) const {
  check(s);
  if (cells_ == 0) throw CapacityError(name() + ": state space is not enumerable");
  std::uint64_t id = 0;
  for (int i = cfg_.D - 1; i >= 0; --i) id = id * static_cast<std::uint64_t>(cfg_.H) + s.cells[i];
  return StateId{s.terminal() ? id + cells_ : id};
}

State HypergridEnv::state_at(StateId sid) const {
  if (cells_ == 0) throw CapacityError(name() + ": state space is not enumerable");
  if (sid.value >= 2 * cells_) throw std::domain_error("hypergrid: invalid StateId");
  State s{std::vector<int>(cfg_.D), sid.value >= cells_ ? StateKind::terminal : StateKind::interior};
  std::uint64_t id = sid.value % cells_;
  for (int i = 0; i < cfg_.D; ++i) {
    s.cells[i] = static_cast<int>(id % cfg_.H);
    id /= cfg_.H;
  }
  return s;
}

std::string HypergridEnv::to_string(const State& s) const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.cells.size(); ++i) os << (i ? "," : "") << s.cells[i];
  os << ')';
  if (s.terminal()) os << "T";
  return os.str();
}

// ---------------------------------------------------------------- bit sequences

void BitSeqConfig::validate() const {
  if (n < 1 || k < 1) throw std::invalid_argument("bitseq: n and k must be positive");
  if (n % k != 0) throw std::invalid_argument("bitseq: k must divide n");
  if (k > 16) throw std::invalid_argument("bitseq: word size above 16 bits is not supported");
  if (modes.empty()) throw std::invalid_argument("bitseq: mode set is empty");
  for (auto& m : modes) {
    if (m.size() != static_cast<std::size_t>(n))
      throw std::invalid_argument("bitseq: mode '" + m + "' does not have length n");
    if (m.find_first_not_of("01") != std::string::npos)
      throw std::invalid_argument("bitseq: mode '" + m + "' is not a bit string");
  }
  if (!(reward_exponent >= 1.0)) throw std::invalid_argument("bitseq: reward exponent must be >= 1");
}

std::vector<std::string> generate_modes(int n, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("generate_modes: count must be positive");
  if (n < 63 && static_cast<std::uint64_t>(count) > (std::uint64_t{1} << n))
    throw std::invalid_argument("generate_modes: more modes than distinct strings");
  CounterRng rng(seed, "modes");
  std::set<std::string> seen;
  std::vector<std::string> modes;
  while (static_cast<int>(modes.size()) < count) {
    std::string m(static_cast<std::size_t>(n), '0');
    for (auto& c : m) c = rng.below(2) ? '1' : '0';
    if (seen.insert(m).second) modes.push_back(m);
  }
  return modes;
}

std::vector<std::string> read_modes(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open mode file " + file.string());
  std::vector<std::string> modes;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    modes.push_back(line);
  }
  return modes;
}

void write_modes(const std::filesystem::path& file, const std::vector<std::string>& modes) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write mode file " + file.string());
  for (auto& m : modes) out << m << '\n';
}

int hamming(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) throw std::domain_error("hamming: length mismatch");
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

double bitseq_reward(const BitSeqConfig& cfg, std::string_view x) {
  if (x.size() != static_cast<std::size_t>(cfg.n) || x.find_first_not_of("01") != std::string_view::npos)
    throw std::domain_error("bitseq_reward: malformed sequence");
  int best = cfg.n;
  for (auto& m : cfg.modes) best = std::min(best, hamming(x, m));
  return std::pow(std::exp(-static_cast<double>(best)), cfg.reward_exponent);
}

BitSeqEnv::BitSeqEnv(BitSeqConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  count_ = checked_pow(static_cast<std::uint64_t>(cfg_.vocab() + 1), cfg_.positions());
}

std::string BitSeqEnv::name() const {
  return "bitseq(n=" + std::to_string(cfg_.n) + ",k=" + std::to_string(cfg_.k) + ")";
}

State BitSeqEnv::initial_state() const {
  return State{std::vector<int>(cfg_.positions(), -1), StateKind::interior};
}

std::size_t BitSeqEnv::max_actions() const {
  return static_cast<std::size_t>(cfg_.positions()) * static_cast<std::size_t>(cfg_.vocab());
}

void BitSeqEnv::check(const State& s) const {
  if (s.sink() || s.cells.size() != static_cast<std::size_t>(cfg_.positions()))
    throw std::domain_error("bitseq: malformed state");
  bool full = true;
  for (int w : s.cells) {
    if (w < -1 || w >= cfg_.vocab()) throw std::domain_error("bitseq: word out of range");
    full = full && w >= 0;
  }
  if (full != s.terminal()) throw std::domain_error("bitseq: terminal flag inconsistent with fill level");
}

std::vector<Child> BitSeqEnv::children(const State& s) const {
  check(s);
  std::vector<Child> out;
  const int V = cfg_.vocab();
  for (int p = 0; p < cfg_.positions(); ++p) {
    if (s.cells[p] >= 0) continue;
    for (int w = 0; w < V; ++w) {
      State t = s;
      t.cells[p] = w;
      t.kind = std::all_of(t.cells.begin(), t.cells.end(), [](int c) { return c >= 0; })
                   ? StateKind::terminal
                   : StateKind::interior;
      out.push_back({ActionId{static_cast<std::uint32_t>(p * V + w)}, std::move(t)});
    }
  }
  return out;
}

std::vector<Parent> BitSeqEnv::parents(const State& s) const {
  check(s);
  std::vector<Parent> out;
  const int V = cfg_.vocab();
  for (int p = 0; p < cfg_.positions(); ++p) {
    if (s.cells[p] < 0) continue;
    State q = s;
    const int w = q.cells[p];
    q.cells[p] = -1;
    q.kind = StateKind::interior;
    out.push_back({std::move(q), ActionId{static_cast<std::uint32_t>(p * V + w)}});
  }
  return out;
}

std::size_t BitSeqEnv::num_parents(const State& s) const {
  return static_cast<std::size_t>(std::count_if(s.cells.begin(), s.cells.end(), [](int c) { return c >= 0; }));
}

State BitSeqEnv::step(const State& s, ActionId a) const {
  const int V = cfg_.vocab();
  const int p = static_cast<int>(a.value) / V;
  if (s.terminal() || s.sink() || p >= cfg_.positions() || s.cells[p] >= 0)
    throw std::domain_error("bitseq: invalid action " + std::to_string(a.value));
  State t = s;
  t.cells[p] = static_cast<int>(a.value) % V;
  if (std::all_of(t.cells.begin(), t.cells.end(), [](int c) { return c >= 0; })) t.kind = StateKind::terminal;
  return t;
}

void BitSeqEnv::valid_actions(const State& s, std::span<std::uint8_t> mask) const {
  const int V = cfg_.vocab();
  for (int p = 0; p < cfg_.positions(); ++p) {
    const std::uint8_t open = s.cells[p] < 0 ? 1 : 0;
    std::fill_n(mask.begin() + p * V, V, open);
  }
}

std::string BitSeqEnv::bits(const State& s) const {
  std::string out;
  out.reserve(static_cast<std::size_t>(cfg_.n));
  for (int w : s.cells) {
    if (w < 0) throw std::domain_error("bitseq: state is not fully specified");
    for (int j = cfg_.k - 1; j >= 0; --j) out.push_back(((w >> j) & 1) ? '1' : '0');
  }
  return out;
}

State BitSeqEnv::from_bits(std::string_view x) const {
  if (x.size() != static_cast<std::size_t>(cfg_.n) || x.find_first_not_of("01") != std::string_view::npos)
    throw std::domain_error("bitseq: malformed bit string");
  State s{std::vector<int>(cfg_.positions(), 0), StateKind::terminal};
  for (int p = 0; p < cfg_.positions(); ++p) {
    int w = 0;
    for (int j = 0; j < cfg_.k; ++j) w = (w << 1) | (x[static_cast<std::size_t>(p * cfg_.k + j)] == '1');
    s.cells[p] = w;
  }
  return s;
}

double BitSeqEnv::reward(const State& x) const {
  check(x);
  if (!x.terminal()) throw std::domain_error("bitseq: reward of incomplete sequence");
  return bitseq_reward(cfg_, bits(x));
}

std::size_t BitSeqEnv::encoding_dim() const {
  return static_cast<std::size_t>(cfg_.positions()) * static_cast<std::size_t>(cfg_.vocab() + 1);
}

void BitSeqEnv::encode(const State& s, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const int slot = cfg_.vocab() + 1;
  for (int p = 0; p < cfg_.positions(); ++p) {
    const int w = s.cells[p] < 0 ? cfg_.vocab() : s.cells[p];
    out[static_cast<std::size_t>(p * slot + w)] = 1.0;
  }
}

StateId BitSeqEnv::index(const State& s) const {
  check(s);
  if (count_ == 0) throw CapacityError(name() + ": state space is not enumerable");
  const std::uint64_t base = static_cast<std::uint64_t>(cfg_.vocab()) + 1;
  std::uint64_t id = 0;
  for (int p = cfg_.positions() - 1; p >= 0; --p) id = id * base + static_cast<std::uint64_t>(s.cells[p] + 1);
  return StateId{id};
}

State BitSeqEnv::state_at(StateId sid) const {
  if (count_ == 0) throw CapacityError(name() + ": state space is not enumerable");
  if (sid.value >= count_) throw std::domain_error("bitseq: invalid StateId");
  const std::uint64_t base = static_cast<std::uint64_t>(cfg_.vocab()) + 1;
  State s{std::vector<int>(cfg_.positions()), StateKind::terminal};
  std::uint64_t id = sid.value;
  for (int p = 0; p < cfg_.positions(); ++p) {
    s.cells[p] = static_cast<int>(id % base) - 1;
    id /= base;
    if (s.cells[p] < 0) s.kind = StateKind::interior;
  }
  return s;
}

std::string BitSeqEnv::to_string(const State& s) const {
  std::string out;
  for (int w : s.cells) {
    if (w < 0) {
      out.append(static_cast<std::size_t>(cfg_.k), '.');
      continue;
    }
    for (int j = cfg_.k - 1; j >= 0; --j) out.push_back(((w >> j) & 1) ? '1' : '0');
  }
  return out;
}

// ---------------------------------------------------------------- explicit DAG

ExplicitDag::ExplicitDag(std::string name, std::size_t num_nodes,
                         std::vector<std::pair<std::size_t, std::size_t>> edges,
                         std::vector<std::pair<std::size_t, double>> terminal_rewards)
    : name_(std::move(name)), out_(num_nodes), in_(num_nodes), reward_(num_nodes, 0.0) {
  if (num_nodes < 2) throw std::invalid_argument("ExplicitDag: need at least two nodes");
  for (auto [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes || u == v) throw std::invalid_argument("ExplicitDag: bad edge");
    in_[v].emplace_back(u, static_cast<std::uint32_t>(out_[u].size()));
    out_[u].push_back(v);
  }
  for (auto [x, r] : terminal_rewards) {
    if (x >= num_nodes || !(r > 0.0)) throw std::invalid_argument("ExplicitDag: bad terminal reward");
    if (!out_[x].empty()) throw std::invalid_argument("ExplicitDag: terminal node has children");
    reward_[x] = r;
  }
  for (std::size_t i = 0; i < num_nodes; ++i) {
    if (out_[i].empty() && reward_[i] == 0.0)
      throw std::invalid_argument("ExplicitDag: dead-end node without reward");
    max_out_ = std::max(max_out_, out_[i].size());
  }
}

ExplicitDag ExplicitDag::chain(double reward) { return ExplicitDag("chain", 2, {{0, 1}}, {{1, reward}}); }

ExplicitDag ExplicitDag::diamond(double reward) {
  return ExplicitDag("diamond", 4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}}, {{3, reward}});
}

State ExplicitDag::node(std::size_t i) const {
  return State{{static_cast<int>(i)}, reward_[i] > 0.0 ? StateKind::terminal : StateKind::interior};
}

std::size_t ExplicitDag::id_of(const State& s) const {
  if (s.sink() || s.cells.size() != 1 || s.cells[0] < 0 || static_cast<std::size_t>(s.cells[0]) >= out_.size())
    throw std::domain_error(name_ + ": malformed state");
  return static_cast<std::size_t>(s.cells[0]);
}

std::vector<Child> ExplicitDag::children(const State& s) const {
  const auto u = id_of(s);
  std::vector<Child> out;
  for (std::size_t a = 0; a < out_[u].size(); ++a)
    out.push_back({ActionId{static_cast<std::uint32_t>(a)}, node(out_[u][a])});
  return out;
}

std::vector<Parent> ExplicitDag::parents(const State& s) const {
  const auto v = id_of(s);
  std::vector<Parent> out;
  for (auto [u, a] : in_[v]) out.push_back({node(u), ActionId{a}});
  return out;
}

State ExplicitDag::step(const State& s, ActionId a) const {
  const auto u = id_of(s);
  if (a.value >= out_[u].size()) throw std::domain_error(name_ + ": invalid action");
  return node(out_[u][a.value]);
}

double ExplicitDag::reward(const State& x) const {
  const auto i = id_of(x);
  if (reward_[i] == 0.0) throw std::domain_error(name_ + ": reward of non-terminal node");
  return reward_[i];
}

void ExplicitDag::encode(const State& s, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  out[id_of(s)] = 1.0;
}

StateId ExplicitDag::index(const State& s) const { return StateId{id_of(s)}; }

State ExplicitDag::state_at(StateId id) const {
  if (id.value >= out_.size()) throw std::domain_error(name_ + ": invalid StateId");
  return node(static_cast<std::size_t>(id.value));
}

std::string ExplicitDag::to_string(const State& s) const { return name_ + "#" + std::to_string(id_of(s)); }

// ---------------------------------------------------------------- partition

Partition exact_partition(const Environment& env, std::uint64_t cap) {
  if (!env.enumerable(cap)) throw CapacityError(env.name() + ": cannot enumerate terminal states");
  Partition p;
  const auto n = env.state_count();
  std::vector<std::pair<StateId, double>> rewards;
  for (std::uint64_t i = 0; i < n; ++i) {
    const State s = env.state_at(StateId{i});
    if (!s.terminal()) continue;
    const double r = env.reward(s);
    rewards.emplace_back(StateId{i}, r);
    p.Z += r;
  }
  p.target.reserve(rewards.size());
  for (auto [id, r] : rewards) p.target.emplace_back(id, r / p.Z);
  return p;
}

}  // namespace softgfn
