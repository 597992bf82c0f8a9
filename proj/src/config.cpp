#include "softgfn/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace softgfn {

namespace {

using nlohmann::json;

template <class S>
struct Field {
  std::string name;
  std::function<json(const S&)> get;
  std::function<void(S&, const json&)> set;
};

template <class S, class T>
Field<S> field(std::string name, T S::*member) {
  return {name, [member](const S& s) { return json(s.*member); },
          [member, name](S& s, const json& j) {
            try {
              s.*member = j.get<T>();
            } catch (const json::exception&) {
              throw ConfigError("bad value for '" + name + "': " + j.dump());
            }
          }};
}

const std::vector<Field<EnvSection>>& env_fields() {
  static const std::vector<Field<EnvSection>> f{
      field("kind", &EnvSection::kind),         field("H", &EnvSection::H),
      field("D", &EnvSection::D),               field("R0", &EnvSection::R0),
      field("R1", &EnvSection::R1),             field("R2", &EnvSection::R2),
      field("n", &EnvSection::n),               field("k", &EnvSection::k),
      field("num_modes", &EnvSection::num_modes), field("reward_exponent", &EnvSection::reward_exponent),
      field("modes_seed", &EnvSection::modes_seed), field("modes_file", &EnvSection::modes_file),
      field("mode_delta", &EnvSection::mode_delta)};
  return f;
}

const std::vector<Field<MethodSection>>& method_fields() {
  static const std::vector<Field<MethodSection>> f{
      field("name", &MethodSection::name),
      field("hidden", &MethodSection::hidden),
      field("activation", &MethodSection::activation),
      field("lr", &MethodSection::lr),
      field("per_update", &MethodSection::per_update),
      field("batch", &MethodSection::batch),
      field("epsilon", &MethodSection::epsilon),
      field("tau", &MethodSection::tau),
      field("target_period", &MethodSection::target_period),
      field("buffer_capacity", &MethodSection::buffer_capacity),
      field("per_alpha", &MethodSection::per_alpha),
      field("per_beta", &MethodSection::per_beta),
      field("munchausen_alpha", &MethodSection::munchausen_alpha),
      field("l0", &MethodSection::l0),
      field("terminal_loss_weight", &MethodSection::terminal_loss_weight),
      field("dueling", &MethodSection::dueling),
      field("logz_lr", &MethodSection::logz_lr)};
  return f;
}

const std::vector<Field<RunSection>>& run_fields() {
  static const std::vector<Field<RunSection>> f{
      field("budget", &RunSection::budget),         field("seeds", &RunSection::seeds),
      field("output", &RunSection::output),         field("eval_every", &RunSection::eval_every),
      field("window", &RunSection::window),         field("mc_samples", &RunSection::mc_samples),
      field("test_set", &RunSection::test_set),     field("exact_state_cap", &RunSection::exact_state_cap),
      field("timing", &RunSection::timing)};
  return f;
}

template <class S>
json section_to_json(const S& s, const std::vector<Field<S>>& fields) {
  json out = json::object();
  for (const auto& f : fields) out[f.name] = f.get(s);
  return out;
}

template <class S>
void apply_section(S& s, const json& j, const std::vector<Field<S>>& fields, const std::string& section) {
  if (!j.is_object()) throw ConfigError("section [" + section + "] must be an object");
  for (const auto& [key, value] : j.items()) {
    auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.name == key; });
    if (it == fields.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    it->set(s, value);
  }
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// INI values are typed by the default value of the same key.
json typed_value(const json& like, const std::string& text, const std::string& key) {
  auto fail = [&] { return ConfigError("bad value for '" + key + "': " + text); };
  auto parse_u64 = [&](const std::string& t) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw fail();
    return v;
  };
  switch (like.type()) {
    case json::value_t::boolean:
      if (text == "true") return true;
      if (text == "false") return false;
      throw fail();
    case json::value_t::number_unsigned:
      return parse_u64(text);
    case json::value_t::number_integer: {
      std::int64_t v = 0;
      const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
      if (r.ec != std::errc() || r.ptr != text.data() + text.size()) throw fail();
      return v;
    }
    case json::value_t::number_float: {
      try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw fail();
        return v;
      } catch (const std::logic_error&) {
        throw fail();
      }
    }
    case json::value_t::array: {
      json arr = json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) arr.push_back(parse_u64(item));
      }
      return arr;
    }
    default:
      return text;
  }
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

RunConfig RunConfig::preset(const std::string& env_preset, const std::string& method) {
  RunConfig c;
  if (env_preset == "hypergrid") {
    c.env.kind = "hypergrid";
  } else if (env_preset == "hypergrid-hard") {
    c.env.kind = "hypergrid";
    const auto h = HypergridConfig::hard(c.env.H, c.env.D);
    c.env.R0 = h.R0;
    c.env.R1 = h.R1;
    c.env.R2 = h.R2;
  } else if (env_preset == "bitseq") {
    c.env.kind = "bitseq";
    c.method.per_alpha = 0.9;
    c.method.per_beta = 0.1;
    c.method.l0 = -25.0;
    c.method.epsilon = 1e-3;
    c.method.tau = 1.0;
    c.method.target_period = 5;
    c.method.terminal_loss_weight = 2.0;
  } else {
    throw ConfigError("unknown environment preset '" + env_preset + "'");
  }
  c.method.name = method;
  if (method == "softdqn-simple") {
    c.method.tau = 1.0;
    c.method.target_period = 1;
  } else if (method != "mdqn" && method != "softdqn" && method != "tb" && method != "db") {
    throw ConfigError("unknown method '" + method + "'");
  }
  return c;
}

void RunConfig::validate() const {
  try {
    if (env.kind == "hypergrid") {
      HypergridConfig{env.H, env.D, env.R0, env.R1, env.R2}.validate();
    } else if (env.kind == "bitseq") {
      if (env.num_modes <= 0) throw std::invalid_argument("num_modes must be positive");
      BitSeqConfig{env.n, env.k, {std::string(static_cast<std::size_t>(std::max(env.n, 0)), '0')},
                   env.reward_exponent}
          .validate();
      if (env.mode_delta < 0) throw std::invalid_argument("mode_delta must be >= 0");
    } else {
      throw std::invalid_argument("env kind must be hypergrid or bitseq");
    }
    if (is_q_method(method.name)) {
      soft_dqn_config(*this).validate();
    } else if (method.name == "tb" || method.name == "db") {
      baseline_config(*this).validate();
    } else {
      throw std::invalid_argument("unknown method '" + method.name + "'");
    }
    parse_activation(method.activation);
    for (auto h : method.hidden)
      if (h == 0) throw std::invalid_argument("hidden sizes must be positive");
    if (run.budget == 0 || run.eval_every == 0 || run.window == 0 || run.mc_samples == 0)
      throw std::invalid_argument("budget, eval_every, window and mc_samples must be positive");
    if (run.seeds.empty()) throw std::invalid_argument("at least one seed is required");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json RunConfig::to_json() const {
  return {{"env", section_to_json(env, env_fields())},
          {"method", section_to_json(method, method_fields())},
          {"run", section_to_json(run, run_fields())}};
}

std::string RunConfig::to_ini() const {
  std::ostringstream out;
  const json j = to_json();
  for (const char* section : {"env", "method", "run"}) {
    out << '[' << section << "]\n";
    for (const auto& [key, value] : j.at(section).items()) {
      out << key << " = ";
      if (value.is_string()) {
        out << value.get<std::string>();
      } else if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) out << (i ? "," : "") << value[i].dump();
      } else if (value.is_number_float()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", value.get<double>());
        std::string s = buf;
        // keep a float marker so the value re-parses as real
        if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
        out << s;
      } else {
        out << value.dump();
      }
      out << '\n';
    }
    out << '\n';
  }
  return out.str();
}

std::string RunConfig::hash() const {
  json j = to_json();
  j["run"].erase("output");
  j["run"].erase("seeds");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

nlohmann::json parse_config_text(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("invalid JSON config: ") + e.what());
    }
  }
  // typed against defaults: env and method defaults depend on nothing here,
  // since every key keeps its type across presets
  const json like = RunConfig{}.to_json();
  json out = json::object();
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find_first_of("#;");
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!like.contains(section)) throw ConfigError("unknown section [" + section + "]");
      out[section] = json::object();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside a section");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!like[section].contains(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    out[section][key] = typed_value(like[section][key], value, key);
  }
  return out;
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be an object with env/method/run sections");
  for (const auto& [key, _] : j.items())
    if (key != "env" && key != "method" && key != "run") throw ConfigError("unknown section [" + key + "]");
  auto get_str = [&](const char* section, const char* key, const char* fallback) {
    if (j.contains(section) && j[section].contains(key)) {
      if (!j[section][key].is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
      return j[section][key].get<std::string>();
    }
    return std::string(fallback);
  };
  const std::string kind = get_str("env", "kind", "hypergrid");
  const std::string method = get_str("method", "name", "mdqn");
  RunConfig c = RunConfig::preset(kind, method);
  if (j.contains("env")) {
    json e = j["env"];
    e.erase("kind");
    apply_section(c.env, e, env_fields(), "env");
  }
  if (j.contains("method")) apply_section(c.method, j["method"], method_fields(), "method");
  if (j.contains("run")) apply_section(c.run, j["run"], run_fields(), "run");
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(parse_config_text(ss.str()));
}

std::vector<std::string> config_modes(const EnvSection& env) {
  if (!env.modes_file.empty()) return read_modes(env.modes_file);
  return generate_modes(env.n, env.num_modes, env.modes_seed);
}

std::unique_ptr<Environment> make_environment(const RunConfig& cfg) {
  const auto& e = cfg.env;
  if (e.kind == "hypergrid") return std::make_unique<HypergridEnv>(HypergridConfig{e.H, e.D, e.R0, e.R1, e.R2});
  if (e.kind == "bitseq") return std::make_unique<BitSeqEnv>(BitSeqConfig{e.n, e.k, config_modes(e), e.reward_exponent});
  throw ConfigError("unknown env kind '" + e.kind + "'");
}

bool is_q_method(const std::string& name) {
  return name == "mdqn" || name == "softdqn" || name == "softdqn-simple";
}

SoftDqnConfig soft_dqn_config(const RunConfig& cfg) {
  const auto& m = cfg.method;
  SoftDqnConfig c;
  c.per_update = m.per_update;
  c.epsilon = m.epsilon;
  c.batch = m.batch;
  c.target_period = m.target_period;
  c.tau = m.tau;
  c.lr = m.lr;
  c.terminal_loss_weight = m.terminal_loss_weight;
  c.replay = PerConfig{.capacity = m.buffer_capacity, .alpha = m.per_alpha, .beta = m.per_beta};
  if (m.name == "mdqn") c.munchausen = MunchausenConfig{.alpha = m.munchausen_alpha, .l0 = m.l0};
  if (m.name == "softdqn-simple") {
    c.use_replay = false;
    c.loss = RegressionLoss::mse;
  }
  return c;
}

BaselineConfig baseline_config(const RunConfig& cfg) {
  const auto& m = cfg.method;
  return BaselineConfig{.kind = m.name == "db" ? BaselineKind::db : BaselineKind::tb,
                        .per_update = m.per_update,
                        .lr = m.lr,
                        .logz_lr = m.logz_lr,
                        .epsilon = m.epsilon};
}

MlpSpec hidden_spec(const RunConfig& cfg, std::uint64_t seed) {
  MlpSpec s;
  s.hidden_sizes = cfg.method.hidden;
  s.activation = parse_activation(cfg.method.activation);
  s.seed = seed;
  return s;
}

}  // namespace softgfn
