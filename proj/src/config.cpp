#include "adamtrack/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace adamtrack {
namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "experiment.name",    "experiment.T",         "experiment.eval_every",
      "experiment.seeds",   "experiment.lr_grid",   "experiment.clip_norm",
      "experiment.regimes",
      "experiment.workers", "experiment.tune_on",
      "problem.kind",       "problem.d",            "problem.n",
      "problem.m",          "problem.rank",         "problem.sparsity",
      "problem.hidden",     "problem.val_size",     "problem.pool_size",
      "problem.lambda",     "problem.mu",           "problem.L",
      "problem.init_scale", "problem.start_scale",  "problem.warm_start",
      "problem.metric",     "problem.batch",
      "drift.kind",         "drift.scale",          "drift.offset",
      "noise.kind",         "noise.scale",          "noise.offset",
      "optim.kind",         "optim.alpha",          "optim.beta1",
      "optim.beta2",        "optim.eps",            "optim.momentum",
      "optim.box",          "optim.decay.enable",   "optim.decay.alpha_star",
      "verify.hp",          "verify.exp",           "verify.pg",
      "verify.diag",
      "bounds.G",           "bounds.sigma",         "bounds.sigma_scale",
      "bounds.delta",       "bounds.mu",            "bounds.L",
      "bounds.multiplier",
      "sweep.param",        "sweep.values",
      "plot.title",         "plot.ylabel",          "plot.column",
  };
  return keys;
}

// Keys that describe the experiment layout and cannot vary per regime.
bool is_layout_key(const std::string& key) {
  return key == "experiment.regimes" || key.rfind("sweep.", 0) == 0;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

double to_real(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() ||
      !std::isfinite(v)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" +
                      raw + "'");
  }
  return v;
}

long to_int(const std::string& key, const std::string& raw) {
  const double v = to_real(key, raw);
  if (v != std::floor(v) || std::fabs(v) > 9e15) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" +
                      raw + "'");
  }
  return static_cast<long>(v);
}

bool to_bool(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" +
                    raw + "'");
}

ScheduleKind to_schedule_kind(const std::string& key, const std::string& s) {
  if (s == "constant") return ScheduleKind::kConstant;
  if (s == "log") return ScheduleKind::kLog;
  throw ConfigError("config key '" + key +
                    "': expected 'constant' or 'log', got '" + s + "'");
}

}  // namespace

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kAdam: return "adam";
    case OptimizerKind::kSgdm: return "sgdm";
  }
  return "unknown";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgdm") return OptimizerKind::kSgdm;
  throw ConfigError("unknown optimizer '" + name + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::string s = trim(value);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') {
    s = s.substr(1, s.size() - 2);
  }
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(unquote(trim(item)));
  return out;
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  std::stringstream ss(text);
  std::string line;
  long lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    try {
      cfg.set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse(buf.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw ConfigError("empty config key");
  // Regime-prefixed keys are checked in validate(), once regimes are known.
  if (!known_keys().count(key)) {
    const auto dot = key.find('.');
    if (dot == std::string::npos || !known_keys().count(key.substr(dot + 1))) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  values_[key] = unquote(value);
}

void Config::set_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  validate();
}

std::optional<std::string> Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Config::regimes() const {
  auto v = get("experiment.regimes");
  return v ? split_list(*v) : std::vector<std::string>{};
}

std::optional<std::string> Config::sweep_param() const {
  return get("sweep.param");
}

std::vector<std::string> Config::sweep_values() const {
  auto v = get("sweep.values");
  return v ? split_list(*v) : std::vector<std::string>{};
}

void Config::validate() const {
  const auto regs = regimes();
  const std::set<std::string> reg_set(regs.begin(), regs.end());
  if (reg_set.size() != regs.size()) {
    throw ConfigError("experiment.regimes has duplicate names");
  }
  for (const auto& [key, value] : values_) {
    if (known_keys().count(key)) continue;
    const auto dot = key.find('.');
    const std::string prefix = key.substr(0, dot);
    const std::string rest = key.substr(dot + 1);
    if (!reg_set.count(prefix) || is_layout_key(rest)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  if (auto p = sweep_param()) {
    if (!known_keys().count(*p) || is_layout_key(*p)) {
      throw ConfigError("sweep.param names unknown key '" + *p + "'");
    }
    if (sweep_values().empty()) throw ConfigError("sweep.values is empty");
  }
  const std::vector<std::string> names =
      regs.empty() ? std::vector<std::string>{""} : regs;
  for (const auto& r : names) {
    if (auto p = sweep_param()) {
      for (const auto& v : sweep_values()) (void)resolve(r, v);
    } else {
      (void)resolve(r);
    }
  }
}

std::string Config::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string Config::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical_text())));
  return buf;
}

ExperimentConfig Config::resolve(
    const std::string& regime,
    const std::optional<std::string>& sweep_value) const {
  if (!regime.empty()) {
    const auto regs = regimes();
    if (std::find(regs.begin(), regs.end(), regime) == regs.end()) {
      throw ConfigError("unknown regime '" + regime + "'");
    }
  }
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : values_) {
    if (known_keys().count(k)) kv[k] = v;
  }
  if (!regime.empty()) {
    const std::string prefix = regime + ".";
    for (const auto& [k, v] : values_) {
      if (k.rfind(prefix, 0) == 0) kv[k.substr(prefix.size())] = v;
    }
  }
  std::string sweep_label;
  if (sweep_value) {
    auto p = sweep_param();
    if (!p) throw ConfigError("sweep value given but sweep.param is unset");
    kv[*p] = *sweep_value;
    sweep_label = *p + "=" + *sweep_value;
  }

  auto has = [&](const char* k) { return kv.count(k) > 0; };
  auto str = [&](const char* k) { return kv.at(k); };
  auto real = [&](const char* k) { return to_real(k, kv.at(k)); };
  auto integer = [&](const char* k) { return to_int(k, kv.at(k)); };
  auto flag = [&](const char* k) { return to_bool(k, kv.at(k)); };

  ExperimentConfig c;
  c.regime = regime;
  c.sweep_label = sweep_label;
  if (has("experiment.name")) c.name = str("experiment.name");
  if (has("experiment.T")) c.T = integer("experiment.T");
  if (has("experiment.eval_every")) c.eval_every = integer("experiment.eval_every");
  if (has("experiment.seeds")) {
    c.seeds.clear();
    for (const auto& s : split_list(str("experiment.seeds"))) {
      const long v = to_int("experiment.seeds", s);
      if (v < 0) throw ConfigError("config key 'experiment.seeds': negative seed");
      c.seeds.push_back(static_cast<std::uint64_t>(v));
    }
  }
  if (has("experiment.lr_grid") && has("optim.alpha")) {
    throw ConfigError("config keys 'experiment.lr_grid' and 'optim.alpha' are exclusive");
  }
  if (has("optim.alpha")) c.lr_grid = {real("optim.alpha")};
  if (has("experiment.lr_grid")) {
    c.lr_grid.clear();
    for (const auto& s : split_list(str("experiment.lr_grid"))) {
      c.lr_grid.push_back(to_real("experiment.lr_grid", s));
    }
  }
  if (has("optim.kind")) {
    c.optimizers.clear();
    for (const auto& s : split_list(str("optim.kind"))) {
      c.optimizers.push_back(parse_optimizer(s));
    }
  }
  if (has("experiment.clip_norm")) c.clip_norm = real("experiment.clip_norm");
  if (has("optim.box")) {
    const std::string b = trim(str("optim.box"));
    if (b == "none") {
      c.box = ProjectionSpec::none();
    } else {
      const auto parts = split_list(b);
      if (parts.size() != 2) {
        throw ConfigError("config key 'optim.box': expected [lo, hi] or none");
      }
      c.box = ProjectionSpec::box(to_real("optim.box", parts[0]),
                                  to_real("optim.box", parts[1]));
    }
  }
  if (has("experiment.workers")) c.workers = static_cast<int>(integer("experiment.workers"));
  if (has("experiment.tune_on")) c.tune_on = str("experiment.tune_on");

  ProblemSpec& p = c.problem;
  if (has("problem.kind")) {
    try {
      p.kind = parse_problem_kind(str("problem.kind"));
    } catch (const PreconditionError& e) {
      throw ConfigError(std::string("config key 'problem.kind': ") + e.what());
    }
  }
  if (has("problem.d")) p.d = integer("problem.d");
  if (has("problem.n")) p.n = integer("problem.n");
  if (has("problem.m")) p.m = integer("problem.m");
  if (has("problem.rank")) p.rank = integer("problem.rank");
  if (has("problem.sparsity")) p.sparsity = integer("problem.sparsity");
  if (has("problem.hidden")) p.hidden = integer("problem.hidden");
  if (has("problem.val_size")) p.val_size = integer("problem.val_size");
  if (has("problem.pool_size")) p.pool_size = integer("problem.pool_size");
  if (has("problem.lambda")) p.lambda = real("problem.lambda");
  if (has("problem.mu")) p.mu = real("problem.mu");
  if (has("problem.L")) p.L = real("problem.L");
  if (has("problem.init_scale")) p.init_scale = real("problem.init_scale");
  if (has("problem.start_scale")) p.start_scale = real("problem.start_scale");
  if (has("problem.warm_start")) p.warm_start = flag("problem.warm_start");
  if (has("problem.metric")) p.metric = str("problem.metric");
  if (has("problem.batch")) c.batch = integer("problem.batch");

  auto schedule = [&](const std::string& sec, ScheduleSpec& out) {
    const std::string kind_key = sec + ".kind";
    if (kv.count(kind_key)) out.kind = to_schedule_kind(kind_key, kv.at(kind_key));
    if (kv.count(sec + ".scale")) out.scale = to_real(sec + ".scale", kv.at(sec + ".scale"));
    if (kv.count(sec + ".offset")) out.offset = to_real(sec + ".offset", kv.at(sec + ".offset"));
    try {
      adamtrack::validate(out);
    } catch (const PreconditionError& e) {
      throw ConfigError("config section '" + sec + "': " + e.what());
    }
  };
  schedule("drift", c.drift);
  schedule("noise", c.noise);

  if (has("optim.beta1")) c.adam.beta1 = real("optim.beta1");
  if (has("optim.beta2")) c.adam.beta2 = real("optim.beta2");
  if (has("optim.eps")) c.adam.eps = real("optim.eps");
  if (has("optim.momentum")) c.sgdm_beta = real("optim.momentum");
  if (has("optim.decay.enable")) c.decay = flag("optim.decay.enable");
  if (has("optim.decay.alpha_star")) {
    c.decay_alpha_star = real("optim.decay.alpha_star");
    if (!(c.decay_alpha_star > 0.0)) {
      throw ConfigError("config key 'optim.decay.alpha_star': must be > 0");
    }
  }

  if (has("verify.hp")) c.verify.hp = flag("verify.hp");
  if (has("verify.exp")) c.verify.exp = flag("verify.exp");
  if (has("verify.pg")) c.verify.pg = flag("verify.pg");
  if (has("verify.diag")) c.verify.diag = flag("verify.diag");

  if (has("bounds.G")) c.bounds.G = real("bounds.G");
  if (has("bounds.sigma")) c.bounds.sigma = real("bounds.sigma");
  if (has("bounds.sigma_scale")) c.bounds.sigma_scale = real("bounds.sigma_scale");
  if (has("bounds.delta")) c.bounds.delta = real("bounds.delta");
  if (has("bounds.mu")) c.bounds.mu = real("bounds.mu");
  if (has("bounds.L")) c.bounds.L = real("bounds.L");
  if (has("bounds.multiplier")) c.bounds.multiplier = real("bounds.multiplier");

  if (has("plot.title")) c.plot_title = str("plot.title");
  if (has("plot.ylabel")) c.plot_ylabel = str("plot.ylabel");
  if (has("plot.column")) c.plot_column = str("plot.column");

  // Range checks.
  if (c.T < 1) throw ConfigError("config key 'experiment.T': must be >= 1");
  if (c.eval_every < 1) {
    throw ConfigError("config key 'experiment.eval_every': must be >= 1");
  }
  if (c.seeds.empty()) throw ConfigError("config key 'experiment.seeds': empty");
  if (c.lr_grid.empty()) throw ConfigError("config key 'experiment.lr_grid': empty");
  if (!std::is_sorted(c.lr_grid.begin(), c.lr_grid.end()) ||
      std::adjacent_find(c.lr_grid.begin(), c.lr_grid.end()) != c.lr_grid.end()) {
    throw ConfigError("config key 'experiment.lr_grid': must be strictly increasing");
  }
  for (double lr : c.lr_grid) {
    if (!(lr > 0.0)) throw ConfigError("config key 'experiment.lr_grid': must be > 0");
  }
  if (c.optimizers.empty()) {
    throw ConfigError("config key 'optim.kind': empty");
  }
  if (!(c.clip_norm > 0.0)) {
    throw ConfigError("config key 'experiment.clip_norm': must be > 0");
  }
  if (c.workers < 0) throw ConfigError("config key 'experiment.workers': must be >= 0");
  if (c.tune_on != "metric" && c.tune_on != "tracking_err") {
    throw ConfigError("config key 'experiment.tune_on': expected metric or tracking_err");
  }
  if (c.batch < 1) throw ConfigError("config key 'problem.batch': must be >= 1");
  if (c.plot_column != "metric" && c.plot_column != "tracking_err") {
    throw ConfigError("config key 'plot.column': expected metric or tracking_err");
  }
  if (!(c.adam.beta1 > 0.0 && c.adam.beta1 < 1.0)) {
    throw ConfigError("config key 'optim.beta1': must lie in (0, 1)");
  }
  if (!(c.adam.beta2 > 0.0 && c.adam.beta2 < 1.0)) {
    throw ConfigError("config key 'optim.beta2': must lie in (0, 1)");
  }
  if (!(c.adam.eps > 0.0)) throw ConfigError("config key 'optim.eps': must be > 0");
  try {
    adamtrack::validate(c.box);
    AdamHyper h = c.adam;
    adamtrack::validate(h);
    p = resolve_defaults(p);
  } catch (const ConfigError&) {
    throw;
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!(c.sgdm_beta >= 0.0 && c.sgdm_beta < 1.0)) {
    throw ConfigError("config key 'optim.momentum': must lie in [0, 1)");
  }
  if (!(c.bounds.delta > 0.0 && c.bounds.delta < 1.0)) {
    throw ConfigError("config key 'bounds.delta': must lie in (0, 1)");
  }
  if (!(c.bounds.multiplier > 0.0)) {
    throw ConfigError("config key 'bounds.multiplier': must be > 0");
  }
  return c;
}

}  // namespace adamtrack
