#include "meanfield/config.h"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace meanfield {

using nlohmann::json;

// --- models -----------------------------------------------------------------

BuiltModel build_model(const ModelSpec& spec) {
  if (!(spec.kw > 0.0)) throw ConfigError("model.kw: must be > 0");
  if (spec.kind == ModelSpec::Kind::kPool) {
    PoolModelParams p;
    p.phases = spec.phases;
    p.delta = spec.delta;
    p.on_fraction = on_fraction_from_hours(spec.duty_cycle_hours);
    p.tilt_gain = spec.tilt_gain;
    p.sojourn_concentration = spec.sojourn_concentration;
    TransitionFamily family = build_pool_model(p);
    const RowVector C = spec.kw * family.state_space().indicator(Mode::kOn);
    const SimplexVector pi0 = invariant_pmf(family(0.0));
    const double ybar = C.dot(pi0.vector());
    return {std::move(family), C, pi0, ybar, {}};
  }
  TclModel m = build_tcl_model(spec.tcl, spec.tcl_id);
  const RowVector C = spec.kw * m.states.indicator(Mode::kOn);
  const SimplexVector pi0 = invariant_pmf(m.family(0.0), m.unvisited);
  const double ybar = C.dot(pi0.vector());
  return {std::move(m.family), C, pi0, ybar, std::move(m.unvisited)};
}

// --- scenario accessors -----------------------------------------------------

int ScenarioConfig::population() const {
  std::int64_t total = 0;
  for (const auto& c : classes) total += c.count;
  return static_cast<int>(total);
}

int ScenarioConfig::samples() const {
  const int N = population();
  if (n) return *n;
  if (fraction) return std::max(1, static_cast<int>(std::lround(*fraction * N)));
  return N;
}

std::vector<int> scale_counts(const std::vector<int>& counts, int N) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (counts.empty() || !(total > 0.0)) throw ConfigError("classes: no loads to scale");
  std::vector<int> out(counts.size());
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double exact = static_cast<double>(N) * counts[c] / total;
    out[c] = static_cast<int>(std::floor(exact));
    assigned += out[c];
    rem.emplace_back(exact - out[c], c);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < N; ++k, ++assigned) ++out[rem[k % rem.size()].second];
  if (N >= static_cast<int>(counts.size())) {
    for (std::size_t c = 0; c < out.size(); ++c) {
      if (out[c] == 0 && counts[c] > 0) {
        auto big = std::max_element(out.begin(), out.end());
        --*big;
        out[c] = 1;
      }
    }
  }
  return out;
}

void validate(const ScenarioConfig& cfg) {
  if (cfg.classes.empty()) throw ConfigError("classes: at least one class required");
  for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
    const std::string f = "classes[" + std::to_string(c) + "]";
    if (cfg.classes[c].count < 1) throw ConfigError(f + ".count: must be >= 1");
    if (cfg.classes[c].model.kind != cfg.classes[0].model.kind) {
      throw ConfigError(f + ".model.kind: all classes must share one state space");
    }
  }
  const int N = cfg.population();
  if (N < 2) throw ConfigError("classes: total population N must be >= 2");
  if (cfg.n && cfg.fraction) throw ConfigError("sampling: give either n or fraction, not both");
  if (cfg.n && (*cfg.n < 1 || *cfg.n > N)) throw ConfigError("sampling.n: must satisfy 1 <= n <= N");
  if (cfg.fraction && !(*cfg.fraction > 0.0 && *cfg.fraction <= 1.0)) {
    throw ConfigError("sampling.fraction: must lie in (0, 1]");
  }
  if (cfg.horizon < 1) throw ConfigError("horizon: must be >= 1");
  if (!(cfg.step_seconds > 0.0)) throw ConfigError("step_seconds: must be > 0");
  if (cfg.burn_in < 0 || cfg.burn_in >= cfg.horizon) {
    throw ConfigError("burn_in: must satisfy 0 <= burn_in < horizon");
  }
  if (cfg.gains.saturation && !(cfg.gains.saturation->first < cfg.gains.saturation->second)) {
    throw ConfigError("control.saturation: must satisfy min < max");
  }
  if (cfg.reduced_order < 1) throw ConfigError("filter.order: must be >= 1");
  if (!cfg.filter_weights.empty() && cfg.filter_weights.size() != cfg.filter_models.size()) {
    throw ConfigError("filter.weights: one weight per filter model required");
  }
  if (cfg.filter_models.empty() && cfg.classes.size() > 1) {
    throw ConfigError("filter.models: required for a heterogeneous population");
  }
  if (cfg.filter_models.size() > 2 && cfg.filter_weights.empty()) {
    throw ConfigError("filter.weights: required for more than two filter models");
  }
  if (cfg.inflation_k < 0 || cfg.inflation_k_per_load < 0 || cfg.inflation_b < 0) {
    throw ConfigError("filter.inflation: k, k_per_load and b must be >= 0");
  }
  if (!(cfg.qos_beta > 0.0 && cfg.qos_beta <= 1.0)) throw ConfigError("qos.beta: must lie in (0, 1]");
  if (cfg.qos_warmup < 0) throw ConfigError("qos.warmup: must be >= 0");
  if (cfg.optout_bounds && !(cfg.optout_bounds->first < cfg.optout_bounds->second)) {
    throw ConfigError("qos.optout_bounds: must satisfy Lmin < Lmax");
  }
  if (!(cfg.reference.amplitude_fraction > 0.0 && cfg.reference.amplitude_fraction < 1.0)) {
    throw ConfigError("reference.amplitude_fraction: must lie in (0, 1)");
  }
  if (!(cfg.reference.time_constant_hours > 0.0)) {
    throw ConfigError("reference.time_constant_hours: must be > 0");
  }
  if (cfg.reference.passes < 1) throw ConfigError("reference.passes: must be >= 1");
  if (cfg.reference.kind == ReferenceSpec::Kind::kFile && cfg.reference.path.empty()) {
    throw ConfigError("reference.path: required for kind \"file\"");
  }
  if (cfg.workers < 1) throw ConfigError("workers: must be >= 1");
}

// --- JSON -------------------------------------------------------------------

namespace {

// Reads keys of one JSON object, tracking the field path for messages and
// rejecting keys that are never consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key) + ": wrong type");
    }
  }

  template <typename T>
  void get_optional(const std::string& key, std::optional<T>& out) {
    used_.insert(key);
    if (!has(key)) return;
    T v{};
    get(key, v);
    out = v;
  }

  Reader child(const std::string& key) {
    used_.insert(key);
    return Reader(j_.at(key), field(key));
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename E>
E parse_enum(const std::string& field, const std::string& value,
             std::initializer_list<std::pair<const char*, E>> options) {
  std::string names;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError(field + ": unknown value \"" + value + "\" (expected one of " + names + ")");
}

std::pair<double, double> parse_bounds(Reader& r, const std::string& key) {
  std::vector<double> b;
  r.get(key, b);
  if (b.size() != 2) throw ConfigError(r.field(key) + ": expected [min, max]");
  return {b[0], b[1]};
}

ModelSpec read_model(Reader r) {
  ModelSpec m;
  std::string kind = "pool";
  r.get("kind", kind);
  m.kind = parse_enum<ModelSpec::Kind>(r.field("kind"), kind,
                                       {{"pool", ModelSpec::Kind::kPool}, {"tcl", ModelSpec::Kind::kTcl}});
  r.get("kw", m.kw);
  if (m.kind == ModelSpec::Kind::kPool) {
    r.get("phases", m.phases);
    r.get("delta", m.delta);
    r.get("duty_cycle_hours", m.duty_cycle_hours);
    r.get("tilt_gain", m.tilt_gain);
    r.get("sojourn_concentration", m.sojourn_concentration);
    if (m.phases < 2) throw ConfigError(r.field("phases") + ": must be >= 2");
    if (!(m.delta > 0.0 && m.delta <= 1.0)) throw ConfigError(r.field("delta") + ": must lie in (0, 1]");
    if (!(m.tilt_gain > 0.0)) throw ConfigError(r.field("tilt_gain") + ": must be > 0");
    if (!(m.sojourn_concentration >= 0.0)) {
      throw ConfigError(r.field("sojourn_concentration") + ": must be >= 0");
    }
    const double lo = 24.0 / m.phases, hi = 24.0 - 24.0 / m.phases;
    if (!(m.duty_cycle_hours >= lo && m.duty_cycle_hours <= hi)) {
      throw ConfigError(r.field("duty_cycle_hours") + ": must lie in [24/phases, 24 - 24/phases]");
    }
  } else {
    if (r.has("tcl")) {
      Reader t = r.child("tcl");
      t.get("tau_seconds", m.tcl.tau_seconds);
      t.get("theta_min", m.tcl.theta_min);
      t.get("theta_max", m.tcl.theta_max);
      t.get("ambient", m.tcl.ambient);
      t.get("resistance", m.tcl.resistance);
      t.get("capacitance", m.tcl.capacitance);
      t.get("transfer_rate", m.tcl.transfer_rate);
      t.get("noise_var", m.tcl.noise_var);
      t.finish();
    }
    r.get("bins", m.tcl_id.bins);
    r.get("mc_loads", m.tcl_id.mc_loads);
    r.get("mc_steps", m.tcl_id.mc_steps);
    r.get("seed", m.tcl_id.seed);
    r.get("workers", m.tcl_id.workers);
    r.get_optional("initial_temperature", m.tcl_id.initial_temperature);
    try {
      m.tcl.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(r.field("tcl") + ": " + e.what());
    }
    if (m.tcl_id.bins < 2) throw ConfigError(r.field("bins") + ": must be >= 2");
    if (m.tcl_id.mc_loads < 1) throw ConfigError(r.field("mc_loads") + ": must be >= 1");
    if (m.tcl_id.mc_steps < 1) throw ConfigError(r.field("mc_steps") + ": must be >= 1");
  }
  r.finish();
  return m;
}

json write_model(const ModelSpec& m) {
  json j;
  j["kw"] = m.kw;
  if (m.kind == ModelSpec::Kind::kPool) {
    j["kind"] = "pool";
    j["phases"] = m.phases;
    j["delta"] = m.delta;
    j["duty_cycle_hours"] = m.duty_cycle_hours;
    j["tilt_gain"] = m.tilt_gain;
    j["sojourn_concentration"] = m.sojourn_concentration;
  } else {
    j["kind"] = "tcl";
    j["tcl"] = {{"tau_seconds", m.tcl.tau_seconds},   {"theta_min", m.tcl.theta_min},
                {"theta_max", m.tcl.theta_max},       {"ambient", m.tcl.ambient},
                {"resistance", m.tcl.resistance},     {"capacitance", m.tcl.capacitance},
                {"transfer_rate", m.tcl.transfer_rate}, {"noise_var", m.tcl.noise_var}};
    j["bins"] = m.tcl_id.bins;
    j["mc_loads"] = m.tcl_id.mc_loads;
    j["mc_steps"] = m.tcl_id.mc_steps;
    j["seed"] = m.tcl_id.seed;
    j["workers"] = m.tcl_id.workers;
    if (m.tcl_id.initial_temperature) j["initial_temperature"] = *m.tcl_id.initial_temperature;
  }
  return j;
}

const char* control_name(ControlMode m) {
  switch (m) {
    case ControlMode::kFiltered: return "filtered";
    case ControlMode::kRaw: return "raw";
    case ControlMode::kPrefilter: return "prefilter";
    case ControlMode::kNone: return "none";
  }
  return "?";
}

const char* filter_name(FilterVariant v) {
  switch (v) {
    case FilterVariant::kPopulation: return "population";
    case FilterVariant::kJoint: return "joint";
    case FilterVariant::kReduced: return "reduced";
  }
  return "?";
}

ScenarioConfig read_scenario(const json& root) {
  ScenarioConfig cfg;
  Reader r(root, "");
  r.get("name", cfg.name);
  r.get("seed", cfg.seed);
  r.get("workers", cfg.workers);
  r.get("horizon", cfg.horizon);
  r.get("step_seconds", cfg.step_seconds);
  r.get("burn_in", cfg.burn_in);

  if (r.has("classes")) {
    const json& arr = r.raw("classes");
    if (!arr.is_array()) throw ConfigError("classes: expected an array");
    for (std::size_t c = 0; c < arr.size(); ++c) {
      Reader cr(arr[c], "classes[" + std::to_string(c) + "]");
      ClassSpec cs;
      cr.get("count", cs.count);
      if (cr.has("model")) cs.model = read_model(cr.child("model"));
      cr.finish();
      cfg.classes.push_back(cs);
    }
  }

  if (r.has("sampling")) {
    Reader s = r.child("sampling");
    s.get_optional("n", cfg.n);
    s.get_optional("fraction", cfg.fraction);
    s.finish();
  }

  if (r.has("control")) {
    Reader c = r.child("control");
    std::string mode = control_name(cfg.control);
    c.get("mode", mode);
    cfg.control = parse_enum<ControlMode>(c.field("mode"), mode,
                                          {{"filtered", ControlMode::kFiltered},
                                           {"raw", ControlMode::kRaw},
                                           {"prefilter", ControlMode::kPrefilter},
                                           {"none", ControlMode::kNone}});
    c.get("kp", cfg.gains.kp);
    c.get("ki", cfg.gains.ki);
    if (c.has("saturation")) cfg.gains.saturation = parse_bounds(c, "saturation");
    c.finish();
  }

  if (r.has("filter")) {
    Reader f = r.child("filter");
    std::string variant = filter_name(cfg.filter);
    f.get("variant", variant);
    cfg.filter = parse_enum<FilterVariant>(f.field("variant"), variant,
                                           {{"population", FilterVariant::kPopulation},
                                            {"joint", FilterVariant::kJoint},
                                            {"reduced", FilterVariant::kReduced}});
    f.get("order", cfg.reduced_order);
    f.get("project", cfg.project);
    f.get("track_qos", cfg.track_qos);
    if (f.has("models")) {
      const json& arr = f.raw("models");
      if (!arr.is_array()) throw ConfigError(f.field("models") + ": expected an array");
      for (std::size_t k = 0; k < arr.size(); ++k) {
        cfg.filter_models.push_back(
            read_model(Reader(arr[k], f.field("models") + "[" + std::to_string(k) + "]")));
      }
    }
    f.get("weights", cfg.filter_weights);
    if (f.has("inflation")) {
      Reader i = f.child("inflation");
      cfg.inflation = true;
      i.get("enabled", cfg.inflation);
      i.get("k", cfg.inflation_k);
      i.get("k_per_load", cfg.inflation_k_per_load);
      i.get("b", cfg.inflation_b);
      i.finish();
    }
    f.finish();
  }

  if (r.has("qos")) {
    Reader q = r.child("qos");
    q.get("beta", cfg.qos_beta);
    std::string centering = "class";
    q.get("centering", centering);
    cfg.qos_centering = parse_enum<QosCentering>(
        q.field("centering"), centering,
        {{"class", QosCentering::kClass}, {"common", QosCentering::kCommon}});
    if (q.has("optout_bounds")) cfg.optout_bounds = parse_bounds(q, "optout_bounds");
    q.get("warmup", cfg.qos_warmup);
    q.finish();
  }

  if (r.has("reference")) {
    Reader ref = r.child("reference");
    std::string kind = "synthetic";
    ref.get("kind", kind);
    cfg.reference.kind = parse_enum<ReferenceSpec::Kind>(
        ref.field("kind"), kind,
        {{"synthetic", ReferenceSpec::Kind::kSynthetic}, {"file", ReferenceSpec::Kind::kFile}});
    ref.get("amplitude_fraction", cfg.reference.amplitude_fraction);
    ref.get("time_constant_hours", cfg.reference.time_constant_hours);
    ref.get("passes", cfg.reference.passes);
    ref.get("seed", cfg.reference.seed);
    ref.get("path", cfg.reference.path);
    ref.finish();
  }
  r.finish();
  cfg.reference.horizon = cfg.horizon;
  cfg.reference.step_seconds = cfg.step_seconds;
  validate(cfg);
  return cfg;
}

json write_scenario(const ScenarioConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  j["horizon"] = cfg.horizon;
  j["step_seconds"] = cfg.step_seconds;
  j["burn_in"] = cfg.burn_in;
  j["classes"] = json::array();
  for (const auto& c : cfg.classes) j["classes"].push_back({{"count", c.count}, {"model", write_model(c.model)}});
  j["sampling"] = json::object();
  if (cfg.n) j["sampling"]["n"] = *cfg.n;
  if (cfg.fraction) j["sampling"]["fraction"] = *cfg.fraction;
  j["control"] = {{"mode", control_name(cfg.control)}, {"kp", cfg.gains.kp}, {"ki", cfg.gains.ki}};
  if (cfg.gains.saturation) {
    j["control"]["saturation"] = {cfg.gains.saturation->first, cfg.gains.saturation->second};
  }
  json f = {{"variant", filter_name(cfg.filter)},
            {"order", cfg.reduced_order},
            {"project", cfg.project},
            {"track_qos", cfg.track_qos}};
  if (!cfg.filter_models.empty()) {
    f["models"] = json::array();
    for (const auto& m : cfg.filter_models) f["models"].push_back(write_model(m));
  }
  if (!cfg.filter_weights.empty()) f["weights"] = cfg.filter_weights;
  if (cfg.inflation) {
    f["inflation"] = {{"enabled", true},
                      {"k", cfg.inflation_k},
                      {"k_per_load", cfg.inflation_k_per_load},
                      {"b", cfg.inflation_b}};
  }
  j["filter"] = f;
  j["qos"] = {{"beta", cfg.qos_beta},
              {"centering", cfg.qos_centering == QosCentering::kClass ? "class" : "common"},
              {"warmup", cfg.qos_warmup}};
  if (cfg.optout_bounds) j["qos"]["optout_bounds"] = {cfg.optout_bounds->first, cfg.optout_bounds->second};
  j["reference"] = {{"kind", cfg.reference.kind == ReferenceSpec::Kind::kFile ? "file" : "synthetic"},
                    {"amplitude_fraction", cfg.reference.amplitude_fraction},
                    {"time_constant_hours", cfg.reference.time_constant_hours},
                    {"passes", cfg.reference.passes},
                    {"seed", cfg.reference.seed}};
  if (!cfg.reference.path.empty()) j["reference"]["path"] = cfg.reference.path;
  return j;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelSpec pool(double hours) {
  ModelSpec m;
  m.duty_cycle_hours = hours;
  return m;
}

// Nine-class pool mix: cycle hours and relative counts.
const double kTableHours[] = {20, 18, 16, 14, 12, 10, 8, 6, 4};
const int kTableCounts[] = {1, 1, 1, 3, 5, 10, 5, 3, 1};

std::vector<ClassSpec> table_classes(int unit) {
  std::vector<ClassSpec> out;
  for (int c = 0; c < 9; ++c) out.push_back({pool(kTableHours[c]), kTableCounts[c] * unit});
  return out;
}

}  // namespace

ScenarioConfig parse_config(const std::string& json_text) {
  const json j = parse_json(json_text);
  if (j.is_object() && j.contains("preset")) {
    json patch = j;
    const std::string name = patch.at("preset").get<std::string>();
    patch.erase("preset");
    return apply_overrides(preset(name), patch.dump());
  }
  return read_scenario(j);
}

ScenarioConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string to_json(const ScenarioConfig& cfg) { return write_scenario(cfg).dump(2); }

ScenarioConfig apply_overrides(const ScenarioConfig& base, const std::string& json_text) {
  json patch = parse_json(json_text);
  if (!patch.is_object()) throw ConfigError("config: expected an object");
  patch.erase("preset");
  json j = write_scenario(base);
  if (patch.contains("sampling")) j.erase("sampling");
  j.merge_patch(patch);
  return read_scenario(j);
}

ModelSpec parse_model(const std::string& json_text) { return read_model(Reader(parse_json(json_text), "model")); }

ModelSpec load_model(const std::string& path) { return parse_model(read_file(path)); }

std::vector<std::string> preset_names() {
  return {"fig2", "fig5", "tracking", "tracking-raw", "table1", "optout"};
}

ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  if (name == "fig2") {
    c.classes = {{pool(12), 20}};
    c.n = 20;
    c.horizon = 576;
    c.control = ControlMode::kRaw;
  } else if (name == "fig5") {
    c.classes = {{pool(12), 10000}};
    c.n = 10;
    c.control = ControlMode::kPrefilter;
    c.filter = FilterVariant::kJoint;
  } else if (name == "tracking" || name == "tracking-raw") {
    c.classes = {{pool(12), 10000}};
    c.n = 10;
    c.control = name == "tracking" ? ControlMode::kFiltered : ControlMode::kRaw;
  } else if (name == "table1") {
    c.classes = table_classes(10000);
    c.fraction = 0.001;
    c.filter_models = {pool(8), pool(12)};
    c.inflation = true;
    c.inflation_k_per_load = 1.0 / 300.0;
  } else if (name == "optout") {
    c.classes = table_classes(1000);
    c.fraction = 0.001;
    c.filter_models = {pool(8), pool(12)};
    c.inflation = true;
    c.inflation_k_per_load = 1.0 / 100.0;
    c.inflation_b = 300.0;
    c.track_qos = true;
    c.optout_bounds = {{-50.0, 50.0}};
    c.qos_warmup = 2016;
  } else {
    std::string names;
    for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("preset: unknown preset \"" + name + "\" (expected one of " + names + ")");
  }
  c.reference.horizon = c.horizon;
  c.reference.step_seconds = c.step_seconds;
  validate(c);
  return c;
}

}  // namespace meanfield
