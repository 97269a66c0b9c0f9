#include "lgv/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "lgv/error.hpp"
#include "lgv/fp.hpp"
#include "lgv/observable.hpp"
#include "lgv/response.hpp"
#include "lgv/stats.hpp"

namespace lgv {

using nlohmann::json;

const char* experiment_tag(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::simulate: return "simulate";
    case ExperimentKind::response: return "response";
    case ExperimentKind::greenkubo: return "greenkubo";
    case ExperimentKind::fpsolve: return "fpsolve";
    case ExperimentKind::revcheck: return "revcheck";
    case ExperimentKind::double_limit: return "double_limit";
    case ExperimentKind::gle_compare: return "gle_compare";
  }
  return "?";
}

void ExperimentConfig::override_seed(std::uint64_t s) {
  seed = s;
  sim.seed = s;
  if (auto* r = std::get_if<RevcheckParams>(&analysis)) r->options.seed = s;
}

namespace {

[[noreturn]] void invalid(const std::string& key, const std::string& what) {
  fail(ErrorCode::ConfigInvalid, key + ": " + what);
}

// Typed access to one JSON object. Every key read is remembered; finish() rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_, "expected object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k) && !j_.at(k).is_null();
  }
  const json& at(const std::string& k) {
    if (!has(k)) invalid(key(k), "required");
    return j_.at(k);
  }
  Section child(const std::string& k) { return Section(at(k), key(k)); }

  double number(const std::string& k) {
    const json& v = at(k);
    if (!v.is_number()) invalid(key(k), "expected number");
    return v.get<double>();
  }
  double number(const std::string& k, double def) { return has(k) ? number(k) : def; }
  double positive(const std::string& k) {
    const double v = number(k);
    if (!(v > 0.0)) invalid(key(k), "expected positive number");
    return v;
  }
  double positive(const std::string& k, double def) { return has(k) ? positive(k) : def; }
  long integer(const std::string& k) {
    const json& v = at(k);
    if (!v.is_number_integer()) invalid(key(k), "expected integer");
    return v.get<long>();
  }
  long integer(const std::string& k, long def) { return has(k) ? integer(k) : def; }
  long count(const std::string& k) {
    const long v = integer(k);
    if (v <= 0) invalid(key(k), "expected positive integer");
    return v;
  }
  long count(const std::string& k, long def) { return has(k) ? count(k) : def; }
  bool boolean(const std::string& k, bool def) {
    if (!has(k)) return def;
    const json& v = j_.at(k);
    if (!v.is_boolean()) invalid(key(k), "expected boolean");
    return v.get<bool>();
  }
  std::string string(const std::string& k) {
    const json& v = at(k);
    if (!v.is_string()) invalid(key(k), "expected string");
    return v.get<std::string>();
  }
  std::string string(const std::string& k, const std::string& def) { return has(k) ? string(k) : def; }
  std::vector<double> numbers(const std::string& k) {
    const json& v = at(k);
    if (!v.is_array()) invalid(key(k), "expected array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) invalid(key(k), "expected array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<double> numbers(const std::string& k, std::vector<double> def) { return has(k) ? numbers(k) : def; }
  std::vector<std::string> strings(const std::string& k) {
    const json& v = at(k);
    if (!v.is_array()) invalid(key(k), "expected array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) invalid(key(k), "expected array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  template <class E>
  E choice(const std::string& k, const std::vector<std::pair<std::string, E>>& options, std::optional<E> def = {}) {
    if (!has(k)) {
      if (def) return *def;
      invalid(key(k), "required");
    }
    const std::string s = string(k);
    std::string names;
    for (const auto& [name, value] : options) {
      if (name == s) return value;
      names += (names.empty() ? "" : " | ") + name;
    }
    invalid(key(k), "expected one of " + names);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) invalid(key(k), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Grid1D parse_grid(Section s) {
  const double lo = s.number("lo"), hi = s.number("hi");
  const long n = s.count("n");
  s.finish();
  if (!(hi > lo)) invalid(s.key("hi"), "expected hi > lo");
  return Grid1D{lo, hi, static_cast<std::size_t>(n)};
}

Potential parse_potential(Section s) {
  const std::string kind = s.string("kind");
  Potential v;
  if (kind == "quadratic") {
    v = Potential::quadratic(static_cast<int>(s.count("dim", 1)), s.positive("k", 1.0));
  } else if (kind == "double_well") {
    v = Potential::double_well(static_cast<int>(s.count("dim", 1)), s.positive("a", 0.25), s.number("b", 0.5));
  } else if (kind == "tabulated") {
    const auto q = s.numbers("q"), vals = s.numbers("v");
    if (q.size() != vals.size() || q.size() < 4) invalid(s.key("v"), "expected as many values as q nodes (>= 4)");
    v = Potential::tabulated(q, vals);
  } else {
    invalid(s.key("kind"), "expected one of quadratic | double_well | tabulated");
  }
  if (s.has("bumps")) {
    const json& list = s.at("bumps");
    if (!list.is_array()) invalid(s.key("bumps"), "expected array of objects");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Section b(list[i], s.key("bumps") + "[" + std::to_string(i) + "]");
      const auto c = b.numbers("center");
      if (static_cast<int>(c.size()) != v.dim()) invalid(b.key("center"), "expected " + std::to_string(v.dim()) + " entries");
      const Bump bump{c, b.positive("radius"), b.number("amplitude", 1.0)};
      const double coef = b.number("coef", 1.0);
      b.finish();
      v = v.plus_bump(bump, coef);
    }
  }
  s.finish();
  return v;
}

DiffusionMatrix parse_sigma(const json& j, const std::string& key, int d) {
  if (j.is_number()) return DiffusionMatrix(Mat::Identity(d, d) * j.get<double>());
  if (!j.is_array() || static_cast<int>(j.size()) != d)
    invalid(key, "expected number, " + std::to_string(d) + "-vector or " + std::to_string(d) + "x" + std::to_string(d) +
                     " matrix");
  if (j[0].is_number()) {
    std::vector<double> diag;
    for (const auto& e : j) {
      if (!e.is_number()) invalid(key, "expected array of numbers");
      diag.push_back(e.get<double>());
    }
    return DiffusionMatrix::diagonal(diag);
  }
  Mat s(d, d);
  for (int i = 0; i < d; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != d) invalid(key, "expected square matrix");
    for (int k = 0; k < d; ++k) {
      if (!j[i][k].is_number()) invalid(key, "expected square matrix of numbers");
      s(i, k) = j[i][k].get<double>();
    }
  }
  return DiffusionMatrix(s);
}

PerturbationSpec parse_perturbation(Section s, int d) {
  const auto form = s.choice<PerturbationForm>("form", {{"bump", PerturbationForm::potential_bump},
                                                        {"linear", PerturbationForm::linear_override},
                                                        {"field", PerturbationForm::general_field}});
  const double eps = s.number("epsilon", 0.0);
  auto vec = [&](const std::string& k) {
    auto v = s.numbers(k);
    if (static_cast<int>(v.size()) != d) invalid(s.key(k), "expected " + std::to_string(d) + " entries");
    return v;
  };
  PerturbationSpec p;
  switch (form) {
    case PerturbationForm::potential_bump:
      p = PerturbationSpec::bump(vec("center"), s.positive("radius"), s.number("amplitude", 1.0), eps);
      break;
    case PerturbationForm::linear_override:
      p = PerturbationSpec::linear(vec("direction"), s.number("amplitude", 1.0), eps);
      break;
    case PerturbationForm::general_field:
      p = PerturbationSpec::field(vec("center"), s.positive("radius"), s.number("amplitude", 1.0), vec("direction"),
                                  s.number("swirl", 0.0), eps);
      break;
  }
  s.finish();
  return p;
}

Model parse_model(Section s) {
  Model m;
  m.kind = s.choice<DynamicsKind>("dynamics", {{"overdamped", DynamicsKind::overdamped},
                                               {"underdamped", DynamicsKind::underdamped},
                                               {"gle_augmented", DynamicsKind::gle_augmented},
                                               {"gle_convolution", DynamicsKind::gle_convolution}},
                                  DynamicsKind::overdamped);
  m.potential = parse_potential(s.child("potential"));
  const int d = m.dim();
  m.sigma = s.has("sigma") ? parse_sigma(s.at("sigma"), s.key("sigma"), d) : DiffusionMatrix::identity(d);
  m.beta = s.positive("beta", 1.0);
  m.alpha = s.positive("alpha", 1.0);
  m.rotation = s.number("rotation", 0.0);
  if (s.has("perturbation")) m.perturbation = parse_perturbation(s.child("perturbation"), d);
  s.finish();
  try {
    m.validate();
  } catch (const Error& e) {
    invalid(s.key(""), e.what());
  }
  return m;
}

void parse_numerics(Section s, ExperimentConfig& c) {
  SimConfig& sim = c.sim;
  sim.dt = s.positive("dt", sim.dt);
  if (s.has("n_steps") && s.has("horizon")) invalid(s.key("horizon"), "give either n_steps or horizon, not both");
  if (s.has("horizon")) {
    const double t = s.positive("horizon");
    sim.n_steps = std::lround(t / sim.dt);
    if (std::abs(static_cast<double>(sim.n_steps) * sim.dt - t) > 1e-9 * t)
      invalid(s.key("horizon"), "expected a multiple of dt");
  } else {
    sim.n_steps = s.count("n_steps", sim.n_steps);
  }
  sim.n_paths = s.count("n_paths", sim.n_paths);
  sim.record_stride = s.count("record_stride", sim.record_stride);
  sim.burn_in_steps = s.integer("burn_in_steps", 0);
  if (sim.burn_in_steps < 0) invalid(s.key("burn_in_steps"), "expected non-negative integer");
  if (s.has("init")) {
    const json& j = s.at("init");
    if (j.is_string() && j.get<std::string>() == "gibbs") {
      c.init = InitSpec::gibbs();
    } else if (j.is_object()) {
      Section i(j, s.key("init"));
      auto x = i.numbers("point");
      i.finish();
      if (static_cast<int>(x.size()) != c.model.state_dim())
        invalid(i.key("point"), "expected " + std::to_string(c.model.state_dim()) + " entries");
      c.init = InitSpec::at(std::move(x));
    } else {
      invalid(s.key("init"), "expected \"gibbs\" or {\"point\": [...]}");
    }
  }
  if (s.has("grid")) c.grid = parse_grid(s.child("grid"));
  if (s.has("p_grid")) c.p_grid = parse_grid(s.child("p_grid"));
  s.finish();
  if (sim.n_steps % sim.record_stride != 0) invalid(s.key("record_stride"), "expected a divisor of n_steps");
}

std::string default_observable(const Model& m) { return m.dim() == 1 ? "q" : "q1"; }

// Parses once at load time so malformed expressions fail validation, not the run.
void check_observable(const std::string& expr, const std::string& key, const Model& m) {
  try {
    (void)Observable::parse(expr, m.dim(), m.state_dim());
  } catch (const Error& e) {
    invalid(key, e.what());
  }
}

std::vector<double> epsilon_list(Section& s, const ExperimentConfig& c) {
  if (!c.model.perturbation) invalid("model.perturbation", "required");
  std::vector<double> eps = s.numbers("epsilon", {});
  if (eps.empty()) eps = {c.model.epsilon()};
  return eps;
}

AnalysisParams parse_analysis(Section s, ExperimentConfig& c) {
  const Model& m = c.model;
  auto need_grid = [&] {
    if (!c.grid) invalid("numerics.grid", "required");
  };
  switch (c.kind) {
    case ExperimentKind::simulate: {
      SimulateParams p;
      if (s.has("observables")) p.observables = s.strings("observables");
      if (p.observables.empty())
        for (int i = 0; i < m.dim(); ++i) p.observables.push_back(m.dim() == 1 ? "q" : "q" + std::to_string(i + 1));
      for (const auto& o : p.observables) check_observable(o, s.key("observables"), m);
      s.finish();
      return p;
    }
    case ExperimentKind::response: {
      ResponseParams p;
      p.observable = s.string("observable", default_observable(m));
      check_observable(p.observable, s.key("observable"), m);
      p.epsilons = epsilon_list(s, c);
      p.predictor = s.boolean("predictor", true);
      p.paired = s.boolean("paired", true);
      p.abs_floor = s.number("abs_floor", p.abs_floor);
      p.predictor_paths = s.count("predictor_paths", c.sim.n_paths);
      p.predictor_dt = s.positive("predictor_dt", c.sim.dt);
      s.finish();
      return p;
    }
    case ExperimentKind::greenkubo: {
      GreenKuboParams p;
      using M = GreenKuboParams::Mode;
      p.mode = s.choice<M>("mode", {{"correlation", M::correlation}, {"gk_check", M::gk_check},
                                    {"diffusion", M::diffusion}, {"onsager", M::onsager}},
                           M::gk_check);
      p.max_lag = s.positive("max_lag");
      if (s.has("truncation")) {
        const json& t = s.at("truncation");
        if (t.is_string() && t.get<std::string>() == "auto_tail") p.truncation = Truncation::automatic();
        else if (t.is_number() && t.get<double>() > 0.0) p.truncation = Truncation::fixed(t.get<double>());
        else invalid(s.key("truncation"), "expected \"auto_tail\" or a positive cut time");
      }
      p.abs_floor = s.number("abs_floor", p.abs_floor);
      if (m.kind != DynamicsKind::overdamped && p.mode != M::correlation)
        invalid("model.dynamics", "expected overdamped for this greenkubo mode");
      if (p.mode == M::correlation) {
        p.a = s.string("A", default_observable(m));
        p.b = s.string("B", p.a);
        check_observable(p.a, s.key("A"), m);
        check_observable(p.b, s.key("B"), m);
      } else if (p.mode == M::gk_check || p.mode == M::onsager) {
        p.g = s.string("g", default_observable(m));
        check_observable(p.g, s.key("g"), m);
        if (!m.perturbation) invalid("model.perturbation", "required");
        if (!m.perturbation->is_gradient()) invalid("model.perturbation.form", "expected bump or linear");
        if (p.mode == M::onsager) {
          p.epsilons = s.numbers("epsilon");
          if (!std::is_sorted(p.epsilons.rbegin(), p.epsilons.rend()) || p.epsilons.empty())
            invalid(s.key("epsilon"), "expected a non-empty decreasing list");
        }
      }
      s.finish();
      return p;
    }
    case ExperimentKind::fpsolve: {
      FpParams p;
      using M = FpParams::Mode;
      p.mode = s.choice<M>("mode", {{"stationary", M::stationary}, {"decay", M::decay}, {"kinetic_decay", M::kinetic_decay}},
                           M::stationary);
      need_grid();
      if (m.dim() != 1) invalid("model.potential.dim", "expected 1 for fpsolve");
      const bool kinetic = p.mode == M::kinetic_decay;
      if (kinetic != (m.kind == DynamicsKind::underdamped))
        invalid("model.dynamics", kinetic ? "expected underdamped for kinetic_decay" : "expected overdamped");
      if (kinetic && !c.p_grid) invalid("numerics.p_grid", "required");
      if (p.mode != M::stationary) {
        p.epsilons = epsilon_list(s, c);
        p.dt = kinetic ? s.number("dt", 0.0) : s.positive("dt");
        p.t_end = s.positive("t_end");
        p.sample_every = static_cast<int>(s.count("sample_every", 1));
        p.min_r2 = s.number("min_r2", kinetic ? 0.98 : 0.99);
        p.max_rate_spread = s.number("max_rate_spread", p.max_rate_spread);
        p.transient_fraction = s.number("transient_fraction", p.transient_fraction);
        if (!kinetic && std::all_of(p.epsilons.begin(), p.epsilons.end(), [](double e) { return e == 0.0; }))
          invalid(s.key("epsilon"), "expected at least one non-zero entry");
      }
      s.finish();
      return p;
    }
    case ExperimentKind::revcheck: {
      RevcheckParams p;
      p.battery = s.boolean("battery", false);
      if (s.has("expect")) {
        p.expect_reversible =
            s.choice<bool>("expect", {{"reversible", true}, {"irreversible", false}});
      }
      auto& o = p.options;
      o.n_paths = s.count("n_paths", o.n_paths);
      o.dt = s.number("dt", o.dt);
      o.horizon = s.positive("horizon", o.horizon);
      o.record_spacing = s.positive("record_spacing", o.record_spacing);
      o.lags = s.numbers("lags", o.lags);
      o.q_step = s.positive("q_step", o.q_step);
      if (s.has("pairs")) {
        const json& list = s.at("pairs");
        if (!list.is_array()) invalid(s.key("pairs"), "expected array of [A, B] string pairs");
        for (const auto& e : list) {
          if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
            invalid(s.key("pairs"), "expected array of [A, B] string pairs");
          p.pairs.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
          check_observable(p.pairs.back().first, s.key("pairs"), m);
          check_observable(p.pairs.back().second, s.key("pairs"), m);
        }
      }
      o.seed = c.seed;
      s.finish();
      return p;
    }
    case ExperimentKind::double_limit: {
      DoubleLimitParams p;
      p.observable = s.string("observable", default_observable(m));
      check_observable(p.observable, s.key("observable"), m);
      if (!m.perturbation) invalid("model.perturbation", "required");
      p.epsilons = s.numbers("epsilon");
      p.times = s.numbers("times");
      if (p.epsilons.size() < 2) invalid(s.key("epsilon"), "expected at least two values");
      if (p.times.size() < 3) invalid(s.key("times"), "expected at least three values");
      p.plateau_start = s.number("plateau_start", -1.0);
      p.abs_floor = s.number("abs_floor", p.abs_floor);
      p.predictor_paths = s.count("predictor_paths", c.sim.n_paths);
      p.predictor_dt = s.positive("predictor_dt", c.sim.dt);
      if (s.has("gateaux_grid")) p.gateaux_grid = parse_grid(s.child("gateaux_grid"));
      s.finish();
      return p;
    }
    case ExperimentKind::gle_compare: {
      GleCompareParams p;
      const auto r = s.numbers("ratio_range", {p.ratio_lo, p.ratio_hi});
      if (r.size() != 2 || !(r[0] < r[1])) invalid(s.key("ratio_range"), "expected [lo, hi] with lo < hi");
      p.ratio_lo = r[0];
      p.ratio_hi = r[1];
      if (m.kind != DynamicsKind::gle_augmented && m.kind != DynamicsKind::gle_convolution)
        invalid("model.dynamics", "expected gle_augmented or gle_convolution");
      s.finish();
      return p;
    }
  }
  fail(ErrorCode::Internal, "unhandled experiment kind");
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  Section top(doc, "");
  ExperimentConfig c;
  c.kind = top.choice<ExperimentKind>("experiment", {{"simulate", ExperimentKind::simulate},
                                                     {"response", ExperimentKind::response},
                                                     {"greenkubo", ExperimentKind::greenkubo},
                                                     {"fpsolve", ExperimentKind::fpsolve},
                                                     {"revcheck", ExperimentKind::revcheck},
                                                     {"double_limit", ExperimentKind::double_limit},
                                                     {"gle_compare", ExperimentKind::gle_compare}});
  {
    const json& s = top.at("seed");
    if (!s.is_number_unsigned()) invalid("seed", "expected non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  c.model = parse_model(top.child("model"));
  if (top.has("numerics")) parse_numerics(top.child("numerics"), c);
  c.sim.seed = c.seed;
  {
    static const json empty = json::object();
    Section a(top.has("analysis") ? top.at("analysis") : empty, "analysis");
    c.analysis = parse_analysis(std::move(a), c);
  }
  if (top.has("output")) {
    Section o = top.child("output");
    c.output.directory = o.string("directory", c.output.directory);
    if (o.has("formats")) {
      c.output.csv = c.output.json = c.output.plot = false;
      for (const auto& f : o.strings("formats")) {
        if (f == "csv") c.output.csv = true;
        else if (f == "json") c.output.json = true;
        else if (f == "plot") c.output.plot = true;
        else invalid(o.key("formats"), "expected entries from csv | json | plot");
      }
    }
    o.finish();
  }
  top.finish();
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ConfigInvalid, std::string("config: not valid JSON (") + e.what() + ")");
  }
  return parse_config(doc);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---- Results ----------------------------------------------------------------------------

bool ExperimentResult::pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

namespace {

json verdict_json(const Verdict& v) {
  return {{"name", v.name}, {"lhs", v.lhs}, {"rhs", v.rhs}, {"tolerance", v.tolerance}, {"pass", v.pass}};
}

// JSON has no NaN or infinity; such values are written as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json rate_json(const RateFit& f) {
  return {{"norm", f.norm}, {"rate", f.rate}, {"intercept", f.intercept}, {"r_squared", f.r_squared},
          {"t_lo", f.t_lo}, {"t_hi", f.t_hi}, {"n_points", f.n_points}};
}

Table curve_table(const std::string& name, const ResponseCurve& c) {
  Table t{name, {"t", "value", "se", "epsilon"}, {}, 0, 1, 2};
  for (std::size_t k = 0; k < c.times.size(); ++k) t.add_row({c.times[k], c.values[k], c.se[k], c.epsilon});
  return t;
}

Table series_table(const std::string& name, const CorrelationSeries& s) {
  Table t{name, {"lag", "value", "se"}, {}, 0, 1, 2};
  for (std::size_t k = 0; k < s.lags.size(); ++k) t.add_row({s.lags[k], s.values[k], s.se[k]});
  return t;
}

std::string eps_tag(double e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "eps=%g", e);
  return buf;
}

// Predictor run: unperturbed, twice the horizon, its own step and seed, recording on the same
// time grid as the response runs.
// Predictor run on the table's record grid, recorded on a finer lag grid (spacing at most
// kPredictorLagSpacing) so the trapezoid error of the lag integral, O(h²), stays well below the
// Monte Carlo error. `every` is the number of fine lags per reported lag.
constexpr double kPredictorLagSpacing = 0.05;

struct PredictorRun {
  SimConfig cfg;
  long every = 1;
};

PredictorRun predictor_config(const SimConfig& base, double dt, long n_paths, std::uint64_t seed) {
  SimConfig pc = base;
  const double spacing = base.dt * static_cast<double>(base.record_stride);
  pc.dt = dt > 0.0 ? dt : base.dt;
  const long stride = std::lround(spacing / pc.dt);
  require(stride > 0 && std::abs(static_cast<double>(stride) * pc.dt - spacing) < 1e-9 * spacing,
          "predictor dt must divide the record spacing");
  long every = 1;
  while (spacing / static_cast<double>(every) > kPredictorLagSpacing * (1 + 1e-9) && every < stride) {
    do ++every;
    while (stride % every != 0);
  }
  pc.record_stride = stride / every;
  pc.n_steps = std::lround(2.0 * base.horizon() / pc.dt);
  pc.n_paths = n_paths;
  pc.seed = seed;
  return {pc, every};
}

Observable observable(const std::string& expr, const Model& m) { return Observable::parse(expr, m.dim(), m.state_dim()); }

// ---- simulate ---------------------------------------------------------------------------

void run_simulate(const ExperimentConfig& c, const SimulateParams& p, ExperimentResult& r) {
  const Ensemble ens = simulate(c.model, c.sim, c.init);
  for (const auto& expr : p.observables) {
    const Mat vals = evaluate_on(ens, observable(expr, c.model));
    Table t{"mean_" + sanitize(expr), {"t", "mean", "se"}, {}, 0, 1, 2};
    for (long k = 0; k < ens.n_records; ++k) {
      const Vec col = vals.col(k);
      const MeanSE ms = batch_means(std::span<const double>(col.data(), col.size()));
      t.add_row({ens.times[k], ms.mean, ms.se});
    }
    r.tables.push_back(std::move(t));
  }
  r.summary["n_paths"] = ens.n_paths;
  r.summary["n_records"] = ens.n_records;
}

// ---- response ---------------------------------------------------------------------------

void run_response(const ExperimentConfig& c, const ResponseParams& p, ExperimentResult& r) {
  const Observable phi = observable(p.observable, c.model);
  std::optional<ResponseCurve> pred;
  if (p.predictor) {
    const PredictorRun pr = predictor_config(c.sim, p.predictor_dt, p.predictor_paths, c.seed + 1);
    PredictOptions po;
    po.max_lag = c.sim.horizon();
    po.output_every = pr.every;
    pred = predict_response(c.model.unperturbed(), phi, pr.cfg, po);
    r.tables.push_back(curve_table("predictor", *pred));
  }
  std::vector<double> worst;
  std::vector<double> worst_se;
  for (double eps : p.epsilons) {
    ResponseOptions ro;
    ro.paired = p.paired;
    const ResponseCurve curve = estimate_response(c.model.with_epsilon(eps), phi, c.sim, ro);
    r.tables.push_back(curve_table("response_" + eps_tag(eps), curve));
    if (!pred) continue;
    require(pred->times.size() == curve.times.size(), "predictor and response time grids differ");
    double ratio = 0.0, disc = 0.0, disc_se = 0.0;
    for (std::size_t k = 0; k < curve.times.size(); ++k) {
      const double se = std::hypot(curve.se[k], pred->se[k]);
      const double d = std::abs(curve.values[k] - pred->values[k]);
      ratio = std::max(ratio, d / std::max(3.0 * se, p.abs_floor));
      if (d > disc) {
        disc = d;
        disc_se = se;
      }
    }
    r.verdicts.push_back({"response_vs_predictor[" + eps_tag(eps) + "] (worst |diff| / tolerance)", ratio, 0.0, 1.0,
                          ratio <= 1.0});
    worst.push_back(disc);
    worst_se.push_back(disc_se);
  }
  // Discrepancy non-increasing as ε decreases, with 1·SE slack.
  if (worst.size() >= 2) {
    std::vector<std::size_t> order(worst.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return p.epsilons[a] > p.epsilons[b]; });
    double excess = 0.0;
    for (std::size_t k = 1; k < order.size(); ++k)
      excess = std::max(excess, worst[order[k]] - worst[order[k - 1]] - worst_se[order[k]]);
    r.verdicts.push_back({"discrepancy_non_increasing_in_eps (max excess)", excess, 0.0, 0.0, excess <= 0.0});
  }
}

// ---- greenkubo --------------------------------------------------------------------------

json gk_json(const GKResult& g) {
  return {{"value", g.value}, {"se", g.se}, {"tail", g.tail}, {"t_cut", g.t_cut}, {"tail_rate", g.tail_rate}};
}

void run_greenkubo(const ExperimentConfig& c, const GreenKuboParams& p, ExperimentResult& r) {
  using M = GreenKuboParams::Mode;
  const Model base = c.model.unperturbed();
  if (p.mode == M::onsager) {
    const OnsagerResult o =
        onsager_regression_check(c.model, observable(p.g, c.model), p.epsilons, c.sim, p.max_lag, p.truncation);
    Table t{"onsager", {"epsilon", "value", "se", "gap", "gap_se"}, {}, 0, 1, 2};
    for (std::size_t i = 0; i < o.eps.size(); ++i) t.add_row({o.eps[i], o.values[i], o.se[i], o.gaps[i], o.gap_se[i]});
    r.tables.push_back(std::move(t));
    r.verdicts.push_back({"onsager_gap_monotone", o.monotone ? 1.0 : 0.0, 1.0, 0.0, o.monotone});
    r.verdicts.push_back({"onsager_final_gap", o.gaps.empty() ? 0.0 : o.gaps[o.gaps.size() - 2], 0.0, 0.0,
                          o.final_gap_ok});
    return;
  }
  const Ensemble ens = simulate(base, c.sim, InitSpec::gibbs());
  if (p.mode == M::correlation) {
    const CorrelationSeries s = autocorrelation(ens, observable(p.a, c.model), observable(p.b, c.model), p.max_lag);
    r.tables.push_back(series_table("correlation", s));
    r.summary["integral"] = gk_json(gk_integral(s, p.truncation));
  } else if (p.mode == M::gk_check) {
    const GKCheck g = gk_check(ens, base, observable(p.g, c.model), *c.model.perturbation, p.max_lag, p.abs_floor,
                               p.truncation);
    r.verdicts.push_back({"green_kubo (-int K vs int W Lg rho)", g.integral, g.quadrature, g.tolerance, g.pass});
    r.summary["integral"] = gk_json(g.gk);
    r.summary["quadrature"] = g.quadrature;
  } else {
    const int d = c.model.dim();
    const Mat& a = c.model.sigma.a();
    Table t{"diffusion", {"i", "j", "value", "se", "expected"}, {}};
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const GKResult g = diffusion_coefficient(ens, base, i, j, p.max_lag, p.truncation);
        const double want = a(i, j);
        const double tol = want != 0.0 ? 0.05 * std::abs(want) : 3.0 * g.se;
        r.verdicts.push_back(compare("diffusion[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]", g.value,
                                     want, tol));
        t.add_row({double(i + 1), double(j + 1), g.value, g.se, want});
      }
    r.tables.push_back(std::move(t));
  }
}

// ---- fpsolve ----------------------------------------------------------------------------

Table decay_table(const std::string& name, const DecaySeries& s) {
  Table t{name, {"t", "L1", "L2weighted", "entropy"}, {}, 0, 1};
  for (std::size_t k = 0; k < s.t.size(); ++k) t.add_row({s.t[k], s.l1[k], s.l2_weighted[k], s.entropy[k]});
  return t;
}

void run_fpsolve(const ExperimentConfig& c, const FpParams& p, ExperimentResult& r) {
  using M = FpParams::Mode;
  const Model& m = c.model;
  const Grid1D g = *c.grid;
  if (p.mode == M::stationary) {
    const TridiagonalOperator a = assemble_overdamped_fp(m, g);
    const DensityField rho = stationary_solve(a);
    const Model m0 = m.unperturbed();
    const DensityField gibbs0 = discrete_gibbs(m0.potential, m.beta, g);
    const Residual res = residual(assemble_overdamped_fp(m0, g), gibbs0);
    r.verdicts.push_back({"unperturbed_gibbs_residual (normwise)", res.relative, 0.0, 1e-12, res.relative < 1e-12});
    r.summary["gibbs_residual_abs"] = res.absolute;
    Table t{"stationary", {"q", "density"}, {}, 0, 1};
    std::optional<DensityField> exact;
    if (m.is_gradient()) {
      exact = discrete_gibbs(m.effective_potential(), m.beta, g);
      t.columns.push_back("gibbs");
      const double l1 = distance(rho, *exact, NormTag::l1);
      r.verdicts.push_back({"stationary_vs_gibbs (L1)", l1, 0.0, 1e-8, l1 < 1e-8});
    }
    for (std::size_t i = 0; i < rho.size(); ++i) {
      std::vector<double> row{g.center(i), rho.values[i]};
      if (exact) row.push_back(exact->values[i]);
      t.add_row(std::move(row));
    }
    r.tables.push_back(std::move(t));
    return;
  }
  RateFitOptions fo;
  fo.transient_fraction = p.transient_fraction;
  std::vector<double> rates;
  if (p.mode == M::kinetic_decay) {
    const Grid2D g2{g, *c.p_grid};
    for (double eps : p.epsilons) {
      const KineticOperator k = assemble_kinetic_fp(m.with_epsilon(eps), g2);
      const DensityField inf = kinetic_stationary(k);
      const DensityField start = discrete_phase_gibbs(m.potential, m.beta, g2);
      const double dt = p.dt > 0.0 ? p.dt : k.max_transport_dt();
      const DecaySeries s = decay_kinetic(k, start, inf, dt, p.t_end, p.sample_every);
      const RateFit f = fit_rate(s.t, s.l2_weighted, {}, "l2_weighted", fo);
      r.tables.push_back(decay_table("kinetic_decay_" + eps_tag(eps), s));
      r.summary["rate_fits"][eps_tag(eps)] = rate_json(f);
      r.verdicts.push_back({"rate_positive[" + eps_tag(eps) + "]", f.rate, 0.0, 0.0, f.rate > 0.0});
      r.verdicts.push_back({"fit_r2[" + eps_tag(eps) + "]", f.r_squared, p.min_r2, 0.0, f.r_squared > p.min_r2});
    }
    return;
  }
  // ρ₀ is the unperturbed Gibbs law, already stationary for ε = 0; that run starts from the
  // stationary law of the largest ε instead.
  const DensityField rho0 = discrete_gibbs(m.potential, m.beta, g);
  const double eps_max = *std::max_element(p.epsilons.begin(), p.epsilons.end(),
                                           [](double a, double b) { return std::abs(a) < std::abs(b); });
  for (double eps : p.epsilons) {
    const TridiagonalOperator a = assemble_overdamped_fp(m.with_epsilon(eps), g);
    const DensityField inf = stationary_solve(a);
    const DensityField start = eps != 0.0 ? rho0 : stationary_solve(assemble_overdamped_fp(m.with_epsilon(eps_max), g));
    const DecaySeries s = decay_1d(a, start, inf, p.dt, p.t_end, p.sample_every);
    const RateFit f = fit_rate(s.t, s.l1, {}, "l1", fo);
    r.tables.push_back(decay_table("decay_" + eps_tag(eps), s));
    r.summary["rate_fits"][eps_tag(eps)] = rate_json(f);
    r.verdicts.push_back({"rate_positive[" + eps_tag(eps) + "]", f.rate, 0.0, 0.0, f.rate > 0.0});
    r.verdicts.push_back({"fit_r2[" + eps_tag(eps) + "]", f.r_squared, p.min_r2, 0.0, f.r_squared > p.min_r2});
    rates.push_back(f.rate);
  }
  if (rates.size() >= 2) {
    const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
    const double spread = *lo > 0.0 ? (*hi - *lo) / *lo : std::numeric_limits<double>::infinity();
    r.verdicts.push_back({"rate_spread ((max-min)/min)", spread, 0.0, p.max_rate_spread, spread <= p.max_rate_spread});
  }
}

// ---- revcheck ---------------------------------------------------------------------------

json report_json(const ReversibilityReport& rep) {
  json j{{"dynamics", dynamics_tag(rep.dynamics)}, {"model", rep.model_tag}, {"reversible", rep.overall()}};
  for (const auto& v : rep.checks) j["checks"].push_back(verdict_json(v));
  for (const auto& v : rep.details) j["details"].push_back(verdict_json(v));
  return j;
}

void run_revcheck(const ExperimentConfig& c, const RevcheckParams& p, ExperimentResult& r) {
  if (p.battery) {
    const auto entries = reversibility_battery(p.options);
    Table t{"battery", {"dynamics", "case", "expected_reversible", "consistent"}, {}};
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      r.summary["battery"].push_back(report_json(e.report));
      r.verdicts.push_back({std::string("battery[") + dynamics_tag(e.report.dynamics) + "/" + e.report.model_tag + "]",
                            e.consistent() ? 1.0 : 0.0, 1.0, 0.0, e.consistent()});
      t.add_row({double(static_cast<int>(e.report.dynamics)), double(i % 3), e.expected_reversible ? 1.0 : 0.0,
                 e.consistent() ? 1.0 : 0.0});
    }
    r.tables.push_back(std::move(t));
    return;
  }
  ReversibilityReport rep;
  if (p.pairs.empty()) {
    rep = check_reversibility(c.model, "config", p.options);
  } else {
    std::vector<TestPair> pairs;
    for (const auto& [a, b] : p.pairs) pairs.push_back({observable(a, c.model), observable(b, c.model)});
    rep = check_reversibility(c.model, "config", p.options, pairs);
  }
  r.summary["report"] = report_json(rep);
  if (p.expect_reversible) {
    const bool rev = rep.overall();
    r.verdicts.push_back({std::string("verdict matches expected ") + (*p.expect_reversible ? "reversible" : "irreversible"),
                          rev ? 1.0 : 0.0, *p.expect_reversible ? 1.0 : 0.0, 0.0, rev == *p.expect_reversible});
  } else {
    r.verdicts = rep.checks;
  }
}

// ---- double_limit -----------------------------------------------------------------------

void run_double_limit(const ExperimentConfig& c, const DoubleLimitParams& p, ExperimentResult& r) {
  DoubleLimitOptions o;
  o.plateau_start = p.plateau_start;
  o.abs_floor = p.abs_floor;
  o.gateaux_grid = p.gateaux_grid;
  o.predictor_cfg = predictor_config(c.sim, p.predictor_dt, p.predictor_paths, c.seed + 1).cfg;
  const DoubleLimitResult d = double_limit_table(c.model, observable(p.observable, c.model), p.epsilons, p.times, c.sim, o);
  Table vals{"double_limit_table", {"epsilon"}, {}};
  Table ses{"double_limit_se", {"epsilon"}, {}};
  for (double t : d.t_list) {
    vals.columns.push_back("t=" + format_number(t));
    ses.columns.push_back("t=" + format_number(t));
  }
  for (std::size_t i = 0; i < d.eps_list.size(); ++i) {
    std::vector<double> a{d.eps_list[i]}, b{d.eps_list[i]};
    for (std::size_t k = 0; k < d.t_list.size(); ++k) {
      a.push_back(d.values(i, k));
      b.push_back(d.se(i, k));
    }
    vals.add_row(std::move(a));
    ses.add_row(std::move(b));
  }
  r.tables.push_back(std::move(vals));
  r.tables.push_back(std::move(ses));
  Table rows{"row_limits", {"epsilon", "value", "se"}, {}, 0, 1, 2};
  for (std::size_t i = 0; i < d.eps_list.size(); ++i) rows.add_row({d.eps_list[i], d.row_limits[i], d.row_limit_se[i]});
  Table cols{"column_limits", {"t", "value", "se"}, {}, 0, 1, 2};
  for (std::size_t k = 0; k < d.t_list.size(); ++k) cols.add_row({d.t_list[k], d.column_limits[k], d.column_limit_se[k]});
  r.tables.push_back(std::move(rows));
  r.tables.push_back(std::move(cols));
  r.tables.push_back(curve_table("predictor", d.predictor));
  r.summary["limit_t_then_eps"] = {{"value", d.limit_t_then_eps}, {"se", d.limit_t_then_eps_se}};
  r.summary["limit_eps_then_t"] = {{"value", d.limit_eps_then_t}, {"se", d.limit_eps_then_t_se}};
  if (d.gateaux) r.summary["gateaux"] = *d.gateaux;
  r.verdicts = d.verdicts;
}

// ---- gle_compare ------------------------------------------------------------------------

void run_gle_compare(const ExperimentConfig& c, const GleCompareParams& p, ExperimentResult& r) {
  const GleComparison g = compare_gle_forms(c.model, c.sim.dt, c.sim.horizon(), c.sim.n_paths, c.seed);
  Table t{"gle_gap", {"dt", "max_gap"}, {}, 0, 1};
  t.add_row({g.dt, g.gap_coarse});
  t.add_row({g.dt / 2.0, g.gap_fine});
  r.tables.push_back(std::move(t));
  const double ratio = g.ratio();
  r.verdicts.push_back({"gap_ratio_under_dt_halving", ratio, 0.5 * (p.ratio_lo + p.ratio_hi),
                        0.5 * (p.ratio_hi - p.ratio_lo), ratio >= p.ratio_lo && ratio <= p.ratio_hi});
}

}  // namespace

json ExperimentResult::report() const {
  json j{{"experiment", experiment_tag(kind)}, {"seed", seed}, {"model", model}, {"pass", pass()}};
  j["verdicts"] = json::array();
  for (const auto& v : verdicts) {
    json e = verdict_json(v);
    e["lhs"] = finite_or_null(v.lhs);
    e["rhs"] = finite_or_null(v.rhs);
    e["tolerance"] = finite_or_null(v.tolerance);
    j["verdicts"].push_back(e);
  }
  j["summary"] = summary;
  for (const auto& t : tables) j["tables"].push_back(t.name);
  return j;
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  ExperimentResult r;
  r.kind = c.kind;
  r.seed = c.seed;
  r.model = std::string(dynamics_tag(c.model.kind)) + " " + c.model.potential.describe();
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, SimulateParams>) run_simulate(c, p, r);
        else if constexpr (std::is_same_v<P, ResponseParams>) run_response(c, p, r);
        else if constexpr (std::is_same_v<P, GreenKuboParams>) run_greenkubo(c, p, r);
        else if constexpr (std::is_same_v<P, FpParams>) run_fpsolve(c, p, r);
        else if constexpr (std::is_same_v<P, RevcheckParams>) run_revcheck(c, p, r);
        else if constexpr (std::is_same_v<P, DoubleLimitParams>) run_double_limit(c, p, r);
        else run_gle_compare(c, p, r);
      },
      c.analysis);
  return r;
}

std::vector<std::string> emit_report(const ExperimentResult& r, const OutputSpec& out) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out.directory, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create '" + out.directory + "': " + ec.message());
  std::vector<std::string> written;
  for (const auto& t : r.tables) {
    const std::string stem = (fs::path(out.directory) / sanitize(t.name)).string();
    if (out.csv) {
      write_csv(t, stem + ".csv");
      written.push_back(stem + ".csv");
    }
    if (out.plot && t.plot_x >= 0) {
      write_plot_data(t, stem + ".dat");
      written.push_back(stem + ".dat");
    }
  }
  if (out.json) {
    const std::string path = (fs::path(out.directory) / "report.json").string();
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
    f << r.report().dump(2) << '\n';
    if (!f) fail(ErrorCode::IoFailure, "write to '" + path + "' failed");
    written.push_back(path);
  }
  return written;
}

}  // namespace lgv
