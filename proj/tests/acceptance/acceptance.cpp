// Acceptance suite: one [PASS]/[FAIL] line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "lgv/experiment.hpp"
#include "lgv/parallel.hpp"
#include "lgv/revcheck.hpp"
#include "lgv/sde.hpp"
#include "lgv/stats.hpp"

namespace fs = std::filesystem;
using namespace lgv;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void criterion(int id, const char* title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++g_failures;
  std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig config(const std::string& name) { return load_config(std::string(LGV_CONFIG_DIR) + "/" + name); }

// Failing verdict names, or "all N verdicts pass".
Outcome verdict_outcome(const ExperimentResult& r) {
  Outcome o{r.pass(), ""};
  int failed = 0;
  for (const auto& v : r.verdicts)
    if (!v.pass) o.detail += (failed++ ? "; " : "failed ") + v.name;
  if (failed == 0) o.detail = "all " + std::to_string(r.verdicts.size()) + " verdicts pass";
  if (r.verdicts.empty()) o = {false, "no verdicts"};
  return o;
}

// Worst |value − oracle(t)| / max(3·SE, floor) over a (t, value, se, ...) table.
double worst_ratio(const Table& t, const std::function<double(double)>& oracle, double floor) {
  double worst = 0.0;
  for (const auto& row : t.rows) worst = std::max(worst, std::abs(row[1] - oracle(row[0])) / std::max(3 * row[2], floor));
  return worst;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Log-log slope of the stationary variance bias of state component `comp` against dt from long
// time averages, plus the worst disagreement with the exact discrete bias in SE units.
struct BiasScan {
  std::vector<double> dts, bias, se, exact;
  double slope = 0.0, exact_slope = 0.0, worst_z = 0.0;
};

BiasScan bias_scan(const Model& m, int comp, const std::vector<double>& dts, double horizon, long paths,
                   double record_every, const std::function<double(double)>& exact_bias) {
  BiasScan s;
  std::vector<double> ldt, lb, lex;
  for (double dt : dts) {
    SimConfig c;
    c.dt = dt;
    c.n_steps = std::lround(horizon / dt);
    c.burn_in_steps = std::lround(10.0 / dt);
    c.record_stride = std::lround(record_every / dt);
    c.n_paths = paths;
    c.seed = 2024;
    const Ensemble e = simulate(m, c, InitSpec::gibbs());
    std::vector<double> per_path(paths, 0.0);
    for (long p = 0; p < paths; ++p) {
      for (long r = 1; r < e.n_records; ++r) per_path[p] += e.state(p, r)[comp] * e.state(p, r)[comp];
      per_path[p] /= double(e.n_records - 1);
    }
    const MeanSE v = batch_means(per_path);
    const double b = v.mean - 1.0, ex = exact_bias(dt);
    s.dts.push_back(dt);
    s.bias.push_back(b);
    s.se.push_back(v.se);
    s.exact.push_back(ex);
    s.worst_z = std::max(s.worst_z, std::abs(b - ex) / v.se);
    ldt.push_back(std::log(dt));
    lb.push_back(std::log(std::abs(b)));
    lex.push_back(std::log(std::abs(ex)));
  }
  s.slope = linear_fit(ldt, lb).slope;
  s.exact_slope = linear_fit(ldt, lex).slope;
  return s;
}

// Exact stationary covariance of BAOAB on V = q²/2 with unit friction and β = 1, by fixed-point
// iteration of S = M S Mᵀ + N Nᵀ for the one-step linear map x' = M x + N ξ. The q-variance is
// exactly 1 for every h; the p-variance carries the O(h²) bias.
Eigen::Matrix2d baoab_exact_cov(double h) {
  const double c = std::exp(-h), s = std::sqrt(1 - c * c);
  Eigen::Matrix2d kick, drift, ou;
  kick << 1, 0, -h / 2, 1;
  drift << 1, h / 2, 0, 1;
  ou << 1, 0, 0, c;
  const Eigen::Matrix2d mm = kick * drift * ou * drift * kick;
  const Eigen::Vector2d nn = kick * drift * Eigen::Vector2d(0, s);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
  for (int i = 0; i < 100000; ++i) {
    const Eigen::Matrix2d next = mm * cov * mm.transpose() + nn * nn.transpose();
    if ((next - cov).norm() < 1e-15) break;
    cov = next;
  }
  return cov;
}

// Run, emit CSVs to dir at the given thread count; returns the CSV files by name.
std::vector<std::pair<std::string, std::string>> csv_bytes(const std::string& name, int threads, const fs::path& dir) {
  set_thread_count(threads);
  ExperimentConfig c = config(name);
  OutputSpec out = c.output;
  out.directory = dir.string();
  fs::remove_all(dir);
  emit_report(run_experiment(c), out);
  set_thread_count(0);
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& f : fs::directory_iterator(dir))
    if (f.path().extension() == ".csv") files.emplace_back(f.path().filename().string(), slurp(f.path()));
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

int main() {
  const fs::path scratch = fs::temp_directory_path() / "lgvlab_acceptance";

  criterion(1, "Green-Kubo identity on OU", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentResult r = run_experiment(config("gk_ou.json"));
    Outcome o = verdict_outcome(r);
    const double secs = seconds_since(t0);
    const Verdict& v = r.verdicts.front();
    // Both sides equal −1 in closed form for OU with g = q, W = q.
    const bool exact = std::abs(v.lhs + 1) <= v.tolerance && std::abs(v.rhs + 1) <= 1e-6;
    o.pass = o.pass && exact && secs < 120;
    o.detail += fmt(", integral %.5f, quadrature %.6f, oracle -1, tol %.4f, %.0f s < 120 s", v.lhs, v.rhs, v.tolerance,
                    secs);
    return o;
  });

  criterion(2, "OU response and predictor vs 1-exp(-t)", [] {
    const ExperimentConfig c = config("response_ou.json");
    const ExperimentResult r = run_experiment(c);
    Outcome o = verdict_outcome(r);
    const double dt = c.sim.dt;
    // Under CRN the response of the linear model is the Euler mean recursion 1 − (1 − dt)^n exactly.
    const auto discrete = [dt](double t) { return 1 - std::pow(1 - dt, std::round(t / dt)); };
    const auto exact = [](double t) { return 1 - std::exp(-t); };
    double worst_pred = 0.0, worst_resp = 0.0, gap = 0.0;
    std::size_t points = 0;
    for (const auto& t : r.tables) {
      if (t.name == "predictor") {
        worst_pred = worst_ratio(t, exact, 1e-12);
        points = t.rows.size() - 1;
      } else if (t.name.rfind("response_", 0) == 0) {
        worst_resp = std::max(worst_resp, worst_ratio(t, discrete, 1e-9));
        for (const auto& row : t.rows) gap = std::max(gap, std::abs(discrete(row[0]) - exact(row[0])));
      }
    }
    o.pass = o.pass && worst_pred <= 1.0 && worst_resp <= 1.0 && points >= 20;
    o.detail += fmt(", predictor worst |diff| / 3 SE = %.3f over %.0f time points", worst_pred, double(points)) +
                fmt(", response vs Euler recursion worst %.1e (tol 1e-9), Euler-vs-exact gap %.1e", worst_resp * 1e-9, gap);
    return o;
  });

  criterion(3, "double-limit commutation on the double well", [] {
    return verdict_outcome(run_experiment(config("double_limit_dw.json")));
  });

  criterion(4, "diffusion coefficient recovery", [] {
    const ExperimentResult r = run_experiment(config("diffusion_2d.json"));
    Outcome o = verdict_outcome(r);
    for (const auto& v : r.verdicts) o.detail += ", " + v.name + fmt("=%.4f", v.lhs);
    return o;
  });

  criterion(5, "Scharfetter-Gummel stationary state", [] {
    const ExperimentResult r = run_experiment(config("fp_stationary.json"));
    Outcome o = verdict_outcome(r);
    for (const auto& v : r.verdicts) o.detail += ", " + v.name + fmt(" %.3g", v.lhs);
    return o;
  });

  criterion(6, "exponential L1 decay, uniform in epsilon", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentResult r = run_experiment(config("fp_decay.json"));
    Outcome o = verdict_outcome(r);
    const double secs = seconds_since(t0);
    o.pass = o.pass && secs < 60;
    o.detail += fmt(", %.1f s < 60 s", secs);
    return o;
  });

  criterion(7, "hypocoercive kinetic decay", [] {
    const ExperimentResult r = run_experiment(config("kinetic_decay.json"));
    Outcome o = verdict_outcome(r);
    for (const auto& v : r.verdicts) o.detail += ", " + v.name + fmt(" %.4g", v.lhs);
    return o;
  });

  criterion(8, "reversibility equivalence battery", [] {
    const ExperimentResult r = run_experiment(config("revcheck_battery.json"));
    Outcome o = verdict_outcome(r);
    int consistent = 0;
    for (const auto& v : r.verdicts) consistent += v.pass;
    o.detail = std::to_string(consistent) + "/" + std::to_string(r.verdicts.size()) + " models consistent";
    // Momentum-flip correlation symmetry for the reversible underdamped models at plain 3 SE.
    const std::size_t n_lags = RevcheckOptions{}.lags.size();
    double worst = 0.0;
    int compared = 0;
    for (const auto& entry : r.summary.at("battery")) {
      if (entry.at("dynamics") != "underdamped" || entry.at("model") == "rotational") continue;
      std::vector<const nlohmann::json*> corr;
      for (const auto& d : entry.at("details"))
        if (d.at("name").get<std::string>().rfind("correlation_symmetry[", 0) == 0) corr.push_back(&d);
      const double z = bonferroni_z(int(corr.size() * n_lags));
      for (const auto* d : corr) {
        const double se = d->at("tolerance").get<double>() / z;
        worst = std::max(worst, std::abs(d->at("lhs").get<double>() - d->at("rhs").get<double>()) / (3 * se));
        ++compared;
      }
    }
    o.pass = o.pass && compared > 0 && worst <= 1.0;
    o.detail += fmt(", momentum-flip symmetry worst |diff| / 3 SE = %.3f over %.0f pairs", worst, compared);
    return o;
  });

  criterion(9, "GLE augmented vs convolution under dt halving", [] {
    const ExperimentResult r = run_experiment(config("gle_compare.json"));
    Outcome o = verdict_outcome(r);
    o.detail += fmt(", ratio %.3f", r.verdicts.front().lhs);
    return o;
  });

  criterion(10, "GLE response vs predictor and linear-system oracle", [] {
    const ExperimentConfig c = config("gle_response.json");
    const ExperimentResult r = run_experiment(c);
    Outcome o = verdict_outcome(r);
    // Mean of the tilted linear GLE: m' = B m + e_p from m(0) = 0, state (q, p, z).
    Eigen::Matrix3d b;
    b << 0, 1, 0, -1, 0, 1, 0, -1, -c.model.alpha;
    const Eigen::Vector3d ep(0, 1, 0);
    const auto exact = [&](double t) {
      return (b.inverse() * ((b * t).exp() - Eigen::Matrix3d::Identity()) * ep)(0);
    };
    // Under CRN the response equals the Euler mean recursion m ← m + dt (B m + e_p).
    const double dt = c.sim.dt;
    const auto discrete = [&](double t) {
      Eigen::Vector3d m = Eigen::Vector3d::Zero();
      for (long n = std::lround(t / dt); n > 0; --n) m += dt * (b * m + ep);
      return m(0);
    };
    double worst_pred = 0.0, worst_resp = 0.0, gap = 0.0;
    for (const auto& t : r.tables) {
      if (t.name == "predictor") {
        worst_pred = worst_ratio(t, exact, 1e-12);
      } else if (t.name.rfind("response_", 0) == 0) {
        worst_resp = std::max(worst_resp, worst_ratio(t, discrete, 1e-9));
        for (const auto& row : t.rows) gap = std::max(gap, std::abs(discrete(row[0]) - exact(row[0])));
      }
    }
    o.pass = o.pass && worst_pred <= 1.0 && worst_resp <= 1.0;
    o.detail += fmt(", predictor vs matrix-exponential oracle worst |diff| / 3 SE = %.3f", worst_pred) +
                fmt(", response vs Euler recursion worst %.1e (tol 1e-9), Euler-vs-exact gap %.1e", worst_resp * 1e-9, gap);
    return o;
  });

  criterion(11, "integrator weak order on OU", [] {
    Model od;
    od.potential = Potential::quadratic(1, 1.0);
    const BiasScan em = bias_scan(od, 0, {0.4, 0.2, 0.1, 0.05}, 500.0, 4000, 0.4,
                                  [](double h) { return (h / 2) / (1 - h / 2); });
    Model ud = od;
    ud.kind = DynamicsKind::underdamped;
    const BiasScan ba = bias_scan(ud, 1, {0.8, 0.4, 0.2}, 1000.0, 4000, 0.8,
                                  [](double h) { return baoab_exact_cov(h)(1, 1) - 1.0; });
    const double q_exact = std::abs(baoab_exact_cov(0.8)(0, 0) - 1.0);
    const bool pass = std::abs(em.slope - 1) <= 0.4 && std::abs(ba.slope - 2) <= 0.5 && em.worst_z < 4 &&
                      ba.worst_z < 4 && q_exact < 1e-12;
    return Outcome{pass, fmt("Euler-Maruyama q-variance slope %.3f (exact %.3f), BAOAB p-variance slope %.3f (exact %.3f)",
                             em.slope, em.exact_slope, ba.slope, ba.exact_slope) +
                             fmt(", worst MC-vs-exact bias %.2f SE, BAOAB q-variance exact to %.1e", std::max(em.worst_z, ba.worst_z), q_exact)};
  });

  criterion(12, "byte-identical CSVs across repeated runs and thread counts", [&] {
    Outcome o{true, ""};
    int files = 0;
    for (const char* name : {"gle_compare.json", "fp_stationary.json", "simulate_double_well.json", "response_ou.json"}) {
      const auto a = csv_bytes(name, 1, scratch / "a");
      const auto b = csv_bytes(name, 4, scratch / "b");
      const auto c = csv_bytes(name, 0, scratch / "c");
      const bool same = !a.empty() && a == b && a == c;
      if (!same) o.detail += std::string(o.detail.empty() ? "differs: " : ", ") + name;
      o.pass = o.pass && same;
      files += int(a.size());
    }
    if (o.pass) o.detail = std::to_string(files) + " CSV files identical at 1, 4 and default threads";
    return o;
  });

  fs::remove_all(scratch);
  std::printf("%d of 12 criteria failed\n", g_failures);
  return g_failures ? 1 : 0;
}
