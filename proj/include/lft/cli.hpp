#pragma once

// Experiment orchestration: config ingestion (INI-style sections), physics
// validation, deterministic CSV/JSON artifact writing, and a bounded worker
// pool for the independent (eta, seed, l) cells of each experiment.

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "verify.hpp"

namespace lft::cli {

// ------------------------------------------------------------------------
// Config document: [section] key = value lines, '#'/';' comments.
// ------------------------------------------------------------------------

using Document = std::map<std::string, std::map<std::string, std::string>>;

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline Document parse_ini(std::istream& in) {
  Document doc;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t cut = line.find_first_of("#;");
    if (cut != std::string::npos) line = line.substr(0, cut);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("line " + std::to_string(lineno) +
                                    ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw std::invalid_argument("line " + std::to_string(lineno) +
                                    ": empty section name");
      doc[section];
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos || section.empty())
      throw std::invalid_argument("line " + std::to_string(lineno) +
                                  ": expected key = value inside a section");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key");
    doc[section][key] = val;
  }
  return doc;
}

inline Document parse_ini_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  return parse_ini(in);
}

// typed lookups with defaults
inline std::string get_str(const Document& d, const std::string& sec,
                           const std::string& key, const std::string& dflt) {
  auto s = d.find(sec);
  if (s == d.end()) return dflt;
  auto k = s->second.find(key);
  return k == s->second.end() ? dflt : k->second;
}

inline double get_num(const Document& d, const std::string& sec,
                      const std::string& key, double dflt) {
  std::string v = get_str(d, sec, key, "");
  if (v.empty()) return dflt;
  size_t pos = 0;
  double out = std::stod(v, &pos);
  if (pos != v.size())
    throw std::invalid_argument(sec + "." + key + ": not a number: " + v);
  return out;
}

// comma/space separated list, or "start:step:end" arithmetic grid
inline std::vector<double> get_list(const Document& d, const std::string& sec,
                                    const std::string& key,
                                    std::vector<double> dflt = {}) {
  std::string v = get_str(d, sec, key, "");
  if (v.empty()) return dflt;
  std::vector<double> out;
  if (std::count(v.begin(), v.end(), ':') == 2) {
    double a, step, b;
    char c1, c2;
    std::istringstream is(v);
    if (!(is >> a >> c1 >> step >> c2 >> b) || c1 != ':' || c2 != ':' ||
        step <= 0)
      throw std::invalid_argument(sec + "." + key + ": bad grid spec: " + v);
    for (int i = 0;; ++i) {
      double t = a + i * step;
      if (t > b + 1e-12 * std::max(1.0, std::abs(b))) break;
      out.push_back(t);
    }
    return out;
  }
  for (char& c : v)
    if (c == ',') c = ' ';
  std::istringstream is(v);
  double x;
  while (is >> x) out.push_back(x);
  if (!is.eof()) throw std::invalid_argument(sec + "." + key + ": bad list: " + v);
  return out;
}

// ------------------------------------------------------------------------
// Parsed configuration and validation.
// ------------------------------------------------------------------------

struct Config {
  // lattice
  int d = 1, L = 2;
  // disorder
  uint64_t seed = 1;
  DisorderMode mode = DisorderMode::iid_uniform;
  double vartheta = 0, lambda = 0;
  // interaction
  std::string interaction = "none";  // none | yukawa
  double int_strength = 0, int_mass = 1;
  // pulse
  Pulse pulse;
  // experiment
  std::string experiment;
  double beta = 1;
  std::vector<double> etas, ls, times, seeds, betas;
  double t_start = 0, t_eval = 1, T = 1;
  int shell = 1, n_grid = 20, n_rec = 200, n_samples = 3;
  // decay function for the verify experiments
  std::string decay = "polynomial";  // polynomial | exponential
  double decay_eps = 1, decay_rate = 1, decay_power = 2;
  // numerics
  Scheme scheme = Scheme::magnus2;
  double dt = 1e-3;
  int conv_grid = 800;
};

inline const std::vector<std::string>& known_experiments() {
  static const std::vector<std::string> v{
      "thermo-ledger",      "ohm-scan",       "joule-scan",
      "measure-reconstruct", "lr-check",      "equicontinuity",
      "quasifree-crosscheck"};
  return v;
}

// Builds the Config; throws on malformed values.  Physics diagnostics are
// collected by validate() below.
inline Config build_config(const Document& doc) {
  static const std::map<std::string, std::vector<std::string>> known = {
      {"lattice", {"d", "L"}},
      {"disorder", {"seed", "mode", "vartheta", "lambda"}},
      {"interaction", {"type", "strength", "mass"}},
      {"pulse",
       {"t0", "t1", "amplitude", "direction", "support_radius", "profile",
        "mode", "coupling_sign", "envelope_sigma"}},
      {"experiment",
       {"name", "beta", "etas", "l", "times", "seeds", "betas", "t_start",
        "t_eval", "T", "shell", "n_grid", "n_rec", "n_samples", "decay",
        "decay_eps", "decay_rate", "decay_power"}},
      {"numerics", {"scheme", "dt", "conv_grid"}}};
  for (const auto& [sec, keys] : doc) {
    auto it = known.find(sec);
    if (it == known.end()) throw std::invalid_argument("unknown section: " + sec);
    for (const auto& [k, v] : keys)
      if (std::find(it->second.begin(), it->second.end(), k) == it->second.end())
        throw std::invalid_argument("unknown key: " + sec + "." + k);
  }

  Config c;
  c.d = static_cast<int>(get_num(doc, "lattice", "d", 1));
  c.L = static_cast<int>(get_num(doc, "lattice", "L", 2));
  c.seed = static_cast<uint64_t>(get_num(doc, "disorder", "seed", 1));
  std::string mode = get_str(doc, "disorder", "mode", "iid_uniform");
  if (mode == "iid_uniform")
    c.mode = DisorderMode::iid_uniform;
  else if (mode == "deterministic_zero")
    c.mode = DisorderMode::deterministic_zero;
  else
    throw std::invalid_argument("disorder.mode: unknown mode: " + mode);
  c.vartheta = get_num(doc, "disorder", "vartheta", 0.0);
  c.lambda = get_num(doc, "disorder", "lambda", 0.0);

  c.interaction = get_str(doc, "interaction", "type", "none");
  if (c.interaction != "none" && c.interaction != "yukawa")
    throw std::invalid_argument("interaction.type: unknown type: " + c.interaction);
  c.int_strength = get_num(doc, "interaction", "strength", 0.0);
  c.int_mass = get_num(doc, "interaction", "mass", 1.0);

  c.pulse.t0 = get_num(doc, "pulse", "t0", 0.0);
  c.pulse.t1 = get_num(doc, "pulse", "t1", 1.0);
  c.pulse.amplitude = get_num(doc, "pulse", "amplitude", 1.0);
  c.pulse.support_radius = get_num(doc, "pulse", "support_radius", 1.0);
  c.pulse.coupling_sign = get_num(doc, "pulse", "coupling_sign", 1.0);
  c.pulse.envelope_sigma = get_num(doc, "pulse", "envelope_sigma", 0.0);
  std::string prof = get_str(doc, "pulse", "profile", "smooth_bump");
  if (prof == "smooth_bump")
    c.pulse.profile = PulseProfile::smooth_bump;
  else if (prof == "poly_bump")
    c.pulse.profile = PulseProfile::poly_bump;
  else
    throw std::invalid_argument("pulse.profile: unknown profile: " + prof);
  std::string pm = get_str(doc, "pulse", "mode", "homogeneous");
  if (pm == "homogeneous")
    c.pulse.mode = PulseMode::homogeneous;
  else if (pm == "sampled")
    c.pulse.mode = PulseMode::sampled;
  else
    throw std::invalid_argument("pulse.mode: unknown mode: " + pm);
  std::vector<double> dir = get_list(doc, "pulse", "direction");
  if (dir.empty()) dir.assign(std::max(c.d, 1), 0.0), dir[0] = 1.0;
  c.pulse.direction = Eigen::Map<VectorXd>(dir.data(), dir.size());

  c.experiment = get_str(doc, "experiment", "name", "");
  c.beta = get_num(doc, "experiment", "beta", 1.0);
  c.etas = get_list(doc, "experiment", "etas");
  c.ls = get_list(doc, "experiment", "l", {1});
  c.times = get_list(doc, "experiment", "times");
  c.seeds = get_list(doc, "experiment", "seeds", {1, 2, 3});
  c.betas = get_list(doc, "experiment", "betas", {0.5, 1, 5});
  c.t_start = get_num(doc, "experiment", "t_start", 0.0);
  c.t_eval = get_num(doc, "experiment", "t_eval", 1.0);
  c.T = get_num(doc, "experiment", "T", 1.0);
  c.shell = static_cast<int>(get_num(doc, "experiment", "shell", 1));
  c.n_grid = static_cast<int>(get_num(doc, "experiment", "n_grid", 20));
  c.n_rec = static_cast<int>(get_num(doc, "experiment", "n_rec", 200));
  c.n_samples = static_cast<int>(get_num(doc, "experiment", "n_samples", 3));
  c.decay = get_str(doc, "experiment", "decay", "polynomial");
  c.decay_eps = get_num(doc, "experiment", "decay_eps", 1.0);
  c.decay_rate = get_num(doc, "experiment", "decay_rate", 1.0);
  c.decay_power = get_num(doc, "experiment", "decay_power", 2.0);

  std::string sch = get_str(doc, "numerics", "scheme", "magnus2");
  if (sch == "magnus2")
    c.scheme = Scheme::magnus2;
  else if (sch == "rk4")
    c.scheme = Scheme::rk4;
  else
    throw std::invalid_argument("numerics.scheme: unknown scheme: " + sch);
  c.dt = get_num(doc, "numerics", "dt", 1e-3);
  c.conv_grid = static_cast<int>(get_num(doc, "numerics", "conv_grid", 800));
  return c;
}

// Physics/schema diagnostics without running anything.
inline std::vector<std::string> validate(const Config& c) {
  std::vector<std::string> out;
  if (c.d < 1) out.push_back("lattice.d must be >= 1");
  if (c.L < 0) out.push_back("lattice.L must be >= 0");
  double sites = std::pow(2.0 * c.L + 1.0, c.d);
  if (sites > kMaxFockSites)
    out.push_back("box capacity exceeded: " + std::to_string((long)sites) +
                  " sites > " + std::to_string(kMaxFockSites));
  if (!(c.beta > 0))
    out.push_back("experiment.beta must be positive: the Gibbs state is only "
                  "defined for beta > 0 (beta = 0 is excluded)");
  if (c.vartheta < 0 || c.vartheta >= 1)
    out.push_back("disorder.vartheta must lie in [0, 1)");
  if (std::abs(c.lambda) > 1) out.push_back("disorder.lambda must lie in [-1, 1]");
  if (!(c.pulse.t1 > c.pulse.t0)) out.push_back("pulse: need t1 > t0");
  if (c.pulse.direction.size() != c.d)
    out.push_back("pulse.direction must have lattice.d components");
  else if (std::abs(c.pulse.direction.norm() - 1.0) > 1e-12)
    out.push_back("pulse.direction must be a unit vector");
  if (!(c.pulse.support_radius > 0))
    out.push_back("pulse.support_radius must be positive");
  else if (c.pulse.support_radius > c.L)
    out.push_back("pulse support exceeds the box: support_radius > L");
  if (std::find(known_experiments().begin(), known_experiments().end(),
                c.experiment) == known_experiments().end())
    out.push_back("experiment.name must be one of: thermo-ledger, ohm-scan, "
                  "joule-scan, measure-reconstruct, lr-check, equicontinuity, "
                  "quasifree-crosscheck (got '" + c.experiment + "')");
  for (double e : c.etas)
    if (!(e > 0)) out.push_back("experiment.etas must be positive");
  for (size_t i = 1; i < c.etas.size(); ++i)
    if (c.etas[i] >= c.etas[i - 1]) {
      out.push_back("experiment.etas must be strictly decreasing");
      break;
    }
  for (double l : c.ls) {
    if (l != std::floor(l) || l < 1) {
      out.push_back("experiment.l entries must be integers >= 1");
      break;
    }
    if (static_cast<int>(l) > c.L) {
      out.push_back("experiment.l exceeds the box radius");
      break;
    }
    if (static_cast<int>(l) - c.shell < 0) {
      out.push_back("experiment.shell leaves no averaging sites");
      break;
    }
  }
  if (!(c.dt > 0)) out.push_back("numerics.dt must be positive");
  if (c.conv_grid < 2) out.push_back("numerics.conv_grid must be >= 2");
  if (c.decay != "polynomial" && c.decay != "exponential")
    out.push_back("experiment.decay must be polynomial or exponential");
  if (!(c.decay_eps > 0)) out.push_back("experiment.decay_eps must be positive");
  return out;
}

inline ModelParams model_from_config(const Config& c, uint64_t seed) {
  ModelParams mp;
  mp.box = enumerate_box(c.d, c.L);
  mp.disorder = sample_disorder(seed, mp.box, c.mode);
  mp.vartheta = c.vartheta;
  mp.lambda = c.lambda;
  mp.beta = c.beta;
  if (c.interaction == "yukawa")
    mp.interaction =
        density_density(mp.box, yukawa_profile(c.int_strength, c.int_mass));
  return mp;
}

inline DecayFn decay_from_config(const Config& c) {
  if (c.decay == "exponential")
    return exponential_decay(c.decay_rate, c.decay_power);
  return polynomial_decay(c.d, c.decay_eps);
}

// ------------------------------------------------------------------------
// Deterministic CSV writing: shortest binary64 round-trip via to_chars.
// ------------------------------------------------------------------------

inline std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

struct Csv {
  std::ostringstream body;
  explicit Csv(const std::vector<std::string>& header) {
    for (size_t i = 0; i < header.size(); ++i)
      body << (i ? "," : "") << header[i];
    body << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) body << (i ? "," : "") << cells[i];
    body << "\n";
  }
  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    out << body.str();
  }
};

// ------------------------------------------------------------------------
// Bounded worker pool; results land in caller-indexed slots, so aggregation
// order never depends on completion order.
// ------------------------------------------------------------------------

template <class F>
inline void parallel_for(int n, int workers, F&& f) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
      } catch (...) {
        errs[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

inline int default_workers() {
  if (const char* env = std::getenv("LFT_WORKERS")) {
    int w = std::atoi(env);
    if (w >= 1) return w;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

// ------------------------------------------------------------------------
// Experiments.  Each returns pass/fail and appends to the JSON report;
// artifacts land in `out`.
// ------------------------------------------------------------------------

struct RunContext {
  Config cfg;
  std::filesystem::path out;
  int workers = 1;
  nlohmann::json report;
};

inline bool run_thermo_ledger(RunContext& rc) {
  const Config& c = rc.cfg;
  ModelParams mp = model_from_config(c, c.seed);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  double eta = c.etas.empty() ? 1.0 : c.etas[0];
  Pulse p = scale_strength(c.pulse, eta);
  std::vector<double> grid = c.times;
  if (grid.empty())
    for (int i = 1; i <= 10; ++i) grid.push_back(c.t_start + 0.2 * i);
  auto rows =
      energy_ledger(fb, mp, p, g, c.t_start, grid, {c.scheme, c.dt});
  Csv csv({"t", "Q", "S", "P", "Work", "Ip", "Id"});
  bool pass = true;
  for (const auto& r : rows) {
    csv.row({fmt(r.t), fmt(r.Q), fmt(r.S), fmt(r.P), fmt(r.Work), fmt(r.Ip),
             fmt(r.Id)});
    if (r.Q < -1e-12) pass = false;
    if (first_law_defect(r) > 1e-7 * std::max(1.0, std::abs(r.S))) pass = false;
    if (balance_defect(r) > 1e-6 * std::max(1.0, std::abs(r.Work))) pass = false;
  }
  csv.write(rc.out / "ledger.csv");
  rc.report["thermo_ledger"] = {{"rows", rows.size()}, {"pass", pass}};
  return pass;
}

inline bool run_ohm_scan(RunContext& rc) {
  const Config& c = rc.cfg;
  ModelParams mp = model_from_config(c, c.seed);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  std::vector<double> etas = c.etas;
  if (etas.empty()) etas = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  std::vector<double> times = c.times;
  if (times.empty()) times = {0.6, 1.2};

  Csv cur({"l", "eta", "t", "dir", "Jp_meas", "Jp_lin", "Jd_meas", "Jd_lin",
           "resid_p", "resid_d"});
  Csv fits({"l", "slope_p", "slope_d", "pass"});
  bool pass = true;
  for (double lv : c.ls) {
    int l = static_cast<int>(lv);
    TransportSetup ts = transport_setup(mp.box, l, c.shell);
    LinearResponse lin = linear_response_currents(fb, mp, g, ts, c.pulse,
                                                  c.t_start, times, c.conv_grid);
    std::vector<CurrentTrace> traces(etas.size());
    parallel_for(static_cast<int>(etas.size()), rc.workers, [&](int i) {
      Pulse p = scale_strength(c.pulse, etas[i]);
      traces[i] = current_densities(fb, mp, p, g, ts, c.t_start, times,
                                    {c.scheme, c.dt});
    });
    std::vector<double> max_p, max_d;
    for (size_t i = 0; i < etas.size(); ++i) {
      double mpv = 0, mdv = 0;
      for (size_t j = 0; j < times.size(); ++j) {
        VectorXd rp = traces[i].J_p[j] - etas[i] * lin.J_p[j];
        VectorXd rd = traces[i].J_d[j] - etas[i] * lin.J_d[j];
        for (int k = 0; k < mp.box.d; ++k)
          cur.row({fmt(l), fmt(etas[i]), fmt(times[j]), fmt(k),
                   fmt(traces[i].J_p[j][k]), fmt(etas[i] * lin.J_p[j][k]),
                   fmt(traces[i].J_d[j][k]), fmt(etas[i] * lin.J_d[j][k]),
                   fmt(std::abs(rp[k])), fmt(std::abs(rd[k]))});
        mpv = std::max(mpv, rp.cwiseAbs().maxCoeff());
        mdv = std::max(mdv, rd.cwiseAbs().maxCoeff());
      }
      max_p.push_back(mpv);
      max_d.push_back(mdv);
    }
    LogLogFit fp = fit_loglog(etas, max_p), fd = fit_loglog(etas, max_d);
    bool ok = (fp.degenerate || fp.slope >= 1.9) &&
              (fd.degenerate || fd.slope >= 1.9);
    pass = pass && ok;
    fits.row({fmt(l), fmt(fp.slope), fmt(fd.slope), ok ? "1" : "0"});
    rc.report["ohm"]["l" + std::to_string(l)] = {
        {"slope_p", fp.slope}, {"slope_d", fd.slope}, {"pass", ok}};
  }
  cur.write(rc.out / "ohm_currents.csv");
  fits.write(rc.out / "ohm_fits.csv");
  return pass;
}

inline bool run_joule_scan(RunContext& rc) {
  const Config& c = rc.cfg;
  ModelParams mp = model_from_config(c, c.seed);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  std::vector<double> etas = c.etas;
  if (etas.empty()) etas = {4e-1, 2e-1, 1e-1};
  JoulePredictor jp = joule_predictor(fb, mp, c.pulse, g, c.t_start, c.t_eval,
                                      c.conv_grid);
  std::vector<JouleItems> meas(etas.size());
  parallel_for(static_cast<int>(etas.size()), rc.workers, [&](int i) {
    Pulse p = scale_strength(c.pulse, etas[i]);
    auto rows = energy_ledger(fb, mp, p, g, c.t_start, {c.t_eval},
                              {c.scheme, c.dt});
    meas[i] = {rows[0].Ip, rows[0].Id, rows[0].S, rows[0].P};
  });
  Csv csv({"eta", "item", "measured", "predicted", "residual"});
  std::vector<double> rp, rd, rq, rP;
  for (size_t i = 0; i < etas.size(); ++i) {
    JouleItems pred = jp.predict(etas[i], meas[i]);
    rp.push_back(std::abs(meas[i].Ip - pred.Ip));
    rd.push_back(std::abs(meas[i].Id - pred.Id));
    rq.push_back(std::abs(meas[i].S - pred.S));
    rP.push_back(std::abs(meas[i].P - pred.P));
    csv.row({fmt(etas[i]), "p", fmt(meas[i].Ip), fmt(pred.Ip), fmt(rp.back())});
    csv.row({fmt(etas[i]), "d", fmt(meas[i].Id), fmt(pred.Id), fmt(rd.back())});
    csv.row({fmt(etas[i]), "Q", fmt(meas[i].S), fmt(pred.S), fmt(rq.back())});
    csv.row({fmt(etas[i]), "P", fmt(meas[i].P), fmt(pred.P), fmt(rP.back())});
  }
  csv.write(rc.out / "joule.csv");
  Csv fits({"item", "slope", "degenerate", "pass"});
  bool pass = true;
  auto judge = [&](const char* item, const std::vector<double>& r) {
    LogLogFit f = fit_loglog(etas, r);
    bool ok = f.degenerate || f.slope >= 2.9;
    pass = pass && ok;
    fits.row({item, fmt(f.slope), f.degenerate ? "1" : "0", ok ? "1" : "0"});
    rc.report["joule"][item] = {{"slope", f.slope},
                                {"degenerate", f.degenerate},
                                {"pass", ok}};
  };
  judge("p", rp);
  judge("d", rd);
  judge("Q", rq);
  judge("P", rP);
  fits.write(rc.out / "joule_fits.csv");
  return pass;
}

inline bool run_measure_reconstruct(RunContext& rc) {
  const Config& c = rc.cfg;
  ModelParams mp = model_from_config(c, c.seed);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  int l = static_cast<int>(c.ls[0]);
  TransportSetup ts = transport_setup(mp.box, l, c.shell);
  ConductivityMeasure cm = conductivity_measure(fb, mp, g, ts);
  XiKernels X = xi_p_kernels(fb, mp, g, ts);
  int d = mp.box.d;

  Csv atoms([&] {
    std::vector<std::string> h{"nu"};
    for (int k = 0; k < d; ++k)
      for (int q = 0; q < d; ++q)
        h.push_back("M_" + std::to_string(k + 1) + std::to_string(q + 1));
    return h;
  }());
  bool psd = true;
  for (const auto& a : cm.atoms) {
    std::vector<std::string> row{fmt(a.nu)};
    for (int k = 0; k < d; ++k)
      for (int q = 0; q < d; ++q) row.push_back(fmt(a.M(k, q)));
    atoms.row(row);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symm_part(a.M));
    if (es.eigenvalues().minCoeff() < -1e-12) psd = false;
  }
  atoms.write(rc.out / "atoms.csv");

  Csv rec({"t", "defect"});
  double maxdef = 0;
  for (int i = 1; i <= c.n_rec; ++i) {
    double t = c.T * i / c.n_rec;
    double def = (symm_part(X.eval(t)) - cm.xi_plus(t)).cwiseAbs().maxCoeff();
    maxdef = std::max(maxdef, def);
    rec.row({fmt(t), fmt(def)});
  }
  rec.write(rc.out / "reconstruction.csv");

  // corollary properties
  double xi0 = X.eval(0.0).cwiseAbs().maxCoeff();
  double even = 0, psd_xi = 0;
  for (int i = 1; i <= 20; ++i) {
    double t = c.T * i / 20;
    even = std::max(even, (symm_part(X.eval(t)) - symm_part(X.eval(-t)))
                              .cwiseAbs()
                              .maxCoeff());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(-cm.xi_plus(t));
    psd_xi = std::min(psd_xi, es.eigenvalues().minCoeff());
  }
  double cesaro_def =
      (cm.cesaro(1e12) + cm.total_weight()).cwiseAbs().maxCoeff();
  bool pass = maxdef <= 1e-8 && psd && xi0 <= 1e-10 && even <= 1e-10 &&
              psd_xi >= -1e-12 && cesaro_def <= 1e-10;
  rc.report["measure"] = {{"atoms", cm.atoms.size()},
                          {"max_defect", maxdef},
                          {"atoms_psd", psd},
                          {"xi0", xi0},
                          {"evenness", even},
                          {"xi_plus_psd_min", psd_xi},
                          {"cesaro_defect", cesaro_def},
                          {"pass", pass}};
  return pass;
}

inline bool run_lr_check(RunContext& rc) {
  const Config& c = rc.cfg;
  ModelParams mp = model_from_config(c, c.seed);
  FockBasis fb(mp.box);
  DecayFn F = decay_from_config(c);
  DecayConstants dc = decay_constants(F, mp.box);
  double J = interaction_norm_bound(mp.box, c.vartheta, mp.interaction, F,
                                    c.seed, c.n_samples);
  std::vector<double> times = c.times;
  if (times.empty())
    for (int i = 0; i <= 8; ++i) times.push_back(0.25 * i);

  // observable combinations: number operators at increasing separation plus
  // hopping-type even observables
  struct Combo {
    Operator B1, B2;
    std::vector<int> s1, s2;
    std::string label;
  };
  std::vector<Combo> combos;
  int n = mp.box.n_sites();
  for (int sep = 1; combos.size() < 6 && sep < n; ++sep) {
    if (n - 1 - sep <= 0) break;
    combos.push_back({number_op(fb, 0), number_op(fb, sep),
                      {0}, {sep},
                      "n0-n" + std::to_string(sep)});
  }
  for (int sep = 2; combos.size() < 10 && sep < n - 1; ++sep) {
    MatrixXcd m = MatrixXcd::Zero(fb.dim, fb.dim);
    add_hopping(m, fb, 0, 1, Complex(0.5, 0.25));
    add_hopping(m, fb, 1, 0, Complex(0.5, -0.25));
    combos.push_back({Operator{std::move(m), fb.hash}, number_op(fb, 1 + sep),
                      {0, 1}, {1 + sep},
                      "hop01-n" + std::to_string(1 + sep)});
  }

  Csv csv({"combo", "t", "measured", "bound", "margin"});
  std::vector<LrVerdict> verdicts(combos.size());
  parallel_for(static_cast<int>(combos.size()), rc.workers, [&](int i) {
    verdicts[i] = lr_bound_check(fb, mp, combos[i].B1, combos[i].s1,
                                 combos[i].B2, combos[i].s2, F, dc.convolution,
                                 J, times);
  });
  bool pass = true;
  for (size_t i = 0; i < combos.size(); ++i) {
    for (size_t j = 0; j < verdicts[i].times.size(); ++j)
      csv.row({combos[i].label, fmt(verdicts[i].times[j]),
               fmt(verdicts[i].measured[j]), fmt(verdicts[i].bound[j]),
               fmt(verdicts[i].margin[j])});
    pass = pass && verdicts[i].pass;
  }
  csv.write(rc.out / "lr.csv");
  rc.report["lr"] = {{"combos", combos.size()}, {"pass", pass}};
  return pass;
}

inline bool run_equicontinuity(RunContext& rc) {
  const Config& c = rc.cfg;
  ModelParams mp = model_from_config(c, c.seed);
  FockBasis fb(mp.box);
  GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
  TransportSetup ts = transport_setup(mp.box, static_cast<int>(c.ls[0]), c.shell);
  DecayFn F = decay_from_config(c);
  DecayConstants dc = decay_constants(F, mp.box);
  double J = interaction_norm_bound(mp.box, c.vartheta, mp.interaction, F,
                                    c.seed, c.n_samples);
  EquicontinuityVerdict v =
      equicontinuity_check(fb, mp, g, ts, dc, J, c.T, c.n_grid);
  Csv csv({"t1", "t2", "measured", "bound", "margin"});
  for (size_t i = 0; i < v.measured.size(); ++i)
    csv.row({fmt(v.t1[i]), fmt(v.t2[i]), fmt(v.measured[i]), fmt(v.bound[i]),
             fmt(v.margin[i])});
  csv.write(rc.out / "equicontinuity.csv");
  rc.report["equicontinuity"] = {{"lipschitz_constant", v.lipschitz_constant},
                                 {"pairs", v.measured.size()},
                                 {"pass", v.pass}};
  return v.pass;
}

inline bool run_quasifree_crosscheck(RunContext& rc) {
  const Config& c = rc.cfg;
  struct Cell {
    uint64_t seed;
    double beta;
  };
  std::vector<Cell> cells;
  for (double s : c.seeds)
    for (double b : c.betas) cells.push_back({static_cast<uint64_t>(s), b});
  std::vector<double> defects(cells.size());
  parallel_for(static_cast<int>(cells.size()), rc.workers, [&](int i) {
    Config cc = c;
    cc.interaction = "none";
    ModelParams mp = model_from_config(cc, cells[i].seed);
    mp.beta = cells[i].beta;
    FockBasis fb(mp.box);
    GibbsState g = gibbs(internal_energy(fb, mp), mp.beta);
    QuasiFreeState qs = quasifree_twopoint(mp.one_particle(), mp.beta);
    double def = 0;
    for (int x = 0; x < mp.box.n_sites(); ++x)
      for (int y = 0; y < mp.box.n_sites(); ++y) {
        Complex ed =
            (g.rho * (creation(fb, x) * annihilation(fb, y)).mat).trace();
        def = std::max(def, std::abs(ed - qs.G(x, y)));
      }
    defects[i] = def;
  });
  Csv csv({"seed", "beta", "defect"});
  bool pass = true;
  for (size_t i = 0; i < cells.size(); ++i) {
    csv.row({fmt(static_cast<double>(cells[i].seed)), fmt(cells[i].beta),
             fmt(defects[i])});
    if (defects[i] > 1e-9) pass = false;
  }
  csv.write(rc.out / "quasifree.csv");
  rc.report["quasifree"] = {{"cells", cells.size()}, {"pass", pass}};
  return pass;
}

// ------------------------------------------------------------------------
// Orchestration: manifest, dispatch, exit codes.
// ------------------------------------------------------------------------

inline uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// exit codes: 0 all PASS, 2 usage/config error, 3 numeric failure or FAIL
inline int run_command(const std::string& config_path, const std::string& out_dir,
                       int workers, std::optional<uint64_t> seed_override,
                       std::ostream& log) {
  std::string raw;
  {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      log << "error: cannot open config: " << config_path << "\n";
      return 2;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    raw = ss.str();
  }
  Config cfg;
  try {
    cfg = build_config(parse_ini_file(config_path));
  } catch (const std::exception& e) {
    log << "error: malformed config: " << e.what() << "\n";
    return 2;
  }
  if (seed_override) cfg.seed = *seed_override;
  auto violations = validate(cfg);
  if (!violations.empty()) {
    for (const auto& v : violations) log << "error: " << v << "\n";
    return 2;
  }

  RunContext rc;
  rc.cfg = cfg;
  rc.out = out_dir;
  rc.workers = workers;
  std::error_code ec;
  std::filesystem::create_directories(rc.out, ec);
  if (ec) {
    log << "error: cannot create output dir: " << out_dir << "\n";
    return 2;
  }

  auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  try {
    if (cfg.experiment == "thermo-ledger")
      pass = run_thermo_ledger(rc);
    else if (cfg.experiment == "ohm-scan")
      pass = run_ohm_scan(rc);
    else if (cfg.experiment == "joule-scan")
      pass = run_joule_scan(rc);
    else if (cfg.experiment == "measure-reconstruct")
      pass = run_measure_reconstruct(rc);
    else if (cfg.experiment == "lr-check")
      pass = run_lr_check(rc);
    else if (cfg.experiment == "equicontinuity")
      pass = run_equicontinuity(rc);
    else if (cfg.experiment == "quasifree-crosscheck")
      pass = run_quasifree_crosscheck(rc);
  } catch (const std::exception& e) {
    log << "error: numeric failure: " << e.what() << "\n";
    return 3;
  }
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  nlohmann::json manifest;
  manifest["config_hash"] = hex64(fnv1a64(raw));
  manifest["seed"] = cfg.seed;
  manifest["experiment"] = cfg.experiment;
  manifest["versions"] = {
      {"artifact", "1.0.0"},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
#if defined(__GNUC__)
      {"compiler", "gcc " + std::to_string(__GNUC__) + "." +
                       std::to_string(__GNUC_MINOR__)},
#else
      {"compiler", "unknown"},
#endif
  };
  manifest["wall_time_s"] = wall;
  manifest["pass"] = pass;
  {
    std::ofstream m(rc.out / "manifest.json");
    m << manifest.dump(2) << "\n";
  }
  rc.report["pass"] = pass;
  {
    std::ofstream r(rc.out / "report.json");
    r << rc.report.dump(2) << "\n";
  }
  log << (pass ? "PASS" : "FAIL") << " " << cfg.experiment << " (" << fmt(wall)
      << " s)\n";
  return pass ? 0 : 3;
}

inline int validate_command(const std::string& config_path, std::ostream& log) {
  Config cfg;
  try {
    cfg = build_config(parse_ini_file(config_path));
  } catch (const std::exception& e) {
    log << "malformed config: " << e.what() << "\n";
    return 0;
  }
  for (const auto& v : validate(cfg)) log << v << "\n";
  return 0;
}

}  // namespace lft::cli
