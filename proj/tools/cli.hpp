#pragma once

// Command-line front end. run_cli is kept in a header so the test suite can drive it in-process.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "disorderlab/disorderlab.hpp"

namespace disorderlab::cli {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kSchema = "disorderlab/1";

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kConfigError = 2, kIoError = 3 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  DisorderConfig disorder;
  std::uint64_t seed = 1;
  double coupling = 1.0;
};

namespace detail {

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config field '" + where + "': expected an object");
  for (const auto& item : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; }) ==
        allowed.end()) {
      throw ConfigError("config field '" + (where.empty() ? "" : where + ".") + item.key() + "': unknown key");
    }
  }
}

inline double get_number(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError("config field '" + where + "': expected a number");
  return v.get<double>();
}

inline std::vector<std::pair<double, double>> get_pairs(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError("config field '" + where + "': expected an array of [x, y] pairs");
  std::vector<std::pair<double, double>> out;
  for (const auto& p : v) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw ConfigError("config field '" + where + "': expected an array of [x, y] pairs");
    }
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Schema:
///   schema     "disorderlab/1" (required)
///   potential  {kind: delta | square | tabulated, samples: [[x, v], ...]}
///   ensemble   {density: uniform | truncated_gaussian | tabulated, support: [lo, hi],
///               mean, sigma, pdf: [[alpha, p], ...]}
///   layout     {mode: unit | explicit, positions: [...]}
///   seed, n_sites, replicas, coupling
inline RunConfig parse_config(const json& j) {
  detail::check_keys(j, {"schema", "potential", "ensemble", "layout", "seed", "n_sites", "replicas", "coupling"}, "");
  if (!j.contains("schema") || !j["schema"].is_string() || j["schema"].get<std::string>() != kSchema) {
    throw ConfigError(std::string("config field 'schema': must be \"") + kSchema + "\"");
  }
  RunConfig rc;
  try {
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) throw ConfigError("config field 'seed': expected a nonnegative integer");
      rc.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("n_sites")) {
      if (!j["n_sites"].is_number_unsigned() || j["n_sites"].get<std::uint64_t>() < 1) {
        throw ConfigError("config field 'n_sites': expected an integer >= 1");
      }
      rc.disorder.n_sites = j["n_sites"].get<std::size_t>();
    }
    if (j.contains("replicas")) {
      if (!j["replicas"].is_number_unsigned() || j["replicas"].get<std::uint64_t>() < 1) {
        throw ConfigError("config field 'replicas': expected an integer >= 1");
      }
      rc.disorder.replicas = j["replicas"].get<std::size_t>();
    }
    if (j.contains("coupling")) rc.coupling = detail::get_number(j, "coupling", "coupling");

    if (j.contains("potential")) {
      const json& p = j["potential"];
      detail::check_keys(p, {"kind", "samples"}, "potential");
      const std::string kind = p.value("kind", "");
      if (kind == "delta" || kind == "square") {
        if (p.contains("samples")) throw ConfigError("config field 'potential.samples': only for tabulated kind");
        rc.disorder.potential = kind == "delta" ? SingleSitePotential::delta() : SingleSitePotential::square();
      } else if (kind == "tabulated") {
        if (!p.contains("samples")) throw ConfigError("config field 'potential.samples': required for tabulated");
        std::vector<double> x, v;
        for (auto [a, b] : detail::get_pairs(p["samples"], "potential.samples")) {
          x.push_back(a);
          v.push_back(b);
        }
        try {
          rc.disorder.potential = SingleSitePotential::tabulated(x, v);
        } catch (const DomainError& e) {
          throw ConfigError(std::string("config field 'potential.samples': ") + e.what());
        }
      } else {
        throw ConfigError("config field 'potential.kind': expected delta, square or tabulated");
      }
    }

    std::uint64_t seed = rc.seed;
    rc.disorder.ensemble = CouplingEnsemble::uniform(0.0, 1.0, seed);
    if (j.contains("ensemble")) {
      const json& e = j["ensemble"];
      detail::check_keys(e, {"density", "support", "mean", "sigma", "pdf"}, "ensemble");
      const std::string density = e.value("density", "");
      auto support = [&]() -> std::pair<double, double> {
        if (!e.contains("support") || !e["support"].is_array() || e["support"].size() != 2 ||
            !e["support"][0].is_number() || !e["support"][1].is_number()) {
          throw ConfigError("config field 'ensemble.support': expected [lower, upper]");
        }
        return {e["support"][0].get<double>(), e["support"][1].get<double>()};
      };
      try {
        if (density == "uniform") {
          const auto [lo, hi] = support();
          rc.disorder.ensemble = CouplingEnsemble::uniform(lo, hi, seed);
        } else if (density == "truncated_gaussian") {
          const auto [lo, hi] = support();
          if (!e.contains("mean") || !e.contains("sigma")) {
            throw ConfigError("config field 'ensemble.mean'/'ensemble.sigma': required for truncated_gaussian");
          }
          rc.disorder.ensemble = CouplingEnsemble::truncated_gaussian(
              lo, hi, detail::get_number(e, "mean", "ensemble.mean"), detail::get_number(e, "sigma", "ensemble.sigma"),
              seed);
        } else if (density == "tabulated") {
          if (!e.contains("pdf")) throw ConfigError("config field 'ensemble.pdf': required for tabulated density");
          std::vector<double> a, p;
          for (auto [x, y] : detail::get_pairs(e["pdf"], "ensemble.pdf")) {
            a.push_back(x);
            p.push_back(y);
          }
          rc.disorder.ensemble = CouplingEnsemble::tabulated(a, p, seed);
        } else {
          throw ConfigError("config field 'ensemble.density': expected uniform, truncated_gaussian or tabulated");
        }
      } catch (const DomainError& err) {
        throw ConfigError(std::string("config field 'ensemble': ") + err.what());
      }
    }

    if (j.contains("layout")) {
      const json& l = j["layout"];
      detail::check_keys(l, {"mode", "positions"}, "layout");
      const std::string mode = l.value("mode", "");
      if (mode == "unit") {
        rc.disorder.layout = CellLayout::unit();
      } else if (mode == "explicit") {
        if (!l.contains("positions") || !l["positions"].is_array()) {
          throw ConfigError("config field 'layout.positions': expected an array of positions");
        }
        std::vector<double> y;
        for (const auto& v : l["positions"]) {
          if (!v.is_number()) throw ConfigError("config field 'layout.positions': expected numbers");
          y.push_back(v.get<double>());
        }
        try {
          rc.disorder.layout = CellLayout::explicit_positions(y);
        } catch (const DomainError& err) {
          throw ConfigError(std::string("config field 'layout.positions': ") + err.what());
        }
      } else {
        throw ConfigError("config field 'layout.mode': expected unit or explicit");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

// Fully resolved configuration, used for hashing and manifests.
inline json to_json(const RunConfig& rc) {
  json j;
  j["schema"] = kSchema;
  const auto& f = rc.disorder.potential;
  j["potential"]["kind"] = to_string(f.kind());
  if (f.kind() == PotentialKind::tabulated) {
    json s = json::array();
    for (std::size_t i = 0; i < f.sample_x().size(); ++i) s.push_back({f.sample_x()[i], f.sample_v()[i]});
    j["potential"]["samples"] = s;
  }
  const auto& e = rc.disorder.ensemble;
  switch (e.density()) {
    case DensityKind::uniform:
      j["ensemble"] = {{"density", "uniform"}, {"support", {e.lower(), e.upper()}}};
      break;
    case DensityKind::truncated_gaussian:
      j["ensemble"] = {{"density", "truncated_gaussian"},
                       {"support", {e.lower(), e.upper()}},
                       {"mean", e.mean_parameter()},
                       {"sigma", e.sigma_parameter()}};
      break;
    case DensityKind::tabulated: {
      json p = json::array();
      for (std::size_t i = 0; i < e.pdf_grid().size(); ++i) p.push_back({e.pdf_grid()[i], e.pdf_values()[i]});
      j["ensemble"] = {{"density", "tabulated"}, {"pdf", p}};
      break;
    }
  }
  if (rc.disorder.layout.is_unit()) {
    j["layout"] = {{"mode", "unit"}};
  } else {
    const auto pos = rc.disorder.layout.positions();
    j["layout"] = {{"mode", "explicit"}, {"positions", std::vector<double>(pos.begin(), pos.end())}};
  }
  j["seed"] = rc.seed;
  j["n_sites"] = rc.disorder.n_sites;
  j["replicas"] = rc.disorder.replicas;
  j["coupling"] = rc.coupling;
  return j;
}

struct Options {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t sites = 0;
  std::size_t replicas = 0;
  std::string grid;
  std::string out;
  double tol = 1e-8;
  double tol_F = 1e-6;
  std::string which = "gamma,dos,ssd,logT";
  bool plot = false;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  std::string alphas = "0.2:1.0:5";
  std::string table;
  std::string energies;
  std::size_t chains = 20;
  std::string command_line;
};

namespace detail {

inline RunConfig resolve(const Options& o) {
  RunConfig rc;
  if (!o.config_path.empty()) {
    rc = load_config(o.config_path);
  } else {
    rc.disorder.ensemble = rc.disorder.ensemble.with_seed(rc.seed);
  }
  if (o.seed_set) rc.seed = o.seed;
  rc.disorder.ensemble = rc.disorder.ensemble.with_seed(rc.seed);
  if (o.sites > 0) rc.disorder.n_sites = o.sites;
  if (o.replicas > 0) rc.disorder.replicas = o.replicas;
  if (!std::isnan(o.alpha)) rc.coupling = o.alpha;
  return rc;
}

inline std::vector<double> grid_option(const std::string& text, const char* name) {
  if (text.empty()) throw ConfigError(std::string("--") + name + " is required");
  try {
    return parse_grid(text);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("--") + name + ": " + e.what());
  }
}

// Writes to --out when given, otherwise to the supplied stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : path_(path), fallback_(fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw IoError("cannot open output file '" + path + "'");
    }
  }
  std::ostream& stream() { return path_.empty() ? fallback_ : file_; }
  void finish() {
    if (!path_.empty()) {
      file_.close();
      if (!file_) throw IoError("failed writing output file '" + path_ + "'");
    }
  }

 private:
  std::string path_;
  std::ostream& fallback_;
  std::ofstream file_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open output file '" + path + "'");
  f << text;
  if (!f) throw IoError("failed writing output file '" + path + "'");
}

inline void write_manifest(const Options& o, const json& resolved, const std::string& command, std::uint64_t seed) {
  if (o.out.empty()) return;
  json m;
  m["config_hash"] = sha256_hex(resolved.dump());
  m["seed"] = seed;
  m["tool_version"] = kToolVersion;
  m["timestamp"] = utc_timestamp();
  m["command"] = command;
  m["command_line"] = o.command_line;
  m["output"] = o.out;
  m["resolved_config"] = resolved;
  write_text(o.out + ".manifest.json", m.dump(2) + "\n");
}

inline std::string csv_row(std::initializer_list<std::string> cells) {
  std::string s;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) s += ',';
    s += c;
    first = false;
  }
  return s;
}

}  // namespace detail

inline int cmd_single_site(const Options& o, std::ostream& out) {
  const RunConfig rc = detail::resolve(o);
  const auto grid = detail::grid_option(o.grid, "grid");
  const auto& f = rc.disorder.potential;
  detail::Sink sink(o.out, out);
  auto& os = sink.stream();
  os << "E,ReT,ImT,ReR,ImR,absT,delta,theta,xi_single\n";
  for (double e : grid) {
    ScatteringData s;
    double xi;
    try {
      s = site_scattering(rc.coupling, f, e);
      xi = xi_single(rc.coupling, e, f);
    } catch (const DomainError& err) {
      throw ConfigError(std::string("--grid: ") + err.what());
    }
    os << detail::csv_row({format_double(e), format_double(s.T.real()), format_double(s.T.imag()),
                           format_double(s.R.real()), format_double(s.R.imag()), format_double(s.abs_T),
                           format_double(s.delta_phase), format_double(s.theta_phase), format_double(xi)})
       << '\n';
  }
  sink.finish();
  json resolved = to_json(rc);
  resolved["grid"] = grid;
  detail::write_manifest(o, resolved, "single-site", rc.seed);
  return kOk;
}

inline ScanSelection parse_which(const std::string& which) {
  ScanSelection sel{false, false, false, false};
  if (which.empty()) return sel;
  for (const auto& w : split(which, ',')) {
    if (w == "gamma") sel.gamma = true;
    else if (w == "dos") sel.dos = true;
    else if (w == "ssd") sel.ssd = true;
    else if (w == "logT") sel.log_t = true;
    else throw ConfigError("--which: unknown quantity '" + w + "' (expected gamma, dos, ssd, logT)");
  }
  return sel;
}

inline std::string plot_script(const std::string& csv, const ScanSelection& sel) {
  std::ostringstream g;
  g << "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'E'\n";
  std::vector<std::string> plots;
  auto add = [&](int col, int err, const char* title) {
    std::ostringstream p;
    p << "'" << csv << "' using 1:" << col << ":" << err << " with yerrorlines title '" << title << "'";
    plots.push_back(p.str());
  };
  if (sel.gamma) add(2, 3, "gamma");
  if (sel.dos) add(4, 5, "N");
  if (sel.ssd) add(6, 7, "xi");
  if (sel.log_t) plots.push_back("'" + csv + "' using 1:8 with lines title 'Re log T'");
  if (!plots.empty()) {
    g << "plot ";
    for (std::size_t i = 0; i < plots.size(); ++i) g << (i ? ", \\\n     " : "") << plots[i];
    g << "\n";
  }
  return g.str();
}

inline int cmd_scan(const Options& o, std::ostream& out) {
  const RunConfig rc = detail::resolve(o);
  const ScanSelection sel = parse_which(o.which);
  const auto grid = detail::grid_option(o.grid, "grid");
  std::vector<ScanRow> rows;
  try {
    rows = scan(rc.disorder, grid, sel);
  } catch (const DomainError& err) {
    throw ConfigError(err.what());
  }
  detail::Sink sink(o.out, out);
  auto& os = sink.stream();
  os << "E,gamma,gamma_err,N,N_err,xi,xi_err,logT_re,logT_im,flags\n";
  if (!sel.empty()) {
    for (const auto& r : rows) {
      const auto& e = r.estimates;
      auto cell = [&](bool on, double v) { return (on && r.ok) ? format_double(v) : std::string(); };
      std::string flags;
      for (const auto& fl : r.flags) flags += (flags.empty() ? "" : "|") + fl;
      os << detail::csv_row({format_double(e.energy), cell(sel.gamma, e.gamma.value), cell(sel.gamma, e.gamma.std_error),
                             cell(sel.dos, e.dos.value), cell(sel.dos, e.dos.std_error), cell(sel.ssd, e.ssd.value),
                             cell(sel.ssd, e.ssd.std_error), cell(sel.log_t, e.log_t.value.real()),
                             cell(sel.log_t, e.log_t.value.imag()), flags})
         << '\n';
    }
  }
  sink.finish();
  json resolved = to_json(rc);
  resolved["grid"] = grid;
  resolved["which"] = o.which;
  detail::write_manifest(o, resolved, "scan", rc.seed);
  if (o.plot && !o.out.empty()) detail::write_text(o.out + ".gp", plot_script(o.out, sel));
  return kOk;
}

inline int cmd_bands(const Options& o, std::ostream& out) {
  const RunConfig rc = detail::resolve(o);
  const auto grid = detail::grid_option(o.grid, "grid");
  std::vector<BandInfo> bands;
  try {
    bands = periodic_reference_grid(rc.coupling, grid, rc.disorder.potential);
  } catch (const DomainError& err) {
    throw ConfigError(err.what());
  }
  detail::Sink sink(o.out, out);
  auto& os = sink.stream();
  os << "E,Delta,in_gap,lambda_plus_re,lambda_plus_im,lambda_minus_re,lambda_minus_im,gamma_periodic,N_periodic,"
        "xi_periodic\n";
  for (const auto& b : bands) {
    os << detail::csv_row({format_double(b.energy), format_double(b.discriminant), b.in_gap ? "1" : "0",
                           format_double(b.lambda_plus.real()), format_double(b.lambda_plus.imag()),
                           format_double(b.lambda_minus.real()), format_double(b.lambda_minus.imag()),
                           format_double(b.gamma_periodic), format_double(b.N_periodic),
                           format_double(free_dos(b.energy) - b.N_periodic)})
       << '\n';
  }
  sink.finish();
  json resolved = to_json(rc);
  resolved["grid"] = grid;
  detail::write_manifest(o, resolved, "bands", rc.seed);
  if (o.plot && !o.out.empty()) {
    detail::write_text(o.out + ".gp", "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'E'\n"
                                      "plot '" + o.out + "' using 1:2 with lines, '" + o.out +
                                          "' using 1:10 with lines, 2 notitle, -2 notitle\n");
  }
  return kOk;
}

inline int cmd_special_energies(const Options& o, std::ostream& out) {
  const RunConfig rc = detail::resolve(o);
  const auto grid = detail::grid_option(o.grid, "grid");
  const auto alphas = detail::grid_option(o.alphas, "alphas");
  SpecialEnergyReport rep;
  try {
    rep = special_energy_scan(rc.disorder.potential, alphas, grid, o.tol, o.tol_F);
  } catch (const DomainError& err) {
    throw ConfigError(err.what());
  }
  json j;
  j["potential"] = to_string(rc.disorder.potential.kind());
  j["alphas"] = alphas;
  j["tol"] = o.tol;
  j["tol_F"] = o.tol_F;
  j["candidates_S"] = rep.candidates_S;
  j["candidates_S_pm"] = rep.candidates_S_pm;
  j["candidates_S_tilde"] = rep.candidates_S_tilde;
  json rows = json::array();
  for (std::size_t i = 0; i < rep.energies.size(); ++i) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    rows.push_back({{"E", rep.energies[i]},
                    {"max_abs_R", num(rep.max_abs_R[i])},
                    {"F_plus_spread", num(rep.F_plus_spread[i])},
                    {"F_minus_spread", num(rep.F_minus_spread[i])},
                    {"max_alignment", num(rep.max_alignment[i])},
                    {"fourier_re", num(rep.fourier_test[i].real())},
                    {"fourier_im", num(rep.fourier_test[i].imag())}});
  }
  j["energies"] = rows;
  detail::Sink sink(o.out, out);
  sink.stream() << j.dump(2) << '\n';
  sink.finish();
  json resolved = to_json(rc);
  resolved["grid"] = grid;
  resolved["alphas"] = alphas;
  resolved["tol"] = o.tol;
  resolved["tol_F"] = o.tol_F;
  detail::write_manifest(o, resolved, "special-energies", rc.seed);
  return kOk;
}

inline int cmd_thouless_check(const Options& o, std::ostream& out) {
  if (o.table.empty()) throw ConfigError("--table is required");
  std::ifstream in(o.table);
  if (!in) throw IoError("cannot open table '" + o.table + "'");
  const CsvTable csv = read_csv(in);
  const auto energies = detail::grid_option(o.energies, "energies");
  std::vector<double> e_col, xi_col, g_col;
  try {
    e_col = csv.numeric_column("E");
    xi_col = csv.numeric_column("xi");
    if (csv.column("gamma") >= 0) g_col = csv.numeric_column("gamma");
  } catch (const DomainError& err) {
    throw ConfigError(std::string("--table: ") + err.what());
  }
  std::vector<double> grid, xi, gam_e, gam;
  for (std::size_t i = 0; i < e_col.size(); ++i) {
    if (std::isnan(e_col[i]) || std::isnan(xi_col[i])) continue;
    grid.push_back(e_col[i]);
    xi.push_back(xi_col[i]);
    if (!g_col.empty() && !std::isnan(g_col[i])) {
      gam_e.push_back(e_col[i]);
      gam.push_back(g_col[i]);
    }
  }
  // ξ vanishes at the bottom of the free spectrum
  if (!grid.empty() && grid.front() > 0.0) {
    grid.insert(grid.begin(), 0.0);
    xi.insert(xi.begin(), 0.0);
  }
  SsdTable table;
  try {
    table = SsdTable(grid, xi);
  } catch (const DomainError& err) {
    throw ConfigError(std::string("--table: ") + err.what());
  }
  auto interp = [&](double e) -> double {
    if (gam_e.empty() || e < gam_e.front() || e > gam_e.back()) return std::nan("");
    const auto it = std::lower_bound(gam_e.begin(), gam_e.end(), e);
    const std::size_t i = static_cast<std::size_t>(it - gam_e.begin());
    if (gam_e[i] == e || i == 0) return gam[i];
    const double t = (e - gam_e[i - 1]) / (gam_e[i] - gam_e[i - 1]);
    return gam[i - 1] + t * (gam[i] - gam[i - 1]);
  };
  json rows = json::array();
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  for (double e : energies) {
    json r;
    r["E"] = e;
    try {
      if (e > 0.0) {
        const double rhs = thouless_rhs(table, e);
        const double lhs = interp(e);
        r["gamma_lhs"] = num(lhs);
        r["rhs"] = rhs;
        r["residual"] = num(lhs - free_gamma(e) - rhs);
      } else {
        const double g = negative_energy_gamma(table, e);
        r["gamma_lhs"] = nullptr;
        r["rhs"] = g - free_gamma(e);
        r["gamma_continued"] = g;
        r["residual"] = nullptr;
      }
    } catch (const DomainError& err) {
      r["error"] = err.what();
    }
    rows.push_back(r);
  }
  detail::Sink sink(o.out, out);
  sink.stream() << rows.dump(2) << '\n';
  sink.finish();
  json resolved;
  resolved["table"] = o.table;
  resolved["energies"] = energies;
  detail::write_manifest(o, resolved, "thouless-check", 0);
  return kOk;
}

/// Random short square/tabulated chains: ordered product of site matrices vs one propagation.
inline json aktosun_suite(std::uint64_t seed, std::size_t chains, double tol) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const SingleSitePotential tent = SingleSitePotential::tabulated({-0.5, 0.0, 0.5}, {0.0, 1.0, 0.0});
  double worst = 0.0;
  for (std::size_t c = 0; c < chains; ++c) {
    const SingleSitePotential f = (c % 2 == 0) ? SingleSitePotential::square() : tent;
    const std::size_t n = 1 + static_cast<std::size_t>(u01(rng) * 10.0) % 10;
    const double energy = 0.5 + 29.5 * u01(rng);
    std::vector<ChainCell> cells;
    double y = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      cells.push_back({3.0 * u01(rng), y});
      y += 1.0 + 0.5 * u01(rng);
    }
    const Mat2 direct = chain_transfer_direct(f, cells, energy, default_step(energy)).entries;
    const Mat2 prod = chain_transfer_product(f, cells, energy).entries;
    worst = std::max(worst, (direct - prod).cwiseAbs().maxCoeff());
  }
  return {{"chains", chains}, {"seed", seed}, {"max_residual", worst}, {"tol", tol}, {"pass", worst < tol}};
}

inline int cmd_aktosun_verify(const Options& o, std::ostream& out) {
  const double tol = o.tol;
  const std::uint64_t seed = o.seed_set ? o.seed : 1;
  const json j = aktosun_suite(seed, o.chains, tol);
  detail::Sink sink(o.out, out);
  sink.stream() << j.dump(2) << '\n';
  sink.finish();
  return j["pass"].get<bool>() ? kOk : kCheckFailed;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  for (int i = 0; i < argc; ++i) o.command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Transfer-matrix estimators for one-dimensional random Schroedinger operators"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON configuration file");
    sub->add_option("--seed", o.seed, "master seed (overrides config)")->each([&](const std::string&) {
      o.seed_set = true;
    });
    sub->add_option("--sites", o.sites, "sites per chain");
    sub->add_option("--replicas", o.replicas, "independent replicas");
    sub->add_option("--out", o.out, "output path (stdout when omitted)");
  };

  auto* single = app.add_subcommand("single-site", "scattering data of one site over an energy grid");
  common(single);
  single->add_option("--grid", o.grid, "start:stop:count or comma list");
  single->add_option("--alpha", o.alpha, "coupling (defaults to config 'coupling')");

  auto* scan_cmd = app.add_subcommand("scan", "disorder-averaged densities over an energy grid");
  common(scan_cmd);
  scan_cmd->add_option("--grid", o.grid, "start:stop:count or comma list");
  scan_cmd->add_option("--which", o.which, "comma list of gamma, dos, ssd, logT");
  scan_cmd->add_flag("--plot", o.plot, "also write a gnuplot script next to --out");

  auto* bands = app.add_subcommand("bands", "periodic reference: discriminant, bands, rotation number");
  common(bands);
  bands->add_option("--grid", o.grid, "start:stop:count or comma list");
  bands->add_option("--alpha", o.alpha, "coupling (defaults to config 'coupling')");
  bands->add_flag("--plot", o.plot, "also write a gnuplot script next to --out");

  auto* special = app.add_subcommand("special-energies", "scan for zero-Lyapunov special energies");
  common(special);
  special->add_option("--grid", o.grid, "energy grid");
  special->add_option("--alphas", o.alphas, "coupling grid");
  special->add_option("--tol", o.tol, "threshold for |R| and alignment");
  special->add_option("--tol-F", o.tol_F, "threshold for F constancy");

  auto* thouless = app.add_subcommand("thouless-check", "compare gamma with the log-potential of xi");
  thouless->add_option("--table", o.table, "CSV with E, xi (and gamma) columns, e.g. from scan");
  thouless->add_option("--energies", o.energies, "evaluation energies");
  thouless->add_option("--out", o.out, "output path (stdout when omitted)");

  auto* aktosun = app.add_subcommand("aktosun-verify", "factorization check on random short chains");
  aktosun->add_option("--seed", o.seed, "seed")->each([&](const std::string&) { o.seed_set = true; });
  aktosun->add_option("--tol", o.tol, "max allowed residual")->default_val(1e-7);
  aktosun->add_option("--chains", o.chains, "number of random chains");
  aktosun->add_option("--out", o.out, "output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (single->parsed()) return cmd_single_site(o, out);
    if (scan_cmd->parsed()) return cmd_scan(o, out);
    if (bands->parsed()) return cmd_bands(o, out);
    if (special->parsed()) return cmd_special_energies(o, out);
    if (thouless->parsed()) return cmd_thouless_check(o, out);
    if (aktosun->parsed()) return cmd_aktosun_verify(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace disorderlab::cli
