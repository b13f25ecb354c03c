#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "decoyrate/channel.hpp"
#include "decoyrate/finite_key.hpp"

namespace decoyrate {

// Bad keys, bad values, malformed lines, inconsistent selections.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable or unwritable files.
struct FileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// Domain-type validation throws std::invalid_argument; anything surfaced
// through the config layer must come out as ConfigError.
template <class F>
void validate_as_config_error(F&& check) {
  try {
    check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace detail

inline const char* to_string(Method m) {
  switch (m) {
    case Method::OneDecoy: return "one-decoy";
    case Method::VacuumWeak: return "vacuum-weak";
    case Method::Improved: return "improved";
    case Method::InfiniteDecoy: return "infinite-decoy";
  }
  return "unknown";
}

inline Method parse_method(const std::string& token) {
  if (token == "one-decoy") return Method::OneDecoy;
  if (token == "vacuum-weak") return Method::VacuumWeak;
  if (token == "improved") return Method::Improved;
  if (token == "infinite-decoy") return Method::InfiniteDecoy;
  throw ConfigError("unknown method token: '" + token + "'");
}

// Flat key=value run description; '#' starts a comment anywhere on a line.
struct RunConfig {
  SourceParams source{};
  double vw_p_mu = 0.75, vw_p_nu = 0.125, vw_p_vac = 0.125;
  ChannelParams channel{};
  double f = 1.06;
  double epsilon = 1e-10;
  std::vector<double> n_values{1e11};
  std::vector<Method> methods{Method::OneDecoy, Method::VacuumWeak, Method::Improved,
                              Method::InfiniteDecoy};
  bool asymptotic = false;
  double scan_start_km = 0.0, scan_stop_km = 250.0, scan_step_km = 5.0;
  double distance_km = 50.0;
  long long trials = 100000;
  std::uint64_t seed = 1;
  FiniteKeyOptions options{};
  bool complement_transmittance = false;
  std::string out;     // output path; empty means stdout
  std::string counts;  // counts CSV path for rate-from-counts

  SourceParams vw_source() const {
    SourceParams s = source;
    s.p_mu = vw_p_mu;
    s.p_nu = vw_p_nu;
    s.p_vac = vw_p_vac;
    return s;
  }

  RateContext context() const {
    RateContext ctx;
    ctx.source = source;
    ctx.vw_source = vw_source();
    ctx.channel = channel;
    ctx.f = f;
    ctx.epsilon = epsilon;
    ctx.options = options;
    ctx.complement_transmittance = complement_transmittance;
    return ctx;
  }

  void validate() const {
    detail::validate_as_config_error([&] { source.validate(); });
    detail::validate_as_config_error([&] { channel.validate(); });
    if (!(f >= 1.0)) throw ConfigError("f must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
    if (n_values.empty()) throw ConfigError("N list must not be empty");
    for (double n : n_values)
      if (!(n > 0.0)) throw ConfigError("N values must be positive");
    if (methods.empty()) throw ConfigError("method list must not be empty");
    if (!(scan_step_km > 0.0)) throw ConfigError("scan_step_km must be positive");
    if (!(scan_stop_km >= scan_start_km) || !(scan_start_km >= 0.0))
      throw ConfigError("scan window must satisfy 0 <= start <= stop");
    if (!(distance_km >= 0.0)) throw ConfigError("distance_km must be nonnegative");
    if (trials <= 0) throw ConfigError("trials must be positive");
    if (!(options.delta_scale >= 0.0)) throw ConfigError("delta_scale must be nonnegative");
    for (Method m : methods)
      if (m == Method::VacuumWeak && !asymptotic) {
        SourceParams vw = vw_source();
        detail::validate_as_config_error([&] { vw.validate(); });
        if (!(vw.p_vac > 0.0))
          throw ConfigError("finite vacuum-weak runs need vw_p_vac > 0");
      }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse number '" + v + "'");
  }
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': cannot parse boolean '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string format_g(double x, int digits = 12) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
  return buf;
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");

    if (key == "mu") cfg.source.mu = detail::parse_double(val, key);
    else if (key == "nu") cfg.source.nu = detail::parse_double(val, key);
    else if (key == "p_mu") cfg.source.p_mu = detail::parse_double(val, key);
    else if (key == "p_nu") cfg.source.p_nu = detail::parse_double(val, key);
    else if (key == "p_vac") cfg.source.p_vac = detail::parse_double(val, key);
    else if (key == "vw_p_mu") cfg.vw_p_mu = detail::parse_double(val, key);
    else if (key == "vw_p_nu") cfg.vw_p_nu = detail::parse_double(val, key);
    else if (key == "vw_p_vac") cfg.vw_p_vac = detail::parse_double(val, key);
    else if (key == "eta_det") cfg.channel.eta_det = detail::parse_double(val, key);
    else if (key == "alpha_db_per_km") cfg.channel.alpha_db_per_km = detail::parse_double(val, key);
    else if (key == "e_d") cfg.channel.e_d = detail::parse_double(val, key);
    else if (key == "y0") cfg.channel.y0 = detail::parse_double(val, key);
    else if (key == "f") cfg.f = detail::parse_double(val, key);
    else if (key == "epsilon") cfg.epsilon = detail::parse_double(val, key);
    else if (key == "N") {
      cfg.n_values.clear();
      for (const auto& tok : detail::split_list(val))
        cfg.n_values.push_back(detail::parse_double(tok, key));
    } else if (key == "methods") {
      cfg.methods.clear();
      for (const auto& tok : detail::split_list(val)) cfg.methods.push_back(parse_method(tok));
    } else if (key == "asymptotic") cfg.asymptotic = detail::parse_bool(val, key);
    else if (key == "scan_start_km") cfg.scan_start_km = detail::parse_double(val, key);
    else if (key == "scan_stop_km") cfg.scan_stop_km = detail::parse_double(val, key);
    else if (key == "scan_step_km") cfg.scan_step_km = detail::parse_double(val, key);
    else if (key == "distance_km") cfg.distance_km = detail::parse_double(val, key);
    else if (key == "trials") cfg.trials = static_cast<long long>(detail::parse_double(val, key));
    else if (key == "seed") {
      try {
        cfg.seed = std::stoull(val);
      } catch (const std::exception&) {
        throw ConfigError("key 'seed': cannot parse integer '" + val + "'");
      }
    } else if (key == "wide_error_coefficient")
      cfg.options.wide_error_coefficient = detail::parse_bool(val, key);
    else if (key == "reproduction_delta_n")
      cfg.options.reproduction_delta_n = detail::parse_bool(val, key);
    else if (key == "best_decomposition")
      cfg.options.best_decomposition = detail::parse_bool(val, key);
    else if (key == "delta_scale") cfg.options.delta_scale = detail::parse_double(val, key);
    else if (key == "improved_delta_threshold")
      cfg.options.improved_policy.analytical_threshold = detail::parse_double(val, key);
    else if (key == "baseline_delta_threshold")
      cfg.options.baseline_policy.analytical_threshold = detail::parse_double(val, key);
    else if (key == "complement_transmittance")
      cfg.complement_transmittance = detail::parse_bool(val, key);
    else if (key == "out") cfg.out = val;
    else if (key == "counts") cfg.counts = val;
    else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config file: " + path);
  return parse_config(in);
}

inline std::string serialize_config(const RunConfig& cfg) {
  using detail::format_g;
  std::ostringstream out;
  out << "mu = " << format_g(cfg.source.mu, 17) << "\n";
  out << "nu = " << format_g(cfg.source.nu, 17) << "\n";
  out << "p_mu = " << format_g(cfg.source.p_mu, 17) << "\n";
  out << "p_nu = " << format_g(cfg.source.p_nu, 17) << "\n";
  out << "p_vac = " << format_g(cfg.source.p_vac, 17) << "\n";
  out << "vw_p_mu = " << format_g(cfg.vw_p_mu, 17) << "\n";
  out << "vw_p_nu = " << format_g(cfg.vw_p_nu, 17) << "\n";
  out << "vw_p_vac = " << format_g(cfg.vw_p_vac, 17) << "\n";
  out << "eta_det = " << format_g(cfg.channel.eta_det, 17) << "\n";
  out << "alpha_db_per_km = " << format_g(cfg.channel.alpha_db_per_km, 17) << "\n";
  out << "e_d = " << format_g(cfg.channel.e_d, 17) << "\n";
  out << "y0 = " << format_g(cfg.channel.y0, 17) << "\n";
  out << "f = " << format_g(cfg.f, 17) << "\n";
  out << "epsilon = " << format_g(cfg.epsilon, 17) << "\n";
  out << "N = ";
  for (std::size_t i = 0; i < cfg.n_values.size(); ++i)
    out << (i ? "," : "") << format_g(cfg.n_values[i], 17);
  out << "\n";
  out << "methods = ";
  for (std::size_t i = 0; i < cfg.methods.size(); ++i)
    out << (i ? "," : "") << to_string(cfg.methods[i]);
  out << "\n";
  out << "asymptotic = " << (cfg.asymptotic ? "true" : "false") << "\n";
  out << "scan_start_km = " << format_g(cfg.scan_start_km, 17) << "\n";
  out << "scan_stop_km = " << format_g(cfg.scan_stop_km, 17) << "\n";
  out << "scan_step_km = " << format_g(cfg.scan_step_km, 17) << "\n";
  out << "distance_km = " << format_g(cfg.distance_km, 17) << "\n";
  out << "trials = " << cfg.trials << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "wide_error_coefficient = " << (cfg.options.wide_error_coefficient ? "true" : "false")
      << "\n";
  out << "reproduction_delta_n = " << (cfg.options.reproduction_delta_n ? "true" : "false")
      << "\n";
  out << "best_decomposition = " << (cfg.options.best_decomposition ? "true" : "false") << "\n";
  out << "delta_scale = " << format_g(cfg.options.delta_scale, 17) << "\n";
  out << "improved_delta_threshold = "
      << format_g(cfg.options.improved_policy.analytical_threshold, 17) << "\n";
  out << "baseline_delta_threshold = "
      << format_g(cfg.options.baseline_policy.analytical_threshold, 17) << "\n";
  out << "complement_transmittance = " << (cfg.complement_transmittance ? "true" : "false")
      << "\n";
  if (!cfg.out.empty()) out << "out = " << cfg.out << "\n";
  if (!cfg.counts.empty()) out << "counts = " << cfg.counts << "\n";
  return out.str();
}

// Counts CSV: header then exactly one data row. Required columns
//   N,N_mu,N_nu,n_mu,n_nu,m_mu,m_nu,c_mu,c_nu
// with optional trailing N_vac,n_vac for vacuum-decoy tallies. The c columns
// are redundant (c = n - m) and are checked for consistency.
inline FiniteCounts parse_counts_csv(std::istream& in) {
  std::string header, row;
  if (!std::getline(in, header)) throw ConfigError("counts file: missing header");
  if (!std::getline(in, row)) throw ConfigError("counts file: missing data row");
  const auto cols = detail::split_list(header);
  const auto vals_s = detail::split_list(row);
  if (cols.size() != vals_s.size())
    throw ConfigError("counts file: header and row have different column counts");
  const std::vector<std::string> required = {"N",    "N_mu", "N_nu", "n_mu", "n_nu",
                                             "m_mu", "m_nu", "c_mu", "c_nu"};
  if (cols.size() < required.size() || (cols.size() != 9 && cols.size() != 11))
    throw ConfigError("counts file: expected 9 or 11 columns");
  for (std::size_t i = 0; i < required.size(); ++i)
    if (cols[i] != required[i])
      throw ConfigError("counts file: column " + std::to_string(i + 1) + " must be '" +
                        required[i] + "'");
  std::vector<double> v;
  for (const auto& sv : vals_s) v.push_back(detail::parse_double(sv, "counts"));
  FiniteCounts c;
  c.N = v[0];
  c.N_mu = v[1];
  c.N_nu = v[2];
  c.n_mu = v[3];
  c.n_nu = v[4];
  c.m_mu = v[5];
  c.m_nu = v[6];
  const double c_mu = v[7], c_nu = v[8];
  if (cols.size() == 11) {
    if (cols[9] != "N_vac" || cols[10] != "n_vac")
      throw ConfigError("counts file: optional columns must be 'N_vac,n_vac'");
    c.N_vac = v[9];
    c.n_vac = v[10];
    c.has_vacuum = true;
  }
  auto close = [](double x, double y) { return std::fabs(x - y) <= 1e-6 * (1.0 + std::fabs(y)); };
  if (!close(c_mu, c.c_mu()) || !close(c_nu, c.c_nu()))
    throw ConfigError("counts file: c columns inconsistent with n - m");
  detail::validate_as_config_error([&] { c.validate(); });
  return c;
}

inline FiniteCounts load_counts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open counts file: " + path);
  return parse_counts_csv(in);
}

inline void write_counts_csv(std::ostream& out, const FiniteCounts& c) {
  using detail::format_g;
  out << "N,N_mu,N_nu,n_mu,n_nu,m_mu,m_nu,c_mu,c_nu";
  if (c.has_vacuum) out << ",N_vac,n_vac";
  out << "\n";
  out << format_g(c.N) << "," << format_g(c.N_mu) << "," << format_g(c.N_nu) << ","
      << format_g(c.n_mu) << "," << format_g(c.n_nu) << "," << format_g(c.m_mu) << ","
      << format_g(c.m_nu) << "," << format_g(c.c_mu()) << "," << format_g(c.c_nu());
  if (c.has_vacuum) out << "," << format_g(c.N_vac) << "," << format_g(c.n_vac);
  out << "\n";
}

}  // namespace decoyrate
