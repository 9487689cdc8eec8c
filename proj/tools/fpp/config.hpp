#pragma once

#include "fpp/errors.hpp"
#include "fpp/market.hpp"
#include "fpp/mixture_fpp.hpp"
#include "fpp/pooling.hpp"
#include "fpp/three_power.hpp"
#include "fpp/two_power.hpp"

#include <yaml-cpp/yaml.h>

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace fppcli {

using fpp::Matrix;
using fpp::Vector;

// Any problem with the configuration file or flags; maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct MarketSection {
  Matrix sigma = Matrix::Identity(1, 1);
  Vector mu = Vector::Constant(1, 0.2);
  std::size_t d_wperp = 0;

  fpp::MarketSpec build() const { return fpp::MarketSpec::constant(sigma, mu, d_wperp); }
};

struct MixtureSection {
  std::vector<fpp::Atom> atoms{{0.5, 1.0}};
  double gamma0 = 0.5;
  double x0 = 1.0;
  enum class H0 { zero, constant, target_pi } h0_kind = H0::zero;
  Vector h0_value;
  std::optional<Vector> perturbed_pi;
  double perturbation_scale = 2.0;
};

struct SimulationSection {
  std::size_t n_paths = 20000;
  std::uint64_t seed = 20240601;
  double grid_step = 1.0 / 252.0;
  double horizon = 1.0;
};

struct TwoPowerSection {
  fpp::TwoPowerSpec spec{0.1, 0.3, 1.0, 1.0, Vector::Zero(1), Vector::Zero(1), Vector(0), Vector(0)};
  double x = 1.0;
  double dual_gamma = 0.25;
  std::string power_path;
};

struct PoolSection {
  fpp::PoolSpec spec;
  std::string name = "fig1";
  std::size_t z_points = 99;
};

struct ThreePowerSection {
  fpp::ThreePowerSpec spec;
  std::vector<double> x_values{0.5, 1.0, 2.0};
  std::size_t csv_paths = 5;
  std::size_t gamma_grid = 50;
};

struct RunConfig {
  MarketSection market;
  MixtureSection mixture;
  SimulationSection simulation;
  TwoPowerSection two_power;
  PoolSection pool;
  ThreePowerSection three_power;
  std::string output_dir;
};

namespace detail {

inline std::string at_line(const YAML::Node& n) {
  const auto m = n.Mark();
  return m.line >= 0 ? "line " + std::to_string(m.line + 1) + ": " : "";
}

// Typed access to one mapping, remembering the dotted path for messages.
class Section {
public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsMap()) throw ConfigError(at_line(node_) + path_ + ": expected a mapping");
  }

  bool present() const { return node_ && node_.IsMap(); }
  bool has(const std::string& key) const { return present() && node_[key]; }
  const std::string& path() const { return path_; }
  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where(const std::string& key) const { return at_line(node_[key]) + key_path(key); }

  void allow(const std::set<std::string>& keys) const {
    if (!present()) return;
    for (const auto& kv : node_) {
      const auto name = kv.first.as<std::string>();
      if (!keys.count(name)) throw ConfigError(at_line(kv.first) + "unknown key '" + key_path(name) + "'");
    }
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return scalar<double>(node_[key], key_path(key));
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    if (!has(key)) return fallback;
    const auto v = scalar<long long>(node_[key], key_path(key));
    if (v < 1) throw ConfigError(where(key) + " must be a positive integer");
    return static_cast<std::size_t>(v);
  }

  std::string text(const std::string& key, std::string fallback) const {
    if (!has(key)) return fallback;
    return scalar<std::string>(node_[key], key_path(key));
  }

  Vector vector(const std::string& key) const { return to_vector(node_[key], key_path(key)); }

  Matrix matrix(const std::string& key) const {
    const auto n = node_[key];
    if (!n.IsSequence() || n.size() == 0) throw ConfigError(at_line(n) + key_path(key) + ": expected a list of rows");
    Matrix m;
    for (std::size_t r = 0; r < n.size(); ++r) {
      const Vector row = to_vector(n[r], key_path(key) + "[" + std::to_string(r) + "]");
      if (r == 0) m.resize(static_cast<Eigen::Index>(n.size()), row.size());
      if (row.size() != m.cols()) throw ConfigError(at_line(n[r]) + key_path(key) + ": rows differ in length");
      m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
  }

  Section child(const std::string& key) const { return Section(present() ? node_[key] : YAML::Node(), key_path(key)); }
  YAML::Node node(const std::string& key) const { return node_[key]; }

  template <class T>
  static T scalar(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) throw ConfigError(at_line(n) + path + ": expected a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(at_line(n) + path + ": cannot read '" + n.Scalar() + "'");
    }
  }

  static Vector to_vector(const YAML::Node& n, const std::string& path) {
    if (n.IsScalar()) return Vector::Constant(1, scalar<double>(n, path));
    if (!n.IsSequence()) throw ConfigError(at_line(n) + path + ": expected a number or a list");
    Vector v(static_cast<Eigen::Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i) v(static_cast<Eigen::Index>(i)) = scalar<double>(n[i], path);
    return v;
  }

private:
  YAML::Node node_;
  std::string path_;
};

// Runs a library validation and rethrows its message against a config key.
template <class F>
void checked(const Section& s, const std::string& key, F&& f) {
  try {
    f();
  } catch (const fpp::Error& e) {
    throw ConfigError((s.has(key) ? s.where(key) : s.key_path(key)) + ": " + e.what());
  }
}

inline void read_market(const Section& s, MarketSection& m) {
  s.allow({"lambda", "sigma", "mu", "d_wperp"});
  if (s.has("lambda")) {
    if (s.has("sigma") || s.has("mu")) throw ConfigError(s.where("lambda") + ": give either lambda or sigma/mu");
    const double lam = s.number("lambda", 0.0);
    m.sigma = Matrix::Identity(1, 1);
    m.mu = Vector::Constant(1, lam);
  } else if (s.has("sigma") || s.has("mu")) {
    if (!s.has("sigma") || !s.has("mu")) throw ConfigError(s.key_path("sigma") + ": sigma and mu go together");
    m.sigma = s.matrix("sigma");
    m.mu = s.vector("mu");
  }
  m.d_wperp = s.has("d_wperp") ? static_cast<std::size_t>(Section::scalar<long long>(s.node("d_wperp"), s.key_path("d_wperp"))) : 0;
  checked(s, s.has("sigma") ? "sigma" : "lambda", [&] { (void)m.build(); });
}

inline void read_mixture(const Section& s, MixtureSection& m) {
  s.allow({"atoms", "gamma0", "x0", "h0", "perturbed_pi", "perturbation_scale"});
  if (s.has("atoms")) {
    const auto list = s.node("atoms");
    if (!list.IsSequence() || list.size() == 0) throw ConfigError(s.where("atoms") + ": expected a non-empty list");
    m.atoms.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Section a(list[i], s.key_path("atoms") + "[" + std::to_string(i) + "]");
      a.allow({"gamma", "weight"});
      if (!a.has("gamma")) throw ConfigError(at_line(list[i]) + a.key_path("gamma") + ": missing");
      const double g = a.number("gamma", 0.0);
      const double w = a.number("weight", 1.0);
      checked(a, "gamma", [&] { fpp::check_risk_aversion(g, "gamma"); });
      if (!(w > 0.0)) throw ConfigError(a.where("weight") + ": weight must be positive");
      m.atoms.push_back({g, w});
    }
  }
  if (s.has("gamma0")) {
    m.gamma0 = s.number("gamma0", 0.0);
  } else if (m.atoms.size() == 1) {
    m.gamma0 = m.atoms.front().gamma;
  } else if (s.has("atoms")) {
    throw ConfigError(s.where("atoms") + ": gamma0 is required with more than one atom");
  }
  checked(s, "gamma0", [&] { fpp::RiskMixture(m.atoms, m.gamma0); });
  m.x0 = s.number("x0", m.x0);
  if (!(m.x0 > 0.0)) throw ConfigError(s.where("x0") + ": initial wealth must be positive");
  if (s.has("h0")) {
    const auto h = s.child("h0");
    h.allow({"kind", "value"});
    const auto kind = h.text("kind", "zero");
    if (kind == "zero") {
      m.h0_kind = MixtureSection::H0::zero;
    } else if (kind == "constant" || kind == "target_pi") {
      m.h0_kind = kind == "constant" ? MixtureSection::H0::constant : MixtureSection::H0::target_pi;
      if (!h.has("value")) throw ConfigError(h.where("kind") + ": kind '" + kind + "' needs a value");
      m.h0_value = h.vector("value");
    } else {
      throw ConfigError(h.where("kind") + ": expected zero, constant or target_pi, got '" + kind + "'");
    }
  }
  if (s.has("perturbed_pi")) m.perturbed_pi = s.vector("perturbed_pi");
  m.perturbation_scale = s.number("perturbation_scale", m.perturbation_scale);
}

inline void read_simulation(const Section& s, SimulationSection& m) {
  s.allow({"n_paths", "seed", "grid_step", "horizon"});
  m.n_paths = s.count("n_paths", m.n_paths);
  if (m.n_paths < 2) throw ConfigError(s.where("n_paths") + ": need at least two paths");
  if (s.has("seed")) m.seed = Section::scalar<std::uint64_t>(s.node("seed"), s.key_path("seed"));
  m.grid_step = s.number("grid_step", m.grid_step);
  m.horizon = s.number("horizon", m.horizon);
  checked(s, "grid_step", [&] { (void)fpp::TimeGrid::with_step(m.horizon, m.grid_step); });
}

inline void read_two_power(const Section& s, TwoPowerSection& m, const MarketSection& market) {
  s.allow({"p", "q", "a0", "d0", "a_vol", "d_vol", "a_perp", "d_perp", "x", "dual_gamma", "power_path"});
  auto& t = m.spec;
  const auto dw = market.sigma.rows();
  const auto dwp = static_cast<Eigen::Index>(market.d_wperp);
  t.p = s.number("p", t.p);
  t.q = s.number("q", t.q);
  t.a0 = s.number("a0", t.a0);
  t.d0 = s.number("d0", t.d0);
  t.a_vol = s.has("a_vol") ? s.vector("a_vol") : Vector::Zero(dw);
  t.d_vol = s.has("d_vol") ? s.vector("d_vol") : Vector::Zero(dw);
  t.a_perp = s.has("a_perp") ? s.vector("a_perp") : Vector::Zero(dwp);
  t.d_perp = s.has("d_perp") ? s.vector("d_perp") : Vector::Zero(dwp);
  checked(s, s.has("p") ? "p" : "q", [&] { t.validate(market.sigma.rows(), market.d_wperp); });
  m.x = s.number("x", m.x);
  if (!(m.x > 0.0)) throw ConfigError(s.where("x") + ": wealth must be positive");
  m.dual_gamma = s.number("dual_gamma", m.dual_gamma);
  if (!(m.dual_gamma > 0.0 && m.dual_gamma < 0.5)) throw ConfigError(s.where("dual_gamma") + ": must lie in (0, 1/2)");
  m.power_path = s.text("power_path", "");
}

inline void read_pool(const Section& s, PoolSection& m) {
  s.allow({"preset", "p", "q", "a0", "d0", "lam", "x0", "horizon", "rebalance_dt", "z_points"});
  if (s.has("preset")) {
    m.name = s.text("preset", "fig1");
    checked(s, "preset", [&] { m.spec = fpp::PoolSpec::preset(m.name); });
  }
  auto& p = m.spec;
  bool overridden = false;
  for (auto [key, field] : {std::pair{"p", &p.p}, {"q", &p.q}, {"a0", &p.a0}, {"d0", &p.d0}, {"lam", &p.lam},
                            {"x0", &p.x0}, {"horizon", &p.horizon}, {"rebalance_dt", &p.rebalance_dt}}) {
    if (s.has(key)) {
      *field = s.number(key, 0.0);
      overridden = true;
    }
  }
  if (overridden) m.name = s.has("preset") ? m.name + "-custom" : "custom";
  checked(s, "p", [&] { p.validate(); });
  m.z_points = s.count("z_points", m.z_points);
}

inline void read_three_power(const Section& s, ThreePowerSection& m) {
  s.allow({"gamma", "x_values", "csv_paths", "gamma_grid"});
  m.spec.gamma = s.number("gamma", m.spec.gamma);
  checked(s, "gamma", [&] { m.spec.validate(); });
  if (s.has("x_values")) {
    const Vector xs = s.vector("x_values");
    m.x_values.assign(xs.data(), xs.data() + xs.size());
    for (double x : m.x_values) {
      if (!(x > 0.0)) throw ConfigError(s.where("x_values") + ": wealth levels must be positive");
    }
  }
  m.csv_paths = s.count("csv_paths", m.csv_paths);
  m.gamma_grid = s.count("gamma_grid", m.gamma_grid);
}

}  // namespace detail

/// Defaults describe the single-atom power FPP with gamma = 0.5 and lambda = 0.2.
inline RunConfig load_config(const YAML::Node& root) {
  RunConfig c;
  if (!root || root.IsNull()) return c;
  const detail::Section top(root, "");
  top.allow({"market", "mixture", "simulation", "two_power", "pool", "three_power", "output_dir"});
  detail::read_market(top.child("market"), c.market);
  detail::read_mixture(top.child("mixture"), c.mixture);
  detail::read_simulation(top.child("simulation"), c.simulation);
  detail::read_two_power(top.child("two_power"), c.two_power, c.market);
  detail::read_pool(top.child("pool"), c.pool);
  detail::read_three_power(top.child("three_power"), c.three_power);
  c.output_dir = top.text("output_dir", "");
  return c;
}

inline RunConfig load_config_file(const std::string& path) {
  try {
    return load_config(YAML::LoadFile(path));
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot open config file '" + path + "'");
  } catch (const YAML::ParserException& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
}

}  // namespace fppcli
