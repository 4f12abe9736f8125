#pragma once

// Batch experiment runner behind the trotterfx command-line tool.
// Needs yaml-cpp at link time and nlohmann/json on the include path, so it is
// kept out of the core headers.

#include <yaml-cpp/yaml.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "trotterfx/bounds.hpp"
#include "trotterfx/das.hpp"
#include "trotterfx/hamiltonian.hpp"
#include "trotterfx/qpe.hpp"
#include "trotterfx/trotter.hpp"

namespace trotterfx::cli {

inline constexpr const char* version = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_strict = 3, exit_numerical = 4 };

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> all{"spectrum", "trotter-error", "das-sweep", "qpe", "rpe", "bounds", "leakage"};
  return all;
}

struct ModelSpec {
  std::string kind;
  int n_sites = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::array<double, 4>> diag_values;
  std::vector<TermSpec> terms;
  std::vector<TermSpec> final_terms;  // explicit kind only: H_f of an adiabatic pair
};

struct ExperimentConfig {
  std::string command;
  std::uint64_t seed = 0;
  ModelSpec model;
  json params = json::object();  // normalised: grids expanded, defaults filled
  Tolerances tol;
  std::string output_path = "result";
  std::string output_format = "csv";
  bool strict = false;
};

// ---------------------------------------------------------------------------
// Seeds

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stable per-task seed from the top-level seed and a task key (FNV-1a of the key).
inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError("'" + key + "' must be a scalar", line_of(n));
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + key + "' has an invalid value '" + n.Scalar() + "'", line_of(n));
  }
}

inline double real(const YAML::Node& n, const std::string& key) {
  const double v = scalar<double>(n, key);
  if (!std::isfinite(v)) throw ConfigError("'" + key + "' must be finite", line_of(n));
  return v;
}

inline long long integer(const YAML::Node& n, const std::string& key) { return scalar<long long>(n, key); }

inline void reject_unknown(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) {
  if (!map.IsMap()) throw ConfigError("'" + where + "' must be a mapping", line_of(map));
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where, line_of(kv.first));
  }
}

// "even:50:[40,2000]" or "log:7:[1e-3,1e-1]"
inline std::vector<double> real_grid(const YAML::Node& n, const std::string& key) {
  const std::string text = n.Scalar();
  static const std::regex pattern(R"(^\s*(even|log)\s*:\s*(\d+)\s*:\s*\[\s*([^,\]]+?)\s*,\s*([^\]]+?)\s*\]\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) {
    throw ConfigError("'" + key + "' grid spec must look like even:N:[lo,hi] or log:N:[lo,hi]", line_of(n));
  }
  const std::size_t count = std::stoul(m[2]);
  double lo = 0, hi = 0;
  try {
    lo = std::stod(m[3]);
    hi = std::stod(m[4]);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' grid bounds are not numbers", line_of(n));
  }
  if (count < 1 || !(lo > 0) || !(hi >= lo) || !std::isfinite(hi)) {
    throw ConfigError("'" + key + "' grid needs N >= 1 and 0 < lo <= hi", line_of(n));
  }
  if (m[1] == "even") return even_grid(count, lo, hi);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    out[i] = std::exp(std::log(lo) + frac * (std::log(hi) - std::log(lo)));
  }
  out.back() = hi;
  return out;
}

// "step:50:[50,1000]"
inline std::vector<long long> int_grid(const YAML::Node& n, const std::string& key) {
  static const std::regex pattern(R"(^\s*step\s*:\s*(\d+)\s*:\s*\[\s*(\d+)\s*,\s*(\d+)\s*\]\s*$)");
  std::smatch m;
  const std::string text = n.Scalar();
  if (!std::regex_match(text, m, pattern)) {
    throw ConfigError("'" + key + "' must be an integer, a list, or step:S:[lo,hi]", line_of(n));
  }
  const long long step = std::stoll(m[1]), lo = std::stoll(m[2]), hi = std::stoll(m[3]);
  if (step < 1 || hi < lo) throw ConfigError("'" + key + "' needs step >= 1 and lo <= hi", line_of(n));
  std::vector<long long> out;
  for (long long v = lo; v <= hi; v += step) out.push_back(v);
  return out;
}

enum class Kind { real, integer, real_list, int_list, text };

struct ParamRule {
  Kind kind;
  bool required;
  double min;
  double max;
  bool increasing = false;
  bool open_min = false;  // value must be strictly greater than min
};

inline const std::map<std::string, std::map<std::string, ParamRule>>& param_rules() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const ParamRule pos{Kind::real, true, 0, inf, false, true};
  const ParamRule pos_opt{Kind::real, false, 0, inf, false, true};
  static const std::map<std::string, std::map<std::string, ParamRule>> rules{
      {"spectrum", {{"dt", pos}}},
      {"trotter-error", {{"dt", pos}, {"L", {Kind::int_list, true, 0, inf}}, {"state", {Kind::text, false, 0, 0}}}},
      {"das-sweep",
       {{"M", {Kind::integer, true, 1, inf}},
        {"T", {Kind::real_list, true, 0, inf, true, true}},
        {"M_ref", {Kind::integer, false, 1, inf}},
        {"tracking_points", {Kind::integer, false, 2, inf}}}},
      {"qpe",
       {{"dt", {Kind::real_list, true, 0, inf, false, true}},
        {"t0", pos},
        {"l", {Kind::integer, true, 1, 20}},
        {"k", {Kind::integer, false, 0, inf}},
        {"xi", pos_opt}}},
      {"rpe",
       {{"dt", pos},
        {"L", {Kind::int_list, true, 1, inf}},
        {"i0", {Kind::integer, false, 0, inf}},
        {"i1", {Kind::integer, false, 0, inf}},
        {"safety", pos_opt}}},
      {"bounds",
       {{"dt", pos},
        {"L", {Kind::integer, false, 0, inf}},
        {"M", {Kind::integer, false, 1, inf}},
        {"T", {Kind::real_list, false, 0, inf, true, true}},
        {"lambda", pos_opt},
        {"xi", pos_opt},
        {"t0", pos_opt}}},
      {"leakage",
       {{"dt", pos}, {"L", {Kind::int_list, true, 0, inf}}, {"subspace", {Kind::int_list, true, 0, inf}}}},
  };
  return rules;
}

inline void check_range(double v, const ParamRule& rule, const std::string& key, int line) {
  const bool low_ok = rule.open_min ? v > rule.min : v >= rule.min;
  if (!low_ok || v > rule.max) {
    std::ostringstream msg;
    msg << "'" << key << "' = " << v << " out of range (" << (rule.open_min ? "> " : ">= ") << rule.min;
    if (std::isfinite(rule.max)) msg << ", <= " << rule.max;
    msg << ")";
    throw ConfigError(msg.str(), line);
  }
}

inline json parse_param(const YAML::Node& n, const ParamRule& rule, const std::string& key) {
  const int line = line_of(n);
  switch (rule.kind) {
    case Kind::real: {
      const double v = real(n, key);
      check_range(v, rule, key, line);
      return v;
    }
    case Kind::integer: {
      const long long v = integer(n, key);
      check_range(static_cast<double>(v), rule, key, line);
      return v;
    }
    case Kind::text:
      return scalar<std::string>(n, key);
    case Kind::real_list: {
      std::vector<double> values;
      if (n.IsSequence()) {
        for (const auto& e : n) values.push_back(real(e, key));
      } else if (n.IsScalar() && n.Scalar().find(':') != std::string::npos) {
        values = real_grid(n, key);
      } else {
        values.push_back(real(n, key));
      }
      if (values.empty()) throw ConfigError("'" + key + "' is empty", line);
      for (std::size_t i = 0; i < values.size(); ++i) {
        check_range(values[i], rule, key, line);
        if (rule.increasing && i > 0 && !(values[i] > values[i - 1])) {
          throw ConfigError("'" + key + "' must be strictly increasing", line);
        }
      }
      return values;
    }
    case Kind::int_list: {
      std::vector<long long> values;
      if (n.IsSequence()) {
        for (const auto& e : n) values.push_back(integer(e, key));
      } else if (n.IsScalar() && n.Scalar().find(':') != std::string::npos) {
        values = int_grid(n, key);
      } else {
        values.push_back(integer(n, key));
      }
      if (values.empty()) throw ConfigError("'" + key + "' is empty", line);
      for (long long v : values) check_range(static_cast<double>(v), rule, key, line);
      return values;
    }
  }
  return nullptr;
}

inline std::vector<TermSpec> parse_terms(const YAML::Node& n, int n_sites, const std::string& key) {
  if (!n.IsSequence() || n.size() == 0) {
    throw ConfigError("'" + key + "' must be a non-empty list of [coefficient, letters, layer]", line_of(n));
  }
  std::vector<TermSpec> out;
  for (const auto& e : n) {
    if (!e.IsSequence() || e.size() != 3) {
      throw ConfigError("each entry of '" + key + "' must be [coefficient, letters, layer]", line_of(e));
    }
    TermSpec t{real(e[0], key + " coefficient"), scalar<std::string>(e[1], key + " letters"), 0};
    const long long layer = integer(e[2], key + " layer");
    if (layer < 0 || layer > 64) throw ConfigError("layer index out of range in '" + key + "'", line_of(e[2]));
    t.layer = static_cast<std::size_t>(layer);
    if (static_cast<int>(t.letters.size()) != n_sites ||
        t.letters.find_first_not_of("IXYZ") != std::string::npos) {
      throw ConfigError("Pauli string '" + t.letters + "' must have " + std::to_string(n_sites) +
                            " letters from IXYZ",
                        line_of(e[1]));
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline ModelSpec parse_model(const YAML::Node& n) {
  reject_unknown(n, {"kind", "n_sites", "seed", "diag_values", "terms", "final_terms"}, "model");
  if (!n["kind"]) throw ConfigError("missing required key 'model.kind'", line_of(n));
  ModelSpec m;
  m.kind = scalar<std::string>(n["kind"], "kind");
  static const std::set<std::string> kinds{"tfim", "heisenberg_ff", "counterexample", "random_real", "random_nn",
                                           "explicit"};
  if (!kinds.count(m.kind)) {
    throw ConfigError("model.kind '" + m.kind +
                          "' is not one of tfim, heisenberg_ff, counterexample, random_real, random_nn, explicit",
                      line_of(n["kind"]));
  }
  const auto forbid = [&](const char* key) {
    if (n[key]) throw ConfigError("'" + std::string(key) + "' is not used by model kind " + m.kind, line_of(n[key]));
  };

  if (m.kind == "counterexample") {
    m.n_sites = 2;
    if (n["n_sites"] && integer(n["n_sites"], "n_sites") != 2) {
      throw ConfigError("the counterexample model has exactly 2 sites", line_of(n["n_sites"]));
    }
  } else {
    if (!n["n_sites"]) throw ConfigError("missing required key 'model.n_sites'", line_of(n));
    const long long sites = integer(n["n_sites"], "n_sites");
    const int floor = m.kind == "heisenberg_ff" ? 3 : (m.kind == "tfim" || m.kind == "random_nn") ? 2 : 1;
    if (sites < floor || sites > default_site_cap) {
      throw ConfigError("model.n_sites = " + std::to_string(sites) + " out of range [" + std::to_string(floor) + ", " +
                            std::to_string(default_site_cap) + "] for " + m.kind,
                        line_of(n["n_sites"]));
    }
    m.n_sites = static_cast<int>(sites);
  }

  if (m.kind == "random_real" || m.kind == "random_nn") {
    if (n["seed"]) m.seed = scalar<std::uint64_t>(n["seed"], "seed");
  } else {
    forbid("seed");
  }

  if (m.kind == "counterexample" && n["diag_values"]) {
    const YAML::Node d = n["diag_values"];
    if (!d.IsSequence() || d.size() != 4) throw ConfigError("diag_values must list 4 numbers", line_of(d));
    std::array<double, 4> values{};
    for (std::size_t i = 0; i < 4; ++i) values[i] = real(d[i], "diag_values");
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (values[i] == values[j]) throw ConfigError("diag_values must be distinct", line_of(d));
    m.diag_values = values;
  } else if (m.kind != "counterexample") {
    forbid("diag_values");
  }

  if (m.kind == "explicit") {
    if (!n["terms"]) throw ConfigError("missing required key 'model.terms'", line_of(n));
    m.terms = parse_terms(n["terms"], m.n_sites, "terms");
    if (n["final_terms"]) m.final_terms = parse_terms(n["final_terms"], m.n_sites, "final_terms");
  } else {
    forbid("terms");
    forbid("final_terms");
  }
  return m;
}

inline Tolerances parse_tolerances(const YAML::Node& n) {
  Tolerances tol;
  const std::map<std::string, double Tolerances::*> fields{
      {"hermitian", &Tolerances::hermitian},   {"unitary", &Tolerances::unitary},
      {"normalization", &Tolerances::normalization}, {"branch", &Tolerances::branch},
      {"round_trip", &Tolerances::round_trip}, {"degeneracy", &Tolerances::degeneracy},
      {"pairing", &Tolerances::pairing},       {"gap_collapse", &Tolerances::gap_collapse},
      {"quadrant", &Tolerances::quadrant}};
  if (!n.IsMap()) throw ConfigError("'tolerances' must be a mapping", line_of(n));
  for (const auto& kv : n) {
    const std::string key = kv.first.as<std::string>();
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown key '" + key + "' in tolerances", line_of(kv.first));
    const double v = real(kv.second, key);
    if (!(v > 0)) throw ConfigError("tolerance '" + key + "' must be positive", line_of(kv.second));
    tol.*(it->second) = v;
  }
  return tol;
}

inline json tolerances_json(const Tolerances& t) {
  return {{"hermitian", t.hermitian}, {"unitary", t.unitary},       {"normalization", t.normalization},
          {"branch", t.branch},       {"round_trip", t.round_trip}, {"degeneracy", t.degeneracy},
          {"pairing", t.pairing},     {"gap_collapse", t.gap_collapse}, {"quadrant", t.quadrant}};
}

inline void check_index(const json& params, const char* key, long long dim, const YAML::Node& where) {
  if (!params.contains(key)) return;
  const auto check = [&](long long v) {
    if (v >= dim) {
      throw ConfigError("'" + std::string(key) + "' = " + std::to_string(v) + " exceeds the last level " +
                            std::to_string(dim - 1),
                        line_of(where[key]));
    }
  };
  if (params[key].is_array()) {
    for (const auto& v : params[key]) check(v.get<long long>());
  } else {
    check(params[key].get<long long>());
  }
}

}  // namespace detail

/// Parses and validates a YAML experiment document. `command`, if non-empty,
/// is the subcommand given on the command line; a `command` key in the
/// document must then agree with it.
inline ExperimentConfig parse_config(const std::string& text, const std::string& command = "") {
  using namespace detail;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("syntax error: " + e.msg, e.mark.line + 1);
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping", root ? line_of(root) : 1);
  reject_unknown(root, {"command", "seed", "model", "params", "output", "tolerances"}, "config");

  ExperimentConfig c;
  c.command = command;
  if (root["command"]) {
    const std::string named = scalar<std::string>(root["command"], "command");
    if (!command.empty() && named != command) {
      throw ConfigError("config is for '" + named + "' but '" + command + "' was requested", line_of(root["command"]));
    }
    c.command = named;
  }
  if (c.command.empty()) throw ConfigError("no command given");
  const auto& rules = param_rules();
  const auto rule_set = rules.find(c.command);
  if (rule_set == rules.end()) throw ConfigError("unknown command '" + c.command + "'");

  if (root["seed"]) c.seed = scalar<std::uint64_t>(root["seed"], "seed");
  if (!root["model"]) throw ConfigError("missing required key 'model'", line_of(root));
  c.model = parse_model(root["model"]);
  if (root["tolerances"]) c.tol = parse_tolerances(root["tolerances"]);

  const YAML::Node params = root["params"] ? root["params"] : YAML::Node(YAML::NodeType::Map);
  std::set<std::string> allowed;
  for (const auto& [key, rule] : rule_set->second) allowed.insert(key);
  reject_unknown(params, allowed, "params for " + c.command);
  for (const auto& [key, rule] : rule_set->second) {
    if (params[key]) {
      c.params[key] = parse_param(params[key], rule, key);
    } else if (rule.required) {
      throw ConfigError("missing required key 'params." + key + "' for " + c.command, line_of(root));
    }
  }

  const long long dim = 1LL << c.model.n_sites;
  for (const char* key : {"k", "i0", "i1", "subspace"}) check_index(c.params, key, dim, params);
  if (c.command == "rpe") {
    if (!c.params.contains("i0")) c.params["i0"] = 0;
    if (!c.params.contains("i1")) c.params["i1"] = 1;
    if (!c.params.contains("safety")) c.params["safety"] = 10.0;
    if (c.params["i0"] == c.params["i1"]) throw ConfigError("rpe needs two distinct levels i0, i1", line_of(params));
  }
  if (c.command == "qpe" && !c.params.contains("k")) c.params["k"] = 0;
  if (c.command == "bounds") {
    if (!c.params.contains("L")) c.params["L"] = 1;
    if (c.params.contains("xi") != c.params.contains("t0")) {
      throw ConfigError("bounds: 'xi' and 't0' go together", line_of(params));
    }
    if (c.params.contains("T") && !c.params.contains("M")) throw ConfigError("bounds: 'T' needs 'M'", line_of(params));
  }
  if (c.command == "leakage") {
    const auto sub = c.params["subspace"].get<std::vector<long long>>();
    if (std::set<long long>(sub.begin(), sub.end()).size() != sub.size()) {
      throw ConfigError("subspace indices must be distinct", line_of(params["subspace"]));
    }
  }
  if (c.command == "trotter-error") {
    if (!c.params.contains("state")) c.params["state"] = "ground";
    const std::string s = c.params["state"];
    static const std::regex pattern(R"(^(ground|random|(level|basis):(\d+))$)");
    std::smatch m;
    if (!std::regex_match(s, m, pattern)) {
      throw ConfigError("state must be ground, random, level:K or basis:I", line_of(params["state"]));
    }
    if (m[3].matched && std::stoll(m[3]) >= dim) throw ConfigError("state index out of range", line_of(params["state"]));
  }
  if (c.command == "das-sweep" || (c.command == "bounds" && c.params.contains("M"))) {
    if (c.model.kind != "tfim" && !(c.model.kind == "explicit" && !c.model.final_terms.empty())) {
      throw ConfigError(c.command + " needs an adiabatic pair: model kind tfim, or explicit with final_terms",
                        line_of(root["model"]));
    }
  } else if (!c.model.final_terms.empty()) {
    throw ConfigError("final_terms is only used by das-sweep and by bounds with M", line_of(root["model"]));
  }

  if (root["output"]) {
    const YAML::Node out = root["output"];
    reject_unknown(out, {"path", "format"}, "output");
    if (out["path"]) c.output_path = scalar<std::string>(out["path"], "path");
    if (out["format"]) c.output_format = scalar<std::string>(out["format"], "format");
    if (c.output_format != "csv" && c.output_format != "json") {
      throw ConfigError("output.format must be csv or json", line_of(out["format"]));
    }
    if (c.output_path.empty() || c.output_path.find('/') != std::string::npos) {
      throw ConfigError("output.path must be a plain file stem", line_of(out["path"] ? out["path"] : out));
    }
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const std::string& command = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), command);
}

inline json config_json(const ExperimentConfig& c) {
  json model{{"kind", c.model.kind}, {"n_sites", c.model.n_sites}};
  if (c.model.seed) model["seed"] = *c.model.seed;
  if (c.model.diag_values) model["diag_values"] = *c.model.diag_values;
  const auto terms = [](const std::vector<TermSpec>& ts) {
    json out = json::array();
    for (const auto& t : ts) out.push_back(json::array({t.coefficient, t.letters, t.layer}));
    return out;
  };
  if (!c.model.terms.empty()) model["terms"] = terms(c.model.terms);
  if (!c.model.final_terms.empty()) model["final_terms"] = terms(c.model.final_terms);
  return {{"command", c.command},
          {"seed", c.seed},
          {"model", model},
          {"params", c.params},
          {"tolerances", detail::tolerances_json(c.tol)},
          {"output", {{"path", c.output_path}, {"format", c.output_format}}},
          {"strict", c.strict}};
}

// ---------------------------------------------------------------------------
// Models

inline LayeredHamiltonian build_model(const ExperimentConfig& c) {
  const ModelSpec& m = c.model;
  const auto seed = [&] { return m.seed ? *m.seed : derive_seed(c.seed, "model"); };
  if (m.kind == "tfim") return tfim_chain(m.n_sites);
  if (m.kind == "heisenberg_ff") return heisenberg_ff(m.n_sites);
  if (m.kind == "counterexample") {
    return m.diag_values ? counterexample_model(*m.diag_values) : counterexample_model();
  }
  if (m.kind == "random_real") return random_real_local(m.n_sites, seed());
  if (m.kind == "random_nn") return random_nn_chain(m.n_sites, seed());
  return from_terms(m.n_sites, m.terms);
}

inline HamiltonianPair build_pair(const ExperimentConfig& c) {
  if (c.model.kind == "tfim") return tfim_pair(c.model.n_sites);
  return {from_terms(c.model.n_sites, c.model.terms), from_terms(c.model.n_sites, c.model.final_terms)};
}

// ---------------------------------------------------------------------------
// Artifacts

using Cell = std::variant<long long, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct Artifacts {
  Table table;
  json summary = json::object();
  std::vector<std::string> warnings;  // violated bound preconditions
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      if (const auto* d = std::get_if<double>(&row[i])) {
        out += format_double(*d);
      } else if (const auto* n = std::get_if<long long>(&row[i])) {
        out += std::to_string(*n);
      } else {
        out += std::get<std::string>(row[i]);
      }
    }
    out += '\n';
  }
  return out;
}

inline json to_json(const Table& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json obj = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) std::visit([&](const auto& v) { obj[t.columns[i]] = v; }, row[i]);
    rows.push_back(std::move(obj));
  }
  return {{"columns", t.columns}, {"rows", rows}};
}

inline bool all_finite(const json& j) {
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_structured()) {
    for (const auto& e : j) {
      if (!all_finite(e)) return false;
    }
  }
  return true;
}

inline bool all_finite(const Table& t) {
  for (const auto& row : t.rows)
    for (const auto& cell : row)
      if (const auto* d = std::get_if<double>(&cell); d && !std::isfinite(*d)) return false;
  return true;
}

inline json bound_json(const BoundReport& r) {
  return {{"name", r.name},
          {"value", r.value},
          {"inputs", r.inputs},
          {"rigor", to_string(r.rigor)},
          {"preconditions_met", r.preconditions_met()},
          {"violated", r.violated}};
}

// ---------------------------------------------------------------------------
// Commands

namespace detail {

inline std::vector<long long> ints(const json& j) {
  return j.is_array() ? j.get<std::vector<long long>>() : std::vector<long long>{j.get<long long>()};
}

inline std::vector<double> reals(const json& j) {
  return j.is_array() ? j.get<std::vector<double>>() : std::vector<double>{j.get<double>()};
}

inline void note(Artifacts& a, const BoundReport& r) {
  for (const auto& v : r.violated) a.warnings.push_back(r.name + ": " + v);
}

inline double ground_gap(const DenseOperator& h, const Tolerances& tol) {
  const Spectrum s = hermitian_eig(h, tol);
  const double gap = s.eigenvalues(1) - s.eigenvalues(0);
  if (!(gap > tol.degeneracy)) {
    throw Error(ErrorKind::degenerate_spectrum, "ground level is degenerate; set params.lambda explicitly");
  }
  return gap;
}

inline Artifacts run_spectrum(const ExperimentConfig& c) {
  const LayeredHamiltonian h = build_model(c);
  const double dt = c.params["dt"];
  const DenseModel model = build_dense(h);
  const DenseOperator h_eff = effective_hamiltonian(model, dt, c.tol);
  const SpectralComparison cmp = spectral_comparison(model.total, h_eff, c.tol);

  Artifacts a;
  a.table.columns = {"k", "energy", "effective_energy", "shift", "overlap", "gap"};
  for (std::size_t k = 0; k < cmp.pairs.size(); ++k) {
    const auto& p = cmp.pairs[k];
    a.table.rows.push_back({static_cast<long long>(k), p.energy, p.effective_energy, p.effective_energy - p.energy,
                            p.overlap, p.gap});
  }
  const BoundReport ceiling = magnus_static_bound(interaction_constants(h), dt);
  note(a, ceiling);
  a.summary = {{"dt", dt},
               {"max_shift", cmp.max_shift()},
               {"heff_deviation", operator_norm(h_eff - model.total)},
               {"off_diagonal_residual", off_diagonal_residual(h, c.tol)},
               {"magnus_static_bound", bound_json(ceiling)}};
  return a;
}

inline Artifacts run_trotter_error(const ExperimentConfig& c) {
  const LayeredHamiltonian h = build_model(c);
  const double dt = c.params["dt"];
  const std::string state = c.params["state"];
  StateVector psi;
  if (state == "random") {
    std::mt19937_64 g(derive_seed(c.seed, "state"));
    std::normal_distribution<double> nrm;
    psi.resize(h.dim());
    for (Eigen::Index i = 0; i < psi.size(); ++i) psi(i) = complex(nrm(g), nrm(g));
    psi.normalize();
  } else if (state.rfind("basis:", 0) == 0) {
    psi = basis_state(h.dim(), std::stoll(state.substr(6)));
  } else {
    const Eigen::Index level = state == "ground" ? 0 : std::stoll(state.substr(6));
    psi = hermitian_eig(dense_total(h), c.tol).vector(level);
  }
  const auto reports = error_decomposition_series(h, dt, ints(c.params["L"]), psi, c.tol);

  Artifacts a;
  a.table.columns = {"L", "t", "f", "theta", "delta", "euclid", "phase_may_wrap"};
  bool wraps = false;
  for (const auto& r : reports) {
    a.table.rows.push_back({r.L, r.t, r.f, r.theta, r.delta, r.euclid, r.phase_may_wrap ? 1LL : 0LL});
    wraps = wraps || r.phase_may_wrap;
  }
  a.summary = {{"dt", dt}, {"state", state}, {"phase_may_wrap", wraps}};
  return a;
}

inline Artifacts run_das_sweep(const ExperimentConfig& c) {
  const HamiltonianPair pair = build_pair(c);
  const long long M = c.params["M"];
  DASOptions opt;
  opt.tol = c.tol;
  if (c.params.contains("M_ref")) opt.M_ref = c.params["M_ref"];
  if (c.params.contains("tracking_points")) opt.tracking_points = c.params["tracking_points"].get<std::size_t>();
  const SweepResult s = das_sweep(pair.initial, pair.final, M, reals(c.params["T"]), 0, opt);

  Artifacts a;
  a.table.columns = {"T", "M", "eps_adb_d", "eps_tro", "eps_tot_d", "eps_dis_proxy"};
  for (const auto& r : s.records) a.table.rows.push_back({r.T, r.M, r.eps_adb_d, r.eps_tro, r.eps_tot_d, r.eps_dis_proxy});
  a.summary = {{"M", M},
               {"M_ref", opt.M_ref > 0 ? opt.M_ref : 4 * M},
               {"turning_point_T", s.turning_point_T},
               {"turning_index", s.turning_index},
               {"slope_adb", s.slope_adb},
               {"slope_r2", s.slope_r2}};
  return a;
}

inline Artifacts run_qpe(const ExperimentConfig& c) {
  const LayeredHamiltonian h = build_model(c);
  const double t0 = c.params["t0"];
  const int l = c.params["l"];
  const Eigen::Index k = c.params["k"];
  // U = exp(-i E t) has eigenphase 2 pi phi with phi = -E t / (2 pi) mod 1
  const auto phase_of = [](double theta) {
    const double phi = -theta / (2.0 * pi);
    return phi - std::floor(phi);
  };

  Artifacts a;
  a.table.columns = {"dt",        "L",           "t",           "theta_exact",     "theta_eff",
                     "energy_shift", "overlap_penalty", "outcome_exact", "outcome_eff", "p_exact_outcome"};
  for (double dt : reals(c.params["dt"])) {
    const QPEShift s = qpe_trotter_shift(h, dt, t0, k, c.tol);
    const std::size_t exact = nearest_outcome(phase_of(s.theta_exact), l);
    const double ph[] = {phase_of(s.theta_eff)};
    const double w[] = {1.0};
    const QPEOutcome out = qpe_distribution(ph, w, l);
    a.table.rows.push_back({dt, s.L, s.t, s.theta_exact, s.theta_eff, s.energy_shift, s.overlap_penalty,
                            static_cast<long long>(exact), static_cast<long long>(out.most_likely()),
                            out.distribution[exact] * (1.0 - s.overlap_penalty)});
  }
  a.summary = {{"l", l}, {"t0", t0}, {"k", k}};
  if (c.params.contains("xi")) {
    const Spectrum spec = hermitian_eig(dense_total(h), c.tol);
    const RealVector gaps = trotterfx::detail::level_gaps(spec.eigenvalues);
    const double lambda = gaps(k);
    if (!(lambda > c.tol.degeneracy)) throw Error(ErrorKind::degenerate_spectrum, "qpe: level k is degenerate");
    const bool condition = off_diagonal_residual(h, c.tol) <= 1e-10;
    const QPERequirements req = qpe_requirements(c.params["xi"], t0, h.n_sites(), lambda, condition);
    a.summary["requirements"] = {{"dt", bound_json(req.dt)}, {"L", bound_json(req.L)}, {"depth", bound_json(req.depth)}};
  }
  return a;
}

inline Artifacts run_rpe(const ExperimentConfig& c) {
  const LayeredHamiltonian h = build_model(c);
  const double dt = c.params["dt"];
  const double safety = c.params["safety"];
  const Eigen::Index i0 = c.params["i0"], i1 = c.params["i1"];

  Artifacts a;
  a.table.columns = {"L",         "t",     "P_alpha",  "P_beta",   "extracted_phase",
                     "predicted_phase", "f_max", "envelope", "error", "within_envelope"};
  bool all_within = true;
  for (long long L : ints(c.params["L"])) {
    const RPEReading r = rpe_extract(h, dt, L, i0, i1, c.tol);
    const double envelope = safety * std::sqrt(r.f_max);
    const double err = std::abs(phase_difference(r.extracted_phase, r.predicted_phase));
    const bool within = err <= envelope;
    all_within = all_within && within;
    a.table.rows.push_back({L, r.t, r.P_alpha, r.P_beta, r.extracted_phase, r.predicted_phase, r.f_max, envelope, err,
                            within ? 1LL : 0LL});
  }
  a.summary = {{"dt", dt}, {"i0", i0}, {"i1", i1}, {"safety", safety}, {"all_within_envelope", all_within}};
  return a;
}

inline Artifacts run_bounds(const ExperimentConfig& c) {
  const LayeredHamiltonian h = build_model(c);
  const double dt = c.params["dt"];
  const long long L = c.params["L"];
  const DenseModel model = build_dense(h);
  const InteractionConstants total = interaction_constants(h);
  const double lambda = c.params.contains("lambda") ? c.params["lambda"].get<double>() : ground_gap(model.total, c.tol);

  std::vector<BoundReport> reports;
  reports.push_back(magnus_h(total, dt));
  reports.push_back(magnus_static_bound(total, dt));
  const EigenstateBounds eig = corollary1_bounds(reports.front().value, lambda, dt, L);
  reports.push_back(eig.theta);
  reports.push_back(eig.f);
  reports.push_back(lemma3_energy_bound(total, operator_norm(leading_correction(model)), lambda, dt));

  json summary{{"dt", dt},
               {"L", L},
               {"lambda", lambda},
               {"constants", {{"alpha", total.alpha}, {"beta", total.beta}, {"normH", total.normH}}}};

  if (c.params.contains("M")) {
    const HamiltonianPair pair = build_pair(c);
    const InteractionConstants pc = interaction_constants(pair.initial, pair.final);
    const long long M = c.params["M"];
    double das_lambda = lambda;
    if (!c.params.contains("lambda")) {
      const AdiabaticPath path = linear_path(dense_total(pair.initial), dense_total(pair.final));
      das_lambda = track_eigenstate(path.hamiltonian, 0, uniform_grid(65), c.tol).min_gap();
    }
    reports.push_back(appF_derivative_bounds(pc, dt).report);
    const OptimalSchedule opt = tc_optimal(pc, M, das_lambda);
    reports.push_back(opt.eps_opt);
    const std::vector<double> Ts =
        c.params.contains("T") ? reals(c.params["T"]) : std::vector<double>{opt.T_c / 2, opt.T_c, 2 * opt.T_c};
    for (double T : Ts) reports.push_back(das_bound_report(pc, T, M, das_lambda));
    summary["T_c"] = opt.T_c;
    summary["das_lambda"] = das_lambda;
    summary["pair_constants"] = {{"C0", pc.C0}, {"C1", pc.C1}, {"C2", pc.C2}, {"D", pc.D}};
  }
  if (c.params.contains("xi")) {
    const bool condition = off_diagonal_residual(h, c.tol) <= 1e-10;
    const QPERequirements req = qpe_requirements(c.params["xi"], c.params["t0"], h.n_sites(), lambda, condition);
    reports.push_back(req.dt);
    reports.push_back(req.L);
    reports.push_back(req.depth);
  }

  Artifacts a;
  a.table.columns = {"name", "value", "rigor", "preconditions_met"};
  json list = json::array();
  for (const auto& r : reports) {
    note(a, r);
    a.table.rows.push_back({r.name, r.value, std::string(to_string(r.rigor)), r.preconditions_met() ? 1LL : 0LL});
    list.push_back(bound_json(r));
  }
  summary["reports"] = list;
  a.summary = summary;
  return a;
}

inline Artifacts run_leakage(const ExperimentConfig& c) {
  const LayeredHamiltonian h = build_model(c);
  const double dt = c.params["dt"];
  std::vector<Eigen::Index> subspace;
  for (long long i : ints(c.params["subspace"])) subspace.push_back(i);
  const auto reports = leakage_series(h, dt, ints(c.params["L"]), subspace, std::nullopt, c.tol);

  Artifacts a;
  a.table.columns = {"L", "leakage", "projector_distance", "ceiling", "subspace_gap"};
  double worst = 0;
  for (const auto& r : reports) {
    a.table.rows.push_back({r.L, r.leakage, r.projector_distance, r.ceiling, r.subspace_gap});
    if (r.ceiling > 0) worst = std::max(worst, r.leakage / r.ceiling);
  }
  a.summary = {{"dt", dt}, {"subspace", ints(c.params["subspace"])}, {"max_leakage_over_ceiling", worst}};
  return a;
}

}  // namespace detail

/// Runs the numerics for a validated config; throws trotterfx::Error on failure.
inline Artifacts execute(const ExperimentConfig& c) {
  if (c.command == "spectrum") return detail::run_spectrum(c);
  if (c.command == "trotter-error") return detail::run_trotter_error(c);
  if (c.command == "das-sweep") return detail::run_das_sweep(c);
  if (c.command == "qpe") return detail::run_qpe(c);
  if (c.command == "rpe") return detail::run_rpe(c);
  if (c.command == "bounds") return detail::run_bounds(c);
  if (c.command == "leakage") return detail::run_leakage(c);
  throw ConfigError("unknown command '" + c.command + "'");
}

inline std::string table_text(const ExperimentConfig& c, const Table& t) {
  return c.output_format == "csv" ? to_csv(t) : to_json(t).dump(2) + "\n";
}

/// Executes `c` and writes <path>.<format>, <path>.summary.json and
/// manifest.json into `out_dir`. Nothing is left behind on failure.
inline int run(const ExperimentConfig& c, const std::filesystem::path& out_dir, std::ostream& log) {
  namespace fs = std::filesystem;
  const auto start = std::chrono::steady_clock::now();
  Artifacts a;
  try {
    a = execute(c);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return e.is_usage_error() ? exit_config : exit_numerical;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return exit_numerical;
  }
  if (!all_finite(a.table) || !all_finite(a.summary)) {
    log << "error: non-finite value in results\n";
    return exit_numerical;
  }
  for (const auto& w : a.warnings) log << (c.strict ? "precondition failed: " : "warning: ") << w << "\n";
  if (c.strict && !a.warnings.empty()) return exit_strict;

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string table_name = c.output_path + "." + c.output_format;
  const std::string summary_name = c.output_path + ".summary.json";
  const json manifest{{"version", version},
                      {"config", config_json(c)},
                      {"wall_time_s", wall},
                      {"threads", thread_count()},
                      {"warnings", a.warnings},
                      {"artifacts", {table_name, summary_name}}};
  const std::vector<std::pair<std::string, std::string>> files{
      {table_name, table_text(c, a.table)},
      {summary_name, a.summary.dump(2) + "\n"},
      {"manifest.json", manifest.dump(2) + "\n"}};

  std::vector<fs::path> written;
  try {
    fs::create_directories(out_dir);
    for (const auto& [name, content] : files) {
      const fs::path p = out_dir / name;
      std::ofstream out(p, std::ios::binary | std::ios::trunc);
      written.push_back(p);
      out << content;
      out.close();
      if (!out) throw std::runtime_error("cannot write " + p.string());
    }
  } catch (const std::exception& e) {
    std::error_code ignored;
    for (const auto& p : written) fs::remove(p, ignored);
    log << "error: " << e.what() << "\n";
    return exit_numerical;
  }
  return exit_ok;
}

}  // namespace trotterfx::cli
