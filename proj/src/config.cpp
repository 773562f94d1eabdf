#include "epsrecon/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "epsrecon/errors.hpp"

namespace epsrecon {

namespace {

using json = nlohmann::ordered_json;

json vec(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

json box_json(const Box& b) { return json{{"lo", vec(b.lo)}, {"hi", vec(b.hi)}}; }

/// Reads keys of one object, remembering which ones were consumed so that
/// misspelled keys are reported instead of silently ignored.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  void get(const char* key, Vec3& out) {
    std::vector<double> v;
    get(key, v);
    if (!j_.contains(key)) return;
    if (v.size() != 3) throw ConfigError(name_ + "." + key + " needs three numbers");
    out = {v[0], v[1], v[2]};
  }

  void get(const char* key, Box& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Section s(j_.at(key), name_ + "." + key);
    s.get("lo", out.lo);
    s.get("hi", out.hi);
    s.finish();
  }

  void get(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    double v = 0.0;
    get(key, v);
    out = v;
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, name_.empty() ? key : name_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key " + (name_.empty() ? k : name_ + "." + k));
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

ForwardConfig RunConfig::forward() const {
  ForwardConfig f;
  f.s = s;
  f.time_grid = TimeGrid::make(time.t_final, time.dt, waveform().t1());
  return f;
}

void RunConfig::validate() const {
  domain.validate();
  if (!(base_h > 0.0)) throw ConfigError("base_h must be positive");
  if (!(omega > 0.0)) throw ConfigError("omega must be positive");
  forward().validate();
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  adaptive.validate();
  ImmersingConfig{pipeline.beta}.validate();
  if (!(pipeline.delta > 0.0 && pipeline.delta < 1.0)) throw ConfigError("pipeline.delta must lie in (0, 1)");
  if (!(pipeline.noise_level >= 0.0 && pipeline.noise_level < 1.0))
    throw ConfigError("pipeline.noise_level must lie in [0, 1)");
  if (!(twin.inclusion_eps >= kEpsMin && twin.inclusion_eps <= kEpsMax))
    throw ConfigError("twin.inclusion_eps outside [1, 25]");
  if (!(twin.glob_sigma > 0.0)) throw ConfigError("twin.glob_sigma must be positive");
  for (int n : snapshots)
    if (n < 0 || n > forward().time_grid.n_steps) throw ConfigError("snapshot sample out of range");
}

std::string RunConfig::to_json() const {
  const LineSearchConfig& ls = adaptive.cg.line_search;
  json j;
  j["domain"] = {{"g", box_json(domain.g_bounds)},
                 {"omega", box_json(domain.omega_bounds)},
                 {"gamma_z", domain.gamma_z},
                 {"source_z", domain.source_z},
                 {"base_h", base_h}};
  j["waveform"] = {{"omega", omega}};
  j["time"] = {{"t_final", time.t_final}, {"dt", time.dt}};
  j["physics"] = {{"s", s}};
  j["tikhonov"] = {{"gamma", gamma}};
  j["cg"] = {{"theta", adaptive.cg.theta},
             {"max_iters", adaptive.cg.max_iters},
             {"alpha0", ls.alpha0},
             {"backtrack", ls.backtrack},
             {"armijo_c", ls.c},
             {"max_trials", ls.max_trials},
             {"eps_min", adaptive.cg.eps_min},
             {"eps_max", adaptive.cg.eps_max},
             {"stable_tol", adaptive.cg.stable_tol},
             {"stable_window", adaptive.cg.stable_window}};
  j["adaptive"] = {{"beta1", adaptive.beta1}, {"max_refinements", adaptive.max_refinements}};
  j["pipeline"] = {{"beta", pipeline.beta},
                   {"delta", pipeline.delta},
                   {"noise_level", pipeline.noise_level},
                   {"data_plane_z", pipeline.data_plane_z ? json(*pipeline.data_plane_z) : json(nullptr)}};
  j["twin"] = {{"inclusion", box_json(twin.inclusion)},
               {"inclusion_eps", twin.inclusion_eps},
               {"glob_sigma", twin.glob_sigma}};
  j["paths"] = {{"eps", paths.eps},           {"eps_true", paths.eps_true}, {"eps_glob", paths.eps_glob},
                {"data", paths.data},         {"record", paths.record},     {"out", paths.out}};
  j["snapshots"] = snapshots;
  j["rng_seed"] = rng_seed;
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  RunConfig c;
  Section root(j, "");
  {
    auto s = root.sub("domain");
    s.get("g", c.domain.g_bounds);
    s.get("omega", c.domain.omega_bounds);
    s.get("gamma_z", c.domain.gamma_z);
    s.get("source_z", c.domain.source_z);
    s.get("base_h", c.base_h);
    s.finish();
  }
  {
    auto s = root.sub("waveform");
    s.get("omega", c.omega);
    s.finish();
  }
  {
    auto s = root.sub("time");
    s.get("t_final", c.time.t_final);
    s.get("dt", c.time.dt);
    s.finish();
  }
  {
    auto s = root.sub("physics");
    s.get("s", c.s);
    s.finish();
  }
  {
    auto s = root.sub("tikhonov");
    s.get("gamma", c.gamma);
    s.finish();
  }
  {
    auto s = root.sub("cg");
    CgConfig& g = c.adaptive.cg;
    s.get("theta", g.theta);
    s.get("max_iters", g.max_iters);
    s.get("alpha0", g.line_search.alpha0);
    s.get("backtrack", g.line_search.backtrack);
    s.get("armijo_c", g.line_search.c);
    s.get("max_trials", g.line_search.max_trials);
    s.get("eps_min", g.eps_min);
    s.get("eps_max", g.eps_max);
    s.get("stable_tol", g.stable_tol);
    s.get("stable_window", g.stable_window);
    s.finish();
  }
  {
    auto s = root.sub("adaptive");
    s.get("beta1", c.adaptive.beta1);
    s.get("max_refinements", c.adaptive.max_refinements);
    s.finish();
  }
  {
    auto s = root.sub("pipeline");
    s.get("beta", c.pipeline.beta);
    s.get("delta", c.pipeline.delta);
    s.get("noise_level", c.pipeline.noise_level);
    s.get("data_plane_z", c.pipeline.data_plane_z);
    s.finish();
  }
  {
    auto s = root.sub("twin");
    s.get("inclusion", c.twin.inclusion);
    s.get("inclusion_eps", c.twin.inclusion_eps);
    s.get("glob_sigma", c.twin.glob_sigma);
    s.finish();
  }
  {
    auto s = root.sub("paths");
    s.get("eps", c.paths.eps);
    s.get("eps_true", c.paths.eps_true);
    s.get("eps_glob", c.paths.eps_glob);
    s.get("data", c.paths.data);
    s.get("record", c.paths.record);
    s.get("out", c.paths.out);
    s.finish();
  }
  root.get("snapshots", c.snapshots);
  root.get("rng_seed", c.rng_seed);
  root.finish();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string Manifest::to_json() const {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["config_hash"] = config_hash;
  j["stop_reason"] = stop_reason;
  j["threads"] = threads;
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

}  // namespace epsrecon
