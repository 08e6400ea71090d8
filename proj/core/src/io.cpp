#include "ymca/io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "ymca/error.hpp"
#include "ymca/format.hpp"

namespace ymca {

using json = nlohmann::ordered_json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError(where + "." + key + " must be a non-negative integer");
      }
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + "." + key + " must be true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
    }
    out = v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

json band_json(const YieldBand& b) { return json::array({b.lo, b.hi}); }

YieldBand parse_band(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(where + " must be a [lo, hi] pair");
  }
  YieldBand b{j[0].get<double>(), j[1].get<double>()};
  if (!(b.lo >= 0.0 && b.lo <= b.hi && b.hi <= 1.0)) throw ConfigError(where + " must satisfy 0 <= lo <= hi <= 1");
  return b;
}

json corner_json(const CornerSpec& c, bool with_encoding) {
  json j;
  j["id"] = c.id;
  j["voltage"] = c.voltage;
  j["temperature"] = c.temperature;
  j["process"] = c.process;
  if (with_encoding) j["encoding"] = std::vector<double>(c.encoding.data(), c.encoding.data() + c.encoding.size());
  return j;
}

CornerSpec parse_corner(const json& j, const std::string& where, bool with_encoding) {
  if (with_encoding) {
    check_keys(j, {"id", "voltage", "temperature", "process", "encoding"}, where);
  } else {
    check_keys(j, {"id", "voltage", "temperature", "process"}, where);
  }
  CornerSpec c;
  if (!j.contains("id")) throw ConfigError(where + " needs an id");
  read(j, "id", c.id, where);
  read(j, "voltage", c.voltage, where);
  read(j, "temperature", c.temperature, where);
  read(j, "process", c.process, where);
  if (with_encoding && j.contains("encoding")) {
    const auto v = j.at("encoding").get<std::vector<double>>();
    c.encoding = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return c;
}

json family_json(const SramLikeFamily& f) {
  json j;
  j["dimension"] = f.dimension;
  j["support_size"] = f.support_size;
  j["coupling"] = f.coupling;
  j["quadratic"] = f.quadratic;
  j["interactions"] = f.interactions;
  j["nonlinear_strength"] = f.nonlinear_strength;
  json corners = json::array();
  for (const auto& c : f.corners) corners.push_back(corner_json(c, false));
  j["corners"] = corners;
  json bands = json::object();
  for (const auto& [id, b] : f.bands) bands[id] = band_json(b);
  j["bands"] = bands;
  j["default_band"] = band_json(f.default_band);
  j["golden_samples"] = f.golden_samples;
  return j;
}

SramLikeFamily parse_family(const json& j) {
  const std::string w = "family";
  check_keys(j, {"dimension", "support_size", "coupling", "quadratic", "interactions", "nonlinear_strength",
                 "corners", "bands", "default_band", "golden_samples"},
             w);
  SramLikeFamily f;
  read(j, "dimension", f.dimension, w);
  read(j, "support_size", f.support_size, w);
  read(j, "coupling", f.coupling, w);
  read(j, "quadratic", f.quadratic, w);
  read(j, "interactions", f.interactions, w);
  read(j, "nonlinear_strength", f.nonlinear_strength, w);
  read(j, "golden_samples", f.golden_samples, w);
  if (j.contains("corners")) {
    if (!j["corners"].is_array() || j["corners"].empty()) throw ConfigError("family.corners must be a nonempty array");
    f.corners.clear();
    for (std::size_t i = 0; i < j["corners"].size(); ++i) {
      f.corners.push_back(parse_corner(j["corners"][i], "family.corners[" + std::to_string(i) + "]", false));
    }
  }
  if (j.contains("bands")) {
    if (!j["bands"].is_object()) throw ConfigError("family.bands must be an object");
    for (const auto& [id, b] : j["bands"].items()) f.bands[id] = parse_band(b, "family.bands." + id);
  }
  if (j.contains("default_band")) f.default_band = parse_band(j["default_band"], "family.default_band");
  if (f.dimension < 1 || f.support_size < 1 || f.support_size > f.dimension) {
    throw ConfigError("family needs 1 <= support_size <= dimension");
  }
  if (!(f.coupling >= 0.0 && f.coupling <= 1.0)) throw ConfigError("family.coupling must lie in [0, 1]");
  if (f.golden_samples < 1) throw ConfigError("family.golden_samples must be positive");
  for (const auto& [id, b] : f.bands) {
    bool found = false;
    for (const auto& c : f.corners) found = found || c.id == id;
    if (!found) throw ConfigError("family.bands names unknown corner '" + id + "'");
  }
  encode_corners(f.corners);
  return f;
}

json run_json(const RunConfig& r) {
  json j;
  j["total_budget"] = r.total_budget;
  j["initial_per_corner"] = r.initial_per_corner;
  j["batch_size"] = r.batch_size;
  j["epsilon"] = r.epsilon;
  j["patience"] = r.patience;
  j["mc_samples"] = r.mc_samples;
  j["yield_mode"] = to_string(r.yield_mode);
  j["sampling"] = to_string(r.sampling);
  j["pool_size"] = r.pool_size;
  j["selection_threshold"] = r.selection_threshold;
  j["reference_samples_per_corner"] = r.reference_samples_per_corner;
  return j;
}

RunConfig parse_run(const json& j) {
  const std::string w = "run";
  check_keys(j, {"total_budget", "initial_per_corner", "batch_size", "epsilon", "patience", "mc_samples",
                 "yield_mode", "sampling", "pool_size", "selection_threshold", "reference_samples_per_corner"},
             w);
  RunConfig r;
  read(j, "total_budget", r.total_budget, w);
  read(j, "initial_per_corner", r.initial_per_corner, w);
  read(j, "batch_size", r.batch_size, w);
  read(j, "epsilon", r.epsilon, w);
  read(j, "patience", r.patience, w);
  read(j, "mc_samples", r.mc_samples, w);
  read(j, "pool_size", r.pool_size, w);
  read(j, "selection_threshold", r.selection_threshold, w);
  read(j, "reference_samples_per_corner", r.reference_samples_per_corner, w);
  std::string s;
  if (j.contains("yield_mode")) {
    read(j, "yield_mode", s, w);
    r.yield_mode = yield_mode_from_string(s);
  }
  if (j.contains("sampling")) {
    read(j, "sampling", s, w);
    r.sampling = sampling_from_string(s);
  }
  return r;
}

json ablation_json(const AblationConfig& a) {
  json j;
  j["samples_per_corner"] = a.samples_per_corner;
  j["seeds"] = a.seeds;
  j["mc_samples"] = a.mc_samples;
  j["yield_mode"] = to_string(a.yield_mode);
  return j;
}

AblationConfig parse_ablation(const json& j) {
  const std::string w = "ablation";
  check_keys(j, {"samples_per_corner", "seeds", "mc_samples", "yield_mode"}, w);
  AblationConfig a;
  read(j, "samples_per_corner", a.samples_per_corner, w);
  read(j, "seeds", a.seeds, w);
  read(j, "mc_samples", a.mc_samples, w);
  if (j.contains("yield_mode")) {
    std::string s;
    read(j, "yield_mode", s, w);
    a.yield_mode = yield_mode_from_string(s);
  }
  return a;
}

std::string prior_kind_string(PriorKind k) {
  switch (k) {
    case PriorKind::Gp: return "gp";
    case PriorKind::Mlp: return "mlp";
    case PriorKind::Mixture: return "mixture";
  }
  return "mixture";
}

json meta_json(const MetaTrainConfig& m) {
  json j;
  j["model"] = {{"d_model", m.model.d_model}, {"n_heads", m.model.n_heads}, {"n_layers", m.model.n_layers},
                {"d_ff", m.model.d_ff}, {"max_features", m.model.max_features}, {"max_context", m.model.max_context}};
  json prior;
  prior["kind"] = prior_kind_string(m.prior.kind);
  prior["gp_fraction"] = m.prior.gp_fraction;
  prior["lengthscale_min"] = m.prior.lengthscale_min;
  prior["lengthscale_max"] = m.prior.lengthscale_max;
  prior["noise_max"] = m.prior.noise_max;
  prior["noise_std"] = m.prior.noise_std ? json(*m.prior.noise_std) : json(nullptr);
  j["prior"] = prior;
  j["steps"] = m.steps;
  j["batch_size"] = m.batch_size;
  j["learning_rate"] = m.learning_rate;
  j["warmup_steps"] = m.warmup_steps;
  j["grad_clip"] = m.grad_clip;
  j["min_dim"] = m.min_dim;
  j["max_dim"] = m.max_dim;
  j["wide_fraction"] = m.wide_fraction;
  j["min_context"] = m.min_context;
  j["max_context"] = m.max_context;
  j["queries"] = m.queries;
  j["validation_tasks"] = m.validation_tasks;
  j["validation_every"] = m.validation_every;
  return j;
}

MetaTrainConfig parse_meta(const json& j) {
  const std::string w = "meta_train";
  check_keys(j, {"model", "prior", "steps", "batch_size", "learning_rate", "warmup_steps", "grad_clip", "min_dim",
                 "max_dim", "wide_fraction", "min_context", "max_context", "queries", "validation_tasks",
                 "validation_every"},
             w);
  MetaTrainConfig m;
  if (j.contains("model")) {
    const json& a = j["model"];
    const std::string wm = "meta_train.model";
    check_keys(a, {"d_model", "n_heads", "n_layers", "d_ff", "max_features", "max_context"}, wm);
    read(a, "d_model", m.model.d_model, wm);
    read(a, "n_heads", m.model.n_heads, wm);
    read(a, "n_layers", m.model.n_layers, wm);
    read(a, "d_ff", m.model.d_ff, wm);
    read(a, "max_features", m.model.max_features, wm);
    read(a, "max_context", m.model.max_context, wm);
  }
  if (j.contains("prior")) {
    const json& p = j["prior"];
    const std::string wp = "meta_train.prior";
    check_keys(p, {"kind", "gp_fraction", "lengthscale_min", "lengthscale_max", "noise_max", "noise_std"}, wp);
    if (p.contains("kind")) {
      std::string k;
      read(p, "kind", k, wp);
      if (k == "gp") m.prior.kind = PriorKind::Gp;
      else if (k == "mlp") m.prior.kind = PriorKind::Mlp;
      else if (k == "mixture") m.prior.kind = PriorKind::Mixture;
      else throw ConfigError("meta_train.prior.kind must be gp, mlp or mixture");
    }
    read(p, "gp_fraction", m.prior.gp_fraction, wp);
    read(p, "lengthscale_min", m.prior.lengthscale_min, wp);
    read(p, "lengthscale_max", m.prior.lengthscale_max, wp);
    read(p, "noise_max", m.prior.noise_max, wp);
    if (p.contains("noise_std") && !p["noise_std"].is_null()) {
      double v = 0.0;
      read(p, "noise_std", v, wp);
      m.prior.noise_std = v;
    }
  }
  read(j, "steps", m.steps, w);
  read(j, "batch_size", m.batch_size, w);
  read(j, "learning_rate", m.learning_rate, w);
  read(j, "warmup_steps", m.warmup_steps, w);
  read(j, "grad_clip", m.grad_clip, w);
  read(j, "min_dim", m.min_dim, w);
  read(j, "max_dim", m.max_dim, w);
  read(j, "wide_fraction", m.wide_fraction, w);
  read(j, "min_context", m.min_context, w);
  read(j, "max_context", m.max_context, w);
  read(j, "queries", m.queries, w);
  read(j, "validation_tasks", m.validation_tasks, w);
  read(j, "validation_every", m.validation_every, w);
  m.validate();
  return m;
}

json surrogate_json(const SurrogateSettings& s) {
  json j;
  j["kind"] = to_string(s.kind);
  j["checkpoint"] = s.checkpoint;
  j["gp"] = {{"restarts", s.gp.restarts}, {"steps", s.gp.steps}, {"learning_rate", s.gp.learning_rate}};
  return j;
}

SurrogateSettings parse_surrogate(const json& j) {
  const std::string w = "surrogate";
  check_keys(j, {"kind", "checkpoint", "gp"}, w);
  SurrogateSettings s;
  if (j.contains("kind")) {
    std::string k;
    read(j, "kind", k, w);
    if (k == "pfn") s.kind = SurrogateKind::Pfn;
    else if (k == "gp") s.kind = SurrogateKind::Gp;
    else if (k == "oracle") s.kind = SurrogateKind::Oracle;
    else throw ConfigError("surrogate.kind must be pfn, gp or oracle");
  }
  read(j, "checkpoint", s.checkpoint, w);
  if (j.contains("gp")) {
    const std::string wg = "surrogate.gp";
    check_keys(j["gp"], {"restarts", "steps", "learning_rate"}, wg);
    read(j["gp"], "restarts", s.gp.restarts, wg);
    read(j["gp"], "steps", s.gp.steps, wg);
    read(j["gp"], "learning_rate", s.gp.learning_rate, wg);
    if (s.gp.restarts < 1 || s.gp.steps < 0 || !(s.gp.learning_rate > 0.0)) {
      throw ConfigError("surrogate.gp needs restarts >= 1, steps >= 0, learning_rate > 0");
    }
  }
  return s;
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["family"] = family_json(c.family);
  j["problem"] = c.problem;
  j["surrogate"] = surrogate_json(c.surrogate);
  j["run"] = run_json(c.run);
  j["ablation"] = ablation_json(c.ablation);
  j["meta_train"] = meta_json(c.meta_train);
  return j;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + " is not valid JSON: " + e.what());
  }
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string run_label(const RunManifest& r, std::size_t index) {
  return "run" + std::to_string(index + 1) + "_" + r.surrogate;
}

}  // namespace

std::string to_string(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::Pfn: return "pfn";
    case SurrogateKind::Gp: return "gp";
    case SurrogateKind::Oracle: return "oracle";
  }
  return "pfn";
}

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  const json j = parse_json(text, "configuration");
  check_keys(j, {"seed", "family", "problem", "surrogate", "run", "ablation", "meta_train"}, "configuration");
  ExperimentConfig c;
  c.base_dir = base_dir;
  read(j, "seed", c.seed, "configuration");
  if (j.contains("family")) c.family = parse_family(j["family"]);
  else encode_corners(c.family.corners);
  read(j, "problem", c.problem, "configuration");
  if (j.contains("surrogate")) c.surrogate = parse_surrogate(j["surrogate"]);
  if (j.contains("run")) c.run = parse_run(j["run"]);
  if (j.contains("ablation")) c.ablation = parse_ablation(j["ablation"]);
  if (j.contains("meta_train")) c.meta_train = parse_meta(j["meta_train"]);
  // With a problem file the corner count is only known once it is loaded.
  if (c.problem.empty()) c.run.validate(c.family.corners.size());
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string canonical_config(const ExperimentConfig& config) { return config_json(config).dump(); }

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string provenance_line(const std::string& hash, std::uint64_t seed) {
  return "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n";
}

std::string problem_to_json(const BenchmarkProblem& problem, const std::string& hash) {
  json j;
  j["schema"] = "ymca-problem";
  j["version"] = kProblemVersion;
  j["config_hash"] = hash;
  j["seed"] = problem.seed;
  j["family"] = family_json(problem.family);
  json corners = json::array();
  for (const auto& c : problem.corners) corners.push_back(corner_json(c, true));
  j["corners"] = corners;
  json specs = json::object();
  for (std::size_t k = 0; k < problem.corner_count(); ++k) specs[problem.corners[k].id] = problem.specs[k];
  j["specs"] = specs;
  std::vector<Eigen::Index> support;
  for (Eigen::Index s : problem.support) support.push_back(s + 1);
  j["support"] = support;
  json models = json::array();
  for (std::size_t k = 0; k < problem.corner_count(); ++k) {
    const CornerModel& m = problem.models[k];
    json mj;
    mj["corner"] = problem.corners[k].id;
    mj["offset"] = m.offset;
    std::vector<double> w;
    for (Eigen::Index s : problem.support) w.push_back(m.weights[s]);
    mj["weights"] = w;
    json inter = json::array();
    for (Eigen::Index r = 0; r < m.interaction.rows(); ++r) {
      inter.push_back(to_vector(m.interaction.row(r).transpose()));
    }
    mj["interaction"] = inter;
    mj["quadratic"] = to_vector(m.quadratic);
    models.push_back(mj);
  }
  j["models"] = models;
  json golden = json::object();
  for (std::size_t k = 0; k < problem.corner_count(); ++k) {
    const GoldenYield& g = problem.golden[k];
    golden[problem.corners[k].id] = {{"value", g.value},
                                     {"std_error", g.std_error},
                                     {"provenance", to_string(g.provenance)},
                                     {"samples", g.samples}};
  }
  j["golden"] = golden;
  return j.dump(2) + "\n";
}

BenchmarkProblem problem_from_json(const std::string& text) {
  const json j = parse_json(text, "problem document");
  if (!j.is_object() || j.value("schema", std::string{}) != "ymca-problem") {
    throw SchemaError("not a problem document");
  }
  if (j.value("version", -1) != kProblemVersion) {
    throw SchemaError("problem document version " + j.value("version", json(nullptr)).dump() +
                      " is not supported (expected " + std::to_string(kProblemVersion) + ")");
  }
  try {
    BenchmarkProblem p;
    p.seed = j.at("seed").get<std::uint64_t>();
    p.family = parse_family(j.at("family"));
    const Eigen::Index d = p.family.dimension;
    for (std::size_t i = 0; i < j.at("corners").size(); ++i) {
      p.corners.push_back(parse_corner(j["corners"][i], "corners[" + std::to_string(i) + "]", true));
    }
    for (const auto& c : p.corners) p.specs.push_back(j.at("specs").at(c.id).get<double>());
    for (Eigen::Index s : j.at("support").get<std::vector<Eigen::Index>>()) {
      if (s < 1 || s > d) throw SchemaError("support index out of range");
      p.support.push_back(s - 1);
    }
    const auto& models = j.at("models");
    if (models.size() != p.corners.size()) throw SchemaError("one model per corner is required");
    for (std::size_t k = 0; k < models.size(); ++k) {
      const json& mj = models[k];
      CornerModel m;
      m.offset = mj.at("offset").get<double>();
      m.weights = Eigen::VectorXd::Zero(d);
      const auto w = mj.at("weights").get<std::vector<double>>();
      if (w.size() != p.support.size()) throw SchemaError("weights must align with the support");
      for (std::size_t i = 0; i < w.size(); ++i) m.weights[p.support[i]] = w[i];
      const auto s = static_cast<Eigen::Index>(p.support.size());
      const auto& inter = mj.at("interaction");
      m.interaction = Eigen::MatrixXd::Zero(inter.empty() ? 0 : s, inter.empty() ? 0 : s);
      for (std::size_t r = 0; r < inter.size(); ++r) {
        m.interaction.row(static_cast<Eigen::Index>(r)) = to_eigen(inter[r]).transpose();
      }
      m.quadratic = to_eigen(mj.at("quadratic"));
      p.models.push_back(std::move(m));
    }
    for (const auto& c : p.corners) {
      const json& g = j.at("golden").at(c.id);
      GoldenYield gy;
      gy.value = g.at("value").get<double>();
      gy.std_error = g.at("std_error").get<double>();
      gy.provenance = golden_mode_from_string(g.at("provenance").get<std::string>());
      gy.samples = g.at("samples").get<std::int64_t>();
      p.golden.push_back(gy);
    }
    return p;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed problem document: ") + e.what());
  }
}

BenchmarkProblem load_problem(const std::filesystem::path& path) {
  return problem_from_json(read_text(path));
}

std::string manifest_json(const ExperimentConfig& config, const BenchmarkProblem& problem,
                          const YieldReport& report) {
  json j;
  j["schema"] = "ymca-run-manifest";
  j["version"] = kManifestVersion;
  j["config_hash"] = config_hash(config);
  j["seed"] = config.seed;
  j["config"] = config_json(config);
  j["problem"] = {{"seed", problem.seed},
                  {"dimension", problem.dimension()},
                  {"corners", problem.corner_count()},
                  {"affine", problem.affine()}};
  j["surrogate"] = report.surrogate;
  j["sampling"] = to_string(config.run.sampling);
  std::vector<Eigen::Index> subset;
  for (Eigen::Index s : report.subset) subset.push_back(s + 1);
  j["subset"] = subset;
  if (report.selection) {
    j["selection"] = json::parse(selection_report_json(*report.selection));
    j["importance_overlap"] = report.importance_overlap;
  } else {
    j["selection"] = nullptr;
  }
  json trace = json::array();
  for (const auto& r : report.trace) {
    trace.push_back({{"round", r.round},
                     {"simulations", r.simulations},
                     {"context_size", r.context_size},
                     {"estimates", r.estimates},
                     {"max_change", std::isfinite(r.max_change) ? json(r.max_change) : json(nullptr)}});
  }
  j["trace"] = trace;
  json batches = json::array();
  for (std::size_t b = 0; b < report.batches.size(); ++b) {
    const auto& sel = report.batches[b];
    json picks = json::array();
    for (const auto& p : sel.picks) {
      picks.push_back({{"pool_index", p.pool_index},
                       {"corner", problem.corners[p.corner].id},
                       {"acquisition", p.acquisition},
                       {"penalty", p.penalty}});
    }
    batches.push_back({{"round", b + 1},
                       {"fallback", sel.fallback},
                       {"penalty_strength", sel.penalty_strength},
                       {"penalty_width", sel.penalty_width},
                       {"picks", picks}});
  }
  j["batches"] = batches;
  json corners = json::array();
  for (const auto& c : report.corners) {
    corners.push_back({{"id", c.id},
                       {"golden", c.golden},
                       {"estimate", c.estimate},
                       {"relative_error", c.error.percent},
                       {"capped", c.error.capped}});
  }
  j["report"] = {{"corners", corners},
                 {"mre", report.mre},
                 {"simulations", report.simulations},
                 {"reference_samples", report.reference_samples},
                 {"speedup", report.speedup},
                 {"converged", report.converged},
                 {"rounds", report.rounds}};
  return j.dump(2) + "\n";
}

RunManifest parse_manifest(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("schema", std::string{}) != "ymca-run-manifest") {
    throw SchemaError("not a run manifest");
  }
  if (j.value("version", -1) != kManifestVersion) {
    throw SchemaError("manifest schema version " + j.value("version", json(nullptr)).dump() +
                      " does not match supported version " + std::to_string(kManifestVersion));
  }
  try {
    RunManifest m;
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.surrogate = j.at("surrogate").get<std::string>();
    m.sampling = j.at("sampling").get<std::string>();
    const json& r = j.at("report");
    for (const auto& c : r.at("corners")) {
      m.corners.push_back({c.at("id").get<std::string>(), c.at("golden").get<double>(),
                           c.at("estimate").get<double>(), c.at("relative_error").get<double>(),
                           c.at("capped").get<bool>()});
    }
    m.mre = r.at("mre").get<double>();
    m.simulations = r.at("simulations").get<std::uint64_t>();
    m.reference_samples = r.at("reference_samples").get<std::int64_t>();
    m.speedup = r.at("speedup").get<double>();
    m.converged = r.at("converged").get<bool>();
    m.rounds = r.at("rounds").get<std::uint64_t>();
    for (const auto& t : j.at("trace")) {
      RoundRecord rec;
      rec.round = t.at("round").get<std::size_t>();
      rec.simulations = t.at("simulations").get<std::size_t>();
      rec.context_size = t.at("context_size").get<std::size_t>();
      rec.estimates = t.at("estimates").get<std::vector<double>>();
      rec.max_change = t.at("max_change").is_null() ? std::nan("") : t.at("max_change").get<double>();
      m.trace.push_back(std::move(rec));
    }
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed run manifest: ") + e.what());
  }
}

RunManifest load_manifest(const std::filesystem::path& path) { return parse_manifest(read_text(path)); }

std::string report_csv(std::span<const RunManifest> runs) {
  std::ostringstream out;
  for (const auto& r : runs) out << provenance_line(r.config_hash, r.seed);
  // Corner rows in order of first appearance.
  std::vector<std::string> ids;
  for (const auto& r : runs) {
    for (const auto& c : r.corners) {
      if (std::find(ids.begin(), ids.end(), c.id) == ids.end()) ids.push_back(c.id);
    }
  }
  auto find = [](const RunManifest& r, const std::string& id) -> const ManifestCorner* {
    for (const auto& c : r.corners) {
      if (c.id == id) return &c;
    }
    return nullptr;
  };
  bool shared = true;
  for (const auto& id : ids) {
    std::optional<double> g;
    for (const auto& r : runs) {
      const ManifestCorner* c = find(r, id);
      if (!c) {
        shared = false;
        continue;
      }
      if (g && *g != c->golden) shared = false;
      g = c->golden;
    }
  }
  out << "corner";
  if (shared) out << ",golden";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::string label = run_label(runs[i], i);
    if (!shared) out << ',' << label << "_golden";
    out << ',' << label << "_estimate," << label << "_relative_error";
  }
  out << '\n';
  for (const auto& id : ids) {
    out << csv_field(id);
    if (shared) out << ',' << format_double(find(runs[0], id)->golden);
    for (const auto& r : runs) {
      const ManifestCorner* c = find(r, id);
      if (!shared) out << ',' << (c ? format_double(c->golden) : "");
      if (c) {
        out << ',' << format_double(c->estimate) << ','
            << RelativeError{c->error, c->capped}.text();
      } else {
        out << ",,";
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string summary_csv(std::span<const RunManifest> runs) {
  std::ostringstream out;
  for (const auto& r : runs) out << provenance_line(r.config_hash, r.seed);
  out << "run,surrogate,sampling,mre,simulations,reference_samples,speedup,rounds,status\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    out << run_label(r, i) << ',' << r.surrogate << ',' << r.sampling << ',' << format_fixed(r.mre, 2) << ','
        << r.simulations << ',' << r.reference_samples << ',' << format_fixed(r.speedup, 2) << ',' << r.rounds
        << ',' << (r.converged ? "converged" : "non-converged (budget exhausted)") << '\n';
  }
  return out.str();
}

std::string trace_csv(const RunManifest& run) {
  std::ostringstream out;
  out << provenance_line(run.config_hash, run.seed);
  out << "round,simulations,context_size";
  for (const auto& c : run.corners) out << ',' << csv_field(c.id);
  out << ",max_change\n";
  for (const auto& t : run.trace) {
    out << t.round << ',' << t.simulations << ',' << t.context_size;
    for (double e : t.estimates) out << ',' << format_double(e);
    out << ',' << (std::isfinite(t.max_change) ? format_double(t.max_change) : "") << '\n';
  }
  return out.str();
}

std::string ablation_csv(const AblationTable& table, const std::string& hash, std::uint64_t seed) {
  std::ostringstream out;
  out << provenance_line(hash, seed);
  const std::size_t k = table.corners.size();
  out << "target";
  for (std::size_t l = 0; l < k; ++l) out << ",pooled_" << l;
  out << ",change_percent\n";
  for (std::size_t t = 0; t < k; ++t) {
    out << csv_field(table.corners[t]);
    for (std::size_t l = 0; l < k; ++l) out << ',' << format_fixed(table.errors[t][l], 2);
    const double base = table.errors[t][0];
    const double full = table.errors[t][k - 1];
    out << ',' << (base > 0.0 ? format_fixed(100.0 * (full - base) / base, 1) : "") << '\n';
  }
  return out.str();
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace ymca
