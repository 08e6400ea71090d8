#include "commands.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <iostream>
#include <memory>
#include <sstream>

#include "ymca/bench.hpp"
#include "ymca/dataset.hpp"
#include "ymca/error.hpp"
#include "ymca/featsel.hpp"
#include "ymca/format.hpp"
#include "ymca/gp.hpp"
#include "ymca/io.hpp"
#include "ymca/pfn.hpp"
#include "ymca/pipeline.hpp"
#include "ymca/stats.hpp"

namespace ymca::cli {
namespace {

struct Loaded {
  ExperimentConfig config;
  std::string hash;
};

Loaded load(const CommonOptions& opt) {
  if (!std::filesystem::exists(opt.config)) {
    throw ConfigError("configuration file " + opt.config.string() + " does not exist");
  }
  Loaded l{load_config(opt.config), {}};
  if (opt.seed) l.config.seed = *opt.seed;
  l.hash = config_hash(l.config);
  return l;
}

BenchmarkProblem problem_for(const ExperimentConfig& c) {
  if (c.problem.empty()) return generate_problem(c.family, c.seed);
  const auto path = c.resolve(c.problem);
  if (!std::filesystem::exists(path)) throw ConfigError("problem file " + path.string() + " does not exist");
  return load_problem(path);
}

std::unique_ptr<Surrogate> surrogate_for(const ExperimentConfig& c, const BenchmarkProblem& problem) {
  switch (c.surrogate.kind) {
    case SurrogateKind::Pfn: {
      if (c.surrogate.checkpoint.empty()) throw ConfigError("surrogate.checkpoint is required for the pfn surrogate");
      const auto path = c.resolve(c.surrogate.checkpoint);
      if (!std::filesystem::exists(path)) throw ConfigError("checkpoint " + path.string() + " does not exist");
      auto model = std::make_shared<const PfnModel>(PfnModel::load(path));
      if (problem.encoding_size() >= model->config().max_features) {
        throw ConfigError("checkpoint max_features " + std::to_string(model->config().max_features) +
                          " cannot hold the corner encoding of this problem");
      }
      return std::make_unique<PfnSurrogate>(std::move(model));
    }
    case SurrogateKind::Gp: {
      GpOptions o = c.surrogate.gp;
      o.seed = derive_seed(c.seed, 11);
      return std::make_unique<GpSurrogate>(o);
    }
    case SurrogateKind::Oracle:
      return std::make_unique<OracleSurrogate>(problem);
  }
  throw ConfigError("unknown surrogate kind");
}

/// Prints delimited text as an aligned table, skipping comment lines.
void print_table(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::cout << r[i];
      if (i + 1 < r.size()) std::cout << std::string(width[i] - r[i].size() + 2, ' ');
    }
    std::cout << '\n';
  }
}

std::string with_provenance(const std::string& json_text, const std::string& hash, std::uint64_t seed) {
  auto j = nlohmann::ordered_json::parse(json_text);
  nlohmann::ordered_json out;
  out["config_hash"] = hash;
  out["seed"] = seed;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value();
  return out.dump(2) + "\n";
}

}  // namespace

int gen_bench(const CommonOptions& opt) {
  const Loaded l = load(opt);
  std::cerr << "generating problem (D=" << l.config.family.dimension << ", s=" << l.config.family.support_size
            << ", seed=" << l.config.seed << ")\n";
  const BenchmarkProblem p = generate_problem(l.config.family, l.config.seed);
  write_text(opt.out / "problem.json", problem_to_json(p, l.hash));
  std::ostringstream t;
  t << "corner,voltage,temperature,spec,golden_yield,provenance\n";
  for (std::size_t k = 0; k < p.corner_count(); ++k) {
    t << p.corners[k].id << ',' << format_double(p.corners[k].voltage) << ','
      << format_double(p.corners[k].temperature) << ',' << format_fixed(p.specs[k], 6) << ','
      << format_fixed(p.golden[k].value, 6) << ',' << to_string(p.golden[k].provenance) << '\n';
  }
  print_table(t.str());
  return 0;
}

int meta_train(const CommonOptions& opt) {
  const Loaded l = load(opt);
  MetaTrainConfig mc = l.config.meta_train;
  mc.seed = l.config.seed;
  std::cerr << "meta-training " << mc.steps << " steps x " << mc.batch_size << " tasks\n";
  MetaTrainResult r = meta_train(mc, [](const TrainLogRow& row) {
    if (std::isfinite(row.validation_nll)) {
      std::cerr << "step " << row.step << " train_nll " << format_fixed(row.train_nll, 4) << " validation_nll "
                << format_fixed(row.validation_nll, 4) << '\n';
    }
  });
  PfnProvenance prov = r.model.provenance();
  prov.config_hash = l.hash;
  const PfnModel model(r.model.config(), r.model.weights(), prov);
  std::filesystem::create_directories(opt.out);
  model.save(opt.out / "model.bin");
  std::ostringstream log;
  log << provenance_line(l.hash, l.config.seed);
  write_training_log(log, r.log);
  write_text(opt.out / "training_log.csv", log.str());

  std::ostringstream t;
  t << "steps,tasks,parameters,final_train_nll,final_validation_nll\n";
  const double val = r.log.empty() ? std::nan("") : r.log.back().validation_nll;
  t << mc.steps << ',' << mc.task_count() << ',' << model.parameter_count() << ','
    << (r.log.empty() ? std::string("") : format_fixed(r.log.back().train_nll, 4)) << ','
    << (std::isfinite(val) ? format_fixed(val, 4) : std::string("")) << '\n';
  print_table(t.str());
  return 0;
}

int run(const CommonOptions& opt) {
  const Loaded l = load(opt);
  const BenchmarkProblem problem = problem_for(l.config);
  const auto surrogate = surrogate_for(l.config, problem);
  RunConfig rc = l.config.run;
  rc.seed = l.config.seed;
  std::cerr << "run: surrogate " << surrogate->name() << ", D=" << problem.dimension() << ", K="
            << problem.corner_count() << ", budget " << rc.total_budget << '\n';
  const YieldReport report = run_pipeline(problem, *surrogate, rc, [](const RoundRecord& r) {
    std::cerr << "round " << r.round << " simulations " << r.simulations << " max_change "
              << (std::isfinite(r.max_change) ? format_fixed(r.max_change, 6) : std::string("-")) << '\n';
  });

  const std::string manifest = manifest_json(l.config, problem, report);
  write_text(opt.out / "manifest.json", manifest);
  const RunManifest m = parse_manifest(manifest);
  const std::vector<RunManifest> one{m};
  const std::string rep = report_csv(one);
  const std::string sum = summary_csv(one);
  write_text(opt.out / "report.csv", rep);
  write_text(opt.out / "summary.csv", sum);
  write_text(opt.out / "trace.csv", trace_csv(m));
  std::ostringstream sel;
  sel << provenance_line(l.hash, l.config.seed);
  write_selection_log_header(sel);
  for (std::size_t b = 0; b < report.batches.size(); ++b) {
    write_selection_log(sel, b + 1, report.batches[b], problem.corners);
  }
  write_text(opt.out / "selection_log.csv", sel.str());
  if (report.selection) {
    write_text(opt.out / "feature_selection.json",
               with_provenance(selection_report_json(*report.selection), l.hash, l.config.seed));
  }
  print_table(rep);
  std::cout << '\n';
  print_table(sum);
  return 0;
}

int ablate(const CommonOptions& opt) {
  const Loaded l = load(opt);
  const BenchmarkProblem problem = problem_for(l.config);
  const auto surrogate = surrogate_for(l.config, problem);
  if (l.config.surrogate.kind == SurrogateKind::Pfn) {
    const auto* pfn = dynamic_cast<const PfnSurrogate*>(surrogate.get());
    if (pfn && static_cast<std::size_t>(problem.dimension() + problem.encoding_size()) > pfn->max_features()) {
      throw ConfigError("problem width D+p exceeds the checkpoint's max_features; the ablation uses all features");
    }
  }
  AblationConfig ac = l.config.ablation;
  ac.seed = l.config.seed;
  std::cerr << "ablation: " << ac.seeds << " seeds, " << ac.samples_per_corner << " samples per corner\n";
  const AblationTable table = ablation_cross_corner(problem, *surrogate, ac);
  const std::string csv = ablation_csv(table, l.hash, l.config.seed);
  write_text(opt.out / "ablation.csv", csv);
  print_table(csv);
  return 0;
}

int featsel(const CommonOptions& opt) {
  const Loaded l = load(opt);
  const BenchmarkProblem problem = problem_for(l.config);
  RunConfig rc = l.config.run;
  rc.seed = l.config.seed;
  const Dataset data = initialize(problem, rc);
  std::cerr << "feature selection on " << data.size() << " samples, D+p="
            << problem.dimension() + problem.encoding_size() << '\n';
  const FeatureSelection sel = select_features(data, problem.corners, derive_seed(rc.seed, 2));
  write_text(opt.out / "feature_selection.json",
             with_provenance(selection_report_json(sel), l.hash, l.config.seed));
  std::ostringstream ds;
  ds << provenance_line(l.hash, l.config.seed);
  write_dataset_csv(ds, data, problem.corners);
  write_text(opt.out / "dataset.csv", ds.str());

  const auto subset = sel.subset();
  std::size_t found = 0;
  for (Eigen::Index s : problem.support) found += std::binary_search(subset.begin(), subset.end(), s) ? 1 : 0;
  std::ostringstream t;
  t << "selected_width,process_features,best_k,validation_r2,support_recall\n";
  t << sel.width() << ',' << sel.selected.size() << ',' << sel.best_k << ','
    << (std::isfinite(sel.r2) ? format_fixed(sel.r2, 4) : std::string("")) << ','
    << format_fixed(problem.support.empty() ? 1.0 : static_cast<double>(found) / problem.support.size(), 3) << '\n';
  print_table(t.str());
  return 0;
}

int report(const std::vector<std::filesystem::path>& manifests, const std::optional<std::filesystem::path>& out) {
  std::vector<RunManifest> runs;
  for (const auto& p : manifests) runs.push_back(load_manifest(p));
  const std::string rep = report_csv(runs);
  const std::string sum = summary_csv(runs);
  if (out) {
    write_text(*out / "report.csv", rep);
    write_text(*out / "summary.csv", sum);
  }
  print_table(rep);
  std::cout << '\n';
  print_table(sum);
  return 0;
}

}  // namespace ymca::cli
