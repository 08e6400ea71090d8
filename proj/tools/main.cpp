// ymca command-line entry point.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "ymca/error.hpp"

namespace {

void add_common(CLI::App* cmd, ymca::cli::CommonOptions& opt) {
  cmd->add_option("--config", opt.config, "configuration file (JSON)")->required();
  cmd->add_option("--seed", opt.seed, "override the configuration seed");
  cmd->add_option("--out", opt.out, "output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-corner yield analysis with an in-context surrogate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ymca 0.1.0");

  ymca::cli::CommonOptions gen, train, run, ablate, featsel;
  auto* c_gen = app.add_subcommand("gen-bench", "generate a synthetic benchmark problem");
  add_common(c_gen, gen);
  auto* c_train = app.add_subcommand("meta-train", "meta-train the in-context surrogate on the synthetic prior");
  add_common(c_train, train);
  auto* c_run = app.add_subcommand("run", "run the yield analysis loop");
  add_common(c_run, run);
  auto* c_ablate = app.add_subcommand("ablate", "cross-corner pooling ablation");
  add_common(c_ablate, ablate);
  auto* c_featsel = app.add_subcommand("featsel", "feature selection on the initial design");
  add_common(c_featsel, featsel);
  std::vector<std::filesystem::path> manifests;
  std::optional<std::filesystem::path> report_out;
  auto* c_report = app.add_subcommand("report", "merge run manifests into comparison tables");
  c_report->add_option("manifests", manifests, "run manifest files")->required()->check(CLI::ExistingFile);
  c_report->add_option("--out", report_out, "directory for report.csv and summary.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_gen) return ymca::cli::gen_bench(gen);
    if (*c_train) return ymca::cli::meta_train(train);
    if (*c_run) return ymca::cli::run(run);
    if (*c_ablate) return ymca::cli::ablate(ablate);
    if (*c_featsel) return ymca::cli::featsel(featsel);
    if (*c_report) return ymca::cli::report(manifests, report_out);
  } catch (const ymca::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const ymca::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
