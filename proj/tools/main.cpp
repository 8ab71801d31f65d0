#include <iostream>

#include "CLI11.hpp"
#include "cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bi-anchor flow sampler lab"};
  app.set_version_flag("--version", bas::cli::kToolVersion);
  app.require_subcommand(1);

  bas::cli::CommandOptions options;
  std::string out;
  std::string config, backbone, sidenet, solver, fault;
  std::uint64_t seed = 0, nfe = 0;

  const char* commands[][2] = {
      {"train-backbone", "Train the flow-matching backbone"},
      {"train-sidenet", "Train the SideNet against a frozen backbone"},
      {"sample", "Draw samples with one solver"},
      {"bench", "Solver x N quality grid"},
      {"verify", "Run the numerical self-checks"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--inject-fault", fault)->group("");
    if (std::string(name) == "verify") continue;
    sub->add_option("--config", config, "Config JSON or manifest")->required();
    sub->add_option("--seed", seed, "Override this command's seed");
    if (std::string(name) == "sample" || std::string(name) == "bench") {
      sub->add_option("--solver", solver, "euler | heun | single_anchor | bi_anchor");
      sub->add_option("--nfe", nfe, "NFE budget per sample");
    }
    if (std::string(name) != "train-backbone") {
      sub->add_option("--backbone", backbone, "Backbone checkpoint");
    }
    if (std::string(name) == "sample" || std::string(name) == "bench") {
      sub->add_option("--sidenet", sidenet, "SideNet checkpoint");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return bas::cli::kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  auto given = [sub](const char* flag) {
    auto* opt = sub->get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--config")) options.config = config;
  if (given("--out")) {
    options.out = out;
    options.out_given = true;
  }
  if (given("--seed")) options.seed = seed;
  if (given("--solver")) options.solver = solver;
  if (given("--nfe")) options.nfe = nfe;
  if (given("--backbone")) options.backbone = backbone;
  if (given("--sidenet")) options.sidenet = sidenet;
  if (given("--inject-fault")) options.inject_fault = fault;
  return bas::cli::run_command(sub->get_name(), options, std::cout, std::cerr);
}
