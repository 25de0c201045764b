#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tinbc/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Discrete-signaling broadcast design, rate regions and link checks"};
  app.require_subcommand(1);

  tinbc::CommandOptions opts;
  std::string config, out;
  std::uint64_t seed = 0, samples = 0;
  const char* names[] = {"design", "rate-region", "benchmark", "simulate", "validate"};
  const char* help[] = {"rank feasible modulation-order designs", "QAM/TIN points plus benchmark frontiers",
                        "Gaussian and shell benchmark grid", "uncoded BER and information-density checks",
                        "run the property suite"};
  for (int i = 0; i < 5; ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    auto* c = sub->add_option("--config", config, "experiment config (JSON)")->check(CLI::ExistingFile);
    if (std::string(names[i]) != "validate") c->required();
    sub->add_option("--out", out, "output CSV file (default stdout)");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--samples", samples, "override the noise sample count");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : tinbc::kExitConfig;
  }
  auto* sub = app.get_subcommands().front();
  if (!config.empty()) opts.config = config;
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--samples")) opts.samples = samples;

  if (out.empty()) return tinbc::run_command(sub->get_name(), opts, std::cout, std::cerr);
  std::ofstream f(out, std::ios::binary);
  if (!f) {
    std::cerr << "cannot open " << out << "\n";
    return tinbc::kExitConfig;
  }
  return tinbc::run_command(sub->get_name(), opts, f, std::cerr);
}
