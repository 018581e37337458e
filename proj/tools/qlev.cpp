// qlev trace|scan|crit|render --config <path> [--out <dir>] [--svg] [--seed <u64>]
#include <cstdint>
#include <string>

#include <CLI11.hpp>

#include "qlev/cli_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Level curves of quasiperiodic functions on 2-planes"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  bool svg = false;
  std::uint64_t seed = 0;

  for (const char* name : {"trace", "scan", "crit", "render"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "run config (JSON)")->required();
    sub->add_option("--out", out, "output directory (default: output.dir of the config)");
    sub->add_flag("--svg", svg, "also write SVG figures");
    sub->add_option("--seed", seed, "seed for the offset jitter");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const CLI::App* sub = app.get_subcommands().front();
  qlev::CommandOptions opts;
  if (!out.empty()) opts.outDir = out;
  opts.svg = svg;
  if (sub->count("--seed") > 0) opts.seed = seed;
  return qlev::runCommand(sub->get_name(), config, opts);
}
