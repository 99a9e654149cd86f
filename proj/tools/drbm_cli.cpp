#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "drbm/commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out;
  bool dry_run = false;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace drbm;
  CLI::App app{"Random balls driven by determinantal centers: sampling, scaling regimes, Laplace transforms"};
  app.require_subcommand(1);
  Flags flags;
  for (const auto& name : cli::command_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " command");
    sub->add_option("--config", flags.config, "JSON config; omitted keys take their printed defaults");
    sub->add_option("--seed", flags.seed, "root seed (overrides the config)");
    sub->add_option("--workers", flags.workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_option("--out", flags.out, "output directory (default out/<command>)");
    sub->add_flag("--dry-run", flags.dry_run, "print the plan and budget without sampling");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  cli::json cfg;
  try {
    cli::json user = flags.config.empty() ? cli::json::object() : io::read_json(flags.config);
    if (flags.seed) user["seed"] = *flags.seed;
    cfg = cli::resolve_config(command, user);
    if (flags.workers) {
      if (!cfg.contains("workers")) throw ConfigError("command '" + command + "' takes no --workers");
      cfg["workers"] = *flags.workers;
    }
  } catch (const std::exception& e) {
    std::cerr << "config: " << e.what() << "\n";
    return cli::kExitConfigError;
  }
  cli::RunContext ctx;
  ctx.out = flags.out.empty() ? std::filesystem::path("out") / command : std::filesystem::path(flags.out);
  ctx.dry_run = flags.dry_run;
  if (flags.dry_run) std::cout << cfg.dump(2) << "\n";
  return cli::run_guarded(command, cfg, ctx, std::cerr);
}
