#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tag2cred/error.hpp"
#include "tag2cred/pipeline.hpp"

using namespace tag2cred;

int main(int argc, char** argv) {
  CLI::App app{"tag2cred: rhetorical-tag credibility risk pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::size_t threads = 1;
  std::size_t demo_messages = 5000;
  app.add_option("--config", config_path, "pipeline config (JSON)");
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--threads", threads, "worker cap for parallel stages")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", out_dir, "override the config output directory");

  for (const auto& s : pipeline::stage_names()) app.add_subcommand(s, "run the " + s + " stage");
  app.add_subcommand("run", "run every stage in order");
  auto* demo = app.add_subcommand("demo", "generate a synthetic corpus and run every stage on it");
  demo->add_option("--messages", demo_messages, "synthetic corpus size")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "demo") {
      pipeline::DemoOptions d;
      d.seed = seed.value_or(7);
      d.messages = demo_messages;
      d.out_dir = out_dir.value_or("demo_out");
      d.threads = threads;
      const auto cfg = pipeline::run_demo(d);
      std::cout << "demo artifacts in " << cfg.out_dir << " (config hash " << cfg.hash << ")\n";
      return 0;
    }
    if (config_path.empty()) throw Error(Errc::ConfigInvalid, "--config is required for " + sub);
    pipeline::Overrides o{seed, out_dir, threads};
    const auto cfg = pipeline::load_config(config_path, o);
    if (sub == "run") {
      for (const auto& s : pipeline::stage_names()) pipeline::run_stage(s, cfg);
    } else {
      pipeline::run_stage(sub, cfg);
    }
    std::cout << sub << ": ok (config hash " << cfg.hash << ")\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "tag2cred: " << e.what() << "\n";
    return pipeline::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "tag2cred: " << e.what() << "\n";
    return 1;
  }
}
