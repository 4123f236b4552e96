// ivfg <subcommand> [--config <file>] [--key=value ...]

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ivfg/commands.hpp"
#include "ivfg/errors.hpp"

namespace {

ivfg::RunConfig resolve(const std::string& config_file, const std::vector<std::string>& extras) {
  ivfg::RunConfig cfg = config_file.empty() ? ivfg::RunConfig{} : ivfg::RunConfig::load(config_file);
  for (const std::string& arg : extras) {
    const auto eq = arg.find('=');
    if (arg.rfind("--", 0) != 0 || eq == std::string::npos) {
      throw ivfg::ConfigError("unexpected argument '" + arg + "'; overrides take the form --key=value");
    }
    cfg.set(arg.substr(2, eq - 2), arg.substr(eq + 1));
  }
  cfg.finalize();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Key-conditioned virtual face generation: data, training, generation and evaluation"};
  app.require_subcommand(1);

  std::string config_file;
  std::string mode = "set-a";
  std::vector<CLI::App*> commands;
  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    sub->add_option("--config", config_file, "key=value configuration file");
    commands.push_back(sub);
    return sub;
  };
  add("synth-data", "write the procedural toy dataset");
  add("pretrain", "train and freeze encoder, generator and recognizer");
  add("train", "train the projector against the frozen backends");
  add("generate", "write virtual test sets")
      ->add_option("--mode", mode, "set-a (a random key per identity) or set-b (one shared key)");
  add("evaluate", "compute the metrics report");
  add("ablate", "train and evaluate the full objective and each single-loss removal");
  add("plot-features", "export features and render a 2-D scatter");
  add("show-config", "print the resolved configuration and its hash");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const ivfg::RunConfig cfg = resolve(config_file, sub->remaining());
    std::ostream* log = &std::clog;
    if (name == "synth-data") {
      ivfg::cmd_synth_data(cfg, log);
    } else if (name == "pretrain") {
      ivfg::cmd_pretrain(cfg, log);
    } else if (name == "train") {
      ivfg::cmd_train(cfg, log);
    } else if (name == "generate") {
      ivfg::cmd_generate(cfg, ivfg::parse_key_mode(mode), log);
    } else if (name == "evaluate") {
      std::cout << ivfg::cmd_evaluate(cfg, log).to_json().dump(2) << '\n';
    } else if (name == "ablate") {
      std::cout << ivfg::cmd_ablate(cfg, log).to_tsv();
    } else if (name == "plot-features") {
      std::cout << ivfg::cmd_plot_features(cfg, log).string() << '\n';
    } else if (name == "show-config") {
      std::cout << "work_dir=" << cfg.work_dir.string() << "\ndata_dir=" << cfg.data_path().string()
                << "\nbackends_dir=" << cfg.backends_path().string() << '\n'
                << cfg.canonical() << "# hash " << cfg.hash() << '\n';
    }
    return 0;
  } catch (const ivfg::ConfigError& e) {
    std::cerr << "ivfg: config error: " << e.what() << '\n';
    return 2;
  } catch (const ivfg::MissingArtifactError& e) {
    std::cerr << "ivfg: missing artifact: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "ivfg: error: " << e.what() << '\n';
    return 1;
  }
}
