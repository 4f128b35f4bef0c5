#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "amcbench/config.hpp"
#include "amcbench/pipeline.hpp"

namespace {

struct GoalDesc {
  const char* name;
  const char* help;
};

constexpr GoalDesc kGoals[] = {
    {"generate", "synthesize the labeled dataset"},
    {"train", "train clean classifiers on the dataset"},
    {"attribute", "score window relevance on the surrogate model"},
    {"trigger", "compose the trigger from the target class statistics"},
    {"poison", "plant the trigger into a slice of the training set"},
    {"evaluate", "train backdoored models and sweep ASR/ALC/ABC over snr"},
    {"defend", "run strip, activation clustering and trigger reverse-engineering"},
    {"run", "full pipeline plus run_report.json"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"backdoor attack benchmark for modulation classifiers"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_given = false;

  for (const GoalDesc& g : kGoals) {
    CLI::App* sub = app.add_subcommand(g.name, g.help);
    sub->add_option("--config", config_path, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "override run.master_seed")
        ->each([&](const std::string&) { seed_given = true; });
  }

  CLI11_PARSE(app, argc, argv);
  const std::string goal = app.get_subcommands().front()->get_name();

  try {
    amcbench::ExperimentConfig cfg = amcbench::load_config_file(config_path);
    if (seed_given) cfg.master_seed = seed;
    amcbench::RunSummary sum = amcbench::run_experiment(cfg, out_dir, goal);
    for (const amcbench::StageStatus& st : sum.stages)
      std::fprintf(stderr, "stage %-16s %s%s\n", std::string(stage_name(st.stage)).c_str(),
                   st.key.c_str(), st.cache_hit ? " (cached)" : "");
    return 0;
  } catch (const amcbench::StageError& e) {
    std::fprintf(stderr, "error %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [config]: %s\n", e.what());
    return 1;
  }
}
