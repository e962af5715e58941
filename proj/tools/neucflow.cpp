// CLI for the attentive-flow engine: train, evaluate, extract, sweep, stats,
// and synthetic corpus generation. Missing files exit with 2, other errors
// with 1.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "neucflow/neucflow.hpp"

namespace {

neucflow::RunConfig config_from(const std::string& config_path,
                                const std::vector<std::string>& overrides) {
  std::string text;
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) throw neucflow::MissingPathError("cannot open " + config_path);
    std::stringstream buf;
    buf << is.rdbuf();
    text = buf.str();
  }
  for (const std::string& o : overrides) text += "\n" + o;
  neucflow::RunConfig cfg = neucflow::load_config(text);
  for (const std::string* p : {&cfg.train_file, &cfg.valid_file, &cfg.test_file,
                               &cfg.negatives_file, &cfg.answers_file}) {
    if (p->empty()) continue;
    std::ifstream probe(*p);
    if (!probe) throw neucflow::MissingPathError("referenced path does not exist: " + *p);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attentive-flow knowledge graph reasoning"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, split = "test";
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "key = value config file");
    sub->add_option("-s,--set", overrides, "config override, e.g. -s \"seed = 1\"")
        ->take_all();
  };

  CLI::App* train = app.add_subcommand("train", "train a model and write checkpoints");
  add_common(train);

  CLI::App* evaluate = app.add_subcommand("evaluate", "filtered ranking or MAP on a split");
  add_common(evaluate);
  evaluate->add_option("-m,--model", checkpoint_path, "checkpoint file")->required();
  evaluate->add_option("--split", split, "valid or test (default test)");

  std::string head, rel, tail;
  CLI::App* extract = app.add_subcommand("extract", "export the visited subgraph of one query");
  add_common(extract);
  extract->add_option("-m,--model", checkpoint_path, "checkpoint file")->required();
  extract->add_option("--head", head, "head entity name")->required();
  extract->add_option("--rel", rel, "relation name")->required();
  extract->add_option("--tail", tail, "optional tail entity name");

  std::string axis;
  std::vector<int64_t> values;
  CLI::App* sweep = app.add_subcommand("sweep", "metric and time vs one horizon axis");
  add_common(sweep);
  sweep->add_option("-m,--model", checkpoint_path, "optional checkpoint file");
  sweep->add_option("--axis", axis, "max_sampled_edges_per_node | max_seen_nodes_per_step | "
                                    "max_attended_nodes_per_step | n_steps_of_c_flow | batch_size")
      ->required();
  sweep->add_option("--values", values, "axis values")->required()->take_all();

  CLI::App* stats = app.add_subcommand("stats", "corpus statistics per eval split");
  add_common(stats);

  int64_t synth_entities = 200, synth_degree = 2;
  double synth_noise = 0.1, synth_train_fraction = 0.8;
  uint64_t synth_seed = 7;
  std::string synth_out = "data/toy";
  CLI::App* synth = app.add_subcommand("synth", "generate the planted-rule toy corpus");
  synth->add_option("--entities", synth_entities, "entity count");
  synth->add_option("--degree", synth_degree, "parallel witness chains per composite fact");
  synth->add_option("--noise", synth_noise, "noise edges per base edge");
  synth->add_option("--train-fraction", synth_train_fraction, "composite split fraction");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("-o,--out", synth_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      neucflow::TrainOutcome out = neucflow::cmd_train(config_from(config_path, overrides));
      std::cout << out.metrics.text();
    } else if (evaluate->parsed()) {
      neucflow::EvaluateOutcome out =
          neucflow::cmd_evaluate(config_from(config_path, overrides), checkpoint_path, split);
      std::cout << out.metrics.text();
    } else if (extract->parsed()) {
      neucflow::ExtractOutcome out =
          neucflow::cmd_extract(config_from(config_path, overrides), checkpoint_path, head, rel, tail);
      for (const std::string& f : out.files) std::cout << f << "\n";
    } else if (sweep->parsed()) {
      neucflow::SweepOutcome out =
          neucflow::cmd_sweep(config_from(config_path, overrides), axis, values, checkpoint_path);
      std::cout << out.csv_path << "\n";
    } else if (stats->parsed()) {
      neucflow::MetricsReport rep = neucflow::cmd_stats(config_from(config_path, overrides));
      std::cout << rep.text();
    } else if (synth->parsed()) {
      neucflow::SyntheticSpec spec;
      spec.n_entities = synth_entities;
      spec.out_degree = synth_degree;
      spec.noise_rate = synth_noise;
      spec.train_fraction = synth_train_fraction;
      spec.seed = synth_seed;
      neucflow::SynthOutcome out = neucflow::cmd_synth(spec, synth_out);
      std::cout << out.train_path << "\n" << out.test_path << "\n" << out.answers_path << "\n";
    }
  } catch (const neucflow::MissingPathError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
