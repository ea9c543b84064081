// Command line front end: synthetic data, co-occurrence building,
// training, evaluation, prediction and gradient checking.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sgta/corpus.hpp"
#include "sgta/eval.hpp"
#include "sgta/model.hpp"
#include "sgta/serialize.hpp"
#include "sgta/topicselect.hpp"
#include "sgta/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Merge the three split files of a data directory under one vocabulary
// (sorted union of topic names, so ids are stable across splits).
sgta::Corpus load_dir(const std::string& dir) {
  std::vector<std::pair<std::string, sgta::Split>> files = {
      {dir + "/train.jsonl", sgta::Split::Train},
      {dir + "/valid.jsonl", sgta::Split::Valid},
      {dir + "/test.jsonl", sgta::Split::Test}};
  std::vector<std::string> names;
  std::vector<std::pair<std::string, sgta::Split>> present;
  for (auto& [path, split] : files) {
    if (!fs::exists(path)) continue;
    present.emplace_back(path, split);
    sgta::Corpus c = sgta::load_corpus(path, split);
    for (const auto& t : c.vocab) names.push_back(t.name);
  }
  if (present.empty())
    throw sgta::ConfigError("no train/valid/test .jsonl files in " + dir);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());

  sgta::Corpus merged;
  bool first = true;
  for (auto& [path, split] : present) {
    sgta::Corpus c = sgta::load_corpus(path, split, names);
    if (first) {
      merged = std::move(c);
      first = false;
    } else {
      for (auto& s : c.sequences) merged.sequences.push_back(std::move(s));
    }
  }
  return merged;
}

void apply_flag_overrides(const std::map<std::string, std::string>& flags,
                          sgta::ModelConfig& mcfg, sgta::TrainConfig& tcfg) {
  sgta::apply_config(flags, mcfg, tcfg);
}

int run(int argc, char** argv) {
  CLI::App app{"Sequential topic prediction with skew-normal attention"};
  app.require_subcommand(1);

  std::string out_dir = ".";
  std::string data_dir;
  std::string config_path;
  std::string model_path;
  std::string ablate_csv;
  std::uint64_t seed = 0;
  int top_n = 5;

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic",
                                 "Generate a planted-transition corpus");
  sgta::SyntheticSpec spec;
  spec.vocab_size = 50;
  spec.order = 1;
  spec.num_sequences = 1000;
  spec.seq_len = 8;
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--vocab", spec.vocab_size, "Topic vocabulary size");
  gen->add_option("--order", spec.order, "Transition order (1 or 2)");
  gen->add_option("--num", spec.num_sequences, "Number of sequences");
  gen->add_option("--len", spec.seq_len, "Sequence length");
  gen->add_option("--noise", spec.noise, "Off-pattern transition probability");

  // build-cooc
  auto* cooc = app.add_subcommand("build-cooc",
                                  "Build the co-occurrence matrix");
  cooc->add_option("--data", data_dir, "Corpus directory")->required();
  cooc->add_option("--out", out_dir, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--data", data_dir, "Corpus directory")->required();
  tr->add_option("--out", out_dir, "Output directory")->required();
  tr->add_option("--config", config_path, "key=value config file");
  tr->add_option("--seed", seed, "RNG seed");
  tr->add_option("--ablate", ablate_csv,
                 "Comma list: global,intra-pos,msn,xi,sigma,alpha");
  std::map<std::string, std::string> overrides;
  for (const char* key :
       {"d", "n", "blocks", "m", "epochs", "batch_size", "lr", "dropout",
        "delta_loss", "beta", "gamma", "use_target"}) {
    tr->add_option_function<std::string>(
        std::string("--") + key,
        [&overrides, key](const std::string& v) { overrides[key] = v; },
        std::string("Override config key ") + key);
  }

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a trained model");
  std::string split_name = "test";
  ev->add_option("--data", data_dir, "Corpus directory")->required();
  ev->add_option("--model", model_path, "Checkpoint path")->required();
  ev->add_option("--out", out_dir, "Output directory")->required();
  ev->add_option("--split", split_name, "Split: train|valid|test");
  ev->add_option("--seed", seed, "Seed recorded in the report");

  // predict
  auto* pr = app.add_subcommand("predict", "Rank next topics for a prefix");
  std::string topics_csv;
  std::string target_name;
  pr->add_option("--data", data_dir, "Corpus directory (for co-occurrence)")
      ->required();
  pr->add_option("--model", model_path, "Checkpoint path")->required();
  pr->add_option("--topics", topics_csv, "Comma list of topic names")
      ->required();
  pr->add_option("--target", target_name, "Conversation target topic name");
  pr->add_option("--top-n", top_n, "Number of predictions");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck",
                                "Finite-difference gradient verification");
  gc->add_option("--seed", seed, "Model init seed");
  gc->add_option("--ablate", ablate_csv,
                 "Comma list: global,intra-pos,msn,xi,sigma,alpha");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage errors
  }

  if (gen->parsed()) {
    spec.seed = seed;
    sgta::SyntheticResult res = sgta::generate_synthetic(spec);
    fs::create_directories(out_dir);
    sgta::save_corpus(res.corpus, sgta::Split::Train, out_dir + "/train.jsonl");
    sgta::save_corpus(res.corpus, sgta::Split::Valid, out_dir + "/valid.jsonl");
    sgta::save_corpus(res.corpus, sgta::Split::Test, out_dir + "/test.jsonl");
    json planted = json::array();
    for (const auto& [ctx, nxt] : res.planted)
      planted.push_back({{"context", ctx}, {"next", nxt}});
    std::ofstream(out_dir + "/planted.json") << planted.dump() << "\n";
    std::cout << "wrote " << res.corpus.sequences.size() << " sequences to "
              << out_dir << "\n";
    return 0;
  }

  if (cooc->parsed()) {
    sgta::Corpus corpus = load_dir(data_dir);
    sgta::CoOccurrenceMatrix g = sgta::build_cooccurrence(corpus);
    fs::create_directories(out_dir);
    std::vector<std::string> names;
    for (const auto& t : corpus.vocab) names.push_back(t.name);
    sgta::save_cooccurrence(g, names, out_dir + "/cooc.json");
    std::cout << "wrote " << out_dir << "/cooc.json (" << g.size()
              << " topics)\n";
    return 0;
  }

  if (tr->parsed()) {
    sgta::Corpus corpus = load_dir(data_dir);
    sgta::CoOccurrenceMatrix g = sgta::build_cooccurrence(corpus);
    sgta::ModelConfig mcfg;
    sgta::TrainConfig tcfg;
    tcfg.seed = seed;
    if (!config_path.empty())
      sgta::apply_config(sgta::parse_config_file(config_path), mcfg, tcfg);
    apply_flag_overrides(overrides, mcfg, tcfg);
    mcfg.ablations = sgta::ablations_from_list(split_commas(ablate_csv));
    std::vector<std::string> names;
    for (const auto& t : corpus.vocab) names.push_back(t.name);
    sgta::SgtaModel model(mcfg, names, seed);
    auto t0 = std::chrono::steady_clock::now();
    sgta::TrainResult res = sgta::train(model, corpus, g, tcfg);
    double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    fs::create_directories(out_dir);
    sgta::save_checkpoint(out_dir + "/model.json", model);
    std::ofstream csv(out_dir + "/loss_curve.csv");
    csv << "epoch,loss,valid_hit1\n";
    for (std::size_t i = 0; i < res.loss_curve.size(); ++i) {
      csv << i << "," << res.loss_curve[i] << ",";
      if (i < res.valid_hit1.size()) csv << res.valid_hit1[i];
      csv << "\n";
    }
    std::cout << "trained " << res.epochs_run << " epochs in " << wall
              << "s, best epoch " << res.best_epoch << ", checkpoint "
              << out_dir << "/model.json\n";
    return 0;
  }

  if (ev->parsed()) {
    sgta::Corpus corpus = load_dir(data_dir);
    sgta::CoOccurrenceMatrix g = sgta::build_cooccurrence(corpus);
    sgta::SgtaModel model = sgta::load_checkpoint(model_path);
    auto t0 = std::chrono::steady_clock::now();
    sgta::EvalReport rep =
        sgta::evaluate(model, corpus, g, sgta::split_from_string(split_name));
    rep.wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    rep.seed = seed;
    rep.config_json = sgta::config_to_json(model.cfg);
    fs::create_directories(out_dir);
    std::ofstream(out_dir + "/report.json") << rep.to_json() << "\n";
    std::cout << rep.to_json() << "\n";
    return 0;
  }

  if (pr->parsed()) {
    sgta::Corpus corpus = load_dir(data_dir);
    sgta::CoOccurrenceMatrix g = sgta::build_cooccurrence(corpus);
    sgta::SgtaModel model = sgta::load_checkpoint(model_path);
    std::vector<int> prefix;
    for (const auto& name : split_commas(topics_csv)) {
      auto it = corpus.name_to_id.find(name);
      if (it == corpus.name_to_id.end())
        throw sgta::ConfigError("unknown topic: " + name);
      prefix.push_back(it->second);
    }
    if (prefix.empty()) throw sgta::ConfigError("empty topic prefix");
    std::optional<int> target;
    if (!target_name.empty()) {
      auto it = corpus.name_to_id.find(target_name);
      if (it == corpus.name_to_id.end())
        throw sgta::ConfigError("unknown target topic: " + target_name);
      target = it->second;
    }
    auto top = sgta::predict_topk(model, g, prefix, target, top_n);
    for (int id : top)
      std::cout << id << "\t" << corpus.topic_name(id) << "\n";
    return 0;
  }

  if (gc->parsed()) {
    sgta::ModelConfig mcfg;
    mcfg.d = 8;
    mcfg.n = 5;
    mcfg.blocks = 2;
    mcfg.dropout = 0.0;
    mcfg.ablations = sgta::ablations_from_list(split_commas(ablate_csv));
    std::vector<std::string> names;
    for (int i = 0; i < 12; ++i) names.push_back("t" + std::to_string(i));
    sgta::SgtaModel model(mcfg, names, seed);
    sgta::SyntheticSpec sp;
    sp.vocab_size = 12;
    sp.order = 1;
    sp.num_sequences = 40;
    sp.seq_len = 6;
    sp.noise = 0.2;
    sp.seed = seed + 1;
    sgta::Corpus corpus = sgta::generate_synthetic(sp).corpus;
    sgta::CoOccurrenceMatrix g = sgta::build_cooccurrence(corpus);
    std::vector<int> topics = {3, 7, 1, 4};
    double err = sgta::grad_check(model, g, topics, std::nullopt, 2, 1e-5);

    sgta::topicselect::SelectionConfig scfg;
    scfg.token_vocab = 9;
    scfg.num_topics = 12;
    scfg.dim = 6;
    scfg.seed = seed;
    sgta::topicselect::SelectionHeads heads(scfg);
    // move the weights off the near-uniform init so finite differences
    // resolve every gradient entry
    for (auto& nt : heads.tensors()) *nt.tensor *= 8.0;
    double serr = sgta::topicselect::selection_grad_check(
        heads, {0, 4, 2}, {3, 7}, {1, 5, 5}, {2, 5, 9}, 1e-5);

    std::cout << "model max relative error: " << err << "\n";
    std::cout << "selection heads max relative error: " << serr << "\n";
    return (err < 1e-4 && serr < 1e-4) ? 0 : 1;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
