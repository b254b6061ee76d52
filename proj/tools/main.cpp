// Command-line front end: corpus generation, training, translation with or
// without gold visual graphs, hallucination, evaluation, gradient checking,
// and growth statistics.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sgp/checkpoint.hpp"
#include "sgp/corpus.hpp"
#include "sgp/model.hpp"
#include "sgp/train.hpp"

namespace fs = std::filesystem;
using namespace sgp;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

ScheduleConfig config_from(const std::string& config_path) {
  return config_path.empty() ? ScheduleConfig{} : parse_config_file(config_path);
}

// A runnable model restored from a checkpoint plus its grammar/vocabulary
// sidecars (written by `train` next to the checkpoint).
struct LoadedModel {
  ToyGrammar grammar;
  VsgVocabularies vocab;
  ScheduleConfig schedule;
  std::unique_ptr<TranslationModel> model;
};

LoadedModel load_model(const std::string& checkpoint) {
  CheckpointHeader header = read_checkpoint_header(checkpoint);
  fs::path dir = fs::path(checkpoint).parent_path();
  LoadedModel lm;
  lm.grammar = ToyGrammar::from_json(slurp((dir / "grammar.json").string()));
  if (lm.grammar.fingerprint() != header.grammar_fingerprint)
    throw DataError("grammar.json next to the checkpoint does not match its "
                    "fingerprint; refusing to load");
  lm.vocab = vocab_from_json(slurp((dir / "vocab.json").string()));
  lm.schedule = header.schedule;
  lm.model = std::make_unique<TranslationModel>(lm.grammar, lm.vocab, lm.schedule);
  load_checkpoint(checkpoint, lm.model->params(), lm.grammar.fingerprint());
  return lm;
}

int cmd_gen_data(const std::string& out_dir, int n_train, int n_test,
                 uint64_t seed, const std::string& config_path) {
  ScheduleConfig cfg = config_from(config_path);
  ToyGrammar grammar = default_grammar();
  Dataset ds = gen_corpus(grammar, n_train, n_test, seed, cfg.z_dim);
  save_dataset(ds, out_dir);
  std::cout << "wrote " << ds.train.size() << " train / " << ds.test.size()
            << " test examples to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out_dir,
              const std::string& config_path, const std::vector<std::string>& ablate,
              bool verbose) {
  ScheduleConfig cfg = config_from(config_path);
  Dataset ds = load_dataset(data_dir);
  std::vector<SceneGraph> vsgs;
  for (const auto& ex : ds.train) vsgs.push_back(ex.vsg);
  VsgVocabularies vocab = build_vocabularies(vsgs);
  TranslationModel model(ds.grammar, vocab, cfg);

  TrainOptions opts;
  opts.out_dir = out_dir;
  for (const auto& name : ablate) {
    if (name == "cma") opts.ablate.insert(LossKind::CMA);
    else if (name == "rec") opts.ablate.insert(LossKind::REC);
    else if (name == "vcb") opts.ablate.insert(LossKind::VCB);
    else if (name == "cpb") opts.ablate.insert(LossKind::CPB);
    else if (name == "vsh") opts.ablate.insert(LossKind::VSH);
    else throw UsageError("unknown loss in --ablate: " + name);
  }
  if (verbose)
    opts.log_line = [](const std::string& line) { std::cout << line << "\n"; };

  fs::create_directories(out_dir);
  spit(out_dir + "/grammar.json", ds.grammar.to_json());
  spit(out_dir + "/vocab.json", vocab_to_json(vocab));

  TrainResult res = train(model, ds, opts);
  std::cout << "final checkpoint: " << res.final_checkpoint << "\n"
            << "skipped examples: vcb=" << res.counters.vcb_skipped
            << " cpb=" << res.counters.cpb_skipped
            << " vsh=" << res.counters.vsh_skipped << "\n";
  return 0;
}

int cmd_translate(const std::string& src_path, const std::string& checkpoint,
                  const std::string& gold_vsg_path, const std::string& out_path) {
  LoadedModel lm = load_model(checkpoint);
  std::ifstream in(src_path);
  if (!in) throw DataError("cannot open " + src_path);
  std::vector<std::vector<std::string>> sentences;
  std::string line;
  while (std::getline(in, line)) {
    auto toks = split_tokens(line);
    if (!toks.empty()) sentences.push_back(std::move(toks));
  }
  if (sentences.empty()) throw DataError("no sentences in " + src_path);
  if (!gold_vsg_path.empty() && sentences.size() != 1)
    throw UsageError("--gold-vsg expects a single-sentence --src file");

  std::string out_text;
  for (const auto& x : sentences) {
    SceneGraph lsg = parse_toy_lsg(x, lm.grammar, Side::Source).graph;
    SceneGraph vsg = gold_vsg_path.empty()
                         ? lm.model->hallucinate(lsg)
                         : deserialize(slurp(gold_vsg_path));
    auto y = lm.model->translate(lsg, vsg, Side::Target);
    out_text += join_tokens(y) + "\n";
  }
  spit(out_path, out_text);
  std::cout << "translated " << sentences.size() << " sentence(s) -> " << out_path
            << (gold_vsg_path.empty() ? " (image-free, hallucinated visual scene)"
                                      : " (gold visual scene)")
            << "\n";
  return 0;
}

int cmd_hallucinate(const std::string& lsg_path, const std::string& checkpoint,
                    const std::string& out_path) {
  LoadedModel lm = load_model(checkpoint);
  SceneGraph lsg = deserialize(slurp(lsg_path));
  SceneGraph skeleton = lm.model->sketch(lsg);
  SceneGraph done = lm.model->hallucinate(lsg);
  spit(out_path, serialize(done) + "\n");
  std::cout << "growth (skeleton -> hallucinated):\n"
            << graph_stats(skeleton, done).to_text();
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& checkpoint,
             bool gold_vsg, int jobs, bool smoothing) {
  LoadedModel lm = load_model(checkpoint);
  Dataset ds = load_dataset(data_dir);
  if (ds.grammar.fingerprint() != lm.grammar.fingerprint())
    throw DataError("dataset grammar does not match the checkpoint grammar");
  (void)smoothing;
  BleuResult bleu = evaluate_model_bleu(*lm.model, ds.test, !gold_vsg, jobs);
  std::cout << "mode: " << (gold_vsg ? "gold-vsg" : "image-free") << "\n"
            << "corpus BLEU-4: " << bleu.score << "\n"
            << "precisions: " << bleu.precisions[0] << " " << bleu.precisions[1]
            << " " << bleu.precisions[2] << " " << bleu.precisions[3]
            << "  brevity penalty: " << bleu.brevity_penalty << "\n";
  return 0;
}

int cmd_gradcheck(uint64_t seed) {
  GradcheckResult res = run_gradcheck(seed);
  for (const auto& e : res.entries) {
    std::printf("%-4s  max rel err %.3e  (checked %d, both-zero %d)%s%s\n",
                e.loss_name.c_str(), e.report.max_rel_error, e.report.checked,
                e.report.both_zero, e.report.aborted ? "  ABORTED: " : "",
                e.report.aborted ? e.report.note.c_str() : "");
    if (!e.report.passed(1e-4) && !e.report.aborted)
      std::printf("      worst: %s[%lld]\n", e.report.worst_param.c_str(),
                  static_cast<long long>(e.report.worst_index));
  }
  if (!res.passed()) {
    std::cerr << "gradcheck FAILED\n";
    return 3;
  }
  std::cout << "gradcheck passed (all losses < 1e-4 relative error)\n";
  return 0;
}

int cmd_stats(const std::string& data_dir, const std::string& checkpoint) {
  Dataset ds = load_dataset(data_dir);
  std::unique_ptr<LoadedModel> lm;
  if (!checkpoint.empty()) {
    lm = std::make_unique<LoadedModel>(load_model(checkpoint));
    if (ds.grammar.fingerprint() != lm->grammar.fingerprint())
      throw DataError("dataset grammar does not match the checkpoint grammar");
  }
  CorpusGrowth growth =
      corpus_growth(ds.test, lm ? lm->model.get() : nullptr);
  std::cout << "planted growth over the test corpus (skeleton -> gold visual):\n"
            << growth.planted.to_text();
  if (growth.has_hallucinated)
    std::cout << "hallucinated growth (skeleton -> model completion):\n"
              << growth.hallucinated.to_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-graph pivoted unsupervised multimodal translation"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus");
  std::string gen_out = "data";
  int n_train = 500, n_test = 50;
  uint64_t gen_seed = 7;
  std::string gen_config;
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--n-train", n_train, "Training examples");
  gen->add_option("--n-test", n_test, "Test examples");
  gen->add_option("--seed", gen_seed, "Generation seed");
  gen->add_option("--config", gen_config, "key = value config file");

  // train
  auto* tr = app.add_subcommand("train", "Run the three-stage training schedule");
  std::string tr_data = "data", tr_out = "run", tr_config;
  std::vector<std::string> tr_ablate;
  bool tr_verbose = false;
  tr->add_option("--data", tr_data, "Dataset directory (from gen-data)");
  tr->add_option("--out", tr_out, "Output directory for checkpoints/metrics");
  tr->add_option("--config", tr_config, "key = value config file");
  tr->add_option("--ablate", tr_ablate,
                 "Losses to remove from every stage (cma,rec,vcb,cpb,vsh)")
      ->delimiter(',');
  tr->add_flag("--verbose", tr_verbose, "Print per-epoch metrics");

  // translate
  auto* tl = app.add_subcommand("translate", "Translate source sentences");
  std::string tl_src, tl_ckpt, tl_gold, tl_out = "out.txt";
  tl->add_option("--src", tl_src, "Source sentence file (one per line)")->required();
  tl->add_option("--checkpoint", tl_ckpt, "Trained checkpoint")->required();
  tl->add_option("--gold-vsg", tl_gold,
                 "Gold visual scene graph (single sentence mode); omit to "
                 "hallucinate the visual scene");
  tl->add_option("--out", tl_out, "Output file")->required();

  // hallucinate
  auto* ha = app.add_subcommand("hallucinate",
                                "Hallucinate a visual graph from a language graph");
  std::string ha_lsg, ha_ckpt, ha_out = "vsg.json";
  ha->add_option("--lsg", ha_lsg, "Language scene graph file")->required();
  ha->add_option("--checkpoint", ha_ckpt, "Trained checkpoint")->required();
  ha->add_option("--out", ha_out, "Output scene graph file")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Corpus BLEU on the held-out split");
  std::string ev_data = "data", ev_ckpt;
  bool ev_gold = false, ev_smooth = false;
  int ev_jobs = 1;
  ev->add_option("--data", ev_data, "Dataset directory");
  ev->add_option("--checkpoint", ev_ckpt, "Trained checkpoint")->required();
  ev->add_flag("--gold-vsg", ev_gold, "Use gold visual graphs instead of hallucination");
  ev->add_option("--jobs", ev_jobs, "Parallel translation jobs (order preserved)");
  ev->add_flag("--smoothing", ev_smooth, "Add-one BLEU smoothing");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of all losses");
  uint64_t gc_seed = 0;
  gc->add_option("--seed", gc_seed, "Parameter seed");

  // stats
  auto* st = app.add_subcommand("stats", "Node-growth report over the test corpus");
  std::string st_data = "data", st_ckpt;
  st->add_option("--data", st_data, "Dataset directory");
  st->add_option("--checkpoint", st_ckpt,
                 "Also report the trained model's hallucinated growth");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen_data(gen_out, n_train, n_test, gen_seed, gen_config);
    if (tr->parsed()) return cmd_train(tr_data, tr_out, tr_config, tr_ablate, tr_verbose);
    if (tl->parsed()) return cmd_translate(tl_src, tl_ckpt, tl_gold, tl_out);
    if (ha->parsed()) return cmd_hallucinate(ha_lsg, ha_ckpt, ha_out);
    if (ev->parsed()) return cmd_eval(ev_data, ev_ckpt, ev_gold, ev_jobs, ev_smooth);
    if (gc->parsed()) return cmd_gradcheck(gc_seed);
    if (st->parsed()) return cmd_stats(st_data, st_ckpt);
    return 1;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const ContractError& e) {
    std::cerr << "internal contract violation: " << e.what() << "\n";
    return 3;
  }
}
