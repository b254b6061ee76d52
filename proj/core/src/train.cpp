#include "sgp/train.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <random>
#include <set>
#include <sstream>

#include "sgp/checkpoint.hpp"

namespace sgp {

using num::Tape;
using num::Tensor;
using num::Var;

std::string EpochMetrics::tsv() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << stage << '\t' << epoch << '\t' << mean_loss.cma << '\t'
     << mean_loss.rec << '\t' << mean_loss.vcb << '\t' << mean_loss.cpb << '\t'
     << mean_loss.vsh << '\t' << seconds;
  return os.str();
}

namespace {

struct ExampleLosses {
  Var total;
  bool any = false;
  LossBundle values;
};

ExampleLosses example_losses(Tape& tape, TranslationModel& model,
                             const Dataset& data, const TrainExample& ex,
                             const std::set<LossKind>& active,
                             LossCounters& counters) {
  const ScheduleConfig& cfg = model.config();
  ExampleLosses out;
  std::vector<std::pair<Var, double>> terms;
  Var table = model.table(tape);

  bool need_encodings = active.count(LossKind::CMA) || active.count(LossKind::REC);
  Var lsg_reps, vsg_reps;
  if (need_encodings) {
    lsg_reps = model.encode(tape, ex.lsg, TranslationModel::encoder_prefix_lsg(), table);
    vsg_reps = model.encode(tape, ex.vsg, TranslationModel::encoder_prefix_vsg(), table);
  }

  if (active.count(LossKind::CMA)) {
    auto cma = loss_cma(tape, lsg_reps, vsg_reps, cfg.alpha, cfg.tau);
    if (cma) {
      out.values.cma = tape.val(*cma).item();
      terms.push_back({*cma, cfg.w_cma});
    }
  }
  if (active.count(LossKind::REC)) {
    Var rec = loss_rec(tape, model, lsg_reps, vsg_reps, ex.x, ex.z, table);
    out.values.rec = tape.val(rec).item();
    terms.push_back({rec, cfg.w_rec});
  }
  if (active.count(LossKind::VCB)) {
    auto vcb = loss_vcb(tape, model, data.grammar, ex, table, counters);
    if (vcb) {
      out.values.vcb = tape.val(*vcb).item();
      terms.push_back({*vcb, cfg.w_vcb});
    }
  }
  if (active.count(LossKind::CPB)) {
    auto cpb = loss_cpb(tape, model, data.grammar, ex, table, counters);
    if (cpb) {
      out.values.cpb = tape.val(*cpb).item();
      terms.push_back({*cpb, cfg.w_cpb});
    }
  }
  if (active.count(LossKind::VSH)) {
    VshLoss vsh = vsh_loss(tape, ex.lsg, ex.vsg, model.vsg_vocab(), model.labels(),
                           table, model.params(), model.encoder_config(),
                           model.vsh_config());
    if (vsh.skipped) {
      ++counters.vsh_skipped;
    } else {
      out.values.vsh = tape.val(vsh.loss).item();
      terms.push_back({vsh.loss, cfg.w_vsh});
    }
  }

  if (!terms.empty()) {
    out.total = total_loss(terms);
    out.any = true;
  }
  return out;
}

}  // namespace

TrainResult train(TranslationModel& model, const Dataset& data,
                  const TrainOptions& opts) {
  const ScheduleConfig& cfg = model.config();
  std::filesystem::create_directories(opts.out_dir);
  std::ofstream metrics(opts.out_dir + "/metrics.tsv");
  if (!metrics) throw DataError("cannot write metrics log in " + opts.out_dir);

  TrainResult result;
  uint64_t audit_before = TrainExample::reference_reads();

  auto emit = [&](const EpochMetrics& m) {
    result.log.push_back(m);
    metrics << m.tsv() << '\n';
    metrics.flush();
    if (opts.log_line) opts.log_line(m.tsv());
  };

  const int stage_epochs[3] = {cfg.epochs_stage1, cfg.epochs_stage2,
                               cfg.epochs_stage3};
  for (int stage = 1; stage <= 3; ++stage) {
    std::set<LossKind> active = training_schedule(stage);
    for (LossKind k : opts.ablate) active.erase(k);

    // Back-translation bootstraps the target decoder from the trained source
    // decoder (shared-decoder initialization); ablating back-translation
    // removes the bootstrap with it.
    if (stage == 2 &&
        (active.count(LossKind::VCB) || active.count(LossKind::CPB)))
      model.bootstrap_target_decoder();

    for (int epoch = 1; epoch <= stage_epochs[stage - 1]; ++epoch) {
      auto t0 = std::chrono::steady_clock::now();
      std::vector<size_t> order(data.train.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::mt19937_64 shuffle_rng(cfg.seed + 1315423911ULL * stage + epoch);
      std::shuffle(order.begin(), order.end(), shuffle_rng);

      LossBundle sums;
      sums.stage = stage;
      size_t cursor = 0;
      while (cursor < order.size()) {
        size_t batch_end =
            std::min(cursor + static_cast<size_t>(cfg.batch_size), order.size());
        model.params().zero_grad();
        for (size_t b = cursor; b < batch_end; ++b) {
          const TrainExample& ex = data.train[order[b]];
          Tape tape;
          ExampleLosses losses =
              example_losses(tape, model, data, ex, active, result.counters);
          sums.cma += losses.values.cma;
          sums.rec += losses.values.rec;
          sums.vcb += losses.values.vcb;
          sums.cpb += losses.values.cpb;
          sums.vsh += losses.values.vsh;
          if (losses.any) tape.backward(losses.total);
        }
        model.params().clip_grad(cfg.clip_norm);
        model.params().sgd_step(cfg.lr);
        cursor = batch_end;
      }

      double n = static_cast<double>(data.train.size());
      EpochMetrics m;
      m.stage = stage;
      m.epoch = epoch;
      m.mean_loss = sums;
      m.mean_loss.cma /= n;
      m.mean_loss.rec /= n;
      m.mean_loss.vcb /= n;
      m.mean_loss.cpb /= n;
      m.mean_loss.vsh /= n;
      m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();
      emit(m);
    }

    std::string ckpt = opts.out_dir + "/ckpt_stage" + std::to_string(stage) + ".bin";
    save_checkpoint(ckpt, model.params(), cfg, data.grammar.fingerprint());
    result.stage_checkpoints.push_back(ckpt);
  }

  uint64_t audit_after = TrainExample::reference_reads();
  if (audit_after != audit_before)
    throw ContractError("training loop read reference translations (" +
                        std::to_string(audit_after - audit_before) + " reads)");

  result.final_checkpoint = opts.out_dir + "/final.bin";
  save_checkpoint(result.final_checkpoint, model.params(), cfg,
                  data.grammar.fingerprint());
  return result;
}

BleuResult evaluate_model_bleu(const TranslationModel& model,
                               const std::vector<TrainExample>& test,
                               bool image_free, int jobs) {
  if (test.empty()) throw ContractError("evaluate_model_bleu: empty test set");
  std::vector<std::vector<std::string>> hyps(test.size());
  auto translate_one = [&](size_t i) {
    const TrainExample& ex = test[i];
    SceneGraph vsg = image_free ? model.hallucinate(ex.lsg) : ex.vsg;
    return model.translate(ex.lsg, vsg, Side::Target);
  };
  if (jobs <= 1) {
    for (size_t i = 0; i < test.size(); ++i) hyps[i] = translate_one(i);
  } else {
    // Inference is read-only on the parameters; outputs keep corpus order.
    std::vector<std::future<std::vector<std::string>>> futures(test.size());
    for (size_t i = 0; i < test.size(); ++i)
      futures[i] = std::async(std::launch::async, translate_one, i);
    for (size_t i = 0; i < test.size(); ++i) hyps[i] = futures[i].get();
  }
  std::vector<std::vector<std::string>> refs;
  refs.reserve(test.size());
  for (const auto& ex : test) refs.push_back(ex.reference());
  return evaluate_bleu(hyps, refs);
}

AlignmentGap alignment_gap(const TranslationModel& model,
                           const std::vector<TrainExample>& examples) {
  double pos_sum = 0.0, neg_sum = 0.0;
  int64_t pos_n = 0, neg_n = 0;
  for (const auto& ex : examples) {
    Tensor lr = model.encode_raw(ex.lsg, TranslationModel::encoder_prefix_lsg());
    Tensor vr = model.encode_raw(ex.vsg, TranslationModel::encoder_prefix_vsg());
    int nl = static_cast<int>(ex.lsg.nodes.size());
    int nv = static_cast<int>(ex.vsg.nodes.size());
    int d = lr.dim(1);
    auto row = [&](const Tensor& m, int r) {
      Tensor out({d});
      for (int j = 0; j < d; ++j) out[j] = m.at(r, j);
      return out;
    };
    for (int i = 0; i < nl; ++i) {
      for (int j = 0; j < nv; ++j) {
        if (ex.lsg.nodes[static_cast<size_t>(i)].kind !=
            ex.vsg.nodes[static_cast<size_t>(j)].kind)
          continue;
        double c = num::raw::cosine(row(lr, i), row(vr, j));
        if (i == j && j < nl) {
          pos_sum += c;
          ++pos_n;
        } else {
          neg_sum += c;
          ++neg_n;
        }
      }
    }
  }
  AlignmentGap g;
  if (pos_n) g.positive_mean = pos_sum / static_cast<double>(pos_n);
  if (neg_n) g.negative_mean = neg_sum / static_cast<double>(neg_n);
  return g;
}

namespace {

struct PlantedExtras {
  // (base object label, extra label) for objects/attributes; relation label
  // rides along for object plants.
  struct NodePlant {
    std::string base, extra, relation;
    bool is_object;
  };
  struct EdgePlant {
    std::string src, relation, dst;
  };
  std::vector<NodePlant> nodes;
  std::vector<EdgePlant> edges;
};

// The generator appends extras after the token-mapped language prefix, so
// everything with id >= |lsg| is planted.
PlantedExtras planted_extras(const TrainExample& ex) {
  PlantedExtras out;
  int n0 = static_cast<int>(ex.lsg.nodes.size());
  const SceneGraph& g = ex.vsg;
  std::vector<int> in_from(g.nodes.size(), -1), out_to(g.nodes.size(), -1);
  for (auto [s, d] : g.edges) {
    in_from[static_cast<size_t>(d)] = s;
    out_to[static_cast<size_t>(s)] = d;
  }
  for (int i = n0; i < static_cast<int>(g.nodes.size()); ++i) {
    const SgNode& node = g.nodes[static_cast<size_t>(i)];
    if (node.kind == NodeKind::Attribute) {
      out.nodes.push_back({g.nodes[static_cast<size_t>(in_from[static_cast<size_t>(i)])].label,
                           node.label, "", false});
    } else if (node.kind == NodeKind::Relation) {
      int src = in_from[static_cast<size_t>(i)];
      int dst = out_to[static_cast<size_t>(i)];
      if (dst >= n0) {
        out.nodes.push_back({g.nodes[static_cast<size_t>(src)].label,
                             g.nodes[static_cast<size_t>(dst)].label, node.label,
                             true});
      } else if (src < n0 && dst < n0) {
        out.edges.push_back({g.nodes[static_cast<size_t>(src)].label, node.label,
                             g.nodes[static_cast<size_t>(dst)].label});
      }
    }
  }
  return out;
}

struct HalluTriples {
  std::set<std::array<std::string, 2>> attrs;           // (owner, attr)
  std::set<std::array<std::string, 3>> rels;            // (src, rel, dst)
};

HalluTriples triples_of(const SceneGraph& g) {
  HalluTriples t;
  std::vector<int> in_from(g.nodes.size(), -1), out_to(g.nodes.size(), -1);
  for (auto [s, d] : g.edges) {
    in_from[static_cast<size_t>(d)] = s;
    out_to[static_cast<size_t>(s)] = d;
  }
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].kind == NodeKind::Attribute && in_from[i] >= 0) {
      t.attrs.insert({g.nodes[static_cast<size_t>(in_from[i])].label, g.nodes[i].label});
    } else if (g.nodes[i].kind == NodeKind::Relation && in_from[i] >= 0 &&
               out_to[i] >= 0) {
      t.rels.insert({g.nodes[static_cast<size_t>(in_from[i])].label, g.nodes[i].label,
                     g.nodes[static_cast<size_t>(out_to[i])].label});
    }
  }
  return t;
}

}  // namespace

RecoveryReport vsh_recovery(const TranslationModel& model,
                            const std::vector<TrainExample>& examples) {
  RecoveryReport r;
  for (const auto& ex : examples) {
    PlantedExtras expected = planted_extras(ex);
    SceneGraph skeleton = model.sketch(ex.lsg);
    SceneGraph done = model.hallucinate(ex.lsg);
    r.additions += static_cast<int>(done.nodes.size() - skeleton.nodes.size()) +
                   static_cast<int>(done.edges.size() - skeleton.edges.size());
    HalluTriples got = triples_of(done);
    for (const auto& p : expected.nodes) {
      ++r.node_expected;
      bool hit = p.is_object
                     ? got.rels.count({p.base, p.relation, p.extra}) > 0
                     : got.attrs.count({p.base, p.extra}) > 0;
      if (hit) ++r.node_recovered;
    }
    for (const auto& e : expected.edges) {
      ++r.edge_expected;
      if (got.rels.count({e.src, e.relation, e.dst})) ++r.edge_recovered;
    }
  }
  return r;
}

CorpusGrowth corpus_growth(const std::vector<TrainExample>& examples,
                           const TranslationModel* model) {
  CorpusGrowth out;
  std::vector<SceneGraph> skeletons, golds, completed;
  for (const auto& ex : examples) {
    // The skeleton shares the language graph's node census by construction.
    skeletons.push_back(ex.lsg);
    golds.push_back(ex.vsg);
    if (model) completed.push_back(model->hallucinate(ex.lsg));
  }
  out.planted = corpus_stats(skeletons, golds);
  if (model) {
    out.hallucinated = corpus_stats(skeletons, completed);
    out.has_hallucinated = true;
  }
  return out;
}

GradcheckResult run_gradcheck(uint64_t seed) {
  ToyGrammar grammar = default_grammar();
  ScheduleConfig cfg;
  cfg.seed = seed;
  cfg.dim = 24;  // miniature but full-path
  cfg.z_dim = 16;
  // Random-init cosines sit near zero; a low threshold keeps the contrastive
  // loss populated so its gradient path is actually exercised.
  cfg.alpha = -0.25;
  Dataset data = gen_corpus(grammar, 6, 2, seed + 17, cfg.z_dim);
  std::vector<SceneGraph> train_vsgs;
  for (const auto& ex : data.train) train_vsgs.push_back(ex.vsg);
  VsgVocabularies vocab = build_vocabularies(train_vsgs);
  TranslationModel model(grammar, vocab, cfg);

  GradcheckResult result;
  auto check_loss = [&](LossKind kind) {
    std::set<LossKind> only{kind};
    auto f = [&](num::ParameterStore&) {
      double total = 0.0;
      LossCounters scratch;
      for (const auto& ex : data.train) {
        Tape tape;
        ExampleLosses l = example_losses(tape, model, data, ex, only, scratch);
        if (!l.any) continue;
        total += tape.val(l.total).item();
        tape.backward(l.total);
      }
      return total;
    };
    GradcheckEntry entry;
    entry.loss_name = to_string(kind);
    entry.report = num::finite_difference_check(f, model.params());
    result.entries.push_back(std::move(entry));
  };
  for (LossKind kind : {LossKind::CMA, LossKind::REC, LossKind::VCB,
                        LossKind::CPB, LossKind::VSH})
    check_loss(kind);
  return result;
}

bool GradcheckResult::passed(double tol) const {
  for (const auto& e : entries)
    if (!e.report.passed(tol)) return false;
  return true;
}

}  // namespace sgp
