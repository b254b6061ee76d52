#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "sgp/bleu.hpp"
#include "sgp/corpus.hpp"
#include "sgp/fdcheck.hpp"
#include "sgp/model.hpp"
#include "sgp/objectives.hpp"

namespace sgp {

struct TrainOptions {
  std::string out_dir;            // checkpoints and metrics land here
  std::set<LossKind> ablate;      // losses removed from every stage
  bool quiet = true;
  std::function<void(const std::string&)> log_line;  // optional sink
};

struct EpochMetrics {
  int stage = 0;
  int epoch = 0;  // 1-based within the stage
  LossBundle mean_loss;
  double seconds = 0.0;
  std::string tsv() const;
};

struct TrainResult {
  std::vector<EpochMetrics> log;
  LossCounters counters;
  std::string final_checkpoint;
  std::vector<std::string> stage_checkpoints;
};

/// Runs the three-stage schedule with per-stage checkpointing and a
/// tab-separated metrics log. Fully deterministic given the config seed. On a
/// numeric failure the last completed checkpoint is kept and the error is
/// rethrown after writing the log.
TrainResult train(TranslationModel& model, const Dataset& data,
                  const TrainOptions& opts);

/// Translates every test sentence (image-free activates hallucination) and
/// scores corpus BLEU against the held-out references.
BleuResult evaluate_model_bleu(const TranslationModel& model,
                               const std::vector<TrainExample>& test,
                               bool image_free, int jobs = 1);

struct AlignmentGap {
  double positive_mean = 0.0;  // gold-matched node pairs
  double negative_mean = 0.0;  // same-kind mismatched pairs
  double gap() const { return positive_mean - negative_mean; }
};

/// Mean cosine of gold-aligned node pairs minus mean cosine of same-kind
/// non-aligned pairs, over a corpus (the gold visual graph mirrors the
/// language graph in its node-id prefix).
AlignmentGap alignment_gap(const TranslationModel& model,
                           const std::vector<TrainExample>& examples);

struct RecoveryReport {
  int node_expected = 0, node_recovered = 0;
  int edge_expected = 0, edge_recovered = 0;
  int additions = 0;  // nodes + edges beyond the skeleton, summed
  double node_rate() const {
    return node_expected ? static_cast<double>(node_recovered) / node_expected : 1.0;
  }
  double edge_rate() const {
    return edge_expected ? static_cast<double>(edge_recovered) / edge_expected : 1.0;
  }
};

/// Compares hallucinated graphs against the generator's planted extras
/// (gold nodes beyond the language-graph prefix).
RecoveryReport vsh_recovery(const TranslationModel& model,
                            const std::vector<TrainExample>& examples);

struct CorpusGrowth {
  GrowthReport planted;       // skeleton topology vs gold visual graphs
  GrowthReport hallucinated;  // skeleton vs model completion
  bool has_hallucinated = false;
};

CorpusGrowth corpus_growth(const std::vector<TrainExample>& examples,
                           const TranslationModel* model);

struct GradcheckEntry {
  std::string loss_name;
  num::FdReport report;
};

struct GradcheckResult {
  std::vector<GradcheckEntry> entries;
  bool passed(double tol = 1e-4) const;
};

/// Finite-difference check of every loss on a miniature fixed batch with
/// fresh random parameters.
GradcheckResult run_gradcheck(uint64_t seed);

}  // namespace sgp
