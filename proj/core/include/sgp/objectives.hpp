#pragma once

#include <optional>
#include <set>
#include <vector>

#include "sgp/corpus.hpp"
#include "sgp/model.hpp"
#include "sgp/tape.hpp"

namespace sgp {

enum class LossKind { CMA, REC, VCB, CPB, VSH };

std::string to_string(LossKind k);

/// Staged schedule: stage 1 aligns the modalities, stage 2 runs the
/// back-translation family with hallucination training, stage 3 fine-tunes
/// everything jointly.
std::set<LossKind> training_schedule(int stage);

/// Per-batch loss values for logging; total is the plain (weighted) sum.
struct LossBundle {
  double cma = 0, rec = 0, vcb = 0, cpb = 0, vsh = 0;
  int stage = 0;
  double total() const { return cma + rec + vcb + cpb + vsh; }
};

struct LossCounters {
  int vcb_skipped = 0;  // empty or unparseable intermediate translation
  int cpb_skipped = 0;  // empty or unparseable caption
  int vsh_skipped = 0;  // unalignable gold pair
};

/// Contrastive cross-modal alignment (positives are pairs whose cosine
/// exceeds alpha; the positive term stays in the denominator so the loss is
/// nonnegative). Mean over anchors that have at least one positive; anchors
/// without positives contribute nothing. Returns nullopt when no pair
/// qualifies (loss is exactly zero with no gradient).
std::optional<num::Var> loss_cma(num::Tape& tape, num::Var lsg_reps,
                                 num::Var vsg_reps, double alpha, double tau);

/// Cross-reconstruction: decode the source sentence from the pooled visual
/// graph plus regress the image feature from the pooled language graph.
num::Var loss_rec(num::Tape& tape, TranslationModel& model, num::Var lsg_reps,
                  num::Var vsg_reps, const std::vector<std::string>& x,
                  const num::Tensor& z, num::Var table_var);

/// Visual-concomitant back-translation, x -> y~ -> x. The forward translation
/// is generated greedily off-tape (no gradient flows into it); the loss
/// teacher-forces x through the reverse translator.
std::optional<num::Var> loss_vcb(num::Tape& tape, TranslationModel& model,
                                 const ToyGrammar& grammar,
                                 const TrainExample& ex, num::Var table_var,
                                 LossCounters& counters);

/// Captioning-pivoted back-translation: pseudo pair <x~, y~> captioned from
/// the visual graph (off-tape), each sentence reconstructed through the
/// opposite-direction translator.
std::optional<num::Var> loss_cpb(num::Tape& tape, TranslationModel& model,
                                 const ToyGrammar& grammar,
                                 const TrainExample& ex, num::Var table_var,
                                 LossCounters& counters);

/// Unweighted (configurable) sum of the active loss terms.
num::Var total_loss(const std::vector<std::pair<num::Var, double>>& terms);

}  // namespace sgp
