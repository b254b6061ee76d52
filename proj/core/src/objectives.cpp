#include "sgp/objectives.hpp"

namespace sgp {

using num::Tape;
using num::Tensor;
using num::Var;

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::CMA: return "cma";
    case LossKind::REC: return "rec";
    case LossKind::VCB: return "vcb";
    case LossKind::CPB: return "cpb";
    case LossKind::VSH: return "vsh";
  }
  return "?";
}

std::set<LossKind> training_schedule(int stage) {
  switch (stage) {
    case 1: return {LossKind::CMA, LossKind::REC};
    case 2: return {LossKind::VCB, LossKind::CPB, LossKind::VSH};
    case 3:
      return {LossKind::CMA, LossKind::REC, LossKind::VCB, LossKind::CPB,
              LossKind::VSH};
    default:
      throw ContractError("training_schedule: stage must be 1, 2 or 3, got " +
                          std::to_string(stage));
  }
}

std::optional<Var> loss_cma(Tape& tape, Var lsg_reps, Var vsg_reps, double alpha,
                            double tau) {
  if (!(tau > 0.0))
    throw NumericError("loss_cma: temperature must be positive");
  int nl = tape.val(lsg_reps).dim(0);
  int nv = tape.val(vsg_reps).dim(0);
  if (nl < 1 || nv < 1)
    throw ContractError("loss_cma: representation sets must be nonempty");

  std::vector<Var> anchor_terms;
  for (int i = 0; i < nl; ++i) {
    Var ri = num::row(lsg_reps, i);
    std::vector<Var> sims;
    std::vector<int> positives;
    sims.reserve(static_cast<size_t>(nv));
    for (int j = 0; j < nv; ++j) {
      Var s = num::cosine_similarity(ri, num::row(vsg_reps, j));
      if (tape.val(s).item() > alpha) positives.push_back(j);
      sims.push_back(s);
    }
    if (positives.empty()) continue;
    Var logp = num::log_softmax(num::stack_scalars(sims), tau);
    std::vector<Var> terms;
    for (int j : positives) terms.push_back(num::neg(num::pick(logp, j)));
    anchor_terms.push_back(terms.size() == 1
                               ? terms[0]
                               : num::sum(num::stack_scalars(terms)));
  }
  if (anchor_terms.empty()) return std::nullopt;
  return num::scale(num::sum(num::stack_scalars(anchor_terms)),
                    1.0 / static_cast<double>(anchor_terms.size()));
}

Var loss_rec(Tape& tape, TranslationModel& model, Var lsg_reps, Var vsg_reps,
             const std::vector<std::string>& x, const Tensor& z, Var table_var) {
  if (x.empty()) throw ContractError("loss_rec: empty sentence");
  Var text = model.caption_nll(tape, vsg_reps, x, Side::Source, table_var);
  Var pooled_l = num::pool_mean(lsg_reps);
  Var z_hat = num::add(num::matvec(tape.param(model.params().get("rec.z.w")), pooled_l),
                       tape.param(model.params().get("rec.z.b")));
  Var reg = num::mse(z_hat, tape.constant(z));
  return num::add(text, reg);
}

namespace {

// Shared by both back-translation losses: generated token sequences are data
// by the time the tape sees them, so no gradient reaches the generator.
std::optional<SceneGraph> parse_or_null(const std::vector<std::string>& tokens,
                                        const ToyGrammar& grammar, Side side) {
  if (tokens.empty()) return std::nullopt;
  try {
    return parse_toy_lsg(tokens, grammar, side).graph;
  } catch (const DataError&) {
    return std::nullopt;
  }
}

}  // namespace

std::optional<Var> loss_vcb(Tape& tape, TranslationModel& model,
                            const ToyGrammar& grammar, const TrainExample& ex,
                            Var table_var, LossCounters& counters) {
  std::vector<std::string> y_bar = model.translate(ex.lsg, ex.vsg, Side::Target);
  auto lsg_y = parse_or_null(y_bar, grammar, Side::Target);
  if (!lsg_y) {
    ++counters.vcb_skipped;
    return std::nullopt;
  }
  return model.translate_nll(tape, *lsg_y, ex.vsg, ex.x, Side::Source, table_var);
}

std::optional<Var> loss_cpb(Tape& tape, TranslationModel& model,
                            const ToyGrammar& grammar, const TrainExample& ex,
                            Var table_var, LossCounters& counters) {
  std::vector<std::string> x_bar = model.caption(ex.vsg, Side::Source);
  std::vector<std::string> y_bar = model.caption(ex.vsg, Side::Target);
  auto lsg_x = parse_or_null(x_bar, grammar, Side::Source);
  auto lsg_y = parse_or_null(y_bar, grammar, Side::Target);
  if (!lsg_x || !lsg_y) {
    ++counters.cpb_skipped;
    return std::nullopt;
  }
  Var to_src = model.translate_nll(tape, *lsg_y, ex.vsg, x_bar, Side::Source, table_var);
  Var to_tgt = model.translate_nll(tape, *lsg_x, ex.vsg, y_bar, Side::Target, table_var);
  return num::add(to_src, to_tgt);
}

Var total_loss(const std::vector<std::pair<Var, double>>& terms) {
  if (terms.empty()) throw ContractError("total_loss: no loss components");
  std::vector<Var> scaled;
  scaled.reserve(terms.size());
  for (const auto& [v, w] : terms) scaled.push_back(num::scale(v, w));
  return scaled.size() == 1 ? scaled[0] : num::sum(num::stack_scalars(scaled));
}

}  // namespace sgp
