#include "sgp/model.hpp"

namespace sgp {

using num::Tape;
using num::Tensor;
using num::Var;

TranslationModel::TranslationModel(const ToyGrammar& grammar,
                                   const VsgVocabularies& vsg_vocab,
                                   const ScheduleConfig& cfg)
    : cfg_(cfg), vsg_vocab_(vsg_vocab) {
  cfg_.validate_fields();

  labels_.add(kBosToken);
  labels_.add(kEosToken);
  for (const auto& t : grammar.source_tokens()) labels_.add(t);
  for (const auto& t : grammar.target_tokens()) labels_.add(t);
  for (const auto& t : grammar.visual_extra_labels()) labels_.add(t);
  // Vocabulary tables scanned from training data may carry labels beyond the
  // grammar (none with the bundled generator, but keep the table total).
  for (const auto* tab : {&vsg_vocab_.objects, &vsg_vocab_.attributes,
                          &vsg_vocab_.relations})
    for (const auto& t : *tab) labels_.add(t);

  auto make_slice = [&](Side side) {
    DecoderSlice s;
    s.tokens = {kBosToken, kEosToken};
    s.bos = 0;
    s.eos = 1;
    const auto content = side == Side::Source ? grammar.source_tokens()
                                              : grammar.target_tokens();
    s.tokens.insert(s.tokens.end(), content.begin(), content.end());
    for (const auto& t : s.tokens) s.table_rows.push_back(labels_.id(t));
    return s;
  };
  src_slice_ = make_slice(Side::Source);
  tgt_slice_ = make_slice(Side::Target);

  int d = cfg_.dim;
  store_.create_uniform("emb.table", {labels_.size(), d}, d, cfg_.seed);
  EncoderConfig ec = encoder_config();
  create_gcn_params(store_, encoder_prefix_lsg(), ec, cfg_.seed);
  create_gcn_params(store_, encoder_prefix_vsg(), ec, cfg_.seed);
  create_gcn_params(store_, encoder_prefix_tgt(), ec, cfg_.seed);
  create_decoder_params(store_, "dec.src", d,
                        static_cast<int>(src_slice_.tokens.size()), cfg_.seed);
  create_decoder_params(store_, "dec.tgt", d,
                        static_cast<int>(tgt_slice_.tokens.size()), cfg_.seed);
  create_augmentor_params(store_, vsg_vocab_, vsh_config(), cfg_.seed);
  store_.create_uniform("rec.z.w", {cfg_.z_dim, d}, d, cfg_.seed);
  store_.create("rec.z.b", {cfg_.z_dim});
}

VshConfig TranslationModel::vsh_config() const {
  VshConfig v;
  v.dim = cfg_.dim;
  v.epsilon_bias = cfg_.epsilon_bias;
  return v;
}

Var TranslationModel::encode(Tape& tape, const SceneGraph& g,
                             const std::string& prefix, Var table_var) {
  Var feats = embed_nodes(g, table_var, labels_);
  return gcn_forward(tape, GraphView::of(g), feats, store_, prefix,
                     encoder_config());
}

Tensor TranslationModel::encode_raw(const SceneGraph& g,
                                    const std::string& prefix) const {
  Tensor feats = embed_nodes_raw(g, store_.get("emb.table").value, labels_);
  return gcn_forward_raw(GraphView::of(g), feats, store_, prefix,
                         encoder_config());
}

Var TranslationModel::translate_nll(Tape& tape, const SceneGraph& lsg,
                                    const SceneGraph& vsg,
                                    const std::vector<std::string>& target,
                                    Side out_side, Var table_var) {
  Var lsg_reps = encode(tape, lsg, encoder_prefix_lsg(), table_var);
  Var vsg_reps = encode(tape, vsg, encoder_prefix_vsg(), table_var);
  FusedGraph fused = align_and_fuse(lsg, tape.val(lsg_reps), vsg,
                                    tape.val(vsg_reps), cfg_.alpha);
  Var init = fused_init_reps(fused, lsg_reps, vsg_reps);
  Var tgt_reps = gcn_forward(tape, GraphView::of(fused.graph), init, store_,
                             encoder_prefix_tgt(), encoder_config());
  Var pooled = num::pool_mean(tgt_reps);
  return decode_nll(tape, slice(out_side), pooled, table_var, target, store_,
                    decoder_prefix(out_side));
}

Var TranslationModel::caption_nll(Tape& tape, Var vsg_reps,
                                  const std::vector<std::string>& target,
                                  Side out_side, Var table_var) {
  Var pooled = num::pool_mean(vsg_reps);
  return decode_nll(tape, slice(out_side), pooled, table_var, target, store_,
                    decoder_prefix(out_side));
}

namespace {

Tensor pool_rows_raw(const Tensor& m) {
  int n = m.dim(0), d = m.dim(1);
  Tensor out({d});
  double inv = 1.0 / static_cast<double>(n);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < d; ++j) out[j] += inv * m.at(r, j);
  return out;
}

}  // namespace

std::vector<std::string> TranslationModel::translate(const SceneGraph& lsg,
                                                     const SceneGraph& vsg,
                                                     Side out_side) const {
  Tensor lsg_reps = encode_raw(lsg, encoder_prefix_lsg());
  Tensor vsg_reps = encode_raw(vsg, encoder_prefix_vsg());
  FusedGraph fused = align_and_fuse(lsg, lsg_reps, vsg, vsg_reps, cfg_.alpha);
  Tensor init = fused_init_reps_raw(fused, lsg_reps, vsg_reps);
  Tensor tgt_reps = gcn_forward_raw(GraphView::of(fused.graph), init, store_,
                                    encoder_prefix_tgt(), encoder_config());
  Tensor pooled = pool_rows_raw(tgt_reps);
  return decode_greedy(slice(out_side), pooled, store_.get("emb.table").value,
                       store_, decoder_prefix(out_side), cfg_.max_len);
}

std::vector<std::string> TranslationModel::caption(const SceneGraph& vsg,
                                                   Side out_side) const {
  Tensor vsg_reps = encode_raw(vsg, encoder_prefix_vsg());
  Tensor pooled = pool_rows_raw(vsg_reps);
  return decode_greedy(slice(out_side), pooled, store_.get("emb.table").value,
                       store_, decoder_prefix(out_side), cfg_.max_len);
}

SceneGraph TranslationModel::sketch(const SceneGraph& lsg) const {
  return sketch_skeleton(lsg, vsg_vocab_, labels_, store_.get("emb.table").value);
}

SceneGraph TranslationModel::hallucinate(const SceneGraph& lsg) const {
  return complete_vision(sketch(lsg), vsg_vocab_, labels_, store_, vsh_config());
}

void TranslationModel::bootstrap_target_decoder() {
  for (const char* suffix : {".w_ss", ".w_ii", ".b"})
    store_.copy_values("dec.src" + std::string(suffix),
                       "dec.tgt" + std::string(suffix));
}

}  // namespace sgp
