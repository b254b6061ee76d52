#pragma once

#include <string>
#include <vector>

#include "sgp/config.hpp"
#include "sgp/decoder.hpp"
#include "sgp/encoder.hpp"
#include "sgp/fusion.hpp"
#include "sgp/grammar.hpp"
#include "sgp/params.hpp"
#include "sgp/vsh.hpp"

namespace sgp {

/// The assembled translation system: one shared label/token embedding table,
/// three GCN encoders (language graphs, visual graphs, fused target side),
/// two language decoders with tied output projections, the visual scene
/// hallucination augmentors, and the image-feature regression head.
class TranslationModel {
 public:
  TranslationModel(const ToyGrammar& grammar, const VsgVocabularies& vsg_vocab,
                   const ScheduleConfig& cfg);

  num::ParameterStore& params() { return store_; }
  const num::ParameterStore& params() const { return store_; }
  const LabelVocab& labels() const { return labels_; }
  const VsgVocabularies& vsg_vocab() const { return vsg_vocab_; }
  const ScheduleConfig& config() const { return cfg_; }
  const DecoderSlice& slice(Side side) const {
    return side == Side::Source ? src_slice_ : tgt_slice_;
  }
  EncoderConfig encoder_config() const { return {cfg_.dim, 2}; }
  VshConfig vsh_config() const;
  static std::string decoder_prefix(Side side) {
    return side == Side::Source ? "dec.src" : "dec.tgt";
  }

  // --- tape (training) paths ---
  num::Var table(num::Tape& tape) { return tape.param(store_.get("emb.table")); }
  num::Var encode(num::Tape& tape, const SceneGraph& g, const std::string& prefix,
                  num::Var table_var);
  /// Fused-graph teacher-forced NLL of `target` through the encoder stack,
  /// fusion, target-side GCN, pooling, and the side's decoder.
  num::Var translate_nll(num::Tape& tape, const SceneGraph& lsg,
                         const SceneGraph& vsg,
                         const std::vector<std::string>& target, Side out_side,
                         num::Var table_var);
  /// Teacher-forced NLL of decoding `target` from the pooled visual graph
  /// alone (the graph-to-text reconstruction/captioning path).
  num::Var caption_nll(num::Tape& tape, num::Var vsg_reps,
                       const std::vector<std::string>& target, Side out_side,
                       num::Var table_var);

  // --- raw (inference) paths ---
  num::Tensor encode_raw(const SceneGraph& g, const std::string& prefix) const;
  std::vector<std::string> translate(const SceneGraph& lsg, const SceneGraph& vsg,
                                     Side out_side) const;
  std::vector<std::string> caption(const SceneGraph& vsg, Side out_side) const;
  /// Visual scene hallucination: sketch the skeleton, then complete vision.
  SceneGraph hallucinate(const SceneGraph& lsg) const;
  SceneGraph sketch(const SceneGraph& lsg) const;

  /// UNMT-style warm start for back-translation: the target decoder adopts
  /// the trained source decoder's transition weights at stage-2 entry.
  void bootstrap_target_decoder();

  static std::string encoder_prefix_lsg() { return "enc.lsg"; }
  static std::string encoder_prefix_vsg() { return "enc.vsg"; }
  static std::string encoder_prefix_tgt() { return "enc.tgt"; }

 private:
  ScheduleConfig cfg_;
  VsgVocabularies vsg_vocab_;
  LabelVocab labels_;
  DecoderSlice src_slice_, tgt_slice_;
  num::ParameterStore store_;
};

}  // namespace sgp
