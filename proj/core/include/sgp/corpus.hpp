#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgp/grammar.hpp"
#include "sgp/scene_graph.hpp"
#include "sgp/tensor.hpp"

namespace sgp {

/// One training/evaluation item. The reference translation exists purely for
/// evaluation; every read goes through reference(), which bumps a global
/// audit counter so tests can assert the training loop never touched it.
class TrainExample {
 public:
  std::vector<std::string> x;  // source tokens
  SceneGraph lsg;
  SceneGraph vsg;  // gold visual graph (token-mapped labels + planted extras)
  num::Tensor z;   // paired image feature surrogate

  const std::vector<std::string>& reference() const;
  void set_reference(std::vector<std::string> y);

  static uint64_t reference_reads();
  static void reset_reference_reads();

 private:
  std::vector<std::string> y_ref_;
};

struct Dataset {
  ToyGrammar grammar;
  std::vector<TrainExample> train;
  std::vector<TrainExample> test;
};

/// Deterministic corpus generation: disjoint train/test sentence sets, gold
/// visual graphs with planted extras, and image features z built as the sum
/// of per-label codebook rows plus sigma=0.1 Gaussian noise.
Dataset gen_corpus(const ToyGrammar& grammar, int n_train, int n_test,
                   uint64_t seed, int z_dim = 64);

/// Builds the gold visual graph for a language graph: token-mapped copy (node
/// ids preserved as a prefix) plus planted extras appended in rule order.
SceneGraph build_gold_vsg(const SceneGraph& lsg, const ToyGrammar& grammar);

/// Codebook feature for a visual graph (no noise).
num::Tensor codebook_feature(const SceneGraph& vsg, const ToyGrammar& grammar,
                             int z_dim);

void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace sgp
