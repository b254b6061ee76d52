#pragma once

#include <string>
#include <vector>

#include "sgp/params.hpp"
#include "sgp/tape.hpp"

namespace sgp {

inline constexpr const char* kBosToken = "<s>";
inline constexpr const char* kEosToken = "</s>";

/// Per-language view over the shared embedding table: the decodable tokens,
/// their table rows, and the positions of the sequence markers. Output
/// logits are tied to the embedding rows plus a per-token bias.
struct DecoderSlice {
  std::vector<std::string> tokens;  // includes BOS/EOS
  std::vector<int> table_rows;      // parallel rows into the shared table
  int bos = -1, eos = -1;           // indices into `tokens`

  int index_of(const std::string& token) const;  // DataError on unknown
};

/// Single-layer recurrent decoder parameters under `prefix`:
/// w_ss (d,d), w_ii (d,d), b (d) and the tied-output bias over the slice.
void create_decoder_params(num::ParameterStore& store, const std::string& prefix,
                           int dim, int vocab_size, uint64_t seed);

/// Greedy decoding conditioned on the pooled graph vector: the pooled vector
/// is the initial state and is added to every step input. Stops at EOS or
/// max_len; BOS is masked and never emitted. Returns content tokens only.
std::vector<std::string> decode_greedy(const DecoderSlice& slice,
                                       const num::Tensor& pooled,
                                       const num::Tensor& table,
                                       const num::ParameterStore& store,
                                       const std::string& prefix, int max_len);

/// Teacher-forced negative log-likelihood of `target` (content tokens; an EOS
/// step is appended). Differentiable in the decoder, table, and pooled input.
num::Var decode_nll(num::Tape& tape, const DecoderSlice& slice, num::Var pooled,
                    num::Var table, const std::vector<std::string>& target,
                    num::ParameterStore& store, const std::string& prefix);

}  // namespace sgp
