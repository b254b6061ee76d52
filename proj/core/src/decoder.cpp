#include "sgp/decoder.hpp"

#include <cmath>

#include "sgp/errors.hpp"

namespace sgp {

using num::Tape;
using num::Tensor;
using num::Var;

namespace {
constexpr double kBosMask = -1e30;
}

int DecoderSlice::index_of(const std::string& token) const {
  for (size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] == token) return static_cast<int>(i);
  throw DataError("token not decodable in this language: '" + token + "'");
}

void create_decoder_params(num::ParameterStore& store, const std::string& prefix,
                           int dim, int vocab_size, uint64_t seed) {
  store.create_uniform(prefix + ".w_ss", {dim, dim}, dim, seed);
  store.create_uniform(prefix + ".w_ii", {dim, dim}, dim, seed);
  store.create(prefix + ".b", {dim});
  store.create(prefix + ".bias", {vocab_size});
}

std::vector<std::string> decode_greedy(const DecoderSlice& slice,
                                       const Tensor& pooled, const Tensor& table,
                                       const num::ParameterStore& store,
                                       const std::string& prefix, int max_len) {
  if (max_len < 1) throw ContractError("decode_greedy: max_len must be >= 1");
  int d = pooled.dim(0);
  int v = static_cast<int>(slice.tokens.size());
  const Tensor& w_ss = store.get(prefix + ".w_ss").value;
  const Tensor& w_ii = store.get(prefix + ".w_ii").value;
  const Tensor& b = store.get(prefix + ".b").value;
  const Tensor& bias = store.get(prefix + ".bias").value;

  Tensor state = pooled;
  int prev = slice.bos;
  std::vector<std::string> out;
  for (int step = 0; step < max_len; ++step) {
    Tensor inp({d});
    int prow = slice.table_rows[static_cast<size_t>(prev)];
    for (int j = 0; j < d; ++j) inp[j] = table.at(prow, j) + pooled[j];
    Tensor z = num::raw::matvec(w_ss, state);
    Tensor zi = num::raw::matvec(w_ii, inp);
    for (int j = 0; j < d; ++j) z[j] = std::tanh(z[j] + zi[j] + b[j]);
    state = std::move(z);

    int best = -1;
    double best_score = 0.0;
    for (int t = 0; t < v; ++t) {
      if (t == slice.bos) continue;
      const double* emb = table.data() +
                          static_cast<int64_t>(slice.table_rows[static_cast<size_t>(t)]) * d;
      double s = bias[t];
      for (int j = 0; j < d; ++j) s += emb[j] * state[j];
      if (best < 0 || s > best_score) {
        best = t;
        best_score = s;
      }
    }
    if (best == slice.eos) break;
    out.push_back(slice.tokens[static_cast<size_t>(best)]);
    prev = best;
  }
  return out;
}

Var decode_nll(Tape& tape, const DecoderSlice& slice, Var pooled, Var table,
               const std::vector<std::string>& target,
               num::ParameterStore& store, const std::string& prefix) {
  if (target.empty())
    throw ContractError("decode_nll: empty target sentence");
  Var w_ss = tape.param(store.get(prefix + ".w_ss"));
  Var w_ii = tape.param(store.get(prefix + ".w_ii"));
  Var b = tape.param(store.get(prefix + ".b"));
  Var bias = tape.param(store.get(prefix + ".bias"));
  Var emb_slice = num::rows_gather(table, slice.table_rows);

  Tensor mask_t({static_cast<int>(slice.tokens.size())});
  mask_t[slice.bos] = kBosMask;
  Var mask = tape.constant(std::move(mask_t));

  std::vector<int> steps;
  steps.reserve(target.size() + 1);
  for (const auto& tok : target) steps.push_back(slice.index_of(tok));
  steps.push_back(slice.eos);

  Var state = pooled;
  int prev = slice.bos;
  std::vector<Var> terms;
  for (int tgt : steps) {
    Var inp = num::add(num::row(emb_slice, prev), pooled);
    state = num::tanh_op(num::add(num::add(num::matvec(w_ss, state),
                                           num::matvec(w_ii, inp)),
                                  b));
    Var logits = num::add(num::add(num::matvec(emb_slice, state), bias), mask);
    terms.push_back(num::neg(num::pick(num::log_softmax(logits), tgt)));
    prev = tgt;
  }
  return num::sum(num::stack_scalars(terms));
}

}  // namespace sgp
