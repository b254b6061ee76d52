#include <benchmark/benchmark.h>

#include "sgp/bleu.hpp"
#include "sgp/corpus.hpp"
#include "sgp/model.hpp"
#include "sgp/objectives.hpp"

using namespace sgp;

namespace {

struct Fixture {
  ToyGrammar grammar = default_grammar();
  Dataset data;
  std::unique_ptr<TranslationModel> model;
  Fixture() {
    ScheduleConfig cfg;
    data = gen_corpus(grammar, 32, 8, 7, cfg.z_dim);
    std::vector<SceneGraph> vsgs;
    for (const auto& ex : data.train) vsgs.push_back(ex.vsg);
    model = std::make_unique<TranslationModel>(grammar, build_vocabularies(vsgs), cfg);
  }
};

Fixture& fixture() {
  static Fixture fx;
  return fx;
}

}  // namespace

static void BM_EncodeGraph(benchmark::State& state) {
  Fixture& fx = fixture();
  const auto& ex = fx.data.train[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        fx.model->encode_raw(ex.lsg, TranslationModel::encoder_prefix_lsg()));
  }
}
BENCHMARK(BM_EncodeGraph);

static void BM_TranslateGreedy(benchmark::State& state) {
  Fixture& fx = fixture();
  const auto& ex = fx.data.train[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(fx.model->translate(ex.lsg, ex.vsg, Side::Target));
  }
}
BENCHMARK(BM_TranslateGreedy);

static void BM_Hallucinate(benchmark::State& state) {
  Fixture& fx = fixture();
  const auto& ex = fx.data.train[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(fx.model->hallucinate(ex.lsg));
  }
}
BENCHMARK(BM_Hallucinate);

static void BM_TranslateNllBackward(benchmark::State& state) {
  Fixture& fx = fixture();
  const auto& ex = fx.data.train[0];
  for (auto _ : state) {
    num::Tape tape;
    fx.model->params().zero_grad();
    num::Var table = fx.model->table(tape);
    num::Var loss = fx.model->translate_nll(tape, ex.lsg, ex.vsg, ex.reference(),
                                            Side::Target, table);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.val(loss).item());
  }
}
BENCHMARK(BM_TranslateNllBackward);

static void BM_Bleu(benchmark::State& state) {
  Fixture& fx = fixture();
  std::vector<std::vector<std::string>> refs;
  for (const auto& ex : fx.data.train) refs.push_back(ex.reference());
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_bleu(refs, refs));
  }
}
BENCHMARK(BM_Bleu);

BENCHMARK_MAIN();
