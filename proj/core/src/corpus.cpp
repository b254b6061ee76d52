#include "sgp/corpus.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "sgp/params.hpp"

namespace sgp {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {
std::atomic<uint64_t> g_reference_reads{0};
}

const std::vector<std::string>& TrainExample::reference() const {
  g_reference_reads.fetch_add(1, std::memory_order_relaxed);
  return y_ref_;
}

void TrainExample::set_reference(std::vector<std::string> y) { y_ref_ = std::move(y); }

uint64_t TrainExample::reference_reads() {
  return g_reference_reads.load(std::memory_order_relaxed);
}

void TrainExample::reset_reference_reads() {
  g_reference_reads.store(0, std::memory_order_relaxed);
}

// ---- gold visual graphs ---------------------------------------------------------

SceneGraph build_gold_vsg(const SceneGraph& lsg, const ToyGrammar& grammar) {
  SceneGraph vsg;
  vsg.modality = Modality::Visual;
  for (const auto& node : lsg.nodes)
    vsg.add_node(node.kind, grammar.map_token(node.label));
  vsg.edges = lsg.edges;

  // Source-label object nodes in mention (id) order drive the plant rules.
  std::vector<std::pair<int, std::string>> objects;  // (vsg id, source label)
  for (size_t i = 0; i < lsg.nodes.size(); ++i)
    if (lsg.nodes[i].kind == NodeKind::Object)
      objects.push_back({static_cast<int>(i), lsg.nodes[i].label});

  auto in_list = [](const std::vector<std::string>& list, const std::string& s) {
    for (const auto& x : list)
      if (x == s) return true;
    return false;
  };

  for (const auto& rule : grammar.object_plants) {
    for (const auto& [id, src_label] : objects) {
      if (!in_list(rule.triggers, src_label)) continue;
      int rel = vsg.add_node(NodeKind::Relation, rule.relation_label);
      int obj = vsg.add_node(NodeKind::Object, rule.object_label);
      vsg.add_edge(id, rel);
      vsg.add_edge(rel, obj);
      break;  // one plant per rule per scene
    }
  }
  for (const auto& rule : grammar.attribute_plants) {
    for (const auto& [id, src_label] : objects) {
      if (!in_list(rule.triggers, src_label)) continue;
      int attr = vsg.add_node(NodeKind::Attribute, rule.attribute_label);
      vsg.add_edge(id, attr);
      break;
    }
  }
  for (const auto& rule : grammar.edge_plants) {
    int first = -1, second = -1;
    for (const auto& [id, src_label] : objects) {
      if (!in_list(rule.triggers, src_label)) continue;
      if (first < 0) {
        first = id;
      } else if (id != first) {
        second = id;
        break;
      }
    }
    if (second < 0) continue;
    int rel = vsg.add_node(NodeKind::Relation, rule.relation_label);
    vsg.add_edge(first, rel);
    vsg.add_edge(rel, second);
  }
  return vsg;
}

num::Tensor codebook_feature(const SceneGraph& vsg, const ToyGrammar& grammar,
                             int z_dim) {
  num::Tensor z({z_dim});
  uint64_t fp = grammar.fingerprint();
  double scale = 1.0 / std::sqrt(static_cast<double>(z_dim));
  for (const auto& node : vsg.nodes) {
    uint64_t h = fp;
    for (unsigned char c : node.label) h = (h ^ c) * 0x100000001b3ULL;
    std::mt19937_64 rng(num::splitmix64(h));
    std::normal_distribution<double> dist(0.0, scale);
    for (int j = 0; j < z_dim; ++j) z[j] += dist(rng);
  }
  return z;
}

// ---- generation -------------------------------------------------------------------

namespace {

std::vector<std::string> sample_sentence(const ToyGrammar& g,
                                         const ToyGrammar::Template& tpl,
                                         std::mt19937_64& rng) {
  std::vector<std::string> slots;
  {
    std::istringstream is(tpl.pattern);
    std::string s;
    while (is >> s) slots.push_back(s);
  }
  auto pick = [&rng](const std::vector<std::string>& pool, std::set<size_t>* used) {
    std::uniform_int_distribution<size_t> dist(0, pool.size() - 1);
    size_t k = dist(rng);
    if (used) {
      if (used->size() >= pool.size())
        throw DataError("gen_corpus: vocabulary too small for template");
      while (used->count(k)) k = dist(rng);
      used->insert(k);
    }
    return k;
  };

  std::vector<std::string> tokens(slots.size());
  std::set<size_t> used_nouns;
  size_t i = 0;
  while (i < slots.size()) {
    if (slots[i] == "N") {
      tokens[i] = g.nouns[pick(g.nouns, &used_nouns)];
      ++i;
    } else if (slots[i] == "A") {
      tokens[i] = g.adjectives[pick(g.adjectives, nullptr)];
      ++i;
    } else if (slots[i] == "P") {
      tokens[i] = g.prepositions[pick(g.prepositions, nullptr)];
      ++i;
    } else {  // verb run: distinct verbs emitted in vocabulary order
      size_t j = i;
      while (j < slots.size() && slots[j] == "V") ++j;
      std::set<size_t> run;
      while (run.size() < j - i) run.insert(pick(g.verbs, nullptr));
      size_t k = i;
      for (size_t idx : run) tokens[k++] = g.verbs[idx];
      i = j;
    }
  }
  return tokens;
}

}  // namespace

Dataset gen_corpus(const ToyGrammar& grammar, int n_train, int n_test,
                   uint64_t seed, int z_dim) {
  if (n_train < 1) throw DataError("gen_corpus: n_train must be >= 1");
  grammar.check();

  std::vector<const ToyGrammar::Template*> gen_templates;
  double total_w = 0.0;
  for (const auto& t : grammar.templates)
    if (t.generative && t.weight > 0.0) {
      gen_templates.push_back(&t);
      total_w += t.weight;
    }
  if (gen_templates.empty())
    throw DataError("gen_corpus: grammar has no generative templates");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.1);

  int want = n_train + n_test;
  std::set<std::string> seen;
  std::vector<TrainExample> examples;
  int64_t attempts = 0;
  const int64_t max_attempts = 200LL * want + 1000;
  while (static_cast<int>(examples.size()) < want) {
    if (++attempts > max_attempts)
      throw DataError(
          "gen_corpus: vocabulary too small for a disjoint split of " +
          std::to_string(want) + " sentences");
    double r = unit(rng) * total_w;
    const ToyGrammar::Template* tpl = gen_templates.back();
    for (const auto* t : gen_templates) {
      if (r < t->weight) {
        tpl = t;
        break;
      }
      r -= t->weight;
    }
    std::vector<std::string> tokens = sample_sentence(grammar, *tpl, rng);
    std::string key = join_tokens(tokens);
    if (!seen.insert(key).second) continue;

    TrainExample ex;
    ex.x = tokens;
    ex.lsg = parse_toy_lsg(tokens, grammar, Side::Source).graph;
    ex.vsg = build_gold_vsg(ex.lsg, grammar);
    ex.z = codebook_feature(ex.vsg, grammar, z_dim);
    for (int j = 0; j < z_dim; ++j) ex.z[j] += noise(rng);
    std::vector<std::string> y;
    for (const auto& t : tokens) y.push_back(grammar.map_token(t));
    ex.set_reference(std::move(y));
    examples.push_back(std::move(ex));
  }

  Dataset ds;
  ds.grammar = grammar;
  ds.train.assign(examples.begin(), examples.begin() + n_train);
  ds.test.assign(examples.begin() + n_train, examples.end());
  return ds;
}

// ---- persistence -------------------------------------------------------------------

namespace {

ordered_json example_to_json(const TrainExample& ex) {
  ordered_json j;
  j["x"] = ex.x;
  j["lsg"] = json::parse(serialize(ex.lsg));
  j["vsg"] = json::parse(serialize(ex.vsg));
  std::vector<double> z(static_cast<size_t>(ex.z.size()));
  for (int64_t i = 0; i < ex.z.size(); ++i) z[static_cast<size_t>(i)] = ex.z[i];
  j["z"] = z;
  j["y_ref"] = ex.reference();
  return j;
}

TrainExample example_from_json(const json& j) {
  TrainExample ex;
  ex.x = j.at("x").get<std::vector<std::string>>();
  ex.lsg = deserialize(j.at("lsg").dump());
  ex.vsg = deserialize(j.at("vsg").dump());
  ex.z = num::Tensor::vec(j.at("z").get<std::vector<double>>());
  ex.set_reference(j.at("y_ref").get<std::vector<std::string>>());
  return ex;
}

void write_split(const std::string& path, const std::vector<TrainExample>& split) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& ex : split) out << example_to_json(ex).dump() << "\n";
}

std::vector<TrainExample> read_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<TrainExample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(example_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream g(dir + "/grammar.json");
    if (!g) throw DataError("cannot write " + dir + "/grammar.json");
    g << ds.grammar.to_json() << "\n";
  }
  write_split(dir + "/train.jsonl", ds.train);
  write_split(dir + "/test.jsonl", ds.test);
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream g(dir + "/grammar.json");
  if (!g) throw DataError("cannot open " + dir + "/grammar.json");
  std::string text((std::istreambuf_iterator<char>(g)),
                   std::istreambuf_iterator<char>());
  Dataset ds;
  ds.grammar = ToyGrammar::from_json(text);
  ds.train = read_split(dir + "/train.jsonl");
  ds.test = read_split(dir + "/test.jsonl");
  return ds;
}

}  // namespace sgp
