#include "sgp/grammar.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sgp {

using nlohmann::json;
using nlohmann::ordered_json;

bool ToyGrammar::lookup(const std::string& token, Side side, TokenCat* cat) const {
  auto scan = [&](const std::vector<std::string>& list, TokenCat c) {
    for (const auto& src : list) {
      const std::string& form = side == Side::Source ? src : token_map.at(src);
      if (form == token) {
        *cat = c;
        return true;
      }
    }
    return false;
  };
  return scan(nouns, TokenCat::Noun) || scan(adjectives, TokenCat::Adjective) ||
         scan(verbs, TokenCat::Verb) || scan(prepositions, TokenCat::Preposition);
}

const std::string& ToyGrammar::map_token(const std::string& src) const {
  auto it = token_map.find(src);
  if (it == token_map.end()) throw DataError("token not in map: " + src);
  return it->second;
}

std::vector<std::string> ToyGrammar::source_tokens() const {
  std::vector<std::string> out;
  for (const auto* list : {&nouns, &adjectives, &verbs, &prepositions})
    out.insert(out.end(), list->begin(), list->end());
  return out;
}

std::vector<std::string> ToyGrammar::target_tokens() const {
  std::vector<std::string> out;
  for (const auto& src : source_tokens()) out.push_back(token_map.at(src));
  return out;
}

std::vector<std::string> ToyGrammar::visual_extra_labels() const {
  std::vector<std::string> out;
  for (const auto& r : object_plants) {
    out.push_back(r.object_label);
    out.push_back(r.relation_label);
  }
  for (const auto& r : attribute_plants) out.push_back(r.attribute_label);
  for (const auto& r : edge_plants) out.push_back(r.relation_label);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void ToyGrammar::check() const {
  auto src = source_tokens();
  std::set<std::string> src_set(src.begin(), src.end());
  if (src_set.size() != src.size())
    throw DataError("grammar: duplicate source tokens");
  std::set<std::string> tgt_set;
  for (const auto& s : src) {
    auto it = token_map.find(s);
    if (it == token_map.end()) throw DataError("grammar: token not mapped: " + s);
    if (!tgt_set.insert(it->second).second)
      throw DataError("grammar: token map is not injective at " + it->second);
  }
  std::set<std::string> noun_set(nouns.begin(), nouns.end());
  for (const auto& r : object_plants)
    for (const auto& t : r.triggers)
      if (!noun_set.count(t)) throw DataError("grammar: plant trigger not a noun: " + t);
  for (const auto& r : attribute_plants)
    for (const auto& t : r.triggers)
      if (!noun_set.count(t)) throw DataError("grammar: plant trigger not a noun: " + t);
  for (const auto& r : edge_plants)
    for (const auto& t : r.triggers)
      if (!noun_set.count(t)) throw DataError("grammar: plant trigger not a noun: " + t);
  for (const auto& t : templates) {
    std::istringstream is(t.pattern);
    std::string slot;
    bool saw_noun = false;
    while (is >> slot) {
      if (slot != "N" && slot != "A" && slot != "V" && slot != "P")
        throw DataError("grammar: bad template slot '" + slot + "' in " + t.pattern);
      if (slot == "N") saw_noun = true;
    }
    if (!saw_noun)
      throw DataError("grammar: template without a noun: " + t.pattern);
  }
}

uint64_t ToyGrammar::fingerprint() const {
  std::string text = to_json();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

std::string ToyGrammar::to_json() const {
  ordered_json j;
  j["nouns"] = nouns;
  j["adjectives"] = adjectives;
  j["verbs"] = verbs;
  j["prepositions"] = prepositions;
  ordered_json map = ordered_json::object();
  for (const auto& s : source_tokens()) map[s] = token_map.at(s);
  j["token_map"] = std::move(map);
  j["templates"] = ordered_json::array();
  for (const auto& t : templates)
    j["templates"].push_back(
        {{"pattern", t.pattern}, {"weight", t.weight}, {"generative", t.generative}});
  j["object_plants"] = ordered_json::array();
  for (const auto& r : object_plants)
    j["object_plants"].push_back({{"triggers", r.triggers},
                                  {"object", r.object_label},
                                  {"relation", r.relation_label}});
  j["attribute_plants"] = ordered_json::array();
  for (const auto& r : attribute_plants)
    j["attribute_plants"].push_back(
        {{"triggers", r.triggers}, {"attribute", r.attribute_label}});
  j["edge_plants"] = ordered_json::array();
  for (const auto& r : edge_plants)
    j["edge_plants"].push_back(
        {{"triggers", r.triggers}, {"relation", r.relation_label}});
  return j.dump(2);
}

ToyGrammar ToyGrammar::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("grammar parse error: ") + e.what());
  }
  try {
    ToyGrammar g;
    g.nouns = j.at("nouns").get<std::vector<std::string>>();
    g.adjectives = j.at("adjectives").get<std::vector<std::string>>();
    g.verbs = j.at("verbs").get<std::vector<std::string>>();
    g.prepositions = j.at("prepositions").get<std::vector<std::string>>();
    for (auto it = j.at("token_map").begin(); it != j.at("token_map").end(); ++it)
      g.token_map[it.key()] = it.value().get<std::string>();
    for (const auto& t : j.at("templates"))
      g.templates.push_back({t.at("pattern").get<std::string>(),
                             t.at("weight").get<double>(),
                             t.at("generative").get<bool>()});
    for (const auto& r : j.at("object_plants"))
      g.object_plants.push_back({r.at("triggers").get<std::vector<std::string>>(),
                                 r.at("object").get<std::string>(),
                                 r.at("relation").get<std::string>()});
    for (const auto& r : j.at("attribute_plants"))
      g.attribute_plants.push_back(
          {r.at("triggers").get<std::vector<std::string>>(),
           r.at("attribute").get<std::string>()});
    for (const auto& r : j.at("edge_plants"))
      g.edge_plants.push_back({r.at("triggers").get<std::vector<std::string>>(),
                               r.at("relation").get<std::string>()});
    g.check();
    return g;
  } catch (const json::exception& e) {
    throw DataError(std::string("grammar format error: ") + e.what());
  }
}

ToyGrammar default_grammar() {
  ToyGrammar g;
  g.nouns = {"dog",  "cat",  "bird", "fish",  "boy",  "girl", "ball",
             "tree", "car",  "house", "book", "cup",  "horse", "frog"};
  g.adjectives = {"red", "blue", "big", "small", "old", "young", "dark", "pale"};
  g.verbs = {"chases", "bites", "licks", "grabs", "sees",  "lifts",
             "pulls",  "pushes", "holds", "kicks", "hits",  "drags"};
  g.prepositions = {"on", "under", "near", "behind", "above", "beside"};
  for (const auto& t : g.source_tokens()) g.token_map[t] = t + "_t";

  // Verb-run templates keep the relation count high relative to objects so
  // object plants dominate the growth statistics.
  g.templates = {
      {"N V V N", 0.08, true},      {"A N V V N", 0.08, true},
      {"N V V A N", 0.08, true},    {"A N V V A N", 0.06, true},
      {"N V V V N", 0.16, true},    {"A N V V V N", 0.14, true},
      {"N V V V A N", 0.12, true},  {"N V V N P N", 0.12, true},
      {"A N V V V A N", 0.10, true}, {"N P N", 0.03, true},
      {"N V N", 0.03, true},        {"A N V N", 0.0, true},
      {"N V A N", 0.0, true},       {"A N V A N", 0.0, true},
      {"N V", 0.0, false},
  };

  auto noun_group = [&](std::initializer_list<int> idx) {
    std::vector<std::string> out;
    for (int i : idx) out.push_back(g.nouns[static_cast<size_t>(i)]);
    return out;
  };
  g.object_plants = {
      {noun_group({0, 4, 8}), "vx_ground", "vx_on"},
      {noun_group({1, 5, 9}), "vx_sky", "vx_under"},
      {noun_group({2, 6, 10}), "vx_field", "vx_in"},
      {noun_group({3, 7, 11}), "vx_wall", "vx_by"},
  };
  g.attribute_plants = {
      {noun_group({12}), "vx_furry"},
      {noun_group({13}), "vx_shiny"},
  };
  g.edge_plants = {
      {noun_group({0, 1, 2, 3, 4, 5}), "vx_beside"},
  };
  g.check();
  return g;
}

ParseResult parse_toy_lsg(const std::vector<std::string>& tokens,
                          const ToyGrammar& grammar, Side side) {
  if (tokens.empty()) throw DataError("parse: empty sentence");

  std::vector<TokenCat> cats(tokens.size());
  std::string pattern;
  for (size_t i = 0; i < tokens.size(); ++i) {
    TokenCat c;
    if (!grammar.lookup(tokens[i], side, &c))
      throw DataError("parse: unknown token '" + tokens[i] + "' at position " +
                      std::to_string(i));
    cats[i] = c;
    if (i) pattern += ' ';
    switch (c) {
      case TokenCat::Noun: pattern += 'N'; break;
      case TokenCat::Adjective: pattern += 'A'; break;
      case TokenCat::Verb: pattern += 'V'; break;
      case TokenCat::Preposition: pattern += 'P'; break;
    }
  }

  bool matched = false;
  size_t best_prefix = 0;
  for (const auto& t : grammar.templates) {
    if (t.pattern == pattern) {
      matched = true;
      break;
    }
    size_t k = 0;
    while (k < pattern.size() && k < t.pattern.size() && pattern[k] == t.pattern[k])
      ++k;
    best_prefix = std::max(best_prefix, k / 2);  // slots are space-separated
  }
  if (!matched) {
    size_t bad = std::min(best_prefix, tokens.size() - 1);
    throw DataError("parse: no template matches; first offending token '" +
                    tokens[bad] + "' at position " + std::to_string(bad));
  }

  ParseResult res;
  res.graph.modality = Modality::Language;
  int n = static_cast<int>(tokens.size());
  std::vector<int> node_of(tokens.size(), -1);
  std::vector<int> next_noun(tokens.size() + 1, -1);
  for (int i = n - 1; i >= 0; --i) {
    next_noun[i] = cats[static_cast<size_t>(i)] == TokenCat::Noun
                       ? i
                       : next_noun[i + 1];
  }

  // First pass: objects get nodes in surface order along with adjectives and
  // relations so ids mirror the sentence.
  int prev_noun = -1;
  for (int i = 0; i < n; ++i) {
    switch (cats[static_cast<size_t>(i)]) {
      case TokenCat::Noun:
        node_of[i] = res.graph.add_node(NodeKind::Object, tokens[static_cast<size_t>(i)]);
        prev_noun = i;
        break;
      case TokenCat::Adjective: {
        if (next_noun[i] < 0)
          throw DataError("parse: adjective '" + tokens[static_cast<size_t>(i)] +
                          "' has no following noun");
        node_of[i] =
            res.graph.add_node(NodeKind::Attribute, tokens[static_cast<size_t>(i)]);
        break;
      }
      case TokenCat::Verb:
      case TokenCat::Preposition: {
        if (prev_noun < 0 || next_noun[i] < 0) {
          res.unmapped.push_back(tokens[static_cast<size_t>(i)]);
          break;
        }
        node_of[i] =
            res.graph.add_node(NodeKind::Relation, tokens[static_cast<size_t>(i)]);
        break;
      }
    }
  }

  prev_noun = -1;
  for (int i = 0; i < n; ++i) {
    switch (cats[static_cast<size_t>(i)]) {
      case TokenCat::Noun:
        prev_noun = i;
        break;
      case TokenCat::Adjective:
        res.graph.add_edge(node_of[next_noun[i]], node_of[i]);
        break;
      case TokenCat::Verb:
      case TokenCat::Preposition:
        if (node_of[i] >= 0) {
          res.graph.add_edge(node_of[prev_noun], node_of[i]);
          res.graph.add_edge(node_of[i], node_of[next_noun[i]]);
        }
        break;
    }
  }
  return res;
}

std::vector<std::string> split_tokens(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace sgp
