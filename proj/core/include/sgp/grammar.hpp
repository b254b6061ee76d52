#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sgp/scene_graph.hpp"

namespace sgp {

enum class Side { Source, Target };
enum class TokenCat { Noun, Adjective, Verb, Preposition };

/// Synthetic bilingual grammar: a bijective token map between two content
/// vocabularies, a set of slot templates, and planted co-occurrence rules
/// that inject extra structure into gold visual graphs.
struct ToyGrammar {
  // Source-side content vocabulary by category. Target forms come from
  // token_map, which is a bijection over the union of these lists.
  std::vector<std::string> nouns;
  std::vector<std::string> adjectives;
  std::vector<std::string> verbs;
  std::vector<std::string> prepositions;
  std::map<std::string, std::string> token_map;

  struct Template {
    std::string pattern;  // e.g. "A N V V N"
    double weight = 0.0;
    bool generative = true;  // used by the corpus generator
  };
  std::vector<Template> templates;

  // Visual-only labels live in the visual graphs, never in sentences.
  struct ObjectPlant {
    std::vector<std::string> triggers;  // source nouns
    std::string object_label;
    std::string relation_label;
  };
  struct AttributePlant {
    std::vector<std::string> triggers;
    std::string attribute_label;
  };
  struct EdgePlant {
    // Fires when at least two trigger nouns occur; the edge runs from the
    // first-mentioned to the second-mentioned object.
    std::vector<std::string> triggers;
    std::string relation_label;
  };
  std::vector<ObjectPlant> object_plants;
  std::vector<AttributePlant> attribute_plants;
  std::vector<EdgePlant> edge_plants;

  /// Category lookup on either side; false when the token is unknown.
  bool lookup(const std::string& token, Side side, TokenCat* cat) const;
  const std::string& map_token(const std::string& src) const;

  std::vector<std::string> source_tokens() const;
  std::vector<std::string> target_tokens() const;
  std::vector<std::string> visual_extra_labels() const;

  /// Rejects inconsistent grammars (non-bijective map, unknown rule labels,
  /// unparseable templates, duplicate tokens).
  void check() const;

  uint64_t fingerprint() const;
  std::string to_json() const;
  static ToyGrammar from_json(const std::string& text);
};

/// The default desk-scale grammar: 40 content tokens per side, verb-run
/// templates, and object-heavy planted rules.
ToyGrammar default_grammar();

struct ParseResult {
  SceneGraph graph;
  std::vector<std::string> unmapped;  // tokens with no graph counterpart
};

/// Deterministic rule parser: nouns become Objects, adjectives Attributes of
/// their following noun, verbs/prepositions Relations between the
/// surrounding nouns. Node ids follow surface order. The token category
/// sequence must match one of the grammar's templates; otherwise a DataError
/// names the first offending token.
ParseResult parse_toy_lsg(const std::vector<std::string>& tokens,
                          const ToyGrammar& grammar, Side side = Side::Source);

std::vector<std::string> split_tokens(const std::string& line);
std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace sgp
