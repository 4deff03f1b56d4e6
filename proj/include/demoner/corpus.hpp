#pragma once

// Labeled instances, BIO span reconstruction, CoNLL ingestion and few-shot
// sampling.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace demoner {

// Tag for tokens outside every entity.
inline constexpr std::string_view kNil = "O";

using FeatureSet = std::set<std::string>;

// A labeled span [start, end) of an instance.
struct Markup {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string text;
  std::string feature;

  friend bool operator==(const Markup&, const Markup&) = default;
};

struct Instance {
  std::string id;
  std::vector<std::string> tokens;
  std::optional<std::vector<std::string>> tags;
  std::vector<Markup> markups;
  // Middle CoNLL columns per token; carried through rendering, never read.
  std::vector<std::vector<std::string>> extra_columns;

  bool labeled() const { return tags.has_value(); }
  std::string text() const;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct Corpus {
  std::vector<Instance> instances;
  FeatureSet feature_set;
};

enum class TagMode {
  kStrict,   // I-X must continue B-X or I-X
  kLenient,  // orphan I-X is read as B-X
};

struct ParseOptions {
  TagMode mode = TagMode::kStrict;
  // Accept single-column files (tokens only); instances come out unlabeled.
  bool allow_untagged = false;
};

// Parsed form of one BIO tag.
struct BioTag {
  char prefix = 'O';  // 'O', 'B' or 'I'
  std::string feature;
};

BioTag parse_tag(std::string_view tag);
std::string format_tag(char prefix, std::string_view feature);

bool valid_feature_name(std::string_view name);

// Joins tokens with single spaces.
std::string join_tokens(const std::vector<std::string>& tokens,
                        std::size_t begin, std::size_t end);
std::string join_tokens(const std::vector<std::string>& tokens);

std::vector<Markup> markups_from_tags(const std::vector<std::string>& tokens,
                                      const std::vector<std::string>& tags,
                                      TagMode mode = TagMode::kStrict);

// Inverse of markups_from_tags: BIO2 tags for non-overlapping markups.
std::vector<std::string> tags_from_markups(std::size_t length,
                                           const std::vector<Markup>& markups);

// Builds a labeled instance; markups are derived from the tags.
Instance make_instance(std::string id, std::vector<std::string> tokens,
                       std::vector<std::string> tags,
                       TagMode mode = TagMode::kStrict);
Instance make_unlabeled(std::string id, std::vector<std::string> tokens);

Corpus parse_conll(std::string_view text, const ParseOptions& options = {});
std::string render_conll(const Corpus& corpus);

// Renders token + tag lines, ignoring any gold tags on the instances.
std::string render_conll_tags(const std::vector<Instance>& instances,
                              const std::vector<std::vector<std::string>>& tags);

FeatureSet feature_set_of(const Instance& instance);
FeatureSet collect_features(const std::vector<Instance>& instances);

// |F_a ∩ F_b| / |F_a ∪ F_b|, with 0 when both sets are empty.
double feature_jaccard(const FeatureSet& a, const FeatureSet& b);
double feature_jaccard(const Instance& a, const Instance& b);

struct FewShotSplit {
  std::vector<Instance> train;
  std::vector<Instance> validation;
  std::size_t k = 0;
};

// Greedy per-feature k-shot sampling; validation is drawn from the
// instances not picked for training, k * |F| of them.
FewShotSplit sample_few_shot(const Corpus& corpus, std::size_t k,
                             std::uint64_t seed);
// Same training sampler, validation drawn from a separate corpus.
FewShotSplit sample_few_shot(const Corpus& corpus, const Corpus& validation_source,
                             std::size_t k, std::uint64_t seed);

}  // namespace demoner
