#include "demoner/corpus.hpp"

#include <algorithm>
#include <sstream>

#include "demoner/error.hpp"
#include "demoner/rng.hpp"

namespace demoner {

namespace {

std::vector<std::string> split_columns(std::string_view line) {
  std::vector<std::string> cols;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) cols.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return cols;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return c == ' ' || c == '\t'; });
}

// Index of the first tag that breaks the BIO grammar, or npos.
std::size_t first_orphan(const std::vector<BioTag>& tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].prefix != 'I') continue;
    if (i == 0 || tags[i - 1].prefix == 'O' ||
        tags[i - 1].feature != tags[i].feature) {
      return i;
    }
  }
  return std::string::npos;
}

}  // namespace

std::string Instance::text() const { return join_tokens(tokens); }

bool valid_feature_name(std::string_view name) {
  if (name.empty() || name == kNil) return false;
  return std::none_of(name.begin(), name.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '[' || c == ']';
  });
}

BioTag parse_tag(std::string_view tag) {
  if (tag == kNil) return {};
  if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-') {
    throw DataError("tag outside BIO grammar: '" + std::string(tag) + "'");
  }
  BioTag out{tag[0], std::string(tag.substr(2))};
  if (!valid_feature_name(out.feature)) {
    throw DataError("invalid feature name in tag '" + std::string(tag) + "'");
  }
  return out;
}

std::string format_tag(char prefix, std::string_view feature) {
  if (prefix == 'O') return std::string(kNil);
  std::string out(1, prefix);
  out += '-';
  out += feature;
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens,
                        std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  return join_tokens(tokens, 0, tokens.size());
}

std::vector<Markup> markups_from_tags(const std::vector<std::string>& tokens,
                                      const std::vector<std::string>& tags,
                                      TagMode mode) {
  if (tokens.size() != tags.size()) {
    throw DataError("token/tag length mismatch: " + std::to_string(tokens.size()) +
                    " tokens, " + std::to_string(tags.size()) + " tags");
  }
  std::vector<BioTag> parsed;
  parsed.reserve(tags.size());
  for (const auto& t : tags) parsed.push_back(parse_tag(t));
  if (mode == TagMode::kStrict) {
    if (auto bad = first_orphan(parsed); bad != std::string::npos) {
      throw DataError("I- tag without preceding B-/I- of the same type at token " +
                      std::to_string(bad) + ": '" + tags[bad] + "'");
    }
  }

  std::vector<Markup> out;
  std::size_t i = 0;
  while (i < parsed.size()) {
    if (parsed[i].prefix == 'O') {
      ++i;
      continue;
    }
    // B-X, or an orphan I-X under lenient mode, opens a span.
    std::size_t j = i + 1;
    while (j < parsed.size() && parsed[j].prefix == 'I' &&
           parsed[j].feature == parsed[i].feature) {
      ++j;
    }
    out.push_back({i, j, join_tokens(tokens, i, j), parsed[i].feature});
    i = j;
  }
  return out;
}

std::vector<std::string> tags_from_markups(std::size_t length,
                                           const std::vector<Markup>& markups) {
  std::vector<std::string> tags(length, std::string(kNil));
  std::vector<bool> used(length, false);
  for (const auto& m : markups) {
    if (m.start >= m.end || m.end > length) {
      throw DataError("markup span out of range");
    }
    for (std::size_t i = m.start; i < m.end; ++i) {
      if (used[i]) throw DataError("overlapping markups");
      used[i] = true;
      tags[i] = format_tag(i == m.start ? 'B' : 'I', m.feature);
    }
  }
  return tags;
}

Instance make_instance(std::string id, std::vector<std::string> tokens,
                       std::vector<std::string> tags, TagMode mode) {
  if (tokens.empty()) throw DataError("instance has no tokens");
  Instance inst;
  inst.id = std::move(id);
  inst.markups = markups_from_tags(tokens, tags, mode);
  if (mode == TagMode::kLenient) {
    // Store the repaired tags so tags and markups agree.
    tags = tags_from_markups(tokens.size(), inst.markups);
  }
  inst.tokens = std::move(tokens);
  inst.tags = std::move(tags);
  return inst;
}

Instance make_unlabeled(std::string id, std::vector<std::string> tokens) {
  if (tokens.empty()) throw DataError("instance has no tokens");
  Instance inst;
  inst.id = std::move(id);
  inst.tokens = std::move(tokens);
  return inst;
}

Corpus parse_conll(std::string_view text, const ParseOptions& options) {
  Corpus corpus;
  std::size_t columns = 0;
  std::size_t line_no = 0;

  std::vector<std::string> tokens, tags;
  std::vector<std::vector<std::string>> extras;
  std::vector<std::size_t> lines;

  auto flush = [&]() {
    if (tokens.empty()) return;
    std::string id = std::to_string(corpus.instances.size());
    if (columns == 1) {
      corpus.instances.push_back(make_unlabeled(std::move(id), std::move(tokens)));
    } else {
      if (options.mode == TagMode::kStrict) {
        std::vector<BioTag> parsed;
        for (std::size_t i = 0; i < tags.size(); ++i) {
          try {
            parsed.push_back(parse_tag(tags[i]));
          } catch (const DataError& e) {
            throw DataError("line " + std::to_string(lines[i]) + ": " + e.what());
          }
        }
        if (auto bad = first_orphan(parsed); bad != std::string::npos) {
          throw DataError("line " + std::to_string(lines[bad]) +
                          ": I- tag without preceding B-/I- of the same type: '" +
                          tags[bad] + "'");
        }
      }
      Instance inst;
      try {
        inst = make_instance(std::move(id), std::move(tokens), std::move(tags),
                             options.mode);
      } catch (const DataError& e) {
        throw DataError("line " + std::to_string(lines.front()) + ": " + e.what());
      }
      inst.extra_columns = std::move(extras);
      for (const auto& m : inst.markups) corpus.feature_set.insert(m.feature);
      corpus.instances.push_back(std::move(inst));
    }
    tokens.clear();
    tags.clear();
    extras.clear();
    lines.clear();
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (is_blank(line)) {
      flush();
      continue;
    }
    auto cols = split_columns(line);
    if (cols.front() == "-DOCSTART-") {
      flush();
      continue;
    }
    if (cols.size() == 1 && !options.allow_untagged) {
      throw DataError("line " + std::to_string(line_no) +
                      ": malformed line, expected token and tag columns");
    }
    if (columns == 0) {
      columns = cols.size();
    } else if (cols.size() != columns) {
      throw DataError("line " + std::to_string(line_no) + ": malformed line, " +
                      std::to_string(cols.size()) + " columns where " +
                      std::to_string(columns) + " expected");
    }
    tokens.push_back(cols.front());
    lines.push_back(line_no);
    if (columns > 1) {
      tags.push_back(cols.back());
      extras.emplace_back(cols.begin() + 1, cols.end() - 1);
    }
  }
  flush();

  if (corpus.instances.empty()) throw DataError("empty document");
  return corpus;
}

std::string render_conll(const Corpus& corpus) {
  std::ostringstream out;
  for (std::size_t n = 0; n < corpus.instances.size(); ++n) {
    const auto& inst = corpus.instances[n];
    if (!inst.tags) {
      throw DataError("instance " + inst.id + " has no tags to render");
    }
    if (n > 0) out << '\n';
    for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
      out << inst.tokens[i];
      if (i < inst.extra_columns.size()) {
        for (const auto& c : inst.extra_columns[i]) out << ' ' << c;
      }
      out << ' ' << (*inst.tags)[i] << '\n';
    }
  }
  return out.str();
}

std::string render_conll_tags(const std::vector<Instance>& instances,
                              const std::vector<std::vector<std::string>>& tags) {
  if (instances.size() != tags.size()) {
    throw DataError("prediction count does not match instance count");
  }
  std::ostringstream out;
  for (std::size_t n = 0; n < instances.size(); ++n) {
    const auto& toks = instances[n].tokens;
    if (toks.size() != tags[n].size()) {
      throw DataError("instance " + instances[n].id + ": tag count mismatch");
    }
    if (n > 0) out << '\n';
    for (std::size_t i = 0; i < toks.size(); ++i) {
      out << toks[i] << ' ' << tags[n][i] << '\n';
    }
  }
  return out.str();
}

FeatureSet feature_set_of(const Instance& instance) {
  FeatureSet out;
  for (const auto& m : instance.markups) out.insert(m.feature);
  return out;
}

FeatureSet collect_features(const std::vector<Instance>& instances) {
  FeatureSet out;
  for (const auto& inst : instances) {
    for (const auto& m : inst.markups) out.insert(m.feature);
  }
  return out;
}

double feature_jaccard(const FeatureSet& a, const FeatureSet& b) {
  std::size_t inter = 0;
  for (const auto& f : a) inter += b.count(f);
  const std::size_t uni = a.size() + b.size() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double feature_jaccard(const Instance& a, const Instance& b) {
  if (!a.labeled() || !b.labeled()) {
    throw DataError("feature_jaccard needs labeled instances");
  }
  return feature_jaccard(feature_set_of(a), feature_set_of(b));
}

namespace {

std::vector<std::size_t> pick_train(const Corpus& corpus, std::size_t k, Rng& rng) {
  if (k == 0) throw UsageError("k must be positive");
  std::vector<FeatureSet> sets;
  sets.reserve(corpus.instances.size());
  for (const auto& inst : corpus.instances) sets.push_back(feature_set_of(inst));

  std::vector<bool> chosen(corpus.instances.size(), false);
  std::vector<std::size_t> picks;
  for (const auto& f : corpus.feature_set) {
    std::size_t have = 0;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      if (!sets[i].count(f)) continue;
      if (chosen[i]) {
        ++have;
      } else {
        candidates.push_back(i);
      }
    }
    rng.shuffle(std::span(candidates));
    auto next = candidates.begin();
    while (have < k) {
      if (next == candidates.end()) {
        throw DataError("insufficient instances for feature " + f + ": need " +
                        std::to_string(k) + ", corpus has " + std::to_string(have));
      }
      chosen[*next] = true;
      picks.push_back(*next);
      ++next;
      ++have;
    }
  }
  return picks;
}

std::vector<Instance> pick_validation(const std::vector<Instance>& source,
                                      const std::vector<bool>& excluded,
                                      std::size_t count, Rng& rng) {
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (!excluded[i]) rest.push_back(i);
  }
  if (rest.size() < count) {
    throw DataError("insufficient instances for validation: need " +
                    std::to_string(count) + ", have " + std::to_string(rest.size()));
  }
  rng.shuffle(std::span(rest));
  std::vector<Instance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(source[rest[i]]);
  return out;
}

}  // namespace

FewShotSplit sample_few_shot(const Corpus& corpus, std::size_t k,
                             std::uint64_t seed) {
  Rng rng(seed);
  FewShotSplit split;
  split.k = k;
  const auto picks = pick_train(corpus, k, rng);
  std::vector<bool> excluded(corpus.instances.size(), false);
  for (auto i : picks) {
    excluded[i] = true;
    split.train.push_back(corpus.instances[i]);
  }
  split.validation = pick_validation(corpus.instances, excluded,
                                     k * corpus.feature_set.size(), rng);
  return split;
}

FewShotSplit sample_few_shot(const Corpus& corpus, const Corpus& validation_source,
                             std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  FewShotSplit split;
  split.k = k;
  for (auto i : pick_train(corpus, k, rng)) split.train.push_back(corpus.instances[i]);
  std::vector<bool> excluded(validation_source.instances.size(), false);
  split.validation = pick_validation(validation_source.instances, excluded,
                                     k * corpus.feature_set.size(), rng);
  return split;
}

}  // namespace demoner
