#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "demoner/corpus.hpp"
#include "demoner/rng.hpp"

namespace testing {

inline demoner::Instance labeled(std::string id, const std::string& text,
                                 const std::vector<std::string>& tags) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    auto j = text.find(' ', i);
    if (j == std::string::npos) j = text.size();
    if (j > i) tokens.push_back(text.substr(i, j - i));
    i = j + 1;
  }
  return demoner::make_instance(std::move(id), std::move(tokens), tags);
}

// "Mary traveled to New York last month ."
inline demoner::Instance mary() {
  return labeled("mary", "Mary traveled to New York last month .",
                 {"B-PER", "O", "O", "B-LOC", "I-LOC", "O", "O", "O"});
}

// Random BIO tags over the given features.
inline std::vector<std::string> random_tags(demoner::Rng& rng, std::size_t n,
                                            const std::vector<std::string>& features) {
  std::vector<std::string> tags;
  for (std::size_t t = 0; t < n; ++t) {
    const auto r = rng.uniform_index(3);
    if (r == 0 || features.empty()) {
      tags.emplace_back("O");
    } else {
      const auto& f = features[rng.uniform_index(features.size())];
      const bool cont = r == 2 && !tags.empty() && tags.back() != "O" &&
                        tags.back().substr(2) == f;
      tags.push_back((cont ? "I-" : "B-") + f);
    }
  }
  return tags;
}

// Indices by descending value, ties by ascending index.
inline std::vector<std::size_t> argsort_descending(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
  return idx;
}

}  // namespace testing
