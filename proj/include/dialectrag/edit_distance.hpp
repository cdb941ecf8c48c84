#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace dialectrag {

/// Unit-cost Levenshtein distance between two sequences. Two-row DP, O(|a|·|b|) time.
template <typename T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> curr(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    curr[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t substitution = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, substitution});
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

template <typename Range>
std::size_t edit_distance(const Range& a, const Range& b) {
  using T = typename Range::value_type;
  return edit_distance<T>(std::span<const T>(a.data(), a.size()),
                          std::span<const T>(b.data(), b.size()));
}

/// 1 - distance / max(|a|, |b|); two empty sequences are identical (1.0).
template <typename Range>
double normalized_similarity(const Range& a, const Range& b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

}  // namespace dialectrag
