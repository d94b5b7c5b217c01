#include "metaslice/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace metaslice {

std::vector<std::uint64_t> Rng::sample_distinct(std::uint64_t n, std::uint64_t k) {
  if (k > n) throw std::invalid_argument("cannot sample more distinct values than exist");
  std::vector<std::uint64_t> picked;
  picked.reserve(k);
  for (std::uint64_t j = n - k; j < n; ++j) {
    const std::uint64_t t = below(j + 1);
    if (std::find(picked.begin(), picked.end(), t) == picked.end()) {
      picked.push_back(t);
    } else {
      picked.push_back(j);
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace metaslice
