#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace selfrat {

/// Identifier written into run manifests. Any change to the generator, the
/// bounded draw or the shuffle order must bump it.
inline constexpr std::string_view kShuffleAlgorithm = "mt19937_64/rejection-bounded/fisher-yates-desc/v1";

/// Reproducible random stream. std::mt19937_64 output is fixed by the
/// standard; the bounded draw is done here instead of through
/// std::uniform_int_distribution, whose algorithm is implementation defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound);

  /// Fisher-Yates, swapping position i with a draw from [0, i] for
  /// i = n-1 down to 1.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

/// Child seed for a named stream: splitmix64(splitmix64(root ^ fnv1a64(stream)) + index).
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

}  // namespace selfrat
