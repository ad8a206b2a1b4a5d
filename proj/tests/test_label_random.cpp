#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "selfrat/label.hpp"
#include "selfrat/random.hpp"

using namespace selfrat;

TEST(Label, MergeToBinary) {
  EXPECT_EQ(merge_to_binary(Label::neutral), Label::not_entailment);
  EXPECT_EQ(merge_to_binary(Label::contradiction), Label::not_entailment);
  EXPECT_EQ(merge_to_binary(Label::entailment), Label::entailment);
}

TEST(Label, MergeIsIdempotentAndSurjective) {
  std::vector<Label> image;
  for (auto l : {Label::entailment, Label::neutral, Label::contradiction, Label::not_entailment}) {
    const Label once = merge_to_binary(l);
    EXPECT_TRUE(in_scheme(once, Scheme::two_way));
    EXPECT_EQ(merge_to_binary(once), once);
    image.push_back(once);
  }
  for (auto l : labels_of(Scheme::two_way)) EXPECT_NE(std::find(image.begin(), image.end(), l), image.end());
}

TEST(Label, SchemeMembership) {
  EXPECT_TRUE(in_scheme(Label::neutral, Scheme::three_way));
  EXPECT_FALSE(in_scheme(Label::neutral, Scheme::two_way));
  EXPECT_FALSE(in_scheme(Label::not_entailment, Scheme::three_way));
  EXPECT_EQ(label_count(Scheme::three_way), 3u);
  EXPECT_EQ(label_count(Scheme::two_way), 2u);
  EXPECT_THROW(scheme_from_name("four_way"), Error);
}

TEST(SeededRng, BelowStaysInRange) {
  SeededRng rng(42);
  for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 7ULL, 1000ULL})
    for (int i = 0; i < 200; ++i) EXPECT_LT(rng.below(bound), bound);
  EXPECT_THROW(rng.below(0), std::invalid_argument);
}

TEST(SeededRng, ShuffleIsAPermutationAndDeterministic) {
  std::vector<int> a(50), b;
  std::iota(a.begin(), a.end(), 0);
  b = a;
  SeededRng r1(9), r2(9);
  r1.shuffle(a);
  r2.shuffle(b);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(SeededRng, RoughlyUniform) {
  SeededRng rng(1);
  std::vector<int> hist(6, 0);
  for (int i = 0; i < 60000; ++i) ++hist[rng.below(6)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(Seeds, DerivationSeparatesStreams) {
  EXPECT_EQ(derive_seed(7, "subsets"), derive_seed(7, "subsets"));
  EXPECT_NE(derive_seed(7, "subsets"), derive_seed(8, "subsets"));
  EXPECT_NE(derive_seed(7, "random", 1), derive_seed(7, "random", 2));
  EXPECT_NE(derive_seed(7, "random"), derive_seed(7, "fastvotek"));
  // Reference values of the underlying mixers.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
}
