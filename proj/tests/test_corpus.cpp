#include <gtest/gtest.h>

#include <random>
#include <set>

#include "selfrat/corpus.hpp"
#include "test_util.hpp"

using namespace selfrat;

namespace {

const DatasetSpec kThreeWay{"toy", Task::nli, Scheme::three_way, 0};

Instance make(std::string id, Label label, std::string hyp = "a claim", std::string expl = "because") {
  Instance i;
  i.id = std::move(id);
  i.dataset = "e-FEVER";
  i.split = Split::train;
  i.hypothesis = std::move(hyp);
  i.premise = "some evidence";
  i.label = label;
  i.explanation = std::move(expl);
  return i;
}

}  // namespace

TEST(LoadInstances, EmptyFile) {
  auto dir = testutil::scratch_dir("load_empty");
  auto f = testutil::write_file(dir / "i.jsonl", "");
  EXPECT_TRUE(load_instances(f, kThreeWay).empty());
}

TEST(LoadInstances, PreservesOrder) {
  auto dir = testutil::scratch_dir("load_order");
  auto f = testutil::write_file(dir / "i.jsonl",
                                R"({"id":"c","dataset":"toy","split":"test","hypothesis":"h1","premise":"p1","label":"neutral"}
{"id":"a","dataset":"toy","split":"test","hypothesis":"h2","premise":"p2","label":"entailment","explanation":"e"}
{"id":"b","dataset":"toy","split":"test","hypothesis":"h3","premise":"p3"}
)");
  auto xs = load_instances(f, kThreeWay);
  ASSERT_EQ(xs.size(), 3u);
  EXPECT_EQ(xs[0].id, "c");
  EXPECT_EQ(xs[1].id, "a");
  EXPECT_EQ(xs[2].id, "b");
  EXPECT_EQ(xs[0].label, Label::neutral);
  EXPECT_EQ(xs[1].explanation, "e");
  EXPECT_FALSE(xs[2].label.has_value());
}

TEST(LoadInstances, MissingFieldNamesLine) {
  auto dir = testutil::scratch_dir("load_missing");
  auto f = testutil::write_file(dir / "i.jsonl",
                                R"({"id":"a","dataset":"toy","split":"test","hypothesis":"h","premise":"p"}
{"id":"b","dataset":"toy","split":"test","premise":"p"}
)");
  try {
    load_instances(f, kThreeWay);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("hypothesis"), std::string::npos);
  }
}

TEST(LoadInstances, UnknownLabelNamed) {
  auto dir = testutil::scratch_dir("load_label");
  auto f = testutil::write_file(dir / "i.jsonl",
                                R"({"id":"a","dataset":"toy","split":"test","hypothesis":"h","premise":"p","label":"maybe"})");
  try {
    load_instances(f, kThreeWay);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("maybe"), std::string::npos);
  }
}

TEST(LoadInstances, ThreeWayLabelRejectedInTwoWayFile) {
  auto dir = testutil::scratch_dir("load_scheme");
  auto f = testutil::write_file(dir / "i.jsonl",
                                R"({"id":"a","dataset":"toy","split":"test","hypothesis":"h","premise":"p","label":"neutral"})");
  EXPECT_THROW(load_instances(f, DatasetSpec{"toy2", Task::hdas, Scheme::two_way, 0}), SchemaError);
}

TEST(LoadInstances, FactCheckingVocabularyMaps) {
  auto dir = testutil::scratch_dir("load_fever");
  auto f = testutil::write_file(dir / "i.jsonl",
                                R"({"id":"a","dataset":"e-FEVER","split":"train","hypothesis":"h","premise":"p","label":"SUPPORTS"}
{"id":"b","dataset":"e-FEVER","split":"train","hypothesis":"h","premise":"p","label":"REFUTES"}
{"id":"c","dataset":"e-FEVER","split":"train","hypothesis":"h","premise":"p","label":"NOT ENOUGH INFO"}
)");
  auto xs = load_instances(f, find_dataset("e-FEVER"));
  EXPECT_EQ(xs[0].label, Label::entailment);
  EXPECT_EQ(xs[1].label, Label::contradiction);
  EXPECT_EQ(xs[2].label, Label::neutral);
}

TEST(LoadInstances, DuplicateIdAndMalformedLine) {
  auto dir = testutil::scratch_dir("load_dup");
  auto dup = testutil::write_file(dir / "d.jsonl",
                                  R"({"id":"a","dataset":"toy","split":"test","hypothesis":"h","premise":"p"}
{"id":"a","dataset":"toy","split":"test","hypothesis":"h","premise":"p"}
)");
  EXPECT_THROW(load_instances(dup, kThreeWay), SchemaError);
  auto bad = testutil::write_file(dir / "b.jsonl", "{\"id\": \n");
  try {
    load_instances(bad, kThreeWay);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(Manifest, RoundTripAndValidation) {
  auto dir = testutil::scratch_dir("manifest");
  auto f = testutil::write_file(dir / "m.json",
                                R"({"name":"SICK","task":"NLI","scheme":"three_way","n_labels":3,"source_uri":"x","preprocessing_rule":"none"})");
  auto m = load_manifest(f);
  EXPECT_EQ(m.spec.name, "SICK");
  EXPECT_EQ(m.spec.n_labels(), 3u);
  auto bad = testutil::write_file(dir / "bad.json", R"({"name":"x","task":"NLI","scheme":"two_way","n_labels":3})");
  EXPECT_THROW(load_manifest(bad), SchemaError);
}

TEST(Registry, NineteenDatasetsAcrossThreeTasks) {
  const auto& ds = ood_datasets();
  ASSERT_EQ(ds.size(), 19u);
  std::map<Task, int> per_task;
  for (const auto& d : ds) ++per_task[d.task];
  EXPECT_EQ(per_task[Task::nli], 9);
  EXPECT_EQ(per_task[Task::fc], 6);
  EXPECT_EQ(per_task[Task::hdas], 4);
  EXPECT_EQ(find_dataset("AddOneRTE").n_labels(), 2u);
  EXPECT_EQ(find_dataset("VitaminC").declared_size, 55197u);
  EXPECT_THROW(find_dataset("MNLI"), Error);
}

TEST(FilterEfever, MissingInfoSentinelOnNonNeutralRemoved) {
  std::vector<Instance> xs{make("a", Label::entailment, "a claim", std::string(kEfeverMissingInfo))};
  EXPECT_TRUE(filter_efever(xs).empty());
}

TEST(FilterEfever, ClaimRepeatOnSupportsRetained) {
  std::vector<Instance> xs{make("a", Label::entailment, "The sky is blue.", "The sky is blue.")};
  EXPECT_EQ(filter_efever(xs).size(), 1u);
}

TEST(FilterEfever, ClaimRepeatOnRefutesRemoved) {
  std::vector<Instance> xs{make("a", Label::contradiction, "The sky is blue.", "  the sky   is BLUE. ")};
  EXPECT_TRUE(filter_efever(xs).empty());
}

TEST(FilterEfever, RequiresExplanation) {
  auto x = make("a", Label::neutral);
  x.explanation.reset();
  std::vector<Instance> xs{x};
  EXPECT_THROW(filter_efever(xs), Error);
}

TEST(FilterEfever, SubsequenceAndIdempotent) {
  std::mt19937_64 gen(3);
  const std::vector<Label> labels{Label::entailment, Label::neutral, Label::contradiction};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Instance> xs;
    for (int i = 0; i < 30; ++i) {
      const Label l = labels[gen() % 3];
      const int kind = static_cast<int>(gen() % 3);
      std::string claim = "claim " + std::to_string(i);
      std::string expl = kind == 0 ? std::string(kEfeverMissingInfo) : kind == 1 ? claim : "other text";
      xs.push_back(make("i" + std::to_string(i), l, claim, expl));
    }
    EfeverFilterStats stats;
    auto once = filter_efever(xs, &stats);
    EXPECT_EQ(stats.kept + stats.removed_missing_info + stats.removed_claim_repeat, xs.size());
    std::size_t j = 0;
    for (const auto& x : xs)
      if (j < once.size() && once[j].id == x.id) ++j;
    EXPECT_EQ(j, once.size()) << "output must be a subsequence";
    auto twice = filter_efever(once);
    ASSERT_EQ(twice.size(), once.size());
  }
}

TEST(Harmonize, AddOneRteThresholds) {
  NativeRecord r;
  r.base = {"x", "AddOneRTE", Split::test, "h", "p", {}, {}};
  r.score = 4.2;
  EXPECT_EQ(harmonize(r, "AddOneRTE")->label, Label::entailment);
  r.score = 4.0;
  EXPECT_EQ(harmonize(r, "AddOneRTE")->label, Label::entailment);
  r.score = 3.0;
  EXPECT_EQ(harmonize(r, "AddOneRTE")->label, Label::not_entailment);
  r.score = 3.5;
  EXPECT_FALSE(harmonize(r, "AddOneRTE").has_value());
  r.score = 6.0;
  EXPECT_THROW(harmonize(r, "AddOneRTE"), Error);
}

TEST(Harmonize, JociOrdinalLabels) {
  NativeRecord r;
  r.base = {"x", "JOCI", Split::test, "h", "p", {}, {}};
  const std::vector<std::pair<std::string, Label>> cases{{"very likely", Label::entailment},
                                                         {"likely", Label::neutral},
                                                         {"plausible", Label::neutral},
                                                         {"technically possible", Label::neutral},
                                                         {"impossible", Label::contradiction}};
  for (const auto& [native, expected] : cases) {
    r.native_label = native;
    EXPECT_EQ(harmonize(r, "JOCI")->label, expected) << native;
  }
  r.native_label.reset();
  r.score = 5;
  EXPECT_EQ(harmonize(r, "JOCI")->label, Label::entailment);
  r.score = 0;
  EXPECT_THROW(harmonize(r, "JOCI"), Error);
}

TEST(Harmonize, MpeConcatenatesPremises) {
  NativeRecord r;
  r.base = {"x", "MPE", Split::test, "h", "", {}, {}};
  r.native_label = "neutral";
  r.premise_sentences = {"A man sits.", "A dog barks."};
  EXPECT_EQ(harmonize(r, "MPE")->premise, "A man sits. A dog barks.");
  r.premise_sentences = {" A man sits", "A dog barks "};
  EXPECT_EQ(harmonize(r, "MPE")->premise, "A man sits. A dog barks.");
}

TEST(Harmonize, FactCcAndMajority) {
  NativeRecord r;
  r.base = {"x", "FactCC", Split::test, "h", "p", {}, {}};
  r.native_label = "factual";
  EXPECT_EQ(harmonize(r, "FactCC")->label, Label::entailment);
  r.native_label = "non-factual";
  EXPECT_EQ(harmonize(r, "FactCC")->label, Label::not_entailment);

  NativeRecord q;
  q.base = {"y", "QAGS CNN", Split::test, "h", "p", {}, {}};
  q.annotations = {"entailment", "not_entailment", "not_entailment"};
  EXPECT_EQ(harmonize(q, "QAGS CNN")->label, Label::not_entailment);
}

TEST(Harmonize, TwoWayPassthroughMergesAndUnknownRuleFails) {
  NativeRecord r;
  r.base = {"x", "COVID-Fact", Split::test, "h", "p", {}, {}};
  r.native_label = "REFUTED";
  EXPECT_EQ(harmonize(r, "COVID-Fact")->label, Label::not_entailment);
  EXPECT_THROW(harmonize(r, "NoSuchSet"), Error);
  r.native_label = "banana";
  EXPECT_THROW(harmonize(r, "COVID-Fact"), Error);
}

TEST(Harmonize, NeverLeavesTargetScheme) {
  const std::vector<std::string> natives{"entailment", "neutral", "contradiction", "SUPPORTS", "REFUTES", "NEI"};
  for (const auto& spec : ood_datasets()) {
    if (spec.name == "AddOneRTE" || spec.name == "JOCI" || spec.name == "FactCC") continue;
    for (const auto& n : natives) {
      NativeRecord r;
      r.base = {"x", spec.name, Split::test, "h", "p", {}, {}};
      r.native_label = n;
      r.annotations = {n};
      r.premise_sentences = {"p"};
      std::optional<Instance> out;
      try {
        out = harmonize(r, spec.name);
      } catch (const Error&) {
        continue;  // three-way vocabulary without a two-way reading
      }
      ASSERT_TRUE(out && out->label);
      EXPECT_TRUE(in_scheme(*out->label, spec.scheme)) << spec.name << " " << n;
    }
  }
}

TEST(MajorityLabel, Cases) {
  std::vector<Label> a{Label::entailment, Label::entailment, Label::not_entailment};
  EXPECT_EQ(majority_label(a), Label::entailment);
  std::vector<Label> b{Label::entailment};
  EXPECT_EQ(majority_label(b), Label::entailment);
  std::vector<Label> tie{Label::entailment, Label::not_entailment};
  try {
    majority_label(tie);
    FAIL();
  } catch (const TieError& e) {
    EXPECT_EQ(e.tied().size(), 2u);
  }
  EXPECT_THROW(majority_label(std::vector<Label>{}), Error);
}

TEST(MajorityLabel, WinnerStrictlyExceedsOthers) {
  std::mt19937_64 gen(11);
  const std::vector<Label> pool{Label::entailment, Label::neutral, Label::contradiction};
  for (int t = 0; t < 200; ++t) {
    std::vector<Label> votes;
    const int n = 1 + static_cast<int>(gen() % 7);
    for (int i = 0; i < n; ++i) votes.push_back(pool[gen() % 3]);
    try {
      const Label w = majority_label(votes);
      const auto wc = std::count(votes.begin(), votes.end(), w);
      for (auto l : pool)
        if (l != w) EXPECT_GT(wc, std::count(votes.begin(), votes.end(), l));
    } catch (const TieError&) {
    }
  }
}

TEST(MakeSubsets, ExactPartitionOfTen) {
  std::vector<Instance> xs;
  for (int i = 0; i < 10; ++i) xs.push_back(make("id" + std::to_string(i), Label::neutral));
  auto subsets = make_subsets(xs, 2, 5, 17);
  ASSERT_EQ(subsets.size(), 2u);
  std::set<std::string> all;
  for (const auto& s : subsets) {
    EXPECT_EQ(s.instance_ids.size(), 5u);
    all.insert(s.instance_ids.begin(), s.instance_ids.end());
  }
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(subsets[0].index, 1u);
  EXPECT_EQ(subsets[1].index, 2u);
}

TEST(MakeSubsets, DeterministicAndSeedSensitive) {
  std::vector<Instance> xs;
  for (int i = 0; i < 100; ++i) xs.push_back(make("id" + std::to_string(i), Label::neutral));
  auto a = make_subsets(xs, 3, 20, 5);
  auto b = make_subsets(xs, 3, 20, 5);
  auto c = make_subsets(xs, 3, 20, 6);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[i].instance_ids, b[i].instance_ids);
  EXPECT_NE(a[0].instance_ids, c[0].instance_ids);
}

TEST(MakeSubsets, ShortfallReported) {
  std::vector<Instance> xs;
  for (int i = 0; i < 9; ++i) xs.push_back(make("id" + std::to_string(i), Label::neutral));
  try {
    make_subsets(xs, 2, 5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("short by 1"), std::string::npos);
  }
}

TEST(NormalizeText, CollapsesAndLowercases) {
  EXPECT_EQ(normalize_text("  The  Sky\tIS\nblue "), "the sky is blue");
  EXPECT_EQ(normalize_text(""), "");
}
