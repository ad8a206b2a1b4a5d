#include <gtest/gtest.h>

#include <random>

#include "selfrat/parsing.hpp"
#include "test_util.hpp"

using namespace selfrat;

namespace {

std::string random_text(std::mt19937_64& gen, std::size_t max_len) {
  static const std::string alphabet = "abcdefghij XYZ.,;:!?'\"{}[]\\/-_0123456789\t";
  const std::size_t len = 1 + gen() % max_len;
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[gen() % alphabet.size()]);
  return s;
}

}  // namespace

TEST(ParseNli, CleanTemplate) {
  auto p = parse_nli_template("entailment explanation: a dog is an animal");
  EXPECT_EQ(p.label, Label::entailment);
  EXPECT_EQ(p.explanation, "a dog is an animal");
  EXPECT_EQ(p.status, ParseStatus::clean);
}

TEST(ParseNli, FallbackAfterFirstWord) {
  auto p = parse_nli_template("neutral the claim is unverified");
  EXPECT_EQ(p.label, Label::neutral);
  EXPECT_EQ(p.explanation, "the claim is unverified");
  EXPECT_EQ(p.status, ParseStatus::fallback);
}

TEST(ParseNli, UnknownLabelKeepsExplanation) {
  auto p = parse_nli_template("maybe explanation: unclear");
  EXPECT_FALSE(p.label);
  EXPECT_EQ(p.explanation, "unclear");
  EXPECT_EQ(p.status, ParseStatus::clean);
}

TEST(ParseNli, EmptyAndLabelOnly) {
  auto empty = parse_nli_template("");
  EXPECT_FALSE(empty.label);
  EXPECT_FALSE(empty.explanation);
  EXPECT_EQ(empty.status, ParseStatus::none);
  auto only = parse_nli_template("Contradiction.");
  EXPECT_EQ(only.label, Label::contradiction);
  EXPECT_FALSE(only.explanation);
  EXPECT_EQ(only.status, ParseStatus::fallback);
}

TEST(ParseJson, CleanTemplate) {
  auto p = parse_json_template(R"({"relationship": "contradiction", "explanation": "dates differ"})");
  EXPECT_EQ(p.label, Label::contradiction);
  EXPECT_EQ(p.explanation, "dates differ");
  EXPECT_EQ(p.status, ParseStatus::clean);
}

TEST(ParseJson, NoObjectGivesNone) {
  auto p = parse_json_template("Response: the answer is entailment");
  EXPECT_FALSE(p.label);
  EXPECT_FALSE(p.explanation);
  EXPECT_EQ(p.status, ParseStatus::none);
}

TEST(ParseJson, EmbeddedAfterProse) {
  auto p = parse_json_template(
      R"(Sure! {"note": "x"} Here it is: {"relationship": "neutral", "explanation": "no {evidence}"} trailing)");
  EXPECT_EQ(p.label, Label::neutral);
  EXPECT_EQ(p.explanation, "no {evidence}");
  EXPECT_EQ(p.status, ParseStatus::clean);
}

TEST(ParseJson, MalformedSkipped) {
  auto p = parse_json_template(R"({"relationship": "neutral", "explanation": } {"relationship": "refutes", "explanation": "x"})");
  EXPECT_EQ(p.label, Label::contradiction);
  EXPECT_EQ(p.explanation, "x");
}

TEST(NormalizeLabel, Aliases) {
  EXPECT_EQ(normalize_label("Entailed."), Label::entailment);
  EXPECT_EQ(normalize_label("SUPPORTS"), Label::entailment);
  EXPECT_EQ(normalize_label("refutes!"), Label::contradiction);
  EXPECT_EQ(normalize_label("Not Enough Info"), Label::neutral);
  EXPECT_EQ(normalize_label("NEI"), Label::neutral);
  EXPECT_FALSE(normalize_label("yes"));
}

TEST(RoundTrip, BothTemplates) {
  std::mt19937_64 gen(17);
  const Label labels[] = {Label::entailment, Label::neutral, Label::contradiction};
  for (int i = 0; i < 500; ++i) {
    const Label l = labels[gen() % 3];
    std::string e = random_text(gen, 60);
    if (e.find("explanation: ") != std::string::npos) continue;
    auto nli = parse_nli_template(render_output(OutputTemplate::nli_template, l, e));
    EXPECT_EQ(nli.label, l);
    EXPECT_EQ(nli.explanation, e);
    auto js = parse_json_template(render_output(OutputTemplate::json_template, l, e));
    EXPECT_EQ(js.label, l);
    EXPECT_EQ(js.explanation, e);
  }
}

TEST(Totality, ArbitraryInputNeverThrows) {
  std::mt19937_64 gen(23);
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const std::size_t len = gen() % 80;
    for (std::size_t j = 0; j < len; ++j) s.push_back(static_cast<char>(gen() % 256));
    EXPECT_NO_THROW(parse_nli_template(s));
    EXPECT_NO_THROW(parse_json_template(s));
    EXPECT_NO_THROW(parse_json_template("{" + s));
  }
}

TEST(ResolveProbs, ArgmaxAndTies) {
  EXPECT_EQ(resolve_label_from_probs({{"en", 0.5}, {"neutral", 0.3}, {"contradiction", 0.2}}), Label::entailment);
  EXPECT_EQ(resolve_label_from_probs({{"en", 0.2}, {"neutral", 0.2}, {"contradiction", 0.2}}), Label::entailment);
  EXPECT_EQ(resolve_label_from_probs({{"en", 0.1}, {"neutral", 0.2}, {"contradiction", 0.7}}), Label::contradiction);
  EXPECT_EQ(resolve_label_from_probs({{"en", 0.1}, {"neutral", 0.4}, {"contradiction", 0.4}, {"yes", 0.9}}),
            Label::neutral);
  EXPECT_THROW(resolve_label_from_probs({{"en", 0.5}, {"neutral", 0.5}}), Error);
}

TEST(ResolveProbs, ScaleInvariant) {
  std::mt19937_64 gen(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    // eighths keep the scaled values exact, so ties survive scaling
    const double a = std::round(u(gen) * 8) / 8, b = std::round(u(gen) * 8) / 8, c = std::round(u(gen) * 8) / 8;
    const double s = std::ldexp(1.0, static_cast<int>(gen() % 10) - 5);
    EXPECT_EQ(resolve_label_from_probs({{"en", a}, {"neutral", b}, {"contradiction", c}}),
              resolve_label_from_probs({{"en", a * s}, {"neutral", b * s}, {"contradiction", c * s}}));
  }
}

TEST(RenderPrompt, Templates) {
  PromptFields f{"p", "h", Label::neutral, "e"};
  EXPECT_EQ(render_prompt(f, PromptTarget::acceptability), "premise: p hypothesis: h answer: neutral explanation: e");
  EXPECT_EQ(render_prompt(f, PromptTarget::nli_finetune), "explain nli hypothesis: h premise: p");
  EXPECT_EQ(render_prompt(f, PromptTarget::tigerscore_autoj),
            "Given a hypothesis and its premise, please explain why the hypothesis is entailment, neutral, or "
            "contradiction.\nHypothesis: h, Premise: p.\nPlease explain why the hypothesis is neutral.");
  EXPECT_EQ(render_prompt(f, PromptTarget::olmo_finetune),
            "### Premise: p Hypothesis: h\n### Response: {\"relationship\": \"neutral\", \"explanation\": \"e\"}");
}

TEST(RenderPrompt, ThemisObject) {
  PromptFields f{"the premise", "the \"hyp\"", Label::entailment, "because"};
  const auto obj = Json::parse(render_prompt(f, PromptTarget::themis));
  EXPECT_EQ(obj["task"], "Controllable Generation");
  EXPECT_EQ(obj["source_des"], "Hypothesis and Premise Pair");
  EXPECT_EQ(obj["source"],
            "Hypothesis: the \"hyp\", Premise: the premise, please explain why the Hypothesis is entailment.");
  EXPECT_EQ(obj["target_des"], "Explanation");
  EXPECT_EQ(obj["target"], "because");
  EXPECT_EQ(obj.begin().key(), "task");
}

TEST(RenderPrompt, MissingFieldNamed) {
  PromptFields f{"p", std::nullopt, Label::neutral, "e"};
  try {
    render_prompt(f, PromptTarget::acceptability);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("[hypothesis]"), std::string::npos);
  }
  PromptFields g{"p", "h", std::nullopt, "e"};
  EXPECT_THROW(render_prompt(g, PromptTarget::themis), Error);
}

TEST(ParsedFiles, RoundTrip) {
  auto dir = testutil::scratch_dir("parsed");
  std::vector<ParsedOutput> xs{{"a", Label::neutral, "x", ParseStatus::clean},
                               {"b", std::nullopt, std::nullopt, ParseStatus::none}};
  save_parsed(dir / "p.jsonl", xs);
  auto back = load_parsed(dir / "p.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].label, Label::neutral);
  EXPECT_EQ(back[0].explanation, "x");
  EXPECT_EQ(back[1].status, ParseStatus::none);
  EXPECT_FALSE(back[1].label);
}

TEST(Generations, LoadRejectsUnknownTemplate) {
  auto dir = testutil::scratch_dir("gens");
  auto ok = testutil::write_file(dir / "g.jsonl",
                                 R"({"id":"a","model_id":"m","raw_text":"neutral explanation: x","template":"nli_template"})");
  auto gens = load_generations(ok);
  ASSERT_EQ(gens.size(), 1u);
  EXPECT_EQ(parse_generation(gens[0]).instance_id, "a");
  auto bad = testutil::write_file(dir / "b.jsonl", R"({"id":"a","model_id":"m","raw_text":"x","template":"xml"})");
  EXPECT_THROW(load_generations(bad), SchemaError);
}
