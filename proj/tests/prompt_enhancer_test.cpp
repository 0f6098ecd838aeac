#include <gtest/gtest.h>

#include <thread>

#include "infocir/fixtures.hpp"
#include "infocir/prompt_enhancer.hpp"
#include "json.hpp"
#include "test_support.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro clashes with Eigen.
#include "httplib.h"

using namespace infocir;
using nlohmann::json;
namespace ts = testing_support;

namespace {

// Chat-completions endpoint answering with a fixed message content (or a raw
// body when `raw` is set). Records the last request body.
class MockLlm {
 public:
  MockLlm(std::string content, bool raw = false) {
    server_.Post("/v1/chat/completions", [this, content, raw](const httplib::Request& req, httplib::Response& res) {
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      ++calls;
      if (raw) {
        res.set_content(content, "text/plain");
        return;
      }
      res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockLlm() {
    server_.stop();
    thread_.join();
  }
  LlmConfig config() const {
    LlmConfig c;
    c.url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    c.model = "mock";
    c.api_key = "k";
    c.timeout_seconds = 5;
    return c;
  }

  std::string last_body;
  std::string last_auth;
  int calls = 0;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

struct Terrier {
  StubScenario s = terrier_scenario(1);
  StubProvider stub{s.catalog, s.corpus.dim(), s.stub_seed};
  RetrievalEngine engine{s.corpus, stub, 2};

  EnhancementRequest request(std::size_t n = 5) const {
    EnhancementRequest r;
    r.session_id = "t";
    r.n_variants = n;
    r.ideals = IdealAnchorSet::make(s.corpus, {s.ideal_id});
    r.baseline = {Reference::image(s.reference_id), s.baseline_modifier, s.k};
    return r;
  }
};

const Terrier& terrier() {
  static const Terrier t;
  return t;
}

std::vector<std::string> texts(const std::vector<VariantProposal>& v) {
  std::vector<std::string> out;
  for (const auto& p : v) out.push_back(p.text);
  return out;
}

}  // namespace

TEST(PromptEnhancer, FallbackTemplatesFromIdealMetadata) {
  const auto& t = terrier();
  const auto v = fallback_variants(t.request(), t.s.corpus);
  EXPECT_EQ(texts(v), (std::vector<std::string>{"a photo of Boston Terrier", "a cartoon Boston Terrier",
                                                "small black and white dog Boston Terrier",
                                                "Boston Terrier in cartoon style"}));
  for (const auto& p : v) EXPECT_EQ(p.source, "fallback");
  EXPECT_EQ(fallback_variants(t.request(2), t.s.corpus).size(), 2u);
}

TEST(PromptEnhancer, ZeroVariantsGeneratesNothing) {
  const auto& t = terrier();
  EXPECT_TRUE(generate_variants(t.request(0), t.s.corpus, nullptr).empty());
  const auto r = enhance(t.engine, t.request(0), nullptr);
  EXPECT_TRUE(r.variants.empty());
  EXPECT_EQ(r.matrix.baseline_top_k.size(), t.s.k);
  EXPECT_EQ(r.matrix.baseline_ideal_ranks.at(t.s.ideal_id), 6u);
}

TEST(PromptEnhancer, UnconfiguredLlmUsesFallback) {
  const auto& t = terrier();
  const LlmClient offline(LlmConfig{});
  const auto v = generate_variants(t.request(), t.s.corpus, &offline);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].source, "fallback");
}

TEST(PromptEnhancer, LlmReplyIsUsed) {
  const auto& t = terrier();
  MockLlm mock(R"(["a cartoon terrier", "Boston Terrier puppy", "A cartoon terrier ", "small black and white dog"])");
  const LlmClient llm(mock.config());
  const auto v = generate_variants(t.request(5), t.s.corpus, &llm);
  EXPECT_EQ(texts(v), (std::vector<std::string>{"a cartoon terrier", "Boston Terrier puppy"}));
  for (const auto& p : v) EXPECT_EQ(p.source, "llm");
  EXPECT_EQ(mock.calls, 1);
  EXPECT_EQ(mock.last_auth, "Bearer k");
  const auto body = json::parse(mock.last_body);
  EXPECT_EQ(body.at("model"), "mock");
  EXPECT_NE(body.at("messages").at(1).at("content").get<std::string>().find("Boston Terrier"), std::string::npos);
}

TEST(PromptEnhancer, MalformedLlmReplyFallsBack) {
  const auto& t = terrier();
  for (const auto& [content, raw] : std::vector<std::pair<std::string, bool>>{
           {"sorry, I cannot help", false}, {"<html>busy</html>", true}, {"[1, 2, 3]", false}, {"[]", false}}) {
    MockLlm mock(content, raw);
    const LlmClient llm(mock.config());
    const auto v = generate_variants(t.request(), t.s.corpus, &llm);
    ASSERT_FALSE(v.empty()) << content;
    EXPECT_EQ(v[0].source, "fallback") << content;
  }
}

TEST(PromptEnhancer, UnreachableLlmFallsBack) {
  const auto& t = terrier();
  LlmConfig c;
  {
    MockLlm gone("[]");
    c = gone.config();
  }
  c.timeout_seconds = 2;
  const LlmClient llm(c);
  EXPECT_EQ(generate_variants(t.request(), t.s.corpus, &llm).at(0).source, "fallback");
}

TEST(PromptEnhancer, ParseToleratesProseAndFences) {
  EXPECT_EQ(parse_variant_array(R"(["a", "b"])"), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(parse_variant_array("Here you go:\n```json\n[\"x y\", \"z\"]\n```\nEnjoy."),
            (std::vector<std::string>{"x y", "z"}));
  EXPECT_FALSE(parse_variant_array("no array here").has_value());
  EXPECT_FALSE(parse_variant_array(R"({"a": 1})").has_value());
  EXPECT_FALSE(parse_variant_array(R"(["a", 2])").has_value());
  EXPECT_FALSE(parse_variant_array("] backwards [").has_value());
}

TEST(PromptEnhancer, DedupeIsCaseAndWhitespaceInsensitive) {
  const auto out = dedupe_variants(
      {{"Red  Apple", "llm"}, {"red apple", "llm"}, {"  ", "llm"}, {"base line", "llm"}, {"green", "manual"}},
      "Base   Line");
  EXPECT_EQ(out, (std::vector<VariantProposal>{{"Red  Apple", "llm"}, {"green", "manual"}}));
}

TEST(PromptEnhancer, OrderingMatchesBruteForceKeys) {
  SplitMix64 rng(17);
  std::vector<PromptVariant> vs;
  for (int i = 0; i < 300; ++i) {
    PromptVariant v;
    v.text = std::string(1, char('a' + rng.below(5))) + std::to_string(rng.below(3));
    v.best_ideal_rank = 1 + rng.below(4);
    v.mean_ideal_rank = double(v.best_ideal_rank) + 0.5 * double(rng.below(3));
    v.positive_delta_sum = long(rng.below(4));
    vs.push_back(v);
  }
  auto sorted = vs;
  std::sort(sorted.begin(), sorted.end(), variant_before);
  auto key = [](const PromptVariant& v) {
    return std::make_tuple(v.best_ideal_rank, v.mean_ideal_rank, -v.positive_delta_sum, v.text);
  };
  for (std::size_t i = 1; i < sorted.size(); ++i) EXPECT_LE(key(sorted[i - 1]), key(sorted[i]));
}

TEST(PromptEnhancer, EvaluateAlignsRowsWithSortedVariants) {
  const auto& t = terrier();
  const auto req = t.request();
  const std::vector<VariantProposal> proposals = {
      {t.s.baseline_modifier, "manual"}, {"a cartoon Boston Terrier", "manual"}, {"a sleepy cat", "manual"}};
  const auto r = evaluate_variants(t.engine, req.baseline, req.ideals, proposals);
  ASSERT_EQ(r.variants.size(), 3u);
  EXPECT_TRUE(std::is_sorted(r.variants.begin(), r.variants.end(), variant_before));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.variants[i].deltas_row, i);
    EXPECT_EQ(r.matrix.variants[i], r.variants[i].text);
    EXPECT_EQ(r.matrix.ideal_ranks[i], r.variants[i].ideal_ranks);
  }
  // The unchanged baseline row is all zeros and ranks after the improving variant.
  const auto base = std::find_if(r.variants.begin(), r.variants.end(),
                                 [&](const auto& v) { return v.text == t.s.baseline_modifier; });
  ASSERT_NE(base, r.variants.end());
  for (long d : r.matrix.deltas[base->deltas_row]) EXPECT_EQ(d, 0);
  EXPECT_EQ(base->best_ideal_rank, 6u);
  EXPECT_EQ(r.variants[0].text, "a cartoon Boston Terrier");
  EXPECT_EQ(r.variants[0].best_ideal_rank, 1u);
}

TEST(PromptEnhancer, IdealRanksMatchOracle) {
  const auto& t = terrier();
  const auto r = enhance(t.engine, t.request(), nullptr);
  std::vector<std::vector<float>> rows;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < t.s.corpus.count(); ++i) {
    rows.emplace_back(t.s.corpus.row(i).begin(), t.s.corpus.row(i).end());
    ids.push_back(t.s.corpus.record(i).id);
  }
  const auto& img = t.s.catalog.images.at(t.s.reference_id);
  const auto base = ts::ref_concepts(img.concepts, t.s.corpus.dim(), t.s.stub_seed);
  for (const auto& v : r.variants) {
    const auto order = ts::ref_ranking(rows, ids, ts::ref_compose(base, v.text, t.s.corpus.dim(), t.s.stub_seed));
    EXPECT_EQ(v.best_ideal_rank, ts::ref_rank(order, t.s.ideal_id)) << v.text;
  }
}

TEST(PromptEnhancer, AppleScenarioMovesIdealFromTwelveToTwo) {
  const auto s = apple_scenario(2);
  const StubProvider stub(s.catalog, s.corpus.dim(), s.stub_seed);
  const RetrievalEngine engine(s.corpus, stub);
  const ComposedQuery baseline{Reference::image(s.reference_id), s.baseline_modifier, s.k};
  const auto ideals = IdealAnchorSet::make(s.corpus, {s.ideal_id});
  const auto r = evaluate_variants(engine, baseline, ideals, {{s.variant_modifier, "manual"}});
  EXPECT_EQ(r.matrix.baseline_ideal_ranks.at(s.ideal_id), 12u);
  EXPECT_EQ(r.variants.at(0).best_ideal_rank, 2u);
  const auto col = std::find(r.matrix.baseline_top_k.begin(), r.matrix.baseline_top_k.end(), s.ideal_id);
  ASSERT_NE(col, r.matrix.baseline_top_k.end());
  EXPECT_EQ(r.matrix.deltas[0][std::size_t(col - r.matrix.baseline_top_k.begin())], 10);
}

TEST(PromptEnhancer, PromptsMentionIdealMetadata) {
  const auto& t = terrier();
  EXPECT_NE(build_system_prompt(4).find("exactly 4"), std::string::npos);
  const auto user = build_user_prompt(t.request(3), t.s.corpus);
  EXPECT_NE(user.find("cartoon"), std::string::npos);
  EXPECT_NE(user.find(t.s.baseline_modifier), std::string::npos);
}
