#include "infocir/prompt_enhancer.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "infocir/error.hpp"
#include "infocir/text.hpp"

namespace infocir {

namespace {

std::string canonical(const std::string& s) { return join_words(tokenize_words(s)); }

std::string replace_all(std::string s, const std::string& key, const std::string& value) {
  for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) {
    s.replace(pos, key.size(), value);
  }
  return s;
}

struct Template {
  const char* pattern;
  bool needs_style;
};

constexpr Template kFallbackTemplates[] = {
    {"a photo of {class}", false},
    {"a {style} {class}", true},
    {"{baseline} {class}", false},
    {"{class} in {style} style", true},
};

}  // namespace

std::vector<VariantProposal> dedupe_variants(const std::vector<VariantProposal>& proposals,
                                             const std::string& baseline_modifier) {
  std::set<std::string> seen{canonical(baseline_modifier)};
  std::vector<VariantProposal> out;
  for (const auto& p : proposals) {
    const auto text = trim(p.text);
    const auto key = canonical(text);
    if (key.empty() || !seen.insert(key).second) continue;
    out.push_back({text, p.source});
  }
  return out;
}

std::string build_system_prompt(std::size_t n) {
  std::ostringstream os;
  os << "You rewrite the text modifier of a composed image retrieval query so that the composed query "
        "retrieves the user's ideal images. Reply with a JSON array of exactly "
     << n << " distinct short prompt strings and nothing else.";
  return os.str();
}

std::string build_user_prompt(const EnhancementRequest& request, const EmbeddingCorpus& corpus) {
  std::ostringstream os;
  if (request.baseline.reference.is_image()) {
    if (auto idx = corpus.find(request.baseline.reference.image_ref())) {
      const auto& r = corpus.record(*idx);
      os << "Reference image: class \"" << r.class_label << "\"";
      if (r.style_label) os << ", style \"" << *r.style_label << "\"";
      if (!r.caption.empty()) os << ", caption \"" << r.caption << "\"";
      os << "\n";
    }
  }
  os << "Current modifier: \"" << request.baseline.modifier << "\"\n";
  os << "Ideal images:\n";
  for (const auto& id : request.ideals.image_ids) {
    const auto& r = corpus.record(id);
    os << "- class \"" << r.class_label << "\"";
    if (r.style_label) os << ", style \"" << *r.style_label << "\"";
    if (!r.caption.empty()) os << ", caption \"" << r.caption << "\"";
    os << "\n";
  }
  os << "Return " << request.n_variants << " alternative modifiers as a JSON array of strings.";
  return os.str();
}

std::vector<VariantProposal> fallback_variants(const EnhancementRequest& request, const EmbeddingCorpus& corpus) {
  std::vector<VariantProposal> raw;
  for (const auto& id : request.ideals.image_ids) {
    const auto& r = corpus.record(id);
    for (const auto& t : kFallbackTemplates) {
      if (t.needs_style && !r.style_label) continue;
      std::string s = replace_all(t.pattern, "{class}", r.class_label);
      s = replace_all(s, "{style}", r.style_label.value_or(""));
      s = replace_all(s, "{baseline}", trim(request.baseline.modifier));
      raw.push_back({trim(s), "fallback"});
    }
  }
  auto out = dedupe_variants(raw, request.baseline.modifier);
  if (out.size() > request.n_variants) out.resize(request.n_variants);
  return out;
}

std::vector<VariantProposal> generate_variants(const EnhancementRequest& request, const EmbeddingCorpus& corpus,
                                               const LlmClient* llm) {
  if (request.n_variants == 0) return {};
  if (llm && llm->config().configured()) {
    if (auto content = llm->complete(build_system_prompt(request.n_variants), build_user_prompt(request, corpus))) {
      if (auto parsed = parse_variant_array(*content)) {
        std::vector<VariantProposal> raw;
        for (auto& s : *parsed) raw.push_back({s, "llm"});
        auto out = dedupe_variants(raw, request.baseline.modifier);
        if (out.size() > request.n_variants) out.resize(request.n_variants);
        if (!out.empty()) return out;
      }
    }
  }
  return fallback_variants(request, corpus);
}

bool variant_before(const PromptVariant& a, const PromptVariant& b) {
  if (a.best_ideal_rank != b.best_ideal_rank) return a.best_ideal_rank < b.best_ideal_rank;
  if (a.mean_ideal_rank != b.mean_ideal_rank) return a.mean_ideal_rank < b.mean_ideal_rank;
  if (a.positive_delta_sum != b.positive_delta_sum) return a.positive_delta_sum > b.positive_delta_sum;
  return a.text < b.text;
}

EnhanceResult evaluate_variants(const RetrievalEngine& engine, const ComposedQuery& baseline,
                                const IdealAnchorSet& ideals, const std::vector<VariantProposal>& proposals) {
  EnhanceResult out;
  if (proposals.empty()) {
    const auto ranked = engine.rank_all(baseline);
    for (std::size_t j = 0; j < baseline.k; ++j) out.matrix.baseline_top_k.push_back(ranked.entries[j].image_id);
    for (const auto& e : ranked.entries) {
      if (std::find(ideals.image_ids.begin(), ideals.image_ids.end(), e.image_id) != ideals.image_ids.end()) {
        out.matrix.baseline_ideal_ranks[e.image_id] = e.rank;
      }
    }
    return out;
  }

  std::vector<std::string> texts;
  for (const auto& p : proposals) texts.push_back(p.text);
  const RankDeltaMatrix m = engine.rank_delta(baseline, texts, ideals);

  std::vector<PromptVariant> variants;
  for (std::size_t v = 0; v < proposals.size(); ++v) {
    PromptVariant pv;
    pv.text = proposals[v].text;
    pv.source = proposals[v].source;
    pv.ideal_ranks = m.ideal_ranks[v];
    pv.best_ideal_rank = std::numeric_limits<std::size_t>::max();
    double sum = 0.0;
    for (const auto& [_, r] : pv.ideal_ranks) {
      pv.best_ideal_rank = std::min(pv.best_ideal_rank, r);
      sum += double(r);
    }
    pv.mean_ideal_rank = sum / double(pv.ideal_ranks.size());
    for (long d : m.deltas[v]) pv.positive_delta_sum += std::max(0L, d);
    pv.deltas_row = v;  // temporarily the unsorted row
    variants.push_back(std::move(pv));
  }
  std::sort(variants.begin(), variants.end(), variant_before);

  out.matrix.baseline_top_k = m.baseline_top_k;
  out.matrix.baseline_ideal_ranks = m.baseline_ideal_ranks;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto src = variants[i].deltas_row;
    out.matrix.variants.push_back(m.variants[src]);
    out.matrix.deltas.push_back(m.deltas[src]);
    out.matrix.ideal_ranks.push_back(m.ideal_ranks[src]);
    variants[i].deltas_row = i;
  }
  out.variants = std::move(variants);
  return out;
}

EnhanceResult enhance(const RetrievalEngine& engine, const EnhancementRequest& request, const LlmClient* llm) {
  std::vector<VariantProposal> proposals;
  for (const auto& m : request.manual_variants) proposals.push_back({m, "manual"});
  for (auto& p : generate_variants(request, engine.corpus(), llm)) proposals.push_back(std::move(p));
  return evaluate_variants(engine, request.baseline, request.ideals,
                           dedupe_variants(proposals, request.baseline.modifier));
}

}  // namespace infocir
