#include "urtf/prompting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace urtf::prompting {

namespace {

std::vector<std::string> ordered_names(const std::set<std::string>& names,
                                       const NameOrdering& ordering) {
    std::vector<std::string> out(names.begin(), names.end());  // lexicographic
    if (ordering.shuffle) {
        std::mt19937_64 rng(ordering.seed);
        std::shuffle(out.begin(), out.end(), rng);
    }
    return out;
}

std::vector<std::string> draw_without_replacement(const std::set<std::string>& gold,
                                                  const std::set<std::string>& pool,
                                                  std::size_t n, std::mt19937_64& rng) {
    std::vector<std::string> candidates;
    for (const auto& name : pool)
        if (!gold.contains(name)) candidates.push_back(name);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    if (candidates.size() > n) candidates.resize(n);
    return candidates;
}

}  // namespace

std::string sentinel_token(int index) {
    std::ostringstream os;
    os << "<extra_id_" << index << ">";
    return os.str();
}

SsiPrompt build_ssi(const sel::Schema& schema, const NameOrdering& ordering) {
    if (schema.spots.empty() && schema.assos.empty()) throw EmptySchema();
    SsiPrompt prompt;
    for (const auto& name : ordered_names(schema.spots, ordering)) {
        prompt.tokens.push_back(kSpotMarker);
        prompt.tokens.push_back(name);
    }
    for (const auto& name : ordered_names(schema.assos, ordering)) {
        prompt.tokens.push_back(kAssoMarker);
        prompt.tokens.push_back(name);
    }
    prompt.tokens.push_back(kTextMarker);
    return prompt;
}

sel::Schema sample_schema_negatives(const sel::Schema& instance_schema, const sel::Schema& pool,
                                    std::size_t n_spot, std::size_t n_asso,
                                    std::mt19937_64& rng) {
    sel::Schema out = instance_schema;
    for (auto& name : draw_without_replacement(instance_schema.spots, pool.spots, n_spot, rng))
        out.spots.insert(std::move(name));
    for (auto& name : draw_without_replacement(instance_schema.assos, pool.assos, n_asso, rng))
        out.assos.insert(std::move(name));
    return out;
}

ModelInput assemble_retrieval_input(const SsiPrompt& ssi, const TokenSeq& text) {
    ModelInput input{InputKind::Retrieval, ssi.tokens};
    input.tokens.insert(input.tokens.end(), text.begin(), text.end());
    return input;
}

TokenSeq tokenize_sel(const sel::SelRecord& record) {
    std::istringstream is(sel::linearize_sel(record));
    TokenSeq tokens;
    std::string tok;
    while (is >> tok) tokens.push_back(tok);
    return tokens;
}

ModelInput assemble_extraction_input(const SsiPrompt& ssi, const TokenSeq& text,
                                     const sel::SelRecord& knowledge) {
    auto suffix = tokenize_sel(knowledge);
    ModelInput input{InputKind::Extraction, ssi.tokens};
    input.tokens.insert(input.tokens.end(), text.begin(), text.end());
    input.tokens.insert(input.tokens.end(), suffix.begin(), suffix.end());
    return input;
}

CorruptionPair corrupt_text(const TokenSeq& text, double rate, double mean_span,
                            std::mt19937_64& rng) {
    const std::size_t n = text.size();
    const auto need = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n)));

    std::vector<bool> removed(n, false);
    std::size_t removed_count = 0;
    std::vector<std::pair<std::size_t, std::size_t>> spans;  // (start, len)
    std::geometric_distribution<std::size_t> extra(1.0 / mean_span);

    while (removed_count < need && spans.size() < static_cast<std::size_t>(kNumSentinels)) {
        std::size_t len = std::min(1 + extra(rng), need - removed_count);
        std::vector<std::size_t> starts;
        for (; len >= 1 && starts.empty(); /* shrink until a span fits */) {
            for (std::size_t s = 0; s + len <= n; ++s) {
                bool free = true;
                for (std::size_t i = s; i < s + len; ++i)
                    if (removed[i]) { free = false; break; }
                if (free) starts.push_back(s);
            }
            if (starts.empty() && --len == 0) break;
        }
        if (starts.empty()) break;  // no room left
        std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
        std::size_t s = starts[pick(rng)];
        for (std::size_t i = s; i < s + len; ++i) removed[i] = true;
        removed_count += len;
        spans.emplace_back(s, len);
    }
    std::sort(spans.begin(), spans.end());

    CorruptionPair pair;
    std::size_t span_idx = 0;
    for (std::size_t i = 0; i < n;) {
        if (span_idx < spans.size() && spans[span_idx].first == i) {
            auto [s, len] = spans[span_idx];
            auto sentinel = sentinel_token(static_cast<int>(span_idx));
            pair.corrupted_input.push_back(sentinel);
            pair.target.push_back(sentinel);
            for (std::size_t j = s; j < s + len; ++j) pair.target.push_back(text[j]);
            i += len;
            ++span_idx;
        } else {
            pair.corrupted_input.push_back(text[i]);
            ++i;
        }
    }
    return pair;
}

TokenSeq reconstruct_text(const CorruptionPair& pair) {
    TokenSeq out;
    auto is_sentinel = [](const std::string& t) {
        return t.rfind("<extra_id_", 0) == 0 && t.back() == '>';
    };
    for (const auto& tok : pair.corrupted_input) {
        if (!is_sentinel(tok)) {
            out.push_back(tok);
            continue;
        }
        auto it = std::find(pair.target.begin(), pair.target.end(), tok);
        for (++it; it != pair.target.end() && !is_sentinel(*it); ++it) out.push_back(*it);
    }
    return out;
}

}  // namespace urtf::prompting
