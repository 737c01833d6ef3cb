#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "urtf/sel.hpp"

namespace urtf::prompting {

using TokenSeq = std::vector<std::string>;

inline constexpr const char* kSpotMarker = "[spot]";
inline constexpr const char* kAssoMarker = "[asso]";
inline constexpr const char* kTextMarker = "[text]";
inline constexpr int kNumSentinels = 100;

// "<extra_id_0>" .. "<extra_id_99>"
std::string sentinel_token(int index);

struct SsiPrompt {
    TokenSeq tokens;

    bool operator==(const SsiPrompt&) const = default;
};

enum class InputKind { Retrieval, Extraction };

struct ModelInput {
    InputKind kind;
    TokenSeq tokens;
};

struct CorruptionPair {
    TokenSeq corrupted_input;  // x': text with spans replaced by sentinels
    TokenSeq target;           // x'': sentinel-delimited removed spans
};

struct NameOrdering {
    bool shuffle = false;  // default: lexicographic
    std::uint64_t seed = 0;
};

class EmptySchema : public std::runtime_error {
public:
    EmptySchema() : std::runtime_error("SSI schema has no spots and no assos") {}
};

// "[spot] A [spot] B [asso] R [text]"
SsiPrompt build_ssi(const sel::Schema& schema, const NameOrdering& ordering = {});

// Adds up to n_spot/n_asso negative names drawn without replacement from
// pool minus instance_schema. The gold schema is always kept intact.
sel::Schema sample_schema_negatives(const sel::Schema& instance_schema, const sel::Schema& pool,
                                    std::size_t n_spot, std::size_t n_asso,
                                    std::mt19937_64& rng);

// s ⊕ x
ModelInput assemble_retrieval_input(const SsiPrompt& ssi, const TokenSeq& text);

// s ⊕ x ⊕ k, where k is the whitespace-tokenized canonical linearization.
ModelInput assemble_extraction_input(const SsiPrompt& ssi, const TokenSeq& text,
                                     const sel::SelRecord& knowledge);

TokenSeq tokenize_sel(const sel::SelRecord& record);

// Span corruption: removes non-overlapping spans with geometric-like lengths
// (mean mean_span, truncated at the remaining budget) until at least
// rate * |text| tokens are gone, replacing each span with a fresh sentinel.
CorruptionPair corrupt_text(const TokenSeq& text, double rate, double mean_span,
                            std::mt19937_64& rng);

inline CorruptionPair corrupt_text(const TokenSeq& text, std::mt19937_64& rng) {
    return corrupt_text(text, 0.15, 3.0, rng);
}

// Inverse of corrupt_text; used for checking and by tests.
TokenSeq reconstruct_text(const CorruptionPair& pair);

}  // namespace urtf::prompting
