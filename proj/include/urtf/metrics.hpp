#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "urtf/sel.hpp"

namespace urtf::metrics {

enum class TaskKind { NER, RTE, EVT_TRG, EVT_ARG, SENTI };

TaskKind task_kind_from_string(const std::string& name);
std::string to_string(TaskKind kind);

// One labeled character span; (-1,-1) marks a span that could not be
// grounded in the source text.
struct Element {
    std::string label;
    std::int64_t start = -1;
    std::int64_t end = -1;

    auto operator<=>(const Element&) const = default;
};

struct GroundedTuple {
    TaskKind task_kind;
    std::vector<Element> elements;

    auto operator<=>(const GroundedTuple&) const = default;
};

// Record with every InfoSpan grounded to character offsets via the
// left-to-right cursor rule.
struct GroundedAsso {
    std::string name;
    std::string span;
    std::int64_t start = -1, end = -1;
};
struct GroundedSpot {
    std::string name;
    std::string span;
    std::int64_t start = -1, end = -1;
    std::vector<GroundedAsso> assos;
};
using GroundedRecord = std::vector<GroundedSpot>;

struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;

    Counts& operator+=(const Counts& o) {
        tp += o.tp; fp += o.fp; fn += o.fn;
        return *this;
    }
};

struct PrfScore {
    std::size_t tp = 0, fp = 0, fn = 0;
    double precision = 0, recall = 0, f1 = 0;
};

// Each InfoSpan is matched to its earliest occurrence at or after the cursor,
// which advances to one past each match's start. Unmatched spans get (-1,-1).
GroundedRecord reconstruct_offsets(const sel::SelRecord& record, const std::string& text);

std::vector<GroundedTuple> to_tuples(const sel::SelRecord& record, const std::string& text,
                                     TaskKind kind);

// Exact-match multiset intersection: tp = matched, fp = |pred|-tp, fn = |gold|-tp.
Counts match_multisets(const std::vector<GroundedTuple>& gold,
                       const std::vector<GroundedTuple>& pred);

// Sums counts over instances before computing P/R/F1 (0 on zero denominators).
PrfScore micro_f1(const std::vector<Counts>& per_instance);
PrfScore micro_f1(const Counts& total);

struct ScoredInstance {
    std::string text;
    sel::SelRecord gold;
    sel::SelRecord pred;
};

PrfScore score_dataset(const std::vector<ScoredInstance>& dataset, TaskKind kind);

// Buckets instances by gold NER tuple count (number of spot groups).
// bucket_edges = {e0, e1, ...} produces buckets [0,e0), [e0,e1), ..., [last,inf).
std::map<std::string, PrfScore> score_grouped(const std::vector<ScoredInstance>& dataset,
                                              TaskKind kind,
                                              const std::vector<std::size_t>& bucket_edges);

}  // namespace urtf::metrics
