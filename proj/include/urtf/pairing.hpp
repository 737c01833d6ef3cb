#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "urtf/synth.hpp"

namespace urtf::pairing {

// Exact rational score; keeps the matching-score symmetry free of floating
// error so the matcher is deterministic.
struct Rational {
    long long num = 0;
    long long den = 1;

    Rational() = default;
    Rational(long long n, long long d);
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;
    bool operator<(const Rational& o) const { return num * o.den < o.num * den; }
};

class EmptyClassSet : public std::runtime_error {
public:
    EmptyClassSet() : std::runtime_error("instance has an empty class set") {}
};

struct ClassIndex {
    std::map<std::string, std::vector<std::string>> classes;  // class -> instance ids

    std::size_t count(const std::string& cls) const {
        auto it = classes.find(cls);
        return it == classes.end() ? 0 : it->second.size();
    }
};

// Complete graph over one class subset; weights[i][j] symmetric, >= 0.
struct PairingGraph {
    std::vector<std::string> nodes;
    std::vector<std::vector<double>> weights;
};

struct Matching {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // node indices, first < second
    std::vector<std::size_t> leftovers;
    double total_weight = 0;
};

struct PairConfig {
    std::size_t exact_threshold = 200;  // blossom up to here, greedy above
    std::uint64_t n_spot_negatives = 10, n_asso_negatives = 10;
    unsigned threads = 1;
};

struct PairingReport {
    std::size_t instances = 0, classes = 0, pairs = 0, self_pairs = 0, skipped = 0;
    std::size_t read_passes = 0;
    double wall_time_ms = 0;
    std::map<std::string, std::string> matcher_per_class;  // "exact" | "greedy"

    std::string to_json() const;
};

// rho(s, q) = (|F(s) ∩ F(q)| + 1) / |F(s)|
Rational pairing_score(const std::set<std::string>& support_classes,
                       const std::set<std::string>& query_classes);

// phi(x, y) = max{rho(x,y), rho(y,x)}
Rational matching_score(const std::set<std::string>& x_classes,
                        const std::set<std::string>& y_classes);

Rational pairing_score(const synth::Instance& support, const synth::Instance& query);
Rational matching_score(const synth::Instance& x, const synth::Instance& y);

// Instance i appears under every class in its SEL target's class set.
// Unparseable (or classless) instances are reported and skipped.
ClassIndex partition_by_class(
    const std::vector<synth::Instance>& corpus,
    const std::function<void(const std::string& id, const std::string& why)>& on_skip = {});

// Smallest class first (ties by name); each instance stays in the first class
// that claims it.
ClassIndex deduplicate(const ClassIndex& index);

Matching max_weight_matching_exact(const PairingGraph& graph);
Matching max_weight_matching_greedy(const PairingGraph& graph);

// Dispatches on node count vs exact_threshold.
Matching max_weight_matching(const PairingGraph& graph, std::size_t exact_threshold = 200);

// The member whose classes cover the other best becomes support; ties go to
// the smaller instance id.
synth::PairedTask assign_roles(const synth::Instance& x, const synth::Instance& y,
                               const std::string& class_name);

// Two-pass pipeline: pass 1 builds the deduplicated index and
// matchings over ids and class sets only; pass 2 re-reads the corpus and
// writes paired tasks. Exactly two corpus reads, counted in the report.
PairingReport pair_corpus(const std::string& corpus_path, const std::string& output_path,
                          const PairConfig& config = {});

}  // namespace urtf::pairing
