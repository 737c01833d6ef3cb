#include "urtf/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace urtf::metrics {

TaskKind task_kind_from_string(const std::string& name) {
    if (name == "ner") return TaskKind::NER;
    if (name == "rte") return TaskKind::RTE;
    if (name == "evt-trg") return TaskKind::EVT_TRG;
    if (name == "evt-arg") return TaskKind::EVT_ARG;
    if (name == "senti") return TaskKind::SENTI;
    throw std::invalid_argument("unknown task kind: " + name);
}

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::NER: return "ner";
        case TaskKind::RTE: return "rte";
        case TaskKind::EVT_TRG: return "evt-trg";
        case TaskKind::EVT_ARG: return "evt-arg";
        case TaskKind::SENTI: return "senti";
    }
    return "?";
}

GroundedRecord reconstruct_offsets(const sel::SelRecord& record, const std::string& text) {
    std::size_t cursor = 0;
    auto ground = [&](const std::string& span, std::int64_t& start, std::int64_t& end) {
        if (span.empty()) return;  // nothing to ground; stays (-1,-1)
        auto pos = text.find(span, cursor);
        if (pos == std::string::npos) return;
        start = static_cast<std::int64_t>(pos);
        end = static_cast<std::int64_t>(pos + span.size());
        cursor = pos + 1;
    };

    GroundedRecord out;
    for (const auto& spot : record.groups) {
        GroundedSpot g{spot.spot_name, spot.info_span};
        ground(g.span, g.start, g.end);
        for (const auto& asso : spot.assos) {
            GroundedAsso a{asso.asso_name, asso.info_span};
            ground(a.span, a.start, a.end);
            g.assos.push_back(std::move(a));
        }
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<GroundedTuple> to_tuples(const sel::SelRecord& record, const std::string& text,
                                     TaskKind kind) {
    auto grounded = reconstruct_offsets(record, text);
    std::vector<GroundedTuple> tuples;
    for (const auto& spot : grounded) {
        if (kind == TaskKind::NER || kind == TaskKind::EVT_TRG) {
            tuples.push_back({kind, {{spot.name, spot.start, spot.end}}});
            continue;
        }
        for (const auto& asso : spot.assos) {
            GroundedTuple t{kind, {}};
            switch (kind) {
                case TaskKind::RTE: {
                    t.elements.push_back({spot.name, spot.start, spot.end});
                    t.elements.push_back({asso.name, -1, -1});
                    // tail type comes from the first spot group with the same surface span
                    auto it = std::find_if(grounded.begin(), grounded.end(),
                                           [&](const GroundedSpot& s) { return s.span == asso.span; });
                    if (it != grounded.end())
                        t.elements.push_back({it->name, it->start, it->end});
                    else
                        t.elements.push_back({"", asso.start, asso.end});
                    break;
                }
                case TaskKind::EVT_ARG:
                    t.elements.push_back({spot.name, -1, -1});
                    t.elements.push_back({asso.name, asso.start, asso.end});
                    break;
                case TaskKind::SENTI:
                    t.elements.push_back({"target", spot.start, spot.end});
                    t.elements.push_back({"opinion", asso.start, asso.end});
                    t.elements.push_back({asso.name, -1, -1});
                    break;
                default:
                    break;
            }
            tuples.push_back(std::move(t));
        }
    }
    return tuples;
}

Counts match_multisets(const std::vector<GroundedTuple>& gold,
                       const std::vector<GroundedTuple>& pred) {
    auto g = gold, p = pred;
    std::sort(g.begin(), g.end());
    std::sort(p.begin(), p.end());
    std::size_t tp = 0, i = 0, j = 0;
    while (i < g.size() && j < p.size()) {
        if (g[i] == p[j]) { ++tp; ++i; ++j; }
        else if (g[i] < p[j]) ++i;
        else ++j;
    }
    return {tp, pred.size() - tp, gold.size() - tp};
}

PrfScore micro_f1(const Counts& total) {
    PrfScore s;
    s.tp = total.tp;
    s.fp = total.fp;
    s.fn = total.fn;
    if (s.tp + s.fp > 0) s.precision = static_cast<double>(s.tp) / (s.tp + s.fp);
    if (s.tp + s.fn > 0) s.recall = static_cast<double>(s.tp) / (s.tp + s.fn);
    if (s.precision + s.recall > 0)
        s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

PrfScore micro_f1(const std::vector<Counts>& per_instance) {
    Counts total;
    for (const auto& c : per_instance) total += c;
    return micro_f1(total);
}

namespace {

Counts instance_counts(const ScoredInstance& inst, TaskKind kind) {
    return match_multisets(to_tuples(inst.gold, inst.text, kind),
                           to_tuples(inst.pred, inst.text, kind));
}

}  // namespace

PrfScore score_dataset(const std::vector<ScoredInstance>& dataset, TaskKind kind) {
    Counts total;
    for (const auto& inst : dataset) total += instance_counts(inst, kind);
    return micro_f1(total);
}

std::map<std::string, PrfScore> score_grouped(const std::vector<ScoredInstance>& dataset,
                                              TaskKind kind,
                                              const std::vector<std::size_t>& bucket_edges) {
    auto bucket_label = [&](std::size_t n) -> std::string {
        std::size_t lo = 0;
        for (std::size_t edge : bucket_edges) {
            if (n < edge)
                return "[" + std::to_string(lo) + "," + std::to_string(edge) + ")";
            lo = edge;
        }
        return "[" + std::to_string(lo) + ",inf)";
    };

    std::map<std::string, Counts> grouped;
    // pre-create every bucket so empty ones still report (0,0,0)
    std::size_t lo = 0;
    for (std::size_t edge : bucket_edges) {
        grouped["[" + std::to_string(lo) + "," + std::to_string(edge) + ")"];
        lo = edge;
    }
    grouped["[" + std::to_string(lo) + ",inf)"];

    for (const auto& inst : dataset) {
        std::size_t entities = inst.gold.groups.size();
        grouped[bucket_label(entities)] += instance_counts(inst, kind);
    }
    std::map<std::string, PrfScore> out;
    for (const auto& [label, counts] : grouped) out[label] = micro_f1(counts);
    return out;
}

}  // namespace urtf::metrics
