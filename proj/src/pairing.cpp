#include "urtf/pairing.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <deque>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace urtf::pairing {

namespace {

std::set<std::string> class_set_of(const synth::Instance& inst) {
    return sel::extract_class_set(sel::parse_sel(inst.sel));
}

// O(n^3) maximum weight matching on general graphs (blossom with dual
// variables), 1-based nodes, double weights. Weights <= 0 mean "no edge".
class WeightedBlossom {
public:
    WeightedBlossom() = default;
    explicit WeightedBlossom(const std::vector<std::vector<double>>& weights) { reset(weights); }

    // reusable across solves; grows internal storage as needed
    void reset(const std::vector<std::vector<double>>& weights) {
        n = static_cast<int>(weights.size());
        int cap = 2 * n + 1;
        if (static_cast<int>(w.size()) < cap) {
            w.resize(cap);
            lab.resize(cap);
            match.resize(cap);
            slack.resize(cap);
            st.resize(cap);
            pa.resize(cap);
            S.resize(cap);
            vis.resize(cap);
            flower.resize(cap);
            flower_from.resize(cap);
        }
        for (int b = 0; b < cap; ++b) {
            if (static_cast<int>(w[b].size()) < cap) w[b].resize(cap);
            if (static_cast<int>(flower_from[b].size()) < n + 1) flower_from[b].resize(n + 1);
            flower[b].clear();
        }
        std::fill(match.begin(), match.begin() + cap, 0);
        std::fill(vis.begin(), vis.begin() + cap, 0);
        timestamp = 0;
        q.clear();
        // stored weights are doubled so e_delta avoids a multiply
        for (int u = 1; u <= n; ++u)
            for (int v = 1; v <= n; ++v)
                w[u][v] = Edge{u, v, u == v ? 0.0 : 2 * weights[u - 1][v - 1]};
    }

    // match[u] (1-based) after solve; 0 = unmatched
    const std::vector<int>& solve() {
        n_x = n;
        for (int u = 0; u <= n; ++u) st[u] = u;
        double w_max = 0;
        for (int u = 1; u <= n; ++u)
            for (int v = 1; v <= n; ++v) {
                flower_from[u][v] = (u == v ? u : 0);
                w_max = std::max(w_max, w[u][v].w);
            }
        for (int u = 1; u <= n; ++u) lab[u] = w_max / 2;
        while (matching()) {}
        return match;
    }

private:
    struct Edge {
        int u = 0, v = 0;
        double w = 0;
    };

    static constexpr double kEps = 1e-9;

    int n = 0, n_x = 0;
    std::vector<std::vector<Edge>> w;
    std::vector<double> lab;
    std::vector<int> match, slack, st, pa, S, vis;
    std::vector<std::vector<int>> flower;
    std::vector<std::vector<int>> flower_from;
    std::deque<int> q;
    int timestamp = 0;

    double e_delta(const Edge& e) const { return lab[e.u] + lab[e.v] - w[e.u][e.v].w; }

    void update_slack(int u, int x) {
        if (!slack[x] || e_delta(w[u][x]) < e_delta(w[slack[x]][x])) slack[x] = u;
    }

    void set_slack(int x) {
        slack[x] = 0;
        for (int u = 1; u <= n; ++u)
            if (w[u][x].w > kEps && st[u] != x && S[st[u]] == 0) update_slack(u, x);
    }

    void q_push(int x) {
        if (x <= n) {
            q.push_back(x);
            return;
        }
        for (int i : flower[x]) q_push(i);
    }

    void set_st(int x, int b) {
        st[x] = b;
        if (x > n)
            for (int i : flower[x]) set_st(i, b);
    }

    int get_pr(int b, int xr) {
        int pr = static_cast<int>(std::find(flower[b].begin(), flower[b].end(), xr) -
                                  flower[b].begin());
        if (pr % 2 == 1) {
            std::reverse(flower[b].begin() + 1, flower[b].end());
            return static_cast<int>(flower[b].size()) - pr;
        }
        return pr;
    }

    void set_match(int u, int v) {
        match[u] = w[u][v].v;
        if (u <= n) return;
        Edge e = w[u][v];
        int xr = flower_from[u][e.u];
        int pr = get_pr(u, xr);
        for (int i = 0; i < pr; ++i) set_match(flower[u][i], flower[u][i ^ 1]);
        set_match(xr, v);
        std::rotate(flower[u].begin(), flower[u].begin() + pr, flower[u].end());
    }

    void augment(int u, int v) {
        for (;;) {
            int xnv = st[match[u]];
            set_match(u, v);
            if (!xnv) return;
            set_match(xnv, st[pa[xnv]]);
            u = st[pa[xnv]];
            v = xnv;
        }
    }

    int get_lca(int u, int v) {
        for (++timestamp; u || v; std::swap(u, v)) {
            if (u == 0) continue;
            if (vis[u] == timestamp) return u;
            vis[u] = timestamp;
            u = st[match[u]];
            if (u) u = st[pa[u]];
        }
        return 0;
    }

    void add_blossom(int u, int lca, int v) {
        int b = n + 1;
        while (b <= n_x && st[b]) ++b;
        if (b > n_x) ++n_x;
        lab[b] = 0;
        S[b] = 0;
        match[b] = match[lca];
        flower[b].clear();
        flower[b].push_back(lca);
        for (int x = u, y; x != lca; x = st[pa[y]]) {
            flower[b].push_back(x);
            flower[b].push_back(y = st[match[x]]);
            q_push(y);
        }
        std::reverse(flower[b].begin() + 1, flower[b].end());
        for (int x = v, y; x != lca; x = st[pa[y]]) {
            flower[b].push_back(x);
            flower[b].push_back(y = st[match[x]]);
            q_push(y);
        }
        set_st(b, b);
        for (int x = 1; x <= n_x; ++x) w[b][x].w = w[x][b].w = 0;
        for (int x = 1; x <= n; ++x) flower_from[b][x] = 0;
        for (int xs : flower[b]) {
            for (int x = 1; x <= n_x; ++x)
                if (w[b][x].w == 0 || e_delta(w[xs][x]) < e_delta(w[b][x])) {
                    w[b][x] = w[xs][x];
                    w[x][b] = w[x][xs];
                }
            for (int x = 1; x <= n; ++x)
                if (flower_from[xs][x]) flower_from[b][x] = xs;
        }
        set_slack(b);
    }

    void expand_blossom(int b) {
        for (int i : flower[b]) set_st(i, i);
        int xr = flower_from[b][w[b][pa[b]].u];
        int pr = get_pr(b, xr);
        for (int i = 0; i < pr; i += 2) {
            int xs = flower[b][i], xns = flower[b][i + 1];
            pa[xs] = w[xns][xs].u;
            S[xs] = 1;
            S[xns] = 0;
            slack[xs] = 0;
            set_slack(xns);
            q_push(xns);
        }
        S[xr] = 1;
        pa[xr] = pa[b];
        for (std::size_t i = pr + 1; i < flower[b].size(); ++i) {
            int xs = flower[b][i];
            S[xs] = -1;
            set_slack(xs);
        }
        st[b] = 0;
    }

    bool on_found_edge(const Edge& e) {
        int u = st[e.u], v = st[e.v];
        if (S[v] == -1) {
            pa[v] = e.u;
            S[v] = 1;
            int nu = st[match[v]];
            slack[v] = slack[nu] = 0;
            S[nu] = 0;
            q_push(nu);
        } else if (S[v] == 0) {
            int lca = get_lca(u, v);
            if (!lca) {
                augment(u, v);
                augment(v, u);
                return true;
            }
            add_blossom(u, lca, v);
        }
        return false;
    }

    bool matching() {
        std::fill(S.begin(), S.begin() + n_x + 1, -1);
        std::fill(slack.begin(), slack.begin() + n_x + 1, 0);
        q.clear();
        for (int x = 1; x <= n_x; ++x)
            if (st[x] == x && !match[x]) {
                pa[x] = 0;
                S[x] = 0;
                q_push(x);
            }
        if (q.empty()) return false;
        for (;;) {
            while (!q.empty()) {
                int u = q.front();
                q.pop_front();
                if (S[st[u]] == 1) continue;
                for (int v = 1; v <= n; ++v)
                    if (w[u][v].w > kEps && st[u] != st[v]) {
                        if (e_delta(w[u][v]) <= kEps) {
                            if (on_found_edge(w[u][v])) return true;
                        } else {
                            update_slack(u, st[v]);
                        }
                    }
            }
            double d = std::numeric_limits<double>::infinity();
            for (int b = n + 1; b <= n_x; ++b)
                if (st[b] == b && S[b] == 1) d = std::min(d, lab[b] / 2);
            for (int x = 1; x <= n_x; ++x)
                if (st[x] == x && slack[x]) {
                    if (S[x] == -1)
                        d = std::min(d, e_delta(w[slack[x]][x]));
                    else if (S[x] == 0)
                        d = std::min(d, e_delta(w[slack[x]][x]) / 2);
                }
            for (int u = 1; u <= n; ++u) {
                if (S[st[u]] == 0) {
                    if (lab[u] <= d + kEps) return false;
                    lab[u] -= d;
                } else if (S[st[u]] == 1) {
                    lab[u] += d;
                }
            }
            for (int b = n + 1; b <= n_x; ++b)
                if (st[b] == b) {
                    if (S[b] == 0)
                        lab[b] += d * 2;
                    else if (S[b] == 1)
                        lab[b] -= d * 2;
                }
            q.clear();
            for (int x = 1; x <= n_x; ++x)
                if (st[x] == x && slack[x] && st[slack[x]] != x &&
                    e_delta(w[slack[x]][x]) <= kEps)
                    if (on_found_edge(w[slack[x]][x])) return true;
            for (int b = n + 1; b <= n_x; ++b)
                if (st[b] == b && S[b] == 1 && lab[b] <= kEps) expand_blossom(b);
        }
    }
};

// phi over interned class ids; equals matching_score(...).to_double() exactly
// (IEEE division of the same reduced value).
double phi_interned(const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t inter = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (a[i] > b[j]) {
            ++j;
        } else {
            ++inter;
            ++i;
            ++j;
        }
    }
    return std::max(static_cast<double>(inter + 1) / a.size(),
                    static_cast<double>(inter + 1) / b.size());
}

Matching matching_from_pairs(const PairingGraph& graph,
                             const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    Matching m;
    std::vector<bool> used(graph.nodes.size(), false);
    for (auto [i, j] : pairs) {
        m.pairs.emplace_back(std::min(i, j), std::max(i, j));
        m.total_weight += graph.weights[i][j];
        used[i] = used[j] = true;
    }
    std::sort(m.pairs.begin(), m.pairs.end());
    for (std::size_t i = 0; i < used.size(); ++i)
        if (!used[i]) m.leftovers.push_back(i);
    return m;
}

}  // namespace

Rational::Rational(long long n, long long d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

Rational pairing_score(const std::set<std::string>& support_classes,
                       const std::set<std::string>& query_classes) {
    if (support_classes.empty()) throw EmptyClassSet();
    std::vector<std::string> inter;
    std::set_intersection(support_classes.begin(), support_classes.end(),
                          query_classes.begin(), query_classes.end(),
                          std::back_inserter(inter));
    return Rational(static_cast<long long>(inter.size()) + 1,
                    static_cast<long long>(support_classes.size()));
}

Rational matching_score(const std::set<std::string>& x_classes,
                        const std::set<std::string>& y_classes) {
    return std::max(pairing_score(x_classes, y_classes), pairing_score(y_classes, x_classes));
}

Rational pairing_score(const synth::Instance& support, const synth::Instance& query) {
    return pairing_score(class_set_of(support), class_set_of(query));
}

Rational matching_score(const synth::Instance& x, const synth::Instance& y) {
    return matching_score(class_set_of(x), class_set_of(y));
}

ClassIndex partition_by_class(
    const std::vector<synth::Instance>& corpus,
    const std::function<void(const std::string&, const std::string&)>& on_skip) {
    ClassIndex index;
    for (const auto& inst : corpus) {
        std::set<std::string> classes;
        try {
            classes = class_set_of(inst);
        } catch (const sel::ParseError& e) {
            if (on_skip) on_skip(inst.id, e.what());
            continue;
        }
        if (classes.empty()) {
            if (on_skip) on_skip(inst.id, "empty class set");
            continue;
        }
        for (const auto& cls : classes) index.classes[cls].push_back(inst.id);
    }
    return index;
}

ClassIndex deduplicate(const ClassIndex& index) {
    std::vector<std::string> order;
    for (const auto& [cls, ids] : index.classes) order.push_back(cls);
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        auto sa = index.classes.at(a).size(), sb = index.classes.at(b).size();
        return sa != sb ? sa < sb : a < b;
    });

    ClassIndex out;
    std::size_t total = 0;
    for (const auto& [cls, ids] : index.classes) total += ids.size();
    std::unordered_set<std::string_view> claimed;
    claimed.reserve(total);
    for (const auto& cls : order) {
        auto& kept = out.classes[cls];
        for (const auto& id : index.classes.at(cls))
            if (claimed.insert(id).second) kept.push_back(id);
    }
    return out;
}

Matching max_weight_matching_exact(const PairingGraph& graph) {
    std::size_t n = graph.nodes.size();
    if (n == 0) return {};
    static thread_local WeightedBlossom solver;
    solver.reset(graph.weights);
    const auto& match = solver.solve();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t u = 1; u <= n; ++u)
        if (match[u] && static_cast<std::size_t>(match[u]) > u)
            pairs.emplace_back(u - 1, static_cast<std::size_t>(match[u]) - 1);
    return matching_from_pairs(graph, pairs);
}

Matching max_weight_matching_greedy(const PairingGraph& graph) {
    std::size_t n = graph.nodes.size();
    struct E {
        double w;
        std::size_t i, j;
    };
    std::vector<E> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (graph.weights[i][j] > 0) edges.push_back({graph.weights[i][j], i, j});
    // class-coverage weights take few distinct values, so a bucketed counting
    // sort usually beats the comparison sort; ties stay in (i, j) order either way
    std::map<double, std::size_t, std::greater<>> distinct;
    constexpr std::size_t kMaxBuckets = 256;
    for (const auto& e : edges) {
        distinct.emplace(e.w, 0);
        if (distinct.size() > kMaxBuckets) break;
    }
    if (distinct.size() <= kMaxBuckets) {
        std::size_t rank = 0;
        for (auto& [w, idx] : distinct) idx = rank++;
        std::vector<std::vector<E>> buckets(distinct.size());
        for (const auto& e : edges) buckets[distinct.at(e.w)].push_back(e);
        edges.clear();
        for (const auto& bucket : buckets) edges.insert(edges.end(), bucket.begin(), bucket.end());
    } else {
        std::sort(edges.begin(), edges.end(), [](const E& a, const E& b) {
            if (a.w != b.w) return a.w > b.w;
            return std::tie(a.i, a.j) < std::tie(b.i, b.j);
        });
    }
    std::vector<bool> used(n, false);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& e : edges) {
        if (used[e.i] || used[e.j]) continue;
        used[e.i] = used[e.j] = true;
        pairs.emplace_back(e.i, e.j);
    }
    return matching_from_pairs(graph, pairs);
}

Matching max_weight_matching(const PairingGraph& graph, std::size_t exact_threshold) {
    if (graph.nodes.size() <= exact_threshold) return max_weight_matching_exact(graph);
    return max_weight_matching_greedy(graph);
}

synth::PairedTask assign_roles(const synth::Instance& x, const synth::Instance& y,
                               const std::string& class_name) {
    if (x.id == y.id) return {x, y, class_name};
    auto fx = class_set_of(x), fy = class_set_of(y);
    auto rho_xy = pairing_score(fx, fy);  // x as support
    auto rho_yx = pairing_score(fy, fx);  // y as support
    bool x_supports = rho_yx < rho_xy || (rho_xy == rho_yx && x.id < y.id);
    if (x_supports) return {x, y, class_name};
    return {y, x, class_name};
}

std::string PairingReport::to_json() const {
    nlohmann::ordered_json j;
    j["instances"] = instances;
    j["classes"] = classes;
    j["pairs"] = pairs;
    j["self_pairs"] = self_pairs;
    j["skipped"] = skipped;
    j["read_passes"] = read_passes;
    j["wall_time_ms"] = wall_time_ms;
    j["matcher"] = matcher_per_class;
    return j.dump(2);
}

PairingReport pair_corpus(const std::string& corpus_path, const std::string& output_path,
                          const PairConfig& config) {
    auto t0 = std::chrono::steady_clock::now();
    PairingReport report;

    // Pass 1: ids and class sets only. Class names are interned to ints so the
    // O(m^2) edge-weight computation stays cheap on large classes.
    std::map<std::string, std::set<std::string>> class_sets;
    std::map<std::string, std::vector<int>> class_vecs;
    std::map<std::string, std::uint64_t> class_masks;  // filled when <= 64 classes
    std::map<std::string, int> intern;
    std::vector<std::string> id_order;
    report.read_passes++;
    synth::stream_corpus(
        corpus_path,
        [&](synth::Instance&& inst) {
            try {
                auto classes = class_set_of(inst);
                if (classes.empty()) {
                    report.skipped++;
                    return;
                }
                std::vector<int> ids;
                for (const auto& cls : classes)
                    ids.push_back(
                        intern.emplace(cls, static_cast<int>(intern.size())).first->second);
                std::sort(ids.begin(), ids.end());
                id_order.push_back(inst.id);
                class_vecs.emplace(inst.id, std::move(ids));
                class_sets.emplace(inst.id, std::move(classes));
            } catch (const sel::ParseError&) {
                report.skipped++;
            }
        },
        [&](std::size_t, const std::string&) { report.skipped++; });
    report.instances = class_sets.size();

    if (intern.size() <= 64)
        for (const auto& [id, vec] : class_vecs) {
            std::uint64_t m = 0;
            for (int c : vec) m |= std::uint64_t{1} << c;
            class_masks.emplace(id, m);
        }

    ClassIndex index;
    for (const auto& id : id_order)
        for (const auto& cls : class_sets.at(id)) index.classes[cls].push_back(id);
    index = deduplicate(index);

    struct ClassResult {
        std::string cls;
        std::string matcher;
        std::vector<std::pair<std::string, std::string>> pairs;  // (x id, y id)
        std::vector<std::string> leftovers;
    };

    std::vector<std::string> class_names;
    for (const auto& [cls, ids] : index.classes)
        if (!ids.empty()) class_names.push_back(cls);
    report.classes = class_names.size();

    auto run_class = [&](const std::string& cls) {
        ClassResult result;
        result.cls = cls;
        const auto& ids = index.classes.at(cls);
        std::size_t n = ids.size();

        if (n > config.exact_threshold) {
            // nodes sharing a class set are interchangeable, so weights are
            // computed once per signature pair; the sweep pairs nodes in the
            // same (weight desc, i asc, j asc) order as the generic greedy
            result.matcher = "greedy";
            if (!class_masks.empty()) {
                // phi = (|intersection| + 1) / min(|a|, |b|): popcount form
                std::vector<int> mask_sig_of(n);
                std::vector<std::uint64_t> sig_mask;
                {
                    std::map<std::uint64_t, int> sig_ids;
                    for (std::size_t i = 0; i < n; ++i) {
                        std::uint64_t m = class_masks.at(ids[i]);
                        auto [it, fresh] = sig_ids.try_emplace(m, static_cast<int>(sig_mask.size()));
                        if (fresh) sig_mask.push_back(m);
                        mask_sig_of[i] = it->second;
                    }
                }
                std::size_t n_sigs = sig_mask.size();
                std::vector<int> size_of(n_sigs);
                int max_s = 0;
                for (std::size_t a = 0; a < n_sigs; ++a) {
                    size_of[a] = std::popcount(sig_mask[a]);
                    max_s = std::max(max_s, size_of[a]);
                }
                if (max_s <= 9) {
                    // weight levels (k+1)/s processed in descending order.
                    // Invariant: after a level is done, any two unmatched nodes
                    // have weight <= the next level, so candidate acceptance
                    // reduces to an exact equality check (or none at all when
                    // the level forces |intersection| = 1). Output order is
                    // identical to the generic greedy's.
                    std::uint64_t cls_bit = std::uint64_t{1} << intern.at(cls);
                    std::vector<std::uint64_t> reduced(n_sigs);
                    std::vector<std::vector<int>> bits_of(n_sigs);
                    for (std::size_t a = 0; a < n_sigs; ++a) {
                        reduced[a] = sig_mask[a] & ~cls_bit;
                        for (std::uint64_t m = reduced[a]; m; m &= m - 1)
                            bits_of[a].push_back(std::countr_zero(m));
                    }
                    // nonempty reduced subset -> sigs containing it
                    std::unordered_map<std::uint64_t, std::vector<int>> subset_index;
                    for (std::size_t a = 0; a < n_sigs; ++a)
                        for (std::uint64_t t = reduced[a]; t; t = (t - 1) & reduced[a])
                            subset_index[t].push_back(static_cast<int>(a));
                    std::vector<std::vector<std::size_t>> members(n_sigs), by_size(max_s + 1);
                    for (std::size_t i = 0; i < n; ++i) {
                        members[mask_sig_of[i]].push_back(i);
                        by_size[size_of[mask_sig_of[i]]].push_back(i);
                    }
                    // distinct (k, s) pairs can share a weight value
                    std::map<double, std::vector<std::pair<int, int>>, std::greater<>> levels;
                    for (int s = 1; s <= max_s; ++s) {
                        if (by_size[s].empty()) continue;
                        for (int k = 1; k <= s; ++k) levels[(k + 1.0) / s].push_back({k, s});
                    }
                    std::vector<bool> used(n, false);
                    std::vector<int> stamp(n_sigs, -1);
                    int cur = 0;
                    constexpr std::size_t npos = static_cast<std::size_t>(-1);
                    for (const auto& [w, combos] : levels) {
                        int k0 = combos.front().first, s0 = combos.front().second;
                        for (std::size_t i = 0; i < n; ++i) {
                            if (used[i]) continue;
                            int a = mask_sig_of[i], si = size_of[a];
                            std::size_t best = npos;
                            auto scan = [&](const std::vector<std::size_t>& lst) {
                                auto it = std::upper_bound(lst.begin(), lst.end(), i);
                                while (it != lst.end() && used[*it]) ++it;
                                if (it != lst.end() && *it < best) best = *it;
                            };
                            ++cur;
                            auto scan_sig = [&](int b) {
                                if (stamp[b] == cur) return;
                                stamp[b] = cur;
                                int m = std::min(si, size_of[b]);
                                int inter = std::popcount(sig_mask[a] & sig_mask[b]);
                                if ((inter + 1) * s0 != (k0 + 1) * m) return;
                                scan(members[b]);
                            };
                            for (auto [k, s] : combos) {
                                if (si < s) continue;
                                if (k == 1) {
                                    // both sides contain the class, so the
                                    // intersection is exactly 1 here
                                    if (si == s)
                                        for (int t = s; t <= max_s; ++t) scan(by_size[t]);
                                    else
                                        scan(by_size[s]);
                                    continue;
                                }
                                // |intersection| = k: partners share a
                                // (k-1)-subset outside the class bit
                                const auto& bits = bits_of[a];
                                int nb = static_cast<int>(bits.size()), want = k - 1;
                                if (want > nb) continue;
                                for (std::uint64_t comb = (std::uint64_t{1} << want) - 1;
                                     comb < (std::uint64_t{1} << nb);) {
                                    std::uint64_t t = 0;
                                    for (std::uint64_t m = comb; m; m &= m - 1)
                                        t |= std::uint64_t{1} << bits[std::countr_zero(m)];
                                    if (auto it = subset_index.find(t); it != subset_index.end())
                                        for (int b : it->second) scan_sig(b);
                                    std::uint64_t c = comb & (~comb + 1), r = comb + c;
                                    comb = (((r ^ comb) >> 2) / c) | r;
                                }
                            }
                            if (best == npos) continue;
                            used[i] = used[best] = true;
                            result.pairs.emplace_back(ids[i], ids[best]);
                        }
                        auto compact = [&](std::vector<std::size_t>& lst) {
                            lst.erase(std::remove_if(lst.begin(), lst.end(),
                                                     [&](std::size_t x) { return used[x]; }),
                                      lst.end());
                        };
                        for (auto& mem : members) compact(mem);
                        for (auto& lst : by_size) compact(lst);
                    }
                    for (std::size_t i = 0; i < n; ++i)
                        if (!used[i]) result.leftovers.push_back(ids[i]);
                    return result;
                }
            }
            std::vector<int> sig_of(n);
            std::size_t n_sigs = 0;
            std::map<double, std::vector<std::pair<int, int>>, std::greater<>> buckets;
            {
                std::map<std::vector<int>, int> sig_ids;
                std::vector<const std::vector<int>*> sig_vec;
                for (std::size_t i = 0; i < n; ++i) {
                    auto [it, fresh] = sig_ids.try_emplace(class_vecs.at(ids[i]),
                                                           static_cast<int>(sig_vec.size()));
                    if (fresh) sig_vec.push_back(&it->first);
                    sig_of[i] = it->second;
                }
                n_sigs = sig_vec.size();
                for (std::size_t a = 0; a < n_sigs; ++a)
                    for (std::size_t b = a; b < n_sigs; ++b)
                        buckets[phi_interned(*sig_vec[a], *sig_vec[b])].push_back(
                            {static_cast<int>(a), static_cast<int>(b)});
            }
            std::vector<std::vector<std::size_t>> members(n_sigs);
            for (std::size_t i = 0; i < n; ++i) members[sig_of[i]].push_back(i);
            std::vector<bool> used(n, false);
            constexpr std::size_t npos = static_cast<std::size_t>(-1);
            for (const auto& [w, sig_pairs] : buckets) {
                std::vector<std::vector<int>> partners(n_sigs);
                for (auto [a, b] : sig_pairs) {
                    partners[a].push_back(b);
                    if (a != b) partners[b].push_back(a);
                }
                for (std::size_t i = 0; i < n; ++i) {
                    if (used[i]) continue;
                    std::size_t best = npos;
                    for (int p : partners[sig_of[i]]) {
                        const auto& mem = members[p];
                        auto it = std::upper_bound(mem.begin(), mem.end(), i);
                        while (it != mem.end() && used[*it]) ++it;
                        if (it != mem.end() && *it < best) best = *it;
                    }
                    if (best == npos) continue;
                    used[i] = used[best] = true;
                    result.pairs.emplace_back(ids[i], ids[best]);
                }
                for (auto& mem : members)
                    mem.erase(std::remove_if(mem.begin(), mem.end(),
                                             [&](std::size_t i) { return used[i]; }),
                              mem.end());
            }
            for (std::size_t i = 0; i < n; ++i)
                if (!used[i]) result.leftovers.push_back(ids[i]);
            return result;
        }

        result.matcher = "exact";
        PairingGraph graph;
        graph.nodes = ids;
        graph.weights.assign(n, std::vector<double>(n, 0));
        if (!class_masks.empty()) {
            std::vector<std::uint64_t> mask(n);
            std::vector<int> sz(n);
            for (std::size_t i = 0; i < n; ++i) {
                mask[i] = class_masks.at(ids[i]);
                sz[i] = std::popcount(mask[i]);
            }
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    int inter = std::popcount(mask[i] & mask[j]);
                    double w = (inter + 1.0) / std::min(sz[i], sz[j]);
                    graph.weights[i][j] = graph.weights[j][i] = w;
                }
        } else {
            std::vector<const std::vector<int>*> vecs(n);
            for (std::size_t i = 0; i < n; ++i) vecs[i] = &class_vecs.at(ids[i]);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    double w = phi_interned(*vecs[i], *vecs[j]);
                    graph.weights[i][j] = graph.weights[j][i] = w;
                }
        }
        auto matching = max_weight_matching_exact(graph);
        for (auto [i, j] : matching.pairs) result.pairs.emplace_back(ids[i], ids[j]);
        for (auto i : matching.leftovers) result.leftovers.push_back(ids[i]);
        return result;
    };

    std::vector<ClassResult> results(class_names.size());
    unsigned threads = std::max(1u, config.threads);
    if (threads == 1 || class_names.size() <= 1) {
        for (std::size_t i = 0; i < class_names.size(); ++i) results[i] = run_class(class_names[i]);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::future<void>> workers;
        for (unsigned t = 0; t < threads; ++t)
            workers.push_back(std::async(std::launch::async, [&] {
                for (std::size_t i; (i = next.fetch_add(1)) < class_names.size();)
                    results[i] = run_class(class_names[i]);
            }));
        for (auto& f : workers) f.get();
    }

    // Pass 2: re-read full instances and write tasks.
    report.read_passes++;
    std::map<std::string, synth::Instance> by_id;
    synth::stream_corpus(
        corpus_path,
        [&](synth::Instance&& inst) {
            if (class_sets.contains(inst.id)) by_id.emplace(inst.id, std::move(inst));
        },
        {});

    std::ofstream out(output_path, std::ios::binary);
    if (!out) throw synth::IoFailure("cannot open for writing: " + output_path);
    for (const auto& result : results) {
        for (const auto& [a, b] : result.pairs) {
            // same orientation as assign_roles: rho in both directions shares a
            // numerator, so only the class-set sizes need comparing
            std::size_t fa = class_vecs.at(a).size(), fb = class_vecs.at(b).size();
            bool a_supports = fa < fb || (fa == fb && a < b);
            const auto& s = a_supports ? a : b;
            const auto& q = a_supports ? b : a;
            out << synth::paired_task_json_line(by_id.at(s), by_id.at(q), result.cls) << '\n';
            report.pairs++;
        }
        for (const auto& id : result.leftovers) {
            const auto& inst = by_id.at(id);
            out << synth::paired_task_json_line(inst, inst, result.cls) << '\n';
            report.self_pairs++;
        }
        report.matcher_per_class[result.cls] = result.matcher;
    }

    report.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace urtf::pairing
