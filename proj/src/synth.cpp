#include "urtf/synth.hpp"

#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

namespace urtf::synth {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> make_names(const std::string& stem, std::size_t n,
                                    const std::string& prefix) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%s%02zu", prefix.c_str(), stem.c_str(), i);
        out.emplace_back(buf);
    }
    return out;
}

// 1/(rank+1) skew over pool indices
std::size_t skewed_index(std::size_t pool_size, std::mt19937_64& rng) {
    std::vector<double> weights(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) weights[i] = 1.0 / static_cast<double>(i + 1);
    std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
    return dist(rng);
}

std::string pick_template(const TaskDistribution& dist, const std::string& cls,
                          std::mt19937_64& rng) {
    const auto& templates = dist.rules.at(cls);
    std::uniform_int_distribution<std::size_t> pick(0, templates.size() - 1);
    return templates[pick(rng)];
}

}  // namespace

TaskDistribution gen_distribution(const DistConfig& config, std::uint64_t seed) {
    if (config.n_spots == 0 || config.n_assos == 0 || config.vocab_size == 0)
        throw std::invalid_argument("distribution pool sizes must be >= 1");

    TaskDistribution dist;
    dist.seed = seed;
    dist.spot_pool = make_names("Spot", config.n_spots, config.name_prefix);
    dist.asso_pool = make_names("Asso", config.n_assos, config.name_prefix);
    for (std::size_t i = 0; i < config.vocab_size; ++i)
        dist.vocab.push_back(config.name_prefix + "w" + std::to_string(i));

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> n_templates(2, 3), n_words(1, 2);
    std::uniform_int_distribution<std::size_t> word(0, dist.vocab.size() - 1);
    auto fill_rules = [&](const std::vector<std::string>& pool) {
        for (const auto& cls : pool) {
            auto& templates = dist.rules[cls];
            std::size_t k = n_templates(rng);
            for (std::size_t t = 0; t < k; ++t) {
                std::string span;
                std::size_t m = n_words(rng);
                for (std::size_t j = 0; j < m; ++j) {
                    if (j) span += ' ';
                    span += dist.vocab[word(rng)];
                }
                templates.push_back(span);
            }
        }
    };
    fill_rules(dist.spot_pool);
    fill_rules(dist.asso_pool);
    return dist;
}

Instance gen_instance(const TaskDistribution& dist, std::size_t n_spots, std::size_t n_assos,
                      std::uint64_t seed) {
    std::seed_seq seq{dist.seed, seed};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> filler(0, dist.vocab.size() - 1);

    sel::SelRecord record;
    std::vector<std::string> text_tokens;
    for (std::size_t i = 0; i < n_spots; ++i) {
        const auto& cls = dist.spot_pool[skewed_index(dist.spot_pool.size(), rng)];
        sel::SpotGroup group{cls, pick_template(dist, cls, rng), {}};
        text_tokens.push_back(dist.vocab[filler(rng)]);
        text_tokens.push_back(group.info_span);
        record.groups.push_back(std::move(group));
    }
    if (!record.groups.empty()) {
        std::uniform_int_distribution<std::size_t> spot_at(0, record.groups.size() - 1);
        for (std::size_t i = 0; i < n_assos; ++i) {
            const auto& cls = dist.asso_pool[skewed_index(dist.asso_pool.size(), rng)];
            std::string span;
            if (record.groups.size() >= 2) {
                // point at another spot group's span, as a relation tail would
                std::size_t host = spot_at(rng), other = spot_at(rng);
                while (other == host && record.groups.size() > 1) other = spot_at(rng);
                span = record.groups[other].info_span;
                record.groups[host].assos.push_back({cls, span});
                continue;
            }
            span = pick_template(dist, cls, rng);
            text_tokens.push_back(span);
            record.groups[spot_at(rng)].assos.push_back({cls, span});
        }
    }

    Instance inst;
    inst.id = "i" + std::to_string(seed);
    for (std::size_t i = 0; i < text_tokens.size(); ++i) {
        if (i) inst.text += ' ';
        inst.text += text_tokens[i];
    }
    for (const auto& g : record.groups) {
        inst.schema.spots.insert(g.spot_name);
        for (const auto& a : g.assos) inst.schema.assos.insert(a.asso_name);
    }
    inst.sel = sel::linearize_sel(record);
    return inst;
}

std::vector<Instance> gen_corpus(const TaskDistribution& dist, std::size_t n,
                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_int_distribution<std::size_t> spots(1, 4), assos(0, 2);
    std::vector<Instance> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto inst = gen_instance(dist, spots(rng), assos(rng), seed * 1000003ull + i);
        inst.id = "i" + std::to_string(i);
        out.push_back(std::move(inst));
    }
    return out;
}

namespace {

// True when dump() would emit the string verbatim (no escapes, ASCII only),
// so serialization can skip the JSON library without changing the bytes.
bool plain_json_string(const std::string& s) {
    for (unsigned char c : s)
        if (c < 0x20 || c >= 0x80 || c == '"' || c == '\\') return false;
    return true;
}

}  // namespace

std::string to_json_line(const Instance& instance) {
    bool plain = plain_json_string(instance.id) && plain_json_string(instance.text) &&
                 plain_json_string(instance.sel);
    for (const auto& s : instance.schema.spots) plain = plain && plain_json_string(s);
    for (const auto& a : instance.schema.assos) plain = plain && plain_json_string(a);
    if (plain) {
        std::string out = "{\"id\":\"" + instance.id + "\",\"text\":\"" + instance.text +
                          "\",\"spots\":[";
        bool first = true;
        for (const auto& s : instance.schema.spots) {
            if (!first) out += ',';
            out += '"' + s + '"';
            first = false;
        }
        out += "],\"assos\":[";
        first = true;
        for (const auto& a : instance.schema.assos) {
            if (!first) out += ',';
            out += '"' + a + '"';
            first = false;
        }
        out += "],\"sel\":\"" + instance.sel + "\"}";
        return out;
    }
    ordered_json j;
    j["id"] = instance.id;
    j["text"] = instance.text;
    j["spots"] = instance.schema.spots;
    j["assos"] = instance.schema.assos;
    j["sel"] = instance.sel;
    return j.dump();
}

namespace {

// Strict scanner for the exact byte layout the fast serializer emits.
// Returns false on any deviation (escapes, whitespace, reordered keys) so
// the caller can fall back to the JSON library.
struct FastScan {
    const std::string& s;
    std::size_t pos = 0;

    bool lit(const char* t) {
        std::size_t n = std::strlen(t);
        if (s.compare(pos, n, t) != 0) return false;
        pos += n;
        return true;
    }
    bool quoted(std::string& out) {
        if (pos >= s.size() || s[pos] != '"') return false;
        std::size_t start = ++pos;
        while (pos < s.size()) {
            unsigned char c = s[pos];
            if (c == '"') {
                out.assign(s, start, pos - start);
                ++pos;
                return true;
            }
            if (c == '\\' || c < 0x20 || c >= 0x80) return false;
            ++pos;
        }
        return false;
    }
    bool string_array(std::set<std::string>& out) {
        if (!lit("[")) return false;
        if (lit("]")) return true;
        for (;;) {
            std::string item;
            if (!quoted(item)) return false;
            out.insert(std::move(item));
            if (lit("]")) return true;
            if (!lit(",")) return false;
        }
    }
};

bool parse_instance_fast(const std::string& line, Instance& inst) {
    FastScan in{line};
    return in.lit("{\"id\":") && in.quoted(inst.id) && in.lit(",\"text\":") &&
           in.quoted(inst.text) && in.lit(",\"spots\":") && in.string_array(inst.schema.spots) &&
           in.lit(",\"assos\":") && in.string_array(inst.schema.assos) && in.lit(",\"sel\":") &&
           in.quoted(inst.sel) && in.lit("}") && in.pos == line.size();
}

}  // namespace

Instance instance_from_json_line(const std::string& line, std::size_t line_number) {
    {
        Instance inst;
        if (parse_instance_fast(line, inst)) return inst;
    }
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw LineParseFailure(line_number, "not a JSON object");
    for (const char* key : {"id", "text", "spots", "assos", "sel"})
        if (!j.contains(key)) throw LineParseFailure(line_number, std::string("missing field ") + key);
    Instance inst;
    try {
        inst.id = j["id"].get<std::string>();
        inst.text = j["text"].get<std::string>();
        for (const auto& s : j["spots"]) inst.schema.spots.insert(s.get<std::string>());
        for (const auto& a : j["assos"]) inst.schema.assos.insert(a.get<std::string>());
        inst.sel = j["sel"].get<std::string>();
    } catch (const ordered_json::exception& e) {
        throw LineParseFailure(line_number, e.what());
    }
    return inst;
}

std::string paired_task_json_line(const Instance& support, const Instance& query,
                                  const std::string& class_name) {
    if (plain_json_string(class_name))
        return "{\"support\":" + to_json_line(support) + ",\"query\":" + to_json_line(query) +
               ",\"class\":\"" + class_name + "\"}";
    ordered_json j;
    j["support"] = ordered_json::parse(to_json_line(support));
    j["query"] = ordered_json::parse(to_json_line(query));
    j["class"] = class_name;
    return j.dump();
}

std::string to_json_line(const PairedTask& task) {
    return paired_task_json_line(task.support, task.query, task.class_name);
}

PairedTask paired_task_from_json_line(const std::string& line, std::size_t line_number) {
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("support") || !j.contains("query") ||
        !j.contains("class"))
        throw LineParseFailure(line_number, "not a paired-task object");
    PairedTask task;
    task.support = instance_from_json_line(j["support"].dump(), line_number);
    task.query = instance_from_json_line(j["query"].dump(), line_number);
    task.class_name = j["class"].get<std::string>();
    return task;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open for reading: " + path);
    return in;
}

}  // namespace

void write_corpus(const std::vector<Instance>& instances, const std::string& path) {
    auto out = open_out(path);
    for (const auto& inst : instances) out << to_json_line(inst) << '\n';
}

std::size_t stream_corpus(const std::string& path,
                          const std::function<void(Instance&&)>& on_instance,
                          const std::function<void(std::size_t, const std::string&)>& on_error) {
    auto in = open_in(path);
    std::string line;
    std::size_t line_number = 0, parsed = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        try {
            on_instance(instance_from_json_line(line, line_number));
            ++parsed;
        } catch (const LineParseFailure& e) {
            if (on_error) on_error(line_number, e.what());
        }
    }
    return parsed;
}

std::vector<Instance> read_corpus(const std::string& path) {
    std::vector<Instance> out;
    auto in = open_in(path);
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        out.push_back(instance_from_json_line(line, line_number));
    }
    return out;
}

void write_paired_tasks(const std::vector<PairedTask>& tasks, const std::string& path) {
    auto out = open_out(path);
    for (const auto& task : tasks) out << to_json_line(task) << '\n';
}

std::vector<PairedTask> read_paired_tasks(const std::string& path) {
    std::vector<PairedTask> out;
    auto in = open_in(path);
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        out.push_back(paired_task_from_json_line(line, line_number));
    }
    return out;
}

}  // namespace urtf::synth
