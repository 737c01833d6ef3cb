#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "urtf/metatrain.hpp"
#include "urtf/metrics.hpp"
#include "urtf/pairing.hpp"
#include "urtf/prompting.hpp"
#include "urtf/sel.hpp"
#include "urtf/synth.hpp"

using nlohmann::json;
using namespace urtf;

namespace {

constexpr int kOk = 0, kCheckFailed = 1, kUsage = 2;

std::uint64_t effective_seed(std::uint64_t flag_seed) {
    if (const char* env = std::getenv("URTF_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw std::invalid_argument("URTF_SEED is not an unsigned integer: " +
                                        std::string(env));
        }
    }
    return flag_seed;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw synth::IoFailure("cannot open: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::map<std::string, std::string> read_flat_config(const std::string& path) {
    std::map<std::string, std::string> kv;
    for (const auto& raw : read_lines(path)) {
        std::string line = raw.substr(0, raw.find('#'));
        if (blank(line)) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line without '=': " + raw);
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

void apply_flat_config(meta::MetaConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "alpha") cfg.alpha = std::stod(value);
        else if (key == "beta") cfg.beta = std::stod(value);
        else if (key == "inner_steps") cfg.inner_steps = std::stoi(value);
        else if (key == "mode") cfg.mode = meta::mode_from_string(value);
        else if (key == "w_retrv") cfg.w_retrv = std::stod(value);
        else if (key == "w_ext") cfg.w_ext = std::stod(value);
        else if (key == "w_lm") cfg.w_lm = std::stod(value);
        else if (key == "w_record") cfg.w_record = std::stod(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "batch") cfg.batch = std::stoi(value);
        else if (key == "epochs") cfg.epochs = std::stoi(value);
        else if (key == "max_steps") cfg.max_steps = std::stoi(value);
        else if (key == "embed_dim") cfg.embed_dim = std::stoi(value);
        else if (key == "n_spot_negatives") cfg.n_spot_negatives = std::stoull(value);
        else if (key == "n_asso_negatives") cfg.n_asso_negatives = std::stoull(value);
        else if (key == "corruption_rate") cfg.corruption_rate = std::stod(value);
        else if (key == "corruption_mean_span") cfg.corruption_mean_span = std::stod(value);
        else if (key == "resample_negatives_per_epoch")
            cfg.resample_negatives_per_epoch = (value == "true" || value == "1");
        else throw std::invalid_argument("unknown config key: " + key);
    }
}

// ---------------------------------------------------------------- sel

int run_sel_parse(const std::string& path) {
    int failures = 0;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (blank(line)) continue;
        try {
            std::cout << sel::linearize_sel(sel::parse_sel(line)) << "\n";
        } catch (const sel::ParseError& e) {
            std::cerr << path << ":" << lineno << ": " << e.what() << "\n";
            ++failures;
        }
    }
    return failures == 0 ? kOk : kCheckFailed;
}

int run_sel_lint(const std::string& path, const std::vector<std::string>& spots,
                 const std::vector<std::string>& assos) {
    sel::Schema schema{{spots.begin(), spots.end()}, {assos.begin(), assos.end()}};
    bool use_schema = !schema.spots.empty() || !schema.assos.empty();
    int failures = 0;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (blank(line)) continue;
        try {
            auto record = sel::parse_sel(line);
            for (const auto& g : record.groups) {
                if (!sel::is_valid_name(g.spot_name)) throw sel::InvalidName(g.spot_name);
                for (const auto& a : g.assos)
                    if (!sel::is_valid_name(a.asso_name)) throw sel::InvalidName(a.asso_name);
            }
            if (use_schema)
                for (const auto& v : sel::validate_record(record, schema)) {
                    std::cerr << path << ":" << lineno << ": unknown "
                              << (v.kind == sel::Violation::Kind::UnknownSpot ? "spot" : "asso")
                              << " name '" << v.name << "'\n";
                    ++failures;
                }
        } catch (const std::exception& e) {
            std::cerr << path << ":" << lineno << ": " << e.what() << "\n";
            ++failures;
        }
    }
    return failures == 0 ? kOk : kCheckFailed;
}

int run_sel_roundtrip(const std::string& path) {
    int failures = 0;
    std::size_t lineno = 0, checked = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (blank(line)) continue;
        try {
            auto record = sel::parse_sel(line);
            auto canonical = sel::linearize_sel(record);
            if (sel::parse_sel(canonical) != record)
                throw std::runtime_error("round trip mismatch");
            ++checked;
        } catch (const std::exception& e) {
            std::cerr << path << ":" << lineno << ": " << e.what() << "\n";
            ++failures;
        }
    }
    std::cerr << checked << " records round-tripped, " << failures << " failed\n";
    return failures == 0 ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------- pair / bench

// Timing baseline only: classic episodic sampling constructs the same task
// list the pairing pipeline produced, drawing the support and the query of
// each task independently; every draw seeks to a random offset in the corpus
// file and scans forward (wrapping once) until it hits an instance of the
// task's class, fully parsing every line touched. Lines are decoded with the
// general JSON parser, the way a stock data loader would read them.
double simulate_episodic_ms(const std::string& corpus_path,
                            const std::vector<std::string>& task_classes, std::uint64_t seed) {
    if (task_classes.empty()) return 0;

    std::ifstream probe(corpus_path, std::ios::binary | std::ios::ate);
    const auto file_size = static_cast<std::uint64_t>(probe.tellg());
    probe.close();

    std::mt19937_64 rng(seed);
    auto start = std::chrono::steady_clock::now();
    for (const auto& cls : task_classes) {
        for (int draw = 0; draw < 2; ++draw) {
            std::ifstream in(corpus_path, std::ios::binary);
            in.seekg(static_cast<std::streamoff>(rng() % file_size));
            std::string line;
            std::getline(in, line);  // sync to the next line boundary
            bool found = false, wrapped = false;
            std::size_t line_counter = 0;
            while (!found) {
                if (!std::getline(in, line)) {
                    if (wrapped) break;
                    wrapped = true;
                    in.clear();
                    in.seekg(0);
                    continue;
                }
                ++line_counter;
                try {
                    auto j = json::parse(line);
                    synth::Instance inst;
                    inst.id = j.at("id").get<std::string>();
                    inst.text = j.at("text").get<std::string>();
                    for (const auto& s : j.at("spots")) inst.schema.spots.insert(s.get<std::string>());
                    for (const auto& a : j.at("assos")) inst.schema.assos.insert(a.get<std::string>());
                    inst.sel = j.at("sel").get<std::string>();
                    auto cs = sel::extract_class_set(sel::parse_sel(inst.sel));
                    if (cs.count(cls)) found = true;
                } catch (const std::exception&) {}
            }
        }
    }
    auto end = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(end - start).count();
}

int run_bench_pair(std::size_t n, std::uint64_t seed, std::size_t episodic_tasks,
                   unsigned threads) {
    std::string corpus_path = "/tmp/urtf_bench_corpus.jsonl";
    std::string tasks_path = "/tmp/urtf_bench_tasks.jsonl";
    auto dist = synth::gen_distribution({}, seed);
    synth::write_corpus(synth::gen_corpus(dist, n, seed), corpus_path);

    pairing::PairConfig cfg;
    cfg.threads = threads;
    auto report = pairing::pair_corpus(corpus_path, tasks_path, cfg);
    // the baseline builds the same tasks pairing produced; cycle or trim the
    // class list when an explicit task count is requested
    std::vector<std::string> task_classes;
    for (const auto& task : synth::read_paired_tasks(tasks_path))
        task_classes.push_back(task.class_name);
    if (episodic_tasks != 0 && !task_classes.empty()) {
        std::vector<std::string> cycled;
        cycled.reserve(episodic_tasks);
        for (std::size_t t = 0; t < episodic_tasks; ++t)
            cycled.push_back(task_classes[t % task_classes.size()]);
        task_classes = std::move(cycled);
    }
    episodic_tasks = task_classes.size();
    double episodic_ms = simulate_episodic_ms(corpus_path, task_classes, seed);

    json out{{"n", n},
             {"pairing_ms", report.wall_time_ms},
             {"episodic_ms", episodic_ms},
             {"episodic_tasks", episodic_tasks},
             {"pairs", report.pairs},
             {"read_passes", report.read_passes}};
    std::cout << out.dump() << "\n";
    std::remove(corpus_path.c_str());
    std::remove(tasks_path.c_str());
    return kOk;
}

// ---------------------------------------------------------------- meta

std::pair<meta::Vocab, std::vector<synth::PairedTask>> load_tasks_and_vocab(
    const std::string& path) {
    auto tasks = synth::read_paired_tasks(path);
    return {meta::Vocab::build(meta::collect_corpus_tokens(tasks)), std::move(tasks)};
}

int run_meta_train(const std::string& tasks_path, const std::string& out_path,
                   const meta::MetaConfig& cfg, const std::string& log_path) {
    auto [vocab, tasks] = load_tasks_and_vocab(tasks_path);
    if (tasks.empty()) {
        std::cerr << "no tasks in " << tasks_path << "\n";
        return kCheckFailed;
    }
    auto result = meta::meta_pretrain(tasks, vocab, cfg);
    meta::save_checkpoint(result.params, vocab, out_path);

    if (!log_path.empty()) {
        std::ofstream log(log_path);
        for (const auto& e : result.log)
            log << json{{"step", e.step},
                        {"retrv", e.losses.retrv},
                        {"ext", e.losses.ext},
                        {"lm", e.losses.lm},
                        {"record", e.losses.record},
                        {"total", e.losses.total()}}
                       .dump()
                << "\n";
    }
    json out{{"tasks", tasks.size()},
             {"steps", result.log.size()},
             {"mode", meta::to_string(cfg.mode)},
             {"final_total_loss", result.log.empty() ? 0.0 : result.log.back().losses.total()},
             {"checkpoint", out_path}};
    std::cout << out.dump() << "\n";
    return kOk;
}

int run_meta_eval(const std::string& ckpt_path, const std::string& tasks_path, int steps,
                  const meta::MetaConfig& cfg) {
    auto [params, vocab] = meta::load_checkpoint(ckpt_path);
    auto tasks = synth::read_paired_tasks(tasks_path);
    if (tasks.empty()) {
        std::cerr << "no tasks in " << tasks_path << "\n";
        return kCheckFailed;
    }
    auto pool = meta::class_pool_of_tasks(tasks);
    auto curve = meta::evaluate_fast_adaptation(params, vocab, tasks, pool, steps, cfg);
    json out{{"tasks", tasks.size()},
             {"steps", steps},
             {"mean_query_loss", curve.mean_query_loss},
             {"monotone_indices", curve.monotone_indices}};
    std::cout << out.dump() << "\n";
    return kOk;
}

// ---------------------------------------------------------------- score

int run_score(const std::string& gold_path, const std::string& pred_path,
              const std::string& task_name, bool group_by_entities,
              const std::vector<std::size_t>& bucket_edges) {
    auto kind = metrics::task_kind_from_string(task_name);
    auto gold = synth::read_corpus(gold_path);
    auto pred = synth::read_corpus(pred_path);
    std::map<std::string, const synth::Instance*> by_id;
    for (const auto& p : pred) by_id[p.id] = &p;

    std::vector<metrics::ScoredInstance> dataset;
    for (const auto& g : gold) {
        metrics::ScoredInstance s;
        s.text = g.text;
        s.gold = sel::parse_sel(g.sel);
        auto it = by_id.find(g.id);
        if (it != by_id.end()) {
            try {
                s.pred = sel::parse_sel(it->second->sel);
            } catch (const sel::ParseError&) {
                s.pred = {};  // malformed prediction scores as empty
            }
        }
        dataset.push_back(std::move(s));
    }

    char buf[64];
    auto line = [&](const std::string& prefix, const metrics::PrfScore& s) {
        std::snprintf(buf, sizeof buf, "%sprecision = %.4f recall = %.4f f1 = %.4f",
                      prefix.c_str(), s.precision, s.recall, s.f1);
        std::cout << buf << "\n";
    };
    if (group_by_entities) {
        for (const auto& [bucket, score] : metrics::score_grouped(dataset, kind, bucket_edges))
            line(bucket + ": ", score);
    } else {
        line("", metrics::score_dataset(dataset, kind));
    }
    return kOk;
}

// ---------------------------------------------------------------- gradcheck

int run_gradcheck() {
    std::mt19937_64 rng(12345);
    auto random_tensor = [&](std::vector<int> shape) {
        ad::Tensor t = ad::Tensor::zeros(std::move(shape));
        std::normal_distribution<double> dist(0.0, 1.0);
        for (auto& v : t.data) v = dist(rng);
        return t;
    };

    using Build = std::function<ad::NodeId(ad::Tape&, const std::vector<ad::NodeId>&)>;
    struct Case {
        const char* name;
        std::vector<std::vector<int>> shapes;
        Build build;
    };
    std::vector<Case> cases{
        {"add_sub_mul", {{4}, {4}},
         [](ad::Tape& t, const std::vector<ad::NodeId>& p) {
             return t.sum(t.mul(t.add(p[0], p[1]), t.sub(p[0], p[1])));
         }},
        {"matmul_transpose", {{2, 3}, {2, 3}},
         [](ad::Tape& t, const std::vector<ad::NodeId>& p) {
             auto m = t.matmul(p[0], t.transpose(p[1]));
             return t.sum(t.mul(m, m));
         }},
        {"log_softmax_ce", {{6}},
         [](ad::Tape& t, const std::vector<ad::NodeId>& p) {
             return t.add(t.cross_entropy(p[0], 2), t.mean(t.exp(t.log_softmax(p[0]))));
         }},
        {"gather_concat_slice", {{5, 3}, {4}},
         [](ad::Tape& t, const std::vector<ad::NodeId>& p) {
             auto g = t.gather_rows(p[0], {0, 2, 2});
             auto c = t.concat(g, p[1]);
             auto s = t.slice(c, 2, 8);
             return t.sum(t.mul(s, s));
         }},
        {"small_model_outer_loss", {{5, 2}, {4, 5}, {5}},
         [](ad::Tape& t, const std::vector<ad::NodeId>& p) {
             // 10 + 20 + 5 = 35 parameters; one inner step then a query loss
             auto emb = t.gather_rows(p[0], {1, 3});
             auto h = t.reshape(t.concat(t.slice(t.reshape(emb, {4}), 0, 2),
                                         t.slice(t.reshape(emb, {4}), 2, 2)),
                                {1, 4});
             auto logits = t.add(t.matmul(h, p[1]), t.reshape(p[2], {1, 5}));
             auto inner = t.cross_entropy(logits, 3);
             auto grads = t.grad(inner, {p[1]});
             auto adapted = t.sub(p[1], t.scale(grads[0], 0.1));
             auto out_logits = t.add(t.matmul(h, adapted), t.reshape(p[2], {1, 5}));
             return t.cross_entropy(out_logits, 1);
         }},
    };

    double worst = 0;
    for (const auto& c : cases) {
        std::vector<ad::Tensor> params;
        for (const auto& s : c.shapes) params.push_back(random_tensor(s));
        ad::Tape tape;
        std::vector<ad::NodeId> ids;
        for (const auto& p : params) ids.push_back(tape.input(p));
        auto grads = tape.grad(c.build(tape, ids), ids);
        std::vector<ad::Tensor> analytic;
        for (auto g : grads) analytic.push_back(tape.value(g));
        auto f = [&](const std::vector<ad::Tensor>& xs) {
            ad::Tape t2;
            std::vector<ad::NodeId> id2;
            for (const auto& x : xs) id2.push_back(t2.input(x));
            return t2.value(c.build(t2, id2)).data[0];
        };
        double err = ad::finite_diff_check(f, params, analytic, 1e-5);
        std::cerr << c.name << ": max relative error " << err << "\n";
        worst = std::max(worst, err);
    }

    // closed form: inner L = ||theta - a||^2, outer L = ||theta_1 - b||^2
    double quad_err = 0;
    {
        const double alpha = 0.07;
        auto theta0 = random_tensor({5}), a_t = random_tensor({5}), b_t = random_tensor({5});
        ad::Tape tape;
        auto theta = tape.input(theta0);
        auto diff_in = tape.sub(theta, tape.input(a_t));
        auto g_in = tape.grad(tape.sum(tape.mul(diff_in, diff_in)), {theta})[0];
        auto theta1 = tape.sub(theta, tape.scale(g_in, alpha));
        auto diff_out = tape.sub(theta1, tape.input(b_t));
        auto g_out = tape.grad(tape.sum(tape.mul(diff_out, diff_out)), {theta})[0];
        for (int i = 0; i < 5; ++i) {
            double t1 = (1 - 2 * alpha) * theta0.data[i] + 2 * alpha * a_t.data[i];
            double want = (1 - 2 * alpha) * 2 * (t1 - b_t.data[i]);
            quad_err = std::max(quad_err, std::abs(tape.value(g_out).data[i] - want));
        }
        std::cerr << "quadratic_bilevel: max absolute error " << quad_err << "\n";
    }

    json out{{"max_relative_error", worst}, {"quadratic_bilevel_error", quad_err}};
    std::cout << out.dump() << "\n";
    return (worst < 1e-3 && quad_err < 1e-8) ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"universal retrieve-then-extract toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    std::string config_path;
    app.add_option("--seed", seed, "global random seed (URTF_SEED overrides)");
    app.add_option("--threads", threads, "worker thread count");
    app.add_option("--config", config_path, "flat key = value config file");

    // sel
    auto* cmd_sel = app.add_subcommand("sel", "parse, lint or round-trip SEL files");
    cmd_sel->require_subcommand(1);
    std::string sel_file;
    std::vector<std::string> lint_spots, lint_assos;
    auto* sel_parse = cmd_sel->add_subcommand("parse", "parse and print canonical form");
    sel_parse->add_option("file", sel_file)->required();
    auto* sel_lint = cmd_sel->add_subcommand("lint", "validate names, optionally vs a schema");
    sel_lint->add_option("file", sel_file)->required();
    sel_lint->add_option("--spots", lint_spots, "allowed spot names")->delimiter(',');
    sel_lint->add_option("--assos", lint_assos, "allowed asso names")->delimiter(',');
    auto* sel_rt = cmd_sel->add_subcommand("roundtrip", "check parse/linearize identity");
    sel_rt->add_option("file", sel_file)->required();

    // ssi
    auto* cmd_ssi = app.add_subcommand("ssi", "schema prompt construction");
    std::vector<std::string> ssi_spots, ssi_assos;
    bool ssi_shuffle = false;
    auto* ssi_build = cmd_ssi->add_subcommand("build", "print a schema prompt");
    ssi_build->add_option("--spots", ssi_spots, "spot names")->delimiter(',');
    ssi_build->add_option("--assos", ssi_assos, "asso names")->delimiter(',');
    ssi_build->add_flag("--shuffle", ssi_shuffle, "shuffle names with --seed");
    cmd_ssi->require_subcommand(1);

    // synth gen
    auto* cmd_synth = app.add_subcommand("synth", "synthetic corpus generation");
    cmd_synth->require_subcommand(1);
    auto* synth_gen = cmd_synth->add_subcommand("gen", "generate a corpus");
    std::size_t gen_n = 1000;
    std::string gen_out;
    std::size_t gen_spots = 40, gen_assos = 10, gen_vocab = 50;
    std::string gen_prefix;
    synth_gen->add_option("--n", gen_n, "instance count");
    synth_gen->add_option("--out", gen_out, "output JSONL path")->required();
    synth_gen->add_option("--spots", gen_spots, "spot class pool size");
    synth_gen->add_option("--assos", gen_assos, "asso class pool size");
    synth_gen->add_option("--vocab", gen_vocab, "vocabulary size");
    synth_gen->add_option("--prefix", gen_prefix, "class name prefix");

    // pair
    auto* cmd_pair = app.add_subcommand("pair", "support-query pairing pipeline");
    std::string pair_in, pair_out, pair_report;
    std::size_t pair_exact_threshold = 200;
    cmd_pair->add_option("--in", pair_in, "corpus JSONL")->required();
    cmd_pair->add_option("--out", pair_out, "paired tasks JSONL")->required();
    cmd_pair->add_option("--report", pair_report, "report JSON path");
    cmd_pair->add_option("--exact-threshold", pair_exact_threshold,
                         "largest class solved with the exact matcher");

    // bench
    auto* cmd_bench = app.add_subcommand("bench", "benchmarks");
    cmd_bench->require_subcommand(1);
    auto* bench_pair = cmd_bench->add_subcommand("pair", "pairing vs episodic sampling");
    std::size_t bench_n = 10000, bench_episodic_tasks = 0;
    bench_pair->add_option("--n", bench_n, "synthetic corpus size");
    bench_pair->add_option("--episodic-tasks", bench_episodic_tasks,
                           "tasks drawn by the episodic simulator (0 = match pairing)");

    // meta
    auto* cmd_meta = app.add_subcommand("meta", "meta-training and evaluation");
    cmd_meta->require_subcommand(1);
    auto* meta_train = cmd_meta->add_subcommand("train", "run the bi-level pretraining loop");
    std::string mt_tasks, mt_out, mt_mode = "second_order", mt_log;
    double mt_alpha = -1, mt_beta = -1;
    int mt_steps = -1, mt_epochs = -1, mt_batch = -1, mt_embed_dim = -1;
    meta_train->add_option("--tasks", mt_tasks, "paired tasks JSONL")->required();
    meta_train->add_option("--out", mt_out, "checkpoint path")->required();
    meta_train->add_option("--mode", mt_mode, "second_order | first_order | simple");
    meta_train->add_option("--alpha", mt_alpha, "inner step size");
    meta_train->add_option("--beta", mt_beta, "outer step size");
    meta_train->add_option("--steps", mt_steps, "cap on outer steps");
    meta_train->add_option("--epochs", mt_epochs, "epoch count");
    meta_train->add_option("--batch", mt_batch, "tasks per outer step");
    meta_train->add_option("--embed-dim", mt_embed_dim, "embedding width");
    meta_train->add_option("--log", mt_log, "per-step loss JSONL path");

    auto* meta_eval = cmd_meta->add_subcommand("eval", "fast-adaptation curves");
    std::string me_ckpt, me_tasks;
    int me_steps = 3;
    double me_alpha = -1;
    meta_eval->add_option("--ckpt", me_ckpt, "checkpoint path")->required();
    meta_eval->add_option("--tasks", me_tasks, "held-out tasks JSONL")->required();
    meta_eval->add_option("--steps", me_steps, "inner steps to evaluate");
    meta_eval->add_option("--alpha", me_alpha, "inner step size");

    // score
    auto* cmd_score = app.add_subcommand("score", "span-level micro F1");
    std::string score_gold, score_pred, score_task;
    bool group_by_entities = false;
    std::vector<std::size_t> score_buckets{2, 4};
    cmd_score->add_option("--gold", score_gold, "gold JSONL")->required();
    cmd_score->add_option("--pred", score_pred, "prediction JSONL")->required();
    cmd_score->add_option("--task", score_task, "ner | rte | evt-trg | evt-arg | senti")
        ->required();
    cmd_score->add_flag("--group-by-entities", group_by_entities,
                        "bucket by gold entity count");
    cmd_score->add_option("--buckets", score_buckets, "bucket edges")->delimiter(',');

    // gradcheck
    app.add_subcommand("gradcheck", "finite-difference gradient suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        seed = effective_seed(seed);

        if (sel_parse->parsed()) return run_sel_parse(sel_file);
        if (sel_lint->parsed()) return run_sel_lint(sel_file, lint_spots, lint_assos);
        if (sel_rt->parsed()) return run_sel_roundtrip(sel_file);

        if (ssi_build->parsed()) {
            sel::Schema schema{{ssi_spots.begin(), ssi_spots.end()},
                               {ssi_assos.begin(), ssi_assos.end()}};
            auto prompt = prompting::build_ssi(schema, {ssi_shuffle, seed});
            std::string joined;
            for (const auto& t : prompt.tokens) {
                if (!joined.empty()) joined += ' ';
                joined += t;
            }
            std::cout << joined << "\n";
            return kOk;
        }

        if (synth_gen->parsed()) {
            auto dist = synth::gen_distribution({gen_spots, gen_assos, gen_vocab, gen_prefix},
                                                seed);
            synth::write_corpus(synth::gen_corpus(dist, gen_n, seed), gen_out);
            std::cout << json{{"instances", gen_n}, {"path", gen_out}}.dump() << "\n";
            return kOk;
        }

        if (cmd_pair->parsed()) {
            pairing::PairConfig cfg;
            cfg.exact_threshold = pair_exact_threshold;
            cfg.threads = threads;
            auto report = pairing::pair_corpus(pair_in, pair_out, cfg);
            if (!pair_report.empty()) {
                std::ofstream out(pair_report);
                out << report.to_json() << "\n";
            }
            std::cout << report.to_json() << "\n";
            return kOk;
        }

        if (bench_pair->parsed())
            return run_bench_pair(bench_n, seed, bench_episodic_tasks, threads);

        if (meta_train->parsed() || meta_eval->parsed()) {
            meta::MetaConfig cfg;
            if (!config_path.empty()) apply_flat_config(cfg, read_flat_config(config_path));
            cfg.seed = seed;
            if (meta_train->parsed()) {
                if (meta_train->count("--mode")) cfg.mode = meta::mode_from_string(mt_mode);
                if (mt_alpha >= 0) cfg.alpha = mt_alpha;
                if (mt_beta >= 0) cfg.beta = mt_beta;
                if (mt_steps >= 0) cfg.max_steps = mt_steps;
                if (mt_epochs >= 0) cfg.epochs = mt_epochs;
                if (mt_batch >= 0) cfg.batch = mt_batch;
                if (mt_embed_dim >= 0) cfg.embed_dim = mt_embed_dim;
                cfg.validate();
                return run_meta_train(mt_tasks, mt_out, cfg, mt_log);
            }
            if (me_alpha >= 0) cfg.alpha = me_alpha;
            cfg.validate();
            return run_meta_eval(me_ckpt, me_tasks, me_steps, cfg);
        }

        if (cmd_score->parsed())
            return run_score(score_gold, score_pred, score_task, group_by_entities,
                             score_buckets);

        if (app.got_subcommand("gradcheck")) return run_gradcheck();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kCheckFailed;
    }
    return kUsage;
}
