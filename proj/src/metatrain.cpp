#include "urtf/metatrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace urtf::meta {

namespace {

std::vector<std::string> split_ws(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

}  // namespace

Vocab Vocab::build(const std::vector<std::string>& corpus_tokens) {
    Vocab v;
    v.tokens_.push_back("<pad>");
    v.tokens_.push_back("<s>");
    v.tokens_.push_back("</s>");
    v.tokens_.push_back(prompting::kSpotMarker);
    v.tokens_.push_back(prompting::kAssoMarker);
    v.tokens_.push_back(prompting::kTextMarker);
    for (int i = 0; i < prompting::kNumSentinels; ++i)
        v.tokens_.push_back(prompting::sentinel_token(i));
    std::set<std::string> extra(corpus_tokens.begin(), corpus_tokens.end());
    for (const auto& t : v.tokens_) extra.erase(t);
    for (const auto& t : extra) v.tokens_.push_back(t);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i)
        v.index_[v.tokens_[i]] = static_cast<int>(i);
    v.bos_ = v.index_.at("<s>");
    v.eos_ = v.index_.at("</s>");
    return v;
}

int Vocab::id(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw UnknownToken(token);
    return it->second;
}

std::vector<int> Vocab::encode(const TokenSeq& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
}

Mode mode_from_string(const std::string& name) {
    if (name == "second_order") return Mode::SecondOrder;
    if (name == "first_order") return Mode::FirstOrder;
    if (name == "simple") return Mode::Simple;
    throw std::invalid_argument("unknown mode: " + name);
}

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::SecondOrder: return "second_order";
        case Mode::FirstOrder: return "first_order";
        case Mode::Simple: return "simple";
    }
    return "?";
}

void MetaConfig::validate() const {
    if (alpha < 0 || beta < 0) throw std::invalid_argument("negative step size");
    if (inner_steps < 0) throw std::invalid_argument("negative inner step count");
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (embed_dim < 1) throw std::invalid_argument("embed_dim must be >= 1");
    if (corruption_rate <= 0 || corruption_rate >= 1)
        throw std::invalid_argument("corruption_rate must lie in (0, 1)");
    if (corruption_mean_span < 1)
        throw std::invalid_argument("corruption_mean_span must be >= 1");
}

ad::ParamStore init_params(const Vocab& vocab, int embed_dim, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0x1357));
    std::normal_distribution<double> dist(0.0, 0.1);
    const int V = vocab.size(), d = embed_dim;
    ad::ParamStore p;
    p["embedding"] = ad::Tensor::zeros({V, d});
    p["decoder_w"] = ad::Tensor::zeros({2 * d, V});
    p["decoder_b"] = ad::Tensor::zeros({V});
    for (auto& [name, t] : p.items)
        for (auto& x : t.data) x = dist(rng);
    return p;
}

namespace {

struct ParamNodes {
    ad::NodeId embedding, decoder_w, decoder_b;
};

const std::vector<std::string> kParamNames{"embedding", "decoder_w", "decoder_b"};

std::vector<ad::NodeId> as_list(const ParamNodes& p) {
    return {p.embedding, p.decoder_w, p.decoder_b};
}

ParamNodes from_list(const std::vector<ad::NodeId>& v) { return {v[0], v[1], v[2]}; }

// Teacher-forced mean cross-entropy of target given input under the
// bag-of-embeddings encoder / previous-token decoder.
ad::NodeId seq_loss(ad::Tape& tape, const ParamNodes& p, int embed_dim, int vocab_size,
                    int bos, const std::vector<int>& input_ids,
                    const std::vector<int>& target_ids) {
    if (target_ids.empty()) throw std::invalid_argument("empty decode target");
    const int d = embed_dim, V = vocab_size;

    ad::NodeId mean_vec;
    if (input_ids.empty()) {
        mean_vec = tape.input(ad::Tensor::zeros({1, d}));
    } else {
        auto gathered = tape.gather_rows(p.embedding, input_ids);
        ad::Tensor ones{{1, static_cast<int>(input_ids.size())},
                        std::vector<double>(input_ids.size(), 1.0 / input_ids.size())};
        mean_vec = tape.matmul(tape.input(std::move(ones)), gathered);
    }

    auto bias_row = tape.reshape(p.decoder_b, {1, V});
    ad::NodeId total = tape.input(ad::Tensor::scalar(0.0));
    int prev = bos;
    for (int tgt : target_ids) {
        auto prev_emb = tape.gather_rows(p.embedding, {prev});
        auto h = tape.reshape(tape.concat(mean_vec, prev_emb), {1, 2 * d});
        auto logits = tape.add(tape.matmul(h, p.decoder_w), bias_row);
        total = tape.add(total, tape.cross_entropy(logits, tgt));
        prev = tgt;
    }
    return tape.scale(total, 1.0 / target_ids.size());
}

// J inner SGD steps on L_retrv + L_ext over the support, recorded on the tape.
ParamNodes adapt_nodes(ad::Tape& tape, const ParamNodes& theta, const Vocab& vocab,
                       const EncodedInstance& support, const MetaConfig& cfg) {
    ParamNodes cur = theta;
    const int d = cfg.embed_dim, V = vocab.size(), bos = vocab.bos();
    for (int j = 0; j < cfg.inner_steps; ++j) {
        auto l_retrv = seq_loss(tape, cur, d, V, bos, support.retrieval_input, support.target);
        auto l_ext = seq_loss(tape, cur, d, V, bos, support.extraction_input, support.target);
        auto loss = tape.add(l_retrv, l_ext);
        auto grads = tape.grad(loss, as_list(cur));
        std::vector<ad::NodeId> next;
        auto cur_list = as_list(cur);
        for (std::size_t i = 0; i < cur_list.size(); ++i)
            next.push_back(tape.sub(cur_list[i], tape.scale(grads[i], cfg.alpha)));
        cur = from_list(next);
    }
    return cur;
}

EncodedInstance encode_instance(const synth::Instance& inst, const Vocab& vocab,
                                const sel::Schema& pool, const MetaConfig& cfg,
                                std::mt19937_64& rng) {
    auto schema = prompting::sample_schema_negatives(inst.schema, pool, cfg.n_spot_negatives,
                                                     cfg.n_asso_negatives, rng);
    auto ssi = prompting::build_ssi(schema);
    auto text = split_ws(inst.text);
    auto record = sel::parse_sel(inst.sel);

    EncodedInstance out;
    out.retrieval_input = vocab.encode(prompting::assemble_retrieval_input(ssi, text).tokens);
    out.extraction_input =
        vocab.encode(prompting::assemble_extraction_input(ssi, text, record).tokens);
    out.text = vocab.encode(text);
    out.target = vocab.encode(prompting::tokenize_sel(record));
    out.target.push_back(vocab.eos());
    out.record_target = out.target;
    return out;
}

}  // namespace

double forward_loss(const ad::ParamStore& params, const Vocab& vocab, const TokenSeq& input,
                    const TokenSeq& target) {
    ad::Tape tape;
    ParamNodes p{tape.input(params.at("embedding")), tape.input(params.at("decoder_w")),
                 tape.input(params.at("decoder_b"))};
    const int d = params.at("embedding").shape[1];
    auto tgt = vocab.encode(target);
    tgt.push_back(vocab.eos());
    auto loss = seq_loss(tape, p, d, vocab.size(), vocab.bos(), vocab.encode(input), tgt);
    return tape.value(loss).data[0];
}

EncodedTask encode_task(const synth::PairedTask& task, const Vocab& vocab,
                        const sel::Schema& pool, const MetaConfig& cfg,
                        std::uint64_t task_seed) {
    std::mt19937_64 rng(mix_seed(cfg.seed, task_seed));
    EncodedTask out;
    out.support = encode_instance(task.support, vocab, pool, cfg, rng);
    out.query = encode_instance(task.query, vocab, pool, cfg, rng);
    auto query_text = split_ws(task.query.text);
    auto corrupted =
        prompting::corrupt_text(query_text, cfg.corruption_rate, cfg.corruption_mean_span, rng);
    out.lm_input = vocab.encode(corrupted.corrupted_input);
    out.lm_target = vocab.encode(corrupted.target);
    out.lm_target.push_back(vocab.eos());
    return out;
}

ad::ParamStore inner_adapt(const ad::ParamStore& params, const Vocab& vocab,
                           const EncodedInstance& support, const MetaConfig& cfg) {
    ad::Tape tape;
    ParamNodes theta{tape.input(params.at("embedding")), tape.input(params.at("decoder_w")),
                     tape.input(params.at("decoder_b"))};
    MetaConfig local = cfg;
    local.embed_dim = params.at("embedding").shape[1];
    auto adapted = adapt_nodes(tape, theta, vocab, support, local);
    ad::ParamStore out;
    auto list = as_list(adapted);
    for (std::size_t i = 0; i < kParamNames.size(); ++i)
        out[kParamNames[i]] = tape.value(list[i]);
    return out;
}

Trainer::Trainer(Vocab vocab, MetaConfig cfg) : vocab_(std::move(vocab)), cfg_(cfg) {
    cfg_.validate();
    params_ = init_params(vocab_, cfg_.embed_dim, cfg_.seed);
    for (const auto& [name, t] : params_.items)
        grad_accum_[name] = ad::Tensor::zeros(t.shape);
}

LossBundle Trainer::accumulate_task(const EncodedTask& task) {
    ad::Tape tape;
    ParamNodes theta{tape.input(params_.at("embedding")), tape.input(params_.at("decoder_w")),
                     tape.input(params_.at("decoder_b"))};
    const int d = cfg_.embed_dim, V = vocab_.size(), bos = vocab_.bos();

    ParamNodes adapted = theta;
    if (cfg_.mode != Mode::Simple) {
        adapted = adapt_nodes(tape, theta, vocab_, task.support, cfg_);
        if (cfg_.mode == Mode::FirstOrder) {
            // keep the adapted value but cut the path back to theta
            std::vector<ad::NodeId> fo;
            auto t_list = as_list(theta), a_list = as_list(adapted);
            for (std::size_t i = 0; i < t_list.size(); ++i)
                fo.push_back(tape.add(t_list[i], tape.detach(tape.sub(a_list[i], t_list[i]))));
            adapted = from_list(fo);
        }
    }

    auto zero = [&] { return tape.input(ad::Tensor::scalar(0.0)); };
    auto l_retrv = cfg_.w_retrv != 0
                       ? seq_loss(tape, adapted, d, V, bos, task.query.retrieval_input,
                                  task.query.target)
                       : zero();
    auto l_ext = cfg_.w_ext != 0
                     ? seq_loss(tape, adapted, d, V, bos, task.query.extraction_input,
                                task.query.target)
                     : zero();
    auto l_lm = (cfg_.w_lm != 0 && !task.lm_target.empty())
                    ? seq_loss(tape, theta, d, V, bos, task.lm_input, task.lm_target)
                    : zero();
    auto l_record = cfg_.w_record != 0
                        ? seq_loss(tape, theta, d, V, bos, task.query.text,
                                   task.query.record_target)
                        : zero();

    LossBundle bundle{tape.value(l_retrv).data[0], tape.value(l_ext).data[0],
                      tape.value(l_lm).data[0], tape.value(l_record).data[0]};
    if (!std::isfinite(bundle.retrv)) throw NonFiniteLoss("retrv");
    if (!std::isfinite(bundle.ext)) throw NonFiniteLoss("ext");
    if (!std::isfinite(bundle.lm)) throw NonFiniteLoss("lm");
    if (!std::isfinite(bundle.record)) throw NonFiniteLoss("record");

    auto total = tape.add(tape.add(tape.scale(l_retrv, cfg_.w_retrv),
                                   tape.scale(l_ext, cfg_.w_ext)),
                          tape.add(tape.scale(l_lm, cfg_.w_lm),
                                   tape.scale(l_record, cfg_.w_record)));
    auto grads = tape.grad(total, as_list(theta));
    for (std::size_t i = 0; i < kParamNames.size(); ++i) {
        const auto& g = tape.value(grads[i]);
        auto& acc = grad_accum_[kParamNames[i]];
        for (std::size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += g.data[k];
    }
    ++pending_;
    return bundle;
}

void Trainer::apply_update() {
    if (pending_ == 0) return;
    for (const auto& name : kParamNames) {
        auto& p = params_[name];
        auto& g = grad_accum_[name];
        for (std::size_t k = 0; k < p.data.size(); ++k) {
            p.data[k] -= cfg_.beta * g.data[k];
            g.data[k] = 0;
        }
    }
    pending_ = 0;
}

sel::Schema class_pool_of_tasks(const std::vector<synth::PairedTask>& tasks) {
    sel::Schema pool;
    for (const auto& task : tasks)
        for (const auto* inst : {&task.support, &task.query}) {
            pool.spots.insert(inst->schema.spots.begin(), inst->schema.spots.end());
            pool.assos.insert(inst->schema.assos.begin(), inst->schema.assos.end());
        }
    return pool;
}

std::vector<std::string> collect_corpus_tokens(const std::vector<synth::PairedTask>& tasks) {
    std::set<std::string> tokens;
    for (const auto& task : tasks)
        for (const auto* inst : {&task.support, &task.query}) {
            for (const auto& t : split_ws(inst->text)) tokens.insert(t);
            for (const auto& t : prompting::tokenize_sel(sel::parse_sel(inst->sel)))
                tokens.insert(t);
            tokens.insert(inst->schema.spots.begin(), inst->schema.spots.end());
            tokens.insert(inst->schema.assos.begin(), inst->schema.assos.end());
        }
    return {tokens.begin(), tokens.end()};
}

TrainResult meta_pretrain(const std::vector<synth::PairedTask>& tasks, const Vocab& vocab,
                          const MetaConfig& cfg) {
    cfg.validate();
    Trainer trainer(vocab, cfg);
    TrainResult result;
    result.pool = class_pool_of_tasks(tasks);

    int step = 0;
    bool done = tasks.empty();
    for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
        std::vector<std::size_t> order(tasks.size());
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0xe90c + epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        std::uint64_t neg_epoch = cfg.resample_negatives_per_epoch ? epoch : 0;

        LossBundle batch_sum;
        int in_batch = 0;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            auto encoded = encode_task(tasks[order[pos]], vocab, result.pool, cfg,
                                       mix_seed(neg_epoch, order[pos]));
            auto bundle = trainer.accumulate_task(encoded);
            batch_sum.retrv += bundle.retrv;
            batch_sum.ext += bundle.ext;
            batch_sum.lm += bundle.lm;
            batch_sum.record += bundle.record;
            ++in_batch;
            if (in_batch == cfg.batch || pos + 1 == order.size()) {
                trainer.apply_update();
                ++step;
                result.log.push_back(
                    {step, {batch_sum.retrv / in_batch, batch_sum.ext / in_batch,
                            batch_sum.lm / in_batch, batch_sum.record / in_batch}});
                batch_sum = {};
                in_batch = 0;
                if (cfg.max_steps > 0 && step >= cfg.max_steps) {
                    done = true;
                    break;
                }
            }
        }
    }
    result.params = trainer.params();
    return result;
}

namespace {

double query_loss(const ad::ParamStore& params, const Vocab& vocab,
                  const EncodedInstance& query, int embed_dim) {
    ad::Tape tape;
    ParamNodes p{tape.input(params.at("embedding")), tape.input(params.at("decoder_w")),
                 tape.input(params.at("decoder_b"))};
    auto l = tape.add(seq_loss(tape, p, embed_dim, vocab.size(), vocab.bos(),
                               query.retrieval_input, query.target),
                      seq_loss(tape, p, embed_dim, vocab.size(), vocab.bos(),
                               query.extraction_input, query.target));
    return tape.value(l).data[0];
}

}  // namespace

AdaptationCurve evaluate_fast_adaptation(const ad::ParamStore& params, const Vocab& vocab,
                                         const std::vector<synth::PairedTask>& heldout,
                                         const sel::Schema& pool, int steps,
                                         const MetaConfig& cfg) {
    const int d = params.at("embedding").shape[1];
    AdaptationCurve curve;
    curve.mean_query_loss.assign(steps + 1, 0.0);
    if (heldout.empty()) return curve;

    MetaConfig one_step = cfg;
    one_step.inner_steps = 1;
    one_step.embed_dim = d;
    for (std::size_t i = 0; i < heldout.size(); ++i) {
        auto task = encode_task(heldout[i], vocab, pool, cfg, i);
        ad::ParamStore theta = params;
        for (int j = 0; j <= steps; ++j) {
            curve.mean_query_loss[j] += query_loss(theta, vocab, task.query, d);
            if (j < steps) theta = inner_adapt(theta, vocab, task.support, one_step);
        }
    }
    for (auto& v : curve.mean_query_loss) v /= heldout.size();
    for (std::size_t j = 0; j + 1 < curve.mean_query_loss.size(); ++j)
        if (curve.mean_query_loss[j + 1] < curve.mean_query_loss[j])
            curve.monotone_indices.push_back(j);
    return curve;
}

namespace {

std::vector<int> greedy_decode(const ad::ParamStore& params, const Vocab& vocab,
                               const std::vector<int>& input_ids, int max_len) {
    const auto& emb = params.at("embedding");
    const auto& w = params.at("decoder_w");
    const auto& b = params.at("decoder_b");
    const int d = emb.shape[1], V = emb.shape[0];

    std::vector<double> mean_vec(d, 0.0);
    if (!input_ids.empty()) {
        for (int id : input_ids)
            for (int k = 0; k < d; ++k) mean_vec[k] += emb.data[id * d + k];
        for (auto& v : mean_vec) v /= input_ids.size();
    }

    std::vector<int> out;
    int prev = vocab.bos();
    for (int t = 0; t < max_len; ++t) {
        int best = 0;
        double best_score = -1e300;
        for (int v = 0; v < V; ++v) {
            double score = b.data[v];
            for (int k = 0; k < d; ++k) score += mean_vec[k] * w.data[k * V + v];
            for (int k = 0; k < d; ++k) score += emb.data[prev * d + k] * w.data[(d + k) * V + v];
            if (score > best_score) {
                best_score = score;
                best = v;
            }
        }
        if (best == vocab.eos()) break;
        out.push_back(best);
        prev = best;
    }
    return out;
}

std::pair<sel::SelRecord, bool> parse_decoded(const Vocab& vocab, const std::vector<int>& ids) {
    std::string joined;
    for (int id : ids) {
        if (!joined.empty()) joined += ' ';
        joined += vocab.token(id);
    }
    try {
        return {sel::parse_sel(joined), false};
    } catch (const sel::ParseError&) {
        return {sel::SelRecord{}, true};
    }
}

}  // namespace

InferenceResult retrieve_then_extract_inference(const ad::ParamStore& params, const Vocab& vocab,
                                                const prompting::SsiPrompt& ssi,
                                                const TokenSeq& text, int max_len) {
    InferenceResult result;
    auto retrieval = vocab.encode(prompting::assemble_retrieval_input(ssi, text).tokens);
    auto k_ids = greedy_decode(params, vocab, retrieval, max_len);
    std::tie(result.knowledge, result.knowledge_malformed) = parse_decoded(vocab, k_ids);

    auto extraction = retrieval;
    extraction.insert(extraction.end(), k_ids.begin(), k_ids.end());
    auto y_ids = greedy_decode(params, vocab, extraction, max_len);
    std::tie(result.prediction, result.prediction_malformed) = parse_decoded(vocab, y_ids);
    return result;
}

namespace {

constexpr char kMagic[5] = {'U', 'R', 'T', 'F', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw synth::IoFailure("truncated checkpoint");
    return buf[0] | (buf[1] << 8) | (buf[2] << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), 8);
}

double read_f64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw synth::IoFailure("truncated checkpoint");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_checkpoint(const ad::ParamStore& params, const Vocab& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw synth::IoFailure("cannot open for writing: " + path);
    out.write(kMagic, 5);
    write_u32(out, static_cast<std::uint32_t>(params.items.size()));
    for (const auto& [name, t] : params.items) {
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (int dim : t.shape) write_u32(out, static_cast<std::uint32_t>(dim));
        for (double v : t.data) write_f64(out, v);
    }
    if (!out) throw synth::IoFailure("write failed: " + path);

    std::ofstream vout(path + ".vocab");
    if (!vout) throw synth::IoFailure("cannot open for writing: " + path + ".vocab");
    for (const auto& tok : vocab.tokens()) vout << tok << "\n";
    if (!vout) throw synth::IoFailure("write failed: " + path + ".vocab");
}

std::pair<ad::ParamStore, Vocab> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw synth::IoFailure("cannot open: " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kMagic, 5) != 0)
        throw synth::IoFailure("bad checkpoint magic: " + path);
    ad::ParamStore params;
    std::uint32_t count = read_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw synth::IoFailure("truncated checkpoint");
        std::uint32_t rank = read_u32(in);
        std::vector<int> shape;
        for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<int>(read_u32(in)));
        ad::Tensor t = ad::Tensor::zeros(shape);
        for (auto& v : t.data) v = read_f64(in);
        params[name] = std::move(t);
    }

    std::ifstream vin(path + ".vocab");
    if (!vin) throw synth::IoFailure("cannot open: " + path + ".vocab");
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(vin, line)) tokens.push_back(line);
    // rebuild from the stored order: specials lead, the rest re-sorts identically
    Vocab vocab = Vocab::build(tokens);
    if (vocab.tokens() != tokens)
        throw synth::IoFailure("vocab sidecar is not in canonical order: " + path + ".vocab");
    return {std::move(params), std::move(vocab)};
}

}  // namespace urtf::meta
