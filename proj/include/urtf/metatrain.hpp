#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "urtf/autodiff.hpp"
#include "urtf/prompting.hpp"
#include "urtf/sel.hpp"
#include "urtf/synth.hpp"

namespace urtf::meta {

using prompting::TokenSeq;

class UnknownToken : public std::runtime_error {
public:
    explicit UnknownToken(const std::string& token)
        : std::runtime_error("token not in vocabulary: '" + token + "'") {}
};

class NonFiniteLoss : public std::runtime_error {
public:
    explicit NonFiniteLoss(const std::string& which)
        : std::runtime_error("non-finite loss: " + which) {}
};

// Closed token inventory: specials + markers + sentinels + corpus tokens.
class Vocab {
public:
    static Vocab build(const std::vector<std::string>& corpus_tokens);

    int id(const std::string& token) const;
    const std::string& token(int id) const { return tokens_.at(id); }
    std::vector<int> encode(const TokenSeq& tokens) const;
    int size() const { return static_cast<int>(tokens_.size()); }
    int bos() const { return bos_; }
    int eos() const { return eos_; }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
    int bos_ = 0, eos_ = 0;
};

enum class Mode { SecondOrder, FirstOrder, Simple };

Mode mode_from_string(const std::string& name);
std::string to_string(Mode mode);

struct MetaConfig {
    double alpha = 1e-4;  // inner step size
    double beta = 1e-4;   // outer step size
    int inner_steps = 1;  // J
    Mode mode = Mode::SecondOrder;
    double w_retrv = 1, w_ext = 1, w_lm = 1, w_record = 1;
    std::uint64_t seed = 0;
    int batch = 4;
    int epochs = 1;
    int max_steps = 0;  // 0 = bounded by epochs only
    int embed_dim = 32;
    std::size_t n_spot_negatives = 10, n_asso_negatives = 10;
    double corruption_rate = 0.15;
    double corruption_mean_span = 3.0;
    bool resample_negatives_per_epoch = true;

    void validate() const;
};

struct LossBundle {
    double retrv = 0, ext = 0, lm = 0, record = 0;
    double total() const { return retrv + ext + lm + record; }
};

// embedding (V x d), decoder_w (2d x V), decoder_b (V)
ad::ParamStore init_params(const Vocab& vocab, int embed_dim, std::uint64_t seed);

// Teacher-forced mean cross-entropy of generating `target` from `input`
// (bag-of-embeddings encoder, previous-token conditioned decoder).
double forward_loss(const ad::ParamStore& params, const Vocab& vocab, const TokenSeq& input,
                    const TokenSeq& target);

// Loss inputs for one instance half of a task.
struct EncodedInstance {
    std::vector<int> retrieval_input;   // s ⊕ x
    std::vector<int> extraction_input;  // s ⊕ x ⊕ k (k = gold SEL)
    std::vector<int> text;              // x
    std::vector<int> target;            // y (+ EOS)
    std::vector<int> record_target;     // y (+ EOS)
};

struct EncodedTask {
    EncodedInstance support;
    EncodedInstance query;
    std::vector<int> lm_input;   // x' of the query text
    std::vector<int> lm_target;  // x'' (+ EOS)
};

// Builds SSI prompts (gold schema + sampled negatives from `pool`),
// tokenizes, corrupts the query text.
EncodedTask encode_task(const synth::PairedTask& task, const Vocab& vocab,
                        const sel::Schema& pool, const MetaConfig& cfg,
                        std::uint64_t task_seed);

// J SGD steps on L_inner = L_retrv + L_ext over the support half. Functional:
// the input params are untouched.
ad::ParamStore inner_adapt(const ad::ParamStore& params, const Vocab& vocab,
                           const EncodedInstance& support, const MetaConfig& cfg);

struct TrainLogEntry {
    int step = 0;
    LossBundle losses;
};

class Trainer {
public:
    Trainer(Vocab vocab, MetaConfig cfg);

    // One meta task: inner adapt on support, outer losses on query, returns
    // the bundle. Gradients accumulate until apply_update().
    LossBundle accumulate_task(const EncodedTask& task);
    void apply_update();

    const ad::ParamStore& params() const { return params_; }
    ad::ParamStore& params() { return params_; }
    const Vocab& vocab() const { return vocab_; }
    const MetaConfig& config() const { return cfg_; }

private:
    Vocab vocab_;
    MetaConfig cfg_;
    ad::ParamStore params_;
    ad::ParamStore grad_accum_;
    int pending_ = 0;
};

struct TrainResult {
    ad::ParamStore params;
    std::vector<TrainLogEntry> log;
    sel::Schema pool;  // class universe seen in training
};

TrainResult meta_pretrain(const std::vector<synth::PairedTask>& tasks, const Vocab& vocab,
                          const MetaConfig& cfg);

struct AdaptationCurve {
    std::vector<double> mean_query_loss;   // index = inner steps taken
    std::vector<std::size_t> monotone_indices;  // i where loss[i+1] < loss[i]
};

AdaptationCurve evaluate_fast_adaptation(const ad::ParamStore& params, const Vocab& vocab,
                                         const std::vector<synth::PairedTask>& heldout,
                                         const sel::Schema& pool, int steps,
                                         const MetaConfig& cfg);

struct InferenceResult {
    sel::SelRecord knowledge;
    sel::SelRecord prediction;
    bool knowledge_malformed = false;
    bool prediction_malformed = false;
};

// Greedy decode k from s ⊕ x, then y from s ⊕ x ⊕ k; malformed decodes
// degrade to empty records and are flagged.
InferenceResult retrieve_then_extract_inference(const ad::ParamStore& params, const Vocab& vocab,
                                                const prompting::SsiPrompt& ssi,
                                                const TokenSeq& text, int max_len);

// Checkpoint: magic "URTF1", u32 tensor count, then per tensor: u32 name
// length + name bytes, u32 rank, u32 dims, little-endian f64 data. The
// vocabulary is stored next to it as <path>.vocab, one token per line.
void save_checkpoint(const ad::ParamStore& params, const Vocab& vocab, const std::string& path);
std::pair<ad::ParamStore, Vocab> load_checkpoint(const std::string& path);

sel::Schema class_pool_of_tasks(const std::vector<synth::PairedTask>& tasks);

// Text tokens, SEL tokens, and schema names across both halves of every task.
std::vector<std::string> collect_corpus_tokens(const std::vector<synth::PairedTask>& tasks);

}  // namespace urtf::meta
