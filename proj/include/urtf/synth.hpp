#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "urtf/sel.hpp"

namespace urtf::synth {

// One pretraining/eval example. `sel` is the canonical linearized form and is
// the bit-exact on-disk representation.
struct Instance {
    std::string id;
    std::string text;
    sel::Schema schema;
    std::string sel;

    bool operator==(const Instance&) const = default;
};

struct PairedTask {
    Instance support;
    Instance query;
    std::string class_name;

    bool operator==(const PairedTask&) const = default;
};

struct DistConfig {
    std::size_t n_spots = 40;
    std::size_t n_assos = 10;
    std::size_t vocab_size = 50;
    std::string name_prefix = "";  // distinguishes held-out class universes
};

struct TaskDistribution {
    std::vector<std::string> spot_pool;
    std::vector<std::string> asso_pool;
    std::vector<std::string> vocab;
    // class name -> candidate span templates (each a short token sequence)
    std::map<std::string, std::vector<std::string>> rules;
    std::uint64_t seed = 0;
};

class IoFailure : public std::runtime_error {
public:
    explicit IoFailure(const std::string& what) : std::runtime_error(what) {}
};

class LineParseFailure : public std::runtime_error {
public:
    LineParseFailure(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

TaskDistribution gen_distribution(const DistConfig& config, std::uint64_t seed);

// Class choice follows a 1/(rank+1) skew so deduplication has bite.
Instance gen_instance(const TaskDistribution& dist, std::size_t n_spots, std::size_t n_assos,
                      std::uint64_t seed);

std::vector<Instance> gen_corpus(const TaskDistribution& dist, std::size_t n,
                                 std::uint64_t seed);

std::string to_json_line(const Instance& instance);
Instance instance_from_json_line(const std::string& line, std::size_t line_number);

std::string to_json_line(const PairedTask& task);
std::string paired_task_json_line(const Instance& support, const Instance& query,
                                  const std::string& class_name);
PairedTask paired_task_from_json_line(const std::string& line, std::size_t line_number);

void write_corpus(const std::vector<Instance>& instances, const std::string& path);
std::vector<Instance> read_corpus(const std::string& path);

// Streaming read; on_error gets (line_number, message) for bad lines, which
// are skipped. Returns the number of parsed instances.
std::size_t stream_corpus(const std::string& path,
                          const std::function<void(Instance&&)>& on_instance,
                          const std::function<void(std::size_t, const std::string&)>& on_error);

void write_paired_tasks(const std::vector<PairedTask>& tasks, const std::string& path);
std::vector<PairedTask> read_paired_tasks(const std::string& path);

}  // namespace urtf::synth
