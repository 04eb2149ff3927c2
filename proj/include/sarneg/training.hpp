#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sarneg/bm25.hpp"
#include "sarneg/config.hpp"
#include "sarneg/corpus.hpp"
#include "sarneg/curriculum.hpp"
#include "sarneg/encoder.hpp"
#include "sarneg/evaluation.hpp"

namespace sarneg {

/// Everything a run reads, loaded and validated once.
struct ExperimentData {
    CorpusStore corpus;
    LegislationGraph graph;
    Bm25Index index;
    std::vector<QueryExample> train;
    std::vector<QueryExample> val;
    std::vector<QueryExample> test;
};

/// Reads corpus and queries named by the config; splits when a single query
/// file is given.
ExperimentData load_experiment_data(const ExperimentConfig& config);

/// Builds the graph and index for an in-memory corpus and split.
ExperimentData make_experiment_data(const ExperimentConfig& config, CorpusStore corpus,
                                    QuerySplit split);

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    std::vector<double> step_losses;
    double first_learning_rate = 0.0;
    double last_learning_rate = 0.0;
    std::vector<double> mixture;              // empty in fixed mode
    std::vector<std::size_t> bucket_counts;   // draws per difficulty bucket
    std::optional<std::uint64_t> refresh_step;  // global step of the semantic refresh
    std::optional<double> validation_score;

    nlohmann::json to_json() const;
};

struct RunLog {
    std::uint64_t config_checksum = 0;
    nlohmann::json config;
    std::uint64_t corpus_checksum = 0;
    double temperature = 0.0;
    std::size_t negatives_per_query = 0;
    std::size_t total_steps = 0;
    std::size_t warmup_steps = 0;
    std::vector<EpochLog> epochs;
    std::string selection_metric;
    std::size_t best_epoch = 0;
    std::string eval_split;  // "test", "val" or "train": first non-empty
    MetricsReport report;

    nlohmann::json to_json() const;
};

/// Hooks for inspecting a run without changing it.
class TrainingObserver {
public:
    virtual ~TrainingObserver() = default;
    /// Fused ranking per training query, in training-set order.
    virtual void on_rankings(std::size_t /*epoch*/, std::span<const DifficultyRanking> /*fused*/) {}
    /// Negatives drawn per training query, in training-set order.
    virtual void on_negatives(std::size_t /*epoch*/, std::span<const NegativeSample> /*samples*/) {}
};

struct TrainingResult {
    DualEncoder model;  // parameters of the selected epoch
    RunLog log;
};

/// Validates the config (ConfigError before any work) and trains. Per epoch:
/// refresh the model-based semantic ranking when dynamic (from the second
/// epoch; the first uses BM25), fuse the configured rankings, bucketize, draw
/// negatives by the epoch's mixture (or top-n / uniform in fixed mode), shuffle
/// queries into batches and step. The epoch with the best validation score is
/// kept; ties go to the later epoch.
TrainingResult run_training(const ExperimentConfig& config, const ExperimentData& data,
                            TrainingObserver* observer = nullptr);
TrainingResult run_training(const ExperimentConfig& config);

/// Value of a selection metric ("recall@K", "map", "mrp") from a report.
double selection_score(const MetricsReport& report, std::string_view metric);

/// Writes config.json, runlog.json, report.json, report.md and model.ckpt
/// under out_root/<config checksum>/ and returns that directory.
std::filesystem::path write_run(const std::filesystem::path& out_root,
                                const TrainingResult& result);

} // namespace sarneg
