#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sarneg/bm25.hpp"
#include "sarneg/corpus.hpp"
#include "sarneg/curriculum.hpp"
#include "sarneg/encoder.hpp"

namespace sarneg {

/// Rankings that can take part in the fused difficulty ranking. Which semantic
/// ranking is used (BM25 or the model) is chosen by SemanticMode.
enum class SourceKind { Semantic, Hierarchical, Sequential };
enum class SchedulerMode { Fixed, Curriculum };
enum class SemanticMode { Static, Dynamic };
enum class FixedSampling { Hardest, Uniform };

struct DataConfig {
    std::filesystem::path corpus;
    // Either a single query file split by ratio...
    std::optional<std::filesystem::path> queries;
    SplitRatios split;
    std::uint64_t split_seed = 7;
    // ...or pre-split files (train required, val/test optional).
    std::optional<std::filesystem::path> train;
    std::optional<std::filesystem::path> val;
    std::optional<std::filesystem::path> test;
};

struct EncoderConfig {
    std::size_t vocab_size = 32768;
    std::size_t dim = 64;
    double temperature = 0.05;
};

struct SamplingConfig {
    std::vector<SourceKind> sources = {SourceKind::Semantic, SourceKind::Hierarchical,
                                       SourceKind::Sequential};
    SchedulerMode scheduler = SchedulerMode::Curriculum;
    SemanticMode semantic = SemanticMode::Dynamic;
    FixedSampling fixed_sampling = FixedSampling::Hardest;
    std::size_t n_buckets = 3;
    std::size_t negatives_per_query = 8;
    double k_rrf = 60.0;
    std::optional<CurriculumSchedule> schedule;  // default_schedule() when unset
};

struct TrainingConfig {
    std::size_t epochs = 15;
    std::size_t batch_size = 24;
    std::size_t refresh_threads = 1;
    std::string selection_metric = "recall@100";  // "recall@K", "map" or "mrp"
};

struct ExperimentConfig {
    DataConfig data;
    std::uint64_t seed = 13;
    EncoderConfig encoder;
    AdamWConfig optimizer;
    Bm25Params bm25;
    SamplingConfig sampling;
    TrainingConfig training;
    std::vector<std::size_t> eval_ks = {100, 200, 500};

    /// Strict parse: unknown keys and malformed values raise ConfigError.
    /// Relative data paths are resolved against `base_dir`.
    static ExperimentConfig from_json(const nlohmann::json& json,
                                      const std::filesystem::path& base_dir = {});
    static ExperimentConfig load(const std::filesystem::path& path);

    /// Fully expanded form (every default written out); round-trips via from_json.
    nlohmann::json to_json() const;

    /// FNV-1a over the canonical JSON dump.
    std::uint64_t checksum() const;

    /// Cross-field invariants; throws ConfigError.
    void validate() const;

    CurriculumSchedule effective_schedule() const;
};

std::string_view to_string(SourceKind kind);
std::string_view to_string(SchedulerMode mode);
std::string_view to_string(SemanticMode mode);
std::string_view to_string(FixedSampling mode);

} // namespace sarneg
