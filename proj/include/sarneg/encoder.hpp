#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sarneg/corpus.hpp"
#include "sarneg/ranking.hpp"

namespace sarneg {

enum class Side { Query, Article };

/// Hashed token ids (bucket indices), one per token occurrence.
using TokenBag = std::vector<std::uint32_t>;

/// 64-bit FNV-1a of each token, masked to `vocab_size` buckets (a power of two).
TokenBag hash_tokens(std::span<const std::string> tokens, std::size_t vocab_size);

/// Tokenizes and hashes text in one step.
TokenBag encode_text(std::string_view text, std::size_t vocab_size);

/// Dual encoder over hashed embedding bags: separate V x d tables for queries
/// and articles, relevance f(q, s) = mean_q . mean_s, softmax temperature tau.
///
/// Training uses Real = float. The double instantiation exists for numerical
/// checks (finite differences) that need more resolution than float storage.
template <typename Real>
class BasicDualEncoder {
public:
    BasicDualEncoder() = default;
    BasicDualEncoder(std::size_t vocab_size, std::size_t dim, double temperature);

    /// Tables drawn uniformly from [-1/sqrt(d), 1/sqrt(d)], query table first.
    static BasicDualEncoder initialized(std::size_t vocab_size, std::size_t dim,
                                        double temperature, std::uint64_t seed);

    std::size_t vocab_size() const { return vocab_size_; }
    std::size_t dim() const { return dim_; }
    double temperature() const { return temperature_; }

    std::span<Real> table(Side side) { return side == Side::Query ? query_table_ : article_table_; }
    std::span<const Real> table(Side side) const {
        return side == Side::Query ? query_table_ : article_table_;
    }
    std::span<const Real> row(Side side, std::uint32_t bucket) const {
        return table(side).subspan(static_cast<std::size_t>(bucket) * dim_, dim_);
    }
    std::span<Real> row(Side side, std::uint32_t bucket) {
        return table(side).subspan(static_cast<std::size_t>(bucket) * dim_, dim_);
    }

    /// Checkpoint metadata.
    std::uint64_t seed = 0;
    std::uint64_t step = 0;

    bool all_finite() const;

    friend bool operator==(const BasicDualEncoder&, const BasicDualEncoder&) = default;

private:
    std::size_t vocab_size_ = 0;
    std::size_t dim_ = 0;
    double temperature_ = 0.05;
    std::vector<Real> query_table_;
    std::vector<Real> article_table_;
};

using DualEncoder = BasicDualEncoder<float>;

/// Mean of the side's rows at the bag's buckets; zero vector for an empty bag.
template <typename Real>
std::vector<double> embed(const BasicDualEncoder<Real>& model, std::span<const std::uint32_t> bag,
                          Side side);

double dot(std::span<const double> a, std::span<const double> b);

/// f(q, s): unnormalised dot product of the two embeddings.
template <typename Real>
double relevance(const BasicDualEncoder<Real>& model, std::span<const std::uint32_t> query_bag,
                 std::span<const std::uint32_t> article_bag);

/// One query with its positives and sampled negatives, as views into cached bags.
struct ContrastiveExample {
    std::span<const std::uint32_t> query;
    std::vector<std::span<const std::uint32_t>> positives;
    std::vector<std::span<const std::uint32_t>> negatives;
};

/// sum over positives p of -log( e^{f(q,p)/tau} / (e^{f(q,p)/tau} + sum_c e^{f(q,c)/tau}) ),
/// evaluated with a max-shifted log-sum-exp.
template <typename Real>
double contrastive_loss(const BasicDualEncoder<Real>& model, const ContrastiveExample& example);

/// Row-sparse gradient: only rows touched by the batch are present.
struct EncoderGradient {
    std::size_t dim = 0;
    std::map<std::uint32_t, std::vector<double>> query_rows;
    std::map<std::uint32_t, std::vector<double>> article_rows;

    const std::map<std::uint32_t, std::vector<double>>& rows(Side side) const {
        return side == Side::Query ? query_rows : article_rows;
    }
    /// Zero for untouched rows.
    double at(Side side, std::uint32_t bucket, std::size_t column) const;
};

struct LossAndGradient {
    double loss = 0.0;  // mean over the batch
    EncoderGradient gradient;
};

/// Analytic gradient of the batch-mean contrastive loss.
template <typename Real>
LossAndGradient loss_gradient(const BasicDualEncoder<Real>& model,
                              std::span<const ContrastiveExample> batch);

struct AdamWConfig {
    double peak_lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    double weight_decay = 0.01;
    double warmup_fraction = 0.05;
};

struct OptimizerState {
    AdamWConfig config;
    std::vector<double> first_moment;   // query table then article table
    std::vector<double> second_moment;
    std::uint64_t step = 0;

    static OptimizerState for_model(const DualEncoder& model, AdamWConfig config);
};

std::size_t warmup_steps(double warmup_fraction, std::size_t total_steps);

/// Linear warmup from 0 to peak over the warmup steps, then linear decay to 0
/// at total_steps.
double learning_rate_at(const AdamWConfig& config, std::size_t global_step,
                        std::size_t total_steps);

struct StepResult {
    double loss = 0.0;
    double learning_rate = 0.0;
};

/// One AdamW update with decoupled weight decay over every parameter.
StepResult train_step(DualEncoder& model, OptimizerState& state,
                      std::span<const ContrastiveExample> batch, std::size_t global_step,
                      std::size_t total_steps);

/// Applies a precomputed gradient (used by train_step).
void apply_adamw(DualEncoder& model, OptimizerState& state, const EncoderGradient& gradient,
                 double learning_rate);

/// Article embeddings for the whole corpus, row-major N x d.
struct EmbeddingMatrix {
    std::size_t dim = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(values).subspan(i * dim, dim);
    }
};

EmbeddingMatrix embed_all(const DualEncoder& model, std::span<const TokenBag> bags, Side side);

/// Descending f(q, .) over the pool, ties by ascending id; tag semantic-dynamic.
DifficultyRanking rank_negatives_dynamic(const DualEncoder& model,
                                         std::span<const std::uint32_t> query_bag,
                                         const QueryExample& query,
                                         std::span<const ArticleIndex> pool,
                                         std::span<const TokenBag> article_bags);

/// Dynamic rankings for every query against its full negative pool. Article
/// embeddings are computed once and shared; queries may be spread over
/// `threads` workers, results are placed by query position.
std::vector<DifficultyRanking> refresh_rankings(const DualEncoder& model,
                                                std::span<const QueryExample> queries,
                                                std::span<const TokenBag> query_bags,
                                                std::span<const TokenBag> article_bags,
                                                std::size_t threads = 1);

/// Checkpoint: one ASCII header line
///   "sarneg-checkpoint 1 vocab=V dim=d tau=T seed=S step=N dtype=f32le\n"
/// followed by the query table then the article table as little-endian
/// IEEE-754 binary32, row-major.
void save_checkpoint(std::ostream& out, const DualEncoder& model);
DualEncoder load_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const DualEncoder& model);
DualEncoder load_checkpoint(const std::filesystem::path& path);

} // namespace sarneg
