#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sarneg/ranking.hpp"

namespace sarneg {

/// Contiguous difficulty buckets; buckets[0] is the easiest.
struct BucketSet {
    std::vector<std::vector<ArticleIndex>> buckets;

    std::size_t bucket_count() const { return buckets.size(); }
    std::size_t pool_size() const;
};

/// Sorts the pool easiest-first (largest difficulty rank first) and cuts it
/// into n contiguous chunks; earlier chunks take the remainder.
BucketSet bucketize(const DifficultyRanking& ranking, std::size_t n_buckets);

struct CurriculumPhase {
    std::size_t begin_epoch = 0;  // inclusive
    std::size_t end_epoch = 0;    // exclusive
    std::vector<double> weights;  // easy -> difficult
};

struct CurriculumSchedule {
    std::vector<CurriculumPhase> phases;

    /// Throws ConfigError unless the phases tile [0, epochs) in order and every
    /// weight vector has n_buckets non-negative entries summing to 1 (1e-9).
    void validate(std::size_t epochs, std::size_t n_buckets) const;
};

/// Three equal phases moving mass from the easy end to the difficult end. For
/// three buckets the mixtures are (0.7, 0.2, 0.1), (0.15, 0.7, 0.15) and
/// (0.1, 0.2, 0.7); other bucket counts resample that profile piecewise-linearly
/// at the bucket centres and renormalise.
CurriculumSchedule default_schedule(std::size_t n_buckets, std::size_t epochs);

const std::vector<double>& mixture_for_epoch(const CurriculumSchedule& schedule,
                                             std::size_t epoch);

/// Integer quotas summing to `total` whose expectations are exactly total * w_i.
/// Floors are deterministic; leftover units go to buckets by systematic
/// sampling on the fractional parts (no draw when there is no leftover).
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights,
                                   std::mt19937_64& rng);

struct NegativeSample {
    std::vector<ArticleIndex> articles;       // grouped easy -> difficult
    std::vector<std::size_t> bucket_counts;   // draws per bucket
};

/// Draws n distinct negatives: quotas by `apportion`, quota overflow beyond a
/// bucket's size re-apportioned over buckets with spare capacity by their
/// renormalised weights (equal weights if those are all zero), then sampling
/// without replacement inside each bucket. Deterministic for a fixed seed.
NegativeSample sample_negatives(const BucketSet& buckets, std::span<const double> weights,
                                std::size_t n, std::uint64_t seed);

/// Uniform draw of n distinct articles from a pool with the same generator
/// protocol as a one-bucket curriculum draw.
std::vector<ArticleIndex> sample_uniform(std::span<const ArticleIndex> pool, std::size_t n,
                                         std::uint64_t seed);

} // namespace sarneg
