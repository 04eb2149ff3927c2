#include "sarneg/curriculum.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "sarneg/errors.hpp"

namespace sarneg {

namespace {

constexpr double kWeightTolerance = 1e-9;

// Easy -> difficult mixtures of the three training phases at three buckets.
constexpr std::array<std::array<double, 3>, 3> kThreeBucketProfile = {{
    {0.7, 0.2, 0.1},
    {0.15, 0.7, 0.15},
    {0.1, 0.2, 0.7},
}};

void check_weights(std::span<const double> weights, std::size_t n_buckets) {
    if (weights.size() != n_buckets) {
        throw ConfigError("mixture has " + std::to_string(weights.size()) + " weights for " +
                          std::to_string(n_buckets) + " buckets");
    }
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) {
            throw ConfigError("mixture weights must be finite and non-negative");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightTolerance) {
        throw ConfigError("mixture weights must sum to 1");
    }
}

double resample_profile(const std::array<double, 3>& profile, double x) {
    constexpr std::array<double, 3> anchors = {1.0 / 6.0, 0.5, 5.0 / 6.0};
    if (x <= anchors[0]) {
        return profile[0];
    }
    if (x >= anchors[2]) {
        return profile[2];
    }
    const std::size_t i = x < anchors[1] ? 0 : 1;
    const double t = (x - anchors[i]) / (anchors[i + 1] - anchors[i]);
    return profile[i] + t * (profile[i + 1] - profile[i]);
}

} // namespace

std::size_t BucketSet::pool_size() const {
    std::size_t total = 0;
    for (const auto& b : buckets) {
        total += b.size();
    }
    return total;
}

BucketSet bucketize(const DifficultyRanking& ranking, std::size_t n_buckets) {
    const std::size_t pool = ranking.size();
    if (n_buckets == 0) {
        throw ConfigError("n_buckets must be >= 1");
    }
    if (n_buckets > pool) {
        throw ConfigError("n_buckets (" + std::to_string(n_buckets) + ") exceeds pool size (" +
                          std::to_string(pool) + ") for " + ranking.query_id);
    }
    BucketSet set;
    set.buckets.resize(n_buckets);
    const std::size_t base = pool / n_buckets;
    const std::size_t extra = pool % n_buckets;
    auto it = ranking.order.rbegin();
    for (std::size_t b = 0; b < n_buckets; ++b) {
        const std::size_t size = base + (b < extra ? 1 : 0);
        set.buckets[b].assign(it, it + static_cast<std::ptrdiff_t>(size));
        it += static_cast<std::ptrdiff_t>(size);
    }
    return set;
}

void CurriculumSchedule::validate(std::size_t epochs, std::size_t n_buckets) const {
    if (phases.empty()) {
        throw ConfigError("curriculum schedule has no phases");
    }
    std::size_t expected = 0;
    for (const auto& phase : phases) {
        if (phase.begin_epoch != expected || phase.end_epoch <= phase.begin_epoch) {
            throw ConfigError("curriculum phases must tile the epochs contiguously without overlap");
        }
        check_weights(phase.weights, n_buckets);
        expected = phase.end_epoch;
    }
    if (expected != epochs) {
        throw ConfigError("curriculum schedule covers " + std::to_string(expected) +
                          " epochs, training runs " + std::to_string(epochs));
    }
}

CurriculumSchedule default_schedule(std::size_t n_buckets, std::size_t epochs) {
    if (n_buckets == 0) {
        throw ConfigError("n_buckets must be >= 1");
    }
    if (epochs == 0) {
        throw ConfigError("epochs must be >= 1");
    }
    CurriculumSchedule schedule;
    for (std::size_t p = 0; p < kThreeBucketProfile.size(); ++p) {
        const std::size_t begin = (p * epochs + 2) / 3;
        const std::size_t end = ((p + 1) * epochs + 2) / 3;
        if (begin == end) {
            continue;
        }
        std::vector<double> weights;
        const auto& profile = kThreeBucketProfile[p];
        if (n_buckets == 3) {
            weights.assign(profile.begin(), profile.end());
        } else {
            double sum = 0.0;
            for (std::size_t b = 0; b < n_buckets; ++b) {
                const double centre = (static_cast<double>(b) + 0.5) / static_cast<double>(n_buckets);
                weights.push_back(resample_profile(profile, centre));
                sum += weights.back();
            }
            for (double& w : weights) {
                w /= sum;
            }
        }
        schedule.phases.push_back(CurriculumPhase{begin, end, std::move(weights)});
    }
    return schedule;
}

const std::vector<double>& mixture_for_epoch(const CurriculumSchedule& schedule,
                                             std::size_t epoch) {
    for (const auto& phase : schedule.phases) {
        if (epoch >= phase.begin_epoch && epoch < phase.end_epoch) {
            return phase.weights;
        }
    }
    throw ConfigError("epoch " + std::to_string(epoch) + " is not covered by the schedule");
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights,
                                   std::mt19937_64& rng) {
    const std::size_t n = weights.size();
    std::vector<std::size_t> quotas(n, 0);
    if (total == 0 || n == 0) {
        return quotas;
    }
    std::vector<double> fractions(n, 0.0);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double exact = weights[i] * static_cast<double>(total);
        const double whole = std::floor(exact + kWeightTolerance);
        quotas[i] = static_cast<std::size_t>(whole);
        fractions[i] = std::max(0.0, exact - whole);
        assigned += quotas[i];
    }
    if (assigned >= total) {
        // Only reachable through rounding slack; trim from the largest quota.
        while (assigned > total) {
            auto it = std::max_element(quotas.begin(), quotas.end());
            --*it;
            --assigned;
        }
        return quotas;
    }

    const std::size_t leftover = total - assigned;
    const double frac_sum = std::accumulate(fractions.begin(), fractions.end(), 0.0);
    if (frac_sum <= 0.0) {
        for (std::size_t j = 0; j < leftover; ++j) {
            ++quotas[j % n];
        }
        return quotas;
    }
    for (double& f : fractions) {
        f *= static_cast<double>(leftover) / frac_sum;
    }

    // Systematic sampling: points u, u+1, ..., u+leftover-1 on the cumulative
    // fractional mass. Bucket i receives one extra unit with probability f_i.
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double lo = 0.0;
    std::size_t given = 0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double hi = lo + fractions[i];
        const double below_hi = std::ceil(hi - u);
        const double below_lo = std::ceil(lo - u);
        auto extra = static_cast<std::size_t>(std::max(0.0, below_hi - below_lo));
        extra = std::min(extra, leftover - given);
        quotas[i] += extra;
        given += extra;
        if (fractions[i] > 0.0) {
            last_positive = i;
        }
        lo = hi;
    }
    if (given < leftover) {
        quotas[last_positive] += leftover - given;
    }
    return quotas;
}

NegativeSample sample_negatives(const BucketSet& buckets, std::span<const double> weights,
                                std::size_t n, std::uint64_t seed) {
    const std::size_t nb = buckets.bucket_count();
    check_weights(weights, nb);
    if (n == 0) {
        throw ConfigError("negatives per query must be >= 1");
    }
    if (n > buckets.pool_size()) {
        throw ConfigError("requested " + std::to_string(n) + " negatives from a pool of " +
                          std::to_string(buckets.pool_size()));
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> quotas = apportion(n, weights, rng);
    for (;;) {
        std::size_t overflow = 0;
        for (std::size_t b = 0; b < nb; ++b) {
            const std::size_t cap = buckets.buckets[b].size();
            if (quotas[b] > cap) {
                overflow += quotas[b] - cap;
                quotas[b] = cap;
            }
        }
        if (overflow == 0) {
            break;
        }
        std::vector<double> spare(nb, 0.0);
        double mass = 0.0;
        std::size_t open = 0;
        for (std::size_t b = 0; b < nb; ++b) {
            if (quotas[b] < buckets.buckets[b].size()) {
                spare[b] = weights[b];
                mass += weights[b];
                ++open;
            }
        }
        for (std::size_t b = 0; b < nb; ++b) {
            const bool has_room = quotas[b] < buckets.buckets[b].size();
            if (!has_room) {
                spare[b] = 0.0;
            } else if (mass > 0.0) {
                spare[b] /= mass;
            } else {
                spare[b] = 1.0 / static_cast<double>(open);
            }
        }
        const auto extra = apportion(overflow, spare, rng);
        for (std::size_t b = 0; b < nb; ++b) {
            quotas[b] += extra[b];
        }
    }

    NegativeSample out;
    out.bucket_counts = quotas;
    out.articles.reserve(n);
    for (std::size_t b = 0; b < nb; ++b) {
        if (quotas[b] == 0) {
            continue;
        }
        std::vector<ArticleIndex> members = buckets.buckets[b];
        std::sort(members.begin(), members.end());
        std::sample(members.begin(), members.end(), std::back_inserter(out.articles), quotas[b],
                    rng);
    }
    return out;
}

std::vector<ArticleIndex> sample_uniform(std::span<const ArticleIndex> pool, std::size_t n,
                                         std::uint64_t seed) {
    if (n == 0 || n > pool.size()) {
        throw ConfigError("cannot draw " + std::to_string(n) + " negatives from a pool of " +
                          std::to_string(pool.size()));
    }
    std::mt19937_64 rng(seed);
    std::vector<ArticleIndex> members(pool.begin(), pool.end());
    std::sort(members.begin(), members.end());
    std::vector<ArticleIndex> out;
    out.reserve(n);
    std::sample(members.begin(), members.end(), std::back_inserter(out), n, rng);
    return out;
}

} // namespace sarneg
