#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "sarneg/curriculum.hpp"
#include "sarneg/errors.hpp"

using namespace sarneg;

namespace {

// Ranking whose rank r (1-based) holds article 100 + r.
DifficultyRanking ranked(std::size_t n) {
    DifficultyRanking r{"q", RankingSource::Fused, {}};
    for (std::size_t i = 1; i <= n; ++i) {
        r.order.push_back(static_cast<ArticleIndex>(100 + i));
    }
    return r;
}

BucketSet equal_buckets(std::size_t per_bucket, std::size_t count) {
    return bucketize(ranked(per_bucket * count), count);
}

std::vector<ArticleIndex> sorted(std::vector<ArticleIndex> v) {
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

TEST_CASE("bucketize: chunking and remainder rule") {
    const auto b9 = bucketize(ranked(9), 3);
    REQUIRE(b9.bucket_count() == 3);
    CHECK(sorted(b9.buckets[0]) == std::vector<ArticleIndex>{107, 108, 109});
    CHECK(sorted(b9.buckets[1]) == std::vector<ArticleIndex>{104, 105, 106});
    CHECK(sorted(b9.buckets[2]) == std::vector<ArticleIndex>{101, 102, 103});

    const auto b10 = bucketize(ranked(10), 3);
    CHECK(b10.buckets[0].size() == 4);
    CHECK(b10.buckets[1].size() == 3);
    CHECK(b10.buckets[2].size() == 3);
    CHECK(sorted(b10.buckets[0]) == std::vector<ArticleIndex>{107, 108, 109, 110});

    const auto one = bucketize(ranked(5), 1);
    CHECK(sorted(one.buckets[0]) == ranked(5).order);

    CHECK_THROWS_AS(bucketize(ranked(2), 3), ConfigError);
    CHECK_THROWS_AS(bucketize(ranked(2), 0), ConfigError);
}

TEST_CASE("bucketize: partition property") {
    for (std::size_t n = 1; n <= 40; ++n) {
        for (std::size_t k = 1; k <= n; k += 3) {
            const auto b = bucketize(ranked(n), k);
            std::set<ArticleIndex> seen;
            std::size_t smallest = SIZE_MAX, largest = 0;
            for (const auto& bucket : b.buckets) {
                smallest = std::min(smallest, bucket.size());
                largest = std::max(largest, bucket.size());
                seen.insert(bucket.begin(), bucket.end());
            }
            CHECK(seen.size() == n);
            CHECK(b.pool_size() == n);
            CHECK(largest - smallest <= 1);
        }
    }
}

TEST_CASE("default schedule: three-bucket phase mixtures") {
    const auto s = default_schedule(3, 15);
    s.validate(15, 3);
    CHECK(mixture_for_epoch(s, 0) == std::vector<double>{0.7, 0.2, 0.1});
    CHECK(mixture_for_epoch(s, 4) == std::vector<double>{0.7, 0.2, 0.1});
    CHECK(mixture_for_epoch(s, 5) == std::vector<double>{0.15, 0.7, 0.15});
    CHECK(mixture_for_epoch(s, 7) == std::vector<double>{0.15, 0.7, 0.15});
    CHECK(mixture_for_epoch(s, 10) == std::vector<double>{0.1, 0.2, 0.7});
    CHECK(mixture_for_epoch(s, 14) == std::vector<double>{0.1, 0.2, 0.7});
    CHECK_THROWS_AS(mixture_for_epoch(s, 15), ConfigError);
}

TEST_CASE("default schedule: other bucket counts and epoch counts") {
    for (std::size_t n = 1; n <= 6; ++n) {
        for (std::size_t epochs : {1, 2, 3, 7, 15}) {
            const auto s = default_schedule(n, epochs);
            CHECK_NOTHROW(s.validate(epochs, n));
        }
    }
    CHECK(mixture_for_epoch(default_schedule(1, 15), 3) == std::vector<double>{1.0});
    // Five buckets: mass moves from the easy end to the difficult end.
    const auto s5 = default_schedule(5, 15);
    const auto& first = mixture_for_epoch(s5, 0);
    const auto& last = mixture_for_epoch(s5, 14);
    CHECK(first.front() > first.back());
    CHECK(last.back() > last.front());
}

TEST_CASE("schedule validation") {
    CurriculumSchedule gap{{{0, 5, {1.0}}, {6, 10, {1.0}}}};
    CHECK_THROWS_AS(gap.validate(10, 1), ConfigError);
    CurriculumSchedule overlap{{{0, 6, {1.0}}, {5, 10, {1.0}}}};
    CHECK_THROWS_AS(overlap.validate(10, 1), ConfigError);
    CurriculumSchedule short_cover{{{0, 5, {1.0}}}};
    CHECK_THROWS_AS(short_cover.validate(10, 1), ConfigError);
    CurriculumSchedule bad_sum{{{0, 10, {0.5, 0.4}}}};
    CHECK_THROWS_AS(bad_sum.validate(10, 2), ConfigError);
    CurriculumSchedule negative{{{0, 10, {1.5, -0.5}}}};
    CHECK_THROWS_AS(negative.validate(10, 2), ConfigError);
    CurriculumSchedule wrong_count{{{0, 10, {1.0}}}};
    CHECK_THROWS_AS(wrong_count.validate(10, 2), ConfigError);
    CurriculumSchedule ok{{{0, 4, {0.5, 0.5}}, {4, 10, {0.0, 1.0}}}};
    CHECK_NOTHROW(ok.validate(10, 2));
}

TEST_CASE("apportion: integral quotas are exact and consume no randomness") {
    std::mt19937_64 rng(1);
    const std::vector<double> w = {0.7, 0.2, 0.1};
    CHECK(apportion(10, w, rng) == std::vector<std::size_t>{7, 2, 1});
    std::mt19937_64 fresh(1);
    CHECK(rng() == fresh());
}

TEST_CASE("apportion: expectation equals total * weight") {
    std::mt19937_64 rng(17);
    const std::vector<double> w = {0.15, 0.7, 0.15};
    std::vector<double> mean(3, 0.0);
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
        const auto q = apportion(10, w, rng);
        CHECK(std::accumulate(q.begin(), q.end(), std::size_t{0}) == 10);
        CHECK(q[1] == 7);
        CHECK((q[0] == 1 || q[0] == 2));
        for (int i = 0; i < 3; ++i) {
            mean[static_cast<std::size_t>(i)] += static_cast<double>(q[static_cast<std::size_t>(i)]);
        }
    }
    CHECK(mean[0] / trials == doctest::Approx(1.5).epsilon(0.02));
    CHECK(mean[2] / trials == doctest::Approx(1.5).epsilon(0.02));
}

TEST_CASE("sample_negatives: quotas, overflow and reproducibility") {
    const auto buckets = equal_buckets(100, 3);
    const std::vector<double> w = {0.7, 0.2, 0.1};
    const auto s = sample_negatives(buckets, w, 10, 5);
    CHECK(s.bucket_counts == std::vector<std::size_t>{7, 2, 1});
    CHECK(s.articles.size() == 10);
    const auto again = sample_negatives(buckets, w, 10, 5);
    CHECK(again.articles == s.articles);
    CHECK(sample_negatives(buckets, w, 10, 6).articles != s.articles);

    // Overflow: bucket 1 holds 3; the 2 surplus units go to buckets 2 and 3
    // with equal fallback weights, one each.
    const auto small = equal_buckets(3, 3);
    const std::vector<double> all_easy = {1.0, 0.0, 0.0};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto o = sample_negatives(small, all_easy, 5, seed);
        CHECK(o.bucket_counts == std::vector<std::size_t>{3, 1, 1});
    }
    // Renormalised weights over the buckets with room.
    const std::vector<double> mostly_easy = {0.8, 0.0, 0.2};
    CHECK(sample_negatives(small, mostly_easy, 5, 1).bucket_counts ==
          std::vector<std::size_t>{3, 0, 2});

    CHECK_THROWS_AS(sample_negatives(small, all_easy, 10, 1), ConfigError);
    CHECK_THROWS_AS(sample_negatives(small, all_easy, 0, 1), ConfigError);
    const std::vector<double> two = {0.5, 0.5};
    CHECK_THROWS_AS(sample_negatives(small, two, 2, 1), ConfigError);
}

TEST_CASE("sample_negatives: unique ids drawn from the right buckets") {
    const auto buckets = equal_buckets(7, 3);
    const std::vector<double> w = {0.2, 0.3, 0.5};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto s = sample_negatives(buckets, w, 12, seed);
        std::set<ArticleIndex> ids(s.articles.begin(), s.articles.end());
        CHECK(ids.size() == 12);
        std::size_t offset = 0;
        for (std::size_t b = 0; b < 3; ++b) {
            std::set<ArticleIndex> members(buckets.buckets[b].begin(), buckets.buckets[b].end());
            for (std::size_t i = 0; i < s.bucket_counts[b]; ++i) {
                CHECK(members.count(s.articles[offset + i]) == 1);
            }
            offset += s.bucket_counts[b];
        }
    }
}

TEST_CASE("sample_negatives: Monte Carlo mixture proportions") {
    const auto buckets = equal_buckets(100, 3);
    const std::vector<std::vector<double>> mixtures = {
        {0.7, 0.2, 0.1}, {0.15, 0.7, 0.15}, {0.1, 0.2, 0.7}, {0.33, 0.33, 0.34}};
    for (const auto& w : mixtures) {
        std::vector<double> counts(3, 0.0);
        double draws = 0.0;
        for (std::uint64_t seed = 0; seed < 1000; ++seed) {
            const auto s = sample_negatives(buckets, w, 10, seed * 7919 + 3);
            for (std::size_t b = 0; b < 3; ++b) {
                counts[b] += static_cast<double>(s.bucket_counts[b]);
            }
            draws += 10.0;
        }
        for (std::size_t b = 0; b < 3; ++b) {
            CHECK(std::abs(counts[b] / draws - w[b]) <= 0.02);
        }
    }
}

TEST_CASE("sample_uniform matches a one-bucket draw") {
    const auto r = ranked(40);
    const auto one = bucketize(r, 1);
    const std::vector<double> w = {1.0};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        CHECK(sorted(sample_negatives(one, w, 6, seed).articles) ==
              sorted(sample_uniform(r.order, 6, seed)));
    }
    CHECK_THROWS_AS(sample_uniform(r.order, 41, 1), ConfigError);
}
