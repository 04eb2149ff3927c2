#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "sarneg/checksum.hpp"
#include "sarneg/encoder.hpp"
#include "sarneg/errors.hpp"

using namespace sarneg;

namespace {

using Bag = std::vector<std::uint32_t>;

Bag random_bag(std::mt19937_64& rng, std::size_t vocab, std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> len(1, max_len);
    std::uniform_int_distribution<std::uint32_t> tok(0, static_cast<std::uint32_t>(vocab - 1));
    Bag b(len(rng));
    for (auto& t : b) {
        t = tok(rng);
    }
    return b;
}

struct Instance {
    Bag query;
    std::vector<Bag> positives;
    std::vector<Bag> negatives;

    ContrastiveExample view() const {
        ContrastiveExample ex;
        ex.query = query;
        for (const auto& p : positives) {
            ex.positives.emplace_back(p);
        }
        for (const auto& n : negatives) {
            ex.negatives.emplace_back(n);
        }
        return ex;
    }
};

Instance random_instance(std::mt19937_64& rng, std::size_t vocab, std::size_t n_pos, std::size_t n_neg) {
    Instance in;
    in.query = random_bag(rng, vocab, 3);
    for (std::size_t i = 0; i < n_pos; ++i) {
        in.positives.push_back(random_bag(rng, vocab, 3));
    }
    for (std::size_t i = 0; i < n_neg; ++i) {
        in.negatives.push_back(random_bag(rng, vocab, 3));
    }
    return in;
}

// Loss written with plain exponentials, no shift.
template <typename Real>
double naive_loss(const BasicDualEncoder<Real>& m, const ContrastiveExample& ex) {
    double total = 0.0;
    for (const auto& p : ex.positives) {
        const double sp = std::exp(relevance(m, ex.query, p) / m.temperature());
        double denom = sp;
        for (const auto& c : ex.negatives) {
            denom += std::exp(relevance(m, ex.query, c) / m.temperature());
        }
        total += -std::log(sp / denom);
    }
    return total;
}

double batch_loss(const BasicDualEncoder<double>& m, const std::vector<Instance>& batch) {
    double s = 0.0;
    for (const auto& in : batch) {
        s += contrastive_loss(m, in.view());
    }
    return s / static_cast<double>(batch.size());
}

std::vector<ContrastiveExample> views(const std::vector<Instance>& batch) {
    std::vector<ContrastiveExample> out;
    for (const auto& b : batch) {
        out.push_back(b.view());
    }
    return out;
}

} // namespace

TEST_CASE("hash_tokens: FNV-1a buckets") {
    const std::vector<std::string> toks = {"a", "tax", "a"};
    const auto bag = hash_tokens(toks, 1 << 20);
    REQUIRE(bag.size() == 3);
    // Published FNV-1a 64 test vector for "a".
    CHECK(bag[0] == (0xaf63dc4c8601ec8cULL & ((1 << 20) - 1)));
    CHECK(bag[0] == bag[2]);
    CHECK(hash_tokens(std::vector<std::string>{}, 16).empty());
    CHECK_THROWS_AS(hash_tokens(toks, 100), ConfigError);
}

TEST_CASE("hash_tokens: spread over buckets") {
    std::mt19937_64 rng(1);
    std::vector<std::string> toks;
    std::uniform_int_distribution<int> ch('a', 'z');
    for (int i = 0; i < 10000; ++i) {
        std::string t;
        for (int k = 0; k < 8; ++k) {
            t += static_cast<char>(ch(rng));
        }
        toks.push_back(t);
    }
    std::map<std::uint32_t, int> counts;
    for (auto b : hash_tokens(toks, 32768)) {
        ++counts[b];
    }
    int largest = 0;
    for (const auto& [b, c] : counts) {
        largest = std::max(largest, c);
    }
    CHECK(largest <= 100);
}

TEST_CASE("embed and relevance") {
    auto m = BasicDualEncoder<double>::initialized(16, 4, 0.05, 3);
    const Bag none;
    const Bag one = {5};
    const Bag two = {5, 9};
    CHECK(embed(m, none, Side::Query) == std::vector<double>(4, 0.0));
    const auto e1 = embed(m, one, Side::Article);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(e1[j] == m.row(Side::Article, 5)[j]);
    }
    const auto e2 = embed(m, two, Side::Article);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(e2[j] == doctest::Approx((m.row(Side::Article, 5)[j] + m.row(Side::Article, 9)[j]) / 2));
    }
    CHECK(relevance(m, none, two) == 0.0);
    CHECK(relevance(m, two, none) == 0.0);

    // Same rows on both sides: f = |e|^2.
    for (std::size_t j = 0; j < 4; ++j) {
        m.row(Side::Query, 5)[j] = m.row(Side::Article, 5)[j];
    }
    double sq = 0.0;
    for (double x : e1) {
        sq += x * x;
    }
    CHECK(relevance(m, one, one) == doctest::Approx(sq).epsilon(1e-14));

    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        const auto q = random_bag(rng, 16, 4);
        const auto a = random_bag(rng, 16, 4);
        double oracle = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            double qj = 0.0, aj = 0.0;
            for (auto b : q) {
                qj += m.row(Side::Query, b)[j];
            }
            for (auto b : a) {
                aj += m.row(Side::Article, b)[j];
            }
            oracle += (qj / static_cast<double>(q.size())) * (aj / static_cast<double>(a.size()));
        }
        CHECK(std::abs(relevance(m, q, a) - oracle) <= 1e-12);
    }
}

TEST_CASE("loss: uniform scores give ln(n + 1)") {
    const BasicDualEncoder<double> zero(16, 4, 0.05);
    for (std::size_t n : {1, 7, 99}) {
        Instance in;
        in.query = {1};
        in.positives = {{2}};
        in.negatives.assign(n, Bag{3});
        CHECK(std::abs(contrastive_loss(zero, in.view()) - std::log(static_cast<double>(n + 1))) <= 1e-12);
    }
}

TEST_CASE("loss: zero negatives, naive oracle, errors") {
    std::mt19937_64 rng(21);
    const auto m = BasicDualEncoder<double>::initialized(16, 4, 0.5, 8);
    auto in = random_instance(rng, 16, 2, 0);
    CHECK(contrastive_loss(m, in.view()) == 0.0);
    for (int t = 0; t < 50; ++t) {
        const auto r = random_instance(rng, 16, 1 + t % 3, t % 7);
        CHECK(std::abs(contrastive_loss(m, r.view()) - naive_loss(m, r.view())) <= 1e-9);
        CHECK(contrastive_loss(m, r.view()) >= 0.0);
    }
    in.positives.clear();
    CHECK_THROWS_AS(contrastive_loss(m, in.view()), ValidationError);
}

TEST_CASE("loss: large scores stay finite") {
    BasicDualEncoder<double> m(16, 1, 0.05);
    m.row(Side::Query, 0)[0] = 100.0;
    m.row(Side::Article, 1)[0] = 100.0;   // f = 1e4
    m.row(Side::Article, 2)[0] = -100.0;  // f = -1e4
    m.row(Side::Article, 3)[0] = 99.0;
    Instance in{{0}, {{2}}, {{1}, {3}}};
    const double l = contrastive_loss(m, in.view());
    CHECK(std::isfinite(l));
    CHECK(l == doctest::Approx((1e4 + 1e4) / 0.05));
    const auto g = loss_gradient(m, std::vector<ContrastiveExample>{in.view()});
    CHECK(std::isfinite(g.gradient.at(Side::Query, 0, 0)));
    CHECK(std::isfinite(g.gradient.at(Side::Article, 1, 0)));
}

TEST_CASE("gradient: central finite differences") {
    std::mt19937_64 rng(2718);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        auto m = BasicDualEncoder<double>::initialized(16, 4, 0.05, 100 + static_cast<std::uint64_t>(trial));
        std::vector<Instance> batch = {random_instance(rng, 16, 2, 6), random_instance(rng, 16, 1, 3)};
        const auto analytic = loss_gradient(m, views(batch));
        CHECK(std::abs(analytic.loss - batch_loss(m, batch)) <= 1e-12);
        for (Side side : {Side::Query, Side::Article}) {
            auto table = m.table(side);
            for (std::size_t i = 0; i < table.size(); ++i) {
                const double orig = table[i];
                table[i] = orig + h;
                const double up = batch_loss(m, batch);
                table[i] = orig - h;
                const double down = batch_loss(m, batch);
                table[i] = orig;
                const double numeric = (up - down) / (2 * h);
                const double a = analytic.gradient.at(side, static_cast<std::uint32_t>(i / 4), i % 4);
                const double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
                worst = std::max(worst, std::abs(a - numeric) / scale);
            }
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("gradient: untouched rows are absent") {
    const auto m = BasicDualEncoder<double>::initialized(16, 4, 0.05, 1);
    Instance in{{1, 2}, {{3}}, {{4, 5}}};
    const auto g = loss_gradient(m, std::vector<ContrastiveExample>{in.view()});
    CHECK(g.gradient.query_rows.size() == 2);
    CHECK(g.gradient.article_rows.size() == 3);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(g.gradient.at(Side::Query, 7, j) == 0.0);
        CHECK(g.gradient.at(Side::Article, 1, j) == 0.0);
    }
}

TEST_CASE("gradient: high-temperature limit") {
    // As tau grows the softmax flattens; tau * grad tends to the gradient of
    // -n/(n+1) f(q,p) + 1/(n+1) sum_c f(q,c).
    const double tau = 1e6;
    const auto base = BasicDualEncoder<double>::initialized(16, 4, 1.0, 4);
    BasicDualEncoder<double> m(16, 4, tau);
    for (Side s : {Side::Query, Side::Article}) {
        std::copy(base.table(s).begin(), base.table(s).end(), m.table(s).begin());
    }
    Instance in{{1}, {{2}}, {{3}, {4}, {5}}};
    const double n = 3.0;
    const auto g = loss_gradient(m, std::vector<ContrastiveExample>{in.view()});
    const auto q = embed(m, in.query, Side::Query);
    const auto p = embed(m, in.positives[0], Side::Article);
    for (std::size_t j = 0; j < 4; ++j) {
        double expected_q = -n / (n + 1) * p[j];
        for (const auto& c : in.negatives) {
            expected_q += embed(m, c, Side::Article)[j] / (n + 1);
        }
        CHECK(tau * g.gradient.at(Side::Query, 1, j) == doctest::Approx(expected_q).epsilon(1e-5));
        CHECK(tau * g.gradient.at(Side::Article, 2, j) == doctest::Approx(-n / (n + 1) * q[j]).epsilon(1e-5));
        CHECK(tau * g.gradient.at(Side::Article, 4, j) == doctest::Approx(q[j] / (n + 1)).epsilon(1e-5));
    }
}

TEST_CASE("learning-rate schedule") {
    AdamWConfig cfg;
    CHECK(warmup_steps(0.05, 100) == 5);
    CHECK(learning_rate_at(cfg, 0, 100) == 0.0);
    CHECK(learning_rate_at(cfg, 5, 100) == doctest::Approx(2e-5));
    CHECK(learning_rate_at(cfg, 2, 100) == doctest::Approx(2e-5 * 2 / 5));
    CHECK(learning_rate_at(cfg, 50, 100) == doctest::Approx(2e-5 * 50 / 95));
    CHECK(learning_rate_at(cfg, 100, 100) == 0.0);
    CHECK_THROWS_AS(learning_rate_at(cfg, 0, 0), ConfigError);
    cfg.warmup_fraction = 0.0;
    CHECK(learning_rate_at(cfg, 0, 10) == doctest::Approx(2e-5));
}

TEST_CASE("AdamW: first update against hand arithmetic") {
    DualEncoder m(16, 2, 0.05);
    m.row(Side::Query, 3)[0] = 0.5f;
    m.row(Side::Article, 7)[1] = -0.25f;
    AdamWConfig cfg;
    cfg.weight_decay = 0.1;
    auto state = OptimizerState::for_model(m, cfg);
    EncoderGradient g;
    g.dim = 2;
    g.query_rows[3] = {0.2, 0.0};
    const double lr = 0.01;
    apply_adamw(m, state, g, lr);
    // m_hat = g, v_hat = g^2 after one step.
    const double p0 = 0.5 - lr * 0.1 * 0.5;
    const double expected = p0 - lr * 0.2 / (0.2 + 1e-7);
    CHECK(m.row(Side::Query, 3)[0] == static_cast<float>(expected));
    // No gradient: decay only.
    CHECK(m.row(Side::Article, 7)[1] == static_cast<float>(-0.25 - lr * 0.1 * -0.25));
    CHECK(state.step == 1);
}

TEST_CASE("train_step: zero learning rate at step 0 leaves parameters unchanged") {
    auto m = DualEncoder::initialized(64, 8, 0.05, 9);
    const auto before = m;
    auto state = OptimizerState::for_model(m, AdamWConfig{});
    Instance in{{1, 2}, {{3}}, {{4}, {5}}};
    const auto r = train_step(m, state, std::vector<ContrastiveExample>{in.view()}, 0, 100);
    CHECK(r.learning_rate == 0.0);
    CHECK(m.table(Side::Query)[8] == before.table(Side::Query)[8]);
    CHECK(std::equal(m.table(Side::Article).begin(), m.table(Side::Article).end(),
                     before.table(Side::Article).begin()));
}

TEST_CASE("train_step: bit-identical after 100 steps") {
    auto run = [] {
        auto m = DualEncoder::initialized(256, 8, 0.05, 77);
        AdamWConfig cfg;
        cfg.peak_lr = 0.01;
        auto state = OptimizerState::for_model(m, cfg);
        std::mt19937_64 rng(3);
        std::vector<double> losses;
        for (std::size_t s = 0; s < 100; ++s) {
            std::vector<Instance> batch = {random_instance(rng, 256, 1, 4), random_instance(rng, 256, 2, 4)};
            losses.push_back(train_step(m, state, views(batch), s, 100).loss);
        }
        return std::make_pair(m, losses);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    CHECK(a.first.step == 100);
}

TEST_CASE("dynamic ranking: ties, singletons and brute force") {
    const DualEncoder zero(64, 4, 0.05);
    std::vector<TokenBag> bags;
    for (std::uint32_t i = 0; i < 200; ++i) {
        bags.push_back({i % 64, (i * 7) % 64});
    }
    const QueryExample q{"q", "?", {0}};
    std::vector<ArticleIndex> pool;
    for (ArticleIndex a = 199; a >= 1; --a) {
        pool.push_back(a);
    }
    const TokenBag qbag = {1, 2};
    const auto tied = rank_negatives_dynamic(zero, qbag, q, pool, bags);
    CHECK(tied.source == RankingSource::SemanticDynamic);
    CHECK(std::is_sorted(tied.order.begin(), tied.order.end()));

    const std::vector<ArticleIndex> one = {17};
    CHECK(rank_negatives_dynamic(zero, qbag, q, one, bags).order == one);
    const std::vector<ArticleIndex> bad = {0};
    CHECK_THROWS_AS(rank_negatives_dynamic(zero, qbag, q, bad, bags), ValidationError);

    const auto m = DualEncoder::initialized(64, 4, 0.05, 6);
    const auto r = rank_negatives_dynamic(m, qbag, q, pool, bags);
    std::vector<std::pair<double, ArticleIndex>> oracle;
    for (auto a : pool) {
        oracle.emplace_back(relevance(m, qbag, bags[a]), a);
    }
    std::sort(oracle.begin(), oracle.end(), [](const auto& x, const auto& y) {
        return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(r.order[i] == oracle[i].second);
    }
}

TEST_CASE("refresh_rankings: matches per-query ranking for any thread count") {
    const auto m = DualEncoder::initialized(128, 8, 0.05, 12);
    std::mt19937_64 rng(4);
    std::vector<TokenBag> bags;
    for (int i = 0; i < 60; ++i) {
        bags.push_back(random_bag(rng, 128, 5));
    }
    std::vector<QueryExample> queries;
    std::vector<TokenBag> qbags;
    for (int i = 0; i < 13; ++i) {
        queries.push_back({"q" + std::to_string(i), "?", {static_cast<ArticleIndex>(i), static_cast<ArticleIndex>(i + 20)}});
        qbags.push_back(random_bag(rng, 128, 4));
    }
    const auto serial = refresh_rankings(m, queries, qbags, bags, 1);
    const auto parallel = refresh_rankings(m, queries, qbags, bags, 4);
    const auto again = refresh_rankings(m, queries, qbags, bags, 1);
    REQUIRE(serial.size() == queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto pool = negative_pool(bags.size(), queries[i].positives);
        const auto direct = rank_negatives_dynamic(m, qbags[i], queries[i], pool, bags);
        CHECK(serial[i].order == direct.order);
        CHECK(parallel[i].order == direct.order);
        CHECK(again[i].order == serial[i].order);
        CHECK(serial[i].query_id == queries[i].id);
    }
}

TEST_CASE("refresh_rankings: an ascent step on f(q, a) moves a to rank 1") {
    auto m = DualEncoder::initialized(256, 16, 0.05, 31);
    std::vector<TokenBag> bags;
    for (std::uint32_t i = 0; i < 40; ++i) {
        bags.push_back({2 * i, 2 * i + 1});
    }
    const QueryExample q{"q", "?", {0}};
    const TokenBag qbag = {200, 201};
    const std::vector<QueryExample> qs = {q};
    const std::vector<TokenBag> qbags = {qbag};
    const auto before = refresh_rankings(m, qs, qbags, bags, 1)[0];
    const ArticleIndex target = before.order.back();

    // Gradient of -f(q, a) with respect to a's rows is -e_q / |bag_a|. One
    // AdamW step moves every coordinate by lr * sign(e_q), raising f(q, a) by
    // lr * |e_q|_1; lr is chosen to clear the current best score by a margin.
    const auto eq = embed(m, qbag, Side::Query);
    double l1 = 0.0;
    for (double x : eq) {
        l1 += std::abs(x);
    }
    const double gap = relevance(m, qbag, bags[before.order.front()]) - relevance(m, qbag, bags[target]);
    EncoderGradient g;
    g.dim = m.dim();
    for (auto b : bags[target]) {
        auto& row = g.article_rows[b];
        for (double x : eq) {
            row.push_back(-x / static_cast<double>(bags[target].size()));
        }
    }
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    auto state = OptimizerState::for_model(m, cfg);
    apply_adamw(m, state, g, 2.0 * gap / l1 + 1e-3);

    const auto after = refresh_rankings(m, qs, qbags, bags, 2)[0];
    CHECK(after.order.front() == target);
    // Nothing else moved.
    std::vector<ArticleIndex> rest_before, rest_after;
    std::copy_if(before.order.begin(), before.order.end(), std::back_inserter(rest_before),
                 [&](ArticleIndex a) { return a != target; });
    std::copy(after.order.begin() + 1, after.order.end(), std::back_inserter(rest_after));
    CHECK(rest_before == rest_after);
}

TEST_CASE("checkpoint: bit-exact round trip and header") {
    auto m = DualEncoder::initialized(64, 3, 0.07, 42);
    m.step = 9;
    m.row(Side::Query, 1)[0] = -0.0f;
    m.row(Side::Article, 2)[2] = std::numeric_limits<float>::denorm_min();
    std::stringstream buf;
    save_checkpoint(buf, m);
    const auto text = buf.str();
    CHECK(text.substr(0, text.find('\n')) ==
          "sarneg-checkpoint 1 vocab=64 dim=3 tau=0.07 seed=42 step=9 dtype=f32le");
    CHECK(text.size() == text.find('\n') + 1 + 2 * 64 * 3 * 4);
    const auto back = load_checkpoint(buf);
    CHECK(back == m);
    CHECK(std::signbit(back.row(Side::Query, 1)[0]));

    std::istringstream truncated(text.substr(0, text.size() - 5));
    CHECK_THROWS_AS(load_checkpoint(truncated), ValidationError);
    std::istringstream wrong("other-format 1\n");
    CHECK_THROWS_AS(load_checkpoint(wrong), ValidationError);
}

TEST_CASE("model construction errors") {
    CHECK_THROWS_AS(DualEncoder(100, 4, 0.05), ConfigError);
    CHECK_THROWS_AS(DualEncoder(64, 0, 0.05), ConfigError);
    CHECK_THROWS_AS(DualEncoder(64, 4, 0.0), ConfigError);
    CHECK(DualEncoder::initialized(64, 4, 0.05, 1).all_finite());
    CHECK(DualEncoder::initialized(64, 4, 0.05, 1) == DualEncoder::initialized(64, 4, 0.05, 1));
}
