#include "sarneg/encoder.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "sarneg/checksum.hpp"
#include "sarneg/errors.hpp"
#include "sarneg/text.hpp"

namespace sarneg {

TokenBag hash_tokens(std::span<const std::string> tokens, std::size_t vocab_size) {
    if (vocab_size == 0 || !std::has_single_bit(vocab_size)) {
        throw ConfigError("vocab_size must be a power of two");
    }
    const std::uint64_t mask = vocab_size - 1;
    TokenBag bag;
    bag.reserve(tokens.size());
    for (const auto& t : tokens) {
        bag.push_back(static_cast<std::uint32_t>(fnv1a64(t) & mask));
    }
    return bag;
}

TokenBag encode_text(std::string_view text, std::size_t vocab_size) {
    return hash_tokens(tokenize(text), vocab_size);
}

template <typename Real>
BasicDualEncoder<Real>::BasicDualEncoder(std::size_t vocab_size, std::size_t dim,
                                         double temperature)
    : vocab_size_(vocab_size), dim_(dim), temperature_(temperature) {
    if (vocab_size == 0 || !std::has_single_bit(vocab_size)) {
        throw ConfigError("vocab_size must be a power of two");
    }
    if (vocab_size > (std::size_t{1} << 31)) {
        throw ConfigError("vocab_size too large");
    }
    if (dim == 0) {
        throw ConfigError("embedding dim must be >= 1");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw ConfigError("temperature must be positive");
    }
    query_table_.assign(vocab_size * dim, Real{0});
    article_table_.assign(vocab_size * dim, Real{0});
}

template <typename Real>
BasicDualEncoder<Real> BasicDualEncoder<Real>::initialized(std::size_t vocab_size, std::size_t dim,
                                                           double temperature, std::uint64_t seed) {
    BasicDualEncoder model(vocab_size, dim, temperature);
    model.seed = seed;
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> init(-bound, bound);
    for (auto& x : model.query_table_) {
        x = static_cast<Real>(init(rng));
    }
    for (auto& x : model.article_table_) {
        x = static_cast<Real>(init(rng));
    }
    return model;
}

template <typename Real>
bool BasicDualEncoder<Real>::all_finite() const {
    auto finite = [](Real x) { return std::isfinite(x); };
    return std::all_of(query_table_.begin(), query_table_.end(), finite) &&
           std::all_of(article_table_.begin(), article_table_.end(), finite);
}

template <typename Real>
std::vector<double> embed(const BasicDualEncoder<Real>& model, std::span<const std::uint32_t> bag,
                          Side side) {
    std::vector<double> out(model.dim(), 0.0);
    if (bag.empty()) {
        return out;
    }
    for (std::uint32_t b : bag) {
        if (b >= model.vocab_size()) {
            throw NotFoundError("token bucket outside the vocabulary");
        }
        const auto r = model.row(side, b);
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] += static_cast<double>(r[j]);
        }
    }
    const double inv = 1.0 / static_cast<double>(bag.size());
    for (double& x : out) {
        x *= inv;
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

template <typename Real>
double relevance(const BasicDualEncoder<Real>& model, std::span<const std::uint32_t> query_bag,
                 std::span<const std::uint32_t> article_bag) {
    return dot(embed(model, query_bag, Side::Query), embed(model, article_bag, Side::Article));
}

namespace {

double log_sum_exp(double first, std::span<const double> rest) {
    double m = first;
    for (double x : rest) {
        m = std::max(m, x);
    }
    double s = std::exp(first - m);
    for (double x : rest) {
        s += std::exp(x - m);
    }
    return m + std::log(s);
}

struct ExampleScores {
    std::vector<double> query;
    std::vector<std::vector<double>> positives;
    std::vector<std::vector<double>> negatives;
    std::vector<double> positive_logits;
    std::vector<double> negative_logits;
};

template <typename Real>
ExampleScores score_example(const BasicDualEncoder<Real>& model, const ContrastiveExample& ex) {
    if (ex.positives.empty()) {
        throw ValidationError("contrastive loss needs at least one positive");
    }
    ExampleScores s;
    const double inv_tau = 1.0 / model.temperature();
    s.query = embed(model, ex.query, Side::Query);
    for (const auto& p : ex.positives) {
        s.positives.push_back(embed(model, p, Side::Article));
        s.positive_logits.push_back(dot(s.query, s.positives.back()) * inv_tau);
    }
    for (const auto& c : ex.negatives) {
        s.negatives.push_back(embed(model, c, Side::Article));
        s.negative_logits.push_back(dot(s.query, s.negatives.back()) * inv_tau);
    }
    return s;
}

void scatter(std::map<std::uint32_t, std::vector<double>>& rows, std::size_t dim,
             std::span<const std::uint32_t> bag, std::span<const double> direction, double scale) {
    if (bag.empty() || scale == 0.0) {
        return;
    }
    const double w = scale / static_cast<double>(bag.size());
    for (std::uint32_t b : bag) {
        auto& row = rows[b];
        if (row.empty()) {
            row.assign(dim, 0.0);
        }
        for (std::size_t j = 0; j < dim; ++j) {
            row[j] += w * direction[j];
        }
    }
}

} // namespace

template <typename Real>
double contrastive_loss(const BasicDualEncoder<Real>& model, const ContrastiveExample& example) {
    const auto s = score_example(model, example);
    double total = 0.0;
    for (double pos : s.positive_logits) {
        total += log_sum_exp(pos, s.negative_logits) - pos;
    }
    return total;
}

double EncoderGradient::at(Side side, std::uint32_t bucket, std::size_t column) const {
    const auto& r = rows(side);
    auto it = r.find(bucket);
    return it == r.end() ? 0.0 : it->second.at(column);
}

template <typename Real>
LossAndGradient loss_gradient(const BasicDualEncoder<Real>& model,
                              std::span<const ContrastiveExample> batch) {
    LossAndGradient out;
    out.gradient.dim = model.dim();
    if (batch.empty()) {
        return out;
    }
    const std::size_t d = model.dim();
    const double inv_tau = 1.0 / model.temperature();
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    for (const auto& ex : batch) {
        const auto s = score_example(model, ex);
        // d loss / d logit, accumulated over every positive's softmax term.
        std::vector<double> pos_coef(s.positive_logits.size(), 0.0);
        std::vector<double> neg_coef(s.negative_logits.size(), 0.0);
        double loss = 0.0;
        for (std::size_t p = 0; p < s.positive_logits.size(); ++p) {
            const double pos = s.positive_logits[p];
            const double lse = log_sum_exp(pos, s.negative_logits);
            loss += lse - pos;
            pos_coef[p] += std::exp(pos - lse) - 1.0;
            for (std::size_t c = 0; c < s.negative_logits.size(); ++c) {
                neg_coef[c] += std::exp(s.negative_logits[c] - lse);
            }
        }
        out.loss += loss * inv_batch;

        std::vector<double> query_dir(d, 0.0);
        auto accumulate = [&](const std::vector<double>& article, double coef,
                              std::span<const std::uint32_t> bag) {
            const double scale = coef * inv_tau * inv_batch;
            for (std::size_t j = 0; j < d; ++j) {
                query_dir[j] += scale * article[j];
            }
            scatter(out.gradient.article_rows, d, bag, s.query, scale);
        };
        for (std::size_t p = 0; p < pos_coef.size(); ++p) {
            accumulate(s.positives[p], pos_coef[p], ex.positives[p]);
        }
        for (std::size_t c = 0; c < neg_coef.size(); ++c) {
            accumulate(s.negatives[c], neg_coef[c], ex.negatives[c]);
        }
        scatter(out.gradient.query_rows, d, ex.query, query_dir, 1.0);
    }
    return out;
}

OptimizerState OptimizerState::for_model(const DualEncoder& model, AdamWConfig config) {
    if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
        throw ConfigError("AdamW betas must lie in [0, 1)");
    }
    if (!(config.epsilon > 0.0) || config.weight_decay < 0.0 || config.peak_lr < 0.0) {
        throw ConfigError("AdamW epsilon must be positive; lr and weight decay non-negative");
    }
    if (config.warmup_fraction < 0.0 || config.warmup_fraction > 1.0) {
        throw ConfigError("warmup fraction must lie in [0, 1]");
    }
    OptimizerState state;
    state.config = config;
    const std::size_t n = model.table(Side::Query).size() + model.table(Side::Article).size();
    state.first_moment.assign(n, 0.0);
    state.second_moment.assign(n, 0.0);
    return state;
}

std::size_t warmup_steps(double warmup_fraction, std::size_t total_steps) {
    return static_cast<std::size_t>(std::ceil(warmup_fraction * static_cast<double>(total_steps) - 1e-9));
}

double learning_rate_at(const AdamWConfig& config, std::size_t global_step, std::size_t total_steps) {
    if (total_steps == 0) {
        throw ConfigError("total_steps must be positive");
    }
    const std::size_t warmup = warmup_steps(config.warmup_fraction, total_steps);
    const auto step = static_cast<double>(global_step);
    if (global_step < warmup) {
        return config.peak_lr * step / static_cast<double>(warmup);
    }
    if (global_step >= total_steps) {
        return 0.0;
    }
    const double remaining = static_cast<double>(total_steps - global_step);
    return config.peak_lr * remaining / static_cast<double>(total_steps - warmup);
}

void apply_adamw(DualEncoder& model, OptimizerState& state, const EncoderGradient& gradient,
                 double learning_rate) {
    const auto& cfg = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(cfg.beta1, t);
    const double bias2 = 1.0 - std::pow(cfg.beta2, t);
    const std::size_t d = model.dim();

    std::size_t offset = 0;
    for (Side side : {Side::Query, Side::Article}) {
        auto params = model.table(side);
        const auto& rows = gradient.rows(side);
        auto next_row = rows.begin();
        for (std::size_t r = 0; r < model.vocab_size(); ++r) {
            const double* g = nullptr;
            if (next_row != rows.end() && next_row->first == r) {
                g = next_row->second.data();
                ++next_row;
            }
            for (std::size_t j = 0; j < d; ++j) {
                const std::size_t i = offset + r * d + j;
                const double grad = g ? g[j] : 0.0;
                double p = static_cast<double>(params[r * d + j]);
                p -= learning_rate * cfg.weight_decay * p;
                double& m = state.first_moment[i];
                double& v = state.second_moment[i];
                m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
                v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
                const double m_hat = m / bias1;
                const double v_hat = v / bias2;
                p -= learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
                params[r * d + j] = static_cast<float>(p);
            }
        }
        offset += params.size();
    }
}

StepResult train_step(DualEncoder& model, OptimizerState& state,
                      std::span<const ContrastiveExample> batch, std::size_t global_step,
                      std::size_t total_steps) {
    StepResult result;
    result.learning_rate = learning_rate_at(state.config, global_step, total_steps);
    auto lg = loss_gradient(model, batch);
    result.loss = lg.loss;
    apply_adamw(model, state, lg.gradient, result.learning_rate);
    model.step = state.step;
    return result;
}

EmbeddingMatrix embed_all(const DualEncoder& model, std::span<const TokenBag> bags, Side side) {
    EmbeddingMatrix m;
    m.dim = model.dim();
    m.values.reserve(bags.size() * m.dim);
    for (const auto& bag : bags) {
        const auto e = embed(model, bag, side);
        m.values.insert(m.values.end(), e.begin(), e.end());
    }
    return m;
}

namespace {

DifficultyRanking rank_by_scores(const QueryExample& query, std::span<const ArticleIndex> pool,
                                 std::span<const double> query_embedding,
                                 const auto& article_embedding) {
    struct Scored {
        ArticleIndex article;
        double score;
    };
    std::vector<Scored> scored;
    scored.reserve(pool.size());
    for (ArticleIndex a : pool) {
        if (std::binary_search(query.positives.begin(), query.positives.end(), a)) {
            throw ValidationError("negative pool for " + query.id + " contains a positive");
        }
        scored.push_back(Scored{a, dot(query_embedding, article_embedding(a))});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
        return x.score != y.score ? x.score > y.score : x.article < y.article;
    });
    DifficultyRanking out;
    out.query_id = query.id;
    out.source = RankingSource::SemanticDynamic;
    out.order.reserve(scored.size());
    for (const auto& s : scored) {
        out.order.push_back(s.article);
    }
    return out;
}

} // namespace

DifficultyRanking rank_negatives_dynamic(const DualEncoder& model,
                                         std::span<const std::uint32_t> query_bag,
                                         const QueryExample& query,
                                         std::span<const ArticleIndex> pool,
                                         std::span<const TokenBag> article_bags) {
    const auto q = embed(model, query_bag, Side::Query);
    return rank_by_scores(query, pool, q, [&](ArticleIndex a) {
        return embed(model, article_bags[a], Side::Article);
    });
}

std::vector<DifficultyRanking> refresh_rankings(const DualEncoder& model,
                                                std::span<const QueryExample> queries,
                                                std::span<const TokenBag> query_bags,
                                                std::span<const TokenBag> article_bags,
                                                std::size_t threads) {
    if (query_bags.size() != queries.size()) {
        throw ValidationError("refresh_rankings: one token bag per query required");
    }
    const auto articles = embed_all(model, article_bags, Side::Article);
    std::vector<DifficultyRanking> out(queries.size());

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto pool = negative_pool(article_bags.size(), queries[i].positives);
            const auto q = embed(model, query_bags[i], Side::Query);
            out[i] = rank_by_scores(queries[i], pool, q,
                                    [&](ArticleIndex a) { return articles.row(a); });
        }
    };

    threads = std::max<std::size_t>(1, std::min(threads, queries.size()));
    if (threads == 1) {
        work(0, queries.size());
        return out;
    }
    std::vector<std::jthread> workers;
    const std::size_t chunk = (queries.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(queries.size(), begin + chunk);
        if (begin < end) {
            workers.emplace_back(work, begin, end);
        }
    }
    workers.clear();  // joins
    return out;
}

namespace {

constexpr std::string_view kCheckpointMagic = "sarneg-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_le32(std::ostream& out, std::span<const float> values) {
    std::vector<char> buf(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(values[i]);
        for (int k = 0; k < 4; ++k) {
            buf[i * 4 + static_cast<std::size_t>(k)] = static_cast<char>((bits >> (8 * k)) & 0xFF);
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void read_le32(std::istream& in, std::span<float> values) {
    std::vector<unsigned char> buf(values.size() * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
        throw ValidationError("checkpoint truncated");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) {
            bits |= static_cast<std::uint32_t>(buf[i * 4 + static_cast<std::size_t>(k)]) << (8 * k);
        }
        values[i] = std::bit_cast<float>(bits);
    }
}

std::string format_double(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, end);
}

} // namespace

void save_checkpoint(std::ostream& out, const DualEncoder& model) {
    out << kCheckpointMagic << ' ' << kCheckpointVersion << " vocab=" << model.vocab_size()
        << " dim=" << model.dim() << " tau=" << format_double(model.temperature())
        << " seed=" << model.seed << " step=" << model.step << " dtype=f32le\n";
    write_le32(out, model.table(Side::Query));
    write_le32(out, model.table(Side::Article));
    if (!out) {
        throw ValidationError("failed to write checkpoint");
    }
}

DualEncoder load_checkpoint(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) {
        throw ValidationError("empty checkpoint");
    }
    std::istringstream fields(header);
    std::string magic;
    int version = 0;
    fields >> magic >> version;
    if (magic != kCheckpointMagic) {
        throw ValidationError("not a sarneg checkpoint");
    }
    if (version != kCheckpointVersion) {
        throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    }
    std::map<std::string, std::string> kv;
    std::string item;
    while (fields >> item) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("malformed checkpoint header field " + item);
        }
        kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    for (const char* key : {"vocab", "dim", "tau", "seed", "step", "dtype"}) {
        if (!kv.contains(key)) {
            throw ValidationError(std::string("checkpoint header missing ") + key);
        }
    }
    if (kv["dtype"] != "f32le") {
        throw ValidationError("unsupported checkpoint dtype " + kv["dtype"]);
    }
    auto parse_u64 = [](const std::string& s) {
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) {
            throw ValidationError("malformed checkpoint header value " + s);
        }
        return v;
    };
    double tau = 0.0;
    {
        const auto& s = kv["tau"];
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), tau);
        if (ec != std::errc{} || ptr != s.data() + s.size()) {
            throw ValidationError("malformed checkpoint temperature " + s);
        }
    }
    DualEncoder model(parse_u64(kv["vocab"]), parse_u64(kv["dim"]), tau);
    model.seed = parse_u64(kv["seed"]);
    model.step = parse_u64(kv["step"]);
    read_le32(in, model.table(Side::Query));
    read_le32(in, model.table(Side::Article));
    return model;
}

void save_checkpoint(const std::filesystem::path& path, const DualEncoder& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw NotFoundError("cannot write " + path.string());
    }
    save_checkpoint(out, model);
}

DualEncoder load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw NotFoundError("cannot open " + path.string());
    }
    return load_checkpoint(in);
}

template class BasicDualEncoder<float>;
template class BasicDualEncoder<double>;

template std::vector<double> embed(const BasicDualEncoder<float>&, std::span<const std::uint32_t>, Side);
template std::vector<double> embed(const BasicDualEncoder<double>&, std::span<const std::uint32_t>, Side);
template double relevance(const BasicDualEncoder<float>&, std::span<const std::uint32_t>,
                          std::span<const std::uint32_t>);
template double relevance(const BasicDualEncoder<double>&, std::span<const std::uint32_t>,
                          std::span<const std::uint32_t>);
template double contrastive_loss(const BasicDualEncoder<float>&, const ContrastiveExample&);
template double contrastive_loss(const BasicDualEncoder<double>&, const ContrastiveExample&);
template LossAndGradient loss_gradient(const BasicDualEncoder<float>&,
                                       std::span<const ContrastiveExample>);
template LossAndGradient loss_gradient(const BasicDualEncoder<double>&,
                                       std::span<const ContrastiveExample>);

} // namespace sarneg
