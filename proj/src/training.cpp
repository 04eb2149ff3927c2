#include "sarneg/training.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>

#include "sarneg/checksum.hpp"
#include "sarneg/errors.hpp"
#include "sarneg/fusion.hpp"
#include "sarneg/structure.hpp"

namespace sarneg {

namespace {

constexpr std::uint64_t kSampleStream = fnv1a64("negatives");
constexpr std::uint64_t kShuffleStream = fnv1a64("batches");

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void check_pools(const ExperimentConfig& config, const ExperimentData& data) {
    if (data.train.empty()) {
        throw ConfigError("no training queries");
    }
    const std::size_t need = std::max(config.sampling.n_buckets, config.sampling.negatives_per_query);
    for (const auto& q : data.train) {
        const std::size_t pool = data.corpus.size() - q.positives.size();
        if (pool < need) {
            throw ConfigError("query " + q.id + " has " + std::to_string(pool) +
                              " candidate negatives; need at least " + std::to_string(need));
        }
    }
}

// Difficulty bucket of every article in the ranking, indexed by ArticleIndex.
std::vector<std::uint32_t> bucket_lookup(const BucketSet& buckets, std::size_t corpus_size) {
    std::vector<std::uint32_t> lookup(corpus_size, std::numeric_limits<std::uint32_t>::max());
    for (std::size_t b = 0; b < buckets.bucket_count(); ++b) {
        for (ArticleIndex a : buckets.buckets[b]) {
            lookup[a] = static_cast<std::uint32_t>(b);
        }
    }
    return lookup;
}

std::optional<std::size_t> recall_k(std::string_view metric) {
    constexpr std::string_view prefix = "recall@";
    if (metric.substr(0, prefix.size()) != prefix) {
        return std::nullopt;
    }
    return std::stoul(std::string(metric.substr(prefix.size())));
}

} // namespace

ExperimentData make_experiment_data(const ExperimentConfig& config, CorpusStore corpus,
                                    QuerySplit split) {
    ExperimentData data;
    data.corpus = std::move(corpus);
    data.graph = LegislationGraph::build(data.corpus);
    data.index = Bm25Index::build(data.corpus, config.bm25);
    data.train = std::move(split.train);
    data.val = std::move(split.val);
    data.test = std::move(split.test);
    return data;
}

ExperimentData load_experiment_data(const ExperimentConfig& config) {
    auto corpus = load_corpus(config.data.corpus);
    QuerySplit split;
    if (config.data.queries) {
        const auto queries = load_queries(*config.data.queries, corpus);
        split = split_queries(queries, config.data.split, config.data.split_seed);
    } else {
        if (!config.data.train) {
            throw ConfigError("data.queries or data.train is required");
        }
        split.train = load_queries(*config.data.train, corpus);
        if (config.data.val) {
            split.val = load_queries(*config.data.val, corpus);
        }
        if (config.data.test) {
            split.test = load_queries(*config.data.test, corpus);
        }
    }
    return make_experiment_data(config, std::move(corpus), std::move(split));
}

double selection_score(const MetricsReport& report, std::string_view metric) {
    if (metric == "map") {
        return report.map;
    }
    if (metric == "mrp") {
        return report.mrp;
    }
    if (auto k = recall_k(metric)) {
        return report.recall_at(*k);
    }
    throw ConfigError("unknown selection metric " + std::string(metric));
}

nlohmann::json EpochLog::to_json() const {
    return {
        {"epoch", epoch},
        {"mean_loss", mean_loss},
        {"step_losses", step_losses},
        {"first_learning_rate", first_learning_rate},
        {"last_learning_rate", last_learning_rate},
        {"mixture", mixture},
        {"bucket_counts", bucket_counts},
        {"refresh_step", refresh_step ? nlohmann::json(*refresh_step) : nlohmann::json(nullptr)},
        {"validation_score",
         validation_score ? nlohmann::json(*validation_score) : nlohmann::json(nullptr)},
    };
}

nlohmann::json RunLog::to_json() const {
    nlohmann::json epoch_rows = nlohmann::json::array();
    for (const auto& e : epochs) {
        epoch_rows.push_back(e.to_json());
    }
    return {
        {"config_checksum", to_hex(config_checksum)},
        {"config", config},
        {"corpus_checksum", to_hex(corpus_checksum)},
        {"temperature", temperature},
        {"negatives_per_query", negatives_per_query},
        {"total_steps", total_steps},
        {"warmup_steps", warmup_steps},
        {"selection_metric", selection_metric},
        {"best_epoch", best_epoch},
        {"eval_split", eval_split},
        {"epochs", epoch_rows},
        {"report", report.to_json()},
    };
}

TrainingResult run_training(const ExperimentConfig& config) {
    config.validate();
    return run_training(config, load_experiment_data(config));
}

TrainingResult run_training(const ExperimentConfig& config, const ExperimentData& data,
                            TrainingObserver* observer) {
    config.validate();
    check_pools(config, data);

    const auto& sampling = config.sampling;
    const std::size_t n_queries = data.train.size();
    const std::size_t n_articles = data.corpus.size();
    const std::size_t vocab = config.encoder.vocab_size;

    DualEncoder model = DualEncoder::initialized(vocab, config.encoder.dim,
                                                 config.encoder.temperature, config.seed);
    OptimizerState state = OptimizerState::for_model(model, config.optimizer);

    std::vector<TokenBag> article_bags;
    article_bags.reserve(n_articles);
    for (const auto& a : data.corpus.articles()) {
        article_bags.push_back(encode_text(a.text, vocab));
    }
    std::vector<TokenBag> query_bags;
    query_bags.reserve(n_queries);
    for (const auto& q : data.train) {
        query_bags.push_back(encode_text(q.question, vocab));
    }

    auto uses = [&](SourceKind kind) {
        return std::find(sampling.sources.begin(), sampling.sources.end(), kind) !=
               sampling.sources.end();
    };
    std::vector<DifficultyRanking> static_semantic;
    std::vector<DifficultyRanking> hierarchical;
    std::vector<DifficultyRanking> sequential;
    for (const auto& q : data.train) {
        const auto pool = negative_pool(n_articles, q.positives);
        if (uses(SourceKind::Semantic)) {
            static_semantic.push_back(data.index.rank_negatives_static(q, pool));
        }
        if (uses(SourceKind::Hierarchical)) {
            hierarchical.push_back(rank_by_distance(
                hierarchical_distances(data.graph, q.positives, pool), q.id,
                RankingSource::Hierarchical));
        }
        if (uses(SourceKind::Sequential)) {
            sequential.push_back(rank_by_distance(sequential_distances(data.corpus, q.positives, pool),
                                                  q.id, RankingSource::Sequential));
        }
    }

    const std::size_t batch_size = config.training.batch_size;
    const std::size_t steps_per_epoch = ceil_div(n_queries, batch_size);
    const std::size_t total_steps = steps_per_epoch * config.training.epochs;
    const bool curriculum = sampling.scheduler == SchedulerMode::Curriculum;
    const CurriculumSchedule schedule = curriculum ? config.effective_schedule() : CurriculumSchedule{};
    const std::string& metric = config.training.selection_metric;
    std::vector<std::size_t> val_ks = config.eval_ks;
    if (auto k = recall_k(metric)) {
        val_ks = {*k};
    }

    RunLog log;
    log.config = config.to_json();
    log.config_checksum = config.checksum();
    log.corpus_checksum = data.corpus.checksum();
    log.temperature = config.encoder.temperature;
    log.negatives_per_query = sampling.negatives_per_query;
    log.total_steps = total_steps;
    log.warmup_steps = warmup_steps(config.optimizer.warmup_fraction, total_steps);
    log.selection_metric = metric;

    DualEncoder best = model;
    std::optional<double> best_score;
    std::size_t global_step = 0;
    std::vector<DifficultyRanking> semantic = static_semantic;

    for (std::size_t epoch = 0; epoch < config.training.epochs; ++epoch) {
        EpochLog elog;
        elog.epoch = epoch;
        elog.bucket_counts.assign(sampling.n_buckets, 0);

        if (uses(SourceKind::Semantic) && sampling.semantic == SemanticMode::Dynamic && epoch > 0) {
            semantic = refresh_rankings(model, data.train, query_bags, article_bags,
                                        config.training.refresh_threads);
            elog.refresh_step = global_step;
        }

        std::vector<DifficultyRanking> fused;
        fused.reserve(n_queries);
        for (std::size_t qi = 0; qi < n_queries; ++qi) {
            std::vector<DifficultyRanking> members;
            for (SourceKind kind : sampling.sources) {
                switch (kind) {
                case SourceKind::Semantic:
                    members.push_back(semantic[qi]);
                    break;
                case SourceKind::Hierarchical:
                    members.push_back(hierarchical[qi]);
                    break;
                case SourceKind::Sequential:
                    members.push_back(sequential[qi]);
                    break;
                }
            }
            auto f = rrf_fuse(members, FusionConfig{sampling.k_rrf});
            f.query_id = data.train[qi].id;
            fused.push_back(std::move(f));
        }
        if (observer) {
            observer->on_rankings(epoch, fused);
        }

        if (curriculum) {
            elog.mixture = mixture_for_epoch(schedule, epoch);
        }
        std::vector<NegativeSample> samples(n_queries);
        for (std::size_t qi = 0; qi < n_queries; ++qi) {
            const auto buckets = bucketize(fused[qi], sampling.n_buckets);
            const std::uint64_t seed = derive_seed(config.seed ^ kSampleStream, epoch, qi);
            auto& sample = samples[qi];
            if (curriculum) {
                sample = sample_negatives(buckets, elog.mixture, sampling.negatives_per_query, seed);
            } else {
                const auto& order = fused[qi].order;
                if (sampling.fixed_sampling == FixedSampling::Hardest) {
                    sample.articles.assign(order.begin(),
                                           order.begin() + static_cast<std::ptrdiff_t>(
                                                               sampling.negatives_per_query));
                } else {
                    sample.articles = sample_uniform(order, sampling.negatives_per_query, seed);
                }
                const auto lookup = bucket_lookup(buckets, n_articles);
                sample.bucket_counts.assign(sampling.n_buckets, 0);
                for (ArticleIndex a : sample.articles) {
                    ++sample.bucket_counts[lookup[a]];
                }
            }
            for (std::size_t b = 0; b < sampling.n_buckets; ++b) {
                elog.bucket_counts[b] += sample.bucket_counts[b];
            }
        }
        if (observer) {
            observer->on_negatives(epoch, samples);
        }

        std::vector<std::size_t> order(n_queries);
        for (std::size_t i = 0; i < n_queries; ++i) {
            order[i] = i;
        }
        std::mt19937_64 shuffle_rng(derive_seed(config.seed ^ kShuffleStream, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        for (std::size_t start = 0; start < n_queries; start += batch_size) {
            const std::size_t end = std::min(n_queries, start + batch_size);
            std::vector<ContrastiveExample> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t qi = order[i];
                ContrastiveExample ex;
                ex.query = query_bags[qi];
                for (ArticleIndex p : data.train[qi].positives) {
                    ex.positives.emplace_back(article_bags[p]);
                }
                for (ArticleIndex n : samples[qi].articles) {
                    ex.negatives.emplace_back(article_bags[n]);
                }
                batch.push_back(std::move(ex));
            }
            const auto step = train_step(model, state, batch, global_step, total_steps);
            if (start == 0) {
                elog.first_learning_rate = step.learning_rate;
            }
            elog.last_learning_rate = step.learning_rate;
            elog.step_losses.push_back(step.loss);
            ++global_step;
        }
        double total = 0.0;
        for (double l : elog.step_losses) {
            total += l;
        }
        elog.mean_loss = total / static_cast<double>(elog.step_losses.size());

        if (!data.val.empty()) {
            const DenseRetriever retriever(model, article_bags);
            const auto report = evaluate(retriever, data.val, data.corpus, val_ks);
            const double score = selection_score(report, metric);
            elog.validation_score = score;
            if (!best_score || score >= *best_score) {
                best_score = score;
                best = model;
                log.best_epoch = epoch;
            }
        } else {
            best = model;
            log.best_epoch = epoch;
        }
        log.epochs.push_back(std::move(elog));
    }

    const std::vector<QueryExample>* eval_set = &data.test;
    log.eval_split = "test";
    if (eval_set->empty()) {
        eval_set = data.val.empty() ? &data.train : &data.val;
        log.eval_split = data.val.empty() ? "train" : "val";
    }
    const DenseRetriever retriever(best, article_bags);
    log.report = evaluate(retriever, *eval_set, data.corpus, config.eval_ks);

    return TrainingResult{std::move(best), std::move(log)};
}

std::filesystem::path write_run(const std::filesystem::path& out_root,
                                const TrainingResult& result) {
    const auto dir = out_root / to_hex(result.log.config_checksum);
    std::filesystem::create_directories(dir);
    auto write_text = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name);
        if (!out) {
            throw NotFoundError("cannot write " + (dir / name).string());
        }
        out << text;
    };
    write_text("config.json", result.log.config.dump(2) + "\n");
    write_text("runlog.json", result.log.to_json().dump(2) + "\n");
    write_text("report.json", result.log.report.to_json().dump(2) + "\n");
    write_text("report.md", metrics_table_header(result.log.report.ks, "Model") +
                                metrics_table_row(result.log.report, result.log.report.retriever));
    save_checkpoint(dir / "model.ckpt", result.model);
    return dir;
}

} // namespace sarneg
