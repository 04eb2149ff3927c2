#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sarneg/ablation.hpp"
#include "sarneg/bm25.hpp"
#include "sarneg/checksum.hpp"
#include "sarneg/config.hpp"
#include "sarneg/corpus.hpp"
#include "sarneg/encoder.hpp"
#include "sarneg/errors.hpp"
#include "sarneg/evaluation.hpp"
#include "sarneg/fusion.hpp"
#include "sarneg/structure.hpp"
#include "sarneg/synthetic.hpp"
#include "sarneg/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sarneg;

namespace {

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw NotFoundError("cannot write " + path.string());
    }
    return out;
}

Bm25Index index_for(const CorpusStore& corpus, const std::string& index_path, double k1, double b) {
    if (index_path.empty()) {
        return Bm25Index::build(corpus, Bm25Params{k1, b});
    }
    auto index = Bm25Index::load(fs::path(index_path));
    if (!index.covers(corpus)) {
        throw ValidationError("index " + index_path + " was not built over this corpus");
    }
    return index;
}

std::vector<TokenBag> article_bags_for(const CorpusStore& corpus, std::size_t vocab) {
    std::vector<TokenBag> bags;
    bags.reserve(corpus.size());
    for (const auto& a : corpus.articles()) {
        bags.push_back(encode_text(a.text, vocab));
    }
    return bags;
}

json ranking_json(const DifficultyRanking& r, const CorpusStore& corpus, std::size_t top) {
    json ids = json::array();
    const std::size_t n = top == 0 ? r.order.size() : std::min(top, r.order.size());
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(corpus.id(r.order[i]));
    }
    return {{"query_id", r.query_id}, {"source", std::string(to_string(r.source))}, {"order", ids}};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structure-aware negative sampling for statutory article retrieval"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate a corpus (and queries) and report its shape");
    std::string corpus_path, queries_path, out_path;
    ingest->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
    ingest->add_option("--queries", queries_path, "Query JSONL");
    ingest->add_option("--out", out_path, "Directory for normalised copies");

    // index
    auto* index_cmd = app.add_subcommand("index", "Build and save a BM25 index");
    double k1 = 1.2, b = 0.75;
    index_cmd->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
    index_cmd->add_option("--out", out_path, "Index snapshot path")->required();
    index_cmd->add_option("--k1", k1, "BM25 k1");
    index_cmd->add_option("--b", b, "BM25 b");

    // rank
    auto* rank = app.add_subcommand("rank", "Print difficulty rankings of each query's negatives");
    std::vector<std::string> sources = {"semantic-static", "hierarchical", "sequential"};
    std::string index_path, checkpoint_path;
    bool fuse = false;
    double k_rrf = 60.0;
    std::size_t top = 0;
    rank->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
    rank->add_option("--queries", queries_path, "Query JSONL")->required();
    rank->add_option("--source", sources,
                     "semantic-static, semantic-dynamic, hierarchical, sequential")
        ->delimiter(',');
    rank->add_option("--index", index_path, "Saved BM25 index (built on the fly otherwise)");
    rank->add_option("--checkpoint", checkpoint_path, "Model for semantic-dynamic");
    rank->add_flag("--fuse", fuse, "Emit only the fused ranking");
    rank->add_option("--k-rrf", k_rrf, "Fusion constant");
    rank->add_option("--top", top, "Truncate printed rankings (0 = full pool)");
    rank->add_option("--out", out_path, "Write JSONL here instead of stdout");
    rank->add_option("--k1", k1, "BM25 k1");
    rank->add_option("--b", b, "BM25 b");

    // train
    auto* train = app.add_subcommand("train", "Train a dual encoder from a config file");
    std::string config_path;
    std::string out_root = "runs";
    train->add_option("--config", config_path, "Experiment config (JSON)")->required();
    train->add_option("--out", out_root, "Output root; the run goes to <out>/<config checksum>/");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate BM25 or a checkpoint on a query file");
    std::vector<std::size_t> ks = {100, 200, 500};
    eval->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
    eval->add_option("--queries", queries_path, "Query JSONL")->required();
    eval->add_option("--checkpoint", checkpoint_path, "Model checkpoint (BM25 when omitted)");
    eval->add_option("--index", index_path, "Saved BM25 index");
    eval->add_option("--ks", ks, "Cut-offs for recall")->delimiter(',');
    eval->add_option("--out", out_path, "Write the JSON report here");
    eval->add_option("--k1", k1, "BM25 k1");
    eval->add_option("--b", b, "BM25 b");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Run the ablation tables over a base config");
    std::size_t jobs = 1;
    std::vector<std::string> axes;
    ablate->add_option("--config", config_path, "Base experiment config (JSON)")->required();
    ablate->add_option("--out", out_root, "Output root");
    ablate->add_option("--jobs", jobs, "Cells trained concurrently");
    ablate->add_option("--axis", axes,
                       "Custom grid over sources, scheduler, semantic, buckets "
                       "(default: the four standard tables)")
        ->delimiter(',');

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus with train/val/test queries");
    SyntheticSpec spec;
    synth->add_option("--out", out_path, "Output directory")->required();
    synth->add_option("--seed", spec.seed, "Generator seed");
    synth->add_option("--codes", spec.codes);
    synth->add_option("--books", spec.books_per_code);
    synth->add_option("--sections", spec.sections_per_book);
    synth->add_option("--articles", spec.articles_per_section);
    synth->add_option("--train", spec.train_queries);
    synth->add_option("--val", spec.val_queries);
    synth->add_option("--test", spec.test_queries);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            const auto corpus = load_corpus(corpus_path);
            const auto graph = LegislationGraph::build(corpus);
            json stats = {{"articles", corpus.size()},
                          {"graph_nodes", graph.node_count()},
                          {"graph_edges", graph.edge_count()},
                          {"corpus_checksum", to_hex(corpus.checksum())}};
            std::optional<std::vector<QueryExample>> queries;
            if (!queries_path.empty()) {
                queries = load_queries(queries_path, corpus);
                std::size_t positives = 0;
                for (const auto& q : *queries) {
                    positives += q.positives.size();
                }
                stats["queries"] = queries->size();
                stats["positives"] = positives;
                stats["queries_checksum"] = to_hex(queries_checksum(*queries));
            }
            if (!out_path.empty()) {
                auto c = open_out(fs::path(out_path) / "corpus.jsonl");
                write_corpus(c, corpus);
                if (queries) {
                    auto q = open_out(fs::path(out_path) / "queries.jsonl");
                    write_queries(q, *queries, corpus);
                }
            }
            std::cout << stats.dump(2) << '\n';
        } else if (*index_cmd) {
            const auto corpus = load_corpus(corpus_path);
            const auto index = Bm25Index::build(corpus, Bm25Params{k1, b});
            index.save(fs::path(out_path));
            std::cout << "indexed " << index.doc_count() << " articles, " << index.term_count()
                      << " terms -> " << out_path << '\n';
        } else if (*rank) {
            const auto corpus = load_corpus(corpus_path);
            const auto queries = load_queries(queries_path, corpus);
            const auto graph = LegislationGraph::build(corpus);
            std::vector<RankingSource> kinds;
            for (const auto& s : sources) {
                kinds.push_back(ranking_source_from_string(s));
            }
            std::optional<Bm25Index> index;
            std::optional<DualEncoder> model;
            std::vector<TokenBag> bags;
            for (auto k : kinds) {
                if (k == RankingSource::SemanticStatic && !index) {
                    index = index_for(corpus, index_path, k1, b);
                } else if (k == RankingSource::SemanticDynamic && !model) {
                    if (checkpoint_path.empty()) {
                        throw ConfigError("semantic-dynamic needs --checkpoint");
                    }
                    model = load_checkpoint(fs::path(checkpoint_path));
                    bags = article_bags_for(corpus, model->vocab_size());
                } else if (k == RankingSource::Fused) {
                    throw ConfigError("use --fuse to request the fused ranking");
                }
            }
            std::ofstream file;
            if (!out_path.empty()) {
                file = open_out(out_path);
            }
            std::ostream& out = out_path.empty() ? std::cout : file;
            for (const auto& q : queries) {
                const auto pool = negative_pool(corpus.size(), q.positives);
                std::vector<DifficultyRanking> rankings;
                for (auto k : kinds) {
                    switch (k) {
                    case RankingSource::SemanticStatic:
                        rankings.push_back(index->rank_negatives_static(q, pool));
                        break;
                    case RankingSource::SemanticDynamic:
                        rankings.push_back(rank_negatives_dynamic(
                            *model, encode_text(q.question, model->vocab_size()), q, pool, bags));
                        break;
                    case RankingSource::Hierarchical:
                        rankings.push_back(rank_by_distance(
                            hierarchical_distances(graph, q.positives, pool), q.id, k));
                        break;
                    case RankingSource::Sequential:
                        rankings.push_back(rank_by_distance(
                            sequential_distances(corpus, q.positives, pool), q.id, k));
                        break;
                    case RankingSource::Fused:
                        break;
                    }
                }
                if (fuse) {
                    auto fused = rrf_fuse(rankings, FusionConfig{k_rrf});
                    fused.query_id = q.id;
                    out << ranking_json(fused, corpus, top).dump() << '\n';
                } else {
                    for (const auto& r : rankings) {
                        out << ranking_json(r, corpus, top).dump() << '\n';
                    }
                }
            }
        } else if (*train) {
            const auto config = ExperimentConfig::load(config_path);
            const auto result = run_training(config);
            const auto dir = write_run(out_root, result);
            std::cout << metrics_table_header(result.log.report.ks, "Model")
                      << metrics_table_row(result.log.report, result.log.report.retriever)
                      << "best epoch " << result.log.best_epoch << ", evaluated on "
                      << result.log.eval_split << "; run written to " << dir.string() << '\n';
        } else if (*eval) {
            const auto corpus = load_corpus(corpus_path);
            const auto queries = load_queries(queries_path, corpus);
            MetricsReport report;
            if (checkpoint_path.empty()) {
                const auto index = index_for(corpus, index_path, k1, b);
                report = evaluate(Bm25Retriever(index), queries, corpus, ks);
            } else {
                const auto model = load_checkpoint(fs::path(checkpoint_path));
                const auto bags = article_bags_for(corpus, model.vocab_size());
                report = evaluate(DenseRetriever(model, bags), queries, corpus, ks);
            }
            if (!out_path.empty()) {
                open_out(out_path) << report.to_json().dump(2) << '\n';
            }
            std::cout << metrics_table_header(report.ks, "Model")
                      << metrics_table_row(report, report.retriever);
        } else if (*ablate) {
            std::ifstream in(config_path);
            if (!in) {
                throw NotFoundError("cannot open config " + config_path);
            }
            json base;
            try {
                base = json::parse(in);
            } catch (const json::parse_error& e) {
                throw ConfigError("malformed config " + config_path + ": " + e.what());
            }
            GridOptions options;
            options.base_dir = fs::path(config_path).parent_path();
            options.jobs = jobs;
            options.out_root = fs::path(out_root) / "runs";
            std::vector<AblationTable> tables;
            if (axes.empty()) {
                tables = run_standard_ablations(base, options);
            } else {
                std::vector<GridAxis> grid;
                for (const auto& a : axes) {
                    if (a == "sources") {
                        grid.push_back(sources_axis());
                    } else if (a == "scheduler") {
                        grid.push_back(scheduler_axis());
                    } else if (a == "semantic") {
                        grid.push_back(semantic_axis());
                    } else if (a == "buckets") {
                        grid.push_back(buckets_axis());
                    } else {
                        throw ConfigError("unknown grid axis " + a);
                    }
                }
                tables.push_back(run_ablation_grid(base, grid, options));
            }
            std::string markdown;
            json summary = json::array();
            for (const auto& t : tables) {
                markdown += t.to_markdown() + "\n";
                json rows = json::array();
                for (const auto& r : t.rows) {
                    rows.push_back({{"label", r.label},
                                    {"config_checksum", to_hex(r.config_checksum)},
                                    {"report", r.log.report.to_json()}});
                }
                summary.push_back({{"title", t.title}, {"label_column", t.label_column}, {"rows", rows}});
            }
            open_out(fs::path(out_root) / "ablation.md") << markdown;
            open_out(fs::path(out_root) / "ablation.json") << summary.dump(2) << '\n';
            std::cout << markdown;
        } else if (*synth) {
            const auto data = make_synthetic(spec);
            write_synthetic(out_path, data);
            std::cout << "wrote " << data.corpus.size() << " articles, "
                      << data.queries.train.size() << "/" << data.queries.val.size() << "/"
                      << data.queries.test.size() << " train/val/test queries to " << out_path
                      << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 3;
    } catch (const NotFoundError& e) {
        std::cerr << "not found: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
