#include "sarneg/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "sarneg/checksum.hpp"
#include "sarneg/errors.hpp"

namespace sarneg {

namespace {

using nlohmann::json;

void allow_keys(const json& obj, std::string_view section, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) {
        throw ConfigError(std::string(section) + " must be an object");
    }
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key)) {
            throw ConfigError("unknown config key " + std::string(section) + "." + key);
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, T& target, std::string_view section) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        return;
    }
    try {
        target = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for " + std::string(section) + "." + key);
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) {
        path = base / path;
    }
    return path.lexically_normal();
}

void read_path(const json& obj, const char* key, std::optional<std::filesystem::path>& target,
               const std::filesystem::path& base) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return;
    }
    if (!it->is_string()) {
        throw ConfigError(std::string("data.") + key + " must be a path string");
    }
    target = resolve(base, it->get<std::string>());
}

template <typename Enum>
Enum parse_enum(const json& value, std::string_view what,
                std::initializer_list<std::pair<const char*, Enum>> options) {
    if (!value.is_string()) {
        throw ConfigError(std::string(what) + " must be a string");
    }
    const auto s = value.get<std::string>();
    for (const auto& [name, e] : options) {
        if (s == name) {
            return e;
        }
    }
    throw ConfigError("unknown " + std::string(what) + " '" + s + "'");
}

SourceKind parse_source(const json& v) {
    return parse_enum<SourceKind>(v, "ranking source",
                                  {{"semantic", SourceKind::Semantic},
                                   {"hierarchical", SourceKind::Hierarchical},
                                   {"sequential", SourceKind::Sequential}});
}

json path_json(const std::optional<std::filesystem::path>& p) {
    return p ? json(p->generic_string()) : json(nullptr);
}

} // namespace

std::string_view to_string(SourceKind kind) {
    switch (kind) {
    case SourceKind::Semantic:
        return "semantic";
    case SourceKind::Hierarchical:
        return "hierarchical";
    case SourceKind::Sequential:
        return "sequential";
    }
    return "unknown";
}

std::string_view to_string(SchedulerMode mode) {
    return mode == SchedulerMode::Fixed ? "fixed" : "curriculum";
}

std::string_view to_string(SemanticMode mode) {
    return mode == SemanticMode::Static ? "static" : "dynamic";
}

std::string_view to_string(FixedSampling mode) {
    return mode == FixedSampling::Hardest ? "hardest" : "uniform";
}

ExperimentConfig ExperimentConfig::from_json(const json& root, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    allow_keys(root, "config",
               {"data", "seed", "encoder", "optimizer", "bm25", "sampling", "training", "eval"});

    if (auto it = root.find("data"); it != root.end()) {
        const auto& d = *it;
        allow_keys(d, "data", {"corpus", "queries", "split", "train", "val", "test"});
        if (auto c = d.find("corpus"); c != d.end()) {
            if (!c->is_string()) {
                throw ConfigError("data.corpus must be a path string");
            }
            cfg.data.corpus = resolve(base_dir, c->get<std::string>());
        }
        read_path(d, "queries", cfg.data.queries, base_dir);
        read_path(d, "train", cfg.data.train, base_dir);
        read_path(d, "val", cfg.data.val, base_dir);
        read_path(d, "test", cfg.data.test, base_dir);
        if (auto s = d.find("split"); s != d.end()) {
            allow_keys(*s, "data.split", {"train", "val", "test", "seed"});
            read(*s, "train", cfg.data.split.train, "data.split");
            read(*s, "val", cfg.data.split.val, "data.split");
            read(*s, "test", cfg.data.split.test, "data.split");
            read(*s, "seed", cfg.data.split_seed, "data.split");
        }
    }
    read(root, "seed", cfg.seed, "config");

    if (auto it = root.find("encoder"); it != root.end()) {
        allow_keys(*it, "encoder", {"vocab_size", "dim", "temperature"});
        read(*it, "vocab_size", cfg.encoder.vocab_size, "encoder");
        read(*it, "dim", cfg.encoder.dim, "encoder");
        read(*it, "temperature", cfg.encoder.temperature, "encoder");
    }
    if (auto it = root.find("optimizer"); it != root.end()) {
        allow_keys(*it, "optimizer",
                   {"lr", "beta1", "beta2", "epsilon", "weight_decay", "warmup_fraction"});
        read(*it, "lr", cfg.optimizer.peak_lr, "optimizer");
        read(*it, "beta1", cfg.optimizer.beta1, "optimizer");
        read(*it, "beta2", cfg.optimizer.beta2, "optimizer");
        read(*it, "epsilon", cfg.optimizer.epsilon, "optimizer");
        read(*it, "weight_decay", cfg.optimizer.weight_decay, "optimizer");
        read(*it, "warmup_fraction", cfg.optimizer.warmup_fraction, "optimizer");
    }
    if (auto it = root.find("bm25"); it != root.end()) {
        allow_keys(*it, "bm25", {"k1", "b"});
        read(*it, "k1", cfg.bm25.k1, "bm25");
        read(*it, "b", cfg.bm25.b, "bm25");
    }
    if (auto it = root.find("sampling"); it != root.end()) {
        const auto& s = *it;
        allow_keys(s, "sampling",
                   {"sources", "scheduler", "semantic", "fixed_sampling", "n_buckets",
                    "negatives_per_query", "k_rrf", "schedule"});
        if (auto src = s.find("sources"); src != s.end()) {
            if (!src->is_array()) {
                throw ConfigError("sampling.sources must be an array");
            }
            cfg.sampling.sources.clear();
            for (const auto& v : *src) {
                cfg.sampling.sources.push_back(parse_source(v));
            }
        }
        if (auto v = s.find("scheduler"); v != s.end()) {
            cfg.sampling.scheduler = parse_enum<SchedulerMode>(
                *v, "scheduler", {{"fixed", SchedulerMode::Fixed},
                                  {"curriculum", SchedulerMode::Curriculum}});
        }
        if (auto v = s.find("semantic"); v != s.end()) {
            cfg.sampling.semantic = parse_enum<SemanticMode>(
                *v, "semantic mode", {{"static", SemanticMode::Static},
                                      {"dynamic", SemanticMode::Dynamic}});
        }
        if (auto v = s.find("fixed_sampling"); v != s.end()) {
            cfg.sampling.fixed_sampling = parse_enum<FixedSampling>(
                *v, "fixed_sampling", {{"hardest", FixedSampling::Hardest},
                                       {"uniform", FixedSampling::Uniform}});
        }
        read(s, "n_buckets", cfg.sampling.n_buckets, "sampling");
        read(s, "negatives_per_query", cfg.sampling.negatives_per_query, "sampling");
        read(s, "k_rrf", cfg.sampling.k_rrf, "sampling");
        if (auto v = s.find("schedule"); v != s.end() && !v->is_null()) {
            if (v->is_string() && v->get<std::string>() == "default") {
                cfg.sampling.schedule.reset();
            } else if (v->is_array()) {
                CurriculumSchedule schedule;
                for (const auto& phase : *v) {
                    allow_keys(phase, "sampling.schedule[]", {"epochs", "weights"});
                    CurriculumPhase p;
                    try {
                        const auto span = phase.at("epochs").get<std::vector<std::size_t>>();
                        if (span.size() != 2) {
                            throw ConfigError("schedule epochs must be [start, end)");
                        }
                        p.begin_epoch = span[0];
                        p.end_epoch = span[1];
                        p.weights = phase.at("weights").get<std::vector<double>>();
                    } catch (const json::exception&) {
                        throw ConfigError("malformed schedule phase");
                    }
                    schedule.phases.push_back(std::move(p));
                }
                cfg.sampling.schedule = std::move(schedule);
            } else {
                throw ConfigError("sampling.schedule must be null, \"default\" or a phase list");
            }
        }
    }
    if (auto it = root.find("training"); it != root.end()) {
        allow_keys(*it, "training", {"epochs", "batch_size", "refresh_threads", "selection_metric"});
        read(*it, "epochs", cfg.training.epochs, "training");
        read(*it, "batch_size", cfg.training.batch_size, "training");
        read(*it, "refresh_threads", cfg.training.refresh_threads, "training");
        read(*it, "selection_metric", cfg.training.selection_metric, "training");
    }
    if (auto it = root.find("eval"); it != root.end()) {
        allow_keys(*it, "eval", {"ks"});
        read(*it, "ks", cfg.eval_ks, "eval");
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("cannot open config " + path.string());
    }
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
    }
    auto cfg = from_json(root, path.parent_path());
    cfg.validate();
    return cfg;
}

json ExperimentConfig::to_json() const {
    json sources = json::array();
    for (auto s : sampling.sources) {
        sources.push_back(std::string(to_string(s)));
    }
    json schedule = nullptr;
    if (sampling.schedule) {
        schedule = json::array();
        for (const auto& p : sampling.schedule->phases) {
            schedule.push_back({{"epochs", {p.begin_epoch, p.end_epoch}}, {"weights", p.weights}});
        }
    }
    return {
        {"data",
         {{"corpus", data.corpus.generic_string()},
          {"queries", path_json(data.queries)},
          {"split",
           {{"train", data.split.train},
            {"val", data.split.val},
            {"test", data.split.test},
            {"seed", data.split_seed}}},
          {"train", path_json(data.train)},
          {"val", path_json(data.val)},
          {"test", path_json(data.test)}}},
        {"seed", seed},
        {"encoder",
         {{"vocab_size", encoder.vocab_size},
          {"dim", encoder.dim},
          {"temperature", encoder.temperature}}},
        {"optimizer",
         {{"lr", optimizer.peak_lr},
          {"beta1", optimizer.beta1},
          {"beta2", optimizer.beta2},
          {"epsilon", optimizer.epsilon},
          {"weight_decay", optimizer.weight_decay},
          {"warmup_fraction", optimizer.warmup_fraction}}},
        {"bm25", {{"k1", bm25.k1}, {"b", bm25.b}}},
        {"sampling",
         {{"sources", sources},
          {"scheduler", std::string(to_string(sampling.scheduler))},
          {"semantic", std::string(to_string(sampling.semantic))},
          {"fixed_sampling", std::string(to_string(sampling.fixed_sampling))},
          {"n_buckets", sampling.n_buckets},
          {"negatives_per_query", sampling.negatives_per_query},
          {"k_rrf", sampling.k_rrf},
          {"schedule", schedule}}},
        {"training",
         {{"epochs", training.epochs},
          {"batch_size", training.batch_size},
          {"refresh_threads", training.refresh_threads},
          {"selection_metric", training.selection_metric}}},
        {"eval", {{"ks", eval_ks}}},
    };
}

std::uint64_t ExperimentConfig::checksum() const {
    return fnv1a64(to_json().dump());
}

CurriculumSchedule ExperimentConfig::effective_schedule() const {
    if (sampling.schedule) {
        return *sampling.schedule;
    }
    return default_schedule(sampling.n_buckets, training.epochs);
}

void ExperimentConfig::validate() const {
    if (data.corpus.empty()) {
        throw ConfigError("data.corpus is required");
    }
    if (!data.queries && !data.train) {
        throw ConfigError("data.queries or data.train is required");
    }
    if (data.queries && (data.train || data.val || data.test)) {
        throw ConfigError("give either data.queries (with split) or data.train/val/test, not both");
    }
    if (sampling.sources.empty()) {
        throw ConfigError("sampling.sources must name at least one ranking");
    }
    std::set<SourceKind> unique(sampling.sources.begin(), sampling.sources.end());
    if (unique.size() != sampling.sources.size()) {
        throw ConfigError("sampling.sources lists a ranking twice");
    }
    if (sampling.semantic == SemanticMode::Dynamic && !unique.contains(SourceKind::Semantic)) {
        throw ConfigError("dynamic semantic mode requires the semantic ranking source");
    }
    if (sampling.n_buckets == 0) {
        throw ConfigError("sampling.n_buckets must be >= 1");
    }
    if (sampling.negatives_per_query == 0) {
        throw ConfigError("sampling.negatives_per_query must be >= 1");
    }
    if (!(sampling.k_rrf > 0.0)) {
        throw ConfigError("sampling.k_rrf must be positive");
    }
    if (training.epochs == 0 || training.batch_size == 0) {
        throw ConfigError("training.epochs and training.batch_size must be >= 1");
    }
    if (eval_ks.empty() ||
        std::any_of(eval_ks.begin(), eval_ks.end(), [](std::size_t k) { return k == 0; })) {
        throw ConfigError("eval.ks must be a non-empty list of positive integers");
    }
    const auto& metric = training.selection_metric;
    if (metric != "map" && metric != "mrp") {
        constexpr std::string_view prefix = "recall@";
        if (metric.rfind(prefix, 0) != 0 || metric.size() == prefix.size() ||
            !std::all_of(metric.begin() + prefix.size(), metric.end(),
                         [](char c) { return c >= '0' && c <= '9'; }) ||
            std::stoul(metric.substr(prefix.size())) == 0) {
            throw ConfigError("training.selection_metric must be recall@K, map or mrp");
        }
    }
    if (sampling.scheduler == SchedulerMode::Curriculum) {
        effective_schedule().validate(training.epochs, sampling.n_buckets);
    }
    // Constructors of the model and optimizer carry their own range checks.
    (void)DualEncoder(encoder.vocab_size, 1, encoder.temperature);
    (void)OptimizerState::for_model(DualEncoder(1, 1, 1.0), optimizer);
    if (!std::isfinite(bm25.k1) || bm25.k1 < 0.0 || !(bm25.b >= 0.0 && bm25.b <= 1.0)) {
        throw ConfigError("bm25 requires k1 >= 0 and 0 <= b <= 1");
    }
    if (encoder.dim == 0) {
        throw ConfigError("encoder.dim must be >= 1");
    }
}

} // namespace sarneg
