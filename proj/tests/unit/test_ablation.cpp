#include <doctest.h>

#include <set>

#include "run_helpers.hpp"
#include "sarneg/ablation.hpp"
#include "sarneg/checksum.hpp"
#include "sarneg/errors.hpp"

using namespace sarneg;
using nlohmann::json;

namespace {

// Synthetic files on disk and a base config pointing at them.
struct Workspace {
    std::filesystem::path dir;
    json base;

    Workspace() : dir(std::filesystem::temp_directory_path() / "sarneg_ablation_test") {
        std::filesystem::remove_all(dir);
        write_synthetic(dir, make_synthetic(SyntheticSpec{}));
        base = sarneg::test::synthetic_config_json(4);
        base["data"] = {{"corpus", "corpus.jsonl"},
                        {"train", "train.jsonl"},
                        {"val", "val.jsonl"},
                        {"test", "test.jsonl"}};
    }
    ~Workspace() { std::filesystem::remove_all(dir); }

    GridOptions options(std::size_t jobs = 1) const { return GridOptions{dir, jobs, {}}; }
};

std::vector<std::string> labels(const AblationTable& t) {
    std::vector<std::string> out;
    for (const auto& r : t.rows) {
        out.push_back(r.label);
    }
    return out;
}

} // namespace

TEST_CASE("ablation: two-axis grid") {
    Workspace ws;
    const auto table = run_ablation_grid(ws.base, {scheduler_axis(), semantic_axis()}, ws.options(), "Grid");
    CHECK(table.title == "Grid");
    CHECK(table.label_column == "Schedule x Semantic ranking");
    CHECK(labels(table) == std::vector<std::string>{"Fixed, Static", "Fixed, Dynamic",
                                                    "Curriculum, Static", "Curriculum, Dynamic"});
    std::set<std::uint64_t> checksums;
    for (const auto& r : table.rows) {
        checksums.insert(r.config_checksum);
        CHECK(r.log.config_checksum == r.config_checksum);
        CHECK(r.log.epochs.size() == 4);
    }
    CHECK(checksums.size() == 4);
    CHECK(table.rows[0].log.config["sampling"]["scheduler"] == "fixed");
    CHECK(table.rows[3].log.config["sampling"]["semantic"] == "dynamic");

    const auto md = table.to_markdown();
    CHECK(md.rfind("### Grid\n\n| Schedule x Semantic ranking | R@1 | R@10 | MAP | MRP |\n", 0) == 0);
    CHECK(md.find("| Curriculum, Dynamic | ") != std::string::npos);
    CHECK(md.find(to_hex(table.rows[2].config_checksum)) != std::string::npos);

    const auto parallel = run_ablation_grid(ws.base, {scheduler_axis(), semantic_axis()}, ws.options(3), "Grid");
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        CHECK(parallel.rows[i].log.to_json() == table.rows[i].log.to_json());
    }
}

TEST_CASE("ablation: baseline row, duplicate and empty axes") {
    Workspace ws;
    const auto base = run_ablation_grid(ws.base, {}, ws.options());
    CHECK(labels(base) == std::vector<std::string>{"Baseline"});
    CHECK(base.label_column == "Configuration");
    CHECK(base.rows[0].config_checksum == ExperimentConfig::from_json(ws.base, ws.dir).checksum());

    const GridAxis dup{"Seed", {{"a", {{"seed", 1}}}, {"b", {{"seed", 1}}}}};
    CHECK_THROWS_AS(run_ablation_grid(ws.base, {dup}, ws.options()), ConfigError);
    // Writing a default value explicitly is still the same configuration.
    const GridAxis same{"K", {{"default", json::object()}, {"explicit", {{"sampling", {{"k_rrf", 60.0}}}}}}};
    CHECK_THROWS_AS(run_ablation_grid(ws.base, {same}, ws.options()), ConfigError);
    CHECK_THROWS_AS(run_ablation_grid(ws.base, {GridAxis{"Empty", {}}}, ws.options()), ConfigError);
    const GridAxis bad{"Buckets", {{"0", {{"sampling", {{"n_buckets", 0}}}}}}};
    CHECK_THROWS_AS(run_ablation_grid(ws.base, {bad}, ws.options()), ConfigError);
}

TEST_CASE("ablation: standard tables") {
    Workspace ws;
    auto opts = ws.options(2);
    opts.out_root = ws.dir / "runs";
    const auto tables = run_standard_ablations(ws.base, opts);
    REQUIRE(tables.size() == 4);
    CHECK(tables[0].label_column == "Ranking");
    CHECK(labels(tables[0]) == std::vector<std::string>{"Semantic (Static)", "Structural",
                                                        "Semantic (Static) + Structural"});
    CHECK(labels(tables[1]) == std::vector<std::string>{"Fixed", "Curriculum"});
    CHECK(labels(tables[2]) == std::vector<std::string>{"Static", "Dynamic"});
    CHECK(labels(tables[3]) == std::vector<std::string>{"1", "2", "3", "4", "5"});
    for (const auto& r : tables[0].rows) {
        CHECK(r.log.config["sampling"]["scheduler"] == "fixed");
        CHECK(r.log.config["sampling"]["semantic"] == "static");
    }
    CHECK(tables[0].rows[1].log.config["sampling"]["sources"] == json({"hierarchical", "sequential"}));
    for (std::size_t n = 0; n < 5; ++n) {
        CHECK(tables[3].rows[n].log.config["sampling"]["n_buckets"] == n + 1);
        CHECK(tables[3].rows[n].log.epochs.front().bucket_counts.size() == n + 1);
    }
    // Curriculum with static semantic appears in two tables and is trained once.
    CHECK(tables[1].rows[1].config_checksum == tables[2].rows[0].config_checksum);
    CHECK(tables[1].rows[1].log.to_json() == tables[2].rows[0].log.to_json());

    std::set<std::uint64_t> unique;
    for (const auto& t : tables) {
        for (const auto& r : t.rows) {
            unique.insert(r.config_checksum);
            CHECK(std::filesystem::exists(opts.out_root / to_hex(r.config_checksum) / "runlog.json"));
        }
    }
    std::size_t dirs = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(opts.out_root)) {
        ++dirs;
    }
    CHECK(dirs == unique.size());
}
