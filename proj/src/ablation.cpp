#include "sarneg/ablation.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "sarneg/checksum.hpp"
#include "sarneg/errors.hpp"

namespace sarneg {

namespace {

using nlohmann::json;

struct PlannedCell {
    std::string label;
    ExperimentConfig config;
    std::uint64_t checksum = 0;
};

struct PlannedTable {
    std::string title;
    std::string label_column;
    std::vector<PlannedCell> cells;
};

PlannedTable plan_grid(const json& base, const std::vector<GridAxis>& axes,
                       const GridOptions& options, std::string title) {
    PlannedTable table;
    table.title = std::move(title);
    std::vector<std::pair<std::string, json>> combos = {{"", base}};
    for (const auto& axis : axes) {
        if (axis.values.empty()) {
            throw ConfigError("grid axis " + axis.name + " has no values");
        }
        std::vector<std::pair<std::string, json>> next;
        for (const auto& [label, cfg] : combos) {
            for (const auto& v : axis.values) {
                json merged = cfg;
                merged.merge_patch(v.patch);
                next.emplace_back(label.empty() ? v.label : label + ", " + v.label, merged);
            }
        }
        combos = std::move(next);
    }
    if (axes.size() == 1) {
        table.label_column = axes.front().name;
    } else {
        std::string name;
        for (const auto& axis : axes) {
            name += name.empty() ? axis.name : " x " + axis.name;
        }
        table.label_column = name.empty() ? "Configuration" : name;
    }
    std::map<std::uint64_t, std::string> seen;
    for (auto& [label, cfg_json] : combos) {
        PlannedCell cell;
        cell.label = label.empty() ? "Baseline" : label;
        cell.config = ExperimentConfig::from_json(cfg_json, options.base_dir);
        cell.config.validate();
        cell.checksum = cell.config.checksum();
        if (auto [it, fresh] = seen.emplace(cell.checksum, cell.label); !fresh) {
            throw ConfigError("grid rows '" + it->second + "' and '" + cell.label +
                              "' resolve to the same configuration");
        }
        table.cells.push_back(std::move(cell));
    }
    return table;
}

std::vector<AblationTable> execute(const std::vector<PlannedTable>& plans,
                                   const GridOptions& options) {
    std::vector<const ExperimentConfig*> unique;
    std::set<std::uint64_t> queued;
    for (const auto& t : plans) {
        for (const auto& c : t.cells) {
            if (queued.insert(c.checksum).second) {
                unique.push_back(&c.config);
            }
        }
    }

    std::vector<std::optional<RunLog>> logs(unique.size());
    std::vector<std::exception_ptr> errors(unique.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < unique.size(); i = next++) {
            try {
                auto result = run_training(*unique[i]);
                if (!options.out_root.empty()) {
                    write_run(options.out_root, result);
                }
                logs[i] = std::move(result.log);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, unique.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) {
            pool.emplace_back(worker);
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    std::map<std::uint64_t, const RunLog*> by_checksum;
    for (std::size_t i = 0; i < unique.size(); ++i) {
        by_checksum[unique[i]->checksum()] = &*logs[i];
    }
    std::vector<AblationTable> tables;
    for (const auto& plan : plans) {
        AblationTable table;
        table.title = plan.title;
        table.label_column = plan.label_column;
        for (const auto& c : plan.cells) {
            table.rows.push_back(AblationCell{c.label, c.checksum, *by_checksum.at(c.checksum)});
        }
        tables.push_back(std::move(table));
    }
    return tables;
}

json structural_sources() { return json::array({"hierarchical", "sequential"}); }

} // namespace

std::string AblationTable::to_markdown() const {
    std::ostringstream out;
    out << "### " << title << "\n\n";
    if (rows.empty()) {
        return out.str();
    }
    out << metrics_table_header(rows.front().log.report.ks, label_column);
    for (const auto& r : rows) {
        out << metrics_table_row(r.log.report, r.label);
    }
    out << "\nConfig checksums:";
    for (const auto& r : rows) {
        out << ' ' << r.label << '=' << to_hex(r.config_checksum) << ';';
    }
    out << "\n";
    return out.str();
}

GridAxis sources_axis() {
    return GridAxis{
        "Ranking",
        {
            {"Semantic (Static)",
             {{"sampling", {{"sources", json::array({"semantic"})}, {"semantic", "static"}}}}},
            {"Structural",
             {{"sampling", {{"sources", structural_sources()}, {"semantic", "static"}}}}},
            {"Semantic (Static) + Structural",
             {{"sampling",
               {{"sources", json::array({"semantic", "hierarchical", "sequential"})}, {"semantic", "static"}}}}},
        },
    };
}

GridAxis scheduler_axis() {
    return GridAxis{"Schedule",
                    {
                        {"Fixed", {{"sampling", {{"scheduler", "fixed"}}}}},
                        {"Curriculum", {{"sampling", {{"scheduler", "curriculum"}}}}},
                    }};
}

GridAxis semantic_axis() {
    return GridAxis{"Semantic ranking",
                    {
                        {"Static", {{"sampling", {{"semantic", "static"}}}}},
                        {"Dynamic", {{"sampling", {{"semantic", "dynamic"}}}}},
                    }};
}

GridAxis buckets_axis(std::size_t max_buckets) {
    GridAxis axis{"Buckets", {}};
    for (std::size_t n = 1; n <= max_buckets; ++n) {
        axis.values.push_back(
            {std::to_string(n), {{"sampling", {{"n_buckets", n}, {"schedule", nullptr}}}}});
    }
    return axis;
}

AblationTable run_ablation_grid(const json& base, const std::vector<GridAxis>& axes,
                                const GridOptions& options, std::string title) {
    auto tables = execute({plan_grid(base, axes, options, std::move(title))}, options);
    return std::move(tables.front());
}

std::vector<AblationTable> run_standard_ablations(const json& base, const GridOptions& options) {
    auto with = [&](json patch) {
        json merged = base;
        merged.merge_patch(patch);
        return merged;
    };
    const json all_sources = json::array({"semantic", "hierarchical", "sequential"});
    std::vector<PlannedTable> plans;
    plans.push_back(plan_grid(with({{"sampling", {{"scheduler", "fixed"}}}}), {sources_axis()},
                              options, "Effect of structural information"));
    plans.push_back(plan_grid(with({{"sampling", {{"sources", all_sources}, {"semantic", "static"}}}}),
                              {scheduler_axis()}, options, "Effect of training schedule"));
    plans.push_back(
        plan_grid(with({{"sampling", {{"sources", all_sources}, {"scheduler", "curriculum"}}}}),
                  {semantic_axis()}, options, "Effect of semantic difficulty ranking"));
    plans.push_back(
        plan_grid(with({{"sampling", {{"sources", all_sources}, {"scheduler", "curriculum"}}}}),
                  {buckets_axis(5)}, options, "Number of buckets"));
    return execute(plans, options);
}

} // namespace sarneg
