#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sarneg/evaluation.hpp"
#include "sarneg/training.hpp"

namespace sarneg {

/// One setting of an axis: a row label and a JSON merge patch on the config.
struct AxisValue {
    std::string label;
    nlohmann::json patch;
};

struct GridAxis {
    std::string name;
    std::vector<AxisValue> values;
};

struct AblationCell {
    std::string label;
    std::uint64_t config_checksum = 0;
    RunLog log;
};

struct AblationTable {
    std::string title;
    std::string label_column;
    std::vector<AblationCell> rows;

    std::string to_markdown() const;
};

/// Axis constructors for the four supported dimensions.
GridAxis sources_axis();     // Semantic (Static) / Structural / Semantic (Static) + Structural
GridAxis scheduler_axis();   // Fixed / Curriculum
GridAxis semantic_axis();    // Static / Dynamic
GridAxis buckets_axis(std::size_t max_buckets = 5);  // 1..max, default schedule each

struct GridOptions {
    std::filesystem::path base_dir;  // for relative data paths in the config
    std::size_t jobs = 1;            // cells trained concurrently
    std::filesystem::path out_root;  // when set, every cell is written with write_run
};

/// Cartesian product of the axes applied to `base` (all cells share its seed).
/// No axes gives one baseline row. Rows with identical configs share one run.
/// Throws ConfigError if two rows with different labels resolve to the same
/// config.
AblationTable run_ablation_grid(const nlohmann::json& base, const std::vector<GridAxis>& axes,
                                const GridOptions& options, std::string title = "Ablation");

/// The four comparison tables: ranking sources (fixed schedule, static
/// semantic), schedule (static semantic), semantic mode (curriculum) and the
/// bucket-count sweep (curriculum). Identical configs across tables are
/// trained once.
std::vector<AblationTable> run_standard_ablations(const nlohmann::json& base,
                                                  const GridOptions& options);

} // namespace sarneg
