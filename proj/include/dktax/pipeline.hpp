#pragma once

// Config loading and the staged batch pipeline behind the command line tool.
// Every stage reads and writes CSV files in one output directory.

#include "dktax/analysis.hpp"
#include "dktax/error.hpp"
#include "dktax/synth.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dktax {

enum class Mode { Synthetic, File };

struct PipelineConfig {
    Mode mode = Mode::Synthetic;
    std::string panel_path;  ///< file mode input
    std::string cpi_path;    ///< empty: index grows by deflation_factor
    std::string tax86_path;  ///< empty: built-in systems
    std::string tax87_path;
    double deflation_factor = 1.02;
    GroupBounds groups;
    bool robustness = true;
    std::vector<Outcome> outcomes = all_outcomes();
    std::string output_dir = "out";
    int threads = 1;
    DgpConfig dgp;

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

struct ConfigError : Error {
    using Error::Error;
};

/// Reads the YAML config. Keys not set keep their defaults; unknown keys
/// are an error.
PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config(const std::string& yaml_text);
/// Canonical YAML dump of every effective setting.
std::string dump_pipeline_config(const PipelineConfig& cfg);
/// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_hash(const PipelineConfig& cfg);

/// "LO:HI[,LO:HI]" -> low and optional medium range.
void apply_group_spec(PipelineConfig& cfg, const std::string& spec);

/// Raised by stage functions; names the failing stage.
struct StageError : Error {
    StageError(std::string stage, const std::string& msg)
        : Error("stage " + stage + ": " + msg), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg);

    const PipelineConfig& config() const { return cfg_; }
    const Systems& systems() const { return sys_; }

    /// Simulates the synthetic panel and writes panel.csv.
    void generate();
    /// Writes assignments.csv, income_bins.csv and design.csv.
    void assign();
    /// Writes balance.csv.
    void balance();
    /// Writes coef_<group>_<outcome>.csv and elasticities.csv.
    void estimate();
    /// Writes series.csv and bunching.csv.
    void diagnose();
    /// All stages in order, then manifest.json.
    void run_all();

    std::string out(const std::string& name) const;
    /// Panel from memory, the configured file, or <out>/panel.csv.
    const Panel& panel();
    const std::vector<DesignAssignment>& assignments();
    std::vector<std::string> written() const { return written_; }
    /// Writes FAILED.json naming the stage and the outputs written so far.
    void write_failure(const StageError& e) const;

private:
    template <class F>
    void stage(const std::string& name, F f);
    void note(const std::string& file);

    PipelineConfig cfg_;
    Systems sys_;
    std::optional<Panel> panel_;
    std::optional<std::vector<DesignAssignment>> assignments_;
    std::vector<std::string> written_;
};

void write_assignments(const std::string& path, std::span<const DesignAssignment> a);
std::vector<DesignAssignment> load_assignments(const std::string& path);

}  // namespace dktax
