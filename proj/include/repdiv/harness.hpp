#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "repdiv/alignment.hpp"
#include "repdiv/divergence.hpp"
#include "repdiv/mlp.hpp"
#include "repdiv/ols.hpp"
#include "repdiv/synthdata.hpp"

namespace repdiv {

enum class LossMode { DasOnly, ClOnly, DasPlusCl };

std::string loss_mode_str(LossMode mode);   // das, cl, das_cl
LossMode loss_mode_from_str(const std::string& s);
std::string scheme_str(SplitScheme scheme);  // default, ood
SplitScheme scheme_from_str(const std::string& s);
PartitionName partition_name_from_str(const std::string& s);

struct ExperimentConfig {
    DatasetConfig dataset;
    MlpConfig mlp;
    AlignTrainConfig align;
    SplitScheme scheme = SplitScheme::Default;
    LossMode loss_mode = LossMode::DasOnly;
    double cl_eps = 1.0;  // CL weight when combining both losses
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::string output_dir = "runs";
    std::size_t eval_intervention_samples = 2000;
    std::size_t divergence_samples = 1000;  // per-side cap for comparison clouds
    double train_fraction = 0.8;

    void validate() const;
};

// Config file is a single JSON object; absent fields keep their defaults.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

// Alignment training settings for the experiment's loss mode: behavioral
// cross-entropy only, counterfactual-latent only (selected by divergence), or
// the weighted combination.
AlignTrainConfig align_config_for_mode(const ExperimentConfig& cfg,
                                       std::uint64_t align_seed);

struct RunRecord {
    std::uint64_t seed = 0;
    SplitScheme scheme = SplitScheme::Default;
    LossMode loss_mode = LossMode::DasOnly;
    PartitionName trained_partition = PartitionName::DefaultP1;
    PartitionName eval_partition = PartitionName::DefaultP2;
    double mlp_val_accuracy = 0.0;
    double trained_iia = 0.0;   // interventions on the trained partition's val split
    double heldout_iia = 0.0;   // counterfactual classes unseen during alignment training
    double iia_all = 0.0;       // every evaluation intervention
    double train_emd = 0.0;     // trained partition, all dims
    double train_row_emd = 0.0; // trained partition, causal dims (regression x)
    DivergenceReport report;    // evaluation partition
    std::size_t align_epochs = 0;
    std::size_t best_epoch = 0;
    std::size_t dropped_cosine_terms = 0;
    std::size_t heldout_count = 0;
    std::string mlp_checksum;
    std::string align_checksum;
};

// Full experiment for one loss mode: data, models, alignments, evaluations,
// and all per-run files under cfg.output_dir. Returns one record per
// (seed, trained partition).
std::vector<RunRecord> run_pipeline(const ExperimentConfig& cfg);

// Pipelines for several loss modes over the same base config.
std::vector<RunRecord> run_sweep(const ExperimentConfig& base,
                                 const std::vector<LossMode>& modes);

// OLS of held-out IIA on training-split causal-axis EMD; writes
// regression.json and regression_table.csv under out_dir.
OlsFit regression_study(const std::vector<RunRecord>& records,
                        const std::string& out_dir);

// Recursively loads every metrics.json under dir into records.
std::vector<RunRecord> load_run_records(const std::string& dir);

struct ExampleCheck {
    std::string name;
    bool pass = false;
    double got = 0.0;
    double want = 0.0;
};

struct PiecewiseLinearCircuit;

// Exact-constant oracle suite for the hand-worked circuit and classifier
// cases; every check must match to 1e-9. Passing a circuit set overrides the
// builtin one, so a perturbed constant is provably caught.
std::vector<ExampleCheck> worked_examples_suite(
    const std::vector<PiecewiseLinearCircuit>* circuits = nullptr);

// Hex FNV-1a of a file's bytes.
std::string file_checksum(const std::string& path);

// Validates an emitted file against the committed schema document.
void validate_output_file(const std::string& schema_json_text,
                          const std::string& schema_key, const std::string& path);

std::string default_output_root();  // $REPDIV_OUTPUT_ROOT or "runs"

}  // namespace repdiv
