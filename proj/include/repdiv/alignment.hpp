#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "repdiv/matrix.hpp"
#include "repdiv/mlp.hpp"
#include "repdiv/rng.hpp"
#include "repdiv/synthdata.hpp"

namespace repdiv {

// Invertible linear map z = Wh with W = (M Mᵀ + λI) S, S diagonal with
// entries tanh(aᵢ) + λ·sign(tanh(aᵢ)); |sᵢᵢ| ≥ λ keeps W invertible.
struct AlignmentFunction {
    Matrix m;
    Vector a;
    double lambda = 0.1;
    bool has_params = false;

    Matrix p;      // M Mᵀ + λI
    Vector s;      // diagonal of S
    Matrix w;
    Matrix w_inv;

    static AlignmentFunction init(std::size_t dim, std::uint64_t seed);
    static AlignmentFunction from_matrix(const Matrix& w);

    std::size_t dim() const { return w.rows; }
    // Rebuilds p, s, w, w_inv from m and a.
    void refresh();
};

enum class VarId { X1, X2, Extra };

std::string var_id_str(VarId id);

// Binary diagonal selector: ones exactly on [start, start + size).
struct VariableSelector {
    VarId var_id = VarId::X1;
    std::size_t start = 0;
    std::size_t size = 1;
    std::size_t dim = 0;

    bool selects(std::size_t i) const { return i >= start && i < start + size; }
    void validate() const;
};

// Layout: var_x1 occupies [0, s), var_x2 occupies [s, 2s), extra the rest.
std::vector<VariableSelector> causal_selectors(std::size_t dim, std::size_t subspace_size = 1);
VariableSelector selector_for(VarId id, std::size_t dim, std::size_t subspace_size = 1);

struct InterventionSample {
    Vector h_src;
    Vector h_trg;
    VarId variable = VarId::X2;
    int counterfactual_label = -1;
    double key_x1 = 0.0;  // post-intervention ground-truth values
    double key_x2 = 0.0;
};

Vector apply_alignment(const AlignmentFunction& af, const Vector& h);
Vector invert_alignment(const AlignmentFunction& af, const Vector& z);

// ĥ = W⁻¹((I−D)W h_trg + D W h_src)
Vector interchange(const AlignmentFunction& af, const VariableSelector& sel,
                   const Vector& h_trg, const Vector& h_src);

double das_loss(const Mlp& model, const std::vector<InterventionSample>& samples,
                const AlignmentFunction& af, const VariableSelector& sel);

double evaluate_iia(const Mlp& model, const AlignmentFunction& af,
                    const VariableSelector& sel,
                    const std::vector<InterventionSample>& samples);

// Draws (trg, src) pairs uniformly from the pool; the counterfactual label is
// the grid class after replacing the intervened variable's value with the
// source's. Pairs whose counterfactual class is outside allowed_cf_classes
// (when given) are redrawn.
std::vector<InterventionSample> draw_intervention_samples(
    const DatasetConfig& dcfg, const std::vector<LabeledRep>& pool, VarId variable,
    std::size_t n, Rng& rng, const std::vector<int>* allowed_cf_classes = nullptr);

enum class SelectionMetric { BestIia, BestEmd };

struct AlignTrainConfig {
    double learning_rate = 0.01;
    double behavioral_weight = 1.0;  // 0 or 1
    double cl_weight = 0.0;          // ε ≥ 0
    bool modified_cl = true;         // per-variable loss with gradient stopping
    std::size_t subspace_size = 1;
    VarId variable = VarId::X2;
    std::size_t max_epochs = 60;
    std::size_t patience = 400;  // epochs without train-loss improvement
    std::size_t batch_size = 64;
    std::size_t samples_per_epoch = 2048;
    std::size_t eval_samples = 512;      // fixed set for the per-epoch IIA metric
    std::size_t emd_eval_samples = 200;  // fixed set for the per-epoch EMD metric
    std::uint64_t seed = 0;
    SelectionMetric selection_metric = SelectionMetric::BestIia;

    void validate() const;
};

struct AlignEpochStats {
    double train_loss = 0.0;
    double iia = 0.0;
    // Causal-axis EMD between the epoch's intervened points and their
    // ground-truth twins; NaN when the solver failed for this epoch.
    double emd = 0.0;
};

struct AlignTrainResult {
    AlignmentFunction af;
    VariableSelector sel;
    std::vector<AlignEpochStats> history;
    std::size_t best_epoch = 0;
    std::size_t dropped_cosine_terms = 0;
};

// Trains M and a against the frozen model on interventions drawn from
// train_pool; minimizes behavioral_weight·L_das + cl_weight·L_cl and returns
// the snapshot chosen by selection_metric.
AlignTrainResult train_alignment(const Mlp& model, const DatasetConfig& dcfg,
                                 const std::vector<LabeledRep>& train_pool,
                                 const AlignTrainConfig& cfg);

// dW accumulated by a backward pass, pushed into dM and da.
struct AlignGradients {
    Matrix dm;
    Vector da;
};
void backprop_w(const AlignmentFunction& af, const Matrix& dw, AlignGradients& g);

struct ClTermDiagnostics;

struct AlignLossGrad {
    double loss = 0.0;
    Matrix dm;
    Vector da;
};

// Mean combined loss over the batch and its exact gradients wrt M and a.
// cl_targets is parallel to batch (required when cl_weight > 0); the model
// stays frozen.
AlignLossGrad alignment_batch_gradients(
    const Mlp& model, const AlignmentFunction& af, const VariableSelector& sel_train,
    const std::vector<VariableSelector>& cl_selectors,
    const std::vector<InterventionSample>& batch, const std::vector<Vector>& cl_targets,
    double behavioral_weight, double cl_weight, bool modified_cl,
    ClTermDiagnostics* diag);

void save_alignment(const std::string& path, const AlignmentFunction& af);
AlignmentFunction load_alignment(const std::string& path);

}  // namespace repdiv
