#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "repdiv/matrix.hpp"
#include "repdiv/rng.hpp"
#include "repdiv/synthdata.hpp"

namespace repdiv {

struct MlpConfig {
    std::size_t input_dim = 18;
    std::size_t hidden_width = 128;
    std::size_t n_classes = 10;
    double dropout_p = 0.5;
    double learning_rate = 0.01;
    std::size_t max_epochs = 300;
    std::size_t early_stop_patience = 30;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

// One-dimensional batchnorm with PyTorch semantics: biased variance inside
// the normalization, unbiased variance in the running average.
struct BatchNorm {
    Vector gamma, beta, running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    BatchNorm() = default;
    explicit BatchNorm(std::size_t d)
        : gamma(d, 1.0), beta(d, 0.0), running_mean(d, 0.0), running_var(d, 1.0) {}
    std::size_t dim() const { return gamma.size(); }
};

enum class Mode { Train, Eval };

// batchnorm -> affine -> ReLU -> dropout -> batchnorm -> affine
struct Mlp {
    MlpConfig config;
    BatchNorm bn0, bn1;
    Matrix w1;  // hidden_width x input_dim
    Vector b1;
    Matrix w2;  // n_classes x hidden_width
    Vector b2;
    Mode mode = Mode::Eval;

    // Gaussian weights with sd = 1/sqrt(fan_in), zero biases.
    static Mlp init(const MlpConfig& cfg);
};

struct ForwardTrace {
    Vector input;
    Vector bn0_out;
    Vector pre_hidden;    // affine output before ReLU
    Vector post_hidden;   // ReLU output
    Vector dropout_mask;  // per-unit scale applied (all ones in Eval)
    Vector bn1_out;
    Vector logits;
    int predicted = 0;    // argmax, lowest index on ties
};

// Eval-mode trace: running statistics, no dropout, fully deterministic.
ForwardTrace forward(const Mlp& m, const Vector& h);
// Train-mode trace treats h as a batch of one (batch statistics are then
// degenerate) and consumes rng for the dropout mask; running stats update.
ForwardTrace forward(Mlp& m, const Vector& h, Rng& rng);

struct EvalResult {
    std::vector<int> classes;
    Matrix probs;  // n x n_classes, rows sum to 1
};

// Frozen eval-mode batch predictions; throws ConfigError in Train mode.
EvalResult eval_from_input(const Mlp& m, const Matrix& h_batch);

Vector softmax(const Vector& logits);
double log_softmax_at(const Vector& logits, int index);
int argmax_lowest(const Vector& v);

// Per-sample eval-mode forward caching what the input-gradient pass needs.
struct EvalCache {
    Vector pre_hidden;
    Vector logits;
    Vector probs;
};
Vector eval_forward_cached(const Mlp& m, const Vector& h, EvalCache& cache);
// d(loss)/d(input) given d(loss)/d(logits), through the eval-mode layers.
Vector eval_backward_input(const Mlp& m, const EvalCache& cache, const Vector& dlogits);

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct MlpTrainResult {
    Mlp model;  // best-validation snapshot, Eval mode
    std::vector<EpochStats> history;
};

// Adam + early stopping on validation loss; returns the snapshot with the
// best validation loss seen.
MlpTrainResult train_mlp(const std::vector<LabeledRep>& train_set,
                         const std::vector<LabeledRep>& val_set,
                         const MlpConfig& cfg);
// Convenience: seeded 80/20 split of `dataset` first.
MlpTrainResult train_mlp(const std::vector<LabeledRep>& dataset, const MlpConfig& cfg);

// Gradients of the mean cross-entropy of one Train-mode batch, for the
// finite-difference harness. Layout matches parameter_views().
struct MlpGradients {
    Vector bn0_gamma, bn0_beta;
    Matrix w1;
    Vector b1;
    Vector bn1_gamma, bn1_beta;
    Matrix w2;
    Vector b2;
};

// One Train-mode forward/backward on a fixed batch with a fixed dropout
// mask stream; does not mutate the model (running stats restored).
double batch_loss_and_gradients(Mlp& m, const Matrix& x, const std::vector<int>& y,
                                std::uint64_t dropout_seed, MlpGradients* grads);

// Versioned hexfloat text checkpoint with an FNV-1a checksum; bit-exact.
void save_mlp(const std::string& path, const Mlp& m);
Mlp load_mlp(const std::string& path);

// FNV-1a 64-bit over a byte string; shared by the checkpoint formats.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace repdiv
