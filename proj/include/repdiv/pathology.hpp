#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "repdiv/matrix.hpp"
#include "repdiv/mlp.hpp"

namespace repdiv {

struct CircuitLayer {
    Matrix w;
    Vector b;
    bool relu = false;
};

enum class Readout { ScoreSign, ArgmaxFirstIndex };

// Small hand-specified ReLU circuit. An optional context vector is added to
// the output of the declared layer before the next layer runs.
struct PiecewiseLinearCircuit {
    std::string name;
    std::vector<CircuitLayer> layers;
    Readout readout = Readout::ScoreSign;
    bool has_context_slot = false;
    std::size_t context_layer = 0;

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    void validate() const;
};

struct CircuitResult {
    std::vector<Vector> pre_activations;   // per layer, before ReLU
    std::vector<Vector> post_activations;  // per layer, after ReLU and context
    Vector output;
    double score = 0.0;        // sum of outputs (ScoreSign readout)
    int predicted_class = -1;  // argmax with lowest-index ties (ArgmaxFirstIndex)
};

CircuitResult circuit_forward(const PiecewiseLinearCircuit& c, const Vector& h,
                              const Vector* context = nullptr);

// (i) two-layer ReLU score circuit, (ii) its context-extended classifier,
// (iii) the balanced linear score.
std::vector<PiecewiseLinearCircuit> builtin_circuits();

// The two natural input sets the score circuit is specified over.
std::vector<Vector> builtin_class_a();
std::vector<Vector> builtin_class_b();

Vector mean_diff_vector(const std::vector<Vector>& class_a,
                        const std::vector<Vector>& class_b);

struct PatchSet {
    std::vector<std::size_t> indices;
};

// Coordinate i from the source when i is in the set, else from the target.
Vector coordinate_patch(const PatchSet& s, const Vector& h_src, const Vector& h_trg);

struct PatchTraceStep {
    std::size_t coord;
    Vector source;
    Vector result;
};

struct ClosureResult {
    bool closed = false;
    Vector witness;                     // member of the coordinate product, absent from the set
    std::vector<PatchTraceStep> trace;  // patch sequence building the witness
};

// Closed iff the set equals the product of its per-coordinate projections.
ClosureResult patch_closure_check(const std::vector<Vector>& points);

constexpr double kActiveThreshold = 1e-9;

struct HiddenPathwayFlag {
    std::size_t unit = 0;
    std::size_t sample = 0;  // index into the intervened list
    int intended_class = -1;
};

struct HiddenPathwayReport {
    std::size_t n_units = 0;
    std::vector<HiddenPathwayFlag> flags;

    bool unit_flagged(std::size_t unit) const;
};

// Flags (unit, sample) pairs where the unit fires on the intervened sample but
// never fires on any natural sample of the intended class.
HiddenPathwayReport relu_pattern_audit(
    const PiecewiseLinearCircuit& c,
    const std::map<int, std::vector<Vector>>& natural_by_class,
    const std::vector<std::pair<Vector, int>>& intervened);
HiddenPathwayReport relu_pattern_audit(
    const Mlp& model, const std::map<int, std::vector<Vector>>& natural_by_class,
    const std::vector<std::pair<Vector, int>>& intervened);

struct ProjectionMode {
    enum class Kind { ConvexHull, LocalPca };
    Kind kind = Kind::ConvexHull;
    std::size_t k = 10;           // LocalPca neighborhood
    double var_threshold = 0.95;  // LocalPca rank selection
};

// ConvexHull: nearest point of the convex hull of class_points (projected
// gradient on the simplex weights, tol 1e-8, cap 1e4 iterations).
// LocalPca: mean + rank-limited PCA projection of the k-neighborhood.
Vector project_to_class_region(const std::vector<Vector>& class_points, const Vector& v,
                               const ProjectionMode& mode = {});

struct DormantScanResult {
    std::vector<std::size_t> null_contexts;     // indices into the context list
    std::vector<std::size_t> changed_contexts;
    bool dormant = false;  // null somewhere and changed somewhere else
};

// Compares the readout of base_input vs base_input + divergence under each
// context; a change is a class flip, or a score move beyond epsilon.
DormantScanResult dormant_change_scan(const PiecewiseLinearCircuit& c,
                                      const Vector& base_input, const Vector& divergence,
                                      const std::vector<Vector>& contexts, double epsilon);

void save_circuit(const std::string& path, const PiecewiseLinearCircuit& c);
PiecewiseLinearCircuit load_circuit(const std::string& path);

}  // namespace repdiv
