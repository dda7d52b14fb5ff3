#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "repdiv/matrix.hpp"
#include "repdiv/rng.hpp"

namespace repdiv {

// Latent grid dataset: classes are the Cartesian product of the two causal
// value lists; each sample is a noisy copy of its grid point plus extra
// standard-normal dimensions.
struct DatasetConfig {
    std::vector<double> x1_values{-1.0, 1.0};
    std::vector<double> x2_values{0.0, 1.0, 2.0, 3.0, 4.0};
    double noise_sd = 0.1;
    // Pearson correlation of the two causal coordinates. The covariance
    // matrix is [[sd^2, rho*sd^2], [rho*sd^2, sd^2]], which stays PSD for
    // any |rho| < 1.
    double cov_param = 0.2;
    std::size_t extra_dims = 16;
    std::size_t samples_per_class = 500;
    std::uint64_t seed = 0;

    std::size_t n_classes() const { return x1_values.size() * x2_values.size(); }
    std::size_t dim() const { return 2 + extra_dims; }
    void validate() const;  // throws ConfigError
};

struct LabeledRep {
    Vector h;         // length dim(); h[0], h[1] are the noisy causal coords
    int class_label;  // grid index: i1 * |x2_values| + i2
    double x1;        // ground-truth causal values before noise
    double x2;
};

int grid_class(const DatasetConfig& cfg, double x1, double x2);  // -1 if absent
std::pair<double, double> class_values(const DatasetConfig& cfg, int class_label);

// Class-major, sample-index-minor order; per-class derived RNG streams so
// regeneration is bit-identical regardless of scheduling.
std::vector<LabeledRep> generate_dataset(const DatasetConfig& cfg);

enum class PartitionName { DefaultP1, DefaultP2, Dense, Sparse };
enum class SplitScheme { Default, Ood };

const char* partition_name_str(PartitionName name);

struct Partition {
    PartitionName name;
    std::vector<int> included_classes;     // sorted
    std::vector<std::size_t> train;        // indices into the source dataset
    std::vector<std::size_t> val;

    bool contains_class(int c) const;
};

// Default: two 8-class partitions, each withholding two classes present in
// the other. Ood: disjoint 4-class Dense/Sparse groups (two classes dropped
// entirely), Dense with strictly smaller pairwise grid spacing. Both use a
// seeded 80/20 shuffle split inside each partition.
std::pair<Partition, Partition> split_partitions(const std::vector<LabeledRep>& dataset,
                                                 const DatasetConfig& cfg,
                                                 SplitScheme scheme,
                                                 std::uint64_t seed,
                                                 double train_fraction = 0.8);

// CSV with header class,x1,x2,h_0..h_{d-1}; %.17g so values round-trip.
void write_dataset_csv(const std::string& path, const std::vector<LabeledRep>& data);
std::vector<LabeledRep> read_dataset_csv(const std::string& path);

}  // namespace repdiv
