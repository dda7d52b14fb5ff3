#include "repdiv/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "repdiv/errors.hpp"

namespace repdiv {

void DatasetConfig::validate() const {
    if (x1_values.empty() || x2_values.empty())
        throw ConfigError("dataset: value lists must be nonempty");
    if (noise_sd < 0.0) throw ConfigError("dataset: noise_sd must be >= 0");
    if (!(std::abs(cov_param) < 1.0))
        throw ConfigError("dataset: |cov_param| must be < 1 for a valid correlation");
    std::set<double> u1(x1_values.begin(), x1_values.end());
    std::set<double> u2(x2_values.begin(), x2_values.end());
    if (u1.size() != x1_values.size() || u2.size() != x2_values.size())
        throw ConfigError("dataset: grid values must be distinct");
}

int grid_class(const DatasetConfig& cfg, double x1, double x2) {
    for (std::size_t i = 0; i < cfg.x1_values.size(); ++i) {
        if (cfg.x1_values[i] != x1) continue;
        for (std::size_t j = 0; j < cfg.x2_values.size(); ++j) {
            if (cfg.x2_values[j] == x2)
                return static_cast<int>(i * cfg.x2_values.size() + j);
        }
    }
    return -1;
}

std::pair<double, double> class_values(const DatasetConfig& cfg, int class_label) {
    if (class_label < 0 || static_cast<std::size_t>(class_label) >= cfg.n_classes())
        throw ConfigError("class_values: label out of range");
    const std::size_t j = static_cast<std::size_t>(class_label) % cfg.x2_values.size();
    const std::size_t i = static_cast<std::size_t>(class_label) / cfg.x2_values.size();
    return {cfg.x1_values[i], cfg.x2_values[j]};
}

std::vector<LabeledRep> generate_dataset(const DatasetConfig& cfg) {
    cfg.validate();
    std::vector<LabeledRep> out;
    out.reserve(cfg.n_classes() * cfg.samples_per_class);
    Rng root(cfg.seed);
    const double rho = cfg.cov_param;
    const double ortho = std::sqrt(1.0 - rho * rho);
    for (std::size_t c = 0; c < cfg.n_classes(); ++c) {
        auto [x1, x2] = class_values(cfg, static_cast<int>(c));
        Rng rng = root.fork(c);
        for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
            LabeledRep rep;
            rep.class_label = static_cast<int>(c);
            rep.x1 = x1;
            rep.x2 = x2;
            rep.h.resize(cfg.dim());
            // Correlated pair via a Cholesky factor of [[1, rho], [rho, 1]].
            const double z1 = rng.next_gaussian();
            const double z2 = rng.next_gaussian();
            rep.h[0] = x1 + cfg.noise_sd * z1;
            rep.h[1] = x2 + cfg.noise_sd * (rho * z1 + ortho * z2);
            for (std::size_t e = 0; e < cfg.extra_dims; ++e)
                rep.h[2 + e] = rng.next_gaussian();
            out.push_back(std::move(rep));
        }
    }
    return out;
}

const char* partition_name_str(PartitionName name) {
    switch (name) {
        case PartitionName::DefaultP1: return "p1";
        case PartitionName::DefaultP2: return "p2";
        case PartitionName::Dense: return "dense";
        case PartitionName::Sparse: return "sparse";
    }
    return "?";
}

bool Partition::contains_class(int c) const {
    return std::binary_search(included_classes.begin(), included_classes.end(), c);
}

namespace {

// Grid spacing statistics over the class coordinates, used to document the
// Dense < Sparse relationship the fixed memberships below were chosen for.
Partition build_partition(PartitionName name, const std::vector<int>& classes,
                          const std::vector<LabeledRep>& dataset, Rng rng,
                          double train_fraction) {
    Partition p;
    p.name = name;
    p.included_classes = classes;
    std::sort(p.included_classes.begin(), p.included_classes.end());
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (p.contains_class(dataset[i].class_label)) idx.push_back(i);
    // Fisher-Yates with the partition's own stream.
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = rng.next_index(i);
        std::swap(idx[i - 1], idx[j]);
    }
    const std::size_t n_train =
        static_cast<std::size_t>(static_cast<double>(idx.size()) * train_fraction);
    p.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    p.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    return p;
}

}  // namespace

std::pair<Partition, Partition> split_partitions(const std::vector<LabeledRep>& dataset,
                                                 const DatasetConfig& cfg,
                                                 SplitScheme scheme,
                                                 std::uint64_t seed,
                                                 double train_fraction) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw ConfigError("split_partitions: train_fraction must be in (0,1)");
    std::set<int> present;
    for (const auto& rep : dataset) present.insert(rep.class_label);

    Rng root(seed);
    if (scheme == SplitScheme::Default) {
        if (cfg.n_classes() != 10)
            throw PartitionError("default split assumes the 10-class grid");
        // Mirrored held-out pairs: p1 withholds (-1,1) and (1,3); p2
        // withholds (-1,3) and (1,1). Each withheld class is present in
        // the other partition.
        const std::vector<int> withheld_p1{1, 8};
        const std::vector<int> withheld_p2{3, 6};
        std::vector<int> c1, c2;
        for (int c = 0; c < 10; ++c) {
            if (std::find(withheld_p1.begin(), withheld_p1.end(), c) == withheld_p1.end())
                c1.push_back(c);
            if (std::find(withheld_p2.begin(), withheld_p2.end(), c) == withheld_p2.end())
                c2.push_back(c);
        }
        for (int c : c1)
            if (!present.count(c))
                throw PartitionError("default split: dataset missing a required class");
        for (int c : c2)
            if (!present.count(c))
                throw PartitionError("default split: dataset missing a required class");
        return {build_partition(PartitionName::DefaultP1, c1, dataset, root.fork(1),
                                train_fraction),
                build_partition(PartitionName::DefaultP2, c2, dataset, root.fork(2),
                                train_fraction)};
    }

    if (cfg.n_classes() != 10)
        throw PartitionError("ood split assumes the 10-class grid");
    // Dense: x2 in {0,1} (classes 0,1,5,6) with pairwise grid spacing
    // min 1 / max sqrt(5); Sparse: x2 in {2,4} (classes 2,4,7,9) with
    // min 2 / max sqrt(8). Classes with x2 = 3 are dropped entirely.
    const std::vector<int> dense{0, 1, 5, 6};
    const std::vector<int> sparse{2, 4, 7, 9};
    for (int c : dense)
        if (!present.count(c)) throw PartitionError("ood split: dataset missing a dense class");
    for (int c : sparse)
        if (!present.count(c)) throw PartitionError("ood split: dataset missing a sparse class");
    return {build_partition(PartitionName::Dense, dense, dataset, root.fork(1),
                            train_fraction),
            build_partition(PartitionName::Sparse, sparse, dataset, root.fork(2),
                            train_fraction)};
}

void write_dataset_csv(const std::string& path, const std::vector<LabeledRep>& data) {
    if (data.empty()) throw EmptyInputError("write_dataset_csv: no rows");
    std::ofstream out(path);
    if (!out) throw IoError("write_dataset_csv: cannot open " + path);
    const std::size_t d = data.front().h.size();
    out << "class,x1,x2";
    for (std::size_t j = 0; j < d; ++j) out << ",h_" << j;
    out << "\n";
    char buf[64];
    for (const auto& rep : data) {
        if (rep.h.size() != d) throw DimensionError("write_dataset_csv: ragged rows");
        out << rep.class_label;
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g", rep.x1, rep.x2);
        out << buf;
        for (double v : rep.h) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("write_dataset_csv: write failed for " + path);
}

std::vector<LabeledRep> read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_dataset_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("read_dataset_csv: empty file");
    if (line.rfind("class,x1,x2", 0) != 0)
        throw IoError("read_dataset_csv: unexpected header");
    std::vector<LabeledRep> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        LabeledRep rep;
        if (!std::getline(ss, cell, ',')) throw IoError("read_dataset_csv: bad row");
        rep.class_label = std::stoi(cell);
        if (!std::getline(ss, cell, ',')) throw IoError("read_dataset_csv: bad row");
        rep.x1 = std::stod(cell);
        if (!std::getline(ss, cell, ',')) throw IoError("read_dataset_csv: bad row");
        rep.x2 = std::stod(cell);
        while (std::getline(ss, cell, ',')) rep.h.push_back(std::stod(cell));
        if (rep.h.empty()) throw IoError("read_dataset_csv: row without coordinates");
        out.push_back(std::move(rep));
    }
    return out;
}

}  // namespace repdiv
