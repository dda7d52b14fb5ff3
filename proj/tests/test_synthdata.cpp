#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "repdiv/errors.hpp"
#include "repdiv/synthdata.hpp"

using namespace repdiv;

TEST_CASE("dataset has the configured shape and labeling") {
    DatasetConfig cfg;
    cfg.samples_per_class = 20;
    auto data = generate_dataset(cfg);
    REQUIRE(data.size() == 10 * 20);
    std::map<int, int> per_class;
    for (const auto& rep : data) {
        REQUIRE(rep.h.size() == 18);
        REQUIRE(rep.class_label >= 0);
        REQUIRE(rep.class_label < 10);
        ++per_class[rep.class_label];
        CHECK(grid_class(cfg, rep.x1, rep.x2) == rep.class_label);
        auto [x1, x2] = class_values(cfg, rep.class_label);
        CHECK(x1 == rep.x1);
        CHECK(x2 == rep.x2);
    }
    for (const auto& [cls, count] : per_class) CHECK(count == 20);
}

TEST_CASE("noise statistics match the configured covariance") {
    DatasetConfig cfg;
    cfg.samples_per_class = 2000;
    cfg.seed = 9;
    auto data = generate_dataset(cfg);
    double sxx = 0, syy = 0, sxy = 0, sx = 0, sy = 0;
    std::size_t n = 0;
    for (const auto& rep : data) {
        double dx = rep.h[0] - rep.x1;
        double dy = rep.h[1] - rep.x2;
        sx += dx; sy += dy;
        sxx += dx * dx; syy += dy * dy; sxy += dx * dy;
        ++n;
    }
    double mx = sx / n, my = sy / n;
    double vx = sxx / n - mx * mx;
    double vy = syy / n - my * my;
    double cxy = sxy / n - mx * my;
    CHECK(vx == doctest::Approx(0.01).epsilon(0.05));
    CHECK(vy == doctest::Approx(0.01).epsilon(0.05));
    // cov_param is the correlation: cov = rho * sd^2 = 0.2 * 0.01.
    CHECK(cxy / std::sqrt(vx * vy) == doctest::Approx(0.2).epsilon(0.1));
}

TEST_CASE("extra dimensions are standard normal and uncorrelated with the grid") {
    DatasetConfig cfg;
    cfg.samples_per_class = 1000;
    auto data = generate_dataset(cfg);
    double sum = 0, sumsq = 0;
    std::size_t n = 0;
    for (const auto& rep : data)
        for (std::size_t j = 2; j < rep.h.size(); ++j) {
            sum += rep.h[j];
            sumsq += rep.h[j] * rep.h[j];
            ++n;
        }
    double mean = sum / n;
    CHECK(std::fabs(mean) < 0.02);
    CHECK(sumsq / n - mean * mean == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("regeneration is bit identical") {
    DatasetConfig cfg;
    cfg.samples_per_class = 50;
    cfg.seed = 1234;
    auto a = generate_dataset(cfg);
    auto b = generate_dataset(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].h == b[i].h);
}

TEST_CASE("default partitions withhold two classes each and cover the rest") {
    DatasetConfig cfg;
    cfg.samples_per_class = 30;
    auto data = generate_dataset(cfg);
    auto [p1, p2] = split_partitions(data, cfg, SplitScheme::Default, 0);
    CHECK(p1.included_classes.size() == 8);
    CHECK(p2.included_classes.size() == 8);
    for (int c = 0; c < 10; ++c) {
        // every class is in at least one partition
        CHECK((p1.contains_class(c) || p2.contains_class(c)));
    }
    // the classes p1 withholds are present in p2 and vice versa
    for (int c = 0; c < 10; ++c) {
        if (!p1.contains_class(c)) CHECK(p2.contains_class(c));
        if (!p2.contains_class(c)) CHECK(p1.contains_class(c));
    }
}

TEST_CASE("partition splits are disjoint and class-consistent") {
    DatasetConfig cfg;
    cfg.samples_per_class = 40;
    auto data = generate_dataset(cfg);
    auto [p1, p2] = split_partitions(data, cfg, SplitScheme::Default, 7);
    std::set<std::size_t> train(p1.train.begin(), p1.train.end());
    for (std::size_t idx : p1.val) CHECK(train.count(idx) == 0);
    for (std::size_t idx : p1.train) CHECK(p1.contains_class(data[idx].class_label));
    for (std::size_t idx : p1.val) CHECK(p1.contains_class(data[idx].class_label));
    // 80/20 split within each included class
    CHECK(p1.train.size() == 8 * 32);
    CHECK(p1.val.size() == 8 * 8);
}

TEST_CASE("ood partitions are disjoint and dense is tighter than sparse") {
    DatasetConfig cfg;
    cfg.samples_per_class = 25;
    auto data = generate_dataset(cfg);
    auto [dense, sparse] = split_partitions(data, cfg, SplitScheme::Ood, 0);
    CHECK(dense.name == PartitionName::Dense);
    CHECK(sparse.name == PartitionName::Sparse);
    for (int c : dense.included_classes) CHECK(!sparse.contains_class(c));

    auto min_spacing = [&](const Partition& p) {
        double best = 1e9;
        for (int a : p.included_classes)
            for (int b : p.included_classes) {
                if (a == b) continue;
                auto [ax1, ax2] = class_values(cfg, a);
                auto [bx1, bx2] = class_values(cfg, b);
                double d2 = (ax1 - bx1) * (ax1 - bx1) + (ax2 - bx2) * (ax2 - bx2);
                best = std::min(best, d2);
            }
        return best;
    };
    CHECK(min_spacing(dense) < min_spacing(sparse));
}

TEST_CASE("csv round trip preserves every bit") {
    DatasetConfig cfg;
    cfg.samples_per_class = 5;
    auto data = generate_dataset(cfg);
    auto path = std::filesystem::temp_directory_path() / "repdiv_test_dataset.csv";
    write_dataset_csv(path.string(), data);
    auto back = read_dataset_csv(path.string());
    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(back[i].class_label == data[i].class_label);
        CHECK(back[i].x1 == data[i].x1);
        CHECK(back[i].x2 == data[i].x2);
        CHECK(back[i].h == data[i].h);
    }
    std::filesystem::remove(path);
}

TEST_CASE("config validation rejects bad values") {
    DatasetConfig cfg;
    cfg.noise_sd = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DatasetConfig{};
    cfg.cov_param = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DatasetConfig{};
    cfg.x1_values = {1.0, 1.0};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
