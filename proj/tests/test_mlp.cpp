#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "repdiv/errors.hpp"
#include "repdiv/mlp.hpp"
#include "repdiv/rng.hpp"
#include "repdiv/synthdata.hpp"

using namespace repdiv;

namespace {

MlpConfig tiny_config() {
    MlpConfig cfg;
    cfg.input_dim = 6;
    cfg.hidden_width = 8;
    cfg.n_classes = 3;
    cfg.dropout_p = 0.0;  // keep the loss surface smooth for finite differences
    cfg.seed = 7;
    return cfg;
}

Matrix random_batch(std::size_t n, std::size_t d, Rng& rng) {
    Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.next_gaussian(0.0, 1.0);
    return x;
}

// Central finite difference of the batch loss w.r.t. one scalar parameter.
double fd_loss(Mlp& m, double* param, const Matrix& x, const std::vector<int>& y,
               std::uint64_t dropout_seed, double eps) {
    const double saved = *param;
    *param = saved + eps;
    double up = batch_loss_and_gradients(m, x, y, dropout_seed, nullptr);
    *param = saved - eps;
    double down = batch_loss_and_gradients(m, x, y, dropout_seed, nullptr);
    *param = saved;
    return (up - down) / (2.0 * eps);
}

void check_close_rel(double analytic, double numeric, double rel_tol, double abs_floor) {
    const double denom = std::max(std::abs(numeric), abs_floor);
    CHECK(std::abs(analytic - numeric) / denom <= rel_tol);
}

}  // namespace

TEST_CASE("softmax sums to one and matches a hand case") {
    Vector logits{1.0, 2.0, 3.0};
    Vector p = softmax(logits);
    double total = 0.0;
    for (double v : p) total += v;
    CHECK(std::abs(total - 1.0) < 1e-12);
    // exp(k)/sum, hand-evaluated
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    CHECK(std::abs(p[0] - std::exp(1.0) / z) < 1e-12);
    CHECK(std::abs(p[2] - std::exp(3.0) / z) < 1e-12);
    CHECK(std::abs(log_softmax_at(logits, 2) - std::log(p[2])) < 1e-10);
}

TEST_CASE("softmax is shift invariant and stable for large logits") {
    Vector a{1000.0, 1001.0, 1002.0};
    Vector p = softmax(a);
    for (double v : p) CHECK(std::isfinite(v));
    Vector b{0.0, 1.0, 2.0};
    Vector q = softmax(b);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
    CHECK(std::isfinite(log_softmax_at(a, 0)));
}

TEST_CASE("argmax_lowest breaks ties toward lower index") {
    CHECK(argmax_lowest(Vector{1.0, 3.0, 3.0, 2.0}) == 1);
    CHECK(argmax_lowest(Vector{5.0}) == 0);
    CHECK(argmax_lowest(Vector{-1.0, -1.0}) == 0);
}

TEST_CASE("init shapes follow the config and eval forward is deterministic") {
    MlpConfig cfg = tiny_config();
    Mlp m = Mlp::init(cfg);
    CHECK(m.w1.rows == cfg.hidden_width);
    CHECK(m.w1.cols == cfg.input_dim);
    CHECK(m.w2.rows == cfg.n_classes);
    CHECK(m.w2.cols == cfg.hidden_width);
    CHECK(m.b1.size() == cfg.hidden_width);
    CHECK(m.b2.size() == cfg.n_classes);
    CHECK(m.bn0.dim() == cfg.input_dim);
    CHECK(m.bn1.dim() == cfg.hidden_width);
    CHECK(m.mode == Mode::Eval);

    Vector h{0.3, -0.2, 1.1, 0.0, -0.7, 0.25};
    ForwardTrace t1 = forward(m, h);
    ForwardTrace t2 = forward(m, h);
    CHECK(t1.logits == t2.logits);
    CHECK(t1.predicted == t2.predicted);
    for (double v : t1.dropout_mask) CHECK(v == 1.0);
    // ReLU invariant: post_hidden is element-wise max(pre, 0) after bn? The
    // layer order is bn0 -> affine -> ReLU, so post = max(pre_hidden, 0).
    for (std::size_t i = 0; i < t1.pre_hidden.size(); ++i)
        CHECK(t1.post_hidden[i] == std::max(t1.pre_hidden[i], 0.0));
}

TEST_CASE("train-mode forward on a fresh model centers the single sample") {
    // Batch statistics of a batch of one normalize the sample to zero (up to
    // eps), so bn0_out is beta exactly when gamma/beta are at init.
    MlpConfig cfg = tiny_config();
    Mlp m = Mlp::init(cfg);
    m.mode = Mode::Train;
    Rng rng(3);
    Vector h{0.5, -1.5, 2.0, 0.0, 3.0, -0.25};
    ForwardTrace t = forward(m, h, rng);
    for (double v : t.bn0_out) CHECK(std::abs(v) < 1e-9);
    // Running stats moved toward the sample.
    bool moved = false;
    for (std::size_t i = 0; i < m.bn0.dim(); ++i)
        if (std::abs(m.bn0.running_mean[i]) > 1e-12) moved = true;
    CHECK(moved);
}

TEST_CASE("eval_from_input rejects Train mode and returns row-stochastic probs") {
    MlpConfig cfg = tiny_config();
    Mlp m = Mlp::init(cfg);
    Rng rng(11);
    Matrix batch = random_batch(5, cfg.input_dim, rng);

    m.mode = Mode::Train;
    CHECK_THROWS_AS(eval_from_input(m, batch), ConfigError);

    m.mode = Mode::Eval;
    EvalResult res = eval_from_input(m, batch);
    CHECK(res.classes.size() == 5);
    CHECK(res.probs.rows == 5);
    CHECK(res.probs.cols == cfg.n_classes);
    for (std::size_t i = 0; i < 5; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < cfg.n_classes; ++j) {
            CHECK(res.probs(i, j) >= 0.0);
            total += res.probs(i, j);
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
        CHECK(res.classes[i] >= 0);
        CHECK(res.classes[i] < static_cast<int>(cfg.n_classes));
    }
}

TEST_CASE("eval_forward_cached matches forward and backward matches finite differences") {
    MlpConfig cfg = tiny_config();
    Mlp m = Mlp::init(cfg);
    Rng rng(5);
    Vector h(cfg.input_dim);
    for (auto& v : h) v = rng.next_gaussian(0.0, 1.0);
    // Scatter the running stats so the eval path is nontrivial.
    for (std::size_t i = 0; i < m.bn0.dim(); ++i) {
        m.bn0.running_mean[i] = rng.next_gaussian(0.0, 0.3);
        m.bn0.running_var[i] = 1.0 + 0.2 * rng.next_uniform();
    }
    for (std::size_t i = 0; i < m.bn1.dim(); ++i) {
        m.bn1.running_mean[i] = rng.next_gaussian(0.0, 0.3);
        m.bn1.running_var[i] = 1.0 + 0.2 * rng.next_uniform();
    }

    EvalCache cache;
    Vector logits = eval_forward_cached(m, h, cache);
    ForwardTrace t = forward(m, h);
    REQUIRE(logits.size() == t.logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i)
        CHECK(std::abs(logits[i] - t.logits[i]) < 1e-12);

    // d(loss)/d(input) for loss = -log softmax(target), via the cached pass.
    const int target = 1;
    Vector dlogits = cache.probs;
    dlogits[target] -= 1.0;
    Vector grad = eval_backward_input(m, cache, dlogits);
    REQUIRE(grad.size() == h.size());

    const double eps = 1e-5;
    for (std::size_t i = 0; i < h.size(); ++i) {
        Vector hp = h, hm = h;
        hp[i] += eps;
        hm[i] -= eps;
        EvalCache cp, cm;
        double up = -log_softmax_at(eval_forward_cached(m, hp, cp), target);
        double down = -log_softmax_at(eval_forward_cached(m, hm, cm), target);
        double numeric = (up - down) / (2.0 * eps);
        check_close_rel(grad[i], numeric, 1e-4, 1e-8);
    }
}

TEST_CASE("batch parameter gradients match central finite differences") {
    MlpConfig cfg = tiny_config();
    Mlp m = Mlp::init(cfg);
    Rng rng(17);
    const std::size_t n = 12;
    Matrix x = random_batch(n, cfg.input_dim, rng);
    std::vector<int> y(n);
    for (auto& c : y) c = static_cast<int>(rng.next_index(cfg.n_classes));

    const std::uint64_t drop_seed = 99;
    MlpGradients g;
    double base = batch_loss_and_gradients(m, x, y, drop_seed, &g);
    CHECK(std::isfinite(base));
    CHECK(base > 0.0);

    const double eps = 1e-5;
    const double rel = 1e-4;
    const double floor = 1e-6;

    // Spot-check every parameter family, full coverage on the small tensors.
    for (std::size_t i = 0; i < cfg.input_dim; ++i) {
        check_close_rel(g.bn0_gamma[i], fd_loss(m, &m.bn0.gamma[i], x, y, drop_seed, eps), rel, floor);
        check_close_rel(g.bn0_beta[i], fd_loss(m, &m.bn0.beta[i], x, y, drop_seed, eps), rel, floor);
    }
    for (std::size_t i = 0; i < cfg.hidden_width; ++i) {
        check_close_rel(g.b1[i], fd_loss(m, &m.b1[i], x, y, drop_seed, eps), rel, floor);
        check_close_rel(g.bn1_gamma[i], fd_loss(m, &m.bn1.gamma[i], x, y, drop_seed, eps), rel, floor);
        check_close_rel(g.bn1_beta[i], fd_loss(m, &m.bn1.beta[i], x, y, drop_seed, eps), rel, floor);
        for (std::size_t j = 0; j < cfg.input_dim; ++j)
            check_close_rel(g.w1(i, j), fd_loss(m, &m.w1(i, j), x, y, drop_seed, eps), rel, floor);
    }
    for (std::size_t i = 0; i < cfg.n_classes; ++i) {
        check_close_rel(g.b2[i], fd_loss(m, &m.b2[i], x, y, drop_seed, eps), rel, floor);
        for (std::size_t j = 0; j < cfg.hidden_width; ++j)
            check_close_rel(g.w2(i, j), fd_loss(m, &m.w2(i, j), x, y, drop_seed, eps), rel, floor);
    }
}

TEST_CASE("batch gradients with dropout enabled still match finite differences") {
    // The dropout mask stream is fixed by dropout_seed, so the loss stays a
    // smooth function of the parameters and central differences apply.
    MlpConfig cfg = tiny_config();
    cfg.dropout_p = 0.5;
    Mlp m = Mlp::init(cfg);
    Rng rng(23);
    const std::size_t n = 8;
    Matrix x = random_batch(n, cfg.input_dim, rng);
    std::vector<int> y(n);
    for (auto& c : y) c = static_cast<int>(rng.next_index(cfg.n_classes));

    MlpGradients g;
    batch_loss_and_gradients(m, x, y, 4242, &g);
    const double eps = 1e-5;
    // The w1 block exercises bn0, dropout and both affines end to end.
    for (std::size_t i = 0; i < cfg.hidden_width; i += 3)
        for (std::size_t j = 0; j < cfg.input_dim; ++j)
            check_close_rel(g.w1(i, j), fd_loss(m, &m.w1(i, j), x, y, 4242, eps), 1e-3, 1e-6);
    for (std::size_t i = 0; i < cfg.n_classes; ++i)
        check_close_rel(g.b2[i], fd_loss(m, &m.b2[i], x, y, 4242, eps), 1e-3, 1e-6);
}

TEST_CASE("batch_loss_and_gradients restores model state") {
    MlpConfig cfg = tiny_config();
    Mlp m = Mlp::init(cfg);
    Rng rng(31);
    Matrix x = random_batch(4, cfg.input_dim, rng);
    std::vector<int> y{0, 1, 2, 0};

    Vector mean_before = m.bn0.running_mean;
    Vector var_before = m.bn1.running_var;
    Mode mode_before = m.mode;
    batch_loss_and_gradients(m, x, y, 1, nullptr);
    CHECK(m.bn0.running_mean == mean_before);
    CHECK(m.bn1.running_var == var_before);
    CHECK(m.mode == mode_before);
}

TEST_CASE("training on the grid dataset reaches high validation accuracy") {
    DatasetConfig dcfg;
    dcfg.samples_per_class = 40;
    dcfg.seed = 2;
    std::vector<LabeledRep> data = generate_dataset(dcfg);

    MlpConfig cfg;
    cfg.seed = 2;
    cfg.max_epochs = 60;
    MlpTrainResult res = train_mlp(data, cfg);
    REQUIRE(!res.history.empty());
    CHECK(res.history.back().val_accuracy >= 0.0);
    double best_acc = 0.0;
    for (const auto& st : res.history) best_acc = std::max(best_acc, st.val_accuracy);
    CHECK(best_acc >= 0.95);
    CHECK(res.model.mode == Mode::Eval);

    // The returned snapshot scores at least as well as the final epoch.
    Matrix val(data.size() / 5, cfg.input_dim);  // any subset works as a probe
    std::vector<int> labels;
    for (std::size_t i = 0; i < val.rows; ++i) {
        val.set_row(i, data[i * 5].h);
        labels.push_back(data[i * 5].label);
    }
    EvalResult ev = eval_from_input(res.model, val);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (ev.classes[i] == labels[i]) ++hits;
    CHECK(static_cast<double>(hits) / labels.size() >= 0.9);
}

TEST_CASE("checkpoint round-trip is bit-exact and detects corruption") {
    MlpConfig cfg = tiny_config();
    Mlp m = Mlp::init(cfg);
    // Perturb state so every tensor differs from init defaults.
    Rng rng(41);
    for (auto& v : m.b1) v = rng.next_gaussian(0.0, 1.0);
    for (auto& v : m.bn1.running_var) v = 0.5 + rng.next_uniform();
    m.bn0.running_mean[2] = -3.25;

    const std::string path = "test_mlp_ckpt.tmp";
    save_mlp(path, m);
    Mlp back = load_mlp(path);
    CHECK(back.w1.data == m.w1.data);
    CHECK(back.w2.data == m.w2.data);
    CHECK(back.b1 == m.b1);
    CHECK(back.b2 == m.b2);
    CHECK(back.bn0.running_mean == m.bn0.running_mean);
    CHECK(back.bn1.running_var == m.bn1.running_var);
    CHECK(back.config.input_dim == cfg.input_dim);
    CHECK(back.config.hidden_width == cfg.hidden_width);
    CHECK(back.config.n_classes == cfg.n_classes);

    // Flip one character of the payload: the checksum must catch it.
    FILE* f = std::fopen(path.c_str(), "rb");
    REQUIRE(f != nullptr);
    std::fseek(f, 0, SEEK_END);
    long size = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::string bytes(static_cast<std::size_t>(size), '\0');
    REQUIRE(std::fread(bytes.data(), 1, bytes.size(), f) == bytes.size());
    std::fclose(f);
    std::size_t pos = bytes.find("0x");
    REQUIRE(pos != std::string::npos);
    pos = bytes.find("0x", pos + 2);  // second hexfloat, inside the payload
    REQUIRE(pos != std::string::npos);
    bytes[pos + 2] = bytes[pos + 2] == '1' ? '2' : '1';
    f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    CHECK_THROWS_AS(load_mlp(path), IoError);
    std::filesystem::remove(path);
}

TEST_CASE("loading a missing checkpoint throws") {
    CHECK_THROWS_AS(load_mlp("definitely_missing_dir/nope.ckpt"), IoError);
}

TEST_CASE("fnv1a matches published reference values") {
    // Standard FNV-1a 64-bit test vectors.
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("config validation rejects degenerate settings") {
    MlpConfig cfg = tiny_config();
    cfg.hidden_width = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.dropout_p = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.n_classes = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
