#include "repdiv/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "repdiv/errors.hpp"

namespace repdiv {

void MlpConfig::validate() const {
    if (input_dim == 0 || hidden_width == 0 || n_classes == 0 || batch_size == 0)
        throw ConfigError("mlp: all counts must be positive");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
        throw ConfigError("mlp: dropout_p must be in [0, 1)");
    if (learning_rate <= 0.0) throw ConfigError("mlp: learning_rate must be > 0");
}

Mlp Mlp::init(const MlpConfig& cfg) {
    cfg.validate();
    Mlp m;
    m.config = cfg;
    m.bn0 = BatchNorm(cfg.input_dim);
    m.bn1 = BatchNorm(cfg.hidden_width);
    Rng rng = Rng(cfg.seed).fork(0);
    m.w1 = gaussian_matrix(rng, cfg.hidden_width, cfg.input_dim, 0.0,
                           1.0 / std::sqrt(static_cast<double>(cfg.input_dim)));
    m.b1.assign(cfg.hidden_width, 0.0);
    m.w2 = gaussian_matrix(rng, cfg.n_classes, cfg.hidden_width, 0.0,
                           1.0 / std::sqrt(static_cast<double>(cfg.hidden_width)));
    m.b2.assign(cfg.n_classes, 0.0);
    m.mode = Mode::Eval;
    return m;
}

int argmax_lowest(const Vector& v) {
    if (v.empty()) throw EmptyInputError("argmax_lowest: empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return static_cast<int>(best);
}

Vector softmax(const Vector& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    Vector p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

double log_softmax_at(const Vector& logits, int index) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    return logits[static_cast<std::size_t>(index)] - mx - std::log(z);
}

namespace {

Vector bn_eval_apply(const BatchNorm& bn, const Vector& x) {
    Vector y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
        y[j] = bn.gamma[j] * (x[j] - bn.running_mean[j]) /
                   std::sqrt(bn.running_var[j] + bn.eps) +
               bn.beta[j];
    return y;
}

struct BnCache {
    Vector mean, invstd;
    Matrix xhat;
};

// Train-mode batchnorm on a B x d batch; biased variance normalizes,
// unbiased variance feeds the running average (PyTorch convention).
Matrix bn_forward_train(BatchNorm& bn, const Matrix& x, BnCache& cache,
                        bool update_running) {
    const std::size_t b = x.rows, d = x.cols;
    if (d != bn.dim()) throw DimensionError("batchnorm: width mismatch");
    cache.mean.assign(d, 0.0);
    cache.invstd.assign(d, 0.0);
    cache.xhat = Matrix(b, d);
    Matrix y(b, d);
    for (std::size_t j = 0; j < d; ++j) {
        double mu = 0.0;
        for (std::size_t i = 0; i < b; ++i) mu += x(i, j);
        mu /= static_cast<double>(b);
        double var = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            const double c = x(i, j) - mu;
            var += c * c;
        }
        var /= static_cast<double>(b);
        const double invstd = 1.0 / std::sqrt(var + bn.eps);
        cache.mean[j] = mu;
        cache.invstd[j] = invstd;
        for (std::size_t i = 0; i < b; ++i) {
            const double xh = (x(i, j) - mu) * invstd;
            cache.xhat(i, j) = xh;
            y(i, j) = bn.gamma[j] * xh + bn.beta[j];
        }
        if (update_running) {
            const double var_run =
                b > 1 ? var * static_cast<double>(b) / static_cast<double>(b - 1) : var;
            bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * mu;
            bn.running_var[j] = (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * var_run;
        }
    }
    return y;
}

Matrix bn_backward(const BatchNorm& bn, const BnCache& cache, const Matrix& dy,
                   Vector& dgamma, Vector& dbeta) {
    const std::size_t b = dy.rows, d = dy.cols;
    dgamma.assign(d, 0.0);
    dbeta.assign(d, 0.0);
    Matrix dx(b, d);
    for (std::size_t j = 0; j < d; ++j) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            const double dyv = dy(i, j);
            const double xh = cache.xhat(i, j);
            dgamma[j] += dyv * xh;
            dbeta[j] += dyv;
            const double dxhat = dyv * bn.gamma[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xh;
        }
        const double scale = cache.invstd[j] / static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i) {
            const double dxhat = dy(i, j) * bn.gamma[j];
            dx(i, j) = scale * (static_cast<double>(b) * dxhat - sum_dxhat -
                                cache.xhat(i, j) * sum_dxhat_xhat);
        }
    }
    return dx;
}

struct BatchCache {
    BnCache bn0c, bn1c;
    Matrix y0, z1, dm, a1d, y1, probs;
};

// Train-mode batch forward; mutates running statistics.
Matrix forward_train_batch(Mlp& m, const Matrix& x, Rng& dropout_rng, BatchCache& cache) {
    cache.y0 = bn_forward_train(m.bn0, x, cache.bn0c, true);
    const std::size_t b = x.rows, w = m.config.hidden_width;
    cache.z1 = Matrix(b, w);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t k = 0; k < w; ++k) {
            double s = m.b1[k];
            for (std::size_t j = 0; j < x.cols; ++j) s += m.w1(k, j) * cache.y0(i, j);
            cache.z1(i, k) = s;
        }
    const double p = m.config.dropout_p;
    const double keep_scale = p > 0.0 ? 1.0 / (1.0 - p) : 1.0;
    cache.dm = Matrix(b, w, 1.0);
    cache.a1d = Matrix(b, w);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t k = 0; k < w; ++k) {
            double scale = 1.0;
            if (p > 0.0) scale = dropout_rng.next_uniform() < p ? 0.0 : keep_scale;
            cache.dm(i, k) = scale;
            cache.a1d(i, k) = std::max(0.0, cache.z1(i, k)) * scale;
        }
    cache.y1 = bn_forward_train(m.bn1, cache.a1d, cache.bn1c, true);
    Matrix logits(b, m.config.n_classes);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t c = 0; c < m.config.n_classes; ++c) {
            double s = m.b2[c];
            for (std::size_t k = 0; k < w; ++k) s += m.w2(c, k) * cache.y1(i, k);
            logits(i, c) = s;
        }
    return logits;
}

double batch_cross_entropy(const Matrix& logits, const std::vector<int>& y, Matrix& probs) {
    const std::size_t b = logits.rows;
    probs = Matrix(b, logits.cols);
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const Vector row = logits.row(i);
        loss -= log_softmax_at(row, y[i]);
        const Vector p = softmax(row);
        for (std::size_t c = 0; c < p.size(); ++c) probs(i, c) = p[c];
    }
    return loss / static_cast<double>(b);
}

void backward_batch(const Mlp& m, const Matrix& x, const std::vector<int>& y,
                    const BatchCache& cache, MlpGradients& g) {
    const std::size_t b = x.rows;
    Matrix dlogits = cache.probs;
    for (std::size_t i = 0; i < b; ++i)
        dlogits(i, static_cast<std::size_t>(y[i])) -= 1.0;
    for (double& v : dlogits.data) v /= static_cast<double>(b);

    g.w2 = matmul(transpose(dlogits), cache.y1);
    g.b2.assign(m.config.n_classes, 0.0);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t c = 0; c < m.config.n_classes; ++c) g.b2[c] += dlogits(i, c);

    Matrix dy1 = matmul(dlogits, m.w2);
    Matrix da1d = bn_backward(m.bn1, cache.bn1c, dy1, g.bn1_gamma, g.bn1_beta);

    Matrix dz1(b, m.config.hidden_width);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t k = 0; k < m.config.hidden_width; ++k) {
            const double relu_grad = cache.z1(i, k) > 0.0 ? 1.0 : 0.0;
            dz1(i, k) = da1d(i, k) * cache.dm(i, k) * relu_grad;
        }

    g.w1 = matmul(transpose(dz1), cache.y0);
    g.b1.assign(m.config.hidden_width, 0.0);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t k = 0; k < m.config.hidden_width; ++k) g.b1[k] += dz1(i, k);

    Matrix dy0 = matmul(dz1, m.w1);
    bn_backward(m.bn0, cache.bn0c, dy0, g.bn0_gamma, g.bn0_beta);
}

struct AdamState {
    Vector m, v;
    long t = 0;
    void ensure(std::size_t n) {
        if (m.size() != n) {
            m.assign(n, 0.0);
            v.assign(n, 0.0);
        }
    }
};

void adam_step(AdamState& st, std::vector<double>& param, const std::vector<double>& grad,
               double lr) {
    constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
    st.ensure(param.size());
    ++st.t;
    const double bc1 = 1.0 - std::pow(kB1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(kB2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        st.m[i] = kB1 * st.m[i] + (1.0 - kB1) * grad[i];
        st.v[i] = kB2 * st.v[i] + (1.0 - kB2) * grad[i] * grad[i];
        param[i] -= lr * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + kEps);
    }
}

}  // namespace

ForwardTrace forward(const Mlp& m, const Vector& h) {
    if (m.mode != Mode::Eval) throw ConfigError("forward: model must be in Eval mode");
    if (h.size() != m.config.input_dim) throw DimensionError("forward: input size");
    ForwardTrace t;
    t.input = h;
    t.bn0_out = bn_eval_apply(m.bn0, h);
    t.pre_hidden = add(matvec(m.w1, t.bn0_out), m.b1);
    t.post_hidden.resize(t.pre_hidden.size());
    for (std::size_t i = 0; i < t.pre_hidden.size(); ++i)
        t.post_hidden[i] = std::max(0.0, t.pre_hidden[i]);
    t.dropout_mask.assign(m.config.hidden_width, 1.0);
    t.bn1_out = bn_eval_apply(m.bn1, t.post_hidden);
    t.logits = add(matvec(m.w2, t.bn1_out), m.b2);
    t.predicted = argmax_lowest(t.logits);
    return t;
}

ForwardTrace forward(Mlp& m, const Vector& h, Rng& rng) {
    if (m.mode != Mode::Train) throw ConfigError("forward: rng overload is Train-mode");
    if (h.size() != m.config.input_dim) throw DimensionError("forward: input size");
    Matrix x(1, h.size());
    x.set_row(0, h);
    BatchCache cache;
    const Matrix logits = forward_train_batch(m, x, rng, cache);
    ForwardTrace t;
    t.input = h;
    t.bn0_out = cache.y0.row(0);
    t.pre_hidden = cache.z1.row(0);
    t.post_hidden.resize(t.pre_hidden.size());
    for (std::size_t i = 0; i < t.pre_hidden.size(); ++i)
        t.post_hidden[i] = std::max(0.0, t.pre_hidden[i]);
    t.dropout_mask = cache.dm.row(0);
    t.bn1_out = cache.y1.row(0);
    t.logits = logits.row(0);
    t.predicted = argmax_lowest(t.logits);
    return t;
}

EvalResult eval_from_input(const Mlp& m, const Matrix& h_batch) {
    if (m.mode != Mode::Eval) throw ConfigError("eval_from_input: model must be Eval");
    if (h_batch.cols != m.config.input_dim)
        throw DimensionError("eval_from_input: input size");
    EvalResult res;
    res.classes.resize(h_batch.rows);
    res.probs = Matrix(h_batch.rows, m.config.n_classes);
    for (std::size_t i = 0; i < h_batch.rows; ++i) {
        const ForwardTrace t = forward(m, h_batch.row(i));
        res.classes[i] = t.predicted;
        const Vector p = softmax(t.logits);
        for (std::size_t c = 0; c < p.size(); ++c) res.probs(i, c) = p[c];
    }
    return res;
}

Vector eval_forward_cached(const Mlp& m, const Vector& h, EvalCache& cache) {
    if (m.mode != Mode::Eval) throw ConfigError("eval_forward_cached: model must be Eval");
    const Vector y0 = bn_eval_apply(m.bn0, h);
    cache.pre_hidden = add(matvec(m.w1, y0), m.b1);
    Vector a1(cache.pre_hidden.size());
    for (std::size_t i = 0; i < a1.size(); ++i) a1[i] = std::max(0.0, cache.pre_hidden[i]);
    const Vector y1 = bn_eval_apply(m.bn1, a1);
    cache.logits = add(matvec(m.w2, y1), m.b2);
    cache.probs = softmax(cache.logits);
    return cache.logits;
}

Vector eval_backward_input(const Mlp& m, const EvalCache& cache, const Vector& dlogits) {
    Vector dy1 = matvec_t(m.w2, dlogits);
    for (std::size_t k = 0; k < dy1.size(); ++k) {
        const double slope = m.bn1.gamma[k] / std::sqrt(m.bn1.running_var[k] + m.bn1.eps);
        const double relu_grad = cache.pre_hidden[k] > 0.0 ? 1.0 : 0.0;
        dy1[k] *= slope * relu_grad;
    }
    Vector dh = matvec_t(m.w1, dy1);
    for (std::size_t j = 0; j < dh.size(); ++j)
        dh[j] *= m.bn0.gamma[j] / std::sqrt(m.bn0.running_var[j] + m.bn0.eps);
    return dh;
}

double batch_loss_and_gradients(Mlp& m, const Matrix& x, const std::vector<int>& y,
                                std::uint64_t dropout_seed, MlpGradients* grads) {
    if (x.rows == 0 || x.rows != y.size())
        throw DimensionError("batch_loss_and_gradients: batch shape");
    const Vector rm0 = m.bn0.running_mean, rv0 = m.bn0.running_var;
    const Vector rm1 = m.bn1.running_mean, rv1 = m.bn1.running_var;
    const Mode saved_mode = m.mode;
    m.mode = Mode::Train;
    Rng dropout_rng(dropout_seed);
    BatchCache cache;
    const Matrix logits = forward_train_batch(m, x, dropout_rng, cache);
    const double loss = batch_cross_entropy(logits, y, cache.probs);
    if (grads) backward_batch(m, x, y, cache, *grads);
    m.bn0.running_mean = rm0;
    m.bn0.running_var = rv0;
    m.bn1.running_mean = rm1;
    m.bn1.running_var = rv1;
    m.mode = saved_mode;
    return loss;
}

namespace {

double validation_pass(const Mlp& model, const std::vector<LabeledRep>& val_set,
                       double& accuracy) {
    double loss = 0.0;
    std::size_t correct = 0;
    for (const auto& rep : val_set) {
        const ForwardTrace t = forward(model, rep.h);
        loss -= log_softmax_at(t.logits, rep.class_label);
        if (t.predicted == rep.class_label) ++correct;
    }
    accuracy = static_cast<double>(correct) / static_cast<double>(val_set.size());
    return loss / static_cast<double>(val_set.size());
}

}  // namespace

MlpTrainResult train_mlp(const std::vector<LabeledRep>& train_set,
                         const std::vector<LabeledRep>& val_set, const MlpConfig& cfg) {
    cfg.validate();
    if (train_set.empty() || val_set.empty())
        throw EmptyInputError("train_mlp: empty train or validation set");
    for (const auto& rep : train_set)
        if (rep.class_label < 0 ||
            static_cast<std::size_t>(rep.class_label) >= cfg.n_classes)
            throw ConfigError("train_mlp: label out of range");

    MlpTrainResult out;
    out.model = Mlp::init(cfg);
    if (cfg.max_epochs == 0) return out;

    Rng root(cfg.seed);
    Rng shuffle_rng = root.fork(1);
    Rng dropout_rng = root.fork(2);

    Mlp& model = out.model;
    AdamState s_bn0g, s_bn0b, s_w1, s_b1, s_bn1g, s_bn1b, s_w2, s_b2;

    Mlp best = model;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_index(i)]);

        model.mode = Mode::Train;
        double epoch_loss = 0.0;
        std::size_t counted = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, order.size());
            const std::size_t b = stop - start;
            if (b < 2) continue;  // batch statistics need at least two samples
            Matrix x(b, cfg.input_dim);
            std::vector<int> y(b);
            for (std::size_t i = 0; i < b; ++i) {
                x.set_row(i, train_set[order[start + i]].h);
                y[i] = train_set[order[start + i]].class_label;
            }
            BatchCache cache;
            const Matrix logits = forward_train_batch(model, x, dropout_rng, cache);
            const double loss = batch_cross_entropy(logits, y, cache.probs);
            MlpGradients g;
            backward_batch(model, x, y, cache, g);
            adam_step(s_bn0g, model.bn0.gamma, g.bn0_gamma, cfg.learning_rate);
            adam_step(s_bn0b, model.bn0.beta, g.bn0_beta, cfg.learning_rate);
            adam_step(s_w1, model.w1.data, g.w1.data, cfg.learning_rate);
            adam_step(s_b1, model.b1, g.b1, cfg.learning_rate);
            adam_step(s_bn1g, model.bn1.gamma, g.bn1_gamma, cfg.learning_rate);
            adam_step(s_bn1b, model.bn1.beta, g.bn1_beta, cfg.learning_rate);
            adam_step(s_w2, model.w2.data, g.w2.data, cfg.learning_rate);
            adam_step(s_b2, model.b2, g.b2, cfg.learning_rate);
            epoch_loss += loss * static_cast<double>(b);
            counted += b;
        }
        model.mode = Mode::Eval;

        EpochStats st;
        st.train_loss = counted ? epoch_loss / static_cast<double>(counted) : 0.0;
        st.val_loss = validation_pass(model, val_set, st.val_accuracy);
        out.history.push_back(st);

        if (st.val_loss < best_val) {
            best_val = st.val_loss;
            best = model;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= cfg.early_stop_patience) break;
        }
    }

    best.mode = Mode::Eval;
    out.model = best;
    return out;
}

MlpTrainResult train_mlp(const std::vector<LabeledRep>& dataset, const MlpConfig& cfg) {
    if (dataset.empty()) throw EmptyInputError("train_mlp: empty dataset");
    std::vector<std::size_t> idx(dataset.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng = Rng(cfg.seed).fork(3);
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.next_index(i)]);
    const std::size_t n_train =
        std::max<std::size_t>(1, static_cast<std::size_t>(idx.size() * 0.8));
    std::vector<LabeledRep> train_set, val_set;
    for (std::size_t i = 0; i < idx.size(); ++i)
        (i < n_train ? train_set : val_set).push_back(dataset[idx[i]]);
    if (val_set.empty()) val_set.push_back(train_set.back());
    return train_mlp(train_set, val_set, cfg);
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

void emit_vec(std::ostringstream& out, const char* name, const Vector& v) {
    out << "vec " << name << ' ' << v.size() << '\n';
    char buf[48];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%a", v[i]);
        out << (i ? " " : "") << buf;
    }
    out << '\n';
}

class CheckpointReader {
  public:
    explicit CheckpointReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw IoError("checkpoint: cannot open " + path);
    }

    std::string line() {
        std::string l;
        if (!std::getline(in_, l)) throw IoError("checkpoint: truncated " + path_);
        body_ += l;
        body_ += '\n';
        return l;
    }

    Vector vec(const std::string& name, std::size_t expect) {
        std::istringstream hdr(line());
        std::string tag, got;
        std::size_t n = 0;
        hdr >> tag >> got >> n;
        if (tag != "vec" || got != name || n != expect)
            throw IoError("checkpoint: bad tensor header for " + name + " in " + path_);
        std::istringstream vals(line());
        Vector v(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::string tok;
            if (!(vals >> tok)) throw IoError("checkpoint: short tensor " + name);
            v[i] = std::strtod(tok.c_str(), nullptr);
        }
        return v;
    }

    // Checksum line excluded from the hashed body.
    void verify_checksum() {
        std::string l;
        if (!std::getline(in_, l)) throw IoError("checkpoint: missing checksum in " + path_);
        std::istringstream ss(l);
        std::string tag, algo, hex;
        ss >> tag >> algo >> hex;
        if (tag != "checksum" || algo != "fnv1a")
            throw IoError("checkpoint: malformed checksum line in " + path_);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(fnv1a(body_)));
        if (hex != buf) throw IoError("checkpoint: checksum mismatch in " + path_);
    }

  private:
    std::string path_;
    std::ifstream in_;
    std::string body_;
};

void write_with_checksum(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(body)));
    out << body << "checksum fnv1a " << buf << '\n';
    if (!out) throw IoError("checkpoint: write failed for " + path);
}

}  // namespace

void save_mlp(const std::string& path, const Mlp& m) {
    std::ostringstream body;
    body << "mlp-checkpoint v1\n";
    body << "dims " << m.config.input_dim << ' ' << m.config.hidden_width << ' '
         << m.config.n_classes << '\n';
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", m.config.dropout_p);
    body << "dropout_p " << buf << '\n';
    emit_vec(body, "bn0.gamma", m.bn0.gamma);
    emit_vec(body, "bn0.beta", m.bn0.beta);
    emit_vec(body, "bn0.running_mean", m.bn0.running_mean);
    emit_vec(body, "bn0.running_var", m.bn0.running_var);
    emit_vec(body, "w1", m.w1.data);
    emit_vec(body, "b1", m.b1);
    emit_vec(body, "bn1.gamma", m.bn1.gamma);
    emit_vec(body, "bn1.beta", m.bn1.beta);
    emit_vec(body, "bn1.running_mean", m.bn1.running_mean);
    emit_vec(body, "bn1.running_var", m.bn1.running_var);
    emit_vec(body, "w2", m.w2.data);
    emit_vec(body, "b2", m.b2);
    write_with_checksum(path, body.str());
}

Mlp load_mlp(const std::string& path) {
    CheckpointReader r(path);
    if (r.line() != "mlp-checkpoint v1")
        throw IoError("checkpoint: not an mlp checkpoint: " + path);
    MlpConfig cfg;
    {
        std::istringstream ss(r.line());
        std::string tag;
        ss >> tag >> cfg.input_dim >> cfg.hidden_width >> cfg.n_classes;
        if (tag != "dims") throw IoError("checkpoint: missing dims in " + path);
    }
    {
        std::istringstream ss(r.line());
        std::string tag, tok;
        ss >> tag >> tok;
        if (tag != "dropout_p") throw IoError("checkpoint: missing dropout_p in " + path);
        cfg.dropout_p = std::strtod(tok.c_str(), nullptr);
    }
    Mlp m;
    m.config = cfg;
    m.bn0 = BatchNorm(cfg.input_dim);
    m.bn1 = BatchNorm(cfg.hidden_width);
    m.bn0.gamma = r.vec("bn0.gamma", cfg.input_dim);
    m.bn0.beta = r.vec("bn0.beta", cfg.input_dim);
    m.bn0.running_mean = r.vec("bn0.running_mean", cfg.input_dim);
    m.bn0.running_var = r.vec("bn0.running_var", cfg.input_dim);
    m.w1 = Matrix(cfg.hidden_width, cfg.input_dim);
    m.w1.data = r.vec("w1", cfg.hidden_width * cfg.input_dim);
    m.b1 = r.vec("b1", cfg.hidden_width);
    m.bn1.gamma = r.vec("bn1.gamma", cfg.hidden_width);
    m.bn1.beta = r.vec("bn1.beta", cfg.hidden_width);
    m.bn1.running_mean = r.vec("bn1.running_mean", cfg.hidden_width);
    m.bn1.running_var = r.vec("bn1.running_var", cfg.hidden_width);
    m.w2 = Matrix(cfg.n_classes, cfg.hidden_width);
    m.w2.data = r.vec("w2", cfg.n_classes * cfg.hidden_width);
    m.b2 = r.vec("b2", cfg.n_classes);
    r.verify_checksum();
    m.mode = Mode::Eval;
    return m;
}

}  // namespace repdiv
