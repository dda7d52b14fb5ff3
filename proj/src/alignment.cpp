#include "repdiv/alignment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "repdiv/errors.hpp"

namespace repdiv {

namespace {

double sign_pos(double v) { return v < 0.0 ? -1.0 : 1.0; }

}  // namespace

AlignmentFunction AlignmentFunction::init(std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw ConfigError("alignment: dim must be positive");
    AlignmentFunction af;
    Rng rng(seed);
    af.m = gaussian_matrix(rng, dim, dim, 0.0, 1.0 / static_cast<double>(dim));
    af.a.assign(dim, 1.0);
    af.has_params = true;
    af.refresh();
    return af;
}

AlignmentFunction AlignmentFunction::from_matrix(const Matrix& w) {
    if (w.rows == 0 || w.rows != w.cols) throw DimensionError("alignment: square matrix required");
    AlignmentFunction af;
    af.w = w;
    af.w_inv = inverse(w);
    af.has_params = false;
    return af;
}

void AlignmentFunction::refresh() {
    if (!has_params) throw ConfigError("alignment: no parameters to refresh from");
    const std::size_t d = m.rows;
    if (m.cols != d || a.size() != d) throw DimensionError("alignment: parameter shapes");
    p = matmul(m, transpose(m));
    for (std::size_t i = 0; i < d; ++i) p(i, i) += lambda;
    s.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double t = std::tanh(a[i]);
        s[i] = t + lambda * sign_pos(t);
        if (std::fabs(s[i]) < lambda)
            throw ConfigError("alignment: diagonal magnitude fell below lambda");
    }
    w = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) w(i, j) = p(i, j) * s[j];
    w_inv = inverse(w);
    const Matrix check = matmul(w_inv, w);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double want = i == j ? 1.0 : 0.0;
            if (std::fabs(check(i, j) - want) > 1e-6)
                throw ConfigError("alignment: inverse residual exceeds 1e-6");
        }
}

std::string var_id_str(VarId id) {
    switch (id) {
        case VarId::X1: return "var_x1";
        case VarId::X2: return "var_x2";
        case VarId::Extra: return "extra";
    }
    throw ConfigError("var_id_str: unknown variable");
}

void VariableSelector::validate() const {
    if (size == 0 || dim == 0 || start + size > dim)
        throw DimensionError("selector: run out of range");
}

std::vector<VariableSelector> causal_selectors(std::size_t dim, std::size_t subspace_size) {
    return {selector_for(VarId::X1, dim, subspace_size),
            selector_for(VarId::X2, dim, subspace_size)};
}

VariableSelector selector_for(VarId id, std::size_t dim, std::size_t subspace_size) {
    if (2 * subspace_size > dim) throw DimensionError("selector: causal subspaces exceed dim");
    VariableSelector sel;
    sel.var_id = id;
    sel.dim = dim;
    switch (id) {
        case VarId::X1:
            sel.start = 0;
            sel.size = subspace_size;
            break;
        case VarId::X2:
            sel.start = subspace_size;
            sel.size = subspace_size;
            break;
        case VarId::Extra:
            sel.start = 2 * subspace_size;
            sel.size = dim - 2 * subspace_size;
            break;
    }
    sel.validate();
    return sel;
}

Vector apply_alignment(const AlignmentFunction& af, const Vector& h) {
    if (h.size() != af.dim()) throw DimensionError("apply_alignment: input size");
    return matvec(af.w, h);
}

Vector invert_alignment(const AlignmentFunction& af, const Vector& z) {
    if (z.size() != af.dim()) throw DimensionError("invert_alignment: input size");
    return matvec(af.w_inv, z);
}

Vector interchange(const AlignmentFunction& af, const VariableSelector& sel,
                   const Vector& h_trg, const Vector& h_src) {
    const std::size_t d = af.dim();
    if (sel.dim != d || h_trg.size() != d || h_src.size() != d)
        throw DimensionError("interchange: dimension mismatch");
    const Vector z_trg = matvec(af.w, h_trg);
    const Vector z_src = matvec(af.w, h_src);
    Vector z(d);
    for (std::size_t i = 0; i < d; ++i) z[i] = sel.selects(i) ? z_src[i] : z_trg[i];
    return matvec(af.w_inv, z);
}

double das_loss(const Mlp& model, const std::vector<InterventionSample>& samples,
                const AlignmentFunction& af, const VariableSelector& sel) {
    if (samples.empty()) throw EmptyInputError("das_loss: empty batch");
    if (model.mode != Mode::Eval) throw ConfigError("das_loss: model must be frozen in Eval");
    double total = 0.0;
    for (const auto& smp : samples) {
        const Vector h_hat = interchange(af, sel, smp.h_trg, smp.h_src);
        const ForwardTrace t = forward(model, h_hat);
        total -= log_softmax_at(t.logits, smp.counterfactual_label);
    }
    return total / static_cast<double>(samples.size());
}

double evaluate_iia(const Mlp& model, const AlignmentFunction& af,
                    const VariableSelector& sel,
                    const std::vector<InterventionSample>& samples) {
    if (samples.empty()) throw EmptyInputError("evaluate_iia: empty sample list");
    std::size_t hits = 0;
    for (const auto& smp : samples) {
        const Vector h_hat = interchange(af, sel, smp.h_trg, smp.h_src);
        const ForwardTrace t = forward(model, h_hat);
        if (t.predicted == smp.counterfactual_label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::vector<InterventionSample> draw_intervention_samples(
    const DatasetConfig& dcfg, const std::vector<LabeledRep>& pool, VarId variable,
    std::size_t n, Rng& rng, const std::vector<int>* allowed_cf_classes) {
    if (pool.empty()) throw EmptyInputError("draw_intervention_samples: empty pool");
    if (variable == VarId::Extra)
        throw ConfigError("draw_intervention_samples: extra is not a causal variable");
    std::vector<InterventionSample> out;
    out.reserve(n);
    const std::size_t max_attempts = 1000 * (n + 1);
    std::size_t attempts = 0;
    while (out.size() < n) {
        if (++attempts > max_attempts)
            throw ConfigError("draw_intervention_samples: allowed classes unreachable");
        const LabeledRep& trg = pool[rng.next_index(pool.size())];
        const LabeledRep& src = pool[rng.next_index(pool.size())];
        InterventionSample smp;
        smp.h_trg = trg.h;
        smp.h_src = src.h;
        smp.variable = variable;
        smp.key_x1 = variable == VarId::X1 ? src.x1 : trg.x1;
        smp.key_x2 = variable == VarId::X2 ? src.x2 : trg.x2;
        smp.counterfactual_label = grid_class(dcfg, smp.key_x1, smp.key_x2);
        if (smp.counterfactual_label < 0) continue;
        if (allowed_cf_classes) {
            bool ok = false;
            for (int c : *allowed_cf_classes)
                if (c == smp.counterfactual_label) {
                    ok = true;
                    break;
                }
            if (!ok) continue;
        }
        out.push_back(std::move(smp));
    }
    return out;
}

void AlignTrainConfig::validate() const {
    if (behavioral_weight < 0.0 || cl_weight < 0.0)
        throw ConfigError("alignment: loss weights must be nonnegative");
    if (behavioral_weight == 0.0 && cl_weight == 0.0)
        throw ConfigError("alignment: at least one loss weight must be positive");
    if (learning_rate <= 0.0) throw ConfigError("alignment: learning_rate must be > 0");
    if (batch_size == 0 || samples_per_epoch == 0 || eval_samples == 0)
        throw ConfigError("alignment: sample counts must be positive");
    if (variable == VarId::Extra) throw ConfigError("alignment: train on a causal variable");
}

void backprop_w(const AlignmentFunction& af, const Matrix& dw, AlignGradients& g) {
    if (!af.has_params) throw ConfigError("backprop_w: alignment has no parameters");
    const std::size_t d = af.dim();
    if (dw.rows != d || dw.cols != d) throw DimensionError("backprop_w: dW shape");
    // W = P·S column-wise: dP[j][k] = dW[j][k]·s[k]; dM = (dP + dPᵀ)M;
    // ds[k] = Σ_j dW[j][k]·P[j][k]; da[k] = ds[k]·(1 − tanh²(a[k])).
    Matrix dp(d, d);
    Vector ds(d, 0.0);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k) {
            dp(j, k) = dw(j, k) * af.s[k];
            ds[k] += dw(j, k) * af.p(j, k);
        }
    Matrix sym(d, d);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k) sym(j, k) = dp(j, k) + dp(k, j);
    const Matrix dm = matmul(sym, af.m);
    if (g.dm.rows != d) {
        g.dm = Matrix(d, d);
        g.da.assign(d, 0.0);
    }
    for (std::size_t i = 0; i < g.dm.data.size(); ++i) g.dm.data[i] += dm.data[i];
    for (std::size_t k = 0; k < d; ++k) {
        const double t = std::tanh(af.a[k]);
        g.da[k] += ds[k] * (1.0 - t * t);
    }
}

void save_alignment(const std::string& path, const AlignmentFunction& af) {
    if (!af.has_params) throw ConfigError("save_alignment: nothing to save");
    std::ostringstream body;
    body << "alignment-checkpoint v1\n";
    body << "dim " << af.dim() << '\n';
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", af.lambda);
    body << "lambda " << buf << '\n';
    body << "vec m " << af.m.data.size() << '\n';
    for (std::size_t i = 0; i < af.m.data.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%a", af.m.data[i]);
        body << (i ? " " : "") << buf;
    }
    body << '\n';
    body << "vec a " << af.a.size() << '\n';
    for (std::size_t i = 0; i < af.a.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%a", af.a[i]);
        body << (i ? " " : "") << buf;
    }
    body << '\n';
    const std::string text = body.str();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_alignment: cannot open " + path);
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
    out << text << "checksum fnv1a " << buf << '\n';
    if (!out) throw IoError("save_alignment: write failed for " + path);
}

AlignmentFunction load_alignment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_alignment: cannot open " + path);
    std::string body, line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) {
        if (line.rfind("checksum ", 0) == 0) break;
        lines.push_back(line);
        body += line;
        body += '\n';
    }
    {
        std::istringstream ss(line);
        std::string tag, algo, hex;
        ss >> tag >> algo >> hex;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(fnv1a(body)));
        if (tag != "checksum" || algo != "fnv1a" || hex != buf)
            throw IoError("load_alignment: checksum mismatch in " + path);
    }
    if (lines.size() != 7 || lines[0] != "alignment-checkpoint v1")
        throw IoError("load_alignment: malformed file " + path);
    AlignmentFunction af;
    std::size_t d = 0;
    {
        std::istringstream ss(lines[1]);
        std::string tag;
        ss >> tag >> d;
        if (tag != "dim" || d == 0) throw IoError("load_alignment: bad dim line");
    }
    {
        std::istringstream ss(lines[2]);
        std::string tag, tok;
        ss >> tag >> tok;
        if (tag != "lambda") throw IoError("load_alignment: bad lambda line");
        af.lambda = std::strtod(tok.c_str(), nullptr);
    }
    auto read_vec = [&](const std::string& hdr, const std::string& vals,
                        const std::string& name, std::size_t expect) {
        std::istringstream hs(hdr);
        std::string tag, got;
        std::size_t n = 0;
        hs >> tag >> got >> n;
        if (tag != "vec" || got != name || n != expect)
            throw IoError("load_alignment: bad tensor header for " + name);
        Vector v(n);
        std::istringstream vs(vals);
        for (std::size_t i = 0; i < n; ++i) {
            std::string tok;
            if (!(vs >> tok)) throw IoError("load_alignment: short tensor " + name);
            v[i] = std::strtod(tok.c_str(), nullptr);
        }
        return v;
    };
    af.m = Matrix(d, d);
    af.m.data = read_vec(lines[3], lines[4], "m", d * d);
    af.a = read_vec(lines[5], lines[6], "a", d);
    af.has_params = true;
    af.refresh();
    return af;
}

}  // namespace repdiv
