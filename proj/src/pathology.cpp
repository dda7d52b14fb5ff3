#include "repdiv/pathology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "repdiv/errors.hpp"
#include "repdiv/pca.hpp"

namespace repdiv {

std::size_t PiecewiseLinearCircuit::input_dim() const {
    if (layers.empty()) throw ConfigError("circuit: no layers");
    return layers.front().w.cols;
}

std::size_t PiecewiseLinearCircuit::output_dim() const {
    if (layers.empty()) throw ConfigError("circuit: no layers");
    return layers.back().w.rows;
}

void PiecewiseLinearCircuit::validate() const {
    if (layers.empty()) throw ConfigError("circuit: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.w.rows == 0 || l.w.cols == 0 || l.b.size() != l.w.rows)
            throw DimensionError("circuit: layer shape");
        if (i + 1 < layers.size() && layers[i + 1].w.cols != l.w.rows)
            throw DimensionError("circuit: layer chain mismatch");
    }
    if (has_context_slot && context_layer >= layers.size())
        throw DimensionError("circuit: context layer out of range");
}

CircuitResult circuit_forward(const PiecewiseLinearCircuit& c, const Vector& h,
                              const Vector* context) {
    c.validate();
    if (h.size() != c.input_dim()) throw DimensionError("circuit_forward: input size");
    if (context && !c.has_context_slot)
        throw ConfigError("circuit_forward: circuit takes no context");
    CircuitResult res;
    Vector x = h;
    for (std::size_t i = 0; i < c.layers.size(); ++i) {
        const auto& l = c.layers[i];
        Vector pre = add(matvec(l.w, x), l.b);
        res.pre_activations.push_back(pre);
        Vector post = pre;
        if (l.relu)
            for (double& v : post) v = std::max(0.0, v);
        if (c.has_context_slot && c.context_layer == i && context) {
            if (context->size() != post.size())
                throw DimensionError("circuit_forward: context size");
            post = add(post, *context);
        }
        res.post_activations.push_back(post);
        x = std::move(post);
    }
    res.output = res.post_activations.back();
    for (double v : res.output) res.score += v;
    if (c.readout == Readout::ArgmaxFirstIndex)
        res.predicted_class = argmax_lowest(res.output);
    return res;
}

std::vector<PiecewiseLinearCircuit> builtin_circuits() {
    std::vector<PiecewiseLinearCircuit> out;

    PiecewiseLinearCircuit score;
    score.name = "hidden_pathway_score";
    CircuitLayer l0;
    l0.w = Matrix(3, 4);
    const double w_score[3][4] = {
        {0.75, 0.25, 0.0, 0.5}, {0.0, 1.0, 0.0, 0.0}, {1.0, 1.0, -1.0, -1.0}};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) l0.w(i, j) = w_score[i][j];
    l0.b = {-0.5, -0.5, 0.0};
    l0.relu = true;
    score.layers.push_back(l0);
    score.readout = Readout::ScoreSign;
    out.push_back(score);

    PiecewiseLinearCircuit ctx;
    ctx.name = "dormant_context_classifier";
    CircuitLayer c0;
    c0.w = Matrix(4, 4);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) c0.w(i, j) = w_score[i][j];
    c0.b = {-0.5, -0.5, 0.0, 0.0};
    c0.relu = true;
    ctx.layers.push_back(c0);
    CircuitLayer c1;
    c1.w = Matrix(3, 4);
    const double w_out[3][4] = {
        {1.0, 1.0, 0.5, 0.0}, {0.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 1.0}};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) c1.w(i, j) = w_out[i][j];
    c1.b = {0.0, 0.25, -1.0};
    c1.relu = false;
    ctx.layers.push_back(c1);
    ctx.readout = Readout::ArgmaxFirstIndex;
    ctx.has_context_slot = true;
    ctx.context_layer = 0;
    out.push_back(ctx);

    PiecewiseLinearCircuit balanced;
    balanced.name = "balanced_score";
    CircuitLayer b0;
    b0.w = Matrix(1, 4);
    b0.w(0, 0) = 1.0;
    b0.w(0, 1) = -1.0;
    b0.w(0, 2) = 0.5;
    b0.w(0, 3) = 0.5;
    b0.b = {0.0};
    b0.relu = false;
    balanced.layers.push_back(b0);
    balanced.readout = Readout::ScoreSign;
    out.push_back(balanced);

    return out;
}

std::vector<Vector> builtin_class_a() {
    return {{1.0, 0.0, 1.0, 0.0}, {0.0, 1.0, 1.0, 0.0}};
}

std::vector<Vector> builtin_class_b() {
    return {{0.0, 0.0, 1.0, 0.0}, {0.0, 0.0, 1.0, 1.0}};
}

Vector mean_diff_vector(const std::vector<Vector>& class_a,
                        const std::vector<Vector>& class_b) {
    if (class_a.empty() || class_b.empty())
        throw EmptyInputError("mean_diff_vector: empty class");
    Vector mean_a(class_a.front().size(), 0.0);
    for (const auto& v : class_a) axpy(1.0, v, mean_a);
    for (double& x : mean_a) x /= static_cast<double>(class_a.size());
    Vector mean_b(class_b.front().size(), 0.0);
    for (const auto& v : class_b) axpy(1.0, v, mean_b);
    for (double& x : mean_b) x /= static_cast<double>(class_b.size());
    return sub(mean_a, mean_b);
}

Vector coordinate_patch(const PatchSet& s, const Vector& h_src, const Vector& h_trg) {
    if (h_src.size() != h_trg.size()) throw DimensionError("coordinate_patch: sizes");
    Vector out = h_trg;
    for (std::size_t i : s.indices) {
        if (i >= out.size()) throw DimensionError("coordinate_patch: index out of range");
        out[i] = h_src[i];
    }
    return out;
}

ClosureResult patch_closure_check(const std::vector<Vector>& points) {
    if (points.empty()) throw EmptyInputError("patch_closure_check: empty set");
    const std::size_t d = points.front().size();
    for (const auto& p : points)
        if (p.size() != d) throw DimensionError("patch_closure_check: ragged set");
    const std::set<Vector> members(points.begin(), points.end());

    std::vector<std::vector<double>> axes(d);
    for (std::size_t i = 0; i < d; ++i) {
        std::set<double> vals;
        for (const auto& p : members) vals.insert(p[i]);
        axes[i].assign(vals.begin(), vals.end());
    }
    double product = 1.0;
    for (const auto& axis : axes) product *= static_cast<double>(axis.size());
    if (product > 1e7)
        throw ConfigError("patch_closure_check: coordinate product too large");

    ClosureResult res;
    if (static_cast<double>(members.size()) == product) {
        res.closed = true;
        return res;
    }

    // First product tuple missing from the set, coordinate 0 varying fastest.
    std::vector<std::size_t> idx(d, 0);
    Vector witness;
    for (;;) {
        Vector t(d);
        for (std::size_t i = 0; i < d; ++i) t[i] = axes[i][idx[i]];
        if (!members.count(t)) {
            witness = std::move(t);
            break;
        }
        std::size_t i = 0;
        while (i < d && ++idx[i] == axes[i].size()) {
            idx[i] = 0;
            ++i;
        }
        if (i == d) throw ConfigError("patch_closure_check: projection bookkeeping");
    }

    // Proof construction: start anywhere and patch one coordinate at a time
    // from a member carrying the witness value there.
    res.witness = witness;
    Vector current = *members.begin();
    for (std::size_t kk = 0; kk < d; ++kk) {
        const Vector* source = nullptr;
        for (const auto& p : members)
            if (p[kk] == witness[kk]) {
                source = &p;
                break;
            }
        if (!source) throw ConfigError("patch_closure_check: axis value lost");
        PatchTraceStep step;
        step.coord = kk;
        step.source = *source;
        current = coordinate_patch(PatchSet{{kk}}, *source, current);
        step.result = current;
        res.trace.push_back(std::move(step));
    }
    res.closed = false;
    return res;
}

bool HiddenPathwayReport::unit_flagged(std::size_t unit) const {
    for (const auto& f : flags)
        if (f.unit == unit) return true;
    return false;
}

namespace {

// Per-unit activity booleans across every ReLU layer, in layer order.
std::vector<bool> circuit_activity(const PiecewiseLinearCircuit& c, const Vector& h) {
    const CircuitResult res = circuit_forward(c, h);
    std::vector<bool> act;
    for (std::size_t i = 0; i < c.layers.size(); ++i) {
        if (!c.layers[i].relu) continue;
        for (double v : res.post_activations[i]) act.push_back(v > kActiveThreshold);
    }
    return act;
}

std::vector<bool> mlp_activity(const Mlp& model, const Vector& h) {
    const ForwardTrace t = forward(model, h);
    std::vector<bool> act;
    act.reserve(t.post_hidden.size());
    for (double v : t.post_hidden) act.push_back(v > kActiveThreshold);
    return act;
}

template <typename ActivityFn>
HiddenPathwayReport audit_impl(ActivityFn&& activity,
                               const std::map<int, std::vector<Vector>>& natural_by_class,
                               const std::vector<std::pair<Vector, int>>& intervened) {
    HiddenPathwayReport report;
    if (intervened.empty()) return report;

    std::map<int, std::vector<bool>> natural_active;
    for (const auto& [v, intended] : intervened) {
        (void)v;
        if (natural_active.count(intended)) continue;
        const auto it = natural_by_class.find(intended);
        if (it == natural_by_class.end() || it->second.empty())
            throw EmptyInputError("relu_pattern_audit: no naturals for intended class");
        std::vector<bool> any;
        for (const auto& nat : it->second) {
            const std::vector<bool> act = activity(nat);
            if (any.empty()) any.assign(act.size(), false);
            for (std::size_t u = 0; u < act.size(); ++u)
                if (act[u]) any[u] = true;
        }
        natural_active[intended] = std::move(any);
    }

    for (std::size_t s = 0; s < intervened.size(); ++s) {
        const auto& [v, intended] = intervened[s];
        const std::vector<bool> act = activity(v);
        report.n_units = act.size();
        const std::vector<bool>& allowed = natural_active[intended];
        for (std::size_t u = 0; u < act.size(); ++u)
            if (act[u] && !allowed[u]) report.flags.push_back({u, s, intended});
    }
    return report;
}

}  // namespace

HiddenPathwayReport relu_pattern_audit(
    const PiecewiseLinearCircuit& c,
    const std::map<int, std::vector<Vector>>& natural_by_class,
    const std::vector<std::pair<Vector, int>>& intervened) {
    return audit_impl([&](const Vector& h) { return circuit_activity(c, h); },
                      natural_by_class, intervened);
}

HiddenPathwayReport relu_pattern_audit(
    const Mlp& model, const std::map<int, std::vector<Vector>>& natural_by_class,
    const std::vector<std::pair<Vector, int>>& intervened) {
    return audit_impl([&](const Vector& h) { return mlp_activity(model, h); },
                      natural_by_class, intervened);
}

namespace {

// Euclidean projection of w onto the probability simplex (sort-based).
void project_simplex(Vector& w) {
    Vector u = w;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double running = 0.0, theta = 0.0;
    std::size_t rho = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        running += u[i];
        const double t = (running - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) {
            rho = i + 1;
            theta = t;
        }
    }
    (void)rho;
    for (double& x : w) x = std::max(0.0, x - theta);
}

}  // namespace

Vector project_to_class_region(const std::vector<Vector>& class_points, const Vector& v,
                               const ProjectionMode& mode) {
    if (class_points.empty()) throw EmptyInputError("project_to_class_region: no points");
    const std::size_t m = class_points.size();
    const std::size_t d = class_points.front().size();
    if (v.size() != d) throw DimensionError("project_to_class_region: dimension");

    if (mode.kind == ProjectionMode::Kind::LocalPca) {
        const std::size_t k = std::min(mode.k, m);
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(m);
        for (std::size_t i = 0; i < m; ++i)
            dist.emplace_back(squared_distance(class_points[i], v), i);
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                          dist.end());
        Matrix hood(k, d);
        for (std::size_t i = 0; i < k; ++i) hood.set_row(i, class_points[dist[i].second]);
        const PcaBasis full = pca(hood, d);
        const std::size_t r = rank_for_variance(full.explained_variance, mode.var_threshold);
        Vector out = full.mean;
        const Vector centered = sub(v, full.mean);
        for (std::size_t c = 0; c < r; ++c) {
            const Vector dir = full.components.row(c);
            axpy(dot(dir, centered), dir, out);
        }
        return out;
    }

    if (m > 10000) throw ConfigError("project_to_class_region: hull too large");
    if (m == 1) return class_points.front();

    // min ||X w - v||^2 over the simplex by projected gradient.
    Matrix gram(m, m);
    Vector xv(m);
    for (std::size_t i = 0; i < m; ++i) {
        xv[i] = dot(class_points[i], v);
        for (std::size_t j = i; j < m; ++j) {
            const double g = dot(class_points[i], class_points[j]);
            gram(i, j) = g;
            gram(j, i) = g;
        }
    }
    double lipschitz = 0.0;
    for (double g : gram.data) lipschitz += g * g;
    lipschitz = std::sqrt(lipschitz);
    const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

    Vector w(m, 1.0 / static_cast<double>(m));
    for (std::size_t iter = 0; iter < 10000; ++iter) {
        const Vector grad = sub(matvec(gram, w), xv);
        Vector next = w;
        axpy(-step, grad, next);
        project_simplex(next);
        double moved = 0.0;
        for (std::size_t i = 0; i < m; ++i) moved = std::max(moved, std::fabs(next[i] - w[i]));
        w = std::move(next);
        if (moved < 1e-8) break;
    }
    Vector out(d, 0.0);
    for (std::size_t i = 0; i < m; ++i) axpy(w[i], class_points[i], out);
    return out;
}

DormantScanResult dormant_change_scan(const PiecewiseLinearCircuit& c,
                                      const Vector& base_input, const Vector& divergence,
                                      const std::vector<Vector>& contexts,
                                      double epsilon) {
    if (contexts.empty()) throw EmptyInputError("dormant_change_scan: no contexts");
    const Vector shifted = add(base_input, divergence);
    DormantScanResult res;
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        const CircuitResult before = circuit_forward(c, base_input, &contexts[i]);
        const CircuitResult after = circuit_forward(c, shifted, &contexts[i]);
        bool changed = false;
        if (c.readout == Readout::ArgmaxFirstIndex)
            changed = before.predicted_class != after.predicted_class;
        else
            changed = std::fabs(after.score - before.score) > epsilon;
        (changed ? res.changed_contexts : res.null_contexts).push_back(i);
    }
    res.dormant = !res.null_contexts.empty() && !res.changed_contexts.empty();
    return res;
}

void save_circuit(const std::string& path, const PiecewiseLinearCircuit& c) {
    c.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_circuit: cannot open " + path);
    out << "circuit v1\n";
    out << "name " << c.name << '\n';
    out << "readout "
        << (c.readout == Readout::ScoreSign ? "score_sign" : "argmax_first") << '\n';
    if (c.has_context_slot)
        out << "context_layer " << c.context_layer << '\n';
    else
        out << "context_layer none\n";
    out << "layers " << c.layers.size() << '\n';
    char buf[40];
    for (const auto& l : c.layers) {
        out << "layer " << l.w.rows << ' ' << l.w.cols << ' '
            << (l.relu ? "relu" : "linear") << '\n';
        out << "w";
        for (double v : l.w.data) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ' ' << buf;
        }
        out << '\n' << "b";
        for (double v : l.b) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ' ' << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("save_circuit: write failed for " + path);
}

PiecewiseLinearCircuit load_circuit(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_circuit: cannot open " + path);
    auto next_line = [&]() {
        std::string l;
        if (!std::getline(in, l)) throw IoError("load_circuit: truncated " + path);
        return l;
    };
    if (next_line() != "circuit v1") throw IoError("load_circuit: bad header in " + path);
    PiecewiseLinearCircuit c;
    {
        std::istringstream ss(next_line());
        std::string tag;
        ss >> tag >> c.name;
        if (tag != "name") throw IoError("load_circuit: missing name");
    }
    {
        std::istringstream ss(next_line());
        std::string tag, kind;
        ss >> tag >> kind;
        if (tag != "readout") throw IoError("load_circuit: missing readout");
        if (kind == "score_sign")
            c.readout = Readout::ScoreSign;
        else if (kind == "argmax_first")
            c.readout = Readout::ArgmaxFirstIndex;
        else
            throw IoError("load_circuit: unknown readout " + kind);
    }
    {
        std::istringstream ss(next_line());
        std::string tag, val;
        ss >> tag >> val;
        if (tag != "context_layer") throw IoError("load_circuit: missing context_layer");
        if (val != "none") {
            c.has_context_slot = true;
            c.context_layer = std::stoul(val);
        }
    }
    std::size_t n_layers = 0;
    {
        std::istringstream ss(next_line());
        std::string tag;
        ss >> tag >> n_layers;
        if (tag != "layers") throw IoError("load_circuit: missing layer count");
    }
    for (std::size_t i = 0; i < n_layers; ++i) {
        std::istringstream hdr(next_line());
        std::string tag, act;
        std::size_t rows = 0, cols = 0;
        hdr >> tag >> rows >> cols >> act;
        if (tag != "layer") throw IoError("load_circuit: missing layer header");
        CircuitLayer l;
        l.relu = act == "relu";
        l.w = Matrix(rows, cols);
        {
            std::istringstream ws(next_line());
            std::string wt;
            ws >> wt;
            if (wt != "w") throw IoError("load_circuit: missing weights");
            for (double& v : l.w.data)
                if (!(ws >> v)) throw IoError("load_circuit: short weight row");
        }
        l.b.resize(rows);
        {
            std::istringstream bs(next_line());
            std::string bt;
            bs >> bt;
            if (bt != "b") throw IoError("load_circuit: missing bias");
            for (double& v : l.b)
                if (!(bs >> v)) throw IoError("load_circuit: short bias row");
        }
        c.layers.push_back(std::move(l));
    }
    c.validate();
    return c;
}

}  // namespace repdiv
