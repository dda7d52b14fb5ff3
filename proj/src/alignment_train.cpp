#include <algorithm>
#include <cmath>
#include <limits>

#include "repdiv/alignment.hpp"
#include "repdiv/counterfactual.hpp"
#include "repdiv/divergence.hpp"
#include "repdiv/errors.hpp"
#include "repdiv/sinkhorn.hpp"

namespace repdiv {

namespace {

// The first two data coordinates carry the grid variables.
const std::vector<std::size_t> kGridDims{0, 1};

void add_outer(Matrix& acc, const Vector& u, const Vector& v) {
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] == 0.0) continue;
        for (std::size_t j = 0; j < v.size(); ++j) acc(i, j) += u[i] * v[j];
    }
}

Vector masked(const VariableSelector& sel, const Vector& v) {
    Vector out(v.size(), 0.0);
    for (std::size_t i = sel.start; i < sel.start + sel.size; ++i) out[i] = v[i];
    return out;
}

struct AdamVec {
    Vector m, v;
    long t = 0;
    void step(std::vector<double>& param, const std::vector<double>& grad, double lr) {
        constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
        if (m.size() != param.size()) {
            m.assign(param.size(), 0.0);
            v.assign(param.size(), 0.0);
        }
        ++t;
        const double bc1 = 1.0 - std::pow(kB1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(kB2, static_cast<double>(t));
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = kB1 * m[i] + (1.0 - kB1) * grad[i];
            v[i] = kB2 * v[i] + (1.0 - kB2) * grad[i] * grad[i];
            param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
        }
    }
};

}  // namespace

AlignLossGrad alignment_batch_gradients(
    const Mlp& model, const AlignmentFunction& af, const VariableSelector& sel_train,
    const std::vector<VariableSelector>& cl_selectors,
    const std::vector<InterventionSample>& batch, const std::vector<Vector>& cl_targets,
    double behavioral_weight, double cl_weight, bool modified_cl,
    ClTermDiagnostics* diag) {
    if (batch.empty()) throw EmptyInputError("alignment gradients: empty batch");
    if (model.mode != Mode::Eval)
        throw ConfigError("alignment gradients: model must be frozen in Eval");
    if (cl_weight > 0.0 && cl_targets.size() != batch.size())
        throw DimensionError("alignment gradients: cl_targets must parallel the batch");
    const std::size_t d = af.dim();
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    Matrix dw(d, d);
    Matrix dwinv(d, d);
    double loss = 0.0;

    for (std::size_t n = 0; n < batch.size(); ++n) {
        const auto& smp = batch[n];
        const Vector z_trg = matvec(af.w, smp.h_trg);
        const Vector z_src = matvec(af.w, smp.h_src);
        Vector r(d);
        for (std::size_t i = 0; i < d; ++i)
            r[i] = sel_train.selects(i) ? z_src[i] : z_trg[i];
        const Vector h_hat = matvec(af.w_inv, r);

        Vector dh(d, 0.0);

        if (behavioral_weight > 0.0) {
            EvalCache ec;
            eval_forward_cached(model, h_hat, ec);
            loss -= behavioral_weight * inv_b *
                    log_softmax_at(ec.logits, smp.counterfactual_label);
            Vector dlogits = ec.probs;
            dlogits[static_cast<std::size_t>(smp.counterfactual_label)] -= 1.0;
            for (double& v : dlogits) v *= behavioral_weight * inv_b;
            const Vector dh_beh = eval_backward_input(model, ec, dlogits);
            for (std::size_t i = 0; i < d; ++i) dh[i] += dh_beh[i];
        }

        if (cl_weight > 0.0) {
            const Vector& h_cl = cl_targets[n];
            const double scale = cl_weight * inv_b;
            if (modified_cl) {
                const Vector u = matvec(af.w, h_hat);
                const Vector u_cl = matvec(af.w, h_cl);
                for (const auto& sel : cl_selectors) {
                    const Vector zh = masked(sel, u);
                    const Vector zc = masked(sel, u_cl);
                    const Vector xh = matvec(af.w_inv, zh);
                    const Vector xc = matvec(af.w_inv, zc);
                    Vector g;
                    loss += scale *
                            cl_term_value_grad(xh, xc, ZeroNormPolicy::DropCosine, &g, diag);
                    for (double& v : g) v *= scale;
                    add_outer(dwinv, g, zh);
                    const Vector t = masked(sel, matvec_t(af.w_inv, g));
                    add_outer(dw, t, h_hat);
                    const Vector dh_cl = matvec_t(af.w, t);
                    for (std::size_t i = 0; i < d; ++i) dh[i] += dh_cl[i];
                }
            } else {
                Vector g;
                loss += scale *
                        cl_term_value_grad(h_hat, h_cl, ZeroNormPolicy::DropCosine, &g, diag);
                for (std::size_t i = 0; i < d; ++i) dh[i] += scale * g[i];
            }
        }

        add_outer(dwinv, dh, r);
        const Vector dr = matvec_t(af.w_inv, dh);
        Vector dr_trg(d), dr_src(d);
        for (std::size_t i = 0; i < d; ++i) {
            dr_trg[i] = sel_train.selects(i) ? 0.0 : dr[i];
            dr_src[i] = sel_train.selects(i) ? dr[i] : 0.0;
        }
        add_outer(dw, dr_trg, smp.h_trg);
        add_outer(dw, dr_src, smp.h_src);
    }

    // dL/dW from the cached inverse: −W⁻ᵀ · dL/dW⁻¹ · W⁻ᵀ
    const Matrix winv_t = transpose(af.w_inv);
    const Matrix corr = matmul(matmul(winv_t, dwinv), winv_t);
    for (std::size_t i = 0; i < dw.data.size(); ++i) dw.data[i] -= corr.data[i];

    AlignGradients g;
    backprop_w(af, dw, g);
    AlignLossGrad out;
    out.loss = loss;
    out.dm = std::move(g.dm);
    out.da = std::move(g.da);
    return out;
}

AlignTrainResult train_alignment(const Mlp& model, const DatasetConfig& dcfg,
                                 const std::vector<LabeledRep>& train_pool,
                                 const AlignTrainConfig& cfg) {
    cfg.validate();
    if (cfg.behavioral_weight != 0.0 && cfg.behavioral_weight != 1.0)
        throw ConfigError("train_alignment: behavioral_weight must be 0 or 1");
    if (model.mode != Mode::Eval) throw ConfigError("train_alignment: model must be Eval");
    if (train_pool.empty()) throw EmptyInputError("train_alignment: empty pool");
    const std::size_t d = model.config.input_dim;
    if (dcfg.dim() != d) throw DimensionError("train_alignment: dataset/model dim");

    Rng root(cfg.seed);
    AlignTrainResult out;
    out.af = AlignmentFunction::init(d, root.next_u64());
    out.sel = selector_for(cfg.variable, d, cfg.subspace_size);
    if (cfg.max_epochs == 0) return out;

    std::vector<int> allowed;
    for (const auto& rep : train_pool)
        if (std::find(allowed.begin(), allowed.end(), rep.class_label) == allowed.end())
            allowed.push_back(rep.class_label);
    std::sort(allowed.begin(), allowed.end());

    const ClIndex cl_index = ClIndex::build(train_pool);
    const std::vector<VariableSelector> causal = causal_selectors(d, cfg.subspace_size);

    Rng sample_rng = root.fork(1);
    Rng eval_rng = root.fork(2);
    const std::vector<InterventionSample> eval_samples = draw_intervention_samples(
        dcfg, train_pool, cfg.variable, cfg.eval_samples, eval_rng, &allowed);
    const std::vector<InterventionSample> emd_samples = draw_intervention_samples(
        dcfg, train_pool, cfg.variable, cfg.emd_eval_samples, eval_rng, &allowed);
    // Ground-truth twins: per sample, one natural drawn among those carrying
    // the post-intervention variable values. Fixed across epochs.
    std::vector<Vector> emd_twins;
    emd_twins.reserve(emd_samples.size());
    for (const auto& smp : emd_samples) {
        const auto& bucket = cl_index.by_key.at({smp.key_x1, smp.key_x2});
        emd_twins.push_back(bucket[eval_rng.next_index(bucket.size())]);
    }

    AdamVec adam_m, adam_a;
    ClTermDiagnostics diag;

    AlignmentFunction best = out.af;
    std::size_t best_epoch = 0;
    double best_metric = cfg.selection_metric == SelectionMetric::BestIia
                             ? -std::numeric_limits<double>::infinity()
                             : std::numeric_limits<double>::infinity();
    bool have_best = false;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best_loss = 0;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const std::vector<InterventionSample> samples = draw_intervention_samples(
            dcfg, train_pool, cfg.variable, cfg.samples_per_epoch, sample_rng, &allowed);
        double epoch_loss = 0.0;
        std::size_t counted = 0;
        for (std::size_t start = 0; start < samples.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, samples.size());
            const std::vector<InterventionSample> batch(samples.begin() + start,
                                                        samples.begin() + stop);
            std::vector<Vector> targets;
            if (cfg.cl_weight > 0.0) {
                targets.reserve(batch.size());
                for (const auto& smp : batch)
                    targets.push_back(cl_vector(cl_index, smp.key_x1, smp.key_x2));
            }
            const AlignLossGrad g = alignment_batch_gradients(
                model, out.af, out.sel, causal, batch, targets, cfg.behavioral_weight,
                cfg.cl_weight, cfg.modified_cl, &diag);
            adam_m.step(out.af.m.data, g.dm.data, cfg.learning_rate);
            adam_a.step(out.af.a, g.da, cfg.learning_rate);
            out.af.refresh();
            epoch_loss += g.loss * static_cast<double>(batch.size());
            counted += batch.size();
        }

        AlignEpochStats st;
        st.train_loss = epoch_loss / static_cast<double>(counted);
        st.iia = evaluate_iia(model, out.af, out.sel, eval_samples);
        st.emd = std::numeric_limits<double>::quiet_NaN();
        std::vector<Vector> intervened;
        intervened.reserve(emd_samples.size());
        for (const auto& smp : emd_samples)
            intervened.push_back(interchange(out.af, out.sel, smp.h_trg, smp.h_src));
        try {
            st.emd = row_emd(emd_twins, intervened, kGridDims, 0, SinkhornOptions{});
        } catch (const ConvergenceError&) {
        }
        out.history.push_back(st);

        const bool improved =
            cfg.selection_metric == SelectionMetric::BestIia
                ? st.iia > best_metric
                : (std::isfinite(st.emd) && st.emd < best_metric);
        if (improved) {
            best_metric = cfg.selection_metric == SelectionMetric::BestIia ? st.iia : st.emd;
            best = out.af;
            best_epoch = epoch;
            have_best = true;
        }

        if (st.train_loss < best_loss) {
            best_loss = st.train_loss;
            since_best_loss = 0;
        } else if (++since_best_loss >= cfg.patience) {
            break;
        }
    }

    if (have_best) {
        out.af = best;
        out.best_epoch = best_epoch;
    } else {
        out.best_epoch = out.history.size() - 1;
    }
    out.dropped_cosine_terms = diag.dropped_cosine_terms;
    return out;
}

}  // namespace repdiv
