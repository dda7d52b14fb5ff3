#include "repdiv/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "repdiv/counterfactual.hpp"
#include "repdiv/errors.hpp"
#include "repdiv/harmless.hpp"
#include "repdiv/pathology.hpp"
#include "repdiv/pca.hpp"

namespace repdiv {

namespace fs = std::filesystem;

std::string loss_mode_str(LossMode mode) {
    switch (mode) {
        case LossMode::DasOnly: return "das";
        case LossMode::ClOnly: return "cl";
        case LossMode::DasPlusCl: return "das_cl";
    }
    throw ConfigError("unknown loss mode");
}

LossMode loss_mode_from_str(const std::string& s) {
    if (s == "das") return LossMode::DasOnly;
    if (s == "cl") return LossMode::ClOnly;
    if (s == "das_cl" || s == "das+cl") return LossMode::DasPlusCl;
    throw ConfigError("unknown loss mode: " + s);
}

std::string scheme_str(SplitScheme scheme) {
    return scheme == SplitScheme::Default ? "default" : "ood";
}

SplitScheme scheme_from_str(const std::string& s) {
    if (s == "default") return SplitScheme::Default;
    if (s == "ood") return SplitScheme::Ood;
    throw ConfigError("unknown scheme: " + s);
}

PartitionName partition_name_from_str(const std::string& s) {
    if (s == "p1") return PartitionName::DefaultP1;
    if (s == "p2") return PartitionName::DefaultP2;
    if (s == "dense") return PartitionName::Dense;
    if (s == "sparse") return PartitionName::Sparse;
    throw ConfigError("unknown partition: " + s);
}

namespace {

std::string fmt9(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void check_keys(const nlohmann::json& j, const char* where,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) { known = true; break; }
        if (!known)
            throw ConfigError(std::string("unknown key \"") + item.key() + "\" in " + where);
    }
}

std::vector<LabeledRep> take(const std::vector<LabeledRep>& data,
                             const std::vector<std::size_t>& idx) {
    std::vector<LabeledRep> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(data[i]);
    return out;
}

std::vector<Vector> vectors_of(const std::vector<LabeledRep>& data) {
    std::vector<Vector> out;
    out.reserve(data.size());
    for (const auto& r : data) out.push_back(r.h);
    return out;
}

// First n entries of a seeded shuffle of 0..total-1.
std::vector<std::size_t> sample_indices(std::size_t total, std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    for (std::size_t i = total; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_index(i)]);
    idx.resize(std::min(n, total));
    return idx;
}

double best_val_accuracy(const std::vector<EpochStats>& history) {
    double best_loss = std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (const auto& st : history) {
        if (st.val_loss < best_loss) {
            best_loss = st.val_loss;
            acc = st.val_accuracy;
        }
    }
    return acc;
}

}  // namespace

AlignTrainConfig align_config_for_mode(const ExperimentConfig& cfg,
                                       std::uint64_t align_seed) {
    AlignTrainConfig ac = cfg.align;
    ac.seed = align_seed;
    switch (cfg.loss_mode) {
        case LossMode::DasOnly:
            ac.behavioral_weight = 1.0;
            ac.cl_weight = 0.0;
            ac.selection_metric = SelectionMetric::BestIia;
            break;
        case LossMode::ClOnly:
            ac.behavioral_weight = 0.0;
            ac.cl_weight = 1.0;
            ac.modified_cl = true;
            ac.selection_metric = SelectionMetric::BestEmd;
            break;
        case LossMode::DasPlusCl:
            ac.behavioral_weight = 1.0;
            ac.cl_weight = cfg.cl_eps;
            ac.selection_metric = SelectionMetric::BestIia;
            break;
    }
    return ac;
}

namespace {

std::string run_record_to_json(const RunRecord& r) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"seed\": " << r.seed << ",\n";
    out << "  \"scheme\": \"" << scheme_str(r.scheme) << "\",\n";
    out << "  \"loss_mode\": \"" << loss_mode_str(r.loss_mode) << "\",\n";
    out << "  \"trained_partition\": \"" << partition_name_str(r.trained_partition)
        << "\",\n";
    out << "  \"eval_partition\": \"" << partition_name_str(r.eval_partition) << "\",\n";
    out << "  \"mlp_val_accuracy\": " << fmt9(r.mlp_val_accuracy) << ",\n";
    out << "  \"trained_iia\": " << fmt9(r.trained_iia) << ",\n";
    out << "  \"heldout_iia\": " << fmt9(r.heldout_iia) << ",\n";
    out << "  \"iia_all\": " << fmt9(r.iia_all) << ",\n";
    out << "  \"train_emd\": " << fmt9(r.train_emd) << ",\n";
    out << "  \"train_row_emd\": " << fmt9(r.train_row_emd) << ",\n";
    out << "  \"align_epochs\": " << r.align_epochs << ",\n";
    out << "  \"best_epoch\": " << r.best_epoch << ",\n";
    out << "  \"dropped_cosine_terms\": " << r.dropped_cosine_terms << ",\n";
    out << "  \"heldout_count\": " << r.heldout_count << ",\n";
    out << "  \"mlp_checksum\": \"" << r.mlp_checksum << "\",\n";
    out << "  \"align_checksum\": \"" << r.align_checksum << "\",\n";
    std::string div = report_to_json(r.report);
    while (!div.empty() && div.back() == '\n') div.pop_back();
    out << "  \"divergence\": " << div << "\n";
    out << "}\n";
    return out.str();
}

RunRecord run_record_from_json(const nlohmann::json& j) {
    RunRecord r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.scheme = scheme_from_str(j.at("scheme").get<std::string>());
    r.loss_mode = loss_mode_from_str(j.at("loss_mode").get<std::string>());
    r.trained_partition = partition_name_from_str(j.at("trained_partition").get<std::string>());
    r.eval_partition = partition_name_from_str(j.at("eval_partition").get<std::string>());
    r.mlp_val_accuracy = j.at("mlp_val_accuracy").get<double>();
    r.trained_iia = j.at("trained_iia").get<double>();
    r.heldout_iia = j.at("heldout_iia").get<double>();
    r.iia_all = j.at("iia_all").get<double>();
    r.train_emd = j.at("train_emd").get<double>();
    r.train_row_emd = j.at("train_row_emd").get<double>();
    r.align_epochs = j.at("align_epochs").get<std::size_t>();
    r.best_epoch = j.at("best_epoch").get<std::size_t>();
    r.dropped_cosine_terms = j.at("dropped_cosine_terms").get<std::size_t>();
    r.heldout_count = j.at("heldout_count").get<std::size_t>();
    r.mlp_checksum = j.at("mlp_checksum").get<std::string>();
    r.align_checksum = j.at("align_checksum").get<std::string>();
    r.report = report_from_json(j.at("divergence").dump());
    return r;
}

std::string history_csv(const std::vector<AlignEpochStats>& history) {
    std::string out = "epoch,train_loss,iia,emd\n";
    for (std::size_t e = 0; e < history.size(); ++e) {
        out += std::to_string(e);
        out += ',';
        out += fmt9(history[e].train_loss);
        out += ',';
        out += fmt9(history[e].iia);
        out += ',';
        out += fmt9(history[e].emd);
        out += '\n';
    }
    return out;
}

std::string pca_scatter_csv(const std::vector<Vector>& natural,
                            const std::vector<Vector>& intervened) {
    std::vector<Vector> combined = natural;
    combined.insert(combined.end(), intervened.begin(), intervened.end());
    PcaBasis basis = pca(Matrix::from_rows(combined), 2);
    std::string out = "set,pc1,pc2\n";
    auto emit = [&](const char* label, const std::vector<Vector>& points) {
        Vector centered(points.empty() ? 0 : points[0].size());
        for (const auto& p : points) {
            for (std::size_t i = 0; i < p.size(); ++i) centered[i] = p[i] - basis.mean[i];
            out += label;
            out += ',';
            out += fmt9(dot(basis.components.row(0), centered));
            out += ',';
            out += fmt9(dot(basis.components.row(1), centered));
            out += '\n';
        }
    };
    emit("natural", natural);
    emit("intervened", intervened);
    return out;
}

struct EvalArtifacts {
    RunRecord record;
    AlignmentFunction af;
    std::vector<Vector> eval_natural;
    std::vector<Vector> eval_intervened;
    std::vector<AlignEpochStats> history;
};

// Trains the alignment on the trained partition and evaluates the transfer on
// the other partition. train_model produced the alignment's gradients; the
// evaluation runs on eval_model (the same object under the default scheme).
EvalArtifacts run_single(const ExperimentConfig& cfg, const std::vector<LabeledRep>& dataset,
                         const Partition& trained, const Partition& eval_part,
                         std::size_t pi, const Mlp& train_model, const Mlp& eval_model,
                         double mlp_val_acc, std::uint64_t seed) {
    const DatasetConfig& dcfg = cfg.dataset;
    Rng root(seed);

    std::vector<LabeledRep> trained_train = take(dataset, trained.train);
    std::vector<LabeledRep> trained_val = take(dataset, trained.val);
    std::vector<LabeledRep> eval_val = take(dataset, eval_part.val);

    AlignTrainConfig ac = align_config_for_mode(cfg, root.fork(50 + pi).next_u64());
    AlignTrainResult trained_align = train_alignment(train_model, dcfg, trained_train, ac);
    const AlignmentFunction& af = trained_align.af;
    const VariableSelector& sel = trained_align.sel;

    RunRecord rec;
    rec.seed = seed;
    rec.scheme = cfg.scheme;
    rec.loss_mode = cfg.loss_mode;
    rec.trained_partition = trained.name;
    rec.eval_partition = eval_part.name;
    rec.mlp_val_accuracy = mlp_val_acc;
    rec.align_epochs = trained_align.history.size();
    rec.best_epoch = trained_align.best_epoch;
    rec.dropped_cosine_terms = trained_align.dropped_cosine_terms;

    // In-distribution IIA on the trained partition's validation split.
    Rng trained_eval_rng = root.fork(100 + pi);
    auto trained_samples =
        draw_intervention_samples(dcfg, trained_val, ac.variable,
                                  cfg.eval_intervention_samples, trained_eval_rng,
                                  &trained.included_classes);
    rec.trained_iia = evaluate_iia(train_model, af, sel, trained_samples);

    // Transfer evaluation: interventions drawn from the other partition.
    Rng eval_rng = root.fork(110 + pi);
    auto eval_samples = draw_intervention_samples(dcfg, eval_val, ac.variable,
                                                  cfg.eval_intervention_samples, eval_rng);
    rec.iia_all = evaluate_iia(eval_model, af, sel, eval_samples);

    std::vector<InterventionSample> heldout;
    for (const auto& s : eval_samples)
        if (!trained.contains_class(s.counterfactual_label)) heldout.push_back(s);
    rec.heldout_count = heldout.size();
    rec.heldout_iia = heldout.empty() ? 0.0 : evaluate_iia(eval_model, af, sel, heldout);

    // Comparison clouds on the evaluation partition. Each intervened point is
    // paired with a ground-truth twin: a natural drawn from the full dataset
    // among those carrying the post-intervention variable values. The full
    // dataset is the model's natural manifold, so every grid cell has twins.
    ClIndex full_index = ClIndex::build(dataset);
    Rng twin_rng = root.fork(150 + pi);
    std::vector<Vector> intervened, gt_pairs;
    for (const auto& s : eval_samples) {
        intervened.push_back(interchange(af, sel, s.h_trg, s.h_src));
        const auto& bucket = full_index.by_key.at({s.key_x1, s.key_x2});
        gt_pairs.push_back(bucket[twin_rng.next_index(bucket.size())]);
    }
    std::vector<Vector> natural_pool = vectors_of(dataset);
    std::size_t n_side =
        std::min({cfg.divergence_samples, natural_pool.size(), intervened.size()});
    Rng nat_rng = root.fork(120 + pi);
    std::vector<Vector> natural;
    for (std::size_t i : sample_indices(natural_pool.size(), n_side, nat_rng))
        natural.push_back(natural_pool[i]);
    intervened.resize(n_side);
    gt_pairs.resize(n_side);

    // Causal-axis EMD is reported raw; dividing by the noise-dimension count
    // only suits full-width comparisons.
    DivergenceParams params;
    params.row_scale = 0;
    ComparisonSet cmp{natural, intervened, gt_pairs};
    rec.report = full_report(cmp, params);

    // Training-split causal-axis divergence (the regression predictor),
    // measured the same way against ground-truth twins.
    Rng train_cmp_rng = root.fork(130 + pi);
    auto train_cmp_samples =
        draw_intervention_samples(dcfg, trained_train, ac.variable,
                                  cfg.eval_intervention_samples, train_cmp_rng,
                                  &trained.included_classes);
    Rng train_twin_rng = root.fork(160 + pi);
    std::vector<Vector> train_intervened, train_twins;
    for (const auto& s : train_cmp_samples) {
        train_intervened.push_back(interchange(af, sel, s.h_trg, s.h_src));
        const auto& bucket = full_index.by_key.at({s.key_x1, s.key_x2});
        train_twins.push_back(bucket[train_twin_rng.next_index(bucket.size())]);
    }
    std::vector<Vector> train_pool = vectors_of(trained_train);
    std::size_t n_train =
        std::min({cfg.divergence_samples, train_pool.size(), train_intervened.size()});
    Rng train_nat_rng = root.fork(140 + pi);
    std::vector<Vector> train_natural;
    for (std::size_t i : sample_indices(train_pool.size(), n_train, train_nat_rng))
        train_natural.push_back(train_pool[i]);
    train_intervened.resize(n_train);
    train_twins.resize(n_train);
    rec.train_emd = emd_divergence(train_natural, train_intervened, params.sinkhorn);
    rec.train_row_emd = row_emd(train_twins, train_intervened, params.causal_dims,
                                params.row_scale, params.sinkhorn);

    EvalArtifacts art;
    art.record = rec;  // checksums stay empty until the caller saves the files
    art.af = af;
    art.eval_natural = std::move(natural);
    art.eval_intervened = std::move(intervened);
    art.history = trained_align.history;
    return art;
}

std::string summary_json(const ExperimentConfig& cfg, const std::vector<RunRecord>& records) {
    double m_trained = 0, m_heldout = 0, m_all = 0, m_temd = 0, m_trow = 0, m_eemd = 0,
           m_erow = 0;
    for (const auto& r : records) {
        m_trained += r.trained_iia;
        m_heldout += r.heldout_iia;
        m_all += r.iia_all;
        m_temd += r.train_emd;
        m_trow += r.train_row_emd;
        m_eemd += r.report.emd;
        m_erow += r.report.row_emd;
    }
    double n = records.empty() ? 1.0 : static_cast<double>(records.size());
    std::ostringstream out;
    out << "{\n";
    out << "  \"scheme\": \"" << scheme_str(cfg.scheme) << "\",\n";
    out << "  \"loss_mode\": \"" << loss_mode_str(cfg.loss_mode) << "\",\n";
    out << "  \"n_runs\": " << records.size() << ",\n";
    out << "  \"mean_trained_iia\": " << fmt9(m_trained / n) << ",\n";
    out << "  \"mean_heldout_iia\": " << fmt9(m_heldout / n) << ",\n";
    out << "  \"mean_iia_all\": " << fmt9(m_all / n) << ",\n";
    out << "  \"mean_train_emd\": " << fmt9(m_temd / n) << ",\n";
    out << "  \"mean_train_row_emd\": " << fmt9(m_trow / n) << ",\n";
    out << "  \"mean_eval_emd\": " << fmt9(m_eemd / n) << ",\n";
    out << "  \"mean_eval_row_emd\": " << fmt9(m_erow / n) << ",\n";
    out << "  \"runs\": [";
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (i) out << ",";
        out << "\n    {\"seed\": " << r.seed << ", \"trained_partition\": \""
            << partition_name_str(r.trained_partition) << "\", \"heldout_iia\": "
            << fmt9(r.heldout_iia) << ", \"train_row_emd\": " << fmt9(r.train_row_emd)
            << ", \"eval_row_emd\": " << fmt9(r.report.row_emd) << "}";
    }
    out << "\n  ]\n}\n";
    return out.str();
}

}  // namespace

void ExperimentConfig::validate() const {
    dataset.validate();
    mlp.validate();
    align.validate();
    if (mlp.input_dim != dataset.dim())
        throw ConfigError("mlp input_dim must match dataset dim");
    if (mlp.n_classes != dataset.n_classes())
        throw ConfigError("mlp n_classes must match dataset classes");
    if (seeds.empty()) throw ConfigError("seeds must be nonempty");
    std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
    if (distinct.size() != seeds.size()) throw ConfigError("seeds must be distinct");
    if (loss_mode == LossMode::DasPlusCl && !(cl_eps > 0.0))
        throw ConfigError("cl_eps must be positive for the combined loss");
    if (!(cl_eps >= 0.0)) throw ConfigError("cl_eps must be nonnegative");
    if (output_dir.empty()) throw ConfigError("output_dir must be nonempty");
    if (eval_intervention_samples == 0)
        throw ConfigError("eval_intervention_samples must be positive");
    if (divergence_samples < 2) throw ConfigError("divergence_samples must be >= 2");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must be in (0, 1)");
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg;
    check_keys(j, "config",
               {"dataset", "mlp", "align", "scheme", "loss", "cl_eps", "seeds",
                "output_dir", "eval_intervention_samples", "divergence_samples",
                "train_fraction"});
    try {
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            check_keys(d, "dataset",
                       {"x1_values", "x2_values", "noise_sd", "cov_param", "extra_dims",
                        "samples_per_class", "seed"});
            if (d.contains("x1_values"))
                cfg.dataset.x1_values = d["x1_values"].get<std::vector<double>>();
            if (d.contains("x2_values"))
                cfg.dataset.x2_values = d["x2_values"].get<std::vector<double>>();
            if (d.contains("noise_sd")) cfg.dataset.noise_sd = d["noise_sd"].get<double>();
            if (d.contains("cov_param")) cfg.dataset.cov_param = d["cov_param"].get<double>();
            if (d.contains("extra_dims"))
                cfg.dataset.extra_dims = d["extra_dims"].get<std::size_t>();
            if (d.contains("samples_per_class"))
                cfg.dataset.samples_per_class = d["samples_per_class"].get<std::size_t>();
            if (d.contains("seed")) cfg.dataset.seed = d["seed"].get<std::uint64_t>();
        }
        if (j.contains("mlp")) {
            const auto& m = j["mlp"];
            check_keys(m, "mlp",
                       {"hidden_width", "dropout_p", "learning_rate", "max_epochs",
                        "early_stop_patience", "batch_size"});
            if (m.contains("hidden_width"))
                cfg.mlp.hidden_width = m["hidden_width"].get<std::size_t>();
            if (m.contains("dropout_p")) cfg.mlp.dropout_p = m["dropout_p"].get<double>();
            if (m.contains("learning_rate"))
                cfg.mlp.learning_rate = m["learning_rate"].get<double>();
            if (m.contains("max_epochs"))
                cfg.mlp.max_epochs = m["max_epochs"].get<std::size_t>();
            if (m.contains("early_stop_patience"))
                cfg.mlp.early_stop_patience = m["early_stop_patience"].get<std::size_t>();
            if (m.contains("batch_size"))
                cfg.mlp.batch_size = m["batch_size"].get<std::size_t>();
        }
        if (j.contains("align")) {
            const auto& a = j["align"];
            check_keys(a, "align",
                       {"learning_rate", "modified_cl", "subspace_size", "max_epochs",
                        "patience", "batch_size", "samples_per_epoch", "eval_samples",
                        "emd_eval_samples"});
            if (a.contains("learning_rate"))
                cfg.align.learning_rate = a["learning_rate"].get<double>();
            if (a.contains("modified_cl")) cfg.align.modified_cl = a["modified_cl"].get<bool>();
            if (a.contains("subspace_size"))
                cfg.align.subspace_size = a["subspace_size"].get<std::size_t>();
            if (a.contains("max_epochs"))
                cfg.align.max_epochs = a["max_epochs"].get<std::size_t>();
            if (a.contains("patience")) cfg.align.patience = a["patience"].get<std::size_t>();
            if (a.contains("batch_size"))
                cfg.align.batch_size = a["batch_size"].get<std::size_t>();
            if (a.contains("samples_per_epoch"))
                cfg.align.samples_per_epoch = a["samples_per_epoch"].get<std::size_t>();
            if (a.contains("eval_samples"))
                cfg.align.eval_samples = a["eval_samples"].get<std::size_t>();
            if (a.contains("emd_eval_samples"))
                cfg.align.emd_eval_samples = a["emd_eval_samples"].get<std::size_t>();
        }
        if (j.contains("scheme")) cfg.scheme = scheme_from_str(j["scheme"].get<std::string>());
        if (j.contains("loss")) cfg.loss_mode = loss_mode_from_str(j["loss"].get<std::string>());
        if (j.contains("cl_eps")) cfg.cl_eps = j["cl_eps"].get<double>();
        if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("eval_intervention_samples"))
            cfg.eval_intervention_samples = j["eval_intervention_samples"].get<std::size_t>();
        if (j.contains("divergence_samples"))
            cfg.divergence_samples = j["divergence_samples"].get<std::size_t>();
        if (j.contains("train_fraction")) cfg.train_fraction = j["train_fraction"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    cfg.mlp.input_dim = cfg.dataset.dim();
    cfg.mlp.n_classes = cfg.dataset.n_classes();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    return parse_experiment_config(read_text_file(path));
}

std::string file_checksum(const std::string& path) {
    std::uint64_t sum = fnv1a(read_text_file(path));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(sum));
    return buf;
}

std::string default_output_root() {
    const char* env = std::getenv("REPDIV_OUTPUT_ROOT");
    return (env != nullptr && env[0] != '\0') ? env : "runs";
}

std::vector<RunRecord> run_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto dataset = generate_dataset(cfg.dataset);
    const auto parts = split_partitions(dataset, cfg.dataset, cfg.scheme, cfg.dataset.seed,
                                        cfg.train_fraction);
    const Partition* partitions[2] = {&parts.first, &parts.second};

    fs::path root = fs::path(cfg.output_dir) / scheme_str(cfg.scheme) /
                    loss_mode_str(cfg.loss_mode);
    std::vector<RunRecord> records;

    for (std::uint64_t seed : cfg.seeds) {
        fs::path seed_dir = root / ("seed" + std::to_string(seed));

        Mlp shared_model;
        double shared_acc = 0.0;
        std::string shared_ckpt;
        Mlp part_models[2];
        double part_accs[2] = {0.0, 0.0};
        std::string part_ckpts[2];

        if (cfg.scheme == SplitScheme::Default) {
            // One classifier over the full class grid; both partitions draw
            // their interventions against it.
            MlpConfig mc = cfg.mlp;
            mc.seed = seed;
            MlpTrainResult tr = train_mlp(dataset, mc);
            fs::create_directories(seed_dir);
            shared_ckpt = (seed_dir / "mlp.ckpt").string();
            save_mlp(shared_ckpt, tr.model);
            shared_model = tr.model;
            shared_acc = best_val_accuracy(tr.history);
        } else {
            for (std::size_t pi = 0; pi < 2; ++pi) {
                MlpConfig mc = cfg.mlp;
                mc.seed = Rng(seed).fork(60 + pi).next_u64();
                MlpTrainResult tr = train_mlp(take(dataset, partitions[pi]->train),
                                              take(dataset, partitions[pi]->val), mc);
                fs::path pdir = seed_dir / partition_name_str(partitions[pi]->name);
                fs::create_directories(pdir);
                part_ckpts[pi] = (pdir / "mlp.ckpt").string();
                save_mlp(part_ckpts[pi], tr.model);
                part_models[pi] = tr.model;
                part_accs[pi] = best_val_accuracy(tr.history);
            }
        }

        for (std::size_t pi = 0; pi < 2; ++pi) {
            const Partition& trained = *partitions[pi];
            const Partition& eval_part = *partitions[1 - pi];
            const bool shared = (cfg.scheme == SplitScheme::Default);
            const Mlp& train_model = shared ? shared_model : part_models[pi];
            const Mlp& eval_model = shared ? shared_model : part_models[1 - pi];
            const double acc = shared ? shared_acc : part_accs[pi];

            EvalArtifacts art = run_single(cfg, dataset, trained, eval_part, pi,
                                           train_model, eval_model, acc, seed);

            fs::path run_dir = seed_dir / partition_name_str(trained.name);
            fs::create_directories(run_dir);
            save_alignment((run_dir / "alignment.ckpt").string(), art.af);
            art.record.align_checksum = file_checksum((run_dir / "alignment.ckpt").string());
            art.record.mlp_checksum =
                file_checksum(shared ? shared_ckpt : part_ckpts[pi]);
            write_text_file(run_dir / "metrics.json", run_record_to_json(art.record));
            write_text_file(run_dir / "divergence.json", report_to_json(art.record.report));
            write_text_file(run_dir / "history.csv", history_csv(art.history));
            write_text_file(run_dir / "pca_scatter.csv",
                            pca_scatter_csv(art.eval_natural, art.eval_intervened));
            records.push_back(art.record);
        }
    }

    write_text_file(root / "summary.json", summary_json(cfg, records));
    return records;
}

std::vector<RunRecord> run_sweep(const ExperimentConfig& base,
                                 const std::vector<LossMode>& modes) {
    if (modes.empty()) throw ConfigError("sweep needs at least one loss mode");
    std::vector<RunRecord> all;
    for (LossMode mode : modes) {
        ExperimentConfig cfg = base;
        cfg.loss_mode = mode;
        auto records = run_pipeline(cfg);
        all.insert(all.end(), records.begin(), records.end());
    }
    return all;
}

OlsFit regression_study(const std::vector<RunRecord>& records, const std::string& out_dir) {
    if (records.size() < 10)
        throw ConfigError("regression needs at least 10 run records");
    std::set<LossMode> modes;
    for (const auto& r : records) modes.insert(r.loss_mode);
    if (modes.size() < 2)
        throw ConfigError("regression needs records from at least two loss modes");

    Vector x, y;
    x.reserve(records.size());
    y.reserve(records.size());
    for (const auto& r : records) {
        x.push_back(r.train_row_emd);
        y.push_back(r.heldout_iia);
    }
    OlsFit fit = ols_fit(x, y);

    fs::create_directories(out_dir);
    std::ostringstream js;
    js << "{\n";
    js << "  \"coefficient\": " << fmt9(fit.coefficient) << ",\n";
    js << "  \"intercept\": " << fmt9(fit.intercept) << ",\n";
    js << "  \"r_squared\": " << fmt9(fit.r_squared) << ",\n";
    js << "  \"f_statistic\": " << fmt9(fit.f_statistic) << ",\n";
    js << "  \"p_value\": " << fmt9(fit.p_value) << ",\n";
    js << "  \"n_observations\": " << fit.n_observations << "\n";
    js << "}\n";
    write_text_file(fs::path(out_dir) / "regression.json", js.str());

    std::ostringstream csv;
    csv << "statistic,value\n";
    csv << "coefficient," << fmt9(fit.coefficient) << "\n";
    csv << "intercept," << fmt9(fit.intercept) << "\n";
    csv << "r_squared," << fmt9(fit.r_squared) << "\n";
    csv << "f_statistic," << fmt9(fit.f_statistic) << "\n";
    csv << "p_value," << fmt9(fit.p_value) << "\n";
    csv << "n_observations," << fit.n_observations << "\n";
    write_text_file(fs::path(out_dir) / "regression_table.csv", csv.str());
    return fit;
}

std::vector<RunRecord> load_run_records(const std::string& dir) {
    std::vector<std::string> paths;
    if (!fs::exists(dir)) throw IoError("no such directory: " + dir);
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().filename() == "metrics.json")
            paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<RunRecord> records;
    for (const auto& p : paths) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_text_file(p));
        } catch (const nlohmann::json::exception& e) {
            throw IoError("bad metrics file " + p + ": " + e.what());
        }
        records.push_back(run_record_from_json(j));
    }
    return records;
}

void validate_output_file(const std::string& schema_json_text, const std::string& schema_key,
                          const std::string& path) {
    nlohmann::json schema;
    try {
        schema = nlohmann::json::parse(schema_json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad schema document: ") + e.what());
    }
    if (!schema.contains(schema_key))
        throw ConfigError("schema has no entry for " + schema_key);
    const auto& entry = schema[schema_key];
    const std::string kind = entry.at("type").get<std::string>();
    const std::string content = read_text_file(path);

    if (kind == "json") {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(content);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path + " is not valid JSON: " + e.what());
        }
        if (!doc.is_object()) throw ConfigError(path + ": top level must be an object");
        const auto& required = entry.at("required");
        for (const auto& item : required.items()) {
            if (!doc.contains(item.key()))
                throw ConfigError(path + ": missing key \"" + item.key() + "\"");
            const std::string want = item.value().get<std::string>();
            const auto& v = doc[item.key()];
            bool ok = (want == "number" && v.is_number()) ||
                      (want == "integer" && v.is_number_integer()) ||
                      (want == "string" && v.is_string()) ||
                      (want == "object" && v.is_object()) ||
                      (want == "array" && v.is_array()) ||
                      (want == "boolean" && v.is_boolean());
            if (!ok)
                throw ConfigError(path + ": key \"" + item.key() + "\" is not a " + want);
        }
        if (entry.value("exact", false)) {
            for (const auto& item : doc.items())
                if (!required.contains(item.key()))
                    throw ConfigError(path + ": unexpected key \"" + item.key() + "\"");
        }
    } else if (kind == "csv") {
        std::string first = content.substr(0, content.find('\n'));
        if (entry.contains("header")) {
            if (first != entry["header"].get<std::string>())
                throw ConfigError(path + ": header mismatch, got \"" + first + "\"");
        } else if (entry.contains("header_prefix")) {
            const std::string prefix = entry["header_prefix"].get<std::string>();
            if (first.rfind(prefix, 0) != 0)
                throw ConfigError(path + ": header does not start with \"" + prefix + "\"");
        } else {
            throw ConfigError("csv schema entry needs header or header_prefix");
        }
    } else {
        throw ConfigError("unknown schema type: " + kind);
    }
}

namespace {

// Largest coordinate error; the suite reports it against a want of zero.
double linf_error(const Vector& got, const Vector& want) {
    if (got.size() != want.size()) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i)
        m = std::max(m, std::abs(got[i] - want[i]));
    return m;
}

}  // namespace

std::vector<ExampleCheck> worked_examples_suite(
    const std::vector<PiecewiseLinearCircuit>* circuits) {
    const std::vector<PiecewiseLinearCircuit> owned =
        circuits ? *circuits : builtin_circuits();
    if (owned.size() != 3) throw ConfigError("expected three circuits");
    const PiecewiseLinearCircuit& score_circuit = owned[0];
    const PiecewiseLinearCircuit& context_circuit = owned[1];
    const PiecewiseLinearCircuit& balanced = owned[2];

    const std::vector<Vector> class_a = builtin_class_a();
    const std::vector<Vector> class_b = builtin_class_b();

    std::vector<ExampleCheck> checks;
    auto add = [&](const std::string& name, double got, double want) {
        checks.push_back({name, std::abs(got - want) <= 1e-9, got, want});
    };

    // Natural scores of the two input sets.
    add("score_natural_a1", circuit_forward(score_circuit, class_a[0]).score, 0.25);
    add("score_natural_a2", circuit_forward(score_circuit, class_a[1]).score, 0.5);
    add("score_natural_b1", circuit_forward(score_circuit, class_b[0]).score, 0.0);
    add("score_natural_b2", circuit_forward(score_circuit, class_b[1]).score, 0.0);

    // Mean difference between the classes, and the two patched inputs.
    const Vector delta = mean_diff_vector(class_a, class_b);
    add("mean_diff_vector", linf_error(delta, {0.5, 0.5, 0.0, -0.5}), 0.0);

    Vector patched1(class_b[0]), patched2(class_b[1]);
    for (std::size_t i = 0; i < delta.size(); ++i) {
        patched1[i] += delta[i];
        patched2[i] += delta[i];
    }
    add("patched_case1_input", linf_error(patched1, {0.5, 0.5, 1.0, -0.5}), 0.0);
    add("patched_case2_input", linf_error(patched2, {0.5, 0.5, 1.0, 0.5}), 0.0);

    CircuitResult r1 = circuit_forward(score_circuit, patched1);
    CircuitResult r2 = circuit_forward(score_circuit, patched2);
    add("patched_case1_score", r1.score, 0.5);
    add("patched_case1_hidden", linf_error(r1.post_activations[0], {0.0, 0.0, 0.5}), 0.0);
    add("patched_case2_score", r2.score, 0.25);
    add("patched_case2_hidden", linf_error(r2.post_activations[0], {0.25, 0.0, 0.0}), 0.0);

    // Unit activity audit: the third hidden unit fires for patched case 1
    // but never on a natural input of the intended class.
    std::map<int, std::vector<Vector>> naturals{{0, class_a}, {1, class_b}};
    std::vector<std::pair<Vector, int>> intervened{{patched1, 0}, {patched2, 0}};
    HiddenPathwayReport audit = relu_pattern_audit(score_circuit, naturals, intervened);
    bool case1_unit3 = false, case2_any = false, low_units = false;
    for (const auto& f : audit.flags) {
        if (f.unit == 2 && f.sample == 0) case1_unit3 = true;
        if (f.sample == 1) case2_any = true;
        if (f.unit < 2) low_units = true;
    }
    add("audit_case1_unit3_flagged", case1_unit3 ? 1.0 : 0.0, 1.0);
    add("audit_case2_no_new_unit", case2_any ? 1.0 : 0.0, 0.0);
    add("audit_natural_units_unflagged", low_units ? 1.0 : 0.0, 0.0);

    // Context-gated classifier on the patched hidden state.
    Vector ctx_low{0.0, 0.0, 0.0, 0.5};
    Vector ctx_high{0.0, 0.0, 0.0, 0.8};
    Vector ctx_b{0.0, 0.0, 0.0, 0.9};
    add("context_case1_low_class_a",
        circuit_forward(context_circuit, patched1, &ctx_low).predicted_class, 0.0);
    add("context_case1_high_class_c",
        circuit_forward(context_circuit, patched1, &ctx_high).predicted_class, 2.0);
    add("context_natural_b_stays_b",
        circuit_forward(context_circuit, {0.0, 0.0, 0.0, 0.0}, &ctx_b).predicted_class, 1.0);

    // Dormant scan from the natural class-A input: the added divergence is
    // silent under the low context and flips the class under the high one.
    DormantScanResult scan = dormant_change_scan(context_circuit, class_a[0],
                                                 {0.0, 0.0, 0.0, -0.5},
                                                 {ctx_low, ctx_high}, 1e-6);
    auto contains = [](const std::vector<std::size_t>& v, std::size_t x) {
        return std::find(v.begin(), v.end(), x) != v.end();
    };
    add("dormant_null_at_low", contains(scan.null_contexts, 0) ? 1.0 : 0.0, 1.0);
    add("dormant_changed_at_high", contains(scan.changed_contexts, 1) ? 1.0 : 0.0, 1.0);
    add("dormant_flag", scan.dormant ? 1.0 : 0.0, 1.0);

    // Balanced linear score: patching one coordinate flips the sign.
    add("balanced_base_score", circuit_forward(balanced, {1.0, 1.0, 1.0, 1.0}).score, 1.0);
    add("balanced_patched_score", circuit_forward(balanced, {1.0, 3.0, 1.0, 1.0}).score,
        -1.0);

    // Patching one coordinate between two unit-circle points lands sqrt(2)
    // from the center.
    Vector circle_patch = coordinate_patch(PatchSet{{0}}, {1.0, 0.0}, {0.0, 1.0});
    add("circle_patch_norm", norm(circle_patch), std::sqrt(2.0));

    // Convex-hull projection of patched case 1 back onto the class inputs.
    Vector hull = project_to_class_region(class_a, patched1, ProjectionMode{});
    add("hull_projection", linf_error(hull, {0.5, 0.5, 1.0, 0.0}), 0.0);
    add("hull_projection_score", circuit_forward(score_circuit, hull).score, 0.0);

    // Patch-closure: the two-point diagonal is open with witness (1, 0); the
    // full grid is closed.
    ClosureResult open_set = patch_closure_check({{0.0, 0.0}, {1.0, 1.0}});
    add("closure_violation_detected", open_set.closed ? 1.0 : 0.0, 0.0);
    add("closure_witness", linf_error(open_set.witness, {1.0, 0.0}), 0.0);
    add("closure_trace_reaches_witness",
        open_set.trace.empty()
            ? 1.0
            : linf_error(open_set.trace.back().result, open_set.witness),
        0.0);
    ClosureResult grid =
        patch_closure_check({{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}});
    add("closure_grid_closed", grid.closed ? 1.0 : 0.0, 1.0);

    // Divergence classifier on the patched input: the off-manifold residual
    // shifts the score circuit, so it is flagged.
    std::vector<Vector> eval_set = class_a;
    eval_set.insert(eval_set.end(), class_b.begin(), class_b.end());
    BehaviorFn psi = [&](const Vector& x) {
        return Vector{circuit_forward(score_circuit, x).score};
    };
    HarmlessVerdict verdict = classify_divergence(patched1, class_a, eval_set, psi, 2, 1, 1e-6);
    add("divergence_flagged_harmful", verdict.harmless ? 1.0 : 0.0, 0.0);
    add("divergence_vector", linf_error(verdict.divergence_vector, {0.0, 0.0, 0.0, -0.5}),
        0.0);
    add("divergence_max_delta", verdict.max_delta, 0.5);
    add("divergence_deltas",
        linf_error(Vector(verdict.per_eval_deltas.begin(), verdict.per_eval_deltas.end()),
                   {0.25, 0.5, 0.0, 0.0}),
        0.0);

    // On-manifold point: zero residual, harmless at any epsilon.
    HarmlessVerdict on_manifold =
        classify_divergence({0.5, 0.5, 1.0, 0.0}, class_a, eval_set, psi, 2, 1, 1e-6);
    add("on_manifold_harmless", on_manifold.harmless ? 1.0 : 0.0, 1.0);

    // A behavior blind to the divergent coordinate never moves.
    BehaviorFn psi_blind = [&](const Vector& x) {
        Vector masked = x;
        masked[3] = 0.0;
        return Vector{circuit_forward(score_circuit, masked).score};
    };
    HarmlessVerdict blind =
        classify_divergence(patched1, class_a, eval_set, psi_blind, 2, 1, 1e-6);
    add("insensitive_behavior_harmless", blind.harmless ? 1.0 : 0.0, 1.0);

    return checks;
}

}  // namespace repdiv
