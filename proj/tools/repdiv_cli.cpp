// Command-line front end: dataset export, model and alignment training,
// pipeline evaluation, divergence reports, the worked-example suite, and the
// held-out regression.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "repdiv/counterfactual.hpp"
#include "repdiv/divergence.hpp"
#include "repdiv/errors.hpp"
#include "repdiv/harness.hpp"
#include "repdiv/mlp.hpp"
#include "repdiv/pathology.hpp"
#include "repdiv/synthdata.hpp"

namespace fs = std::filesystem;
using namespace repdiv;

namespace {

std::string fmt9(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << content;
}

struct Opts {
    std::string config_path;
    std::string out;
    std::string in_dir;
    std::string scheme;
    std::string loss;
    std::string partition;
    std::string format = "json";
    std::string mlp_path;
    std::string natural_path, intervened_path, pairs_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double cl_eps = -1.0;
};

void add_common(CLI::App* cmd, Opts& o, bool with_seed = true) {
    cmd->add_option("--config", o.config_path, "experiment config JSON");
    cmd->add_option("--out", o.out, "output directory");
    if (with_seed)
        cmd->add_option("--seed", o.seed, "run seed")->each([&](const std::string&) {
            o.seed_set = true;
        });
    cmd->add_option("--scheme", o.scheme, "default | ood")
        ->check(CLI::IsMember({"default", "ood"}));
    cmd->add_option("--loss", o.loss, "das | cl | das+cl")
        ->check(CLI::IsMember({"das", "cl", "das+cl"}));
    cmd->add_option("--cl-eps", o.cl_eps, "counterfactual-latent loss weight");
    cmd->add_option("--format", o.format, "stdout format")
        ->check(CLI::IsMember({"json", "csv"}));
}

ExperimentConfig resolve_config(const Opts& o) {
    ExperimentConfig cfg;
    if (!o.config_path.empty()) cfg = load_experiment_config(o.config_path);
    if (!o.scheme.empty()) cfg.scheme = scheme_from_str(o.scheme);
    if (!o.loss.empty()) cfg.loss_mode = loss_mode_from_str(o.loss);
    if (o.cl_eps >= 0.0) cfg.cl_eps = o.cl_eps;
    if (!o.out.empty())
        cfg.output_dir = o.out;
    else if (o.config_path.empty() || cfg.output_dir == "runs")
        cfg.output_dir = default_output_root();
    return cfg;
}

// Partition index within the scheme's (first, second) pair.
std::size_t partition_index(const std::pair<Partition, Partition>& parts,
                            const std::string& flag) {
    if (flag.empty()) return 0;
    PartitionName want = partition_name_from_str(flag);
    if (parts.first.name == want) return 0;
    if (parts.second.name == want) return 1;
    throw ConfigError("partition " + flag + " is not part of the selected scheme");
}

std::vector<LabeledRep> take(const std::vector<LabeledRep>& data,
                             const std::vector<std::size_t>& idx) {
    std::vector<LabeledRep> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(data[i]);
    return out;
}

int cmd_gen_data(const Opts& o) {
    ExperimentConfig cfg = resolve_config(o);
    if (o.seed_set) cfg.dataset.seed = o.seed;
    cfg.dataset.validate();
    auto dataset = generate_dataset(cfg.dataset);
    fs::path out = fs::path(cfg.output_dir) / "dataset.csv";
    fs::create_directories(cfg.output_dir);
    write_dataset_csv(out.string(), dataset);
    std::cout << out.string() << "\n";
    return 0;
}

int cmd_train_mlp(const Opts& o) {
    ExperimentConfig cfg = resolve_config(o);
    std::uint64_t seed = o.seed_set ? o.seed : cfg.seeds.front();
    auto dataset = generate_dataset(cfg.dataset);

    MlpConfig mc = cfg.mlp;
    MlpTrainResult result;
    if (cfg.scheme == SplitScheme::Default && o.partition.empty()) {
        mc.seed = seed;
        result = train_mlp(dataset, mc);
    } else {
        auto parts = split_partitions(dataset, cfg.dataset, cfg.scheme, cfg.dataset.seed,
                                      cfg.train_fraction);
        std::size_t pi = partition_index(parts, o.partition);
        const Partition& part = pi == 0 ? parts.first : parts.second;
        mc.seed = cfg.scheme == SplitScheme::Ood ? Rng(seed).fork(60 + pi).next_u64() : seed;
        result = train_mlp(take(dataset, part.train), take(dataset, part.val), mc);
    }

    fs::create_directories(cfg.output_dir);
    fs::path ckpt = fs::path(cfg.output_dir) / "mlp.ckpt";
    save_mlp(ckpt.string(), result.model);
    std::string hist = "epoch,train_loss,val_loss,val_accuracy\n";
    for (std::size_t e = 0; e < result.history.size(); ++e) {
        const auto& st = result.history[e];
        hist += std::to_string(e) + "," + fmt9(st.train_loss) + "," + fmt9(st.val_loss) +
                "," + fmt9(st.val_accuracy) + "\n";
    }
    write_file(fs::path(cfg.output_dir) / "mlp_history.csv", hist);
    std::cout << ckpt.string() << "\n";
    return 0;
}

int cmd_train_align(const Opts& o) {
    if (o.mlp_path.empty()) throw ConfigError("train-align requires --mlp");
    ExperimentConfig cfg = resolve_config(o);
    std::uint64_t seed = o.seed_set ? o.seed : cfg.seeds.front();
    auto dataset = generate_dataset(cfg.dataset);
    auto parts = split_partitions(dataset, cfg.dataset, cfg.scheme, cfg.dataset.seed,
                                  cfg.train_fraction);
    std::size_t pi = partition_index(parts, o.partition);
    const Partition& part = pi == 0 ? parts.first : parts.second;

    Mlp model = load_mlp(o.mlp_path);
    AlignTrainConfig ac = align_config_for_mode(cfg, Rng(seed).fork(50 + pi).next_u64());
    AlignTrainResult result = train_alignment(model, cfg.dataset, take(dataset, part.train), ac);

    fs::create_directories(cfg.output_dir);
    fs::path ckpt = fs::path(cfg.output_dir) / "alignment.ckpt";
    save_alignment(ckpt.string(), result.af);
    std::string hist = "epoch,train_loss,iia,emd\n";
    for (std::size_t e = 0; e < result.history.size(); ++e) {
        const auto& st = result.history[e];
        hist += std::to_string(e) + "," + fmt9(st.train_loss) + "," + fmt9(st.iia) + "," +
                fmt9(st.emd) + "\n";
    }
    write_file(fs::path(cfg.output_dir) / "history.csv", hist);
    std::cout << ckpt.string() << "\n";
    return 0;
}

int cmd_evaluate(const Opts& o) {
    ExperimentConfig cfg = resolve_config(o);
    if (o.seed_set) cfg.seeds = {o.seed};
    auto records = run_pipeline(cfg);
    double mean_heldout = 0.0;
    for (const auto& r : records) mean_heldout += r.heldout_iia;
    if (!records.empty()) mean_heldout /= static_cast<double>(records.size());
    fs::path summary = fs::path(cfg.output_dir) / scheme_str(cfg.scheme) /
                       loss_mode_str(cfg.loss_mode) / "summary.json";
    std::cout << summary.string() << "\nruns=" << records.size()
              << " mean_heldout_iia=" << fmt9(mean_heldout) << "\n";
    return 0;
}

int cmd_sweep(const Opts& o) {
    ExperimentConfig cfg = resolve_config(o);
    if (o.seed_set) cfg.seeds = {o.seed};
    std::vector<LossMode> modes{LossMode::DasOnly, LossMode::ClOnly, LossMode::DasPlusCl};
    if (!o.loss.empty()) modes = {loss_mode_from_str(o.loss)};
    auto records = run_sweep(cfg, modes);
    std::cout << "runs=" << records.size() << "\n";
    if (cfg.scheme == SplitScheme::Ood && records.size() >= 10 && modes.size() >= 2) {
        fs::path dir = fs::path(cfg.output_dir) / scheme_str(cfg.scheme);
        OlsFit fit = regression_study(records, dir.string());
        std::cout << "regression coefficient=" << fmt9(fit.coefficient)
                  << " p_value=" << fmt9(fit.p_value) << "\n";
    }
    return 0;
}

int cmd_regress(const Opts& o) {
    if (o.in_dir.empty()) throw ConfigError("regress requires --in");
    auto records = load_run_records(o.in_dir);
    std::string out = o.out.empty() ? o.in_dir : o.out;
    OlsFit fit = regression_study(records, out);
    if (o.format == "csv") {
        std::cout << "statistic,value\ncoefficient," << fmt9(fit.coefficient)
                  << "\nintercept," << fmt9(fit.intercept) << "\nr_squared,"
                  << fmt9(fit.r_squared) << "\nf_statistic," << fmt9(fit.f_statistic)
                  << "\np_value," << fmt9(fit.p_value) << "\nn_observations,"
                  << fit.n_observations << "\n";
    } else {
        std::cout << "{\"coefficient\": " << fmt9(fit.coefficient)
                  << ", \"intercept\": " << fmt9(fit.intercept) << ", \"r_squared\": "
                  << fmt9(fit.r_squared) << ", \"f_statistic\": " << fmt9(fit.f_statistic)
                  << ", \"p_value\": " << fmt9(fit.p_value) << ", \"n_observations\": "
                  << fit.n_observations << "}\n";
    }
    return 0;
}

std::vector<Vector> load_cloud(const std::string& path) {
    std::vector<Vector> out;
    for (const auto& rec : read_dataset_csv(path)) out.push_back(rec.h);
    return out;
}

int cmd_divergence(const Opts& o) {
    if (o.natural_path.empty() || o.intervened_path.empty() || o.pairs_path.empty())
        throw ConfigError("divergence requires --natural, --intervened and --pairs");
    ExperimentConfig cfg = resolve_config(o);
    ComparisonSet cmp{load_cloud(o.natural_path), load_cloud(o.intervened_path),
                      load_cloud(o.pairs_path)};
    DivergenceParams params;
    params.row_scale = cfg.dataset.extra_dims;
    DivergenceReport report = full_report(cmp, params);
    std::string json = report_to_json(report);
    write_file(fs::path(cfg.output_dir) / "divergence.json", json);
    if (o.format == "csv") {
        std::cout << "metric,value\nemd," << fmt9(report.emd) << "\nbaseline_emd,"
                  << fmt9(report.baseline_emd) << "\nrow_emd," << fmt9(report.row_emd)
                  << "\nnearest_cos," << fmt9(report.nearest_cos) << "\nnearest_l2,"
                  << fmt9(report.nearest_l2) << "\nmin_cos_pairing,"
                  << fmt9(report.min_cos_pairing) << "\nmin_l2_pairing,"
                  << fmt9(report.min_l2_pairing) << "\nlocal_pca," << fmt9(report.local_pca)
                  << "\nllr," << fmt9(report.llr) << "\nkde_neg_log,"
                  << fmt9(report.kde_neg_log) << "\n";
    } else {
        std::cout << json;
    }
    return 0;
}

int cmd_examples(const Opts& o) {
    auto checks = worked_examples_suite();
    std::size_t failed = 0;
    std::string csv = "name,pass,got,want\n";
    for (const auto& c : checks) {
        if (!c.pass) ++failed;
        csv += c.name + "," + (c.pass ? "1" : "0") + "," + fmt9(c.got) + "," +
               fmt9(c.want) + "\n";
    }
    if (o.format == "csv") {
        std::cout << csv;
    } else {
        for (const auto& c : checks)
            std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " got=" << fmt9(c.got)
                      << " want=" << fmt9(c.want) << "\n";
        std::cout << checks.size() - failed << "/" << checks.size() << " checks passed\n";
    }
    if (!o.out.empty()) write_file(fs::path(o.out) / "examples.csv", csv);
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"representation divergence laboratory"};
    app.require_subcommand(1);
    Opts o;

    CLI::App* gen = app.add_subcommand("gen-data", "export the synthetic dataset as CSV");
    add_common(gen, o);

    CLI::App* tm = app.add_subcommand("train-mlp", "train the grid classifier");
    add_common(tm, o);
    tm->add_option("--partition", o.partition, "p1 | p2 | dense | sparse");

    CLI::App* ta = app.add_subcommand("train-align", "train an alignment on one partition");
    add_common(ta, o);
    ta->add_option("--mlp", o.mlp_path, "classifier checkpoint")->required();
    ta->add_option("--partition", o.partition, "p1 | p2 | dense | sparse");

    CLI::App* ev = app.add_subcommand("evaluate", "full pipeline for one loss mode");
    add_common(ev, o);

    CLI::App* sw = app.add_subcommand("sweep", "pipelines for every loss mode");
    add_common(sw, o);

    CLI::App* rg = app.add_subcommand("regress", "held-out IIA vs divergence regression");
    add_common(rg, o, false);
    rg->add_option("--in", o.in_dir, "directory holding metrics.json files");

    CLI::App* dv = app.add_subcommand("divergence", "report for explicit point clouds");
    add_common(dv, o, false);
    dv->add_option("--natural", o.natural_path, "natural cloud CSV");
    dv->add_option("--intervened", o.intervened_path, "intervened cloud CSV");
    dv->add_option("--pairs", o.pairs_path, "ground-truth counterpart CSV");

    CLI::App* ex = app.add_subcommand("examples", "run the worked-example oracle suite");
    add_common(ex, o, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(o);
        if (tm->parsed()) return cmd_train_mlp(o);
        if (ta->parsed()) return cmd_train_align(o);
        if (ev->parsed()) return cmd_evaluate(o);
        if (sw->parsed()) return cmd_sweep(o);
        if (rg->parsed()) return cmd_regress(o);
        if (dv->parsed()) return cmd_divergence(o);
        if (ex->parsed()) return cmd_examples(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
