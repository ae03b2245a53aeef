// Command-line pipeline: phantom generation, training, multi-orientation
// self-ensemble inference, evaluation, and tau-grid sweeps.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lesionseg/checkpoint.hpp"
#include "lesionseg/metrics.hpp"
#include "lesionseg/nifti.hpp"
#include "lesionseg/phantom.hpp"
#include "lesionseg/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lesionseg;

namespace {

// Maps JSON config keys onto CLI options; flags override file values and
// unknown keys are rejected.
class ConfigBinder {
public:
    explicit ConfigBinder(CLI::App& cmd) {
        cmd.add_option("--config", config_path_, "JSON config file (flags override)");
    }

    template <typename T>
    void add(CLI::App& cmd, const std::string& flag, const std::string& key, T& var,
             const std::string& desc) {
        CLI::Option* opt = cmd.add_option(flag, var, desc);
        entries_.push_back({key, opt, [&var](const json& j) { var = j.get<T>(); }});
    }

    void apply() {
        if (config_path_.empty())
            return;
        std::ifstream is(config_path_);
        if (!is)
            throw config_error("cannot open config file: " + config_path_);
        json j = json::parse(is, nullptr, false);
        if (j.is_discarded())
            throw config_error("bad json in config file: " + config_path_);
        for (auto& [key, value] : j.items()) {
            bool known = false;
            for (auto& e : entries_) {
                if (e.key != key)
                    continue;
                known = true;
                if (e.opt->count() == 0) // explicit flags win
                    e.set(value);
                break;
            }
            if (!known)
                throw config_error("unknown config key: " + key);
        }
    }

    json echo() const {
        json j;
        for (auto& e : entries_)
            j[e.key] = e.opt->as<std::string>();
        return j;
    }

private:
    struct Entry {
        std::string key;
        CLI::Option* opt;
        std::function<void(const json&)> set;
    };
    std::string config_path_;
    std::vector<Entry> entries_;
};

void write_echo(const std::string& path, const json& j) {
    atomic_write_text(path, j.dump(2) + "\n");
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        out.push_back(std::stoi(tok));
    return out;
}

std::vector<int> grid_range(int lo, int hi, int step) {
    if (step < 1 || hi < lo)
        throw config_error("bad tau grid range");
    std::vector<int> out;
    for (int v = lo; v <= hi; v += step)
        out.push_back(v);
    return out;
}

StatsMode parse_stats(const std::string& s) {
    if (s == "train")
        return StatsMode::TrainStats;
    if (s == "ttin")
        return StatsMode::InstanceStats;
    throw config_error("unknown stats mode: " + s + " (train|ttin)");
}

// ------------------------------------------------------------------ phantom

struct PhantomArgs {
    std::string out;
    std::uint64_t seed = 0;
    int subjects = 4;
    int dim = 48;
    int lesions_min = 3, lesions_max = 6;
    double radius_min = 2.0, radius_max = 3.5;
    double noise = 0.04;
};

int cmd_phantom(const PhantomArgs& a, const json& echo) {
    PhantomConfig cfg;
    cfg.dims = {a.dim, a.dim, a.dim};
    cfg.n_subjects = a.subjects;
    cfg.lesions_min = a.lesions_min;
    cfg.lesions_max = a.lesions_max;
    cfg.lesion_radius_min = a.radius_min;
    cfg.lesion_radius_max = a.radius_max;
    cfg.noise_sigma = a.noise;
    cfg.seed = a.seed;
    cfg.validate();

    auto cohort = generate_phantom_cohort(cfg);
    save_cohort(a.out, cohort, a.seed);
    write_echo((fs::path(a.out) / "run_config.json").string(), echo);
    std::cout << "wrote " << cohort.size() << " subjects to " << a.out << "\n";
    return 0;
}

// -------------------------------------------------------------------- train

struct TrainArgs {
    std::string data, out, resume;
    std::string norm = "bn";
    std::string contrast_dropout = "on";
    std::string rater_sampling = "on";
    std::string spatial_augment = "on";
    std::string norm_order = "conv-norm-relu";
    std::string channels = "8,16,32";
    int iters = 300;
    int batch = 4;
    double lr = 1e-4;
    double eps = 1e-5;
    double momentum = 0.1;
    std::uint64_t seed = 0;
};

bool parse_on_off(const std::string& s, const std::string& what) {
    if (s == "on")
        return true;
    if (s == "off")
        return false;
    throw config_error(what + " must be on|off");
}

int cmd_train(const TrainArgs& a, const json& echo) {
    auto cohort = load_cohort(a.data);

    UNet net;
    TrainerState state;
    if (!a.resume.empty()) {
        net = load_checkpoint(a.resume, &state);
    } else {
        NetConfig cfg;
        cfg.channels = parse_int_list(a.channels);
        cfg.norm = parse_norm_mode(a.norm);
        cfg.norm_before_act = a.norm_order == "conv-norm-relu";
        if (!cfg.norm_before_act && a.norm_order != "conv-relu-norm")
            throw config_error("norm_order must be conv-norm-relu|conv-relu-norm");
        cfg.eps = a.eps;
        cfg.momentum = a.momentum;
        cfg.validate();
        net = UNet(cfg);
        net.init_weights(a.seed);
    }

    TrainConfig tcfg;
    tcfg.iterations = a.iters;
    tcfg.batch_size = a.batch;
    tcfg.lr = a.lr;
    tcfg.contrast_dropout = parse_on_off(a.contrast_dropout, "contrast_dropout");
    tcfg.rater_sampling = parse_on_off(a.rater_sampling, "rater_sampling");
    tcfg.spatial_augment = parse_on_off(a.spatial_augment, "spatial_augment");
    tcfg.seed = a.seed;
    tcfg.validate();

    Trainer trainer(net, tcfg);
    if (!a.resume.empty())
        trainer.restore(state);
    auto losses = trainer.run(cohort, a.iters);

    fs::create_directories(a.out);
    TrainerState out_state = trainer.state();
    save_checkpoint(net, (fs::path(a.out) / "checkpoint.bin").string(), &out_state);

    std::ostringstream csv;
    csv << "iteration,loss\n";
    csv.precision(12);
    const std::int64_t first = trainer.iterations_done() - std::int64_t(losses.size()) + 1;
    for (std::size_t i = 0; i < losses.size(); ++i)
        csv << (first + std::int64_t(i)) << ',' << losses[i] << '\n';
    atomic_write_text((fs::path(a.out) / "loss.csv").string(), csv.str());

    json e = echo;
    e["resolved_checkpoint_config"] = json::parse(
        checkpoint_config_json((fs::path(a.out) / "checkpoint.bin").string()));
    write_echo((fs::path(a.out) / "run_config.json").string(), e);
    std::cout << "trained " << losses.size() << " iterations, final loss "
              << (losses.empty() ? 0.0 : losses.back()) << "\n";
    return 0;
}

// -------------------------------------------------------------------- infer

struct InferArgs {
    std::string ckpt, data, out;
    std::string stats = "ttin";
    std::string transforms = "all24";
    int tau1 = 16, tau2 = 7;
    std::vector<std::string> drop;
    int jobs = 1;
};

int cmd_infer(const InferArgs& a, const json& echo) {
    UNet net = load_checkpoint(a.ckpt);
    auto cohort = load_cohort(a.data);

    InferOptions opts;
    opts.stats = parse_stats(a.stats);
    opts.tau1 = a.tau1;
    opts.tau2 = a.tau2;
    opts.transforms = a.transforms;
    for (const auto& name : a.drop)
        opts.drop.push_back(parse_contrast(name));
    opts.jobs = a.jobs;

    auto results = run_inference(net, cohort, opts);

    fs::create_directories(a.out);
    for (const auto& r : results) {
        // temp names keep the .nii.gz suffix so the writer stays gzipped
        const fs::path out(a.out);
        nifti::write_confidence(r.confidence, (out / ("tmp.conf_" + r.id + ".nii.gz")).string());
        fs::rename(out / ("tmp.conf_" + r.id + ".nii.gz"), out / ("conf_" + r.id + ".nii.gz"));
        nifti::write_mask(r.mask, (out / ("tmp.mask_" + r.id + ".nii.gz")).string());
        fs::rename(out / ("tmp.mask_" + r.id + ".nii.gz"), out / ("mask_" + r.id + ".nii.gz"));
    }
    json e = echo;
    e["transform_ids"] = json::array();
    for (const auto& t : transform_set(a.transforms))
        e["transform_ids"].push_back(t.id());
    write_echo((fs::path(a.out) / "run_config.json").string(), e);
    std::cout << "wrote confidence maps and fused masks for " << results.size()
              << " subjects to " << a.out << "\n";
    return 0;
}

// --------------------------------------------------------------------- eval

struct EvalArgs {
    std::string pred, data, out;
};

int cmd_eval(const EvalArgs& a, const json& echo) {
    auto cohort = load_cohort(a.data);
    std::vector<BinaryMask3D> preds, r1, r2;
    for (const auto& s : cohort) {
        const fs::path p = fs::path(a.pred) / ("mask_" + s.id + ".nii.gz");
        if (!fs::exists(p))
            throw data_error("missing prediction: " + p.string());
        preds.push_back(nifti::read_mask(p.string()));
        r1.push_back(s.rater1);
        r2.push_back(s.rater2);
    }
    MetricsReport rep = evaluate_cohort(preds, r1, r2);

    std::ostringstream js, cs;
    write_report_json(rep, js);
    write_report_csv(rep, cs);
    atomic_write_text(a.out + ".json", js.str());
    atomic_write_text(a.out + ".csv", cs.str());
    write_echo(a.out + ".config.json", echo);
    std::cout << "mean score " << rep.average.score << (rep.partial ? " (partial, vc omitted)" : "")
              << " over " << rep.n_subjects << " subjects\n";
    return 0;
}

// -------------------------------------------------------------------- sweep

struct SweepArgs {
    std::string ckpt, data, out;
    std::string stats = "ttin";
    std::string transforms = "all24";
    int tau1_min = 0, tau1_max = 23, tau1_step = 1;
    int tau2_min = 0, tau2_max = 23, tau2_step = 1;
    std::vector<std::string> drop;
};

int cmd_sweep(const SweepArgs& a, const json& echo) {
    UNet net = load_checkpoint(a.ckpt);
    auto cohort = load_cohort(a.data);

    InferOptions opts;
    opts.stats = parse_stats(a.stats);
    opts.transforms = a.transforms;
    for (const auto& name : a.drop)
        opts.drop.push_back(parse_contrast(name));

    auto rows = run_sweep(net, cohort, opts, grid_range(a.tau1_min, a.tau1_max, a.tau1_step),
                          grid_range(a.tau2_min, a.tau2_max, a.tau2_step));

    std::ostringstream csv;
    write_sweep_csv(rows, csv);
    atomic_write_text(a.out, csv.str());
    json e = echo;
    e["transform_ids"] = json::array();
    for (const auto& t : transform_set(a.transforms))
        e["transform_ids"].push_back(t.id());
    write_echo(a.out + ".config.json", e);

    SweepRow best = best_sweep_row(rows);
    std::cout << "best mean score " << best.mean_score << " at tau1=" << best.tau1
              << " tau2=" << best.tau2 << " (" << rows.size() << " cells)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-orientation self-ensemble lesion segmentation pipeline"};
    app.require_subcommand(1);

    PhantomArgs pa;
    auto* phantom = app.add_subcommand("phantom", "generate a synthetic multicontrast cohort");
    ConfigBinder pb(*phantom);
    pb.add(*phantom, "--out", "out", pa.out, "output directory");
    phantom->get_option("--out")->required();
    pb.add(*phantom, "--seed", "seed", pa.seed, "RNG seed");
    pb.add(*phantom, "--subjects", "subjects", pa.subjects, "number of subjects");
    pb.add(*phantom, "--dims", "dims", pa.dim, "cubic volume extent");
    pb.add(*phantom, "--lesions-min", "lesions_min", pa.lesions_min, "min lesion count");
    pb.add(*phantom, "--lesions-max", "lesions_max", pa.lesions_max, "max lesion count");
    pb.add(*phantom, "--radius-min", "radius_min", pa.radius_min, "min lesion radius (vox)");
    pb.add(*phantom, "--radius-max", "radius_max", pa.radius_max, "max lesion radius (vox)");
    pb.add(*phantom, "--noise", "noise", pa.noise, "additive noise sigma");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train the segmentation net");
    ConfigBinder tb(*train);
    tb.add(*train, "--data", "data", ta.data, "manifest.json of the training cohort");
    train->get_option("--data")->required();
    tb.add(*train, "--out", "out", ta.out, "output directory");
    train->get_option("--out")->required();
    tb.add(*train, "--resume", "resume", ta.resume, "checkpoint to resume from");
    tb.add(*train, "--norm", "norm", ta.norm, "normalization: bn|in|condin");
    tb.add(*train, "--contrast-dropout", "contrast_dropout", ta.contrast_dropout, "on|off");
    tb.add(*train, "--rater-sampling", "rater_sampling", ta.rater_sampling, "on|off");
    tb.add(*train, "--spatial-augment", "spatial_augment", ta.spatial_augment, "on|off");
    tb.add(*train, "--norm-order", "norm_order", ta.norm_order,
           "conv-norm-relu|conv-relu-norm");
    tb.add(*train, "--channels", "channels", ta.channels, "encoder channels, e.g. 8,16,32");
    tb.add(*train, "--iters", "iters", ta.iters, "training iterations");
    tb.add(*train, "--batch", "batch", ta.batch, "batch size");
    tb.add(*train, "--lr", "lr", ta.lr, "learning rate");
    tb.add(*train, "--eps", "eps", ta.eps, "normalization epsilon");
    tb.add(*train, "--momentum", "momentum", ta.momentum, "moving-average momentum");
    tb.add(*train, "--seed", "seed", ta.seed, "RNG seed");

    InferArgs ia;
    auto* infer = app.add_subcommand("infer", "self-ensemble inference with lesion fusion");
    ConfigBinder ib(*infer);
    ib.add(*infer, "--ckpt", "ckpt", ia.ckpt, "checkpoint file");
    infer->get_option("--ckpt")->required();
    ib.add(*infer, "--data", "data", ia.data, "manifest.json of the input cohort");
    infer->get_option("--data")->required();
    ib.add(*infer, "--out", "out", ia.out, "output directory");
    infer->get_option("--out")->required();
    ib.add(*infer, "--stats", "stats", ia.stats, "inference statistics: train|ttin");
    ib.add(*infer, "--transforms", "transforms", ia.transforms, "all24|identity|3plane");
    ib.add(*infer, "--tau1", "tau1", ia.tau1, "lesion detection threshold");
    ib.add(*infer, "--tau2", "tau2", ia.tau2, "lesion growth threshold");
    ib.add(*infer, "--drop", "drop", ia.drop, "contrast(s) to drop before inference");
    ib.add(*infer, "--jobs", "jobs", ia.jobs, "subject-level parallelism");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "evaluate fused masks against both raters");
    ConfigBinder eb(*eval);
    eb.add(*eval, "--pred", "pred", ea.pred, "directory with mask_<id>.nii.gz predictions");
    eval->get_option("--pred")->required();
    eb.add(*eval, "--data", "data", ea.data, "manifest.json with rater masks");
    eval->get_option("--data")->required();
    eb.add(*eval, "--out", "out", ea.out, "report path prefix (.json/.csv appended)");
    eval->get_option("--out")->required();

    SweepArgs sa;
    auto* sweep = app.add_subcommand("sweep", "tau-grid search on cached confidence maps");
    ConfigBinder sb(*sweep);
    sb.add(*sweep, "--ckpt", "ckpt", sa.ckpt, "checkpoint file");
    sweep->get_option("--ckpt")->required();
    sb.add(*sweep, "--data", "data", sa.data, "manifest.json of the validation cohort");
    sweep->get_option("--data")->required();
    sb.add(*sweep, "--out", "out", sa.out, "output CSV path");
    sweep->get_option("--out")->required();
    sb.add(*sweep, "--stats", "stats", sa.stats, "train|ttin");
    sb.add(*sweep, "--transforms", "transforms", sa.transforms, "all24|identity|3plane");
    sb.add(*sweep, "--tau1-min", "tau1_min", sa.tau1_min, "tau1 grid start");
    sb.add(*sweep, "--tau1-max", "tau1_max", sa.tau1_max, "tau1 grid end");
    sb.add(*sweep, "--tau1-step", "tau1_step", sa.tau1_step, "tau1 grid step");
    sb.add(*sweep, "--tau2-min", "tau2_min", sa.tau2_min, "tau2 grid start");
    sb.add(*sweep, "--tau2-max", "tau2_max", sa.tau2_max, "tau2 grid end");
    sb.add(*sweep, "--tau2-step", "tau2_step", sa.tau2_step, "tau2 grid step");
    sb.add(*sweep, "--drop", "drop", sa.drop, "contrast(s) to drop before inference");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) { // --help
            (void)app.exit(e);
            return 0;
        }
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (phantom->parsed()) {
            pb.apply();
            return cmd_phantom(pa, pb.echo());
        }
        if (train->parsed()) {
            tb.apply();
            return cmd_train(ta, tb.echo());
        }
        if (infer->parsed()) {
            ib.apply();
            return cmd_infer(ia, ib.echo());
        }
        if (eval->parsed()) {
            eb.apply();
            return cmd_eval(ea, eb.echo());
        }
        if (sweep->parsed()) {
            sb.apply();
            return cmd_sweep(sa, sb.echo());
        }
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const format_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const unsupported_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
}
