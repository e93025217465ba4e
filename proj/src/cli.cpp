#include "swreg/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"
#include "swreg/atlas.hpp"
#include "swreg/checkpoint.hpp"
#include "swreg/checks.hpp"
#include "swreg/config.hpp"
#include "swreg/digest.hpp"
#include "swreg/trainer.hpp"
#include "swreg/volume_io.hpp"
#include "swreg/warp.hpp"

namespace swreg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(IoErrc::open_failed, path.string());
    os << text;
    if (!os) throw IoError(IoErrc::write_failed, path.string());
}

json read_json(const fs::path& path) {
    const std::string text = read_text_file(path.string());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

// Records one command's provenance in OUT/manifest.json, keeping entries
// left there by other commands.
class Manifest {
public:
    Manifest(fs::path dir, std::string command, const std::string& config_text, std::uint64_t seed)
        : dir_(std::move(dir)), command_(std::move(command)) {
        entry_["config_sha256"] = sha256_hex(config_text);
        entry_["seed"] = seed;
        entry_["artifacts"] = json::object();
    }
    void add(const fs::path& file) { entry_["artifacts"][fs::relative(file, dir_).generic_string()] = sha256_file(file); }
    void set(const std::string& key, json value) { entry_[key] = std::move(value); }
    void write() const {
        const fs::path path = dir_ / "manifest.json";
        json all = json::object();
        if (fs::exists(path)) {
            try {
                all = json::parse(read_text_file(path.string()));
            } catch (const json::parse_error&) {
                all = json::object();
            }
        }
        all[command_] = entry_;
        write_text(path, all.dump(2) + "\n");
    }

private:
    fs::path dir_;
    std::string command_;
    json entry_;
};

std::string subject_stem(int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "subject_%03d", id);
    return buf;
}

struct DataDir {
    json split;
    std::vector<Subject> subjects;  // indexed by id
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

DataDir load_data(const fs::path& dir) {
    DataDir d;
    d.split = read_json(dir / "split.json");
    try {
        d.train = d.split.at("train").get<std::vector<std::size_t>>();
        d.test = d.split.at("test").get<std::vector<std::size_t>>();
        const int n = d.split.at("subjects").get<int>();
        for (int i = 0; i < n; ++i) {
            const std::string stem = subject_stem(i);
            d.subjects.push_back(
                Subject{i, read_volume(dir / (stem + "_image.ddfv")), read_masks(dir / (stem + "_masks.ddfv"))});
        }
    } catch (const json::exception& e) {
        throw ConfigError((dir / "split.json").string() + ": " + e.what());
    }
    for (std::size_t i : d.train)
        if (i >= d.subjects.size()) throw ConfigError("split.json: train index out of range");
    for (std::size_t i : d.test)
        if (i >= d.subjects.size()) throw ConfigError("split.json: test index out of range");
    return d;
}

std::vector<std::size_t> subset_indices(const DataDir& d, const std::string& subset) {
    if (subset == "train") return d.train;
    if (subset == "test") return d.test;
    std::vector<std::size_t> all(d.subjects.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
}

const ModelParams& pick_model(const Checkpoint& ck, const std::string& which) {
    return which == "teacher" ? ck.teacher : ck.student;
}

int cmd_gen_data(const std::string& config, const fs::path& out, std::optional<std::uint64_t> seed) {
    const std::string text = read_text_file(config);
    PhantomConfig cfg = parse_phantom_config(text);
    if (seed) cfg.seed = *seed;
    fs::create_directories(out);
    const Dataset ds = generate_dataset(cfg, cfg.subjects, cfg.seed);

    Manifest man(out, "gen-data", to_json(cfg), cfg.seed);
    for (const Subject& s : ds.subjects) {
        const std::string stem = subject_stem(s.id);
        write_file(out / (stem + "_image.ddfv"), s.image);
        write_file(out / (stem + "_masks.ddfv"), s.masks, s.image.spacing());
        man.add(out / (stem + "_image.ddfv"));
        man.add(out / (stem + "_masks.ddfv"));
    }
    json split;
    split["subjects"] = ds.subjects.size();
    split["train"] = ds.train;
    split["test"] = ds.test;
    split["dims"] = {cfg.dims.w, cfg.dims.h, cfg.dims.d};
    split["spacing"] = {cfg.spacing.x, cfg.spacing.y, cfg.spacing.z};
    split["classes"] = kPhantomClasses;
    split["gland_class"] = kGlandClass;
    write_text(out / "split.json", split.dump(2) + "\n");
    write_text(out / "phantom.resolved.json", to_json(cfg) + "\n");
    man.add(out / "split.json");
    man.write();
    std::printf("wrote %zu subjects (%zu train, %zu test) to %s\n", ds.subjects.size(), ds.train.size(), ds.test.size(),
                out.string().c_str());
    return kExitOk;
}

int cmd_train(const std::string& config, const fs::path& data_dir, const fs::path& out,
              std::optional<std::uint64_t> seed) {
    const DataDir data = load_data(data_dir);
    if (data.train.size() < 2) throw ConfigError("training needs at least 2 training subjects");
    std::vector<Subject> train_subjects;
    for (std::size_t i : data.train) train_subjects.push_back(data.subjects[i]);
    TrainConfig cfg = parse_train_config(read_text_file(config), train_subjects.front().image.dims());
    if (seed) cfg.seed = *seed;
    fs::create_directories(out);

    const DatasetSplit split = make_split(train_subjects, cfg.labelled_ratio, derive_seed(cfg.seed, 0));
    std::printf("training %s: %zu labelled, %zu unlabelled subjects, %d epochs\n", to_string(cfg.mode),
                split.labelled.size(), split.unlabelled.size(), cfg.epochs);
    const TrainResult r = train(cfg, split);

    write_checkpoint(out / "final.ckpt", Checkpoint{r.student, r.teacher, r.adam});
    write_text(out / "trainlog.csv", r.log.csv());
    write_text(out / "timing.csv", r.log.timing_csv());
    write_text(out / "train.resolved.json", to_json(cfg) + "\n");
    Manifest man(out, "train", to_json(cfg), cfg.seed);
    man.add(out / "final.ckpt");
    man.add(out / "trainlog.csv");
    man.add(out / "train.resolved.json");
    std::vector<int> labelled_ids;
    for (const Subject& s : split.labelled) labelled_ids.push_back(s.id);
    man.set("labelled_subjects", labelled_ids);
    man.write();
    if (!r.log.epochs.empty()) {
        const EpochLog& last = r.log.epochs.back();
        std::printf("final epoch %d: weak %.6f cons %.6f total %.6f\n", last.epoch, last.weak, last.cons, last.total);
    }
    return kExitOk;
}

int cmd_evaluate(const fs::path& ckpt_path, const fs::path& data_dir, const fs::path& out, const std::string& model,
                 const std::string& subset) {
    const Checkpoint ck = read_checkpoint(ckpt_path);
    const DataDir data = load_data(data_dir);
    const std::vector<std::size_t> idx = subset_indices(data, subset);
    if (idx.size() < 2) throw ConfigError("evaluation subset '" + subset + "' has fewer than 2 subjects");
    fs::create_directories(out);
    const std::vector<EvalRow> rows = evaluate(pick_model(ck, model), data.subjects, ordered_pairs(idx));
    write_text(out / "eval.csv", eval_csv(rows));
    Manifest man(out, "evaluate", "model=" + model + ";subset=" + subset + ";ckpt=" + sha256_file(ckpt_path), 0);
    man.add(out / "eval.csv");
    man.write();
    std::printf("%zu pairs, mean Dice %.3f%%\n", rows.size() / static_cast<std::size_t>(std::max(1, data.subjects.front().masks.classes())),
                mean_dice(rows));
    return kExitOk;
}

int cmd_atlas(const fs::path& ckpt_path, const fs::path& data_dir, const fs::path& out, const std::string& model,
              const std::string& subset, int max_iters, double tol) {
    const Checkpoint ck = read_checkpoint(ckpt_path);
    const DataDir data = load_data(data_dir);
    std::vector<Subject> samples;
    for (std::size_t i : subset_indices(data, subset)) samples.push_back(data.subjects[i]);
    const ModelParams& params = pick_model(ck, model);
    fs::create_directories(out);
    const RegisterFn reg = [&params](const Volume& moving, const Volume& fixed) {
        return predict(params, ImagePair{moving, fixed, std::nullopt, std::nullopt});
    };
    const AtlasResult r = build_atlas(reg, samples, max_iters, tol);
    const Spacing sp = samples.front().image.spacing();

    Manifest man(out, "atlas",
                 "model=" + model + ";subset=" + subset + ";max_iters=" + std::to_string(max_iters) +
                     ";tol=" + std::to_string(tol) + ";ckpt=" + sha256_file(ckpt_path),
                 0);
    write_file(out / "atlas.ddfv", r.atlas);
    write_file(out / "atlas_prob.ddfv", r.probability, sp);
    man.add(out / "atlas.ddfv");
    man.add(out / "atlas_prob.ddfv");
    json ids = json::array();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const fs::path p = out / ("ddf_" + subject_stem(samples[i].id) + ".ddfv");
        write_file(p, r.ddfs[i], sp);
        man.add(p);
        ids.push_back(samples[i].id);
    }
    std::string hist = "iteration,mean_abs_change\n";
    for (std::size_t k = 0; k < r.change_history.size(); ++k) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", k + 1, r.change_history[k]);
        hist += buf;
    }
    write_text(out / "atlas_history.csv", hist);
    json meta;
    meta["samples"] = ids;
    meta["init_subject"] = samples[r.init_index].id;
    meta["iterations"] = r.iterations;
    write_text(out / "atlas_samples.json", meta.dump(2) + "\n");
    man.add(out / "atlas_history.csv");
    man.add(out / "atlas_samples.json");
    man.write();
    std::printf("atlas from %zu samples, %d iteration(s), initial subject %d\n", samples.size(), r.iterations,
                samples[r.init_index].id);
    return kExitOk;
}

int cmd_diversity(const fs::path& atlas_dir, const fs::path& data_dir, const fs::path& out, double fraction) {
    const DataDir data = load_data(data_dir);
    const json meta = read_json(atlas_dir / "atlas_samples.json");
    std::vector<Subject> samples;
    std::vector<Ddf> ddfs;
    try {
        for (int id : meta.at("samples").get<std::vector<int>>()) {
            if (id < 0 || static_cast<std::size_t>(id) >= data.subjects.size()) throw ConfigError("atlas sample id out of range");
            samples.push_back(data.subjects[static_cast<std::size_t>(id)]);
            ddfs.push_back(read_ddf(atlas_dir / ("ddf_" + subject_stem(id) + ".ddfv")));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("atlas_samples.json: ") + e.what());
    }
    const DiversityReport rep = cohort_diversity(samples, ddfs, fraction);
    fs::create_directories(out);
    write_text(out / "diversity.csv", rep.csv());
    Manifest man(out, "diversity", "fraction=" + std::to_string(fraction), 0);
    man.add(out / "diversity.csv");
    man.write();
    std::printf("sigma2_pop %.6g, top %.6g, bottom %.6g, ratio %s\n", rep.sigma2_all, rep.sigma2_top, rep.sigma2_bottom,
                rep.ratio ? std::to_string(*rep.ratio).c_str() : "NA");
    return kExitOk;
}

int cmd_check(const std::string& suite, std::uint64_t seed, const std::string& out) {
    std::vector<CheckResult> results;
    try {
        results = run_checks(suite, seed);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    bool all = true;
    std::string csv = "suite,name,passed,detail\n";
    for (const CheckResult& r : results) {
        std::printf("[%s] %-9s %-32s %s\n", r.passed ? "PASS" : "FAIL", r.suite.c_str(), r.name.c_str(), r.detail.c_str());
        csv += r.suite + "," + r.name + "," + (r.passed ? "1" : "0") + "," + r.detail + "\n";
        all = all && r.passed;
    }
    if (!out.empty()) {
        fs::create_directories(out);
        write_text(fs::path(out) / "checks.csv", csv);
        Manifest man(out, "check", "suite=" + suite, seed);
        man.add(fs::path(out) / "checks.csv");
        man.write();
    }
    std::printf("%s\n", all ? "all checks passed" : "some checks FAILED");
    return all ? kExitOk : kExitFailure;
}

int cmd_render_slice(const fs::path& input, const fs::path& out, std::optional<int> z_opt, int channel) {
    const FileContents fc = read_file(input);
    Dims dims;
    std::span<const double> data;
    int channels = 1;
    std::visit(
        [&](const auto& obj) {
            dims = obj.dims();
            data = obj.data();
            using T = std::decay_t<decltype(obj)>;
            if constexpr (std::is_same_v<T, MaskSet>) channels = obj.classes();
            if constexpr (std::is_same_v<T, Ddf>) channels = 3;
        },
        fc.object);
    if (channel < 0 || channel >= channels) throw UsageError("--channel out of range (file has " + std::to_string(channels) + ")");
    const int z = z_opt.value_or(dims.d / 2);
    if (z < 0 || z >= dims.d) throw UsageError("--z out of range");
    const auto slice = data.subspan(static_cast<std::size_t>(channel) * dims.voxels() + static_cast<std::size_t>(z) * dims.w * dims.h,
                                    static_cast<std::size_t>(dims.w) * dims.h);
    const auto [lo, hi] = std::minmax_element(slice.begin(), slice.end());
    const double span = *hi - *lo;
    std::string pgm = "P5\n" + std::to_string(dims.w) + " " + std::to_string(dims.h) + "\n255\n";
    for (int y = 0; y < dims.h; ++y)
        for (int x = 0; x < dims.w; ++x) {
            const double v = slice[static_cast<std::size_t>(x + dims.w * y)];
            const double t = span > 0.0 ? (v - *lo) / span : 0.0;
            pgm.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
        }
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_text(out, pgm);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Semi-weakly-supervised registration toolkit", "swreg"};
    app.require_subcommand(1);
    std::optional<std::uint64_t> seed;

    std::string config, data, out, ckpt, suite = "all", atlas_dir, input;
    std::string eval_model = "student", eval_subset = "test", atlas_model = "teacher", atlas_subset = "all";
    int max_iters = 3, channel = 0;
    double tol = 1e-4, fraction = 0.2;
    std::optional<int> z;

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic phantom dataset");
    gen->add_option("--config", config, "phantom.json")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", out, "Output directory")->required();
    gen->add_option("--seed", seed, "Override the config seed");

    auto* tr = app.add_subcommand("train", "Train a registrar");
    tr->add_option("--config", config, "train.json")->required()->check(CLI::ExistingFile);
    tr->add_option("--data", data, "Dataset directory from gen-data")->required();
    tr->add_option("--out", out, "Output directory")->required();
    tr->add_option("--seed", seed, "Override the config seed");

    auto* ev = app.add_subcommand("evaluate", "Per-class Dice and HD95 on held-out pairs");
    ev->add_option("--ckpt", ckpt, "Checkpoint")->required();
    ev->add_option("--data", data, "Dataset directory")->required();
    ev->add_option("--out", out, "Output directory")->required();
    ev->add_option("--model", eval_model, "student or teacher")->check(CLI::IsMember({"student", "teacher"}))->capture_default_str();
    ev->add_option("--subset", eval_subset, "test or train")->check(CLI::IsMember({"test", "train"}))->capture_default_str();

    auto* at = app.add_subcommand("atlas", "Build an atlas and per-sample DDFs");
    at->add_option("--ckpt", ckpt, "Checkpoint")->required();
    at->add_option("--data", data, "Dataset directory")->required();
    at->add_option("--out", out, "Output directory")->required();
    at->add_option("--model", atlas_model, "teacher or student")->check(CLI::IsMember({"student", "teacher"}))->capture_default_str();
    at->add_option("--subset", atlas_subset, "all, train or test")->check(CLI::IsMember({"all", "train", "test"}))->capture_default_str();
    at->add_option("--max-iters", max_iters, "Refinement passes")->check(CLI::PositiveNumber);
    at->add_option("--tol", tol, "Stop when mean change < tol * intensity range")->check(CLI::NonNegativeNumber);

    auto* dv = app.add_subcommand("diversity", "Population diversity and gland-volume cohorts");
    dv->add_option("--atlas", atlas_dir, "Directory written by `atlas`")->required();
    dv->add_option("--data", data, "Dataset directory")->required();
    dv->add_option("--out", out, "Output directory")->required();
    dv->add_option("--fraction", fraction, "Cohort fraction")->check(CLI::Range(0.0, 0.5));

    auto* ck = app.add_subcommand("check", "Run built-in identity, oracle and gradient checks");
    ck->add_option("--suite", suite, "all, identity, oracle or gradient")
        ->check(CLI::IsMember({"all", "identity", "oracle", "gradient"}));
    ck->add_option("--seed", seed, "Seed for randomized checks");
    ck->add_option("--out", out, "Optional directory for checks.csv");

    auto* rs = app.add_subcommand("render-slice", "Write one axial slice as an 8-bit PGM");
    rs->add_option("--input", input, "DDFV file")->required();
    rs->add_option("--out", out, "Output .pgm")->required();
    rs->add_option("--z", z, "Slice index (default: middle)");
    rs->add_option("--channel", channel, "Channel for mask sets and DDFs");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(config, out, seed);
        if (tr->parsed()) return cmd_train(config, data, out, seed);
        if (ev->parsed()) return cmd_evaluate(ckpt, data, out, eval_model, eval_subset);
        if (at->parsed()) return cmd_atlas(ckpt, data, out, atlas_model, atlas_subset, max_iters, tol);
        if (dv->parsed()) return cmd_diversity(atlas_dir, data, out, fraction);
        if (ck->parsed()) return cmd_check(suite, seed.value_or(0), out);
        if (rs->parsed()) return cmd_render_slice(input, out, z, channel);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
    return kExitUsage;
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace swreg::cli
