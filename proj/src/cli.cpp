#include "hetss/cli.hpp"

#include "hetss/bench.hpp"
#include "hetss/checkpoint.hpp"
#include "hetss/error.hpp"
#include "hetss/experiments.hpp"
#include "hetss/graph.hpp"
#include "hetss/metrics.hpp"
#include "hetss/model.hpp"
#include "hetss/patterns.hpp"
#include "hetss/synth.hpp"
#include "hetss/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace hetss::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

// Config file path plus one optional flag per config key.
struct ConfigFlags {
    std::string file;
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;

    void attach(CLI::App* app) {
        app->add_option("--config", file, "key = value config file");
        for (const std::string& key : config_keys()) {
            options.emplace_back(key, app->add_option("--" + dashed(key), values[key], "override " + key));
        }
    }

    TrainConfig resolve() const {
        std::map<std::string, std::string> set;
        for (const auto& [key, opt] : options) {
            if (opt->count() > 0) {
                set[key] = values.at(key);
            }
        }
        return resolve_config(file.empty() ? std::nullopt : std::optional<fs::path>(file), set);
    }
};

ModelParams load_or_init(const std::string& checkpoint, const TrainConfig& cfg) {
    return checkpoint.empty() ? init_params(cfg) : read_checkpoint(checkpoint);
}

void print_config(std::ostream& out, const TrainConfig& cfg) {
    out << "config: lr0=" << fmt("%g", cfg.lr0) << " adam=(" << fmt("%g", cfg.adam_beta1) << ","
        << fmt("%g", cfg.adam_beta2) << ") decay=" << fmt("%g", cfg.decay) << "/" << cfg.decay_every
        << " iters=" << cfg.iters << " batch=" << cfg.batch << " gamma=" << fmt("%g", cfg.gamma)
        << " tau=" << fmt("%g", cfg.tau) << " k=" << cfg.k << " dim=" << cfg.dim << " layers=" << cfg.layers
        << " patch=" << cfg.patch << " stride=" << cfg.stride << " seed=" << cfg.seed
        << " ablate=" << to_string(cfg.ablate) << "\n";
}

void write_log_file(const fs::path& path, const std::vector<TrainLogRow>& log) {
    std::ofstream f(path);
    if (!f) {
        throw ValidationError("cannot write " + path.string());
    }
    write_train_log(f, log);
}

int cmd_synth(std::uint64_t seed, int count, int size, const fs::path& out_dir, std::ostream& out) {
    if (count < 1 || size < 8 || size % 4 != 0) {
        throw ValidationError("synth needs count >= 1 and a size that is a multiple of 4 and at least 8");
    }
    for (int i = 0; i < count; ++i) {
        write_scene(out_dir / ("scene_" + std::to_string(i)), synth_scene(seed + static_cast<std::uint64_t>(i), size));
    }
    out << "wrote " << count << " scene(s) to " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_train(const ConfigFlags& flags, const std::string& data, const fs::path& out_dir, const std::string& init,
              std::ostream& out, std::ostream& err) {
    const TrainConfig cfg = flags.resolve();
    std::vector<ScenePair> dataset;
    for (NamedScene& s : load_dataset(data)) {
        if (!s.scene.gt) {
            throw ValidationError("training scene " + s.name + " has no gt.hsif");
        }
        dataset.push_back(std::move(s.scene));
    }
    std::optional<ModelParams> start;
    if (!init.empty()) {
        start = read_checkpoint(init);
    }
    print_config(out, cfg);
    fs::create_directories(out_dir);

    TrainCallbacks cb;
    cb.on_iter = [&](const TrainLogRow& r) {
        if (r.iter % 10 == 0 || r.iter + 1 == cfg.iters) {
            out << "iter " << r.iter << " l1=" << fmt("%.6f", r.loss.l1) << " lcl=" << fmt("%.6f", r.loss.lcl)
                << " total=" << fmt("%.6f", r.loss.total) << " lr=" << fmt("%.6g", r.loss.lr_used) << "\n";
        }
    };
    cb.on_checkpoint = [&](int iter, const ModelParams& p) {
        if (iter == cfg.iters) {
            write_checkpoint(out_dir / "final.hssn", p);
        } else {
            write_checkpoint(out_dir / ("ckpt_" + std::to_string(iter) + ".hssn"), p);
        }
    };
    try {
        const TrainResult res = train(dataset, cfg, cb, start);
        write_log_file(out_dir / "train_log.csv", res.log);
    } catch (const TrainingDiverged& e) {
        write_checkpoint(out_dir / "last_good.hssn", e.last_good());
        write_log_file(out_dir / "train_log.csv", e.log());
        err << "training diverged at iter " << e.iter() << ": " << e.what() << "\n";
        return kExitFailure;
    }
    out << "wrote " << (out_dir / "final.hssn").string() << "\n";
    return kExitOk;
}

int cmd_eval(const ConfigFlags& flags, const std::string& data, const std::string& mode, const std::string& checkpoint,
             const std::string& fused_dir, const std::string& csv_path, std::ostream& out) {
    if (mode != "reduced" && mode != "full") {
        throw ValidationError("mode must be reduced or full");
    }
    const bool reduced = mode == "reduced";
    const TrainConfig cfg = flags.resolve();
    const std::vector<NamedScene> scenes = load_dataset(data);
    std::optional<ModelParams> params;
    if (fused_dir.empty()) {
        params = load_or_init(checkpoint, cfg);
    }

    std::ostringstream csv;
    csv << (reduced ? "scene,psnr,ssim,sam,ergas,scc\n" : "scene,d_lambda,d_s,qnr\n");
    std::vector<double> sums(reduced ? 5 : 3, 0.0);
    for (const NamedScene& s : scenes) {
        if (reduced && !s.scene.gt) {
            throw ValidationError("reduced-resolution eval needs gt.hsif in scene " + s.name);
        }
        const Image fused = params ? forward(s.scene, *params, cfg).fused : read_hsif(fs::path(fused_dir) / s.name / "fused.hsif");
        std::vector<double> v;
        if (reduced) {
            const MetricReport m = full_reference(fused, *s.scene.gt, s.scene.scale);
            v = {m.psnr, m.ssim, m.sam, m.ergas, m.scc};
        } else {
            const NoRefReport m = no_reference(fused, s.scene.pan, s.scene.lrms, s.scene.scale);
            v = {m.d_lambda, m.d_s, m.qnr};
        }
        csv << s.name;
        for (std::size_t i = 0; i < v.size(); ++i) {
            csv << "," << fmt("%.10g", v[i]);
            sums[i] += v[i];
        }
        csv << "\n";
    }
    csv << "mean";
    for (double s : sums) {
        csv << "," << fmt("%.10g", s / static_cast<double>(scenes.size()));
    }
    csv << "\n";

    if (csv_path.empty()) {
        out << csv.str();
    } else {
        std::ofstream f(csv_path);
        if (!f) {
            throw ValidationError("cannot write " + csv_path);
        }
        f << csv.str();
        out << "wrote " << csv_path << "\n";
    }
    return kExitOk;
}

int cmd_infer(const ConfigFlags& flags, const std::string& scene_dir, const std::string& checkpoint,
              const fs::path& out_dir, std::ostream& out) {
    const TrainConfig cfg = flags.resolve();
    const ScenePair scene = read_scene(scene_dir);
    const Image fused = forward(scene, load_or_init(checkpoint, cfg), cfg).fused;
    fs::create_directories(out_dir);
    write_hsif(out_dir / "fused.hsif", fused);
    write_ppm(out_dir / "fused.ppm", fused, 2, 1, 0);
    out << "wrote " << (out_dir / "fused.hsif").string() << " and " << (out_dir / "fused.ppm").string() << "\n";
    if (scene.gt) {
        out << "psnr " << fmt("%.4f", psnr(fused, *scene.gt)) << "\n";
    }
    return kExitOk;
}

int cmd_patterns_dump(const ConfigFlags& flags, bool toy, const std::string& scene_dir,
                      const std::string& checkpoint, bool edges, std::ostream& out) {
    TrainConfig cfg = flags.resolve();
    ScenePair scene;
    if (toy) {
        cfg.patch = 4;
        cfg.stride = 4;
        cfg.dim = 8;
        cfg.k = 1;
        scene = toy_scene(cfg.seed);
    } else if (!scene_dir.empty()) {
        scene = read_scene(scene_dir);
    } else {
        throw ValidationError("patterns-dump needs --toy or --scene");
    }
    const ForwardResult fr = forward(scene, load_or_init(checkpoint, cfg), cfg);
    if (edges) {
        dump_edges(out, fr.graph);
    }
    dump_patterns(out, fr.patterns);
    return kExitOk;
}

int cmd_grad_check(std::uint64_t seed, double eps, double tol, std::optional<double> gamma, bool sweep,
                   std::ostream& out) {
    GradCheckSetup s = make_grad_check_setup(seed);
    if (gamma) {
        s.params.gamma = *gamma;
    }
    const std::vector<GradCheckRow> rows = grad_check(s.scene, s.params, s.cfg, eps);
    out << "group,coords,max_rel,max_abs,status\n";
    bool ok = true;
    for (const GradCheckRow& r : rows) {
        const bool pass = r.max_rel <= tol;
        ok = ok && pass;
        out << r.group << "," << r.coords << "," << fmt("%.3e", r.max_rel) << "," << fmt("%.3e", r.max_abs) << ","
            << (pass ? "PASS" : "FAIL") << "\n";
    }
    if (sweep) {
        out << "eps,max_rel\n";
        for (double e : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7}) {
            double worst = 0.0;
            for (const GradCheckRow& r : grad_check(s.scene, s.params, s.cfg, e)) {
                worst = std::max(worst, r.max_rel);
            }
            out << fmt("%g", e) << "," << fmt("%.3e", worst) << "\n";
        }
    }
    return ok ? kExitOk : kExitFailure;
}

int cmd_analyze_priors(const std::string& data, int synth_count, int size, std::uint64_t seed, int bins,
                       std::ostream& out) {
    std::vector<NamedScene> scenes;
    if (!data.empty()) {
        scenes = load_dataset(data);
    } else {
        for (int i = 0; i < synth_count; ++i) {
            scenes.push_back({"synth_" + std::to_string(i), synth_scene(seed + static_cast<std::uint64_t>(i), size)});
        }
    }
    out << "scene,kind,first,second,emd,coefficient\n";
    double pan_gt = 0.0;
    double lrms_gt = 0.0;
    for (const NamedScene& s : scenes) {
        if (!s.scene.gt) {
            throw ValidationError("prior analysis needs gt.hsif in scene " + s.name);
        }
        const PriorReport rep = prior_analysis(s.scene, bins);
        for (const PriorRow& r : rep.rows) {
            out << s.name << "," << r.kind << "," << r.first << "," << r.second << "," << fmt("%.6f", r.emd) << ","
                << fmt("%.6f", r.coefficient) << "\n";
        }
        pan_gt += rep.mean_pan_gt;
        lrms_gt += rep.mean_lrms_gt;
    }
    const double n = static_cast<double>(scenes.size());
    out << "mean,pan-gt,,,," << fmt("%.6f", pan_gt / n) << "\n";
    out << "mean,lrms-gt,,,," << fmt("%.6f", lrms_gt / n) << "\n";
    return kExitOk;
}

int cmd_bench(const std::vector<int>& sizes, int dim, int k, std::uint64_t seed, double min_ms, double max_exp,
              std::ostream& out) {
    const BenchReport rep = run_bench(sizes, dim, k, seed, min_ms);
    out << "nodes,pattern_ms,local_ms,global_ms\n";
    for (const BenchRow& r : rep.rows) {
        out << r.nodes << "," << fmt("%.4f", r.pattern_ms) << "," << fmt("%.4f", r.local_ms) << ","
            << fmt("%.4f", r.global_ms) << "\n";
    }
    out << "exponent," << fmt("%.3f", rep.pattern_exponent) << "," << fmt("%.3f", rep.local_exponent) << ","
        << fmt("%.3f", rep.global_exponent) << "\n";
    return rep.pattern_exponent <= max_exp && rep.global_exponent <= max_exp ? kExitOk : kExitFailure;
}

} // namespace

TrainConfig resolve_config(const std::optional<fs::path>& file, const std::map<std::string, std::string>& flags) {
    TrainConfig cfg;
    if (file) {
        for (const auto& [key, value] : read_config_file(*file)) {
            apply_setting(cfg, key, value);
        }
    }
    for (const auto& [key, value] : flags) {
        apply_setting(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

std::vector<NamedScene> load_dataset(const fs::path& dir, int scale) {
    if (!fs::is_directory(dir)) {
        throw ValidationError("dataset directory not found: " + dir.string());
    }
    std::vector<NamedScene> out;
    if (fs::exists(dir / "pan.hsif")) {
        out.push_back({fs::absolute(dir).lexically_normal().filename().string(), read_scene(dir, scale)});
        if (out.back().name.empty()) {
            out.back().name = "scene";
        }
        return out;
    }
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "pan.hsif")) {
            subdirs.push_back(entry.path());
        }
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const fs::path& p : subdirs) {
        out.push_back({p.filename().string(), read_scene(p, scale)});
    }
    if (out.empty()) {
        throw ValidationError("no scenes (pan.hsif) under " + dir.string());
    }
    return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"HetSSNet pansharpening toolkit", "hetss"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int count = 1;
    int size = 64;
    std::string out_dir;
    auto* synth = app.add_subcommand("synth", "write synthetic scenes");
    synth->add_option("--seed", seed);
    synth->add_option("--count", count);
    synth->add_option("--size", size);
    synth->add_option("--out", out_dir)->required();

    std::string data;
    std::string init;
    std::string checkpoint;
    ConfigFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "train on a dataset directory");
    train_cmd->add_option("--data", data)->required();
    train_cmd->add_option("--out", out_dir, "output directory")->default_val("run");
    train_cmd->add_option("--init", init, "starting checkpoint");
    train_flags.attach(train_cmd);

    std::string mode = "reduced";
    std::string fused_dir;
    std::string csv_path;
    ConfigFlags eval_flags;
    auto* eval = app.add_subcommand("eval", "metric CSV for a dataset");
    eval->add_option("--data", data)->required();
    eval->add_option("--mode", mode, "reduced or full")->check(CLI::IsMember({"reduced", "full"}));
    eval->add_option("--checkpoint", checkpoint, "parameters (fresh init when omitted)");
    eval->add_option("--fused", fused_dir, "score <dir>/<scene>/fused.hsif instead of running the model");
    eval->add_option("--csv", csv_path, "write CSV here instead of stdout");
    eval_flags.attach(eval);

    std::string scene_dir;
    ConfigFlags infer_flags;
    auto* infer = app.add_subcommand("infer", "fuse one scene");
    infer->add_option("--scene", scene_dir)->required();
    infer->add_option("--checkpoint", checkpoint);
    infer->add_option("--out", out_dir)->required();
    infer_flags.attach(infer);

    bool toy = false;
    bool edges = false;
    ConfigFlags dump_flags;
    auto* dump = app.add_subcommand("patterns-dump", "print relationship patterns of a scene graph");
    dump->add_flag("--toy", toy, "two-patch toy scene with k = 1");
    dump->add_option("--scene", scene_dir);
    dump->add_option("--checkpoint", checkpoint);
    dump->add_flag("--edges", edges, "also print the edge list");
    dump_flags.attach(dump);

    double eps = 1e-4;
    double tol = 1e-4;
    std::optional<double> gamma;
    bool sweep = false;
    auto* gc = app.add_subcommand("grad-check", "finite-difference check of every parameter group");
    gc->add_option("--seed", seed);
    gc->add_option("--eps", eps);
    gc->add_option("--tol", tol);
    gc->add_option("--gamma", gamma);
    gc->add_flag("--sweep", sweep, "also report the worst error across step sizes");

    int bins = 64;
    int synth_count = 10;
    auto* priors = app.add_subcommand("analyze-priors", "histogram correlation table");
    priors->add_option("--data", data);
    priors->add_option("--synth", synth_count, "synthetic scene count when --data is absent");
    priors->add_option("--size", size);
    priors->add_option("--seed", seed);
    priors->add_option("--bins", bins);

    std::vector<int> sizes{100, 200, 400, 800};
    int dim = 64;
    int k = 8;
    double min_ms = 100.0;
    double max_exp = 2.3;
    auto* bench = app.add_subcommand("bench", "runtime scaling of pattern generation and aggregation");
    bench->add_option("--sizes", sizes)->delimiter(',');
    bench->add_option("--dim", dim);
    bench->add_option("--k", k);
    bench->add_option("--seed", seed);
    bench->add_option("--min-ms", min_ms, "minimum total timing per measurement");
    bench->add_option("--max-exponent", max_exp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*synth) {
            return cmd_synth(seed, count, size, out_dir, out);
        }
        if (*train_cmd) {
            return cmd_train(train_flags, data, out_dir, init, out, err);
        }
        if (*eval) {
            return cmd_eval(eval_flags, data, mode, checkpoint, fused_dir, csv_path, out);
        }
        if (*infer) {
            return cmd_infer(infer_flags, scene_dir, checkpoint, out_dir, out);
        }
        if (*dump) {
            return cmd_patterns_dump(dump_flags, toy, scene_dir, checkpoint, edges, out);
        }
        if (*gc) {
            return cmd_grad_check(seed, eps, tol, gamma, sweep, out);
        }
        if (*priors) {
            return cmd_analyze_priors(data, synth_count, size, seed, bins, out);
        }
        if (*bench) {
            return cmd_bench(sizes, dim, k, seed, min_ms, max_exp, out);
        }
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}

} // namespace hetss::cli
