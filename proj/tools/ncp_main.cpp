// ncp: gradient-based architecture search over the 27-dimensional
// multi-resolution coding space, plus the benchmark/baseline tooling around
// it. Every run that writes files also writes a JSON manifest next to its
// first output so results can be reproduced bit-exactly.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncp/baselines.hpp"
#include "ncp/benchio.hpp"
#include "ncp/coding.hpp"
#include "ncp/common.hpp"
#include "ncp/netmodel.hpp"
#include "ncp/predictor.hpp"
#include "ncp/propagation.hpp"

namespace {

using namespace ncp;

struct Manifest {
    std::string command;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void set(const std::string& key, const nlohmann::ordered_json& value) { config[key] = value; }

    void write(const std::vector<std::string>& argv_tail) const {
        if (outputs.empty()) return;  // stdout-only commands leave no files behind
        nlohmann::ordered_json j;
        j["tool"] = "ncp";
        j["version"] = kVersion;
        j["command"] = command;
        j["argv"] = argv_tail;
        j["config"] = config;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const std::string path = outputs.front() + ".manifest.json";
        std::ofstream os(path, std::ios::binary);
        if (!os) throw IoError("cannot write manifest: " + path);
        os << j.dump(2) << '\n';
    }
};

std::vector<std::string> g_argv;

InputGeometry parse_geometry(const std::string& text, int in_channels, int num_classes) {
    const auto x = text.find('x');
    if (x == std::string::npos)
        throw ValidationError("input size must look like HxW, got '" + text + "'");
    InputGeometry geom;
    try {
        geom.height = std::stoi(text.substr(0, x));
        geom.width = std::stoi(text.substr(x + 1));
    } catch (const std::exception&) {
        throw ValidationError("input size must look like HxW, got '" + text + "'");
    }
    geom.in_channels = in_channels;
    geom.num_classes = num_classes;
    return geom;
}

Head parse_head(const std::string& name) {
    if (name == "cls" || name == "classification") return Head::Classification;
    if (name == "seg" || name == "segmentation") return Head::Segmentation;
    throw ValidationError("unknown head '" + name + "', expected cls or seg");
}

ArchCode parse_init(const std::string& text) {
    if (text == "default") return default_init_code();
    return code_from_raw_ints(parse_raw_code(text));
}

void write_text(const std::string& path, const std::string& text, Manifest& manifest) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << text;
    if (!os) throw IoError("failed writing: " + path);
    manifest.outputs.push_back(path);
}

void print_search_outcome(const ArchCode& code, const Predictor& predictor,
                          const PropagationTrace& trace) {
    std::cout << "code: " << format_raw_code(round_code(code)) << "\n";
    std::cout << "stop: " << to_string(trace.stop_reason) << " after " << trace.rows.size()
              << " iterations\n";
    for (const auto& [name, value] : predictor.predict(code).items)
        std::cout << "predicted " << name << ": " << value << "\n";
}

void save_trace(const PropagationTrace& trace, const std::string& path, Manifest& manifest) {
    std::ostringstream os;
    trace.write_csv(os);
    write_text(path, os.str(), manifest);
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
    CLI::App app{"network coding propagation toolkit"};
    app.require_subcommand(1);

    // Shared knobs, bound per subcommand below.
    std::uint64_t seed = 1;
    std::string input_size = "128x128";
    std::string head_name = "seg";
    int in_channels = 3;
    int num_classes = 19;

    auto add_geometry = [&](CLI::App* cmd) {
        cmd->add_option("--input", input_size, "input size HxW (default 128x128)");
        cmd->add_option("--head", head_name, "head: seg or cls (default seg)");
        cmd->add_option("--in-channels", in_channels, "input channels (default 3)");
        cmd->add_option("--classes", num_classes, "number of classes (default 19)");
    };
    auto geometry = [&] { return parse_geometry(input_size, in_channels, num_classes); };

    // bench gen ------------------------------------------------------------
    auto* bench = app.add_subcommand("bench", "synthetic benchmark files");
    bench->require_subcommand(1);
    auto* bench_gen = bench->add_subcommand("gen", "sample codes and score them with a synthetic task");
    std::string bg_task_path, bg_out = "bench.jsonl", bg_task_name = "synthetic";
    int bg_n = 2500;
    bench_gen->add_option("--task", bg_task_path, "task JSON (omit to derive one from --seed)");
    bench_gen->add_option("--task-name", bg_task_name, "name for a derived task");
    bench_gen->add_option("--n", bg_n, "number of records (default 2500)");
    bench_gen->add_option("--seed", seed, "random seed");
    bench_gen->add_option("--out", bg_out, "output JSONL path")->required();
    std::string bg_task_out;
    bench_gen->add_option("--task-out", bg_task_out, "also write the task JSON here");
    add_geometry(bench_gen);

    // bench stats ------------------------------------------------------------
    auto* bench_stats = bench->add_subcommand("stats", "per-metric summary of a benchmark file");
    std::string bs_in;
    bench_stats->add_option("--bench", bs_in, "benchmark JSONL")->required();

    // predictor train --------------------------------------------------------
    auto* predictor_cmd = app.add_subcommand("predictor", "neural predictor");
    predictor_cmd->require_subcommand(1);
    auto* pt = predictor_cmd->add_subcommand("train", "fit a predictor to benchmark records");
    std::string pt_bench, pt_out = "predictor.json";
    TrainConfig pt_cfg;
    pt->add_option("--bench", pt_bench, "benchmark JSONL")->required();
    pt->add_option("--out", pt_out, "output predictor path");
    pt->add_option("--epochs", pt_cfg.epochs, "training epochs (default 200)");
    pt->add_option("--batch", pt_cfg.batch_size, "batch size (default 128)");
    pt->add_option("--lr", pt_cfg.learning_rate, "peak learning rate (default 0.01)");
    pt->add_option("--dropout", pt_cfg.dropout, "dropout rate (default 0.5)");
    pt->add_option("--seed", pt_cfg.seed, "random seed");
    int pt_dims = kCodeDims;
    pt->add_option("--dims", pt_dims, "code length in the records (default 27; one-hot spaces differ)");

    // search ... ---------------------------------------------------------------
    auto* search = app.add_subcommand("search", "propagate a code against trained predictors");
    search->require_subcommand(1);
    PropagationConfig prop_cfg;
    std::string sc_predictor, sc_init = "default", sc_trace, sc_profile;
    auto add_prop_options = [&](CLI::App* cmd, bool multi = false) {
        if (!multi) cmd->add_option("--predictor", sc_predictor, "trained predictor file")->required();
        cmd->add_option("--lambda", prop_cfg.lambda, "FLOPs weight (default 0.5)");
        cmd->add_option("--profile", sc_profile, "preset lambda: S (0.7), M (0.3) or L (0.1)");
        cmd->add_option("--eta", prop_cfg.eta, "step size (default 3)");
        cmd->add_option("--iters", prop_cfg.max_iters, "max iterations (default 70)");
        cmd->add_option("--init", sc_init, "initial code: 'default' or 27 comma-separated ints");
        cmd->add_option("--acc-metric", prop_cfg.acc_metric, "accuracy-like metric name (default acc)");
        cmd->add_option("--flops-metric", prop_cfg.flops_metric, "FLOPs metric name (default flops)");
        cmd->add_option("--trace", sc_trace, "write the per-iteration trace CSV here");
    };
    auto* s_cont = search->add_subcommand("continuous", "full-gradient propagation");
    add_prop_options(s_cont);
    auto* s_wta = search->add_subcommand("wta", "winner-takes-all propagation");
    add_prop_options(s_wta);
    add_geometry(s_wta);
    auto* s_multi = search->add_subcommand("multi", "joint propagation across predictors");
    std::string sm_predictors, sm_weights;
    s_multi->add_option("--predictors", sm_predictors, "comma-separated predictor files")->required();
    s_multi->add_option("--weights", sm_weights, "comma-separated task weights (default all 1)");
    add_prop_options(s_multi, true);
    auto* s_onehot = search->add_subcommand("onehot", "relaxed one-hot propagation with argmax projection");
    std::string oh_groups = "6x5", oh_init;
    s_onehot->add_option("--groups", oh_groups, "grouping GxO, e.g. 6x5 (default)");
    s_onehot->add_option("--init-onehot", oh_init, "comma-separated 0/1 initial code");
    s_onehot->add_option("--project-every", prop_cfg.onehot_project_every,
                         "iterations between argmax projections (default 10)");
    add_prop_options(s_onehot);

    // transfer ----------------------------------------------------------------
    auto* transfer_cmd = app.add_subcommand("transfer", "warm-start search from another task's optimum");
    std::string tr_from;
    transfer_cmd->add_option("--from-code", tr_from, "source optimum, 27 comma-separated ints")->required();
    add_prop_options(transfer_cmd);

    // baseline ... --------------------------------------------------------------
    auto* baseline = app.add_subcommand("baseline", "reference search strategies");
    baseline->require_subcommand(1);
    ObjectiveConfig obj_cfg;
    std::string bl_predictor, bl_out;
    auto add_baseline_common = [&](CLI::App* cmd) {
        cmd->add_option("--predictor", bl_predictor, "trained predictor file")->required();
        cmd->add_option("--lambda", obj_cfg.lambda, "FLOPs penalty in the objective (default 0)");
        cmd->add_option("--acc-metric", obj_cfg.acc_metric, "accuracy-like metric name");
        cmd->add_option("--flops-metric", obj_cfg.flops_metric, "FLOPs metric name");
        cmd->add_option("--out", bl_out, "write the ranked results CSV here");
        cmd->add_option("--seed", seed, "random seed");
    };
    auto* bl_random = baseline->add_subcommand("random", "uniformly sample and rank");
    int bl_budget = 100, bl_k = 10;
    bl_random->add_option("--budget", bl_budget, "number of samples (default 100)");
    bl_random->add_option("--keep", bl_k, "result count (default 10)");
    add_baseline_common(bl_random);
    auto* bl_topk = baseline->add_subcommand("topk", "rank predictor scores of random samples");
    bl_topk->add_option("--budget", bl_budget, "number of samples (default 100)");
    bl_topk->add_option("--k", bl_k, "top-k to keep (default 10)");
    add_baseline_common(bl_topk);
    auto* bl_netadapt = baseline->add_subcommand("netadapt", "greedy one-notch adaptation");
    std::string na_init = "default";
    int na_rounds = 70;
    bl_netadapt->add_option("--init", na_init, "initial code");
    bl_netadapt->add_option("--rounds", na_rounds, "max rounds (default 70)");
    add_baseline_common(bl_netadapt);
    add_geometry(bl_netadapt);

    // flops ---------------------------------------------------------------------
    auto* flops_cmd = app.add_subcommand("flops", "FLOPs and parameters of a code");
    std::string fl_code, fl_csv;
    flops_cmd->add_option("--code", fl_code, "27 comma-separated ints")->required();
    flops_cmd->add_option("--csv", fl_csv, "write the per-layer report CSV here");
    add_geometry(flops_cmd);

    // corr ----------------------------------------------------------------------
    auto* corr_cmd = app.add_subcommand("corr", "cross-task Spearman matrix");
    std::vector<std::string> corr_files;
    std::string corr_metric = "acc", corr_out;
    corr_cmd->add_option("--bench", corr_files, "benchmark JSONL files (repeatable)")->required();
    corr_cmd->add_option("--metric", corr_metric, "shared metric (default acc)");
    corr_cmd->add_option("--out", corr_out, "write the matrix CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, std::cout, std::cerr);
        return rc == 0 ? 0 : 1;  // usage problems exit 1, --help exits 0
    }

    Manifest manifest;

    if (*bench_gen) {
        manifest.command = "bench gen";
        SyntheticTask task = bg_task_path.empty() ? make_synthetic_task(bg_task_name, seed)
                                                  : load_task(bg_task_path);
        if (!bg_task_path.empty()) manifest.inputs.push_back(bg_task_path);
        FlopsTable table(parse_head(head_name), geometry());
        const auto records = gen_benchmark(task, bg_n, seed, table);
        save_records(records, bg_out);
        manifest.outputs.push_back(bg_out);
        if (!bg_task_out.empty()) {
            save_task(task, bg_task_out);
            manifest.outputs.push_back(bg_task_out);
        }
        manifest.set("task_name", task.name);
        manifest.set("n", bg_n);
        manifest.set("seed", seed);
        manifest.set("input", input_size);
        manifest.set("head", head_name);
        std::cout << "wrote " << records.size() << " records to " << bg_out << "\n";
    } else if (*bench_stats) {
        const auto records = load_records(bs_in);
        if (records.empty()) throw ValidationError("no records in " + bs_in);
        std::cout << "records: " << records.size() << "\n";
        for (const auto& [name, first] : records.front().metrics.items) {
            double mean = 0.0, lo = first, hi = first;
            for (const BenchRecord& r : records) {
                const double v = r.metrics.at(name);
                mean += v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            mean /= static_cast<double>(records.size());
            double var = 0.0;
            for (const BenchRecord& r : records) {
                const double d = r.metrics.at(name) - mean;
                var += d * d;
            }
            std::printf("%-12s mean %.4f  std %.4f  min %.4f  max %.4f\n", name.c_str(), mean,
                        std::sqrt(var / static_cast<double>(records.size())), lo, hi);
        }
        const std::size_t split = train_split(records.size());
        std::cout << "train/val split: " << split << "/" << records.size() - split << "\n";
    } else if (*pt) {
        manifest.command = "predictor train";
        manifest.inputs.push_back(pt_bench);
        const auto records = load_records(pt_bench, pt_dims);
        auto [predictor, report] = train(records_to_samples(records), pt_cfg);
        predictor.save(pt_out);
        manifest.outputs.push_back(pt_out);
        manifest.set("epochs", pt_cfg.epochs);
        manifest.set("batch", pt_cfg.batch_size);
        manifest.set("lr", pt_cfg.learning_rate);
        manifest.set("dropout", pt_cfg.dropout);
        manifest.set("seed", pt_cfg.seed);
        std::cout << "trained on " << report.train_count << " records, validated on "
                  << report.val_count << "\n";
        for (const MetricReport& m : report.metrics)
            std::printf("%-12s val L1 %.4f  (target std %.4f, mean %.4f)\n", m.name.c_str(), m.val_mae,
                        m.target_std, m.target_mean);
        std::cout << "saved " << pt_out << "\n";
    } else if (*s_cont || *s_wta || *transfer_cmd) {
        const bool is_wta = s_wta->parsed();
        manifest.command = is_wta ? "search wta" : (transfer_cmd->parsed() ? "transfer" : "search continuous");
        if (!sc_profile.empty()) prop_cfg.lambda = lambda_profile(sc_profile);
        prop_cfg.strategy = is_wta ? Strategy::WinnerTakesAll : Strategy::Continuous;
        manifest.inputs.push_back(sc_predictor);
        const Predictor predictor = Predictor::load(sc_predictor);
        const ArchCode init = transfer_cmd->parsed() ? code_from_raw_ints(parse_raw_code(tr_from))
                                                     : parse_init(sc_init);
        std::pair<ArchCode, PropagationTrace> outcome =
            is_wta ? propagate_wta(predictor, init, prop_cfg,
                                   FlopsTable(parse_head(head_name), geometry()))
                   : propagate_continuous(predictor, init, prop_cfg);
        print_search_outcome(outcome.first, predictor, outcome.second);
        if (!sc_trace.empty()) save_trace(outcome.second, sc_trace, manifest);
        manifest.set("lambda", prop_cfg.lambda);
        manifest.set("eta", prop_cfg.eta);
        manifest.set("iters", prop_cfg.max_iters);
        manifest.set("init", transfer_cmd->parsed() ? tr_from : sc_init);
        manifest.set("result", format_raw_code(round_code(outcome.first)));
    } else if (*s_multi) {
        manifest.command = "search multi";
        if (!sc_profile.empty()) prop_cfg.lambda = lambda_profile(sc_profile);
        std::vector<Predictor> predictors;
        std::stringstream paths(sm_predictors);
        std::string path;
        while (std::getline(paths, path, ',')) {
            manifest.inputs.push_back(path);
            predictors.push_back(Predictor::load(path));
        }
        std::vector<const Predictor*> refs;
        refs.reserve(predictors.size());
        for (const Predictor& p : predictors) refs.push_back(&p);
        std::vector<double> weights;
        if (!sm_weights.empty()) {
            std::stringstream ws(sm_weights);
            std::string w;
            while (std::getline(ws, w, ',')) weights.push_back(std::stod(w));
        }
        auto [code, trace] = propagate_multitask(refs, parse_init(sc_init), prop_cfg, weights);
        std::cout << "code: " << format_raw_code(round_code(code)) << "\n";
        std::cout << "stop: " << to_string(trace.stop_reason) << " after " << trace.rows.size()
                  << " iterations\n";
        for (std::size_t t = 0; t < predictors.size(); ++t)
            for (const auto& [name, value] : predictors[t].predict(code).items)
                std::cout << "predicted p" << t << "." << name << ": " << value << "\n";
        if (!sc_trace.empty()) save_trace(trace, sc_trace, manifest);
        manifest.set("lambda", prop_cfg.lambda);
        manifest.set("weights", sm_weights.empty() ? "1,..." : sm_weights);
        manifest.set("result", format_raw_code(round_code(code)));
    } else if (*s_onehot) {
        manifest.command = "search onehot";
        if (!sc_profile.empty()) prop_cfg.lambda = lambda_profile(sc_profile);
        manifest.inputs.push_back(sc_predictor);
        const Predictor predictor = Predictor::load(sc_predictor);
        const auto x = oh_groups.find('x');
        if (x == std::string::npos) throw ValidationError("--groups must look like GxO, e.g. 6x5");
        const int n_groups = std::stoi(oh_groups.substr(0, x));
        const int options = std::stoi(oh_groups.substr(x + 1));
        if (n_groups < 1 || options < 1) throw ValidationError("--groups must be positive");
        std::vector<int> groups(static_cast<std::size_t>(n_groups), options);
        std::vector<double> init;
        if (oh_init.empty()) {
            init.assign(static_cast<std::size_t>(n_groups) * static_cast<std::size_t>(options), 0.0);
            for (int g = 0; g < n_groups; ++g)
                init[static_cast<std::size_t>(g) * static_cast<std::size_t>(options)] = 1.0;
        } else {
            std::stringstream vs(oh_init);
            std::string v;
            while (std::getline(vs, v, ',')) init.push_back(std::stod(v));
        }
        auto [code, trace] = propagate_onehot(predictor, init, groups, prop_cfg);
        std::cout << "onehot:";
        for (double v : code) std::cout << ' ' << v;
        std::cout << "\nstop: " << to_string(trace.stop_reason) << " after " << trace.rows.size()
                  << " iterations\n";
        if (!sc_trace.empty()) save_trace(trace, sc_trace, manifest);
        manifest.set("groups", oh_groups);
        manifest.set("lambda", prop_cfg.lambda);
    } else if (*bl_random || *bl_topk || *bl_netadapt) {
        manifest.inputs.push_back(bl_predictor);
        const Predictor predictor = Predictor::load(bl_predictor);
        SearchResult result;
        if (bl_random->parsed()) {
            manifest.command = "baseline random";
            result = random_search(bl_budget, predictor_scorer(predictor), seed, obj_cfg, bl_k);
        } else if (bl_topk->parsed()) {
            manifest.command = "baseline topk";
            result = predictor_topk(bl_budget, bl_k, predictor, seed, obj_cfg);
        } else {
            manifest.command = "baseline netadapt";
            FlopsTable table(parse_head(head_name), geometry());
            result = netadapt_greedy(parse_init(na_init), predictor, table, na_rounds, obj_cfg);
        }
        std::printf("evaluations: %lld, wall time %.3fs\n",
                    static_cast<long long>(result.evaluations_used), result.wall_time_s);
        for (std::size_t r = 0; r < result.ranked.size() && r < 10; ++r)
            std::cout << (r + 1) << ". " << format_raw_code(round_code(result.ranked[r].code))
                      << "  objective " << result.ranked[r].objective << "\n";
        if (!bl_out.empty()) {
            std::ostringstream os;
            result.write_csv(os);
            write_text(bl_out, os.str(), manifest);
        }
        manifest.set("budget", bl_budget);
        manifest.set("seed", seed);
        manifest.set("lambda", obj_cfg.lambda);
    } else if (*flops_cmd) {
        const NetworkSpec spec = decode(code_from_raw_ints(parse_raw_code(fl_code)),
                                        parse_head(head_name), geometry());
        const CostReport report = cost(spec);
        std::printf("flops: %.6f GFLOPs (multiply-accumulates)\n", report.gflops());
        std::printf("params: %.6f M\n", report.params_m());
        if (!fl_csv.empty()) {
            manifest.command = "flops";
            std::ostringstream os;
            write_per_layer_csv(report, os);
            write_text(fl_csv, os.str(), manifest);
            manifest.set("code", fl_code);
            manifest.set("input", input_size);
            manifest.set("head", head_name);
        }
    } else if (*corr_cmd) {
        manifest.command = "corr";
        std::vector<std::pair<std::string, std::vector<BenchRecord>>> benchmarks;
        for (const std::string& file : corr_files) {
            manifest.inputs.push_back(file);
            auto records = load_records(file);
            std::string name = records.empty() ? file : records.front().task;
            benchmarks.emplace_back(std::move(name), std::move(records));
        }
        const CorrMatrix matrix = cross_task_matrix(benchmarks, corr_metric);
        std::ostringstream os;
        matrix.write_csv(os);
        std::cout << os.str();
        if (!corr_out.empty()) write_text(corr_out, os.str(), manifest);
        manifest.set("metric", corr_metric);
    }

    manifest.write(g_argv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    for (int i = 0; i < argc; ++i) g_argv.emplace_back(argv[i]);
    try {
        return run(argc, argv);
    } catch (const ncp::IoError& e) {
        std::cerr << "ncp: " << e.what() << "\n";
        return 2;
    } catch (const ncp::ValidationError& e) {
        std::cerr << "ncp: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ncp: " << e.what() << "\n";
        return 1;
    }
}
