// Command-line surface for the toolkit: hyperparameter tuning, network
// evaluation, sensitivity scans, benchmark export and activity dumps.

#include "esn/benchmarks.hpp"
#include "esn/harness.hpp"
#include "esn/reservoir.hpp"
#include "esn/search_space.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_runtime = 2;

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_json_file(const std::string& path)
{
    std::ifstream in{path};
    if (!in) throw usage_error{"cannot open file `" + path + "`"};
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw usage_error{"failed to parse `" + path + "`: " + e.what()};
    }
    return doc;
}

esn::experiment_config load_config(const std::string& path, std::optional<std::uint64_t> seed,
                                   std::optional<int> jobs)
{
    json doc = load_json_file(path);
    esn::experiment_config cfg;
    try {
        cfg = esn::experiment_config::from_json(doc);
    } catch (const std::exception& e) {
        throw usage_error{"invalid config `" + path + "`: " + e.what()};
    }
    if (seed) cfg.master_seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    return cfg;
}

std::ofstream open_output(const fs::path& path)
{
    std::ofstream out{path};
    if (!out) throw std::runtime_error{"cannot write `" + path.string() + "`"};
    return out;
}

/// Either a writable file or stdout when no path was given.
struct sink {
    std::ofstream file;
    std::ostream& stream;

    explicit sink(const std::string& path)
      : file{path.empty() ? std::ofstream{} : open_output(path)}
      , stream{path.empty() ? std::cout : file}
    {
    }
};

std::vector<double> parse_grid(const std::string& text)
{
    std::vector<double> grid;
    if (text.empty()) return grid;
    if (text.find(':') != std::string::npos) {  // start:step:stop, inclusive
        double start, step, stop;
        char c1, c2;
        std::istringstream in{text};
        if (!(in >> start >> c1 >> step >> c2 >> stop) || c1 != ':' || c2 != ':' || step <= 0)
            throw usage_error{"bad grid `" + text + "` (expected start:step:stop with step > 0)"};
        for (double v = start; v <= stop + step * 1e-9; v += step) grid.push_back(v);
        return grid;
    }
    std::istringstream in{text};
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) grid.push_back(std::stod(item));
    return grid;
}

void write_report_row(std::ostream& out, const esn::experiment_config& cfg,
                      const esn::experiment_report& report)
{
    const auto& best = report.reported();
    out << esn::to_string(cfg.topo.kind) << "," << cfg.task.name << "," << (cfg.feedback ? 1 : 0)
        << "," << cfg.topo.neurons << "," << best.mean_mse << "," << best.std_mse << ",";
    if (!best.re_eval_mse_original.empty()) {
        double mean = 0;
        for (double v : best.re_eval_mse_original) mean += v;
        mean /= static_cast<double>(best.re_eval_mse_original.size());
        double var = 0;
        for (double v : best.re_eval_mse_original) var += (v - mean) * (v - mean);
        double stddev = best.re_eval_mse_original.size() > 1
          ? std::sqrt(var / static_cast<double>(best.re_eval_mse_original.size() - 1))
          : 0.0;
        out << mean << "," << stddev;
    } else {
        out << ",";
    }
    out << "," << report.best_trial << "," << report.trials.size() << "\n";
}

constexpr const char* report_header =
  "topology,task,feedback,neurons,mean_mse,std_mse,mean_mse_original,std_mse_original,"
  "best_trial,trials\n";

void save_trial_artifacts(const esn::experiment_config& cfg, const esn::experiment_report& report,
                          const fs::path& out_dir, const std::string& tag)
{
    std::string suffix = tag.empty() ? "" : "_" + tag;
    auto trials_file = open_output(out_dir / ("trials" + suffix + ".jsonl"));
    for (const auto& trial : report.trials) {
        trials_file << trial.to_json(cfg).dump() << "\n";
        auto trace = open_output(out_dir
                                 / ("trace" + suffix + "_trial" + std::to_string(trial.trial)
                                    + ".csv"));
        esn::write_trace_csv(trial.trace, trace);
        if (trial.best_fitness_seen < esn::penalty_fitness) {
            esn::network net =
              esn::rebuild_trained_network(trial.best_hp, cfg, trial.best_eval_seed);
            json doc;
            doc["network"] = net.to_json();
            doc["config"] = cfg.to_json();
            doc["trial"] = trial.trial;
            doc["mean_mse"] = trial.mean_mse;
            doc["std_mse"] = trial.std_mse;
            auto net_file = open_output(
              out_dir / ("best_net" + suffix + "_trial" + std::to_string(trial.trial) + ".json"));
            net_file << doc.dump(2) << "\n";
        }
    }
}

int cmd_tune(const std::string& config_path, const std::string& out_dir_arg,
             std::optional<std::uint64_t> seed, std::optional<int> jobs)
{
    json doc = load_json_file(config_path);
    esn::experiment_config cfg = load_config(config_path, seed, jobs);
    fs::path out_dir{out_dir_arg};
    fs::create_directories(out_dir);

    if (doc.contains("topologies")) {
        std::vector<esn::topology> topologies;
        for (const auto& name : doc.at("topologies"))
            topologies.push_back({esn::topology_kind_from_string(name.get<std::string>()),
                                  cfg.topo.neurons});
        auto comparison = esn::run_comparison(cfg, topologies);
        auto report_file = open_output(out_dir / "report.csv");
        report_file.precision(17);
        report_file << report_header;
        std::cout << report_header;
        std::cout.precision(17);
        for (std::size_t i = 0; i < topologies.size(); ++i) {
            esn::experiment_config local = cfg;
            local.topo = topologies[i];
            save_trial_artifacts(local, comparison.reports[i], out_dir,
                                 esn::to_string(topologies[i].kind));
            write_report_row(report_file, local, comparison.reports[i]);
            write_report_row(std::cout, local, comparison.reports[i]);
        }
        auto matrix_file = open_output(out_dir / "p_matrix.csv");
        matrix_file.precision(17);
        matrix_file << "topology";
        for (const auto& t : topologies) matrix_file << "," << esn::to_string(t.kind);
        matrix_file << "\n";
        for (std::size_t i = 0; i < topologies.size(); ++i) {
            matrix_file << esn::to_string(topologies[i].kind);
            for (std::size_t j = 0; j < topologies.size(); ++j)
                matrix_file << "," << comparison.p_values(static_cast<Eigen::Index>(i),
                                                          static_cast<Eigen::Index>(j));
            matrix_file << "\n";
        }
        return exit_ok;
    }

    auto report = esn::run_experiment(cfg);
    save_trial_artifacts(cfg, report, out_dir, "");
    auto report_file = open_output(out_dir / "report.csv");
    report_file.precision(17);
    report_file << report_header;
    write_report_row(report_file, cfg, report);
    std::cout.precision(17);
    std::cout << report_header;
    write_report_row(std::cout, cfg, report);
    return exit_ok;
}

int cmd_evaluate(const std::string& network_path, int repeats, std::optional<std::uint64_t> seed,
                 std::optional<int> jobs, const std::string& out_path)
{
    json doc = load_json_file(network_path);
    if (!doc.contains("network") || !doc.contains("config"))
        throw usage_error{"`" + network_path + "` is not a saved network (missing keys)"};
    esn::network net = esn::network::from_json(doc.at("network"));
    esn::experiment_config cfg = esn::experiment_config::from_json(doc.at("config"));
    if (seed) cfg.master_seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    if (repeats < 1) throw usage_error{"--repeats must be at least 1"};

    const esn::hyperparameters hp = net.params();
    std::vector<esn::metric_set> rows(repeats);
    esn::parallel_for(cfg.jobs, static_cast<std::size_t>(repeats), [&](std::size_t r) {
        std::uint64_t eval_seed = esn::derive_seed(cfg.master_seed, {0xe7a1, r});
        rows[r] = esn::evaluate_metrics(hp, cfg, eval_seed);
    });

    sink out{out_path};
    out.stream.precision(17);
    out.stream << "repeat,mse,nmse,nrmse,mse_original\n";
    for (int r = 0; r < repeats; ++r) {
        out.stream << r << "," << rows[r].mse << "," << rows[r].nmse << "," << rows[r].nrmse
                   << ",";
        if (rows[r].mse_original) out.stream << *rows[r].mse_original;
        out.stream << "\n";
    }
    auto summarize = [&](const char* name, auto getter) {
        double mean = 0;
        for (const auto& row : rows) mean += getter(row);
        mean /= repeats;
        double var = 0;
        for (const auto& row : rows) var += (getter(row) - mean) * (getter(row) - mean);
        double stddev = repeats > 1 ? std::sqrt(var / (repeats - 1)) : 0.0;
        out.stream << "# " << name << " mean=" << mean << " std=" << stddev << "\n";
    };
    summarize("mse", [](const esn::metric_set& r) { return r.mse; });
    summarize("nmse", [](const esn::metric_set& r) { return r.nmse; });
    summarize("nrmse", [](const esn::metric_set& r) { return r.nrmse; });
    return exit_ok;
}

int cmd_scan(const std::string& network_path, const std::string& param, const std::string& grid,
             int repeats, std::optional<std::uint64_t> seed, std::optional<int> jobs,
             const std::string& out_path)
{
    json doc = load_json_file(network_path);
    if (!doc.contains("network") || !doc.contains("config"))
        throw usage_error{"`" + network_path + "` is not a saved network (missing keys)"};
    esn::network net = esn::network::from_json(doc.at("network"));
    esn::experiment_config cfg = esn::experiment_config::from_json(doc.at("config"));
    if (seed) cfg.master_seed = *seed;
    if (jobs) cfg.jobs = *jobs;

    std::vector<esn::scan_row> rows;
    try {
        if (param == "washout" || param == "train") {
            std::vector<int> lengths;
            for (double v : parse_grid(grid)) lengths.push_back(static_cast<int>(std::lround(v)));
            rows = esn::scan_lengths(net.params(),
                                     param == "washout" ? esn::length_kind::washout
                                                        : esn::length_kind::train,
                                     lengths, cfg, repeats);
        } else {
            auto values = parse_grid(grid);
            rows = esn::scan_parameter(net.params(), param, values, cfg, repeats);
        }
    } catch (const std::invalid_argument& e) {
        throw usage_error{std::string{e.what()}
                          + " (valid names: sigma_res, mu_res, omega_in, omega_fb, sparsity, "
                            "gamma, mu_b, epsilon, washout, train)"};
    }
    sink out{out_path};
    esn::write_scan_csv(rows, param, out.stream);
    return exit_ok;
}

int cmd_gen_bench(const std::string& name, int length, std::uint64_t seed, int tau,
                  const std::string& out_path)
{
    esn::task_spec spec = esn::task_spec_from_name(name);
    if (tau > 0) spec.tau = tau;
    esn::task t = esn::make_task(spec, length, seed);
    sink out{out_path};
    esn::task_to_csv(t, out.stream);
    return exit_ok;
}

int cmd_dump_activity(const std::string& network_path, const std::string& config_path, int steps,
                      double impulse, std::optional<std::uint64_t> seed,
                      const std::string& out_path)
{
    std::optional<esn::network> net;
    if (!network_path.empty()) {
        json doc = load_json_file(network_path);
        net = esn::network::from_json(doc.contains("network") ? doc.at("network") : doc);
    } else if (!config_path.empty()) {
        // untuned network at the search-space starting point
        esn::experiment_config cfg = load_config(config_path, seed, std::nullopt);
        esn::hyperparameters hp = esn::decode(esn::initial_point(cfg.topo, cfg.specs), cfg.specs);
        net.emplace(cfg.topo, hp, esn::derive_seed(cfg.master_seed, 0xd0d0));
    } else {
        throw usage_error{"dump-activity needs --network or --config"};
    }
    if (steps < 1) throw usage_error{"--steps must be at least 1"};
    net->reset_state();
    std::vector<double> input(static_cast<std::size_t>(steps), 0.0);
    input[0] = impulse;
    Eigen::MatrixXd history = net->dump_activations(input);
    sink out{out_path};
    out.stream.precision(17);
    out.stream << "# neurons=" << net->neurons() << " steps=" << steps << "\n";
    for (int i = 0; i < net->neurons(); ++i) out.stream << (i ? "," : "") << "a" << i;
    out.stream << "\n";
    for (Eigen::Index t = 0; t < history.rows(); ++t) {
        for (Eigen::Index i = 0; i < history.cols(); ++i)
            out.stream << (i ? "," : "") << history(t, i);
        out.stream << "\n";
    }
    return exit_ok;
}

int cmd_report(const std::vector<std::string>& jsonl_paths, const std::string& out_path)
{
    struct group {
        std::string topology;
        std::string task;
        json best;  ///< trial with the lowest mean mse
    };
    std::vector<group> groups;
    for (const auto& path : jsonl_paths) {
        std::ifstream in{path};
        if (!in) throw usage_error{"cannot open file `" + path + "`"};
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json trial = json::parse(line);
            std::string topo = trial.at("topology").get<std::string>();
            std::string task = trial.at("task").get<std::string>();
            auto it = std::find_if(groups.begin(), groups.end(), [&](const group& g) {
                return g.topology == topo && g.task == task;
            });
            if (it == groups.end()) {
                groups.push_back({topo, task, trial});
            } else if (trial.at("mean_mse").get<double>() < it->best.at("mean_mse").get<double>()) {
                it->best = trial;
            }
        }
    }
    if (groups.empty()) throw usage_error{"no trials found in the given files"};
    sink out{out_path};
    out.stream.precision(17);
    out.stream << "topology,task,mean_mse,std_mse\n";
    for (const auto& g : groups)
        out.stream << g.topology << "," << g.task << "," << g.best.at("mean_mse").get<double>()
                   << "," << g.best.at("std_mse").get<double>() << "\n";
    if (groups.size() > 1) {
        std::vector<std::vector<double>> samples;
        for (const auto& g : groups)
            samples.push_back(g.best.at("re_eval_mse").get<std::vector<double>>());
        Eigen::MatrixXd p = esn::p_value_matrix(samples);
        out.stream << "# welch p-value matrix\n";
        out.stream << "group";
        for (const auto& g : groups) out.stream << "," << g.topology << ":" << g.task;
        out.stream << "\n";
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            out.stream << groups[static_cast<std::size_t>(i)].topology << ":"
                       << groups[static_cast<std::size_t>(i)].task;
            for (Eigen::Index j = 0; j < p.cols(); ++j) out.stream << "," << p(i, j);
            out.stream << "\n";
        }
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Echo state network tuning toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, network_path, param, grid, task_name, out_path;
    std::vector<std::string> jsonl_paths;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> jobs_override;
    int repeats = 30, length = 1000, steps = 200, tau = 0;
    std::uint64_t bench_seed = 1;
    double impulse = 1.0;

    auto* tune = app.add_subcommand("tune", "Run the CMA-ES tuning protocol from a config file");
    tune->add_option("--config", config_path, "experiment config (JSON)")->required();
    tune->add_option("--out", out_dir, "output directory")->required();
    tune->add_option("--seed", seed_override, "override the config master seed");
    tune->add_option("--jobs", jobs_override, "override the config parallelism");

    auto* evaluate = app.add_subcommand("evaluate", "Re-evaluate a saved network on fresh data");
    evaluate->add_option("--network", network_path, "saved network (JSON)")->required();
    evaluate->add_option("--repeats", repeats, "number of fresh evaluations");
    evaluate->add_option("--seed", seed_override, "override the evaluation seed");
    evaluate->add_option("--jobs", jobs_override, "parallelism");
    evaluate->add_option("--out", out_path, "output CSV (stdout when omitted)");

    auto* scan = app.add_subcommand("scan", "Sensitivity scan around a saved network");
    scan->add_option("--network", network_path, "saved network (JSON)")->required();
    scan->add_option("--param", param, "parameter to vary (or washout/train)")->required();
    scan->add_option("--grid", grid, "comma list or start:step:stop")->required();
    scan->add_option("--repeats", repeats, "networks per grid value");
    scan->add_option("--seed", seed_override, "override the scan seed");
    scan->add_option("--jobs", jobs_override, "parallelism");
    scan->add_option("--out", out_path, "output CSV (stdout when omitted)");

    auto* gen_bench = app.add_subcommand("gen-bench", "Export benchmark data as CSV");
    gen_bench->add_option("task", task_name, "narma10, mg17 or mg30")->required();
    gen_bench->add_option("--length", length, "sequence length");
    gen_bench->add_option("--seed", bench_seed, "generator seed");
    gen_bench->add_option("--tau", tau, "Mackey-Glass delay override");
    gen_bench->add_option("--out", out_path, "output CSV (stdout when omitted)");

    auto* dump = app.add_subcommand("dump-activity",
                                    "Drive a network with an impulse and dump activations");
    dump->add_option("--network", network_path, "saved network (JSON)");
    dump->add_option("--config", config_path, "build an untuned network from a config instead");
    dump->add_option("--steps", steps, "number of steps");
    dump->add_option("--impulse", impulse, "input value of the first step");
    dump->add_option("--seed", seed_override, "seed for --config mode");
    dump->add_option("--out", out_path, "output CSV (stdout when omitted)");

    auto* report = app.add_subcommand("report", "Combine trial summaries into a result table");
    report->add_option("trials", jsonl_paths, "trials.jsonl files")->required();
    report->add_option("--out", out_path, "output CSV (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (tune->parsed()) return cmd_tune(config_path, out_dir, seed_override, jobs_override);
        if (evaluate->parsed())
            return cmd_evaluate(network_path, repeats, seed_override, jobs_override, out_path);
        if (scan->parsed())
            return cmd_scan(network_path, param, grid, repeats, seed_override, jobs_override,
                            out_path);
        if (gen_bench->parsed()) return cmd_gen_bench(task_name, length, bench_seed, tau, out_path);
        if (dump->parsed())
            return cmd_dump_activity(network_path, config_path, steps, impulse, seed_override,
                                     out_path);
        if (report->parsed()) return cmd_report(jsonl_paths, out_path);
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_runtime;
    }
    return exit_usage;
}
