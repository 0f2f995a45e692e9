#pragma once
// Multi-run execution: every (variant x seed) pair runs in a bounded worker
// pool, outputs land as per-run CSVs plus one aggregated summary.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "actiongram/config.hpp"

namespace actiongram {

struct RunResult {
    std::string label;
    std::uint64_t seed = 0;
    long long total_steps = 0;
    RunMetrics metrics;
    std::string warnings;
};

// Runs every variant x seed pair; results come back in variant-major order
// regardless of scheduling. The first failure is rethrown after all workers
// finish.
inline std::vector<RunResult> execute_runs(const ExperimentSpec& spec) {
    struct Job {
        const VariantSpec* variant;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const VariantSpec& v : spec.variants)
        for (std::uint64_t s : spec.seeds) jobs.push_back({&v, s});

    std::vector<RunResult> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                RunConfig cfg = jobs[i].variant->config;
                cfg.seed = jobs[i].seed;
                std::ostringstream warn;
                RunMetrics m = run(cfg, &warn);
                results[i] = {jobs[i].variant->label, jobs[i].seed, cfg.total_steps,
                              std::move(m), warn.str()};
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    int workers = spec.parallelism > 0 ? spec.parallelism : static_cast<int>(spec.seeds.size());
    workers = std::clamp<int>(workers, 1, static_cast<int>(jobs.size()));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();

    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

inline double stddev_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mu = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

inline std::string run_file_name(const std::string& label, std::uint64_t seed) {
    return label + "_seed" + std::to_string(seed) + ".csv";
}

inline std::string grammar_file_name(const std::string& label, std::uint64_t seed) {
    return label + "_seed" + std::to_string(seed) + "_grammar.txt";
}

// One row per variant: median/mean/std of final score and of the first-solve
// step (runs that never solve count as their step budget), plus the overall
// executed/attempted move-length ratio.
inline void write_summary_csv(std::ostream& os, const ExperimentSpec& spec,
                              const std::vector<RunResult>& results) {
    os << "# actiongram-summary v1\n";
    os << "variant,seeds,final_score_median,final_score_mean,final_score_std,"
          "first_solve_median,first_solve_mean,first_solve_std,executed_attempted_ratio\n";
    os << std::setprecision(12);
    for (const VariantSpec& v : spec.variants) {
        std::vector<double> scores, solves;
        long long attempted = 0, executed = 0;
        for (const RunResult& r : results) {
            if (r.label != v.label) continue;
            scores.push_back(r.metrics.final_score);
            solves.push_back(static_cast<double>(
                r.metrics.first_solve_step.value_or(r.total_steps)));
            attempted += r.metrics.attempted_total;
            executed += r.metrics.executed_total;
        }
        double ratio = attempted == 0 ? 1.0
                                      : static_cast<double>(executed) /
                                            static_cast<double>(attempted);
        os << v.label << ',' << scores.size() << ',' << median_of(scores) << ','
           << mean_of(scores) << ',' << stddev_of(scores) << ',' << median_of(solves) << ','
           << mean_of(solves) << ',' << stddev_of(solves) << ',' << ratio << '\n';
    }
}

inline std::filesystem::path effective_out_dir(const ExperimentSpec& spec) {
    const char* env = std::getenv("ACTIONGRAM_OUT");
    if (env && *env) return std::filesystem::path(env);
    return std::filesystem::path(spec.out_dir);
}

// Writes per-run metrics CSVs, per-run grammar snapshot files, and the
// summary; forwards run warnings; returns the output directory.
inline std::filesystem::path run_experiment(const ExperimentSpec& spec, std::ostream& warn_os) {
    std::vector<RunResult> results = execute_runs(spec);
    std::filesystem::path dir = effective_out_dir(spec);
    std::filesystem::create_directories(dir);
    for (const RunResult& r : results) {
        std::ofstream csv(dir / run_file_name(r.label, r.seed));
        write_metrics_csv(csv, r.metrics);
        std::ofstream grammar(dir / grammar_file_name(r.label, r.seed));
        write_grammar_snapshots(grammar, r.metrics);
        if (!r.warnings.empty())
            warn_os << r.label << " seed " << r.seed << ": " << r.warnings;
    }
    std::ofstream summary(dir / "summary.csv");
    write_summary_csv(summary, spec, results);
    return dir;
}

// The ablation grid: a grammar-free baseline plus the full factorial over
// HAR, buffer kind, abandon-ship z, and transfer initialization. Seeds are
// shared across all variants so pairs are directly comparable.
inline ExperimentSpec ablation_spec(const ExperimentSpec& base) {
    ExperimentSpec out = base;
    out.variants.clear();
    RunConfig tmpl = base.variants.at(0).config;

    RunConfig bare = tmpl;
    bare.grammar_iterations = 0;
    out.variants.push_back({"base", bare});

    for (bool har : {true, false}) {
        for (ReplayKind buffer : {ReplayKind::balanced, ReplayKind::uniform}) {
            for (int z : {-1, 1, 2}) {  // -1 encodes "off"
                for (bool transfer : {true, false}) {
                    RunConfig c = tmpl;
                    c.grammar_iterations = std::max(1, tmpl.grammar_iterations);
                    c.har = har;
                    c.replay = buffer;
                    c.abandon_enabled = z > 0;
                    if (z > 0) c.abandon_z = z;
                    c.transfer_init = transfer;
                    std::string label = std::string("ag_") + (har ? "har" : "nohar") + '_' +
                                        (buffer == ReplayKind::balanced ? "bal" : "uni") + '_' +
                                        (z > 0 ? "z" + std::to_string(z) : "zoff") + '_' +
                                        (transfer ? "tf" : "fresh");
                    out.variants.push_back({std::move(label), std::move(c)});
                }
            }
        }
    }
    return out;
}

// Standalone grammar inspection: costs, rules, and extracted macros.
inline void grammar_report(std::span<const int> seq, CalculatorKind kind, int k,
                           std::ostream& os) {
    Grammar g = run_calculator(seq, kind, k);
    std::vector<MacroAction> macros = extract_macros(g);
    os << std::setprecision(12);
    os << seq.size() << " symbols\n";
    os << "raw cost " << raw_encoding_cost(seq) << '\n';
    os << "compressed cost " << encoding_cost(g) << '\n';
    os << g.rules.size() << " rules\n";
    print_grammar(os, g);
    os << macros.size() << " macros\n";
    for (const MacroAction& m : macros) {
        os << "macro:";
        for (int p : m.primitives) os << ' ' << p;
        os << '\n';
    }
}

}  // namespace actiongram
