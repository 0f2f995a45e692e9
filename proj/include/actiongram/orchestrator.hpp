#pragma once
// The gather/identify loop: an off-policy learner whose action set grows with
// macros inferred from its own best evaluation episodes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <iomanip>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "actiongram/agent.hpp"
#include "actiongram/estimator.hpp"
#include "actiongram/grammar.hpp"
#include "actiongram/gridworld.hpp"
#include "actiongram/hanoi.hpp"
#include "actiongram/replay.hpp"

namespace actiongram {

enum class EnvKind { hanoi, grid };
enum class EstimatorKind { tabular, linear };
enum class CalculatorKind { sequitur, k_sequitur, mdl };

struct RunConfig {
    // environment
    EnvKind env = EnvKind::hanoi;
    int hanoi_disks = 3;
    int hanoi_max_steps = 500;
    std::string grid_map;  // ASCII map text, required when env == grid
    double step_penalty = -1.0;

    // learner
    EstimatorKind estimator = EstimatorKind::tabular;
    double gamma = 0.99;
    double alpha = 0.1;
    double eps_start = 1.0;
    double eps_min = 0.05;
    long long eps_decay_steps = 10000;
    int batch_size = 32;
    int target_refresh = 200;
    long long initial_random_steps = 1000;
    std::size_t buffer_capacity = 50000;
    ReplayKind replay = ReplayKind::balanced;

    // action grammar
    int grammar_iterations = 1;
    long long steps_before_grammar = 5000;
    int eval_period = 10;        // episodes between no-exploration episodes
    int evaluation_episodes = 5; // capacity of the trace store F
    CalculatorKind calculator = CalculatorKind::sequitur;
    int k = 2;
    bool har = true;
    bool abandon_enabled = true;
    double abandon_z = 1.0;
    double exploration_bonus = 4.0;
    long long post_inference_random_steps = 500;
    bool transfer_init = true;

    // run
    std::uint64_t seed = 0;
    long long total_steps = 30000;
    bool early_stop_on_optimal = false;
    std::optional<int> optimal_episode_length;  // inferred from the env if unset

    void validate() const {
        auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
        if (env == EnvKind::hanoi && (hanoi_disks < 1 || hanoi_disks > 8))
            fail("hanoi_disks out of range");
        if (env == EnvKind::grid && grid_map.empty()) fail("grid env needs a map");
        if (hanoi_max_steps < 1) fail("hanoi_max_steps out of range");
        if (gamma < 0.0 || gamma > 1.0) fail("gamma outside [0,1]");
        if (alpha <= 0.0) fail("alpha must be positive");
        if (eps_start < 0.0 || eps_start > 1.0 || eps_min < 0.0 || eps_min > eps_start)
            fail("bad epsilon range");
        if (eps_decay_steps < 1) fail("eps_decay_steps out of range");
        if (batch_size < 1) fail("batch_size out of range");
        if (target_refresh < 1) fail("target_refresh out of range");
        if (initial_random_steps < 0) fail("initial_random_steps out of range");
        if (buffer_capacity == 0) fail("buffer_capacity out of range");
        if (grammar_iterations < 0) fail("grammar_iterations out of range");
        if (steps_before_grammar < 1) fail("steps_before_grammar out of range");
        if (eval_period < 1) fail("eval_period out of range");
        if (evaluation_episodes < 1) fail("evaluation_episodes out of range");
        if (k < 2) fail("k out of range");
        if (exploration_bonus < 0.0) fail("exploration_bonus out of range");
        if (post_inference_random_steps < 0) fail("post_inference_random_steps out of range");
        if (total_steps < 1) fail("total_steps out of range");
        if (env == EnvKind::grid) GridSpec::parse_text(grid_map);  // throws on bad maps
    }
};

struct EpisodeRecord {
    int episode = 0;
    long long end_step = 0;
    double ret = 0.0;
    int length = 0;
    bool solved = false;
    bool eval = false;
    long long attempted = 0;
    long long executed = 0;
    int actions = 0;
};

struct EvalRecord {
    int episode = 0;
    long long end_step = 0;
    double score = 0.0;
    int length = 0;
    bool solved = false;
    long long attempted = 0;
    long long executed = 0;
    int actions = 0;
};

struct GrammarSnapshot {
    long long step = 0;
    int iteration = 0;
    std::string grammar_text;
    std::vector<MacroBinding> added;
};

struct RunMetrics {
    std::vector<EpisodeRecord> episodes;
    std::vector<EvalRecord> evals;
    std::vector<GrammarSnapshot> snapshots;
    long long attempted_total = 0;
    long long executed_total = 0;
    long long total_primitive_steps = 0;
    std::optional<long long> first_solve_step;
    std::optional<long long> first_optimal_eval_step;
    int final_action_count = 0;
    double final_score = 0.0;
    double wall_clock_sec = 0.0;  // never serialized: outputs stay byte-stable
};

// versioned schema; wall-clock time deliberately absent
inline void write_metrics_csv(std::ostream& os, const RunMetrics& m) {
    os << "# actiongram-metrics v1\n";
    os << "kind,episode,end_step,return,length,solved,eval,attempted,executed,actions\n";
    os << std::setprecision(12);
    std::size_t next_eval = 0;
    for (const EpisodeRecord& e : m.episodes) {
        os << "episode," << e.episode << ',' << e.end_step << ',' << e.ret << ',' << e.length
           << ',' << (e.solved ? 1 : 0) << ',' << (e.eval ? 1 : 0) << ',' << e.attempted << ','
           << e.executed << ',' << e.actions << '\n';
        while (next_eval < m.evals.size() && m.evals[next_eval].episode == e.episode) {
            const EvalRecord& v = m.evals[next_eval++];
            os << "eval," << v.episode << ',' << v.end_step << ',' << v.score << ',' << v.length
               << ',' << (v.solved ? 1 : 0) << ",1," << v.attempted << ',' << v.executed << ','
               << v.actions << '\n';
        }
    }
}

inline void write_grammar_snapshots(std::ostream& os, const RunMetrics& m) {
    for (const GrammarSnapshot& g : m.snapshots) {
        os << "# step " << g.step << " iteration " << g.iteration << '\n';
        os << g.grammar_text;
        for (const MacroBinding& b : g.added) {
            os << "macro " << b.action_id << ':';
            for (int p : b.primitives) os << ' ' << p;
            os << '\n';
        }
        os << '\n';
    }
}

inline std::vector<double> hanoi_features(int n_disks, const HanoiState& s) {
    std::vector<double> phi(3 * n_disks + 1, 0.0);
    for (int d = 0; d < n_disks; ++d) phi[d * 3 + s.rod_of[d]] = 1.0;
    phi.back() = 1.0;
    return phi;
}

inline std::vector<double> grid_features(int width, int height, const GridState& s) {
    std::vector<double> phi(width + height + 1, 0.0);
    phi[s.x] = 1.0;
    phi[width + s.y] = 1.0;
    phi.back() = 1.0;
    return phi;
}

namespace detail {

// Fewest primitive steps to termination under the environment's dynamics.
template <Environment Env>
int shortest_solve(const Env& env) {
    using State = typename Env::State;
    std::queue<std::pair<State, int>> frontier;
    std::unordered_set<State> seen;
    frontier.push({env.reset(), 0});
    seen.insert(env.reset());
    while (!frontier.empty()) {
        auto [s, depth] = frontier.front();
        frontier.pop();
        for (int a = 0; a < env.action_count(); ++a) {
            auto r = env.step(s, a);
            if (r.done) return depth + 1;
            if (r.next_state == s) continue;
            if (seen.insert(r.next_state).second) frontier.push({r.next_state, depth + 1});
        }
    }
    return -1;
}

}  // namespace detail

// Concatenates the fully primitive streams of the given traces, separating
// episodes with unique sentinel ids (>= n_primitives) so no inferred macro
// can straddle an episode boundary.
template <typename State>
std::vector<int> concat_primitive_streams(
    const std::vector<const EpisodeTrace<State>*>& traces, int n_primitives) {
    std::vector<int> stream;
    int sentinel = n_primitives;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        if (i > 0) stream.push_back(sentinel++);
        for (const auto& step : traces[i]->steps)
            stream.insert(stream.end(), step.primitives.begin(), step.primitives.end());
    }
    return stream;
}

// The top fifth of the stored traces by return (at least one), preferring
// earlier traces on ties.
template <typename State>
std::vector<const EpisodeTrace<State>*> best_traces(
    const std::deque<EpisodeTrace<State>>& store) {
    std::vector<const EpisodeTrace<State>*> all;
    for (const auto& t : store) all.push_back(&t);
    std::stable_sort(all.begin(), all.end(),
                     [](const auto* a, const auto* b) { return a->total_return > b->total_return; });
    std::size_t keep = std::max<std::size_t>(1, (all.size() + 4) / 5);
    all.resize(std::min(keep, all.size()));
    return all;
}

inline Grammar run_calculator(std::span<const int> stream, CalculatorKind kind, int k) {
    switch (kind) {
        case CalculatorKind::k_sequitur: return k_sequitur_infer(stream, k);
        case CalculatorKind::mdl: return mdl_filter(stream);
        default: return sequitur_infer(stream);
    }
}

template <Environment Env, typename Est>
class Runner {
public:
    using State = typename Env::State;

    Runner(Env env, Est estimator, const RunConfig& cfg, std::ostream* warn = nullptr)
        : env_(std::move(env)),
          cfg_(cfg),
          online_(std::move(estimator)),
          target_(online_),
          actions_(env_.action_count()),
          buffer_(cfg.replay, cfg.buffer_capacity, env_.action_count()),
          tracker_(cfg.abandon_z),
          rng_(cfg.seed),
          warn_(warn) {
        optimal_length_ = cfg.optimal_episode_length
                              ? *cfg.optimal_episode_length
                              : detail::shortest_solve(env_);
    }

    const RunMetrics& metrics() const { return metrics_; }
    RunMetrics take_metrics() { return std::move(metrics_); }
    const ActionSet& actions() const { return actions_; }
    const ReplayBuffer<State>& buffer() const { return buffer_; }
    const Est& online() const { return online_; }
    const std::deque<EpisodeTrace<State>>& no_exploration_traces() const { return store_; }

    void add_no_exploration_trace(EpisodeTrace<State> trace) {
        store_.push_back(std::move(trace));
        while (static_cast<int>(store_.size()) > cfg_.evaluation_episodes) store_.pop_front();
    }
    long long global_step() const { return global_step_; }
    int episodes_run() const { return episode_; }
    int optimal_length() const { return optimal_length_; }

    double epsilon_at(long long step) const {
        if (step < cfg_.initial_random_steps) return 1.0;
        if (step < forced_random_until_) return 1.0;
        double frac = std::min(1.0, static_cast<double>(step) /
                                        static_cast<double>(cfg_.eps_decay_steps));
        return cfg_.eps_start - (cfg_.eps_start - cfg_.eps_min) * frac;
    }

    void run_all() {
        auto began = std::chrono::steady_clock::now();
        while (global_step_ < cfg_.total_steps && !stopped_) {
            bool eval = (episode_ + 1) % cfg_.eval_period == 0;
            run_episode(eval);
            if (!stopped_ && grammar_pending()) identify_action_grammar();
        }
        finalize();
        metrics_.wall_clock_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - began).count();
    }

    bool grammar_pending() const {
        return grammar_done_ < cfg_.grammar_iterations &&
               global_step_ >= cfg_.steps_before_grammar * (grammar_done_ + 1);
    }

    EpisodeTrace<State> run_episode(bool eval) {
        ++episode_;
        EpisodeTrace<State> trace;
        State s = env_.reset();
        int ep_steps = 0;
        bool done = false;
        long long attempted = 0;

        while (!done && ep_steps < env_.max_episode_steps() &&
               global_step_ < cfg_.total_steps) {
            double eps = eval ? 0.0 : epsilon_at(global_step_);
            ActionChoice choice =
                pick_action(online_, s, actions_, eps, cfg_.exploration_bonus, rng_);
            bool abandon = cfg_.abandon_enabled && actions_.is_macro(choice.action) &&
                           !choice.exploratory;
            int budget = static_cast<int>(
                std::min<long long>(env_.max_episode_steps() - ep_steps,
                                    cfg_.total_steps - global_step_));
            auto step = execute_action(env_, s, choice.action, actions_, online_, tracker_,
                                       abandon, budget, [&] { on_primitive_step(); });
            ep_steps += step.executed_length();
            attempted += step.abandoned ? step.attempted_length : step.executed_length();
            for (double r : step.rewards) trace.total_return += r;
            if (!step.next_states.empty()) {
                s = step.next_states.back();
                done = step.ended_done();
            }
            trace.steps.push_back(std::move(step));
        }

        auto batch = cfg_.har ? har_expand(trace, actions_.bindings())
                              : as_played_experiences(trace);
        buffer_.add(std::span<const Experience<State>>(batch));
        record_episode(trace, eval, attempted, ep_steps, done);
        if (eval) {
            store_.push_back(trace);
            while (static_cast<int>(store_.size()) > cfg_.evaluation_episodes)
                store_.pop_front();
        }
        return trace;
    }

    // Infers a grammar over the best stored no-exploration traces, admits the
    // new macros, expands both estimator heads, re-splits the buffer, and
    // forces exploration for a while so the newcomers get tried.
    void identify_action_grammar() {
        ++grammar_done_;
        if (store_.empty()) {
            if (warn_) *warn_ << "grammar iteration " << grammar_done_
                              << " skipped: no evaluation traces yet\n";
            return;
        }
        auto best = best_traces(store_);
        auto stream = concat_primitive_streams(best, actions_.primitive_count());
        if (stream.size() < 2) {
            if (warn_) *warn_ << "grammar iteration " << grammar_done_
                              << " skipped: not enough primitive steps\n";
            return;
        }

        Grammar g = run_calculator(stream, cfg_.calculator, cfg_.k);
        std::vector<MacroAction> macros;
        for (MacroAction& m : extract_macros(g)) {
            bool sentinel = false;
            for (int p : m.primitives) sentinel = sentinel || p >= actions_.primitive_count();
            if (!sentinel) macros.push_back(std::move(m));
        }

        auto added_ids = actions_.add_macros(macros);
        GrammarSnapshot snap;
        snap.step = global_step_;
        snap.iteration = grammar_done_;
        std::ostringstream text;
        print_grammar(text, g);
        snap.grammar_text = text.str();
        for (int id : added_ids) snap.added.push_back({id, actions_.macro_primitives(id)});
        metrics_.snapshots.push_back(std::move(snap));

        if (!added_ids.empty()) {
            expand_action_head(online_, actions_, cfg_.transfer_init);
            expand_action_head(target_, actions_, cfg_.transfer_init);
            buffer_.grow_actions(actions_.size());
            forced_random_until_ = global_step_ + cfg_.post_inference_random_steps;
        }
    }

private:
    void on_primitive_step() {
        ++global_step_;
        if (global_step_ <= cfg_.initial_random_steps) return;
        if (buffer_.size() < static_cast<std::size_t>(cfg_.batch_size)) return;
        auto batch = buffer_.sample(static_cast<std::size_t>(cfg_.batch_size), rng_);
        q_update(online_, target_, std::span<const Experience<State>>(batch), cfg_.gamma,
                 cfg_.alpha);
        if (++updates_ % cfg_.target_refresh == 0) target_ = online_;
    }

    void record_episode(const EpisodeTrace<State>& trace, bool eval, long long attempted,
                        int length, bool solved) {
        EpisodeRecord rec;
        rec.episode = episode_;
        rec.end_step = global_step_;
        rec.ret = trace.total_return;
        rec.length = length;
        rec.solved = solved;
        rec.eval = eval;
        rec.attempted = attempted;
        rec.executed = length;
        rec.actions = actions_.size();
        metrics_.episodes.push_back(rec);
        metrics_.attempted_total += attempted;
        metrics_.executed_total += length;
        metrics_.total_primitive_steps += length;
        if (solved && !metrics_.first_solve_step) metrics_.first_solve_step = global_step_;

        if (eval) {
            metrics_.evals.push_back({episode_, global_step_, trace.total_return, length,
                                      solved, attempted, static_cast<long long>(length),
                                      actions_.size()});
            if (solved && optimal_length_ > 0 && length == optimal_length_) {
                if (!metrics_.first_optimal_eval_step)
                    metrics_.first_optimal_eval_step = global_step_;
                if (cfg_.early_stop_on_optimal) stopped_ = true;
            }
        }
    }

    void finalize() {
        metrics_.final_action_count = actions_.size();
        auto tail_mean = [](auto begin, auto end, auto value) {
            double sum = 0.0;
            int n = 0;
            for (auto it = begin; it != end; ++it, ++n) sum += value(*it);
            return n == 0 ? 0.0 : sum / n;
        };
        if (!metrics_.evals.empty()) {
            auto from = metrics_.evals.size() > 5 ? metrics_.evals.end() - 5
                                                  : metrics_.evals.begin();
            metrics_.final_score =
                tail_mean(from, metrics_.evals.end(), [](const EvalRecord& e) { return e.score; });
        } else if (!metrics_.episodes.empty()) {
            auto from = metrics_.episodes.size() > 5 ? metrics_.episodes.end() - 5
                                                     : metrics_.episodes.begin();
            metrics_.final_score = tail_mean(from, metrics_.episodes.end(),
                                             [](const EpisodeRecord& e) { return e.ret; });
        }
    }

    Env env_;
    RunConfig cfg_;
    Est online_;
    Est target_;
    ActionSet actions_;
    ReplayBuffer<State> buffer_;
    AbandonShipTracker tracker_;
    std::mt19937_64 rng_;
    std::ostream* warn_;
    RunMetrics metrics_;
    std::deque<EpisodeTrace<State>> store_;
    long long global_step_ = 0;
    long long updates_ = 0;
    long long forced_random_until_ = 0;
    int episode_ = 0;
    int grammar_done_ = 0;
    int optimal_length_ = -1;
    bool stopped_ = false;
};

// Builds the right env/estimator pair and runs the whole loop.
inline RunMetrics run(const RunConfig& cfg, std::ostream* warn = nullptr) {
    cfg.validate();
    if (cfg.env == EnvKind::hanoi) {
        HanoiEnv env(cfg.hanoi_disks, cfg.step_penalty, cfg.hanoi_max_steps);
        if (cfg.estimator == EstimatorKind::tabular) {
            Runner<HanoiEnv, TabularEstimator<HanoiState>> r(
                env, TabularEstimator<HanoiState>(env.action_count()), cfg, warn);
            r.run_all();
            return r.take_metrics();
        }
        int disks = cfg.hanoi_disks;
        LinearEstimator<HanoiState> est(
            env.action_count(), 3 * disks + 1,
            [disks](const HanoiState& s) { return hanoi_features(disks, s); });
        Runner<HanoiEnv, LinearEstimator<HanoiState>> r(env, std::move(est), cfg, warn);
        r.run_all();
        return r.take_metrics();
    }

    GridSpec spec = GridSpec::parse_text(cfg.grid_map);
    GridEnv env(spec, cfg.step_penalty);
    if (cfg.estimator == EstimatorKind::tabular) {
        Runner<GridEnv, TabularEstimator<GridState>> r(
            env, TabularEstimator<GridState>(env.action_count()), cfg, warn);
        r.run_all();
        return r.take_metrics();
    }
    int w = spec.width, h = spec.height;
    LinearEstimator<GridState> est(env.action_count(), w + h + 1,
                                   [w, h](const GridState& s) { return grid_features(w, h, s); });
    Runner<GridEnv, LinearEstimator<GridState>> r(env, std::move(est), cfg, warn);
    r.run_all();
    return r.take_metrics();
}

}  // namespace actiongram
