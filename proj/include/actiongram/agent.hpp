#pragma once
// The action-grammar agent's moving parts: a growable action set mixing
// primitives and macros, macro-biased epsilon exploration, double-Q updates,
// abandon-ship early termination, and macro execution.

#include <cmath>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "actiongram/env.hpp"
#include "actiongram/grammar.hpp"
#include "actiongram/replay.hpp"

namespace actiongram {

// Actions 0..P-1 are environment primitives; macros take the next free ids in
// the order they were admitted and are never removed or reordered.
class ActionSet {
public:
    explicit ActionSet(int n_primitives) : n_primitives_(n_primitives) {
        if (n_primitives < 1) throw std::invalid_argument("no primitives");
    }

    int primitive_count() const { return n_primitives_; }
    int macro_count() const { return static_cast<int>(macros_.size()); }
    int size() const { return n_primitives_ + macro_count(); }
    bool is_macro(int action) const { return action >= n_primitives_ && action < size(); }

    const std::vector<int>& macro_primitives(int action) const {
        if (!is_macro(action)) throw std::out_of_range("not a macro action");
        return macros_[action - n_primitives_].primitives;
    }

    int action_length(int action) const {
        if (action < 0 || action >= size()) throw std::out_of_range("unknown action");
        return is_macro(action) ? static_cast<int>(macro_primitives(action).size()) : 1;
    }

    std::span<const MacroBinding> bindings() const { return macros_; }

    // Admits macros not yet present (keyed by primitive sequence); returns
    // the action ids assigned to the newcomers.
    std::vector<int> add_macros(std::span<const MacroAction> macros) {
        std::vector<int> added;
        for (const MacroAction& m : macros) {
            if (m.primitives.size() < 2) throw std::invalid_argument("macro shorter than two");
            for (int p : m.primitives)
                if (p < 0 || p >= n_primitives_) throw std::out_of_range("unknown primitive");
            if (!known_.insert(m.primitives).second) continue;
            int id = size();
            macros_.push_back({id, m.primitives});
            added.push_back(id);
        }
        return added;
    }

private:
    int n_primitives_;
    std::vector<MacroBinding> macros_;
    std::set<std::vector<int>> known_;
};

// Normalized action-value divergence, in [0, 1) when q_highest >= q_m.
inline double abandon_divergence(double q_m, double q_highest) {
    if (q_m > q_highest) throw std::invalid_argument("q_m above the best primitive value");
    return 1.0 - std::exp(q_m - q_highest);
}

// Running divergence statistics: a warm-up window seeds the mean and variance,
// after which both decay exponentially. Abandonment is off while warming up.
class AbandonShipTracker {
public:
    explicit AbandonShipTracker(double z = 1.0, double decay = 0.99, int warmup = 10)
        : z_(z), decay_(decay), warmup_(warmup) {
        if (decay <= 0.0 || decay >= 1.0) throw std::invalid_argument("decay outside (0,1)");
        if (warmup < 1) throw std::invalid_argument("warmup too small");
    }

    bool ready() const { return seen_ >= warmup_; }
    double mean() const { return mean_; }
    double variance() const { return var_; }
    double stddev() const { return std::sqrt(var_); }
    double threshold() const { return mean_ + z_ * stddev(); }
    long long observations() const { return seen_; }

    void observe(double d) {
        ++seen_;
        if (seen_ <= warmup_) {
            window_.push_back(d);
            if (seen_ == warmup_) {
                double m = 0.0;
                for (double v : window_) m += v;
                m /= static_cast<double>(window_.size());
                double var = 0.0;
                for (double v : window_) var += (v - m) * (v - m);
                var /= static_cast<double>(window_.size());
                mean_ = m;
                var_ = var;
                window_.clear();
            }
            return;
        }
        double diff = d - mean_;
        double incr = (1.0 - decay_) * diff;
        mean_ += incr;
        var_ = decay_ * (var_ + diff * incr);
    }

private:
    double z_;
    double decay_;
    int warmup_;
    long long seen_ = 0;
    double mean_ = 0.0;
    double var_ = 0.0;
    std::vector<double> window_;
};

// True if the macro should be abandoned at this juncture. The comparison uses
// the statistics from before this divergence is folded in, and the divergence
// is recorded either way.
inline bool abandon_check(double q_m, double q_highest, AbandonShipTracker& tracker) {
    double d = abandon_divergence(q_m, q_highest);
    bool abandon = tracker.ready() && d > tracker.threshold();
    tracker.observe(d);
    return abandon;
}

// Ties break toward the lowest action id.
template <typename Est, typename State>
int greedy_action(const Est& est, const State& s, int n_actions) {
    if (n_actions < 1) throw std::invalid_argument("no actions");
    int best = 0;
    double best_v = est.value(s, 0);
    for (int a = 1; a < n_actions; ++a) {
        double v = est.value(s, a);
        if (v > best_v) {
            best = a;
            best_v = v;
        }
    }
    return best;
}

struct ActionChoice {
    int action = 0;
    bool exploratory = false;
};

// Epsilon-greedy where the exploration branch weights each macro by `bonus`
// and each primitive by one.
template <typename Est, typename State>
ActionChoice pick_action(const Est& est, const State& s, const ActionSet& actions,
                         double epsilon, double bonus, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < epsilon) {
        double total = actions.primitive_count() + bonus * actions.macro_count();
        std::uniform_real_distribution<double> slot(0.0, total);
        double v = slot(rng);
        double cum = 0.0;
        for (int a = 0; a < actions.size(); ++a) {
            cum += actions.is_macro(a) ? bonus : 1.0;
            if (v < cum) return {a, true};
        }
        return {actions.size() - 1, true};  // fp edge
    }
    return {greedy_action(est, s, actions.size()), false};
}

// Double-Q target: the online net picks the argmax, the target net prices it.
// n-step experiences discount by gamma^n_steps.
template <typename Est, typename State>
void q_update(Est& online, const Est& target, std::span<const Experience<State>> batch,
              double gamma, double alpha) {
    for (const Experience<State>& e : batch) {
        double t = e.reward;
        if (!e.done) {
            int best = greedy_action(online, e.next_state, online.action_count());
            t += std::pow(gamma, e.n_steps) * target.value(e.next_state, best);
        }
        online.learn(e.state, e.action, t, alpha);
    }
}

// Grows the estimator head to cover every action in the set. With transfer,
// each new macro's values start as a copy of its first primitive's.
template <typename Est>
void expand_action_head(Est& est, const ActionSet& actions, bool transfer) {
    int have = est.action_count();
    int want = actions.size();
    if (have > want) throw std::logic_error("estimator ahead of action set");
    std::vector<int> sources;
    for (int a = have; a < want; ++a)
        sources.push_back(transfer ? actions.macro_primitives(a)[0] : -1);
    est.expand_actions(sources);
}

// Runs one decision to completion: a primitive directly, a macro primitive by
// primitive with an abandon check before each one after the first. The
// callback fires after every primitive transition. `step_budget` caps how
// many primitives may run (episode caps and step budgets).
template <Environment Env, typename Est, typename OnStep>
DecisionStep<typename Env::State> execute_action(const Env& env,
                                                 const typename Env::State& start, int action,
                                                 const ActionSet& actions, const Est& est,
                                                 AbandonShipTracker& tracker,
                                                 bool abandon_enabled, int step_budget,
                                                 OnStep&& on_step) {
    if (step_budget < 1) throw std::invalid_argument("no step budget");

    DecisionStep<typename Env::State> d;
    d.state = start;
    d.action = action;

    std::vector<int> single;
    const std::vector<int>* seq;
    if (actions.is_macro(action)) {
        seq = &actions.macro_primitives(action);
    } else {
        single = {action};
        seq = &single;
    }
    d.attempted_length = static_cast<int>(seq->size());

    auto cur = start;
    for (std::size_t j = 0; j < seq->size(); ++j) {
        if (j > 0 && abandon_enabled) {
            double q_m = est.value(cur, (*seq)[j]);
            double q_highest = est.value(cur, 0);
            for (int p = 1; p < actions.primitive_count(); ++p)
                q_highest = std::max(q_highest, est.value(cur, p));
            if (abandon_check(q_m, q_highest, tracker)) {
                d.abandoned = true;
                break;
            }
        }
        auto r = env.step(cur, (*seq)[j]);
        d.primitives.push_back((*seq)[j]);
        d.rewards.push_back(r.reward);
        d.next_states.push_back(r.next_state);
        d.dones.push_back(r.done ? 1 : 0);
        cur = r.next_state;
        on_step();
        if (r.done) break;
        if (static_cast<int>(d.primitives.size()) >= step_budget) break;
    }
    return d;
}

}  // namespace actiongram
