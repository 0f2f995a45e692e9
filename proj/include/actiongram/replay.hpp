#pragma once
// Experience records, episode traces, hindsight action replay and the
// action-balanced replay buffer (with a uniform variant for ablations).

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

namespace actiongram {

template <typename State>
struct Experience {
    State state;
    int action = 0;
    double reward = 0.0;
    State next_state;
    bool done = false;
    int n_steps = 1;  // discount horizon: primitives spanned by the action
};

// One decision by the agent: a primitive, or a macro with its per-primitive
// transitions. A macro cut short by abandon-ship sets `abandoned`; one cut by
// the episode cap simply ends with fewer primitives than attempted.
template <typename State>
struct DecisionStep {
    State state;
    int action = 0;
    int attempted_length = 1;
    bool abandoned = false;
    std::vector<int> primitives;
    std::vector<double> rewards;
    std::vector<State> next_states;
    std::vector<std::uint8_t> dones;

    int executed_length() const { return static_cast<int>(primitives.size()); }
    bool ended_done() const { return !dones.empty() && dones.back() != 0; }
    // A macro counts as played in full if it ran every primitive or the
    // episode ended under it; only then is a macro-level experience stored.
    bool completed_macro() const {
        return attempted_length > 1 && (executed_length() == attempted_length || ended_done());
    }
};

template <typename State>
struct EpisodeTrace {
    std::vector<DecisionStep<State>> steps;
    double total_return = 0.0;

    std::size_t primitive_count() const {
        std::size_t n = 0;
        for (const auto& s : steps) n += s.primitives.size();
        return n;
    }
};

struct MacroBinding {
    int action_id = 0;
    std::vector<int> primitives;
};

struct MacroMatch {
    int offset = 0;  // primitive index where the macro's sequence begins
    int action_id = 0;
};

// Every occurrence (overlaps included) of every macro's primitive sequence,
// macros in the given order, offsets ascending.
inline std::vector<MacroMatch> match_macros(std::span<const int> stream,
                                            std::span<const MacroBinding> macros) {
    std::vector<MacroMatch> out;
    for (const MacroBinding& m : macros) {
        if (m.primitives.size() < 2) throw std::invalid_argument("macro shorter than two");
        auto it = stream.begin();
        while (true) {
            it = std::search(it, stream.end(), m.primitives.begin(), m.primitives.end());
            if (it == stream.end()) break;
            out.push_back({static_cast<int>(it - stream.begin()), m.action_id});
            ++it;
        }
    }
    return out;
}

namespace detail {

template <typename State>
void append_primitive_experiences(const DecisionStep<State>& step,
                                  std::vector<Experience<State>>& out) {
    for (std::size_t j = 0; j < step.primitives.size(); ++j) {
        out.push_back({j == 0 ? step.state : step.next_states[j - 1], step.primitives[j],
                       step.rewards[j], step.next_states[j], step.dones[j] != 0, 1});
    }
}

template <typename State>
Experience<State> aggregate_experience(const DecisionStep<State>& step) {
    double reward = std::accumulate(step.rewards.begin(), step.rewards.end(), 0.0);
    return {step.state, step.action, reward, step.next_states.back(), step.ended_done(),
            step.executed_length()};
}

}  // namespace detail

// What a HAR-less agent would store: one experience per decision, except that
// a macro cut short mid-flight is kept only as its executed primitives.
template <typename State>
std::vector<Experience<State>> as_played_experiences(const EpisodeTrace<State>& trace) {
    std::vector<Experience<State>> out;
    for (const auto& step : trace.steps) {
        if (step.primitives.empty()) continue;
        if (step.completed_macro())
            out.push_back(detail::aggregate_experience(step));
        else
            detail::append_primitive_experiences(step, out);
    }
    return out;
}

// Hindsight action replay: the as-played experiences, plus the primitive
// decomposition of every completed macro, plus a synthesized macro experience
// for every occurrence of a known macro in the fully primitive stream that
// was not literally played as that macro there.
template <typename State>
std::vector<Experience<State>> har_expand(const EpisodeTrace<State>& trace,
                                          std::span<const MacroBinding> macros) {
    std::map<int, const MacroBinding*> by_id;
    for (const MacroBinding& m : macros) by_id[m.action_id] = &m;

    std::vector<Experience<State>> out;
    std::vector<int> stream;
    std::vector<const State*> before, after;
    std::vector<double> rewards;
    std::vector<std::uint8_t> dones;
    std::set<std::pair<int, int>> played_spans;  // offset, macro id

    for (const auto& step : trace.steps) {
        if (step.attempted_length > 1 && !by_id.count(step.action))
            throw std::out_of_range("unknown macro id in trace");
        if (step.primitives.empty()) continue;

        if (step.completed_macro()) {
            out.push_back(detail::aggregate_experience(step));
            detail::append_primitive_experiences(step, out);
            played_spans.insert({static_cast<int>(stream.size()), step.action});
        } else {
            detail::append_primitive_experiences(step, out);
        }

        for (std::size_t j = 0; j < step.primitives.size(); ++j) {
            stream.push_back(step.primitives[j]);
            before.push_back(j == 0 ? &step.state : &step.next_states[j - 1]);
            after.push_back(&step.next_states[j]);
            rewards.push_back(step.rewards[j]);
            dones.push_back(step.dones[j]);
        }
    }

    for (const MacroMatch& m : match_macros(stream, macros)) {
        if (played_spans.count({m.offset, m.action_id})) continue;
        int len = static_cast<int>(by_id.at(m.action_id)->primitives.size());
        int last = m.offset + len - 1;
        double reward = 0.0;
        for (int i = m.offset; i <= last; ++i) reward += rewards[i];
        out.push_back({*before[m.offset], m.action_id, reward, *after[last], dones[last] != 0,
                       len});
    }
    return out;
}

enum class ReplayKind { balanced, uniform };

// FIFO replay storage. The balanced kind keeps one sub-buffer per action with
// an equal share of the capacity; sampling splits the batch evenly across
// non-empty actions, spare slots going to uniformly chosen ones.
template <typename State>
class ReplayBuffer {
public:
    using Kind = ReplayKind;

    ReplayBuffer(Kind kind, std::size_t capacity, int n_actions)
        : kind_(kind), capacity_(capacity), n_actions_(n_actions) {
        if (capacity == 0) throw std::invalid_argument("zero capacity");
        if (n_actions < 1) throw std::invalid_argument("no actions");
        if (kind_ == Kind::balanced) buckets_.resize(n_actions);
    }

    Kind kind() const { return kind_; }
    int action_count() const { return n_actions_; }

    std::size_t action_capacity() const {
        return std::max<std::size_t>(1, capacity_ / static_cast<std::size_t>(n_actions_));
    }

    void grow_actions(int n_actions) {
        if (n_actions < n_actions_) throw std::invalid_argument("action sets only grow");
        n_actions_ = n_actions;
        if (kind_ != Kind::balanced) return;
        buckets_.resize(n_actions);
        for (auto& b : buckets_)
            while (b.size() > action_capacity()) b.pop_front();
    }

    void add(const Experience<State>& e) {
        if (e.action < 0 || e.action >= n_actions_) throw std::out_of_range("unknown action");
        if (kind_ == Kind::balanced) {
            auto& b = buckets_[e.action];
            b.push_back(e);
            while (b.size() > action_capacity()) b.pop_front();
        } else {
            all_.push_back(e);
            while (all_.size() > capacity_) all_.pop_front();
        }
    }

    void add(std::span<const Experience<State>> batch) {
        for (const auto& e : batch) add(e);
    }

    std::size_t size() const {
        if (kind_ == Kind::uniform) return all_.size();
        std::size_t n = 0;
        for (const auto& b : buckets_) n += b.size();
        return n;
    }

    std::size_t bucket_size(int action) const {
        if (kind_ == Kind::uniform) return all_.size();
        return buckets_.at(action).size();
    }

    std::vector<Experience<State>> sample(std::size_t batch, std::mt19937_64& rng) const {
        if (batch == 0) throw std::invalid_argument("empty batch");
        if (size() == 0) throw std::logic_error("sample from empty buffer");

        std::vector<Experience<State>> out;
        out.reserve(batch);
        if (kind_ == Kind::uniform) {
            std::uniform_int_distribution<std::size_t> pick(0, all_.size() - 1);
            for (std::size_t i = 0; i < batch; ++i) out.push_back(all_[pick(rng)]);
            return out;
        }

        std::vector<int> nonempty;
        for (int a = 0; a < n_actions_; ++a)
            if (!buckets_[a].empty()) nonempty.push_back(a);

        std::size_t m = nonempty.size();
        std::size_t base = batch / m;
        std::size_t rem = batch % m;
        std::vector<std::size_t> share(m, base);
        std::vector<std::size_t> idx(m);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < rem; ++i) {  // rem distinct lucky actions
            std::uniform_int_distribution<std::size_t> pick(i, m - 1);
            std::swap(idx[i], idx[pick(rng)]);
            ++share[idx[i]];
        }

        for (std::size_t i = 0; i < m; ++i) {
            const auto& b = buckets_[nonempty[i]];
            std::uniform_int_distribution<std::size_t> pick(0, b.size() - 1);
            for (std::size_t c = 0; c < share[i]; ++c) out.push_back(b[pick(rng)]);
        }
        return out;
    }

private:
    Kind kind_;
    std::size_t capacity_;
    int n_actions_;
    std::vector<std::deque<Experience<State>>> buckets_;
    std::deque<Experience<State>> all_;
};

// One line per experience: state-hash,action,reward,next-state-hash,done,n_steps
template <typename State, typename HashFn = std::hash<State>>
void dump_experiences(std::ostream& os, std::span<const Experience<State>> batch,
                      HashFn hash = {}) {
    for (const auto& e : batch) {
        os << hash(e.state) << ',' << e.action << ',' << e.reward << ',' << hash(e.next_state)
           << ',' << (e.done ? 1 : 0) << ',' << e.n_steps << '\n';
    }
}

}  // namespace actiongram
