#pragma once
// Towers of Hanoi with six primitive actions, one per ordered rod pair:
// a=(0,1) b=(0,2) c=(1,0) d=(1,2) e=(2,0) f=(2,1). Moving from an empty rod
// or onto a smaller disk is a no-op that still costs the step penalty.

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

#include "actiongram/env.hpp"

namespace actiongram {

struct HanoiState {
    std::array<std::uint8_t, 8> rod_of{};  // rod holding disk i; 0 is the smallest disk
    std::uint8_t n_disks = 0;
    bool terminal = false;

    friend bool operator==(const HanoiState&, const HanoiState&) = default;
};

class HanoiEnv {
public:
    using State = HanoiState;

    static constexpr std::array<std::pair<int, int>, 6> kMoves{
        {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}}};
    static constexpr int kGoalRod = 2;

    explicit HanoiEnv(int n_disks, double step_penalty = -1.0, int max_steps = 500)
        : n_disks_(n_disks), step_penalty_(step_penalty), max_steps_(max_steps) {
        if (n_disks < 1 || n_disks > 8) throw std::invalid_argument("disk count out of range");
        if (max_steps < 1) throw std::invalid_argument("episode cap out of range");
    }

    State reset() const {
        State s;
        s.n_disks = static_cast<std::uint8_t>(n_disks_);
        return s;  // every disk on rod 0
    }

    StepResult<State> step(const State& s, int action) const {
        if (s.terminal) throw std::logic_error("step on terminal state");
        if (action < 0 || action >= action_count()) throw std::invalid_argument("bad action");

        auto [from, to] = kMoves[action];
        int moving = top_disk(s, from);
        int blocking = top_disk(s, to);
        bool legal = moving >= 0 && (blocking < 0 || blocking > moving);
        if (!legal) return {s, step_penalty_, false};

        State next = s;
        next.rod_of[moving] = static_cast<std::uint8_t>(to);
        if (solved(next)) {
            next.terminal = true;
            return {next, 100.0, true};
        }
        return {next, step_penalty_, false};
    }

    int action_count() const { return 6; }
    int max_episode_steps() const { return max_steps_; }
    int disk_count() const { return n_disks_; }

    // 2^n - 1, the classic optimum
    int optimal_moves() const { return (1 << n_disks_) - 1; }

private:
    int top_disk(const State& s, int rod) const {
        for (int d = 0; d < n_disks_; ++d)
            if (s.rod_of[d] == rod) return d;
        return -1;
    }

    bool solved(const State& s) const {
        for (int d = 0; d < n_disks_; ++d)
            if (s.rod_of[d] != kGoalRod) return false;
        return true;
    }

    int n_disks_;
    double step_penalty_;
    int max_steps_;
};

// "((3,2,1),(),())": rods left to right, disk sizes top-down reversed
inline std::string to_string(const HanoiState& s) {
    std::string out = "(";
    for (int rod = 0; rod < 3; ++rod) {
        out += '(';
        bool first = true;
        for (int d = s.n_disks - 1; d >= 0; --d) {
            if (s.rod_of[d] != rod) continue;
            if (!first) out += ',';
            out += std::to_string(d + 1);
            first = false;
        }
        out += ')';
        if (rod != 2) out += ',';
    }
    out += ')';
    return out;
}

}  // namespace actiongram

template <>
struct std::hash<actiongram::HanoiState> {
    std::size_t operator()(const actiongram::HanoiState& s) const noexcept {
        std::uint64_t v = s.n_disks;
        for (int d = 0; d < s.n_disks; ++d) v = v * 4 + s.rod_of[d];
        v = v * 2 + (s.terminal ? 1 : 0);
        return std::hash<std::uint64_t>{}(v);
    }
};
