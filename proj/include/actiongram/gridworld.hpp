#pragma once
// Deterministic four-connected gridworld parsed from an ASCII map:
// '#' wall, '.' open, 'S' start, 'G' goal. Bumping a wall or the map edge is
// a no-op that still costs the step penalty.

#include <cstdint>
#include <functional>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "actiongram/env.hpp"

namespace actiongram {

struct GridState {
    int x = 0;
    int y = 0;
    bool terminal = false;

    friend bool operator==(const GridState&, const GridState&) = default;
};

struct GridSpec {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> walls;  // row-major
    int start_x = 0, start_y = 0;
    int goal_x = 0, goal_y = 0;

    bool wall_at(int x, int y) const { return walls[static_cast<std::size_t>(y) * width + x] != 0; }

    static GridSpec parse(std::istream& in) {
        std::vector<std::string> rows;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            rows.push_back(line);
        }
        while (!rows.empty() && rows.back().empty()) rows.pop_back();
        if (rows.empty()) throw std::invalid_argument("empty map");

        GridSpec spec;
        spec.height = static_cast<int>(rows.size());
        spec.width = static_cast<int>(rows[0].size());
        if (spec.width == 0) throw std::invalid_argument("empty map row");
        spec.walls.assign(static_cast<std::size_t>(spec.width) * spec.height, 0);

        int starts = 0, goals = 0;
        for (int y = 0; y < spec.height; ++y) {
            if (static_cast<int>(rows[y].size()) != spec.width)
                throw std::invalid_argument("ragged map row");
            for (int x = 0; x < spec.width; ++x) {
                switch (rows[y][x]) {
                    case '#': spec.walls[static_cast<std::size_t>(y) * spec.width + x] = 1; break;
                    case '.': break;
                    case 'S': spec.start_x = x; spec.start_y = y; ++starts; break;
                    case 'G': spec.goal_x = x; spec.goal_y = y; ++goals; break;
                    default: throw std::invalid_argument("bad map character");
                }
            }
        }
        if (starts != 1) throw std::invalid_argument("map needs exactly one start");
        if (goals != 1) throw std::invalid_argument("map needs exactly one goal");
        return spec;
    }

    static GridSpec parse_text(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }
};

class GridEnv {
public:
    using State = GridState;

    // 0 up, 1 down, 2 left, 3 right
    static constexpr int kDx[4] = {0, 0, -1, 1};
    static constexpr int kDy[4] = {-1, 1, 0, 0};

    explicit GridEnv(GridSpec spec, double step_penalty = -1.0)
        : spec_(std::move(spec)), step_penalty_(step_penalty) {}

    State reset() const { return {spec_.start_x, spec_.start_y, false}; }

    StepResult<State> step(const State& s, int action) const {
        if (s.terminal) throw std::logic_error("step on terminal state");
        if (action < 0 || action >= action_count()) throw std::invalid_argument("bad action");

        int nx = s.x + kDx[action];
        int ny = s.y + kDy[action];
        bool blocked = nx < 0 || nx >= spec_.width || ny < 0 || ny >= spec_.height ||
                       spec_.wall_at(nx, ny);
        if (blocked) return {s, step_penalty_, false};

        State next{nx, ny, false};
        if (nx == spec_.goal_x && ny == spec_.goal_y) {
            next.terminal = true;
            return {next, 100.0, true};
        }
        return {next, step_penalty_, false};
    }

    int action_count() const { return 4; }
    int max_episode_steps() const { return 4 * spec_.width * spec_.height; }
    const GridSpec& spec() const { return spec_; }

private:
    GridSpec spec_;
    double step_penalty_;
};

inline std::string to_string(const GridState& s) {
    return "(" + std::to_string(s.x) + "," + std::to_string(s.y) + ")";
}

}  // namespace actiongram

template <>
struct std::hash<actiongram::GridState> {
    std::size_t operator()(const actiongram::GridState& s) const noexcept {
        auto v = (static_cast<std::uint64_t>(s.x) << 24) ^ static_cast<std::uint64_t>(s.y) ^
                 (s.terminal ? 1ull << 60 : 0ull);
        return std::hash<std::uint64_t>{}(v);
    }
};
