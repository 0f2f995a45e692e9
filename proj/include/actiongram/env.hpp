#pragma once
// Environment protocol: pure transition functions over value-type states.

#include <concepts>

namespace actiongram {

template <typename State>
struct StepResult {
    State next_state;
    double reward = 0.0;
    bool done = false;
};

template <typename E>
concept Environment = requires(const E& e, const typename E::State& s, int a) {
    typename E::State;
    { e.reset() } -> std::same_as<typename E::State>;
    { e.step(s, a) } -> std::same_as<StepResult<typename E::State>>;
    { e.action_count() } -> std::convertible_to<int>;
    { e.max_episode_steps() } -> std::convertible_to<int>;
};

}  // namespace actiongram
