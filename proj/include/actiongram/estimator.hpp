#pragma once
// Q-value estimators over a growable discrete action set. Expansion can seed
// a new action's values from an existing action (transfer) or from scratch.

#include <algorithm>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace actiongram {

template <typename State, typename Hash = std::hash<State>>
class TabularEstimator {
public:
    explicit TabularEstimator(int n_actions, double default_value = 0.0)
        : n_actions_(n_actions), default_(default_value) {
        if (n_actions < 1) throw std::invalid_argument("no actions");
    }

    int action_count() const { return n_actions_; }

    double value(const State& s, int a) const {
        check_action(a);
        auto it = table_.find(s);
        return it == table_.end() ? default_ : it->second[a];
    }

    void learn(const State& s, int a, double target, double alpha) {
        check_action(a);
        auto [it, fresh] = table_.try_emplace(s, n_actions_, default_);
        double& q = it->second[a];
        q += alpha * (target - q);
    }

    // sources[i] seeds new action (n_actions + i): an existing action id to
    // copy, or -1 to start from the default value.
    void expand_actions(std::span<const int> sources) {
        for (int src : sources)
            if (src < -1 || src >= n_actions_) throw std::out_of_range("bad source action");
        for (auto& [s, row] : table_) {
            row.reserve(row.size() + sources.size());
            for (int src : sources) row.push_back(src < 0 ? default_ : row[src]);
        }
        n_actions_ += static_cast<int>(sources.size());
    }

    std::size_t state_count() const { return table_.size(); }

    // Rows sorted by the printed key, one line per state.
    template <typename KeyFn>
    void dump(std::ostream& os, KeyFn key_of) const {
        std::map<std::string, const std::vector<double>*> sorted;
        for (const auto& [s, row] : table_) sorted[key_of(s)] = &row;
        for (const auto& [key, row] : sorted) {
            os << key;
            for (double v : *row) os << ' ' << v;
            os << '\n';
        }
    }

private:
    void check_action(int a) const {
        if (a < 0 || a >= n_actions_) throw std::out_of_range("unknown action");
    }

    int n_actions_;
    double default_;
    std::unordered_map<State, std::vector<double>, Hash> table_;
};

template <typename State>
class LinearEstimator {
public:
    using FeatureFn = std::function<std::vector<double>(const State&)>;

    LinearEstimator(int n_actions, int n_features, FeatureFn features)
        : n_features_(n_features), features_(std::move(features)) {
        if (n_actions < 1) throw std::invalid_argument("no actions");
        if (n_features < 1) throw std::invalid_argument("no features");
        if (!features_) throw std::invalid_argument("missing feature function");
        weights_.assign(n_actions, std::vector<double>(n_features_, 0.0));
    }

    int action_count() const { return static_cast<int>(weights_.size()); }
    int feature_count() const { return n_features_; }

    double value(const State& s, int a) const {
        check_action(a);
        auto phi = featurize(s);
        double v = 0.0;
        for (int i = 0; i < n_features_; ++i) v += weights_[a][i] * phi[i];
        return v;
    }

    void learn(const State& s, int a, double target, double alpha) {
        check_action(a);
        auto phi = featurize(s);
        double v = 0.0;
        for (int i = 0; i < n_features_; ++i) v += weights_[a][i] * phi[i];
        double err = target - v;
        for (int i = 0; i < n_features_; ++i) weights_[a][i] += alpha * err * phi[i];
    }

    void expand_actions(std::span<const int> sources) {
        int n = action_count();
        for (int src : sources)
            if (src < -1 || src >= n) throw std::out_of_range("bad source action");
        for (int src : sources)
            weights_.push_back(src < 0 ? std::vector<double>(n_features_, 0.0) : weights_[src]);
    }

    const std::vector<double>& weights(int a) const {
        check_action(a);
        return weights_[a];
    }

    template <typename KeyFn>
    void dump(std::ostream& os, KeyFn) const {
        for (std::size_t a = 0; a < weights_.size(); ++a) {
            os << 'a' << a;
            for (double v : weights_[a]) os << ' ' << v;
            os << '\n';
        }
    }

private:
    void check_action(int a) const {
        if (a < 0 || a >= action_count()) throw std::out_of_range("unknown action");
    }

    std::vector<double> featurize(const State& s) const {
        auto phi = features_(s);
        if (static_cast<int>(phi.size()) != n_features_)
            throw std::logic_error("feature size mismatch");
        return phi;
    }

    int n_features_;
    FeatureFn features_;
    std::vector<std::vector<double>> weights_;
};

}  // namespace actiongram
