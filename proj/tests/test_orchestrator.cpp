#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actiongram/orchestrator.hpp"

using namespace actiongram;

namespace {

using TabularRunner = Runner<HanoiEnv, TabularEstimator<HanoiState>>;

RunConfig tiny_hanoi(int disks, int max_steps) {
    RunConfig cfg;
    cfg.env = EnvKind::hanoi;
    cfg.hanoi_disks = disks;
    cfg.hanoi_max_steps = max_steps;
    cfg.initial_random_steps = 0;
    return cfg;
}

TabularRunner make_runner(const RunConfig& cfg, std::ostream* warn = nullptr) {
    HanoiEnv env(cfg.hanoi_disks, cfg.step_penalty, cfg.hanoi_max_steps);
    return TabularRunner(env, TabularEstimator<HanoiState>(env.action_count()), cfg, warn);
}

EpisodeTrace<int> make_trace(const std::vector<std::vector<int>>& decisions, double ret) {
    EpisodeTrace<int> t;
    t.total_return = ret;
    int s = 0;
    for (const auto& prims : decisions) {
        DecisionStep<int> d;
        d.state = s;
        d.action = prims.size() == 1 ? prims[0] : 99;
        d.attempted_length = static_cast<int>(prims.size());
        for (int p : prims) {
            d.primitives.push_back(p);
            d.rewards.push_back(-1.0);
            d.next_states.push_back(++s);
            d.dones.push_back(0);
        }
        t.steps.push_back(std::move(d));
    }
    return t;
}

std::string csv_of(const RunMetrics& m) {
    std::ostringstream os;
    write_metrics_csv(os, m);
    return os.str();
}

std::string grammar_text_of(const RunMetrics& m) {
    std::ostringstream os;
    write_grammar_snapshots(os, m);
    return os.str();
}

}  // namespace

TEST_CASE("config validation rejects bad values") {
    RunConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    RunConfig bad = cfg;
    bad.gamma = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.env = EnvKind::grid;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // no map

    bad = cfg;
    bad.env = EnvKind::grid;
    bad.grid_map = "S.\n.";  // ragged
    CHECK_THROWS(bad.validate());

    bad = cfg;
    bad.eps_min = 0.5;
    bad.eps_start = 0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.k = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.hanoi_disks = 9;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.total_steps = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("epsilon schedule: forced phases then linear decay") {
    RunConfig cfg = tiny_hanoi(3, 50);
    cfg.initial_random_steps = 100;
    cfg.eps_start = 1.0;
    cfg.eps_min = 0.05;
    cfg.eps_decay_steps = 10000;
    auto r = make_runner(cfg);

    CHECK(r.epsilon_at(0) == 1.0);
    CHECK(r.epsilon_at(99) == 1.0);
    CHECK(r.epsilon_at(100) == Catch::Approx(1.0 - 0.95 * 100.0 / 10000.0));
    CHECK(r.epsilon_at(5000) == Catch::Approx(1.0 - 0.95 * 0.5));
    CHECK(r.epsilon_at(10000) == Catch::Approx(0.05));
    CHECK(r.epsilon_at(50000) == Catch::Approx(0.05));
}

TEST_CASE("optimal episode length comes from the env unless overridden") {
    RunConfig cfg = tiny_hanoi(3, 50);
    CHECK(make_runner(cfg).optimal_length() == 7);

    cfg.optimal_episode_length = 3;
    CHECK(make_runner(cfg).optimal_length() == 3);

    GridSpec spec = GridSpec::parse_text("S...G");
    GridEnv env(spec);
    RunConfig gcfg;
    Runner<GridEnv, TabularEstimator<GridState>> gr(
        env, TabularEstimator<GridState>(env.action_count()), gcfg);
    CHECK(gr.optimal_length() == 4);
}

TEST_CASE("evaluation cadence flags every eval_period-th episode") {
    RunConfig cfg = tiny_hanoi(3, 20);
    cfg.eval_period = 3;
    cfg.total_steps = 400;
    cfg.grammar_iterations = 0;
    cfg.seed = 5;
    auto r = make_runner(cfg);
    r.run_all();

    const RunMetrics& m = r.metrics();
    REQUIRE(!m.episodes.empty());
    std::vector<int> eval_episodes;
    for (const auto& e : m.episodes) {
        CHECK(e.eval == (e.episode % 3 == 0));
        if (e.eval) eval_episodes.push_back(e.episode);
    }
    REQUIRE(m.evals.size() == eval_episodes.size());
    for (std::size_t i = 0; i < m.evals.size(); ++i)
        CHECK(m.evals[i].episode == eval_episodes[i]);
}

TEST_CASE("the trace store keeps only the newest evaluation episodes") {
    RunConfig cfg = tiny_hanoi(3, 10);
    cfg.evaluation_episodes = 2;
    auto r = make_runner(cfg);
    r.run_episode(true);
    r.run_episode(true);
    CHECK(r.no_exploration_traces().size() == 2);
    r.run_episode(true);
    CHECK(r.no_exploration_traces().size() == 2);
    r.run_episode(false);
    CHECK(r.no_exploration_traces().size() == 2);
}

TEST_CASE("grammar identification admits macros and grows every consumer") {
    RunConfig cfg = tiny_hanoi(3, 20);
    cfg.post_inference_random_steps = 500;
    cfg.eps_decay_steps = 10000;
    auto r = make_runner(cfg);

    // Greedy play on an all-zero estimator repeats action 0, so the
    // evaluation trace is a constant stream and the grammar must find runs.
    r.run_episode(true);
    REQUIRE(r.global_step() == 20);
    r.identify_action_grammar();

    const RunMetrics& m = r.metrics();
    REQUIRE(m.snapshots.size() == 1);
    CHECK(m.snapshots[0].step == 20);
    CHECK(m.snapshots[0].iteration == 1);
    CHECK(m.snapshots[0].grammar_text.rfind("start:", 0) == 0);
    REQUIRE(!m.snapshots[0].added.empty());

    int n = r.actions().size();
    CHECK(n > r.actions().primitive_count());
    CHECK(r.online().action_count() == n);
    CHECK(r.buffer().action_count() == n);
    for (const MacroBinding& b : m.snapshots[0].added) {
        CHECK(b.primitives.size() >= 2);
        for (int p : b.primitives) CHECK(p == 0);
    }

    // new actions force exploration for a while
    CHECK(r.epsilon_at(r.global_step()) == 1.0);
    CHECK(r.epsilon_at(r.global_step() + 499) == 1.0);
    CHECK(r.epsilon_at(r.global_step() + 500) < 1.0);
}

TEST_CASE("a seeded trace of the seven-move loop yields the four tower macros") {
    RunConfig cfg = tiny_hanoi(3, 500);
    auto r = make_runner(cfg);

    const std::vector<int> moves{1, 0, 5, 1, 2, 3, 1, 0, 5, 4, 2, 5, 1, 0, 5, 1,
                                 2, 3, 1, 2, 5, 4, 2, 3, 1, 0, 5, 1, 2, 3, 1};
    EpisodeTrace<HanoiState> t;
    for (int a : moves) {
        DecisionStep<HanoiState> d;
        d.state = HanoiState{};
        d.action = a;
        d.primitives = {a};
        d.rewards = {-1.0};
        d.next_states = {HanoiState{}};
        d.dones = {0};
        t.steps.push_back(std::move(d));
    }
    r.add_no_exploration_trace(std::move(t));
    r.identify_action_grammar();

    REQUIRE(r.actions().macro_count() == 4);
    std::set<std::vector<int>> got;
    for (int a = 6; a < r.actions().size(); ++a) got.insert(r.actions().macro_primitives(a));
    std::set<std::vector<int>> want{{1, 2}, {4, 2}, {1, 0, 5}, {1, 0, 5, 1, 2, 3}};
    CHECK(got == want);
}

TEST_CASE("grammar iteration without evaluation traces is skipped with a warning") {
    RunConfig cfg = tiny_hanoi(3, 20);
    cfg.grammar_iterations = 1;
    cfg.steps_before_grammar = 1;
    std::ostringstream warn;
    auto r = make_runner(cfg, &warn);
    r.run_episode(false);
    REQUIRE(r.grammar_pending());
    r.identify_action_grammar();

    CHECK(warn.str().find("skipped") != std::string::npos);
    CHECK(r.metrics().snapshots.empty());
    CHECK(r.actions().size() == 6);
    CHECK_FALSE(r.grammar_pending());
}

TEST_CASE("a one-step evaluation trace is too short for inference") {
    RunConfig cfg = tiny_hanoi(3, 1);
    std::ostringstream warn;
    auto r = make_runner(cfg, &warn);
    r.run_episode(true);
    r.identify_action_grammar();
    CHECK(warn.str().find("not enough primitive steps") != std::string::npos);
    CHECK(r.metrics().snapshots.empty());
}

TEST_CASE("grammar triggers respect the step boundary") {
    RunConfig cfg = tiny_hanoi(3, 20);
    cfg.steps_before_grammar = 50;
    cfg.grammar_iterations = 2;
    cfg.eval_period = 1;
    cfg.total_steps = 400;
    cfg.seed = 3;
    auto r = make_runner(cfg);
    r.run_all();

    const RunMetrics& m = r.metrics();
    REQUIRE(m.snapshots.size() == 2);
    CHECK(m.snapshots[0].iteration == 1);
    CHECK(m.snapshots[1].iteration == 2);
    CHECK(m.snapshots[0].step >= 50);
    CHECK(m.snapshots[1].step >= 100);
    CHECK(m.snapshots[1].step > m.snapshots[0].step);
}

TEST_CASE("no learning happens during the initial random phase") {
    RunConfig cfg = tiny_hanoi(2, 20);
    cfg.initial_random_steps = 10000;
    cfg.total_steps = 300;
    cfg.grammar_iterations = 0;
    cfg.seed = 9;
    auto r = make_runner(cfg);
    r.run_all();
    CHECK(r.online().state_count() == 0);
    CHECK(r.buffer().size() > 0);

    RunConfig learn_cfg = cfg;
    learn_cfg.initial_random_steps = 0;
    learn_cfg.batch_size = 4;
    auto r2 = make_runner(learn_cfg);
    r2.run_all();
    CHECK(r2.online().state_count() > 0);
}

TEST_CASE("the run never exceeds its primitive step budget") {
    RunConfig cfg = tiny_hanoi(3, 100);
    cfg.total_steps = 777;
    cfg.steps_before_grammar = 200;
    cfg.grammar_iterations = 2;
    cfg.eval_period = 2;
    cfg.seed = 21;
    auto r = make_runner(cfg);
    r.run_all();
    CHECK(r.global_step() == 777);
    CHECK(r.metrics().total_primitive_steps == 777);
    CHECK(r.metrics().episodes.back().end_step == 777);
}

TEST_CASE("attempted equals executed when abandonment is off") {
    RunConfig cfg = tiny_hanoi(3, 50);
    cfg.total_steps = 1500;
    cfg.steps_before_grammar = 300;
    cfg.grammar_iterations = 2;
    cfg.eval_period = 2;
    cfg.abandon_enabled = false;
    cfg.seed = 13;
    auto r = make_runner(cfg);
    r.run_all();
    CHECK(r.actions().macro_count() > 0);
    CHECK(r.metrics().attempted_total == r.metrics().executed_total);
}

TEST_CASE("attempted never undercounts executed") {
    RunConfig cfg = tiny_hanoi(3, 50);
    cfg.total_steps = 1500;
    cfg.steps_before_grammar = 300;
    cfg.grammar_iterations = 2;
    cfg.eval_period = 2;
    cfg.abandon_enabled = true;
    cfg.seed = 13;
    auto r = make_runner(cfg);
    r.run_all();
    CHECK(r.metrics().attempted_total >= r.metrics().executed_total);
    CHECK(r.metrics().executed_total == r.metrics().total_primitive_steps);
}

TEST_CASE("one-disk tower is learned to optimality and stops early") {
    RunConfig cfg;
    cfg.env = EnvKind::hanoi;
    cfg.hanoi_disks = 1;
    cfg.hanoi_max_steps = 30;
    cfg.total_steps = 5000;
    cfg.initial_random_steps = 200;
    cfg.eps_decay_steps = 500;
    cfg.alpha = 0.5;
    cfg.batch_size = 16;
    cfg.eval_period = 5;
    cfg.grammar_iterations = 0;
    cfg.early_stop_on_optimal = true;
    cfg.seed = 7;

    RunMetrics m = run(cfg);
    REQUIRE(m.first_solve_step.has_value());
    REQUIRE(m.first_optimal_eval_step.has_value());
    CHECK(*m.first_solve_step <= *m.first_optimal_eval_step);
    CHECK(*m.first_optimal_eval_step < 5000);
    REQUIRE(!m.evals.empty());
    CHECK(m.evals.back().solved);
    CHECK(m.evals.back().length == 1);
    CHECK(m.evals.back().score == 100.0);
}

TEST_CASE("identical seeds replay byte-identical metrics") {
    RunConfig cfg;
    cfg.env = EnvKind::hanoi;
    cfg.hanoi_disks = 2;
    cfg.hanoi_max_steps = 60;
    cfg.total_steps = 2500;
    cfg.initial_random_steps = 300;
    cfg.eps_decay_steps = 1500;
    cfg.steps_before_grammar = 800;
    cfg.grammar_iterations = 2;
    cfg.eval_period = 5;
    cfg.batch_size = 16;
    cfg.buffer_capacity = 2000;
    cfg.alpha = 0.3;
    cfg.seed = 11;

    RunMetrics a = run(cfg);
    RunMetrics b = run(cfg);
    CHECK(csv_of(a) == csv_of(b));
    CHECK(grammar_text_of(a) == grammar_text_of(b));

    cfg.seed = 12;
    RunMetrics c = run(cfg);
    CHECK(csv_of(a) != csv_of(c));
}

TEST_CASE("every env and estimator pairing runs") {
    RunConfig cfg;
    cfg.total_steps = 200;
    cfg.grammar_iterations = 0;
    cfg.hanoi_max_steps = 25;
    cfg.seed = 2;

    for (EstimatorKind est : {EstimatorKind::tabular, EstimatorKind::linear}) {
        cfg.env = EnvKind::hanoi;
        cfg.estimator = est;
        RunMetrics m = run(cfg);
        CHECK(m.total_primitive_steps == 200);
        CHECK(!m.episodes.empty());

        cfg.env = EnvKind::grid;
        cfg.grid_map = "S...G";
        RunMetrics g = run(cfg);
        CHECK(g.total_primitive_steps == 200);
        CHECK(!g.episodes.empty());
    }
}

TEST_CASE("feature maps are sparse one-hots with a bias") {
    HanoiState s;
    s.n_disks = 2;
    s.rod_of = {0, 2, 0, 0, 0, 0, 0, 0};
    std::vector<double> phi = hanoi_features(2, s);
    CHECK(phi == std::vector<double>{1, 0, 0, 0, 0, 1, 1});

    GridState g{2, 1, false};
    CHECK(grid_features(3, 2, g) == std::vector<double>{0, 0, 1, 0, 1, 1});
}

TEST_CASE("episode streams concatenate with unique sentinels") {
    auto t1 = make_trace({{0, 1}, {2}}, -3.0);
    auto t2 = make_trace({{3}}, -1.0);
    auto t3 = make_trace({{4}}, -1.0);

    std::vector<const EpisodeTrace<int>*> two{&t1, &t2};
    CHECK(concat_primitive_streams(two, 6) == std::vector<int>{0, 1, 2, 6, 3});

    std::vector<const EpisodeTrace<int>*> three{&t1, &t2, &t3};
    CHECK(concat_primitive_streams(three, 6) == std::vector<int>{0, 1, 2, 6, 3, 7, 4});
}

TEST_CASE("best traces keep the top fifth by return, at least one") {
    std::deque<EpisodeTrace<int>> store;
    for (double ret : {1.0, 5.0, 3.0, 2.0, 4.0}) store.push_back(make_trace({{0}}, ret));
    auto best = best_traces(store);
    REQUIRE(best.size() == 1);
    CHECK(best[0]->total_return == 5.0);

    store.push_back(make_trace({{1}}, 0.0));
    best = best_traces(store);
    REQUIRE(best.size() == 2);
    CHECK(best[0]->total_return == 5.0);
    CHECK(best[1]->total_return == 4.0);

    std::deque<EpisodeTrace<int>> tied;
    tied.push_back(make_trace({{0}}, 2.0));
    tied.push_back(make_trace({{1}}, 2.0));
    best = best_traces(tied);
    REQUIRE(best.size() == 1);
    CHECK(best[0] == &tied[0]);
}

TEST_CASE("metrics csv interleaves eval rows after their episodes") {
    RunMetrics m;
    m.episodes.push_back({1, 20, -20.0, 20, false, false, 20, 20, 6});
    m.episodes.push_back({2, 27, 94.0, 7, true, true, 7, 7, 6});
    m.evals.push_back({2, 27, 94.0, 7, true, 7, 7, 6});

    CHECK(csv_of(m) ==
          "# actiongram-metrics v1\n"
          "kind,episode,end_step,return,length,solved,eval,attempted,executed,actions\n"
          "episode,1,20,-20,20,0,0,20,20,6\n"
          "episode,2,27,94,7,1,1,7,7,6\n"
          "eval,2,27,94,7,1,1,7,7,6\n");
}

TEST_CASE("grammar snapshots serialize with their added macros") {
    RunMetrics m;
    GrammarSnapshot snap;
    snap.step = 50;
    snap.iteration = 1;
    snap.grammar_text = "start: R6 R6\nR6 -> 0 1\n";
    snap.added.push_back({6, {0, 1}});
    m.snapshots.push_back(snap);

    CHECK(grammar_text_of(m) ==
          "# step 50 iteration 1\n"
          "start: R6 R6\n"
          "R6 -> 0 1\n"
          "macro 6: 0 1\n"
          "\n");
}
