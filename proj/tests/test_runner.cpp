#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "doctest.h"
#include "paverl/runner.hpp"

using namespace paverl;
using namespace paverl::runner;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

rewardlca::CostCatalog full_catalog() {
    rewardlca::CostCatalog cat;
    for (const domain::MaintenanceAction& a : domain::build_action_catalog()) {
        rewardlca::ActionCost c;
        if (a.id != 0) {
            c.economic_cost = 100.0 * a.id;
            c.emissions.production[static_cast<std::size_t>(rewardlca::Pollutant::Co2)] =
                20.0 * a.id;
        }
        cat.by_action_id[a.id] = c;
    }
    return cat;
}

// Small fleet and short horizon keep orchestration tests fast.
TrainingSetup small_setup(int segments = 4, int horizon = 5) {
    TrainingSetup setup;
    setup.cost_catalog = full_catalog();
    setup.case_study.segment_count = segments;
    setup.case_study.horizon_years = horizon;
    return setup;
}

neural::Mlp random_policy(std::uint64_t seed) {
    return neural::mlp_new({domain::kAgentFeatureCount, 8, 32}, neural::Head::Softmax, seed);
}

}  // namespace

TEST_CASE("case study config validates and round-trips") {
    CaseStudyConfig cfg;
    CHECK_NOTHROW(validate(cfg));
    CHECK(cfg.segment_count == 46);
    CHECK(cfg.start_year == 2021);

    CaseStudyConfig bad = cfg;
    bad.segment_count = 0;
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = cfg;
    bad.lanes = 0;
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = cfg;
    bad.initial_ranges.iri_min = 2.0;  // above iri_max
    CHECK_THROWS_AS(validate(bad), ConfigError);

    cfg.segment_count = 12;
    cfg.start_year = 2025;
    cfg.initial_ranges.esal_max = 7e5;
    const std::string path = "/tmp/paverl_test_case_study.json";
    save_case_study_config(cfg, path);
    const CaseStudyConfig back = load_case_study_config(path);
    CHECK(back.segment_count == 12);
    CHECK(back.start_year == 2025);
    CHECK(back.initial_ranges.esal_max == 7e5);
    CHECK(back.wet == cfg.wet);
    std::remove(path.c_str());
}

TEST_CASE("generated fleets are deterministic, in range, and correctly flagged") {
    const CaseStudyConfig cfg;
    const auto fleet = generate_case_study(cfg, 9);
    const auto fleet2 = generate_case_study(cfg, 9);
    const auto other = generate_case_study(cfg, 10);
    REQUIRE(fleet.size() == 46);
    CHECK(fleet[7].iri == fleet2[7].iri);
    CHECK(fleet[7].traffic.annual_esal == fleet2[7].traffic.annual_esal);
    CHECK(fleet[0].iri != other[0].iri);

    const auto& r = cfg.initial_ranges;
    bool varied = false;
    for (const domain::SegmentState& s : fleet) {
        CHECK(s.iri >= r.iri_min);
        CHECK(s.iri <= r.iri_max);
        CHECK(s.rd >= r.rd_min);
        CHECK(s.rd <= r.rd_max);
        CHECK(s.traffic.annual_esal >= r.esal_min);
        CHECK(s.traffic.annual_esal <= r.esal_max);
        CHECK(s.age_years >= r.age_min);
        CHECK(s.age_years <= r.age_max);
        CHECK(s.climate.freeze_flag == "FREEZE");
        CHECK(s.climate.moisture_flag == "WET");
        CHECK(s.structure.surface.type == "AC");
        if (s.iri != fleet[0].iri) varied = true;
    }
    CHECK(varied);

    CaseStudyConfig dry = cfg;
    dry.wet = false;
    dry.freeze = false;
    const auto dry_fleet = generate_case_study(dry, 9);
    CHECK(dry_fleet[0].climate.freeze_flag == "NON-FREEZE");
    CHECK(dry_fleet[0].climate.moisture_flag == "DRY");
}

TEST_CASE("fleet geometry totals and disk round-trip") {
    const CaseStudyConfig cfg;
    CHECK(fleet_total_length_km(cfg) == 23.0);  // 46 x 500 m

    const auto fleet = generate_case_study(cfg, 4);
    const std::string path = "/tmp/paverl_test_fleet.json";
    save_fleet(fleet, path);
    const auto back = load_fleet(path);
    REQUIRE(back.size() == fleet.size());
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        CHECK(back[i].iri == fleet[i].iri);  // bit-exact through hex encoding
        CHECK(back[i].rd == fleet[i].rd);
        CHECK(back[i].traffic.annual_esal == fleet[i].traffic.annual_esal);
        CHECK(back[i].age_years == fleet[i].age_years);
        CHECK(back[i].structure.subbase.material == fleet[i].structure.subbase.material);
    }
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_fleet("/tmp/paverl_missing_fleet.json"), ConfigError);
}

TEST_CASE("the training environment follows the case-study calendar and horizon") {
    const TrainingSetup setup = small_setup(3, 7);
    rlenv::MaintenanceRlEnv env = make_training_env(setup, 5);
    CHECK(env.horizon() == 7);
    CHECK(env.action_count() == 32);
    CHECK(env.observation_size() == domain::kAgentFeatureCount);
    // Episode year 1 is the calendar year after the case-study start.
    CHECK(env.environment().config().start_year == setup.case_study.start_year + 1);

    env.reset();
    double total = 0.0;
    for (int t = 0; t < 7; ++t) total += env.step(0).reward;
    CHECK(total == 0.0);  // do-nothing matches the cached baseline exactly
}

TEST_CASE("plan reports aggregate per-year action shares that sum to 100") {
    const TrainingSetup setup = small_setup(5, 6);
    const auto fleet = generate_case_study(setup.case_study, 21);
    const neural::Mlp net = random_policy(3);
    const PlanReport report = plan_report(net, fleet, setup);

    REQUIRE(report.calendar_years.size() == 6);
    CHECK(report.calendar_years.front() == 2022);
    CHECK(report.calendar_years.back() == 2027);
    REQUIRE(report.kind_percent.size() == 6);
    for (const auto& row : report.kind_percent) {
        double sum = 0.0;
        for (double v : row) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(100.0).epsilon(1e-9));
    }
    REQUIRE(report.fleet_cost.size() == 6);
    for (double c : report.fleet_cost) CHECK(c >= 0.0);
    REQUIRE(report.segment_plans.size() == 5);
    for (const auto& plan : report.segment_plans) {
        CHECK(plan.actions.size() == 6);
        CHECK(plan.trajectory.size() == 7);
    }
}

TEST_CASE("plan CSVs have one row per year and regenerate byte-identically") {
    const TrainingSetup setup = small_setup(3, 5);
    const auto fleet = generate_case_study(setup.case_study, 2);
    const neural::Mlp net = random_policy(8);
    const auto catalog = domain::build_action_catalog();

    const PlanReport report = plan_report(net, fleet, setup);
    const std::string dist = "/tmp/paverl_test_plan_dist.csv";
    const std::string cost = "/tmp/paverl_test_plan_cost.csv";
    const std::string seg = "/tmp/paverl_test_plan_seg.csv";
    save_plan_distribution_csv(report, dist);
    save_plan_cost_csv(report, cost);
    save_segment_plan_csv(report, catalog, 1, seg);

    auto line_count = [](const std::string& path) {
        std::ifstream in(path);
        std::string line;
        int n = 0;
        while (std::getline(in, line)) ++n;
        return n;
    };
    CHECK(line_count(dist) == 6);  // header + 5 years
    CHECK(line_count(cost) == 6);
    CHECK(line_count(seg) == 6);
    CHECK_THROWS_AS(save_segment_plan_csv(report, catalog, 9, seg), ValidationError);

    // Same inputs, same bytes.
    const std::string first = slurp(dist);
    const PlanReport again = plan_report(net, fleet, setup);
    save_plan_distribution_csv(again, dist);
    CHECK(slurp(dist) == first);

    std::remove(dist.c_str());
    std::remove(cost.c_str());
    std::remove(seg.c_str());
}

TEST_CASE("sensitivity spec validates and round-trips") {
    SensitivitySpec spec;
    CHECK_NOTHROW(validate(spec));
    SensitivitySpec bad = spec;
    bad.multipliers = {2.0, -1.0};
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = spec;
    bad.replications = 0;
    CHECK_THROWS_AS(validate(bad), ConfigError);

    spec.multipliers = {1.5, 2.5};
    spec.replications = 3;
    spec.retrain = true;
    const std::string path = "/tmp/paverl_test_sens_spec.json";
    save_sensitivity_spec(spec, path);
    const SensitivitySpec back = load_sensitivity_spec(path);
    CHECK(back.multipliers == std::vector<double>{1.5, 2.5});
    CHECK(back.replications == 3);
    CHECK(back.retrain == true);
    std::remove(path.c_str());
}

TEST_CASE("sensitivity prepends the reference multiplier and pairs replications") {
    const TrainingSetup setup = small_setup(3, 4);
    const neural::Mlp net = random_policy(12);
    SensitivitySpec spec;
    spec.multipliers = {2.0, 1.0};  // the explicit 1.0 must not duplicate the reference
    spec.replications = 2;
    spec.seed = 4;

    const auto rows = sensitivity(net, setup, spec);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].multiplier == 1.0);
    CHECK(rows[1].multiplier == 2.0);
    CHECK(rows[0].replications == 2);
    CHECK(rows[0].std_final_effcost >= 0.0);

    // Deterministic: identical rows on a second evaluation.
    const auto rows2 = sensitivity(net, setup, spec);
    CHECK(rows2[0].mean_final_effcost == rows[0].mean_final_effcost);
    CHECK(rows2[1].mean_final_effcost == rows[1].mean_final_effcost);

    const std::string path = "/tmp/paverl_test_sens.csv";
    save_sensitivity_csv(rows, path);
    std::ifstream in(path);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) ++n;
    CHECK(n == 3);
    std::remove(path.c_str());
}

TEST_CASE("training runs write a checkpoint and curve, and the actor loads back") {
    const TrainingSetup setup = small_setup(3, 5);
    const std::string dir = "/tmp/paverl_test_run_ppo";
    std::filesystem::remove_all(dir);

    agents::PpoConfig pcfg;
    pcfg.steps_per_update = 8;
    pcfg.executors = 1;
    pcfg.minibatch_size = 8;
    pcfg.epochs = 1;
    pcfg.iterations = 2;
    pcfg.policy_hidden = {8};
    pcfg.value_hidden = {8};
    const TrainingRunResult res = run_training(setup, pcfg, 3, dir);
    CHECK(std::filesystem::exists(res.checkpoint_path));
    CHECK(std::filesystem::exists(res.curve_csv_path));

    const LoadedActor actor = load_actor(res.checkpoint_path);
    CHECK(actor.algo == "ppo");
    CHECK(actor.net.input_size() == domain::kAgentFeatureCount);
    CHECK(actor.net.output_size() == 32);

    // The loaded policy drives plan extraction end to end.
    const auto fleet = generate_case_study(setup.case_study, 21);
    const PlanReport report = plan_report(actor.net, fleet, setup);
    CHECK(report.segment_plans.size() == 3);
    std::filesystem::remove_all(dir);

    const std::string ddir = "/tmp/paverl_test_run_dqn";
    std::filesystem::remove_all(ddir);
    agents::DqnConfig dcfg;
    dcfg.episodes = 2;
    dcfg.batch_size = 4;
    dcfg.warmup_transitions = 4;
    dcfg.replay_capacity = 64;
    dcfg.target_sync_period = 10;
    dcfg.hidden = {8};
    const TrainingRunResult dres = run_training(setup, dcfg, 3, ddir);
    const LoadedActor dactor = load_actor(dres.checkpoint_path);
    CHECK(dactor.algo == "dqn");
    CHECK(dactor.net.output_size() == 32);
    std::filesystem::remove_all(ddir);

    CHECK_THROWS_AS(load_actor("/tmp/paverl_no_such_checkpoint.json"), ConfigError);
    const std::string junk = "/tmp/paverl_test_junk.json";
    std::ofstream(junk) << "{\"format\": \"other\"}\n";
    CHECK_THROWS_AS(load_actor(junk), ConfigError);
    std::remove(junk.c_str());
}

TEST_CASE("agent comparison shares one step budget and summarizes both curves") {
    CompareSpec spec;
    spec.env_step_budget = 320;
    spec.seed = 6;
    spec.ppo.steps_per_update = 16;
    spec.ppo.executors = 2;
    spec.ppo.minibatch_size = 32;
    spec.ppo.epochs = 2;
    spec.ppo.policy_hidden = {8};
    spec.ppo.value_hidden = {8};
    spec.dqn.batch_size = 8;
    spec.dqn.warmup_transitions = 8;
    spec.dqn.replay_capacity = 64;
    spec.dqn.target_sync_period = 10;
    spec.dqn.hidden = {8};

    const rlenv::ChainEnv proto(1);
    const CompareReport report = compare_agents(proto, spec);

    // 10 PPO iterations of 32 steps; DQN stops exactly at 16 episodes x 20.
    CHECK(report.ppo.env_steps == 320);
    CHECK(report.dqn.env_steps == 320);
    CHECK(report.ppo.step_budget == 320);
    CHECK(report.curve.size() == 10 + 16);
    CHECK(report.curve.front().agent == "ppo");
    CHECK(report.curve.back().agent == "dqn");
    const bool winner_valid = report.fewer_steps_agent == "ppo" ||
                              report.fewer_steps_agent == "dqn" ||
                              report.fewer_steps_agent == "tie";
    CHECK(winner_valid);

    const std::string curve = "/tmp/paverl_test_compare_curve.csv";
    const std::string summary = "/tmp/paverl_test_compare_summary.csv";
    save_compare_curve_csv(report, curve);
    save_compare_summary_csv(report, summary);
    const std::string first_curve = slurp(curve);
    const std::string first_summary = slurp(summary);

    // Re-running the comparison regenerates byte-identical reports.
    const CompareReport again = compare_agents(proto, spec);
    save_compare_curve_csv(again, curve);
    save_compare_summary_csv(again, summary);
    CHECK(slurp(curve) == first_curve);
    CHECK(slurp(summary) == first_summary);
    std::remove(curve.c_str());
    std::remove(summary.c_str());

    CompareSpec bad = spec;
    bad.env_step_budget = 0;
    CHECK_THROWS_AS(compare_agents(proto, bad), ConfigError);
    bad = spec;
    bad.threshold_fraction = 0.0;
    CHECK_THROWS_AS(compare_agents(proto, bad), ConfigError);
}

TEST_CASE("run directories are timestamped under the base path") {
    const std::string base = "/tmp/paverl_test_runs";
    std::filesystem::remove_all(base);
    const std::string dir = make_run_dir(base, 7);
    CHECK(std::filesystem::is_directory(dir));
    const std::regex pattern("run_\\d{8}-\\d{6}_7$");
    CHECK(std::regex_search(dir, pattern));
    CHECK(dir.rfind(base + "/", 0) == 0);
    std::filesystem::remove_all(base);
}
