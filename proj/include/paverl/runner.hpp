#pragma once

#include <array>
#include <string>
#include <vector>

#include "paverl/agents.hpp"
#include "paverl/common.hpp"
#include "paverl/domain.hpp"
#include "paverl/envmodel.hpp"
#include "paverl/rewardlca.hpp"
#include "paverl/rlenv.hpp"

// Experiment orchestration: case-study generation, training campaigns with
// checkpointing, plan reports, the traffic sensitivity analysis, and the
// PPO-vs-DQN comparison. Every report is a pure function of (checkpoint,
// config, seed), so re-running regenerates byte-identical files.
namespace paverl::runner {

// ---------------------------------------------------------------------------
// Case study
// ---------------------------------------------------------------------------

// A hypothetical six-lane highway corridor split into equal-length segments,
// all wet/freeze, with per-segment initial conditions drawn uniformly from
// good-condition ranges.
struct CaseStudyConfig {
    int segment_count = 46;
    double segment_length_m = 500.0;
    double lane_width_m = 3.66;
    int lanes = 6;  // three per direction
    bool wet = true;
    bool freeze = true;
    int horizon_years = 20;
    int start_year = 2021;  // episode year 1 is labeled start_year + 1
    envmodel::RandomizedRanges initial_ranges{
        0.7, 1.4,      // iri, m/km
        1.0, 4.0,      // rd, mm
        3e5, 9e5,      // annual esal
        8e3, 2.4e4,    // annual aadt
        0.10, 0.30,    // truck ratio
        700.0, 1300.0, // precipitation, mm (wet)
        40.0, 110.0,   // freeze-thaw cycles (freeze)
        0.0, 6.0       // age, years
    };
};

// Throws ConfigError on count < 1, non-positive lengths, lanes < 1, or
// horizon < 1.
void validate(const CaseStudyConfig& cfg);

CaseStudyConfig load_case_study_config(const std::string& path);
void save_case_study_config(const CaseStudyConfig& cfg, const std::string& path);

// Deterministic per seed: one good-condition segment per slot, geometry and
// climate flags from the config.
std::vector<domain::SegmentState> generate_case_study(const CaseStudyConfig& cfg,
                                                      std::uint64_t seed);

double fleet_total_length_km(const CaseStudyConfig& cfg);

// Bit-exact fleet round-trip (JSON, hex-encoded numerics).
void save_fleet(const std::vector<domain::SegmentState>& fleet, const std::string& path);
std::vector<domain::SegmentState> load_fleet(const std::string& path);

// ---------------------------------------------------------------------------
// Training campaigns
// ---------------------------------------------------------------------------

// Everything a training run needs besides the agent configuration.
struct TrainingSetup {
    envmodel::EnvironmentConfig env_cfg = envmodel::EnvironmentConfig::defaults();
    domain::CodeBook codes = domain::CodeBook::defaults();
    std::optional<envmodel::SurrogatePair> surrogate;  // required in surrogate mode
    rewardlca::RewardConfig reward_cfg;
    rewardlca::CostCatalog cost_catalog;
    CaseStudyConfig case_study;
};

// The environment the agents train on: per-segment episodes over segments
// drawn from the generated fleet.
rlenv::MaintenanceRlEnv make_training_env(const TrainingSetup& setup, std::uint64_t seed);

struct TrainingRunResult {
    std::string checkpoint_path;  // final checkpoint (rewritten in place)
    std::string curve_csv_path;   // reward curve, one row per iteration/episode
};

// Trains into `out_dir` (checkpoint.json + reward_curve.csv), checkpointing
// every `checkpoint_every` iterations/episodes and resuming from
// `resume_from` when non-empty. An agent abort is rethrown with the last
// checkpoint path appended.
TrainingRunResult run_training(const TrainingSetup& setup, const agents::PpoConfig& cfg,
                               std::uint64_t seed, const std::string& out_dir,
                               int checkpoint_every = 50, const std::string& resume_from = "");
TrainingRunResult run_training(const TrainingSetup& setup, const agents::DqnConfig& cfg,
                               std::uint64_t seed, const std::string& out_dir,
                               int checkpoint_every = 50, const std::string& resume_from = "");

// Reads either trainer's checkpoint and returns the greedy actor: the policy
// net (ppo) or the q-net (dqn), plus which algorithm wrote it.
struct LoadedActor {
    std::string algo;  // "ppo" or "dqn"
    neural::Mlp net;
};
LoadedActor load_actor(const std::string& checkpoint_path);

// ---------------------------------------------------------------------------
// Plan reports
// ---------------------------------------------------------------------------

constexpr int kKindCount = 8;  // DoNothing + 7 treatment kinds

struct PlanReport {
    std::vector<int> calendar_years;                      // per episode year
    std::vector<std::array<double, kKindCount>> kind_percent;  // rows sum to ~100
    std::vector<double> fleet_cost;                       // discounted, per year
    std::vector<agents::PlanResult> segment_plans;        // drill-down, per segment
};

// Greedy rollout of every fleet segment under the actor network.
PlanReport plan_report(const neural::Mlp& net, const std::vector<domain::SegmentState>& fleet,
                       const TrainingSetup& setup);

// year, calendar_year, one percentage column per action kind, row_sum.
void save_plan_distribution_csv(const PlanReport& report, const std::string& path);
// year, calendar_year, fleet_cost, then one column per segment.
void save_plan_cost_csv(const PlanReport& report, const std::string& path);
// Drill-down for one segment: year, action id/kind/thickness/material, cost,
// iri, rd. Throws ValidationError on a bad segment index.
void save_segment_plan_csv(const PlanReport& report,
                           const std::vector<domain::MaintenanceAction>& catalog,
                           std::size_t segment_index, const std::string& path);

// ---------------------------------------------------------------------------
// Traffic sensitivity
// ---------------------------------------------------------------------------

struct SensitivitySpec {
    std::vector<double> multipliers = {1.5, 2.0, 2.5, 3.0, 3.5};  // 1.0 added automatically
    int replications = 5;
    std::uint64_t seed = 0;
    // Retraining per multiplier isolates policy adaptation; the default
    // reuses one trained policy so only the environment changes.
    bool retrain = false;
};

// Throws ConfigError on non-positive multipliers or replications < 1.
void validate(const SensitivitySpec& spec);

SensitivitySpec load_sensitivity_spec(const std::string& path);
void save_sensitivity_spec(const SensitivitySpec& spec, const std::string& path);

struct SensitivityRow {
    double multiplier = 1.0;
    double mean_final_effcost = 0.0;  // over replications (fleet mean each)
    double std_final_effcost = 0.0;
    int replications = 0;
};

// Scales annual_aadt and annual_esal by each multiplier (1.0 prepended as the
// reference row), regenerates the replication fleets, rolls out the greedy
// policy, and aggregates final_effcost. No other fleet field is touched.
// `ppo_cfg` is only used when spec.retrain is set.
std::vector<SensitivityRow> sensitivity(const neural::Mlp& net, const TrainingSetup& setup,
                                        const SensitivitySpec& spec,
                                        const agents::PpoConfig& ppo_cfg = {});

void save_sensitivity_csv(const std::vector<SensitivityRow>& rows, const std::string& path);

// ---------------------------------------------------------------------------
// PPO vs DQN comparison
// ---------------------------------------------------------------------------

struct CompareSpec {
    long env_step_budget = 20000;  // shared by both agents
    std::uint64_t seed = 0;
    double threshold_fraction = 0.9;  // of the final mean, for steps-to-threshold
    agents::PpoConfig ppo;
    agents::DqnConfig dqn;
};

struct AgentCurvePoint {
    std::string agent;  // "ppo" or "dqn"
    long env_steps = 0;
    double reward = 0.0;  // mean episode reward at this point
};

struct AgentSummary {
    std::string agent;
    long step_budget = 0;   // the shared target
    long env_steps = 0;     // actually consumed (first boundary at/past budget)
    double final_mean_reward = 0.0;  // mean over the final quartile
    long steps_to_threshold = -1;    // -1 = never reached
    double curve_variance = 0.0;     // over the final quartile
};

struct CompareReport {
    std::vector<AgentCurvePoint> curve;  // both agents, one list
    AgentSummary ppo;
    AgentSummary dqn;
    std::string fewer_steps_agent;  // "ppo", "dqn", or "tie"
};

// Trains both agents on clones of the prototype under the same step budget.
CompareReport compare_agents(const rlenv::RlEnv& env_prototype, const CompareSpec& spec);

// One CSV, curve rows keyed by agent name.
void save_compare_curve_csv(const CompareReport& report, const std::string& path);
// Summary rows (one per agent) plus the winner flag.
void save_compare_summary_csv(const CompareReport& report, const std::string& path);

// ---------------------------------------------------------------------------
// Run directories
// ---------------------------------------------------------------------------

// Creates <base>/run_<UTC timestamp>_<seed> (parents included) and returns
// its path. Only the directory name carries the timestamp; file contents
// stay reproducible.
std::string make_run_dir(const std::string& base, std::uint64_t seed);

}  // namespace paverl::runner
