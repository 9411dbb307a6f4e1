#include "paverl/runner.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace paverl::runner {

namespace {

// Snake-case column names, one per ActionKind in id order.
const std::array<std::string, kKindCount> kKindColumns = {
    "do_nothing",
    "asphalt_concrete_overlay",
    "hot_mix_recycled_ac_overlay",
    "mill_off_ac_overlay_ac",
    "mill_existing_overlay_recycled_ac",
    "aggregate_seal_coat",
    "fog_seal_coat",
    "crack_sealing_patching",
};

// Case-study horizon and calendar override the environment defaults so the
// two configs can't drift apart; episode year 1 is labeled start_year + 1.
envmodel::EnvironmentConfig effective_env_config(const TrainingSetup& setup) {
    envmodel::EnvironmentConfig cfg = setup.env_cfg;
    cfg.horizon_years = setup.case_study.horizon_years;
    cfg.start_year = setup.case_study.start_year + 1;
    return cfg;
}

rlenv::MaintenanceRlEnv make_env(const TrainingSetup& setup, envmodel::StateSampler sampler,
                                 std::uint64_t seed) {
    envmodel::Environment env(effective_env_config(setup), setup.codes, setup.surrogate);
    return rlenv::MaintenanceRlEnv(std::move(env), std::move(sampler), setup.reward_cfg,
                                   setup.cost_catalog, seed);
}

void scale_traffic(std::vector<domain::SegmentState>& fleet, double multiplier) {
    for (domain::SegmentState& s : fleet) {
        s.traffic.annual_aadt *= multiplier;
        s.traffic.annual_esal *= multiplier;
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Case study
// ---------------------------------------------------------------------------

void validate(const CaseStudyConfig& cfg) {
    if (cfg.segment_count < 1) throw ConfigError("case study: segment count must be >= 1");
    if (!(cfg.segment_length_m > 0.0) || !(cfg.lane_width_m > 0.0)) {
        throw ConfigError("case study: lengths must be positive");
    }
    if (cfg.lanes < 1) throw ConfigError("case study: lane count must be >= 1");
    if (cfg.horizon_years < 1) throw ConfigError("case study: horizon must be >= 1");
    const auto& r = cfg.initial_ranges;
    for (auto [lo, hi] : {std::pair{r.iri_min, r.iri_max}, std::pair{r.rd_min, r.rd_max},
                          std::pair{r.esal_min, r.esal_max}, std::pair{r.aadt_min, r.aadt_max},
                          std::pair{r.truck_ratio_min, r.truck_ratio_max},
                          std::pair{r.precip_min, r.precip_max}, std::pair{r.ftc_min, r.ftc_max},
                          std::pair{r.age_min, r.age_max}}) {
        if (lo > hi) throw ConfigError("case study: inverted sampling range");
    }
}

CaseStudyConfig load_case_study_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_case_study_config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("load_case_study_config: invalid JSON: ") + e.what());
    }
    CaseStudyConfig cfg;
    cfg.segment_count = j.value("segment_count", cfg.segment_count);
    cfg.segment_length_m = j.value("segment_length_m", cfg.segment_length_m);
    cfg.lane_width_m = j.value("lane_width_m", cfg.lane_width_m);
    cfg.lanes = j.value("lanes", cfg.lanes);
    cfg.wet = j.value("wet", cfg.wet);
    cfg.freeze = j.value("freeze", cfg.freeze);
    cfg.horizon_years = j.value("horizon_years", cfg.horizon_years);
    cfg.start_year = j.value("start_year", cfg.start_year);
    if (j.contains("initial_ranges")) {
        const auto& jr = j.at("initial_ranges");
        auto& r = cfg.initial_ranges;
        r.iri_min = jr.value("iri_min", r.iri_min);
        r.iri_max = jr.value("iri_max", r.iri_max);
        r.rd_min = jr.value("rd_min", r.rd_min);
        r.rd_max = jr.value("rd_max", r.rd_max);
        r.esal_min = jr.value("esal_min", r.esal_min);
        r.esal_max = jr.value("esal_max", r.esal_max);
        r.aadt_min = jr.value("aadt_min", r.aadt_min);
        r.aadt_max = jr.value("aadt_max", r.aadt_max);
        r.truck_ratio_min = jr.value("truck_ratio_min", r.truck_ratio_min);
        r.truck_ratio_max = jr.value("truck_ratio_max", r.truck_ratio_max);
        r.precip_min = jr.value("precip_min", r.precip_min);
        r.precip_max = jr.value("precip_max", r.precip_max);
        r.ftc_min = jr.value("ftc_min", r.ftc_min);
        r.ftc_max = jr.value("ftc_max", r.ftc_max);
        r.age_min = jr.value("age_min", r.age_min);
        r.age_max = jr.value("age_max", r.age_max);
    }
    validate(cfg);
    return cfg;
}

void save_case_study_config(const CaseStudyConfig& cfg, const std::string& path) {
    nlohmann::json j;
    j["format"] = "paverl-case-study";
    j["format_version"] = 1;
    j["segment_count"] = cfg.segment_count;
    j["segment_length_m"] = cfg.segment_length_m;
    j["lane_width_m"] = cfg.lane_width_m;
    j["lanes"] = cfg.lanes;
    j["wet"] = cfg.wet;
    j["freeze"] = cfg.freeze;
    j["horizon_years"] = cfg.horizon_years;
    j["start_year"] = cfg.start_year;
    const auto& r = cfg.initial_ranges;
    j["initial_ranges"] = {
        {"iri_min", r.iri_min},     {"iri_max", r.iri_max},
        {"rd_min", r.rd_min},       {"rd_max", r.rd_max},
        {"esal_min", r.esal_min},   {"esal_max", r.esal_max},
        {"aadt_min", r.aadt_min},   {"aadt_max", r.aadt_max},
        {"truck_ratio_min", r.truck_ratio_min},
        {"truck_ratio_max", r.truck_ratio_max},
        {"precip_min", r.precip_min}, {"precip_max", r.precip_max},
        {"ftc_min", r.ftc_min},     {"ftc_max", r.ftc_max},
        {"age_min", r.age_min},     {"age_max", r.age_max},
    };
    std::ofstream out(path);
    if (!out) throw ConfigError("save_case_study_config: cannot open " + path);
    out << j.dump(2) << "\n";
}

std::vector<domain::SegmentState> generate_case_study(const CaseStudyConfig& cfg,
                                                      std::uint64_t seed) {
    validate(cfg);
    Rng rng(seed);
    const auto& r = cfg.initial_ranges;
    std::vector<domain::SegmentState> fleet;
    fleet.reserve(static_cast<std::size_t>(cfg.segment_count));
    for (int i = 0; i < cfg.segment_count; ++i) {
        domain::SegmentState s;
        s.structure.surface = {"AC", 127.0, "AC-20"};
        s.structure.binder = {"AC", 76.2, "AC-20"};
        s.structure.base = {"GB", 300.0, "CRUSHED_STONE"};
        s.structure.subbase = {"GS", 300.0, "GRAVEL"};
        s.traffic.truck_ratio = rng.uniform(r.truck_ratio_min, r.truck_ratio_max);
        s.traffic.annual_esal = rng.uniform(r.esal_min, r.esal_max);
        s.traffic.annual_aadt = rng.uniform(r.aadt_min, r.aadt_max);
        s.climate.annual_precipitation_mm = rng.uniform(r.precip_min, r.precip_max);
        s.climate.freeze_thaw_cycles = rng.uniform(r.ftc_min, r.ftc_max);
        s.climate.freeze_flag = cfg.freeze ? "FREEZE" : "NON-FREEZE";
        s.climate.moisture_flag = cfg.wet ? "WET" : "DRY";
        s.iri = rng.uniform(r.iri_min, r.iri_max);
        s.rd = rng.uniform(r.rd_min, r.rd_max);
        s.age_years = rng.uniform(r.age_min, r.age_max);
        fleet.push_back(std::move(s));
    }
    return fleet;
}

double fleet_total_length_km(const CaseStudyConfig& cfg) {
    return cfg.segment_count * cfg.segment_length_m / 1000.0;
}

void save_fleet(const std::vector<domain::SegmentState>& fleet, const std::string& path) {
    nlohmann::json j;
    j["format"] = "paverl-fleet";
    j["format_version"] = 1;
    j["segments"] = nlohmann::json::array();
    for (const domain::SegmentState& s : fleet) {
        j["segments"].push_back(nlohmann::json::parse(domain::segment_state_to_json_string(s)));
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("save_fleet: cannot open " + path);
    out << j.dump() << "\n";
}

std::vector<domain::SegmentState> load_fleet(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_fleet: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("load_fleet: invalid JSON: ") + e.what());
    }
    if (j.value("format", "") != "paverl-fleet") throw ConfigError("load_fleet: not a fleet file");
    std::vector<domain::SegmentState> fleet;
    for (const auto& js : j.at("segments")) {
        fleet.push_back(domain::segment_state_from_json_string(js.dump()));
    }
    return fleet;
}

// ---------------------------------------------------------------------------
// Training campaigns
// ---------------------------------------------------------------------------

rlenv::MaintenanceRlEnv make_training_env(const TrainingSetup& setup, std::uint64_t seed) {
    Rng rng(seed);
    const std::uint64_t fleet_seed = rng.next_seed();
    const std::uint64_t env_seed = rng.next_seed();
    std::vector<domain::SegmentState> fleet = generate_case_study(setup.case_study, fleet_seed);
    return make_env(setup, envmodel::StateSampler::fixed(std::move(fleet)), env_seed);
}

namespace {

template <typename TrainFn>
TrainingRunResult run_training_common(const std::string& out_dir, int checkpoint_every,
                                      const std::string& resume_from, TrainFn&& train_and_dump) {
    std::filesystem::create_directories(out_dir);
    agents::TrainControl control;
    control.checkpoint_every = checkpoint_every;
    control.checkpoint_path = out_dir + "/checkpoint.json";
    control.resume_from = resume_from;
    TrainingRunResult result;
    result.checkpoint_path = control.checkpoint_path;
    result.curve_csv_path = out_dir + "/reward_curve.csv";
    try {
        train_and_dump(control, result.curve_csv_path);
    } catch (const RuntimeAbort& e) {
        throw RuntimeAbort(std::string(e.what()) + "; last checkpoint: " + control.checkpoint_path);
    }
    return result;
}

}  // namespace

TrainingRunResult run_training(const TrainingSetup& setup, const agents::PpoConfig& cfg,
                               std::uint64_t seed, const std::string& out_dir,
                               int checkpoint_every, const std::string& resume_from) {
    Rng rng(seed);
    const std::uint64_t env_seed = rng.next_seed();
    const std::uint64_t trainer_seed = rng.next_seed();
    const rlenv::MaintenanceRlEnv env = make_training_env(setup, env_seed);
    return run_training_common(
        out_dir, checkpoint_every, resume_from,
        [&](const agents::TrainControl& control, const std::string& curve_path) {
            const agents::PpoResult res = agents::train_ppo(env, cfg, trainer_seed, control);
            agents::save_ppo_log_csv(res.log, curve_path);
        });
}

TrainingRunResult run_training(const TrainingSetup& setup, const agents::DqnConfig& cfg,
                               std::uint64_t seed, const std::string& out_dir,
                               int checkpoint_every, const std::string& resume_from) {
    Rng rng(seed);
    const std::uint64_t env_seed = rng.next_seed();
    const std::uint64_t trainer_seed = rng.next_seed();
    rlenv::MaintenanceRlEnv env = make_training_env(setup, env_seed);
    return run_training_common(
        out_dir, checkpoint_every, resume_from,
        [&](const agents::TrainControl& control, const std::string& curve_path) {
            const agents::DqnResult res = agents::train_dqn(env, cfg, trainer_seed, control);
            agents::save_dqn_log_csv(res.log, curve_path);
        });
}

LoadedActor load_actor(const std::string& checkpoint_path) {
    std::ifstream in(checkpoint_path);
    if (!in) throw ConfigError("load_actor: cannot open " + checkpoint_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("load_actor: invalid JSON: ") + e.what());
    }
    if (j.value("format", "") != "paverl-checkpoint") {
        throw ConfigError("load_actor: not a training checkpoint: " + checkpoint_path);
    }
    LoadedActor actor;
    actor.algo = j.value("algo", "");
    if (actor.algo == "ppo") {
        actor.net = neural::mlp_from_json_string(j.at("policy").dump());
    } else if (actor.algo == "dqn") {
        actor.net = neural::mlp_from_json_string(j.at("q").dump());
    } else {
        throw ConfigError("load_actor: unknown algorithm tag '" + actor.algo + "'");
    }
    return actor;
}

// ---------------------------------------------------------------------------
// Plan reports
// ---------------------------------------------------------------------------

PlanReport plan_report(const neural::Mlp& net, const std::vector<domain::SegmentState>& fleet,
                       const TrainingSetup& setup) {
    if (fleet.empty()) throw ValidationError("plan_report: empty fleet");
    rlenv::MaintenanceRlEnv env = make_env(setup, envmodel::StateSampler::fixed({fleet.front()}), 0);
    const int horizon = env.horizon();
    const std::vector<domain::MaintenanceAction> catalog = domain::build_action_catalog();

    PlanReport report;
    report.calendar_years.resize(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t) {
        report.calendar_years[static_cast<std::size_t>(t)] = setup.case_study.start_year + 1 + t;
    }
    std::vector<std::array<int, kKindCount>> counts(static_cast<std::size_t>(horizon),
                                                    std::array<int, kKindCount>{});
    report.fleet_cost.assign(static_cast<std::size_t>(horizon), 0.0);

    for (const domain::SegmentState& seg : fleet) {
        agents::PlanResult plan = agents::greedy_plan(net, env, seg);
        for (int t = 0; t < horizon; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            const int action_id = plan.actions[ti];
            const auto kind = static_cast<std::size_t>(
                catalog[static_cast<std::size_t>(action_id)].kind);
            ++counts[ti][kind];
            report.fleet_cost[ti] += plan.ledger.history()[ti].discounted_cost;
        }
        report.segment_plans.push_back(std::move(plan));
    }

    report.kind_percent.assign(static_cast<std::size_t>(horizon),
                               std::array<double, kKindCount>{});
    const double denom = static_cast<double>(fleet.size());
    for (int t = 0; t < horizon; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        for (int k = 0; k < kKindCount; ++k) {
            report.kind_percent[ti][static_cast<std::size_t>(k)] =
                100.0 * counts[ti][static_cast<std::size_t>(k)] / denom;
        }
    }
    return report;
}

void save_plan_distribution_csv(const PlanReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_plan_distribution_csv: cannot open " + path);
    out << "year,calendar_year";
    for (const std::string& col : kKindColumns) out << "," << col;
    out << ",row_sum\n";
    for (std::size_t t = 0; t < report.kind_percent.size(); ++t) {
        out << (t + 1) << "," << report.calendar_years[t];
        double row_sum = 0.0;
        for (double p : report.kind_percent[t]) {
            out << "," << fmt_double(p);
            row_sum += p;
        }
        out << "," << fmt_double(row_sum) << "\n";
    }
}

void save_plan_cost_csv(const PlanReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_plan_cost_csv: cannot open " + path);
    out << "year,calendar_year,fleet_cost";
    for (std::size_t s = 0; s < report.segment_plans.size(); ++s) out << ",segment_" << s;
    out << "\n";
    for (std::size_t t = 0; t < report.fleet_cost.size(); ++t) {
        out << (t + 1) << "," << report.calendar_years[t] << ","
            << fmt_double(report.fleet_cost[t]);
        for (const agents::PlanResult& plan : report.segment_plans) {
            out << "," << fmt_double(plan.ledger.history()[t].discounted_cost);
        }
        out << "\n";
    }
}

void save_segment_plan_csv(const PlanReport& report,
                           const std::vector<domain::MaintenanceAction>& catalog,
                           std::size_t segment_index, const std::string& path) {
    if (segment_index >= report.segment_plans.size()) {
        throw ValidationError("save_segment_plan_csv: segment index out of range");
    }
    const agents::PlanResult& plan = report.segment_plans[segment_index];
    std::ofstream out(path);
    if (!out) throw ConfigError("save_segment_plan_csv: cannot open " + path);
    out << "year,calendar_year,action_id,kind,thickness_mm,material,discounted_cost,iri,rd\n";
    for (std::size_t t = 0; t < plan.actions.size(); ++t) {
        const auto& action = catalog.at(static_cast<std::size_t>(plan.actions[t]));
        out << (t + 1) << "," << report.calendar_years[t] << "," << action.id << ","
            << domain::kind_name(action.kind) << ",";
        if (action.thickness_mm) out << fmt_double(*action.thickness_mm);
        out << ",";
        if (action.material) out << *action.material;
        out << "," << fmt_double(plan.ledger.history()[t].discounted_cost) << ","
            << fmt_double(plan.trajectory[t + 1].first) << ","
            << fmt_double(plan.trajectory[t + 1].second) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Traffic sensitivity
// ---------------------------------------------------------------------------

void validate(const SensitivitySpec& spec) {
    if (spec.multipliers.empty()) throw ConfigError("sensitivity: no multipliers");
    for (double m : spec.multipliers) {
        if (!(m > 0.0)) throw ConfigError("sensitivity: multipliers must be positive");
    }
    if (spec.replications < 1) throw ConfigError("sensitivity: replications must be >= 1");
}

SensitivitySpec load_sensitivity_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_sensitivity_spec: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("load_sensitivity_spec: invalid JSON: ") + e.what());
    }
    SensitivitySpec spec;
    spec.multipliers = j.value("multipliers", spec.multipliers);
    spec.replications = j.value("replications", spec.replications);
    spec.seed = j.value("seed", spec.seed);
    spec.retrain = j.value("retrain", spec.retrain);
    validate(spec);
    return spec;
}

void save_sensitivity_spec(const SensitivitySpec& spec, const std::string& path) {
    nlohmann::json j;
    j["format"] = "paverl-sensitivity-spec";
    j["format_version"] = 1;
    j["multipliers"] = spec.multipliers;
    j["replications"] = spec.replications;
    j["seed"] = spec.seed;
    j["retrain"] = spec.retrain;
    std::ofstream out(path);
    if (!out) throw ConfigError("save_sensitivity_spec: cannot open " + path);
    out << j.dump(2) << "\n";
}

std::vector<SensitivityRow> sensitivity(const neural::Mlp& net, const TrainingSetup& setup,
                                        const SensitivitySpec& spec,
                                        const agents::PpoConfig& ppo_cfg) {
    validate(spec);
    std::vector<double> multipliers = {1.0};  // reference row first
    for (double m : spec.multipliers) {
        if (m != 1.0) multipliers.push_back(m);
    }

    Rng rng(spec.seed);
    // Paired replications: the r-th fleet is identical across multipliers,
    // so traffic scaling is the only difference.
    std::vector<std::uint64_t> fleet_seeds;
    for (int r = 0; r < spec.replications; ++r) fleet_seeds.push_back(rng.next_seed());
    std::vector<std::uint64_t> retrain_seeds;
    for (std::size_t i = 0; i < multipliers.size(); ++i) retrain_seeds.push_back(rng.next_seed());

    std::vector<SensitivityRow> rows;
    for (std::size_t mi = 0; mi < multipliers.size(); ++mi) {
        const double m = multipliers[mi];
        neural::Mlp actor = net;
        if (spec.retrain) {
            Rng rr(retrain_seeds[mi]);
            std::vector<domain::SegmentState> fleet =
                generate_case_study(setup.case_study, rr.next_seed());
            scale_traffic(fleet, m);
            const rlenv::MaintenanceRlEnv proto =
                make_env(setup, envmodel::StateSampler::fixed(std::move(fleet)), rr.next_seed());
            actor = agents::train_ppo(proto, ppo_cfg, rr.next_seed()).policy;
        }

        std::vector<double> values;
        for (int r = 0; r < spec.replications; ++r) {
            std::vector<domain::SegmentState> fleet =
                generate_case_study(setup.case_study, fleet_seeds[static_cast<std::size_t>(r)]);
            scale_traffic(fleet, m);
            rlenv::MaintenanceRlEnv env =
                make_env(setup, envmodel::StateSampler::fixed({fleet.front()}), 0);
            double sum = 0.0;
            for (const domain::SegmentState& seg : fleet) {
                sum += agents::greedy_plan(actor, env, seg).ledger.final_effcost();
            }
            values.push_back(sum / static_cast<double>(fleet.size()));
        }

        SensitivityRow row;
        row.multiplier = m;
        row.replications = spec.replications;
        const double mean =
            std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        row.mean_final_effcost = mean;
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            row.std_final_effcost = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
        rows.push_back(row);
    }
    return rows;
}

void save_sensitivity_csv(const std::vector<SensitivityRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_sensitivity_csv: cannot open " + path);
    out << "multiplier,mean_final_effcost,std_final_effcost,replications\n";
    for (const SensitivityRow& r : rows) {
        out << fmt_double(r.multiplier) << "," << fmt_double(r.mean_final_effcost) << ","
            << fmt_double(r.std_final_effcost) << "," << r.replications << "\n";
    }
}

// ---------------------------------------------------------------------------
// PPO vs DQN comparison
// ---------------------------------------------------------------------------

namespace {

AgentSummary summarize_curve(const std::string& agent, long budget,
                             const std::vector<AgentCurvePoint>& points,
                             double threshold_fraction) {
    AgentSummary s;
    s.agent = agent;
    s.step_budget = budget;
    if (points.empty()) return s;
    s.env_steps = points.back().env_steps;

    const std::size_t n = points.size();
    const std::size_t tail_start = n - (n + 3) / 4;  // final quartile, at least one point
    double sum = 0.0;
    for (std::size_t i = tail_start; i < n; ++i) sum += points[i].reward;
    const double tail_count = static_cast<double>(n - tail_start);
    s.final_mean_reward = sum / tail_count;
    double ss = 0.0;
    for (std::size_t i = tail_start; i < n; ++i) {
        const double d = points[i].reward - s.final_mean_reward;
        ss += d * d;
    }
    s.curve_variance = ss / tail_count;

    // First trailing-window mean at or past the threshold share of the final
    // mean (shares above 0 shrink toward 0 for negative finals).
    const double threshold = s.final_mean_reward >= 0.0
                                 ? threshold_fraction * s.final_mean_reward
                                 : s.final_mean_reward / threshold_fraction;
    const std::size_t window = std::max<std::size_t>(1, n / 20);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += points[i].reward;
        if (i >= window) acc -= points[i - window].reward;
        const double mavg = acc / static_cast<double>(std::min(i + 1, window));
        if (mavg >= threshold) {
            s.steps_to_threshold = points[i].env_steps;
            break;
        }
    }
    return s;
}

}  // namespace

CompareReport compare_agents(const rlenv::RlEnv& env_prototype, const CompareSpec& spec) {
    if (spec.env_step_budget < 1) throw ConfigError("compare: step budget must be >= 1");
    if (!(spec.threshold_fraction > 0.0) || spec.threshold_fraction > 1.0) {
        throw ConfigError("compare: threshold fraction must be in (0, 1]");
    }
    Rng rng(spec.seed);
    const std::uint64_t ppo_seed = rng.next_seed();
    const std::uint64_t dqn_seed = rng.next_seed();

    CompareReport report;

    agents::PpoConfig pcfg = spec.ppo;
    const long steps_per_iter =
        static_cast<long>(pcfg.executors) * static_cast<long>(pcfg.steps_per_update);
    pcfg.iterations = static_cast<int>((spec.env_step_budget + steps_per_iter - 1) / steps_per_iter);
    const agents::PpoResult ppo_res = agents::train_ppo(env_prototype, pcfg, ppo_seed);
    std::vector<AgentCurvePoint> ppo_points;
    for (const agents::PpoLogRow& r : ppo_res.log) {
        ppo_points.push_back({"ppo", r.cumulative_env_steps, r.mean_episode_reward});
    }

    agents::DqnConfig dcfg = spec.dqn;
    dcfg.max_env_steps = spec.env_step_budget;
    dcfg.episodes = static_cast<int>(
        std::min<long>(spec.env_step_budget, std::numeric_limits<int>::max()));
    const std::unique_ptr<rlenv::RlEnv> dqn_env = env_prototype.clone();
    const agents::DqnResult dqn_res = agents::train_dqn(*dqn_env, dcfg, dqn_seed);
    std::vector<AgentCurvePoint> dqn_points;
    for (const agents::DqnLogRow& r : dqn_res.log) {
        dqn_points.push_back({"dqn", r.cumulative_env_steps, r.episode_reward});
    }

    report.ppo = summarize_curve("ppo", spec.env_step_budget, ppo_points, spec.threshold_fraction);
    report.dqn = summarize_curve("dqn", spec.env_step_budget, dqn_points, spec.threshold_fraction);
    report.curve = std::move(ppo_points);
    report.curve.insert(report.curve.end(), dqn_points.begin(), dqn_points.end());

    const auto effective = [](long steps) {
        return steps < 0 ? std::numeric_limits<long>::max() : steps;
    };
    const long ppo_steps = effective(report.ppo.steps_to_threshold);
    const long dqn_steps = effective(report.dqn.steps_to_threshold);
    report.fewer_steps_agent = ppo_steps == dqn_steps ? "tie"
                               : ppo_steps < dqn_steps ? "ppo"
                                                       : "dqn";
    return report;
}

void save_compare_curve_csv(const CompareReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_compare_curve_csv: cannot open " + path);
    out << "agent,env_steps,reward\n";
    for (const AgentCurvePoint& p : report.curve) {
        out << p.agent << "," << p.env_steps << "," << fmt_double(p.reward) << "\n";
    }
}

void save_compare_summary_csv(const CompareReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_compare_summary_csv: cannot open " + path);
    out << "agent,step_budget,env_steps,final_mean_reward,steps_to_threshold,curve_variance,"
           "fewer_steps_agent\n";
    for (const AgentSummary* s : {&report.ppo, &report.dqn}) {
        out << s->agent << "," << s->step_budget << "," << s->env_steps << ","
            << fmt_double(s->final_mean_reward) << "," << s->steps_to_threshold << ","
            << fmt_double(s->curve_variance) << "," << report.fewer_steps_agent << "\n";
    }
}

// ---------------------------------------------------------------------------
// Run directories
// ---------------------------------------------------------------------------

std::string make_run_dir(const std::string& base, std::uint64_t seed) {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    const std::string dir = base + "/run_" + stamp + "_" + std::to_string(seed);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace paverl::runner
