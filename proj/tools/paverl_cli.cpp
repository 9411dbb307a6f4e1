#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "paverl/agents.hpp"
#include "paverl/common.hpp"
#include "paverl/dataprep.hpp"
#include "paverl/domain.hpp"
#include "paverl/envmodel.hpp"
#include "paverl/rewardlca.hpp"
#include "paverl/rlenv.hpp"
#include "paverl/runner.hpp"

namespace fs = std::filesystem;
using namespace paverl;

namespace {

struct SetupPaths {
    std::string env_config;
    std::string codes;
    std::string surrogate;
    std::string reward_config;
    std::string cost_catalog;
    std::string case_study;
};

void add_setup_options(CLI::App* cmd, SetupPaths& p, bool catalog_required) {
    cmd->add_option("--env-config", p.env_config, "environment config JSON (default: built-in)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--codes", p.codes, "categorical code book file (default: built-in)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--surrogate", p.surrogate,
                    "trained surrogate model JSON; switches transitions to surrogate mode")
        ->check(CLI::ExistingFile);
    cmd->add_option("--reward-config", p.reward_config, "reward config JSON (default: built-in)")
        ->check(CLI::ExistingFile);
    auto* cat = cmd->add_option("--cost-catalog", p.cost_catalog,
                                "per-action economic cost and emissions catalog JSON")
                    ->check(CLI::ExistingFile);
    if (catalog_required) cat->required();
    cmd->add_option("--case-study", p.case_study, "case study config JSON (default: built-in)")
        ->check(CLI::ExistingFile);
}

runner::TrainingSetup load_setup(const SetupPaths& p) {
    runner::TrainingSetup s;
    if (!p.env_config.empty()) s.env_cfg = envmodel::load_environment_config(p.env_config);
    if (!p.codes.empty()) s.codes = domain::CodeBook::load(p.codes);
    if (!p.surrogate.empty()) {
        s.surrogate = envmodel::load_surrogate(p.surrogate);
        s.env_cfg.mode = envmodel::EnvMode::Surrogate;
    }
    if (!p.reward_config.empty()) s.reward_cfg = rewardlca::load_reward_config(p.reward_config);
    if (!p.cost_catalog.empty()) s.cost_catalog = rewardlca::load_cost_catalog(p.cost_catalog);
    if (!p.case_study.empty()) s.case_study = runner::load_case_study_config(p.case_study);
    return s;
}

std::string ensure_out_dir(const std::string& given, std::uint64_t seed) {
    if (given.empty()) return runner::make_run_dir("runs", seed);
    fs::create_directories(given);
    return given;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

void setup_calibrate(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "calibrate", "Ingest a raw survey CSV, impute missing values, and clamp each "
                     "indicator series non-decreasing between maintenance dates");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto impute_name = std::make_shared<std::string>("interpolate");
    auto report_path = std::make_shared<std::string>();
    cmd->add_option("input", *input, "raw observations CSV")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("output", *output, "calibrated dataset CSV")->required();
    cmd->add_option("--impute", *impute_name, "missing-value policy")
        ->check(CLI::IsMember({"interpolate", "fill_forward", "delete"}))
        ->capture_default_str();
    cmd->add_option("--report", *report_path,
                    "calibration change report CSV (default: <output>.changes.csv)");

    cmd->callback([=]() {
        dataprep::Dataset dataset = dataprep::ingest_file(*input);
        for (const dataprep::RowError& e : dataset.row_errors) {
            std::cerr << "row " << e.line << " skipped: " << e.message << "\n";
        }
        const dataprep::ImputePolicy policy = dataprep::impute_policy_from_name(*impute_name);
        dataprep::ImputeReport imputed;
        std::vector<dataprep::CalibrationChange> changes;
        for (dataprep::SegmentRecord& seg : dataset.segments) {
            seg.iri = dataprep::calibrate_monotone(dataprep::impute(seg.iri, policy, &imputed),
                                                   &changes);
            seg.rd = dataprep::calibrate_monotone(dataprep::impute(seg.rd, policy, &imputed),
                                                  &changes);
        }
        dataprep::save_dataset_csv(dataset, *output);
        const std::string report = report_path->empty() ? *output + ".changes.csv" : *report_path;
        dataprep::save_change_report_csv(changes, report);
        std::cout << "segments: " << dataset.segments.size()
                  << "\nrows skipped: " << dataset.row_errors.size()
                  << "\nvalues imputed: " << (imputed.interpolated + imputed.filled)
                  << " (deleted: " << imputed.deleted << ")"
                  << "\npoints clamped: " << changes.size()
                  << "\ncalibrated dataset: " << *output << "\nchange report: " << report << "\n";
    });
}

// ---------------------------------------------------------------------------
// make-pairs
// ---------------------------------------------------------------------------

void setup_make_pairs(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "make-pairs", "Turn a calibrated dataset into surrogate training pairs "
                      "(iri_pairs.csv and rd_pairs.csv)");
    auto input = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    auto codes_path = std::make_shared<std::string>();
    cmd->add_option("input", *input, "calibrated dataset CSV")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("directory", *out_dir, "output directory")->required();
    cmd->add_option("--codes", *codes_path, "categorical code book file (default: built-in)")
        ->check(CLI::ExistingFile);

    cmd->callback([=]() {
        const domain::CodeBook codes =
            codes_path->empty() ? domain::CodeBook::defaults() : domain::CodeBook::load(*codes_path);
        const dataprep::Dataset dataset = dataprep::ingest_file(*input);
        fs::create_directories(*out_dir);
        dataprep::PairBuildReport report;
        const auto iri_pairs =
            dataprep::build_training_pairs(dataset, codes, dataprep::Indicator::Iri, &report);
        const auto rd_pairs =
            dataprep::build_training_pairs(dataset, codes, dataprep::Indicator::Rd, &report);
        dataprep::save_training_pairs_csv(iri_pairs, *out_dir + "/iri_pairs.csv");
        dataprep::save_training_pairs_csv(rd_pairs, *out_dir + "/rd_pairs.csv");
        for (const std::string& id : report.skipped_segments) {
            std::cerr << "segment " << id << " skipped: fewer than 2 observations\n";
        }
        std::cout << "iri pairs: " << iri_pairs.size() << "\nrd pairs: " << rd_pairs.size()
                  << "\ninto: " << *out_dir << "\n";
    });
}

// ---------------------------------------------------------------------------
// train-env
// ---------------------------------------------------------------------------

void setup_train_env(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "train-env", "Fit the two indicator-transition regression nets from training pairs");
    auto pairs_dir = std::make_shared<std::string>();
    auto model_out = std::make_shared<std::string>();
    auto iri_path = std::make_shared<std::string>();
    auto rd_path = std::make_shared<std::string>();
    auto report_path = std::make_shared<std::string>();
    auto cfg = std::make_shared<envmodel::SurrogateTrainConfig>();
    cmd->add_option("pairs", *pairs_dir,
                    "directory holding iri_pairs.csv and rd_pairs.csv")
        ->required();
    cmd->add_option("model", *model_out, "output model JSON")->required();
    cmd->add_option("--iri-pairs", *iri_path, "override the IRI pairs CSV path")
        ->check(CLI::ExistingFile);
    cmd->add_option("--rd-pairs", *rd_path, "override the RD pairs CSV path")
        ->check(CLI::ExistingFile);
    cmd->add_option("--hidden", cfg->hidden, "hidden layer widths")->capture_default_str();
    cmd->add_option("--epochs", cfg->epochs)->capture_default_str();
    cmd->add_option("--batch-size", cfg->batch_size)->capture_default_str();
    cmd->add_option("--learning-rate", cfg->learning_rate)->capture_default_str();
    cmd->add_option("--holdout", cfg->holdout_fraction, "holdout fraction for fit stats")
        ->capture_default_str();
    cmd->add_option("--min-samples", cfg->min_samples)->capture_default_str();
    cmd->add_option("--seed", cfg->seed)->capture_default_str();
    cmd->add_option("--report", *report_path, "fit report CSV");

    cmd->callback([=]() {
        const std::string iri_file =
            iri_path->empty() ? *pairs_dir + "/iri_pairs.csv" : *iri_path;
        const std::string rd_file = rd_path->empty() ? *pairs_dir + "/rd_pairs.csv" : *rd_path;
        const auto iri_pairs = dataprep::load_training_pairs_csv(iri_file);
        const auto rd_pairs = dataprep::load_training_pairs_csv(rd_file);
        envmodel::FitReport report;
        const envmodel::SurrogatePair sp =
            envmodel::train_surrogate(iri_pairs, rd_pairs, *cfg, &report);
        envmodel::save_surrogate(sp, *model_out);
        if (!report_path->empty()) envmodel::save_fit_report_csv(report, *report_path);
        const auto print = [](const char* name, const envmodel::FitStats& st) {
            std::cout << name << ": train rmse " << fmt_double(st.train_rmse) << " r2 "
                      << fmt_double(st.train_r2) << " | holdout rmse "
                      << fmt_double(st.holdout_rmse) << " r2 " << fmt_double(st.holdout_r2)
                      << " (n=" << st.train_count << "/" << st.holdout_count << ")\n";
        };
        print("iri", report.iri);
        print("rd", report.rd);
        std::cout << "model: " << *model_out << "\n";
    });
}

// ---------------------------------------------------------------------------
// train-agent
// ---------------------------------------------------------------------------

void setup_train_agent(CLI::App& app) {
    auto* cmd = app.add_subcommand("train-agent",
                                   "Train a planning agent on per-segment episodes");
    auto algo = std::make_shared<std::string>();
    auto config_path = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out_dir = std::make_shared<std::string>();
    auto checkpoint_every = std::make_shared<int>(50);
    auto resume = std::make_shared<std::string>();
    auto paths = std::make_shared<SetupPaths>();
    cmd->add_option("--algo", *algo, "agent algorithm")
        ->required()
        ->check(CLI::IsMember({"ppo", "dqn"}));
    cmd->add_option("--config", *config_path, "agent config JSON (default: built-in)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", *seed)->capture_default_str();
    cmd->add_option("--out", *out_dir, "run directory (default: runs/run_<stamp>_<seed>)");
    cmd->add_option("--checkpoint-every", *checkpoint_every,
                    "iterations (ppo) or episodes (dqn) between checkpoints")
        ->capture_default_str();
    cmd->add_option("--resume", *resume, "checkpoint to continue from")
        ->check(CLI::ExistingFile);
    add_setup_options(cmd, *paths, /*catalog_required=*/true);

    cmd->callback([=]() {
        const runner::TrainingSetup setup = load_setup(*paths);
        const std::string out = ensure_out_dir(*out_dir, *seed);
        runner::TrainingRunResult result;
        if (*algo == "ppo") {
            const agents::PpoConfig cfg =
                config_path->empty() ? agents::PpoConfig{} : agents::load_ppo_config(*config_path);
            result = runner::run_training(setup, cfg, *seed, out, *checkpoint_every, *resume);
        } else {
            const agents::DqnConfig cfg =
                config_path->empty() ? agents::DqnConfig{} : agents::load_dqn_config(*config_path);
            result = runner::run_training(setup, cfg, *seed, out, *checkpoint_every, *resume);
        }
        std::cout << "checkpoint: " << result.checkpoint_path
                  << "\nreward curve: " << result.curve_csv_path << "\n";
    });
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

void setup_plan(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "plan", "Greedy 20-year plans for a fleet: action distribution, cost series, drill-down");
    auto checkpoint = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    auto fleet_path = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto segment = std::make_shared<std::size_t>(0);
    auto paths = std::make_shared<SetupPaths>();
    cmd->add_option("--checkpoint", *checkpoint, "trained agent checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", *out_dir, "output directory")->required();
    cmd->add_option("--fleet", *fleet_path, "fleet JSON (default: generate from case study)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", *seed, "fleet generation seed")->capture_default_str();
    cmd->add_option("--segment", *segment, "segment index for the drill-down CSV")
        ->capture_default_str();
    add_setup_options(cmd, *paths, /*catalog_required=*/true);

    cmd->callback([=]() {
        const runner::TrainingSetup setup = load_setup(*paths);
        const runner::LoadedActor actor = runner::load_actor(*checkpoint);
        const std::vector<domain::SegmentState> fleet =
            fleet_path->empty() ? runner::generate_case_study(setup.case_study, *seed)
                                : runner::load_fleet(*fleet_path);
        const runner::PlanReport report = runner::plan_report(actor.net, fleet, setup);
        fs::create_directories(*out_dir);
        const std::string dist = *out_dir + "/plan_distribution.csv";
        const std::string costs = *out_dir + "/plan_costs.csv";
        const std::string drill =
            *out_dir + "/segment_" + std::to_string(*segment) + "_plan.csv";
        runner::save_plan_distribution_csv(report, dist);
        runner::save_plan_cost_csv(report, costs);
        runner::save_segment_plan_csv(report, domain::build_action_catalog(), *segment, drill);
        runner::save_fleet(fleet, *out_dir + "/fleet.json");
        std::cout << "actor: " << actor.algo << "\naction distribution: " << dist
                  << "\ncost series: " << costs << "\nsegment drill-down: " << drill << "\n";
    });
}

// ---------------------------------------------------------------------------
// sensitivity
// ---------------------------------------------------------------------------

void setup_sensitivity(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "sensitivity", "Cost-effectiveness of the trained policy under scaled traffic");
    auto spec_path = std::make_shared<std::string>();
    auto checkpoint = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    auto ppo_config = std::make_shared<std::string>();
    auto paths = std::make_shared<SetupPaths>();
    cmd->add_option("--spec", *spec_path, "sensitivity spec JSON")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--checkpoint", *checkpoint, "trained agent checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", *out_dir, "output directory")->required();
    cmd->add_option("--ppo-config", *ppo_config, "PPO config for retraining mode")
        ->check(CLI::ExistingFile);
    add_setup_options(cmd, *paths, /*catalog_required=*/true);

    cmd->callback([=]() {
        const runner::SensitivitySpec spec = runner::load_sensitivity_spec(*spec_path);
        const runner::TrainingSetup setup = load_setup(*paths);
        const runner::LoadedActor actor = runner::load_actor(*checkpoint);
        const agents::PpoConfig pcfg =
            ppo_config->empty() ? agents::PpoConfig{} : agents::load_ppo_config(*ppo_config);
        const std::vector<runner::SensitivityRow> rows =
            runner::sensitivity(actor.net, setup, spec, pcfg);
        fs::create_directories(*out_dir);
        const std::string csv = *out_dir + "/sensitivity.csv";
        runner::save_sensitivity_csv(rows, csv);
        std::cout << "multiplier  mean_final_effcost  std\n";
        for (const runner::SensitivityRow& r : rows) {
            std::cout << fmt_double(r.multiplier) << "  " << fmt_double(r.mean_final_effcost)
                      << "  " << fmt_double(r.std_final_effcost) << "\n";
        }
        std::cout << "table: " << csv << "\n";
    });
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

void setup_compare(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "compare", "Train PPO and DQN under one env-step budget and report both curves");
    auto config_path = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    cmd->add_option("--config", *config_path, "comparison config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", *out_dir, "output directory")->required();

    cmd->callback([=]() {
        std::ifstream in(*config_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("compare config: invalid JSON: ") + e.what());
        }
        runner::CompareSpec spec;
        spec.env_step_budget = j.value("env_step_budget", spec.env_step_budget);
        spec.seed = j.value("seed", spec.seed);
        spec.threshold_fraction = j.value("threshold_fraction", spec.threshold_fraction);
        if (j.contains("ppo_config")) {
            spec.ppo = agents::load_ppo_config(j.at("ppo_config").get<std::string>());
        }
        if (j.contains("dqn_config")) {
            spec.dqn = agents::load_dqn_config(j.at("dqn_config").get<std::string>());
        }

        runner::CompareReport report;
        const std::string env_kind = j.value("env", "chain");
        if (env_kind == "chain") {
            const rlenv::ChainEnv proto(0, j.value("episode_cap", 20));
            report = runner::compare_agents(proto, spec);
        } else if (env_kind == "maintenance") {
            SetupPaths paths;
            paths.env_config = j.value("env_config", "");
            paths.codes = j.value("codes", "");
            paths.surrogate = j.value("surrogate", "");
            paths.reward_config = j.value("reward_config", "");
            paths.cost_catalog = j.value("cost_catalog", "");
            paths.case_study = j.value("case_study", "");
            if (paths.cost_catalog.empty()) {
                throw ConfigError("compare config: maintenance env needs cost_catalog");
            }
            const rlenv::MaintenanceRlEnv proto =
                runner::make_training_env(load_setup(paths), spec.seed);
            report = runner::compare_agents(proto, spec);
        } else {
            throw ConfigError("compare config: env must be 'chain' or 'maintenance'");
        }

        fs::create_directories(*out_dir);
        const std::string curve = *out_dir + "/compare_curve.csv";
        const std::string summary = *out_dir + "/compare_summary.csv";
        runner::save_compare_curve_csv(report, curve);
        runner::save_compare_summary_csv(report, summary);
        std::cout << "ppo final mean reward: " << fmt_double(report.ppo.final_mean_reward)
                  << " (steps to threshold: " << report.ppo.steps_to_threshold << ")\n"
                  << "dqn final mean reward: " << fmt_double(report.dqn.final_mean_reward)
                  << " (steps to threshold: " << report.dqn.steps_to_threshold << ")\n"
                  << "fewer steps: " << report.fewer_steps_agent << "\ncurves: " << curve
                  << "\nsummary: " << summary << "\n";
    });
}

// ---------------------------------------------------------------------------
// catalog
// ---------------------------------------------------------------------------

void setup_catalog(CLI::App& app) {
    auto* cmd = app.add_subcommand("catalog", "Export the 32-entry action catalog as CSV");
    auto out_path = std::make_shared<std::string>();
    cmd->add_option("output", *out_path, "catalog CSV path")->required();
    cmd->callback([=]() {
        domain::export_catalog_csv(domain::build_action_catalog(), *out_path);
        std::cout << "catalog: " << *out_path << "\n";
    });
}

// ---------------------------------------------------------------------------
// init-configs
// ---------------------------------------------------------------------------

void setup_init_configs(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "init-configs", "Write every built-in default config into a directory");
    auto out_dir = std::make_shared<std::string>();
    cmd->add_option("directory", *out_dir, "target directory")->required();
    cmd->callback([=]() {
        fs::create_directories(*out_dir);
        const std::string d = *out_dir;
        envmodel::save_environment_config(envmodel::EnvironmentConfig::defaults(),
                                          d + "/env_default.json");
        rewardlca::save_reward_config(rewardlca::RewardConfig{}, d + "/reward_default.json");
        agents::save_ppo_config(agents::PpoConfig{}, d + "/ppo_default.json");
        agents::save_dqn_config(agents::DqnConfig{}, d + "/dqn_default.json");
        runner::save_case_study_config(runner::CaseStudyConfig{}, d + "/case_study.json");
        runner::save_sensitivity_spec(runner::SensitivitySpec{}, d + "/sensitivity_default.json");
        domain::CodeBook::defaults().save(d + "/structure_codes.txt");
        std::cout << "wrote defaults to " << d << "\n";
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pavement maintenance-and-rehabilitation planning toolkit"};
    app.require_subcommand(1);
    setup_calibrate(app);
    setup_make_pairs(app);
    setup_train_env(app);
    setup_train_agent(app);
    setup_plan(app);
    setup_sensitivity(app);
    setup_compare(app);
    setup_catalog(app);
    setup_init_configs(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 1;
    } catch (const SequencingError& e) {
        std::cerr << "sequencing error: " << e.what() << "\n";
        return 1;
    } catch (const RuntimeAbort& e) {
        std::cerr << "runtime abort: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
