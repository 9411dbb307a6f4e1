#include "paverl/rlenv.hpp"

#include <json.hpp>

namespace paverl::rlenv {

// ---------------------------------------------------------------------------
// MaintenanceRlEnv
// ---------------------------------------------------------------------------

MaintenanceRlEnv::MaintenanceRlEnv(envmodel::Environment env, envmodel::StateSampler sampler,
                                   rewardlca::RewardConfig reward_cfg,
                                   rewardlca::CostCatalog cost_catalog, std::uint64_t seed)
    : env_(std::move(env)),
      sampler_(std::move(sampler)),
      reward_cfg_(std::move(reward_cfg)),
      cost_catalog_(std::move(cost_catalog)),
      catalog_(domain::build_action_catalog()),
      agent_norm_(domain::agent_normalization(env_.codes(), domain::AgentRanges{})),
      rng_(seed) {
    rewardlca::validate(reward_cfg_);
}

VectorXd MaintenanceRlEnv::observe() const {
    return domain::encode_agent_state(state_, agent_norm_, env_.codes());
}

VectorXd MaintenanceRlEnv::reset() { return reset_to(sampler_.sample(rng_)); }

VectorXd MaintenanceRlEnv::reset_to(const domain::SegmentState& s0) {
    state_ = s0;
    t_ = 0;
    ledger_ = rewardlca::RewardLedger(reward_cfg_);
    baseline_ = env_.baseline_trajectory(state_, env_.config().horizon_years);
    episode_open_ = true;
    return observe();
}

StepResult MaintenanceRlEnv::step(int action_id) {
    if (!episode_open_) throw SequencingError("step before reset or after episode end");
    if (action_id < 0 || action_id >= action_count()) {
        throw ValidationError("step: action id " + std::to_string(action_id) +
                              " outside catalog of " + std::to_string(action_count()));
    }
    const domain::MaintenanceAction& action = catalog_[static_cast<std::size_t>(action_id)];
    const domain::SegmentState next = env_.step(state_, action, t_);

    const auto& b0 = baseline_[static_cast<std::size_t>(t_)];
    const auto& b1 = baseline_[static_cast<std::size_t>(t_) + 1];
    const double area_iri =
        rewardlca::step_area(b0.first, b1.first, state_.iri, next.iri, reward_cfg_.iri_range);
    const double area_rd =
        rewardlca::step_area(b0.second, b1.second, state_.rd, next.rd, reward_cfg_.rd_range);

    StepResult r;
    r.reward = ledger_.update(area_iri, area_rd, action, cost_catalog_, t_);
    state_ = next;
    ++t_;
    r.observation = observe();
    r.terminal = t_ >= env_.config().horizon_years;
    r.truncated = false;
    if (r.terminal) episode_open_ = false;
    return r;
}

std::unique_ptr<RlEnv> MaintenanceRlEnv::clone() const {
    return std::make_unique<MaintenanceRlEnv>(*this);
}

const rewardlca::RewardLedger& MaintenanceRlEnv::ledger() const {
    if (baseline_.empty()) throw SequencingError("ledger requested before first reset");
    return ledger_;
}

const domain::SegmentState& MaintenanceRlEnv::state() const {
    if (baseline_.empty()) throw SequencingError("state requested before first reset");
    return state_;
}

const std::vector<std::pair<double, double>>& MaintenanceRlEnv::baseline() const {
    if (baseline_.empty()) throw SequencingError("baseline requested before first reset");
    return baseline_;
}

std::string MaintenanceRlEnv::snapshot() const {
    nlohmann::json j;
    j["kind"] = "maintenance";
    j["rng"] = rng_.save_state();
    j["episode_open"] = episode_open_;
    j["t"] = t_;
    j["state"] = nlohmann::json::parse(domain::segment_state_to_json_string(state_));
    j["ledger"] = nlohmann::json::parse(ledger_.to_json_string());
    std::vector<double> flat;
    flat.reserve(baseline_.size() * 2);
    for (const auto& [iri, rd] : baseline_) {
        flat.push_back(iri);
        flat.push_back(rd);
    }
    j["baseline_hex"] = doubles_to_hex(flat.data(), flat.size());
    return j.dump();
}

void MaintenanceRlEnv::restore(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("env restore: invalid JSON: ") + e.what());
    }
    if (j.value("kind", "") != "maintenance") {
        throw ConfigError("env restore: snapshot is not from a maintenance environment");
    }
    rng_.load_state(j.at("rng").get<std::string>());
    episode_open_ = j.at("episode_open").get<bool>();
    t_ = j.at("t").get<int>();
    state_ = domain::segment_state_from_json_string(j.at("state").dump());
    ledger_ = rewardlca::RewardLedger::from_json_string(j.at("ledger").dump());
    const std::vector<double> flat = hex_to_doubles(j.at("baseline_hex").get<std::string>());
    baseline_.clear();
    for (std::size_t i = 0; i + 1 < flat.size(); i += 2) {
        baseline_.emplace_back(flat[i], flat[i + 1]);
    }
}

// ---------------------------------------------------------------------------
// ChainEnv
// ---------------------------------------------------------------------------

ChainEnv::ChainEnv(std::uint64_t seed, int episode_cap) : episode_cap_(episode_cap), rng_(seed) {
    if (episode_cap < 1) throw ConfigError("chain env: episode cap must be >= 1");
}

VectorXd ChainEnv::observe() const {
    VectorXd obs = VectorXd::Zero(2);
    obs[state_] = 1.0;
    return obs;
}

VectorXd ChainEnv::reset() {
    state_ = static_cast<int>(rng_.uniform_int(2));
    t_ = 0;
    episode_open_ = true;
    return observe();
}

StepResult ChainEnv::step(int action_id) {
    if (!episode_open_) throw SequencingError("step before reset or after episode end");
    if (action_id < 0 || action_id >= 2) {
        throw ValidationError("chain env: action id must be 0 or 1");
    }
    StepResult r;
    if (action_id == 0) {
        r.reward = 1.0;
    } else {
        state_ = 1 - state_;
        r.reward = 0.0;
    }
    ++t_;
    r.observation = observe();
    r.terminal = false;
    r.truncated = t_ >= episode_cap_;
    if (r.truncated) episode_open_ = false;
    return r;
}

std::unique_ptr<RlEnv> ChainEnv::clone() const { return std::make_unique<ChainEnv>(*this); }

std::string ChainEnv::snapshot() const {
    nlohmann::json j;
    j["kind"] = "chain";
    j["rng"] = rng_.save_state();
    j["episode_open"] = episode_open_;
    j["state"] = state_;
    j["t"] = t_;
    j["episode_cap"] = episode_cap_;
    return j.dump();
}

void ChainEnv::restore(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("env restore: invalid JSON: ") + e.what());
    }
    if (j.value("kind", "") != "chain") {
        throw ConfigError("env restore: snapshot is not from a chain environment");
    }
    rng_.load_state(j.at("rng").get<std::string>());
    episode_open_ = j.at("episode_open").get<bool>();
    state_ = j.at("state").get<int>();
    t_ = j.at("t").get<int>();
    episode_cap_ = j.at("episode_cap").get<int>();
}

}  // namespace paverl::rlenv
