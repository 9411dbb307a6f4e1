#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "paverl/common.hpp"
#include "paverl/domain.hpp"
#include "paverl/envmodel.hpp"
#include "paverl/rewardlca.hpp"

// Gym-style episode interface the agents train against, with snapshotting for
// exact-resume checkpoints.
namespace paverl::rlenv {

using Eigen::VectorXd;

struct StepResult {
    VectorXd observation;
    double reward = 0.0;
    // `terminal` ends the MDP (no bootstrapping past it); `truncated` only
    // caps the episode, so value targets still bootstrap through it.
    bool terminal = false;
    bool truncated = false;
};

class RlEnv {
public:
    virtual ~RlEnv() = default;

    virtual int observation_size() const = 0;
    virtual int action_count() const = 0;

    // Starts a new episode from the internal rng stream.
    virtual VectorXd reset() = 0;
    // Throws SequencingError before the first reset or after the episode
    // ended; ValidationError on an out-of-range action id.
    virtual StepResult step(int action_id) = 0;

    virtual void reseed(std::uint64_t seed) = 0;
    // Independent copy for parallel executors (call reseed on each).
    virtual std::unique_ptr<RlEnv> clone() const = 0;

    // Bit-exact state capture, including the rng stream.
    virtual std::string snapshot() const = 0;
    virtual void restore(const std::string& text) = 0;
};

// ---------------------------------------------------------------------------
// Maintenance planning episodes
// ---------------------------------------------------------------------------

// One episode = one segment drawn from the sampler, stepped yearly over the
// configured horizon. Observations are the 21-feature agent encoding; rewards
// are the cost-effectiveness increments from a per-episode RewardLedger
// measured against the episode's cached do-nothing baseline.
class MaintenanceRlEnv final : public RlEnv {
public:
    MaintenanceRlEnv(envmodel::Environment env, envmodel::StateSampler sampler,
                     rewardlca::RewardConfig reward_cfg, rewardlca::CostCatalog cost_catalog,
                     std::uint64_t seed);

    int observation_size() const override { return domain::kAgentFeatureCount; }
    int action_count() const override { return static_cast<int>(catalog_.size()); }

    VectorXd reset() override;
    // Starts an episode from a caller-chosen segment instead of the sampler.
    VectorXd reset_to(const domain::SegmentState& s0);
    StepResult step(int action_id) override;

    void reseed(std::uint64_t seed) override { rng_ = Rng(seed); }
    std::unique_ptr<RlEnv> clone() const override;

    std::string snapshot() const override;
    void restore(const std::string& text) override;

    const rewardlca::RewardLedger& ledger() const;
    const domain::SegmentState& state() const;
    int year_index() const { return t_; }
    int horizon() const { return env_.config().horizon_years; }
    const std::vector<domain::MaintenanceAction>& catalog() const { return catalog_; }
    const envmodel::Environment& environment() const { return env_; }

    // (iri, rd) do-nothing curve cached at reset, horizon+1 points.
    const std::vector<std::pair<double, double>>& baseline() const;

private:
    VectorXd observe() const;

    envmodel::Environment env_;
    envmodel::StateSampler sampler_;
    rewardlca::RewardConfig reward_cfg_;
    rewardlca::CostCatalog cost_catalog_;
    std::vector<domain::MaintenanceAction> catalog_;
    domain::NormalizationParams agent_norm_;
    Rng rng_;

    bool episode_open_ = false;
    int t_ = 0;
    domain::SegmentState state_;
    rewardlca::RewardLedger ledger_;
    std::vector<std::pair<double, double>> baseline_;
};

// ---------------------------------------------------------------------------
// Two-state oracle MDP
// ---------------------------------------------------------------------------

// Closed-form testbed: two states, two actions. Action 0 stays put for
// reward 1, action 1 switches states for reward 0, so the optimal policy
// plays action 0 everywhere and q*(s, 0) = 1 / (1 - gamma) (10 at 0.9).
// Episodes never hit a terminal state; they truncate at `episode_cap` steps.
class ChainEnv final : public RlEnv {
public:
    explicit ChainEnv(std::uint64_t seed, int episode_cap = 20);

    int observation_size() const override { return 2; }
    int action_count() const override { return 2; }

    VectorXd reset() override;
    StepResult step(int action_id) override;

    void reseed(std::uint64_t seed) override { rng_ = Rng(seed); }
    std::unique_ptr<RlEnv> clone() const override;

    std::string snapshot() const override;
    void restore(const std::string& text) override;

    int state() const { return state_; }

private:
    VectorXd observe() const;

    int episode_cap_;
    Rng rng_;
    bool episode_open_ = false;
    int state_ = 0;
    int t_ = 0;
};

}  // namespace paverl::rlenv
