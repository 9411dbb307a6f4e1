#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "paverl/common.hpp"
#include "paverl/neural.hpp"
#include "paverl/rlenv.hpp"

// The two learners — DQN with replay memory and a target network, and PPO
// with the clipped surrogate objective — plus greedy plan extraction.
namespace paverl::agents {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Replay memory
// ---------------------------------------------------------------------------

struct Transition {
    VectorXd state;
    int action = 0;
    double reward = 0.0;
    VectorXd next_state;
    bool terminal = false;  // true MDP end only; truncation still bootstraps
};

// Fixed-capacity ring: oldest evicted first.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return buffer_.size(); }
    std::size_t capacity() const { return capacity_; }
    // Logical index 0 = oldest retained transition.
    const Transition& at(std::size_t i) const;

    // Uniform without replacement within the batch. Throws ValidationError
    // when batch exceeds the current size.
    std::vector<Transition> sample(std::size_t batch, Rng& rng) const;

    std::string to_json_string() const;
    static ReplayMemory from_json_string(const std::string& text);

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // next write slot once full
    std::vector<Transition> buffer_;
};

// ---------------------------------------------------------------------------
// Shared training control
// ---------------------------------------------------------------------------

// Checkpointing and resume for the training loops. The checkpoint file is
// rewritten in place every `checkpoint_every` units (DQN: episodes, PPO:
// update iterations). On divergence the trainer writes
// `<checkpoint_path>.diverged` (when a path is set) and throws RuntimeAbort.
struct TrainControl {
    int checkpoint_every = 0;  // 0 = no periodic checkpoints
    std::string checkpoint_path;
    std::string resume_from;  // continue from this checkpoint when non-empty
};

// ---------------------------------------------------------------------------
// DQN
// ---------------------------------------------------------------------------

struct DqnConfig {
    double gamma = 0.99;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    int epsilon_decay_steps = 20000;  // linear schedule over global env steps
    std::size_t replay_capacity = 50000;
    int batch_size = 64;
    int warmup_transitions = 500;  // replay fill before learning starts
    int target_sync_period = 500;  // env steps between target syncs
    double learning_rate = 2.5e-4;
    int episodes = 1000;
    // When > 0, stop at the first episode boundary at or past this many
    // cumulative env steps (matched-budget comparisons).
    long max_env_steps = 0;
    std::vector<int> hidden = {64, 64};
    // Double-network targets by default; false reuses the online net for
    // targets (the theta' = theta degeneracy).
    bool double_network = true;
};

void validate(const DqnConfig& cfg);
DqnConfig load_dqn_config(const std::string& path);
void save_dqn_config(const DqnConfig& cfg, const std::string& path);

// With probability epsilon a uniform action, otherwise the argmax
// (ties break to the lowest id). Always consumes exactly one uniform draw
// plus one more when exploring.
int epsilon_greedy(const VectorXd& q_values, double epsilon, Rng& rng);

// target_i = reward_i + gamma * max_a q(next_i, a; target_net), with the
// bootstrap term dropped on terminal transitions.
VectorXd td_targets(const std::vector<Transition>& batch, const neural::Mlp& target_net,
                    double gamma);

struct DqnLogRow {
    int episode = 0;
    int steps = 0;
    long cumulative_env_steps = 0;
    double episode_reward = 0.0;
    double epsilon = 0.0;
    double mean_loss = 0.0;  // mean TD loss over the episode's updates, 0 before warm-up
};

struct DqnResult {
    neural::Mlp q_net;
    std::vector<DqnLogRow> log;
};

void save_dqn_log_csv(const std::vector<DqnLogRow>& log, const std::string& path);

// Runs cfg.episodes episodes against env (mutating it). Deterministic for a
// given (seed, config, env). Throws RuntimeAbort on NaN loss after writing a
// diagnostic checkpoint (see TrainControl).
DqnResult train_dqn(rlenv::RlEnv& env, const DqnConfig& cfg, std::uint64_t seed,
                    const TrainControl& control = {});

// ---------------------------------------------------------------------------
// PPO
// ---------------------------------------------------------------------------

struct PpoConfig {
    int steps_per_update = 128;  // M, per executor
    int executors = 4;           // N
    double learning_rate = 2.5e-4;
    double gamma = 0.99;
    double clip = 0.2;           // alpha
    double entropy_coef = 0.04;
    double value_coef = 0.5;
    int epochs = 4;              // K passes over each collected batch
    int minibatch_size = 128;
    double gae_lambda = 0.95;
    int iterations = 500;
    std::vector<int> policy_hidden = {64, 64};
    std::vector<int> value_hidden = {64, 64};
};

void validate(const PpoConfig& cfg);
PpoConfig load_ppo_config(const std::string& path);
void save_ppo_config(const PpoConfig& cfg, const std::string& path);

// One flattened update batch (all executors). Observations are columns.
struct PpoBatch {
    MatrixXd observations;
    std::vector<int> actions;
    VectorXd old_log_probs;
    VectorXd advantages;  // normalized before the loss
    VectorXd returns;
};

// Generalized advantage estimation over one executor's step sequence.
// `values` holds V(s_t) for each collected step; `bootstrap_value` is
// V(s_{t+1}) used past the sequence end and at truncation points; the chain
// and the bootstrap are cut at terminal steps.
void compute_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                        const std::vector<bool>& terminals, const std::vector<bool>& truncations,
                        const std::vector<double>& bootstrap_values, double gamma, double lambda,
                        std::vector<double>* advantages, std::vector<double>* returns);

struct PpoLossBreakdown {
    double policy_loss = 0.0;   // -E[min(rho*A, clip(rho)*A)]
    double value_loss = 0.0;    // E[(V - return)^2]
    double entropy = 0.0;       // mean policy entropy
    double total = 0.0;         // policy + value_coef*value - entropy_coef*entropy
};

// Loss and exact gradients for one minibatch. Aborts (RuntimeAbort) on a
// non-finite probability ratio. `policy_output_grad_out`, when non-null,
// receives dLoss/dprobabilities (one column per sample) for inspection.
PpoLossBreakdown clipped_loss(const PpoBatch& batch, const neural::Mlp& policy,
                              const neural::Mlp& value, const PpoConfig& cfg,
                              neural::Gradients* policy_grads, neural::Gradients* value_grads,
                              MatrixXd* policy_output_grad_out = nullptr);

struct PpoLogRow {
    int iteration = 0;
    long cumulative_env_steps = 0;
    int episodes_completed = 0;      // episodes that ended during this iteration
    double mean_episode_reward = 0.0;  // over this iteration's completed episodes
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
};

struct PpoResult {
    neural::Mlp policy;
    neural::Mlp value;
    std::vector<PpoLogRow> log;
};

void save_ppo_log_csv(const std::vector<PpoLogRow>& log, const std::string& path);

// Clones `env_prototype` into cfg.executors independent rollout environments
// and runs cfg.iterations collect/update rounds. Deterministic per seed.
// Throws RuntimeAbort on any non-finite quantity after writing a diagnostic
// checkpoint (see TrainControl).
PpoResult train_ppo(const rlenv::RlEnv& env_prototype, const PpoConfig& cfg, std::uint64_t seed,
                    const TrainControl& control = {});

// ---------------------------------------------------------------------------
// Plan extraction
// ---------------------------------------------------------------------------

struct PlanResult {
    std::vector<int> actions;    // one per year
    std::vector<std::pair<double, double>> trajectory;  // (iri, rd), horizon+1 points
    rewardlca::RewardLedger ledger;
};

// Deterministic argmax rollout from s0 over the environment's horizon. Works
// with either a softmax policy head or a linear Q head (argmax agrees).
PlanResult greedy_plan(const neural::Mlp& net, rlenv::MaintenanceRlEnv& env,
                       const domain::SegmentState& s0);

}  // namespace paverl::agents
