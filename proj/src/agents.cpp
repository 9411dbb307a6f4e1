#include "paverl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace paverl::agents {

namespace {

constexpr double kProbFloor = 1e-300;  // keeps log() finite for underflowed probabilities

int argmax_lowest(const VectorXd& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i) {
        if (v(i) > v(best)) best = i;
    }
    return best;
}

int sample_categorical(const VectorXd& probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
        acc += probs(i);
        if (u < acc) return i;
    }
    return static_cast<int>(probs.size()) - 1;
}

std::string vector_to_hex(const VectorXd& v) {
    return doubles_to_hex(v.data(), static_cast<std::size_t>(v.size()));
}

VectorXd vector_from_hex(const std::string& hex) {
    const std::vector<double> vals = hex_to_doubles(hex);
    VectorXd v(static_cast<Eigen::Index>(vals.size()));
    std::copy(vals.begin(), vals.end(), v.data());
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Replay memory
// ---------------------------------------------------------------------------

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay memory: capacity must be >= 1");
    buffer_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayMemory::push(Transition t) {
    if (buffer_.size() < capacity_) {
        buffer_.push_back(std::move(t));
    } else {
        buffer_[head_] = std::move(t);
        head_ = (head_ + 1) % capacity_;
    }
}

const Transition& ReplayMemory::at(std::size_t i) const {
    if (i >= buffer_.size()) throw ValidationError("replay memory: index out of range");
    if (buffer_.size() < capacity_) return buffer_[i];
    return buffer_[(head_ + i) % capacity_];
}

std::vector<Transition> ReplayMemory::sample(std::size_t batch, Rng& rng) const {
    if (batch > buffer_.size()) {
        throw ValidationError("replay memory: batch " + std::to_string(batch) +
                              " exceeds stored " + std::to_string(buffer_.size()));
    }
    // Floyd's sampling: uniform without replacement in O(batch).
    std::set<std::size_t> chosen;
    std::vector<Transition> out;
    out.reserve(batch);
    for (std::size_t i = buffer_.size() - batch; i < buffer_.size(); ++i) {
        const std::size_t j = rng.uniform_int(i + 1);
        const std::size_t pick = chosen.count(j) ? i : j;
        chosen.insert(pick);
        out.push_back(at(pick));
    }
    return out;
}

std::string ReplayMemory::to_json_string() const {
    nlohmann::json j;
    j["capacity"] = capacity_;
    j["head"] = head_;
    j["transitions"] = nlohmann::json::array();
    for (const Transition& t : buffer_) {
        j["transitions"].push_back({{"s", vector_to_hex(t.state)},
                                    {"a", t.action},
                                    {"r", doubles_to_hex(&t.reward, 1)},
                                    {"s2", vector_to_hex(t.next_state)},
                                    {"terminal", t.terminal}});
    }
    return j.dump();
}

ReplayMemory ReplayMemory::from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("replay restore: invalid JSON: ") + e.what());
    }
    ReplayMemory mem(j.at("capacity").get<std::size_t>());
    mem.head_ = j.at("head").get<std::size_t>();
    for (const auto& jt : j.at("transitions")) {
        Transition t;
        t.state = vector_from_hex(jt.at("s").get<std::string>());
        t.action = jt.at("a").get<int>();
        t.reward = hex_to_doubles(jt.at("r").get<std::string>()).at(0);
        t.next_state = vector_from_hex(jt.at("s2").get<std::string>());
        t.terminal = jt.at("terminal").get<bool>();
        mem.buffer_.push_back(std::move(t));
    }
    if (mem.buffer_.size() > mem.capacity_ ||
        (mem.head_ != 0 && mem.head_ >= mem.buffer_.size())) {
        throw ConfigError("replay restore: inconsistent buffer state");
    }
    return mem;
}

// ---------------------------------------------------------------------------
// DQN
// ---------------------------------------------------------------------------

void validate(const DqnConfig& cfg) {
    if (!(cfg.gamma > 0.0) || cfg.gamma > 1.0) throw ConfigError("dqn: gamma must be in (0, 1]");
    for (double e : {cfg.epsilon_start, cfg.epsilon_end}) {
        if (e < 0.0 || e > 1.0) throw ConfigError("dqn: epsilon must be in [0, 1]");
    }
    if (cfg.epsilon_decay_steps < 1) throw ConfigError("dqn: epsilon decay steps must be >= 1");
    if (cfg.target_sync_period < 1) throw ConfigError("dqn: target sync period must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("dqn: batch size must be >= 1");
    if (cfg.replay_capacity < static_cast<std::size_t>(cfg.batch_size)) {
        throw ConfigError("dqn: replay capacity must be >= batch size");
    }
    if (cfg.warmup_transitions < cfg.batch_size) {
        throw ConfigError("dqn: warm-up must cover at least one batch");
    }
    if (cfg.episodes < 1) throw ConfigError("dqn: episode count must be >= 1");
    if (cfg.max_env_steps < 0) throw ConfigError("dqn: max env steps must be >= 0");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("dqn: learning rate must be positive");
    if (cfg.hidden.empty()) throw ConfigError("dqn: at least one hidden layer");
}

DqnConfig load_dqn_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_dqn_config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("load_dqn_config: invalid JSON: ") + e.what());
    }
    DqnConfig cfg;
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.epsilon_start = j.value("epsilon_start", cfg.epsilon_start);
    cfg.epsilon_end = j.value("epsilon_end", cfg.epsilon_end);
    cfg.epsilon_decay_steps = j.value("epsilon_decay_steps", cfg.epsilon_decay_steps);
    cfg.replay_capacity = j.value("replay_capacity", cfg.replay_capacity);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.warmup_transitions = j.value("warmup_transitions", cfg.warmup_transitions);
    cfg.target_sync_period = j.value("target_sync_period", cfg.target_sync_period);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.episodes = j.value("episodes", cfg.episodes);
    cfg.max_env_steps = j.value("max_env_steps", cfg.max_env_steps);
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.double_network = j.value("double_network", cfg.double_network);
    validate(cfg);
    return cfg;
}

void save_dqn_config(const DqnConfig& cfg, const std::string& path) {
    nlohmann::json j;
    j["format"] = "paverl-dqn-config";
    j["format_version"] = 1;
    j["gamma"] = cfg.gamma;
    j["epsilon_start"] = cfg.epsilon_start;
    j["epsilon_end"] = cfg.epsilon_end;
    j["epsilon_decay_steps"] = cfg.epsilon_decay_steps;
    j["replay_capacity"] = cfg.replay_capacity;
    j["batch_size"] = cfg.batch_size;
    j["warmup_transitions"] = cfg.warmup_transitions;
    j["target_sync_period"] = cfg.target_sync_period;
    j["learning_rate"] = cfg.learning_rate;
    j["episodes"] = cfg.episodes;
    j["max_env_steps"] = cfg.max_env_steps;
    j["hidden"] = cfg.hidden;
    j["double_network"] = cfg.double_network;
    std::ofstream out(path);
    if (!out) throw ConfigError("save_dqn_config: cannot open " + path);
    out << j.dump(2) << "\n";
}

int epsilon_greedy(const VectorXd& q_values, double epsilon, Rng& rng) {
    if (epsilon < 0.0 || epsilon > 1.0) {
        throw ValidationError("epsilon_greedy: epsilon must be in [0, 1]");
    }
    if (rng.uniform() < epsilon) {
        return static_cast<int>(rng.uniform_int(static_cast<std::size_t>(q_values.size())));
    }
    return argmax_lowest(q_values);
}

VectorXd td_targets(const std::vector<Transition>& batch, const neural::Mlp& target_net,
                    double gamma) {
    if (batch.empty()) throw ValidationError("td_targets: empty batch");
    const Eigen::Index obs_size = batch.front().next_state.size();
    if (target_net.input_size() != obs_size) {
        throw ValidationError("td_targets: network input does not match observation size");
    }
    MatrixXd next(obs_size, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) {
        if (batch[k].next_state.size() != obs_size) {
            throw ValidationError("td_targets: inconsistent observation sizes in batch");
        }
        next.col(static_cast<Eigen::Index>(k)) = batch[k].next_state;
    }
    const MatrixXd q_next = neural::forward(target_net, next);
    VectorXd targets(static_cast<Eigen::Index>(batch.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto col = static_cast<Eigen::Index>(k);
        targets(col) = batch[k].reward +
                       (batch[k].terminal ? 0.0 : gamma * q_next.col(col).maxCoeff());
    }
    return targets;
}

void save_dqn_log_csv(const std::vector<DqnLogRow>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_dqn_log_csv: cannot open " + path);
    out << "episode,steps,cumulative_env_steps,episode_reward,epsilon,mean_loss\n";
    for (const DqnLogRow& r : log) {
        out << r.episode << "," << r.steps << "," << r.cumulative_env_steps << ","
            << fmt_double(r.episode_reward) << "," << fmt_double(r.epsilon) << ","
            << fmt_double(r.mean_loss) << "\n";
    }
}

namespace {

double epsilon_at(long step, const DqnConfig& cfg) {
    const double frac =
        std::min(1.0, static_cast<double>(step) / static_cast<double>(cfg.epsilon_decay_steps));
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

nlohmann::json dqn_log_to_json(const std::vector<DqnLogRow>& log) {
    nlohmann::json rows = nlohmann::json::array();
    for (const DqnLogRow& r : log) {
        const double vals[3] = {r.episode_reward, r.epsilon, r.mean_loss};
        rows.push_back({{"episode", r.episode},
                        {"steps", r.steps},
                        {"env_steps", r.cumulative_env_steps},
                        {"vals_hex", doubles_to_hex(vals, 3)}});
    }
    return rows;
}

std::vector<DqnLogRow> dqn_log_from_json(const nlohmann::json& rows) {
    std::vector<DqnLogRow> log;
    for (const auto& jr : rows) {
        DqnLogRow r;
        r.episode = jr.at("episode").get<int>();
        r.steps = jr.at("steps").get<int>();
        r.cumulative_env_steps = jr.at("env_steps").get<long>();
        const std::vector<double> vals = hex_to_doubles(jr.at("vals_hex").get<std::string>());
        if (vals.size() != 3) throw ConfigError("checkpoint: corrupt log row");
        r.episode_reward = vals[0];
        r.epsilon = vals[1];
        r.mean_loss = vals[2];
        log.push_back(r);
    }
    return log;
}

struct DqnState {
    neural::Mlp q;
    neural::Mlp target;
    neural::OptimizerState opt;
    ReplayMemory replay{1};
    Rng rng{0};
    long global_step = 0;
    std::vector<DqnLogRow> log;
};

void save_dqn_checkpoint(const DqnState& st, const rlenv::RlEnv& env, const std::string& path) {
    nlohmann::json j;
    j["format"] = "paverl-checkpoint";
    j["format_version"] = 1;
    j["algo"] = "dqn";
    j["q"] = nlohmann::json::parse(neural::mlp_to_json_string(st.q));
    j["target"] = nlohmann::json::parse(neural::mlp_to_json_string(st.target));
    j["optimizer"] = nlohmann::json::parse(neural::optimizer_to_json_string(st.opt));
    j["replay"] = nlohmann::json::parse(st.replay.to_json_string());
    j["rng"] = st.rng.save_state();
    j["global_step"] = st.global_step;
    j["env"] = nlohmann::json::parse(env.snapshot());
    j["log"] = dqn_log_to_json(st.log);
    std::ofstream out(path);
    if (!out) throw ConfigError("checkpoint: cannot open " + path);
    out << j.dump() << "\n";
}

DqnState load_dqn_checkpoint(const std::string& path, rlenv::RlEnv& env) {
    std::ifstream in(path);
    if (!in) throw ConfigError("checkpoint: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    if (j.value("algo", "") != "dqn") throw ConfigError("checkpoint: not a dqn checkpoint");
    DqnState st;
    st.q = neural::mlp_from_json_string(j.at("q").dump());
    st.target = neural::mlp_from_json_string(j.at("target").dump());
    st.opt = neural::optimizer_from_json_string(j.at("optimizer").dump());
    st.replay = ReplayMemory::from_json_string(j.at("replay").dump());
    st.rng.load_state(j.at("rng").get<std::string>());
    st.global_step = j.at("global_step").get<long>();
    st.log = dqn_log_from_json(j.at("log"));
    env.restore(j.at("env").dump());
    return st;
}

}  // namespace

DqnResult train_dqn(rlenv::RlEnv& env, const DqnConfig& cfg, std::uint64_t seed,
                    const TrainControl& control) {
    validate(cfg);
    const int obs_size = env.observation_size();
    const int n_actions = env.action_count();

    DqnState st;
    if (!control.resume_from.empty()) {
        st = load_dqn_checkpoint(control.resume_from, env);
    } else {
        st.rng = Rng(seed);
        std::vector<int> sizes = {obs_size};
        sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
        sizes.push_back(n_actions);
        st.q = neural::mlp_new(sizes, neural::Head::Linear, st.rng.next_seed());
        st.target = st.q;
        st.opt = neural::make_optimizer(neural::OptimizerKind::Adam, cfg.learning_rate);
        st.replay = ReplayMemory(cfg.replay_capacity);
        env.reseed(st.rng.next_seed());
    }

    auto diverge = [&](const std::string& what) -> RuntimeAbort {
        std::string msg = "dqn training diverged: " + what;
        if (!control.checkpoint_path.empty()) {
            const std::string diag = control.checkpoint_path + ".diverged";
            save_dqn_checkpoint(st, env, diag);
            msg += " (diagnostic checkpoint: " + diag + ")";
        }
        return RuntimeAbort(msg);
    };

    for (int ep = static_cast<int>(st.log.size()); ep < cfg.episodes; ++ep) {
        if (cfg.max_env_steps > 0 && st.global_step >= cfg.max_env_steps) break;
        VectorXd obs = env.reset();
        double episode_reward = 0.0;
        double loss_sum = 0.0;
        int loss_count = 0;
        int steps = 0;
        double epsilon = epsilon_at(st.global_step, cfg);

        bool done = false;
        while (!done) {
            epsilon = epsilon_at(st.global_step, cfg);
            const VectorXd q_s = neural::forward(st.q, obs);
            const int a = epsilon_greedy(q_s, epsilon, st.rng);
            const rlenv::StepResult res = env.step(a);
            st.replay.push({obs, a, res.reward, res.observation, res.terminal});
            obs = res.observation;
            episode_reward += res.reward;
            ++steps;
            ++st.global_step;

            if (st.replay.size() >= static_cast<std::size_t>(cfg.warmup_transitions)) {
                const std::vector<Transition> batch =
                    st.replay.sample(static_cast<std::size_t>(cfg.batch_size), st.rng);
                const auto b = static_cast<Eigen::Index>(batch.size());
                MatrixXd x(obs_size, b);
                for (Eigen::Index k = 0; k < b; ++k) {
                    x.col(k) = batch[static_cast<std::size_t>(k)].state;
                }
                neural::ForwardCache cache;
                const MatrixXd pred = neural::forward(st.q, x, &cache);
                const VectorXd targets =
                    td_targets(batch, cfg.double_network ? st.target : st.q, cfg.gamma);
                MatrixXd grad = MatrixXd::Zero(n_actions, b);
                double loss = 0.0;
                for (Eigen::Index k = 0; k < b; ++k) {
                    const int ak = batch[static_cast<std::size_t>(k)].action;
                    const double diff = pred(ak, k) - targets(k);
                    loss += diff * diff;
                    grad(ak, k) = 2.0 * diff / static_cast<double>(b);
                }
                loss /= static_cast<double>(b);
                if (!std::isfinite(loss)) throw diverge("non-finite TD loss");
                neural::optimizer_step(st.q, neural::backward(st.q, cache, grad), st.opt);
                loss_sum += loss;
                ++loss_count;
            }
            if (st.global_step % cfg.target_sync_period == 0) st.target = st.q;
            done = res.terminal || res.truncated;
        }

        DqnLogRow row;
        row.episode = ep;
        row.steps = steps;
        row.cumulative_env_steps = st.global_step;
        row.episode_reward = episode_reward;
        row.epsilon = epsilon;
        row.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
        st.log.push_back(row);

        if (control.checkpoint_every > 0 && !control.checkpoint_path.empty() &&
            (ep + 1) % control.checkpoint_every == 0) {
            save_dqn_checkpoint(st, env, control.checkpoint_path);
        }
    }

    if (!control.checkpoint_path.empty()) save_dqn_checkpoint(st, env, control.checkpoint_path);
    return {std::move(st.q), std::move(st.log)};
}

// ---------------------------------------------------------------------------
// PPO
// ---------------------------------------------------------------------------

void validate(const PpoConfig& cfg) {
    if (cfg.steps_per_update < 1) throw ConfigError("ppo: steps per update must be >= 1");
    if (cfg.executors < 1) throw ConfigError("ppo: executor count must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("ppo: learning rate must be positive");
    if (!(cfg.gamma > 0.0) || cfg.gamma > 1.0) throw ConfigError("ppo: gamma must be in (0, 1]");
    if (!(cfg.clip > 0.0) || cfg.clip >= 1.0) throw ConfigError("ppo: clip must be in (0, 1)");
    if (cfg.entropy_coef < 0.0 || cfg.value_coef < 0.0) {
        throw ConfigError("ppo: loss coefficients must be >= 0");
    }
    if (cfg.epochs < 1) throw ConfigError("ppo: epochs must be >= 1");
    if (cfg.minibatch_size < 1) throw ConfigError("ppo: minibatch size must be >= 1");
    if (cfg.gae_lambda < 0.0 || cfg.gae_lambda > 1.0) {
        throw ConfigError("ppo: gae lambda must be in [0, 1]");
    }
    if (cfg.iterations < 1) throw ConfigError("ppo: iteration count must be >= 1");
    if (cfg.policy_hidden.empty() || cfg.value_hidden.empty()) {
        throw ConfigError("ppo: at least one hidden layer per network");
    }
}

PpoConfig load_ppo_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_ppo_config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("load_ppo_config: invalid JSON: ") + e.what());
    }
    PpoConfig cfg;
    cfg.steps_per_update = j.value("steps_per_update", cfg.steps_per_update);
    cfg.executors = j.value("executors", cfg.executors);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.clip = j.value("clip", cfg.clip);
    cfg.entropy_coef = j.value("entropy_coef", cfg.entropy_coef);
    cfg.value_coef = j.value("value_coef", cfg.value_coef);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.minibatch_size = j.value("minibatch_size", cfg.minibatch_size);
    cfg.gae_lambda = j.value("gae_lambda", cfg.gae_lambda);
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.policy_hidden = j.value("policy_hidden", cfg.policy_hidden);
    cfg.value_hidden = j.value("value_hidden", cfg.value_hidden);
    validate(cfg);
    return cfg;
}

void save_ppo_config(const PpoConfig& cfg, const std::string& path) {
    nlohmann::json j;
    j["format"] = "paverl-ppo-config";
    j["format_version"] = 1;
    j["steps_per_update"] = cfg.steps_per_update;
    j["executors"] = cfg.executors;
    j["learning_rate"] = cfg.learning_rate;
    j["gamma"] = cfg.gamma;
    j["clip"] = cfg.clip;
    j["entropy_coef"] = cfg.entropy_coef;
    j["value_coef"] = cfg.value_coef;
    j["epochs"] = cfg.epochs;
    j["minibatch_size"] = cfg.minibatch_size;
    j["gae_lambda"] = cfg.gae_lambda;
    j["iterations"] = cfg.iterations;
    j["policy_hidden"] = cfg.policy_hidden;
    j["value_hidden"] = cfg.value_hidden;
    std::ofstream out(path);
    if (!out) throw ConfigError("save_ppo_config: cannot open " + path);
    out << j.dump(2) << "\n";
}

void compute_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                        const std::vector<bool>& terminals, const std::vector<bool>& truncations,
                        const std::vector<double>& bootstrap_values, double gamma, double lambda,
                        std::vector<double>* advantages, std::vector<double>* returns) {
    const std::size_t n = rewards.size();
    if (values.size() != n || terminals.size() != n || truncations.size() != n ||
        bootstrap_values.size() != n) {
        throw ValidationError("compute_advantages: sequence length mismatch");
    }
    advantages->assign(n, 0.0);
    returns->assign(n, 0.0);
    double next_adv = 0.0;
    for (std::size_t idx = n; idx-- > 0;) {
        double next_value;
        if (terminals[idx]) {
            next_value = 0.0;  // true MDP end: nothing past it
            next_adv = 0.0;
        } else if (truncations[idx] || idx + 1 == n) {
            next_value = bootstrap_values[idx];  // bootstrap through the cut
            next_adv = 0.0;
        } else {
            next_value = values[idx + 1];
        }
        const double delta = rewards[idx] + gamma * next_value - values[idx];
        const double adv = delta + gamma * lambda * next_adv;
        (*advantages)[idx] = adv;
        (*returns)[idx] = adv + values[idx];
        next_adv = adv;
    }
    for (double a : *advantages) {
        if (!std::isfinite(a)) throw ValidationError("compute_advantages: non-finite advantage");
    }
}

PpoLossBreakdown clipped_loss(const PpoBatch& batch, const neural::Mlp& policy,
                              const neural::Mlp& value, const PpoConfig& cfg,
                              neural::Gradients* policy_grads, neural::Gradients* value_grads,
                              MatrixXd* policy_output_grad_out) {
    const auto b = static_cast<Eigen::Index>(batch.actions.size());
    if (batch.observations.cols() != b || batch.old_log_probs.size() != b ||
        batch.advantages.size() != b || batch.returns.size() != b || b == 0) {
        throw ValidationError("clipped_loss: inconsistent batch");
    }

    neural::ForwardCache pcache, vcache;
    const MatrixXd probs = neural::forward(policy, batch.observations, &pcache);
    const MatrixXd vals = neural::forward(value, batch.observations, &vcache);

    MatrixXd pgrad = MatrixXd::Zero(probs.rows(), b);
    MatrixXd vgrad(1, b);
    PpoLossBreakdown out;
    const double inv_b = 1.0 / static_cast<double>(b);

    for (Eigen::Index k = 0; k < b; ++k) {
        const int a = batch.actions[static_cast<std::size_t>(k)];
        if (a < 0 || a >= probs.rows()) throw ValidationError("clipped_loss: action out of range");
        const double p_new = std::max(probs(a, k), kProbFloor);
        const double log_p_new = std::log(p_new);
        const double rho = std::exp(log_p_new - batch.old_log_probs(k));
        if (!std::isfinite(rho)) {
            throw RuntimeAbort("clipped_loss: non-finite probability ratio");
        }
        const double adv = batch.advantages(k);
        const double clipped_rho = std::clamp(rho, 1.0 - cfg.clip, 1.0 + cfg.clip);
        const double surrogate = std::min(rho * adv, clipped_rho * adv);
        out.policy_loss -= surrogate * inv_b;

        // The min() is flat in rho exactly when the clipped branch is active.
        const bool flat = (adv > 0.0 && rho > 1.0 + cfg.clip) ||
                          (adv < 0.0 && rho < 1.0 - cfg.clip);
        if (!flat) {
            // d(-surrogate)/dp_new = -adv * rho / p_new (= -adv / p_old).
            pgrad(a, k) -= adv * rho / p_new * inv_b;
        }

        double entropy_k = 0.0;
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            const double p = std::max(probs(i, k), kProbFloor);
            entropy_k -= probs(i, k) * std::log(p);
            // -entropy_coef * dH/dp = entropy_coef * (log p + 1).
            pgrad(i, k) += cfg.entropy_coef * (std::log(p) + 1.0) * inv_b;
        }
        out.entropy += entropy_k * inv_b;

        const double diff = vals(0, k) - batch.returns(k);
        out.value_loss += diff * diff * inv_b;
        vgrad(0, k) = cfg.value_coef * 2.0 * diff * inv_b;
    }

    out.total = out.policy_loss + cfg.value_coef * out.value_loss - cfg.entropy_coef * out.entropy;
    if (policy_output_grad_out) *policy_output_grad_out = pgrad;
    if (policy_grads) *policy_grads = neural::backward(policy, pcache, pgrad);
    if (value_grads) *value_grads = neural::backward(value, vcache, vgrad);
    return out;
}

void save_ppo_log_csv(const std::vector<PpoLogRow>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_ppo_log_csv: cannot open " + path);
    out << "iteration,cumulative_env_steps,episodes_completed,mean_episode_reward,"
           "policy_loss,value_loss,entropy\n";
    for (const PpoLogRow& r : log) {
        out << r.iteration << "," << r.cumulative_env_steps << "," << r.episodes_completed << ","
            << fmt_double(r.mean_episode_reward) << "," << fmt_double(r.policy_loss) << ","
            << fmt_double(r.value_loss) << "," << fmt_double(r.entropy) << "\n";
    }
}

namespace {

struct ExecutorState {
    std::unique_ptr<rlenv::RlEnv> env;
    VectorXd obs;
    double episode_reward = 0.0;
    bool open = false;
};

struct PpoState {
    neural::Mlp policy;
    neural::Mlp value;
    neural::OptimizerState opt_policy;
    neural::OptimizerState opt_value;
    Rng rng{0};
    long env_steps = 0;
    std::vector<PpoLogRow> log;
    std::vector<ExecutorState> executors;
};

nlohmann::json ppo_log_to_json(const std::vector<PpoLogRow>& log) {
    nlohmann::json rows = nlohmann::json::array();
    for (const PpoLogRow& r : log) {
        const double vals[4] = {r.mean_episode_reward, r.policy_loss, r.value_loss, r.entropy};
        rows.push_back({{"iteration", r.iteration},
                        {"env_steps", r.cumulative_env_steps},
                        {"episodes", r.episodes_completed},
                        {"vals_hex", doubles_to_hex(vals, 4)}});
    }
    return rows;
}

std::vector<PpoLogRow> ppo_log_from_json(const nlohmann::json& rows) {
    std::vector<PpoLogRow> log;
    for (const auto& jr : rows) {
        PpoLogRow r;
        r.iteration = jr.at("iteration").get<int>();
        r.cumulative_env_steps = jr.at("env_steps").get<long>();
        r.episodes_completed = jr.at("episodes").get<int>();
        const std::vector<double> vals = hex_to_doubles(jr.at("vals_hex").get<std::string>());
        if (vals.size() != 4) throw ConfigError("checkpoint: corrupt log row");
        r.mean_episode_reward = vals[0];
        r.policy_loss = vals[1];
        r.value_loss = vals[2];
        r.entropy = vals[3];
        log.push_back(r);
    }
    return log;
}

void save_ppo_checkpoint(const PpoState& st, const std::string& path) {
    nlohmann::json j;
    j["format"] = "paverl-checkpoint";
    j["format_version"] = 1;
    j["algo"] = "ppo";
    j["policy"] = nlohmann::json::parse(neural::mlp_to_json_string(st.policy));
    j["value"] = nlohmann::json::parse(neural::mlp_to_json_string(st.value));
    j["opt_policy"] = nlohmann::json::parse(neural::optimizer_to_json_string(st.opt_policy));
    j["opt_value"] = nlohmann::json::parse(neural::optimizer_to_json_string(st.opt_value));
    j["rng"] = st.rng.save_state();
    j["env_steps"] = st.env_steps;
    j["log"] = ppo_log_to_json(st.log);
    j["executors"] = nlohmann::json::array();
    for (const ExecutorState& ex : st.executors) {
        j["executors"].push_back({{"env", nlohmann::json::parse(ex.env->snapshot())},
                                  {"obs", ex.open ? vector_to_hex(ex.obs) : ""},
                                  {"episode_reward", doubles_to_hex(&ex.episode_reward, 1)},
                                  {"open", ex.open}});
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("checkpoint: cannot open " + path);
    out << j.dump() << "\n";
}

void load_ppo_checkpoint(const std::string& path, PpoState& st) {
    std::ifstream in(path);
    if (!in) throw ConfigError("checkpoint: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    if (j.value("algo", "") != "ppo") throw ConfigError("checkpoint: not a ppo checkpoint");
    st.policy = neural::mlp_from_json_string(j.at("policy").dump());
    st.value = neural::mlp_from_json_string(j.at("value").dump());
    st.opt_policy = neural::optimizer_from_json_string(j.at("opt_policy").dump());
    st.opt_value = neural::optimizer_from_json_string(j.at("opt_value").dump());
    st.rng.load_state(j.at("rng").get<std::string>());
    st.env_steps = j.at("env_steps").get<long>();
    st.log = ppo_log_from_json(j.at("log"));
    const auto& jx = j.at("executors");
    if (jx.size() != st.executors.size()) {
        throw ConfigError("checkpoint: executor count does not match configuration");
    }
    for (std::size_t e = 0; e < st.executors.size(); ++e) {
        ExecutorState& ex = st.executors[e];
        ex.env->restore(jx[e].at("env").dump());
        ex.open = jx[e].at("open").get<bool>();
        ex.obs = ex.open ? vector_from_hex(jx[e].at("obs").get<std::string>()) : VectorXd();
        ex.episode_reward = hex_to_doubles(jx[e].at("episode_reward").get<std::string>()).at(0);
    }
}

}  // namespace

PpoResult train_ppo(const rlenv::RlEnv& env_prototype, const PpoConfig& cfg, std::uint64_t seed,
                    const TrainControl& control) {
    validate(cfg);
    const int obs_size = env_prototype.observation_size();
    const int n_actions = env_prototype.action_count();
    const int m = cfg.steps_per_update;
    const std::size_t n_exec = static_cast<std::size_t>(cfg.executors);

    PpoState st;
    st.executors.resize(n_exec);
    for (ExecutorState& ex : st.executors) ex.env = env_prototype.clone();

    if (!control.resume_from.empty()) {
        load_ppo_checkpoint(control.resume_from, st);
    } else {
        st.rng = Rng(seed);
        std::vector<int> psizes = {obs_size};
        psizes.insert(psizes.end(), cfg.policy_hidden.begin(), cfg.policy_hidden.end());
        psizes.push_back(n_actions);
        st.policy = neural::mlp_new(psizes, neural::Head::Softmax, st.rng.next_seed());
        std::vector<int> vsizes = {obs_size};
        vsizes.insert(vsizes.end(), cfg.value_hidden.begin(), cfg.value_hidden.end());
        vsizes.push_back(1);
        st.value = neural::mlp_new(vsizes, neural::Head::Linear, st.rng.next_seed());
        st.opt_policy = neural::make_optimizer(neural::OptimizerKind::Adam, cfg.learning_rate);
        st.opt_value = neural::make_optimizer(neural::OptimizerKind::Adam, cfg.learning_rate);
        for (ExecutorState& ex : st.executors) ex.env->reseed(st.rng.next_seed());
    }

    auto diverge = [&](const std::string& what) -> RuntimeAbort {
        std::string msg = "ppo training diverged: " + what;
        if (!control.checkpoint_path.empty()) {
            const std::string diag = control.checkpoint_path + ".diverged";
            save_ppo_checkpoint(st, diag);
            msg += " (diagnostic checkpoint: " + diag + ")";
        }
        return RuntimeAbort(msg);
    };

    const Eigen::Index batch_total = static_cast<Eigen::Index>(n_exec) * m;

    for (int iter = st.log.empty() ? 0 : st.log.back().iteration + 1; iter < cfg.iterations;
         ++iter) {
        // --- Collection under the current (old) policy ---
        PpoBatch batch;
        batch.observations.resize(obs_size, batch_total);
        batch.actions.resize(static_cast<std::size_t>(batch_total));
        batch.old_log_probs.resize(batch_total);
        VectorXd raw_adv(batch_total);
        batch.returns.resize(batch_total);

        int episodes_completed = 0;
        double completed_reward_sum = 0.0;
        Eigen::Index cursor = 0;

        for (std::size_t e = 0; e < n_exec; ++e) {
            ExecutorState& ex = st.executors[e];
            std::vector<double> rewards, values, bootstraps;
            std::vector<bool> terminals, truncations;
            rewards.reserve(static_cast<std::size_t>(m));

            const Eigen::Index exec_base = cursor;
            for (int t = 0; t < m; ++t) {
                if (!ex.open) {
                    ex.obs = ex.env->reset();
                    ex.episode_reward = 0.0;
                    ex.open = true;
                }
                const VectorXd probs = neural::forward(st.policy, ex.obs);
                const int a = sample_categorical(probs, st.rng);
                const double logp = std::log(std::max(probs(a), kProbFloor));
                const double v = neural::forward(st.value, ex.obs)(0);
                const rlenv::StepResult res = ex.env->step(a);

                batch.observations.col(cursor) = ex.obs;
                batch.actions[static_cast<std::size_t>(cursor)] = a;
                batch.old_log_probs(cursor) = logp;
                ++cursor;

                rewards.push_back(res.reward);
                values.push_back(v);
                terminals.push_back(res.terminal);
                truncations.push_back(res.truncated);
                double bootstrap = 0.0;
                if (res.truncated || (!res.terminal && t + 1 == m)) {
                    bootstrap = neural::forward(st.value, res.observation)(0);
                }
                bootstraps.push_back(bootstrap);

                ex.episode_reward += res.reward;
                ++st.env_steps;
                if (res.terminal || res.truncated) {
                    ex.open = false;
                    ++episodes_completed;
                    completed_reward_sum += ex.episode_reward;
                } else {
                    ex.obs = res.observation;
                }
            }

            std::vector<double> adv, ret;
            compute_advantages(rewards, values, terminals, truncations, bootstraps, cfg.gamma,
                               cfg.gae_lambda, &adv, &ret);
            for (int t = 0; t < m; ++t) {
                raw_adv(exec_base + t) = adv[static_cast<std::size_t>(t)];
                batch.returns(exec_base + t) = ret[static_cast<std::size_t>(t)];
            }
        }

        // Batch-normalized advantages make the update scale-free.
        const double mean = raw_adv.mean();
        const double var = (raw_adv.array() - mean).square().sum() / raw_adv.size();
        batch.advantages = (raw_adv.array() - mean) / (std::sqrt(var) + 1e-8);

        // --- K epochs of clipped-surrogate updates ---
        double ploss_sum = 0.0, vloss_sum = 0.0, entropy_sum = 0.0;
        int update_count = 0;
        std::vector<Eigen::Index> order(static_cast<std::size_t>(batch_total));
        std::iota(order.begin(), order.end(), 0);
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            for (Eigen::Index i = batch_total - 1; i > 0; --i) {
                std::swap(order[static_cast<std::size_t>(i)],
                          order[st.rng.uniform_int(static_cast<std::size_t>(i) + 1)]);
            }
            for (Eigen::Index start = 0; start < batch_total; start += cfg.minibatch_size) {
                const Eigen::Index b = std::min<Eigen::Index>(cfg.minibatch_size,
                                                              batch_total - start);
                PpoBatch mb;
                mb.observations.resize(obs_size, b);
                mb.actions.resize(static_cast<std::size_t>(b));
                mb.old_log_probs.resize(b);
                mb.advantages.resize(b);
                mb.returns.resize(b);
                for (Eigen::Index k = 0; k < b; ++k) {
                    const Eigen::Index src = order[static_cast<std::size_t>(start + k)];
                    mb.observations.col(k) = batch.observations.col(src);
                    mb.actions[static_cast<std::size_t>(k)] =
                        batch.actions[static_cast<std::size_t>(src)];
                    mb.old_log_probs(k) = batch.old_log_probs(src);
                    mb.advantages(k) = batch.advantages(src);
                    mb.returns(k) = batch.returns(src);
                }
                neural::Gradients pg, vg;
                PpoLossBreakdown losses;
                try {
                    losses = clipped_loss(mb, st.policy, st.value, cfg, &pg, &vg);
                } catch (const RuntimeAbort& e) {
                    throw diverge(e.what());
                }
                if (!pg.allFinite() || !vg.allFinite() || !std::isfinite(losses.total)) {
                    throw diverge("non-finite gradient or loss");
                }
                neural::optimizer_step(st.policy, pg, st.opt_policy);
                neural::optimizer_step(st.value, vg, st.opt_value);
                ploss_sum += losses.policy_loss;
                vloss_sum += losses.value_loss;
                entropy_sum += losses.entropy;
                ++update_count;
            }
        }

        PpoLogRow row;
        row.iteration = iter;
        row.cumulative_env_steps = st.env_steps;
        row.episodes_completed = episodes_completed;
        row.mean_episode_reward = episodes_completed > 0
                                      ? completed_reward_sum / episodes_completed
                                      : (st.log.empty() ? 0.0 : st.log.back().mean_episode_reward);
        row.policy_loss = ploss_sum / update_count;
        row.value_loss = vloss_sum / update_count;
        row.entropy = entropy_sum / update_count;
        st.log.push_back(row);

        if (control.checkpoint_every > 0 && !control.checkpoint_path.empty() &&
            (iter + 1) % control.checkpoint_every == 0) {
            save_ppo_checkpoint(st, control.checkpoint_path);
        }
    }

    if (!control.checkpoint_path.empty()) save_ppo_checkpoint(st, control.checkpoint_path);
    return {std::move(st.policy), std::move(st.value), std::move(st.log)};
}

// ---------------------------------------------------------------------------
// Plan extraction
// ---------------------------------------------------------------------------

PlanResult greedy_plan(const neural::Mlp& net, rlenv::MaintenanceRlEnv& env,
                       const domain::SegmentState& s0) {
    VectorXd obs = env.reset_to(s0);
    PlanResult plan;
    plan.trajectory.emplace_back(s0.iri, s0.rd);
    const int horizon = env.horizon();
    for (int t = 0; t < horizon; ++t) {
        const int a = argmax_lowest(neural::forward(net, obs));
        const rlenv::StepResult res = env.step(a);
        plan.actions.push_back(a);
        plan.trajectory.emplace_back(env.state().iri, env.state().rd);
        obs = res.observation;
    }
    plan.ledger = env.ledger();
    return plan;
}

}  // namespace paverl::agents
