#include "paverl/neural.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace paverl::neural {

namespace {

// Cheap fingerprint tying a ForwardCache to the network it came from: shape,
// seed, and spot-checked parameter bits.
std::uint64_t net_fingerprint(const Mlp& m) {
    std::string bytes;
    for (int s : m.sizes) bytes.append(reinterpret_cast<const char*>(&s), sizeof(s));
    const int head = static_cast<int>(m.head);
    bytes.append(reinterpret_cast<const char*>(&head), sizeof(head));
    bytes.append(reinterpret_cast<const char*>(&m.seed), sizeof(m.seed));
    auto spot = [&](double v) { bytes.append(reinterpret_cast<const char*>(&v), sizeof(v)); };
    if (!m.weights.empty()) {
        spot(m.weights.front()(0, 0));
        spot(m.weights.back()(0, 0));
        spot(m.weights.back().sum());
        spot(m.biases.back()(0));
    }
    return fnv1a64(bytes);
}

MatrixXd softmax_columns(const MatrixXd& z) {
    MatrixXd p(z.rows(), z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const VectorXd shifted = z.col(j).array() - z.col(j).maxCoeff();
        const VectorXd e = shifted.array().exp();
        p.col(j) = e / e.sum();
    }
    return p;
}

}  // namespace

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        n += static_cast<std::size_t>(sizes[l + 1]) * static_cast<std::size_t>(sizes[l] + 1);
    }
    return n;
}

Mlp mlp_new(const std::vector<int>& sizes, Head head, std::uint64_t seed) {
    if (sizes.size() < 2) throw ValidationError("mlp_new: need at least input and output layers");
    for (int s : sizes) {
        if (s <= 0) throw ValidationError("mlp_new: zero-sized layer");
    }
    Mlp m;
    m.sizes = sizes;
    m.head = head;
    m.seed = seed;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
        MatrixXd w(fan_out, fan_in);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
        m.weights.push_back(std::move(w));
        m.biases.push_back(VectorXd::Zero(fan_out));
    }
    return m;
}

MatrixXd forward(const Mlp& m, const MatrixXd& x, ForwardCache* cache) {
    if (x.rows() != m.input_size()) {
        throw ValidationError("forward: input has " + std::to_string(x.rows()) +
                              " rows, expected " + std::to_string(m.input_size()));
    }
    const int layers = m.layer_count();
    MatrixXd a = x;
    if (cache) {
        cache->input = x;
        cache->pre_activations.assign(static_cast<std::size_t>(layers), MatrixXd());
        cache->activations.assign(static_cast<std::size_t>(layers), MatrixXd());
        cache->net_tag = net_fingerprint(m);
    }
    for (int l = 0; l < layers; ++l) {
        MatrixXd z = (m.weights[static_cast<std::size_t>(l)] * a).colwise() +
                     m.biases[static_cast<std::size_t>(l)];
        if (l + 1 < layers) {
            a = z.cwiseMax(0.0);
        } else if (m.head == Head::Softmax) {
            a = softmax_columns(z);
        } else {
            a = z;
        }
        if (cache) {
            cache->pre_activations[static_cast<std::size_t>(l)] = std::move(z);
            cache->activations[static_cast<std::size_t>(l)] = a;
        }
    }
    return a;
}

VectorXd forward(const Mlp& m, const VectorXd& x, ForwardCache* cache) {
    return forward(m, MatrixXd(x), cache).col(0);
}

void Gradients::setZero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
}

double Gradients::squaredNorm() const {
    double n = 0.0;
    for (const auto& w : weights) n += w.squaredNorm();
    for (const auto& b : biases) n += b.squaredNorm();
    return n;
}

bool Gradients::allFinite() const {
    for (const auto& w : weights) {
        if (!w.allFinite()) return false;
    }
    for (const auto& b : biases) {
        if (!b.allFinite()) return false;
    }
    return true;
}

Gradients backward(const Mlp& m, const ForwardCache& cache, const MatrixXd& output_gradient) {
    const int layers = m.layer_count();
    if (static_cast<int>(cache.activations.size()) != layers || cache.net_tag != net_fingerprint(m)) {
        throw ValidationError("backward: stale or mismatched forward cache");
    }
    const MatrixXd& output = cache.activations.back();
    if (output_gradient.rows() != output.rows() || output_gradient.cols() != output.cols()) {
        throw ValidationError("backward: output gradient shape mismatch");
    }

    Gradients g;
    g.weights.assign(static_cast<std::size_t>(layers), MatrixXd());
    g.biases.assign(static_cast<std::size_t>(layers), VectorXd());

    // Gradient w.r.t. the head pre-activation.
    MatrixXd delta;
    if (m.head == Head::Softmax) {
        delta.resize(output.rows(), output.cols());
        for (Eigen::Index j = 0; j < output.cols(); ++j) {
            const VectorXd p = output.col(j);
            const double dot = p.dot(output_gradient.col(j));
            delta.col(j) =
                p.cwiseProduct((output_gradient.col(j).array() - dot).matrix());
        }
    } else {
        delta = output_gradient;
    }

    for (int l = layers - 1; l >= 0; --l) {
        const MatrixXd& below =
            (l == 0) ? cache.input : cache.activations[static_cast<std::size_t>(l - 1)];
        g.weights[static_cast<std::size_t>(l)] = delta * below.transpose();
        g.biases[static_cast<std::size_t>(l)] = delta.rowwise().sum();
        if (l > 0) {
            const MatrixXd& pre = cache.pre_activations[static_cast<std::size_t>(l - 1)];
            delta = (m.weights[static_cast<std::size_t>(l)].transpose() * delta)
                        .cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
        }
    }
    return g;
}

double grad_check(Mlp m, const MatrixXd& x,
                  const std::function<double(const MatrixXd&)>& loss_of_output, double eps,
                  const MatrixXd& analytic_output_gradient, const Gradients* override_grads) {
    if (eps <= 0.0) throw ValidationError("grad_check: eps must be positive");

    ForwardCache cache;
    forward(m, x, &cache);
    const Gradients analytic =
        override_grads ? *override_grads : backward(m, cache, analytic_output_gradient);

    // Subsample above 10^4 parameters, seeded for reproducibility.
    const std::size_t total = m.parameter_count();
    const std::size_t max_checked = 10000;
    Rng rng(m.seed ^ 0x9e3779b97f4a7c15ULL);

    double max_rel = 0.0;
    auto probe = [&](double* param, double analytic_grad) {
        const double saved = *param;
        *param = saved + eps;
        const double up = loss_of_output(forward(m, x));
        *param = saved - eps;
        const double down = loss_of_output(forward(m, x));
        *param = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max({std::fabs(analytic_grad), std::fabs(numeric), 1e-5});
        max_rel = std::max(max_rel, std::fabs(analytic_grad - numeric) / denom);
    };

    const double keep_prob =
        total <= max_checked ? 1.0 : static_cast<double>(max_checked) / static_cast<double>(total);
    for (int l = 0; l < m.layer_count(); ++l) {
        auto& w = m.weights[static_cast<std::size_t>(l)];
        const auto& gw = analytic.weights[static_cast<std::size_t>(l)];
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            if (keep_prob < 1.0 && rng.uniform() > keep_prob) continue;
            probe(w.data() + i, gw.data()[i]);
        }
        auto& b = m.biases[static_cast<std::size_t>(l)];
        const auto& gb = analytic.biases[static_cast<std::size_t>(l)];
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            if (keep_prob < 1.0 && rng.uniform() > keep_prob) continue;
            probe(b.data() + i, gb.data()[i]);
        }
    }
    return max_rel;
}

OptimizerState make_optimizer(OptimizerKind kind, double learning_rate) {
    if (!(learning_rate > 0.0)) throw ConfigError("make_optimizer: learning rate must be positive");
    OptimizerState opt;
    opt.kind = kind;
    opt.learning_rate = learning_rate;
    return opt;
}

void optimizer_step(Mlp& m, const Gradients& grads, OptimizerState& opt) {
    if (grads.weights.size() != m.weights.size() || grads.biases.size() != m.biases.size()) {
        throw ValidationError("optimizer_step: gradient shape mismatch");
    }
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        if (grads.weights[l].rows() != m.weights[l].rows() ||
            grads.weights[l].cols() != m.weights[l].cols() ||
            grads.biases[l].size() != m.biases[l].size()) {
            throw ValidationError("optimizer_step: gradient shape mismatch");
        }
    }
    if (!grads.allFinite()) {
        throw ValidationError("optimizer_step: non-finite gradient, update rejected");
    }

    if (opt.kind == OptimizerKind::Sgd) {
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            m.weights[l] -= opt.learning_rate * grads.weights[l];
            m.biases[l] -= opt.learning_rate * grads.biases[l];
        }
        ++opt.step_count;
        return;
    }

    if (opt.first_moment_w.empty()) {
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            opt.first_moment_w.push_back(MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
            opt.second_moment_w.push_back(MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
            opt.first_moment_b.push_back(VectorXd::Zero(m.biases[l].size()));
            opt.second_moment_b.push_back(VectorXd::Zero(m.biases[l].size()));
        }
    }
    ++opt.step_count;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        auto adam_update = [&](auto& param, const auto& grad, auto& m1, auto& m2) {
            m1 = opt.beta1 * m1 + (1.0 - opt.beta1) * grad;
            m2 = opt.beta2 * m2 + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
            param.array() -= opt.learning_rate * (m1.array() / bc1) /
                             ((m2.array() / bc2).sqrt() + opt.epsilon);
        };
        adam_update(m.weights[l], grads.weights[l], opt.first_moment_w[l], opt.second_moment_w[l]);
        adam_update(m.biases[l], grads.biases[l], opt.first_moment_b[l], opt.second_moment_b[l]);
    }
    if (!std::all_of(m.weights.begin(), m.weights.end(),
                     [](const MatrixXd& w) { return w.allFinite(); })) {
        throw RuntimeAbort("optimizer_step: parameters became non-finite");
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string mlp_to_json_string(const Mlp& m) {
    std::string payload;
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        payload += doubles_to_hex(m.weights[l].data(), static_cast<std::size_t>(m.weights[l].size()));
        payload += doubles_to_hex(m.biases[l].data(), static_cast<std::size_t>(m.biases[l].size()));
    }
    nlohmann::json j;
    j["format"] = "paverl-mlp";
    j["format_version"] = 1;
    j["sizes"] = m.sizes;
    j["head"] = m.head == Head::Softmax ? "softmax" : "linear";
    j["seed"] = m.seed;
    j["params"] = payload;
    char checksum[24];
    std::snprintf(checksum, sizeof(checksum), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(payload)));
    j["checksum"] = checksum;
    return j.dump(2);
}

Mlp mlp_from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("mlp load: invalid JSON: ") + e.what());
    }
    if (j.value("format", "") != "paverl-mlp" || j.value("format_version", 0) != 1) {
        throw ConfigError("mlp load: unsupported model format");
    }
    Mlp m;
    m.sizes = j.at("sizes").get<std::vector<int>>();
    const std::string head = j.at("head").get<std::string>();
    if (head == "softmax") {
        m.head = Head::Softmax;
    } else if (head == "linear") {
        m.head = Head::Linear;
    } else {
        throw ConfigError("mlp load: unknown head kind " + head);
    }
    m.seed = j.value("seed", std::uint64_t{0});
    const std::string payload = j.at("params").get<std::string>();
    char checksum[24];
    std::snprintf(checksum, sizeof(checksum), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(payload)));
    if (j.value("checksum", "") != checksum) {
        throw ConfigError("mlp load: checksum mismatch");
    }
    const std::vector<double> values = hex_to_doubles(payload);
    std::size_t pos = 0;
    for (std::size_t l = 0; l + 1 < m.sizes.size(); ++l) {
        const int rows = m.sizes[l + 1];
        const int cols = m.sizes[l];
        if (rows <= 0 || cols <= 0) throw ConfigError("mlp load: invalid layer sizes");
        if (pos + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) +
                static_cast<std::size_t>(rows) > values.size()) {
            throw ConfigError("mlp load: parameter payload too short");
        }
        MatrixXd w(rows, cols);
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos),
                    static_cast<std::size_t>(w.size()), w.data());
        pos += static_cast<std::size_t>(w.size());
        VectorXd b(rows);
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos),
                    static_cast<std::size_t>(b.size()), b.data());
        pos += static_cast<std::size_t>(b.size());
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    if (pos != values.size()) throw ConfigError("mlp load: parameter payload too long");
    return m;
}

std::string optimizer_to_json_string(const OptimizerState& opt) {
    nlohmann::json j;
    j["kind"] = opt.kind == OptimizerKind::Adam ? "adam" : "sgd";
    j["learning_rate_hex"] = doubles_to_hex(&opt.learning_rate, 1);
    j["step_count"] = opt.step_count;
    j["beta1"] = opt.beta1;
    j["beta2"] = opt.beta2;
    j["epsilon"] = opt.epsilon;
    j["layers"] = nlohmann::json::array();
    for (std::size_t l = 0; l < opt.first_moment_w.size(); ++l) {
        nlohmann::json jl;
        jl["rows"] = opt.first_moment_w[l].rows();
        jl["cols"] = opt.first_moment_w[l].cols();
        jl["m1w"] = doubles_to_hex(opt.first_moment_w[l].data(),
                                   static_cast<std::size_t>(opt.first_moment_w[l].size()));
        jl["m2w"] = doubles_to_hex(opt.second_moment_w[l].data(),
                                   static_cast<std::size_t>(opt.second_moment_w[l].size()));
        jl["m1b"] = doubles_to_hex(opt.first_moment_b[l].data(),
                                   static_cast<std::size_t>(opt.first_moment_b[l].size()));
        jl["m2b"] = doubles_to_hex(opt.second_moment_b[l].data(),
                                   static_cast<std::size_t>(opt.second_moment_b[l].size()));
        j["layers"].push_back(std::move(jl));
    }
    return j.dump();
}

OptimizerState optimizer_from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("optimizer restore: invalid JSON: ") + e.what());
    }
    OptimizerState opt;
    opt.kind = j.at("kind").get<std::string>() == "adam" ? OptimizerKind::Adam
                                                         : OptimizerKind::Sgd;
    opt.learning_rate = hex_to_doubles(j.at("learning_rate_hex").get<std::string>()).at(0);
    opt.step_count = j.at("step_count").get<std::int64_t>();
    opt.beta1 = j.at("beta1").get<double>();
    opt.beta2 = j.at("beta2").get<double>();
    opt.epsilon = j.at("epsilon").get<double>();
    for (const auto& jl : j.at("layers")) {
        const Eigen::Index rows = jl.at("rows").get<Eigen::Index>();
        const Eigen::Index cols = jl.at("cols").get<Eigen::Index>();
        auto unpack_matrix = [&](const char* key) {
            const std::vector<double> v = hex_to_doubles(jl.at(key).get<std::string>());
            if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
                throw ConfigError("optimizer restore: corrupt moment payload");
            }
            MatrixXd m(rows, cols);
            std::copy(v.begin(), v.end(), m.data());
            return m;
        };
        auto unpack_vector = [&](const char* key) {
            const std::vector<double> v = hex_to_doubles(jl.at(key).get<std::string>());
            if (static_cast<Eigen::Index>(v.size()) != rows) {
                throw ConfigError("optimizer restore: corrupt moment payload");
            }
            VectorXd b(rows);
            std::copy(v.begin(), v.end(), b.data());
            return b;
        };
        opt.first_moment_w.push_back(unpack_matrix("m1w"));
        opt.second_moment_w.push_back(unpack_matrix("m2w"));
        opt.first_moment_b.push_back(unpack_vector("m1b"));
        opt.second_moment_b.push_back(unpack_vector("m2b"));
    }
    return opt;
}

void save_mlp(const Mlp& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_mlp: cannot open " + path);
    out << mlp_to_json_string(m) << "\n";
}

Mlp load_mlp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_mlp: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return mlp_from_json_string(buf.str());
}

}  // namespace paverl::neural
