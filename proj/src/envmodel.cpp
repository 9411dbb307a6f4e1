#include "paverl/envmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace paverl::envmodel {

namespace {

// Indicators live in (0, cap]; predictions and transitions never emit zero.
constexpr double kMinIndicator = 1e-3;

const std::map<EnvMode, std::string> kModeNames = {{EnvMode::Parametric, "parametric"},
                                                   {EnvMode::Surrogate, "surrogate"}};

EnvMode mode_from_name(const std::string& name) {
    for (const auto& [mode, n] : kModeNames) {
        if (n == name) return mode;
    }
    throw ConfigError("unknown environment mode '" + name + "'");
}

}  // namespace

EnvironmentConfig EnvironmentConfig::defaults() {
    EnvironmentConfig cfg;
    auto& e = cfg.effects;
    e[domain::ActionKind::DoNothing] = ActionEffect{};
    e[domain::ActionKind::AsphaltConcreteOverlay] =
        {0.45, 0.55, true, false, 0.0, 0.0, 0.85, false};
    e[domain::ActionKind::HotMixRecycledAcOverlay] =
        {0.40, 0.50, true, false, 0.0, 0.0, 0.85, false};
    e[domain::ActionKind::MillOffAcOverlayAc] =
        {0.0, 0.0, false, true, 0.95, 1.5, 0.80, true};
    e[domain::ActionKind::MillExistingOverlayRecycledAc] =
        {0.0, 0.0, false, true, 1.05, 2.0, 0.85, true};
    e[domain::ActionKind::AggregateSealCoat] =
        {0.05, 0.03, false, false, 0.0, 0.0, 0.90, false};
    e[domain::ActionKind::FogSealCoat] =
        {0.02, 0.01, false, false, 0.0, 0.0, 0.95, false};
    e[domain::ActionKind::CrackSealingPatching] =
        {0.08, 0.05, false, false, 0.0, 0.0, 0.90, false};
    return cfg;
}

void validate(const EnvironmentConfig& cfg) {
    if (cfg.horizon_years < 1) throw ConfigError("environment: horizon must be >= 1");
    for (const auto* c : {&cfg.iri, &cfg.rd}) {
        if (c->base_rate < 0.0 || c->k_traffic < 0.0 || c->k_climate < 0.0 || c->k_age < 0.0) {
            throw ConfigError("environment: deterioration rates must be >= 0");
        }
        if (!(c->cap > 0.0)) throw ConfigError("environment: indicator cap must be positive");
    }
    if (!(cfg.reference_thickness_mm > 0.0)) {
        throw ConfigError("environment: reference thickness must be positive");
    }
    if (!(cfg.max_reduction_frac > 0.0) || cfg.max_reduction_frac >= 1.0) {
        throw ConfigError("environment: max reduction fraction must be in (0, 1)");
    }
    for (const auto& [kind, e] : cfg.effects) {
        const std::string name = domain::kind_name(kind);
        if (e.iri_reduction_frac < 0.0 || e.iri_reduction_frac > 1.0 ||
            e.rd_reduction_frac < 0.0 || e.rd_reduction_frac > 1.0) {
            throw ConfigError("environment: reduction fractions for " + name +
                              " must be in [0, 1]");
        }
        if (!(e.growth_relief > 0.0) || e.growth_relief > 1.0) {
            throw ConfigError("environment: growth relief for " + name + " must be in (0, 1]");
        }
        if (e.reset) {
            if (!(e.iri_reset > 0.0) || e.iri_reset > cfg.iri.cap || !(e.rd_reset > 0.0) ||
                e.rd_reset > cfg.rd.cap) {
                throw ConfigError("environment: reset values for " + name +
                                  " must be in (0, cap]");
            }
        }
    }
}

namespace {

nlohmann::json coeffs_to_json(const DeteriorationCoefficients& c) {
    return {{"base_rate", c.base_rate},
            {"k_traffic", c.k_traffic},
            {"k_climate", c.k_climate},
            {"k_age", c.k_age},
            {"cap", c.cap}};
}

DeteriorationCoefficients coeffs_from_json(const nlohmann::json& j,
                                           const DeteriorationCoefficients& dflt) {
    DeteriorationCoefficients c = dflt;
    c.base_rate = j.value("base_rate", c.base_rate);
    c.k_traffic = j.value("k_traffic", c.k_traffic);
    c.k_climate = j.value("k_climate", c.k_climate);
    c.k_age = j.value("k_age", c.k_age);
    c.cap = j.value("cap", c.cap);
    return c;
}

}  // namespace

EnvironmentConfig load_environment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_environment_config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("load_environment_config: invalid JSON: ") + e.what());
    }
    EnvironmentConfig cfg = EnvironmentConfig::defaults();
    cfg.mode = mode_from_name(j.value("mode", "parametric"));
    cfg.horizon_years = j.value("horizon_years", cfg.horizon_years);
    cfg.start_year = j.value("start_year", cfg.start_year);
    cfg.reference_thickness_mm = j.value("reference_thickness_mm", cfg.reference_thickness_mm);
    cfg.max_reduction_frac = j.value("max_reduction_frac", cfg.max_reduction_frac);
    if (j.count("iri")) cfg.iri = coeffs_from_json(j["iri"], cfg.iri);
    if (j.count("rd")) cfg.rd = coeffs_from_json(j["rd"], cfg.rd);
    if (j.count("effects")) {
        for (const auto& [name, je] : j["effects"].items()) {
            const domain::ActionKind kind = domain::kind_from_name(name);
            ActionEffect e = cfg.effects[kind];
            e.iri_reduction_frac = je.value("iri_reduction_frac", e.iri_reduction_frac);
            e.rd_reduction_frac = je.value("rd_reduction_frac", e.rd_reduction_frac);
            e.thickness_scaled = je.value("thickness_scaled", e.thickness_scaled);
            e.reset = je.value("reset", e.reset);
            e.iri_reset = je.value("iri_reset", e.iri_reset);
            e.rd_reset = je.value("rd_reset", e.rd_reset);
            e.growth_relief = je.value("growth_relief", e.growth_relief);
            e.resets_age = je.value("resets_age", e.resets_age);
            cfg.effects[kind] = e;
        }
    }
    validate(cfg);
    return cfg;
}

void save_environment_config(const EnvironmentConfig& cfg, const std::string& path) {
    nlohmann::json j;
    j["format"] = "paverl-environment-config";
    j["format_version"] = 1;
    j["mode"] = kModeNames.at(cfg.mode);
    j["horizon_years"] = cfg.horizon_years;
    j["start_year"] = cfg.start_year;
    j["reference_thickness_mm"] = cfg.reference_thickness_mm;
    j["max_reduction_frac"] = cfg.max_reduction_frac;
    j["iri"] = coeffs_to_json(cfg.iri);
    j["rd"] = coeffs_to_json(cfg.rd);
    nlohmann::json effects = nlohmann::json::object();
    for (const auto& [kind, e] : cfg.effects) {
        effects[domain::kind_name(kind)] = {{"iri_reduction_frac", e.iri_reduction_frac},
                                            {"rd_reduction_frac", e.rd_reduction_frac},
                                            {"thickness_scaled", e.thickness_scaled},
                                            {"reset", e.reset},
                                            {"iri_reset", e.iri_reset},
                                            {"rd_reset", e.rd_reset},
                                            {"growth_relief", e.growth_relief},
                                            {"resets_age", e.resets_age}};
    }
    j["effects"] = effects;
    std::ofstream out(path);
    if (!out) throw ConfigError("save_environment_config: cannot open " + path);
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Initial-state sampling
// ---------------------------------------------------------------------------

StateSampler StateSampler::fixed(std::vector<domain::SegmentState> fleet) {
    if (fleet.empty()) throw ConfigError("state sampler: empty fleet");
    StateSampler s;
    s.fixed_ = true;
    s.fleet_ = std::move(fleet);
    return s;
}

StateSampler StateSampler::randomized(domain::SegmentState base, RandomizedRanges ranges) {
    const std::pair<double, double> bounds[] = {
        {ranges.iri_min, ranges.iri_max},     {ranges.rd_min, ranges.rd_max},
        {ranges.esal_min, ranges.esal_max},   {ranges.aadt_min, ranges.aadt_max},
        {ranges.truck_ratio_min, ranges.truck_ratio_max},
        {ranges.precip_min, ranges.precip_max}, {ranges.ftc_min, ranges.ftc_max},
        {ranges.age_min, ranges.age_max}};
    for (const auto& [lo, hi] : bounds) {
        if (hi < lo) throw ConfigError("state sampler: range max below min");
    }
    StateSampler s;
    s.fixed_ = false;
    s.base_ = std::move(base);
    s.ranges_ = ranges;
    return s;
}

domain::SegmentState StateSampler::sample(Rng& rng) const {
    if (fixed_) {
        if (fleet_.empty()) throw ConfigError("state sampler: empty fleet");
        return fleet_[rng.uniform_int(fleet_.size())];
    }
    domain::SegmentState s = base_;
    s.iri = rng.uniform(ranges_.iri_min, ranges_.iri_max);
    s.rd = rng.uniform(ranges_.rd_min, ranges_.rd_max);
    s.traffic.annual_esal = rng.uniform(ranges_.esal_min, ranges_.esal_max);
    s.traffic.annual_aadt = rng.uniform(ranges_.aadt_min, ranges_.aadt_max);
    s.traffic.truck_ratio = rng.uniform(ranges_.truck_ratio_min, ranges_.truck_ratio_max);
    s.climate.annual_precipitation_mm = rng.uniform(ranges_.precip_min, ranges_.precip_max);
    s.climate.freeze_thaw_cycles = rng.uniform(ranges_.ftc_min, ranges_.ftc_max);
    s.age_years = rng.uniform(ranges_.age_min, ranges_.age_max);
    return s;
}

// ---------------------------------------------------------------------------
// Surrogate
// ---------------------------------------------------------------------------

namespace {

nlohmann::json norm_to_json(const domain::NormalizationParams& params) {
    nlohmann::json j;
    j["fitted"] = params.fitted;
    j["features"] = nlohmann::json::array();
    for (const domain::FeatureScale& f : params.features) {
        j["features"].push_back({{"name", f.name},
                                 {"min_hex", doubles_to_hex(&f.min, 1)},
                                 {"max_hex", doubles_to_hex(&f.max, 1)},
                                 {"constant", f.constant}});
    }
    return j;
}

domain::NormalizationParams norm_from_json(const nlohmann::json& j) {
    domain::NormalizationParams params;
    params.fitted = j.at("fitted").get<bool>();
    for (const auto& jf : j.at("features")) {
        domain::FeatureScale f;
        f.name = jf.at("name").get<std::string>();
        f.min = hex_to_doubles(jf.at("min_hex").get<std::string>()).at(0);
        f.max = hex_to_doubles(jf.at("max_hex").get<std::string>()).at(0);
        f.constant = jf.at("constant").get<bool>();
        params.features.push_back(std::move(f));
    }
    return params;
}

struct FitOutcome {
    neural::Mlp model;
    domain::NormalizationParams norm;
    FitStats stats;
};

FitOutcome fit_one(const std::vector<dataprep::TrainingPair>& pairs, const std::string& name,
                   const SurrogateTrainConfig& cfg) {
    const int n = static_cast<int>(pairs.size());
    if (n < cfg.min_samples) {
        throw ValidationError("too few samples for " + name + " surrogate: have " +
                              std::to_string(n) + ", need " + std::to_string(cfg.min_samples));
    }

    MatrixXd table(n, dataprep::kSurrogateInputCount + 1);
    for (int i = 0; i < n; ++i) {
        if (pairs[static_cast<std::size_t>(i)].input.size() != dataprep::kSurrogateInputCount) {
            throw ValidationError(name + " surrogate: training input is not 40 entries");
        }
        table.row(i).head(dataprep::kSurrogateInputCount) =
            pairs[static_cast<std::size_t>(i)].input.transpose();
        table(i, dataprep::kSurrogateInputCount) = pairs[static_cast<std::size_t>(i)].target;
    }
    const auto targets = table.col(dataprep::kSurrogateInputCount);
    if (targets.maxCoeff() == targets.minCoeff()) {
        throw ValidationError(name + " surrogate: targets have zero variance");
    }

    std::vector<std::string> names = dataprep::surrogate_input_names();
    names.push_back("target");
    const domain::NormalizationParams norm = dataprep::minmax_fit(table, names);
    MatrixXd scaled = dataprep::minmax_apply(table, norm);
    // Constant-at-fit inputs carry no signal, and their raw pass-through
    // magnitudes (e.g. an ESAL column) destabilize the regression. The net
    // sees 0 in those slots; predict_next applies the same mask.
    for (int c = 0; c < dataprep::kSurrogateInputCount; ++c) {
        if (norm.features[static_cast<std::size_t>(c)].constant) scaled.col(c).setZero();
    }

    // Deterministic split: seeded shuffle, last holdout_fraction held out.
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed);
    for (int i = n - 1; i > 0; --i) {
        std::swap(order[static_cast<std::size_t>(i)],
                  order[rng.uniform_int(static_cast<std::size_t>(i) + 1)]);
    }
    const int holdout = std::max(1, static_cast<int>(std::lround(cfg.holdout_fraction * n)));
    const int train = n - holdout;
    if (train < 1) throw ValidationError(name + " surrogate: holdout fraction leaves no training data");

    std::vector<int> sizes = {dataprep::kSurrogateInputCount};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(1);
    neural::Mlp model = neural::mlp_new(sizes, neural::Head::Linear, cfg.seed);
    neural::OptimizerState opt = neural::make_optimizer(neural::OptimizerKind::Adam,
                                                        cfg.learning_rate);

    std::vector<int> train_idx(order.begin(), order.begin() + train);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = train - 1; i > 0; --i) {
            std::swap(train_idx[static_cast<std::size_t>(i)],
                      train_idx[rng.uniform_int(static_cast<std::size_t>(i) + 1)]);
        }
        for (int start = 0; start < train; start += cfg.batch_size) {
            const int b = std::min(cfg.batch_size, train - start);
            MatrixXd xb(dataprep::kSurrogateInputCount, b);
            VectorXd yb(b);
            for (int k = 0; k < b; ++k) {
                const int row = train_idx[static_cast<std::size_t>(start + k)];
                xb.col(k) = scaled.row(row).head(dataprep::kSurrogateInputCount).transpose();
                yb(k) = scaled(row, dataprep::kSurrogateInputCount);
            }
            neural::ForwardCache cache;
            const MatrixXd pred = neural::forward(model, xb, &cache);
            MatrixXd grad(1, b);
            grad.row(0) = 2.0 * (pred.row(0).transpose() - yb).transpose() / b;
            neural::optimizer_step(model, neural::backward(model, cache, grad), opt);
        }
    }

    // Raw-unit errors: denormalize predictions against raw targets.
    const domain::FeatureScale& target_scale =
        norm.features[static_cast<std::size_t>(dataprep::kSurrogateInputCount)];
    auto eval = [&](const std::vector<int>& idx, int count) {
        double ss_res = 0.0, ss_tot = 0.0, mean = 0.0;
        for (int k = 0; k < count; ++k) mean += table(idx[static_cast<std::size_t>(k)],
                                                      dataprep::kSurrogateInputCount);
        mean /= count;
        for (int k = 0; k < count; ++k) {
            const int row = idx[static_cast<std::size_t>(k)];
            const VectorXd x =
                scaled.row(row).head(dataprep::kSurrogateInputCount).transpose();
            const double pred =
                domain::minmax_invert_one(neural::forward(model, x)(0), target_scale);
            const double raw = table(row, dataprep::kSurrogateInputCount);
            ss_res += (pred - raw) * (pred - raw);
            ss_tot += (raw - mean) * (raw - mean);
        }
        const double rmse = std::sqrt(ss_res / count);
        const double r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
        return std::make_pair(rmse, r2);
    };

    FitOutcome out;
    out.norm = norm;
    out.stats.train_count = train;
    out.stats.holdout_count = holdout;
    std::vector<int> holdout_idx(order.begin() + train, order.end());
    std::tie(out.stats.train_rmse, out.stats.train_r2) = eval(train_idx, train);
    std::tie(out.stats.holdout_rmse, out.stats.holdout_r2) = eval(holdout_idx, holdout);
    out.model = std::move(model);  // eval reads `model`; move only after both passes
    return out;
}

}  // namespace

SurrogatePair train_surrogate(const std::vector<dataprep::TrainingPair>& iri_pairs,
                              const std::vector<dataprep::TrainingPair>& rd_pairs,
                              const SurrogateTrainConfig& cfg, FitReport* report) {
    FitOutcome iri = fit_one(iri_pairs, "iri", cfg);
    FitOutcome rd = fit_one(rd_pairs, "rd", cfg);
    if (report) {
        report->iri = iri.stats;
        report->rd = rd.stats;
    }
    SurrogatePair sp;
    sp.iri_model = std::move(iri.model);
    sp.rd_model = std::move(rd.model);
    sp.norm_iri = std::move(iri.norm);
    sp.norm_rd = std::move(rd.norm);
    return sp;
}

double predict_next(const SurrogatePair& sp, dataprep::Indicator which, const VectorXd& raw_input,
                    double cap) {
    if (raw_input.size() != dataprep::kSurrogateInputCount) {
        throw ValidationError("predict_next: input has " + std::to_string(raw_input.size()) +
                              " entries, expected 40");
    }
    const bool is_iri = which == dataprep::Indicator::Iri;
    const neural::Mlp& model = is_iri ? sp.iri_model : sp.rd_model;
    const domain::NormalizationParams& norm = is_iri ? sp.norm_iri : sp.norm_rd;
    if (!norm.fitted ||
        norm.features.size() != static_cast<std::size_t>(dataprep::kSurrogateInputCount) + 1) {
        throw SequencingError("predict_next: surrogate normalization not fitted");
    }
    VectorXd x(dataprep::kSurrogateInputCount);
    for (int i = 0; i < dataprep::kSurrogateInputCount; ++i) {
        const domain::FeatureScale& f = norm.features[static_cast<std::size_t>(i)];
        // Slots constant at fit time were zeroed during training; mirror that here.
        x(i) = f.constant ? 0.0 : domain::minmax_apply_one(raw_input(i), f);
    }
    const double y_norm = neural::forward(model, x)(0);
    const double y = domain::minmax_invert_one(
        y_norm, norm.features[static_cast<std::size_t>(dataprep::kSurrogateInputCount)]);
    return std::clamp(y, kMinIndicator, cap);
}

void save_surrogate(const SurrogatePair& sp, const std::string& path) {
    nlohmann::json j;
    j["format"] = "paverl-surrogate";
    j["format_version"] = 1;
    j["iri_model"] = nlohmann::json::parse(neural::mlp_to_json_string(sp.iri_model));
    j["rd_model"] = nlohmann::json::parse(neural::mlp_to_json_string(sp.rd_model));
    j["norm_iri"] = norm_to_json(sp.norm_iri);
    j["norm_rd"] = norm_to_json(sp.norm_rd);
    const std::string payload = j["iri_model"].value("params", "") +
                                j["rd_model"].value("params", "");
    char checksum[24];
    std::snprintf(checksum, sizeof(checksum), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(payload)));
    j["checksum"] = checksum;
    std::ofstream out(path);
    if (!out) throw ConfigError("save_surrogate: cannot open " + path);
    out << j.dump(2) << "\n";
}

SurrogatePair load_surrogate(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_surrogate: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("load_surrogate: invalid JSON: ") + e.what());
    }
    if (j.value("format", "") != "paverl-surrogate") {
        throw ConfigError("load_surrogate: unsupported format");
    }
    const std::string payload = j.at("iri_model").value("params", "") +
                                j.at("rd_model").value("params", "");
    char checksum[24];
    std::snprintf(checksum, sizeof(checksum), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(payload)));
    if (j.value("checksum", "") != checksum) {
        throw ConfigError("load_surrogate: checksum mismatch");
    }
    SurrogatePair sp;
    sp.iri_model = neural::mlp_from_json_string(j.at("iri_model").dump());
    sp.rd_model = neural::mlp_from_json_string(j.at("rd_model").dump());
    sp.norm_iri = norm_from_json(j.at("norm_iri"));
    sp.norm_rd = norm_from_json(j.at("norm_rd"));
    for (const neural::Mlp* m : {&sp.iri_model, &sp.rd_model}) {
        if (m->input_size() != dataprep::kSurrogateInputCount || m->output_size() != 1) {
            throw ConfigError("load_surrogate: model must map 40 inputs to 1 output");
        }
    }
    return sp;
}

void save_fit_report_csv(const FitReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_fit_report_csv: cannot open " + path);
    out << "indicator,train_count,holdout_count,train_rmse,holdout_rmse,train_r2,holdout_r2\n";
    const struct {
        const char* name;
        const FitStats& s;
    } rows[2] = {{"iri", report.iri}, {"rd", report.rd}};
    for (const auto& r : rows) {
        out << r.name << "," << r.s.train_count << "," << r.s.holdout_count << ","
            << fmt_double(r.s.train_rmse) << "," << fmt_double(r.s.holdout_rmse) << ","
            << fmt_double(r.s.train_r2) << "," << fmt_double(r.s.holdout_r2) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Transitions
// ---------------------------------------------------------------------------

Environment::Environment(EnvironmentConfig cfg, domain::CodeBook codes,
                         std::optional<SurrogatePair> surrogate)
    : cfg_(std::move(cfg)), codes_(std::move(codes)), surrogate_(std::move(surrogate)) {
    validate(cfg_);
    if (cfg_.mode == EnvMode::Surrogate && !surrogate_) {
        throw ConfigError("environment: surrogate mode requires a trained surrogate");
    }
}

namespace {

double yearly_delta(const DeteriorationCoefficients& c, const domain::TrafficProfile& traffic,
                    const domain::ClimateProfile& climate, double age_years) {
    const double load = c.base_rate + c.k_traffic * std::log1p(traffic.annual_esal / 1e6) +
                        c.k_climate * climate.freeze_thaw_cycles / 100.0;
    return load * (1.0 + c.k_age * age_years);
}

bool is_overlay(domain::ActionKind kind) {
    return kind == domain::ActionKind::AsphaltConcreteOverlay ||
           kind == domain::ActionKind::HotMixRecycledAcOverlay;
}

bool is_mill(domain::ActionKind kind) {
    return kind == domain::ActionKind::MillOffAcOverlayAc ||
           kind == domain::ActionKind::MillExistingOverlayRecycledAc;
}

bool is_recycled(domain::ActionKind kind) {
    return kind == domain::ActionKind::HotMixRecycledAcOverlay ||
           kind == domain::ActionKind::MillExistingOverlayRecycledAc;
}

}  // namespace

domain::SegmentState Environment::step(const domain::SegmentState& s,
                                       const domain::MaintenanceAction& a,
                                       int year_index) const {
    const auto it = cfg_.effects.find(a.kind);
    if (it == cfg_.effects.end()) {
        throw ValidationError("step: no action effect configured for " + domain::kind_name(a.kind));
    }
    const ActionEffect& e = it->second;

    domain::SegmentState n = s;

    // Year-start treatment effect.
    if (e.reset) {
        n.iri = std::min(n.iri, e.iri_reset);
        n.rd = std::min(n.rd, e.rd_reset);
    } else {
        double scale = 1.0;
        if (e.thickness_scaled && a.thickness_mm) {
            scale = *a.thickness_mm / cfg_.reference_thickness_mm;
        }
        const double fi = std::min(e.iri_reduction_frac * scale, cfg_.max_reduction_frac);
        const double fr = std::min(e.rd_reduction_frac * scale, cfg_.max_reduction_frac);
        n.iri *= 1.0 - fi;
        n.rd *= 1.0 - fr;
    }
    if (e.resets_age) n.age_years = 0.0;

    // Structure bookkeeping: overlays thicken the surface course, mills
    // replace it; recycled kinds leave a recycled-mix surface.
    if (a.thickness_mm) {
        if (is_overlay(a.kind)) {
            n.structure.surface.thickness_mm += *a.thickness_mm;
        } else if (is_mill(a.kind)) {
            n.structure.surface.thickness_mm = *a.thickness_mm;
        }
        if ((is_overlay(a.kind) || is_mill(a.kind)) && a.material) {
            n.structure.surface.material = is_recycled(a.kind) ? "HMRAC" : *a.material;
        }
    }

    // One year of deterioration.
    if (cfg_.mode == EnvMode::Parametric) {
        n.iri = std::min(n.iri + yearly_delta(cfg_.iri, n.traffic, n.climate, n.age_years) *
                                     e.growth_relief,
                         cfg_.iri.cap);
        n.rd = std::min(n.rd + yearly_delta(cfg_.rd, n.traffic, n.climate, n.age_years) *
                                    e.growth_relief,
                        cfg_.rd.cap);
    } else {
        std::optional<dataprep::MaintenanceEvent> maint;
        if (a.kind != domain::ActionKind::DoNothing) {
            dataprep::MaintenanceEvent ev;
            ev.date_years = static_cast<double>(dataprep::days_from_civil(
                                cfg_.start_year + year_index, 1, 1)) /
                            365.25;
            ev.kind = a.kind;
            ev.thickness_mm = a.thickness_mm.value_or(0.0);
            ev.material = a.material.value_or("");
            maint = ev;
        }
        // The surrogate sees the post-treatment indicator as its start point.
        const VectorXd in_iri = dataprep::surrogate_input(n, codes_, n.iri, 1.0, maint);
        const VectorXd in_rd = dataprep::surrogate_input(n, codes_, n.rd, 1.0, maint);
        n.iri = predict_next(*surrogate_, dataprep::Indicator::Iri, in_iri, cfg_.iri.cap);
        n.rd = predict_next(*surrogate_, dataprep::Indicator::Rd, in_rd, cfg_.rd.cap);
    }
    n.iri = std::max(n.iri, kMinIndicator);
    n.rd = std::max(n.rd, kMinIndicator);
    n.age_years += 1.0;
    return n;
}

std::vector<std::pair<double, double>> Environment::baseline_trajectory(
    const domain::SegmentState& s0, int horizon) const {
    if (horizon < 0) throw ValidationError("baseline_trajectory: negative horizon");
    std::vector<std::pair<double, double>> points;
    points.reserve(static_cast<std::size_t>(horizon) + 1);
    const domain::MaintenanceAction do_nothing{0, domain::ActionKind::DoNothing, std::nullopt,
                                               std::nullopt};
    domain::SegmentState s = s0;
    points.emplace_back(s.iri, s.rd);
    for (int t = 0; t < horizon; ++t) {
        s = step(s, do_nothing, t);
        points.emplace_back(s.iri, s.rd);
    }
    return points;
}

}  // namespace paverl::envmodel
