#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "paverl/common.hpp"
#include "paverl/dataprep.hpp"
#include "paverl/domain.hpp"
#include "paverl/neural.hpp"

// Yearly pavement state transitions under a maintenance action, served by a
// transparent parametric deterioration model or by a trained MLP surrogate
// (one regression net per indicator).
namespace paverl::envmodel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class EnvMode { Parametric, Surrogate };

// One year of do-nothing worsening:
//   delta = (base_rate + k_traffic * log1p(esal/1e6) + k_climate * ftc/100)
//           * (1 + k_age * age)
// clipped so the indicator never exceeds `cap`.
struct DeteriorationCoefficients {
    double base_rate = 0.0;
    double k_traffic = 0.0;
    double k_climate = 0.0;
    double k_age = 0.0;
    double cap = 1.0;
};

// Year-start effect of one treatment kind. Fractional kinds scale the
// indicator by (1 - fraction); reset kinds clamp it down to min(value,
// reset). growth_relief multiplies that year's deterioration (<= 1).
struct ActionEffect {
    double iri_reduction_frac = 0.0;
    double rd_reduction_frac = 0.0;
    bool thickness_scaled = false;  // scale fractions by thickness / reference
    bool reset = false;
    double iri_reset = 0.0;
    double rd_reset = 0.0;
    double growth_relief = 1.0;
    bool resets_age = false;
};

struct EnvironmentConfig {
    EnvMode mode = EnvMode::Parametric;
    int horizon_years = 20;
    int start_year = 2022;  // calendar year of step 0, for surrogate date inputs
    // Tuned so an untreated segment at reference traffic saturates its IRI cap
    // in roughly a decade: past that point extra traffic mostly adds treatment
    // need (cost) rather than benefit area, keeping cost-effectiveness a
    // decreasing function of traffic volume.
    DeteriorationCoefficients iri{0.26, 0.16, 0.10, 0.05, 6.0};
    DeteriorationCoefficients rd{0.90, 0.50, 0.25, 0.05, 25.0};
    double reference_thickness_mm = 76.2;
    double max_reduction_frac = 0.95;  // ceiling after thickness scaling
    std::map<domain::ActionKind, ActionEffect> effects;  // filled by defaults()

    static EnvironmentConfig defaults();
};

// Throws ConfigError on horizon < 1, negative rates, fractions outside
// [0, 1], non-positive caps, reset values outside (0, cap], or relief
// outside (0, 1].
void validate(const EnvironmentConfig& cfg);

EnvironmentConfig load_environment_config(const std::string& path);
void save_environment_config(const EnvironmentConfig& cfg, const std::string& path);

// ---------------------------------------------------------------------------
// Initial-state sampling
// ---------------------------------------------------------------------------

// Uniform bounds applied on top of a template state by the randomized
// sampler; structure and flags come from the template.
struct RandomizedRanges {
    double iri_min = 0.8, iri_max = 1.2;
    double rd_min = 1.0, rd_max = 3.0;
    double esal_min = 2e5, esal_max = 2e6;
    double aadt_min = 2e3, aadt_max = 2e4;
    double truck_ratio_min = 0.05, truck_ratio_max = 0.35;
    double precip_min = 200.0, precip_max = 1500.0;
    double ftc_min = 0.0, ftc_max = 120.0;
    double age_min = 0.0, age_max = 15.0;
};

// Initial-state distribution: either a fixed fleet of configured segments
// (uniform pick) or uniform draws within ranges around a template.
class StateSampler {
public:
    static StateSampler fixed(std::vector<domain::SegmentState> fleet);
    static StateSampler randomized(domain::SegmentState base, RandomizedRanges ranges);

    // Deterministic given the rng state. Throws ConfigError on an empty fleet.
    domain::SegmentState sample(Rng& rng) const;

    bool is_fixed() const { return fixed_; }
    const std::vector<domain::SegmentState>& fleet() const { return fleet_; }

private:
    bool fixed_ = true;
    std::vector<domain::SegmentState> fleet_;
    domain::SegmentState base_;
    RandomizedRanges ranges_;
};

// ---------------------------------------------------------------------------
// Surrogate
// ---------------------------------------------------------------------------

// Two regression nets over the 40-factor input, each with its own fitted
// normalization (40 input scales + 1 target scale, 41 in all).
struct SurrogatePair {
    neural::Mlp iri_model;
    neural::Mlp rd_model;
    domain::NormalizationParams norm_iri;
    domain::NormalizationParams norm_rd;
};

struct SurrogateTrainConfig {
    std::vector<int> hidden = {64, 64};
    int epochs = 200;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double holdout_fraction = 0.2;
    int min_samples = 50;
    std::uint64_t seed = 1;
};

struct FitStats {
    int train_count = 0;
    int holdout_count = 0;
    double train_rmse = 0.0;    // raw indicator units
    double holdout_rmse = 0.0;
    double train_r2 = 0.0;
    double holdout_r2 = 0.0;
};

struct FitReport {
    FitStats iri;
    FitStats rd;
};

// Fits both nets with a deterministic seeded split. Throws ValidationError
// naming the indicator when it has fewer than min_samples pairs or
// zero-variance targets.
SurrogatePair train_surrogate(const std::vector<dataprep::TrainingPair>& iri_pairs,
                              const std::vector<dataprep::TrainingPair>& rd_pairs,
                              const SurrogateTrainConfig& cfg, FitReport* report = nullptr);

// Raw 40-vector in, raw indicator value out: normalizes with the stored
// params, evaluates the net, denormalizes, and clips to (0, cap].
double predict_next(const SurrogatePair& sp, dataprep::Indicator which, const VectorXd& raw_input,
                    double cap);

// Versioned JSON file with both nets, both normalizations, and a checksum.
void save_surrogate(const SurrogatePair& sp, const std::string& path);
SurrogatePair load_surrogate(const std::string& path);

void save_fit_report_csv(const FitReport& report, const std::string& path);

// ---------------------------------------------------------------------------
// Transitions
// ---------------------------------------------------------------------------

class Environment {
public:
    Environment(EnvironmentConfig cfg, domain::CodeBook codes,
                std::optional<SurrogatePair> surrogate = std::nullopt);

    // One year: action effect at year start, then one year of deterioration.
    // `year_index` is whole years since the planning start (feeds the
    // surrogate's maintenance-date input). Pure function of its arguments.
    domain::SegmentState step(const domain::SegmentState& s, const domain::MaintenanceAction& a,
                              int year_index = 0) const;

    // horizon+1 (iri, rd) points under repeated do-nothing from s0.
    std::vector<std::pair<double, double>> baseline_trajectory(const domain::SegmentState& s0,
                                                               int horizon) const;

    const EnvironmentConfig& config() const { return cfg_; }
    const domain::CodeBook& codes() const { return codes_; }

private:
    EnvironmentConfig cfg_;
    domain::CodeBook codes_;
    std::optional<SurrogatePair> surrogate_;
};

}  // namespace paverl::envmodel
