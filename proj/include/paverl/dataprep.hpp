#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "paverl/common.hpp"
#include "paverl/domain.hpp"

// Observation ingest, cleaning, and encoding: turns merged condition-survey
// tables into the 40-factor training pairs the deterioration surrogate
// consumes. All tabular data here is rows = samples, columns = features.
namespace paverl::dataprep {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Dates
// ---------------------------------------------------------------------------

// Days since 1970-01-01 in the proleptic Gregorian calendar.
long days_from_civil(int year, int month, int day);

// Strict "YYYY-MM-DD" -> fractional years since 1970-01-01 (days / 365.25).
// Throws ValidationError on malformed input or out-of-range fields.
double parse_date_years(const std::string& ymd);

// ---------------------------------------------------------------------------
// Series
// ---------------------------------------------------------------------------

enum class Indicator { Iri, Rd };

const std::string& indicator_name(Indicator ind);

struct Observation {
    double date_years = 0.0;  // fractional years since 1970-01-01
    double value = 0.0;       // NaN marks a missing value prior to imputation
};

struct IndicatorSeries {
    std::string segment_id;
    Indicator indicator = Indicator::Iri;
    std::vector<Observation> observations;  // strictly increasing in date
    std::vector<double> action_dates;       // ascending, fractional years
};

struct MaintenanceEvent {
    double date_years = 0.0;
    domain::ActionKind kind = domain::ActionKind::DoNothing;
    double thickness_mm = 0.0;  // 0 when the treatment has no thickness
    std::string material;       // empty when the treatment has no material
};

struct SegmentRecord {
    std::string id;
    domain::SegmentState attributes;  // static structure/traffic/climate
    IndicatorSeries iri;
    IndicatorSeries rd;
    std::vector<MaintenanceEvent> events;  // ascending by date
};

struct RowError {
    std::size_t line = 0;  // 1-based line number in the input
    std::string message;
};

struct Dataset {
    std::vector<SegmentRecord> segments;  // in order of first appearance
    std::vector<RowError> row_errors;
};

// ---------------------------------------------------------------------------
// Ingest
// ---------------------------------------------------------------------------

// Column names the ingest schema requires, in canonical order. The header row
// must contain every one of them (any order); extra columns are ignored.
const std::vector<std::string>& ingest_columns();

// Parses a merged observation/maintenance table (comma-separated, header row,
// no quoted fields). Each row carries a segment id and a date; indicator
// cells may be blank (missing value). A row whose action_kind cell is
// non-blank additionally records a maintenance event at that date; if both
// indicator cells are blank it records only the event. Static attribute
// cells are read from the first row of each segment on which they are
// non-blank. Rows are grouped by segment and sorted by date. Malformed rows
// are collected into row_errors (with line numbers) and excluded, never
// fatal; a missing mandatory column throws SchemaError.
Dataset ingest(std::istream& in);
Dataset ingest_file(const std::string& path);

// ---------------------------------------------------------------------------
// Encoding and normalization
// ---------------------------------------------------------------------------

// One row per input code, one column per vocabulary entry; exactly one 1 per
// row. Throws ValidationError on a code outside the vocabulary.
MatrixXd one_hot(const std::vector<std::string>& column,
                 const std::vector<std::string>& vocabulary);

// Per-column min/max over the table (rows = samples). Constant columns are
// flagged and later passed through unscaled.
domain::NormalizationParams minmax_fit(const MatrixXd& table,
                                       const std::vector<std::string>& names);
MatrixXd minmax_apply(const MatrixXd& table, const domain::NormalizationParams& params);
MatrixXd minmax_invert(const MatrixXd& table, const domain::NormalizationParams& params);

void save_normalization(const domain::NormalizationParams& params, const std::string& path);
domain::NormalizationParams load_normalization(const std::string& path);

// ---------------------------------------------------------------------------
// Imputation
// ---------------------------------------------------------------------------

enum class ImputePolicy { Interpolate, FillForward, Delete };

ImputePolicy impute_policy_from_name(const std::string& name);

struct ImputeReport {
    int interpolated = 0;
    int filled = 0;
    int deleted = 0;
};

// Removes every missing value according to the policy. Interpolation is
// linear in observation date; gaps before the first (resp. after the last)
// valid value take that nearest valid value, and fill_forward back-fills a
// leading gap from the first valid value for the same reason: no missing
// values may remain. A series with no valid values at all throws
// ValidationError under interpolate and fill_forward.
IndicatorSeries impute(const IndicatorSeries& series, ImputePolicy policy,
                       ImputeReport* report = nullptr);

// ---------------------------------------------------------------------------
// Monotone calibration
// ---------------------------------------------------------------------------

struct CalibrationChange {
    std::string segment_id;
    std::string indicator;
    std::size_t index = 0;  // observation index within the series
    double date_years = 0.0;
    double before = 0.0;
    double after = 0.0;
};

// Condition indicators only improve through maintenance, so within each
// interval between consecutive action dates the series must be
// non-decreasing; measurement noise that violates this is clamped up to the
// running maximum of its interval. An interval starts at the first
// observation at or after each action date, so a drop across an action
// boundary is legitimate and preserved. Idempotent; untouched points are
// bit-identical; every altered point is appended to `changes`.
IndicatorSeries calibrate_monotone(const IndicatorSeries& series,
                                   std::vector<CalibrationChange>* changes = nullptr);

void save_change_report_csv(const std::vector<CalibrationChange>& changes,
                            const std::string& path);

// Calibrated observations back in ingest-shaped rows (observation rows plus
// maintenance-event rows), suitable for re-ingest.
void save_dataset_csv(const Dataset& dataset, const std::string& path);

// ---------------------------------------------------------------------------
// Training pairs
// ---------------------------------------------------------------------------

// Input-vector layout, 40 entries:
//   0..23  structure: per layer (surface, binder, base, subbase) the type
//          one-hot over its 4-code vocabulary, thickness_mm, material index
//   24..29 traffic: truck_ratio, annual_esal, annual_aadt, log1p(esal),
//          log1p(aadt), trucks_per_day (= ratio * aadt)
//   30..33 weather: precipitation_mm, freeze_thaw_cycles, freeze 0/1, wet 0/1
//   34     initial indicator value (raw units)
//   35     interval length, fractional years
//   36..38 maintenance within the interval: kind code (1..7, 0 = none),
//          thickness_mm, material index (1-based, 0 = none)
//   39     maintenance date, fractional years since 1970-01-01 (0 = none)
inline constexpr int kSurrogateInputCount = 40;

const std::vector<std::string>& surrogate_input_names();

// Raw-unit (unnormalized) surrogate input for one prediction interval.
VectorXd surrogate_input(const domain::SegmentState& attributes, const domain::CodeBook& codes,
                         double initial_indicator, double interval_years,
                         const std::optional<MaintenanceEvent>& maintenance);

struct TrainingPair {
    VectorXd input;       // kSurrogateInputCount entries, raw units
    double target = 0.0;  // next observed indicator value, raw units
};

struct PairBuildReport {
    std::vector<std::string> skipped_segments;  // fewer than 2 observations
};

// One pair per consecutive observation pair of the chosen indicator. The
// maintenance slots encode the latest event in the half-open date interval
// (t0, t1] and are zero when no event falls inside it. Requires calibrated,
// fully imputed series.
std::vector<TrainingPair> build_training_pairs(const Dataset& dataset,
                                               const domain::CodeBook& codes, Indicator which,
                                               PairBuildReport* report = nullptr);

void save_training_pairs_csv(const std::vector<TrainingPair>& pairs, const std::string& path);
std::vector<TrainingPair> load_training_pairs_csv(const std::string& path);

}  // namespace paverl::dataprep
