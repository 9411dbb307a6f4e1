#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "paverl/common.hpp"

namespace paverl::domain {

// ---------------------------------------------------------------------------
// Categorical code book
// ---------------------------------------------------------------------------

// Closed per-field vocabularies for every categorical attribute. Unknown codes
// are rejected rather than bucketed; the shipped enumeration file
// (data/structure_codes.txt) mirrors the built-in defaults.
class CodeBook {
public:
    static CodeBook defaults();
    static CodeBook load(const std::string& path);

    const std::vector<std::string>& vocabulary(const std::string& field) const;
    // Index of `code` inside `field`'s vocabulary; throws ValidationError on
    // unknown code or field.
    int index_of(const std::string& field, const std::string& code) const;
    const std::string& code_at(const std::string& field, int index) const;
    bool has_field(const std::string& field) const { return fields_.count(field) != 0; }

    void save(const std::string& path) const;

private:
    std::map<std::string, std::vector<std::string>> fields_;
};

// ---------------------------------------------------------------------------
// Segment state
// ---------------------------------------------------------------------------

struct LayerSpec {
    std::string type;
    double thickness_mm = 0.0;
    std::string material;
};

// 12 structure attributes: 4 layers x (type, thickness, material).
struct StructureProfile {
    LayerSpec surface;
    LayerSpec binder;
    LayerSpec base;
    LayerSpec subbase;
};

struct TrafficProfile {
    double truck_ratio = 0.0;   // fraction of trucks, 0..1
    double annual_esal = 0.0;   // equivalent single-axle loads per year
    double annual_aadt = 0.0;   // vehicles per day
};

struct ClimateProfile {
    double annual_precipitation_mm = 0.0;
    double freeze_thaw_cycles = 0.0;
    std::string freeze_flag;    // FREEZE or NON-FREEZE
    std::string moisture_flag;  // WET or DRY
};

struct SegmentState {
    StructureProfile structure;
    TrafficProfile traffic;
    ClimateProfile climate;
    double iri = 1.0;       // m/km, higher is worse
    double rd = 1.0;        // mm, higher is worse
    double age_years = 0.0; // years since construction or last reconstruction
};

// Throws ValidationError when a numeric invariant is violated or a categorical
// code is unknown to the code book.
void validate(const SegmentState& s, const CodeBook& codes);

// Bit-exact JSON round-trip (numeric fields stored as hex bit patterns), used
// by environment snapshots and fleet files.
std::string segment_state_to_json_string(const SegmentState& s);
SegmentState segment_state_from_json_string(const std::string& text);

// ---------------------------------------------------------------------------
// Maintenance actions
// ---------------------------------------------------------------------------

enum class ActionKind {
    DoNothing = 0,
    AsphaltConcreteOverlay,
    HotMixRecycledAcOverlay,
    MillOffAcOverlayAc,
    MillExistingOverlayRecycledAc,
    AggregateSealCoat,
    FogSealCoat,
    CrackSealingPatching,
};

const std::string& kind_name(ActionKind kind);
ActionKind kind_from_name(const std::string& name);

struct MaintenanceAction {
    int id = 0;
    ActionKind kind = ActionKind::DoNothing;
    std::optional<double> thickness_mm;
    std::optional<std::string> material;
};

// The full catalog: do-nothing at id 0 followed by the treatment grid in
// fixed order (overlay kinds expand thickness x material, ascending thickness,
// AC-20 before AC-30). Always 32 entries.
std::vector<MaintenanceAction> build_action_catalog();

// CSV export: id, kind, thickness_mm, material (blank where absent).
void export_catalog_csv(const std::vector<MaintenanceAction>& catalog, const std::string& path);

// ---------------------------------------------------------------------------
// Agent feature encoding
// ---------------------------------------------------------------------------

// Per-feature min-max scale. A constant feature (max == min) is flagged and
// passed through unscaled.
struct FeatureScale {
    std::string name;
    double min = 0.0;
    double max = 1.0;
    bool constant = false;
};

struct NormalizationParams {
    std::vector<FeatureScale> features;
    bool fitted = false;
};

double minmax_apply_one(double x, const FeatureScale& f);
double minmax_invert_one(double y, const FeatureScale& f);

// Numeric value ranges used to build the agent-state normalization. Indicator
// maxima should match the environment caps.
struct AgentRanges {
    double thickness_max_mm = 400.0;
    double esal_max = 1.0e7;
    double aadt_max = 2.0e5;
    double precipitation_max_mm = 2500.0;
    double freeze_thaw_max = 150.0;
    double iri_max = 6.0;
    double rd_max = 25.0;
};

// Fitted scales for the 21 agent features in their documented order (see
// agent_feature_names). Categorical slots span [0, vocabulary size - 1].
NormalizationParams agent_normalization(const CodeBook& codes, const AgentRanges& ranges);

// The fixed feature ordering: 12 structure, 3 traffic, 4 climate, IRI, RD.
const std::vector<std::string>& agent_feature_names();

constexpr int kAgentFeatureCount = 21;

// Encodes a segment into the 21-feature agent vector; every slot lies in
// [0, 1] for in-range inputs. Categorical fields map to their vocabulary
// index before scaling.
Eigen::VectorXd encode_agent_state(const SegmentState& s, const NormalizationParams& norm,
                                   const CodeBook& codes);

// Inverse of encode_agent_state for the encoded fields; age_years is not part
// of the encoding and comes back as zero.
SegmentState decode_agent_state(const Eigen::VectorXd& features, const NormalizationParams& norm,
                                const CodeBook& codes);

// ---------------------------------------------------------------------------
// Condition classification
// ---------------------------------------------------------------------------

struct ConditionBand {
    std::string label;
    double iri_upper = 0.0;  // m/km
    double rd_upper = 0.0;   // mm
};

// excellent/good/fair thresholds; poor is unbounded. Values exactly at a
// threshold classify into the better band.
std::vector<ConditionBand> default_condition_bands();

void validate_bands(const std::vector<ConditionBand>& bands);

// Worst band triggered by either indicator.
std::string classify_condition(const SegmentState& s, const std::vector<ConditionBand>& bands);

}  // namespace paverl::domain
