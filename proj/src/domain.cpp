#include "paverl/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace paverl::domain {

// ---------------------------------------------------------------------------
// CodeBook
// ---------------------------------------------------------------------------

CodeBook CodeBook::defaults() {
    CodeBook cb;
    cb.fields_ = {
        {"surface_type", {"AC", "ST", "PCC", "COMPOSITE"}},
        {"binder_type", {"NONE", "AC", "ATB", "PMA"}},
        {"base_type", {"GB", "CTB", "ATB", "LTB"}},
        {"subbase_type", {"NONE", "GS", "SS", "CS"}},
        {"surface_material", {"AC-20", "AC-30", "HMRAC", "OGFC"}},
        {"binder_material", {"NONE", "AC-20", "AC-30", "PG-64"}},
        {"base_material", {"CRUSHED_STONE", "GRAVEL", "CEMENT_AGG", "ASPHALT_TREATED"}},
        {"subbase_material", {"NONE", "SAND", "GRAVEL", "SOIL_AGG"}},
        {"treatment_material", {"AC-20", "AC-30", "HFRS-2P"}},
        {"freeze_flag", {"NON-FREEZE", "FREEZE"}},
        {"moisture_flag", {"DRY", "WET"}},
    };
    return cb;
}

CodeBook CodeBook::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("CodeBook::load: cannot open " + path);
    CodeBook cb;
    std::string line;
    std::string field;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            field = line.substr(1, line.size() - 2);
            cb.fields_[field];
            continue;
        }
        if (field.empty()) throw ConfigError("CodeBook::load: code before any [field] header");
        cb.fields_[field].push_back(line);
    }
    for (const auto& [name, vocab] : cb.fields_) {
        if (vocab.empty()) throw ConfigError("CodeBook::load: field " + name + " has no codes");
    }
    return cb;
}

void CodeBook::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("CodeBook::save: cannot open " + path);
    out << "# Closed categorical-code enumeration: one code per line per field.\n";
    for (const auto& [name, vocab] : fields_) {
        out << "[" << name << "]\n";
        for (const auto& code : vocab) out << code << "\n";
    }
}

const std::vector<std::string>& CodeBook::vocabulary(const std::string& field) const {
    auto it = fields_.find(field);
    if (it == fields_.end()) throw ValidationError("CodeBook: unknown field " + field);
    return it->second;
}

int CodeBook::index_of(const std::string& field, const std::string& code) const {
    const auto& vocab = vocabulary(field);
    auto it = std::find(vocab.begin(), vocab.end(), code);
    if (it == vocab.end()) {
        throw ValidationError("CodeBook: unknown code '" + code + "' for field " + field);
    }
    return static_cast<int>(it - vocab.begin());
}

const std::string& CodeBook::code_at(const std::string& field, int index) const {
    const auto& vocab = vocabulary(field);
    if (index < 0 || index >= static_cast<int>(vocab.size())) {
        throw ValidationError("CodeBook: index out of range for field " + field);
    }
    return vocab[static_cast<std::size_t>(index)];
}

// ---------------------------------------------------------------------------
// Segment validation
// ---------------------------------------------------------------------------

void validate(const SegmentState& s, const CodeBook& codes) {
    if (!(s.iri > 0.0)) throw ValidationError("SegmentState: iri must be positive");
    if (s.rd < 0.0) throw ValidationError("SegmentState: rd must be non-negative");
    if (s.traffic.truck_ratio < 0.0 || s.traffic.truck_ratio > 1.0) {
        throw ValidationError("SegmentState: truck_ratio must lie in [0,1]");
    }
    if (s.traffic.annual_aadt < 0.0) throw ValidationError("SegmentState: annual_aadt must be >= 0");
    if (s.traffic.annual_esal < 0.0) throw ValidationError("SegmentState: annual_esal must be >= 0");
    if (s.age_years < 0.0) throw ValidationError("SegmentState: age_years must be >= 0");
    const std::array<const LayerSpec*, 4> layers = {&s.structure.surface, &s.structure.binder,
                                                    &s.structure.base, &s.structure.subbase};
    const std::array<const char*, 4> prefixes = {"surface", "binder", "base", "subbase"};
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i]->thickness_mm < 0.0) {
            throw ValidationError(std::string("SegmentState: ") + prefixes[i] + " thickness must be >= 0");
        }
        codes.index_of(std::string(prefixes[i]) + "_type", layers[i]->type);
        codes.index_of(std::string(prefixes[i]) + "_material", layers[i]->material);
    }
    codes.index_of("freeze_flag", s.climate.freeze_flag);
    codes.index_of("moisture_flag", s.climate.moisture_flag);
}

// ---------------------------------------------------------------------------
// Action catalog
// ---------------------------------------------------------------------------

namespace {
const std::vector<std::string> kKindNames = {
    "DoNothing",
    "AsphaltConcreteOverlay",
    "HotMixRecycledAcOverlay",
    "MillOffAcOverlayAc",
    "MillExistingOverlayRecycledAc",
    "AggregateSealCoat",
    "FogSealCoat",
    "CrackSealingPatching",
};
}  // namespace

const std::string& kind_name(ActionKind kind) {
    return kKindNames[static_cast<std::size_t>(kind)];
}

ActionKind kind_from_name(const std::string& name) {
    auto it = std::find(kKindNames.begin(), kKindNames.end(), name);
    if (it == kKindNames.end()) throw ValidationError("unknown action kind: " + name);
    return static_cast<ActionKind>(it - kKindNames.begin());
}

std::vector<MaintenanceAction> build_action_catalog() {
    std::vector<MaintenanceAction> catalog;
    catalog.reserve(32);
    catalog.push_back({0, ActionKind::DoNothing, std::nullopt, std::nullopt});

    const std::vector<std::string> overlay_materials = {"AC-20", "AC-30"};
    auto add_grid = [&](ActionKind kind, const std::vector<double>& thicknesses) {
        for (double t : thicknesses) {
            for (const auto& m : overlay_materials) {
                catalog.push_back({static_cast<int>(catalog.size()), kind, t, m});
            }
        }
    };
    add_grid(ActionKind::AsphaltConcreteOverlay, {25.4, 50.8, 76.2, 101.6});
    add_grid(ActionKind::HotMixRecycledAcOverlay, {38.1, 50.8, 76.2});
    add_grid(ActionKind::MillOffAcOverlayAc, {38.1, 50.8, 76.2, 101.6});
    add_grid(ActionKind::MillExistingOverlayRecycledAc, {50.8, 76.2, 101.6});
    catalog.push_back({static_cast<int>(catalog.size()), ActionKind::AggregateSealCoat,
                       std::nullopt, std::string("AC-20")});
    catalog.push_back({static_cast<int>(catalog.size()), ActionKind::FogSealCoat,
                       std::nullopt, std::string("HFRS-2P")});
    catalog.push_back({static_cast<int>(catalog.size()), ActionKind::CrackSealingPatching,
                       std::nullopt, std::string("AC-20")});
    return catalog;
}

void export_catalog_csv(const std::vector<MaintenanceAction>& catalog, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("export_catalog_csv: cannot open " + path);
    out << "id,kind,thickness_mm,material\n";
    for (const auto& a : catalog) {
        out << a.id << "," << kind_name(a.kind) << ",";
        if (a.thickness_mm) out << fmt_double(*a.thickness_mm);
        out << ",";
        if (a.material) out << *a.material;
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Feature encoding
// ---------------------------------------------------------------------------

double minmax_apply_one(double x, const FeatureScale& f) {
    if (f.constant) return x;
    return (x - f.min) / (f.max - f.min);
}

double minmax_invert_one(double y, const FeatureScale& f) {
    if (f.constant) return y;
    return f.min + y * (f.max - f.min);
}

const std::vector<std::string>& agent_feature_names() {
    static const std::vector<std::string> names = {
        "surface_type",  "surface_thickness_mm",  "surface_material",
        "binder_type",   "binder_thickness_mm",   "binder_material",
        "base_type",     "base_thickness_mm",     "base_material",
        "subbase_type",  "subbase_thickness_mm",  "subbase_material",
        "truck_ratio",   "annual_esal",           "annual_aadt",
        "annual_precipitation_mm", "freeze_thaw_cycles", "freeze_flag", "moisture_flag",
        "iri",           "rd",
    };
    return names;
}

NormalizationParams agent_normalization(const CodeBook& codes, const AgentRanges& ranges) {
    auto categorical = [&](const std::string& field) {
        const double hi = static_cast<double>(codes.vocabulary(field).size()) - 1.0;
        return FeatureScale{field, 0.0, hi, hi == 0.0};
    };
    auto numeric = [](const std::string& name, double lo, double hi) {
        return FeatureScale{name, lo, hi, false};
    };
    NormalizationParams norm;
    for (const char* layer : {"surface", "binder", "base", "subbase"}) {
        norm.features.push_back(categorical(std::string(layer) + "_type"));
        norm.features.push_back(numeric(std::string(layer) + "_thickness_mm", 0.0, ranges.thickness_max_mm));
        norm.features.push_back(categorical(std::string(layer) + "_material"));
    }
    norm.features.push_back(numeric("truck_ratio", 0.0, 1.0));
    norm.features.push_back(numeric("annual_esal", 0.0, ranges.esal_max));
    norm.features.push_back(numeric("annual_aadt", 0.0, ranges.aadt_max));
    norm.features.push_back(numeric("annual_precipitation_mm", 0.0, ranges.precipitation_max_mm));
    norm.features.push_back(numeric("freeze_thaw_cycles", 0.0, ranges.freeze_thaw_max));
    norm.features.push_back(categorical("freeze_flag"));
    norm.features.push_back(categorical("moisture_flag"));
    norm.features.push_back(numeric("iri", 0.0, ranges.iri_max));
    norm.features.push_back(numeric("rd", 0.0, ranges.rd_max));
    norm.fitted = true;
    return norm;
}

Eigen::VectorXd encode_agent_state(const SegmentState& s, const NormalizationParams& norm,
                                   const CodeBook& codes) {
    if (!norm.fitted) throw ConfigError("encode_agent_state: normalization params not fitted");
    if (static_cast<int>(norm.features.size()) != kAgentFeatureCount) {
        throw ConfigError("encode_agent_state: expected 21 feature scales");
    }
    validate(s, codes);

    Eigen::VectorXd raw(kAgentFeatureCount);
    const std::array<const LayerSpec*, 4> layers = {&s.structure.surface, &s.structure.binder,
                                                    &s.structure.base, &s.structure.subbase};
    const std::array<const char*, 4> prefixes = {"surface", "binder", "base", "subbase"};
    int k = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        raw(k++) = codes.index_of(std::string(prefixes[i]) + "_type", layers[i]->type);
        raw(k++) = layers[i]->thickness_mm;
        raw(k++) = codes.index_of(std::string(prefixes[i]) + "_material", layers[i]->material);
    }
    raw(k++) = s.traffic.truck_ratio;
    raw(k++) = s.traffic.annual_esal;
    raw(k++) = s.traffic.annual_aadt;
    raw(k++) = s.climate.annual_precipitation_mm;
    raw(k++) = s.climate.freeze_thaw_cycles;
    raw(k++) = codes.index_of("freeze_flag", s.climate.freeze_flag);
    raw(k++) = codes.index_of("moisture_flag", s.climate.moisture_flag);
    raw(k++) = s.iri;
    raw(k++) = s.rd;

    Eigen::VectorXd out(kAgentFeatureCount);
    for (int i = 0; i < kAgentFeatureCount; ++i) {
        out(i) = minmax_apply_one(raw(i), norm.features[static_cast<std::size_t>(i)]);
    }
    return out;
}

SegmentState decode_agent_state(const Eigen::VectorXd& features, const NormalizationParams& norm,
                                const CodeBook& codes) {
    if (!norm.fitted) throw ConfigError("decode_agent_state: normalization params not fitted");
    if (features.size() != kAgentFeatureCount) {
        throw ValidationError("decode_agent_state: expected 21 features");
    }
    Eigen::VectorXd raw(kAgentFeatureCount);
    for (int i = 0; i < kAgentFeatureCount; ++i) {
        raw(i) = minmax_invert_one(features(i), norm.features[static_cast<std::size_t>(i)]);
    }
    auto code = [&](const std::string& field, double v) {
        return codes.code_at(field, static_cast<int>(std::lround(v)));
    };
    SegmentState s;
    std::array<LayerSpec*, 4> layers = {&s.structure.surface, &s.structure.binder,
                                        &s.structure.base, &s.structure.subbase};
    const std::array<const char*, 4> prefixes = {"surface", "binder", "base", "subbase"};
    int k = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i]->type = code(std::string(prefixes[i]) + "_type", raw(k++));
        layers[i]->thickness_mm = raw(k++);
        layers[i]->material = code(std::string(prefixes[i]) + "_material", raw(k++));
    }
    s.traffic.truck_ratio = raw(k++);
    s.traffic.annual_esal = raw(k++);
    s.traffic.annual_aadt = raw(k++);
    s.climate.annual_precipitation_mm = raw(k++);
    s.climate.freeze_thaw_cycles = raw(k++);
    s.climate.freeze_flag = code("freeze_flag", raw(k++));
    s.climate.moisture_flag = code("moisture_flag", raw(k++));
    s.iri = raw(k++);
    s.rd = raw(k++);
    s.age_years = 0.0;
    return s;
}

// ---------------------------------------------------------------------------
// Condition bands
// ---------------------------------------------------------------------------

std::vector<ConditionBand> default_condition_bands() {
    return {
        {"excellent", 1.5, 6.0},
        {"good", 2.7, 12.0},
        {"fair", 3.5, 20.0},
        {"poor", std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()},
    };
}

void validate_bands(const std::vector<ConditionBand>& bands) {
    if (bands.size() < 2) throw ConfigError("condition bands: need at least two bands");
    if (!std::isinf(bands.back().iri_upper) || !std::isinf(bands.back().rd_upper)) {
        throw ConfigError("condition bands: last band must be unbounded");
    }
    for (std::size_t i = 1; i < bands.size(); ++i) {
        if (!(bands[i].iri_upper > bands[i - 1].iri_upper) ||
            !(bands[i].rd_upper > bands[i - 1].rd_upper)) {
            throw ConfigError("condition bands: thresholds must be strictly increasing");
        }
    }
}

std::string classify_condition(const SegmentState& s, const std::vector<ConditionBand>& bands) {
    validate_bands(bands);
    auto band_index = [&](double value, bool use_iri) {
        for (std::size_t i = 0; i < bands.size(); ++i) {
            const double upper = use_iri ? bands[i].iri_upper : bands[i].rd_upper;
            // A value exactly at the threshold belongs to the better band.
            if (value <= upper) return i;
        }
        return bands.size() - 1;
    };
    const std::size_t worst = std::max(band_index(s.iri, true), band_index(s.rd, false));
    return bands[worst].label;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string segment_state_to_json_string(const SegmentState& s) {
    auto layer = [](const LayerSpec& l) {
        return nlohmann::json{{"type", l.type},
                              {"thickness_hex", doubles_to_hex(&l.thickness_mm, 1)},
                              {"material", l.material}};
    };
    // Numeric fields packed into one hex payload: traffic (3), climate (2),
    // iri, rd, age.
    const double nums[8] = {s.traffic.truck_ratio,
                            s.traffic.annual_esal,
                            s.traffic.annual_aadt,
                            s.climate.annual_precipitation_mm,
                            s.climate.freeze_thaw_cycles,
                            s.iri,
                            s.rd,
                            s.age_years};
    nlohmann::json j;
    j["surface"] = layer(s.structure.surface);
    j["binder"] = layer(s.structure.binder);
    j["base"] = layer(s.structure.base);
    j["subbase"] = layer(s.structure.subbase);
    j["freeze_flag"] = s.climate.freeze_flag;
    j["moisture_flag"] = s.climate.moisture_flag;
    j["nums_hex"] = doubles_to_hex(nums, 8);
    return j.dump();
}

SegmentState segment_state_from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("segment state: invalid JSON: ") + e.what());
    }
    auto layer = [&](const char* key) {
        const auto& jl = j.at(key);
        LayerSpec l;
        l.type = jl.at("type").get<std::string>();
        l.thickness_mm = hex_to_doubles(jl.at("thickness_hex").get<std::string>()).at(0);
        l.material = jl.at("material").get<std::string>();
        return l;
    };
    SegmentState s;
    s.structure.surface = layer("surface");
    s.structure.binder = layer("binder");
    s.structure.base = layer("base");
    s.structure.subbase = layer("subbase");
    s.climate.freeze_flag = j.at("freeze_flag").get<std::string>();
    s.climate.moisture_flag = j.at("moisture_flag").get<std::string>();
    const std::vector<double> nums = hex_to_doubles(j.at("nums_hex").get<std::string>());
    if (nums.size() != 8) throw ConfigError("segment state: corrupt numeric payload");
    s.traffic.truck_ratio = nums[0];
    s.traffic.annual_esal = nums[1];
    s.traffic.annual_aadt = nums[2];
    s.climate.annual_precipitation_mm = nums[3];
    s.climate.freeze_thaw_cycles = nums[4];
    s.iri = nums[5];
    s.rd = nums[6];
    s.age_years = nums[7];
    return s;
}

}  // namespace paverl::domain
