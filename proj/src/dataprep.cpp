#include "paverl/dataprep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace paverl::dataprep {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

double parse_double(const std::string& cell, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        throw ValidationError("non-numeric " + what + ": '" + cell + "'");
    }
    if (used != cell.size()) throw ValidationError("non-numeric " + what + ": '" + cell + "'");
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dates
// ---------------------------------------------------------------------------

long days_from_civil(int year, int month, int day) {
    // Howard Hinnant's algorithm; era = 400 civil years.
    year -= month <= 2;
    const long era = (year >= 0 ? year : year - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(year - era * 400);
    const unsigned doy =
        (153u * static_cast<unsigned>(month + (month > 2 ? -3 : 9)) + 2u) / 5u +
        static_cast<unsigned>(day) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097L + static_cast<long>(doe) - 719468L;
}

namespace {

void civil_from_days(long z, int* year, int* month, int* day) {
    z += 719468L;
    const long era = (z >= 0 ? z : z - 146096L) / 146097L;
    const unsigned doe = static_cast<unsigned>(z - era * 146097L);
    const unsigned yoe = (doe - doe / 1460u + doe / 36524u - doe / 146096u) / 365u;
    const long y = static_cast<long>(yoe) + era * 400L;
    const unsigned doy = doe - (365u * yoe + yoe / 4u - yoe / 100u);
    const unsigned mp = (5u * doy + 2u) / 153u;
    *day = static_cast<int>(doy - (153u * mp + 2u) / 5u + 1u);
    *month = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    *year = static_cast<int>(y + (*month <= 2));
}

std::string format_date(double date_years) {
    const long days = std::lround(date_years * 365.25);
    int y = 0, m = 0, d = 0;
    civil_from_days(days, &y, &m, &d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return buf;
}

}  // namespace

double parse_date_years(const std::string& ymd) {
    int y = 0, m = 0, d = 0;
    char tail = 0;
    if (std::sscanf(ymd.c_str(), "%4d-%2d-%2d%c", &y, &m, &d, &tail) != 3 ||
        ymd.size() != 10) {
        throw ValidationError("unparseable date '" + ymd + "', expected YYYY-MM-DD");
    }
    if (m < 1 || m > 12) throw ValidationError("month out of range in date '" + ymd + "'");
    static const int month_days[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    const int dmax = month_days[m - 1] + (m == 2 && leap ? 1 : 0);
    if (d < 1 || d > dmax) throw ValidationError("day out of range in date '" + ymd + "'");
    return static_cast<double>(days_from_civil(y, m, d)) / 365.25;
}

const std::string& indicator_name(Indicator ind) {
    static const std::string iri = "iri", rd = "rd";
    return ind == Indicator::Iri ? iri : rd;
}

// ---------------------------------------------------------------------------
// Ingest
// ---------------------------------------------------------------------------

const std::vector<std::string>& ingest_columns() {
    static const std::vector<std::string> cols = {
        "segment_id", "date", "iri", "rd",
        "layer1_type", "layer1_thickness_mm", "layer1_material",
        "layer2_type", "layer2_thickness_mm", "layer2_material",
        "layer3_type", "layer3_thickness_mm", "layer3_material",
        "layer4_type", "layer4_thickness_mm", "layer4_material",
        "truck_ratio", "annual_esal", "annual_aadt",
        "precip_mm", "freeze_thaw_cycles", "freeze_flag", "moisture_flag",
        "action_kind", "action_thickness_mm", "action_material",
    };
    return cols;
}

namespace {

struct PendingObservation {
    double date = 0.0;
    double iri = kNaN;
    double rd = kNaN;
    std::size_t line = 0;
};

struct SegmentBuilder {
    SegmentRecord record;
    std::vector<PendingObservation> pending;
    std::set<std::string> captured;  // static columns already taken
};

}  // namespace

Dataset ingest(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("ingest: empty input, header row required");
    const std::vector<std::string> header = split_csv(line);
    std::map<std::string, int> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = static_cast<int>(i);
    for (const std::string& name : ingest_columns()) {
        if (!col.count(name)) throw SchemaError("ingest: missing mandatory column '" + name + "'");
    }

    Dataset out;
    std::map<std::string, std::size_t> segment_index;
    std::vector<SegmentBuilder> builders;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_csv(line);
        auto cell = [&](const std::string& name) -> std::string {
            const int idx = col.at(name);
            return idx < static_cast<int>(cells.size()) ? cells[static_cast<std::size_t>(idx)] : "";
        };

        try {
            const std::string id = cell("segment_id");
            if (id.empty()) throw ValidationError("blank segment_id");
            const double date = parse_date_years(cell("date"));

            const std::string iri_cell = cell("iri");
            const std::string rd_cell = cell("rd");
            double iri = kNaN, rd = kNaN;
            if (!iri_cell.empty()) {
                iri = parse_double(iri_cell, "iri");
                if (!(iri > 0.0)) throw ValidationError("non-positive iri");
            }
            if (!rd_cell.empty()) {
                rd = parse_double(rd_cell, "rd");
                if (!(rd > 0.0)) throw ValidationError("non-positive rd");
            }

            std::optional<MaintenanceEvent> event;
            const std::string kind_cell = cell("action_kind");
            if (!kind_cell.empty()) {
                MaintenanceEvent e;
                e.date_years = date;
                e.kind = domain::kind_from_name(kind_cell);
                const std::string th = cell("action_thickness_mm");
                if (!th.empty()) e.thickness_mm = parse_double(th, "action_thickness_mm");
                e.material = cell("action_material");
                event = e;
            }

            auto it = segment_index.find(id);
            if (it == segment_index.end()) {
                it = segment_index.emplace(id, builders.size()).first;
                builders.emplace_back();
                builders.back().record.id = id;
                builders.back().record.iri.segment_id = id;
                builders.back().record.iri.indicator = Indicator::Iri;
                builders.back().record.rd.segment_id = id;
                builders.back().record.rd.indicator = Indicator::Rd;
            }
            SegmentBuilder& b = builders[it->second];

            // Static attributes: first non-blank cell per column wins.
            auto capture = [&](const std::string& name, auto&& apply) {
                const std::string v = cell(name);
                if (v.empty() || b.captured.count(name)) return;
                apply(v);
                b.captured.insert(name);
            };
            domain::SegmentState& a = b.record.attributes;
            domain::LayerSpec* layers[4] = {&a.structure.surface, &a.structure.binder,
                                            &a.structure.base, &a.structure.subbase};
            for (int l = 0; l < 4; ++l) {
                const std::string p = "layer" + std::to_string(l + 1) + "_";
                capture(p + "type", [&](const std::string& v) { layers[l]->type = v; });
                capture(p + "thickness_mm", [&](const std::string& v) {
                    layers[l]->thickness_mm = parse_double(v, p + "thickness_mm");
                });
                capture(p + "material", [&](const std::string& v) { layers[l]->material = v; });
            }
            capture("truck_ratio", [&](const std::string& v) {
                a.traffic.truck_ratio = parse_double(v, "truck_ratio");
            });
            capture("annual_esal", [&](const std::string& v) {
                a.traffic.annual_esal = parse_double(v, "annual_esal");
            });
            capture("annual_aadt", [&](const std::string& v) {
                a.traffic.annual_aadt = parse_double(v, "annual_aadt");
            });
            capture("precip_mm", [&](const std::string& v) {
                a.climate.annual_precipitation_mm = parse_double(v, "precip_mm");
            });
            capture("freeze_thaw_cycles", [&](const std::string& v) {
                a.climate.freeze_thaw_cycles = parse_double(v, "freeze_thaw_cycles");
            });
            capture("freeze_flag", [&](const std::string& v) { a.climate.freeze_flag = v; });
            capture("moisture_flag", [&](const std::string& v) { a.climate.moisture_flag = v; });

            if (event) b.record.events.push_back(*event);
            const bool maintenance_only = event && iri_cell.empty() && rd_cell.empty();
            if (!maintenance_only) {
                b.pending.push_back({date, iri, rd, line_no});
            }
        } catch (const ValidationError& e) {
            out.row_errors.push_back({line_no, e.what()});
        }
    }

    for (SegmentBuilder& b : builders) {
        std::stable_sort(b.pending.begin(), b.pending.end(),
                         [](const PendingObservation& x, const PendingObservation& y) {
                             return x.date < y.date;
                         });
        double last_date = -std::numeric_limits<double>::infinity();
        for (const PendingObservation& p : b.pending) {
            if (p.date == last_date) {
                out.row_errors.push_back({p.line, "duplicate observation date for segment '" +
                                                      b.record.id + "'"});
                continue;
            }
            last_date = p.date;
            b.record.iri.observations.push_back({p.date, p.iri});
            b.record.rd.observations.push_back({p.date, p.rd});
        }
        std::stable_sort(b.record.events.begin(), b.record.events.end(),
                         [](const MaintenanceEvent& x, const MaintenanceEvent& y) {
                             return x.date_years < y.date_years;
                         });
        std::vector<double> action_dates;
        for (const MaintenanceEvent& e : b.record.events) {
            if (action_dates.empty() || action_dates.back() != e.date_years) {
                action_dates.push_back(e.date_years);
            }
        }
        b.record.iri.action_dates = action_dates;
        b.record.rd.action_dates = action_dates;
        for (const Observation& o : b.record.iri.observations) {
            if (!std::isnan(o.value)) {
                b.record.attributes.iri = o.value;
                break;
            }
        }
        for (const Observation& o : b.record.rd.observations) {
            if (!std::isnan(o.value)) {
                b.record.attributes.rd = o.value;
                break;
            }
        }
        out.segments.push_back(std::move(b.record));
    }
    return out;
}

Dataset ingest_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("ingest: cannot open " + path);
    return ingest(in);
}

// ---------------------------------------------------------------------------
// Encoding and normalization
// ---------------------------------------------------------------------------

MatrixXd one_hot(const std::vector<std::string>& column,
                 const std::vector<std::string>& vocabulary) {
    if (vocabulary.empty()) throw ValidationError("one_hot: empty vocabulary");
    MatrixXd out = MatrixXd::Zero(static_cast<Eigen::Index>(column.size()),
                                  static_cast<Eigen::Index>(vocabulary.size()));
    for (std::size_t r = 0; r < column.size(); ++r) {
        const auto it = std::find(vocabulary.begin(), vocabulary.end(), column[r]);
        if (it == vocabulary.end()) {
            throw ValidationError("one_hot: code '" + column[r] + "' not in vocabulary");
        }
        out(static_cast<Eigen::Index>(r), it - vocabulary.begin()) = 1.0;
    }
    return out;
}

domain::NormalizationParams minmax_fit(const MatrixXd& table,
                                       const std::vector<std::string>& names) {
    if (static_cast<Eigen::Index>(names.size()) != table.cols()) {
        throw ValidationError("minmax_fit: name count does not match column count");
    }
    if (table.rows() == 0) throw ValidationError("minmax_fit: empty table");
    domain::NormalizationParams params;
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
        domain::FeatureScale f;
        f.name = names[static_cast<std::size_t>(c)];
        f.min = table.col(c).minCoeff();
        f.max = table.col(c).maxCoeff();
        f.constant = f.max == f.min;
        params.features.push_back(std::move(f));
    }
    params.fitted = true;
    return params;
}

namespace {

void check_fitted(const domain::NormalizationParams& params, Eigen::Index cols,
                  const char* who) {
    if (!params.fitted) throw SequencingError(std::string(who) + ": fit before apply");
    if (static_cast<Eigen::Index>(params.features.size()) != cols) {
        throw ValidationError(std::string(who) + ": column count does not match fitted params");
    }
}

}  // namespace

MatrixXd minmax_apply(const MatrixXd& table, const domain::NormalizationParams& params) {
    check_fitted(params, table.cols(), "minmax_apply");
    MatrixXd out = table;
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
        const domain::FeatureScale& f = params.features[static_cast<std::size_t>(c)];
        for (Eigen::Index r = 0; r < table.rows(); ++r) {
            out(r, c) = domain::minmax_apply_one(table(r, c), f);
        }
    }
    return out;
}

MatrixXd minmax_invert(const MatrixXd& table, const domain::NormalizationParams& params) {
    check_fitted(params, table.cols(), "minmax_invert");
    MatrixXd out = table;
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
        const domain::FeatureScale& f = params.features[static_cast<std::size_t>(c)];
        for (Eigen::Index r = 0; r < table.rows(); ++r) {
            out(r, c) = domain::minmax_invert_one(table(r, c), f);
        }
    }
    return out;
}

void save_normalization(const domain::NormalizationParams& params, const std::string& path) {
    nlohmann::json j;
    j["format"] = "paverl-normalization";
    j["format_version"] = 1;
    j["fitted"] = params.fitted;
    j["features"] = nlohmann::json::array();
    for (const domain::FeatureScale& f : params.features) {
        j["features"].push_back({{"name", f.name},
                                 {"min_hex", doubles_to_hex(&f.min, 1)},
                                 {"max_hex", doubles_to_hex(&f.max, 1)},
                                 {"constant", f.constant}});
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("save_normalization: cannot open " + path);
    out << j.dump(2) << "\n";
}

domain::NormalizationParams load_normalization(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_normalization: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("load_normalization: invalid JSON: ") + e.what());
    }
    if (j.value("format", "") != "paverl-normalization") {
        throw ConfigError("load_normalization: unsupported format");
    }
    domain::NormalizationParams params;
    params.fitted = j.value("fitted", false);
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

// ---------------------------------------------------------------------------
// Imputation
// ---------------------------------------------------------------------------

ImputePolicy impute_policy_from_name(const std::string& name) {
    if (name == "interpolate") return ImputePolicy::Interpolate;
    if (name == "fill_forward") return ImputePolicy::FillForward;
    if (name == "delete") return ImputePolicy::Delete;
    throw ConfigError("unknown impute policy '" + name +
                      "', expected interpolate | fill_forward | delete");
}

IndicatorSeries impute(const IndicatorSeries& series, ImputePolicy policy,
                       ImputeReport* report) {
    IndicatorSeries out = series;
    auto& obs = out.observations;

    if (policy == ImputePolicy::Delete) {
        std::size_t removed = 0;
        auto end = std::remove_if(obs.begin(), obs.end(),
                                  [](const Observation& o) { return std::isnan(o.value); });
        removed = static_cast<std::size_t>(obs.end() - end);
        obs.erase(end, obs.end());
        if (report) report->deleted += static_cast<int>(removed);
        return out;
    }

    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!std::isnan(obs[i].value)) valid.push_back(i);
    }
    if (valid.empty() && !obs.empty()) {
        throw ValidationError("impute: series '" + series.segment_id + "/" +
                              indicator_name(series.indicator) + "' has no valid values");
    }

    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!std::isnan(obs[i].value)) continue;
        const auto next_it = std::lower_bound(valid.begin(), valid.end(), i);
        const bool has_next = next_it != valid.end();
        const bool has_prev = next_it != valid.begin();
        const std::size_t next = has_next ? *next_it : 0;
        const std::size_t prev = has_prev ? *(next_it - 1) : 0;

        if (policy == ImputePolicy::FillForward) {
            obs[i].value = has_prev ? obs[prev].value : obs[next].value;
            if (report) ++report->filled;
            continue;
        }
        // Interpolate: linear in date between the nearest valid neighbours,
        // or the single nearest value at the boundaries.
        if (has_prev && has_next) {
            const double t0 = obs[prev].date_years, t1 = obs[next].date_years;
            const double w = t1 == t0 ? 0.0 : (obs[i].date_years - t0) / (t1 - t0);
            obs[i].value = obs[prev].value + w * (obs[next].value - obs[prev].value);
        } else {
            obs[i].value = has_prev ? obs[prev].value : obs[next].value;
        }
        if (report) ++report->interpolated;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Monotone calibration
// ---------------------------------------------------------------------------

IndicatorSeries calibrate_monotone(const IndicatorSeries& series,
                                   std::vector<CalibrationChange>* changes) {
    IndicatorSeries out = series;
    auto& obs = out.observations;
    if (obs.empty()) return out;

    // Interval starts: index 0 plus, per action date, the first observation
    // at or after it.
    std::set<std::size_t> starts = {0};
    for (double d : series.action_dates) {
        const auto it = std::lower_bound(
            obs.begin(), obs.end(), d,
            [](const Observation& o, double v) { return o.date_years < v; });
        if (it != obs.end()) starts.insert(static_cast<std::size_t>(it - obs.begin()));
    }

    double running = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (starts.count(i)) running = -std::numeric_limits<double>::infinity();
        if (obs[i].value < running) {
            if (changes) {
                changes->push_back({series.segment_id, indicator_name(series.indicator), i,
                                    obs[i].date_years, obs[i].value, running});
            }
            obs[i].value = running;
        } else {
            running = obs[i].value;
        }
    }
    return out;
}

void save_change_report_csv(const std::vector<CalibrationChange>& changes,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_change_report_csv: cannot open " + path);
    out << "segment_id,indicator,index,date,before,after\n";
    for (const CalibrationChange& c : changes) {
        out << c.segment_id << "," << c.indicator << "," << c.index << ","
            << format_date(c.date_years) << "," << fmt_double(c.before) << ","
            << fmt_double(c.after) << "\n";
    }
}

void save_dataset_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_dataset_csv: cannot open " + path);
    const auto& cols = ingest_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << "\n";

    for (const SegmentRecord& seg : dataset.segments) {
        const domain::SegmentState& a = seg.attributes;
        const domain::LayerSpec* layers[4] = {&a.structure.surface, &a.structure.binder,
                                              &a.structure.base, &a.structure.subbase};
        auto static_cells = [&]() {
            std::string s;
            for (int l = 0; l < 4; ++l) {
                s += "," + layers[l]->type + "," + fmt_double(layers[l]->thickness_mm) + "," +
                     layers[l]->material;
            }
            s += "," + fmt_double(a.traffic.truck_ratio) + "," + fmt_double(a.traffic.annual_esal) +
                 "," + fmt_double(a.traffic.annual_aadt) + "," +
                 fmt_double(a.climate.annual_precipitation_mm) + "," +
                 fmt_double(a.climate.freeze_thaw_cycles) + "," + a.climate.freeze_flag + "," +
                 a.climate.moisture_flag;
            return s;
        }();

        // Merge observation rows and maintenance events by date; an event on
        // an observation date shares that row.
        std::size_t e = 0;
        auto event_cells = [&](const MaintenanceEvent& ev) {
            std::string s = "," + domain::kind_name(ev.kind) + ",";
            if (ev.thickness_mm > 0.0) s += fmt_double(ev.thickness_mm);
            s += "," + ev.material;
            return s;
        };
        for (std::size_t i = 0; i < seg.iri.observations.size(); ++i) {
            const double date = seg.iri.observations[i].date_years;
            while (e < seg.events.size() && seg.events[e].date_years < date) {
                out << seg.id << "," << format_date(seg.events[e].date_years) << ",,"
                    << static_cells << event_cells(seg.events[e]) << "\n";
                ++e;
            }
            out << seg.id << "," << format_date(date) << ",";
            const double iri = seg.iri.observations[i].value;
            const double rd = i < seg.rd.observations.size() ? seg.rd.observations[i].value : kNaN;
            if (!std::isnan(iri)) out << fmt_double(iri);
            out << ",";
            if (!std::isnan(rd)) out << fmt_double(rd);
            out << static_cells;
            if (e < seg.events.size() && seg.events[e].date_years == date) {
                out << event_cells(seg.events[e]);
                ++e;
            } else {
                out << ",,,";
            }
            out << "\n";
        }
        for (; e < seg.events.size(); ++e) {
            out << seg.id << "," << format_date(seg.events[e].date_years) << ",,"
                << static_cells << event_cells(seg.events[e]) << "\n";
        }
    }
}

// ---------------------------------------------------------------------------
// Training pairs
// ---------------------------------------------------------------------------

const std::vector<std::string>& surrogate_input_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        const domain::CodeBook codes = domain::CodeBook::defaults();
        const struct {
            const char* layer;
            const char* type_field;
        } rows[4] = {{"surface", "surface_type"},
                     {"binder", "binder_type"},
                     {"base", "base_type"},
                     {"subbase", "subbase_type"}};
        for (const auto& r : rows) {
            for (const std::string& code : codes.vocabulary(r.type_field)) {
                n.push_back(std::string(r.layer) + "_type_" + code);
            }
            n.push_back(std::string(r.layer) + "_thickness_mm");
            n.push_back(std::string(r.layer) + "_material_idx");
        }
        for (const char* t : {"truck_ratio", "annual_esal", "annual_aadt", "log1p_annual_esal",
                              "log1p_annual_aadt", "trucks_per_day"}) {
            n.push_back(t);
        }
        for (const char* w : {"precip_mm", "freeze_thaw_cycles", "freeze_flag", "moisture_flag"}) {
            n.push_back(w);
        }
        n.push_back("initial_indicator");
        n.push_back("interval_years");
        n.push_back("maint_kind");
        n.push_back("maint_thickness_mm");
        n.push_back("maint_material_idx");
        n.push_back("maint_date_years");
        return n;
    }();
    return names;
}

VectorXd surrogate_input(const domain::SegmentState& attributes, const domain::CodeBook& codes,
                         double initial_indicator, double interval_years,
                         const std::optional<MaintenanceEvent>& maintenance) {
    if (!(interval_years > 0.0)) {
        throw ValidationError("surrogate_input: interval must be positive");
    }
    VectorXd v = VectorXd::Zero(kSurrogateInputCount);
    int k = 0;

    const struct {
        const domain::LayerSpec* layer;
        const char* type_field;
        const char* material_field;
    } rows[4] = {{&attributes.structure.surface, "surface_type", "surface_material"},
                 {&attributes.structure.binder, "binder_type", "binder_material"},
                 {&attributes.structure.base, "base_type", "base_material"},
                 {&attributes.structure.subbase, "subbase_type", "subbase_material"}};
    for (const auto& r : rows) {
        const auto& vocab = codes.vocabulary(r.type_field);
        if (vocab.size() != 4) {
            throw ConfigError(std::string("surrogate_input: field ") + r.type_field +
                              " must have exactly 4 codes for the fixed input layout");
        }
        v[k + codes.index_of(r.type_field, r.layer->type)] = 1.0;
        k += 4;
        v[k++] = r.layer->thickness_mm;
        v[k++] = codes.index_of(r.material_field, r.layer->material);
    }

    const domain::TrafficProfile& t = attributes.traffic;
    v[k++] = t.truck_ratio;
    v[k++] = t.annual_esal;
    v[k++] = t.annual_aadt;
    v[k++] = std::log1p(t.annual_esal);
    v[k++] = std::log1p(t.annual_aadt);
    v[k++] = t.truck_ratio * t.annual_aadt;

    const domain::ClimateProfile& c = attributes.climate;
    v[k++] = c.annual_precipitation_mm;
    v[k++] = c.freeze_thaw_cycles;
    v[k++] = codes.index_of("freeze_flag", c.freeze_flag);
    v[k++] = codes.index_of("moisture_flag", c.moisture_flag);

    v[k++] = initial_indicator;
    v[k++] = interval_years;

    if (maintenance && maintenance->kind != domain::ActionKind::DoNothing) {
        v[k++] = static_cast<double>(maintenance->kind);
        v[k++] = maintenance->thickness_mm;
        v[k++] = maintenance->material.empty()
                     ? 0.0
                     : codes.index_of("treatment_material", maintenance->material) + 1.0;
        v[k++] = maintenance->date_years;
    } else {
        k += 4;
    }
    return v;
}

std::vector<TrainingPair> build_training_pairs(const Dataset& dataset,
                                               const domain::CodeBook& codes, Indicator which,
                                               PairBuildReport* report) {
    std::vector<TrainingPair> pairs;
    for (const SegmentRecord& seg : dataset.segments) {
        const IndicatorSeries& series = which == Indicator::Iri ? seg.iri : seg.rd;
        if (series.observations.size() < 2) {
            if (report) report->skipped_segments.push_back(seg.id);
            continue;
        }
        for (std::size_t i = 0; i + 1 < series.observations.size(); ++i) {
            const Observation& o0 = series.observations[i];
            const Observation& o1 = series.observations[i + 1];
            if (std::isnan(o0.value) || std::isnan(o1.value)) {
                throw ValidationError("build_training_pairs: impute before building pairs (" +
                                      seg.id + ")");
            }
            // Latest event in (t0, t1]; an event exactly at t0 is already
            // reflected in the earlier observation.
            std::optional<MaintenanceEvent> maint;
            for (const MaintenanceEvent& e : seg.events) {
                if (e.date_years > o0.date_years && e.date_years <= o1.date_years) maint = e;
            }
            TrainingPair p;
            p.input = surrogate_input(seg.attributes, codes, o0.value,
                                      o1.date_years - o0.date_years, maint);
            p.target = o1.value;
            pairs.push_back(std::move(p));
        }
    }
    return pairs;
}

void save_training_pairs_csv(const std::vector<TrainingPair>& pairs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_training_pairs_csv: cannot open " + path);
    const auto& names = surrogate_input_names();
    for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
    out << ",target\n";
    for (const TrainingPair& p : pairs) {
        for (int i = 0; i < kSurrogateInputCount; ++i) {
            out << (i ? "," : "") << fmt_double(p.input[i]);
        }
        out << "," << fmt_double(p.target) << "\n";
    }
}

std::vector<TrainingPair> load_training_pairs_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_training_pairs_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("training pairs: empty file");
    const std::vector<std::string> header = split_csv(line);
    const auto& names = surrogate_input_names();
    if (header.size() != names.size() + 1) {
        throw SchemaError("training pairs: expected " + std::to_string(names.size() + 1) +
                          " columns, found " + std::to_string(header.size()));
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (header[i] != names[i]) {
            throw SchemaError("training pairs: column " + std::to_string(i) + " is '" +
                              header[i] + "', expected '" + names[i] + "'");
        }
    }
    if (header.back() != "target") throw SchemaError("training pairs: last column must be target");

    std::vector<TrainingPair> pairs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_csv(line);
        if (cells.size() != names.size() + 1) {
            throw SchemaError("training pairs: wrong cell count on line " +
                              std::to_string(line_no));
        }
        TrainingPair p;
        p.input.resize(kSurrogateInputCount);
        for (int i = 0; i < kSurrogateInputCount; ++i) {
            p.input[i] = parse_double(cells[static_cast<std::size_t>(i)], "training pair input");
        }
        p.target = parse_double(cells.back(), "training pair target");
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace paverl::dataprep
