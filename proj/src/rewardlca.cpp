#include "paverl/rewardlca.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace paverl::rewardlca {

namespace {

const std::array<std::string, kPollutantCount> kPollutantNames = {
    "so2", "co2", "nox", "pm2_5", "co", "ch4", "n2o"};

nlohmann::json masses_to_json(const PollutantMasses& m) {
    nlohmann::json j = nlohmann::json::object();
    for (int p = 0; p < kPollutantCount; ++p) {
        j[kPollutantNames[static_cast<std::size_t>(p)] + "_kg"] =
            m[static_cast<std::size_t>(p)];
    }
    return j;
}

PollutantMasses masses_from_json(const nlohmann::json& j) {
    PollutantMasses m{};
    for (int p = 0; p < kPollutantCount; ++p) {
        m[static_cast<std::size_t>(p)] =
            j.value(kPollutantNames[static_cast<std::size_t>(p)] + "_kg", 0.0);
    }
    return m;
}

}  // namespace

const std::string& pollutant_name(Pollutant p) {
    return kPollutantNames[static_cast<std::size_t>(p)];
}

Pollutant pollutant_from_name(const std::string& name) {
    for (int p = 0; p < kPollutantCount; ++p) {
        if (kPollutantNames[static_cast<std::size_t>(p)] == name) {
            return static_cast<Pollutant>(p);
        }
    }
    throw ValidationError("unknown pollutant '" + name + "'");
}

PollutantMasses EmissionsInventory::total() const {
    PollutantMasses t{};
    for (int p = 0; p < kPollutantCount; ++p) {
        const auto i = static_cast<std::size_t>(p);
        t[i] = production[i] + transportation[i] + construction[i];
    }
    return t;
}

EmissionsInventory EmissionsInventory::operator+(const EmissionsInventory& other) const {
    EmissionsInventory s;
    for (int p = 0; p < kPollutantCount; ++p) {
        const auto i = static_cast<std::size_t>(p);
        s.production[i] = production[i] + other.production[i];
        s.transportation[i] = transportation[i] + other.transportation[i];
        s.construction[i] = construction[i] + other.construction[i];
    }
    return s;
}

GwpTable GwpTable::defaults() {
    GwpTable t;
    t.factor[static_cast<std::size_t>(Pollutant::Co2)] = 1.0;
    t.factor[static_cast<std::size_t>(Pollutant::Co)] = 3.0;
    t.factor[static_cast<std::size_t>(Pollutant::Ch4)] = 21.0;
    t.factor[static_cast<std::size_t>(Pollutant::N2o)] = 310.0;
    return t;
}

double gwp_co2e(const EmissionsInventory& e, const GwpTable& gwp) {
    const PollutantMasses total = e.total();
    double kg_co2e = 0.0;
    for (int p = 0; p < kPollutantCount; ++p) {
        const auto i = static_cast<std::size_t>(p);
        if (e.production[i] < 0.0 || e.transportation[i] < 0.0 || e.construction[i] < 0.0) {
            throw ValidationError("gwp_co2e: negative mass for " +
                                  kPollutantNames[i]);
        }
        kg_co2e += total[i] * gwp.factor[i];
    }
    return kg_co2e / 1000.0;
}

// ---------------------------------------------------------------------------
// Cost catalog
// ---------------------------------------------------------------------------

const ActionCost& CostCatalog::at(int action_id) const {
    const auto it = by_action_id.find(action_id);
    if (it == by_action_id.end()) {
        throw ConfigError("cost catalog has no entry for action id " +
                          std::to_string(action_id));
    }
    return it->second;
}

CostCatalog load_cost_catalog(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_cost_catalog: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("load_cost_catalog: invalid JSON: ") + e.what());
    }

    CostCatalog cat;
    for (const auto& je : j.at("entries")) {
        const int id = je.at("action_id").get<int>();
        if (cat.by_action_id.count(id)) {
            throw ConfigError("cost catalog: duplicate action id " + std::to_string(id));
        }
        ActionCost c;
        c.economic_cost = je.at("economic_cost").get<double>();
        if (c.economic_cost < 0.0) {
            throw ConfigError("cost catalog: negative cost for action id " + std::to_string(id));
        }
        if (je.count("emissions")) {
            const auto& em = je.at("emissions");
            c.emissions.production = masses_from_json(em.value("production", nlohmann::json::object()));
            c.emissions.transportation =
                masses_from_json(em.value("transportation", nlohmann::json::object()));
            c.emissions.construction =
                masses_from_json(em.value("construction", nlohmann::json::object()));
        }
        for (const PollutantMasses* m :
             {&c.emissions.production, &c.emissions.transportation, &c.emissions.construction}) {
            for (double kg : *m) {
                if (kg < 0.0) {
                    throw ConfigError("cost catalog: negative emission mass for action id " +
                                      std::to_string(id));
                }
            }
        }
        cat.by_action_id.emplace(id, std::move(c));
    }

    if (cat.by_action_id.count(0)) {
        const ActionCost& dn = cat.by_action_id.at(0);
        bool zero = dn.economic_cost == 0.0;
        for (double kg : dn.emissions.total()) zero = zero && kg == 0.0;
        if (!zero) throw ConfigError("cost catalog: do-nothing (id 0) must be zero-cost");
    }
    return cat;
}

void save_cost_catalog(const CostCatalog& catalog, const std::string& path,
                       const std::string& note) {
    nlohmann::json j;
    j["format"] = "paverl-cost-catalog";
    j["format_version"] = 1;
    if (!note.empty()) j["note"] = note;
    j["entries"] = nlohmann::json::array();
    for (const auto& [id, c] : catalog.by_action_id) {
        nlohmann::json je;
        je["action_id"] = id;
        je["economic_cost"] = c.economic_cost;
        je["emissions"] = {{"production", masses_to_json(c.emissions.production)},
                           {"transportation", masses_to_json(c.emissions.transportation)},
                           {"construction", masses_to_json(c.emissions.construction)}};
        j["entries"].push_back(std::move(je));
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("save_cost_catalog: cannot open " + path);
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Reward configuration
// ---------------------------------------------------------------------------

void validate(const RewardConfig& cfg) {
    if (cfg.weight_iri < 0.0 || cfg.weight_rd < 0.0 ||
        std::fabs(cfg.weight_iri + cfg.weight_rd - 1.0) > 1e-9) {
        throw ConfigError("reward config: indicator weights must be non-negative and sum to 1");
    }
    if (!(cfg.discount_base >= 1.0)) {
        throw ConfigError("reward config: discount base must be >= 1");
    }
    if (cfg.carbon_price < 0.0) throw ConfigError("reward config: carbon price must be >= 0");
    if (!(cfg.iri_range.max > cfg.iri_range.min) || !(cfg.rd_range.max > cfg.rd_range.min)) {
        throw ConfigError("reward config: indicator range must have max > min");
    }
}

RewardConfig load_reward_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_reward_config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("load_reward_config: invalid JSON: ") + e.what());
    }
    RewardConfig cfg;
    cfg.weight_iri = j.value("weight_iri", cfg.weight_iri);
    cfg.weight_rd = j.value("weight_rd", cfg.weight_rd);
    cfg.discount_base = j.value("discount_base", cfg.discount_base);
    cfg.carbon_price = j.value("carbon_price", cfg.carbon_price);
    if (j.count("iri_range")) {
        cfg.iri_range.min = j["iri_range"].value("min", cfg.iri_range.min);
        cfg.iri_range.max = j["iri_range"].value("max", cfg.iri_range.max);
    }
    if (j.count("rd_range")) {
        cfg.rd_range.min = j["rd_range"].value("min", cfg.rd_range.min);
        cfg.rd_range.max = j["rd_range"].value("max", cfg.rd_range.max);
    }
    if (j.count("gwp_kg_co2e_per_kg")) {
        for (int p = 0; p < kPollutantCount; ++p) {
            const auto i = static_cast<std::size_t>(p);
            cfg.gwp.factor[i] = j["gwp_kg_co2e_per_kg"].value(kPollutantNames[i], cfg.gwp.factor[i]);
        }
    }
    validate(cfg);
    return cfg;
}

void save_reward_config(const RewardConfig& cfg, const std::string& path) {
    nlohmann::json j;
    j["format"] = "paverl-reward-config";
    j["format_version"] = 1;
    j["weight_iri"] = cfg.weight_iri;
    j["weight_rd"] = cfg.weight_rd;
    j["discount_base"] = cfg.discount_base;
    j["carbon_price"] = cfg.carbon_price;
    j["iri_range"] = {{"min", cfg.iri_range.min}, {"max", cfg.iri_range.max}};
    j["rd_range"] = {{"min", cfg.rd_range.min}, {"max", cfg.rd_range.max}};
    nlohmann::json g = nlohmann::json::object();
    for (int p = 0; p < kPollutantCount; ++p) {
        const auto i = static_cast<std::size_t>(p);
        g[kPollutantNames[i]] = cfg.gwp.factor[i];
    }
    j["gwp_kg_co2e_per_kg"] = g;
    std::ofstream out(path);
    if (!out) throw ConfigError("save_reward_config: cannot open " + path);
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Per-step quantities
// ---------------------------------------------------------------------------

double env_cost(const domain::MaintenanceAction& a, const CostCatalog& catalog,
                double carbon_price, const GwpTable& gwp) {
    return gwp_co2e(catalog.at(a.id).emissions, gwp) * carbon_price;
}

double discounted_step_cost(const domain::MaintenanceAction& a, const CostCatalog& catalog,
                            const RewardConfig& cfg, int t) {
    if (t < 0) throw ValidationError("discounted_step_cost: negative step index");
    const double undiscounted =
        catalog.at(a.id).economic_cost + env_cost(a, catalog, cfg.carbon_price, cfg.gwp);
    // Repeated division: consecutive-year costs then differ by exactly one
    // IEEE division by the base (no libm pow, which varies across platforms).
    double c = undiscounted;
    for (int k = 0; k < t; ++k) c /= cfg.discount_base;
    return c;
}

double step_area(double baseline_v0, double baseline_v1, double actual_v0, double actual_v1,
                 const IndicatorRange& range) {
    if (!(range.max > range.min)) throw ConfigError("step_area: degenerate indicator range");
    const double trapezoid = ((baseline_v0 - actual_v0) + (baseline_v1 - actual_v1)) / 2.0;
    return trapezoid / (range.max - range.min);
}

// ---------------------------------------------------------------------------
// Reward ledger
// ---------------------------------------------------------------------------

RewardLedger::RewardLedger(RewardConfig cfg) : config_(std::move(cfg)) {
    validate(config_);
}

double RewardLedger::eff_cost_iri() const {
    return total_cost_ != 0.0 ? total_area_iri_ / total_cost_ : 0.0;
}

double RewardLedger::eff_cost_rd() const {
    return total_cost_ != 0.0 ? total_area_rd_ / total_cost_ : 0.0;
}

double RewardLedger::final_effcost() const {
    return config_.weight_iri * eff_cost_iri() + config_.weight_rd * eff_cost_rd();
}

double RewardLedger::update(double area_iri, double area_rd, const domain::MaintenanceAction& a,
                            const CostCatalog& catalog, int t) {
    if (t != next_step()) {
        throw SequencingError("ledger update for step " + std::to_string(t) + ", expected " +
                              std::to_string(next_step()));
    }
    const double before = final_effcost();
    total_area_iri_ += area_iri;
    total_area_rd_ += area_rd;
    total_cost_ += discounted_step_cost(a, catalog, config_, t);
    const double after = final_effcost();

    StepRecord rec;
    rec.t = t;
    rec.action_id = a.id;
    rec.area_iri = area_iri;
    rec.area_rd = area_rd;
    rec.discounted_cost = discounted_step_cost(a, catalog, config_, t);
    rec.effcost = after;
    rec.reward = after - before;
    history_.push_back(rec);
    return rec.reward;
}

void RewardLedger::dump_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("ledger dump: cannot open " + path);
    out << "step,action_id,area_iri,area_rd,discounted_cost,effcost,reward\n";
    for (const StepRecord& r : history_) {
        out << r.t << "," << r.action_id << "," << fmt_double(r.area_iri) << ","
            << fmt_double(r.area_rd) << "," << fmt_double(r.discounted_cost) << ","
            << fmt_double(r.effcost) << "," << fmt_double(r.reward) << "\n";
    }
}

std::string RewardLedger::to_json_string() const {
    nlohmann::json j;
    j["weight_iri"] = config_.weight_iri;
    j["weight_rd"] = config_.weight_rd;
    j["discount_base"] = config_.discount_base;
    j["carbon_price"] = config_.carbon_price;
    j["iri_range"] = {{"min", config_.iri_range.min}, {"max", config_.iri_range.max}};
    j["rd_range"] = {{"min", config_.rd_range.min}, {"max", config_.rd_range.max}};
    nlohmann::json g = nlohmann::json::object();
    for (int p = 0; p < kPollutantCount; ++p) {
        const auto i = static_cast<std::size_t>(p);
        g[kPollutantNames[i]] = config_.gwp.factor[i];
    }
    j["gwp_kg_co2e_per_kg"] = g;

    // Totals in hex so resume is bit-exact.
    j["total_area_iri_hex"] = doubles_to_hex(&total_area_iri_, 1);
    j["total_area_rd_hex"] = doubles_to_hex(&total_area_rd_, 1);
    j["total_cost_hex"] = doubles_to_hex(&total_cost_, 1);
    j["history"] = nlohmann::json::array();
    for (const StepRecord& r : history_) {
        const double vals[5] = {r.area_iri, r.area_rd, r.discounted_cost, r.effcost, r.reward};
        j["history"].push_back(
            {{"t", r.t}, {"action_id", r.action_id}, {"vals_hex", doubles_to_hex(vals, 5)}});
    }
    return j.dump();
}

RewardLedger RewardLedger::from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("ledger restore: invalid JSON: ") + e.what());
    }
    RewardConfig cfg;
    cfg.weight_iri = j.at("weight_iri").get<double>();
    cfg.weight_rd = j.at("weight_rd").get<double>();
    cfg.discount_base = j.at("discount_base").get<double>();
    cfg.carbon_price = j.at("carbon_price").get<double>();
    cfg.iri_range = {j.at("iri_range").at("min").get<double>(),
                     j.at("iri_range").at("max").get<double>()};
    cfg.rd_range = {j.at("rd_range").at("min").get<double>(),
                    j.at("rd_range").at("max").get<double>()};
    for (int p = 0; p < kPollutantCount; ++p) {
        const auto i = static_cast<std::size_t>(p);
        cfg.gwp.factor[i] = j.at("gwp_kg_co2e_per_kg").value(kPollutantNames[i], 0.0);
    }
    RewardLedger ledger(cfg);
    ledger.total_area_iri_ = hex_to_doubles(j.at("total_area_iri_hex").get<std::string>()).at(0);
    ledger.total_area_rd_ = hex_to_doubles(j.at("total_area_rd_hex").get<std::string>()).at(0);
    ledger.total_cost_ = hex_to_doubles(j.at("total_cost_hex").get<std::string>()).at(0);
    for (const auto& jr : j.at("history")) {
        StepRecord r;
        r.t = jr.at("t").get<int>();
        r.action_id = jr.at("action_id").get<int>();
        const std::vector<double> vals = hex_to_doubles(jr.at("vals_hex").get<std::string>());
        if (vals.size() != 5) throw ConfigError("ledger restore: corrupt history record");
        r.area_iri = vals[0];
        r.area_rd = vals[1];
        r.discounted_cost = vals[2];
        r.effcost = vals[3];
        r.reward = vals[4];
        ledger.history_.push_back(r);
    }
    return ledger;
}

double reward(const RewardLedger& prev, const RewardLedger& next) {
    return next.final_effcost() - prev.final_effcost();
}

}  // namespace paverl::rewardlca
