#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "paverl/common.hpp"
#include "paverl/domain.hpp"

// Reward engine: treatment benefit areas against the do-nothing curve,
// discounted economic plus carbon-priced environmental costs, and the
// weighted cost-effectiveness signal whose per-step delta is the reward.
namespace paverl::rewardlca {

// ---------------------------------------------------------------------------
// Emissions and global-warming potential
// ---------------------------------------------------------------------------

enum class Pollutant { So2 = 0, Co2, Nox, Pm25, Co, Ch4, N2o };
inline constexpr int kPollutantCount = 7;

const std::string& pollutant_name(Pollutant p);
Pollutant pollutant_from_name(const std::string& name);

// Masses in kg, indexed by Pollutant.
using PollutantMasses = std::array<double, kPollutantCount>;

// Life-cycle stages tracked separately; totals are always derived, so the
// stage breakdown and the total cannot drift apart.
struct EmissionsInventory {
    PollutantMasses production{};
    PollutantMasses transportation{};
    PollutantMasses construction{};

    PollutantMasses total() const;
    EmissionsInventory operator+(const EmissionsInventory& other) const;
};

// kg CO2-equivalent per kg of pollutant. Pollutants without an established
// factor (SO2, NOx, PM2.5) carry zero: they are tracked in inventories but do
// not enter the carbon price.
struct GwpTable {
    PollutantMasses factor{};
    static GwpTable defaults();  // CO2 1, CO 3, CH4 21, N2O 310, others 0
};

// Metric tons CO2-equivalent for a whole inventory. Throws ValidationError on
// any negative mass.
double gwp_co2e(const EmissionsInventory& e, const GwpTable& gwp = GwpTable::defaults());

// ---------------------------------------------------------------------------
// Cost catalog
// ---------------------------------------------------------------------------

struct ActionCost {
    double economic_cost = 0.0;  // currency per segment application
    EmissionsInventory emissions;
};

struct CostCatalog {
    std::map<int, ActionCost> by_action_id;
    // Throws ConfigError when the action is not in the catalog.
    const ActionCost& at(int action_id) const;
};

// JSON file: {"entries": [{"action_id", "economic_cost", "emissions":
// {"production": {"co2_kg": ...}, ...}}]}. Validates costs and masses >= 0
// and that the do-nothing entry (id 0) is all zero.
CostCatalog load_cost_catalog(const std::string& path);
void save_cost_catalog(const CostCatalog& catalog, const std::string& path,
                       const std::string& note = "");

// ---------------------------------------------------------------------------
// Reward configuration
// ---------------------------------------------------------------------------

struct IndicatorRange {
    double min = 0.0;
    double max = 1.0;
};

struct RewardConfig {
    double weight_iri = 0.55;
    double weight_rd = 0.45;
    double discount_base = 1.04;   // per-year divisor on costs
    double carbon_price = 50.0;    // currency per metric ton CO2e
    IndicatorRange iri_range{0.0, 6.0};   // m/km, for area normalization
    IndicatorRange rd_range{0.0, 25.0};   // mm
    GwpTable gwp = GwpTable::defaults();
};

// Throws ConfigError unless weights are non-negative and sum to 1 (1e-9),
// discount_base >= 1, carbon_price >= 0, and both ranges have max > min.
void validate(const RewardConfig& cfg);

RewardConfig load_reward_config(const std::string& path);
void save_reward_config(const RewardConfig& cfg, const std::string& path);

// ---------------------------------------------------------------------------
// Per-step quantities
// ---------------------------------------------------------------------------

// Carbon cost of one application: CO2e tons x carbon price.
double env_cost(const domain::MaintenanceAction& a, const CostCatalog& catalog,
                double carbon_price, const GwpTable& gwp = GwpTable::defaults());

// (economic + environmental) / discount_base^t, t in whole years from start.
double discounted_step_cost(const domain::MaintenanceAction& a, const CostCatalog& catalog,
                            const RewardConfig& cfg, int t);

// Trapezoid of (baseline - actual) over one year, normalized by the indicator
// range width so IRI and RD areas are commensurate. Negative when the actual
// curve is worse than doing nothing. Throws ConfigError on a degenerate range.
double step_area(double baseline_v0, double baseline_v1, double actual_v0, double actual_v1,
                 const IndicatorRange& range);

// ---------------------------------------------------------------------------
// Reward ledger
// ---------------------------------------------------------------------------

// Running totals for one trajectory. effcost_i = total_area_i / total_cost
// (0 while nothing has been spent); the scalar signal is
// weight_iri * effcost_iri + weight_rd * effcost_rd, and each step's reward
// is its increment, so rewards telescope to the final signal value.
class RewardLedger {
public:
    RewardLedger() = default;
    explicit RewardLedger(RewardConfig cfg);

    struct StepRecord {
        int t = 0;
        int action_id = 0;
        double area_iri = 0.0;
        double area_rd = 0.0;
        double discounted_cost = 0.0;
        double effcost = 0.0;  // final_effcost after this step
        double reward = 0.0;
    };

    // t must equal the next step index (throws SequencingError otherwise).
    // Returns the step reward.
    double update(double area_iri, double area_rd, const domain::MaintenanceAction& a,
                  const CostCatalog& catalog, int t);

    double total_area_iri() const { return total_area_iri_; }
    double total_area_rd() const { return total_area_rd_; }
    double total_cost() const { return total_cost_; }
    double eff_cost_iri() const;
    double eff_cost_rd() const;
    double final_effcost() const;
    int next_step() const { return static_cast<int>(history_.size()); }
    const std::vector<StepRecord>& history() const { return history_; }
    const RewardConfig& config() const { return config_; }

    void dump_csv(const std::string& path) const;

    // Bit-exact state round-trip for trajectory checkpoints.
    std::string to_json_string() const;
    static RewardLedger from_json_string(const std::string& text);

private:
    RewardConfig config_;
    double total_area_iri_ = 0.0;
    double total_area_rd_ = 0.0;
    double total_cost_ = 0.0;
    std::vector<StepRecord> history_;
};

// final_effcost(next) - final_effcost(prev).
double reward(const RewardLedger& prev, const RewardLedger& next);

}  // namespace paverl::rewardlca
