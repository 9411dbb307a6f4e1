#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "paverl/rewardlca.hpp"

using namespace paverl;
using namespace paverl::rewardlca;

namespace {

EmissionsInventory single_pollutant(Pollutant p, double kg) {
    EmissionsInventory e;
    e.production[static_cast<std::size_t>(p)] = kg;
    return e;
}

CostCatalog two_action_catalog() {
    CostCatalog cat;
    cat.by_action_id[0] = ActionCost{};  // do-nothing: all zero
    ActionCost paved;
    paved.economic_cost = 1000.0;
    paved.emissions.production[static_cast<std::size_t>(Pollutant::Co2)] = 10000.0;  // 10 t
    cat.by_action_id[1] = paved;
    return cat;
}

domain::MaintenanceAction action_id(int id) {
    domain::MaintenanceAction a;
    a.id = id;
    return a;
}

}  // namespace

TEST_CASE("gwp factors are the published constants") {
    const GwpTable gwp = GwpTable::defaults();
    CHECK(gwp.factor[static_cast<std::size_t>(Pollutant::Co2)] == 1.0);
    CHECK(gwp.factor[static_cast<std::size_t>(Pollutant::Co)] == 3.0);
    CHECK(gwp.factor[static_cast<std::size_t>(Pollutant::Ch4)] == 21.0);
    CHECK(gwp.factor[static_cast<std::size_t>(Pollutant::N2o)] == 310.0);
    CHECK(gwp.factor[static_cast<std::size_t>(Pollutant::So2)] == 0.0);
    CHECK(gwp.factor[static_cast<std::size_t>(Pollutant::Nox)] == 0.0);
    CHECK(gwp.factor[static_cast<std::size_t>(Pollutant::Pm25)] == 0.0);
}

TEST_CASE("gwp_co2e converts kilograms to CO2e metric tons") {
    CHECK(gwp_co2e(single_pollutant(Pollutant::Ch4, 1000.0)) == 21.0);
    CHECK(gwp_co2e(single_pollutant(Pollutant::N2o, 1000.0)) == 310.0);
    CHECK(gwp_co2e(single_pollutant(Pollutant::So2, 500.0)) == 0.0);
    CHECK_THROWS_AS(gwp_co2e(single_pollutant(Pollutant::Co2, -1.0)), ValidationError);
}

TEST_CASE("gwp_co2e is linear and sums all three stages") {
    EmissionsInventory a = single_pollutant(Pollutant::Co2, 500.0);
    EmissionsInventory b;
    b.construction[static_cast<std::size_t>(Pollutant::Ch4)] = 100.0;
    CHECK(gwp_co2e(a + b) == doctest::Approx(gwp_co2e(a) + gwp_co2e(b)).epsilon(1e-15));
    CHECK(gwp_co2e(a + b) == doctest::Approx(0.5 + 2.1).epsilon(1e-12));
}

TEST_CASE("pollutant names round-trip") {
    for (int i = 0; i < kPollutantCount; ++i) {
        const auto p = static_cast<Pollutant>(i);
        CHECK(pollutant_from_name(pollutant_name(p)) == p);
    }
    CHECK_THROWS_AS(pollutant_from_name("unobtanium"), ValidationError);
}

TEST_CASE("env_cost prices CO2e at the marginal carbon cost") {
    const CostCatalog cat = two_action_catalog();
    CHECK(env_cost(action_id(0), cat, 50.0) == 0.0);
    CHECK(env_cost(action_id(1), cat, 50.0) == doctest::Approx(10.0 * 50.0).epsilon(1e-12));
    CHECK(env_cost(action_id(1), cat, 0.0) == 0.0);  // pure-LCCA mode
    // Scaling the carbon price scales the cost exactly.
    CHECK(env_cost(action_id(1), cat, 100.0) == 2.0 * env_cost(action_id(1), cat, 50.0));
    CHECK_THROWS_AS(env_cost(action_id(9), cat, 50.0), ConfigError);
}

TEST_CASE("discounted cost divides by the base once per year") {
    const CostCatalog cat = two_action_catalog();
    RewardConfig cfg;
    const double total = 1000.0 + 10.0 * cfg.carbon_price;
    CHECK(discounted_step_cost(action_id(1), cat, cfg, 0) == total);
    CHECK(discounted_step_cost(action_id(1), cat, cfg, 2) ==
          doctest::Approx(total / 1.0816).epsilon(1e-12));
    CHECK(discounted_step_cost(action_id(0), cat, cfg, 7) == 0.0);
    CHECK_THROWS_AS(discounted_step_cost(action_id(1), cat, cfg, -1), ValidationError);

    // The consecutive-year ratio is one exact IEEE division by the base.
    for (int t = 0; t < 19; ++t) {
        const double a = discounted_step_cost(action_id(1), cat, cfg, t);
        const double b = discounted_step_cost(action_id(1), cat, cfg, t + 1);
        CHECK(b == a / cfg.discount_base);
    }
}

TEST_CASE("step_area is the range-normalized trapezoid of the benefit") {
    const IndicatorRange unit{0.0, 1.0};
    CHECK(step_area(1.0, 1.2, 1.0, 0.8, unit) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(step_area(1.0, 1.2, 1.0, 1.2, unit) == 0.0);
    CHECK(step_area(1.2, 1.4, 0.8, 1.0, unit) == doctest::Approx(0.4).epsilon(1e-15));
    // Worse-than-baseline trajectories go negative, not clamped.
    CHECK(step_area(1.0, 1.1, 1.2, 1.3, unit) == doctest::Approx(-0.2).epsilon(1e-12));
    // Range normalization divides by the width.
    const IndicatorRange wide{0.0, 4.0};
    CHECK(step_area(1.0, 1.2, 1.0, 0.8, wide) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK_THROWS_AS(step_area(1.0, 1.0, 1.0, 1.0, IndicatorRange{2.0, 2.0}), ConfigError);
}

TEST_CASE("reward config validation pins the weights and discount") {
    RewardConfig cfg;
    CHECK_NOTHROW(validate(cfg));
    CHECK(cfg.weight_iri == 0.55);
    CHECK(cfg.weight_rd == 0.45);
    CHECK(cfg.discount_base == 1.04);

    RewardConfig bad = cfg;
    bad.weight_iri = 0.7;  // weights no longer sum to 1
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = cfg;
    bad.discount_base = 0.99;
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = cfg;
    bad.iri_range = {3.0, 3.0};
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = cfg;
    bad.carbon_price = -1.0;
    CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("reward config file round-trip") {
    RewardConfig cfg;
    cfg.carbon_price = 75.0;
    cfg.weight_iri = 0.6;
    cfg.weight_rd = 0.4;
    const std::string path = "/tmp/paverl_test_reward.json";
    save_reward_config(cfg, path);
    const RewardConfig back = load_reward_config(path);
    CHECK(back.carbon_price == 75.0);
    CHECK(back.weight_iri == 0.6);
    CHECK(back.discount_base == cfg.discount_base);
    std::remove(path.c_str());
}

TEST_CASE("cost catalog rejects a non-zero do-nothing entry") {
    CostCatalog cat = two_action_catalog();
    const std::string path = "/tmp/paverl_test_catalog.json";
    save_cost_catalog(cat, path);
    CHECK_NOTHROW(load_cost_catalog(path));

    cat.by_action_id[0].economic_cost = 5.0;
    save_cost_catalog(cat, path);
    CHECK_THROWS_AS(load_cost_catalog(path), ConfigError);
    std::remove(path.c_str());

    CHECK_THROWS_AS(two_action_catalog().at(99), ConfigError);
}

TEST_CASE("ledger accumulates areas and costs with strict step ordering") {
    const CostCatalog cat = two_action_catalog();
    RewardLedger ledger{RewardConfig{}};

    CHECK(ledger.next_step() == 0);
    ledger.update(0.2, 0.1, action_id(1), cat, 0);
    CHECK_THROWS_AS(ledger.update(0.1, 0.1, action_id(0), cat, 0), SequencingError);
    ledger.update(0.4, 0.2, action_id(0), cat, 1);

    CHECK(ledger.total_area_iri() == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(ledger.total_area_rd() == doctest::Approx(0.3).epsilon(1e-15));
    const double cost = 1000.0 + 10.0 * ledger.config().carbon_price;
    CHECK(ledger.total_cost() == doctest::Approx(cost).epsilon(1e-12));
    CHECK(ledger.eff_cost_iri() == doctest::Approx(0.6 / cost).epsilon(1e-12));
    CHECK(ledger.final_effcost() ==
          doctest::Approx(0.55 * 0.6 / cost + 0.45 * 0.3 / cost).epsilon(1e-12));
}

TEST_CASE("effcost is zero while nothing has been spent, sign-preserving otherwise") {
    const CostCatalog cat = two_action_catalog();
    RewardLedger ledger{RewardConfig{}};
    // Do-nothing steps cost nothing, so effcost pins at 0 even with areas.
    ledger.update(0.5, 0.5, action_id(0), cat, 0);
    CHECK(ledger.total_cost() == 0.0);
    CHECK(ledger.final_effcost() == 0.0);
    CHECK(ledger.history()[0].reward == 0.0);

    // Negative benefit with positive cost turns effcost negative.
    ledger.update(-1.0, -1.0, action_id(1), cat, 1);
    CHECK(ledger.final_effcost() < 0.0);
}

TEST_CASE("rewards telescope to the final signal") {
    const CostCatalog cat = two_action_catalog();
    RewardLedger ledger{RewardConfig{}};
    Rng rng(2024);
    double reward_sum = 0.0;
    for (int t = 0; t < 20; ++t) {
        const int id = rng.uniform() < 0.4 ? 1 : 0;
        reward_sum += ledger.update(rng.uniform(-0.1, 0.3), rng.uniform(-0.1, 0.3),
                                    action_id(id), cat, t);
    }
    CHECK(reward_sum == doctest::Approx(ledger.final_effcost()).epsilon(1e-9));
}

TEST_CASE("reward() is the effcost difference between consecutive ledgers") {
    const CostCatalog cat = two_action_catalog();
    RewardLedger prev{RewardConfig{}};
    prev.update(0.2, 0.1, action_id(1), cat, 0);
    RewardLedger next = prev;
    next.update(0.3, 0.2, action_id(0), cat, 1);
    CHECK(reward(prev, next) ==
          doctest::Approx(next.final_effcost() - prev.final_effcost()).epsilon(1e-15));
}

TEST_CASE("ledger JSON round-trip is bit-exact") {
    const CostCatalog cat = two_action_catalog();
    RewardLedger ledger{RewardConfig{}};
    ledger.update(1.0 / 3.0, 2.0 / 7.0, action_id(1), cat, 0);
    ledger.update(0.1, 0.2, action_id(0), cat, 1);

    const RewardLedger back = RewardLedger::from_json_string(ledger.to_json_string());
    CHECK(back.total_area_iri() == ledger.total_area_iri());
    CHECK(back.total_area_rd() == ledger.total_area_rd());
    CHECK(back.total_cost() == ledger.total_cost());
    CHECK(back.next_step() == ledger.next_step());
    REQUIRE(back.history().size() == 2);
    CHECK(back.history()[0].reward == ledger.history()[0].reward);
    CHECK(back.history()[1].effcost == ledger.history()[1].effcost);
    CHECK(back.config().weight_iri == ledger.config().weight_iri);
}

TEST_CASE("ledger CSV dump has one row per step") {
    const CostCatalog cat = two_action_catalog();
    RewardLedger ledger{RewardConfig{}};
    ledger.update(0.1, 0.1, action_id(1), cat, 0);
    ledger.update(0.2, 0.2, action_id(0), cat, 1);
    const std::string path = "/tmp/paverl_test_ledger.csv";
    ledger.dump_csv(path);
    std::ifstream in(path);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);  // header + 2 steps
    std::remove(path.c_str());
}
