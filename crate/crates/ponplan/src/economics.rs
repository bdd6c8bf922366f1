//! Monetary formulas: churned yearly revenue, discounting, NPV, migration
//! CAPEX deltas and both OPEX models.
//!
//! All functions are pure over an immutable [`ScenarioConfig`] and assume a
//! validated scenario; on raw configs they surface missing data as
//! [`EngineError`]s. Money is double-precision C.U. throughout.

use crate::error::EngineError;
use crate::model::{CostDataset, OpexModel, ScenarioConfig, SubscriberClass, Technology};

/// A signed net cash flow in a calendar year (inflow positive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CashFlow {
    pub year: i32,
    pub amount: f64,
}

/// Fixed cost of migrating between two technologies.
///
/// `total = kappa * civil_delta + upsilon * equip_delta`, where the civil
/// gate opens on an architecture change and the equipment gate on a data
/// rate change. Deltas are clamped at zero: migrating toward a cheaper
/// deployment never yields a credit.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrationCost {
    pub from_id: String,
    pub to_id: String,
    pub civil_delta: f64,
    pub equip_delta: f64,
    /// Architecture changed (civil-works gate).
    pub kappa: bool,
    /// Data rate changed (equipment gate).
    pub upsilon: bool,
    pub total: f64,
}

/// Connected subscribers of `class` in `year`: penetration fraction times
/// total class demand. Zero when the class is not served at `rate`.
fn connected_of_class(
    config: &ScenarioConfig,
    class: SubscriberClass,
    rate: u32,
    year: i32,
) -> Result<f64, EngineError> {
    let demand = config.demands.count(class);
    if demand == 0 {
        return Ok(0.0);
    }
    let fraction = config
        .curve
        .fraction(year)
        .ok_or(EngineError::CurveMissingYear { year })?;
    match config.tariffs.lookup(class, rate) {
        None => Err(EngineError::TariffMissing { class, rate }),
        Some(None) => Ok(0.0),
        Some(Some(_)) => Ok(fraction * demand as f64),
    }
}

/// Total connected subscribers across classes served at the given rate.
pub fn connected_subscribers(
    config: &ScenarioConfig,
    tech: &Technology,
    year: i32,
) -> Result<f64, EngineError> {
    let mut total = 0.0;
    for class in SubscriberClass::ALL {
        total += connected_of_class(config, class, tech.data_rate, year)?;
    }
    Ok(total)
}

/// Operator revenue in a single year for `tech`, given the churn outcome.
///
/// Per class: `(1 - c)^gamma * connected * ARPU`, except that ITS revenue
/// skips the churn factor while `churn.its_exempt` holds. Classes without
/// demand or not served at the offered rate contribute nothing.
pub fn yearly_revenue(
    config: &ScenarioConfig,
    tech: &Technology,
    year: i32,
    gamma: u8,
) -> Result<f64, EngineError> {
    let mut total = 0.0;
    for class in SubscriberClass::ALL {
        let demand = config.demands.count(class);
        if demand == 0 {
            continue;
        }
        let arpu = match config.tariffs.lookup(class, tech.data_rate) {
            None => {
                return Err(EngineError::TariffMissing {
                    class,
                    rate: tech.data_rate,
                })
            }
            Some(None) => continue,
            Some(Some(v)) => v,
        };
        let connected = connected_of_class(config, class, tech.data_rate, year)?;
        let churned = gamma == 1 && !(class == SubscriberClass::Its && config.churn.its_exempt);
        let factor = if churned {
            1.0 - config.churn.churn_rate
        } else {
            1.0
        };
        total += factor * connected * arpu;
    }
    Ok(total)
}

/// Discounts `amount` from `year` back to the start of the horizon:
/// `amount / (1 + d)^(year - t_start)`.
pub fn present_value(amount: f64, year: i32, config: &ScenarioConfig) -> f64 {
    let exponent = year - config.horizon.t_start;
    amount / (1.0 + config.discount_rate).powi(exponent)
}

/// Net present value of a series of cash flows; the empty series is 0.
pub fn npv(flows: &[CashFlow], config: &ScenarioConfig) -> f64 {
    flows
        .iter()
        .map(|flow| present_value(flow.amount, flow.year, config))
        .sum()
}

/// Fixed migration CAPEX between two distinct technologies.
///
/// Civil-works and equipment deltas are differences of the datasets'
/// absolute category totals, clamped at zero. Migrations from ADSL pay the
/// full target CAPEX since its record carries no reusable optical plant.
pub fn migration_capex(
    from: &Technology,
    to: &Technology,
    costs: &CostDataset,
) -> Result<MigrationCost, EngineError> {
    let from_record = costs
        .record(&from.id)
        .ok_or_else(|| EngineError::CostMissing {
            technology: from.id.clone(),
        })?;
    let to_record = costs
        .record(&to.id)
        .ok_or_else(|| EngineError::CostMissing {
            technology: to.id.clone(),
        })?;
    let civil_delta = (to_record.capex.civil_works - from_record.capex.civil_works).max(0.0);
    let equip_delta = (to_record.capex.equipment() - from_record.capex.equipment()).max(0.0);
    let kappa = from.architecture != to.architecture;
    let upsilon = from.data_rate != to.data_rate;
    let total = if kappa { civil_delta } else { 0.0 } + if upsilon { equip_delta } else { 0.0 };
    Ok(MigrationCost {
        from_id: from.id.clone(),
        to_id: to.id.clone(),
        civil_delta,
        equip_delta,
        kappa,
        upsilon,
        total,
    })
}

/// Yearly OPEX of `tech` in `year`.
///
/// ADSL always uses the flat per-subscriber figure. Otherwise the table
/// model sums the five categories per connected subscriber, and the
/// percentage model charges 0.1 x equipment CAPEX + 0.01 x civil works.
pub fn opex(tech: &Technology, year: i32, config: &ScenarioConfig) -> Result<f64, EngineError> {
    if tech.is_adsl() {
        let connected = connected_subscribers(config, tech, year)?;
        return Ok(config.costs.adsl_opex_per_subscriber * connected);
    }
    let record = config
        .costs
        .record(&tech.id)
        .ok_or_else(|| EngineError::CostMissing {
            technology: tech.id.clone(),
        })?;
    match config.costs.opex_model {
        OpexModel::Table => {
            let per_subscriber = record
                .opex
                .as_ref()
                .ok_or_else(|| EngineError::CostMissing {
                    technology: tech.id.clone(),
                })?
                .per_subscriber();
            let connected = connected_subscribers(config, tech, year)?;
            Ok(per_subscriber * connected)
        }
        OpexModel::Percentage => {
            Ok(0.1 * record.capex.equipment() + 0.01 * record.capex.civil_works)
        }
    }
}

/// Net operating flow of `tech` in `year`, discounted to the horizon start.
pub fn discounted_net_flow(
    tech: &Technology,
    year: i32,
    gamma: u8,
    config: &ScenarioConfig,
) -> Result<f64, EngineError> {
    let revenue = yearly_revenue(config, tech, year, gamma)?;
    let operating = opex(tech, year, config)?;
    Ok(present_value(revenue - operating, year, config))
}

/// Discounted net flows from `year` through the end of the life-cycle,
/// assuming no further churn occurs. This is the value a terminal search
/// node holds; a year past the life-cycle yields 0.
pub fn terminal_value(
    tech: &Technology,
    year: i32,
    config: &ScenarioConfig,
) -> Result<f64, EngineError> {
    let mut total = 0.0;
    for i in year..=config.horizon.lifecycle_end() {
        total += discounted_net_flow(tech, i, 0, config)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Architecture, CapexBreakdown, CostRecord, Family, OpexModel};
    use crate::testutil::{flat_config, tech, toy_like_config};

    const TOL: f64 = 1e-12;

    fn assert_close(actual: f64, expected: f64) {
        let scale = expected.abs().max(1.0);
        assert!(
            (actual - expected).abs() <= TOL * scale,
            "{actual} != {expected}"
        );
    }

    #[test]
    fn revenue_of_hundred_subscribers_at_100mbps() {
        let config = flat_config(100, 13.2);
        let t = tech("FTTB_XGPON_100", Architecture::FttB, Family::Xgpon, 100, 2);
        assert_close(yearly_revenue(&config, &t, 2018, 0).unwrap(), 1320.0);
        assert_close(yearly_revenue(&config, &t, 2018, 1).unwrap(), 1188.0);
    }

    #[test]
    fn zero_churn_rate_makes_revenue_gamma_independent() {
        let mut config = flat_config(100, 13.2);
        config.churn.churn_rate = 0.0;
        let t = tech("FTTB_XGPON_100", Architecture::FttB, Family::Xgpon, 100, 2);
        assert_eq!(
            yearly_revenue(&config, &t, 2018, 0).unwrap(),
            yearly_revenue(&config, &t, 2018, 1).unwrap()
        );
    }

    #[test]
    fn missing_tariff_is_an_error() {
        let mut config = flat_config(100, 13.2);
        config.tariffs.entries.clear();
        let t = tech("FTTB_XGPON_100", Architecture::FttB, Family::Xgpon, 100, 2);
        assert!(matches!(
            yearly_revenue(&config, &t, 2018, 0),
            Err(EngineError::TariffMissing { .. })
        ));
    }

    #[test]
    fn present_value_examples() {
        let config = toy_like_config();
        assert_close(present_value(110.0, 2019, &config), 100.0);
        assert_close(present_value(42.5, 2018, &config), 42.5);
        let mut flat = toy_like_config();
        flat.discount_rate = 0.0;
        assert_close(present_value(77.0, 2023, &flat), 77.0);
    }

    #[test]
    fn npv_examples() {
        let config = toy_like_config();
        assert_close(npv(&[], &config), 0.0);
        assert_close(
            npv(
                &[CashFlow {
                    year: 2018,
                    amount: 100.0,
                }],
                &config,
            ),
            100.0,
        );
        let flows = [
            CashFlow {
                year: 2019,
                amount: 110.0,
            },
            CashFlow {
                year: 2020,
                amount: 121.0,
            },
        ];
        assert_close(npv(&flows, &config), 200.0);
    }

    #[test]
    fn capex_gates_close_when_nothing_changes() {
        // Same architecture, same rate, different family: both gates shut.
        let config = toy_like_config();
        let mut costs = config.costs.clone();
        costs.records.insert(
            "FTTB_HPON_100".into(),
            CostRecord {
                capex: CapexBreakdown {
                    civil_works: 500.0,
                    central_office: 90.0,
                    ..Default::default()
                },
                ..Default::default()
            },
        );
        let a = tech("FTTB_XGPON_100", Architecture::FttB, Family::Xgpon, 100, 2);
        let b = tech("FTTB_HPON_100", Architecture::FttB, Family::Hpon, 100, 2);
        let cost = migration_capex(&a, &b, &costs).unwrap();
        assert!(!cost.kappa && !cost.upsilon);
        assert_eq!(cost.total, 0.0);
    }

    #[test]
    fn rate_upgrade_opens_only_the_equipment_gate() {
        let config = toy_like_config();
        let mut costs = config.costs.clone();
        costs.records.insert(
            "FTTB_HPON_50".into(),
            CostRecord {
                capex: CapexBreakdown {
                    civil_works: 190.0,
                    central_office: 40.0,
                    ..Default::default()
                },
                ..Default::default()
            },
        );
        costs.records.insert(
            "FTTB_HPON_100".into(),
            CostRecord {
                capex: CapexBreakdown {
                    civil_works: 190.0,
                    central_office: 100.0,
                    ..Default::default()
                },
                ..Default::default()
            },
        );
        let a = tech("FTTB_HPON_50", Architecture::FttB, Family::Hpon, 50, 2);
        let b = tech("FTTB_HPON_100", Architecture::FttB, Family::Hpon, 100, 2);
        let cost = migration_capex(&a, &b, &costs).unwrap();
        assert!(!cost.kappa && cost.upsilon);
        assert_close(cost.total, 60.0);
        assert_close(cost.equip_delta, 60.0);
    }

    #[test]
    fn adsl_migration_pays_full_target_capex() {
        let config = toy_like_config();
        let adsl = config.graph.technology("ADSL").unwrap().clone();
        let target = config.graph.technology("FTTB_XGPON_100").unwrap().clone();
        let cost = migration_capex(&adsl, &target, &config.costs).unwrap();
        let record = config.costs.record("FTTB_XGPON_100").unwrap();
        assert_close(cost.total, record.capex.total());
        assert!(cost.kappa && cost.upsilon);
    }

    #[test]
    fn missing_cost_record_is_an_error() {
        let config = toy_like_config();
        let a = config.graph.technology("ADSL").unwrap().clone();
        let ghost = tech("FTTH_HPON_100", Architecture::FttH, Family::Hpon, 100, 2);
        assert!(matches!(
            migration_capex(&a, &ghost, &config.costs),
            Err(EngineError::CostMissing { .. })
        ));
    }

    #[test]
    fn adsl_opex_is_flat_per_connected_subscriber() {
        let config = flat_config(1000, 3.6);
        let adsl = tech("ADSL", Architecture::Adsl, Family::Copper, 20, 1);
        assert_close(opex(&adsl, 2018, &config).unwrap(), 250.0);
    }

    #[test]
    fn percentage_opex_is_a_capex_fraction() {
        let mut config = toy_like_config();
        config.costs.opex_model = OpexModel::Percentage;
        config.costs.records.insert(
            "FTTB_XGPON_100".into(),
            CostRecord {
                capex: CapexBreakdown {
                    civil_works: 200.0,
                    central_office: 100.0,
                    ..Default::default()
                },
                ..Default::default()
            },
        );
        let t = tech("FTTB_XGPON_100", Architecture::FttB, Family::Xgpon, 100, 2);
        assert_close(opex(&t, 2018, &config).unwrap(), 12.0);
    }

    #[test]
    fn table_opex_scales_to_zero_with_no_subscribers() {
        let mut config = flat_config(100, 13.2);
        config.curve.values.insert(2018, 0.0);
        let t = config.graph.technology("FTTB_XGPON_100").unwrap().clone();
        assert_close(opex(&t, 2018, &config).unwrap(), 0.0);
    }

    #[test]
    fn terminal_value_of_final_year_is_one_discounted_term() {
        let mut config = flat_config(100, 13.2);
        config.horizon.t_nw = 5;
        for year in 2018..=2023 {
            config.curve.values.insert(year, 1.0);
        }
        let t = config.graph.technology("FTTB_XGPON_100").unwrap().clone();
        let last = config.horizon.lifecycle_end();
        let flow = yearly_revenue(&config, &t, last, 0).unwrap() - opex(&t, last, &config).unwrap();
        assert_close(
            terminal_value(&t, last, &config).unwrap(),
            flow / 1.1f64.powi(5),
        );
        assert_close(terminal_value(&t, last + 1, &config).unwrap(), 0.0);
    }
}
