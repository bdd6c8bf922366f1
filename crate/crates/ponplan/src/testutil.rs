//! Hand-built fixtures shared by the unit tests.

use std::collections::BTreeMap;

use crate::model::*;

pub fn tech(
    id: &str,
    architecture: Architecture,
    family: Family,
    rate: u32,
    stages: u8,
) -> Technology {
    Technology {
        id: id.to_owned(),
        architecture,
        family,
        data_rate: rate,
        stages,
    }
}

fn record(
    civil: f64,
    fiber: f64,
    co: f64,
    rn: f64,
    buildings: f64,
    opex: Option<[f64; 5]>,
) -> CostRecord {
    CostRecord {
        capex: CapexBreakdown {
            civil_works: civil,
            fiber,
            central_office: co,
            remote_nodes: rn,
            buildings,
        },
        opex: opex.map(|o| OpexBreakdown {
            rent: o[0],
            energy: o[1],
            fault_management: o[2],
            marketing: o[3],
            operations: o[4],
        }),
        provenance: None,
        assumed: false,
    }
}

/// Three-technology scenario shaped like the worked example: copper start,
/// a 25 Mbps stepping stone and a 100 Mbps goal, three-year window over a
/// five-year life-cycle.
pub fn toy_like_config() -> ScenarioConfig {
    let technologies = vec![
        tech("ADSL", Architecture::Adsl, Family::Copper, 20, 1),
        tech("FTTCab_GPON_25", Architecture::FttCab, Family::Gpon, 25, 1),
        tech("FTTB_XGPON_100", Architecture::FttB, Family::Xgpon, 100, 2),
    ];
    let edges = vec![
        ("ADSL".to_owned(), "FTTCab_GPON_25".to_owned()),
        ("ADSL".to_owned(), "FTTB_XGPON_100".to_owned()),
        ("FTTCab_GPON_25".to_owned(), "FTTB_XGPON_100".to_owned()),
    ];
    let mut tariffs = TariffTable::default();
    tariffs.set(SubscriberClass::Residential, 20, Some(3.6));
    tariffs.set(SubscriberClass::Residential, 25, Some(7.2));
    tariffs.set(SubscriberClass::Residential, 100, Some(13.2));

    let mut curve_values = BTreeMap::new();
    for (year, value) in [
        (2018, 0.02),
        (2019, 0.05),
        (2020, 0.10),
        (2021, 0.26),
        (2022, 0.43),
        (2023, 0.55),
    ] {
        curve_values.insert(year, value);
    }

    let mut records = BTreeMap::new();
    records.insert("ADSL".to_owned(), record(0.0, 0.0, 0.0, 0.0, 0.0, None));
    records.insert(
        "FTTCab_GPON_25".to_owned(),
        record(
            190.0,
            0.0,
            10.0,
            0.0,
            0.0,
            Some([0.3, 0.1, 0.05, 0.03, 0.02]),
        ),
    );
    records.insert(
        "FTTB_XGPON_100".to_owned(),
        record(
            190.0,
            0.0,
            60.0,
            20.0,
            50.0,
            Some([0.25, 0.27, 0.11, 0.03, 0.04]),
        ),
    );

    ScenarioConfig {
        start_technology: "ADSL".to_owned(),
        graph: MigrationGraph {
            technologies,
            edges,
        },
        tariffs,
        curve: PenetrationCurve {
            label: CurveLabel::Custom,
            values: curve_values,
        },
        demands: DemandProfile {
            label: DemandMix::PureResidential,
            counts: BTreeMap::from([(SubscriberClass::Residential, 60)]),
        },
        churn: ChurnModel {
            churn_rate: 0.10,
            churn_probability: 0.10,
            its_exempt: true,
        },
        costs: CostDataset {
            name: "test".to_owned(),
            units: CostUnits::Absolute,
            opex_model: OpexModel::Table,
            adsl_opex_per_subscriber: DEFAULT_ADSL_OPEX,
            records,
        },
        horizon: Horizon {
            t_start: 2018,
            t_mig: 3,
            t_nw: 5,
        },
        discount_rate: DEFAULT_DISCOUNT_RATE,
        goal: GoalPolicy::FlexibleFttx,
        goal_rate: DEFAULT_GOAL_RATE,
        strict_goal: false,
        enforce_family_rule: true,
        max_tree_nodes: DEFAULT_MAX_TREE_NODES,
    }
}

/// Scenario with full penetration from day one: `demand` residential
/// subscribers all connected, ARPU `arpu` at 100 Mbps.
pub fn flat_config(demand: u64, arpu: f64) -> ScenarioConfig {
    let mut config = toy_like_config();
    config
        .graph
        .technologies
        .retain(|t| t.id != "FTTCab_GPON_25");
    config.graph.edges = vec![("ADSL".to_owned(), "FTTB_XGPON_100".to_owned())];
    config.costs.records.remove("FTTCab_GPON_25");
    config.tariffs = TariffTable::default();
    config
        .tariffs
        .set(SubscriberClass::Residential, 20, Some(3.6));
    config
        .tariffs
        .set(SubscriberClass::Residential, 100, Some(arpu));
    config
        .demands
        .counts
        .insert(SubscriberClass::Residential, demand);
    config.horizon.t_nw = 20;
    config.curve.values = (2018..=2038).map(|y| (y, 1.0)).collect();
    config
}
