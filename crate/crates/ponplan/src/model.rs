//! Domain types for migration scenarios and their validation.
//!
//! Everything here is plain data: a [`ScenarioConfig`] can be built in any
//! state (including invalid ones) and [`validate_scenario`] reports every
//! broken invariant as a [`Violation`]. The search and economics modules
//! assume they are handed a validated scenario. All types are immutable in
//! practice once validated and can be shared freely across threads.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::EngineError;

/// Where the optical fiber terminates. `Adsl` stands for the legacy copper
/// starting point and is not a fiber architecture proper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "ADSL")]
    Adsl,
    #[serde(rename = "FTTCab")]
    FttCab,
    #[serde(rename = "FTTB")]
    FttB,
    #[serde(rename = "FTTH")]
    FttH,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Architecture::Adsl => "ADSL",
            Architecture::FttCab => "FTTCab",
            Architecture::FttB => "FTTB",
            Architecture::FttH => "FTTH",
        };
        f.write_str(s)
    }
}

/// Transmission technology family. GPON and XGPON need two-stage remote-node
/// deployments to reach 100 Mbps; UDWDM reaches it in a single stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Copper,
    #[serde(rename = "GPON")]
    Gpon,
    #[serde(rename = "XGPON")]
    Xgpon,
    #[serde(rename = "UDWDM")]
    Udwdm,
    #[serde(rename = "HPON")]
    Hpon,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Copper => "Copper",
            Family::Gpon => "GPON",
            Family::Xgpon => "XGPON",
            Family::Udwdm => "UDWDM",
            Family::Hpon => "HPON",
        };
        f.write_str(s)
    }
}

/// Subscriber demand classes. ITS base stations are public-infrastructure
/// customers that, once connected, are assumed never to churn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubscriberClass {
    Residential,
    Business,
    #[serde(rename = "ITS")]
    Its,
}

impl SubscriberClass {
    pub const ALL: [SubscriberClass; 3] = [
        SubscriberClass::Residential,
        SubscriberClass::Business,
        SubscriberClass::Its,
    ];
}

impl fmt::Display for SubscriberClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SubscriberClass::Residential => "Residential",
            SubscriberClass::Business => "Business",
            SubscriberClass::Its => "ITS",
        };
        f.write_str(s)
    }
}

/// Data rates a deployment can offer, in Mbps.
pub const SUPPORTED_RATES: [u32; 4] = [20, 25, 50, 100];

/// A deployable network state: architecture x family x offered data rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Technology {
    /// Unique id, `<architecture>_<family>_<rate>` (plain `ADSL` for copper).
    pub id: String,
    pub architecture: Architecture,
    pub family: Family,
    /// Offered data rate in Mbps, one of [`SUPPORTED_RATES`].
    pub data_rate: u32,
    /// Remote-node stages of the deployment (1 or 2).
    pub stages: u8,
}

impl Technology {
    pub fn is_adsl(&self) -> bool {
        self.architecture == Architecture::Adsl
    }

    /// The id the naming convention prescribes for this technology.
    pub fn canonical_id(&self) -> String {
        if self.is_adsl() {
            "ADSL".to_owned()
        } else {
            format!("{}_{}_{}", self.architecture, self.family, self.data_rate)
        }
    }
}

/// Directed graph of allowed technology transitions.
///
/// The engine treats any validated graph as authoritative; the shipped
/// datasets encode one concrete reconstruction of the allowed upgrades.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MigrationGraph {
    pub technologies: Vec<Technology>,
    /// Ordered (from_id, to_id) pairs.
    pub edges: Vec<(String, String)>,
}

impl MigrationGraph {
    pub fn technology(&self, id: &str) -> Option<&Technology> {
        self.technologies.iter().find(|t| t.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.technologies.iter().position(|t| t.id == id)
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.iter().any(|(f, t)| f == from && t == to)
    }

    /// Out-neighbors of `id`, sorted by target id for deterministic walks.
    pub fn out_neighbors(&self, id: &str) -> Vec<&Technology> {
        let mut out: Vec<&Technology> = self
            .edges
            .iter()
            .filter(|(f, _)| f == id)
            .filter_map(|(_, t)| self.technology(t))
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out.dedup_by(|a, b| a.id == b.id);
        out
    }

    /// Distinct data rates present in the graph.
    pub fn rates(&self) -> BTreeSet<u32> {
        self.technologies.iter().map(|t| t.data_rate).collect()
    }
}

/// Yearly ARPU per (subscriber class, data rate), in C.U. per year.
///
/// `None` marks a rate at which the class is not served at all (it then
/// contributes neither revenue nor a connected subscriber); an absent key is
/// a validation error. ARPU depends only on the rate, never on the concrete
/// technology offering it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TariffTable {
    pub entries: BTreeMap<SubscriberClass, BTreeMap<u32, Option<f64>>>,
}

impl TariffTable {
    /// Outer `None`: no entry at all. Inner `None`: class not served.
    pub fn lookup(&self, class: SubscriberClass, rate: u32) -> Option<Option<f64>> {
        self.entries.get(&class).and_then(|m| m.get(&rate)).copied()
    }

    pub fn set(&mut self, class: SubscriberClass, rate: u32, arpu: Option<f64>) {
        self.entries.entry(class).or_default().insert(rate, arpu);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveLabel {
    Conservative,
    Realistic,
    Aggressive,
    Custom,
}

impl fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CurveLabel::Conservative => "Conservative",
            CurveLabel::Realistic => "Realistic",
            CurveLabel::Aggressive => "Aggressive",
            CurveLabel::Custom => "Custom",
        };
        f.write_str(s)
    }
}

/// Fraction of each class's total demand connected to the network per year.
///
/// Joins accumulate, so the values must be non-decreasing; churn is a
/// separate revenue-side effect and never shrinks the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PenetrationCurve {
    pub label: CurveLabel,
    pub values: BTreeMap<i32, f64>,
}

impl PenetrationCurve {
    pub fn fraction(&self, year: i32) -> Option<f64> {
        self.values.get(&year).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DemandMix {
    PureResidential,
    Converged,
}

/// Total potential subscribers per class in the planning area.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    pub label: DemandMix,
    pub counts: BTreeMap<SubscriberClass, u64>,
}

impl DemandProfile {
    pub fn count(&self, class: SubscriberClass) -> u64 {
        self.counts.get(&class).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Yearly Bernoulli churn model.
///
/// `churn_rate` is the revenue fraction lost in a churn year; the churn
/// outcome itself occurs with `churn_probability` independently each year,
/// so Pr(no churn) is always `1 - churn_probability`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChurnModel {
    pub churn_rate: f64,
    pub churn_probability: f64,
    /// ITS base stations never churn once connected (default true).
    pub its_exempt: bool,
}

impl ChurnModel {
    pub fn probability_of(&self, gamma: u8) -> f64 {
        if gamma == 0 {
            1.0 - self.churn_probability
        } else {
            self.churn_probability
        }
    }
}

/// Whether per-technology CAPEX figures are absolute C.U. or C.U. per
/// subscriber passed (converted to absolute when a scenario is loaded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostUnits {
    Absolute,
    PerSubscriberPassed,
}

/// OPEX model the dataset declares; exactly one applies to a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpexModel {
    /// Per-subscriber category table, scaled by connected subscribers.
    Table,
    /// Fraction-of-CAPEX model: 0.1 x equipment CAPEX + 0.01 x civil works.
    Percentage,
}

/// CAPEX split into civil works and the four equipment categories.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CapexBreakdown {
    pub civil_works: f64,
    pub fiber: f64,
    pub central_office: f64,
    pub remote_nodes: f64,
    pub buildings: f64,
}

impl CapexBreakdown {
    /// Equipment CAPEX: everything except civil works.
    pub fn equipment(&self) -> f64 {
        self.fiber + self.central_office + self.remote_nodes + self.buildings
    }

    pub fn total(&self) -> f64 {
        self.civil_works + self.equipment()
    }

    pub fn scaled(&self, factor: f64) -> CapexBreakdown {
        CapexBreakdown {
            civil_works: self.civil_works * factor,
            fiber: self.fiber * factor,
            central_office: self.central_office * factor,
            remote_nodes: self.remote_nodes * factor,
            buildings: self.buildings * factor,
        }
    }

    pub fn categories(&self) -> [f64; 5] {
        [
            self.civil_works,
            self.fiber,
            self.central_office,
            self.remote_nodes,
            self.buildings,
        ]
    }
}

/// Yearly OPEX categories in C.U. per connected subscriber.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OpexBreakdown {
    pub rent: f64,
    pub energy: f64,
    pub fault_management: f64,
    pub marketing: f64,
    pub operations: f64,
}

impl OpexBreakdown {
    pub fn per_subscriber(&self) -> f64 {
        self.rent + self.energy + self.fault_management + self.marketing + self.operations
    }

    pub fn categories(&self) -> [f64; 5] {
        [
            self.rent,
            self.energy,
            self.fault_management,
            self.marketing,
            self.operations,
        ]
    }
}

/// Cost figures for one technology.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostRecord {
    pub capex: CapexBreakdown,
    /// Required in table OPEX mode for every non-ADSL technology.
    pub opex: Option<OpexBreakdown>,
    /// Source note: study of origin or "reconstructed".
    pub provenance: Option<String>,
    /// The record rests on assumed component costs rather than published
    /// ones.
    pub assumed: bool,
}

/// A named cost dataset covering every technology of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CostDataset {
    pub name: String,
    pub units: CostUnits,
    pub opex_model: OpexModel,
    /// Flat yearly OPEX per connected subscriber on the copper network.
    pub adsl_opex_per_subscriber: f64,
    pub records: BTreeMap<String, CostRecord>,
}

impl CostDataset {
    pub fn record(&self, tech_id: &str) -> Option<&CostRecord> {
        self.records.get(tech_id)
    }

    /// Converts per-subscriber-passed CAPEX to absolute C.U. by multiplying
    /// with the total demand count. A no-op for absolute datasets.
    pub fn into_absolute(mut self, total_demand: u64) -> CostDataset {
        if self.units == CostUnits::PerSubscriberPassed {
            let factor = total_demand as f64;
            for record in self.records.values_mut() {
                record.capex = record.capex.scaled(factor);
            }
            self.units = CostUnits::Absolute;
        }
        self
    }
}

/// Planning horizon in calendar years.
///
/// Decisions are taken during the migration window (`t_mig` years after
/// `t_start`); cash flows accumulate over the full life-cycle (`t_nw` years).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub t_start: i32,
    pub t_mig: u32,
    pub t_nw: u32,
}

impl Horizon {
    /// Last year in which a migration can land.
    pub fn window_end(&self) -> i32 {
        self.t_start + self.t_mig as i32
    }

    /// Last year of the network life-cycle.
    pub fn lifecycle_end(&self) -> i32 {
        self.t_start + self.t_nw as i32
    }
}

/// Migration goal policy: accept any architecture at the goal rate, or only
/// FTTH deployments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalPolicy {
    #[serde(rename = "FlexibleFTTx")]
    FlexibleFttx,
    #[serde(rename = "FixedFTTH")]
    FixedFtth,
}

impl fmt::Display for GoalPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GoalPolicy::FlexibleFttx => "FlexibleFTTx",
            GoalPolicy::FixedFtth => "FixedFTTH",
        };
        f.write_str(s)
    }
}

/// Resolved goal parameters used by the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalSpec {
    pub policy: GoalPolicy,
    pub rate: u32,
    /// Under `FixedFtth`, forbid entering non-FTTH technologies at or above
    /// the goal rate instead of treating them as legal waypoints.
    pub strict: bool,
}

impl GoalSpec {
    /// Whether reaching `tech` satisfies the goal and ends the search there.
    pub fn absorbs(&self, tech: &Technology) -> bool {
        tech.data_rate >= self.rate
            && (self.policy == GoalPolicy::FlexibleFttx || tech.architecture == Architecture::FttH)
    }

    /// Whether `tech` may be entered at all under this goal policy.
    pub fn admits(&self, tech: &Technology) -> bool {
        if self.strict && self.policy == GoalPolicy::FixedFtth {
            self.absorbs(tech) || tech.data_rate < self.rate
        } else {
            true
        }
    }
}

/// Full description of one migration planning problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub start_technology: String,
    pub graph: MigrationGraph,
    pub tariffs: TariffTable,
    pub curve: PenetrationCurve,
    pub demands: DemandProfile,
    pub churn: ChurnModel,
    /// Cost dataset with absolute CAPEX figures (loading converts
    /// per-subscriber datasets; see [`CostDataset::into_absolute`]).
    pub costs: CostDataset,
    pub horizon: Horizon,
    pub discount_rate: f64,
    pub goal: GoalPolicy,
    pub goal_rate: u32,
    /// Forbid non-goal waypoints at the goal rate under `FixedFtth`.
    pub strict_goal: bool,
    /// Reject graph edges crossing single/two-stage families at the goal
    /// rate during validation (on by default).
    pub enforce_family_rule: bool,
    /// Node cap for the naive search tree.
    pub max_tree_nodes: u64,
}

pub const DEFAULT_GOAL_RATE: u32 = 100;
pub const DEFAULT_DISCOUNT_RATE: f64 = 0.10;
pub const DEFAULT_ADSL_OPEX: f64 = 0.25;
pub const DEFAULT_MAX_TREE_NODES: u64 = 10_000_000;

impl ScenarioConfig {
    pub fn goal_spec(&self) -> GoalSpec {
        GoalSpec {
            policy: self.goal,
            rate: self.goal_rate,
            strict: self.strict_goal,
        }
    }

    pub fn start(&self) -> Option<&Technology> {
        self.graph.technology(&self.start_technology)
    }
}

/// One violated invariant, with a stable machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, message: impl Into<String>) -> Self {
        Violation {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code.as_str(), self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationCode {
    HorizonEmpty,
    HorizonOrder,
    DiscountNegative,
    StartUnknown,
    GoalUnreachable,
    IdNaming,
    DuplicateId,
    AdslShape,
    FamilyShape,
    RateUnsupported,
    StagesInvalid,
    SelfEdge,
    UnknownNode,
    RateDowngradeOrFamilyRule,
    TariffNegative,
    TariffMissing,
    ItsLowRateTariff,
    CurveRange,
    CurveNotMonotone,
    CurveMissingYear,
    DemandMix,
    ProbabilityRange,
    CostNegative,
    CostMissing,
    OpexMissing,
    ValueNotFinite,
}

impl ViolationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationCode::HorizonEmpty => "HORIZON_EMPTY",
            ViolationCode::HorizonOrder => "HORIZON_ORDER",
            ViolationCode::DiscountNegative => "DISCOUNT_NEGATIVE",
            ViolationCode::StartUnknown => "START_UNKNOWN",
            ViolationCode::GoalUnreachable => "GOAL_UNREACHABLE",
            ViolationCode::IdNaming => "ID_NAMING",
            ViolationCode::DuplicateId => "DUPLICATE_ID",
            ViolationCode::AdslShape => "ADSL_SHAPE",
            ViolationCode::FamilyShape => "FAMILY_SHAPE",
            ViolationCode::RateUnsupported => "RATE_UNSUPPORTED",
            ViolationCode::StagesInvalid => "STAGES_INVALID",
            ViolationCode::SelfEdge => "SELF_EDGE",
            ViolationCode::UnknownNode => "UNKNOWN_NODE",
            ViolationCode::RateDowngradeOrFamilyRule => "RATE_DOWNGRADE_OR_FAMILY_RULE",
            ViolationCode::TariffNegative => "TARIFF_NEGATIVE",
            ViolationCode::TariffMissing => "TARIFF_MISSING",
            ViolationCode::ItsLowRateTariff => "ITS_LOW_RATE_TARIFF",
            ViolationCode::CurveRange => "CURVE_RANGE",
            ViolationCode::CurveNotMonotone => "CURVE_NOT_MONOTONE",
            ViolationCode::CurveMissingYear => "CURVE_MISSING_YEAR",
            ViolationCode::DemandMix => "DEMAND_MIX",
            ViolationCode::ProbabilityRange => "PROBABILITY_RANGE",
            ViolationCode::CostNegative => "COST_NEGATIVE",
            ViolationCode::CostMissing => "COST_MISSING",
            ViolationCode::OpexMissing => "OPEX_MISSING",
            ViolationCode::ValueNotFinite => "VALUE_NOT_FINITE",
        }
    }
}

impl Serialize for ViolationCode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// Checks every scenario invariant and returns the violations found.
///
/// Deterministic and side-effect free; an empty list means the scenario is
/// valid. Violations are data, not errors: unreadable input is the loader's
/// concern.
pub fn validate_scenario(config: &ScenarioConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    validate_horizon(config, &mut out);
    validate_technologies(config, &mut out);
    validate_edges(config, &mut out);
    validate_tariffs(config, &mut out);
    validate_curve(config, &mut out);
    validate_demands(config, &mut out);
    validate_churn(config, &mut out);
    validate_costs(config, &mut out);
    validate_goal(config, &mut out);
    out
}

fn validate_horizon(config: &ScenarioConfig, out: &mut Vec<Violation>) {
    let h = config.horizon;
    if h.t_mig < 1 {
        out.push(Violation::new(
            ViolationCode::HorizonEmpty,
            format!("migration window is {} years; at least 1 required", h.t_mig),
        ));
    }
    if h.t_nw < h.t_mig {
        out.push(Violation::new(
            ViolationCode::HorizonOrder,
            format!(
                "network life-cycle ({} years) shorter than migration window ({} years)",
                h.t_nw, h.t_mig
            ),
        ));
    }
    if !config.discount_rate.is_finite() {
        out.push(Violation::new(
            ViolationCode::ValueNotFinite,
            "discount rate is not finite",
        ));
    } else if config.discount_rate < 0.0 {
        out.push(Violation::new(
            ViolationCode::DiscountNegative,
            format!("discount rate {} is negative", config.discount_rate),
        ));
    }
    if config.graph.technology(&config.start_technology).is_none() {
        out.push(Violation::new(
            ViolationCode::StartUnknown,
            format!(
                "start technology {} is not a graph node",
                config.start_technology
            ),
        ));
    }
}

fn validate_technologies(config: &ScenarioConfig, out: &mut Vec<Violation>) {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for tech in &config.graph.technologies {
        if !seen.insert(&tech.id) {
            out.push(Violation::new(
                ViolationCode::DuplicateId,
                format!("technology id {} appears more than once", tech.id),
            ));
        }
        if tech.id != tech.canonical_id() {
            out.push(Violation::new(
                ViolationCode::IdNaming,
                format!(
                    "technology id {} does not follow the {} naming convention",
                    tech.id,
                    tech.canonical_id()
                ),
            ));
        }
        if tech.is_adsl() && (tech.data_rate != 20 || tech.family != Family::Copper) {
            out.push(Violation::new(
                ViolationCode::AdslShape,
                format!(
                    "{}: ADSL must be Copper at 20 Mbps (got {} at {} Mbps)",
                    tech.id, tech.family, tech.data_rate
                ),
            ));
        }
        if !tech.is_adsl() && tech.family == Family::Copper {
            out.push(Violation::new(
                ViolationCode::FamilyShape,
                format!("{}: Copper family is only valid for ADSL", tech.id),
            ));
        }
        if !SUPPORTED_RATES.contains(&tech.data_rate) {
            out.push(Violation::new(
                ViolationCode::RateUnsupported,
                format!(
                    "{}: data rate {} Mbps is not one of {:?}",
                    tech.id, tech.data_rate, SUPPORTED_RATES
                ),
            ));
        }
        if tech.stages != 1 && tech.stages != 2 {
            out.push(Violation::new(
                ViolationCode::StagesInvalid,
                format!("{}: stages must be 1 or 2, got {}", tech.id, tech.stages),
            ));
        }
    }
}

/// Single/two-stage deployment mismatch that the family rule forbids at the
/// goal rate: GPON/XGPON are two-stage families, UDWDM single-stage.
fn family_rule_conflict(from: &Technology, to: &Technology) -> bool {
    let two_stage = |f: Family| f == Family::Gpon || f == Family::Xgpon;
    (two_stage(from.family) && to.family == Family::Udwdm)
        || (from.family == Family::Udwdm && two_stage(to.family))
}

fn validate_edges(config: &ScenarioConfig, out: &mut Vec<Violation>) {
    for (from_id, to_id) in &config.graph.edges {
        if from_id == to_id {
            out.push(Violation::new(
                ViolationCode::SelfEdge,
                format!("self-edge on {from_id}"),
            ));
            continue;
        }
        let (from, to) = match (
            config.graph.technology(from_id),
            config.graph.technology(to_id),
        ) {
            (Some(f), Some(t)) => (f, t),
            _ => {
                out.push(Violation::new(
                    ViolationCode::UnknownNode,
                    format!("edge {from_id} -> {to_id} references an unknown technology"),
                ));
                continue;
            }
        };
        if to.data_rate < from.data_rate {
            out.push(Violation::new(
                ViolationCode::RateDowngradeOrFamilyRule,
                format!(
                    "edge {} -> {} downgrades the data rate ({} -> {} Mbps)",
                    from_id, to_id, from.data_rate, to.data_rate
                ),
            ));
        } else if config.enforce_family_rule
            && to.data_rate >= config.goal_rate
            && family_rule_conflict(from, to)
        {
            out.push(Violation::new(
                ViolationCode::RateDowngradeOrFamilyRule,
                format!(
                    "edge {} -> {} crosses single/two-stage deployment families \
                     at {} Mbps",
                    from_id, to_id, to.data_rate
                ),
            ));
        }
    }
}

fn validate_tariffs(config: &ScenarioConfig, out: &mut Vec<Violation>) {
    for (class, by_rate) in &config.tariffs.entries {
        for (rate, arpu) in by_rate {
            if let Some(v) = arpu {
                if !v.is_finite() {
                    out.push(Violation::new(
                        ViolationCode::ValueNotFinite,
                        format!("tariff for {class} at {rate} Mbps is not finite"),
                    ));
                } else if *v < 0.0 {
                    out.push(Violation::new(
                        ViolationCode::TariffNegative,
                        format!("tariff for {class} at {rate} Mbps is negative ({v})"),
                    ));
                }
            }
        }
    }
    let rates = config.graph.rates();
    for class in SubscriberClass::ALL {
        if config.demands.count(class) == 0 {
            continue;
        }
        for rate in &rates {
            match config.tariffs.lookup(class, *rate) {
                None => out.push(Violation::new(
                    ViolationCode::TariffMissing,
                    format!("no tariff entry for {class} at {rate} Mbps"),
                )),
                Some(Some(_)) if class == SubscriberClass::Its && *rate < 50 => {
                    out.push(Violation::new(
                        ViolationCode::ItsLowRateTariff,
                        format!(
                            "ITS subscribers cannot be charged at {rate} Mbps; \
                             mark the entry as not served"
                        ),
                    ));
                }
                _ => {}
            }
        }
    }
}

fn validate_curve(config: &ScenarioConfig, out: &mut Vec<Violation>) {
    let mut prev: Option<(i32, f64)> = None;
    for (year, value) in &config.curve.values {
        if !value.is_finite() {
            out.push(Violation::new(
                ViolationCode::ValueNotFinite,
                format!("penetration value for {year} is not finite"),
            ));
            continue;
        }
        if !(0.0..=1.0).contains(value) {
            out.push(Violation::new(
                ViolationCode::CurveRange,
                format!("penetration value {value} for {year} is outside [0, 1]"),
            ));
        }
        if let Some((py, pv)) = prev {
            if *value < pv {
                out.push(Violation::new(
                    ViolationCode::CurveNotMonotone,
                    format!("penetration decreases from {pv} ({py}) to {value} ({year})"),
                ));
            }
        }
        prev = Some((*year, *value));
    }
    let h = config.horizon;
    if h.t_mig >= 1 && h.t_nw >= h.t_mig {
        for year in h.t_start..=h.lifecycle_end() {
            if config.curve.fraction(year).is_none() {
                out.push(Violation::new(
                    ViolationCode::CurveMissingYear,
                    format!("penetration curve has no value for year {year}"),
                ));
            }
        }
    }
}

fn validate_demands(config: &ScenarioConfig, out: &mut Vec<Violation>) {
    if config.demands.label == DemandMix::PureResidential
        && (config.demands.count(SubscriberClass::Business) != 0
            || config.demands.count(SubscriberClass::Its) != 0)
    {
        out.push(Violation::new(
            ViolationCode::DemandMix,
            "pure residential scenarios must have zero business and ITS demand",
        ));
    }
}

fn validate_churn(config: &ScenarioConfig, out: &mut Vec<Violation>) {
    for (name, v) in [
        ("churn rate", config.churn.churn_rate),
        ("churn probability", config.churn.churn_probability),
    ] {
        if !v.is_finite() {
            out.push(Violation::new(
                ViolationCode::ValueNotFinite,
                format!("{name} is not finite"),
            ));
        } else if !(0.0..=1.0).contains(&v) {
            out.push(Violation::new(
                ViolationCode::ProbabilityRange,
                format!("{name} {v} is outside [0, 1]"),
            ));
        }
    }
}

fn validate_costs(config: &ScenarioConfig, out: &mut Vec<Violation>) {
    let costs = &config.costs;
    if !costs.adsl_opex_per_subscriber.is_finite() || costs.adsl_opex_per_subscriber < 0.0 {
        out.push(Violation::new(
            ViolationCode::CostNegative,
            "ADSL OPEX per subscriber must be a non-negative finite value",
        ));
    }
    for (id, record) in &costs.records {
        for v in record.capex.categories() {
            if !v.is_finite() {
                out.push(Violation::new(
                    ViolationCode::ValueNotFinite,
                    format!("CAPEX entry for {id} is not finite"),
                ));
            } else if v < 0.0 {
                out.push(Violation::new(
                    ViolationCode::CostNegative,
                    format!("CAPEX entry for {id} is negative ({v})"),
                ));
            }
        }
        if let Some(opex) = &record.opex {
            for v in opex.categories() {
                if !v.is_finite() {
                    out.push(Violation::new(
                        ViolationCode::ValueNotFinite,
                        format!("OPEX entry for {id} is not finite"),
                    ));
                } else if v < 0.0 {
                    out.push(Violation::new(
                        ViolationCode::CostNegative,
                        format!("OPEX entry for {id} is negative ({v})"),
                    ));
                }
            }
        }
    }
    for tech in &config.graph.technologies {
        match costs.record(&tech.id) {
            None => out.push(Violation::new(
                ViolationCode::CostMissing,
                format!("no cost record for technology {}", tech.id),
            )),
            Some(record) => {
                if costs.opex_model == OpexModel::Table && !tech.is_adsl() && record.opex.is_none()
                {
                    out.push(Violation::new(
                        ViolationCode::OpexMissing,
                        format!("table OPEX model requires OPEX categories for {}", tech.id),
                    ));
                }
            }
        }
    }
}

fn validate_goal(config: &ScenarioConfig, out: &mut Vec<Violation>) {
    let spec = config.goal_spec();
    if !config.graph.technologies.iter().any(|t| spec.absorbs(t)) {
        out.push(Violation::new(
            ViolationCode::GoalUnreachable,
            format!(
                "no technology in the graph satisfies goal {} at {} Mbps",
                config.goal, config.goal_rate
            ),
        ));
    }
}

/// Technologies that satisfy the configured migration goal.
///
/// Fixed-FTTH goals accept only FTTH deployments at or above the goal rate;
/// the flexible goal accepts any architecture.
pub fn goal_set(config: &ScenarioConfig) -> Result<BTreeSet<String>, EngineError> {
    let spec = config.goal_spec();
    let set: BTreeSet<String> = config
        .graph
        .technologies
        .iter()
        .filter(|t| spec.absorbs(t))
        .map(|t| t.id.clone())
        .collect();
    if set.is_empty() {
        return Err(EngineError::GoalUnreachable {
            reason: format!(
                "no technology satisfies goal {} at {} Mbps",
                config.goal, config.goal_rate
            ),
        });
    }
    let reachable = reachable_from(&config.graph, &config.start_technology, None);
    if set.iter().all(|id| !reachable.contains(id.as_str())) {
        return Err(EngineError::GoalUnreachable {
            reason: format!("goal set is not reachable from {}", config.start_technology),
        });
    }
    Ok(set)
}

/// Node ids reachable from `start` (inclusive), optionally within a hop cap.
pub fn reachable_from<'a>(
    graph: &'a MigrationGraph,
    start: &str,
    max_hops: Option<u32>,
) -> BTreeSet<&'a str> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<(&str, u32)> = VecDeque::new();
    if let Some(t) = graph.technology(start) {
        seen.insert(t.id.as_str());
        queue.push_back((t.id.as_str(), 0));
    }
    while let Some((id, hops)) = queue.pop_front() {
        if let Some(cap) = max_hops {
            if hops >= cap {
                continue;
            }
        }
        for next in graph.out_neighbors(id) {
            if seen.insert(next.id.as_str()) {
                queue.push_back((next.id.as_str(), hops + 1));
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{tech, toy_like_config};

    #[test]
    fn canonical_naming() {
        let t = tech("FTTB_UDWDM_100", Architecture::FttB, Family::Udwdm, 100, 1);
        assert_eq!(t.canonical_id(), "FTTB_UDWDM_100");
        let adsl = tech("ADSL", Architecture::Adsl, Family::Copper, 20, 1);
        assert_eq!(adsl.canonical_id(), "ADSL");
    }

    #[test]
    fn empty_window_is_flagged() {
        let mut config = toy_like_config();
        config.horizon.t_mig = 0;
        let violations = validate_scenario(&config);
        assert!(violations
            .iter()
            .any(|v| v.code == ViolationCode::HorizonEmpty));
    }

    #[test]
    fn family_rule_rejects_stage_crossing_at_goal_rate() {
        let mut config = toy_like_config();
        config.graph.technologies.push(tech(
            "FTTB_UDWDM_100",
            Architecture::FttB,
            Family::Udwdm,
            100,
            1,
        ));
        config.costs.records.insert(
            "FTTB_UDWDM_100".into(),
            CostRecord {
                capex: CapexBreakdown {
                    civil_works: 1.0,
                    ..Default::default()
                },
                opex: None,
                provenance: None,
                assumed: false,
            },
        );
        config
            .graph
            .edges
            .push(("FTTB_UDWDM_100".into(), "FTTB_XGPON_100".into()));
        let violations = validate_scenario(&config);
        assert!(
            violations
                .iter()
                .any(|v| v.code == ViolationCode::RateDowngradeOrFamilyRule),
            "{violations:?}"
        );

        // The same edge passes when the rule is disabled.
        config.enforce_family_rule = false;
        let violations = validate_scenario(&config);
        assert!(!violations
            .iter()
            .any(|v| v.code == ViolationCode::RateDowngradeOrFamilyRule));
    }

    #[test]
    fn rate_downgrade_shares_the_family_rule_code() {
        let mut config = toy_like_config();
        config
            .graph
            .edges
            .push(("FTTB_XGPON_100".into(), "FTTCab_GPON_25".into()));
        let violations = validate_scenario(&config);
        assert!(violations
            .iter()
            .any(|v| v.code == ViolationCode::RateDowngradeOrFamilyRule
                && v.message.contains("downgrades")));
    }

    #[test]
    fn unknown_edge_endpoint() {
        let mut config = toy_like_config();
        config
            .graph
            .edges
            .push(("ADSL".into(), "FTTH_HPON_100".into()));
        let violations = validate_scenario(&config);
        assert!(violations
            .iter()
            .any(|v| v.code == ViolationCode::UnknownNode));
    }

    #[test]
    fn valid_toy_scenario_has_no_violations() {
        let config = toy_like_config();
        assert_eq!(validate_scenario(&config), vec![]);
    }

    #[test]
    fn goal_set_fixed_is_subset_of_flexible() {
        let mut config = toy_like_config();
        config.graph.technologies.push(tech(
            "FTTH_XGPON_100",
            Architecture::FttH,
            Family::Xgpon,
            100,
            2,
        ));
        config
            .graph
            .edges
            .push(("ADSL".into(), "FTTH_XGPON_100".into()));
        config
            .costs
            .records
            .insert("FTTH_XGPON_100".into(), CostRecord::default());
        config.goal = GoalPolicy::FlexibleFttx;
        let flexible = goal_set(&config).unwrap();
        config.goal = GoalPolicy::FixedFtth;
        let fixed = goal_set(&config).unwrap();
        assert!(fixed.is_subset(&flexible));
        assert!(flexible.contains("FTTB_XGPON_100"));
        assert_eq!(fixed.iter().collect::<Vec<_>>(), vec!["FTTH_XGPON_100"]);
    }

    #[test]
    fn goal_unreachable_without_goal_rate_node() {
        let mut config = toy_like_config();
        config.graph.technologies.retain(|t| t.data_rate < 100);
        config.graph.edges.retain(|(_, t)| t != "FTTB_XGPON_100");
        assert!(matches!(
            goal_set(&config),
            Err(EngineError::GoalUnreachable { .. })
        ));
        let violations = validate_scenario(&config);
        assert!(violations
            .iter()
            .any(|v| v.code == ViolationCode::GoalUnreachable));
    }

    #[test]
    fn its_cannot_be_charged_below_50() {
        let mut config = toy_like_config();
        config.demands.label = DemandMix::Converged;
        config.demands.counts.insert(SubscriberClass::Its, 2);
        config.tariffs.set(SubscriberClass::Its, 20, Some(5.0));
        config.tariffs.set(SubscriberClass::Its, 25, None);
        config.tariffs.set(SubscriberClass::Its, 100, Some(110.0));
        let violations = validate_scenario(&config);
        assert!(violations
            .iter()
            .any(|v| v.code == ViolationCode::ItsLowRateTariff));
    }

    #[test]
    fn validation_is_deterministic() {
        let mut config = toy_like_config();
        config.horizon.t_mig = 0;
        config.graph.edges.push(("ADSL".into(), "GHOST".into()));
        assert_eq!(validate_scenario(&config), validate_scenario(&config));
    }

    #[test]
    fn configs_are_shareable_across_threads() {
        fn check<T: Send + Sync>() {}
        check::<ScenarioConfig>();
        check::<MigrationGraph>();
        check::<CostDataset>();
    }
}
