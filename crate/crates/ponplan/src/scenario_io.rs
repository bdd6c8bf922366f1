//! Loading, validation and serialization of scenarios and results.
//!
//! Scenario files are JSON documents with monetary values as decimal
//! strings (exact round-trips, locale-independent). Cost datasets and
//! penetration curves can live inline or in referenced files resolved
//! relative to the scenario document. Loading always runs the validator
//! and refuses scenarios with violations.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::expectimax::{MigrationStep, PlanResult, Policy};
use crate::model::{
    validate_scenario, CapexBreakdown, ChurnModel, CostDataset, CostRecord, CostUnits, CurveLabel,
    DemandMix, DemandProfile, GoalPolicy, Horizon, MigrationGraph, OpexBreakdown, OpexModel,
    PenetrationCurve, ScenarioConfig, SubscriberClass, TariffTable, Technology, Violation,
    DEFAULT_ADSL_OPEX, DEFAULT_DISCOUNT_RATE, DEFAULT_GOAL_RATE, DEFAULT_MAX_TREE_NODES,
};

/// Errors surfaced while loading scenario inputs.
#[derive(Debug)]
pub enum LoadError {
    Io {
        path: PathBuf,
        message: String,
    },
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    Validation {
        violations: Vec<Violation>,
    },
}

impl LoadError {
    pub fn code(&self) -> &'static str {
        match self {
            LoadError::Io { .. } => "IO_ERROR",
            LoadError::Parse { .. } => "PARSE_ERROR",
            LoadError::Validation { .. } => "VALIDATION_FAILED",
        }
    }
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io { path, message } => {
                write!(f, "cannot read {}: {}", path.display(), message)
            }
            LoadError::Parse {
                path,
                line,
                column,
                message,
            } => write!(
                f,
                "cannot parse {} at line {line}, column {column}: {message}",
                path.display()
            ),
            LoadError::Validation { violations } => {
                writeln!(f, "scenario is invalid ({} violations):", violations.len())?;
                for v in violations {
                    writeln!(f, "  {v}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for LoadError {}

fn io_error(path: &Path, err: std::io::Error) -> LoadError {
    LoadError::Io {
        path: path.to_owned(),
        message: err.to_string(),
    }
}

fn json_error(path: &Path, err: serde_json::Error) -> LoadError {
    LoadError::Parse {
        path: path.to_owned(),
        line: err.line(),
        column: err.column(),
        message: err.to_string(),
    }
}

fn data_error(path: &Path, message: impl Into<String>) -> LoadError {
    LoadError::Parse {
        path: path.to_owned(),
        line: 0,
        column: 0,
        message: message.into(),
    }
}

fn parse_money(path: &Path, context: &str, raw: &str) -> Result<f64, LoadError> {
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| data_error(path, format!("{context}: not a decimal number: {raw:?}")))?;
    if !value.is_finite() {
        return Err(data_error(path, format!("{context}: not finite: {raw:?}")));
    }
    Ok(value)
}

/// Shortest decimal string that parses back to exactly the same f64.
pub fn format_money(value: f64) -> String {
    format!("{value}")
}

// ---------------------------------------------------------------------------
// Document shapes
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default)]
    #[allow(dead_code)]
    name: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    start_technology: String,
    technologies: Vec<TechnologyDoc>,
    edges: Vec<EdgeDoc>,
    tariffs: BTreeMap<SubscriberClass, BTreeMap<String, Option<String>>>,
    #[serde(default)]
    curve: Option<CurveDoc>,
    #[serde(default)]
    curve_ref: Option<String>,
    demands: DemandsDoc,
    churn: ChurnDoc,
    #[serde(default)]
    costs: Option<CostDoc>,
    #[serde(default)]
    costs_ref: Option<String>,
    horizon: HorizonDoc,
    #[serde(default)]
    discount_rate: Option<f64>,
    goal: GoalPolicy,
    #[serde(default)]
    goal_rate: Option<u32>,
    #[serde(default)]
    strict_goal: Option<bool>,
    #[serde(default)]
    enforce_family_rule: Option<bool>,
    #[serde(default)]
    max_tree_nodes: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TechnologyDoc {
    id: String,
    architecture: crate::model::Architecture,
    family: crate::model::Family,
    data_rate: u32,
    stages: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    from: String,
    to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveDoc {
    label: CurveLabel,
    /// Explicit year -> fraction map; no interpolation is ever applied.
    values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandsDoc {
    label: DemandMix,
    counts: BTreeMap<SubscriberClass, u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChurnDoc {
    churn_rate: f64,
    churn_probability: f64,
    #[serde(default)]
    its_exempt: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HorizonDoc {
    #[serde(rename = "T_start")]
    t_start: i32,
    #[serde(rename = "T_mig")]
    t_mig: u32,
    #[serde(rename = "T_NW")]
    t_nw: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostDoc {
    name: String,
    units: CostUnits,
    opex_model: OpexModel,
    #[serde(default)]
    adsl_opex_per_subscriber: Option<String>,
    records: BTreeMap<String, CostRecordDoc>,
    #[serde(default)]
    #[allow(dead_code)]
    provenance: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostRecordDoc {
    capex: CapexDoc,
    #[serde(default)]
    opex: Option<OpexDoc>,
    #[serde(default)]
    provenance: Option<String>,
    #[serde(default)]
    assumed: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapexDoc {
    civil_works: String,
    fiber: String,
    central_office: String,
    remote_nodes: String,
    buildings: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpexDoc {
    rent: String,
    energy: String,
    fault_management: String,
    marketing: String,
    operations: String,
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, LoadError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| json_error(path, e))
}

fn compile_curve(path: &Path, doc: CurveDoc) -> Result<PenetrationCurve, LoadError> {
    let mut values = BTreeMap::new();
    for (year, fraction) in doc.values {
        let year: i32 = year
            .parse()
            .map_err(|_| data_error(path, format!("curve year {year:?} is not an integer")))?;
        values.insert(year, fraction);
    }
    Ok(PenetrationCurve {
        label: doc.label,
        values,
    })
}

fn compile_costs(path: &Path, doc: CostDoc) -> Result<CostDataset, LoadError> {
    let adsl_opex = match &doc.adsl_opex_per_subscriber {
        Some(raw) => parse_money(path, "adsl_opex_per_subscriber", raw)?,
        None => DEFAULT_ADSL_OPEX,
    };
    let mut records = BTreeMap::new();
    for (id, record) in doc.records {
        let context = format!("costs for {id}");
        let capex = CapexBreakdown {
            civil_works: parse_money(path, &context, &record.capex.civil_works)?,
            fiber: parse_money(path, &context, &record.capex.fiber)?,
            central_office: parse_money(path, &context, &record.capex.central_office)?,
            remote_nodes: parse_money(path, &context, &record.capex.remote_nodes)?,
            buildings: parse_money(path, &context, &record.capex.buildings)?,
        };
        let opex = match record.opex {
            Some(o) => Some(OpexBreakdown {
                rent: parse_money(path, &context, &o.rent)?,
                energy: parse_money(path, &context, &o.energy)?,
                fault_management: parse_money(path, &context, &o.fault_management)?,
                marketing: parse_money(path, &context, &o.marketing)?,
                operations: parse_money(path, &context, &o.operations)?,
            }),
            None => None,
        };
        records.insert(
            id,
            CostRecord {
                capex,
                opex,
                provenance: record.provenance,
                assumed: record.assumed,
            },
        );
    }
    Ok(CostDataset {
        name: doc.name,
        units: doc.units,
        opex_model: doc.opex_model,
        adsl_opex_per_subscriber: adsl_opex,
        records,
    })
}

/// Loads a cost dataset file as-is (units are not converted here).
pub fn load_cost_dataset(path: &Path) -> Result<CostDataset, LoadError> {
    compile_costs(path, read_json(path)?)
}

/// Loads a penetration curve file.
pub fn load_curve(path: &Path) -> Result<PenetrationCurve, LoadError> {
    compile_curve(path, read_json(path)?)
}

/// Loads, resolves and validates a scenario document.
///
/// Returns the compiled configuration with absolute CAPEX figures, or a
/// structured error: I/O, parse (with position) or the full violation list.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, LoadError> {
    let doc: ScenarioDoc = read_json(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));

    let curve = match (doc.curve, &doc.curve_ref) {
        (Some(inline), None) => compile_curve(path, inline)?,
        (None, Some(reference)) => load_curve(&dir.join(reference))?,
        (Some(_), Some(_)) => {
            return Err(data_error(path, "give either curve or curve_ref, not both"))
        }
        (None, None) => return Err(data_error(path, "scenario needs a curve or curve_ref")),
    };

    let costs = match (doc.costs, &doc.costs_ref) {
        (Some(inline), None) => compile_costs(path, inline)?,
        (None, Some(reference)) => load_cost_dataset(&dir.join(reference))?,
        (Some(_), Some(_)) => {
            return Err(data_error(path, "give either costs or costs_ref, not both"))
        }
        (None, None) => return Err(data_error(path, "scenario needs costs or costs_ref")),
    };

    let mut tariffs = TariffTable::default();
    for (class, by_rate) in doc.tariffs {
        for (rate, arpu) in by_rate {
            let rate: u32 = rate
                .parse()
                .map_err(|_| data_error(path, format!("tariff rate {rate:?} is not an integer")))?;
            let arpu = match arpu {
                Some(raw) => Some(parse_money(path, &format!("tariff {class}/{rate}"), &raw)?),
                None => None,
            };
            tariffs.set(class, rate, arpu);
        }
    }

    let technologies = doc
        .technologies
        .into_iter()
        .map(|t| Technology {
            id: t.id,
            architecture: t.architecture,
            family: t.family,
            data_rate: t.data_rate,
            stages: t.stages,
        })
        .collect();
    let edges = doc.edges.into_iter().map(|e| (e.from, e.to)).collect();

    let demands = DemandProfile {
        label: doc.demands.label,
        counts: doc.demands.counts,
    };
    let costs = costs.into_absolute(demands.total());

    let config = ScenarioConfig {
        start_technology: doc.start_technology,
        graph: MigrationGraph {
            technologies,
            edges,
        },
        tariffs,
        curve,
        demands,
        churn: ChurnModel {
            churn_rate: doc.churn.churn_rate,
            churn_probability: doc.churn.churn_probability,
            its_exempt: doc.churn.its_exempt.unwrap_or(true),
        },
        costs,
        horizon: Horizon {
            t_start: doc.horizon.t_start,
            t_mig: doc.horizon.t_mig,
            t_nw: doc.horizon.t_nw,
        },
        discount_rate: doc.discount_rate.unwrap_or(DEFAULT_DISCOUNT_RATE),
        goal: doc.goal,
        goal_rate: doc.goal_rate.unwrap_or(DEFAULT_GOAL_RATE),
        strict_goal: doc.strict_goal.unwrap_or(false),
        enforce_family_rule: doc.enforce_family_rule.unwrap_or(true),
        max_tree_nodes: doc.max_tree_nodes.unwrap_or(DEFAULT_MAX_TREE_NODES),
    };

    let violations = validate_scenario(&config);
    if !violations.is_empty() {
        return Err(LoadError::Validation { violations });
    }
    Ok(config)
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Table,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "table" => Ok(OutputFormat::Table),
            other => Err(format!("unknown output format {other:?}")),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultDoc {
    expected_npv: String,
    goal: GoalPolicy,
    curve: CurveLabel,
    path: Vec<MigrationStep>,
    policy: Policy,
}

/// Renders a plan's path in the tabular "2019: X / 2020: Y" form.
pub fn format_path(path: &[MigrationStep]) -> String {
    if path.is_empty() {
        return "No Migrations".to_owned();
    }
    path.iter()
        .map(|s| format!("{}: {}", s.year, s.technology))
        .collect::<Vec<_>>()
        .join(" / ")
}

/// Writes an evaluated plan in the requested format.
///
/// JSON carries the full policy and round-trips through [`load_result`];
/// CSV emits one row per migration step plus a summary row; the text table
/// mirrors the usual result-table layout (curve, path, NPV).
pub fn write_result(
    result: &PlanResult,
    curve: CurveLabel,
    format: OutputFormat,
    out: &mut dyn Write,
) -> std::io::Result<()> {
    match format {
        OutputFormat::Json => {
            let doc = ResultDoc {
                expected_npv: format_money(result.expected_npv),
                goal: result.goal_used,
                curve,
                path: result.path.clone(),
                policy: result.policy.clone(),
            };
            let text = serde_json::to_string_pretty(&doc).expect("result serializes");
            writeln!(out, "{text}")
        }
        OutputFormat::Csv => {
            writeln!(out, "step,year,technology,expected_npv")?;
            for (i, step) in result.path.iter().enumerate() {
                writeln!(out, "{},{},{},", i + 1, step.year, step.technology)?;
            }
            writeln!(out, "summary,,,{}", format_money(result.expected_npv))
        }
        OutputFormat::Table => {
            writeln!(
                out,
                "Penetration Curve | FTTx Migration Path | Net Present Value [C.U.]"
            )?;
            writeln!(
                out,
                "{} | {} | {:.2}",
                curve,
                format_path(&result.path),
                result.expected_npv
            )
        }
    }
}

/// Reads back a JSON result written by [`write_result`].
pub fn load_result(path: &Path) -> Result<(PlanResult, CurveLabel), LoadError> {
    let doc: ResultDoc = read_json(path)?;
    let expected_npv = parse_money(path, "expected_npv", &doc.expected_npv)?;
    Ok((
        PlanResult {
            expected_npv,
            path: doc.path,
            policy: doc.policy,
            goal_used: doc.goal,
        },
        doc.curve,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expectimax::evaluate_memoized;
    use crate::testutil::toy_like_config;

    #[test]
    fn json_result_round_trips_exactly() {
        let config = toy_like_config();
        let plan = evaluate_memoized(&config).unwrap();
        let mut buffer = Vec::new();
        write_result(&plan, config.curve.label, OutputFormat::Json, &mut buffer).unwrap();
        let dir = std::env::temp_dir().join("ponplan-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("result.json");
        std::fs::write(&path, &buffer).unwrap();
        let (loaded, curve) = load_result(&path).unwrap();
        assert_eq!(loaded.expected_npv, plan.expected_npv);
        assert_eq!(loaded.path, plan.path);
        assert_eq!(loaded.policy, plan.policy);
        assert_eq!(curve, config.curve.label);
    }

    #[test]
    fn empty_path_formats_as_no_migrations() {
        assert_eq!(format_path(&[]), "No Migrations");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_scenario(Path::new("/nonexistent/scenario.json")).unwrap_err();
        assert_eq!(err.code(), "IO_ERROR");
    }

    #[test]
    fn malformed_json_reports_position() {
        let dir = std::env::temp_dir().join("ponplan-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("broken.json");
        std::fs::write(&path, "{\n  \"start_technology\": \n}").unwrap();
        match load_scenario(&path).unwrap_err() {
            LoadError::Parse { line, .. } => assert!(line > 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn money_format_is_shortest_round_trip() {
        for v in [0.1, 13.2, 380.95, 1.0 / 3.0, 1e-9, 123456.789] {
            let s = format_money(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
            assert!(!s.contains(','));
        }
    }
}
