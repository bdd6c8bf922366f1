//! Implementations of the CLI subcommands.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde_json::json;

use ponplan::error::EngineError;
use ponplan::expectimax::{build_tree, evaluate, evaluate_memoized, tree_node_count, PlanResult};
use ponplan::model::{validate_scenario, CurveLabel, GoalPolicy, OpexModel, ScenarioConfig};
use ponplan::oracle::oracle_best;
use ponplan::scenario_io::{
    format_money, format_path, load_cost_dataset, load_curve, load_scenario, write_result,
    LoadError, OutputFormat,
};

pub struct Context {
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub naive_tree: bool,
    pub max_nodes: Option<u64>,
}

#[derive(Debug)]
pub enum CliError {
    Load(LoadError),
    Engine(EngineError),
    Output(std::io::Error),
    Argument(String),
    Disagreement(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Load(e) => e.code(),
            CliError::Engine(e) => e.code(),
            CliError::Output(_) => "IO_ERROR",
            CliError::Argument(_) => "BAD_ARGUMENT",
            CliError::Disagreement(_) => "DISAGREEMENT",
        }
    }

    /// 0 success, 1 validation, 2 I/O or usage, 3 computational,
    /// 4 disagreement.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Load(LoadError::Validation { .. }) => 1,
            CliError::Load(_) | CliError::Output(_) | CliError::Argument(_) => 2,
            CliError::Engine(_) => 3,
            CliError::Disagreement(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Load(e) => e.fmt(f),
            CliError::Engine(e) => e.fmt(f),
            CliError::Output(e) => write!(f, "cannot write output: {e}"),
            CliError::Argument(msg) => f.write_str(msg),
            CliError::Disagreement(msg) => f.write_str(msg),
        }
    }
}

impl From<LoadError> for CliError {
    fn from(value: LoadError) -> Self {
        CliError::Load(value)
    }
}

impl From<EngineError> for CliError {
    fn from(value: EngineError) -> Self {
        CliError::Engine(value)
    }
}

fn emit(ctx: &Context, text: &str) -> Result<(), CliError> {
    match &ctx.out {
        Some(path) => {
            let mut file = File::create(path).map_err(CliError::Output)?;
            file.write_all(text.as_bytes()).map_err(CliError::Output)
        }
        None => {
            print!("{text}");
            std::io::stdout().flush().map_err(CliError::Output)
        }
    }
}

/// Resolves a curve or cost-dataset argument: an existing path wins,
/// otherwise the name is looked up in the given directory next to the
/// scenario file (with an optional .json suffix).
fn resolve_ref(scenario: &Path, dir: &str, name: &str) -> PathBuf {
    let direct = PathBuf::from(name);
    if direct.exists() {
        return direct;
    }
    let base = scenario.parent().unwrap_or_else(|| Path::new("."));
    let mut candidate = base.join(dir).join(name);
    if candidate.extension().is_none() {
        candidate.set_extension("json");
    }
    candidate
}

fn revalidate(config: &ScenarioConfig) -> Result<(), CliError> {
    let violations = validate_scenario(config);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Load(LoadError::Validation { violations }))
    }
}

fn run(config: &ScenarioConfig, naive_tree: bool) -> Result<PlanResult, CliError> {
    if naive_tree {
        let mut root = build_tree(config)?;
        Ok(evaluate(&mut root, config)?)
    } else {
        Ok(evaluate_memoized(config)?)
    }
}

fn load_with_overrides(ctx: &Context, path: &Path) -> Result<ScenarioConfig, CliError> {
    let mut config = load_scenario(path)?;
    if let Some(cap) = ctx.max_nodes {
        config.max_tree_nodes = cap;
    }
    Ok(config)
}

pub fn plan(
    ctx: &Context,
    scenario: &Path,
    goal: Option<GoalPolicy>,
    curve: Option<&str>,
) -> Result<(), CliError> {
    let mut config = load_with_overrides(ctx, scenario)?;
    if let Some(goal) = goal {
        config.goal = goal;
    }
    if let Some(name) = curve {
        config.curve = load_curve(&resolve_ref(scenario, "curves", name))?;
        revalidate(&config)?;
    }
    let result = run(&config, ctx.naive_tree)?;
    let mut buffer = Vec::new();
    write_result(&result, config.curve.label, ctx.format, &mut buffer).map_err(CliError::Output)?;
    emit(ctx, &String::from_utf8(buffer).expect("utf-8 output"))
}

const STANDARD_CURVES: [&str; 3] = ["conservative", "realistic", "aggressive"];

pub fn compare(ctx: &Context, scenario: &Path) -> Result<(), CliError> {
    let base = load_with_overrides(ctx, scenario)?;
    let mut rows: Vec<(GoalPolicy, CurveLabel, PlanResult)> = Vec::new();
    for goal in [GoalPolicy::FlexibleFttx, GoalPolicy::FixedFtth] {
        for name in STANDARD_CURVES {
            let mut config = base.clone();
            config.goal = goal;
            config.curve = load_curve(&resolve_ref(scenario, "curves", name))?;
            revalidate(&config)?;
            let label = config.curve.label;
            rows.push((goal, label, run(&config, ctx.naive_tree)?));
        }
    }
    let gap = |curve: CurveLabel| -> (f64, f64) {
        let flexible = rows
            .iter()
            .find(|(g, c, _)| *g == GoalPolicy::FlexibleFttx && *c == curve)
            .map(|(_, _, r)| r.expected_npv)
            .unwrap_or(f64::NAN);
        let fixed = rows
            .iter()
            .find(|(g, c, _)| *g == GoalPolicy::FixedFtth && *c == curve)
            .map(|(_, _, r)| r.expected_npv)
            .unwrap_or(f64::NAN);
        let relative = if fixed.abs() > 0.0 {
            (flexible - fixed) / fixed.abs() * 100.0
        } else {
            f64::NAN
        };
        (flexible - fixed, relative)
    };
    let curves = [
        CurveLabel::Conservative,
        CurveLabel::Realistic,
        CurveLabel::Aggressive,
    ];

    let text = match ctx.format {
        OutputFormat::Table => {
            let mut out = String::new();
            out.push_str(
                "Goal | Penetration Curve | FTTx Migration Path | Net Present Value [C.U.]\n",
            );
            for (goal, curve, result) in &rows {
                out.push_str(&format!(
                    "{goal} | {curve} | {} | {:.2}\n",
                    format_path(&result.path),
                    result.expected_npv
                ));
            }
            for curve in curves {
                let (absolute, relative) = gap(curve);
                out.push_str(&format!(
                    "Gap {curve}: flexible - fixed = {absolute:.2} C.U. ({relative:.2}% of fixed)\n"
                ));
            }
            out
        }
        OutputFormat::Csv => {
            let mut out = String::from("goal,curve,path,expected_npv\n");
            for (goal, curve, result) in &rows {
                out.push_str(&format!(
                    "{goal},{curve},{},{}\n",
                    format_path(&result.path).replace(',', ";"),
                    format_money(result.expected_npv)
                ));
            }
            for curve in curves {
                let (absolute, _) = gap(curve);
                out.push_str(&format!("gap,{curve},,{}\n", format_money(absolute)));
            }
            out
        }
        OutputFormat::Json => {
            let rows_json: Vec<_> = rows
                .iter()
                .map(|(goal, curve, result)| {
                    json!({
                        "goal": goal,
                        "curve": curve,
                        "path": result.path,
                        "expected_npv": format_money(result.expected_npv),
                    })
                })
                .collect();
            let gaps: Vec<_> = curves
                .iter()
                .map(|curve| {
                    let (absolute, relative) = gap(*curve);
                    json!({
                        "curve": curve,
                        "absolute": format_money(absolute),
                        "relative_percent": relative,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&json!({"rows": rows_json, "gaps": gaps}))
                .expect("serializes")
                + "\n"
        }
    };
    emit(ctx, &text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepParameter {
    CostDataset,
    OpexModel,
    ChurnProbability,
    ChurnRate,
    DiscountRate,
    Curve,
}

impl SweepParameter {
    fn name(&self) -> &'static str {
        match self {
            SweepParameter::CostDataset => "cost_dataset",
            SweepParameter::OpexModel => "opex_model",
            SweepParameter::ChurnProbability => "churn_probability",
            SweepParameter::ChurnRate => "churn_rate",
            SweepParameter::DiscountRate => "discount_rate",
            SweepParameter::Curve => "curve",
        }
    }

    fn is_numeric(&self) -> bool {
        matches!(
            self,
            SweepParameter::ChurnProbability
                | SweepParameter::ChurnRate
                | SweepParameter::DiscountRate
        )
    }
}

fn parse_numeric(parameter: SweepParameter, value: &str) -> Result<f64, CliError> {
    value.trim().parse().map_err(|_| {
        CliError::Argument(format!(
            "sweep value {value:?} for {} is not a number",
            parameter.name()
        ))
    })
}

fn apply_sweep_value(
    scenario: &Path,
    config: &mut ScenarioConfig,
    parameter: SweepParameter,
    value: &str,
) -> Result<(), CliError> {
    match parameter {
        SweepParameter::CostDataset => {
            let dataset = load_cost_dataset(&resolve_ref(scenario, "costs", value))?;
            config.costs = dataset.into_absolute(config.demands.total());
        }
        SweepParameter::OpexModel => {
            config.costs.opex_model = match value.trim().to_ascii_lowercase().as_str() {
                "table" => OpexModel::Table,
                "percentage" => OpexModel::Percentage,
                other => {
                    return Err(CliError::Argument(format!(
                        "unknown OPEX model {other:?}; use table or percentage"
                    )))
                }
            };
        }
        SweepParameter::ChurnProbability => {
            config.churn.churn_probability = parse_numeric(parameter, value)?;
        }
        SweepParameter::ChurnRate => {
            config.churn.churn_rate = parse_numeric(parameter, value)?;
        }
        SweepParameter::DiscountRate => {
            config.discount_rate = parse_numeric(parameter, value)?;
        }
        SweepParameter::Curve => {
            config.curve = load_curve(&resolve_ref(scenario, "curves", value))?;
        }
    }
    Ok(())
}

/// Penetration curves a sweep iterates over: the three standard curves when
/// they are bundled next to the scenario, the scenario's own curve
/// otherwise.
fn sweep_curves(
    scenario: &Path,
    base: &ScenarioConfig,
) -> Vec<(String, ponplan::model::PenetrationCurve)> {
    let mut curves = Vec::new();
    for name in STANDARD_CURVES {
        let path = resolve_ref(scenario, "curves", name);
        if let Ok(curve) = load_curve(&path) {
            curves.push((curve.label.to_string(), curve));
        }
    }
    if curves.is_empty() {
        curves.push((base.curve.label.to_string(), base.curve.clone()));
    }
    curves
}

pub fn sweep(
    ctx: &Context,
    scenario: &Path,
    parameter: SweepParameter,
    values: &[String],
) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Argument("sweep needs at least one value".into()));
    }
    let base = load_with_overrides(ctx, scenario)?;
    let mut out = String::from("parameter,value,curve,path,expected_npv,note\n");
    // (curve, value, npv) for the monotonicity report
    let mut observations: Vec<(String, f64, f64)> = Vec::new();

    if parameter == SweepParameter::Curve {
        for value in values {
            let mut config = base.clone();
            apply_sweep_value(scenario, &mut config, parameter, value)?;
            revalidate(&config)?;
            let result = run(&config, ctx.naive_tree)?;
            out.push_str(&format!(
                "{},{},{},{},{},\n",
                parameter.name(),
                value,
                config.curve.label,
                format_path(&result.path).replace(',', ";"),
                format_money(result.expected_npv)
            ));
        }
    } else {
        for (curve_name, curve) in sweep_curves(scenario, &base) {
            for value in values {
                let mut config = base.clone();
                config.curve = curve.clone();
                apply_sweep_value(scenario, &mut config, parameter, value)?;
                revalidate(&config)?;
                let result = run(&config, ctx.naive_tree)?;
                out.push_str(&format!(
                    "{},{},{},{},{},\n",
                    parameter.name(),
                    value,
                    curve_name,
                    format_path(&result.path).replace(',', ";"),
                    format_money(result.expected_npv)
                ));
                if parameter.is_numeric() {
                    observations.push((
                        curve_name.clone(),
                        parse_numeric(parameter, value)?,
                        result.expected_npv,
                    ));
                }
            }
        }
    }

    if parameter.is_numeric() {
        let mut curves: Vec<String> = observations.iter().map(|(c, _, _)| c.clone()).collect();
        curves.dedup();
        for curve in curves {
            let mut points: Vec<(f64, f64)> = observations
                .iter()
                .filter(|(c, _, _)| *c == curve)
                .map(|(_, v, npv)| (*v, *npv))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let non_increasing = points.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);
            let non_decreasing = points.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9);
            let trend = match (non_increasing, non_decreasing) {
                (true, true) => "constant",
                (true, false) => "non-increasing",
                (false, true) => "non-decreasing",
                (false, false) => "mixed",
            };
            out.push_str(&format!("npv_trend,,{curve},,,{trend}\n"));
        }
    }
    emit(ctx, &out)
}

pub fn verify(ctx: &Context, scenario: &Path) -> Result<(), CliError> {
    let config = load_with_overrides(ctx, scenario)?;
    let reference = evaluate_memoized(&config)?;
    let mut report = format!(
        "memoized evaluator: NPV {}\n",
        format_money(reference.expected_npv)
    );
    let mut skipped: Vec<String> = Vec::new();

    let nodes = tree_node_count(&config)?;
    if nodes <= config.max_tree_nodes as u128 {
        let mut root = build_tree(&config)?;
        let tree = evaluate(&mut root, &config)?;
        check_agreement("tree evaluator", &tree.expected_npv, &tree.path, &reference)?;
        report.push_str(&format!(
            "tree evaluator ({nodes} nodes): NPV {} (agrees)\n",
            format_money(tree.expected_npv)
        ));
    } else {
        skipped.push(format!(
            "tree evaluator: {nodes} nodes exceed the cap of {}",
            config.max_tree_nodes
        ));
    }

    match oracle_best(&config) {
        Ok(oracle) => {
            let path = oracle.policy.reporting_path(&config);
            check_agreement("oracle", &oracle.expected_npv, &path, &reference)?;
            report.push_str(&format!(
                "oracle: NPV {} (agrees)\n",
                format_money(oracle.expected_npv)
            ));
        }
        Err(EngineError::InstanceTooLarge { reason }) => {
            skipped.push(format!("oracle: {reason}"));
        }
        Err(other) => return Err(other.into()),
    }

    emit(ctx, &report)?;
    if skipped.is_empty() {
        Ok(())
    } else {
        Err(CliError::Engine(EngineError::InstanceTooLarge {
            reason: skipped.join("; "),
        }))
    }
}

fn check_agreement(
    name: &str,
    npv: &f64,
    path: &[ponplan::expectimax::MigrationStep],
    reference: &PlanResult,
) -> Result<(), CliError> {
    let gap =
        (npv - reference.expected_npv).abs() / npv.abs().max(reference.expected_npv.abs()).max(1.0);
    if gap > 1e-9 {
        return Err(CliError::Disagreement(format!(
            "{name} disagrees on NPV: {} vs {} (relative gap {gap:.3e})",
            format_money(*npv),
            format_money(reference.expected_npv)
        )));
    }
    if path != reference.path {
        return Err(CliError::Disagreement(format!(
            "{name} disagrees on the migration path: [{}] vs [{}]",
            format_path(path),
            format_path(&reference.path)
        )));
    }
    Ok(())
}

pub fn validate(ctx: &Context, scenario: &Path) -> Result<(), CliError> {
    match load_scenario(scenario) {
        Ok(_) => {
            let text = match ctx.format {
                OutputFormat::Json => {
                    serde_json::to_string_pretty(&json!({"valid": true, "violations": []}))
                        .expect("serializes")
                        + "\n"
                }
                _ => "scenario is valid\n".to_owned(),
            };
            emit(ctx, &text)
        }
        Err(LoadError::Validation { violations }) => {
            let text = match ctx.format {
                OutputFormat::Json => {
                    serde_json::to_string_pretty(&json!({"valid": false, "violations": violations}))
                        .expect("serializes")
                        + "\n"
                }
                _ => {
                    let mut out =
                        format!("scenario is invalid ({} violations):\n", violations.len());
                    for v in &violations {
                        out.push_str(&format!("  {v}\n"));
                    }
                    out
                }
            };
            emit(ctx, &text)?;
            Err(CliError::Load(LoadError::Validation { violations }))
        }
        Err(other) => Err(other.into()),
    }
}
