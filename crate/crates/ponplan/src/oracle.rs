//! Exhaustive verification oracle.
//!
//! Enumerates every deterministic contingency policy on a small instance,
//! scores each by summing over all churn sequences weighted by their
//! probability, and returns the maximum. No Bellman recursion and no
//! pruning: this is the independent route against which both search
//! evaluators are checked.

use std::collections::{BTreeSet, HashMap};

use crate::economics;
use crate::error::EngineError;
use crate::expectimax::{Action, Policy};
use crate::model::ScenarioConfig;

/// One resolved churn trajectory: the outcome drawn at each year a chance
/// node was traversed, and the joint probability of that draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChurnSequence {
    pub bits: Vec<u8>,
    pub probability: f64,
}

/// Expected NPV of a fixed policy together with the churn sequences the
/// expectation ranged over.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    pub expected_npv: f64,
    pub sequences: Vec<ChurnSequence>,
}

/// Best policy found by exhaustive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub expected_npv: f64,
    pub policy: Policy,
}

/// Enumeration bounds; above any of them the oracle refuses to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleLimits {
    pub max_decision_years: u32,
    pub max_technologies: usize,
    pub max_policies: u128,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_decision_years: 5,
            max_technologies: 4,
            max_policies: 5_000_000,
        }
    }
}

/// Per-scenario tables the oracle walks over. Built from the economics
/// operations directly; the search modules are never consulted.
struct Tables<'a> {
    config: &'a ScenarioConfig,
    n_years: usize,
    window_end: i32,
    /// Stay-first candidate actions per technology, targets sorted by id.
    actions: Vec<Vec<usize>>,
    absorbing: Vec<bool>,
    flows: Vec<[f64; 2]>,
    terminals: Vec<f64>,
    mig_cost: HashMap<(usize, usize), f64>,
    /// Rank of each technology in id order, for canonical state ordering.
    id_rank: Vec<usize>,
}

impl<'a> Tables<'a> {
    fn new(config: &'a ScenarioConfig) -> Result<Tables<'a>, EngineError> {
        if config.horizon.t_mig < 1 {
            return Err(EngineError::Unevaluated {
                reason: "migration window is empty".into(),
            });
        }
        let techs = &config.graph.technologies;
        let goal = config.goal_spec();
        let n_years = config.horizon.t_mig as usize + 1;
        let absorbing: Vec<bool> = techs.iter().map(|t| goal.absorbs(t)).collect();
        let actions: Vec<Vec<usize>> = techs
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut list = vec![i];
                list.extend(
                    crate::expectimax::possible_migrations(t, &config.graph, &goal)
                        .into_iter()
                        .map(|n| config.graph.index_of(&n.id).expect("neighbor indexed")),
                );
                list
            })
            .collect();
        let mut flows = vec![[0.0, 0.0]; techs.len() * n_years];
        let mut terminals = vec![0.0; techs.len() * n_years];
        for (ti, tech) in techs.iter().enumerate() {
            for offset in 0..n_years {
                let year = config.horizon.t_start + offset as i32;
                for gamma in 0..2u8 {
                    flows[ti * n_years + offset][gamma as usize] =
                        economics::discounted_net_flow(tech, year, gamma, config)?;
                }
                if offset > 0 {
                    terminals[ti * n_years + offset] =
                        economics::terminal_value(tech, year, config)?;
                }
            }
        }
        let mut mig_cost = HashMap::new();
        for (from_id, to_id) in &config.graph.edges {
            let (Some(fi), Some(ti)) =
                (config.graph.index_of(from_id), config.graph.index_of(to_id))
            else {
                continue;
            };
            let cost = economics::migration_capex(&techs[fi], &techs[ti], &config.costs)?;
            mig_cost.insert((fi, ti), cost.total);
        }
        let mut order: Vec<usize> = (0..techs.len()).collect();
        order.sort_by(|a, b| techs[*a].id.cmp(&techs[*b].id));
        let mut id_rank = vec![0; techs.len()];
        for (rank, tech) in order.into_iter().enumerate() {
            id_rank[tech] = rank;
        }
        Ok(Tables {
            config,
            n_years,
            window_end: config.horizon.window_end(),
            actions,
            absorbing,
            flows,
            terminals,
            mig_cost,
            id_rank,
        })
    }

    fn offset(&self, year: i32) -> usize {
        (year - self.config.horizon.t_start) as usize
    }

    fn flow(&self, tech: usize, year: i32, gamma: u8) -> f64 {
        self.flows[tech * self.n_years + self.offset(year)][gamma as usize]
    }

    fn terminal(&self, tech: usize, year: i32) -> f64 {
        self.terminals[tech * self.n_years + self.offset(year)]
    }

    fn cost(&self, from: usize, to: usize) -> Option<f64> {
        if from == to {
            Some(0.0)
        } else {
            self.mig_cost.get(&(from, to)).copied()
        }
    }

    /// A trajectory arriving at `tech` in `year` stops branching there.
    fn finalizes(&self, tech: usize, year: i32) -> bool {
        self.absorbing[tech] || year == self.window_end
    }

    fn state_index(&self, tech: usize, year: i32, gamma: u8) -> usize {
        (self.offset(year) * self.actions.len() + tech) * 2 + gamma as usize
    }

    /// Number of deterministic contingency policies, saturating.
    fn policy_count(&self) -> u128 {
        let start = self
            .config
            .graph
            .index_of(&self.config.start_technology)
            .unwrap_or(0);
        let mut memo: HashMap<(usize, i32), u128> = HashMap::new();
        self.count_from(start, self.config.horizon.t_start, &mut memo)
    }

    fn count_from(&self, tech: usize, year: i32, memo: &mut HashMap<(usize, i32), u128>) -> u128 {
        if let Some(&n) = memo.get(&(tech, year)) {
            return n;
        }
        let mut total: u128 = 0;
        for &action in &self.actions[tech] {
            let branch = if self.finalizes(action, year + 1) {
                1
            } else {
                // Independent sub-policies for the churn and no-churn branch.
                let sub = self.count_from(action, year + 1, memo);
                sub.saturating_mul(sub)
            };
            total = total.saturating_add(branch);
        }
        memo.insert((tech, year), total);
        total
    }
}

/// Position and running totals of one partially-resolved trajectory.
#[derive(Clone, Copy)]
struct Trajectory {
    tech: usize,
    year: i32,
    gamma: u8,
    probability: f64,
    accumulated: f64,
}

impl Trajectory {
    fn start(tech: usize, year: i32) -> Trajectory {
        Trajectory {
            tech,
            year,
            gamma: 0,
            probability: 1.0,
            accumulated: 0.0,
        }
    }
}

/// Walks the trajectory tree of a fixed action assignment, accumulating one
/// NPV term per churn sequence.
fn walk_assignment(
    tables: &Tables<'_>,
    action_at: &dyn Fn(usize, i32, u8) -> Option<usize>,
    at: Trajectory,
    bits: &mut Vec<u8>,
    out: &mut PolicyEvaluation,
) -> Result<(), EngineError> {
    let action = action_at(at.tech, at.year, at.gamma).ok_or_else(|| EngineError::Unevaluated {
        reason: format!(
            "policy has no action for ({}, {}, gamma={})",
            tables.config.graph.technologies[at.tech].id, at.year, at.gamma
        ),
    })?;
    let cost = tables
        .cost(at.tech, action)
        .ok_or_else(|| EngineError::Unevaluated {
            reason: format!(
                "policy migrates along a missing edge {} -> {}",
                tables.config.graph.technologies[at.tech].id,
                tables.config.graph.technologies[action].id
            ),
        })?;
    let value = at.accumulated + tables.flow(at.tech, at.year, at.gamma) - cost;
    if tables.finalizes(action, at.year + 1) {
        let total = value + tables.terminal(action, at.year + 1);
        out.expected_npv += at.probability * total;
        out.sequences.push(ChurnSequence {
            bits: bits.clone(),
            probability: at.probability,
        });
        return Ok(());
    }
    for next_gamma in 0..2u8 {
        bits.push(next_gamma);
        let next = Trajectory {
            tech: action,
            year: at.year + 1,
            gamma: next_gamma,
            probability: at.probability * tables.config.churn.probability_of(next_gamma),
            accumulated: value,
        };
        walk_assignment(tables, action_at, next, bits, out)?;
        bits.pop();
    }
    Ok(())
}

/// Expected NPV of `policy` by explicit churn-sequence enumeration.
pub fn evaluate_policy(
    config: &ScenarioConfig,
    policy: &Policy,
) -> Result<PolicyEvaluation, EngineError> {
    let tables = Tables::new(config)?;
    let start = config
        .graph
        .index_of(&config.start_technology)
        .ok_or_else(|| EngineError::Unevaluated {
            reason: "start technology not in graph".into(),
        })?;
    let mut out = PolicyEvaluation {
        expected_npv: 0.0,
        sequences: Vec::new(),
    };
    let lookup = |tech: usize, year: i32, gamma: u8| -> Option<usize> {
        let id = &config.graph.technologies[tech].id;
        match policy.get(year, id, gamma)? {
            Action::Stay => Some(tech),
            Action::Migrate { to } => config.graph.index_of(to),
        }
    };
    let mut bits = Vec::new();
    walk_assignment(
        &tables,
        &lookup,
        Trajectory::start(start, config.horizon.t_start),
        &mut bits,
        &mut out,
    )?;
    Ok(out)
}

/// Exhaustively enumerates contingency policies and returns the best.
///
/// Uses [`OracleLimits::default`]: at most 5 decision years, 4 technologies
/// and a few million policies; beyond that it refuses rather than sample.
pub fn oracle_best(config: &ScenarioConfig) -> Result<OracleOutcome, EngineError> {
    oracle_best_with_limits(config, &OracleLimits::default())
}

pub fn oracle_best_with_limits(
    config: &ScenarioConfig,
    limits: &OracleLimits,
) -> Result<OracleOutcome, EngineError> {
    if config.horizon.t_mig > limits.max_decision_years {
        return Err(EngineError::InstanceTooLarge {
            reason: format!(
                "{} decision years exceed the bound of {}",
                config.horizon.t_mig, limits.max_decision_years
            ),
        });
    }
    if config.graph.technologies.len() > limits.max_technologies {
        return Err(EngineError::InstanceTooLarge {
            reason: format!(
                "{} technologies exceed the bound of {}",
                config.graph.technologies.len(),
                limits.max_technologies
            ),
        });
    }
    let tables = Tables::new(config)?;
    let policies = tables.policy_count();
    if policies > limits.max_policies {
        return Err(EngineError::InstanceTooLarge {
            reason: format!(
                "{policies} contingency policies exceed the bound of {}",
                limits.max_policies
            ),
        });
    }
    let start = config
        .graph
        .index_of(&config.start_technology)
        .ok_or_else(|| EngineError::Unevaluated {
            reason: "start technology not in graph".into(),
        })?;

    let n_states = tables.actions.len() * tables.n_years * 2;
    let mut enumerator = Enumerator {
        tables: &tables,
        assignment: vec![None; n_states],
        reach_count: vec![0; n_states],
        pending: BTreeSet::new(),
        start,
        best: None,
    };
    let root = (config.horizon.t_start, tables.id_rank[start], 0u8, start);
    enumerator.reach_count[tables.state_index(start, config.horizon.t_start, 0)] = 1;
    enumerator.pending.insert(root);
    enumerator.recurse()?;

    let (expected_npv, assignment) = enumerator.best.ok_or_else(|| EngineError::Unevaluated {
        reason: "no policy enumerated".into(),
    })?;
    let mut policy = Policy::default();
    for (idx, choice) in assignment.iter().enumerate() {
        let Some(choice) = choice else { continue };
        let gamma = (idx % 2) as u8;
        let tech = (idx / 2) % tables.actions.len();
        let year = config.horizon.t_start + (idx / 2 / tables.actions.len()) as i32;
        let target = tables.actions[tech][*choice as usize];
        let action = if target == tech {
            Action::Stay
        } else {
            Action::Migrate {
                to: config.graph.technologies[target].id.clone(),
            }
        };
        policy.insert(year, &config.graph.technologies[tech].id, gamma, action);
    }
    Ok(OracleOutcome {
        expected_npv,
        policy,
    })
}

/// Depth-first lexicographic enumeration over reachable decision states.
///
/// States are assigned in (year, technology id, gamma) order and actions in
/// stay-first id order, so the first policy attaining the maximum is the
/// same one the search's tie-breaking rule selects.
struct Enumerator<'a> {
    tables: &'a Tables<'a>,
    /// Chosen action index per state, for currently-reachable states.
    assignment: Vec<Option<u8>>,
    /// How many assigned predecessor states make this state reachable.
    reach_count: Vec<u32>,
    /// Reachable but unassigned states, in canonical order.
    pending: BTreeSet<(i32, usize, u8, usize)>,
    start: usize,
    best: Option<(f64, Vec<Option<u8>>)>,
}

impl Enumerator<'_> {
    fn recurse(&mut self) -> Result<(), EngineError> {
        let Some(state) = self.pending.iter().next().copied() else {
            let evaluation = self.evaluate_current()?;
            let better = match &self.best {
                None => true,
                Some((best, _)) => evaluation > *best,
            };
            if better {
                self.best = Some((evaluation, self.assignment.clone()));
            }
            return Ok(());
        };
        let (year, _, gamma, tech) = state;
        self.pending.remove(&state);
        let idx = self.tables.state_index(tech, year, gamma);
        let n_actions = self.tables.actions[tech].len();
        for choice in 0..n_actions {
            self.assignment[idx] = Some(choice as u8);
            let target = self.tables.actions[tech][choice];
            let branches = self.successors(target, year);
            for succ in &branches {
                self.add_reach(*succ);
            }
            self.recurse()?;
            for succ in &branches {
                self.remove_reach(*succ);
            }
        }
        self.assignment[idx] = None;
        self.pending.insert(state);
        Ok(())
    }

    fn successors(&self, target: usize, year: i32) -> Vec<(i32, usize, u8, usize)> {
        if self.tables.finalizes(target, year + 1) {
            return Vec::new();
        }
        (0..2u8)
            .map(|gamma| (year + 1, self.tables.id_rank[target], gamma, target))
            .collect()
    }

    fn add_reach(&mut self, state: (i32, usize, u8, usize)) {
        let idx = self.tables.state_index(state.3, state.0, state.2);
        self.reach_count[idx] += 1;
        if self.reach_count[idx] == 1 && self.assignment[idx].is_none() {
            self.pending.insert(state);
        }
    }

    fn remove_reach(&mut self, state: (i32, usize, u8, usize)) {
        let idx = self.tables.state_index(state.3, state.0, state.2);
        self.reach_count[idx] -= 1;
        if self.reach_count[idx] == 0 {
            self.pending.remove(&state);
        }
    }

    fn evaluate_current(&self) -> Result<f64, EngineError> {
        let tables = self.tables;
        let mut out = PolicyEvaluation {
            expected_npv: 0.0,
            sequences: Vec::new(),
        };
        let assignment = &self.assignment;
        let lookup = |tech: usize, year: i32, gamma: u8| -> Option<usize> {
            assignment[tables.state_index(tech, year, gamma)]
                .map(|c| tables.actions[tech][c as usize])
        };
        let mut bits = Vec::new();
        walk_assignment(
            tables,
            &lookup,
            Trajectory::start(self.start, tables.config.horizon.t_start),
            &mut bits,
            &mut out,
        )?;
        Ok(out.expected_npv)
    }
}
