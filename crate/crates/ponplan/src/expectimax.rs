//! Expectimax search over (year, technology, churn outcome) states.
//!
//! The tree alternates maximizer nodes (the operator picks a migration or
//! stays), chance nodes (the yearly churn outcome resolves) and terminal
//! nodes (the goal rate is reached or the migration window closes). Both
//! evaluators share the same arithmetic: [`evaluate`] walks a materialized
//! tree, [`evaluate_memoized`] computes the identical value function by
//! dynamic programming over (technology, year) states, which the yearly
//! independence of churn makes exact.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::economics;
use crate::error::EngineError;
use crate::model::{GoalPolicy, GoalSpec, MigrationGraph, ScenarioConfig, Technology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Maximizer,
    Chance,
    Terminal,
}

/// One node of the search tree. `tech` indexes into the scenario graph's
/// technology list.
#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub tech: usize,
    pub year: i32,
    /// Churn outcome on the branch that reached this node (maximizer nodes
    /// below a chance node; 0 elsewhere).
    pub gamma: u8,
    /// Utility in C.U., NaN until the tree has been evaluated.
    pub value: f64,
    /// Index of the maximizing child (maximizer nodes only).
    pub chosen_child: Option<usize>,
    pub children: Vec<Node>,
}

impl Node {
    fn new(kind: NodeKind, tech: usize, year: i32, gamma: u8) -> Node {
        Node {
            kind,
            tech,
            year,
            gamma,
            value: f64::NAN,
            chosen_child: None,
            children: Vec::new(),
        }
    }

    pub fn tech_id<'a>(&self, config: &'a ScenarioConfig) -> &'a str {
        &config.graph.technologies[self.tech].id
    }

    /// Total node count of this subtree.
    pub fn size(&self) -> u64 {
        1 + self.children.iter().map(Node::size).sum::<u64>()
    }
}

/// Action taken at a decision state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action")]
pub enum Action {
    Stay,
    Migrate { to: String },
}

/// A contingency plan: the chosen action at every reachable
/// (year, technology, churn outcome) decision state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Policy {
    decisions: BTreeMap<(i32, String, u8), Action>,
}

impl Policy {
    pub fn insert(&mut self, year: i32, technology: &str, gamma: u8, action: Action) {
        self.decisions
            .insert((year, technology.to_owned(), gamma), action);
    }

    pub fn get(&self, year: i32, technology: &str, gamma: u8) -> Option<&Action> {
        self.decisions.get(&(year, technology.to_owned(), gamma))
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(i32, String, u8), &Action)> {
        self.decisions.iter()
    }

    /// Migration steps along the no-churn branch, the modal trajectory the
    /// plan reports as "the" migration path.
    pub fn reporting_path(&self, config: &ScenarioConfig) -> Vec<MigrationStep> {
        let mut path = Vec::new();
        let goal = config.goal_spec();
        let mut tech = config.start_technology.clone();
        let mut year = config.horizon.t_start;
        while year < config.horizon.window_end() {
            match self.get(year, &tech, 0) {
                Some(Action::Migrate { to }) => {
                    path.push(MigrationStep {
                        year: year + 1,
                        technology: to.clone(),
                    });
                    let absorbed = config
                        .graph
                        .technology(to)
                        .map(|t| goal.absorbs(t))
                        .unwrap_or(false);
                    if absorbed {
                        break;
                    }
                    tech = to.clone();
                }
                Some(Action::Stay) | None => {}
            }
            year += 1;
        }
        path
    }
}

impl Serialize for Policy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        #[derive(Serialize)]
        struct Row<'a> {
            year: i32,
            technology: &'a str,
            gamma: u8,
            #[serde(flatten)]
            action: &'a Action,
        }
        let mut seq = serializer.serialize_seq(Some(self.decisions.len()))?;
        for ((year, technology, gamma), action) in &self.decisions {
            seq.serialize_element(&Row {
                year: *year,
                technology,
                gamma: *gamma,
                action,
            })?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Policy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Row {
            year: i32,
            technology: String,
            gamma: u8,
            #[serde(flatten)]
            action: Action,
        }
        let rows = Vec::<Row>::deserialize(deserializer)?;
        let mut policy = Policy::default();
        for row in rows {
            policy.insert(row.year, &row.technology, row.gamma, row.action);
        }
        Ok(policy)
    }
}

/// One step of the reported migration path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationStep {
    pub year: i32,
    pub technology: String,
}

/// Outcome of evaluating a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    /// Root utility: expected NPV over the network life-cycle.
    pub expected_npv: f64,
    /// Migrations along the no-churn reporting branch, chronological.
    pub path: Vec<MigrationStep>,
    /// Full contingency policy over all reachable decision states.
    pub policy: Policy,
    pub goal_used: GoalPolicy,
}

/// Migration targets available from `tech`: its out-neighbors, filtered by
/// the goal policy. The "stay" option is not part of this list; maximizer
/// nodes add it separately.
pub fn possible_migrations<'a>(
    tech: &Technology,
    graph: &'a MigrationGraph,
    goal: &GoalSpec,
) -> Vec<&'a Technology> {
    graph
        .out_neighbors(&tech.id)
        .into_iter()
        .filter(|t| t.id != tech.id && goal.admits(t))
        .collect()
}

/// Precomputed per-state economics shared by the evaluators.
struct Prepared<'a> {
    config: &'a ScenarioConfig,
    start: usize,
    window_end: i32,
    n_years: usize,
    /// Candidate targets per technology, sorted by id.
    targets: Vec<Vec<usize>>,
    absorbing: Vec<bool>,
    /// Discounted net operating flow per (tech, year offset, gamma).
    flows: Vec<[f64; 2]>,
    /// Terminal utility per (tech, year offset).
    terminals: Vec<f64>,
    /// Migration CAPEX per graph edge.
    mig_cost: HashMap<(usize, usize), f64>,
}

impl<'a> Prepared<'a> {
    fn new(config: &'a ScenarioConfig) -> Result<Prepared<'a>, EngineError> {
        if config.horizon.t_mig < 1 {
            return Err(EngineError::Unevaluated {
                reason: "migration window is empty".into(),
            });
        }
        let techs = &config.graph.technologies;
        let goal = config.goal_spec();
        let start = config
            .graph
            .index_of(&config.start_technology)
            .ok_or_else(|| EngineError::Unevaluated {
                reason: format!("start technology {} not in graph", config.start_technology),
            })?;
        let window_end = config.horizon.window_end();
        let n_years = config.horizon.t_mig as usize + 1;

        let absorbing: Vec<bool> = techs.iter().map(|t| goal.absorbs(t)).collect();
        let targets: Vec<Vec<usize>> = techs
            .iter()
            .map(|t| {
                possible_migrations(t, &config.graph, &goal)
                    .into_iter()
                    .map(|n| config.graph.index_of(&n.id).expect("neighbor indexed"))
                    .collect()
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

        let prep = Prepared {
            config,
            start,
            window_end,
            n_years,
            targets,
            absorbing,
            flows,
            terminals,
            mig_cost,
        };
        prep.check_goal_reachable()?;
        Ok(prep)
    }

    fn check_goal_reachable(&self) -> Result<(), EngineError> {
        let mut seen = vec![false; self.targets.len()];
        let mut queue = VecDeque::new();
        seen[self.start] = true;
        queue.push_back((self.start, 0u32));
        while let Some((tech, hops)) = queue.pop_front() {
            if self.absorbing[tech] {
                return Ok(());
            }
            if hops >= self.config.horizon.t_mig {
                continue;
            }
            for &next in &self.targets[tech] {
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back((next, hops + 1));
                }
            }
        }
        Err(EngineError::GoalUnreachable {
            reason: format!(
                "no {} technology at >= {} Mbps is reachable from {} within {} years",
                self.config.goal,
                self.config.goal_rate,
                self.config.start_technology,
                self.config.horizon.t_mig
            ),
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

    fn migration_cost(&self, from: usize, to: usize) -> Option<f64> {
        if from == to {
            Some(0.0)
        } else {
            self.mig_cost.get(&(from, to)).copied()
        }
    }

    /// Whether a chance node for `tech` at `year` collapses to a terminal.
    fn is_terminal_at(&self, tech: usize, year: i32) -> bool {
        self.absorbing[tech] || year == self.window_end
    }

    /// Exact node count of the naive tree, saturating at `u128::MAX`.
    fn count_nodes(&self) -> u128 {
        let mut memo: HashMap<(usize, i32), u128> = HashMap::new();
        self.count_max(self.start, self.config.horizon.t_start, &mut memo)
    }

    fn count_max(&self, tech: usize, year: i32, memo: &mut HashMap<(usize, i32), u128>) -> u128 {
        if let Some(&n) = memo.get(&(tech, year)) {
            return n;
        }
        let mut total: u128 = 1;
        for action in self.actions(tech) {
            let child = if self.is_terminal_at(action, year + 1) {
                1
            } else {
                let sub = self.count_max(action, year + 1, memo);
                1u128.saturating_add(sub.saturating_mul(2))
            };
            total = total.saturating_add(child);
        }
        memo.insert((tech, year), total);
        total
    }

    /// Candidate actions in canonical order: stay first, then migration
    /// targets sorted by id. Ties at maximizer nodes resolve to the first
    /// candidate, which realizes the no-migration-then-smallest-id rule.
    fn actions(&self, tech: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(tech).chain(self.targets[tech].iter().copied())
    }
}

/// Builds the full Expectimax tree for a validated scenario.
///
/// The root is a maximizer at (start technology, start year). Chance nodes
/// collapse to terminals when their technology meets the goal rate or the
/// migration window closes; otherwise they branch on the churn outcome.
/// Refuses to materialize trees above `config.max_tree_nodes`.
pub fn build_tree(config: &ScenarioConfig) -> Result<Node, EngineError> {
    let prep = Prepared::new(config)?;
    let estimated = prep.count_nodes();
    if estimated > config.max_tree_nodes as u128 {
        return Err(EngineError::TreeTooLarge {
            estimated,
            cap: config.max_tree_nodes,
        });
    }
    Ok(build_max(&prep, prep.start, config.horizon.t_start, 0))
}

fn build_max(prep: &Prepared<'_>, tech: usize, year: i32, gamma: u8) -> Node {
    let mut node = Node::new(NodeKind::Maximizer, tech, year, gamma);
    for action in prep.actions(tech) {
        node.children.push(build_child(prep, action, year + 1));
    }
    node
}

fn build_child(prep: &Prepared<'_>, tech: usize, year: i32) -> Node {
    if prep.is_terminal_at(tech, year) {
        Node::new(NodeKind::Terminal, tech, year, 0)
    } else {
        let mut node = Node::new(NodeKind::Chance, tech, year, 0);
        node.children.push(build_max(prep, tech, year, 0));
        node.children.push(build_max(prep, tech, year, 1));
        node
    }
}

/// Evaluates a built tree bottom-up and extracts the optimal plan.
///
/// Terminal nodes take the no-further-churn terminal utility; chance nodes
/// take the churn-probability-weighted average of their children; maximizer
/// nodes add their year's discounted net flow and pick the best child net
/// of the (undiscounted) migration CAPEX, ties resolving to "stay" first
/// and then to the smallest target id.
pub fn evaluate(root: &mut Node, config: &ScenarioConfig) -> Result<PlanResult, EngineError> {
    let prep = Prepared::new(config)?;
    eval_node(root, &prep)?;
    if root.kind != NodeKind::Maximizer {
        return Err(EngineError::Unevaluated {
            reason: "root must be a maximizer node".into(),
        });
    }
    let mut policy = Policy::default();
    collect_policy(root, &prep, &mut policy);
    let path = extract_path(root, &prep);
    Ok(PlanResult {
        expected_npv: root.value,
        path,
        policy,
        goal_used: config.goal,
    })
}

fn eval_node(node: &mut Node, prep: &Prepared<'_>) -> Result<(), EngineError> {
    match node.kind {
        NodeKind::Terminal => {
            if !node.children.is_empty() {
                return Err(EngineError::Unevaluated {
                    reason: "terminal node with children".into(),
                });
            }
            node.value = prep.terminal(node.tech, node.year);
        }
        NodeKind::Chance => {
            if node.children.len() != 2 {
                return Err(EngineError::Unevaluated {
                    reason: "chance node must have exactly two children".into(),
                });
            }
            let mut value = 0.0;
            for child in &mut node.children {
                eval_node(child, prep)?;
                value += prep.config.churn.probability_of(child.gamma) * child.value;
            }
            node.value = value;
        }
        NodeKind::Maximizer => {
            if node.children.is_empty() {
                return Err(EngineError::Unevaluated {
                    reason: "maximizer node without children".into(),
                });
            }
            let mut best = f64::NEG_INFINITY;
            let mut chosen = 0;
            for i in 0..node.children.len() {
                eval_node(&mut node.children[i], prep)?;
                let child = &node.children[i];
                let cost = prep.migration_cost(node.tech, child.tech).ok_or_else(|| {
                    EngineError::Unevaluated {
                        reason: format!(
                            "no migration edge {} -> {}",
                            prep.config.graph.technologies[node.tech].id,
                            prep.config.graph.technologies[child.tech].id
                        ),
                    }
                })?;
                let candidate = child.value - cost;
                if candidate > best {
                    best = candidate;
                    chosen = i;
                }
            }
            node.chosen_child = Some(chosen);
            node.value = prep.flow(node.tech, node.year, node.gamma) + best;
        }
    }
    Ok(())
}

fn collect_policy(node: &Node, prep: &Prepared<'_>, policy: &mut Policy) {
    if node.kind == NodeKind::Maximizer {
        let chosen = &node.children[node.chosen_child.expect("evaluated")];
        let action = if chosen.tech == node.tech {
            Action::Stay
        } else {
            Action::Migrate {
                to: prep.config.graph.technologies[chosen.tech].id.clone(),
            }
        };
        policy.insert(
            node.year,
            &prep.config.graph.technologies[node.tech].id,
            node.gamma,
            action,
        );
    }
    for child in &node.children {
        collect_policy(child, prep, policy);
    }
}

fn extract_path(root: &Node, prep: &Prepared<'_>) -> Vec<MigrationStep> {
    let mut path = Vec::new();
    let mut node = root;
    loop {
        match node.kind {
            NodeKind::Maximizer => {
                let chosen = &node.children[node.chosen_child.expect("evaluated")];
                if chosen.tech != node.tech {
                    path.push(MigrationStep {
                        year: chosen.year,
                        technology: prep.config.graph.technologies[chosen.tech].id.clone(),
                    });
                }
                node = chosen;
            }
            // Follow the no-churn branch when reporting the path.
            NodeKind::Chance => node = &node.children[0],
            NodeKind::Terminal => return path,
        }
    }
}

/// Computes the same plan as [`evaluate`] without materializing the tree.
///
/// Exploits the Markov property: the subtree below a maximizer depends only
/// on (technology, year), and the churn outcome shifts the node's own flow
/// but never its choice. Values match the tree evaluator bit for bit
/// because the arithmetic mirrors its association.
pub fn evaluate_memoized(config: &ScenarioConfig) -> Result<PlanResult, EngineError> {
    let prep = Prepared::new(config)?;
    let mut memo: Vec<Option<(f64, usize)>> = vec![None; prep.targets.len() * prep.n_years];
    let root_cont = continuation(&prep, prep.start, config.horizon.t_start, &mut memo);
    let expected_npv = prep.flow(prep.start, config.horizon.t_start, 0) + root_cont.0;

    let mut policy = Policy::default();
    let t_start = config.horizon.t_start;
    let mut seen: BTreeSet<(i32, usize)> = BTreeSet::new();
    let mut queue: VecDeque<(usize, i32)> = VecDeque::new();
    seen.insert((t_start, prep.start));
    queue.push_back((prep.start, t_start));
    while let Some((tech, year)) = queue.pop_front() {
        let idx = tech * prep.n_years + prep.offset(year);
        let (_, choice) = memo[idx].expect("reachable states were evaluated");
        let actions: Vec<usize> = prep.actions(tech).collect();
        let target = actions[choice];
        let action = if target == tech {
            Action::Stay
        } else {
            Action::Migrate {
                to: config.graph.technologies[target].id.clone(),
            }
        };
        let tech_id = &config.graph.technologies[tech].id;
        if year == t_start {
            policy.insert(year, tech_id, 0, action);
        } else {
            policy.insert(year, tech_id, 0, action.clone());
            policy.insert(year, tech_id, 1, action);
        }
        for next in prep.actions(tech) {
            if !prep.is_terminal_at(next, year + 1)
                && year + 1 < prep.window_end
                && seen.insert((year + 1, next))
            {
                queue.push_back((next, year + 1));
            }
        }
    }

    let path = policy.reporting_path(config);
    Ok(PlanResult {
        expected_npv,
        path,
        policy,
        goal_used: config.goal,
    })
}

/// Value and argmax of the maximizer's action choice at (tech, year),
/// excluding the node's own flow term.
fn continuation(
    prep: &Prepared<'_>,
    tech: usize,
    year: i32,
    memo: &mut Vec<Option<(f64, usize)>>,
) -> (f64, usize) {
    let idx = tech * prep.n_years + prep.offset(year);
    if let Some(v) = memo[idx] {
        return v;
    }
    let mut best = f64::NEG_INFINITY;
    let mut chosen = 0;
    for (i, action) in prep.actions(tech).enumerate() {
        let cost = if action == tech {
            0.0
        } else {
            prep.migration_cost(tech, action)
                .expect("targets come from graph edges")
        };
        let value = child_value(prep, action, year + 1, memo) - cost;
        if value > best {
            best = value;
            chosen = i;
        }
    }
    memo[idx] = Some((best, chosen));
    (best, chosen)
}

fn child_value(
    prep: &Prepared<'_>,
    tech: usize,
    year: i32,
    memo: &mut Vec<Option<(f64, usize)>>,
) -> f64 {
    if prep.is_terminal_at(tech, year) {
        return prep.terminal(tech, year);
    }
    let cont = continuation(prep, tech, year, memo).0;
    let churn = &prep.config.churn;
    // Mirrors the tree's chance-node association exactly.
    let mut value = 0.0;
    for gamma in 0..2u8 {
        value += churn.probability_of(gamma) * (prep.flow(tech, year, gamma) + cont);
    }
    value
}

/// Exact node count the naive tree would materialize for this scenario.
pub fn tree_node_count(config: &ScenarioConfig) -> Result<u128, EngineError> {
    Ok(Prepared::new(config)?.count_nodes())
}
