//! Rounding fractional ER equilibria into integral allocations with earning
//! guarantees, rebalancing to (n-1)-EF1, and balanced fPO allocations.
//!
//! The two rounding entry points share a four-phase engine over the acyclic
//! payment forest:
//!   1. leaf chores go to their parent agents;
//!   2. a BFS pass allocates low-paying chores greedily up to unit earning,
//!      pushing leftovers down; agents already above unit earning push all
//!      their child chores down and drop out;
//!   3. every surviving (high-paying, shared) chore keeps only its
//!      best-earning child edge;
//!   4. each surviving tree has one chore per agent minus one; the agent
//!      with the highest earning sits out and the rest are matched.
//!
//! The rebalancing pass re-runs the engine with surgical overrides (re-rooted
//! trees, forced heirs for a contested chore) until the allocation is
//! (n-1)-EF1, mirroring the unrolling argument tree by tree.

use crate::instances::{ErInstance, Instance, IntegralAllocation, PaymentVector};
use crate::market::{
    bundle_payment, earning_views, make_acyclic, mpb_certificate, ErEquilibrium, MpbGraph,
    PaymentGraph,
};
use crate::verify::{is_fair, Criterion};
use crate::{fmt_q, qi, qr, Error, Q, Result};
use num::{One, Zero};
use std::collections::BTreeMap;

// --- Rounding engine ---------------------------------------------------------

/// Surgical overrides for re-runs of the rounding engine.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Preferred tree roots, first match wins over the lowest-index default.
    pub preferred_roots: Vec<usize>,
    /// `(agent, chore)`: during the agent's greedy pass, consider the chore
    /// after all other child chores.
    pub visit_last: Vec<(usize, usize)>,
    /// Designated heir for a chore: overrides both the push-down target and
    /// the pruning choice. When the heir is the chore's parent agent, that
    /// agent takes the chore unconditionally during its greedy pass.
    pub heir: BTreeMap<usize, usize>,
}

/// How a chore ended up with its owner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignedHow {
    Leaf,
    TakenByParent,
    PushedDown,
    Orphaned,
    Matched,
}

/// Per-tree report of the matching phase, used by the rebalancing pass.
#[derive(Debug, Clone)]
pub struct TreeReport {
    pub agents: Vec<usize>,
    pub chores: Vec<usize>,
    /// the agent of this tree with no surviving parent edge
    pub root: usize,
    /// the root's original parent chore, with the agent that kept it
    pub root_lost_parent: Option<(usize, usize)>,
    /// agents of this tree that lost one of their child chores in phase 2
    pub lost_child: Vec<(usize, usize)>,
    /// the exempt (highest-earning) agent of the matching phase
    pub exempt: usize,
}

/// Outcome of one engine run.
#[derive(Debug, Clone)]
pub struct RoundingOutcome {
    pub alloc: IntegralAllocation,
    pub trees: Vec<TreeReport>,
    pub assigned: Vec<(AssignedHow, usize)>,
    /// allocation snapshots after phases 1 and 2 (bundles only)
    pub phase1: Vec<Vec<usize>>,
    pub phase2: Vec<Vec<usize>>,
    pub blocked: Vec<bool>,
}

struct Engine<'a> {
    eq: &'a ErEquilibrium,
    n: usize,
    m: usize,
    low: Vec<bool>,
    // orientation
    parent_of_agent: Vec<Option<usize>>,
    parent_of_chore: Vec<usize>,
    children_of_agent: Vec<Vec<usize>>,
    children_of_chore: Vec<Vec<usize>>,
    bfs_order: Vec<usize>,
    // live state
    chore_alive: Vec<bool>,
    edge_dead: Vec<Vec<bool>>, // [i][j]
    bundles: Vec<Vec<usize>>,
    earning: Vec<Q>,
    assigned: Vec<Option<(AssignedHow, usize)>>,
    blocked: Vec<bool>,
    visited: Vec<bool>,
    lost_child: Vec<(usize, usize)>,
    /// chore -> agent that kept its edge through pruning
    pruned_keeper: BTreeMap<usize, usize>,
    overrides: &'a Overrides,
}

impl<'a> Engine<'a> {
    fn new(er: &'a ErInstance, eq: &'a ErEquilibrium, low_threshold: &Q, overrides: &'a Overrides) -> Engine<'a> {
        let (n, m) = (er.n(), er.m());
        let graph = PaymentGraph::of(eq);
        let low = (0..m).map(|j| eq.p.get(j) <= low_threshold).collect();

        // orient each tree from its root: an override agent if the tree has
        // one, otherwise the lowest-index agent
        let mut parent_of_agent = vec![None; n];
        let mut parent_of_chore = vec![usize::MAX; m];
        let mut children_of_agent = vec![Vec::new(); n];
        let mut children_of_chore = vec![Vec::new(); m];
        let mut seen_agent = vec![false; n];
        let mut seen_chore = vec![false; m];
        let mut bfs_order = Vec::with_capacity(n);
        // discover trees by lowest agent, then pick the root
        let mut tree_members: Vec<Vec<usize>> = Vec::new(); // agent lists
        let mut tree_of_agent = vec![usize::MAX; n];
        {
            let mut seen = vec![false; n];
            for start in 0..n {
                if seen[start] {
                    continue;
                }
                let id = tree_members.len();
                let mut members = Vec::new();
                let mut queue = std::collections::VecDeque::from([start]);
                seen[start] = true;
                while let Some(i) = queue.pop_front() {
                    members.push(i);
                    tree_of_agent[i] = id;
                    for &j in &graph.agent_adj[i] {
                        for &i2 in &graph.chore_adj[j] {
                            if !seen[i2] {
                                seen[i2] = true;
                                queue.push_back(i2);
                            }
                        }
                    }
                }
                members.sort_unstable();
                tree_members.push(members);
            }
        }
        for members in &tree_members {
            let root = overrides
                .preferred_roots
                .iter()
                .find(|r| members.contains(r))
                .copied()
                .unwrap_or(members[0]);
            let mut queue = std::collections::VecDeque::from([root]);
            seen_agent[root] = true;
            while let Some(i) = queue.pop_front() {
                bfs_order.push(i);
                for &j in &graph.agent_adj[i] {
                    if seen_chore[j] {
                        continue;
                    }
                    seen_chore[j] = true;
                    parent_of_chore[j] = i;
                    children_of_agent[i].push(j);
                    for &i2 in &graph.chore_adj[j] {
                        if seen_agent[i2] {
                            continue;
                        }
                        seen_agent[i2] = true;
                        parent_of_agent[i2] = Some(j);
                        children_of_chore[j].push(i2);
                        queue.push_back(i2);
                    }
                }
            }
        }

        Engine {
            eq,
            n,
            m,
            low,
            parent_of_agent,
            parent_of_chore,
            children_of_agent,
            children_of_chore,
            bfs_order,
            chore_alive: vec![true; m],
            edge_dead: vec![vec![false; m]; n],
            bundles: vec![Vec::new(); n],
            earning: vec![Q::zero(); n],
            assigned: vec![None; m],
            blocked: vec![false; n],
            visited: vec![false; n],
            lost_child: Vec::new(),
            pruned_keeper: BTreeMap::new(),
            overrides,
        }
    }

    fn assign(&mut self, chore: usize, agent: usize, how: AssignedHow) {
        debug_assert!(self.chore_alive[chore]);
        self.chore_alive[chore] = false;
        self.bundles[agent].push(chore);
        self.earning[agent] = &self.earning[agent] + self.eq.p.get(chore);
        self.assigned[chore] = Some((how, agent));
    }

    /// live child agents of a chore
    fn live_children(&self, j: usize) -> Vec<usize> {
        self.children_of_chore[j]
            .iter()
            .copied()
            .filter(|&i| !self.edge_dead[i][j])
            .collect()
    }

    /// live child chores of an agent
    fn live_child_chores(&self, i: usize) -> Vec<usize> {
        self.children_of_agent[i]
            .iter()
            .copied()
            .filter(|&j| self.chore_alive[j])
            .collect()
    }

    /// push-down target: the heir override, else the child earning the most
    /// (ties to the lowest index)
    fn push_target(&self, j: usize, arbitrary: bool) -> usize {
        if let Some(&h) = self.overrides.heir.get(&j) {
            let kids = self.live_children(j);
            if kids.contains(&h) {
                return h;
            }
        }
        let kids = self.live_children(j);
        debug_assert!(!kids.is_empty());
        if arbitrary {
            kids[0]
        } else {
            kids.iter()
                .copied()
                .max_by(|&a, &b| self.eq.q(a, j).cmp(self.eq.q(b, j)).then(b.cmp(&a)))
                .unwrap()
        }
    }

    fn phase1_leaves(&mut self) {
        for j in 0..self.m {
            if self.children_of_chore[j].is_empty() {
                let parent = self.parent_of_chore[j];
                self.assign(j, parent, AssignedHow::Leaf);
            }
        }
    }

    /// over-budget agent: push every remaining child chore down, then sever
    /// the parent edge; orphaned parent chores fall back to their own parent
    /// agents, possibly cascading
    fn block(&mut self, i: usize) {
        if self.blocked[i] {
            return;
        }
        self.blocked[i] = true;
        for j in self.live_child_chores(i) {
            let arbitrary = self.low[j];
            let heir = self.push_target(j, arbitrary);
            self.lost_child.push((i, j));
            self.assign(j, heir, AssignedHow::PushedDown);
        }
        if let Some(j0) = self.parent_of_agent[i] {
            if self.chore_alive[j0] && !self.edge_dead[i][j0] {
                self.edge_dead[i][j0] = true;
                if self.live_children(j0).is_empty() {
                    let i0 = self.parent_of_chore[j0];
                    self.assign(j0, i0, AssignedHow::Orphaned);
                    if self.earning[i0] > Q::one() && self.visited[i0] && !self.blocked[i0] {
                        self.block(i0);
                    }
                }
            }
        }
    }

    fn phase2_allocate_low(&mut self) {
        for idx in 0..self.bfs_order.len() {
            let i = self.bfs_order[idx];
            self.visited[i] = true;
            if self.blocked[i] {
                continue;
            }
            if self.earning[i] > Q::one() {
                self.block(i);
                continue;
            }
            // greedy pass over live low child chores, deferred ones last
            let mut order: Vec<usize> = Vec::new();
            let mut deferred: Vec<usize> = Vec::new();
            for j in self.live_child_chores(i) {
                if !self.low[j] {
                    continue;
                }
                if self.overrides.visit_last.contains(&(i, j)) {
                    deferred.push(j);
                } else {
                    order.push(j);
                }
            }
            order.extend(deferred);
            for j in order {
                let forced = self.overrides.heir.get(&j) == Some(&i);
                if forced || &self.earning[i] + self.eq.p.get(j) <= Q::one() {
                    self.assign(j, i, AssignedHow::TakenByParent);
                } else {
                    let heir = self.push_target(j, true);
                    self.lost_child.push((i, j));
                    self.assign(j, heir, AssignedHow::PushedDown);
                }
            }
        }
    }

    fn phase3_prune(&mut self) {
        for j in 0..self.m {
            if !self.chore_alive[j] {
                continue;
            }
            let kids = self.live_children(j);
            debug_assert!(!kids.is_empty(), "surviving chores are shared");
            let keeper = self.push_target(j, false);
            self.pruned_keeper.insert(j, keeper);
            for &i in &kids {
                if i != keeper {
                    self.edge_dead[i][j] = true;
                }
            }
        }
    }

    fn phase4_match(&mut self) -> Result<Vec<TreeReport>> {
        // components of the surviving graph
        let mut comp_of_agent = vec![usize::MAX; self.n];
        let mut comps: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for start in 0..self.n {
            if comp_of_agent[start] != usize::MAX || self.blocked[start] {
                continue;
            }
            let id = comps.len();
            let mut agents = Vec::new();
            let mut chores = Vec::new();
            let mut queue = std::collections::VecDeque::from([start]);
            comp_of_agent[start] = id;
            while let Some(i) = queue.pop_front() {
                agents.push(i);
                let mut adjacent = Vec::new();
                for j in 0..self.m {
                    if !self.chore_alive[j] {
                        continue;
                    }
                    let touches = (self.parent_of_chore[j] == i && !self.edge_dead[i][j])
                        || (self.children_of_chore[j].contains(&i) && !self.edge_dead[i][j]);
                    if touches {
                        adjacent.push(j);
                    }
                }
                for j in adjacent {
                    if !chores.contains(&j) {
                        chores.push(j);
                    }
                    let p = self.parent_of_chore[j];
                    let mut nbrs = vec![p];
                    nbrs.extend(self.live_children(j));
                    for i2 in nbrs {
                        if i2 != i && comp_of_agent[i2] == usize::MAX && !self.edge_dead[i2][j] {
                            comp_of_agent[i2] = id;
                            queue.push_back(i2);
                        }
                    }
                }
            }
            agents.sort_unstable();
            chores.sort_unstable();
            comps.push((agents, chores));
        }

        let mut reports = Vec::new();
        for (agents, chores) in comps {
            if agents.len() != chores.len() + 1 {
                return Err(Error::InvariantViolation(format!(
                    "matching tree has {} agents and {} chores",
                    agents.len(),
                    chores.len()
                )));
            }
            // tree root: the agent with no surviving parent edge
            let root = *agents
                .iter()
                .find(|&&i| match self.parent_of_agent[i] {
                    None => true,
                    Some(j) => !self.chore_alive[j] || self.edge_dead[i][j],
                })
                .ok_or_else(|| Error::InvariantViolation("tree without a root".into()))?;
            let root_lost_parent = self.parent_of_agent[root].map(|j| {
                let keeper = match self.pruned_keeper.get(&j) {
                    Some(&kept_child) => kept_child,
                    None => self.assigned[j].expect("lost chore was assigned").1,
                };
                (j, keeper)
            });
            let lost_child: Vec<(usize, usize)> = self
                .lost_child
                .iter()
                .copied()
                .filter(|(i, _)| agents.contains(i))
                .collect();
            // exempt agent: highest earning, ties to the lowest index
            let exempt = agents
                .iter()
                .copied()
                .max_by(|&a, &b| self.earning[a].cmp(&self.earning[b]).then(b.cmp(&a)))
                .unwrap();
            // re-root at the exempt agent: each chore goes to its neighbor
            // pointing away from it
            if !chores.is_empty() {
                let mut assigned_to: BTreeMap<usize, usize> = BTreeMap::new();
                let mut queue = std::collections::VecDeque::from([exempt]);
                let mut seen = vec![exempt];
                while let Some(i) = queue.pop_front() {
                    for &j in &chores {
                        if assigned_to.contains_key(&j) {
                            continue;
                        }
                        let p = self.parent_of_chore[j];
                        let kid = *self.pruned_keeper.get(&j).expect("phase-3 chore");
                        let (a, b) = (p, kid);
                        if a == i || b == i {
                            let other = if a == i { b } else { a };
                            if !seen.contains(&other) {
                                assigned_to.insert(j, other);
                                seen.push(other);
                                queue.push_back(other);
                            }
                        }
                    }
                }
                if assigned_to.len() != chores.len() {
                    return Err(Error::InvariantViolation("phase-4 matching incomplete".into()));
                }
                for (j, i) in assigned_to {
                    self.assign(j, i, AssignedHow::Matched);
                }
            }
            reports.push(TreeReport {
                agents,
                chores,
                root,
                root_lost_parent,
                lost_child,
                exempt,
            });
        }
        // every chore must be assigned by now
        if let Some(j) = (0..self.m).find(|&j| self.chore_alive[j]) {
            return Err(Error::InvariantViolation(format!("chore {j} never assigned")));
        }
        Ok(reports)
    }

    fn run(mut self) -> Result<RoundingOutcome> {
        self.phase1_leaves();
        let phase1 = self.bundles.clone();
        self.phase2_allocate_low();
        let phase2 = self.bundles.clone();
        self.phase3_prune();
        let trees = self.phase4_match()?;
        let alloc = IntegralAllocation::new(self.bundles, self.m)?;
        let assigned = self
            .assigned
            .into_iter()
            .map(|a| a.expect("all chores assigned"))
            .collect();
        Ok(RoundingOutcome {
            alloc,
            trees,
            assigned,
            phase1,
            phase2,
            blocked: self.blocked,
        })
    }
}

fn run_engine(
    er: &ErInstance,
    eq: &ErEquilibrium,
    low_threshold: &Q,
    overrides: &Overrides,
) -> Result<RoundingOutcome> {
    Engine::new(er, eq, low_threshold, overrides).run()
}

// --- Entry points -------------------------------------------------------------

fn check_uniform(er: &ErInstance, beta: &Q) -> Result<()> {
    for i in 0..er.n() {
        if er.e(i) != &Q::one() {
            return Err(Error::PreconditionViolated(format!(
                "earning requirement e[{i}] must be 1"
            )));
        }
    }
    for j in 0..er.m() {
        if er.c(j) != beta {
            return Err(Error::PreconditionViolated(format!(
                "earning limit c[{j}] must be {}",
                fmt_q(beta)
            )));
        }
    }
    Ok(())
}

/// Rounds a beta = 1/2 ER equilibrium (e_i = 1, c_j = 1/2, m >= 2n) into an
/// integral MPB allocation with, for every agent, earning at least 1/2 and
/// either at most 1 after dropping one chore, or exactly two high-paying
/// chores and at most 1/2 after dropping both. Together these make the
/// allocation 2-EF2 (per agent: 2-EF1 or EF2) and fPO.
pub fn round_er_half(eq: &ErEquilibrium, er: &ErInstance) -> Result<(IntegralAllocation, PaymentVector)> {
    let n = er.n();
    let m = er.m();
    let beta = qr(1, 2);
    check_uniform(er, &beta)?;
    if m < 2 * n {
        return Err(Error::PreconditionViolated(format!(
            "need m >= 2n for the beta = 1/2 rounding, got n={n}, m={m}"
        )));
    }
    let acyclic = make_acyclic(eq, er)?;
    let out = run_engine(er, &acyclic, &beta, &Overrides::default())?;
    let p = acyclic.p.clone();
    assert_half_bounds(&out.alloc, &p, er)?;
    Ok((out.alloc, p))
}

fn assert_half_bounds(alloc: &IntegralAllocation, p: &PaymentVector, er: &ErInstance) -> Result<()> {
    if !mpb_certificate(alloc, p, &er.base) {
        return Err(Error::InvariantViolation("rounding broke the MPB certificate".into()));
    }
    let half = qr(1, 2);
    for i in 0..er.n() {
        let views = earning_views(alloc.bundle(i), p, 1);
        if views.total < half {
            return Err(Error::InvariantViolation(format!(
                "agent {i} earns {} < 1/2 after rounding",
                fmt_q(&views.total)
            )));
        }
        let high = alloc.bundle(i).iter().filter(|&&j| p.get(j) > &half).count();
        let two_high_ok = high == 2 && earning_views(alloc.bundle(i), p, 2).drop_top_k <= half;
        if views.drop_top_k > Q::one() && !two_high_ok {
            return Err(Error::InvariantViolation(format!(
                "agent {i} violates the earning cap: p_-1 = {}, |H| = {high}",
                fmt_q(&views.drop_top_k)
            )));
        }
    }
    Ok(())
}

/// Rounds a beta = 1 ER equilibrium (e_i = 1, c_j = 1, m >= n) with the
/// low/high split at 1/2. Every agent ends with earning at most 1 after
/// dropping one chore and at least 1/(2(n-1)), hence 2(n-1)-EF1 and fPO.
pub fn round_er_one(eq: &ErEquilibrium, er: &ErInstance) -> Result<(IntegralAllocation, PaymentVector)> {
    let out = round_er_one_with(eq, er, &Overrides::default())?;
    Ok((out.0.alloc, out.1))
}

fn round_er_one_with(
    eq: &ErEquilibrium,
    er: &ErInstance,
    overrides: &Overrides,
) -> Result<(RoundingOutcome, PaymentVector, ErEquilibrium)> {
    let n = er.n();
    let m = er.m();
    check_uniform(er, &Q::one())?;
    if m < n {
        return Err(Error::PreconditionViolated(format!(
            "need m >= n for the beta = 1 rounding, got n={n}, m={m}"
        )));
    }
    let acyclic = make_acyclic(eq, er)?;
    let out = run_engine(er, &acyclic, &qr(1, 2), overrides)?;
    let p = acyclic.p.clone();
    if !mpb_certificate(&out.alloc, &p, &er.base) {
        return Err(Error::InvariantViolation("rounding broke the MPB certificate".into()));
    }
    for i in 0..n {
        let views = earning_views(out.alloc.bundle(i), &p, 1);
        if views.drop_top_k > Q::one() {
            return Err(Error::InvariantViolation(format!(
                "agent {i} earns {} > 1 after one removal",
                fmt_q(&views.drop_top_k)
            )));
        }
        if n >= 2 && &views.total * &qi(2 * (n as i64 - 1)) < Q::one() {
            return Err(Error::InvariantViolation(format!(
                "agent {i} earns {} < 1/(2(n-1))",
                fmt_q(&views.total)
            )));
        }
    }
    Ok((out, p, acyclic))
}

/// One tree surgery of the rebalancing pass.
#[derive(Debug, Clone)]
pub struct RebalanceStep {
    /// root of the problematic tree and its agents
    pub root: usize,
    pub tree_agents: Vec<usize>,
    /// the contested chore the root lost
    pub chore: usize,
    /// earnings of the two contestants from the chore in the equilibrium
    pub s1: Q,
    pub s2: Q,
    /// true for the lost-low-chore re-rooting case, false for the
    /// lost-high-chore edge flip
    pub reroot: bool,
}

/// The surgery log of a rebalancing run.
#[derive(Debug, Clone, Default)]
pub struct RebalanceTrace {
    pub steps: Vec<RebalanceStep>,
}

/// Lifts a beta = 1 rounding to (n-1)-EF1 by re-running the engine with
/// surgical overrides wherever a matching tree left an agent below the
/// 1/(n-1) earning floor: a lost low parent chore re-roots the tree at the
/// shorted agent (contested chore visited last, then forced to whichever
/// side earned more); a lost high parent chore flips the pruned edge back.
/// Already-fair inputs are returned unchanged.
pub fn rebalance_ef1(
    eq: &ErEquilibrium,
    er: &ErInstance,
) -> Result<(IntegralAllocation, PaymentVector)> {
    rebalance_ef1_traced(eq, er).map(|(alloc, p, _)| (alloc, p))
}

/// As [`rebalance_ef1`], also reporting the surgery log.
pub fn rebalance_ef1_traced(
    eq: &ErEquilibrium,
    er: &ErInstance,
) -> Result<(IntegralAllocation, PaymentVector, RebalanceTrace)> {
    let n = er.n();
    let mut overrides = Overrides::default();
    let mut case1_pending: Option<(usize, usize)> = None; // (root agent, contested chore)
    let cap = 4 * n + 8;
    let mut trace = RebalanceTrace::default();
    let mut last: Option<(RoundingOutcome, PaymentVector)> = None;
    for _round in 0..cap {
        let (out, p, _acyclic) = round_er_one_with(eq, er, &overrides)?;
        if accepted(&out.alloc, &p, er) {
            return Ok((out.alloc, p, trace));
        }
        // locate a problematic tree: some agent below the floor, structural
        // shape per the unrolling argument
        let floor = if n >= 2 { qr(1, n as i64 - 1) } else { Q::one() };
        let half = qr(1, 2);
        let mut problem: Option<&TreeReport> = None;
        for tree in &out.trees {
            let poor = tree
                .agents
                .iter()
                .any(|&i| bundle_payment(out.alloc.bundle(i), &p) < floor);
            if !poor || tree.agents.len() == n {
                continue;
            }
            if tree.root_lost_parent.is_none() || !tree.lost_child.is_empty() {
                continue;
            }
            if problem.map_or(true, |t| tree.root < t.root) {
                problem = Some(tree);
            }
        }
        let Some(tree) = problem else {
            return Err(Error::InvariantViolation(
                "allocation not (n-1)-EF1 but no problematic tree found".into(),
            ));
        };
        let (j1, keeper) = tree.root_lost_parent.expect("checked above");
        let i1 = tree.root;
        trace.steps.push(RebalanceStep {
            root: i1,
            tree_agents: tree.agents.clone(),
            chore: j1,
            s1: eq.q(i1, j1).clone(),
            s2: eq.q(keeper, j1).clone(),
            reroot: p.get(j1) <= &half,
        });
        if p.get(j1) <= &half {
            // lost low chore: re-root and revisit, or settle the contested
            // chore by earning if the re-run moved it to a symmetric tree
            match case1_pending {
                Some((prev_root, prev_chore)) if prev_chore == j1 => {
                    let a = prev_root;
                    let b = keeper;
                    let winner = if eq_q_cmp(eq, a, b, j1) { a } else { b };
                    overrides.heir.insert(j1, winner);
                    case1_pending = None;
                }
                _ => {
                    overrides.preferred_roots.insert(0, i1);
                    overrides.visit_last.push((i1, j1));
                    case1_pending = Some((i1, j1));
                }
            }
        } else {
            // lost high chore: flip the kept edge back to this root
            overrides.heir.insert(j1, i1);
            case1_pending = None;
        }
        last = Some((out, p));
    }
    // n = 2 endgame: try both sides of the contested chore directly
    if n == 2 {
        if let Some((out, p)) = last {
            if is_fair(&er.base, &out.alloc, Some(&p), &Criterion::Efk { alpha: Q::one(), k: 1 }) {
                return Ok((out.alloc, p, trace));
            }
        }
    }
    Err(Error::InvariantViolation(format!(
        "rebalancing did not reach (n-1)-EF1 within {cap} rounds"
    )))
}

/// acceptance: (n-1)-pEF1 on payments (bridge lemma then gives (n-1)-EF1),
/// plain EF1 for two agents
fn accepted(alloc: &IntegralAllocation, p: &PaymentVector, er: &ErInstance) -> bool {
    let n = er.n();
    if n <= 1 {
        return true;
    }
    let alpha = if n == 2 { Q::one() } else { qi(n as i64 - 1) };
    is_fair(&er.base, alloc, Some(p), &Criterion::PEfk { alpha, k: 1 })
}

fn eq_q_cmp(eq: &ErEquilibrium, a: usize, b: usize, j: usize) -> bool {
    // does a earn at least as much as b from j? ties to the lower index
    match eq.q(a, j).cmp(eq.q(b, j)) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => a < b,
    }
}

// --- Balanced fPO allocation --------------------------------------------------

/// Computes a balanced fPO allocation: bundle sizes differ by at most one
/// and the output carries an MPB payment certificate. Starts from agent 0
/// owning everything at payments equal to her disutilities, then alternates
/// chore transfers along MPB-graph paths with uniform payment raises on the
/// reachable set. For m <= 2n the output is EF2; for m <= n it is EF1.
pub fn balanced_po(inst: &Instance) -> Result<(IntegralAllocation, PaymentVector)> {
    let n = inst.n();
    let m = inst.m();
    if m == 0 {
        let alloc = IntegralAllocation::new(vec![Vec::new(); n], 0)?;
        return Ok((alloc, PaymentVector::new(Vec::new())?));
    }
    let mut bundles = vec![Vec::new(); n];
    bundles[0] = (0..m).collect();
    let mut alloc = IntegralAllocation::new(bundles, m)?;
    let mut p = PaymentVector::new(inst.row(0).to_vec())?;
    let h = 0usize;
    let max_iters = m * n + m + 1;
    let mut iters = 0usize;
    let mut raises_since_transfer = 0usize;
    loop {
        let least = (0..n).min_by_key(|&i| (alloc.bundle(i).len(), i)).unwrap();
        if alloc.bundle(h).len() <= alloc.bundle(least).len() + 1 {
            break;
        }
        iters += 1;
        if iters > max_iters {
            return Err(Error::InvariantViolation(format!(
                "balanced allocation exceeded {max_iters} iterations"
            )));
        }
        let mpb = MpbGraph::of(&alloc, &p, inst);
        let reach = mpb.reach_from(h);
        if reach.agent_seen[least] {
            // transfer one chore along the BFS path from h to the least agent
            let steps = reach.transfer_path(least);
            let mut bundles = alloc.bundles().to_vec();
            for (giver, chore, taker) in steps {
                bundles[giver].retain(|&j| j != chore);
                bundles[taker].push(chore);
            }
            alloc = IntegralAllocation::new(bundles, m)?;
            raises_since_transfer = 0;
        } else {
            // uniformly raise payments of the reachable chores until an
            // outside agent finds one of them minimally painful per buck
            raises_since_transfer += 1;
            if raises_since_transfer > n {
                return Err(Error::InvariantViolation(
                    "more payment raises than agents between transfers".into(),
                ));
            }
            let alphas = crate::market::mpb_ratios(inst, &p);
            let mut gamma: Option<Q> = None;
            for i in 0..n {
                if reach.agent_seen[i] {
                    continue;
                }
                for j in 0..m {
                    if !reach.chore_seen[j] {
                        continue;
                    }
                    let factor = inst.d(i, j) / &(p.get(j) * &alphas[i]);
                    if gamma.as_ref().map_or(true, |g| &factor < g) {
                        gamma = Some(factor);
                    }
                }
            }
            let gamma = gamma.ok_or_else(|| {
                Error::InvariantViolation("no outside agent to absorb a payment raise".into())
            })?;
            debug_assert!(gamma > Q::one());
            let raised: Vec<Q> = (0..m)
                .map(|j| {
                    if reach.chore_seen[j] {
                        p.get(j) * &gamma
                    } else {
                        p.get(j).clone()
                    }
                })
                .collect();
            p = PaymentVector::new(raised)?;
        }
    }
    if !mpb_certificate(&alloc, &p, inst) {
        return Err(Error::InvariantViolation("balanced allocation lost MPB".into()));
    }
    let sizes: Vec<usize> = (0..n).map(|i| alloc.bundle(i).len()).collect();
    let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
    if hi - lo > 1 {
        return Err(Error::InvariantViolation("allocation is not balanced".into()));
    }
    Ok((alloc, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{example_3x4, Instance};
    use crate::market::tests::figure1_equilibrium;
    use crate::verify::{po_bruteforce, OracleCriterion};

    fn uniform_eq_2x4() -> (ErInstance, ErEquilibrium) {
        // n=2, m=4, all d = 1, e = 1, c = 1/2: p_j = 1/2, each agent fully
        // owns two chores
        let inst = Instance::validate(2, 4, vec![vec![qi(1); 4], vec![qi(1); 4]]).unwrap();
        let er = ErInstance::uniform(inst, qr(1, 2)).unwrap();
        let p = PaymentVector::new(vec![qr(1, 2); 4]).unwrap();
        let q = vec![
            vec![qr(1, 2), qr(1, 2), Q::zero(), Q::zero()],
            vec![Q::zero(), Q::zero(), qr(1, 2), qr(1, 2)],
        ];
        let eq = ErEquilibrium::from_earnings(&er, p, q).unwrap();
        (er, eq)
    }

    #[test]
    fn round_half_keeps_an_integral_equilibrium_unchanged() {
        let (er, eq) = uniform_eq_2x4();
        let (alloc, p) = round_er_half(&eq, &er).unwrap();
        assert_eq!(alloc.bundle(0), &[0, 1]);
        assert_eq!(alloc.bundle(1), &[2, 3]);
        for i in 0..2 {
            assert_eq!(bundle_payment(alloc.bundle(i), &p), qi(1));
        }
    }

    #[test]
    fn round_half_rejects_wrong_caps_and_small_m() {
        let (_, eq) = uniform_eq_2x4();
        let inst = Instance::validate(2, 4, vec![vec![qi(1); 4], vec![qi(1); 4]]).unwrap();
        let er_bad = ErInstance::uniform(inst.clone(), qi(1)).unwrap();
        assert!(matches!(
            round_er_half(&eq, &er_bad),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn round_one_on_the_figure1_equilibrium() {
        // hand-traced: tree {a2, j3, a3} puts j3 with a3 (a2 exempt by tie
        // to the lowest index), leaves go to their parents
        let (er, eq) = figure1_equilibrium();
        let (alloc, p) = round_er_one(&eq, &er).unwrap();
        assert_eq!(alloc.bundle(0), &[0]);
        assert_eq!(alloc.bundle(1), &[1]);
        assert_eq!(alloc.bundle(2), &[2, 3]);
        let pays: Vec<Q> = (0..3).map(|i| bundle_payment(alloc.bundle(i), &p)).collect();
        assert_eq!(pays, vec![qr(4, 3), qr(2, 3), qr(4, 3)]);
        for i in 0..3 {
            let views = earning_views(alloc.bundle(i), &p, 1);
            assert!(views.drop_top_k <= Q::one());
            assert!(views.total >= qr(1, 4)); // 1/(2(n-1)) = 1/4
        }
    }

    #[test]
    fn round_one_leaves_integral_equilibria_unchanged() {
        let inst = Instance::validate(2, 2, vec![vec![qi(1), qi(2)], vec![qi(2), qi(1)]]).unwrap();
        let er = ErInstance::uniform(inst, qi(1)).unwrap();
        let p = PaymentVector::new(vec![qi(1), qi(1)]).unwrap();
        let q = vec![vec![qi(1), Q::zero()], vec![Q::zero(), qi(1)]];
        let eq = ErEquilibrium::from_earnings(&er, p, q).unwrap();
        let (alloc, _) = round_er_one(&eq, &er).unwrap();
        assert_eq!(alloc.bundle(0), &[0]);
        assert_eq!(alloc.bundle(1), &[1]);
    }

    #[test]
    fn rebalance_accepts_already_fair_roundings() {
        let (er, eq) = figure1_equilibrium();
        let (alloc, p) = rebalance_ef1(&eq, &er).unwrap();
        // floor 1/(n-1) = 1/2 already held, so the allocation is unchanged
        assert_eq!(alloc.bundle(2), &[2, 3]);
        assert!(is_fair(&er.base, &alloc, Some(&p), &Criterion::PEfk { alpha: qi(2), k: 1 }));
    }

    #[test]
    fn balanced_po_identical_rows_gets_singletons() {
        let inst = Instance::validate(
            3,
            3,
            vec![vec![qi(2); 3], vec![qi(2); 3], vec![qi(2); 3]],
        )
        .unwrap();
        let (alloc, p) = balanced_po(&inst).unwrap();
        for i in 0..3 {
            assert_eq!(alloc.bundle(i).len(), 1);
        }
        assert!(mpb_certificate(&alloc, &p, &inst));
    }

    #[test]
    fn balanced_po_two_agents_four_chores() {
        let inst = Instance::validate(
            2,
            4,
            vec![vec![qi(1), qi(3), qi(2), qi(5)], vec![qi(4), qi(1), qi(2), qi(1)]],
        )
        .unwrap();
        let (alloc, p) = balanced_po(&inst).unwrap();
        assert_eq!(alloc.bundle(0).len(), 2);
        assert_eq!(alloc.bundle(1).len(), 2);
        assert!(mpb_certificate(&alloc, &p, &inst));
    }

    #[test]
    fn balanced_po_hand_traced_two_by_three() {
        let inst = Instance::validate(
            2,
            3,
            vec![vec![qi(1), qi(1), qi(4)], vec![qi(2), qi(2), qi(2)]],
        )
        .unwrap();
        let (alloc, p) = balanced_po(&inst).unwrap();
        let mut sizes: Vec<usize> = (0..2).map(|i| alloc.bundle(i).len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2]);
        assert!(mpb_certificate(&alloc, &p, &inst));
        // PO cross-checked by integral brute force
        assert!(po_bruteforce(&inst, &alloc, 1 << 20).unwrap().is_ok());
    }

    #[test]
    fn balanced_po_is_ef2_for_m_le_2n_and_ef1_for_m_le_n() {
        for seed in 0..10u64 {
            let inst = crate::instances::random_instance(
                3,
                6,
                &crate::instances::ValueModel::Uniform,
                seed,
            );
            let (alloc, p) = balanced_po(&inst).unwrap();
            assert!(mpb_certificate(&alloc, &p, &inst));
            assert!(is_fair(&inst, &alloc, None, &Criterion::Efk { alpha: Q::one(), k: 2 }));
            let small = crate::instances::random_instance(
                4,
                4,
                &crate::instances::ValueModel::Uniform,
                seed,
            );
            let (alloc, _) = balanced_po(&small).unwrap();
            assert!(is_fair(&small, &alloc, None, &Criterion::Efk { alpha: Q::one(), k: 1 }));
        }
    }

    #[test]
    fn balanced_po_minimal_alpha_consistency() {
        // the oracle never beats factor 1 for EF2 on m <= 2n instances, and
        // our balanced output achieves it
        let inst = example_3x4();
        let (alloc, _) = balanced_po(&inst).unwrap();
        assert!(is_fair(&inst, &alloc, None, &Criterion::Efk { alpha: Q::one(), k: 2 }));
        let (oracle_alpha, _) =
            crate::verify::minimal_alpha_oracle(&inst, OracleCriterion::Ef2, 1 << 20).unwrap();
        assert_eq!(oracle_alpha, Q::one());
    }

    /// Case-1 rebalance fixture (n = 4, beta = 1), built so the default run
    /// leaves the tree {a2, a3} poor: a2's parent chore j1 (index 5, low
    /// paying) goes to sibling a1 in phase 2, both a2 and a3 end below the
    /// 1/(n-1) = 1/3 floor, and a1's bundle breaks (n-1)-pEF1. Re-rooting at
    /// a2 lets it take j1 and restores every bound.
    fn case1_fixture() -> (ErInstance, ErEquilibrium) {
        // chores: 0: a0 leaf 19/20; 1,2: a1 leaves 19/40; 3: a2 leaf 3/10;
        // 4: a3 leaf 3/10; 5: shared low chore p=1/2; 6: shared high p=1
        let p = vec![qr(19, 20), qr(19, 40), qr(19, 40), qr(3, 10), qr(3, 10), qr(1, 2), qi(1)];
        let support: [&[usize]; 4] = [&[0, 5], &[1, 2, 5], &[3, 5, 6], &[4, 6]];
        let d = (0..4)
            .map(|i| {
                (0..7)
                    .map(|j| {
                        if support[i].contains(&j) {
                            p[j].clone()
                        } else {
                            &p[j] * &qi(2)
                        }
                    })
                    .collect()
            })
            .collect();
        let inst = Instance::validate(4, 7, d).unwrap();
        let er = ErInstance::uniform(inst, qi(1)).unwrap();
        let z = Q::zero;
        let q = vec![
            vec![qr(19, 20), z(), z(), z(), z(), qr(1, 20), z()],
            vec![z(), qr(19, 40), qr(19, 40), z(), z(), qr(1, 20), z()],
            vec![z(), z(), z(), qr(3, 10), z(), qr(2, 5), qr(3, 10)],
            vec![z(), z(), z(), z(), qr(3, 10), z(), qr(7, 10)],
        ];
        let pv = PaymentVector::new(p).unwrap();
        let eq = ErEquilibrium::from_earnings(&er, pv, q).unwrap();
        (er, eq)
    }

    /// Case-2 rebalance fixture (n = 4, beta = 1): the tree {a1, a3} loses
    /// its high-paying parent chore j1 (index 11) to sibling a2 in phase-3
    /// pruning; flipping the kept edge back to a1 restores every bound.
    fn case2_fixture() -> (ErInstance, ErEquilibrium) {
        // chores 0..7: a0 leaves 3/25 each; 8: a1 leaf 13/50; 9: a2 leaf
        // 51/100; 10: a3 leaf 27/100; 11: j1 p=1; 12: j3 p=1
        let mut p = vec![qr(3, 25); 8];
        p.extend([qr(13, 50), qr(51, 100), qr(27, 100), qi(1), qi(1)]);
        let support: [&[usize]; 4] = [
            &[0, 1, 2, 3, 4, 5, 6, 7, 11],
            &[8, 11, 12],
            &[9, 11],
            &[10, 12],
        ];
        let d = (0..4)
            .map(|i| {
                (0..13)
                    .map(|j| {
                        if support[i].contains(&j) {
                            p[j].clone()
                        } else {
                            &p[j] * &qi(2)
                        }
                    })
                    .collect()
            })
            .collect();
        let inst = Instance::validate(4, 13, d).unwrap();
        let er = ErInstance::uniform(inst, qi(1)).unwrap();
        let z = Q::zero;
        let mut q = vec![vec![z(); 13]; 4];
        for j in 0..8 {
            q[0][j] = qr(3, 25);
        }
        q[0][11] = qr(1, 25);
        q[1][8] = qr(13, 50);
        q[1][11] = qr(47, 100);
        q[1][12] = qr(27, 100);
        q[2][9] = qr(51, 100);
        q[2][11] = qr(49, 100);
        q[3][10] = qr(27, 100);
        q[3][12] = qr(73, 100);
        let pv = PaymentVector::new(p).unwrap();
        let eq = ErEquilibrium::from_earnings(&er, pv, q).unwrap();
        (er, eq)
    }

    #[test]
    fn rebalance_case1_reroots_a_poor_tree() {
        let (er, eq) = case1_fixture();
        let (alloc, p) = round_er_one(&eq, &er).unwrap();
        // default run: j1 (chore 5) pushed to a1, tree {a2, a3} poor
        assert_eq!(alloc.bundle(1), &[1, 2, 5]);
        assert_eq!(alloc.bundle(2), &[3]);
        assert_eq!(bundle_payment(alloc.bundle(2), &p), qr(3, 10));
        assert!(!is_fair(&er.base, &alloc, Some(&p), &Criterion::PEfk { alpha: qi(3), k: 1 }));
        // rebalancing re-roots the tree at a2, which then takes j1
        let (alloc2, p2, trace) = rebalance_ef1_traced(&eq, &er).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert!(trace.steps[0].reroot);
        assert_eq!(trace.steps[0].root, 2);
        assert_eq!(trace.steps[0].chore, 5);
        assert_eq!(trace.steps[0].s1, qr(2, 5));
        assert_eq!(alloc2.bundle(0), &[0]);
        assert_eq!(alloc2.bundle(1), &[1, 2]);
        assert_eq!(alloc2.bundle(2), &[3, 5]);
        assert_eq!(alloc2.bundle(3), &[4, 6]);
        assert!(mpb_certificate(&alloc2, &p2, &er.base));
        let floor = qr(1, 3);
        for i in 0..4 {
            assert!(bundle_payment(alloc2.bundle(i), &p2) >= floor);
            assert!(earning_views(alloc2.bundle(i), &p2, 1).drop_top_k <= Q::one());
        }
        assert!(is_fair(&er.base, &alloc2, Some(&p2), &Criterion::Efk { alpha: qi(3), k: 1 }));
    }

    #[test]
    fn rebalance_case2_flips_a_pruned_edge() {
        let (er, eq) = case2_fixture();
        let (alloc, p) = round_er_one(&eq, &er).unwrap();
        // default run: j1 (chore 11) kept by a2, tree {a1, a3} poor
        assert!(alloc.bundle(2).contains(&11));
        assert!(!is_fair(&er.base, &alloc, Some(&p), &Criterion::PEfk { alpha: qi(3), k: 1 }));
        let (alloc2, p2, trace) = rebalance_ef1_traced(&eq, &er).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert!(!trace.steps[0].reroot);
        assert_eq!(trace.steps[0].chore, 11);
        assert_eq!(trace.steps[0].s1, qr(47, 100));
        assert_eq!(trace.steps[0].s2, qr(49, 100));
        assert!(alloc2.bundle(1).contains(&11));
        assert!(mpb_certificate(&alloc2, &p2, &er.base));
        let floor = qr(1, 3);
        for i in 0..4 {
            assert!(bundle_payment(alloc2.bundle(i), &p2) >= floor);
            assert!(earning_views(alloc2.bundle(i), &p2, 1).drop_top_k <= Q::one());
        }
        assert!(is_fair(&er.base, &alloc2, Some(&p2), &Criterion::Efk { alpha: qi(3), k: 1 }));
    }

    #[test]
    fn random_roundings_keep_all_bounds() {
        // property suite: solve, round with both variants, check the bounds
        for seed in 0..8u64 {
            let inst = crate::instances::random_instance(
                3,
                7,
                &crate::instances::ValueModel::Uniform,
                seed,
            );
            let er = ErInstance::uniform(inst.clone(), qi(1)).unwrap();
            let eq = crate::enumerate::find_er_equilibrium_enum(&er, 4).unwrap();
            let (alloc, p) = round_er_one(&eq, &er).unwrap();
            assert!(mpb_certificate(&alloc, &p, &inst));
            let (alloc2, p2) = rebalance_ef1(&eq, &er).unwrap();
            assert!(is_fair(&inst, &alloc2, Some(&p2), &Criterion::PEfk { alpha: qi(2), k: 1 }));
        }
        for seed in 0..8u64 {
            let inst = crate::instances::random_instance(
                2,
                5,
                &crate::instances::ValueModel::Uniform,
                seed,
            );
            let er = ErInstance::uniform(inst.clone(), qr(1, 2)).unwrap();
            let eq = crate::enumerate::find_er_equilibrium_enum(&er, 4).unwrap();
            let (alloc, p) = round_er_half(&eq, &er).unwrap();
            assert!(mpb_certificate(&alloc, &p, &inst));
        }
    }
}
