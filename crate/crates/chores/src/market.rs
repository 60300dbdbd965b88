//! Payment/MPB-graph machinery shared by every algorithm: the ER equilibrium
//! type and its validation, cycle cancellation on the payment graph, MPB
//! certificates, and earning views of integral bundles.

use crate::instances::{
    matrix_from_json, matrix_to_json, vec_from_json, vec_to_json, ErInstance,
    FractionalAllocation, Instance, IntegralAllocation, PaymentVector, SCHEMA_VERSION,
};
use crate::{Error, Q, Result};
use num::{Signed, Zero};
use serde_json::{json, Value};
use std::path::Path;

/// A fractional ER equilibrium: allocation `x`, payments `p`, the earning
/// matrix `q` with `q[i][j] = p_j * x_ij`, and the per-agent MPB ratios.
///
/// Construction validates the equilibrium conditions exactly:
/// `x_ij > 0` only on MPB chores, every agent earns exactly `e_i`, and every
/// chore pays out exactly `min(p_j, c_j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErEquilibrium {
    pub x: FractionalAllocation,
    pub p: PaymentVector,
    q: Vec<Vec<Q>>,
    alpha: Vec<Q>,
}

impl ErEquilibrium {
    /// Builds and validates an equilibrium from its earning matrix.
    pub fn from_earnings(er: &ErInstance, p: PaymentVector, q: Vec<Vec<Q>>) -> Result<ErEquilibrium> {
        let n = er.n();
        let m = er.m();
        if q.len() != n || q.iter().any(|row| row.len() != m) {
            return Err(Error::DimensionMismatch("earning matrix shape".into()));
        }
        if p.len() != m {
            return Err(Error::DimensionMismatch("payment vector length".into()));
        }
        let x = FractionalAllocation::new(
            q.iter()
                .map(|row| row.iter().zip(p.iter()).map(|(qij, pj)| qij / pj).collect())
                .collect(),
        )?;
        let alpha = mpb_ratios(&er.base, &p);
        let eq = ErEquilibrium { x, p, q, alpha };
        if let Some(violation) = eq.first_violation(er) {
            return Err(Error::NotAnEquilibrium(violation));
        }
        Ok(eq)
    }

    /// Builds and validates an equilibrium from a fractional allocation.
    pub fn from_allocation(
        er: &ErInstance,
        p: PaymentVector,
        x: FractionalAllocation,
    ) -> Result<ErEquilibrium> {
        let q = (0..x.n())
            .map(|i| (0..x.m()).map(|j| x.get(i, j) * p.get(j)).collect())
            .collect();
        ErEquilibrium::from_earnings(er, p, q)
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn q(&self, i: usize, j: usize) -> &Q {
        &self.q[i][j]
    }

    pub fn alpha(&self, i: usize) -> &Q {
        &self.alpha[i]
    }

    /// Total payout of chore `j` across agents.
    pub fn chore_earning(&self, j: usize) -> Q {
        self.q.iter().map(|row| row[j].clone()).sum()
    }

    /// Total earning of agent `i` across chores.
    pub fn agent_earning(&self, i: usize) -> Q {
        self.q[i].iter().cloned().sum()
    }

    fn first_violation(&self, er: &ErInstance) -> Option<String> {
        verify_er(self, er).err()
    }

    pub fn to_json(&self, er: &ErInstance) -> Value {
        json!({
            "v": SCHEMA_VERSION,
            "instance": er.to_json(),
            "p": vec_to_json(self.p.as_slice()),
            "q": matrix_to_json(&self.q),
        })
    }

    /// Loads an equilibrium together with the instance embedded in the file.
    pub fn from_json(v: &Value) -> Result<(ErInstance, ErEquilibrium)> {
        let found = v
            .get("v")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("missing schema version field \"v\"".into()))?
            as u32;
        if found != SCHEMA_VERSION {
            return Err(Error::SchemaVersionMismatch { found, expected: SCHEMA_VERSION });
        }
        let er = ErInstance::from_json(
            v.get("instance").ok_or_else(|| Error::Parse("missing field \"instance\"".into()))?,
        )?;
        let p = PaymentVector::new(vec_from_json(
            v.get("p").ok_or_else(|| Error::Parse("missing field \"p\"".into()))?,
        )?)?;
        let q = matrix_from_json(
            v.get("q").ok_or_else(|| Error::Parse("missing field \"q\"".into()))?,
        )?;
        let eq = ErEquilibrium::from_earnings(&er, p, q)?;
        Ok((er, eq))
    }

    pub fn save(&self, er: &ErInstance, path: &Path) -> Result<()> {
        crate::instances::write_json(path, &self.to_json(er))
    }

    pub fn load(path: &Path) -> Result<(ErInstance, ErEquilibrium)> {
        ErEquilibrium::from_json(&crate::instances::read_json(path)?)
    }
}

/// Exact check of the three ER-equilibrium clauses; `Err` carries the first
/// violation rendered for diagnostics. See [`crate::verify::verify_er`] for
/// the full violation list.
fn verify_er(eq: &ErEquilibrium, er: &ErInstance) -> std::result::Result<(), String> {
    let list = crate::verify::verify_er(eq, er);
    match list.first() {
        None => Ok(()),
        Some(v) => Err(v.clone()),
    }
}

/// Per-agent MPB ratios `alpha_i = min_j d_ij / p_j`.
pub fn mpb_ratios(inst: &Instance, p: &PaymentVector) -> Vec<Q> {
    (0..inst.n())
        .map(|i| {
            (0..inst.m())
                .map(|j| inst.d(i, j) / p.get(j))
                .min()
                .expect("at least one chore for a ratio; callers guard m >= 1")
        })
        .collect()
}

/// The set of MPB chores of agent `i` under payments `p`.
pub fn mpb_set(inst: &Instance, p: &PaymentVector, i: usize) -> Vec<usize> {
    let alpha = (0..inst.m()).map(|j| inst.d(i, j) / p.get(j)).min().unwrap();
    (0..inst.m()).filter(|&j| inst.d(i, j) / p.get(j) == alpha).collect()
}

/// True iff every positively assigned pair `(i, j)` has `d_ij / p_j` equal to
/// agent `i`'s minimum pain-per-buck ratio. A true verdict certifies fPO.
pub fn mpb_certificate_fractional(
    x: &FractionalAllocation,
    p: &PaymentVector,
    inst: &Instance,
) -> bool {
    let alpha = mpb_ratios(inst, p);
    for i in 0..x.n() {
        for j in 0..x.m() {
            if x.get(i, j).is_positive() && inst.d(i, j) / p.get(j) != alpha[i] {
                return false;
            }
        }
    }
    true
}

/// Integral-allocation form of [`mpb_certificate_fractional`].
pub fn mpb_certificate(alloc: &IntegralAllocation, p: &PaymentVector, inst: &Instance) -> bool {
    let alpha = mpb_ratios(inst, p);
    for (i, bundle) in alloc.bundles().iter().enumerate() {
        for &j in bundle {
            if inst.d(i, j) / p.get(j) != alpha[i] {
                return false;
            }
        }
    }
    true
}

/// Earning views of one integral bundle under payments `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EarningViews {
    /// Total payment of the bundle.
    pub total: Q,
    /// Payment after dropping the `k` highest-paying chores (`k` from the call).
    pub drop_top_k: Q,
    /// Payment after dropping the single lowest-paying chore.
    pub drop_bottom: Q,
}

/// Computes `p(x_i)`, `p_{-k}(x_i)` and `p_{-X}(x_i)` for one bundle.
/// An empty bundle yields zero for every view.
pub fn earning_views(bundle: &[usize], p: &PaymentVector, k: usize) -> EarningViews {
    let mut pays: Vec<Q> = bundle.iter().map(|&j| p.get(j).clone()).collect();
    pays.sort();
    let total: Q = pays.iter().cloned().sum();
    let top_k: Q = pays.iter().rev().take(k).cloned().sum();
    let bottom: Q = pays.first().cloned().unwrap_or_else(Q::zero);
    EarningViews {
        drop_top_k: &total - &top_k,
        drop_bottom: if pays.is_empty() { Q::zero() } else { &total - &bottom },
        total,
    }
}

/// Bundle payment `p(x_i)`.
pub fn bundle_payment(bundle: &[usize], p: &PaymentVector) -> Q {
    bundle.iter().map(|&j| p.get(j).clone()).sum()
}

// --- Payment graph ----------------------------------------------------------

/// Bipartite weighted payment graph of an equilibrium: an edge `(i, j)` with
/// weight `q_ij` exists iff agent `i` earns from chore `j`.
#[derive(Debug, Clone)]
pub struct PaymentGraph {
    pub n: usize,
    pub m: usize,
    /// Adjacency per agent: sorted chore indices with positive earning.
    pub agent_adj: Vec<Vec<usize>>,
    /// Adjacency per chore: sorted agent indices with positive earning.
    pub chore_adj: Vec<Vec<usize>>,
}

impl PaymentGraph {
    pub fn of(eq: &ErEquilibrium) -> PaymentGraph {
        let n = eq.n();
        let m = eq.m();
        let mut agent_adj = vec![Vec::new(); n];
        let mut chore_adj = vec![Vec::new(); m];
        for i in 0..n {
            for j in 0..m {
                if eq.q(i, j).is_positive() {
                    agent_adj[i].push(j);
                    chore_adj[j].push(i);
                }
            }
        }
        PaymentGraph { n, m, agent_adj, chore_adj }
    }

    pub fn edge_count(&self) -> usize {
        self.agent_adj.iter().map(Vec::len).sum()
    }

    /// Finds a cycle as an alternating node sequence
    /// `agent, chore, agent, chore, ...` (closed implicitly), if any.
    /// Deterministic: DFS roots and neighbors are visited in increasing index
    /// order. Nodes are `0..n` for agents and `n..n+m` for chores.
    pub fn find_cycle(&self) -> Option<Vec<usize>> {
        let total = self.n + self.m;
        let mut visited = vec![false; total];
        let mut parent: Vec<Option<usize>> = vec![None; total];
        for root in 0..total {
            if visited[root] {
                continue;
            }
            // iterative DFS with an explicit stack
            let mut stack = vec![(root, None::<usize>)];
            while let Some((v, from)) = stack.pop() {
                if visited[v] {
                    continue;
                }
                visited[v] = true;
                parent[v] = from;
                let neighbors: Vec<usize> = if v < self.n {
                    self.agent_adj[v].iter().map(|&j| self.n + j).collect()
                } else {
                    self.chore_adj[v - self.n].clone()
                };
                // push in decreasing order so smaller indices pop first
                for &w in neighbors.iter().rev() {
                    if Some(w) == from {
                        continue;
                    }
                    if visited[w] {
                        // back edge v-w closes a cycle: walk v up to w
                        let mut path = vec![v];
                        let mut cur = v;
                        while cur != w {
                            cur = parent[cur].expect("w is an ancestor of v");
                            path.push(cur);
                        }
                        // normalize to start at an agent
                        if path[0] >= self.n {
                            path.rotate_left(1);
                        }
                        return Some(path);
                    }
                    stack.push((w, Some(v)));
                }
            }
        }
        None
    }

    /// DOT rendering for debugging (`--dump-graph`).
    pub fn to_dot(&self, eq: &ErEquilibrium) -> String {
        let mut out = String::from("graph payment {\n  rankdir=LR;\n");
        for i in 0..self.n {
            out.push_str(&format!("  a{i} [shape=circle];\n"));
        }
        for j in 0..self.m {
            out.push_str(&format!(
                "  j{j} [shape=box, label=\"j{j} p={}\"];\n",
                crate::fmt_q(eq.p.get(j))
            ));
        }
        for i in 0..self.n {
            for &j in &self.agent_adj[i] {
                out.push_str(&format!(
                    "  a{i} -- j{j} [label=\"{}\"];\n",
                    crate::fmt_q(eq.q(i, j))
                ));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Cancels payment-graph cycles until the graph is a forest, preserving the
/// payment vector and every agent- and chore-earning total exactly. Support
/// only shrinks, so the result is still an ER equilibrium (Lemma: circulate
/// the minimum cycle weight and drop that edge).
///
/// The cancelled edge is the minimum-weight edge of the located cycle, ties
/// broken by lexicographically smallest `(agent, chore)`.
pub fn make_acyclic(eq: &ErEquilibrium, er: &ErInstance) -> Result<ErEquilibrium> {
    let mut q: Vec<Vec<Q>> = (0..eq.n()).map(|i| (0..eq.m()).map(|j| eq.q(i, j).clone()).collect()).collect();
    let p = eq.p.clone();
    loop {
        let current = ErEquilibrium::from_earnings(er, p.clone(), q.clone())?;
        let graph = PaymentGraph::of(&current);
        let Some(cycle) = graph.find_cycle() else {
            return Ok(current);
        };
        // cycle alternates agent, chore, agent, chore, ...
        let len = cycle.len();
        debug_assert!(len % 2 == 0 && len >= 4);
        // edges in traversal order; classify by whether the agent endpoint
        // comes first (class 0) or second (class 1)
        let mut edges: Vec<(usize, usize, usize)> = Vec::with_capacity(len); // (agent, chore, class)
        for t in 0..len {
            let a = cycle[t];
            let b = cycle[(t + 1) % len];
            let (agent, chore, class) = if a < graph.n {
                (a, b - graph.n, 0)
            } else {
                (b, a - graph.n, 1)
            };
            edges.push((agent, chore, class));
        }
        // minimum-weight edge, ties by (agent, chore)
        let (min_agent, min_chore, min_class) = edges
            .iter()
            .min_by(|&&(a1, c1, _), &&(a2, c2, _)| {
                q[a1][c1].cmp(&q[a2][c2]).then(a1.cmp(&a2)).then(c1.cmp(&c2))
            })
            .copied()
            .unwrap();
        let s = q[min_agent][min_chore].clone();
        debug_assert!(s.is_positive());
        for &(agent, chore, class) in &edges {
            if class == min_class {
                q[agent][chore] = &q[agent][chore] - &s;
            } else {
                q[agent][chore] = &q[agent][chore] + &s;
            }
        }
        debug_assert!(q[min_agent][min_chore].is_zero());
    }
}

// --- MPB graph (for the balanced-allocation algorithm) ----------------------

/// Directed bipartite MPB graph of an integral MPB allocation: agent -> chore
/// edges for owned chores, chore -> agent edges for MPB chores not owned.
#[derive(Debug, Clone)]
pub struct MpbGraph {
    pub n: usize,
    pub m: usize,
    /// `owned[i]`: chores in agent i's bundle (sorted).
    pub owned: Vec<Vec<usize>>,
    /// `attracts[j]`: agents for whom chore j is MPB but not owned (sorted).
    pub attracts: Vec<Vec<usize>>,
}

impl MpbGraph {
    pub fn of(alloc: &IntegralAllocation, p: &PaymentVector, inst: &Instance) -> MpbGraph {
        let n = inst.n();
        let m = inst.m();
        let alpha = mpb_ratios(inst, p);
        let mut attracts = vec![Vec::new(); m];
        for i in 0..n {
            for j in 0..m {
                if inst.d(i, j) / p.get(j) == alpha[i] && !alloc.bundle(i).contains(&j) {
                    attracts[j].push(i);
                }
            }
        }
        MpbGraph { n, m, owned: alloc.bundles().to_vec(), attracts }
    }

    /// BFS from an agent; returns (reachable-agent flags, reachable-chore
    /// flags, BFS predecessor of each node for path reconstruction).
    /// Neighbors are expanded in increasing index order, so shortest paths
    /// are lexicographically smallest.
    pub fn reach_from(&self, start: usize) -> Reachability {
        let mut agent_seen = vec![false; self.n];
        let mut chore_seen = vec![false; self.m];
        let mut agent_pred = vec![None; self.n]; // predecessor chore
        let mut chore_pred = vec![None; self.m]; // predecessor agent
        let mut queue = std::collections::VecDeque::new();
        agent_seen[start] = true;
        queue.push_back(Node::Agent(start));
        while let Some(node) = queue.pop_front() {
            match node {
                Node::Agent(i) => {
                    for &j in &self.owned[i] {
                        if !chore_seen[j] {
                            chore_seen[j] = true;
                            chore_pred[j] = Some(i);
                            queue.push_back(Node::Chore(j));
                        }
                    }
                }
                Node::Chore(j) => {
                    for &i in &self.attracts[j] {
                        if !agent_seen[i] {
                            agent_seen[i] = true;
                            agent_pred[i] = Some(j);
                            queue.push_back(Node::Agent(i));
                        }
                    }
                }
            }
        }
        Reachability { agent_seen, chore_seen, agent_pred, chore_pred }
    }
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Agent(usize),
    Chore(usize),
}

#[derive(Debug, Clone)]
pub struct Reachability {
    pub agent_seen: Vec<bool>,
    pub chore_seen: Vec<bool>,
    pub agent_pred: Vec<Option<usize>>,
    pub chore_pred: Vec<Option<usize>>,
}

impl Reachability {
    /// Reconstructs the BFS path to `target` as alternating agent/chore
    /// steps `(giver, chore, taker)` ready to apply as transfers.
    pub fn transfer_path(&self, target: usize) -> Vec<(usize, usize, usize)> {
        let mut steps = Vec::new();
        let mut agent = target;
        while let Some(chore) = self.agent_pred[agent] {
            let giver = self.chore_pred[chore].expect("BFS predecessor chain");
            steps.push((giver, chore, agent));
            agent = giver;
        }
        steps.reverse();
        steps
    }
}
