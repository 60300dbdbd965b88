//! Exact ER-equilibrium computation for small agent counts by enumerating
//! consumption graphs and solving per-component segment programs.
//!
//! Only covered bipartite *forests* are enumerated: every ER equilibrium can
//! be transformed into one with an acyclic payment graph, so forests suffice
//! for finding some equilibrium. Within a component (a tree), the MPB
//! condition pins every payment to a multiple `mu_j` of a reference chore's
//! payment; the chore payout caps split the payment range into segments on
//! which the program is linear, and tree flows are unique, so each segment
//! either yields one candidate or is infeasible. Cross-component payment
//! scales are then resolved by propagating the pairwise MPB ratio caps to a
//! least fixpoint. The first configuration that assembles into a verified
//! equilibrium wins; enumeration order (graphs by chore-mask, then segment
//! configurations lexicographically) makes the output reproducible.
//!
//! The search prunes on a scale-free invariant: payments inside a component
//! scale together, so `d_ij * alpha_i^{-1} >= mu_j`-style violations between
//! an agent and a chore of the same component survive every extension of the
//! graph and cut the whole subtree. Single-agent star components are
//! memoized across graphs.

use crate::instances::{ErInstance, PaymentVector};
use crate::market::ErEquilibrium;
use crate::{Error, Q, Result};
use num::{One, Signed, Zero};
use std::collections::HashMap;
use std::rc::Rc;

pub const DEFAULT_MAX_AGENTS: usize = 4;

/// A bipartite consumption graph over agents and chores: `chore_agents[j]`
/// is the bitmask of agents allowed to earn from chore `j`. Every chore has
/// at least one incident agent and the graph is a forest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsumptionGraph {
    pub n: usize,
    pub chore_agents: Vec<u16>,
}

impl ConsumptionGraph {
    pub fn m(&self) -> usize {
        self.chore_agents.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.chore_agents[j] & (1 << i) != 0
    }

    fn agents_of(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        let mask = self.chore_agents[j];
        (0..self.n).filter(move |i| mask & (1 << i) != 0)
    }
}

/// Streams every covered bipartite forest exactly once, in increasing
/// lexicographic order of the chore neighborhood masks.
pub struct ForestEnumerator {
    n: usize,
    m: usize,
    masks: Vec<u16>,
    /// union-find over agents per level; level l reflects chores 0..l
    dsu_stack: Vec<Vec<u8>>,
    level: usize,
    done: bool,
    started: bool,
}

/// Guard: enumeration is exponential in the agent count.
pub fn enumerate_consumption_graphs(n: usize, m: usize, max_agents: usize) -> Result<ForestEnumerator> {
    if n > max_agents {
        return Err(Error::TooManyAgents { n, max: max_agents });
    }
    Ok(ForestEnumerator {
        n,
        m,
        masks: vec![0; m],
        dsu_stack: vec![(0..n as u8).collect()],
        level: 0,
        done: false,
        started: false,
    })
}

fn dsu_find(parent: &mut [u8], x: u8) -> u8 {
    let mut root = x;
    while parent[root as usize] != root {
        root = parent[root as usize];
    }
    let mut cur = x;
    while parent[cur as usize] != root {
        let next = parent[cur as usize];
        parent[cur as usize] = root;
        cur = next;
    }
    root
}

impl ForestEnumerator {
    /// Attaching a chore with neighborhood `mask` keeps the graph a forest
    /// iff its agents lie in pairwise distinct components.
    fn acyclic_here(&mut self, mask: u16) -> Option<Vec<u8>> {
        let mut dsu = self.dsu_stack[self.level].clone();
        let mut roots: Vec<u8> = Vec::with_capacity(4);
        for i in 0..self.n {
            if mask & (1 << i) == 0 {
                continue;
            }
            let r = dsu_find(&mut dsu, i as u8);
            if roots.contains(&r) {
                return None;
            }
            roots.push(r);
        }
        for w in roots.windows(2) {
            dsu[w[1] as usize] = w[0];
        }
        Some(dsu)
    }

    fn emit(&self) -> ConsumptionGraph {
        ConsumptionGraph { n: self.n, chore_agents: self.masks.clone() }
    }
}

impl Iterator for ForestEnumerator {
    type Item = ConsumptionGraph;

    fn next(&mut self) -> Option<ConsumptionGraph> {
        if self.done {
            return None;
        }
        if self.m == 0 {
            self.done = true;
            return if self.started { None } else { Some(self.emit()) };
        }
        let full = (1u16 << self.n) - 1;
        if self.started && self.level == self.m {
            self.level -= 1;
            self.dsu_stack.pop();
        }
        self.started = true;
        loop {
            if self.masks[self.level] >= full {
                self.masks[self.level] = 0;
                if self.level == 0 {
                    self.done = true;
                    return None;
                }
                self.level -= 1;
                self.dsu_stack.pop();
                continue;
            }
            self.masks[self.level] += 1;
            if let Some(dsu) = self.acyclic_here(self.masks[self.level]) {
                self.dsu_stack.push(dsu);
                self.level += 1;
                if self.level == self.m {
                    return Some(self.emit());
                }
            }
        }
    }
}

// --- Component programs -----------------------------------------------------

/// A connected component of a consumption graph, with the payment
/// multipliers `mu_j` relative to the representative chore (the lowest chore
/// index in the component).
#[derive(Debug, Clone)]
pub struct ComponentProgram {
    pub agents: Vec<usize>,
    pub chores: Vec<usize>,
    pub rep: usize,
    /// parallel to `chores`
    pub mu: Vec<Q>,
    /// adjacency restricted to the component: per chore position, agent ids
    pub adj: Vec<Vec<usize>>,
}

/// One feasible segment solution of a component program.
#[derive(Debug, Clone)]
pub struct ComponentSolution {
    /// payment of the reference chore; `None` when the segment leaves it
    /// free (all chores capped), in which case `lower` is its least value
    pub rep_payment: Option<Q>,
    pub lower: Q,
    /// earning flows `q_ij` on component edges: (agent, chore, amount)
    pub flows: Vec<(usize, usize, Q)>,
    pub segment: usize,
}

/// Splits a consumption graph into component programs. Returns `None` when
/// some agent is isolated (it could never meet a positive earning
/// requirement, so the graph supports no equilibrium).
pub fn component_programs(g: &ConsumptionGraph, er: &ErInstance) -> Option<Vec<ComponentProgram>> {
    let n = g.n;
    let m = g.m();
    let mut covered = 0u16;
    for &mask in &g.chore_agents {
        covered |= mask;
    }
    if covered != (1 << n) - 1 {
        return None;
    }
    let mut chore_comp = vec![usize::MAX; m];
    let mut agent_comp = vec![usize::MAX; n];
    let mut comps: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for j0 in 0..m {
        if chore_comp[j0] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut agents = Vec::new();
        let mut chores = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        chore_comp[j0] = id;
        queue.push_back(n + j0);
        while let Some(v) = queue.pop_front() {
            if v < n {
                agents.push(v);
                for j in 0..m {
                    if g.has_edge(v, j) && chore_comp[j] == usize::MAX {
                        chore_comp[j] = id;
                        queue.push_back(n + j);
                    }
                }
            } else {
                let j = v - n;
                chores.push(j);
                for i in g.agents_of(j) {
                    if agent_comp[i] == usize::MAX {
                        agent_comp[i] = id;
                        queue.push_back(i);
                    }
                }
            }
        }
        agents.sort_unstable();
        chores.sort_unstable();
        comps.push((agents, chores));
    }
    let mut out = Vec::with_capacity(comps.len());
    for (agents, chores) in comps {
        let rep = chores[0];
        let pos = |j: usize| chores.binary_search(&j).unwrap();
        let mut mu = vec![None::<Q>; chores.len()];
        mu[0] = Some(Q::one());
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(rep);
        let mut seen_agents = vec![false; n];
        while let Some(j) = queue.pop_front() {
            let mu_j = mu[pos(j)].clone().unwrap();
            for i in g.agents_of(j) {
                if seen_agents[i] {
                    continue;
                }
                seen_agents[i] = true;
                for j2 in 0..m {
                    if g.has_edge(i, j2) && mu[pos(j2)].is_none() {
                        // MPB equality across agent i: p_{j2}/p_j = d_{i j2}/d_{i j}
                        mu[pos(j2)] = Some(&mu_j * &(er.base.d(i, j2) / er.base.d(i, j)));
                        queue.push_back(j2);
                    }
                }
            }
        }
        let mu: Vec<Q> = mu.into_iter().map(|v| v.expect("component is connected")).collect();
        let adj = chores.iter().map(|&j| g.agents_of(j).collect()).collect();
        out.push(ComponentProgram { agents, chores, rep, mu, adj });
    }
    Some(out)
}

impl ComponentProgram {
    /// Scale-free MPB ratio of a component agent: `d_{i j_i} / mu_{j_i}`
    /// for its lowest-index incident chore; any incident chore gives the
    /// same value by construction of `mu`.
    pub fn alpha_tilde(&self, er: &ErInstance, agent: usize) -> Q {
        for (k, agents) in self.adj.iter().enumerate() {
            if agents.contains(&agent) {
                return er.base.d(agent, self.chores[k]) / &self.mu[k];
            }
        }
        unreachable!("agent belongs to the component")
    }

    /// Internal-pair MPB screen: payments inside a component scale together,
    /// so `d_ij / mu_j >= alpha_tilde_i` must hold for every internal pair
    /// regardless of the scale. A failing pair rules out every segment.
    pub fn internally_mpb_consistent(&self, er: &ErInstance) -> bool {
        for &i in &self.agents {
            let at = self.alpha_tilde(er, i);
            for (k, &j) in self.chores.iter().enumerate() {
                if er.base.d(i, j) < &(&at * &self.mu[k]) {
                    return false;
                }
            }
        }
        true
    }

    /// All feasible segment solutions, in segment order.
    pub fn feasible_segments(&self, er: &ErInstance) -> Vec<ComponentSolution> {
        let sum_e: Q = self.agents.iter().map(|&i| er.e(i).clone()).sum();
        segment_solutions(&self.chores, &self.mu, &self.adj, &self.agents, &sum_e, er)
    }
}

/// First feasible segment's solution, or `None` (the per-component
/// operation contract; infeasibility is not an error).
pub fn solve_component_program(cp: &ComponentProgram, er: &ErInstance) -> Option<ComponentSolution> {
    cp.feasible_segments(er).into_iter().next()
}

/// Solves every cap segment of one component tree: breakpoints `c_j / mu_j`
/// ascending; in segment `k` the first `k` breakpoint chores are capped at
/// `c_j` and the rest pay `mu_j * p`. The balance equation pins `p` unless
/// every chore is capped, in which case `p` is free above the last
/// breakpoint and the caps must exactly meet the requirements.
fn segment_solutions(
    chores: &[usize],
    mu: &[Q],
    adj: &[Vec<usize>],
    agents: &[usize],
    sum_e: &Q,
    er: &ErInstance,
) -> Vec<ComponentSolution> {
    let mprime = chores.len();
    let mut breakpoints: Vec<(Q, usize)> =
        (0..mprime).map(|k| (er.c(chores[k]) / &mu[k], k)).collect();
    breakpoints.sort();
    let mut out = Vec::new();
    for segment in 0..=mprime {
        let lower = if segment == 0 { Q::zero() } else { breakpoints[segment - 1].0.clone() };
        let upper = if segment == mprime { None } else { Some(&breakpoints[segment].0) };
        let mut capped = vec![false; mprime];
        for b in breakpoints.iter().take(segment) {
            capped[b.1] = true;
        }
        let capped_sum: Q =
            (0..mprime).filter(|&k| capped[k]).map(|k| er.c(chores[k]).clone()).sum();
        let free_mu: Q = (0..mprime).filter(|&k| !capped[k]).map(|k| mu[k].clone()).sum();
        let (rep_payment, payout): (Option<Q>, Vec<Q>) = if free_mu.is_positive() {
            let p = (sum_e - &capped_sum) / &free_mu;
            if !p.is_positive() || p < lower {
                continue;
            }
            if let Some(up) = upper {
                if &p >= up {
                    continue;
                }
            }
            let payout = (0..mprime)
                .map(|k| if capped[k] { er.c(chores[k]).clone() } else { &mu[k] * &p })
                .collect();
            (Some(p), payout)
        } else {
            if &capped_sum != sum_e || !lower.is_positive() {
                continue;
            }
            (None, (0..mprime).map(|k| er.c(chores[k]).clone()).collect())
        };
        if let Some(flows) = tree_flows(chores, adj, agents, &payout, er) {
            out.push(ComponentSolution { rep_payment, lower, flows, segment });
        }
    }
    out
}

/// Unique flow on a component tree with agent supplies `e_i` and chore
/// demands `payout[k]`; `None` if some forced flow is negative.
fn tree_flows(
    chores: &[usize],
    adj: &[Vec<usize>],
    agents: &[usize],
    payout: &[Q],
    er: &ErInstance,
) -> Option<Vec<(usize, usize, Q)>> {
    let na = agents.len();
    let total = na + chores.len();
    let apos = |i: usize| agents.binary_search(&i).unwrap();
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); total];
    for (k, ags) in adj.iter().enumerate() {
        for &i in ags {
            edges[apos(i)].push(na + k);
            edges[na + k].push(apos(i));
        }
    }
    let mut residual: Vec<Q> = agents
        .iter()
        .map(|&i| er.e(i).clone())
        .chain(payout.iter().cloned())
        .collect();
    let mut degree: Vec<usize> = edges.iter().map(Vec::len).collect();
    let mut removed = vec![false; total];
    let mut flows = Vec::new();
    let mut queue: std::collections::VecDeque<usize> =
        (0..total).filter(|&v| degree[v] == 1).collect();
    while let Some(v) = queue.pop_front() {
        if removed[v] || degree[v] != 1 {
            continue;
        }
        let u = *edges[v].iter().find(|&&u| !removed[u]).expect("leaf has a live neighbor");
        let amount = residual[v].clone();
        if amount.is_negative() {
            return None;
        }
        let (agent, chorepos) = if v < na { (agents[v], u - na) } else { (agents[u], v - na) };
        flows.push((agent, chores[chorepos], amount.clone()));
        residual[u] = &residual[u] - &amount;
        residual[v] = Q::zero();
        removed[v] = true;
        degree[u] -= 1;
        degree[v] = 0;
        if degree[u] == 1 {
            queue.push_back(u);
        }
    }
    let last = (0..total).find(|&v| !removed[v]).expect("one node remains");
    if !residual[last].is_zero() {
        return None;
    }
    Some(flows)
}

// --- Integrated search ------------------------------------------------------

/// Live component during the search. Payments inside the component are
/// `mu[k] * t` for a shared scale `t`; `alpha[k]` is the scale-free MPB
/// ratio of `agents[k]` in the same frame.
#[derive(Debug, Clone)]
struct CompState {
    agents: Vec<usize>,
    alpha: Vec<Q>,
    chores: Vec<usize>,
    mu: Vec<Q>,
    adj: Vec<Vec<usize>>,
    sum_e: Q,
}

impl CompState {
    fn is_star(&self) -> bool {
        self.agents.len() == 1
    }

    fn chore_mask(&self) -> u32 {
        self.chores.iter().fold(0u32, |acc, &j| acc | (1 << j))
    }
}

struct Search<'a> {
    er: &'a ErInstance,
    n: usize,
    m: usize,
    /// memoized star solutions per (agent, chore mask)
    star_memo: HashMap<(usize, u32), Rc<Vec<ComponentSolution>>>,
}

impl<'a> Search<'a> {
    /// Merges the parts touched by chore `l` (mask) into one component, or
    /// `None` when the merged component violates the scale-free MPB screen.
    /// Frame of the merged component: the new chore has `mu = 1`.
    fn merge(
        &self,
        comps: &[Rc<CompState>],
        comp_of_agent: &[Option<usize>],
        l: usize,
        mask: u16,
    ) -> Option<CompState> {
        let mut merged = CompState {
            agents: Vec::new(),
            alpha: Vec::new(),
            chores: vec![l],
            mu: vec![Q::one()],
            adj: vec![(0..self.n).filter(|i| mask & (1 << i) != 0).collect()],
            sum_e: Q::zero(),
        };
        for i in 0..self.n {
            if mask & (1 << i) == 0 {
                continue;
            }
            match comp_of_agent[i] {
                None => {
                    merged.agents.push(i);
                    merged.alpha.push(self.er.base.d(i, l).clone());
                    merged.sum_e = &merged.sum_e + self.er.e(i);
                }
                Some(c) => {
                    let part = &comps[c];
                    // bridge agent i: rescale the part so that in the new
                    // frame its alpha becomes d_{i,l}
                    let k = part.agents.iter().position(|&a| a == i).unwrap();
                    let scale = &part.alpha[k] / self.er.base.d(i, l);
                    for (a, al) in part.agents.iter().zip(&part.alpha) {
                        merged.agents.push(*a);
                        merged.alpha.push(al / &scale);
                    }
                    for ((j, m_j), adj_j) in part.chores.iter().zip(&part.mu).zip(&part.adj) {
                        merged.chores.push(*j);
                        merged.mu.push(m_j * &scale);
                        merged.adj.push(adj_j.clone());
                    }
                    merged.sum_e = &merged.sum_e + &part.sum_e;
                }
            }
        }
        // scale-free MPB screen over the merged component
        for (idx, &i) in merged.agents.iter().enumerate() {
            for (k, &j) in merged.chores.iter().enumerate() {
                if self.er.base.d(i, j) < &(&merged.alpha[idx] * &merged.mu[k]) {
                    return None;
                }
            }
        }
        // sort chores and agents (with their parallel data) for determinism
        let mut chore_order: Vec<usize> = (0..merged.chores.len()).collect();
        chore_order.sort_by_key(|&k| merged.chores[k]);
        let reorder = |v: Vec<Q>, order: &[usize]| -> Vec<Q> {
            order.iter().map(|&k| v[k].clone()).collect()
        };
        merged.mu = reorder(merged.mu, &chore_order);
        let chores: Vec<usize> = chore_order.iter().map(|&k| merged.chores[k]).collect();
        let adj: Vec<Vec<usize>> = chore_order.iter().map(|&k| merged.adj[k].clone()).collect();
        merged.chores = chores;
        merged.adj = adj;
        let mut agent_order: Vec<usize> = (0..merged.agents.len()).collect();
        agent_order.sort_by_key(|&k| merged.agents[k]);
        merged.alpha = reorder(merged.alpha, &agent_order);
        merged.agents = agent_order.iter().map(|&k| merged.agents[k]).collect();
        Some(merged)
    }

    fn solutions_for(&mut self, comp: &CompState) -> Rc<Vec<ComponentSolution>> {
        if comp.is_star() {
            let key = (comp.agents[0], comp.chore_mask());
            if let Some(cached) = self.star_memo.get(&key) {
                return cached.clone();
            }
            let sols = Rc::new(segment_solutions(
                &comp.chores,
                &comp.mu,
                &comp.adj,
                &comp.agents,
                &comp.sum_e,
                self.er,
            ));
            self.star_memo.insert(key, sols.clone());
            return sols;
        }
        Rc::new(segment_solutions(
            &comp.chores,
            &comp.mu,
            &comp.adj,
            &comp.agents,
            &comp.sum_e,
            self.er,
        ))
    }

    /// Leaf handler: all chores assigned; try to assemble an equilibrium.
    fn try_leaf(&mut self, comps: &[Rc<CompState>]) -> Option<ErEquilibrium> {
        let menu: Vec<Rc<Vec<ComponentSolution>>> =
            comps.iter().map(|c| self.solutions_for(c)).collect();
        if menu.iter().any(|m| m.is_empty()) {
            return None;
        }
        // pairwise scale caps K[a][b]: t_b <= K * t_a from agent-of-a vs
        // chore-of-b MPB constraints
        let c = comps.len();
        let mut caps: Vec<Vec<Option<Q>>> = vec![vec![None; c]; c];
        for (a, pa) in comps.iter().enumerate() {
            for (idx, &i) in pa.agents.iter().enumerate() {
                for (b, pb) in comps.iter().enumerate() {
                    if a == b {
                        continue;
                    }
                    for (k, &j) in pb.chores.iter().enumerate() {
                        let bound = self.er.base.d(i, j) / &(&pb.mu[k] * &pa.alpha[idx]);
                        let slot = &mut caps[a][b];
                        if slot.as_ref().map_or(true, |cur| &bound < cur) {
                            *slot = Some(bound);
                        }
                    }
                }
            }
        }
        let mut choice = vec![0usize; c];
        loop {
            let solutions: Vec<&ComponentSolution> =
                choice.iter().zip(&menu).map(|(&k, list)| &list[k]).collect();
            if let Some(scales) = resolve_scales(&caps, &solutions) {
                if let Some(eq) = self.assemble(comps, &solutions, &scales) {
                    return Some(eq);
                }
            }
            let mut pos = c;
            loop {
                if pos == 0 {
                    return None;
                }
                pos -= 1;
                choice[pos] += 1;
                if choice[pos] < menu[pos].len() {
                    break;
                }
                choice[pos] = 0;
            }
        }
    }

    fn assemble(
        &self,
        comps: &[Rc<CompState>],
        solutions: &[&ComponentSolution],
        scales: &[Q],
    ) -> Option<ErEquilibrium> {
        let mut p = vec![Q::zero(); self.m];
        let mut q = vec![vec![Q::zero(); self.m]; self.n];
        for ((comp, sol), scale) in comps.iter().zip(solutions).zip(scales) {
            for (k, &j) in comp.chores.iter().enumerate() {
                p[j] = &comp.mu[k] * scale;
            }
            for (agent, chore, amount) in &sol.flows {
                q[*agent][*chore] = amount.clone();
            }
        }
        let pv = PaymentVector::new(p).ok()?;
        ErEquilibrium::from_earnings(self.er, pv, q).ok()
    }

    fn dfs(
        &mut self,
        level: usize,
        comps: &[Rc<CompState>],
        comp_of_agent: &[Option<usize>],
    ) -> Option<ErEquilibrium> {
        if level == self.m {
            if comp_of_agent.iter().any(Option::is_none) {
                return None;
            }
            return self.try_leaf(comps);
        }
        let full = (1u16 << self.n) - 1;
        for mask in 1..=full {
            // forest check: mask agents in pairwise distinct components
            let mut parts: Vec<usize> = Vec::with_capacity(4);
            let mut fresh = 0usize;
            let mut cyclic = false;
            for i in 0..self.n {
                if mask & (1 << i) == 0 {
                    continue;
                }
                match comp_of_agent[i] {
                    None => fresh += 1,
                    Some(cid) => {
                        if parts.contains(&cid) {
                            cyclic = true;
                            break;
                        }
                        parts.push(cid);
                    }
                }
            }
            if cyclic {
                continue;
            }
            let _ = fresh;
            let Some(merged) = self.merge(comps, comp_of_agent, level, mask) else {
                continue;
            };
            let mut next_comps: Vec<Rc<CompState>> = Vec::with_capacity(comps.len() + 1);
            let mut remap = vec![usize::MAX; comps.len()];
            for (cid, comp) in comps.iter().enumerate() {
                if !parts.contains(&cid) {
                    remap[cid] = next_comps.len();
                    next_comps.push(comp.clone());
                }
            }
            let merged_id = next_comps.len();
            let merged = Rc::new(merged);
            next_comps.push(merged.clone());
            let mut next_owner: Vec<Option<usize>> = comp_of_agent
                .iter()
                .map(|o| o.map(|cid| if parts.contains(&cid) { merged_id } else { remap[cid] }))
                .collect();
            for &i in &merged.agents {
                next_owner[i] = Some(merged_id);
            }
            if let Some(eq) = self.dfs(level + 1, &next_comps, &next_owner) {
                return Some(eq);
            }
        }
        None
    }
}

/// Least fixpoint of the scale lower bounds under the caps `t_b <= K t_a`
/// (propagated as `t_a >= t_b / K`), starting from pinned representative
/// payments and free components' segment lower bounds. `None` if infeasible.
fn resolve_scales(caps: &[Vec<Option<Q>>], solutions: &[&ComponentSolution]) -> Option<Vec<Q>> {
    let c = solutions.len();
    let mut pinned = vec![false; c];
    let mut t: Vec<Q> = Vec::with_capacity(c);
    for (k, sol) in solutions.iter().enumerate() {
        match &sol.rep_payment {
            Some(p) => {
                pinned[k] = true;
                t.push(p.clone());
            }
            None => t.push(sol.lower.clone()),
        }
    }
    if c > 1 {
        for round in 0..=c {
            let mut changed = false;
            for a in 0..c {
                for b in 0..c {
                    if a == b {
                        continue;
                    }
                    if let Some(k) = &caps[a][b] {
                        let need = &t[b] / k;
                        if need > t[a] {
                            if pinned[a] {
                                return None;
                            }
                            t[a] = need;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
            if round == c {
                return None;
            }
        }
        for a in 0..c {
            for b in 0..c {
                if a == b {
                    continue;
                }
                if let Some(k) = &caps[a][b] {
                    if t[b] > k * &t[a] {
                        return None;
                    }
                }
            }
        }
    }
    Some(t)
}

/// Searches covered forests for an ER equilibrium. Deterministic: the first
/// (graph, segment configuration) that assembles into a verified equilibrium
/// is returned. Exhaustion contradicts the existence theorem and is reported
/// as a hard failure.
pub fn find_er_equilibrium_enum(er: &ErInstance, max_agents: usize) -> Result<ErEquilibrium> {
    if !er.feasible_earning() {
        return Err(Error::InfeasibleEarning {
            sum_e: crate::fmt_q(&er.sum_e()),
            sum_c: crate::fmt_q(&er.sum_c()),
        });
    }
    let n = er.n();
    if n > max_agents {
        return Err(Error::TooManyAgents { n, max: max_agents });
    }
    let mut search = Search { er, n, m: er.m(), star_memo: HashMap::new() };
    search
        .dfs(0, &[], &vec![None; n])
        .ok_or(Error::ExhaustedWithoutEquilibrium)
}
