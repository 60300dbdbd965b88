//! Exact-rational Lemke solver for the augmented linear complementarity
//! program whose good solutions are exactly the ER equilibria.
//!
//! Variables are `r_i` (reciprocal MPB ratios, transformed), `p_j`
//! (payments, transformed as `P - p_j`), `q_ij` (earnings), `beta_j` (excess
//! payments) and the augmentation scalar `z`. The four constraint families,
//! with their complementary variables, are
//!
//!   (a) per agent:  e_i * sum_j(-p_j - beta_j)/E - sum_j q_ij - z <= -e_i*m*P/E   (perp r_i)
//!   (b) per chore:  p_j + beta_j + sum_i q_ij <= P                                (perp p_j)
//!   (c) per pair:   d_ij * r_i - p_j <= d_ij * R - P                              (perp q_ij)
//!   (d) per chore:  -p_j - beta_j + c_j * sum_k(p_k + beta_k)/E - z
//!                      <= -P + c_j*m*P/E                                          (perp beta_j)
//!
//! with `P = (d_max/d_min) * c_max` and `R = P/d_min + 1`. Pivoting uses the
//! lexicographic ratio test, so degenerate (e.g. all-integer) instances are
//! fine. A solution is *good* when `p_j + beta_j < P` for all chores and
//! `r_i < R` for all agents; the solver asserts goodness at every visited
//! vertex, checks that no basis repeats, and converts the final `z = 0`
//! vertex into a validated equilibrium.

use crate::instances::{ErInstance, PaymentVector};
use crate::market::ErEquilibrium;
use crate::{fmt_q, Error, Q, Result};
use num::{One, Signed, Zero};
use std::collections::HashSet;

/// Variable identifiers. `Y(k)` is the k-th structural variable, `W(k)` its
/// complementary slack, `Z` the augmentation scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarId {
    Y(usize),
    Z,
    W(usize),
}

impl VarId {
    fn complement(self) -> Option<VarId> {
        match self {
            VarId::Y(k) => Some(VarId::W(k)),
            VarId::W(k) => Some(VarId::Y(k)),
            VarId::Z => None,
        }
    }
}

/// Dense exact-rational tableau for the augmented LCP.
pub struct LcpTableau {
    n: usize,
    m: usize,
    /// number of structural variables (n + m + n*m + m)
    nvars: usize,
    /// rows[k] has 2*nvars + 2 columns: y block, z, w block, rhs
    rows: Vec<Vec<Q>>,
    basis: Vec<VarId>,
    pub p_cap: Q,
    pub r_cap: Q,
}

/// One pivot record.
#[derive(Debug, Clone)]
pub struct PivotStep {
    pub entering: VarId,
    pub leaving: VarId,
    pub z_after: Q,
    /// Basic-variable snapshot (only when tracing vertices).
    pub vertex: Option<Vec<(VarId, Q)>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    Solved,
    SecondaryRay,
    IterationCap,
}

/// Full pivot trace of a Lemke run.
#[derive(Debug, Clone)]
pub struct LemkeTrace {
    pub steps: Vec<PivotStep>,
    pub termination: Termination,
    /// Start value of z computed from the tableau (minimal feasible).
    pub start_z: Q,
    /// Start value the source formula suggests; recorded for comparison.
    pub start_z_formula: Q,
    pub record_vertices: bool,
}

/// A `z = 0` solution in the original variable blocks.
#[derive(Debug, Clone)]
pub struct LcpSolution {
    pub r: Vec<Q>,
    pub p: Vec<Q>,
    pub q: Vec<Vec<Q>>,
    pub beta: Vec<Q>,
    pub p_cap: Q,
    pub r_cap: Q,
}

impl LcpTableau {
    pub fn variable_count(&self) -> usize {
        self.nvars + 1
    }

    fn var_col(&self, v: VarId) -> usize {
        match v {
            VarId::Y(k) => k,
            VarId::Z => self.nvars,
            VarId::W(k) => self.nvars + 1 + k,
        }
    }

    fn rhs_col(&self) -> usize {
        2 * self.nvars + 2 - 1
    }

    fn idx_r(&self, i: usize) -> usize {
        i
    }

    fn idx_p(&self, j: usize) -> usize {
        self.n + j
    }

    fn idx_q(&self, i: usize, j: usize) -> usize {
        self.n + self.m + i * self.m + j
    }

    fn idx_beta(&self, j: usize) -> usize {
        self.n + self.m + self.n * self.m + j
    }

    /// Current value of a variable at the vertex (0 if nonbasic).
    fn value_of(&self, v: VarId) -> Q {
        match self.basis.iter().position(|&b| b == v) {
            Some(row) => self.rows[row][self.rhs_col()].clone(),
            None => Q::zero(),
        }
    }

    fn basis_signature(&self) -> Vec<u64> {
        let mut sig: Vec<u64> = self
            .basis
            .iter()
            .map(|v| match *v {
                VarId::Y(k) => k as u64,
                VarId::Z => u64::MAX,
                VarId::W(k) => (1 << 32) + k as u64,
            })
            .collect();
        sig.sort_unstable();
        sig
    }

    fn pivot(&mut self, row: usize, entering: VarId) {
        let col = self.var_col(entering);
        let piv = self.rows[row][col].clone();
        debug_assert!(!piv.is_zero());
        for v in self.rows[row].iter_mut() {
            *v = &*v / &piv;
        }
        let pivot_row = self.rows[row].clone();
        for (k, r) in self.rows.iter_mut().enumerate() {
            if k == row {
                continue;
            }
            let factor = r[col].clone();
            if factor.is_zero() {
                continue;
            }
            for (c, v) in r.iter_mut().enumerate() {
                *v = &*v - &(&factor * &pivot_row[c]);
            }
        }
        self.basis[row] = entering;
    }

    /// Lexicographic ratio test for an entering column: among rows with a
    /// positive pivot entry, the lexicographic minimum of
    /// `(rhs, w-block) / pivot` determines the unique leaving row.
    pub fn lexicographic_ratio_test(&self, entering: VarId) -> Result<usize> {
        let col = self.var_col(entering);
        let rhs = self.rhs_col();
        let wstart = self.nvars + 1;
        let mut best: Option<usize> = None;
        for k in 0..self.rows.len() {
            if !self.rows[k][col].is_positive() {
                continue;
            }
            best = Some(match best {
                None => k,
                Some(b) => {
                    // compare (rhs, w columns) / pivot lexicographically
                    let mut choice = b;
                    let cols = std::iter::once(rhs).chain(wstart..wstart + self.nvars);
                    for c in cols {
                        let lhs = &self.rows[k][c] * &self.rows[b][col];
                        let rhsv = &self.rows[b][c] * &self.rows[k][col];
                        if lhs < rhsv {
                            choice = k;
                            break;
                        }
                        if lhs > rhsv {
                            break;
                        }
                    }
                    choice
                }
            });
        }
        best.ok_or(Error::Unbounded)
    }

    /// Asserts the path invariants at the current vertex: transformed
    /// payments below `P` and transformed ratios below `R` (the "good"
    /// predicate holds along the whole Lemke path), plus complementarity for
    /// every pair except at most one double label.
    fn assert_vertex_invariants(&self) -> Result<()> {
        for j in 0..self.m {
            let pb = self.value_of(VarId::Y(self.idx_p(j))) + self.value_of(VarId::Y(self.idx_beta(j)));
            if pb >= self.p_cap {
                return Err(Error::InvariantViolation(format!(
                    "vertex has p_{j} + beta_{j} = {} >= P = {}",
                    fmt_q(&pb),
                    fmt_q(&self.p_cap)
                )));
            }
        }
        for i in 0..self.n {
            let r = self.value_of(VarId::Y(self.idx_r(i)));
            if r >= self.r_cap {
                return Err(Error::InvariantViolation(format!(
                    "vertex has r_{i} = {} >= R = {}",
                    fmt_q(&r),
                    fmt_q(&self.r_cap)
                )));
            }
        }
        let mut double_labels = 0usize;
        for k in 0..self.nvars {
            let y = self.basis.contains(&VarId::Y(k));
            let w = self.basis.contains(&VarId::W(k));
            if y && w {
                return Err(Error::InvariantViolation(format!(
                    "complementary pair {k} fully basic"
                )));
            }
            if !y && !w {
                double_labels += 1;
            }
        }
        let z_basic = self.basis.contains(&VarId::Z);
        if z_basic && double_labels != 1 {
            return Err(Error::InvariantViolation(format!(
                "{double_labels} double labels with z basic"
            )));
        }
        if !z_basic && double_labels != 0 {
            return Err(Error::InvariantViolation("double label with z = 0".into()));
        }
        Ok(())
    }
}

/// Builds the augmented-LCP tableau for an ER instance. Rejects instances
/// violating the feasible-earning condition.
pub fn build_er_lcp(er: &ErInstance) -> Result<LcpTableau> {
    if !er.feasible_earning() {
        return Err(Error::InfeasibleEarning {
            sum_e: fmt_q(&er.sum_e()),
            sum_c: fmt_q(&er.sum_c()),
        });
    }
    let n = er.n();
    let m = er.m();
    let inst = &er.base;
    let d_max = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| inst.d(i, j)).max().unwrap().clone();
    let d_min = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| inst.d(i, j)).min().unwrap().clone();
    let c_max = (0..m).map(|j| er.c(j)).max().unwrap().clone();
    let p_cap = &d_max / &d_min * &c_max;
    let r_cap = &p_cap / &d_min + Q::one();
    let total_e = er.sum_e();

    let nvars = n + m + n * m + m;
    let width = 2 * nvars + 2;
    let mut rows = vec![vec![Q::zero(); width]; nvars];
    let t = LcpTableau {
        n,
        m,
        nvars,
        rows: Vec::new(),
        basis: Vec::new(),
        p_cap: p_cap.clone(),
        r_cap: r_cap.clone(),
    };
    let zcol = nvars;
    let rhs = width - 1;
    let m_q = crate::qi(m as i64);

    // (a) agent rows, complementary to r_i
    for i in 0..n {
        let row = t.idx_r(i);
        let coeff = -(er.e(i) / &total_e);
        for j in 0..m {
            rows[row][t.idx_p(j)] = coeff.clone();
            rows[row][t.idx_beta(j)] = coeff.clone();
            rows[row][t.idx_q(i, j)] = -Q::one();
        }
        rows[row][zcol] = -Q::one();
        rows[row][rhs] = coeff * &m_q * &p_cap;
    }
    // (b) chore payout rows, complementary to p_j
    for j in 0..m {
        let row = t.idx_p(j);
        rows[row][t.idx_p(j)] = Q::one();
        rows[row][t.idx_beta(j)] = Q::one();
        for i in 0..n {
            rows[row][t.idx_q(i, j)] = Q::one();
        }
        rows[row][rhs] = p_cap.clone();
    }
    // (c) MPB rows, complementary to q_ij
    for i in 0..n {
        for j in 0..m {
            let row = t.idx_q(i, j);
            rows[row][t.idx_r(i)] = inst.d(i, j).clone();
            rows[row][t.idx_p(j)] = -Q::one();
            rows[row][rhs] = inst.d(i, j) * &r_cap - &p_cap;
        }
    }
    // (d) earning-restriction rows, complementary to beta_j
    for j in 0..m {
        let row = t.idx_beta(j);
        let coeff = er.c(j) / &total_e;
        for k in 0..m {
            rows[row][t.idx_p(k)] = coeff.clone();
            rows[row][t.idx_beta(k)] = coeff.clone();
        }
        rows[row][t.idx_p(j)] = &rows[row][t.idx_p(j)] - &Q::one();
        rows[row][t.idx_beta(j)] = &rows[row][t.idx_beta(j)] - &Q::one();
        rows[row][zcol] = -Q::one();
        rows[row][rhs] = &coeff * &m_q * &p_cap - &p_cap;
    }
    // slack identity block
    for (k, row) in rows.iter_mut().enumerate() {
        row[nvars + 1 + k] = Q::one();
    }

    Ok(LcpTableau {
        rows,
        basis: (0..nvars).map(VarId::W).collect(),
        ..t
    })
}

/// Runs Lemke's complementary pivot scheme from the primary ray. On success
/// the final vertex has `z = 0` and is good; the trace records every pivot
/// and the start values of `z`.
pub fn lemke_solve(
    t: &mut LcpTableau,
    max_pivots: usize,
    record_vertices: bool,
) -> Result<(LcpSolution, LemkeTrace)> {
    let rhs = t.rhs_col();
    let zcol = t.nvars;
    // start value per the source's primary-ray formula, for the trace
    let start_z_formula = {
        // max(max_i e_i*m*P/E, max_j (c_j*m*P/E - P)) reconstructed from rows:
        // row (a) has rhs = -e_i*m*P/E; row (d) has rhs = c_j*m*P/E - P.
        let mut best = Q::zero();
        for i in 0..t.n {
            let v = -rows_rhs(t, t.idx_r(i));
            if v > best {
                best = v;
            }
        }
        for j in 0..t.m {
            let v = rows_rhs(t, t.idx_beta(j));
            if v > best {
                best = v;
            }
        }
        best
    };

    // the minimal feasible z: the most negative rhs among rows carrying z
    let mut entry_row: Option<usize> = None;
    for k in 0..t.nvars {
        if t.rows[k][zcol] != -Q::one() {
            continue;
        }
        if !t.rows[k][rhs].is_negative() {
            continue;
        }
        entry_row = Some(match entry_row {
            None => k,
            Some(b) => {
                // lexicographic minimum of (rhs, w block); pivot entries are all -1
                let mut choice = b;
                let wstart = t.nvars + 1;
                let cols = std::iter::once(rhs).chain(wstart..wstart + t.nvars);
                for c in cols {
                    match t.rows[k][c].cmp(&t.rows[b][c]) {
                        std::cmp::Ordering::Less => {
                            choice = k;
                            break;
                        }
                        std::cmp::Ordering::Greater => break,
                        std::cmp::Ordering::Equal => {}
                    }
                }
                choice
            }
        });
    }
    let Some(first_row) = entry_row else {
        // b >= 0: y = 0 is already a solution with z = 0
        let trace = LemkeTrace {
            steps: Vec::new(),
            termination: Termination::Solved,
            start_z: Q::zero(),
            start_z_formula,
            record_vertices,
        };
        return Ok((read_solution(t), trace));
    };
    let start_z = -t.rows[first_row][rhs].clone();
    let mut steps: Vec<PivotStep> = Vec::new();
    let mut seen_bases: HashSet<Vec<u64>> = HashSet::new();
    seen_bases.insert(t.basis_signature());

    let leaving = t.basis[first_row];
    t.pivot(first_row, VarId::Z);
    t.assert_vertex_invariants()?;
    if !seen_bases.insert(t.basis_signature()) {
        return Err(Error::InvariantViolation("basis repeated".into()));
    }
    steps.push(PivotStep {
        entering: VarId::Z,
        leaving,
        z_after: t.value_of(VarId::Z),
        vertex: record_vertices.then(|| snapshot(t)),
    });
    let mut entering = leaving.complement().expect("first leaver is a slack");

    loop {
        if steps.len() >= max_pivots {
            return Err(Error::IterationCapExceeded(max_pivots));
        }
        let row = match t.lexicographic_ratio_test(entering) {
            Ok(r) => r,
            Err(Error::Unbounded) => {
                return Err(Error::SecondaryRayReached { pivots: steps.len() });
            }
            Err(e) => return Err(e),
        };
        let leaving = t.basis[row];
        t.pivot(row, entering);
        t.assert_vertex_invariants()?;
        if !seen_bases.insert(t.basis_signature()) {
            return Err(Error::InvariantViolation("basis repeated".into()));
        }
        steps.push(PivotStep {
            entering,
            leaving,
            z_after: t.value_of(VarId::Z),
            vertex: record_vertices.then(|| snapshot(t)),
        });
        if leaving == VarId::Z {
            let trace = LemkeTrace {
                steps,
                termination: Termination::Solved,
                start_z,
                start_z_formula,
                record_vertices,
            };
            return Ok((read_solution(t), trace));
        }
        entering = leaving.complement().expect("only z lacks a complement");
    }
}

fn rows_rhs(t: &LcpTableau, row: usize) -> Q {
    t.rows[row][t.rhs_col()].clone()
}

fn snapshot(t: &LcpTableau) -> Vec<(VarId, Q)> {
    (0..t.nvars)
        .map(|k| (t.basis[k], t.rows[k][t.rhs_col()].clone()))
        .collect()
}

fn read_solution(t: &LcpTableau) -> LcpSolution {
    let r = (0..t.n).map(|i| t.value_of(VarId::Y(t.idx_r(i)))).collect();
    let p = (0..t.m).map(|j| t.value_of(VarId::Y(t.idx_p(j)))).collect();
    let q = (0..t.n)
        .map(|i| (0..t.m).map(|j| t.value_of(VarId::Y(t.idx_q(i, j)))).collect())
        .collect();
    let beta = (0..t.m).map(|j| t.value_of(VarId::Y(t.idx_beta(j)))).collect();
    LcpSolution { r, p, q, beta, p_cap: t.p_cap.clone(), r_cap: t.r_cap.clone() }
}

/// Converts a good `z = 0` solution into a validated ER equilibrium:
/// `Q = sum_j (P - p_j - beta_j) / sum_i e_i`, payments `(P - p_j)/Q`,
/// earnings `q_ij / Q`, allocation fractions `q_ij / p_j` (in hatted units).
pub fn extract_equilibrium(sol: &LcpSolution, er: &ErInstance) -> Result<ErEquilibrium> {
    let m = er.m();
    for j in 0..m {
        let pb = &sol.p[j] + &sol.beta[j];
        if pb >= sol.p_cap {
            return Err(Error::NotGoodSolution(format!(
                "p_{j} + beta_{j} = {} not below P = {}",
                fmt_q(&pb),
                fmt_q(&sol.p_cap)
            )));
        }
    }
    for (i, r) in sol.r.iter().enumerate() {
        if r >= &sol.r_cap {
            return Err(Error::NotGoodSolution(format!("r_{i} not below R")));
        }
    }
    let total_e = er.sum_e();
    let q_scale: Q = (0..m)
        .map(|j| &sol.p_cap - &sol.p[j] - &sol.beta[j])
        .sum::<Q>()
        / &total_e;
    if !q_scale.is_positive() {
        return Err(Error::NotGoodSolution("scaling constant not positive".into()));
    }
    let p_hat: Vec<Q> = (0..m).map(|j| (&sol.p_cap - &sol.p[j]) / &q_scale).collect();
    let q_hat: Vec<Vec<Q>> = sol
        .q
        .iter()
        .map(|row| row.iter().map(|v| v / &q_scale).collect())
        .collect();
    ErEquilibrium::from_earnings(er, PaymentVector::new(p_hat)?, q_hat)
}

/// Convenience wrapper: build, solve, extract and exactly re-verify.
pub fn solve_er(
    er: &ErInstance,
    max_pivots: usize,
    record_vertices: bool,
) -> Result<(ErEquilibrium, LemkeTrace)> {
    let mut t = build_er_lcp(er)?;
    let (sol, trace) = lemke_solve(&mut t, max_pivots, record_vertices)?;
    let eq = extract_equilibrium(&sol, er)?;
    Ok((eq, trace))
}

pub const DEFAULT_MAX_PIVOTS: usize = 1_000_000;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{example_3x4, ErInstance, Instance};
    use crate::verify::verify_er;
    use crate::{qi, qr};

    #[test]
    fn constants_for_the_example_instance() {
        let er = ErInstance::uniform(example_3x4(), qi(1)).unwrap();
        let t = build_er_lcp(&er).unwrap();
        assert_eq!(t.p_cap, qi(9));
        assert_eq!(t.r_cap, qi(10));
    }

    #[test]
    fn variable_count_for_one_by_one() {
        let inst = Instance::validate(1, 1, vec![vec![qi(5)]]).unwrap();
        let er = ErInstance::uniform(inst, qi(1)).unwrap();
        let t = build_er_lcp(&er).unwrap();
        assert_eq!(t.variable_count(), 5);
    }

    #[test]
    fn infeasible_earning_rejected_at_build_time() {
        let inst = Instance::validate(2, 1, vec![vec![qi(1)], vec![qi(1)]]).unwrap();
        let er = ErInstance::new(inst, vec![qi(1), qi(1)], vec![qi(1)]).unwrap();
        assert!(matches!(build_er_lcp(&er), Err(Error::InfeasibleEarning { .. })));
    }

    #[test]
    fn single_agent_single_chore_equilibrium() {
        let inst = Instance::validate(1, 1, vec![vec![qi(5)]]).unwrap();
        let er = ErInstance::uniform(inst, qi(1)).unwrap();
        let (eq, trace) = solve_er(&er, DEFAULT_MAX_PIVOTS, false).unwrap();
        assert_eq!(trace.termination, Termination::Solved);
        assert_eq!(*eq.p.get(0), qi(1));
        assert_eq!(*eq.x.get(0, 0), qi(1));
        assert_eq!(*eq.q(0, 0), qi(1));
        assert!(verify_er(&eq, &er).is_empty());
    }

    #[test]
    fn example_instance_solves_to_a_verified_equilibrium() {
        let er = ErInstance::uniform(example_3x4(), qi(1)).unwrap();
        let (eq, trace) = solve_er(&er, DEFAULT_MAX_PIVOTS, false).unwrap();
        assert_eq!(trace.termination, Termination::Solved);
        assert!(verify_er(&eq, &er).is_empty());
    }

    #[test]
    fn extraction_inverts_a_hand_built_figure1_solution() {
        // encode the known equilibrium p_hat = (4/3, 2/3, 2/3, 2/3) as an LCP
        // solution with Q = 1: p = P - p_hat, beta = max(0, p_hat - c),
        // q = q_hat, r = R - 1/alpha_i.
        let er = ErInstance::uniform(example_3x4(), qi(1)).unwrap();
        let p_cap = qi(9);
        let r_cap = qi(10);
        let p_hat = [qr(4, 3), qr(2, 3), qr(2, 3), qr(2, 3)];
        let p = p_hat.iter().map(|v| &p_cap - v).collect();
        let beta = vec![qr(1, 3), qi(0), qi(0), qi(0)];
        let q = vec![
            vec![qi(1), qi(0), qi(0), qi(0)],
            vec![qi(0), qr(2, 3), qr(1, 3), qi(0)],
            vec![qi(0), qi(0), qr(1, 3), qr(2, 3)],
        ];
        let r = vec![&r_cap - &qr(2, 3), &r_cap - &qr(2, 3), &r_cap - &qr(2, 3)];
        let sol = LcpSolution { r, p, q, beta, p_cap, r_cap };
        let eq = extract_equilibrium(&sol, &er).unwrap();
        for (j, expect) in p_hat.iter().enumerate() {
            assert_eq!(eq.p.get(j), expect);
        }
        assert!(verify_er(&eq, &er).is_empty());
    }

    #[test]
    fn good_solutions_have_positive_scaling() {
        // strict inequality p_j + beta_j < P forces Q > 0; a non-good
        // solution is rejected instead of dividing by zero
        let inst = Instance::validate(1, 1, vec![vec![qi(2)]]).unwrap();
        let er = ErInstance::uniform(inst, qi(1)).unwrap();
        let sol = LcpSolution {
            r: vec![qi(0)],
            p: vec![qi(2)],
            q: vec![vec![qi(0)]],
            beta: vec![qi(0)],
            p_cap: qi(2),
            r_cap: qi(2),
        };
        assert!(matches!(extract_equilibrium(&sol, &er), Err(Error::NotGoodSolution(_))));
    }

    #[test]
    fn ratio_test_unbounded_and_ties() {
        let er = ErInstance::uniform(example_3x4(), qi(1)).unwrap();
        let t = build_er_lcp(&er).unwrap();
        // entering z has no positive column entries at the start
        assert!(matches!(t.lexicographic_ratio_test(VarId::Z), Err(Error::Unbounded)));
        // a p-column has several +1 entries with tied plain ratios on rows
        // whose rhs are equal; the lexicographic rule still picks a unique row
        let row = t.lexicographic_ratio_test(VarId::Y(t.idx_p(0))).unwrap();
        let row2 = t.lexicographic_ratio_test(VarId::Y(t.idx_p(0))).unwrap();
        assert_eq!(row, row2);
    }

    #[test]
    fn ratio_test_agrees_with_plain_minimum_on_distinct_ratios() {
        let er = ErInstance::uniform(example_3x4(), qi(1)).unwrap();
        let t = build_er_lcp(&er).unwrap();
        let entering = VarId::Y(t.idx_p(0));
        let col = t.var_col(entering);
        let rhs = t.rhs_col();
        let chosen = t.lexicographic_ratio_test(entering).unwrap();
        let plain = (0..t.rows.len())
            .filter(|&k| t.rows[k][col].is_positive())
            .min_by(|&a, &b| {
                (&t.rows[a][rhs] * &t.rows[b][col]).cmp(&(&t.rows[b][rhs] * &t.rows[a][col]))
            })
            .unwrap();
        // the lexicographic rule refines plain minimum ratio: the chosen
        // row attains the same minimal ratio value
        let lhs = &t.rows[chosen][rhs] * &t.rows[plain][col];
        let rhsv = &t.rows[plain][rhs] * &t.rows[chosen][col];
        assert_eq!(lhs, rhsv);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let er = ErInstance::uniform(example_3x4(), qi(1)).unwrap();
        let mut t = build_er_lcp(&er).unwrap();
        assert!(matches!(
            lemke_solve(&mut t, 2, false),
            Err(Error::IterationCapExceeded(2))
        ));
    }

    #[test]
    fn beta_half_equilibrium_for_a_wide_instance() {
        // m = 2n with cap 1/2: total caps exactly meet requirements
        let inst = Instance::validate(
            2,
            4,
            vec![
                vec![qi(1), qi(2), qi(3), qi(1)],
                vec![qi(2), qi(1), qi(1), qi(3)],
            ],
        )
        .unwrap();
        let er = ErInstance::uniform(inst, qr(1, 2)).unwrap();
        let (eq, _) = solve_er(&er, DEFAULT_MAX_PIVOTS, false).unwrap();
        assert!(verify_er(&eq, &er).is_empty());
    }
}
