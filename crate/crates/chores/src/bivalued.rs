//! Fair and efficient allocation for bivalued instances: 3-EFX + fPO when
//! chores outnumber twice the agents, exact EFX + fPO otherwise.
//!
//! Both algorithms start from an MPB allocation (the beta = 1/2 rounding,
//! or the balanced allocation) and repair envy with swaps between an agent
//! holding high-paying chores and an agent holding only low-paying ones;
//! the bivalued structure forces every envied agent into the low class and
//! makes her whole bundle MPB for the envier, so swaps preserve the payment
//! certificate. Each swap's enabling conditions and the running earning
//! bounds are asserted; a violation is a bug, not an input condition.

use crate::instances::{BivaluedForm, ErInstance, Instance, IntegralAllocation, PaymentVector};
use crate::market::{
    bundle_payment, earning_views, mpb_certificate, mpb_ratios, mpb_set, ErEquilibrium,
};
use crate::rounding::{balanced_po, round_er_half};
use crate::verify::{is_fair, Criterion};
use crate::{fmt_q, qi, qr, Error, Q, Result};
use num::One;

/// Agent classes for the swap phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    /// bundle entirely in the minimum payment class
    Low,
    /// exactly one high-paying chore
    High1,
    /// exactly two high-paying chores
    High2,
    /// bundle entirely in the middle payment band (large variant only)
    Middle,
}

/// Chore and agent classification of an allocation under bivalued payments.
#[derive(Debug)]
pub struct BivaluedClassification {
    pub rho: Q,
    pub low: Vec<usize>,
    pub high: Vec<usize>,
    pub middle: Vec<usize>,
    classes: Vec<Class>,
}

fn classify(
    alloc: &IntegralAllocation,
    p: &PaymentVector,
    k: &Q,
) -> Result<BivaluedClassification> {
    let m = p.len();
    let rho = p.iter().min().expect("at least one chore").clone();
    let top = &rho * k;
    let mut low = Vec::new();
    let mut high = Vec::new();
    let mut middle = Vec::new();
    for j in 0..m {
        let pj = p.get(j);
        if pj < &rho || pj > &top {
            return Err(Error::InvariantViolation(format!(
                "payment p[{j}] = {} outside [rho, rho k] = [{}, {}]",
                fmt_q(pj),
                fmt_q(&rho),
                fmt_q(&top)
            )));
        }
        if pj == &rho {
            low.push(j);
        } else if pj == &top {
            high.push(j);
        } else {
            middle.push(j);
        }
    }
    let mut classes = Vec::with_capacity(alloc.n());
    for i in 0..alloc.n() {
        let bundle = alloc.bundle(i);
        let highs = bundle.iter().filter(|j| high.contains(j)).count();
        let mids = bundle.iter().filter(|j| middle.contains(j)).count();
        if mids > 0 && mids != bundle.len() {
            return Err(Error::InvariantViolation(format!(
                "agent {i} mixes middle-band chores with others"
            )));
        }
        let class = if mids > 0 {
            Class::Middle
        } else {
            match highs {
                0 => Class::Low,
                1 => Class::High1,
                2 => Class::High2,
                more => {
                    return Err(Error::InvariantViolation(format!(
                        "agent {i} holds {more} high chores"
                    )))
                }
            }
        };
        classes.push(class);
    }
    Ok(BivaluedClassification { rho, low, high, middle, classes })
}

struct SwapState<'a> {
    inst: &'a Instance,
    p: &'a PaymentVector,
    rho: Q,
    bundles: Vec<Vec<usize>>,
    classes: Vec<Class>,
    high: Vec<usize>,
    /// exact EFX for the small variant, 3-EFX for the large one
    alpha: Q,
    /// earning floor: 1/2 after the rounding, 1 after balancing
    floor: Q,
    /// low-class earning cap: 4/3 + rho k / 3, or 1 + k for the small variant
    low_cap: Q,
    phase1: bool,
}

impl<'a> SwapState<'a> {
    fn envies(&self, i: usize, h: usize) -> bool {
        let bundle = &self.bundles[i];
        if bundle.len() <= 1 || i == h {
            return false;
        }
        let min = bundle.iter().map(|&j| self.inst.d(i, j)).min().unwrap();
        let lhs = self.inst.bundle_disutility(i, bundle) - min;
        lhs > &self.alpha * &self.inst.bundle_disutility(i, &self.bundles[h])
    }

    fn is_fair_agent(&self, i: usize) -> bool {
        (0..self.bundles.len()).all(|h| !self.envies(i, h))
    }

    /// The envy-source conditions: an envious high-class agent has the low
    /// MPB ratio, envies only low-class agents, and the envied bundle is
    /// entirely MPB for her.
    fn assert_envy_source(&self, i: usize, ell: usize) -> Result<()> {
        let alphas = mpb_ratios(self.inst, self.p);
        let expect = Q::one() / &self.rho;
        if alphas[i] != expect {
            return Err(Error::InvariantViolation(format!(
                "envious agent {i} has ratio {} instead of 1/rho",
                fmt_q(&alphas[i])
            )));
        }
        if self.classes[ell] != Class::Low {
            return Err(Error::InvariantViolation(format!(
                "agent {i} envies {ell}, who is not in the low class"
            )));
        }
        let mpb = mpb_set(self.inst, self.p, i);
        for &j in &self.bundles[ell] {
            if !mpb.contains(&j) {
                return Err(Error::InvariantViolation(format!(
                    "envied bundle chore {j} is not MPB for agent {i}"
                )));
            }
        }
        Ok(())
    }

    /// The running bounds: MPB everywhere, the earning floor, low-class
    /// earning caps, and the high-class bundle shapes.
    fn assert_invariants(&self) -> Result<()> {
        let alphas = mpb_ratios(self.inst, self.p);
        for (i, bundle) in self.bundles.iter().enumerate() {
            for &j in bundle {
                if &(self.inst.d(i, j) / self.p.get(j)) != &alphas[i] {
                    return Err(Error::InvariantViolation(format!(
                        "chore {j} not MPB for its holder {i}"
                    )));
                }
            }
            let views = earning_views(bundle, self.p, 1);
            if views.total < self.floor {
                return Err(Error::InvariantViolation(format!(
                    "agent {i} earns {} below the floor {}",
                    fmt_q(&views.total),
                    fmt_q(&self.floor)
                )));
            }
            match self.classes[i] {
                Class::Low => {
                    if self.phase1 && views.drop_top_k > Q::one() {
                        return Err(Error::InvariantViolation(format!(
                            "low agent {i} has p_-1 > 1 during phase 1"
                        )));
                    }
                    if views.total > self.low_cap {
                        return Err(Error::InvariantViolation(format!(
                            "low agent {i} earns {} above the cap {}",
                            fmt_q(&views.total),
                            fmt_q(&self.low_cap)
                        )));
                    }
                }
                Class::High1 => {
                    if views.drop_top_k > Q::one() {
                        return Err(Error::InvariantViolation(format!(
                            "single-high agent {i} has p_-1 > 1"
                        )));
                    }
                }
                Class::High2 => {
                    if earning_views(bundle, self.p, 2).drop_top_k > qr(1, 2) {
                        return Err(Error::InvariantViolation(format!(
                            "double-high agent {i} has p_-2 > 1/2"
                        )));
                    }
                }
                Class::Middle => {}
            }
        }
        Ok(())
    }

    /// phase 1: an envious double-high agent hands one high chore to the
    /// lowest-index agent she envies, taking back one low chore if the
    /// target would otherwise exceed unit earning
    fn phase1(&mut self) -> Result<usize> {
        self.phase1 = true;
        let n = self.bundles.len();
        let mut swaps = 0usize;
        loop {
            let Some(i) = (0..n)
                .find(|&i| self.classes[i] == Class::High2 && !self.is_fair_agent(i))
            else {
                return Ok(swaps);
            };
            swaps += 1;
            if 2 * swaps > n {
                return Err(Error::InvariantViolation(format!(
                    "phase 1 exceeded n/2 = {}/2 swaps",
                    n
                )));
            }
            let ell = (0..n)
                .find(|&h| self.envies(i, h))
                .expect("an envied agent exists");
            self.assert_envy_source(i, ell)?;
            let give_back: Option<usize> =
                if bundle_payment(&self.bundles[ell], self.p) > Q::one() {
                    Some(self.bundles[ell][0])
                } else {
                    None
                };
            let j = *self.bundles[i]
                .iter()
                .find(|j| self.high.contains(j))
                .expect("double-high agent has a high chore");
            self.bundles[i].retain(|&c| c != j);
            if let Some(j1) = give_back {
                self.bundles[ell].retain(|&c| c != j1);
                self.bundles[i].push(j1);
                self.bundles[i].sort_unstable();
            }
            self.bundles[ell].push(j);
            self.bundles[ell].sort_unstable();
            self.classes[i] = Class::High1;
            self.classes[ell] = Class::High1;
            self.assert_invariants()?;
        }
    }

    /// phase 2: an envious single-high agent trades her high chore for the
    /// entire bundle of the least-earning agent she envies
    fn phase2(&mut self) -> Result<usize> {
        self.phase1 = false;
        let n = self.bundles.len();
        let mut swaps = 0usize;
        loop {
            let Some(i) = (0..n)
                .find(|&i| self.classes[i] == Class::High1 && !self.is_fair_agent(i))
            else {
                return Ok(swaps);
            };
            swaps += 1;
            if swaps > n {
                return Err(Error::InvariantViolation(format!("phase 2 exceeded {n} swaps")));
            }
            let ell = (0..n)
                .filter(|&h| self.envies(i, h))
                .min_by(|&a, &b| {
                    bundle_payment(&self.bundles[a], self.p)
                        .cmp(&bundle_payment(&self.bundles[b], self.p))
                        .then(a.cmp(&b))
                })
                .expect("an envied agent exists");
            self.assert_envy_source(i, ell)?;
            let j = *self.bundles[i]
                .iter()
                .find(|j| self.high.contains(j))
                .expect("single-high agent has a high chore");
            let mut taken = std::mem::take(&mut self.bundles[ell]);
            self.bundles[i].retain(|&c| c != j);
            self.bundles[i].append(&mut taken);
            self.bundles[i].sort_unstable();
            self.bundles[ell] = vec![j];
            self.classes[i] = Class::Low;
            self.classes[ell] = Class::High1;
            self.assert_invariants()?;
        }
    }
}

/// 3-EFX and fPO for a bivalued instance with `m > 2n`, from a beta = 1/2
/// ER equilibrium of the `{1, k}`-scaled instance. Short-circuits: when
/// every payment is at most 1/2 the rounding is already 3-EF; when no chore
/// pays `rho k` the rounding is 2-EFX.
pub fn bivalued_3efx_po(
    eq: &ErEquilibrium,
    er: &ErInstance,
    bform: &BivaluedForm,
) -> Result<(IntegralAllocation, PaymentVector)> {
    let inst = &bform.scaled;
    if er.base != *inst {
        return Err(Error::PreconditionViolated(
            "equilibrium instance must be the scaled bivalued form".into(),
        ));
    }
    let n = inst.n();
    let m = inst.m();
    if m <= 2 * n {
        return Err(Error::PreconditionViolated(format!(
            "the large bivalued pipeline needs m > 2n, got n={n}, m={m}"
        )));
    }
    let (alloc, p) = round_er_half(eq, er)?;
    let rho = p.iter().min().unwrap().clone();
    let half = qr(1, 2);
    if rho >= half {
        return Err(Error::InvariantViolation(
            "minimum payment at least 1/2 contradicts m > 2n".into(),
        ));
    }
    if &rho * &bform.k <= half {
        // every payment is at most 1/2: the rounding is already 3-EF
        if !is_fair(inst, &alloc, None, &Criterion::Efk { alpha: qi(3), k: 0 }) {
            return Err(Error::InvariantViolation("small-payment shortcut not 3-EF".into()));
        }
        return Ok((alloc, p));
    }
    let class = classify(&alloc, &p, &bform.k)?;
    if class.high.is_empty() {
        // no top-band chores: every agent is low or middle, 2-EFX already
        if !is_fair(inst, &alloc, None, &Criterion::Efx { alpha: qi(2) }) {
            return Err(Error::InvariantViolation("no-high shortcut not 2-EFX".into()));
        }
        return Ok((alloc, p));
    }
    let low_cap = qr(4, 3) + &(&(&rho * &bform.k) / &qi(3));
    let mut state = SwapState {
        inst,
        p: &p,
        rho: class.rho.clone(),
        bundles: alloc.bundles().to_vec(),
        classes: class.classes,
        high: class.high,
        alpha: qi(3),
        floor: half,
        low_cap,
        phase1: true,
    };
    state.assert_invariants()?;
    state.phase1()?;
    state.phase2()?;
    let out = IntegralAllocation::new(state.bundles, m)?;
    if !is_fair(inst, &out, None, &Criterion::Efx { alpha: qi(3) }) {
        return Err(Error::InvariantViolation("large bivalued output not 3-EFX".into()));
    }
    if !mpb_certificate(&out, &p, inst) {
        return Err(Error::InvariantViolation("large bivalued output lost MPB".into()));
    }
    Ok((out, p))
}

/// Exact EFX and fPO for a bivalued instance with `m <= 2n`. Starts from
/// the balanced allocation, whose payments normalize to `{1, k}`, then runs
/// the same two swap phases with exact EFX tests.
pub fn bivalued_efx_po_small(bform: &BivaluedForm) -> Result<(IntegralAllocation, PaymentVector)> {
    let inst = &bform.scaled;
    let n = inst.n();
    let m = inst.m();
    if m > 2 * n {
        return Err(Error::PreconditionViolated(format!(
            "the small bivalued pipeline needs m <= 2n, got n={n}, m={m}"
        )));
    }
    let (alloc, p_raw) = balanced_po(inst)?;
    if m <= n {
        // singleton bundles are EFX outright
        return Ok((alloc, p_raw));
    }
    // payments are powers of k spanning one step; normalize to {1, k}
    let p_min = p_raw.iter().min().unwrap().clone();
    let normalized: Vec<Q> = p_raw.iter().map(|v| v / &p_min).collect();
    for (j, v) in normalized.iter().enumerate() {
        if v != &Q::one() && v != &bform.k {
            return Err(Error::InvariantViolation(format!(
                "balanced payment p[{j}] normalizes to {}, not 1 or k",
                fmt_q(v)
            )));
        }
    }
    let p = PaymentVector::new(normalized)?;
    if !mpb_certificate(&alloc, &p, inst) {
        return Err(Error::InvariantViolation("normalizing payments lost MPB".into()));
    }
    let class = classify(&alloc, &p, &bform.k)?;
    if class.high.is_empty() {
        if !is_fair(inst, &alloc, None, &Criterion::Efx { alpha: Q::one() }) {
            return Err(Error::InvariantViolation("uniform-payment balance not EFX".into()));
        }
        return Ok((alloc, p));
    }
    if !class.middle.is_empty() {
        return Err(Error::InvariantViolation("two-valued payments have no middle band".into()));
    }
    let mut state = SwapState {
        inst,
        p: &p,
        rho: class.rho.clone(),
        bundles: alloc.bundles().to_vec(),
        classes: class.classes,
        high: class.high,
        alpha: Q::one(),
        floor: Q::one(),
        low_cap: Q::one() + &bform.k,
        phase1: true,
    };
    state.assert_invariants()?;
    state.phase1()?;
    state.phase2()?;
    let out = IntegralAllocation::new(state.bundles, m)?;
    if !is_fair(inst, &out, None, &Criterion::Efx { alpha: Q::one() }) {
        return Err(Error::InvariantViolation("small bivalued output not EFX".into()));
    }
    if !mpb_certificate(&out, &p, inst) {
        return Err(Error::InvariantViolation("small bivalued output lost MPB".into()));
    }
    Ok((out, p))
}
