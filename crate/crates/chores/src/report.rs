//! Pipeline orchestration (instance -> equilibrium -> rounding -> swaps ->
//! verification) and batch benchmarking. Every pipeline output is re-checked
//! by the verify module before it is returned; an unverified allocation is
//! never emitted.

use crate::instances::{
    normalize_bivalued, random_instance, ErInstance, Instance, IntegralAllocation, PaymentVector,
    ValueModel,
};
use crate::market::{mpb_certificate, ErEquilibrium};
use crate::verify::{achieved_alpha, is_fair, Criterion};
use crate::{fmt_q, qi, qr, Error, Q, Result};
use num::One;
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Pipeline goals, each backed by the corresponding existence theorem's
/// algorithm split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    /// 2-EF2 + PO (per agent: 2-EF1 or EF2)
    Ef2Po,
    /// (n-1)-EF1 + PO
    Ef1Po,
    /// EFX exactly for m <= 2n, 4-EFX above
    Efx,
    /// bivalued: EFX + PO for m <= 2n, 3-EFX + PO above
    Bivalued,
}

impl Goal {
    pub fn parse(s: &str) -> Result<Goal> {
        match s {
            "ef2po" => Ok(Goal::Ef2Po),
            "ef1po" => Ok(Goal::Ef1Po),
            "efx" => Ok(Goal::Efx),
            "bivalued" => Ok(Goal::Bivalued),
            other => Err(Error::Parse(format!("unknown goal {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Goal::Ef2Po => "ef2po",
            Goal::Ef1Po => "ef1po",
            Goal::Efx => "efx",
            Goal::Bivalued => "bivalued",
        }
    }
}

/// Equilibrium solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    /// enumeration for n <= 3, complementary pivoting otherwise
    Auto,
    Enumerate,
    Lemke,
}

impl SolverChoice {
    pub fn parse(s: &str) -> Result<SolverChoice> {
        match s {
            "auto" => Ok(SolverChoice::Auto),
            "enumerate" => Ok(SolverChoice::Enumerate),
            "lemke" => Ok(SolverChoice::Lemke),
            other => Err(Error::Parse(format!("unknown solver {other:?}"))),
        }
    }
}

/// Solves for an ER equilibrium with the selected backend; reports pivots
/// when the pivoting solver ran.
pub fn solve_equilibrium(
    er: &ErInstance,
    choice: SolverChoice,
    max_pivots: usize,
) -> Result<(ErEquilibrium, Option<usize>)> {
    let use_enum = match choice {
        SolverChoice::Enumerate => true,
        SolverChoice::Lemke => false,
        SolverChoice::Auto => er.n() <= 3,
    };
    if use_enum {
        let eq = crate::enumerate::find_er_equilibrium_enum(er, crate::enumerate::DEFAULT_MAX_AGENTS)?;
        Ok((eq, None))
    } else {
        let (eq, trace) = crate::lcp::solve_er(er, max_pivots, false)?;
        Ok((eq, Some(trace.steps.len())))
    }
}

/// A verified pipeline run: the allocation, its payment certificate when
/// the goal carries one, and the re-verifiable report.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub instance_digest: String,
    pub algorithm: String,
    pub goal: &'static str,
    pub n: usize,
    pub m: usize,
    pub efx_alpha: Option<Q>,
    pub ef1_alpha: Option<Q>,
    pub ef2_alpha: Option<Q>,
    pub certified_mpb: Option<bool>,
    pub pivots: Option<usize>,
    pub swaps: Option<usize>,
    pub wall_ms: Option<u128>,
}

impl RunReport {
    pub fn to_json(&self) -> Value {
        json!({
            "v": crate::instances::SCHEMA_VERSION,
            "instance_digest": self.instance_digest,
            "algorithm": self.algorithm,
            "goal": self.goal,
            "n": self.n,
            "m": self.m,
            "efx_alpha": self.efx_alpha.as_ref().map(fmt_q),
            "ef1_alpha": self.ef1_alpha.as_ref().map(fmt_q),
            "ef2_alpha": self.ef2_alpha.as_ref().map(fmt_q),
            "certified_mpb": self.certified_mpb,
            "pivots": self.pivots,
            "swaps": self.swaps,
            "wall_ms": self.wall_ms.map(|w| w as u64),
        })
    }

    pub fn csv_header() -> &'static str {
        "goal,algorithm,n,m,digest,efx_alpha,ef1_alpha,ef2_alpha,certified_mpb,pivots,swaps"
    }

    pub fn csv_row(&self) -> String {
        let opt_q = |v: &Option<Q>| v.as_ref().map(fmt_q).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.goal,
            self.algorithm,
            self.n,
            self.m,
            self.instance_digest,
            opt_q(&self.efx_alpha),
            opt_q(&self.ef1_alpha),
            opt_q(&self.ef2_alpha),
            self.certified_mpb.map(|b| b.to_string()).unwrap_or_default(),
            self.pivots.map(|p| p.to_string()).unwrap_or_default(),
            self.swaps.map(|s| s.to_string()).unwrap_or_default(),
        )
    }
}

/// Stable digest of the canonical instance JSON.
pub fn instance_digest(inst: &Instance) -> String {
    let text = serde_json::to_string(&inst.to_json()).expect("instance serializes");
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let out = hasher.finalize();
    out.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn factors(inst: &Instance, alloc: &IntegralAllocation) -> (Option<Q>, Option<Q>, Option<Q>) {
    (
        achieved_alpha(inst, alloc, true, 0),
        achieved_alpha(inst, alloc, false, 1),
        achieved_alpha(inst, alloc, false, 2),
    )
}

/// Runs the goal's algorithm split, re-verifies the guarantee, and reports.
pub fn pipeline(
    inst: &Instance,
    goal: Goal,
    solver: SolverChoice,
    max_pivots: usize,
) -> Result<(IntegralAllocation, Option<PaymentVector>, RunReport)> {
    let start = std::time::Instant::now();
    let n = inst.n();
    let m = inst.m();
    let mut pivots = None;
    let mut swaps = None;
    let (alloc, payments, algorithm, check_inst): (
        IntegralAllocation,
        Option<PaymentVector>,
        String,
        Instance,
    ) = match goal {
        Goal::Ef2Po => {
            if m <= 2 * n {
                let (alloc, p) = crate::rounding::balanced_po(inst)?;
                (alloc, Some(p), "balanced_po".into(), inst.clone())
            } else {
                let er = ErInstance::uniform(inst.clone(), qr(1, 2))?;
                let (eq, piv) = solve_equilibrium(&er, solver, max_pivots)?;
                pivots = piv;
                let (alloc, p) = crate::rounding::round_er_half(&eq, &er)?;
                (alloc, Some(p), "round_er_half".into(), inst.clone())
            }
        }
        Goal::Ef1Po => {
            if m <= n {
                let (alloc, p) = crate::rounding::balanced_po(inst)?;
                (alloc, Some(p), "balanced_po".into(), inst.clone())
            } else {
                let er = ErInstance::uniform(inst.clone(), Q::one())?;
                let (eq, piv) = solve_equilibrium(&er, solver, max_pivots)?;
                pivots = piv;
                let (alloc, p) = crate::rounding::rebalance_ef1(&eq, &er)?;
                (alloc, Some(p), "rebalance_ef1".into(), inst.clone())
            }
        }
        Goal::Efx => {
            if m <= 2 * n {
                let order: Vec<usize> = (0..n).collect();
                let alloc = crate::efx::efx_small(inst, &order)?;
                (alloc, None, "efx_small".into(), inst.clone())
            } else {
                let er = ErInstance::uniform(inst.clone(), qr(1, 2))?;
                let (eq, piv) = solve_equilibrium(&er, solver, max_pivots)?;
                pivots = piv;
                let (alloc, count) = crate::efx::four_efx_traced(&eq, &er)?;
                swaps = Some(count);
                (alloc, None, "four_efx".into(), inst.clone())
            }
        }
        Goal::Bivalued => match normalize_bivalued(inst) {
            Err(Error::SingleValued) => {
                let (alloc, p) = crate::rounding::balanced_po(inst)?;
                (alloc, Some(p), "balanced_po".into(), inst.clone())
            }
            Err(e) => return Err(e),
            Ok(bform) => {
                if m <= 2 * n {
                    let (alloc, p) = crate::bivalued::bivalued_efx_po_small(&bform)?;
                    (alloc, Some(p), "bivalued_efx_po_small".into(), bform.scaled.clone())
                } else {
                    let er = ErInstance::uniform(bform.scaled.clone(), qr(1, 2))?;
                    let (eq, piv) = solve_equilibrium(&er, solver, max_pivots)?;
                    pivots = piv;
                    let (alloc, p) = crate::bivalued::bivalued_3efx_po(&eq, &er, &bform)?;
                    (alloc, Some(p), "bivalued_3efx_po".into(), bform.scaled.clone())
                }
            }
        },
    };

    // re-verify the goal's guarantee before emitting anything
    let guarantee_ok = match goal {
        Goal::Ef2Po => (0..n).all(|i| {
            per_agent_efk(&check_inst, &alloc, i, &qi(2), 1)
                || per_agent_efk(&check_inst, &alloc, i, &Q::one(), 2)
        }),
        Goal::Ef1Po => {
            let alpha = if n <= 2 { Q::one() } else { qi(n as i64 - 1) };
            is_fair(&check_inst, &alloc, None, &Criterion::Efk { alpha, k: 1 })
        }
        Goal::Efx => {
            let alpha = if m <= 2 * n { Q::one() } else { qi(4) };
            is_fair(&check_inst, &alloc, None, &Criterion::Efx { alpha })
        }
        Goal::Bivalued => {
            let alpha = if m <= 2 * n { Q::one() } else { qi(3) };
            is_fair(&check_inst, &alloc, None, &Criterion::Efx { alpha })
        }
    };
    if !guarantee_ok {
        return Err(Error::InvariantViolation(format!(
            "pipeline output fails the {} guarantee",
            goal.name()
        )));
    }
    let certified_mpb = payments.as_ref().map(|p| mpb_certificate(&alloc, p, &check_inst));
    if certified_mpb == Some(false) {
        return Err(Error::InvariantViolation("payment certificate failed".into()));
    }
    let (efx_alpha, ef1_alpha, ef2_alpha) = factors(&check_inst, &alloc);
    let report = RunReport {
        instance_digest: instance_digest(inst),
        algorithm,
        goal: goal.name(),
        n,
        m,
        efx_alpha,
        ef1_alpha,
        ef2_alpha,
        certified_mpb,
        pivots,
        swaps,
        wall_ms: Some(start.elapsed().as_millis()),
    };
    Ok((alloc, payments, report))
}

fn per_agent_efk(inst: &Instance, alloc: &IntegralAllocation, i: usize, alpha: &Q, k: usize) -> bool {
    let bundle = alloc.bundle(i);
    let mut ds: Vec<Q> = bundle.iter().map(|&j| inst.d(i, j).clone()).collect();
    ds.sort_by(|a, b| b.cmp(a));
    let lhs: Q = ds.iter().skip(k).cloned().sum();
    (0..alloc.n()).all(|h| h == i || lhs <= alpha * &inst.bundle_disutility(i, alloc.bundle(h)))
}

/// One batch of generated instances to push through the pipeline.
#[derive(Debug, Clone)]
pub struct BenchBatch {
    pub n: usize,
    pub m: usize,
    pub model: ValueModel,
    pub count: usize,
    pub seed: u64,
    pub goals: Vec<Goal>,
}

pub fn parse_model(s: &str) -> Result<ValueModel> {
    if s == "uniform" {
        return Ok(ValueModel::Uniform);
    }
    if s == "2ary" {
        return Ok(ValueModel::TwoAry);
    }
    if let Some(rest) = s.strip_prefix("bivalued:") {
        let mut parts = rest.splitn(2, ',');
        let a = crate::parse_q(parts.next().unwrap_or(""))?;
        let b = crate::parse_q(
            parts.next().ok_or_else(|| Error::Parse("bivalued:a,b needs two values".into()))?,
        )?;
        return Ok(ValueModel::Bivalued(a, b));
    }
    Err(Error::Parse(format!("unknown value model {s:?}")))
}

pub fn model_name(model: &ValueModel) -> String {
    match model {
        ValueModel::Uniform => "uniform".into(),
        ValueModel::Bivalued(a, b) => format!("bivalued:{},{}", fmt_q(a), fmt_q(b)),
        ValueModel::TwoAry => "2ary".into(),
    }
}

pub fn batches_from_json(v: &Value) -> Result<Vec<BenchBatch>> {
    let arr = v
        .get("batches")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("bench config needs a \"batches\" array".into()))?;
    let mut out = Vec::new();
    for b in arr {
        let get = |f: &str| -> Result<u64> {
            b.get(f)
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::Parse(format!("batch field {f:?} missing")))
        };
        let model = parse_model(
            b.get("model")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Parse("batch field \"model\" missing".into()))?,
        )?;
        let goals = b
            .get("goals")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("batch field \"goals\" missing".into()))?
            .iter()
            .map(|g| {
                g.as_str()
                    .ok_or_else(|| Error::Parse("goal must be a string".into()))
                    .and_then(Goal::parse)
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(BenchBatch {
            n: get("n")? as usize,
            m: get("m")? as usize,
            model,
            count: get("count")? as usize,
            seed: get("seed")?,
            goals,
        });
    }
    Ok(out)
}

/// Runs every batch through its goals. Instances run in parallel workers;
/// rows come back ordered by (batch, instance index, goal), and wall times
/// are omitted so identical configs produce identical files. The returned
/// summary maps each goal to the worst factor observed for it.
pub fn bench(batches: &[BenchBatch], solver: SolverChoice, max_pivots: usize) -> Result<(Vec<RunReport>, Vec<(String, Q)>)> {
    let mut rows = Vec::new();
    for batch in batches {
        let mut batch_rows: Vec<RunReport> = (0..batch.count)
            .into_par_iter()
            .map(|idx| {
                let inst = random_instance(batch.n, batch.m, &batch.model, batch.seed + idx as u64);
                batch
                    .goals
                    .iter()
                    .map(|&goal| {
                        let (_, _, mut report) = pipeline(&inst, goal, solver, max_pivots)?;
                        report.wall_ms = None;
                        Ok(report)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<Vec<_>>>>()?
            .into_iter()
            .flatten()
            .collect();
        rows.append(&mut batch_rows);
    }
    let mut worst: Vec<(String, Q)> = Vec::new();
    for row in &rows {
        if let Some(alpha) = &row.efx_alpha {
            match worst.iter_mut().find(|(g, _)| g == row.goal) {
                Some((_, w)) => {
                    if alpha > w {
                        *w = alpha.clone();
                    }
                }
                None => worst.push((row.goal.to_string(), alpha.clone())),
            }
        }
    }
    Ok((rows, worst))
}
