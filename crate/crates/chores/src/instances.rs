//! Instance model: disutility matrices, ER instances, allocations, payments,
//! bivalued normal forms, JSON round-tripping and seeded random generation.
//!
//! All numeric payloads are exact rationals serialized as `"num/den"`
//! strings. Every file carries a schema version field `"v": 1`.

use crate::{fmt_q, parse_q, qi, Error, Q, Result};
use num::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::BTreeSet;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// A chore-division instance: `n` agents, `m` chores, and an `n x m` matrix
/// of strictly positive disutilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    n: usize,
    m: usize,
    d: Vec<Vec<Q>>,
}

impl Instance {
    /// Checks dimensions and positivity of a raw disutility matrix.
    pub fn validate(n: usize, m: usize, d: Vec<Vec<Q>>) -> Result<Instance> {
        if n == 0 {
            return Err(Error::DimensionMismatch("need at least one agent".into()));
        }
        if d.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "declared n={n} but matrix has {} rows",
                d.len()
            )));
        }
        for (i, row) in d.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "declared m={m} but row {i} has {} entries",
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_positive() {
                    return Err(Error::NonPositiveDisutility { agent: i, chore: j });
                }
            }
        }
        Ok(Instance { n, m, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self, agent: usize, chore: usize) -> &Q {
        &self.d[agent][chore]
    }

    pub fn row(&self, agent: usize) -> &[Q] {
        &self.d[agent]
    }

    /// Additive disutility of a bundle for an agent.
    pub fn bundle_disutility(&self, agent: usize, bundle: &[usize]) -> Q {
        bundle.iter().map(|&j| self.d[agent][j].clone()).sum()
    }

    /// Restriction of the instance to a subset of chores, in the given order.
    pub fn restrict_chores(&self, chores: &[usize]) -> Instance {
        let d = (0..self.n)
            .map(|i| chores.iter().map(|&j| self.d[i][j].clone()).collect())
            .collect();
        Instance { n: self.n, m: chores.len(), d }
    }

    /// Same instance with agent rows permuted: row `i` of the result is row
    /// `order[i]` of `self`.
    pub fn permute_agents(&self, order: &[usize]) -> Instance {
        let d = order.iter().map(|&i| self.d[i].clone()).collect();
        Instance { n: self.n, m: self.m, d }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "v": SCHEMA_VERSION,
            "n": self.n,
            "m": self.m,
            "d": matrix_to_json(&self.d),
        })
    }

    pub fn from_json(v: &Value) -> Result<Instance> {
        check_version(v)?;
        let n = get_usize(v, "n")?;
        let m = get_usize(v, "m")?;
        let d = matrix_from_json(v.get("d").ok_or_else(|| miss("d"))?)?;
        Instance::validate(n, m, d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.to_json())
    }

    pub fn load(path: &Path) -> Result<Instance> {
        Instance::from_json(&read_json(path)?)
    }
}

/// An ER competitive-equilibrium problem: an instance plus agent earning
/// requirements `e` and per-chore earning limits `c`, all positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErInstance {
    pub base: Instance,
    e: Vec<Q>,
    c: Vec<Q>,
}

impl ErInstance {
    pub fn new(base: Instance, e: Vec<Q>, c: Vec<Q>) -> Result<ErInstance> {
        if e.len() != base.n() {
            return Err(Error::DimensionMismatch(format!(
                "e has {} entries for {} agents",
                e.len(),
                base.n()
            )));
        }
        if c.len() != base.m() {
            return Err(Error::DimensionMismatch(format!(
                "c has {} entries for {} chores",
                c.len(),
                base.m()
            )));
        }
        if let Some(i) = e.iter().position(|v| !v.is_positive()) {
            return Err(Error::PreconditionViolated(format!("e[{i}] must be positive")));
        }
        if let Some(j) = c.iter().position(|v| !v.is_positive()) {
            return Err(Error::PreconditionViolated(format!("c[{j}] must be positive")));
        }
        Ok(ErInstance { base, e, c })
    }

    /// Uniform requirements `e_i = 1` and uniform cap `c_j = beta`.
    pub fn uniform(base: Instance, beta: Q) -> Result<ErInstance> {
        let n = base.n();
        let m = base.m();
        ErInstance::new(base, vec![Q::one(); n], vec![beta; m])
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn m(&self) -> usize {
        self.base.m()
    }

    pub fn e(&self, agent: usize) -> &Q {
        &self.e[agent]
    }

    pub fn c(&self, chore: usize) -> &Q {
        &self.c[chore]
    }

    pub fn sum_e(&self) -> Q {
        self.e.iter().cloned().sum()
    }

    pub fn sum_c(&self) -> Q {
        self.c.iter().cloned().sum()
    }

    /// The existence condition: total requirements do not exceed total caps.
    pub fn feasible_earning(&self) -> bool {
        self.sum_e() <= self.sum_c()
    }

    pub fn to_json(&self) -> Value {
        let mut v = self.base.to_json();
        v["e"] = Value::Array(self.e.iter().map(|q| Value::String(fmt_q(q))).collect());
        v["c"] = Value::Array(self.c.iter().map(|q| Value::String(fmt_q(q))).collect());
        v
    }

    pub fn from_json(v: &Value) -> Result<ErInstance> {
        let base = Instance::from_json(v)?;
        let e = vec_from_json(v.get("e").ok_or_else(|| miss("e"))?)?;
        let c = vec_from_json(v.get("c").ok_or_else(|| miss("c"))?)?;
        ErInstance::new(base, e, c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.to_json())
    }

    pub fn load(path: &Path) -> Result<ErInstance> {
        ErInstance::from_json(&read_json(path)?)
    }
}

/// Chore payments, all strictly positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaymentVector(Vec<Q>);

impl PaymentVector {
    pub fn new(p: Vec<Q>) -> Result<PaymentVector> {
        if let Some(j) = p.iter().position(|v| !v.is_positive()) {
            return Err(Error::PreconditionViolated(format!("payment p[{j}] must be positive")));
        }
        Ok(PaymentVector(p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> &Q {
        &self.0[j]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Q> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Q] {
        &self.0
    }

    /// Scales every payment by a positive factor.
    pub fn scaled(&self, factor: &Q) -> PaymentVector {
        PaymentVector(self.0.iter().map(|p| p * factor).collect())
    }
}

impl std::ops::Index<usize> for PaymentVector {
    type Output = Q;
    fn index(&self, j: usize) -> &Q {
        &self.0[j]
    }
}

/// A partial fractional allocation: `x[i][j]` in `[0,1]`, column sums at
/// most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalAllocation {
    x: Vec<Vec<Q>>,
}

impl FractionalAllocation {
    pub fn new(x: Vec<Vec<Q>>) -> Result<FractionalAllocation> {
        let n = x.len();
        if n == 0 {
            return Err(Error::DimensionMismatch("empty allocation matrix".into()));
        }
        let m = x[0].len();
        for (i, row) in x.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch(format!("allocation row {i} ragged")));
            }
            for (j, v) in row.iter().enumerate() {
                if v.is_negative() || v > &Q::one() {
                    return Err(Error::PreconditionViolated(format!(
                        "x[{i}][{j}] outside [0,1]"
                    )));
                }
            }
        }
        for j in 0..m {
            let col: Q = x.iter().map(|row| row[j].clone()).sum();
            if col > Q::one() {
                return Err(Error::PreconditionViolated(format!(
                    "chore {j} over-allocated: column sum {col}"
                )));
            }
        }
        Ok(FractionalAllocation { x })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn m(&self) -> usize {
        self.x[0].len()
    }

    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.x[i][j]
    }

    pub fn column_sum(&self, j: usize) -> Q {
        self.x.iter().map(|row| row[j].clone()).sum()
    }

    /// The 0/1 indicator allocation of an integral allocation.
    pub fn indicator(alloc: &IntegralAllocation, m: usize) -> FractionalAllocation {
        let mut x = vec![vec![Q::zero(); m]; alloc.n()];
        for (i, bundle) in alloc.bundles().iter().enumerate() {
            for &j in bundle {
                x[i][j] = Q::one();
            }
        }
        FractionalAllocation { x }
    }
}

/// An integral allocation: bundles partition the chore set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralAllocation {
    bundles: Vec<Vec<usize>>,
    m: usize,
}

impl IntegralAllocation {
    pub fn new(bundles: Vec<Vec<usize>>, m: usize) -> Result<IntegralAllocation> {
        let mut seen = vec![false; m];
        for bundle in &bundles {
            for &j in bundle {
                if j >= m {
                    return Err(Error::DimensionMismatch(format!("chore index {j} out of range")));
                }
                if seen[j] {
                    return Err(Error::PreconditionViolated(format!(
                        "chore {j} assigned more than once"
                    )));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::PreconditionViolated(format!("chore {j} unassigned")));
        }
        let mut sorted = bundles;
        for b in &mut sorted {
            b.sort_unstable();
        }
        Ok(IntegralAllocation { bundles: sorted, m })
    }

    /// Builds from an owner vector: `owner[j]` is the agent holding chore `j`.
    pub fn from_owner(owner: &[usize], n: usize) -> Result<IntegralAllocation> {
        let mut bundles = vec![Vec::new(); n];
        for (j, &i) in owner.iter().enumerate() {
            if i >= n {
                return Err(Error::DimensionMismatch(format!("agent index {i} out of range")));
            }
            bundles[i].push(j);
        }
        IntegralAllocation::new(bundles, owner.len())
    }

    pub fn n(&self) -> usize {
        self.bundles.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bundles(&self) -> &[Vec<usize>] {
        &self.bundles
    }

    pub fn bundle(&self, i: usize) -> &[usize] {
        &self.bundles[i]
    }

    pub fn owner_of(&self, chore: usize) -> usize {
        self.bundles
            .iter()
            .position(|b| b.contains(&chore))
            .expect("chore owned by construction")
    }

    pub fn to_json(&self, payments: Option<&PaymentVector>) -> Value {
        let mut v = json!({
            "v": SCHEMA_VERSION,
            "bundles": self.bundles,
        });
        if let Some(p) = payments {
            v["payments"] = Value::Array(p.iter().map(|q| Value::String(fmt_q(q))).collect());
        }
        v
    }

    pub fn from_json(v: &Value) -> Result<(IntegralAllocation, Option<PaymentVector>)> {
        check_version(v)?;
        let raw = v.get("bundles").ok_or_else(|| miss("bundles"))?;
        let arr = raw.as_array().ok_or_else(|| Error::Parse("bundles must be an array".into()))?;
        let mut bundles = Vec::with_capacity(arr.len());
        let mut max_chore = None;
        for b in arr {
            let idx: Vec<usize> = b
                .as_array()
                .ok_or_else(|| Error::Parse("bundle must be an array".into()))?
                .iter()
                .map(|x| {
                    x.as_u64()
                        .map(|u| u as usize)
                        .ok_or_else(|| Error::Parse("chore index must be an integer".into()))
                })
                .collect::<Result<_>>()?;
            if let Some(mx) = idx.iter().max() {
                max_chore = Some(max_chore.map_or(*mx, |c: usize| c.max(*mx)));
            }
            bundles.push(idx);
        }
        let m = max_chore.map_or(0, |mx| mx + 1);
        let alloc = IntegralAllocation::new(bundles, m)?;
        let payments = match v.get("payments") {
            Some(pv) => Some(PaymentVector::new(vec_from_json(pv)?)?),
            None => None,
        };
        Ok((alloc, payments))
    }

    pub fn save(&self, path: &Path, payments: Option<&PaymentVector>) -> Result<()> {
        write_json(path, &self.to_json(payments))
    }

    pub fn load(path: &Path) -> Result<(IntegralAllocation, Option<PaymentVector>)> {
        IntegralAllocation::from_json(&read_json(path)?)
    }
}

/// Bivalued normal form: all disutilities in `{a, b}` with `a < b`, rescaled
/// so entries lie in `{1, k}` with `k = b/a > 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BivaluedForm {
    pub a: Q,
    pub b: Q,
    pub k: Q,
    pub scaled: Instance,
}

/// Rescales a two-valued instance to `{1, k}` form. Instances with a single
/// distinct value are refused (`SingleValued`): any balanced allocation is
/// already EF1 for them, so callers route those to `balanced_po`.
pub fn normalize_bivalued(inst: &Instance) -> Result<BivaluedForm> {
    let mut values = BTreeSet::new();
    for i in 0..inst.n() {
        for j in 0..inst.m() {
            values.insert(inst.d(i, j).clone());
        }
    }
    match values.len() {
        0 | 1 => Err(Error::SingleValued),
        2 => {
            let mut it = values.into_iter();
            let a = it.next().unwrap();
            let b = it.next().unwrap();
            let k = &b / &a;
            let d = (0..inst.n())
                .map(|i| (0..inst.m()).map(|j| inst.d(i, j) / &a).collect())
                .collect();
            let scaled = Instance::validate(inst.n(), inst.m(), d)?;
            Ok(BivaluedForm { a, b, k, scaled })
        }
        len => Err(Error::NotBivalued(len)),
    }
}

/// Value models for the seeded generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueModel {
    /// Entries `num/den` with `num` in `1..=12`, `den` in `1..=4`.
    Uniform,
    /// Every entry is one of the two given positive values.
    Bivalued(Q, Q),
    /// Each agent draws her own pair of values; entries come from that pair.
    TwoAry,
}

/// Deterministic instance generator: a pure function of its arguments.
pub fn random_instance(n: usize, m: usize, model: &ValueModel, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Vec::with_capacity(n);
    for _ in 0..n {
        let row_pair = match model {
            ValueModel::TwoAry => {
                let a = qi(rng.gen_range(1..=4i64));
                let mut b = qi(rng.gen_range(2..=9i64));
                if b == a {
                    b = &a + qi(1);
                }
                Some((a, b))
            }
            _ => None,
        };
        let mut row = Vec::with_capacity(m);
        for _ in 0..m {
            let v = match model {
                ValueModel::Uniform => {
                    let num = rng.gen_range(1..=12i64);
                    let den = rng.gen_range(1..=4i64);
                    Q::new(num.into(), den.into())
                }
                ValueModel::Bivalued(a, b) => {
                    if rng.gen_bool(0.5) {
                        a.clone()
                    } else {
                        b.clone()
                    }
                }
                ValueModel::TwoAry => {
                    let (a, b) = row_pair.as_ref().unwrap();
                    if rng.gen_bool(0.5) {
                        a.clone()
                    } else {
                        b.clone()
                    }
                }
            };
            row.push(v);
        }
        d.push(row);
    }
    Instance::validate(n, m, d).expect("generator produces valid instances")
}

// --- JSON helpers -----------------------------------------------------------

fn miss(field: &str) -> Error {
    Error::Parse(format!("missing field {field:?}"))
}

fn check_version(v: &Value) -> Result<()> {
    let found = v
        .get("v")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Parse("missing schema version field \"v\"".into()))? as u32;
    if found != SCHEMA_VERSION {
        return Err(Error::SchemaVersionMismatch { found, expected: SCHEMA_VERSION });
    }
    Ok(())
}

fn get_usize(v: &Value, field: &str) -> Result<usize> {
    v.get(field)
        .and_then(Value::as_u64)
        .map(|u| u as usize)
        .ok_or_else(|| miss(field))
}

pub(crate) fn vec_to_json(v: &[Q]) -> Value {
    Value::Array(v.iter().map(|q| Value::String(fmt_q(q))).collect())
}

pub(crate) fn vec_from_json(v: &Value) -> Result<Vec<Q>> {
    v.as_array()
        .ok_or_else(|| Error::Parse("expected an array of rationals".into()))?
        .iter()
        .map(|x| {
            x.as_str()
                .ok_or_else(|| Error::Parse("rationals must be \"num/den\" strings".into()))
                .and_then(parse_q)
        })
        .collect()
}

pub(crate) fn matrix_to_json(mat: &[Vec<Q>]) -> Value {
    Value::Array(mat.iter().map(|row| vec_to_json(row)).collect())
}

pub(crate) fn matrix_from_json(v: &Value) -> Result<Vec<Vec<Q>>> {
    v.as_array()
        .ok_or_else(|| Error::Parse("expected a matrix of rationals".into()))?
        .iter()
        .map(vec_from_json)
        .collect()
}

pub(crate) fn write_json(path: &Path, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)
        .map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub(crate) fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

/// The running 3x4 example instance used across fixtures: three agents, four
/// chores, disutilities [[2,1,2,2],[4,1,1,2],[9,2,1,1]].
pub fn example_3x4() -> Instance {
    let d = vec![
        vec![qi(2), qi(1), qi(2), qi(2)],
        vec![qi(4), qi(1), qi(1), qi(2)],
        vec![qi(9), qi(2), qi(1), qi(1)],
    ];
    Instance::validate(3, 4, d).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qr;

    #[test]
    fn validate_accepts_the_3x4_example() {
        let inst = example_3x4();
        assert_eq!(inst.n(), 3);
        assert_eq!(inst.m(), 4);
        assert_eq!(*inst.d(2, 0), qi(9));
    }

    #[test]
    fn validate_rejects_zero_entries() {
        let d = vec![vec![qi(1), qi(0)], vec![qi(1), qi(1)]];
        match Instance::validate(2, 2, d) {
            Err(Error::NonPositiveDisutility { agent: 0, chore: 1 }) => {}
            other => panic!("expected NonPositiveDisutility, got {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_dimension_mismatch() {
        let d = vec![vec![qi(1), qi(1), qi(1)], vec![qi(1), qi(1), qi(1)]];
        assert!(matches!(Instance::validate(3, 3, d), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn normalize_bivalued_scales_to_unit_form() {
        let d = vec![vec![qi(2), qi(6)], vec![qi(6), qi(2)]];
        let inst = Instance::validate(2, 2, d).unwrap();
        let bf = normalize_bivalued(&inst).unwrap();
        assert_eq!(bf.k, qi(3));
        assert_eq!(*bf.scaled.d(0, 0), qi(1));
        assert_eq!(*bf.scaled.d(0, 1), qi(3));
        // rescaling back reproduces the original matrix exactly
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(bf.scaled.d(i, j) * &bf.a, *inst.d(i, j));
            }
        }
    }

    #[test]
    fn normalize_bivalued_rejects_three_values_and_single_value() {
        let d = vec![vec![qi(1), qi(2)], vec![qi(3), qi(1)]];
        let inst = Instance::validate(2, 2, d).unwrap();
        assert!(matches!(normalize_bivalued(&inst), Err(Error::NotBivalued(3))));
        let d = vec![vec![qi(5), qi(5)], vec![qi(5), qi(5)]];
        let inst = Instance::validate(2, 2, d).unwrap();
        assert!(matches!(normalize_bivalued(&inst), Err(Error::SingleValued)));
    }

    #[test]
    fn random_instance_is_deterministic_and_valid() {
        let a = random_instance(3, 6, &ValueModel::Uniform, 7);
        let b = random_instance(3, 6, &ValueModel::Uniform, 7);
        assert_eq!(a, b);
        let c = random_instance(3, 7, &ValueModel::Uniform, 2);
        assert_eq!(c.n(), 3);
        assert_eq!(c.m(), 7);
        let biv = random_instance(2, 4, &ValueModel::Bivalued(qi(1), qi(3)), 1);
        for i in 0..2 {
            for j in 0..4 {
                assert!(*biv.d(i, j) == qi(1) || *biv.d(i, j) == qi(3));
            }
        }
    }

    #[test]
    fn two_ary_model_draws_per_agent_pairs() {
        let inst = random_instance(3, 8, &ValueModel::TwoAry, 5);
        for i in 0..3 {
            let mut values: Vec<&Q> = (0..8).map(|j| inst.d(i, j)).collect();
            values.sort();
            values.dedup();
            assert!(values.len() <= 2, "agent {i} has {} distinct values", values.len());
        }
        assert_eq!(inst, random_instance(3, 8, &ValueModel::TwoAry, 5));
    }

    #[test]
    fn json_round_trip_is_identity() {
        let inst = example_3x4();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst, back);

        let er = ErInstance::uniform(inst.clone(), qr(1, 2)).unwrap();
        let back = ErInstance::from_json(&er.to_json()).unwrap();
        assert_eq!(er, back);

        let alloc = IntegralAllocation::new(vec![vec![0], vec![1, 2], vec![3]], 4).unwrap();
        let p = PaymentVector::new(vec![qr(4, 3), qr(2, 3), qr(2, 3), qr(2, 3)]).unwrap();
        let (alloc2, p2) = IntegralAllocation::from_json(&alloc.to_json(Some(&p))).unwrap();
        assert_eq!(alloc, alloc2);
        assert_eq!(Some(p), p2);
    }

    #[test]
    fn rational_4_3_survives_round_trip_exactly() {
        let d = vec![vec![qr(4, 3)]];
        let inst = Instance::validate(1, 1, d).unwrap();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(*back.d(0, 0), qr(4, 3));
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let dir = std::env::temp_dir().join("chores_trunc_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.json");
        std::fs::write(&path, "{\"v\":1,\"n\":3,").unwrap();
        assert!(matches!(Instance::load(&path), Err(Error::Parse(_))));
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let mut v = example_3x4().to_json();
        v["v"] = json!(2);
        assert!(matches!(
            Instance::from_json(&v),
            Err(Error::SchemaVersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn owner_vector_round_trip() {
        let alloc = IntegralAllocation::from_owner(&[0, 1, 1, 2], 3).unwrap();
        assert_eq!(alloc.bundle(1), &[1, 2]);
        assert_eq!(alloc.owner_of(3), 2);
        assert!(IntegralAllocation::new(vec![vec![0], vec![0]], 1).is_err());
        assert!(IntegralAllocation::new(vec![vec![0], vec![]], 2).is_err());
    }
}
