//! Competitive-equilibrium machinery for fair chore division.
//!
//! The crate computes earning-restricted (ER) competitive equilibria of
//! chore-division instances — either with a complementary-pivot solver on an
//! augmented LCP, or by enumerating forest consumption graphs for small agent
//! counts — and rounds the fractional equilibria into integral allocations
//! with payment certificates: 2-EF2, (n-1)-EF1, 4-EFX, and for bivalued
//! instances 3-EFX/EFX, all fPO. Everything runs in exact rational
//! arithmetic; there is no floating point anywhere in the core.

pub mod bivalued;
pub mod efx;
pub mod enumerate;
pub mod instances;
pub mod lcp;
pub mod market;
pub mod report;
pub mod rounding;
pub mod verify;

use num::BigRational;

/// Exact rational scalar used everywhere in the crate.
pub type Q = BigRational;

/// `Q` from an integer.
pub fn qi(n: i64) -> Q {
    Q::from_integer(n.into())
}

/// `Q` from a numerator/denominator pair.
pub fn qr(num: i64, den: i64) -> Q {
    Q::new(num.into(), den.into())
}

/// Parses `"num/den"` or a bare integer into a `Q`.
pub fn parse_q(s: &str) -> Result<Q> {
    let bad = || Error::Parse(format!("invalid rational {s:?}"));
    let mut parts = s.splitn(2, '/');
    let num: num::BigInt = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    let den: num::BigInt = match parts.next() {
        Some(d) => d.trim().parse().map_err(|_| bad())?,
        None => 1.into(),
    };
    if den == 0.into() {
        return Err(bad());
    }
    Ok(Q::new(num, den))
}

/// Renders a `Q` as `"num/den"` (always with an explicit denominator).
pub fn fmt_q(q: &Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Crate-wide error type. Variants map onto CLI exit codes via
/// [`Error::exit_code`]: precondition failures exit 2, budget exhaustion 3,
/// and internal invariant violations (bug class) 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("disutility at agent {agent}, chore {chore} is not positive")]
    NonPositiveDisutility { agent: usize, chore: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("instance has {0} distinct values, expected exactly two")]
    NotBivalued(usize),
    #[error("instance has a single distinct value; route it to balanced_po instead")]
    SingleValued,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema version {found} not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("not an ER equilibrium: {0}")]
    NotAnEquilibrium(String),
    #[error("infeasible earning requirements: sum e_i = {sum_e} exceeds sum c_j = {sum_c}")]
    InfeasibleEarning { sum_e: String, sum_c: String },
    #[error("Lemke pivoting reached a secondary ray (contradicts no-secondary-ray guarantee); trace has {pivots} pivots")]
    SecondaryRayReached { pivots: usize },
    #[error("Lemke pivoting exceeded the cap of {0} pivots")]
    IterationCapExceeded(usize),
    #[error("LCP solution is not good: {0}")]
    NotGoodSolution(String),
    #[error("ratio test unbounded: no candidate leaving row")]
    Unbounded,
    #[error("enumeration supports at most {max} agents, instance has {n}")]
    TooManyAgents { n: usize, max: usize },
    #[error("consumption-graph enumeration exhausted without finding an equilibrium (bug: existence is guaranteed)")]
    ExhaustedWithoutEquilibrium,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("instance has {m} chores, more than twice the {n} agents")]
    TooManyChores { m: usize, n: usize },
    #[error("invariant violation (bug class): {0}")]
    InvariantViolation(String),
    #[error("payments required for payment-based fairness criteria")]
    MissingPayments,
    #[error("search space {space} exceeds cap {cap}")]
    TooLarge { space: String, cap: String },
    #[error("fractional allocation does not fully allocate chore {0}")]
    IncompleteFractional(usize),
    #[error("solver budget exceeded: {0}")]
    SolverBudgetExceeded(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            PreconditionViolated(_)
            | NonPositiveDisutility { .. }
            | DimensionMismatch(_)
            | NotBivalued(_)
            | SingleValued
            | InfeasibleEarning { .. }
            | TooManyAgents { .. }
            | TooManyChores { .. }
            | MissingPayments
            | TooLarge { .. }
            | IncompleteFractional(_)
            | NotAnEquilibrium(_)
            | Parse(_)
            | SchemaVersionMismatch { .. }
            | Io(_) => 2,
            IterationCapExceeded(_) | SolverBudgetExceeded(_) => 3,
            SecondaryRayReached { .. }
            | NotGoodSolution(_)
            | Unbounded
            | ExhaustedWithoutEquilibrium
            | InvariantViolation(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_round_trips_through_text() {
        let v = qr(4, 3);
        assert_eq!(parse_q(&fmt_q(&v)).unwrap(), v);
        assert_eq!(parse_q("5").unwrap(), qi(5));
        assert_eq!(parse_q("-7/2").unwrap(), qr(-7, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("x").is_err());
    }
}
