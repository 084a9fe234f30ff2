//! Hybrid zero test: rational normal form first (sound "proven zero" and
//! exact nonzero witnesses), randomized sampling as a fallback when
//! transcendental atoms are present.

use super::poly::{to_ratfun, AtomTable};
use super::Expr;
use crate::error::KwError;
use crate::rat::{rat_to_f64, Rat};
use num_bigint::BigInt;
use num_traits::Zero;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct SamplePolicy {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
    /// Sample coordinates lie in [-box_bound, box_bound].
    pub box_bound: f64,
    /// Maximum denominator of sampled rational coordinates.
    pub max_den: u64,
}

impl Default for SamplePolicy {
    fn default() -> Self {
        SamplePolicy {
            samples: 12,
            tol: 1e-9,
            seed: 0,
            box_bound: 2.0,
            max_den: 1000,
        }
    }
}

impl SamplePolicy {
    pub fn with_seed(seed: u64) -> Self {
        SamplePolicy {
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ZeroVerdict {
    /// Identically zero as a rational function of variables and atoms.
    ProvenZero,
    /// All samples vanished within tolerance.
    ProbablyZero { samples: usize, tol: f64 },
    /// A concrete point where the expression does not vanish.
    NonZero {
        witness: Vec<(String, String)>,
        value: f64,
    },
}

impl ZeroVerdict {
    pub fn is_zero(&self) -> bool {
        !matches!(self, ZeroVerdict::NonZero { .. })
    }

    pub fn is_proven(&self) -> bool {
        matches!(self, ZeroVerdict::ProvenZero)
    }

    /// Combines verdicts for the components of a compound object: any
    /// nonzero wins, otherwise the weakest zero verdict is kept.
    pub fn combine(verdicts: impl IntoIterator<Item = ZeroVerdict>) -> ZeroVerdict {
        let mut out = ZeroVerdict::ProvenZero;
        for v in verdicts {
            match v {
                ZeroVerdict::NonZero { .. } => return v,
                ZeroVerdict::ProbablyZero { .. } => out = v,
                ZeroVerdict::ProvenZero => {}
            }
        }
        out
    }
}

fn random_rat(rng: &mut ChaCha8Rng, policy: &SamplePolicy) -> Rat {
    let den = rng.gen_range(1..=policy.max_den as i64);
    let span = (policy.box_bound * den as f64).floor() as i64;
    let num = rng.gen_range(-span..=span);
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Decides whether `e` vanishes identically on its variables.
pub fn zero_test(e: &Expr, policy: &SamplePolicy) -> Result<ZeroVerdict, KwError> {
    let mut atoms = AtomTable::default();
    match to_ratfun(e, &mut atoms) {
        Ok(rf) => {
            if rf.num.is_zero() {
                return Ok(ZeroVerdict::ProvenZero);
            }
            if atoms.is_empty() {
                return exact_witness(e, &rf.num, &rf.den, policy);
            }
        }
        Err(_) => {
            // A denominator vanished identically; fall through to sampling,
            // which will report the failure if every point is singular.
        }
    }
    sample_test(e, policy)
}

/// Pure rational case: the numerator polynomial is nonzero, so a witness
/// point exists; search with exact arithmetic.
fn exact_witness(
    e: &Expr,
    num: &super::poly::Poly,
    den: &super::poly::Poly,
    policy: &SamplePolicy,
) -> Result<ZeroVerdict, KwError> {
    let vars: Vec<String> = e.vars().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    for _ in 0..200 {
        let point: BTreeMap<String, Rat> = vars
            .iter()
            .map(|v| (v.clone(), random_rat(&mut rng, policy)))
            .collect();
        let dv = den.eval(&point)?;
        if dv.is_zero() {
            continue;
        }
        let nv = num.eval(&point)?;
        if !nv.is_zero() {
            let value = rat_to_f64(&nv) / rat_to_f64(&dv);
            let witness = point
                .into_iter()
                .map(|(k, v)| (k, format!("{}", v)))
                .collect();
            return Ok(ZeroVerdict::NonZero { witness, value });
        }
    }
    // A nonzero polynomial that evades 200 random points would need
    // enormous degree; treat as a sampling failure.
    Err(KwError::Inconclusive(200))
}

fn sample_test(e: &Expr, policy: &SamplePolicy) -> Result<ZeroVerdict, KwError> {
    let vars: Vec<String> = e.vars().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut good = 0usize;
    let mut attempts = 0usize;
    let max_attempts = policy.samples * 50;
    while good < policy.samples && attempts < max_attempts {
        attempts += 1;
        let point: BTreeMap<String, f64> = vars
            .iter()
            .map(|v| (v.clone(), rat_to_f64(&random_rat(&mut rng, policy))))
            .collect();
        match e.eval_f64(&point) {
            Ok(v) if v.is_finite() => {
                if v.abs() > policy.tol {
                    let witness = point
                        .into_iter()
                        .map(|(k, x)| (k, format!("{}", x)))
                        .collect();
                    return Ok(ZeroVerdict::NonZero { witness, value: v });
                }
                good += 1;
            }
            _ => continue, // singular or out-of-domain point: resample
        }
    }
    if good < policy.samples {
        return Err(KwError::Inconclusive(attempts));
    }
    Ok(ZeroVerdict::ProbablyZero {
        samples: good,
        tol: policy.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rational_identity_is_proven() {
        let v = vars(&["x1", "x2"]);
        let e = parse_expr("(x1 + x2)^2 - x1^2 - 2*x1*x2 - x2^2", &v).unwrap();
        assert_eq!(zero_test(&e, &SamplePolicy::default()).unwrap(), ZeroVerdict::ProvenZero);
    }

    #[test]
    fn rational_nonzero_has_exact_witness() {
        let v = vars(&["x1"]);
        let e = parse_expr("x1^2 - 1", &v).unwrap();
        match zero_test(&e, &SamplePolicy::default()).unwrap() {
            ZeroVerdict::NonZero { witness, value } => {
                assert_eq!(witness.len(), 1);
                assert!(value.abs() > 1e-9);
            }
            other => panic!("expected NonZero, got {:?}", other),
        }
    }

    #[test]
    fn transcendental_identity_is_probably_zero() {
        let v = vars(&["x1"]);
        let e = parse_expr("exp(x1)*exp(-x1) - 1", &v).unwrap();
        match zero_test(&e, &SamplePolicy::default()).unwrap() {
            ZeroVerdict::ProbablyZero { samples, .. } => assert_eq!(samples, 12),
            other => panic!("expected ProbablyZero, got {:?}", other),
        }
    }

    #[test]
    fn transcendental_nonzero_detected() {
        let v = vars(&["x1"]);
        let e = parse_expr("exp(x1) - 1 - x1", &v).unwrap();
        assert!(!zero_test(&e, &SamplePolicy::default()).unwrap().is_zero());
    }

    #[test]
    fn shared_atom_cancellation_is_proven() {
        let v = vars(&["x1", "x2"]);
        // 2*exp(x1+x2) - exp(x1+x2) - exp(x1+x2) has a shared atom
        let e = parse_expr("2*exp(x1+x2) - exp(x1+x2) - exp(x1+x2)", &v).unwrap();
        assert_eq!(zero_test(&e, &SamplePolicy::default()).unwrap(), ZeroVerdict::ProvenZero);
    }

    #[test]
    fn deterministic_under_seed() {
        let v = vars(&["x1"]);
        let e = parse_expr("x1^3 - x1", &v).unwrap();
        let p = SamplePolicy::with_seed(42);
        let a = zero_test(&e, &p).unwrap();
        let b = zero_test(&e, &p).unwrap();
        assert_eq!(a, b);
    }
}
