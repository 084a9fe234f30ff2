//! Extraction of polynomial coefficients in a distinguished parameter via
//! exact Vandermonde interpolation at integer nodes.

use super::zero::{zero_test, SamplePolicy, ZeroVerdict};
use super::{Expr, Node};
use crate::error::KwError;
use crate::linalg::Mat;
use crate::rat::{rat_int, Rat};

/// Structural degree bound of `e` in `var`; `None` when `e` is not
/// polynomial in `var` (it appears under a quotient denominator, negative
/// power or transcendental function).
pub fn deg_bound_in(e: &Expr, var: &str) -> Option<usize> {
    if !e.contains_var(var) {
        return Some(0);
    }
    match e.node() {
        Node::Rat(_) => Some(0),
        Node::Var(_) => Some(1),
        Node::Sum(ts) => ts.iter().map(|t| deg_bound_in(t, var)).try_fold(0, |m, d| Some(m.max(d?))),
        Node::Prod(ts) => ts.iter().map(|t| deg_bound_in(t, var)).try_fold(0, |s, d| Some(s + d?)),
        Node::Pow(b, k) => {
            if *k < 0 {
                None
            } else {
                Some(deg_bound_in(b, var)? * *k as usize)
            }
        }
        Node::Quot(a, b) => {
            if b.contains_var(var) {
                None
            } else {
                deg_bound_in(a, var)
            }
        }
        Node::Func(_, _) => None,
    }
}

/// Writes `e` as a polynomial in `var` of degree at most `max_deg` and
/// returns the coefficient expressions `[c_0, ..., c_max_deg]`. Fails if
/// `e` is not polynomial in `var` or a higher-order coefficient is nonzero.
pub fn lambda_poly_coeffs(
    e: &Expr,
    var: &str,
    max_deg: usize,
    policy: &SamplePolicy,
) -> Result<Vec<Expr>, KwError> {
    let d = deg_bound_in(e, var).ok_or_else(|| KwError::NotPolynomial(var.to_string()))?;
    // Values at the integer nodes 0..=d determine the coefficients exactly.
    let vals: Vec<Expr> = (0..=d as i64)
        .map(|j| e.substitute(var, &Expr::int(j)))
        .collect();
    let vander = Mat::<Rat>::from_fn(d + 1, d + 1, |i, j| {
        num_traits::pow::pow(rat_int(i as i64), j)
    });
    let inv = vander
        .inverse()
        .expect("Vandermonde at distinct nodes is invertible");
    let mut coeffs: Vec<Expr> = (0..=d)
        .map(|k| {
            Expr::add(
                (0..=d)
                    .map(|j| Expr::mul2(Expr::rat(inv[(k, j)].clone()), vals[j].clone()))
                    .collect(),
            )
        })
        .collect();
    for (k, c) in coeffs.iter().enumerate().skip(max_deg + 1) {
        if let ZeroVerdict::NonZero { .. } = zero_test(c, policy)? {
            return Err(KwError::DegreeExceeded {
                var: var.to_string(),
                found: k,
                max: max_deg,
            });
        }
    }
    coeffs.truncate(max_deg + 1);
    while coeffs.len() < max_deg + 1 {
        coeffs.push(Expr::zero());
    }
    Ok(coeffs)
}
