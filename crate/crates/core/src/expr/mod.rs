//! Symbolic expression kernel: immutable trees over exact rationals with
//! parsing, differentiation, evaluation, zero testing and polynomial
//! coefficient extraction in a parameter.

mod lambda;
mod parse;
mod poly;
mod zero;

pub use lambda::{deg_bound_in, lambda_poly_coeffs};
pub use parse::parse_expr;
pub use poly::{simplify, Poly, RatFun};
pub use zero::{zero_test, SamplePolicy, ZeroVerdict};

use crate::error::KwError;
use crate::rat::{rat_int, rat_to_f64, Rat};
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Node {
    Rat(Rat),
    Var(String),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Pow(Expr, i64),
    Quot(Expr, Expr),
    Func(Func, Expr),
}

/// Immutable symbolic expression; cheap to clone and safe to share.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Node>);

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Expr {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.cmp(&other.0)
    }
}

impl Expr {
    fn new(n: Node) -> Expr {
        Expr(Arc::new(n))
    }

    pub fn rat(r: Rat) -> Expr {
        Expr::new(Node::Rat(r))
    }

    pub fn int(v: i64) -> Expr {
        Expr::rat(rat_int(v))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn var(name: &str) -> Expr {
        Expr::new(Node::Var(name.to_string()))
    }

    pub fn as_rat(&self) -> Option<&Rat> {
        match &*self.0 {
            Node::Rat(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_zero_literal(&self) -> bool {
        self.as_rat().map(|r| r.is_zero()).unwrap_or(false)
    }

    pub fn is_one_literal(&self) -> bool {
        self.as_rat().map(|r| r.is_one()).unwrap_or(false)
    }

    /// Flattening sum constructor with rational folding.
    pub fn add(terms: Vec<Expr>) -> Expr {
        let mut flat: Vec<Expr> = Vec::new();
        let mut c = Rat::zero();
        for t in terms {
            match &*t.0 {
                Node::Sum(inner) => {
                    for s in inner {
                        match &*s.0 {
                            Node::Rat(r) => c += r,
                            _ => flat.push(s.clone()),
                        }
                    }
                }
                Node::Rat(r) => c += r,
                _ => flat.push(t),
            }
        }
        if !c.is_zero() {
            flat.push(Expr::rat(c));
        }
        match flat.len() {
            0 => Expr::zero(),
            1 => flat.pop().unwrap(),
            _ => Expr::new(Node::Sum(flat)),
        }
    }

    pub fn add2(a: Expr, b: Expr) -> Expr {
        Expr::add(vec![a, b])
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(vec![a, Expr::neg(b)])
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::mul(vec![Expr::int(-1), a])
    }

    /// Flattening product constructor; folds rational factors, places the
    /// folded constant first, annihilates on zero.
    pub fn mul(factors: Vec<Expr>) -> Expr {
        let mut flat: Vec<Expr> = Vec::new();
        let mut c = Rat::one();
        for t in factors {
            match &*t.0 {
                Node::Prod(inner) => {
                    for s in inner {
                        match &*s.0 {
                            Node::Rat(r) => c *= r,
                            _ => flat.push(s.clone()),
                        }
                    }
                }
                Node::Rat(r) => c *= r,
                _ => flat.push(t),
            }
        }
        if c.is_zero() {
            return Expr::zero();
        }
        if !c.is_one() {
            flat.insert(0, Expr::rat(c));
        }
        match flat.len() {
            0 => Expr::one(),
            1 => flat.pop().unwrap(),
            _ => Expr::new(Node::Prod(flat)),
        }
    }

    pub fn mul2(a: Expr, b: Expr) -> Expr {
        Expr::mul(vec![a, b])
    }

    pub fn pow(base: Expr, exp: i64) -> Expr {
        if exp == 0 {
            return Expr::one();
        }
        if exp == 1 {
            return base;
        }
        match &*base.0 {
            Node::Rat(r) => {
                if !r.is_zero() || exp > 0 {
                    return Expr::rat(rat_pow(r, exp));
                }
            }
            Node::Pow(inner, k) => {
                return Expr::pow(inner.clone(), k * exp);
            }
            _ => {}
        }
        Expr::new(Node::Pow(base, exp))
    }

    /// Quotient; panics on a syntactically zero denominator (callers must
    /// not construct those).
    pub fn quot(num: Expr, den: Expr) -> Expr {
        if let Node::Rat(r) = &*den.0 {
            assert!(!r.is_zero(), "syntactically zero denominator");
            return Expr::mul2(Expr::rat(r.recip()), num);
        }
        if num.is_zero_literal() {
            return Expr::zero();
        }
        Expr::new(Node::Quot(num, den))
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        if let Node::Rat(r) = &*arg.0 {
            match f {
                Func::Exp if r.is_zero() => return Expr::one(),
                Func::Log if r.is_one() => return Expr::zero(),
                Func::Sin if r.is_zero() => return Expr::zero(),
                Func::Cos if r.is_zero() => return Expr::one(),
                Func::Sqrt => {
                    if let Some(root) = rat_sqrt(r) {
                        return Expr::rat(root);
                    }
                }
                _ => {}
            }
        }
        Expr::new(Node::Func(f, arg))
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::func(Func::Exp, a)
    }
    pub fn sqrt(a: Expr) -> Expr {
        Expr::func(Func::Sqrt, a)
    }

    /// Variables referenced anywhere in the tree.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match &*self.0 {
            Node::Rat(_) => {}
            Node::Var(v) => {
                out.insert(v.clone());
            }
            Node::Sum(ts) | Node::Prod(ts) => ts.iter().for_each(|t| t.collect_vars(out)),
            Node::Pow(b, _) => b.collect_vars(out),
            Node::Quot(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Node::Func(_, a) => a.collect_vars(out),
        }
    }

    pub fn contains_var(&self, v: &str) -> bool {
        match &*self.0 {
            Node::Rat(_) => false,
            Node::Var(w) => w == v,
            Node::Sum(ts) | Node::Prod(ts) => ts.iter().any(|t| t.contains_var(v)),
            Node::Pow(b, _) => b.contains_var(v),
            Node::Quot(a, b) => a.contains_var(v) || b.contains_var(v),
            Node::Func(_, a) => a.contains_var(v),
        }
    }

    pub fn contains_func(&self) -> bool {
        match &*self.0 {
            Node::Rat(_) | Node::Var(_) => false,
            Node::Sum(ts) | Node::Prod(ts) => ts.iter().any(|t| t.contains_func()),
            Node::Pow(b, _) => b.contains_func(),
            Node::Quot(a, b) => a.contains_func() || b.contains_func(),
            Node::Func(_, _) => true,
        }
    }

    pub fn substitute(&self, var: &str, repl: &Expr) -> Expr {
        match &*self.0 {
            Node::Rat(_) => self.clone(),
            Node::Var(v) => {
                if v == var {
                    repl.clone()
                } else {
                    self.clone()
                }
            }
            Node::Sum(ts) => Expr::add(ts.iter().map(|t| t.substitute(var, repl)).collect()),
            Node::Prod(ts) => Expr::mul(ts.iter().map(|t| t.substitute(var, repl)).collect()),
            Node::Pow(b, k) => Expr::pow(b.substitute(var, repl), *k),
            Node::Quot(a, b) => Expr::quot(a.substitute(var, repl), b.substitute(var, repl)),
            Node::Func(f, a) => Expr::func(*f, a.substitute(var, repl)),
        }
    }

    /// Partial derivative with respect to `var`.
    pub fn diff(&self, var: &str) -> Expr {
        match &*self.0 {
            Node::Rat(_) => Expr::zero(),
            Node::Var(v) => {
                if v == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Sum(ts) => Expr::add(ts.iter().map(|t| t.diff(var)).collect()),
            Node::Prod(ts) => {
                let mut terms = Vec::new();
                for (i, t) in ts.iter().enumerate() {
                    let d = t.diff(var);
                    if d.is_zero_literal() {
                        continue;
                    }
                    let mut fac: Vec<Expr> = ts
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, x)| x.clone())
                        .collect();
                    fac.push(d);
                    terms.push(Expr::mul(fac));
                }
                Expr::add(terms)
            }
            Node::Pow(b, k) => Expr::mul(vec![
                Expr::int(*k),
                Expr::pow(b.clone(), k - 1),
                b.diff(var),
            ]),
            Node::Quot(a, b) => {
                let num = Expr::sub(
                    Expr::mul2(a.diff(var), b.clone()),
                    Expr::mul2(a.clone(), b.diff(var)),
                );
                Expr::quot(num, Expr::pow(b.clone(), 2))
            }
            Node::Func(f, a) => {
                let da = a.diff(var);
                if da.is_zero_literal() {
                    return Expr::zero();
                }
                let outer = match f {
                    Func::Exp => Expr::exp(a.clone()),
                    Func::Log => Expr::quot(Expr::one(), a.clone()),
                    Func::Sin => Expr::func(Func::Cos, a.clone()),
                    Func::Cos => Expr::neg(Expr::func(Func::Sin, a.clone())),
                    Func::Sqrt => Expr::quot(
                        Expr::one(),
                        Expr::mul2(Expr::int(2), Expr::sqrt(a.clone())),
                    ),
                };
                Expr::mul2(outer, da)
            }
        }
    }

    /// Exact evaluation; errors on transcendental nodes.
    pub fn eval_exact(&self, point: &BTreeMap<String, Rat>) -> Result<Rat, KwError> {
        match &*self.0 {
            Node::Rat(r) => Ok(r.clone()),
            Node::Var(v) => point
                .get(v)
                .cloned()
                .ok_or_else(|| KwError::UnboundVariable(v.clone())),
            Node::Sum(ts) => {
                let mut acc = Rat::zero();
                for t in ts {
                    acc += t.eval_exact(point)?;
                }
                Ok(acc)
            }
            Node::Prod(ts) => {
                let mut acc = Rat::one();
                for t in ts {
                    acc *= t.eval_exact(point)?;
                }
                Ok(acc)
            }
            Node::Pow(b, k) => {
                let bv = b.eval_exact(point)?;
                if bv.is_zero() && *k < 0 {
                    return Err(KwError::DivisionByZero);
                }
                Ok(rat_pow(&bv, *k))
            }
            Node::Quot(a, b) => {
                let bv = b.eval_exact(point)?;
                if bv.is_zero() {
                    return Err(KwError::DivisionByZero);
                }
                Ok(a.eval_exact(point)? / bv)
            }
            Node::Func(f, _) => Err(KwError::TranscendentalInExactMode(f.name().into())),
        }
    }

    /// Floating-point evaluation with domain checks.
    pub fn eval_f64(&self, point: &BTreeMap<String, f64>) -> Result<f64, KwError> {
        match &*self.0 {
            Node::Rat(r) => Ok(rat_to_f64(r)),
            Node::Var(v) => point
                .get(v)
                .copied()
                .ok_or_else(|| KwError::UnboundVariable(v.clone())),
            Node::Sum(ts) => ts.iter().try_fold(0.0, |a, t| Ok(a + t.eval_f64(point)?)),
            Node::Prod(ts) => ts.iter().try_fold(1.0, |a, t| Ok(a * t.eval_f64(point)?)),
            Node::Pow(b, k) => {
                let bv = b.eval_f64(point)?;
                if bv == 0.0 && *k < 0 {
                    return Err(KwError::DivisionByZero);
                }
                Ok(bv.powi(*k as i32))
            }
            Node::Quot(a, b) => {
                let bv = b.eval_f64(point)?;
                if bv == 0.0 {
                    return Err(KwError::DivisionByZero);
                }
                Ok(a.eval_f64(point)? / bv)
            }
            Node::Func(f, a) => {
                let av = a.eval_f64(point)?;
                match f {
                    Func::Exp => Ok(av.exp()),
                    Func::Log => {
                        if av <= 0.0 {
                            Err(KwError::DomainViolation {
                                func: "log".into(),
                                arg: av,
                            })
                        } else {
                            Ok(av.ln())
                        }
                    }
                    Func::Sin => Ok(av.sin()),
                    Func::Cos => Ok(av.cos()),
                    Func::Sqrt => {
                        if av < 0.0 {
                            Err(KwError::DomainViolation {
                                func: "sqrt".into(),
                                arg: av,
                            })
                        } else {
                            Ok(av.sqrt())
                        }
                    }
                }
            }
        }
    }

    fn node(&self) -> &Node {
        &self.0
    }
}

fn rat_pow(r: &Rat, k: i64) -> Rat {
    if k >= 0 {
        num_traits::pow::pow(r.clone(), k as usize)
    } else {
        num_traits::pow::pow(r.recip(), (-k) as usize)
    }
}

fn rat_sqrt(r: &Rat) -> Option<Rat> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
        Some(Rat::new(n, d))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Printing. The printer and parser are mutually inverse up to the
// normalization performed by the smart constructors.

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

// Precedence levels: 1 sum, 2 product/quotient, 3 power, 4 atom.
fn prec(e: &Expr) -> u8 {
    match &*e.0 {
        Node::Sum(_) => 1,
        Node::Prod(_) | Node::Quot(_, _) => 2,
        Node::Pow(_, _) => 3,
        Node::Rat(r) => {
            if r.is_negative() {
                1
            } else if !r.is_integer() {
                2
            } else {
                4
            }
        }
        _ => 4,
    }
}

fn write_paren(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if prec(e) < min_prec {
        write!(f, "(")?;
        write_expr(f, e, 0)?;
        write!(f, ")")
    } else {
        write_expr(f, e, 0)
    }
}

/// Splits a term into (negative?, magnitude-expr) for sum printing.
fn split_sign(e: &Expr) -> (bool, Expr) {
    match &*e.0 {
        Node::Rat(r) if r.is_negative() => (true, Expr::rat(-r.clone())),
        Node::Prod(ts) => {
            if let Node::Rat(r) = &*ts[0].0 {
                if r.is_negative() {
                    let mut rest = ts.clone();
                    let pos = -r.clone();
                    if pos.is_one() {
                        rest.remove(0);
                    } else {
                        rest[0] = Expr::rat(pos);
                    }
                    return (true, Expr::mul(rest));
                }
            }
            (false, e.clone())
        }
        _ => (false, e.clone()),
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, _lvl: u8) -> fmt::Result {
    match &*e.0 {
        Node::Rat(r) => {
            if r.is_integer() {
                write!(f, "{}", r.numer())
            } else {
                write!(f, "{}/{}", r.numer(), r.denom())
            }
        }
        Node::Var(v) => write!(f, "{}", v),
        Node::Sum(ts) => {
            for (i, t) in ts.iter().enumerate() {
                let (neg, mag) = split_sign(t);
                if i == 0 {
                    if neg {
                        write!(f, "-")?;
                    }
                } else if neg {
                    write!(f, " - ")?;
                } else {
                    write!(f, " + ")?;
                }
                write_paren(f, &mag, 2)?;
            }
            Ok(())
        }
        Node::Prod(ts) => {
            for (i, t) in ts.iter().enumerate() {
                if i > 0 {
                    write!(f, "*")?;
                }
                // quotient factors need parens: a*(b/c) != a*b/c
                let need = if matches!(&*t.0, Node::Quot(_, _)) { 3 } else { 2 };
                // non-leading fractional constants too: 2*(1/3) style cannot
                // occur (constants fold), so this only guards quotients.
                write_paren(f, t, need)?;
            }
            Ok(())
        }
        Node::Pow(b, k) => {
            write_paren(f, b, 4)?;
            if *k < 0 {
                write!(f, "^({})", k)
            } else {
                write!(f, "^{}", k)
            }
        }
        Node::Quot(a, b) => {
            write_paren(f, a, 2)?;
            write!(f, "/")?;
            write_paren(f, b, 3)?;
            Ok(())
        }
        Node::Func(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, a, 0)?;
            write!(f, ")")
        }
    }
}
