//! Sparse multivariate polynomials over the rationals and the rational
//! normal form used by the zero test. Transcendental subtrees are mapped to
//! fresh atom variables, so a zero numerator is a sound proof of vanishing.

use super::{Expr, Node};
use crate::error::KwError;
use crate::rat::Rat;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Mono(pub BTreeMap<String, u32>);

impl Mono {
    fn one() -> Mono {
        Mono(BTreeMap::new())
    }

    fn var(v: &str) -> Mono {
        let mut m = BTreeMap::new();
        m.insert(v.to_string(), 1);
        Mono(m)
    }

    fn mul(&self, other: &Mono) -> Mono {
        let mut m = self.0.clone();
        for (v, e) in &other.0 {
            *m.entry(v.clone()).or_insert(0) += e;
        }
        Mono(m)
    }

    fn degree_in(&self, v: &str) -> u32 {
        self.0.get(v).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    terms: BTreeMap<Mono, Rat>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: Rat) -> Poly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Mono::one(), c);
        }
        Poly { terms }
    }

    pub fn one() -> Poly {
        Poly::constant(Rat::one())
    }

    pub fn var(v: &str) -> Poly {
        let mut terms = BTreeMap::new();
        terms.insert(Mono::var(v), Rat::one());
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> Option<Rat> {
        if self.terms.is_empty() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Mono::one()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            let entry = terms.entry(m.clone()).or_insert_with(Rat::zero);
            *entry += c;
            if entry.is_zero() {
                terms.remove(m);
            }
        }
        Poly { terms }
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut terms: BTreeMap<Mono, Rat> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let m = m1.mul(m2);
                let entry = terms.entry(m.clone()).or_insert_with(Rat::zero);
                *entry += c1 * c2;
                if entry.is_zero() {
                    terms.remove(&m);
                }
            }
        }
        Poly { terms }
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut acc = Poly::one();
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn degree_in(&self, v: &str) -> u32 {
        self.terms.keys().map(|m| m.degree_in(v)).max().unwrap_or(0)
    }

    pub fn eval(&self, point: &BTreeMap<String, Rat>) -> Result<Rat, KwError> {
        let mut acc = Rat::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in &m.0 {
                let x = point
                    .get(v)
                    .ok_or_else(|| KwError::UnboundVariable(v.clone()))?;
                t *= num_traits::pow::pow(x.clone(), *e as usize);
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Leading coefficient in the monomial order (for normalization only).
    fn lead_coeff(&self) -> Option<Rat> {
        self.terms.values().next_back().cloned()
    }

    /// Rebuild an expression tree; atom variables are replaced by the
    /// subtrees they stand for.
    pub fn to_expr(&self, atom_rev: &BTreeMap<String, Expr>) -> Expr {
        let mut terms = Vec::new();
        for (m, c) in &self.terms {
            let mut factors = vec![Expr::rat(c.clone())];
            for (v, e) in &m.0 {
                let base = atom_rev
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| Expr::var(v));
                factors.push(Expr::pow(base, *e as i64));
            }
            terms.push(Expr::mul(factors));
        }
        Expr::add(terms)
    }
}

/// Lexicographic order on aligned exponent vectors (missing exponents are
/// zero); compatible with monomial multiplication.
fn cmp_lex(a: &Mono, b: &Mono) -> std::cmp::Ordering {
    let mut ita = a.0.iter().peekable();
    let mut itb = b.0.iter().peekable();
    loop {
        match (ita.peek(), itb.peek()) {
            (None, None) => return std::cmp::Ordering::Equal,
            (Some(_), None) => return std::cmp::Ordering::Greater,
            (None, Some(_)) => return std::cmp::Ordering::Less,
            (Some((va, ea)), Some((vb, eb))) => match va.cmp(vb) {
                // the earlier variable name has a positive exponent only
                // on one side: that side is larger in lex order
                std::cmp::Ordering::Less => return std::cmp::Ordering::Greater,
                std::cmp::Ordering::Greater => return std::cmp::Ordering::Less,
                std::cmp::Ordering::Equal => {
                    match ea.cmp(eb) {
                        std::cmp::Ordering::Equal => {
                            ita.next();
                            itb.next();
                        }
                        other => return other,
                    }
                }
            },
        }
    }
}

impl Poly {
    fn vars(&self) -> Vec<String> {
        let mut vs = std::collections::BTreeSet::new();
        for m in self.terms.keys() {
            for v in m.0.keys() {
                vs.insert(v.clone());
            }
        }
        vs.into_iter().collect()
    }

    /// Leading term in the aligned lexicographic monomial order (the
    /// derived Mono ordering is not multiplication-compatible, so it
    /// cannot drive polynomial division).
    fn lead_term(&self) -> Option<(&Mono, &Rat)> {
        self.terms.iter().max_by(|(a, _), (b, _)| cmp_lex(a, b))
    }

    /// Exact division over the rationals; None when not divisible.
    pub fn try_div(&self, d: &Poly) -> Option<Poly> {
        let (dm, dc) = d.lead_term()?;
        let mut rem = self.clone();
        let mut quo = Poly::zero();
        while let Some((rm, rc)) = rem.lead_term() {
            // monomial quotient rm / dm must be exact
            let mut q = BTreeMap::new();
            for (v, e) in &dm.0 {
                let re = rm.degree_in(v);
                if re < *e {
                    return None;
                }
            }
            for (v, e) in &rm.0 {
                let de = dm.degree_in(v);
                if *e > de {
                    q.insert(v.clone(), e - de);
                }
            }
            let qm = Mono(q);
            let qc = rc / dc;
            let mut t = BTreeMap::new();
            t.insert(qm, qc);
            let term = Poly { terms: t };
            quo = quo.add(&term);
            rem = rem.sub(&term.mul(d));
        }
        Some(quo)
    }

    /// Scale to integer coefficients (content is irrelevant for gcd use).
    fn to_int(&self) -> Poly {
        let mut lcm = BigInt::one();
        for c in self.terms.values() {
            lcm = lcm.lcm(c.denom());
        }
        self.scale(&Rat::from(lcm))
    }

    fn maxnorm(&self) -> BigInt {
        self.terms
            .values()
            .map(|c| c.numer().abs())
            .max()
            .unwrap_or_else(BigInt::zero)
    }

    /// Substitute an integer for one variable.
    fn subst_int(&self, var: &str, xi: &BigInt) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.degree_in(var);
            let mut rest = m.0.clone();
            rest.remove(var);
            let factor = Rat::from(num_traits::pow::pow(xi.clone(), e as usize));
            let mut t = BTreeMap::new();
            t.insert(Mono(rest), c * factor);
            out = out.add(&Poly { terms: t });
        }
        out
    }

    /// Coefficient-wise balanced residue modulo xi, paired with the exact
    /// quotient (p - digit) / xi.
    fn balanced_digit(&self, xi: &BigInt) -> (Poly, Poly) {
        let half = xi / BigInt::from(2);
        let mut digit = Poly::zero();
        let mut rest = Poly::zero();
        for (m, c) in &self.terms {
            let n = c.numer().clone();
            let mut r = n.mod_floor(xi);
            if r > half {
                r -= xi;
            }
            let q = (n - &r) / xi;
            if !r.is_zero() {
                let mut t = BTreeMap::new();
                t.insert(m.clone(), Rat::from(r));
                digit = digit.add(&Poly { terms: t });
            }
            if !q.is_zero() {
                let mut t = BTreeMap::new();
                t.insert(m.clone(), Rat::from(q));
                rest = rest.add(&Poly { terms: t });
            }
        }
        (digit, rest)
    }

    fn int_content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in self.terms.values() {
            g = g.gcd(c.numer());
        }
        g
    }
}

fn gcdheu(a: &Poly, b: &Poly, vars: &[String], depth: usize) -> Option<Poly> {
    if a.is_zero() {
        return Some(b.clone());
    }
    if b.is_zero() {
        return Some(a.clone());
    }
    if vars.is_empty() {
        let g = a.int_content().gcd(&b.int_content());
        return Some(Poly::constant(Rat::from(g)));
    }
    if depth > 12 {
        return None;
    }
    let x = &vars[0];
    let rest = &vars[1..];
    let norm = a.maxnorm().min(b.maxnorm());
    let mut xi: BigInt = BigInt::from(2) * norm + BigInt::from(29);
    for _ in 0..6 {
        let ga = a.subst_int(x, &xi);
        let gb = b.subst_int(x, &xi);
        if let Some(gv) = gcdheu(&ga, &gb, rest, depth + 1) {
            // reconstruct the x-dependence from base-xi digits
            let mut g = Poly::zero();
            let mut val = gv;
            let mut power = 0u32;
            let mut ok = true;
            while !val.is_zero() {
                if power > 200 {
                    ok = false;
                    break;
                }
                let (digit, next) = val.balanced_digit(&xi);
                g = g.add(&digit.mul(&Poly::var(x).pow(power)));
                val = next;
                power += 1;
            }
            // integer content is kept: it encodes the dependence on the
            // variables of enclosing levels and is stripped only at the top
            if ok && !g.is_zero() && a.try_div(&g).is_some() && b.try_div(&g).is_some() {
                return Some(g);
            }
        }
        xi = &xi * BigInt::from(30011) + BigInt::one();
    }
    None
}

/// Heuristic multivariate gcd over the rationals (primitive, up to sign).
/// Falls back to 1 when the heuristic cannot certify a result, so callers
/// may always divide by the answer.
pub fn poly_gcd(a: &Poly, b: &Poly) -> Poly {
    let ai = a.to_int();
    let bi = b.to_int();
    let mut vars = ai.vars();
    for v in bi.vars() {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    vars.sort();
    match gcdheu(&ai, &bi, &vars, 0) {
        Some(mut g) if !g.is_zero() => {
            if g.is_constant().is_some() {
                return Poly::one();
            }
            let c = g.int_content();
            if !c.is_zero() && !c.is_one() {
                g = g.scale(&Rat::from(c).recip());
            }
            g
        }
        _ => Poly::one(),
    }
}

/// A quotient of polynomials, kept with a nonzero denominator. Reduced by
/// a heuristic gcd; used for sound zero detection and exact witnesses.
#[derive(Debug, Clone)]
pub struct RatFun {
    pub num: Poly,
    pub den: Poly,
}

impl RatFun {
    pub fn from_poly(p: Poly) -> RatFun {
        RatFun {
            num: p,
            den: Poly::one(),
        }
    }

    fn normalize(mut self) -> RatFun {
        if self.num.is_zero() {
            self.den = Poly::one();
            return self;
        }
        if self.num == self.den {
            return RatFun::from_poly(Poly::one());
        }
        if let Some(c) = self.den.is_constant() {
            self.num = self.num.scale(&c.recip());
            self.den = Poly::one();
            return self;
        }
        let g = poly_gcd(&self.num, &self.den);
        if g.is_constant().is_none() {
            if let (Some(n), Some(d)) = (self.num.try_div(&g), self.den.try_div(&g)) {
                self.num = n;
                self.den = d;
                if let Some(c) = self.den.is_constant() {
                    self.num = self.num.scale(&c.recip());
                    self.den = Poly::one();
                    return self;
                }
            }
        }
        if let Some(lc) = self.den.lead_coeff() {
            if !lc.is_one() {
                let inv = lc.recip();
                self.num = self.num.scale(&inv);
                self.den = self.den.scale(&inv);
            }
        }
        self
    }

    pub fn add(&self, other: &RatFun) -> RatFun {
        RatFun {
            num: self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            den: self.den.mul(&other.den),
        }
        .normalize()
    }

    pub fn mul(&self, other: &RatFun) -> RatFun {
        RatFun {
            num: self.num.mul(&other.num),
            den: self.den.mul(&other.den),
        }
        .normalize()
    }

    pub fn neg(&self) -> RatFun {
        RatFun {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn inv(&self) -> Result<RatFun, KwError> {
        if self.num.is_zero() {
            return Err(KwError::DivisionByZero);
        }
        Ok(RatFun {
            num: self.den.clone(),
            den: self.num.clone(),
        }
        .normalize())
    }

    pub fn pow(&self, k: i64) -> Result<RatFun, KwError> {
        let base = if k < 0 { self.inv()? } else { self.clone() };
        let e = k.unsigned_abs() as u32;
        Ok(RatFun {
            num: base.num.pow(e),
            den: base.den.pow(e),
        }
        .normalize())
    }
}

/// Registry assigning stable atom names to maximal transcendental subtrees.
/// Atom names use a prefix that cannot appear in parsed identifiers.
#[derive(Debug, Default)]
pub struct AtomTable {
    map: BTreeMap<Expr, String>,
}

impl AtomTable {
    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn intern(&mut self, e: &Expr) -> String {
        if let Some(n) = self.map.get(e) {
            return n.clone();
        }
        let n = format!("%a{}", self.map.len());
        self.map.insert(e.clone(), n.clone());
        n
    }

    fn reverse(&self) -> BTreeMap<String, Expr> {
        self.map.iter().map(|(e, n)| (n.clone(), e.clone())).collect()
    }
}

/// Collapse an expression to a single quotient of expanded polynomials
/// (in the variables and transcendental atoms). Falls back to the input
/// when the expression has no rational normal form. Used to keep
/// intermediate results of cascaded symbolic eliminations compact.
pub fn simplify(e: &Expr) -> Expr {
    let mut atoms = AtomTable::default();
    match to_ratfun(e, &mut atoms) {
        Ok(rf) => {
            let rev = atoms.reverse();
            let num = rf.num.to_expr(&rev);
            if rf.den.is_constant() == Some(Rat::one()) {
                num
            } else {
                Expr::quot(num, rf.den.to_expr(&rev))
            }
        }
        Err(_) => e.clone(),
    }
}

/// Converts an expression to rational normal form, replacing transcendental
/// subtrees with atoms. Fails only if a denominator is identically zero as
/// a rational function of the variables and atoms.
pub fn to_ratfun(e: &Expr, atoms: &mut AtomTable) -> Result<RatFun, KwError> {
    Ok(match e.node() {
        Node::Rat(r) => RatFun::from_poly(Poly::constant(r.clone())),
        Node::Var(v) => RatFun::from_poly(Poly::var(v)),
        Node::Sum(ts) => {
            let mut acc = RatFun::from_poly(Poly::zero());
            for t in ts {
                acc = acc.add(&to_ratfun(t, atoms)?);
            }
            acc
        }
        Node::Prod(ts) => {
            let mut acc = RatFun::from_poly(Poly::one());
            for t in ts {
                acc = acc.mul(&to_ratfun(t, atoms)?);
            }
            acc
        }
        Node::Pow(b, k) => to_ratfun(b, atoms)?.pow(*k)?,
        Node::Quot(a, b) => {
            let bf = to_ratfun(b, atoms)?;
            to_ratfun(a, atoms)?.mul(&bf.inv()?)
        }
        // Atoms are opaque: exp(u)*exp(-u) = 1 is not discovered here and
        // falls through to sampling. Identical subtrees share one atom.
        Node::Func(_, _) => RatFun::from_poly(Poly::var(&atoms.intern(e))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat_int;

    #[test]
    fn poly_arithmetic() {
        let x = Poly::var("x");
        let y = Poly::var("y");
        let p = x.add(&y).pow(2); // (x+y)^2
        let q = x.mul(&x).add(&x.mul(&y).scale(&rat_int(2))).add(&y.mul(&y));
        assert_eq!(p, q);
        assert!(p.sub(&q).is_zero());
        assert_eq!(p.degree_in("x"), 2);
    }

    #[test]
    fn ratfun_detects_cancellation() {
        // x/x - 1 == 0
        let x = RatFun::from_poly(Poly::var("x"));
        let one = RatFun::from_poly(Poly::one());
        let r = x.mul(&x.inv().unwrap()).add(&one.neg());
        assert!(r.num.is_zero());
    }

    #[test]
    fn shared_transcendental_subtrees_cancel() {
        // f - f with f = exp(x1) is provably zero: both occurrences map to
        // the same atom.
        let f = Expr::exp(Expr::var("x1"));
        let e = Expr::sub(Expr::mul2(Expr::int(3), f.clone()), Expr::mul2(Expr::int(3), f));
        let mut atoms = AtomTable::default();
        let rf = to_ratfun(&e, &mut atoms).unwrap();
        assert!(rf.num.is_zero());
        assert!(!atoms.is_empty());
    }
}
