//! Dense exact linear algebra over an arbitrary field (rationals or
//! Gaussian rationals). Everything is fraction-based Gaussian elimination;
//! matrices here are desk-scale, so clarity wins over asymptotics.

use crate::rat::Field;
use rand::Rng;
use std::fmt;

#[derive(Clone, PartialEq)]
pub struct Mat<F: Field> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<F>,
}

impl<F: Field> fmt::Debug for Mat<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format!("{}", self[(i, j)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl<F: Field> std::ops::Index<(usize, usize)> for Mat<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F: Field> std::ops::IndexMut<(usize, usize)> for Mat<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

impl<F: Field> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn col(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn row(&self, i: usize) -> Vec<F> {
        (0..self.cols).map(|j| self[(i, j)].clone()).collect()
    }

    pub fn from_cols(cols: Vec<Vec<F>>) -> Self {
        let c = cols.len();
        let r = cols.first().map(|x| x.len()).unwrap_or(0);
        Mat::from_fn(r, c, |i, j| cols[j][i].clone())
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape");
        Mat::from_fn(self.rows, other.cols, |i, j| {
            let mut acc = F::zero();
            for k in 0..self.cols {
                if !self[(i, k)].is_zero() && !other[(k, j)].is_zero() {
                    acc = acc + self[(i, k)].clone() * other[(k, j)].clone();
                }
            }
            acc
        })
    }

    pub fn matvec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(self.cols, v.len(), "matvec shape");
        (0..self.rows)
            .map(|i| {
                let mut acc = F::zero();
                for k in 0..self.cols {
                    if !self[(i, k)].is_zero() && !v[k].is_zero() {
                        acc = acc + self[(i, k)].clone() * v[k].clone();
                    }
                }
                acc
            })
            .collect()
    }

    pub fn scale(&self, s: &F) -> Self {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].clone() * s.clone())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| {
            self[(i, j)].clone() + other[(i, j)].clone()
        })
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| {
            self[(i, j)].clone() - other[(i, j)].clone()
        })
    }

    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        Mat::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)].clone()
            } else {
                other[(i, j - self.cols)].clone()
            }
        })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// Row-reduce in place; returns pivot columns. Pivot selection prefers
    /// small entries to tame coefficient growth.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let mut best: Option<(usize, usize)> = None;
            for i in r..self.rows {
                if !self[(i, c)].is_zero() {
                    let w = self[(i, c)].pivot_weight();
                    if best.map(|(_, bw)| w < bw).unwrap_or(true) {
                        best = Some((i, w));
                    }
                }
            }
            let Some((p, _)) = best else { continue };
            self.swap_rows(r, p);
            let inv = F::one() / self[(r, c)].clone();
            for j in c..self.cols {
                self[(r, j)] = self[(r, j)].clone() * inv.clone();
            }
            for i in 0..self.rows {
                if i != r && !self[(i, c)].is_zero() {
                    let f = self[(i, c)].clone();
                    for j in c..self.cols {
                        let v = self[(r, j)].clone() * f.clone();
                        self[(i, j)] = self[(i, j)].clone() - v;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref().len()
    }

    /// Basis of the right kernel, as columns.
    pub fn kernel(&self) -> Mat<F> {
        let mut m = self.clone();
        let pivots = m.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut basis = Vec::new();
        for &fc in &free {
            let mut v = vec![F::zero(); self.cols];
            v[fc] = F::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[(r, fc)].clone();
            }
            basis.push(v);
        }
        Mat::from_cols(basis)
    }

    /// Solves `A x = b`; `None` when inconsistent. Free variables set to 0.
    pub fn solve(&self, b: &[F]) -> Option<Vec<F>> {
        assert_eq!(self.rows, b.len());
        let mut aug = self.hstack(&Mat::from_cols(vec![b.to_vec()]));
        let pivots = aug.rref();
        if pivots.contains(&self.cols) {
            return None;
        }
        let mut x = vec![F::zero(); self.cols];
        for (r, &pc) in pivots.iter().enumerate() {
            x[pc] = aug[(r, self.cols)].clone();
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = self.hstack(&Mat::identity(n));
        let pivots = aug.rref();
        if pivots.len() < n {
            return None;
        }
        Some(Mat::from_fn(n, n, |i, j| aug[(i, n + j)].clone()))
    }

    pub fn det(&self) -> F {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m = self.clone();
        let mut det = F::one();
        for c in 0..n {
            let mut p = None;
            for i in c..n {
                if !m[(i, c)].is_zero() {
                    p = Some(i);
                    break;
                }
            }
            let Some(p) = p else { return F::zero() };
            if p != c {
                m.swap_rows(c, p);
                det = -det;
            }
            det = det * m[(c, c)].clone();
            let inv = F::one() / m[(c, c)].clone();
            for i in c + 1..n {
                if !m[(i, c)].is_zero() {
                    let f = m[(i, c)].clone() * inv.clone();
                    for j in c..n {
                        let v = m[(c, j)].clone() * f.clone();
                        m[(i, j)] = m[(i, j)].clone() - v;
                    }
                }
            }
        }
        det
    }

    /// Column-space membership test.
    pub fn contains_in_colspace(&self, v: &[F]) -> bool {
        self.solve(v).is_some()
    }

    /// Columns spanning the intersection of the column spaces of `a` and `b`.
    pub fn colspace_intersection(a: &Mat<F>, b: &Mat<F>) -> Mat<F> {
        assert_eq!(a.rows, b.rows);
        if a.cols == 0 || b.cols == 0 {
            return Mat::zeros(a.rows, 0);
        }
        // ker [A | -B]: pairs (x, y) with A x = B y; intersection = A x.
        let joint = a.hstack(&b.scale(&-F::one()));
        let ker = joint.kernel();
        let mut cols = Vec::new();
        for k in 0..ker.cols {
            let x: Vec<F> = (0..a.cols).map(|i| ker[(i, k)].clone()).collect();
            let v = a.matvec(&x);
            if !v.iter().all(|t| t.is_zero()) {
                cols.push(v);
            }
        }
        if cols.is_empty() {
            return Mat::zeros(a.rows, 0);
        }
        let m = Mat::from_cols(cols);
        m.column_basis()
    }

    /// Independent subset of the columns (a basis of the column space).
    pub fn column_basis(&self) -> Mat<F> {
        if self.cols == 0 {
            return self.clone();
        }
        let mut m = self.clone();
        let pivots = m.rref();
        Mat::from_cols(pivots.iter().map(|&c| self.col(c)).collect())
    }

    /// `{v : self * v in colspace(target)}`, as kernel-style column basis.
    pub fn preimage_of_colspace(&self, target: &Mat<F>) -> Mat<F> {
        // [A | -T] kernel projected to the A-variables.
        let joint = self.hstack(&target.scale(&-F::one()));
        let ker = joint.kernel();
        let mut cols: Vec<Vec<F>> = Vec::new();
        for k in 0..ker.cols {
            cols.push((0..self.cols).map(|i| ker[(i, k)].clone()).collect());
        }
        if cols.is_empty() {
            return Mat::zeros(self.cols, 0);
        }
        Mat::from_cols(cols).column_basis()
    }
}

// --- fast modular rank for Gaussian-rational matrices -----------------
//
// Reducing mod a prime p = 1 (mod 4) maps Gaussian rationals into Z_p
// (i goes to a square root of -1), where elimination runs in machine
// words. The modular rank never exceeds the true rank; two agreeing
// primes make an undercount vanishingly unlikely, and any disagreement
// falls back to exact elimination.

const RANK_PRIMES: [u64; 4] = [2_013_265_921, 1_811_939_329, 2_113_929_217, 1_711_276_033];

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, p);
        }
        b = mul_mod(b, b, p);
        e >>= 1;
    }
    acc
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// A square root of -1 mod p, for p = 1 (mod 4).
fn sqrt_minus_one(p: u64) -> u64 {
    for b in 2..1000 {
        let x = pow_mod(b, (p - 1) / 4, p);
        if mul_mod(x, x, p) == p - 1 {
            return x;
        }
    }
    unreachable!("no fourth root of unity found mod {}", p)
}

fn bigint_mod(x: &num_bigint::BigInt, p: u64) -> u64 {
    use num_traits::ToPrimitive;
    let r = x % num_bigint::BigInt::from(p);
    let r = r.to_i64().expect("remainder fits i64");
    if r < 0 {
        (r + p as i64) as u64
    } else {
        r as u64
    }
}

/// Entry reduced mod p, or None when a denominator vanishes mod p.
fn grat_mod(g: &crate::rat::GRat, i_mod: u64, p: u64) -> Option<u64> {
    let part = |r: &crate::rat::Rat| -> Option<u64> {
        let den = bigint_mod(r.denom(), p);
        if den == 0 {
            return None;
        }
        Some(mul_mod(bigint_mod(r.numer(), p), inv_mod(den, p), p))
    };
    Some((part(&g.re)? + mul_mod(i_mod, part(&g.im)?, p)) % p)
}

fn rank_mod_p(rows: usize, cols: usize, mut m: Vec<u64>, p: u64) -> usize {
    let mut rank = 0usize;
    for col in 0..cols {
        let pivot = (rank..rows).find(|&r| m[r * cols + col] != 0);
        let Some(pr) = pivot else { continue };
        for j in 0..cols {
            m.swap(rank * cols + j, pr * cols + j);
        }
        let inv = inv_mod(m[rank * cols + col], p);
        for r in rank + 1..rows {
            let factor = mul_mod(m[r * cols + col], inv, p);
            if factor == 0 {
                continue;
            }
            for j in col..cols {
                let sub = mul_mod(factor, m[rank * cols + j], p);
                m[r * cols + j] = (m[r * cols + j] + p - sub) % p;
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

impl Mat<crate::rat::GRat> {
    fn rank_mod(&self, p: u64) -> Option<usize> {
        let i_mod = sqrt_minus_one(p);
        let mut m = Vec::with_capacity(self.rows * self.cols);
        for e in &self.data {
            m.push(grat_mod(e, i_mod, p)?);
        }
        Some(rank_mod_p(self.rows, self.cols, m, p))
    }

    /// Rank via modular elimination, falling back to exact elimination
    /// when two primes disagree or too few primes are usable.
    pub fn rank_fast(&self) -> usize {
        let mut seen: Option<usize> = None;
        for p in RANK_PRIMES {
            match self.rank_mod(p) {
                None => continue,
                Some(r) => match seen {
                    None => seen = Some(r),
                    Some(s) if s == r => return r,
                    Some(_) => return self.rank(),
                },
            }
        }
        self.rank()
    }
}

/// Precomputed mod-p images of a matrix pair, for screening the rank of
/// S2 - mu*S1 over many parameters mu without leaving machine words.
pub struct PencilModScreen {
    primes: Vec<(u64, u64, Vec<u64>, Vec<u64>)>,
    rows: usize,
    cols: usize,
}

impl PencilModScreen {
    pub fn new(s1: &Mat<crate::rat::GRat>, s2: &Mat<crate::rat::GRat>) -> Self {
        let mut primes = Vec::new();
        for p in RANK_PRIMES.into_iter().take(2) {
            let i_mod = sqrt_minus_one(p);
            let red = |m: &Mat<crate::rat::GRat>| -> Option<Vec<u64>> {
                m.data.iter().map(|e| grat_mod(e, i_mod, p)).collect()
            };
            if let (Some(a), Some(b)) = (red(s1), red(s2)) {
                primes.push((p, i_mod, a, b));
            }
        }
        PencilModScreen {
            primes,
            rows: s1.rows,
            cols: s1.cols,
        }
    }

    /// Whether rank(S2 - mu*S1) < r modulo every usable prime; `None`
    /// when no prime applies to mu (caller must decide exactly). Modular
    /// rank never exceeds the true rank, so `Some(false)` is definitive.
    pub fn rank_drops(&self, mu: &crate::rat::GRat, r: usize) -> Option<bool> {
        let mut used = false;
        for (p, i_mod, s1, s2) in &self.primes {
            let Some(m) = grat_mod(mu, *i_mod, *p) else { continue };
            used = true;
            let data: Vec<u64> = s1
                .iter()
                .zip(s2)
                .map(|(a, b)| (b + p - mul_mod(m, *a, *p)) % p)
                .collect();
            if rank_mod_p(self.rows, self.cols, data, *p) >= r {
                return Some(false);
            }
        }
        if used {
            Some(true)
        } else {
            None
        }
    }
}

/// Random matrix with entries in `[-bound, bound]`.
pub fn random_mat<F: Field, R: Rng>(rng: &mut R, rows: usize, cols: usize, bound: i64) -> Mat<F> {
    Mat::from_fn(rows, cols, |_, _| F::from_i64(rng.gen_range(-bound..=bound)))
}

/// Random invertible square matrix with small integer entries.
pub fn random_invertible<F: Field, R: Rng>(rng: &mut R, n: usize, bound: i64) -> Mat<F> {
    loop {
        let m = random_mat::<F, R>(rng, n, n, bound);
        if !m.det().is_zero() {
            return m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use crate::rat::{rat_int, Rat};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: Vec<Vec<i64>>) -> Mat<Rat> {
        Mat::from_rows(
            rows.into_iter()
                .map(|r| r.into_iter().map(rat_int).collect())
                .collect(),
        )
    }

    #[test]
    fn rank_and_kernel() {
        let a = m(vec![vec![1, 2, 3], vec![2, 4, 6], vec![0, 1, 1]]);
        assert_eq!(a.rank(), 2);
        let k = a.kernel();
        assert_eq!(k.cols, 1);
        assert!(a.matvec(&k.col(0)).iter().all(|x| x.is_zero()));
    }

    #[test]
    fn solve_and_inverse() {
        let a = m(vec![vec![2, 1], vec![1, 1]]);
        let x = a.solve(&[rat_int(3), rat_int(2)]).unwrap();
        assert_eq!(x, vec![rat_int(1), rat_int(1)]);
        let inv = a.inverse().unwrap();
        assert_eq!(a.matmul(&inv), Mat::identity(2));
        assert_eq!(a.det(), rat_int(1));
    }

    #[test]
    fn intersection_of_colspaces() {
        let a = m(vec![vec![1, 0], vec![0, 1], vec![0, 0]]);
        let b = m(vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
        let i = Mat::colspace_intersection(&a, &b);
        assert_eq!(i.cols, 1);
        // spanned by e2
        assert!(i[(0, 0)].is_zero() && !i[(1, 0)].is_zero() && i[(2, 0)].is_zero());
    }

    #[test]
    fn random_invertible_is_invertible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_invertible::<Rat, _>(&mut rng, 5, 2);
        assert!(g.inverse().is_some());
    }
}
