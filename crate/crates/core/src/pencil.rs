//! Jordan-Kronecker structure of a pair of linear maps S1, S2: V -> W over
//! the Gaussian rationals: generic rank, exceptional set, full block
//! inventory, Jordan part and a synthesizer inverting the classification.

use crate::error::KwError;
use crate::linalg::{random_invertible, random_mat, Mat};
use crate::rat::{rat_to_f64, rationalize, GRat, Rat};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use std::fmt;

/// Eigenvalue of the Jordan part. `Finite(mu)` corresponds to the
/// projective exceptional point [-mu : 1] of the pencil l1*S1 + l2*S2,
/// i.e. `S2 - mu*S1` drops rank. `Numeric` flags a root that could not be
/// recognized as a Gaussian rational.
#[derive(Debug, Clone)]
pub enum Eigenvalue {
    Finite(GRat),
    Infinity,
    Numeric { re: f64, im: f64 },
}

impl Eigenvalue {
    /// Projective point [l1 : l2] where the pencil drops rank, normalized
    /// to l2 = 1 for finite eigenvalues and [1 : 0] at infinity.
    pub fn proj_string(&self) -> String {
        match self {
            Eigenvalue::Finite(mu) => format!("[{}:1]", -mu.clone()),
            Eigenvalue::Infinity => "[1:0]".to_string(),
            Eigenvalue::Numeric { re, im } => format!("[~{}{}{}i:1] (numeric)", -re, if *im <= 0.0 { "+" } else { "-" }, -im),
        }
    }

    fn sort_key(&self) -> (u8, String) {
        match self {
            Eigenvalue::Finite(mu) => (0, format!("{:?},{:?}", mu.re, mu.im)),
            Eigenvalue::Infinity => (1, String::new()),
            Eigenvalue::Numeric { re, im } => (2, format!("{:.9},{:.9}", re, im)),
        }
    }
}

impl PartialEq for Eigenvalue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Eigenvalue::Finite(a), Eigenvalue::Finite(b)) => a == b,
            (Eigenvalue::Infinity, Eigenvalue::Infinity) => true,
            (Eigenvalue::Numeric { re: a, im: b }, Eigenvalue::Numeric { re: c, im: d }) => {
                (a - c).abs() < 1e-8 && (b - d).abs() < 1e-8
            }
            _ => false,
        }
    }
}
impl Eq for Eigenvalue {}

impl PartialOrd for Eigenvalue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Eigenvalue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl fmt::Display for Eigenvalue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eigenvalue::Finite(mu) => write!(f, "{}", mu),
            Eigenvalue::Infinity => write!(f, "inf"),
            Eigenvalue::Numeric { re, im } => write!(f, "~{}+{}i (numeric)", re, im),
        }
    }
}

/// Multisets of block sizes of the Jordan-Kronecker decomposition.
/// `kronecker_plus` holds sizes k of increasing blocks (k -> k+1 dims),
/// `kronecker_minus` sizes k of decreasing blocks (k+1 -> k dims), and
/// `jordan` pairs each eigenvalue with its multiset of Jordan sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStructure {
    pub kronecker_plus: Vec<usize>,
    pub kronecker_minus: Vec<usize>,
    pub jordan: Vec<(Eigenvalue, Vec<usize>)>,
}

impl BlockStructure {
    pub fn new(
        mut kronecker_plus: Vec<usize>,
        mut kronecker_minus: Vec<usize>,
        mut jordan: Vec<(Eigenvalue, Vec<usize>)>,
    ) -> Self {
        kronecker_plus.sort_unstable();
        kronecker_minus.sort_unstable();
        for (_, sizes) in jordan.iter_mut() {
            sizes.sort_unstable();
        }
        jordan.retain(|(_, s)| !s.is_empty());
        jordan.sort_by(|a, b| a.0.cmp(&b.0));
        BlockStructure {
            kronecker_plus,
            kronecker_minus,
            jordan,
        }
    }

    pub fn dim_v(&self) -> usize {
        self.kronecker_plus.iter().sum::<usize>()
            + self.kronecker_minus.iter().map(|k| k + 1).sum::<usize>()
            + self.jordan_total()
    }

    pub fn dim_w(&self) -> usize {
        self.kronecker_plus.iter().map(|k| k + 1).sum::<usize>()
            + self.kronecker_minus.iter().sum::<usize>()
            + self.jordan_total()
    }

    pub fn jordan_total(&self) -> usize {
        self.jordan.iter().map(|(_, s)| s.iter().sum::<usize>()).sum()
    }

    /// Rank of the pencil away from the exceptional set.
    pub fn rank(&self) -> usize {
        self.kronecker_plus.iter().sum::<usize>()
            + self.kronecker_minus.iter().sum::<usize>()
            + self.jordan_total()
    }

    pub fn has_numeric_eigenvalue(&self) -> bool {
        self.jordan
            .iter()
            .any(|(e, _)| matches!(e, Eigenvalue::Numeric { .. }))
    }
}

impl fmt::Display for BlockStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        for k in &self.kronecker_plus {
            parts.push(format!("k+({})", k));
        }
        for k in &self.kronecker_minus {
            parts.push(format!("k-({})", k));
        }
        for (ev, sizes) in &self.jordan {
            for j in sizes {
                parts.push(format!("j_{}({})", ev, j));
            }
        }
        if parts.is_empty() {
            write!(f, "(empty)")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PencilClass {
    Kronecker,
    Jordan,
    Mixed,
}

#[derive(Debug, Clone)]
pub struct Pencil {
    pub s1: Mat<GRat>,
    pub s2: Mat<GRat>,
}

impl Pencil {
    pub fn new(s1: Mat<GRat>, s2: Mat<GRat>) -> Result<Pencil, KwError> {
        if s1.rows != s2.rows || s1.cols != s2.cols {
            return Err(KwError::DimensionMismatch(format!(
                "S1 is {}x{} but S2 is {}x{}",
                s1.rows, s1.cols, s2.rows, s2.cols
            )));
        }
        Ok(Pencil { s1, s2 })
    }

    pub fn dim_v(&self) -> usize {
        self.s1.cols
    }

    pub fn dim_w(&self) -> usize {
        self.s1.rows
    }

    /// S2 - mu*S1, the member of the pencil at the affine parameter mu.
    pub fn at(&self, mu: &GRat) -> Mat<GRat> {
        self.s2.sub(&self.s1.scale(mu))
    }

    /// Rank of the pencil away from the exceptional set. Random parameters
    /// are drawn until three agree on the maximum observed rank.
    pub fn generic_rank(&self) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6b77_7261);
        let mut best = 0usize;
        let mut agreement = 0usize;
        while agreement < 3 {
            let mu = random_grat(&mut rng);
            let r = self.at(&mu).rank_fast();
            match r.cmp(&best) {
                Ordering::Greater => {
                    best = r;
                    agreement = 1;
                }
                Ordering::Equal => agreement += 1,
                Ordering::Less => {}
            }
        }
        best
    }

    /// All projective parameters where the pencil rank drops below the
    /// generic rank, reported as `Eigenvalue`s (see its docs for the
    /// projective identification).
    pub fn exceptional_set(&self) -> Vec<Eigenvalue> {
        let r = self.generic_rank();
        let mut out = Vec::new();
        if r == 0 {
            return out;
        }
        if self.s1.rank_fast() < r {
            out.push(Eigenvalue::Infinity);
        }
        out.extend(self.finite_eigenvalues(r));
        out.sort();
        out
    }

    /// Finite exceptional parameters mu with rank(S2 - mu S1) < r, found as
    /// verified roots of projected determinants. The determinants are
    /// first interpolated in floating point; when some root cannot be
    /// certified as a Gaussian rational the pass is repeated with exact
    /// coefficients, which locate high-multiplicity roots more tightly.
    fn finite_eigenvalues(&self, r: usize) -> Vec<Eigenvalue> {
        let fast = self.finite_eigenvalues_pass(r, false);
        if fast.iter().any(|e| matches!(e, Eigenvalue::Numeric { .. })) {
            return self.finite_eigenvalues_pass(r, true);
        }
        fast
    }

    fn finite_eigenvalues_pass(&self, r: usize, exact: bool) -> Vec<Eigenvalue> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6569_6721);
        // Two independent projections; genuine eigenvalues are common roots.
        for _attempt in 0..8 {
            let (q1, q2) = if exact {
                (
                    self.projected_det_poly(r, &mut rng),
                    self.projected_det_poly(r, &mut rng),
                )
            } else {
                (
                    self.projected_det_poly_f64(r, &mut rng),
                    self.projected_det_poly_f64(r, &mut rng),
                )
            };
            let (q1, q2) = match (q1, q2) {
                (Some(a), Some(b)) => (a, b),
                _ => continue,
            };
            let roots = durand_kerner(&q1);
            let mut cands: Vec<Complex64> = Vec::new();
            let scale2: f64 = q2.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
            for z in roots {
                if eval_poly(&q2, z).norm() / scale2 > 1e-6 {
                    continue; // spurious root of the first projection
                }
                if !cands.iter().any(|w| (w - z).norm() < 1e-7) {
                    cands.push(z);
                }
            }
            // A root of multiplicity m is only accurate to about
            // eps^(1/m); size the snapping window for the worst case,
            // the full degree of the projected determinant.
            let degree = (q1.len() - 1).max(1);
            let window = 2e-3f64.max(4.0 * 1e-16f64.powf(1.0 / degree as f64));
            let mut out = Vec::new();
            for z in cands {
                match self.recognize_eigenvalue(z, r, window) {
                    Some(ev) => out.push(ev),
                    None => out.push(Eigenvalue::Numeric { re: z.re, im: z.im }),
                }
            }
            out.sort();
            out.dedup();
            return out;
        }
        Vec::new()
    }

    /// Attempts to identify a numeric root as an exact Gaussian rational
    /// eigenvalue, certified by an exact rank computation.
    fn recognize_eigenvalue(&self, z: Complex64, r: usize, window: f64) -> Option<Eigenvalue> {
        // Root clusters are far coarser than the continued-fraction
        // recovery of `rationalize`; also offer the nearest
        // small-denominator rationals within the window. Every
        // candidate is certified by an exact rank drop, so a wrong guess
        // is discarded rather than accepted.
        let snap = |x: f64| -> Vec<Rat> {
            let mut cands: Vec<Rat> = rationalize(x, 1_000_000).into_iter().collect();
            let mut near: Vec<Rat> = (1..=64u64)
                .map(|den| {
                    let num = (x * den as f64).round() as i64;
                    Rat::new(num.into(), (den as i64).into())
                })
                .filter(|cand| (rat_to_f64(cand) - x).abs() < window * (1.0 + x.abs()))
                .collect();
            near.sort_by(|a, b| {
                let da = (rat_to_f64(a) - x).abs();
                let db = (rat_to_f64(b) - x).abs();
                da.partial_cmp(&db).unwrap()
            });
            near.dedup();
            cands.extend(near);
            cands
        };
        let mut ims = if z.im.abs() < window {
            vec![Rat::from_integer(0.into())]
        } else {
            Vec::new()
        };
        ims.extend(snap(z.im));
        ims.dedup();
        for re in snap(z.re) {
            for im in &ims {
                let mu = GRat::new(re.clone(), im.clone());
                if self.at(&mu).rank_fast() < r {
                    return Some(Eigenvalue::Finite(mu));
                }
            }
        }
        None
    }

    /// Determinant of U*(S2 - t*S1)*V for random full-rank projections,
    /// recovered exactly as a degree <= r polynomial in t by interpolation
    /// at the integer nodes 0..=r. Returns the complex coefficient vector
    /// (ascending), or None if the projection was degenerate.
    fn projected_det_poly(&self, r: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Complex64>> {
        let u: Mat<GRat> = random_mat(rng, r, self.dim_w(), 5);
        let v: Mat<GRat> = random_mat(rng, self.dim_v(), r, 5);
        let mut vals: Vec<GRat> = Vec::with_capacity(r + 1);
        for t in 0..=r as i64 {
            let m = u.matmul(&self.at(&GRat::from_i64(t))).matmul(&v);
            vals.push(m.det());
        }
        if vals.iter().all(|v| num_traits::Zero::is_zero(v)) {
            return None;
        }
        // Exact Vandermonde solve for the coefficients.
        let vander = Mat::<GRat>::from_fn(r + 1, r + 1, |i, j| {
            let mut p = GRat::from_i64(1);
            for _ in 0..j {
                p = p * GRat::from_i64(i as i64);
            }
            p
        });
        let coeffs = vander.solve(&vals)?;
        Some(
            coeffs
                .iter()
                .map(|c| {
                    let (re, im) = c.to_f64();
                    Complex64::new(re, im)
                })
                .collect(),
        )
    }

    /// Floating-point counterpart of `projected_det_poly`: complex LU
    /// determinants at centered integer nodes (better conditioned for the
    /// Vandermonde solve than 0..=r), coefficients from a pivoted solve.
    fn projected_det_poly_f64(&self, r: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Complex64>> {
        let u: Mat<GRat> = random_mat(rng, r, self.dim_w(), 5);
        let v: Mat<GRat> = random_mat(rng, self.dim_v(), r, 5);
        let to_c = |g: &GRat| {
            let (re, im) = g.to_f64();
            Complex64::new(re, im)
        };
        let cmat = |m: &Mat<GRat>| -> Vec<Vec<Complex64>> {
            (0..m.rows)
                .map(|i| (0..m.cols).map(|j| to_c(&m[(i, j)])).collect())
                .collect()
        };
        let (uc, vc) = (cmat(&u), cmat(&v));
        let (s1c, s2c) = (cmat(&self.s1), cmat(&self.s2));
        let (mw, nv) = (self.dim_w(), self.dim_v());
        let nodes: Vec<f64> = (0..=r).map(|i| i as f64 - r as f64 / 2.0).collect();
        let mut vals = Vec::with_capacity(r + 1);
        for &t in &nodes {
            // u * (s2 - t*s1) * v, assembled as (u*(s2 - t*s1)) then * v
            let mut ua = vec![vec![Complex64::new(0.0, 0.0); nv]; r];
            for i in 0..r {
                for k in 0..mw {
                    let f = uc[i][k];
                    for j in 0..nv {
                        ua[i][j] += f * (s2c[k][j] - t * s1c[k][j]);
                    }
                }
            }
            let mut m = vec![vec![Complex64::new(0.0, 0.0); r]; r];
            for i in 0..r {
                for k in 0..nv {
                    let f = ua[i][k];
                    for j in 0..r {
                        m[i][j] += f * vc[k][j];
                    }
                }
            }
            vals.push(complex_det(m));
        }
        if vals.iter().all(|v| v.norm() < 1e-300) {
            return None;
        }
        let vander: Vec<Vec<Complex64>> = nodes
            .iter()
            .map(|&t| {
                (0..=r)
                    .map(|j| Complex64::new(t, 0.0).powu(j as u32))
                    .collect()
            })
            .collect();
        complex_solve(vander, vals)
    }

    /// Full Jordan-Kronecker block inventory.
    pub fn block_structure(&self) -> BlockStructure {
        let n = self.dim_v();
        let m = self.dim_w();
        let r = self.generic_rank();
        let kronecker_minus = minimal_indices(&self.s1, &self.s2, n - r);
        let kronecker_plus =
            minimal_indices(&self.s1.transpose(), &self.s2.transpose(), m - r);
        let jordan_total = r
            - kronecker_plus.iter().sum::<usize>()
            - kronecker_minus.iter().sum::<usize>();
        let mut jordan = Vec::new();
        if jordan_total > 0 {
            let n_minus = kronecker_minus.len();
            for ev in self.exceptional_set() {
                let sizes = self.jordan_sizes_at(&ev, n_minus, jordan_total);
                if !sizes.is_empty() {
                    jordan.push((ev, sizes));
                }
            }
        }
        BlockStructure::new(kronecker_plus, kronecker_minus, jordan)
    }

    /// Jordan sizes at one eigenvalue from the rank sequence of the block
    /// lower-bidiagonal chain matrices.
    fn jordan_sizes_at(&self, ev: &Eigenvalue, n_minus: usize, cap: usize) -> Vec<usize> {
        let n = self.dim_v();
        // ge_counts[j-1] = number of Jordan blocks at ev of size >= j
        let mut ge_counts: Vec<usize> = Vec::new();
        let mut prev_nullity = 0usize;
        for j in 1..=cap {
            let nullity = match ev {
                Eigenvalue::Finite(mu) => {
                    let a = self.at(mu);
                    let mj = chain_matrix(&a, &self.s1, j);
                    j * n - mj.rank_fast()
                }
                Eigenvalue::Infinity => {
                    let mj = chain_matrix(&self.s1, &self.s2, j);
                    j * n - mj.rank_fast()
                }
                Eigenvalue::Numeric { re, im } => {
                    let z = Complex64::new(*re, *im);
                    j * n - numeric_chain_rank(self, z, j)
                }
            };
            let ge = (nullity - prev_nullity).saturating_sub(n_minus);
            prev_nullity = nullity;
            if ge == 0 {
                break;
            }
            ge_counts.push(ge);
        }
        // Convert the tail-counts to a size multiset.
        let mut sizes = Vec::new();
        for (idx, ge) in ge_counts.iter().enumerate() {
            let next = ge_counts.get(idx + 1).copied().unwrap_or(0);
            for _ in 0..ge - next {
                sizes.push(idx + 1);
            }
        }
        sizes
    }

    pub fn classify(&self) -> (PencilClass, bool) {
        let bs = self.block_structure();
        let class = if bs.jordan.is_empty() {
            PencilClass::Kronecker
        } else if bs.kronecker_plus.is_empty() && bs.kronecker_minus.is_empty() {
            PencilClass::Jordan
        } else {
            PencilClass::Mixed
        };
        let generic = bs.jordan.is_empty()
            && bs.kronecker_minus.is_empty()
            && bs.kronecker_plus.len() == 1
            && bs.kronecker_plus[0] == self.dim_v()
            && self.dim_w() == self.dim_v() + 1;
        (class, generic)
    }

    /// Basis (columns) of the Jordan part of V: the preimage under S1 of
    /// the intersection of the images of dimV+1 generic pencil members.
    /// Requires S1 injective (no decreasing Kronecker blocks).
    pub fn jordan_part(&self) -> Result<Mat<GRat>, KwError> {
        let n = self.dim_v();
        if self.s1.rank() < n {
            return Err(KwError::Invalid(
                "jordan_part requires S1 injective".to_string(),
            ));
        }
        let r = self.generic_rank();
        let mut rng = ChaCha8Rng::seed_from_u64(0x6a70_6172);
        let mut inter: Option<Mat<GRat>> = None;
        let mut used = 0usize;
        while used < n + 1 {
            let mu = random_grat(&mut rng);
            let a = self.at(&mu);
            if a.rank() < r {
                continue; // exceptional parameter, resample
            }
            used += 1;
            let im = a.column_basis();
            inter = Some(match inter {
                None => im,
                Some(prev) => Mat::colspace_intersection(&prev, &im),
            });
        }
        let target = inter.expect("at least one parameter used");
        Ok(self.s1.preimage_of_colspace(&target))
    }
}

/// Kronecker minimal indices (count known in advance) from the rank
/// sequence of the block-Toeplitz expansions of the pencil.
fn minimal_indices(s1: &Mat<GRat>, s2: &Mat<GRat>, count: usize) -> Vec<usize> {
    if count == 0 {
        return Vec::new();
    }
    let n = s1.cols;
    let mut nullities = Vec::new(); // nullity of T_d for d = 0,1,...
    let mut deltas = Vec::new(); // number of indices <= d
    let mut d = 0usize;
    loop {
        let t = toeplitz_expansion(s1, s2, d);
        let nullity = (d + 1) * n - t.rank_fast();
        let prev = nullities.last().copied().unwrap_or(0);
        deltas.push(nullity - prev);
        nullities.push(nullity);
        if *deltas.last().unwrap() >= count {
            break;
        }
        d += 1;
        assert!(
            d <= s1.rows + s1.cols + 1,
            "minimal index search exceeded the dimension bound"
        );
    }
    let mut out = Vec::new();
    for (idx, delta) in deltas.iter().enumerate() {
        let prev = if idx == 0 { 0 } else { deltas[idx - 1] };
        for _ in 0..delta - prev {
            out.push(idx);
        }
    }
    out
}

/// T_d: maps polynomial coefficient vectors (x_0..x_d) to the coefficients
/// of (S2 - t*S1)(x_0 + t x_1 + ...). Block (k, j) is S2 when j = k and
/// -S1 when j = k-1.
fn toeplitz_expansion(s1: &Mat<GRat>, s2: &Mat<GRat>, d: usize) -> Mat<GRat> {
    let (m, n) = (s1.rows, s1.cols);
    Mat::from_fn((d + 2) * m, (d + 1) * n, |i, j| {
        let (bi, ri) = (i / m, i % m);
        let (bj, cj) = (j / n, j % n);
        if bj == bi {
            s2[(ri, cj)].clone()
        } else if bj + 1 == bi {
            -s1[(ri, cj)].clone()
        } else {
            GRat::from_i64(0)
        }
    })
}

/// Block lower bidiagonal chain matrix with `a` on the diagonal and `-b`
/// on the subdiagonal, j block rows/cols.
fn chain_matrix(a: &Mat<GRat>, b: &Mat<GRat>, j: usize) -> Mat<GRat> {
    let (m, n) = (a.rows, a.cols);
    Mat::from_fn(j * m, j * n, |i, jj| {
        let (bi, ri) = (i / m, i % m);
        let (bj, cj) = (jj / n, jj % n);
        if bi == bj {
            a[(ri, cj)].clone()
        } else if bj + 1 == bi {
            -b[(ri, cj)].clone()
        } else {
            GRat::from_i64(0)
        }
    })
}

/// Floating-point rank of the chain matrix at a numeric (flagged)
/// eigenvalue.
fn numeric_chain_rank(p: &Pencil, z: Complex64, j: usize) -> usize {
    let (m, n) = (p.dim_w(), p.dim_v());
    let to_c = |g: &GRat| {
        let (re, im) = g.to_f64();
        Complex64::new(re, im)
    };
    let mut rows = vec![vec![Complex64::new(0.0, 0.0); j * n]; j * m];
    for bi in 0..j {
        for ri in 0..m {
            for cj in 0..n {
                let a = to_c(&p.s2[(ri, cj)]) - z * to_c(&p.s1[(ri, cj)]);
                rows[bi * m + ri][bi * n + cj] = a;
                if bi + 1 < j {
                    rows[(bi + 1) * m + ri][bi * n + cj] = -to_c(&p.s1[(ri, cj)]);
                }
            }
        }
    }
    complex_rank(rows, 1e-8)
}

fn complex_det(mut m: Vec<Vec<Complex64>>) -> Complex64 {
    let n = m.len();
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let (best, bestv) = (c..n)
            .map(|i| (i, m[i][c].norm()))
            .fold((c, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if bestv == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if best != c {
            m.swap(best, c);
            det = -det;
        }
        let pivot = m[c][c];
        det *= pivot;
        for i in c + 1..n {
            let f = m[i][c] / pivot;
            for k in c..n {
                let sub = f * m[c][k];
                m[i][k] -= sub;
            }
        }
    }
    det
}

/// Pivoted Gaussian solve of a dense complex system; `None` when the
/// matrix is numerically singular.
fn complex_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n = a.len();
    for c in 0..n {
        let (best, bestv) = (c..n)
            .map(|i| (i, a[i][c].norm()))
            .fold((c, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if bestv < 1e-300 {
            return None;
        }
        a.swap(best, c);
        b.swap(best, c);
        let pivot = a[c][c];
        for i in c + 1..n {
            let f = a[i][c] / pivot;
            for k in c..n {
                let sub = f * a[c][k];
                a[i][k] -= sub;
            }
            let sub = f * b[c];
            b[i] -= sub;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for c in (0..n).rev() {
        let mut acc = b[c];
        for k in c + 1..n {
            acc -= a[c][k] * x[k];
        }
        x[c] = acc / a[c][c];
    }
    Some(x)
}

fn complex_rank(mut rows: Vec<Vec<Complex64>>, tol: f64) -> usize {
    let m = rows.len();
    if m == 0 {
        return 0;
    }
    let n = rows[0].len();
    let scale: f64 = rows
        .iter()
        .flat_map(|r| r.iter().map(|c| c.norm()))
        .fold(0.0, f64::max)
        .max(1.0);
    let mut rank = 0;
    let mut row = 0;
    for col in 0..n {
        let (best, bestv) = (row..m)
            .map(|i| (i, rows[i][col].norm()))
            .fold((row, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if bestv <= tol * scale {
            continue;
        }
        rows.swap(row, best);
        let pivot = rows[row][col];
        for i in row + 1..m {
            let f = rows[i][col] / pivot;
            for k in col..n {
                let sub = f * rows[row][k];
                rows[i][k] -= sub;
            }
        }
        rank += 1;
        row += 1;
        if row == m {
            break;
        }
    }
    rank
}

fn eval_poly(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// Durand-Kerner iteration for all complex roots of the polynomial with
/// the given ascending coefficients.
fn durand_kerner(coeffs: &[Complex64]) -> Vec<Complex64> {
    // strip trailing (leading-coefficient) zeros and leading zero roots
    let mut c: Vec<Complex64> = coeffs.to_vec();
    while c.last().map(|x| x.norm() < 1e-300).unwrap_or(false) {
        c.pop();
    }
    if c.len() <= 1 {
        return Vec::new();
    }
    let lead = *c.last().unwrap();
    for x in c.iter_mut() {
        *x /= lead;
    }
    let deg = c.len() - 1;
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32 + 1)).collect();
    for _ in 0..500 {
        let mut delta: f64 = 0.0;
        for i in 0..deg {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    den *= roots[i] - roots[j];
                }
            }
            if den.norm() < 1e-300 {
                continue;
            }
            let step = eval_poly(&c, roots[i]) / den;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-13 {
            break;
        }
    }
    roots
}

fn random_grat<R: Rng>(rng: &mut R) -> GRat {
    GRat::from_rat(Rat::new(
        rng.gen_range(-1000i64..=1000).into(),
        rng.gen_range(1i64..=97).into(),
    ))
}

/// Builds a pencil with the prescribed block structure: canonical block
/// templates assembled block-diagonally, then conjugated by random exact
/// invertible matrices on both sides.
pub fn synthesize_pencil(spec: &BlockStructure, seed: u64) -> Pencil {
    let mut blocks: Vec<(Mat<GRat>, Mat<GRat>)> = Vec::new();
    for &k in &spec.kronecker_plus {
        // (k+1) x k: S1 = identity on top, S2 = identity on bottom
        let s1 = Mat::from_fn(k + 1, k, |i, j| GRat::from_i64((i == j) as i64));
        let s2 = Mat::from_fn(k + 1, k, |i, j| GRat::from_i64((i == j + 1) as i64));
        blocks.push((s1, s2));
    }
    for &k in &spec.kronecker_minus {
        // k x (k+1): S1 = [I | 0], S2 = [0 | I]
        let s1 = Mat::from_fn(k, k + 1, |i, j| GRat::from_i64((i == j) as i64));
        let s2 = Mat::from_fn(k, k + 1, |i, j| GRat::from_i64((i + 1 == j) as i64));
        blocks.push((s1, s2));
    }
    for (ev, sizes) in &spec.jordan {
        for &j in sizes {
            match ev {
                Eigenvalue::Finite(mu) => {
                    let s1 = Mat::identity(j);
                    let s2 = Mat::from_fn(j, j, |r, c| {
                        if r == c {
                            mu.clone()
                        } else if c == r + 1 {
                            GRat::from_i64(1)
                        } else {
                            GRat::from_i64(0)
                        }
                    });
                    blocks.push((s1, s2));
                }
                Eigenvalue::Infinity => {
                    let s1 = Mat::from_fn(j, j, |r, c| GRat::from_i64((c == r + 1) as i64));
                    let s2 = Mat::identity(j);
                    blocks.push((s1, s2));
                }
                Eigenvalue::Numeric { .. } => {
                    panic!("cannot synthesize a pencil from a numeric eigenvalue")
                }
            }
        }
    }
    let (s1, s2) = direct_sum(&blocks);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: Mat<GRat> = random_invertible(&mut rng, s1.rows, 3);
    let h: Mat<GRat> = random_invertible(&mut rng, s1.cols, 3);
    Pencil {
        s1: g.matmul(&s1).matmul(&h),
        s2: g.matmul(&s2).matmul(&h),
    }
}

fn direct_sum(blocks: &[(Mat<GRat>, Mat<GRat>)]) -> (Mat<GRat>, Mat<GRat>) {
    let rows: usize = blocks.iter().map(|(a, _)| a.rows).sum();
    let cols: usize = blocks.iter().map(|(a, _)| a.cols).sum();
    let mut s1 = Mat::zeros(rows, cols);
    let mut s2 = Mat::zeros(rows, cols);
    let (mut ro, mut co) = (0, 0);
    for (a, b) in blocks {
        for i in 0..a.rows {
            for j in 0..a.cols {
                s1[(ro + i, co + j)] = a[(i, j)].clone();
                s2[(ro + i, co + j)] = b[(i, j)].clone();
            }
        }
        ro += a.rows;
        co += a.cols;
    }
    (s1, s2)
}

/// Parses a JSON matrix of exact scalar strings, e.g.
/// `[["3/2","0"],["1","-1/4i"]]`.
pub fn parse_matrix(json: &str) -> Result<Mat<GRat>, KwError> {
    let rows: Vec<Vec<String>> = serde_json::from_str(json)
        .map_err(|e| KwError::Invalid(format!("invalid matrix JSON: {e}")))?;
    if rows.is_empty() {
        return Err(KwError::Invalid("empty matrix".to_string()));
    }
    let cols = rows[0].len();
    let mut parsed: Vec<Vec<GRat>> = Vec::with_capacity(rows.len());
    for row in &rows {
        if row.len() != cols {
            return Err(KwError::DimensionMismatch("ragged matrix rows".to_string()));
        }
        parsed.push(row.iter().map(|s| GRat::parse(s)).collect::<Result<_, _>>()?);
    }
    Ok(Mat::from_rows(parsed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat_int;

    fn gmat(entries: &[&[i64]]) -> Mat<GRat> {
        Mat::from_rows(
            entries
                .iter()
                .map(|r| r.iter().map(|&v| GRat::from_i64(v)).collect())
                .collect(),
        )
    }

    fn ev(v: i64) -> Eigenvalue {
        Eigenvalue::Finite(GRat::from_i64(v))
    }

    #[test]
    fn generic_rank_basics() {
        let p = Pencil::new(gmat(&[&[1, 0], &[0, 1]]), gmat(&[&[0, 0], &[0, 0]])).unwrap();
        assert_eq!(p.generic_rank(), 2);
        let z = Pencil::new(gmat(&[&[0, 0], &[0, 0]]), gmat(&[&[0, 0], &[0, 0]])).unwrap();
        assert_eq!(z.generic_rank(), 0);
        // increasing Kronecker block of size 2: 3x2 canonical pair
        let kp = synthesize_pencil(&BlockStructure::new(vec![2], vec![], vec![]), 7);
        assert_eq!(kp.generic_rank(), 2);
    }

    #[test]
    fn exceptional_set_of_diagonal_pair() {
        let p = Pencil::new(gmat(&[&[1, 0], &[0, 1]]), gmat(&[&[5, 0], &[0, 7]])).unwrap();
        assert_eq!(p.exceptional_set(), vec![ev(5), ev(7)]);
        // projective form: [-5:1] and [-7:1]
        assert_eq!(ev(5).proj_string(), "[-5:1]");
    }

    #[test]
    fn exceptional_set_of_kronecker_block_is_empty() {
        let p = synthesize_pencil(&BlockStructure::new(vec![2], vec![], vec![]), 3);
        assert!(p.exceptional_set().is_empty());
    }

    #[test]
    fn one_by_one_exceptional_direction() {
        let p = Pencil::new(gmat(&[&[1]]), gmat(&[&[1]])).unwrap();
        // rank drops where l1 + l2 = 0, i.e. mu = 1, point [-1:1]
        assert_eq!(p.exceptional_set(), vec![ev(1)]);
    }

    #[test]
    fn jordan_block_structure() {
        // S1 = I2, S2 = Jordan block with eigenvalue 5
        let p = Pencil::new(gmat(&[&[1, 0], &[0, 1]]), gmat(&[&[5, 1], &[0, 5]])).unwrap();
        let bs = p.block_structure();
        assert_eq!(
            bs,
            BlockStructure::new(vec![], vec![], vec![(ev(5), vec![2])])
        );
        assert_eq!(p.classify(), (PencilClass::Jordan, false));
    }

    #[test]
    fn kronform_pair_is_generic_type() {
        let p = synthesize_pencil(&BlockStructure::new(vec![3], vec![], vec![]), 11);
        let bs = p.block_structure();
        assert_eq!(bs, BlockStructure::new(vec![3], vec![], vec![]));
        assert_eq!(p.classify(), (PencilClass::Kronecker, true));
    }

    #[test]
    fn mixed_structure_recovered() {
        let spec = BlockStructure::new(vec![1], vec![], vec![(ev(3), vec![2])]);
        let p = synthesize_pencil(&spec, 21);
        assert_eq!(p.block_structure(), spec);
        assert_eq!(p.classify(), (PencilClass::Mixed, false));
    }

    #[test]
    fn infinity_eigenvalue() {
        let spec = BlockStructure::new(vec![], vec![], vec![(Eigenvalue::Infinity, vec![2])]);
        let p = synthesize_pencil(&spec, 5);
        assert_eq!(p.block_structure(), spec);
        assert_eq!(p.exceptional_set(), vec![Eigenvalue::Infinity]);
    }

    #[test]
    fn decreasing_kronecker_block() {
        let spec = BlockStructure::new(vec![], vec![1], vec![]);
        let p = synthesize_pencil(&spec, 9);
        assert_eq!(p.dim_w(), 1);
        assert_eq!(p.dim_v(), 2);
        assert_eq!(p.block_structure(), spec);
    }

    #[test]
    fn zero_pencil_structure() {
        let p = Pencil::new(gmat(&[&[0, 0], &[0, 0]]), gmat(&[&[0, 0], &[0, 0]])).unwrap();
        let bs = p.block_structure();
        assert_eq!(bs, BlockStructure::new(vec![0, 0], vec![0, 0], vec![]));
    }

    #[test]
    fn jordan_part_examples() {
        // Jordan pencil: full V
        let p = Pencil::new(gmat(&[&[1, 0], &[0, 1]]), gmat(&[&[5, 0], &[0, 7]])).unwrap();
        assert_eq!(p.jordan_part().unwrap().rank(), 2);
        // pure increasing Kronecker: zero subspace
        let kp = synthesize_pencil(&BlockStructure::new(vec![2], vec![], vec![]), 13);
        assert_eq!(kp.jordan_part().unwrap().cols, 0);
        // mixed: dimension equals the total Jordan size
        let spec = BlockStructure::new(vec![1], vec![], vec![(ev(5), vec![1])]);
        let mx = synthesize_pencil(&spec, 17);
        assert_eq!(mx.jordan_part().unwrap().rank(), 1);
        // S1 not injective -> error
        let bad = synthesize_pencil(&BlockStructure::new(vec![], vec![1], vec![]), 1);
        assert!(bad.jordan_part().is_err());
    }

    #[test]
    fn gaussian_rational_eigenvalue() {
        // S2 = [[0,-1],[1,0]] has eigenvalues +-i relative to S1 = I
        let p = Pencil::new(gmat(&[&[1, 0], &[0, 1]]), gmat(&[&[0, -1], &[1, 0]])).unwrap();
        let es = p.exceptional_set();
        assert_eq!(es.len(), 2);
        let i = GRat::new(rat_int(0), rat_int(1));
        assert!(es.contains(&Eigenvalue::Finite(i.clone())));
        assert!(es.contains(&Eigenvalue::Finite(-i)));
    }

    #[test]
    fn parse_matrix_json() {
        let m = parse_matrix(r#"[["3/2","0"],["1","1/4i"]]"#).unwrap();
        assert_eq!(m.rows, 2);
        assert_eq!(m[(0, 0)], GRat::from_rat(crate::rat::rat_i64(3, 2)));
        assert!(parse_matrix(r#"[["1","2"],["3"]]"#).is_err());
    }
}
