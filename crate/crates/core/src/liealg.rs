//! Finite-dimensional Lie algebras by structure constants, algebraic
//! Nijenhuis torsion and partial Nijenhuis operators, with the pencil
//! subalgebra and affinization criteria.

use crate::error::KwError;
use crate::linalg::Mat;
use crate::rat::{parse_rat, Rat};
use num_traits::Zero;
use serde::Deserialize;

/// Lie algebra on Q^n given by structure constants c^k_{ij}.
#[derive(Debug, Clone)]
pub struct LieAlgebra {
    pub dim: usize,
    /// c[k * dim * dim + i * dim + j] = c^k_{ij}
    c: Vec<Rat>,
    pub labels: Option<Vec<String>>,
}

impl LieAlgebra {
    /// Builds from the nonzero constants with i < j (0-based indices);
    /// antisymmetry is filled in, the Jacobi identity is verified.
    pub fn new(dim: usize, entries: &[(usize, usize, usize, Rat)]) -> Result<Self, KwError> {
        let mut c = vec![Rat::zero(); dim * dim * dim];
        for (i, j, k, v) in entries {
            if *i >= dim || *j >= dim || *k >= dim {
                return Err(KwError::Invalid(format!(
                    "structure constant index out of range: ({},{},{})",
                    i, j, k
                )));
            }
            if i == j {
                return Err(KwError::Invalid("c^k_{ii} must vanish".to_string()));
            }
            c[k * dim * dim + i * dim + j] = v.clone();
            c[k * dim * dim + j * dim + i] = -v.clone();
        }
        let g = LieAlgebra {
            dim,
            c,
            labels: None,
        };
        g.verify_jacobi()?;
        Ok(g)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.dim);
        self.labels = Some(labels);
        self
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> &Rat {
        &self.c[k * self.dim * self.dim + i * self.dim + j]
    }

    fn verify_jacobi(&self) -> Result<(), KwError> {
        let n = self.dim;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let j3 =
                        self.jacobiator(&self.basis_vec(i), &self.basis_vec(j), &self.basis_vec(k));
                    if !j3.iter().all(Zero::is_zero) {
                        return Err(KwError::Invalid(format!(
                            "Jacobi identity fails on basis triple ({},{},{})",
                            i, j, k
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn basis_vec(&self, i: usize) -> Vec<Rat> {
        let mut v = vec![Rat::zero(); self.dim];
        v[i] = num_traits::One::one();
        v
    }

    pub fn bracket(&self, x: &[Rat], y: &[Rat]) -> Vec<Rat> {
        let n = self.dim;
        let mut out = vec![Rat::zero(); n];
        for i in 0..n {
            if x[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if y[j].is_zero() {
                    continue;
                }
                let xy = &x[i] * &y[j];
                for (k, o) in out.iter_mut().enumerate() {
                    let c = self.structure_constant(i, j, k);
                    if !Zero::is_zero(c) {
                        *o += c * &xy;
                    }
                }
            }
        }
        out
    }

    pub fn jacobiator(&self, x: &[Rat], y: &[Rat], z: &[Rat]) -> Vec<Rat> {
        let a = self.bracket(&self.bracket(x, y), z);
        let b = self.bracket(&self.bracket(y, z), x);
        let c = self.bracket(&self.bracket(z, x), y);
        add(&add(&a, &b), &c)
    }

    /// Parses `{"dim": n, "c": [[i,j,k,"q"], ...]}` with 1-based indices.
    pub fn from_json(json: &str) -> Result<Self, KwError> {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            c: Vec<(usize, usize, usize, String)>,
        }
        let raw: Raw = serde_json::from_str(json)
            .map_err(|e| KwError::Invalid(format!("invalid structure constants JSON: {e}")))?;
        let mut entries = Vec::new();
        for (i, j, k, q) in &raw.c {
            if *i == 0 || *j == 0 || *k == 0 {
                return Err(KwError::Invalid(
                    "structure constant indices are 1-based".to_string(),
                ));
            }
            entries.push((i - 1, j - 1, k - 1, parse_rat(q)?));
        }
        LieAlgebra::new(raw.dim, &entries)
    }

    /// Structure constants computed from explicit matrix generators: the
    /// span must be closed under the commutator.
    pub fn from_matrix_basis(basis: &[Mat<Rat>]) -> Result<Self, KwError> {
        let dim = basis.len();
        let flat = Mat::from_cols(basis.iter().map(flatten).collect());
        let mut entries = Vec::new();
        for i in 0..dim {
            for j in i + 1..dim {
                let comm = basis[i].matmul(&basis[j]).sub(&basis[j].matmul(&basis[i]));
                let coords = flat.solve(&flatten(&comm)).ok_or_else(|| {
                    KwError::Invalid("matrix span not closed under commutator".to_string())
                })?;
                for (k, v) in coords.iter().enumerate() {
                    if !v.is_zero() {
                        entries.push((i, j, k, v.clone()));
                    }
                }
            }
        }
        LieAlgebra::new(dim, &entries)
    }
}

fn flatten(m: &Mat<Rat>) -> Vec<Rat> {
    let mut v = Vec::with_capacity(m.rows * m.cols);
    for i in 0..m.rows {
        for j in 0..m.cols {
            v.push(m[(i, j)].clone());
        }
    }
    v
}

fn add(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// gl(n): basis E_ij in row-major order, [E_ab, E_cd] = d_bc E_ad - d_da E_cb.
pub fn gl(n: usize) -> LieAlgebra {
    let dim = n * n;
    let idx = |a: usize, b: usize| a * n + b;
    let mut entries = Vec::new();
    for p in 0..dim {
        for q in p + 1..dim {
            let (a, b) = (p / n, p % n);
            let (c, d) = (q / n, q % n);
            let mut out = vec![Rat::zero(); dim];
            if b == c {
                out[idx(a, d)] += Rat::from_integer(1.into());
            }
            if d == a {
                out[idx(c, b)] -= Rat::from_integer(1.into());
            }
            for (k, v) in out.into_iter().enumerate() {
                if !v.is_zero() {
                    entries.push((p, q, k, v));
                }
            }
        }
    }
    let labels = (0..n)
        .flat_map(|a| (0..n).map(move |b| format!("E{}{}", a + 1, b + 1)))
        .collect();
    LieAlgebra::new(dim, &entries)
        .expect("gl(n) satisfies Jacobi")
        .with_labels(labels)
}

/// Inclusion matrix of so(n) inside gl(n): columns are E_ij - E_ji, i < j,
/// in gl coordinates.
pub fn so_inclusion(n: usize) -> Mat<Rat> {
    let mut cols = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut v = vec![Rat::zero(); n * n];
            v[i * n + j] = num_traits::One::one();
            v[j * n + i] = -<Rat as num_traits::One>::one();
            cols.push(v);
        }
    }
    Mat::from_cols(cols)
}

/// so(n) as an abstract algebra (structure constants via gl(n) matrices).
pub fn so(n: usize) -> LieAlgebra {
    let mut basis = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let m = Mat::from_fn(n, n, |r, c| {
                if (r, c) == (i, j) {
                    num_traits::One::one()
                } else if (r, c) == (j, i) {
                    -<Rat as num_traits::One>::one()
                } else {
                    Rat::zero()
                }
            });
            basis.push(m);
        }
    }
    LieAlgebra::from_matrix_basis(&basis).expect("so(n) is closed under commutator")
}

/// Left multiplication L_A as a linear operator on gl(n) in the E_ij basis.
pub fn left_mult_operator(n: usize, a: &Mat<Rat>) -> Mat<Rat> {
    // (A x)_{ij} = sum_k A_{ik} x_{kj}
    Mat::from_fn(n * n, n * n, |row, col| {
        let (i, j) = (row / n, row % n);
        let (k, l) = (col / n, col % n);
        if l == j {
            a[(i, k)].clone()
        } else {
            Rat::zero()
        }
    })
}

/// A subalgebra h of g (columns of `inclusion`) with an operator
/// N: h -> g (columns of `n_op` are images of the h-basis).
#[derive(Debug, Clone)]
pub struct PartialOp {
    pub inclusion: Mat<Rat>,
    pub n_op: Mat<Rat>,
}

impl PartialOp {
    pub fn new(g: &LieAlgebra, inclusion: Mat<Rat>, n_op: Mat<Rat>) -> Result<Self, KwError> {
        if inclusion.rows != g.dim || n_op.rows != g.dim || inclusion.cols != n_op.cols {
            return Err(KwError::DimensionMismatch(
                "inclusion and operator must map h into g".to_string(),
            ));
        }
        if inclusion.rank() != inclusion.cols {
            return Err(KwError::Invalid(
                "inclusion columns are linearly dependent".to_string(),
            ));
        }
        let p = PartialOp { inclusion, n_op };
        // h must be closed under the bracket
        for a in 0..p.dim_h() {
            for b in a + 1..p.dim_h() {
                let v = g.bracket(&p.inclusion.col(a), &p.inclusion.col(b));
                if p.inclusion.solve(&v).is_none() {
                    return Err(KwError::Invalid(format!(
                        "h is not a subalgebra: bracket of basis vectors {} and {} leaves h",
                        a, b
                    )));
                }
            }
        }
        Ok(p)
    }

    /// Full-domain operator: h = g.
    pub fn full(g: &LieAlgebra, n_op: Mat<Rat>) -> Result<Self, KwError> {
        PartialOp::new(g, Mat::identity(g.dim), n_op)
    }

    pub fn dim_h(&self) -> usize {
        self.inclusion.cols
    }

    /// Embeds h-coordinates into g.
    pub fn embed(&self, x: &[Rat]) -> Vec<Rat> {
        self.inclusion.matvec(x)
    }

    /// Applies N to h-coordinates, yielding a g-vector.
    pub fn apply(&self, x: &[Rat]) -> Vec<Rat> {
        self.n_op.matvec(x)
    }

    /// h-coordinates of a g-vector, if it lies in h.
    pub fn coords_in_h(&self, v: &[Rat]) -> Option<Vec<Rat>> {
        self.inclusion.solve(v)
    }
}

/// Value of the deformed bracket [x,y]_N = [Nx,y] + [x,Ny] - N[x,y] as a
/// g-vector, together with its h-coordinates when it lies in h
/// (membership condition (i) of a partial Nijenhuis operator).
#[derive(Debug, Clone)]
pub struct DeformedBracket {
    pub value: Vec<Rat>,
    pub in_h: Option<Vec<Rat>>,
}

/// [x,y]_N for x, y given in h-coordinates.
pub fn deformed_bracket(g: &LieAlgebra, p: &PartialOp, x: &[Rat], y: &[Rat]) -> DeformedBracket {
    let (ix, iy) = (p.embed(x), p.embed(y));
    let (nx, ny) = (p.apply(x), p.apply(y));
    let xy = g.bracket(&ix, &iy);
    let u = p
        .coords_in_h(&xy)
        .expect("h is closed under the bracket (checked at construction)");
    let value = sub(&add(&g.bracket(&nx, &iy), &g.bracket(&ix, &ny)), &p.apply(&u));
    let in_h = p.coords_in_h(&value);
    DeformedBracket { value, in_h }
}

/// Nijenhuis torsion T_N(x,y) = [Nx,Ny] - N[x,y]_N; defined only when the
/// deformed bracket lies in h.
pub fn torsion(g: &LieAlgebra, p: &PartialOp, x: &[Rat], y: &[Rat]) -> Result<Vec<Rat>, KwError> {
    let db = deformed_bracket(g, p, x, y);
    let u = db.in_h.ok_or_else(|| {
        KwError::Invalid("torsion undefined: [x,y]_N does not lie in h".to_string())
    })?;
    let (nx, ny) = (p.apply(x), p.apply(y));
    Ok(sub(&g.bracket(&nx, &ny), &p.apply(&u)))
}

/// Checks conditions (i) and (ii) on all basis pairs of h; returns the
/// first failing pair as a witness.
pub fn is_algebraic_pno(g: &LieAlgebra, p: &PartialOp) -> (bool, Option<(usize, usize)>) {
    let h = p.dim_h();
    for a in 0..h {
        for b in a + 1..h {
            let x = unit(h, a);
            let y = unit(h, b);
            match torsion(g, p, &x, &y) {
                Err(_) => return (false, Some((a, b))),
                Ok(t) => {
                    if !t.iter().all(Zero::is_zero) {
                        return (false, Some((a, b)));
                    }
                }
            }
        }
    }
    (true, None)
}

fn unit(n: usize, i: usize) -> Vec<Rat> {
    let mut v = vec![Rat::zero(); n];
    v[i] = num_traits::One::one();
    v
}

/// True iff every linear combination l1*[,]_1 + l2*[,]_2 satisfies Jacobi,
/// decided exactly via the mixed Jacobiator.
pub fn check_compatibility(g1: &LieAlgebra, g2: &LieAlgebra) -> Result<bool, KwError> {
    if g1.dim != g2.dim {
        return Err(KwError::DimensionMismatch(
            "brackets live on spaces of different dimension".to_string(),
        ));
    }
    let n = g1.dim;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (x, y, z) = (unit(n, i), unit(n, j), unit(n, k));
                let mut mixed = vec![Rat::zero(); n];
                for (p, q) in [(g1, g2), (g2, g1)] {
                    mixed = add(&mixed, &q.bracket(&p.bracket(&x, &y), &z));
                    mixed = add(&mixed, &q.bracket(&p.bracket(&y, &z), &x));
                    mixed = add(&mixed, &q.bracket(&p.bracket(&z, &x), &y));
                }
                if !mixed.iter().all(Zero::is_zero) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// The Lie algebra structure carried by the deformed bracket of a passing
/// partial Nijenhuis operator on its domain h.
pub fn deformed_algebra(g: &LieAlgebra, p: &PartialOp) -> Result<LieAlgebra, KwError> {
    let h = p.dim_h();
    let mut entries = Vec::new();
    for a in 0..h {
        for b in a + 1..h {
            let db = deformed_bracket(g, p, &unit(h, a), &unit(h, b));
            let u = db.in_h.ok_or_else(|| {
                KwError::Invalid("deformed bracket leaves h; not a PNO".to_string())
            })?;
            for (k, v) in u.iter().enumerate() {
                if !v.is_zero() {
                    entries.push((a, b, k, v.clone()));
                }
            }
        }
    }
    LieAlgebra::new(h, &entries)
}

/// Sufficient pencil criterion: each h_k = (a_k I + b_k N) h must be a
/// subalgebra and the intersection of all h_k must be zero.
pub fn pencil_subalgebra_criterion(
    g: &LieAlgebra,
    p: &PartialOp,
    coefficients: &[(Rat, Rat)],
) -> bool {
    let mut inter: Option<Mat<Rat>> = None;
    for (a, b) in coefficients {
        let hk = p.inclusion.scale(a).add(&p.n_op.scale(b)).column_basis();
        // subalgebra test on the image
        for i in 0..hk.cols {
            for j in i + 1..hk.cols {
                let v = g.bracket(&hk.col(i), &hk.col(j));
                if hk.solve(&v).is_none() {
                    return false;
                }
            }
        }
        inter = Some(match inter {
            None => hk,
            Some(prev) => Mat::colspace_intersection(&prev, &hk),
        });
    }
    match inter {
        Some(m) => m.cols == 0,
        None => false,
    }
}

/// Degree-2 affinization criterion: for all basis pairs of h the system
/// u0 = [x,y], u1 + N u0 = [Nx,y] + [x,Ny], N u1 = [Nx,Ny] must be
/// solvable with u0, u1 in h.
pub fn affinization_criterion(g: &LieAlgebra, p: &PartialOp) -> bool {
    let h = p.dim_h();
    for a in 0..h {
        for b in a + 1..h {
            let x = unit(h, a);
            let y = unit(h, b);
            let (ix, iy) = (p.embed(&x), p.embed(&y));
            let (nx, ny) = (p.apply(&x), p.apply(&y));
            let u0 = match p.coords_in_h(&g.bracket(&ix, &iy)) {
                Some(u) => u,
                None => return false,
            };
            let rhs1 = sub(&add(&g.bracket(&nx, &iy), &g.bracket(&ix, &ny)), &p.apply(&u0));
            let u1 = match p.coords_in_h(&rhs1) {
                Some(u) => u,
                None => return false,
            };
            if p.apply(&u1) != g.bracket(&nx, &ny) {
                return false;
            }
        }
    }
    true
}

/// Heisenberg bracket on R^3: [e1,e2] = e3.
pub fn heisenberg3() -> LieAlgebra {
    LieAlgebra::new(3, &[(0, 1, 2, Rat::from_integer(1.into()))]).unwrap()
}
