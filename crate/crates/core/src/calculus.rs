//! Symbolic differential calculus on a coordinate chart: vector fields,
//! forms up to degree 3, Lie brackets, exterior derivatives, dual frames
//! and Frobenius integrability verdicts.

use crate::error::KwError;
use crate::expr::{parse_expr, zero_test, Expr, SamplePolicy, ZeroVerdict};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Ordered coordinate variables of a local chart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chart {
    pub vars: Vec<String>,
}

impl Chart {
    pub fn new(vars: &[&str]) -> Chart {
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let mut seen = std::collections::BTreeSet::new();
        assert!(
            vars.iter().all(|v| seen.insert(v.clone())),
            "chart variables must be unique"
        );
        Chart { vars }
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn parse(&self, src: &str) -> Result<Expr, KwError> {
        parse_expr(src, &self.vars)
    }

    fn check_same(&self, other: &Chart) -> Result<(), KwError> {
        if self != other {
            return Err(KwError::ChartMismatch(
                self.vars.join(","),
                other.vars.join(","),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct VectorField {
    pub chart: Chart,
    pub components: Vec<Expr>,
}

impl VectorField {
    pub fn new(chart: Chart, components: Vec<Expr>) -> Self {
        assert_eq!(chart.dim(), components.len());
        VectorField { chart, components }
    }

    pub fn from_strs(chart: &Chart, comps: &[&str]) -> Result<Self, KwError> {
        Ok(VectorField::new(
            chart.clone(),
            comps.iter().map(|s| chart.parse(s)).collect::<Result<_, _>>()?,
        ))
    }

    /// Coordinate field d/dx_i.
    pub fn coordinate(chart: &Chart, i: usize) -> Self {
        let comps = (0..chart.dim())
            .map(|j| if i == j { Expr::one() } else { Expr::zero() })
            .collect();
        VectorField::new(chart.clone(), comps)
    }

    /// Directional derivative X(f).
    pub fn apply_to(&self, f: &Expr) -> Expr {
        Expr::add(
            self.components
                .iter()
                .zip(&self.chart.vars)
                .map(|(c, v)| Expr::mul2(c.clone(), f.diff(v)))
                .collect(),
        )
    }

    pub fn scale(&self, s: &Expr) -> Self {
        VectorField::new(
            self.chart.clone(),
            self.components
                .iter()
                .map(|c| Expr::mul2(s.clone(), c.clone()))
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        VectorField::new(
            self.chart.clone(),
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| Expr::add2(a.clone(), b.clone()))
                .collect(),
        )
    }

    pub fn is_zero_syntactic(&self) -> bool {
        self.components.iter().all(|c| c.is_zero_literal())
    }
}

#[derive(Debug, Clone)]
pub struct OneForm {
    pub chart: Chart,
    pub components: Vec<Expr>,
}

impl OneForm {
    pub fn new(chart: Chart, components: Vec<Expr>) -> Self {
        assert_eq!(chart.dim(), components.len());
        OneForm { chart, components }
    }

    pub fn from_strs(chart: &Chart, comps: &[&str]) -> Result<Self, KwError> {
        Ok(OneForm::new(
            chart.clone(),
            comps.iter().map(|s| chart.parse(s)).collect::<Result<_, _>>()?,
        ))
    }

    /// dx_i.
    pub fn coordinate(chart: &Chart, i: usize) -> Self {
        let comps = (0..chart.dim())
            .map(|j| if i == j { Expr::one() } else { Expr::zero() })
            .collect();
        OneForm::new(chart.clone(), comps)
    }

    /// Pairing <omega, X>.
    pub fn pair(&self, x: &VectorField) -> Result<Expr, KwError> {
        self.chart.check_same(&x.chart)?;
        Ok(Expr::add(
            self.components
                .iter()
                .zip(&x.components)
                .map(|(a, b)| Expr::mul2(a.clone(), b.clone()))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Self {
        OneForm::new(
            self.chart.clone(),
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| Expr::add2(a.clone(), b.clone()))
                .collect(),
        )
    }

    pub fn scale(&self, s: &Expr) -> Self {
        OneForm::new(
            self.chart.clone(),
            self.components
                .iter()
                .map(|c| Expr::mul2(s.clone(), c.clone()))
                .collect(),
        )
    }
}

/// Antisymmetric 2-form; coefficients stored for i < j in lexicographic
/// order of (i, j).
#[derive(Debug, Clone)]
pub struct TwoForm {
    pub chart: Chart,
    coeffs: Vec<Expr>,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    // pairs (0,1),(0,2),...,(0,n-1),(1,2),...
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

fn triple_index(n: usize, i: usize, j: usize, k: usize) -> usize {
    debug_assert!(i < j && j < k && k < n);
    let mut idx = 0;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                if (a, b, c) == (i, j, k) {
                    return idx;
                }
                idx += 1;
            }
        }
    }
    unreachable!()
}

impl TwoForm {
    pub fn zero(chart: Chart) -> Self {
        let n = chart.dim();
        TwoForm {
            chart,
            coeffs: vec![Expr::zero(); n * (n - 1) / 2],
        }
    }

    /// Coefficient of dx_i ^ dx_j for any i != j (sign handled).
    pub fn coeff(&self, i: usize, j: usize) -> Expr {
        let n = self.chart.dim();
        if i < j {
            self.coeffs[pair_index(n, i, j)].clone()
        } else {
            Expr::neg(self.coeffs[pair_index(n, j, i)].clone())
        }
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, e: Expr) {
        let n = self.chart.dim();
        if i < j {
            self.coeffs[pair_index(n, i, j)] = e;
        } else {
            self.coeffs[pair_index(n, j, i)] = Expr::neg(e);
        }
    }

    pub fn coeffs(&self) -> &[Expr] {
        &self.coeffs
    }

    /// omega(X, Y).
    pub fn eval_on(&self, x: &VectorField, y: &VectorField) -> Result<Expr, KwError> {
        self.chart.check_same(&x.chart)?;
        self.chart.check_same(&y.chart)?;
        let n = self.chart.dim();
        let mut terms = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let c = self.coeffs[pair_index(n, i, j)].clone();
                let det = Expr::sub(
                    Expr::mul2(x.components[i].clone(), y.components[j].clone()),
                    Expr::mul2(x.components[j].clone(), y.components[i].clone()),
                );
                terms.push(Expr::mul2(c, det));
            }
        }
        Ok(Expr::add(terms))
    }
}

/// Antisymmetric 3-form; coefficients stored for i < j < k.
#[derive(Debug, Clone)]
pub struct ThreeForm {
    pub chart: Chart,
    coeffs: Vec<Expr>,
}

impl ThreeForm {
    pub fn zero(chart: Chart) -> Self {
        let n = chart.dim();
        let count = if n >= 3 { n * (n - 1) * (n - 2) / 6 } else { 0 };
        ThreeForm {
            chart,
            coeffs: vec![Expr::zero(); count],
        }
    }

    pub fn coeff(&self, i: usize, j: usize, k: usize) -> Expr {
        self.coeffs[triple_index(self.chart.dim(), i, j, k)].clone()
    }

    pub fn coeffs(&self) -> &[Expr] {
        &self.coeffs
    }
}

/// (1,1)-tensor: matrix action on the coordinate frame, N(d/dx_j) has
/// i-component entries[i][j].
#[derive(Debug, Clone)]
pub struct OneOneTensor {
    pub chart: Chart,
    pub entries: Vec<Vec<Expr>>,
}

impl OneOneTensor {
    pub fn new(chart: Chart, entries: Vec<Vec<Expr>>) -> Self {
        let n = chart.dim();
        assert_eq!(entries.len(), n);
        assert!(entries.iter().all(|r| r.len() == n));
        OneOneTensor { chart, entries }
    }

    pub fn from_strs(chart: &Chart, rows: &[&[&str]]) -> Result<Self, KwError> {
        let entries = rows
            .iter()
            .map(|r| r.iter().map(|s| chart.parse(s)).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?;
        Ok(OneOneTensor::new(chart.clone(), entries))
    }

    pub fn identity(chart: &Chart) -> Self {
        let n = chart.dim();
        OneOneTensor::new(
            chart.clone(),
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| if i == j { Expr::one() } else { Expr::zero() })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn apply(&self, x: &VectorField) -> Result<VectorField, KwError> {
        self.chart.check_same(&x.chart)?;
        let n = self.chart.dim();
        let comps = (0..n)
            .map(|i| {
                Expr::add(
                    (0..n)
                        .map(|j| Expr::mul2(self.entries[i][j].clone(), x.components[j].clone()))
                        .collect(),
                )
            })
            .collect();
        Ok(VectorField::new(self.chart.clone(), comps))
    }
}

/// [X, Y]: components X(Y_i) - Y(X_i).
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField, KwError> {
    x.chart.check_same(&y.chart)?;
    let comps = (0..x.chart.dim())
        .map(|i| Expr::sub(x.apply_to(&y.components[i]), y.apply_to(&x.components[i])))
        .collect();
    Ok(VectorField::new(x.chart.clone(), comps))
}

/// df of a scalar function.
pub fn differential(chart: &Chart, f: &Expr) -> OneForm {
    OneForm::new(
        chart.clone(),
        chart.vars.iter().map(|v| f.diff(v)).collect(),
    )
}

/// d of a 1-form: coefficients d_i w_j - d_j w_i.
pub fn exterior_derivative(w: &OneForm) -> TwoForm {
    let n = w.chart.dim();
    let mut out = TwoForm::zero(w.chart.clone());
    for i in 0..n {
        for j in i + 1..n {
            let c = Expr::sub(
                w.components[j].diff(&w.chart.vars[i]),
                w.components[i].diff(&w.chart.vars[j]),
            );
            out.set_coeff(i, j, c);
        }
    }
    out
}

/// d of a 2-form: coefficients d_i w_jk - d_j w_ik + d_k w_ij.
pub fn exterior_derivative_two(w: &TwoForm) -> ThreeForm {
    let n = w.chart.dim();
    let mut coeffs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                coeffs.push(Expr::add(vec![
                    w.coeff(j, k).diff(&w.chart.vars[i]),
                    Expr::neg(w.coeff(i, k).diff(&w.chart.vars[j])),
                    w.coeff(i, j).diff(&w.chart.vars[k]),
                ]));
            }
        }
    }
    ThreeForm {
        chart: w.chart.clone(),
        coeffs,
    }
}

/// a ^ b of two 1-forms.
pub fn wedge(a: &OneForm, b: &OneForm) -> Result<TwoForm, KwError> {
    a.chart.check_same(&b.chart)?;
    let n = a.chart.dim();
    let mut out = TwoForm::zero(a.chart.clone());
    for i in 0..n {
        for j in i + 1..n {
            out.set_coeff(
                i,
                j,
                Expr::sub(
                    Expr::mul2(a.components[i].clone(), b.components[j].clone()),
                    Expr::mul2(a.components[j].clone(), b.components[i].clone()),
                ),
            );
        }
    }
    Ok(out)
}

/// w ^ a of a 2-form and a 1-form.
pub fn wedge_two_one(w: &TwoForm, a: &OneForm) -> Result<ThreeForm, KwError> {
    w.chart.check_same(&a.chart)?;
    let n = w.chart.dim();
    if n < 3 {
        return Err(KwError::Invalid(
            "3-forms need at least 3 coordinates".to_string(),
        ));
    }
    let mut coeffs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                coeffs.push(Expr::add(vec![
                    Expr::mul2(w.coeff(i, j), a.components[k].clone()),
                    Expr::neg(Expr::mul2(w.coeff(i, k), a.components[j].clone())),
                    Expr::mul2(w.coeff(j, k), a.components[i].clone()),
                ]));
            }
        }
    }
    Ok(ThreeForm {
        chart: w.chart.clone(),
        coeffs,
    })
}

/// Symbolic determinant of a square matrix of expressions by cofactor
/// expansion (desk-scale n).
pub fn sym_det(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    if n == 0 {
        return Expr::one();
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut terms = Vec::new();
    for j in 0..n {
        if m[0][j].is_zero_literal() {
            continue;
        }
        let minor: Vec<Vec<Expr>> = (1..n)
            .map(|i| {
                (0..n)
                    .filter(|&c| c != j)
                    .map(|c| m[i][c].clone())
                    .collect()
            })
            .collect();
        let term = Expr::mul2(m[0][j].clone(), sym_det(&minor));
        terms.push(if j % 2 == 0 { term } else { Expr::neg(term) });
    }
    Expr::add(terms)
}

/// Frame dual to a coframe: <alpha_i, X_j> = delta_ij, via the adjugate
/// over the symbolic determinant.
pub fn dual_frame(coframe: &[OneForm], policy: &SamplePolicy) -> Result<Vec<VectorField>, KwError> {
    let chart = &coframe[0].chart;
    let n = chart.dim();
    if coframe.len() != n {
        return Err(KwError::DimensionMismatch(
            "coframe must have chart-dimension many forms".to_string(),
        ));
    }
    for c in coframe {
        chart.check_same(&c.chart)?;
    }
    // a[i][j]: coefficient of dx_j in alpha_i
    let a: Vec<Vec<Expr>> = coframe.iter().map(|f| f.components.clone()).collect();
    let det = sym_det(&a);
    match zero_test(&det, policy)? {
        ZeroVerdict::NonZero { .. } => {}
        _ => {
            return Err(KwError::Singular(
                "coframe determinant vanishes".to_string(),
            ))
        }
    }
    // X_j = sum_k inv[k][j] d/dx_k with inv = adj(a)/det
    let mut fields = Vec::new();
    for j in 0..n {
        let comps = (0..n)
            .map(|k| {
                // cofactor C_{j k}: delete row j, column k of a
                let minor: Vec<Vec<Expr>> = (0..n)
                    .filter(|&r| r != j)
                    .map(|r| {
                        (0..n)
                            .filter(|&c| c != k)
                            .map(|c| a[r][c].clone())
                            .collect()
                    })
                    .collect();
                let cof = sym_det(&minor);
                let signed = if (j + k) % 2 == 0 { cof } else { Expr::neg(cof) };
                Expr::quot(signed, det.clone())
            })
            .collect();
        fields.push(VectorField::new(chart.clone(), comps));
    }
    Ok(fields)
}

pub(crate) fn f64_rank(mut rows: Vec<Vec<f64>>, tol: f64) -> usize {
    let m = rows.len();
    if m == 0 {
        return 0;
    }
    let n = rows[0].len();
    let scale = rows
        .iter()
        .flat_map(|r| r.iter().map(|x| x.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0);
    let mut rank = 0;
    let mut row = 0;
    for col in 0..n {
        let (best, bestv) = (row..m)
            .map(|i| (i, rows[i][col].abs()))
            .fold((row, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if bestv <= tol * scale {
            continue;
        }
        rows.swap(row, best);
        for i in row + 1..m {
            let f = rows[i][col] / rows[row][col];
            for k in col..n {
                rows[i][k] -= f * rows[row][k];
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

/// Frobenius test for the span of `fields`: probabilistic bracket-rank
/// check at sampled points, strengthened to an exact wedge test
/// (d omega ^ omega with omega the annihilator) when the distribution has
/// corank 1.
pub fn distribution_integrability(
    fields: &[VectorField],
    policy: &SamplePolicy,
) -> Result<ZeroVerdict, KwError> {
    let chart = &fields[0].chart;
    for f in fields {
        chart.check_same(&f.chart)?;
    }
    let n = chart.dim();
    let r = fields.len();
    let mut brackets = Vec::new();
    for a in 0..r {
        for b in a + 1..r {
            brackets.push(lie_bracket(&fields[a], &fields[b])?);
        }
    }
    // probabilistic rank check at sampled points
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut good = 0usize;
    let mut independent_somewhere = false;
    let mut attempts = 0usize;
    'outer: while good < policy.samples && attempts < policy.samples * 50 {
        attempts += 1;
        let point: BTreeMap<String, f64> = chart
            .vars
            .iter()
            .map(|v| (v.clone(), rng.gen_range(-policy.box_bound..policy.box_bound)))
            .collect();
        let eval_rows = |vs: &[VectorField]| -> Result<Vec<Vec<f64>>, KwError> {
            vs.iter()
                .map(|f| f.components.iter().map(|c| c.eval_f64(&point)).collect())
                .collect()
        };
        let base = match eval_rows(fields) {
            Ok(b) => b,
            Err(_) => continue, // singular point, resample
        };
        let base_rank = f64_rank(base.clone(), 1e-9);
        if base_rank < r {
            continue; // fields dependent here; precondition point skipped
        }
        independent_somewhere = true;
        for z in &brackets {
            let mut aug = base.clone();
            match z.components.iter().map(|c| c.eval_f64(&point)).collect() {
                Ok(row) => aug.push(row),
                Err(_) => continue 'outer,
            }
            if f64_rank(aug, 1e-9) > base_rank {
                let witness = point
                    .iter()
                    .map(|(k, v)| (k.clone(), format!("{}", v)))
                    .collect();
                return Ok(ZeroVerdict::NonZero {
                    witness,
                    value: 1.0,
                });
            }
        }
        good += 1;
    }
    if !independent_somewhere {
        return Err(KwError::Invalid(
            "fields are linearly dependent at all sampled points".to_string(),
        ));
    }
    if good < policy.samples {
        return Err(KwError::Inconclusive(attempts));
    }
    // corank-1 refinement: exact wedge criterion
    if r == n - 1 {
        let w = annihilator_corank1(fields)?;
        let dw = exterior_derivative(&w);
        let top = wedge_two_one(&dw, &w)?;
        let verdicts = top
            .coeffs()
            .iter()
            .map(|c| zero_test(c, policy))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(ZeroVerdict::combine(verdicts));
    }
    Ok(ZeroVerdict::ProbablyZero {
        samples: good,
        tol: policy.tol,
    })
}

/// Annihilating 1-form of n-1 generically independent fields, via signed
/// maximal minors of the component matrix.
pub fn annihilator_corank1(fields: &[VectorField]) -> Result<OneForm, KwError> {
    let chart = &fields[0].chart;
    let n = chart.dim();
    if fields.len() != n - 1 {
        return Err(KwError::DimensionMismatch(
            "annihilator needs exactly n-1 fields".to_string(),
        ));
    }
    let comps = (0..n)
        .map(|j| {
            let minor: Vec<Vec<Expr>> = fields
                .iter()
                .map(|f| {
                    (0..n)
                        .filter(|&c| c != j)
                        .map(|c| f.components[c].clone())
                        .collect()
                })
                .collect();
            let m = sym_det(&minor);
            if j % 2 == 0 {
                m
            } else {
                Expr::neg(m)
            }
        })
        .collect();
    Ok(OneForm::new(chart.clone(), comps))
}
