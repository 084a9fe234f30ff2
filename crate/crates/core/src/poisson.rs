//! Lie algebroid data, linear Poisson structures on the dual bundle,
//! Jacobi and compatibility checks, the up construction turning a partial
//! Nijenhuis operator into a bihamiltonian pair, the cotangent lift of a
//! full Nijenhuis tensor, and pointwise classification of bivector pairs.

use crate::calculus::{
    differential, exterior_derivative, lie_bracket, Chart, OneForm, OneOneTensor, VectorField,
};
use crate::error::KwError;
use crate::expr::{simplify, zero_test, Expr, SamplePolicy, ZeroVerdict};
use crate::linalg::Mat;
use crate::nijenhuis::{is_geometric_pno, is_nijenhuis, span_coords, GeometricPNO};
use crate::pencil::{BlockStructure, Pencil};
use crate::rat::{GRat, Rat};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Local data of a Lie algebroid over a coordinate chart: a rank-r bundle
/// with anchor rho(e_k) = sum_j b[k][j] d/dx_j and brackets
/// [e_k, e_l] = sum_m c[k][l][m] e_m. Antisymmetry of the structure
/// functions in the lower indices is enforced at construction.
#[derive(Debug, Clone)]
pub struct AlgebroidData {
    pub chart: Chart,
    pub rank: usize,
    /// r x n anchor coefficients b_{kj}.
    pub anchor: Vec<Vec<Expr>>,
    /// r x r x r structure functions c[k][l][m].
    pub structure: Vec<Vec<Vec<Expr>>>,
}

impl AlgebroidData {
    pub fn new(
        chart: Chart,
        anchor: Vec<Vec<Expr>>,
        structure: Vec<Vec<Vec<Expr>>>,
    ) -> Result<Self, KwError> {
        let n = chart.dim();
        let r = anchor.len();
        if anchor.iter().any(|row| row.len() != n) {
            return Err(KwError::DimensionMismatch(format!(
                "anchor must be {} x {}",
                r, n
            )));
        }
        if structure.len() != r
            || structure
                .iter()
                .any(|s| s.len() != r || s.iter().any(|row| row.len() != r))
        {
            return Err(KwError::DimensionMismatch(format!(
                "structure functions must be {0} x {0} x {0}",
                r
            )));
        }
        for k in 0..r {
            for l in k..r {
                for m in 0..r {
                    let s = simplify(&Expr::add2(
                        structure[k][l][m].clone(),
                        structure[l][k][m].clone(),
                    ));
                    if !s.is_zero_literal() {
                        return Err(KwError::Invalid(format!(
                            "structure functions not antisymmetric at ({}, {}, {})",
                            k, l, m
                        )));
                    }
                }
            }
        }
        Ok(AlgebroidData {
            chart,
            rank: r,
            anchor,
            structure,
        })
    }

    /// Rank-n algebroid TM with identity anchor and zero bracket
    /// coefficients in the coordinate frame.
    pub fn tangent(chart: &Chart) -> Self {
        let n = chart.dim();
        let anchor = (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| if k == j { Expr::one() } else { Expr::zero() })
                    .collect()
            })
            .collect();
        AlgebroidData {
            chart: chart.clone(),
            rank: n,
            anchor,
            structure: vec![vec![vec![Expr::zero(); n]; n]; n],
        }
    }
}

/// Poisson bivector on a chart, components pi^{ij} stored for i < j.
#[derive(Debug, Clone)]
pub struct PoissonBivector {
    pub chart: Chart,
    comps: Vec<Expr>,
}

impl PoissonBivector {
    pub fn zero(chart: Chart) -> Self {
        let n = chart.dim();
        PoissonBivector {
            chart,
            comps: vec![Expr::zero(); n * (n - 1) / 2],
        }
    }

    /// pi^{ij} for any i != j (sign handled); zero on the diagonal.
    pub fn comp(&self, i: usize, j: usize) -> Expr {
        let n = self.chart.dim();
        if i == j {
            Expr::zero()
        } else if i < j {
            self.comps[pair_index(n, i, j)].clone()
        } else {
            Expr::neg(self.comps[pair_index(n, j, i)].clone())
        }
    }

    pub fn set_comp(&mut self, i: usize, j: usize, e: Expr) {
        let n = self.chart.dim();
        if i < j {
            self.comps[pair_index(n, i, j)] = e;
        } else {
            self.comps[pair_index(n, j, i)] = Expr::neg(e);
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, KwError> {
        if self.chart != other.chart {
            return Err(KwError::ChartMismatch(
                self.chart.vars.join(","),
                other.chart.vars.join(","),
            ));
        }
        Ok(PoissonBivector {
            chart: self.chart.clone(),
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| Expr::add2(a.clone(), b.clone()))
                .collect(),
        })
    }

    /// The bivector as a skew matrix of exact values at a point.
    pub fn skew_at(&self, point: &BTreeMap<String, Rat>) -> Result<Mat<GRat>, KwError> {
        let n = self.chart.dim();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = GRat::from_rat(self.comps[pair_index(n, i, j)].eval_exact(point)?);
                m[(i, j)] = v.clone();
                m[(j, i)] = -v;
            }
        }
        Ok(m)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let n = self.chart.dim();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let e = &self.comps[pair_index(n, i, j)];
                if !e.is_zero_literal() {
                    entries.push(serde_json::json!({
                        "i": i + 1,
                        "j": j + 1,
                        "expr": e.to_string(),
                    }));
                }
            }
        }
        serde_json::json!({ "chart": self.chart.vars, "components": entries })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, KwError> {
        let bad = |m: &str| KwError::Invalid(format!("bivector json: {}", m));
        let vars: Vec<&str> = v["chart"]
            .as_array()
            .ok_or_else(|| bad("missing chart"))?
            .iter()
            .map(|s| s.as_str().ok_or_else(|| bad("chart entries must be strings")))
            .collect::<Result<_, _>>()?;
        let chart = Chart::new(&vars);
        let n = chart.dim();
        let mut out = PoissonBivector::zero(chart.clone());
        for entry in v["components"]
            .as_array()
            .ok_or_else(|| bad("missing components"))?
        {
            let idx = |key: &str| -> Result<usize, KwError> {
                let raw = entry[key]
                    .as_u64()
                    .ok_or_else(|| bad("indices must be positive integers"))?
                    as usize;
                if raw == 0 || raw > n {
                    return Err(bad("index out of range"));
                }
                Ok(raw - 1)
            };
            let (i, j) = (idx("i")?, idx("j")?);
            if i == j {
                return Err(bad("diagonal component"));
            }
            let e = chart.parse(entry["expr"].as_str().ok_or_else(|| bad("missing expr"))?)?;
            out.set_comp(i, j, e);
        }
        Ok(out)
    }
}

/// Fiber coordinate names xi1..xir, mangled until they avoid the base chart.
fn fiber_var_names(base: &Chart, r: usize) -> Vec<String> {
    let mut prefix = "xi".to_string();
    loop {
        let names: Vec<String> = (1..=r).map(|k| format!("{}{}", prefix, k)).collect();
        if names.iter().all(|n| !base.vars.contains(n)) {
            return names;
        }
        prefix.insert(0, '_');
    }
}

/// Linear Poisson structure on the dual bundle: chart (x, xi1..xir) with
/// {x_i, x_j} = 0, {xi_k, xi_l} = -c^m_{kl} xi_m, {xi_k, x_j} = -b_{kj}.
///
/// The two minus signs belong together: with {xi_k, x_j} = -b_{kj} the
/// bracket {xi_k, f} of a base function is -rho(e_k)f, and the Jacobi
/// identity on (xi_k, xi_l, x_j) then reads
/// [rho(e_k), rho(e_l)] = rho([e_k, e_l]) only if the fiber-fiber bracket
/// also carries the opposite sign. Equivalently, this is the pushforward
/// convention in which T*M carries {x_i, p_j} = +delta_ij.
pub fn linear_poisson(a: &AlgebroidData) -> PoissonBivector {
    let n = a.chart.dim();
    let r = a.rank;
    let fiber = fiber_var_names(&a.chart, r);
    let vars: Vec<&str> = a
        .chart
        .vars
        .iter()
        .map(|s| s.as_str())
        .chain(fiber.iter().map(|s| s.as_str()))
        .collect();
    let chart = Chart::new(&vars);
    let mut out = PoissonBivector::zero(chart);
    for k in 0..r {
        for j in 0..n {
            // {x_j, xi_k} = b_{kj}
            out.set_comp(j, n + k, simplify(&a.anchor[k][j]));
        }
        for l in k + 1..r {
            let e = Expr::neg(Expr::add(
                (0..r)
                    .map(|m| Expr::mul2(a.structure[k][l][m].clone(), Expr::var(&fiber[m])))
                    .collect(),
            ));
            out.set_comp(n + k, n + l, simplify(&e));
        }
    }
    out
}

/// Jacobiator components sum_l pi^{il} d_l pi^{jk} + cyclic, one expression
/// per triple i < j < k (simplified).
fn jacobiator(p: &PoissonBivector) -> Vec<Expr> {
    let n = p.chart.dim();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let mut terms = Vec::new();
                for &(a, b, c) in &[(i, j, k), (j, k, i), (k, i, j)] {
                    for l in 0..n {
                        terms.push(Expr::mul2(
                            p.comp(a, l),
                            p.comp(b, c).diff(&p.chart.vars[l]),
                        ));
                    }
                }
                out.push(simplify(&Expr::add(terms)));
            }
        }
    }
    out
}

/// Zero verdict on the Jacobiator of the bivector.
pub fn check_jacobi(p: &PoissonBivector, policy: &SamplePolicy) -> Result<ZeroVerdict, KwError> {
    let verdicts = jacobiator(p)
        .iter()
        .map(|e| zero_test(e, policy))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ZeroVerdict::combine(verdicts))
}

/// Mixed Jacobiator of the pair: Jacobiator(p1 + p2) minus the two pure
/// Jacobiators. Zero iff every p1 + lambda p2 is Poisson (given both are).
pub fn check_compatibility(
    p1: &PoissonBivector,
    p2: &PoissonBivector,
    policy: &SamplePolicy,
) -> Result<ZeroVerdict, KwError> {
    let sum = p1.add(p2)?;
    let (js, j1, j2) = (jacobiator(&sum), jacobiator(p1), jacobiator(p2));
    let verdicts = js
        .into_iter()
        .zip(j1)
        .zip(j2)
        .map(|((s, a), b)| {
            let mixed = simplify(&Expr::sub(s, Expr::add2(a, b)));
            zero_test(&mixed, policy)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ZeroVerdict::combine(verdicts))
}

/// Expand each pairwise bracket of `spanning` produced by `bracket` in the
/// spanning set, giving antisymmetric structure functions.
fn structure_in_span(
    spanning: &[VectorField],
    bracket: impl Fn(usize, usize) -> Result<VectorField, KwError>,
    policy: &SamplePolicy,
) -> Result<Vec<Vec<Vec<Expr>>>, KwError> {
    let r = spanning.len();
    let mut c = vec![vec![vec![Expr::zero(); r]; r]; r];
    for k in 0..r {
        for l in k + 1..r {
            let b = bracket(k, l)?;
            let coords = span_coords(spanning, &b, policy)?.ok_or_else(|| {
                KwError::Invalid(format!(
                    "bracket of fields {} and {} does not lie in the spanning set",
                    k, l
                ))
            })?;
            for (m, e) in coords.into_iter().enumerate() {
                let e = simplify(&e);
                c[k][l][m] = e.clone();
                c[l][k][m] = Expr::neg(e);
            }
        }
    }
    Ok(c)
}

/// The two algebroid structures carried by a PNO (T F, N): the canonical
/// one (inclusion anchor, commutator bracket) and the deformed one
/// ([,]_N, anchor N). Returned as (canonical, deformed).
fn pno_algebroids(
    p: &GeometricPNO,
    policy: &SamplePolicy,
) -> Result<(AlgebroidData, AlgebroidData), KwError> {
    let r = p.rank();
    let apply_n = |v: &VectorField| -> Result<VectorField, KwError> {
        let coords = span_coords(&p.spanning, v, policy)?.ok_or_else(|| {
            KwError::Invalid("field to push through N is not in the spanning set".to_string())
        })?;
        let mut out = VectorField::new(p.chart.clone(), vec![Expr::zero(); p.chart.dim()]);
        for (c, im) in coords.iter().zip(&p.images) {
            out = out.add(&im.scale(c));
        }
        Ok(out)
    };
    let comp_rows = |fs: &[VectorField]| -> Vec<Vec<Expr>> {
        fs.iter()
            .map(|f| f.components.iter().map(|e| simplify(e)).collect())
            .collect()
    };
    let c1 = structure_in_span(
        &p.spanning,
        |k, l| lie_bracket(&p.spanning[k], &p.spanning[l]),
        policy,
    )?;
    let c2 = structure_in_span(
        &p.spanning,
        |k, l| {
            // [Z_k, Z_l]_N = [NZ_k, Z_l] + [Z_k, NZ_l] - N[Z_k, Z_l]
            let a = lie_bracket(&p.images[k], &p.spanning[l])?;
            let b = lie_bracket(&p.spanning[k], &p.images[l])?;
            let nz = apply_n(&lie_bracket(&p.spanning[k], &p.spanning[l])?)?;
            Ok(a.add(&b).add(&nz.scale(&Expr::int(-1))))
        },
        policy,
    )?;
    let a1 = AlgebroidData {
        chart: p.chart.clone(),
        rank: r,
        anchor: comp_rows(&p.spanning),
        structure: c1,
    };
    let a2 = AlgebroidData {
        chart: p.chart.clone(),
        rank: r,
        anchor: comp_rows(&p.images),
        structure: c2,
    };
    Ok((a1, a2))
}

/// Up construction: the pair of linear Poisson structures on the dual of
/// T F induced by the canonical and the deformed algebroid of a PNO.
pub fn up_construction(
    p: &GeometricPNO,
    policy: &SamplePolicy,
) -> Result<(PoissonBivector, PoissonBivector), KwError> {
    let (ok, witness) = is_geometric_pno(p, policy)?;
    if !ok {
        return Err(KwError::Invalid(format!(
            "not a partial Nijenhuis operator: axiom fails on spanning pair {:?}",
            witness
        )));
    }
    let (a1, a2) = pno_algebroids(p, policy)?;
    Ok((linear_poisson(&a1), linear_poisson(&a2)))
}

/// Cotangent lift of a full Nijenhuis tensor: the canonical bivector on
/// T*M paired with the linear Poisson structure of (TM, [,]_N, N).
pub fn cotangent_lift(
    n: &OneOneTensor,
    policy: &SamplePolicy,
) -> Result<(PoissonBivector, PoissonBivector), KwError> {
    if !is_nijenhuis(n, policy)?.is_zero() {
        return Err(KwError::Invalid(
            "tensor has nonzero Nijenhuis torsion".to_string(),
        ));
    }
    let chart = &n.chart;
    let dim = chart.dim();
    let frame: Vec<VectorField> = (0..dim).map(|k| VectorField::coordinate(chart, k)).collect();
    let images = frame
        .iter()
        .map(|e| n.apply(e))
        .collect::<Result<Vec<_>, _>>()?;
    // Coordinate brackets vanish, so [e_k, e_l]_N = [Ne_k, e_l] + [e_k, Ne_l]
    // and its coordinate components are the structure functions directly.
    let mut c = vec![vec![vec![Expr::zero(); dim]; dim]; dim];
    for k in 0..dim {
        for l in k + 1..dim {
            let b = lie_bracket(&images[k], &frame[l])?.add(&lie_bracket(&frame[k], &images[l])?);
            for (m, e) in b.components.iter().enumerate() {
                let e = simplify(e);
                c[k][l][m] = e.clone();
                c[l][k][m] = Expr::neg(e);
            }
        }
    }
    let a2 = AlgebroidData {
        chart: chart.clone(),
        rank: dim,
        anchor: images
            .iter()
            .map(|f| f.components.iter().map(|e| simplify(e)).collect())
            .collect(),
        structure: c,
    };
    Ok((
        linear_poisson(&AlgebroidData::tangent(chart)),
        linear_poisson(&a2),
    ))
}

/// Jordan-Kronecker structure of the pair of skew matrices obtained by
/// evaluating both bivectors at an exact point.
pub fn pointwise_classification(
    p1: &PoissonBivector,
    p2: &PoissonBivector,
    point: &BTreeMap<String, Rat>,
) -> Result<BlockStructure, KwError> {
    if p1.chart != p2.chart {
        return Err(KwError::ChartMismatch(
            p1.chart.vars.join(","),
            p2.chart.vars.join(","),
        ));
    }
    let pencil = Pencil::new(p1.skew_at(point)?, p2.skew_at(point)?)?;
    Ok(pencil.block_structure())
}

/// Tangent space of the bilagrangian foliation at a point: the
/// intersection of the images of la1 p1 + la2 p2 over dim+1 random
/// parameters of generic (non-exceptional) rank. Columns form a basis.
pub fn bilagrangian_at(
    p1: &PoissonBivector,
    p2: &PoissonBivector,
    point: &BTreeMap<String, Rat>,
    seed: u64,
) -> Result<Mat<GRat>, KwError> {
    if p1.chart != p2.chart {
        return Err(KwError::ChartMismatch(
            p1.chart.vars.join(","),
            p2.chart.vars.join(","),
        ));
    }
    let (m1, m2) = (p1.skew_at(point)?, p2.skew_at(point)?);
    let dim = p1.chart.dim();
    let needed = dim + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Oversample, keep only parameters achieving the maximum observed rank.
    let candidates: Vec<Mat<GRat>> = (0..3 * needed + 6)
        .map(|_| {
            let (la1, la2) = loop {
                let pair = (rng.gen_range(-30i64..=30), rng.gen_range(-30i64..=30));
                if pair != (0, 0) {
                    break pair;
                }
            };
            m1.scale(&GRat::from_i64(la1))
                .add(&m2.scale(&GRat::from_i64(la2)))
        })
        .collect();
    let generic = candidates.iter().map(Mat::rank).max().unwrap();
    let mut images = candidates
        .into_iter()
        .filter(|m| m.rank() == generic)
        .take(needed);
    let mut inter = images
        .next()
        .ok_or_else(|| KwError::Inconclusive(3 * needed + 6))?
        .column_basis();
    for m in images {
        inter = Mat::colspace_intersection(&inter, &m);
    }
    Ok(inter.column_basis())
}

/// Lie derivative of a one-form along a vector field (Cartan formula).
fn lie_derivative_oneform(x: &VectorField, w: &OneForm) -> Result<OneForm, KwError> {
    let pairing = w.pair(x)?;
    let dw = exterior_derivative(w);
    let n = x.chart.dim();
    let contraction = OneForm::new(
        x.chart.clone(),
        (0..n)
            .map(|j| {
                Expr::add(
                    (0..n)
                        .filter(|&i| i != j)
                        .map(|i| Expr::mul2(dw.coeff(i, j), x.components[i].clone()))
                        .collect(),
                )
            })
            .collect(),
    );
    Ok(differential(&x.chart, &pairing).add(&contraction))
}

/// Cotangent algebroid of a Poisson bivector: anchor pi viewed as a map
/// T*M -> TM, bracket of one-forms
/// [a, b] = L_{pi a} b - L_{pi b} a - d<pi a, b> evaluated on the
/// coordinate forms dx_i. For base dimension at most 3 the Jacobi
/// identity of the induced linear Poisson structure is verified.
pub fn algebroid_from_poisson(
    p: &PoissonBivector,
    policy: &SamplePolicy,
) -> Result<AlgebroidData, KwError> {
    if !check_jacobi(p, policy)?.is_zero() {
        return Err(KwError::Invalid(
            "bivector does not satisfy the Jacobi identity".to_string(),
        ));
    }
    let chart = &p.chart;
    let n = chart.dim();
    // pi#(dx_i) has j-th component pi^{ij}
    let sharp: Vec<VectorField> = (0..n)
        .map(|i| VectorField::new(chart.clone(), (0..n).map(|j| p.comp(i, j)).collect()))
        .collect();
    let forms: Vec<OneForm> = (0..n).map(|i| OneForm::coordinate(chart, i)).collect();
    let mut c = vec![vec![vec![Expr::zero(); n]; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let la = lie_derivative_oneform(&sharp[i], &forms[j])?;
            let lb = lie_derivative_oneform(&sharp[j], &forms[i])?;
            let dpair = differential(chart, &p.comp(i, j));
            let bracket = la.add(&lb.scale(&Expr::int(-1))).add(&dpair.scale(&Expr::int(-1)));
            for (m, e) in bracket.components.iter().enumerate() {
                let e = simplify(e);
                c[i][j][m] = e.clone();
                c[j][i][m] = Expr::neg(e);
            }
        }
    }
    let out = AlgebroidData {
        chart: chart.clone(),
        rank: n,
        anchor: (0..n)
            .map(|i| (0..n).map(|j| simplify(&p.comp(i, j))).collect())
            .collect(),
        structure: c,
    };
    if n <= 3 && !check_jacobi(&linear_poisson(&out), policy)?.is_zero() {
        return Err(KwError::Invalid(
            "induced cotangent algebroid fails the Jacobi identity".to_string(),
        ));
    }
    Ok(out)
}
