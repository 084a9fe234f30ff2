//! Nijenhuis torsion of (1,1)-tensors, geometric partial Nijenhuis
//! operators (PNOs), Turiel's normal-form catalog in 3D, adapted frames
//! and the extension construction from self-propelled functions.

use crate::calculus::{
    distribution_integrability, f64_rank, lie_bracket, sym_det, Chart, OneOneTensor, VectorField,
};
use crate::error::KwError;
use crate::expr::{simplify, zero_test, Expr, SamplePolicy, ZeroVerdict};
use crate::rat::Rat;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// T_N(X,Y) = [NX,NY] - N([NX,Y] + [X,NY] - N[X,Y]).
pub fn tensor_torsion(
    n: &OneOneTensor,
    x: &VectorField,
    y: &VectorField,
) -> Result<VectorField, KwError> {
    let nx = n.apply(x)?;
    let ny = n.apply(y)?;
    let inner = lie_bracket(&nx, y)?
        .add(&lie_bracket(x, &ny)?)
        .add(&n.apply(&lie_bracket(x, y)?)?.scale(&Expr::int(-1)));
    let t = lie_bracket(&nx, &ny)?.add(&n.apply(&inner)?.scale(&Expr::int(-1)));
    Ok(t)
}

/// Torsion verdict over all coordinate-frame pairs.
pub fn is_nijenhuis(n: &OneOneTensor, policy: &SamplePolicy) -> Result<ZeroVerdict, KwError> {
    let dim = n.chart.dim();
    let mut verdicts = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            let t = tensor_torsion(
                n,
                &VectorField::coordinate(&n.chart, i),
                &VectorField::coordinate(&n.chart, j),
            )?;
            for c in &t.components {
                verdicts.push(zero_test(c, policy)?);
            }
        }
    }
    Ok(ZeroVerdict::combine(verdicts))
}

/// Central-difference torsion magnitude of a numerically-given tensor
/// field at a point: max |T^k_{ij}| over all index triples. Derivatives
/// use the five-point stencil (fourth-order), so the error floor is set
/// by the accuracy of the tensor evaluations, not by h^2 truncation.
pub fn numeric_torsion_max<F>(n: F, p: [f64; 3], h: f64) -> f64
where
    F: Fn([f64; 3]) -> [[f64; 3]; 3],
{
    let at = |m: usize, s: f64| {
        let mut q = p;
        q[m] += s * h;
        n(q)
    };
    // d[m][k][l] = d N^k_l / d x_m
    let mut d = [[[0.0f64; 3]; 3]; 3];
    for m in 0..3 {
        let p1 = at(m, 1.0);
        let m1 = at(m, -1.0);
        let p2 = at(m, 2.0);
        let m2 = at(m, -2.0);
        for k in 0..3 {
            for l in 0..3 {
                d[m][k][l] =
                    (8.0 * (p1[k][l] - m1[k][l]) - (p2[k][l] - m2[k][l])) / (12.0 * h);
            }
        }
    }
    let n0 = n(p);
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let mut t = 0.0;
                for l in 0..3 {
                    t += n0[l][i] * d[l][k][j] - n0[l][j] * d[l][k][i];
                    t -= n0[k][l] * (d[i][l][j] - d[j][l][i]);
                }
                worst = worst.max(t.abs());
            }
        }
    }
    worst
}

/// Geometric partial Nijenhuis operator: an operator N defined on the
/// span of `spanning` by its images N(Z_i).
#[derive(Debug, Clone)]
pub struct GeometricPNO {
    pub chart: Chart,
    pub spanning: Vec<VectorField>,
    pub images: Vec<VectorField>,
}

impl GeometricPNO {
    /// The spanning fields must be bracket-closed (checked).
    pub fn new(
        spanning: Vec<VectorField>,
        images: Vec<VectorField>,
        policy: &SamplePolicy,
    ) -> Result<Self, KwError> {
        if spanning.is_empty() || spanning.len() != images.len() {
            return Err(KwError::DimensionMismatch(
                "spanning fields and images must be nonempty and equinumerous".to_string(),
            ));
        }
        let chart = spanning[0].chart.clone();
        for f in spanning.iter().chain(images.iter()) {
            if f.chart != chart {
                return Err(KwError::ChartMismatch(
                    chart.vars.join(","),
                    f.chart.vars.join(","),
                ));
            }
        }
        if spanning.len() > 1 {
            let v = distribution_integrability(&spanning, policy)?;
            if !v.is_zero() {
                return Err(KwError::Invalid(
                    "spanning fields are not bracket-closed".to_string(),
                ));
            }
        }
        Ok(GeometricPNO {
            chart,
            spanning,
            images,
        })
    }

    pub fn rank(&self) -> usize {
        self.spanning.len()
    }

    /// Apply N to a combination given by span coordinates.
    fn apply_coords(&self, coords: &[Expr]) -> VectorField {
        let mut out = VectorField::new(
            self.chart.clone(),
            vec![Expr::zero(); self.chart.dim()],
        );
        for (c, im) in coords.iter().zip(&self.images) {
            out = out.add(&im.scale(c));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let strs = |fs: &[VectorField]| -> Vec<Vec<String>> {
            fs.iter()
                .map(|f| f.components.iter().map(|c| c.to_string()).collect())
                .collect()
        };
        serde_json::json!({
            "chart": self.chart.vars,
            "spanning": strs(&self.spanning),
            "images": strs(&self.images),
        })
    }

    pub fn from_json(v: &serde_json::Value, policy: &SamplePolicy) -> Result<Self, KwError> {
        let bad = |m: &str| KwError::Invalid(format!("pno json: {}", m));
        let vars: Vec<&str> = v["chart"]
            .as_array()
            .ok_or_else(|| bad("missing chart"))?
            .iter()
            .map(|s| s.as_str().ok_or_else(|| bad("chart entries must be strings")))
            .collect::<Result<_, _>>()?;
        let chart = Chart::new(&vars);
        let fields = |key: &str| -> Result<Vec<VectorField>, KwError> {
            v[key]
                .as_array()
                .ok_or_else(|| bad("missing field list"))?
                .iter()
                .map(|row| {
                    let comps = row
                        .as_array()
                        .ok_or_else(|| bad("field must be a list"))?
                        .iter()
                        .map(|s| {
                            chart.parse(s.as_str().ok_or_else(|| bad("component must be string"))?)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(VectorField::new(chart.clone(), comps))
                })
                .collect()
        };
        GeometricPNO::new(fields("spanning")?, fields("images")?, policy)
    }
}

/// Express `w` in the span of `fields` over the expression field, or None
/// if it does not lie in the span. Coefficients come from Cramer's rule on
/// a row subset whose minor is generically invertible; the remaining rows
/// are verified by zero_test.
pub fn span_coords(
    fields: &[VectorField],
    w: &VectorField,
    policy: &SamplePolicy,
) -> Result<Option<Vec<Expr>>, KwError> {
    let n = w.chart.dim();
    let r = fields.len();
    if w.is_zero_syntactic() {
        return Ok(Some(vec![Expr::zero(); r]));
    }
    // find r rows with a nonvanishing minor
    let mut chosen: Option<Vec<usize>> = None;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != r {
            continue;
        }
        let rows: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let m: Vec<Vec<Expr>> = rows
            .iter()
            .map(|&i| fields.iter().map(|f| f.components[i].clone()).collect())
            .collect();
        if matches!(zero_test(&sym_det(&m), policy)?, ZeroVerdict::NonZero { .. }) {
            chosen = Some(rows);
            break;
        }
    }
    let rows = chosen.ok_or_else(|| {
        KwError::Singular("spanning fields have no generically invertible minor".to_string())
    })?;
    let m: Vec<Vec<Expr>> = rows
        .iter()
        .map(|&i| fields.iter().map(|f| f.components[i].clone()).collect())
        .collect();
    let det = sym_det(&m);
    let mut coords = Vec::with_capacity(r);
    for k in 0..r {
        let mut mk = m.clone();
        for (a, &i) in rows.iter().enumerate() {
            mk[a][k] = w.components[i].clone();
        }
        coords.push(simplify(&Expr::quot(sym_det(&mk), det.clone())));
    }
    // residual on the remaining rows decides membership
    for i in 0..n {
        if rows.contains(&i) {
            continue;
        }
        let mut resid = w.components[i].clone();
        for (k, f) in fields.iter().enumerate() {
            resid = Expr::sub(resid, Expr::mul2(coords[k].clone(), f.components[i].clone()));
        }
        if matches!(zero_test(&resid, policy)?, ZeroVerdict::NonZero { .. }) {
            return Ok(None);
        }
    }
    Ok(Some(coords))
}

/// Check the two PNO axioms over all pairs of spanning fields. Returns
/// (true, None) on success, or (false, Some((i,j))) naming the first pair
/// for which deformed-bracket membership or the torsion condition fails.
pub fn is_geometric_pno(
    p: &GeometricPNO,
    policy: &SamplePolicy,
) -> Result<(bool, Option<(usize, usize)>), KwError> {
    let r = p.rank();
    for i in 0..r {
        for j in i + 1..r {
            let zi = &p.spanning[i];
            let zj = &p.spanning[j];
            let b = lie_bracket(zi, zj)?;
            let cb = match span_coords(&p.spanning, &b, policy)? {
                Some(c) => c,
                None => return Ok((false, Some((i, j)))),
            };
            let nb = p.apply_coords(&cb);
            // [Z_i, Z_j]_N = [NZ_i, Z_j] + [Z_i, NZ_j] - N[Z_i, Z_j]
            let defb = lie_bracket(&p.images[i], zj)?
                .add(&lie_bracket(zi, &p.images[j])?)
                .add(&nb.scale(&Expr::int(-1)));
            let cd = match span_coords(&p.spanning, &defb, policy)? {
                Some(c) => c,
                None => return Ok((false, Some((i, j)))),
            };
            // T_N(Z_i, Z_j) = [NZ_i, NZ_j] - N([Z_i, Z_j]_N)
            let t = lie_bracket(&p.images[i], &p.images[j])?
                .add(&p.apply_coords(&cd).scale(&Expr::int(-1)));
            for c in &t.components {
                if matches!(zero_test(c, policy)?, ZeroVerdict::NonZero { .. }) {
                    return Ok((false, Some((i, j))));
                }
            }
        }
    }
    Ok((true, None))
}

/// Rank of a family of fields evaluated at a random point; resamples
/// points where some component fails to evaluate.
fn sampled_rank(
    fields: &[VectorField],
    rng: &mut ChaCha8Rng,
    policy: &SamplePolicy,
) -> Result<(usize, BTreeMap<String, f64>), KwError> {
    let chart = &fields[0].chart;
    for _ in 0..50 {
        let point: BTreeMap<String, f64> = chart
            .vars
            .iter()
            .map(|v| (v.clone(), rng.gen_range(-policy.box_bound..policy.box_bound)))
            .collect();
        let rows: Result<Vec<Vec<f64>>, KwError> = fields
            .iter()
            .map(|f| f.components.iter().map(|c| c.eval_f64(&point)).collect())
            .collect();
        if let Ok(rows) = rows {
            return Ok((f64_rank(rows, 1e-9), point));
        }
    }
    Err(KwError::Inconclusive(50))
}

/// Restrict a (1,1)-tensor to a bracket-closed foliation. Verifies that
/// (1) B = (N + lambda*I) T_F is integrable and (2) the preimage of B
/// under N + lambda*I is exactly T_F (rank test at sample points); on
/// success returns the PNO (T_F, N|_{T_F}).
pub fn restrict_to_foliation(
    n: &OneOneTensor,
    foliation: &[VectorField],
    lambda: &Rat,
    policy: &SamplePolicy,
) -> Result<GeometricPNO, KwError> {
    let chart = &n.chart;
    let dim = chart.dim();
    let r = foliation.len();
    let mut nl = n.clone();
    for i in 0..dim {
        nl.entries[i][i] = Expr::add2(nl.entries[i][i].clone(), Expr::rat(lambda.clone()));
    }
    let b: Vec<VectorField> = foliation
        .iter()
        .map(|z| nl.apply(z))
        .collect::<Result<_, _>>()?;
    if b.len() > 1 {
        let v = distribution_integrability(&b, policy)?;
        if !v.is_zero() {
            return Err(KwError::Invalid(
                "restriction condition (1) fails: image distribution not integrable".to_string(),
            ));
        }
    }
    // condition (2): dim preimage of span(B) under nl equals r at samples
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed ^ 0x5eed);
    for _ in 0..policy.samples {
        let (rank_b, point) = sampled_rank(&b, &mut rng, policy)?;
        // rank of [nl | B] at the same point
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut eval_ok = true;
        for j in 0..dim {
            let mut row = Vec::new();
            for i in 0..dim {
                match nl.entries[i][j].eval_f64(&point) {
                    Ok(v) => row.push(v),
                    Err(_) => {
                        eval_ok = false;
                        break;
                    }
                }
            }
            if !eval_ok {
                break;
            }
            rows.push(row);
        }
        if !eval_ok {
            continue;
        }
        // columns of nl as vectors, augmented by B columns; work with the
        // transpose layout: each row above is one column of nl
        for f in &b {
            let row: Result<Vec<f64>, _> =
                f.components.iter().map(|c| c.eval_f64(&point)).collect();
            match row {
                Ok(rw) => rows.push(rw),
                Err(_) => {
                    eval_ok = false;
                    break;
                }
            }
        }
        if !eval_ok {
            continue;
        }
        let rank_aug = f64_rank(rows, 1e-9);
        // preimage dim = dim - (rank [nl B] - rank B)
        let preimage_dim = dim + rank_b - rank_aug;
        if preimage_dim != r {
            return Err(KwError::Invalid(
                "restriction condition (2) fails: preimage exceeds the foliation".to_string(),
            ));
        }
    }
    let images: Vec<VectorField> = foliation
        .iter()
        .map(|z| n.apply(z))
        .collect::<Result<_, _>>()?;
    GeometricPNO::new(foliation.to_vec(), images, policy)
}

/// Spanning fields of the level foliation of f in 3D (kernel of df),
/// assuming df_x1 is generically nonzero or the complementary components
/// vanish.
pub fn foliation_from_function(chart: &Chart, f: &Expr) -> Vec<VectorField> {
    let n = chart.dim();
    let d: Vec<Expr> = chart.vars.iter().map(|v| f.diff(v)).collect();
    (1..n)
        .map(|i| {
            let mut comps = vec![Expr::zero(); n];
            comps[0] = d[i].clone();
            comps[i] = Expr::neg(d[0].clone());
            VectorField::new(chart.clone(), comps)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalFormSymbol {
    A0,
    A1,
    A2,
    A3,
    B0,
    B1,
    B2,
    B3,
    C0,
    C1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalFormVariant {
    /// Coordinate matrix N_X.
    N,
    /// Frobenius form F_X.
    F,
    /// Jordan form J_X.
    J,
}

fn diag3(chart: &Chart, t: [Expr; 3]) -> OneOneTensor {
    let [t1, t2, t3] = t;
    OneOneTensor::new(
        chart.clone(),
        vec![
            vec![t1, Expr::zero(), Expr::zero()],
            vec![Expr::zero(), t2, Expr::zero()],
            vec![Expr::zero(), Expr::zero(), t3],
        ],
    )
}

fn frobenius3(chart: &Chart, t: [Expr; 3]) -> OneOneTensor {
    let [t1, t2, t3] = t;
    let e3 = Expr::mul(vec![t1.clone(), t2.clone(), t3.clone()]);
    let e2 = Expr::neg(Expr::add(vec![
        Expr::mul2(t1.clone(), t2.clone()),
        Expr::mul2(t1.clone(), t3.clone()),
        Expr::mul2(t2.clone(), t3.clone()),
    ]));
    let e1 = Expr::add(vec![t1, t2, t3]);
    OneOneTensor::new(
        chart.clone(),
        vec![
            vec![Expr::zero(), Expr::zero(), e3],
            vec![Expr::one(), Expr::zero(), e2],
            vec![Expr::zero(), Expr::one(), e1],
        ],
    )
}

fn upper_jordan2_plus1(chart: &Chart, t2: Expr, t3: Expr) -> OneOneTensor {
    OneOneTensor::new(
        chart.clone(),
        vec![
            vec![t2.clone(), Expr::one(), Expr::zero()],
            vec![Expr::zero(), t2, Expr::zero()],
            vec![Expr::zero(), Expr::zero(), t3],
        ],
    )
}

fn jordan3(chart: &Chart, t: Expr) -> OneOneTensor {
    OneOneTensor::new(
        chart.clone(),
        vec![
            vec![t.clone(), Expr::one(), Expr::zero()],
            vec![Expr::zero(), t.clone(), Expr::one()],
            vec![Expr::zero(), Expr::zero(), t],
        ],
    )
}

/// The Turiel catalog of cyclic Nijenhuis operators in 3D over the chart
/// (x1, x2, x3), in coordinate (N), Frobenius (F) or Jordan (J) form.
/// Constants a1, a2, a3 substitute for coordinates as the symbol demands;
/// coincident constants are rejected where distinctness is required.
pub fn normal_form(
    sym: NormalFormSymbol,
    variant: NormalFormVariant,
    a: [Rat; 3],
) -> Result<OneOneTensor, KwError> {
    use NormalFormSymbol::*;
    use NormalFormVariant as V;
    let chart = Chart::new(&["x1", "x2", "x3"]);
    let [a1, a2, a3] = a;
    let distinct = |pairs: &[(&Rat, &Rat)]| -> Result<(), KwError> {
        if pairs.iter().any(|(p, q)| p == q) {
            Err(KwError::Invalid(
                "normal-form constants must be pairwise distinct".to_string(),
            ))
        } else {
            Ok(())
        }
    };
    let x = |i: usize| Expr::var(&chart.vars[i]);
    // A-family arguments (t1, t2, t3)
    let a_args = |s: NormalFormSymbol| -> Result<[Expr; 3], KwError> {
        Ok(match s {
            A0 => [x(0), x(1), x(2)],
            A1 => [x(0), x(1), Expr::rat(a3.clone())],
            A2 => {
                distinct(&[(&a2, &a3)])?;
                [x(0), Expr::rat(a2.clone()), Expr::rat(a3.clone())]
            }
            A3 => {
                distinct(&[(&a1, &a2), (&a1, &a3), (&a2, &a3)])?;
                [
                    Expr::rat(a1.clone()),
                    Expr::rat(a2.clone()),
                    Expr::rat(a3.clone()),
                ]
            }
            _ => unreachable!(),
        })
    };
    // B-family arguments (t2, t3)
    let b_args = |s: NormalFormSymbol| -> Result<[Expr; 2], KwError> {
        Ok(match s {
            B0 => [x(1), x(2)],
            B1 => [x(1), Expr::rat(a3.clone())],
            B2 => [Expr::rat(a2.clone()), x(2)],
            B3 => {
                distinct(&[(&a2, &a3)])?;
                [Expr::rat(a2.clone()), Expr::rat(a3.clone())]
            }
            _ => unreachable!(),
        })
    };
    match sym {
        A0 | A1 | A2 | A3 => {
            let t = a_args(sym)?;
            Ok(match variant {
                V::F => frobenius3(&chart, t),
                V::N | V::J => diag3(&chart, t),
            })
        }
        B0 | B1 | B2 | B3 => {
            let [t2, t3] = b_args(sym)?;
            Ok(match variant {
                V::F => frobenius3(&chart, [t2.clone(), t2, t3]),
                V::N | V::J => upper_jordan2_plus1(&chart, t2, t3),
            })
        }
        C0 => Ok(match variant {
            V::N => OneOneTensor::new(
                chart.clone(),
                vec![
                    vec![x(2), Expr::zero(), Expr::one()],
                    vec![Expr::one(), x(2), Expr::neg(x(1))],
                    vec![Expr::zero(), Expr::zero(), x(2)],
                ],
            ),
            V::F => frobenius3(&chart, [x(2), x(2), x(2)]),
            V::J => jordan3(&chart, x(2)),
        }),
        C1 => {
            let t = Expr::rat(a3.clone());
            Ok(match variant {
                V::F => frobenius3(&chart, [t.clone(), t.clone(), t]),
                V::N | V::J => jordan3(&chart, t),
            })
        }
    }
}

/// Adapted frame of a rank-2 generic-type PNO in 3D: X1 spans
/// D1 = T_F intersect N T_F, X0 = N^{-1} X1 within T_F, X2 = N X1,
/// together with the structure functions of relations
/// [X0,X1] = b0 X0 + b1 X1 and [X1,X2] = c1 X1 + c2 X2.
#[derive(Debug, Clone)]
pub struct AdaptedFrame {
    pub x0: VectorField,
    pub x1: VectorField,
    pub x2: VectorField,
    pub b0: Expr,
    pub b1: Expr,
    pub c1: Expr,
    pub c2: Expr,
}

/// Express w in the frame (columns), exactly, by Cramer's rule.
pub fn frame_coords(
    frame: &[&VectorField; 3],
    w: &VectorField,
    policy: &SamplePolicy,
) -> Result<[Expr; 3], KwError> {
    let m: Vec<Vec<Expr>> = (0..3)
        .map(|i| frame.iter().map(|f| f.components[i].clone()).collect())
        .collect();
    let det = sym_det(&m);
    if !matches!(zero_test(&det, policy)?, ZeroVerdict::NonZero { .. }) {
        return Err(KwError::Singular("frame determinant vanishes".to_string()));
    }
    let mut out = Vec::new();
    for k in 0..3 {
        let mut mk = m.clone();
        for i in 0..3 {
            mk[i][k] = w.components[i].clone();
        }
        out.push(simplify(&Expr::quot(sym_det(&mk), det.clone())));
    }
    Ok([out[0].clone(), out[1].clone(), out[2].clone()])
}

pub fn adapted_frame(p: &GeometricPNO, policy: &SamplePolicy) -> Result<AdaptedFrame, KwError> {
    if p.rank() != 2 || p.chart.dim() != 3 {
        return Err(KwError::DimensionMismatch(
            "adapted frame needs a rank-2 PNO on a 3-dimensional chart".to_string(),
        ));
    }
    let (z1, z2) = (&p.spanning[0], &p.spanning[1]);
    let (nz1, nz2) = (&p.images[0], &p.images[1]);
    // D1 is rank 1 iff the four fields span all of TM at generic points
    let all = [z1.clone(), z2.clone(), nz1.clone(), nz2.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed ^ 0xd1);
    for _ in 0..policy.samples {
        let (rk, _) = sampled_rank(&all, &mut rng, policy)?;
        if rk != 3 {
            return Err(KwError::Invalid(
                "intersection of the foliation with its image is not rank 1".to_string(),
            ));
        }
    }
    // kernel of the 3x4 column matrix [Z1 Z2 -NZ1 -NZ2] via signed minors
    let cols: [&VectorField; 4] = [z1, z2, nz1, nz2];
    let signs = [Expr::one(), Expr::one(), Expr::int(-1), Expr::int(-1)];
    let mut v = Vec::new();
    for j in 0..4 {
        let m: Vec<Vec<Expr>> = (0..3)
            .map(|i| {
                (0..4)
                    .filter(|&c| c != j)
                    .map(|c| Expr::mul2(signs[c].clone(), cols[c].components[i].clone()))
                    .collect()
            })
            .collect();
        let d = simplify(&sym_det(&m));
        v.push(if j % 2 == 0 { d } else { Expr::neg(d) });
    }
    // X1 = v0 Z1 + v1 Z2 = v2 NZ1 + v3 NZ2
    let x1_raw = z1.scale(&v[0]).add(&z2.scale(&v[1]));
    // deterministic scaling: first generically nonvanishing component -> 1
    let mut scale = None;
    for c in &x1_raw.components {
        if matches!(zero_test(c, policy)?, ZeroVerdict::NonZero { .. }) {
            scale = Some(c.clone());
            break;
        }
    }
    let s = scale.ok_or_else(|| {
        KwError::Singular("intersection field vanishes identically".to_string())
    })?;
    let alpha = [
        simplify(&Expr::quot(v[0].clone(), s.clone())),
        simplify(&Expr::quot(v[1].clone(), s.clone())),
    ];
    let beta = [
        simplify(&Expr::quot(v[2].clone(), s.clone())),
        simplify(&Expr::quot(v[3].clone(), s.clone())),
    ];
    let simp = |f: VectorField| {
        VectorField::new(f.chart.clone(), f.components.iter().map(simplify).collect())
    };
    let x1 = simp(z1.scale(&alpha[0]).add(&z2.scale(&alpha[1])));
    let x2 = simp(nz1.scale(&alpha[0]).add(&nz2.scale(&alpha[1])));
    let x0 = simp(z1.scale(&beta[0]).add(&z2.scale(&beta[1])));
    let frame = [&x0, &x1, &x2];
    let b = frame_coords(&frame, &simp(lie_bracket(&x0, &x1)?), policy)?;
    if matches!(zero_test(&b[2], policy)?, ZeroVerdict::NonZero { .. }) {
        return Err(KwError::Invalid(
            "[X0,X1] leaves the foliation: input is not a PNO".to_string(),
        ));
    }
    let c = frame_coords(&frame, &simp(lie_bracket(&x1, &x2)?), policy)?;
    if matches!(zero_test(&c[0], policy)?, ZeroVerdict::NonZero { .. }) {
        return Err(KwError::Invalid(
            "[X1,X2] leaves the image distribution: input is not a PNO".to_string(),
        ));
    }
    let (b0, b1, c1, c2) = (b[0].clone(), b[1].clone(), c[1].clone(), c[2].clone());
    // relation (ii): [X0,X2] = c1 X0 + (c2 + b0) X1 + b1 X2
    let expected = x0
        .scale(&c1)
        .add(&x1.scale(&Expr::add2(c2.clone(), b0.clone())))
        .add(&x2.scale(&b1));
    let resid = simp(lie_bracket(&x0, &x2)?.add(&expected.scale(&Expr::int(-1))));
    for comp in &resid.components {
        if let ZeroVerdict::NonZero { witness, .. } = zero_test(comp, policy)? {
            return Err(KwError::Invalid(format!(
                "frame relation (ii) fails (input is not a PNO); witness {:?}",
                witness
            )));
        }
    }
    Ok(AdaptedFrame {
        x0,
        x1,
        x2,
        b0,
        b1,
        c1,
        c2,
    })
}

/// Residuals of the self-propelled system phi*X0(phi) = X1(phi),
/// phi*X1(phi) = X2(phi) in a given frame.
pub fn selfpropelled_residual_exprs(frame: &AdaptedFrame, phi: &Expr) -> [Expr; 2] {
    let d0 = frame.x0.apply_to(phi);
    let d1 = frame.x1.apply_to(phi);
    let d2 = frame.x2.apply_to(phi);
    [
        Expr::sub(Expr::mul2(phi.clone(), d0), d1.clone()),
        Expr::sub(Expr::mul2(phi.clone(), d1), d2),
    ]
}

pub(crate) fn sym_inverse(
    m: &[Vec<Expr>],
    policy: &SamplePolicy,
) -> Result<Vec<Vec<Expr>>, KwError> {
    let n = m.len();
    let det = sym_det(m);
    if !matches!(zero_test(&det, policy)?, ZeroVerdict::NonZero { .. }) {
        return Err(KwError::Singular("matrix determinant vanishes".to_string()));
    }
    let mut inv = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<Expr>> = (0..n)
                .filter(|&r| r != j)
                .map(|r| {
                    (0..n)
                        .filter(|&c| c != i)
                        .map(|c| m[r][c].clone())
                        .collect()
                })
                .collect();
            let cof = sym_det(&minor);
            let signed = if (i + j) % 2 == 0 { cof } else { Expr::neg(cof) };
            inv[i][j] = simplify(&Expr::quot(signed, det.clone()));
        }
    }
    Ok(inv)
}

/// Extend a rank-2 generic PNO in 3D to a full (1,1)-tensor using three
/// self-propelled functions: in the adapted frame the extension has the
/// companion matrix F(phi1, phi2, phi3); returns the coordinate-frame
/// tensor together with its torsion verdict.
pub fn extension_from_selfpropelled(
    p: &GeometricPNO,
    phis: &[Expr; 3],
    policy: &SamplePolicy,
) -> Result<(OneOneTensor, ZeroVerdict), KwError> {
    let frame = adapted_frame(p, policy)?;
    for phi in phis {
        for resid in selfpropelled_residual_exprs(&frame, phi) {
            if let ZeroVerdict::NonZero { value, .. } = zero_test(&resid, policy)? {
                return Err(KwError::Invalid(format!(
                    "function is not self-propelled: residual {:.3e}",
                    value
                )));
            }
        }
    }
    let [p1, p2, p3] = phis.clone();
    let f0 = Expr::mul(vec![p1.clone(), p2.clone(), p3.clone()]);
    let f1 = Expr::neg(Expr::add(vec![
        Expr::mul2(p1.clone(), p2.clone()),
        Expr::mul2(p1.clone(), p3.clone()),
        Expr::mul2(p2.clone(), p3.clone()),
    ]));
    let f2 = Expr::add(vec![p1, p2, p3]);
    let fm = [
        [Expr::zero(), Expr::zero(), f0],
        [Expr::one(), Expr::zero(), f1],
        [Expr::zero(), Expr::one(), f2],
    ];
    // coordinate matrix: P F P^{-1} with P = [X0 | X1 | X2]
    let p_cols = [&frame.x0, &frame.x1, &frame.x2];
    let p_mat: Vec<Vec<Expr>> = (0..3)
        .map(|i| p_cols.iter().map(|f| f.components[i].clone()).collect())
        .collect();
    let p_inv = sym_inverse(&p_mat, policy)?;
    let mut entries = vec![vec![Expr::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut terms = Vec::new();
            for a in 0..3 {
                for b in 0..3 {
                    terms.push(Expr::mul(vec![
                        p_mat[i][a].clone(),
                        fm[a][b].clone(),
                        p_inv[b][j].clone(),
                    ]));
                }
            }
            entries[i][j] = simplify(&Expr::add(terms));
        }
    }
    let nbar = OneOneTensor::new(p.chart.clone(), entries);
    let verdict = is_nijenhuis(&nbar, policy)?;
    Ok((nbar, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat_int;

    fn chart3() -> Chart {
        Chart::new(&["x1", "x2", "x3"])
    }

    fn policy() -> SamplePolicy {
        SamplePolicy::default()
    }

    fn a123() -> [Rat; 3] {
        [rat_int(1), rat_int(2), rat_int(3)]
    }

    #[test]
    fn torsion_examples() {
        let ch = chart3();
        let diag = OneOneTensor::from_strs(
            &ch,
            &[&["1", "0", "0"], &["0", "2", "0"], &["0", "0", "3"]],
        )
        .unwrap();
        assert!(is_nijenhuis(&diag, &policy()).unwrap().is_proven());
        let id = OneOneTensor::identity(&ch);
        assert!(is_nijenhuis(&id, &policy()).unwrap().is_proven());
        // 2D: N d1 = d2, N d2 = x1 d1 -> torsion(d1, d2) = -d2
        let ch2 = Chart::new(&["x1", "x2"]);
        let n = OneOneTensor::from_strs(&ch2, &[&["0", "x1"], &["1", "0"]]).unwrap();
        let t = tensor_torsion(
            &n,
            &VectorField::coordinate(&ch2, 0),
            &VectorField::coordinate(&ch2, 1),
        )
        .unwrap();
        assert!(zero_test(&t.components[0], &policy()).unwrap().is_proven());
        assert!(zero_test(&Expr::add2(t.components[1].clone(), Expr::one()), &policy())
            .unwrap()
            .is_proven());
        assert!(matches!(
            is_nijenhuis(&n, &policy()).unwrap(),
            ZeroVerdict::NonZero { .. }
        ));
    }

    #[test]
    fn catalog_matrices_are_nijenhuis() {
        use NormalFormSymbol::*;
        for sym in [A0, A1, A2, A3, B0, B1, B2, B3, C0, C1] {
            let n = normal_form(sym, NormalFormVariant::N, a123()).unwrap();
            let v = is_nijenhuis(&n, &policy()).unwrap();
            assert!(v.is_zero(), "{:?}: {:?}", sym, v);
        }
        // Frobenius forms live in an adapted (generally anholonomic)
        // frame; only the constant ones are Nijenhuis as coordinate
        // matrices
        for sym in [A3, C1] {
            let f = normal_form(sym, NormalFormVariant::F, a123()).unwrap();
            assert!(is_nijenhuis(&f, &policy()).unwrap().is_zero(), "{:?} F", sym);
        }
    }

    #[test]
    fn catalog_entries() {
        let a0 = normal_form(NormalFormSymbol::A0, NormalFormVariant::N, a123()).unwrap();
        assert_eq!(a0.entries[0][0], Expr::var("x1"));
        assert_eq!(a0.entries[1][1], Expr::var("x2"));
        assert_eq!(a0.entries[2][2], Expr::var("x3"));
        assert_eq!(a0.entries[0][1], Expr::zero());
        let c0j = normal_form(NormalFormSymbol::C0, NormalFormVariant::J, a123()).unwrap();
        assert_eq!(c0j.entries[0][0], Expr::var("x3"));
        assert_eq!(c0j.entries[0][1], Expr::one());
        assert_eq!(c0j.entries[1][2], Expr::one());
        assert_eq!(c0j.entries[1][0], Expr::zero());
        // B3 with a2 = 0, a3 = 1 is the constant matrix [[0,1,0],[0,0,0],[0,0,1]]
        let b3 = normal_form(
            NormalFormSymbol::B3,
            NormalFormVariant::N,
            [rat_int(9), rat_int(0), rat_int(1)],
        )
        .unwrap();
        assert_eq!(b3.entries[0][0], Expr::zero());
        assert_eq!(b3.entries[0][1], Expr::one());
        assert_eq!(b3.entries[1][1], Expr::zero());
        assert_eq!(b3.entries[2][2], Expr::one());
        // coincident constants where distinctness is required
        assert!(normal_form(
            NormalFormSymbol::A3,
            NormalFormVariant::N,
            [rat_int(1), rat_int(1), rat_int(3)]
        )
        .is_err());
        assert!(normal_form(
            NormalFormSymbol::B3,
            NormalFormVariant::N,
            [rat_int(0), rat_int(2), rat_int(2)]
        )
        .is_err());
    }

    #[test]
    fn geometric_pno_examples() {
        let ch = chart3();
        // E = <d1>, N d1 = d2: partial Nijenhuis
        let p = GeometricPNO::new(
            vec![VectorField::coordinate(&ch, 0)],
            vec![VectorField::coordinate(&ch, 1)],
            &policy(),
        )
        .unwrap();
        assert_eq!(is_geometric_pno(&p, &policy()).unwrap(), (true, None));
        // E = TM, N = identity
        let full = GeometricPNO::new(
            (0..3).map(|i| VectorField::coordinate(&ch, i)).collect(),
            (0..3).map(|i| VectorField::coordinate(&ch, i)).collect(),
            &policy(),
        )
        .unwrap();
        assert_eq!(is_geometric_pno(&full, &policy()).unwrap(), (true, None));
        // flat rank-2 example: N d1 = d2, N d2 = d3
        let flat = GeometricPNO::new(
            vec![
                VectorField::coordinate(&ch, 0),
                VectorField::coordinate(&ch, 1),
            ],
            vec![
                VectorField::coordinate(&ch, 1),
                VectorField::coordinate(&ch, 2),
            ],
            &policy(),
        )
        .unwrap();
        assert_eq!(is_geometric_pno(&flat, &policy()).unwrap(), (true, None));
        // generic perturbation N d2 = d3 + x1*x2 d1 breaks the torsion axiom
        let perturbed = GeometricPNO::new(
            vec![
                VectorField::coordinate(&ch, 0),
                VectorField::coordinate(&ch, 1),
            ],
            vec![
                VectorField::coordinate(&ch, 1),
                VectorField::from_strs(&ch, &["x1*x2", "0", "1"]).unwrap(),
            ],
            &policy(),
        )
        .unwrap();
        let (ok, witness) = is_geometric_pno(&perturbed, &policy()).unwrap();
        assert!(!ok);
        assert_eq!(witness, Some((0, 1)));
    }

    #[test]
    fn pno_json_round_trip() {
        let ch = chart3();
        let p = GeometricPNO::new(
            vec![
                VectorField::coordinate(&ch, 0),
                VectorField::from_strs(&ch, &["0", "1", "x1"]).unwrap(),
            ],
            vec![
                VectorField::coordinate(&ch, 1),
                VectorField::coordinate(&ch, 2),
            ],
            &policy(),
        );
        // the given spanning fields are not bracket-closed
        assert!(p.is_err());
        let p = GeometricPNO::new(
            vec![VectorField::from_strs(&ch, &["0", "x1", "0"]).unwrap()],
            vec![VectorField::coordinate(&ch, 2)],
            &policy(),
        )
        .unwrap();
        let back = GeometricPNO::from_json(&p.to_json(), &policy()).unwrap();
        assert_eq!(back.spanning[0].components, p.spanning[0].components);
        assert_eq!(back.images[0].components, p.images[0].components);
    }

    fn diag_123(ch: &Chart) -> OneOneTensor {
        OneOneTensor::from_strs(ch, &[&["1", "0", "0"], &["0", "2", "0"], &["0", "0", "3"]])
            .unwrap()
    }

    #[test]
    fn restriction_examples() {
        let ch = chart3();
        let n = diag_123(&ch);
        // coordinate foliation f = x1
        let fol = foliation_from_function(&ch, &Expr::var("x1"));
        let p = restrict_to_foliation(&n, &fol, &rat_int(0), &policy()).unwrap();
        assert_eq!(is_geometric_pno(&p, &policy()).unwrap(), (true, None));
        // exponential foliation f = exp(x1+x2+x3)
        let f = Expr::exp(ch.parse("x1 + x2 + x3").unwrap());
        let fol = foliation_from_function(&ch, &f);
        let p = restrict_to_foliation(&n, &fol, &rat_int(0), &policy()).unwrap();
        assert_eq!(p.rank(), 2);
        // f = x1^2 + x2*x3 fails integrability of the image
        let f = ch.parse("x1^2 + x2*x3").unwrap();
        let fol = foliation_from_function(&ch, &f);
        let err = restrict_to_foliation(&n, &fol, &rat_int(0), &policy()).unwrap_err();
        assert!(format!("{}", err).contains("condition (1)"));
    }

    fn flat_pno(ch: &Chart) -> GeometricPNO {
        GeometricPNO::new(
            vec![
                VectorField::coordinate(ch, 0),
                VectorField::coordinate(ch, 1),
            ],
            vec![
                VectorField::coordinate(ch, 1),
                VectorField::coordinate(ch, 2),
            ],
            &policy(),
        )
        .unwrap()
    }

    #[test]
    fn adapted_frame_flat() {
        let ch = chart3();
        let frame = adapted_frame(&flat_pno(&ch), &policy()).unwrap();
        let unit = |i: usize, f: &VectorField| {
            for (j, c) in f.components.iter().enumerate() {
                let want = if i == j { Expr::one() } else { Expr::zero() };
                assert!(zero_test(&Expr::sub(c.clone(), want), &policy())
                    .unwrap()
                    .is_proven());
            }
        };
        unit(0, &frame.x0);
        unit(1, &frame.x1);
        unit(2, &frame.x2);
        for f in [&frame.b0, &frame.b1, &frame.c1, &frame.c2] {
            assert!(zero_test(f, &policy()).unwrap().is_proven());
        }
    }

    #[test]
    fn adapted_frame_hirota() {
        let ch = chart3();
        let n = diag_123(&ch);
        // the level sets of exp(x1+x2+x3) are parallel planes, so the
        // normalized adapted frame comes out constant and commuting
        let f = Expr::exp(ch.parse("x1 + x2 + x3").unwrap());
        let fol = foliation_from_function(&ch, &f);
        let p = restrict_to_foliation(&n, &fol, &rat_int(0), &policy()).unwrap();
        let frame = adapted_frame(&p, &policy()).unwrap();
        for f in [&frame.b0, &frame.b1, &frame.c1, &frame.c2] {
            assert!(zero_test(f, &policy()).unwrap().is_zero());
        }
        // a nonconstant operator produces nonzero structure functions
        let n = OneOneTensor::from_strs(
            &ch,
            &[&["x1", "0", "0"], &["0", "x2", "0"], &["0", "0", "x3"]],
        )
        .unwrap();
        let f = ch.parse("x1 + x2 + x3").unwrap();
        let fol = foliation_from_function(&ch, &f);
        let p = restrict_to_foliation(&n, &fol, &rat_int(0), &policy()).unwrap();
        let frame = adapted_frame(&p, &policy()).unwrap();
        // relation (ii) already verified inside adapted_frame
        let some_nonzero = [&frame.b0, &frame.b1, &frame.c1, &frame.c2]
            .iter()
            .any(|f| {
                matches!(
                    zero_test(f, &policy()).unwrap(),
                    ZeroVerdict::NonZero { .. }
                )
            });
        assert!(some_nonzero);
    }

    #[test]
    fn adapted_frame_rejects_non_pno() {
        let ch = chart3();
        let p = GeometricPNO::new(
            vec![
                VectorField::coordinate(&ch, 0),
                VectorField::coordinate(&ch, 1),
            ],
            vec![
                VectorField::coordinate(&ch, 1),
                VectorField::from_strs(&ch, &["x1*x2", "0", "1"]).unwrap(),
            ],
            &policy(),
        )
        .unwrap();
        assert!(adapted_frame(&p, &policy()).is_err());
    }

    #[test]
    fn torsion_scaling_of_pencil() {
        // T_{l1 I + l2 N} = l2^2 T_N as (1,1)-tensors
        let ch = chart3();
        let n = OneOneTensor::from_strs(
            &ch,
            &[
                &["x1", "x2", "0"],
                &["0", "x2^2", "x1"],
                &["x3", "0", "x1*x2"],
            ],
        )
        .unwrap();
        let (l1, l2) = (Expr::int(2), Expr::int(3));
        let mut scaled = OneOneTensor::new(
            ch.clone(),
            n.entries
                .iter()
                .map(|r| r.iter().map(|e| Expr::mul2(l2.clone(), e.clone())).collect())
                .collect(),
        );
        for i in 0..3 {
            scaled.entries[i][i] = Expr::add2(scaled.entries[i][i].clone(), l1.clone());
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let x = VectorField::coordinate(&ch, i);
                let y = VectorField::coordinate(&ch, j);
                let t = tensor_torsion(&n, &x, &y).unwrap();
                let ts = tensor_torsion(&scaled, &x, &y).unwrap();
                for k in 0..3 {
                    let resid = Expr::sub(
                        ts.components[k].clone(),
                        Expr::mul2(Expr::int(9), t.components[k].clone()),
                    );
                    assert!(zero_test(&resid, &policy()).unwrap().is_proven());
                }
            }
        }
    }

    #[test]
    fn image_family_integrable() {
        // (N - s I) T_F stays integrable across sampled s for restrictions
        // that pass the PNO axioms
        let ch = chart3();
        let n = diag_123(&ch);
        let f = Expr::exp(ch.parse("x1 + x2 + x3").unwrap());
        let fol = foliation_from_function(&ch, &f);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s = rat_int(rng.gen_range(4i64..40));
            let mut shifted = n.clone();
            for i in 0..3 {
                shifted.entries[i][i] =
                    Expr::sub(shifted.entries[i][i].clone(), Expr::rat(s.clone()));
            }
            let imgs: Vec<VectorField> =
                fol.iter().map(|z| shifted.apply(z).unwrap()).collect();
            assert!(distribution_integrability(&imgs, &policy())
                .unwrap()
                .is_zero());
        }
    }

    #[test]
    fn extension_with_constants() {
        let ch = chart3();
        let p = flat_pno(&ch);
        let phis = [Expr::int(1), Expr::int(2), Expr::int(3)];
        let (nbar, verdict) = extension_from_selfpropelled(&p, &phis, &policy()).unwrap();
        assert!(verdict.is_zero());
        // flat frame: the coordinate matrix is the companion matrix of
        // (t-1)(t-2)(t-3) = t^3 - 6t^2 + 11t - 6
        assert_eq!(nbar.entries[0][2], Expr::int(6));
        assert_eq!(nbar.entries[1][2], Expr::int(-11));
        assert_eq!(nbar.entries[2][2], Expr::int(6));
        assert_eq!(nbar.entries[1][0], Expr::one());
        assert_eq!(nbar.entries[2][1], Expr::one());
        // restriction to T_F reproduces N column-by-column
        for (z, img) in p.spanning.iter().zip(&p.images) {
            let nz = nbar.apply(z).unwrap();
            for (a, b) in nz.components.iter().zip(&img.components) {
                assert!(zero_test(&Expr::sub(a.clone(), b.clone()), &policy())
                    .unwrap()
                    .is_proven());
            }
        }
        // equal constants give the C1 companion matrix
        let phis = [Expr::int(3), Expr::int(3), Expr::int(3)];
        let (nbar, verdict) = extension_from_selfpropelled(&p, &phis, &policy()).unwrap();
        assert!(verdict.is_zero());
        assert_eq!(nbar.entries[0][2], Expr::int(27));
        assert_eq!(nbar.entries[1][2], Expr::int(-27));
        assert_eq!(nbar.entries[2][2], Expr::int(9));
    }

    #[test]
    fn extension_rejects_non_selfpropelled() {
        let ch = chart3();
        let p = flat_pno(&ch);
        let phis = [Expr::var("x1"), Expr::int(2), Expr::int(3)];
        assert!(extension_from_selfpropelled(&p, &phis, &policy()).is_err());
    }

    #[test]
    fn numeric_torsion_vanishes_for_constant_tensor() {
        let f = |_: [f64; 3]| [[1.0, 0.5, 0.0], [0.0, 2.0, 0.25], [0.0, 0.0, 3.0]];
        assert!(numeric_torsion_max(f, [0.3, -0.7, 1.1], 1e-5) < 1e-9);
        // diag(x1, x2, x3) sampled numerically
        let g = |p: [f64; 3]| {
            [
                [p[0], 0.0, 0.0],
                [0.0, p[1], 0.0],
                [0.0, 0.0, p[2]],
            ]
        };
        assert!(numeric_torsion_max(g, [0.3, -0.7, 1.1], 1e-5) < 1e-8);
    }
}
