//! The catalog of nonlinear PDEs attached to webs: the Hirota equation
//! and its A/B/C relatives in 3D, the four-eigenvalue system and its
//! degenerate 2+2 version in 4D. Residuals are evaluated symbolically or
//! by central differences on grids, and verified solutions are turned
//! into webs through the listed lambda-families of annihilator forms.

use crate::calculus::{Chart, OneForm};
use crate::error::KwError;
use crate::expr::{lambda_poly_coeffs, simplify, zero_test, Expr, SamplePolicy, ZeroVerdict};
use crate::nijenhuis::sym_inverse;
use crate::rat::{rat_to_f64, Rat};
use crate::webs::{KroneckerWebData, VeroneseWeb};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquationSymbol {
    A0,
    A1,
    A2,
    /// All three eigenvalue functions constant: the Hirota equation.
    A3,
    B0,
    B1,
    B2,
    B3,
    C0,
    C1,
    /// Four distinct eigenvalues in R^4: the system on a pair f1, f2.
    K4,
    /// Two double eigenvalues in R^4 (3-web type).
    K4Deg,
}

impl EquationSymbol {
    pub fn dim(self) -> usize {
        match self {
            EquationSymbol::K4 | EquationSymbol::K4Deg => 4,
            _ => 3,
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            EquationSymbol::A0 | EquationSymbol::B0 | EquationSymbol::C0 => 0,
            EquationSymbol::A1
            | EquationSymbol::B1
            | EquationSymbol::B2
            | EquationSymbol::C1 => 1,
            EquationSymbol::A2 | EquationSymbol::B3 | EquationSymbol::K4Deg => 2,
            EquationSymbol::A3 => 3,
            EquationSymbol::K4 => 4,
        }
    }

    /// Indices (1-based) of the eigenvalue functions that are coordinate
    /// functions rather than constants.
    pub fn coordinate_lambdas(self) -> &'static [usize] {
        match self {
            EquationSymbol::A0 => &[1, 2, 3],
            EquationSymbol::A1 => &[1, 2],
            EquationSymbol::A2 => &[1],
            EquationSymbol::A3 => &[],
            EquationSymbol::B0 => &[2, 3],
            EquationSymbol::B1 => &[2],
            EquationSymbol::B2 => &[3],
            EquationSymbol::B3 => &[],
            EquationSymbol::C0 => &[3],
            EquationSymbol::C1 | EquationSymbol::K4 | EquationSymbol::K4Deg => &[],
        }
    }
}

/// An equation of the catalog with its constants fixed.
#[derive(Debug, Clone)]
pub struct EquationSpec {
    pub symbol: EquationSymbol,
    pub params: Vec<Rat>,
}

impl EquationSpec {
    pub fn new(symbol: EquationSymbol, params: Vec<Rat>) -> Result<Self, KwError> {
        if params.len() != symbol.param_count() {
            return Err(KwError::DimensionMismatch(format!(
                "{:?} takes {} constants, got {}",
                symbol,
                symbol.param_count(),
                params.len()
            )));
        }
        let distinct = match symbol {
            EquationSymbol::A2
            | EquationSymbol::A3
            | EquationSymbol::B3
            | EquationSymbol::K4
            | EquationSymbol::K4Deg => true,
            _ => false,
        };
        if distinct {
            for i in 0..params.len() {
                for j in i + 1..params.len() {
                    if params[i] == params[j] {
                        return Err(KwError::Invalid(format!(
                            "{:?} needs pairwise distinct constants",
                            symbol
                        )));
                    }
                }
            }
        }
        Ok(EquationSpec { symbol, params })
    }

    /// The Hirota equation a1 f_{x1} f_{x2x3} + a2 f_{x2} f_{x3x1} +
    /// a3 f_{x3} f_{x1x2} = 0 with a1 + a2 + a3 = 0, reparametrized as
    /// A3 with eigenvalues (0, -a3, a2).
    pub fn hirota_from_coefficients(a: [Rat; 3]) -> Result<Self, KwError> {
        if !num_traits::Zero::is_zero(&(a[0].clone() + a[1].clone() + a[2].clone())) {
            return Err(KwError::Invalid(
                "Hirota coefficients must sum to zero".to_string(),
            ));
        }
        EquationSpec::new(
            EquationSymbol::A3,
            vec![Rat::from_integer(0.into()), -a[2].clone(), a[1].clone()],
        )
    }

    pub fn dim(&self) -> usize {
        self.symbol.dim()
    }

    pub fn n_funcs(&self) -> usize {
        if self.dim() == 3 {
            1
        } else {
            2
        }
    }

    pub fn chart(&self) -> Chart {
        if self.dim() == 3 {
            Chart::new(&["x1", "x2", "x3"])
        } else {
            Chart::new(&["x1", "x2", "x3", "x4"])
        }
    }

    /// The eigenvalue functions lambda_i as expressions (coordinates or
    /// constants), where meaningful for the symbol.
    fn lambda_exprs(&self) -> Vec<Expr> {
        let x = |i: usize| Expr::var(&format!("x{}", i));
        let p = |k: usize| Expr::rat(self.params[k].clone());
        match self.symbol {
            EquationSymbol::A0 => vec![x(1), x(2), x(3)],
            EquationSymbol::A1 => vec![x(1), x(2), p(0)],
            EquationSymbol::A2 => vec![x(1), p(0), p(1)],
            EquationSymbol::A3 => vec![p(0), p(1), p(2)],
            // B uses lambda_2, lambda_3 only
            EquationSymbol::B0 => vec![x(2), x(3)],
            EquationSymbol::B1 => vec![x(2), p(0)],
            EquationSymbol::B2 => vec![p(0), x(3)],
            EquationSymbol::B3 => vec![p(0), p(1)],
            EquationSymbol::C0 => vec![x(3)],
            EquationSymbol::C1 => vec![p(0)],
            EquationSymbol::K4 => vec![p(0), p(1), p(2), p(3)],
            EquationSymbol::K4Deg => vec![p(0), p(0), p(1), p(1)],
        }
    }
}

/// One product term of a residual: a coefficient depending on the
/// coordinates only, times a product of partial derivatives; each factor
/// is (function index, differentiation multi-index of coordinate
/// indices).
struct Term {
    coef: Expr,
    factors: Vec<(usize, Vec<usize>)>,
}

fn a_family_terms(l: &[Expr; 3]) -> Vec<Term> {
    let d = |a: &Expr, b: &Expr| Expr::sub(a.clone(), b.clone());
    vec![
        Term {
            coef: d(&l[1], &l[2]),
            factors: vec![(0, vec![0]), (0, vec![1, 2])],
        },
        Term {
            coef: d(&l[2], &l[0]),
            factors: vec![(0, vec![1]), (0, vec![2, 0])],
        },
        Term {
            coef: d(&l[0], &l[1]),
            factors: vec![(0, vec![2]), (0, vec![0, 1])],
        },
    ]
}

fn k4_family_terms(l: &[Expr; 4]) -> Vec<Vec<Term>> {
    let d = |a: usize, b: usize| Expr::sub(l[a].clone(), l[b].clone());
    // (pair differentiated, complementary pair), with the coefficient
    // lambda differences of the boxed system
    let blocks: [(usize, usize, usize, usize, Expr); 6] = [
        (0, 1, 2, 3, d(0, 1)),
        (0, 2, 1, 3, d(2, 0)),
        (0, 3, 1, 2, d(0, 3)),
        (1, 2, 0, 3, d(1, 2)),
        (1, 3, 0, 2, d(3, 1)),
        (2, 3, 0, 1, d(2, 3)),
    ];
    (0..2)
        .map(|i| {
            let ib = 1 - i;
            let mut out = Vec::new();
            for (a, b, c, e, coef) in blocks.iter().cloned() {
                out.push(Term {
                    coef: coef.clone(),
                    factors: vec![(i, vec![a, b]), (i, vec![c]), (ib, vec![e])],
                });
                out.push(Term {
                    coef: Expr::neg(coef),
                    factors: vec![(i, vec![a, b]), (ib, vec![c]), (i, vec![e])],
                });
            }
            out
        })
        .collect()
}

fn equation_terms(eq: &EquationSpec) -> Vec<Vec<Term>> {
    let l = eq.lambda_exprs();
    match eq.symbol {
        EquationSymbol::A0 | EquationSymbol::A1 | EquationSymbol::A2 | EquationSymbol::A3 => {
            vec![a_family_terms(&[l[0].clone(), l[1].clone(), l[2].clone()])]
        }
        EquationSymbol::B0 | EquationSymbol::B1 | EquationSymbol::B2 | EquationSymbol::B3 => {
            let (l2, l3) = (l[0].clone(), l[1].clone());
            let dl = Expr::sub(l2, l3);
            // lambda_2'(x_2): 1 when lambda_2 is the coordinate x2
            let l2p = if matches!(eq.symbol, EquationSymbol::B0 | EquationSymbol::B1) {
                Expr::one()
            } else {
                Expr::zero()
            };
            vec![vec![
                Term {
                    coef: Expr::one(),
                    factors: vec![(0, vec![0]), (0, vec![0, 2])],
                },
                Term {
                    coef: Expr::int(-1),
                    factors: vec![(0, vec![2]), (0, vec![0, 0])],
                },
                Term {
                    coef: dl.clone(),
                    factors: vec![(0, vec![0]), (0, vec![1, 2])],
                },
                Term {
                    coef: Expr::neg(dl),
                    factors: vec![(0, vec![1]), (0, vec![0, 2])],
                },
                Term {
                    coef: l2p,
                    factors: vec![(0, vec![0]), (0, vec![2])],
                },
            ]]
        }
        EquationSymbol::C0 => vec![vec![
            Term {
                coef: Expr::var("x2"),
                factors: vec![(0, vec![0]), (0, vec![1, 1])],
            },
            Term {
                coef: Expr::neg(Expr::var("x2")),
                factors: vec![(0, vec![1]), (0, vec![0, 1])],
            },
            Term {
                coef: Expr::one(),
                factors: vec![(0, vec![2]), (0, vec![1, 1])],
            },
            Term {
                coef: Expr::int(-1),
                factors: vec![(0, vec![1]), (0, vec![1, 2])],
            },
            Term {
                coef: Expr::one(),
                factors: vec![(0, vec![1]), (0, vec![0, 0])],
            },
            Term {
                coef: Expr::int(-1),
                factors: vec![(0, vec![0]), (0, vec![0, 1])],
            },
            Term {
                coef: Expr::one(),
                factors: vec![(0, vec![0]), (0, vec![1])],
            },
        ]],
        EquationSymbol::C1 => vec![vec![
            Term {
                coef: Expr::one(),
                factors: vec![(0, vec![0]), (0, vec![2, 0])],
            },
            Term {
                coef: Expr::int(-1),
                factors: vec![(0, vec![2]), (0, vec![0, 0])],
            },
            Term {
                coef: Expr::one(),
                factors: vec![(0, vec![1]), (0, vec![0, 1])],
            },
            Term {
                coef: Expr::int(-1),
                factors: vec![(0, vec![0]), (0, vec![1, 1])],
            },
        ]],
        EquationSymbol::K4 => {
            k4_family_terms(&[l[0].clone(), l[1].clone(), l[2].clone(), l[3].clone()])
        }
        // the boxed degenerate system: the K4 specialization divided by
        // its overall factor (lambda_3 - lambda_1)
        EquationSymbol::K4Deg => {
            let blocks: [(usize, usize, usize, usize, i64); 4] = [
                (0, 2, 1, 3, 1),
                (0, 3, 1, 2, -1),
                (1, 2, 0, 3, -1),
                (1, 3, 0, 2, 1),
            ];
            (0..2)
                .map(|i| {
                    let ib = 1 - i;
                    let mut out = Vec::new();
                    for (a, b, c, e, sign) in blocks.iter().cloned() {
                        out.push(Term {
                            coef: Expr::int(sign),
                            factors: vec![(i, vec![a, b]), (i, vec![c]), (ib, vec![e])],
                        });
                        out.push(Term {
                            coef: Expr::int(-sign),
                            factors: vec![(i, vec![a, b]), (ib, vec![c]), (i, vec![e])],
                        });
                    }
                    out
                })
                .collect()
        }
    }
}

fn deriv(f: &Expr, chart: &Chart, multi: &[usize]) -> Expr {
    let mut out = f.clone();
    for &i in multi {
        out = out.diff(&chart.vars[i]);
    }
    out
}

/// Symbolic residual expressions (one per equation of the system).
pub fn residual_exprs(eq: &EquationSpec, fs: &[Expr]) -> Result<Vec<Expr>, KwError> {
    if fs.len() != eq.n_funcs() {
        return Err(KwError::DimensionMismatch(format!(
            "{:?} constrains {} function(s), got {}",
            eq.symbol,
            eq.n_funcs(),
            fs.len()
        )));
    }
    let chart = eq.chart();
    let mut out = Vec::new();
    for terms in equation_terms(eq) {
        let mut sum = Vec::new();
        for t in terms {
            let mut prod = vec![t.coef.clone()];
            for (fi, multi) in &t.factors {
                prod.push(deriv(&fs[*fi], &chart, multi));
            }
            sum.push(Expr::mul(prod));
        }
        out.push(simplify(&Expr::add(sum)));
    }
    Ok(out)
}

/// Rectangular grid data: uniformly spaced axes and one value array per
/// function, in row-major order (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridData {
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl GridData {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<Vec<f64>>) -> Result<Self, KwError> {
        let total: usize = axes.iter().map(|a| a.len()).product();
        for a in &axes {
            if a.len() < 2 {
                return Err(KwError::Invalid(
                    "each grid axis needs at least two nodes".to_string(),
                ));
            }
            let h = a[1] - a[0];
            for w in a.windows(2) {
                if ((w[1] - w[0]) - h).abs() > 1e-9 * (1.0 + h.abs()) {
                    return Err(KwError::Invalid(
                        "grid axes must be uniformly spaced".to_string(),
                    ));
                }
            }
        }
        for v in &values {
            if v.len() != total {
                return Err(KwError::DimensionMismatch(format!(
                    "value array has {} entries on a grid of {} nodes",
                    v.len(),
                    total
                )));
            }
        }
        if values.is_empty() {
            return Err(KwError::Invalid("grid carries no functions".to_string()));
        }
        Ok(GridData { axes, values })
    }

    /// Sample symbolic functions on a uniform grid.
    pub fn sample(
        chart: &Chart,
        fs: &[Expr],
        origin: &[f64],
        spacing: &[f64],
        shape: &[usize],
    ) -> Result<Self, KwError> {
        let dim = chart.dim();
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|k| (0..shape[k]).map(|i| origin[k] + spacing[k] * i as f64).collect())
            .collect();
        let total: usize = shape.iter().product();
        let mut values = vec![Vec::with_capacity(total); fs.len()];
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let point: BTreeMap<String, f64> = chart
                .vars
                .iter()
                .enumerate()
                .map(|(k, v)| (v.clone(), axes[k][idx[k]]))
                .collect();
            for (vi, f) in fs.iter().enumerate() {
                values[vi].push(f.eval_f64(&point)?);
            }
            // advance the row-major counter
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        GridData::new(axes, values)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a[1] - a[0]).collect()
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        let shape = self.shape();
        let mut out = 0;
        for k in 0..shape.len() {
            out = out * shape[k] + idx[k];
        }
        out
    }

    pub fn to_csv(&self, chart: &Chart) -> String {
        let dim = self.axes.len();
        let mut header: Vec<String> = chart.vars.clone();
        for i in 1..=self.values.len() {
            header.push(format!("f{}", i));
        }
        let mut out = header.join(",");
        out.push('\n');
        let shape = self.shape();
        let total: usize = shape.iter().product();
        let mut idx = vec![0usize; dim];
        for flat in 0..total {
            let mut row: Vec<String> = (0..dim)
                .map(|k| format!("{}", self.axes[k][idx[k]]))
                .collect();
            for v in &self.values {
                row.push(format!("{}", v[flat]));
            }
            out.push_str(&row.join(","));
            out.push('\n');
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }

    /// Parse a CSV produced by `to_csv`: coordinate columns first (their
    /// count inferred from the header names), then one column per
    /// function. Rows must come in row-major order.
    pub fn from_csv(src: &str) -> Result<Self, KwError> {
        let bad = |m: String| KwError::Invalid(format!("grid csv: {}", m));
        let mut lines = src.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty file".to_string()))?;
        let cols: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
        let dim = cols.iter().take_while(|c| !c.starts_with('f')).count();
        let nfun = cols.len() - dim;
        if dim == 0 || nfun == 0 {
            return Err(bad(format!("bad header `{}`", header)));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in lines {
            let row: Vec<f64> = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| bad(format!("`{}`: {}", s, e)))
                })
                .collect::<Result<_, _>>()?;
            if row.len() != cols.len() {
                return Err(bad(format!("row with {} fields", row.len())));
            }
            rows.push(row);
        }
        // axes: distinct coordinates per axis in order of appearance
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); dim];
        for row in &rows {
            for k in 0..dim {
                if !axes[k].iter().any(|&a| (a - row[k]).abs() < 1e-12) {
                    axes[k].push(row[k]);
                }
            }
        }
        let total: usize = axes.iter().map(|a| a.len()).product();
        if total != rows.len() {
            return Err(bad(format!(
                "{} rows do not fill a {:?} grid",
                rows.len(),
                axes.iter().map(|a| a.len()).collect::<Vec<_>>()
            )));
        }
        let values = (0..nfun)
            .map(|vi| rows.iter().map(|r| r[dim + vi]).collect())
            .collect();
        GridData::new(axes, values)
    }
}

/// Central-difference derivative of grid values at an interior node.
fn fd_deriv(g: &GridData, vals: &[f64], idx: &[usize], multi: &[usize]) -> f64 {
    let h = g.spacing();
    let at = |shift: &[(usize, i64)]| -> f64 {
        let mut j: Vec<usize> = idx.to_vec();
        for &(axis, by) in shift {
            j[axis] = (j[axis] as i64 + by) as usize;
        }
        vals[g.flat_index(&j)]
    };
    match multi {
        [a] => (at(&[(*a, 1)]) - at(&[(*a, -1)])) / (2.0 * h[*a]),
        [a, b] if a == b => {
            (at(&[(*a, 1)]) - 2.0 * at(&[]) + at(&[(*a, -1)])) / (h[*a] * h[*a])
        }
        [a, b] => {
            (at(&[(*a, 1), (*b, 1)]) - at(&[(*a, 1), (*b, -1)]) - at(&[(*a, -1), (*b, 1)])
                + at(&[(*a, -1), (*b, -1)]))
                / (4.0 * h[*a] * h[*b])
        }
        _ => f64::NAN,
    }
}

/// Second-order finite-difference residual fields on the interior nodes
/// (one boundary layer excluded), row-major over the interior shape.
pub fn residual_grid(eq: &EquationSpec, g: &GridData) -> Result<Vec<Vec<f64>>, KwError> {
    let dim = eq.dim();
    if g.axes.len() != dim || g.values.len() != eq.n_funcs() {
        return Err(KwError::DimensionMismatch(format!(
            "{:?} expects {} axes and {} function(s), grid has {} and {}",
            eq.symbol,
            dim,
            eq.n_funcs(),
            g.axes.len(),
            g.values.len()
        )));
    }
    let chart = eq.chart();
    let systems = equation_terms(eq);
    let shape = g.shape();
    let interior: Vec<usize> = shape.iter().map(|s| s.saturating_sub(2)).collect();
    if interior.iter().any(|&s| s == 0) {
        return Err(KwError::Invalid(
            "grid too small for interior residuals".to_string(),
        ));
    }
    let total: usize = interior.iter().product();
    let mut out = vec![Vec::with_capacity(total); systems.len()];
    let mut ii = vec![0usize; dim];
    for _ in 0..total {
        let idx: Vec<usize> = ii.iter().map(|&v| v + 1).collect();
        let point: BTreeMap<String, f64> = chart
            .vars
            .iter()
            .enumerate()
            .map(|(k, v)| (v.clone(), g.axes[k][idx[k]]))
            .collect();
        for (si, terms) in systems.iter().enumerate() {
            let mut sum = 0.0;
            for t in terms {
                let mut prod = t.coef.eval_f64(&point)?;
                for (fi, multi) in &t.factors {
                    prod *= fd_deriv(g, &g.values[*fi], &idx, multi);
                }
                sum += prod;
            }
            out[si].push(sum);
        }
        for k in (0..dim).rev() {
            ii[k] += 1;
            if ii[k] < interior[k] {
                break;
            }
            ii[k] = 0;
        }
    }
    Ok(out)
}

/// The lambda-family of annihilator 1-forms alpha^lambda of a 3D catalog
/// equation, with the parameter as a free variable named `lam_var`.
fn alpha_lambda_expr(eq: &EquationSpec, f: &Expr, lam_var: &str) -> OneForm {
    let chart = eq.chart();
    let lam = Expr::var(lam_var);
    let l = eq.lambda_exprs();
    let d = |i: usize| f.diff(&chart.vars[i]);
    let m = |a: &Expr| Expr::sub(a.clone(), lam.clone());
    let comps = match eq.symbol {
        EquationSymbol::A0 | EquationSymbol::A1 | EquationSymbol::A2 | EquationSymbol::A3 => {
            vec![
                Expr::mul(vec![m(&l[1]), m(&l[2]), d(0)]),
                Expr::mul(vec![m(&l[2]), m(&l[0]), d(1)]),
                Expr::mul(vec![m(&l[0]), m(&l[1]), d(2)]),
            ]
        }
        EquationSymbol::B0 | EquationSymbol::B1 | EquationSymbol::B2 | EquationSymbol::B3 => {
            let (m2, m3) = (m(&l[0]), m(&l[1]));
            vec![
                Expr::mul(vec![m2.clone(), m3.clone(), d(0)]),
                Expr::sub(
                    Expr::mul(vec![m2.clone(), m3.clone(), d(1)]),
                    Expr::mul2(m3, d(0)),
                ),
                Expr::mul(vec![m2.clone(), m2, d(2)]),
            ]
        }
        EquationSymbol::C0 => {
            let m3 = m(&l[0]);
            let m3sq = Expr::pow(m3.clone(), 2);
            vec![
                Expr::sub(
                    Expr::mul2(m3sq.clone(), d(0)),
                    Expr::mul2(m3.clone(), d(1)),
                ),
                Expr::mul2(m3sq.clone(), d(1)),
                Expr::add(vec![
                    Expr::neg(Expr::mul2(m3.clone(), d(0))),
                    Expr::mul2(
                        Expr::add2(Expr::mul2(Expr::var("x2"), m3), Expr::one()),
                        d(1),
                    ),
                    Expr::mul2(m3sq, d(2)),
                ]),
            ]
        }
        EquationSymbol::C1 => {
            let ma = m(&l[0]);
            let masq = Expr::pow(ma.clone(), 2);
            vec![
                Expr::mul2(masq.clone(), d(0)),
                Expr::sub(Expr::mul2(masq.clone(), d(1)), Expr::mul2(ma.clone(), d(0))),
                Expr::add(vec![
                    d(0),
                    Expr::neg(Expr::mul2(ma, d(1))),
                    Expr::mul2(masq, d(2)),
                ]),
            ]
        }
        _ => unreachable!("alpha^lambda is a 3D notion"),
    };
    OneForm::new(chart, comps)
}

/// Pointwise nondegeneracy of a solution: in 3D the three lambda
/// coefficients of alpha^lambda must be independent 1-forms; in 4D both
/// 2x2 Jacobian blocks D(f1,f2)/D(x1,x2) and D(f1,f2)/D(x3,x4) must be
/// invertible.
pub fn solution_nondegeneracy(
    eq: &EquationSpec,
    fs: &[Expr],
    point: &BTreeMap<String, f64>,
    tol: f64,
) -> Result<bool, KwError> {
    if fs.len() != eq.n_funcs() {
        return Err(KwError::DimensionMismatch(
            "wrong number of functions".to_string(),
        ));
    }
    let chart = eq.chart();
    if eq.dim() == 3 {
        let web = solution_coframe(eq, &fs[0])?;
        web.nondegenerate_at(point, tol)
    } else {
        for block in [[0usize, 1], [2, 3]] {
            let mut det = 1.0;
            let j: Vec<Vec<f64>> = fs
                .iter()
                .map(|f| {
                    block
                        .iter()
                        .map(|&k| f.diff(&chart.vars[k]).eval_f64(point))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<_, _>>()?;
            det *= j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() <= tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// The Veronese web of a 3D solution: coframe = lambda coefficients of
/// alpha^lambda.
fn solution_coframe(eq: &EquationSpec, f: &Expr) -> Result<VeroneseWeb, KwError> {
    let chart = eq.chart();
    let alpha = alpha_lambda_expr(eq, f, "lam");
    let policy = SamplePolicy::default();
    let mut rows = vec![Vec::new(); 3];
    for c in &alpha.components {
        let coeffs = lambda_poly_coeffs(c, "lam", 2, &policy)?;
        for (k, row) in rows.iter_mut().enumerate() {
            row.push(simplify(&coeffs[k]));
        }
    }
    let coframe = rows
        .into_iter()
        .map(|row| OneForm::new(chart.clone(), row))
        .collect();
    VeroneseWeb::new(chart, coframe)
}

/// A web built from a verified solution.
#[derive(Debug, Clone)]
pub enum SolutionWeb {
    Veronese(VeroneseWeb),
    Kronecker(KroneckerWebData),
}

/// Turn a solution of a catalog equation into its web. Verifies the
/// residual and the nondegeneracy condition of the corresponding
/// theorem.
pub fn web_from_solution(
    eq: &EquationSpec,
    fs: &[Expr],
    policy: &SamplePolicy,
) -> Result<SolutionWeb, KwError> {
    for r in residual_exprs(eq, fs)? {
        if let ZeroVerdict::NonZero { witness, value } = zero_test(&r, policy)? {
            return Err(KwError::Invalid(format!(
                "not a solution: residual {:.3e} at {:?}",
                value, witness
            )));
        }
    }
    let chart = eq.chart();
    // nondegeneracy at sampled points
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed ^ 0x7064);
    let mut witness_ok = false;
    for _ in 0..policy.samples {
        let point: BTreeMap<String, f64> = chart
            .vars
            .iter()
            .map(|v| (v.clone(), rng.gen_range(-policy.box_bound..policy.box_bound)))
            .collect();
        match solution_nondegeneracy(eq, fs, &point, policy.tol) {
            Ok(true) => {
                witness_ok = true;
                break;
            }
            _ => continue,
        }
    }
    if !witness_ok {
        return Err(KwError::Invalid(
            "degenerate solution: nondegeneracy fails at all sample points".to_string(),
        ));
    }
    if eq.dim() == 3 {
        return Ok(SolutionWeb::Veronese(solution_coframe(eq, &fs[0])?));
    }
    // 4D: T F_infty = <df1, df2>^perp, spanned by
    // Z_a = e_a - B^{-1} M[:, a] over the (x3, x4) block, with
    // M = [df1; df2] and B its last two columns; the second morphism is
    // N Z_a with N = diag(lambda).
    let m: Vec<Vec<Expr>> = fs
        .iter()
        .map(|f| chart.vars.iter().map(|v| f.diff(v)).collect())
        .collect();
    let b: Vec<Vec<Expr>> = (0..2).map(|i| vec![m[i][2].clone(), m[i][3].clone()]).collect();
    let b_inv = sym_inverse(&b, policy)
        .map_err(|_| KwError::Invalid("degenerate solution: D(f1,f2)/D(x3,x4) singular".into()))?;
    let lambdas = eq.lambda_exprs();
    let mut phi1 = Vec::new();
    let mut phi2 = Vec::new();
    for a in 0..2 {
        let mut z = vec![Expr::zero(); 4];
        z[a] = Expr::one();
        for r in 0..2 {
            // tail component x_{r+3} of Z_a
            let mut s = Vec::new();
            for c in 0..2 {
                s.push(Expr::mul2(b_inv[r][c].clone(), m[c][a].clone()));
            }
            z[r + 2] = simplify(&Expr::neg(Expr::add(s)));
        }
        let nz: Vec<Expr> = z
            .iter()
            .zip(&lambdas)
            .map(|(c, l)| Expr::mul2(l.clone(), c.clone()))
            .collect();
        phi1.push(z);
        phi2.push(nz);
    }
    Ok(SolutionWeb::Kronecker(KroneckerWebData::new(
        chart, phi1, phi2, policy,
    )?))
}

/// One row of the static catalog.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub symbol: EquationSymbol,
    pub dim: usize,
    pub param_count: usize,
    pub coordinate_lambdas: &'static [usize],
    pub description: &'static str,
}

pub fn catalog() -> Vec<CatalogEntry> {
    use EquationSymbol::*;
    let entry = |symbol: EquationSymbol, description: &'static str| CatalogEntry {
        symbol,
        dim: symbol.dim(),
        param_count: symbol.param_count(),
        coordinate_lambdas: symbol.coordinate_lambdas(),
        description,
    };
    vec![
        entry(A0, "diagonal with three coordinate eigenvalues"),
        entry(A1, "diagonal, eigenvalues (x1, x2, a3)"),
        entry(A2, "diagonal, eigenvalues (x1, a2, a3)"),
        entry(A3, "diagonal with constant eigenvalues: the Hirota equation"),
        entry(B0, "one 2x2 Jordan-type block, eigenvalues (x2, x3)"),
        entry(B1, "one 2x2 Jordan-type block, eigenvalues (x2, a3)"),
        entry(B2, "one 2x2 Jordan-type block, eigenvalues (a2, x3)"),
        entry(B3, "one 2x2 Jordan-type block, eigenvalues (a2, a3)"),
        entry(C0, "single 3x3 block, eigenvalue x3"),
        entry(C1, "single 3x3 block, constant eigenvalue a3"),
        entry(K4, "four distinct eigenvalues in R^4: system on f1, f2"),
        entry(K4Deg, "two double eigenvalues in R^4: 3-web type system"),
    ]
}

/// Scale a rational parameter list to f64 (for grids and reports).
pub fn params_f64(eq: &EquationSpec) -> Vec<f64> {
    eq.params.iter().map(rat_to_f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat_int;
    use crate::webs::{
        kronecker_pno_from_data, pno_from_web, web_integrability, IntegrabilityMode,
    };

    fn policy() -> SamplePolicy {
        SamplePolicy::default()
    }

    fn hirota123() -> EquationSpec {
        EquationSpec::new(
            EquationSymbol::A3,
            vec![rat_int(1), rat_int(2), rat_int(3)],
        )
        .unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(EquationSpec::new(EquationSymbol::A3, vec![rat_int(1), rat_int(1), rat_int(3)])
            .is_err());
        assert!(EquationSpec::new(EquationSymbol::A0, vec![rat_int(1)]).is_err());
        assert!(EquationSpec::new(EquationSymbol::K4Deg, vec![rat_int(2), rat_int(2)]).is_err());
        let h =
            EquationSpec::hirota_from_coefficients([rat_int(1), rat_int(2), rat_int(-3)]).unwrap();
        assert_eq!(h.symbol, EquationSymbol::A3);
        // lambda differences reproduce the coefficients
        let l = params_f64(&h);
        assert_eq!(l[1] - l[2], 1.0);
        assert_eq!(l[2] - l[0], 2.0);
        assert_eq!(l[0] - l[1], -3.0);
        assert!(EquationSpec::hirota_from_coefficients([rat_int(1), rat_int(2), rat_int(3)])
            .is_err());
    }

    #[test]
    fn hirota_symbolic_residuals() {
        let eq = hirota123();
        let chart = eq.chart();
        let lin = chart.parse("x1 + x2 + x3").unwrap();
        let r = residual_exprs(&eq, &[lin]).unwrap();
        assert!(r[0].is_zero_literal() || zero_test(&r[0], &policy()).unwrap().is_proven());

        let expf = chart.parse("exp(x1 + x2 + x3)").unwrap();
        let r = residual_exprs(&eq, &[expf]).unwrap();
        assert!(zero_test(&r[0], &policy()).unwrap().is_zero());

        // residual of x1^2 + x2 x3 collapses to (l2 - l3) * 2 x1 = -2 x1
        let bad = chart.parse("x1^2 + x2*x3").unwrap();
        let r = residual_exprs(&eq, &[bad]).unwrap();
        assert!(matches!(
            zero_test(&r[0], &policy()).unwrap(),
            ZeroVerdict::NonZero { .. }
        ));
        let diff = Expr::sub(r[0].clone(), chart.parse("-2*x1").unwrap());
        assert!(zero_test(&diff, &policy()).unwrap().is_proven());
    }

    #[test]
    fn a_family_specializes_to_hirota() {
        // substituting the constants of A3 into the generic A-family
        // residual (the A0 shape) reproduces the Hirota residual
        let eq0 = EquationSpec::new(EquationSymbol::A0, vec![]).unwrap();
        let eq3 = hirota123();
        let chart = eq0.chart();
        let f = chart.parse("x1*x2 + x3^2 + exp(x2)").unwrap();
        let generic = residual_exprs(&eq0, &[f.clone()]).unwrap();
        let specialized = generic[0]
            .substitute("x1", &Expr::int(1))
            .substitute("x2", &Expr::int(2))
            .substitute("x3", &Expr::int(3));
        // substituting coordinates is only legitimate in the lambda
        // coefficients, so compare against the A3 residual of the f with
        // the same derivative values -- instead verify term-by-term on a
        // derivative-generic function via the builder
        let _ = specialized;
        let l3: [Expr; 3] = [Expr::int(1), Expr::int(2), Expr::int(3)];
        let built = a_family_terms(&l3);
        let from_a3 = equation_terms(&eq3);
        assert_eq!(built.len(), from_a3[0].len());
        for (a, b) in built.iter().zip(&from_a3[0]) {
            assert_eq!(a.factors, b.factors);
            let d = Expr::sub(a.coef.clone(), b.coef.clone());
            assert!(zero_test(&d, &policy()).unwrap().is_proven());
        }
        let ra = residual_exprs(&eq3, &[f.clone()]).unwrap();
        let rb = {
            let chart = eq3.chart();
            let terms = a_family_terms(&l3);
            let mut sum = Vec::new();
            for t in terms {
                let mut prod = vec![t.coef.clone()];
                for (_, multi) in &t.factors {
                    prod.push(deriv(&f, &chart, multi));
                }
                sum.push(Expr::mul(prod));
            }
            Expr::add(sum)
        };
        let d = Expr::sub(ra[0].clone(), rb);
        assert!(zero_test(&d, &policy()).unwrap().is_zero());
    }

    #[test]
    fn k4_reduces_to_k4deg() {
        // with lambda = (a, a, b, b) the K4 system equals (b - a) times
        // the degenerate system
        let (a, b) = (Expr::int(2), Expr::int(5));
        let k4 = k4_family_terms(&[a.clone(), a.clone(), b.clone(), b.clone()]);
        let eq = EquationSpec::new(EquationSymbol::K4Deg, vec![rat_int(2), rat_int(5)]).unwrap();
        let chart = eq.chart();
        let fs = [
            chart.parse("x1*x4 + exp(x2) + x3^2").unwrap(),
            chart.parse("x2*x3 + x1^2 + x4").unwrap(),
        ];
        let deg = residual_exprs(&eq, &fs).unwrap();
        for i in 0..2 {
            let mut sum = Vec::new();
            for t in &k4[i] {
                let mut prod = vec![t.coef.clone()];
                for (fi, multi) in &t.factors {
                    prod.push(deriv(&fs[*fi], &chart, multi));
                }
                sum.push(Expr::mul(prod));
            }
            let reduced = Expr::add(sum);
            let scaled = Expr::mul2(Expr::sub(b.clone(), a.clone()), deg[i].clone());
            let d = Expr::sub(reduced, scaled);
            assert!(zero_test(&d, &policy()).unwrap().is_zero());
        }
    }

    #[test]
    fn k4deg_trivial_pair() {
        let eq = EquationSpec::new(EquationSymbol::K4Deg, vec![rat_int(1), rat_int(2)]).unwrap();
        let chart = eq.chart();
        let fs = [
            chart.parse("x1 + x3").unwrap(),
            chart.parse("x2 + x4").unwrap(),
        ];
        let r = residual_exprs(&eq, &fs).unwrap();
        for ri in &r {
            assert!(zero_test(ri, &policy()).unwrap().is_proven());
        }
        let origin: BTreeMap<String, f64> =
            chart.vars.iter().map(|v| (v.clone(), 0.3)).collect();
        assert!(solution_nondegeneracy(&eq, &fs, &origin, 1e-9).unwrap());
    }

    #[test]
    fn equivalence_relation_stability() {
        let eq = hirota123();
        let chart = eq.chart();
        // postcomposition with psi(t) = t^3 + t
        let f = chart.parse("exp(x1 + x2 + x3)").unwrap();
        let g = Expr::add2(Expr::pow(f.clone(), 3), f.clone());
        let r = residual_exprs(&eq, &[g]).unwrap();
        assert!(zero_test(&r[0], &policy()).unwrap().is_zero());
        // precomposition x_i -> x_i^3 + x_i
        let h = chart
            .parse("exp(x1^3 + x1 + x2^3 + x2 + x3^3 + x3)")
            .unwrap();
        let r = residual_exprs(&eq, &[h]).unwrap();
        assert!(zero_test(&r[0], &policy()).unwrap().is_zero());
    }

    #[test]
    fn other_catalog_residuals_on_simple_solutions() {
        // functions with no mixed second derivatives and no repeated-index
        // obstructions solve several catalog equations trivially; verify a
        // couple of hand-checked cases
        let c1 = EquationSpec::new(EquationSymbol::C1, vec![rat_int(2)]).unwrap();
        let chart = c1.chart();
        // C1: f1 f31 - f3 f11 + f2 f12 - f1 f22 with f = x1 + x2 + x3:
        // all second derivatives vanish
        let f = chart.parse("x1 + x2 + x3").unwrap();
        let r = residual_exprs(&c1, &[f]).unwrap();
        assert!(zero_test(&r[0], &policy()).unwrap().is_proven());
        // C0 includes the zeroth-order term f1 f2, nonzero on the same f
        let c0 = EquationSpec::new(EquationSymbol::C0, vec![]).unwrap();
        let f = chart.parse("x1 + x2 + x3").unwrap();
        let r = residual_exprs(&c0, &[f]).unwrap();
        assert!(matches!(
            zero_test(&r[0], &policy()).unwrap(),
            ZeroVerdict::NonZero { .. }
        ));
        // B3: for f = x1 + x3 the equation reduces to
        // f1 f13 - f3 f11 + l2'(x2) f1 f3 = 0 + 0 with l2' = 0
        let b3 = EquationSpec::new(EquationSymbol::B3, vec![rat_int(1), rat_int(4)]).unwrap();
        let f = chart.parse("x1 + x3").unwrap();
        let r = residual_exprs(&b3, &[f.clone()]).unwrap();
        assert!(zero_test(&r[0], &policy()).unwrap().is_proven());
        // B0 has l2' = 1, so the same f leaves the residual f1 f3 = 1
        let b0 = EquationSpec::new(EquationSymbol::B0, vec![]).unwrap();
        let r = residual_exprs(&b0, &[f]).unwrap();
        let d = Expr::sub(r[0].clone(), Expr::one());
        assert!(zero_test(&d, &policy()).unwrap().is_proven());
    }

    #[test]
    fn web_from_solution_examples() {
        let eq = hirota123();
        let chart = eq.chart();
        let f = chart.parse("exp(x1 + x2 + x3)").unwrap();
        let web = match web_from_solution(&eq, &[f], &policy()).unwrap() {
            SolutionWeb::Veronese(w) => w,
            _ => panic!("expected a Veronese web"),
        };
        assert!(web_integrability(&web, IntegrabilityMode::Full, &policy())
            .unwrap()
            .is_zero());
        // F_{lambda_i} = {x_i = const}: alpha^{lambda_i} proportional to dx_i
        for (i, li) in [1i64, 2, 3].iter().enumerate() {
            let a = web.alpha_lambda(&Expr::int(*li));
            for (j, c) in a.components.iter().enumerate() {
                let v = zero_test(c, &policy()).unwrap();
                if j == i {
                    assert!(matches!(v, ZeroVerdict::NonZero { .. }));
                } else {
                    assert!(v.is_zero());
                }
            }
        }
        // and the web is the one the PNO machinery accepts
        assert!(pno_from_web(&web, &policy()).is_ok());

        // degenerate: f = x1 x2 has f_{x3} = 0
        let fdeg = chart.parse("x1*x2").unwrap();
        assert!(matches!(
            web_from_solution(&eq, &[fdeg], &policy()),
            Err(KwError::Invalid(_))
        ));
        // non-solution is rejected before web construction
        let fbad = chart.parse("x1^2 + x2*x3").unwrap();
        assert!(matches!(
            web_from_solution(&eq, &[fbad], &policy()),
            Err(KwError::Invalid(_))
        ));
    }

    #[test]
    fn k4deg_web_from_trivial_pair() {
        let eq = EquationSpec::new(EquationSymbol::K4Deg, vec![rat_int(1), rat_int(2)]).unwrap();
        let chart = eq.chart();
        let fs = [
            chart.parse("x1 + x3").unwrap(),
            chart.parse("x2 + x4").unwrap(),
        ];
        let data = match web_from_solution(&eq, &fs, &policy()).unwrap() {
            SolutionWeb::Kronecker(k) => k,
            _ => panic!("expected Kronecker data"),
        };
        let p = kronecker_pno_from_data(&data, &policy()).unwrap();
        assert_eq!(p.rank(), 2);
        // F_{lambda_1} = {x1, x2 = const}: images - lambda_1 * spanning
        // land in <d3, d4>
        for (z, nz) in p.spanning.iter().zip(&p.images) {
            let shifted = nz.add(&z.scale(&Expr::int(-1)));
            for c in &shifted.components[..2] {
                assert!(zero_test(c, &policy()).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn fd_residual_second_order() {
        let eq = hirota123();
        let chart = eq.chart();
        // a solution of the form g(x1+x2+x3); unequal axis spacings keep
        // the finite-difference truncation terms from cancelling
        let f = chart.parse("(x1 + x2 + x3)^3").unwrap();
        let max_res = |nodes: usize| -> f64 {
            let h = 0.5 / (nodes - 1) as f64;
            let g = GridData::sample(
                &chart,
                std::slice::from_ref(&f),
                &[0.1, 0.2, 0.3],
                &[h, 1.5 * h, 0.5 * h],
                &[nodes, nodes, nodes],
            )
            .unwrap();
            residual_grid(&eq, &g).unwrap()[0]
                .iter()
                .fold(0.0f64, |m, r| m.max(r.abs()))
        };
        let (coarse, fine) = (max_res(11), max_res(21));
        let order = (coarse / fine).log2();
        assert!(order >= 1.9, "order {}", order);
        // and an exact-to-the-grid solution: linear f has zero residual
        let lin = chart.parse("x1 + 2*x2 - x3").unwrap();
        let g = GridData::sample(
            &chart,
            std::slice::from_ref(&lin),
            &[0.0, 0.0, 0.0],
            &[0.1, 0.1, 0.1],
            &[5, 5, 5],
        )
        .unwrap();
        for r in &residual_grid(&eq, &g).unwrap()[0] {
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn grid_csv_round_trip() {
        let eq = EquationSpec::new(EquationSymbol::K4Deg, vec![rat_int(1), rat_int(2)]).unwrap();
        let chart = eq.chart();
        let fs = [
            chart.parse("x1 + x3^2").unwrap(),
            chart.parse("x2*x4").unwrap(),
        ];
        let g = GridData::sample(
            &chart,
            &fs,
            &[0.0, 0.1, 0.2, 0.3],
            &[0.1, 0.1, 0.2, 0.1],
            &[3, 4, 3, 2],
        )
        .unwrap();
        let csv = g.to_csv(&chart);
        assert!(csv.starts_with("x1,x2,x3,x4,f1,f2\n"));
        let back = GridData::from_csv(&csv).unwrap();
        assert_eq!(back.shape(), g.shape());
        for (a, b) in g.values.iter().zip(&back.values) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert!(GridData::from_csv("x1,f1\n0,1\n0,2\n").is_err());
    }

    #[test]
    fn catalog_entries() {
        let cat = catalog();
        assert_eq!(cat.len(), 12);
        let by = |s: EquationSymbol| cat.iter().find(|e| e.symbol == s).unwrap().clone();
        assert_eq!(by(EquationSymbol::B1).coordinate_lambdas, &[2]);
        assert_eq!(by(EquationSymbol::A0).coordinate_lambdas, &[1, 2, 3]);
        assert_eq!(by(EquationSymbol::A3).coordinate_lambdas, &[] as &[usize]);
        assert_eq!(by(EquationSymbol::K4).dim, 4);
        assert_eq!(by(EquationSymbol::A2).param_count, 2);
        // C1 alpha^lambda carries (a3 - lambda)^2 coefficients
        let c1 = EquationSpec::new(EquationSymbol::C1, vec![rat_int(3)]).unwrap();
        let f = c1.chart().parse("x1 + x2 + x3").unwrap();
        let a = alpha_lambda_expr(&c1, &f, "lam");
        let coeffs = lambda_poly_coeffs(&a.components[0], "lam", 2, &policy()).unwrap();
        // (3 - lam)^2 = 9 - 6 lam + lam^2
        for (c, want) in coeffs.iter().zip([9i64, -6, 1]) {
            let d = Expr::sub(c.clone(), Expr::int(want));
            assert!(zero_test(&d, &policy()).unwrap().is_proven());
        }
    }

    #[test]
    fn b_and_c_webs_from_solutions() {
        // B3 with f = x1 + x3: verified solution above; its web must pass
        // full integrability
        let b3 = EquationSpec::new(EquationSymbol::B3, vec![rat_int(1), rat_int(4)]).unwrap();
        let f = b3.chart().parse("x1 + x3").unwrap();
        match web_from_solution(&b3, &[f], &policy()) {
            Ok(SolutionWeb::Veronese(w)) => {
                assert!(web_integrability(&w, IntegrabilityMode::Full, &policy())
                    .unwrap()
                    .is_zero());
            }
            Ok(_) => panic!("expected Veronese"),
            Err(e) => panic!("{}", e),
        }
    }
}
