//! Bundled worked examples: `demo <name>` runs a canned manifest or a
//! coded pipeline and assembles the same report format as `run`.

use crate::manifest::{Policy, TaskKind};
use crate::report::{block_structure_json, Item, Report};
use crate::tasks::{run_task, TaskError};
use kronweb::calculus::Chart;
use kronweb::expr::Expr;
use kronweb::nijenhuis::numeric_torsion_max;
use kronweb::pencil::{synthesize_pencil, BlockStructure, Eigenvalue};
use kronweb::poisson::{bilagrangian_at, pointwise_classification, up_construction};
use kronweb::rat::{rat_i64, rat_int, GRat, Rat};
use kronweb::webs::{fd_selfpropelled_residual, solve_selfpropelled, VeroneseWeb};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::collections::BTreeMap;

pub const DEMO_NAMES: &[&str] = &["hirota", "extension", "up-construct", "pencil"];

pub fn run_demo(name: &str, policy: &Policy) -> Result<Report, TaskError> {
    match name {
        "hirota" => hirota(policy),
        "extension" => extension(policy),
        "up-construct" => up_construct(policy),
        "pencil" => pencil(policy),
        other => Err(TaskError::Validation(crate::tasks::ValidationError(
            format!("unknown demo `{}`; available: {}", other, DEMO_NAMES.join(", ")),
        ))),
    }
}

fn merge(into: &mut Report, from: Report, prefix: &str) {
    for item in from.items {
        into.push(Item::check(
            &format!("{}/{}", prefix, item.name),
            item.passed,
            item.detail,
        ));
    }
}

/// Hirota equation with eigenvalues (1, 2, 3): residual of the
/// exponential solution and the induced Veronese web.
fn hirota(policy: &Policy) -> Result<Report, TaskError> {
    let mut report = Report::new("demo-hirota", policy);
    let payload = json!({
        "equation": "A3",
        "params": ["1", "2", "3"],
        "functions": ["exp(x1+x2+x3)"],
    });
    merge(
        &mut report,
        run_task(TaskKind::PdeResidual, &payload, policy)?,
        "residual",
    );
    merge(
        &mut report,
        run_task(TaskKind::WebFromSolution, &payload, policy)?,
        "web",
    );
    Ok(report)
}

/// Numeric value of a self-propelled function of the flat 3D web: the
/// root of x1 + phi x2 + phi^2 x3 = level, solved by Newton iteration
/// seeded at the level itself. Levels are integers here.
fn flat_phi(chart: &Chart, level: f64, x: &[f64]) -> Result<f64, TaskError> {
    let big_f = chart_with_lam(chart).parse("x1 + lam*x2 + lam^2*x3").unwrap();
    let small_f = Expr::rat(rat_int(level as i64));
    let sol = solve_selfpropelled(&big_f, &small_f, "lam", chart, &[x.to_vec()], level)
        .map_err(|e| TaskError::Internal(crate::tasks::InternalError(e.to_string())))?;
    Ok(sol[0])
}

fn chart_with_lam(chart: &Chart) -> Chart {
    let mut vars: Vec<&str> = chart.vars.iter().map(|s| s.as_str()).collect();
    vars.push("lam");
    Chart::new(&vars)
}

/// Full extension pipeline on the flat web: three Newton-solved
/// self-propelled functions, finite-difference chain residuals, numeric
/// functional independence, and the torsion of the companion-matrix
/// extension tensor.
fn extension(policy: &Policy) -> Result<Report, TaskError> {
    let mut report = Report::new("demo-extension", policy);
    let web = VeroneseWeb::flat(2);
    let chart = web.chart.clone();
    let sp = crate::tasks::sample_policy(policy);
    let levels = [1.0f64, 2.0, 3.0];
    let base = [0.3f64, 0.2, 0.4];

    // (a) finite-difference residuals of the self-propelled chain
    let h = 1e-5;
    let mut max_resid = 0.0f64;
    for level in levels {
        let phi = |x: &[f64]| flat_phi(&chart, level, x).unwrap_or(f64::NAN);
        let r = fd_selfpropelled_residual(&web, &phi, &base, h, &sp)
            .map_err(|e| TaskError::Internal(crate::tasks::InternalError(e.to_string())))?;
        for v in r {
            max_resid = max_resid.max(v.abs());
        }
    }
    report.push(Item::check(
        "fd-chain-residual",
        max_resid <= 1e-6,
        json!({"max": max_resid, "bound": 1e-6}),
    ));

    // (b) functional independence: Jacobian of (phi1, phi2, phi3)
    let mut jac = [[0.0f64; 3]; 3];
    for (r, level) in levels.iter().enumerate() {
        for c in 0..3 {
            let mut hi = base;
            let mut lo = base;
            hi[c] += h;
            lo[c] -= h;
            jac[r][c] =
                (flat_phi(&chart, *level, &hi)? - flat_phi(&chart, *level, &lo)?) / (2.0 * h);
        }
    }
    let det = jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1])
        - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
        + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0]);
    report.push(Item::check(
        "functional-independence",
        det.abs() > 1e-6,
        json!({"jacobian_det": det}),
    ));

    // (c) numeric torsion of the companion-matrix extension; for the flat
    // web the adapted frame is the coordinate frame
    let tensor = |p: [f64; 3]| -> [[f64; 3]; 3] {
        let phis: Vec<f64> = levels
            .iter()
            .map(|&lv| flat_phi(&chart, lv, &p).unwrap_or(f64::NAN))
            .collect();
        let (p1, p2, p3) = (phis[0], phis[1], phis[2]);
        [
            [0.0, 0.0, p1 * p2 * p3],
            [1.0, 0.0, -(p1 * p2 + p1 * p3 + p2 * p3)],
            [0.0, 1.0, p1 + p2 + p3],
        ]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut max_torsion = 0.0f64;
    for _ in 0..5 {
        let p = [
            base[0] + rng.gen_range(-0.05..0.05),
            base[1] + rng.gen_range(-0.05..0.05),
            base[2] + rng.gen_range(-0.05..0.05),
        ];
        max_torsion = max_torsion.max(numeric_torsion_max(tensor, p, 1e-4));
    }
    report.push(Item::check(
        "extension-torsion",
        max_torsion <= 1e-9,
        json!({"max": max_torsion, "bound": 1e-9}),
    ));
    Ok(report)
}

/// Up construction for the PNO E = <d/dx1>, N d/dx1 = d/dx2 on R^3.
fn up_construct(policy: &Policy) -> Result<Report, TaskError> {
    let mut report = Report::new("demo-up-construct", policy);
    let payload = json!({
        "pno": {
            "chart": ["x1", "x2", "x3"],
            "spanning": [["1", "0", "0"]],
            "images": [["0", "1", "0"]],
        }
    });
    merge(
        &mut report,
        run_task(TaskKind::UpConstruct, &payload, policy)?,
        "up",
    );

    let sp = crate::tasks::sample_policy(policy);
    let pno = kronweb::nijenhuis::GeometricPNO::from_json(&payload["pno"], &sp)
        .map_err(|e| TaskError::Internal(crate::tasks::InternalError(e.to_string())))?;
    let (b1, b2) = up_construction(&pno, &sp)
        .map_err(|e| TaskError::Internal(crate::tasks::InternalError(e.to_string())))?;
    let point: BTreeMap<String, Rat> = b1
        .chart
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), rat_i64(i as i64 + 1, 2)))
        .collect();
    let bs = pointwise_classification(&b1, &b2, &point)
        .map_err(|e| TaskError::Internal(crate::tasks::InternalError(e.to_string())))?;
    report.push(Item::check(
        "kronecker-type",
        bs.jordan.is_empty(),
        block_structure_json(&bs),
    ));
    let bil = bilagrangian_at(&b1, &b2, &point, policy.seed)
        .map_err(|e| TaskError::Internal(crate::tasks::InternalError(e.to_string())))?;
    report.push(Item::check(
        "bilagrangian-is-fiber",
        bil.cols == pno.rank(),
        json!({"dimension": bil.cols}),
    ));
    Ok(report)
}

/// Synthesize 50 random block structures and round-trip them through the
/// classification.
fn pencil(policy: &Policy) -> Result<Report, TaskError> {
    let mut report = Report::new("demo-pencil", policy);
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed ^ 0x70656e);
    let mut failures = Vec::new();
    let count = 50usize;
    for case in 0..count {
        let spec = random_structure(&mut rng);
        let p = synthesize_pencil(&spec, rng.gen());
        let got = p.block_structure();
        if got != spec {
            failures.push(json!({
                "case": case,
                "expected": block_structure_json(&spec),
                "got": block_structure_json(&got),
            }));
        }
    }
    report.push(Item::check(
        "round-trip",
        failures.is_empty(),
        json!({"count": count, "failures": failures}),
    ));
    Ok(report)
}

fn random_structure(rng: &mut ChaCha8Rng) -> BlockStructure {
    let mut budget = 8usize;
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut jordan: Vec<(Eigenvalue, Vec<usize>)> = Vec::new();
    let mut evs: Vec<Eigenvalue> = vec![Eigenvalue::Infinity];
    for v in [-2i64, 0, 1, 3] {
        evs.push(Eigenvalue::Finite(GRat::from_i64(v)));
    }
    while budget > 0 {
        match rng.gen_range(0..4) {
            0 => {
                let k = rng.gen_range(1..=budget.min(3));
                plus.push(k);
                budget -= k;
            }
            1 => {
                let k = rng.gen_range(1..=budget.min(3));
                if k + 1 <= budget {
                    minus.push(k);
                    budget -= k + 1;
                } else {
                    break;
                }
            }
            _ => {
                let k = rng.gen_range(1..=budget.min(3));
                let ev = evs[rng.gen_range(0..evs.len())].clone();
                match jordan.iter_mut().find(|(e, _)| *e == ev) {
                    Some((_, sizes)) => sizes.push(k),
                    None => jordan.push((ev, vec![k])),
                }
                budget -= k;
            }
        }
    }
    BlockStructure::new(plus, minus, jordan)
}
