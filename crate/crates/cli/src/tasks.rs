//! Task pipelines behind `run`: each consumes a validated payload and a
//! policy and assembles a report.

use crate::manifest::{self, Policy, TaskKind};
use crate::report::{block_structure_json, Item, Report};
use kronweb::error::KwError;
use kronweb::expr::{zero_test, SamplePolicy};
use kronweb::linalg::Mat;
use kronweb::nijenhuis::{extension_from_selfpropelled, is_geometric_pno, GeometricPNO};
use kronweb::pde::{web_from_solution, EquationSpec, EquationSymbol, SolutionWeb};
use kronweb::pencil::Pencil;
use kronweb::poisson::{
    bilagrangian_at, check_compatibility, check_jacobi, pointwise_classification, up_construction,
    PoissonBivector,
};
use kronweb::rat::{parse_rat, GRat, Rat};
use kronweb::webs::{
    selfpropelled_residual, web_integrability, IntegrabilityMode, VeroneseWeb,
};
use serde_json::{json, Value};
use std::collections::BTreeMap;

/// Payload or input-shape problems: reported with exit code 2.
pub struct ValidationError(pub String);

/// Computation failures inside the toolkit: reported with exit code 3.
pub struct InternalError(pub String);

pub enum TaskError {
    Validation(ValidationError),
    Internal(InternalError),
}

impl From<KwError> for TaskError {
    fn from(e: KwError) -> Self {
        TaskError::Internal(InternalError(e.to_string()))
    }
}

fn invalid(msg: impl Into<String>) -> TaskError {
    TaskError::Validation(ValidationError(msg.into()))
}

pub fn sample_policy(p: &Policy) -> SamplePolicy {
    SamplePolicy {
        samples: p.samples,
        tol: p.tol,
        seed: p.seed,
        ..SamplePolicy::default()
    }
}

fn payload<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T, TaskError> {
    serde_json::from_value(v.clone()).map_err(|e| invalid(format!("payload: {}", e)))
}

pub fn run_task(kind: TaskKind, raw: &Value, policy: &Policy) -> Result<Report, TaskError> {
    let mut report = Report::new(kind.name(), policy);
    let sp = sample_policy(policy);
    match kind {
        TaskKind::Jk => {
            let p: manifest::JkPayload = payload(raw)?;
            let pencil = Pencil::new(parse_mat(&p.s1)?, parse_mat(&p.s2)?)
                .map_err(|e| invalid(e.to_string()))?;
            let bs = pencil.block_structure();
            report.push(Item::info("block-structure", block_structure_json(&bs)));
        }
        TaskKind::PnoCheck => {
            let p: manifest::PnoCheckPayload = payload(raw)?;
            let pno = GeometricPNO::from_json(&p.pno, &sp).map_err(|e| invalid(e.to_string()))?;
            let (ok, witness) = is_geometric_pno(&pno, &sp)?;
            report.push(Item::check(
                "partial-nijenhuis-axioms",
                ok,
                json!({"rank": pno.rank(), "failing_pair": witness}),
            ));
        }
        TaskKind::WebCheck => {
            let p: manifest::WebCheckPayload = payload(raw)?;
            let web = VeroneseWeb::from_json(&p.web).map_err(|e| invalid(e.to_string()))?;
            let mode = match p.mode.as_deref() {
                None | Some("sampled") => IntegrabilityMode::sampled_default(web.n()),
                Some("full") => IntegrabilityMode::Full,
                Some(other) => return Err(invalid(format!("unknown mode `{}`", other))),
            };
            let v = web_integrability(&web, mode, &sp)?;
            report.push(Item::verdict("integrability", &v));
        }
        TaskKind::PdeResidual => {
            let p: manifest::PdePayload = payload(raw)?;
            let (eq, fs) = parse_equation(&p)?;
            for (i, r) in kronweb::pde::residual_exprs(&eq, &fs)?.iter().enumerate() {
                let v = zero_test(r, &sp)?;
                report.push(Item::verdict(&format!("residual-{}", i + 1), &v));
            }
        }
        TaskKind::WebFromSolution => {
            let p: manifest::PdePayload = payload(raw)?;
            let (eq, fs) = parse_equation(&p)?;
            match web_from_solution(&eq, &fs, &sp).map_err(|e| invalid(e.to_string()))? {
                SolutionWeb::Veronese(web) => {
                    let v = web_integrability(
                        &web,
                        IntegrabilityMode::sampled_default(web.n()),
                        &sp,
                    )?;
                    report.push(Item::info("web", web.to_json()));
                    report.push(Item::verdict("integrability", &v));
                }
                SolutionWeb::Kronecker(k) => {
                    let rows = |m: &Vec<Vec<kronweb::expr::Expr>>| -> Vec<Vec<String>> {
                        m.iter()
                            .map(|r| r.iter().map(|e| e.to_string()).collect())
                            .collect()
                    };
                    report.push(Item::info(
                        "kronecker-data",
                        json!({
                            "chart": k.chart.vars,
                            "phi1": rows(&k.phi1),
                            "phi2": rows(&k.phi2),
                        }),
                    ));
                }
            }
        }
        TaskKind::SelfPropelled => {
            let p: manifest::SelfPropelledPayload = payload(raw)?;
            let web = VeroneseWeb::from_json(&p.web).map_err(|e| invalid(e.to_string()))?;
            let phi = web.chart.parse(&p.phi).map_err(|e| invalid(e.to_string()))?;
            for (k, r) in selfpropelled_residual(&web, &phi, &sp)?.iter().enumerate() {
                let v = zero_test(r, &sp)?;
                report.push(Item::verdict(&format!("chain-residual-{}", k), &v));
            }
        }
        TaskKind::Extend => {
            let p: manifest::ExtendPayload = payload(raw)?;
            let pno = GeometricPNO::from_json(&p.pno, &sp).map_err(|e| invalid(e.to_string()))?;
            let phis: Vec<_> = p
                .phis
                .iter()
                .map(|s| pno.chart.parse(s))
                .collect::<Result<_, _>>()
                .map_err(|e: KwError| invalid(e.to_string()))?;
            let phis: [kronweb::expr::Expr; 3] = phis.try_into().unwrap();
            let (tensor, torsion) =
                extension_from_selfpropelled(&pno, &phis, &sp).map_err(|e| invalid(e.to_string()))?;
            let entries: Vec<Vec<String>> = tensor
                .entries
                .iter()
                .map(|r| r.iter().map(|e| e.to_string()).collect())
                .collect();
            report.push(Item::info("extension", json!({"entries": entries})));
            report.push(Item::verdict("torsion", &torsion));
        }
        TaskKind::UpConstruct => {
            let p: manifest::UpConstructPayload = payload(raw)?;
            let pno = GeometricPNO::from_json(&p.pno, &sp).map_err(|e| invalid(e.to_string()))?;
            let (b1, b2) = up_construction(&pno, &sp).map_err(|e| invalid(e.to_string()))?;
            report.push(Item::info("eta1", b1.to_json()));
            report.push(Item::info("eta2", b2.to_json()));
            report.push(Item::verdict("jacobi-eta1", &check_jacobi(&b1, &sp)?));
            report.push(Item::verdict("jacobi-eta2", &check_jacobi(&b2, &sp)?));
            report.push(Item::verdict(
                "compatibility",
                &check_compatibility(&b1, &b2, &sp)?,
            ));
        }
        TaskKind::ClassifyPair => {
            let p: manifest::ClassifyPairPayload = payload(raw)?;
            let b1 = PoissonBivector::from_json(&p.p1).map_err(|e| invalid(e.to_string()))?;
            let b2 = PoissonBivector::from_json(&p.p2).map_err(|e| invalid(e.to_string()))?;
            let point = parse_point(&p.point)?;
            let bs = pointwise_classification(&b1, &b2, &point)
                .map_err(|e| invalid(e.to_string()))?;
            report.push(Item::info("block-structure", block_structure_json(&bs)));
            let bil = bilagrangian_at(&b1, &b2, &point, policy.seed)?;
            let cols: Vec<Vec<String>> = (0..bil.cols)
                .map(|j| (0..bil.rows).map(|i| bil[(i, j)].to_string()).collect())
                .collect();
            report.push(Item::info(
                "bilagrangian",
                json!({"dimension": bil.cols, "basis": cols}),
            ));
        }
    }
    Ok(report)
}

fn parse_mat(rows: &[Vec<String>]) -> Result<Mat<GRat>, TaskError> {
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(invalid("matrix rows must be nonempty and equally long"));
    }
    let parsed: Vec<Vec<GRat>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|s| GRat::parse(s).map_err(|e| invalid(format!("`{}`: {}", s, e))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(Mat::from_rows(parsed))
}

fn parse_point(raw: &BTreeMap<String, String>) -> Result<BTreeMap<String, Rat>, TaskError> {
    raw.iter()
        .map(|(k, v)| {
            parse_rat(v)
                .map(|r| (k.clone(), r))
                .map_err(|e| invalid(format!("point entry `{}`: {}", v, e)))
        })
        .collect()
}

fn parse_symbol(name: &str) -> Result<EquationSymbol, TaskError> {
    use EquationSymbol::*;
    Ok(match name {
        "A0" => A0,
        "A1" => A1,
        "A2" => A2,
        "A3" => A3,
        "B0" => B0,
        "B1" => B1,
        "B2" => B2,
        "B3" => B3,
        "C0" => C0,
        "C1" => C1,
        "K4" => K4,
        "K4Deg" => K4Deg,
        other => return Err(invalid(format!("unknown equation symbol `{}`", other))),
    })
}

fn parse_equation(
    p: &manifest::PdePayload,
) -> Result<(EquationSpec, Vec<kronweb::expr::Expr>), TaskError> {
    let symbol = parse_symbol(&p.equation)?;
    let params: Vec<Rat> = p
        .params
        .iter()
        .map(|s| parse_rat(s).map_err(|e| invalid(format!("param `{}`: {}", s, e))))
        .collect::<Result<_, _>>()?;
    let eq = EquationSpec::new(symbol, params).map_err(|e| invalid(e.to_string()))?;
    let chart = eq.chart();
    let fs: Vec<_> = p
        .functions
        .iter()
        .map(|s| chart.parse(s).map_err(|e| invalid(format!("`{}`: {}", s, e))))
        .collect::<Result<_, _>>()?;
    if fs.len() != eq.n_funcs() {
        return Err(invalid(format!(
            "{} expects {} function(s), got {}",
            p.equation,
            eq.n_funcs(),
            fs.len()
        )));
    }
    Ok((eq, fs))
}
