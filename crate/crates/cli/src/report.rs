//! Deterministic JSON reports: one item per check or construction, with
//! verdict witnesses, and an overall pass flag.

use crate::manifest::Policy;
use kronweb::expr::ZeroVerdict;
use kronweb::pencil::BlockStructure;
use serde_json::{json, Value};

pub struct Report {
    pub task: String,
    pub policy: Policy,
    pub items: Vec<Item>,
}

pub struct Item {
    pub name: String,
    pub passed: bool,
    pub detail: Value,
}

impl Item {
    pub fn verdict(name: &str, v: &ZeroVerdict) -> Item {
        Item {
            name: name.to_string(),
            passed: v.is_zero(),
            detail: verdict_json(v),
        }
    }

    pub fn info(name: &str, detail: Value) -> Item {
        Item {
            name: name.to_string(),
            passed: true,
            detail,
        }
    }

    pub fn check(name: &str, passed: bool, detail: Value) -> Item {
        Item {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

impl Report {
    pub fn new(task: &str, policy: &Policy) -> Report {
        Report {
            task: task.to_string(),
            policy: policy.clone(),
            items: Vec::new(),
        }
    }

    pub fn push(&mut self, item: Item) {
        self.items.push(item);
    }

    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    /// Reports are byte-identical across runs at a fixed seed; wall-clock
    /// timing is therefore printed on the summary line, never stored here.
    pub fn to_json(&self) -> Value {
        json!({
            "schema": crate::manifest::SCHEMA_VERSION,
            "version": env!("CARGO_PKG_VERSION"),
            "task": self.task,
            "seed": self.policy.seed,
            "tol": self.policy.tol,
            "samples": self.policy.samples,
            "passed": self.passed(),
            "items": self.items.iter().map(|i| json!({
                "name": i.name,
                "passed": i.passed,
                "detail": i.detail,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn summary(&self) -> String {
        let mut lines = Vec::new();
        for i in &self.items {
            lines.push(format!(
                "  [{}] {}",
                if i.passed { "pass" } else { "FAIL" },
                i.name
            ));
        }
        lines.push(format!(
            "{}: {} ({} items)",
            self.task,
            if self.passed() { "pass" } else { "FAIL" },
            self.items.len()
        ));
        lines.join("\n")
    }
}

pub fn verdict_json(v: &ZeroVerdict) -> Value {
    match v {
        ZeroVerdict::ProvenZero => json!({"kind": "proven-zero"}),
        ZeroVerdict::ProbablyZero { samples, tol } => {
            json!({"kind": "probably-zero", "samples": samples, "tol": tol})
        }
        ZeroVerdict::NonZero { witness, value } => json!({
            "kind": "nonzero",
            "witness": witness.iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>(),
            "value": value,
        }),
    }
}

pub fn block_structure_json(bs: &BlockStructure) -> Value {
    json!({
        "display": bs.to_string(),
        "kronecker_plus": bs.kronecker_plus,
        "kronecker_minus": bs.kronecker_minus,
        "jordan": bs.jordan.iter().map(|(ev, sizes)| json!({
            "eigenvalue": ev.to_string(),
            "sizes": sizes,
        })).collect::<Vec<_>>(),
    })
}
