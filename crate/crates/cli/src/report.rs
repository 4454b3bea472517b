//! Result reports, as JSON or as a prose table.

use std::collections::BTreeMap;
use std::fmt::Write;

use qsdp::sdp::SolverDiagnostics;
use serde::Serialize;

use crate::problem::MatrixLiteral;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Feasible,
    Infeasible,
    /// Too close to the threshold to call.
    Marginal,
    Solved,
    /// A supplied certificate failed verification.
    Unverified,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Feasible | Outcome::Solved | Outcome::Unverified => 0,
            Outcome::Infeasible => 2,
            Outcome::Marginal => 3,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Outcome::Feasible => "feasible",
            Outcome::Infeasible => "infeasible",
            Outcome::Marginal => "marginal",
            Outcome::Solved => "solved",
            Outcome::Unverified => "unverified",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CertificateReport {
    /// `W = zI + Σ t_x M_x`.
    Measurement {
        z: f64,
        t: Vec<f64>,
        beta: f64,
        lambda_max: f64,
        t_l1: f64,
        valid: bool,
    },
    /// `W = zI + Σ_p H_p ⊗ I`.
    Marginal {
        z: f64,
        terms: BTreeMap<String, MatrixLiteral>,
        eps: f64,
        beta: f64,
        lambda_max: f64,
        norm: f64,
        valid: bool,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub status: String,
    pub iterations: usize,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl From<&SolverDiagnostics> for Diagnostics {
    fn from(d: &SolverDiagnostics) -> Self {
        Self {
            status: format!("{:?}", d.status),
            iterations: d.iterations,
            gap: d.gap,
            primal_residual: d.primal_residual,
            dual_residual: d.dual_residual,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Recheck {
    pub passed: bool,
    /// One line per arithmetic check.
    pub checks: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub label: String,
    pub state: MatrixLiteral,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub source: String,
    pub task: String,
    pub verdict: Outcome,
    pub values: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostics>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recheck: Option<Recheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub wall_time_s: f64,
}

impl Report {
    /// Exit status: a failed recheck counts as a numerical failure.
    pub fn exit_code(&self) -> i32 {
        match &self.recheck {
            Some(r) if !r.passed => 3,
            _ => self.verdict.exit_code(),
        }
    }

    pub fn to_prose(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k:<14}{v}");
        };
        line("task", self.task.clone());
        line("source", self.source.clone());
        line("verdict", self.verdict.as_str().into());
        for (k, v) in &self.values {
            line(k, format!("{v:.9}"));
        }
        for note in &self.notes {
            line("note", note.clone());
        }
        if let Some(c) = &self.certificate {
            match c {
                CertificateReport::Measurement {
                    z,
                    t,
                    beta,
                    lambda_max,
                    t_l1,
                    valid,
                } => {
                    line("certificate", format!("measurement ({})", validity(*valid)));
                    line("  z", format!("{z:.9}"));
                    line("  t", format_vec(t));
                    line("  beta", format!("{beta:.6e}"));
                    line("  lambda_max", format!("{lambda_max:.3e}"));
                    line("  |t|_1", format!("{t_l1:.9}"));
                }
                CertificateReport::Marginal {
                    z,
                    terms,
                    eps,
                    beta,
                    lambda_max,
                    norm,
                    valid,
                } => {
                    line("certificate", format!("marginal ({})", validity(*valid)));
                    line("  z", format!("{z:.9}"));
                    for (pair, h) in terms {
                        line(&format!("  H_{pair}"), format_matrix(h, 14));
                    }
                    line("  eps", format!("{eps:.3e}"));
                    line("  beta", format!("{beta:.6e}"));
                    line("  lambda_max", format!("{lambda_max:.3e}"));
                    line("  sum |H|", format!("{norm:.9}"));
                }
            }
        }
        for w in &self.witnesses {
            line(&w.label, format_matrix(&w.state, 14));
        }
        for d in &self.diagnostics {
            line(
                "solver",
                format!(
                    "{}, {} iterations, gap {:.2e}, residuals {:.2e} / {:.2e}",
                    d.status, d.iterations, d.gap, d.primal_residual, d.dual_residual
                ),
            );
        }
        if let Some(r) = &self.recheck {
            line("recheck", if r.passed { "passed" } else { "FAILED" }.into());
            for c in &r.checks {
                line("", c.clone());
            }
        }
        if let Some(seed) = self.seed {
            line("seed", seed.to_string());
        }
        line("wall time", format!("{:.3} s", self.wall_time_s));
        s
    }
}

fn validity(valid: bool) -> &'static str {
    if valid {
        "verified"
    } else {
        "NOT verified"
    }
}

fn format_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn format_entry(v: &[f64; 2]) -> String {
    // drop round-off so it does not print as -0.000000
    let clean = |x: f64| if x.abs() < 5e-7 { 0.0 } else { x };
    let (re, im) = (clean(v[0]), clean(v[1]));
    if im == 0.0 {
        format!("{re:>9.6}")
    } else {
        format!("{re:.4}{im:+.4}i")
    }
}

/// Rows on separate lines, continuation lines indented by `indent`.
fn format_matrix(m: &MatrixLiteral, indent: usize) -> String {
    let rows: Vec<String> = m
        .iter()
        .map(|r| r.iter().map(format_entry).collect::<Vec<_>>().join("  "))
        .collect();
    rows.join(&format!("\n{:indent$}", ""))
}
