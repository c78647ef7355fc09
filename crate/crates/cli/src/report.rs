use serde::Serialize;
use serde_json::Value;

use crossover::bounds::{BoundProfile, Lemma5Bound};
use crossover::efficiency::EfficiencyReport;
use crossover::table1::Table1Entry;
use crossover::verify::{BalanceReport, Certificate};

/// Top-level JSON document every command prints with `--format json`.
#[derive(Debug, Serialize)]
pub struct ReportEnvelope {
    pub command: &'static str,
    pub parameters: Value,
    pub results: Value,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: &'static str,
}

impl ReportEnvelope {
    pub fn new(command: &'static str, parameters: Value) -> Self {
        Self {
            command,
            parameters,
            results: Value::Null,
            warnings: Vec::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

pub fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.6}"))
}

pub fn certificate_text(c: &Certificate) -> String {
    let mut out = String::new();
    out.push_str(&format!("design      {}\n", c.design_id));
    out.push_str(&format!("r0          {}\n", c.r0));
    out.push_str(&format!("in class    {}\n", c.in_lambda));
    out.push_str(&format!("balanced    {}\n", c.totally_balanced));
    out.push_str(&format!("trace       {}\n", opt(c.a_criterion)));
    out.push_str(&format!("max var     {}\n", opt(c.mv_criterion)));
    out.push_str(&format!("bound at r0 {}\n", opt(c.bound_at_r0)));
    let best = c.best_r0.map_or_else(|| "n/a".into(), |r| r.to_string());
    out.push_str(&format!("min bound   {} (r0* = {best})\n", opt(c.min_bound)));
    out.push_str(&format!("symmetric   {}\n", c.completely_symmetric));
    out.push_str(&format!("verdict     {}\n", c.verdict.label()));
    out
}

pub fn balance_text(r: &BalanceReport) -> String {
    let mut out = String::new();
    for c in r.clauses() {
        out.push_str(&format!("{:<4} {:<10} {}", if c.holds { "ok" } else { "FAIL" }, c.id, c.description));
        if let Some(d) = &c.detail {
            out.push_str(&format!(" ({d})"));
        }
        out.push('\n');
    }
    for v in &r.lambda_violations {
        out.push_str(&format!("class violation: {v}\n"));
    }
    out
}

pub fn bound_text(b: &Lemma5Bound) -> String {
    format!("r0 {}  rt0 {}  x1 {:.6}  y1 {:.6}  bound {:.6}\n", b.r0, b.rt0, b.x1, b.y1, b.bound)
}

pub fn profile_text(p: &BoundProfile) -> String {
    let mut out = format!("t {}  p {}  n {}\n", p.t, p.p, p.n);
    for e in &p.entries {
        let mark = if e.r0 == p.best_r0 { " *" } else { "" };
        out.push_str(&format!("r0 {:>5}  bound {:.6}{mark}\n", e.r0, e.bound));
    }
    out.push_str(&format!("r0* = {}, min bound {:.6}\n", p.best_r0, p.min_bound));
    out
}

pub fn efficiency_text(e: &EfficiencyReport) -> String {
    let mut out = format!("t {}  p {}  n {}  r0 {}\n", e.t, e.p, e.n, e.r0);
    let ec = e.e_c.map_or_else(|| "n/a".into(), pct);
    out.push_str(&format!("e_c {ec}  e_0 {}  e_1 {}  e_2 {}\n", pct(e.e_0), pct(e.e_1), pct(e.e_2)));
    if let Some(note) = &e.e_c_note {
        out.push_str(&format!("note: {note}\n"));
    }
    out
}

pub fn table1_text(entries: &[Table1Entry]) -> String {
    let mut out = String::from("row  p  t    n   r0 |    e_c    e_0    e_1    e_2 | published                   | max |Δ|\n");
    for e in entries {
        let r = &e.reference;
        let computed = match &e.report {
            Some(rep) => {
                let ec = rep.e_c.map_or_else(|| "   n/a".into(), |x| format!("{:6.2}", 100.0 * x));
                format!("{ec} {:6.2} {:6.2} {:6.2}", 100.0 * rep.e_0, 100.0 * rep.e_1, 100.0 * rep.e_2)
            }
            None => format!("{:<27}", "not evaluated"),
        };
        let delta = e.max_abs_delta().map_or_else(|| "-".into(), |d| format!("{d:.2}"));
        out.push_str(&format!(
            "{:>3} {:>2} {:>2} {:>4} {:>4} | {computed} | {:6.2} {:6.2} {:6.2} {:6.2} | {delta}\n",
            r.row, r.p, r.t, r.n, r.r0, r.e_c, r.e_0, r.e_1, r.e_2
        ));
    }
    for e in entries {
        if let Some(note) = &e.note {
            out.push_str(&format!("row {}: {note}\n", e.reference.row));
        }
    }
    out
}
