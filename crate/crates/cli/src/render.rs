//! Aligned plain-text output. JSON output goes straight through serde.

use crate::model::{FitFile, Predictions};
use finreg::cv::CvResult;
use finreg::inference::{InferenceTable, ScaleTable};
use finreg::sim::SimReport;
use std::fmt::Write;

/// p-values below this print as 0.
const P_DISPLAY_FLOOR: f64 = 1e-4;

pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if !v.is_finite() {
        format!("{v}")
    } else if (1e-3..1e6).contains(&a) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

pub fn p_value(p: f64) -> String {
    if p < P_DISPLAY_FLOOR {
        "0".into()
    } else {
        format!("{p:.4}")
    }
}

fn opt(v: Option<f64>, f: fn(f64) -> String) -> String {
    v.map_or_else(|| "NA".into(), f)
}

/// First column left-aligned, the rest right-aligned.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (c, cell) in r.iter().enumerate() {
            width[c] = width[c].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (c, cell) in cells.iter().enumerate() {
            if c == 0 {
                let _ = write!(s, "{cell:<w$}", w = width[0]);
            } else {
                let _ = write!(s, "  {cell:>w$}", w = width[c]);
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
    out
}

pub fn inference(t: &InferenceTable) -> String {
    let rows: Vec<Vec<String>> = (0..t.labels.len())
        .map(|j| {
            vec![
                t.labels[j].clone(),
                num(t.estimates[j]),
                opt(t.std_errors[j], num),
                opt(t.z_values[j], |z| format!("{z:.3}")),
                opt(t.p_values[j], p_value),
            ]
        })
        .collect();
    let mut s = table(&["Parameter", "Estimate", "Std. Error", "z", "p-value"], &rows);
    if t.null_values.iter().any(|&v| v != 0.0) {
        let nulls: Vec<String> = t
            .labels
            .iter()
            .zip(&t.null_values)
            .filter(|(_, &v)| v != 0.0)
            .map(|(l, v)| format!("{l} = {v}"))
            .collect();
        let _ = writeln!(s, "Wald nulls other than 0: {}", nulls.join(", "));
    }
    let _ = writeln!(s, "log-likelihood {}   BIC {}   n {}", num(t.loglik), num(t.bic), t.n_obs);
    if !t.is_full_rank() {
        let _ = writeln!(s, "observed information has rank {} of {}; standard errors omitted", t.rank, t.dim);
    }
    s
}

pub fn natural_scale(t: &ScaleTable) -> String {
    let rows: Vec<Vec<String>> = (0..t.labels.len())
        .map(|j| vec![t.labels[j].clone(), num(t.estimates[j]), opt(t.std_errors[j], num)])
        .collect();
    table(&["Parameter", "Estimate", "Std. Error"], &rows)
}

pub fn coefficients(f: &FitFile) -> String {
    let rows: Vec<Vec<String>> = f.labels.iter().zip(&f.theta).map(|(l, &v)| vec![l.clone(), num(v)]).collect();
    table(&["Parameter", "Estimate"], &rows)
}

pub fn diagnostics(f: &FitFile) -> String {
    let d = &f.diagnostics;
    let mut s = String::new();
    let _ = writeln!(s, "lambda1 {}   lambda2 {}   standardized {}", num(f.lambda1), num(f.lambda2), f.standardized);
    let _ = writeln!(
        s,
        "status {}   |J| {}   outer {}   inner {}   objective {}",
        serde_name(&d.status),
        num(d.j_norm),
        d.outer_iters,
        d.inner_iters,
        num(d.objective)
    );
    let nonzero = f.theta.iter().filter(|v| **v != 0.0).count();
    let _ = writeln!(s, "nonzero coefficients {nonzero} of {}", f.theta.len());
    s
}

pub fn fit(f: &FitFile) -> String {
    let mut s = format!("{} model, {} family, n = {}\n\n", class_name(f), family_name(f), f.n_obs);
    match &f.inference {
        Some(t) => {
            s.push_str(&inference(t));
            if let Some(n) = &f.natural_scale {
                s.push_str("\nNatural scale\n");
                s.push_str(&natural_scale(n));
            }
            s.push('\n');
            s.push_str(&diagnostics(f));
        }
        None => {
            s.push_str(&coefficients(f));
            s.push('\n');
            s.push_str(&diagnostics(f));
        }
    }
    s
}

pub fn cv(res: &CvResult, f: &FitFile) -> String {
    let rows: Vec<Vec<String>> = (0..res.lambdas.len())
        .map(|l| {
            let mark = if l == res.selected_index { "*" } else { "" };
            vec![
                format!("{}{mark}", l + 1),
                num(res.lambdas[l]),
                num(res.mean_loss[l]),
                num(res.se_loss[l]),
                res.n_valid[l].to_string(),
            ]
        })
        .collect();
    let mut s = table(&["#", "lambda1", "cv loss", "se", "folds"], &rows);
    let _ = writeln!(s, "\nselected lambda1 {}   minimizing lambda1 {}", num(res.selected_lambda), num(res.min_lambda));
    if res.invalid_cells > 0 || res.unconverged_cells > 0 {
        let _ = writeln!(s, "failed cells {}   unconverged cells {}", res.invalid_cells, res.unconverged_cells);
    }
    s.push('\n');
    s.push_str(&fit(f));
    s
}

pub fn predictions(p: &Predictions) -> String {
    let mut header = vec!["row", "location", "mode"];
    header.extend(p.categories.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = p
        .rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.row.to_string(), num(r.location), r.mode.to_string()];
            cells.extend(r.probs.iter().map(|&v| format!("{v:.4}")));
            cells
        })
        .collect();
    table(&header, &rows)
}

pub fn simulation(reports: &[SimReport]) -> String {
    let mut rows = Vec::new();
    for r in reports {
        for m in &r.methods {
            rows.push(vec![
                serde_name(&r.config.setting),
                num(r.config.interval_size),
                m.method.name().to_string(),
                format!("{:.4}", m.sse_nonzero),
                format!("{:.4}", m.sse_mc_se),
                format!("{:.4}", m.mean_misclass),
                format!("{}/{}", m.n_ok, m.n_ok + m.n_failed),
            ]);
        }
    }
    table(&["setting", "size", "method", "sse", "se", "misclass", "ok"], &rows)
}

/// The name a unit enum variant serializes to.
fn serde_name<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn class_name(f: &FitFile) -> String {
    serde_name(&f.model.class)
}

fn family_name(f: &FitFile) -> String {
    f.model.family.to_string()
}
