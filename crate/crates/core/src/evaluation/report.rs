//! Aligned-text rendering of evaluation reports.
//!
//! [`render_tables`] prints two grids, accuracy then AUC, with one row per
//! crime category (fixed order Alcohol-related, Assault, Property damage,
//! Motor vehicle) and one `raw / eng` column per classifier (LR, RF, SVM,
//! Ensemble). Accuracy is a percentage with two decimals; AUC has three
//! decimals without the leading zero. An engineered value is suffixed with
//! `*` when its paired t-test against raw has `p > alpha`.

use std::fmt::Write;

use super::{ClassifierId, EvalError, EvalReport, MetricId};
use crate::features::FeatureSet;

const NAME_WIDTH: usize = 17;
const CELL_WIDTH: usize = 18;

pub fn format_accuracy(fraction: f64) -> String {
    format!("{:.2}", fraction * 100.0)
}

/// Three decimals, leading zero dropped: `0.575` becomes `.575`.
pub fn format_auc(value: f64) -> String {
    let s = format!("{value:.3}");
    match s.strip_prefix('0') {
        Some(rest) => rest.to_string(),
        None => s,
    }
}

fn cell(report: &EvalReport, classifier: ClassifierId, metric: MetricId) -> String {
    let fmt = |v: f64| match metric {
        MetricId::Accuracy => format_accuracy(v),
        MetricId::Auc => format_auc(v),
    };
    let raw = report.result(classifier, FeatureSet::Raw).expect("validated").mean(metric);
    let eng = report.result(classifier, FeatureSet::Engineered).expect("validated").mean(metric);
    let test = &report.comparison(classifier, metric).expect("validated").test;
    let star = if test.p_value > report.alpha { "*" } else { "" };
    format!("{} / {}{star}", fmt(raw), fmt(eng))
}

fn grid(out: &mut String, title: &str, reports: &[&EvalReport], metric: MetricId) {
    writeln!(out, "{title}").unwrap();
    let mut header = format!("{:<NAME_WIDTH$}", "Crime type");
    let mut sub = format!("{:<NAME_WIDTH$}", "");
    for c in ClassifierId::ALL {
        write!(header, "{:<CELL_WIDTH$}", c.label()).unwrap();
        write!(sub, "{:<CELL_WIDTH$}", "raw / eng.").unwrap();
    }
    writeln!(out, "{}", header.trim_end()).unwrap();
    writeln!(out, "{}", sub.trim_end()).unwrap();
    for r in reports {
        let mut line = format!("{:<NAME_WIDTH$}", r.category.title());
        for c in ClassifierId::ALL {
            write!(line, "{:<CELL_WIDTH$}", cell(r, c, metric)).unwrap();
        }
        writeln!(out, "{}", line.trim_end()).unwrap();
    }
}

/// Accuracy and AUC grids over one or more category reports.
pub fn render_tables(reports: &[EvalReport]) -> Result<String, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::NoReports);
    }
    for r in reports {
        r.validate()?;
    }
    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.category);
    if let Some(w) = sorted.windows(2).find(|w| w[0].category == w[1].category) {
        return Err(EvalError::DuplicateCategory(w[0].category.title().to_string()));
    }
    let mut out = String::new();
    grid(&mut out, "Accuracy (%)", &sorted, MetricId::Accuracy);
    out.push('\n');
    grid(&mut out, "AUC", &sorted, MetricId::Auc);
    out.push('\n');
    let alpha = sorted[0].alpha;
    let threshold = if sorted.iter().all(|r| r.alpha == alpha) { format!("{alpha}") } else { "alpha".to_string() };
    writeln!(out, "* engineered vs raw not significant (paired t-test, p > {threshold})").unwrap();
    Ok(out)
}

fn format_t(t: f64) -> String {
    if t.is_infinite() {
        if t > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{t:.3}")
    }
}

/// Single-report text: run metadata, the grids, and every t-test.
pub fn render_details(report: &EvalReport) -> Result<String, EvalError> {
    let mut out = String::new();
    writeln!(out, "Category: {}", report.category.title()).unwrap();
    writeln!(out, "Hotpoint training period: {}", report.hotpoint_training_period).unwrap();
    let years: Vec<String> = report.eval_years.iter().map(|y| y.to_string()).collect();
    writeln!(out, "Evaluation period: {} ({} records, {:.2}% positive)", years.join("+"), report.n_eval_records, 100.0 * report.positive_fraction).unwrap();
    writeln!(out, "Hotpoints: {}", report.n_hotpoints).unwrap();
    writeln!(out, "Folds: {} (seed {})", report.k, report.seed).unwrap();
    writeln!(out, "Paired t-tests on: {}", report.tested_quantity).unwrap();
    out.push('\n');
    out.push_str(&render_tables(std::slice::from_ref(report))?);
    out.push('\n');
    writeln!(out, "{:<10}{:<10}{:>10}{:>10}{:>10}{:>12}", "Model", "Metric", "raw", "eng.", "t", "p").unwrap();
    for c in &report.comparisons {
        let metric = match c.metric {
            MetricId::Accuracy => "accuracy",
            MetricId::Auc => "auc",
        };
        writeln!(
            out,
            "{:<10}{:<10}{:>10.4}{:>10.4}{:>10}{:>12.4e}",
            c.classifier.label(),
            metric,
            c.raw_mean,
            c.engineered_mean,
            format_t(c.test.t_statistic),
            c.test.p_value
        )
        .unwrap();
    }
    Ok(out)
}
