use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Metric};
use super::evaluate::{CaseEvaluation, EvaluationSet, Exclusion, Subject};
use super::manifest::SCHEMA_VERSION;
use crate::stats::{median_iqr, paired_test, SummaryStat, TestKind, TestResult};
use crate::{Method, Phase, Result, Territory};

/// Summary of one metric over the included cases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub summary: Option<SummaryStat>,
    pub n: usize,
    /// Cases without a value (surface distance undefined).
    pub missing: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub territory: Territory,
    pub subject: Subject,
    pub n: usize,
    pub cells: BTreeMap<Metric, Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub territory: Territory,
    pub metric: Metric,
    pub a: Method,
    pub b: Method,
    pub n_pairs: usize,
    pub result: Option<TestResult>,
    pub stars: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub schema_version: u32,
    pub test: TestKind,
    pub rows: Vec<Row>,
    pub comparisons: Vec<Comparison>,
    pub excluded: Vec<Exclusion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    pub schema_version: u32,
    pub reference: Method,
    pub rows: Vec<Row>,
    /// Configured phases with no evaluated case, with the reason.
    pub omitted: Vec<(Phase, String)>,
    pub excluded: Vec<Exclusion>,
}

/// `***` for p ≤ 0.001, `**` for p ≤ 0.01, `*` for p ≤ 0.05.
pub fn significance_stars(p: f64) -> &'static str {
    if p <= 0.001 {
        "***"
    } else if p <= 0.01 {
        "**"
    } else if p <= 0.05 {
        "*"
    } else {
        ""
    }
}

fn of<'a>(
    set: &'a EvaluationSet,
    subject: Subject,
    territory: Territory,
) -> impl Iterator<Item = (&'a CaseEvaluation, &'a crate::metrics::TerritoryMetrics)> {
    set.evaluations
        .iter()
        .filter(move |e| e.subject == subject)
        .filter_map(move |e| e.metrics.get(territory).map(|m| (e, m)))
}

fn row(set: &EvaluationSet, subject: Subject, territory: Territory, metrics: &[Metric]) -> Result<Row> {
    let n = of(set, subject, territory).count();
    let mut cells = BTreeMap::new();
    for &metric in metrics {
        let values: Vec<f64> = of(set, subject, territory).filter_map(|(_, m)| metric.of(m)).collect();
        let summary = if values.is_empty() {
            None
        } else {
            Some(median_iqr(&values)?)
        };
        cells.insert(
            metric,
            Cell {
                summary,
                n: values.len(),
                missing: n - values.len(),
            },
        );
    }
    Ok(Row {
        territory,
        subject,
        n,
        cells,
    })
}

fn compare(
    set: &EvaluationSet,
    territory: Territory,
    metric: Metric,
    a: Method,
    b: Method,
    test: TestKind,
) -> Comparison {
    let values = |m: Method| -> BTreeMap<&str, f64> {
        of(set, Subject::Method(m), territory)
            .filter_map(|(e, v)| metric.of(v).map(|x| (e.case.key.as_str(), x)))
            .collect()
    };
    let (va, vb) = (values(a), values(b));
    let (xs, ys): (Vec<f64>, Vec<f64>) = va
        .iter()
        .filter_map(|(k, x)| vb.get(k).map(|y| (*x, *y)))
        .unzip();
    let (result, note) = match paired_test(test, &xs, &ys) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Comparison {
        territory,
        metric,
        a,
        b,
        n_pairs: xs.len(),
        stars: result.map_or("", |r| significance_stars(r.p_value)).to_string(),
        result,
        note,
    }
}

/// Table 1 from per-case evaluations: per territory × method median [IQR]
/// of each metric and paired tests between consecutive methods.
pub fn table1_from_evaluations(set: &EvaluationSet, config: &ExperimentConfig) -> Result<Table1> {
    let mut rows = Vec::new();
    let mut comparisons = Vec::new();
    for &territory in &config.territories {
        for &m in &config.methods {
            rows.push(row(set, Subject::Method(m), territory, &config.metrics)?);
        }
        for pair in config.methods.windows(2) {
            for &metric in &config.metrics {
                comparisons.push(compare(set, territory, metric, pair[0], pair[1], config.test));
            }
        }
    }
    Ok(Table1 {
        schema_version: SCHEMA_VERSION,
        test: config.test,
        rows,
        comparisons,
        excluded: set.exclusions.clone(),
    })
}

/// Phase table from per-case phase evaluations.
pub fn phase_table_from_evaluations(set: &EvaluationSet, config: &ExperimentConfig) -> Result<PhaseTable> {
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    for &territory in &config.territories {
        for &p in &config.phases {
            let r = row(set, Subject::Phase(p), territory, &config.metrics)?;
            if r.n == 0 {
                if territory == config.territories[0] {
                    omitted.push((p, "no case has a prediction for this phase".to_string()));
                }
                continue;
            }
            rows.push(r);
        }
    }
    Ok(PhaseTable {
        schema_version: SCHEMA_VERSION,
        reference: config.phase_method,
        rows,
        omitted,
        excluded: set.exclusions.clone(),
    })
}

impl Row {
    pub fn center(&self, metric: Metric) -> Option<f64> {
        self.cells.get(&metric)?.summary.map(|s| s.center)
    }
}

impl Table1 {
    pub fn row(&self, territory: Territory, method: Method) -> Option<&Row> {
        self.rows
            .iter()
            .find(|r| r.territory == territory && r.subject == Subject::Method(method))
    }

    pub fn comparison(&self, territory: Territory, metric: Metric) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.territory == territory && c.metric == metric)
    }

    pub fn to_text(&self) -> String {
        let mut out = render_rows(&self.rows);
        if !self.comparisons.is_empty() {
            out.push('\n');
            for c in &self.comparisons {
                let p = match &c.result {
                    Some(r) => format!("p = {}", format_p(r.p_value)),
                    None => format!("n/a ({})", c.note.as_deref().unwrap_or("")),
                };
                let _ = writeln!(
                    out,
                    "{} {:<4} {} vs {} ({:?}, {} pairs): {} {}",
                    c.territory, c.metric.name(), c.a, c.b, self.test, c.n_pairs, p, c.stars
                );
            }
        }
        push_exclusions(&mut out, &self.excluded);
        out
    }
}

impl PhaseTable {
    pub fn row(&self, territory: Territory, phase: Phase) -> Option<&Row> {
        self.rows
            .iter()
            .find(|r| r.territory == territory && r.subject == Subject::Phase(phase))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("phase predictions vs full-phase {} prediction\n", self.reference);
        out.push_str(&render_rows(&self.rows));
        for (p, why) in &self.omitted {
            let _ = writeln!(out, "omitted {p}: {why}");
        }
        push_exclusions(&mut out, &self.excluded);
        out
    }
}

fn push_exclusions(out: &mut String, excluded: &[Exclusion]) {
    if !excluded.is_empty() {
        let _ = writeln!(out, "\nexcluded: {}", excluded.len());
        for x in excluded {
            let _ = writeln!(out, "  {} {:?}: {}", x.key, x.subject, x.reason);
        }
    }
}

pub(crate) fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

pub(crate) fn format_summary(s: &SummaryStat, decimals: usize) -> String {
    format!(
        "{:.d$} [{:.d$}-{:.d$}]",
        s.center,
        s.low,
        s.high,
        d = decimals
    )
}

fn subject_name(s: Subject) -> String {
    match s {
        Subject::Method(m) => m.to_string(),
        Subject::Phase(p) => p.to_string(),
    }
}

/// Aligned plain-text rendering.
fn render_rows(rows: &[Row]) -> String {
    let metrics: Vec<Metric> = rows
        .first()
        .map(|r| r.cells.keys().copied().collect())
        .unwrap_or_default();
    let mut header = vec!["Territory".to_string(), "Subject".into(), "n".into()];
    header.extend(metrics.iter().map(|m| m.name().to_string()));
    let mut lines = vec![header];
    for r in rows {
        let mut line = vec![r.territory.to_string(), subject_name(r.subject), r.n.to_string()];
        for m in &metrics {
            let cell = &r.cells[m];
            line.push(match &cell.summary {
                Some(s) => format_summary(s, m.decimals()),
                None => "n/a".into(),
            });
        }
        lines.push(line);
    }
    let cols = lines[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|i| lines.iter().map(|l| l[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for l in &lines {
        let cells: Vec<String> = l
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}
