//! Report emission: CSV tables, a summary document with per-number
//! provenance, and hand-written SVG charts.
//!
//! Every number goes through [`fmt_num`], so a value printed in a chart label
//! is the same string as in the matching CSV cell. Output contains no
//! timestamps; identical inputs give identical bytes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::aggregate::Aggregate;
use crate::battery::{Evaluation, MeanSd};
use crate::corpus::Leaning;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Fixed four-decimal rendering shared by tables and charts. Missing values
/// render as an empty string.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// One reported number and the operation that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub key: String,
    pub value: Option<f64>,
    pub op: &'static str,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SummaryDocument {
    pub templates: Vec<String>,
    pub n_statements: usize,
    pub numbers: Vec<Provenance>,
}

impl SummaryDocument {
    fn push(&mut self, key: impl Into<String>, value: Option<f64>, op: &'static str) {
        self.numbers.push(Provenance {
            key: key.into(),
            value,
            op,
        });
    }

    fn push_mean_sd(&mut self, key: &str, v: Option<MeanSd>, op: &'static str) {
        self.push(format!("{key}.mean"), v.map(|m| m.mean), op);
        self.push(format!("{key}.sd"), v.map(|m| m.sd), op);
    }

    pub fn get(&self, key: &str) -> Option<&Provenance> {
        self.numbers.iter().find(|p| p.key == key)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), ReportError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn templates_of(evaluation: &Evaluation) -> Vec<String> {
    evaluation.verdicts.keys().cloned().collect()
}

/// Per-test pass proportions: one row per test plus the all-tests row.
pub fn battery_rows(evaluation: &Evaluation) -> (Vec<String>, Vec<Vec<String>>) {
    let templates = templates_of(evaluation);
    let mut header = vec!["test".to_string()];
    header.extend(templates.iter().cloned());
    header.extend(["mean", "sd", "random_baseline"].map(String::from));
    let s = &evaluation.summary;
    let rows = s
        .tests
        .iter()
        .chain(std::iter::once(&s.all_tests))
        .map(|t| {
            let mut row = vec![t.test.clone()];
            row.extend(templates.iter().map(|id| fmt_opt(t.per_template.get(id).copied())));
            row.extend([fmt_num(t.mean), fmt_num(t.sd), fmt_num(t.random_baseline)]);
            row
        })
        .collect();
    (header, rows)
}

type KappaMetric = (&'static str, fn(&crate::battery::Kappas) -> Option<f64>, Option<MeanSd>);

/// Kappa table: three metrics per template, then mean and sd per metric.
pub fn kappa_rows(evaluation: &Evaluation) -> Vec<Vec<String>> {
    let k = &evaluation.kappas;
    let metrics: [KappaMetric; 3] = [
        ("paraphrase", |k| k.paraphrase, k.paraphrase),
        ("negation", |k| k.negation, k.negation),
        ("opposite", |k| k.opposite, k.opposite),
    ];
    let mut rows = Vec::new();
    for (name, get, summary) in metrics {
        for t in templates_of(evaluation) {
            let value = k.per_template.get(&t).and_then(get);
            rows.push(vec![name.to_string(), t, fmt_opt(value)]);
        }
        rows.push(vec![name.to_string(), "mean".into(), fmt_opt(summary.map(|m| m.mean))]);
        rows.push(vec![name.to_string(), "sd".into(), fmt_opt(summary.map(|m| m.sd))]);
    }
    rows
}

/// Pooled leaning-group match rates per template with mean and sd, plus the
/// reliable-share upper bound.
pub fn leaning_rows(evaluation: &Evaluation, aggregate: &Aggregate) -> (Vec<String>, Vec<Vec<String>>) {
    let templates = templates_of(evaluation);
    let mut header = vec!["group".to_string(), "n_parties".into()];
    header.extend(templates.iter().cloned());
    header.extend(["mean", "sd", "unweighted_mean", "unweighted_sd"].map(String::from));
    let report = &aggregate.leaning;
    let mut rows: Vec<Vec<String>> = Leaning::ALL
        .iter()
        .map(|&l| {
            let g = report.group(l);
            let mut row = vec![l.as_str().to_string(), g.n_parties.to_string()];
            row.extend(templates.iter().map(|t| fmt_opt(g.pooled.get(t).copied())));
            row.extend([
                fmt_opt(g.pooled_summary.map(|m| m.mean)),
                fmt_opt(g.pooled_summary.map(|m| m.sd)),
                fmt_opt(g.unweighted_summary.map(|m| m.mean)),
                fmt_opt(g.unweighted_summary.map(|m| m.sd)),
            ]);
            row
        })
        .collect();
    let mut bound = vec!["reliable_share".to_string(), String::new()];
    bound.extend(templates.iter().map(|t| fmt_opt(report.reliable_share.get(t).copied())));
    bound.extend([
        fmt_opt(report.reliable_share_summary.map(|m| m.mean)),
        fmt_opt(report.reliable_share_summary.map(|m| m.sd)),
        String::new(),
        String::new(),
    ]);
    rows.push(bound);
    (header, rows)
}

fn summary_document(evaluation: &Evaluation, aggregate: &Aggregate) -> SummaryDocument {
    let mut doc = SummaryDocument {
        templates: templates_of(evaluation),
        n_statements: evaluation.verdicts.values().map(Vec::len).max().unwrap_or(0),
        numbers: Vec::new(),
    };
    let s = &evaluation.summary;
    for t in s.tests.iter().chain(std::iter::once(&s.all_tests)) {
        for (id, v) in &t.per_template {
            doc.push(format!("battery.{}.{id}", t.test), Some(*v), "battery::summarize");
        }
        doc.push(format!("battery.{}.mean", t.test), Some(t.mean), "battery::summarize");
        doc.push(format!("battery.{}.sd", t.test), Some(t.sd), "battery::summarize");
        doc.push(
            format!("battery.{}.random_baseline", t.test),
            Some(t.random_baseline),
            "battery::random_baseline",
        );
    }
    let k = &evaluation.kappas;
    for (id, kappas) in &k.per_template {
        doc.push(format!("kappa.paraphrase.{id}"), kappas.paraphrase, "battery::dataset_kappas");
        doc.push(format!("kappa.negation.{id}"), kappas.negation, "battery::dataset_kappas");
        doc.push(format!("kappa.opposite.{id}"), kappas.opposite, "battery::dataset_kappas");
        for (i, v) in kappas.paraphrase_each.iter().enumerate() {
            doc.push(format!("kappa.para{}.{id}", i + 1), *v, "battery::dataset_kappas");
        }
    }
    doc.push_mean_sd("kappa.paraphrase", k.paraphrase, "battery::KappaTable::build");
    doc.push_mean_sd("kappa.negation", k.negation, "battery::KappaTable::build");
    doc.push_mean_sd("kappa.opposite", k.opposite, "battery::KappaTable::build");
    if let Some(c) = &evaluation.cross_template {
        doc.push("cross_template.alpha", Some(c.alpha), "battery::cross_template_report");
        doc.push(
            "cross_template.same_response_count",
            Some(c.same_response_count as f64),
            "battery::cross_template_report",
        );
    }

    let report = &aggregate.leaning;
    for g in &report.groups {
        for (t, v) in &g.pooled {
            doc.push(format!("leaning.{}.{t}", g.leaning), Some(*v), "aggregate::global_leaning");
        }
        doc.push_mean_sd(&format!("leaning.{}", g.leaning), g.pooled_summary, "aggregate::global_leaning");
        doc.push_mean_sd(
            &format!("leaning.{}.unweighted", g.leaning),
            g.unweighted_summary,
            "aggregate::global_leaning",
        );
    }
    for (t, v) in &report.reliable_share {
        doc.push(format!("reliable_share.{t}"), Some(*v), "aggregate::global_leaning");
    }
    doc.push_mean_sd("reliable_share", report.reliable_share_summary, "aggregate::global_leaning");
    for p in &report.parties {
        for (t, m) in &p.per_template {
            doc.push(format!("party.{}.{t}.matches", p.party_id), Some(m.matches as f64), "aggregate::global_leaning");
            doc.push(format!("party.{}.{t}.rate", p.party_id), Some(m.rate), "aggregate::global_leaning");
        }
    }
    for d in &aggregate.domains {
        for (t, s) in &d.per_template {
            doc.push(format!("domain.{}.{t}", d.domain), Some(s.value), "aggregate::domain_stance");
            doc.push(
                format!("domain.{}.{t}.n_reliable", d.domain),
                Some(s.n_reliable as f64),
                "aggregate::domain_stance",
            );
        }
        doc.push_mean_sd(&format!("domain.{}", d.domain), d.value, "aggregate::domain_stance");
    }
    for (t, share) in &aggregate.agree_share {
        doc.push(format!("agree_share.{t}"), share.map(|s| s.agree), "aggregate::agree_share");
        doc.push(format!("disagree_share.{t}"), share.map(|s| s.disagree), "aggregate::agree_share");
    }
    doc
}

fn esc(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const BAR_W: f64 = 640.0;
const BAR_H: f64 = 360.0;
const MARGIN: f64 = 48.0;

/// Label, mean, sd and an optional labelled reference value.
type Bar = (String, f64, f64, Option<(String, f64)>);

/// Bar chart of means with ±sd error bars and an optional reference marker
/// per bar. Each bar carries a `<title>` with the rendered value.
fn bar_chart(title: &str, bars: &[Bar]) -> String {
    let plot_h = BAR_H - 2.0 * MARGIN;
    let slot = (BAR_W - 2.0 * MARGIN) / bars.len().max(1) as f64;
    let y = |v: f64| BAR_H - MARGIN - v.clamp(0.0, 1.0) * plot_h;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{BAR_W}" height="{BAR_H}" viewBox="0 0 {BAR_W} {BAR_H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, BAR_W / 2.0, esc(title));
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let ty = y(tick);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            BAR_W - MARGIN,
            MARGIN - 4.0,
            ty + 4.0,
            fmt_num(tick)
        );
    }
    for (i, (label, mean, sd, reference)) in bars.iter().enumerate() {
        let x = MARGIN + i as f64 * slot + slot * 0.2;
        let w = slot * 0.6;
        let top = y(*mean);
        let value = fmt_num(*mean);
        let _ = writeln!(
            s,
            r##"<rect class="bar" x="{x:.2}" y="{top:.2}" width="{w:.2}" height="{:.2}" fill="#4c72b0" data-value="{value}"><title>{}: {value}</title></rect>"##,
            BAR_H - MARGIN - top,
            esc(label)
        );
        let cx = x + w / 2.0;
        let _ = writeln!(
            s,
            r#"<line class="err" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black" data-sd="{}"/>"#,
            y(mean - sd),
            y(mean + sd),
            fmt_num(*sd)
        );
        if let Some((name, r)) = reference {
            let ry = y(*r);
            let _ = writeln!(
                s,
                r##"<line class="ref" x1="{x:.2}" y1="{ry:.2}" x2="{:.2}" y2="{ry:.2}" stroke="#c44e52" stroke-dasharray="4 2" data-value="{}"><title>{}: {}</title></line>"##,
                x + w,
                fmt_num(*r),
                esc(name),
                fmt_num(*r)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{value}</text><text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            top - 4.0,
            BAR_H - MARGIN + 14.0,
            esc(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn battery_svg(evaluation: &Evaluation) -> String {
    let s = &evaluation.summary;
    let bars: Vec<_> = s
        .tests
        .iter()
        .chain(std::iter::once(&s.all_tests))
        .map(|t| {
            (
                t.test.clone(),
                t.mean,
                t.sd,
                Some(("random baseline".to_string(), t.random_baseline)),
            )
        })
        .collect();
    bar_chart("Proportion of statements passing each test", &bars)
}

pub fn leaning_svg(aggregate: &Aggregate) -> String {
    let report = &aggregate.leaning;
    let bound = report.reliable_share_summary.map(|m| ("reliable share".to_string(), m.mean));
    let bars: Vec<_> = report
        .groups
        .iter()
        .map(|g| {
            let m = g.pooled_summary.unwrap_or(MeanSd { mean: 0.0, sd: 0.0, n: 0 });
            (g.leaning.as_str().to_string(), m.mean, m.sd, bound.clone())
        })
        .collect();
    bar_chart("Match rate with party answers by leaning group", &bars)
}

pub const RADAR_R: f64 = 140.0;
pub const RADAR_C: (f64, f64) = (220.0, 200.0);

/// Vertex of a domain value on the radar: `v = -1` at the centre, `+1` on the
/// outer ring.
pub fn radar_point(index: usize, count: usize, value: f64) -> (f64, f64) {
    let angle = -PI / 2.0 + 2.0 * PI * index as f64 / count as f64;
    let r = (value.clamp(-1.0, 1.0) + 1.0) / 2.0 * RADAR_R;
    (RADAR_C.0 + r * angle.cos(), RADAR_C.1 + r * angle.sin())
}

pub fn domain_svg(aggregate: &Aggregate) -> String {
    let domains = &aggregate.domains;
    let n = domains.len().max(1);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="440" height="420" viewBox="0 0 440 420" font-family="sans-serif" font-size="10">"#
    );
    for ring in [-1.0, 0.0, 1.0] {
        let pts: Vec<String> = (0..n)
            .map(|i| {
                let (x, y) = radar_point(i, n, ring);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r##"<polygon class="ring" points="{}" fill="none" stroke="#ccc" data-level="{}"/>"##,
            pts.join(" "),
            fmt_num(ring)
        );
    }
    let mut poly = Vec::new();
    for (i, d) in domains.iter().enumerate() {
        let (ox, oy) = radar_point(i, n, 1.0);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{ox:.2}" y2="{oy:.2}" stroke="#ccc"/>"##,
            RADAR_C.0, RADAR_C.1
        );
        let (lx, ly) = radar_point(i, n, 1.25);
        let _ = writeln!(
            s,
            r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle">{}</text>"#,
            esc(d.domain.title())
        );
        let value = d.value.map(|m| m.mean).unwrap_or(0.0);
        let (x, y) = radar_point(i, n, value);
        poly.push(format!("{x:.2},{y:.2}"));
        let _ = writeln!(
            s,
            r#"<circle class="vertex" cx="{x:.2}" cy="{y:.2}" r="2" data-domain="{}" data-value="{}"><title>{}: {}</title></circle>"#,
            d.domain,
            fmt_num(value),
            esc(d.domain.title()),
            fmt_num(value)
        );
        if d.below_threshold {
            let (bx, by) = radar_point(i, n, 1.1);
            let _ = writeln!(
                s,
                r#"<circle class="below-threshold" cx="{bx:.2}" cy="{by:.2}" r="4" fill="black" data-domain="{}"/>"#,
                d.domain
            );
        }
    }
    let _ = writeln!(
        s,
        r##"<polygon class="stance" points="{}" fill="#4c72b0" fill-opacity="0.3" stroke="#4c72b0"/>"##,
        poly.join(" ")
    );
    s.push_str("</svg>\n");
    s
}

/// Write every table, the summary document and the charts into `dir`.
/// Returns the written paths in a fixed order.
pub fn emit_reports(dir: &Path, evaluation: &Evaluation, aggregate: &Aggregate) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut out = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    let (header, rows) = battery_rows(evaluation);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out("battery_summary.csv"), &header, &rows)?;

    write_csv(&out("kappa.csv"), &["metric", "template", "kappa"], &kappa_rows(evaluation))?;

    let para_rows: Vec<Vec<String>> = evaluation
        .kappas
        .per_template
        .iter()
        .map(|(t, k)| {
            let mut row = vec![t.clone()];
            row.extend(k.paraphrase_each.iter().map(|v| fmt_opt(*v)));
            row
        })
        .collect();
    write_csv(&out("kappa_per_paraphrase.csv"), &["template", "para1", "para2", "para3"], &para_rows)?;

    let cross_rows: Vec<Vec<String>> = evaluation
        .cross_template
        .iter()
        .map(|c| {
            vec![
                fmt_num(c.alpha),
                c.same_response_count.to_string(),
                c.n_statements.to_string(),
                c.n_templates.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out("cross_template.csv"),
        &["alpha", "same_response_count", "n_statements", "n_templates"],
        &cross_rows,
    )?;

    let (header, rows) = leaning_rows(evaluation, aggregate);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out("leaning.csv"), &header, &rows)?;

    let party_rows: Vec<Vec<String>> = aggregate
        .leaning
        .parties
        .iter()
        .flat_map(|p| {
            p.per_template.iter().map(move |(t, m)| {
                vec![
                    p.party_id.clone(),
                    p.name.clone(),
                    p.country.clone(),
                    p.leaning.as_str().to_string(),
                    t.clone(),
                    m.matches.to_string(),
                    p.country_statements.to_string(),
                    fmt_num(m.rate),
                ]
            })
        })
        .collect();
    write_csv(
        &out("parties.csv"),
        &["party", "name", "country", "leaning", "template", "matches", "country_statements", "rate"],
        &party_rows,
    )?;

    let mut domain_rows = Vec::new();
    for d in &aggregate.domains {
        for (t, s) in &d.per_template {
            domain_rows.push(vec![
                d.domain.to_string(),
                t.clone(),
                s.agrees.to_string(),
                s.disagrees.to_string(),
                s.n_reliable.to_string(),
                fmt_num(s.value),
                s.below_threshold.to_string(),
            ]);
        }
        domain_rows.push(vec![
            d.domain.to_string(),
            "mean".into(),
            String::new(),
            String::new(),
            String::new(),
            fmt_opt(d.value.map(|m| m.mean)),
            d.below_threshold.to_string(),
        ]);
        domain_rows.push(vec![
            d.domain.to_string(),
            "sd".into(),
            String::new(),
            String::new(),
            String::new(),
            fmt_opt(d.value.map(|m| m.sd)),
            d.below_threshold.to_string(),
        ]);
    }
    write_csv(
        &out("domains.csv"),
        &["domain", "template", "agrees", "disagrees", "n_reliable", "value", "below_threshold"],
        &domain_rows,
    )?;

    let share_rows: Vec<Vec<String>> = aggregate
        .agree_share
        .iter()
        .map(|(t, s)| {
            vec![
                t.clone(),
                s.map(|s| s.n_reliable.to_string()).unwrap_or_else(|| "0".into()),
                fmt_opt(s.map(|s| s.agree)),
                fmt_opt(s.map(|s| s.disagree)),
            ]
        })
        .collect();
    write_csv(&out("agree_share.csv"), &["template", "n_reliable", "agree", "disagree"], &share_rows)?;

    let doc = summary_document(evaluation, aggregate);
    let p = out("summary.json");
    let json = serde_json::to_string_pretty(&doc).expect("summary serializes") + "\n";
    std::fs::write(&p, json).map_err(io_err(&p))?;

    for (name, svg) in [
        ("battery.svg", battery_svg(evaluation)),
        ("leaning.svg", leaning_svg(aggregate)),
        ("domains.svg", domain_svg(aggregate)),
    ] {
        let p = out(name);
        std::fs::write(&p, svg).map_err(io_err(&p))?;
    }
    Ok(written)
}
