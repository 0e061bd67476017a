use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use priorseg_core::fairness::{summarize_with, RegionGaps};
use priorseg_core::{EvalRegion, FairnessSummary, ScoreSample, Sex};
use serde::{Deserialize, Serialize};

use crate::evaluate::{CSV_HEADER, META_FILE};
use crate::{create_dir, write_json, FairnessArgs, Outcome};

pub const FAIRNESS_FILE: &str = "fairness.json";
pub const TABLES_FILE: &str = "tables.md";

const REGIONS: [EvalRegion; 4] = [EvalRegion::HeadNeck, EvalRegion::Thorax, EvalRegion::Abdomen, EvalRegion::Pelvis];

#[derive(Debug, Deserialize)]
struct CsvRow {
    patient_id: String,
    sex: String,
    region: String,
    dsc: f64,
    #[allow(dead_code)]
    hd_mm: Option<f64>,
    hd95_mm: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FairnessReport {
    pub label: String,
    /// HD percentile from the evaluate run, when its metadata is present.
    pub hd_percentile: Option<f64>,
    #[serde(flatten)]
    pub summary: FairnessSummary,
    pub flagged_regions: Vec<EvalRegion>,
}

pub fn read_metrics(path: &Path) -> Result<Vec<ScoreSample>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        bail!("{}: expected header {}, found {}", path.display(), CSV_HEADER.join(","), header.join(","));
    }
    let mut samples = Vec::new();
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let line = i + 2;
        let row = row.with_context(|| format!("{} line {line}", path.display()))?;
        let sex = Sex::parse(&row.sex).ok_or_else(|| anyhow!("{} line {line}: unknown sex {:?}", path.display(), row.sex))?;
        let region = row
            .region
            .parse::<EvalRegion>()
            .map_err(|e| anyhow!("{} line {line}: {e}", path.display()))?;
        samples.push(ScoreSample {
            patient_id: row.patient_id,
            sex,
            region,
            dsc: row.dsc,
            hd95_mm: row.hd95_mm,
        });
    }
    Ok(samples)
}

fn pct(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

/// Magnitude with the favoured group, e.g. `3.00% (M>F)`.
fn signed_pct(v: f64) -> String {
    let magnitude = pct(v.abs());
    if magnitude == "0.00%" {
        magnitude
    } else if v > 0.0 {
        format!("{magnitude} (M>F)")
    } else {
        format!("{magnitude} (F>M)")
    }
}

fn or_flag<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_else(|| "flagged".into())
}

fn row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn rule(n: usize) -> String {
    row(&vec!["---".to_string(); n])
}

type Pick = fn(&RegionGaps) -> Option<f64>;
type Format = fn(f64) -> String;

pub fn render_tables(report: &FairnessReport) -> String {
    let s = &report.summary;
    let label = &report.label;
    let get = |r| s.region(r);
    let mut md = String::new();
    let _ = writeln!(md, "# Fairness report: {label}\n");

    md.push_str("## Whole-body performance\n\n");
    let head = ["Run", "DSC Med.", "HD95 Med.", "DSC F-Med.", "DSC M-Med."].map(String::from);
    md.push_str(&row(&head));
    md.push_str(&rule(head.len()));
    let whole = get(EvalRegion::Whole);
    let hd_whole = s
        .hd95
        .as_ref()
        .and_then(|v| v.iter().find(|g| g.region == EvalRegion::Whole))
        .and_then(|g| g.total_median);
    md.push_str(&row(&[
        label.clone(),
        or_flag(whole.and_then(|g| g.total_median), pct),
        hd_whole.map_or_else(|| "n/a".into(), |v| format!("{v:.2}")),
        or_flag(whole.and_then(|g| g.female), |g| pct(g.median)),
        or_flag(whole.and_then(|g| g.male), |g| pct(g.median)),
    ]));

    md.push_str("\n## Median DSC by region\n\n");
    let mut head = vec!["Run".to_string(), "Med. DSC".into()];
    head.extend(REGIONS.iter().map(|r| r.id().to_string()));
    md.push_str(&row(&head));
    md.push_str(&rule(head.len()));
    let lines: [(&str, Pick); 3] = [
        ("Total", |g| g.total_median),
        ("Female", |g| g.female.map(|f| f.median)),
        ("Male", |g| g.male.map(|m| m.median)),
    ];
    for (i, (name, pick)) in lines.into_iter().enumerate() {
        let mut cells = vec![if i == 0 { label.clone() } else { String::new() }, name.to_string()];
        cells.extend(REGIONS.iter().map(|&r| or_flag(get(r).and_then(pick), pct)));
        md.push_str(&row(&cells));
    }

    md.push_str("\n## Gender gaps by region\n\n");
    let mut head = vec!["Metric".to_string(), "Run".into()];
    head.extend(REGIONS.iter().map(|r| r.id().to_string()));
    md.push_str(&row(&head));
    md.push_str(&rule(head.len()));
    let gaps: [(&str, Pick, Format); 3] = [
        ("AGD", |g| g.agd, signed_pct),
        ("MGD", |g| g.mgd, signed_pct),
        ("QD", |g| g.qd, pct),
    ];
    for (name, pick, fmt) in gaps {
        let mut cells = vec![name.to_string(), label.clone()];
        cells.extend(REGIONS.iter().map(|&r| or_flag(get(r).and_then(pick), fmt)));
        md.push_str(&row(&cells));
    }

    md.push_str("\n## Conventions\n\n");
    let _ = writeln!(md, "- quantiles: {}", s.quantile_rule);
    let _ = writeln!(md, "- AGD, MGD: {}; shown as magnitude with the higher-scoring group", s.sign_convention);
    md.push_str("- QD: max(Q3 male - Q1 female, Q3 female - Q1 male)\n");
    if let Some(p) = report.hd_percentile {
        let _ = writeln!(md, "- HD percentile: {p}");
    }
    md.push_str("- flagged: a sex group has no scores in that region\n");
    let flags: Vec<&RegionGaps> = s.dsc.iter().filter(|g| g.is_flagged()).collect();
    if !flags.is_empty() {
        md.push_str("\n## Flags\n\n");
        for g in flags {
            let _ = writeln!(md, "- {}: {}", g.region, g.flag.as_deref().unwrap_or_default());
        }
    }
    md
}

fn read_percentile(metrics: &Path) -> Option<f64> {
    let meta = metrics.parent()?.join(META_FILE);
    let text = std::fs::read_to_string(meta).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    value.get("percentile")?.as_f64()
}

pub fn report(samples: &[ScoreSample], label: &str, hd_percentile: Option<f64>) -> FairnessReport {
    let mut summary = summarize_with(samples, true);
    // with regional rows present, a region absent from the file is flagged
    if samples.iter().any(|s| s.region != EvalRegion::Whole) {
        for r in REGIONS {
            if summary.region(r).is_none() {
                summary.dsc.push(RegionGaps {
                    region: r,
                    total_median: None,
                    female: None,
                    male: None,
                    agd: None,
                    mgd: None,
                    qd: None,
                    flag: Some(format!("no scores for region {r}")),
                });
            }
        }
    }
    summary.dsc.sort_by_key(|g| g.region);
    let flagged_regions = summary.flagged_regions();
    FairnessReport {
        label: label.to_string(),
        hd_percentile,
        summary,
        flagged_regions,
    }
}

pub fn run(args: &FairnessArgs) -> Result<Outcome> {
    let samples = read_metrics(&args.metrics)?;
    if samples.is_empty() {
        bail!("{} has no rows", args.metrics.display());
    }
    let report = report(&samples, &args.label, read_percentile(&args.metrics));
    create_dir(&args.out)?;
    write_json(&args.out.join(FAIRNESS_FILE), &report)?;
    let tables = args.out.join(TABLES_FILE);
    std::fs::write(&tables, render_tables(&report)).with_context(|| format!("writing {}", tables.display()))?;

    let flagged = report.flagged_regions.len();
    let summary = match report.summary.region(EvalRegion::Whole) {
        Some(RegionGaps {
            agd: Some(a),
            mgd: Some(m),
            qd: Some(q),
            ..
        }) => format!("fairness: WHOLE AGD {a:.4} MGD {m:.4} QD {q:.4}; {flagged} regions flagged"),
        _ => format!("fairness: {flagged} regions flagged"),
    };
    Ok(Outcome {
        failures: flagged,
        summary,
    })
}
