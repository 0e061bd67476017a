use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use priorseg_core::cohort::SuperiorAxis;
use priorseg_core::fairness::EvalRegion;
use priorseg_core::metrics::evaluate_pair_at;
use priorseg_core::regions::{BoundsRecord, LandmarkSet};
use priorseg_core::{check_aligned, compute_bounds, crop_to_region, load_manifest, read_labelmap, MetricResult, PatientRecord, Region, Sex};
use rayon::prelude::*;
use serde::Serialize;

use crate::{create_dir, with_threads, write_json, EvaluateArgs, ItemError, Outcome, ERRORS_FILE};

pub const METRICS_FILE: &str = "metrics.csv";
pub const BOUNDS_FILE: &str = "bounds.json";
pub const META_FILE: &str = "evaluate_meta.json";
pub const CSV_HEADER: [&str; 6] = ["patient_id", "sex", "region", "dsc", "hd_mm", "hd95_mm"];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub patient_id: String,
    pub sex: Sex,
    pub region: EvalRegion,
    pub result: MetricResult,
}

#[derive(Debug, Clone)]
pub struct PatientEvaluation {
    pub rows: Vec<MetricRow>,
    pub bounds: Option<BoundsRecord>,
}

/// Conventions echoed next to every metrics file.
#[derive(Debug, Serialize)]
pub struct EvaluateMeta {
    pub percentile: f64,
    pub regions: bool,
    pub superior: SuperiorAxis,
    pub n_patients: usize,
    pub n_failed: usize,
    pub hd_rule: &'static str,
    pub surface_rule: &'static str,
    pub empty_mask_rule: &'static str,
    pub quantile_rule: &'static str,
    pub region_rule: &'static str,
}

pub fn evaluate_patient(record: &PatientRecord, regions: bool, superior: SuperiorAxis, percentile: f64) -> Result<PatientEvaluation> {
    let gt = read_labelmap(&record.gt_ctv_path)?;
    let pred = read_labelmap(record.prediction_path()?)?;
    check_aligned(&gt, &pred)?;
    let row = |region, result| MetricRow {
        patient_id: record.patient_id.clone(),
        sex: record.sex,
        region,
        result,
    };
    let mut rows = vec![row(EvalRegion::Whole, evaluate_pair_at(&gt, &pred, percentile)?)];
    let mut bounds = None;
    if regions {
        let landmarks = LandmarkSet::load(&record.landmark_paths)?;
        check_aligned(&gt, &landmarks.vertebra_t1)?;
        let b = compute_bounds(&landmarks, superior)?;
        for region in Region::ALL {
            let g = crop_to_region(&gt, &b, region)?;
            let p = crop_to_region(&pred, &b, region)?;
            rows.push(row(region.into(), evaluate_pair_at(&g, &p, percentile)?));
        }
        bounds = Some(BoundsRecord::new(&record.patient_id, &b));
    }
    Ok(PatientEvaluation { rows, bounds })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.patient_id.clone(),
            r.sex.as_str().to_string(),
            r.region.id().to_string(),
            r.result.dsc.to_string(),
            cell(r.result.hd_mm),
            cell(r.result.hd95_mm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: &EvaluateArgs, threads: usize) -> Result<Outcome> {
    if !(0.0..=100.0).contains(&args.percentile) {
        bail!("--percentile must be within [0, 100], got {}", args.percentile);
    }
    let manifest = load_manifest(&args.manifest).with_context(|| format!("loading {}", args.manifest.display()))?;
    create_dir(&args.out)?;

    let results: Vec<Result<PatientEvaluation>> = with_threads(threads, || {
        manifest
            .records
            .par_iter()
            .map(|r| evaluate_patient(r, args.regions, manifest.superior, args.percentile))
            .collect()
    })?;

    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    let mut errors = Vec::new();
    for (record, result) in manifest.records.iter().zip(results) {
        match result {
            Ok(e) => {
                rows.extend(e.rows);
                bounds.extend(e.bounds);
            }
            Err(e) => errors.push(ItemError {
                patient_id: record.patient_id.clone(),
                error: format!("{e:#}"),
            }),
        }
    }

    write_metrics_csv(&args.out.join(METRICS_FILE), &rows)?;
    if args.regions {
        write_json(&args.out.join(BOUNDS_FILE), &bounds)?;
    }
    write_json(&args.out.join(ERRORS_FILE), &errors)?;
    let meta = EvaluateMeta {
        percentile: args.percentile,
        regions: args.regions,
        superior: manifest.superior,
        n_patients: manifest.records.len(),
        n_failed: errors.len(),
        hd_rule: "max over both directions of the percentile of surface-to-surface distances",
        surface_rule: "foreground voxels with a background or off-grid face neighbour",
        empty_mask_rule: "dsc = 1 when both masks are empty; hd undefined (empty cell) when either is empty",
        quantile_rule: priorseg_core::fairness::QUANTILE_RULE,
        region_rule: "HN above top of T1; THX down to just above top of stomach; ABDM from top of stomach to bottom of L4 inclusive; PELV below",
    };
    write_json(&args.out.join(META_FILE), &meta)?;

    let ok = manifest.records.len() - errors.len();
    Ok(Outcome {
        failures: errors.len(),
        summary: format!("evaluate: {ok} patients scored, {} failed, {} rows", errors.len(), rows.len()),
    })
}
