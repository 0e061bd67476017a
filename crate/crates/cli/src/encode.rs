use std::path::PathBuf;

use anyhow::{Context, Result};
use priorseg_core::encoding::encode;
use priorseg_core::{load_manifest, EncodingStrategy, PatientRecord};
use rayon::prelude::*;

use crate::{create_dir, with_threads, write_json, EncodeArgs, ItemError, Outcome, ERRORS_FILE};

/// Files written for one patient.
#[derive(Debug)]
pub struct Encoded {
    pub patient_id: String,
    pub files: Vec<PathBuf>,
}

fn encode_patient(strategy: &EncodingStrategy, record: &PatientRecord, args: &EncodeArgs) -> Result<Encoded> {
    let dir = args.out.join(&record.patient_id);
    let files = encode(strategy, record)?.write(&dir, &record.patient_id)?;
    Ok(Encoded {
        patient_id: record.patient_id.clone(),
        files,
    })
}

/// Encode every patient; failures are collected into `errors.json` rather
/// than stopping the batch.
pub fn run(args: &EncodeArgs, threads: usize) -> Result<Outcome> {
    let manifest = load_manifest(&args.manifest).with_context(|| format!("loading {}", args.manifest.display()))?;
    let strategy = EncodingStrategy::for_vocabulary(args.strategy, &manifest.structure_vocabulary)?;
    create_dir(&args.out)?;

    let results: Vec<Result<Encoded>> = with_threads(threads, || {
        manifest
            .records
            .par_iter()
            .map(|r| encode_patient(&strategy, r, args))
            .collect()
    })?;

    let mut errors = Vec::new();
    let mut files = 0;
    for (record, result) in manifest.records.iter().zip(results) {
        match result {
            Ok(e) => files += e.files.len(),
            Err(e) => errors.push(ItemError {
                patient_id: record.patient_id.clone(),
                error: format!("{e:#}"),
            }),
        }
    }
    write_json(&args.out.join(ERRORS_FILE), &errors)?;
    let ok = manifest.records.len() - errors.len();
    Ok(Outcome {
        failures: errors.len(),
        summary: format!(
            "encode {}: {ok} patients encoded, {} failed, {files} files written",
            args.strategy.id(),
            errors.len()
        ),
    })
}
