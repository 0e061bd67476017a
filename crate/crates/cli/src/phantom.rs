use anyhow::{Context, Result};
use priorseg_core::{generate_cohort, PhantomSpec};

use crate::{with_threads, Outcome, PhantomArgs};

pub fn load_spec(args: &PhantomArgs) -> Result<PhantomSpec> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            PhantomSpec::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => PhantomSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.error_model.seed = seed;
    }
    Ok(spec)
}

/// Write the cohort; the summary is the manifest path.
pub fn run(args: &PhantomArgs, threads: usize) -> Result<Outcome> {
    let spec = load_spec(args)?;
    if spec.n_female + spec.n_male == 0 {
        eprintln!("warning: spec has no patients; writing an empty manifest");
    }
    let (_, path) = with_threads(threads, || generate_cohort(&spec, &args.out))??;
    Ok(Outcome {
        failures: 0,
        summary: path.display().to_string(),
    })
}
