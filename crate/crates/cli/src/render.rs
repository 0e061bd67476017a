use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use priorseg_core::{check_aligned, load_manifest, read_labelmap, read_volume, Error, LabelMap, Volume3D};

use crate::{RenderArgs, Outcome};

pub const COLORS: [[u8; 3]; 3] = [[255, 0, 0], [0, 255, 0], [0, 96, 255]];

/// Window a CT value to 0..=255.
fn gray(v: f64, level: f64, width: f64) -> u8 {
    let lo = level - width / 2.0;
    ((v - lo) / width * 255.0).round().clamp(0.0, 255.0) as u8
}

/// In-plane contour: foreground with a background or off-grid 4-neighbour.
fn on_contour(m: &LabelMap, x: usize, y: usize, z: usize) -> bool {
    let [nx, ny, _] = m.header.dims;
    if !m.is_set(x, y, z) {
        return false;
    }
    x == 0 || y == 0 || x + 1 == nx || y + 1 == ny || !m.is_set(x - 1, y, z) || !m.is_set(x + 1, y, z) || !m.is_set(x, y - 1, z) || !m.is_set(x, y + 1, z)
}

/// Binary PPM (P6) of slice `z`; row `y`, column `x`.
pub fn render_slice(ct: &Volume3D, masks: &[LabelMap], z: usize, level: f64, width: f64) -> Result<Vec<u8>> {
    let [nx, ny, nz] = ct.header.dims;
    if z >= nz {
        return Err(Error::SliceOutOfRange { index: z, len: nz }.into());
    }
    if masks.len() > COLORS.len() {
        bail!("at most {} masks can be drawn, got {}", COLORS.len(), masks.len());
    }
    if width <= 0.0 {
        bail!("window width must be positive");
    }
    for m in masks {
        check_aligned(ct, m)?;
    }
    let mut out = format!("P6\n{nx} {ny}\n255\n").into_bytes();
    for y in 0..ny {
        for x in 0..nx {
            let g = gray(ct.get(x, y, z), level, width);
            let mut px = [g; 3];
            for (m, color) in masks.iter().zip(COLORS) {
                if on_contour(m, x, y, z) {
                    px = color;
                }
            }
            out.extend_from_slice(&px);
        }
    }
    Ok(out)
}

pub fn run(args: &RenderArgs) -> Result<Outcome> {
    let (ct_path, mut mask_paths): (PathBuf, Vec<PathBuf>) = match (&args.manifest, &args.patient) {
        (Some(manifest), Some(id)) => {
            let m = load_manifest(manifest)?;
            let r = m.record(id).ok_or_else(|| anyhow!("patient {id} not in {}", manifest.display()))?;
            let mut masks = vec![r.gt_ctv_path.clone()];
            masks.extend(r.pred_ctv_path.clone());
            (r.ct_path.clone(), masks)
        }
        _ => (args.ct.clone().ok_or_else(|| anyhow!("--ct or --manifest is required"))?, Vec::new()),
    };
    mask_paths.extend(args.masks.iter().cloned());
    let ct = read_volume(&ct_path)?;
    let masks = mask_paths.iter().map(read_labelmap).collect::<Result<Vec<_>, _>>()?;
    let image = render_slice(&ct, &masks, args.slice, args.level, args.width)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        crate::create_dir(dir)?;
    }
    std::fs::write(&args.out, &image).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(Outcome {
        failures: 0,
        summary: format!("render: slice {} with {} contours -> {}", args.slice, masks.len(), args.out.display()),
    })
}
