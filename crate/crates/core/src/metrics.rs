//! Overlap and surface-distance metrics between a ground-truth mask and a
//! prediction on the same grid.
//!
//! Conventions:
//! - DSC(∅, ∅) = 1 and DSC(∅, X) = 0 for non-empty X.
//! - Surfaces are foreground voxels with at least one background (or
//!   off-grid) face neighbour.
//! - The p-th percentile Hausdorff distance is the larger of the two directed
//!   p-th percentiles; p = 100 is the classic Hausdorff distance. It is
//!   undefined when either mask is empty.

use serde::{Deserialize, Serialize};

use crate::edt::{squared_edt_box, BoundingBox};
use crate::error::{Error, Result};
use crate::nifti::{check_aligned, Grid, LabelMap};
use crate::stats::quantile_sorted;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSet {
    pub voxels: Vec<[usize; 3]>,
    pub spacing: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelCounts {
    pub gt: usize,
    pub pred: usize,
    pub intersection: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub dsc: f64,
    pub hd_mm: Option<f64>,
    /// Percentile Hausdorff distance at the requested percentile (95 unless
    /// overridden).
    pub hd95_mm: Option<f64>,
    pub voxel_counts: VoxelCounts,
}

pub fn voxel_counts(gt: &LabelMap, pred: &LabelMap) -> Result<VoxelCounts> {
    check_aligned(gt, pred)?;
    let mut c = VoxelCounts {
        gt: 0,
        pred: 0,
        intersection: 0,
    };
    for (&a, &b) in gt.data.iter().zip(&pred.data) {
        let (a, b) = (a != 0, b != 0);
        c.gt += usize::from(a);
        c.pred += usize::from(b);
        c.intersection += usize::from(a && b);
    }
    Ok(c)
}

fn dice_from_counts(c: VoxelCounts) -> f64 {
    if c.gt + c.pred == 0 {
        1.0
    } else {
        2.0 * c.intersection as f64 / (c.gt + c.pred) as f64
    }
}

pub fn dice(gt: &LabelMap, pred: &LabelMap) -> Result<f64> {
    Ok(dice_from_counts(voxel_counts(gt, pred)?))
}

/// Global indices of the 6-connectivity boundary voxels, ascending.
fn surface_indices(mask: &LabelMap) -> Vec<usize> {
    let h = &mask.header;
    let [nx, ny, nz] = h.dims;
    let Some(bbox) = BoundingBox::of_mask(mask) else {
        return Vec::new();
    };
    let data = &mask.data;
    let (sy, sz) = (nx, nx * ny);
    let mut out = Vec::new();
    for z in bbox.lo[2]..bbox.hi[2] {
        for y in bbox.lo[1]..bbox.hi[1] {
            let row = h.index(0, y, z);
            for x in bbox.lo[0]..bbox.hi[0] {
                let i = row + x;
                if data[i] == 0 {
                    continue;
                }
                let boundary = x == 0
                    || x + 1 == nx
                    || y == 0
                    || y + 1 == ny
                    || z == 0
                    || z + 1 == nz
                    || data[i - 1] == 0
                    || data[i + 1] == 0
                    || data[i - sy] == 0
                    || data[i + sy] == 0
                    || data[i - sz] == 0
                    || data[i + sz] == 0;
                if boundary {
                    out.push(i);
                }
            }
        }
    }
    out
}

pub fn extract_surface(mask: &LabelMap) -> SurfaceSet {
    SurfaceSet {
        voxels: surface_indices(mask)
            .into_iter()
            .map(|i| mask.header.coords(i))
            .collect(),
        spacing: mask.spacing(),
    }
}

/// Sorted distances from each voxel of `from` to the nearest voxel of `to`.
fn directed_distances(
    mask: &LabelMap,
    bbox: BoundingBox,
    from: &[usize],
    to: &[usize],
) -> Vec<f64> {
    let h = &mask.header;
    let mut is_target = vec![false; h.voxel_count()];
    for &i in to {
        is_target[i] = true;
    }
    let sq = squared_edt_box(h, bbox, |i| is_target[i]);
    drop(is_target);
    let mut d: Vec<f64> = from
        .iter()
        .map(|&i| sq[bbox.local_index(h.coords(i))].sqrt())
        .collect();
    d.sort_by(f64::total_cmp);
    d
}

/// Both directed distance sets between the mask surfaces, each sorted.
struct SurfaceDistances {
    gt_to_pred: Vec<f64>,
    pred_to_gt: Vec<f64>,
}

impl SurfaceDistances {
    fn compute(gt: &LabelMap, pred: &LabelMap) -> Result<Self> {
        check_aligned(gt, pred)?;
        let (Some(bg), Some(bp)) = (BoundingBox::of_mask(gt), BoundingBox::of_mask(pred)) else {
            return Err(Error::EmptyMask {
                which: if gt.is_empty() { "ground-truth" } else { "prediction" },
            });
        };
        let bbox = bg.union(&bp);
        let sg = surface_indices(gt);
        let sp = surface_indices(pred);
        Ok(SurfaceDistances {
            gt_to_pred: directed_distances(gt, bbox, &sg, &sp),
            pred_to_gt: directed_distances(gt, bbox, &sp, &sg),
        })
    }

    fn at(&self, percentile: f64) -> f64 {
        let q = percentile / 100.0;
        let a = quantile_sorted(&self.gt_to_pred, q).unwrap();
        let b = quantile_sorted(&self.pred_to_gt, q).unwrap();
        a.max(b)
    }
}

fn check_percentile(p: f64) -> Result<()> {
    if p > 0.0 && p <= 100.0 {
        Ok(())
    } else {
        Err(Error::InvalidPercentile(p))
    }
}

/// Percentile Hausdorff distance in mm. `EmptyMask` when either side is empty.
pub fn hausdorff(gt: &LabelMap, pred: &LabelMap, percentile: f64) -> Result<f64> {
    check_percentile(percentile)?;
    Ok(SurfaceDistances::compute(gt, pred)?.at(percentile))
}

pub fn evaluate_pair(gt: &LabelMap, pred: &LabelMap) -> Result<MetricResult> {
    evaluate_pair_at(gt, pred, 95.0)
}

/// DSC, classic HD and the `percentile` HD in one pass over the surfaces.
pub fn evaluate_pair_at(gt: &LabelMap, pred: &LabelMap, percentile: f64) -> Result<MetricResult> {
    check_percentile(percentile)?;
    let counts = voxel_counts(gt, pred)?;
    let (hd_mm, hd95_mm) = match SurfaceDistances::compute(gt, pred) {
        Ok(d) => (Some(d.at(100.0)), Some(d.at(percentile))),
        Err(Error::EmptyMask { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(MetricResult {
        dsc: dice_from_counts(counts),
        hd_mm,
        hd95_mm,
        voxel_counts: counts,
    })
}
