//! Axial body-region partition from landmark structures.
//!
//! Boundaries, in superior-to-inferior order:
//! - `b1`: most superior slice of vertebra T1 (HN above, THX from here down)
//! - `b2`: most superior slice of the stomach (ABDM from here down)
//! - `b3`: most inferior slice of vertebra L4 (PELV strictly below)
//!
//! Writing slices by height above the lowest slice: HN = (b1, top],
//! THX = (b2, b1], ABDM = [b3, b2], PELV = [bottom, b3). Every slice lands in
//! exactly one region.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::{LandmarkPaths, SuperiorAxis};
use crate::error::{Error, Result};
use crate::nifti::{check_aligned, read_labelmap, Grid, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "HN")]
    HeadNeck,
    #[serde(rename = "THX")]
    Thorax,
    #[serde(rename = "ABDM")]
    Abdomen,
    #[serde(rename = "PELV")]
    Pelvis,
}

impl Region {
    /// Superior to inferior.
    pub const ALL: [Region; 4] = [Region::HeadNeck, Region::Thorax, Region::Abdomen, Region::Pelvis];

    pub fn id(self) -> &'static str {
        match self {
            Region::HeadNeck => "HN",
            Region::Thorax => "THX",
            Region::Abdomen => "ABDM",
            Region::Pelvis => "PELV",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Region::ALL
            .into_iter()
            .find(|r| r.id() == s)
            .ok_or_else(|| format!("unknown region {s:?}"))
    }
}

/// A landmark mask for each boundary, on the CT grid.
#[derive(Debug, Clone)]
pub struct LandmarkSet {
    pub vertebra_t1: LabelMap,
    pub stomach: LabelMap,
    pub vertebra_l4: LabelMap,
}

impl LandmarkSet {
    pub fn load(paths: &LandmarkPaths) -> Result<Self> {
        let load = |p: &Path| read_labelmap(p);
        Ok(LandmarkSet {
            vertebra_t1: load(&paths.vertebra_t1)?,
            stomach: load(&paths.stomach)?,
            vertebra_l4: load(&paths.vertebra_l4)?,
        })
    }
}

/// Half-open slice interval `[lo, hi)` in z-index space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceRange {
    pub lo: usize,
    pub hi: usize,
}

impl SliceRange {
    pub fn contains(&self, z: usize) -> bool {
        self.lo <= z && z < self.hi
    }

    pub fn len(&self) -> usize {
        self.hi.saturating_sub(self.lo)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionBounds {
    /// z-indices of the three boundary slices.
    pub b1: usize,
    pub b2: usize,
    pub b3: usize,
    pub n_slices: usize,
    pub superior: SuperiorAxis,
    ranges: [SliceRange; 4],
}

impl RegionBounds {
    pub fn range(&self, region: Region) -> SliceRange {
        self.ranges[region as usize]
    }

    pub fn region_of(&self, z: usize) -> Option<Region> {
        Region::ALL.into_iter().find(|&r| self.range(r).contains(z))
    }

    /// A single region covering every slice.
    pub fn single(n_slices: usize, region: Region) -> Self {
        let mut ranges = [SliceRange { lo: 0, hi: 0 }; 4];
        ranges[region as usize] = SliceRange { lo: 0, hi: n_slices };
        RegionBounds {
            b1: 0,
            b2: 0,
            b3: 0,
            n_slices,
            superior: SuperiorAxis::PlusZ,
            ranges,
        }
    }
}

/// Audit record for one patient's region boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsRecord {
    pub patient_id: String,
    pub b1: usize,
    pub b2: usize,
    pub b3: usize,
    pub n_slices: usize,
}

impl BoundsRecord {
    pub fn new(patient_id: &str, b: &RegionBounds) -> Self {
        BoundsRecord {
            patient_id: patient_id.to_string(),
            b1: b.b1,
            b2: b.b2,
            b3: b.b3,
            n_slices: b.n_slices,
        }
    }
}

/// Lowest and highest z-index holding foreground, or `None` if empty.
fn z_extent(mask: &LabelMap) -> Option<(usize, usize)> {
    let [nx, ny, nz] = mask.dims();
    let plane = nx * ny;
    let occupied = |z: usize| mask.data[z * plane..(z + 1) * plane].iter().any(|&v| v != 0);
    let lo = (0..nz).find(|&z| occupied(z))?;
    let hi = (0..nz).rev().find(|&z| occupied(z))?;
    Some((lo, hi))
}

pub fn compute_bounds(landmarks: &LandmarkSet, superior: SuperiorAxis) -> Result<RegionBounds> {
    check_aligned(&landmarks.vertebra_t1, &landmarks.stomach)?;
    check_aligned(&landmarks.vertebra_t1, &landmarks.vertebra_l4)?;
    let nz = landmarks.vertebra_t1.dims()[2];
    // height: 0 at the most inferior slice
    let height = |z: usize| match superior {
        SuperiorAxis::PlusZ => z,
        SuperiorAxis::MinusZ => nz - 1 - z,
    };
    let span = |m: &LabelMap, name: &'static str| -> Result<(usize, usize)> {
        let (lo, hi) = z_extent(m).ok_or(Error::EmptyLandmark(name))?;
        let (a, b) = (height(lo), height(hi));
        Ok((a.min(b), a.max(b)))
    };
    let t1 = span(&landmarks.vertebra_t1, "vertebra_T1")?;
    let st = span(&landmarks.stomach, "stomach")?;
    let l4 = span(&landmarks.vertebra_l4, "vertebra_L4")?;

    let (h1, h2, h3) = (t1.1, st.1, l4.0);
    let index = |h: usize| height(h);
    if h1 < h2 || h2 < h3 {
        return Err(Error::NonMonotonicLandmarks {
            b1: index(h1),
            b2: index(h2),
            b3: index(h3),
        });
    }
    // height intervals, half-open
    let by_height = [
        (h1 + 1, nz),
        (h2 + 1, h1 + 1),
        (h3, h2 + 1),
        (0, h3),
    ];
    let ranges = by_height.map(|(lo, hi)| match superior {
        SuperiorAxis::PlusZ => SliceRange { lo, hi },
        SuperiorAxis::MinusZ => SliceRange {
            lo: nz - hi,
            hi: nz - lo,
        },
    });
    Ok(RegionBounds {
        b1: index(h1),
        b2: index(h2),
        b3: index(h3),
        n_slices: nz,
        superior,
        ranges,
    })
}

/// Zero every voxel outside `region`'s slices; the grid is unchanged.
pub fn crop_to_region(mask: &LabelMap, bounds: &RegionBounds, region: Region) -> Result<LabelMap> {
    let [nx, ny, nz] = mask.dims();
    if nz != bounds.n_slices {
        return Err(Error::GridMismatch(format!(
            "mask has {nz} slices, bounds were computed on {}",
            bounds.n_slices
        )));
    }
    let range = bounds.range(region);
    let plane = nx * ny;
    let mut out = mask.clone();
    for z in (0..nz).filter(|&z| !range.contains(z)) {
        out.data[z * plane..(z + 1) * plane].fill(0);
    }
    Ok(out)
}
