//! Synthetic cohorts: CT-like volumes, organ and landmark masks, a tubular
//! CTV, and predictions degraded by a per-sex boundary error.
//!
//! All shapes are rasterized with integer arithmetic. Centres and radii are
//! fixed-point values in 1/16 voxel, so a phantom is bit-identical on every
//! platform. Geometry is laid out in fractions of the grid with +z superior.
//!
//! Per-patient jitter of the CTV comes from a ChaCha stream seeded by
//! `(seed, index)`, where `index` counts patients within one sex. Female `i`
//! and male `i` therefore share CTV geometry whenever `sex_size_ratio` is 1.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{CohortManifest, LandmarkPaths, PatientRecord, Sex, SuperiorAxis};
use crate::edt::{dilate, erode};
use crate::encoding::{GT_STRUCTURES, TS_STRUCTURES};
use crate::error::{Error, Result};
use crate::nifti::{write_labelmap, write_volume, Datatype, LabelMap, NiftiHeader, Volume3D};
use crate::regions::LandmarkSet;

const FIX: i64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Erode,
    Dilate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryError {
    pub kind: BoundaryKind,
    /// Voxels, unit spacing.
    pub radius: u32,
}

impl BoundaryError {
    pub fn erode(radius: u32) -> Self {
        BoundaryError {
            kind: BoundaryKind::Erode,
            radius,
        }
    }

    pub fn apply(&self, mask: &LabelMap) -> LabelMap {
        match self.kind {
            BoundaryKind::Erode => erode(mask, self.radius),
            BoundaryKind::Dilate => dilate(mask, self.radius),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub female: BoundaryError,
    pub male: BoundaryError,
    pub seed: u64,
}

impl ErrorModel {
    pub fn for_sex(&self, sex: Sex) -> BoundaryError {
        match sex {
            Sex::Female => self.female,
            Sex::Male => self.male,
        }
    }
}

/// Axial spans of the landmarks as fractions of the slice count, `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkTemplate {
    #[serde(rename = "vertebra_T1")]
    pub vertebra_t1: [f64; 2],
    pub stomach: [f64; 2],
    #[serde(rename = "vertebra_L4")]
    pub vertebra_l4: [f64; 2],
}

impl Default for LandmarkTemplate {
    fn default() -> Self {
        LandmarkTemplate {
            vertebra_t1: [0.74, 0.77],
            stomach: [0.46, 0.56],
            vertebra_l4: [0.27, 0.30],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f32; 3],
    pub n_female: usize,
    pub n_male: usize,
    /// Female organ and CTV radii relative to male.
    pub sex_size_ratio: f64,
    pub error_model: ErrorModel,
    pub landmarks: LandmarkTemplate,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [64, 64, 96],
            spacing: [3.0, 3.0, 5.0],
            n_female: 10,
            n_male: 10,
            sex_size_ratio: 1.0,
            error_model: ErrorModel {
                female: BoundaryError::erode(2),
                male: BoundaryError::erode(1),
                seed: 7,
            },
            landmarks: LandmarkTemplate::default(),
        }
    }
}

impl PhantomSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: PhantomSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.dims.iter().any(|&d| !(32..=4096).contains(&d)) {
            return bad(format!("dims {:?} must each be in 32..=4096", self.dims));
        }
        if self.spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad(format!("spacing {:?} must be positive", self.spacing));
        }
        if !(self.sex_size_ratio.is_finite() && self.sex_size_ratio > 0.0 && self.sex_size_ratio <= 1.5) {
            return bad(format!("sex_size_ratio {} must be in (0, 1.5]", self.sex_size_ratio));
        }
        let lm = &self.landmarks;
        let spans = [lm.vertebra_t1, lm.stomach, lm.vertebra_l4];
        if spans.iter().any(|[lo, hi]| !(0.0 < *lo && lo < hi && *hi < 1.0)) {
            return bad("landmark spans must satisfy 0 < lo < hi < 1".into());
        }
        let nz = self.dims[2];
        let [t1, st, l4] = spans.map(|s| slice_span(s, nz));
        if !(t1.0 > st.1 && st.0 > l4.1) {
            return bad("landmark spans must be strictly ordered T1 > stomach > L4".into());
        }
        Ok(())
    }

    pub fn header(&self) -> NiftiHeader {
        NiftiHeader::new(self.dims, self.spacing)
    }
}

fn slice_span([lo, hi]: [f64; 2], nz: usize) -> (usize, usize) {
    let lo = ((lo * nz as f64).round() as usize).min(nz - 1);
    let hi = ((hi * nz as f64).round() as usize).min(nz - 1);
    (lo, hi.max(lo))
}

/// Axis-aligned ellipsoid in 1/16-voxel fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ellipsoid {
    pub center: [i64; 3],
    pub radii: [i64; 3],
}

impl Ellipsoid {
    /// From fractional centre and radii of the grid, radii scaled by `scale`.
    fn from_fractions(dims: [usize; 3], center: [f64; 3], radii: [f64; 3], scale: f64) -> Self {
        let fix = |f: f64, n: usize| (f * n as f64 * FIX as f64).round() as i64;
        Ellipsoid {
            center: [0, 1, 2].map(|a| fix(center[a], dims[a])),
            // at least one voxel, so the voxel nearest the centre is always inside
            radii: [0, 1, 2].map(|a| fix(radii[a] * scale, dims[a]).max(FIX)),
        }
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        let r2 = self.radii.map(|r| i128::from(r) * i128::from(r));
        let d2 = [0, 1, 2].map(|a| {
            let d = i128::from(p[a] as i64 * FIX - self.center[a]);
            d * d
        });
        d2[0] * r2[1] * r2[2] + d2[1] * r2[0] * r2[2] + d2[2] * r2[0] * r2[1] <= r2[0] * r2[1] * r2[2]
    }

    fn voxel_range(&self, axis: usize, n: usize) -> std::ops::Range<usize> {
        let lo = (self.center[axis] - self.radii[axis]).div_euclid(FIX).max(0) as usize;
        let hi = ((self.center[axis] + self.radii[axis]).div_euclid(FIX) + 1).clamp(0, n as i64) as usize;
        lo.min(n)..hi
    }

    pub fn paint(&self, mask: &mut LabelMap) {
        let dims = mask.header.dims;
        for z in self.voxel_range(2, dims[2]) {
            for y in self.voxel_range(1, dims[1]) {
                for x in self.voxel_range(0, dims[0]) {
                    if self.contains([x, y, z]) {
                        mask.set(x, y, z, 1);
                    }
                }
            }
        }
    }
}

/// Vertical cylinder with elliptic cross-section, fixed point in x/y,
/// inclusive slice span in z.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tube {
    pub center: [i64; 2],
    pub radii: [i64; 2],
    pub z_span: (usize, usize),
}

impl Tube {
    pub fn paint(&self, mask: &mut LabelMap) {
        let [nx, ny, nz] = mask.header.dims;
        let r2 = self.radii.map(|r| i128::from(r) * i128::from(r));
        for z in self.z_span.0..=self.z_span.1.min(nz - 1) {
            for y in 0..ny {
                for x in 0..nx {
                    let dx = i128::from(x as i64 * FIX - self.center[0]);
                    let dy = i128::from(y as i64 * FIX - self.center[1]);
                    if dx * dx * r2[1] + dy * dy * r2[0] <= r2[0] * r2[1] {
                        mask.set(x, y, z, 1);
                    }
                }
            }
        }
    }
}

/// Organ layout for a male phantom: name, CT value, and one or two
/// ellipsoids as (centre, radii) fractions.
type Part = ([f64; 3], [f64; 3]);

fn organ_layout(lm: &LandmarkTemplate) -> Vec<(&'static str, f64, Vec<Part>)> {
    let pair = |x: f64, y: f64, z: f64, r: [f64; 3]| vec![([x, y, z], r), ([1.0 - x, y, z], r)];
    let st_mid = (lm.stomach[0] + lm.stomach[1]) / 2.0;
    let st_half = (lm.stomach[1] - lm.stomach[0]) / 2.0;
    vec![
        ("spleen", 50.0, vec![([0.80, 0.62, 0.50], [0.05, 0.06, 0.04])]),
        ("liver", 60.0, vec![([0.35, 0.50, 0.50], [0.14, 0.12, 0.05])]),
        ("eyes", 10.0, pair(0.42, 0.30, 0.92, [0.04, 0.04, 0.02])),
        ("kidneys", 30.0, pair(0.36, 0.66, 0.40, [0.05, 0.05, 0.05])),
        ("femurs", 700.0, pair(0.38, 0.50, 0.08, [0.05, 0.05, 0.07])),
        ("stomach", 20.0, vec![([0.65, 0.42, st_mid], [0.08, 0.07, st_half])]),
        ("heart", 45.0, vec![([0.55, 0.45, 0.66], [0.12, 0.10, 0.06])]),
        ("humeri", 700.0, pair(0.12, 0.50, 0.68, [0.03, 0.03, 0.08])),
        ("scapulae", 600.0, pair(0.30, 0.78, 0.70, [0.08, 0.02, 0.05])),
        ("clavicles", 650.0, pair(0.35, 0.25, 0.75, [0.10, 0.02, 0.01])),
        ("hips", 650.0, pair(0.30, 0.55, 0.20, [0.08, 0.08, 0.06])),
        ("sacrum", 600.0, vec![([0.50, 0.72, 0.22], [0.05, 0.04, 0.06])]),
        ("urinary_bladder", 5.0, vec![([0.50, 0.35, 0.14], [0.06, 0.06, 0.05])]),
        ("pancreas", 40.0, vec![([0.50, 0.55, 0.43], [0.08, 0.03, 0.025])]),
        ("iliopsoas", 55.0, pair(0.42, 0.66, 0.29, [0.03, 0.03, 0.05])),
    ]
}

/// Ground-truth vocabulary first, then the TotalSegmentator-only names.
pub fn phantom_vocabulary() -> Vec<String> {
    let mut v: Vec<String> = GT_STRUCTURES.iter().map(|s| s.to_string()).collect();
    for s in TS_STRUCTURES {
        if !v.iter().any(|x| x == s) {
            v.push(s.to_string());
        }
    }
    v
}

const BODY_HU: f64 = 40.0;
const AIR_HU: f64 = -1000.0;
const VERTEBRA_HU: f64 = 500.0;

/// One phantom patient held in memory.
#[derive(Debug, Clone)]
pub struct PhantomPatient {
    pub patient_id: String,
    pub sex: Sex,
    pub ct: Volume3D,
    pub gt_ctv: LabelMap,
    pub pred_ctv: LabelMap,
    /// In [`phantom_vocabulary`] order.
    pub structures: Vec<(String, LabelMap)>,
    pub landmarks: LandmarkSet,
}

pub fn patient_id(sex: Sex, index: usize) -> String {
    let prefix = match sex {
        Sex::Female => 'F',
        Sex::Male => 'M',
    };
    format!("{prefix}{index:03}")
}

fn patient_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn vertebra(dims: [usize; 3], span: (usize, usize)) -> LabelMap {
    let mut m = LabelMap::empty(NiftiHeader::new(dims, [1.0; 3]));
    let cx = dims[0] / 2;
    let cy = dims[1] * 70 / 100;
    let hx = (dims[0] * 4 / 100).max(1);
    let hy = (dims[1] * 4 / 100).max(1);
    for z in span.0..=span.1 {
        for y in cy - hy..=cy + hy {
            for x in cx - hx..=cx + hx {
                m.set(x, y, z, 1);
            }
        }
    }
    m
}

fn ctv(spec: &PhantomSpec, scale: f64, rng: &mut ChaCha8Rng) -> LabelMap {
    let dims = spec.dims;
    let header = spec.header();
    let mut m = LabelMap::empty(header);
    let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(-FIX..=FIX);
    let fix = |f: f64, n: usize| (f * n as f64 * FIX as f64).round() as i64;
    let tube = Tube {
        center: [fix(0.5, dims[0]) + jitter(rng), fix(0.58, dims[1]) + jitter(rng)],
        radii: [
            fix(0.07 * scale, dims[0]).max(FIX),
            fix(0.07 * scale, dims[1]).max(FIX),
        ],
        z_span: slice_span([0.03, 0.95], dims[2]),
    };
    tube.paint(&mut m);
    let bulges: [Part; 6] = [
        ([0.40, 0.55, 0.84], [0.05, 0.05, 0.05]),
        ([0.60, 0.55, 0.84], [0.05, 0.05, 0.05]),
        ([0.50, 0.50, 0.66], [0.06, 0.08, 0.05]),
        ([0.58, 0.48, 0.50], [0.06, 0.06, 0.05]),
        ([0.38, 0.55, 0.18], [0.05, 0.05, 0.06]),
        ([0.62, 0.55, 0.18], [0.05, 0.05, 0.06]),
    ];
    for (c, r) in bulges {
        // ±2/16 voxel wobble on each radius
        let mut e = Ellipsoid::from_fractions(dims, c, r, scale);
        for radius in &mut e.radii {
            *radius += rng.gen_range(-2..=2);
        }
        e.paint(&mut m);
    }
    m
}

/// Build one patient in memory.
pub fn build_patient(spec: &PhantomSpec, sex: Sex, index: usize) -> Result<PhantomPatient> {
    spec.validate()?;
    let dims = spec.dims;
    let header = spec.header();
    let scale = match sex {
        Sex::Female => spec.sex_size_ratio,
        Sex::Male => 1.0,
    };
    let mut rng = patient_rng(spec.error_model.seed, index);

    let mut ct = Volume3D::filled(header.clone(), AIR_HU);
    ct.header.datatype = Datatype::Int16;
    let body = Tube {
        center: [(dims[0] as i64 * FIX) / 2, (dims[1] as i64 * FIX) / 2],
        radii: [dims[0] as i64 * FIX * 42 / 100, dims[1] as i64 * FIX * 30 / 100],
        z_span: (0, dims[2] - 1),
    };
    let mut body_mask = LabelMap::empty(header.clone());
    body.paint(&mut body_mask);
    for (i, v) in ct.data.iter_mut().enumerate() {
        if body_mask.data[i] != 0 {
            let z = i / (dims[0] * dims[1]);
            *v = BODY_HU + ((10 * z) / dims[2]) as f64;
        }
    }

    let mut structures = Vec::new();
    for (name, hu, parts) in organ_layout(&spec.landmarks) {
        let mut m = LabelMap::empty(header.clone());
        for (c, r) in parts {
            Ellipsoid::from_fractions(dims, c, r, scale).paint(&mut m);
        }
        for (v, &on) in ct.data.iter_mut().zip(&m.data) {
            if on != 0 {
                *v = hu;
            }
        }
        structures.push((name.to_string(), m));
    }
    let order = phantom_vocabulary();
    structures.sort_by_key(|(n, _)| order.iter().position(|o| o == n));

    let lm = &spec.landmarks;
    let mut t1 = vertebra(dims, slice_span(lm.vertebra_t1, dims[2]));
    let mut l4 = vertebra(dims, slice_span(lm.vertebra_l4, dims[2]));
    t1.header = header.clone();
    l4.header = header.clone();
    for (v, (&a, &b)) in ct.data.iter_mut().zip(t1.data.iter().zip(&l4.data)) {
        if a != 0 || b != 0 {
            *v = VERTEBRA_HU;
        }
    }
    let stomach = structures
        .iter()
        .find(|(n, _)| n == "stomach")
        .map(|(_, m)| m.clone())
        .unwrap();

    let gt_ctv = ctv(spec, scale, &mut rng);
    let pred_ctv = spec.error_model.for_sex(sex).apply(&gt_ctv);

    Ok(PhantomPatient {
        patient_id: patient_id(sex, index),
        sex,
        ct,
        gt_ctv,
        pred_ctv,
        structures,
        landmarks: LandmarkSet {
            vertebra_t1: t1,
            stomach,
            vertebra_l4: l4,
        },
    })
}

/// Build one patient and write it under `out_dir/<patient_id>/`; paths in
/// the returned record are absolute-or-as-given under `out_dir`.
pub fn generate_patient(spec: &PhantomSpec, sex: Sex, index: usize, out_dir: &Path) -> Result<PatientRecord> {
    let p = build_patient(spec, sex, index)?;
    let dir = out_dir.join(&p.patient_id);
    let sdir = dir.join("structures");
    let ldir = dir.join("landmarks");
    for d in [&dir, &sdir, &ldir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let ct_path = dir.join("ct.nii.gz");
    write_volume(&p.ct, &ct_path, Datatype::Int16)?;
    let gt_path = dir.join("gt_ctv.nii.gz");
    write_labelmap(&p.gt_ctv, &gt_path)?;
    let pred_path = dir.join("pred_ctv.nii.gz");
    write_labelmap(&p.pred_ctv, &pred_path)?;

    let mut structure_paths = std::collections::BTreeMap::new();
    for (name, m) in &p.structures {
        let path = sdir.join(format!("{name}.nii.gz"));
        write_labelmap(m, &path)?;
        structure_paths.insert(name.clone(), path);
    }
    let t1_path = ldir.join("vertebra_T1.nii.gz");
    write_labelmap(&p.landmarks.vertebra_t1, &t1_path)?;
    let l4_path = ldir.join("vertebra_L4.nii.gz");
    write_labelmap(&p.landmarks.vertebra_l4, &l4_path)?;
    let stomach_path = structure_paths["stomach"].clone();

    Ok(PatientRecord {
        patient_id: p.patient_id,
        sex,
        ct_path,
        gt_ctv_path: gt_path,
        pred_ctv_path: Some(pred_path),
        structure_paths,
        landmark_paths: LandmarkPaths {
            vertebra_t1: t1_path,
            stomach: stomach_path,
            vertebra_l4: l4_path,
        },
    })
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPEC_FILE: &str = "phantom_spec.json";

/// Generate every patient, then write `manifest.json` (paths relative to
/// `out_dir`) and the effective spec. Returns the manifest and its path.
pub fn generate_cohort(spec: &PhantomSpec, out_dir: &Path) -> Result<(CohortManifest, PathBuf)> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let jobs: Vec<(Sex, usize)> = (0..spec.n_female)
        .map(|i| (Sex::Female, i))
        .chain((0..spec.n_male).map(|i| (Sex::Male, i)))
        .collect();
    let mut records = jobs
        .par_iter()
        .map(|&(sex, i)| generate_patient(spec, sex, i, out_dir))
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    let manifest = CohortManifest {
        records,
        structure_vocabulary: phantom_vocabulary(),
        superior: SuperiorAxis::PlusZ,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let text = manifest.to_json(out_dir)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let spec_path = out_dir.join(SPEC_FILE);
    let mut spec_text = serde_json::to_string_pretty(spec)?;
    spec_text.push('\n');
    std::fs::write(&spec_path, spec_text).map_err(|e| Error::io(&spec_path, e))?;
    Ok((manifest, path))
}
