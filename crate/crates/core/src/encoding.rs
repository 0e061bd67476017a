//! Auxiliary input channels built from anatomical prior masks.
//!
//! Five strategies:
//!
//! | id      | channels | structures        | intensities | z-score |
//! |---------|----------|-------------------|-------------|---------|
//! | `MI_Z`  | 1        | ground truth      | distinct    | yes     |
//! | `EQ_Z`  | 1        | ground truth      | all 255     | yes     |
//! | `CROP_Z`| 2        | ground truth      | CT inside   | yes     |
//! | `MI`    | 1        | ground truth      | distinct    | no      |
//! | `MI_TS` | 1        | TotalSegmentator  | distinct    | no      |
//!
//! Distinct intensities are `round(255·i/N)` for the i-th structure (1-based)
//! in manifest vocabulary order. Where masks overlap, the structure with fewer
//! foreground voxels wins, ties going to the earlier structure. Z-scoring uses
//! the mean and population standard deviation over every voxel of the
//! channel; a constant channel becomes all zeros.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::{canonical_structure_name, PatientRecord};
use crate::error::{Error, Result};
use crate::nifti::{check_aligned, read_labelmap, read_volume, write_volume, Datatype, Grid, LabelMap, Volume3D};

/// Structures delineated in the clinical ground truth.
pub const GT_STRUCTURES: [&str; 7] = ["spleen", "liver", "eyes", "kidneys", "femurs", "stomach", "heart"];

/// Structures taken from TotalSegmentator output. Left/right instances are
/// merged into one mask per name.
pub const TS_STRUCTURES: [&str; 13] = [
    "humeri",
    "scapulae",
    "clavicles",
    "femurs",
    "hips",
    "sacrum",
    "spleen",
    "liver",
    "stomach",
    "urinary_bladder",
    "pancreas",
    "kidneys",
    "iliopsoas",
];

pub const ZSCORE_SCOPE: &str = "all voxels of the channel, population std; std = 0 gives zeros";
pub const OVERLAP_RULE: &str = "smallest structure wins, ties by vocabulary order";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "MI_Z")]
    MiZ,
    #[serde(rename = "EQ_Z")]
    EqZ,
    #[serde(rename = "CROP_Z")]
    CropZ,
    #[serde(rename = "MI")]
    Mi,
    #[serde(rename = "MI_TS")]
    MiTs,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::MiZ,
        StrategyKind::EqZ,
        StrategyKind::CropZ,
        StrategyKind::Mi,
        StrategyKind::MiTs,
    ];

    pub fn id(self) -> &'static str {
        match self {
            StrategyKind::MiZ => "MI_Z",
            StrategyKind::EqZ => "EQ_Z",
            StrategyKind::CropZ => "CROP_Z",
            StrategyKind::Mi => "MI",
            StrategyKind::MiTs => "MI_TS",
        }
    }

    pub fn zscore(self) -> bool {
        matches!(self, StrategyKind::MiZ | StrategyKind::EqZ | StrategyKind::CropZ)
    }

    pub fn default_structures(self) -> &'static [&'static str] {
        match self {
            StrategyKind::MiTs => &TS_STRUCTURES,
            _ => &GT_STRUCTURES,
        }
    }

    pub fn channel_count(self) -> usize {
        if self == StrategyKind::CropZ {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    /// Accepts `mi-z`, `MI_Z`, and `ei-z` as an alias of `eq-z`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "mi-z" => Ok(StrategyKind::MiZ),
            "eq-z" | "ei-z" => Ok(StrategyKind::EqZ),
            "crop-z" => Ok(StrategyKind::CropZ),
            "mi" => Ok(StrategyKind::Mi),
            "mi-ts" => Ok(StrategyKind::MiTs),
            _ => Err(format!("unknown strategy {s:?} (expected mi-z, eq-z, crop-z, mi, mi-ts)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingStrategy {
    pub kind: StrategyKind,
    pub structure_set: Vec<String>,
}

impl EncodingStrategy {
    pub fn new(kind: StrategyKind, structure_set: Vec<String>) -> Result<Self> {
        if structure_set.is_empty() {
            return Err(Error::EmptyStructureSet);
        }
        Ok(EncodingStrategy { kind, structure_set })
    }

    /// The strategy's standard structure list, ordered as in `vocabulary`.
    pub fn for_vocabulary(kind: StrategyKind, vocabulary: &[String]) -> Result<Self> {
        let mut ranked = Vec::new();
        for name in kind.default_structures() {
            let pos = vocabulary
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::UnknownStructureName(name.to_string()))?;
            ranked.push((pos, name.to_string()));
        }
        ranked.sort();
        Self::new(kind, ranked.into_iter().map(|(_, n)| n).collect())
    }

    pub fn zscore(&self) -> bool {
        self.kind.zscore()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityMode {
    Distinct,
    Equal,
}

/// Intensity per structure, in structure order; background is 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntensityCode {
    pub assignments: Vec<(String, u8)>,
}

impl IntensityCode {
    pub fn get(&self, name: &str) -> Option<u8> {
        self.assignments.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn as_map(&self) -> BTreeMap<String, u8> {
        self.assignments.iter().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: f64,
    pub std: f64,
}

pub fn assign_intensities(structures: &[String], mode: IntensityMode) -> Result<IntensityCode> {
    let n = structures.len();
    if n == 0 {
        return Err(Error::EmptyStructureSet);
    }
    if n > 255 {
        return Err(Error::TooManyStructures(n));
    }
    let assignments = structures
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let value = match mode {
                // round(255·i/N) with i 1-based, in integers
                IntensityMode::Distinct => (2 * 255 * (i + 1) + n) / (2 * n),
                IntensityMode::Equal => 255,
            };
            (name.clone(), value as u8)
        })
        .collect();
    Ok(IntensityCode { assignments })
}

/// Paint each mask with its code; `masks[i]` pairs with
/// `code.assignments[i]`.
pub fn rasterize_channel(grid: &impl Grid, masks: &[LabelMap], code: &IntensityCode) -> Result<Volume3D> {
    if masks.len() != code.assignments.len() {
        return Err(Error::Schema {
            context: "rasterize_channel".into(),
            message: format!("{} masks for {} codes", masks.len(), code.assignments.len()),
        });
    }
    for m in masks {
        check_aligned(grid, m)?;
    }
    let mut order: Vec<(usize, usize)> = masks.iter().map(LabelMap::count).zip(0..).collect();
    // paint lowest precedence first so the winner is written last
    order.sort_by(|a, b| b.cmp(a));
    let mut header = grid.header().clone();
    header.datatype = Datatype::Uint8;
    let mut out = Volume3D::filled(header, 0.0);
    for (_, i) in order {
        let value = f64::from(code.assignments[i].1);
        for (o, &m) in out.data.iter_mut().zip(&masks[i].data) {
            if m != 0 {
                *o = value;
            }
        }
    }
    Ok(out)
}

pub fn zscore(channel: &Volume3D) -> (Volume3D, NormalizationStats) {
    let n = channel.data.len() as f64;
    let mean = channel.data.iter().sum::<f64>() / n;
    let var = channel.data.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let mut header = channel.header.clone();
    header.datatype = Datatype::Float32;
    let data = if std > 0.0 {
        channel.data.iter().map(|&x| (x - mean) / std).collect()
    } else {
        vec![0.0; channel.data.len()]
    };
    (Volume3D { header, data }, NormalizationStats { mean, std })
}

/// The two cropped-CT channels before normalization: CT inside the union of
/// the masks, with 0 (first) or 255 (second) outside.
pub fn crop_channels(ct: &Volume3D, masks: &[LabelMap]) -> Result<(Volume3D, Volume3D)> {
    for m in masks {
        check_aligned(ct, m)?;
    }
    let inside = |i: usize| masks.iter().any(|m| m.data[i] != 0);
    let fill = |outside: f64| {
        let data = (0..ct.data.len())
            .map(|i| if inside(i) { ct.data[i] } else { outside })
            .collect();
        Volume3D {
            header: ct.header.clone(),
            data,
        }
    };
    Ok((fill(0.0), fill(255.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedChannel {
    pub volume: Volume3D,
    pub stats: Option<NormalizationStats>,
}

impl EncodedChannel {
    fn datatype(&self) -> Datatype {
        if self.stats.is_some() {
            Datatype::Float32
        } else {
            Datatype::Uint8
        }
    }
}

/// Both cropped-CT channels, z-scored.
pub fn encode_crop(ct: &Volume3D, masks: &[LabelMap]) -> Result<(EncodedChannel, EncodedChannel)> {
    let (a, b) = crop_channels(ct, masks)?;
    let z = |v: &Volume3D| {
        let (volume, stats) = zscore(v);
        EncodedChannel {
            volume,
            stats: Some(stats),
        }
    };
    Ok((z(&a), z(&b)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub strategy: StrategyKind,
    pub structures: Vec<String>,
    pub code: Option<IntensityCode>,
    pub channels: Vec<EncodedChannel>,
}

/// Apply a strategy to in-memory masks, `masks[i]` being
/// `strategy.structure_set[i]`.
pub fn encode_volumes(strategy: &EncodingStrategy, ct: &Volume3D, masks: &[LabelMap]) -> Result<Encoding> {
    let kind = strategy.kind;
    let (code, channels) = match kind {
        StrategyKind::CropZ => {
            let (a, b) = encode_crop(ct, masks)?;
            (None, vec![a, b])
        }
        _ => {
            let mode = if kind == StrategyKind::EqZ {
                IntensityMode::Equal
            } else {
                IntensityMode::Distinct
            };
            let code = assign_intensities(&strategy.structure_set, mode)?;
            let raw = rasterize_channel(ct, masks, &code)?;
            let channel = if kind.zscore() {
                let (volume, stats) = zscore(&raw);
                EncodedChannel {
                    volume,
                    stats: Some(stats),
                }
            } else {
                EncodedChannel {
                    volume: raw,
                    stats: None,
                }
            };
            (Some(code), vec![channel])
        }
    };
    Ok(Encoding {
        strategy: kind,
        structures: strategy.structure_set.clone(),
        code,
        channels,
    })
}

/// Load a patient's CT and structure masks and encode them.
pub fn encode(strategy: &EncodingStrategy, patient: &PatientRecord) -> Result<Encoding> {
    let paths = strategy
        .structure_set
        .iter()
        .map(|name| {
            patient
                .structure_paths
                .get(&canonical_structure_name(name))
                .ok_or_else(|| Error::MissingStructure {
                    patient_id: patient.patient_id.clone(),
                    structure: name.clone(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let ct = read_volume(&patient.ct_path)?;
    let masks = paths.into_iter().map(read_labelmap).collect::<Result<Vec<_>>>()?;
    encode_volumes(strategy, &ct, &masks)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChannelSidecar {
    pub file: String,
    pub datatype: Datatype,
    pub stats: Option<NormalizationStats>,
}

/// Provenance written next to the channel files.
#[derive(Debug, Serialize, Deserialize)]
pub struct EncodingSidecar {
    pub patient_id: String,
    pub strategy: StrategyKind,
    pub structures: Vec<String>,
    pub intensity_code: Option<BTreeMap<String, u8>>,
    pub zscore: bool,
    pub zscore_scope: String,
    pub overlap_rule: String,
    pub channels: Vec<ChannelSidecar>,
}

impl Encoding {
    pub fn channel_file_name(patient_id: &str, kind: StrategyKind, k: usize) -> String {
        format!("{patient_id}_{}_{k}.nii.gz", kind.id())
    }

    pub fn sidecar_file_name(patient_id: &str, kind: StrategyKind) -> String {
        format!("{patient_id}_{}.json", kind.id())
    }

    /// Write channel files and the sidecar into `dir`; returns every path
    /// written.
    pub fn write(&self, dir: &Path, patient_id: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut channels = Vec::new();
        for (k, ch) in self.channels.iter().enumerate() {
            let name = Self::channel_file_name(patient_id, self.strategy, k);
            let path = dir.join(&name);
            write_volume(&ch.volume, &path, ch.datatype())?;
            written.push(path);
            channels.push(ChannelSidecar {
                file: name,
                datatype: ch.datatype(),
                stats: ch.stats,
            });
        }
        let sidecar = EncodingSidecar {
            patient_id: patient_id.to_string(),
            strategy: self.strategy,
            structures: self.structures.clone(),
            intensity_code: self.code.as_ref().map(IntensityCode::as_map),
            zscore: self.strategy.zscore(),
            zscore_scope: ZSCORE_SCOPE.into(),
            overlap_rule: OVERLAP_RULE.into(),
            channels,
        };
        let path = dir.join(Self::sidecar_file_name(patient_id, self.strategy));
        let mut text = serde_json::to_string_pretty(&sidecar)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nifti::NiftiHeader;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    fn grid(dims: [usize; 3]) -> NiftiHeader {
        NiftiHeader::new(dims, [1.0; 3])
    }

    fn mask_with(dims: [usize; 3], voxels: impl IntoIterator<Item = usize>) -> LabelMap {
        let mut m = LabelMap::empty(grid(dims));
        for i in voxels {
            m.data[i] = 1;
        }
        m
    }

    #[test]
    fn seven_structures_get_evenly_spaced_codes() {
        // round(255·i/7) evaluated by hand: 36.43, 72.86, 109.29, 145.71, 182.14, 218.57, 255
        let code = assign_intensities(&names(7), IntensityMode::Distinct).unwrap();
        let values: Vec<u8> = code.assignments.iter().map(|a| a.1).collect();
        assert_eq!(values, [36, 73, 109, 146, 182, 219, 255]);

        let one = assign_intensities(&names(1), IntensityMode::Distinct).unwrap();
        assert_eq!(one.assignments[0].1, 255);

        let eq = assign_intensities(&names(9), IntensityMode::Equal).unwrap();
        assert!(eq.assignments.iter().all(|a| a.1 == 255));
    }

    #[test]
    fn distinct_codes_never_collide() {
        for n in 1..=255 {
            let code = assign_intensities(&names(n), IntensityMode::Distinct).unwrap();
            let mut v: Vec<u8> = code.assignments.iter().map(|a| a.1).collect();
            assert!(v.iter().all(|&x| x >= 1));
            v.dedup();
            assert_eq!(v.len(), n);
        }
        assert!(matches!(
            assign_intensities(&names(256), IntensityMode::Distinct),
            Err(Error::TooManyStructures(256))
        ));
    }

    #[test]
    fn rasterize_disjoint_and_overlapping() {
        let dims = [4, 4, 1];
        let code = IntensityCode {
            assignments: vec![("a".into(), 100), ("b".into(), 200)],
        };
        let out = rasterize_channel(&grid(dims), &[mask_with(dims, [0]), mask_with(dims, [5])], &code).unwrap();
        assert_eq!(out.data[0], 100.0);
        assert_eq!(out.data[5], 200.0);
        assert_eq!(out.data.iter().filter(|&&v| v != 0.0).count(), 2);

        // sizes 10 and 3, overlapping on voxels 8 and 9
        let big = mask_with(dims, 0..10);
        let small = mask_with(dims, 8..11);
        let out = rasterize_channel(&grid(dims), &[big, small], &code).unwrap();
        let expect: Vec<f64> = (0..16)
            .map(|i| match i {
                0..=7 => 100.0,
                8..=10 => 200.0,
                _ => 0.0,
            })
            .collect();
        assert_eq!(out.data, expect);

        let empty = rasterize_channel(&grid(dims), &[], &IntensityCode { assignments: vec![] }).unwrap();
        assert!(empty.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equal_size_overlap_goes_to_earlier_structure() {
        let dims = [4, 1, 1];
        let code = IntensityCode {
            assignments: vec![("a".into(), 10), ("b".into(), 20)],
        };
        let out = rasterize_channel(&grid(dims), &[mask_with(dims, 0..2), mask_with(dims, 1..3)], &code).unwrap();
        assert_eq!(out.data, vec![10.0, 10.0, 20.0, 0.0]);
    }

    #[test]
    fn zscore_rules() {
        let c = Volume3D::filled(grid([3, 1, 1]), 7.0);
        let (z, s) = zscore(&c);
        assert_eq!(s, NormalizationStats { mean: 7.0, std: 0.0 });
        assert!(z.data.iter().all(|&v| v == 0.0));

        let two = Volume3D::new(grid([4, 1, 1]), vec![0.0, 255.0, 0.0, 255.0]).unwrap();
        let (z, s) = zscore(&two);
        assert_eq!((s.mean, s.std), (127.5, 127.5));
        assert_eq!(z.data, vec![-1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn crop_exterior_values() {
        let dims = [3, 1, 1];
        let ct = Volume3D::new(grid(dims), vec![40.0, 40.0, 40.0]).unwrap();
        let (a, b) = crop_channels(&ct, &[mask_with(dims, 0..2)]).unwrap();
        assert_eq!(a.data, vec![40.0, 40.0, 0.0]);
        assert_eq!(b.data, vec![40.0, 40.0, 255.0]);

        let (a, b) = encode_crop(&ct, &[]).unwrap();
        assert!(a.volume.data.iter().chain(&b.volume.data).all(|&v| v == 0.0));

        let ct = Volume3D::new(grid(dims), vec![1.0, 2.0, 4.0]).unwrap();
        let (a, b) = encode_crop(&ct, &[mask_with(dims, 0..3)]).unwrap();
        let (zct, _) = zscore(&ct);
        assert_eq!(a.volume.data, zct.data);
        assert_eq!(b.volume.data, zct.data);
    }

    #[test]
    fn strategy_parsing_and_ordering() {
        assert_eq!("ei-z".parse::<StrategyKind>().unwrap(), StrategyKind::EqZ);
        assert_eq!("MI_TS".parse::<StrategyKind>().unwrap(), StrategyKind::MiTs);
        assert!("mx".parse::<StrategyKind>().is_err());

        let vocab: Vec<String> = ["heart", "liver", "spleen", "eyes", "kidneys", "femurs", "stomach", "other"]
            .map(String::from)
            .to_vec();
        let s = EncodingStrategy::for_vocabulary(StrategyKind::Mi, &vocab).unwrap();
        assert_eq!(s.structure_set[..3], ["heart", "liver", "spleen"]);
        assert!(matches!(
            EncodingStrategy::for_vocabulary(StrategyKind::MiTs, &vocab),
            Err(Error::UnknownStructureName(_))
        ));
        assert!(EncodingStrategy::new(StrategyKind::Mi, vec![]).is_err());
    }
}
