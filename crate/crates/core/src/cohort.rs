//! Cohort manifests: which files belong to which patient, and each
//! patient's sex for stratified evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub const ALL: [Sex; 2] = [Sex::Female, Sex::Male];

    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }

    pub fn parse(s: &str) -> Option<Sex> {
        match s {
            "female" => Some(Sex::Female),
            "male" => Some(Sex::Male),
            _ => None,
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which end of the z axis points towards the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SuperiorAxis {
    #[default]
    #[serde(rename = "+z")]
    PlusZ,
    #[serde(rename = "-z")]
    MinusZ,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarkPaths {
    #[serde(rename = "vertebra_T1")]
    pub vertebra_t1: PathBuf,
    pub stomach: PathBuf,
    #[serde(rename = "vertebra_L4")]
    pub vertebra_l4: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub sex: Sex,
    pub ct_path: PathBuf,
    pub gt_ctv_path: PathBuf,
    pub pred_ctv_path: Option<PathBuf>,
    pub structure_paths: BTreeMap<String, PathBuf>,
    pub landmark_paths: LandmarkPaths,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CohortManifest {
    pub records: Vec<PatientRecord>,
    pub structure_vocabulary: Vec<String>,
    pub superior: SuperiorAxis,
}

/// On-disk manifest layout. Every field is optional here so that missing
/// fields can be reported per record instead of by serde.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct ManifestFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superior: Option<SuperiorAxis>,
    pub structures: Option<Vec<String>>,
    pub patients: Option<Vec<serde_json::Value>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PatientEntry {
    id: Option<String>,
    sex: Option<String>,
    ct: Option<PathBuf>,
    gt_ctv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pred_ctv: Option<PathBuf>,
    #[serde(default)]
    structures: BTreeMap<String, PathBuf>,
    landmarks: Option<LandmarkPaths>,
}

/// Lower-snake-case form of a structure name: `"Liver "` → `"liver"`,
/// `"Urinary Bladder"` → `"urinary_bladder"`.
pub fn canonical_structure_name(name: &str) -> String {
    name.trim()
        .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

fn schema(context: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        context: context.into(),
        message: message.into(),
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<CohortManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

/// Parse and validate manifest JSON; relative paths resolve against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<CohortManifest> {
    let file: ManifestFile =
        serde_json::from_str(text).map_err(|e| schema("manifest", e.to_string()))?;
    let raw_vocab = file
        .structures
        .ok_or_else(|| schema("manifest", "missing field \"structures\""))?;
    let patients = file
        .patients
        .ok_or_else(|| schema("manifest", "missing field \"patients\""))?;

    let mut vocabulary = Vec::with_capacity(raw_vocab.len());
    let mut seen = BTreeSet::new();
    for name in &raw_vocab {
        let canon = canonical_structure_name(name);
        if canon.is_empty() {
            return Err(schema("structures", "empty structure name"));
        }
        if !seen.insert(canon.clone()) {
            return Err(schema("structures", format!("duplicate structure {canon:?}")));
        }
        vocabulary.push(canon);
    }

    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };

    let mut records = Vec::with_capacity(patients.len());
    let mut ids = BTreeSet::new();
    for (i, value) in patients.into_iter().enumerate() {
        let ctx = value
            .get("id")
            .and_then(|v| v.as_str())
            .map(|id| format!("patient {id:?}"))
            .unwrap_or_else(|| format!("patients[{i}]"));
        let entry: PatientEntry =
            serde_json::from_value(value).map_err(|e| schema(&ctx, e.to_string()))?;
        let missing = |field: &str| schema(&ctx, format!("missing field {field:?}"));

        let patient_id = entry.id.ok_or_else(|| missing("id"))?;
        if patient_id.is_empty() {
            return Err(schema(&ctx, "empty id"));
        }
        let sex_text = entry.sex.ok_or_else(|| missing("sex"))?;
        let sex = Sex::parse(&sex_text)
            .ok_or_else(|| schema(&ctx, format!("sex must be \"female\" or \"male\", got {sex_text:?}")))?;
        let ct = entry.ct.ok_or_else(|| missing("ct"))?;
        let gt_ctv = entry.gt_ctv.ok_or_else(|| missing("gt_ctv"))?;
        let landmarks = entry.landmarks.ok_or_else(|| missing("landmarks"))?;

        if !ids.insert(patient_id.clone()) {
            return Err(Error::DuplicatePatientId(patient_id));
        }

        let mut structure_paths = BTreeMap::new();
        for (name, p) in &entry.structures {
            let canon = canonical_structure_name(name);
            if !seen.contains(&canon) {
                return Err(Error::UnknownStructureName(name.clone()));
            }
            if structure_paths.insert(canon.clone(), resolve(p)).is_some() {
                return Err(schema(&ctx, format!("structure {canon:?} listed twice")));
            }
        }

        let record = PatientRecord {
            ct_path: resolve(&ct),
            gt_ctv_path: resolve(&gt_ctv),
            pred_ctv_path: entry.pred_ctv.as_deref().map(resolve),
            structure_paths,
            landmark_paths: LandmarkPaths {
                vertebra_t1: resolve(&landmarks.vertebra_t1),
                stomach: resolve(&landmarks.stomach),
                vertebra_l4: resolve(&landmarks.vertebra_l4),
            },
            patient_id,
            sex,
        };
        for p in record.referenced_paths() {
            if !p.is_file() {
                return Err(Error::MissingFile {
                    patient_id: record.patient_id.clone(),
                    path: p.to_path_buf(),
                });
            }
        }
        records.push(record);
    }
    records.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));

    Ok(CohortManifest {
        records,
        structure_vocabulary: vocabulary,
        superior: file.superior.unwrap_or_default(),
    })
}

impl PatientRecord {
    pub fn referenced_paths(&self) -> impl Iterator<Item = &Path> {
        [&self.ct_path, &self.gt_ctv_path]
            .into_iter()
            .chain(self.pred_ctv_path.as_ref())
            .chain(self.structure_paths.values())
            .chain([
                &self.landmark_paths.vertebra_t1,
                &self.landmark_paths.stomach,
                &self.landmark_paths.vertebra_l4,
            ])
            .map(PathBuf::as_path)
    }

    pub fn prediction_path(&self) -> Result<&Path> {
        self.pred_ctv_path
            .as_deref()
            .ok_or_else(|| Error::MissingPrediction {
                patient_id: self.patient_id.clone(),
            })
    }
}

impl CohortManifest {
    pub fn record(&self, patient_id: &str) -> Option<&PatientRecord> {
        self.records.iter().find(|r| r.patient_id == patient_id)
    }

    /// Serialize with every path made relative to `base` where possible.
    pub fn to_json(&self, base: &Path) -> Result<String> {
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).to_path_buf();
        let patients = self
            .records
            .iter()
            .map(|r| {
                serde_json::to_value(PatientEntry {
                    id: Some(r.patient_id.clone()),
                    sex: Some(r.sex.as_str().to_string()),
                    ct: Some(rel(&r.ct_path)),
                    gt_ctv: Some(rel(&r.gt_ctv_path)),
                    pred_ctv: r.pred_ctv_path.as_deref().map(rel),
                    structures: r
                        .structure_paths
                        .iter()
                        .map(|(k, v)| (k.clone(), rel(v)))
                        .collect(),
                    landmarks: Some(LandmarkPaths {
                        vertebra_t1: rel(&r.landmark_paths.vertebra_t1),
                        stomach: rel(&r.landmark_paths.stomach),
                        vertebra_l4: rel(&r.landmark_paths.vertebra_l4),
                    }),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let file = ManifestFile {
            superior: (self.superior != SuperiorAxis::PlusZ).then_some(self.superior),
            structures: Some(self.structure_vocabulary.clone()),
            patients: Some(patients),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }
}

/// Split patient ids by sex. Both keys are always present.
pub fn stratify(manifest: &CohortManifest) -> BTreeMap<Sex, Vec<String>> {
    let mut groups: BTreeMap<Sex, Vec<String>> = Sex::ALL.iter().map(|&s| (s, Vec::new())).collect();
    for r in &manifest.records {
        groups.entry(r.sex).or_default().push(r.patient_id.clone());
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn touch_all(dir: &Path, names: &[&str]) {
        for n in names {
            fs::write(dir.join(n), b"x").unwrap();
        }
    }

    fn patient(id: &str, sex: Option<&str>) -> serde_json::Value {
        let mut v = serde_json::json!({
            "id": id,
            "ct": "ct.nii",
            "gt_ctv": "gt.nii",
            "structures": {"Liver ": "liver.nii"},
            "landmarks": {"vertebra_T1": "t1.nii", "stomach": "st.nii", "vertebra_L4": "l4.nii"}
        });
        if let Some(s) = sex {
            v["sex"] = s.into();
        }
        v
    }

    fn setup() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        touch_all(dir.path(), &["ct.nii", "gt.nii", "liver.nii", "t1.nii", "st.nii", "l4.nii"]);
        dir
    }

    #[test]
    fn sorts_records_and_canonicalizes_names() {
        let dir = setup();
        let text = serde_json::json!({
            "structures": ["Liver", "Urinary Bladder"],
            "patients": [patient("p2", Some("male")), patient("p1", Some("female"))]
        })
        .to_string();
        let m = parse_manifest(&text, dir.path()).unwrap();
        assert_eq!(m.structure_vocabulary, ["liver", "urinary_bladder"]);
        let ids: Vec<_> = m.records.iter().map(|r| r.patient_id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2"]);
        assert_eq!(m.records[0].structure_paths["liver"], dir.path().join("liver.nii"));
        assert_eq!(m.superior, SuperiorAxis::PlusZ);
    }

    #[test]
    fn missing_sex_names_the_record() {
        let dir = setup();
        let text = serde_json::json!({
            "structures": ["liver"],
            "patients": [patient("p7", None)]
        })
        .to_string();
        let err = parse_manifest(&text, dir.path()).unwrap_err();
        match err {
            Error::Schema { context, message } => {
                assert!(context.contains("p7"));
                assert!(message.contains("sex"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_unknown_structures_and_missing_files() {
        let dir = setup();
        let dup = serde_json::json!({
            "structures": ["liver"],
            "patients": [patient("p1", Some("male")), patient("p1", Some("female"))]
        });
        assert!(matches!(parse_manifest(&dup.to_string(), dir.path()), Err(Error::DuplicatePatientId(id)) if id == "p1"));

        let unknown = serde_json::json!({"structures": ["spleen"], "patients": [patient("p1", Some("male"))]});
        assert!(matches!(
            parse_manifest(&unknown.to_string(), dir.path()),
            Err(Error::UnknownStructureName(_))
        ));

        let mut p = patient("p1", Some("male"));
        p["pred_ctv"] = "nope.nii".into();
        let missing = serde_json::json!({"structures": ["liver"], "patients": [p]});
        assert!(matches!(
            parse_manifest(&missing.to_string(), dir.path()),
            Err(Error::MissingFile { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let dir = setup();
        let text = serde_json::json!({
            "structures": ["liver"],
            "patients": [patient("a", Some("male")), patient("b", Some("female"))]
        })
        .to_string();
        let m = parse_manifest(&text, dir.path()).unwrap();
        let again = parse_manifest(&m.to_json(dir.path()).unwrap(), dir.path()).unwrap();
        assert_eq!(m, again);
    }

    fn fake_records(n_male: usize, n_female: usize) -> CohortManifest {
        let landmark_paths = LandmarkPaths {
            vertebra_t1: "t1".into(),
            stomach: "s".into(),
            vertebra_l4: "l4".into(),
        };
        let records = (0..n_male + n_female)
            .map(|i| PatientRecord {
                patient_id: format!("p{i:03}"),
                sex: if i < n_male { Sex::Male } else { Sex::Female },
                ct_path: "ct".into(),
                gt_ctv_path: "gt".into(),
                pred_ctv_path: None,
                structure_paths: BTreeMap::new(),
                landmark_paths: landmark_paths.clone(),
            })
            .collect();
        CohortManifest {
            records,
            ..Default::default()
        }
    }

    #[test]
    fn stratify_cohort_sizes() {
        let groups = stratify(&fake_records(25, 19));
        assert_eq!(groups[&Sex::Male].len(), 25);
        assert_eq!(groups[&Sex::Female].len(), 19);

        let groups = stratify(&fake_records(3, 0));
        assert!(groups[&Sex::Female].is_empty());

        let groups = stratify(&CohortManifest::default());
        assert_eq!(groups.len(), 2);
        assert!(groups.values().all(Vec::is_empty));
    }

    #[test]
    fn canonical_names() {
        assert_eq!(canonical_structure_name("Liver "), "liver");
        assert_eq!(canonical_structure_name(" urinary-Bladder"), "urinary_bladder");
        assert_eq!(canonical_structure_name("vertebra_T1"), "vertebra_t1");
    }
}
