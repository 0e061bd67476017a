//! Gender-gap statistics over per-patient scores.
//!
//! For each region, with scores split by sex:
//! - AGD: mean(male) − mean(female)
//! - MGD: median(male) − median(female)
//! - QD:  max(Q3(male) − Q1(female), Q3(female) − Q1(male))
//!
//! AGD and MGD are signed, positive when males score higher. Quartiles use
//! the interpolation rule in [`crate::stats`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::Sex;
use crate::error::{Error, Result};
use crate::regions::Region;
use crate::stats::{mean, quantile_sorted};

pub const QUANTILE_RULE: &str = "linear interpolation on sorted values, zero-based rank r = q*(n-1)";

/// A body region, or the whole (uncropped) volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvalRegion {
    #[serde(rename = "HN")]
    HeadNeck,
    #[serde(rename = "THX")]
    Thorax,
    #[serde(rename = "ABDM")]
    Abdomen,
    #[serde(rename = "PELV")]
    Pelvis,
    #[serde(rename = "WHOLE")]
    Whole,
}

impl EvalRegion {
    /// Report order.
    pub const ALL: [EvalRegion; 5] = [
        EvalRegion::HeadNeck,
        EvalRegion::Thorax,
        EvalRegion::Abdomen,
        EvalRegion::Pelvis,
        EvalRegion::Whole,
    ];

    pub fn id(self) -> &'static str {
        match self {
            EvalRegion::HeadNeck => "HN",
            EvalRegion::Thorax => "THX",
            EvalRegion::Abdomen => "ABDM",
            EvalRegion::Pelvis => "PELV",
            EvalRegion::Whole => "WHOLE",
        }
    }
}

impl From<Region> for EvalRegion {
    fn from(r: Region) -> Self {
        match r {
            Region::HeadNeck => EvalRegion::HeadNeck,
            Region::Thorax => EvalRegion::Thorax,
            Region::Abdomen => EvalRegion::Abdomen,
            Region::Pelvis => EvalRegion::Pelvis,
        }
    }
}

impl fmt::Display for EvalRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for EvalRegion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        EvalRegion::ALL
            .into_iter()
            .find(|r| r.id() == s)
            .ok_or_else(|| format!("unknown region {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub patient_id: String,
    pub sex: Sex,
    pub region: EvalRegion,
    pub dsc: f64,
    pub hd95_mm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Dsc,
    Hd95,
}

impl Metric {
    fn value(self, s: &ScoreSample) -> Option<f64> {
        match self {
            Metric::Dsc => Some(s.dsc),
            Metric::Hd95 => s.hd95_mm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

pub fn quartiles(values: &[f64]) -> Result<Quartiles> {
    if values.is_empty() {
        return Err(Error::EmptyGroup {
            sex: "any".into(),
            region: "any".into(),
        });
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&v, p).unwrap();
    Ok(Quartiles {
        q1: q(0.25),
        q2: q(0.5),
        q3: q(0.75),
    })
}

/// Sorted metric values for one sex in one region.
fn group(samples: &[ScoreSample], region: EvalRegion, sex: Sex, metric: Metric) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for s in samples.iter().filter(|s| s.region == region && s.sex == sex) {
        match metric.value(s) {
            Some(v) => values.push(v),
            None => {
                return Err(Error::EmptyGroup {
                    sex: sex.to_string(),
                    region: format!("{region} (undefined HD95 for {})", s.patient_id),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyGroup {
            sex: sex.to_string(),
            region: region.to_string(),
        });
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn groups(samples: &[ScoreSample], region: EvalRegion, metric: Metric) -> Result<(Vec<f64>, Vec<f64>)> {
    let female = group(samples, region, Sex::Female, metric);
    let male = group(samples, region, Sex::Male, metric);
    Ok((male?, female?))
}

pub fn agd(samples: &[ScoreSample], region: EvalRegion) -> Result<f64> {
    agd_of(samples, region, Metric::Dsc)
}

pub fn mgd(samples: &[ScoreSample], region: EvalRegion) -> Result<f64> {
    mgd_of(samples, region, Metric::Dsc)
}

pub fn qd(samples: &[ScoreSample], region: EvalRegion) -> Result<f64> {
    qd_of(samples, region, Metric::Dsc)
}

pub fn agd_of(samples: &[ScoreSample], region: EvalRegion, metric: Metric) -> Result<f64> {
    let (m, f) = groups(samples, region, metric)?;
    Ok(mean(&m).unwrap() - mean(&f).unwrap())
}

pub fn mgd_of(samples: &[ScoreSample], region: EvalRegion, metric: Metric) -> Result<f64> {
    let (m, f) = groups(samples, region, metric)?;
    Ok(quartiles(&m)?.q2 - quartiles(&f)?.q2)
}

pub fn qd_of(samples: &[ScoreSample], region: EvalRegion, metric: Metric) -> Result<f64> {
    let (m, f) = groups(samples, region, metric)?;
    let (qm, qf) = (quartiles(&m)?, quartiles(&f)?);
    Ok((qm.q3 - qf.q1).max(qf.q3 - qm.q1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl GroupStats {
    fn of_sorted(values: &[f64]) -> Option<Self> {
        let q = |p| quantile_sorted(values, p);
        Some(GroupStats {
            n: values.len(),
            mean: mean(values)?,
            q1: q(0.25)?,
            median: q(0.5)?,
            q3: q(0.75)?,
        })
    }
}

/// Gap statistics for one metric in one region. `flag` is set, and the gap
/// fields are `None`, when either group is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGaps {
    pub region: EvalRegion,
    pub total_median: Option<f64>,
    pub female: Option<GroupStats>,
    pub male: Option<GroupStats>,
    pub agd: Option<f64>,
    pub mgd: Option<f64>,
    pub qd: Option<f64>,
    pub flag: Option<String>,
}

impl RegionGaps {
    fn compute(samples: &[ScoreSample], region: EvalRegion, metric: Metric) -> Self {
        let mut all: Vec<f64> = samples
            .iter()
            .filter(|s| s.region == region)
            .filter_map(|s| metric.value(s))
            .collect();
        all.sort_by(f64::total_cmp);
        let total_median = quantile_sorted(&all, 0.5);
        let female = group(samples, region, Sex::Female, metric);
        let male = group(samples, region, Sex::Male, metric);
        let stats = |g: &Result<Vec<f64>>| g.as_ref().ok().and_then(|v| GroupStats::of_sorted(v));
        let (fs, ms) = (stats(&female), stats(&male));
        let flag = [&female, &male]
            .into_iter()
            .filter_map(|g| g.as_ref().err().map(ToString::to_string))
            .collect::<Vec<_>>();
        match (fs, ms) {
            (Some(f), Some(m)) => RegionGaps {
                region,
                total_median,
                female: Some(f),
                male: Some(m),
                agd: Some(m.mean - f.mean),
                mgd: Some(m.median - f.median),
                qd: Some((m.q3 - f.q1).max(f.q3 - m.q1)),
                flag: None,
            },
            _ => RegionGaps {
                region,
                total_median,
                female: fs,
                male: ms,
                agd: None,
                mgd: None,
                qd: None,
                flag: Some(flag.join("; ")),
            },
        }
    }

    pub fn is_flagged(&self) -> bool {
        self.flag.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessSummary {
    pub quantile_rule: String,
    pub sign_convention: String,
    /// DSC-based gaps, one entry per region present, HN → WHOLE.
    pub dsc: Vec<RegionGaps>,
    /// HD95-based gaps, when requested.
    pub hd95: Option<Vec<RegionGaps>>,
}

impl FairnessSummary {
    pub fn region(&self, region: EvalRegion) -> Option<&RegionGaps> {
        self.dsc.iter().find(|g| g.region == region)
    }

    pub fn flagged_regions(&self) -> Vec<EvalRegion> {
        self.dsc.iter().filter(|g| g.is_flagged()).map(|g| g.region).collect()
    }
}

pub fn summarize(samples: &[ScoreSample]) -> FairnessSummary {
    summarize_with(samples, false)
}

pub fn summarize_with(samples: &[ScoreSample], include_hd95: bool) -> FairnessSummary {
    let present: Vec<EvalRegion> = EvalRegion::ALL
        .into_iter()
        .filter(|r| samples.iter().any(|s| s.region == *r))
        .collect();
    let per_metric = |metric| {
        present
            .iter()
            .map(|&r| RegionGaps::compute(samples, r, metric))
            .collect::<Vec<_>>()
    };
    FairnessSummary {
        quantile_rule: QUANTILE_RULE.into(),
        sign_convention: "male minus female".into(),
        dsc: per_metric(Metric::Dsc),
        hd95: include_hd95.then(|| per_metric(Metric::Hd95)),
    }
}
