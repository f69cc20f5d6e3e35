//! Grasping ability score (GAS).
//!
//! Each trial is scored on a three-level rubric for grasping and for
//! maintaining. Per grasp type both sub-scores are averaged over trials and
//! reported as percentages; the type's GAS is the mean of the two, and the
//! overall GAS is the mean over grasp types.

use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Allowed gap between a recomputed and a published GAS, in percent.
pub const GAS_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspType {
    Pinch,
    Spherical,
    Cylindrical,
}

impl GraspType {
    pub const ALL: [GraspType; 3] = [GraspType::Pinch, GraspType::Spherical, GraspType::Cylindrical];

    pub fn as_str(&self) -> &'static str {
        match self {
            GraspType::Pinch => "pinch",
            GraspType::Spherical => "spherical",
            GraspType::Cylindrical => "cylindrical",
        }
    }
}

impl fmt::Display for GraspType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GraspType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pinch" => Ok(GraspType::Pinch),
            "spherical" => Ok(GraspType::Spherical),
            "cylindrical" => Ok(GraspType::Cylindrical),
            other => Err(format!("unknown grasp type '{other}'")),
        }
    }
}

fn check_rubric(v: f64) -> Result<f64, EvalError> {
    if v == 0.0 || v == 0.5 || v == 1.0 {
        Ok(v)
    } else {
        Err(EvalError::InvalidRubric(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    pub object: String,
    pub grasp_type: GraspType,
    /// 0 failed, 0.5 incorrect, 1 correct.
    pub grasping: f64,
    /// 0 dropped, 0.5 moved, 1 stable.
    pub maintaining: f64,
}

impl TrialScore {
    pub fn new(object: impl Into<String>, grasp_type: GraspType, grasping: f64, maintaining: f64) -> Result<Self, EvalError> {
        Ok(Self {
            object: object.into(),
            grasp_type,
            grasping: check_rubric(grasping)?,
            maintaining: check_rubric(maintaining)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeScore {
    pub grasp_type: GraspType,
    pub trials: usize,
    pub grasping: f64,
    pub maintaining: f64,
    pub gas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasReport {
    pub per_type: Vec<TypeScore>,
    pub overall_gas: f64,
}

impl GasReport {
    pub fn get(&self, t: GraspType) -> Option<&TypeScore> {
        self.per_type.iter().find(|s| s.grasp_type == t)
    }

    /// Rows Grasping / Maintaining / GAS, one column per grasp type.
    pub fn table(&self, method: &str) -> String {
        let mut out = format!("{:<20}  {:<16}", "Method", "GAS (%)");
        for s in &self.per_type {
            out += &format!("  {:>11}", s.grasp_type.as_str());
        }
        out.push('\n');
        type Row = (&'static str, fn(&TypeScore) -> f64);
        let rows: [Row; 3] = [
            ("Grasping score", |s| s.grasping),
            ("Maintaining score", |s| s.maintaining),
            ("GAS score", |s| s.gas),
        ];
        for (i, (name, get)) in rows.iter().enumerate() {
            out += &format!("{:<20}  {:<16}", if i == 0 { method } else { "" }, name);
            for s in &self.per_type {
                out += &format!("  {:>11.2}", get(s));
            }
            out.push('\n');
        }
        out += &format!("{:<20}  {:<16}  {:>11.2}\n", "", "Overall GAS", self.overall_gas);
        out
    }
}

pub fn gas_report(trials: &[TrialScore]) -> Result<GasReport, EvalError> {
    if trials.is_empty() {
        return Err(EvalError::EmptyTrials);
    }
    let mut per_type = Vec::new();
    for t in GraspType::ALL {
        let group: Vec<&TrialScore> = trials.iter().filter(|s| s.grasp_type == t).collect();
        if group.is_empty() {
            continue;
        }
        let n = group.len() as f64;
        let grasping = 100.0 * group.iter().map(|s| s.grasping).sum::<f64>() / n;
        let maintaining = 100.0 * group.iter().map(|s| s.maintaining).sum::<f64>() / n;
        per_type.push(TypeScore {
            grasp_type: t,
            trials: group.len(),
            grasping,
            maintaining,
            gas: (grasping + maintaining) / 2.0,
        });
    }
    let overall_gas = per_type.iter().map(|s| s.gas).sum::<f64>() / per_type.len() as f64;
    Ok(GasReport { per_type, overall_gas })
}

fn csv_error(row: usize, message: impl Into<String>) -> EvalError {
    EvalError::Csv {
        row,
        line: row + 1,
        message: message.into(),
    }
}

fn read_records<R: Read>(input: R, expected: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let headers = rdr.headers().map_err(|e| csv_error(0, e.to_string()))?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(csv_error(0, format!("expected header {}", expected.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(row, e.to_string()))?;
        if rec.len() != expected.len() {
            return Err(csv_error(row, format!("expected {} fields, found {}", expected.len(), rec.len())));
        }
        out.push((row, rec));
    }
    Ok(out)
}

fn parse_num(row: usize, field: &str, raw: &str) -> Result<f64, EvalError> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| csv_error(row, format!("{field}: '{raw}' is not a number")))
}

/// Reads `object,grasp_type,grasping,maintaining` rows.
pub fn parse_trials_csv<R: Read>(input: R) -> Result<Vec<TrialScore>, EvalError> {
    read_records(input, &["object", "grasp_type", "grasping", "maintaining"])?
        .into_iter()
        .map(|(row, rec)| {
            let grasp_type = rec[1].parse().map_err(|e: String| csv_error(row, e))?;
            let g = parse_num(row, "grasping", &rec[2])?;
            let m = parse_num(row, "maintaining", &rec[3])?;
            TrialScore::new(&rec[0], grasp_type, g, m).map_err(|e| csv_error(row, e.to_string()))
        })
        .collect()
}

/// Published per-type components and the GAS printed next to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedGasRow {
    pub method: String,
    pub grasp_type: GraspType,
    pub grasping: f64,
    pub maintaining: f64,
    pub gas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasConsistency {
    pub method: String,
    pub grasp_type: GraspType,
    pub published: f64,
    pub computed: f64,
    pub consistent: bool,
}

/// Reads `method,grasp_type,grasping,maintaining,gas` rows.
pub fn parse_published_csv<R: Read>(input: R) -> Result<Vec<PublishedGasRow>, EvalError> {
    read_records(input, &["method", "grasp_type", "grasping", "maintaining", "gas"])?
        .into_iter()
        .map(|(row, rec)| {
            Ok(PublishedGasRow {
                method: rec[0].to_string(),
                grasp_type: rec[1].parse().map_err(|e: String| csv_error(row, e))?,
                grasping: parse_num(row, "grasping", &rec[2])?,
                maintaining: parse_num(row, "maintaining", &rec[3])?,
                gas: parse_num(row, "gas", &rec[4])?,
            })
        })
        .collect()
}

/// Recomputes each row's GAS from its components and flags rows that miss
/// the published value by more than `tolerance`.
pub fn check_published(rows: &[PublishedGasRow], tolerance: f64) -> Vec<GasConsistency> {
    rows.iter()
        .map(|r| {
            let computed = (r.grasping + r.maintaining) / 2.0;
            GasConsistency {
                method: r.method.clone(),
                grasp_type: r.grasp_type,
                published: r.gas,
                computed,
                consistent: (computed - r.gas).abs() <= tolerance + 1e-9,
            }
        })
        .collect()
}
