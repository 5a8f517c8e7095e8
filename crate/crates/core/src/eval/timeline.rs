use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::registration::DegeneracyReport;

pub const EIGEN_TIMELINE_HEADER: &str =
    "t,lambda_min_rot_raw,lambda_min_trans_raw,lambda_min_rot_reg,lambda_min_trans_reg,clamped_rot,clamped_trans";

/// Per-scan spectrum summary of the final registration iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub t: f64,
    pub lambda_min_rot_raw: f64,
    pub lambda_min_trans_raw: f64,
    pub lambda_min_rot_reg: f64,
    pub lambda_min_trans_reg: f64,
    pub clamped_rot: bool,
    pub clamped_trans: bool,
}

impl EigenRecord {
    pub fn from_report(t: f64, report: &DegeneracyReport) -> Self {
        Self {
            t,
            lambda_min_rot_raw: report.lambda_min_rot(),
            lambda_min_trans_raw: report.lambda_min_trans(),
            lambda_min_rot_reg: report.lambda_min_rot_reg,
            lambda_min_trans_reg: report.lambda_min_trans_reg,
            clamped_rot: report.rot.any_clamped(),
            clamped_trans: report.trans.any_clamped(),
        }
    }
}

pub fn eigen_timeline(records: &[EigenRecord]) -> String {
    let mut out = String::from(EIGEN_TIMELINE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            r.lambda_min_rot_raw,
            r.lambda_min_trans_raw,
            r.lambda_min_rot_reg,
            r.lambda_min_trans_reg,
            u8::from(r.clamped_rot),
            u8::from(r.clamped_trans)
        );
    }
    out
}
