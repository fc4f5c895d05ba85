//! Error statistics and the CSV report formats.
//!
//! All CSV builders format floats with fixed six-decimal precision so a
//! repeated run of the same pipeline produces byte-identical reports. Pose
//! translation is reported in centimeters and rotation in degrees; raw
//! statistics stay in meters and radians.

use crate::se3::PoseError;

/// Population statistics (divide by n, not n-1) over a batch of pose errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub n: usize,
    pub trans_mean_m: f64,
    pub trans_std_m: f64,
    pub rot_mean_rad: f64,
    pub rot_std_rad: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt(), n)
}

impl ErrorStats {
    pub fn from_pose_errors(errors: &[PoseError]) -> Self {
        let (trans_mean_m, trans_std_m, n) = mean_std(errors.iter().map(|e| e.trans_norm()));
        let (rot_mean_rad, rot_std_rad, _) = mean_std(errors.iter().map(|e| e.rot_angle()));
        ErrorStats {
            n,
            trans_mean_m,
            trans_std_m,
            rot_mean_rad,
            rot_std_rad,
        }
    }
}

/// One line of the summary report: a named configuration plus its error
/// statistics. `joint_err_rad` is empty for evaluations with no joint-space
/// reference (plain FK benchmarks).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub config: String,
    pub stats: ErrorStats,
    pub joint_err_rad: Option<f64>,
}

pub const SUMMARY_HEADER: &str =
    "config,n,trans_mean_cm,trans_std_cm,rot_mean_deg,rot_std_deg,joint_err_rad";

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        let s = &row.stats;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.config,
            s.n,
            fmt(s.trans_mean_m * 100.0),
            fmt(s.trans_std_m * 100.0),
            fmt(s.rot_mean_rad.to_degrees()),
            fmt(s.rot_std_rad.to_degrees()),
            row.joint_err_rad.map(fmt).unwrap_or_default(),
        ));
    }
    out
}

/// Marginal error distribution at one-percent resolution, nearest-rank:
/// the p-th row is the smallest value with at least p percent of the batch
/// at or below it. Translation and rotation are ranked independently.
pub fn cdf_rows(errors: &[PoseError]) -> Vec<(u8, f64, f64)> {
    if errors.is_empty() {
        return Vec::new();
    }
    let mut trans: Vec<f64> = errors.iter().map(|e| e.trans_norm()).collect();
    let mut rot: Vec<f64> = errors.iter().map(|e| e.rot_angle()).collect();
    trans.sort_by(f64::total_cmp);
    rot.sort_by(f64::total_cmp);
    let n = errors.len();
    (1..=100u8)
        .map(|p| {
            let rank = (p as usize * n).div_ceil(100);
            (p, trans[rank - 1], rot[rank - 1])
        })
        .collect()
}

pub const CDF_HEADER: &str = "percentile,trans_cm,rot_deg";

pub fn cdf_csv(errors: &[PoseError]) -> String {
    let mut out = String::from(CDF_HEADER);
    out.push('\n');
    for (p, trans_m, rot_rad) in cdf_rows(errors) {
        out.push_str(&format!(
            "{},{},{}\n",
            p,
            fmt(trans_m * 100.0),
            fmt(rot_rad.to_degrees()),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceRow {
    pub config_name: String,
    pub n_reach: usize,
    pub volume_m3: f64,
}

pub const WORKSPACE_HEADER: &str = "config_name,n_reach,volume_m3";

pub fn workspace_csv(rows: &[WorkspaceRow]) -> String {
    let mut out = String::from(WORKSPACE_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            row.config_name,
            row.n_reach,
            fmt(row.volume_m3),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(trans_m: f64, rot_rad: f64) -> PoseError {
        PoseError {
            translation: crate::se3::Vec3::new(trans_m, 0.0, 0.0),
            rotation: crate::se3::Vec3::new(rot_rad, 0.0, 0.0),
        }
    }

    #[test]
    fn stats_match_hand_computation() {
        let errors = [err(0.02, 0.1), err(0.04, 0.3)];
        let s = ErrorStats::from_pose_errors(&errors);
        assert_eq!(s.n, 2);
        assert_eq!(s.trans_mean_m, 0.03);
        assert_eq!(s.trans_std_m, 0.01);
        assert!((s.rot_mean_rad - 0.2).abs() < 1e-15);
        assert!((s.rot_std_rad - 0.1).abs() < 1e-15);
    }

    #[test]
    fn stats_on_empty_batch_are_nan() {
        let s = ErrorStats::from_pose_errors(&[]);
        assert_eq!(s.n, 0);
        assert!(s.trans_mean_m.is_nan());
        assert!(s.rot_std_rad.is_nan());
    }

    #[test]
    fn cdf_uses_nearest_rank() {
        let errors = [err(0.01, 0.1), err(0.02, 0.2), err(0.03, 0.3), err(0.04, 0.4)];
        let rows = cdf_rows(&errors);
        assert_eq!(rows.len(), 100);
        let at = |p: u8| rows[p as usize - 1];
        // ceil(p/100 * 4) ranks: 1..=25 -> first, 26..=50 -> second, ...
        assert_eq!(at(1).1, 0.01);
        assert_eq!(at(25).1, 0.01);
        assert_eq!(at(26).1, 0.02);
        assert_eq!(at(50).1, 0.02);
        assert_eq!(at(51).1, 0.03);
        assert_eq!(at(75).1, 0.03);
        assert_eq!(at(76).1, 0.04);
        assert_eq!(at(100).1, 0.04);
        assert_eq!(at(100).2, 0.4);
    }

    #[test]
    fn cdf_ranks_translation_and_rotation_independently() {
        // Largest rotation rides on the smallest translation.
        let errors = [err(0.01, 0.9), err(0.02, 0.2)];
        let rows = cdf_rows(&errors);
        let last = rows[99];
        assert_eq!(last.1, 0.02);
        assert_eq!(last.2, 0.9);
    }

    #[test]
    fn summary_csv_is_stable_text() {
        let rows = [
            SummaryRow {
                config: "full".into(),
                stats: ErrorStats {
                    n: 3,
                    trans_mean_m: 0.0123,
                    trans_std_m: 0.001,
                    rot_mean_rad: 0.1,
                    rot_std_rad: 0.05,
                    },
                joint_err_rad: Some(0.25),
            },
            SummaryRow {
                config: "fk_only".into(),
                stats: ErrorStats {
                    n: 2,
                    trans_mean_m: 0.02,
                    trans_std_m: 0.0,
                    rot_mean_rad: 0.0,
                    rot_std_rad: 0.0,
                },
                joint_err_rad: None,
            },
        ];
        let csv = summary_csv(&rows);
        let expect = "config,n,trans_mean_cm,trans_std_cm,rot_mean_deg,rot_std_deg,joint_err_rad\n\
                      full,3,1.230000,0.100000,5.729578,2.864789,0.250000\n\
                      fk_only,2,2.000000,0.000000,0.000000,0.000000,\n";
        assert_eq!(csv, expect);
    }

    #[test]
    fn workspace_csv_is_stable_text() {
        let rows = [WorkspaceRow {
            config_name: "waist_locked".into(),
            n_reach: 20750,
            volume_m3: 0.166,
        }];
        assert_eq!(
            workspace_csv(&rows),
            "config_name,n_reach,volume_m3\nwaist_locked,20750,0.166000\n"
        );
    }
}
