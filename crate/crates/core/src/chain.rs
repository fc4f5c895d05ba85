//! Serial kinematic chains: a small text format, forward kinematics, and the
//! geometric Jacobian.
//!
//! A chain file is a `name`, an ordered list of `joint { ... }` blocks, and a
//! fixed `ee_offset` transform from the last joint frame to the end effector:
//!
//! ```text
//! name = "two_link"
//!
//! joint {
//!   name = "shoulder"
//!   parent = "base"
//!   type = revolute          # or prismatic
//!   axis = [0, 0, 1]
//!   origin = [0, 0, 0.1, 1, 0, 0, 0]   # [tx ty tz qw qx qy qz], parent frame
//!   limits = [-3.14, 3.14]   # radians (revolute) or meters (prismatic)
//! }
//!
//! ee_offset = [0.2, 0, 0, 1, 0, 0, 0]
//! ```
//!
//! Joints must form a serial chain: the first parents `"base"`, each later
//! joint parents the one before it. `#` starts a comment.

use crate::se3::Pose;
use nalgebra as na;
use thiserror::Error;

pub type Jacobian = na::OMatrix<f64, na::U6, na::Dyn>;

/// Axis directions must be unit within this tolerance; closer misses are
/// renormalized rather than rejected.
pub const AXIS_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("parse error at line {line}, byte {offset}: {msg}")]
    Parse {
        msg: String,
        line: usize,
        offset: usize,
    },
    #[error("invalid chain: {0}")]
    Invalid(String),
    #[error("joint vector has {got} entries, chain has {expected} degrees of freedom")]
    DofMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointType {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: String,
    pub joint_type: JointType,
    /// Motion axis in the joint's own frame; unit length.
    pub axis: na::Vector3<f64>,
    /// Fixed transform from the parent frame to this joint's frame.
    pub origin: Pose,
    /// `(lower, upper)` position limits, strictly ordered.
    pub limits: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    name: String,
    joints: Vec<Joint>,
    ee_offset: Pose,
}

impl Chain {
    /// Validates and assembles a chain from parts. Rules: at least one joint,
    /// first parent is `"base"`, every later parent is the previous joint,
    /// names unique and not `"base"`, axes unit within [`AXIS_NORM_TOL`]
    /// (then renormalized exactly), limits strictly increasing.
    pub fn new(name: String, joints: Vec<Joint>, ee_offset: Pose) -> Result<Self, ChainError> {
        if joints.is_empty() {
            return Err(ChainError::Invalid("chain has no joints".into()));
        }
        let mut joints = joints;
        for i in 0..joints.len() {
            let expected_parent = if i == 0 {
                "base"
            } else {
                joints[i - 1].name.as_str()
            };
            if joints[i].parent != expected_parent {
                return Err(ChainError::Invalid(format!(
                    "joint '{}' parents '{}' but a serial chain requires '{}'",
                    joints[i].name, joints[i].parent, expected_parent
                )));
            }
            if joints[i].name == "base" {
                return Err(ChainError::Invalid("joint may not be named 'base'".into()));
            }
            if joints[..i].iter().any(|j| j.name == joints[i].name) {
                return Err(ChainError::Invalid(format!(
                    "duplicate joint name '{}'",
                    joints[i].name
                )));
            }
            let norm = joints[i].axis.norm();
            if (norm - 1.0).abs() > AXIS_NORM_TOL {
                return Err(ChainError::Invalid(format!(
                    "joint '{}' axis norm {} is not unit",
                    joints[i].name, norm
                )));
            }
            joints[i].axis /= norm;
            let (lo, hi) = joints[i].limits;
            if !(lo < hi) {
                return Err(ChainError::Invalid(format!(
                    "joint '{}' limits [{lo}, {hi}] are not increasing",
                    joints[i].name
                )));
            }
        }
        Ok(Chain {
            name,
            joints,
            ee_offset,
        })
    }

    pub fn parse(src: &str) -> Result<Self, ChainError> {
        parse_chain(src)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn ee_offset(&self) -> Pose {
        self.ee_offset
    }

    pub fn limits(&self) -> Vec<(f64, f64)> {
        self.joints.iter().map(|j| j.limits).collect()
    }

    /// Mid-range configuration, a safe default seed.
    pub fn home(&self) -> Vec<f64> {
        self.joints
            .iter()
            .map(|j| 0.5 * (j.limits.0 + j.limits.1))
            .collect()
    }

    /// Uniform sample within the middle `frac` of each joint range.
    pub fn sample_interior<R: rand::RngExt>(&self, rng: &mut R, frac: f64) -> Vec<f64> {
        self.joints
            .iter()
            .map(|j| {
                let mid = 0.5 * (j.limits.0 + j.limits.1);
                let half = 0.5 * (j.limits.1 - j.limits.0) * frac;
                rng.random_range(mid - half..mid + half)
            })
            .collect()
    }

    pub fn clamp_to_limits(&self, q: &mut [f64]) {
        for (qi, j) in q.iter_mut().zip(&self.joints) {
            *qi = qi.clamp(j.limits.0, j.limits.1);
        }
    }

    pub fn check_dof(&self, q: &[f64]) -> Result<(), ChainError> {
        if q.len() != self.joints.len() {
            return Err(ChainError::DofMismatch {
                expected: self.joints.len(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// World pose of every joint frame after its motion, in chain order.
    pub fn joint_frames(&self, q: &[f64]) -> Result<Vec<na::Isometry3<f64>>, ChainError> {
        self.check_dof(q)?;
        let mut t = na::Isometry3::identity();
        let mut frames = Vec::with_capacity(self.joints.len());
        for (j, &qi) in self.joints.iter().zip(q) {
            t = t * j.origin.to_isometry() * joint_motion(j, qi);
            frames.push(t);
        }
        Ok(frames)
    }

    /// End-effector pose in the chain's base frame.
    pub fn fk(&self, q: &[f64]) -> Result<Pose, ChainError> {
        let frames = self.joint_frames(q)?;
        let last = frames.last().expect("validated chains are non-empty");
        Ok(Pose::from_isometry(&(last * self.ee_offset.to_isometry())))
    }

    /// Geometric Jacobian of the end effector at `q`, base frame. Rows 0..3
    /// are linear velocity, rows 3..6 angular. A revolute column is
    /// `(w x (p_ee - p_i); w)`, a prismatic column `(w; 0)`, with `w` the
    /// world-frame axis and `p_i` the joint frame origin.
    pub fn jacobian(&self, q: &[f64]) -> Result<Jacobian, ChainError> {
        let frames = self.joint_frames(q)?;
        let last = frames.last().expect("validated chains are non-empty");
        let p_ee = (last * self.ee_offset.to_isometry()).translation.vector;
        let mut jac = Jacobian::zeros(self.joints.len());
        for (i, (j, f)) in self.joints.iter().zip(&frames).enumerate() {
            let w = f.rotation * j.axis;
            match j.joint_type {
                JointType::Revolute => {
                    let p_i = f.translation.vector;
                    jac.fixed_view_mut::<3, 1>(0, i)
                        .copy_from(&w.cross(&(p_ee - p_i)));
                    jac.fixed_view_mut::<3, 1>(3, i).copy_from(&w);
                }
                JointType::Prismatic => {
                    jac.fixed_view_mut::<3, 1>(0, i).copy_from(&w);
                }
            }
        }
        Ok(jac)
    }
}

fn joint_motion(j: &Joint, qi: f64) -> na::Isometry3<f64> {
    match j.joint_type {
        JointType::Revolute => na::Isometry3::from_parts(
            na::Translation3::identity(),
            na::UnitQuaternion::from_axis_angle(&na::Unit::new_unchecked(j.axis), qi),
        ),
        JointType::Prismatic => na::Isometry3::translation(
            j.axis.x * qi,
            j.axis.y * qi,
            j.axis.z * qi,
        ),
    }
}

// ---------------------------------------------------------------------------
// Text format parser. Hand rolled so errors carry the byte offset and line.

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { src, pos: 0 }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ChainError> {
        let line = self.src[..self.pos].bytes().filter(|&b| b == b'\n').count() + 1;
        Err(ChainError::Parse {
            msg: msg.into(),
            line,
            offset: self.pos,
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        loop {
            let rest = self.rest();
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if self.rest().starts_with('#') {
                match self.rest().find('\n') {
                    Some(n) => self.pos += n,
                    None => self.pos = self.src.len(),
                }
            } else {
                return;
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn expect(&mut self, ch: char) -> Result<(), ChainError> {
        self.skip_ws();
        if self.peek() == Some(ch) {
            self.pos += ch.len_utf8();
            Ok(())
        } else {
            self.err(format!(
                "expected '{ch}', found {}",
                self.peek()
                    .map_or("end of input".into(), |c| format!("'{c}'"))
            ))
        }
    }

    fn ident(&mut self) -> Result<&'a str, ChainError> {
        self.skip_ws();
        let start = self.pos;
        let end = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .map(|n| start + n)
            .unwrap_or(self.src.len());
        if end == start {
            return self.err("expected identifier");
        }
        self.pos = end;
        Ok(&self.src[start..end])
    }

    fn string_lit(&mut self) -> Result<String, ChainError> {
        self.expect('"')?;
        let start = self.pos;
        match self.rest().find('"') {
            Some(n) => {
                let s = &self.src[start..start + n];
                self.pos = start + n + 1;
                Ok(s.to_string())
            }
            None => self.err("unterminated string"),
        }
    }

    fn number(&mut self) -> Result<f64, ChainError> {
        self.skip_ws();
        let start = self.pos;
        let end = self
            .rest()
            .find(|c: char| !(c.is_ascii_digit() || "+-.eE".contains(c)))
            .map(|n| start + n)
            .unwrap_or(self.src.len());
        if end == start {
            return self.err("expected number");
        }
        match self.src[start..end].parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = end;
                Ok(v)
            }
            _ => self.err(format!("invalid number '{}'", &self.src[start..end])),
        }
    }

    fn num_array(&mut self, len: usize) -> Result<Vec<f64>, ChainError> {
        self.expect('[')?;
        let mut out = Vec::with_capacity(len);
        loop {
            out.push(self.number()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(']') => {
                    self.pos += 1;
                    break;
                }
                _ => return self.err("expected ',' or ']'"),
            }
        }
        if out.len() != len {
            return self.err(format!("expected {len} numbers, got {}", out.len()));
        }
        Ok(out)
    }
}

fn pose_from_seven(c: &Cursor, v: &[f64]) -> Result<Pose, ChainError> {
    let arr: [f64; 7] = v.try_into().expect("length checked by num_array");
    Pose::try_from(arr).or_else(|e| c.err(e.to_string()))
}

fn parse_joint(c: &mut Cursor) -> Result<Joint, ChainError> {
    c.expect('{')?;
    let mut name = None;
    let mut parent = None;
    let mut joint_type = None;
    let mut axis = None;
    let mut origin = None;
    let mut limits = None;
    loop {
        c.skip_ws();
        if c.peek() == Some('}') {
            c.pos += 1;
            break;
        }
        let key = c.ident()?;
        c.expect('=')?;
        match key {
            "name" => name = Some(c.string_lit()?),
            "parent" => parent = Some(c.string_lit()?),
            "type" => {
                joint_type = Some(match c.ident()? {
                    "revolute" => JointType::Revolute,
                    "prismatic" => JointType::Prismatic,
                    other => return c.err(format!("unknown joint type '{other}'")),
                })
            }
            "axis" => {
                let v = c.num_array(3)?;
                axis = Some(na::Vector3::new(v[0], v[1], v[2]));
            }
            "origin" => {
                let v = c.num_array(7)?;
                origin = Some(pose_from_seven(c, &v)?);
            }
            "limits" => {
                let v = c.num_array(2)?;
                limits = Some((v[0], v[1]));
            }
            other => return c.err(format!("unknown joint field '{other}'")),
        }
    }
    let missing = |what: &str| format!("joint block is missing '{what}'");
    Ok(Joint {
        name: name.ok_or_else(|| c.err::<()>(missing("name")).unwrap_err())?,
        parent: parent.ok_or_else(|| c.err::<()>(missing("parent")).unwrap_err())?,
        joint_type: joint_type.ok_or_else(|| c.err::<()>(missing("type")).unwrap_err())?,
        axis: axis.ok_or_else(|| c.err::<()>(missing("axis")).unwrap_err())?,
        origin: origin.ok_or_else(|| c.err::<()>(missing("origin")).unwrap_err())?,
        limits: limits.ok_or_else(|| c.err::<()>(missing("limits")).unwrap_err())?,
    })
}

fn parse_chain(src: &str) -> Result<Chain, ChainError> {
    let mut c = Cursor::new(src);
    let mut name = None;
    let mut joints = Vec::new();
    let mut ee_offset = None;
    while !c.at_end() {
        match c.ident()? {
            "name" => {
                c.expect('=')?;
                if name.replace(c.string_lit()?).is_some() {
                    return c.err("duplicate 'name'");
                }
            }
            "joint" => joints.push(parse_joint(&mut c)?),
            "ee_offset" => {
                c.expect('=')?;
                let v = c.num_array(7)?;
                if ee_offset.replace(pose_from_seven(&c, &v)?).is_some() {
                    return c.err("duplicate 'ee_offset'");
                }
            }
            other => return c.err(format!("unknown top-level key '{other}'")),
        }
    }
    let name = match name {
        Some(n) => n,
        None => return c.err("missing 'name'"),
    };
    let ee_offset = match ee_offset {
        Some(p) => p,
        None => return c.err("missing 'ee_offset'"),
    };
    Chain::new(name, joints, ee_offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::se3::{rotation_vector, Vec3};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{RngExt, SeedableRng};

    const TWO_LINK: &str = r#"
        name = "two_link"
        joint {
          name = "shoulder"
          parent = "base"
          type = revolute
          axis = [0, 0, 1]
          origin = [0, 0, 0, 1, 0, 0, 0]
          limits = [-3.1416, 3.1416]
        }
        joint {
          name = "elbow"
          parent = "shoulder"
          type = revolute
          axis = [0, 0, 1]
          origin = [0.5, 0, 0, 1, 0, 0, 0]
          limits = [-3.1416, 3.1416]
        }
        ee_offset = [0.3, 0, 0, 1, 0, 0, 0]
    "#;

    #[test]
    fn two_link_fk_matches_planar_geometry() {
        let chain = Chain::parse(TWO_LINK).unwrap();
        for (q1, q2) in [(0.0, 0.0), (0.4, -0.9), (1.3, 0.7), (-2.0, 2.0)] {
            let p = chain.fk(&[q1, q2]).unwrap();
            let want = Vec3::new(
                0.5 * q1.cos() + 0.3 * (q1 + q2).cos(),
                0.5 * q1.sin() + 0.3 * (q1 + q2).sin(),
                0.0,
            );
            assert_relative_eq!(p.translation, want, epsilon = 1e-12);
            assert_abs_diff_eq!(p.rotation_vector().z, wrap(q1 + q2), epsilon = 1e-12);
        }
    }

    fn wrap(a: f64) -> f64 {
        (a + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI
    }

    #[test]
    fn prismatic_joint_translates_along_axis() {
        let src = r#"
            name = "lift"
            joint {
              name = "slide"
              parent = "base"
              type = prismatic
              axis = [0, 0, 1]
              origin = [0.1, 0, 0.2, 1, 0, 0, 0]
              limits = [0.0, 0.5]
            }
            ee_offset = [0, 0, 0, 1, 0, 0, 0]
        "#;
        let chain = Chain::parse(src).unwrap();
        let p = chain.fk(&[0.37]).unwrap();
        assert_relative_eq!(p.translation, Vec3::new(0.1, 0.0, 0.57), epsilon = 1e-12);
        let jac = chain.jacobian(&[0.37]).unwrap();
        assert_relative_eq!(jac.column(0).into_owned(),
            na::Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn builtin_chains_parse_and_report_dof() {
        let arm = assets::builtin_chain("arm_waist_10dof").unwrap();
        assert_eq!(arm.dof(), 10);
        assert_eq!(arm.joints()[0].joint_type, JointType::Prismatic);
        let leg = assets::builtin_chain("leg_6dof").unwrap();
        assert_eq!(leg.dof(), 6);
        // Upright pelvis height: every z offset in the leg file stacked up.
        let base = leg.fk(&vec![0.0; 6]).unwrap();
        assert_relative_eq!(base.translation, Vec3::new(0.0, 0.0, 0.53), epsilon = 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let chain = assets::builtin_chain("arm_waist_10dof").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..8 {
            let q: Vec<f64> = chain
                .limits()
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi))
                .collect();
            let jac = chain.jacobian(&q).unwrap();
            let h = 1e-6;
            for i in 0..chain.dof() {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += h;
                qm[i] -= h;
                let fp = chain.fk(&qp).unwrap();
                let fm = chain.fk(&qm).unwrap();
                let dv = (fp.translation - fm.translation) / (2.0 * h);
                // World-frame angular velocity: log of the relative rotation.
                let dr = fp.rotation * fm.rotation.inverse();
                let dw = rotation_vector(&dr) / (2.0 * h);
                assert_relative_eq!(jac.fixed_view::<3, 1>(0, i).into_owned(), dv, epsilon = 1e-5);
                assert_relative_eq!(jac.fixed_view::<3, 1>(3, i).into_owned(), dw, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn dof_mismatch_is_reported() {
        let chain = Chain::parse(TWO_LINK).unwrap();
        assert_eq!(
            chain.fk(&[0.0]).unwrap_err(),
            ChainError::DofMismatch {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn parse_errors_carry_line_and_offset() {
        let src = "name = \"x\"\njoint {\n  name = \"a\"\n  parent = \"base\"\n  type = spherical\n";
        let err = Chain::parse(src).unwrap_err();
        match err {
            ChainError::Parse { msg, line, offset } => {
                assert!(msg.contains("spherical"), "{msg}");
                assert_eq!(line, 5);
                assert!(offset > 0 && src.is_char_boundary(offset));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn validation_rejects_bad_chains() {
        let broken_parent = TWO_LINK.replace("parent = \"shoulder\"", "parent = \"base\"");
        assert!(matches!(
            Chain::parse(&broken_parent),
            Err(ChainError::Invalid(_))
        ));

        let dup = TWO_LINK.replace("name = \"elbow\"", "name = \"shoulder\"");
        assert!(matches!(Chain::parse(&dup), Err(ChainError::Invalid(_))));

        let bad_axis = TWO_LINK.replacen("axis = [0, 0, 1]", "axis = [0, 0, 0.9]", 1);
        assert!(matches!(Chain::parse(&bad_axis), Err(ChainError::Invalid(_))));

        let bad_limits = TWO_LINK.replacen("limits = [-3.1416, 3.1416]", "limits = [1.0, -1.0]", 1);
        assert!(matches!(
            Chain::parse(&bad_limits),
            Err(ChainError::Invalid(_))
        ));
    }

    #[test]
    fn near_unit_axis_is_renormalized() {
        let nearly = TWO_LINK.replacen("axis = [0, 0, 1]", "axis = [0, 0, 1.0000001]", 1);
        let chain = Chain::parse(&nearly).unwrap();
        assert_abs_diff_eq!(chain.joints()[0].axis.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn clamp_and_home_respect_limits() {
        let chain = assets::builtin_chain("arm_waist_10dof").unwrap();
        let mut q = vec![100.0; 10];
        chain.clamp_to_limits(&mut q);
        for (qi, (lo, hi)) in q.iter().zip(chain.limits()) {
            assert!(*qi >= lo && *qi <= hi);
        }
        let home = chain.home();
        for (qi, (lo, hi)) in home.iter().zip(chain.limits()) {
            assert!(*qi > lo && *qi < hi);
        }
    }
}
