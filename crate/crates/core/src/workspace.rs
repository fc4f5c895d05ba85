//! Voxelized reachable-workspace estimation.
//!
//! The bounding box is divided into cubic voxels; a voxel counts as reachable
//! when position-only inverse kinematics brings the end effector within
//! tolerance of its center. Volume is exact bookkeeping, `count * res^3`,
//! not a fit.
//!
//! Voxels are scanned x-fastest. Each x-row reuses the previous solution in
//! that row as a warm start, which keeps the sweep fast and, because rows are
//! independent, lets rows fan out across threads without changing results.

use crate::chain::{Chain, JointType};
use crate::exec::map_indexed;
use crate::ik::{solve_multi, IkConfig};
use crate::se3::{Pose, Vec3};
use rand::{RngExt, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkspaceError {
    #[error("workspace box is empty or inverted on axis {axis}")]
    EmptyBox { axis: char },
    #[error("resolution {0} must be positive")]
    BadResolution(f64),
    #[error(transparent)]
    Chain(#[from] crate::chain::ChainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceConfig {
    /// Box corners in the chain base frame, meters.
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Cubic voxel edge, meters.
    pub resolution: f64,
    /// RNG seed for the fixed IK seed set.
    pub seed: u64,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        WorkspaceConfig {
            min: [0.0, -1.0, -0.5],
            max: [1.0, 1.0, 1.0],
            resolution: 0.02,
            seed: 0,
        }
    }
}

/// Boolean voxel grid plus its provenance. `grid` is scanned x-fastest:
/// `index = (iz * ny + iy) * nx + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceResult {
    pub config: WorkspaceConfig,
    pub dims: [usize; 3],
    pub grid: Vec<bool>,
}

impl WorkspaceResult {
    pub fn reachable_count(&self) -> usize {
        self.grid.iter().filter(|&&b| b).count()
    }

    /// Exact voxel bookkeeping: count times res cubed.
    pub fn volume_m3(&self) -> f64 {
        let r = self.config.resolution;
        self.reachable_count() as f64 * (r * r * r)
    }

    pub fn voxel_center(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        let r = self.config.resolution;
        Vec3::new(
            self.config.min[0] + (ix as f64 + 0.5) * r,
            self.config.min[1] + (iy as f64 + 0.5) * r,
            self.config.min[2] + (iz as f64 + 0.5) * r,
        )
    }

    pub fn is_reachable(&self, ix: usize, iy: usize, iz: usize) -> bool {
        self.grid[(iz * self.dims[1] + iy) * self.dims[0] + ix]
    }

    /// Serializable run-length form of the grid.
    pub fn to_rle(&self) -> WorkspaceRle {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < self.grid.len() {
            if self.grid[i] {
                let start = i;
                while i < self.grid.len() && self.grid[i] {
                    i += 1;
                }
                runs.push([start as u64, (i - start) as u64]);
            } else {
                i += 1;
            }
        }
        WorkspaceRle {
            config: self.config,
            dims: self.dims,
            runs,
        }
    }
}

/// Run-length encoded reachability grid: `runs` are `[start, len]` spans of
/// reachable voxels in x-fastest scan order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceRle {
    pub config: WorkspaceConfig,
    pub dims: [usize; 3],
    pub runs: Vec<[u64; 2]>,
}

impl WorkspaceRle {
    pub fn to_grid(&self) -> WorkspaceResult {
        let mut grid = vec![false; self.dims[0] * self.dims[1] * self.dims[2]];
        for &[start, len] in &self.runs {
            for v in &mut grid[start as usize..(start + len) as usize] {
                *v = true;
            }
        }
        WorkspaceResult {
            config: self.config,
            dims: self.dims,
            grid,
        }
    }

    pub fn reachable_count(&self) -> usize {
        self.runs.iter().map(|r| r[1] as usize).sum()
    }

    pub fn volume_m3(&self) -> f64 {
        let r = self.config.resolution;
        self.reachable_count() as f64 * (r * r * r)
    }
}

/// Deterministic IK seed set: the home configuration plus eight
/// configurations drawn uniformly within limits from a counter-seeded RNG.
pub fn ik_seeds(chain: &Chain, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut seeds = vec![chain.home()];
    for _ in 0..8 {
        seeds.push(
            chain
                .limits()
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi))
                .collect(),
        );
    }
    seeds
}

/// No end effector position can lie farther from the base than the sum of
/// link offsets plus prismatic travel; voxels beyond that skip IK entirely.
fn max_reach(chain: &Chain) -> f64 {
    let mut r = chain.ee_offset().translation.norm();
    for j in chain.joints() {
        r += j.origin.translation.norm();
        if j.joint_type == JointType::Prismatic {
            r += j.limits.0.abs().max(j.limits.1.abs());
        }
    }
    r
}

pub fn estimate(chain: &Chain, config: &WorkspaceConfig) -> Result<WorkspaceResult, WorkspaceError> {
    for (axis, (lo, hi)) in ['x', 'y', 'z']
        .into_iter()
        .zip(config.min.iter().zip(config.max.iter()))
    {
        if !(lo < hi) {
            return Err(WorkspaceError::EmptyBox { axis });
        }
    }
    if !(config.resolution > 0.0) {
        return Err(WorkspaceError::BadResolution(config.resolution));
    }
    let dims: Vec<usize> = (0..3)
        .map(|a| (((config.max[a] - config.min[a]) / config.resolution).round() as usize).max(1))
        .collect();
    let dims = [dims[0], dims[1], dims[2]];

    // Validate the chain/DoF pairing once, up front.
    chain.fk(&chain.home())?;

    let seeds = ik_seeds(chain, config.seed);
    let ik_cfg = IkConfig::reachability();
    let reach = max_reach(chain) + config.resolution;
    let reach2 = reach * reach;

    let half = WorkspaceResult {
        config: *config,
        dims,
        grid: Vec::new(),
    };

    // One work item per (y, z) row; x advances fastest within the row.
    let rows: Vec<Vec<bool>> = map_indexed(dims[1] * dims[2], |row| {
        let (iz, iy) = (row / dims[1], row % dims[1]);
        let mut out = vec![false; dims[0]];
        let mut warm: Option<Vec<f64>> = None;
        for ix in 0..dims[0] {
            let center = half.voxel_center(ix, iy, iz);
            if center.norm_squared() > reach2 {
                continue;
            }
            let target = Pose::from_translation(center);
            let all: Vec<&[f64]> = warm
                .iter()
                .map(|w| w.as_slice())
                .chain(seeds.iter().map(|s| s.as_slice()))
                .collect();
            let r = solve_multi(chain, &target, all, &ik_cfg)
                .expect("chain and seeds were validated");
            if r.converged {
                out[ix] = true;
                warm = Some(r.q);
            }
        }
        out
    });

    let mut grid = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for row in rows {
        grid.extend(row);
    }
    Ok(WorkspaceResult {
        config: *config,
        dims,
        grid,
    })
}
