//! Learned pose corrections on top of the analytic kinematics.
//!
//! Two corrections share one architecture. The arm model maps joint
//! readings to a residual on the analytic end-effector pose; the leg model
//! maps a pair of leg readings to a residual on the finite-difference base
//! motion between those two ticks. A third variant predicts the
//! end-effector pose directly from joint readings with no analytic prior,
//! kept as a baseline for the residual formulation.
//!
//! Conventions. With `compose(a, b)` meaning matrix `M(b) * M(a)`, the
//! residual label for an analytic estimate `A` and a measured pose `B` is
//! `compose(&A.inverse(), &B)`, so the corrected estimate is
//! `compose(&A, &residual)`. The network outputs the residual translation
//! plus its 6D rotation encoding minus the identity encoding; with
//! zero-initialized output heads an untrained model is therefore an exact
//! identity correction.

use crate::chain::Chain;
use crate::dataset::split;
use crate::mlp::{self, FitOptions, FitReport, Mlp, MlpConfig, MlpError, Standardizer};
use crate::plant::Observation;
use crate::se3::{compose, inv_compose, pose_error, Pose, PoseError, Rot6D, Se3Error, Vec3};
use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RESIDUAL_SCHEMA: &str = "reachkit.residual.v1";

#[derive(Debug, Error)]
pub enum ResidualError {
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Se3(#[from] Se3Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint schema {got:?}, expected {expected:?}")]
    Schema { expected: &'static str, got: String },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("input has {got} features, model expects {expected}")]
    BadInput { expected: usize, got: usize },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Chain(#[from] crate::chain::ChainError),
}

/// What the model corrects (or, for `DirectFk`, replaces).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Residual on the arm's analytic end-effector pose in the base frame.
    NeuralFk,
    /// Residual on the finite-difference base motion between two ticks.
    LegOdometry,
    /// End-effector pose in the base frame predicted with no analytic term.
    DirectFk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub schema: String,
    pub kind: ModelKind,
    /// Kinematic chain the model was trained against.
    pub chain: String,
    /// Hash of the collection config that produced the training data.
    pub config_hash: String,
    pub seed: u64,
    pub input_dim: usize,
    /// Hyperparameters the checkpoint was trained with.
    pub hp: TrainOptions,
}

/// A trained correction model plus everything needed to run it: the input
/// normalization fitted on the training split and provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualModel {
    pub meta: CheckpointMeta,
    pub x_norm: Standardizer,
    pub mlp: Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Width of each of the three hidden layers.
    pub hidden: usize,
    pub fit: FitOptions,
    /// Number of (earlier, later) tick pairs drawn for odometry training.
    /// Ignored by the end-effector kinds.
    pub odom_pairs: usize,
    /// Seeds weight init, minibatch shuffling, and odometry pair sampling.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            hidden: 256,
            fit: FitOptions::default(),
            odom_pairs: 50_000,
            seed: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// Label algebra

/// Right-composed correction taking `analytic` to `actual`.
pub fn residual_label(analytic: &Pose, actual: &Pose) -> Pose {
    compose(&analytic.inverse(), actual)
}

/// Applies a correction produced by [`residual_label`].
pub fn apply_residual(analytic: &Pose, residual: &Pose) -> Pose {
    compose(analytic, residual)
}

/// End-effector pose in the base frame from the two world-frame marker
/// poses.
pub fn ee_in_base(ee_world: &Pose, base_world: &Pose) -> Pose {
    inv_compose(ee_world, base_world)
}

/// Motion of the base between two ticks: the earlier base frame expressed
/// in the later one. Mapping a point through it takes coordinates in frame
/// `m` to coordinates in frame `n`.
pub fn base_motion(base_m: &Pose, base_n: &Pose) -> Pose {
    inv_compose(base_m, base_n)
}

/// Base pose at the current tick relative to the anchor tick, from leg
/// readings alone under the static-feet assumption.
pub fn analytical_odometry(leg: &Chain, y_t: &[f64], y_0: &[f64]) -> Result<Pose, ResidualError> {
    Ok(base_motion(&leg.fk(y_0)?, &leg.fk(y_t)?))
}

/// A pose serialized for network input: translation then the 6D rotation
/// encoding, nine features.
fn pose_features(p: &Pose) -> [f64; 9] {
    let six = Rot6D::from_rotation(&p.rotation).0;
    [
        p.translation.x,
        p.translation.y,
        p.translation.z,
        six[0],
        six[1],
        six[2],
        six[3],
        six[4],
        six[5],
    ]
}

/// Network input for the end-effector models: the joint readings followed
/// by the analytic pose they produce. Feeding the analytic estimate in lets
/// the net spend its capacity on the correction, and gives the no-residual
/// ablation the same information budget.
pub fn fk_input(x: &[f64], fk: &Pose) -> Vec<f64> {
    let mut input = x.to_vec();
    input.extend_from_slice(&pose_features(fk));
    input
}

/// Network input for the odometry model: current leg reading, anchor leg
/// reading, then the analytic base motion between them.
pub fn odom_input(y_t: &[f64], y_0: &[f64], o_fk: &Pose) -> Vec<f64> {
    let mut input = y_t.to_vec();
    input.extend_from_slice(y_0);
    input.extend_from_slice(&pose_features(o_fk));
    input
}

fn encode_target(p: &Pose) -> ([f64; 3], [f64; 6]) {
    let t = [p.translation.x, p.translation.y, p.translation.z];
    let six = Rot6D::from_rotation(&p.rotation).0;
    let mut r = [0.0; 6];
    for (i, ri) in r.iter_mut().enumerate() {
        *ri = six[i] - Rot6D::IDENTITY.0[i];
    }
    (t, r)
}

/// Inverse of the target encoding. Fails only if the rotation part has
/// collapsed, which a trained model never produces in practice.
pub fn decode_prediction(trans: &[f64], rot: &[f64]) -> Result<Pose, Se3Error> {
    let mut six = Rot6D::IDENTITY.0;
    for (i, si) in six.iter_mut().enumerate() {
        *si += rot[i];
    }
    Ok(Pose::new(
        Vec3::new(trans[0], trans[1], trans[2]),
        Rot6D(six).to_rotation()?,
    ))
}

impl ResidualModel {
    /// Raw decoded network output for one input row.
    pub fn predict(&self, x: &[f64]) -> Result<Pose, ResidualError> {
        if x.len() != self.meta.input_dim {
            return Err(ResidualError::BadInput {
                expected: self.meta.input_dim,
                got: x.len(),
            });
        }
        let xn = self.x_norm.apply_one(x)?;
        let (t, r) = self.mlp.forward_one(&xn)?;
        Ok(decode_prediction(&t, &r)?)
    }

    /// Kind-aware estimate from a fully assembled input row. Residual kinds
    /// compose the prediction onto the analytic pose; the direct kind
    /// ignores `analytic` entirely.
    pub fn estimate(&self, analytic: &Pose, input: &[f64]) -> Result<Pose, ResidualError> {
        let p = self.predict(input)?;
        Ok(match self.meta.kind {
            ModelKind::DirectFk => p,
            ModelKind::NeuralFk | ModelKind::LegOdometry => apply_residual(analytic, &p),
        })
    }

    /// End-effector estimate from joint readings and their analytic pose.
    pub fn estimate_ee(&self, fk: &Pose, x: &[f64]) -> Result<Pose, ResidualError> {
        self.estimate(fk, &fk_input(x, fk))
    }

    /// Base-motion estimate from the two leg readings and the analytic
    /// motion between them.
    pub fn estimate_odom(
        &self,
        o_fk: &Pose,
        y_t: &[f64],
        y_0: &[f64],
    ) -> Result<Pose, ResidualError> {
        self.estimate(o_fk, &odom_input(y_t, y_0, o_fk))
    }

    pub fn save<W: std::io::Write>(&self, w: W) -> Result<(), ResidualError> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn load<R: std::io::Read>(r: R) -> Result<Self, ResidualError> {
        let model: ResidualModel = serde_json::from_reader(r)?;
        if model.meta.schema != RESIDUAL_SCHEMA {
            return Err(ResidualError::Schema {
                expected: RESIDUAL_SCHEMA,
                got: model.meta.schema,
            });
        }
        if model.meta.input_dim != model.mlp.config.input_dim
            || model.x_norm.mean.len() != model.meta.input_dim
        {
            return Err(ResidualError::Corrupt(
                "input width disagrees between metadata, normalizer, and network",
            ));
        }
        Ok(model)
    }
}

/// Analytic end-effector pose with the learned correction applied.
pub fn corrected_fk(model: &ResidualModel, chain: &Chain, x: &[f64]) -> Result<Pose, ResidualError> {
    let fk = chain.fk(x)?;
    model.estimate_ee(&fk, x)
}

/// Analytic base motion with the learned correction applied.
pub fn corrected_odometry(
    model: &ResidualModel,
    leg: &Chain,
    y_t: &[f64],
    y_0: &[f64],
) -> Result<Pose, ResidualError> {
    let o_fk = analytical_odometry(leg, y_t, y_0)?;
    model.estimate_odom(&o_fk, y_t, y_0)
}

// ---------------------------------------------------------------------------
// Training-set assembly

struct TrainingSet {
    x: DMatrix<f64>,
    y_trans: DMatrix<f64>,
    y_rot: DMatrix<f64>,
}

fn pack(rows: Vec<(Vec<f64>, [f64; 3], [f64; 6])>) -> TrainingSet {
    let n = rows.len();
    let input_dim = rows[0].0.len();
    let x = DMatrix::from_fn(n, input_dim, |r, c| rows[r].0[c]);
    let y_trans = DMatrix::from_fn(n, 3, |r, c| rows[r].1[c]);
    let y_rot = DMatrix::from_fn(n, 6, |r, c| rows[r].2[c]);
    TrainingSet { x, y_trans, y_rot }
}

fn ee_rows(records: &[Observation], kind: ModelKind) -> Result<TrainingSet, ResidualError> {
    let mut rows = Vec::with_capacity(records.len());
    for rec in records {
        let measured = ee_in_base(&rec.mocap_ee, &rec.mocap_base);
        let target = match kind {
            ModelKind::NeuralFk => residual_label(&rec.fk_ee, &measured),
            ModelKind::DirectFk => measured,
            ModelKind::LegOdometry => unreachable!("leg rows built separately"),
        };
        let (t, r) = encode_target(&target);
        rows.push((fk_input(&rec.x, &rec.fk_ee), t, r));
    }
    if rows.is_empty() {
        return Err(ResidualError::EmptyTrainingSet);
    }
    Ok(pack(rows))
}

/// Draws `pairs` tick pairs `(m, n)` with `m <= n` and builds one training
/// row per pair, the later reading playing the current tick and the earlier
/// the anchor. The target is the residual between analytic and measured
/// base motion over the gap. Pairs with `m == n` teach the model that zero
/// gap means (near) zero residual.
fn odom_rows(
    records: &[Observation],
    pairs: usize,
    seed: u64,
) -> Result<TrainingSet, ResidualError> {
    if records.is_empty() || pairs == 0 {
        return Err(ResidualError::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let m = rng.random_range(0..records.len());
        let n = rng.random_range(m..records.len());
        let (a, b) = (&records[m], &records[n]);
        let o_fk = base_motion(&a.fk_base, &b.fk_base);
        let o_true = base_motion(&a.mocap_base, &b.mocap_base);
        let target = residual_label(&o_fk, &o_true);
        let (t, r) = encode_target(&target);
        rows.push((odom_input(&b.y, &a.y, &o_fk), t, r));
    }
    Ok(pack(rows))
}

// ---------------------------------------------------------------------------
// Training

fn build_rows(
    kind: ModelKind,
    records: &[Observation],
    opts: &TrainOptions,
    pair_salt: u64,
) -> Result<TrainingSet, ResidualError> {
    match kind {
        ModelKind::NeuralFk | ModelKind::DirectFk => ee_rows(records, kind),
        ModelKind::LegOdometry => odom_rows(records, opts.odom_pairs, opts.seed ^ pair_salt),
    }
}

fn train_core(
    kind: ModelKind,
    train_recs: &[Observation],
    val_recs: Option<&[Observation]>,
    chain: &str,
    config_hash: &str,
    opts: &TrainOptions,
) -> Result<(ResidualModel, FitReport), ResidualError> {
    let set = build_rows(kind, train_recs, opts, 0x9E37)?;
    let input_dim = set.x.ncols();
    let x_norm = Standardizer::fit(&set.x);
    let xn = x_norm.apply(&set.x)?;
    let val_set = match val_recs {
        Some(recs) => Some(build_rows(kind, recs, opts, 0x9E38)?),
        None => None,
    };
    let val_xn = match &val_set {
        Some(v) => Some(x_norm.apply(&v.x)?),
        None => None,
    };
    let mut model = Mlp::new(MlpConfig::new(input_dim, opts.hidden, opts.seed));
    let fit_opts = FitOptions {
        shuffle_seed: opts.seed.wrapping_add(1),
        ..opts.fit
    };
    let val = val_set
        .as_ref()
        .zip(val_xn.as_ref())
        .map(|(v, vx)| (vx, &v.y_trans, &v.y_rot));
    let report = mlp::fit_with_val(&mut model, &xn, &set.y_trans, &set.y_rot, val, &fit_opts)?;
    Ok((
        ResidualModel {
            meta: CheckpointMeta {
                schema: RESIDUAL_SCHEMA.to_string(),
                kind,
                chain: chain.to_string(),
                config_hash: config_hash.to_string(),
                seed: opts.seed,
                input_dim,
                hp: opts.clone(),
            },
            x_norm,
            mlp: model,
        },
        report,
    ))
}

/// Trains a correction model of the given kind on a collected session.
/// `chain` and `config_hash` are recorded in the checkpoint for provenance
/// checks downstream; they do not affect the fit.
pub fn train(
    kind: ModelKind,
    records: &[Observation],
    chain: &str,
    config_hash: &str,
    opts: &TrainOptions,
) -> Result<(ResidualModel, FitReport), ResidualError> {
    train_core(kind, records, None, chain, config_hash, opts)
}

/// Chronological split, train on the early two thirds, score the late third
/// at every epoch; returns the model together with the held-out tail.
pub fn train_on_split<'a>(
    kind: ModelKind,
    records: &'a [Observation],
    chain: &str,
    config_hash: &str,
    opts: &TrainOptions,
) -> Result<(ResidualModel, FitReport, &'a [Observation]), ResidualError> {
    let (train_recs, test_recs) = split(records);
    let (model, report) = train_core(kind, train_recs, Some(test_recs), chain, config_hash, opts)?;
    Ok((model, report, test_recs))
}

// ---------------------------------------------------------------------------
// Evaluation

/// Per-record error of the analytic end-effector estimate against the
/// measured pose. The baseline every correction is judged against.
pub fn analytic_ee_errors(records: &[Observation]) -> Vec<PoseError> {
    records
        .iter()
        .map(|rec| {
            let measured = ee_in_base(&rec.mocap_ee, &rec.mocap_base);
            pose_error(&rec.fk_ee, &measured)
        })
        .collect()
}

/// Per-record error of the model's end-effector estimate.
pub fn model_ee_errors(
    model: &ResidualModel,
    records: &[Observation],
) -> Result<Vec<PoseError>, ResidualError> {
    records
        .iter()
        .map(|rec| {
            let measured = ee_in_base(&rec.mocap_ee, &rec.mocap_base);
            let est = model.estimate_ee(&rec.fk_ee, &rec.x)?;
            Ok(pose_error(&est, &measured))
        })
        .collect()
}

/// Analytic and corrected base-motion errors over seeded tick pairs, for
/// the same pair distribution the odometry model trains on.
pub fn odom_errors(
    model: Option<&ResidualModel>,
    records: &[Observation],
    pairs: usize,
    seed: u64,
) -> Result<Vec<PoseError>, ResidualError> {
    if records.is_empty() || pairs == 0 {
        return Err(ResidualError::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let m = rng.random_range(0..records.len());
        let n = rng.random_range(m..records.len());
        let (a, b) = (&records[m], &records[n]);
        let o_fk = base_motion(&a.fk_base, &b.fk_base);
        let o_true = base_motion(&a.mocap_base, &b.mocap_base);
        let est = match model {
            Some(m) => m.estimate_odom(&o_fk, &b.y, &a.y)?,
            None => o_fk,
        };
        out.push(pose_error(&est, &o_true));
    }
    Ok(out)
}

pub fn mean_translation_err(errors: &[PoseError]) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    errors.iter().map(|e| e.trans_norm()).sum::<f64>() / errors.len() as f64
}
