//! Small dense network used for the residual models, written out long-hand.
//!
//! Three tanh hidden layers feed two linear heads, one for a translation
//! vector and one for a 6 number rotation delta. The heads start at exactly
//! zero so an untrained model predicts "no residual", which keeps an
//! uncorrected and a freshly initialized corrected pipeline identical.
//! Training is plain minibatch AdamW with decoupled weight decay, single
//! threaded and fully determined by the seeds in the options.
//!
//! tanh is chosen over relu deliberately: the loss is smooth, so the
//! finite-difference gradient check in the tests is meaningful everywhere.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("input has {got} columns, model expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("loss became non-finite at epoch {epoch}, batch {batch}; model rolled back to the last finished epoch")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("standardizer saw {got} features, expected {expected}")]
    BadFeatureCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    /// Width of each of the three hidden layers.
    pub hidden: usize,
    pub trans_dim: usize,
    pub rot_dim: usize,
    /// Seed for hidden-layer initialization.
    pub init_seed: u64,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden: usize, init_seed: u64) -> Self {
        MlpConfig {
            input_dim,
            hidden,
            trans_dim: 3,
            rot_dim: 6,
            init_seed,
        }
    }
}

/// One dense layer, `y = x W^T + b`. Weights are `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Linear {
    fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        Linear {
            w: DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound)),
            b: DVector::zeros(rows),
        }
    }

    fn zeros(rows: usize, cols: usize) -> Self {
        Linear {
            w: DMatrix::zeros(rows, cols),
            b: DVector::zeros(rows),
        }
    }

    /// `x` is one sample per row.
    fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x * self.w.transpose();
        for mut row in out.row_iter_mut() {
            row += self.b.transpose();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub config: MlpConfig,
    hidden: Vec<Linear>,
    trans_head: Linear,
    rot_head: Linear,
}

/// Intermediate activations kept for the backward pass.
struct Cache {
    acts: Vec<DMatrix<f64>>, // input, then each tanh output
    trans: DMatrix<f64>,
    rot: DMatrix<f64>,
}

/// Gradients in the same shape as the parameters.
struct Grads {
    hidden: Vec<Linear>,
    trans_head: Linear,
    rot_head: Linear,
}

impl Mlp {
    pub fn new(config: MlpConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let dims = [config.input_dim, config.hidden, config.hidden, config.hidden];
        let hidden = (0..3)
            .map(|i| Linear::xavier(dims[i + 1], dims[i], &mut rng))
            .collect();
        Mlp {
            hidden,
            // Zero heads: the untrained residual is exactly zero.
            trans_head: Linear::zeros(config.trans_dim, config.hidden),
            rot_head: Linear::zeros(config.rot_dim, config.hidden),
            config,
        }
    }

    pub fn check_input(&self, x: &DMatrix<f64>) -> Result<(), MlpError> {
        if x.ncols() != self.config.input_dim {
            return Err(MlpError::ShapeMismatch {
                expected: self.config.input_dim,
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Batched forward pass; rows are samples. Returns `(trans, rot)` rows.
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), MlpError> {
        let c = self.forward_cached(x)?;
        Ok((c.trans, c.rot))
    }

    /// Single-sample convenience wrapper.
    pub fn forward_one(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>), MlpError> {
        let xm = DMatrix::from_row_slice(1, x.len(), x);
        let (t, r) = self.forward(&xm)?;
        Ok((t.row(0).iter().copied().collect(), r.row(0).iter().copied().collect()))
    }

    fn forward_cached(&self, x: &DMatrix<f64>) -> Result<Cache, MlpError> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(4);
        acts.push(x.clone());
        for layer in &self.hidden {
            let a = layer.forward(acts.last().unwrap()).map(|v| v.tanh());
            acts.push(a);
        }
        let last = acts.last().unwrap();
        let trans = self.trans_head.forward(last);
        let rot = self.rot_head.forward(last);
        Ok(Cache { acts, trans, rot })
    }

    /// Mean squared error summed over both heads.
    pub fn loss(
        &self,
        x: &DMatrix<f64>,
        y_trans: &DMatrix<f64>,
        y_rot: &DMatrix<f64>,
    ) -> Result<f64, MlpError> {
        let c = self.forward_cached(x)?;
        Ok(loss_of(&c, y_trans, y_rot))
    }

    fn backward(&self, c: &Cache, y_trans: &DMatrix<f64>, y_rot: &DMatrix<f64>) -> Grads {
        let n = c.acts[0].nrows() as f64;
        let d_trans = (&c.trans - y_trans) * (2.0 / n);
        let d_rot = (&c.rot - y_rot) * (2.0 / n);
        let last = &c.acts[3];

        let g_trans = Linear {
            w: d_trans.transpose() * last,
            b: column_sums(&d_trans),
        };
        let g_rot = Linear {
            w: d_rot.transpose() * last,
            b: column_sums(&d_rot),
        };

        let mut d_act = &d_trans * &self.trans_head.w + &d_rot * &self.rot_head.w;
        let mut g_hidden = vec![
            Linear::zeros(0, 0),
            Linear::zeros(0, 0),
            Linear::zeros(0, 0),
        ];
        for i in (0..3).rev() {
            // d/dz tanh(z) = 1 - tanh(z)^2, and acts[i + 1] is tanh(z).
            let dz = d_act.zip_map(&c.acts[i + 1], |d, a| d * (1.0 - a * a));
            g_hidden[i] = Linear {
                w: dz.transpose() * &c.acts[i],
                b: column_sums(&dz),
            };
            if i > 0 {
                d_act = dz * &self.hidden[i].w;
            }
        }
        Grads {
            hidden: g_hidden,
            trans_head: g_trans,
            rot_head: g_rot,
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Linear> {
        let mut v: Vec<&mut Linear> = self.hidden.iter_mut().collect();
        v.push(&mut self.trans_head);
        v.push(&mut self.rot_head);
        v
    }
}

fn loss_of(c: &Cache, y_trans: &DMatrix<f64>, y_rot: &DMatrix<f64>) -> f64 {
    let n = c.acts[0].nrows() as f64;
    let et = &c.trans - y_trans;
    let er = &c.rot - y_rot;
    (et.norm_squared() + er.norm_squared()) / n
}

fn column_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|col| col.sum()))
}

// ---------------------------------------------------------------------------
// AdamW

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Decoupled weight decay; applied to weight matrices, never to biases.
    pub weight_decay: f64,
    pub shuffle_seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            epochs: 40,
            batch_size: 256,
            lr: 1e-4,
            weight_decay: 1e-2,
            shuffle_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Held-out loss at each epoch end; empty when no validation set was
    /// passed.
    pub val_losses: Vec<f64>,
}

struct AdamW {
    m: Vec<Linear>,
    v: Vec<Linear>,
    t: usize,
}

impl AdamW {
    fn new(model: &Mlp) -> Self {
        let zero_like = |l: &Linear| Linear::zeros(l.w.nrows(), l.w.ncols());
        let mut m: Vec<Linear> = model.hidden.iter().map(zero_like).collect();
        m.push(zero_like(&model.trans_head));
        m.push(zero_like(&model.rot_head));
        let v = m.clone();
        AdamW { m, v, t: 0 }
    }

    fn step(&mut self, model: &mut Mlp, grads: &Grads, lr: f64, wd: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t as i32);
        let bc2 = 1.0 - B2.powi(self.t as i32);
        let mut g: Vec<&Linear> = grads.hidden.iter().collect();
        g.push(&grads.trans_head);
        g.push(&grads.rot_head);
        for (((p, g), m), v) in model
            .params_mut()
            .into_iter()
            .zip(g)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            m.w = &m.w * B1 + &g.w * (1.0 - B1);
            v.w.zip_apply(&g.w, |vi, gi| *vi = *vi * B2 + gi * gi * (1.0 - B2));
            let mut step = m.w.zip_map(&v.w, |mi, vi| {
                (mi / bc1) / ((vi / bc2).sqrt() + EPS)
            });
            step += &p.w * wd;
            p.w -= step * lr;

            m.b = &m.b * B1 + &g.b * (1.0 - B1);
            v.b.zip_apply(&g.b, |vi, gi| *vi = *vi * B2 + gi * gi * (1.0 - B2));
            let step_b = m.b.zip_map(&v.b, |mi, vi| (mi / bc1) / ((vi / bc2).sqrt() + EPS));
            p.b -= step_b * lr;
        }
    }
}

/// Minibatch AdamW fit. Deterministic given the options. If the loss ever
/// goes non-finite the model is rolled back to the end of the last finished
/// epoch and an error is returned.
pub fn fit(
    model: &mut Mlp,
    x: &DMatrix<f64>,
    y_trans: &DMatrix<f64>,
    y_rot: &DMatrix<f64>,
    opts: &FitOptions,
) -> Result<FitReport, MlpError> {
    fit_with_val(model, x, y_trans, y_rot, None, opts)
}

/// [`fit`] that also scores a held-out set at every epoch end. The
/// validation set never influences the parameters, only the report.
pub fn fit_with_val(
    model: &mut Mlp,
    x: &DMatrix<f64>,
    y_trans: &DMatrix<f64>,
    y_rot: &DMatrix<f64>,
    val: Option<(&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>)>,
    opts: &FitOptions,
) -> Result<FitReport, MlpError> {
    model.check_input(x)?;
    let n = x.nrows();
    assert_eq!(y_trans.nrows(), n);
    assert_eq!(y_rot.nrows(), n);
    let mut opt = AdamW::new(model);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.shuffle_seed);
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    let mut val_losses = Vec::new();
    let mut last_good = model.clone();
    for epoch in 0..opts.epochs {
        shuffle(&mut order, &mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0.0;
        for (bi, batch) in order.chunks(opts.batch_size.max(1)).enumerate() {
            let xb = select_rows(x, batch);
            let tb = select_rows(y_trans, batch);
            let rb = select_rows(y_rot, batch);
            let cache = model.forward_cached(&xb)?;
            let loss = loss_of(&cache, &tb, &rb);
            if !loss.is_finite() {
                *model = last_good;
                return Err(MlpError::NonFiniteLoss { epoch, batch: bi });
            }
            let grads = model.backward(&cache, &tb, &rb);
            opt.step(model, &grads, opts.lr, opts.weight_decay);
            epoch_loss += loss;
            batches += 1.0;
        }
        epoch_losses.push(epoch_loss / batches);
        if let Some((vx, vt, vr)) = val {
            val_losses.push(model.loss(vx, vt, vr)?);
        }
        last_good = model.clone();
    }
    Ok(FitReport {
        epoch_losses,
        val_losses,
    })
}

fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    // Fisher-Yates; kept local so the byte-for-byte behavior is ours.
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

// ---------------------------------------------------------------------------
// Input standardization

/// Per-feature affine normalization fitted on the training split and stored
/// with the checkpoint, so inference always sees the training distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Vec<f64> = (0..x.ncols()).map(|c| x.column(c).sum() / n).collect();
        let std: Vec<f64> = (0..x.ncols())
            .map(|c| {
                let m = mean[c];
                let var = x.column(c).iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                // Constant features pass through centered, not exploded.
                var.sqrt().max(1e-8)
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, MlpError> {
        if x.ncols() != self.mean.len() {
            return Err(MlpError::BadFeatureCount {
                expected: self.mean.len(),
                got: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            (x[(r, c)] - self.mean[c]) / self.std[c]
        }))
    }

    pub fn apply_one(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        if x.len() != self.mean.len() {
            return Err(MlpError::BadFeatureCount {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_batch(n: usize, dim: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, dim, |_, _| rng.random_range(-1.0..1.0));
        // Smooth synthetic targets so a small net can make progress.
        let yt = DMatrix::from_fn(n, 3, |r, c| {
            f64::sin(x[(r, 0)] + 0.5 * x[(r, (c + 1) % dim)]) * 0.1
        });
        let yr = DMatrix::from_fn(n, 6, |r, c| f64::cos(x[(r, c % dim)] * 0.7) * 0.05 - 0.05);
        (x, yt, yr)
    }

    #[test]
    fn zero_heads_predict_zero_residual() {
        let mlp = Mlp::new(MlpConfig::new(10, 32, 0));
        let x = DMatrix::from_fn(4, 10, |r, c| (r as f64) - (c as f64) * 0.3);
        let (t, r) = mlp.forward(&x).unwrap();
        assert_eq!(t, DMatrix::zeros(4, 3));
        assert_eq!(r, DMatrix::zeros(4, 6));
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let cfg = MlpConfig::new(4, 6, 3);
        let mut mlp = Mlp::new(cfg);
        // Move heads off zero so their gradients flow through everything.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for p in mlp.params_mut() {
            p.w.apply(|v| *v += rng.random_range(-0.2..0.2));
            p.b.apply(|v| *v += rng.random_range(-0.2..0.2));
        }
        let (x, yt, yr) = toy_batch(5, 4, 1);
        let cache = mlp.forward_cached(&x).unwrap();
        let grads = mlp.backward(&cache, &yt, &yr);

        let mut flat_analytic = Vec::new();
        let mut g: Vec<&Linear> = grads.hidden.iter().collect();
        g.push(&grads.trans_head);
        g.push(&grads.rot_head);
        for l in &g {
            flat_analytic.extend(l.w.iter().copied());
            flat_analytic.extend(l.b.iter().copied());
        }

        let h = 1e-6;
        let mut idx = 0;
        for li in 0..5 {
            let (wn, bn) = {
                let ps = mlp.params_mut();
                (ps[li].w.len(), ps[li].b.len())
            };
            for k in 0..wn + bn {
                let get = |m: &mut Mlp| -> *mut f64 {
                    let mut ps = m.params_mut();
                    if k < wn {
                        &mut ps[li].w[k] as *mut f64
                    } else {
                        &mut ps[li].b[k - wn] as *mut f64
                    }
                };
                unsafe {
                    let p = get(&mut mlp);
                    let orig = *p;
                    *p = orig + h;
                    let lp = mlp.loss(&x, &yt, &yr).unwrap();
                    let p = get(&mut mlp);
                    *p = orig - h;
                    let lm = mlp.loss(&x, &yt, &yr).unwrap();
                    let p = get(&mut mlp);
                    *p = orig;
                    let fd = (lp - lm) / (2.0 * h);
                    let an = flat_analytic[idx];
                    assert!(
                        (fd - an).abs() <= 1e-6 + 1e-4 * an.abs().max(fd.abs()),
                        "param {idx}: fd {fd} vs analytic {an}"
                    );
                }
                idx += 1;
            }
        }
        assert_eq!(idx, flat_analytic.len());
    }

    #[test]
    fn fit_reduces_loss_and_is_deterministic() {
        let (x, yt, yr) = toy_batch(512, 6, 5);
        let opts = FitOptions {
            epochs: 30,
            batch_size: 64,
            lr: 3e-3,
            weight_decay: 1e-2,
            shuffle_seed: 9,
        };
        let mut a = Mlp::new(MlpConfig::new(6, 24, 2));
        let report = fit(&mut a, &x, &yt, &yr, &opts).unwrap();
        let first = report.epoch_losses[0];
        let last = *report.epoch_losses.last().unwrap();
        assert!(
            last < 0.3 * first,
            "loss did not drop: {first} -> {last}"
        );

        let mut b = Mlp::new(MlpConfig::new(6, 24, 2));
        fit(&mut b, &x, &yt, &yr, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_loss_rolls_back_and_errors() {
        let (x, yt, yr) = toy_batch(64, 4, 8);
        let mut mlp = Mlp::new(MlpConfig::new(4, 8, 1));
        let good = FitOptions {
            epochs: 2,
            batch_size: 32,
            lr: 1e-3,
            ..FitOptions::default()
        };
        fit(&mut mlp, &x, &yt, &yr, &good).unwrap();
        let snapshot = mlp.clone();
        // Poison one input so the very first batch of the next fit blows up.
        let mut bad_x = x.clone();
        bad_x[(0, 0)] = f64::NAN;
        let err = fit(&mut mlp, &bad_x, &yt, &yr, &good).unwrap_err();
        assert!(matches!(err, MlpError::NonFiniteLoss { .. }));
        assert_eq!(mlp, snapshot, "model was not rolled back");
    }

    #[test]
    fn standardizer_centers_and_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(200, 3, |_, c| {
            rng.random_range(-1.0..1.0) * (c as f64 + 1.0) + c as f64 * 10.0
        });
        let s = Standardizer::fit(&x);
        let z = s.apply(&x).unwrap();
        for c in 0..3 {
            let mean = z.column(c).sum() / 200.0;
            let var = z.column(c).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 200.0;
            assert_relative_eq!(mean, 0.0, epsilon = 1e-12);
            assert_relative_eq!(var, 1.0, epsilon = 1e-9);
        }
        // Single-sample path agrees with the batched one.
        let one = s.apply_one(&[x[(0, 0)], x[(0, 1)], x[(0, 2)]]).unwrap();
        for c in 0..3 {
            assert_relative_eq!(one[c], z[(0, c)], epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_features_do_not_explode() {
        let x = DMatrix::from_element(50, 2, 3.25);
        let s = Standardizer::fit(&x);
        let z = s.apply(&x).unwrap();
        assert!(z.iter().all(|v| v.is_finite() && v.abs() < 1e-3));
    }

    #[test]
    fn shape_errors_are_reported() {
        let mlp = Mlp::new(MlpConfig::new(5, 8, 0));
        let x = DMatrix::zeros(2, 4);
        assert_eq!(
            mlp.forward(&x).unwrap_err(),
            MlpError::ShapeMismatch {
                expected: 5,
                got: 4
            }
        );
        let s = Standardizer::fit(&DMatrix::<f64>::zeros(3, 2));
        assert!(matches!(
            s.apply(&DMatrix::<f64>::zeros(3, 5)),
            Err(MlpError::BadFeatureCount { .. })
        ));
    }

    #[test]
    fn serde_roundtrip_preserves_weights_exactly() {
        let (x, yt, yr) = toy_batch(64, 4, 8);
        let mut mlp = Mlp::new(MlpConfig::new(4, 8, 1));
        fit(&mut mlp, &x, &yt, &yr, &FitOptions { epochs: 2, ..FitOptions::default() }).unwrap();
        let json = serde_json::to_string(&mlp).unwrap();
        let back: Mlp = serde_json::from_str(&json).unwrap();
        assert_eq!(back, mlp);
    }
}
