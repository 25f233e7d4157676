//! Full-batch training: mean squared error plus an L2 penalty on the
//! weights, minimized by Polak–Ribière conjugate gradients with a
//! backtracking Armijo line search.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::pricing::bsm::OPTION_FEATURES;
use crate::records::OptionRecord;

use super::MlpSurrogate;

pub const MIN_TRAINING_RECORDS: usize = 50;

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const MAX_EXPANSIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    #[default]
    NonlinearConjugateGradient,
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub l2_lambda: f64,
    pub max_iters: usize,
    pub optimizer: Optimizer,
    pub split_fraction: f64,
    pub seed: u64,
    /// Multiplier on the He-uniform bound `sqrt(6 / fan_in)`.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 16],
            l2_lambda: 1e-3,
            max_iters: 1000,
            optimizer: Optimizer::NonlinearConjugateGradient,
            split_fraction: 0.75,
            seed: 0,
            init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return contract(format!(
                "split fraction must lie in (0, 1), got {}",
                self.split_fraction
            ));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return contract(format!(
                "l2_lambda must be nonnegative, got {}",
                self.l2_lambda
            ));
        }
        if self.hidden.contains(&0) {
            return contract("hidden layers need at least one unit");
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return contract("init_scale must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: MlpSurrogate,
    /// Root mean squared error in raw target units.
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub iterations: usize,
    /// Objective after initialization and after every accepted step.
    pub loss_history: Vec<f64>,
    pub train_size: usize,
    pub test_size: usize,
}

/// Layer geometry of a flat parameter vector: per layer the weights
/// (row-major `out x in`) followed by the biases.
pub(crate) struct Layout {
    pub sizes: Vec<usize>,
    offsets: Vec<(usize, usize)>,
    pub n_params: usize,
}

impl Layout {
    pub(crate) fn new(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::new();
        let mut at = 0;
        for l in 0..sizes.len() - 1 {
            let w = at;
            at += sizes[l] * sizes[l + 1];
            offsets.push((w, at));
            at += sizes[l + 1];
        }
        Self {
            sizes,
            offsets,
            n_params: at,
        }
    }

    fn layers(&self) -> usize {
        self.offsets.len()
    }
}

/// Standardized training data in row-major form.
pub(crate) struct Batch<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub dim: usize,
}

/// Objective `mean((yhat - y)^2) + lambda * |W|^2` and, when `grad` is
/// given, its gradient.
pub(crate) fn objective(
    layout: &Layout,
    params: &[f64],
    batch: &Batch<'_>,
    lambda: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let n = batch.y.len();
    let layers = layout.layers();
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut acts: Vec<Vec<f64>> = layout.sizes.iter().map(|&s| vec![0.0; s]).collect();
    let mut deltas: Vec<Vec<f64>> = layout.sizes.iter().map(|&s| vec![0.0; s]).collect();
    let mut sse = 0.0;
    for s in 0..n {
        acts[0].copy_from_slice(&batch.x[s * batch.dim..(s + 1) * batch.dim]);
        for l in 0..layers {
            let (n_in, n_out) = (layout.sizes[l], layout.sizes[l + 1]);
            let (w0, b0) = layout.offsets[l];
            let (lower, upper) = acts.split_at_mut(l + 1);
            let h = &lower[l];
            let out = &mut upper[0];
            for j in 0..n_out {
                let row = &params[w0 + j * n_in..w0 + (j + 1) * n_in];
                let a = params[b0 + j] + row.iter().zip(h.iter()).map(|(w, v)| w * v).sum::<f64>();
                out[j] = if l + 1 < layers { a.max(0.0) } else { a };
            }
        }
        let err = acts[layers][0] - batch.y[s];
        sse += err * err;

        let Some(g) = grad.as_deref_mut() else {
            continue;
        };
        deltas[layers][0] = 2.0 * err / n as f64;
        for l in (0..layers).rev() {
            let (n_in, n_out) = (layout.sizes[l], layout.sizes[l + 1]);
            let (w0, b0) = layout.offsets[l];
            let (lower, upper) = deltas.split_at_mut(l + 1);
            let d_out = &upper[0];
            let d_in = &mut lower[l];
            d_in.iter_mut().for_each(|v| *v = 0.0);
            let h = &acts[l];
            for j in 0..n_out {
                let dj = d_out[j];
                if dj == 0.0 {
                    continue;
                }
                g[b0 + j] += dj;
                let row = w0 + j * n_in;
                for i in 0..n_in {
                    g[row + i] += dj * h[i];
                    d_in[i] += dj * params[row + i];
                }
            }
            if l > 0 {
                // acts[l] holds relu(pre); zero means the unit was inactive
                for (d, a) in d_in.iter_mut().zip(&acts[l]) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
        }
    }
    let mut penalty = 0.0;
    for &(w0, b0) in &layout.offsets {
        for k in w0..b0 {
            penalty += params[k] * params[k];
            if let Some(g) = grad.as_deref_mut() {
                g[k] += 2.0 * lambda * params[k];
            }
        }
    }
    sse / n as f64 + lambda * penalty
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (
        mean,
        if std > 0.0 && std.is_finite() {
            std
        } else {
            1.0
        },
    )
}

fn line_value(
    layout: &Layout,
    params: &[f64],
    d: &[f64],
    t: f64,
    trial: &mut [f64],
    batch: &Batch<'_>,
    lambda: f64,
) -> f64 {
    for ((x, p), di) in trial.iter_mut().zip(params).zip(d) {
        *x = p + t * di;
    }
    objective(layout, trial, batch, lambda, None)
}

/// Minimizes the objective; returns the final parameters, the loss history
/// and the number of accepted steps.
fn minimize(
    layout: &Layout,
    mut params: Vec<f64>,
    batch: &Batch<'_>,
    config: &TrainConfig,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let np = layout.n_params;
    let mut g = vec![0.0; np];
    let mut f = objective(layout, &params, batch, config.l2_lambda, Some(&mut g));
    if !f.is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            loss: f,
        });
    }
    let mut history = vec![f];
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut step = 1.0 / dot(&g, &g).sqrt().max(1.0);
    let mut trial = vec![0.0; np];
    let mut g_new = vec![0.0; np];
    let mut since_restart = 0;
    let mut accepted = 0;

    while accepted < config.max_iters {
        let mut slope = dot(&g, &d);
        let mut steepest = since_restart == 0;
        if slope >= 0.0 {
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = -dot(&g, &g);
            steepest = true;
            since_restart = 0;
        }
        if -slope <= f64::EPSILON * f64::EPSILON {
            break;
        }

        let mut t = (step * 2.0).min(1e3);
        let mut found = None;
        let mut backtracked = false;
        for _ in 0..MAX_BACKTRACKS {
            let ft = line_value(layout, &params, &d, t, &mut trial, batch, config.l2_lambda);
            if ft.is_finite() && ft <= f + ARMIJO_C1 * t * slope {
                found = Some(ft);
                break;
            }
            backtracked = true;
            let shrink = if ft.is_finite() {
                -slope * t / (2.0 * (ft - f - slope * t))
            } else {
                0.1
            };
            t *= shrink.clamp(0.1, 0.5);
        }
        // the first trial was accepted: keep stretching while the loss falls
        if let (Some(mut best), false) = (found, backtracked) {
            for _ in 0..MAX_EXPANSIONS {
                let t2 = 2.0 * t;
                let f2 = line_value(layout, &params, &d, t2, &mut trial, batch, config.l2_lambda);
                if !(f2.is_finite() && f2 < best) {
                    break;
                }
                best = f2;
                t = t2;
            }
            found = Some(best);
        }
        for k in 0..np {
            trial[k] = params[k] + t * d[k];
        }
        let Some(f_next) = found else {
            if steepest {
                break;
            }
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            since_restart = 0;
            continue;
        };

        std::mem::swap(&mut params, &mut trial);
        let f_check = objective(layout, &params, batch, config.l2_lambda, Some(&mut g_new));
        if !f_check.is_finite() {
            return Err(Error::Divergence {
                iteration: accepted + 1,
                loss: f_check,
            });
        }
        debug_assert_eq!(f_check, f_next);
        accepted += 1;
        since_restart += 1;
        f = f_next;
        history.push(f);
        step = t;

        let beta = match config.optimizer {
            Optimizer::GradientDescent => 0.0,
            Optimizer::NonlinearConjugateGradient if since_restart >= np => {
                since_restart = 0;
                0.0
            }
            Optimizer::NonlinearConjugateGradient => {
                let num: f64 = g_new.iter().zip(&g).map(|(a, b)| a * (a - b)).sum();
                (num / dot(&g, &g)).max(0.0)
            }
        };
        for k in 0..np {
            d[k] = -g_new[k] + beta * d[k];
        }
        std::mem::swap(&mut g, &mut g_new);
    }
    Ok((params, history, accepted))
}

/// Trains a `[n, hidden..., 1]` ReLU network on raw inputs `xs` and targets
/// `ys`. The split, initialization and optimization are deterministic
/// given `config.seed`.
pub fn train_mlp(
    feature_names: &[String],
    xs: &[Vec<f64>],
    ys: &[f64],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if xs.len() != ys.len() {
        return contract(format!("{} inputs but {} targets", xs.len(), ys.len()));
    }
    if xs.len() < MIN_TRAINING_RECORDS {
        return Err(Error::InsufficientData {
            what: "training records",
            needed: MIN_TRAINING_RECORDS,
            got: xs.len(),
        });
    }
    let dim = feature_names.len();
    if dim == 0 || xs.iter().any(|x| x.len() != dim) {
        return contract("every input row must match the feature names");
    }
    if xs.iter().flatten().chain(ys).any(|v| !v.is_finite()) {
        return contract("training data must be finite");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.shuffle(&mut rng);
    let n_train =
        ((xs.len() as f64 * config.split_fraction).round() as usize).clamp(1, xs.len() - 1);
    let (train_idx, test_idx) = order.split_at(n_train);

    let input_stats: Vec<(f64, f64)> = (0..dim)
        .map(|j| mean_std(train_idx.iter().map(|&i| xs[i][j])))
        .collect();
    let (y_mean, y_std) = mean_std(train_idx.iter().map(|&i| ys[i]));
    let zx: Vec<f64> = train_idx
        .iter()
        .flat_map(|&i| {
            xs[i]
                .iter()
                .zip(&input_stats)
                .map(|(v, (m, s))| (v - m) / s)
        })
        .collect();
    let zy: Vec<f64> = train_idx
        .iter()
        .map(|&i| (ys[i] - y_mean) / y_std)
        .collect();

    let mut sizes = vec![dim];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let layout = Layout::new(sizes.clone());
    let mut params = vec![0.0; layout.n_params];
    for (l, &(w0, b0)) in layout.offsets.iter().enumerate() {
        let bound = config.init_scale * (6.0 / sizes[l] as f64).sqrt();
        for p in &mut params[w0..b0] {
            *p = rng.random_range(-bound..bound);
        }
    }

    let batch = Batch {
        x: &zx,
        y: &zy,
        dim,
    };
    let (params, loss_history, iterations) = minimize(&layout, params, &batch, config)?;

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (l, &(w0, b0)) in layout.offsets.iter().enumerate() {
        weights.push(params[w0..b0].to_vec());
        biases.push(params[b0..b0 + sizes[l + 1]].to_vec());
    }
    let (means, stds): (Vec<f64>, Vec<f64>) = input_stats.into_iter().unzip();
    let model = MlpSurrogate::new(feature_names.to_vec(), sizes, weights, biases)?
        .with_standardization(means, stds, y_mean, y_std)?;

    let rmse = |idx: &[usize]| -> Result<f64> {
        let mut sse = 0.0;
        for &i in idx {
            let e = model.forward(&xs[i])? - ys[i];
            sse += e * e;
        }
        Ok((sse / idx.len() as f64).sqrt())
    };
    Ok(TrainOutcome {
        train_rmse: rmse(train_idx)?,
        test_rmse: rmse(test_idx)?,
        model,
        iterations,
        loss_history,
        train_size: train_idx.len(),
        test_size: test_idx.len(),
    })
}

/// Trains a pricer for one option kind on `(S, r, tau, K, sigma) -> price`.
pub fn train_surrogate(records: &[OptionRecord], config: &TrainConfig) -> Result<TrainOutcome> {
    let Some(first) = records.first() else {
        return Err(Error::InsufficientData {
            what: "training records",
            needed: MIN_TRAINING_RECORDS,
            got: 0,
        });
    };
    if records.iter().any(|r| r.kind != first.kind) {
        return contract("train calls and puts separately; records mix both kinds");
    }
    let names: Vec<String> = OPTION_FEATURES.iter().map(|s| s.to_string()).collect();
    let xs: Vec<Vec<f64>> = records.iter().map(|r| r.features().to_vec()).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.price).collect();
    let mut outcome = train_mlp(&names, &xs, &ys, config)?;
    outcome.model = outcome.model.with_kind(first.kind)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let layout = Layout::new(vec![3, 6, 4, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params: Vec<f64> = (0..layout.n_params)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let x: Vec<f64> = (0..60).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let batch = Batch {
            x: &x,
            y: &y,
            dim: 3,
        };
        let mut g = vec![0.0; layout.n_params];
        objective(&layout, &params, &batch, 1e-3, Some(&mut g));
        let mut idx: Vec<usize> = (0..layout.n_params).collect();
        idx.shuffle(&mut rng);
        for &k in &idx[..10] {
            let h = 1e-6;
            let mut up = params.clone();
            let mut dn = params.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (objective(&layout, &up, &batch, 1e-3, None)
                - objective(&layout, &dn, &batch, 1e-3, None))
                / (2.0 * h);
            assert!(
                (fd - g[k]).abs() <= 1e-4 * g[k].abs().max(1e-4),
                "param {k}: {fd} vs {}",
                g[k]
            );
        }
    }

    fn linear_data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                vec![
                    rng.random_range(0.0..10.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(100.0..200.0),
                ]
            })
            .collect();
        let ys = xs
            .iter()
            .map(|x| 3.0 * x[0] - 20.0 * x[1] + 0.5 * x[2] + 7.0)
            .collect();
        (xs, ys)
    }

    #[test]
    fn learns_a_linear_target() {
        let (xs, ys) = linear_data(500, 9);
        let cfg = TrainConfig {
            l2_lambda: 0.0,
            ..TrainConfig::default()
        };
        let out = train_mlp(&names(3), &xs, &ys, &cfg).unwrap();
        let (_, std) = mean_std(ys.iter().copied());
        assert!(
            out.test_rmse <= 1e-2 * std,
            "{} vs {} after {} steps, loss {:?}",
            out.test_rmse,
            std,
            out.iterations,
            out.loss_history.last()
        );
        assert!(out.loss_history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!((out.train_size, out.test_size), (375, 125));
    }

    #[test]
    fn deterministic_given_seed() {
        let (xs, ys) = linear_data(80, 1);
        let cfg = TrainConfig {
            max_iters: 30,
            hidden: vec![8],
            ..TrainConfig::default().with_seed(4)
        };
        let a = train_mlp(&names(3), &xs, &ys, &cfg).unwrap();
        let b = train_mlp(&names(3), &xs, &ys, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train_mlp(&names(3), &xs, &ys, &cfg.clone().with_seed(5)).unwrap();
        assert_ne!(a.model, c.model);
    }

    #[test]
    fn gradient_descent_also_descends() {
        let (xs, ys) = linear_data(80, 2);
        let cfg = TrainConfig {
            max_iters: 50,
            hidden: vec![8],
            optimizer: Optimizer::GradientDescent,
            ..TrainConfig::default()
        };
        let out = train_mlp(&names(3), &xs, &ys, &cfg).unwrap();
        assert!(out.loss_history.last() < out.loss_history.first());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            train_surrogate(&[], &TrainConfig::default()),
            Err(Error::InsufficientData { got: 0, .. })
        ));
        let (xs, ys) = linear_data(49, 0);
        assert!(matches!(
            train_mlp(&names(3), &xs, &ys, &TrainConfig::default()),
            Err(Error::InsufficientData { got: 49, .. })
        ));
        let bad = TrainConfig {
            split_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
