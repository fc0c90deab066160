use super::{check_dim, Classifier, LearnError};
use crate::linalg::dot;
use crate::rado::{Dataset, Rado};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientConfig {
    pub step: f64,
    pub max_iters: usize,
    /// Stop once `‖∇‖₂` falls to this value.
    pub tol: f64,
    pub max_backtrack: usize,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            step: 0.1,
            max_iters: 10_000,
            tol: 1e-6,
            max_backtrack: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport<T> {
    pub loss: T,
    pub gradient: Vec<T>,
    /// Loss after every accepted step, starting with the initial value.
    pub trace: Vec<T>,
    pub converged: bool,
}

fn check_rados<T: Real>(theta: &[T], rados: &[Rado<T>]) -> Result<(), LearnError> {
    if rados.is_empty() {
        return Err(LearnError::NoRados);
    }
    for r in rados {
        check_dim(theta.len(), r.dim())?;
    }
    Ok(())
}

/// Softmax weights of `−θᵀπ_k` and the log of their unnormalized mean.
fn weights<T: Real>(theta: &[T], rados: &[Rado<T>]) -> (Vec<T>, T) {
    let z: Vec<T> = rados.iter().map(|r| -dot(theta, &r.pi)).collect();
    let top = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|&v| (v - top).exp()).collect();
    let total: T = e.iter().copied().fold(T::zero(), |a, b| a + b);
    let k = T::from_usize(rados.len());
    let log_mean = top + total.ln() - k.ln();
    (e.into_iter().map(|v| v / total).collect(), log_mean)
}

/// `log((1/K) Σ_k exp(−θᵀπ_k)) + θᵀθ`, the regularizer only when asked.
pub fn exp_rado_loss<T: Real>(theta: &[T], rados: &[Rado<T>], regularized: bool) -> Result<T, LearnError> {
    check_rados(theta, rados)?;
    let (_, log_mean) = weights(theta, rados);
    Ok(if regularized {
        log_mean + dot(theta, theta)
    } else {
        log_mean
    })
}

/// Gradient of the regularized exponential rado loss.
pub fn grad_exp_rado_loss<T: Real>(theta: &[T], rados: &[Rado<T>]) -> Result<Vec<T>, LearnError> {
    check_rados(theta, rados)?;
    let (w, _) = weights(theta, rados);
    let two = T::from_usize(2);
    let mut g: Vec<T> = theta.iter().map(|&t| two * t).collect();
    for (wk, r) in w.iter().zip(rados) {
        for (gj, &pj) in g.iter_mut().zip(&r.pi) {
            *gj = *gj - *wk * pj;
        }
    }
    Ok(g)
}

fn norm<T: Real>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// Backtracking descent from `θ = 0`: each iteration tries the configured
/// step and halves it until the loss does not increase.
fn descend<T: Real>(
    d: usize,
    cfg: &GradientConfig,
    loss: impl Fn(&[T]) -> T,
    grad: impl Fn(&[T]) -> Vec<T>,
) -> Result<(Vec<T>, LossReport<T>), LearnError> {
    let mut theta = vec![T::zero(); d];
    let mut current = loss(&theta);
    let mut trace = vec![current];
    let tol = T::from_f64_lossy(cfg.tol);
    let mut g = grad(&theta);
    let mut converged = false;
    for iteration in 0..cfg.max_iters {
        if norm(&g) <= tol {
            converged = true;
            break;
        }
        let mut step = T::from_f64_lossy(cfg.step);
        let mut accepted = None;
        let mut best_rejected = T::infinity();
        for _ in 0..=cfg.max_backtrack {
            let candidate: Vec<T> = theta.iter().zip(&g).map(|(&t, &gj)| t - step * gj).collect();
            let value = loss(&candidate);
            if value <= current {
                accepted = Some((candidate, value));
                break;
            }
            best_rejected = best_rejected.min(value);
            step = step / T::from_usize(2);
        }
        match accepted {
            Some((next, value)) => {
                theta = next;
                current = value;
                trace.push(current);
                g = grad(&theta);
            }
            // Increases at rounding level mean the iterate has stalled.
            None if best_rejected - current <= T::from_f64_lossy(1e-12) * (T::one() + current.abs()) => break,
            None => {
                return Err(LearnError::Diverged {
                    iteration,
                    depth: cfg.max_backtrack,
                })
            }
        }
    }
    if !converged {
        converged = norm(&g) <= tol;
    }
    Ok((
        theta,
        LossReport {
            loss: current,
            gradient: g,
            trace,
            converged,
        },
    ))
}

/// Minimizes the regularized exponential rado loss.
pub fn fit_gradient_descent<T: Real>(
    rados: &[Rado<T>],
    cfg: &GradientConfig,
) -> Result<(Classifier<T>, LossReport<T>), LearnError> {
    let d = rados.first().ok_or(LearnError::NoRados)?.dim();
    check_rados(&vec![T::zero(); d], rados)?;
    let (theta, report) = descend(
        d,
        cfg,
        |t| exp_rado_loss(t, rados, true).expect("dimensions checked"),
        |t| grad_exp_rado_loss(t, rados).expect("dimensions checked"),
    )?;
    Ok((Classifier::new(theta), report))
}

/// `log(1 + e^{−z})` without overflow.
fn softplus_neg<T: Real>(z: T) -> T {
    if z > T::zero() {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// `Σ_i log(1 + exp(−y_i θᵀx_i))`.
pub fn logistic_loss<T: Real>(theta: &[T], ds: &Dataset<T>) -> Result<T, LearnError> {
    check_dim(ds.d(), theta.len())?;
    Ok(ds
        .examples()
        .iter()
        .map(|e| softplus_neg(e.y.value::<T>() * dot(theta, &e.x)))
        .fold(T::zero(), |a, b| a + b))
}

pub fn logistic_gradient<T: Real>(theta: &[T], ds: &Dataset<T>) -> Result<Vec<T>, LearnError> {
    check_dim(ds.d(), theta.len())?;
    let mut g = vec![T::zero(); theta.len()];
    for e in ds.examples() {
        let y = e.y.value::<T>();
        let margin = y * dot(theta, &e.x);
        // d/dθ log(1 + e^{−m}) = −y x σ(−m)
        let s = T::one() / (T::one() + margin.exp());
        for (gj, &xj) in g.iter_mut().zip(&e.x) {
            *gj = *gj - y * xj * s;
        }
    }
    Ok(g)
}

/// Baseline: descent on the mean logistic loss plus `l2·‖θ‖²`.
pub fn fit_logistic<T: Real>(
    ds: &Dataset<T>,
    cfg: &GradientConfig,
    l2: f64,
) -> Result<(Classifier<T>, LossReport<T>), LearnError> {
    let m = T::from_usize(ds.m());
    let lambda = T::from_f64_lossy(l2);
    let two = T::from_usize(2);
    let (theta, report) = descend(
        ds.d(),
        cfg,
        |t| logistic_loss(t, ds).expect("dimension checked") / m + lambda * dot(t, t),
        |t| {
            logistic_gradient(t, ds)
                .expect("dimension checked")
                .into_iter()
                .zip(t)
                .map(|(g, &tj)| g / m + two * lambda * tj)
                .collect()
        },
    )?;
    Ok((Classifier::new(theta), report))
}
