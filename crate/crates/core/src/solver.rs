//! Reconstruction solvers.
//!
//! * [`fista_voxel`] / [`LassoSolver`]: accelerated iterative shrinkage for
//!   the per-voxel lasso `min 1/2 |A c - s|^2 + lambda |c|_1`.
//! * [`tv_denoise`]: Chambolle's dual projection for
//!   `min 1/2 |u - f|^2 + w TV(u)` with the causal-clique TV.
//! * [`split_bregman_reconstruct`]: alternates a voxel-parallel lasso step, a
//!   channel-parallel TV step and a Bregman residual update.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{
    apply_a, l1_norm, l2_norm, tv_field, CoefficientField, Image3, SignalField, VectorField,
};
use crate::linalg::{dot, norm2, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Weight of the coefficient l1 term.
    pub lambda: f64,
    /// Weight of the signal TV term.
    pub mu: f64,
    /// Bregman coupling.
    pub gamma: f64,
    pub max_bregman_iters: usize,
    pub inner_fista_iters: usize,
    pub inner_tv_iters: usize,
    /// Outer loop stops once the relative l2 change of `c` drops below this.
    pub rel_change_tol: f64,
    /// FISTA stops once the relative objective change drops below this.
    pub fista_rel_tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            lambda: 0.03,
            mu: 0.05,
            gamma: 0.5,
            max_bregman_iters: 20,
            inner_fista_iters: 200,
            inner_tv_iters: 100,
            rel_change_tol: 1e-4,
            fista_rel_tol: 1e-4,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.mu >= 0.0) {
            return Err(invalid("lambda and mu must be non-negative"));
        }
        if !(self.gamma > 0.0) {
            return Err(invalid("gamma must be positive"));
        }
        if self.max_bregman_iters == 0 || self.inner_fista_iters == 0 {
            return Err(invalid("iteration budgets must be positive"));
        }
        if !(self.rel_change_tol >= 0.0) || !(self.fista_rel_tol >= 0.0) {
            return Err(invalid("tolerances must be non-negative"));
        }
        Ok(())
    }
}

/// `sign(t) * max(|t| - tau, 0)`
pub fn soft_threshold(t: f64, tau: f64) -> f64 {
    if t > tau {
        t - tau
    } else if t < -tau {
        t + tau
    } else {
        0.0
    }
}

/// Largest eigenvalue of `A A^T` by power iteration.
pub fn operator_norm(a: &Matrix) -> f64 {
    let k = a.rows();
    if k == 0 || a.cols() == 0 {
        return 0.0;
    }
    // deterministic, generic start vector
    let mut x: Vec<f64> = (0..k).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let mut tmp = vec![0.0; a.cols()];
    let mut y = vec![0.0; k];
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        let nx = norm2(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        a.matvec_t_into(&x, &mut tmp);
        a.matvec_into(&tmp, &mut y);
        let next = dot(&x, &y);
        std::mem::swap(&mut x, &mut y);
        if (next - estimate).abs() <= 1e-12 * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Lipschitz safety factor applied to the power-iteration estimate.
pub const STEP_SAFETY: f64 = 1.01;

#[derive(Clone, Copy, Debug)]
pub struct FistaOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
}

/// FISTA for the lasso with a fixed matrix; reusable across voxels.
#[derive(Clone, Debug)]
pub struct LassoSolver<'a> {
    a: &'a Matrix,
    nu: f64,
}

impl<'a> LassoSolver<'a> {
    pub fn new(a: &'a Matrix) -> Self {
        let nu = (STEP_SAFETY * operator_norm(a)).max(f64::MIN_POSITIVE);
        Self { a, nu }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn objective(&self, s: &[f64], c: &[f64], lambda: f64) -> f64 {
        let r: f64 = self
            .a
            .matvec(c)
            .iter()
            .zip(s)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        0.5 * r + lambda * c.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Runs FISTA from `init` (zeros when `None`) with step `1/nu`.
    pub fn solve(&self, s: &[f64], lambda: f64, init: Option<&[f64]>, opts: FistaOptions) -> Vec<f64> {
        let (k, m) = (self.a.rows(), self.a.cols());
        let step = 1.0 / self.nu;
        let tau = lambda * step;

        let mut x = init.map_or_else(|| vec![0.0; m], <[f64]>::to_vec);
        let mut ax = self.a.matvec(&x);
        let mut y = x.clone();
        let mut ay = ax.clone();
        let mut t = 1.0f64;
        let mut resid = vec![0.0; k];
        let mut grad = vec![0.0; m];
        let mut x_new = vec![0.0; m];
        let mut ax_new = vec![0.0; k];

        let objective = |ax: &[f64], x: &[f64]| -> f64 {
            0.5 * ax.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
        };
        let mut f_old = objective(&ax, &x);

        for _ in 0..opts.max_iters {
            for ((r, a), b) in resid.iter_mut().zip(&ay).zip(s) {
                *r = a - b;
            }
            self.a.matvec_t_into(&resid, &mut grad);
            for ((xn, yi), g) in x_new.iter_mut().zip(&y).zip(&grad) {
                *xn = soft_threshold(yi - step * g, tau);
            }
            self.a.matvec_into(&x_new, &mut ax_new);

            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_new;
            // A is linear, so A y follows from A x without another product
            for i in 0..m {
                y[i] = x_new[i] + beta * (x_new[i] - x[i]);
            }
            for i in 0..k {
                ay[i] = ax_new[i] + beta * (ax_new[i] - ax[i]);
            }
            std::mem::swap(&mut x, &mut x_new);
            std::mem::swap(&mut ax, &mut ax_new);
            t = t_new;

            let f_new = objective(&ax, &x);
            let converged = (f_old - f_new).abs() <= opts.rel_tol * f_old.abs().max(f64::MIN_POSITIVE);
            f_old = f_new;
            if converged {
                break;
            }
        }
        x
    }
}

/// Relative objective change at which the standalone [`fista_voxel`] stops:
/// the objective has stagnated at floating-point resolution. Reconstructions
/// use the looser `SolverParams::fista_rel_tol` instead.
pub const FISTA_VOXEL_REL_TOL: f64 = 1e-15;

/// Per-voxel lasso from a zero start, stopping once the relative objective
/// change drops to [`FISTA_VOXEL_REL_TOL`] or after `max_iters` iterations.
pub fn fista_voxel(a: &Matrix, s: &[f64], lambda: f64, max_iters: usize) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(invalid(format!("lambda = {lambda} must be non-negative")));
    }
    if s.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "signal of length {} for a matrix with {} rows",
            s.len(),
            a.rows()
        )));
    }
    Ok(LassoSolver::new(a).solve(
        s,
        lambda,
        None,
        FistaOptions {
            max_iters,
            rel_tol: FISTA_VOXEL_REL_TOL,
        },
    ))
}

fn lasso_field(
    solver: &LassoSolver<'_>,
    s: &SignalField,
    lambda: f64,
    warm: Option<&CoefficientField>,
    opts: FistaOptions,
) -> CoefficientField {
    let m = solver.a.cols();
    VectorField::from_voxels(s.dims(), m, |r, out| {
        let c = solver.solve(s.voxel(r), lambda, warm.map(|w| w.voxel(r)), opts);
        out.copy_from_slice(&c);
    })
}

fn check_operands(a: &Matrix, s: &SignalField) -> Result<()> {
    if s.channels() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "signal field has {} channels, sensing matrix has {} rows",
            s.channels(),
            a.rows()
        )));
    }
    Ok(())
}

/// Voxel-by-voxel lasso, ignoring spatial structure.
pub fn sparse_only_reconstruct(a: &Matrix, s: &SignalField, params: &SolverParams) -> Result<CoefficientField> {
    params.validate()?;
    check_operands(a, s)?;
    let solver = LassoSolver::new(a);
    let c = lasso_field(
        &solver,
        s,
        params.lambda,
        None,
        FistaOptions {
            max_iters: params.inner_fista_iters,
            rel_tol: params.fista_rel_tol,
        },
    );
    if !c.all_finite() {
        return Err(Error::Diverged { iteration: 0 });
    }
    Ok(c)
}

/// As [`sparse_only_reconstruct`], after TV-denoising every channel with
/// weight `params.mu`.
pub fn sparse_only_reconstruct_prefiltered(
    a: &Matrix,
    s: &SignalField,
    params: &SolverParams,
) -> Result<CoefficientField> {
    let filtered = tv_denoise_field(s, params.mu, params.inner_tv_iters)?;
    sparse_only_reconstruct(a, &filtered, params)
}

/// Chambolle dual step for three difference directions.
pub const TV_DUAL_STEP: f64 = 1.0 / 8.0;

/// `argmin_u 1/2 |u - f|^2 + weight * TV(u)` by Chambolle's projection
/// iteration on the dual field `p` (one 3-vector per voxel, `|p| <= 1`),
/// with `u = f - weight * D^T p` where `D` takes causal differences.
pub fn tv_denoise(image: &Image3, weight: f64, max_iters: usize) -> Result<Image3> {
    if !(weight >= 0.0) {
        return Err(invalid(format!("TV weight {weight} must be non-negative")));
    }
    if weight == 0.0 || max_iters == 0 {
        return Ok(image.clone());
    }
    let n = image.len();
    let strides = image.strides();
    let has = |r: usize, d: usize| -> bool {
        let [ix, iy, iz] = image.coords(r);
        match d {
            0 => ix > 0,
            1 => iy > 0,
            _ => iz > 0,
        }
    };
    let mask: Vec<[bool; 3]> = (0..n).map(|r| [has(r, 0), has(r, 1), has(r, 2)]).collect();

    let f_scaled: Vec<f64> = image.data.iter().map(|v| v / weight).collect();
    let mut p = vec![[0.0f64; 3]; n];
    let mut div = vec![0.0; n];

    // D^T p: each difference u(r) - u(r - e_d) sends +p_d(r) to r and
    // -p_d(r) to r - e_d
    let adjoint = |p: &[[f64; 3]], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..n {
            for d in 0..3 {
                if mask[r][d] {
                    out[r] += p[r][d];
                    out[r - strides[d]] -= p[r][d];
                }
            }
        }
    };

    for _ in 0..max_iters {
        adjoint(&p, &mut div);
        let h: Vec<f64> = div.iter().zip(&f_scaled).map(|(a, b)| a - b).collect();
        let mut max_change = 0.0f64;
        for r in 0..n {
            let mut g = [0.0; 3];
            for d in 0..3 {
                if mask[r][d] {
                    g[d] = h[r] - h[r - strides[d]];
                }
            }
            let gnorm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            let denom = 1.0 + TV_DUAL_STEP * gnorm;
            for d in 0..3 {
                let next = (p[r][d] - TV_DUAL_STEP * g[d]) / denom;
                max_change = max_change.max((next - p[r][d]).abs());
                p[r][d] = next;
            }
        }
        if max_change < 1e-12 {
            break;
        }
    }
    adjoint(&p, &mut div);
    Ok(Image3 {
        dims: image.dims,
        data: image
            .data
            .iter()
            .zip(&div)
            .map(|(f, d)| f - weight * d)
            .collect(),
    })
}

/// Applies [`tv_denoise`] to every channel independently.
pub fn tv_denoise_field(s: &SignalField, weight: f64, max_iters: usize) -> Result<SignalField> {
    if weight == 0.0 {
        return Ok(s.clone());
    }
    let images = (0..s.channels())
        .into_par_iter()
        .map(|k| tv_denoise(&s.channel_image(k), weight, max_iters))
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_channel_images(&images)
}

/// `1/2 |A c - s|^2 + lambda |c|_1 + mu TV(A c)`
pub fn full_objective(a: &Matrix, s: &SignalField, c: &CoefficientField, lambda: f64, mu: f64) -> Result<f64> {
    let ac = apply_a(a, c)?;
    let fit = l2_norm(&ac.sub(s)?);
    let tv = if mu > 0.0 { tv_field(&ac) } else { 0.0 };
    Ok(0.5 * fit * fit + lambda * l1_norm(c) + mu * tv)
}

#[derive(Clone, Debug)]
pub struct SplitBregmanState {
    pub c: CoefficientField,
    /// Auxiliary (smoothed) signal field.
    pub u: SignalField,
    /// Accumulated Bregman residual.
    pub b: SignalField,
    pub iteration: usize,
    /// Full objective at the coefficients of each iteration.
    pub objective_trace: Vec<f64>,
    /// `|A{c} - u|` after each iteration.
    pub feasibility_trace: Vec<f64>,
    /// Relative change of `c` at each iteration.
    pub change_trace: Vec<f64>,
}

/// Sparse + TV reconstruction by split Bregman (one inner pass per cycle):
///
/// ```text
/// b = 0, u = s
/// repeat
///     d = u - b
///     c = argmin 1/2 |A{c} - d|^2 + (lambda/gamma) |c|_1     (per voxel)
///     d = (s + gamma (A{c} + b)) / (1 + gamma)
///     u = argmin 1/2 |u - d|^2 + mu/(1+gamma) TV(u)           (per channel)
///     b = b + A{c} - u
/// until c stops changing
/// ```
pub fn split_bregman_reconstruct(a: &Matrix, s: &SignalField, params: &SolverParams) -> Result<SplitBregmanState> {
    params.validate()?;
    check_operands(a, s)?;
    let solver = LassoSolver::new(a);
    let opts = FistaOptions {
        max_iters: params.inner_fista_iters,
        rel_tol: params.fista_rel_tol,
    };
    let gamma = params.gamma;
    let mut b = VectorField::zeros(s.dims(), s.channels());
    let mut u = s.clone();
    let mut c = VectorField::zeros(s.dims(), a.cols());
    let mut state_trace = Vec::new();
    let mut feas_trace = Vec::new();
    let mut change_trace = Vec::new();
    let mut iteration = 0;

    for it in 1..=params.max_bregman_iters {
        iteration = it;
        let d = u.sub(&b)?;
        let c_new = lasso_field(&solver, &d, params.lambda / gamma, Some(&c), opts);
        let ac = apply_a(a, &c_new)?;
        let d = VectorField::from_voxels(s.dims(), s.channels(), |r, out| {
            let (sv, acv, bv) = (s.voxel(r), ac.voxel(r), b.voxel(r));
            for i in 0..out.len() {
                out[i] = (sv[i] + gamma * (acv[i] + bv[i])) / (1.0 + gamma);
            }
        });
        u = tv_denoise_field(&d, params.mu / (1.0 + gamma), params.inner_tv_iters)?;
        let resid = ac.sub(&u)?;
        b = b.add(&resid)?;

        if !c_new.all_finite() || !u.all_finite() || !b.all_finite() {
            return Err(Error::Diverged { iteration: it });
        }

        let delta = l2_norm(&c_new.sub(&c)?);
        let base = l2_norm(&c);
        let change = if base > 0.0 {
            delta / base
        } else if delta == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        c = c_new;
        state_trace.push(full_objective(a, s, &c, params.lambda, params.mu)?);
        feas_trace.push(l2_norm(&resid));
        change_trace.push(change);
        log::debug!(
            "bregman {it}: objective {:.6e}, change {change:.3e}",
            state_trace[it - 1]
        );
        if change < params.rel_change_tol {
            break;
        }
    }

    Ok(SplitBregmanState {
        c,
        u,
        b,
        iteration,
        objective_trace: state_trace,
        feasibility_trace: feas_trace,
        change_trace,
    })
}
