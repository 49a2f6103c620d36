//! Variational time discretization: each step minimizes
//!
//! `J(u) = sum_e h^d phi(p_e, grad u) + (m/2T) |u - u_prev|^2
//!         + eps (m/2T) |grad u - grad u_prev|^2`
//!
//! over node values, by damped Newton on the Euler-Lagrange residual
//!
//! `R(u) = (m/T)(u - u_prev) - div q(x, grad u) - eps (m/T) div grad (u - u_prev)`.
//!
//! The quadratic coupling terms make the step functional convex whenever
//! `m >= K*T/eps` (K the monotonicity defect of the flux), so the Newton
//! systems are symmetric positive definite there and conjugate gradients
//! applies; below the threshold we fall back to steepest descent when CG
//! detects indefiniteness.

use crate::flux::FluxModel;
use crate::grid::{EdgeField, Grid, ScalarField};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RotheError {
    #[error("invalid Rothe configuration: {0}")]
    BadConfig(String),
    #[error("Newton stalled after {iterations} iterations (residual {residual_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        residual_norm: f64,
        /// Last iterate, so callers can inspect or retry from it.
        last: ScalarField,
    },
    #[error("time {t} outside [0, {t_final}]")]
    TimeOutOfRange { t: f64, t_final: f64 },
}

/// Time-discretization parameters for one evolution.
#[derive(Clone, Copy, Debug)]
pub struct RotheConfig {
    /// Final time `T`.
    pub t_final: f64,
    /// Number of time steps `m`.
    pub m: usize,
    /// Sobolev regularization weight `eps` in (0, 1).
    pub epsilon: f64,
    /// Energy-inequality parameter `gamma` in (0, eps).
    pub gamma: f64,
    /// Infinity-norm residual tolerance for the per-step Newton solve.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl RotheConfig {
    pub fn new(t_final: f64, m: usize, epsilon: f64, gamma: f64) -> Result<Self, RotheError> {
        let cfg = RotheConfig {
            t_final,
            m,
            epsilon,
            gamma,
            newton_tol: 1e-10,
            newton_max_iter: 50,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RotheError> {
        if !(self.t_final > 0.0) {
            return Err(RotheError::BadConfig(format!("T = {}", self.t_final)));
        }
        if self.m < 1 {
            return Err(RotheError::BadConfig("m = 0".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(RotheError::BadConfig(format!(
                "epsilon = {} not in (0,1)",
                self.epsilon
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < self.epsilon) {
            return Err(RotheError::BadConfig(format!(
                "gamma = {} not in (0, epsilon)",
                self.gamma
            )));
        }
        if !(self.newton_tol > 0.0) {
            return Err(RotheError::BadConfig(format!(
                "newton_tol = {}",
                self.newton_tol
            )));
        }
        Ok(())
    }

    /// `m/T`.
    pub fn rate(&self) -> f64 {
        self.m as f64 / self.t_final
    }

    /// True when the per-step functional is provably convex (`m >= K T / eps`).
    pub fn meets_convexity_threshold(&self, k_defect: f64) -> bool {
        self.m as f64 >= k_defect * self.t_final / self.epsilon
    }

    /// True when the discrete energy inequality is guaranteed (`m >= m0`).
    pub fn meets_energy_threshold(&self, k_defect: f64) -> bool {
        self.m >= min_steps(k_defect, self.t_final, self.epsilon, self.gamma)
    }
}

/// Step-count threshold `m0 = ceil(max{K T / (2 gamma), K T / eps})` above
/// which the per-step convexity and the discrete energy inequality hold.
pub fn min_steps(k_defect: f64, t_final: f64, epsilon: f64, gamma: f64) -> usize {
    assert!(k_defect > 0.0 && t_final > 0.0 && epsilon > 0.0 && gamma > 0.0);
    assert!(gamma < epsilon, "gamma must be below epsilon");
    let kt = k_defect * t_final;
    (kt / (2.0 * gamma)).max(kt / epsilon).ceil() as usize
}

/// Outcome of one converged variational step.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub u: ScalarField,
    pub iterations: usize,
    pub residual_norm: f64,
    /// Potential energy `sum_e h^d phi(p_e, grad u)` of the minimizer.
    pub energy: f64,
}

/// Per-step solver statistics kept alongside the trajectory.
#[derive(Clone, Copy, Debug)]
pub struct StepStats {
    pub iterations: usize,
    pub residual_norm: f64,
    pub energy: f64,
    /// `|mean(u^j) - mean(f)|`.
    pub mean_drift: f64,
}

/// The Rothe iterates `u^0 = f, u^1, ..., u^m` plus everything needed to
/// evaluate both time interpolants.
#[derive(Clone, Debug)]
pub struct Trajectory {
    steps: Vec<ScalarField>,
    stats: Vec<StepStats>,
    config: RotheConfig,
    model: FluxModel,
}

impl Trajectory {
    pub fn steps(&self) -> &[ScalarField] {
        &self.steps
    }

    pub fn stats(&self) -> &[StepStats] {
        &self.stats
    }

    pub fn config(&self) -> &RotheConfig {
        &self.config
    }

    pub fn model(&self) -> &FluxModel {
        &self.model
    }

    pub fn grid(&self) -> Grid {
        self.model.grid()
    }

    pub fn initial(&self) -> &ScalarField {
        &self.steps[0]
    }

    pub fn final_state(&self) -> &ScalarField {
        self.steps.last().unwrap()
    }

    /// Time of iterate `j`, i.e. `j*T/m`.
    pub fn step_time(&self, j: usize) -> f64 {
        j as f64 * self.config.t_final / self.config.m as f64
    }

    /// Piecewise-linear and piecewise-constant interpolants at time `t`:
    /// on `[(j-1)T/m, jT/m)` the first is
    /// `u^{j-1} + lambda (u^j - u^{j-1})` with `lambda = (m/T)t - (j-1)`,
    /// the second is `u^j`; at `t = T` both return `u^m`.
    pub fn interpolants(&self, t: f64) -> Result<(ScalarField, ScalarField), RotheError> {
        let tf = self.config.t_final;
        if !(0.0..=tf).contains(&t) {
            return Err(RotheError::TimeOutOfRange { t, t_final: tf });
        }
        let m = self.config.m;
        if t >= tf {
            let last = self.steps[m].clone();
            return Ok((last.clone(), last));
        }
        let s = self.config.rate() * t; // in [0, m)
        let j = (s.floor() as usize).min(m - 1) + 1; // interval index, 1-based
        let lambda = s - (j - 1) as f64;
        let linear = self.steps[j - 1].axpy(lambda, &self.steps[j].sub(&self.steps[j - 1]));
        Ok((linear, self.steps[j].clone()))
    }
}

/// Discrete step functional `J(u)`; equals the potential energy of `u_prev`
/// when `u = u_prev`.
pub fn step_functional(
    u: &ScalarField,
    u_prev: &ScalarField,
    cfg: &RotheConfig,
    model: &FluxModel,
) -> f64 {
    let half_rate = 0.5 * cfg.rate();
    let d = u.sub(u_prev);
    let gd = d.gradient();
    model.energy(u) + half_rate * d.inner(&d) + cfg.epsilon * half_rate * gd.inner(&gd)
}

/// Euler-Lagrange residual `R(u)`; `h^d * R` is the exact gradient of
/// [`step_functional`] with respect to the node values.
pub fn step_gradient(
    u: &ScalarField,
    u_prev: &ScalarField,
    cfg: &RotheConfig,
    model: &FluxModel,
) -> ScalarField {
    let rate = cfg.rate();
    let d = u.sub(u_prev);
    let q = model.edge_flux(&u.gradient());
    let visc = d.gradient();
    // R = rate*d - div q - eps*rate*div grad d
    let div_q = q.divergence();
    let div_visc = visc.divergence();
    let mut out = d.scaled(rate);
    for ((o, a), b) in out
        .values_mut()
        .iter_mut()
        .zip(div_q.values())
        .zip(div_visc.values())
    {
        *o -= a + cfg.epsilon * rate * b;
    }
    out
}

/// `H v = rate*v - div(w grad v)` with combined edge weights
/// `w_e = q'(g_e) + eps*rate`; SPD whenever all weights are >= -rate*h^2/4...
/// in practice whenever `m >= K T / eps`.
fn hessian_matvec(v: &ScalarField, weights: &EdgeField, rate: f64) -> ScalarField {
    let gv = v.gradient();
    let mut wg = gv;
    for a in 0..2 {
        for (x, w) in wg.axis_mut(a).iter_mut().zip(weights.axis(a)) {
            *x *= w;
        }
    }
    let div = wg.divergence();
    let mut out = v.scaled(rate);
    for (o, d) in out.values_mut().iter_mut().zip(div.values()) {
        *o -= d;
    }
    out
}

fn dot(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

/// Unpreconditioned CG for `H x = b`; returns the iterate and whether an
/// indefinite direction was encountered.
fn cg_solve(
    b: &ScalarField,
    weights: &EdgeField,
    rate: f64,
    rel_tol: f64,
    max_iter: usize,
) -> (ScalarField, bool) {
    let grid = b.grid();
    let mut x = ScalarField::zeros(grid);
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return (x, false);
    }
    let tol = rel_tol * bnorm;
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    for _ in 0..max_iter {
        let ap = hessian_matvec(&p, weights, rate);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return (x, true);
        }
        let alpha = rs / pap;
        x = x.axpy(alpha, &p);
        r = r.axpy(-alpha, &ap);
        let rs_new = dot(&r, &r);
        if rs_new.sqrt() <= tol {
            break;
        }
        p = r.axpy(rs_new / rs, &p); // p = r + beta p
        rs = rs_new;
    }
    (x, false)
}

/// One variational step: minimize the step functional starting from
/// `u_prev`. Damped Newton with backtracking on the residual merit
/// `|R|^2` (factor 0.5, at most 30 halvings), steepest-descent fallback.
pub fn solve_step(
    u_prev: &ScalarField,
    cfg: &RotheConfig,
    model: &FluxModel,
) -> Result<StepResult, RotheError> {
    assert_eq!(u_prev.grid(), model.grid(), "field/model grid mismatch");
    let rate = cfg.rate();
    let eps_rate = cfg.epsilon * rate;
    let n = u_prev.len();

    let mut u = u_prev.clone();
    let mut r = step_gradient(&u, u_prev, cfg, model);
    let mut rinf = r.norm_inf();
    if rinf <= cfg.newton_tol {
        return Ok(StepResult {
            energy: model.energy(&u),
            u,
            iterations: 0,
            residual_norm: rinf,
        });
    }

    let mut iterations = 0;
    while iterations < cfg.newton_max_iter {
        // Newton system at the current iterate
        let mut weights = model.edge_flux_slope(&u.gradient());
        for a in 0..2 {
            for w in weights.axis_mut(a).iter_mut() {
                *w += eps_rate;
            }
        }
        let b = r.scaled(-1.0);
        let forcing = rinf.min(0.1).max(1e-13);
        let (mut dir, indefinite) = cg_solve(&b, &weights, rate, forcing, 20 * n);
        if indefinite && dot(&dir, &b) <= 0.0 {
            dir = b.clone();
        }

        let mut accepted = false;
        for trial in [&dir, &b] {
            let rnorm2 = dot(&r, &r);
            let mut alpha = 1.0;
            for _ in 0..30 {
                let u_try = u.axpy(alpha, trial);
                let r_try = step_gradient(&u_try, u_prev, cfg, model);
                if dot(&r_try, &r_try) <= (1.0 - 1e-4 * alpha).powi(2) * rnorm2 {
                    u = u_try;
                    r = r_try;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Err(RotheError::NonConvergence {
                iterations,
                residual_norm: rinf,
                last: u,
            });
        }

        iterations += 1;
        rinf = r.norm_inf();
        if rinf <= cfg.newton_tol {
            return Ok(StepResult {
                energy: model.energy(&u),
                u,
                iterations,
                residual_norm: rinf,
            });
        }
    }
    Err(RotheError::NonConvergence {
        iterations,
        residual_norm: rinf,
        last: u,
    })
}

/// Evolution failure carrying the completed part of the trajectory.
#[derive(Debug, Error)]
#[error("step {failed_step} of {total_steps} failed: {source}")]
pub struct EvolveFailure {
    pub failed_step: usize,
    pub total_steps: usize,
    pub partial: Trajectory,
    #[source]
    pub source: RotheError,
}

/// Run the full time discretization from `u^0 = f`.
pub fn evolve(
    f: &ScalarField,
    cfg: &RotheConfig,
    model: &FluxModel,
) -> Result<Trajectory, Box<EvolveFailure>> {
    cfg.validate().map_err(|e| {
        Box::new(EvolveFailure {
            failed_step: 0,
            total_steps: cfg.m,
            partial: Trajectory {
                steps: vec![f.clone()],
                stats: vec![],
                config: *cfg,
                model: model.clone(),
            },
            source: e,
        })
    })?;
    let mean0 = f.mean();
    let mut steps = Vec::with_capacity(cfg.m + 1);
    let mut stats = Vec::with_capacity(cfg.m);
    steps.push(f.clone());
    for j in 1..=cfg.m {
        match solve_step(&steps[j - 1], cfg, model) {
            Ok(res) => {
                stats.push(StepStats {
                    iterations: res.iterations,
                    residual_norm: res.residual_norm,
                    energy: res.energy,
                    mean_drift: (res.u.mean() - mean0).abs(),
                });
                steps.push(res.u);
            }
            Err(e) => {
                return Err(Box::new(EvolveFailure {
                    failed_step: j,
                    total_steps: cfg.m,
                    partial: Trajectory {
                        steps,
                        stats,
                        config: *cfg,
                        model: model.clone(),
                    },
                    source: e,
                }));
            }
        }
    }
    Ok(Trajectory {
        steps,
        stats,
        config: *cfg,
        model: model.clone(),
    })
}
