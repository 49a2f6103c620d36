//! Vanishing-viscosity sweeps: run the time discretization over a
//! decreasing family of Sobolev weights `eps`, measure mutual distances
//! of the solutions, and estimate the limiting Young measure from pooled
//! gradient samples.

use crate::flux::FluxModel;
use crate::grid::ScalarField;
use crate::rothe::{evolve, min_steps, EvolveFailure, RotheConfig, Trajectory};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep plan: {0}")]
    BadPlan(String),
    #[error("window selects no samples")]
    EmptyWindow,
}

/// Plan for an `eps -> 0+` sweep. Per run, `gamma = eps/2` and the step
/// count is `max(m0(eps, eps/2), m_min)`, so smaller `eps` forces more
/// steps.
#[derive(Clone, Debug)]
pub struct SweepPlan {
    /// Strictly decreasing, all in (0, 1).
    pub eps_list: Vec<f64>,
    pub t_final: f64,
    /// User floor for the per-run step count.
    pub m_min: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl SweepPlan {
    pub fn new(eps_list: Vec<f64>, t_final: f64, m_min: usize) -> Result<Self, SweepError> {
        let plan = SweepPlan {
            eps_list,
            t_final,
            m_min,
            newton_tol: 1e-10,
            newton_max_iter: 50,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.eps_list.is_empty() {
            return Err(SweepError::BadPlan("empty eps list".into()));
        }
        for w in self.eps_list.windows(2) {
            if !(w[1] < w[0]) {
                return Err(SweepError::BadPlan(format!(
                    "eps list not strictly decreasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if self
            .eps_list
            .iter()
            .any(|e| !(*e > 0.0 && *e < 1.0))
        {
            return Err(SweepError::BadPlan("eps values must lie in (0,1)".into()));
        }
        if !(self.t_final > 0.0) {
            return Err(SweepError::BadPlan(format!("T = {}", self.t_final)));
        }
        Ok(())
    }

    /// Step count used for a given `eps`.
    pub fn steps_for(&self, eps: f64, k_defect: f64) -> usize {
        min_steps(k_defect, self.t_final, eps, eps / 2.0).max(self.m_min)
    }

    fn config_for(&self, eps: f64, k_defect: f64) -> RotheConfig {
        RotheConfig {
            t_final: self.t_final,
            m: self.steps_for(eps, k_defect),
            epsilon: eps,
            gamma: eps / 2.0,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
        }
    }
}

/// Result of one per-`eps` run.
#[derive(Debug)]
pub struct SweepRun {
    pub epsilon: f64,
    pub m: usize,
    pub outcome: Result<Trajectory, Box<EvolveFailure>>,
}

/// All runs of a sweep, ordered by decreasing `eps`.
#[derive(Debug)]
pub struct SweepOutcome {
    pub runs: Vec<SweepRun>,
}

impl SweepOutcome {
    /// Converged trajectories in eps-decreasing order.
    pub fn trajectories(&self) -> Vec<&Trajectory> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .collect()
    }

    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.outcome.is_ok())
    }
}

/// Run one trajectory per `eps`; a failed run is recorded and the
/// remaining values still execute.
pub fn sweep(f: &ScalarField, plan: &SweepPlan, model: &FluxModel) -> SweepOutcome {
    plan.validate().expect("invalid sweep plan");
    let k = model.monotonicity_defect();
    let runs = plan
        .eps_list
        .iter()
        .map(|&eps| {
            let cfg = plan.config_for(eps, k);
            SweepRun {
                epsilon: eps,
                m: cfg.m,
                outcome: evolve(f, &cfg, model),
            }
        })
        .collect();
    SweepOutcome { runs }
}

/// Number of interpolant samples used by [`pairwise_distance`].
pub const DISTANCE_TIME_SAMPLES: usize = 65;

/// Symmetric matrix of discrete `C([0,T]; L^2)` proxies: max over sampled
/// times of the L2 distance between the piecewise-linear interpolants.
pub fn pairwise_distance(trajs: &[&Trajectory]) -> Vec<Vec<f64>> {
    let n = trajs.len();
    if n == 0 {
        return Vec::new();
    }
    let grid = trajs[0].grid();
    let tf = trajs[0].config().t_final;
    for t in trajs {
        assert_eq!(t.grid(), grid, "pairwise_distance: mismatched grids");
        assert_eq!(
            t.config().t_final,
            tf,
            "pairwise_distance: mismatched final times"
        );
    }
    let mut mat = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let mut d = 0.0f64;
            for k in 0..DISTANCE_TIME_SAMPLES {
                let t = tf * k as f64 / (DISTANCE_TIME_SAMPLES - 1) as f64;
                let (ua, _) = trajs[a].interpolants(t).unwrap();
                let (ub, _) = trajs[b].interpolants(t).unwrap();
                d = d.max(ua.sub(&ub).norm_l2());
            }
            mat[a][b] = d;
            mat[b][a] = d;
        }
    }
    mat
}

/// Space-time window for gradient pooling. The second spatial axis is
/// ignored on 1D grids.
#[derive(Clone, Copy, Debug)]
pub struct Window {
    pub x_min: [f64; 2],
    pub x_max: [f64; 2],
    pub t_min: f64,
    pub t_max: f64,
}

impl Window {
    /// 1D window `[x0, x1] x [t0, t1]`.
    pub fn span_1d(x0: f64, x1: f64, t0: f64, t1: f64) -> Self {
        Window {
            x_min: [x0, f64::NEG_INFINITY],
            x_max: [x1, f64::INFINITY],
            t_min: t0,
            t_max: t1,
        }
    }
}

/// Number of histogram bins per gradient component.
pub const HISTOGRAM_BINS: usize = 64;

/// Empirical Young-measure estimate: per-component histogram of gradient
/// samples pooled over a space-time window and a family of trajectories.
/// Mass is normalized to 1; `first_moment` is the count-weighted
/// bin-center average.
#[derive(Clone, Debug)]
pub struct GradientHistogram {
    pub window: Window,
    /// Per component: `HISTOGRAM_BINS + 1` edges spanning
    /// `[-1.05*max|sample|, +1.05*max|sample|]`.
    pub bin_edges: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
    pub first_moment: Vec<f64>,
}

impl GradientHistogram {
    pub fn bin_center(&self, component: usize, bin: usize) -> f64 {
        0.5 * (self.bin_edges[component][bin] + self.bin_edges[component][bin + 1])
    }

    /// Count-weighted standard deviation of a component.
    pub fn std_dev(&self, component: usize) -> f64 {
        let fm = self.first_moment[component];
        let mut acc = 0.0;
        for (b, c) in self.counts[component].iter().enumerate() {
            let d = self.bin_center(component, b) - fm;
            acc += *c as f64 * d * d;
        }
        (acc / self.total as f64).sqrt()
    }

    /// Normalized mass per bin (sums to 1 per component).
    pub fn mass(&self, component: usize, bin: usize) -> f64 {
        self.counts[component][bin] as f64 / self.total as f64
    }
}

/// Gradient edge samples of iterate `u^j` (j >= 1, the iterates the
/// piecewise-constant interpolant takes) whose step time and edge
/// midpoint fall inside the window.
fn window_samples(traj: &Trajectory, window: &Window) -> Vec<Vec<f64>> {
    let grid = traj.grid();
    let [nx, ny] = grid.shape();
    let h = grid.h();
    let dim = grid.dim();
    let mut per_component: Vec<Vec<f64>> = vec![Vec::new(); dim];
    for j in 1..traj.steps().len() {
        let t = traj.step_time(j);
        if t < window.t_min || t > window.t_max {
            continue;
        }
        let g = traj.steps()[j].gradient();
        for jj in 0..ny {
            let y = jj as f64 * h;
            if dim == 2 && (y < window.x_min[1] || y > window.x_max[1]) {
                continue;
            }
            for i in 0..nx - 1 {
                let x = (i as f64 + 0.5) * h;
                if x < window.x_min[0] || x > window.x_max[0] {
                    continue;
                }
                per_component[0].push(g.axis(0)[jj * (nx - 1) + i]);
            }
        }
        if dim == 2 {
            for jj in 0..ny - 1 {
                let y = (jj as f64 + 0.5) * h;
                if y < window.x_min[1] || y > window.x_max[1] {
                    continue;
                }
                for i in 0..nx {
                    let x = i as f64 * h;
                    if x < window.x_min[0] || x > window.x_max[0] {
                        continue;
                    }
                    per_component[1].push(g.axis(1)[jj * nx + i]);
                }
            }
        }
    }
    per_component
}

/// Pool gradient samples from every trajectory of the family over the
/// window and bin them.
pub fn young_measure(
    trajs: &[&Trajectory],
    window: &Window,
) -> Result<GradientHistogram, SweepError> {
    if trajs.is_empty() {
        return Err(SweepError::EmptyWindow);
    }
    let dim = trajs[0].grid().dim();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); dim];
    for t in trajs {
        let mut s = window_samples(t, window);
        for (acc, comp) in samples.iter_mut().zip(s.iter_mut()) {
            acc.append(comp);
        }
    }
    if samples[0].is_empty() {
        return Err(SweepError::EmptyWindow);
    }
    let total = samples[0].len() as u64;
    let mut bin_edges = Vec::with_capacity(dim);
    let mut counts = Vec::with_capacity(dim);
    let mut first_moment = Vec::with_capacity(dim);
    for comp in &samples {
        let maxabs = comp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let span = (1.05 * maxabs).max(1e-12);
        let edges: Vec<f64> = (0..=HISTOGRAM_BINS)
            .map(|b| -span + 2.0 * span * b as f64 / HISTOGRAM_BINS as f64)
            .collect();
        let mut c = vec![0u64; HISTOGRAM_BINS];
        for v in comp {
            let rel = (v + span) / (2.0 * span) * HISTOGRAM_BINS as f64;
            let idx = (rel.floor() as usize).min(HISTOGRAM_BINS - 1);
            c[idx] += 1;
        }
        let fm: f64 = c
            .iter()
            .enumerate()
            .map(|(b, cnt)| {
                let center = 0.5 * (edges[b] + edges[b + 1]);
                *cnt as f64 * center
            })
            .sum::<f64>()
            / total as f64;
        bin_edges.push(edges);
        counts.push(c);
        first_moment.push(fm);
    }
    Ok(GradientHistogram {
        window: *window,
        bin_edges,
        counts,
        total,
        first_moment,
    })
}

/// Window-averaged gradient of a single trajectory (used as the
/// barycenter reference with the finest-`eps` run).
pub fn window_average_gradient(
    traj: &Trajectory,
    window: &Window,
) -> Result<Vec<f64>, SweepError> {
    let samples = window_samples(traj, window);
    if samples[0].is_empty() {
        return Err(SweepError::EmptyWindow);
    }
    Ok(samples
        .iter()
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect())
}

/// Barycenter discrepancy `|first_moment - grad_u|` (Euclidean over
/// components).
pub fn barycenter_check(hist: &GradientHistogram, grad_u: &[f64]) -> f64 {
    assert_eq!(hist.first_moment.len(), grad_u.len(), "component count");
    hist.first_moment
        .iter()
        .zip(grad_u)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
