//! Quantitative certificates for a computed trajectory: the discrete
//! energy inequality, weak-form residuals of the mixed interpolant
//! formulation, and the staircasing/microramping metrics.

use crate::grid::{kahan_sum, Grid, ScalarField};
use crate::io::write_csv;
use crate::rothe::Trajectory;

/// One row of the energy trace at iterate `j`.
#[derive(Clone, Copy, Debug)]
pub struct EnergyRow {
    pub step: usize,
    pub t: f64,
    /// `E(u^j) = sum_e h^d phi(p_e, grad u^j)`.
    pub energy: f64,
    /// `sum_{i<=j} (m/T) |u^i - u^{i-1}|^2`.
    pub cum_l2: f64,
    /// `sum_{i<=j} (eps - gamma) (m/T) |grad u^i - grad u^{i-1}|^2`.
    pub cum_h1: f64,
    pub mean: f64,
    /// `E(f) - [E(u^j) + cum_l2 + cum_h1]`; nonnegative (up to solver
    /// tolerance) whenever `m >= m0`.
    pub margin: f64,
}

/// Energy trace over all iterates, row 0 included.
#[derive(Clone, Debug)]
pub struct EnergyTrace {
    pub rows: Vec<EnergyRow>,
}

impl EnergyTrace {
    /// Smallest inequality margin over all steps.
    pub fn min_margin(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.margin)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|mean(u^j) - mean(f)|` over all steps.
    pub fn max_mean_drift(&self) -> f64 {
        let m0 = self.rows[0].mean;
        self.rows
            .iter()
            .map(|r| (r.mean - m0).abs())
            .fold(0.0, f64::max)
    }

    pub fn initial_energy(&self) -> f64 {
        self.rows[0].energy
    }

    pub fn final_energy(&self) -> f64 {
        self.rows.last().unwrap().energy
    }

    /// CSV with schema `step,t,energy,cum_l2,cum_h1,mean,margin`.
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.step as f64,
                    r.t,
                    r.energy,
                    r.cum_l2,
                    r.cum_h1,
                    r.mean,
                    r.margin,
                ]
            })
            .collect();
        write_csv(
            &["step", "t", "energy", "cum_l2", "cum_h1", "mean", "margin"],
            &rows,
        )
    }
}

/// Evaluate the energy trace of a trajectory against the discrete energy
/// inequality with the trajectory's own `(eps, gamma)`.
pub fn energy_trace(traj: &Trajectory) -> EnergyTrace {
    let cfg = traj.config();
    let model = traj.model();
    let rate = cfg.rate();
    let coef_h1 = (cfg.epsilon - cfg.gamma) * rate;
    let e0 = model.energy(traj.initial());
    let mut rows = Vec::with_capacity(traj.steps().len());
    rows.push(EnergyRow {
        step: 0,
        t: 0.0,
        energy: e0,
        cum_l2: 0.0,
        cum_h1: 0.0,
        mean: traj.initial().mean(),
        margin: 0.0,
    });
    let mut cum_l2 = 0.0;
    let mut cum_h1 = 0.0;
    for j in 1..traj.steps().len() {
        let u = &traj.steps()[j];
        let d = u.sub(&traj.steps()[j - 1]);
        let gd = d.gradient();
        cum_l2 += rate * d.inner(&d);
        cum_h1 += coef_h1 * gd.inner(&gd);
        let energy = model.energy(u);
        rows.push(EnergyRow {
            step: j,
            t: traj.step_time(j),
            energy,
            cum_l2,
            cum_h1,
            mean: u.mean(),
            margin: e0 - (energy + cum_l2 + cum_h1),
        });
    }
    EnergyTrace { rows }
}

/// A separable space-time test function `zeta(x) * eta(t)`.
pub struct WeakTest {
    pub field: ScalarField,
    pub profile: Box<dyn Fn(f64) -> f64>,
}

impl WeakTest {
    /// Time-independent test (`eta = 1`).
    pub fn steady(field: ScalarField) -> Self {
        WeakTest {
            field,
            profile: Box::new(|_| 1.0),
        }
    }
}

/// Max absolute residual of the mixed weak formulation
/// `|iint du_m/dt zeta + q(x, grad ubar_m).grad zeta
///   + eps grad(du_m/dt).grad zeta|`
/// over the test set: piecewise-linear interpolant in the time-derivative
/// terms, piecewise-constant in the flux term, time integrals by midpoint
/// per step interval (exact for the per-interval-constant factors).
pub fn weak_residual(traj: &Trajectory, tests: &[WeakTest]) -> f64 {
    let cfg = traj.config();
    let model = traj.model();
    let rate = cfg.rate();
    let dt = cfg.t_final / cfg.m as f64;
    let mut worst = 0.0f64;
    for test in tests {
        let zeta = &test.field;
        let gz = zeta.gradient();
        let mut terms = Vec::with_capacity(cfg.m);
        for j in 1..traj.steps().len() {
            let u = &traj.steps()[j];
            let d = u.sub(&traj.steps()[j - 1]);
            // <du/dt, zeta> + <q(grad ubar), grad zeta> + eps <grad du/dt, grad zeta>
            let bracket = rate * d.inner(zeta)
                + model.edge_flux(&u.gradient()).inner(&gz)
                + cfg.epsilon * rate * d.gradient().inner(&gz);
            let t_mid = (j as f64 - 0.5) * dt;
            terms.push(dt * (test.profile)(t_mid) * bracket);
        }
        worst = worst.max(kahan_sum(terms).abs());
    }
    worst
}

/// Total mean drift in quadrature units: `|mean(u^m) - mean(f)| * |Omega|`.
/// Coincides with the weak residual of the constant test `zeta = 1`.
pub fn mean_drift_measure(traj: &Trajectory) -> f64 {
    (traj.final_state().mean() - traj.initial().mean()).abs() * traj.grid().volume()
}

/// Staircasing metrics of a single field.
#[derive(Clone, Copy, Debug, Default)]
pub struct StaircaseReport {
    /// Sign changes of the discrete gradient, with a dead-band
    /// `|g| <= 1e-6 * max|g|` treated as zero. 2D fields are analyzed
    /// per line along both axes and the counts summed.
    pub sign_change_count: usize,
    pub max_abs_gradient: f64,
    /// Width of the value interval containing the local maxima of `|g|`.
    pub gradient_range_width: f64,
}

pub fn staircase_report(u: &ScalarField, grid: Grid) -> StaircaseReport {
    assert_eq!(u.grid(), grid, "field grid mismatch");
    let g = u.gradient();
    let [nx, ny] = grid.shape();

    let max_abs = g
        .axis(0)
        .iter()
        .chain(g.axis(1))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let dead = 1e-6 * max_abs;

    let mut count = 0usize;
    let mut peaks: Vec<f64> = Vec::new();
    // axis-0 lines
    for j in 0..ny {
        let line: Vec<f64> = (0..nx - 1).map(|i| g.axis(0)[j * (nx - 1) + i]).collect();
        count += line_sign_changes(&line, dead);
        collect_local_maxima(&line, &mut peaks);
    }
    // axis-1 lines (2D only)
    if grid.dim() == 2 {
        for i in 0..nx {
            let line: Vec<f64> = (0..ny - 1).map(|j| g.axis(1)[j * nx + i]).collect();
            count += line_sign_changes(&line, dead);
            collect_local_maxima(&line, &mut peaks);
        }
    }

    let width = if peaks.is_empty() {
        0.0
    } else {
        let hi = peaks.iter().cloned().fold(f64::MIN, f64::max);
        let lo = peaks.iter().cloned().fold(f64::MAX, f64::min);
        hi - lo
    };
    StaircaseReport {
        sign_change_count: count,
        max_abs_gradient: max_abs,
        gradient_range_width: width,
    }
}

fn line_sign_changes(g: &[f64], dead: f64) -> usize {
    let mut count = 0;
    let mut last = 0i8;
    for v in g {
        let s = if v.abs() <= dead {
            0
        } else if *v > 0.0 {
            1
        } else {
            -1
        };
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    count
}

/// Local maxima of `|g|` (non-strict against both neighbors, endpoints
/// compared one-sided).
fn collect_local_maxima(g: &[f64], out: &mut Vec<f64>) {
    let n = g.len();
    for i in 0..n {
        let v = g[i].abs();
        let left_ok = i == 0 || v >= g[i - 1].abs();
        let right_ok = i + 1 == n || v >= g[i + 1].abs();
        if left_ok && right_ok {
            out.push(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::ExponentField;
    use crate::flux::FluxModel;
    use crate::io::{gen_signal, SignalKind};
    use crate::rothe::{evolve, RotheConfig};

    fn tiny_run() -> Trajectory {
        let f = gen_signal(SignalKind::Sine, 17, 0.5, 0.02, 3);
        let g = f.grid();
        let model =
            FluxModel::new(0.001, ExponentField::constant(2.0, g).unwrap()).unwrap();
        let cfg = RotheConfig::new(0.5, 8, 0.2, 0.1).unwrap();
        evolve(&f, &cfg, &model).unwrap()
    }

    #[test]
    fn trace_constant_initial_data() {
        let g = Grid::line(9, 0.125);
        let model =
            FluxModel::new(0.001, ExponentField::constant(2.0, g).unwrap()).unwrap();
        let cfg = RotheConfig::new(1.0, 4, 0.2, 0.1).unwrap();
        let f = ScalarField::constant(g, 0.5);
        let traj = evolve(&f, &cfg, &model).unwrap();
        let trace = energy_trace(&traj);
        for r in &trace.rows {
            assert_eq!(r.energy, 0.0);
            assert_eq!(r.margin, 0.0);
        }
    }

    #[test]
    fn trace_margins_and_monotone_energy() {
        let traj = tiny_run();
        let trace = energy_trace(&traj);
        let e0 = trace.initial_energy();
        assert!(trace.min_margin() >= -1e-8 * (1.0 + e0));
        for w in trace.rows.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-8 * (1.0 + e0));
            assert!(w[1].t > w[0].t);
            assert!(w[1].cum_l2 >= w[0].cum_l2);
            assert!(w[1].cum_h1 >= w[0].cum_h1);
        }
        assert!(trace.final_energy() <= e0);
    }

    #[test]
    fn weak_residual_constant_test_is_mean_drift() {
        let traj = tiny_run();
        let one = ScalarField::constant(traj.grid(), 1.0);
        let res = weak_residual(&traj, &[WeakTest::steady(one)]);
        let drift = mean_drift_measure(&traj);
        assert!((res - drift).abs() <= 1e-12, "{res} vs {drift}");
        assert!(res <= 1e-8);
    }

    #[test]
    fn weak_residual_random_separable_tests() {
        let traj = tiny_run();
        let g = traj.grid();
        let mut rng = crate::io::Rng::new(17);
        let tests: Vec<WeakTest> = (0..5)
            .map(|k| {
                let vals: Vec<f64> = (0..g.node_count())
                    .map(|_| rng.uniform() * 2.0 - 1.0)
                    .collect();
                let w = 0.5 + k as f64;
                WeakTest {
                    field: ScalarField::from_values(g, vals),
                    profile: Box::new(move |t: f64| (w * t).cos()),
                }
            })
            .collect();
        let res = weak_residual(&traj, &tests);
        assert!(res <= 1e-6, "weak residual {res}");
    }

    #[test]
    fn staircase_monotone_ramp() {
        let g = Grid::line(9, 0.125);
        let u = ScalarField::from_values(g, (0..9).map(|i| i as f64).collect());
        let rep = staircase_report(&u, g);
        assert_eq!(rep.sign_change_count, 0);
        assert_eq!(rep.gradient_range_width, 0.0);
    }

    #[test]
    fn staircase_sawtooth_hand_count() {
        // 4 teeth -> 8 monotone segments -> 7 sign changes
        let f = gen_signal(SignalKind::Sawtooth, 65, 1.0, 0.0, 0);
        let rep = staircase_report(&f, f.grid());
        assert_eq!(rep.sign_change_count, 7);
    }

    #[test]
    fn staircase_invariances() {
        let f = gen_signal(SignalKind::Sine, 33, 1.0, 0.05, 11);
        let g = f.grid();
        let base = staircase_report(&f, g);
        let shifted = ScalarField::from_values(
            g,
            f.values().iter().map(|v| v + 5.0).collect(),
        );
        let negated = ScalarField::from_values(g, f.values().iter().map(|v| -v).collect());
        assert_eq!(
            staircase_report(&shifted, g).sign_change_count,
            base.sign_change_count
        );
        assert_eq!(
            staircase_report(&negated, g).sign_change_count,
            base.sign_change_count
        );
    }

    #[test]
    fn staircase_2d_per_line() {
        let g = Grid::rect(4, 3, 1.0);
        // rows: ramp up / down / up
        let mut v = Vec::new();
        for j in 0..3 {
            for i in 0..4 {
                let x = i as f64;
                v.push(if j == 1 { -x } else { x });
            }
        }
        let u = ScalarField::from_values(g, v);
        let rep = staircase_report(&u, g);
        // no sign change within any row; columns alternate +-+ -> 2 changes each
        assert_eq!(rep.sign_change_count, 4 * 2);
    }

    #[test]
    fn trace_csv_roundtrip_shape() {
        let traj = tiny_run();
        let trace = energy_trace(&traj);
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.trim_end().split('\n').collect();
        assert_eq!(lines.len(), trace.rows.len() + 1);
        assert_eq!(lines[0], "step,t,energy,cum_l2,cum_h1,mean,margin");
    }
}
