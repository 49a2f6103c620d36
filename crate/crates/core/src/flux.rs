//! Heat flux `q(x,xi)`, its potential `phi(x,xi)`, derivatives, and the
//! structure constants of the growth and monotonicity-defect conditions.
//!
//! The flux is
//! `q(x,xi) = xi/(1+|xi|^2) + delta*|xi|^{p(x)-2}*xi`,
//! the gradient of
//! `phi(x,xi) = (1/2)*log(1+|xi|^2) + (delta/p(x))*|xi|^{p(x)}`.
//! The first summand is the Perona-Malik part, forward-parabolic for
//! `|xi| < 1` and backward beyond; the p-term is the variable-exponent
//! regularization.

use crate::exponent::ExponentField;
use crate::grid::{kahan_sum, EdgeField, Grid, ScalarField};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FluxError {
    #[error("delta must be finite and >= 0, got {0}")]
    BadDelta(f64),
    #[error("growth constants require delta <= 1, got {0}")]
    DeltaTooLarge(f64),
}

/// Sharp 1D lower bound of the Perona-Malik Jacobian eigenvalues:
/// `min_s (1-s^2)/(1+s^2)^2 = -1/8` at `s = sqrt(3)`. Valid in every
/// dimension for this flux since the tangential eigenvalue is positive
/// and the p-term is monotone.
pub const MONOTONICITY_DEFECT: f64 = 0.125;

/// Floor substituted for `lambda1 = delta/p_plus` when `delta = 0`;
/// coercivity genuinely fails there and callers are expected to check
/// [`StructureConstants::coercive`].
pub const LAMBDA1_FLOOR: f64 = 1e-12;

/// Constants of the growth conditions and the monotonicity defect.
#[derive(Clone, Copy, Debug)]
pub struct StructureConstants {
    /// Lower growth constant `lambda1` (floored when `delta = 0`).
    pub lambda1: f64,
    /// Upper growth constant `lambda2`.
    pub lambda2: f64,
    /// Monotonicity defect `K`.
    pub k_defect: f64,
    /// False when `delta = 0`: the lower growth bound then holds only
    /// through the floor and the model is not coercive.
    pub coercive: bool,
}

/// Flux model: regularization weight `delta` plus an exponent field.
/// Pure evaluation; safe to share across threads.
#[derive(Clone, Debug)]
pub struct FluxModel {
    delta: f64,
    exponent: ExponentField,
    edge_p: EdgeField,
}

/// `|s|^e` with the magnitude clamped below at 1e-300 so that the
/// `0^0` case arising for `p = 2` at `xi = 0` evaluates to 1.
#[inline]
fn pow_abs(s: f64, e: f64) -> f64 {
    s.abs().max(1e-300).powf(e)
}

/// Scalar potential used per edge: `phi(p, s)` for a single gradient
/// component.
#[inline]
pub fn phi_scalar(delta: f64, p: f64, s: f64) -> f64 {
    0.5 * (1.0 + s * s).ln() + (delta / p) * pow_abs(s, p)
}

/// Scalar flux `q(p, s) = s/(1+s^2) + delta*|s|^{p-2}*s`.
#[inline]
pub fn q_scalar(delta: f64, p: f64, s: f64) -> f64 {
    s / (1.0 + s * s) + delta * pow_abs(s, p - 2.0) * s
}

/// Scalar flux slope `q'(p, s) = (1-s^2)/(1+s^2)^2 + delta*(p-1)*|s|^{p-2}`.
#[inline]
pub fn dq_scalar(delta: f64, p: f64, s: f64) -> f64 {
    let d = 1.0 + s * s;
    (1.0 - s * s) / (d * d) + delta * (p - 1.0) * pow_abs(s, p - 2.0)
}

impl FluxModel {
    pub fn new(delta: f64, exponent: ExponentField) -> Result<Self, FluxError> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(FluxError::BadDelta(delta));
        }
        let edge_p = exponent.at_edges();
        Ok(FluxModel {
            delta,
            exponent,
            edge_p,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn exponent(&self) -> &ExponentField {
        &self.exponent
    }

    pub fn grid(&self) -> Grid {
        self.exponent.grid()
    }

    /// Exponent averaged onto edges (cached).
    pub fn edge_exponent(&self) -> &EdgeField {
        &self.edge_p
    }

    /// Potential `phi(x, xi)` at grid node `node`.
    pub fn potential(&self, node: usize, xi: &[f64]) -> f64 {
        let p = self.exponent.values()[node];
        let s = norm(xi);
        0.5 * (1.0 + s * s).ln() + (self.delta / p) * pow_abs(s, p)
    }

    /// Flux `q(x, xi)` at grid node `node`; trailing component is 0 in 1D.
    pub fn flux(&self, node: usize, xi: &[f64]) -> [f64; 2] {
        let p = self.exponent.values()[node];
        let s = norm(xi);
        let c = 1.0 / (1.0 + s * s) + self.delta * pow_abs(s, p - 2.0);
        let mut out = [0.0; 2];
        for (o, x) in out.iter_mut().zip(xi) {
            *o = c * x;
        }
        out
    }

    /// Symmetric Jacobian `dq/dxi` at grid node `node`; the leading
    /// `dim x dim` block is meaningful, the rest is zero.
    pub fn flux_jacobian(&self, node: usize, xi: &[f64]) -> [[f64; 2]; 2] {
        let p = self.exponent.values()[node];
        let d = self.delta;
        let s2: f64 = xi.iter().map(|x| x * x).sum();
        let dim = xi.len();
        let mut jac = [[0.0; 2]; 2];
        if s2 == 0.0 {
            let diag = 1.0 + if p == 2.0 { d } else { 0.0 };
            for (a, row) in jac.iter_mut().enumerate().take(dim) {
                row[a] = diag;
            }
            return jac;
        }
        let den = 1.0 + s2;
        let pm_iso = 1.0 / den;
        let pm_rank1 = -2.0 / (den * den);
        let s = s2.sqrt();
        let p_iso = d * pow_abs(s, p - 2.0);
        let p_rank1 = d * (p - 2.0) * pow_abs(s, p - 4.0);
        for a in 0..dim {
            for b in 0..dim {
                let mut v = (pm_rank1 + p_rank1) * xi[a] * xi[b];
                if a == b {
                    v += pm_iso + p_iso;
                }
                jac[a][b] = v;
            }
        }
        jac
    }

    /// Monotonicity defect `K` of
    /// `(q(x,xi1)-q(x,xi2)).(xi1-xi2) >= -K |xi1-xi2|^2`,
    /// valid for all `delta >= 0` and `p >= 2`.
    pub fn monotonicity_defect(&self) -> f64 {
        MONOTONICITY_DEFECT
    }

    /// Constants for the growth conditions: `lambda1 = delta/p_plus`
    /// (floored when `delta = 0`), `lambda2 = (1+delta)/2`, `K = 1/8`.
    /// Requires `delta <= 1`.
    pub fn growth_constants(&self) -> Result<StructureConstants, FluxError> {
        if self.delta > 1.0 {
            return Err(FluxError::DeltaTooLarge(self.delta));
        }
        let coercive = self.delta > 0.0;
        let lambda1 = if coercive {
            self.delta / self.exponent.p_plus()
        } else {
            LAMBDA1_FLOOR
        };
        Ok(StructureConstants {
            lambda1,
            lambda2: (1.0 + self.delta) / 2.0,
            k_defect: MONOTONICITY_DEFECT,
            coercive,
        })
    }

    /// Per-edge scalar flux of an edge field (gradient components), using
    /// the edge-averaged exponent.
    pub fn edge_flux(&self, g: &EdgeField) -> EdgeField {
        self.map_edges(g, q_scalar)
    }

    /// Per-edge scalar flux slope, used for Hessian assembly.
    pub fn edge_flux_slope(&self, g: &EdgeField) -> EdgeField {
        self.map_edges(g, dq_scalar)
    }

    /// Total potential energy `sum_edges h^dim * phi(p_e, grad_e)` of a
    /// scalar field's gradient.
    pub fn energy(&self, u: &ScalarField) -> f64 {
        let g = u.gradient();
        let w = u.grid().cell_weight();
        let mut total = 0.0;
        for a in 0..2 {
            total += kahan_sum(
                g.axis(a)
                    .iter()
                    .zip(self.edge_p.axis(a))
                    .map(|(s, p)| phi_scalar(self.delta, *p, *s)),
            );
        }
        w * total
    }

    fn map_edges(&self, g: &EdgeField, f: fn(f64, f64, f64) -> f64) -> EdgeField {
        assert_eq!(g.grid(), self.grid(), "edge field on a different grid");
        let apply = |vals: &[f64], ps: &[f64]| -> Vec<f64> {
            vals.iter()
                .zip(ps)
                .map(|(s, p)| f(self.delta, *p, *s))
                .collect()
        };
        EdgeField::from_components(
            g.grid(),
            apply(g.axis(0), self.edge_p.axis(0)),
            apply(g.axis(1), self.edge_p.axis(1)),
        )
    }
}

fn norm(xi: &[f64]) -> f64 {
    xi.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Rng;

    fn model_1d(delta: f64, p: f64, n: usize) -> FluxModel {
        let g = Grid::line(n, 1.0 / (n - 1) as f64);
        FluxModel::new(delta, ExponentField::constant(p, g).unwrap()).unwrap()
    }

    #[test]
    fn potential_closed_forms() {
        let m = model_1d(0.001, 2.0, 5);
        assert_eq!(m.potential(0, &[0.0]), 0.0);
        let v = m.potential(2, &[1.0]);
        assert!((v - 0.347074).abs() < 1e-6, "got {v}");

        let m3 = model_1d(0.0, 3.0, 5);
        let v3 = m3.potential(0, &[2.0]);
        assert!((v3 - 0.804719).abs() < 1e-6, "got {v3}");
    }

    #[test]
    fn flux_closed_forms_and_oddness() {
        let m = model_1d(0.001, 2.0, 5);
        assert_eq!(m.flux(0, &[0.0]), [0.0, 0.0]);
        let q = m.flux(1, &[1.0]);
        assert!((q[0] - 0.501).abs() < 1e-12, "got {}", q[0]);

        let m2 = FluxModel::new(
            0.01,
            ExponentField::constant(2.7, Grid::rect(3, 3, 1.0)).unwrap(),
        )
        .unwrap();
        let mut rng = Rng::new(11);
        for _ in 0..50 {
            let xi = [rng.uniform() * 8.0 - 4.0, rng.uniform() * 8.0 - 4.0];
            let qp = m2.flux(4, &xi);
            let qm = m2.flux(4, &[-xi[0], -xi[1]]);
            for a in 0..2 {
                assert!((qp[a] + qm[a]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn jacobian_closed_forms() {
        let m = model_1d(0.5, 2.0, 5);
        let j = m.flux_jacobian(0, &[0.0]);
        assert_eq!(j[0][0], 1.5); // (1+delta) I at the origin for p = 2

        let mp3 = model_1d(0.5, 3.0, 5);
        let j3 = mp3.flux_jacobian(0, &[0.0]);
        assert_eq!(j3[0][0], 1.0); // p-term vanishes at 0 for p > 2

        let m0 = model_1d(0.0, 2.0, 5);
        let s3 = 3.0f64.sqrt();
        let jp = m0.flux_jacobian(2, &[s3]);
        assert!((jp[0][0] + 0.125).abs() < 1e-14, "got {}", jp[0][0]);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = Grid::rect(4, 4, 0.25);
        let vals: Vec<f64> = (0..16).map(|i| 2.0 + (i % 5) as f64 * 0.25).collect();
        let m = FluxModel::new(0.01, ExponentField::from_values(g, vals).unwrap()).unwrap();
        let mut rng = Rng::new(5);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let node = (rng.next_u64() % 16) as usize;
            let xi = [rng.uniform() * 10.0 - 5.0, rng.uniform() * 10.0 - 5.0];
            let jac = m.flux_jacobian(node, &xi);
            let step = 1e-6 * (1.0 + norm(&xi));
            let mut scale = 0.0f64;
            let mut err = 0.0f64;
            for b in 0..2 {
                let mut xp = xi;
                let mut xm = xi;
                xp[b] += step;
                xm[b] -= step;
                let qp = m.flux(node, &xp);
                let qm = m.flux(node, &xm);
                for a in 0..2 {
                    let fd = (qp[a] - qm[a]) / (2.0 * step);
                    err = err.max((fd - jac[a][b]).abs());
                    scale = scale.max(jac[a][b].abs());
                }
            }
            worst = worst.max(err / scale.max(1.0));
            // symmetry
            assert!((jac[0][1] - jac[1][0]).abs() <= 1e-12 * scale.max(1.0));
        }
        assert!(worst <= 1e-6, "jacobian fd mismatch {worst}");
    }

    #[test]
    fn monotonicity_defect_numeric_oracle() {
        // grid minimization of the PM radial eigenvalue over s in [0, 100]
        let mut min = f64::INFINITY;
        let mut argmin = 0.0;
        for i in 0..=1_000_000 {
            let s = i as f64 * 1e-4;
            let v = (1.0 - s * s) / (1.0 + s * s).powi(2);
            if v < min {
                min = v;
                argmin = s;
            }
        }
        assert!((min + 0.125).abs() < 1e-9, "numeric min {min}");
        assert!((argmin - 3f64.sqrt()).abs() < 1e-3);
        let m = model_1d(0.3, 2.5, 4);
        assert_eq!(m.monotonicity_defect(), 0.125);
    }

    #[test]
    fn monotonicity_defect_sampled_pairs() {
        let g = Grid::rect(5, 5, 0.25);
        let vals: Vec<f64> = (0..25).map(|i| 2.0 + (i % 3) as f64 * 0.5).collect();
        let m = FluxModel::new(0.001, ExponentField::from_values(g, vals).unwrap()).unwrap();
        let mut rng = Rng::new(77);
        for dim in [1usize, 2] {
            for _ in 0..20_000 {
                let node = (rng.next_u64() % 25) as usize;
                let mut x1 = [0.0; 2];
                let mut x2 = [0.0; 2];
                for a in 0..dim {
                    x1[a] = rng.uniform() * 100.0 - 50.0;
                    x2[a] = rng.uniform() * 100.0 - 50.0;
                }
                let q1 = m.flux(node, &x1[..dim]);
                let q2 = m.flux(node, &x2[..dim]);
                let mut lhs = 0.0;
                let mut dd = 0.0;
                for a in 0..dim {
                    lhs += (q1[a] - q2[a]) * (x1[a] - x2[a]);
                    dd += (x1[a] - x2[a]) * (x1[a] - x2[a]);
                }
                assert!(
                    lhs >= -0.125 * dd - 1e-12 * (1.0 + dd),
                    "defect violated: {lhs} vs {}",
                    -0.125 * dd
                );
            }
        }
        // degenerate pair
        let q = m.flux(0, &[1.0, 2.0]);
        assert_eq!((q[0] - q[0]) * 0.0 + (q[1] - q[1]) * 0.0, 0.0);
    }

    #[test]
    fn growth_constants_values_and_sampled_bounds() {
        let g = Grid::line(8, 1.0 / 7.0);
        let vals: Vec<f64> = (0..8).map(|i| 2.0 + (i as f64) / 7.0).collect();
        let m = FluxModel::new(0.001, ExponentField::from_values(g, vals).unwrap()).unwrap();
        let c = m.growth_constants().unwrap();
        assert!((c.lambda1 - 0.001 / 3.0).abs() < 1e-18);
        assert!((c.lambda2 - 0.5005).abs() < 1e-15);
        assert!(c.coercive);

        let mut rng = Rng::new(13);
        for _ in 0..20_000 {
            let node = (rng.next_u64() % 8) as usize;
            let xi = [rng.uniform() * 100.0 - 50.0];
            let s = xi[0].abs();
            let p = m.exponent().values()[node];
            let q = m.flux(node, &xi);
            let qn = q[0].abs();
            assert!(qn <= c.lambda2 * s.powf(p - 1.0) + 1.0 + 1e-12);
            let phi = m.potential(node, &xi);
            assert!(phi >= (c.lambda1 * s.powf(p) - 1.0).max(0.0) - 1e-12);
            assert!(phi <= c.lambda2 * s.powf(p) + 1.0 + 1e-12);
        }
    }

    #[test]
    fn growth_constants_delta_edge_cases() {
        let m0 = model_1d(0.0, 2.0, 4);
        let c0 = m0.growth_constants().unwrap();
        assert!(!c0.coercive);
        assert_eq!(c0.lambda1, LAMBDA1_FLOOR);

        let g = Grid::line(4, 1.0);
        let big = FluxModel::new(1.5, ExponentField::constant(2.0, g).unwrap()).unwrap();
        assert!(big.growth_constants().is_err());

        assert!(FluxModel::new(-0.1, ExponentField::constant(2.0, g).unwrap()).is_err());
    }

    #[test]
    fn flux_is_gradient_of_potential() {
        let g = Grid::rect(4, 4, 0.25);
        let vals: Vec<f64> = (0..16).map(|i| 2.0 + (i % 4) as f64 / 3.0).collect();
        let m = FluxModel::new(0.05, ExponentField::from_values(g, vals).unwrap()).unwrap();
        let mut rng = Rng::new(21);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let node = (rng.next_u64() % 16) as usize;
            let xi = [rng.uniform() * 40.0 - 20.0, rng.uniform() * 40.0 - 20.0];
            let q = m.flux(node, &xi);
            let step = 2e-6 * (1.0 + norm(&xi));
            for a in 0..2 {
                let mut xp = xi;
                let mut xm = xi;
                xp[a] += step;
                xm[a] -= step;
                let fd = (m.potential(node, &xp) - m.potential(node, &xm)) / (2.0 * step);
                worst = worst.max((fd - q[a]).abs() / q[a].abs().max(1.0));
            }
        }
        assert!(worst <= 1e-6, "gradient consistency {worst}");
    }

    #[test]
    fn potential_nonnegative() {
        let m = model_1d(0.2, 2.3, 6);
        let mut rng = Rng::new(2);
        for _ in 0..200 {
            let xi = [rng.uniform() * 60.0 - 30.0];
            assert!(m.potential(3, &xi) >= 0.0);
        }
    }

    #[test]
    fn energy_of_constant_field_is_zero() {
        let m = model_1d(0.001, 3.0, 9);
        let u = ScalarField::constant(m.grid(), 1.23);
        assert_eq!(m.energy(&u), 0.0);
    }
}
