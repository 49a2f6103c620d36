//! Variable exponent fields `p(x)` sampled on grid nodes.
//!
//! The solver operates in the regime `2 <= p^- <= p(x) <= p^+ < oo`;
//! constructors reject anything below 2.

use crate::grid::{EdgeField, Grid, ScalarField};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExponentError {
    #[error("exponent must satisfy p >= 2, got {0}")]
    BelowTwo(f64),
    #[error("exponent bounds must satisfy 2 <= p_min <= p_max, got [{0}, {1}]")]
    BadRange(f64, f64),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// Spatially varying exponent with cached essential bounds.
#[derive(Clone, Debug)]
pub struct ExponentField {
    grid: Grid,
    values: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
}

impl ExponentField {
    /// Constant-exponent field (the constant-p baseline).
    pub fn constant(p: f64, grid: Grid) -> Result<Self, ExponentError> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(ExponentError::BelowTwo(p));
        }
        Ok(ExponentField {
            grid,
            values: vec![p; grid.node_count()],
            p_minus: p,
            p_plus: p,
        })
    }

    /// Edge-adaptive exponent
    /// `p(x) = p_min + (p_max - p_min) / (1 + k * |grad(G_sigma * reference)(x)|^2)`,
    /// where `G_sigma` is a discrete Gaussian blur with mirror extension and
    /// `sigma` is measured in grid units. Large smoothed gradients pull the
    /// exponent down toward `p_min`.
    pub fn edge_adaptive(
        reference: &ScalarField,
        sigma: f64,
        k: f64,
        p_min: f64,
        p_max: f64,
    ) -> Result<Self, ExponentError> {
        if !(p_min >= 2.0) {
            return Err(ExponentError::BelowTwo(p_min));
        }
        if !(p_min <= p_max) || !p_max.is_finite() {
            return Err(ExponentError::BadRange(p_min, p_max));
        }
        if !(sigma >= 0.0) {
            return Err(ExponentError::BadParameter(format!("sigma = {sigma}")));
        }
        if !(k > 0.0) {
            return Err(ExponentError::BadParameter(format!("k = {k}")));
        }
        let grid = reference.grid();
        let smoothed = gaussian_blur(reference, sigma);
        let gsq = node_gradient_sq(&smoothed);
        let values: Vec<f64> = gsq
            .iter()
            .map(|g2| p_min + (p_max - p_min) / (1.0 + k * g2))
            .collect();
        let (p_minus, p_plus) = bounds(&values);
        Ok(ExponentField {
            grid,
            values,
            p_minus,
            p_plus,
        })
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, ExponentError> {
        assert_eq!(values.len(), grid.node_count(), "exponent length");
        let (p_minus, p_plus) = bounds(&values);
        if !(p_minus >= 2.0) {
            return Err(ExponentError::BelowTwo(p_minus));
        }
        if !p_plus.is_finite() {
            return Err(ExponentError::BadRange(p_minus, p_plus));
        }
        Ok(ExponentField {
            grid,
            values,
            p_minus,
            p_plus,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    /// Exponent averaged onto interior edges (mean of the two adjacent
    /// node values); this is where the p-term of the potential is evaluated.
    pub fn at_edges(&self) -> EdgeField {
        let g = self.grid;
        let [nx, ny] = g.shape();
        let p = &self.values;
        let mut ax0 = Vec::with_capacity(g.edge_count(0));
        for j in 0..ny {
            for i in 0..nx - 1 {
                let n = j * nx + i;
                ax0.push(0.5 * (p[n] + p[n + 1]));
            }
        }
        let mut ax1 = Vec::new();
        if g.dim() == 2 {
            ax1.reserve(g.edge_count(1));
            for j in 0..ny - 1 {
                for i in 0..nx {
                    let n = j * nx + i;
                    ax1.push(0.5 * (p[n] + p[n + nx]));
                }
            }
        }
        EdgeField::from_components(g, ax0, ax1)
    }

    /// Smallest `a1` with `|p(x)-p(y)| <= a1 / log(e + 1/|x-y|)` over all
    /// node pairs. A lower bound of the continuum log-Hoelder constant,
    /// O(node_count^2) pairs.
    pub fn log_holder_constant(&self) -> f64 {
        let g = self.grid;
        let n = g.node_count();
        let mut a1: f64 = 0.0;
        for i in 0..n {
            let pi = self.values[i];
            let [xi, yi] = g.node_pos(i);
            for j in i + 1..n {
                let dp = (pi - self.values[j]).abs();
                if dp == 0.0 {
                    continue;
                }
                let [xj, yj] = g.node_pos(j);
                let d = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                a1 = a1.max(dp * (std::f64::consts::E + 1.0 / d).ln());
            }
        }
        a1
    }
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    (lo, hi)
}

/// Truncated Gaussian kernel of radius ceil(3*sigma), renormalized to sum 1.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|j| (-((j * j) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    for v in &mut k {
        *v /= s;
    }
    k
}

/// Mirror (whole-sample) index reflection, consistent with zero normal
/// derivative at the boundary.
fn reflect(i: i64, n: i64) -> usize {
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

fn gaussian_blur(u: &ScalarField, sigma: f64) -> ScalarField {
    let g = u.grid();
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let [nx, ny] = g.shape();
    // separable pass along x
    let mut tmp = vec![0.0; g.node_count()];
    for j in 0..ny {
        for i in 0..nx as i64 {
            let mut acc = 0.0;
            for (o, w) in kernel.iter().enumerate() {
                let ii = reflect(i + o as i64 - r, nx as i64);
                acc += w * u.values()[j * nx + ii];
            }
            tmp[j * nx + i as usize] = acc;
        }
    }
    if g.dim() == 1 {
        return ScalarField::from_values(g, tmp);
    }
    let mut out = vec![0.0; g.node_count()];
    for j in 0..ny as i64 {
        for i in 0..nx {
            let mut acc = 0.0;
            for (o, w) in kernel.iter().enumerate() {
                let jj = reflect(j + o as i64 - r, ny as i64);
                acc += w * tmp[jj * nx + i];
            }
            out[j as usize * nx + i] = acc;
        }
    }
    ScalarField::from_values(g, out)
}

/// Squared gradient magnitude at nodes: per axis the mean of the incident
/// edge differences (central difference in the interior, one-sided at the
/// boundary), components summed.
fn node_gradient_sq(u: &ScalarField) -> Vec<f64> {
    let g = u.grid();
    let grad = u.gradient();
    let [nx, ny] = g.shape();
    let mut out = vec![0.0; g.node_count()];
    for j in 0..ny {
        for i in 0..nx {
            let n = j * nx + i;
            let e = j * (nx - 1) + i;
            let gx = match (i > 0, i + 1 < nx) {
                (true, true) => 0.5 * (grad.axis(0)[e - 1] + grad.axis(0)[e]),
                (false, true) => grad.axis(0)[e],
                (true, false) => grad.axis(0)[e - 1],
                _ => 0.0,
            };
            out[n] += gx * gx;
        }
    }
    if g.dim() == 2 {
        for j in 0..ny {
            for i in 0..nx {
                let n = j * nx + i;
                let gy = match (j > 0, j + 1 < ny) {
                    (true, true) => 0.5 * (grad.axis(1)[(j - 1) * nx + i] + grad.axis(1)[j * nx + i]),
                    (false, true) => grad.axis(1)[j * nx + i],
                    (true, false) => grad.axis(1)[(j - 1) * nx + i],
                    _ => 0.0,
                };
                out[n] += gy * gy;
            }
        }
    }
    out
}

/// Direct evaluation of the adaptive formula, kept separate so tests can
/// cross-check `edge_adaptive` end to end.
#[doc(hidden)]
pub fn adaptive_formula_reference(
    reference: &ScalarField,
    sigma: f64,
    k: f64,
    p_min: f64,
    p_max: f64,
) -> Vec<f64> {
    let smoothed = gaussian_blur(reference, sigma);
    node_gradient_sq(&smoothed)
        .iter()
        .map(|g2| p_min + (p_max - p_min) / (1.0 + k * g2))
        .collect()
}
