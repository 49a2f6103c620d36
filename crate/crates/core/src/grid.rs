//! Uniform 1D/2D meshes with node-valued scalars, edge-valued gradients,
//! and an exact summation-by-parts gradient/divergence pair.
//!
//! Gradients live on the interior edges between adjacent nodes; no boundary
//! edges exist, which encodes the zero-flux (Neumann) boundary condition
//! exactly: `inner_edges(gradient(u), F) == -inner(u, divergence(F))` holds
//! to rounding for every pair of discrete fields.

/// Uniform mesh over an interval (1D) or rectangle (2D).
///
/// Nodes sit at `i*h` per axis; interior edges sit midway between adjacent
/// nodes. Spacing is the same on every axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    shape: [usize; 2],
    h: f64,
}

impl Grid {
    /// 1D grid with `n` nodes and spacing `h`.
    pub fn line(n: usize, h: f64) -> Self {
        assert!(n >= 2, "grid axis needs at least 2 nodes, got {n}");
        assert!(h > 0.0, "grid spacing must be positive, got {h}");
        Grid {
            dim: 1,
            shape: [n, 1],
            h,
        }
    }

    /// 2D grid with `nx` x `ny` nodes and spacing `h` on both axes.
    pub fn rect(nx: usize, ny: usize, h: f64) -> Self {
        assert!(
            nx >= 2 && ny >= 2,
            "grid axes need at least 2 nodes, got {nx}x{ny}"
        );
        assert!(h > 0.0, "grid spacing must be positive, got {h}");
        Grid {
            dim: 2,
            shape: [nx, ny],
            h,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Node counts per axis; `shape()[1] == 1` in 1D.
    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn node_count(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    /// Number of interior edges along `axis`.
    pub fn edge_count(&self, axis: usize) -> usize {
        match (self.dim, axis) {
            (1, 0) => self.shape[0] - 1,
            (2, 0) => (self.shape[0] - 1) * self.shape[1],
            (2, 1) => self.shape[0] * (self.shape[1] - 1),
            _ => 0,
        }
    }

    /// Quadrature weight per node/edge: `h^dim`.
    pub fn cell_weight(&self) -> f64 {
        if self.dim == 1 {
            self.h
        } else {
            self.h * self.h
        }
    }

    /// Total quadrature measure `node_count * h^dim`.
    pub fn volume(&self) -> f64 {
        self.node_count() as f64 * self.cell_weight()
    }

    /// Physical coordinates of node `i` (second component 0 in 1D).
    pub fn node_pos(&self, i: usize) -> [f64; 2] {
        let nx = self.shape[0];
        [(i % nx) as f64 * self.h, (i / nx) as f64 * self.h]
    }
}

/// One scalar per grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

/// One scalar per interior edge, stored per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeField {
    grid: Grid,
    ax: [Vec<f64>; 2],
}

/// Compensated (Kahan) summation; keeps the adjointness identity and the
/// energy certificates well below the 1e-12 tolerances they are checked at.
pub(crate) fn kahan_sum(it: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in it {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn constant(grid: Grid, v: f64) -> Self {
        ScalarField {
            grid,
            values: vec![v; grid.node_count()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            grid.node_count(),
            "value count does not match grid"
        );
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Forward-difference gradient on interior edges: `(u[i+1]-u[i])/h`.
    pub fn gradient(&self) -> EdgeField {
        let g = self.grid;
        let [nx, ny] = g.shape();
        let h = g.h();
        let u = &self.values;
        let mut ax0 = Vec::with_capacity(g.edge_count(0));
        for j in 0..ny {
            for i in 0..nx - 1 {
                let n = j * nx + i;
                ax0.push((u[n + 1] - u[n]) / h);
            }
        }
        let mut ax1 = Vec::new();
        if g.dim() == 2 {
            ax1.reserve(g.edge_count(1));
            for j in 0..ny - 1 {
                for i in 0..nx {
                    let n = j * nx + i;
                    ax1.push((u[n + nx] - u[n]) / h);
                }
            }
        }
        EdgeField { grid: g, ax: [ax0, ax1] }
    }

    /// Quadrature-weighted inner product `h^dim * sum(u_i v_i)`.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.grid, other.grid, "inner: mismatched grids");
        let w = self.grid.cell_weight();
        w * kahan_sum(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b),
        )
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Arithmetic mean over nodes.
    pub fn mean(&self) -> f64 {
        kahan_sum(self.values.iter().copied()) / self.values.len() as f64
    }

    /// Discrete variable-exponent semimodular `h^dim * sum |u_i|^{p_i}`.
    pub fn semimodular(&self, p: &[f64]) -> f64 {
        assert_eq!(p.len(), self.values.len(), "semimodular: exponent length");
        self.grid.cell_weight()
            * kahan_sum(
                self.values
                    .iter()
                    .zip(p)
                    .map(|(u, pi)| u.abs().max(1e-300).powf(*pi)),
            )
    }

    pub fn scaled(&self, a: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// Componentwise `self + a*other`.
    pub fn axpy(&self, a: f64, other: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, other.grid, "axpy: mismatched grids");
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.axpy(-1.0, other)
    }
}

impl EdgeField {
    pub fn zeros(grid: Grid) -> Self {
        EdgeField {
            grid,
            ax: [vec![0.0; grid.edge_count(0)], vec![0.0; grid.edge_count(1)]],
        }
    }

    pub fn from_components(grid: Grid, ax0: Vec<f64>, ax1: Vec<f64>) -> Self {
        assert_eq!(ax0.len(), grid.edge_count(0), "edge count mismatch, axis 0");
        assert_eq!(ax1.len(), grid.edge_count(1), "edge count mismatch, axis 1");
        EdgeField { grid, ax: [ax0, ax1] }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.ax[a]
    }

    pub fn axis_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.ax[a]
    }

    /// Divergence with zero flux through the missing boundary edges:
    /// node value is `(F_in - F_out)/h` summed over axes.
    pub fn divergence(&self) -> ScalarField {
        let g = self.grid;
        let [nx, ny] = g.shape();
        let h = g.h();
        let mut out = vec![0.0; g.node_count()];
        let f0 = &self.ax[0];
        for j in 0..ny {
            for i in 0..nx {
                let n = j * nx + i;
                let e = j * (nx - 1) + i;
                let right = if i + 1 < nx { f0[e] } else { 0.0 };
                let left = if i > 0 { f0[e - 1] } else { 0.0 };
                out[n] += (right - left) / h;
            }
        }
        if g.dim() == 2 {
            let f1 = &self.ax[1];
            for j in 0..ny {
                for i in 0..nx {
                    let n = j * nx + i;
                    let up = if j + 1 < ny { f1[j * nx + i] } else { 0.0 };
                    let down = if j > 0 { f1[(j - 1) * nx + i] } else { 0.0 };
                    out[n] += (up - down) / h;
                }
            }
        }
        ScalarField { grid: g, values: out }
    }

    /// Quadrature-weighted inner product over all interior edges.
    pub fn inner(&self, other: &EdgeField) -> f64 {
        assert_eq!(self.grid, other.grid, "inner_edges: mismatched grids");
        let w = self.grid.cell_weight();
        w * kahan_sum(
            self.ax[0]
                .iter()
                .zip(&other.ax[0])
                .chain(self.ax[1].iter().zip(&other.ax[1]))
                .map(|(a, b)| a * b),
        )
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn axpy(&self, a: f64, other: &EdgeField) -> EdgeField {
        assert_eq!(self.grid, other.grid, "axpy: mismatched grids");
        let comb = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(p, q)| p + a * q).collect()
        };
        EdgeField {
            grid: self.grid,
            ax: [
                comb(&self.ax[0], &other.ax[0]),
                comb(&self.ax[1], &other.ax[1]),
            ],
        }
    }

    pub fn sub(&self, other: &EdgeField) -> EdgeField {
        self.axpy(-1.0, other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_fill(seed: &mut u64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((*seed >> 11) as f64) / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = Grid::rect(4, 5, 0.5);
        let u = ScalarField::constant(g, 3.7);
        let gr = u.gradient();
        assert!(gr.axis(0).iter().all(|v| *v == 0.0));
        assert!(gr.axis(1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_linear_ramp_1d() {
        let g = Grid::line(3, 1.0);
        let u = ScalarField::from_values(g, vec![0.0, 1.0, 2.0]);
        assert_eq!(u.gradient().axis(0), &[1.0, 1.0]);
    }

    #[test]
    fn gradient_checkerboard_2d() {
        let g = Grid::rect(3, 3, 1.0);
        let u = ScalarField::from_values(
            g,
            vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        );
        let gr = u.gradient();
        for (e, v) in gr.axis(0).iter().enumerate() {
            let expect = if e % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(*v, expect, "x-edge {e}");
        }
        for (e, v) in gr.axis(1).iter().enumerate() {
            let expect = if e % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(*v, expect, "y-edge {e}");
        }
    }

    #[test]
    fn divergence_hand_computed_1d() {
        let g = Grid::line(3, 1.0);
        let f = EdgeField::from_components(g, vec![1.0, 1.0], vec![]);
        assert_eq!(f.divergence().values(), &[1.0, 0.0, -1.0]);
    }

    #[test]
    fn divergence_total_is_zero() {
        let g = Grid::rect(6, 4, 0.25);
        let mut seed = 7u64;
        let f = EdgeField::from_components(
            g,
            lcg_fill(&mut seed, g.edge_count(0)),
            lcg_fill(&mut seed, g.edge_count(1)),
        );
        let total = kahan_sum(f.divergence().values().iter().copied());
        assert!(total.abs() <= 1e-12, "total divergence {total}");
    }

    #[test]
    fn summation_by_parts_exact() {
        for g in [Grid::line(17, 0.125), Grid::rect(9, 7, 0.25)] {
            let mut seed = 42u64;
            let u = ScalarField::from_values(g, lcg_fill(&mut seed, g.node_count()));
            let f = EdgeField::from_components(
                g,
                lcg_fill(&mut seed, g.edge_count(0)),
                lcg_fill(&mut seed, g.edge_count(1)),
            );
            let lhs = u.gradient().inner(&f);
            let rhs = -u.inner(&f.divergence());
            let scale = lhs.abs().max(rhs.abs()).max(1e-30);
            assert!(
                (lhs - rhs).abs() / scale <= 1e-12,
                "adjointness violated: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn laplacian_symmetric_negative_semidefinite() {
        let g = Grid::rect(5, 6, 0.5);
        let mut seed = 3u64;
        let u = ScalarField::from_values(g, lcg_fill(&mut seed, g.node_count()));
        let v = ScalarField::from_values(g, lcg_fill(&mut seed, g.node_count()));
        let lu = u.gradient().divergence();
        let lv = v.gradient().divergence();
        let a = lu.inner(&v);
        let b = u.inner(&lv);
        assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
        assert!(lu.inner(&u) <= 1e-12);
    }

    #[test]
    fn semimodular_conventions() {
        let g = Grid::line(5, 0.25);
        let one = ScalarField::constant(g, 1.0);
        // |Omega| up to the node-count quadrature convention.
        assert!((one.semimodular(&[2.0; 5]) - g.volume()).abs() < 1e-15);
        let mut seed = 9u64;
        let u = ScalarField::from_values(g, lcg_fill(&mut seed, 5));
        let sq = u.inner(&u);
        assert!((u.semimodular(&[2.0; 5]) - sq).abs() <= 1e-14 * sq.max(1.0));
    }

    #[test]
    fn inner_positive_definite() {
        let g = Grid::line(4, 1.0);
        let z = ScalarField::zeros(g);
        assert_eq!(z.inner(&z), 0.0);
        let u = ScalarField::from_values(g, vec![0.1, -0.2, 0.3, 0.0]);
        assert!(u.inner(&u) > 0.0);
    }
}
