//! Uniform cell-centered 3D grid and real scalar fields with midpoint
//! quadrature, spectral calculus helpers and interpolation.
//!
//! The box is `[-L,L]^3` shifted by `center`; points sit at cell centers
//! `center_a + (-L + (i+1/2) h)` per axis with `h = 2L/n`, so no sample ever
//! lands on the origin of a radial kernel.

use crate::error::{CoreError, Result};
use crate::spectral::SpectralOps;

/// Uniform cubic grid, `n` points per axis (power of two), half-width `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    l: f64,
    h: f64,
    center: [f64; 3],
}

/// Build a grid; `n` must be even, at least 8, and factor into powers of
/// two and three (a power of two preferred) so the padded transforms stay
/// fast; `l > 0`.
pub fn make_grid(n: usize, l: f64, center: [f64; 3]) -> Result<Grid> {
    Grid::new(n, l, center)
}

fn smooth_even(n: usize) -> bool {
    if n % 2 != 0 {
        return false;
    }
    let mut m = n;
    while m % 2 == 0 {
        m /= 2;
    }
    while m % 3 == 0 {
        m /= 3;
    }
    m == 1
}

impl Grid {
    pub fn new(n: usize, l: f64, center: [f64; 3]) -> Result<Self> {
        if n < 8 || !smooth_even(n) {
            return Err(CoreError::BadGridSize(n));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(CoreError::BadBoxSize(l));
        }
        Ok(Grid {
            n,
            l,
            h: 2.0 * l / n as f64,
            center,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.l
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn center(&self) -> [f64; 3] {
        self.center
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume `h^3`.
    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    /// Coordinate along one axis for cell index `i`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.center[axis] + (-self.l + (i as f64 + 0.5) * self.h)
    }

    /// Position of the cell with lexicographic index triple.
    pub fn position(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        [self.coord(0, ix), self.coord(1, iy), self.coord(2, iz)]
    }

    /// Lexicographic flat index (z fastest).
    pub fn idx(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n + iy) * self.n + iz
    }

    /// Inverse of [`Grid::idx`].
    pub fn unflatten(&self, idx: usize) -> (usize, usize, usize) {
        let iz = idx % self.n;
        let iy = (idx / self.n) % self.n;
        let ix = idx / (self.n * self.n);
        (ix, iy, iz)
    }

    /// Iterate all positions in flat-index order.
    pub fn positions(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |i| {
            let (ix, iy, iz) = self.unflatten(i);
            self.position(ix, iy, iz)
        })
    }
}

/// Real scalar samples on a [`Grid`], flat lexicographic storage.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::GridMismatch);
        }
        Ok(ScalarField { grid, values })
    }

    /// Sample an analytic function at every cell center.
    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for ix in 0..grid.n() {
            for iy in 0..grid.n() {
                for iz in 0..grid.n() {
                    values.push(f(grid.position(ix, iy, iz)));
                }
            }
        }
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

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination with another field on the same grid.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    /// Positive part max(u, 0).
    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Flat index of the maximum value.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Tricubic (Catmull-Rom) interpolation; zero outside the box. Fourth
    /// order in the spacing for smooth fields.
    pub fn sample_tricubic(&self, x: [f64; 3]) -> f64 {
        let g = &self.grid;
        let n = g.n() as isize;
        let mut base = [0isize; 3];
        let mut wts = [[0.0f64; 4]; 3];
        for a in 0..3 {
            let s = (x[a] - g.coord(a, 0)) / g.spacing();
            let f = s.floor();
            base[a] = f as isize;
            let t = s - f;
            let t2 = t * t;
            let t3 = t2 * t;
            wts[a] = [
                -0.5 * t3 + t2 - 0.5 * t,
                1.5 * t3 - 2.5 * t2 + 1.0,
                -1.5 * t3 + 2.0 * t2 + 0.5 * t,
                0.5 * t3 - 0.5 * t2,
            ];
        }
        let mut acc = 0.0;
        for (da, &wa) in wts[0].iter().enumerate() {
            let ia = base[0] + da as isize - 1;
            if ia < 0 || ia >= n || wa == 0.0 {
                continue;
            }
            for (db, &wb) in wts[1].iter().enumerate() {
                let ib = base[1] + db as isize - 1;
                if ib < 0 || ib >= n || wb == 0.0 {
                    continue;
                }
                for (dc, &wc) in wts[2].iter().enumerate() {
                    let ic = base[2] + dc as isize - 1;
                    if ic < 0 || ic >= n || wc == 0.0 {
                        continue;
                    }
                    acc += wa
                        * wb
                        * wc
                        * self.values[g.idx(ia as usize, ib as usize, ic as usize)];
                }
            }
        }
        acc
    }

    /// Trilinear interpolation at an arbitrary point; zero outside the box.
    pub fn sample_trilinear(&self, x: [f64; 3]) -> f64 {
        let g = &self.grid;
        let n = g.n() as isize;
        let mut base = [0isize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            // continuous cell coordinate: s = (x - first_center)/h
            let s = (x[a] - g.coord(a, 0)) / g.spacing();
            let f = s.floor();
            base[a] = f as isize;
            frac[a] = s - f;
        }
        let mut acc = 0.0;
        for (da, wa0) in [(0isize, 1.0 - frac[0]), (1, frac[0])] {
            let ia = base[0] + da;
            if ia < 0 || ia >= n || wa0 == 0.0 {
                continue;
            }
            for (db, wb0) in [(0isize, 1.0 - frac[1]), (1, frac[1])] {
                let ib = base[1] + db;
                if ib < 0 || ib >= n || wb0 == 0.0 {
                    continue;
                }
                for (dc, wc0) in [(0isize, 1.0 - frac[2]), (1, frac[2])] {
                    let ic = base[2] + dc;
                    if ic < 0 || ic >= n || wc0 == 0.0 {
                        continue;
                    }
                    acc += wa0
                        * wb0
                        * wc0
                        * self.values[g.idx(ia as usize, ib as usize, ic as usize)];
                }
            }
        }
        acc
    }

    /// Shift the samples by an integer number of cells, zero-filling.
    pub fn translate_cells(&self, shift: [isize; 3]) -> Self {
        let g = &self.grid;
        let n = g.n() as isize;
        let mut out = ScalarField::zeros(self.grid);
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let sx = ix - shift[0];
                    let sy = iy - shift[1];
                    let sz = iz - shift[2];
                    if sx >= 0 && sx < n && sy >= 0 && sy < n && sz >= 0 && sz < n {
                        out.values[g.idx(ix as usize, iy as usize, iz as usize)] =
                            self.values[g.idx(sx as usize, sy as usize, sz as usize)];
                    }
                }
            }
        }
        out
    }

    /// Mirror the samples along one axis (index i -> n-1-i).
    pub fn mirror_axis(&self, axis: usize) -> Self {
        let g = &self.grid;
        let n = g.n();
        let mut out = ScalarField::zeros(self.grid);
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let mut j = [ix, iy, iz];
                    j[axis] = n - 1 - j[axis];
                    out.values[g.idx(j[0], j[1], j[2])] = self.values[g.idx(ix, iy, iz)];
                }
            }
        }
        out
    }

    /// Largest |f| over the outermost cell shell, as a boundary-leakage metric.
    pub fn boundary_shell_max(&self) -> f64 {
        let n = self.grid.n();
        let mut m = 0.0f64;
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    if ix == 0 || iy == 0 || iz == 0 || ix == n - 1 || iy == n - 1 || iz == n - 1 {
                        m = m.max(self.values[self.grid.idx(ix, iy, iz)].abs());
                    }
                }
            }
        }
        m
    }

    /// Fraction of the integral of f^2 carried by the outermost `shell` cells.
    pub fn boundary_mass_fraction(&self, shell: usize) -> f64 {
        let n = self.grid.n();
        let mut total = 0.0;
        let mut boundary = 0.0;
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let v = self.values[self.grid.idx(ix, iy, iz)];
                    let v2 = v * v;
                    total += v2;
                    let edge = ix < shell
                        || iy < shell
                        || iz < shell
                        || ix >= n - shell
                        || iy >= n - shell
                        || iz >= n - shell;
                    if edge {
                        boundary += v2;
                    }
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            boundary / total
        }
    }
}

/// Midpoint-rule integral `h^3 * sum(values)`.
pub fn integrate(f: &ScalarField) -> f64 {
    f.grid().cell_volume() * f.values().iter().sum::<f64>()
}

/// L2 inner product of two fields on the same grid.
pub fn inner(f: &ScalarField, g: &ScalarField) -> f64 {
    debug_assert_eq!(f.grid(), g.grid());
    f.grid().cell_volume()
        * f.values()
            .iter()
            .zip(g.values())
            .map(|(a, b)| a * b)
            .sum::<f64>()
}

/// Componentwise spectral derivatives. Fields are assumed negligible at the
/// boundary; leakage is observable through [`ScalarField::boundary_shell_max`].
pub fn gradient_field(f: &ScalarField) -> [ScalarField; 3] {
    SpectralOps::new(f.grid()).gradient(f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    H1,
    Lq(f64),
}

/// Norm of the requested kind, evaluated by midpoint quadrature.
pub fn norm(f: &ScalarField, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::L2 => Ok(integrate(&f.map(|v| v * v)).max(0.0).sqrt()),
        NormKind::H1 => {
            let grad = gradient_field(f);
            let mut s = integrate(&f.map(|v| v * v));
            for g in &grad {
                s += integrate(&g.map(|v| v * v));
            }
            Ok(s.max(0.0).sqrt())
        }
        NormKind::Lq(q) => {
            if q < 1.0 {
                return Err(CoreError::BadNormExponent(q));
            }
            Ok(integrate(&f.map(|v| v.abs().powf(q))).max(0.0).powf(1.0 / q))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn make_grid_examples() {
        let g = make_grid(8, 4.0, [0.0; 3]).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.coord(0, 0), -3.5);
        let g = make_grid(16, 8.0, [0.0; 3]).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert!(matches!(
            make_grid(7, 4.0, [0.0; 3]),
            Err(CoreError::BadGridSize(7))
        ));
        assert!(matches!(
            make_grid(16, -1.0, [0.0; 3]),
            Err(CoreError::BadBoxSize(_))
        ));
        assert!(matches!(
            make_grid(4, 1.0, [0.0; 3]),
            Err(CoreError::BadGridSize(4))
        ));
    }

    #[test]
    fn integrate_box_volume_and_zero() {
        let g = make_grid(8, 1.0, [0.0; 3]).unwrap();
        let one = ScalarField::from_fn(g, |_| 1.0);
        assert_relative_eq!(integrate(&one), 8.0, max_relative = 1e-14);
        let zero = ScalarField::zeros(g);
        assert_eq!(integrate(&zero), 0.0);
    }

    #[test]
    fn integrate_gaussian() {
        let g = make_grid(64, 8.0, [0.0; 3]).unwrap();
        let f = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        assert_relative_eq!(integrate(&f), PI.powf(1.5), epsilon = 1e-6);
    }

    #[test]
    fn integrate_is_linear() {
        let g = make_grid(8, 2.0, [0.5, -0.25, 0.0]).unwrap();
        let f = ScalarField::from_fn(g, |x| (x[0] + 0.3 * x[1]).sin());
        let h = ScalarField::from_fn(g, |x| (x[2] * 1.7).cos());
        let combo = f.scale(2.5).axpy(-1.25, &h);
        assert_relative_eq!(
            integrate(&combo),
            2.5 * integrate(&f) - 1.25 * integrate(&h),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = make_grid(16, 4.0, [0.0; 3]).unwrap();
        let f = ScalarField::from_fn(g, |_| 3.25);
        let grad = gradient_field(&f);
        for d in &grad {
            assert!(d.max_abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_gaussian() {
        let g = make_grid(64, 8.0, [0.0; 3]).unwrap();
        let f = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        let grad = gradient_field(&f);
        for axis in 0..3 {
            let exact = ScalarField::from_fn(g, |x| {
                -2.0 * x[axis] * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
            });
            let err = grad[axis].axpy(-1.0, &exact).max_abs();
            assert!(err < 1e-6, "axis {axis} err {err}");
        }
    }

    #[test]
    fn gradient_of_windowed_sine() {
        let g = make_grid(64, 8.0, [0.0; 3]).unwrap();
        let l = g.half_width();
        let window = |x: [f64; 3]| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 4.0).exp();
        let f = ScalarField::from_fn(g, |x| (PI * x[0] / l).sin() * window(x));
        let grad = gradient_field(&f);
        // analytic d/dx1, checked in the interior |x| < 4
        let mut worst = 0.0f64;
        for (i, p) in g.positions().enumerate() {
            let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
            if r2 > 16.0 {
                continue;
            }
            let w = window(p);
            let exact = (PI / l) * (PI * p[0] / l).cos() * w
                - (p[0] / 2.0) * (PI * p[0] / l).sin() * w;
            worst = worst.max((grad[0].values()[i] - exact).abs());
        }
        assert!(worst < 1e-6, "worst interior error {worst}");
    }

    #[test]
    fn norms_of_zero_and_gaussian() {
        let g = make_grid(64, 8.0, [0.0; 3]).unwrap();
        let zero = ScalarField::zeros(g);
        for kind in [NormKind::L2, NormKind::H1, NormKind::Lq(3.0)] {
            assert_eq!(norm(&zero, kind).unwrap(), 0.0);
        }
        assert!(matches!(
            norm(&zero, NormKind::Lq(0.5)),
            Err(CoreError::BadNormExponent(_))
        ));
        // ||e^{-|x|^2/2}||_{L2}^2 = pi^{3/2}
        let f = ScalarField::from_fn(g, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()
        });
        let l2 = norm(&f, NormKind::L2).unwrap();
        assert_relative_eq!(l2 * l2, PI.powf(1.5), max_relative = 1e-10);
    }

    /// 1D radial quadrature oracle for the H1 norm of the standard Gaussian.
    #[test]
    fn h1_norm_matches_radial_quadrature_oracle() {
        let g = make_grid(64, 8.0, [0.0; 3]).unwrap();
        let f = ScalarField::from_fn(g, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()
        });
        let h1 = norm(&f, NormKind::H1).unwrap();
        // oracle: 4*pi*int r^2 (f'(r)^2 + f(r)^2) dr with f = e^{-r^2/2}, Simpson
        let m = 40_000;
        let rmax = 12.0;
        let dr = rmax / m as f64;
        let integrand = |r: f64| {
            let f = (-r * r / 2.0).exp();
            let df = -r * f;
            r * r * (df * df + f * f)
        };
        let mut s = integrand(0.0) + integrand(rmax);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * integrand(i as f64 * dr);
        }
        let oracle = 4.0 * PI * s * dr / 3.0;
        // closed form cross-check: (3/2 + 1) * pi^{3/2}
        assert_relative_eq!(oracle, 2.5 * PI.powf(1.5), max_relative = 1e-10);
        assert_relative_eq!(h1 * h1, oracle, max_relative = 1e-8);
    }

    #[test]
    fn parseval_consistency() {
        let g = make_grid(32, 6.0, [0.0; 3]).unwrap();
        let f = ScalarField::from_fn(g, |x| {
            (-(x[0] * x[0] + 0.8 * x[1] * x[1] + 1.3 * x[2] * x[2])).exp() * (1.0 + 0.2 * x[0])
        });
        let ops = SpectralOps::new(g);
        let spectral = ops.dirichlet_energy(&f);
        let grad = gradient_field(&f);
        let real: f64 = grad.iter().map(|d| integrate(&d.map(|v| v * v))).sum();
        assert_relative_eq!(spectral, real, max_relative = 1e-10);
    }

    #[test]
    fn translation_by_cells_preserves_integrals_and_norms() {
        let g = make_grid(32, 8.0, [0.0; 3]).unwrap();
        let f = ScalarField::from_fn(g, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            if r2 < 9.0 {
                (-1.0 / (1.0 - r2 / 9.0)).exp()
            } else {
                0.0
            }
        });
        let shifted = f.translate_cells([3, -2, 1]);
        assert_relative_eq!(integrate(&f), integrate(&shifted), max_relative = 1e-12);
        for kind in [NormKind::L2, NormKind::H1, NormKind::Lq(3.5)] {
            let a = norm(&f, kind).unwrap();
            let b = norm(&shifted, kind).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn trilinear_interpolation_reproduces_linear_functions() {
        let g = make_grid(16, 4.0, [0.0; 3]).unwrap();
        let f = ScalarField::from_fn(g, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2]);
        let x = [0.31, -1.27, 2.05];
        assert_relative_eq!(
            f.sample_trilinear(x),
            1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2],
            max_relative = 1e-12
        );
        // outside the box -> 0
        assert_eq!(f.sample_trilinear([10.0, 0.0, 0.0]), 0.0);
    }
}
