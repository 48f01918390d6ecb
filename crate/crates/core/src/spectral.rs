//! 3D FFT plumbing and spectral calculus on the cubic grid.
//!
//! Fields are treated as periodic on the box; every consumer in this crate
//! feeds decaying fields whose boundary values are negligible, and the
//! leakage is observable via `ScalarField::boundary_shell_max`.

use crate::grid::{Grid, ScalarField};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Cached 1D plans for a cube of side `m`, applied along all three axes.
pub struct Fft3 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m * self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn pass_lines(&self, data: &mut [Complex<f64>], forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let mut scratch = vec![Complex::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
    }

    /// Transpose the fastest axis with the slowest axis: (a,b,c) -> (c,b,a).
    fn transpose_xz(&self, data: &mut [Complex<f64>]) {
        let m = self.m;
        for ia in 0..m {
            for ib in 0..m {
                for ic in 0..ia {
                    let p = (ia * m + ib) * m + ic;
                    let q = (ic * m + ib) * m + ia;
                    data.swap(p, q);
                }
            }
        }
    }

    /// Transpose the two fastest axes within each slab: (a,b,c) -> (a,c,b).
    fn transpose_yz(&self, data: &mut [Complex<f64>]) {
        let m = self.m;
        for slab in data.chunks_exact_mut(m * m) {
            for ib in 0..m {
                for ic in 0..ib {
                    slab.swap(ib * m + ic, ic * m + ib);
                }
            }
        }
    }

    /// Unnormalised 3D transform in place (inverse leaves the 1/m^3 factor
    /// to the caller).
    pub fn transform(&self, data: &mut [Complex<f64>], forward: bool) {
        assert_eq!(data.len(), self.len());
        // axis 2 (contiguous)
        self.pass_lines(data, forward);
        // axis 1
        self.transpose_yz(data);
        self.pass_lines(data, forward);
        self.transpose_yz(data);
        // axis 0
        self.transpose_xz(data);
        self.pass_lines(data, forward);
        self.transpose_xz(data);
    }
}

/// Signed wavenumber for DFT index `j` of `m` samples with period `period`;
/// `zero_nyquist` drops the unpaired cosine mode (used for first derivatives).
fn wavenumber(j: usize, m: usize, period: f64, zero_nyquist: bool) -> f64 {
    let half = m / 2;
    if zero_nyquist && j == half {
        return 0.0;
    }
    let s = if j <= half {
        j as f64
    } else {
        j as f64 - m as f64
    };
    2.0 * PI * s / period
}

/// Spectral derivative and inverse-Helmholtz operators on one grid.
pub struct SpectralOps {
    grid: Grid,
    fft: Fft3,
    /// k with the Nyquist mode kept (symmetric operators).
    k_full: Vec<f64>,
    /// k with the Nyquist mode dropped (first derivatives).
    k_deriv: Vec<f64>,
}

impl SpectralOps {
    pub fn new(grid: Grid) -> Self {
        let m = grid.n();
        let period = 2.0 * grid.half_width();
        SpectralOps {
            grid,
            fft: Fft3::new(m),
            k_full: (0..m).map(|j| wavenumber(j, m, period, false)).collect(),
            k_deriv: (0..m).map(|j| wavenumber(j, m, period, true)).collect(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn to_complex(&self, f: &ScalarField) -> Vec<Complex<f64>> {
        f.values().iter().map(|&v| Complex::new(v, 0.0)).collect()
    }

    fn from_complex(&self, data: Vec<Complex<f64>>) -> ScalarField {
        let scale = 1.0 / self.fft.len() as f64;
        ScalarField::from_values(
            self.grid,
            data.into_iter().map(|c| c.re * scale).collect(),
        )
        .expect("length preserved")
    }

    pub fn forward(&self, f: &ScalarField) -> Vec<Complex<f64>> {
        let mut data = self.to_complex(f);
        self.fft.transform(&mut data, true);
        data
    }

    pub fn inverse(&self, mut data: Vec<Complex<f64>>) -> ScalarField {
        self.fft.transform(&mut data, false);
        self.from_complex(data)
    }

    /// Real multiplier in Fourier space, applied to a fresh transform of `f`.
    fn apply_multiplier(&self, f: &ScalarField, mult: impl Fn(f64, f64, f64) -> f64) -> ScalarField {
        let m = self.grid.n();
        let mut data = self.forward(f);
        let mut idx = 0;
        for jx in 0..m {
            let kx = self.k_full[jx];
            for jy in 0..m {
                let ky = self.k_full[jy];
                for jz in 0..m {
                    let kz = self.k_full[jz];
                    let c = mult(kx, ky, kz);
                    data[idx] = data[idx].scale(c);
                    idx += 1;
                }
            }
        }
        self.inverse(data)
    }

    /// Componentwise spectral gradient.
    pub fn gradient(&self, f: &ScalarField) -> [ScalarField; 3] {
        let m = self.grid.n();
        let hat = self.forward(f);
        let mut out = Vec::with_capacity(3);
        for axis in 0..3 {
            let mut data = hat.clone();
            let mut idx = 0;
            for jx in 0..m {
                for jy in 0..m {
                    for jz in 0..m {
                        let k = match axis {
                            0 => self.k_deriv[jx],
                            1 => self.k_deriv[jy],
                            _ => self.k_deriv[jz],
                        };
                        // multiply by i*k
                        let v = data[idx];
                        data[idx] = Complex::new(-k * v.im, k * v.re);
                        idx += 1;
                    }
                }
            }
            out.push(self.inverse(data));
        }
        [out.remove(0), out.remove(0), out.remove(0)]
    }

    /// Spectral Laplacian (Nyquist kept).
    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        self.apply_multiplier(f, |kx, ky, kz| -(kx * kx + ky * ky + kz * kz))
    }

    /// `(-eps2 * Laplacian + lambda)^{-1} f`, the descent preconditioner.
    pub fn inv_helmholtz(&self, f: &ScalarField, eps2: f64, lambda: f64) -> ScalarField {
        self.apply_multiplier(f, |kx, ky, kz| {
            1.0 / (eps2 * (kx * kx + ky * ky + kz * kz) + lambda)
        })
    }

    /// Parseval form of `int |grad f|^2`, the exact quadratic form of
    /// [`SpectralOps::laplacian`] (Nyquist kept, so energies and first
    /// variations stay dual on the grid).
    pub fn dirichlet_energy(&self, f: &ScalarField) -> f64 {
        let m = self.grid.n();
        let hat = self.forward(f);
        let mut acc = 0.0;
        let mut idx = 0;
        for jx in 0..m {
            let kx = self.k_full[jx];
            for jy in 0..m {
                let ky = self.k_full[jy];
                for jz in 0..m {
                    let kz = self.k_full[jz];
                    acc += (kx * kx + ky * ky + kz * kz) * hat[idx].norm_sqr();
                    idx += 1;
                }
            }
        }
        acc * self.grid.cell_volume() / self.fft.len() as f64
    }
}
