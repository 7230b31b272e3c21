//! Periodic grids, real and spectral fields, and 2-D FFTs.
//!
//! Fields have shape (nx, ny) stored row-major: index = ix·ny + iy.
//! The forward transform is unnormalized with kernel e^{−i k·x}; the inverse
//! carries the 1/(nx·ny) factor, so ∂x ↔ i·kx.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{NvError, Result};

type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub dealias: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        let g = Self { nx, ny, lx, ly, dealias: 2.0 / 3.0 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("nx", self.nx), ("ny", self.ny)] {
            if n < 8 || !n.is_power_of_two() {
                return Err(NvError::InvalidInput(format!("{name} must be a power of two >= 8, got {n}")));
            }
        }
        if !(self.lx > 0.0 && self.ly > 0.0 && self.lx.is_finite() && self.ly.is_finite()) {
            return Err(NvError::InvalidInput(format!(
                "box lengths must be positive, got Lx = {}, Ly = {}",
                self.lx, self.ly
            )));
        }
        if !(self.dealias > 0.0 && self.dealias <= 1.0) {
            return Err(NvError::InvalidInput(format!("dealias fraction must lie in (0, 1], got {}", self.dealias)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// Grid coordinate on the centered box [−L/2, L/2).
    pub fn x(&self, ix: usize) -> f64 {
        -0.5 * self.lx + ix as f64 * self.dx()
    }

    pub fn y(&self, iy: usize) -> f64 {
        -0.5 * self.ly + iy as f64 * self.dy()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { lx: self.lx * factor, ly: self.ly * factor, ..*self }
    }

    pub fn kx(&self, ix: usize) -> f64 {
        signed_index(ix, self.nx) as f64 * 2.0 * std::f64::consts::PI / self.lx
    }

    pub fn ky(&self, iy: usize) -> f64 {
        signed_index(iy, self.ny) as f64 * 2.0 * std::f64::consts::PI / self.ly
    }

    pub fn is_nyquist_x(&self, ix: usize) -> bool {
        ix == self.nx / 2
    }

    pub fn is_nyquist_y(&self, iy: usize) -> bool {
        iy == self.ny / 2
    }

    /// Index of the wavevector −k.
    pub fn neg(&self, ix: usize, iy: usize) -> usize {
        ((self.nx - ix) % self.nx) * self.ny + (self.ny - iy) % self.ny
    }

    /// Two-thirds rule: keep modes with |m| ≤ dealias·n/2 in each direction.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cx = self.dealias * self.nx as f64 / 2.0;
        let cy = self.dealias * self.ny as f64 / 2.0;
        let mut m = vec![false; self.len()];
        for ix in 0..self.nx {
            let mx = signed_index(ix, self.nx).unsigned_abs() as f64;
            for iy in 0..self.ny {
                let my = signed_index(iy, self.ny).unsigned_abs() as f64;
                m[ix * self.ny + iy] = mx < cx && my < cy;
            }
        }
        m
    }

    /// i·kx with the Nyquist mode zeroed, the spectral ∂x.
    pub fn ikx(&self, ix: usize) -> C {
        if self.is_nyquist_x(ix) {
            C::new(0.0, 0.0)
        } else {
            C::new(0.0, self.kx(ix))
        }
    }

    pub fn iky(&self, iy: usize) -> C {
        if self.is_nyquist_y(iy) {
            C::new(0.0, 0.0)
        } else {
            C::new(0.0, self.ky(iy))
        }
    }
}

pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealField2D {
    pub grid: GridSpec,
    pub data: Vec<f64>,
}

impl RealField2D {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for ix in 0..grid.nx {
            let x = grid.x(ix);
            for iy in 0..grid.ny {
                data.push(f(x, grid.y(iy)));
            }
        }
        Self { grid, data }
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.data[ix * self.grid.ny + iy]
    }

    /// Trapezoid rule on the periodic grid.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|v| a * v).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn to_complex(&self) -> Vec<C> {
        self.data.iter().map(|&v| C::new(v, 0.0)).collect()
    }
}

/// Relative L² distance ‖a − b‖ / ‖b‖.
pub fn rel_l2(a: &RealField2D, b: &RealField2D) -> f64 {
    let num: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.data.iter().map(|y| y * y).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralField2D {
    pub grid: GridSpec,
    pub data: Vec<C>,
    pub hermitian: bool,
}

impl SpectralField2D {
    /// Largest |c(k) − conj c(−k)| relative to the largest coefficient.
    pub fn hermitian_residue(&self) -> f64 {
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                let a = self.data[ix * g.ny + iy];
                let b = self.data[g.neg(ix, iy)];
                worst = worst.max((a - b.conj()).norm());
                scale = scale.max(a.norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Replaces c(k) by ½(c(k) + conj c(−k)).
    pub fn enforce_hermitian(&mut self) {
        enforce_hermitian(&self.grid, &mut self.data);
        self.hermitian = true;
    }

    /// Fraction of spectral energy outside the dealiased band.
    pub fn tail_fraction(&self) -> f64 {
        tail_fraction(&self.grid, &self.data)
    }
}

pub fn enforce_hermitian(g: &GridSpec, data: &mut [C]) {
    for ix in 0..g.nx {
        for iy in 0..g.ny {
            let i = ix * g.ny + iy;
            let j = g.neg(ix, iy);
            if j < i {
                continue;
            }
            let s = 0.5 * (data[i] + data[j].conj());
            data[i] = s;
            data[j] = s.conj();
        }
    }
}

pub fn tail_fraction(g: &GridSpec, data: &[C]) -> f64 {
    let mask = g.dealias_mask();
    let mut tail = 0.0;
    let mut total = 0.0;
    for (c, keep) in data.iter().zip(&mask) {
        let e = c.norm_sqr();
        total += e;
        if !keep {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Planned 2-D FFT for one grid shape.
pub struct Fft2 {
    grid: GridSpec,
    fx: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
    col: Vec<C>,
    scratch: Vec<C>,
}

impl Fft2 {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let fx = planner.plan_fft_forward(grid.nx);
        let fy = planner.plan_fft_forward(grid.ny);
        let ix = planner.plan_fft_inverse(grid.nx);
        let iy = planner.plan_fft_inverse(grid.ny);
        let scratch_len = [&fx, &fy, &ix, &iy]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            grid,
            fx,
            fy,
            ix,
            iy,
            col: vec![C::new(0.0, 0.0); grid.len()],
            scratch: vec![C::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn run(&mut self, data: &mut [C], inverse: bool) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        assert_eq!(data.len(), nx * ny, "field does not match FFT plan");
        let (px, py) = if inverse { (&self.ix, &self.iy) } else { (&self.fx, &self.fy) };
        py.process_with_scratch(data, &mut self.scratch);
        for i in 0..nx {
            for j in 0..ny {
                self.col[j * nx + i] = data[i * ny + j];
            }
        }
        px.process_with_scratch(&mut self.col, &mut self.scratch);
        for i in 0..nx {
            for j in 0..ny {
                data[i * ny + j] = self.col[j * nx + i];
            }
        }
        if inverse {
            let s = 1.0 / (nx * ny) as f64;
            for v in data.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn forward(&mut self, data: &mut [C]) {
        self.run(data, false);
    }

    pub fn inverse(&mut self, data: &mut [C]) {
        self.run(data, true);
    }

    pub fn forward_real(&mut self, f: &RealField2D) -> SpectralField2D {
        let mut data = f.to_complex();
        self.forward(&mut data);
        SpectralField2D { grid: f.grid, data, hermitian: true }
    }

    /// Inverse transform keeping the real part.
    pub fn inverse_real(&mut self, s: &SpectralField2D) -> RealField2D {
        let mut data = s.data.clone();
        self.inverse(&mut data);
        RealField2D { grid: s.grid, data: data.iter().map(|c| c.re).collect() }
    }

    /// Inverse transform of a spectrum, returning the complex field.
    pub fn inverse_complex(&mut self, spec: &[C]) -> Vec<C> {
        let mut data = spec.to_vec();
        self.inverse(&mut data);
        data
    }

    /// Applies the multiplier m(kx, ky) to a real field.
    pub fn apply_real(&mut self, f: &RealField2D, m: impl Fn(usize, usize) -> C) -> RealField2D {
        let mut s = self.forward_real(f);
        let ny = self.grid.ny;
        for ix in 0..self.grid.nx {
            for iy in 0..ny {
                s.data[ix * ny + iy] *= m(ix, iy);
            }
        }
        self.inverse_real(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(32, 16, 2.0 * std::f64::consts::PI, 4.0).unwrap()
    }

    #[test]
    fn validation() {
        assert!(GridSpec::new(12, 16, 1.0, 1.0).is_err());
        assert!(GridSpec::new(4, 16, 1.0, 1.0).is_err());
        assert!(GridSpec::new(16, 16, -1.0, 1.0).is_err());
        assert!(GridSpec::new(16, 16, 1.0, 1.0).is_ok());
    }

    #[test]
    fn roundtrip_and_parseval() {
        let g = grid();
        let f = RealField2D::from_fn(g, |x, y| (x.sin() + 0.3 * (2.0 * x).cos()) * (0.5 * std::f64::consts::PI * y).cos() + 0.1);
        let mut fft = Fft2::new(g);
        let s = fft.forward_real(&f);
        assert!(s.hermitian_residue() < 1e-14);
        let back = fft.inverse_real(&s);
        assert!(rel_l2(&back, &f) < 1e-14);
        let e_spec: f64 = s.data.iter().map(|c| c.norm_sqr()).sum::<f64>() / g.len() as f64;
        let e_phys: f64 = f.data.iter().map(|v| v * v).sum();
        assert!((e_spec - e_phys).abs() < 1e-12 * e_phys);
    }

    #[test]
    fn derivative_of_single_mode() {
        let g = grid();
        let ky0 = 2.0 * std::f64::consts::PI / g.ly;
        let f = RealField2D::from_fn(g, |x, y| (3.0 * x + ky0 * y).sin());
        let mut fft = Fft2::new(g);
        let d = fft.apply_real(&f, |ix, _| g.ikx(ix));
        let exact = RealField2D::from_fn(g, |x, y| 3.0 * (3.0 * x + ky0 * y).cos());
        assert!(rel_l2(&d, &exact) < 1e-13);
    }

    #[test]
    fn mask_and_neg() {
        let g = grid();
        let m = g.dealias_mask();
        assert!(m[0]);
        assert!(!m[(g.nx / 2) * g.ny]);
        assert_eq!(g.neg(0, 0), 0);
        assert_eq!(g.neg(1, 2), (g.nx - 1) * g.ny + g.ny - 2);
    }
}
