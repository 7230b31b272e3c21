//! Discrete Bourgain-space toolbox: cutoffs, dyadic projections, the
//! X^{s,b} norm, the bilinear ratio and a resonance-set probe.
//!
//! Space-time spectra use the spatial kernel e^{−iξ·x} and the temporal
//! kernel e^{+iτt}, so a free wave e^{i(ξ·x − w(ξ)t)} sits on σ = τ − w(ξ) = 0.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{require, NvError, Result};
use crate::grid::{signed_index, GridSpec};
use crate::symbol::{dispersion, resonance_dh_raw, resonance_raw, Axis, EnergyParam};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Quintic smoothstep 6x⁵ − 15x⁴ + 10x³ clamped to [0, 1]; C² at both ends.
fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

/// φ̃: 1 on [−1/2, 1/2], 0 outside (−1, 1), C² in between.
pub fn phi_tilde(s: f64) -> f64 {
    1.0 - smoothstep(2.0 * s.abs() - 1.0)
}

/// Ring function φ(s) = φ̃(s) − φ̃(2s).
pub fn phi_ring(s: f64) -> f64 {
    phi_tilde(s) - phi_tilde(2.0 * s)
}

/// Shell cutoff: φ̃(s) for N = 1 and φ(s/N) for N ≥ 2, so that Σ_N φ_N = 1.
pub fn phi_n(n: u64, s: f64) -> f64 {
    if n <= 1 {
        phi_tilde(s)
    } else {
        phi_ring(s / n as f64)
    }
}

/// Dyadic shells 1, 2, 4, ... up to and including `max`.
pub fn dyadic_shells(max: u64) -> Vec<u64> {
    let mut v = vec![1];
    while *v.last().unwrap() < max {
        v.push(v.last().unwrap() * 2);
    }
    v
}

/// Dyadic shell carrying the largest weight φ_N(s).
pub fn dominant_shell(s: f64) -> u64 {
    let mut best = (1u64, phi_n(1, s));
    let mut n = 2u64;
    while (n as f64) < 8.0 * s.abs().max(1.0) {
        let w = phi_n(n, s);
        if w > best.1 {
            best = (n, w);
        }
        n *= 2;
    }
    best.0
}

/// Time window applied to space-time samples before any norm is taken.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    /// No windowing; the field is taken as periodic in time.
    Periodic,
    /// 1 in the middle with C² smoothstep ramps of relative length `ramp` at each end.
    Bump { ramp: f64 },
}

impl Default for Window {
    fn default() -> Self {
        Window::Bump { ramp: 0.25 }
    }
}

impl Window {
    pub fn value(&self, t: f64, t_len: f64) -> f64 {
        match *self {
            Window::Periodic => 1.0,
            Window::Bump { ramp } => {
                let r = ramp * t_len;
                smoothstep(t / r).min(smoothstep((t_len - t) / r))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Window::Periodic => Ok(()),
            Window::Bump { ramp } => require(ramp > 0.0 && ramp <= 0.5, || format!("window ramp must lie in (0, 1/2], got {ramp}")),
        }
    }
}

/// Periodic space-time grid: `nt` samples on [0, t_len) times a spatial grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub nt: usize,
    pub t_len: f64,
    pub space: GridSpec,
}

impl SpaceTimeGrid {
    pub fn new(nt: usize, t_len: f64, space: GridSpec) -> Result<Self> {
        require(nt >= 8 && nt.is_power_of_two(), || format!("nt must be a power of two >= 8, got {nt}"))?;
        require(t_len > 0.0 && t_len.is_finite(), || format!("time window must be positive, got {t_len}"))?;
        space.validate()?;
        Ok(Self { nt, t_len, space })
    }

    pub fn len(&self) -> usize {
        self.nt * self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dt(&self) -> f64 {
        self.t_len / self.nt as f64
    }

    pub fn t(&self, it: usize) -> f64 {
        it as f64 * self.dt()
    }

    pub fn tau(&self, it: usize) -> f64 {
        signed_index(it, self.nt) as f64 * 2.0 * std::f64::consts::PI / self.t_len
    }

    pub fn cell_volume(&self) -> f64 {
        self.dt() * self.space.cell_area()
    }

    /// Same box and window with every sample count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let s = GridSpec { nx: self.space.nx * factor, ny: self.space.ny * factor, ..self.space };
        Self::new(self.nt * factor, self.t_len, s)
    }
}

/// Complex samples on a space-time grid, index (it·nx + ix)·ny + iy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    pub grid: SpaceTimeGrid,
    pub window: Window,
    pub data: Vec<C>,
}

impl SpaceTimeField {
    pub fn zeros(grid: SpaceTimeGrid, window: Window) -> Self {
        Self { grid, window, data: vec![ZERO; grid.len()] }
    }

    /// Samples f(t, x, y) and multiplies by the window.
    pub fn from_fn(grid: SpaceTimeGrid, window: Window, f: impl Fn(f64, f64, f64) -> C) -> Result<Self> {
        window.validate()?;
        let g = grid.space;
        let mut data = Vec::with_capacity(grid.len());
        for it in 0..grid.nt {
            let t = grid.t(it);
            let w = window.value(t, grid.t_len);
            for ix in 0..g.nx {
                let x = g.x(ix);
                for iy in 0..g.ny {
                    data.push(w * f(t, x, g.y(iy)));
                }
            }
        }
        Ok(Self { grid, window, data })
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// Pointwise product; the window of the result is that of `self`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(NvError::InvalidInput("space-time grids differ".into()));
        }
        Ok(Self {
            grid: self.grid,
            window: self.window,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }
}

/// Three planned 1-D transforms applied along t, x and y.
struct Fft3 {
    grid: SpaceTimeGrid,
    plans: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    fn new(grid: SpaceTimeGrid) -> Self {
        let mut p = FftPlanner::new();
        let (nt, nx, ny) = (grid.nt, grid.space.nx, grid.space.ny);
        // time carries the opposite sign: e^{+iτt} forward
        let plans = [p.plan_fft_inverse(nt), p.plan_fft_forward(nx), p.plan_fft_forward(ny)];
        let inverse = [p.plan_fft_forward(nt), p.plan_fft_inverse(nx), p.plan_fft_inverse(ny)];
        Self { grid, plans, inverse }
    }

    fn apply(&self, data: &mut [C], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let (nt, nx, ny) = (self.grid.nt, self.grid.space.nx, self.grid.space.ny);
        let dims = [nt, nx, ny];
        let strides = [nx * ny, ny, 1];
        for axis in 0..3 {
            let n = dims[axis];
            let stride = strides[axis];
            let mut line = vec![ZERO; n];
            let mut scratch = vec![ZERO; plans[axis].get_inplace_scratch_len()];
            for base in 0..data.len() {
                // a line starts where the index along `axis` is zero
                if (base / stride) % n != 0 {
                    continue;
                }
                for k in 0..n {
                    line[k] = data[base + k * stride];
                }
                plans[axis].process_with_scratch(&mut line, &mut scratch);
                for k in 0..n {
                    data[base + k * stride] = line[k];
                }
            }
        }
    }

    fn forward(&self, data: &mut [C]) {
        self.apply(data, &self.plans);
    }

    fn inverse(&self, data: &mut [C]) {
        self.apply(data, &self.inverse);
        let s = 1.0 / data.len() as f64;
        for c in data.iter_mut() {
            *c *= s;
        }
    }
}

/// Unnormalized space-time spectrum.
pub fn spectrum(f: &SpaceTimeField) -> Vec<C> {
    let mut d = f.data.clone();
    Fft3::new(f.grid).forward(&mut d);
    d
}

/// Visits every spectral index with (τ, ξ1, ξ2).
fn for_each_mode(g: &SpaceTimeGrid, mut f: impl FnMut(usize, f64, f64, f64)) {
    let s = g.space;
    for it in 0..g.nt {
        let tau = g.tau(it);
        for ix in 0..s.nx {
            let k1 = s.kx(ix);
            for iy in 0..s.ny {
                f((it * s.nx + ix) * s.ny + iy, tau, k1, s.ky(iy));
            }
        }
    }
}

fn apply_weight(f: &SpaceTimeField, weight: impl Fn(f64, f64, f64) -> f64) -> SpaceTimeField {
    let fft = Fft3::new(f.grid);
    let mut d = f.data.clone();
    fft.forward(&mut d);
    for_each_mode(&f.grid, |i, tau, k1, k2| d[i] *= weight(tau, k1, k2));
    fft.inverse(&mut d);
    SpaceTimeField { grid: f.grid, window: f.window, data: d }
}

/// P_N: multiplies the spatial spectrum by φ_N(|E|^{−1/2}|ξ|).
pub fn project_pn(f: &SpaceTimeField, n: u64, e: EnergyParam) -> Result<SpaceTimeField> {
    let e = EnergyParam::negative(e.value())?;
    let a = e.abs().powf(-0.5);
    Ok(apply_weight(f, |_, k1, k2| phi_n(n, a * k1.hypot(k2))))
}

/// Q_L: multiplies the space-time spectrum by φ_L(|E|^{−3/2}|τ − w(ξ)|).
pub fn project_ql(f: &SpaceTimeField, l: u64, e: EnergyParam) -> Result<SpaceTimeField> {
    let e = EnergyParam::negative(e.value())?;
    let a = e.abs().powf(-1.5);
    let ev = e.value();
    Ok(apply_weight(f, |tau, k1, k2| phi_n(l, a * (tau - dispersion(k1, k2, ev)).abs())))
}

/// Weighting of frequencies and modulations in the norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// ⟨σ⟩^{2b}⟨|ξ|⟩^{2s}.
    #[default]
    Plain,
    /// ⟨|E|^{−3/2}σ⟩^{2b}⟨|E|^{−1/2}|ξ|⟩^{2s}, matching the shell scales.
    Energy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XsbSpec {
    pub s: f64,
    pub b: f64,
    pub eps: f64,
    pub e: EnergyParam,
    #[serde(default)]
    pub normalization: Normalization,
}

impl XsbSpec {
    pub fn new(s: f64, b: f64, eps: f64, e: f64) -> Result<Self> {
        let e = EnergyParam::negative(e)?;
        require(eps > 0.0 && eps.is_finite(), || format!("eps must be positive, got {eps}"))?;
        require(s.is_finite() && b.is_finite(), || "s and b must be finite".into())?;
        Ok(Self { s, b, eps, e, normalization: Normalization::Plain })
    }

    pub fn with_normalization(mut self, n: Normalization) -> Self {
        self.normalization = n;
        self
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    /// ⟨σ⟩^{2b}⟨|ξ|⟩^{2s} under the chosen normalization.
    pub fn weight(&self, tau: f64, k1: f64, k2: f64) -> f64 {
        let (a, c) = match self.normalization {
            Normalization::Plain => (1.0, 1.0),
            Normalization::Energy => (self.e.abs().powf(-0.5), self.e.abs().powf(-1.5)),
        };
        let xi2 = a * a * (k1 * k1 + k2 * k2);
        let sig = c * (tau - dispersion(k1, k2, self.e.value()));
        (1.0 + sig * sig).powf(self.b) * (1.0 + xi2).powf(self.s)
    }
}

/// Discrete (∫⟨σ⟩^{2b}⟨|ξ|⟩^{2s}|f̂|²)^{1/2}, with Parseval scaling so that
/// s = b = 0 returns the L² norm of the samples.
pub fn xsb_norm(f: &SpaceTimeField, spec: &XsbSpec) -> f64 {
    let d = spectrum(f);
    let mut acc = 0.0;
    for_each_mode(&f.grid, |i, tau, k1, k2| acc += spec.weight(tau, k1, k2) * d[i].norm_sqr());
    (acc * f.grid.cell_volume() / f.grid.len() as f64).sqrt()
}

/// Both normalizations of the norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XsbNorms {
    pub plain: f64,
    pub energy: f64,
}

pub fn xsb_norms(f: &SpaceTimeField, spec: &XsbSpec) -> XsbNorms {
    XsbNorms {
        plain: xsb_norm(f, &spec.with_normalization(Normalization::Plain)),
        energy: xsb_norm(f, &spec.with_normalization(Normalization::Energy)),
    }
}

/// Spatial ∂z = ½(∂x − i∂y) applied spectrally.
pub fn apply_dz(f: &SpaceTimeField) -> SpaceTimeField {
    let s = f.grid.space;
    let fft = Fft3::new(f.grid);
    let mut d = f.data.clone();
    fft.forward(&mut d);
    for_each_mode(&f.grid, |i, _, _, _| {
        let ix = (i / s.ny) % s.nx;
        let iy = i % s.ny;
        d[i] *= 0.5 * (s.ikx(ix) - C::i() * s.iky(iy));
    });
    fft.inverse(&mut d);
    SpaceTimeField { grid: f.grid, window: f.window, data: d }
}

/// Fraction of spectral energy at spatial mode numbers |m| ≥ n/4 in either
/// direction, where a product would alias.
pub fn product_alias_fraction(f: &SpaceTimeField) -> f64 {
    let s = f.grid.space;
    let d = spectrum(f);
    let (mut tail, mut total) = (0.0, 0.0);
    for_each_mode(&f.grid, |i, _, _, _| {
        let mx = signed_index((i / s.ny) % s.nx, s.nx).unsigned_abs() as usize;
        let my = signed_index(i % s.ny, s.ny).unsigned_abs() as usize;
        let e = d[i].norm_sqr();
        total += e;
        if 4 * mx >= s.nx || 4 * my >= s.ny {
            tail += e;
        }
    });
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// ‖∂z(vw)‖_{X^{s,−1/2−2ε}} / (‖v‖_{X^{s,1/2+ε}}‖w‖_{X^{s,1/2+ε}}).
pub fn bilinear_ratio(v: &SpaceTimeField, w: &SpaceTimeField, spec: &XsbSpec) -> Result<f64> {
    require(spec.s > 0.5, || format!("bilinear estimate needs s > 1/2, got {}", spec.s))?;
    for (name, f) in [("v", v), ("w", w)] {
        let a = product_alias_fraction(f);
        if a > 1e-24 {
            return Err(NvError::Resolution(format!(
                "{name} has spectral energy fraction {a:.3e} above a quarter of the spatial band"
            )));
        }
    }
    let hi = spec.with_b(0.5 + spec.eps);
    let lo = spec.with_b(-0.5 - 2.0 * spec.eps);
    let den = xsb_norm(v, &hi) * xsb_norm(w, &hi);
    if den == 0.0 || !den.is_finite() {
        return Err(NvError::InvalidInput("bilinear ratio has a zero denominator".into()));
    }
    let prod = apply_dz(&v.mul(w)?);
    Ok(xsb_norm(&prod, &lo) / den)
}

/// Windowed superposition of `modes` free waves with random lattice
/// wavevectors |m_j| ≤ `max_mode` and random complex amplitudes.
pub fn random_free_wave(
    grid: SpaceTimeGrid,
    window: Window,
    e: f64,
    seed: u64,
    modes: usize,
    max_mode: i64,
) -> Result<SpaceTimeField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = grid.space;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut waves = Vec::with_capacity(modes);
    while waves.len() < modes {
        let (m1, m2) = (rng.gen_range(-max_mode..=max_mode), rng.gen_range(-max_mode..=max_mode));
        if m1 == 0 && m2 == 0 {
            continue;
        }
        let (k1, k2) = (two_pi * m1 as f64 / s.lx, two_pi * m2 as f64 / s.ly);
        let amp = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        waves.push((k1, k2, dispersion(k1, k2, e), amp));
    }
    SpaceTimeField::from_fn(grid, window, |t, x, y| {
        waves.iter().map(|&(k1, k2, w, a)| a * C::from_polar(1.0, k1 * x + k2 * y - w * t)).sum()
    })
}

/// Monte Carlo report on the resonance set
/// B = {ξ : |ξ| in shell N, |H[ξ, ξ̌] − c| ≤ |E|^{3/2}(L ∨ Ľ)} at fixed ξ̌ of radius |E|^{1/2}Ň.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub n: u64,
    pub n_hat: u64,
    pub l: u64,
    pub l_hat: u64,
    pub e: f64,
    pub samples: usize,
    /// Largest measure estimate over the sampled offsets c.
    pub measure: f64,
    /// |E|·N·Ň^{−2}·(L ∨ Ľ).
    pub bound: f64,
    pub measure_over_bound: f64,
    /// min over samples of max(|∂ξ1 H|, |∂ξ2 H|)/(|E|Ň²).
    pub min_derivative_ratio: f64,
    /// Set when the derivative ratio falls below 0.1.
    pub derivative_flag: bool,
}

/// Samples the resonance set; deterministic for a fixed seed.
#[allow(clippy::too_many_arguments)]
pub fn resonance_region_probe(
    n: u64,
    n_hat: u64,
    l: u64,
    l_hat: u64,
    e: f64,
    samples: usize,
    seed: u64,
    xi_hat_angle: f64,
) -> Result<ResonanceReport> {
    let e = EnergyParam::negative(e)?;
    for (name, v) in [("N", n), ("Nhat", n_hat), ("L", l), ("Lhat", l_hat)] {
        require(v >= 1 && v.is_power_of_two(), || format!("{name} must be a power of two >= 1, got {v}"))?;
    }
    require(n_hat >= 4 * n, || format!("low-high regime needs Nhat >= 4N, got N = {n}, Nhat = {n_hat}"))?;
    require(samples > 0, || "at least one sample is required".into())?;
    let k = e.abs();
    let rk = k.sqrt();
    // support of φ_N in |ξ|: (N/4, N)·|E|^{1/2}, or the disc of radius |E|^{1/2} for N = 1
    let r_out = rk * n as f64;
    let r_in = if n == 1 { 0.0 } else { r_out / 4.0 };
    let area = std::f64::consts::PI * (r_out * r_out - r_in * r_in);
    let rh = rk * n_hat as f64;
    let (h1, h2) = (rh * xi_hat_angle.cos(), rh * xi_hat_angle.sin());
    let band = k.powf(1.5) * l.max(l_hat) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hs = Vec::with_capacity(samples);
    let mut min_ratio = f64::INFINITY;
    let scale = k * (n_hat * n_hat) as f64;
    while hs.len() < samples {
        let r = (r_in * r_in + rng.gen::<f64>() * (r_out * r_out - r_in * r_in)).sqrt();
        let th = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        let (x1, x2) = (r * th.cos(), r * th.sin());
        if r == 0.0 {
            continue;
        }
        let (n1, n2) = (h1 - x1, h2 - x2);
        let d1 = resonance_dh_raw(x1, x2, n1, n2, k, Axis::Xi1);
        let d2 = resonance_dh_raw(x1, x2, n1, n2, k, Axis::Xi2);
        min_ratio = min_ratio.min(d1.abs().max(d2.abs()) / scale);
        hs.push(resonance_raw(x1, x2, h1, h2, e.value()));
    }
    let mut sorted = hs.clone();
    sorted.sort_by(f64::total_cmp);
    // offsets c at 33 quantiles of H; the count in [c − band, c + band] by bisection
    let mut best = 0usize;
    for q in 0..=32 {
        let c = sorted[(q * (sorted.len() - 1)) / 32];
        let lo = sorted.partition_point(|&h| h < c - band);
        let hi = sorted.partition_point(|&h| h <= c + band);
        best = best.max(hi - lo);
    }
    let measure = area * best as f64 / samples as f64;
    let bound = k * n as f64 * (l.max(l_hat) as f64) / (n_hat * n_hat) as f64;
    Ok(ResonanceReport {
        n,
        n_hat,
        l,
        l_hat,
        e: e.value(),
        samples,
        measure,
        bound,
        measure_over_bound: measure / bound,
        min_derivative_ratio: min_ratio,
        derivative_flag: min_ratio < 0.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st_grid(nt: usize, n: usize) -> SpaceTimeGrid {
        let two_pi = 2.0 * std::f64::consts::PI;
        SpaceTimeGrid::new(nt, 1.0, GridSpec::new(n, n, two_pi, two_pi).unwrap()).unwrap()
    }

    fn e1() -> EnergyParam {
        EnergyParam::negative(-1.0).unwrap()
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(phi_tilde(0.5), 1.0);
        assert_eq!(phi_tilde(-0.3), 1.0);
        assert_eq!(phi_tilde(1.0), 0.0);
        assert_eq!(phi_tilde(2.0), 0.0);
        assert!((phi_tilde(0.75) - 0.5).abs() < 1e-15);
        assert_eq!(phi_ring(0.5), 1.0);
    }

    #[test]
    fn partition_of_unity_on_log_grid() {
        let shells = dyadic_shells(1 << 22);
        for j in 0..=600 {
            let s = if j == 0 { 0.0 } else { 10f64.powf(-3.0 + 9.0 * j as f64 / 600.0) };
            let sum: f64 = shells.iter().map(|&n| phi_n(n, s)).sum();
            assert!((sum - 1.0).abs() < 1e-12, "s = {s}: {sum}");
        }
    }

    #[test]
    fn shell_membership_of_single_mode() {
        let g = st_grid(8, 32);
        let e = e1();
        // |ξ| = N/2 with N = 8: mode (4, 0) on a 2π box
        let f = SpaceTimeField::from_fn(g, Window::Periodic, |_, x, _| C::from_polar(1.0, 4.0 * x)).unwrap();
        let p = project_pn(&f, 8, e).unwrap();
        let q = project_pn(&f, 32, e).unwrap();
        assert!(p.data.iter().zip(&f.data).all(|(a, b)| (a - b).norm() < 1e-12));
        assert!(q.data.iter().all(|a| a.norm() < 1e-12));
    }

    #[test]
    fn projections_sum_to_identity() {
        let g = st_grid(32, 16);
        let f = random_free_wave(g, Window::default(), -1.0, 3, 4, 3).unwrap();
        let mut acc_p = SpaceTimeField::zeros(g, f.window);
        for n in dyadic_shells(64) {
            let p = project_pn(&f, n, e1()).unwrap();
            acc_p.data.iter_mut().zip(&p.data).for_each(|(a, b)| *a += b);
        }
        let mut acc_q = SpaceTimeField::zeros(g, f.window);
        for l in dyadic_shells(1 << 12) {
            let q = project_ql(&f, l, e1()).unwrap();
            acc_q.data.iter_mut().zip(&q.data).for_each(|(a, b)| *a += b);
        }
        let scale = f.data.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        for acc in [&acc_p, &acc_q] {
            let err = acc.data.iter().zip(&f.data).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            assert!(err < 1e-12 * scale, "{err}");
        }
    }

    #[test]
    fn disjoint_shells_annihilate() {
        let g = st_grid(8, 32);
        let f = random_free_wave(g, Window::Periodic, -1.0, 5, 6, 7).unwrap();
        let pq = project_pn(&project_pn(&f, 16, e1()).unwrap(), 4, e1()).unwrap();
        assert!(pq.data.iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn characteristic_mode_sits_in_first_modulation_shell() {
        let (k1, k2) = (1.0, 2.0);
        let w = dispersion(k1, k2, -1.0);
        // a window length that puts τ = w exactly on the lattice
        let space = GridSpec::new(16, 16, 2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI).unwrap();
        let g = SpaceTimeGrid::new(64, 2.0 * std::f64::consts::PI * 8.0 / w.abs(), space).unwrap();
        let f = SpaceTimeField::from_fn(g, Window::Periodic, |t, x, y| C::from_polar(1.0, k1 * x + k2 * y - w * t))
            .unwrap();
        let q1 = project_ql(&f, 1, e1()).unwrap();
        let ratio = q1.l2_norm() / f.l2_norm();
        assert!((ratio - 1.0).abs() < 1e-12, "{ratio}");
    }

    #[test]
    fn energy_doubling_keeps_modulation_shell_under_scaling() {
        let sp = |tau: f64, k1: f64, k2: f64, e: f64| {
            let a = e.abs().powf(-1.5);
            let s = a * (tau - dispersion(k1, k2, e)).abs();
            (s, dominant_shell(s))
        };
        let lam = 2f64.sqrt();
        let (s1, n1) = sp(40.0, 1.3, 0.4, -1.0);
        let (s2, n2) = sp(40.0 * lam.powi(3), 1.3 * lam, 0.4 * lam, -2.0);
        assert!((s1 - s2).abs() < 1e-12 * s1);
        assert_eq!(n1, n2);
        // without rescaling τ and ξ the shell moves
        let (_, n3) = sp(40.0, 1.3, 0.4, -2.0);
        assert_ne!(n1, n3);
    }

    #[test]
    fn zero_field_and_l2_consistency() {
        let g = st_grid(16, 16);
        let spec = XsbSpec::new(0.0, 0.0, 0.05, -1.0).unwrap();
        assert_eq!(xsb_norm(&SpaceTimeField::zeros(g, Window::Periodic), &spec), 0.0);
        let f = random_free_wave(g, Window::default(), -1.0, 1, 3, 2).unwrap();
        assert!((xsb_norm(&f, &spec) - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn norm_monotone_in_s_and_b() {
        let g = st_grid(32, 16);
        let f = random_free_wave(g, Window::default(), -1.0, 9, 4, 3).unwrap();
        let n = |s: f64, b: f64| xsb_norm(&f, &XsbSpec::new(s, b, 0.05, -1.0).unwrap());
        assert!(n(0.5, 0.3) <= n(1.0, 0.3));
        assert!(n(0.5, 0.3) <= n(0.5, 0.6));
    }

    #[test]
    fn bilinear_ratio_is_symmetric() {
        let g = st_grid(64, 16);
        let spec = XsbSpec::new(0.75, 0.0, 0.05, -1.0).unwrap();
        let v = random_free_wave(g, Window::default(), -1.0, 11, 3, 2).unwrap();
        let w = random_free_wave(g, Window::default(), -1.0, 12, 3, 2).unwrap();
        let a = bilinear_ratio(&v, &w, &spec).unwrap();
        let b = bilinear_ratio(&w, &v, &spec).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn bilinear_preconditions() {
        let g = st_grid(16, 16);
        let spec = XsbSpec::new(0.75, 0.0, 0.05, -1.0).unwrap();
        let z = SpaceTimeField::zeros(g, Window::Periodic);
        assert!(bilinear_ratio(&z, &z, &spec).is_err());
        let wide = random_free_wave(g, Window::Periodic, -1.0, 1, 3, 7).unwrap();
        assert!(matches!(bilinear_ratio(&wide, &wide, &spec), Err(NvError::Resolution(_))));
        let low_s = XsbSpec::new(0.4, 0.0, 0.05, -1.0).unwrap();
        let v = random_free_wave(g, Window::Periodic, -1.0, 1, 2, 2).unwrap();
        assert!(bilinear_ratio(&v, &v, &low_s).is_err());
    }

    #[test]
    fn resonance_probe_basics() {
        assert!(resonance_region_probe(1, 2, 1, 1, -1.0, 100, 0, 0.3).is_err());
        let r = resonance_region_probe(1, 16, 1, 1, -1.0, 10_000, 7, 0.3).unwrap();
        assert!(r.min_derivative_ratio > 0.0);
        assert!(r.measure > 0.0);
    }
}
