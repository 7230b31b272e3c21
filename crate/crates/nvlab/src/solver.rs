//! Pseudo-spectral evolution of the Novikov-Veselov system on a periodic box.
//!
//! The evolution equation is
//!   ∂t v = 8(∂z³ + ∂z̄³)v + 2∂z(vw) + 2∂z̄(vw̄) − 2E(∂z w + ∂z̄ w̄),
//!   ∂z̄ w = −3∂z v,
//! with ŵ = −3·((ξ1 − iξ2)/(ξ1 + iξ2))·v̂ and ŵ(0) = 0.
//! In the FFT convention of [`crate::grid`] the linear part acts on v̂ as
//! multiplication by −i·p(k; E), with p the dispersion relation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require, require_finite, NvError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{enforce_hermitian, rel_l2, tail_fraction, Fft2, GridSpec, RealField2D, SpectralField2D};
use crate::symbol::dispersion;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Solution snapshot: v, the two real components of w = w1 + i·w2, time and energy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NvState {
    pub v: RealField2D,
    pub w1: RealField2D,
    pub w2: RealField2D,
    pub t: f64,
    pub e: f64,
}

impl NvState {
    /// Builds a state at time `t` with w computed from v.
    pub fn new(v: RealField2D, e: f64, t: f64) -> Result<Self> {
        v.grid.validate()?;
        require_finite("E", e)?;
        require_finite("t", t)?;
        require(v.is_finite(), || "initial field contains non-finite samples".into())?;
        let mut fft = Fft2::new(v.grid);
        let (w1, w2) = compute_w_with(&mut fft, &v);
        Ok(Self { v, w1, w2, t, e })
    }

    pub fn grid(&self) -> GridSpec {
        self.v.grid
    }

    /// w as a complex field.
    pub fn w(&self) -> Vec<C> {
        self.w1.data.iter().zip(&self.w2.data).map(|(&a, &b)| C::new(a, b)).collect()
    }
}

/// Fourier multipliers of w1 and w2 at wavevector (kx, ky).
fn w_multipliers(kx: f64, ky: f64) -> (f64, f64) {
    let k2 = kx * kx + ky * ky;
    if k2 == 0.0 {
        (0.0, 0.0)
    } else {
        (-3.0 * (kx * kx - ky * ky) / k2, 6.0 * kx * ky / k2)
    }
}

/// Spectra of w1 and w2 from v̂. The w2 multiplier is odd in each wavenumber,
/// so it is dropped on Nyquist lines where −k aliases to k.
fn w_spectra(g: &GridSpec, vhat: &[C]) -> (Vec<C>, Vec<C>) {
    let mut w1 = vec![ZERO; g.len()];
    let mut w2 = vec![ZERO; g.len()];
    for ix in 0..g.nx {
        let kx = g.kx(ix);
        for iy in 0..g.ny {
            let i = ix * g.ny + iy;
            let (m1, m2) = w_multipliers(kx, g.ky(iy));
            w1[i] = m1 * vhat[i];
            if !g.is_nyquist_x(ix) && !g.is_nyquist_y(iy) {
                w2[i] = m2 * vhat[i];
            }
        }
    }
    (w1, w2)
}

fn compute_w_with(fft: &mut Fft2, v: &RealField2D) -> (RealField2D, RealField2D) {
    let g = v.grid;
    let s = fft.forward_real(v);
    let (a, b) = w_spectra(&g, &s.data);
    let re = |x: Vec<C>| RealField2D { grid: g, data: x.iter().map(|c| c.re).collect() };
    (re(fft.inverse_complex(&a)), re(fft.inverse_complex(&b)))
}

/// Returns (w1, w2) with ŵ = −3·((ξ1 − iξ2)/(ξ1 + iξ2))·v̂ and ŵ(0) = 0.
pub fn compute_w(v: &RealField2D) -> (RealField2D, RealField2D) {
    let mut fft = Fft2::new(v.grid);
    compute_w_with(&mut fft, v)
}

/// Spectral ∂z = ½(∂x − i∂y) at grid index (ix, iy).
fn dz(g: &GridSpec, ix: usize, iy: usize) -> C {
    0.5 * (g.ikx(ix) - C::i() * g.iky(iy))
}

/// Spectral ∂z̄ = ½(∂x + i∂y).
fn dzbar(g: &GridSpec, ix: usize, iy: usize) -> C {
    0.5 * (g.ikx(ix) + C::i() * g.iky(iy))
}

/// Right-hand side evaluator bound to one grid and energy.
pub struct NvOperator {
    grid: GridSpec,
    e: f64,
    fft: Fft2,
    mask: Vec<bool>,
}

impl NvOperator {
    pub fn new(grid: GridSpec, e: f64) -> Result<Self> {
        grid.validate()?;
        require_finite("E", e)?;
        Ok(Self { grid, e, fft: Fft2::new(grid), mask: grid.dealias_mask() })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn check(&self, v: &RealField2D) -> Result<()> {
        if v.grid != self.grid {
            return Err(NvError::InvalidInput("field grid does not match operator grid".into()));
        }
        Ok(())
    }

    fn masked(&self, mut s: Vec<C>) -> Vec<C> {
        for (c, keep) in s.iter_mut().zip(&self.mask) {
            if !keep {
                *c = ZERO;
            }
        }
        s
    }

    /// Physical products v·w1 and v·w2 from v̂, plus max|w|.
    fn products(&mut self, vhat: &[C]) -> (Vec<C>, Vec<C>, f64) {
        let (w1h, w2h) = w_spectra(&self.grid, vhat);
        let v = self.fft.inverse_complex(vhat);
        let w1 = self.fft.inverse_complex(&w1h);
        let w2 = self.fft.inverse_complex(&w2h);
        let mut p1 = Vec::with_capacity(v.len());
        let mut p2 = Vec::with_capacity(v.len());
        let mut wmax: f64 = 0.0;
        for i in 0..v.len() {
            let (vr, a, b) = (v[i].re, w1[i].re, w2[i].re);
            p1.push(C::new(vr * a, 0.0));
            p2.push(C::new(vr * b, 0.0));
            wmax = wmax.max(a.hypot(b));
        }
        self.fft.forward(&mut p1);
        self.fft.forward(&mut p2);
        (p1, p2, wmax)
    }

    /// Dealiased spectrum of the quadratic term 2[∂x(v w1) + ∂y(v w2)], and max|w|.
    pub fn nonlinear_hat(&mut self, vhat: &[C]) -> (Vec<C>, f64) {
        let (p1, p2, wmax) = self.products(vhat);
        let g = self.grid;
        let mut out = vec![ZERO; g.len()];
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                let i = ix * g.ny + iy;
                out[i] = 2.0 * (g.ikx(ix) * p1[i] + g.iky(iy) * p2[i]);
            }
        }
        (self.masked(out), wmax)
    }

    /// Linear symbol −i·p(k; E) at every grid index.
    pub fn linear_symbol(&self) -> Vec<C> {
        let g = self.grid;
        let mut l = vec![ZERO; g.len()];
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                // odd symbol: drop Nyquist lines so the flow preserves reality
                if g.is_nyquist_x(ix) || g.is_nyquist_y(iy) {
                    continue;
                }
                l[ix * g.ny + iy] = C::new(0.0, -dispersion(g.kx(ix), g.ky(iy), self.e));
            }
        }
        l
    }

    /// Real form: 2[∂x(v_xx − 3v_yy) + ∂x(v w1) + ∂y(v w2) − E(∂x w1 + ∂y w2)].
    pub fn rhs_real_form(&mut self, v: &RealField2D) -> Result<RealField2D> {
        self.check(v)?;
        let g = self.grid;
        let vhat = self.fft.forward_real(v).data;
        let (w1h, w2h) = w_spectra(&g, &vhat);
        let (nl, _) = self.nonlinear_hat(&vhat);
        let mut out = vec![ZERO; g.len()];
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                let i = ix * g.ny + iy;
                let (ax, ay) = (g.ikx(ix), g.iky(iy));
                let lin = ax * (ax * ax - 3.0 * ay * ay) * vhat[i];
                let ew = ax * w1h[i] + ay * w2h[i];
                out[i] = 2.0 * (lin - self.e * ew) + nl[i];
            }
        }
        let data = self.fft.inverse_complex(&out);
        Ok(RealField2D { grid: g, data: data.iter().map(|c| c.re).collect() })
    }

    /// Complex form 8(∂z³ + ∂z̄³)v + 2∂z(vw) + 2∂z̄(vw̄) − 2E(∂z w + ∂z̄ w̄),
    /// with all complex fields carried explicitly. Returns the real part and
    /// the imaginary residue relative to the largest value.
    pub fn rhs_complex_form(&mut self, v: &RealField2D) -> Result<(RealField2D, f64)> {
        self.check(v)?;
        let g = self.grid;
        let n = g.len();
        let vhat = self.fft.forward_real(v).data;
        let (w1h, w2h) = w_spectra(&g, &vhat);
        let what: Vec<C> = w1h.iter().zip(&w2h).map(|(a, b)| a + C::i() * b).collect();
        let w = self.fft.inverse_complex(&what);
        let vv = self.fft.inverse_complex(&vhat);
        let mut vw: Vec<C> = (0..n).map(|i| vv[i].re * w[i]).collect();
        let mut vwc: Vec<C> = (0..n).map(|i| vv[i].re * w[i].conj()).collect();
        let mut wc: Vec<C> = w.iter().map(|c| c.conj()).collect();
        self.fft.forward(&mut vw);
        self.fft.forward(&mut vwc);
        self.fft.forward(&mut wc);
        let vw = self.masked(vw);
        let vwc = self.masked(vwc);
        let mut out = vec![ZERO; n];
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                let i = ix * g.ny + iy;
                let (a, b) = (dz(&g, ix, iy), dzbar(&g, ix, iy));
                out[i] = 8.0 * (a * a * a + b * b * b) * vhat[i] + 2.0 * a * vw[i] + 2.0 * b * vwc[i]
                    - 2.0 * self.e * (a * what[i] + b * wc[i]);
            }
        }
        let data = self.fft.inverse_complex(&out);
        let scale = data.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let imag = data.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
        let residue = if scale == 0.0 { 0.0 } else { imag / scale };
        Ok((RealField2D { grid: g, data: data.iter().map(|c| c.re).collect() }, residue))
    }
}

/// Evaluates the right-hand side in complex form.
pub fn nv_rhs(state: &NvState) -> Result<RealField2D> {
    let mut op = NvOperator::new(state.grid(), state.e)?;
    Ok(op.rhs_complex_form(&state.v)?.0)
}

/// Evaluates the right-hand side in the real form.
pub fn nv_rhs_real_form(state: &NvState) -> Result<RealField2D> {
    let mut op = NvOperator::new(state.grid(), state.e)?;
    op.rhs_real_form(&state.v)
}

/// Default step 1e-3·(Lx/nx).
pub fn default_dt(grid: &GridSpec) -> f64 {
    1e-3 * grid.dx()
}

/// Scalar coefficients of ETDRK4 for one linear eigenvalue, by a contour mean.
fn etd_coefficients(z: C, h: f64) -> [C; 4] {
    const M: usize = 64;
    let mut acc = [ZERO; 4];
    for j in 0..M {
        let r = C::from_polar(1.0, std::f64::consts::PI * (j as f64 + 0.5) / M as f64 * 2.0);
        let s = z + r;
        let es = s.exp();
        let s3 = s * s * s;
        acc[0] += ((0.5 * s).exp() - 1.0) / s;
        acc[1] += (-4.0 - s + es * (4.0 - 3.0 * s + s * s)) / s3;
        acc[2] += (2.0 + s + es * (s - 2.0)) / s3;
        acc[3] += (-4.0 - 3.0 * s - s * s + es * (4.0 - s)) / s3;
    }
    acc.map(|a| h * a / M as f64)
}

/// ETDRK4 coefficients for one diagonal linear symbol and step size.
pub(crate) struct Etd {
    pub(crate) dt: f64,
    e: Vec<C>,
    e2: Vec<C>,
    q: Vec<C>,
    f1: Vec<C>,
    f2: Vec<C>,
    f3: Vec<C>,
}

impl Etd {
    pub(crate) fn new(lin: &[C], dt: f64) -> Self {
        let n = lin.len();
        let mut c = Etd {
            dt,
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for &l in lin {
            let z = l * dt;
            let [q, f1, f2, f3] = etd_coefficients(z, dt);
            c.e.push(z.exp());
            c.e2.push((0.5 * z).exp());
            c.q.push(q);
            c.f1.push(f1);
            c.f2.push(f2);
            c.f3.push(f3);
        }
        c
    }

    /// One step of u' = Lu + N(u) in spectral space; `nu` is N(u) at the
    /// current state, `n` evaluates N at the intermediate stages.
    pub(crate) fn step(&self, vhat: &mut [C], nu: &[C], mut n: impl FnMut(&[C]) -> Vec<C>) {
        let len = vhat.len();
        let a: Vec<C> = (0..len).map(|i| self.e2[i] * vhat[i] + self.q[i] * nu[i]).collect();
        let na = n(&a);
        let b: Vec<C> = (0..len).map(|i| self.e2[i] * vhat[i] + self.q[i] * na[i]).collect();
        let nb = n(&b);
        let c: Vec<C> = (0..len).map(|i| self.e2[i] * a[i] + self.q[i] * (2.0 * nb[i] - nu[i])).collect();
        let nc = n(&c);
        for i in 0..len {
            vhat[i] = self.e[i] * vhat[i] + self.f1[i] * nu[i] + 2.0 * self.f2[i] * (na[i] + nb[i]) + self.f3[i] * nc[i];
        }
    }
}

/// Fourth-order exponential time differencing (Cox-Matthews with the
/// Kassam-Trefethen contour evaluation of the coefficients).
pub struct NvSolver {
    op: NvOperator,
    lin: Vec<C>,
    nonlinear: bool,
    cfl: bool,
    etd: Option<Etd>,
}

impl NvSolver {
    pub fn new(grid: GridSpec, e: f64) -> Result<Self> {
        let op = NvOperator::new(grid, e)?;
        let lin = op.linear_symbol();
        Ok(Self { op, lin, nonlinear: true, cfl: true, etd: None })
    }

    /// Drops the quadratic terms so only the linear flow remains.
    pub fn linear_only(mut self, yes: bool) -> Self {
        self.nonlinear = !yes;
        self
    }

    /// Disables the advective step-size check.
    pub fn without_cfl_check(mut self) -> Self {
        self.cfl = false;
        self
    }

    pub fn grid(&self) -> &GridSpec {
        self.op.grid()
    }

    fn prepare(&mut self, dt: f64) {
        if !self.etd.as_ref().is_some_and(|c| c.dt == dt) {
            self.etd = Some(Etd::new(&self.lin, dt));
        }
    }

    fn n_hat(&mut self, vhat: &[C]) -> (Vec<C>, f64) {
        if self.nonlinear {
            self.op.nonlinear_hat(vhat)
        } else {
            (vec![ZERO; vhat.len()], 0.0)
        }
    }

    fn check_cfl(&self, dt: f64, wmax: f64) -> Result<()> {
        let g = self.op.grid();
        let limit = 0.5 * g.dx().min(g.dy());
        if self.cfl && dt * 2.0 * wmax > limit {
            return Err(NvError::Precondition(format!(
                "step size {dt:.3e} violates dt·2max|w| <= 0.5·min(dx, dy) (max|w| = {wmax:.3e})"
            )));
        }
        Ok(())
    }

    /// Advances the spectrum by one ETDRK4 step.
    fn step_hat(&mut self, vhat: &mut [C], dt: f64) -> Result<()> {
        self.prepare(dt);
        let (nu, wmax) = self.n_hat(vhat);
        self.check_cfl(dt, wmax)?;
        let c = self.etd.take().expect("coefficients prepared");
        let (op, nonlinear) = (&mut self.op, self.nonlinear);
        c.step(vhat, &nu, |x| if nonlinear { op.nonlinear_hat(x).0 } else { vec![ZERO; x.len()] });
        self.etd = Some(c);
        enforce_hermitian(self.op.grid(), vhat);
        Ok(())
    }

    fn to_hat(&mut self, state: &NvState) -> Result<Vec<C>> {
        if state.grid() != *self.op.grid() {
            return Err(NvError::InvalidInput("state grid does not match solver grid".into()));
        }
        if state.e != self.op.e {
            return Err(NvError::InvalidInput("state energy does not match solver energy".into()));
        }
        let s = self.op.fft.forward_real(&state.v).data;
        Ok(if self.nonlinear { self.op.masked(s) } else { s })
    }

    fn to_state(&mut self, vhat: &[C], t: f64) -> NvState {
        let g = *self.op.grid();
        let v = self.op.fft.inverse_complex(vhat);
        let v = RealField2D { grid: g, data: v.iter().map(|c| c.re).collect() };
        let (w1, w2) = compute_w_with(&mut self.op.fft, &v);
        NvState { v, w1, w2, t, e: self.op.e }
    }

    /// One step of size `dt`.
    pub fn step(&mut self, state: &NvState, dt: f64) -> Result<NvState> {
        self.evolve(state, dt, dt)
    }

    /// Integrates to time state.t + `duration` with steps no larger than `dt`.
    pub fn evolve(&mut self, state: &NvState, duration: f64, dt: f64) -> Result<NvState> {
        self.evolve_observed(state, duration, dt, 0, |_| {})
    }

    /// As [`NvSolver::evolve`], calling `observe` on the initial state and
    /// every `every` steps (and on the final state) when `every > 0`.
    pub fn evolve_observed(
        &mut self,
        state: &NvState,
        duration: f64,
        dt: f64,
        every: usize,
        mut observe: impl FnMut(&NvState),
    ) -> Result<NvState> {
        require(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))?;
        require(duration >= 0.0 && duration.is_finite(), || format!("duration must be >= 0, got {duration}"))?;
        let steps = (duration / dt - 1e-9).ceil().max(0.0) as usize;
        let h = if steps == 0 { dt } else { duration / steps as f64 };
        let mut vhat = self.to_hat(state)?;
        if every > 0 {
            observe(state);
        }
        let mut last = vhat.clone();
        for k in 0..steps {
            self.step_hat(&mut vhat, h)?;
            let t = state.t + (k + 1) as f64 * h;
            if vhat.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                let prev = self.to_state(&last, t - h);
                return Err(NvError::NanDetected { t, last_state: Box::new(prev) });
            }
            if every > 0 && (k + 1) % every == 0 && k + 1 != steps {
                let s = self.to_state(&vhat, t);
                observe(&s);
            }
            last.copy_from_slice(&vhat);
        }
        let out = self.to_state(&vhat, state.t + steps as f64 * h);
        if every > 0 && steps > 0 {
            observe(&out);
        }
        Ok(out)
    }
}

/// Conserved quantities ∫v, M = ∫vw and H = ∫[6∂z w ∂z v + E w² − v w²].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub l1_integral: f64,
    pub mass: Complex64,
    pub energy: Complex64,
}

impl InvariantReport {
    /// Largest drift of each quantity relative to its initial magnitude.
    pub fn relative_drift(&self, initial: &InvariantReport) -> [f64; 3] {
        let rel = |d: f64, s: f64| if s == 0.0 { d } else { d / s };
        [
            rel((self.l1_integral - initial.l1_integral).abs(), initial.l1_integral.abs()),
            rel((self.mass - initial.mass).norm(), initial.mass.norm()),
            rel((self.energy - initial.energy).norm(), initial.energy.norm()),
        ]
    }
}

/// Trapezoid-rule invariants with spectral derivatives.
pub fn invariants(state: &NvState) -> InvariantReport {
    let g = state.grid();
    let mut fft = Fft2::new(g);
    let vhat = fft.forward_real(&state.v).data;
    let w = state.w();
    let mut what = w.clone();
    fft.forward(&mut what);
    let mut dzv = vhat.clone();
    let mut dzw = what;
    for ix in 0..g.nx {
        for iy in 0..g.ny {
            let i = ix * g.ny + iy;
            let d = dz(&g, ix, iy);
            dzv[i] *= d;
            dzw[i] *= d;
        }
    }
    let dzv = fft.inverse_complex(&dzv);
    let dzw = fft.inverse_complex(&dzw);
    let da = g.cell_area();
    let mut mass = ZERO;
    let mut energy = ZERO;
    for i in 0..g.len() {
        let v = state.v.data[i];
        let wi = w[i];
        mass += v * wi;
        energy += 6.0 * dzw[i] * dzv[i] + state.e * wi * wi - v * wi * wi;
    }
    InvariantReport { l1_integral: state.v.integral(), mass: mass * da, energy: energy * da }
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_width() -> f64 {
    1.0
}

/// Analytic initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// amplitude·exp(−((x − x0)² + (y − y0)²)/width²).
    Gaussian {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        y0: f64,
    },
    /// −(c/2)·sech²(√c·x/2), the mapped KdV soliton at time 0.
    KdvSoliton { c: f64 },
    /// −2Δ log(a + c(x³ + y³) + d(x² + y²)²) sampled on the grid.
    Blowup { a: f64, c: f64, d: f64 },
    /// amplitude·cos(2π·kx·x/Lx + 2π·ky·y/Ly) with integer mode numbers.
    SingleMode {
        kx: i64,
        ky: i64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

impl InitialData {
    pub fn sample(&self, grid: GridSpec) -> Result<RealField2D> {
        grid.validate()?;
        let f = match *self {
            InitialData::Gaussian { amplitude, width, x0, y0 } => {
                require(width > 0.0, || format!("gaussian width must be positive, got {width}"))?;
                RealField2D::from_fn(grid, |x, y| {
                    amplitude * (-((x - x0).powi(2) + (y - y0).powi(2)) / (width * width)).exp()
                })
            }
            InitialData::KdvSoliton { c } => {
                require(c > 0.0, || format!("soliton speed must be positive, got {c}"))?;
                kdv_reference(grid, c, 0.0, 0.0, 0.0)
            }
            InitialData::Blowup { a, c, d } => {
                let p = BlowupParams { a, c, d };
                let f = RealField2D::from_fn(grid, |x, y| p.fields(x, y).map_or(f64::NAN, |s| s.v));
                if let Some(i) = f.data.iter().position(|v| v.is_nan()) {
                    let (x, y) = (grid.x(i / grid.ny), grid.y(i % grid.ny));
                    return Err(NvError::Precondition(format!(
                        "a + c(x³+y³) + d(x²+y²)² is not positive at ({x}, {y})"
                    )));
                }
                f
            }
            InitialData::SingleMode { kx, ky, amplitude } => {
                let (ax, ay) = (
                    2.0 * std::f64::consts::PI * kx as f64 / grid.lx,
                    2.0 * std::f64::consts::PI * ky as f64 / grid.ly,
                );
                RealField2D::from_fn(grid, |x, y| amplitude * (ax * x + ay * y).cos())
            }
        };
        Ok(f)
    }
}

/// Fraction of spectral energy outside the dealiased band.
pub fn spectral_tail(v: &RealField2D) -> f64 {
    let mut fft = Fft2::new(v.grid);
    let s = fft.forward_real(v);
    tail_fraction(&v.grid, &s.data)
}

/// Mapped KdV soliton on the periodic box at time `s`:
/// v(s, x) = −u(−2s, x + 6(E + m)s) with u(t, x) = (c/2)·sech²(√c(x − ct)/2),
/// where m is the box mean of v. Periodic images are summed.
pub fn kdv_reference(grid: GridSpec, c: f64, e: f64, mean: f64, s: f64) -> RealField2D {
    let shift = 6.0 * (e + mean) * s + 2.0 * c * s;
    let rc = c.sqrt();
    RealField2D::from_fn(grid, |x, _| {
        let mut acc = 0.0;
        let base = x + shift;
        let z = base - grid.lx * (base / grid.lx).round();
        for img in -2..=2 {
            let q = rc * (z + img as f64 * grid.lx) / 2.0;
            acc += 1.0 / q.cosh().powi(2);
        }
        -0.5 * c * acc
    })
}

/// Closed-form blow-up data at E = 0 from F = a − 24ct + c(x³ + y³) + d(x² + y²)².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupParams {
    pub a: f64,
    pub c: f64,
    pub d: f64,
}

/// v, w and ∂t v of the closed form at t = 0.
#[derive(Clone, Copy, Debug)]
pub struct BlowupFields {
    pub v: f64,
    pub w1: f64,
    pub w2: f64,
    pub vt: f64,
}

impl BlowupParams {
    /// F at t = 0.
    pub fn f(&self, x: f64, y: f64) -> f64 {
        let r2 = x * x + y * y;
        self.a + self.c * (x * x * x + y * y * y) + self.d * r2 * r2
    }

    /// Closed-form fields, or None where F ≤ 0.
    pub fn fields(&self, x: f64, y: f64) -> Option<BlowupFields> {
        let (c, d) = (self.c, self.d);
        let f = self.f(x, y);
        if f <= 0.0 || !f.is_finite() {
            return None;
        }
        let r2 = x * x + y * y;
        let fx = 3.0 * c * x * x + 4.0 * d * x * r2;
        let fy = 3.0 * c * y * y + 4.0 * d * y * r2;
        let fxx = 6.0 * c * x + 4.0 * d * r2 + 8.0 * d * x * x;
        let fyy = 6.0 * c * y + 4.0 * d * r2 + 8.0 * d * y * y;
        let fxy = 8.0 * d * x * y;
        let g2 = fx * fx + fy * fy;
        let lap = fxx + fyy;
        let lxx = fxx / f - fx * fx / (f * f);
        let lyy = fyy / f - fy * fy / (f * f);
        let lxy = fxy / f - fx * fy / (f * f);
        Some(BlowupFields {
            v: -2.0 * (lap / f - g2 / (f * f)),
            // w = 24∂z² log F
            w1: 6.0 * (lxx - lyy),
            w2: -12.0 * lxy,
            // ∂t v = 48c·Δ(1/F)
            vt: 48.0 * c * (-lap / (f * f) + 2.0 * g2 / (f * f * f)),
        })
    }
}

/// Sampling window for the blow-up residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupWindow {
    /// The window is [−half_width, half_width]².
    pub half_width: f64,
    /// Samples per side.
    pub samples: usize,
    /// Finite-difference step.
    pub h: f64,
}

impl Default for BlowupWindow {
    fn default() -> Self {
        Self { half_width: 5.0, samples: 201, h: 0.02 }
    }
}

/// Fornberg weights for derivative `order` on the nodes −p..=p (unit spacing).
fn fd_weights(order: usize, p: i64) -> Vec<f64> {
    let nodes: Vec<f64> = (-p..=p).map(|j| j as f64).collect();
    let n = nodes.len();
    let m = order;
    let mut c = vec![vec![vec![0.0; n]; n]; m + 1];
    c[0][0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..n {
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            for k in 0..=m.min(i) {
                let prev = if k > 0 { c[k - 1][i - 1][j] } else { 0.0 };
                c[k][i][j] = (nodes[i] * c[k][i - 1][j] - k as f64 * prev) / c3;
            }
        }
        for k in 0..=m.min(i) {
            let prev = if k > 0 { c[k - 1][i - 1][i - 1] } else { 0.0 };
            c[k][i][i] = c1 / c2 * (k as f64 * prev - nodes[i - 1] * c[k][i - 1][i - 1]);
        }
        c1 = c2;
    }
    (0..n).map(|j| c[m][n - 1][j]).collect()
}

/// Result of the blow-up residual evaluation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BlowupReport {
    /// sup|∂t v − RHS(v)| over the window divided by `scale`.
    pub relative_residual: f64,
    pub sup_residual: f64,
    /// Largest sup-norm among the three right-hand-side terms.
    pub scale: f64,
    /// Smallest F met by any stencil point.
    pub min_f: f64,
}

/// Evaluates ∂t v − RHS(v) at t = 0 and E = 0 for the closed form, with the
/// time derivative taken analytically and the spatial derivatives by
/// centered differences of the analytic v and v·w (8th order).
pub fn blowup_report(p: &BlowupParams, win: &BlowupWindow) -> Result<BlowupReport> {
    for (n, x) in [("a", p.a), ("c", p.c), ("d", p.d)] {
        require_finite(n, x)?;
    }
    require(win.samples >= 2 && win.half_width > 0.0 && win.h > 0.0, || "degenerate blow-up window".into())?;
    let d1 = fd_weights(1, 4);
    let d2 = fd_weights(2, 4);
    let d3 = fd_weights(3, 5);
    let h = win.h;
    let mut min_f = f64::INFINITY;
    let margin = 5.0 * h;
    let n_check = 4 * win.samples;
    for i in 0..=n_check {
        for j in 0..=n_check {
            let s = |k: usize| -win.half_width - margin + 2.0 * (win.half_width + margin) * k as f64 / n_check as f64;
            min_f = min_f.min(p.f(s(i), s(j)));
        }
    }
    if min_f <= 0.0 {
        return Err(NvError::Precondition(format!(
            "a + c(x³+y³) + d(x²+y²)² reaches {min_f:.3e} <= 0 on the window"
        )));
    }
    let fields = |x: f64, y: f64| -> Result<BlowupFields> {
        p.fields(x, y)
            .ok_or_else(|| NvError::Precondition(format!("F is not positive at ({x}, {y})")))
    };
    let mut sup_res: f64 = 0.0;
    let mut sup_terms = [0.0f64; 3];
    for i in 0..win.samples {
        let x = -win.half_width + 2.0 * win.half_width * i as f64 / (win.samples - 1) as f64;
        for j in 0..win.samples {
            let y = -win.half_width + 2.0 * win.half_width * j as f64 / (win.samples - 1) as f64;
            let mut vxxx = 0.0;
            for (k, wk) in d3.iter().enumerate() {
                vxxx += wk * fields(x + (k as f64 - 5.0) * h, y)?.v;
            }
            vxxx /= h * h * h;
            let mut vxyy = 0.0;
            let mut pxw1 = 0.0;
            let mut pyw2 = 0.0;
            for (a, wa) in d1.iter().enumerate() {
                let xa = x + (a as f64 - 4.0) * h;
                let fa = fields(xa, y)?;
                pxw1 += wa * fa.v * fa.w1;
                let fb = fields(x, y + (a as f64 - 4.0) * h)?;
                pyw2 += wa * fb.v * fb.w2;
                let mut inner = 0.0;
                for (b, wb) in d2.iter().enumerate() {
                    inner += wb * fields(xa, y + (b as f64 - 4.0) * h)?.v;
                }
                vxyy += wa * inner;
            }
            vxyy /= h * h * h;
            pxw1 /= h;
            pyw2 /= h;
            let terms = [2.0 * (vxxx - 3.0 * vxyy), 2.0 * pxw1, 2.0 * pyw2];
            let vt = fields(x, y)?.vt;
            let res = vt - terms.iter().sum::<f64>();
            sup_res = sup_res.max(res.abs());
            for (s, t) in sup_terms.iter_mut().zip(terms) {
                *s = s.max(t.abs());
            }
        }
    }
    let scale = sup_terms.iter().fold(0.0f64, |m, &s| m.max(s));
    let relative_residual = if scale == 0.0 { sup_res } else { sup_res / scale };
    Ok(BlowupReport { relative_residual, sup_residual: sup_res, scale, min_f })
}

/// Relative residual of the closed-form blow-up solution; see [`blowup_report`].
pub fn blowup_residual(p: &BlowupParams, win: &BlowupWindow) -> Result<f64> {
    Ok(blowup_report(p, win)?.relative_residual)
}

/// Outcome of the scaling-symmetry comparison.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub lambda: f64,
    pub rel_l2: f64,
    /// Largest spectral tail fraction over the initial and final fields.
    pub tail: f64,
}

/// Evolves (v0, E) to time T on `grid` and (λ²v0(λ·), λ²E) to T/λ³ on the
/// grid scaled by 1/λ, then compares v_λ(T/λ³) with λ²v(T, λ·) pointwise.
pub fn scaling_symmetry_check(
    v0: impl Fn(f64, f64) -> f64,
    grid: GridSpec,
    e: f64,
    lambda: f64,
    t_final: f64,
    dt: f64,
) -> Result<ScalingReport> {
    require(lambda > 0.0 && lambda.is_finite(), || format!("lambda must be positive, got {lambda}"))?;
    let tail_limit = 1e-10;
    let base = NvState::new(RealField2D::from_fn(grid, &v0), e, 0.0)?;
    let g2 = grid.scaled(1.0 / lambda);
    let l2 = lambda * lambda;
    let scaled = NvState::new(RealField2D::from_fn(g2, |x, y| l2 * v0(lambda * x, lambda * y)), e * l2, 0.0)?;
    let mut tail = spectral_tail(&base.v).max(spectral_tail(&scaled.v));
    if tail > tail_limit {
        return Err(NvError::Resolution(format!("initial spectral tail {tail:.3e} exceeds {tail_limit:.0e}")));
    }
    let out = NvSolver::new(grid, e)?.evolve(&base, t_final, dt)?;
    let l3 = l2 * lambda;
    let out_s = NvSolver::new(g2, e * l2)?.evolve(&scaled, t_final / l3, dt / l3)?;
    tail = tail.max(spectral_tail(&out.v)).max(spectral_tail(&out_s.v));
    if tail > tail_limit {
        return Err(NvError::Resolution(format!("final spectral tail {tail:.3e} exceeds {tail_limit:.0e}")));
    }
    let reference = RealField2D { grid: g2, data: out.v.data.iter().map(|v| l2 * v).collect() };
    Ok(ScalingReport { lambda, rel_l2: rel_l2(&out_s.v, &reference), tail })
}

/// Real field with 40 random Fourier modes inside a sixth of the band.
pub fn random_band_limited(g: GridSpec, seed: u64) -> RealField2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = vec![ZERO; g.len()];
    let kmax = (g.nx.min(g.ny) / 6) as i64;
    for _ in 0..40 {
        let mx = rng.gen_range(-kmax..=kmax);
        let my = rng.gen_range(-kmax..=kmax);
        let ix = mx.rem_euclid(g.nx as i64) as usize;
        let iy = my.rem_euclid(g.ny as i64) as usize;
        s[ix * g.ny + iy] += C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * g.len() as f64 * 0.05;
    }
    enforce_hermitian(&g, &mut s);
    let mut fft = Fft2::new(g);
    fft.inverse_real(&SpectralField2D { grid: g, data: s, hermitian: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize, l: f64) -> GridSpec {
        GridSpec::new(n, n, l, l).unwrap()
    }


    #[test]
    fn y_independent_w_is_minus_three_v() {
        let g = GridSpec::new(64, 8, 2.0 * std::f64::consts::PI, 3.0).unwrap();
        let v = RealField2D::from_fn(g, |x, _| x.sin() + 0.5 * (3.0 * x).cos());
        let (w1, w2) = compute_w(&v);
        assert!(rel_l2(&w1, &v.scale(-3.0)) < 1e-13);
        assert!(w2.max_abs() < 1e-13);
    }

    #[test]
    fn single_mode_w_by_hand() {
        let g = GridSpec::new(32, 32, 10.0, 6.0).unwrap();
        let (kx, ky) = (2.0 * std::f64::consts::PI / 10.0, 4.0 * std::f64::consts::PI / 6.0);
        let v = RealField2D::from_fn(g, |x, y| (kx * x + ky * y).cos());
        let (w1, w2) = compute_w(&v);
        let (m1, m2) = w_multipliers(kx, ky);
        let e1 = RealField2D::from_fn(g, |x, y| m1 * (kx * x + ky * y).cos());
        let e2 = RealField2D::from_fn(g, |x, y| m2 * (kx * x + ky * y).cos());
        assert!(w1.sub(&e1).max_abs() < 1e-12);
        assert!(w2.sub(&e2).max_abs() < 1e-12);
    }

    #[test]
    fn recovery_identities() {
        let g = square(64, 20.0);
        let v = RealField2D::from_fn(g, |x, y| (-(x * x + y * y) / 2.0).exp());
        let (w1, w2) = compute_w(&v);
        let mut fft = Fft2::new(g);
        let lap = |f: &RealField2D, fft: &mut Fft2| fft.apply_real(f, |i, j| g.ikx(i) * g.ikx(i) + g.iky(j) * g.iky(j));
        let l1 = lap(&w1, &mut fft);
        let l2 = lap(&w2, &mut fft);
        let r1 = fft.apply_real(&v, |i, j| 3.0 * (g.iky(j) * g.iky(j) - g.ikx(i) * g.ikx(i)));
        let r2 = fft.apply_real(&v, |i, j| 6.0 * g.ikx(i) * g.iky(j));
        assert!(rel_l2(&l1, &r1) < 1e-10);
        assert!(rel_l2(&l2, &r2) < 1e-10);
    }

    #[test]
    fn complex_and_real_forms_agree() {
        let g = square(32, 12.0);
        for seed in 0..5 {
            let v = random_band_limited(g, seed);
            let s = NvState::new(v, -1.3, 0.0).unwrap();
            let mut op = NvOperator::new(g, s.e).unwrap();
            let (a, residue) = op.rhs_complex_form(&s.v).unwrap();
            let b = op.rhs_real_form(&s.v).unwrap();
            assert!(rel_l2(&a, &b) < 1e-10, "seed {seed}: {}", rel_l2(&a, &b));
            assert!(residue < 1e-12);
        }
    }

    #[test]
    fn y_independent_rhs_is_kdv() {
        let g = GridSpec::new(64, 8, 2.0 * std::f64::consts::PI, 1.0).unwrap();
        let e = -0.7;
        let v = RealField2D::from_fn(g, |x, _| x.sin() + 0.3 * (2.0 * x).cos());
        let rhs = nv_rhs(&NvState::new(v.clone(), e, 0.0).unwrap()).unwrap();
        let inner = RealField2D::from_fn(g, |x, _| {
            let v = x.sin() + 0.3 * (2.0 * x).cos();
            let vxx = -x.sin() - 1.2 * (2.0 * x).cos();
            vxx - 3.0 * v * v + 3.0 * e * v
        });
        let mut fft = Fft2::new(g);
        let expect = fft.apply_real(&inner, |i, _| 2.0 * g.ikx(i));
        assert!(rel_l2(&rhs, &expect) < 1e-10);
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = square(16, 8.0);
        let s = NvState::new(RealField2D::zeros(g), -1.0, 0.0).unwrap();
        assert_eq!(nv_rhs(&s).unwrap().max_abs(), 0.0);
        let out = NvSolver::new(g, -1.0).unwrap().evolve(&s, 0.5, 0.01).unwrap();
        assert_eq!(out.v.max_abs(), 0.0);
        let inv = invariants(&out);
        assert_eq!(inv.l1_integral, 0.0);
        assert_eq!(inv.mass, ZERO);
        assert_eq!(inv.energy, ZERO);
    }

    #[test]
    fn linear_flow_is_isometric() {
        let g = square(32, 12.0);
        let v = random_band_limited(g, 7);
        let s = NvState::new(v.clone(), -2.0, 0.0).unwrap();
        let out = NvSolver::new(g, -2.0).unwrap().linear_only(true).evolve(&s, 1.0, 0.01).unwrap();
        assert!((out.v.l2_norm() - v.l2_norm()).abs() < 1e-12 * v.l2_norm());
    }

    #[test]
    fn radial_mass_vanishes() {
        let g = square(64, 24.0);
        let v = InitialData::Gaussian { amplitude: 1.0, width: 1.5, x0: 0.0, y0: 0.0 }.sample(g).unwrap();
        let s = NvState::new(v.clone(), -1.0, 0.0).unwrap();
        let m = invariants(&s).mass;
        assert!(m.norm() < 1e-10 * v.l2_norm().powi(2));
    }

    #[test]
    fn y_independent_mass_formula() {
        let g = GridSpec::new(64, 8, 2.0 * std::f64::consts::PI, 2.0).unwrap();
        let v = RealField2D::from_fn(g, |x, _| x.sin() + 0.2 * (3.0 * x).sin());
        let m = invariants(&NvState::new(v.clone(), -1.0, 0.0).unwrap()).mass;
        let expect = -3.0 * v.l2_norm().powi(2);
        assert!((m.re - expect).abs() < 1e-12 * expect.abs());
        assert!(m.im.abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn kdv_map_solves_reduced_equation() {
        // ∂s v = 2∂x(v_xx − 3v² + 3Ev) on the line, checked by finite differences
        let (c, e): (f64, f64) = (1.0, -1.0);
        let u = |s: f64, x: f64| {
            let q = c.sqrt() * (x + 6.0 * e * s + 2.0 * c * s) / 2.0;
            -0.5 * c / q.cosh().powi(2)
        };
        let h = 1e-3;
        for &(s, x) in &[(0.0, 0.3), (0.4, -1.2), (0.9, 2.0)] {
            let vs = (u(s + h, x) - u(s - h, x)) / (2.0 * h);
            let g = |x: f64| {
                let v = u(s, x);
                let vxx = (u(s, x + h) - 2.0 * v + u(s, x - h)) / (h * h);
                vxx - 3.0 * v * v + 3.0 * e * v
            };
            let rhs = 2.0 * (g(x + h) - g(x - h)) / (2.0 * h);
            assert!((vs - rhs).abs() < 1e-4, "{vs} vs {rhs}");
        }
    }

    #[test]
    fn hermitian_symmetry_is_preserved() {
        let g = square(32, 16.0);
        let v = InitialData::Gaussian { amplitude: 0.5, width: 1.5, x0: 1.0, y0: -0.5 }.sample(g).unwrap();
        let s = NvState::new(v, -1.0, 0.0).unwrap();
        let out = NvSolver::new(g, -1.0).unwrap().evolve(&s, 0.2, 2e-3).unwrap();
        let mut fft = Fft2::new(g);
        let mut spec = fft.forward_real(&out.v);
        spec.hermitian = true;
        assert!(spec.hermitian_residue() < 1e-11);
    }

    #[test]
    fn nan_is_reported_with_last_state() {
        let g = square(16, 4.0);
        let v = InitialData::SingleMode { kx: 1, ky: 1, amplitude: 1e200 }.sample(g).unwrap();
        let s = NvState::new(v, -1.0, 0.0).unwrap();
        let mut solver = NvSolver::new(g, -1.0).unwrap().without_cfl_check();
        match solver.evolve(&s, 1.0, 0.1) {
            Err(NvError::NanDetected { last_state, .. }) => assert!(last_state.v.is_finite()),
            other => panic!("expected NaN detection, got {other:?}"),
        }
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let g = square(16, 4.0);
        let v = InitialData::SingleMode { kx: 1, ky: 0, amplitude: 10.0 }.sample(g).unwrap();
        let s = NvState::new(v, -1.0, 0.0).unwrap();
        assert!(matches!(NvSolver::new(g, -1.0).unwrap().evolve(&s, 1.0, 0.1), Err(NvError::Precondition(_))));
    }

    #[test]
    fn fd_weights_are_exact_on_polynomials() {
        let w = fd_weights(3, 5);
        let d3: f64 = w.iter().enumerate().map(|(k, c)| c * ((k as f64 - 5.0).powi(3))).sum();
        assert!((d3 - 6.0).abs() < 1e-10);
        let w = fd_weights(1, 4);
        let d1: f64 = w.iter().enumerate().map(|(k, c)| c * (k as f64 - 4.0)).sum();
        assert!((d1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blowup_degenerate_cases() {
        let win = BlowupWindow { half_width: 2.0, samples: 21, h: 0.02 };
        assert_eq!(blowup_residual(&BlowupParams { a: 1.0, c: 0.0, d: 0.0 }, &win).unwrap(), 0.0);
        let r = blowup_residual(&BlowupParams { a: 1.0, c: 0.0, d: 1.0 }, &win).unwrap();
        assert!(r < 1e-6, "{r}");
        assert!(blowup_residual(&BlowupParams { a: -1.0, c: 0.0, d: 1.0 }, &win).is_err());
    }

    #[test]
    fn scaling_with_unit_lambda_is_exact() {
        let g = square(64, 16.0);
        let r = scaling_symmetry_check(|x, y| 0.3 * (-(x * x + y * y) / 2.0).exp(), g, -1.0, 1.0, 0.05, 0.01).unwrap();
        assert_eq!(r.rel_l2, 0.0);
    }
}
