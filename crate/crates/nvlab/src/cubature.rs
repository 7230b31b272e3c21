//! Adaptive tensor Gauss-Kronrod 7-15 cubature on rectangles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// The 15 Kronrod nodes on [−1, 1] with Kronrod and embedded Gauss weights.
pub fn gk15() -> ([f64; 15], [f64; 15], [f64; 15]) {
    let mut x = [0.0; 15];
    let mut wk = [0.0; 15];
    let mut wg = [0.0; 15];
    for j in 0..7 {
        x[j] = -XGK[j];
        x[14 - j] = XGK[j];
        wk[j] = WGK[j];
        wk[14 - j] = WGK[j];
        if j % 2 == 1 {
            wg[j] = WG[j / 2];
            wg[14 - j] = WG[j / 2];
        }
    }
    x[7] = 0.0;
    wk[7] = WGK[7];
    wg[7] = WG[3];
    (x, wk, wg)
}

/// Gauss-Legendre nodes and weights on [−1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[derive(Clone, Copy, Debug)]
pub struct Rect {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    rect: Rect,
    value: Complex64,
    err: f64,
    split_dim: usize,
    abs_mass: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CubatureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_cells: usize,
}

impl Default for CubatureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-8,
            max_cells: 40_000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CubatureResult {
    pub value: Complex64,
    pub error: f64,
    pub cells: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn rule<F: Fn(f64, f64) -> Complex64>(f: &F, r: Rect) -> Cell {
    let (x, wk, wg) = gk15();
    let hx = 0.5 * (r.b[0] - r.a[0]);
    let cx = 0.5 * (r.b[0] + r.a[0]);
    let hy = 0.5 * (r.b[1] - r.a[1]);
    let cy = 0.5 * (r.b[1] + r.a[1]);
    let mut kk = Complex64::new(0.0, 0.0);
    let mut gk_x = Complex64::new(0.0, 0.0);
    let mut kg_y = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    for i in 0..15 {
        let px = cx + hx * x[i];
        let mut row_k = Complex64::new(0.0, 0.0);
        let mut row_g = Complex64::new(0.0, 0.0);
        for j in 0..15 {
            let v = f(px, cy + hy * x[j]);
            row_k += wk[j] * v;
            row_g += wg[j] * v;
            mass += wk[i] * wk[j] * v.norm();
        }
        kk += wk[i] * row_k;
        gk_x += wg[i] * row_k;
        kg_y += wk[i] * row_g;
    }
    let area = hx * hy;
    let ex = ((kk - gk_x) * area).norm();
    let ey = ((kk - kg_y) * area).norm();
    Cell {
        rect: r,
        value: kk * area,
        err: ex + ey,
        split_dim: if ex >= ey { 0 } else { 1 },
        abs_mass: mass * area.abs(),
    }
}

/// Integrates `f` over the union of `rects`, bisecting the worst cell until
/// the summed error estimate meets the tolerance or the cell budget runs out.
pub fn integrate_2d<F>(f: F, rects: &[Rect], opts: CubatureOptions) -> CubatureResult
where
    F: Fn(f64, f64) -> Complex64,
{
    let mut heap = BinaryHeap::new();
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut mass = 0.0;
    for r in rects {
        let c = rule(&f, *r);
        value += c.value;
        err += c.err;
        mass += c.abs_mass;
        heap.push(c);
    }
    let mut evaluations = 225 * rects.len();
    let target = |value: Complex64, mass: f64| {
        opts.abs_tol
            .max(opts.rel_tol * value.norm())
            .max(50.0 * f64::EPSILON * mass)
    };
    while err > target(value, mass) && heap.len() < opts.max_cells {
        let Some(worst) = heap.pop() else { break };
        let d = worst.split_dim;
        let mid = 0.5 * (worst.rect.a[d] + worst.rect.b[d]);
        let mut lo = worst.rect;
        let mut hi = worst.rect;
        lo.b[d] = mid;
        hi.a[d] = mid;
        let c1 = rule(&f, lo);
        let c2 = rule(&f, hi);
        evaluations += 450;
        value += c1.value + c2.value - worst.value;
        mass += c1.abs_mass + c2.abs_mass - worst.abs_mass;
        err += c1.err + c2.err - worst.err;
        heap.push(c1);
        heap.push(c2);
    }
    // re-sum to shed the drift of the running updates
    let cells: Vec<Cell> = heap.into_vec();
    let value = cells.iter().fold(Complex64::new(0.0, 0.0), |a, c| a + c.value);
    let err: f64 = cells.iter().map(|c| c.err).sum();
    let mass: f64 = cells.iter().map(|c| c.abs_mass).sum();
    CubatureResult {
        value,
        error: err,
        cells: cells.len(),
        evaluations,
        converged: err <= target(value, mass),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_weights_sum_to_two() {
        let (_, wk, wg) = gk15();
        assert!((wk.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!((wg.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_polynomial_is_exact() {
        let r = Rect { a: [0.0, -1.0], b: [2.0, 3.0] };
        let res = integrate_2d(
            |x, y| Complex64::new(x * x * y, x + y * y * y),
            &[r],
            CubatureOptions::default(),
        );
        // ∫x²y = (8/3)(4) ; ∫x = 2·4 ; ∫y³ = 2·(81−1)/4
        let exact = Complex64::new(8.0 / 3.0 * 4.0, 8.0 + 40.0);
        assert!((res.value - exact).norm() < 1e-12);
        assert!(res.converged);
    }

    #[test]
    fn oscillatory_and_singular_integrands() {
        let r = Rect { a: [0.0, 0.0], b: [1.0, 1.0] };
        let res = integrate_2d(
            |x, y| Complex64::from_polar(x.sqrt(), 40.0 * (x + y)),
            &[r],
            CubatureOptions { rel_tol: 1e-10, ..Default::default() },
        );
        // separable: ∫√x e^{40ix} dx · ∫e^{40iy} dy
        let gy = (Complex64::from_polar(1.0, 40.0) - 1.0) / Complex64::new(0.0, 40.0);
        let (gx, gw) = gauss_legendre(200);
        let mut sx = Complex64::new(0.0, 0.0);
        for (xi, wi) in gx.iter().zip(&gw) {
            let s = 0.5 * (xi + 1.0);
            // x = s², dx = 2s ds removes the square-root singularity
            let x = s * s;
            sx += 0.5 * wi * 2.0 * s * Complex64::from_polar(x.sqrt(), 40.0 * x);
        }
        let exact = sx * gy;
        assert!((res.value - exact).norm() < 1e-9 * exact.norm(), "{} vs {}", res.value, exact);
    }
}
