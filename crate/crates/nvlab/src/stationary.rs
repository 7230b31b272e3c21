//! λ-plane geometry: the radial change of variables, the phase S(u, λ),
//! the cubic for ζ = λ² and classification of u against the region 𝕌.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NvError, Result};

type C = Complex64;

const COINCIDE_TOL: f64 = 1e-7;
const MODULUS_TOL: f64 = 1e-7;

fn nonzero(lambda: C) -> Result<()> {
    if lambda.norm_sqr() == 0.0 || !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(NvError::InvalidInput(format!("lambda must be finite and nonzero, got {lambda}")));
    }
    Ok(())
}

/// ξ = −i(λ − 1/λ̄). Maps {|λ| > 1} onto ξ ≠ 0 and the unit circle to 0.
pub fn lambda_map(lambda: C) -> Result<C> {
    nonzero(lambda)?;
    Ok(-C::i() * (lambda - lambda.conj().inv()))
}

/// Area distortion of `lambda_map`, (|λ|⁴ − 1)/|λ|⁴.
pub fn lambda_jacobian(lambda: C) -> f64 {
    let p = lambda.norm_sqr();
    (p * p - 1.0) / (p * p)
}

fn g_holo(u: C, l: C) -> C {
    let l3 = l * l * l;
    -(l3 + l3.inv()) + 0.5 * (l * u.conj() + u / l)
}

/// S(u, λ) = g(λ) − conj(g(λ)); purely imaginary.
pub fn phase_s(u: C, lambda: C) -> Result<C> {
    nonzero(lambda)?;
    let g = g_holo(u, lambda);
    Ok(g - g.conj())
}

/// The phase with λ − 1/λ and λ̄ − 1/λ̄ in the linear part, as printed.
pub fn phase_s_printed(u: C, lambda: C) -> Result<C> {
    nonzero(lambda)?;
    let l = lambda;
    let lb = l.conj();
    let cubic = l * l * l + (l * l * l).inv() - lb * lb * lb - (lb * lb * lb).inv();
    Ok(-cubic + 0.5 * ((l - l.inv()) * u.conj() - (lb - lb.inv()) * u))
}

/// S_λ = ū/2 − u/(2λ²) − 3λ² + 3/λ⁴.
pub fn phase_s_lambda(u: C, lambda: C) -> Result<C> {
    nonzero(lambda)?;
    Ok(s_lambda_raw(u, lambda))
}

#[inline]
fn s_lambda_raw(u: C, l: C) -> C {
    let l2 = l * l;
    0.5 * u.conj() - u / (2.0 * l2) - 3.0 * l2 + 3.0 / (l2 * l2)
}

/// S_λλ = u/λ³ − 6λ − 12/λ⁵.
pub fn phase_s_lambdalambda(u: C, lambda: C) -> Result<C> {
    nonzero(lambda)?;
    let l = lambda;
    let l2 = l * l;
    Ok(u / (l2 * l) - 6.0 * l - 12.0 / (l2 * l2 * l))
}

/// Wirtinger derivative ½(∂x − i∂y) of `f` at λ by central differences.
pub fn wirtinger_fd(f: impl Fn(C) -> C, lambda: C, h: f64) -> C {
    let dx = (f(lambda + h) - f(lambda - h)) / (2.0 * h);
    let dy = (f(lambda + C::new(0.0, h)) - f(lambda - C::new(0.0, h))) / (2.0 * h);
    0.5 * (dx - C::i() * dy)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Region {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StationaryAnalysis {
    pub u: C,
    pub zeta_roots: [C; 3],
    pub lambda_points: [C; 6],
    pub classification: Region,
    pub omega: f64,
    pub phi: f64,
}

impl StationaryAnalysis {
    /// Stationary points in the ξ-plane: images of the λ points with |λ| > 1.
    pub fn xi_points(&self) -> Vec<C> {
        self.lambda_points
            .iter()
            .filter(|l| l.norm() > 1.0 + 1e-9)
            .map(|&l| -C::i() * (l - l.conj().inv()))
            .collect()
    }
}

fn cubic_eval(c: &[C; 3], z: C) -> (C, C) {
    // z³ + c0 z² + c1 z + c2 and its derivative
    let p = ((z + c[0]) * z + c[1]) * z + c[2];
    let dp = (3.0 * z + 2.0 * c[0]) * z + c[1];
    (p, dp)
}

/// Roots of the monic cubic z³ + a z² + b z + c by Cardano's formula,
/// each followed by one Newton step that is kept only if it helps.
pub fn cubic_roots(a: C, b: C, c: C) -> [C; 3] {
    let coef = [a, b, c];
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let s1 = -q / 2.0 + disc;
    let s2 = -q / 2.0 - disc;
    let s = if s1.norm() >= s2.norm() { s1 } else { s2 };
    let mut roots = if s.norm() == 0.0 {
        [shift; 3]
    } else {
        let cu = s.powf(1.0 / 3.0);
        let w = C::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let mut r = [C::new(0.0, 0.0); 3];
        let mut ck = cu;
        for item in r.iter_mut() {
            *item = ck - p / (3.0 * ck) + shift;
            ck *= w;
        }
        r
    };
    for z in roots.iter_mut() {
        let (f, df) = cubic_eval(&coef, *z);
        if df.norm() > 0.0 {
            let cand = *z - f / df;
            if cubic_eval(&coef, cand).0.norm() < f.norm() {
                *z = cand;
            }
        }
    }
    roots
}

/// Roots of 3ζ³ − (ū/2)ζ² + (u/2)ζ − 3 and the classification of u.
pub fn solve_q(u: C) -> StationaryAnalysis {
    let roots = cubic_roots(-u.conj() / 6.0, u / 6.0, C::new(-1.0, 0.0));
    let mut lambda_points = [C::new(0.0, 0.0); 6];
    for (j, z) in roots.iter().enumerate() {
        let s = z.sqrt();
        lambda_points[2 * j] = s;
        lambda_points[2 * j + 1] = -s;
    }
    let tol = COINCIDE_TOL * (1.0 + u.norm());
    let mut pair: Option<(usize, usize)> = None;
    for i in 0..3 {
        for j in i + 1..3 {
            if pair.is_none() && (roots[i] - roots[j]).norm() <= tol {
                pair = Some((i, j));
            }
        }
    }
    let on_circle = roots.iter().all(|z| (z.norm() - 1.0).abs() <= MODULUS_TOL);
    let classification = match (pair, on_circle) {
        (Some(_), _) => Region::Boundary,
        (None, true) => Region::Interior,
        (None, false) => Region::Exterior,
    };
    let jmax = (0..3)
        .max_by(|&i, &j| roots[i].norm().total_cmp(&roots[j].norm()))
        .unwrap_or(0);
    let omega = (roots[jmax].norm().sqrt() - 1.0).max(0.0);
    let phi_root = match (classification, pair) {
        (Region::Boundary, Some((i, _))) => roots[i],
        _ => roots[jmax],
    };
    let mut phi = phi_root.arg();
    if phi < 0.0 {
        phi += 2.0 * std::f64::consts::PI;
    }
    if phi >= 2.0 * std::f64::consts::PI - 1e-12 {
        phi = 0.0;
    }
    StationaryAnalysis {
        u,
        zeta_roots: roots,
        lambda_points,
        classification,
        omega,
        phi,
    }
}

/// |S_λ − (−3/λ⁴)Π(λ² − ζ_j)| with ζ_j from `solve_q`.
pub fn factorization_check(u: C, lambda: C) -> Result<f64> {
    nonzero(lambda)?;
    let a = solve_q(u);
    let l2 = lambda * lambda;
    let prod = a.zeta_roots.iter().fold(C::new(1.0, 0.0), |acc, z| acc * (l2 - z));
    let rhs = -3.0 / (l2 * l2) * prod;
    Ok((s_lambda_raw(u, lambda) - rhs).norm())
}

/// 6(2e^{−iφ} + e^{2iφ}), the curve bounding 𝕌.
pub fn boundary_curve(phi: f64) -> C {
    6.0 * (2.0 * C::from_polar(1.0, -phi) + C::from_polar(1.0, 2.0 * phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn rand_c(rng: &mut ChaCha8Rng, r: f64) -> C {
        c(rng.gen_range(-r..r), rng.gen_range(-r..r))
    }

    #[test]
    fn lambda_map_examples() {
        assert!((lambda_map(c(2.0, 0.0)).unwrap() - c(0.0, -1.5)).norm() < 1e-15);
        let on = lambda_map(C::from_polar(1.0, 0.8)).unwrap();
        assert!(on.norm() < 1e-15);
        assert!(lambda_map(c(0.0, 0.0)).is_err());
    }

    #[test]
    fn lambda_map_jacobian_near_two() {
        let l0 = c(2.0, 0.0);
        let h = 1e-6;
        let f = |l: C| lambda_map(l).unwrap();
        let dx = (f(l0 + h) - f(l0 - h)) / (2.0 * h);
        let dy = (f(l0 + c(0.0, h)) - f(l0 - c(0.0, h))) / (2.0 * h);
        let det = dx.re * dy.im - dx.im * dy.re;
        assert!((det - 15.0 / 16.0).abs() < 1e-8);
        assert_eq!(lambda_jacobian(l0), 15.0 / 16.0);
    }

    #[test]
    fn lambda_map_modulus_and_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let l = C::from_polar(rng.gen_range(1.01..5.0), rng.gen_range(0.0..2.0 * PI));
            let xi = lambda_map(l).unwrap();
            let p = l.norm_sqr();
            assert!((xi.norm() - (p - 1.0) / l.norm()).abs() < 1e-12);
            assert!((l.conj() / l + xi.conj() / xi).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_is_imaginary_and_matches_xi_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let u = rand_c(&mut rng, 20.0);
            let l = C::from_polar(rng.gen_range(1.05..4.0), rng.gen_range(0.0..2.0 * PI));
            let s = phase_s(u, l).unwrap();
            assert!(s.re.abs() <= 1e-12 * s.im.abs() + 1e-300);
            let xi = lambda_map(l).unwrap();
            let q = xi.norm_sqr();
            let st = 2.0 * (xi * xi * xi).re * (1.0 + 3.0 / q) + (u.conj() * xi).re;
            assert!((s - C::i() * st).norm() <= 1e-10 * (1.0 + st.abs()));
        }
        assert_eq!(phase_s(c(0.0, 0.0), c(2.0, 0.0)).unwrap().norm(), 0.0);
    }

    #[test]
    fn printed_phase_is_also_imaginary() {
        let s = phase_s_printed(c(1.0, 2.0), c(1.5, 0.3)).unwrap();
        assert!(s.re.abs() < 1e-12);
    }

    #[test]
    fn s_lambda_examples() {
        assert!(phase_s_lambda(c(18.0, 0.0), c(1.0, 0.0)).unwrap().norm() < 1e-14);
        for k in 0..3 {
            let z = C::from_polar(1.0, 2.0 * PI * k as f64 / 3.0);
            assert!(phase_s_lambda(c(0.0, 0.0), z.sqrt()).unwrap().norm() < 1e-13);
        }
    }

    #[test]
    fn s_lambda_is_wirtinger_derivative_of_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let u = rand_c(&mut rng, 10.0);
            let l = C::from_polar(rng.gen_range(1.1..3.0), rng.gen_range(0.0..2.0 * PI));
            let fd = wirtinger_fd(|z| phase_s(u, z).unwrap(), l, 1e-5);
            let an = phase_s_lambda(u, l).unwrap();
            assert!((fd - an).norm() <= 1e-6 * (1.0 + an.norm()));
            let fd2 = wirtinger_fd(|z| phase_s_lambda(u, z).unwrap(), l, 1e-5);
            let an2 = phase_s_lambdalambda(u, l).unwrap();
            assert!((fd2 - an2).norm() <= 1e-6 * (1.0 + an2.norm()));
        }
    }

    #[test]
    fn roots_at_vertex() {
        let a = solve_q(c(18.0, 0.0));
        for z in a.zeta_roots {
            assert!((z - 1.0).norm() < 1e-8);
        }
        assert_eq!(a.classification, Region::Boundary);
        assert!(a.phi.abs() < 1e-8);
    }

    #[test]
    fn roots_at_minus_six() {
        let a = solve_q(c(-6.0, 0.0));
        let mut re: Vec<f64> = a.zeta_roots.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 1.0).abs() < 1e-7 && (re[1] + 1.0).abs() < 1e-7);
        assert!((re[2] - 1.0).abs() < 1e-12);
        assert!(a.zeta_roots.iter().all(|z| z.im.abs() < 1e-7));
        assert_eq!(a.classification, Region::Boundary);
        assert!((a.phi - PI).abs() < 1e-7);
    }

    #[test]
    fn roots_at_origin() {
        let a = solve_q(c(0.0, 0.0));
        for z in a.zeta_roots {
            assert!(((z * z * z) - 1.0).norm() < 1e-14);
            assert!((z.norm() - 1.0).abs() < 1e-14);
        }
        assert_eq!(a.classification, Region::Interior);
    }

    #[test]
    fn lambda_points_are_square_roots() {
        let a = solve_q(c(3.0, -7.0));
        for j in 0..3 {
            assert_eq!(a.lambda_points[2 * j], a.zeta_roots[j].sqrt());
            assert_eq!(a.lambda_points[2 * j + 1], -a.zeta_roots[j].sqrt());
        }
    }

    #[test]
    fn vieta_on_random_u() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let u = rand_c(&mut rng, 50.0);
            let z = solve_q(u).zeta_roots;
            let prod = z[0] * z[1] * z[2];
            let sum = z[0] + z[1] + z[2];
            assert!((prod - 1.0).norm() <= 1e-9);
            assert!((sum - u.conj() / 6.0).norm() <= 1e-9 * (1.0 + u.norm()));
        }
    }

    #[test]
    fn factorization_examples_and_random() {
        assert!(factorization_check(c(18.0, 0.0), c(2.0, 0.0)).unwrap() < 1e-8);
        assert!(factorization_check(c(5.0, 3.0), C::from_polar(1.3, 0.7)).unwrap() < 1e-8);
        assert!(factorization_check(c(0.0, 0.0), c(0.0, 1.0)).unwrap() < 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let u = rand_c(&mut rng, 30.0);
            let l = C::from_polar(rng.gen_range(0.3..3.0), rng.gen_range(0.0..2.0 * PI));
            let s = phase_s_lambda(u, l).unwrap().norm();
            assert!(factorization_check(u, l).unwrap() <= 1e-8 * (1.0 + s));
        }
    }

    #[test]
    fn boundary_curve_examples() {
        assert!((boundary_curve(0.0) - 18.0).norm() < 1e-14);
        assert!((boundary_curve(PI) + 6.0).norm() < 1e-13);
        let u = boundary_curve(2.0 * PI / 3.0);
        let v = 18.0 * C::from_polar(1.0, -2.0 * PI / 3.0);
        assert!((u - v).norm() < 1e-12);
        let a = solve_q(u);
        assert_eq!(a.classification, Region::Boundary);
    }

    #[test]
    fn boundary_root_pattern() {
        for k in 1..40 {
            let phi = 0.157 * k as f64;
            let a = solve_q(boundary_curve(phi));
            assert_eq!(a.classification, Region::Boundary, "phi {phi}");
            let dbl = C::from_polar(1.0, phi);
            let simple = C::from_polar(1.0, -2.0 * phi);
            let near_dbl = a.zeta_roots.iter().filter(|z| (**z - dbl).norm() < 1e-6).count();
            let near_simple = a.zeta_roots.iter().any(|z| (*z - simple).norm() < 1e-6);
            assert!(near_dbl >= 2 && near_simple, "phi {phi}: {:?}", a.zeta_roots);
        }
    }

    #[test]
    fn exterior_modulus_pattern() {
        for &u in &[c(100.0, 0.0), c(30.0, 40.0), c(-50.0, 3.0)] {
            let a = solve_q(u);
            assert_eq!(a.classification, Region::Exterior);
            let mut m: Vec<f64> = a.zeta_roots.iter().map(|z| z.norm()).collect();
            m.sort_by(f64::total_cmp);
            assert!((m[1] - 1.0).abs() < 1e-9);
            assert!((m[0] * m[2] - 1.0).abs() < 1e-9);
            assert!(m[2] > 1.0 + 1e-3);
            assert!((a.omega - (m[2].sqrt() - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn interior_points() {
        for &u in &[c(1.0, 1.0), c(5.0, 0.0), c(-2.0, 3.0)] {
            assert_eq!(solve_q(u).classification, Region::Interior);
        }
    }

    #[test]
    fn xi_points_are_stationary() {
        let u = c(100.0, 0.0);
        let a = solve_q(u);
        let pts = a.xi_points();
        assert_eq!(pts.len(), 2);
        for xi in pts {
            // ∂_ξ of (ξ³ + ξ̄³)(1 + 3/|ξ|²) + Re(ūξ) with ξ̄ held fixed
            let eta = xi.conj();
            let d = 3.0 * xi * xi * (1.0 + 3.0 / (xi * eta))
                - (xi * xi * xi + eta * eta * eta) * 3.0 / (xi * xi * eta)
                + 0.5 * u.conj();
            assert!(d.norm() < 1e-9 * u.norm());
        }
    }

    proptest! {
        #[test]
        fn classification_symmetries(re in -40f64..40.0, im in -40f64..40.0, k in 0usize..3) {
            let u = c(re, im);
            let base = solve_q(u).classification;
            prop_assume!(base != Region::Boundary);
            let conj = solve_q(u.conj()).classification;
            let rot = solve_q(u * C::from_polar(1.0, 2.0 * PI * k as f64 / 3.0)).classification;
            prop_assert_eq!(base, conj);
            prop_assert_eq!(base, rot);
        }
    }
}
