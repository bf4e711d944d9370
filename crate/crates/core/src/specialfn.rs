//! Complex special functions: multi-branch Lambert W, the Faddeeva function
//! and the Gaussian frequency density continued to complex arguments.

use std::f64::consts::{E, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// 2/sqrt(pi)
pub const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Largest exponent accepted by `exp` before declaring overflow.
pub const MAX_EXPONENT: f64 = 709.0;

pub const LAMBERT_MAX_ITERATIONS: usize = 60;

fn is_finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

// ---------------------------------------------------------------------------
// Lambert W
// ---------------------------------------------------------------------------

/// Branch `branch` of the Lambert W function, the multi-valued inverse of
/// `w -> w e^w`.
///
/// Branches follow the usual convention: W_0 is real on [-1/e, inf), W_{-1}
/// is real on [-1/e, 0), and values on a branch cut are the limits from
/// above (counter-clockwise continuity). A zero imaginary part is read as +0.
pub fn lambert_w(branch: i32, z: Complex64) -> Result<Complex64> {
    if !is_finite(z) {
        return Err(Error::NonFinite("lambert_w"));
    }
    let z = Complex64::new(z.re, if z.im == 0.0 { 0.0 } else { z.im });
    if z.re == 0.0 && z.im == 0.0 {
        return if branch == 0 {
            Ok(Complex64::new(0.0, 0.0))
        } else {
            Err(Error::BranchDomain { branch })
        };
    }

    let touches_branch_point =
        branch == 0 || (branch == -1 && z.im >= 0.0) || (branch == 1 && z.im < 0.0);
    let branch_offset = E * z + 1.0;
    if touches_branch_point && branch_offset.norm() == 0.0 {
        return Ok(Complex64::new(-1.0, 0.0));
    }

    let mut seeds: Vec<Complex64> = Vec::with_capacity(4);
    if touches_branch_point && (z + 1.0 / E).norm() < 0.3 {
        seeds.push(branch_point_series(branch_offset, branch == 0));
    }
    if branch == 0 && in_pade_region(z) {
        seeds.push(pade0(z));
    }
    seeds.push(asymptotic_seed(branch, z));
    // fallbacks, only consulted if the preferred seed lands on another branch
    if touches_branch_point {
        seeds.push(branch_point_series(branch_offset, branch == 0));
    }
    if branch == 0 {
        seeds.push(pade0(z));
    }

    let mut last_err = None;
    for seed in seeds {
        match halley(seed, z) {
            Ok(w) if on_branch(w, z, branch) => return Ok(w),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(Error::NoConvergence {
        what: "lambert_w branch selection",
        iterations: LAMBERT_MAX_ITERATIONS,
        residual: f64::NAN,
    }))
}

/// Series about the branch point in p = sqrt(2(e z + 1)).
fn branch_point_series(branch_offset: Complex64, principal: bool) -> Complex64 {
    let p = (2.0 * branch_offset).sqrt();
    let p = if principal { p } else { -p };
    // -1 + p - p^2/3 + 11/72 p^3 - 43/540 p^4 + 769/17280 p^5 - 221/8505 p^6
    const C: [f64; 7] = [
        -1.0,
        1.0,
        -1.0 / 3.0,
        11.0 / 72.0,
        -43.0 / 540.0,
        769.0 / 17280.0,
        -221.0 / 8505.0,
    ];
    C.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * p + c)
}

fn in_pade_region(z: Complex64) -> bool {
    -1.0 < z.re && z.re < 1.5 && z.im.abs() < 1.0 && -2.5 * z.im.abs() - 0.2 < z.re
}

/// [2/2] Padé approximant of W_0(z)/z about the origin.
fn pade0(z: Complex64) -> Complex64 {
    let num = 1.0 + z * (1.9 + z * (17.0 / 60.0));
    let den = 1.0 + z * (2.9 + z * (101.0 / 60.0));
    z * num / den
}

fn asymptotic_seed(branch: i32, z: Complex64) -> Complex64 {
    let l1 = z.ln() + Complex64::new(0.0, 2.0 * PI * branch as f64);
    let l2 = l1.ln();
    l1 - l2 + l2 / l1 + l2 * (l2 - 2.0) / (2.0 * l1 * l1)
}

fn halley(seed: Complex64, z: Complex64) -> Result<Complex64> {
    let mut w = seed;
    let scale = 1.0 + z.norm();
    for _ in 0..LAMBERT_MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - z;
        if f.norm() == 0.0 {
            return Ok(w);
        }
        let wp1 = w + 1.0;
        if wp1.norm() == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        if !is_finite(step) {
            break;
        }
        w -= step;
        if step.norm() <= 4.0 * f64::EPSILON * (1.0 + w.norm()) {
            break;
        }
    }
    let residual = (w * w.exp() - z).norm();
    if is_finite(w) && residual <= 1e-13 * scale {
        Ok(w)
    } else {
        Err(Error::NoConvergence {
            what: "lambert_w",
            iterations: LAMBERT_MAX_ITERATIONS,
            residual,
        })
    }
}

/// Branch index of a solution of w e^w = z, from w + ln w = ln z + 2 pi i k.
fn branch_index(w: Complex64, z: Complex64) -> i64 {
    ((w + w.ln() - z.ln()).im / (2.0 * PI)).round() as i64
}

fn on_branch(w: Complex64, z: Complex64, branch: i32) -> bool {
    if w.norm() == 0.0 {
        return branch == 0;
    }
    let k = branch_index(w, z);
    if k == branch as i64 {
        return true;
    }
    // On the negative real axis the identity picks a neighbouring index for
    // the boundary values of the adjacent branches.
    z.im == 0.0 && z.re < 0.0 && (k - branch as i64).abs() == 1 && {
        // disambiguate via the exact branch-cut geometry: W_0 has Im in
        // (-pi, pi), W_{-1} on [-1/e, 0) is real and below -1.
        match branch {
            0 => w.im.abs() < PI,
            -1 => w.im <= 0.0 && w.im > -2.0 * PI,
            _ => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Faddeeva function
// ---------------------------------------------------------------------------

// Trapezoid step for the pole-corrected rule; aliasing error ~ exp(-pi^2/h^2).
const TRAPEZOID_STEP: f64 = 0.5;
const TRAPEZOID_SPAN: f64 = 6.6;

/// Faddeeva function w(z) = exp(-z^2) erfc(-iz).
///
/// Upper half-plane values come from a Taylor series near the origin, a
/// pole-corrected trapezoidal rule in the strip 0 <= Im z < 5, and the Laplace
/// continued fraction beyond. The lower half-plane is reached through
/// w(z) = 2 exp(-z^2) - w(-z).
pub fn faddeeva(z: Complex64) -> Result<Complex64> {
    if !is_finite(z) {
        return Err(Error::NonFinite("faddeeva"));
    }
    if z.im >= 0.0 {
        return Ok(faddeeva_upper(z));
    }
    let exponent = -(z * z);
    if exponent.re > MAX_EXPONENT {
        return Err(Error::Overflow {
            exponent: exponent.re,
        });
    }
    Ok(2.0 * exponent.exp() - faddeeva_upper(-z))
}

/// Derivative w'(z) = -2 z w(z) + 2i/sqrt(pi).
pub fn faddeeva_deriv(z: Complex64) -> Result<Complex64> {
    let w = faddeeva(z)?;
    Ok(faddeeva_deriv_from(z, w))
}

/// Derivative when w(z) is already known.
pub fn faddeeva_deriv_from(z: Complex64, w: Complex64) -> Complex64 {
    -2.0 * z * w + Complex64::new(0.0, TWO_OVER_SQRT_PI)
}

fn faddeeva_upper(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r < 0.5 {
        taylor(z)
    } else if z.im >= 5.0 || r >= 30.0 {
        continued_fraction(z)
    } else {
        pole_corrected_trapezoid(z)
    }
}

// w(z) = sum_n (iz)^n / Gamma(n/2 + 1)
fn taylor(z: Complex64) -> Complex64 {
    let iz = I * z;
    let q = -(z * z);
    let mut even = Complex64::new(1.0, 0.0);
    // Gamma(3/2) = sqrt(pi)/2
    let mut odd = iz * TWO_OVER_SQRT_PI;
    let mut sum = even + odd;
    for m in 1..60 {
        let mf = m as f64;
        even *= q / mf;
        odd *= q / (mf + 0.5);
        sum += even + odd;
        if even.norm() + odd.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

fn continued_fraction(z: Complex64) -> Complex64 {
    // term count fitted by Poppe & Wijers, doubled for margin
    let rho = ((z.re / 6.3).powi(2) + (z.im / 4.4).powi(2)).sqrt();
    let terms = (2.0 * (3.0 + 1442.0 / (26.0 * rho + 77.0))).ceil() as usize;
    let mut tail = Complex64::new(0.0, 0.0);
    for n in (1..=terms).rev() {
        tail = (0.5 * n as f64) / (z - tail);
    }
    Complex64::new(0.0, INV_SQRT_PI) / (z - tail)
}

// Trapezoidal rule for (i/pi) int e^{-t^2}/(z-t) dt on nodes (n+delta)h plus
// the residue correction from the pole at t = z. The node offset keeps Re z
// at least h/4 from every node, bounding cancellation near the real axis.
fn pole_corrected_trapezoid(z: Complex64) -> Complex64 {
    let h = TRAPEZOID_STEP;
    let frac = z.re / h - (z.re / h).floor();
    let delta = if (0.25..=0.75).contains(&frac) {
        0.0
    } else {
        0.5
    };
    let n_lo = (-TRAPEZOID_SPAN / h - delta).ceil() as i64;
    let n_hi = (TRAPEZOID_SPAN / h - delta).floor() as i64;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in n_lo..=n_hi {
        let t = (n as f64 + delta) * h;
        sum += (-t * t).exp() / (z - t);
    }
    let phase = Complex64::new(0.0, 2.0 * PI / h) * (z - delta * h);
    let q = phase.exp();
    let correction = 2.0 * (phase - z * z).exp() / (q - 1.0);
    Complex64::new(0.0, h / PI) * sum + correction
}

// ---------------------------------------------------------------------------
// Gaussian density
// ---------------------------------------------------------------------------

/// Gaussian density sqrt(h/pi) exp(-h (zeta - omega0)^2) at complex `zeta`.
pub fn gaussian_density_complex(h: f64, omega0: f64, zeta: Complex64) -> Result<Complex64> {
    if h.is_nan() || h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "concentration h must be positive, got {h}"
        )));
    }
    if !is_finite(zeta) || !omega0.is_finite() {
        return Err(Error::NonFinite("gaussian_density_complex"));
    }
    let shifted = zeta - omega0;
    let exponent = -h * shifted * shifted;
    if exponent.re > MAX_EXPONENT {
        return Err(Error::Overflow {
            exponent: exponent.re,
        });
    }
    Ok((h / PI).sqrt() * exponent.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lambert_trivial_values() {
        assert_eq!(lambert_w(0, c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert!(close(lambert_w(0, c(E, 0.0)).unwrap(), c(1.0, 0.0), 1e-15));
        let w = lambert_w(-1, c(-1.0 / E, 0.0)).unwrap();
        assert!(close(w, c(-1.0, 0.0), 1e-7), "{w}");
        let w0 = lambert_w(0, c(-1.0 / E, 0.0)).unwrap();
        assert!(close(w0, c(-1.0, 0.0), 1e-7), "{w0}");
    }

    #[test]
    fn lambert_omega_constant() {
        // fixed-point oracle: Omega = exp(-Omega)
        let mut omega = 0.5f64;
        for _ in 0..200 {
            omega = (-omega).exp();
        }
        let w = lambert_w(0, c(1.0, 0.0)).unwrap();
        assert!((w.re - omega).abs() < 1e-15);
        assert!((w.re - 0.567_143_290_409_783_8).abs() < 1e-15);
        assert_eq!(w.im, 0.0);
    }

    #[test]
    fn lambert_branch_domain() {
        assert_eq!(
            lambert_w(1, c(0.0, 0.0)),
            Err(Error::BranchDomain { branch: 1 })
        );
        assert!(lambert_w(0, c(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn lambert_real_branches_are_real() {
        for i in 1..200 {
            let x = -1.0 / E + (i as f64) * 0.05;
            let w = lambert_w(0, c(x, 0.0)).unwrap();
            assert!(w.im.abs() < 1e-14, "W0({x}) = {w}");
            assert!(w.re >= -1.0);
        }
        for i in 1..100 {
            let x = -1.0 / E * (i as f64) / 100.0;
            let w = lambert_w(-1, c(x, 0.0)).unwrap();
            assert!(w.im.abs() < 1e-14, "W-1({x}) = {w}");
            assert!(w.re <= -1.0 + 1e-7);
        }
    }

    #[test]
    fn lambert_on_cut_is_continuous_from_above() {
        for &x in &[-0.5, -1.0, -3.0, -20.0] {
            for k in -2..=2 {
                let on = lambert_w(k, c(x, 0.0)).unwrap();
                let above = lambert_w(k, c(x, 1e-12)).unwrap();
                assert!((on - above).norm() < 1e-9, "k={k} x={x}: {on} vs {above}");
            }
        }
    }

    #[test]
    fn lambert_distinct_branches() {
        let z = c(0.3, -1.7);
        let ws: Vec<_> = (-4..=4).map(|k| lambert_w(k, z).unwrap()).collect();
        for i in 0..ws.len() {
            for j in i + 1..ws.len() {
                assert!((ws[i] - ws[j]).norm() > 1.0);
            }
        }
    }

    #[test]
    fn lambert_large_branch_index() {
        for k in [-30, -17, 17, 30] {
            let z = c(-0.7, 2.2);
            let w = lambert_w(k, z).unwrap();
            assert!((w * w.exp() - z).norm() < 1e-12 * (1.0 + z.norm()));
            assert_eq!(branch_index(w, z), k as i64);
        }
    }

    #[test]
    fn faddeeva_origin_and_imaginary_axis() {
        assert!(close(faddeeva(c(0.0, 0.0)).unwrap(), c(1.0, 0.0), 1e-16));
        // w(i) = e erfc(1)
        let w = faddeeva(c(0.0, 1.0)).unwrap();
        assert!((w.re - 0.427_583_576_155_807).abs() < 1e-15, "{w}");
        assert!(w.im.abs() < 1e-16);
    }

    #[test]
    fn faddeeva_region_seams_agree() {
        // the trapezoid rule is accurate on both sides of every seam
        for &z in &[
            c(0.499_999, 0.0),
            c(0.3, 0.4),
            c(0.3, 4.999_999),
            c(0.3, 5.000_001),
            c(29.999_99, 0.1),
            c(30.000_01, 0.1),
        ] {
            let a = faddeeva_upper(z);
            let b = pole_corrected_trapezoid(z);
            assert!((a - b).norm() < 1e-13 * a.norm(), "{z}: {a} vs {b}");
        }
    }

    #[test]
    fn faddeeva_reflection_overflow() {
        let r = faddeeva(c(1.0, -40.0));
        assert!(matches!(r, Err(Error::Overflow { .. })));
    }

    #[test]
    fn faddeeva_derivative_at_origin() {
        let d = faddeeva_deriv(c(0.0, 0.0)).unwrap();
        assert!(close(d, c(0.0, std::f64::consts::FRAC_2_SQRT_PI), 1e-10));
    }

    #[test]
    fn faddeeva_derivative_matches_finite_difference() {
        let z = c(1.0, 0.0);
        let eps = 1e-6;
        let fd = (faddeeva(z + eps).unwrap() - faddeeva(z - eps).unwrap()) / (2.0 * eps);
        let d = faddeeva_deriv(z).unwrap();
        assert!((fd - d).norm() < 1e-8, "{fd} vs {d}");
    }

    #[test]
    fn gaussian_peak_values() {
        let v = gaussian_density_complex(1.0, 0.0, c(0.0, 0.0)).unwrap();
        assert!((v.re - 1.0 / PI.sqrt()).abs() < 1e-16);
        let v = gaussian_density_complex(4.0, 2.0, c(2.0, 0.0)).unwrap();
        assert!((v.re - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-15);
    }

    #[test]
    fn gaussian_at_rotated_argument() {
        // zeta = lambda / i with lambda = -0.5 gives zeta = 0.5i
        let lambda = c(-0.5, 0.0);
        let zeta = lambda / I;
        let v = gaussian_density_complex(1.0, 0.0, zeta).unwrap();
        let expected = (1.0 / PI).sqrt() * 0.25f64.exp();
        assert!((v.re - expected).abs() < 1e-15 && v.im.abs() < 1e-15);
    }

    #[test]
    fn gaussian_rejects_bad_input() {
        assert!(gaussian_density_complex(0.0, 0.0, c(0.0, 0.0)).is_err());
        assert!(matches!(
            gaussian_density_complex(1.0, 0.0, c(0.0, 40.0)),
            Err(Error::Overflow { .. })
        ));
    }
}
