//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use respoles::dispersion::SystemParams;
use respoles::quadrature::{integrate, Tolerance};
use respoles::Complex64;

const SQRT_PI: f64 = 1.772_453_850_905_516;

fn tight() -> Tolerance {
    Tolerance {
        abs: 1e-300,
        rel: 1e-13,
        max_intervals: 20_000,
    }
}

/// `w(z)` by direct quadrature, without any of the library's expansions.
///
/// Upper half-plane: `(1/sqrt(pi)) int_0^inf exp(-s^2/4 + i z s) ds`.
/// Lower half-plane: `exp(-z^2) + (2iz/sqrt(pi)) int_0^1 exp(-z^2 (1 - u^2)) du`.
pub fn faddeeva_oracle(z: Complex64) -> Complex64 {
    if z.im >= 0.0 {
        // The integrand is below 1e-300 past s = 53; split at the oscillation scale.
        let end = 53.0;
        let period = 2.0 * PI / z.re.abs().max(1.0);
        let pieces = ((end / period).ceil() as usize).min(400);
        let bps: Vec<f64> = (1..pieces)
            .map(|i| end * i as f64 / pieces as f64)
            .collect();
        let i = Complex64::i();
        let est = integrate(
            |s| (-0.25 * s * s + i * z * s).exp(),
            0.0,
            end,
            &bps,
            tight(),
        )
        .unwrap();
        est.value / SQRT_PI
    } else {
        let z2 = z * z;
        let bps: Vec<f64> = (1..64).map(|i| i as f64 / 64.0).collect();
        let est = integrate(|u| (-z2 * (1.0 - u * u)).exp(), 0.0, 1.0, &bps, tight()).unwrap();
        (-z2).exp() + Complex64::new(0.0, 2.0) * z / SQRT_PI * est.value
    }
}

/// `int g(omega) / (lambda - i omega) d omega` for the Gaussian `g`, by quadrature
/// on the real line. Only valid for `Re lambda > 0`.
pub fn cauchy_oracle(lambda: Complex64, p: &SystemParams) -> Complex64 {
    let sd = (0.5 / p.h).sqrt();
    let (lo, hi) = (p.omega0 - 40.0 * sd, p.omega0 + 40.0 * sd);
    let norm = (p.h / PI).sqrt();
    let width = lambda.re.max(1e-3);
    let mut bps: Vec<f64> = (1..80).map(|i| lo + (hi - lo) * i as f64 / 80.0).collect();
    for d in [-4.0, -1.0, 0.0, 1.0, 4.0] {
        bps.push(lambda.im + d * width);
    }
    bps.retain(|b| *b > lo && *b < hi);
    bps.sort_by(f64::total_cmp);
    let est = integrate(
        |w| {
            let g = norm * (-p.h * (w - p.omega0).powi(2)).exp();
            g / (lambda - Complex64::new(0.0, w))
        },
        lo,
        hi,
        &bps,
        tight(),
    )
    .unwrap();
    est.value
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
