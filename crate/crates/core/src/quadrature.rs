//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex-valued
//! integrands on finite intervals.
//!
//! Used both as an evaluation path (the exponential-family pairings) and as
//! the independent oracle against which the closed-form Faddeeva routes are
//! checked.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

// Kronrod abscissae, descending; odd indices are the embedded Gauss nodes.
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

/// Stopping rule for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-10,
            rel: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F>(f: &F, a: f64, b: f64) -> (Complex64, f64)
where
    F: Fn(f64) -> Complex64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    (value, error)
}

/// Integrates `f` over `[a, b]`, optionally pre-split at `breakpoints`.
///
/// Converges when the summed error estimate drops below
/// `max(tol.abs, tol.rel * |I|)`.
pub fn integrate<F>(f: F, a: f64, b: f64, breakpoints: &[f64], tol: Tolerance) -> Result<Estimate>
where
    F: Fn(f64) -> Complex64,
{
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::InvalidParameter(format!(
            "quadrature interval [{a}, {b}] must be finite and non-empty"
        )));
    }
    let mut cuts: Vec<f64> = vec![a];
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > a && p < b)
        .collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(b);

    let mut heap = BinaryHeap::new();
    let mut total = Complex64::new(0.0, 0.0);
    let mut total_err = 0.0;
    for w in cuts.windows(2) {
        let (value, error) = kronrod15(&f, w[0], w[1]);
        total += value;
        total_err += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    loop {
        if !(total.re.is_finite() && total.im.is_finite()) {
            return Err(Error::NonFinite("quadrature"));
        }
        let target = tol.abs.max(tol.rel * total.norm());
        if total_err <= target {
            return Ok(Estimate {
                value: total,
                error: total_err,
                intervals: heap.len(),
            });
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::QuadratureFailure {
                error: total_err,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in double precision
            return Err(Error::QuadratureFailure {
                error: total_err,
                intervals: heap.len() + 1,
            });
        }
        let (lv, le) = kronrod15(&f, worst.a, mid);
        let (rv, re) = kronrod15(&f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(
            |x| Complex64::new(x.powi(5) - 3.0 * x * x, x.powi(3)),
            -1.0,
            2.0,
            &[],
            Tolerance::default(),
        )
        .unwrap();
        // ∫ x^5 - 3x^2 = [x^6/6 - x^3] ; ∫ x^3 = [x^4/4]
        let re = (64.0 / 6.0 - 8.0) - (1.0 / 6.0 + 1.0);
        let im = 16.0 / 4.0 - 0.25;
        assert!((est.value.re - re).abs() < 1e-13);
        assert!((est.value.im - im).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_gaussian() {
        // ∫ e^{-x^2} e^{i 3 x} dx over R = sqrt(pi) e^{-9/4}
        let est = integrate(
            |x| Complex64::new(0.0, 3.0 * x).exp() * (-x * x).exp(),
            -12.0,
            12.0,
            &[],
            Tolerance::new(1e-14, 1e-13),
        )
        .unwrap();
        let exact = std::f64::consts::PI.sqrt() * (-2.25f64).exp();
        assert!((est.value.re - exact).abs() < 1e-13);
        assert!(est.value.im.abs() < 1e-13);
    }

    #[test]
    fn breakpoint_resolves_sharp_peak() {
        let eps = 1e-4;
        let est = integrate(
            |x| Complex64::new(1.0 / (x * x + eps * eps), 0.0),
            -1.0,
            1.0,
            &[0.0],
            Tolerance::new(1e-10, 1e-12),
        )
        .unwrap();
        let exact = 2.0 * (1.0 / eps).atan() / eps;
        assert!((est.value.re - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn rejects_empty_interval() {
        let r = integrate(
            |_| Complex64::new(1.0, 0.0),
            1.0,
            1.0,
            &[],
            Tolerance::default(),
        );
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn reports_failure_when_budget_exhausted() {
        let tol = Tolerance {
            abs: 1e-15,
            rel: 1e-15,
            max_intervals: 4,
        };
        let r = integrate(
            |x| Complex64::new((1.0 / x).sin(), 0.0),
            1e-6,
            1.0,
            &[],
            tol,
        );
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
