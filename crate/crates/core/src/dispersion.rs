//! Characteristic functions of the delayed model with Gaussian frequencies.
//!
//! With `a = sqrt(h) (lambda - i omega0)` the Cauchy integral
//! `int g(w) / (lambda - i w) dw` equals `sqrt(pi h) w(i a)` for
//! `Re lambda > 0` and `-sqrt(pi h) w(-i a)` for `Re lambda < 0`, where `w`
//! is the Faddeeva function. Continuing the right half-plane value into the
//! left half-plane adds the jump `2 pi g(lambda / i)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::specialfn::{faddeeva, faddeeva_deriv_from, MAX_EXPONENT};

/// Half-width of the band around the imaginary axis treated as the axis.
pub const AXIS_EPSILON: f64 = 1e-12;

/// The jump term is evaluated in log space and rejected beyond this exponent.
pub const JUMP_MAX_EXPONENT: f64 = 700.0;

/// Truncation of the frequency integrals, in units of `1/sqrt(h)`.
pub const QUADRATURE_HALF_WIDTH: f64 = 40.0;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Model parameters: coupling `k`, delay `tau`, mean frequency `omega0` and
/// Gaussian concentration `h` (variance `1/(2h)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub k: f64,
    pub tau: f64,
    pub omega0: f64,
    pub h: f64,
}

impl SystemParams {
    pub fn new(k: f64, tau: f64, omega0: f64, h: f64) -> Result<Self> {
        let p = SystemParams { k, tau, omega0, h };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.omega0.is_finite()) {
            return Err(Error::InvalidParameter(
                "k and omega0 must be finite".into(),
            ));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delay tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "concentration h must be positive, got {}",
                self.h
            )));
        }
        Ok(())
    }

    pub fn with_k(self, k: f64) -> Self {
        SystemParams { k, ..self }
    }

    pub fn with_h(self, h: f64) -> Self {
        SystemParams { h, ..self }
    }
}

/// Which branch of the three-way definition applies at `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HalfPlaneTag {
    Right,
    Axis,
    Left,
}

impl HalfPlaneTag {
    pub fn of(lambda: Complex64) -> Self {
        if lambda.re.abs() <= AXIS_EPSILON {
            HalfPlaneTag::Axis
        } else if lambda.re > 0.0 {
            HalfPlaneTag::Right
        } else {
            HalfPlaneTag::Left
        }
    }
}

fn check_finite(lambda: Complex64, what: &'static str) -> Result<()> {
    if lambda.re.is_finite() && lambda.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn exp_checked(z: Complex64) -> Result<Complex64> {
    if z.re > MAX_EXPONENT {
        return Err(Error::Overflow { exponent: z.re });
    }
    Ok(z.exp())
}

/// `lambda - i omega0 - (k/2) e^{-lambda tau}`, the characteristic function
/// of the identical-frequency limit.
pub fn char_identical(lambda: Complex64, p: &SystemParams) -> Result<Complex64> {
    check_finite(lambda, "char_identical")?;
    let delayed = exp_checked(-lambda * p.tau)?;
    Ok(lambda - I * p.omega0 - 0.5 * p.k * delayed)
}

fn scaled_shift(lambda: Complex64, p: &SystemParams) -> Complex64 {
    p.h.sqrt() * (lambda - I * p.omega0)
}

/// `int g(w) / (lambda - i w) dw` off the imaginary axis, without any
/// continuation term.
pub fn cauchy_gauss(lambda: Complex64, p: &SystemParams) -> Result<Complex64> {
    check_finite(lambda, "cauchy_gauss")?;
    if HalfPlaneTag::of(lambda) == HalfPlaneTag::Axis {
        return Err(Error::OnAxis { re: lambda.re });
    }
    let a = scaled_shift(lambda, p);
    let scale = (PI * p.h).sqrt();
    if lambda.re > 0.0 {
        Ok(scale * faddeeva(I * a)?)
    } else {
        Ok(-scale * faddeeva(-I * a)?)
    }
}

/// Direct adaptive quadrature of the Cauchy integral; an independent check
/// on [`cauchy_gauss`].
pub fn cauchy_gauss_quadrature(
    lambda: Complex64,
    p: &SystemParams,
    tol: Tolerance,
) -> Result<Complex64> {
    pairing_quadrature(lambda, 0.0, p, tol)
}

/// `log(2 pi g(lambda/i) e^{a lambda})`, the log of the continuation jump for
/// the test function `e^{i a w}`.
fn log_jump(lambda: Complex64, a: f64, p: &SystemParams) -> Complex64 {
    let shift = lambda - I * p.omega0;
    (2.0 * (PI * p.h).sqrt()).ln() + p.h * shift * shift + a * lambda
}

fn jump_from_log(log_j: Complex64) -> Result<Complex64> {
    if log_j.re > JUMP_MAX_EXPONENT {
        return Err(Error::Overflow { exponent: log_j.re });
    }
    Ok(log_j.exp())
}

/// The continuation jump `2 pi g(lambda / i)`.
pub fn jump_term(lambda: Complex64, p: &SystemParams) -> Result<Complex64> {
    check_finite(lambda, "jump_term")?;
    jump_from_log(log_jump(lambda, 0.0, p))
}

/// `<A(lambda) 1 | 1>`: the Cauchy integral continued from the right half
/// plane. On the axis the right boundary value is returned.
pub fn continued_pairing_ii(lambda: Complex64, p: &SystemParams) -> Result<Complex64> {
    Ok(continued_pairing_with_deriv(lambda, p)?.0)
}

/// The continued pairing and its derivative in `lambda`.
pub fn continued_pairing_with_deriv(
    lambda: Complex64,
    p: &SystemParams,
) -> Result<(Complex64, Complex64)> {
    check_finite(lambda, "continued_pairing_ii")?;
    let a = scaled_shift(lambda, p);
    let scale = (PI * p.h).sqrt();
    // d/dlambda of sqrt(pi h) w(+-i a) is +-i h sqrt(pi) w'(+-i a)
    let dscale = I * p.h * PI.sqrt();
    match HalfPlaneTag::of(lambda) {
        HalfPlaneTag::Right | HalfPlaneTag::Axis => {
            let z = I * a;
            let w = faddeeva(z)?;
            Ok((scale * w, dscale * faddeeva_deriv_from(z, w)))
        }
        HalfPlaneTag::Left => {
            let z = -I * a;
            let w = faddeeva(z)?;
            let jump = jump_term(lambda, p)?;
            let djump = 2.0 * p.h * (lambda - I * p.omega0) * jump;
            Ok((
                -scale * w + jump,
                dscale * faddeeva_deriv_from(z, w) + djump,
            ))
        }
    }
}

/// `F(lambda)` together with its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharEval {
    pub value: Complex64,
    pub deriv: Complex64,
}

/// Evaluates `F(lambda) = 1 - (k/2) e^{-lambda tau} <A(lambda) 1 | 1>` and
/// `F'(lambda)` in one pass.
pub fn gen_char_eval(lambda: Complex64, p: &SystemParams) -> Result<CharEval> {
    check_finite(lambda, "gen_char")?;
    if p.k == 0.0 {
        return Ok(CharEval {
            value: Complex64::new(1.0, 0.0),
            deriv: Complex64::new(0.0, 0.0),
        });
    }
    let (pairing, pairing_deriv) = continued_pairing_with_deriv(lambda, p)?;
    let factor = 0.5 * p.k * exp_checked(-lambda * p.tau)?;
    let value = 1.0 - factor * pairing;
    let deriv = factor * (p.tau * pairing - pairing_deriv);
    if !(value.re.is_finite()
        && value.im.is_finite()
        && deriv.re.is_finite()
        && deriv.im.is_finite())
    {
        return Err(Error::NonFinite("gen_char"));
    }
    Ok(CharEval { value, deriv })
}

/// The generalized characteristic function; resonance poles are its zeros.
pub fn gen_char(lambda: Complex64, p: &SystemParams) -> Result<Complex64> {
    Ok(gen_char_eval(lambda, p)?.value)
}

pub fn gen_char_deriv(lambda: Complex64, p: &SystemParams) -> Result<Complex64> {
    Ok(gen_char_eval(lambda, p)?.deriv)
}

/// `G(lambda) = (2/k) e^{lambda tau} - <A(lambda) 1 | 1>`, so that
/// `F = (k/2) e^{-lambda tau} G`.
pub fn resolvent_denominator(lambda: Complex64, p: &SystemParams) -> Result<Complex64> {
    if p.k == 0.0 {
        return Err(Error::InvalidParameter("G is undefined for k = 0".into()));
    }
    let pairing = continued_pairing_ii(lambda, p)?;
    Ok(2.0 / p.k * exp_checked(lambda * p.tau)? - pairing)
}

/// `G'(lambda)`; its reciprocal at a simple zero is the residue weight.
pub fn resolvent_denominator_deriv(lambda: Complex64, p: &SystemParams) -> Result<Complex64> {
    if p.k == 0.0 {
        return Err(Error::InvalidParameter("G is undefined for k = 0".into()));
    }
    let (_, pairing_deriv) = continued_pairing_with_deriv(lambda, p)?;
    Ok(2.0 / p.k * p.tau * exp_checked(lambda * p.tau)? - pairing_deriv)
}

/// `<A(lambda) e^{i a w} | 1>`: the pairing of `e^{i a w}` against the
/// constant function, continued in `lambda` like [`continued_pairing_ii`].
///
/// Evaluated in closed form as
/// `sqrt(pi h) e^{i a omega0 - a^2/(4h)} w(i (a_lambda + a/(2 sqrt h)))`.
/// `a = 0` defers to [`continued_pairing_ii`].
pub fn pairing_exp_family(lambda: Complex64, a: f64, p: &SystemParams) -> Result<Complex64> {
    check_finite(lambda, "pairing_exp_family")?;
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "exponential test functions need a >= 0, got {a}"
        )));
    }
    if a == 0.0 {
        return continued_pairing_ii(lambda, p);
    }
    let sh = p.h.sqrt();
    let y = scaled_shift(lambda, p) + a / (2.0 * sh);
    let envelope = (PI * p.h).sqrt() * Complex64::new(-a * a / (4.0 * p.h), a * p.omega0).exp();
    match HalfPlaneTag::of(lambda) {
        HalfPlaneTag::Right | HalfPlaneTag::Axis => Ok(envelope * faddeeva(I * y)?),
        HalfPlaneTag::Left => {
            let jump = jump_from_log(log_jump(lambda, a, p))?;
            Ok(-envelope * faddeeva(-I * y)? + jump)
        }
    }
}

/// [`pairing_exp_family`] by adaptive Gauss-Kronrod quadrature of the
/// frequency integral over `omega0 +- 40/sqrt(h)`, plus the jump term in the
/// left half-plane. Fails on the axis, where the integrand is singular.
pub fn pairing_exp_family_quadrature(
    lambda: Complex64,
    a: f64,
    p: &SystemParams,
    tol: Tolerance,
) -> Result<Complex64> {
    let base = pairing_quadrature(lambda, a, p, tol)?;
    if HalfPlaneTag::of(lambda) == HalfPlaneTag::Left {
        Ok(base + jump_from_log(log_jump(lambda, a, p))?)
    } else {
        Ok(base)
    }
}

fn pairing_quadrature(
    lambda: Complex64,
    a: f64,
    p: &SystemParams,
    tol: Tolerance,
) -> Result<Complex64> {
    check_finite(lambda, "pairing quadrature")?;
    if HalfPlaneTag::of(lambda) == HalfPlaneTag::Axis {
        return Err(Error::OnAxis { re: lambda.re });
    }
    let half = QUADRATURE_HALF_WIDTH / p.h.sqrt();
    let (lo, hi) = (p.omega0 - half, p.omega0 + half);
    let norm = (p.h / PI).sqrt();
    // the integrand peaks where i w is closest to lambda
    let mut breaks = vec![p.omega0];
    let near = lambda.im;
    let width = lambda.re.abs();
    for d in [-4.0, -1.0, 0.0, 1.0, 4.0] {
        breaks.push(near + d * width);
    }
    let est = quadrature::integrate(
        |w| {
            let d = w - p.omega0;
            Complex64::new(0.0, a * w).exp() * (norm * (-p.h * d * d).exp()) / (lambda - I * w)
        },
        lo,
        hi,
        &breaks,
        tol,
    )?;
    Ok(est.value)
}
