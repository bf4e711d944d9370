//! Stability of `lambda + alpha - beta e^{-lambda tau} = 0` and the stability
//! chart of the identical-frequency model.
//!
//! The identical-frequency characteristic equation is the case
//! `alpha = -i omega0`, `beta = k/2`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specialfn::lambert_w;

/// Default half-width of the Lambert branch range scanned by the oracle.
pub const LAMBERT_BRANCHES: i32 = 30;
const LAMBERT_BRANCH_CAP: i32 = 1 << 12;

/// Which inequality decided a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    ConditionA,
    ConditionB,
    Unstable,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::ConditionA => "ConditionA",
            Rule::ConditionB => "ConditionB",
            Rule::Unstable => "Unstable",
        })
    }
}

/// `stable` is true exactly when every characteristic root has negative real
/// part. `margin` is the slack of the deciding inequality: positive when
/// stable, non-positive otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub rule: Rule,
    pub margin: f64,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "delay tau must be positive, got {tau}"
        )))
    }
}

fn check_alpha_beta(alpha: Complex64, beta: Complex64) -> Result<()> {
    let finite = [alpha.re, alpha.im, beta.re, beta.im]
        .iter()
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite("delayed_root_sign"));
    }
    if beta.norm() == 0.0 {
        return Err(Error::BetaZero);
    }
    Ok(())
}

/// Decides whether all roots of `lambda + alpha - beta e^{-lambda tau} = 0`
/// lie in the open left half-plane, using the closed criterion:
///
/// (a) `Re alpha > |beta|`, or
/// (b) `-|beta| < Re alpha <= |beta|` and
///     `acos(cos(Im alpha tau + Arg beta)) > acos(Re alpha / |beta|) + tau sqrt(|beta|^2 - Re alpha^2)`.
pub fn delayed_root_sign(alpha: Complex64, beta: Complex64, tau: f64) -> Result<StabilityVerdict> {
    check_tau(tau)?;
    check_alpha_beta(alpha, beta)?;
    let b = beta.norm();
    let a = alpha.re;
    if a > b {
        return Ok(StabilityVerdict {
            stable: true,
            rule: Rule::ConditionA,
            margin: a - b,
        });
    }
    if a <= -b {
        return Ok(StabilityVerdict {
            stable: false,
            rule: Rule::Unstable,
            margin: a + b,
        });
    }
    let lhs = (alpha.im * tau + beta.arg()).cos().acos();
    let rhs = (a / b).clamp(-1.0, 1.0).acos() + tau * (b * b - a * a).max(0.0).sqrt();
    let margin = lhs - rhs;
    Ok(if margin > 0.0 {
        StabilityVerdict {
            stable: true,
            rule: Rule::ConditionB,
            margin,
        }
    } else {
        StabilityVerdict {
            stable: false,
            rule: Rule::Unstable,
            margin,
        }
    })
}

/// Rightmost characteristic root over Lambert branches, returned as
/// `(Re lambda, branch)`.
///
/// Roots are `(1/tau) W_n(beta tau e^{alpha tau}) - alpha`. Real parts fall off
/// away from the principal branches, so the scan starts at `|n| <= 30` and
/// doubles the range while the maximum sits on its edge.
pub fn lambert_rightmost(alpha: Complex64, beta: Complex64, tau: f64) -> Result<(f64, i32)> {
    check_tau(tau)?;
    check_alpha_beta(alpha, beta)?;
    let z = beta * tau * (alpha * tau).exp();
    let root_re = |n: i32| -> Result<f64> { Ok((lambert_w(n, z)? / tau - alpha).re) };
    let mut best = (f64::NEG_INFINITY, 0);
    let mut scanned = 0;
    let mut half = LAMBERT_BRANCHES;
    loop {
        for n in -half..=half {
            if n.abs() <= scanned && scanned > 0 {
                continue;
            }
            let re = root_re(n)?;
            if re > best.0 {
                best = (re, n);
            }
        }
        scanned = half;
        if best.1.abs() < half || half >= LAMBERT_BRANCH_CAP {
            return Ok(best);
        }
        half *= 2;
    }
}

/// `k_c(tau) = (2/tau) acos(cos(omega0 tau)) - pi/tau`.
pub fn critical_coupling(tau: f64, omega0: f64) -> Result<f64> {
    check_tau(tau)?;
    if !omega0.is_finite() {
        return Err(Error::NonFinite("critical_coupling"));
    }
    if omega0 == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    Ok(2.0 / tau * (omega0 * tau).cos().acos() - PI / tau)
}

/// How [`stability_map`] classifies each cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityMode {
    /// `0 < k / k_c < 1`.
    ClosedForm,
    /// [`delayed_root_sign`] with `alpha = -i omega0`, `beta = k/2`.
    Nishi,
    /// Sign of [`lambert_rightmost`].
    Lambert,
}

impl FromStr for StabilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed_form" | "closed-form" => Ok(StabilityMode::ClosedForm),
            "nishi" => Ok(StabilityMode::Nishi),
            "lambert" => Ok(StabilityMode::Lambert),
            _ => Err(Error::InvalidParameter(format!(
                "unknown stability mode '{s}' (expected closed_form, nishi or lambert)"
            ))),
        }
    }
}

/// Verdict for the identical-frequency model at one `(tau, k)`.
///
/// The closed form takes the sign of `k` into account: with `k` and `k_c` of
/// opposite signs the principal root sits in the right half-plane however
/// small `|k|` is. At `k = 0` the only root is `-i omega0`, on the axis, and
/// every mode reports a marginal (not stable) cell.
pub fn identical_verdict(
    tau: f64,
    k: f64,
    omega0: f64,
    mode: StabilityMode,
) -> Result<StabilityVerdict> {
    if k == 0.0 {
        check_tau(tau)?;
        return Ok(StabilityVerdict {
            stable: false,
            rule: Rule::Unstable,
            margin: 0.0,
        });
    }
    let alpha = Complex64::new(0.0, -omega0);
    let beta = Complex64::new(0.5 * k, 0.0);
    match mode {
        StabilityMode::ClosedForm => {
            let kc = critical_coupling(tau, omega0)?;
            let margin = if k * kc > 0.0 {
                kc.abs() - k.abs()
            } else {
                -k.abs()
            };
            let stable = margin > 0.0;
            Ok(StabilityVerdict {
                stable,
                rule: if stable {
                    Rule::ConditionB
                } else {
                    Rule::Unstable
                },
                margin,
            })
        }
        StabilityMode::Nishi => delayed_root_sign(alpha, beta, tau),
        StabilityMode::Lambert => {
            let (re, _) = lambert_rightmost(alpha, beta, tau)?;
            let stable = re < 0.0;
            let rule = match (stable, alpha.re > beta.norm()) {
                (false, _) => Rule::Unstable,
                (true, true) => Rule::ConditionA,
                (true, false) => Rule::ConditionB,
            };
            Ok(StabilityVerdict {
                stable,
                rule,
                margin: -re,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCell {
    pub tau: f64,
    pub k: f64,
    pub verdict: StabilityVerdict,
}

/// Verdicts on a `tau` by `k` grid, ordered by `tau` index then `k` index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMap {
    pub omega0: f64,
    pub mode: StabilityMode,
    pub cells: Vec<StabilityCell>,
}

impl StabilityMap {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "tau,k,stable,rule,margin")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{}",
                crate::fmt_f64(c.tau),
                crate::fmt_f64(c.k),
                c.verdict.stable,
                c.verdict.rule,
                crate::fmt_f64(c.verdict.margin)
            )?;
        }
        Ok(())
    }
}

/// Classifies every `(tau, k)` cell. Cells are evaluated in parallel on the
/// current rayon pool; the output order does not depend on scheduling.
pub fn stability_map(
    tau_grid: &[f64],
    k_grid: &[f64],
    omega0: f64,
    mode: StabilityMode,
) -> Result<StabilityMap> {
    for &tau in tau_grid {
        check_tau(tau)?;
    }
    let pairs: Vec<(f64, f64)> = tau_grid
        .iter()
        .flat_map(|&tau| k_grid.iter().map(move |&k| (tau, k)))
        .collect();
    let cells: Result<Vec<StabilityCell>> = pairs
        .par_iter()
        .map(|&(tau, k)| {
            Ok(StabilityCell {
                tau,
                k,
                verdict: identical_verdict(tau, k, omega0, mode)?,
            })
        })
        .collect();
    Ok(StabilityMap {
        omega0,
        mode,
        cells: cells?,
    })
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
