//! Time-domain simulation of the delayed model and the residue expansion of
//! its order parameter.
//!
//! Frequencies are discretized with a Gauss-Hermite rule, so the model
//! becomes `du_j/dt = i w_j u_j + (k/2) r(t - tau)` with
//! `r(t) = sum_j w_j u_j(t)`. Only the scalar `r` enters the delay, so the
//! integrator buffers `r` alone.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{continued_pairing_ii, pairing_exp_family, SystemParams};
use crate::error::{Error, Result};
use crate::poles::Pole;

/// `|r|` beyond which a run is declared unstable.
pub const INSTABILITY_THRESHOLD: f64 = 1e12;
/// `|r|` below which `log |r|` is not fitted.
pub const FIT_FLOOR: f64 = 1e-14;

/// Nodes and positive weights discretizing `int f(w) g(w) dw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `2 pi / min spacing`: beyond this the discrete sum revives and stops
    /// representing the continuum.
    pub fn recurrence_time(&self) -> f64 {
        let gap = self
            .nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        2.0 * PI / gap
    }
}

/// Physicists' Hermite nodes and weights from the Jacobi matrix, polished by
/// Newton steps on the orthonormal recurrence.
fn hermite_standard(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (0.5 * i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut x: Vec<f64> = SymmetricEigen::new(jacobi)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    x.sort_by(f64::total_cmp);
    let mut v = Vec::with_capacity(n);
    for xi in x.iter_mut() {
        for _ in 0..3 {
            let (pn, pn1, _) = orthonormal_hermite(n, *xi);
            let d = (2.0 * n as f64).sqrt() * pn1;
            if d != 0.0 {
                *xi -= pn / d;
            }
        }
        // Christoffel weight 1/sum_j p_j(x)^2, carried with an exponent
        let (_, _, (sum, log_scale)) = orthonormal_hermite(n, *xi);
        v.push((-2.0 * log_scale).exp() / sum);
    }
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let xs = 0.5 * (x[j] - x[i]);
        let vs = 0.5 * (v[i] + v[j]);
        x[i] = -xs;
        x[j] = xs;
        v[i] = vs;
        v[j] = vs;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, v)
}

/// Returns `p_n(x)`, `p_{n-1}(x)` (both scaled by `e^{-log_scale}`) and
/// `(sum_{j<n} p_j^2 e^{-2 log_scale}, log_scale)` for the Hermite
/// polynomials orthonormal under `e^{-x^2}`.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, (f64, f64)) {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    let mut sum = 0.0;
    let mut log_scale = 0.0;
    for j in 0..n {
        sum += cur * cur;
        let jf = j as f64;
        let next = x * (2.0 / (jf + 1.0)).sqrt() * cur - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > 1e100 {
            prev *= 1e-100;
            cur *= 1e-100;
            sum *= 1e-200;
            log_scale += 100.0 * std::f64::consts::LN_10;
        }
    }
    (cur, prev, (sum, log_scale))
}

/// `n`-point Gauss-Hermite rule for the Gaussian density of `p`:
/// `w_j = omega0 + x_j / sqrt(h)`, weights `v_j / sqrt(pi)`. Nodes whose
/// weight underflows to zero are dropped.
pub fn hermite_rule(n: usize, p: &SystemParams) -> Result<QuadratureRule> {
    p.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "a quadrature rule needs at least one node".into(),
        ));
    }
    let (x, v) = hermite_standard(n);
    let scale = 1.0 / p.h.sqrt();
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (xi, vi) in x.into_iter().zip(v) {
        let w = vi / PI.sqrt();
        if w > 0.0 {
            nodes.push(p.omega0 + xi * scale);
            weights.push(w);
        }
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Initial state `x(w) = sum_m c_m e^{i a_m w}` together with the history
/// `f(s, w) = phi(s) x(w)` for `s` in `[-tau, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    /// Pairs `(c_m, a_m)` with `a_m >= 0`.
    pub exp_terms: Vec<(Complex64, f64)>,
    /// `phi` at `s = -tau + j tau/m`, `j = 0..=m`; the last sample is 1.
    pub history_profile: Vec<f64>,
}

impl InitialData {
    pub fn new(exp_terms: Vec<(Complex64, f64)>, history_profile: Vec<f64>) -> Result<Self> {
        let d = InitialData {
            exp_terms,
            history_profile,
        };
        d.validate()?;
        Ok(d)
    }

    /// `x = 1` with constant history, sampled on `m` steps per delay.
    pub fn constant(m: usize) -> Self {
        InitialData {
            exp_terms: vec![(Complex64::new(1.0, 0.0), 0.0)],
            history_profile: vec![1.0; m + 1],
        }
    }

    /// Samples `phi` on `m` steps per delay `tau`.
    pub fn with_profile(
        exp_terms: Vec<(Complex64, f64)>,
        tau: f64,
        m: usize,
        phi: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let dt = tau / m as f64;
        let mut samples: Vec<f64> = (0..=m).map(|j| phi(-tau + j as f64 * dt)).collect();
        if let Some(last) = samples.last_mut() {
            *last = phi(0.0);
        }
        InitialData::new(exp_terms, samples)
    }

    pub fn validate(&self) -> Result<()> {
        if self.history_profile.len() < 2 {
            return Err(Error::InvalidParameter(
                "history profile needs at least two samples".into(),
            ));
        }
        let last = *self.history_profile.last().unwrap();
        if (last - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "history must equal 1 at s = 0, got {last}"
            )));
        }
        if self.history_profile.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("history profile"));
        }
        for &(c, a) in &self.exp_terms {
            if !(a >= 0.0 && a.is_finite()) || !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "exponential term ({c}, {a}) needs finite c and a >= 0"
                )));
            }
        }
        Ok(())
    }

    /// `x(w)`.
    pub fn state_at(&self, omega: f64) -> Complex64 {
        self.exp_terms
            .iter()
            .map(|&(c, a)| c * Complex64::new(0.0, a * omega).exp())
            .sum()
    }

    /// `(x, 1)_g = sum_m c_m e^{i a_m omega0 - a_m^2/(4h)}`.
    pub fn mean(&self, p: &SystemParams) -> Complex64 {
        self.exp_terms
            .iter()
            .map(|&(c, a)| c * Complex64::new(-a * a / (4.0 * p.h), a * p.omega0).exp())
            .sum()
    }

    /// Number of grid steps per delay the profile was sampled on.
    pub fn steps_per_delay(&self) -> usize {
        self.history_profile.len() - 1
    }
}

/// Uniform time grid `t0 + i dt`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }
}

/// Uniformly sampled complex order parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<Complex64>,
}

impl TimeSeries {
    pub fn grid(&self) -> TimeGrid {
        TimeGrid {
            t0: self.t0,
            dt: self.dt,
            len: self.values.len(),
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Samples whose time lies in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        let slack = 1e-9 * self.dt;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.time(i), v))
            .filter(move |&(t, _)| t >= lo - slack && t <= hi + slack)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,re_r,im_r,abs_r")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                crate::fmt_f64(self.time(i)),
                crate::fmt_f64(v.re),
                crate::fmt_f64(v.im),
                crate::fmt_f64(v.norm())
            )?;
        }
        Ok(())
    }
}

/// Splits `tau` into `m >= 4` steps of size `dt`, or fails.
pub fn steps_per_delay(tau: f64, dt: f64) -> Result<usize> {
    let mismatch = Error::StepMismatch { dt, tau };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(mismatch);
    }
    let m = (tau / dt).round();
    if m < 4.0 || (m * dt - tau).abs() > 1e-9 * tau {
        return Err(mismatch);
    }
    Ok(m as usize)
}

/// `r` at the midpoint of `history[a]..history[a + 1]` by four-point Lagrange
/// interpolation. The stencil never straddles `t = 0` or `t = tau`, where `r`
/// has a kink in its first and second derivative.
fn delayed_midpoint(history: &[Complex64], a: usize, m: usize) -> Complex64 {
    let h = |i: usize| history[i];
    if a == 0 || a == m || a == 2 * m {
        (5.0 * h(a) + 15.0 * h(a + 1) - 5.0 * h(a + 2) + h(a + 3)) / 16.0
    } else if a + 1 == m || a + 1 == 2 * m {
        (h(a - 2) - 5.0 * h(a - 1) + 15.0 * h(a) + 5.0 * h(a + 1)) / 16.0
    } else {
        (-h(a - 1) + 9.0 * h(a) + 9.0 * h(a + 1) - h(a + 2)) / 16.0
    }
}

/// Integrates the discretized model over `[0, T]` with classical RK4 and
/// returns `r(t)` on the step grid.
///
/// `r(t - tau)` at the half-step stages is interpolated from the buffered
/// history with [`delayed_midpoint`].
pub fn simulate_dde(
    p: &SystemParams,
    rule: &QuadratureRule,
    init: &InitialData,
    dt: f64,
    t_end: f64,
) -> Result<TimeSeries> {
    p.validate()?;
    init.validate()?;
    let m = steps_per_delay(p.tau, dt)?;
    if init.steps_per_delay() != m {
        return Err(Error::InvalidParameter(format!(
            "history has {} steps per delay but dt gives {m}",
            init.steps_per_delay()
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "end time must be finite and non-negative, got {t_end}"
        )));
    }
    if rule.is_empty() {
        return Err(Error::InvalidParameter("empty quadrature rule".into()));
    }
    let dt = p.tau / m as f64;
    let steps = (t_end / dt + 1e-9).floor() as usize;

    let omega: Vec<Complex64> = rule.nodes.iter().map(|&w| Complex64::new(0.0, w)).collect();
    let weights = &rule.weights;
    let mut u: Vec<Complex64> = rule.nodes.iter().map(|&w| init.state_at(w)).collect();
    let order = |u: &[Complex64]| -> Complex64 { u.iter().zip(weights).map(|(a, &w)| a * w).sum() };

    // history[i] holds r at time (i - m) dt
    let r0 = order(&u);
    let mut history: Vec<Complex64> = init.history_profile.iter().map(|&phi| phi * r0).collect();
    history.reserve(steps);
    *history.last_mut().unwrap() = r0;

    let half_coupling = 0.5 * p.k;
    let n = u.len();
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![Complex64::default(); n],
        vec![Complex64::default(); n],
        vec![Complex64::default(); n],
        vec![Complex64::default(); n],
    );
    let mut stage = vec![Complex64::default(); n];
    for step in 0..steps {
        // delayed values at t, t + dt/2, t + dt
        let d0 = history[step];
        let d1 = history[step + 1];
        let dh = delayed_midpoint(&history, step, m);
        for j in 0..n {
            k1[j] = omega[j] * u[j] + half_coupling * d0;
            stage[j] = u[j] + 0.5 * dt * k1[j];
        }
        for j in 0..n {
            k2[j] = omega[j] * stage[j] + half_coupling * dh;
        }
        for j in 0..n {
            stage[j] = u[j] + 0.5 * dt * k2[j];
        }
        for j in 0..n {
            k3[j] = omega[j] * stage[j] + half_coupling * dh;
        }
        for j in 0..n {
            stage[j] = u[j] + dt * k3[j];
        }
        for j in 0..n {
            k4[j] = omega[j] * stage[j] + half_coupling * d1;
            u[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let r = order(&u);
        let modulus = r.norm();
        if modulus.is_nan() || modulus > INSTABILITY_THRESHOLD {
            return Err(Error::Instability {
                t: (step + 1) as f64 * dt,
                modulus,
            });
        }
        history.push(r);
    }
    Ok(TimeSeries {
        t0: 0.0,
        dt,
        values: history.split_off(m),
    })
}

/// Least-squares slope of `log |r(t)|` on `window`, with its coefficient of
/// determination.
pub fn fit_decay_rate(series: &TimeSeries, window: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = window;
    let pts: Vec<(f64, Complex64)> = series.window(lo, hi).collect();
    if pts.len() < 2 {
        return Err(Error::WindowEmpty { lo, hi });
    }
    if let Some(&(t, v)) = pts
        .iter()
        .find(|(_, v)| v.norm().is_nan() || v.norm() <= FIT_FLOOR)
    {
        return Err(Error::SignalUnderflow {
            t,
            modulus: v.norm(),
        });
    }
    let n = pts.len() as f64;
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.norm().ln()).collect();
    let tm = pts.iter().map(|(t, _)| t).sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut syy = 0.0;
    for ((t, _), y) in pts.iter().zip(&ys) {
        stt += (t - tm) * (t - tm);
        sty += (t - tm) * (y - ym);
        syy += (y - ym) * (y - ym);
    }
    let slope = sty / stt;
    let ss_res: f64 = pts
        .iter()
        .zip(&ys)
        .map(|((t, _), y)| {
            let e = y - ym - slope * (t - tm);
            e * e
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok((slope, r2))
}

/// `(k/2) int_{-tau}^0 e^{-lambda (s + tau)} phi(s) ds` by composite Simpson
/// on the profile grid (a 3/8 panel absorbs an odd step count).
pub fn history_laplace(profile: &[f64], lambda: Complex64, p: &SystemParams) -> Result<Complex64> {
    if profile.len() < 2 {
        return Err(Error::InvalidParameter(
            "history profile needs at least two samples".into(),
        ));
    }
    let m = profile.len() - 1;
    let dt = p.tau / m as f64;
    let f = |j: usize| profile[j] * (-lambda * (j as f64 * dt)).exp();
    let simpson = |a: usize, b: usize| -> Complex64 {
        let mut s = f(a) + f(b);
        for j in a + 1..b {
            s += f(j) * if (j - a) % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * dt / 3.0
    };
    let integral = match m {
        1 => 0.5 * dt * (f(0) + f(1)),
        _ if m.is_multiple_of(2) => simpson(0, m),
        3 => 3.0 * dt / 8.0 * (f(0) + 3.0 * f(1) + 3.0 * f(2) + f(3)),
        _ => {
            simpson(0, m - 3) + 3.0 * dt / 8.0 * (f(m - 3) + 3.0 * f(m - 2) + 3.0 * f(m - 1) + f(m))
        }
    };
    Ok(0.5 * p.k * integral)
}

/// Coefficient `c_p` of `e^{lambda_p t}` in the residue expansion of `r`:
/// `D_p <psi_p | x + f_p> <psi_p | 1>`, where the history term `f_p` is the
/// constant `history_laplace(phi, lambda_p) (x, 1)_g`.
pub fn expansion_coefficient(
    pole: &Pole,
    init: &InitialData,
    p: &SystemParams,
) -> Result<Complex64> {
    let lambda = pole.lambda;
    let unit = continued_pairing_ii(lambda, p)?;
    let mut state = Complex64::new(0.0, 0.0);
    for &(c, a) in &init.exp_terms {
        state += c * pairing_exp_family(lambda, a, p)?;
    }
    let history = history_laplace(&init.history_profile, lambda, p)? * init.mean(p);
    Ok(pole.residue * (state + history * unit) * unit)
}

/// `r(t) = sum_p c_p e^{lambda_p t}` on `grid`.
pub fn expansion_reconstruct(
    poles: &[Pole],
    init: &InitialData,
    p: &SystemParams,
    grid: TimeGrid,
) -> Result<TimeSeries> {
    init.validate()?;
    let coeffs: Vec<(Complex64, Complex64)> = poles
        .iter()
        .map(|q| Ok((q.lambda, expansion_coefficient(q, init, p)?)))
        .collect::<Result<_>>()?;
    let values = (0..grid.len)
        .map(|i| {
            let t = grid.time(i);
            coeffs.iter().map(|&(l, c)| c * (l * t).exp()).sum()
        })
        .collect();
    Ok(TimeSeries {
        t0: grid.t0,
        dt: grid.dt,
        values,
    })
}

/// Relative L2 distance between two series over the samples of `a` whose
/// times lie in `window`; both series must share a grid.
pub fn relative_l2(a: &TimeSeries, b: &TimeSeries, window: (f64, f64)) -> Result<f64> {
    if a.dt != b.dt || a.t0 != b.t0 {
        return Err(Error::InvalidParameter("series grids differ".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut count = 0;
    for (i, va) in a.values.iter().enumerate() {
        let t = a.time(i);
        if t < window.0 - 1e-9 * a.dt || t > window.1 + 1e-9 * a.dt {
            continue;
        }
        let Some(vb) = b.values.get(i) else { break };
        num += (va - vb).norm_sqr();
        den += va.norm_sqr();
        count += 1;
    }
    if count < 2 {
        return Err(Error::WindowEmpty {
            lo: window.0,
            hi: window.1,
        });
    }
    Ok((num / den).sqrt())
}
