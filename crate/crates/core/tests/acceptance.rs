//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::f64::consts::{E, PI};
use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::{cauchy_oracle, faddeeva_oracle, loglog_slope, rel_err};
use respoles::dispersion::{cauchy_gauss, SystemParams};
use respoles::evolution::{
    expansion_reconstruct, fit_decay_rate, hermite_rule, relative_l2, simulate_dde, InitialData,
};
use respoles::poles::{
    count_zeros, default_region, find_poles, lambert_roots, refine_newton, ContourBox,
    SearchOptions, DEFAULT_NEWTON_TOL,
};
use respoles::specialfn::{faddeeva, lambert_w};
use respoles::stability::{critical_coupling, identical_verdict, linspace, StabilityMode};
use respoles::{Complex64, Result};

const TAU: f64 = 2.0;
const OMEGA0: f64 = PI / 2.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn special_functions() -> Result<Outcome> {
    let mut rng = StdRng::seed_from_u64(1);
    let mut lambert_worst: f64 = 0.0;
    for i in 0..1000 {
        let n = rng.gen_range(-25..=25);
        let z = if i % 10 == 0 {
            // Near the branch point.
            let eps = 10f64.powf(rng.gen_range(-8.0..-1.0));
            Complex64::new(-1.0 / E, 0.0) + Complex64::from_polar(eps, rng.gen_range(-PI..PI))
        } else {
            Complex64::from_polar(10f64.powf(rng.gen_range(-4.0..4.0)), rng.gen_range(-PI..PI))
        };
        let w = lambert_w(n, z)?;
        let resid = (w * w.exp() - z).norm() / (1.0 + z.norm());
        lambert_worst = lambert_worst.max(resid);
    }

    let mut faddeeva_worst: f64 = 0.0;
    let mut quadrants = [0usize; 4];
    for _ in 0..500 {
        let x = rng.gen_range(-12.0..12.0);
        let y = if rng.gen_bool(0.5) {
            rng.gen_range(0.0..12.0)
        } else {
            -rng.gen_range(0.0..5.0)
        };
        let z = Complex64::new(x, y);
        quadrants[(x < 0.0) as usize + 2 * (y < 0.0) as usize] += 1;
        faddeeva_worst = faddeeva_worst.max(rel_err(faddeeva(z)?, faddeeva_oracle(z)));
    }
    outcome(
        lambert_worst <= 1e-12 && faddeeva_worst <= 1e-10 && quadrants.iter().all(|&q| q > 0),
        format!(
            "max Lambert residual/(1+|z|) = {lambert_worst:.2e} (<= 1e-12), max Faddeeva rel err = {faddeeva_worst:.2e} (<= 1e-10), points per quadrant {quadrants:?}"
        ),
    )
}

fn critical_values() -> Result<Outcome> {
    let a = critical_coupling(2.0, OMEGA0)?;
    let b = critical_coupling(1.0, OMEGA0)?;
    let (ea, eb) = ((a - PI / 2.0).abs(), b.abs());
    outcome(
        ea <= 1e-12 && eb <= 1e-12,
        format!("k_c(2) = {a} (err {ea:.1e}), k_c(1) = {b:.1e} (tol 1e-12)"),
    )
}

fn tri_mode_agreement() -> Result<Outcome> {
    let taus = linspace(0.1, 6.0, 200);
    let ks = linspace(-3.0, 3.0, 200);
    let (mut compared, mut skipped, mut disagree, mut stable) = (0, 0, 0, 0);
    for &tau in &taus {
        let kc = critical_coupling(tau, OMEGA0)?;
        for &k in &ks {
            if (k.abs() - kc.abs()).abs() <= 1e-6 {
                skipped += 1;
                continue;
            }
            let c = identical_verdict(tau, k, OMEGA0, StabilityMode::ClosedForm)?.stable;
            let n = identical_verdict(tau, k, OMEGA0, StabilityMode::Nishi)?.stable;
            let l = identical_verdict(tau, k, OMEGA0, StabilityMode::Lambert)?.stable;
            compared += 1;
            stable += c as usize;
            if c != n || c != l {
                disagree += 1;
            }
        }
    }
    outcome(
        disagree == 0,
        format!("{disagree} disagreements over {compared} cells ({stable} stable, {skipped} on the boundary)"),
    )
}

fn lambert_convergence() -> Result<Outcome> {
    let hs = [1e2, 1e3, 1e4];
    let base = SystemParams::new(1.0, TAU, OMEGA0, 1e2)?;
    let seeds = lambert_roots(&base, -2..=2)?;
    let mut slopes = Vec::new();
    for seed in &seeds {
        let mut dist = Vec::new();
        for &h in &hs {
            let pole = refine_newton(*seed, &base.with_h(h), DEFAULT_NEWTON_TOL)?;
            dist.push((pole.lambda - seed).norm());
        }
        slopes.push(loglog_slope(&hs, &dist));
    }
    let ok = slopes.iter().all(|s| (s + 1.0).abs() <= 0.25);
    let shown: Vec<String> = slopes.iter().map(|s| format!("{s:.3}")).collect();
    outcome(
        ok,
        format!(
            "log-log slopes of |pole - seed| for branches -2..2: [{}] (want -1 +/- 0.25)",
            shown.join(", ")
        ),
    )
}

fn asymptotic_estimate() -> Result<Outcome> {
    let hs = [1e2, 1e3, 1e4];
    let mut errs = Vec::new();
    let mut lib_vs_oracle: f64 = 0.0;
    for &h in &hs {
        let p = SystemParams::new(1.0, TAU, OMEGA0, h)?;
        let lambda = Complex64::new(1.0, OMEGA0 + 1.0);
        let u = lambda - Complex64::new(0.0, OMEGA0);
        let approx = (1.0 - 1.0 / (2.0 * h * u * u)) / u;
        let quad = cauchy_oracle(lambda, &p);
        lib_vs_oracle = lib_vs_oracle.max(rel_err(cauchy_gauss(lambda, &p)?, quad));
        errs.push((quad - approx).norm());
    }
    let slope = loglog_slope(&hs, &errs);
    outcome(
        (slope + 2.0).abs() <= 0.2,
        format!(
            "slope {slope:.4} (want -2 +/- 0.2), errors {:.2e} {:.2e} {:.2e}, closed form vs quadrature {lib_vs_oracle:.1e}",
            errs[0], errs[1], errs[2]
        ),
    )
}

fn completeness() -> Result<Outcome> {
    let mut rng = StdRng::seed_from_u64(6);
    let (mut matched, mut unstable, mut total_poles) = (0, 0, 0);
    let mut failures = Vec::new();
    for i in 0..20 {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let k = sign * rng.gen_range(0.2..2.5);
        let tau = rng.gen_range(0.5..3.0);
        let omega0 = rng.gen_range(0.5..3.0);
        let h = rng.gen_range(20.0..200.0);
        let p = SystemParams::new(k, tau, omega0, h)?;
        let region = ContourBox::new(-0.5, k.abs() / 2.0 + 0.3, omega0 - 4.0, omega0 + 4.0)?;
        let s = find_poles(&p, &region, &SearchOptions::default())?;
        let count = count_zeros(&s.region, &p)?;
        total_poles += s.poles.len();
        unstable += s.poles.iter().any(|q| q.lambda.re > 0.0) as usize;
        if count == s.poles.len() as i64 {
            matched += 1;
        } else {
            failures.push(format!("set {i}: {} poles vs count {count}", s.poles.len()));
        }
    }
    outcome(
        matched == 20 && unstable > 0 && unstable < 20,
        format!(
            "{matched}/20 sets with pole count = winding count ({unstable} unstable, {total_poles} poles in total){}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn threshold_sign() -> Result<Outcome> {
    let kc = critical_coupling(TAU, OMEGA0)?;
    let mut max_re = Vec::new();
    for f in [0.95, 1.05] {
        let k = f * kc;
        let p = SystemParams::new(k, TAU, OMEGA0, 1e4)?;
        let region = ContourBox::new(-0.05, k / 2.0 + 0.5, OMEGA0 - 10.0, OMEGA0 + 10.0)?;
        let s = find_poles(&p, &region, &SearchOptions::default())?;
        max_re.push(
            s.poles
                .iter()
                .map(|q| q.lambda.re)
                .fold(f64::NEG_INFINITY, f64::max),
        );
    }
    outcome(
        max_re[0] < 0.0 && max_re[1] > 0.0,
        format!(
            "max Re lambda = {:.5} at 0.95 k_c, {:.5} at 1.05 k_c (h = 1e4)",
            max_re[0], max_re[1]
        ),
    )
}

struct Reference {
    p: SystemParams,
    sim: respoles::evolution::TimeSeries,
    init: InitialData,
    window: (f64, f64),
}

fn reference_run() -> Result<Reference> {
    let kc = critical_coupling(TAU, OMEGA0)?;
    let p = SystemParams::new(0.8 * kc, TAU, OMEGA0, 50.0)?;
    let rule = hermite_rule(400, &p)?;
    let t_end = 0.8 * rule.recurrence_time();
    let init = InitialData::constant(64);
    let sim = simulate_dde(&p, &rule, &init, TAU / 64.0, t_end)?;
    Ok(Reference {
        p,
        sim,
        init,
        window: (2.0 * TAU, t_end),
    })
}

fn landau_damping(r: &Reference) -> Result<Outcome> {
    let (rate, r2) = fit_decay_rate(&r.sim, r.window)?;
    let s = find_poles(
        &r.p,
        &default_region(&r.p, -3..=3),
        &SearchOptions::default(),
    )?;
    let lead = s.poles[0].lambda.re;
    let gap = (rate - lead).abs() / lead.abs();
    outcome(
        gap < 0.05 && r2 >= 0.99,
        format!(
            "fitted rate {rate:.6} vs leading pole {lead:.6} on [{:.1}, {:.2}]: gap {:.3}% (< 5%), r^2 = {r2:.5} (>= 0.99)",
            r.window.0,
            r.window.1,
            100.0 * gap
        ),
    )
}

fn expansion_fidelity(r: &Reference) -> Result<Outcome> {
    let s = find_poles(
        &r.p,
        &default_region(&r.p, -3..=3),
        &SearchOptions::default(),
    )?;
    let mut errs = Vec::new();
    for m in [2, 4, 8, 16] {
        let rec = expansion_reconstruct(&s.poles[..m], &r.init, &r.p, r.sim.grid())?;
        errs.push(relative_l2(&r.sim, &rec, r.window)?);
    }
    let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        errs[2] <= 0.1 && monotone,
        format!(
            "relative L2 error for M = 2, 4, 8, 16: {:.2e} {:.2e} {:.2e} {:.2e} (M = 8 <= 0.1, non-increasing: {monotone})",
            errs[0], errs[1], errs[2], errs[3]
        ),
    )
}

fn free_evolution() -> Result<Outcome> {
    let p = SystemParams::new(0.0, TAU, OMEGA0, 50.0)?;
    let rule = hermite_rule(400, &p)?;
    let sim = simulate_dde(&p, &rule, &InitialData::constant(64), TAU / 64.0, 5.0)?;
    let err = sim
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let t = sim.time(i);
            (v - Complex64::new(-t * t / (4.0 * p.h), OMEGA0 * t).exp()).norm()
        })
        .fold(0.0, f64::max);
    outcome(
        err <= 1e-6,
        format!("max |r(t) - exp(i omega0 t - t^2/4h)| on [0, 5] = {err:.2e} (<= 1e-6)"),
    )
}

fn report(n: usize, name: &str, start: Instant, result: Result<Outcome>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(o) => {
            let tag = if o.pass { "PASS" } else { "FAIL" };
            println!("criterion {n:>2} {tag} [{secs:.2} s] {name}: {}", o.detail);
            o.pass
        }
        Err(e) => {
            println!(
                "criterion {n:>2} FAIL [{secs:.2} s] {name}: error {}: {e}",
                e.kind()
            );
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    let t = Instant::now();
    ok &= report(1, "special-function identities", t, special_functions());
    let t = Instant::now();
    ok &= report(2, "critical coupling closed form", t, critical_values());
    let t = Instant::now();
    ok &= report(3, "tri-mode stability agreement", t, tri_mode_agreement());
    let t = Instant::now();
    ok &= report(
        4,
        "pole to Lambert root convergence",
        t,
        lambert_convergence(),
    );
    let t = Instant::now();
    ok &= report(
        5,
        "asymptotic estimate of the Cauchy integral",
        t,
        asymptotic_estimate(),
    );
    let t = Instant::now();
    ok &= report(6, "argument-principle completeness", t, completeness());
    let t = Instant::now();
    ok &= report(7, "spectrum sign across the threshold", t, threshold_sign());
    let t = Instant::now();
    match reference_run() {
        Ok(r) => {
            ok &= report(8, "Landau damping cross-validation", t, landau_damping(&r));
            let t = Instant::now();
            ok &= report(9, "residue expansion fidelity", t, expansion_fidelity(&r));
        }
        Err(e) => {
            report(8, "Landau damping cross-validation", t, Err(e));
            ok = false;
            println!("criterion  9 FAIL: reference simulation unavailable");
        }
    }
    let t = Instant::now();
    ok &= report(10, "free-evolution oracle", t, free_evolution());
    if ok {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILURES");
        ExitCode::FAILURE
    }
}
