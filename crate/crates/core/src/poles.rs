//! Resonance pole search.
//!
//! Zeros of `F` are counted with the argument principle on rectangles, the
//! rectangles are subdivided until each holds at most one zero, and every
//! zero is polished by Newton's method. Lambert W roots of the
//! identical-frequency problem serve as initial guesses.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use log::{debug, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{char_identical, gen_char_eval, resolvent_denominator_deriv, SystemParams};
use crate::error::{Error, Result};
use crate::specialfn::lambert_w;

/// Minimum modulus of `F` allowed on a contour.
pub const BOUNDARY_FLOOR: f64 = 1e-8;
/// Poles closer than this are the same pole.
pub const DEDUP_RADIUS: f64 = 1e-8;
/// Largest accepted `|F|` at a reported pole.
pub const RESIDUAL_CEILING: f64 = 1e-9;
pub const DEFAULT_NEWTON_TOL: f64 = 1e-11;
pub const NEWTON_MAX_STEPS: usize = 50;
pub const DEFAULT_MAX_LEVELS: usize = 12;
/// Left edge of the default region stays where `h Re(lambda)^2` is below this.
pub const DEFAULT_JUMP_BUDGET: f64 = 600.0;

const INFLATION: f64 = 0.01;
const INFLATION_RETRIES: usize = 5;
const LINE_SHIFTS: [f64; 7] = [0.0, -0.03, 0.03, -0.06, 0.06, -0.09, 0.09];
const WINDING_SLACK: f64 = 0.25;
const PHASE_STEP: f64 = 0.5;
const EDGE_MAX_DEPTH: usize = 48;

/// A located resonance pole with its residue weight `1/G'(lambda_p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub lambda: Complex64,
    pub residue: Complex64,
    /// Lambert branch whose root seeded the Newton iteration, if any.
    pub seed_branch: Option<i32>,
    pub newton_iters: usize,
    pub final_residual: f64,
}

/// Closed axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl ContourBox {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let b = ContourBox {
            re_min,
            re_max,
            im_min,
            im_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.re_min >= self.re_max || self.im_min >= self.im_max {
            return Err(Error::InvalidParameter(format!(
                "degenerate contour box {self:?}"
            )));
        }
        Ok(())
    }

    /// Square box of half-width `r` centred on `center`.
    pub fn around(center: Complex64, r: f64) -> Self {
        ContourBox {
            re_min: center.re - r,
            re_max: center.re + r,
            im_min: center.im - r,
            im_max: center.im + r,
        }
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    /// Grows each side by `frac` of the corresponding dimension.
    pub fn inflate(&self, frac: f64) -> Self {
        let dx = frac * self.width();
        let dy = frac * self.height();
        ContourBox {
            re_min: self.re_min - dx,
            re_max: self.re_max + dx,
            im_min: self.im_min - dy,
            im_max: self.im_max + dy,
        }
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    /// `nx` by `ny` grid of sub-boxes; interior lines are displaced by
    /// `shift` cell widths.
    fn grid(&self, nx: usize, ny: usize, shift: f64) -> Vec<ContourBox> {
        let lines = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
            let step = (hi - lo) / n as f64;
            let mut v = vec![lo];
            for i in 1..n {
                v.push(lo + (i as f64 + shift) * step);
            }
            v.push(hi);
            v
        };
        let xs = lines(self.re_min, self.re_max, nx);
        let ys = lines(self.im_min, self.im_max, ny);
        let mut out = Vec::with_capacity(nx * ny);
        for y in ys.windows(2) {
            for x in xs.windows(2) {
                out.push(ContourBox {
                    re_min: x[0],
                    re_max: x[1],
                    im_min: y[0],
                    im_max: y[1],
                });
            }
        }
        out
    }

    fn split_shape(&self) -> (usize, usize) {
        let (w, h) = (self.width(), self.height());
        if w > 2.0 * h {
            (2, 1)
        } else if h > 2.0 * w {
            (1, 2)
        } else {
            (2, 2)
        }
    }

    fn tile_shape(&self) -> (usize, usize) {
        let side = self.width().min(self.height());
        let nx = (self.width() / side).round().max(1.0) as usize;
        let ny = (self.height() / side).round().max(1.0) as usize;
        (nx, ny)
    }
}

/// Roots `(1/tau) W_n((k/2) tau e^{-i omega0 tau}) + i omega0` of the
/// identical-frequency characteristic equation, one per branch.
pub fn lambert_roots(p: &SystemParams, branches: RangeInclusive<i32>) -> Result<Vec<Complex64>> {
    p.validate()?;
    let z = 0.5 * p.k * p.tau * Complex64::new(0.0, -p.omega0 * p.tau).exp();
    let mut roots = Vec::new();
    for n in branches {
        let w = lambert_w(n, z)?;
        let root = w / p.tau + Complex64::new(0.0, p.omega0);
        let residual = char_identical(root, p)?.norm();
        if residual > 1e-10 {
            return Err(Error::NoConvergence {
                what: "lambert root verification",
                iterations: 0,
                residual,
            });
        }
        roots.push(root);
    }
    Ok(roots)
}

#[derive(Clone, Copy)]
struct Sample {
    lambda: Complex64,
    f: Complex64,
    /// F'/F
    log_deriv: Complex64,
}

fn sample(lambda: Complex64, p: &SystemParams) -> Result<Sample> {
    let e = gen_char_eval(lambda, p)?;
    let modulus = e.value.norm();
    if modulus <= BOUNDARY_FLOOR {
        return Err(Error::ZeroOnBoundary {
            modulus,
            re: lambda.re,
            im: lambda.im,
        });
    }
    Ok(Sample {
        lambda,
        f: e.value,
        log_deriv: scaled_div(e.deriv, e.value),
    })
}

// num-complex divides through |b|^2, which overflows for |b| near 1e154
fn scaled_div(a: Complex64, b: Complex64) -> Complex64 {
    let s = b.re.abs().max(b.im.abs());
    (a / s) / (b / s)
}

#[derive(Default, Clone, Copy)]
struct EdgeSums {
    /// unwrapped change of log F
    dlog: Complex64,
    /// approximation of the integral of lambda dlog F
    moment: Complex64,
    evaluations: usize,
}

impl std::ops::AddAssign for EdgeSums {
    fn add_assign(&mut self, o: Self) {
        self.dlog += o.dlog;
        self.moment += o.moment;
        self.evaluations += o.evaluations;
    }
}

fn segment_resolved(s0: &Sample, s1: &Sample) -> (bool, Complex64) {
    let dl = s1.lambda - s0.lambda;
    let dlog = scaled_div(s1.f, s0.f).ln();
    let trapezoid = 0.5 * (s0.log_deriv + s1.log_deriv) * dl;
    let ok = dlog.im.abs() < PHASE_STEP
        && (s0.log_deriv * dl).im.abs() < PHASE_STEP
        && (s1.log_deriv * dl).im.abs() < PHASE_STEP
        && (trapezoid - dlog).norm() < 0.1;
    (ok, dlog)
}

fn refine_segment(s0: Sample, s1: Sample, depth: usize, p: &SystemParams) -> Result<EdgeSums> {
    let (ok, dlog) = segment_resolved(&s0, &s1);
    if ok {
        return Ok(EdgeSums {
            dlog,
            moment: 0.5 * (s0.lambda + s1.lambda) * dlog,
            evaluations: 0,
        });
    }
    if depth >= EDGE_MAX_DEPTH {
        return Err(Error::NoConvergence {
            what: "contour phase tracking",
            iterations: depth,
            residual: (s1.lambda - s0.lambda).norm(),
        });
    }
    let mid = sample(0.5 * (s0.lambda + s1.lambda), p)?;
    let mut sums = refine_segment(s0, mid, depth + 1, p)?;
    sums += refine_segment(mid, s1, depth + 1, p)?;
    sums.evaluations += 1;
    Ok(sums)
}

fn scan_edge(a: Complex64, b: Complex64, p: &SystemParams) -> Result<EdgeSums> {
    let len = (b - a).norm();
    let rate = 2.0 * (p.tau + p.h.sqrt());
    let n = ((len * rate).ceil() as usize).clamp(8, 1 << 16);
    let mut sums = EdgeSums::default();
    let mut prev = sample(a, p)?;
    for i in 1..=n {
        let t = i as f64 / n as f64;
        let next = sample(a + (b - a) * t, p)?;
        sums += refine_segment(prev, next, 0, p)?;
        prev = next;
    }
    sums.evaluations += n + 1;
    Ok(sums)
}

/// Argument-principle data for one box.
#[derive(Debug, Clone, Copy)]
struct Scan {
    count: i64,
    /// sum of the zeros inside, from (1/2 pi i) of the integral of lambda F'/F
    moment: Complex64,
}

fn scan_box(b: &ContourBox, p: &SystemParams) -> Result<Scan> {
    let c = b.corners();
    let mut total = EdgeSums::default();
    for i in 0..4 {
        total += scan_edge(c[i], c[(i + 1) % 4], p)?;
    }
    let raw = total.dlog.im / (2.0 * PI);
    let count = raw.round();
    if (raw - count).abs() > WINDING_SLACK {
        return Err(Error::NonIntegerWinding { value: raw });
    }
    Ok(Scan {
        count: count as i64,
        moment: total.moment / Complex64::new(0.0, 2.0 * PI),
    })
}

/// Number of zeros of `F` inside `b`, by the argument principle.
pub fn count_zeros(b: &ContourBox, p: &SystemParams) -> Result<i64> {
    b.validate()?;
    p.validate()?;
    if p.k == 0.0 {
        return Ok(0);
    }
    Ok(scan_box(b, p)?.count)
}

/// Newton iteration on `F` from `seed`, stopping once `|F| < tol`.
pub fn refine_newton(seed: Complex64, p: &SystemParams, tol: f64) -> Result<Pole> {
    p.validate()?;
    if p.k == 0.0 {
        return Err(Error::InvalidParameter("F has no zeros when k = 0".into()));
    }
    let mut lambda = seed;
    let mut eval = gen_char_eval(lambda, p)?;
    let mut iters = 0;
    while eval.value.norm() >= tol && iters < NEWTON_MAX_STEPS {
        if eval.deriv.norm() == 0.0 {
            return Err(Error::DerivativeVanishes {
                re: lambda.re,
                im: lambda.im,
            });
        }
        let step = scaled_div(eval.value, eval.deriv);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let trial = lambda - scale * step;
            if let Ok(e) = gen_char_eval(trial, p) {
                if e.value.norm() < eval.value.norm() {
                    accepted = Some((trial, e));
                    break;
                }
            }
            scale *= 0.5;
        }
        iters += 1;
        match accepted {
            Some((next, e)) => {
                let moved = (next - lambda).norm();
                lambda = next;
                eval = e;
                if moved <= 1e-16 * (1.0 + lambda.norm()) {
                    break;
                }
            }
            None => break,
        }
    }
    let residual = eval.value.norm();
    if residual > RESIDUAL_CEILING || !residual.is_finite() {
        return Err(Error::NoConvergence {
            what: "newton",
            iterations: iters,
            residual,
        });
    }
    let vanishing = Error::DerivativeVanishes {
        re: lambda.re,
        im: lambda.im,
    };
    if eval.deriv.norm() == 0.0 {
        return Err(vanishing);
    }
    let residue = 1.0 / resolvent_denominator_deriv(lambda, p)?;
    if !(residue.re.is_finite() && residue.im.is_finite()) || residue.norm() == 0.0 {
        return Err(vanishing);
    }
    Ok(Pole {
        lambda,
        residue,
        seed_branch: None,
        newton_iters: iters,
        final_residual: residual,
    })
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Lambert branches used as seeds; derived from the region when absent.
    pub branches: Option<RangeInclusive<i32>>,
    pub max_levels: usize,
    pub newton_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            branches: None,
            max_levels: DEFAULT_MAX_LEVELS,
            newton_tol: DEFAULT_NEWTON_TOL,
        }
    }
}

/// Outcome of [`find_poles`].
#[derive(Debug, Clone)]
pub struct PoleSearch {
    /// Sorted by real part descending, then imaginary part ascending.
    pub poles: Vec<Pole>,
    /// The searched region, after any inflation away from boundary zeros.
    pub region: ContourBox,
    /// Zero count of the whole region.
    pub region_count: i64,
    /// Sum of the zero counts of all leaf boxes.
    pub leaf_total: i64,
    pub leaves: usize,
}

/// Default search region for Lambert branches `lo..=hi`.
///
/// The left edge stops where the continuation jump would exceed `e^600`.
pub fn default_region(p: &SystemParams, branches: RangeInclusive<i32>) -> ContourBox {
    let nb = branches.start().abs().max(branches.end().abs()) as f64 + 1.0;
    let half = 2.0 * PI / p.tau * nb;
    ContourBox {
        re_min: -(3.0f64).min((DEFAULT_JUMP_BUDGET / p.h).sqrt()),
        re_max: 0.5 * p.k.abs() + 0.5,
        im_min: p.omega0 - half,
        im_max: p.omega0 + half,
    }
}

fn seed_branches(p: &SystemParams, region: &ContourBox) -> RangeInclusive<i32> {
    let per = 2.0 * PI / p.tau;
    let lo = ((region.im_min - p.omega0) / per).floor() as i32 - 2;
    let hi = ((region.im_max - p.omega0) / per).ceil() as i32 + 2;
    lo..=hi
}

struct Leaf {
    pole: Option<Pole>,
    count: i64,
}

struct Search<'a> {
    p: &'a SystemParams,
    opts: &'a SearchOptions,
    known: Vec<Pole>,
}

impl Search<'_> {
    /// Scans the children of `b` for a grid split, shifting interior lines
    /// off any zero and retrying when the child counts do not add up.
    fn children(
        &self,
        b: &ContourBox,
        shape: (usize, usize),
        parent: i64,
    ) -> Result<Vec<(ContourBox, Scan)>> {
        let mut last = None;
        for &shift in &LINE_SHIFTS {
            let boxes = b.grid(shape.0, shape.1, shift);
            let scans: Result<Vec<Scan>> = boxes.par_iter().map(|c| scan_box(c, self.p)).collect();
            match scans {
                Ok(scans) => {
                    let sum: i64 = scans.iter().map(|s| s.count).sum();
                    let kids: Vec<_> = boxes.into_iter().zip(scans).collect();
                    if parent == sum {
                        return Ok(kids);
                    }
                    warn!("child counts {sum} disagree with parent {parent} in {b:?}");
                    last = Some(Ok(kids));
                }
                Err(e @ Error::ZeroOnBoundary { .. }) => {
                    debug!("split line through a zero in {b:?}, shifting");
                    if last.is_none() {
                        last = Some(Err(e));
                    }
                }
                Err(e) => return Err(e),
            }
        }
        last.expect("at least one split attempted")
    }

    fn process(&self, b: ContourBox, scan: Scan, depth: usize) -> Result<Vec<Leaf>> {
        if scan.count == 0 {
            return Ok(vec![Leaf {
                pole: None,
                count: 0,
            }]);
        }
        if scan.count == 1 {
            let inside: Vec<&Pole> = self.known.iter().filter(|q| b.contains(q.lambda)).collect();
            if inside.len() == 1 {
                return Ok(vec![Leaf {
                    pole: Some(*inside[0]),
                    count: 1,
                }]);
            }
            if inside.is_empty() {
                match refine_newton(scan.moment, self.p, self.opts.newton_tol) {
                    Ok(q) if b.contains(q.lambda) => {
                        return Ok(vec![Leaf {
                            pole: Some(q),
                            count: 1,
                        }])
                    }
                    Ok(q) => debug!("newton from box moment left {b:?} for {}", q.lambda),
                    Err(e) => debug!("newton from box moment failed: {e}"),
                }
            }
        }
        if depth >= self.opts.max_levels {
            return Err(Error::SubdivisionLimit {
                levels: self.opts.max_levels,
            });
        }
        let kids = self.children(&b, b.split_shape(), scan.count)?;
        let nested: Result<Vec<Vec<Leaf>>> = kids
            .into_par_iter()
            .map(|(c, s)| self.process(c, s, depth + 1))
            .collect();
        Ok(nested?.into_iter().flatten().collect())
    }
}

fn dedup_sorted(mut poles: Vec<Pole>) -> Vec<Pole> {
    poles.sort_by(|a, b| {
        b.lambda
            .re
            .total_cmp(&a.lambda.re)
            .then(a.lambda.im.total_cmp(&b.lambda.im))
    });
    let mut out: Vec<Pole> = Vec::with_capacity(poles.len());
    for q in poles {
        if !out
            .iter()
            .any(|o| (o.lambda - q.lambda).norm() < DEDUP_RADIUS)
        {
            out.push(q);
        }
    }
    out
}

/// Locates every zero of `F` in `region`.
///
/// Lambert-seeded Newton refinements are tried first; the region is then
/// tiled into near-square cells and each cell is subdivided (at most
/// `max_levels` times) until every leaf holds no zero or exactly one refined
/// pole.
pub fn find_poles(
    p: &SystemParams,
    region: &ContourBox,
    opts: &SearchOptions,
) -> Result<PoleSearch> {
    p.validate()?;
    region.validate()?;
    if p.k == 0.0 {
        return Ok(PoleSearch {
            poles: Vec::new(),
            region: *region,
            region_count: 0,
            leaf_total: 0,
            leaves: 1,
        });
    }

    let mut region = *region;
    let mut attempt = 0;
    let top = loop {
        match scan_box(&region, p) {
            Ok(s) => break s,
            Err(Error::ZeroOnBoundary { .. }) if attempt < INFLATION_RETRIES => {
                attempt += 1;
                region = region.inflate(INFLATION);
                debug!("zero on the region boundary, inflating to {region:?}");
            }
            Err(e) => return Err(e),
        }
    };

    let branches = opts
        .branches
        .clone()
        .unwrap_or_else(|| seed_branches(p, &region));
    let halo = region.inflate(0.1);
    let seeds: Vec<(i32, Complex64)> = branches
        .clone()
        .zip(lambert_roots(p, branches)?)
        .filter(|(_, r)| halo.contains(*r))
        .collect();
    let refined: Vec<Pole> = seeds
        .par_iter()
        .filter_map(|&(n, s)| match refine_newton(s, p, opts.newton_tol) {
            Ok(mut q) => {
                q.seed_branch = Some(n);
                Some(q)
            }
            Err(e) => {
                debug!("seed from branch {n} did not refine: {e}");
                None
            }
        })
        .filter(|q| region.contains(q.lambda))
        .collect();

    let search = Search {
        p,
        opts,
        known: dedup_sorted(refined),
    };
    let tiles = search.children(&region, region.tile_shape(), top.count)?;
    let nested: Result<Vec<Vec<Leaf>>> = tiles
        .into_par_iter()
        .map(|(c, s)| search.process(c, s, 0))
        .collect();
    let leaves: Vec<Leaf> = nested?.into_iter().flatten().collect();
    let leaf_total = leaves.iter().map(|l| l.count).sum();
    let poles = dedup_sorted(leaves.iter().filter_map(|l| l.pole).collect());
    if poles.len() as i64 != top.count {
        warn!(
            "found {} poles but the region holds {} zeros",
            poles.len(),
            top.count
        );
    }
    Ok(PoleSearch {
        poles,
        region,
        region_count: top.count,
        leaf_total,
        leaves: leaves.len(),
    })
}
