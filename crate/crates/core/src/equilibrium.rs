//! Locating and classifying zeros of an excess demand field.
//!
//! Zeros are found by damped Newton iteration in chart coordinates from a
//! regular lattice of starting points, then merged within a dedup radius.
//! Each zero is classified through its chart Jacobian J: regular zeros get
//! index sign(det(−J)), so that an inward-pointing field with a single
//! regular zero has index sum +1 in every dimension. Critical zeros get
//! index 0 and are excluded from the degree check.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cobb_douglas::aed_jacobian;
use crate::error::{Error, Result};
use crate::field::{fd_jacobian, safe_step, ExcessDemand};
use crate::geometry::{chart_margin, chart_project, norm2, ChartPoint, PricePoint};
use crate::io::fmt17;

/// Every reported equilibrium satisfies ‖z(p)‖ ≤ this.
pub const EQUILIBRIUM_RESIDUAL_MAX: f64 = 1e-9;
/// |det J| must exceed this times max(1, max|Jᵢⱼ|)^{ℓ−1} for a regular zero.
pub const REGULARITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumConfig {
    /// Points in the ℓ = 2 scan (per-dimension density is derived from it
    /// for larger ℓ).
    pub scan_points: usize,
    /// Consecutive (or connected) near-zero points needed to fire.
    pub run_length: usize,
    pub tol: f64,
}

impl Default for ContinuumConfig {
    fn default() -> Self {
        Self {
            scan_points: 10_000,
            run_length: 20,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Lattice points per chart dimension for Newton starts.
    pub grid_density: usize,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub dedup_radius: f64,
    pub boundary_margin_min: f64,
    /// Highest derivative order tried by the multiplicity probe (ℓ = 2).
    pub k_max: u32,
    pub continuum: ContinuumConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_density: 50,
            newton_tol: 1e-12,
            max_iter: 100,
            dedup_radius: 1e-6,
            boundary_margin_min: 1e-4,
            k_max: 8,
            continuum: ContinuumConfig::default(),
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.grid_density >= 1
            && self.newton_tol > 0.0
            && self.max_iter >= 1
            && self.dedup_radius > 0.0
            && self.boundary_margin_min > 0.0
            && self.boundary_margin_min < 0.5
            && self.k_max >= 1
            && self.continuum.scan_points >= 2
            && self.continuum.run_length >= 2
            && self.continuum.tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid solver config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regularity {
    Regular,
    Critical,
}

impl Regularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Regularity::Regular => "regular",
            Regularity::Critical => "critical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Multiplicity {
    Finite(u32),
    /// No derivative up to the given order rose above the noise floor.
    ExceedsMax(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub price: PricePoint,
    pub residual: f64,
    pub regularity: Regularity,
    pub index: i8,
    pub multiplicity: Option<Multiplicity>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub seeds_tried: usize,
    pub converged: usize,
    pub newton_iterations: usize,
    pub dedup_merges: usize,
}

/// Chart-coordinate bounding box of a detected run of zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumWitness {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub goods: usize,
    pub equilibria: Vec<Equilibrium>,
    /// Σ index over regular equilibria.
    pub index_sum: i32,
    pub finite_flag: bool,
    pub continuum: Option<ContinuumWitness>,
    pub stats: SolverStats,
}

impl EquilibriumReport {
    pub fn all_regular(&self) -> bool {
        self.equilibria
            .iter()
            .all(|e| e.regularity == Regularity::Regular)
    }

    /// Rebuilds `index_sum` after `equilibria` was edited.
    pub fn recount(&mut self) {
        self.index_sum = self.equilibria.iter().map(|e| e.index as i32).sum();
    }

    /// One row per equilibrium: p₁…p_ℓ, residual, regularity, index,
    /// multiplicity.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = (1..=self.goods).map(|i| format!("p{i}")).collect();
        header.extend(
            ["residual", "regularity", "index", "multiplicity"]
                .iter()
                .map(|s| s.to_string()),
        );
        out.push_str(&header.join(","));
        out.push('\n');
        for e in &self.equilibria {
            let mut row: Vec<String> = e.price.simplex_coords().iter().map(|x| fmt17(*x)).collect();
            row.push(fmt17(e.residual));
            row.push(e.regularity.as_str().to_string());
            row.push(e.index.to_string());
            row.push(match e.multiplicity {
                Some(Multiplicity::Finite(m)) => m.to_string(),
                Some(Multiplicity::ExceedsMax(k)) => format!(">{k}"),
                None => String::new(),
            });
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "equilibria: {}", self.equilibria.len());
        for (i, e) in self.equilibria.iter().enumerate() {
            let p: Vec<String> = e
                .price
                .simplex_coords()
                .iter()
                .map(|x| format!("{x:.10}"))
                .collect();
            let _ = write!(
                s,
                "  #{} p = ({}) residual {:.3e} {} index {:+}",
                i + 1,
                p.join(", "),
                e.residual,
                e.regularity.as_str(),
                e.index
            );
            match e.multiplicity {
                Some(Multiplicity::Finite(m)) => {
                    let _ = write!(s, " multiplicity {m}");
                }
                Some(Multiplicity::ExceedsMax(k)) => {
                    let _ = write!(s, " multiplicity >{k}");
                }
                None => {}
            }
            s.push('\n');
        }
        let _ = writeln!(s, "index sum: {:+}", self.index_sum);
        let _ = writeln!(s, "all regular: {}", self.all_regular());
        let _ = writeln!(s, "finite: {}", self.finite_flag);
        if let Some(w) = &self.continuum {
            let _ = writeln!(
                s,
                "continuum witness: chart box {:?} .. {:?} ({} points)",
                w.lower, w.upper, w.points
            );
        }
        let _ = writeln!(
            s,
            "solver: {} seeds, {} converged, {} Newton iterations, {} dedup merges",
            self.stats.seeds_tried,
            self.stats.converged,
            self.stats.newton_iterations,
            self.stats.dedup_merges
        );
        s
    }
}

/// ‖z(p)‖ over all ℓ components at simplex prices.
fn full_residual<F: ExcessDemand + ?Sized>(field: &F, simplex: &[f64]) -> Result<f64> {
    let z = field.excess_at(simplex)?;
    let r = norm2(&z);
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::NonFinite)
    }
}

fn embed(c: &[f64]) -> Vec<f64> {
    let mut p = c.to_vec();
    p.push(1.0 - c.iter().sum::<f64>());
    p
}

fn inside(c: &[f64]) -> bool {
    c.iter().all(|x| *x > 0.0) && chart_margin(c) > 0.0
}

/// Lattice points j/(density+1) in every chart coordinate, restricted to
/// boundary margin ≥ `margin_min`.
pub fn start_lattice(dim: usize, density: usize, margin_min: f64) -> Vec<Vec<f64>> {
    let n = density + 1;
    let mut out = Vec::new();
    let mut idx = vec![1usize; dim];
    loop {
        let used: usize = idx.iter().sum();
        if used < n {
            let c: Vec<f64> = idx.iter().map(|j| *j as f64 / n as f64).collect();
            if chart_margin(&c) >= margin_min && c.iter().all(|x| *x >= margin_min) {
                out.push(c);
            }
        }
        // odometer over {1..n-1}^dim, skipping once the simplex bound is hit
        let mut k = 0;
        loop {
            if k == dim {
                return out;
            }
            idx[k] += 1;
            if idx.iter().sum::<usize>() < n {
                break;
            }
            idx[k] = 1;
            k += 1;
        }
    }
}

struct NewtonOutcome {
    point: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
}

const POLISH_STEPS: usize = 8;

fn newton<F: ExcessDemand + ?Sized>(
    field: &F,
    start: &[f64],
    cfg: &SolverConfig,
) -> Result<NewtonOutcome> {
    let mut x = start.to_vec();
    let mut f = field.chart_value(&x)?;
    let mut r = full_residual(field, &embed(&x))?;
    let mut iterations = 0;
    let mut converged = r <= cfg.newton_tol;
    let mut polish = 0;

    while iterations < cfg.max_iter {
        if converged {
            if polish >= POLISH_STEPS || r == 0.0 {
                break;
            }
            polish += 1;
        }
        iterations += 1;
        let h = safe_step(&x, 1e-7);
        let jac = fd_jacobian(field, &x, h)?;
        let step = match solve(&jac, &f) {
            Some(s) => s,
            None => break,
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-12 {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a - lambda * d).collect();
            if inside(&trial) {
                let tr = full_residual(field, &embed(&trial))?;
                let good = if converged {
                    tr < r
                } else {
                    tr <= (1.0 - 1e-4 * lambda) * r
                };
                if good {
                    x = trial;
                    r = tr;
                    f = field.chart_value(&x)?;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        if r <= cfg.newton_tol {
            converged = true;
        }
    }
    Ok(NewtonOutcome {
        point: x,
        residual: r,
        iterations,
        converged,
    })
}

/// Pseudo-inverse solve of J·d = f; copes with singular J at critical zeros.
fn solve(jac: &DMatrix<f64>, f: &[f64]) -> Option<Vec<f64>> {
    let b = DVector::from_column_slice(f);
    let svd = jac.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || !smax.is_finite() {
        return None;
    }
    svd.solve(&b, 1e-14 * smax)
        .ok()
        .map(|d| d.iter().copied().collect())
}

/// Multistart damped Newton over the chart, dedup, classification, and (for
/// ℓ = 2) multiplicity and continuum probes.
///
/// Non-converging starts are counted in the stats, not treated as errors.
/// The report does not depend on the rayon schedule.
pub fn find_equilibria<F: ExcessDemand + ?Sized>(
    field: &F,
    cfg: &SolverConfig,
) -> Result<EquilibriumReport> {
    cfg.validate()?;
    let goods = field.goods();
    let dim = goods - 1;
    let starts = start_lattice(dim, cfg.grid_density, cfg.boundary_margin_min);

    let outcomes: Vec<NewtonOutcome> = starts
        .par_iter()
        .map(|s| newton(field, s, cfg))
        .collect::<Result<_>>()?;

    let mut stats = SolverStats {
        seeds_tried: starts.len(),
        ..Default::default()
    };
    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    for o in outcomes {
        stats.newton_iterations += o.iterations;
        if !(o.converged && o.residual <= EQUILIBRIUM_RESIDUAL_MAX.max(cfg.newton_tol)) {
            continue;
        }
        stats.converged += 1;
        match found
            .iter_mut()
            .find(|(c, _)| dist(c, &o.point) <= cfg.dedup_radius)
        {
            Some(existing) => {
                stats.dedup_merges += 1;
                if o.residual < existing.1 {
                    *existing = (o.point, o.residual);
                }
            }
            None => found.push((o.point, o.residual)),
        }
    }
    found.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut equilibria = Vec::with_capacity(found.len());
    for (c, residual) in found {
        let price = PricePoint::from_positive(&embed(&c))?;
        let (regularity, index) = classify(field, &price)?;
        let multiplicity = if goods == 2 {
            Some(multiplicity_estimate(field, &price, cfg.k_max)?)
        } else {
            None
        };
        equilibria.push(Equilibrium {
            price,
            residual,
            regularity,
            index,
            multiplicity,
        });
    }

    let continuum = continuum_detector(field, cfg)?;
    let mut report = EquilibriumReport {
        goods,
        equilibria,
        index_sum: 0,
        finite_flag: continuum.is_none(),
        continuum,
        stats,
    };
    report.recount();
    Ok(report)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Regular/critical classification and local index at a zero.
///
/// An ill-conditioned Jacobian estimate is classified as critical.
pub fn classify<F: ExcessDemand + ?Sized>(field: &F, p: &PricePoint) -> Result<(Regularity, i8)> {
    let c = chart_project(p);
    let jac = match aed_jacobian(field, &c) {
        Ok(j) => j,
        Err(Error::IllConditioned { .. }) => return Ok((Regularity::Critical, 0)),
        Err(e) => return Err(e),
    };
    let n = jac.nrows();
    let det = jac.determinant();
    let scale = jac.amax().max(1.0).powi(n as i32);
    if det.is_finite() && det.abs() > REGULARITY_TOL * scale {
        // det(−J) = (−1)ⁿ det J
        let neg_det = if n % 2 == 0 { det } else { -det };
        Ok((Regularity::Regular, if neg_det > 0.0 { 1 } else { -1 }))
    } else {
        Ok((Regularity::Critical, 0))
    }
}

/// True iff the index sum is +1. Refuses to certify reports with critical
/// zeros.
pub fn index_sum_check(report: &EquilibriumReport) -> Result<bool> {
    if !report.all_regular() {
        return Err(Error::InvalidArgument(
            "index sum is undefined with critical equilibria".into(),
        ));
    }
    let sum: i32 = report.equilibria.iter().map(|e| e.index as i32).sum();
    Ok(sum == 1)
}

/// Base finite-difference step of the multiplicity probe.
const MULT_STEP: f64 = 0.02;
/// Absolute evaluation noise assumed for O(1) fields.
const MULT_NOISE: f64 = 1e-13;

/// Order of the first non-vanishing chart derivative at a zero (ℓ = 2).
///
/// The j-th derivative is estimated with the central j-th difference at
/// steps h and h/2. It counts as non-vanishing when the h/2 estimate clears
/// the rounding floor and the two estimates agree to 25%; a vanishing
/// derivative either sits at the floor or decays like a power of h.
pub fn multiplicity_estimate<F: ExcessDemand + ?Sized>(
    field: &F,
    p: &PricePoint,
    k_max: u32,
) -> Result<Multiplicity> {
    if field.goods() != 2 {
        return Err(Error::Unsupported(
            "multiplicity probe is defined for two goods only".into(),
        ));
    }
    let x0 = chart_project(p).coords()[0];
    let margin = x0.min(1.0 - x0);
    let f = |x: f64| -> Result<f64> { Ok(field.chart_value(&[x])?[0]) };
    for j in 1..=k_max {
        // keep the widest stencil (half-width j·h/2) well inside the chart
        let h = MULT_STEP.min(0.8 * margin / j as f64);
        let coarse = central_difference(&f, x0, j, h)?;
        let fine = central_difference(&f, x0, j, 0.5 * h)?;
        let floor = MULT_NOISE * fine.1.max(1.0) * 2f64.powi(j as i32) / (0.5 * h).powi(j as i32);
        let d = fine.0;
        if d.abs() > floor && (coarse.0 - d).abs() <= 0.25 * d.abs() {
            return Ok(Multiplicity::Finite(j));
        }
    }
    Ok(Multiplicity::ExceedsMax(k_max))
}

/// j-th central difference at x with spacing h; also returns max |f| on the
/// stencil.
fn central_difference(
    f: &impl Fn(f64) -> Result<f64>,
    x: f64,
    j: u32,
    h: f64,
) -> Result<(f64, f64)> {
    let mut acc = 0.0;
    let mut fmax: f64 = 0.0;
    let mut binom = 1.0;
    for k in 0..=j {
        let offset = (j as f64 / 2.0 - k as f64) * h;
        let v = f(x + offset)?;
        fmax = fmax.max(v.abs());
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * v;
        binom = binom * (j - k) as f64 / (k + 1) as f64;
    }
    Ok((acc / h.powi(j as i32), fmax))
}

/// Heuristic detection of a continuum of zeros.
///
/// For ℓ = 2 it scans `scan_points` evenly spaced chart points and fires on
/// `run_length` consecutive points with ‖z‖ ≤ `tol`. For larger ℓ it scans a
/// lattice and fires on a lattice-connected cluster of that many near-zero
/// points.
pub fn continuum_detector<F: ExcessDemand + ?Sized>(
    field: &F,
    cfg: &SolverConfig,
) -> Result<Option<ContinuumWitness>> {
    let dim = field.goods() - 1;
    let cc = &cfg.continuum;
    if dim == 1 {
        let n = cc.scan_points;
        let xs: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
        let small: Vec<bool> = xs
            .par_iter()
            .map(|x| full_residual(field, &[*x, 1.0 - x]).map(|r| r <= cc.tol))
            .collect::<Result<_>>()?;
        let mut best: Option<(usize, usize)> = None;
        let mut k = 0;
        while k < n {
            if small[k] {
                let start = k;
                while k < n && small[k] {
                    k += 1;
                }
                let len = k - start;
                if best.is_none_or(|(s, e)| e - s < len) {
                    best = Some((start, k));
                }
            } else {
                k += 1;
            }
        }
        return Ok(best.and_then(|(s, e)| {
            (e - s >= cc.run_length).then(|| ContinuumWitness {
                lower: vec![xs[s]],
                upper: vec![xs[e - 1]],
                points: e - s,
            })
        }));
    }

    let density = ((cc.scan_points as f64).powf(1.0 / dim as f64).ceil() as usize)
        .max(cfg.grid_density);
    let n = density + 1;
    let lattice = start_lattice(dim, density, 0.0);
    let small: Vec<bool> = lattice
        .par_iter()
        .map(|c| full_residual(field, &embed(c)).map(|r| r <= cc.tol))
        .collect::<Result<_>>()?;
    let key = |c: &[f64]| -> Vec<i64> { c.iter().map(|x| (x * n as f64).round() as i64).collect() };
    let index: std::collections::HashMap<Vec<i64>, usize> = lattice
        .iter()
        .enumerate()
        .filter(|(i, _)| small[*i])
        .map(|(i, c)| (key(c), i))
        .collect();
    let mut seen = vec![false; lattice.len()];
    let mut best: Option<Vec<usize>> = None;
    for start in 0..lattice.len() {
        if !small[start] || seen[start] {
            continue;
        }
        let mut component = vec![start];
        seen[start] = true;
        let mut head = 0;
        while head < component.len() {
            let k = key(&lattice[component[head]]);
            head += 1;
            for d in 0..dim {
                for delta in [-1i64, 1] {
                    let mut nb = k.clone();
                    nb[d] += delta;
                    if let Some(&i) = index.get(&nb) {
                        if !seen[i] {
                            seen[i] = true;
                            component.push(i);
                        }
                    }
                }
            }
        }
        if best.as_ref().is_none_or(|b| b.len() < component.len()) {
            best = Some(component);
        }
    }
    Ok(best.and_then(|comp| {
        (comp.len() >= cc.run_length).then(|| {
            let mut lower = vec![f64::INFINITY; dim];
            let mut upper = vec![f64::NEG_INFINITY; dim];
            for &i in &comp {
                for d in 0..dim {
                    lower[d] = lower[d].min(lattice[i][d]);
                    upper[d] = upper[d].max(lattice[i][d]);
                }
            }
            ContinuumWitness {
                lower,
                upper,
                points: comp.len(),
            }
        })
    }))
}

/// Convenience for callers holding a chart point.
pub fn classify_chart<F: ExcessDemand + ?Sized>(field: &F, c: &ChartPoint) -> Result<(Regularity, i8)> {
    classify(field, &crate::geometry::chart_embed(c))
}
