//! Perturbation experiments around economies with a continuum of equilibria.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cobb_douglas::Economy;
use crate::equilibrium::{find_equilibria, EquilibriumReport, SolverConfig};
use crate::error::{Error, Result};
use crate::field::{lift_chart_vector, ChartField, ExcessDemand};
use crate::geometry::PricePoint;
use crate::io::fmt17;
use crate::smd::{realize_economy, CanonicalFamily};

/// Default realization grid for [`build_continuum_economy`].
pub const CONTINUUM_GRID: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationBasis {
    /// b(c) = 1/ℓ − c in every chart coordinate.
    LinearTilt,
    /// Random polynomial of the given total degree per chart component.
    Polynomial(u32),
    /// Random sum of the given number of cosine modes per chart component.
    RandomFourier(u32),
}

impl PerturbationBasis {
    /// Parses `linear-tilt`, `polynomial:D` or `fourier:K`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown perturbation basis `{s}`"));
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a.parse::<u32>().map_err(|_| bad())?)),
            None => (s, None),
        };
        let basis = match (name, arg) {
            ("linear-tilt" | "linear_tilt", None) => Self::LinearTilt,
            ("polynomial", Some(d)) => Self::Polynomial(d),
            ("fourier" | "random-fourier" | "random_fourier", Some(k)) => Self::RandomFourier(k),
            _ => return Err(bad()),
        };
        Ok(basis)
    }

    pub fn label(&self) -> String {
        match self {
            Self::LinearTilt => "linear-tilt".into(),
            Self::Polynomial(d) => format!("polynomial:{d}"),
            Self::RandomFourier(k) => format!("fourier:{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub epsilon: f64,
    pub basis: PerturbationBasis,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(epsilon: f64, basis: PerturbationBasis, seed: u64) -> Result<Self> {
        let spec = Self { epsilon, basis, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// ε = 0 is accepted and yields the unperturbed field.
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon {} must be non-negative",
                self.epsilon
            )));
        }
        match self.basis {
            PerturbationBasis::Polynomial(0) | PerturbationBasis::RandomFourier(0) => Err(
                Error::InvalidArgument("perturbation degree/terms must be at least 1".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Same spec with another seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Component {
    Tilt { center: f64 },
    Polynomial { terms: Vec<(f64, Vec<u32>)> },
    Fourier { modes: Vec<(f64, Vec<f64>, f64)> },
}

impl Component {
    fn eval(&self, c: &[f64], k: usize) -> f64 {
        match self {
            Component::Tilt { center } => center - c[k],
            Component::Polynomial { terms } => terms
                .iter()
                .map(|(a, pw)| a * c.iter().zip(pw).map(|(x, e)| x.powi(*e as i32)).product::<f64>())
                .sum(),
            Component::Fourier { modes } => modes
                .iter()
                .map(|(a, nu, phase)| {
                    let arg: f64 = c.iter().zip(nu).map(|(x, n)| x * n).sum();
                    a * (std::f64::consts::TAU * arg + phase).cos()
                })
                .sum(),
        }
    }
}

/// Exponent tuples of total degree ≤ d in `dim` variables, graded order.
fn exponents(dim: usize, d: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=left {
            prefix.push(e);
            rec(dim, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, d, &mut Vec::new(), &mut out);
    out
}

/// Coefficients scaled so that Σ|aₖ| = 1; each basis term is bounded by
/// one on the open simplex, so the component is too.
fn l1_normalise(a: &mut [f64]) {
    let s: f64 = a.iter().map(|x| x.abs()).sum();
    if s > 0.0 {
        a.iter_mut().for_each(|x| *x /= s);
    }
}

fn draw_components(basis: PerturbationBasis, dim: usize, seed: u64) -> Vec<Component> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goods = (dim + 1) as f64;
    (0..dim)
        .map(|_| match basis {
            PerturbationBasis::LinearTilt => Component::Tilt { center: 1.0 / goods },
            PerturbationBasis::Polynomial(d) => {
                let pows = exponents(dim, d);
                let mut a: Vec<f64> = pows.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
                l1_normalise(&mut a);
                Component::Polynomial {
                    terms: a.into_iter().zip(pows).collect(),
                }
            }
            PerturbationBasis::RandomFourier(k) => {
                let mut a: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                l1_normalise(&mut a);
                let modes = a
                    .into_iter()
                    .enumerate()
                    .map(|(j, amp)| {
                        let top = j as u32 + 1;
                        let mut nu: Vec<f64> =
                            (0..dim).map(|_| rng.random_range(0..=top) as f64).collect();
                        if nu.iter().all(|n| *n == 0.0) {
                            nu[0] = top as f64;
                        }
                        if dim == 1 {
                            nu[0] = top as f64;
                        }
                        let phase = rng.random_range(0.0..std::f64::consts::TAU);
                        (amp, nu, phase)
                    })
                    .collect();
                Component::Fourier { modes }
            }
        })
        .collect()
}

/// A field plus ε·b in chart coordinates, lifted back by Walras' law.
#[derive(Debug, Clone)]
pub struct Perturbed<F> {
    base: F,
    spec: PerturbationSpec,
    components: Vec<Component>,
}

impl<F: ExcessDemand> Perturbed<F> {
    pub fn base(&self) -> &F {
        &self.base
    }

    pub fn spec(&self) -> &PerturbationSpec {
        &self.spec
    }

    /// ε·b(c) at a chart point.
    pub fn perturbation_at(&self, c: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .enumerate()
            .map(|(k, b)| self.spec.epsilon * b.eval(c, k))
            .collect()
    }
}

impl<F: ExcessDemand> ExcessDemand for Perturbed<F> {
    fn goods(&self) -> usize {
        self.base.goods()
    }

    fn excess_at(&self, simplex: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.base.excess_at(simplex)?;
        if self.spec.epsilon == 0.0 {
            return Ok(z);
        }
        let chart = &simplex[..simplex.len() - 1];
        let dz = lift_chart_vector(simplex, &self.perturbation_at(chart));
        z.iter_mut().zip(dz).for_each(|(a, b)| *a += b);
        Ok(z)
    }
}

pub fn perturb<F: ExcessDemand>(aed: F, spec: &PerturbationSpec) -> Result<Perturbed<F>> {
    spec.validate()?;
    let components = draw_components(spec.basis, aed.goods() - 1, spec.seed);
    Ok(Perturbed {
        base: aed,
        spec: *spec,
        components,
    })
}

/// g(x) = (a−x)³ left of a, 0 on [a, b], (b−x)³ right of b.
pub fn continuum_chart_field(a: f64, b: f64) -> ChartField {
    ChartField::scalar(move |x| {
        if x < a {
            (a - x).powi(3)
        } else if x > b {
            (b - x).powi(3)
        } else {
            0.0
        }
    })
}

/// Two-good economy whose excess demand vanishes on the whole chart
/// interval [a, b], realized from the symmetric canonical family on the
/// nodes k/(grid+1).
pub fn build_continuum_economy(a: f64, b: f64, grid: usize) -> Result<Economy> {
    if !(0.0 < a && a < b && b < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "interval [{a}, {b}] must satisfy 0 < a < b < 1"
        )));
    }
    if grid < 3 {
        return Err(Error::InvalidArgument("continuum grid needs at least 3 nodes".into()));
    }
    let nodes: Vec<PricePoint> = (1..=grid)
        .map(|k| {
            let x = k as f64 / (grid + 1) as f64;
            PricePoint::simplex(vec![x, 1.0 - x])
        })
        .collect::<Result<_>>()?;
    let inside = nodes
        .iter()
        .filter(|p| (a..=b).contains(&p.coords()[0]))
        .count();
    if inside < 2 {
        return Err(Error::InvalidArgument(format!(
            "interval [{a}, {b}] contains {inside} grid nodes; refine the grid"
        )));
    }
    realize_economy(
        &CanonicalFamily::symmetric(2)?,
        &continuum_chart_field(a, b),
        &nodes,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub epsilon: f64,
    /// `Err` carries the solver error message for this trial.
    pub outcome: std::result::Result<TrialSummary, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub n_equilibria: usize,
    pub finite: bool,
    pub all_regular: bool,
    pub index_sum: i32,
}

impl TrialSummary {
    fn from_report(r: &EquilibriumReport) -> Self {
        Self {
            n_equilibria: r.equilibria.len(),
            finite: r.finite_flag,
            all_regular: r.all_regular(),
            index_sum: r.index_sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenericityResult {
    pub trials: usize,
    /// Trials with no continuum detected.
    pub finite_count: usize,
    /// Finite trials whose equilibria are all regular.
    pub all_regular_count: usize,
    pub failed_count: usize,
    pub rows: Vec<TrialOutcome>,
}

impl GenericityResult {
    /// trial, seed, epsilon, n_equilibria, finite, all_regular, index_sum,
    /// error. Failed trials leave the numeric columns empty.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("trial,seed,epsilon,n_equilibria,finite,all_regular,index_sum,error\n");
        for r in &self.rows {
            let _ = match &r.outcome {
                Ok(s) => writeln!(
                    out,
                    "{},{},{},{},{},{},{},",
                    r.trial,
                    r.seed,
                    fmt17(r.epsilon),
                    s.n_equilibria,
                    s.finite,
                    s.all_regular,
                    s.index_sum
                ),
                Err(e) => writeln!(
                    out,
                    "{},{},{},,,,,\"{}\"",
                    r.trial,
                    r.seed,
                    fmt17(r.epsilon),
                    e.replace('"', "'")
                ),
            };
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "trials: {}\nfinite_count: {}\nall_regular_count: {}\nfailed: {}\n",
            self.trials, self.finite_count, self.all_regular_count, self.failed_count
        )
    }
}

/// Perturbs `base` once per trial with seed `spec.seed + trial` and solves
/// each perturbed field. Trials run in parallel; the result does not depend
/// on the schedule. A failing trial is recorded, not propagated.
pub fn genericity_experiment<F: ExcessDemand + Clone>(
    base: &F,
    spec: &PerturbationSpec,
    trials: usize,
    cfg: &SolverConfig,
) -> Result<GenericityResult> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    spec.validate()?;
    let rows: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let s = spec.with_seed(spec.seed.wrapping_add(trial as u64));
            let outcome = perturb(base.clone(), &s)
                .and_then(|field| find_equilibria(&field, cfg))
                .map(|r| TrialSummary::from_report(&r))
                .map_err(|e| e.to_string());
            TrialOutcome {
                trial,
                seed: s.seed,
                epsilon: s.epsilon,
                outcome,
            }
        })
        .collect();
    let ok = || rows.iter().filter_map(|r| r.outcome.as_ref().ok());
    let finite_count = ok().filter(|s| s.finite).count();
    let all_regular_count = ok().filter(|s| s.finite && s.all_regular).count();
    let failed_count = rows.iter().filter(|r| r.outcome.is_err()).count();
    Ok(GenericityResult {
        trials,
        finite_count,
        all_regular_count,
        failed_count,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cobb_douglas::Consumer;
    use crate::equilibrium::Regularity;

    fn edgeworth() -> Economy {
        Economy::new(vec![
            Consumer::new(vec![0.5, 0.5], vec![1.0, 0.0]).unwrap(),
            Consumer::new(vec![0.5, 0.5], vec![0.0, 1.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn continuum_field_formula() {
        let g = continuum_chart_field(0.4, 0.6);
        assert!((g.chart_value(&[0.2]).unwrap()[0] - 0.008).abs() < 1e-15);
        assert!((g.chart_value(&[0.8]).unwrap()[0] + 0.008).abs() < 1e-15);
        assert_eq!(g.chart_value(&[0.5]).unwrap()[0], 0.0);
    }

    #[test]
    fn continuum_economy_vanishes_on_interval() {
        let e = build_continuum_economy(0.4, 0.6, CONTINUUM_GRID).unwrap();
        for k in 1..=CONTINUUM_GRID {
            let x = k as f64 / (CONTINUUM_GRID + 1) as f64;
            let z = e.excess_at(&[x, 1.0 - x]).unwrap();
            let g = if x < 0.4 {
                (0.4 - x).powi(3)
            } else if x > 0.6 {
                (0.6 - x).powi(3)
            } else {
                0.0
            };
            assert!((z[0] - g).abs() < 1e-9, "x = {x}: {} vs {g}", z[0]);
        }
        // between nodes too
        for k in 0..=1000 {
            let x = 0.41 + 0.18 * k as f64 / 1000.0;
            assert!(e.excess_at(&[x, 1.0 - x]).unwrap()[0].abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_intervals_rejected() {
        assert!(build_continuum_economy(0.5, 0.5, 201).is_err());
        assert!(build_continuum_economy(0.6, 0.4, 201).is_err());
        assert!(build_continuum_economy(0.0, 0.4, 201).is_err());
        assert!(build_continuum_economy(0.5, 1.0, 201).is_err());
        assert!(build_continuum_economy(0.5, 0.501, 11).is_err());
    }

    #[test]
    fn linear_tilt_example() {
        let g = continuum_chart_field(0.4, 0.6);
        let spec = PerturbationSpec::new(1e-3, PerturbationBasis::LinearTilt, 0).unwrap();
        let p = perturb(g, &spec).unwrap();
        for x in [0.1, 0.3, 0.45, 0.5, 0.55, 0.7, 0.9] {
            let want = continuum_chart_field(0.4, 0.6).chart_value(&[x]).unwrap()[0] + 1e-3 * (0.5 - x);
            assert!((p.chart_value(&[x]).unwrap()[0] - want).abs() < 1e-15);
        }
        let r = find_equilibria(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.equilibria.len(), 1);
        assert!((r.equilibria[0].price.simplex_coords()[0] - 0.5).abs() < 1e-9);
        assert_eq!(r.equilibria[0].regularity, Regularity::Regular);
        assert_eq!(r.index_sum, 1);
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let e = edgeworth();
        let spec = PerturbationSpec::new(0.0, PerturbationBasis::RandomFourier(5), 9).unwrap();
        let p = perturb(e.clone(), &spec).unwrap();
        for x in [0.1, 0.37, 0.9] {
            assert_eq!(p.excess_at(&[x, 1.0 - x]).unwrap(), e.excess_at(&[x, 1.0 - x]).unwrap());
        }
    }

    #[test]
    fn seeds_give_different_fields() {
        let g = ChartField::zero(2);
        let s = PerturbationSpec::new(1.0, PerturbationBasis::RandomFourier(5), 1).unwrap();
        let a = perturb(g.clone(), &s).unwrap();
        let b = perturb(g, &s.with_seed(2)).unwrap();
        assert!((1..100).any(|k| {
            let x = k as f64 / 100.0;
            a.chart_value(&[x]).unwrap() != b.chart_value(&[x]).unwrap()
        }));
    }

    #[test]
    fn sup_norm_bounded_by_epsilon() {
        for basis in [
            PerturbationBasis::LinearTilt,
            PerturbationBasis::Polynomial(3),
            PerturbationBasis::RandomFourier(5),
        ] {
            for goods in [2usize, 3] {
                let s = PerturbationSpec::new(1e-3, basis, 17).unwrap();
                let p = perturb(ChartField::zero(goods), &s).unwrap();
                for c in crate::equilibrium::start_lattice(goods - 1, 30, 1e-3) {
                    for v in p.perturbation_at(&c) {
                        assert!(v.abs() <= 1e-3 * (1.0 + 1e-12), "{basis:?}: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn walras_law_preserved() {
        let e = edgeworth();
        let s = PerturbationSpec::new(1e-2, PerturbationBasis::Polynomial(2), 3).unwrap();
        let p = perturb(e, &s).unwrap();
        let x = [0.3, 0.7];
        let z = p.excess_at(&x).unwrap();
        assert!((x[0] * z[0] + x[1] * z[1]).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(PerturbationSpec::new(-1.0, PerturbationBasis::LinearTilt, 0).is_err());
        assert!(PerturbationSpec::new(1.0, PerturbationBasis::Polynomial(0), 0).is_err());
        assert!(PerturbationSpec::new(1.0, PerturbationBasis::RandomFourier(0), 0).is_err());
        assert!(PerturbationSpec::new(f64::NAN, PerturbationBasis::LinearTilt, 0).is_err());
    }

    #[test]
    fn basis_parsing() {
        assert_eq!(PerturbationBasis::parse("linear-tilt").unwrap(), PerturbationBasis::LinearTilt);
        assert_eq!(PerturbationBasis::parse("polynomial:3").unwrap(), PerturbationBasis::Polynomial(3));
        assert_eq!(PerturbationBasis::parse("fourier:5").unwrap(), PerturbationBasis::RandomFourier(5));
        assert!(PerturbationBasis::parse("fourier").is_err());
        assert!(PerturbationBasis::parse("spline:2").is_err());
        for b in ["linear-tilt", "polynomial:3", "fourier:5"] {
            assert_eq!(PerturbationBasis::parse(b).unwrap().label(), b);
        }
    }

    #[test]
    fn unperturbed_continuum_is_not_finite() {
        let e = build_continuum_economy(0.4, 0.6, CONTINUUM_GRID).unwrap();
        let spec = PerturbationSpec::new(0.0, PerturbationBasis::RandomFourier(5), 1).unwrap();
        let cfg = SolverConfig {
            grid_density: 20,
            ..Default::default()
        };
        let r = genericity_experiment(&e, &spec, 1, &cfg).unwrap();
        assert_eq!(r.finite_count, 0);
    }

    #[test]
    fn regular_economy_is_stable() {
        let spec = PerturbationSpec::new(1e-4, PerturbationBasis::RandomFourier(5), 100).unwrap();
        let cfg = SolverConfig {
            grid_density: 20,
            ..Default::default()
        };
        let r = genericity_experiment(&edgeworth(), &spec, 100, &cfg).unwrap();
        assert_eq!(r.finite_count, 100);
        for row in &r.rows {
            assert_eq!(row.outcome.as_ref().unwrap().n_equilibria, 1);
        }
    }

    #[test]
    fn stabilises_for_several_epsilons() {
        let e = build_continuum_economy(0.4, 0.6, CONTINUUM_GRID).unwrap();
        for eps in [1e-2, 1e-3, 1e-4] {
            let spec = PerturbationSpec::new(eps, PerturbationBasis::RandomFourier(5), 7).unwrap();
            let r = genericity_experiment(&e, &spec, 10, &SolverConfig::default()).unwrap();
            assert_eq!(r.all_regular_count, 10, "eps {eps}: {}", r.to_csv());
            assert!(r.rows.iter().all(|t| t.outcome.as_ref().unwrap().index_sum == 1));
        }
    }

    #[test]
    fn experiment_is_reproducible() {
        let e = build_continuum_economy(0.4, 0.6, CONTINUUM_GRID).unwrap();
        let spec = PerturbationSpec::new(1e-3, PerturbationBasis::RandomFourier(5), 42).unwrap();
        let cfg = SolverConfig {
            grid_density: 20,
            ..Default::default()
        };
        let a = genericity_experiment(&e, &spec, 8, &cfg).unwrap();
        let b = genericity_experiment(&e, &spec, 8, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_csv().lines().count(), 9);
    }
}
