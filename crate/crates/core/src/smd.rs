//! Constructive decomposition of tangent fields into positive combinations
//! of Cobb–Douglas excess demands.
//!
//! The canonical family has ℓ consumers sharing one share vector α, with
//! consumer i endowed only with good i. Their excess demands
//!
//! ```text
//! zᵢ(p)ⱼ = αⱼ (pᵢ/pⱼ) ωᵢ      j ≠ i
//! zᵢ(p)ᵢ = −(1 − αᵢ) ωᵢ
//! ```
//!
//! have one negative coordinate each and positively span the tangent space
//! at every interior price. Any tangent vector is then a combination with
//! strictly positive weights: take the minimum-norm solution and push it
//! along the strictly positive kernel direction until every weight clears a
//! floor.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cobb_douglas::{Consumer, Economy, SHARE_TOL};
use crate::error::{Error, Result};
use crate::field::ExcessDemand;
use crate::geometry::{chart_project, dot, norm2, PricePoint, TangentVector};
use crate::scale::{hermite_1d, ScaleFn};

/// Default lower bound on every decomposition weight.
pub const DEFAULT_FLOOR: f64 = 1.0;
/// Targets with |p·t| above this (relative to max(1, ‖t‖)) are rejected.
pub const NON_TANGENT_TOL: f64 = 1e-8;
/// Maximum reconstruction residual, relative to max(1, ‖t‖).
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Kernel vectors must satisfy ‖Σκᵢzᵢ‖ ≤ this, relative to Σκᵢ‖zᵢ‖.
pub const KERNEL_TOL: f64 = 1e-10;
/// Maximum reconstruction error of a realized economy at its grid points.
pub const REALIZE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFamily {
    alpha: Vec<f64>,
    endowment_levels: Vec<f64>,
}

impl CanonicalFamily {
    pub fn new(alpha: Vec<f64>, endowment_levels: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 || alpha.len() != endowment_levels.len() {
            return Err(Error::InvalidArgument(format!(
                "family needs matching alpha ({}) and endowment levels ({}) with at least two goods",
                alpha.len(),
                endowment_levels.len()
            )));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0))
            || (alpha.iter().sum::<f64>() - 1.0).abs() > SHARE_TOL
        {
            return Err(Error::InvalidArgument(format!(
                "family shares {alpha:?} must be positive and sum to one"
            )));
        }
        if endowment_levels.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "endowment levels {endowment_levels:?} must be positive"
            )));
        }
        Ok(Self {
            alpha,
            endowment_levels,
        })
    }

    /// α = (1/ℓ, …, 1/ℓ), unit endowments.
    pub fn symmetric(goods: usize) -> Result<Self> {
        let mut alpha = vec![1.0 / goods as f64; goods];
        let head: f64 = alpha[..goods - 1].iter().sum();
        alpha[goods - 1] = 1.0 - head;
        Self::new(alpha, vec![1.0; goods])
    }

    pub fn goods(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn endowment_levels(&self) -> &[f64] {
        &self.endowment_levels
    }

    /// Endowment of consumer i: ωᵢ on good i, zero elsewhere.
    pub fn endowment(&self, i: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.goods()];
        w[i] = self.endowment_levels[i];
        w
    }

    pub fn consumers(&self) -> Vec<Consumer> {
        (0..self.goods())
            .map(|i| {
                Consumer::new(self.alpha.clone(), self.endowment(i))
                    .expect("family invariants imply a valid consumer")
            })
            .collect()
    }

    fn basis_raw(&self, p: &[f64]) -> Vec<Vec<f64>> {
        (0..self.goods())
            .map(|i| {
                let w = self.endowment_levels[i];
                (0..self.goods())
                    .map(|j| {
                        if j == i {
                            -(1.0 - self.alpha[i]) * w
                        } else {
                            self.alpha[j] * (p[i] / p[j]) * w
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn basis_matrix(&self, p: &[f64]) -> DMatrix<f64> {
        let cols = self.basis_raw(p);
        DMatrix::from_fn(self.goods(), self.goods(), |r, c| cols[c][r])
    }

    fn check_goods(&self, p: &PricePoint) -> Result<()> {
        if p.goods() != self.goods() {
            return Err(Error::DimensionMismatch {
                expected: self.goods(),
                found: p.goods(),
            });
        }
        Ok(())
    }
}

/// Per-price positive weights reconstructing a target tangent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionWitness {
    pub price: PricePoint,
    pub mu: Vec<f64>,
    pub residual: f64,
}

/// The ℓ canonical excess demands at `p`, in the frame of `p`.
pub fn basis_excess_demands(f: &CanonicalFamily, p: &PricePoint) -> Result<Vec<TangentVector>> {
    f.check_goods(p)?;
    f.basis_raw(p.coords())
        .into_iter()
        .map(|z| TangentVector::new(p, z))
        .collect()
}

/// Strictly positive κ with Σκᵢzᵢ(p) = 0, normalised so min κᵢ = 1.
///
/// Computed as the right singular vector of the smallest singular value.
/// A kernel that is not one-dimensional or has mixed signs means positive
/// spanning failed at `p` and is reported as [`Error::PositiveSpanning`].
pub fn positive_kernel(f: &CanonicalFamily, p: &PricePoint) -> Result<Vec<f64>> {
    f.check_goods(p)?;
    kernel_at(f, &p.to_sphere())
}

fn kernel_at(f: &CanonicalFamily, sphere: &PricePoint) -> Result<Vec<f64>> {
    let l = f.goods();
    let z = f.basis_matrix(sphere.coords());
    let svd = z.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let s = &svd.singular_values;
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|a, b| s[*b].total_cmp(&s[*a]));
    let largest = s[order[0]];
    let smallest = order[l - 1];
    let fail = |reason: String| Error::PositiveSpanning {
        price: sphere.coords().to_vec(),
        reason,
    };
    if l > 2 && s[order[l - 2]] <= 1e-12 * largest {
        return Err(fail(format!(
            "kernel is not one-dimensional (singular values {:?})",
            s.as_slice()
        )));
    }
    if l == 2 && largest <= 0.0 {
        return Err(fail("basis vanishes".into()));
    }
    let mut kappa: Vec<f64> = v_t.row(smallest).iter().copied().collect();
    if kappa.iter().sum::<f64>() < 0.0 {
        kappa.iter_mut().for_each(|k| *k = -*k);
    }
    if kappa.iter().any(|k| !(*k > 0.0)) {
        return Err(fail(format!("kernel vector {kappa:?} has mixed signs")));
    }
    let min = kappa.iter().copied().fold(f64::INFINITY, f64::min);
    kappa.iter_mut().for_each(|k| *k /= min);

    let combo = &z * DVector::from_column_slice(&kappa);
    let scale: f64 = (0..l).map(|i| kappa[i] * z.column(i).norm()).sum();
    if combo.norm() > KERNEL_TOL * scale.max(1.0) {
        return Err(fail(format!(
            "kernel residual {:e} exceeds tolerance",
            combo.norm()
        )));
    }
    Ok(kappa)
}

/// Decomposes a tangent target with the default floor δ = 1.
pub fn decompose_at(f: &CanonicalFamily, target: &TangentVector) -> Result<DecompositionWitness> {
    decompose_vector(f, target.base(), target.components(), DEFAULT_FLOOR)
}

/// Positive weights μ ≥ `floor` with Σμᵢzᵢ(p) = `target`.
///
/// The target is interpreted in the sphere frame at `p` (excess demand does
/// not depend on the frame). The returned witness carries `p` as given.
pub fn decompose_vector(
    f: &CanonicalFamily,
    p: &PricePoint,
    target: &[f64],
    floor: f64,
) -> Result<DecompositionWitness> {
    f.check_goods(p)?;
    if target.len() != f.goods() {
        return Err(Error::DimensionMismatch {
            expected: f.goods(),
            found: target.len(),
        });
    }
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::InvalidArgument(format!("floor {floor} must be positive")));
    }
    let sphere = p.to_sphere();
    let t_norm = norm2(target).max(1.0);
    let normal = dot(sphere.coords(), target).abs();
    if normal > NON_TANGENT_TOL * t_norm {
        return Err(Error::NonTangent { residual: normal });
    }

    let z = f.basis_matrix(sphere.coords());
    let kappa = kernel_at(f, &sphere)?;
    let t = DVector::from_column_slice(target);

    // Minimum-norm solution: μ ⊥ κ. The bordered system
    //   [Z  p][μ]   [t]
    //   [κᵀ 0][s] = [0]
    // is nonsingular because p spans the left kernel of Z and κ the right
    // one; s = 0 whenever t is tangent.
    let l = f.goods();
    let k_unit = DVector::from_column_slice(&kappa).normalize();
    let mut bordered = DMatrix::zeros(l + 1, l + 1);
    bordered.view_mut((0, 0), (l, l)).copy_from(&z);
    for i in 0..l {
        bordered[(i, l)] = sphere.coords()[i];
        bordered[(l, i)] = k_unit[i];
    }
    let lu = bordered.clone().full_piv_lu();
    let spanning_failure = || Error::PositiveSpanning {
        price: sphere.coords().to_vec(),
        reason: "bordered system is singular".into(),
    };
    let rhs = t.clone().push(0.0);
    let mut sol = lu.solve(&rhs).ok_or_else(spanning_failure)?;
    // one round of iterative refinement
    let r = &rhs - &bordered * &sol;
    if let Some(correction) = lu.solve(&r) {
        sol += correction;
    }
    let mu0 = sol.rows(0, l).into_owned();

    let shift = (0..f.goods())
        .map(|i| (floor - mu0[i]) / kappa[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut mu = DVector::from_fn(f.goods(), |i, _| mu0[i] + shift * kappa[i]);

    // a large shift amplifies the rounding error in κ; correct it and
    // restore the floor (the second shift is tiny)
    for _ in 0..2 {
        let r = (&t - &z * &mu).push(0.0);
        if let Some(correction) = lu.solve(&r) {
            mu += correction.rows(0, l);
        }
        let reshift = (0..f.goods())
            .map(|i| (floor - mu[i]) / kappa[i])
            .fold(0.0, f64::max);
        for i in 0..f.goods() {
            mu[i] += reshift * kappa[i];
        }
    }
    let mu: Vec<f64> = mu.iter().copied().collect();

    let residual = (&z * DVector::from_column_slice(&mu) - &t).norm();
    if residual > RESIDUAL_TOL * t_norm {
        return Err(Error::ReconstructionFailed { residual });
    }
    Ok(DecompositionWitness {
        price: p.clone(),
        mu,
        residual,
    })
}

/// Decomposes `field` at every grid point. Parallel; output order follows
/// the grid.
pub fn decompose_field<F: ExcessDemand + ?Sized>(
    f: &CanonicalFamily,
    field: &F,
    grid: &[PricePoint],
) -> Result<Vec<DecompositionWitness>> {
    if field.goods() != f.goods() {
        return Err(Error::DimensionMismatch {
            expected: f.goods(),
            found: field.goods(),
        });
    }
    grid.par_iter()
        .map(|p| {
            let target = field.evaluate(p)?;
            decompose_vector(f, p, target.components(), DEFAULT_FLOOR)
        })
        .collect()
}

/// An economy of the ℓ canonical consumers whose scale functions interpolate
/// the decomposition weights of `target_field` over `grid`.
pub fn realize_economy<F: ExcessDemand + ?Sized>(
    f: &CanonicalFamily,
    target_field: &F,
    grid: &[PricePoint],
) -> Result<Economy> {
    realize_economy_with_witnesses(f, target_field, grid).map(|(e, _)| e)
}

/// As [`realize_economy`], also returning the per-grid-point witnesses.
///
/// Consumer i carries the scale μᵢ(p), stored as the interpolated product
/// μᵢ·pᵢ divided by pᵢ. Since the kernel direction satisfies
/// κᵢ·pᵢ ∝ αᵢ/ωᵢ, interpolating μᵢ·pᵢ with any scheme that is linear in the
/// sampled values reproduces the kernel direction exactly between nodes; in
/// particular a field that vanishes on a run of grid points is realized by
/// an economy whose excess demand vanishes between them too.
pub fn realize_economy_with_witnesses<F: ExcessDemand + ?Sized>(
    f: &CanonicalFamily,
    target_field: &F,
    grid: &[PricePoint],
) -> Result<(Economy, Vec<DecompositionWitness>)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("realization grid is empty".into()));
    }
    let l = f.goods();
    let mut witnesses = decompose_field(f, target_field, grid)?;
    if l == 2 {
        witnesses.sort_by(|a, b| {
            let (x, y) = (chart_project(&a.price), chart_project(&b.price));
            x.coords()[0].total_cmp(&y.coords()[0])
        });
    }
    let nodes: Vec<Vec<f64>> = witnesses
        .iter()
        .map(|w| chart_project(&w.price).into_coords())
        .collect();
    if l == 2 && nodes.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(Error::InvalidArgument(
            "realization grid contains duplicate prices".into(),
        ));
    }

    let mut consumers = Vec::with_capacity(l);
    for i in 0..l {
        let values: Vec<f64> = witnesses
            .iter()
            .map(|w| w.mu[i] * w.price.simplex_coords()[i])
            .collect();
        if l == 2 {
            check_interpolant(i, &nodes, &values)?;
        }
        let scale = ScaleFn::Table {
            nodes: nodes.clone(),
            values,
            inverse_price: Some(i),
        };
        consumers.push(Consumer::with_scale(
            f.alpha.clone(),
            f.endowment(i),
            scale,
        )?);
    }
    let economy = Economy::new(consumers)?;

    for w in &witnesses {
        let target = target_field.evaluate(&w.price)?;
        let got = economy.evaluate(&w.price)?;
        let err = target
            .components()
            .iter()
            .zip(got.components())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err > REALIZE_TOL * target.norm().max(1.0) {
            return Err(Error::ReconstructionFailed { residual: err });
        }
    }
    Ok((economy, witnesses))
}

/// The Hermite interpolant can overshoot; probe each interval.
fn check_interpolant(consumer: usize, nodes: &[Vec<f64>], values: &[f64]) -> Result<()> {
    for w in nodes.windows(2) {
        for k in 1..8 {
            let x = w[0][0] + (w[1][0] - w[0][0]) * k as f64 / 8.0;
            let v = hermite_1d(nodes, values, x);
            if !(v > 0.0) {
                return Err(Error::GridTooCoarse {
                    consumer,
                    value: v,
                    at: vec![x],
                });
            }
        }
    }
    Ok(())
}
