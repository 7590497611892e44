//! Tangent fields on the open simplex.
//!
//! Anything that behaves like an aggregate excess demand implements
//! [`ExcessDemand`]: Cobb–Douglas economies, synthetic chart fields used as
//! test fixtures, and perturbations of either.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{chart_margin, PricePoint, TangentVector};

pub trait ExcessDemand: Send + Sync {
    fn goods(&self) -> usize;

    /// Full ℓ-vector of excess demand at simplex-frame prices. Implementors
    /// may assume `simplex` is strictly positive and sums to one.
    fn excess_at(&self, simplex: &[f64]) -> Result<Vec<f64>>;

    fn evaluate(&self, p: &PricePoint) -> Result<TangentVector> {
        if p.goods() != self.goods() {
            return Err(Error::DimensionMismatch {
                expected: self.goods(),
                found: p.goods(),
            });
        }
        let z = self.excess_at(&p.simplex_coords())?;
        TangentVector::new(p, z)
    }

    /// The field in chart trivialisation: the first ℓ−1 components of the
    /// excess demand at the embedded chart point.
    fn chart_value(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() + 1 != self.goods() {
            return Err(Error::DimensionMismatch {
                expected: self.goods() - 1,
                found: c.len(),
            });
        }
        if !(chart_margin(c) > 0.0 && c.iter().all(|x| *x > 0.0)) {
            return Err(Error::NotInterior(format!("chart point {c:?}")));
        }
        let mut p = c.to_vec();
        p.push(1.0 - c.iter().sum::<f64>());
        let mut z = self.excess_at(&p)?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        z.truncate(c.len());
        Ok(z)
    }
}

impl<T: ExcessDemand + ?Sized> ExcessDemand for &T {
    fn goods(&self) -> usize {
        (**self).goods()
    }
    fn excess_at(&self, simplex: &[f64]) -> Result<Vec<f64>> {
        (**self).excess_at(simplex)
    }
}

impl<T: ExcessDemand + ?Sized> ExcessDemand for Box<T> {
    fn goods(&self) -> usize {
        (**self).goods()
    }
    fn excess_at(&self, simplex: &[f64]) -> Result<Vec<f64>> {
        (**self).excess_at(simplex)
    }
}

impl<T: ExcessDemand + ?Sized> ExcessDemand for Arc<T> {
    fn goods(&self) -> usize {
        (**self).goods()
    }
    fn excess_at(&self, simplex: &[f64]) -> Result<Vec<f64>> {
        (**self).excess_at(simplex)
    }
}

/// Completes chart components g ∈ ℝ^{ℓ−1} to a tangent vector at simplex
/// prices p by solving Walras' law for the last component.
pub fn lift_chart_vector(simplex: &[f64], chart: &[f64]) -> Vec<f64> {
    let l = simplex.len();
    let partial: f64 = simplex[..l - 1].iter().zip(chart).map(|(p, g)| p * g).sum();
    let mut z = chart.to_vec();
    z.push(-partial / simplex[l - 1]);
    z
}

type ChartFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A field given directly in chart coordinates and lifted to a tangent
/// field.
#[derive(Clone)]
pub struct ChartField {
    goods: usize,
    f: Arc<ChartFn>,
}

impl fmt::Debug for ChartField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartField")
            .field("goods", &self.goods)
            .finish_non_exhaustive()
    }
}

impl ChartField {
    pub fn new<F>(goods: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        assert!(goods >= 2, "a chart field needs at least two goods");
        Self {
            goods,
            f: Arc::new(f),
        }
    }

    /// Two-good field from a scalar function of p₁.
    pub fn scalar<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(2, move |c| vec![f(c[0])])
    }

    /// The identically zero field.
    pub fn zero(goods: usize) -> Self {
        Self::new(goods, move |_| vec![0.0; goods - 1])
    }
}

impl ExcessDemand for ChartField {
    fn goods(&self) -> usize {
        self.goods
    }

    fn excess_at(&self, simplex: &[f64]) -> Result<Vec<f64>> {
        let g = (self.f)(&simplex[..self.goods - 1]);
        if g.len() != self.goods - 1 {
            return Err(Error::DimensionMismatch {
                expected: self.goods - 1,
                found: g.len(),
            });
        }
        Ok(lift_chart_vector(simplex, &g))
    }
}

/// Central-difference Jacobian of the chart representation with step `h`.
pub(crate) fn fd_jacobian<F: ExcessDemand + ?Sized>(
    field: &F,
    c: &[f64],
    h: f64,
) -> Result<DMatrix<f64>> {
    let n = c.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut x = c.to_vec();
    for k in 0..n {
        x[k] = c[k] + h;
        let plus = field.chart_value(&x)?;
        x[k] = c[k] - h;
        let minus = field.chart_value(&x)?;
        x[k] = c[k];
        for i in 0..n {
            jac[(i, k)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Largest step that keeps a central stencil of half-width `h` inside the
/// chart image with room to spare.
pub(crate) fn safe_step(c: &[f64], h: f64) -> f64 {
    h.min(0.25 * chart_margin(c))
}
