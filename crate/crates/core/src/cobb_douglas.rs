//! Cobb–Douglas consumers and the aggregate excess demand of an economy
//! built from them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{fd_jacobian, safe_step, ExcessDemand};
use crate::geometry::{dot, norm2, ChartPoint, PricePoint, TangentVector};
use crate::scale::ScaleFn;

/// Tolerance on Σα = 1.
pub const SHARE_TOL: f64 = 1e-12;
/// Relative agreement required between the h and h/2 Jacobian estimates.
pub const JACOBIAN_CONSISTENCY: f64 = 1e-4;
/// Absolute floor under the consistency test, above finite-difference
/// rounding noise for O(1) fields.
pub const JACOBIAN_ABS_FLOOR: f64 = 1e-8;

/// A consumer maximising u(x) = Π xᵢ^{αᵢ}, optionally with its excess demand
/// rescaled by a positive function of prices.
#[derive(Debug, Clone, PartialEq)]
pub struct Consumer {
    alpha: Vec<f64>,
    endowment: Vec<f64>,
    scale: ScaleFn,
}

impl Consumer {
    pub fn new(alpha: Vec<f64>, endowment: Vec<f64>) -> Result<Self> {
        Self::with_scale(alpha, endowment, ScaleFn::default())
    }

    pub fn with_scale(alpha: Vec<f64>, endowment: Vec<f64>, scale: ScaleFn) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::InvalidConsumer(
                "need at least two goods".to_string(),
            ));
        }
        if endowment.len() != alpha.len() {
            return Err(Error::InvalidConsumer(format!(
                "alpha has {} entries but endowment has {}",
                alpha.len(),
                endowment.len()
            )));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidConsumer(format!(
                "alpha {alpha:?} must be strictly positive"
            )));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > SHARE_TOL {
            return Err(Error::InvalidConsumer(format!("alpha sums to {sum}, not 1")));
        }
        if endowment.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConsumer(format!(
                "endowment {endowment:?} must be non-negative"
            )));
        }
        if endowment.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidConsumer("endowment is zero".to_string()));
        }
        scale.validate(alpha.len())?;
        Ok(Self {
            alpha,
            endowment,
            scale,
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn endowment(&self) -> &[f64] {
        &self.endowment
    }

    pub fn scale(&self) -> &ScaleFn {
        &self.scale
    }

    pub fn goods(&self) -> usize {
        self.alpha.len()
    }

    /// Scale value at arbitrary positive prices.
    pub fn scale_at(&self, prices: &[f64]) -> f64 {
        if let ScaleFn::Constant { value } = self.scale {
            return value;
        }
        let sum: f64 = prices.iter().sum();
        let simplex: Vec<f64> = prices.iter().map(|p| p / sum).collect();
        self.scale.value_at(&simplex)
    }

    fn demand_raw(&self, prices: &[f64]) -> Vec<f64> {
        let w = dot(prices, &self.endowment);
        self.alpha
            .iter()
            .zip(prices)
            .map(|(a, p)| a * w / p)
            .collect()
    }

    /// scale(p)·(x(p) − ω) for any strictly positive price vector, normalised
    /// or not.
    pub fn excess_demand_raw(&self, prices: &[f64]) -> Result<Vec<f64>> {
        let mu = self.scale_at(prices);
        if !(mu > 0.0) {
            return Err(Error::NonPositiveScale { value: mu });
        }
        let w = dot(prices, &self.endowment);
        Ok(self
            .alpha
            .iter()
            .zip(prices)
            .zip(&self.endowment)
            .map(|((a, p), e)| mu * (a * w / p - e))
            .collect())
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

/// w = p·ω, in the frame of `p`.
pub fn wealth(c: &Consumer, p: &PricePoint) -> f64 {
    dot(p.coords(), c.endowment())
}

/// xᵢ = αᵢ·w/pᵢ. The scale function does not enter.
pub fn demand(c: &Consumer, p: &PricePoint) -> Result<Vec<f64>> {
    c.check_goods(p)?;
    Ok(c.demand_raw(p.coords()))
}

pub fn excess_demand(c: &Consumer, p: &PricePoint) -> Result<TangentVector> {
    c.check_goods(p)?;
    let z = c.excess_demand_raw(p.coords())?;
    TangentVector::new(p, z)
}

/// V(p, ω) = A·Π pᵢ^{−αᵢ}·w with A = Π αᵢ^{αᵢ}; scale is ignored.
pub fn indirect_utility(c: &Consumer, p: &PricePoint) -> Result<f64> {
    c.check_goods(p)?;
    let log_a: f64 = c.alpha().iter().map(|a| a * a.ln()).sum();
    let log_p: f64 = c
        .alpha()
        .iter()
        .zip(p.coords())
        .map(|(a, pi)| a * pi.ln())
        .sum();
    Ok((log_a - log_p).exp() * wealth(c, p))
}

/// u(x) = Π xᵢ^{αᵢ}.
pub fn utility(alpha: &[f64], bundle: &[f64]) -> f64 {
    alpha
        .iter()
        .zip(bundle)
        .map(|(a, x)| x.powf(*a))
        .product()
}

/// A non-empty collection of consumers over the same goods.
#[derive(Debug, Clone, PartialEq)]
pub struct Economy {
    consumers: Vec<Consumer>,
}

impl Economy {
    pub fn new(consumers: Vec<Consumer>) -> Result<Self> {
        let first = consumers
            .first()
            .ok_or_else(|| Error::InvalidEconomy("economy has no consumers".to_string()))?;
        let goods = first.goods();
        if let Some((i, c)) = consumers.iter().enumerate().find(|(_, c)| c.goods() != goods) {
            return Err(Error::InvalidEconomy(format!(
                "consumer {i} has {} goods, expected {goods}",
                c.goods()
            )));
        }
        Ok(Self { consumers })
    }

    pub fn consumers(&self) -> &[Consumer] {
        &self.consumers
    }

    /// Aggregate excess demand at any strictly positive price vector.
    pub fn excess_demand_raw(&self, prices: &[f64]) -> Result<Vec<f64>> {
        let mut total = vec![0.0; self.goods()];
        for c in &self.consumers {
            for (t, z) in total.iter_mut().zip(c.excess_demand_raw(prices)?) {
                *t += z;
            }
        }
        Ok(total)
    }

    /// Total endowment Σω.
    pub fn total_endowment(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.goods()];
        for c in &self.consumers {
            for (t, w) in total.iter_mut().zip(c.endowment()) {
                *t += w;
            }
        }
        total
    }
}

impl ExcessDemand for Economy {
    fn goods(&self) -> usize {
        self.consumers[0].goods()
    }

    fn excess_at(&self, simplex: &[f64]) -> Result<Vec<f64>> {
        self.excess_demand_raw(simplex)
    }
}

/// Aggregate excess demand as a tangent vector at `p`.
pub fn aed(e: &Economy, p: &PricePoint) -> Result<TangentVector> {
    e.evaluate(p)
}

/// Chart Jacobian by central differences with h = 1e−6·max(1, ‖c‖),
/// cross-checked against step h/2.
///
/// The step is shrunk near the chart boundary so the stencil stays in the
/// open simplex. Disagreement between the two steps beyond
/// [`JACOBIAN_CONSISTENCY`] is reported as [`Error::IllConditioned`].
pub fn aed_jacobian<F: ExcessDemand + ?Sized>(field: &F, c: &ChartPoint) -> Result<DMatrix<f64>> {
    let x = c.coords();
    let h = safe_step(x, 1e-6 * norm2(x).max(1.0));
    let coarse = fd_jacobian(field, x, h)?;
    let fine = fd_jacobian(field, x, 0.5 * h)?;
    let discrepancy = (&coarse - &fine).amax();
    if !discrepancy.is_finite()
        || discrepancy > JACOBIAN_CONSISTENCY * coarse.amax() + JACOBIAN_ABS_FLOOR
    {
        return Err(Error::IllConditioned { discrepancy });
    }
    Ok(coarse)
}
