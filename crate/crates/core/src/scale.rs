//! Positive scaling functions attached to consumers.
//!
//! The vocabulary is closed so that economies can be written to and read
//! back from economy files. Every variant is evaluated on the chart
//! coordinates of the simplex-normalised price, which keeps a scaled excess
//! demand homogeneous of degree zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: f64,
    /// One exponent per chart coordinate.
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScaleFn {
    Constant {
        value: f64,
    },
    /// Σ coefficient · Π cₖ^powerₖ over chart coordinates.
    Polynomial {
        terms: Vec<Monomial>,
    },
    /// floor + height·exp(1 − 1/(1 − r²/R²)) inside the ball of radius R
    /// around `center`, `floor` outside. C^∞.
    Bump {
        center: Vec<f64>,
        radius: f64,
        height: f64,
        floor: f64,
    },
    /// Sampled values at chart nodes, interpolated; optionally divided by
    /// the simplex price of one good.
    ///
    /// One-dimensional charts use a local cubic Hermite interpolant with
    /// three-point slopes (C¹, constant beyond the end nodes); higher
    /// dimensions use inverse-distance weighting. Both are linear in the
    /// sampled values.
    Table {
        nodes: Vec<Vec<f64>>,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inverse_price: Option<usize>,
    },
}

impl Default for ScaleFn {
    fn default() -> Self {
        ScaleFn::Constant { value: 1.0 }
    }
}

impl ScaleFn {
    pub fn constant(value: f64) -> Self {
        ScaleFn::Constant { value }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, ScaleFn::Constant { value } if *value == 1.0)
    }

    /// Structural checks against the number of goods. Positivity is only
    /// checked where it can be decided without evaluation.
    pub fn validate(&self, goods: usize) -> Result<()> {
        let dim = goods - 1;
        let bad = |msg: String| Err(Error::InvalidConsumer(msg));
        match self {
            ScaleFn::Constant { value } => {
                if !(value.is_finite() && *value > 0.0) {
                    return bad(format!("constant scale {value} must be positive"));
                }
            }
            ScaleFn::Polynomial { terms } => {
                if terms.is_empty() {
                    return bad("polynomial scale has no terms".into());
                }
                for t in terms {
                    if t.powers.len() != dim {
                        return bad(format!(
                            "monomial has {} exponents, chart has {dim} coordinates",
                            t.powers.len()
                        ));
                    }
                    if !t.coefficient.is_finite() {
                        return bad("non-finite polynomial coefficient".into());
                    }
                }
            }
            ScaleFn::Bump {
                center,
                radius,
                height,
                floor,
            } => {
                if center.len() != dim {
                    return bad(format!("bump center must have {dim} coordinates"));
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return bad("bump radius must be positive".into());
                }
                if !(*floor > 0.0 && floor + height > 0.0) {
                    return bad("bump floor and floor + height must be positive".into());
                }
            }
            ScaleFn::Table {
                nodes,
                values,
                inverse_price,
            } => {
                if nodes.is_empty() || nodes.len() != values.len() {
                    return bad(format!(
                        "table has {} nodes and {} values",
                        nodes.len(),
                        values.len()
                    ));
                }
                if nodes.iter().any(|n| n.len() != dim) {
                    return bad(format!("table nodes must have {dim} coordinates"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return bad("table values must be positive".into());
                }
                if dim == 1 && nodes.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return bad("one-dimensional table nodes must be strictly increasing".into());
                }
                if let Some(k) = inverse_price {
                    if *k >= goods {
                        return bad(format!("inverse_price index {k} out of range"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Raw value at simplex-frame prices. May be non-positive for a badly
    /// chosen polynomial; callers decide how to react.
    pub fn value_at(&self, simplex: &[f64]) -> f64 {
        let chart = &simplex[..simplex.len() - 1];
        match self {
            ScaleFn::Constant { value } => *value,
            ScaleFn::Polynomial { terms } => terms
                .iter()
                .map(|t| {
                    t.coefficient
                        * chart
                            .iter()
                            .zip(&t.powers)
                            .map(|(c, &k)| c.powi(k as i32))
                            .product::<f64>()
                })
                .sum(),
            ScaleFn::Bump {
                center,
                radius,
                height,
                floor,
            } => {
                let r2: f64 = chart
                    .iter()
                    .zip(center)
                    .map(|(c, x)| (c - x) * (c - x))
                    .sum::<f64>()
                    / (radius * radius);
                if r2 < 1.0 {
                    floor + height * (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    *floor
                }
            }
            ScaleFn::Table {
                nodes,
                values,
                inverse_price,
            } => {
                let v = if chart.len() == 1 {
                    hermite_1d(nodes, values, chart[0])
                } else {
                    shepard(nodes, values, chart)
                };
                match inverse_price {
                    Some(k) => v / simplex[*k],
                    None => v,
                }
            }
        }
    }
}

/// Cubic Hermite interpolation with three-point slopes. Local: the value on
/// [x_k, x_{k+1}] depends on nodes k−1..=k+2 only.
pub(crate) fn hermite_1d(nodes: &[Vec<f64>], values: &[f64], x: f64) -> f64 {
    let n = nodes.len();
    let xs = |i: usize| nodes[i][0];
    if n == 1 || x <= xs(0) {
        return values[0];
    }
    if x >= xs(n - 1) {
        return values[n - 1];
    }
    // first index with xs(k+1) > x
    let k = nodes.partition_point(|node| node[0] <= x) - 1;
    let secant = |i: usize| (values[i + 1] - values[i]) / (xs(i + 1) - xs(i));
    let slope = |i: usize| {
        if i == 0 {
            secant(0)
        } else if i == n - 1 {
            secant(n - 2)
        } else {
            let hl = xs(i) - xs(i - 1);
            let hr = xs(i + 1) - xs(i);
            (hr * secant(i - 1) + hl * secant(i)) / (hl + hr)
        }
    };
    let h = xs(k + 1) - xs(k);
    let t = (x - xs(k)) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * values[k] + h10 * h * slope(k) + h01 * values[k + 1] + h11 * h * slope(k + 1)
}

fn shepard(nodes: &[Vec<f64>], values: &[f64], x: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (node, v) in nodes.iter().zip(values) {
        let d2: f64 = node.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 == 0.0 {
            return *v;
        }
        let w = 1.0 / (d2 * d2);
        num += w * v;
        den += w;
    }
    num / den
}
