//! Economy files, observation datasets and CSV helpers.
//!
//! # Economy file grammar
//!
//! Economy files are TOML documents:
//!
//! ```toml
//! goods = 2
//!
//! [[consumers]]
//! alpha = [0.5, 0.5]
//! endowment = [1.0, 0.0]
//!
//! [[consumers]]
//! alpha = [0.5, 0.5]
//! endowment = [0.0, 1.0]
//! scale = { kind = "constant", value = 3.0 }
//! ```
//!
//! `scale` is optional (default: constant 1) and must be one of
//!
//! * `{ kind = "constant", value = c }`
//! * `{ kind = "polynomial", terms = [{ coefficient = a, powers = [k₁, …] }, …] }`
//!   in the chart coordinates p₁ … p_{ℓ−1} of the simplex-normalised price
//! * `{ kind = "bump", center = [...], radius = R, height = h, floor = f }`
//! * `{ kind = "table", nodes = [[...], …], values = [...], inverse_price = k }`
//!   (`inverse_price` optional, 0-based good index)
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cobb_douglas::{Consumer, Economy};
use crate::error::{Error, Result};
use crate::geometry::PricePoint;
use crate::revealed_preference::{Observation, ObservationDataset};
use crate::scale::ScaleFn;
use crate::smd::DecompositionWitness;

/// 17 significant digits: enough for an exact f64 round trip.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EconomyFile {
    goods: usize,
    consumers: Vec<ConsumerEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConsumerEntry {
    alpha: Vec<f64>,
    endowment: Vec<f64>,
    #[serde(default, skip_serializing_if = "ScaleFn::is_unit")]
    scale: ScaleFn,
}

pub fn parse_economy(text: &str) -> Result<Economy> {
    let file: EconomyFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.goods < 2 {
        return Err(Error::Parse(format!(
            "field `goods`: need at least 2, got {}",
            file.goods
        )));
    }
    if file.consumers.is_empty() {
        return Err(Error::Parse("field `consumers`: no consumers listed".into()));
    }
    let mut consumers = Vec::with_capacity(file.consumers.len());
    for (i, c) in file.consumers.into_iter().enumerate() {
        if c.alpha.len() != file.goods {
            return Err(Error::Parse(format!(
                "consumers[{i}].alpha: expected {} entries, found {}",
                file.goods,
                c.alpha.len()
            )));
        }
        if c.endowment.len() != file.goods {
            return Err(Error::Parse(format!(
                "consumers[{i}].endowment: expected {} entries, found {}",
                file.goods,
                c.endowment.len()
            )));
        }
        let consumer = Consumer::with_scale(c.alpha, c.endowment, c.scale)
            .map_err(|e| Error::Parse(format!("consumers[{i}]: {e}")))?;
        consumers.push(consumer);
    }
    Economy::new(consumers)
}

pub fn economy_to_toml(e: &Economy) -> String {
    let file = EconomyFile {
        goods: e.consumers()[0].goods(),
        consumers: e
            .consumers()
            .iter()
            .map(|c| ConsumerEntry {
                alpha: c.alpha().to_vec(),
                endowment: c.endowment().to_vec(),
                scale: c.scale().clone(),
            })
            .collect(),
    };
    toml::to_string(&file).expect("economy serialises")
}

pub fn read_economy(path: &Path) -> Result<Economy> {
    let text = std::fs::read_to_string(path)?;
    parse_economy(&text)
}

/// Observation datasets: header `p1..pℓ,x1..xℓ`, one observation per row.
pub fn parse_dataset(text: &str) -> Result<ObservationDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    if headers.len() < 4 || headers.len() % 2 != 0 {
        return Err(Error::Parse(format!(
            "dataset header must be p1..pℓ,x1..xℓ with ℓ ≥ 2, got {} columns",
            headers.len()
        )));
    }
    let l = headers.len() / 2;
    for (k, h) in headers.iter().enumerate() {
        let want = if k < l {
            format!("p{}", k + 1)
        } else {
            format!("x{}", k - l + 1)
        };
        if h != want {
            return Err(Error::Parse(format!(
                "dataset header column {}: expected `{want}`, found `{h}`",
                k + 1
            )));
        }
    }
    let mut observations = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        let values: Vec<f64> = record
            .iter()
            .enumerate()
            .map(|(k, v)| {
                v.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("line {line}, column `{}`: bad number `{v}`", &headers[k]))
                })
            })
            .collect::<Result<_>>()?;
        let price = PricePoint::from_positive(&values[..l])
            .map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        let bundle = values[l..].to_vec();
        let obs = Observation::new(price, bundle)
            .map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        observations.push(obs);
    }
    ObservationDataset::new(observations)
}

pub fn dataset_to_csv(d: &ObservationDataset) -> String {
    let l = d.goods();
    let mut out = String::new();
    let header: Vec<String> = (1..=l)
        .map(|i| format!("p{i}"))
        .chain((1..=l).map(|i| format!("x{i}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for o in d.observations() {
        let row: Vec<String> = o
            .price
            .coords()
            .iter()
            .chain(&o.bundle)
            .map(|x| fmt17(*x))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Witness export: p₁…p_ℓ (simplex), μ₁…μ_ℓ, residual.
pub fn witnesses_to_csv(ws: &[DecompositionWitness]) -> String {
    let Some(first) = ws.first() else {
        return String::new();
    };
    let l = first.mu.len();
    let mut out = String::new();
    let header: Vec<String> = (1..=l)
        .map(|i| format!("p{i}"))
        .chain((1..=l).map(|i| format!("mu{i}")))
        .chain(std::iter::once("residual".to_string()))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for w in ws {
        let row: Vec<String> = w
            .price
            .simplex_coords()
            .iter()
            .chain(&w.mu)
            .chain(std::iter::once(&w.residual))
            .map(|x| fmt17(*x))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
