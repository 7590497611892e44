//! Price representations on the open simplex, the positive unit sphere and
//! the drop-last-coordinate chart.
//!
//! Simplex and sphere points are related by radial projection, so any
//! strictly positive vector names the same relative prices in both frames.
//! Excess demand is homogeneous of degree zero, which is why every
//! evaluation in this crate can pick whichever frame is convenient.

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance on the frame constraints (Σp = 1, ‖p‖ = 1).
pub const FRAME_TOL: f64 = 1e-12;
/// Tolerance on p·v = 0 for tangent vectors, relative to max(1, ‖v‖).
pub const TANGENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    Simplex,
    Sphere,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Simplex => "simplex",
            Frame::Sphere => "sphere",
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A strictly positive price vector carried in either the simplex or the
/// sphere frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePoint {
    coords: Vec<f64>,
    frame: Frame,
}

fn check_positive(coords: &[f64]) -> Result<()> {
    if coords.len() < 2 {
        return Err(Error::NotInterior(format!(
            "need at least two goods, got {}",
            coords.len()
        )));
    }
    if let Some(bad) = coords.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(Error::NotInterior(format!(
            "coordinate {bad} is not strictly positive"
        )));
    }
    Ok(())
}

impl PricePoint {
    pub fn simplex(coords: Vec<f64>) -> Result<Self> {
        check_positive(&coords)?;
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > FRAME_TOL {
            return Err(Error::NotInterior(format!(
                "simplex coordinates sum to {sum}"
            )));
        }
        Ok(Self {
            coords,
            frame: Frame::Simplex,
        })
    }

    pub fn sphere(coords: Vec<f64>) -> Result<Self> {
        check_positive(&coords)?;
        let norm = norm2(&coords);
        if (norm - 1.0).abs() > FRAME_TOL {
            return Err(Error::NotInterior(format!(
                "sphere coordinates have norm {norm}"
            )));
        }
        Ok(Self {
            coords,
            frame: Frame::Sphere,
        })
    }

    /// Normalises an arbitrary strictly positive vector onto the simplex.
    pub fn from_positive(raw: &[f64]) -> Result<Self> {
        check_positive(raw)?;
        let sum: f64 = raw.iter().sum();
        Ok(Self {
            coords: raw.iter().map(|x| x / sum).collect(),
            frame: Frame::Simplex,
        })
    }

    /// The barycenter (1/ℓ, …, 1/ℓ).
    pub fn barycenter(goods: usize) -> Result<Self> {
        Self::from_positive(&vec![1.0; goods])
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn goods(&self) -> usize {
        self.coords.len()
    }

    pub fn to_simplex(&self) -> PricePoint {
        match self.frame {
            Frame::Simplex => self.clone(),
            Frame::Sphere => {
                let sum: f64 = self.coords.iter().sum();
                PricePoint {
                    coords: self.coords.iter().map(|x| x / sum).collect(),
                    frame: Frame::Simplex,
                }
            }
        }
    }

    pub fn to_sphere(&self) -> PricePoint {
        match self.frame {
            Frame::Sphere => self.clone(),
            Frame::Simplex => {
                let norm = norm2(&self.coords);
                PricePoint {
                    coords: self.coords.iter().map(|x| x / norm).collect(),
                    frame: Frame::Sphere,
                }
            }
        }
    }

    /// Simplex-frame coordinates without allocating a new point when the
    /// frame already matches.
    pub fn simplex_coords(&self) -> std::borrow::Cow<'_, [f64]> {
        match self.frame {
            Frame::Simplex => std::borrow::Cow::Borrowed(&self.coords),
            Frame::Sphere => std::borrow::Cow::Owned(self.to_simplex().coords),
        }
    }
}

/// Interior point of the chart image {c ∈ ℝ^{ℓ−1} : c > 0, Σc < 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::NotInterior("empty chart point".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::NotInterior(format!(
                "chart coordinate {bad} is not strictly positive"
            )));
        }
        let sum: f64 = coords.iter().sum();
        if sum >= 1.0 {
            return Err(Error::NotInterior(format!(
                "chart coordinates sum to {sum} >= 1"
            )));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// A vector at a sphere-frame base point, orthogonal to the base.
///
/// Orthogonality to the base price is Walras' law.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: PricePoint,
    components: Vec<f64>,
}

impl TangentVector {
    /// Wraps `components` at `base` after checking tangency.
    pub fn new(base: &PricePoint, components: Vec<f64>) -> Result<Self> {
        if components.len() != base.goods() {
            return Err(Error::DimensionMismatch {
                expected: base.goods(),
                found: components.len(),
            });
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        let base = base.to_sphere();
        let residual = dot(base.coords(), &components).abs();
        if residual > TANGENCY_TOL * norm2(&components).max(1.0) {
            return Err(Error::NonTangent { residual });
        }
        Ok(Self { base, components })
    }

    pub fn zero(base: &PricePoint) -> Self {
        Self {
            base: base.to_sphere(),
            components: vec![0.0; base.goods()],
        }
    }

    pub fn base(&self) -> &PricePoint {
        &self.base
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn into_components(self) -> Vec<f64> {
        self.components
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.components)
    }

    /// |p·v| with p the sphere-frame base.
    pub fn walras_residual(&self) -> f64 {
        dot(self.base.coords(), &self.components).abs()
    }

    /// First ℓ−1 components: the vector in the drop-last chart trivialisation.
    pub fn chart_components(&self) -> &[f64] {
        &self.components[..self.components.len() - 1]
    }
}

pub fn simplex_to_sphere(p: &PricePoint) -> Result<PricePoint> {
    if p.frame() != Frame::Simplex {
        return Err(Error::FrameMismatch {
            expected: "simplex",
            found: p.frame().name(),
        });
    }
    Ok(p.to_sphere())
}

pub fn sphere_to_simplex(p: &PricePoint) -> Result<PricePoint> {
    if p.frame() != Frame::Sphere {
        return Err(Error::FrameMismatch {
            expected: "sphere",
            found: p.frame().name(),
        });
    }
    Ok(p.to_simplex())
}

/// Appends the missing last coordinate 1 − Σc.
pub fn chart_embed(c: &ChartPoint) -> PricePoint {
    let mut coords = c.coords().to_vec();
    let last = 1.0 - coords.iter().sum::<f64>();
    coords.push(last);
    PricePoint {
        coords,
        frame: Frame::Simplex,
    }
}

pub fn chart_project(p: &PricePoint) -> ChartPoint {
    let s = p.simplex_coords();
    ChartPoint {
        coords: s[..s.len() - 1].to_vec(),
    }
}

/// Orthogonal projection v − (p·v)p onto the tangent space at p.
pub fn tangent_project(p: &PricePoint, v: &[f64]) -> Result<TangentVector> {
    if v.len() != p.goods() {
        return Err(Error::DimensionMismatch {
            expected: p.goods(),
            found: v.len(),
        });
    }
    let base = p.to_sphere();
    let pv = dot(base.coords(), v);
    let components = v
        .iter()
        .zip(base.coords())
        .map(|(vi, pi)| vi - pv * pi)
        .collect();
    Ok(TangentVector { base, components })
}

/// Distance to the simplex boundary, measured as the smallest simplex
/// coordinate.
pub fn boundary_margin(p: &PricePoint) -> f64 {
    p.simplex_coords()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Boundary margin of a chart point: min(c₁, …, c_{ℓ−1}, 1 − Σc).
pub fn chart_margin(c: &[f64]) -> f64 {
    let last = 1.0 - c.iter().sum::<f64>();
    c.iter().copied().fold(last, f64::min)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn simplex_to_sphere_examples() {
        let s = simplex_to_sphere(&PricePoint::simplex(vec![0.5, 0.5]).unwrap()).unwrap();
        let h = 2f64.sqrt() / 2.0;
        assert!(close(s.coords(), &[h, h], 1e-15));

        let third = 1.0 / 3.0;
        let s = simplex_to_sphere(&PricePoint::simplex(vec![third; 3]).unwrap()).unwrap();
        assert!(close(s.coords(), &[1.0 / 3f64.sqrt(); 3], 1e-15));

        let s = simplex_to_sphere(&PricePoint::simplex(vec![0.4, 0.6]).unwrap()).unwrap();
        let n = 0.52f64.sqrt();
        assert!(close(s.coords(), &[0.4 / n, 0.6 / n], 1e-15));
    }

    #[test]
    fn sphere_to_simplex_examples() {
        let h = 2f64.sqrt() / 2.0;
        let s = sphere_to_simplex(&PricePoint::sphere(vec![h, h]).unwrap()).unwrap();
        assert!(close(s.coords(), &[0.5, 0.5], 1e-15));

        let r = 1.0 / 3f64.sqrt();
        let s = sphere_to_simplex(&PricePoint::sphere(vec![r; 3]).unwrap()).unwrap();
        assert!(close(s.coords(), &[1.0 / 3.0; 3], 1e-15));

        let s = sphere_to_simplex(&PricePoint::sphere(vec![0.6, 0.8]).unwrap()).unwrap();
        assert!(close(s.coords(), &[3.0 / 7.0, 4.0 / 7.0], 1e-15));
    }

    #[test]
    fn rejects_boundary_and_wrong_frame() {
        assert!(PricePoint::simplex(vec![0.0, 1.0]).is_err());
        assert!(PricePoint::simplex(vec![-0.1, 1.1]).is_err());
        assert!(PricePoint::simplex(vec![0.3, 0.3]).is_err());
        assert!(PricePoint::sphere(vec![1.0, 0.0]).is_err());
        assert!(PricePoint::from_positive(&[1.0, 0.0]).is_err());
        let p = PricePoint::simplex(vec![0.5, 0.5]).unwrap();
        assert!(sphere_to_simplex(&p).is_err());
        assert!(simplex_to_sphere(&p.to_sphere()).is_err());
    }

    #[test]
    fn chart_examples() {
        let p = chart_embed(&ChartPoint::new(vec![0.3]).unwrap());
        assert!(close(p.coords(), &[0.3, 0.7], 1e-15));
        let p = chart_embed(&ChartPoint::new(vec![0.2, 0.5]).unwrap());
        assert!(close(p.coords(), &[0.2, 0.5, 0.3], 1e-15));
        assert!(ChartPoint::new(vec![0.5, 0.5]).is_err());
        assert!(ChartPoint::new(vec![0.0, 0.5]).is_err());
        assert!(ChartPoint::new(vec![0.7, 0.6]).is_err());
    }

    #[test]
    fn tangent_project_examples() {
        let h = 2f64.sqrt() / 2.0;
        let p = PricePoint::sphere(vec![h, h]).unwrap();
        let t = tangent_project(&p, &[h, h]).unwrap();
        assert!(close(t.components(), &[0.0, 0.0], 1e-15));
        let t = tangent_project(&p, &[1.0, -1.0]).unwrap();
        assert!(close(t.components(), &[1.0, -1.0], 1e-15));

        let p = PricePoint::sphere(vec![0.6, 0.8]).unwrap();
        let t = tangent_project(&p, &[1.0, 0.0]).unwrap();
        assert!(close(t.components(), &[0.64, -0.48], 1e-15));
    }

    #[test]
    fn boundary_margin_examples() {
        let m = |v: Vec<f64>| boundary_margin(&PricePoint::simplex(v).unwrap());
        assert_eq!(m(vec![0.5, 0.5]), 0.5);
        assert_eq!(m(vec![0.2, 0.5, 0.3]), 0.2);
        assert_eq!(m(vec![0.01, 0.99]), 0.01);
    }

    #[test]
    fn tangent_vector_rejects_normal_component() {
        let p = PricePoint::simplex(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            TangentVector::new(&p, vec![1.0, 1.0]),
            Err(Error::NonTangent { .. })
        ));
        assert!(TangentVector::new(&p, vec![1.0, -1.0]).is_ok());
    }

    fn positive_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        (2..=max_len).prop_flat_map(|n| prop::collection::vec(1e-3..1.0f64, n))
    }

    proptest! {
        #[test]
        fn frame_round_trip(raw in positive_vec(6)) {
            let p = PricePoint::from_positive(&raw).unwrap();
            let back = sphere_to_simplex(&simplex_to_sphere(&p).unwrap()).unwrap();
            prop_assert!(close(back.coords(), p.coords(), FRAME_TOL));
            let sph = p.to_sphere();
            prop_assert!((norm2(sph.coords()) - 1.0).abs() <= FRAME_TOL);
        }

        #[test]
        fn chart_round_trip(raw in positive_vec(6)) {
            let p = PricePoint::from_positive(&raw).unwrap();
            let c = chart_project(&p);
            let q = chart_embed(&c);
            prop_assert!(close(q.coords(), p.coords(), FRAME_TOL));
            let c2 = chart_project(&q);
            prop_assert!(close(c2.coords(), c.coords(), FRAME_TOL));
        }

        #[test]
        fn projection_is_idempotent_and_tangent(
            raw in positive_vec(6),
            v in prop::collection::vec(-10.0..10.0f64, 6),
        ) {
            let p = PricePoint::from_positive(&raw).unwrap();
            let v = &v[..p.goods()];
            let once = tangent_project(&p, v).unwrap();
            let twice = tangent_project(&p, once.components()).unwrap();
            prop_assert!(close(once.components(), twice.components(), 1e-12));
            prop_assert!(once.walras_residual() <= TANGENCY_TOL);
        }
    }
}
