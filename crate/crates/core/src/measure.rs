//! Finite probability measures on H^n, on its boundary, and on the unit
//! tangent bundle.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    boundary_endpoint, direction_to, geodesic_flow, geodesic_point, tangent_frame, BoundaryDirection, SpacePoint,
    UnitTangent,
};

/// Weights must sum to one within this tolerance.
pub const MASS_TOL: f64 = 1e-12;

/// Weighted atoms of a single kind.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure<T> {
    atoms: Vec<T>,
    weights: Vec<f64>,
}

pub type SpaceMeasure = DiscreteMeasure<SpacePoint>;
pub type BoundaryMeasure = DiscreteMeasure<BoundaryDirection>;
pub type TangentMeasure = DiscreteMeasure<UnitTangent>;

impl<T> DiscreteMeasure<T> {
    /// Validating constructor: non-empty, positive weights summing to one.
    pub fn new(atoms: Vec<T>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("atom list is empty".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("non-positive weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        Ok(DiscreteMeasure { atoms, weights })
    }

    /// Rescales positive weights to total mass one.
    pub fn normalized(atoms: Vec<T>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure(format!("total mass {total}")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        DiscreteMeasure::new(atoms, weights)
    }

    pub fn uniform(atoms: Vec<T>) -> Result<Self> {
        let n = atoms.len();
        DiscreteMeasure::normalized(atoms, vec![1.0; n])
    }

    pub fn atoms(&self) -> &[T] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// Atomwise image; the weight array is copied unchanged.
    pub fn map<U, F: FnMut(&T) -> U>(&self, f: F) -> DiscreteMeasure<U> {
        DiscreteMeasure {
            atoms: self.atoms.iter().map(f).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Atomwise image through a fallible map.
    pub fn try_map<U, F: FnMut(&T) -> Result<U>>(&self, f: F) -> Result<DiscreteMeasure<U>> {
        Ok(DiscreteMeasure {
            atoms: self.atoms.iter().map(f).collect::<Result<Vec<_>>>()?,
            weights: self.weights.clone(),
        })
    }

    /// Same atoms with new weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self>
    where
        T: Clone,
    {
        DiscreteMeasure::new(self.atoms.clone(), weights)
    }
}

impl BoundaryMeasure {
    /// Merges atoms whose positions agree within `tol`; weights add.
    pub fn coalesce(&self, tol: f64) -> Self {
        let mut atoms: Vec<BoundaryDirection> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (a, w) in self.iter() {
            match atoms.iter().position(|b| b.chord(a) <= tol) {
                Some(i) => weights[i] += w,
                None => {
                    atoms.push(a.clone());
                    weights.push(w);
                }
            }
        }
        DiscreteMeasure { atoms, weights }
    }

    /// Number of pairwise distinct atoms (up to `tol`).
    pub fn distinct_count(&self, tol: f64) -> usize {
        self.coalesce(tol).len()
    }
}

impl SpaceMeasure {
    pub fn coalesce(&self, tol: f64) -> Self {
        let mut atoms: Vec<SpacePoint> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (a, w) in self.iter() {
            match atoms.iter().position(|b| (b.coords() - a.coords()).amax() <= tol) {
                Some(i) => weights[i] += w,
                None => {
                    atoms.push(a.clone());
                    weights.push(w);
                }
            }
        }
        DiscreteMeasure { atoms, weights }
    }
}

/// Deterministic directions on the unit sphere S^{dim-1}. For even `n` the
/// set is closed under negation.
pub fn sphere_directions(n: usize, dim: usize) -> Vec<Vec<f64>> {
    if dim == 2 {
        return (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    let half = n / 2;
    let base = if dim == 3 {
        fibonacci_sphere(if n.is_multiple_of(2) { half } else { n })
    } else {
        kronecker_sphere(if n.is_multiple_of(2) { half } else { n }, dim)
    };
    if n.is_multiple_of(2) {
        let mut out = Vec::with_capacity(n);
        for v in base {
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            out.push(v);
            out.push(neg);
        }
        out
    } else {
        base
    }
}

fn fibonacci_sphere(m: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|k| {
            // offset by a half step so no point sits on a pole
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            vec![r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Additive-recurrence low-discrepancy points in the cube pushed to the
/// sphere through Box-Muller pairs.
fn kronecker_sphere(m: usize, dim: usize) -> Vec<Vec<f64>> {
    let slots = dim + dim % 2;
    // generalized golden ratio: root of x^{d+1} = x + 1
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (slots as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=slots).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();
    (0..m)
        .map(|k| {
            let u: Vec<f64> = alpha.iter().map(|a| (0.5 + a * (k as f64 + 1.0)).fract()).collect();
            let mut g = Vec::with_capacity(slots);
            for pair in u.chunks(2) {
                let r = (-2.0 * pair[0].max(1e-300).ln()).sqrt();
                let t = 2.0 * PI * pair[1];
                g.push(r * t.cos());
                g.push(r * t.sin());
            }
            g.truncate(dim);
            let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            g.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

/// `n` equal-weight boundary atoms at equally spaced directions of `T^1_x`.
/// Atom count for a boundary grid in dimension `dim`, growing with the
/// dimension from `n` atoms on the circle. With `n = 64` in dimensions 2 and 3
/// the directions from any point within distance 3 of the grid centre
/// surround it.
pub fn grid_atoms(n: usize, dim: usize) -> usize {
    n * 16usize.pow(dim.saturating_sub(2) as u32)
}

pub fn uniform_boundary_grid(n: usize, x: &SpacePoint) -> Result<BoundaryMeasure> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("grid needs at least 2 atoms, got {n}")));
    }
    let frame = tangent_frame(x);
    let atoms = sphere_directions(n, x.dim())
        .into_iter()
        .map(|d| {
            let mut v = x.coords().clone();
            for (e, c) in frame.iter().zip(d.iter()) {
                v += e * *c;
            }
            // x + unit tangent is a null vector pointing at the endpoint
            BoundaryDirection::normalize(v)
        })
        .collect();
    BoundaryMeasure::uniform(atoms)
}

/// `(q_x)_* mu`.
pub fn pushforward_qx(mu: &BoundaryMeasure, x: &SpacePoint) -> TangentMeasure {
    mu.map(|xi| direction_to(x, xi))
}

/// `p_* nu`: forward endpoints.
pub fn endpoints(nu: &TangentMeasure) -> BoundaryMeasure {
    nu.map(boundary_endpoint)
}

/// `(phi_t)_* nu`.
pub fn flow(nu: &TangentMeasure, t: f64) -> TangentMeasure {
    nu.map(|u| geodesic_flow(u, t))
}

/// `(pi o phi_t)_* nu`.
pub fn flow_project(nu: &TangentMeasure, t: f64) -> SpaceMeasure {
    nu.map(|u| geodesic_point(u, t))
}

/// Norm of `sum w_i (z -> eta_i)`; zero iff the measure is balanced at `z`.
pub fn balance_residual(nu: &BoundaryMeasure, z: &SpacePoint) -> f64 {
    let mut acc = DVector::zeros(z.coords().len());
    for (eta, w) in nu.iter() {
        acc += direction_to(z, eta).dir() * w;
    }
    crate::geometry::tangent_norm(&acc)
}

/// Weighted mean of the unit directions `x -> xi` (a tangent vector at `x`).
pub fn mean_direction(nu: &BoundaryMeasure, x: &SpacePoint) -> DVector<f64> {
    let mut acc = DVector::zeros(x.coords().len());
    for (xi, w) in nu.iter() {
        acc += direction_to(x, xi).dir() * w;
    }
    acc
}

impl TangentMeasure {
    /// Base points of the atoms as a space measure.
    pub fn base_points(&self) -> SpaceMeasure {
        self.map(|u| u.base().clone())
    }
}

/// A measure of any kind, as read from or written to JSON.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyMeasure {
    Space(SpaceMeasure),
    Boundary(BoundaryMeasure),
    Tangent(TangentMeasure),
}

impl AnyMeasure {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyMeasure::Space(_) => "space",
            AnyMeasure::Boundary(_) => "boundary",
            AnyMeasure::Tangent(_) => "tangent",
        }
    }

    pub fn into_space(self) -> Result<SpaceMeasure> {
        match self {
            AnyMeasure::Space(m) => Ok(m),
            other => Err(Error::MeasureKind {
                expected: "space",
                got: other.kind(),
            }),
        }
    }

    pub fn into_boundary(self) -> Result<BoundaryMeasure> {
        match self {
            AnyMeasure::Boundary(m) => Ok(m),
            other => Err(Error::MeasureKind {
                expected: "boundary",
                got: other.kind(),
            }),
        }
    }

    pub fn into_tangent(self) -> Result<TangentMeasure> {
        match self {
            AnyMeasure::Tangent(m) => Ok(m),
            other => Err(Error::MeasureKind {
                expected: "tangent",
                got: other.kind(),
            }),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyMeasure::Space(m) => m.atoms()[0].dim(),
            AnyMeasure::Boundary(m) => m.atoms()[0].dim(),
            AnyMeasure::Tangent(m) => m.atoms()[0].base().dim(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct AtomFile {
    coords: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dir: Option<Vec<f64>>,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct MeasureFile {
    kind: String,
    atoms: Vec<AtomFile>,
}

impl MeasureFile {
    fn into_measure(self) -> Result<AnyMeasure> {
        let weights: Vec<f64> = self.atoms.iter().map(|a| a.weight).collect();
        let dims: Vec<usize> = self.atoms.iter().map(|a| a.coords.len()).collect();
        if let Some(d) = dims.iter().find(|d| **d != dims[0]) {
            return Err(Error::DimensionMismatch {
                expected: dims[0],
                got: *d,
            });
        }
        let no_dir = |a: &AtomFile| {
            if a.dir.is_some() {
                Err(Error::InvalidMeasure(format!("{} atoms take no dir", self.kind)))
            } else {
                Ok(())
            }
        };
        match self.kind.as_str() {
            "space" => {
                let atoms = self
                    .atoms
                    .iter()
                    .map(|a| no_dir(a).and_then(|_| SpacePoint::new(a.coords.clone())))
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyMeasure::Space(DiscreteMeasure::new(atoms, weights)?))
            }
            "boundary" => {
                let atoms = self
                    .atoms
                    .iter()
                    .map(|a| no_dir(a).and_then(|_| BoundaryDirection::new(a.coords.clone())))
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyMeasure::Boundary(DiscreteMeasure::new(atoms, weights)?))
            }
            "tangent" => {
                let atoms = self
                    .atoms
                    .iter()
                    .map(|a| {
                        let dir = a
                            .dir
                            .clone()
                            .ok_or_else(|| Error::InvalidMeasure("tangent atoms need a dir".into()))?;
                        UnitTangent::new(SpacePoint::new(a.coords.clone())?, dir)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyMeasure::Tangent(DiscreteMeasure::new(atoms, weights)?))
            }
            other => Err(Error::InvalidMeasure(format!("unknown measure kind {other:?}"))),
        }
    }
}

impl Serialize for AnyMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let atoms = match self {
            AnyMeasure::Space(m) => m
                .iter()
                .map(|(a, weight)| AtomFile {
                    coords: a.to_vec(),
                    dir: None,
                    weight,
                })
                .collect(),
            AnyMeasure::Boundary(m) => m
                .iter()
                .map(|(a, weight)| AtomFile {
                    coords: a.to_vec(),
                    dir: None,
                    weight,
                })
                .collect(),
            AnyMeasure::Tangent(m) => m
                .iter()
                .map(|(u, weight)| AtomFile {
                    coords: u.base().to_vec(),
                    dir: Some(u.dir().iter().copied().collect()),
                    weight,
                })
                .collect(),
        };
        MeasureFile {
            kind: self.kind().into(),
            atoms,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AnyMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MeasureFile::deserialize(d)?
            .into_measure()
            .map_err(serde::de::Error::custom)
    }
}
