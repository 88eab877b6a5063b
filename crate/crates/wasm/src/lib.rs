//! Browser bindings for a small interactive demo in the Poincare disk.
//!
//! Points cross the boundary as flat `[x0, y0, x1, y1, ...]` arrays of disk
//! coordinates. A boundary map is described by four numbers: a rotation
//! angle, a boost rapidity, the heading of the boost, and the amplitude of a
//! second-harmonic warp that makes the map non-Moebius when nonzero.

use hyperbary::extension::{circumcenter_extension, p_extension, ExtensionContext};
use hyperbary::measure::uniform_boundary_grid;
use hyperbary::moebius::{cross_ratio_deviation, probe_quadruples, BoundaryMap, FourierWarp};
use hyperbary::solver::minimize;
use hyperbary::{Error, Lorentz, ModelConfig, ObjectiveSpec, Result, SolverConfig, SpaceMeasure, SpacePoint};
use wasm_bindgen::prelude::*;

fn points(coords: &[f64]) -> Result<Vec<SpacePoint>> {
    if !coords.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument("coordinates must come in (x, y) pairs".into()));
    }
    coords
        .chunks(2)
        .map(|w| {
            if w[0] * w[0] + w[1] * w[1] < 1.0 {
                Ok(SpacePoint::from_poincare(w))
            } else {
                Err(Error::InvalidArgument(format!(
                    "({}, {}) is outside the unit disk",
                    w[0], w[1]
                )))
            }
        })
        .collect()
}

fn flatten(points: &[SpacePoint]) -> Vec<f64> {
    points.iter().flat_map(|p| p.to_poincare()).collect()
}

/// `R(heading) B(rapidity) R(-heading) R(rotation)`, optionally warped.
pub fn boundary_map(rotation: f64, rapidity: f64, heading: f64, warp: f64) -> Result<BoundaryMap> {
    let turn = |a: f64| Lorentz::rotation(2, 1, 2, a);
    let g = turn(heading)
        .compose(&Lorentz::boost(2, 1, rapidity))
        .compose(&turn(-heading))
        .compose(&turn(rotation));
    if warp == 0.0 {
        Ok(BoundaryMap::Lorentz(g))
    } else {
        Ok(BoundaryMap::Perturbed {
            base: g,
            warp: FourierWarp::new(vec![0.0, warp])?,
        })
    }
}

/// The `p`-barycenter (`p = inf` for the circumcenter) of equally weighted
/// points, in disk coordinates.
pub fn barycenter_of(coords: &[f64], p: f64) -> Result<Vec<f64>> {
    let atoms = points(coords)?;
    let spec = ObjectiveSpec::cosh(SpaceMeasure::uniform(atoms)?, p)?;
    Ok(minimize(&spec, &SolverConfig::default()).into_point()?.to_poincare())
}

/// Largest log cross-ratio distortion of the map over fixed probe quadruples.
pub fn gate_deviation(rotation: f64, rapidity: f64, heading: f64, warp: f64) -> Result<f64> {
    let f = boundary_map(rotation, rapidity, heading, warp)?;
    cross_ratio_deviation(&f, &probe_quadruples(2))
}

/// Images of the points under the barycentric extension of the map, with
/// `p = inf` selecting the circumcenter extension. Fails for non-Moebius maps.
pub fn extend_points(
    rotation: f64,
    rapidity: f64,
    heading: f64,
    warp: f64,
    coords: &[f64],
    p: f64,
) -> Result<Vec<f64>> {
    let f = boundary_map(rotation, rapidity, heading, warp)?;
    let o = SpacePoint::origin(2);
    let ctx = ExtensionContext::new(
        f,
        uniform_boundary_grid(96, &o)?,
        ModelConfig::new(2, 1.0)?,
        SolverConfig::default(),
    )?;
    let images = points(coords)?
        .iter()
        .map(|x| {
            if p.is_infinite() {
                circumcenter_extension(&ctx, x)
            } else {
                p_extension(&ctx, x, p)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(flatten(&images))
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn barycenter(coords: &[f64], p: f64) -> std::result::Result<Vec<f64>, JsError> {
    barycenter_of(coords, p).map_err(js)
}

#[wasm_bindgen]
pub fn gate(rotation: f64, rapidity: f64, heading: f64, warp: f64) -> std::result::Result<f64, JsError> {
    gate_deviation(rotation, rapidity, heading, warp).map_err(js)
}

#[wasm_bindgen]
pub fn extend(
    rotation: f64,
    rapidity: f64,
    heading: f64,
    warp: f64,
    coords: &[f64],
    p: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    extend_points(rotation, rapidity, heading, warp, coords, p).map_err(js)
}
