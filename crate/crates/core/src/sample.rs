//! Seeded random instances used by tests, audits and the CLI.

use rand::Rng;

use crate::geometry::{BoundaryDirection, SpacePoint, UnitTangent};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; one draw is enough here
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniformly distributed Euclidean unit vector in R^dim.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Point at hyperbolic distance uniform in `[0, radius]` from `o`, in a
/// uniformly random direction.
pub fn point_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> SpacePoint {
    let dir = unit_vector(rng, dim);
    let r = rng.gen::<f64>() * radius;
    SpacePoint::from_polar(&dir, r)
}

pub fn boundary_point<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> BoundaryDirection {
    BoundaryDirection::from_euclidean(&unit_vector(rng, dim))
}

/// Unit tangent with base point in the ball of `radius` about `o`.
pub fn unit_tangent<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> UnitTangent {
    let x = point_in_ball(rng, dim, radius);
    let xi = boundary_point(rng, dim);
    crate::geometry::direction_to(&x, &xi)
}
