//! Orthochronous Lorentz transformations, the isometries of H^n.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryDirection, SpacePoint, UnitTangent};
use crate::sample;

pub const LORENTZ_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Lorentz {
    m: DMatrix<f64>,
}

fn minkowski_form(n1: usize) -> DMatrix<f64> {
    let mut j = DMatrix::identity(n1, n1);
    j[(0, 0)] = -1.0;
    j
}

impl Lorentz {
    /// Validates `g^T J g = J` and `g00 > 0`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() < 3 {
            return Err(Error::DimensionMismatch {
                expected: m.nrows().max(3),
                got: m.ncols(),
            });
        }
        let j = minkowski_form(m.nrows());
        let residual = (m.transpose() * &j * &m - &j).amax();
        let scale = m.amax().powi(2).max(1.0);
        if residual > LORENTZ_TOL * scale || !(m[(0, 0)] > 0.0) {
            return Err(Error::NotLorentz { residual });
        }
        Ok(Lorentz { m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("Lorentz matrix must be square".into()));
        }
        Lorentz::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        Lorentz {
            m: DMatrix::identity(dim + 1, dim + 1),
        }
    }

    /// Rotation by `angle` in the plane of spatial axes `i`, `j` (1-based
    /// ambient indices).
    pub fn rotation(dim: usize, i: usize, j: usize, angle: f64) -> Self {
        let mut m = DMatrix::identity(dim + 1, dim + 1);
        let (c, s) = (angle.cos(), angle.sin());
        m[(i, i)] = c;
        m[(j, j)] = c;
        m[(i, j)] = -s;
        m[(j, i)] = s;
        Lorentz { m }
    }

    /// Boost of rapidity `t` along spatial axis `axis` (1-based).
    pub fn boost(dim: usize, axis: usize, t: f64) -> Self {
        let mut m = DMatrix::identity(dim + 1, dim + 1);
        let (c, s) = (t.cosh(), t.sinh());
        m[(0, 0)] = c;
        m[(axis, axis)] = c;
        m[(0, axis)] = s;
        m[(axis, 0)] = s;
        Lorentz { m }
    }

    /// The pure boost taking `o` to `z`.
    pub fn boost_to(z: &SpacePoint) -> Self {
        let c = z.coords();
        let n1 = c.len();
        let z0 = c[0];
        let mut m = DMatrix::identity(n1, n1);
        m[(0, 0)] = z0;
        for i in 1..n1 {
            m[(0, i)] = c[i];
            m[(i, 0)] = c[i];
            for j in 1..n1 {
                m[(i, j)] += c[i] * c[j] / (1.0 + z0);
            }
        }
        Lorentz { m }
    }

    /// Random isometry: a random orthogonal map about `o` followed by a boost
    /// to a random point of the ball of `radius`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Self {
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(dim);
        while cols.len() < dim {
            let mut v = DVector::from_vec(sample::unit_vector(rng, dim));
            for c in &cols {
                let d = c.dot(&v);
                v -= c * d;
            }
            let n = v.norm();
            if n > 1e-3 {
                cols.push(v / n);
            }
        }
        let mut rot = DMatrix::identity(dim + 1, dim + 1);
        for (j, c) in cols.iter().enumerate() {
            for i in 0..dim {
                rot[(i + 1, j + 1)] = c[i];
            }
        }
        let target = sample::point_in_ball(rng, dim, radius);
        Lorentz::boost_to(&target).compose(&Lorentz { m: rot })
    }

    /// `self o other`.
    pub fn compose(&self, other: &Lorentz) -> Lorentz {
        Lorentz { m: &self.m * &other.m }
    }

    pub fn inverse(&self) -> Lorentz {
        let j = minkowski_form(self.m.nrows());
        Lorentz {
            m: &j * self.m.transpose() * &j,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.m.nrows())
            .map(|i| self.m.row(i).iter().copied().collect())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.m.nrows() - 1
    }

    pub fn apply_point(&self, x: &SpacePoint) -> SpacePoint {
        SpacePoint::project(&self.m * x.coords())
    }

    pub fn apply_boundary(&self, xi: &BoundaryDirection) -> BoundaryDirection {
        BoundaryDirection::normalize(&self.m * xi.coords())
    }

    pub fn apply_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.m * v
    }

    pub fn apply_tangent(&self, u: &UnitTangent) -> UnitTangent {
        let base = self.apply_point(u.base());
        UnitTangent::from_ambient(base, &(&self.m * u.dir())).expect("isometry preserves unit tangents")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{busemann, dist, visual_metric};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_maps_are_isometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let g = Lorentz::random(&mut rng, 3, 2.0);
            Lorentz::new(g.matrix().clone()).unwrap();
            let x = sample::point_in_ball(&mut rng, 3, 3.0);
            let y = sample::point_in_ball(&mut rng, 3, 3.0);
            let xi = sample::boundary_point(&mut rng, 3);
            let eta = sample::boundary_point(&mut rng, 3);
            let (gx, gy) = (g.apply_point(&x), g.apply_point(&y));
            assert!((dist(&gx, &gy) - dist(&x, &y)).abs() < 1e-9);
            let gxi = g.apply_boundary(&xi);
            assert!((busemann(&gx, &gy, &gxi) - busemann(&x, &y, &xi)).abs() < 1e-9);
            let geta = g.apply_boundary(&eta);
            assert!((visual_metric(&gx, &gxi, &geta) - visual_metric(&x, &xi, &eta)).abs() < 1e-9);
            let back = g.inverse().apply_point(&gx);
            assert!(dist(&back, &x) < 1e-9);
        }
    }

    #[test]
    fn boost_to_hits_target() {
        let z = SpacePoint::from_spatial(&[0.4, -1.2, 2.0]);
        let g = Lorentz::boost_to(&z);
        assert!(dist(&g.apply_point(&SpacePoint::origin(3)), &z) < 1e-12);
    }

    #[test]
    fn rejects_non_lorentz() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(Lorentz::new(m), Err(Error::NotLorentz { .. })));
        let mut m = DMatrix::identity(3, 3);
        m[(0, 0)] = -1.0;
        assert!(Lorentz::new(m).is_err());
    }
}
