//! Closed-form kernel for the hyperboloid model of H^n.
//!
//! Points live on the upper sheet `<x,x> = -1, x0 > 0` of Minkowski space
//! R^{1,n} with `<x,y> = -x0 y0 + sum xi yi`. Boundary points are future
//! null rays, stored with `x0 = 1`. Tangent vectors at `z` are ambient
//! vectors `w` with `<z,w> = 0`; the Minkowski form restricted to `T_z` is
//! the Riemannian metric.
//!
//! Every closed form here is certified against its defining radial limit in
//! the unit tests at the bottom of the file.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constraint residual tolerated on construction from user data.
pub const INPUT_TOL: f64 = 1e-10;
/// Residual above which composite results are projected back.
pub const DRIFT_TOL: f64 = 1e-12;

/// Minkowski bilinear form.
pub fn minkowski(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = -a[0] * b[0];
    for i in 1..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Squared Minkowski norm of `a - b`.
fn minkowski_diff_sq(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let d0 = a[0] - b[0];
    let mut s = -d0 * d0;
    for i in 1..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// n of H^n.
    pub dim: usize,
    /// Curvature pinching constant. The realized curvature is -1; `b` only
    /// enters the audited inequalities.
    #[serde(default = "default_b")]
    pub b: f64,
}

fn default_b() -> f64 {
    1.0
}

impl ModelConfig {
    pub fn new(dim: usize, b: f64) -> Result<Self> {
        let cfg = ModelConfig { dim, b };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidArgument(format!("dim must be >= 2, got {}", self.dim)));
        }
        if !(self.b >= 1.0) {
            return Err(Error::InvalidArgument(format!("b must be >= 1, got {}", self.b)));
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { dim: 2, b: 1.0 }
    }
}

/// A point of H^n in Minkowski coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacePoint(DVector<f64>);

impl SpacePoint {
    /// The base point `o = (1, 0, ..., 0)`.
    pub fn origin(dim: usize) -> Self {
        let mut v = DVector::zeros(dim + 1);
        v[0] = 1.0;
        SpacePoint(v)
    }

    /// Validating constructor for user-supplied coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: coords.len(),
            });
        }
        let v = DVector::from_vec(coords);
        let residual = (minkowski(&v, &v) + 1.0).abs();
        let scale = v[0] * v[0];
        if !(v[0] > 0.0) || residual > INPUT_TOL * scale.max(1.0) {
            return Err(Error::OffHyperboloid { residual, x0: v[0] });
        }
        Ok(SpacePoint::project(v))
    }

    /// Lift spatial coordinates `(x1..xn)` to the hyperboloid.
    pub fn from_spatial(spatial: &[f64]) -> Self {
        let mut v = DVector::zeros(spatial.len() + 1);
        let mut r2 = 0.0;
        for (i, s) in spatial.iter().enumerate() {
            v[i + 1] = *s;
            r2 += s * s;
        }
        v[0] = (1.0 + r2).sqrt();
        SpacePoint(v)
    }

    /// Point of the Poincare ball model mapped to the hyperboloid.
    pub fn from_poincare(ball: &[f64]) -> Self {
        let r2: f64 = ball.iter().map(|b| b * b).sum();
        let denom = 1.0 - r2;
        let spatial: Vec<f64> = ball.iter().map(|b| 2.0 * b / denom).collect();
        SpacePoint::from_spatial(&spatial)
    }

    /// Point at distance `r` from `o` in the direction of the Euclidean unit
    /// vector `dir`.
    pub fn from_polar(dir: &[f64], r: f64) -> Self {
        let s = r.sinh();
        let spatial: Vec<f64> = dir.iter().map(|d| s * d).collect();
        SpacePoint::from_spatial(&spatial)
    }

    pub fn to_poincare(&self) -> Vec<f64> {
        let d = 1.0 + self.0[0];
        self.0.iter().skip(1).map(|x| x / d).collect()
    }

    /// Re-impose `x0 = sqrt(1 + |x_s|^2)` when the constraint has drifted.
    pub(crate) fn project(v: DVector<f64>) -> Self {
        let residual = (minkowski(&v, &v) + 1.0).abs();
        if residual <= DRIFT_TOL && v[0] > 0.0 {
            return SpacePoint(v);
        }
        let mut v = v;
        let r2: f64 = v.iter().skip(1).map(|x| x * x).sum();
        v[0] = (1.0 + r2).sqrt();
        SpacePoint(v)
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }
}

/// A point of the ideal boundary, as a future null vector with `x0 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryDirection(DVector<f64>);

impl BoundaryDirection {
    /// Accepts any positive multiple of a future null vector.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: coords.len(),
            });
        }
        let v = DVector::from_vec(coords);
        if !(v[0] > 0.0) {
            return Err(Error::NotNull {
                residual: minkowski(&v, &v),
                x0: v[0],
            });
        }
        let x0 = v[0];
        let v = v / x0;
        let residual = minkowski(&v, &v).abs();
        if residual > INPUT_TOL {
            return Err(Error::NotNull { residual, x0: 1.0 });
        }
        Ok(BoundaryDirection::normalize(v))
    }

    /// The boundary point in the direction of a (not necessarily unit)
    /// Euclidean vector, seen from `o`.
    pub fn from_euclidean(dir: &[f64]) -> Self {
        let n: f64 = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        let mut v = DVector::zeros(dir.len() + 1);
        v[0] = 1.0;
        for (i, d) in dir.iter().enumerate() {
            v[i + 1] = d / n;
        }
        BoundaryDirection(v)
    }

    /// Boundary point of H^dim at angle `theta` in the (x1, x2) plane.
    pub fn from_angle(dim: usize, theta: f64) -> Self {
        let mut v = DVector::zeros(dim + 1);
        v[0] = 1.0;
        v[1] = theta.cos();
        v[2] = theta.sin();
        BoundaryDirection(v)
    }

    /// Scale to `x0 = 1` and put the spatial part back on the unit sphere.
    pub(crate) fn normalize(v: DVector<f64>) -> Self {
        let x0 = v[0];
        let mut v = v / x0;
        let r: f64 = v.iter().skip(1).map(|x| x * x).sum::<f64>().sqrt();
        if (r - 1.0).abs() > DRIFT_TOL {
            for i in 1..v.len() {
                v[i] /= r;
            }
        }
        v[0] = 1.0;
        BoundaryDirection(v)
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    /// Euclidean unit vector of the direction as seen from `o`.
    pub fn unit(&self) -> Vec<f64> {
        self.0.iter().skip(1).copied().collect()
    }

    /// Angle in the (x1, x2) plane.
    pub fn angle(&self) -> f64 {
        self.0[2].atan2(self.0[1])
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    /// Euclidean chord length between the two unit directions; zero iff equal.
    pub fn chord(&self, other: &BoundaryDirection) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

/// A unit tangent vector, i.e. an element of the geodesic flow space.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitTangent {
    base: SpacePoint,
    dir: DVector<f64>,
}

impl UnitTangent {
    pub fn new(base: SpacePoint, dir: Vec<f64>) -> Result<Self> {
        let dir = DVector::from_vec(dir);
        if dir.len() != base.0.len() {
            return Err(Error::DimensionMismatch {
                expected: base.0.len(),
                got: dir.len(),
            });
        }
        let orth = minkowski(&base.0, &dir);
        let norm = minkowski(&dir, &dir);
        let scale = base.0[0] * dir.amax();
        if orth.abs() > INPUT_TOL * scale.max(1.0) || (norm - 1.0).abs() > INPUT_TOL * scale.max(1.0).powi(2) {
            return Err(Error::InvalidTangent(format!(
                "<base,dir> = {orth:e}, <dir,dir> - 1 = {:e}",
                norm - 1.0
            )));
        }
        Ok(UnitTangent::project(base, dir))
    }

    /// Unit tangent at `base` from an arbitrary nonzero ambient vector, by
    /// tangent projection and normalization.
    pub fn from_ambient(base: SpacePoint, v: &DVector<f64>) -> Result<Self> {
        let w = tangent_project(&base, v);
        let n = minkowski(&w, &w).max(0.0).sqrt();
        if !(n > 0.0) {
            return Err(Error::InvalidTangent("zero tangent vector".into()));
        }
        Ok(UnitTangent { base, dir: w / n })
    }

    fn project(base: SpacePoint, dir: DVector<f64>) -> Self {
        let orth = minkowski(&base.0, &dir);
        let norm = minkowski(&dir, &dir);
        if orth.abs() <= DRIFT_TOL && (norm - 1.0).abs() <= DRIFT_TOL {
            return UnitTangent { base, dir };
        }
        let w = &dir + &base.0 * orth;
        let n = minkowski(&w, &w).sqrt();
        UnitTangent { base, dir: w / n }
    }

    pub fn base(&self) -> &SpacePoint {
        &self.base
    }

    pub fn dir(&self) -> &DVector<f64> {
        &self.dir
    }
}

pub fn dist(x: &SpacePoint, y: &SpacePoint) -> f64 {
    let c = -minkowski(&x.0, &y.0);
    if c > 2.0 {
        c.acosh()
    } else {
        // chord form keeps precision near the diagonal
        2.0 * (minkowski_diff_sq(&x.0, &y.0).max(0.0).sqrt() / 2.0).asinh()
    }
}

/// `cosh d(x, y)`.
pub fn cosh_dist(x: &SpacePoint, y: &SpacePoint) -> f64 {
    (-minkowski(&x.0, &y.0)).max(1.0)
}

/// `gamma(t) = cosh(t) base + sinh(t) dir`.
pub fn geodesic_point(u: &UnitTangent, t: f64) -> SpacePoint {
    SpacePoint::project(&u.base.0 * t.cosh() + &u.dir * t.sinh())
}

/// The unit tangent at `x` pointing at `xi` (the map `q_x`).
pub fn direction_to(x: &SpacePoint, xi: &BoundaryDirection) -> UnitTangent {
    let a = -minkowski(&x.0, &xi.0);
    let dir = &xi.0 / a - &x.0;
    UnitTangent::project(x.clone(), dir)
}

/// Forward endpoint `gamma(+inf)`.
pub fn boundary_endpoint(u: &UnitTangent) -> BoundaryDirection {
    BoundaryDirection::normalize(&u.base.0 + &u.dir)
}

/// Backward endpoint `gamma(-inf)`.
pub fn backward_endpoint(u: &UnitTangent) -> BoundaryDirection {
    BoundaryDirection::normalize(&u.base.0 - &u.dir)
}

/// `-<x, xi>` for a normalized boundary point; always positive.
pub fn horo_height(x: &SpacePoint, xi: &BoundaryDirection) -> f64 {
    -minkowski(&x.0, &xi.0)
}

/// Busemann function `B(x, y, xi) = lim d(x,a) - d(y,a)` as `a -> xi`.
pub fn busemann(x: &SpacePoint, y: &SpacePoint, xi: &BoundaryDirection) -> f64 {
    horo_height(x, xi).ln() - horo_height(y, xi).ln()
}

/// Gromov product `(xi|eta)_x`; `+inf` when `xi = eta`.
pub fn gromov_product(x: &SpacePoint, xi: &BoundaryDirection, eta: &BoundaryDirection) -> f64 {
    let rho = visual_metric(x, xi, eta);
    if rho == 0.0 {
        f64::INFINITY
    } else {
        -rho.ln()
    }
}

/// Visual metric `rho_x(xi, eta) = exp(-(xi|eta)_x)`; zero iff `xi = eta`.
pub fn visual_metric(x: &SpacePoint, xi: &BoundaryDirection, eta: &BoundaryDirection) -> f64 {
    // -<xi,eta> = |xi - eta|^2 / 2 for null vectors
    let neg_inner = 0.5 * minkowski_diff_sq(&xi.0, &eta.0).max(0.0);
    if neg_inner == 0.0 {
        return 0.0;
    }
    let rho2 = neg_inner / (2.0 * horo_height(x, xi) * horo_height(x, eta));
    rho2.sqrt().min(1.0)
}

/// Metric cross-ratio `[xi xi' eta eta']`, basepoint independent.
pub fn cross_ratio(
    xi: &BoundaryDirection,
    xi2: &BoundaryDirection,
    eta: &BoundaryDirection,
    eta2: &BoundaryDirection,
) -> Result<f64> {
    let o = SpacePoint::origin(xi.dim());
    cross_ratio_at(&o, xi, xi2, eta, eta2)
}

/// Cross-ratio evaluated with the visual metric at `x`.
pub fn cross_ratio_at(
    x: &SpacePoint,
    xi: &BoundaryDirection,
    xi2: &BoundaryDirection,
    eta: &BoundaryDirection,
    eta2: &BoundaryDirection,
) -> Result<f64> {
    let pts = [xi, xi2, eta, eta2];
    for i in 0..4 {
        for j in (i + 1)..4 {
            if pts[i].chord(pts[j]) < 1e-14 {
                return Err(Error::DegenerateQuadruple);
            }
        }
    }
    let num = visual_metric(x, xi, eta) * visual_metric(x, xi2, eta2);
    let den = visual_metric(x, xi, eta2) * visual_metric(x, xi2, eta);
    Ok(num / den)
}

/// Limit comparison angle in curvature `-k^2`: `sin(theta/2) = rho_x^k`.
pub fn comparison_angle(k: f64, x: &SpacePoint, xi: &BoundaryDirection, eta: &BoundaryDirection) -> f64 {
    let rho = visual_metric(x, xi, eta);
    if rho == 0.0 {
        return 0.0;
    }
    2.0 * rho.powf(k).min(1.0).asin()
}

/// Riemannian angle at `x` between two tangent vectors.
pub fn angle_between(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let na = minkowski(a, a).sqrt();
    let nb = minkowski(b, b).sqrt();
    (minkowski(a, b) / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Geodesic flow `phi_t`.
pub fn geodesic_flow(u: &UnitTangent, t: f64) -> UnitTangent {
    let (c, s) = (t.cosh(), t.sinh());
    let base = SpacePoint::project(&u.base.0 * c + &u.dir * s);
    let dir = &u.base.0 * s + &u.dir * c;
    UnitTangent::project(base, dir)
}

pub fn flip(u: &UnitTangent) -> UnitTangent {
    UnitTangent {
        base: u.base.clone(),
        dir: -&u.dir,
    }
}

/// Antipodal map of the boundary centred at `x`.
pub fn antipode(x: &SpacePoint, xi: &BoundaryDirection) -> BoundaryDirection {
    boundary_endpoint(&flip(&direction_to(x, xi)))
}

/// Orthogonal projection of an ambient vector onto `T_z`.
pub fn tangent_project(z: &SpacePoint, v: &DVector<f64>) -> DVector<f64> {
    v + &z.0 * minkowski(&z.0, v)
}

/// Riemannian norm of a tangent vector.
pub fn tangent_norm(w: &DVector<f64>) -> f64 {
    minkowski(w, w).max(0.0).sqrt()
}

/// Gradient of `z -> B(z, y, eta)`; equals `-(z -> eta)`.
pub fn busemann_gradient(z: &SpacePoint, eta: &BoundaryDirection) -> DVector<f64> {
    -direction_to(z, eta).dir
}

/// Hessian quadratic form of `z -> B(z, y, eta)` on `w`. In curvature -1 it
/// is the squared norm of the part of `w` orthogonal to `z -> eta`.
pub fn busemann_hessian(z: &SpacePoint, eta: &BoundaryDirection, w: &DVector<f64>) -> f64 {
    let v = direction_to(z, eta).dir;
    let ww = minkowski(w, w);
    let wv = minkowski(w, &v);
    (ww - wv * wv).max(0.0)
}

/// Riemannian exponential map at `z`.
pub fn exp_map(z: &SpacePoint, w: &DVector<f64>) -> SpacePoint {
    let n = tangent_norm(w);
    if n == 0.0 {
        return z.clone();
    }
    let sinhc = if n < 1e-8 { 1.0 + n * n / 6.0 } else { n.sinh() / n };
    SpacePoint::project(&z.0 * n.cosh() + w * sinhc)
}

/// Riemannian logarithm at `z`: the tangent vector with `exp_z(log_z y) = y`.
pub fn log_map(z: &SpacePoint, y: &SpacePoint) -> DVector<f64> {
    let d = dist(z, y);
    let u = tangent_project(z, &y.0);
    if d == 0.0 {
        return DVector::zeros(z.0.len());
    }
    let n = tangent_norm(&u);
    if n == 0.0 {
        return DVector::zeros(z.0.len());
    }
    u * (d / n)
}

/// Orthonormal frame of `T_z`: the image of the standard frame at `o` under
/// the pure boost taking `o` to `z`.
pub fn tangent_frame(z: &SpacePoint) -> Vec<DVector<f64>> {
    let n = z.dim();
    let z0 = z.0[0];
    (0..n)
        .map(|i| {
            let zi = z.0[i + 1];
            let mut e = DVector::zeros(n + 1);
            e[0] = zi;
            for j in 0..n {
                e[j + 1] = z.0[j + 1] * zi / (1.0 + z0);
            }
            e[i + 1] += 1.0;
            e
        })
        .collect()
}

/// Coordinates of a tangent vector in [`tangent_frame`].
pub fn frame_coords(frame: &[DVector<f64>], w: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(frame.len(), frame.iter().map(|e| minkowski(e, w)))
}

/// Ambient tangent vector from frame coordinates.
pub fn from_frame(frame: &[DVector<f64>], c: &DVector<f64>) -> DVector<f64> {
    let mut w = DVector::zeros(frame[0].len());
    for (e, ci) in frame.iter().zip(c.iter()) {
        w += e * *ci;
    }
    w
}

/// Unit-speed geodesic from `a` to `b` at arclength `s`. The origin of the
/// parameter is the point where both endpoints have equal horo-height.
pub fn geodesic_between(a: &BoundaryDirection, b: &BoundaryDirection, s: f64) -> UnitTangent {
    let neg_ab = 0.5 * minkowski_diff_sq(&a.0, &b.0);
    let c = (2.0 * neg_ab).sqrt();
    let (em, ep) = ((-s).exp(), s.exp());
    let base = SpacePoint::project((&a.0 * em + &b.0 * ep) / c);
    let dir = (&b.0 * ep - &a.0 * em) / c;
    UnitTangent::project(base, dir)
}
