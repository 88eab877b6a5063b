//! Boundary maps, Moebius metrics and their derivatives, and the geodesic
//! conjugacy induced by a Moebius boundary map.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    antipode, backward_endpoint, boundary_endpoint, busemann, cross_ratio, direction_to, geodesic_between,
    geodesic_point, tangent_frame, visual_metric, BoundaryDirection, SpacePoint, UnitTangent,
};
use crate::lorentz::Lorentz;
use crate::measure::{sphere_directions, uniform_boundary_grid, TangentMeasure};
use crate::solver::{minimize, Exponent, ObjectiveSpec, SolverConfig};

/// Cross-ratio deviation above which a map is not treated as Moebius.
pub const MOEBIUS_GATE: f64 = 1e-6;

/// Circle reparametrization `theta -> theta + sum_k a_k sin(k theta)`,
/// acting on the angle in the (x1, x2) plane.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierWarp {
    coeffs: Vec<f64>,
}

impl FourierWarp {
    /// Requires `sum k |a_k| < 1` so the warp is an orientation-preserving
    /// diffeomorphism of the circle.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let slope: f64 = coeffs.iter().enumerate().map(|(k, a)| (k + 1) as f64 * a.abs()).sum();
        if !(slope < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "warp is not monotone: sum k|a_k| = {slope}"
            )));
        }
        Ok(FourierWarp { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn amplitude(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn forward(&self, theta: f64) -> f64 {
        theta
            + self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, a)| a * ((k + 1) as f64 * theta).sin())
                .sum::<f64>()
    }

    pub fn inverse(&self, target: f64) -> f64 {
        let mut t = target;
        for _ in 0..100 {
            let slope = 1.0
                + self
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, a)| (k + 1) as f64 * a * ((k + 1) as f64 * t).cos())
                    .sum::<f64>();
            let step = (self.forward(t) - target) / slope;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        t
    }

    fn act(&self, xi: &BoundaryDirection, f: impl Fn(f64) -> f64) -> BoundaryDirection {
        let mut v = xi.coords().clone();
        let r = v[1].hypot(v[2]);
        if r == 0.0 {
            return xi.clone();
        }
        let t = f(v[2].atan2(v[1]));
        v[1] = r * t.cos();
        v[2] = r * t.sin();
        BoundaryDirection::normalize(v)
    }
}

/// A homeomorphism of the boundary sphere.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryMap {
    /// Boundary action of an isometry.
    Lorentz(Lorentz),
    /// `base o warp`; not Moebius for a non-trivial warp.
    Perturbed { base: Lorentz, warp: FourierWarp },
}

impl BoundaryMap {
    pub fn identity(dim: usize) -> Self {
        BoundaryMap::Lorentz(Lorentz::identity(dim))
    }

    pub fn dim(&self) -> usize {
        match self {
            BoundaryMap::Lorentz(g) => g.dim(),
            BoundaryMap::Perturbed { base, .. } => base.dim(),
        }
    }

    pub fn apply(&self, xi: &BoundaryDirection) -> BoundaryDirection {
        match self {
            BoundaryMap::Lorentz(g) => g.apply_boundary(xi),
            BoundaryMap::Perturbed { base, warp } => base.apply_boundary(&warp.act(xi, |t| warp.forward(t))),
        }
    }

    pub fn apply_inverse(&self, eta: &BoundaryDirection) -> BoundaryDirection {
        match self {
            BoundaryMap::Lorentz(g) => g.inverse().apply_boundary(eta),
            BoundaryMap::Perturbed { base, warp } => warp.act(&base.inverse().apply_boundary(eta), |t| warp.inverse(t)),
        }
    }

    /// The inverse map; available for the Lorentz variant.
    pub fn inverse(&self) -> Result<BoundaryMap> {
        match self {
            BoundaryMap::Lorentz(g) => Ok(BoundaryMap::Lorentz(g.inverse())),
            BoundaryMap::Perturbed { .. } => Err(Error::InvalidArgument(
                "inverse is only provided for Lorentz maps".into(),
            )),
        }
    }

    pub fn as_lorentz(&self) -> Option<&Lorentz> {
        match self {
            BoundaryMap::Lorentz(g) => Some(g),
            BoundaryMap::Perturbed { .. } => None,
        }
    }

    /// `h o self o g` for isometries `g`, `h` (Lorentz variant only).
    pub fn conjugated(&self, h: &Lorentz, g: &Lorentz) -> Result<BoundaryMap> {
        match self {
            BoundaryMap::Lorentz(f) => Ok(BoundaryMap::Lorentz(h.compose(f).compose(g))),
            BoundaryMap::Perturbed { .. } => Err(Error::InvalidArgument(
                "conjugation is only provided for Lorentz maps".into(),
            )),
        }
    }

    /// Largest chord error of `f^-1(f(xi))` over `atoms`.
    pub fn round_trip_error(&self, atoms: &[BoundaryDirection]) -> f64 {
        atoms
            .iter()
            .map(|a| self.apply_inverse(&self.apply(a)).chord(a))
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct WarpFile {
    #[serde(rename = "type")]
    kind: String,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    variant: String,
    matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warp: Option<WarpFile>,
}

impl Serialize for BoundaryMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let file = match self {
            BoundaryMap::Lorentz(g) => MapFile {
                variant: "lorentz".into(),
                matrix: g.rows(),
                warp: None,
            },
            BoundaryMap::Perturbed { base, warp } => MapFile {
                variant: "perturbed".into(),
                matrix: base.rows(),
                warp: Some(WarpFile {
                    kind: "fourier".into(),
                    coeffs: warp.coeffs.clone(),
                }),
            },
        };
        file.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoundaryMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = MapFile::deserialize(d)?;
        let base = Lorentz::from_rows(&file.matrix).map_err(D::Error::custom)?;
        match (file.variant.as_str(), file.warp) {
            ("lorentz", None) => Ok(BoundaryMap::Lorentz(base)),
            ("lorentz", Some(_)) => Err(D::Error::custom("lorentz maps take no warp")),
            ("perturbed", Some(w)) => {
                if w.kind != "fourier" {
                    return Err(D::Error::custom(format!("unknown warp type {:?}", w.kind)));
                }
                let warp = FourierWarp::new(w.coeffs).map_err(D::Error::custom)?;
                Ok(BoundaryMap::Perturbed { base, warp })
            }
            ("perturbed", None) => Err(D::Error::custom("perturbed map needs a warp")),
            (other, _) => Err(D::Error::custom(format!("unknown map variant {other:?}"))),
        }
    }
}

/// Deterministic quadruples of well-separated boundary points.
pub fn probe_quadruples(dim: usize) -> Vec<[BoundaryDirection; 4]> {
    let m = 14;
    let pts: Vec<BoundaryDirection> = sphere_directions(m, dim)
        .iter()
        .map(|d| BoundaryDirection::from_euclidean(d))
        .collect();
    let mut out = Vec::new();
    for i in 0..m {
        for (a, b, c) in [(1, 3, 6), (2, 5, 9), (4, 7, 11)] {
            out.push([
                pts[i].clone(),
                pts[(i + a) % m].clone(),
                pts[(i + b) % m].clone(),
                pts[(i + c) % m].clone(),
            ]);
        }
    }
    out
}

/// `max |log CR(f q) - log CR(q)|` over the quadruples.
pub fn cross_ratio_deviation(f: &BoundaryMap, quads: &[[BoundaryDirection; 4]]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for q in quads {
        let before = cross_ratio(&q[0], &q[1], &q[2], &q[3])?;
        let fq: Vec<_> = q.iter().map(|a| f.apply(a)).collect();
        let after = cross_ratio(&fq[0], &fq[1], &fq[2], &fq[3])?;
        worst = worst.max((after.ln() - before.ln()).abs());
    }
    Ok(worst)
}

/// A boundary map that passed the cross-ratio gate.
#[derive(Clone, Debug)]
pub struct MoebiusMap {
    map: BoundaryMap,
    deviation: f64,
}

impl MoebiusMap {
    pub fn new(map: BoundaryMap) -> Result<Self> {
        let deviation = cross_ratio_deviation(&map, &probe_quadruples(map.dim()))?;
        if deviation > MOEBIUS_GATE {
            return Err(Error::NotMoebius { deviation });
        }
        Ok(MoebiusMap { map, deviation })
    }

    pub fn map(&self) -> &BoundaryMap {
        &self.map
    }

    /// Cross-ratio deviation measured on the probe set.
    pub fn deviation(&self) -> f64 {
        self.deviation
    }

    pub fn apply(&self, xi: &BoundaryDirection) -> BoundaryDirection {
        self.map.apply(xi)
    }
}

/// A metric in the Moebius class of the visual metrics.
#[derive(Clone, Debug)]
pub enum MoebiusMetric {
    /// `rho_x`.
    Visual(SpacePoint),
    /// `f_* rho_x`.
    Pushforward { map: BoundaryMap, base: SpacePoint },
}

impl MoebiusMetric {
    pub fn dim(&self) -> usize {
        match self {
            MoebiusMetric::Visual(x) => x.dim(),
            MoebiusMetric::Pushforward { base, .. } => base.dim(),
        }
    }
}

pub fn metric_eval(rho: &MoebiusMetric, xi: &BoundaryDirection, eta: &BoundaryDirection) -> f64 {
    match rho {
        MoebiusMetric::Visual(x) => visual_metric(x, xi, eta),
        MoebiusMetric::Pushforward { map, base } => {
            visual_metric(base, &map.apply_inverse(xi), &map.apply_inverse(eta))
        }
    }
}

fn metric_cross_ratio(rho: &MoebiusMetric, q: &[BoundaryDirection; 4]) -> f64 {
    metric_eval(rho, &q[0], &q[2]) * metric_eval(rho, &q[1], &q[3])
        / (metric_eval(rho, &q[0], &q[3]) * metric_eval(rho, &q[1], &q[2]))
}

/// Largest log cross-ratio discrepancy between two metrics on the probe set;
/// fails when it exceeds [`MOEBIUS_GATE`].
pub fn moebius_gate(rho1: &MoebiusMetric, rho2: &MoebiusMetric) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for q in probe_quadruples(rho1.dim()) {
        let a = metric_cross_ratio(rho1, &q).ln();
        let b = metric_cross_ratio(rho2, &q).ln();
        worst = worst.max((a - b).abs());
    }
    if worst > MOEBIUS_GATE {
        return Err(Error::NotMoebius { deviation: worst });
    }
    Ok(worst)
}

/// Two auxiliary boundary points well separated from `xi` as seen from `x`.
fn auxiliary_points(x: &SpacePoint, xi: &BoundaryDirection) -> (BoundaryDirection, BoundaryDirection) {
    let u = direction_to(x, xi);
    let frame = tangent_frame(x);
    // frame vector least aligned with u, orthogonalized against it
    let (_, e) = frame
        .iter()
        .map(|e| (crate::geometry::minkowski(e, u.dir()).abs(), e))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let w = e - u.dir() * crate::geometry::minkowski(e, u.dir());
    let c = UnitTangent::from_ambient(x.clone(), &w).expect("orthogonalized frame vector");
    (antipode(x, xi), boundary_endpoint(&c))
}

/// `log (drho2/drho1)(xi)` from the mean value identity
/// `rho2(a,b)^2 = D(a) D(b) rho1(a,b)^2` applied to `xi` and two auxiliary points.
fn log_derivative_bootstrap(
    ratio: impl Fn(&BoundaryDirection, &BoundaryDirection) -> f64,
    x: &SpacePoint,
    xi: &BoundaryDirection,
) -> f64 {
    let (b, c) = auxiliary_points(x, xi);
    ratio(xi, &b) + ratio(xi, &c) - ratio(&b, &c)
}

fn log_derivative_unchecked(rho2: &MoebiusMetric, rho1: &MoebiusMetric, xi: &BoundaryDirection) -> f64 {
    if let (MoebiusMetric::Visual(y), MoebiusMetric::Visual(x)) = (rho2, rho1) {
        return busemann(x, y, xi);
    }
    let o = SpacePoint::origin(rho1.dim());
    log_derivative_bootstrap(
        |a, b| metric_eval(rho2, a, b).ln() - metric_eval(rho1, a, b).ln(),
        &o,
        xi,
    )
}

/// Metric derivative `drho2/drho1` at `xi`.
pub fn metric_derivative(rho2: &MoebiusMetric, rho1: &MoebiusMetric, xi: &BoundaryDirection) -> Result<f64> {
    moebius_gate(rho1, rho2)?;
    Ok(log_derivative_unchecked(rho2, rho1, xi).exp())
}

/// `d_M(rho1, rho2) = max_xi log (drho2/drho1)(xi)` over `grid`.
pub fn dm_distance(rho1: &MoebiusMetric, rho2: &MoebiusMetric, grid: &[BoundaryDirection]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid is empty".into()));
    }
    moebius_gate(rho1, rho2)?;
    Ok(grid
        .iter()
        .map(|xi| log_derivative_unchecked(rho2, rho1, xi))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `log df_{rho_x, rho_y}(eta)`, with `f(eta)` given explicitly.
pub fn log_map_derivative(f: &MoebiusMap, x: &SpacePoint, y: &SpacePoint, eta: &BoundaryDirection) -> f64 {
    log_derivative_bootstrap(
        |a, b| visual_metric(y, &f.apply(a), &f.apply(b)).ln() - visual_metric(x, a, b).ln(),
        x,
        eta,
    )
}

/// The geodesic conjugacy `phi_f(u)`: the tangent on the geodesic
/// `(f(xi), f(eta))` at the point `y` where `df_{rho_x, rho_y}(eta) = 1`.
pub fn geodesic_conjugacy(f: &MoebiusMap, u: &UnitTangent) -> Result<UnitTangent> {
    let x = u.base();
    let xi = backward_endpoint(u);
    let eta = boundary_endpoint(u);
    let (fxi, feta) = (f.apply(&xi), f.apply(&eta));
    let aux = auxiliary_points(x, &eta);
    let fb = f.apply(&aux.0);
    let fc = f.apply(&aux.1);
    let base_b = visual_metric(x, &eta, &aux.0).ln();
    let base_c = visual_metric(x, &eta, &aux.1).ln();
    let base_bc = visual_metric(x, &aux.0, &aux.1).ln();
    let h = |s: f64| {
        let y = geodesic_between(&fxi, &feta, s);
        let y = y.base();
        (visual_metric(y, &feta, &fb).ln() - base_b) + (visual_metric(y, &feta, &fc).ln() - base_c)
            - (visual_metric(y, &fb, &fc).ln() - base_bc)
    };

    let (mut lo, mut hi) = (-1.0, 1.0);
    let (mut f_lo, mut f_hi) = (h(lo), h(hi));
    let mut expansions = 0;
    while f_lo * f_hi > 0.0 {
        if expansions >= 60 || !f_lo.is_finite() || !f_hi.is_finite() {
            return Err(Error::RootFind {
                lo,
                hi,
                f_lo,
                f_hi,
                expansions,
            });
        }
        lo *= 2.0;
        hi *= 2.0;
        f_lo = h(lo);
        f_hi = h(hi);
        expansions += 1;
    }
    // Illinois-safeguarded regula falsi
    let mut side = 0;
    let mut s = 0.0;
    for _ in 0..200 {
        s = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        let fs = h(s);
        if fs.abs() <= 1e-15 || (hi - lo).abs() <= 1e-15 * (1.0 + s.abs()) {
            break;
        }
        if fs * f_hi > 0.0 {
            hi = s;
            f_hi = fs;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = s;
            f_lo = fs;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        }
    }
    if !s.is_finite() {
        return Err(Error::RootFind {
            lo,
            hi,
            f_lo,
            f_hi,
            expansions,
        });
    }
    Ok(geodesic_between(&fxi, &feta, s))
}

/// Minimizer of `z -> d_M(f_* rho_x, rho_z)` with the sup taken over the
/// images of an `n`-point grid at `x`.
///
/// The log derivatives are computed once at a reference point `z0` and
/// transported with `d rho_z0 / d rho_z (zeta) = exp B(z, z0, zeta)`; the
/// resulting minimax problem is an asymptotic circumcenter problem.
pub fn nearest_visual_projection(rho: &MoebiusMetric, n: usize, cfg: &SolverConfig) -> Result<SpacePoint> {
    let (map, x) = match rho {
        MoebiusMetric::Visual(x) => (BoundaryMap::identity(x.dim()), x.clone()),
        MoebiusMetric::Pushforward { map, base } => (map.clone(), base.clone()),
    };
    let grid = uniform_boundary_grid(n, &x)?;
    let z0 = SpacePoint::origin(x.dim());
    let atoms: Vec<UnitTangent> = grid
        .atoms()
        .iter()
        .map(|xi| {
            let c = log_derivative_bootstrap(
                |a, b| visual_metric(&x, a, b).ln() - visual_metric(&z0, &map.apply(a), &map.apply(b)).ln(),
                &x,
                xi,
            );
            let zeta = map.apply(xi);
            let base = geodesic_point(&direction_to(&z0, &zeta), c);
            direction_to(&base, &zeta)
        })
        .collect();
    let nu = TangentMeasure::uniform(atoms)?;
    let spec = ObjectiveSpec::busemann(nu, Exponent::Infinite)?;
    minimize(&spec, cfg).into_point()
}

/// Rotation by `2 pi k / n` about `o` in the (x1, x2) plane.
pub fn grid_rotation(dim: usize, k: usize, n: usize) -> Lorentz {
    Lorentz::rotation(dim, 1, 2, 2.0 * PI * k as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dist, flip, geodesic_flow};
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_lorentz(seed: u64, dim: usize) -> Lorentz {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Lorentz::random(&mut rng, dim, 2.0)
    }

    #[test]
    fn warp_round_trip() {
        let w = FourierWarp::new(vec![0.1, -0.05, 0.02]).unwrap();
        for k in 0..50 {
            let t = -3.0 + 0.12 * k as f64;
            assert!((w.inverse(w.forward(t)) - t).abs() < 1e-13);
        }
        assert!(FourierWarp::new(vec![0.6, 0.3]).is_err());
        let f = BoundaryMap::Perturbed {
            base: random_lorentz(1, 3),
            warp: w,
        };
        let atoms = uniform_boundary_grid(40, &SpacePoint::origin(3)).unwrap();
        assert!(f.round_trip_error(atoms.atoms()) < 1e-9);
    }

    #[test]
    fn json_round_trip() {
        let f = BoundaryMap::Perturbed {
            base: Lorentz::rotation(2, 1, 2, 0.3),
            warp: FourierWarp::new(vec![0.1]).unwrap(),
        };
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"variant\":\"perturbed\""));
        let back: BoundaryMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        let id: BoundaryMap =
            serde_json::from_str(r#"{"variant":"lorentz","matrix":[[1,0,0],[0,1,0],[0,0,1]]}"#).unwrap();
        assert_eq!(id, BoundaryMap::identity(2));
        let bad = serde_json::from_str::<BoundaryMap>(r#"{"variant":"lorentz","matrix":[[1,1,0],[0,1,0],[0,0,1]]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn cross_ratio_gate() {
        let quads = probe_quadruples(2);
        assert_eq!(cross_ratio_deviation(&BoundaryMap::identity(2), &quads).unwrap(), 0.0);
        for seed in 0..10 {
            let g = BoundaryMap::Lorentz(random_lorentz(seed, 2));
            assert!(cross_ratio_deviation(&g, &quads).unwrap() < 1e-9);
            assert!(MoebiusMap::new(g).is_ok());
        }
        let f = BoundaryMap::Perturbed {
            base: random_lorentz(3, 2),
            warp: FourierWarp::new(vec![0.1]).unwrap(),
        };
        let dev = cross_ratio_deviation(&f, &quads).unwrap();
        assert!(dev > 1e-3, "{dev}");
        assert!(matches!(MoebiusMap::new(f), Err(Error::NotMoebius { .. })));
    }

    #[test]
    fn metrics() {
        let o = SpacePoint::origin(2);
        let a = BoundaryDirection::from_angle(2, 0.0);
        let b = BoundaryDirection::from_angle(2, PI);
        assert!((metric_eval(&MoebiusMetric::Visual(o.clone()), &a, &b) - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_lorentz(5, 2);
        let x = sample::point_in_ball(&mut rng, 2, 2.0);
        let push = MoebiusMetric::Pushforward {
            map: BoundaryMap::Lorentz(g.clone()),
            base: x.clone(),
        };
        let vis = MoebiusMetric::Visual(g.apply_point(&x));
        for _ in 0..50 {
            let xi = sample::boundary_point(&mut rng, 2);
            let eta = sample::boundary_point(&mut rng, 2);
            assert!((metric_eval(&push, &xi, &eta) - metric_eval(&vis, &xi, &eta)).abs() < 1e-10);
        }
    }

    #[test]
    fn derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = sample::point_in_ball(&mut rng, 2, 2.0);
        let y = sample::point_in_ball(&mut rng, 2, 2.0);
        let z = sample::point_in_ball(&mut rng, 2, 2.0);
        let (rx, ry, rz) = (
            MoebiusMetric::Visual(x.clone()),
            MoebiusMetric::Visual(y.clone()),
            MoebiusMetric::Visual(z.clone()),
        );
        let g = random_lorentz(7, 2);
        let push = MoebiusMetric::Pushforward {
            map: BoundaryMap::Lorentz(g.clone()),
            base: x.clone(),
        };
        for _ in 0..30 {
            let xi = sample::boundary_point(&mut rng, 2);
            let eta = sample::boundary_point(&mut rng, 2);
            assert!((metric_derivative(&rx, &rx, &xi).unwrap() - 1.0).abs() < 1e-12);
            let d = metric_derivative(&ry, &rx, &xi).unwrap();
            assert!((d - busemann(&x, &y, &xi).exp()).abs() < 1e-12);
            // bootstrap route agrees with the closed form
            let boot = metric_derivative(&ry, &push, &xi).unwrap();
            let closed = busemann(&g.apply_point(&x), &y, &xi).exp();
            assert!((boot / closed - 1.0).abs() < 1e-9);
            // mean value identity
            let lhs = metric_eval(&ry, &xi, &eta).powi(2);
            let rhs = boot * metric_derivative(&ry, &push, &eta).unwrap() * metric_eval(&push, &xi, &eta).powi(2);
            assert!((lhs - rhs).abs() < 1e-9);
            // chain rule
            let d31 = metric_derivative(&rz, &rx, &xi).unwrap();
            let d32 = metric_derivative(&rz, &ry, &xi).unwrap();
            let d21 = metric_derivative(&ry, &rx, &xi).unwrap();
            assert!((d31 - d32 * d21).abs() < 1e-8 * d31);
        }
    }

    #[test]
    fn max_min_product_is_one() {
        let x = SpacePoint::origin(2);
        let grid = uniform_boundary_grid(360, &x).unwrap();
        let y = geodesic_point(&direction_to(&x, &grid.atoms()[17]), 1.7);
        let (rx, ry) = (MoebiusMetric::Visual(x), MoebiusMetric::Visual(y));
        let vals: Vec<f64> = grid
            .atoms()
            .iter()
            .map(|xi| metric_derivative(&ry, &rx, xi).unwrap())
            .collect();
        let max = vals.iter().copied().fold(f64::MIN, f64::max);
        let min = vals.iter().copied().fold(f64::MAX, f64::min);
        assert!((max * min - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dm_matches_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let grid = uniform_boundary_grid(10_000, &SpacePoint::origin(2)).unwrap();
        for _ in 0..5 {
            let x = sample::point_in_ball(&mut rng, 2, 2.0);
            let y = sample::point_in_ball(&mut rng, 2, 2.0);
            let (rx, ry) = (MoebiusMetric::Visual(x.clone()), MoebiusMetric::Visual(y.clone()));
            let d = dm_distance(&rx, &ry, grid.atoms()).unwrap();
            assert!((d - dist(&x, &y)).abs() < 1e-4);
            assert!(d <= dist(&x, &y) + 1e-12);
            assert_eq!(dm_distance(&rx, &rx, grid.atoms()).unwrap(), 0.0);
        }
    }

    #[test]
    fn conjugacy_of_isometry_is_its_differential() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for dim in [2, 3] {
            for seed in 0..10 {
                let g = random_lorentz(100 + seed, dim);
                let f = MoebiusMap::new(BoundaryMap::Lorentz(g.clone())).unwrap();
                let u = sample::unit_tangent(&mut rng, dim, 2.0);
                let phi = geodesic_conjugacy(&f, &u).unwrap();
                let want = g.apply_tangent(&u);
                assert!(dist(phi.base(), want.base()) < 1e-9);
                assert!((phi.dir() - want.dir()).amax() < 1e-8);
                // derivative condition at the footpoint
                let eta = boundary_endpoint(&u);
                assert!(log_map_derivative(&f, u.base(), phi.base(), &eta).abs() < 1e-8);
                // flip and flow equivariance
                let back = geodesic_conjugacy(&f, &flip(&u)).unwrap();
                assert!(dist(back.base(), phi.base()) < 1e-8);
                let moved = geodesic_conjugacy(&f, &geodesic_flow(&u, 0.7)).unwrap();
                assert!(dist(moved.base(), geodesic_flow(&phi, 0.7).base()) < 1e-8);
            }
        }
        let id = MoebiusMap::new(BoundaryMap::identity(2)).unwrap();
        let u = sample::unit_tangent(&mut rng, 2, 1.0);
        let phi = geodesic_conjugacy(&id, &u).unwrap();
        assert!(dist(phi.base(), u.base()) < 1e-10);
    }

    #[test]
    fn nearest_visual_projection_is_natural() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = sample::point_in_ball(&mut rng, 2, 1.5);
        let cfg = SolverConfig::default();
        let z = nearest_visual_projection(&MoebiusMetric::Visual(x.clone()), 90, &cfg).unwrap();
        assert!(dist(&z, &x) < 1e-8);
        let g = random_lorentz(12, 2);
        let rho = MoebiusMetric::Pushforward {
            map: BoundaryMap::Lorentz(g.clone()),
            base: x.clone(),
        };
        let z = nearest_visual_projection(&rho, 90, &cfg).unwrap();
        assert!(dist(&z, &g.apply_point(&x)) < 1e-8);
    }
}
