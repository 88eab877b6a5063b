//! Barycentric extensions of a Moebius boundary map: the p-barycenter
//! extensions `F_p`, the circumcenter extension `F`, the reweighted measures
//! `mu^x_p`, and numerical audits of their properties.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{
    busemann, busemann_hessian, cosh_dist, direction_to, dist, exp_map, frame_coords, from_frame, log_map, minkowski,
    tangent_frame, tangent_norm, BoundaryDirection, ModelConfig, SpacePoint,
};
use crate::hull::{self, HullCertificate};
use crate::measure::{pushforward_qx, BoundaryMeasure, TangentMeasure};
use crate::moebius::{geodesic_conjugacy, BoundaryMap, MoebiusMap};
use crate::solver::{minimize, Exponent, ObjectiveSpec, SolverConfig, SolverResult};

pub use crate::measure::balance_residual;

/// Default tolerance for the origin-in-hull test.
pub const HULL_TOL: f64 = 1e-9;

/// A Moebius map together with the fixed boundary measure used to build the
/// extensions.
#[derive(Clone, Debug)]
pub struct ExtensionContext {
    f: MoebiusMap,
    base_measure: BoundaryMeasure,
    model: ModelConfig,
    solver: SolverConfig,
}

impl ExtensionContext {
    /// Fails with `NotMoebius` when `f` does not pass the cross-ratio gate.
    pub fn new(
        f: BoundaryMap,
        base_measure: BoundaryMeasure,
        model: ModelConfig,
        solver: SolverConfig,
    ) -> Result<Self> {
        model.validate()?;
        solver.validate()?;
        if f.dim() != model.dim {
            return Err(Error::DimensionMismatch {
                expected: model.dim,
                got: f.dim(),
            });
        }
        if let Some(a) = base_measure.atoms().iter().find(|a| a.dim() != model.dim) {
            return Err(Error::DimensionMismatch {
                expected: model.dim,
                got: a.dim(),
            });
        }
        let f = MoebiusMap::new(f)?;
        let images = base_measure.map(|a| f.apply(a));
        if images.distinct_count(1e-12) < 2 {
            return Err(Error::InvalidMeasure(
                "base measure needs at least two atoms with distinct images".into(),
            ));
        }
        Ok(ExtensionContext {
            f,
            base_measure,
            model,
            solver,
        })
    }

    pub fn map(&self) -> &MoebiusMap {
        &self.f
    }

    pub fn base_measure(&self) -> &BoundaryMeasure {
        &self.base_measure
    }

    pub fn model(&self) -> &ModelConfig {
        &self.model
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    /// The same measure and settings with a different boundary map.
    pub fn with_map(&self, f: BoundaryMap) -> Result<Self> {
        ExtensionContext::new(f, self.base_measure.clone(), self.model, self.solver.clone())
    }

    /// Everything about the fiber over `x` that does not depend on `p`.
    pub fn fiber(&self, x: &SpacePoint) -> Result<Fiber> {
        let tangents = pushforward_qx(&self.base_measure, x);
        let conj = tangents.try_map(|u| geodesic_conjugacy(&self.f, u))?;
        let images = self.base_measure.atoms().iter().map(|a| self.f.apply(a)).collect();
        Ok(Fiber {
            x: x.clone(),
            conj,
            images,
            source: tangents,
        })
    }
}

/// `phi_* mu_x` and the data attached to it.
#[derive(Clone, Debug)]
pub struct Fiber {
    x: SpacePoint,
    /// `q_x` applied to the base atoms.
    source: TangentMeasure,
    /// `phi o q_x` applied to the base atoms.
    conj: TangentMeasure,
    /// `f(xi_i)`.
    images: Vec<BoundaryDirection>,
}

impl Fiber {
    pub fn point(&self) -> &SpacePoint {
        &self.x
    }

    pub fn conjugated(&self) -> &TangentMeasure {
        &self.conj
    }

    pub fn images(&self) -> &[BoundaryDirection] {
        &self.images
    }

    /// Unit directions `x -> xi_i`.
    pub fn source_directions(&self) -> Vec<DVector<f64>> {
        self.source.atoms().iter().map(|u| u.dir().clone()).collect()
    }

    /// `log d(f_* rho_x)/d rho_z (f(xi_i))` for every atom.
    pub fn conformal_weights(&self, z: &SpacePoint) -> Vec<f64> {
        self.conj
            .atoms()
            .iter()
            .zip(&self.images)
            .map(|(u, eta)| busemann(z, u.base(), eta))
            .collect()
    }

    /// Distance from the origin to the hull of the source directions; zero
    /// when the base atoms surround `x`.
    pub fn coverage_gap(&self) -> f64 {
        hull::min_norm_point(&self.source_directions()).point.norm()
    }

    pub fn solve(&self, p: Exponent, cfg: &SolverConfig) -> Result<SolverResult> {
        let spec = ObjectiveSpec::busemann(self.conj.clone(), p)?;
        Ok(minimize(&spec, cfg))
    }

    /// `mu^x_p` weights evaluated at `z`, and `log c_{x,p}`.
    pub fn reweight(&self, z: &SpacePoint, p: f64) -> (Vec<f64>, f64) {
        let e: Vec<f64> = self
            .conj
            .weights()
            .iter()
            .zip(self.conformal_weights(z))
            .map(|(w, c)| w.ln() + p * c)
            .collect();
        let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: Vec<f64> = e.iter().map(|v| (v - m).exp()).collect();
        let total: f64 = s.iter().sum();
        (s.into_iter().map(|v| v / total).collect(), m + total.ln())
    }
}

/// `log d(f_* rho_x)/d rho_z (f(xi))`, computed through the conjugacy
/// footpoint of `x -> xi`.
pub fn conformal_weight(ctx: &ExtensionContext, x: &SpacePoint, z: &SpacePoint, xi: &BoundaryDirection) -> Result<f64> {
    let u = geodesic_conjugacy(&ctx.f, &direction_to(x, xi))?;
    Ok(busemann(z, u.base(), &ctx.f.apply(xi)))
}

/// Runs the extension solve and turns non-convergence into an error.
fn solved(fiber: &Fiber, p: Exponent, cfg: &SolverConfig) -> Result<SpacePoint> {
    fiber.solve(p, cfg)?.into_point()
}

/// `F_p(x)`.
pub fn p_extension(ctx: &ExtensionContext, x: &SpacePoint, p: f64) -> Result<SpacePoint> {
    solved(&ctx.fiber(x)?, Exponent::Finite(p), &ctx.solver)
}

/// `F(x)`.
///
/// Fails with [`Error::Undersampled`] when the base atoms, seen from `x`, lie
/// in an open half-space: the circumcenter then depends on the grid rather
/// than on the map.
pub fn circumcenter_extension(ctx: &ExtensionContext, x: &SpacePoint) -> Result<SpacePoint> {
    let fiber = ctx.fiber(x)?;
    let gap = fiber.coverage_gap();
    if gap > 1e-9 {
        return Err(Error::Undersampled { gap });
    }
    solved(&fiber, Exponent::Infinite, &ctx.solver)
}

#[derive(Clone, Debug)]
pub struct BalanceReport {
    pub point: SpacePoint,
    /// `|sum w_i (point -> f(xi_i))|`.
    pub residual: f64,
    /// `log c_{x,p}`.
    pub normalizer: f64,
}

/// `mu^x_p` together with the balance of `f_* mu^x_p` at `F_p(x)`.
pub fn mu_x_p(ctx: &ExtensionContext, x: &SpacePoint, p: f64) -> Result<(BoundaryMeasure, BalanceReport)> {
    let fiber = ctx.fiber(x)?;
    let z = solved(&fiber, Exponent::Finite(p), &ctx.solver)?;
    mu_x_p_at(ctx, &fiber, &z, p)
}

fn mu_x_p_at(
    ctx: &ExtensionContext,
    fiber: &Fiber,
    z: &SpacePoint,
    p: f64,
) -> Result<(BoundaryMeasure, BalanceReport)> {
    let (weights, normalizer) = fiber.reweight(z, p);
    let pushed = BoundaryMeasure::normalized(fiber.images.clone(), weights.clone())?;
    let residual = balance_residual(&pushed, z);
    let mu = BoundaryMeasure::normalized(ctx.base_measure.atoms().to_vec(), weights)?;
    Ok((
        mu,
        BalanceReport {
            point: z.clone(),
            residual,
            normalizer,
        },
    ))
}

/// Atoms whose conformal weight at `candidate` is within `epsilon` of the max.
#[derive(Clone, Debug)]
pub struct ArgmaxSet {
    pub center: SpacePoint,
    pub candidate: SpacePoint,
    pub epsilon: f64,
    /// Indices into the base measure.
    pub members: Vec<usize>,
    pub max: f64,
    /// Unit tangents `candidate -> f(xi)` of the members.
    pub directions: Vec<DVector<f64>>,
}

pub fn argmax_set(ctx: &ExtensionContext, x: &SpacePoint, y: &SpacePoint, epsilon: f64) -> Result<ArgmaxSet> {
    argmax_set_in(&ctx.fiber(x)?, y, epsilon)
}

pub fn argmax_set_in(fiber: &Fiber, y: &SpacePoint, epsilon: f64) -> Result<ArgmaxSet> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let vals = fiber.conformal_weights(y);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let members: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] >= max - epsilon).collect();
    let directions = members
        .iter()
        .map(|&i| direction_to(y, &fiber.images[i]).dir().clone())
        .collect();
    Ok(ArgmaxSet {
        center: fiber.x.clone(),
        candidate: y.clone(),
        epsilon,
        members,
        max,
        directions,
    })
}

/// Whether the origin of `T_y` lies in the convex hull of the member
/// directions. A separator is returned as an ambient tangent vector at `y`.
pub fn hull_certificate(aset: &ArgmaxSet, tol: f64) -> HullCertificate {
    let frame = tangent_frame(&aset.candidate);
    let pts: Vec<DVector<f64>> = aset.directions.iter().map(|d| frame_coords(&frame, d)).collect();
    match hull::hull_certificate(&pts, tol) {
        HullCertificate::Infeasible { separator, margin } => HullCertificate::Infeasible {
            separator: from_frame(&frame, &separator),
            margin,
        },
        feasible => feasible,
    }
}

/// Finite-difference scheme for `DF_p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdScheme {
    Central,
    Forward,
}

#[derive(Clone, Debug)]
pub struct DerivativeCheck {
    /// `|LHS - RHS| / (1 + |RHS|)`.
    pub residual: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `DF_p(v)` as an ambient tangent vector at `F_p(x)`.
    pub dfv: DVector<f64>,
    /// `(1/p) sum w |DF_p(v)^perp|^2` and `sum w <v, x -> xi>^2`.
    pub projection_bound: (f64, f64),
}

/// Both sides of the implicit derivative identity of `F_p` along the unit
/// tangent `v` at `x`, with `DF_p(v)` from finite differences of step `h`.
pub fn derivative_identity_residual(
    ctx: &ExtensionContext,
    x: &SpacePoint,
    v: &DVector<f64>,
    p: f64,
    h: f64,
    scheme: FdScheme,
) -> Result<DerivativeCheck> {
    if !(1e-6..=1e-1).contains(&h) {
        return Err(Error::InvalidArgument(format!("step {h} out of range")));
    }
    let fiber = ctx.fiber(x)?;
    let cfg = SolverConfig {
        grad_tol: 1e-13,
        ..ctx.solver.clone()
    };
    let y = solved(&fiber, Exponent::Finite(p), &cfg)?;
    let warm = cfg.with_initial(y.clone());
    let at = |t: f64| -> Result<DVector<f64>> {
        let xt = exp_map(x, &(v * t));
        let zt = solved(&ctx.fiber(&xt)?, Exponent::Finite(p), &warm)?;
        Ok(log_map(&y, &zt))
    };
    let dfv = match scheme {
        FdScheme::Central => (at(h)? - at(-h)?) / (2.0 * h),
        FdScheme::Forward => at(h)? / h,
    };
    let (w, _) = fiber.reweight(&y, p);
    let src = fiber.source_directions();
    let (mut hess, mut quad, mut cross, mut perp, mut vsq) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((wi, eta), b) in w.iter().zip(&fiber.images).zip(&src) {
        let a = direction_to(&y, eta);
        let da = minkowski(&dfv, a.dir());
        let vb = minkowski(v, b);
        let d2 = busemann_hessian(&y, eta, &dfv);
        hess += wi * d2;
        quad += wi * da * da;
        cross += wi * da * vb;
        perp += wi * d2;
        vsq += wi * vb * vb;
    }
    let lhs = hess + p * quad;
    let rhs = p * cross;
    Ok(DerivativeCheck {
        residual: (lhs - rhs).abs() / (1.0 + rhs.abs()),
        lhs,
        rhs,
        dfv,
        projection_bound: (perp / p, vsq),
    })
}

#[derive(Clone, Debug)]
pub struct MainInequalityRow {
    pub distance: f64,
    /// `cosh d(F_p x, F_p y)` and `sum w exp B(F_p y, F_p x, f xi)`.
    pub upper: (f64, f64),
    /// `cosh(b d)` and `sum w exp(b B)`.
    pub lower: (f64, f64),
    /// Largest amount by which either inequality fails (0 when both hold).
    pub violation: f64,
}

/// Both main inequalities for each pair at the model's `b`.
pub fn main_inequality_audit(
    ctx: &ExtensionContext,
    pairs: &[(SpacePoint, SpacePoint)],
    p: f64,
) -> Result<Vec<MainInequalityRow>> {
    let b = ctx.model.b;
    let cfg = SolverConfig {
        grad_tol: 1e-13,
        ..ctx.solver.clone()
    };
    pairs
        .iter()
        .map(|(x, y)| {
            let fx_fiber = ctx.fiber(x)?;
            let fx = solved(&fx_fiber, Exponent::Finite(p), &cfg)?;
            let fy = solved(&ctx.fiber(y)?, Exponent::Finite(p), &cfg)?;
            let (w, _) = fx_fiber.reweight(&fx, p);
            let d = dist(&fx, &fy);
            let (mut up, mut low) = (0.0, 0.0);
            for (wi, eta) in w.iter().zip(&fx_fiber.images) {
                let bb = busemann(&fy, &fx, eta);
                up += wi * bb.exp();
                low += wi * (b * bb).exp();
            }
            let upper = (cosh_dist(&fx, &fy), up);
            let lower = ((b * d).cosh(), low);
            let violation = (upper.0 - upper.1).max(lower.1 - lower.0).max(0.0);
            Ok(MainInequalityRow {
                distance: d,
                upper,
                lower,
                violation,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct LipschitzRow {
    pub distance: f64,
    pub image_distance: f64,
    /// `cosh^b d(F x, F y) / cosh(b d(x, y))`.
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct LipschitzReport {
    pub rows: Vec<LipschitzRow>,
    pub max_ratio: f64,
    /// `max |d(F x, F y) - d(x, y)|`.
    pub max_isometry_error: f64,
}

pub fn lipschitz_audit(ctx: &ExtensionContext, pairs: &[(SpacePoint, SpacePoint)]) -> Result<LipschitzReport> {
    let b = ctx.model.b;
    let rows = pairs
        .iter()
        .map(|(x, y)| {
            let fx = circumcenter_extension(ctx, x)?;
            let fy = circumcenter_extension(ctx, y)?;
            let d = dist(x, y);
            let e = dist(&fx, &fy);
            Ok(LipschitzRow {
                distance: d,
                image_distance: e,
                ratio: e.cosh().powf(b) / (b * d).cosh(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let max_isometry_error = rows
        .iter()
        .map(|r| (r.image_distance - r.distance).abs())
        .fold(0.0, f64::max);
    Ok(LipschitzReport {
        rows,
        max_ratio,
        max_isometry_error,
    })
}

/// `max dist(G(F(x)), x)` where `G` extends the inverse map.
pub fn inverse_consistency(ctx_f: &ExtensionContext, ctx_g: &ExtensionContext, samples: &[SpacePoint]) -> Result<f64> {
    samples.iter().try_fold(0.0f64, |m, x| {
        let fx = circumcenter_extension(ctx_f, x)?;
        let gfx = circumcenter_extension(ctx_g, &fx)?;
        Ok(m.max(dist(&gfx, x)))
    })
}

/// `dist(F'(x), H(F(G x)))` where `F'` extends `h o f o g`.
pub fn naturality_defect(
    ctx: &ExtensionContext,
    g: &crate::lorentz::Lorentz,
    h: &crate::lorentz::Lorentz,
    x: &SpacePoint,
) -> Result<f64> {
    let conj = ctx.with_map(ctx.f.map().conjugated(h, g)?)?;
    let lhs = circumcenter_extension(&conj, x)?;
    let rhs = h.apply_point(&circumcenter_extension(ctx, &g.apply_point(x))?);
    Ok(dist(&lhs, &rhs))
}

/// `max_v |sum w <v, x -> xi>|` over unit probes `v` with `mu^x_p` weights,
/// and the bound `sqrt(2 b^2 / p)`.
pub fn antipodal_balance(
    ctx: &ExtensionContext,
    x: &SpacePoint,
    p: f64,
    probes: &[DVector<f64>],
) -> Result<(f64, f64)> {
    let (mu, _) = mu_x_p(ctx, x, p)?;
    let mut worst: f64 = 0.0;
    for v in probes {
        let n = tangent_norm(v);
        let s: f64 = mu
            .iter()
            .map(|(xi, w)| w * minkowski(v, direction_to(x, xi).dir()) / n)
            .sum();
        worst = worst.max(s.abs());
    }
    let b = ctx.model.b;
    Ok((worst, (2.0 * b * b / p).sqrt()))
}
