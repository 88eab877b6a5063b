//! Minimizers of the cosh-distance and exp-Busemann objectives: hyperbolic
//! p-barycenters, circumcenters, asymptotic p-barycenters and asymptotic
//! circumcenters.
//!
//! Every atom contributes `l_i(z) = log(-<z, A_i>) - c_i` where `A_i` is a
//! point of H^n (cosh mode, `c_i = 0`) or a null vector (Busemann mode,
//! `c_i = log(-<base_i, A_i>)`). In both cases the Riemannian gradient is
//! `g_i = z - A_i / (-<z, A_i>)` and the Hessian is `I - g_i g_i^T`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    boundary_endpoint, exp_map, frame_coords, from_frame, horo_height, minkowski, tangent_frame, SpacePoint,
};
use crate::hull::{min_norm_point, simplex_qp};
use crate::measure::{endpoints, SpaceMeasure, TangentMeasure};

/// Atoms within this gap of the maximum count as active at `p = inf`.
pub const ACTIVE_EPS: f64 = 1e-6;

/// Exponents used by the `p = inf` continuation.
pub fn continuation_schedule() -> Vec<f64> {
    (1..=14).map(|k| 2f64.powi(k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    pub fn value(&self) -> f64 {
        match self {
            Exponent::Finite(p) => *p,
            Exponent::Infinite => f64::INFINITY,
        }
    }
}

impl From<f64> for Exponent {
    fn from(p: f64) -> Self {
        if p.is_infinite() {
            Exponent::Infinite
        } else {
            Exponent::Finite(p)
        }
    }
}

#[derive(Clone, Debug)]
pub enum ObjectiveData {
    /// `z -> cosh d(z, y_i)` over a space measure.
    CoshDistance(SpaceMeasure),
    /// `z -> exp B(z, pi(u_i), u_i(+inf))` over a tangent measure.
    ExpBusemann(TangentMeasure),
}

#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    exponent: Exponent,
    data: ObjectiveData,
    proper: bool,
}

impl ObjectiveSpec {
    pub fn new(exponent: Exponent, data: ObjectiveData) -> Result<Self> {
        if let Exponent::Finite(p) = exponent {
            if !(p >= 1.0) || !p.is_finite() {
                return Err(Error::InvalidArgument(format!("exponent must be >= 1, got {p}")));
            }
        }
        let proper = match &data {
            ObjectiveData::CoshDistance(_) => true,
            ObjectiveData::ExpBusemann(nu) => endpoints(nu).distinct_count(1e-12) >= 2,
        };
        if !proper && exponent.is_infinite() {
            return Err(Error::SingletonEndpoints);
        }
        Ok(ObjectiveSpec { exponent, data, proper })
    }

    pub fn cosh(mu: SpaceMeasure, exponent: impl Into<Exponent>) -> Result<Self> {
        ObjectiveSpec::new(exponent.into(), ObjectiveData::CoshDistance(mu))
    }

    pub fn busemann(nu: TangentMeasure, exponent: impl Into<Exponent>) -> Result<Self> {
        ObjectiveSpec::new(exponent.into(), ObjectiveData::ExpBusemann(nu))
    }

    pub fn exponent(&self) -> Exponent {
        self.exponent
    }

    pub fn data(&self) -> &ObjectiveData {
        &self.data
    }

    /// False for Busemann-mode data whose endpoints all coincide.
    pub fn is_proper(&self) -> bool {
        self.proper
    }

    pub fn mode(&self) -> &'static str {
        match self.data {
            ObjectiveData::CoshDistance(_) => "cosh-distance",
            ObjectiveData::ExpBusemann(_) => "exp-busemann",
        }
    }

    pub fn dim(&self) -> usize {
        match &self.data {
            ObjectiveData::CoshDistance(m) => m.atoms()[0].dim(),
            ObjectiveData::ExpBusemann(m) => m.atoms()[0].base().dim(),
        }
    }

    fn terms(&self) -> Terms {
        let mut anchors = Vec::new();
        let mut offsets = Vec::new();
        let mut logw = Vec::new();
        match &self.data {
            ObjectiveData::CoshDistance(mu) => {
                for (y, w) in mu.iter() {
                    anchors.push(y.coords().clone());
                    offsets.push(0.0);
                    logw.push(w.ln());
                }
            }
            ObjectiveData::ExpBusemann(nu) => {
                for (u, w) in nu.iter() {
                    let eta = boundary_endpoint(u);
                    offsets.push(horo_height(u.base(), &eta).ln());
                    anchors.push(eta.coords().clone());
                    logw.push(w.ln());
                }
            }
        }
        Terms {
            anchors,
            offsets,
            logw,
            timelike: matches!(self.data, ObjectiveData::CoshDistance(_)),
        }
    }

    /// Weighted Minkowski average of the atoms, projected to H^n.
    pub fn initial_point(&self) -> SpacePoint {
        let mut acc = DVector::zeros(self.dim() + 1);
        match &self.data {
            ObjectiveData::CoshDistance(mu) => {
                for (y, w) in mu.iter() {
                    acc += y.coords() * w;
                }
            }
            ObjectiveData::ExpBusemann(nu) => {
                for (u, w) in nu.iter() {
                    acc += u.base().coords() * w;
                }
            }
        }
        SpacePoint::project(acc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Starting point; `None` uses [`ObjectiveSpec::initial_point`].
    #[serde(skip)]
    pub initial: Option<SpacePoint>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grad_tol: 1e-10,
            max_iters: 500,
            initial: None,
        }
    }
}

impl SolverConfig {
    pub fn with_initial(&self, z: SpacePoint) -> Self {
        SolverConfig {
            initial: Some(z),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub minimizer: SpacePoint,
    /// Log-domain objective at the minimizer.
    pub value: f64,
    /// Gradient norm, or for `p = inf` the distance from the origin to the
    /// convex hull of the active gradients.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SolverResult {
    /// The minimizer, or an error when the run did not converge.
    pub fn into_point(self) -> Result<SpacePoint> {
        if self.converged {
            Ok(self.minimizer)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                grad_norm: self.grad_norm,
            })
        }
    }
}

struct Terms {
    anchors: Vec<DVector<f64>>,
    offsets: Vec<f64>,
    logw: Vec<f64>,
    timelike: bool,
}

struct Local {
    frame: Vec<DVector<f64>>,
    vals: Vec<f64>,
    grads: Vec<DVector<f64>>,
}

impl Terms {
    fn values(&self, z: &SpacePoint) -> Vec<f64> {
        self.anchors
            .iter()
            .zip(&self.offsets)
            .map(|(a, c)| self.height(z, a).ln() - c)
            .collect()
    }

    fn height(&self, z: &SpacePoint, a: &DVector<f64>) -> f64 {
        let h = -minkowski(z.coords(), a);
        if self.timelike {
            h.max(1.0)
        } else {
            h
        }
    }

    fn local(&self, z: &SpacePoint) -> Local {
        let frame = tangent_frame(z);
        let mut vals = Vec::with_capacity(self.anchors.len());
        let mut grads = Vec::with_capacity(self.anchors.len());
        for (a, c) in self.anchors.iter().zip(&self.offsets) {
            let h = self.height(z, a);
            vals.push(h.ln() - c);
            let amb = z.coords() - a / h;
            grads.push(frame_coords(&frame, &amb));
        }
        Local { frame, vals, grads }
    }
}

/// `(log sum exp(logw_i + p v_i), softmax weights)`.
fn log_sum_exp(logw: &[f64], vals: &[f64], p: f64) -> (f64, Vec<f64>) {
    let e: Vec<f64> = logw.iter().zip(vals).map(|(w, v)| w + p * v).collect();
    let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: Vec<f64> = e.iter().map(|x| (x - m).exp()).collect();
    let total: f64 = s.iter().sum();
    (m + total.ln(), s.into_iter().map(|x| x / total).collect())
}

fn max_value(vals: &[f64]) -> f64 {
    vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Log-domain objective at `z`: `(1/p) log sum w_i phi_i(z)^p`, or
/// `max_i log phi_i(z)` for `p = inf`.
pub fn evaluate_objective(spec: &ObjectiveSpec, z: &SpacePoint) -> f64 {
    let terms = spec.terms();
    let vals = terms.values(z);
    match spec.exponent {
        Exponent::Finite(p) => log_sum_exp(&terms.logw, &vals, p).0 / p,
        Exponent::Infinite => max_value(&vals),
    }
}

/// Riemannian gradient (ambient coordinates) of the finite-p log objective.
pub fn objective_gradient(spec: &ObjectiveSpec, z: &SpacePoint) -> DVector<f64> {
    let terms = spec.terms();
    let loc = terms.local(z);
    let p = match spec.exponent {
        Exponent::Finite(p) => p,
        Exponent::Infinite => continuation_schedule().last().copied().unwrap(),
    };
    let (_, s) = log_sum_exp(&terms.logw, &loc.vals, p);
    let mut g = DVector::zeros(loc.frame.len());
    for (gi, si) in loc.grads.iter().zip(&s) {
        g += gi * *si;
    }
    from_frame(&loc.frame, &g)
}

/// Softmax weights `w_i phi_i(z)^p / sum_j w_j phi_j(z)^p` at `z`.
pub fn softmax_weights(spec: &ObjectiveSpec, z: &SpacePoint, p: f64) -> (f64, Vec<f64>) {
    let terms = spec.terms();
    let vals = terms.values(z);
    log_sum_exp(&terms.logw, &vals, p)
}

const MAX_STEP: f64 = 2.0;

struct Stage {
    z: SpacePoint,
    grad_norm: f64,
    value: f64,
    weights: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn newton(terms: &Terms, p: f64, z0: SpacePoint, tol: f64, max_iters: usize) -> Stage {
    let n = z0.dim();
    let mut z = z0;
    let mut polish = 0;
    let mut iterations = 0;
    let mut last_gn = f64::INFINITY;
    loop {
        let loc = terms.local(&z);
        let (lse, s) = log_sum_exp(&terms.logw, &loc.vals, p);
        let value = lse / p;
        let mut gbar = DVector::zeros(n);
        let mut outer = DMatrix::zeros(n, n);
        for (g, si) in loc.grads.iter().zip(&s) {
            gbar += g * *si;
            outer.ger(*si, g, g, 1.0);
        }
        let gn = gbar.norm();
        let done = gn <= tol;
        if done && (polish >= 2 || gn >= last_gn * 0.5) || iterations >= max_iters {
            return Stage {
                z,
                grad_norm: gn,
                value,
                weights: s,
                iterations,
                converged: done,
            };
        }
        if done {
            polish += 1;
        }
        iterations += 1;
        last_gn = gn;

        let mut h = DMatrix::identity(n, n) + outer * (p - 1.0);
        h.ger(-p, &gbar, &gbar, 1.0);
        let mut shift = 0.0;
        let delta = loop {
            let mut hs = h.clone();
            for i in 0..n {
                hs[(i, i)] += shift;
            }
            if let Some(ch) = hs.cholesky() {
                break -ch.solve(&gbar);
            }
            shift = if shift == 0.0 {
                1e-10 * (1.0 + h.amax())
            } else {
                shift * 10.0
            };
        };
        let len = delta.norm();
        let delta = if len > MAX_STEP {
            delta * (MAX_STEP / len)
        } else {
            delta
        };
        let dir = from_frame(&loc.frame, &delta);
        let slope = gbar.dot(&delta);

        // once the predicted decrease is below the rounding level of the
        // value, Armijo cannot discriminate; trust the full Newton step
        let noise = -slope <= 1e-14 * (1.0 + value.abs());
        let mut alpha = 1.0;
        let mut next = None;
        while alpha > 1e-12 {
            let cand = exp_map(&z, &(&dir * alpha));
            let cand_val = log_sum_exp(&terms.logw, &terms.values(&cand), p).0 / p;
            if cand_val <= value + 1e-4 * alpha * slope || (alpha == 1.0 && (gn < 1e-6 || noise)) {
                next = Some(cand);
                break;
            }
            alpha *= 0.5;
        }
        match next {
            Some(c) => z = c,
            None => {
                return Stage {
                    z,
                    grad_norm: gn,
                    value,
                    weights: s,
                    iterations,
                    converged: done,
                }
            }
        }
    }
}

struct Polished {
    z: SpacePoint,
    iterations: usize,
}

/// Sequential quadratic programming for `min_z max_i l_i(z)`. Each step
/// solves `min_d max_i (l_i + g_i.d) + d^T B d / 2` exactly over the simplex
/// dual, with `B` the Lagrangian Hessian of the previous multipliers.
fn minimax_polish(terms: &Terms, z0: SpacePoint, lambda0: Vec<f64>, max_iters: usize) -> Polished {
    const TAU: f64 = 1e-6;
    let mut z = z0;
    let mut lambda = lambda0;
    let mut iterations = 0;
    let n = z.dim();
    while iterations < max_iters {
        let loc = terms.local(&z);
        let m = max_value(&loc.vals);
        let mut b = DMatrix::identity(n, n) * (1.0 + TAU);
        for (g, l) in loc.grads.iter().zip(&lambda) {
            if *l > 0.0 {
                b.ger(-*l, g, g, 1.0);
            }
        }
        let Some(ch) = b.cholesky() else { break };
        let l = ch.l();
        let scaled: Vec<DVector<f64>> = loc
            .grads
            .iter()
            .map(|g| l.solve_lower_triangular(g).expect("cholesky factor is nonsingular"))
            .collect();
        let qp = simplex_qp(&scaled, &loc.vals);
        let u = -&qp.point;
        let model = scaled
            .iter()
            .zip(&loc.vals)
            .map(|(g, v)| v + g.dot(&u))
            .fold(f64::NEG_INFINITY, f64::max);
        let pred = m - (model + 0.5 * u.norm_squared());
        let mut delta = l
            .transpose()
            .solve_upper_triangular(&u)
            .expect("cholesky factor is nonsingular");
        lambda = qp.weights;
        iterations += 1;
        if delta.norm() < 1e-15 || pred <= 1e-16 * (1.0 + m.abs()) {
            break;
        }
        let len = delta.norm();
        if len > MAX_STEP {
            delta *= MAX_STEP / len;
        }
        let dir = from_frame(&loc.frame, &delta);
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-10 {
            let cand = exp_map(&z, &(&dir * alpha));
            let cm = max_value(&terms.values(&cand));
            if cm <= m - 1e-4 * alpha * pred {
                z = cand;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Polished { z, iterations }
}

/// Newton steps on the optimality system of the active pieces,
/// `l_i + g_i.d = t`, `sum lambda_i = 1`, `H d + sum lambda_i g_i = 0`, with
/// `H = sum lambda_i (I - g_i g_i^T)`. Steps are kept only while they shrink
/// the active hull distance.
fn kkt_refine(terms: &Terms, z0: SpacePoint, eps: f64) -> (SpacePoint, usize) {
    let mut z = z0;
    let mut best = active_hull_distance(terms, &z, eps);
    let mut steps = 0;
    for _ in 0..8 {
        if best == 0.0 {
            break;
        }
        let loc = terms.local(&z);
        let n = z.dim();
        let m = max_value(&loc.vals);
        let act: Vec<usize> = (0..loc.vals.len()).filter(|&i| loc.vals[i] >= m - eps).collect();
        let k = act.len();
        if k > n + 1 {
            break;
        }
        let grads: Vec<DVector<f64>> = act.iter().map(|&i| loc.grads[i].clone()).collect();
        let lam0 = min_norm_point(&grads).weights;
        let mut h = DMatrix::zeros(n, n);
        for (g, l) in grads.iter().zip(&lam0) {
            h += (DMatrix::identity(n, n) - g * g.transpose()) * *l;
        }
        // unknowns (d, lambda, t)
        let size = n + k + 1;
        let mut a = DMatrix::zeros(size, size);
        let mut rhs = DVector::zeros(size);
        for (r, (g, &i)) in grads.iter().zip(&act).enumerate() {
            for c in 0..n {
                a[(r, c)] = g[c];
            }
            a[(r, n + k)] = -1.0;
            rhs[r] = -loc.vals[i];
        }
        for c in 0..k {
            a[(k, n + c)] = 1.0;
        }
        rhs[k] = 1.0;
        for r in 0..n {
            for c in 0..n {
                a[(k + 1 + r, c)] = h[(r, c)];
            }
            for (c, g) in grads.iter().enumerate() {
                a[(k + 1 + r, n + c)] = g[r];
            }
        }
        let Some(sol) = a.lu().solve(&rhs) else { break };
        let d = sol.rows(0, n).into_owned();
        if !d.iter().all(|x| x.is_finite()) || d.norm() > 1e-2 {
            break;
        }
        let cand = exp_map(&z, &from_frame(&loc.frame, &d));
        let gn = active_hull_distance(terms, &cand, eps);
        if gn >= best {
            break;
        }
        z = cand;
        best = gn;
        steps += 1;
    }
    (z, steps)
}

/// Distance from the origin to the convex hull of gradients of the atoms
/// within `eps` of the maximum.
fn active_hull_distance(terms: &Terms, z: &SpacePoint, eps: f64) -> f64 {
    let loc = terms.local(z);
    let m = max_value(&loc.vals);
    let active: Vec<DVector<f64>> = loc
        .vals
        .iter()
        .zip(&loc.grads)
        .filter(|(v, _)| **v >= m - eps)
        .map(|(_, g)| g.clone())
        .collect();
    min_norm_point(&active).point.norm()
}

/// Minimizes the objective of `spec`.
pub fn minimize(spec: &ObjectiveSpec, cfg: &SolverConfig) -> SolverResult {
    let terms = spec.terms();
    let start = cfg.initial.clone().unwrap_or_else(|| spec.initial_point());
    match spec.exponent {
        Exponent::Finite(p) => {
            let mut z = start;
            let mut iterations = 0;
            // warm-started continuation keeps Newton inside its basin
            let mut q = 2.0;
            while q * 2.0 <= p && cfg.initial.is_none() {
                let st = newton(&terms, q, z, 1e-6, cfg.max_iters);
                iterations += st.iterations;
                z = st.z;
                q *= 2.0;
            }
            let st = newton(&terms, p, z, cfg.grad_tol, cfg.max_iters);
            SolverResult {
                minimizer: st.z,
                value: st.value,
                grad_norm: st.grad_norm,
                iterations: iterations + st.iterations,
                converged: st.converged,
            }
        }
        Exponent::Infinite => {
            let mut z = start;
            let mut iterations = 0;
            let mut weights = Vec::new();
            for q in continuation_schedule() {
                let st = newton(&terms, q, z, 1e-9, cfg.max_iters);
                iterations += st.iterations;
                z = st.z;
                weights = st.weights;
            }
            let pol = minimax_polish(&terms, z, weights, cfg.max_iters);
            let (z, refine) = kkt_refine(&terms, pol.z, ACTIVE_EPS);
            let grad_norm = active_hull_distance(&terms, &z, ACTIVE_EPS);
            SolverResult {
                value: max_value(&terms.values(&z)),
                minimizer: z,
                grad_norm,
                iterations: iterations + pol.iterations + refine,
                converged: grad_norm <= cfg.grad_tol,
            }
        }
    }
}

/// Hyperbolic p-barycenter of a space measure.
pub fn p_barycenter(mu: &SpaceMeasure, p: impl Into<Exponent>) -> Result<SpacePoint> {
    let spec = ObjectiveSpec::cosh(mu.clone(), p)?;
    minimize(&spec, &SolverConfig::default()).into_point()
}

/// Circumcenter (minimax point) of a finite set.
pub fn circumcenter(points: &[SpacePoint]) -> Result<SpacePoint> {
    let mu = SpaceMeasure::uniform(points.to_vec())?;
    p_barycenter(&mu, Exponent::Infinite)
}

/// Asymptotic p-barycenter `c^p_inf(nu)`.
pub fn asymptotic_p_barycenter(nu: &TangentMeasure, p: impl Into<Exponent>) -> Result<SpacePoint> {
    let spec = ObjectiveSpec::busemann(nu.clone(), p)?;
    minimize(&spec, &SolverConfig::default()).into_point()
}

/// Asymptotic circumcenter of a finite set of unit tangents.
pub fn asymptotic_circumcenter(k: &[crate::geometry::UnitTangent]) -> Result<SpacePoint> {
    let nu = TangentMeasure::uniform(k.to_vec())?;
    asymptotic_p_barycenter(&nu, Exponent::Infinite)
}

/// One row of a limit experiment.
#[derive(Clone, Debug)]
pub struct LimitRow {
    /// `t` or `p` (`inf` for the limit row).
    pub param: f64,
    pub point: SpacePoint,
    pub distance: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct LimitTable {
    pub rows: Vec<LimitRow>,
    /// The limit point the distance column refers to.
    pub limit: SpacePoint,
    /// Smallest parameter beyond which the distance column is nonincreasing.
    pub t0: f64,
}

fn monotone_from(rows: &[LimitRow]) -> f64 {
    let mut k = rows.len().saturating_sub(1);
    while k > 0 && rows[k - 1].distance >= rows[k].distance {
        k -= 1;
    }
    rows.get(k).map(|r| r.param).unwrap_or(f64::NAN)
}

fn check_schedule(s: &[f64]) -> Result<()> {
    if s.is_empty() || s.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "schedule must be non-empty and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `c^p(mu_t)` for `mu_t = (pi o phi_t)_* nu` against the limit `c^p_inf(nu)`.
pub fn flow_limit_experiment(nu: &TangentMeasure, p: f64, ts: &[f64], cfg: &SolverConfig) -> Result<LimitTable> {
    check_schedule(ts)?;
    let limit_spec = ObjectiveSpec::busemann(nu.clone(), p)?;
    let limit = minimize(&limit_spec, cfg).into_point()?;
    let mut rows = Vec::with_capacity(ts.len());
    for &t in ts {
        let mu = crate::measure::flow_project(nu, t);
        let spec = ObjectiveSpec::cosh(mu, p)?;
        let res = minimize(&spec, cfg);
        if !res.converged {
            return Err(Error::NotConverged {
                iterations: res.iterations,
                grad_norm: res.grad_norm,
            });
        }
        rows.push(LimitRow {
            param: t,
            distance: crate::geometry::dist(&res.minimizer, &limit),
            point: res.minimizer,
            grad_norm: res.grad_norm,
            iterations: res.iterations,
        });
    }
    let t0 = monotone_from(&rows);
    Ok(LimitTable { rows, limit, t0 })
}

/// `c^p_inf(nu)` along `ps`, against the asymptotic circumcenter; the last
/// row is the `p = inf` answer itself.
pub fn p_limit_experiment(nu: &TangentMeasure, ps: &[f64], cfg: &SolverConfig) -> Result<LimitTable> {
    check_schedule(ps)?;
    let inf_spec = ObjectiveSpec::busemann(nu.clone(), Exponent::Infinite)?;
    let inf = minimize(&inf_spec, cfg);
    if !inf.converged {
        return Err(Error::NotConverged {
            iterations: inf.iterations,
            grad_norm: inf.grad_norm,
        });
    }
    let limit = inf.minimizer.clone();
    let mut rows = Vec::with_capacity(ps.len() + 1);
    for &p in ps {
        let spec = ObjectiveSpec::busemann(nu.clone(), p)?;
        let res = minimize(&spec, cfg);
        if !res.converged {
            return Err(Error::NotConverged {
                iterations: res.iterations,
                grad_norm: res.grad_norm,
            });
        }
        rows.push(LimitRow {
            param: p,
            distance: crate::geometry::dist(&res.minimizer, &limit),
            point: res.minimizer,
            grad_norm: res.grad_norm,
            iterations: res.iterations,
        });
    }
    let t0 = monotone_from(&rows);
    rows.push(LimitRow {
        param: f64::INFINITY,
        point: inf.minimizer,
        distance: 0.0,
        grad_norm: inf.grad_norm,
        iterations: inf.iterations,
    });
    Ok(LimitTable { rows, limit, t0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{direction_to, dist, geodesic_point, UnitTangent};
    use crate::lorentz::Lorentz;
    use crate::measure::uniform_boundary_grid;
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64) -> SpacePoint {
        SpacePoint::from_spatial(&[x, y])
    }

    #[test]
    fn single_atom() {
        let y = pt(0.3, -1.1);
        let mu = SpaceMeasure::uniform(vec![y.clone()]).unwrap();
        for p in [1.0, 2.0, 7.5] {
            let spec = ObjectiveSpec::cosh(mu.clone(), p).unwrap();
            let z = pt(1.0, 1.0);
            assert!((evaluate_objective(&spec, &z) - dist(&z, &y).cosh().ln()).abs() < 1e-12);
            assert!(dist(&p_barycenter(&mu, p).unwrap(), &y) < 1e-9);
        }
        assert!(dist(&p_barycenter(&mu, Exponent::Infinite).unwrap(), &y) < 1e-9);
    }

    #[test]
    fn two_atoms_give_midpoint() {
        let a = pt(1.2, 0.4);
        let b = pt(-0.5, -2.0);
        let mid = crate::geometry::exp_map(&a, &(crate::geometry::log_map(&a, &b) * 0.5));
        let mu = SpaceMeasure::uniform(vec![a.clone(), b.clone()]).unwrap();
        for p in [Exponent::Finite(1.0), Exponent::Finite(3.0), Exponent::Infinite] {
            let z = p_barycenter(&mu, p).unwrap();
            assert!(dist(&z, &mid) < 1e-8, "{p:?}");
        }
        assert!(dist(&circumcenter(&[a, b]).unwrap(), &mid) < 1e-8);
    }

    #[test]
    fn equilateral_triple_circumcenter_is_origin() {
        let y = pt(1.5, 0.0);
        let pts: Vec<_> = (0..3)
            .map(|k| Lorentz::rotation(2, 1, 2, 2.0 * std::f64::consts::PI * k as f64 / 3.0).apply_point(&y))
            .collect();
        let c = circumcenter(&pts).unwrap();
        assert!(dist(&c, &SpacePoint::origin(2)) < 1e-9);
    }

    #[test]
    fn sup_over_tangent_sphere_is_distance() {
        let o = SpacePoint::origin(2);
        let grid = uniform_boundary_grid(720, &o).unwrap();
        let nu = crate::measure::pushforward_qx(&grid, &o);
        let spec = ObjectiveSpec::busemann(nu.clone(), Exponent::Infinite).unwrap();
        // z along a grid direction so the sup is attained on the grid
        let z = geodesic_point(&direction_to(&o, &grid.atoms()[5]), 1.3);
        assert!((evaluate_objective(&spec, &z) - 1.3).abs() < 1e-12);
        let c = asymptotic_p_barycenter(&nu, Exponent::Infinite).unwrap();
        assert!(dist(&c, &o) < 1e-9);
        for p in [1.0, 4.0] {
            assert!(dist(&asymptotic_p_barycenter(&nu, p).unwrap(), &o) < 1e-9);
        }
    }

    #[test]
    fn two_opposite_tangents() {
        let o = SpacePoint::origin(3);
        let u = UnitTangent::new(o.clone(), vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let v = UnitTangent::new(o.clone(), vec![0.0, 0.0, -1.0, 0.0]).unwrap();
        let c = asymptotic_circumcenter(&[u.clone(), v.clone()]).unwrap();
        assert!(dist(&c, &o) < 1e-9);
        let nu = TangentMeasure::uniform(vec![u, v]).unwrap();
        assert!(dist(&asymptotic_p_barycenter(&nu, 2.0).unwrap(), &o) < 1e-9);
    }

    #[test]
    fn singleton_endpoints_rejected_at_infinity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xi = sample::boundary_point(&mut rng, 2);
        let atoms: Vec<_> = (0..3)
            .map(|_| direction_to(&sample::point_in_ball(&mut rng, 2, 1.0), &xi))
            .collect();
        let nu = TangentMeasure::uniform(atoms).unwrap();
        assert!(matches!(
            ObjectiveSpec::busemann(nu.clone(), Exponent::Infinite),
            Err(Error::SingletonEndpoints)
        ));
        let spec = ObjectiveSpec::busemann(nu, 2.0).unwrap();
        assert!(!spec.is_proper());
        let res = minimize(
            &spec,
            &SolverConfig {
                max_iters: 50,
                ..Default::default()
            },
        );
        assert!(!res.converged);
    }

    #[test]
    fn log_sum_exp_approaches_max() {
        // the gap is at most log(1/w_min)/p
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..20 {
            let n = 2 + k % 3;
            let atoms: Vec<_> = (0..n).map(|_| sample::point_in_ball(&mut rng, 2, 2.0)).collect();
            let mu = SpaceMeasure::uniform(atoms).unwrap();
            let z = sample::point_in_ball(&mut rng, 2, 2.0);
            let a = evaluate_objective(&ObjectiveSpec::cosh(mu.clone(), 1e3).unwrap(), &z);
            let b = evaluate_objective(&ObjectiveSpec::cosh(mu, Exponent::Infinite).unwrap(), &z);
            assert!(a <= b + 1e-15);
            assert!(b - a <= (n as f64).ln() / 1e3 + 1e-15);
            if n == 2 {
                assert!((a - b).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let atoms: Vec<_> = (0..5).map(|_| sample::unit_tangent(&mut rng, 3, 1.5)).collect();
        let nu = TangentMeasure::normalized(atoms, vec![1.0, 2.0, 1.0, 3.0, 0.5]).unwrap();
        let spec = ObjectiveSpec::busemann(nu, 3.0).unwrap();
        let z = sample::point_in_ball(&mut rng, 3, 1.0);
        let g = objective_gradient(&spec, &z);
        for e in tangent_frame(&z) {
            let h = 1e-6;
            let fp = evaluate_objective(&spec, &exp_map(&z, &(&e * h)));
            let fm = evaluate_objective(&spec, &exp_map(&z, &(&e * -h)));
            assert!(((fp - fm) / (2.0 * h) - minkowski(&g, &e)).abs() < 1e-7);
        }
    }

    #[test]
    fn equivariance_under_isometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for p in [Exponent::Finite(2.0), Exponent::Infinite] {
            let g = Lorentz::random(&mut rng, 2, 1.0);
            let atoms: Vec<_> = (0..4).map(|_| sample::unit_tangent(&mut rng, 2, 1.0)).collect();
            let nu = TangentMeasure::uniform(atoms).unwrap();
            let moved = nu.map(|u| g.apply_tangent(u));
            let a = asymptotic_p_barycenter(&nu, p).unwrap();
            let b = asymptotic_p_barycenter(&moved, p).unwrap();
            assert!(dist(&g.apply_point(&a), &b) < 1e-8);
        }
    }

    #[test]
    fn p_limit_on_symmetric_measure() {
        let o = SpacePoint::origin(2);
        let nu = crate::measure::pushforward_qx(&uniform_boundary_grid(6, &o).unwrap(), &o);
        let table = p_limit_experiment(&nu, &[2.0, 4.0, 8.0], &SolverConfig::default()).unwrap();
        assert_eq!(table.rows.len(), 4);
        for r in &table.rows {
            assert!(r.distance < 1e-12);
            assert!(dist(&r.point, &o) < 1e-9);
        }
        assert!(p_limit_experiment(&nu, &[4.0, 2.0], &SolverConfig::default()).is_err());
    }
}
