//! Seeded invariant suites. Each function draws its instances sequentially
//! from the run's generator, evaluates them on the worker pool and returns
//! one [`Suite`] per measured quantity. `verify` runs them at desk scale; the
//! acceptance tests run them at full scale.

use std::f64::consts::TAU;

use hyperbary::extension::{
    self, argmax_set, circumcenter_extension, derivative_identity_residual, inverse_consistency, lipschitz_audit,
    main_inequality_audit, mu_x_p, naturality_defect, ExtensionContext, FdScheme, HULL_TOL,
};
use hyperbary::geometry::{
    busemann, direction_to, dist, exp_map, geodesic_point, gromov_product, minkowski, tangent_frame, tangent_norm,
    tangent_project, visual_metric,
};
use hyperbary::hull::{min_norm_point, HullCertificate};
use hyperbary::measure::{balance_residual, grid_atoms, uniform_boundary_grid};
use hyperbary::moebius::{
    cross_ratio_deviation, nearest_visual_projection, probe_quadruples, BoundaryMap, FourierWarp, MoebiusMetric,
};
use hyperbary::solver::{evaluate_objective, flow_limit_experiment, minimize, p_limit_experiment};
use hyperbary::{
    sample, BoundaryDirection, BoundaryMeasure, Error, Exponent, Lorentz, ModelConfig, ObjectiveSpec, SolverConfig,
    SpaceMeasure, SpacePoint, TangentMeasure, UnitTangent,
};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::oracle;
use crate::report::Suite;

/// A solver failure inside a suite; carries enough to reproduce the case.
#[derive(Debug)]
pub struct CaseFailure {
    pub suite: String,
    pub case: usize,
    pub input: Value,
    pub message: String,
}

impl std::fmt::Display for CaseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} case {}: {}", self.suite, self.case, self.message)
    }
}

impl std::error::Error for CaseFailure {}

pub type Checked = Result<Vec<Suite>, CaseFailure>;

pub fn pt(x: &SpacePoint) -> Value {
    json!(x.to_vec())
}

fn bd(xi: &BoundaryDirection) -> Value {
    json!(xi.to_vec())
}

fn tg(u: &UnitTangent) -> Value {
    json!({"base": u.base().to_vec(), "dir": u.dir().as_slice()})
}

/// Runs `f` over `cases` on the pool. `f` returns one violation per entry of
/// `suites` plus a row. Non-convergence aborts with a [`CaseFailure`]; any
/// other library error counts as an infinite violation in every suite.
fn run<T: Sync>(
    suites: &[(&str, f64)],
    cases: &[(Value, T)],
    f: impl Fn(&T) -> hyperbary::Result<(Vec<f64>, Value)> + Sync,
) -> Checked {
    let results: Vec<_> = cases.par_iter().map(|(_, c)| f(c)).collect();
    let mut per: Vec<Vec<(f64, Value)>> = vec![Vec::with_capacity(cases.len()); suites.len()];
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((v, row)) => {
                assert_eq!(v.len(), suites.len());
                for (k, vk) in v.into_iter().enumerate() {
                    per[k].push((vk, json!({"case": i, "violation": vk, "data": row.clone()})));
                }
            }
            Err(e @ Error::NotConverged { .. }) => {
                return Err(CaseFailure {
                    suite: suites[0].0.into(),
                    case: i,
                    input: cases[i].0.clone(),
                    message: e.to_string(),
                })
            }
            Err(e) => {
                for p in per.iter_mut() {
                    p.push((
                        f64::INFINITY,
                        json!({"case": i, "error": e.to_string(), "input": cases[i].0}),
                    ));
                }
            }
        }
    }
    Ok(suites
        .iter()
        .zip(per)
        .map(|((name, tol), rows)| Suite::new(*name, *tol, rows))
        .collect())
}

fn ctx(f: BoundaryMap, grid_n: usize, solver: &SolverConfig) -> hyperbary::Result<ExtensionContext> {
    let dim = f.dim();
    let o = SpacePoint::origin(dim);
    ExtensionContext::new(
        f,
        uniform_boundary_grid(grid_atoms(grid_n, dim), &o)?,
        ModelConfig::new(dim, 1.0)?,
        solver.clone(),
    )
}

fn random_tangent_measure(rng: &mut ChaCha8Rng, dim: usize, k: usize, radius: f64) -> TangentMeasure {
    let atoms: Vec<UnitTangent> = (0..k).map(|_| sample::unit_tangent(rng, dim, radius)).collect();
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    TangentMeasure::normalized(atoms, w).expect("positive weights")
}

fn random_space_measure(rng: &mut ChaCha8Rng, dim: usize, k: usize, radius: f64) -> SpaceMeasure {
    let atoms: Vec<SpacePoint> = (0..k).map(|_| sample::point_in_ball(rng, dim, radius)).collect();
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    SpaceMeasure::normalized(atoms, w).expect("positive weights")
}

fn unit_tangent_at(rng: &mut ChaCha8Rng, x: &SpacePoint) -> DVector<f64> {
    let v = tangent_project(x, sample::boundary_point(rng, x.dim()).coords());
    &v / tangent_norm(&v)
}

/// Closed forms against their radial limits at `t = 20`.
pub fn closed_forms(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Checked {
    let t = 20.0;
    let cases: Vec<_> = (0..n)
        .map(|i| {
            let dim = 2 + i % 2;
            let x = sample::point_in_ball(rng, dim, 3.0);
            let y = sample::point_in_ball(rng, dim, 3.0);
            let xi = sample::boundary_point(rng, dim);
            // the radial limit converges like exp(-2t) / rho^2
            let eta = loop {
                let eta = sample::boundary_point(rng, dim);
                if visual_metric(&x, &xi, &eta) > 1e-3 {
                    break eta;
                }
            };
            (
                json!({"x": pt(&x), "y": pt(&y), "xi": bd(&xi), "eta": bd(&eta)}),
                (x, y, xi, eta),
            )
        })
        .collect();
    run(
        &[
            ("busemann_radial_limit", 1e-7 * scale),
            ("gromov_product_radial_limit", 1e-7 * scale),
            ("visual_metric_radial_limit", 1e-7 * scale),
            ("visual_metric_rescaling", 1e-10 * scale),
        ],
        &cases,
        |(x, y, xi, eta)| {
            let a = geodesic_point(&direction_to(x, xi), t);
            let b_lim = dist(x, &a) - dist(y, &a);
            let b_err = (busemann(x, y, xi) - b_lim).abs();
            let a2 = geodesic_point(&direction_to(x, eta), t);
            let g_lim = 0.5 * (dist(x, &a) + dist(x, &a2) - dist(&a, &a2));
            let g = gromov_product(x, xi, eta);
            let g_err = (g - g_lim).abs();
            let v_err = ((-g).exp() - (-g_lim).exp()).abs();
            let rx = visual_metric(x, xi, eta);
            let ry = visual_metric(y, xi, eta);
            let pred = rx * rx * busemann(x, y, xi).exp() * busemann(x, y, eta).exp();
            let r_err = (ry * ry - pred).abs();
            Ok((
                vec![b_err, g_err, v_err, r_err],
                json!({"busemann": b_err, "gromov": g_err, "visual": v_err, "rescaling": r_err}),
            ))
        },
    )
}

/// Relative amount by which `phi(m)` exceeds the `F(-1)` chord bound.
fn chord_excess(u: &UnitTangent, a: f64, s: f64, phi: impl Fn(&SpacePoint) -> f64) -> f64 {
    let e1 = phi(&geodesic_point(u, -a));
    let e2 = phi(&geodesic_point(u, a));
    let m = phi(&geodesic_point(u, s));
    let bound = ((a + s).sinh() * e2 + (a - s).sinh() * e1) / (2.0 * a).sinh();
    ((m - bound) / bound.abs().max(1.0)).max(0.0)
}

/// Chord bounds for cosh-distance and exp-Busemann objectives and their
/// powers along random geodesics.
pub fn convexity(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Checked {
    let exps = [1.0, 2.0, 5.0, 10.0, f64::INFINITY];
    let mut out = Vec::new();
    for &p in &exps {
        let cases: Vec<_> = (0..n)
            .map(|i| {
                let dim = 2 + i % 2;
                let u = sample::unit_tangent(rng, dim, 2.0);
                let a = rng.gen_range(0.05..1.5);
                let s = a * rng.gen_range(-1.0..1.0);
                let k = rng.gen_range(1..=3);
                let mu = random_space_measure(rng, dim, k, 2.0);
                let nu = random_tangent_measure(rng, dim, k + 1, 2.0);
                (json!({"u": tg(&u), "a": a, "s": s}), (u, a, s, mu, nu))
            })
            .collect();
        let label = if p.is_infinite() {
            "inf".to_string()
        } else {
            format!("{p}")
        };
        let name = format!("chord_convexity_p{label}");
        out.extend(run(&[(name.as_str(), 1e-9 * scale)], &cases, |(u, a, s, mu, nu)| {
            let cosh = ObjectiveSpec::cosh(mu.clone(), p)?;
            let bus = ObjectiveSpec::busemann(nu.clone(), p)?;
            // the L^p norm, and for finite p its p-th power
            let excess = |spec: &ObjectiveSpec, power: f64| {
                chord_excess(u, *a, *s, |z| (power * evaluate_objective(spec, z)).exp())
            };
            let mut worst = excess(&cosh, 1.0).max(excess(&bus, 1.0));
            if p.is_finite() {
                worst = worst.max(excess(&cosh, p)).max(excess(&bus, p));
            }
            Ok((vec![worst], json!({"excess": worst})))
        })?);
    }
    Ok(out)
}

enum OracleCase {
    Cosh(SpaceMeasure, f64),
    Busemann(TangentMeasure, f64),
}

/// Solver minimizers against the brute-force disk oracle in H^2, plus
/// symmetric instances with known answers.
pub fn oracle_equivalence(rng: &mut ChaCha8Rng, n: usize, step: f64, scale: f64) -> Checked {
    let kinds = [
        (false, 1.0),
        (false, 2.0),
        (false, 5.0),
        (false, f64::INFINITY),
        (true, 2.0),
        (true, f64::INFINITY),
    ];
    let cases: Vec<_> = (0..n)
        .map(|i| {
            let (bus, p) = kinds[i % kinds.len()];
            let k = rng.gen_range(2..=5);
            if bus {
                let nu = random_tangent_measure(rng, 2, k, 1.0);
                let atoms: Vec<Value> = nu.atoms().iter().map(tg).collect();
                (
                    json!({"mode": "busemann", "p": p, "atoms": atoms, "weights": nu.weights()}),
                    OracleCase::Busemann(nu, p),
                )
            } else {
                let mu = random_space_measure(rng, 2, k, 2.0);
                let atoms: Vec<Value> = mu.atoms().iter().map(pt).collect();
                (
                    json!({"mode": "cosh", "p": p, "atoms": atoms, "weights": mu.weights()}),
                    OracleCase::Cosh(mu, p),
                )
            }
        })
        .collect();
    let mut out = run(&[("grid_oracle", 2e-3 * scale)], &cases, |c| {
        let (spec, found, f) = match c {
            OracleCase::Cosh(mu, p) => {
                let radius = mu
                    .atoms()
                    .iter()
                    .map(|y| y.to_poincare().iter().map(|w| w * w).sum::<f64>().sqrt())
                    .fold(0.0, f64::max);
                let f = oracle::cosh_objective(mu.atoms(), mu.weights(), *p);
                let found = oracle::grid_minimize(&f, (radius + 0.01).min(0.995), step);
                (
                    ObjectiveSpec::cosh(mu.clone(), *p)?,
                    found,
                    Box::new(f) as Box<dyn Fn(&SpacePoint) -> f64>,
                )
            }
            OracleCase::Busemann(nu, p) => {
                let f = oracle::busemann_objective(nu.atoms(), nu.weights(), *p);
                let found = oracle::grid_minimize(&f, 0.995, step);
                (
                    ObjectiveSpec::busemann(nu.clone(), *p)?,
                    found,
                    Box::new(f) as Box<dyn Fn(&SpacePoint) -> f64>,
                )
            }
        };
        let z = minimize(&spec, &SolverConfig::default()).into_point()?;
        let d = dist(&z, &found);
        Ok((
            vec![d],
            json!({
                "solver": pt(&z),
                "oracle": pt(&found),
                "distance": d,
                "solver_value": f(&z),
                "oracle_value": f(&found),
            }),
        ))
    })?;

    let g = Lorentz::random(rng, 2, 1.0);
    let sym: Vec<(Value, usize)> = (0..8).map(|i| (json!({"instance": i}), i)).collect();
    out.extend(run(&[("symmetric_minimizers", 1e-8 * scale)], &sym, |&i| {
        let o = SpacePoint::origin(2);
        let ring = |m: usize, r: f64| -> Vec<SpacePoint> {
            (0..m)
                .map(|k| {
                    SpacePoint::from_polar(
                        &[(TAU * k as f64 / m as f64).cos(), (TAU * k as f64 / m as f64).sin()],
                        r,
                    )
                })
                .collect()
        };
        let (spec, expected) = match i {
            0..=3 => {
                let p = [1.0, 2.0, 5.0, f64::INFINITY][i];
                let a = SpacePoint::from_spatial(&[0.7, -1.1]);
                let b = SpacePoint::from_spatial(&[-1.3, 0.4]);
                let mid = exp_map(&a, &(hyperbary::geometry::log_map(&a, &b) * 0.5));
                (ObjectiveSpec::cosh(SpaceMeasure::uniform(vec![a, b])?, p)?, mid)
            }
            4 | 5 => {
                let p = if i == 4 { 2.0 } else { f64::INFINITY };
                (ObjectiveSpec::cosh(SpaceMeasure::uniform(ring(3, 1.2))?, p)?, o)
            }
            6 => {
                let atoms: Vec<_> = ring(5, 1.3).iter().map(|y| g.apply_point(y)).collect();
                (
                    ObjectiveSpec::cosh(SpaceMeasure::uniform(atoms)?, 3.0)?,
                    g.apply_point(&o),
                )
            }
            _ => {
                let grid = uniform_boundary_grid(6, &o)?;
                let nu = TangentMeasure::uniform(grid.atoms().iter().map(|xi| direction_to(&o, xi)).collect())?;
                (ObjectiveSpec::busemann(nu, f64::INFINITY)?, o)
            }
        };
        let z = minimize(&spec, &SolverConfig::default()).into_point()?;
        let d = dist(&z, &expected);
        Ok((vec![d], json!({"distance": d})))
    })?);
    Ok(out)
}

fn limit_case(rng: &mut ChaCha8Rng) -> (Value, TangentMeasure) {
    let k = rng.gen_range(3..=5);
    let nu = random_tangent_measure(rng, 2, k, 1.5);
    let atoms: Vec<Value> = nu.atoms().iter().map(tg).collect();
    (json!({"atoms": atoms, "weights": nu.weights()}), nu)
}

/// `c^2(mu_t)` approaches `c^2_inf(nu)` as `t -> inf`.
pub fn flow_limit(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Checked {
    let cases: Vec<_> = (0..n).map(|_| limit_case(rng)).collect();
    let ts: Vec<f64> = (1..=10).map(f64::from).collect();
    // the distance must be nonincreasing over at least the second half
    let t0_max = ts[ts.len() / 2 - 1];
    run(
        &[("flow_limit_t10", 1e-3 * scale), ("flow_limit_monotone_tail", 0.0)],
        &cases,
        |nu| {
            let table = flow_limit_experiment(nu, 2.0, &ts, &SolverConfig::default())?;
            let d: Vec<f64> = table.rows.iter().map(|r| r.distance).collect();
            let last = d[d.len() - 1];
            let rate = (d[d.len() - 2] / last).ln();
            let late = if table.t0.is_nan() {
                f64::INFINITY
            } else {
                (table.t0 - t0_max).max(0.0)
            };
            Ok((vec![last, late], json!({"distances": d, "t0": table.t0, "rate": rate})))
        },
    )
}

/// `c^p_inf(nu)` approaches the asymptotic circumcenter along `p = 2^k`.
pub fn p_limit(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Checked {
    let cases: Vec<_> = (0..n).map(|_| limit_case(rng)).collect();
    let ps = hyperbary::solver::continuation_schedule();
    run(&[("p_limit_p16384", 1e-3 * scale)], &cases, |nu| {
        let table = p_limit_experiment(nu, &ps, &SolverConfig::default())?;
        let d: Vec<f64> = table.rows.iter().map(|r| r.distance).collect();
        let last = d[d.len() - 2];
        Ok((vec![last], json!({"distances": &d[..d.len() - 1], "t0": table.t0})))
    })
}

/// Extensions of Lorentz boundary maps are the isometries themselves.
pub fn naturality(rng: &mut ChaCha8Rng, maps: usize, points: usize, grid_n: usize, scale: f64) -> Checked {
    let mut cases = Vec::new();
    for m in 0..maps {
        let g = Lorentz::random(rng, 2, 1.5);
        let gg = Lorentz::random(rng, 2, 1.0);
        let hh = Lorentz::random(rng, 2, 1.0);
        for k in 0..points {
            let x = sample::point_in_ball(rng, 2, 2.0);
            let input = json!({"map": m, "matrix": g.rows(), "x": pt(&x)});
            cases.push((input, (g.clone(), gg.clone(), hh.clone(), x, k == 0)));
        }
    }
    let solver = SolverConfig::default();
    run(
        &[
            ("circumcenter_extension_naturality", 1e-6 * scale),
            ("nearest_visual_projection", 1e-3 * scale),
            ("conjugated_map_naturality", 1e-6 * scale),
        ],
        &cases,
        |(g, gg, hh, x, first)| {
            let c = ctx(BoundaryMap::Lorentz(g.clone()), grid_n, &solver)?;
            let gx = g.apply_point(x);
            let e = dist(&circumcenter_extension(&c, x)?, &gx);
            let rho = MoebiusMetric::Pushforward {
                map: BoundaryMap::Lorentz(g.clone()),
                base: x.clone(),
            };
            let v = dist(&nearest_visual_projection(&rho, grid_n, &solver)?, &gx);
            let nat = if *first { naturality_defect(&c, gg, hh, x)? } else { 0.0 };
            Ok((
                vec![e, v, nat],
                json!({"extension": e, "projection": v, "conjugated": nat}),
            ))
        },
    )
}

fn extension_case(rng: &mut ChaCha8Rng, i: usize) -> (Value, (BoundaryMap, SpacePoint)) {
    let dim = 2 + (i / 2) % 2;
    let map = if i.is_multiple_of(2) {
        BoundaryMap::identity(dim)
    } else {
        BoundaryMap::Lorentz(Lorentz::random(rng, dim, 1.5))
    };
    let x = sample::point_in_ball(rng, dim, 2.0);
    (
        json!({"map": serde_json::to_value(&map).expect("maps serialize"), "x": pt(&x)}),
        (map, x),
    )
}

/// Balance of `f_* mu^x_p`, uniqueness of the balanced point, and hull
/// certificates at and away from `F(x)`.
pub fn balance_certificates(rng: &mut ChaCha8Rng, n: usize, grid_n: usize, scale: f64) -> Checked {
    let cases: Vec<_> = (0..n)
        .map(|i| {
            let (v, (map, x)) = extension_case(rng, i);
            let start = sample::point_in_ball(rng, map.dim(), 3.0);
            let w = unit_tangent_at(rng, &SpacePoint::origin(map.dim()));
            (v, (map, x, start, w))
        })
        .collect();
    let solver = SolverConfig::default();
    run(
        &[
            ("balance_residual", 1e-8 * scale),
            ("balanced_point_uniqueness", 1e-6 * scale),
            ("certificate_feasible_at_extension", HULL_TOL * scale),
            ("certificate_separates_offset", 0.0),
        ],
        &cases,
        |(map, x, start, w0)| {
            let c = ctx(map.clone(), grid_n, &solver)?;
            let mut residual: f64 = 0.0;
            for p in [2.0, 16.0, 256.0, 4096.0] {
                residual = residual.max(mu_x_p(&c, x, p)?.1.residual);
            }
            let fiber = c.fiber(x)?;
            let (_, rep) = mu_x_p(&c, x, 16.0)?;
            let other = fiber.solve(Exponent::Finite(16.0), &solver.with_initial(start.clone()))?;
            let (wts, _) = fiber.reweight(&other.minimizer, 16.0);
            let pushed = BoundaryMeasure::normalized(fiber.images().to_vec(), wts)?;
            let other_res = balance_residual(&pushed, &other.minimizer);
            let unique = if other_res <= 1e-10 {
                dist(&other.minimizer, &rep.point)
            } else {
                f64::INFINITY
            };

            let fx = circumcenter_extension(&c, x)?;
            let aset = argmax_set(&c, x, &fx, 1e-4)?;
            let frame = tangent_frame(&fx);
            let coords: Vec<DVector<f64>> = aset
                .directions
                .iter()
                .map(|d| hyperbary::geometry::frame_coords(&frame, d))
                .collect();
            let hull_gap = min_norm_point(&coords).point.norm();
            let feasible = extension::hull_certificate(&aset, HULL_TOL).is_feasible();
            let feasible_violation = if feasible { hull_gap } else { f64::INFINITY };

            // push the origin frame vector to F(x) to get an offset direction
            let w = Lorentz::boost_to(&fx).apply_vector(w0);
            let off = exp_map(&fx, &(w * 0.5));
            let aset = argmax_set(&c, x, &off, 1e-4)?;
            let (separated, margin) = match extension::hull_certificate(&aset, HULL_TOL) {
                HullCertificate::Infeasible { separator, margin } => (
                    margin > 0.0 && aset.directions.iter().all(|d| minkowski(d, &separator) > 0.0),
                    margin,
                ),
                HullCertificate::Feasible { .. } => (false, 0.0),
            };
            Ok((
                vec![residual, unique, feasible_violation, if separated { 0.0 } else { 1.0 }],
                json!({
                    "balance_residual": residual,
                    "independent_residual": other_res,
                    "uniqueness": unique,
                    "hull_gap": hull_gap,
                    "members": aset.members.len(),
                    "separator_margin": margin,
                }),
            ))
        },
    )
}

/// Finite-difference audit of the implicit derivative identity of `F_p`.
pub fn derivative_identity(rng: &mut ChaCha8Rng, n: usize, grid_n: usize, scale: f64) -> Checked {
    let cases: Vec<_> = (0..n)
        .map(|i| {
            let p = [4.0, 16.0, 64.0][i % 3];
            let g = Lorentz::random(rng, 2, 1.0);
            let x = sample::point_in_ball(rng, 2, 1.5);
            let v = unit_tangent_at(rng, &x);
            (
                json!({"p": p, "matrix": g.rows(), "x": pt(&x), "v": v.as_slice()}),
                (p, g, x, v),
            )
        })
        .collect();
    let solver = SolverConfig::default();
    let h = 1e-3;
    run(
        &[
            ("derivative_identity_central", 1e-4 * scale),
            ("derivative_identity_first_order", 0.0),
            ("projection_inequality", 1e-4 * scale),
        ],
        &cases,
        |(p, g, x, v)| {
            let c = ctx(BoundaryMap::Lorentz(g.clone()), grid_n, &solver)?;
            let central = derivative_identity_residual(&c, x, v, *p, h, FdScheme::Central)?;
            let central2 = derivative_identity_residual(&c, x, v, *p, h / 2.0, FdScheme::Central)?;
            let fwd = derivative_identity_residual(&c, x, v, *p, h, FdScheme::Forward)?;
            let fwd2 = derivative_identity_residual(&c, x, v, *p, h / 2.0, FdScheme::Forward)?;
            let ratio = fwd2.residual / fwd.residual;
            let order = (0.3 - ratio).max(ratio - 0.7).max(0.0);
            let (lhs, rhs) = central.projection_bound;
            Ok((
                vec![
                    central.residual,
                    if order.is_nan() { f64::INFINITY } else { order },
                    (lhs - rhs).max(0.0),
                ],
                json!({
                    "central": central.residual,
                    "central_half": central2.residual,
                    "forward": fwd.residual,
                    "forward_half": fwd2.residual,
                    "forward_ratio": ratio,
                    "projection": [lhs, rhs],
                }),
            ))
        },
    )
}

/// Main inequalities, Lipschitz ratio, isometry and inverse consistency at
/// `b = 1` for Lorentz-induced maps.
pub fn audits(rng: &mut ChaCha8Rng, maps: usize, pairs: usize, grid_n: usize, p: f64, scale: f64) -> Checked {
    let mut cases = Vec::new();
    for m in 0..maps {
        let dim = 2 + m % 2;
        let g = Lorentz::random(rng, dim, 1.5);
        for _ in 0..pairs {
            let x = sample::point_in_ball(rng, dim, 2.0);
            let y = sample::point_in_ball(rng, dim, 2.0);
            cases.push((
                json!({"map": m, "matrix": g.rows(), "x": pt(&x), "y": pt(&y)}),
                (g.clone(), x, y),
            ));
        }
    }
    let solver = SolverConfig::default();
    run(
        &[
            ("main_inequality", 1e-9 * scale),
            ("lipschitz_ratio", 1e-8 * scale),
            ("isometry", 1e-6 * scale),
            ("inverse_consistency", 1e-6 * scale),
        ],
        &cases,
        |(g, x, y)| {
            let c = ctx(BoundaryMap::Lorentz(g.clone()), grid_n, &solver)?;
            let ci = ctx(BoundaryMap::Lorentz(g.inverse()), grid_n, &solver)?;
            let pair = [(x.clone(), y.clone())];
            let main = main_inequality_audit(&c, &pair, p)?;
            let lip = lipschitz_audit(&c, &pair)?;
            let inv = inverse_consistency(&c, &ci, std::slice::from_ref(x))?;
            let row = &main[0];
            Ok((
                vec![
                    row.violation,
                    (lip.max_ratio - 1.0).max(0.0),
                    lip.max_isometry_error,
                    inv,
                ],
                json!({
                    "distance": dist(x, y),
                    "upper": [row.upper.0, row.upper.1],
                    "lower": [row.lower.0, row.lower.1],
                    "lipschitz_ratio": lip.max_ratio,
                    "isometry_error": lip.max_isometry_error,
                    "inverse_error": inv,
                }),
            ))
        },
    )
}

/// Perturbed maps are rejected by the cross-ratio gate; Lorentz maps pass.
pub fn moebius_gate(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Checked {
    let cases: Vec<_> = (0..n)
        .map(|i| {
            let dim = 2 + i % 2;
            let amp = rng.gen_range(0.1..0.3);
            let mode = 1 + i % 3;
            let mut coeffs = vec![0.0; mode];
            coeffs[mode - 1] = if rng.gen::<bool>() { amp } else { -amp };
            let base = Lorentz::random(rng, dim, 1.5);
            let f = BoundaryMap::Perturbed {
                base: base.clone(),
                warp: FourierWarp::new(coeffs).expect("monotone warp"),
            };
            let input = json!({"perturbed": serde_json::to_value(&f).expect("maps serialize")});
            (input, (f, base))
        })
        .collect();
    run(
        &[("perturbed_map_rejected", 0.0), ("lorentz_map_accepted", 1e-9 * scale)],
        &cases,
        |(f, base)| {
            let dim = f.dim();
            let deviation = cross_ratio_deviation(f, &probe_quadruples(dim))?;
            let rejected = matches!(
                ExtensionContext::new(
                    f.clone(),
                    uniform_boundary_grid(32, &SpacePoint::origin(dim))?,
                    ModelConfig::new(dim, 1.0)?,
                    SolverConfig::default(),
                ),
                Err(Error::NotMoebius { .. })
            );
            let miss = if rejected && deviation > 1e-3 { 0.0 } else { 1.0 };
            let lorentz = cross_ratio_deviation(&BoundaryMap::Lorentz(base.clone()), &probe_quadruples(dim))?;
            Ok((
                vec![miss, lorentz],
                json!({"deviation": deviation, "rejected": rejected, "lorentz_deviation": lorentz}),
            ))
        },
    )
}
