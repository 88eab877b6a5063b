use hyperbary::geometry::*;
use hyperbary::hull::{hull_certificate, HullCertificate};
use hyperbary::measure::{flow, flow_project, pushforward_qx, uniform_boundary_grid};
use hyperbary::moebius::{geodesic_conjugacy, BoundaryMap, MoebiusMap};
use hyperbary::solver::{minimize, ObjectiveSpec, SolverConfig};
use hyperbary::{BoundaryDirection, Lorentz, SpaceMeasure, SpacePoint, TangentMeasure, UnitTangent};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn point(dim: usize) -> impl Strategy<Value = SpacePoint> {
    prop::collection::vec(-2.0..2.0f64, dim).prop_map(|v| SpacePoint::from_spatial(&v))
}

fn boundary(dim: usize) -> impl Strategy<Value = BoundaryDirection> {
    prop::collection::vec(-1.0..1.0f64, dim)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        .prop_map(|v| BoundaryDirection::from_euclidean(&v))
}

fn tangent(dim: usize) -> impl Strategy<Value = UnitTangent> {
    (point(dim), boundary(dim)).prop_map(|(x, xi)| direction_to(&x, &xi))
}

fn close(a: &SpacePoint, b: &SpacePoint) -> f64 {
    dist(a, b)
}

/// `phi(m) <= (sinh(a+s) phi(e2) + sinh(a-s) phi(e1)) / sinh(2a)` along the
/// geodesic through `u`, endpoints at `-a` and `a`; returns the relative excess.
fn chord_excess(u: &UnitTangent, a: f64, s: f64, phi: impl Fn(&SpacePoint) -> f64) -> f64 {
    let e1 = phi(&geodesic_point(u, -a));
    let e2 = phi(&geodesic_point(u, a));
    let m = phi(&geodesic_point(u, s));
    let bound = ((a + s).sinh() * e2 + (a - s).sinh() * e1) / (2.0 * a).sinh();
    (m - bound) / bound.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distance_is_a_metric(x in point(3), y in point(3), z in point(3)) {
        prop_assert!((dist(&x, &y) - dist(&y, &x)).abs() < 1e-12);
        prop_assert!(dist(&x, &z) <= dist(&x, &y) + dist(&y, &z) + 1e-10);
        prop_assert!(dist(&x, &x) < 1e-7);
    }

    #[test]
    fn geodesics_are_unit_speed(u in tangent(3), s in -3.0..3.0f64, t in -3.0..3.0f64) {
        let d = dist(&geodesic_point(&u, s), &geodesic_point(&u, t));
        prop_assert!((d - (s - t).abs()).abs() < 1e-9);
    }

    #[test]
    fn busemann_cocycle_and_bound(x in point(2), y in point(2), z in point(2), xi in boundary(2)) {
        let lhs = busemann(&x, &y, &xi) + busemann(&y, &z, &xi);
        prop_assert!((lhs - busemann(&x, &z, &xi)).abs() < 1e-9);
        prop_assert!(busemann(&x, &y, &xi).abs() <= dist(&x, &y) + 1e-10);
    }

    #[test]
    fn endpoint_round_trips(x in point(3), xi in boundary(3)) {
        let u = direction_to(&x, &xi);
        prop_assert!(boundary_endpoint(&u).chord(&xi) < 1e-9);
        let back = antipode(&x, &antipode(&x, &xi));
        prop_assert!(back.chord(&xi) < 1e-9);
        let anti = boundary_endpoint(&flip(&u));
        prop_assert!(anti.chord(&antipode(&x, &xi)) < 1e-12);
        prop_assert!((visual_metric(&x, &xi, &antipode(&x, &xi)) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flow_is_a_group_action(u in tangent(2), s in -2.0..2.0f64, t in -2.0..2.0f64) {
        let a = geodesic_flow(&geodesic_flow(&u, s), t);
        let b = geodesic_flow(&u, s + t);
        prop_assert!(close(a.base(), b.base()) < 1e-9);
        prop_assert!((a.dir() - b.dir()).amax() < 1e-8 * (s + t).abs().cosh());
        let ff = flip(&flip(&u));
        prop_assert_eq!(ff.dir(), u.dir());
    }

    #[test]
    fn visual_metric_transforms_by_busemann(
        x in point(2), y in point(2), xi in boundary(2), eta in boundary(2)
    ) {
        let rx = visual_metric(&x, &xi, &eta);
        let ry = visual_metric(&y, &xi, &eta);
        let pred = rx * rx * busemann(&x, &y, &xi).exp() * busemann(&x, &y, &eta).exp();
        prop_assert!((ry * ry - pred).abs() < 1e-10);
        prop_assert!(rx <= 1.0);
    }

    #[test]
    fn busemann_angle_identity(x in point(3), y in point(3), xi in boundary(3)) {
        let d = dist(&x, &y);
        prop_assume!(d > 1e-6);
        let theta = angle_between(&log_map(&x, &y), direction_to(&x, &xi).dir());
        let rhs = d.cosh() - d.sinh() * theta.cos();
        let lhs = busemann(&y, &x, &xi).exp();
        prop_assert!((lhs - rhs).abs() < 1e-9 * rhs.max(1.0), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn cross_ratio_is_basepoint_free(
        x in point(2), q in prop::array::uniform4(0.0..std::f64::consts::TAU)
    ) {
        let pts: Vec<_> = q.iter().map(|t| BoundaryDirection::from_angle(2, *t)).collect();
        let at_o = cross_ratio(&pts[0], &pts[1], &pts[2], &pts[3]);
        prop_assume!(at_o.is_ok());
        let at_o = at_o.unwrap();
        prop_assume!(at_o < 1e6 && at_o > 1e-6);
        let at_x = cross_ratio_at(&x, &pts[0], &pts[1], &pts[2], &pts[3]).unwrap();
        prop_assert!((at_o.ln() - at_x.ln()).abs() < 1e-9);
    }

    #[test]
    fn powers_of_cosh_distance_are_f_convex(
        u in tangent(2), y in point(2), a in 0.05..1.5f64, frac in -1.0..1.0f64,
        p in prop::sample::select(vec![1.0, 2.0, 5.0, 10.0])
    ) {
        let s = a * frac;
        let e = chord_excess(&u, a, s, |z| cosh_dist(z, &y).powf(p));
        prop_assert!(e <= 1e-9, "excess {}", e);
    }

    #[test]
    fn powers_of_exp_busemann_are_f_convex(
        u in tangent(2), y in point(2), xi in boundary(2), a in 0.05..1.5f64, frac in -1.0..1.0f64,
        p in prop::sample::select(vec![1.0, 2.0, 5.0, 10.0])
    ) {
        let s = a * frac;
        let e = chord_excess(&u, a, s, |z| (p * busemann(z, &y, &xi)).exp());
        prop_assert!(e <= 1e-9, "excess {}", e);
    }

    #[test]
    fn busemann_gradient_matches_differences(z in point(3), eta in boundary(3), dir in boundary(3)) {
        let y = SpacePoint::origin(3);
        let w = tangent_project(&z, dir.coords());
        let w = &w / tangent_norm(&w);
        let h = 1e-5;
        let fd = (busemann(&exp_map(&z, &(&w * h)), &y, &eta)
            - busemann(&exp_map(&z, &(&w * -h)), &y, &eta)) / (2.0 * h);
        let g = minkowski(&busemann_gradient(&z, &eta), &w);
        prop_assert!((fd - g).abs() < 1e-6);
        let h = 1e-3;
        let f = |t: f64| busemann(&exp_map(&z, &(&w * t)), &y, &eta);
        let second = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        prop_assert!((second - busemann_hessian(&z, &eta, &w)).abs() < 1e-5);
    }

    #[test]
    fn flow_projection_semigroup(
        us in prop::collection::vec(tangent(2), 1..5), s in 0.0..3.0f64, t in 0.0..3.0f64
    ) {
        let nu = TangentMeasure::uniform(us).unwrap();
        let a = flow_project(&flow(&nu, s), t);
        let b = flow_project(&nu, s + t);
        prop_assert_eq!(a.weights(), nu.weights());
        for (p, q) in a.atoms().iter().zip(b.atoms()) {
            prop_assert!(dist(p, q) < 1e-9);
        }
        for (p, q) in flow_project(&nu, t).atoms().iter().zip(nu.atoms()) {
            prop_assert!((dist(p, q.base()) - t).abs() < 1e-9);
        }
    }

    #[test]
    fn qx_pushforward_inverts_endpoints(x in point(3), n in 2usize..20) {
        let mu = uniform_boundary_grid(n, &SpacePoint::origin(3)).unwrap();
        let nu = pushforward_qx(&mu, &x);
        prop_assert_eq!(nu.weights(), mu.weights());
        for (u, xi) in nu.atoms().iter().zip(mu.atoms()) {
            prop_assert!(dist(u.base(), &x) < 1e-12);
            prop_assert!(boundary_endpoint(u).chord(xi) < 1e-9);
        }
    }

    #[test]
    fn hull_certificates_are_sound(pts in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 1..12)) {
        let pts: Vec<DVector<f64>> = pts.into_iter().map(DVector::from_vec).collect();
        match hull_certificate(&pts, 1e-9) {
            HullCertificate::Feasible { weights, residual } => {
                let mut s = DVector::zeros(3);
                for (w, p) in weights.iter().zip(&pts) {
                    prop_assert!(*w >= 0.0);
                    s += p * *w;
                }
                prop_assert!(s.norm() <= 1e-9 && residual <= 1e-9);
            }
            HullCertificate::Infeasible { separator, margin } => {
                prop_assert!(margin > 0.0);
                for p in &pts {
                    prop_assert!(p.dot(&separator) >= margin - 1e-12);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn minimizer_is_unique(
        atoms in prop::collection::vec(point(2), 2..5), s1 in point(2), s2 in point(2),
        p in prop::sample::select(vec![1.0, 2.0, 7.0])
    ) {
        let spec = ObjectiveSpec::cosh(SpaceMeasure::uniform(atoms).unwrap(), p).unwrap();
        let a = minimize(&spec, &SolverConfig::default().with_initial(s1));
        let b = minimize(&spec, &SolverConfig::default().with_initial(s2));
        prop_assert!(a.converged && b.converged);
        prop_assert!(dist(&a.minimizer, &b.minimizer) < 1e-6);
    }

    #[test]
    fn minimizer_is_equivariant(atoms in prop::collection::vec(point(3), 2..5), seed in any::<u64>()) {
        let g = Lorentz::random(&mut ChaCha8Rng::seed_from_u64(seed), 3, 1.5);
        let mu = SpaceMeasure::uniform(atoms).unwrap();
        let moved = mu.map(|x| g.apply_point(x));
        let c = minimize(&ObjectiveSpec::cosh(mu, 3.0).unwrap(), &SolverConfig::default());
        let gc = minimize(&ObjectiveSpec::cosh(moved, 3.0).unwrap(), &SolverConfig::default());
        prop_assert!(dist(&g.apply_point(&c.minimizer), &gc.minimizer) < 1e-8);
    }

    #[test]
    fn minimizer_is_stable(atoms in prop::collection::vec(point(2), 2..5), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let delta = 1e-4;
        let mu = SpaceMeasure::uniform(atoms).unwrap();
        let moved = mu.map(|x| {
            let v = tangent_project(x, hyperbary::sample::boundary_point(&mut rng, 2).coords());
            exp_map(x, &(&v * (delta / tangent_norm(&v))))
        });
        let a = minimize(&ObjectiveSpec::cosh(mu, 2.0).unwrap(), &SolverConfig::default());
        let b = minimize(&ObjectiveSpec::cosh(moved, 2.0).unwrap(), &SolverConfig::default());
        prop_assert!(dist(&a.minimizer, &b.minimizer) <= 10.0 * delta);
    }

    #[test]
    fn lorentz_conjugacy_is_the_differential(u in tangent(3), seed in any::<u64>(), t in -2.0..2.0f64) {
        let g = Lorentz::random(&mut ChaCha8Rng::seed_from_u64(seed), 3, 1.5);
        let f = MoebiusMap::new(BoundaryMap::Lorentz(g.clone())).unwrap();
        let phi = geodesic_conjugacy(&f, &u).unwrap();
        let dg = g.apply_tangent(&u);
        prop_assert!(dist(phi.base(), dg.base()) < 1e-8);
        let a = geodesic_conjugacy(&f, &geodesic_flow(&u, t)).unwrap();
        let b = geodesic_flow(&phi, t);
        prop_assert!(dist(a.base(), b.base()) < 1e-8);
        let c = geodesic_conjugacy(&f, &flip(&u)).unwrap();
        prop_assert!((c.dir() + phi.dir()).amax() < 1e-7);
    }
}
