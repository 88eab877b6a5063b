//! Brute-force minimization over the disk, used to cross-check the
//! Riemannian solver in H^2. It evaluates objectives directly from distances
//! and Busemann functions and shares no code with the solver.
//!
//! Search runs in Klein coordinates, where geodesics are straight chords, so
//! a geodesically convex objective is convex in the plane. This makes nested
//! golden-section search exact even for nonsmooth objectives such as a max.

use hyperbary::geometry::{busemann, cosh_dist};
use hyperbary::{SpacePoint, UnitTangent};

fn from_klein(k: [f64; 2]) -> SpacePoint {
    let s = (1.0 - k[0] * k[0] - k[1] * k[1]).sqrt();
    SpacePoint::from_spatial(&[k[0] / s, k[1] / s])
}

/// Minimizes a unimodal `f` on `[lo, hi]` to absolute width `tol`.
fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut a = hi - R * (hi - lo);
    let mut b = lo + R * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - R * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + R * (hi - lo);
            fb = f(b);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Minimizes `f` over the Poincare disk `|w| < radius`: a grid with spacing
/// `step` (in Klein coordinates) locates the basin, then nested golden-section
/// search over a window around the best grid point refines it. The window is
/// recentred until the minimizer is interior. `f` must be geodesically convex.
pub fn grid_minimize(f: impl Fn(&SpacePoint) -> f64, radius: f64, step: f64) -> SpacePoint {
    let rk = 2.0 * radius / (1.0 + radius * radius);
    let eval = |k: [f64; 2]| -> f64 {
        if k[0] * k[0] + k[1] * k[1] > rk * rk {
            f64::INFINITY
        } else {
            f(&from_klein(k))
        }
    };
    let n = (rk / step).ceil() as i64;
    let mut best = ([0.0, 0.0], f64::INFINITY);
    for i in -n..=n {
        for j in -n..=n {
            let k = [i as f64 * step, j as f64 * step];
            let v = eval(k);
            if v < best.1 {
                best = (k, v);
            }
        }
    }
    let mut center = best.0;
    let half = 4.0 * step;
    for _ in 0..50 {
        let x0 = (center[0] - half).max(-rk);
        let x1 = (center[0] + half).min(rk);
        let inner = |x: f64| -> (f64, f64) {
            let ymax = (rk * rk - x * x).max(0.0).sqrt();
            let y0 = (center[1] - half).max(-ymax);
            let y1 = (center[1] + half).min(ymax);
            if y0 >= y1 {
                return (y0.min(ymax), eval([x, y0.min(ymax)]));
            }
            golden(|y| eval([x, y]), y0, y1, 1e-14)
        };
        let (x, _) = golden(|x| inner(x).1, x0, x1, 1e-14);
        let (y, _) = inner(x);
        let at_edge = |v: f64, c: f64, lim: f64| {
            (v - (c - half)).abs() < 1e-9 && c - half > -lim || (v - (c + half)).abs() < 1e-9 && c + half < lim
        };
        let moved = at_edge(x, center[0], rk) || at_edge(y, center[1], rk);
        center = [x, y];
        if !moved {
            break;
        }
    }
    from_klein(center)
}

/// `sum w_i cosh^p d(z, y_i)`, or `max cosh d` for `p = inf`.
pub fn cosh_objective<'a>(atoms: &'a [SpacePoint], weights: &'a [f64], p: f64) -> impl Fn(&SpacePoint) -> f64 + 'a {
    move |z| {
        if p.is_infinite() {
            atoms.iter().map(|y| cosh_dist(z, y)).fold(0.0, f64::max)
        } else {
            atoms
                .iter()
                .zip(weights)
                .map(|(y, w)| w * cosh_dist(z, y).powf(p))
                .sum()
        }
    }
}

/// `sum w_i exp(p B(z, base_i, end_i))`, or the max of `B` for `p = inf`.
pub fn busemann_objective<'a>(
    atoms: &'a [UnitTangent],
    weights: &'a [f64],
    p: f64,
) -> impl Fn(&SpacePoint) -> f64 + 'a {
    move |z| {
        let b = |u: &UnitTangent| busemann(z, u.base(), &hyperbary::geometry::boundary_endpoint(u));
        if p.is_infinite() {
            atoms.iter().map(b).fold(f64::NEG_INFINITY, f64::max)
        } else {
            atoms.iter().zip(weights).map(|(u, w)| w * (p * b(u)).exp()).sum()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hyperbary::geometry::dist;

    #[test]
    fn finds_a_known_minimum() {
        let y = SpacePoint::from_poincare(&[0.3, -0.2]);
        let z = grid_minimize(|z| cosh_dist(z, &y), 0.9, 1e-2);
        assert!(dist(&z, &y) < 1e-8);
    }

    #[test]
    fn midpoint_of_two_points() {
        let a = SpacePoint::from_spatial(&[1.0, 0.0]);
        let b = SpacePoint::from_spatial(&[-1.0, 0.0]);
        let atoms = [a, b];
        let z = grid_minimize(cosh_objective(&atoms, &[0.5, 0.5], f64::INFINITY), 0.9, 1e-2);
        let d = dist(&z, &SpacePoint::origin(2));
        // a smooth minimum is only resolved to about sqrt(eps)
        assert!(d < 1e-7, "{d}");
    }
}
