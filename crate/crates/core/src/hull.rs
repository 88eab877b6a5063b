//! Quadratic programs over the probability simplex, solved by Wolfe's
//! active-set method. The min-norm-point problem (convex hull membership of
//! the origin) is the special case with no linear term.

use nalgebra::{DMatrix, DVector};

/// Solution of `min 1/2 |sum l_i a_i|^2 - sum l_i c_i` over the simplex.
#[derive(Clone, Debug)]
pub struct SimplexQp {
    /// Full weight vector, one entry per input point.
    pub weights: Vec<f64>,
    /// `sum l_i a_i`.
    pub point: DVector<f64>,
    /// Objective value.
    pub value: f64,
    pub iterations: usize,
}

enum Affine {
    Minimizer(Vec<f64>),
    /// `d` with `sum d = 0` and `sum d_k a_k = 0`.
    Dependent(Vec<f64>),
}

fn affine_step(points: &[DVector<f64>], lin: &[f64], support: &[usize]) -> Affine {
    let m = support.len();
    let dim = points[0].len();
    let lifted = DMatrix::from_fn(dim + 1, m, |r, c| if r < dim { points[support[c]][r] } else { 1.0 });
    let gram = lifted.transpose() * &lifted;
    let eig = gram.clone().symmetric_eigen();
    let (imin, emin) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let emax = eig.eigenvalues.amax();
    if m > dim + 1 || emin <= 1e-13 * emax {
        return Affine::Dependent(eig.eigenvectors.column(imin).iter().copied().collect());
    }
    let mut k = DMatrix::zeros(m + 1, m + 1);
    let mut rhs = DVector::zeros(m + 1);
    for r in 0..m {
        for c in 0..m {
            k[(r, c)] = gram[(r, c)] - 1.0;
        }
        k[(r, m)] = 1.0;
        k[(m, r)] = 1.0;
        rhs[r] = lin[support[r]];
    }
    rhs[m] = 1.0;
    match k.full_piv_lu().solve(&rhs) {
        Some(sol) => Affine::Minimizer(sol.iter().take(m).copied().collect()),
        None => Affine::Dependent(eig.eigenvectors.column(imin).iter().copied().collect()),
    }
}

/// Minimizes `1/2 |A l|^2 - c . l` over `l >= 0, sum l = 1`, where the
/// columns of `A` are `points`.
pub fn simplex_qp(points: &[DVector<f64>], lin: &[f64]) -> SimplexQp {
    assert!(!points.is_empty(), "simplex_qp needs at least one point");
    assert_eq!(points.len(), lin.len());
    let n = points.len();
    let dim = points[0].len();
    let scale = points
        .iter()
        .map(|a| a.norm_squared())
        .chain(lin.iter().map(|c| c.abs()))
        .fold(1.0, f64::max);
    let tol = 1e-15 * scale;

    let start = (0..n)
        .max_by(|&a, &b| {
            let fa = lin[a] - 0.5 * points[a].norm_squared();
            let fb = lin[b] - 0.5 * points[b].norm_squared();
            fa.total_cmp(&fb)
        })
        .unwrap();
    let mut support = vec![start];
    let mut lam = vec![1.0];
    let mut iterations = 0;

    let combine = |support: &[usize], lam: &[f64]| {
        let mut x = DVector::zeros(dim);
        for (&i, &l) in support.iter().zip(lam) {
            x += &points[i] * l;
        }
        x
    };

    'major: for _ in 0..(20 * n + 100) {
        iterations += 1;
        let x = combine(&support, &lam);
        let grad: Vec<f64> = (0..n).map(|j| points[j].dot(&x) - lin[j]).collect();
        let current: f64 = support.iter().zip(&lam).map(|(&i, &l)| l * grad[i]).sum();
        let (best, gbest) = grad
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if gbest >= current - tol || support.contains(&best) {
            break;
        }
        support.push(best);
        lam.push(0.0);

        loop {
            let alpha = match affine_step(points, lin, &support) {
                Affine::Minimizer(alpha) => alpha,
                Affine::Dependent(mut d) => {
                    // x is constant along d; move to decrease -c.l
                    let slope: f64 = support.iter().zip(&d).map(|(&i, dk)| -lin[i] * dk).sum();
                    if slope > 0.0 || (slope == 0.0 && d.last().copied().unwrap_or(0.0) < 0.0) {
                        d.iter_mut().for_each(|x| *x = -*x);
                    }
                    let mut theta = f64::INFINITY;
                    for (&l, &dk) in lam.iter().zip(&d) {
                        if dk < -1e-14 {
                            theta = theta.min(l / -dk);
                        }
                    }
                    if !theta.is_finite() {
                        support.pop();
                        lam.pop();
                        break 'major;
                    }
                    lam.iter().zip(&d).map(|(l, dk)| l + theta * dk).collect()
                }
            };
            if alpha.iter().all(|&a| a > 0.0) {
                lam = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (&l, &a) in lam.iter().zip(&alpha) {
                if a <= 0.0 && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lam.iter_mut().zip(&alpha) {
                *l += theta * (a - *l);
            }
            let mut keep_s = Vec::with_capacity(support.len());
            let mut keep_l = Vec::with_capacity(support.len());
            for (&i, &l) in support.iter().zip(&lam) {
                if l > 1e-15 {
                    keep_s.push(i);
                    keep_l.push(l);
                }
            }
            if keep_s.is_empty() {
                break 'major;
            }
            let total: f64 = keep_l.iter().sum();
            support = keep_s;
            lam = keep_l.into_iter().map(|l| l / total).collect();
            if support.len() == 1 {
                break;
            }
        }
    }

    let point = combine(&support, &lam);
    let mut weights = vec![0.0; n];
    let mut value = 0.5 * point.norm_squared();
    for (&i, &l) in support.iter().zip(&lam) {
        weights[i] = l;
        value -= l * lin[i];
    }
    SimplexQp {
        weights,
        point,
        value,
        iterations,
    }
}

/// Point of the convex hull of `points` nearest the origin.
pub fn min_norm_point(points: &[DVector<f64>]) -> SimplexQp {
    simplex_qp(points, &vec![0.0; points.len()])
}

/// Outcome of testing whether the origin lies in a convex hull.
#[derive(Clone, Debug)]
pub enum HullCertificate {
    /// Convex weights with `|sum l_i d_i| = residual <= tol`.
    Feasible { weights: Vec<f64>, residual: f64 },
    /// Unit `separator` with `<d_i, separator> >= margin > 0` for every point.
    Infeasible { separator: DVector<f64>, margin: f64 },
}

impl HullCertificate {
    pub fn is_feasible(&self) -> bool {
        matches!(self, HullCertificate::Feasible { .. })
    }
}

/// Decides whether the origin lies in the convex hull of `points` up to `tol`.
pub fn hull_certificate(points: &[DVector<f64>], tol: f64) -> HullCertificate {
    let qp = min_norm_point(points);
    let r = qp.point.norm();
    if r <= tol {
        HullCertificate::Feasible {
            weights: qp.weights,
            residual: r,
        }
    } else {
        let separator = &qp.point / r;
        let margin = points.iter().map(|d| d.dot(&separator)).fold(f64::INFINITY, f64::min);
        HullCertificate::Infeasible { separator, margin }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn triangle_around_origin() {
        let pts = vec![v(&[1.0, 0.0]), v(&[-0.5, 0.8]), v(&[-0.5, -0.8])];
        let c = hull_certificate(&pts, 1e-12);
        let HullCertificate::Feasible { weights, residual } = c else {
            panic!("expected feasible")
        };
        assert!(residual < 1e-14);
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((weights[1] - weights[2]).abs() < 1e-14);
    }

    #[test]
    fn segment_off_origin() {
        let pts = vec![v(&[1.0, 1.0]), v(&[1.0, -1.0]), v(&[2.0, 0.0])];
        let c = hull_certificate(&pts, 1e-12);
        let HullCertificate::Infeasible { separator, margin } = c else {
            panic!("expected infeasible")
        };
        assert!((separator - v(&[1.0, 0.0])).norm() < 1e-14);
        assert!((margin - 1.0).abs() < 1e-14);
    }

    #[test]
    fn many_points_on_a_circle() {
        let pts: Vec<_> = (0..360)
            .map(|k| {
                let a = k as f64 * std::f64::consts::PI / 180.0;
                v(&[a.cos(), a.sin()])
            })
            .collect();
        assert!(hull_certificate(&pts, 1e-12).is_feasible());
        let half: Vec<_> = pts[10..170].to_vec();
        let HullCertificate::Infeasible { margin, .. } = hull_certificate(&half, 1e-12) else {
            panic!()
        };
        assert!(margin > 0.0);
    }

    #[test]
    fn linear_term_matches_kkt() {
        // min over segment [a, b] of 1/2|x|^2 - c.l with a=(1,0), b=(-1,0)
        let pts = vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0])];
        let qp = simplex_qp(&pts, &[0.5, 0.0]);
        // x = 2l - 1, objective 1/2(2l-1)^2 - l/2 -> l = 5/8
        assert!((qp.weights[0] - 0.625).abs() < 1e-14);
        let qp = simplex_qp(&pts, &[5.0, 0.0]);
        assert_eq!(qp.weights[0], 1.0);
    }

    #[test]
    fn agrees_with_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..8);
            let pts: Vec<_> = (0..n)
                .map(|_| v(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]))
                .collect();
            let lin: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let qp = simplex_qp(&pts, &lin);
            // optimality: no vertex improves the directional derivative
            let grad: Vec<f64> = pts.iter().zip(&lin).map(|(a, c)| a.dot(&qp.point) - c).collect();
            let cur: f64 = qp.weights.iter().zip(&grad).map(|(l, g)| l * g).sum();
            for g in &grad {
                assert!(*g >= cur - 1e-10);
            }
        }
    }
}
