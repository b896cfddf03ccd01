//! Probabilists' Hermite polynomials, Hermite coefficients of subordinating
//! functions, and Hermite-rank detection.
//!
//! Coefficients are taken against the standard Gaussian measure p(u)du with
//! the orthonormal family H_sigma/sqrt(sigma!), so C_sigma = E[h(Z) H_sigma(Z)]/sqrt(sigma!).

use crate::error::{Error, Result};

/// Stability cap on the polynomial degree exposed through `hermite_poly`.
pub const SIGMA_CAP: usize = 60;

/// Gauss-Hermite node cap for the auto-doubling coefficient quadrature.
const MAX_NODES: usize = 4096;

/// Probabilists' Hermite polynomial H_sigma(u) via the three-term recurrence
/// H_{sigma+1} = u H_sigma - sigma H_{sigma-1}.
pub fn hermite_poly(sigma: usize, u: f64) -> Result<f64> {
    if sigma > SIGMA_CAP {
        return Err(Error::domain(
            "hermite_poly",
            format!("degree {} above stability cap {}", sigma, SIGMA_CAP),
        ));
    }
    let (mut prev, mut cur) = (1.0, u);
    if sigma == 0 {
        return Ok(1.0);
    }
    for k in 1..sigma {
        let next = u * cur - (k as f64) * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Orthonormal Hermite values h_k(u) = H_k(u)/sqrt(k!) for k = 0..=kmax.
fn orthonormal_hermite_values(kmax: usize, u: f64) -> Vec<f64> {
    let mut vals = Vec::with_capacity(kmax + 1);
    vals.push(1.0);
    if kmax == 0 {
        return vals;
    }
    vals.push(u);
    for k in 1..kmax {
        let kf = k as f64;
        let next = (u * vals[k] - kf.sqrt() * vals[k - 1]) / (kf + 1.0).sqrt();
        vals.push(next);
    }
    vals
}

/// Gauss-Hermite rule for the standard Gaussian measure p(u)du: nodes are the
/// roots of the orthonormal H_n/sqrt(n!); weights sum to 1.
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Orthonormal recurrence value h_n(u) with periodic rescaling so the result
/// keeps the correct sign (and root locations) even where h_n overflows f64.
fn ortho_rescaled(n: usize, u: f64) -> f64 {
    let mut prev = 1.0f64;
    if n == 0 {
        return prev;
    }
    let mut cur = u;
    for k in 1..n {
        let kf = k as f64;
        let next = (u * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            prev *= 1e-150;
            cur *= 1e-150;
        }
    }
    cur
}

/// Damped recurrence q_k(u) = (H_k(u)/sqrt(k!)) e^{-u^2/4}; returns the
/// Christoffel sum sum_{k<n} q_k(u)^2 for the weight formula. Underflows to 0
/// only where the true weight is itself below f64 range.
fn christoffel_sum(n: usize, u: f64) -> f64 {
    let mut prev = (-u * u / 4.0).exp();
    let mut sum = prev * prev;
    if n == 1 {
        return sum;
    }
    let mut cur = u * prev;
    sum += cur * cur;
    for k in 1..n - 1 {
        let kf = k as f64;
        let next = (u * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt();
        prev = cur;
        cur = next;
        sum += cur * cur;
    }
    sum
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_NODES {
            return Err(Error::domain(
                "gauss_hermite",
                format!("node count {} outside 1..={}", n, MAX_NODES),
            ));
        }
        // All roots lie inside |u| < sqrt(4n + 2); scan the positive half-line
        // for sign changes of q_n, refine by bisection, and mirror.
        let radius = (4.0 * n as f64 + 2.0).sqrt();
        let step = 1.0 / (n as f64).sqrt();
        let mut positive_roots = Vec::with_capacity(n / 2);
        let mut u_prev = if n % 2 == 0 { 0.0 } else { step * 1e-6 };
        let mut q_prev = ortho_rescaled(n, u_prev);
        let mut u = u_prev;
        while u < radius {
            u += step;
            let q = ortho_rescaled(n, u);
            if q_prev != 0.0 && q.signum() != q_prev.signum() {
                let (mut lo, mut hi) = (u_prev, u);
                let mut qlo = q_prev;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let qm = ortho_rescaled(n, mid);
                    if qm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if qm.signum() == qlo.signum() {
                        lo = mid;
                        qlo = qm;
                    } else {
                        hi = mid;
                    }
                }
                positive_roots.push(0.5 * (lo + hi));
            }
            u_prev = u;
            q_prev = q;
        }
        if positive_roots.len() != n / 2 {
            return Err(Error::Accuracy(format!(
                "gauss_hermite root scan found {} of {} positive roots",
                positive_roots.len(),
                n / 2
            )));
        }

        let mut nodes = Vec::with_capacity(n);
        for &r in positive_roots.iter().rev() {
            nodes.push(-r);
        }
        if n % 2 == 1 {
            nodes.push(0.0);
        }
        nodes.extend(positive_roots.iter());

        // Christoffel weights: w_i = 1/sum_{k<n} htilde_k(x_i)^2, evaluated in
        // the damped variables as q_0^2 / sum q_k^2.
        let weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                let sum = christoffel_sum(n, x);
                let q0 = (-x * x / 4.0).exp();
                if sum > 0.0 {
                    q0 * q0 / sum
                } else {
                    0.0 // true weight below f64 range at extreme nodes
                }
            })
            .collect();
        Ok(GaussHermite { nodes, weights })
    }

    /// Quadrature of E[g(Z)] for standard normal Z.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }
}

/// Subordinating function applied pointwise to a unit-variance Gaussian field.
#[derive(Debug, Clone, PartialEq)]
pub enum SubordinatorKind {
    /// h(u) = u.
    Identity,
    /// h(u) = H_m(u) (un-normalized, so C_m = sqrt(m!)).
    PureHermite(usize),
    /// h(u) = sign(u).
    Sign,
    /// Piecewise-linear interpolant through (u, h(u)) samples, constant
    /// extrapolation outside the sampled range.
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone)]
pub struct Subordinator {
    pub kind: SubordinatorKind,
    /// C_sigma for sigma = 0..=sigma_max.
    pub coeffs: Vec<f64>,
    pub rank: usize,
    pub l2_norm: f64,
}

/// Hermite coefficients C_sigma, sigma = 0..=sigma_max, of a square-integrable
/// h by Gauss-Hermite quadrature with node auto-doubling from 64 until no
/// coefficient moves by more than `tol` (then one extra doubling as margin).
pub fn hermite_coeffs<F: Fn(f64) -> f64>(h: F, sigma_max: usize, tol: f64) -> Result<Vec<f64>> {
    if sigma_max > SIGMA_CAP {
        return Err(Error::domain(
            "hermite_coeffs",
            format!("sigma_max {} above stability cap {}", sigma_max, SIGMA_CAP),
        ));
    }
    let eval = |n: usize| -> Result<Vec<f64>> {
        let rule = GaussHermite::new(n)?;
        let mut coeffs = vec![0.0; sigma_max + 1];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let hv = w * h(x);
            if !hv.is_finite() {
                return Err(Error::domain(
                    "hermite_coeffs",
                    format!("subordinator not finite at u = {x}"),
                ));
            }
            for (c, ortho) in coeffs
                .iter_mut()
                .zip(orthonormal_hermite_values(sigma_max, x))
            {
                *c += hv * ortho;
            }
        }
        Ok(coeffs)
    };

    let mut n = 64;
    let mut prev = eval(n)?;
    while n < MAX_NODES {
        n *= 2;
        let cur = eval(n)?;
        let delta = prev
            .iter()
            .zip(&cur)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if delta <= tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Accuracy(format!(
        "hermite_coeffs did not stabilize to {tol:.1e} within {MAX_NODES} nodes"
    )))
}

/// Smallest sigma >= 1 with |C_sigma| > tol.
pub fn hermite_rank(coeffs: &[f64], tol: f64) -> Result<usize> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, c)| c.abs() > tol)
        .map(|(sigma, _)| sigma)
        .ok_or_else(|| {
            Error::domain(
                "hermite_rank",
                "all coefficients below tolerance: subordinator is a.s. constant",
            )
        })
}

/// Closed-form sign coefficients C_{2k+1} = 2 H_{2k}(0) p(0) / sqrt((2k+1)!),
/// generated by the stable ratio recurrence; even coefficients vanish.
pub fn sign_coeffs(sigma_max: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; sigma_max + 1];
    let mut c = (2.0 / std::f64::consts::PI).sqrt(); // C_1 = E|Z|
    let mut sigma = 1;
    while sigma <= sigma_max {
        coeffs[sigma] = c;
        let k = ((sigma + 1) / 2) as f64; // next odd index is 2k+1
        c *= -(2.0 * k - 1.0) / ((2.0 * k) * (2.0 * k + 1.0)).sqrt();
        sigma += 2;
    }
    coeffs
}

impl Subordinator {
    pub fn identity() -> Self {
        let mut coeffs = vec![0.0; 2];
        coeffs[1] = 1.0;
        Subordinator {
            kind: SubordinatorKind::Identity,
            coeffs,
            rank: 1,
            l2_norm: 1.0,
        }
    }

    pub fn pure_hermite(m: usize) -> Result<Self> {
        if m == 0 || m > SIGMA_CAP {
            return Err(Error::domain(
                "pure_hermite",
                format!("rank {} outside 1..={}", m, SIGMA_CAP),
            ));
        }
        let mut coeffs = vec![0.0; m + 1];
        let norm = (1..=m).map(|k| k as f64).product::<f64>().sqrt(); // sqrt(m!)
        coeffs[m] = norm;
        Ok(Subordinator {
            kind: SubordinatorKind::PureHermite(m),
            coeffs,
            rank: m,
            l2_norm: norm,
        })
    }

    pub fn sign(sigma_max: usize) -> Self {
        Subordinator {
            kind: SubordinatorKind::Sign,
            coeffs: sign_coeffs(sigma_max),
            rank: 1,
            l2_norm: 1.0, // E[sign(Z)^2] = 1
        }
    }

    pub fn from_table(points: Vec<(f64, f64)>, sigma_max: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("from_table", "need at least two sample points"));
        }
        let mut pts = points.clone();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let interp = move |u: f64| -> f64 {
            if u <= pts[0].0 {
                return pts[0].1;
            }
            if u >= pts[pts.len() - 1].0 {
                return pts[pts.len() - 1].1;
            }
            let j = pts.partition_point(|p| p.0 <= u);
            let (u0, v0) = pts[j - 1];
            let (u1, v1) = pts[j];
            v0 + (v1 - v0) * (u - u0) / (u1 - u0)
        };
        // Discontinuous/tabulated data: looser stabilization tolerance.
        let coeffs = hermite_coeffs(&interp, sigma_max, 1e-6)?;
        let rank = hermite_rank(&coeffs, 1e-5)?;
        let rule = GaussHermite::new(512)?;
        let l2_norm = rule.integrate(|u| interp(u) * interp(u)).sqrt();
        Ok(Subordinator {
            kind: SubordinatorKind::Table(points),
            coeffs,
            rank,
            l2_norm,
        })
    }

    /// Apply h pointwise.
    pub fn apply(&self, u: f64) -> f64 {
        match &self.kind {
            SubordinatorKind::Identity => u,
            SubordinatorKind::PureHermite(m) => hermite_poly(*m, u).unwrap(),
            SubordinatorKind::Sign => {
                if u >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            SubordinatorKind::Table(points) => {
                let mut pts: Vec<&(f64, f64)> = points.iter().collect();
                pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                if u <= pts[0].0 {
                    return pts[0].1;
                }
                if u >= pts[pts.len() - 1].0 {
                    return pts[pts.len() - 1].1;
                }
                let j = pts.partition_point(|p| p.0 <= u);
                let (u0, v0) = *pts[j - 1];
                let (u1, v1) = *pts[j];
                v0 + (v1 - v0) * (u - u0) / (u1 - u0)
            }
        }
    }

    /// C_rank, the leading coefficient entering every scaling normalization.
    pub fn leading_coeff(&self) -> f64 {
        self.coeffs[self.rank]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_low_degrees_closed_form() {
        for u in [0.0, 1.0, 2.0] {
            assert_abs_diff_eq!(hermite_poly(2, u).unwrap(), u * u - 1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(hermite_poly(3, 2.0).unwrap(), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn hermite_degree_ten_matches_rational_oracle() {
        // exact rational recurrence at u = 13/10: H_10 = 7311316947349/10^10
        let oracle = 731.1316947349;
        assert_abs_diff_eq!(hermite_poly(10, 1.3).unwrap(), oracle, epsilon = 1e-9);
    }

    #[test]
    fn hermite_degree_cap_enforced() {
        assert!(hermite_poly(SIGMA_CAP, 0.5).is_ok());
        assert!(hermite_poly(SIGMA_CAP + 1, 0.5).is_err());
    }

    #[test]
    fn gauss_hermite_moments() {
        // E[Z^{2k}] = (2k-1)!! for the standard normal
        let rule = GaussHermite::new(64).unwrap();
        let total: f64 = rule.weights.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rule.integrate(|x| x * x), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rule.integrate(|x| x.powi(4)), 3.0, epsilon = 1e-11);
        assert_abs_diff_eq!(rule.integrate(|x| x.powi(8)), 105.0, epsilon = 1e-9);
    }

    #[test]
    fn gauss_hermite_large_rule_is_sane() {
        let rule = GaussHermite::new(1024).unwrap();
        assert_eq!(rule.nodes.len(), 1024);
        let total: f64 = rule.weights.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(rule.integrate(|x| (0.3 * x).cos()), (-0.045f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn orthonormality_up_to_twenty() {
        // quadrature of H_s H_t / sqrt(s! t!) against p(u) equals delta_st
        let rule = GaussHermite::new(64).unwrap();
        let mut worst = 0.0f64;
        for s in 0..=20usize {
            for t in 0..=20usize {
                let v = rule.integrate(|u| {
                    let vals = orthonormal_hermite_values(20, u);
                    vals[s] * vals[t]
                });
                let target = if s == t { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        assert!(worst < 1e-10, "orthonormality defect {worst:.2e}");
    }

    #[test]
    fn identity_coefficients() {
        let c = hermite_coeffs(|u| u, 6, 1e-9).unwrap();
        assert_abs_diff_eq!(c[1], 1.0, epsilon = 1e-12);
        for (sigma, &v) in c.iter().enumerate() {
            if sigma != 1 {
                assert!(v.abs() < 1e-12, "C_{sigma} = {v:e}");
            }
        }
        assert_eq!(hermite_rank(&c, 1e-8).unwrap(), 1);
    }

    #[test]
    fn h2_coefficients() {
        let c = hermite_coeffs(|u| u * u - 1.0, 6, 1e-9).unwrap();
        assert_abs_diff_eq!(c[2], 2.0f64.sqrt(), epsilon = 1e-12);
        assert_eq!(hermite_rank(&c, 1e-8).unwrap(), 2);
    }

    #[test]
    fn cube_has_rank_one() {
        // u^3 = H_3 + 3 H_1, so C_1 = 3
        let c = hermite_coeffs(|u| u * u * u, 6, 1e-9).unwrap();
        assert_abs_diff_eq!(c[1], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c[3], 6.0f64.sqrt(), epsilon = 1e-10);
        assert_eq!(hermite_rank(&c, 1e-8).unwrap(), 1);
    }

    #[test]
    fn sign_closed_form_matches_quadrature() {
        let closed = sign_coeffs(7);
        assert_abs_diff_eq!(closed[1], (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(closed[3], -0.32573500793527995, epsilon = 1e-14);
        assert_abs_diff_eq!(closed[5], 0.21850968611841581, epsilon = 1e-14);
        assert_abs_diff_eq!(closed[7], -0.16858388283618386, epsilon = 1e-14);
        // Quadrature cross-check at a fixed 512-node rule: Gauss-Hermite on a
        // jump converges only like O(1/n), so compare at its achievable level.
        let rule = GaussHermite::new(512).unwrap();
        for sigma in 0..=7 {
            let quad = rule.integrate(|u| {
                let h = if u >= 0.0 { 1.0 } else { -1.0 };
                h * hermite_poly(sigma, u).unwrap()
            }) / (1..=sigma).map(|k| k as f64).product::<f64>().sqrt();
            assert_abs_diff_eq!(closed[sigma], quad, epsilon = 5e-3);
        }
    }

    #[test]
    fn sign_parseval() {
        // sum C_sigma^2 converges (from below, Bessel) to E[sign(Z)^2] = 1.
        // The partial sum at sigma_max = 41 is 0.9214715761 (30-digit
        // recurrence oracle); the O(sigma^{-1/2}) tail rules out a tighter
        // absolute target at this truncation.
        let partial = |smax: usize| -> f64 { sign_coeffs(smax).iter().map(|v| v * v).sum() };
        let s41 = partial(41);
        assert_abs_diff_eq!(s41, 0.9214715761, epsilon = 1e-9);
        let s2001 = partial(2001);
        assert!(s41 < s2001 && s2001 < 1.0, "Bessel/convergence violated");
        assert!((s2001 - 1.0).abs() < 1.2e-2);
    }

    #[test]
    fn degenerate_subordinator_rejected() {
        let c = vec![5.0, 0.0, 0.0];
        assert!(hermite_rank(&c, 1e-8).is_err());
    }

    #[test]
    fn subordinated_covariance_law_smooth() {
        // E[h(X)h(Y)] - C_0^2 = sum C_sigma^2 r^sigma, against 2-D quadrature
        let rule = GaussHermite::new(96).unwrap();
        for h in [|u: f64| u, |u: f64| u * u - 1.0] {
            let c = hermite_coeffs(h, 10, 1e-9).unwrap();
            for r in [0.0f64, 0.3, 0.9] {
                let s = (1.0 - r * r).sqrt();
                let lhs = rule.integrate(|x| h(x) * rule.integrate(|z| h(r * x + s * z)));
                let rhs: f64 = c
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(sigma, &cv)| cv * cv * r.powi(sigma as i32))
                    .sum();
                assert_abs_diff_eq!(lhs - c[0] * c[0], rhs, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn subordinated_covariance_law_sign() {
        // For sign the bivariate expectation reduces to a smooth half-line
        // integral 2 int_0^inf (1 - 2 Phi(-r x / sqrt(1-r^2))) p(x) dx.
        let c = sign_coeffs(201);
        for r in [0.3f64, 0.9] {
            let s = (1.0 - r * r).sqrt();
            let p = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let phi = |t: f64| 0.5 * crate::specfun::erfc(-t / 2.0f64.sqrt());
            let (lhs, _) = crate::quad::adaptive_to_inf(
                &|x| 2.0 * (1.0 - 2.0 * phi(-r * x / s)) * p(x),
                0.0,
                1e-12,
            )
            .unwrap();
            let rhs: f64 = c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(sigma, &cv)| cv * cv * r.powi(sigma as i32))
                .sum();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-6);
            // analytic cross-check: E[sign(X)sign(Y)] = (2/pi) asin(r)
            assert_abs_diff_eq!(lhs, 2.0 / std::f64::consts::PI * r.asin(), epsilon = 1e-10);
        }
    }

    #[test]
    fn table_subordinator_roundtrip() {
        // dense table of u^2 - 1 recovers rank 2 and C_2 near sqrt(2)
        let pts: Vec<(f64, f64)> = (-400..=400)
            .map(|i| {
                let u = i as f64 * 0.025;
                (u, u * u - 1.0)
            })
            .collect();
        let sub = Subordinator::from_table(pts, 6).unwrap();
        assert_eq!(sub.rank, 2);
        assert_abs_diff_eq!(sub.leading_coeff(), 2.0f64.sqrt(), epsilon = 1e-3);
        assert!(sub.coeffs.iter().map(|c| c * c).sum::<f64>() <= sub.l2_norm.powi(2) + 1e-6);
    }

    #[test]
    fn builders_apply_consistently() {
        let id = Subordinator::identity();
        assert_abs_diff_eq!(id.apply(1.7), 1.7);
        let h2 = Subordinator::pure_hermite(2).unwrap();
        assert_abs_diff_eq!(h2.apply(2.0), 3.0);
        assert_abs_diff_eq!(h2.leading_coeff(), 2.0f64.sqrt(), epsilon = 1e-15);
        let sg = Subordinator::sign(9);
        assert_abs_diff_eq!(sg.apply(-0.2), -1.0);
        assert_eq!(sg.rank, 1);
    }
}
