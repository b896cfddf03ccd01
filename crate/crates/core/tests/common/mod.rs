//! Independent numerical oracles shared by the integration suites:
//! classical RK4 on the per-mode ODE system, the Adams predictor-corrector
//! for Caputo fractional ODEs, and naive DFT helpers that avoid the crate's
//! own FFT plumbing.
#![allow(dead_code)]

use fklab::kinetic::SystemParams;
use num_complex::Complex64;

/// RK4 integration of dU/dt = A U for a single Fourier mode, where
/// A = B - mu psi(lambda) I with psi the Riesz-Bessel symbol.
pub fn rk4_mode(
    params: &SystemParams,
    lam_mag: f64,
    u0: [Complex64; 2],
    t: f64,
    steps: usize,
) -> [Complex64; 2] {
    let b = params.b_matrix().0;
    let s = params.symbol(lam_mag);
    let a = [[b[0][0] - s, b[0][1]], [b[1][0], b[1][1] - s]];
    let f = |u: [Complex64; 2]| -> [Complex64; 2] {
        [
            a[0][0] * u[0] + a[0][1] * u[1],
            a[1][0] * u[0] + a[1][1] * u[1],
        ]
    };
    let h = t / steps as f64;
    let mut u = u0;
    for _ in 0..steps {
        let k1 = f(u);
        let k2 = f([u[0] + 0.5 * h * k1[0], u[1] + 0.5 * h * k1[1]]);
        let k3 = f([u[0] + 0.5 * h * k2[0], u[1] + 0.5 * h * k2[1]]);
        let k4 = f([u[0] + h * k3[0], u[1] + h * k3[1]]);
        u = [
            u[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            u[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
    }
    u
}

fn gamma_fn(x: f64) -> f64 {
    // Lanczos (g = 7, n = 9); enough for the quadrature weights below
    const C: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = C[0];
        for (i, &c) in C.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Adams predictor-corrector (Diethelm-Ford-Freed) for the linear Caputo
/// system D^beta U = M U, U(0) = u0, on [0, t] with `steps` uniform steps.
/// Global error is O(h^{1+beta}).
pub fn adams_fractional(beta: f64, m: [[f64; 2]; 2], u0: [f64; 2], t: f64, steps: usize) -> [f64; 2] {
    assert!(beta > 0.0 && beta < 1.0);
    let h = t / steps as f64;
    let f = |u: [f64; 2]| -> [f64; 2] {
        [
            m[0][0] * u[0] + m[0][1] * u[1],
            m[1][0] * u[0] + m[1][1] * u[1],
        ]
    };
    let g1 = gamma_fn(beta + 1.0);
    let g2 = gamma_fn(beta + 2.0);
    let hb = h.powf(beta);
    let mut us: Vec<[f64; 2]> = Vec::with_capacity(steps + 1);
    let mut fs: Vec<[f64; 2]> = Vec::with_capacity(steps + 1);
    us.push(u0);
    fs.push(f(u0));
    for k in 0..steps {
        let kf = k as f64;
        // predictor
        let mut pred = [0.0; 2];
        for (j, fj) in fs.iter().enumerate() {
            let jf = j as f64;
            let b = (kf + 1.0 - jf).powf(beta) - (kf - jf).powf(beta);
            pred[0] += b * fj[0];
            pred[1] += b * fj[1];
        }
        let up = [u0[0] + hb / g1 * pred[0], u0[1] + hb / g1 * pred[1]];
        // corrector
        let mut corr = f(up);
        for (j, fj) in fs.iter().enumerate() {
            let jf = j as f64;
            let a = if j == 0 {
                kf.powf(beta + 1.0) - (kf - beta) * (kf + 1.0).powf(beta)
            } else {
                (kf - jf + 2.0).powf(beta + 1.0) + (kf - jf).powf(beta + 1.0)
                    - 2.0 * (kf - jf + 1.0).powf(beta + 1.0)
            };
            corr[0] += a * fj[0];
            corr[1] += a * fj[1];
        }
        let un = [u0[0] + hb / g2 * corr[0], u0[1] + hb / g2 * corr[1]];
        us.push(un);
        fs.push(f(un));
    }
    us[steps]
}

/// Scalar convenience: D^beta u = c u, u(0) = 1, evaluated at t
/// (the oracle for E_beta(c t^beta)).
pub fn adams_fractional_scalar(beta: f64, c: f64, t: f64, steps: usize) -> f64 {
    adams_fractional(beta, [[c, 0.0], [0.0, 0.0]], [1.0, 0.0], t, steps)[0]
}

/// Unnormalized forward DFT, X_k = sum_j x_j e^{-2 pi i j k / N} (naive).
pub fn naive_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let w = -2.0 * std::f64::consts::PI / n as f64;
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &v) in x.iter().enumerate() {
                let ph = w * (j * k % n) as f64;
                acc += v * Complex64::new(ph.cos(), ph.sin());
            }
            acc
        })
        .collect()
}

/// Inverse of `naive_dft` (with the 1/N normalization), real part.
pub fn naive_idft_real(spec: &[Complex64]) -> Vec<f64> {
    let n = spec.len();
    let w = 2.0 * std::f64::consts::PI / n as f64;
    (0..n)
        .map(|j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &v) in spec.iter().enumerate() {
                let ph = w * (j * k % n) as f64;
                acc += v * Complex64::new(ph.cos(), ph.sin());
            }
            acc.re / n as f64
        })
        .collect()
}
