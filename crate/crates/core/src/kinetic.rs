//! The PDE engine: Riesz-Bessel Fourier multipliers, the decoupling matrix
//! Q(t), the coupled beta = 1 solver, and the time-fractional solver via
//! Mittag-Leffler mode multipliers. All solves are exact in Fourier space.

use crate::error::{Error, Result};
use crate::fields::{GridSpec, LatticeField};
use crate::specfun::mittag_leffler;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Dense 2x2 real matrix with the handful of operations the engine needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn zero() -> Mat2 {
        Mat2([[0.0; 2]; 2])
    }

    pub fn diag(a: f64, b: f64) -> Mat2 {
        Mat2([[a, 0.0], [0.0, b]])
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn inverse(&self) -> Result<Mat2> {
        let d = self.det();
        if d.abs() < 1e-300 {
            return Err(Error::domain("mat2_inverse", "singular matrix"));
        }
        Ok(Mat2([
            [self.0[1][1] / d, -self.0[0][1] / d],
            [-self.0[1][0] / d, self.0[0][0] / d],
        ]))
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = self.0[i][0] * rhs.0[0][j] + self.0[i][1] * rhs.0[1][j];
            }
        }
        Mat2(out)
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2([
            [self.0[0][0] * s, self.0[0][1] * s],
            [self.0[1][0] * s, self.0[1][1] * s],
        ])
    }

    pub fn add(&self, rhs: &Mat2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = self.0[i][j] + rhs.0[i][j];
            }
        }
        Mat2(out)
    }

    pub fn max_abs_diff(&self, rhs: &Mat2) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.0[i][j] - rhs.0[i][j]).abs());
            }
        }
        worst
    }
}

/// Coupled-system parameters with the Condition-A eigenstructure B = P D P^{-1},
/// det(P) = 1, carried explicitly.
#[derive(Debug, Clone, Copy)]
pub struct SystemParams {
    pub mu: f64,
    pub alpha: f64,
    pub gamma_b: f64,
    pub beta: f64,
    pub p: Mat2,
    pub d1: f64,
    pub d2: f64,
}

impl SystemParams {
    pub fn new(
        mu: f64,
        alpha: f64,
        gamma_b: f64,
        beta: f64,
        p: Mat2,
        d1: f64,
        d2: f64,
    ) -> Result<Self> {
        let mut errs = Vec::new();
        if !(mu > 0.0) {
            errs.push(format!("mu = {mu} must be positive"));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            errs.push(format!("alpha = {alpha} outside (0, 2]"));
        }
        if !(gamma_b >= 0.0) {
            errs.push(format!("gamma = {gamma_b} must be nonnegative"));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            errs.push(format!("beta = {beta} outside (0, 1]"));
        }
        if (p.det() - 1.0).abs() > 1e-12 {
            errs.push(format!("det(P) = {} violates Condition A (det = 1)", p.det()));
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(SystemParams {
            mu,
            alpha,
            gamma_b,
            beta,
            p,
            d1,
            d2,
        })
    }

    /// Construct from a coupling matrix B: real eigendecomposition with the
    /// eigenvector matrix scaled to det(P) = 1, eigenvalues ordered d1 >= d2.
    pub fn from_b(mu: f64, alpha: f64, gamma_b: f64, beta: f64, b: Mat2) -> Result<Self> {
        let tr = b.0[0][0] + b.0[1][1];
        let det = b.det();
        let disc = tr * tr - 4.0 * det;
        if disc < 0.0 {
            return Err(Error::Config(vec![format!(
                "B has complex eigenvalues (discriminant {disc:.3e}); Condition A requires a real diagonalization"
            )]));
        }
        let s = disc.sqrt();
        let (d1, d2) = ((tr + s) / 2.0, (tr - s) / 2.0);
        let p = if s == 0.0 {
            // repeated eigenvalue: diagonalizable iff B is already d*I
            let defect = b.max_abs_diff(&Mat2::diag(d1, d1));
            if defect > 1e-12 {
                return Err(Error::Config(vec![format!(
                    "B has a repeated eigenvalue with a deficient eigenspace (defect {defect:.3e}); Condition A violated"
                )]));
            }
            Mat2::IDENTITY
        } else {
            let col = |d: f64| -> [f64; 2] {
                // nontrivial null vector of B - d I
                let m = [[b.0[0][0] - d, b.0[0][1]], [b.0[1][0], b.0[1][1] - d]];
                if m[0][0].abs() + m[0][1].abs() > m[1][0].abs() + m[1][1].abs() {
                    [-m[0][1], m[0][0]]
                } else {
                    [-m[1][1], m[1][0]]
                }
            };
            let (v1, v2) = (col(d1), col(d2));
            let raw = Mat2([[v1[0], v2[0]], [v1[1], v2[1]]]);
            let det_raw = raw.det();
            if det_raw.abs() < 1e-14 {
                return Err(Error::Config(vec![
                    "eigenvector matrix of B is numerically singular".to_string(),
                ]));
            }
            // rescale both columns by 1/sqrt(|det|), flipping one if needed
            let s0 = 1.0 / det_raw.abs().sqrt();
            let s1 = s0 * det_raw.signum();
            Mat2([
                [raw.0[0][0] * s0, raw.0[0][1] * s1],
                [raw.0[1][0] * s0, raw.0[1][1] * s1],
            ])
        };
        SystemParams::new(mu, alpha, gamma_b, beta, p, d1, d2)
    }

    /// The coupling matrix B = P diag(d1, d2) P^{-1}.
    pub fn b_matrix(&self) -> Mat2 {
        self.p
            .mul(&Mat2::diag(self.d1, self.d2))
            .mul(&self.p.inverse().unwrap())
    }

    /// The spatial symbol mu |lambda|^alpha (1 + |lambda|^2)^{gamma/2}.
    pub fn symbol(&self, lam_mag: f64) -> f64 {
        if lam_mag == 0.0 {
            return 0.0;
        }
        self.mu * lam_mag.powf(self.alpha) * (1.0 + lam_mag * lam_mag).powf(self.gamma_b / 2.0)
    }
}

/// Green multiplier exp(-mu t |lambda|^alpha (1+|lambda|^2)^{gamma/2}).
pub fn green_multiplier(lam_mag: f64, t: f64, params: &SystemParams) -> f64 {
    (-t * params.symbol(lam_mag)).exp()
}

/// Q(t) = P diag(e^{d1 t}, e^{d2 t}) P^{-1}.
pub fn q_matrix(t: f64, params: &SystemParams) -> Result<Mat2> {
    let (e1, e2) = ((params.d1 * t).exp(), (params.d2 * t).exp());
    if !e1.is_finite() || !e2.is_finite() {
        return Err(Error::overflow(
            "q_matrix",
            format!("exp(d t) overflows at t = {t}; use prefactored_q"),
        ));
    }
    Ok(params
        .p
        .mul(&Mat2::diag(e1, e2))
        .mul(&params.p.inverse()?))
}

/// e^{-d1 t} Q(t) = P diag(1, e^{(d2-d1) t}) P^{-1}; bounded for all t >= 0
/// when d1 >= d2, with limit P diag(1,0) P^{-1} as t -> infinity.
pub fn prefactored_q(t: f64, params: &SystemParams) -> Result<Mat2> {
    if params.d1 < params.d2 {
        return Err(Error::domain(
            "prefactored_q",
            format!("d1 = {} < d2 = {}: relabel the eigenvalues", params.d1, params.d2),
        ));
    }
    let e = ((params.d2 - params.d1) * t).exp();
    Ok(params
        .p
        .mul(&Mat2::diag(1.0, e))
        .mul(&params.p.inverse()?))
}

/// Limit of prefactored_q as t -> infinity (d1 > d2):
/// (p11 p22, -p11 p12; p21 p22, -p12 p21).
pub fn prefactored_limit(params: &SystemParams) -> Mat2 {
    let p = &params.p.0;
    Mat2([
        [p[0][0] * p[1][1], -p[0][0] * p[0][1]],
        [p[1][0] * p[1][1], -p[0][1] * p[1][0]],
    ])
}

pub(crate) fn fft_1d_all(grid: &GridSpec, data: &mut [Complex64], forward: bool) {
    let mut planner = FftPlanner::new();
    let fft = if forward {
        planner.plan_fft_forward(grid.pts)
    } else {
        planner.plan_fft_inverse(grid.pts)
    };
    match grid.n {
        1 => fft.process(data),
        2 => {
            let pts = grid.pts;
            for row in data.chunks_mut(pts) {
                fft.process(row);
            }
            let mut col = vec![Complex64::default(); pts];
            for j in 0..pts {
                for i in 0..pts {
                    col[i] = data[i * pts + j];
                }
                fft.process(&mut col);
                for i in 0..pts {
                    data[i * pts + j] = col[i];
                }
            }
        }
        _ => unimplemented!("3-D transforms are not required by any experiment"),
    }
}

/// Per-mode multipliers in eigencoordinates, cached per (grid, params, t) so
/// replicate loops pay the multiplier construction once.
pub struct SpectralPropagator {
    pub grid: GridSpec,
    /// eigen-component multipliers per flat FFT index
    mult: [Vec<f64>; 2],
    p: Mat2,
    pinv: Mat2,
    pub t: f64,
}

/// How the d_j exponential growth is carried.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthPolicy {
    /// multiplier includes e^{d_j t} (errors out on overflow)
    Plain,
    /// multiplier includes e^{(d_j - d1) t} (macro experiments, d1 >= d2)
    Prefactored,
}

impl SpectralPropagator {
    pub fn new(grid: &GridSpec, params: &SystemParams, t: f64, policy: GrowthPolicy) -> Result<Self> {
        if t < 0.0 {
            return Err(Error::domain("spectral_propagator", "t must be nonnegative"));
        }
        if policy == GrowthPolicy::Prefactored && params.d1 < params.d2 {
            return Err(Error::domain(
                "spectral_propagator",
                "prefactored policy requires d1 >= d2",
            ));
        }
        let shift = match policy {
            GrowthPolicy::Plain => 0.0,
            GrowthPolicy::Prefactored => params.d1,
        };
        // radial values repeat across the lattice: memoize on the axis
        // magnitudes for n = 1 (mirror), direct evaluation otherwise.
        let eig_mult = |d: f64, sym: f64| -> Result<f64> {
            let v = if params.beta >= 1.0 {
                ((d - shift - sym) * t).exp()
            } else {
                // E_beta((-sym + d) t^beta), with the prefactor shift applied
                // outside the Mittag-Leffler argument (shift = 0 unless macro)
                let arg = (-sym + d) * t.powf(params.beta);
                let e = mittag_leffler(params.beta, arg)?;
                (-shift * t).exp() * e.value
            };
            if !v.is_finite() {
                return Err(Error::overflow(
                    "spectral_propagator",
                    format!("multiplier overflow at t = {t}, d = {d}"),
                ));
            }
            Ok(v)
        };
        let mut mult = [
            Vec::with_capacity(grid.cells()),
            Vec::with_capacity(grid.cells()),
        ];
        if grid.n == 1 {
            let half = grid.pts / 2;
            for (j, m) in mult.iter_mut().enumerate() {
                let d = if j == 0 { params.d1 } else { params.d2 };
                let mut radial = Vec::with_capacity(half + 1);
                for k in 0..=half {
                    let sym = params.symbol(k as f64 * grid.dlam());
                    radial.push(eig_mult(d, sym)?);
                }
                m.extend((0..grid.pts).map(|k| {
                    let idx = grid.signed_index(k).unsigned_abs() as usize;
                    radial[idx]
                }));
            }
        } else {
            for (j, m) in mult.iter_mut().enumerate() {
                let d = if j == 0 { params.d1 } else { params.d2 };
                for flat in 0..grid.cells() {
                    m.push(eig_mult(d, params.symbol(grid.freq_mag(flat)))?);
                }
            }
        }
        Ok(SpectralPropagator {
            grid: *grid,
            mult,
            p: params.p,
            pinv: params.p.inverse()?,
            t,
        })
    }

    /// Eigencoordinate multiply on already-transformed spectra, in place.
    pub fn propagate_spectra(&self, a: &mut [Complex64], b: &mut [Complex64]) -> Result<()> {
        let cells = self.grid.cells();
        if a.len() != cells || b.len() != cells {
            return Err(Error::Shape(format!(
                "spectrum length {}/{} vs {} grid cells",
                a.len(),
                b.len(),
                cells
            )));
        }
        let pv = &self.pinv.0;
        let pm = &self.p.0;
        for k in 0..cells {
            let (au, bv) = (a[k], b[k]);
            let e1 = (pv[0][0] * au + pv[0][1] * bv) * self.mult[0][k];
            let e2 = (pv[1][0] * au + pv[1][1] * bv) * self.mult[1][k];
            a[k] = pm[0][0] * e1 + pm[0][1] * e2;
            b[k] = pm[1][0] * e1 + pm[1][1] * e2;
        }
        Ok(())
    }

    /// Propagate a two-component field: FFT, eigencoordinate multiply, inverse.
    pub fn apply(&self, u0: &[f64], v0: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let cells = self.grid.cells();
        if u0.len() != cells || v0.len() != cells {
            return Err(Error::Shape(format!(
                "component length {}/{} vs {} grid cells",
                u0.len(),
                v0.len(),
                cells
            )));
        }
        let mut a: Vec<Complex64> = u0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut b: Vec<Complex64> = v0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_1d_all(&self.grid, &mut a, true);
        fft_1d_all(&self.grid, &mut b, true);
        self.propagate_spectra(&mut a, &mut b)?;
        fft_1d_all(&self.grid, &mut a, false);
        fft_1d_all(&self.grid, &mut b, false);
        let inv_n = 1.0 / cells as f64;
        Ok((
            a.into_iter().map(|c| c.re * inv_n).collect(),
            b.into_iter().map(|c| c.re * inv_n).collect(),
        ))
    }

    /// Read the propagated field at an off-lattice point by band-limited
    /// (Fourier) interpolation of a single component (n = 1).
    pub fn spectral_read(&self, spectrum: &[Complex64], x: f64) -> Result<f64> {
        if self.grid.n != 1 {
            return Err(Error::Probe("spectral reads are 1-D only".to_string()));
        }
        let mut acc = Complex64::default();
        for k in 0..self.grid.pts {
            let lam = self.grid.freq(k);
            acc += spectrum[k] * Complex64::from_polar(1.0, lam * x);
        }
        Ok(acc.re / self.grid.pts as f64)
    }
}

/// Coupled beta = 1 solve: w(t) = Q(t) (G(t) * u0, G(t) * v0).
pub fn solve_system(
    u0: &LatticeField,
    v0: &LatticeField,
    params: &SystemParams,
    t: f64,
) -> Result<LatticeField> {
    if u0.grid != v0.grid {
        return Err(Error::Shape("u0 and v0 grids differ".to_string()));
    }
    if (params.beta - 1.0).abs() > 1e-14 {
        return Err(Error::domain("solve_system", "beta must equal 1; use solve_fractional"));
    }
    // q_matrix overflow check up front (the propagator folds Q in)
    q_matrix(t, params)?;
    let prop = SpectralPropagator::new(&u0.grid, params, t, GrowthPolicy::Plain)?;
    let (u, v) = prop.apply(&u0.comps[0], &v0.comps[0])?;
    Ok(LatticeField {
        grid: u0.grid,
        comps: vec![u, v],
        seed: u0.seed,
    })
}

/// Time-fractional solve via Mittag-Leffler multipliers in eigencoordinates.
pub fn solve_fractional(
    u0: &LatticeField,
    v0: &LatticeField,
    params: &SystemParams,
    t: f64,
) -> Result<LatticeField> {
    if u0.grid != v0.grid {
        return Err(Error::Shape("u0 and v0 grids differ".to_string()));
    }
    let mut p = *params;
    if (p.beta - 1.0).abs() <= 1e-14 {
        p.beta = 1.0; // exact exponential path
    }
    let prop = SpectralPropagator::new(&u0.grid, &p, t, GrowthPolicy::Plain)?;
    let (u, v) = prop.apply(&u0.comps[0], &v0.comps[0])?;
    Ok(LatticeField {
        grid: u0.grid,
        comps: vec![u, v],
        seed: u0.seed,
    })
}

/// Mean vector C(t; B) = P diag(E_beta(d1 t^beta), E_beta(d2 t^beta)) P^{-1} C0.
pub fn mean_vector(t: f64, params: &SystemParams, c0: [f64; 2]) -> Result<[f64; 2]> {
    let (m1, m2) = if (params.beta - 1.0).abs() <= 1e-14 {
        ((params.d1 * t).exp(), (params.d2 * t).exp())
    } else {
        let tb = t.powf(params.beta);
        (
            mittag_leffler(params.beta, params.d1 * tb)?.value,
            mittag_leffler(params.beta, params.d2 * tb)?.value,
        )
    };
    if !m1.is_finite() || !m2.is_finite() {
        return Err(Error::overflow("mean_vector", format!("E_beta overflow at t = {t}")));
    }
    Ok(params
        .p
        .mul(&Mat2::diag(m1, m2))
        .mul(&params.p.inverse()?)
        .mul_vec(c0))
}
