//! Spectral synthesis of homogeneous isotropic long-range-dependent Gaussian
//! fields on periodic lattices, subordination, and spectral-density
//! diagnostics (covariance by FFT, convolution powers, dilation).

use crate::error::{Error, Result};
use crate::hermite::Subordinator;
use crate::quad;
use crate::specfun::{gamma_fn, tauberian_k};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::io::Write as _;

/// Periodic lattice: `pts` points per axis over a box of side `box_len`, with
/// frequency lattice lambda_k = 2 pi k / box_len for k in [-pts/2, pts/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub pts: usize,
    pub box_len: f64,
}

impl GridSpec {
    pub fn new(n: usize, pts: usize, box_len: f64) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::domain("grid", format!("dimension {n} outside 1..=3")));
        }
        if !pts.is_power_of_two() || pts < 4 {
            return Err(Error::domain(
                "grid",
                format!("pts {pts} must be a power of two >= 4"),
            ));
        }
        if !(box_len > 0.0) {
            return Err(Error::domain("grid", "box length must be positive"));
        }
        Ok(GridSpec { n, pts, box_len })
    }

    pub fn dx(&self) -> f64 {
        self.box_len / self.pts as f64
    }

    /// Frequency-lattice spacing.
    pub fn dlam(&self) -> f64 {
        2.0 * PI / self.box_len
    }

    /// Signed frequency index for FFT bin k.
    pub fn signed_index(&self, k: usize) -> i64 {
        if k < self.pts / 2 {
            k as i64
        } else {
            k as i64 - self.pts as i64
        }
    }

    /// Frequency value of FFT bin k along one axis.
    pub fn freq(&self, k: usize) -> f64 {
        self.signed_index(k) as f64 * self.dlam()
    }

    pub fn nyquist(&self) -> f64 {
        PI * self.pts as f64 / self.box_len
    }

    /// Total number of lattice cells.
    pub fn cells(&self) -> usize {
        self.pts.pow(self.n as u32)
    }

    /// Frequency magnitude of the multi-index encoded as flat FFT order.
    pub fn freq_mag(&self, flat: usize) -> f64 {
        match self.n {
            1 => self.freq(flat).abs(),
            2 => {
                let (k1, k2) = (flat / self.pts, flat % self.pts);
                self.freq(k1).hypot(self.freq(k2))
            }
            _ => {
                let k3 = flat % self.pts;
                let k2 = (flat / self.pts) % self.pts;
                let k1 = flat / (self.pts * self.pts);
                (self.freq(k1).powi(2) + self.freq(k2).powi(2) + self.freq(k3).powi(2)).sqrt()
            }
        }
    }
}

/// Isotropic spectral density f(lambda) = norm |lambda|^{kappa-n} e^{-cutoff |lambda|}.
///
/// `norm = K(n,kappa) l0` so the origin singularity matches the Tauberian
/// prefactor; `cutoff` carries the unit-mass constraint. Dilation keeps the
/// family closed, rescaling (l0, norm, cutoff) together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensity {
    pub n: usize,
    pub kappa: f64,
    pub l0: f64,
    pub cutoff: f64,
    pub norm: f64,
}

/// Unit-sphere surface area S_{n-1} in R^n.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_fn(n as f64 / 2.0).unwrap()
}

pub fn make_spectral_density(n: usize, kappa: f64, l0: f64) -> Result<SpectralDensity> {
    if !(1..=3).contains(&n) {
        return Err(Error::domain("make_spectral_density", "n outside 1..=3"));
    }
    if !(kappa > 0.0 && kappa < n as f64) {
        return Err(Error::domain(
            "make_spectral_density",
            format!("kappa {kappa} outside (0, {n})"),
        ));
    }
    if !(l0 > 0.0) {
        return Err(Error::domain("make_spectral_density", "L0 must be positive"));
    }
    let norm = tauberian_k(n, kappa)? * l0;
    // unit mass: norm * S_{n-1} * Gamma(kappa) / a^kappa = 1
    let a = (norm * sphere_area(n) * gamma_fn(kappa)?).powf(1.0 / kappa);
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain(
            "make_spectral_density",
            format!("unit-mass cutoff a = {a} not positive/finite"),
        ));
    }
    Ok(SpectralDensity {
        n,
        kappa,
        l0,
        cutoff: a,
        norm,
    })
}

impl SpectralDensity {
    /// Point value of the density at frequency magnitude `lam_mag`.
    pub fn eval(&self, lam_mag: f64) -> f64 {
        if lam_mag <= 0.0 {
            return f64::INFINITY;
        }
        self.norm * lam_mag.powf(self.kappa - self.n as f64) * (-self.cutoff * lam_mag).exp()
    }

    /// Total spectral mass (1 for undilated densities) by the closed form.
    pub fn total_mass(&self) -> f64 {
        self.norm * sphere_area(self.n) * gamma_fn(self.kappa).unwrap()
            / self.cutoff.powf(self.kappa)
    }

    /// Mass in the ball |lambda| <= r, via the substitution lam = s^{1/kappa}
    /// that removes the origin singularity.
    pub fn ball_mass(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        let s = sphere_area(self.n);
        let (kappa, a, norm) = (self.kappa, self.cutoff, self.norm);
        let (v, _) = quad::adaptive(
            &|u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                (-a * u.powf(1.0 / kappa)).exp() / kappa
            },
            0.0,
            r.powf(kappa),
            1e-13,
        )?;
        Ok(norm * s * v)
    }

    /// Analytic mass of the lattice cell around lambda = 0 (volume dlam^n),
    /// taken over the equal-volume ball. Finite despite the f(0) divergence.
    pub fn zero_cell_mass(&self, grid: &GridSpec) -> Result<f64> {
        let h = grid.dlam();
        // equal-volume ball radius: v_n r^n = h^n
        let r = match self.n {
            1 => h / 2.0,
            2 => h / PI.sqrt(),
            _ => h * (3.0 / (4.0 * PI)).powf(1.0 / 3.0),
        };
        self.ball_mass(r)
    }

    /// Dilation a > 0: the density of x -> zeta(a x), lambda -> a^{-n} f(lambda/a).
    pub fn dilate(&self, a_dilation: f64) -> Result<SpectralDensity> {
        if !(a_dilation > 0.0) {
            return Err(Error::domain("dilate_spectrum", "dilation must be positive"));
        }
        let s = a_dilation.powf(-self.kappa);
        Ok(SpectralDensity {
            n: self.n,
            kappa: self.kappa,
            l0: self.l0 * s,
            cutoff: self.cutoff / a_dilation,
            norm: self.norm * s,
        })
    }

    /// Per-cell spectral masses over the flat FFT-ordered frequency lattice,
    /// with the singular zero cell integrated analytically.
    pub fn lattice_masses(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        if grid.n != self.n {
            return Err(Error::Shape(format!(
                "density dimension {} vs grid dimension {}",
                self.n, grid.n
            )));
        }
        // Nyquist coverage: mass outside the ball of radius nyquist must be small.
        let covered = self.ball_mass(grid.nyquist())?;
        let total = self.total_mass();
        let deficit = (total - covered) / total;
        if deficit > 0.01 {
            return Err(Error::Resolution(format!(
                "{:.2}% of the spectral mass lies beyond the Nyquist frequency {:.3}",
                100.0 * deficit,
                grid.nyquist()
            )));
        }
        let cell = grid.dlam().powi(self.n as i32);
        let zero_mass = self.zero_cell_mass(grid)?;
        let masses = (0..grid.cells())
            .map(|flat| {
                let mag = grid.freq_mag(flat);
                if mag == 0.0 {
                    zero_mass
                } else {
                    self.eval(mag) * cell
                }
            })
            .collect();
        Ok(masses)
    }
}

/// Real lattice sample(s), FFT-ordered, with its provenance seed.
#[derive(Debug, Clone)]
pub struct LatticeField {
    pub grid: GridSpec,
    pub comps: Vec<Vec<f64>>,
    pub seed: u64,
}

impl LatticeField {
    pub fn assert_finite(&self) -> Result<()> {
        for comp in &self.comps {
            if comp.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("lattice_field", "non-finite value in field"));
            }
        }
        Ok(())
    }
}

fn fft_forward(grid: &GridSpec, data: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(grid.pts);
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

fn fft_inverse(grid: &GridSpec, data: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(grid.pts);
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

/// Stationary Gaussian sample with per-cell spectral masses `masses`:
/// zeta = IDFT( sqrt(mass_k / N) * DFT(white) ), exact in law on the lattice.
pub fn sample_gaussian_from_masses(
    grid: &GridSpec,
    masses: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if masses.len() != grid.cells() {
        return Err(Error::Shape(format!(
            "{} masses for {} cells",
            masses.len(),
            grid.cells()
        )));
    }
    let cells = grid.cells();
    let mut spec: Vec<Complex64> = (0..cells)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            Complex64::new(g, 0.0)
        })
        .collect();
    fft_forward(grid, &mut spec);
    let inv_n = 1.0 / cells as f64;
    for (c, &m) in spec.iter_mut().zip(masses) {
        *c *= (m * inv_n).sqrt();
    }
    fft_inverse(grid, &mut spec);
    Ok(spec.into_iter().map(|c| c.re).collect())
}

/// Scalar Gaussian field with spectral density f.
pub fn sample_gaussian_field(grid: &GridSpec, f: &SpectralDensity, seed: u64) -> Result<LatticeField> {
    let masses = f.lattice_masses(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = sample_gaussian_from_masses(grid, &masses, &mut rng)?;
    let field = LatticeField {
        grid: *grid,
        comps: vec![values],
        seed,
    };
    field.assert_finite()?;
    Ok(field)
}

/// Lattice covariance R(x) = sum_k mass_k e^{i lambda_k x} of the discretized
/// density, by inverse FFT (real, symmetric; R(0) is the total lattice mass).
pub fn covariance_of_density(f: &SpectralDensity, grid: &GridSpec) -> Result<Vec<f64>> {
    let masses = f.lattice_masses(grid)?;
    let mut spec: Vec<Complex64> = masses.iter().map(|&m| Complex64::new(m, 0.0)).collect();
    fft_inverse(grid, &mut spec);
    Ok(spec.into_iter().map(|c| c.re).collect())
}

/// Continuum covariance oracle R(x) = int f(lambda) e^{i lambda x} d lambda:
/// closed form for the exponential-cutoff model in n = 1.
pub fn covariance_closed_form_1d(f: &SpectralDensity, x: f64) -> f64 {
    assert_eq!(f.n, 1);
    // int_0^inf lam^{kappa-1} e^{-a lam} cos(lam x) dlam
    //   = Gamma(kappa) (a^2+x^2)^{-kappa/2} cos(kappa atan(x/a))
    let g = gamma_fn(f.kappa).unwrap();
    2.0 * f.norm * g * (f.cutoff * f.cutoff + x * x).powf(-f.kappa / 2.0)
        * (f.kappa * (x / f.cutoff).atan()).cos()
}

/// rho-th convolution power of the density on the frequency lattice:
/// FFT of R^rho, returned in FFT order. rho = 1 returns the lattice-sampled f.
pub fn convolved_density(f: &SpectralDensity, rho: usize, grid: &GridSpec) -> Result<Vec<f64>> {
    if rho == 0 {
        return Err(Error::domain("convolved_density", "rho must be >= 1"));
    }
    let nf = grid.n as f64;
    if ((rho as f64) * f.kappa - nf).abs() < 0.02 {
        return Err(Error::domain(
            "convolved_density",
            format!("rho*kappa = {:.3} within 0.02 of n = {}: ill-conditioned boundary case", rho as f64 * f.kappa, grid.n),
        ));
    }
    let r = covariance_of_density(f, grid)?;
    if rho == 1 {
        // return the density values themselves: mass / cell volume
        let cell = grid.dlam().powi(grid.n as i32);
        return Ok(f.lattice_masses(grid)?.iter().map(|m| m / cell).collect());
    }
    let mut spec: Vec<Complex64> = r
        .iter()
        .map(|&v| Complex64::new(v.powi(rho as i32), 0.0))
        .collect();
    fft_forward(grid, &mut spec);
    // (2 pi)^{-n} int R^rho e^{-i lambda x} dx  ->  (2 pi)^{-n} dx^n DFT(R^rho)
    let scale = grid.dx().powi(grid.n as i32) / (2.0 * PI).powi(grid.n as i32);
    Ok(spec.into_iter().map(|c| c.re * scale).collect())
}

/// Pointwise subordination eta(x) = h(zeta(x)) of every component.
pub fn subordinate(field: &LatticeField, h: &Subordinator) -> LatticeField {
    LatticeField {
        grid: field.grid,
        comps: field
            .comps
            .iter()
            .map(|comp| comp.iter().map(|&u| h.apply(u)).collect())
            .collect(),
        seed: field.seed,
    }
}

/// Flat little-endian binary export: header (n, pts, box) then values.
pub fn write_field_binary(field: &LatticeField, path: &std::path::Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(&(field.grid.n as u64).to_le_bytes())?;
    out.write_all(&(field.grid.pts as u64).to_le_bytes())?;
    out.write_all(&field.grid.box_len.to_le_bytes())?;
    out.write_all(&(field.comps.len() as u64).to_le_bytes())?;
    for comp in &field.comps {
        for v in comp {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// CSV export for small grids (n = 1): x, comp0[, comp1].
pub fn write_field_csv(field: &LatticeField, path: &std::path::Path) -> Result<()> {
    if field.grid.n != 1 {
        return Err(Error::domain("write_field_csv", "CSV export is 1-D only"));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = std::iter::once("x".to_string())
        .chain((0..field.comps.len()).map(|j| format!("comp{j}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for j in 0..field.grid.pts {
        let mut row = vec![format!("{:.17e}", j as f64 * field.grid.dx())];
        for comp in &field.comps {
            row.push(format!("{:.17e}", comp[j]));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
