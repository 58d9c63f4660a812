//! Classical covariance-based DOA estimators expressed as one cost.
//!
//! Every estimator is reduced to a [`CostSpec`]: per-band Hermitian PSD
//! matrices `V_k`, band wavenumbers `ω_k`, and an exponent `s`. The cost of a
//! direction `q` is the power mean over bands of `a_k(q)ᴴ V_k a_k(q)`, and
//! sources are its local minima on the sphere.
//!
//! * SRP / SRP-PHAT maximize `a_kᴴ S_k a_k`; they are turned into minimization
//!   with the row-sum shift `V_k = P_k I − S_k`.
//! * MUSIC uses the noise-subspace projector `V_k = E_k E_kᴴ`.
//! * MVDR uses the (diagonally loaded) inverse covariance.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{great_circle_distance, ArrayGeometry, DoaVector, SphericalGrid};
use crate::spectral::{CovarianceSet, Weighting};

/// Floor applied to band powers before negative powers are taken.
pub const POWER_FLOOR: f64 = 1e-30;

/// Default MVDR diagonal loading, relative to `trace(S_k) / M`.
pub const DEFAULT_MVDR_LOADING: f64 = 1e-3;

/// Default separation between picked sources, in degrees.
pub const DEFAULT_MIN_SEPARATION_DEG: f64 = 10.0;

/// The cost `G(q) = M_s(a_1ᴴV_1a_1, …, a_KᴴV_Ka_K)`.
#[derive(Debug, Clone)]
pub struct CostSpec {
    v: Vec<DMatrix<Complex64>>,
    omega: Vec<f64>,
    s: f64,
}

impl CostSpec {
    /// Validates shapes, Hermitian symmetry, PSD-ness, the wavenumbers, and
    /// `s ∈ (−∞, 1] \ {0}`.
    pub fn new(v: Vec<DMatrix<Complex64>>, omega: Vec<f64>, s: f64) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::invalid("cost needs at least one band"));
        }
        if v.len() != omega.len() {
            return Err(Error::LengthMismatch { expected: v.len(), got: omega.len() });
        }
        check_exponent(s)?;
        if omega.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("wavenumbers must be non-negative and strictly increasing"));
        }
        let m = v[0].nrows();
        for (k, vk) in v.iter().enumerate() {
            if vk.nrows() != m || vk.ncols() != m {
                return Err(Error::invalid(format!("band {k}: expected {m}x{m}, got {}x{}", vk.nrows(), vk.ncols())));
            }
            let scale = linalg::trace_re(vk).abs().max(1.0);
            if linalg::hermitian_defect(vk) > 1e-10 * scale {
                return Err(Error::invalid(format!("band {k}: matrix is not Hermitian")));
            }
            let min_eig = linalg::hermitian_min_eigenvalue(vk);
            if min_eig < -1e-10 * scale {
                return Err(Error::invalid(format!("band {k}: matrix is not PSD (min eigenvalue {min_eig:e})")));
            }
        }
        Ok(CostSpec { v, omega, s })
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.v
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.omega
    }

    pub fn exponent(&self) -> f64 {
        self.s
    }

    pub fn num_bands(&self) -> usize {
        self.v.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.v[0].nrows()
    }

    pub fn with_exponent(&self, s: f64) -> Result<Self> {
        check_exponent(s)?;
        Ok(CostSpec { v: self.v.clone(), omega: self.omega.clone(), s })
    }

    /// Multiplies every `V_k` by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid(format!("scale factor must be positive, got {factor}")));
        }
        let c = Complex64::new(factor, 0.0);
        Ok(CostSpec { v: self.v.iter().map(|m| m * c).collect(), omega: self.omega.clone(), s: self.s })
    }
}

fn check_exponent(s: f64) -> Result<()> {
    if !s.is_finite() || s > 1.0 || s == 0.0 {
        return Err(Error::invalid(format!("exponent s must lie in (-inf, 1] without 0, got {s}")));
    }
    Ok(())
}

/// `ω_k = 2π f_k / c` in rad/m.
pub fn wavenumbers(band_frequencies: &[f64], speed_of_sound: f64) -> Vec<f64> {
    band_frequencies.iter().map(|f| 2.0 * PI * f / speed_of_sound).collect()
}

/// Returns `(P, P·I − C)` with `P` the largest absolute row sum of `C`.
pub fn gershgorin_shift(c: &DMatrix<Complex64>) -> (f64, DMatrix<Complex64>) {
    let p = c.row_iter().map(|row| row.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max);
    let n = c.nrows();
    let v = DMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(p, 0.0) - c[(i, j)] } else { -c[(i, j)] });
    (p, v)
}

pub fn srp_cost_spec(cov: &CovarianceSet, speed_of_sound: f64, s: f64) -> Result<CostSpec> {
    let v = cov.matrices.iter().map(|c| gershgorin_shift(c).1).collect();
    CostSpec::new(v, wavenumbers(&cov.band_frequencies, speed_of_sound), s)
}

/// Noise-subspace projectors from the `M − L` smallest eigenvalues of each band.
pub fn music_cost_spec(cov: &CovarianceSet, speed_of_sound: f64, num_sources: usize, s: f64) -> Result<CostSpec> {
    let m = cov.num_sensors();
    if num_sources == 0 || num_sources >= m {
        return Err(Error::invalid(format!("MUSIC needs 1 <= L < M = {m}, got L = {num_sources}")));
    }
    let v = cov
        .matrices
        .iter()
        .map(|c| {
            let (_, vectors) = linalg::hermitian_eigen_ascending(c);
            let noise = vectors.columns(0, m - num_sources);
            let proj = noise * noise.adjoint();
            // exact Hermitian symmetry
            (&proj + proj.adjoint()) * Complex64::new(0.5, 0.0)
        })
        .collect();
    CostSpec::new(v, wavenumbers(&cov.band_frequencies, speed_of_sound), s)
}

/// `V_k = (S_k + loading · trace(S_k)/M · I)^{-1}`.
pub fn mvdr_cost_spec(cov: &CovarianceSet, speed_of_sound: f64, loading: f64, s: f64) -> Result<CostSpec> {
    if !(loading.is_finite() && loading >= 0.0) {
        return Err(Error::invalid(format!("loading must be non-negative, got {loading}")));
    }
    let mut v = Vec::with_capacity(cov.num_bands());
    for (band, c) in cov.matrices.iter().enumerate() {
        let m = c.nrows();
        let shift = loading * linalg::trace_re(c) / m as f64;
        let loaded = c + DMatrix::<Complex64>::identity(m, m) * Complex64::new(shift, 0.0);
        let (values, vectors) = linalg::hermitian_eigen_ascending(&loaded);
        let (lo, hi) = (values[0], values[m - 1]);
        if !(hi > 0.0) || lo <= 1e-12 * hi {
            return Err(Error::Singular { band, condition: if lo > 0.0 { hi / lo } else { f64::INFINITY } });
        }
        let inv_diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            m,
            values.iter().map(|l| Complex64::new(1.0 / l, 0.0)),
        ));
        let inv = &vectors * inv_diag * vectors.adjoint();
        v.push((&inv + inv.adjoint()) * Complex64::new(0.5, 0.0));
    }
    CostSpec::new(v, wavenumbers(&cov.band_frequencies, speed_of_sound), s)
}

/// Generalized power mean `((1/K) Σ y_k^s)^{1/s}`; `s = 0` gives the
/// geometric mean. For `s < 0` values are floored at [`POWER_FLOOR`].
pub fn power_mean(values: &[f64], s: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let k = values.len() as f64;
    let floored = |y: f64| if s < 0.0 { y.max(POWER_FLOOR) } else { y.max(0.0) };
    if s == 0.0 {
        return (values.iter().map(|&y| floored(y).ln()).sum::<f64>() / k).exp();
    }
    let top = values.iter().map(|&y| floored(y)).fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    let mean = values.iter().map(|&y| (floored(y) / top).powf(s)).sum::<f64>() / k;
    top * mean.powf(1.0 / s)
}

/// `a_k(q)ᴴ V_k a_k(q)` for every band, evaluated as a quadratic form.
pub fn band_powers(spec: &CostSpec, geometry: &ArrayGeometry, q: &DoaVector) -> Vec<f64> {
    let m = geometry.num_sensors();
    assert_eq!(m, spec.num_sensors(), "cost and geometry disagree on the sensor count");
    let proj: Vec<f64> = geometry.sensors().iter().map(|d| d.dot(q.as_vector())).collect();
    let inv_m = 1.0 / m as f64;
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    spec.v
        .iter()
        .zip(&spec.omega)
        .map(|(vk, &w)| {
            for (ai, t) in a.iter_mut().zip(&proj) {
                let (sn, cs) = (w * t).sin_cos();
                *ai = Complex64::new(cs, sn);
            }
            let mut diag = 0.0;
            let mut cross = Complex64::new(0.0, 0.0);
            for i in 0..m {
                diag += vk[(i, i)].re;
                let mut acc = Complex64::new(0.0, 0.0);
                for j in i + 1..m {
                    acc += vk[(i, j)] * a[j];
                }
                cross += a[i].conj() * acc;
            }
            ((diag + 2.0 * cross.re) * inv_m).max(0.0)
        })
        .collect()
}

pub fn objective(spec: &CostSpec, geometry: &ArrayGeometry, q: &DoaVector) -> f64 {
    power_mean(&band_powers(spec, geometry, q), spec.s)
}

/// A grid point picked as a source candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPeak {
    pub doa: DoaVector,
    pub value: f64,
    pub index: usize,
    /// False when the point was padded in from the global ranking.
    pub local_minimum: bool,
}

/// Picks up to `num_sources` local minima of the cost on `grid`, pairwise at
/// least `min_separation` radians apart, best first. Short lists are padded
/// from the global ranking under the same separation rule.
pub fn grid_search(
    spec: &CostSpec,
    geometry: &ArrayGeometry,
    grid: &SphericalGrid,
    num_sources: usize,
    min_separation: f64,
) -> Vec<GridPeak> {
    let values: Vec<f64> = grid.points().iter().map(|q| objective(spec, geometry, q)).collect();
    pick_minima(grid, &values, num_sources, min_separation)
}

pub(crate) fn pick_minima(grid: &SphericalGrid, values: &[f64], num_sources: usize, min_separation: f64) -> Vec<GridPeak> {
    let mut ranked: Vec<usize> = (0..values.len()).collect();
    ranked.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let is_local_min = |i: usize| grid.neighbors(i).iter().all(|&j| values[i] <= values[j]);

    let mut picked: Vec<GridPeak> = Vec::with_capacity(num_sources);
    let try_pick = |i: usize, local: bool, picked: &mut Vec<GridPeak>| {
        let q = grid.points()[i];
        if picked.iter().all(|p| p.index != i && great_circle_distance(&p.doa, &q) >= min_separation) {
            picked.push(GridPeak { doa: q, value: values[i], index: i, local_minimum: local });
        }
    };
    for &i in ranked.iter().filter(|&&i| is_local_min(i)) {
        if picked.len() == num_sources {
            break;
        }
        try_pick(i, true, &mut picked);
    }
    for &i in &ranked {
        if picked.len() == num_sources {
            break;
        }
        try_pick(i, false, &mut picked);
    }
    picked
}

/// The estimator families that share the cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Srp,
    SrpPhat,
    Music,
    Mvdr,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Srp, Estimator::SrpPhat, Estimator::Music, Estimator::Mvdr];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Srp => "srp",
            Estimator::SrpPhat => "srp-phat",
            Estimator::Music => "music",
            Estimator::Mvdr => "mvdr",
        }
    }

    pub fn default_exponent(self) -> f64 {
        match self {
            Estimator::Srp => 1.0,
            Estimator::SrpPhat => -3.0,
            Estimator::Music | Estimator::Mvdr => -1.0,
        }
    }

    pub fn weighting(self) -> Weighting {
        match self {
            Estimator::SrpPhat => Weighting::Phat,
            _ => Weighting::Unit,
        }
    }

    /// Builds the cost from covariances that already carry [`Self::weighting`].
    pub fn cost_spec(self, cov: &CovarianceSet, speed_of_sound: f64, num_sources: usize, s: f64) -> Result<CostSpec> {
        match self {
            Estimator::Srp | Estimator::SrpPhat => srp_cost_spec(cov, speed_of_sound, s),
            Estimator::Music => music_cost_spec(cov, speed_of_sound, num_sources, s),
            Estimator::Mvdr => mvdr_cost_spec(cov, speed_of_sound, DEFAULT_MVDR_LOADING, s),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("srp_phat") && *e == Estimator::SrpPhat))
            .ok_or_else(|| Error::UnknownName { kind: "estimator", name: s.to_string() })
    }
}
