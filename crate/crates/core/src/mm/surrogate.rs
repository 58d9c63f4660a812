//! Majorizers of the power-mean cost.
//!
//! Each band power expands over sensor pairs as
//!
//! ```text
//! a_kᴴ V_k a_k = tr(V_k)/M + (2/M) Σ_p u_kp cos(ψ_kp − ω_k Δ_pᵀ q)
//! ```
//!
//! with `u_kp = |(V_k)_mr|`, `ψ_kp = arg (V_k)_mr`. Every cosine is bounded
//! above by a parabola in its phase that touches at the current iterate, and
//! the concave power mean is bounded by its tangent plane. Collecting terms
//! gives `(1/M)(qᵀDq − 2vᵀq) + const`, which is the quadratic surrogate. The
//! linear surrogate further replaces `qᵀDq` by its bound through `C·I ⪰ D`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::estimators::{power_mean, CostSpec, POWER_FLOOR};
use crate::manifold::{ArrayGeometry, DoaVector};

const TWO_PI: f64 = 2.0 * PI;

/// Unnormalized sinc, `sin(x)/x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Returns `(z0, φ0)` with `z0 = argmin_z |θ0 + 2πz|` and `φ0 = θ0 + 2πz0`
/// in `(−π, π]`. The tie `|φ0| = π` resolves to `+π`.
pub fn wrap_phase(theta0: f64) -> (i64, f64) {
    let mut z = -(theta0 / TWO_PI).round();
    let mut phi = theta0 + TWO_PI * z;
    if phi <= -PI {
        phi += TWO_PI;
        z += 1.0;
    } else if phi > PI {
        phi -= TWO_PI;
        z -= 1.0;
    }
    (z as i64, phi)
}

/// Right-hand side of the cosine bound
/// `−cos θ ≤ ½ sinc(φ0)(θ + 2πz0)² − cos φ0 − ½ φ0 sin φ0`, expanded at `θ0`.
pub fn cosine_upper_bound(theta: f64, theta0: f64) -> f64 {
    let (z0, phi0) = wrap_phase(theta0);
    let shifted = theta + TWO_PI * z0 as f64;
    0.5 * sinc(phi0) * shifted * shifted - phi0.cos() - 0.5 * phi0 * phi0.sin()
}

/// Parabola parameters for `u cos(ψ − b) ≤ ½ u·weight·(ψ̂ − b)² + const`
/// around `b = b_dot_qhat`. Returns `(ψ̂, weight)`; `weight ∈ [0, 1]`.
pub fn cosine_surrogate_coeffs(psi: f64, b_dot_qhat: f64) -> (f64, f64) {
    let (z0, phi0) = wrap_phase(psi + PI - b_dot_qhat);
    (psi + PI + TWO_PI * z0 as f64, sinc(phi0))
}

/// Pair-wise magnitudes and phases of the off-diagonal entries of every `V_k`.
#[derive(Debug, Clone)]
pub struct PairCoefficients {
    num_sensors: usize,
    num_pairs: usize,
    /// `(k, p)` stored at `k * num_pairs + p`
    u: Vec<f64>,
    psi: Vec<f64>,
    omega: Vec<f64>,
    trace_over_m: Vec<f64>,
    deltas: Vec<Vector3<f64>>,
    scatter_max: f64,
}

impl PairCoefficients {
    pub fn new(spec: &CostSpec, geometry: &ArrayGeometry) -> Self {
        let m = geometry.num_sensors();
        assert_eq!(m, spec.num_sensors(), "cost and geometry disagree on the sensor count");
        let pairs = geometry.pairs();
        let mut u = Vec::with_capacity(spec.num_bands() * pairs.len());
        let mut psi = Vec::with_capacity(u.capacity());
        for vk in spec.matrices() {
            for p in pairs {
                let entry = vk[(p.m, p.r)];
                u.push(entry.norm());
                psi.push(entry.arg());
            }
        }
        let trace_over_m =
            spec.matrices().iter().map(|vk| (0..m).map(|i| vk[(i, i)].re).sum::<f64>() / m as f64).collect();
        PairCoefficients {
            num_sensors: m,
            num_pairs: pairs.len(),
            u,
            psi,
            omega: spec.wavenumbers().to_vec(),
            trace_over_m,
            deltas: pairs.iter().map(|p| p.delta).collect(),
            scatter_max: geometry.pair_scatter_max_eigenvalue(),
        }
    }

    pub fn num_bands(&self) -> usize {
        self.omega.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.num_pairs
    }

    /// `|(V_k)_mr|` for band `k`, pair `p`.
    pub fn magnitude(&self, k: usize, p: usize) -> f64 {
        self.u[k * self.num_pairs + p]
    }

    /// `arg (V_k)_mr` in `(−π, π]`.
    pub fn phase(&self, k: usize, p: usize) -> f64 {
        self.psi[k * self.num_pairs + p]
    }

    /// Band powers through the cosine expansion; an independent route from
    /// [`crate::estimators::band_powers`].
    pub fn band_powers(&self, q: &DoaVector) -> Vec<f64> {
        let proj: Vec<f64> = self.deltas.iter().map(|d| d.dot(q.as_vector())).collect();
        let two_over_m = 2.0 / self.num_sensors as f64;
        (0..self.num_bands())
            .map(|k| {
                let w = self.omega[k];
                let row = k * self.num_pairs;
                let sum: f64 =
                    (0..self.num_pairs).map(|p| self.u[row + p] * (self.psi[row + p] - w * proj[p]).cos()).sum();
                (self.trace_over_m[k] + two_over_m * sum).max(0.0)
            })
            .collect()
    }
}

/// The quadratic and linear surrogates at an expansion point `q̂`.
///
/// Up to an additive constant the quadratic surrogate is
/// `scale · (qᵀDq − 2vᵀq)` and the linear one is
/// `scale · 2((D − C·I)q̂ − v)ᵀq`, with `scale = 1/M`.
#[derive(Debug, Clone)]
pub struct SurrogateSystem {
    pub d: Matrix3<f64>,
    pub v: Vector3<f64>,
    /// `C` with `C·I ⪰ D`, from [`majorization_constant`].
    pub c: f64,
    pub scale: f64,
    /// Per-pair curvature weights `ξ_p`.
    pub xi: Vec<f64>,
    /// Per-pair linear weights `γ_p`.
    pub gamma: Vec<f64>,
    /// Tangent weights `β_k` of the power mean.
    pub beta: Vec<f64>,
}

impl SurrogateSystem {
    /// Quadratic surrogate without its constant.
    pub fn quadratic_value(&self, q: &Vector3<f64>) -> f64 {
        self.scale * (q.dot(&(self.d * q)) - 2.0 * self.v.dot(q))
    }

    /// Linear surrogate without its constant.
    pub fn linear_value(&self, q: &Vector3<f64>, q_hat: &Vector3<f64>) -> f64 {
        let g = self.d * q_hat - self.c * q_hat - self.v;
        self.scale * 2.0 * g.dot(q)
    }

    /// The same update with `D, v, C` (and `ξ, γ`) scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> SurrogateSystem {
        SurrogateSystem {
            d: self.d * factor,
            v: self.v * factor,
            c: self.c * factor,
            scale: self.scale,
            xi: self.xi.iter().map(|x| x * factor).collect(),
            gamma: self.gamma.iter().map(|x| x * factor).collect(),
            beta: self.beta.clone(),
        }
    }
}

/// Tangent-plane weights of the power mean at band powers `y`:
/// `β_k = (1/K) (y_k / M_s(y))^{s−1}`, with `y` floored at [`POWER_FLOOR`].
pub fn power_mean_gradient(y: &[f64], s: f64) -> Vec<f64> {
    let floored: Vec<f64> = y.iter().map(|v| v.max(POWER_FLOOR)).collect();
    let mean = power_mean(&floored, s);
    let inv_k = 1.0 / y.len() as f64;
    floored.iter().map(|v| inv_k * (v / mean).powf(s - 1.0)).collect()
}

pub fn surrogate_system(spec: &CostSpec, coeffs: &PairCoefficients, q_hat: &DoaVector) -> SurrogateSystem {
    let np = coeffs.num_pairs;
    let nk = coeffs.num_bands();
    let proj: Vec<f64> = coeffs.deltas.iter().map(|d| d.dot(q_hat.as_vector())).collect();
    let two_over_m = 2.0 / coeffs.num_sensors as f64;

    // Pass 1: wrapped phases and band powers at q̂.
    let mut wrapped = Vec::with_capacity(nk * np);
    let mut y = Vec::with_capacity(nk);
    for k in 0..nk {
        let w = coeffs.omega[k];
        let row = k * np;
        let mut acc = 0.0;
        for p in 0..np {
            let (z0, phi0) = wrap_phase(coeffs.psi[row + p] + PI - w * proj[p]);
            // cos(ψ − ωΔᵀq̂) = −cos φ0
            acc -= coeffs.u[row + p] * phi0.cos();
            wrapped.push((z0, phi0));
        }
        y.push((coeffs.trace_over_m[k] + two_over_m * acc).max(0.0));
    }
    let beta = power_mean_gradient(&y, spec.exponent());

    // Pass 2: accumulate the per-pair weights.
    let mut xi = vec![0.0; np];
    let mut gamma = vec![0.0; np];
    for k in 0..nk {
        let w = coeffs.omega[k];
        let row = k * np;
        for p in 0..np {
            let (z0, phi0) = wrapped[row + p];
            let u_hat = coeffs.u[row + p] * sinc(phi0);
            let psi_hat = coeffs.psi[row + p] + PI + TWO_PI * z0 as f64;
            let bu = beta[k] * u_hat;
            xi[p] += w * w * bu;
            gamma[p] += w * bu * psi_hat;
        }
    }

    let mut d = Matrix3::zeros();
    let mut v = Vector3::zeros();
    for ((delta, &x), &g) in coeffs.deltas.iter().zip(&xi).zip(&gamma) {
        d += x * delta * delta.transpose();
        v += g * delta;
    }
    let c = xi.iter().copied().fold(0.0, f64::max) * coeffs.scatter_max;
    SurrogateSystem { d, v, c, scale: 1.0 / coeffs.num_sensors as f64, xi, gamma, beta }
}

/// `C = (max_p ξ_p) · λ_max(Σ_p Δ_p Δ_pᵀ)`; the geometry factor is cached on
/// the [`ArrayGeometry`].
pub fn majorization_constant(xi: &[f64], geometry: &ArrayGeometry) -> f64 {
    xi.iter().copied().fold(0.0, f64::max) * geometry.pair_scatter_max_eigenvalue()
}
