//! The full localization chain: weighting, covariance, band selection, cost,
//! grid search and refinement.

use std::path::PathBuf;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    grid_search, mvdr_cost_spec, CostSpec, Estimator, DEFAULT_MIN_SEPARATION_DEG, DEFAULT_MVDR_LOADING,
};
use crate::manifold::{angles_from_doa, fibonacci_grid_with_neighbors, ArrayGeometry, DoaVector, SphericalGrid};
use crate::manifold::DEFAULT_GRID_NEIGHBORS;
use crate::mm::{refine, RefinementTrace, Variant, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL};
use crate::spectral::{
    apply_weighting, band_select, sample_covariance, stft, SpectralFrames, Window, DEFAULT_FRAME_SIZE, DEFAULT_HOP,
};

pub const DEFAULT_F_MIN: f64 = 300.0;
pub const DEFAULT_F_MAX: f64 = 3500.0;
pub const DEFAULT_GRID_SIZE: usize = 100;

/// `"quadratic"`, `"linear"` or `"none"` (grid search only).
pub fn parse_variant(name: &str) -> Result<Option<Variant>> {
    if name.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        name.parse().map(Some)
    }
}

pub fn variant_name(variant: Option<Variant>) -> &'static str {
    variant.map_or("none", Variant::name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub estimator: Estimator,
    /// `None` picks the estimator's default exponent.
    pub s: Option<f64>,
    pub num_sources: usize,
    pub grid_size: usize,
    pub grid_neighbors: usize,
    pub variant: Option<Variant>,
    pub iters: usize,
    pub rel_tol: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub min_separation_deg: f64,
    pub mvdr_loading: f64,
    pub frame_size: usize,
    pub hop: usize,
    pub window: Window,
}

/// One located source.
#[derive(Debug, Clone)]
pub struct SourceEstimate {
    pub doa: DoaVector,
    pub objective: f64,
    /// Grid point the refinement started from.
    pub initial: DoaVector,
    /// Absent when refinement is off.
    pub trace: Option<RefinementTrace>,
}

impl SourceEstimate {
    /// Cost values from the grid point onward.
    pub fn objectives(&self) -> Vec<f64> {
        match &self.trace {
            Some(t) => t.objectives.clone(),
            None => vec![self.objective],
        }
    }
}

impl Pipeline {
    pub fn new(estimator: Estimator) -> Self {
        Pipeline {
            estimator,
            s: None,
            num_sources: 1,
            grid_size: DEFAULT_GRID_SIZE,
            grid_neighbors: DEFAULT_GRID_NEIGHBORS,
            variant: Some(Variant::Quadratic),
            iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            f_min: DEFAULT_F_MIN,
            f_max: DEFAULT_F_MAX,
            min_separation_deg: DEFAULT_MIN_SEPARATION_DEG,
            mvdr_loading: DEFAULT_MVDR_LOADING,
            frame_size: DEFAULT_FRAME_SIZE,
            hop: DEFAULT_HOP,
            window: Window::Hann,
        }
    }

    pub fn with_exponent(mut self, s: f64) -> Self {
        self.s = Some(s);
        self
    }

    pub fn with_sources(mut self, num_sources: usize) -> Self {
        self.num_sources = num_sources;
        self
    }

    pub fn with_grid_size(mut self, grid_size: usize) -> Self {
        self.grid_size = grid_size;
        self
    }

    pub fn with_variant(mut self, variant: Option<Variant>) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.iters = iters;
        self
    }

    pub fn with_band(mut self, f_min: f64, f_max: f64) -> Self {
        self.f_min = f_min;
        self.f_max = f_max;
        self
    }

    pub fn exponent(&self) -> f64 {
        self.s.unwrap_or_else(|| self.estimator.default_exponent())
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sources == 0 {
            return Err(Error::invalid("number of sources must be at least 1"));
        }
        if self.grid_size < 4 {
            return Err(Error::invalid(format!("grid size must be at least 4, got {}", self.grid_size)));
        }
        if !(self.min_separation_deg >= 0.0 && self.min_separation_deg.is_finite()) {
            return Err(Error::invalid("minimum separation must be a non-negative angle"));
        }
        if !(self.mvdr_loading >= 0.0) {
            return Err(Error::invalid("diagonal loading must be non-negative"));
        }
        if !self.rel_tol.is_finite() {
            return Err(Error::invalid("tolerance must be finite"));
        }
        let s = self.exponent();
        if !(s <= 1.0 && s != 0.0 && s.is_finite()) {
            return Err(Error::invalid(format!("exponent s must be finite, at most 1 and nonzero, got {s}")));
        }
        Ok(())
    }

    /// Builds the cost from time-frequency frames.
    pub fn cost_spec(&self, frames: &SpectralFrames, geometry: &ArrayGeometry) -> Result<CostSpec> {
        self.validate()?;
        if frames.num_sensors() != geometry.num_sensors() {
            return Err(Error::ChannelMismatch { expected: geometry.num_sensors(), got: frames.num_sensors() });
        }
        let weighted = apply_weighting(frames, self.estimator.weighting());
        let cov = band_select(&sample_covariance(&weighted)?, self.f_min, self.f_max)?;
        let c = geometry.speed_of_sound();
        match self.estimator {
            Estimator::Mvdr => mvdr_cost_spec(&cov, c, self.mvdr_loading, self.exponent()),
            e => e.cost_spec(&cov, c, self.num_sources, self.exponent()),
        }
    }

    pub fn grid(&self) -> Result<SphericalGrid> {
        fibonacci_grid_with_neighbors(self.grid_size, self.grid_neighbors)
    }

    /// Grid search and refinement on a prepared cost and grid.
    pub fn locate_with(&self, spec: &CostSpec, geometry: &ArrayGeometry, grid: &SphericalGrid) -> Vec<SourceEstimate> {
        let peaks = grid_search(spec, geometry, grid, self.num_sources, self.min_separation_deg.to_radians());
        peaks
            .into_iter()
            .map(|peak| match self.variant {
                None => SourceEstimate { doa: peak.doa, objective: peak.value, initial: peak.doa, trace: None },
                Some(variant) => {
                    let trace = refine(spec, geometry, peak.doa, variant, self.iters, self.rel_tol);
                    SourceEstimate {
                        doa: trace.final_doa(),
                        objective: trace.final_objective(),
                        initial: peak.doa,
                        trace: Some(trace),
                    }
                }
            })
            .collect()
    }

    pub fn locate(&self, frames: &SpectralFrames, geometry: &ArrayGeometry) -> Result<Vec<SourceEstimate>> {
        let spec = self.cost_spec(frames, geometry)?;
        let grid = self.grid()?;
        Ok(self.locate_with(&spec, geometry, &grid))
    }

    /// Runs the STFT on a `T x M` signal first.
    pub fn locate_signal(
        &self,
        signal: ArrayView2<f64>,
        sample_rate: f64,
        geometry: &ArrayGeometry,
    ) -> Result<Vec<SourceEstimate>> {
        if signal.ncols() != geometry.num_sensors() {
            return Err(Error::ChannelMismatch { expected: geometry.num_sensors(), got: signal.ncols() });
        }
        self.validate()?;
        let frames = stft(signal, sample_rate, self.frame_size, self.hop, self.window)?;
        self.locate(&frames, geometry)
    }

    pub fn report(&self, estimates: &[SourceEstimate]) -> LocateReport {
        LocateReport {
            estimator: self.estimator.name().to_string(),
            s: self.exponent(),
            variant: variant_name(self.variant).to_string(),
            grid_size: self.grid_size,
            sources: estimates.iter().map(SourceReport::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub doa: [f64; 3],
    pub colatitude_deg: f64,
    pub azimuth_deg: f64,
    pub objective: f64,
    pub trace: Vec<f64>,
}

impl From<&SourceEstimate> for SourceReport {
    fn from(e: &SourceEstimate) -> Self {
        let (colat, az) = angles_from_doa(&e.doa);
        SourceReport {
            doa: e.doa.to_array(),
            colatitude_deg: colat.to_degrees(),
            azimuth_deg: az.to_degrees(),
            objective: e.objective,
            trace: e.objectives(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateReport {
    pub estimator: String,
    pub s: f64,
    pub variant: String,
    pub grid_size: usize,
    pub sources: Vec<SourceReport>,
}

/// Flat run configuration, as read from a JSON file. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Option<PathBuf>,
    pub input: Option<PathBuf>,
    /// Channel count of a raw float32 input; WAV input ignores it.
    pub raw_channels: Option<usize>,
    pub sample_rate: f64,
    pub frame_size: usize,
    pub hop: usize,
    pub window: String,
    pub f_min: f64,
    pub f_max: f64,
    pub estimator: String,
    pub s: Option<f64>,
    pub num_sources: usize,
    pub grid_size: usize,
    pub variant: String,
    pub iters: usize,
    pub rel_tol: f64,
    pub min_separation_deg: f64,
    pub mvdr_loading: f64,
    pub seed: u64,
    pub snr_db: f64,
    pub duration: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = Pipeline::new(Estimator::SrpPhat);
        RunConfig {
            geometry: None,
            input: None,
            raw_channels: None,
            sample_rate: crate::spectral::DEFAULT_SAMPLE_RATE,
            frame_size: p.frame_size,
            hop: p.hop,
            window: "hann".into(),
            f_min: p.f_min,
            f_max: p.f_max,
            estimator: p.estimator.name().into(),
            s: None,
            num_sources: p.num_sources,
            grid_size: p.grid_size,
            variant: variant_name(p.variant).into(),
            iters: p.iters,
            rel_tol: p.rel_tol,
            min_separation_deg: p.min_separation_deg,
            mvdr_loading: p.mvdr_loading,
            seed: 0,
            snr_db: 20.0,
            duration: 1.0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn pipeline(&self) -> Result<Pipeline> {
        let p = Pipeline {
            estimator: self.estimator.parse()?,
            s: self.s,
            num_sources: self.num_sources,
            grid_size: self.grid_size,
            grid_neighbors: DEFAULT_GRID_NEIGHBORS,
            variant: parse_variant(&self.variant)?,
            iters: self.iters,
            rel_tol: self.rel_tol,
            f_min: self.f_min,
            f_max: self.f_max,
            min_separation_deg: self.min_separation_deg,
            mvdr_loading: self.mvdr_loading,
            frame_size: self.frame_size,
            hop: self.hop,
            window: self.window.parse()?,
        };
        p.validate()?;
        Ok(p)
    }

    /// The geometry file, or the built-in default array.
    pub fn geometry(&self) -> Result<ArrayGeometry> {
        match &self.geometry {
            Some(path) => ArrayGeometry::load(path),
            None => Ok(ArrayGeometry::default_array()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::objective;
    use crate::manifold::{great_circle_distance, steering_vector};
    use ndarray::Array3;
    use num_complex::Complex64;

    fn rank_one_frames(g: &ArrayGeometry, q: &DoaVector) -> SpectralFrames {
        let freqs: Vec<f64> = (0..=256).map(|k| k as f64 * 31.25).collect();
        let mut data = Array3::<Complex64>::zeros((freqs.len(), 4, g.num_sensors()));
        for (k, f) in freqs.iter().enumerate() {
            let a = steering_vector(g, 2.0 * std::f64::consts::PI * f / g.speed_of_sound(), q);
            for n in 0..4 {
                let amp = Complex64::from_polar(1.0 + n as f64, 0.7 * n as f64 + 0.1 * k as f64);
                for m in 0..g.num_sensors() {
                    data[(k, n, m)] = amp * a[m];
                }
            }
        }
        SpectralFrames::new(data, freqs, 16_000.0).unwrap()
    }

    #[test]
    fn locate_noiseless_source() {
        let g = ArrayGeometry::default_array();
        let truth = DoaVector::from_angles(1.1, -2.0);
        let frames = rank_one_frames(&g, &truth);
        for e in [Estimator::Srp, Estimator::SrpPhat, Estimator::Mvdr] {
            let found = Pipeline::new(e).locate(&frames, &g).unwrap();
            assert_eq!(found.len(), 1);
            let err = great_circle_distance(&found[0].doa, &truth).to_degrees();
            assert!(err < 0.1, "{e}: {err}");
            assert!(found[0].objective <= objective(&Pipeline::new(e).cost_spec(&frames, &g).unwrap(), &g, &found[0].initial));
        }
    }

    #[test]
    fn variant_none_returns_grid_points() {
        let g = ArrayGeometry::default_array();
        let frames = rank_one_frames(&g, &DoaVector::from_angles(0.4, 2.5));
        let p = Pipeline::new(Estimator::SrpPhat).with_variant(None);
        let found = p.locate(&frames, &g).unwrap();
        let spec = p.cost_spec(&frames, &g).unwrap();
        let peaks = grid_search(&spec, &g, &p.grid().unwrap(), 1, p.min_separation_deg.to_radians());
        assert_eq!(found[0].doa, peaks[0].doa);
        assert_eq!(found[0].objective, peaks[0].value);
        assert_eq!(found[0].objectives(), vec![peaks[0].value]);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let g = ArrayGeometry::default_array();
        let mono = ndarray::Array2::<f64>::zeros((2048, 1));
        let err = Pipeline::new(Estimator::Srp).locate_signal(mono.view(), 16_000.0, &g).unwrap_err();
        assert!(matches!(err, Error::ChannelMismatch { expected: 12, got: 1 }));
    }

    #[test]
    fn run_config_defaults_and_overrides() {
        let cfg = RunConfig::from_json(r#"{"estimator": "music", "variant": "none", "grid_size": 500}"#).unwrap();
        let p = cfg.pipeline().unwrap();
        assert_eq!(p.estimator, Estimator::Music);
        assert_eq!(p.variant, None);
        assert_eq!(p.grid_size, 500);
        assert_eq!(p.exponent(), -1.0);
        assert!(RunConfig::from_json(r#"{"grid": 5}"#).is_err());
        assert!(RunConfig::from_json(r#"{"variant": "cubic"}"#).unwrap().pipeline().is_err());
        assert!(RunConfig::from_json(r#"{"s": 0.0}"#).unwrap().pipeline().is_err());
        assert!(RunConfig::from_json(r#"{"grid_size": 3}"#).unwrap().pipeline().is_err());
    }
}
