//! Synthetic free-field scenes, scoring, and Monte Carlo sweeps.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{grid_search, Estimator};
use crate::manifold::{great_circle_distance, steering_vector, ArrayGeometry, DoaVector, SphericalGrid};
use crate::manifold::{DEFAULT_ARRAY_SEED, DEFAULT_SPEED_OF_SOUND};
use crate::mm::refine_observed;
use crate::pipeline::{parse_variant, variant_name, Pipeline, DEFAULT_F_MAX, DEFAULT_F_MIN};
use crate::spectral::{stft, SpectralFrames, Window, DEFAULT_FRAME_SIZE, DEFAULT_HOP, DEFAULT_SAMPLE_RATE};

/// Half-length in samples of the fractional-delay interpolation kernel.
const DELAY_KERNEL_HALF: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub doa: DoaVector,
    /// Power of the source signal inside the active band.
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub geometry: ArrayGeometry,
    pub sources: Vec<Source>,
    /// `f64::INFINITY` turns the noise off.
    pub snr_db: f64,
    pub seed: u64,
    pub sample_rate: f64,
    /// Seconds.
    pub duration: f64,
    pub frame_size: usize,
    pub hop: usize,
    /// Sources are active on `f_min ≤ f ≤ f_max`.
    pub f_min: f64,
    pub f_max: f64,
}

impl Scene {
    /// Unit-variance sources at `doas` with the default STFT layout and band.
    pub fn new(geometry: ArrayGeometry, doas: &[DoaVector], snr_db: f64, seed: u64) -> Self {
        Scene {
            geometry,
            sources: doas.iter().map(|&doa| Source { doa, variance: 1.0 }).collect(),
            snr_db,
            seed,
            sample_rate: DEFAULT_SAMPLE_RATE,
            duration: 1.0,
            frame_size: DEFAULT_FRAME_SIZE,
            hop: DEFAULT_HOP,
            f_min: DEFAULT_F_MIN,
            f_max: DEFAULT_F_MAX,
        }
    }

    pub fn single_source(geometry: ArrayGeometry, doa: DoaVector, snr_db: f64, seed: u64) -> Self {
        Self::new(geometry, &[doa], snr_db, seed)
    }

    pub fn num_samples(&self) -> usize {
        (self.duration * self.sample_rate).round().max(0.0) as usize
    }

    pub fn doas(&self) -> Vec<DoaVector> {
        self.sources.iter().map(|s| s.doa).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid(format!("SNR must be a number or +inf, got {}", self.snr_db)));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if self.frame_size == 0 || !self.frame_size.is_multiple_of(2) || self.hop == 0 {
            return Err(Error::invalid("frame size must be even and positive and hop at least 1"));
        }
        if self.num_samples() < self.frame_size {
            return Err(Error::invalid(format!(
                "scene lasts {} samples, fewer than one frame of {}",
                self.num_samples(),
                self.frame_size
            )));
        }
        if self.sources.iter().any(|s| !(s.variance >= 0.0 && s.variance.is_finite())) {
            return Err(Error::invalid("source variances must be finite and non-negative"));
        }
        Ok(())
    }

    /// Noise power per sensor and band. Without sources it is 1.
    fn noise_variance(&self) -> f64 {
        if self.sources.is_empty() {
            return 1.0;
        }
        let total: f64 = self.sources.iter().map(|s| s.variance).sum();
        total / (self.geometry.num_sensors() as f64 * 10f64.powf(self.snr_db / 10.0))
    }
}

/// Time-frequency scene with its clean and noise parts kept apart.
#[derive(Debug, Clone)]
pub struct SceneFrames {
    pub frames: SpectralFrames,
    pub signal: Array3<Complex64>,
    pub noise: Array3<Complex64>,
}

fn complex_normal<R: Rng>(rng: &mut R, std: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * (std * std::f64::consts::FRAC_1_SQRT_2)
}

/// Draws `x_kn = Σ_l a_k(q_l) y_lkn + b_kn` directly in the STFT domain.
///
/// The source terms `y_lkn` are circular complex Gaussian inside the band and
/// zero outside. The noise `b_kn` is white across sensors and bands, scaled so
/// that summed signal power over summed noise power matches the SNR.
pub fn synth_stft_scene(scene: &Scene) -> Result<SceneFrames> {
    scene.validate()?;
    let m = scene.geometry.num_sensors();
    let bands = scene.frame_size / 2 + 1;
    let frames = 1 + (scene.num_samples() - scene.frame_size) / scene.hop;
    let freqs: Vec<f64> = (0..bands).map(|k| k as f64 * scene.sample_rate / scene.frame_size as f64).collect();
    let noise_std = scene.noise_variance().sqrt();
    let c = scene.geometry.speed_of_sound();

    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let mut signal = Array3::<Complex64>::zeros((bands, frames, m));
    let mut noise = Array3::<Complex64>::zeros((bands, frames, m));
    for (k, &f) in freqs.iter().enumerate() {
        let active = (scene.f_min..=scene.f_max).contains(&f);
        let steering: Vec<_> = scene
            .sources
            .iter()
            .map(|s| steering_vector(&scene.geometry, 2.0 * PI * f / c, &s.doa))
            .collect();
        for n in 0..frames {
            for (src, a) in scene.sources.iter().zip(&steering) {
                let y = complex_normal(&mut rng, src.variance.sqrt());
                if active {
                    for i in 0..m {
                        signal[(k, n, i)] += a[i] * y;
                    }
                }
            }
            if noise_std > 0.0 {
                for i in 0..m {
                    noise[(k, n, i)] = complex_normal(&mut rng, noise_std);
                }
            }
        }
    }
    let frames = SpectralFrames::new(&signal + &noise, freqs, scene.sample_rate)?;
    Ok(SceneFrames { frames, signal, noise })
}

fn delay_kernel(x: f64) -> f64 {
    let h = DELAY_KERNEL_HALF as f64;
    if x.abs() >= h {
        return 0.0;
    }
    let window = 0.5 * (1.0 + (PI * x / h).cos());
    let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
    sinc * window
}

/// Renders the scene as a `T x M` signal.
///
/// Each source is white Gaussian noise of its variance; sensor `m` receives it
/// delayed by `−d_mᵀq/c` seconds through a Hann-windowed sinc interpolator.
/// White Gaussian sensor noise is added at the scene SNR relative to the mean
/// clean channel power.
pub fn synth_time_scene(scene: &Scene) -> Result<Array2<f64>> {
    scene.validate()?;
    let len = scene.num_samples();
    let m = scene.geometry.num_sensors();
    let c = scene.geometry.speed_of_sound();
    let delays: Vec<Vec<f64>> = scene
        .sources
        .iter()
        .map(|s| scene.geometry.sensors().iter().map(|d| -d.dot(s.doa.as_vector()) / c * scene.sample_rate).collect())
        .collect();
    let max_delay = delays.iter().flatten().fold(0.0f64, |a, d| a.max(d.abs()));
    let pad = DELAY_KERNEL_HALF + max_delay.ceil() as usize + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let mut out = Array2::<f64>::zeros((len, m));
    for (src, src_delays) in scene.sources.iter().zip(&delays) {
        let std = src.variance.sqrt();
        let raw: Vec<f64> = (0..len + 2 * pad).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        for (i, &delay) in src_delays.iter().enumerate() {
            let lo = delay.ceil() as i64 - DELAY_KERNEL_HALF as i64;
            let hi = delay.floor() as i64 + DELAY_KERNEL_HALF as i64;
            let taps: Vec<(i64, f64)> = (lo..=hi).map(|j| (j, delay_kernel(j as f64 - delay))).collect();
            for t in 0..len {
                // x(t) = Σ_j s(t − j) h(j − delay)
                let acc: f64 = taps.iter().map(|&(j, h)| raw[(t as i64 - j + pad as i64) as usize] * h).sum();
                out[(t, i)] += acc;
            }
        }
    }

    if scene.snr_db.is_finite() {
        let clean_power = out.iter().map(|x| x * x).sum::<f64>() / (len * m) as f64;
        let std = if scene.sources.is_empty() { 1.0 } else { (clean_power / 10f64.powf(scene.snr_db / 10.0)).sqrt() };
        for x in out.iter_mut() {
            *x += std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(out)
}

/// Ground truth of a rendered scene, as written next to a simulated WAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub sources: Vec<TruthSource>,
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSource {
    pub doa: DoaVector,
}

impl GroundTruth {
    pub fn of(scene: &Scene) -> Self {
        GroundTruth {
            sources: scene.sources.iter().map(|s| TruthSource { doa: s.doa }).collect(),
            snr_db: scene.snr_db,
            seed: scene.seed,
        }
    }

    pub fn doas(&self) -> Vec<DoaVector> {
        self.sources.iter().map(|s| s.doa).collect()
    }
}

fn for_each_permutation(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        for_each_permutation(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Great-circle errors in degrees, `errors[i]` belonging to `truth[i]`, under
/// the assignment with the smallest mean error.
pub fn evaluate(estimates: &[DoaVector], truth: &[DoaVector]) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), got: estimates.len() });
    }
    if truth.len() > 6 {
        return Err(Error::invalid(format!("at most 6 sources can be matched, got {}", truth.len())));
    }
    let dist: Vec<Vec<f64>> =
        truth.iter().map(|t| estimates.iter().map(|e| great_circle_distance(t, e).to_degrees()).collect()).collect();
    let mut best = (f64::INFINITY, Vec::new());
    for_each_permutation(&mut (0..truth.len()).collect(), 0, &mut |perm| {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| dist[i][j]).sum();
        if total < best.0 {
            best = (total, perm.to_vec());
        }
    });
    Ok(best.1.iter().enumerate().map(|(i, &j)| dist[i][j]).collect())
}

/// `count` random directions, pairwise at least `min_separation` radians apart.
pub fn random_doas<R: Rng + ?Sized>(rng: &mut R, count: usize, min_separation: f64) -> Result<Vec<DoaVector>> {
    let mut out: Vec<DoaVector> = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > 100_000 {
            return Err(Error::invalid(format!(
                "cannot place {count} sources {:.1} degrees apart",
                min_separation.to_degrees()
            )));
        }
        let q = DoaVector::random(rng);
        if out.iter().all(|p| great_circle_distance(p, &q) >= min_separation) {
            out.push(q);
        }
    }
    Ok(out)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// How scenes are synthesized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Directly in the STFT domain.
    Stft,
    /// As time signals, then through the STFT.
    Time,
}

/// A Monte Carlo sweep. Each list is one axis of the cell grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub estimators: Vec<String>,
    /// Empty uses each estimator's default exponent.
    pub s_values: Vec<f64>,
    pub grid_sizes: Vec<usize>,
    /// `"quadratic"`, `"linear"` or `"none"`.
    pub variants: Vec<String>,
    pub iters: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub num_sources: usize,
    pub trials: usize,
    pub seed: u64,
    pub num_sensors: usize,
    pub array_radius: f64,
    pub array_seed: u64,
    pub speed_of_sound: f64,
    pub sample_rate: f64,
    pub duration: f64,
    pub frame_size: usize,
    pub hop: usize,
    pub window: String,
    pub f_min: f64,
    pub f_max: f64,
    pub min_separation_deg: f64,
    /// Minimum angle between simulated sources.
    pub source_separation_deg: f64,
    pub domain: Domain,
    /// Zero or less runs exactly the listed iteration counts.
    pub rel_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            estimators: vec!["srp-phat".into()],
            s_values: vec![],
            grid_sizes: vec![100, 10_000],
            variants: vec!["quadratic".into()],
            iters: vec![0, 30],
            snr_db: vec![20.0],
            num_sources: 1,
            trials: 100,
            seed: 0,
            num_sensors: 12,
            array_radius: 0.1,
            array_seed: DEFAULT_ARRAY_SEED,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            sample_rate: DEFAULT_SAMPLE_RATE,
            duration: 1.0,
            frame_size: DEFAULT_FRAME_SIZE,
            hop: DEFAULT_HOP,
            window: "hann".into(),
            f_min: DEFAULT_F_MIN,
            f_max: DEFAULT_F_MAX,
            min_separation_deg: crate::estimators::DEFAULT_MIN_SEPARATION_DEG,
            source_separation_deg: 30.0,
            domain: Domain::Stft,
            rel_tol: 0.0,
        }
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        let g = ArrayGeometry::random_ball(self.num_sensors, self.array_radius, self.array_seed)?;
        ArrayGeometry::new(g.sensors().to_vec(), self.speed_of_sound)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("estimators", self.estimators.is_empty()),
            ("grid_sizes", self.grid_sizes.is_empty()),
            ("variants", self.variants.is_empty()),
            ("iters", self.iters.is_empty()),
            ("snr_db", self.snr_db.is_empty()),
        ] {
            if empty {
                return Err(Error::invalid(format!("sweep axis {name} is empty")));
            }
        }
        for e in &self.estimators {
            e.parse::<Estimator>()?;
        }
        for v in &self.variants {
            parse_variant(v)?;
        }
        self.window.parse::<Window>()?;
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.num_sources == 0 || self.num_sources > 6 {
            return Err(Error::invalid("num_sources must be between 1 and 6"));
        }
        if !(self.array_radius > 0.0) {
            return Err(Error::invalid("array radius must be positive"));
        }
        if self.snr_db.iter().any(|s| s.is_nan()) {
            return Err(Error::invalid("SNR values must be numbers"));
        }
        self.geometry()?;
        for (i, &s) in self.s_values.iter().enumerate() {
            if !(s <= 1.0 && s != 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("s_values[{i}] = {s} is outside (-inf, 1] without 0")));
            }
        }
        for &g in &self.grid_sizes {
            if g < 4 {
                return Err(Error::invalid(format!("grid size must be at least 4, got {g}")));
            }
        }
        Ok(())
    }
}

/// One matched source error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub estimator: String,
    pub s: f64,
    pub grid_size: usize,
    pub variant: String,
    pub iters: usize,
    pub snr_db: f64,
    pub trial: usize,
    pub src_index: usize,
    pub error_deg: f64,
}

/// Wall time of one trial in one cell: grid search plus refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub estimator: String,
    pub s: f64,
    pub grid_size: usize,
    pub variant: String,
    pub iters: usize,
    pub snr_db: f64,
    pub trial: usize,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub estimator: String,
    pub s: f64,
    pub grid_size: usize,
    pub variant: String,
    pub iters: usize,
    pub snr_db: f64,
    pub trials: usize,
    pub median_error_deg: f64,
    pub median_runtime_s: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvalResult {
    pub rows: Vec<ErrorRow>,
    pub timings: Vec<TimingRow>,
    pub summary: Vec<CellSummary>,
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl EvalResult {
    /// Per-source errors, header `estimator,s,grid_size,variant,iters,snr_db,trial,src_index,error_deg`.
    pub fn errors_csv(&self) -> Result<String> {
        to_csv(&self.rows)
    }

    pub fn timings_csv(&self) -> Result<String> {
        to_csv(&self.timings)
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    /// The summary cell matching all given coordinates.
    pub fn cell(&self, estimator: &str, grid_size: usize, variant: &str, iters: usize, snr_db: f64) -> Option<&CellSummary> {
        self.summary.iter().find(|c| {
            c.estimator == estimator
                && c.grid_size == grid_size
                && c.variant == variant
                && c.iters == iters
                && c.snr_db == snr_db
        })
    }
}

/// Seed of the scene for one (SNR, trial) pair. Cells that differ only in
/// estimator, exponent, grid or variant see the same scenes.
pub fn trial_seed(master: u64, snr_index: usize, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((snr_index as u64) << 32) | trial as u64);
    rng.next_u64()
}

#[derive(Default)]
struct Cell {
    rows: Vec<ErrorRow>,
    timings: Vec<TimingRow>,
}

/// Runs every cell of the sweep.
///
/// Output is ordered by cell, then trial, then source, and is identical for a
/// fixed seed except for the timings.
pub fn monte_carlo(config: &SweepConfig) -> Result<EvalResult> {
    config.validate()?;
    let geometry = config.geometry()?;
    let estimators: Vec<Estimator> = config.estimators.iter().map(|e| e.parse()).collect::<Result<_>>()?;
    let variants: Vec<_> = config.variants.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?;
    let window: Window = config.window.parse()?;
    let max_iters = config.iters.iter().copied().max().unwrap_or(0);
    let grids: Vec<SphericalGrid> =
        config.grid_sizes.iter().map(|&g| crate::manifold::fibonacci_grid(g)).collect::<Result<_>>()?;
    let exponents = |e: Estimator| -> Vec<f64> {
        if config.s_values.is_empty() {
            vec![e.default_exponent()]
        } else {
            config.s_values.clone()
        }
    };
    let min_sep = config.min_separation_deg.to_radians();

    let mut cells: BTreeMap<[usize; 6], Cell> = BTreeMap::new();
    for (si, &snr) in config.snr_db.iter().enumerate() {
        for trial in 0..config.trials {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.seed, si, trial));
            let truth = random_doas(&mut rng, config.num_sources, config.source_separation_deg.to_radians())?;
            let scene = Scene {
                geometry: geometry.clone(),
                sources: truth.iter().map(|&doa| Source { doa, variance: 1.0 }).collect(),
                snr_db: snr,
                seed: rng.next_u64(),
                sample_rate: config.sample_rate,
                duration: config.duration,
                frame_size: config.frame_size,
                hop: config.hop,
                f_min: config.f_min,
                f_max: config.f_max,
            };
            let frames = match config.domain {
                Domain::Stft => synth_stft_scene(&scene)?.frames,
                Domain::Time => {
                    let x = synth_time_scene(&scene)?;
                    stft(x.view(), config.sample_rate, config.frame_size, config.hop, window)?
                }
            };

            for (ei, &estimator) in estimators.iter().enumerate() {
                for (sj, &s) in exponents(estimator).iter().enumerate() {
                    let mut pipeline = Pipeline::new(estimator).with_exponent(s).with_sources(config.num_sources);
                    pipeline.f_min = config.f_min;
                    pipeline.f_max = config.f_max;
                    pipeline.min_separation_deg = config.min_separation_deg;
                    let spec = pipeline.cost_spec(&frames, &geometry)?;

                    for (gi, grid) in grids.iter().enumerate() {
                        let start = Instant::now();
                        let peaks = grid_search(&spec, &geometry, grid, config.num_sources, min_sep);
                        let grid_time = start.elapsed();
                        let starts: Vec<DoaVector> = peaks.iter().map(|p| p.doa).collect();

                        for (vi, &variant) in variants.iter().enumerate() {
                            let mut record = |ti: usize, iters: usize, estimates: &[DoaVector], elapsed: Duration| {
                                let errors = evaluate(estimates, &truth)?;
                                let cell = cells.entry([ei, sj, gi, vi, ti, si]).or_default();
                                let estimator = estimator.name();
                                let variant = variant_name(variant);
                                for (src_index, error_deg) in errors.into_iter().enumerate() {
                                    cell.rows.push(ErrorRow {
                                        estimator: estimator.into(),
                                        s,
                                        grid_size: grid.len(),
                                        variant: variant.into(),
                                        iters,
                                        snr_db: snr,
                                        trial,
                                        src_index,
                                        error_deg,
                                    });
                                }
                                cell.timings.push(TimingRow {
                                    estimator: estimator.into(),
                                    s,
                                    grid_size: grid.len(),
                                    variant: variant.into(),
                                    iters,
                                    snr_db: snr,
                                    trial,
                                    runtime_s: elapsed.as_secs_f64(),
                                });
                                Ok::<(), Error>(())
                            };

                            let Some(variant) = variant else {
                                record(0, 0, &starts, grid_time)?;
                                continue;
                            };
                            // per source: iterates and cumulative step times
                            let mut runs = Vec::with_capacity(starts.len());
                            for &q0 in &starts {
                                let mut elapsed = vec![Duration::ZERO];
                                let mut last = Instant::now();
                                let trace =
                                    refine_observed(&spec, &geometry, q0, variant, max_iters, config.rel_tol, |_, _| {
                                        let now = Instant::now();
                                        elapsed.push(*elapsed.last().unwrap() + (now - last));
                                        last = now;
                                    });
                                runs.push((trace, elapsed));
                            }
                            for (ti, &t) in config.iters.iter().enumerate() {
                                let estimates: Vec<DoaVector> = runs.iter().map(|(tr, _)| tr.at(t)).collect();
                                let refine_time: Duration =
                                    runs.iter().map(|(_, el)| el[t.min(el.len() - 1)]).sum();
                                record(ti, t, &estimates, grid_time + refine_time)?;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut result = EvalResult::default();
    for (_, mut cell) in cells {
        let first = cell.timings[0].clone();
        let mut errors: Vec<f64> = cell.rows.iter().map(|r| r.error_deg).collect();
        let mut runtimes: Vec<f64> = cell.timings.iter().map(|t| t.runtime_s).collect();
        result.summary.push(CellSummary {
            estimator: first.estimator,
            s: first.s,
            grid_size: first.grid_size,
            variant: first.variant,
            iters: first.iters,
            snr_db: first.snr_db,
            trials: cell.timings.len(),
            median_error_deg: median(&mut errors),
            median_runtime_s: median(&mut runtimes),
        });
        result.rows.append(&mut cell.rows);
        result.timings.append(&mut cell.timings);
    }
    Ok(result)
}
