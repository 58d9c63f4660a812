//! Time-frequency front end: STFT, per-entry weighting, and per-band sample
//! covariance matrices.
//!
//! The forward DFT is unnormalized, `X_k = Σ_n x_n e^{-j2πkn/N}`. Every
//! covariance-based estimator is invariant to a common positive scale, so the
//! convention only shows up in energy identities.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::{Array2, Array3, ArrayView2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_FRAME_SIZE: usize = 512;
pub const DEFAULT_HOP: usize = 256;
pub const DEFAULT_SAMPLE_RATE: f64 = 16_000.0;

/// Relative magnitude floor used by PHAT weighting.
pub const PHAT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hann,
    Hamming,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let x = 2.0 * PI * i as f64 / nf;
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::Hamming => 0.54 - 0.46 * x.cos(),
                }
            })
            .collect()
    }
}

impl FromStr for Window {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" | "boxcar" => Ok(Window::Rectangular),
            "hann" | "hanning" => Ok(Window::Hann),
            "hamming" => Ok(Window::Hamming),
            _ => Err(Error::UnknownName { kind: "window", name: s.to_string() }),
        }
    }
}

/// Multichannel time-frequency data, indexed `(band, frame, sensor)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrames {
    pub data: Array3<Complex64>,
    pub band_frequencies: Vec<f64>,
    pub sample_rate: f64,
}

impl SpectralFrames {
    pub fn new(data: Array3<Complex64>, band_frequencies: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if data.shape()[0] != band_frequencies.len() {
            return Err(Error::LengthMismatch { expected: data.shape()[0], got: band_frequencies.len() });
        }
        if band_frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("band frequencies must be strictly increasing"));
        }
        Ok(SpectralFrames { data, band_frequencies, sample_rate })
    }

    pub fn num_bands(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn num_frames(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn num_sensors(&self) -> usize {
        self.data.shape()[2]
    }
}

/// Short-time Fourier transform of a `T x M` real signal.
///
/// Produces `frame_size / 2 + 1` one-sided bands with `f_k = k · fs / frame_size`
/// and `1 + (T − frame_size) / hop` frames.
pub fn stft(
    signal: ArrayView2<f64>,
    sample_rate: f64,
    frame_size: usize,
    hop: usize,
    window: Window,
) -> Result<SpectralFrames> {
    let (len, channels) = signal.dim();
    if frame_size == 0 || !frame_size.is_multiple_of(2) {
        return Err(Error::invalid(format!("frame size must be even and positive, got {frame_size}")));
    }
    if hop == 0 {
        return Err(Error::invalid("hop must be at least 1"));
    }
    if len < frame_size {
        return Err(Error::invalid(format!("signal has {len} samples, fewer than one frame of {frame_size}")));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::invalid(format!("sample rate must be positive, got {sample_rate}")));
    }

    let frames = 1 + (len - frame_size) / hop;
    let bands = frame_size / 2 + 1;
    let win = window.coefficients(frame_size);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(frame_size);
    let mut buf = vec![Complex64::new(0.0, 0.0); frame_size];
    let mut data = Array3::<Complex64>::zeros((bands, frames, channels));

    for n in 0..frames {
        let start = n * hop;
        for m in 0..channels {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(signal[(start + i, m)] * win[i], 0.0);
            }
            fft.process(&mut buf);
            for k in 0..bands {
                data[(k, n, m)] = buf[k];
            }
        }
    }

    let band_frequencies = (0..bands).map(|k| k as f64 * sample_rate / frame_size as f64).collect();
    SpectralFrames::new(data, band_frequencies, sample_rate)
}

/// Per-entry weighting applied before the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Unit,
    /// `x / |x|`, with a magnitude floor for silent entries.
    Phat,
}

pub fn apply_weighting(frames: &SpectralFrames, scheme: Weighting) -> SpectralFrames {
    match scheme {
        Weighting::Unit => frames.clone(),
        Weighting::Phat => {
            let mut out = frames.clone();
            let (bands, nframes, _) = out.data.dim();
            for k in 0..bands {
                for n in 0..nframes {
                    let mut row = out.data.slice_mut(ndarray::s![k, n, ..]);
                    let mean = row.iter().map(|x| x.norm()).sum::<f64>() / row.len().max(1) as f64;
                    let floor = PHAT_FLOOR * mean;
                    for x in row.iter_mut() {
                        let mag = x.norm();
                        if mag > 0.0 {
                            *x /= mag.max(floor);
                        }
                    }
                }
            }
            out
        }
    }
}

/// One Hermitian PSD matrix per band.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub matrices: Vec<DMatrix<Complex64>>,
    pub band_frequencies: Vec<f64>,
}

impl CovarianceSet {
    pub fn num_bands(&self) -> usize {
        self.matrices.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }

    /// Largest Hermitian defect relative to the trace, over all bands.
    pub fn max_hermitian_defect(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| linalg::hermitian_defect(m) / linalg::trace_re(m).abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

/// `S_k = N^{-1} Σ_n x_kn x_knᴴ`.
pub fn sample_covariance(frames: &SpectralFrames) -> Result<CovarianceSet> {
    let (bands, nframes, sensors) = frames.data.dim();
    if nframes == 0 {
        return Err(Error::invalid("covariance needs at least one frame"));
    }
    let scale = 1.0 / nframes as f64;
    let mut matrices = Vec::with_capacity(bands);
    for k in 0..bands {
        let mut s = DMatrix::<Complex64>::zeros(sensors, sensors);
        for n in 0..nframes {
            let x = frames.data.slice(ndarray::s![k, n, ..]);
            for i in 0..sensors {
                let xi = x[i];
                for j in i..sensors {
                    s[(i, j)] += xi * x[j].conj();
                }
            }
        }
        for i in 0..sensors {
            s[(i, i)] = Complex64::new(s[(i, i)].re * scale, 0.0);
            for j in i + 1..sensors {
                let v = s[(i, j)] * scale;
                s[(i, j)] = v;
                s[(j, i)] = v.conj();
            }
        }
        matrices.push(s);
    }
    Ok(CovarianceSet { matrices, band_frequencies: frames.band_frequencies.clone() })
}

/// Keeps the bands with `f_min ≤ f_k ≤ f_max`.
pub fn band_select(cov: &CovarianceSet, f_min: f64, f_max: f64) -> Result<CovarianceSet> {
    if !(f_min < f_max) {
        return Err(Error::invalid(format!("band range needs f_min < f_max, got [{f_min}, {f_max}]")));
    }
    let keep: Vec<usize> = (0..cov.num_bands())
        .filter(|&k| (f_min..=f_max).contains(&cov.band_frequencies[k]))
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyBandSelection { f_min, f_max });
    }
    Ok(CovarianceSet {
        matrices: keep.iter().map(|&k| cov.matrices[k].clone()).collect(),
        band_frequencies: keep.iter().map(|&k| cov.band_frequencies[k]).collect(),
    })
}

/// Inverse of [`stft`] for a rectangular window with `hop == frame_size`.
pub fn istft_rect_contiguous(frames: &SpectralFrames, frame_size: usize) -> Result<Array2<f64>> {
    let (bands, nframes, channels) = frames.data.dim();
    if bands != frame_size / 2 + 1 {
        return Err(Error::LengthMismatch { expected: frame_size / 2 + 1, got: bands });
    }
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(frame_size);
    let mut out = Array2::<f64>::zeros((nframes * frame_size, channels));
    let mut buf = vec![Complex64::new(0.0, 0.0); frame_size];
    for n in 0..nframes {
        for m in 0..channels {
            for k in 0..bands {
                buf[k] = frames.data[(k, n, m)];
            }
            for k in bands..frame_size {
                buf[k] = frames.data[(frame_size - k, n, m)].conj();
            }
            ifft.process(&mut buf);
            for i in 0..frame_size {
                out[(n * frame_size + i, m)] = buf[i].re / frame_size as f64;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(len: usize, channels: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((len, channels), |_| rng.random_range(-1.0..1.0))
    }

    fn random_frames(bands: usize, frames: usize, sensors: usize, seed: u64) -> SpectralFrames {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array3::from_shape_fn((bands, frames, sensors), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        SpectralFrames::new(data, (0..bands).map(|k| 100.0 * k as f64).collect(), 16000.0).unwrap()
    }

    #[test]
    fn stft_shape_and_frequencies() {
        let x = random_signal(16000, 3, 1);
        let f = stft(x.view(), 16000.0, 512, 256, Window::Hann).unwrap();
        assert_eq!(f.num_bands(), 257);
        assert_eq!(f.num_frames(), 1 + (16000 - 512) / 256);
        assert_eq!(f.num_sensors(), 3);
        assert_eq!(f.band_frequencies[1], 31.25);
        assert_eq!(f.band_frequencies[256], 8000.0);
    }

    #[test]
    fn stft_preconditions() {
        let x = random_signal(100, 1, 1);
        assert!(stft(x.view(), 16000.0, 64, 0, Window::Hann).is_err());
        assert!(stft(x.view(), 16000.0, 63, 8, Window::Hann).is_err());
        assert!(stft(x.view(), 16000.0, 128, 8, Window::Hann).is_err());
        assert!(matches!("kaiser".parse::<Window>(), Err(Error::UnknownName { .. })));
    }

    #[test]
    fn stft_zero_input() {
        let x = Array2::<f64>::zeros((1024, 2));
        let f = stft(x.view(), 16000.0, 256, 128, Window::Hann).unwrap();
        assert!(f.data.iter().all(|c| *c == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn stft_sinusoid_concentrates_in_its_bin() {
        let n = 256;
        let bin = 19;
        let x = Array2::from_shape_fn((n, 1), |(t, _)| (2.0 * PI * bin as f64 * t as f64 / n as f64).cos());
        let f = stft(x.view(), 8000.0, n, n, Window::Rectangular).unwrap();
        let mags: Vec<f64> = (0..f.num_bands()).map(|k| f.data[(k, 0, 0)].norm()).collect();
        // closed form: |X_bin| = N / 2
        assert!((mags[bin] - n as f64 / 2.0).abs() < 1e-9);
        for (k, m) in mags.iter().enumerate() {
            if k != bin {
                assert!(*m <= 1e-8 * mags[bin], "bin {k}: {m}");
            }
        }
    }

    #[test]
    fn stft_one_sided_parseval() {
        let n = 128;
        let x = random_signal(n, 1, 9);
        let f = stft(x.view(), 8000.0, n, n, Window::Rectangular).unwrap();
        let time_energy: f64 = x.iter().map(|v| v * v).sum();
        let bands = f.num_bands();
        let mut spec_energy = 0.0;
        for k in 0..bands {
            let w = if k == 0 || k == bands - 1 { 1.0 } else { 2.0 };
            spec_energy += w * f.data[(k, 0, 0)].norm_sqr();
        }
        assert!((spec_energy - n as f64 * time_energy).abs() < 1e-9 * spec_energy);
    }

    #[test]
    fn stft_rect_round_trip() {
        let n = 64;
        let x = random_signal(n * 5, 2, 4);
        let f = stft(x.view(), 8000.0, n, n, Window::Rectangular).unwrap();
        let back = istft_rect_contiguous(&f, n).unwrap();
        let err = (&back - &x).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn weighting_examples() {
        let mut f = random_frames(2, 2, 3, 5);
        assert_eq!(apply_weighting(&f, Weighting::Unit), f);

        f.data[(0, 0, 0)] = Complex64::new(3.0, 4.0);
        f.data[(0, 0, 1)] = Complex64::new(0.0, 0.0);
        let w = apply_weighting(&f, Weighting::Phat);
        assert!((w.data[(0, 0, 0)] - Complex64::new(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(w.data[(0, 0, 1)], Complex64::new(0.0, 0.0));
        assert!(w.data.iter().all(|x| x.norm() <= 1.0 + 1e-15));

        let twice = apply_weighting(&w, Weighting::Phat);
        for (a, b) in twice.data.iter().zip(w.data.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn covariance_rank_one_and_basis() {
        let f = random_frames(1, 1, 4, 2);
        let s = sample_covariance(&f).unwrap();
        let x = f.data.slice(ndarray::s![0, 0, ..]);
        for i in 0..4 {
            for j in 0..4 {
                assert!((s.matrices[0][(i, j)] - x[i] * x[j].conj()).norm() < 1e-15);
            }
        }

        let mut data = Array3::zeros((2, 5, 3));
        for k in 0..2 {
            for n in 0..5 {
                data[(k, n, 0)] = Complex64::new(1.0, 0.0);
            }
        }
        let e1 = SpectralFrames::new(data, vec![0.0, 1.0], 1.0).unwrap();
        let s = sample_covariance(&e1).unwrap();
        let mut expect = DMatrix::zeros(3, 3);
        expect[(0, 0)] = Complex64::new(1.0, 0.0);
        assert_eq!(s.matrices[1], expect);
    }

    #[test]
    fn covariance_matches_naive_sum() {
        let f = random_frames(4, 3, 5, 11);
        let s = sample_covariance(&f).unwrap();
        for k in 0..4 {
            let mut naive = DMatrix::<Complex64>::zeros(5, 5);
            for n in 0..3 {
                for i in 0..5 {
                    for j in 0..5 {
                        naive[(i, j)] += f.data[(k, n, i)] * f.data[(k, n, j)].conj() / 3.0;
                    }
                }
            }
            assert!((&s.matrices[k] - &naive).iter().all(|d| d.norm() < 1e-12));

            let energy: f64 = (0..3).map(|n| (0..5).map(|i| f.data[(k, n, i)].norm_sqr()).sum::<f64>()).sum();
            assert!((linalg::trace_re(&s.matrices[k]) - energy / 3.0).abs() < 1e-12);
            assert!(linalg::hermitian_min_eigenvalue(&s.matrices[k]) >= -1e-10 * energy);
        }
        assert!(s.max_hermitian_defect() <= 1e-12);
    }

    #[test]
    fn band_select_examples() {
        let data = Array3::zeros((257, 1, 2));
        let freqs: Vec<f64> = (0..257).map(|k| k as f64 * 16000.0 / 512.0).collect();
        let cov = sample_covariance(&SpectralFrames::new(data, freqs, 16000.0).unwrap()).unwrap();

        let all = band_select(&cov, 0.0, 8000.0).unwrap();
        assert_eq!(all.band_frequencies, cov.band_frequencies);

        let one = band_select(&cov, 1000.0, 1010.0).unwrap();
        assert_eq!(one.band_frequencies, vec![1000.0]);

        // bins 10..=112, i.e. 312.5 Hz through 3500 Hz
        let speech = band_select(&cov, 300.0, 3500.0).unwrap();
        assert_eq!(speech.band_frequencies.first(), Some(&312.5));
        assert_eq!(speech.band_frequencies.last(), Some(&3500.0));
        assert_eq!(speech.num_bands(), 103);

        assert!(matches!(band_select(&cov, 10.0, 20.0), Err(Error::EmptyBandSelection { .. })));
        assert!(band_select(&cov, 20.0, 10.0).is_err());
    }
}
