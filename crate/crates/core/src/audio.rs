//! Multichannel audio I/O. Samples are returned as a `T x M` array scaled to
//! roughly `[-1, 1]`, one column per sensor in geometry-file order.

use std::fs;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Audio {
    pub samples: Array2<f64>,
    pub sample_rate: f64,
}

impl Audio {
    pub fn num_channels(&self) -> usize {
        self.samples.ncols()
    }
}

/// Reads 16/24/32-bit integer or 32-bit float WAV.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Audio> {
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::invalid(format!("unsupported float width {}", spec.bits_per_sample)));
            }
            reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<Result<_, _>>()?
        }
        SampleFormat::Int => {
            let full_scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader.samples::<i32>().map(|s| s.map(|v| v as f64 / full_scale)).collect::<Result<_, _>>()?
        }
    };
    deinterleave(interleaved, channels, spec.sample_rate as f64)
}

/// Writes 32-bit float WAV.
pub fn write_wav(path: impl AsRef<Path>, samples: ArrayView2<f64>, sample_rate: u32) -> Result<()> {
    let spec = WavSpec {
        channels: samples.ncols() as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for row in samples.rows() {
        for &v in row {
            writer.write_sample(v as f32)?;
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Reads headerless little-endian interleaved `f32`.
pub fn read_raw_f32(path: impl AsRef<Path>, channels: usize, sample_rate: f64) -> Result<Audio> {
    if channels == 0 {
        return Err(Error::invalid("raw input needs a positive channel count"));
    }
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::invalid("raw f32 input length is not a multiple of 4 bytes"));
    }
    let values = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).collect();
    deinterleave(values, channels, sample_rate)
}

fn deinterleave(values: Vec<f64>, channels: usize, sample_rate: f64) -> Result<Audio> {
    if channels == 0 || !values.len().is_multiple_of(channels) {
        return Err(Error::invalid(format!("{} samples do not split into {channels} channels", values.len())));
    }
    let frames = values.len() / channels;
    let samples = Array2::from_shape_vec((frames, channels), values).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(Audio { samples, sample_rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let x = Array2::from_shape_fn((100, 3), |(t, m)| ((t * 7 + m) as f64 * 0.01).sin() * 0.5);
        write_wav(&path, x.view(), 16000).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 16000.0);
        assert_eq!(back.samples.dim(), (100, 3));
        for (a, b) in back.samples.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn int_wav_scaling() {
        let dir = tempfile::tempdir().unwrap();
        for bits in [16u16, 24] {
            let path = dir.path().join(format!("i{bits}.wav"));
            let spec = WavSpec { channels: 2, sample_rate: 8000, bits_per_sample: bits, sample_format: SampleFormat::Int };
            let mut w = WavWriter::create(&path, spec).unwrap();
            let half = 1i32 << (bits - 2);
            for _ in 0..10 {
                w.write_sample(half).unwrap();
                w.write_sample(-half).unwrap();
            }
            w.finalize().unwrap();
            let a = read_wav(&path).unwrap();
            assert_eq!(a.num_channels(), 2);
            assert_eq!(a.samples[(3, 0)], 0.5);
            assert_eq!(a.samples[(3, 1)], -0.5);
        }
    }

    #[test]
    fn raw_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.raw");
        let vals: Vec<f32> = (0..12).map(|i| i as f32).collect();
        fs::write(&path, vals.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>()).unwrap();
        let a = read_raw_f32(&path, 4, 1000.0).unwrap();
        assert_eq!(a.samples.dim(), (3, 4));
        assert_eq!(a.samples[(1, 2)], 6.0);
        assert!(read_raw_f32(&path, 5, 1000.0).is_err());
    }

    #[test]
    fn unreadable_wav_is_an_error() {
        assert!(read_wav("/nonexistent/definitely.wav").is_err());
    }
}
