//! Multichannel STFT, PHAT weighting and per-band covariances from a WAV-like signal.

use doa_refine::prelude::*;
use doa_refine::spectral::Weighting;

fn main() -> doa_refine::Result<()> {
    let geometry = ArrayGeometry::default_array();
    let scene = Scene::single_source(geometry, doa_from_angles(1.0, -0.5), 10.0, 3);
    let signal = synth_time_scene(&scene)?;
    println!("signal: {} samples x {} channels", signal.nrows(), signal.ncols());

    let frames = stft(signal.view(), scene.sample_rate, 512, 256, Window::Hann)?;
    println!("stft: {} bands, {} frames", frames.num_bands(), frames.num_frames());

    let phat = apply_weighting(&frames, Weighting::Phat);
    let cov = band_select(&sample_covariance(&phat)?, 300.0, 3500.0)?;
    println!("kept {} bands, hermitian defect {:.2e}", cov.num_bands(), cov.max_hermitian_defect());
    for (f, r) in cov.band_frequencies.iter().zip(&cov.matrices).step_by(20) {
        println!("  {f:7.1} Hz  trace {:.3}", r.trace().re);
    }
    Ok(())
}
