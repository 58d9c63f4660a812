//! Refine one coarse grid point with both surrogates and print the cost per iteration.

use doa_refine::estimators::srp_cost_spec;
use doa_refine::prelude::*;
use doa_refine::spectral::Weighting;

fn main() -> doa_refine::Result<()> {
    let geometry = ArrayGeometry::default_array();
    let truth = doa_from_angles(0.9, 1.3);
    let scene = Scene::single_source(geometry.clone(), truth, 15.0, 1);
    let frames = apply_weighting(&synth_stft_scene(&scene)?.frames, Weighting::Phat);
    let cov = band_select(&sample_covariance(&frames)?, scene.f_min, scene.f_max)?;
    let spec = srp_cost_spec(&cov, geometry.speed_of_sound(), -1.0)?;

    let grid = fibonacci_grid(100)?;
    let start = grid_search(&spec, &geometry, &grid, 1, 0.0)[0].doa;
    println!("grid start off by {:.2} deg", great_circle_distance(&start, &truth).to_degrees());

    for variant in [Variant::Quadratic, Variant::Linear] {
        let trace = refine(&spec, &geometry, start, variant, 30, 0.0);
        println!("{}:", variant.name());
        for t in [0, 1, 2, 5, 10, 30] {
            let err = great_circle_distance(&trace.at(t), &truth).to_degrees();
            println!("  t={t:<2} cost {:.6e}  error {err:.3} deg", trace.objectives[t]);
        }
    }
    Ok(())
}
