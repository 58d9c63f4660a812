//! Wall time of a dense grid search against a coarse grid plus refinement.

use std::time::Instant;

use doa_refine::prelude::*;

fn main() -> doa_refine::Result<()> {
    let geometry = ArrayGeometry::default_array();
    let truth = doa_from_angles(1.3, -0.7);
    let scene = Scene::single_source(geometry.clone(), truth, 20.0, 5);
    let frames = synth_stft_scene(&scene)?.frames;

    let dense = Pipeline::new(Estimator::SrpPhat).with_grid_size(10_000).with_variant(None);
    let coarse = Pipeline::new(Estimator::SrpPhat).with_grid_size(100).with_iters(30);

    for (name, p) in [("dense grid", &dense), ("grid + MM", &coarse)] {
        let spec = p.cost_spec(&frames, &geometry)?;
        let grid = p.grid()?;
        let start = Instant::now();
        let found = p.locate_with(&spec, &geometry, &grid);
        let secs = start.elapsed().as_secs_f64();
        let err = great_circle_distance(&found[0].doa, &truth).to_degrees();
        println!("{name:<10} {:8.2} ms  error {err:.3} deg", secs * 1e3);
    }
    Ok(())
}
