//! Compare the four estimators on the same two-source scene with a grid search only.

use doa_refine::prelude::*;

fn main() -> doa_refine::Result<()> {
    let geometry = ArrayGeometry::default_array();
    let truth = [doa_from_angles(1.1, 0.3), doa_from_angles(1.9, 2.4)];
    let scene = Scene::new(geometry.clone(), &truth, 20.0, 42);
    let frames = synth_stft_scene(&scene)?.frames;

    for est in [Estimator::Srp, Estimator::SrpPhat, Estimator::Music, Estimator::Mvdr] {
        let pipeline = Pipeline::new(est).with_sources(2).with_grid_size(2000).with_variant(None);
        let found = pipeline.locate(&frames, &geometry)?;
        let doas: Vec<DoaVector> = found.iter().map(|f| f.doa).collect();
        let err = evaluate(&doas, &truth)?;
        println!("{:<8} s={:<5} errors {:.2} / {:.2} deg", est.name(), pipeline.exponent(), err[0], err[1]);
    }
    Ok(())
}
