//! Array geometry, steering vectors and the Fibonacci search grid.

use doa_refine::prelude::*;

fn main() -> doa_refine::Result<()> {
    let geometry = ArrayGeometry::default_array();
    println!("{} sensors, {} pairs, c = {} m/s", geometry.num_sensors(), geometry.pairs().len(), geometry.speed_of_sound());

    let q = doa_from_angles(60f64.to_radians(), 45f64.to_radians());
    let omega = 2.0 * std::f64::consts::PI * 1000.0 / geometry.speed_of_sound();
    let a = steering_vector(&geometry, omega, &q);
    println!("|a|^2 = {:.6}", a.norm_squared());

    for n in [100, 1000, 10_000] {
        let grid = fibonacci_grid(n)?;
        // covering radius: worst distance from a random direction to the grid
        let mut rng = rand::rng();
        let worst = (0..2000)
            .map(|_| {
                let p = DoaVector::random(&mut rng);
                grid.points().iter().map(|g| great_circle_distance(g, &p)).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        println!("grid {n:>6}: covering radius about {:.2} deg", worst.to_degrees());
    }
    Ok(())
}
