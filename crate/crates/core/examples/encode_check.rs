//! Map one observation into a tour map, crop it around the agent and run
//! the crop through seeded and zero map-encoder weights.

use seqnav::mapping::{encode_map, MapEncoderWeights, TourMap};
use seqnav::world::{generate_scene, observe, SceneSpec};
use seqnav::Pose;

fn main() -> seqnav::Result<()> {
    let scene = generate_scene(5, &SceneSpec::default())?;
    let lm = &scene.landmarks()[0];
    let pose = Pose::new(lm.position.x, lm.position.y, 90.0);
    let mut map = TourMap::new(scene.resolution());
    map.integrate_observation(&observe(&scene, pose));
    println!("known cells after one view: {}", map.known_cell_count());

    let crop = map.crop_ego(pose);
    let z = encode_map(&crop, &MapEncoderWeights::seeded(7))?;
    let norm = z.data().iter().map(|v| v * v).sum::<f64>().sqrt();
    println!("seeded weights: shape {:?}, finite {}, l2 {norm:.4}", z.shape(), z.is_finite());

    let zero = encode_map(&crop, &MapEncoderWeights::zeros())?;
    println!("zero weights: max |z| = {}", zero.data().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    Ok(())
}
