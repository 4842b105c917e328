use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::world::{synonyms, SubtaskDescriptor};

const TEMPLATES: &[&str] = &[
    "Walk to the {}.",
    "Head towards the {} and stop there.",
    "Turn around, then go to the {}.",
    "Continue until you reach the {}.",
    "Go through the doorway and stop at the {}.",
    "Find the {}, then wait next to it.",
];

/// One sentence per sub-task naming its goal landmark, so period
/// segmentation recovers exactly one phrase per sub-task.
pub fn synthesize_instruction(descriptors: &[SubtaskDescriptor], seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    descriptors
        .iter()
        .map(|d| {
            let name = synonyms(&d.goal).choose(&mut rng).cloned().unwrap_or_else(|| d.goal.clone());
            TEMPLATES.choose(&mut rng).unwrap().replace("{}", &name)
        })
        .collect::<Vec<_>>()
        .join(" ")
}
