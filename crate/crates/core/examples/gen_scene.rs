//! Generate a seeded scene and print it as ASCII.
//!
//!     cargo run --example gen_scene -- 11

use seqnav::world::{generate_scene, Cell, SceneSpec};

fn main() -> seqnav::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let scene = generate_scene(seed, &SceneSpec::default())?;
    println!("{} ({}x{} cells, {} rooms)", scene.id(), scene.width(), scene.height(), scene.rooms().len());
    let marks: Vec<(Cell, char)> = scene
        .landmarks()
        .iter()
        .map(|l| (scene.cell_of(l.position), l.label.chars().next().unwrap().to_ascii_uppercase()))
        .collect();
    for row in (0..scene.height() as i64).rev() {
        let line: String = (0..scene.width() as i64)
            .map(|col| {
                let c = Cell::new(col, row);
                match marks.iter().find(|(m, _)| *m == c) {
                    Some((_, ch)) => *ch,
                    None if scene.is_blocked(c) => '#',
                    None => '.',
                }
            })
            .collect();
        println!("{line}");
    }
    for l in scene.landmarks() {
        println!("{:>10} at ({:.2}, {:.2})", l.label, l.position.x, l.position.y);
    }
    Ok(())
}
