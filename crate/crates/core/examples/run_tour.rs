//! A three-episode tour: the map built in one episode is handed to the
//! next, and the tour is scored with t-nDTW.

use seqnav::harness::{generate_suite, RunConfig, Runtime};

fn main() -> seqnav::Result<()> {
    let mut cfg = RunConfig { seed: 8, ..RunConfig::default() };
    cfg.suite.tours = 1;
    cfg.suite.episodes_per_tour = 3;
    cfg.suite.subtasks = 2;
    let tour = generate_suite(&cfg, cfg.seed)?.remove(0);
    let out = Runtime::new(&cfg, cfg.seed)?.run_tour(&tour, 0)?;
    for e in &out.episodes {
        println!(
            "{}: map {} -> {} cells, SR {}, nDTW {:.3}",
            e.episode, e.known_cells_start, e.known_cells_end, e.metrics.sr, e.metrics.ndtw
        );
    }
    println!("t-nDTW {:.3}", out.tndtw);
    Ok(())
}
