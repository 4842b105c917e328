//! Run one generated episode with the scripted policy and print what the
//! agent did.

use seqnav::harness::{generate_suite, PolicyConfig, RunConfig, Runtime};
use seqnav::mapping::TourMap;
use seqnav::planner::EavState;

fn main() -> seqnav::Result<()> {
    let mut cfg = RunConfig { seed: 21, ..RunConfig::default() };
    cfg.suite.tours = 1;
    cfg.suite.episodes_per_tour = 1;
    cfg.policy = PolicyConfig::Scripted { error_rate: 0.3 };
    let tour = generate_suite(&cfg, cfg.seed)?.remove(0);
    let ep = &tour.episodes[0];
    println!("instruction: {}", ep.instruction);

    let rt = Runtime::new(&cfg, cfg.seed)?;
    let mut map = TourMap::new(tour.scene.resolution());
    let mut eav = EavState::new(&cfg.eav);
    let out = rt.run_episode(&tour.id, &tour.scene, ep, &mut map, &mut eav, 1)?;

    let acts: String = out.actions.iter().map(|a| ["F", "L", "R", "S", "B"][a.index()]).collect();
    println!("actions ({}): {acts}", out.actions.len());
    println!("turn-backs {}, final δ0 {:.2}", out.turn_backs, out.delta0_trace.last().copied().unwrap_or(f64::NAN));
    let m = out.metrics;
    println!("SR {} NE {:.2} nDTW {:.3} CPsubT {:.2} CPsubI {:.2}", m.sr, m.ne, m.ndtw, m.cpsubt, m.cpsubi);
    Ok(())
}
