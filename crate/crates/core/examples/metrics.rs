//! Score a hand-made agent path against a reference.

use seqnav::metrics::{dtw, episode_metrics, ndtw, EpisodeResult, MetricParams, SelectionRecord};
use seqnav::{Path, Point};

fn line(pts: &[(f64, f64)]) -> Path {
    Path::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
}

fn main() -> seqnav::Result<()> {
    let reference = line(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 1.0), (2.0, 2.0)]);
    let agent = line(&[(0.0, 0.0), (1.0, 0.2), (2.0, 0.3), (2.2, 1.0), (2.5, 1.8)]);
    println!("dtw  {:.4}", dtw(&reference, &agent));
    println!("ndtw {:.4}", ndtw(&reference, &agent, 3.0)?);

    let ep = EpisodeResult {
        agent_path: agent,
        reference_path: reference,
        boundaries: vec![2, 4],
        selection_log: [(Some(0), 0), (Some(0), 0), (None, 1), (Some(1), 1), (Some(0), 1)]
            .iter()
            .map(|&(selected, truth)| SelectionRecord { selected, truth })
            .collect(),
    };
    let m = episode_metrics(&ep, &MetricParams::default())?;
    println!("{}", serde_json::to_string_pretty(&m)?);
    Ok(())
}
