//! A small verification ablation printed as a markdown table. Settings
//! follow the acceptance trend check: noise-free oracle, 1 m success
//! radius, generous step cap.

use seqnav::harness::{run_ablation, PolicyConfig, Preset, ProviderConfig, RunConfig};
use seqnav::metrics::Format;

fn main() -> seqnav::Result<()> {
    let mut cfg = RunConfig { seed: 4, repeats: 2, step_cap: 500, ..RunConfig::default() };
    cfg.suite.tours = 12;
    cfg.policy = PolicyConfig::Scripted { error_rate: 0.2 };
    cfg.provider = ProviderConfig::Oracle { noise_sigma: 0.0 };
    cfg.metrics.success_radius = 1.0;
    let report = run_ablation(Preset::Table6, &cfg)?;
    print!("{}", report.table.render(Format::Md)?);
    Ok(())
}
