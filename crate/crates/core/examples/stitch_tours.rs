//! Chain single-episode records whose endpoints meet into tours and join
//! their instructions offline. An LLM replay cassette shows the
//! alternative joiner.

use serde_json::json;

use seqnav::tours::{
    concat_prompt, stitch_trajectories, Cassette, CassetteTransport, EpisodeRecord, LlmClient, StitchConfig,
};
use seqnav::{Path, Point, Pose};

fn record(id: &str, pts: &[(f64, f64)], text: &str) -> EpisodeRecord {
    let path = Path::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap();
    let (x, y) = pts[0];
    EpisodeRecord::new(id, "demo-scene", Pose::new(x, y, 0.0), path, vec![pts.len() - 1], text).unwrap()
}

fn main() -> seqnav::Result<()> {
    let records = [
        record("a", &[(0.0, 0.0), (2.0, 0.0)], "Walk to the lamp."),
        record("b", &[(2.1, 0.0), (2.0, 3.0)], "Head up the hall and stop at the sink."),
        record("c", &[(2.0, 3.0), (5.0, 3.0)], "Continue until you reach the bed."),
        record("d", &[(9.0, 9.0), (9.0, 7.0)], "Find the clock."),
    ];
    for t in stitch_trajectories(&records, &StitchConfig::default(), None)? {
        println!("{} [{:?}, {} sub-tasks]\n  {}", t.id, t.provenance, t.subtask_count, t.stitched_instruction);
    }

    // Replay a recorded LLM reply for the first join.
    let (a, b) = (&records[0].instruction, &records[1].instruction);
    let client_model = "demo";
    let joined = "Walk to the lamp, then head up the hall from there and stop at the sink.";
    let mut cassette = Cassette::new();
    let probe = LlmClient::new(Box::new(CassetteTransport::replay(Cassette::new())), client_model, 0);
    cassette.insert(&probe.request(&concat_prompt(a, b)), json!({ "choices": [{ "message": { "content": joined } }] }));
    let llm = LlmClient::new(Box::new(CassetteTransport::replay(cassette)), client_model, 0);
    let tours = stitch_trajectories(&records[..2], &StitchConfig::default(), Some(&llm))?;
    println!("{} [{:?}]\n  {}", tours[0].id, tours[0].provenance, tours[0].stitched_instruction);
    Ok(())
}
