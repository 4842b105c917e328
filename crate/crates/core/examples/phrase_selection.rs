//! Segment an instruction four ways and watch the entropy gate pick a
//! phrase (or fall back to the whole instruction) as the view changes.

use seqnav::instruction::{segment, select_phrase, SegmentationStyle};
use seqnav::similarity::SyntheticOracleProvider;
use seqnav::world::{Observation, VisibleLandmark};
use seqnav::Pose;

fn view(labels: &[&str]) -> Observation {
    Observation {
        pose: Pose::new(0.0, 0.0, 0.0),
        visible_landmarks: labels
            .iter()
            .map(|l| VisibleLandmark { label: l.to_string(), bearing: 0.0, range: 2.0 })
            .collect(),
        depth_rays: vec![],
    }
}

fn main() -> seqnav::Result<()> {
    let raw = "Walk past the couch and turn left at the lamp. Then go into the kitchen, stop by the fridge.";
    for style in SegmentationStyle::ALL {
        let ins = segment(raw, style)?;
        println!("{:<8} {:?}", style.label(), ins.texts());
    }

    let ins = segment(raw, SegmentationStyle::TypeIIIConjunctions)?;
    let oracle = SyntheticOracleProvider::noise_free();
    for seen in [&[][..], &["couch"], &["lamp"], &["fridge"], &["couch", "fridge"]] {
        let sel = select_phrase(&ins, &view(seen), &oracle, 0.65, 100.0)?;
        let focus = match sel.selected() {
            Some(k) => format!("phrase {k}: {:?}", ins.phrase(k)),
            None => "global instruction".to_string(),
        };
        println!("sees {:<18} entropy {:.3} -> {focus}", format!("{seen:?}"), sel.entropy);
    }
    Ok(())
}
