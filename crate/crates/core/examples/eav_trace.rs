//! Adaptive verification threshold: replay a fixed event sequence and
//! print the threshold after each event.

use seqnav::planner::{update_threshold, EavConfig, EavState, ThresholdEvent, ThresholdMode};

fn main() {
    let mut state = EavState::new(&EavConfig::default());
    println!("init          {:.2}", state.delta0);
    let mut events = vec![ThresholdEvent::Tick; 10];
    events.extend([ThresholdEvent::VerificationFailed, ThresholdEvent::VerificationPassed]);
    events.extend([ThresholdEvent::VerificationFailed; 6]);
    for e in events {
        update_threshold(ThresholdMode::Learnable, &mut state, e);
        println!("{:<13} {:.2}", format!("{e:?}"), state.delta0);
    }
}
