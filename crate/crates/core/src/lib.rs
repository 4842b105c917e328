//! Sequential-horizon vision-and-language navigation.
//!
//! `seqnav` is a deterministic engine for following long, multi-part
//! navigation instructions in a synthetic persistent scene. The agent is a
//! hierarchical planner:
//!
//! * a high-level planner ([`instruction`]) segments the instruction into
//!   phrases and picks the phrase that best matches the current observation,
//!   falling back to the whole instruction when the choice is ambiguous
//!   (entropy gate);
//! * a low-level planner ([`planner`]) predicts actions and wraps the policy
//!   in an exploration/verification loop that rolls back a step when phrase
//!   order and observation disagree, with an adaptive verification threshold;
//! * a scene mapping module ([`mapping`]) keeps occupancy and semantic maps
//!   alive for a whole tour and encodes egocentric crops.
//!
//! Around the agent sit a grid-world simulator ([`world`]), similarity
//! providers ([`similarity`]), the VLN metric suite ([`metrics`]), the tour
//! construction pipeline ([`tours`]) and the episode/tour/ablation runner
//! ([`harness`]).
//!
//! Every run is a pure function of its configuration and seed.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod instruction;
pub mod mapping;
pub mod metrics;
pub mod planner;
pub mod similarity;
pub mod tensor;
pub mod tours;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{Action, Heading, Path, Point, Pose};
