use serde::{Deserialize, Serialize};

use super::sensing::{observe, Observation};
use super::Scene;
use crate::error::{Error, Result};
use crate::geometry::{apply_action, Action, Point, Pose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: Pose,
    /// Pose before each executed motion action, most recent last.
    pub pose_stack: Vec<Pose>,
    pub collision: bool,
}

impl AgentState {
    pub fn new(pose: Pose) -> Self {
        AgentState { pose, pose_stack: Vec::new(), collision: false }
    }
}

/// Executes one action. FORWARD into a blocked cell leaves the pose in
/// place and raises the collision flag; every motion action (blocked or
/// not) pushes the prior pose so that a rollback restores it exactly.
pub fn step(scene: &Scene, state: &AgentState, action: Action) -> Result<(AgentState, Observation)> {
    if !scene.is_free_point(state.pose.position()) {
        return Err(Error::contract("agent pose is not on a free cell"));
    }
    let mut next = state.clone();
    next.collision = false;
    match action {
        Action::TurnBackLastStep => {
            next.pose = next.pose_stack.pop().ok_or(Error::RollbackUnavailable)?;
        }
        Action::Stop => {}
        Action::Forward => {
            next.pose_stack.push(state.pose);
            let moved = apply_action(state.pose, action)?;
            let mid = Point::new((state.pose.x + moved.x) / 2.0, (state.pose.y + moved.y) / 2.0);
            if scene.is_free_point(moved.position()) && scene.is_free_point(mid) {
                next.pose = moved;
            } else {
                next.collision = true;
            }
        }
        Action::TurnLeft | Action::TurnRight => {
            next.pose_stack.push(state.pose);
            next.pose = apply_action(state.pose, action)?;
        }
    }
    let obs = observe(scene, next.pose);
    Ok((next, obs))
}
