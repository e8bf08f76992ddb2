//! Ground-truth relations and task verdicts. Test and scoring use only;
//! nothing in the pipeline reads these.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::{TaskId, TaskSetup};

use super::{ObjectId, Relation, SceneError, WorldState};

pub const MILESTONE_PNP_ONCE: &str = "PnP Once";
pub const MILESTONE_DROP_CUBE: &str = "Drop Cube";
pub const MILESTONE_STAGE_CUP: &str = "Stage Cup";

/// Exact relations: in/on from parent links, near from center distance
/// (one entry per unordered pair, smaller id first), holding from the
/// gripper.
pub fn ground_truth_relations(world: &WorldState) -> BTreeSet<(ObjectId, ObjectId, Relation)> {
    let mut out = BTreeSet::new();
    for o in &world.objects {
        if let Some(c) = o.container_of {
            out.insert((o.id, c, Relation::In));
        }
        if let Some(s) = o.support_of {
            out.insert((o.id, s, Relation::On));
        }
    }
    for (i, a) in world.objects.iter().enumerate() {
        for b in &world.objects[i + 1..] {
            if a.pose.xy().dist(b.pose.xy()) < world.near_threshold_m {
                out.insert((a.id, b.id, Relation::Near));
            }
        }
    }
    if let Some(h) = world.held() {
        out.insert((world.arm, h, Relation::Holding));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TaskVerdict {
    pub milestones: BTreeSet<String>,
    pub success: bool,
}

fn find(world: &WorldState, class: &str, color: Option<&str>) -> Option<ObjectId> {
    world
        .objects
        .iter()
        .find(|o| o.class_name == class && (color.is_none() || o.color() == color))
        .map(|o| o.id)
}

fn missing(what: &str) -> SceneError {
    SceneError::LayoutInfeasible(format!("history has no {what}"))
}

fn parent_in(world: &WorldState, id: ObjectId) -> Option<ObjectId> {
    world.get(id).and_then(|o| o.container_of)
}

fn first_move(history: &[WorldState], id: ObjectId) -> Option<usize> {
    let start = history[0].get(id)?;
    history.iter().position(|w| match w.get(id) {
        Some(o) => o.pose != start.pose || o.parent() != start.parent(),
        None => true,
    })
}

/// Judge an episode from its world history (initial state first, then the
/// state after every primitive).
pub fn task_oracle(setup: TaskSetup, history: &[WorldState]) -> Result<TaskVerdict, SceneError> {
    let init = history.first().ok_or_else(|| missing("states"))?;
    let last = history.last().expect("non-empty");
    let mut verdict = TaskVerdict::default();
    match setup.task {
        TaskId::PnpTwice => {
            let cube = find(init, "cube", None).ok_or_else(|| missing("cube"))?;
            let home = parent_in(init, cube).ok_or_else(|| missing("cube home"))?;
            let visited = history
                .iter()
                .position(|w| w.held() != Some(cube) && matches!(parent_in(w, cube), Some(p) if p != home));
            if let Some(i) = visited {
                verdict.milestones.insert(MILESTONE_PNP_ONCE.into());
                let back = history[i..].iter().any(|w| parent_in(w, cube) == Some(home));
                verdict.success = back && parent_in(last, cube) == Some(home) && last.held().is_none();
            }
        }
        TaskId::PlaceAndStack => {
            let cube = find(init, "cube", None).ok_or_else(|| missing("cube"))?;
            let cube_at = init.object(cube)?.pose.xy();
            let mut cups: Vec<_> = init.objects.iter().filter(|o| o.class_name == "cup").collect();
            if cups.len() != 2 {
                return Err(missing("pair of cups"));
            }
            cups.sort_by(|a, b| a.pose.xy().dist(cube_at).total_cmp(&b.pose.xy().dist(cube_at)));
            let (near, other) = (cups[0].id, cups[1].id);
            if history.iter().any(|w| parent_in(w, cube) == Some(near)) {
                verdict.milestones.insert(MILESTONE_DROP_CUBE.into());
            }
            let stacked = last.get(other).and_then(|o| o.support_of) == Some(near);
            verdict.success = parent_in(last, cube) == Some(near) && stacked && last.held().is_none();
        }
        TaskId::SwapCups => {
            let first = find(init, "cup", Some(setup.first_cup.as_str())).ok_or_else(|| missing("first cup"))?;
            let other = init
                .objects
                .iter()
                .find(|o| o.class_name == "cup" && o.id != first)
                .map(|o| o.id)
                .ok_or_else(|| missing("second cup"))?;
            let first_home = parent_in(init, first).ok_or_else(|| missing("first cup plate"))?;
            let other_home = parent_in(init, other).ok_or_else(|| missing("second cup plate"))?;
            let buffer = init
                .objects
                .iter()
                .find(|o| o.class_name == "plate" && init.contents(o.id).next().is_none())
                .map(|o| o.id)
                .ok_or_else(|| missing("empty plate"))?;
            if history.iter().any(|w| parent_in(w, first) == Some(buffer) && w.held().is_none()) {
                verdict.milestones.insert(MILESTONE_STAGE_CUP.into());
            }
            let order_ok = match (first_move(history, first), first_move(history, other)) {
                (Some(a), Some(b)) => a < b,
                _ => false,
            };
            verdict.success = order_ok
                && parent_in(last, first) == Some(other_home)
                && parent_in(last, other) == Some(first_home)
                && last.held().is_none();
        }
        TaskId::Custom => return Err(SceneError::UnknownTask(setup.task.to_string())),
    }
    Ok(verdict)
}
