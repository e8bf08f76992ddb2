//! Compare relations induced from a noise-free render against the
//! simulator's ground truth.

use std::collections::BTreeSet;

use tabletop_core::config::SceneConfig;
use tabletop_core::graph::{init_graph, Perceiver};
use tabletop_core::perception::TaskSpec;
use tabletop_core::rng::SimRng;
use tabletop_core::scene::{ground_truth_relations, render_views, ObjectId, Relation, WorldState};

pub type Triple = (ObjectId, ObjectId, Relation);

fn canonical((a, b, r): Triple) -> Triple {
    if r == Relation::Near && b < a {
        (b, a, r)
    } else {
        (a, b, r)
    }
}

/// Relations induced from a render of `world`, and the ground truth
/// restricted to the objects that became graph nodes.
pub fn induced_and_truth(cfg: &SceneConfig, world: &WorldState) -> (BTreeSet<Triple>, BTreeSet<Triple>) {
    let spec = TaskSpec::for_task(cfg.setup());
    let p = Perceiver { spec: &spec, thresholds: &cfg.thresholds, noise: &cfg.perception_noise, cameras: &cfg.cameras };
    let raw = render_views(world, &cfg.cameras);
    let g = init_graph(&raw, &p, &mut SimRng::from_seed(0));
    let obj = |id| g.node(id).and_then(|n| n.track.target).expect("noise-free nodes are locked");
    let induced = g.edges.iter().map(|e| canonical((obj(e.src), obj(e.dst), e.relation))).collect();
    let shown: BTreeSet<ObjectId> = g.nodes.iter().filter_map(|n| n.track.target).collect();
    let truth = ground_truth_relations(world)
        .into_iter()
        .filter(|(a, b, _)| shown.contains(a) && shown.contains(b))
        .map(canonical)
        .collect();
    (induced, truth)
}
