use std::collections::BTreeSet;

use tabletop_core::config::{SceneConfig, TaskId};
use tabletop_core::executor::{ground_targets, GroundingErrorModel};
use tabletop_core::graph::{init_graph, Perceiver, SemanticGraph};
use tabletop_core::perception::TaskSpec;
use tabletop_core::prompting::clutter_free_obs;
use tabletop_core::scene::{init_world, render_views, RawObservation};
use tabletop_core::{MaskedObservation, SimRng};

fn scene(d: u32, seed: u64) -> (RawObservation, SemanticGraph) {
    let cfg = SceneConfig::perfect(TaskId::SwapCups).with_distractors(d);
    let world = init_world(&cfg, seed).unwrap();
    let raw = render_views(&world, &cfg.cameras);
    let spec = TaskSpec::for_task(cfg.setup());
    let p = Perceiver { spec: &spec, thresholds: &cfg.thresholds, noise: &cfg.perception_noise, cameras: &cfg.cameras };
    let g = init_graph(&raw, &p, &mut SimRng::from_seed(0));
    (raw, g)
}

/// Observed mis-grounding frequency against p(n) * (1 - 1/visible), the
/// chance the rebinding actually changes the target. Allows 4.5 sigma.
fn check_rate(obs: &MaskedObservation, g: &SemanticGraph, err: &GroundingErrorModel) -> (usize, f64) {
    let trials = 20_000u64;
    let mut rng = SimRng::from_seed(99);
    let mut hits = 0u64;
    let mut clutter = 0;
    for _ in 0..trials {
        let gr = ground_targets(obs, g, &mut rng, err).unwrap();
        clutter = gr.clutter;
        hits += gr.mis_grounded as u64;
    }
    let visible = obs.visible_labels().len() as f64;
    let p = err.probability(clutter) * (1.0 - 1.0 / visible);
    let sd = (p * (1.0 - p) / trials as f64).sqrt();
    let got = hits as f64 / trials as f64;
    assert!((got - p).abs() <= 4.5 * sd + 1e-12, "rate {got} vs expected {p} (clutter {clutter})");
    (clutter, got)
}

#[test]
fn mis_grounding_rate_tracks_visible_clutter() {
    let (raw, g) = scene(8, 3);
    let cup = g.nodes.iter().find(|n| n.class_name == "cup").unwrap();
    let cue = format!("pick up the {}", cup.name);
    let relevant: BTreeSet<u32> = [cup.node_id].into_iter().chain(g.arm()).collect();
    let err = GroundingErrorModel::default_profile();

    let raw_obs = MaskedObservation::unmasked(&raw, &relevant, &cue);
    let (clutter_raw, rate_raw) = check_rate(&raw_obs, &g, &err);
    assert!(clutter_raw >= 8, "distractors and other task objects count as clutter");

    let masked = clutter_free_obs(&raw, &g, &relevant, &cue).unwrap();
    let (clutter_masked, rate_masked) = check_rate(&masked, &g, &err);
    assert_eq!(clutter_masked, 0);
    assert!(rate_masked < rate_raw);
}

#[test]
fn zero_error_model_never_misgrounds() {
    let (raw, g) = scene(5, 1);
    let plate = g.nodes.iter().find(|n| n.class_name == "plate").unwrap();
    let cup = g.nodes.iter().find(|n| n.class_name == "cup").unwrap();
    let cue = format!("put the {} inside the {}", cup.name, plate.name);
    let obs = MaskedObservation::unmasked(&raw, &BTreeSet::from([cup.node_id, plate.node_id]), &cue);
    let mut rng = SimRng::from_seed(5);
    for _ in 0..1000 {
        let gr = ground_targets(&obs, &g, &mut rng, &GroundingErrorModel::default()).unwrap();
        assert!(!gr.mis_grounded);
        assert_eq!(gr.targets["object"], cup.track.target.unwrap());
        assert_eq!(gr.targets["target"], plate.track.target.unwrap());
    }
}
