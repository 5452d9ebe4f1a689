use std::sync::Arc;

use preflex_core::fixtures;
use preflex_core::objectives::ObjectiveId;
use preflex_core::priority::PriorityLevel;
use preflex_core::scene::{LayoutMap, Vec3};
use preflex_core::session::{replay, Mode, Session, SessionConfig, Transcript};
use preflex_core::solver::{NoObserver, SolverConfig};

fn config() -> SessionConfig {
    SessionConfig {
        solver: SolverConfig { population_size: 60, generations: 30, ..SolverConfig::default() },
        hypervolume_samples: 20_000,
        ..SessionConfig::default()
    }
}

#[test]
fn music_player_next_to_phone() {
    let scene = Arc::new(fixtures::coffee_shop());
    let mut session = Session::start(scene.clone(), Mode::Ours, 2024, config()).unwrap();
    let phone = scene.objects().iter().find(|o| o.id == "phone").unwrap().position;
    let target = scene.region().clamp(&(phone + Vec3::new(0.0, 0.08, 0.0)));
    let moves: LayoutMap = [("music_player".to_string(), target)].into();
    session.submit_moves(&moves).unwrap();
    let diag = session.adapt(&mut NoObserver).unwrap().clone();

    let pa = diag.assignment.as_ref().unwrap();
    assert_eq!(pa.level_of(ObjectiveId::SemanticAgreement), PriorityLevel::High);
    assert!(scene.validate_layout(session.current()).unwrap().is_empty());
    let archive = session.last_archive().unwrap();
    assert_eq!(&archive.solutions[diag.chosen_index].decision, session.current());
}

#[test]
fn every_adapted_layout_is_an_archive_member() {
    let scene = Arc::new(fixtures::home_office());
    for mode in [Mode::ParetoSelect, Mode::Ours] {
        let mut session = Session::start(scene.clone(), mode, 5, config()).unwrap();
        for (k, id) in ["paper_1", "slack", "search_2"].iter().enumerate() {
            let b = &scene.region().boxes[k % scene.region().boxes.len()];
            session.submit_moves(&[(id.to_string(), b.center())].into()).unwrap();
            session.adapt(&mut NoObserver).unwrap();
            let archive = session.last_archive().unwrap();
            assert!(archive.solutions.iter().any(|s| &s.decision == session.current()));
        }
        assert_eq!(session.iteration(), 3);
    }
}

#[test]
fn transcript_file_round_trip() {
    let scene = Arc::new(fixtures::coffee_shop());
    let mut session = Session::start(scene.clone(), Mode::ParetoSelect, 77, config()).unwrap();
    let c = scene.region().boxes[0].center();
    session
        .submit_moves(&[("news_1".to_string(), c), ("news_2".to_string(), scene.region().boxes[1].center())].into())
        .unwrap();
    session.adapt(&mut NoObserver).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.json");
    std::fs::write(&path, session.transcript().to_json()).unwrap();
    let loaded = Transcript::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(loaded, session.transcript());
    let replayed = replay(scene, &loaded).unwrap();
    assert_eq!(replayed.report(), session.report());
}

#[test]
fn forced_single_level_matches_pareto_select() {
    let scene = Arc::new(fixtures::coffee_shop());
    let forced = SessionConfig { force_single_level: true, ..config() };
    let run = |mode, cfg: SessionConfig| {
        let mut s = Session::start(scene.clone(), mode, 31, cfg).unwrap();
        s.submit_moves(&[("instagram".to_string(), scene.region().boxes[1].center())].into()).unwrap();
        s.adapt(&mut NoObserver).unwrap();
        s.submit_moves(&[("messenger".to_string(), scene.region().boxes[0].max)].into()).unwrap();
        s.adapt(&mut NoObserver).unwrap();
        s
    };
    let ours = run(Mode::Ours, forced.clone());
    let pareto = run(Mode::ParetoSelect, forced);
    assert_eq!(ours.current(), pareto.current());
    for (a, b) in ours.diagnostics().iter().zip(pareto.diagnostics()) {
        assert_eq!(a.chosen_index, b.chosen_index);
        assert_eq!(a.chosen_distance, b.chosen_distance);
        assert_eq!(a.archive_objectives, b.archive_objectives);
        assert_eq!(a.hypervolume, b.hypervolume);
    }
}

#[test]
fn fixtures_load_from_disk() {
    let dir = env!("CARGO_MANIFEST_DIR");
    for name in fixtures::NAMES {
        let path = format!("{dir}/fixtures/{name}.json");
        let from_file = fixtures::resolve(&path).unwrap();
        assert_eq!(from_file, fixtures::by_name(name).unwrap());
    }
    assert!(fixtures::resolve("/nonexistent/scene.json").is_err());
}
