mod common;

use common::{fixture, gradient_check, HEADS};
use suturenet::recnet::{Direction, HeadKind};

#[test]
fn every_head_and_direction_matches_finite_differences() {
    for direction in [Direction::Bidirectional, Direction::Forward] {
        for head in HEADS {
            for seed in [1, 2] {
                let (model, x, targets) = fixture(head, direction, seed);
                let (err, n) = gradient_check(&model, &x, &targets, 0.7, 1.3);
                assert!(n > 0);
                assert!(err < 1e-4, "{head:?} {direction:?} seed {seed}: {err:e}");
            }
        }
    }
}

#[test]
fn progress_only_models_match_finite_differences() {
    for head in [HeadKind::Regression, HeadKind::Classification, HeadKind::OrdinalClassification] {
        let (mut model, x, targets) = fixture(head, Direction::Bidirectional, 3);
        model.config.action_head = false;
        model.params.action = None;
        let (err, _) = gradient_check(&model, &x, &targets, 1.0, 1.0);
        assert!(err < 1e-4, "{head:?}: {err:e}");
    }
}
