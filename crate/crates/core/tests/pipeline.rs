//! End-to-end behaviour of unmixing, sign correction and evaluation on fixtures.

mod common;

use common::*;
use sosunmix::amuse::{self, AmuseConfig, RotationMode, SourceCount};
use sosunmix::evaluation::{
    concentration_profiles, evaluate, match_sources, mixing_profiles, sign_accuracy,
};
use sosunmix::io::{read_model, render, write_model};
use sosunmix::sign_correction::{correct_signs, Decision, DEFAULT_BINS};
use sosunmix::spectra_model::{stack_spectra, two_component_matrix, Fixture};
use sosunmix::Matrix;

fn truth(f: Fixture) -> Matrix {
    stack_spectra(&f.sources()).unwrap().1
}

#[test]
fn all_keep_model_is_returned_unchanged() {
    let t = 120;
    let s = Matrix::from_fn(2, t, |i, k| {
        peaked_row(t, 0.1, &[(30.0 + 50.0 * i as f64, 4.0, 1.0)])[k]
    });
    let model = bare_model(Matrix::from_fn(5, 2, |i, j| 0.1 * (i + j + 1) as f64), s);
    let out = correct_signs(&model, DEFAULT_BINS).unwrap();
    assert_eq!(out.sources, model.sources);
    assert_eq!(out.mixing_estimate, model.mixing_estimate);
    let verdicts = out.sign_correction.unwrap();
    assert!(verdicts.iter().all(|v| v.decision == Decision::Keep));
}

#[test]
fn negated_second_source_is_flipped_back() {
    let t = 150;
    let s1 = peaked_row(t, 0.0, &[(40.0, 5.0, 1.0)]);
    let s2 = peaked_row(t, 0.0, &[(100.0, 8.0, 0.7)]);
    let sources = Matrix::from_fn(2, t, |i, k| if i == 0 { s1[k] } else { -s2[k] });
    let mixing = Matrix::from_row_slice(3, 2, &[0.2, 0.5, 0.9, 0.1, 0.4, 0.4]);
    let model = bare_model(mixing.clone(), sources);
    let out = correct_signs(&model, DEFAULT_BINS).unwrap();
    for k in 0..t {
        assert_eq!(out.sources[(0, k)], s1[k]);
        assert_eq!(out.sources[(1, k)], s2[k]);
    }
    assert_eq!(out.mixing_estimate.column(0), mixing.column(0));
    assert_eq!(out.mixing_estimate.column(1), -mixing.column(1));
    assert!((out.reconstruction() - model.reconstruction()).amax() <= 1e-12);
}

#[test]
fn raw_two_component_run_inverts_one_source_and_correction_repairs_it() {
    let f = Fixture::Paper2;
    let raw = amuse::amuse(&f.cube(), &AmuseConfig::default()).unwrap();
    let truth = truth(f);
    let raw_matching = match_sources(&truth, &raw.sources).unwrap();
    assert!(raw_matching.correlations.iter().any(|&r| r < 0.0));
    let fixed = correct_signs(&raw, DEFAULT_BINS).unwrap();
    let m = match_sources(&truth, &fixed.sources).unwrap();
    assert!(
        m.correlations.iter().all(|&r| r >= 0.999),
        "{:?}",
        m.correlations
    );
    assert!((fixed.reconstruction() - raw.reconstruction()).amax() <= 1e-12);
}

#[test]
fn corrected_profiles_follow_true_profiles() {
    let f = Fixture::Paper2;
    let model = correct_signs(
        &amuse::amuse(&f.cube(), &AmuseConfig::default()).unwrap(),
        DEFAULT_BINS,
    )
    .unwrap();
    let report = evaluate(&truth(f), f.mixing().entries(), &model).unwrap();
    assert!(
        report.mixing_column_cosines.iter().all(|&c| c >= 0.999),
        "{:?}",
        report.mixing_column_cosines
    );
    assert_eq!(report.sign_accuracy, 1.0);
    assert!(report.sign_corrected);

    let est = concentration_profiles(&model.mixing_estimate);
    let tru = mixing_profiles(&f.mixing());
    for (i, &j) in report.matching.permutation.iter().enumerate() {
        assert_eq!(est[i].weights.len(), 7);
        let scale = est[i]
            .weights
            .iter()
            .zip(&tru[j].weights)
            .map(|(e, t)| e * t)
            .sum::<f64>();
        assert!(scale > 0.0);
    }
}

#[test]
fn two_component_matrix_first_profile() {
    let profiles = mixing_profiles(&two_component_matrix());
    assert_eq!(profiles[0].weights, vec![0.2, 0.8, 0.4, 0.3, 0.9, 0.0, 1.0]);
    let identity = concentration_profiles(&Matrix::identity(3, 3));
    for (j, p) in identity.iter().enumerate() {
        assert_eq!(p.component, j);
        for (i, &w) in p.weights.iter().enumerate() {
            assert_eq!(w, if i == j { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn correction_never_lowers_sign_accuracy_on_fixtures() {
    for f in Fixture::ALL {
        let raw = amuse::amuse(&f.cube(), &AmuseConfig::default()).unwrap();
        let fixed = correct_signs(&raw, DEFAULT_BINS).unwrap();
        let before = sign_accuracy(&truth(f), &raw.sources).unwrap();
        let after = sign_accuracy(&truth(f), &fixed.sources).unwrap();
        assert!(after >= before, "{}: {before} -> {after}", f.name());
        assert_eq!(after, 1.0, "{}", f.name());
    }
}

#[test]
fn three_component_corrected_run() {
    let f = Fixture::Paper3;
    let model = correct_signs(
        &amuse::amuse(&f.cube(), &AmuseConfig::default()).unwrap(),
        DEFAULT_BINS,
    )
    .unwrap();
    let report = evaluate(&truth(f), f.mixing().entries(), &model).unwrap();
    assert_eq!(report.n_sources, 3);
    assert!(
        report.correlations.iter().all(|&r| r >= 0.99),
        "{:?}",
        report.correlations
    );
}

#[test]
fn plain_svd_mode_also_recovers_the_two_component_fixture() {
    let f = Fixture::Paper2;
    let config = AmuseConfig {
        mode: RotationMode::PlainSvd,
        ..AmuseConfig::default()
    };
    let model = correct_signs(&amuse::amuse(&f.cube(), &config).unwrap(), DEFAULT_BINS).unwrap();
    let m = match_sources(&truth(f), &model.sources).unwrap();
    assert!(
        m.correlations.iter().all(|&r| r >= 0.999),
        "{:?}",
        m.correlations
    );
}

#[test]
fn model_json_round_trip_keeps_verdicts() {
    let f = Fixture::Paper2;
    let model = correct_signs(
        &amuse::amuse(&f.cube(), &AmuseConfig::default()).unwrap(),
        DEFAULT_BINS,
    )
    .unwrap();
    let bytes = render(|w| write_model(w, &model)).unwrap();
    let back = read_model(&bytes[..]).unwrap();
    assert_eq!(back, model);
    let json: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(json["sign_correction"].as_array().unwrap().len(), 2);
    assert_eq!(json["mode"], "sym-evd");
}

#[test]
fn evaluate_rejects_mismatched_component_counts() {
    let f = Fixture::Paper2;
    let model = amuse::amuse(
        &f.cube(),
        &AmuseConfig {
            sources: SourceCount::Fixed(1),
            ..AmuseConfig::default()
        },
    )
    .unwrap();
    assert!(evaluate(&truth(f), f.mixing().entries(), &model).is_err());
}

#[test]
fn self_evaluation_is_perfect() {
    let f = Fixture::Paper3;
    let truth = truth(f);
    let model = bare_model(f.mixing().into_inner(), truth.clone());
    let report = evaluate(&truth, f.mixing().entries(), &model).unwrap();
    assert!(report.amari_index.abs() <= 1e-12);
    assert!(report.correlations.iter().all(|&r| (r - 1.0).abs() < 1e-12));
    assert_eq!(report.matching.permutation, vec![0, 1, 2]);
}
