use relbench_core::calib::{ada_ece, DEFAULT_BINS};

include!("support/adaece_fixture.rs");

#[test]
fn hand_binned_fixture() {
    for (bins, want) in ECE_EXPECTED {
        let got = ada_ece(&ECE_CONF, &ECE_CORRECT, bins).unwrap();
        assert!((got - want).abs() <= 1e-12, "{bins} bins: {got} vs {want}");
    }
}

#[test]
fn confident_and_correct_is_calibrated() {
    assert_eq!(ada_ece(&[1.0; 30], &[true; 30], DEFAULT_BINS).unwrap(), 0.0);
}
