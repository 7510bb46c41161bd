use std::time::Instant;

use skewdiff::densities::{linspace, q_theorem2, DensityGrid};
use skewdiff::ou_skew::OuSkewSpec;
use skewdiff::sde_engine::{mixture_probability, simulate, simulate_mixture, PathEnsemble, Recording, SimConfig, TimeGrid};
use skewdiff::skew_family::{
    family_constant_correlation, family_theorem1, family_theorem2, DriftDescriptor, DriftSpec, FamilyDescriptor,
};
use skewdiff::validation::criteria::{run_criterion, SuiteOptions};
use skewdiff::validation::{Check, Part, ValidationReport};
use skewdiff::{Chirality, SkewError};

fn ensemble() -> PathEnsemble {
    let g = TimeGrid::uniform(1.0, 200).unwrap();
    let cfg = SimConfig::new(300, 11).with_recording(Recording::Every(20));
    simulate(&DriftSpec::theorem2(family_theorem2(1.2, Chirality::Left).unwrap()), 0.3, &g, &cfg).unwrap()
}

#[test]
fn ensemble_csv_round_trip() {
    let e = ensemble();
    let mut buf = Vec::new();
    e.write_csv(&mut buf).unwrap();
    let back = PathEnsemble::read_csv(&buf[..]).unwrap();
    assert_eq!(back, e);
}

#[test]
fn ensemble_binary_round_trip() {
    let e = ensemble();
    let mut buf = Vec::new();
    e.write_binary(&mut buf).unwrap();
    assert_eq!(PathEnsemble::read_binary(&buf[..]).unwrap(), e);
    assert!(PathEnsemble::read_binary(&buf[..buf.len() - 3]).is_err());
}

#[test]
fn labelled_ensemble_round_trip_through_files() {
    let t = 1.0;
    let plus = DriftSpec::theorem1(family_theorem1(t, Chirality::Right).unwrap());
    let (_, pp) = mixture_probability(0.2, t).unwrap();
    let g = TimeGrid::new(0.0, t, 100, 1e-4).unwrap();
    let e = simulate_mixture(&plus.clone().with_shift(0.2), &plus.mirrored().with_shift(0.2), pp, 0.2, &g, &SimConfig::new(80, 3))
        .unwrap();
    assert!(e.labels.is_some());
    let dir = tempfile::tempdir().unwrap();
    for (name, binary) in [("e.csv", false), ("e.skdf", true)] {
        let p = dir.path().join(name);
        e.save(&p, binary).unwrap();
        assert_eq!(PathEnsemble::load(&p).unwrap(), e);
    }
}

#[test]
fn density_grid_csv_round_trip() {
    let g = DensityGrid::from_fn(linspace(-4.0, 4.0, 81), vec![0.25, 1.0, 3.0], |x, t| {
        q_theorem2(x, t, 0.7, Chirality::Right)
    })
    .unwrap();
    let mut buf = Vec::new();
    g.write_csv(&mut buf).unwrap();
    let back = DensityGrid::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back, g);
}

#[test]
fn descriptors_round_trip_through_json() {
    let fams = [
        family_theorem1(2.0, Chirality::Right).unwrap(),
        family_theorem2(0.4, Chirality::Left).unwrap(),
        family_constant_correlation(0.6, Chirality::Left).unwrap(),
    ];
    for f in &fams {
        let text = serde_json::to_string(&f.descriptor()).unwrap();
        let d: FamilyDescriptor = serde_json::from_str(&text).unwrap();
        let g = d.build().unwrap();
        for t in [0.1, 0.5, 1.5] {
            assert_eq!(g.alpha(t).to_bits(), f.alpha(t).to_bits());
        }
    }
    let drifts = [
        DriftSpec::general_class(fams[2].clone()).with_shift(0.5),
        DriftSpec::ou_h_transform(OuSkewSpec::new(0.8, Chirality::Left, 0.1).unwrap()),
        DriftSpec::linear(-1.5),
        DriftSpec::zero().with_sigma(2.0),
    ];
    for d in &drifts {
        let text = serde_json::to_string(&d.descriptor().unwrap()).unwrap();
        let back: DriftDescriptor = serde_json::from_str(&text).unwrap();
        let e = back.build().unwrap();
        for x in [-1.0, 0.0, 2.0] {
            assert_eq!(e.eval(x, 0.5).to_bits(), d.eval(x, 0.5).to_bits());
        }
    }
    let custom = DriftSpec::custom("mine", std::sync::Arc::new(|x: f64, _t: f64| x));
    assert!(matches!(custom.descriptor(), Err(SkewError::Unsupported(_))));
    assert!(serde_json::from_str::<FamilyDescriptor>(r#"{"kind":"theorem2","parameters":{"alpha":1},"chirality":1,"x":1}"#).is_err());
}

#[test]
fn validation_report_round_trip() {
    let started = Instant::now();
    let mut checks = vec![run_criterion(0, &SuiteOptions::quick(1))];
    checks.push(Check::from_parts(
        "mixed",
        vec![Part::upper("a", 0.1, 1.0), Part::lower("b", 2.0, 1.0), Part::upper("nan", f64::NAN, 1.0)],
        Some(10),
        "",
        serde_json::json!({ "k": [1, 2] }),
    ));
    let r = ValidationReport::new("quick", 1, checks, started);
    let text = r.to_json().unwrap();
    let back: ValidationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.suite, "quick");
    assert_eq!(back.checks.len(), 2);
    assert_eq!(back.checks[0], r.checks[0]);
    assert!(!back.all_pass);
    assert!(back.checks[1].parts[2].statistic.is_nan());
}
