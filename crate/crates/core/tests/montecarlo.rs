use unlabeled_detect::experiments::{exp1, exp3};
use unlabeled_detect::montecarlo::{clopper_pearson, roc, roc_all, simulate, DetectorKind, CONFIDENCE_LEVEL};

#[test]
fn labeled_roc_dominates_unlabeled() {
    let model = exp1(3, 30).unwrap();
    let curves = roc_all(&model, 30, &[DetectorKind::Labeled, DetectorKind::Ulr, DetectorKind::DetectorB], 4000, 5).unwrap();
    for target in [0.05, 0.1, 0.2, 0.4] {
        let labeled = curves[0].point_near(target);
        for other in &curves[1..] {
            let p = other.point_near(target);
            // compare at matched type-I, with the interval of the unlabeled estimate as slack
            if (p.type1 - labeled.type1).abs() < 0.01 {
                assert!(labeled.type2 <= p.type2_ci.1, "{} at {target}: {} vs {}", other.detector, labeled.type2, p.type2);
            }
        }
    }
}

#[test]
fn doubling_runs_stays_within_interval() {
    let model = exp3().unwrap();
    let small = roc(&model, 40, DetectorKind::Ulr, 2000, 11).unwrap();
    let large = roc(&model, 40, DetectorKind::Ulr, 4000, 11).unwrap();
    let a = small.point_near(0.1);
    let b = large.points.iter().find(|p| p.threshold == a.threshold).expect("shared threshold");
    let ci = clopper_pearson((b.type2 * 4000.0).round() as usize, 4000, 0.999);
    let slack = 3.0 * (a.type2 * (1.0 - a.type2) / 2000.0).sqrt();
    assert!(a.type2 >= ci.0 - slack && a.type2 <= ci.1 + slack, "{} vs {}", a.type2, b.type2);
    assert!(b.type2_ci.0 <= b.type2 && b.type2 <= b.type2_ci.1);
    assert_eq!(CONFIDENCE_LEVEL, 0.95);
}

#[test]
fn simulation_is_deterministic_and_thread_independent() {
    let model = exp1(3, 20).unwrap();
    let kinds = [DetectorKind::Ulr, DetectorKind::DetectorA, DetectorKind::Auction];
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = serial.install(|| simulate(&model, 20, &kinds, 300, 3).unwrap());
    let b = wide.install(|| simulate(&model, 20, &kinds, 300, 3).unwrap());
    assert_eq!(a, b);
    let c = simulate(&model, 20, &kinds, 300, 4).unwrap();
    assert_ne!(a.h1, c.h1);
}
