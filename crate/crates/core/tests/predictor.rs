use hetnet::exitmap::{
    beta_exponent, branch_seed, classify_set, enumerate_sequences, exit_distribution, exit_measure, psi, root_entrance,
    AdmissibleSequence, Distribution, EnumerationMode, ExitCase, Gaussian, PredictConfig, SymmetryTag,
};
use hetnet::field::DiffusionSpec;
use hetnet::flow::EntranceData;
use hetnet::model::{builtin_system, default_x0, Params, SaddleSpec, Target};
use hetnet::{Matrix, NetworkSpec, Sign, Vector};
use proptest::prelude::*;

fn system(name: &str, params: &str) -> NetworkSpec {
    builtin_system(name, &Params::parse(params).unwrap()).unwrap()
}

fn predict(spec: &NetworkSpec, mode: EnumerationMode, prune: bool) -> Vec<AdmissibleSequence> {
    let cfg = PredictConfig { prune_zero: prune, ..PredictConfig::default() };
    enumerate_sequences(spec, default_x0(spec).as_ref(), &mode, &cfg).unwrap()
}

fn presets() -> Vec<(&'static str, &'static str)> {
    vec![
        ("krupa-cubic", "preset=markov"),
        ("krupa-cubic", "preset=cycling"),
        ("linear-saddle-2d", ""),
        ("cellular-2d", "regime=contraction"),
        ("cellular-2d", "regime=expansion"),
        ("cellular-2d", "regime=boundary"),
    ]
}

#[test]
fn markov_depth_two_is_uniform() {
    let seqs = predict(&system("krupa-cubic", "preset=markov"), EnumerationMode::Depth(2), false);
    assert_eq!(seqs.len(), 4);
    for s in &seqs {
        assert_eq!(s.pi, 0.25);
        assert_eq!(s.dwell, [2.0, 2.0]);
        assert_eq!(s.betas, [1.0, 1.0]);
        assert_eq!(s.tags, [SymmetryTag::Symmetric; 2]);
        assert_eq!(s.cases, [ExitCase::OneUnstableNoise; 2]);
        assert_eq!(s.root_orbit, "x0->z2+");
    }
    let c = classify_set(&seqs);
    assert!(c.free && c.complete && c.conservative);
    assert_eq!(c.total_pi, 1.0);
}

#[test]
fn cycling_depth_four_locks_in() {
    let seqs = predict(&system("krupa-cubic", "preset=cycling"), EnumerationMode::Depth(4), true);
    let paths: Vec<&str> = seqs.iter().map(|s| s.path.as_str()).collect();
    assert_eq!(paths, ["z2+:-;z3-:+;z1+:+;z2+:-", "z2+:+;z3+:+;z1+:+;z2+:+"]);
    for s in &seqs {
        assert_eq!(s.pi, 0.5);
        assert_eq!(s.probabilities, [0.5, 1.0, 1.0, 1.0]);
        assert_eq!(s.tags, [SymmetryTag::StronglyAsymmetric; 4]);
        for (j, (d, b)) in s.dwell.iter().zip(&s.betas).enumerate() {
            assert!((d - 2.0 * 0.4f64.powi(j as i32)).abs() < 1e-12);
            assert!((b - 0.4f64.powi(j as i32 + 1)).abs() < 1e-12);
        }
    }
}

#[test]
fn cycling_branches_after_the_first_are_deterministic() {
    let seqs = predict(&system("krupa-cubic", "preset=cycling"), EnumerationMode::Depth(3), false);
    assert_eq!(seqs.len(), 8);
    for s in &seqs {
        assert!(s.alphas[1..].iter().all(|a| *a < 1.0));
        assert!(s.probabilities[1..].iter().all(|p| *p == 0.0 || *p == 1.0), "{}", s.path);
    }
}

#[test]
fn linear_saddle_splits_evenly() {
    let spec = system("linear-saddle-2d", "");
    let seqs = predict(&spec, EnumerationMode::Depth(3), false);
    assert_eq!(seqs.len(), 2);
    assert!(seqs.iter().all(|s| s.pi == 0.5 && s.dwell == [1.0] && s.terminal_exit.is_some()));
    let m = exit_measure(&spec, default_x0(&spec).as_ref(), &PredictConfig::default()).unwrap();
    assert_eq!(m.atoms.iter().map(|a| a.weight).collect::<Vec<_>>(), [0.5, 0.5]);
}

#[test]
fn cellular_exit_measures() {
    let weights = |regime: &str| {
        let spec = system("cellular-2d", &format!("regime={regime}"));
        exit_measure(&spec, None, &PredictConfig::default()).unwrap()
    };
    let w = |m: &hetnet::exitmap::ExitMeasure| m.atoms.iter().map(|a| a.weight).collect::<Vec<_>>();
    assert_eq!(w(&weights("contraction")), [0.5, 0.25, 0.125, 0.125]);
    assert_eq!(w(&weights("expansion")), [0.5, 0.0, 0.0, 0.5]);
    let b = weights("boundary");
    assert!(b.conservative);
    assert!((b.total_pi - 1.0).abs() <= 3.0 * b.atoms.iter().map(|a| a.stderr.powi(2)).sum::<f64>().sqrt() + 1e-12);
    assert_eq!(b.atoms[0].weight, 0.5);
    assert!(b.atoms[1].weight > 0.0 && b.atoms[2].weight > 0.0);
}

#[test]
fn every_preset_is_conservative_up_to_depth_five() {
    for (name, params) in presets() {
        let spec = system(name, params);
        for depth in 1..=5 {
            let seqs = predict(&spec, EnumerationMode::Depth(depth), false);
            assert!(seqs.iter().all(|s| s.degenerate.is_none()), "{name} {params} depth {depth}");
            let c = classify_set(&seqs);
            assert!(c.free && c.complete && c.conservative, "{name} {params} depth {depth}: {c:?}");
        }
    }
}

#[test]
fn sets_of_paths_are_classified() {
    let spec = system("krupa-cubic", "preset=markov");
    use Sign::*;
    let partial = EnumerationMode::Set(vec![vec![Plus], vec![Minus, Plus]]);
    let c = classify_set(&predict(&spec, partial, false));
    assert!(c.free && !c.complete && !c.conservative);
    assert_eq!(c.total_pi, 0.75);
    let mixed = EnumerationMode::Set(vec![vec![Plus], vec![Minus, Plus], vec![Minus, Minus]]);
    let c = classify_set(&predict(&spec, mixed, false));
    assert!(c.free && c.complete && c.conservative);
    let nested = EnumerationMode::Set(vec![vec![Plus], vec![Plus, Minus], vec![Minus]]);
    assert!(!classify_set(&predict(&spec, nested, false)).free);
}

/// Pair constraints of the exit map on every saddle reached within three passages.
fn check_pairs(spec: &NetworkSpec, saddle: usize, entrance: &EntranceData, depth: usize, cfg: &PredictConfig) {
    let out = psi(spec, saddle, entrance, cfg, 7).unwrap();
    assert_eq!(out.minus.t, out.plus.t);
    assert_eq!(out.minus.beta, out.plus.beta);
    assert_eq!(out.minus.p + out.plus.p, 1.0);
    assert!(out.minus.beta > 0.0 && out.minus.beta <= 1.0);
    if depth == 0 {
        return;
    }
    for sign in Sign::BOTH {
        let b = out.branch(sign);
        if let Target::Saddle(next) = b.target {
            let e = EntranceData { point: b.x.clone(), alpha: b.beta, mu: b.law.clone() };
            check_pairs(spec, next, &e, depth - 1, cfg);
        }
    }
}

#[test]
fn exit_map_pair_constraints() {
    let cfg = PredictConfig { n_kappa: 4000, ..PredictConfig::default() };
    for (name, params) in presets() {
        let spec = system(name, params);
        let (saddle, entrance, _) = root_entrance(&spec, default_x0(&spec).as_ref(), &cfg.flow).unwrap();
        check_pairs(&spec, saddle, &entrance, 3, &cfg);
    }
}

#[test]
fn noise_scale_does_not_change_the_classification() {
    for (name, params) in [("krupa-cubic", "preset=markov"), ("krupa-cubic", "preset=cycling"), ("linear-saddle-2d", "")] {
        let spec = system(name, params);
        let x0 = default_x0(&spec);
        let cfg = PredictConfig::default();
        let a = enumerate_sequences(&spec, x0.as_ref(), &EnumerationMode::Depth(3), &cfg).unwrap();
        for c in [0.5, 2.0] {
            let scaled = spec.with_noise_scale(c).unwrap();
            let b = enumerate_sequences(&scaled, x0.as_ref(), &EnumerationMode::Depth(3), &cfg).unwrap();
            for (s, t) in a.iter().zip(&b) {
                assert_eq!((&s.path, s.pi, &s.betas, &s.tags, &s.cases), (&t.path, t.pi, &t.betas, &t.tags, &t.cases));
            }
        }
    }
}

#[test]
fn abstract_copy_predicts_the_same() {
    for params in ["preset=markov", "preset=cycling"] {
        let spec = system("krupa-cubic", params);
        let x0 = default_x0(&spec).unwrap();
        let abs = spec.to_abstract(&x0).unwrap();
        let cfg = PredictConfig::default();
        let a = enumerate_sequences(&spec, Some(&x0), &EnumerationMode::Depth(4), &cfg).unwrap();
        let b = enumerate_sequences(&abs, None, &EnumerationMode::Depth(4), &cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (s, t) in a.iter().zip(&b) {
            assert_eq!((&s.path, s.pi, &s.tags), (&t.path, t.pi, &t.tags), "{params}");
        }
    }
}

#[test]
fn prediction_is_deterministic_per_seed() {
    let spec = system("cellular-2d", "regime=boundary");
    let cfg = PredictConfig { seed: 3, ..PredictConfig::default() };
    let run = || enumerate_sequences(&spec, None, &EnumerationMode::UntilExit, &cfg).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.iter().map(|s| s.pi).collect::<Vec<_>>(), b.iter().map(|s| s.pi).collect::<Vec<_>>());
    assert_ne!(branch_seed(3, &[Sign::Plus]), branch_seed(3, &[Sign::Minus]));
    assert_ne!(branch_seed(3, &[]), branch_seed(4, &[]));
}

fn saddle(eigenvalues: Vec<f64>) -> SaddleSpec {
    let d = eigenvalues.len();
    let nu = eigenvalues.iter().filter(|l| **l > 0.0).count() + 1;
    SaddleSpec {
        id: 0,
        name: "s".into(),
        position: Vector::zeros(d),
        eigenvalues,
        eigenvectors: Matrix::identity(d, d),
        nu,
        radius: 0.5,
    }
}

fn eigen_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        (0.1..3.0f64, -3.0..-0.1f64).prop_map(|(a, b)| vec![a, b]),
        (0.1..3.0f64, 0.0..1.0f64, -3.0..-0.1f64).prop_map(|(a, f, c)| vec![a, a * (0.05 + 0.9 * f), c]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn exit_case_matches_beta_exponent(eig in eigen_strategy(), alpha in 0.05..1.0f64) {
        let s = saddle(eig);
        let d = s.dim();
        let (beta, case) = beta_exponent(&s, alpha);
        prop_assert!(beta > 0.0 && beta <= 1.0);
        let mut point = Vector::zeros(d);
        point[0] = 0.3;
        point[s.nu - 1] = 0.5;
        let entrance = EntranceData { point, alpha, mu: Distribution::Gaussian(Gaussian::centered(Matrix::identity(d, d))) };
        let kappa = Distribution::Gaussian(Gaussian::centered(Matrix::identity(d, d)));
        let (_, got) = exit_distribution(&s, &DiffusionSpec::identity(d), &entrance, &kappa, Sign::Plus).unwrap();
        prop_assert_eq!(got, case);
    }
}
