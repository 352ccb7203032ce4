use hetnet::flow::{connection_entry, integrate_flow, integrate_variational, FlowConfig};
use hetnet::model::{builtin_system, chart_from_local, chart_to_local, default_x0, validate_network, Params, SaddleSpec};
use hetnet::{Matrix, NetworkSpec, Sign, Vector};
use proptest::prelude::*;

fn system(name: &str, params: &str) -> NetworkSpec {
    builtin_system(name, &Params::parse(params).unwrap()).unwrap()
}

fn concrete() -> Vec<NetworkSpec> {
    vec![system("krupa-cubic", "preset=markov"), system("krupa-cubic", "preset=cycling"), system("linear-saddle-2d", "")]
}

/// Largest relative deviation of `Φ(t)` from central differences of the flow map.
fn variational_vs_differences(spec: &NetworkSpec, x0: &Vector, t: f64) -> f64 {
    let field = spec.field.as_ref().unwrap();
    let step = 1e-3;
    let phi = integrate_variational(field, x0, t, step).unwrap().fundamental;
    let d = x0.len();
    let h = 1e-6;
    let mut fd = Matrix::zeros(d, d);
    for j in 0..d {
        let (mut xp, mut xm) = (x0.clone(), x0.clone());
        xp[j] += h;
        xm[j] -= h;
        let col = (integrate_flow(field, &xp, t, step).unwrap() - integrate_flow(field, &xm, t, step).unwrap()) / (2.0 * h);
        fd.set_column(j, &col);
    }
    (&phi - &fd).amax() / phi.amax().max(1.0)
}

#[test]
fn fundamental_matrix_matches_finite_differences() {
    for spec in concrete() {
        let x0 = default_x0(&spec).unwrap();
        for t in [0.5, 2.0, 5.0] {
            let err = variational_vs_differences(&spec, &x0, t);
            assert!(err < 1e-4, "t={t}: {err:e}");
        }
    }
}

#[test]
fn connection_time_converges_at_fourth_order() {
    let spec = system("krupa-cubic", "preset=markov");
    let h = |step: f64| {
        let cfg = FlowConfig { step, ..FlowConfig::default() };
        connection_entry(&spec, 0, Sign::Plus, &cfg).unwrap().travel_time
    };
    let hs: Vec<f64> = [0.16, 0.08, 0.04, 0.02].into_iter().map(h).collect();
    for w in hs.windows(3) {
        let (d1, d2) = ((w[1] - w[0]).abs(), (w[2] - w[1]).abs());
        assert!(d2 < d1 / 8.0, "{hs:?}");
    }
}

#[test]
fn krupa_saddles_share_eigenvalues() {
    for spec in [system("krupa-cubic", "preset=markov"), system("krupa-cubic", "preset=cycling"), system("krupa-cubic", "a1=-1,a2=-3,a3=0.5")] {
        let first = &spec.saddles[0].eigenvalues;
        assert!(spec.saddles.iter().all(|s| &s.eigenvalues == first));
    }
}

#[test]
fn validation_leaves_builtins_untouched() {
    for spec in concrete() {
        let copy = spec.clone();
        assert!(validate_network(&spec).is_empty());
        assert_eq!(format!("{:?}", validate_network(&spec)), format!("{:?}", validate_network(&copy)));
        assert_eq!(spec, copy);
    }
}

fn saddle_strategy() -> impl Strategy<Value = (SaddleSpec, Vec<f64>)> {
    (prop::collection::vec(-0.4..0.4f64, 9), prop::collection::vec(-3.0..3.0f64, 3), prop::collection::vec(-2.0..2.0f64, 3), 0.05..1.0f64)
        .prop_map(|(off, pos, y, r)| {
            let mut v = Matrix::identity(3, 3);
            for (k, o) in off.into_iter().enumerate() {
                if k % 4 != 0 {
                    v[(k / 3, k % 3)] = o;
                }
            }
            let saddle = SaddleSpec {
                id: 0,
                name: "s".into(),
                position: Vector::from_vec(pos),
                eigenvalues: vec![1.0, -1.0, -2.0],
                eigenvectors: v,
                nu: 2,
                radius: r,
            };
            (saddle, y.into_iter().map(|c| c * r).collect())
        })
}

proptest! {
    #[test]
    fn chart_round_trip((saddle, y) in saddle_strategy()) {
        let x = chart_from_local(&saddle, &Vector::from_vec(y));
        let back = chart_from_local(&saddle, &chart_to_local(&saddle, &x).unwrap());
        prop_assert!((&back - &x).amax() <= 1e-12 * x.amax().max(1.0));
    }
}
