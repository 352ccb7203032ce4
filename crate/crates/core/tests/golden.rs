//! Flow geometry of the Krupa Markov preset against frozen values from
//! `golden/krupa_oracle.py`.

use hetnet::flow::{connection_entry, initial_entrance, FlowConfig};
use hetnet::model::{builtin_system, Params};
use hetnet::{Matrix, Sign, Vector};
use serde_json::Value;

fn golden() -> Value {
    serde_json::from_str(include_str!("golden/krupa_markov.json")).unwrap()
}

fn vector(v: &Value) -> Vector {
    Vector::from_vec(v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
}

fn matrix(v: &Value) -> Matrix {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone()).unwrap();
    Matrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn assert_close(label: &str, got: &Matrix, want: &Matrix, tol: f64) {
    let err = (got - want).amax() / want.amax().max(1.0);
    assert!(err < tol, "{label}: relative error {err:.3e}\n got {got}\nwant {want}");
}

#[test]
fn connection_from_z1_plus() {
    let g = golden();
    let spec = builtin_system("krupa-cubic", &Params::default()).unwrap();
    assert!((spec.saddle(0).radius - g["radius"].as_f64().unwrap()).abs() < 1e-15);
    let z1 = spec.saddle_by_name("z1+").unwrap().id;
    let geo = connection_entry(&spec, z1, Sign::Plus, &FlowConfig::default()).unwrap();
    let want = &g["connection_z1p_plus"];
    assert!((geo.travel_time - want["travel_time"].as_f64().unwrap()).abs() < 1e-8);
    assert!((&geo.entry_point - vector(&want["entry_point"])).amax() < 1e-8);
    assert_close("fundamental matrix", &geo.fundamental_matrix, &matrix(&want["fundamental_matrix"]), 1e-8);
    assert_close("transport covariance", &geo.transport_cov, &matrix(&want["transport_cov"]), 1e-6);
}

#[test]
fn initial_entrance_from_default_anchor() {
    let g = golden();
    let spec = builtin_system("krupa-cubic", &Params::default()).unwrap();
    let want = &g["initial_entrance"];
    let x0 = vector(&want["x0"]);
    assert!((hetnet::model::default_x0(&spec).unwrap() - &x0).amax() < 1e-8);
    let e = initial_entrance(&spec, &x0, &FlowConfig::default()).unwrap();
    assert_eq!(spec.saddle(e.saddle).label(), "z2+");
    assert!((e.t_tilde - want["t_tilde"].as_f64().unwrap()).abs() < 1e-8);
    assert!((&e.entrance.point - vector(&want["point"])).amax() < 1e-8);
    let hetnet::exitmap::Distribution::Gaussian(gauss) = &e.entrance.mu else {
        panic!("deterministic start must give a Gaussian entrance");
    };
    assert_close("entrance covariance", &gauss.cov, &matrix(&want["cov"]), 1e-6);
}
