use fracspec::cauchy_solver::{adams_oracle, mild_residual, resolvent_family, solve_forced, Forcing, Grid, Scenario};
use fracspec::operator_spectrum::OperatorModel;
use fracspec::special_fn::FractionalOrder;
use fracspec::SampledSignal;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn order(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

fn rows(m: &[&[Complex64]]) -> OperatorModel {
    OperatorModel::from_rows(&m.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn sup_distance(a: &SampledSignal, b: &SampledSignal) -> f64 {
    (0..a.len()).map(|j| a.sub(b).unwrap().norm_at(j)).fold(0.0, f64::max)
}

fn test_scenarios() -> Vec<Scenario> {
    let grid = Grid {
        t_max: 10.0,
        steps: 5120,
    };
    let mut out = Vec::new();
    let mut add = |a: OperatorModel, al: f64, x0: Vec<Complex64>, forcing: Forcing| {
        let mut s = Scenario::new(a, order(al), x0, grid).unwrap();
        s.forcing = forcing;
        out.push(s);
    };
    add(rows(&[&[c(-1.0, 0.0)]]), 0.5, vec![c(1.0, 0.0)], Forcing::Zero);
    add(
        rows(&[&[c(-1.0, 0.0)]]),
        0.3,
        vec![c(1.0, 0.0)],
        Forcing::ExpDecay {
            rate: 1.0,
            vector: vec![c(1.0, 0.0)],
        },
    );
    add(rows(&[&[c(0.0, 1.0)]]), 1.0, vec![c(1.0, 0.0)], Forcing::Zero);
    add(
        rows(&[&[c(-1.0, 0.0), c(0.5, 0.0)], &[c(0.0, 0.0), c(-2.0, 1.0)]]),
        0.8,
        vec![c(1.0, 0.0), c(0.0, 1.0)],
        Forcing::ExpDecay {
            rate: 0.5,
            vector: vec![c(1.0, 0.0), c(1.0, 0.0)],
        },
    );
    add(
        rows(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(-1.0, 0.0), c(-0.2, 0.0)]]),
        0.9,
        vec![c(1.0, 0.0), c(0.0, 0.0)],
        Forcing::Sinusoid {
            xi: 2.0,
            vector: vec![c(0.0, 0.0), c(0.5, 0.0)],
        },
    );
    add(
        rows(&[
            &[c(-0.5, 1.0), c(0.2, 0.0), c(0.0, 0.0)],
            &[c(0.0, 0.0), c(-1.0, 0.0), c(0.3, 0.3)],
            &[c(0.1, 0.0), c(0.0, 0.0), c(-0.2, -1.5)],
        ]),
        0.6,
        vec![c(1.0, 0.0), c(-1.0, 0.5), c(0.0, 1.0)],
        Forcing::Zero,
    );
    out
}

#[test]
fn spectral_solver_agrees_with_adams() {
    for (k, sc) in test_scenarios().iter().enumerate() {
        let u = solve_forced(sc).unwrap();
        let v = adams_oracle(sc).unwrap();
        let dist = sup_distance(&u, &v);
        assert!(dist <= 1e-3, "scenario {k}: sup distance {dist:e}");
        assert!(mild_residual(&v, sc).unwrap() <= 1e-3, "scenario {k}: Adams residual");
    }
}

#[test]
fn resolvent_family_commutes_with_generator() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for al in [0.4, 0.7, 1.0] {
        let d = 3;
        let v = DMatrix::<Complex64>::identity(d, d)
            + DMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)));
        let mu: Vec<Complex64> = (0..d)
            .map(|_| c(rng.gen_range(-2.0..-0.1), rng.gen_range(-2.0..2.0)))
            .collect();
        let m = &v * DMatrix::from_diagonal(&DVector::from_column_slice(&mu)) * v.clone().try_inverse().unwrap();
        let a = OperatorModel::new(m.clone()).unwrap();
        for t in [0.5, 1.0, 5.0] {
            let s = resolvent_family(&a, order(al), t).unwrap();
            let comm = (&m * &s - &s * &m).norm();
            assert!(comm <= 1e-10, "alpha={al} t={t}: {comm:e}");
        }
    }
}

#[test]
fn homogeneous_solutions_satisfy_the_integral_equation() {
    let a = rows(&[&[c(-1.0, 0.5), c(0.3, 0.0)], &[c(0.0, 0.0), c(-0.4, -1.0)]]);
    for al in [0.3, 0.5, 0.8, 1.0] {
        let grid = Grid {
            t_max: 20.0,
            steps: 640,
        };
        let x0 = vec![c(1.0, 0.0), c(0.5, -0.5)];
        let sc = Scenario::new(a.clone(), order(al), x0.clone(), grid).unwrap();
        let u = SampledSignal::from_fn(grid.dt(), grid.len(), 2, 0, |t| {
            let s = resolvent_family(&a, order(al), t).unwrap();
            (s * DVector::from_column_slice(&x0)).iter().copied().collect()
        })
        .unwrap();
        let r = mild_residual(&u, &sc).unwrap();
        assert!(r <= 1e-3, "alpha={al}: residual {r:e}");
    }
}

#[test]
fn scalar_relaxation_decays_algebraically() {
    let a = rows(&[&[c(-1.0, 0.0)]]);
    for al in [0.3, 0.5] {
        let u = |t: f64| resolvent_family(&a, order(al), t).unwrap()[(0, 0)].re;
        let ratio = u(100.0) / u(50.0);
        let want = 2f64.powf(-al);
        assert!(
            ratio >= 0.9 * want && ratio <= 1.1 * want,
            "alpha={al}: {ratio} vs {want}"
        );
    }
}

#[test]
fn defective_operator_needs_the_oracle() {
    let jordan = rows(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(0.0, 0.0)]]);
    let mut sc = Scenario::new(
        jordan,
        order(1.0),
        vec![c(0.0, 0.0), c(1.0, 0.0)],
        Grid {
            t_max: 10.0,
            steps: 100,
        },
    )
    .unwrap();
    assert!(solve_forced(&sc).is_err());
    sc.adams_fallback = true;
    let u = solve_forced(&sc).unwrap();
    assert!((u.row(100)[0] - c(10.0, 0.0)).norm() < 1e-10);
}

#[test]
fn scenario_files_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for name in ["scalar_fractional", "rotation", "jordan", "damped_forced"] {
        let sc = Scenario::from_path(&dir.join(format!("{name}.toml"))).unwrap();
        assert_eq!(sc.x0.len(), sc.operator.dim(), "{name}");
    }
}

proptest! {
    #[test]
    fn classical_family_is_a_semigroup(seed in 0u64..1000, t in 0.0f64..3.0, s in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(3, 3, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let a = OperatorModel::new(m).unwrap();
        prop_assume!(a.condition().is_some_and(|k| k < 1e6));
        let one = order(1.0);
        let lhs = resolvent_family(&a, one, t + s).unwrap();
        let rhs = resolvent_family(&a, one, t).unwrap() * resolvent_family(&a, one, s).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-9 * lhs.norm().max(1.0));
    }
}
