use fracspec::frac_calculus::{caputo_derivative, frac_integral};
use fracspec::special_fn::{rgamma, FractionalOrder};
use fracspec::SampledSignal;
use num_complex::Complex64;
use proptest::prelude::*;

fn order(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

fn sample(dt: f64, t_end: f64, f: impl Fn(f64) -> f64) -> SampledSignal {
    let len = (t_end / dt).round() as usize + 1;
    SampledSignal::from_scalar_fn(dt, len, 0, |t| Complex64::new(f(t), 0.0)).unwrap()
}

fn corpus() -> Vec<(&'static str, fn(f64) -> f64)> {
    vec![
        ("1", |_| 1.0),
        ("t", |t| t),
        ("1-t+t^2/2", |t| 1.0 - t + 0.5 * t * t),
        ("t^3/6-t", |t| t * t * t / 6.0 - t),
        ("exp(-t)", |t| (-t).exp()),
        ("sin t", f64::sin),
    ]
}

fn sup_dist(a: &SampledSignal, b: &SampledSignal) -> f64 {
    a.sub(b).unwrap().rows().map(|r| r[0].norm()).fold(0.0, f64::max)
}

fn inversion_error(f: &SampledSignal, a: f64) -> f64 {
    let back = frac_integral(&caputo_derivative(f, order(a)).unwrap(), order(a)).unwrap();
    let f0 = f.row(0)[0];
    let want = f.map(|_, x| vec![x[0] - f0]).unwrap();
    sup_dist(&back, &want)
}

#[test]
fn integral_inverts_caputo_derivative() {
    for (name, g) in corpus() {
        let f = sample(1.0 / 256.0, 5.0, g);
        for a in [0.3, 0.5, 0.9, 1.0] {
            let e = inversion_error(&f, a);
            assert!(e <= 5e-4, "{name}, alpha={a}: {e:e}");
        }
    }
}

#[test]
fn integrals_compose() {
    for (name, g) in corpus() {
        let f = sample(1.0 / 256.0, 5.0, g);
        for (a, b) in [(0.5, 0.5), (0.3, 0.4)] {
            let two = frac_integral(&frac_integral(&f, order(a)).unwrap(), order(b)).unwrap();
            let one = frac_integral(&f, order(a + b)).unwrap();
            let e = sup_dist(&two, &one);
            assert!(e <= 5e-4, "{name}, ({a},{b}): {e:e}");
        }
    }
}

#[test]
fn inversion_error_shrinks_with_step() {
    for (name, g) in [("sin t", f64::sin as fn(f64) -> f64), ("exp(-t)", |t: f64| (-t).exp())] {
        let coarse = inversion_error(&sample(1.0 / 64.0, 5.0, g), 0.5);
        let fine = inversion_error(&sample(1.0 / 128.0, 5.0, g), 0.5);
        assert!(coarse / fine >= 2.5, "{name}: {coarse:e} -> {fine:e}");
    }
}

#[test]
fn integral_of_power_is_exact_for_constants_and_lines() {
    let dt = 1.0 / 32.0;
    for a in [0.3, 0.7, 1.0] {
        let one = frac_integral(&sample(dt, 4.0, |_| 1.0), order(a)).unwrap();
        let lin = frac_integral(&sample(dt, 4.0, |t| t), order(a)).unwrap();
        for (j, t) in one.times().enumerate() {
            assert!((one.row(j)[0].re - t.powf(a) * rgamma(a + 1.0)).abs() < 1e-12);
            assert!((lin.row(j)[0].re - t.powf(a + 1.0) * rgamma(a + 2.0)).abs() < 1e-11);
        }
    }
}

proptest! {
    #[test]
    fn integral_is_linear(
        a in 0.05f64..=1.0,
        c in -3.0f64..3.0,
        coef in proptest::collection::vec(-2.0f64..2.0, 4),
    ) {
        let dt = 1.0 / 16.0;
        let f = sample(dt, 8.0, |t| coef[0] + coef[1] * (coef[2] * t).sin());
        let g = sample(dt, 8.0, |t| coef[3] * (-t).exp());
        let lhs = frac_integral(&f.scale(Complex64::new(c, 0.0)).add(&g).unwrap(), order(a)).unwrap();
        let rhs = frac_integral(&f, order(a)).unwrap().scale(Complex64::new(c, 0.0))
            .add(&frac_integral(&g, order(a)).unwrap()).unwrap();
        prop_assert!(sup_dist(&lhs, &rhs) < 1e-11);
    }
}
