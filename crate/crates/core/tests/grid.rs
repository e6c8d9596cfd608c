use cwave::grid::{antiderivative_from_left, derivative, make_grid, norms, Field, Grid1D};
use proptest::prelude::*;

#[test]
fn three_node_grid() {
    let g = make_grid(1.0, 3).unwrap();
    assert_eq!(g.nodes(), vec![-1.0, 0.0, 1.0]);
    assert_eq!(g.dx(), 1.0);
}

#[test]
fn spacing_of_wide_grid() {
    let g = make_grid(200.0, 4001).unwrap();
    assert!((g.dx() - 0.1).abs() < 1e-15);
    assert_eq!(g.x(2000), 0.0);
}

#[test]
fn rejects_bad_grids() {
    assert!(make_grid(0.0, 100).is_err());
    assert!(make_grid(-1.0, 100).is_err());
    assert!(make_grid(1.0, 2).is_err());
    assert!(make_grid(f64::NAN, 100).is_err());
}

#[test]
fn field_rejects_nonfinite_and_wrong_length() {
    let g = make_grid(1.0, 5).unwrap();
    assert!(Field::new(g, vec![0.0; 4]).is_err());
    assert!(Field::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
}

#[test]
fn antiderivative_of_constants() {
    let g = make_grid(1.0, 3).unwrap();
    let a = antiderivative_from_left(&Field::constant(g, 1.0));
    assert_eq!(a.values(), &[0.0, 1.0, 2.0]);
    let z = antiderivative_from_left(&Field::zeros(g));
    assert!(z.values().iter().all(|&v| v == 0.0));
}

#[test]
fn antiderivative_of_gaussian() {
    let g = make_grid(200.0, 4001).unwrap();
    let f = Field::from_fn(g, |x| (-0.5 * x * x).exp());
    let a = antiderivative_from_left(&f);
    let end = *a.values().last().unwrap();
    assert!((end - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
}

#[test]
fn norms_of_simple_fields() {
    let g = make_grid(3.0, 61).unwrap();
    let z = norms(&Field::zeros(g));
    assert_eq!((z.l2, z.linf, z.l1), (0.0, 0.0, 0.0));
    let c = norms(&Field::constant(g, -2.0));
    assert!((c.l2 - 2.0 * 6.0_f64.sqrt()).abs() < 1e-12);
    assert_eq!(c.linf, 2.0);
    assert!((c.l1 - 12.0).abs() < 1e-12);
}

#[test]
fn l2_of_gaussian() {
    let g = make_grid(200.0, 16385).unwrap();
    let n = norms(&Field::from_fn(g, |x| (-x * x).exp()));
    assert!((n.l2 - (std::f64::consts::PI / 2.0).powf(0.25)).abs() < 1e-8);
}

#[test]
fn derivative_stencils() {
    let g = make_grid(2.0, 41).unwrap();
    let lin = Field::from_fn(g, |x| 3.0 * x - 1.0);
    let d = derivative(&lin, 1).unwrap();
    assert!(d.values().iter().all(|v| (v - 3.0).abs() < 1e-12));
    let quad = Field::from_fn(g, |x| x * x);
    let d2 = derivative(&quad, 2).unwrap();
    assert!(d2.values().iter().all(|v| (v - 2.0).abs() < 1e-9));
    assert!(derivative(&lin, 3).is_err());
}

#[test]
fn derivative_of_sine() {
    let g = make_grid(1.0, 2001).unwrap();
    let d = derivative(&Field::from_fn(g, f64::sin), 1).unwrap();
    let err = (0..g.len()).map(|i| (d.values()[i] - g.x(i).cos()).abs()).fold(0.0, f64::max);
    assert!(err < 1e-5, "{err}");
}

#[test]
fn derivative_inverts_antiderivative_at_second_order() {
    let err = |n: usize| {
        let g = make_grid(3.0, n).unwrap();
        let f = Field::from_fn(g, |x| (x).sin() * (-0.2 * x * x).exp());
        let back = derivative(&antiderivative_from_left(&f), 1).unwrap();
        (1..n - 1).map(|i| (back.values()[i] - f.values()[i]).abs()).fold(0.0, f64::max)
    };
    let (e1, e2, e3) = (err(101), err(201), err(401));
    assert!((e1 / e2).log2() >= 1.9, "{e1} {e2}");
    assert!((e2 / e3).log2() >= 1.9, "{e2} {e3}");
}

fn grid() -> Grid1D {
    make_grid(5.0, 101).unwrap()
}

proptest! {
    #[test]
    fn norms_are_homogeneous(c in -10.0..10.0f64, a in 0.1..3.0f64) {
        let f = Field::from_fn(grid(), |x| (a * x).sin() + 0.3);
        let lhs = norms(&(&f * c)).l2;
        prop_assert!((lhs - c.abs() * norms(&f).l2).abs() <= 1e-12 * (1.0 + lhs));
    }

    #[test]
    fn antiderivative_is_linear(a in 0.1..3.0f64, b in -2.0..2.0f64) {
        let f = Field::from_fn(grid(), |x| (a * x).cos());
        let g = Field::from_fn(grid(), |x| b * x * (-x * x).exp());
        let lhs = antiderivative_from_left(&(&f + &g));
        let rhs = &antiderivative_from_left(&f) + &antiderivative_from_left(&g);
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12);
    }
}
