use std::f64::consts::PI;

use besov_core::grid::fourier_mode;
use besov_core::spectral::*;
use besov_core::{GridFunction, GridSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid(n: usize) -> GridSpec {
    GridSpec::new(n, 0.125).unwrap()
}

// O(n²) DFT written out independently of the library
fn naive_coeffs(values: &[f64]) -> Vec<Complex64> {
    let len = values.len();
    let n = (len / 2) as i64;
    (-n..n)
        .map(|k| {
            values
                .iter()
                .enumerate()
                .map(|(i, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * i as i64) as f64 / len as f64))
                .sum::<Complex64>()
                / len as f64
        })
        .collect()
}

fn power_of_two_n() -> impl Strategy<Value = usize> {
    (2u32..=9).prop_map(|e| 1usize << e)
}

fn real_field(n: usize) -> impl Strategy<Value = GridFunction> {
    prop::collection::vec(-10.0f64..10.0, 2 * n).prop_map(move |v| GridFunction::new(grid(n), v).unwrap())
}

#[test]
fn transform_of_constants_and_modes() {
    for n in [4, 16, 64, 128] {
        let g = grid(n);
        for j in [-(n as i64), -3, 0, 1, n as i64 - 1] {
            let s = forward_transform(&fourier_mode(g, j));
            for k in s.frequencies() {
                let want = if k == j { 1.0 } else { 0.0 };
                assert!((s.coeff(k) - want).norm() < 1e-13, "n={n} j={j} k={k}");
            }
        }
        let zero = inverse_transform(&Spectrum::zeros(g));
        assert_eq!(zero.max_abs(), 0.0);
        let mut s = Spectrum::zeros(g);
        s.set(1, Complex64::new(1.0, 0.0));
        let e1 = inverse_transform(&s);
        let want = fourier_mode(g, 1);
        assert!(e1.values().iter().zip(want.values()).all(|(a, b)| (a - b).norm() < 1e-14));
    }
}

#[test]
fn parseval_against_naive_dft_n8() {
    let g = grid(8);
    let f = GridFunction::from_fn(g, |x| (3.1 * x).cos() - 2.0 * x + (x * 17.0).sin().powi(3));
    let want = naive_coeffs(f.values());
    let got = forward_transform(&f);
    for (a, b) in got.coeffs().iter().zip(&want) {
        assert!((a - b).norm() < 1e-13);
    }
    let l2: f64 = f.values().iter().map(|v| v * v).sum::<f64>() / 16.0;
    assert!((got.energy() - l2).abs() < 1e-12 * l2);
}

#[test]
fn fast_path_against_naive_dft() {
    for n in [64, 96, 256] {
        let g = grid(n);
        let f = GridFunction::from_fn(g, |x| (40.0 * x * x).sin() + x);
        let want = naive_coeffs(f.values());
        let got = forward_transform(&f);
        let err = got.coeffs().iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "n={n} err={err}");
    }
}

#[test]
fn laplacian_examples() {
    let g = GridSpec::new(1, 0.125).unwrap();
    let f = GridFunction::new(g, vec![1.0, 0.0]).unwrap();
    assert_eq!(discrete_laplacian(&f).values(), &[-8.0, 8.0]);
    let c = GridFunction::from_fn(grid(8), |_| 2.5);
    assert_eq!(discrete_laplacian(&c).max_abs(), 0.0);
}

#[test]
fn eigenvalue_examples() {
    assert_eq!(eigenvalue(2, 0).unwrap(), 0.0);
    assert!((eigenvalue(2, 1).unwrap() + 32.0).abs() < 1e-12);
    for n in [1usize, 3, 8, 100] {
        let nf = n as f64;
        assert!((eigenvalue(n, -(n as i64)).unwrap() + 16.0 * nf * nf).abs() < 1e-9 * nf * nf);
    }
    assert!(eigenvalue(4, 5).is_err());
}

#[test]
fn eigen_relation_up_to_n128() {
    for n in [1usize, 2, 4, 8, 16, 32, 64, 128] {
        let g = grid(n);
        let ni = n as i64;
        for j in -ni..=ni {
            let e = fourier_mode(g, j);
            let lam = eigenvalue(n, j).unwrap();
            let lap = discrete_laplacian(&e);
            let err = lap
                .values()
                .iter()
                .zip(e.values())
                .map(|(a, b)| (a - b * lam).norm())
                .fold(0.0, f64::max);
            assert!(err <= 1e-9 * lam.abs().max(1.0), "n={n} j={j} err={err}");
        }
    }
}

#[test]
fn gamma_examples_and_lower_bound() {
    assert_eq!(gamma_ratio(7, 0).unwrap(), 1.0);
    let x = PI / 200.0;
    let oracle = (x.sin() / x).powi(2);
    let got = gamma_ratio(100, 1).unwrap();
    assert!((got - oracle).abs() < 1e-15);
    assert!((got - 0.999_917_756_002_418).abs() < 1e-14);
    let floor = 4.0 / (PI * PI);
    for n in 1..=512usize {
        let ni = n as i64;
        for j in -ni..ni {
            assert!(gamma_ratio(n, j).unwrap() >= floor - 1e-15, "n={n} j={j}");
        }
    }
}

#[test]
fn heat_multiplier_examples() {
    let g = grid(2);
    assert_eq!(g.h(), 1.0 / 128.0);
    assert_eq!(heat_step_multiplier(&g, 1, 0.0).unwrap(), 1.0);
    assert_eq!(heat_step_multiplier(&g, 0, 0.75).unwrap(), 1.0);
    assert!((heat_step_multiplier(&g, 1, g.h()).unwrap() - 0.75).abs() < 1e-15);
    assert!(heat_step_multiplier(&g, 1, 0.3 * g.h()).is_err());
}

#[test]
fn step_factors_stay_in_half_to_one() {
    for c in [0.125, 0.1, 0.0625, 0.01] {
        for n in [1usize, 2, 5, 16, 128, 1024] {
            let g = GridSpec::new(n, c).unwrap();
            let ni = n as i64;
            for j in -ni..=ni {
                let r = step_factor(&g, j).unwrap();
                assert!((0.5..=1.0).contains(&r), "c={c} n={n} j={j} r={r}");
            }
        }
    }
}

#[test]
fn exponential_decay_with_rate_fitted_at_n4() {
    let kappa = decay_rate(&grid(4));
    assert!(kappa > 0.0);
    for n in [8usize, 16, 32, 64, 128] {
        let g = grid(n);
        let ni = n as i64;
        for k in [1u64, 3, 17, 100, g.steps_per_unit() / 4, g.steps_per_unit()] {
            let t = g.time_of(k);
            for j in 1..=ni {
                let m = heat_multiplier_steps(&g, j, k).unwrap().abs();
                assert!(m <= (-kappa * t * (j * j) as f64).exp() * (1.0 + 1e-12), "n={n} j={j} k={k}");
            }
        }
    }
}

#[test]
fn semigroup_examples() {
    let g = grid(16);
    let f = GridFunction::from_fn(g, |x| (2.0 * PI * 3.0 * x).sin() + x.powi(3));
    assert!(discrete_semigroup_apply(&g, 0.0, &f).unwrap().sub(&f).unwrap().max_abs() < 1e-14);
    let c = GridFunction::from_fn(g, |_| 0.7);
    let pc = discrete_semigroup_apply(&g, 0.5, &c).unwrap();
    assert!(pc.values().iter().all(|v| (v - 0.7).abs() < 1e-14));
    let (s, t) = (g.time_of(40), g.time_of(1000));
    let lhs = discrete_semigroup_apply(&g, s, &discrete_semigroup_apply(&g, t, &f).unwrap()).unwrap();
    let rhs = discrete_semigroup_apply(&g, s + t, &f).unwrap();
    assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12);
}

#[test]
fn continuous_semigroup_examples() {
    let p = TrigPolynomial::new(-1, vec![Complex64::new(0.5, 1.0), Complex64::new(2.0, 0.0), Complex64::new(0.5, -1.0)]);
    assert_eq!(continuous_semigroup_apply(&p, 0.0).unwrap(), p);
    let q = continuous_semigroup_apply(&p, 1.0 / (4.0 * PI * PI)).unwrap();
    assert_eq!(q.coeff(0), Complex64::new(2.0, 0.0));
    assert!((q.coeff(1) - p.coeff(1) * (-1f64).exp()).norm() < 1e-15);
    assert!(continuous_semigroup_apply(&p, -1.0).is_err());
}

#[test]
fn iota_and_delta_examples() {
    let g = grid(8);
    let one = extend_iota(&GridFunction::from_fn(g, |_| 1.0));
    for (k, a) in one.terms() {
        let want = if k == 0 { 1.0 } else { 0.0 };
        assert!((a - want).norm() < 1e-15);
    }
    // the alternating grid function is δe_{-n}; its extension is complex off the grid
    let alt = GridFunction::from_fn(g, |x| if ((x * 16.0).round() as i64) % 2 == 0 { 1.0 } else { -1.0 });
    let ext = extend_iota(&alt);
    assert!((ext.coeff(-8) - 1.0).norm() < 1e-14);
    assert!(ext.eval(1.0 / 32.0).im.abs() > 0.5);

    let high = TrigPolynomial::mode(9, Complex64::new(1.0, 0.0));
    let restricted = restrict_delta(&high, &g);
    let want = fourier_mode(g, 9 - 16);
    assert!(restricted.values().iter().zip(want.values()).all(|(a, b)| (a - b).norm() < 1e-13));
    let direct = GridFunction::from_fn(g, |x| high.eval(x));
    assert!(restricted.values().iter().zip(direct.values()).all(|(a, b)| (a - b).norm() < 1e-13));

    let constant = restrict_delta(&TrigPolynomial::mode(0, Complex64::new(-3.0, 0.0)), &g);
    assert!(constant.values().iter().all(|v| (v - Complex64::new(-3.0, 0.0)).norm() < 1e-15));
}

#[test]
fn delta_iota_on_100_random_functions_n32() {
    let g = grid(32);
    for s in 0..100u64 {
        let f = GridFunction::from_fn(g, |x| ((s as f64 + 1.0) * 13.7 * x).sin() * (x * s as f64).cos());
        let back = restrict_delta(&extend_iota(&f), &g);
        let err = back.values().iter().zip(f.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval_and_round_trip((n, f) in power_of_two_n().prop_flat_map(|n| (Just(n), real_field(n)))) {
        let s = forward_transform(&f);
        let l2: f64 = f.values().iter().map(|v| v * v).sum::<f64>() / (2 * n) as f64;
        prop_assert!((s.energy() - l2).abs() <= 1e-10 * l2.max(1e-300));
        let back = inverse_transform_real(&s);
        prop_assert!(back.sub(&f).unwrap().max_abs() <= 1e-12 * f.max_abs().max(1.0));
    }

    #[test]
    fn real_functions_have_hermitian_spectra((n, f) in power_of_two_n().prop_flat_map(|n| (Just(n), real_field(n)))) {
        let s = forward_transform(&f);
        let ni = n as i64;
        for k in (1 - ni)..ni {
            prop_assert!((s.coeff(-k) - s.coeff(k).conj()).norm() < 1e-12 * f.max_abs().max(1.0));
        }
    }

    #[test]
    fn hermitian_spectra_invert_to_real(n in power_of_two_n(), seed in prop::collection::vec(-1.0f64..1.0, 2 * 512 + 2)) {
        let ni = n as i64;
        let mut s = Spectrum::zeros(grid(n));
        for k in 1..ni {
            let a = Complex64::new(seed[2 * k as usize], seed[2 * k as usize + 1]);
            s.set(k, a);
            s.set(-k, a.conj());
        }
        s.set(0, Complex64::new(seed[0], 0.0));
        s.set(-ni, Complex64::new(seed[1], 0.0));
        prop_assert!(inverse_transform(&s).max_imag() < 1e-12);
    }

    #[test]
    fn stencil_step_is_the_spectral_step(n in power_of_two_n(), j in -512i64..512) {
        let g = grid(n);
        let j = j.rem_euclid(2 * n as i64) - n as i64;
        let e = fourier_mode(g, j);
        let lap = discrete_laplacian(&e);
        let r = heat_step_multiplier(&g, j, g.h()).unwrap();
        for (x, (v, l)) in e.values().iter().zip(lap.values()).enumerate() {
            prop_assert!((v + l * g.h() - v * r).norm() < 1e-12, "x index {}", x);
        }
    }
}
