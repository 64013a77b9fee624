use std::f64::consts::PI;

use besov_core::besov::FilterBank;
use besov_core::lab::*;
use besov_core::scheme::{coupled_solve, Problem, SolveOptions};
use besov_core::spectral::TrigPolynomial;
use besov_core::GridSpec;
use num_complex::Complex64;
use proptest::prelude::*;

const C: f64 = 0.125;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// E|⟨δO_t - Oⁿ_t, δe_ℓ⟩|² summed mode by mode over k = ℓ + 2jn, |j| ≤ J,
// with every time integral done step by step and a tail estimate for the
// alias modes beyond J.
fn brute_exact_variance(n: usize, ell: i64, t: f64, jmax: i64) -> f64 {
    let h = C / (4.0 * (n * n) as f64);
    let steps = (t / h).round() as i64;
    let nf = n as f64;
    let lam_n = -16.0 * nf * nf * (ell as f64 * PI / (2.0 * nf)).sin().powi(2);
    let r = 1.0 + h * lam_n;
    let mut coarse = 0.0;
    for m in 0..steps {
        coarse += h * r.powi(2 * m as i32);
    }
    let mut fine = 0.0;
    let mut cross = 0.0;
    for j in -jmax..=jmax {
        let k = ell + 2 * n as i64 * j;
        let lam = -4.0 * PI * PI * (k * k) as f64;
        fine += if k == 0 { t } else { -(2.0 * lam * t).exp_m1() / (-2.0 * lam) };
        let x = PI * k as f64 / nf;
        let sinc = if k == 0 { 1.0 } else { x.sin() / x };
        let mut acc = 0.0;
        for m in (0..steps).rev() {
            // ∫ over step m of e^{λ_k(t-s)} ds
            let end = t - (m + 1) as f64 * h;
            let piece = if k == 0 { h } else { (lam * end).exp() * (lam * h).exp_m1() / lam };
            let term = r.powi((steps - 1 - m) as i32) * piece;
            acc += term;
            if term.abs() < 1e-30 * acc.abs() {
                break;
            }
        }
        cross += sinc * acc;
    }
    // Σ_{j>J} over both signs of 1/(8π²k²), midpoint rule for the tail
    let b = 2.0 * nf;
    let a = ell as f64;
    let start = jmax as f64 + 0.5;
    let tail = (1.0 / (b * (b * start + a)) + 1.0 / (b * (b * start - a))) / (8.0 * PI * PI);
    fine + tail + coarse - 2.0 * cross
}

// Dense propagation of both schemes on the fine cells, no Fourier transforms:
// the error mode is Σ w_{s,x} ξ_{s,x} with independent ξ of variance h_N/(2N).
fn brute_proxy_variance(n: usize, big_n: usize, ell: i64, t: f64) -> f64 {
    let hn = C / (4.0 * (n * n) as f64);
    let hf = C / (4.0 * (big_n * big_n) as f64);
    let ratio = big_n / n;
    let blocks = (t / hn).round() as usize;
    let fine_steps = blocks * ratio * ratio;
    let (lc, lf) = (2 * n, 2 * big_n);
    let stencil = |v: &[Complex64]| -> Vec<Complex64> {
        let len = v.len();
        (0..len)
            .map(|i| v[i] + C * (v[(i + 1) % len] - 2.0 * v[i] + v[(i + len - 1) % len]))
            .collect()
    };
    let phase = |y: usize| Complex64::from_polar(1.0 / lc as f64, -2.0 * PI * ell as f64 * y as f64 / lc as f64);
    let mut fine_row: Vec<Complex64> = (0..lf)
        .map(|x| if x % ratio == 0 { phase(x / ratio) } else { Complex64::new(0.0, 0.0) })
        .collect();
    let mut coarse_row: Vec<Complex64> = (0..lc).map(phase).collect();
    let mut total = 0.0;
    for s in (0..fine_steps).rev() {
        for x in 0..lf {
            let w = fine_row[x] * lf as f64 - coarse_row[x / ratio] * lc as f64;
            total += w.norm_sqr();
        }
        fine_row = stencil(&fine_row);
        if s % (ratio * ratio) == 0 {
            coarse_row = stencil(&coarse_row);
        }
    }
    total * hf / lf as f64
}

#[test]
fn exact_variance_agrees_with_mode_by_mode_summation() {
    for (n, ell, t) in [(16usize, 1i64, 0.25), (16, 1, 1.0), (8, 0, 0.5), (4, -3, 1.0), (32, 7, 0.125)] {
        let lib = exact_mode_variance(n, ell, t, C).unwrap();
        let oracle = brute_exact_variance(n, ell, t, 20_000);
        assert!(rel(lib.value, oracle) < 1e-9, "n={n} ell={ell} t={t}: {} vs {oracle}", lib.value);
        assert!((lib.direct + lib.alias + lib.cross - lib.value).abs() < 1e-18);
    }
}

#[test]
fn frozen_exact_variances() {
    let cases = [
        (16usize, 1i64, 0.25, 2.041_119_739_292_727_4e-4),
        (16, 1, 1.0, 2.041_119_743_726_195e-4),
        // zero mode: coarse and direct parts cancel, aliases give Σ_j 1/(4π²(16j)²)
        (8, 0, 0.5, 1.0 / 6144.0),
        (4, -3, 1.0, 4.336_790_818_123_859e-3),
    ];
    for (n, ell, t, want) in cases {
        let got = exact_mode_variance(n, ell, t, C).unwrap().value;
        assert!(rel(got, want) < 1e-12, "n={n} ell={ell} t={t}: {got:e}");
    }
}

#[test]
fn exact_variance_edge_cases() {
    assert_eq!(exact_mode_variance(16, 3, 0.0, C).unwrap().value, 0.0);
    let far = exact_mode_variance(4096, 1, 1.0, C).unwrap();
    assert!(far.direct < 1e-6);
    assert!(far.alias > 0.0);
    assert!(exact_mode_variance(16, 16, 0.5, C).is_err());
    assert!(exact_mode_variance(16, -16, 0.5, C).is_err());
    let all = mode_variances(8, 0.5, C).unwrap();
    assert_eq!(all.len(), 16);
    assert!(all.iter().all(|v| *v > 0.0));
    assert!(rel(all[9], exact_mode_variance(8, 1, 0.5, C).unwrap().value) < 1e-15);
}

#[test]
fn proxy_agrees_with_dense_propagation() {
    for (n, big_n, ell, t) in [(2usize, 8usize, 1i64, 0.25), (2, 4, 0, 0.5), (4, 8, -4, 0.125), (4, 16, 3, 0.0625)] {
        let lib = proxy_mode_variance(n, big_n, ell, t, C).unwrap();
        let oracle = brute_proxy_variance(n, big_n, ell, t);
        assert!(rel(lib, oracle) < 1e-10, "n={n} N={big_n} ell={ell}: {lib} vs {oracle}");
    }
}

#[test]
fn proxy_converges_to_exact_at_rate_one_over_reference() {
    let exact = exact_mode_variance(16, 1, 0.25, C).unwrap().value;
    let gaps: Vec<f64> = [256usize, 512, 1024, 2048, 4096]
        .iter()
        .map(|&big| proxy_mode_variance(16, big, 1, 0.25, C).unwrap() / exact - 1.0)
        .collect();
    for pair in gaps.windows(2) {
        assert!(pair[0] < 0.0 && pair[1] < 0.0);
        let factor = pair[0] / pair[1];
        assert!((1.9..2.1).contains(&factor), "{gaps:?}");
    }
    assert!((gaps[0] + 0.0642).abs() < 0.001, "{}", gaps[0]);
}

#[test]
fn both_monte_carlo_routes_hit_the_proxy() {
    let coarse = GridSpec::new(4, C).unwrap();
    let fine = GridSpec::new(16, C).unwrap();
    let target = proxy_mode_variance(4, 16, 1, 0.25, C).unwrap();
    let full = coupled_mode_variance(&coarse, &fine, 1, 0.25, 4000, 1_000).unwrap();
    let reduced = mode_reduced_variance(&coarse, &fine, 1, 0.25, 20_000, 17).unwrap();
    assert!(full.z_score(target) < 3.0, "full grid z = {}", full.z_score(target));
    assert!(reduced.z_score(target) < 3.0, "mode reduced z = {}", reduced.z_score(target));
    let gap = (full.mean - reduced.mean).abs() / (full.stderr.hypot(reduced.stderr));
    assert!(gap < 3.0);
}

#[test]
fn mode_reduced_sampler_handles_self_conjugate_modes() {
    let coarse = GridSpec::new(4, C).unwrap();
    let fine = GridSpec::new(16, C).unwrap();
    for ell in [0i64, -4, 2] {
        let target = proxy_mode_variance(4, 16, ell, 0.5, C).unwrap();
        let est = mode_reduced_variance(&coarse, &fine, ell, 0.5, 20_000, 5).unwrap();
        assert!(est.z_score(target) < 3.0, "ell={ell} z={}", est.z_score(target));
    }
    assert!(mode_reduced_variance(&coarse, &fine, 4, 0.5, 100, 5).is_err());
    assert!(mode_reduced_variance(&coarse, &fine, 1, 0.5, 1, 5).is_err());
}

#[test]
fn kolmogorov_bound_examples() {
    let bank = FilterBank::new(16, 0.05).unwrap();
    let mut a = vec![0.0; 32];
    assert_eq!(kolmogorov_bound(&a, -0.4, 64.0, &bank).unwrap(), 0.0);
    a[16] = 1.0;
    // block 0 alone carries weight 2^0 = 1
    for (alpha, q) in [(-0.4, 64.0), (0.2, 3.0), (-0.45, 256.0)] {
        assert!((kolmogorov_bound(&a, alpha, q, &bank).unwrap() - 1.0).abs() < 1e-14);
    }
    // direct evaluation of the block sum for a spread of variances
    let vars = mode_variances(16, 1.0, C).unwrap();
    let (alpha, q) = (-0.4, 4.0);
    let mut sum = 0.0;
    for j in 0..bank.block_count() {
        let inner: f64 = (-16..16)
            .map(|k| (2f64.powf(alpha * j as f64) * bank.weight(j, k)).powi(2) * vars[(k + 16) as usize])
            .sum();
        sum += 2f64.powi(j as i32) * inner.powf(q / 2.0);
    }
    let want = sum.powf(1.0 / q);
    assert!(rel(kolmogorov_bound(&vars, alpha, q, &bank).unwrap(), want) < 1e-12);
}

#[test]
fn lower_bound_scan_examples() {
    let scan = lower_bound_scan(&[16, 32, 64, 128], 0.25, C).unwrap();
    for pair in scan.windows(2) {
        let a1 = pair[0].1 / (pair[0].0 * pair[0].0) as f64;
        let a2 = pair[1].1 / (pair[1].0 * pair[1].0) as f64;
        assert!((3.6..4.4).contains(&(a1 / a2)), "{scan:?}");
    }
    let zeros = lower_bound_scan(&[8, 16], 0.0, C).unwrap();
    assert!(zeros.iter().all(|(_, v)| *v == 0.0));
}

#[test]
fn perturbed_power_law_fit() {
    // deterministic ±1% perturbation
    let pts: Vec<(f64, f64)> = [16.0f64, 32.0, 64.0, 128.0, 256.0]
        .iter()
        .enumerate()
        .map(|(i, &n)| (n, 3.0 * n.powf(-0.75) * (1.0 + 0.01 * if i % 2 == 0 { 1.0 } else { -1.0 })))
        .collect();
    let f = rate_fit(&pts).unwrap();
    assert!((f.slope + 0.75).abs() < 0.02);
    assert!(f.r_squared > 0.99);
}

#[test]
fn deterministic_error_decays_like_one_over_n() {
    let psi = TrigPolynomial::new(
        -1,
        vec![Complex64::new(0.0, 0.5), Complex64::new(0.0, 0.0), Complex64::new(0.0, -0.5)],
    );
    let pts: Vec<(f64, f64)> = [16usize, 32, 64, 128, 256]
        .iter()
        .map(|&n| {
            let g = GridSpec::new(n, C).unwrap();
            let p = heat_kernel_error_probe(&g, 1.0, 0.25, &psi).unwrap();
            (n as f64, p.point_error)
        })
        .collect();
    assert!(rate_fit(&pts).unwrap().slope <= -0.9);
}

#[test]
fn error_norms_are_monotone_in_theta() {
    let levels = [GridSpec::new(8, C).unwrap(), GridSpec::new(16, C).unwrap(), GridSpec::new(64, C).unwrap()];
    let opts = SolveOptions {
        checkpoints: vec![0.25, 0.5],
        ..SolveOptions::default()
    };
    let records = coupled_solve(&levels, &Problem::allen_cahn(), 3, &opts).unwrap();
    let thetas = [-0.45, -0.4, -0.2, 0.0];
    let samples = measure_errors(&records[2], &records[..2], &thetas, 0.05).unwrap();
    assert_eq!(samples.len(), 2 * 2 * 5);
    for chunk in samples.chunks(5) {
        assert_eq!(chunk[0].norm, ErrorNorm::Sup);
        for pair in chunk[1..].windows(2) {
            assert!(pair[0].value <= pair[1].value * (1.0 + 1e-12));
        }
    }
    let report = ErrorReport::build(&samples, &collect_monitors(&records), &opts.checkpoints, &[]).unwrap();
    assert_eq!(report.levels, vec![8, 16]);
    assert!(report.fits.is_empty());
    assert_eq!(report.norms["linf"].len(), 2);
    assert_eq!(report.apriori.len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mode_variances_are_even_in_ell(e in 2u32..7, frac in 0.0f64..1.0, k in 1u64..64) {
        let n = 1usize << e;
        let ell = 1 + ((n - 2) as f64 * frac) as i64;
        let g = GridSpec::new(n, C).unwrap();
        let t = g.time_of(k);
        let a = exact_mode_variance(n, ell, t, C).unwrap().value;
        let b = exact_mode_variance(n, -ell, t, C).unwrap().value;
        prop_assert!(rel(a, b) < 1e-12);
    }

    #[test]
    fn kolmogorov_bound_is_homogeneous(scale in 0.01f64..100.0, q in 1.0f64..200.0) {
        let bank = FilterBank::new(16, 0.05).unwrap();
        let vars = mode_variances(16, 0.5, C).unwrap();
        let scaled: Vec<f64> = vars.iter().map(|v| v * scale * scale).collect();
        let a = kolmogorov_bound(&vars, -0.3, q, &bank).unwrap();
        let b = kolmogorov_bound(&scaled, -0.3, q, &bank).unwrap();
        prop_assert!(rel(b, scale * a) < 1e-10);
    }
}
