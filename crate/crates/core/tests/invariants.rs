//! Cross-module consistency checks that exercise the public API end to end.

use cvqkd::channel::{
    eve_average_state, outcome_density, posterior, propagate, ChannelEnsemble, ChannelParams,
};
use cvqkd::constellation::{overlap_matrix, Constellation};
use cvqkd::fock::{partial_trace_pure, von_neumann_entropy, CMatrix, DensityMatrix, FockCutoff, C64};
use cvqkd::rates::{rate_rr, QuadratureGrid, RateOptions};

#[test]
fn conditional_states_integrate_to_the_average_state() {
    // Law of total probability: \int p(b) rho_{E'e|b} d^2 b = rho_Eve. The
    // integrand is not rotation invariant, so the grid covers the full circle.
    let c = Constellation::new(0.3, 4).unwrap();
    let ch = ChannelParams::new(0.7, 0.05).unwrap();
    let cutoff = FockCutoff::with_dim(8).unwrap();
    let ensemble = ChannelEnsemble::new(&c, &ch, &cutoff).unwrap();

    let r_max = ch.tau().sqrt() * c.z() + 6.0 * ch.heterodyne_variance().sqrt();
    let grid = QuadratureGrid::new(48, 64, 1, r_max);

    let d2 = 64;
    let mut integral = CMatrix::zeros(d2, d2);
    let prior_over_pi = c.prior() / std::f64::consts::PI;
    for (b, w) in grid.nodes() {
        // p(b) rho_{E'e|b} = sum_k (p_k / pi) v_k v_k^dag, no normalisation needed.
        for ket in ensemble.projected_kets(b) {
            let scale = C64::from(w * prior_over_pi);
            for i in 0..d2 {
                for j in 0..d2 {
                    integral[(i, j)] += scale * ket[i] * ket[j].conj();
                }
            }
        }
    }

    let avg = eve_average_state(&c, &ch, &cutoff).unwrap();
    let mut worst = 0.0f64;
    for i in 0..d2 {
        for j in 0..d2 {
            worst = worst.max((integral[(i, j)] - avg.matrix()[(i, j)]).norm());
        }
    }
    assert!(worst < 1e-5, "worst elementwise deviation {worst:.3e}");
}

#[test]
fn schmidt_duality_on_channel_outputs() {
    // For the pure tripartite output, S(rho_B) = S(rho_{E'e}).
    let c = Constellation::new(0.6, 4).unwrap();
    let ch = ChannelParams::new(0.45, 0.12).unwrap();
    let cutoff = FockCutoff::with_dim(12).unwrap();
    let out = propagate(&c, 1, &ch, &cutoff).unwrap();
    let s_b = von_neumann_entropy(&partial_trace_pure(out.state(), &[0]).unwrap()).unwrap();
    let s_ee = von_neumann_entropy(&partial_trace_pure(out.state(), &[1, 2]).unwrap()).unwrap();
    assert!((s_b - s_ee).abs() < 1e-8, "{s_b} vs {s_ee}");
    // And the reduction preserves the trace.
    let rho = partial_trace_pure(out.state(), &[1, 2]).unwrap();
    assert!((rho.trace().re - 1.0).abs() < 1e-12);
}

#[test]
fn rates_identical_across_thread_counts() {
    let c = Constellation::new(0.4, 4).unwrap();
    let ch = ChannelParams::new(0.6, 0.03).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| rate_rr(&c, &ch, &RateOptions::default()).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.rate.to_bits(), b.rate.to_bits());
    assert_eq!(a.i_ab.to_bits(), b.i_ab.to_bits());
    assert_eq!(a.holevo.to_bits(), b.holevo.to_bits());
}

#[test]
fn strict_paper_mode_overestimates_exact_mode() {
    // Mixing unconditioned per-letter states discards the measurement
    // back-action, so the strict-paper conditional entropies (and hence the
    // rate) can only be larger.
    let c = Constellation::new(0.5, 4).unwrap();
    let ch = ChannelParams::new(0.5, 0.05).unwrap();
    let exact = rate_rr(
        &c,
        &ch,
        &RateOptions {
            guard: false,
            ..RateOptions::default()
        },
    )
    .unwrap();
    let strict = rate_rr(
        &c,
        &ch,
        &RateOptions {
            guard: false,
            mode: cvqkd::channel::ConditioningMode::StrictPaper,
            ..RateOptions::default()
        },
    )
    .unwrap();
    assert!(strict.rate >= exact.rate - 1e-12, "{} < {}", strict.rate, exact.rate);
}

#[test]
fn density_matrix_mixture_is_valid_state() {
    let c = Constellation::new(0.4, 5).unwrap();
    let cutoff = FockCutoff::with_dim(10).unwrap();
    let kets: Vec<_> = (0..5)
        .map(|k| {
            cvqkd::fock::coherent_vector(c.amplitude(k), &cutoff)
                .unwrap()
                .0
                .amplitudes()
                .clone()
        })
        .collect();
    let rho = DensityMatrix::from_mixture(&[0.2; 5], &kets, vec![10]).unwrap();
    assert!(rho.hermiticity_error() < 1e-15);
    assert!((rho.trace().re - 1.0).abs() < 1e-12);
    assert!(von_neumann_entropy(&rho).unwrap() >= 0.0);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn posterior_is_normalised_and_rotation_covariant(
            re in -3.0f64..3.0,
            im in -3.0f64..3.0,
            z in 0.05f64..1.5,
            tau in 0.05f64..1.0,
            nbar in 0.0f64..0.3,
        ) {
            let c = Constellation::new(z, 4).unwrap();
            let ch = ChannelParams::new(tau, nbar).unwrap();
            let b = C64::new(re, im);
            let p = posterior(b, &c, &ch);
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));

            // Rotating the outcome by 2 pi / N permutes the letters.
            let rot = C64::from_polar(1.0, std::f64::consts::PI / 2.0);
            let q = posterior(b * rot, &c, &ch);
            for k in 0..4 {
                prop_assert!((p[k] - q[(k + 1) % 4]).abs() < 1e-9);
            }
            prop_assert!(
                (outcome_density(b, &c, &ch) - outcome_density(b * rot, &c, &ch)).abs() < 1e-12
            );
        }

        #[test]
        fn gram_matrices_are_circulant_with_unit_diagonal(
            z in 0.0f64..2.5,
            n in 2usize..8,
            scale in 0.0f64..1.0,
        ) {
            let c = Constellation::new(z, n).unwrap();
            let v = overlap_matrix(&c, scale);
            for i in 0..n {
                prop_assert!((v.matrix()[(i, i)] - C64::from(1.0)).norm() < 1e-14);
                for j in 0..n {
                    let shifted = v.matrix()[(0, (j + n - i) % n)];
                    prop_assert!((v.matrix()[(i, j)] - shifted).norm() < 1e-12);
                }
            }
        }
    }
}
