//! Property tests for the invariants each module promises.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use xlmimo_isac::beamform::{
    lift_covariance, reduced_scnr, scnr, spectral_efficiency, spectral_efficiency_cov,
    verify_covariance_subspace,
};
use xlmimo_isac::channel::{build_comm_channel, sensing_response, simulate_echoes, PathSpec};
use xlmimo_isac::config::{db_to_linear, linear_to_db};
use xlmimo_isac::geometry::{
    build_geometry, inter_subarray_phase, steering_vector, subarray_angle,
};
use xlmimo_isac::harness::scenario::{run_scenario, Algorithm, Prepared};
use xlmimo_isac::linalg::{self, eigh_desc, real, trace_re, CMat};
use xlmimo_isac::manifold::{
    assemble_wbb, reduce_b, stiefel_retract, tangent_project, waterfill, ManifoldState,
};
use xlmimo_isac::music::{music_spectrum, noise_subspace, Grid};
use xlmimo_isac::sdr::{sdr_rrs, solve_maxdet, SdpStatus, SdrConfig, SdrStatus};
use xlmimo_isac::{Layout, PolarPoint, ScenarioConfig, Side};

const UNIT_TOL: f64 = 1e-12;

fn desk(seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::desk_default();
    c.seed = seed;
    c
}

fn prepared(seed: u64) -> Prepared {
    Prepared::new(&desk(seed)).expect("desk scenario prepares")
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn layout() -> impl Strategy<Value = Layout> {
    prop_oneof![
        Just(Layout::Uniform),
        Just(Layout::Collocated),
        Just(Layout::Random)
    ]
}

fn location() -> impl Strategy<Value = PolarPoint> {
    (2.0..200.0f64, -1.4..1.4f64).prop_map(|(r, theta)| PolarPoint { r, theta })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn receive_array_mirrors_transmit_array(
        k in 1usize..7, m in 1usize..9, layout in layout(), seed in any::<u64>()
    ) {
        let mut c = desk(seed);
        c.subarrays = k;
        c.antennas_per_subarray = m;
        c.layout = layout;
        let g = build_geometry(&c).unwrap();
        for (tx, rx) in g.tx_positions.iter().zip(&g.rx_positions) {
            for (a, b) in tx.iter().zip(rx) {
                prop_assert_eq!((a.x, a.y), (-b.x, -b.y));
            }
        }
    }

    #[test]
    fn steering_entries_have_unit_modulus(
        m in 1usize..64, angle in -1.6..1.6f64, d in 1e-3..1.0f64, lambda in 1e-3..1.0f64
    ) {
        for v in steering_vector(m, angle, d, lambda).iter() {
            prop_assert!((v.norm() - 1.0).abs() < UNIT_TOL);
        }
    }

    #[test]
    fn inter_subarray_phase_matches_distances(k in 1usize..7, p in location()) {
        let mut c = desk(0);
        c.subarrays = k;
        let g = build_geometry(&c).unwrap();
        let nu = inter_subarray_phase(&g, Side::Tx, p).unwrap();
        let target = p.to_cartesian();
        for (i, v) in nu.iter().enumerate() {
            let r = &g.tx_positions[i][0];
            let dist = ((target.x - r.x).powi(2) + (target.y - r.y).powi(2)).sqrt();
            let expect = linalg::cis(-2.0 * std::f64::consts::PI / g.lambda * dist);
            prop_assert!((v - expect).norm() < 1e-9);
            prop_assert!((v.norm() - 1.0).abs() < UNIT_TOL);
        }
    }

    #[test]
    fn subarray_angle_grows_with_x(y in 5.0..100.0f64, k in 0usize..4) {
        let g = build_geometry(&desk(0)).unwrap();
        let mut last = f64::NEG_INFINITY;
        for i in -40..=40 {
            let x = i as f64 * 2.0;
            let p = xlmimo_isac::Point2::new(x, y).to_polar();
            let a = subarray_angle(&g, Side::Tx, k, p).unwrap();
            prop_assert!(a > last);
            last = a;
        }
    }

    #[test]
    fn sensing_responses_have_unit_modulus(p in location(), k in 1usize..7) {
        let mut c = desk(0);
        c.subarrays = k;
        let g = build_geometry(&c).unwrap();
        let o = sensing_response(&g, p).unwrap();
        for v in o.g_t.iter().chain(o.g_r.iter()) {
            prop_assert!((v.norm() - 1.0).abs() < UNIT_TOL);
        }
    }

    #[test]
    fn channel_blocks_are_local(seed in 0u64..1000, j in 0usize..4, shift in 0.01..1.0f64) {
        let prep = prepared(seed);
        let m = prep.config.antennas_per_subarray;
        let mut paths: Vec<PathSpec> = prep.comm.paths.clone();
        for p in &mut paths {
            p.aod[j] += shift;
            p.aoa[j] -= shift;
            p.gain_magnitude[j] *= 1.0 + shift;
            p.distances[j] += shift;
        }
        let h = build_comm_channel(&prep.geometry, paths, prep.config.user_antennas).unwrap().h;
        for k in (0..prep.config.subarrays).filter(|&k| k != j) {
            prop_assert_eq!(h.columns(k * m, m), prep.comm.h.columns(k * m, m));
        }
        prop_assert_ne!(h.columns(j * m, m), prep.comm.h.columns(j * m, m));
    }

    #[test]
    fn tangent_directions_are_tangent(n in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = linalg::random_unitary(n, &mut rng);
        let g = linalg::complex_normal_matrix(n, n, &mut rng);
        let xi = tangent_project(&v, &g).unwrap();
        let a = v.adjoint() * &xi;
        prop_assert!((&a + a.adjoint()).norm() < 1e-10 * (1.0 + g.norm()));
    }

    #[test]
    fn retraction_is_unitary(n in 1usize..6, seed in any::<u64>(), step in 0.0..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = linalg::random_unitary(n, &mut rng);
        let xi = linalg::complex_normal_matrix(n, n, &mut rng) * real(step);
        let q = stiefel_retract(&(v + xi)).unwrap();
        prop_assert!(linalg::unitarity_error(&q) < 1e-10);
    }

    #[test]
    fn waterfilling_spends_the_budget(
        gains in prop::collection::vec(0.0..100.0f64, 1..8), budget in 1e-3..10.0f64
    ) {
        prop_assume!(gains.iter().any(|&g| g > 1e-6));
        let x = waterfill(&gains, budget);
        prop_assert!(x.iter().all(|&v| v >= 0.0));
        prop_assert!(rel_diff(x.iter().sum::<f64>(), budget) < 1e-10);
        // Active channels share one water level.
        let levels: Vec<f64> = x
            .iter()
            .zip(&gains)
            .filter(|(&v, _)| v > 0.0)
            .map(|(&v, &g)| v + 1.0 / g)
            .collect();
        for l in &levels {
            prop_assert!(rel_diff(*l, levels[0]) < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn echoes_are_linear_in_the_waveform(seed in any::<u64>(), l in 1usize..6) {
        let prep = prepared(seed % 50);
        let n = prep.geometry.total_antennas();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x1 = linalg::complex_normal_matrix(n, l, &mut rng);
        let x2 = linalg::complex_normal_matrix(n, l, &mut rng);
        let echo = |x: &CMat| {
            let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0xec40);
            simulate_echoes(&prep.responses, &prep.scene, x, prep.config.sigma_s_sq, &mut r).unwrap()
        };
        let zero = CMat::zeros(n, l);
        let lhs = echo(&(&x1 + &x2));
        let rhs = echo(&x1) + echo(&x2) - echo(&zero);
        prop_assert!((&lhs - &rhs).norm() <= 1e-10 * lhs.norm());
    }

    #[test]
    fn reduced_metrics_match_full_ones(seed in 0u64..200, draw in any::<u64>()) {
        let prep = prepared(seed);
        let c = &prep.config;
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let w_bb = linalg::complex_normal_matrix(prep.basis.u_tilde.ncols(), prep.streams, &mut rng);
        let r_x = lift_covariance(&prep.basis.u_tilde, &(&w_bb * w_bb.adjoint()));

        let se_reduced = spectral_efficiency(&prep.comm.h, &prep.basis.u_tilde, &w_bb, c.sigma_c_sq).unwrap();
        let se_full = spectral_efficiency_cov(&prep.comm.h, &r_x, c.sigma_c_sq).unwrap();
        prop_assert!(rel_diff(se_reduced, se_full) < 1e-8);

        let s_reduced = reduced_scnr(&w_bb, &prep.phi, &prep.scene, &prep.w_fixed, c.sigma_s_sq);
        let s_full = scnr(&prep.w_fixed, &prep.responses, &prep.scene, &r_x, c.sigma_s_sq).unwrap();
        prop_assert!(rel_diff(s_reduced, s_full) < 1e-8);
    }

    #[test]
    fn subspace_check_ignores_the_basis_choice(seed in 0u64..200, draw in any::<u64>()) {
        let prep = prepared(seed);
        let u = &prep.basis.u_tilde;
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let g = linalg::complex_normal_matrix(u.ncols(), 3, &mut rng);
        let inside = lift_covariance(u, &(&g * g.adjoint()));
        let q = linalg::random_unitary(u.ncols(), &mut rng);
        let rotated = u * q;
        let a = verify_covariance_subspace(&inside, u);
        let b = verify_covariance_subspace(&inside, &rotated);
        prop_assert!(a < 1e-10 && b < 1e-10);

        let n = u.nrows();
        let h = linalg::complex_normal_matrix(n, 2, &mut rng);
        let outside = &inside + &h * h.adjoint();
        let (a, b) = (
            verify_covariance_subspace(&outside, u),
            verify_covariance_subspace(&outside, &rotated),
        );
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn digital_beamformer_diagonalizes_b(seed in 0u64..200, draw in any::<u64>()) {
        let prep = prepared(seed);
        let eig = reduce_b(
            &prep.basis.u_tilde,
            &prep.comm.h,
            prep.config.sigma_c_sq,
            prep.streams,
            prep.budget,
            &prep.sensing,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let ns = eig.streams();
        let v = linalg::random_unitary(ns, &mut rng);
        let b: Vec<f64> = (0..ns).map(|i| 0.1 + (i as f64 + draw as f64 % 7.0).sin().abs()).collect();
        let mut state = ManifoldState::new(v, b.clone(), eig.null_dim());
        state.z = linalg::complex_normal_matrix(eig.null_dim(), ns, &mut rng);
        let w = assemble_wbb(&eig, &state);
        let d = w.adjoint() * &eig.b * &w;
        // Eigenvector rounding is amplified by `1/√σ` in the coordinates, so
        // the bound carries the condition number of the kept eigenvalues.
        let kappa = eig.sigma_b[0] / eig.sigma_b[ns - 1];
        let tol = (1e-8 + 64.0 * f64::EPSILON * kappa) * d.norm();
        let mut off = d.clone();
        for i in 0..ns {
            off[(i, i)] = real(0.0);
            prop_assert!((d[(i, i)].re - b[i] * b[i]).abs() < tol);
        }
        prop_assert!(off.norm() < tol, "off-diagonal {:e}, bound {tol:e}", off.norm());
    }

    #[test]
    fn music_ignores_the_noise_basis_rotation(seed in any::<u64>()) {
        let prep = prepared(seed % 20);
        let n = prep.geometry.total_antennas();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = linalg::complex_normal_matrix(n, n + 4, &mut rng);
        let cov = linalg::hermitian_part(&(&a * a.adjoint()));
        let e = noise_subspace(&cov, 3).unwrap();
        let u = linalg::random_unitary(e.ncols(), &mut rng);
        let grid = Grid::parse("5:2.5:25,10:2.5:30").unwrap();
        let p1 = music_spectrum(&e, &prep.geometry, &grid).unwrap();
        let p2 = music_spectrum(&(&e * u), &prep.geometry, &grid).unwrap();
        prop_assert_eq!(p1.peak_index, p2.peak_index);
        for (x, y) in p1.spectrum.iter().zip(&p2.spectrum) {
            prop_assert!((0.0..=1.0).contains(x));
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn manifold_output_is_feasible(seed in 0u64..500) {
        let row = run_scenario(&desk(seed), Algorithm::RmJgd);
        prop_assume!(row.is_ok());
        prop_assert!(row.power_proxy <= row.streams as f64 * (1.0 + 1e-9), "proxy {}", row.power_proxy);
        prop_assert!(row.scnr_fixed_db > linear_to_db(desk(seed).scnr_threshold));
    }
}

proptest! {
    // One or two interior-point solves per case.
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn relaxation_is_feasible_and_grows_with_budget(seed in 0u64..500) {
        let prep = prepared(seed);
        let problem = prep.problem();
        let sol = solve_maxdet(&problem, 1e-7, 500).unwrap();
        prop_assert_eq!(&sol.status, &SdpStatus::Optimal);
        let r = &sol.r_bb;
        let scale = trace_re(r).max(1.0);
        let (vals, _) = eigh_desc(r);
        prop_assert!(*vals.last().unwrap() >= -1e-8 * scale);
        prop_assert!(trace_re(r) <= problem.power_budget + 1e-8);
        let sensing = trace_re(&(r * &problem.sensing.psi));
        prop_assert!(sensing >= problem.sensing.gamma_0 - 1e-8 * problem.sensing.gamma_0.max(1.0));

        let mut doubled = problem.clone();
        doubled.power_budget *= 2.0;
        let bigger = solve_maxdet(&doubled, 1e-7, 500).unwrap();
        prop_assert!(bigger.objective_bits >= sol.objective_bits - 1e-7);
    }

    #[test]
    fn randomized_beamformer_is_tight_and_below_the_relaxation(seed in 0u64..500) {
        let prep = prepared(seed);
        let problem = prep.problem();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = sdr_rrs(&problem, &SdrConfig::default(), &mut rng).unwrap();
        prop_assume!(out.status == SdrStatus::Ok);
        let w = out.w_bb.unwrap();
        prop_assert!(rel_diff(linalg::frob2(&w), problem.power_budget) < 1e-8);
        prop_assert!(out.se_bits <= out.solution.objective_bits + 1e-7);
    }

    #[test]
    fn unreachable_sensing_is_reported(seed in 0u64..500, excess in 1.01..100.0f64) {
        let prep = prepared(seed);
        let mut problem = prep.problem();
        let (vals, _) = eigh_desc(&problem.sensing.psi);
        problem.sensing.gamma_0 = excess * problem.power_budget * vals[0].max(1e-30);
        let sol = solve_maxdet(&problem, 1e-7, 500).unwrap();
        let infeasible = matches!(sol.status, SdpStatus::Infeasible { .. });
        prop_assert!(infeasible);
    }
}

#[test]
fn threshold_conversion_round_trips() {
    for db in [-10.0, 0.0, 3.0, 10.0, 25.0] {
        assert!((linear_to_db(db_to_linear(db)) - db).abs() < 1e-12);
    }
}
