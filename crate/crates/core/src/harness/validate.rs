//! The invariant suite behind `xlmimo validate`.
//!
//! Each check runs at desk scale and records pass/fail, a one-line detail
//! and its wall time. The oracle helpers are public so integration tests
//! can reuse them with their own tolerances.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{evaluate, run_scenario, Algorithm, Prepared, RunOptions};
use super::sweep::{sweep_with, ExperimentSpec};
use crate::beamform::{lift_covariance, scnr, spectral_efficiency_cov, verify_covariance_subspace};
use crate::channel::{build_comm_channel, draw_paths, numerical_rank, rank_bounds, RANK_TOL};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::build_geometry;
use crate::linalg::{self, real, CMat, CVec};
use crate::manifold::{
    barrier_value, grad_b, grad_v, grad_z, phase1_feasible, reduce_b, rm_jgd, waterfill, EigB,
    ManifoldConfig, ManifoldState,
};
use crate::music::{music_spectrum, noise_subspace, sample_covariance, simulate_block, Grid};
use crate::sdr::{solve_maxdet, MaxDetProblem, SdpStatus};

/// Deliberate defects for exercising the suite itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negate the analytic `V` gradient inside the finite-difference check.
    FlipGradV,
}

#[derive(Debug, Clone, Default)]
pub struct ValidateOptions {
    /// Fewer instances and no full-space solve.
    pub quick: bool,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<CheckOutcome>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["check", "passed", "wall_ms", "detail"])?;
        for c in &self.checks {
            w.write_record([
                c.name.to_string(),
                c.passed.to_string(),
                format!("{:.1}", c.wall_ms),
                c.detail.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut total = 0.0;
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            writeln!(
                f,
                "{mark}  {:<24} {:>9.1} ms  {}",
                c.name, c.wall_ms, c.detail
            )?;
            total += c.wall_ms;
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        write!(
            f,
            "{passed}/{} checks passed in {:.1} s",
            self.checks.len(),
            total / 1e3
        )
    }
}

type CheckFn = fn(&ValidateOptions) -> Result<(bool, String)>;

const CHECKS: [(&str, CheckFn, bool); 13] = [
    ("geometry", check_geometry, true),
    ("rank_bounds", check_rank_bounds, true),
    ("waterfilling", check_waterfilling, true),
    ("gradients", check_gradients, true),
    ("mvdr_argmax", check_mvdr, true),
    ("scnr_refresh", check_scnr_refresh, true),
    ("fdb_dominance", check_dominance, true),
    ("rm_monotone", check_monotone, true),
    ("full_space_subspace", check_full_space, false),
    ("music_rotation", check_music_rotation, true),
    ("music_peak", check_music_peak, true),
    ("determinism", check_determinism, true),
    ("sweep_rows", check_sweep_rows, true),
];

/// Runs the suite. Errors inside a check count as failures.
pub fn validate(options: &ValidateOptions) -> Report {
    let mut report = Report::default();
    for (name, check, in_quick) in CHECKS {
        if options.quick && !in_quick {
            continue;
        }
        let start = Instant::now();
        let (passed, detail) = match check(options) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        report.checks.push(CheckOutcome {
            name,
            passed,
            detail,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    report
}

fn desk(seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::desk_default();
    c.seed = seed;
    c
}

fn count(options: &ValidateOptions, quick: usize, full: usize) -> usize {
    if options.quick {
        quick
    } else {
        full
    }
}

fn check_geometry(_: &ValidateOptions) -> Result<(bool, String)> {
    let c = desk(0);
    let g = build_geometry(&c)?;
    let d = c.element_spacing();
    let mut worst: f64 = 0.0;
    for k in 0..c.subarrays {
        for m in 0..c.antennas_per_subarray {
            let x = c.half_separation + (k as f64 * c.spacing_factor + m as f64) * d;
            worst = worst.max((g.tx_positions[k][m].x - x).abs());
            worst = worst.max((g.rx_positions[k][m].x + x).abs());
        }
    }
    let mut bad = c.clone();
    bad.spacing_factor = c.antennas_per_subarray as f64 - 1.0;
    let rejected = matches!(bad.validate(), Err(Error::Config { .. }));
    let resp = crate::channel::sensing_response(&g, c.target.location)?;
    let modulus = resp
        .g_t
        .iter()
        .chain(resp.g_r.iter())
        .map(|z| (z.norm() - 1.0).abs());
    let modulus = modulus.fold(0.0, f64::max);
    let ok = worst < 1e-12 && rejected && modulus < 1e-12;
    Ok((
        ok,
        format!("position err {worst:.1e}, Γ<M rejected: {rejected}, |g|-1 {modulus:.1e}"),
    ))
}

/// `(rank, lower, upper)` of the channel drawn for `config`.
pub fn channel_rank(config: &ScenarioConfig) -> Result<(usize, usize, usize)> {
    let g = build_geometry(config)?;
    let mut rng = super::scenario::seeded(config.seed, super::scenario::stream::PATHS);
    let paths = draw_paths(config, &g, &mut rng)?;
    let comm = build_comm_channel(&g, paths, config.user_antennas)?;
    let (lo, hi) = rank_bounds(config.paths, config.user_antennas, config.subarrays);
    Ok((numerical_rank(&comm.h, RANK_TOL), lo, hi))
}

fn check_rank_bounds(options: &ValidateOptions) -> Result<(bool, String)> {
    let n = count(options, 20, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    for i in 0..n {
        let mut c = desk(i as u64);
        c.subarrays = rng.random_range(1..=5);
        c.paths = rng.random_range(1..=4);
        c.user_antennas = rng.random_range(1..=6);
        let (r, lo, hi) = channel_rank(&c)?;
        if r < lo || r > hi {
            violations += 1;
        }
    }
    Ok((
        violations == 0,
        format!("{n} geometries, {violations} outside the bounds"),
    ))
}

/// Closed-form capacity of `H Ũ` under `tr(R) ≤ budget`, bits.
pub fn waterfilling_bits(prep: &Prepared) -> f64 {
    let h = &prep.comm.h * &prep.basis.u_tilde;
    let gains: Vec<f64> = linalg::singular_values(&h)
        .iter()
        .map(|s| s * s / prep.config.sigma_c_sq)
        .filter(|g| *g > 0.0)
        .collect();
    let p = waterfill(&gains, prep.budget);
    gains
        .iter()
        .zip(&p)
        .map(|(g, p)| (g * p).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2
}

fn check_waterfilling(options: &ValidateOptions) -> Result<(bool, String)> {
    let n = count(options, 3, 10);
    let mut worst: f64 = 0.0;
    for seed in 0..n as u64 {
        let mut c = desk(seed);
        c.scnr_threshold = 0.0;
        let prep = Prepared::new(&c)?;
        let row = evaluate(&prep, Algorithm::Fdb, &RunOptions::default());
        worst = worst.max((row.se_bits - waterfilling_bits(&prep)).abs());
    }
    Ok((
        worst < 1e-3,
        format!("{n} channels, max |fdb − waterfilling| {worst:.2e} bits"),
    ))
}

/// Relative errors `‖g − g_fd‖/‖g‖` of the three analytic gradients
/// against central differences over every real coordinate.
#[derive(Debug, Clone, Copy)]
pub struct GradientErrors {
    pub v: f64,
    pub b: f64,
    pub z: f64,
}

impl GradientErrors {
    pub fn max(&self) -> f64 {
        self.v.max(self.b).max(self.z)
    }
}

/// Central difference with one Richardson step, `O(h⁴)`.
fn central(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let d = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

fn matrix_fd(m: &CMat, h: f64, eval: impl Fn(&CMat) -> f64) -> CMat {
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    for idx in 0..m.len() {
        for unit in [real(1.0), linalg::cis(std::f64::consts::FRAC_PI_2)] {
            let d = central(
                |s| {
                    let mut p = m.clone();
                    p[idx] += unit * s;
                    eval(&p)
                },
                h,
            );
            // `⟨G, E⟩ = Re(conj(G_ij)·e)` recovers G_ij from the two units.
            out[idx] += unit * d;
        }
    }
    out
}

/// NaN (a difference that left the feasible set) reads as infinite.
fn rel(a: &CMat, b: &CMat) -> f64 {
    let e = (a - b).norm() / a.norm().max(1e-300);
    if e.is_nan() {
        f64::INFINITY
    } else {
        e
    }
}

/// Steps tried by [`ladder`]; deep enough for points a hair inside a constraint.
const LADDER_RUNGS: i32 = 8;

/// Runs `estimate` on a ladder of steps `h, h/10, …` and keeps the finer
/// of the two neighbouring estimates that agree best. Near a constraint the
/// barrier is stiff and no single step suits every point; the choice never
/// consults the analytic gradient.
fn ladder(h: f64, estimate: impl Fn(f64) -> CMat) -> CMat {
    let runs: Vec<CMat> = (0..LADDER_RUNGS)
        .map(|k| estimate(h * 10f64.powi(-k)))
        .collect();
    let mut best = (f64::INFINITY, runs.len() - 1);
    for k in 0..runs.len() - 1 {
        // NaN pairs (a step that left the feasible set) never win.
        let d = (&runs[k] - &runs[k + 1]).norm();
        if d < best.0 {
            best = (d, k + 1);
        }
    }
    runs[best.1].clone()
}

pub fn gradient_errors(
    eig: &EigB,
    state: &ManifoldState,
    t: f64,
    fault: Option<Fault>,
) -> Result<GradientErrors> {
    let f = |s: &ManifoldState| barrier_value(s, eig, t);
    let scale = |m: &CMat| 1e-4 * m.norm().max(1.0) / (m.len() as f64).sqrt();

    let mut gv = grad_v(state, eig, t)?;
    if fault == Some(Fault::FlipGradV) {
        gv = -gv;
    }
    let fd_v = ladder(scale(&state.v), |h| {
        matrix_fd(&state.v, h, |v| {
            f(&ManifoldState {
                v: v.clone(),
                ..state.clone()
            })
        })
    });

    let gb = CMat::from_iterator(
        state.b.len(),
        1,
        grad_b(state, eig, t)?.into_iter().map(real),
    );
    let fd_b = ladder(1e-2, |h| {
        CMat::from_iterator(
            state.b.len(),
            1,
            (0..state.b.len()).map(|i| {
                let d = central(
                    |s| {
                        let mut b = state.b.clone();
                        b[i] += s;
                        f(&ManifoldState { b, ..state.clone() })
                    },
                    h * state.b[i].abs().max(1e-3),
                );
                real(d)
            }),
        )
    });

    let err_z = if state.z.is_empty() {
        0.0
    } else {
        let gz = grad_z(state, eig, t)?;
        let fd_z = ladder(scale(&state.z), |h| {
            matrix_fd(&state.z, h, |z| {
                f(&ManifoldState {
                    z: z.clone(),
                    ..state.clone()
                })
            })
        });
        if gz.norm() == 0.0 && fd_z.norm() < 1e-9 {
            0.0
        } else {
            rel(&gz, &fd_z)
        }
    };
    Ok(GradientErrors {
        v: rel(&gv, &fd_v),
        b: rel(&gb, &fd_b),
        z: err_z,
    })
}

/// Strictly feasible points drawn around the phase-1 start of `config`.
pub fn random_feasible_points(
    config: &ScenarioConfig,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(EigB, Vec<ManifoldState>)> {
    let prep = Prepared::new(config)?;
    let eig = reduce_b(
        &prep.basis.u_tilde,
        &prep.comm.h,
        config.sigma_c_sq,
        prep.streams,
        prep.budget,
        &prep.sensing,
    )?;
    let base = phase1_feasible(&eig, rng)?.state;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    // Perturbation size; shrinks while draws keep leaving the feasible set.
    let mut size = 0.3;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count {
            return Err(Error::Domain(
                "could not draw strictly feasible points".into(),
            ));
        }
        if attempts % 5 == 0 {
            size *= 0.5;
        }
        let ns = base.b.len();
        let spin = linalg::skew_part(&linalg::complex_normal_matrix(ns, ns, rng)) * real(size);
        let v = crate::manifold::stiefel_retract(&(&base.v * (CMat::identity(ns, ns) + spin)))?;
        let b = base
            .b
            .iter()
            .map(|b| b * (1.0 - size * rng.random_range(0.0..0.5)))
            .collect();
        let dz = linalg::complex_normal_matrix(base.z.nrows(), base.z.ncols(), rng);
        let z = &base.z * real(1.0 - size * rng.random_range(0.0..0.5))
            + dz * real(1e-2 * size * base.z.norm());
        let s = ManifoldState { v, b, z };
        if barrier_value(&s, &eig, 100.0).is_finite() {
            out.push(s);
        }
    }
    Ok((eig, out))
}

fn check_gradients(options: &ValidateOptions) -> Result<(bool, String)> {
    let n = count(options, 6, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = GradientErrors {
        v: 0.0,
        b: 0.0,
        z: 0.0,
    };
    let per_seed = 2;
    for seed in 0..n.div_ceil(per_seed) as u64 {
        let (eig, points) = random_feasible_points(&desk(seed), per_seed, &mut rng)?;
        for s in &points {
            let e = gradient_errors(&eig, s, 100.0, options.fault)?;
            worst = GradientErrors {
                v: worst.v.max(e.v),
                b: worst.b.max(e.b),
                z: worst.z.max(e.z),
            };
        }
    }
    let ok = worst.max() < 1e-5;
    Ok((
        ok,
        format!(
            "{n} points, max rel err V {:.1e}, b {:.1e}, Z {:.1e}",
            worst.v, worst.b, worst.z
        ),
    ))
}

/// Smallest `SCNR(mvdr) − SCNR(u)` over `trials` random unit vectors,
/// relative to SCNR(mvdr). Negative means a random vector won.
pub fn mvdr_margin(
    prep: &Prepared,
    r_x: &CMat,
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let c = &prep.config;
    let w = crate::beamform::mvdr_receive(&prep.responses, &prep.scene, r_x, c.sigma_s_sq)?;
    let best = scnr(&w, &prep.responses, &prep.scene, r_x, c.sigma_s_sq)?;
    let n = w.len();
    let mut margin = f64::INFINITY;
    for _ in 0..trials {
        let u: CVec = linalg::complex_normal_matrix(n, 1, rng)
            .column(0)
            .into_owned();
        let u = &u / real(u.norm());
        let s = scnr(&u, &prep.responses, &prep.scene, r_x, c.sigma_s_sq)?;
        margin = margin.min((best - s) / best);
    }
    Ok(margin)
}

fn check_mvdr(options: &ValidateOptions) -> Result<(bool, String)> {
    let n = count(options, 2, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = f64::INFINITY;
    for seed in 0..n as u64 {
        let prep = Prepared::new(&desk(seed))?;
        let dim = prep.geometry.total_antennas();
        let g = linalg::complex_normal_matrix(dim, 4, &mut rng);
        worst = worst.min(mvdr_margin(&prep, &(&g * g.adjoint()), 1000, &mut rng)?);
    }
    Ok((
        worst >= -1e-9,
        format!("{n} instances × 1000 vectors, min margin {worst:.2e}"),
    ))
}

fn check_scnr_refresh(options: &ValidateOptions) -> Result<(bool, String)> {
    let n = count(options, 2, 5);
    let mut worst = f64::INFINITY;
    for seed in 0..n as u64 {
        let row = run_scenario(&desk(seed), Algorithm::SdrRrs);
        if !row.is_ok() {
            return Ok((false, format!("seed {seed}: {}", row.status)));
        }
        worst = worst.min(row.scnr_db - row.scnr_fixed_db);
    }
    Ok((
        worst >= -1e-9,
        format!("{n} seeds, min refreshed − fixed {worst:.3} dB"),
    ))
}

fn check_dominance(options: &ValidateOptions) -> Result<(bool, String)> {
    let n = count(options, 2, 5);
    let mut worst = f64::INFINITY;
    for seed in 0..n as u64 {
        let prep = Prepared::new(&desk(seed))?;
        let rows: Vec<_> = Algorithm::ALL
            .iter()
            .map(|&a| evaluate(&prep, a, &RunOptions::default()))
            .collect();
        if let Some(bad) = rows.iter().find(|r| !r.se_bits.is_finite()) {
            return Ok((
                false,
                format!("seed {seed}: {} {}", bad.algorithm.name(), bad.status),
            ));
        }
        worst = worst.min(rows[2].se_bits - rows[0].se_bits.max(rows[1].se_bits));
    }
    Ok((
        worst >= -1e-6,
        format!("{n} seeds, min fdb − best {worst:.2e} bits"),
    ))
}

fn check_monotone(options: &ValidateOptions) -> Result<(bool, String)> {
    let ts: &[f64] = if options.quick {
        &[100.0]
    } else {
        &[10.0, 100.0, 1000.0]
    };
    let mut worst_iters = 0;
    for &t in ts {
        let prep = Prepared::new(&desk(1))?;
        let eig = reduce_b(
            &prep.basis.u_tilde,
            &prep.comm.h,
            prep.config.sigma_c_sq,
            prep.streams,
            prep.budget,
            &prep.sensing,
        )?;
        let init = phase1_feasible(&eig, &mut ChaCha8Rng::seed_from_u64(5))?;
        let config = ManifoldConfig {
            barrier_t: t,
            ..ManifoldConfig::default()
        };
        let out = rm_jgd(&eig, &config, init.state)?;
        if out.trace.windows(2).any(|w| w[1].f >= w[0].f) {
            return Ok((
                false,
                format!("t = {t}: objective did not decrease strictly"),
            ));
        }
        if out.iterations >= config.max_iter {
            return Ok((false, format!("t = {t}: hit the iteration cap")));
        }
        worst_iters = worst_iters.max(out.iterations);
    }
    Ok((
        true,
        format!("t ∈ {ts:?}, at most {worst_iters} iterations"),
    ))
}

/// The problem posed over all `N` transmit dimensions, and its restriction
/// to `col(Ũ)` with the exact power weight `Ũ^H Ũ`.
pub fn full_and_reduced(prep: &Prepared, budget: f64) -> (MaxDetProblem, MaxDetProblem) {
    let c = &prep.config;
    let w = &prep.w_fixed;
    let mut psi = CMat::zeros(
        prep.geometry.total_antennas(),
        prep.geometry.total_antennas(),
    );
    for (q, o) in prep.responses.objects.iter().enumerate() {
        let gain = prep.scene.alpha(q).powi(2) * w.dotc(&o.g_r).norm_sqr();
        let weight = if q == 0 {
            gain
        } else {
            -c.scnr_threshold * gain
        };
        psi += (&o.g_t * o.g_t.adjoint()) * real(weight);
    }
    let ut = &prep.basis.u_tilde;
    let sensing = crate::beamform::SensingConstraint {
        psi: linalg::hermitian_part(&psi),
        gamma_0: prep.sensing.gamma_0,
    };
    let full = MaxDetProblem {
        h_eff: prep.comm.h.clone(),
        sigma_c_sq: c.sigma_c_sq,
        power_budget: budget,
        power_weight: None,
        sensing: sensing.clone(),
        streams: prep.streams,
    };
    let reduced = MaxDetProblem {
        h_eff: &prep.comm.h * ut,
        sigma_c_sq: c.sigma_c_sq,
        power_budget: budget,
        power_weight: Some(ut.adjoint() * ut),
        sensing: crate::beamform::SensingConstraint {
            psi: linalg::hermitian_part(&(ut.adjoint() * &sensing.psi * ut)),
            gamma_0: sensing.gamma_0,
        },
        streams: prep.streams,
    };
    (full, reduced)
}

/// `(SE gap in bits, subspace residual of the full optimum)`.
pub fn full_space_gap(prep: &Prepared) -> Result<(f64, f64)> {
    let budget = prep.streams as f64;
    let (full, reduced) = full_and_reduced(prep, budget);
    let a = solve_maxdet(&full, 1e-9, 500)?;
    let b = solve_maxdet(&reduced, 1e-9, 500)?;
    if a.status != SdpStatus::Optimal || b.status != SdpStatus::Optimal {
        return Err(Error::Infeasible(format!(
            "full {:?}, reduced {:?}",
            a.status, b.status
        )));
    }
    let sigma = prep.config.sigma_c_sq;
    let ut = &prep.basis.u_tilde;
    let se_full = spectral_efficiency_cov(&prep.comm.h, &a.r_bb, sigma)?;
    let se_red = spectral_efficiency_cov(&prep.comm.h, &lift_covariance(ut, &b.r_bb), sigma)?;
    Ok((
        (se_full - se_red).abs(),
        verify_covariance_subspace(&a.r_bb, ut),
    ))
}

/// Desk scene shrunk to `N = 24` transmit antennas.
pub fn small_config(seed: u64) -> ScenarioConfig {
    let mut c = desk(seed);
    c.subarrays = 3;
    c
}

fn check_full_space(_: &ValidateOptions) -> Result<(bool, String)> {
    let (gap, residual) = full_space_gap(&Prepared::new(&small_config(0))?)?;
    Ok((
        gap < 1e-4 && residual < 1e-6,
        format!("gap {gap:.2e} bits, residual {residual:.2e}"),
    ))
}

fn music_prep() -> Result<(Prepared, Grid)> {
    let mut c = desk(0);
    c.scnr_threshold = crate::config::db_to_linear(25.0);
    let prep = Prepared::new(&c)?;
    let p = c.target.location.to_cartesian();
    let grid = Grid::parse(&format!(
        "{}:0.25:{},{}:0.25:{}",
        p.x - 2.0,
        p.x + 2.0,
        p.y - 2.0,
        p.y + 2.0
    ))?;
    Ok((prep, grid))
}

fn check_music_rotation(_: &ValidateOptions) -> Result<(bool, String)> {
    let (prep, grid) = music_prep()?;
    let block = simulate_block(&prep, 64)?;
    let e = noise_subspace(&sample_covariance(&block.y)?, prep.scene.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let u = linalg::random_unitary(e.ncols(), &mut rng);
    let a = music_spectrum(&e, &prep.geometry, &grid)?;
    let b = music_spectrum(&(&e * u), &prep.geometry, &grid)?;
    let diff = a
        .spectrum
        .iter()
        .zip(&b.spectrum)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok((
        diff < 1e-9 && a.peak_index == b.peak_index,
        format!("max spectrum change {diff:.1e}"),
    ))
}

fn check_music_peak(_: &ValidateOptions) -> Result<(bool, String)> {
    let (prep, grid) = music_prep()?;
    let block = simulate_block(&prep, 256)?;
    let e = noise_subspace(&sample_covariance(&block.y)?, prep.scene.len())?;
    let r = music_spectrum(&e, &prep.geometry, &grid)?;
    let truth = prep.config.target.location.to_cartesian();
    let (dx, dy) = ((r.peak.x - truth.x).abs(), (r.peak.y - truth.y).abs());
    let ok = dx <= grid.x.step + 1e-9 && dy <= grid.y.step + 1e-9;
    Ok((
        ok,
        format!(
            "peak off by ({dx:.2}, {dy:.2}) m at {:.1} dB",
            block.target_snr_db
        ),
    ))
}

fn check_determinism(_: &ValidateOptions) -> Result<(bool, String)> {
    let c = desk(3);
    for a in Algorithm::ALL {
        let mut x = run_scenario(&c, a);
        let mut y = run_scenario(&c, a);
        x.wall_time_ms = 0.0;
        y.wall_time_ms = 0.0;
        // NaN != NaN, so compare the printed form.
        if format!("{x:?}") != format!("{y:?}") {
            return Ok((false, format!("{} differs between runs", a.name())));
        }
    }
    Ok((true, "identical rows for every algorithm".into()))
}

fn check_sweep_rows(_: &ValidateOptions) -> Result<(bool, String)> {
    let dir = std::env::temp_dir().join(format!("xlmimo-validate-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut bodies = Vec::new();
    let mut rows = 0;
    let mut expected = 0;
    for (run, workers) in [(0, 1), (1, 3)] {
        let out = dir.join(format!("run{run}.csv"));
        let text = format!(
            "sweep_axis = \"scnr_threshold\"\nvalues = [0, 40, 10]\nrepetitions = 2\n\
             algorithms = [\"sdr_rrs\", \"rm_jgd\"]\noutput_path = {:?}\n[base]\ndesk_scale = true\n",
            out.display().to_string()
        );
        let spec = ExperimentSpec::from_toml_str(&text)?;
        let outcome = sweep_with(&spec, &RunOptions::default(), Some(workers))?;
        rows = outcome.rows.len();
        expected = spec.expected_rows();
        bodies.push(std::fs::read(&out)?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    let same = bodies[0] == bodies[1];
    Ok((
        rows == expected && same,
        format!("{rows}/{expected} rows, identical across worker counts: {same}"),
    ))
}
