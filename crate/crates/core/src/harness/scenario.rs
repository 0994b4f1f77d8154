//! End-to-end execution of one scenario with one optimizer.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::beamform::{
    build_subspace, lift_covariance, mvdr_receive, optimal_analog, phi_matrices, scnr,
    spectral_efficiency, spectral_efficiency_cov, transmit_power, PhiSet, SensingConstraint,
    SubspaceBasis,
};
use crate::channel::{
    build_comm_channel, draw_paths, numerical_rank, sensing_responses, CommChannel,
    SensingResponses, SensingScene, RANK_TOL,
};
use crate::config::{linear_to_db, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{build_geometry, ArrayGeometry};
use crate::linalg::{self, CMat, CVec};
use crate::manifold::{phase1_feasible, reduce_b, rm_jgd, ManifoldConfig, ManifoldStatus};
use crate::sdr::{sdr_rrs, solve_maxdet, MaxDetProblem, SdpStatus, SdrConfig};

/// Independent random streams derived from the scenario seed.
pub mod stream {
    pub const PATHS: u64 = 0;
    pub const PHASE1: u64 = 1;
    pub const RANDOMIZE: u64 = 2;
    pub const ECHOES: u64 = 3;
}

pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    RmJgd,
    SdrRrs,
    Fdb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::RmJgd, Algorithm::SdrRrs, Algorithm::Fdb];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "rm_jgd" => Ok(Algorithm::RmJgd),
            "sdr_rrs" => Ok(Algorithm::SdrRrs),
            "fdb" => Ok(Algorithm::Fdb),
            other => Err(Error::config(
                "algorithm",
                format!("unknown algorithm `{other}`"),
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RmJgd => "rm_jgd",
            Algorithm::SdrRrs => "sdr_rrs",
            Algorithm::Fdb => "fdb",
        }
    }
}

/// Everything that precedes the optimizer.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub geometry: ArrayGeometry,
    pub comm: CommChannel,
    pub scene: SensingScene,
    pub responses: SensingResponses,
    pub basis: SubspaceBasis,
    /// Receive filter for omnidirectional transmission, `R_X = I`.
    pub w_fixed: CVec,
    pub phi: PhiSet,
    pub sensing: SensingConstraint,
    pub streams: usize,
    /// Proxy power budget `N_s / M`.
    pub budget: f64,
}

impl Prepared {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let geometry = build_geometry(config)?;
        let paths = draw_paths(config, &geometry, &mut seeded(config.seed, stream::PATHS))?;
        let comm = build_comm_channel(&geometry, paths, config.user_antennas)?;
        let scene = SensingScene::from_config(config);
        let responses = sensing_responses(&geometry, &scene)?;
        let basis = build_subspace(&geometry, &comm, &responses, config.analog_path_count())?;
        let n = geometry.total_antennas();
        let w_fixed = mvdr_receive(&responses, &scene, &CMat::identity(n, n), config.sigma_s_sq)?;
        let phi = phi_matrices(
            &basis,
            &responses,
            &w_fixed,
            config.scnr_threshold,
            config.sigma_s_sq,
        );
        let sensing = phi.constraint(&scene, config.scnr_threshold);

        let h_eff = &comm.h * &basis.u_tilde;
        let achievable = numerical_rank(&h_eff, RANK_TOL);
        let streams = match config.streams {
            Some(s) if s > achievable => {
                return Err(Error::RankDeficient {
                    requested: s,
                    achievable,
                })
            }
            Some(s) => s,
            None => comm.rank().min(achievable),
        };
        if streams == 0 {
            return Err(Error::RankDeficient {
                requested: 1,
                achievable: 0,
            });
        }
        let budget = streams as f64 / config.antennas_per_subarray as f64;
        Ok(Prepared {
            config: config.clone(),
            geometry,
            comm,
            scene,
            responses,
            basis,
            w_fixed,
            phi,
            sensing,
            streams,
            budget,
        })
    }

    pub fn problem(&self) -> MaxDetProblem {
        MaxDetProblem {
            h_eff: &self.comm.h * &self.basis.u_tilde,
            sigma_c_sq: self.config.sigma_c_sq,
            power_budget: self.budget,
            power_weight: None,
            sensing: self.sensing.clone(),
            streams: self.streams,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub manifold: ManifoldConfig,
    pub sdr: SdrConfig,
}

/// One output row. Metrics are NaN unless `status` is `ok` or `max_iter`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub subarrays: usize,
    pub antennas_per_subarray: usize,
    pub spacing_factor: f64,
    pub layout: &'static str,
    pub user_antennas: usize,
    pub paths: usize,
    pub objects: usize,
    pub n_rf: usize,
    pub streams: usize,
    pub user_range_m: f64,
    pub snr_offset_db: f64,
    pub scnr_threshold_db: f64,
    pub se_bits: f64,
    /// Under the receive filter refreshed for the optimized covariance.
    pub scnr_db: f64,
    /// Under the filter designed for omnidirectional transmission.
    pub scnr_fixed_db: f64,
    pub power_exact: f64,
    pub power_proxy: f64,
    pub iterations: usize,
    pub wall_time_ms: f64,
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub(crate) fn empty(config: &ScenarioConfig, algorithm: Algorithm, status: String) -> Self {
        ResultRow {
            algorithm,
            seed: config.seed,
            subarrays: config.subarrays,
            antennas_per_subarray: config.antennas_per_subarray,
            spacing_factor: config.spacing_factor,
            layout: config.layout.name(),
            user_antennas: config.user_antennas,
            paths: config.paths,
            objects: config.object_count(),
            n_rf: config.subarrays * config.rf_chains_per_subarray(),
            streams: 0,
            user_range_m: config.user.r,
            snr_offset_db: 0.0,
            scnr_threshold_db: linear_to_db(config.scnr_threshold),
            se_bits: f64::NAN,
            scnr_db: f64::NAN,
            scnr_fixed_db: f64::NAN,
            power_exact: f64::NAN,
            power_proxy: f64::NAN,
            iterations: 0,
            wall_time_ms: 0.0,
            status,
        }
    }
}

/// Optimizer output in RF-chain coordinates. An empty `r_bb` means nothing
/// usable came out and `status` says why.
pub struct Solved {
    pub r_bb: CMat,
    pub w_bb: Option<CMat>,
    pub iterations: usize,
    pub status: String,
}

pub fn solve(prep: &Prepared, algorithm: Algorithm, options: &RunOptions) -> Result<Solved> {
    let seed = prep.config.seed;
    match algorithm {
        Algorithm::RmJgd => {
            let eig = reduce_b(
                &prep.basis.u_tilde,
                &prep.comm.h,
                prep.config.sigma_c_sq,
                prep.streams,
                prep.budget,
                &prep.sensing,
            )?;
            let eig = if options.manifold.null_space {
                eig
            } else {
                eig.without_null_space()
            };
            let init = phase1_feasible(&eig, &mut seeded(seed, stream::PHASE1))?;
            let out = rm_jgd(&eig, &options.manifold, init.state)?;
            let status = match out.status {
                ManifoldStatus::MaxIter => "max_iter",
                _ => "ok",
            };
            Ok(Solved {
                r_bb: &out.w_bb * out.w_bb.adjoint(),
                w_bb: Some(out.w_bb),
                iterations: out.iterations,
                status: status.into(),
            })
        }
        Algorithm::SdrRrs => {
            let out = sdr_rrs(
                &prep.problem(),
                &options.sdr,
                &mut seeded(seed, stream::RANDOMIZE),
            )?;
            let iterations = out.solution.diagnostics.iter().map(|d| d.inner_iter).sum();
            Ok(match out.w_bb {
                Some(w) => Solved {
                    r_bb: &w * w.adjoint(),
                    w_bb: Some(w),
                    iterations,
                    status: "ok".into(),
                },
                None => Solved {
                    r_bb: CMat::zeros(0, 0),
                    w_bb: None,
                    iterations,
                    status: out.status.name().into(),
                },
            })
        }
        Algorithm::Fdb => {
            let sol = solve_maxdet(&prep.problem(), options.sdr.tol, options.sdr.max_iter)?;
            let iterations = sol.diagnostics.iter().map(|d| d.inner_iter).sum();
            match sol.status {
                SdpStatus::Optimal => Ok(Solved {
                    r_bb: sol.r_bb,
                    w_bb: None,
                    iterations,
                    status: "ok".into(),
                }),
                SdpStatus::Infeasible { constraint } => {
                    Err(Error::Infeasible(format!("{constraint} constraint")))
                }
                SdpStatus::MaxIter => Ok(Solved {
                    r_bb: sol.r_bb,
                    w_bb: None,
                    iterations,
                    status: "max_iter".into(),
                }),
            }
        }
    }
}

pub(crate) fn status_of(err: &Error) -> String {
    match err {
        Error::Infeasible(_) => "infeasible".into(),
        Error::RankDeficient { .. } => "rank_deficient".into(),
        Error::Config { .. } => "config_error".into(),
        Error::DegenerateGeometry(_) => "degenerate_geometry".into(),
        _ => "error".into(),
    }
}

pub fn run_scenario(config: &ScenarioConfig, algorithm: Algorithm) -> ResultRow {
    run_scenario_with(config, algorithm, &RunOptions::default())
}

/// Runs the pipeline; failures are reported through `status`.
pub fn run_scenario_with(
    config: &ScenarioConfig,
    algorithm: Algorithm,
    options: &RunOptions,
) -> ResultRow {
    let start = Instant::now();
    let mut row = match Prepared::new(config) {
        Ok(prep) => evaluate(&prep, algorithm, options),
        Err(e) => ResultRow::empty(config, algorithm, status_of(&e)),
    };
    row.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    row
}

pub fn evaluate(prep: &Prepared, algorithm: Algorithm, options: &RunOptions) -> ResultRow {
    let config = &prep.config;
    let mut row = ResultRow::empty(config, algorithm, "ok".into());
    row.streams = prep.streams;
    row.n_rf = prep.basis.n_rf();
    let solved = match solve(prep, algorithm, options) {
        Ok(s) => s,
        Err(e) => {
            row.status = status_of(&e);
            return row;
        }
    };
    if solved.r_bb.is_empty() {
        row.status = solved.status;
        row.iterations = solved.iterations;
        return row;
    }
    let w_rf = optimal_analog(&prep.basis);
    let r_x = lift_covariance(&w_rf, &solved.r_bb);
    let se = match &solved.w_bb {
        Some(w) => spectral_efficiency(&prep.comm.h, &w_rf, w, config.sigma_c_sq),
        None => spectral_efficiency_cov(&prep.comm.h, &r_x, config.sigma_c_sq),
    };
    let refreshed = mvdr_receive(&prep.responses, &prep.scene, &r_x, config.sigma_s_sq);
    let sc = |w: &CVec| scnr(w, &prep.responses, &prep.scene, &r_x, config.sigma_s_sq);
    let (se, w_star) = match (se, refreshed) {
        (Ok(se), Ok(w)) => (se, w),
        (Err(e), _) | (_, Err(e)) => {
            row.status = status_of(&e);
            return row;
        }
    };
    row.se_bits = se;
    row.scnr_db = sc(&w_star).map(linear_to_db).unwrap_or(f64::NAN);
    row.scnr_fixed_db = sc(&prep.w_fixed).map(linear_to_db).unwrap_or(f64::NAN);
    let power = match &solved.w_bb {
        Some(w) => transmit_power(&w_rf, w, config.antennas_per_subarray),
        None => crate::beamform::TransmitPower {
            exact: linalg::trace_re(&r_x),
            proxy: config.antennas_per_subarray as f64 * linalg::trace_re(&solved.r_bb),
        },
    };
    row.power_exact = power.exact;
    row.power_proxy = power.proxy;
    row.iterations = solved.iterations;
    row.status = solved.status;
    row
}
