//! Simulated fluorescence readout.
//!
//! An observable is measured by mapping each of its eigenstates onto the
//! bright level `psi2` with two resonant pulses, then counting photons. The
//! bright fractions give populations, the populations give moments, and the
//! moments give the Berry flux through the same chart as the ideal analysis.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drive::{accumulated_phase, measurement_compensation, DriveTrajectory};
use crate::dynamics::{
    adiabatic_loop_run, evolve_schrodinger, solve_small, DephasingModel, RampSchedule,
};
use crate::error::{Error, Result};
use crate::geometry::{
    chart_sample, generalized_solid_angles, moments_of_density, unwrap_track, SolidAngles,
    SpinMoments,
};
use crate::model::{canonical_phase, drive_hamiltonian};
use crate::spin1::{
    dagger, matmul, spin_op, spin_tensor_op, trace_product, Axis, CMatrix3, Hermitian3, SpinState,
    C64, I, ONE, ZERO,
};

/// Rotation `exp(-i theta/2 (e^{i phi} |a><b| + h.c.))` on a two-level subspace.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rotation {
    pub theta: f64,
    pub phi: f64,
}

impl Rotation {
    fn embed(&self, a: usize, b: usize) -> CMatrix3 {
        let (s, c) = (self.theta / 2.0).sin_cos();
        let mut m = crate::spin1::identity();
        m[a][a] = C64::new(c, 0.0);
        m[b][b] = C64::new(c, 0.0);
        m[a][b] = -I * C64::from_polar(s, self.phi);
        m[b][a] = -I * C64::from_polar(s, -self.phi);
        m
    }
}

/// `R23 R12`, taking `psi2` to the eigenstate under test.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisPulses {
    pub r12: Rotation,
    pub r23: Rotation,
}

impl AnalysisPulses {
    pub fn unitary(&self) -> CMatrix3 {
        matmul(&self.r23.embed(1, 2), &self.r12.embed(0, 1))
    }

    /// `R23 R12 |psi2>`.
    pub fn prepared_state(&self) -> SpinState {
        let u = self.unitary();
        SpinState::from_normalized([u[0][1], u[1][1], u[2][1]])
    }

    /// Pulse phases advanced by `(d12, d23)`.
    pub fn shifted(&self, d12: f64, d23: f64) -> Self {
        AnalysisPulses {
            r12: Rotation {
                phi: self.r12.phi + d12,
                ..self.r12
            },
            r23: Rotation {
                phi: self.r23.phi + d23,
                ..self.r23
            },
        }
    }

    /// Level populations after `R12^dag R23^dag`; the middle entry is bright.
    pub fn mapped_populations(&self, rho: &CMatrix3) -> [f64; 3] {
        let u = self.unitary();
        let m = matmul(&dagger(&u), &matmul(rho, &u));
        [0, 1, 2].map(|i| m[i][i].re.max(0.0))
    }

    pub fn bright_probability(&self, rho: &CMatrix3) -> f64 {
        self.mapped_populations(rho)[1]
    }
}

/// Closed-form pulses with `R23 R12 |psi2> = eig` up to a global phase.
pub fn analysis_pulses(eig: &SpinState) -> AnalysisPulses {
    let mut e = *eig.amplitudes();
    if e[1].norm() > 0.0 {
        let g = C64::from_polar(1.0, -e[1].arg());
        e = e.map(|z| z * g);
    }
    let (a1, a2, a3) = (e[0].norm(), e[1].norm(), e[2].norm());
    let r12 = if a1 > 0.0 {
        Rotation {
            theta: 2.0 * a1.min(1.0).asin(),
            phi: canonical_phase(e[0].arg() + FRAC_PI_2),
        }
    } else {
        Rotation::default()
    };
    let r23 = if a3 > 0.0 {
        Rotation {
            theta: 2.0 * a3.atan2(a2),
            phi: canonical_phase(-e[2].arg() - FRAC_PI_2),
        }
    } else {
        Rotation::default()
    };
    AnalysisPulses { r12, r23 }
}

/// Photon-count model. Counts at or above `threshold` are classified bright.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    pub bright_mean: f64,
    pub dark_mean: f64,
    /// Separate residual brightness of `psi1` and `psi3`, overriding `dark_mean`.
    #[serde(default)]
    pub dark_means: Option<[f64; 2]>,
    pub threshold: u64,
    pub trials: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            bright_mean: 25.0,
            dark_mean: 1.6,
            dark_means: None,
            threshold: 6,
            trials: 500,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        let [d1, _, d3] = self.level_means();
        let t = self.threshold as f64;
        let ok =
            self.bright_mean > t && [d1, d3].iter().all(|&d| d >= 0.0 && d < t) && self.trials >= 1;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "detection config out of range: {self:?}"
            )));
        }
        Ok(())
    }

    /// Mean counts of `psi1`, `psi2`, `psi3`.
    pub fn level_means(&self) -> [f64; 3] {
        let [d1, d3] = self.dark_means.unwrap_or([self.dark_mean; 2]);
        [d1, self.bright_mean, d3]
    }

    /// Probability a bright ion is classified dark.
    pub fn bright_error(&self) -> f64 {
        poisson_cdf_below(self.bright_mean, self.threshold)
    }

    /// Probability a dark ion (default `dark_mean`) is classified bright.
    pub fn dark_error(&self) -> f64 {
        1.0 - poisson_cdf_below(self.dark_mean, self.threshold)
    }
}

/// `P[X < k]` for `X ~ Poisson(mean)`.
fn poisson_cdf_below(mean: f64, k: u64) -> f64 {
    let mut term = (-mean).exp();
    let mut acc = 0.0;
    for j in 0..k {
        acc += term;
        term *= mean / (j + 1) as f64;
    }
    acc.min(1.0)
}

/// Raw outcome of a detection run.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountRecord {
    pub counts: Vec<u64>,
    pub bright: Vec<bool>,
}

impl CountRecord {
    pub fn bright_count(&self) -> usize {
        self.bright.iter().filter(|&&b| b).count()
    }

    pub fn bright_fraction(&self) -> f64 {
        if self.bright.is_empty() {
            return 0.0;
        }
        self.bright_count() as f64 / self.bright.len() as f64
    }

    /// CSV with columns `trial,counts,bright`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "trial,counts,bright")?;
        for (k, (c, b)) in self.counts.iter().zip(&self.bright).enumerate() {
            writeln!(out, "{k},{c},{}", u8::from(*b))?;
        }
        Ok(())
    }
}

const TRIAL_BLOCK: usize = 4096;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run_trials(
    pops: [f64; 3],
    cfg: &DetectionConfig,
    rng: &mut ChaCha8Rng,
    n: usize,
    rec: &mut CountRecord,
) {
    let means = cfg.level_means();
    let dists = means.map(|m| Poisson::new(m.max(1e-300)).expect("finite positive mean"));
    let total: f64 = pops.iter().sum();
    for _ in 0..n {
        let u = rng.random::<f64>() * total;
        let level = if u < pops[1] {
            1
        } else if u < pops[1] + pops[0] {
            0
        } else {
            2
        };
        let count = if means[level] > 0.0 {
            dists[level].sample(rng) as u64
        } else {
            0
        };
        rec.counts.push(count);
        rec.bright.push(count >= cfg.threshold);
    }
}

/// Detection of the given level populations over `cfg.trials` trials.
///
/// Trials run in fixed blocks of 4096, each on its own ChaCha stream, so the
/// record depends only on the seed.
pub fn simulate_levels(
    pops: [f64; 3],
    cfg: &DetectionConfig,
    seed: u64,
    stream: u64,
) -> CountRecord {
    let pops = pops.map(|p| p.max(0.0));
    let blocks = cfg.trials.div_ceil(TRIAL_BLOCK);
    let parts: Vec<CountRecord> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let n = TRIAL_BLOCK.min(cfg.trials - b * TRIAL_BLOCK);
            let mut rng = rng_for(seed, (stream << 20) | b as u64);
            let mut rec = CountRecord {
                counts: Vec::with_capacity(n),
                bright: Vec::with_capacity(n),
            };
            run_trials(pops, cfg, &mut rng, n, &mut rec);
            rec
        })
        .collect();
    let mut out = CountRecord::default();
    for p in parts {
        out.counts.extend(p.counts);
        out.bright.extend(p.bright);
    }
    out
}

/// Detection with the ion bright with probability `p_bright`, otherwise in `psi1`.
pub fn simulate_detection(p_bright: f64, cfg: &DetectionConfig, seed: u64) -> Result<CountRecord> {
    if !(0.0..=1.0).contains(&p_bright) {
        return Err(Error::InvalidInput(format!(
            "bright probability {p_bright} outside [0, 1]"
        )));
    }
    Ok(simulate_levels(
        [1.0 - p_bright, p_bright, 0.0],
        cfg,
        seed,
        0,
    ))
}

/// Inverts the classification errors: `(p - e_d) / (1 - e_b - e_d)`.
pub fn unfold(p_measured: f64, bright_error: f64, dark_error: f64) -> f64 {
    (p_measured - dark_error) / (1.0 - bright_error - dark_error)
}

/// Relative deviation of the population sum tolerated by [`estimate_moment`].
pub const POPULATION_TOL: f64 = 0.05;

/// `sum P_i e_i` after renormalizing the populations.
pub fn estimate_moment(populations: [f64; 3], eigenvalues: [f64; 3]) -> Result<f64> {
    estimate_moment_with_tol(populations, eigenvalues, POPULATION_TOL)
}

pub fn estimate_moment_with_tol(
    populations: [f64; 3],
    eigenvalues: [f64; 3],
    tol: f64,
) -> Result<f64> {
    let p = populations.map(|x| x.max(0.0));
    let sum: f64 = p.iter().sum();
    if !((sum - 1.0).abs() <= tol) {
        return Err(Error::PopulationsInconsistent(sum));
    }
    Ok(p.iter().zip(&eigenvalues).map(|(p, e)| p * e).sum::<f64>() / sum)
}

/// Standard deviation of `estimator` over `resamples` with-replacement resamples.
pub fn bootstrap_std<T: Clone + Sync>(
    data: &[T],
    resamples: usize,
    seed: u64,
    estimator: impl Fn(&[T]) -> f64 + Sync,
) -> Result<f64> {
    if data.len() < 2 || resamples < 2 {
        return Err(Error::InvalidInput(
            "bootstrap needs at least two trials and two resamples".into(),
        ));
    }
    let values: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(seed, r as u64);
            let pick: Vec<T> = (0..data.len())
                .map(|_| data[rng.random_range(0..data.len())].clone())
                .collect();
            estimator(&pick)
        })
        .collect();
    Ok(std_dev(&values))
}

/// Bootstrap spread of the bright fraction of a record.
pub fn bootstrap_uncertainty(record: &CountRecord, resamples: usize, seed: u64) -> Result<f64> {
    bootstrap_std(&record.bright, resamples, seed, |xs| {
        xs.iter().filter(|&&b| b).count() as f64 / xs.len() as f64
    })
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// The nine measured observables, in output order.
pub const OBSERVABLES: [&str; 9] = ["Fx", "Fy", "Fz", "Nxx", "Nyy", "Nzz", "Nxy", "Nxz", "Nyz"];

fn observable_operator(k: usize) -> Hermitian3 {
    use Axis::*;
    match k {
        0 => spin_op(X),
        1 => spin_op(Y),
        2 => spin_op(Z),
        3 => spin_tensor_op(X, X),
        4 => spin_tensor_op(Y, Y),
        5 => spin_tensor_op(Z, Z),
        6 => spin_tensor_op(X, Y),
        7 => spin_tensor_op(X, Z),
        _ => spin_tensor_op(Y, Z),
    }
}

/// An observable's eigenbasis with the pulses that read out each eigenstate.
#[derive(Debug, Clone, Copy)]
pub struct ObservableBasis {
    pub eigenvalues: [f64; 3],
    pub states: [SpinState; 3],
    pub pulses: [AnalysisPulses; 3],
}

pub fn observable_bases() -> [ObservableBasis; 9] {
    std::array::from_fn(|k| {
        let es = observable_operator(k).eigensystem();
        ObservableBasis {
            eigenvalues: es.values,
            states: es.vectors,
            pulses: es.vectors.map(|v| analysis_pulses(&v)),
        }
    })
}

fn assemble(values: &[f64; 9]) -> SpinMoments {
    let [fx, fy, fz, nxx, nyy, nzz, nxy, nxz, nyz] = *values;
    let shift = (nxx + nyy + nzz) / 3.0;
    let (nxx, nyy, nzz) = (nxx - shift, nyy - shift, nzz - shift);
    SpinMoments {
        f: [fx, fy, fz],
        n: [[nxx, nxy, nxz], [nxy, nyy, nyz], [nxz, nyz, nzz]],
    }
}

fn hermitian_basis() -> [CMatrix3; 9] {
    std::array::from_fn(|a| {
        let mut m = [[ZERO; 3]; 3];
        match a {
            0..=2 => m[a][a] = ONE,
            3..=5 => {
                let (i, j) = [(0, 1), (0, 2), (1, 2)][a - 3];
                m[i][j] = ONE;
                m[j][i] = ONE;
            }
            _ => {
                let (i, j) = [(0, 1), (0, 2), (1, 2)][a - 6];
                m[i][j] = I;
                m[j][i] = -I;
            }
        }
        m
    })
}

/// The density matrix whose spin moments are `m` (unit trace, possibly not
/// positive for noisy moments).
pub fn density_from_moments(m: &SpinMoments) -> CMatrix3 {
    let ops: [Hermitian3; 9] = std::array::from_fn(|k| match k {
        0 => Hermitian3::identity(),
        1 => spin_op(Axis::X),
        2 => spin_op(Axis::Y),
        3 => spin_op(Axis::Z),
        4 => spin_tensor_op(Axis::X, Axis::X),
        5 => spin_tensor_op(Axis::Y, Axis::Y),
        6 => spin_tensor_op(Axis::X, Axis::Y),
        7 => spin_tensor_op(Axis::X, Axis::Z),
        _ => spin_tensor_op(Axis::Y, Axis::Z),
    });
    let basis = hermitian_basis();
    let a: Vec<Vec<f64>> = ops
        .iter()
        .map(|o| basis.iter().map(|b| trace_product(b, o)).collect())
        .collect();
    let rhs = vec![
        1.0, m.f[0], m.f[1], m.f[2], m.n[0][0], m.n[1][1], m.n[0][1], m.n[0][2], m.n[1][2],
    ];
    let x = solve_small(a, rhs).expect("spin moments span the Hermitian matrices");
    let mut rho = [[ZERO; 3]; 3];
    for (xa, b) in x.iter().zip(&basis) {
        for i in 0..3 {
            for j in 0..3 {
                rho[i][j] += b[i][j] * *xa;
            }
        }
    }
    rho
}

/// Nearest (Frobenius) density matrix: eigenvalues projected onto the simplex.
pub fn project_to_physical(rho: &CMatrix3) -> CMatrix3 {
    let es = Hermitian3::symmetrized(*rho).eigensystem();
    let mut sorted = es.values;
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (j, u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            shift = t;
        }
    }
    let w = es.values.map(|v| (v - shift).max(0.0));
    let mut out = [[ZERO; 3]; 3];
    for (k, wk) in w.iter().enumerate() {
        let a = es.vectors[k].amplitudes();
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += a[i] * a[j].conj() * *wk;
            }
        }
    }
    out
}

/// Moments the readout would see from noisy estimates: the reconstructed
/// state is projected onto the physical set first.
pub fn physical_moments(m: &SpinMoments) -> SpinMoments {
    moments_of_density(&project_to_physical(&density_from_moments(m)))
}

/// Readout settings for a full loop measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub detection: DetectionConfig,
    /// Measured loop positions (the closing point is added).
    #[serde(default = "default_points")]
    pub tau_points: usize,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Correct populations for the classification error rates.
    #[serde(default)]
    pub unfold: bool,
    /// Run the ramp with the fitted dephasing model.
    #[serde(default)]
    pub dephasing: bool,
}

fn default_points() -> usize {
    64
}
fn default_resamples() -> usize {
    500
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            detection: DetectionConfig::default(),
            tau_points: default_points(),
            resamples: default_resamples(),
            seed: 0,
            unfold: false,
            dephasing: false,
        }
    }
}

/// Population sums tolerated inside the pipeline, where three separately
/// sampled fractions of 500 trials rarely sum to within 5% of one.
pub const PIPELINE_POPULATION_TOL: f64 = 0.25;

/// Bright counts of one loop position: `[observable][eigenstate]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredPoint {
    pub tau: f64,
    pub bright: [[u64; 3]; 9],
    /// Noise-free moments of the simulated state.
    pub exact: SpinMoments,
    /// Moments estimated from the counts.
    pub estimated: SpinMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub points: Vec<MeasuredPoint>,
    pub flux: SolidAngles,
    pub gamma: f64,
    pub sigma: f64,
    pub sigma_f: f64,
    pub sigma_t: f64,
    /// Bootstrap resamples whose angle track could not be unwrapped.
    pub failed_resamples: usize,
}

fn estimate_point(
    bright: &[[u64; 3]; 9],
    bases: &[ObservableBasis; 9],
    cfg: &PipelineConfig,
) -> Result<SpinMoments> {
    let n = cfg.detection.trials as f64;
    let (eb, ed) = (cfg.detection.bright_error(), cfg.detection.dark_error());
    let mut values = [0.0; 9];
    for k in 0..9 {
        let pops = bright[k].map(|b| {
            let p = b as f64 / n;
            if cfg.unfold {
                unfold(p, eb, ed)
            } else {
                p
            }
        });
        values[k] = estimate_moment_with_tol(pops, bases[k].eigenvalues, PIPELINE_POPULATION_TOL)?;
    }
    Ok(physical_moments(&assemble(&values)))
}

fn flux_of(taus: &[f64], moments: &[SpinMoments]) -> Result<SolidAngles> {
    let raw = taus
        .iter()
        .zip(moments)
        .map(|(t, m)| chart_sample(*t, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(generalized_solid_angles(&unwrap_track(&raw)?))
}

/// Ideal moment-based flux on the pipeline's loop positions, from exact eigenstates.
pub fn ideal_point_flux(sched: &RampSchedule, tau_points: usize) -> Result<SolidAngles> {
    let taus: Vec<f64> = (0..=tau_points)
        .map(|k| 2.0 * PI * k as f64 / tau_points as f64)
        .collect();
    let moments = taus
        .iter()
        .map(|&tau| {
            let h = drive_hamiltonian(&crate::model::drive_params(
                &sched.loop_spec.point(tau),
                &sched.loop_spec.couplings,
            ));
            let g = h.eigensystem().band_state(0, 1e-9 * sched.loop_spec.k0)?;
            Ok(crate::geometry::moments(&g))
        })
        .collect::<Result<Vec<_>>>()?;
    flux_of(&taus, &moments)
}

/// Ramp, readout of all nine observables at every loop position, flux
/// extraction and bootstrap error bars.
pub fn measure_loop(sched: &RampSchedule, cfg: &PipelineConfig) -> Result<PipelineResult> {
    cfg.detection.validate()?;
    if cfg.tau_points < 8 || cfg.resamples < 2 {
        return Err(Error::InvalidInput(
            "pipeline needs >= 8 loop positions and >= 2 resamples".into(),
        ));
    }
    let model = cfg.dephasing.then(DephasingModel::experimental);
    let run = adiabatic_loop_run(sched, model.as_ref(), cfg.tau_points)?;
    let bases = observable_bases();

    let points: Vec<MeasuredPoint> = run
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let rho = density_from_moments(&s.moments);
            let mut bright = [[0u64; 3]; 9];
            for (k, basis) in bases.iter().enumerate() {
                for e in 0..3 {
                    let pops = basis.pulses[e].mapped_populations(&rho);
                    let stream = ((i * 9 + k) * 3 + e) as u64;
                    bright[k][e] = simulate_levels(pops, &cfg.detection, cfg.seed, stream)
                        .bright_count() as u64;
                }
            }
            Ok(MeasuredPoint {
                tau: s.tau,
                bright,
                exact: s.moments,
                estimated: estimate_point(&bright, &bases, cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let taus: Vec<f64> = points.iter().map(|p| p.tau).collect();
    let est: Vec<SpinMoments> = points.iter().map(|p| p.estimated).collect();
    let flux = flux_of(&taus, &est)?;
    let gamma = flux.total();

    let n = cfg.detection.trials as u64;
    let resampled: Vec<Option<SolidAngles>> = (0..cfg.resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(cfg.seed ^ 0x5eed_b007, r as u64);
            let est = points
                .iter()
                .map(|p| {
                    let bright = p.bright.map(|row| {
                        row.map(|b| {
                            Binomial::new(n, b as f64 / n as f64)
                                .expect("valid binomial")
                                .sample(&mut rng)
                        })
                    });
                    estimate_point(&bright, &bases, cfg)
                })
                .collect::<Result<Vec<_>>>()
                .ok()?;
            flux_of(&taus, &est).ok()
        })
        .collect();
    let good: Vec<SolidAngles> = resampled.iter().flatten().copied().collect();
    let failed_resamples = cfg.resamples - good.len();
    if good.len() < 2 || failed_resamples * 10 > cfg.resamples {
        return Err(Error::NotConverged {
            what: "bootstrap",
            detail: format!("{failed_resamples} of {} resamples failed", cfg.resamples),
        });
    }
    let dg: Vec<f64> = good
        .iter()
        .map(|s| gamma + canonical_phase(s.total() - gamma))
        .collect();
    let sigma = std_dev(&dg);
    let sigma_f = std_dev(&good.iter().map(|s| s.gamma_f).collect::<Vec<_>>());
    let sigma_t = std_dev(&good.iter().map(|s| s.gamma_t).collect::<Vec<_>>());
    Ok(PipelineResult {
        points,
        flux,
        gamma,
        sigma,
        sigma_f,
        sigma_t,
        failed_resamples,
    })
}

/// Readout agreement between the rotating-frame simulation and a
/// resonant-frame simulation of the same trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensationReport {
    /// Largest moment error with phase-compensated analysis pulses.
    pub compensated: f64,
    /// Largest moment error with the pulses left unshifted.
    pub uncompensated: f64,
}

/// Evolves the exact ground state along `traj` in the rotating frame and in
/// the resonant frame (carriers without detuning), reads out all nine
/// moments at `t_m` noise-free, and compares each against the rotating-frame
/// value.
pub fn compensation_check(traj: &DriveTrajectory, t_m: f64, k0: f64) -> Result<CompensationReport> {
    let fp = accumulated_phase(traj);
    let t0 = traj.times[0];
    let h_det = |t: f64| drive_hamiltonian(&traj.at(t0 + t));
    let h_res = |t: f64| {
        let d = traj.at(t0 + t);
        let (p12, p23) = fp.at(t0 + t);
        // W H W^dag + i W' W^dag with W = diag(e^{-i Phi12}, 1, e^{-i Phi23})
        // cancels the diagonal exactly.
        Hermitian3::from_upper(
            [0.0; 3],
            C64::from_polar(d.omega12, d.phi12 - p12),
            ZERO,
            C64::from_polar(d.omega23, d.phi23 + p23),
        )
    };
    let psi0 = h_det(0.0).eigensystem().band_state(0, 1e-9 * k0)?;
    let norm = (0..traj.params.len())
        .map(|k| drive_hamiltonian(&traj.params[k]).norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let dt = 0.01 / norm;
    let span = t_m - t0;
    let det = evolve_schrodinger(&h_det, &psi0, span, dt, 1)?[1].1;
    let res = evolve_schrodinger(&h_res, &psi0, span, dt, 1)?[1].1;
    let (d12, d23) = measurement_compensation(&fp, t_m);
    let rho = |s: &SpinState| {
        crate::dynamics::DensityMatrix::from_pure(s)
            .matrix()
            .to_owned()
    };
    let (rho_det, rho_res) = (rho(&det), rho(&res));

    let bases = observable_bases();
    let mut compensated: f64 = 0.0;
    let mut uncompensated: f64 = 0.0;
    for b in &bases {
        let read = |rho: &CMatrix3, shift: bool| -> f64 {
            (0..3)
                .map(|e| {
                    let p = if shift {
                        b.pulses[e].shifted(d12, d23)
                    } else {
                        b.pulses[e]
                    };
                    p.bright_probability(rho) * b.eigenvalues[e]
                })
                .sum()
        };
        let theory = read(&rho_det, false);
        compensated = compensated.max((read(&rho_res, true) - theory).abs());
        uncompensated = uncompensated.max((read(&rho_res, false) - theory).abs());
    }
    Ok(CompensationReport {
        compensated,
        uncompensated,
    })
}
