//! Ramped Schrödinger and pure-dephasing Lindblad evolution along loops, with
//! Berry flux read off the sampled moments.

use std::f64::consts::TAU;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    chart_sample, generalized_solid_angles, moments_of_density, unwrap_track, AngleTrack,
    SolidAngles, SpinMoments,
};
use crate::model::{canonical_phase, drive_hamiltonian, drive_params, CouplingParams};
use crate::spin1::{matmul, CMatrix3, Hermitian3, SpinState, C64, ZERO};
use crate::topology::{wilson_loop_phase, LoopShape, LoopSpec};

/// `pi / k0` used by the trapped-ion experiment, in seconds.
pub const DEFAULT_HALF_PERIOD: f64 = 10.67e-6;
/// Default ramp duration, in seconds.
pub const DEFAULT_RAMP_TIME: f64 = 1e-3;

/// Energy scale `k0 = pi / 10.67 us` in rad/s.
pub fn default_k0() -> f64 {
    std::f64::consts::PI / DEFAULT_HALF_PERIOD
}

/// Constant-rate ramp `tau(t) = 2 pi t / T` around a loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    /// Loop geometry and couplings; `loop_spec.k0` is in rad/s.
    pub loop_spec: LoopSpec,
    pub total_time: f64,
}

impl RampSchedule {
    pub fn new(loop_spec: LoopSpec, total_time: f64) -> Result<Self> {
        if !(total_time > 0.0) || !total_time.is_finite() {
            return Err(Error::InvalidInput(format!(
                "ramp time must be positive, got {total_time}"
            )));
        }
        Ok(RampSchedule {
            loop_spec,
            total_time,
        })
    }

    pub fn tau(&self, t: f64) -> f64 {
        TAU * t / self.total_time
    }

    /// Drive Hamiltonian (rad/s) at time `t`.
    pub fn hamiltonian(&self, t: f64) -> Hermitian3 {
        let p = self.loop_spec.point(self.tau(t));
        drive_hamiltonian(&drive_params(&p, &self.loop_spec.couplings))
    }

    /// Upper bound on `|H(t)|` over the ramp, sampled.
    fn norm_bound(&self) -> f64 {
        (0..=64)
            .map(|j| self.hamiltonian(self.total_time * j as f64 / 64.0).norm())
            .fold(0.0, f64::max)
    }
}

/// Pure dephasing by the three level projectors with rates `gamma_k`.
///
/// The coherence between levels `i` and `j` decays at `(gamma_i + gamma_j) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingModel {
    /// Target coherence times `(T2_12, T2_23, T2_13)` in seconds.
    pub coherence_times: [f64; 3],
    /// Projector rates in 1/s.
    pub rates: [f64; 3],
    /// Euclidean misfit of the coherence decay rates, in 1/s.
    pub residual: f64,
}

const PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (0, 2)];

impl DephasingModel {
    /// Non-negative least-squares rates reproducing the coherence times.
    pub fn fit(t2_12: f64, t2_23: f64, t2_13: f64) -> Result<Self> {
        let times = [t2_12, t2_23, t2_13];
        if times.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "coherence times must be positive: {times:?}"
            )));
        }
        let target = times.map(|t| 1.0 / t);
        let mut best: Option<([f64; 3], f64)> = None;
        for mask in 0u8..8 {
            let free: Vec<usize> = (0..3).filter(|k| mask & (1 << k) != 0).collect();
            let Some(rates) = restricted_least_squares(&free, &target) else {
                continue;
            };
            if rates.iter().any(|&r| r < 0.0) {
                continue;
            }
            let res = misfit(&rates, &target);
            if best.is_none_or(|(_, b)| res < b - 1e-15) {
                best = Some((rates, res));
            }
        }
        let (rates, residual) = best.expect("the all-zero rate vector is always feasible");
        Ok(DephasingModel {
            coherence_times: times,
            rates,
            residual,
        })
    }

    /// Measured coherence times of the trapped-ion qutrit.
    pub fn experimental() -> Self {
        Self::fit(2.8e-3, 0.89e-3, 6e-3).expect("positive times")
    }

    pub fn zero() -> Self {
        DephasingModel {
            coherence_times: [f64::INFINITY; 3],
            rates: [0.0; 3],
            residual: 0.0,
        }
    }

    /// Decay rate of the `(i, j)` coherence.
    pub fn coherence_rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            0.5 * (self.rates[i] + self.rates[j])
        }
    }
}

fn pair_rates(rates: &[f64; 3]) -> [f64; 3] {
    PAIRS.map(|(i, j)| 0.5 * (rates[i] + rates[j]))
}

fn misfit(rates: &[f64; 3], target: &[f64; 3]) -> f64 {
    let got = pair_rates(rates);
    (0..3)
        .map(|k| (got[k] - target[k]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Least squares over the `free` rates with the others pinned to zero.
fn restricted_least_squares(free: &[usize], target: &[f64; 3]) -> Option<[f64; 3]> {
    let mut rates = [0.0; 3];
    if free.is_empty() {
        return Some(rates);
    }
    // Design matrix rows = pairs, columns = free rates.
    let col = |k: usize, row: usize| -> f64 {
        let (i, j) = PAIRS[row];
        if k == i || k == j {
            0.5
        } else {
            0.0
        }
    };
    let m = free.len();
    let mut ata = vec![vec![0.0; m]; m];
    let mut atb = vec![0.0; m];
    for a in 0..m {
        for row in 0..3 {
            atb[a] += col(free[a], row) * target[row];
            for b in 0..m {
                ata[a][b] += col(free[a], row) * col(free[b], row);
            }
        }
    }
    let x = solve_small(ata, atb)?;
    for (a, &k) in free.iter().enumerate() {
        rates[k] = x[a];
    }
    Some(rates)
}

pub(crate) fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Three-level density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(CMatrix3);

impl DensityMatrix {
    pub fn new(m: CMatrix3) -> Result<Self> {
        let h = Hermitian3::new(m)?;
        let tr = h.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "density matrix trace {tr} != 1"
            )));
        }
        let rho = DensityMatrix(m);
        let min = rho.min_eigenvalue();
        if min < -1e-10 {
            return Err(Error::NotPhysical(min));
        }
        Ok(rho)
    }

    pub fn from_pure(s: &SpinState) -> Self {
        let a = s.amplitudes();
        let mut m = [[ZERO; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = a[i] * a[j].conj();
            }
        }
        DensityMatrix(m)
    }

    pub fn matrix(&self) -> &CMatrix3 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        (0..3).map(|i| self.0[i][i].re).sum()
    }

    pub fn purity(&self) -> f64 {
        let mut p = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                p += self.0[i][j].norm_sqr();
            }
        }
        p
    }

    pub fn populations(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.0[i][i].re)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        Hermitian3::symmetrized(self.0).eigensystem().values[0]
    }

    pub fn moments(&self) -> SpinMoments {
        moments_of_density(&self.0)
    }

    /// `<s| rho |s>`.
    pub fn fidelity_with(&self, s: &SpinState) -> f64 {
        let a = s.amplitudes();
        let mut f = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                f += a[i].conj() * self.0[i][j] * a[j];
            }
        }
        f.re
    }
}

fn schrodinger_rhs(h: &Hermitian3, psi: &[C64; 3]) -> [C64; 3] {
    let hv = h.apply(psi);
    hv.map(|z| C64::new(z.im, -z.re))
}

fn rk4_state(
    h: &(impl Fn(f64) -> Hermitian3 + ?Sized),
    t: f64,
    dt: f64,
    psi: &[C64; 3],
) -> [C64; 3] {
    let h0 = h(t);
    let hm = h(t + 0.5 * dt);
    let h1 = h(t + dt);
    let add = |a: &[C64; 3], k: &[C64; 3], s: f64| [0, 1, 2].map(|i| a[i] + k[i] * s);
    let k1 = schrodinger_rhs(&h0, psi);
    let k2 = schrodinger_rhs(&hm, &add(psi, &k1, 0.5 * dt));
    let k3 = schrodinger_rhs(&hm, &add(psi, &k2, 0.5 * dt));
    let k4 = schrodinger_rhs(&h1, &add(psi, &k3, dt));
    let out = [0, 1, 2].map(|i| psi[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0));
    let norm = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    out.map(|z| z / norm)
}

fn lindblad_rhs(h: &Hermitian3, model: &DephasingModel, rho: &CMatrix3) -> CMatrix3 {
    let hm = h.matrix();
    let hr = matmul(hm, rho);
    let rh = matmul(rho, hm);
    let mut out = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let comm = hr[i][j] - rh[i][j];
            out[i][j] = C64::new(comm.im, -comm.re) - rho[i][j] * model.coherence_rate(i, j);
        }
    }
    out
}

fn rk4_density(
    h: &(impl Fn(f64) -> Hermitian3 + ?Sized),
    model: &DephasingModel,
    t: f64,
    dt: f64,
    rho: &CMatrix3,
) -> CMatrix3 {
    let h0 = h(t);
    let hm = h(t + 0.5 * dt);
    let h1 = h(t + dt);
    let add = |a: &CMatrix3, k: &CMatrix3, s: f64| {
        let mut o = *a;
        for i in 0..3 {
            for j in 0..3 {
                o[i][j] += k[i][j] * s;
            }
        }
        o
    };
    let k1 = lindblad_rhs(&h0, model, rho);
    let k2 = lindblad_rhs(&hm, model, &add(rho, &k1, 0.5 * dt));
    let k3 = lindblad_rhs(&hm, model, &add(rho, &k2, 0.5 * dt));
    let k4 = lindblad_rhs(&h1, model, &add(rho, &k3, dt));
    let mut out = *rho;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += (k1[i][j] + k2[i][j] * 2.0 + k3[i][j] * 2.0 + k4[i][j]) * (dt / 6.0);
        }
    }
    out
}

/// Audit threshold on `1 - fidelity` between runs at `dt` and `dt / 2`.
pub const STEP_AUDIT_TOL: f64 = 1e-10;

fn validate_timing(total_time: f64, dt: f64, samples: usize) -> Result<usize> {
    if !(total_time > 0.0) || !(dt > 0.0) || samples == 0 {
        return Err(Error::InvalidInput(format!(
            "need positive total time, step and sample count (T={total_time}, dt={dt}, samples={samples})"
        )));
    }
    Ok(((total_time / samples as f64) / dt).ceil().max(1.0) as usize)
}

fn run_state(
    h: &(impl Fn(f64) -> Hermitian3 + Sync + ?Sized),
    psi0: &SpinState,
    total_time: f64,
    samples: usize,
    steps_per_sample: usize,
) -> Vec<(f64, SpinState)> {
    let dt = total_time / (samples * steps_per_sample) as f64;
    let mut psi = *psi0.amplitudes();
    let mut out = Vec::with_capacity(samples + 1);
    out.push((0.0, *psi0));
    for s in 0..samples {
        for k in 0..steps_per_sample {
            let t = (s * steps_per_sample + k) as f64 * dt;
            psi = rk4_state(h, t, dt, &psi);
        }
        let t = total_time * (s + 1) as f64 / samples as f64;
        out.push((t, SpinState::from_normalized(psi)));
    }
    out
}

/// Integrates `i d psi/dt = H(t) psi` over `[0, T]` with fixed-step RK4.
///
/// Returns `samples + 1` equally spaced snapshots (both ends included). The
/// step is shrunk to fit an integer number of steps per snapshot, and the run
/// is repeated at half that step; the finer run is returned if the final
/// states agree to `1 - F < 1e-10`.
pub fn evolve_schrodinger(
    h: &(impl Fn(f64) -> Hermitian3 + Sync + ?Sized),
    psi0: &SpinState,
    total_time: f64,
    dt: f64,
    samples: usize,
) -> Result<Vec<(f64, SpinState)>> {
    let m = validate_timing(total_time, dt, samples)?;
    let coarse = run_state(h, psi0, total_time, samples, m);
    let fine = run_state(h, psi0, total_time, samples, 2 * m);
    let gap = 1.0 - coarse[samples].1.fidelity(&fine[samples].1);
    if gap > STEP_AUDIT_TOL {
        return Err(Error::StepTooLarge(gap));
    }
    Ok(fine)
}

fn run_density(
    h: &(impl Fn(f64) -> Hermitian3 + Sync + ?Sized),
    rho0: &DensityMatrix,
    model: &DephasingModel,
    total_time: f64,
    samples: usize,
    steps_per_sample: usize,
) -> Vec<(f64, DensityMatrix)> {
    let dt = total_time / (samples * steps_per_sample) as f64;
    let mut rho = rho0.0;
    let mut out = Vec::with_capacity(samples + 1);
    out.push((0.0, *rho0));
    for s in 0..samples {
        for k in 0..steps_per_sample {
            let t = (s * steps_per_sample + k) as f64 * dt;
            rho = rk4_density(h, model, t, dt, &rho);
        }
        let t = total_time * (s + 1) as f64 / samples as f64;
        out.push((t, DensityMatrix(rho)));
    }
    out
}

fn density_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let mut d = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            d += (a.0[i][j] - b.0[i][j]).norm_sqr();
        }
    }
    d
}

/// Integrates the dephasing master equation with fixed-step RK4.
///
/// Snapshots and the step audit follow [`evolve_schrodinger`]; the audit
/// compares the squared Frobenius distance of the final density matrices.
pub fn evolve_lindblad(
    h: &(impl Fn(f64) -> Hermitian3 + Sync + ?Sized),
    rho0: &DensityMatrix,
    model: &DephasingModel,
    total_time: f64,
    dt: f64,
    samples: usize,
) -> Result<Vec<(f64, DensityMatrix)>> {
    let m = validate_timing(total_time, dt, samples)?;
    let coarse = run_density(h, rho0, model, total_time, samples, m);
    let fine = run_density(h, rho0, model, total_time, samples, 2 * m);
    let gap = density_distance(&coarse[samples].1, &fine[samples].1);
    if gap > STEP_AUDIT_TOL {
        return Err(Error::StepTooLarge(gap));
    }
    Ok(fine)
}

/// One sampled point of a ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSample {
    pub tau: f64,
    pub moments: SpinMoments,
    pub purity: f64,
    /// Population of the instantaneous ground state.
    pub ground_population: f64,
}

/// Result of an adiabatic loop ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRun {
    pub samples: Vec<RampSample>,
    pub track: AngleTrack,
    pub flux: SolidAngles,
    /// Some sample has purity below `1 - 1e-3`.
    pub purity_warning: bool,
}

impl LoopRun {
    /// Berry flux from the moments, `gamma_F + gamma_T + boundary`.
    pub fn gamma(&self) -> f64 {
        self.flux.total()
    }
}

const MAX_REFINEMENTS: u32 = 8;

/// Ramps the exact ground state of `H(tau = 0)` around the loop and extracts
/// the Berry flux from the sampled moments.
///
/// `tau_samples` snapshots are taken (plus the closing one). The integration
/// step starts at `0.05 / max|H|` and is halved until the step audit passes.
pub fn adiabatic_loop_run(
    sched: &RampSchedule,
    model: Option<&DephasingModel>,
    tau_samples: usize,
) -> Result<LoopRun> {
    let h = |t: f64| sched.hamiltonian(t);
    let psi0 = h(0.0)
        .eigensystem()
        .band_state(0, 1e-9 * sched.loop_spec.k0)?;
    let mut dt = 0.05 / sched.norm_bound().max(f64::MIN_POSITIVE);
    let mut last_err = None;
    for _ in 0..MAX_REFINEMENTS {
        let attempt: Result<Vec<(f64, DensityMatrix)>> = match model {
            None => evolve_schrodinger(&h, &psi0, sched.total_time, dt, tau_samples).map(|tr| {
                tr.into_iter()
                    .map(|(t, s)| (t, DensityMatrix::from_pure(&s)))
                    .collect()
            }),
            Some(m) => evolve_lindblad(
                &h,
                &DensityMatrix::from_pure(&psi0),
                m,
                sched.total_time,
                dt,
                tau_samples,
            ),
        };
        match attempt {
            Ok(traj) => return finish_run(sched, &traj),
            Err(e @ Error::StepTooLarge(_)) => {
                last_err = Some(e);
                dt /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(Error::StepTooLarge(f64::NAN)))
}

fn finish_run(sched: &RampSchedule, traj: &[(f64, DensityMatrix)]) -> Result<LoopRun> {
    let samples: Vec<RampSample> = traj
        .par_iter()
        .map(|(t, rho)| {
            let ground = sched.hamiltonian(*t).eigensystem().vectors[0];
            RampSample {
                tau: sched.tau(*t),
                moments: rho.moments(),
                purity: rho.purity(),
                ground_population: rho.fidelity_with(&ground),
            }
        })
        .collect();
    let raw = samples
        .iter()
        .map(|s| chart_sample(s.tau, &s.moments))
        .collect::<Result<Vec<_>>>()?;
    let track = unwrap_track(&raw)?;
    let flux = generalized_solid_angles(&track);
    let purity_warning = samples.iter().any(|s| s.purity < 1.0 - 1e-3);
    Ok(LoopRun {
        samples,
        track,
        flux,
        purity_warning,
    })
}

/// Snapshot count used for flux extraction along ramps.
pub const DEFAULT_TAU_SAMPLES: usize = 2048;

/// `|gamma(T) - gamma_adiabatic|` (wrapped) on the small loop of radius `r`,
/// one entry per ramp time.
pub fn adiabaticity_bias(
    c: &CouplingParams,
    r: f64,
    ramp_times: &[f64],
    k0: f64,
) -> Result<Vec<(f64, f64)>> {
    let lp = LoopSpec::new(LoopShape::small(r), 64, k0, *c)?;
    let ideal = wilson_loop_phase(&lp, 0)?;
    ramp_times
        .par_iter()
        .map(|&t| {
            let sched = RampSchedule::new(lp.clone(), t)?;
            let run = adiabatic_loop_run(&sched, None, DEFAULT_TAU_SAMPLES)?;
            Ok((t, canonical_phase(run.gamma() - ideal).abs()))
        })
        .collect()
}

/// Writes a run as CSV: `tau`, the nine moments, chart angles and purity.
pub fn write_trajectory_csv(mut w: impl Write, run: &LoopRun) -> std::io::Result<()> {
    writeln!(
        w,
        "tau,Fx,Fy,Fz,Nxx,Nyy,Nzz,Nxy,Nxz,Nyz,F,theta_F,phi_F,phi_T,purity"
    )?;
    for (s, t) in run.samples.iter().zip(run.track.samples.iter()) {
        let (f, n) = (s.moments.f, s.moments.n);
        let a = t.angles;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.tau,
            f[0],
            f[1],
            f[2],
            n[0][0],
            n[1][1],
            n[2][2],
            n[0][1],
            n[0][2],
            n[1][2],
            a.f_len,
            a.theta_f,
            a.phi_f,
            a.phi_t,
            s.purity
        )?;
    }
    Ok(())
}

/// Fidelity of `s` with the instantaneous ground state at time `t`.
pub fn ground_state_fidelity(sched: &RampSchedule, t: f64, s: &SpinState) -> f64 {
    s.fidelity(&sched.hamiltonian(t).eigensystem().vectors[0])
}
