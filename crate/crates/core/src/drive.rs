//! Two-channel drive synthesis: `f(t) = A(t) cos(w t + int delta + phi(t))`,
//! the rotating-frame phase bookkeeping, and I/Q demodulation for checking
//! compiled waveforms.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::RampSchedule;
use crate::error::{Error, Result};
use crate::model::{drive_params, DriveParams};
use crate::spin1::C64;

/// Resonant carrier of the `psi1 <-> psi2` transition, rad/s.
pub const OMEGA_12: f64 = TAU * 118.966e6;
/// Resonant carrier of the `psi2 <-> psi3` transition, rad/s.
pub const OMEGA_23: f64 = TAU * 991.570e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "12")]
    C12,
    #[serde(rename = "23")]
    C23,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::C12, Channel::C23];

    fn index(self) -> usize {
        match self {
            Channel::C12 => 0,
            Channel::C23 => 1,
        }
    }
}

/// Carrier frequencies, sample clock and per-channel amplitude calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierConfig {
    pub omega12: f64,
    pub omega23: f64,
    /// Samples per second.
    pub sample_rate: f64,
    /// Waveform amplitude per unit Rabi rate, per channel.
    #[serde(default = "unit_calibration")]
    pub calibration: [f64; 2],
}

fn unit_calibration() -> [f64; 2] {
    [1.0, 1.0]
}

impl CarrierConfig {
    pub fn new(omega12: f64, omega23: f64, sample_rate: f64) -> Result<Self> {
        let cfg = CarrierConfig {
            omega12,
            omega23,
            sample_rate,
            calibration: unit_calibration(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Requires the sample rate to exceed ten times the highest carrier frequency.
    pub fn validate(&self) -> Result<()> {
        let carrier_hz = self.omega12.abs().max(self.omega23.abs()) / TAU;
        if !(self.sample_rate > 10.0 * carrier_hz) {
            return Err(Error::NyquistViolation {
                sample_rate: self.sample_rate,
                carrier_hz,
            });
        }
        Ok(())
    }

    pub fn carrier(&self, ch: Channel) -> f64 {
        match ch {
            Channel::C12 => self.omega12,
            Channel::C23 => self.omega23,
        }
    }
}

/// Drive parameters sampled at increasing times; linear in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveTrajectory {
    pub times: Vec<f64>,
    pub params: Vec<DriveParams>,
}

impl DriveTrajectory {
    pub fn new(times: Vec<f64>, mut params: Vec<DriveParams>) -> Result<Self> {
        if times.len() < 2 || times.len() != params.len() {
            return Err(Error::InvalidInput(
                "trajectory needs >= 2 samples with matching times".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "trajectory times must increase strictly".into(),
            ));
        }
        // Phases are continued across the branch cut so interpolation never
        // sweeps through a spurious 2 pi.
        for k in 1..params.len() {
            let (p12, p23) = (params[k - 1].phi12, params[k - 1].phi23);
            params[k].phi12 = lift(p12, params[k].phi12);
            params[k].phi23 = lift(p23, params[k].phi23);
        }
        Ok(DriveTrajectory { times, params })
    }

    /// `samples + 1` equally spaced points of a ramp's drive parameters.
    pub fn from_schedule(sched: &RampSchedule, samples: usize) -> Result<Self> {
        if samples < 1 {
            return Err(Error::InvalidInput(
                "need at least one trajectory interval".into(),
            ));
        }
        let times: Vec<f64> = (0..=samples)
            .map(|k| sched.total_time * k as f64 / samples as f64)
            .collect();
        let params = times
            .iter()
            .map(|&t| {
                drive_params(
                    &sched.loop_spec.point(sched.tau(t)),
                    &sched.loop_spec.couplings,
                )
            })
            .collect();
        Self::new(times, params)
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.times.len();
        let k = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        (
            k,
            (t - self.times[k]).clamp(0.0, self.times[k + 1] - self.times[k]),
        )
    }

    /// Linearly interpolated parameters at `t` (clamped to the ends).
    pub fn at(&self, t: f64) -> DriveParams {
        let (k, s) = self.locate(t);
        let h = self.times[k + 1] - self.times[k];
        let w = s / h;
        let (a, b) = (&self.params[k], &self.params[k + 1]);
        let mix = |x: f64, y: f64| x + w * (y - x);
        DriveParams {
            delta12: mix(a.delta12, b.delta12),
            delta23: mix(a.delta23, b.delta23),
            omega12: mix(a.omega12, b.omega12),
            omega23: mix(a.omega23, b.omega23),
            phi12: mix(a.phi12, b.phi12),
            phi23: mix(a.phi23, b.phi23),
        }
    }

    fn detuning(&self, k: usize, ch: Channel) -> f64 {
        match ch {
            Channel::C12 => self.params[k].delta12,
            Channel::C23 => self.params[k].delta23,
        }
    }

    /// `int_{t0}^{t_k} delta` at every knot, by trapezoid (exact for linear delta).
    fn knot_integrals(&self, ch: Channel) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.times.len());
        acc.push(0.0);
        for k in 1..self.times.len() {
            let h = self.times[k] - self.times[k - 1];
            acc.push(acc[k - 1] + 0.5 * h * (self.detuning(k - 1, ch) + self.detuning(k, ch)));
        }
        acc
    }

    fn integral_at(&self, knots: &[f64], ch: Channel, t: f64) -> f64 {
        let (k, s) = self.locate(t);
        let h = self.times[k + 1] - self.times[k];
        let (d0, d1) = (self.detuning(k, ch), self.detuning(k + 1, ch));
        knots[k] + d0 * s + (d1 - d0) * s * s / (2.0 * h)
    }
}

fn lift(prev: f64, raw: f64) -> f64 {
    raw + TAU * ((prev - raw) / TAU).round()
}

/// Sampled real waveform of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub channel: Channel,
    pub t0: f64,
    pub dt: f64,
    /// Carrier angular frequency; zero for baseband envelopes.
    pub carrier: f64,
    pub samples: Vec<f64>,
}

/// Compiles both channels onto the carriers.
///
/// Each channel holds `ceil(T * sample_rate)` samples of
/// `cal * Omega(t) cos(w t + int_0^t delta + phi(t))`.
pub fn compile_waveforms(
    traj: &DriveTrajectory,
    carriers: &CarrierConfig,
) -> Result<[Waveform; 2]> {
    carriers.validate()?;
    let dt = 1.0 / carriers.sample_rate;
    let n = (traj.duration() * carriers.sample_rate).ceil() as usize;
    let t0 = traj.times[0];
    Ok(Channel::BOTH.map(|ch| {
        let knots = traj.knot_integrals(ch);
        let w = carriers.carrier(ch);
        let cal = carriers.calibration[ch.index()];
        let samples = (0..n)
            .map(|k| {
                let t = t0 + k as f64 * dt;
                let (amp, phase) = envelope_at(traj, &knots, ch, t);
                cal * amp * (w * (t - t0) + phase).cos()
            })
            .collect();
        Waveform {
            channel: ch,
            t0,
            dt,
            carrier: w,
            samples,
        }
    }))
}

fn envelope_at(traj: &DriveTrajectory, knots: &[f64], ch: Channel, t: f64) -> (f64, f64) {
    let p = traj.at(t);
    let (amp, phi) = match ch {
        Channel::C12 => (p.omega12, p.phi12),
        Channel::C23 => (p.omega23, p.phi23),
    };
    (amp, traj.integral_at(knots, ch, t) + phi)
}

/// Carrier-free complex envelope `cal * Omega e^{i (int delta + phi)}` per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub channel: Channel,
    pub t0: f64,
    pub dt: f64,
    pub amplitude: Vec<f64>,
    /// Unwrapped `int delta + phi`.
    pub phase: Vec<f64>,
}

impl Envelope {
    pub fn phasor(&self, k: usize) -> C64 {
        C64::from_polar(self.amplitude[k], self.phase[k])
    }
}

/// Baseband mode: the envelopes the carrier waveforms would carry, sampled at `dt`.
pub fn compile_baseband(
    traj: &DriveTrajectory,
    dt: f64,
    calibration: [f64; 2],
) -> Result<[Envelope; 2]> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "baseband step must be positive, got {dt}"
        )));
    }
    let n = (traj.duration() / dt).ceil() as usize;
    let t0 = traj.times[0];
    Ok(Channel::BOTH.map(|ch| {
        let knots = traj.knot_integrals(ch);
        let cal = calibration[ch.index()];
        let (amplitude, phase) = (0..n)
            .map(|k| {
                let (a, p) = envelope_at(traj, &knots, ch, t0 + k as f64 * dt);
                (cal * a, p)
            })
            .unzip();
        Envelope {
            channel: ch,
            t0,
            dt,
            amplitude,
            phase,
        }
    }))
}

/// Rotating-frame phases `Phi_ij(t) = -int_0^t delta_ij` at the trajectory knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePhase {
    pub times: Vec<f64>,
    pub phi12: Vec<f64>,
    pub phi23: Vec<f64>,
    #[serde(skip)]
    traj: Option<DriveTrajectory>,
}

impl FramePhase {
    /// Exact value between knots for piecewise-linear detunings.
    pub fn at(&self, t: f64) -> (f64, f64) {
        match &self.traj {
            Some(traj) => {
                let k12 = self.phi12.iter().map(|x| -x).collect::<Vec<_>>();
                let k23 = self.phi23.iter().map(|x| -x).collect::<Vec<_>>();
                (
                    -traj.integral_at(&k12, Channel::C12, t),
                    -traj.integral_at(&k23, Channel::C23, t),
                )
            }
            None => {
                let k = self
                    .times
                    .partition_point(|&x| x <= t)
                    .clamp(1, self.times.len() - 1)
                    - 1;
                let w = ((t - self.times[k]) / (self.times[k + 1] - self.times[k])).clamp(0.0, 1.0);
                (
                    self.phi12[k] + w * (self.phi12[k + 1] - self.phi12[k]),
                    self.phi23[k] + w * (self.phi23[k + 1] - self.phi23[k]),
                )
            }
        }
    }
}

/// Cumulative trapezoid of the detunings, negated.
pub fn accumulated_phase(traj: &DriveTrajectory) -> FramePhase {
    let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<_>>();
    FramePhase {
        times: traj.times.iter().map(|t| t - traj.times[0]).collect(),
        phi12: neg(traj.knot_integrals(Channel::C12)),
        phi23: neg(traj.knot_integrals(Channel::C23)),
        traj: Some(traj.clone()),
    }
}

/// Phase shifts for the analysis pulses at measurement time `t_m`:
/// `(-1)^i Phi(t_m)` with `i = 1` for the 12 channel and `i = 2` for 23.
pub fn measurement_compensation(fp: &FramePhase, t_m: f64) -> (f64, f64) {
    let (p12, p23) = fp.at(t_m);
    (-p12, p23)
}

/// Low-pass window length for a carrier: ten carrier periods.
fn filter_length(carrier: f64, dt: f64) -> usize {
    let period = TAU / carrier.abs();
    ((10.0 * period / dt).round() as usize).max(8)
}

fn blackman_harris(n: usize) -> Vec<f64> {
    let a = [0.35875, 0.48829, 0.14128, 0.01168];
    let m = n as f64;
    let w: Vec<f64> = (0..n)
        .map(|k| {
            let x = TAU * (k as f64 + 0.5) / m;
            a[0] - a[1] * x.cos() + a[2] * (2.0 * x).cos() - a[3] * (3.0 * x).cos()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Valid-mode convolution (output `k` covers inputs `k .. k + w.len()`).
fn convolve_valid(x: &[C64], w: &[f64]) -> Vec<C64> {
    if x.len() < w.len() {
        return Vec::new();
    }
    (0..=x.len() - w.len())
        .map(|k| w.iter().zip(&x[k..]).map(|(wi, xi)| xi * *wi).sum())
        .collect()
}

/// Recovered envelope of a carrier waveform.
pub type Demodulated = Envelope;

/// Mixes the waveform down with `carrier` and low-passes it twice with a
/// Blackman-Harris window spanning ten carrier periods. Only interior samples
/// (full filter support) are returned; `t0` is shifted accordingly.
pub fn demodulate(w: &Waveform, carrier: f64) -> Result<Demodulated> {
    let sample_rate = 1.0 / w.dt;
    let carrier_hz = carrier.abs() / TAU;
    if !(sample_rate > 10.0 * carrier_hz) {
        return Err(Error::NyquistViolation {
            sample_rate,
            carrier_hz,
        });
    }
    let mixed: Vec<C64> = w
        .samples
        .iter()
        .enumerate()
        .map(|(k, &x)| C64::from_polar(2.0 * x, -carrier * k as f64 * w.dt))
        .collect();
    let win = blackman_harris(filter_length(carrier, w.dt));
    let once = convolve_valid(&mixed, &win);
    let twice = convolve_valid(&once, &win);
    let shift = (win.len() - 1) as f64 * w.dt;
    let amplitude = twice.iter().map(|z| z.norm()).collect();
    let mut phase: Vec<f64> = Vec::with_capacity(twice.len());
    for z in &twice {
        let raw = z.arg();
        phase.push(match phase.last() {
            Some(&p) => lift(p, raw),
            None => raw,
        });
    }
    Ok(Envelope {
        channel: w.channel,
        t0: w.t0 + shift,
        dt: w.dt,
        amplitude,
        phase,
    })
}

/// Largest phasor error of `demodulate(compile(traj))` against the compiled
/// envelope, relative to the channel's peak amplitude.
pub fn round_trip_error(traj: &DriveTrajectory, carriers: &CarrierConfig) -> Result<[f64; 2]> {
    let waves = compile_waveforms(traj, carriers)?;
    let mut out = [0.0; 2];
    for (i, w) in waves.iter().enumerate() {
        let ch = w.channel;
        let rec = demodulate(w, w.carrier)?;
        let knots = traj.knot_integrals(ch);
        let cal = carriers.calibration[ch.index()];
        let peak = traj
            .params
            .iter()
            .map(|p| match ch {
                Channel::C12 => p.omega12,
                Channel::C23 => p.omega23,
            })
            .fold(0.0, f64::max)
            * cal;
        let mut worst: f64 = 0.0;
        for k in 0..rec.amplitude.len() {
            let t = rec.t0 + k as f64 * rec.dt;
            let (a, p) = envelope_at(traj, &knots, ch, t);
            let truth = C64::from_polar(cal * a, p);
            worst = worst.max((rec.phasor(k) - truth).norm());
        }
        out[i] = if peak > 0.0 { worst / peak } else { worst };
    }
    Ok(out)
}

/// JSON sidecar describing a binary waveform file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveformSidecar {
    pub channel: Channel,
    pub t0: f64,
    pub dt: f64,
    pub carrier: f64,
    pub samples: usize,
    pub format: String,
}

/// Writes `<stem>.bin` (little-endian f64) and `<stem>.json`.
pub fn write_waveform_binary(w: &Waveform, dir: &Path, stem: &str) -> std::io::Result<()> {
    let mut bytes = Vec::with_capacity(8 * w.samples.len());
    for x in &w.samples {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    std::fs::write(dir.join(format!("{stem}.bin")), bytes)?;
    let side = WaveformSidecar {
        channel: w.channel,
        t0: w.t0,
        dt: w.dt,
        carrier: w.carrier,
        samples: w.samples.len(),
        format: "f64le".into(),
    };
    let json = serde_json::to_string_pretty(&side).map_err(std::io::Error::other)?;
    std::fs::write(dir.join(format!("{stem}.json")), json)
}

pub fn read_waveform_binary(dir: &Path, stem: &str) -> std::io::Result<Waveform> {
    let side: WaveformSidecar =
        serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)
            .map_err(std::io::Error::other)?;
    let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Waveform {
        channel: side.channel,
        t0: side.t0,
        dt: side.dt,
        carrier: side.carrier,
        samples,
    })
}

/// CSV with columns `t,value`.
pub fn write_waveform_csv(mut out: impl Write, w: &Waveform) -> std::io::Result<()> {
    writeln!(out, "t,value")?;
    for (k, x) in w.samples.iter().enumerate() {
        writeln!(out, "{},{}", w.t0 + k as f64 * w.dt, x)?;
    }
    Ok(())
}

/// Carriers scaled down for round-trip tests: the 12 carrier as is, the 23
/// carrier divided by ten, sampled at 1.5 GS/s.
pub fn test_carriers() -> CarrierConfig {
    CarrierConfig::new(OMEGA_12, OMEGA_23 / 10.0, 1.5e9).expect("valid test carriers")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::default_k0;
    use crate::model::CouplingParams;
    use crate::topology::{LoopShape, LoopSpec};

    fn constant(d: DriveParams, t: f64) -> DriveTrajectory {
        DriveTrajectory::new(vec![0.0, t], vec![d, d]).unwrap()
    }

    fn loop_traj(beta: f64, t: f64, samples: usize) -> DriveTrajectory {
        let lp = LoopSpec::new(
            LoopShape::small(0.2),
            64,
            default_k0(),
            CouplingParams::new(0.0, beta),
        )
        .unwrap();
        DriveTrajectory::from_schedule(&RampSchedule::new(lp, t).unwrap(), samples).unwrap()
    }

    #[test]
    fn nyquist_guard() {
        assert!(matches!(
            CarrierConfig::new(OMEGA_12, OMEGA_23, 1.5e9),
            Err(Error::NyquistViolation { .. })
        ));
        assert!(CarrierConfig::new(OMEGA_12, OMEGA_23, 1e10).is_ok());
    }

    #[test]
    fn constant_drive_is_pure_cosine() {
        let d = DriveParams {
            omega12: 0.7,
            omega23: 0.3,
            ..Default::default()
        };
        let cfg = test_carriers();
        let w = compile_waveforms(&constant(d, 1e-7), &cfg).unwrap();
        assert_eq!(w[0].samples.len(), (1e-7f64 * 1.5e9).ceil() as usize);
        for (k, x) in w[0].samples.iter().enumerate() {
            let t = k as f64 * w[0].dt;
            assert!((x - 0.7 * (OMEGA_12 * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn detuning_shifts_zero_crossings() {
        let delta = TAU * 5e6;
        let d = DriveParams {
            omega12: 1.0,
            omega23: 1.0,
            delta12: delta,
            ..Default::default()
        };
        let cfg = CarrierConfig::new(TAU * 20e6, TAU * 20e6, 1e10).unwrap();
        let w = compile_waveforms(&constant(d, 2e-6), &cfg).unwrap();
        let crossings: Vec<f64> = w[0]
            .samples
            .windows(2)
            .enumerate()
            .filter(|(_, p)| p[0] < 0.0 && p[1] >= 0.0)
            .map(|(k, p)| (k as f64 + p[0] / (p[0] - p[1])) * w[0].dt)
            .collect();
        let spacing =
            (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        let expected = TAU / (TAU * 20e6 + delta);
        assert!((spacing - expected).abs() / expected < 1e-6);
    }

    #[test]
    fn accumulated_phase_examples() {
        let d = DriveParams {
            delta12: 3.0,
            delta23: -2.0,
            ..Default::default()
        };
        let fp = accumulated_phase(&constant(d, 2.0));
        let (a, b) = fp.at(1.5);
        assert!((a + 4.5).abs() < 1e-12 && (b - 3.0).abs() < 1e-12);

        let n = 400;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let params = times
            .iter()
            .map(|t| DriveParams {
                delta12: (TAU * t).sin(),
                delta23: (2.0 * TAU * t).sin(),
                ..Default::default()
            })
            .collect();
        let fp = accumulated_phase(&DriveTrajectory::new(times, params).unwrap());
        let (a, b) = fp.at(1.0);
        assert!(a.abs() < 1e-9 && b.abs() < 1e-9);
    }

    #[test]
    fn compensation_examples() {
        let zero = accumulated_phase(&constant(DriveParams::default(), 1.0));
        assert_eq!(measurement_compensation(&zero, 0.4), (0.0, 0.0));
        let (d12, d23) = (2.0, 5.0);
        let fp = accumulated_phase(&constant(
            DriveParams {
                delta12: d12,
                delta23: d23,
                ..Default::default()
            },
            1.0,
        ));
        let (a, b) = measurement_compensation(&fp, 0.3);
        assert!((a - d12 * 0.3).abs() < 1e-12);
        assert!((b + d23 * 0.3).abs() < 1e-12);
    }

    #[test]
    fn constant_drive_round_trip() {
        let d = DriveParams {
            omega12: 1.3,
            omega23: 0.4,
            phi12: 0.7,
            phi23: -2.0,
            ..Default::default()
        };
        let cfg = test_carriers();
        let traj = constant(d, 2e-6);
        let w = compile_waveforms(&traj, &cfg).unwrap();
        let rec = demodulate(&w[0], cfg.omega12).unwrap();
        for k in 0..rec.amplitude.len() {
            assert!((rec.amplitude[k] - 1.3).abs() < 1e-6);
            assert!((rec.phase[k] - 0.7).abs() < 1e-6);
        }
        let rec = demodulate(&w[1], cfg.omega23).unwrap();
        for k in 0..rec.amplitude.len() {
            assert!((rec.amplitude[k] - 0.4).abs() < 1e-6);
            assert!((crate::model::canonical_phase(rec.phase[k] + 2.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn chirp_round_trip() {
        // delta(t) = kappa t, so the carrier phase gains kappa t^2 / 2.
        let kappa = 5e10;
        let t_end = 8e-6;
        let d0 = DriveParams {
            omega12: 1.0,
            omega23: 1.0,
            ..Default::default()
        };
        let d1 = DriveParams {
            delta12: kappa * t_end,
            delta23: kappa * t_end,
            ..d0
        };
        let traj = DriveTrajectory::new(vec![0.0, t_end], vec![d0, d1]).unwrap();
        let cfg = test_carriers();
        let w = compile_waveforms(&traj, &cfg).unwrap();
        let rec = demodulate(&w[0], cfg.omega12).unwrap();
        for k in 0..rec.phase.len() {
            let t = rec.t0 + k as f64 * rec.dt;
            assert!(
                (rec.phase[k] - 0.5 * kappa * t * t).abs() < 1e-5,
                "t={t}: {}",
                rec.phase[k]
            );
        }
    }

    #[test]
    fn loop_segment_round_trip() {
        // A 20 us slice of the ramp keeps the test quick; the full ramp runs
        // in the acceptance suite.
        let full = loop_traj(-1.9, 1e-3, 2000);
        let traj =
            DriveTrajectory::new(full.times[..41].to_vec(), full.params[..41].to_vec()).unwrap();
        let err = round_trip_error(&traj, &test_carriers()).unwrap();
        assert!(err[0] < 1e-4 && err[1] < 1e-4, "{err:?}");
    }

    #[test]
    fn binary_export_round_trip() {
        let d = DriveParams {
            omega12: 1.0,
            omega23: 1.0,
            ..Default::default()
        };
        let w = compile_waveforms(&constant(d, 1e-8), &test_carriers()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_waveform_binary(&w[0], dir.path(), "ch12").unwrap();
        assert_eq!(read_waveform_binary(dir.path(), "ch12").unwrap(), w[0]);
    }
}
