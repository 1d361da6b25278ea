//! Arrow/ellipsoid geometry of spin-1 states.
//!
//! A state is charted by `(F, theta_F, phi_F, phi_T)`: the length and direction
//! of the spin vector `<F>` and the azimuth of the tensor ellipsoid about it.
//! The reference state `[sqrt((1+F)/2), 0, sqrt((1-F)/2)]` has its arrow on
//! the north pole and its long transverse ellipsoid axis along `x`; `phi_T`
//! is therefore the azimuth of the long transverse axis once the arrow has
//! been rotated back to the pole. Only increments of `phi_T` enter the Berry
//! flux, and the axis is headless, so `phi_T` is defined modulo `pi`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin1::{
    c, spin_tensor_ops, spin_vector_ops, trace_product, CMatrix3, Hermitian3, SpinState, C64,
};

/// Below this spin-vector length the arrow direction is undefined.
pub const VECTOR_DEGENERATE_F: f64 = 1e-6;
/// `1 - F` below this marks a tensor-degenerate state.
pub const TENSOR_DEGENERATE_GAP: f64 = 1e-9;
/// Transverse axis-length (squared) splitting below which `phi_T` is undefined.
pub const TENSOR_DEGENERATE_SPLIT: f64 = 1e-7;
/// Steps between two states this close to `F = 1` carry no `phi_T` sampling bound.
const NEAR_COHERENT: f64 = 1e-4;
/// `sin(theta_F)` below which `phi_F` alone is not checked for continuity.
const NEAR_POLE: f64 = 0.2;

/// First and second spin moments `<F_i>` and `<N_ij>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinMoments {
    pub f: [f64; 3],
    pub n: [[f64; 3]; 3],
}

impl SpinMoments {
    pub fn vector_length(&self) -> f64 {
        norm3(&self.f)
    }
}

/// Principal axes of the covariance tensor. Sorted by ascending length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorEllipsoid {
    pub axes: [[f64; 3]; 3],
    pub lengths: [f64; 3],
}

/// `(F, theta_F, phi_F, phi_T)` chart of a spin-1 state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentAngles {
    pub f_len: f64,
    pub theta_f: f64,
    pub phi_f: f64,
    pub phi_t: f64,
}

pub fn moments(s: &SpinState) -> SpinMoments {
    let amps = s.amplitudes();
    let mut rho = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            rho[i][j] = amps[i] * amps[j].conj();
        }
    }
    moments_of_density(&rho)
}

/// Moments of a (possibly mixed) density matrix.
pub fn moments_of_density(rho: &CMatrix3) -> SpinMoments {
    let fops = spin_vector_ops();
    let nops = spin_tensor_ops();
    let f = [0, 1, 2].map(|i| trace_product(rho, &fops[i]));
    let n = [0, 1, 2].map(|i| [0, 1, 2].map(|j| trace_product(rho, &nops[i][j])));
    SpinMoments { f, n }
}

/// `T_ij = <N_ij> - <F_i><F_j> + 2 delta_ij / 3`.
pub fn covariance_tensor(m: &SpinMoments) -> Result<[[f64; 3]; 3]> {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = 0.5 * (m.n[i][j] + m.n[j][i]) - m.f[i] * m.f[j];
        }
        t[i][i] += 2.0 / 3.0;
    }
    let (values, _) = symmetric_eigen(&t);
    if values[0] < -1e-8 {
        return Err(Error::NotPhysical(values[0]));
    }
    Ok(t)
}

/// Principal axes and lengths (square roots of the eigenvalues) of `T`.
pub fn ellipsoid(t: &[[f64; 3]; 3]) -> TensorEllipsoid {
    let (values, vectors) = symmetric_eigen(t);
    TensorEllipsoid {
        axes: vectors,
        lengths: values.map(|v| v.max(0.0).sqrt()),
    }
}

/// Eigen-decomposition of a real symmetric 3x3 matrix: ascending eigenvalues
/// and unit eigenvectors.
pub(crate) fn symmetric_eigen(t: &[[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let h = Hermitian3::symmetrized(t.map(|row| row.map(c)));
    let es = h.eigensystem();
    let vectors = es.vectors.map(|v| {
        // Canonical phase makes the largest component real; the whole vector
        // is real up to that phase.
        let a = v.amplitudes();
        [a[0].re, a[1].re, a[2].re]
    });
    (es.values, vectors)
}

/// Builds `exp(-i F_z phi_F) exp(-i F_y theta_F) exp(-i F_z phi_T)` applied to
/// the reference state `[sqrt((1+F)/2), 0, sqrt((1-F)/2)]`.
pub fn state_from_angles(a: &MomentAngles) -> Result<SpinState> {
    if !(0.0..=1.0).contains(&a.f_len) {
        return Err(Error::InvalidInput(format!(
            "F = {} outside [0, 1]",
            a.f_len
        )));
    }
    let up = ((1.0 + a.f_len) / 2.0).sqrt();
    let down = ((1.0 - a.f_len) / 2.0).sqrt();
    let v = [
        C64::from_polar(up, -a.phi_t),
        C64::new(0.0, 0.0),
        C64::from_polar(down, a.phi_t),
    ];
    let d = wigner_small_d(a.theta_f);
    let mut w = [C64::new(0.0, 0.0); 3];
    for i in 0..3 {
        for j in 0..3 {
            w[i] += d[i][j] * v[j];
        }
    }
    let m = [1.0, 0.0, -1.0];
    let out = [0, 1, 2].map(|i| w[i] * C64::from_polar(1.0, -m[i] * a.phi_f));
    Ok(SpinState::from_normalized(out))
}

/// `exp(-i F_y beta)` in the `(+1, 0, -1)` basis.
pub fn wigner_small_d(beta: f64) -> [[f64; 3]; 3] {
    let (s, cb) = beta.sin_cos();
    let r = s / 2f64.sqrt();
    [
        [(1.0 + cb) / 2.0, -r, (1.0 - cb) / 2.0],
        [r, cb, -r],
        [(1.0 - cb) / 2.0, r, (1.0 + cb) / 2.0],
    ]
}

fn rot_z(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rot_y(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn mat3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose(a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Chart coordinates of a pure state.
pub fn canonical_angles(s: &SpinState) -> Result<MomentAngles> {
    angles_from_moments(&moments(s))
}

/// Chart coordinates computed from moments alone, as an experiment would.
/// Also applicable to mixed states, where `F < 1` does not imply the pure
/// state closed forms.
pub fn angles_from_moments(m: &SpinMoments) -> Result<MomentAngles> {
    let f_len = m.vector_length();
    if f_len < VECTOR_DEGENERATE_F {
        return Err(Error::VectorDegenerate(f_len));
    }
    let theta_f = (m.f[2] / f_len).clamp(-1.0, 1.0).acos();
    let phi_f = m.f[1].atan2(m.f[0]);
    if 1.0 - f_len < TENSOR_DEGENERATE_GAP {
        return Err(Error::TensorDegenerate(f_len));
    }
    let t = covariance_tensor(m)?;
    // Undo the arrow rotation: R = R_y(-theta_F) R_z(-phi_F), T' = R T R^T.
    let r = mat3(&rot_y(-theta_f), &rot_z(-phi_f));
    let tr = mat3(&mat3(&r, &t), &transpose(&r));
    let (a, b, d) = (tr[0][0], tr[0][1], tr[1][1]);
    let split = ((a - d).powi(2) + 4.0 * b * b).sqrt();
    if split < TENSOR_DEGENERATE_SPLIT {
        return Err(Error::TensorDegenerate(f_len));
    }
    let phi_t = 0.5 * (2.0 * b).atan2(a - d);
    Ok(MomentAngles {
        f_len,
        theta_f,
        phi_f,
        phi_t,
    })
}

/// One raw chart sample along a loop, before unwrapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub tau: f64,
    pub angles: MomentAngles,
    /// `phi_T` undefined here; the value is filled in by continuity.
    pub tensor_degenerate: bool,
}

/// Charts `m` at loop parameter `tau`, flagging (rather than failing on)
/// tensor-degenerate points.
pub fn chart_sample(tau: f64, m: &SpinMoments) -> Result<TrackSample> {
    match angles_from_moments(m) {
        Ok(angles) => Ok(TrackSample {
            tau,
            angles,
            tensor_degenerate: false,
        }),
        Err(Error::TensorDegenerate(f_len)) => {
            let theta_f = (m.f[2] / f_len).clamp(-1.0, 1.0).acos();
            let phi_f = m.f[1].atan2(m.f[0]);
            Ok(TrackSample {
                tau,
                angles: MomentAngles {
                    f_len,
                    theta_f,
                    phi_f,
                    phi_t: f64::NAN,
                },
                tensor_degenerate: true,
            })
        }
        Err(e) => Err(e),
    }
}

/// Continuous trajectory of chart angles along a closed loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleTrack {
    pub samples: Vec<TrackSample>,
}

impl AngleTrack {
    /// Net change of `phi_F` between the last and first samples.
    pub fn phi_f_winding(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.angles.phi_f - a.angles.phi_f,
            _ => 0.0,
        }
    }

    /// Net change of `phi_T` between the last and first samples.
    pub fn phi_t_winding(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.angles.phi_t - a.angles.phi_t,
            _ => 0.0,
        }
    }

    pub fn has_tensor_degeneracy(&self) -> bool {
        self.samples.iter().any(|s| s.tensor_degenerate)
    }
}

fn nearest_branch(prev: f64, raw: f64, period: f64) -> f64 {
    raw + period * ((prev - raw) / period).round()
}

/// Lifts `phi_F` (mod 2 pi) and `phi_T` (mod pi) onto continuous branches.
///
/// Samples flagged tensor-degenerate take the `phi_T` of the previous sample
/// (the next defined one at the start; zero when none is defined). Windings
/// accumulated between the end points are kept.
///
/// Steps must stay below `pi / 2`. Next to the arrow poles only the
/// combination `phi_T +/- phi_F` is checked, and `phi_T` is unchecked across
/// (nearly) coherent states, where the transverse axes are (nearly) equal.
pub fn unwrap_track(raw: &[TrackSample]) -> Result<AngleTrack> {
    let mut samples: Vec<TrackSample> = Vec::with_capacity(raw.len());
    let first_defined = raw
        .iter()
        .find(|s| !s.tensor_degenerate)
        .map(|s| s.angles.phi_t)
        .unwrap_or(0.0);
    for (index, s) in raw.iter().enumerate() {
        let mut out = *s;
        match samples.last() {
            None => {
                if s.tensor_degenerate {
                    out.angles.phi_t = first_defined;
                }
            }
            Some(prev) => {
                let dtheta = (s.angles.theta_f - prev.angles.theta_f).abs();
                out.angles.phi_f = nearest_branch(prev.angles.phi_f, s.angles.phi_f, TAU);
                let dphi = out.angles.phi_f - prev.angles.phi_f;
                let polar = s.angles.theta_f.sin().min(prev.angles.theta_f.sin()) < NEAR_POLE;
                let sign = prev.angles.theta_f.cos().signum();
                // Next to a pole the branch of phi_T follows phi_T + sign * phi_F.
                let anchor = if polar {
                    prev.angles.phi_t - sign * dphi
                } else {
                    prev.angles.phi_t
                };
                out.angles.phi_t = if s.tensor_degenerate {
                    prev.angles.phi_t
                } else {
                    nearest_branch(anchor, s.angles.phi_t, PI)
                };
                let dphit = out.angles.phi_t - prev.angles.phi_t;
                let tensor_free = s.tensor_degenerate
                    || prev.tensor_degenerate
                    || (1.0 - s.angles.f_len < NEAR_COHERENT
                        && 1.0 - prev.angles.f_len < NEAR_COHERENT);
                let mut step = dtheta;
                if polar {
                    // Only phi_T +/- phi_F is meaningful next to the arrow pole.
                    if !tensor_free {
                        let combined = dphit + sign * dphi;
                        step = step.max((combined - PI * (combined / PI).round()).abs());
                    }
                } else {
                    step = step.max(dphi.abs());
                    if !tensor_free {
                        step = step.max(dphit.abs());
                    }
                }
                if step >= FRAC_PI_2 {
                    return Err(Error::UndersampledLoop { index, step });
                }
            }
        }
        samples.push(out);
    }
    Ok(AngleTrack { samples })
}

/// Loop integrals of the arrow and ellipsoid rotations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolidAngles {
    /// Trapezoid value of the closed-loop integral of `F cos(theta_F) dphi_F`.
    pub gamma_f: f64,
    /// Trapezoid value of the closed-loop integral of `F dphi_T`.
    pub gamma_t: f64,
    /// `[phi_F(start) - phi_F(end)] + [phi_T(start) - phi_T(end)]`; a
    /// multiple of `pi` for a closed loop.
    pub boundary: f64,
}

impl SolidAngles {
    /// Berry flux through the loop, `gamma_F + gamma_T + boundary`.
    pub fn total(&self) -> f64 {
        self.gamma_f + self.gamma_t + self.boundary
    }
}

/// Trapezoidal evaluation of the generalized solid angles of a track.
pub fn generalized_solid_angles(track: &AngleTrack) -> SolidAngles {
    let mut gamma_f = 0.0;
    let mut gamma_t = 0.0;
    for w in track.samples.windows(2) {
        let (a, b) = (&w[0].angles, &w[1].angles);
        let wa = a.f_len * a.theta_f.cos();
        let wb = b.f_len * b.theta_f.cos();
        gamma_f += 0.5 * (wa + wb) * (b.phi_f - a.phi_f);
        gamma_t += 0.5 * (a.f_len + b.f_len) * (b.phi_t - a.phi_t);
    }
    let boundary = -(track.phi_f_winding() + track.phi_t_winding());
    SolidAngles {
        gamma_f,
        gamma_t,
        boundary,
    }
}

/// JSON-friendly ellipsoid record for plotting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EllipsoidRecord {
    pub tau: f64,
    pub spin_vector: [f64; 3],
    pub axes: [[f64; 3]; 3],
    pub lengths: [f64; 3],
}

pub fn ellipsoid_record(tau: f64, m: &SpinMoments) -> Result<EllipsoidRecord> {
    let e = ellipsoid(&covariance_tensor(m)?);
    Ok(EllipsoidRecord {
        tau,
        spin_vector: m.f,
        axes: e.axes,
        lengths: e.lengths,
    })
}
