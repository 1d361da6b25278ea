//! Momentum-space spin-1 Hamiltonian, the three-level drive Hamiltonian, the
//! mapping between them, and the search for gap-closing directions.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin1::{spin_tensor_op, spin_vector_ops, Axis, Hermitian3, C64, ZERO};

/// Spin-tensor/momentum coupling strengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub alpha: f64,
    pub beta: f64,
}

impl CouplingParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        CouplingParams { alpha, beta }
    }
}

/// A point `k = k0 (sin t cos p, sin t sin p, cos t)` on the momentum sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumPoint {
    pub k0: f64,
    pub theta: f64,
    pub phi: f64,
}

impl MomentumPoint {
    pub fn new(k0: f64, theta: f64, phi: f64) -> Self {
        MomentumPoint { k0, theta, phi }
    }

    /// Same point with `theta` in `[0, pi]` and `phi` in `[0, 2 pi)`.
    pub fn canonical(&self) -> MomentumPoint {
        let mut theta = self.theta.rem_euclid(TAU);
        let mut phi = self.phi;
        if theta > PI {
            theta = TAU - theta;
            phi += PI;
        }
        let phi = phi.rem_euclid(TAU);
        MomentumPoint {
            k0: self.k0,
            theta,
            phi: if phi >= TAU { 0.0 } else { phi },
        }
    }

    pub fn cartesian(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [self.k0 * st * cp, self.k0 * st * sp, self.k0 * ct]
    }
}

/// Detunings, Rabi amplitudes and phases of the two drives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveParams {
    pub delta12: f64,
    pub delta23: f64,
    pub omega12: f64,
    pub omega23: f64,
    pub phi12: f64,
    pub phi23: f64,
}

impl DriveParams {
    pub fn coupling12(&self) -> C64 {
        C64::from_polar(self.omega12, self.phi12)
    }

    pub fn coupling23(&self) -> C64 {
        C64::from_polar(self.omega23, self.phi23)
    }
}

/// `H = k.F + alpha k_z N_zz + beta k_x N_xz`.
pub fn momentum_hamiltonian(p: &MomentumPoint, c: &CouplingParams) -> Hermitian3 {
    let [kx, ky, kz] = p.cartesian();
    let [fx, fy, fz] = spin_vector_ops();
    fx * kx
        + fy * ky
        + fz * kz
        + spin_tensor_op(Axis::Z, Axis::Z) * (c.alpha * kz)
        + spin_tensor_op(Axis::X, Axis::Z) * (c.beta * kx)
}

/// Maps a momentum point and couplings onto drive parameters. The phases are
/// returned in `(-pi, pi]`.
pub fn drive_params(p: &MomentumPoint, c: &CouplingParams) -> DriveParams {
    let (st, ct) = p.theta.sin_cos();
    let kz = p.k0 * ct;
    let radial = p.k0 * st;
    let transverse = C64::from_polar(radial * FRAC_1_SQRT_2, -p.phi);
    let tensor = c.beta * radial * p.phi.cos() / (2.0 * 2f64.sqrt());
    let c12 = transverse + tensor;
    let c23 = transverse - tensor;
    DriveParams {
        delta12: (c.alpha + 1.0) * kz,
        delta23: (c.alpha - 1.0) * kz,
        omega12: c12.norm(),
        omega23: c23.norm(),
        phi12: canonical_phase(c12.arg()),
        phi23: canonical_phase(c23.arg()),
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn canonical_phase(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// The rotating-frame three-level Hamiltonian.
pub fn drive_hamiltonian(d: &DriveParams) -> Hermitian3 {
    Hermitian3::from_upper(
        [d.delta12, 0.0, d.delta23],
        d.coupling12(),
        ZERO,
        d.coupling23(),
    )
}

/// Constant offset between [`drive_hamiltonian`] and [`momentum_hamiltonian`]
/// at the same point: `2 alpha k_z / 3`.
pub fn drive_frame_offset(p: &MomentumPoint, c: &CouplingParams) -> f64 {
    2.0 * c.alpha * p.k0 * p.theta.cos() / 3.0
}

/// `(E1 - E0, E2 - E1)`.
pub fn band_gaps(h: &Hermitian3) -> (f64, f64) {
    h.eigensystem().gaps()
}

/// Which pair of adjacent bands touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandPair {
    /// Lowest and middle band.
    Lower,
    /// Middle and highest band.
    Upper,
}

/// A gap-closing direction on the momentum sphere (valid for all `k0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapClosing {
    pub theta: f64,
    /// `0` when the closing sits on a pole.
    pub phi: f64,
    pub bands: BandPair,
    /// Refined gap at unit `k0`.
    pub gap: f64,
}

/// Angular sampling grid on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngularGrid {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl AngularGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        AngularGrid { n_theta, n_phi }
    }
}

impl Default for AngularGrid {
    fn default() -> Self {
        AngularGrid {
            n_theta: 64,
            n_phi: 128,
        }
    }
}

/// Gap threshold (at unit `k0`) below which a refined minimum counts as closed.
pub const GAP_CLOSED_THRESHOLD: f64 = 1e-6;

fn gap_at(c: &CouplingParams, theta: f64, phi: f64, pair: BandPair) -> f64 {
    let (g01, g12) = band_gaps(&momentum_hamiltonian(
        &MomentumPoint::new(1.0, theta, phi),
        c,
    ));
    match pair {
        BandPair::Lower => g01,
        BandPair::Upper => g12,
    }
}

/// Locates the directions where adjacent bands touch.
///
/// A coarse grid (poles included) is scanned for local minima of each gap,
/// each minimum is refined by alternating golden-section searches, and those
/// whose refined gap falls below `1e-6 k0` are reported. Results are sorted
/// by band pair, then `theta`, then `phi`.
pub fn gap_closing_points(c: &CouplingParams, grid: AngularGrid) -> Result<Vec<GapClosing>> {
    if grid.n_theta < 64 || grid.n_phi < 128 {
        return Err(Error::InvalidInput(format!(
            "gap-closing grid must be at least 64x128, got {}x{}",
            grid.n_theta, grid.n_phi
        )));
    }
    let nt = grid.n_theta;
    let np = grid.n_phi;
    let dtheta = PI / (nt - 1) as f64;
    let dphi = TAU / np as f64;

    let samples: Vec<(f64, f64)> = (0..nt * np)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / np, idx % np);
            // Poles are single points; evaluate them once at phi = 0.
            let phi = if i == 0 || i == nt - 1 {
                0.0
            } else {
                j as f64 * dphi
            };
            let h = momentum_hamiltonian(&MomentumPoint::new(1.0, i as f64 * dtheta, phi), c);
            band_gaps(&h)
        })
        .collect();

    let mut found: Vec<GapClosing> = Vec::new();
    for pair in [BandPair::Lower, BandPair::Upper] {
        let value = |i: usize, j: usize| {
            let s = samples[i * np + (j % np)];
            match pair {
                BandPair::Lower => s.0,
                BandPair::Upper => s.1,
            }
        };
        let mut candidates: Vec<(f64, f64)> = Vec::new();
        for i in 0..nt {
            if i == 0 || i == nt - 1 {
                let v = value(i, 0);
                let ring = if i == 0 { 1 } else { nt - 2 };
                let spread = (0..np).map(|j| value(ring, j) - v).fold(0.0, f64::max);
                if (0..np).all(|j| v <= value(ring, j)) && v <= 4.0 * spread {
                    candidates.push((i as f64 * dtheta, 0.0));
                }
                continue;
            }
            for j in 0..np {
                let v = value(i, j);
                let mut is_min = true;
                let mut spread: f64 = 0.0;
                'nb: for di in [-1i64, 0, 1] {
                    for dj in [np - 1, 0, 1] {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let ni = (i as i64 + di) as usize;
                        let w = value(ni, j + dj);
                        if w < v {
                            is_min = false;
                            break 'nb;
                        }
                        spread = spread.max(w - v);
                    }
                }
                // A zero inside the neighbouring cells leaves the centre value
                // comparable to the neighbour spread; flat plateaus are skipped.
                if is_min && v <= 4.0 * spread {
                    candidates.push((i as f64 * dtheta, j as f64 * dphi));
                }
            }
        }

        let refined: Vec<(f64, f64, f64)> = candidates
            .par_iter()
            .map(|&(t, p)| refine_minimum(c, pair, t, p, dtheta, dphi))
            .collect();

        for (theta, phi, gap) in refined {
            if gap >= GAP_CLOSED_THRESHOLD {
                continue;
            }
            let (theta, phi) = if theta < 1e-7 {
                (0.0, 0.0)
            } else if theta > PI - 1e-7 {
                (PI, 0.0)
            } else {
                (theta, phi.rem_euclid(TAU))
            };
            let unit = MomentumPoint::new(1.0, theta, phi).cartesian();
            let duplicate = found.iter().any(|g| {
                if g.bands != pair {
                    return false;
                }
                let other = MomentumPoint::new(1.0, g.theta, g.phi).cartesian();
                let d2: f64 = (0..3).map(|k| (unit[k] - other[k]).powi(2)).sum();
                d2.sqrt() < 1e-4
            });
            if !duplicate {
                found.push(GapClosing {
                    theta,
                    phi,
                    bands: pair,
                    gap,
                });
            }
        }
    }
    found.sort_by(|a, b| {
        (a.bands as u8)
            .cmp(&(b.bands as u8))
            .then(a.theta.total_cmp(&b.theta))
            .then(a.phi.total_cmp(&b.phi))
    });
    Ok(found)
}

fn golden_section(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    // Endpoint minima (e.g. a closing exactly on a pole) are checked too.
    [(mid, fm), (lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .fold(
            (mid, fm),
            |best, cand| if cand.1 < best.1 { cand } else { best },
        )
}

fn refine_minimum(
    c: &CouplingParams,
    pair: BandPair,
    theta0: f64,
    phi0: f64,
    dtheta: f64,
    dphi: f64,
) -> (f64, f64, f64) {
    let (mut theta, mut phi) = (theta0, phi0);
    let (mut wt, mut wp) = (1.5 * dtheta, 1.5 * dphi);
    let mut best = gap_at(c, theta, phi, pair);
    for _ in 0..200 {
        let (t, _) = golden_section((theta - wt).max(0.0), (theta + wt).min(PI), 1e-11, |t| {
            gap_at(c, t, phi, pair)
        });
        theta = t;
        let (p, g) = golden_section(phi - wp, phi + wp, 1e-11, |p| gap_at(c, theta, p, pair));
        phi = p;
        let improved = best - g;
        best = g;
        if best < 1e-12 || (improved.abs() < 1e-14 && wt < 1e-9) {
            break;
        }
        wt = (wt * 0.7).max(1e-10);
        wp = (wp * 0.7).max(1e-10);
    }
    (theta, phi, best)
}
