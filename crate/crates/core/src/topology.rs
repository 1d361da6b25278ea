//! Berry flux, curvature and monopole charge of the spin-1 bands.
//!
//! Orientation: surfaces carry the outward normal of the momentum sphere, so
//! the lowest band of `k.F` has curvature `+sin(theta)` and charge `+2`.
//! Latitude loops run with decreasing `phi`; small loops and ellipses run
//! counter-clockwise as seen from outside the sphere.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    chart_sample, generalized_solid_angles, moments, unwrap_track, AngleTrack, SolidAngles,
};
use crate::model::{
    canonical_phase, gap_closing_points, momentum_hamiltonian, AngularGrid, BandPair,
    CouplingParams, MomentumPoint, GAP_CLOSED_THRESHOLD,
};
use crate::spin1::{expectation, spin_op, Axis, SpinState, C64};

/// Geometric shape of a closed loop on the momentum sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoopShape {
    /// `theta` fixed, `phi = -tau`.
    Latitude { theta: f64 },
    /// `theta = theta0 - (3/4) r cos(tau)`, `phi = phi0 - sqrt(3) r sin(tau)`.
    Small { theta0: f64, phi0: f64, r: f64 },
    /// `theta = theta0 - a_theta cos(tau)`, `phi = phi0 - a_phi sin(tau)`.
    Ellipse {
        theta0: f64,
        phi0: f64,
        a_theta: f64,
        a_phi: f64,
    },
    /// Closed polygon through `(theta, phi)` vertices, linear in each edge.
    Polygon { vertices: Vec<(f64, f64)> },
}

impl LoopShape {
    /// The measurement loop around `(3 pi / 4, pi)`.
    pub fn small(r: f64) -> LoopShape {
        LoopShape::Small {
            theta0: 3.0 * PI / 4.0,
            phi0: PI,
            r,
        }
    }

    /// `(theta, phi)` at loop parameter `tau` in `[0, 2 pi]`.
    pub fn angles(&self, tau: f64) -> (f64, f64) {
        match self {
            LoopShape::Latitude { theta } => (*theta, -tau),
            LoopShape::Small { theta0, phi0, r } => (
                theta0 - 0.75 * r * tau.cos(),
                phi0 - 3f64.sqrt() * r * tau.sin(),
            ),
            LoopShape::Ellipse {
                theta0,
                phi0,
                a_theta,
                a_phi,
            } => (theta0 - a_theta * tau.cos(), phi0 - a_phi * tau.sin()),
            LoopShape::Polygon { vertices } => {
                let n = vertices.len();
                let x = (tau / TAU).clamp(0.0, 1.0) * n as f64;
                let k = (x.floor() as usize).min(n - 1);
                let s = x - k as f64;
                let (a, b) = (vertices[k], vertices[(k + 1) % n]);
                (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1))
            }
        }
    }
}

/// A loop together with the Hamiltonian family it probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub shape: LoopShape,
    pub samples: usize,
    pub k0: f64,
    pub couplings: CouplingParams,
}

impl LoopSpec {
    pub fn new(
        shape: LoopShape,
        samples: usize,
        k0: f64,
        couplings: CouplingParams,
    ) -> Result<Self> {
        if samples < 16 {
            return Err(Error::InvalidInput(format!(
                "loops need at least 16 samples, got {samples}"
            )));
        }
        if let LoopShape::Polygon { vertices } = &shape {
            if vertices.len() < 3 {
                return Err(Error::InvalidInput(
                    "polygon loops need at least 3 vertices".into(),
                ));
            }
        }
        if !(k0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "k0 must be positive, got {k0}"
            )));
        }
        Ok(LoopSpec {
            shape,
            samples,
            k0,
            couplings,
        })
    }

    pub fn point(&self, tau: f64) -> MomentumPoint {
        let (theta, phi) = self.shape.angles(tau);
        MomentumPoint::new(self.k0, theta, phi)
    }
}

/// Flux through one loop by both methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxResult {
    /// Wilson-loop Berry phase in `(-pi, pi]`.
    pub gamma: f64,
    pub gamma_f: f64,
    pub gamma_t: f64,
    /// Chart boundary term; a multiple of `pi`.
    pub boundary: f64,
    /// `gamma` reduced to `(-pi, pi]`.
    pub wrapped: f64,
    #[serde(rename = "loop")]
    pub loop_spec: LoopSpec,
}

impl FluxResult {
    /// Geometric flux `gamma_F + gamma_T + boundary`.
    pub fn geometric(&self) -> f64 {
        self.gamma_f + self.gamma_t + self.boundary
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeResult {
    pub charge: i64,
    pub grid: (usize, usize),
    /// `|sum of plaquette phases - 2 pi charge|`.
    pub residual: f64,
}

/// `-arg` of the product of successive overlaps around a closed list of states.
pub fn wilson_phase_of_states(states: &[SpinState]) -> f64 {
    let n = states.len();
    let mut prod = C64::new(1.0, 0.0);
    for j in 0..n {
        let z = states[j].overlap(&states[(j + 1) % n]);
        prod *= z / z.norm().max(f64::MIN_POSITIVE);
    }
    canonical_phase(-prod.arg())
}

fn band_state_at(
    p: &MomentumPoint,
    c: &CouplingParams,
    band: usize,
) -> std::result::Result<SpinState, f64> {
    momentum_hamiltonian(p, c)
        .eigensystem()
        .band_state(band, GAP_CLOSED_THRESHOLD * p.k0)
        .map_err(|e| match e {
            Error::DegenerateBand { gap, .. } => gap,
            _ => 0.0,
        })
}

/// Band states at `tau_j = 2 pi j / n`, `j = 0..n` (closure excluded).
fn loop_states(lp: &LoopSpec, band: usize, n: usize) -> Result<Vec<SpinState>> {
    (0..n)
        .into_par_iter()
        .with_min_len(64)
        .map(|j| {
            let tau = TAU * j as f64 / n as f64;
            band_state_at(&lp.point(tau), &lp.couplings, band)
                .map_err(|gap| Error::GapClosedOnLoop { index: j, gap })
        })
        .collect()
}

const WILSON_TOL: f64 = 1e-6;
const WILSON_MAX_SAMPLES: usize = 1 << 21;

/// Berry phase of `band` around the loop, in `(-pi, pi]`.
///
/// The sample count is doubled from `loop.samples` until two successive
/// values agree within `1e-6`; the returned value is Richardson-extrapolated
/// from the last two.
pub fn wilson_loop_phase(lp: &LoopSpec, band: usize) -> Result<f64> {
    let mut n = lp.samples.max(16);
    let mut prev = wilson_phase_of_states(&loop_states(lp, band, n)?);
    loop {
        n *= 2;
        let cur = wilson_phase_of_states(&loop_states(lp, band, n)?);
        let diff = canonical_phase(cur - prev);
        if diff.abs() <= WILSON_TOL {
            return Ok(canonical_phase(cur + diff / 3.0));
        }
        if n >= WILSON_MAX_SAMPLES {
            return Err(Error::NotConverged {
                what: "wilson_loop_phase",
                detail: format!("successive values differ by {diff:.3e} at {n} samples"),
            });
        }
        prev = cur;
    }
}

/// Chart track of the band states at `loop.samples + 1` points (closure included).
pub fn loop_track(lp: &LoopSpec, band: usize) -> Result<AngleTrack> {
    let n = lp.samples;
    let raw = (0..n + 1)
        .into_par_iter()
        .with_min_len(64)
        .map(|j| {
            let tau = TAU * j as f64 / n as f64;
            let s = band_state_at(&lp.point(tau), &lp.couplings, band)
                .map_err(|gap| Error::GapClosedOnLoop { index: j, gap })?;
            chart_sample(tau, &moments(&s))
        })
        .collect::<Result<Vec<_>>>()?;
    unwrap_track(&raw)
}

/// Generalized solid angles of the band states along the loop.
pub fn geometric_flux(lp: &LoopSpec, band: usize) -> Result<SolidAngles> {
    Ok(generalized_solid_angles(&loop_track(lp, band)?))
}

/// Wilson phase and generalized solid angles of `band` around the loop.
pub fn loop_flux(lp: &LoopSpec, band: usize) -> Result<FluxResult> {
    let gamma = wilson_loop_phase(lp, band)?;
    let sa = geometric_flux(lp, band)?;
    Ok(FluxResult {
        gamma,
        gamma_f: sa.gamma_f,
        gamma_t: sa.gamma_t,
        boundary: sa.boundary,
        wrapped: canonical_phase(gamma),
        loop_spec: lp.clone(),
    })
}

fn plaquette_phase(p: &MomentumPoint, c: &CouplingParams, band: usize, h: f64) -> Result<f64> {
    let corners = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
    let states = corners
        .iter()
        .enumerate()
        .map(|(i, (a, b))| {
            let q = MomentumPoint::new(p.k0, p.theta + a * h, p.phi + b * h);
            band_state_at(&q, c, band).map_err(|gap| Error::GapClosedOnLoop { index: i, gap })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(wilson_phase_of_states(&states))
}

/// Berry curvature `Omega_{theta phi}` (flux per unit `d theta d phi`).
///
/// Square plaquette of side `h = 1e-3`, Richardson-extrapolated once with
/// the `h / 2` plaquette.
pub fn berry_curvature(p: &MomentumPoint, c: &CouplingParams, band: usize) -> Result<f64> {
    berry_curvature_with_step(p, c, band, 1e-3)
}

pub fn berry_curvature_with_step(
    p: &MomentumPoint,
    c: &CouplingParams,
    band: usize,
    h: f64,
) -> Result<f64> {
    let coarse = plaquette_phase(p, c, band, h)? / (h * h);
    let fine = plaquette_phase(p, c, band, h / 2.0)? / (h * h / 4.0);
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Resolution of the lattice used for monopole charges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    /// How many times the grid may be doubled while waiting for a stable
    /// charge. Zero accepts the first resolution as is.
    pub max_doublings: u32,
}

impl Default for SphereGrid {
    fn default() -> Self {
        SphereGrid {
            n_theta: 200,
            n_phi: 400,
            max_doublings: 3,
        }
    }
}

impl SphereGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        SphereGrid {
            n_theta,
            n_phi,
            ..Default::default()
        }
    }
}

/// Raw sum of wrapped plaquette phases on an `n_theta x n_phi` lattice.
fn lattice_flux(c: &CouplingParams, band: usize, nt: usize, np: usize) -> Result<f64> {
    // Rings at theta_i = pi i / nt, i = 1..nt-1; the poles are capped by the
    // Wilson phase of the first and last rings.
    let rings: Vec<Vec<SpinState>> = (1..nt)
        .into_par_iter()
        .map(|i| {
            let theta = PI * i as f64 / nt as f64;
            (0..np)
                .map(|j| {
                    let phi = TAU * j as f64 / np as f64;
                    band_state_at(&MomentumPoint::new(1.0, theta, phi), c, band)
                        .map_err(|_| Error::GapClosedOnSphere { theta, phi })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let bands: f64 = rings
        .par_windows(2)
        .map(|w| {
            let (lo, hi) = (&w[0], &w[1]);
            (0..np)
                .map(|j| {
                    let jn = (j + 1) % np;
                    wilson_phase_of_states(&[lo[j], hi[j], hi[jn], lo[jn]])
                })
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();

    let north = wilson_phase_of_states(&rings[0]);
    let mut south_ring = rings[rings.len() - 1].clone();
    south_ring.reverse();
    let south = wilson_phase_of_states(&south_ring);
    Ok(bands + north + south)
}

fn closing_blocks_band(pair: BandPair, band: usize) -> bool {
    matches!(
        (pair, band),
        (BandPair::Lower, 0) | (BandPair::Upper, 2) | (_, 1)
    )
}

/// Monopole charge of the lowest band.
pub fn monopole_charge(c: &CouplingParams, grid: SphereGrid) -> Result<ChargeResult> {
    monopole_charge_of_band(c, grid, 0)
}

/// Chern number of `band` on the unit momentum sphere.
///
/// Sums per-plaquette Wilson phases wrapped to `(-pi, pi]`; the grid is
/// doubled until two successive resolutions give the same integer.
pub fn monopole_charge_of_band(
    c: &CouplingParams,
    grid: SphereGrid,
    band: usize,
) -> Result<ChargeResult> {
    if band > 2 {
        return Err(Error::InvalidInput(format!(
            "band index {band} out of range"
        )));
    }
    if grid.n_theta < 4 || grid.n_phi < 4 {
        return Err(Error::InvalidInput(
            "sphere grid must be at least 4x4".into(),
        ));
    }
    if let Some(g) = gap_closing_points(c, AngularGrid::default())?
        .into_iter()
        .find(|g| closing_blocks_band(g.bands, band))
    {
        return Err(Error::GapClosedOnSphere {
            theta: g.theta,
            phi: g.phi,
        });
    }
    let evaluate = |nt: usize, np: usize| -> Result<ChargeResult> {
        let total = lattice_flux(c, band, nt, np)?;
        let charge = (total / TAU).round();
        Ok(ChargeResult {
            charge: charge as i64,
            grid: (nt, np),
            residual: (total - TAU * charge).abs(),
        })
    };
    let (mut nt, mut np) = (grid.n_theta, grid.n_phi);
    let mut prev = evaluate(nt, np)?;
    if grid.max_doublings == 0 {
        return Ok(prev);
    }
    for _ in 0..grid.max_doublings {
        nt *= 2;
        np *= 2;
        let cur = evaluate(nt, np)?;
        if cur.charge == prev.charge {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::NotConverged {
        what: "monopole_charge",
        detail: format!("charge still changing at {nt}x{np} (last {})", prev.charge),
    })
}

/// One cell of the phase diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub alpha: f64,
    pub beta: f64,
    /// `None` when the cell could not be assigned a charge.
    pub charge: Option<i64>,
    /// Error name for undefined cells.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Row-major: `cells[i_beta][i_alpha]`.
    pub cells: Vec<Vec<PhaseCell>>,
}

/// Charge of the lowest band over an `alpha x beta` grid. Cells whose sphere
/// is not gapped, or whose charge does not stabilize, are flagged undefined.
pub fn phase_diagram(alphas: &[f64], betas: &[f64], grid: SphereGrid) -> PhaseDiagram {
    let cells = betas
        .par_iter()
        .map(|&beta| {
            alphas
                .par_iter()
                .map(
                    |&alpha| match monopole_charge(&CouplingParams::new(alpha, beta), grid) {
                        Ok(r) => PhaseCell {
                            alpha,
                            beta,
                            charge: Some(r.charge),
                            failure: None,
                        },
                        Err(e) => PhaseCell {
                            alpha,
                            beta,
                            charge: None,
                            failure: Some(e.name().to_string()),
                        },
                    },
                )
                .collect()
        })
        .collect();
    PhaseDiagram {
        alphas: alphas.to_vec(),
        betas: betas.to_vec(),
        cells,
    }
}

/// One point of a flux-versus-beta scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub beta: f64,
    pub result: Result<FluxResult>,
}

/// Ideal-eigenstate flux of the small loop of radius `r` for each `beta`.
pub fn flux_scan_beta(
    alpha: f64,
    betas: &[f64],
    r: f64,
    samples: usize,
    k0: f64,
) -> Vec<ScanPoint> {
    betas
        .par_iter()
        .map(|&beta| {
            let result = LoopSpec::new(
                LoopShape::small(r),
                samples,
                k0,
                CouplingParams::new(alpha, beta),
            )
            .and_then(|lp| loop_flux(&lp, 0));
            ScanPoint { beta, result }
        })
        .collect()
}

/// Adjacent `beta` pairs across which the wrapped flux jumps by more than `pi`.
pub fn flux_jumps(points: &[ScanPoint]) -> Vec<(f64, f64)> {
    let ok: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.result.as_ref().ok().map(|r| (p.beta, r.wrapped)))
        .collect();
    ok.windows(2)
        .filter(|w| (w[1].1 - w[0].1).abs() > PI)
        .map(|w| (w[0].0.min(w[1].0), w[0].0.max(w[1].0)))
        .collect()
}

/// Ground-state arrow azimuth along a latitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexScan {
    /// `(phi, phi_F)` with `phi` decreasing from 0 and `phi_F` unwrapped.
    pub points: Vec<(f64, f64)>,
    /// Turns of `phi_F` over one traversal of the loop.
    pub winding: i64,
    /// In-plane arrow length relative to `|<F_z>|`, maximized over the loop.
    pub max_transverse_ratio: f64,
}

/// `phi_F` of the ground state at `samples` points of the latitude `theta`.
pub fn vortex_scan(c: &CouplingParams, theta: f64, samples: usize) -> Result<VortexScan> {
    if samples < 4 {
        return Err(Error::InvalidInput(
            "vortex scan needs at least 4 samples".into(),
        ));
    }
    let shape = LoopShape::Latitude { theta };
    let mut points = Vec::with_capacity(samples);
    let mut prev: Option<f64> = None;
    let mut ratio: f64 = 0.0;
    let mut closing = 0.0;
    for j in 0..=samples {
        let tau = TAU * j as f64 / samples as f64;
        let (_, phi) = shape.angles(tau);
        let s = band_state_at(&MomentumPoint::new(1.0, theta, phi), c, 0)
            .map_err(|gap| Error::GapClosedOnLoop { index: j, gap })?;
        let f = moments(&s).f;
        let transverse = f[0].hypot(f[1]);
        ratio = ratio.max(transverse / f[2].abs().max(f64::MIN_POSITIVE));
        let raw = f[1].atan2(f[0]);
        let phi_f = match prev {
            None => raw,
            Some(p) => {
                let lifted = raw + TAU * ((p - raw) / TAU).round();
                if (lifted - p).abs() >= FRAC_PI_2 {
                    return Err(Error::UndersampledLoop {
                        index: j,
                        step: (lifted - p).abs(),
                    });
                }
                lifted
            }
        };
        prev = Some(phi_f);
        if j < samples {
            points.push((phi, phi_f));
        } else {
            closing = phi_f;
        }
    }
    let winding = ((closing - points[0].1) / TAU).round() as i64;
    Ok(VortexScan {
        points,
        winding,
        max_transverse_ratio: ratio,
    })
}

/// `<F_z>(theta = pi) - <F_z>(theta = 0)` for the ground band at `beta = 0`.
pub fn charge_from_fz(c: &CouplingParams) -> Result<f64> {
    if c.beta != 0.0 {
        return Err(Error::InvalidInput(format!(
            "charge_from_fz requires beta = 0, got {}",
            c.beta
        )));
    }
    let fz = |theta: f64| -> Result<f64> {
        let s = momentum_hamiltonian(&MomentumPoint::new(1.0, theta, 0.0), c)
            .eigensystem()
            .band_state(0, 1e-9)?;
        expectation(&s, &spin_op(Axis::Z))
    };
    Ok(fz(PI)? - fz(0.0)?)
}
