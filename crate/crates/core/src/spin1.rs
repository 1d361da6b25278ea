//! Spin-1 operator algebra and 3x3 Hermitian linear algebra.
//!
//! Basis ordering is fixed everywhere as `(|m=+1>, |m=0>, |m=-1>)`, which is
//! also the `(|psi_1>, |psi_2>, |psi_3>)` ordering of the three-level drive
//! Hamiltonian.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix3 = [[C64; 3]; 3];

const HERMITIAN_TOL: f64 = 1e-12;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub(crate) fn zeros() -> CMatrix3 {
    [[ZERO; 3]; 3]
}

pub(crate) fn identity() -> CMatrix3 {
    let mut m = zeros();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

pub(crate) fn matmul(a: &CMatrix3, b: &CMatrix3) -> CMatrix3 {
    let mut out = zeros();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub(crate) fn dagger(a: &CMatrix3) -> CMatrix3 {
    let mut out = zeros();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

pub(crate) fn matvec(a: &CMatrix3, v: &[C64; 3]) -> [C64; 3] {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub(crate) fn inner(a: &[C64; 3], b: &[C64; 3]) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1] + a[2].conj() * b[2]
}

pub(crate) fn frobenius(a: &CMatrix3) -> f64 {
    a.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Cartesian axis label for spin operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// 3x3 complex Hermitian matrix.
#[derive(Clone, Copy, PartialEq)]
pub struct Hermitian3(CMatrix3);

impl fmt::Debug for Hermitian3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Hermitian3 {
    /// Wraps `m` after checking conjugate symmetry to within 1e-12 (scaled by
    /// the matrix norm when it exceeds one).
    pub fn new(m: CMatrix3) -> Result<Self> {
        let asym = asymmetry(&m);
        if asym > HERMITIAN_TOL * frobenius(&m).max(1.0) {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self::symmetrized(m))
    }

    /// Builds a Hermitian matrix from its upper triangle and real diagonal.
    pub fn from_upper(diag: [f64; 3], upper01: C64, upper02: C64, upper12: C64) -> Self {
        Hermitian3([
            [c(diag[0]), upper01, upper02],
            [upper01.conj(), c(diag[1]), upper12],
            [upper02.conj(), upper12.conj(), c(diag[2])],
        ])
    }

    pub(crate) fn symmetrized(m: CMatrix3) -> Self {
        let mut out = zeros();
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (m[i][j] + m[j][i].conj()) * 0.5;
            }
        }
        Hermitian3(out)
    }

    pub fn zero() -> Self {
        Hermitian3(zeros())
    }

    pub fn identity() -> Self {
        Hermitian3(identity())
    }

    pub fn diag(d: [f64; 3]) -> Self {
        Self::from_upper(d, ZERO, ZERO, ZERO)
    }

    pub fn matrix(&self) -> &CMatrix3 {
        &self.0
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        frobenius(&self.0)
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0].re + self.0[1][1].re + self.0[2][2].re
    }

    pub fn apply(&self, v: &[C64; 3]) -> [C64; 3] {
        matvec(&self.0, v)
    }

    pub fn asymmetry(&self) -> f64 {
        asymmetry(&self.0)
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &Hermitian3) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }

    pub fn eigensystem(&self) -> EigenSystem {
        eigensystem(self)
    }

    /// The unitary `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> CMatrix3 {
        let es = self.eigensystem();
        let mut out = zeros();
        for (value, vector) in es.values.iter().zip(es.vectors.iter()) {
            let phase = C64::from_polar(1.0, -value * t);
            let v = vector.amplitudes();
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] += phase * v[i] * v[j].conj();
                }
            }
        }
        out
    }
}

fn asymmetry(m: &CMatrix3) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in i..3 {
            worst = worst.max((m[i][j] - m[j][i].conj()).norm());
        }
    }
    worst
}

impl Add for Hermitian3 {
    type Output = Hermitian3;
    fn add(self, rhs: Hermitian3) -> Hermitian3 {
        let mut out = self.0;
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += rhs.0[i][j];
            }
        }
        Hermitian3(out)
    }
}

impl Sub for Hermitian3 {
    type Output = Hermitian3;
    fn sub(self, rhs: Hermitian3) -> Hermitian3 {
        self + rhs * -1.0
    }
}

impl Mul<f64> for Hermitian3 {
    type Output = Hermitian3;
    fn mul(self, rhs: f64) -> Hermitian3 {
        let mut out = self.0;
        out.iter_mut().flatten().for_each(|z| *z *= rhs);
        Hermitian3(out)
    }
}

/// Normalized spin-1 state in the `(|+1>, |0>, |-1>)` basis.
///
/// Equality is not implemented: two states that differ by a global phase are
/// physically equal, use [`SpinState::fidelity`].
#[derive(Clone, Copy, Debug)]
pub struct SpinState([C64; 3]);

impl SpinState {
    /// Normalizes `amps`; fails on a zero or non-finite vector.
    pub fn new(amps: [C64; 3]) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::InvalidInput(format!(
                "cannot normalize state with norm {norm}"
            )));
        }
        Ok(SpinState([amps[0] / norm, amps[1] / norm, amps[2] / norm]))
    }

    pub(crate) fn from_normalized(amps: [C64; 3]) -> Self {
        SpinState(amps)
    }

    pub fn basis(index: usize) -> Self {
        let mut amps = [ZERO; 3];
        amps[index] = ONE;
        SpinState(amps)
    }

    pub fn amplitudes(&self) -> &[C64; 3] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &SpinState) -> C64 {
        inner(&self.0, &other.0)
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &SpinState) -> f64 {
        self.overlap(other).norm_sqr()
    }

    pub fn populations(&self) -> [f64; 3] {
        [
            self.0[0].norm_sqr(),
            self.0[1].norm_sqr(),
            self.0[2].norm_sqr(),
        ]
    }

    /// Multiplies by a global phase `exp(i phase)`.
    pub fn with_phase(&self, phase: f64) -> SpinState {
        let p = C64::from_polar(1.0, phase);
        SpinState([self.0[0] * p, self.0[1] * p, self.0[2] * p])
    }

    /// Applies a unitary.
    pub fn evolved(&self, u: &CMatrix3) -> SpinState {
        SpinState(matvec(u, &self.0))
    }

    /// Re-phases so the largest-magnitude component is real and positive.
    /// Ties are broken towards the lower index.
    pub fn canonical_phase(&self) -> SpinState {
        let mags = self.0.map(|a| a.norm());
        let max = mags.iter().cloned().fold(0.0, f64::max);
        let pivot = mags
            .iter()
            .position(|&m| m >= max * (1.0 - 1e-12))
            .unwrap_or(0);
        let arg = self.0[pivot].arg();
        self.with_phase(-arg)
    }
}

/// Eigenvalues (ascending) and matching eigenvectors of a [`Hermitian3`].
#[derive(Clone, Copy, Debug)]
pub struct EigenSystem {
    pub values: [f64; 3],
    pub vectors: [SpinState; 3],
}

impl EigenSystem {
    /// `(E1 - E0, E2 - E1)`.
    pub fn gaps(&self) -> (f64, f64) {
        (
            self.values[1] - self.values[0],
            self.values[2] - self.values[1],
        )
    }

    /// Eigenvector of `band`, failing with `DegenerateBand` if an adjacent
    /// band lies within `gap_tol`.
    pub fn band_state(&self, band: usize, gap_tol: f64) -> Result<SpinState> {
        if band > 2 {
            return Err(Error::InvalidInput(format!(
                "band index {band} out of range"
            )));
        }
        let (g01, g12) = self.gaps();
        let gap = match band {
            0 => g01,
            1 => g01.min(g12),
            _ => g12,
        };
        if gap < gap_tol {
            return Err(Error::DegenerateBand {
                band,
                gap,
                tol: gap_tol,
            });
        }
        Ok(self.vectors[band])
    }

    /// Largest residual `|H v - lambda v|` over the three pairs.
    pub fn max_residual(&self, h: &Hermitian3) -> f64 {
        self.values
            .iter()
            .zip(self.vectors.iter())
            .map(|(&lambda, v)| {
                let hv = h.apply(v.amplitudes());
                (0..3)
                    .map(|i| (hv[i] - v.amplitudes()[i] * lambda).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Diagonalizes a Hermitian 3x3 matrix by cyclic complex Jacobi rotations.
///
/// Eigenvalues come back ascending; each eigenvector carries the canonical
/// phase (largest component real positive).
pub fn eigensystem(h: &Hermitian3) -> EigenSystem {
    let mut a = h.0;
    let mut v = identity();
    let scale = frobenius(&a).max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        let off = (a[0][1].norm_sqr() + a[0][2].norm_sqr() + a[1][2].norm_sqr()).sqrt();
        if off <= 1e-17 * scale {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            let mag = apq.norm();
            if mag <= 1e-300 {
                continue;
            }
            // Unitary R acting on the (p, q) plane: first remove the phase of
            // a_pq, then apply a real Jacobi rotation.
            let phase = apq / mag;
            let app = a[p][p].re;
            let aqq = a[q][q].re;
            let theta = (aqq - app) / (2.0 * mag);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let cs = 1.0 / (t * t + 1.0).sqrt();
            let sn = t * cs;

            let mut r = identity();
            r[p][p] = c(cs);
            r[q][q] = c(cs);
            r[p][q] = phase * sn;
            r[q][p] = -phase.conj() * sn;
            // columns of r: col p = (cs, -conj(phase) sn), col q = (phase sn, cs)
            let rd = dagger(&r);
            a = matmul(&rd, &matmul(&a, &r));
            a[p][q] = ZERO;
            a[q][p] = ZERO;
            v = matmul(&v, &r);
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[i][i].re.total_cmp(&a[j][j].re));
    let values = order.map(|k| a[k][k].re);
    let vectors = order.map(|k| {
        let col = [v[0][k], v[1][k], v[2][k]];
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        SpinState([col[0] / norm, col[1] / norm, col[2] / norm]).canonical_phase()
    });
    EigenSystem { values, vectors }
}

/// `<s|O|s>`; fails if `O` is not Hermitian to 1e-12.
pub fn expectation(s: &SpinState, o: &Hermitian3) -> Result<f64> {
    let asym = o.asymmetry();
    if asym > HERMITIAN_TOL * o.norm().max(1.0) {
        return Err(Error::NotHermitian(asym));
    }
    let value = inner(&s.0, &o.apply(&s.0));
    debug_assert!(value.im.abs() <= 1e-12 * o.norm().max(1.0));
    Ok(value.re)
}

/// `Tr(rho O)` for a general 3x3 matrix `rho` (density matrix).
pub(crate) fn trace_product(rho: &CMatrix3, o: &Hermitian3) -> f64 {
    let mut acc = ZERO;
    for i in 0..3 {
        for j in 0..3 {
            acc += rho[i][j] * o.0[j][i];
        }
    }
    acc.re
}

/// The spin-1 matrices `(F_x, F_y, F_z)`.
pub fn spin_vector_ops() -> [Hermitian3; 3] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let fx = Hermitian3::from_upper([0.0; 3], c(s), ZERO, c(s));
    let fy = Hermitian3::from_upper([0.0; 3], C64::new(0.0, -s), ZERO, C64::new(0.0, -s));
    let fz = Hermitian3::diag([1.0, 0.0, -1.0]);
    [fx, fy, fz]
}

pub fn spin_op(axis: Axis) -> Hermitian3 {
    spin_vector_ops()[axis.index()]
}

/// Rank-2 spin tensor `N_ij = {F_i, F_j}/2 - delta_ij F^2/3`.
pub fn spin_tensor_op(i: Axis, j: Axis) -> Hermitian3 {
    let ops = spin_vector_ops();
    let fi = ops[i.index()].0;
    let fj = ops[j.index()].0;
    let a = matmul(&fi, &fj);
    let b = matmul(&fj, &fi);
    let mut out = zeros();
    for r in 0..3 {
        for col in 0..3 {
            out[r][col] = (a[r][col] + b[r][col]) * 0.5;
        }
        if i == j {
            // F^2 = 2 for spin 1
            out[r][r] -= c(2.0 / 3.0);
        }
    }
    Hermitian3::symmetrized(out)
}

/// All nine tensor components, indexed `[i][j]`.
pub fn spin_tensor_ops() -> [[Hermitian3; 3]; 3] {
    Axis::ALL.map(|i| Axis::ALL.map(|j| spin_tensor_op(i, j)))
}
