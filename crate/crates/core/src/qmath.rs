//! Qubit-sized complex linear algebra.
//!
//! Everything here is fixed to dimension two and uses closed forms (trace and
//! determinant) instead of iterative solvers, so results are deterministic to
//! the last bit for a given input.
//!
//! JSON conventions used throughout the crate: a complex number is `[re, im]`
//! and a [`Mat2`] is the row-major list of its four entries.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tol;

pub type C64 = num_complex::Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub type Vec3 = [f64; 3];

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Unit phase `e^{iφ}`.
#[inline]
pub fn phase(phi: f64) -> C64 {
    C64::from_polar(1.0, phi)
}

fn finite(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Multiplies a two-component row or column by the phase that makes its first
/// nonzero entry real and positive.
pub fn canonical_phase(v: [C64; 2]) -> [C64; 2] {
    let lead = if v[0].norm() > 1e-14 { v[0] } else { v[1] };
    let n = lead.norm();
    if n == 0.0 {
        return v;
    }
    let f = lead.conj() / n;
    [v[0] * f, v[1] * f]
}

pub fn norm2(v: &[C64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

/// The unit vector orthogonal to `v` (as a row, `v·w† = 0`), canonically phased.
pub fn orthogonal_complement(v: [C64; 2]) -> [C64; 2] {
    let n = norm2(&v);
    if n == 0.0 {
        return [ZERO, ONE];
    }
    canonical_phase([-v[1].conj() / n, v[0].conj() / n])
}

/// A 2×2 complex matrix stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    /// Checked constructor that rejects NaN and infinite entries.
    pub fn try_new(a: C64, b: C64, c: C64, d: C64) -> Result<Self> {
        let m = Mat2::new(a, b, c, d);
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::NonFinite("Mat2"))
        }
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2::new(r(a), r(b), r(c), r(d))
    }

    pub const fn identity() -> Self {
        Mat2::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn zero() -> Self {
        Mat2::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn pauli_x() -> Self {
        Mat2::new(ZERO, ONE, ONE, ZERO)
    }

    pub const fn pauli_y() -> Self {
        Mat2::new(ZERO, C64::new(0.0, -1.0), I, ZERO)
    }

    pub fn pauli_z() -> Self {
        Mat2::real(1.0, 0.0, 0.0, -1.0)
    }

    pub fn diag(a: C64, d: C64) -> Self {
        Mat2::new(a, ZERO, ZERO, d)
    }

    /// Builds the matrix whose rows are `top` and `bottom`.
    pub fn from_rows(top: [C64; 2], bottom: [C64; 2]) -> Self {
        Mat2([top, bottom])
    }

    /// `|a⟩⟨b|`
    pub fn outer(a: &[C64; 2], b: &[C64; 2]) -> Self {
        Mat2::new(
            a[0] * b[0].conj(),
            a[0] * b[1].conj(),
            a[1] * b[0].conj(),
            a[1] * b[1].conj(),
        )
    }

    /// `(weight/2)(I + n·σ)`
    pub fn from_bloch(weight: f64, n: Vec3) -> Self {
        let h = 0.5 * weight;
        Mat2::new(
            r(h * (1.0 + n[2])),
            c(h * n[0], -h * n[1]),
            c(h * n[0], h * n[1]),
            r(h * (1.0 - n[2])),
        )
    }

    /// Trace and `Re Tr[σ_i M]` for i = x, y, z. For Hermitian `M` this is the
    /// unnormalised Bloch decomposition `M = (t I + v·σ)/2`.
    pub fn bloch_components(&self) -> (f64, Vec3) {
        let [[a, b], [cc, d]] = self.0;
        let t = (a + d).re;
        let x = (b + cc).re;
        let y = (b - cc).im * -1.0;
        let z = (a - d).re;
        (t, [x, y, z])
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn row(&self, i: usize) -> [C64; 2] {
        self.0[i]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| finite(*z))
    }

    pub fn dagger(&self) -> Self {
        let [[a, b], [cc, d]] = self.0;
        Mat2::new(a.conj(), cc.conj(), b.conj(), d.conj())
    }

    pub fn transpose(&self) -> Self {
        let [[a, b], [cc, d]] = self.0;
        Mat2::new(a, cc, b, d)
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: C64) -> Self {
        let [[a, b], [cc, d]] = self.0;
        Mat2::new(a * s, b * s, cc * s, d * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(r(s))
    }

    pub fn frob_norm(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &[C64; 2]) -> [C64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Row vector times matrix, `v M`.
    pub fn left_apply(&self, v: &[C64; 2]) -> [C64; 2] {
        [
            v[0] * self.0[0][0] + v[1] * self.0[1][0],
            v[0] * self.0[0][1] + v[1] * self.0[1][1],
        ]
    }

    /// Inverse, or `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() < 1e-300 {
            return None;
        }
        let [[a, b], [cc, dd]] = self.0;
        Some(Mat2::new(dd / d, -b / d, -cc / d, a / d))
    }

    /// `‖U†U − I‖_F`
    pub fn unitarity_residual(&self) -> f64 {
        (self.dagger() * *self - Mat2::identity()).frob_norm()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        (*self - self.dagger()).frob_norm()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// Hermitian and both eigenvalues ≥ −tol.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.hermitian_part().eigenvalues()[1] >= -tol
    }

    /// `(M + M†)/2`
    pub fn hermitian_part(&self) -> Self {
        (*self + self.dagger()).scale_re(0.5)
    }

    /// Eigenvalues (descending) of the Hermitian part.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let h = self.hermitian_part();
        let a = h.0[0][0].re;
        let d = h.0[1][1].re;
        let b = h.0[0][1];
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean + rad, mean - rad]
    }

    /// `min_φ ‖self − e^{iφ} other‖_F`, the distance modulo global phase.
    pub fn phase_free_distance(&self, other: &Mat2) -> f64 {
        let overlap = (other.dagger() * *self).trace();
        let ph = if overlap.norm() > 1e-300 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        (*self - other.scale(ph)).frob_norm()
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += o.0[i][j];
            }
        }
        out
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + (-o)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale_re(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        mat_mul(&self, &o)
    }
}

impl std::iter::Sum for Mat2 {
    fn sum<It: Iterator<Item = Mat2>>(iter: It) -> Mat2 {
        iter.fold(Mat2::zero(), |acc, m| acc + m)
    }
}

impl Serialize for Mat2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let flat = [self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]];
        flat.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let flat: Vec<C64> = Vec::deserialize(d)?;
        if flat.len() != 4 {
            return Err(serde::de::Error::custom(format!(
                "Mat2 needs 4 entries, got {}",
                flat.len()
            )));
        }
        Mat2::try_new(flat[0], flat[1], flat[2], flat[3]).map_err(serde::de::Error::custom)
    }
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let x = &a.0;
    let y = &b.0;
    Mat2::new(
        x[0][0] * y[0][0] + x[0][1] * y[1][0],
        x[0][0] * y[0][1] + x[0][1] * y[1][1],
        x[1][0] * y[0][0] + x[1][1] * y[1][0],
        x[1][0] * y[0][1] + x[1][1] * y[1][1],
    )
}

/// `Re Tr[a†b]`
pub fn hs_inner(a: &Mat2, b: &Mat2) -> f64 {
    a.0.iter()
        .flatten()
        .zip(b.0.iter().flatten())
        .map(|(x, y)| (x.conj() * y).re)
        .sum()
}

/// Uhlmann fidelity `(Tr√(√a b √a))²`, closed form for qubits.
pub fn fidelity(a: &Mat2, b: &Mat2) -> f64 {
    let cross = hs_inner(a, b);
    let da = a.det().re.max(0.0);
    let db = b.det().re.max(0.0);
    (cross + 2.0 * (da * db).sqrt()).clamp(0.0, 1.0)
}

/// `½ Σ |λ_i(a − b)|` for Hermitian inputs.
pub fn trace_distance(a: &Mat2, b: &Mat2) -> f64 {
    let [l0, l1] = (*a - *b).eigenvalues();
    0.5 * (l0.abs() + l1.abs())
}

/// Eigen-decomposition of a Hermitian 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen {
    /// Descending.
    pub values: [f64; 2],
    pub vectors: [PureQubit; 2],
}

impl Eigen {
    pub fn reconstruct(&self) -> Mat2 {
        self.vectors[0]
            .projector()
            .scale_re(self.values[0])
            + self.vectors[1].projector().scale_re(self.values[1])
    }
}

pub fn eig_hermitian(m: &Mat2) -> Result<Eigen> {
    let res = m.hermiticity_residual();
    if !m.is_finite() {
        return Err(Error::NonFinite("eig_hermitian"));
    }
    if res > tol::PSD {
        return Err(Error::NotHermitian(res));
    }
    let h = m.hermitian_part();
    let a = h.0[0][0].re;
    let d = h.0[1][1].re;
    let b = h.0[0][1];
    let values = h.eigenvalues();
    let top = if b.norm() <= 1e-15 * (a.abs() + d.abs()).max(1e-300) {
        if a >= d {
            [ONE, ZERO]
        } else {
            [ZERO, ONE]
        }
    } else {
        // (a−λ)v0 + b v1 = 0 and b* v0 + (d−λ) v1 = 0; use the better-conditioned row.
        let l = values[0];
        let v1 = [b, r(l - a)];
        let v2 = [r(l - d), b.conj()];
        if norm2(&v1) >= norm2(&v2) {
            v1
        } else {
            v2
        }
    };
    let top = PureQubit::from_amplitudes(top[0], top[1])?.canonical();
    let bottom = PureQubit::from_array(orthogonal_complement(top.as_array()))?;
    Ok(Eigen {
        values,
        vectors: [top, bottom],
    })
}

/// Principal square root of a PSD matrix.
pub fn sqrt_psd(m: &Mat2) -> Result<Mat2> {
    if !m.is_hermitian(tol::PSD) {
        return Err(Error::NotHermitian(m.hermiticity_residual()));
    }
    let h = m.hermitian_part();
    let min = h.eigenvalues()[1];
    if min < -tol::PSD {
        return Err(Error::NotPsd(min));
    }
    // √M = (M + √det I) / √(Tr M + 2√det)
    let s = h.det().re.max(0.0).sqrt();
    let t = h.trace().re + 2.0 * s;
    if t <= 0.0 {
        return Ok(Mat2::zero());
    }
    Ok((h + Mat2::identity().scale_re(s)).scale_re(1.0 / t.sqrt()))
}

/// A normalised qubit state `amp_h|H⟩ + amp_v|V⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureQubit {
    amp_h: C64,
    amp_v: C64,
}

impl PureQubit {
    /// Normalises the given amplitudes.
    pub fn from_amplitudes(amp_h: C64, amp_v: C64) -> Result<Self> {
        if !finite(amp_h) || !finite(amp_v) {
            return Err(Error::NonFinite("PureQubit"));
        }
        let n = (amp_h.norm_sqr() + amp_v.norm_sqr()).sqrt();
        if n < 1e-300 {
            return Err(Error::ZeroVector);
        }
        Ok(PureQubit {
            amp_h: amp_h / n,
            amp_v: amp_v / n,
        })
    }

    pub fn from_array(v: [C64; 2]) -> Result<Self> {
        Self::from_amplitudes(v[0], v[1])
    }

    /// `cos(θ/2)|H⟩ + e^{iφ} sin(θ/2)|V⟩`
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        PureQubit {
            amp_h: r((0.5 * theta).cos()),
            amp_v: phase(phi) * (0.5 * theta).sin(),
        }
    }

    pub fn from_bloch(n: Vec3) -> Result<Self> {
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if len < 1e-300 {
            return Err(Error::ZeroVector);
        }
        let z = (n[2] / len).clamp(-1.0, 1.0);
        Ok(Self::from_angles(z.acos(), n[1].atan2(n[0])))
    }

    pub fn h() -> Self {
        PureQubit { amp_h: ONE, amp_v: ZERO }
    }

    pub fn v() -> Self {
        PureQubit { amp_h: ZERO, amp_v: ONE }
    }

    pub fn plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureQubit { amp_h: r(s), amp_v: r(s) }
    }

    pub fn amp_h(&self) -> C64 {
        self.amp_h
    }

    pub fn amp_v(&self) -> C64 {
        self.amp_v
    }

    pub fn as_array(&self) -> [C64; 2] {
        [self.amp_h, self.amp_v]
    }

    /// Global phase fixed so the first nonzero amplitude is real positive.
    pub fn canonical(&self) -> Self {
        let [a, b] = canonical_phase(self.as_array());
        PureQubit { amp_h: a, amp_v: b }
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PureQubit) -> C64 {
        self.amp_h.conj() * other.amp_h + self.amp_v.conj() * other.amp_v
    }

    pub fn projector(&self) -> Mat2 {
        Mat2::outer(&self.as_array(), &self.as_array())
    }

    pub fn bloch(&self) -> Vec3 {
        self.projector().bloch_components().1
    }

    /// `‖a − e^{iφ}b‖` minimised over φ.
    pub fn phase_free_distance(&self, other: &PureQubit) -> f64 {
        let ov = other.inner(self);
        let ph = if ov.norm() > 1e-300 { ov / ov.norm() } else { ONE };
        let d0 = self.amp_h - ph * other.amp_h;
        let d1 = self.amp_v - ph * other.amp_v;
        (d0.norm_sqr() + d1.norm_sqr()).sqrt()
    }
}

impl Serialize for PureQubit {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PureQubit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: [C64; 2] = Deserialize::deserialize(d)?;
        PureQubit::from_array(v).map_err(serde::de::Error::custom)
    }
}

/// A qubit density matrix: Hermitian, unit trace, PSD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityMat {
    m: Mat2,
}

impl DensityMat {
    pub fn new(m: Mat2) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite("DensityMat"));
        }
        let herm = m.hermiticity_residual();
        if herm > tol::STATE {
            return Err(Error::InvalidState(format!("not Hermitian ({herm:.3e})")));
        }
        let t = m.trace();
        if (t - ONE).norm() > tol::STATE {
            return Err(Error::InvalidState(format!("trace {t}")));
        }
        let min = m.eigenvalues()[1];
        if min < -tol::PSD {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(DensityMat {
            m: m.hermitian_part(),
        })
    }

    pub fn pure(psi: &PureQubit) -> Self {
        DensityMat { m: psi.projector() }
    }

    pub fn maximally_mixed() -> Self {
        DensityMat {
            m: Mat2::identity().scale_re(0.5),
        }
    }

    /// `(I + n·σ)/2` with `|n| ≤ 1`.
    pub fn from_bloch(n: Vec3) -> Result<Self> {
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if len > 1.0 + tol::STATE {
            return Err(Error::InvalidState(format!("Bloch length {len}")));
        }
        Ok(DensityMat {
            m: Mat2::from_bloch(1.0, n),
        })
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    pub fn bloch(&self) -> Vec3 {
        self.m.bloch_components().1
    }

    pub fn purity(&self) -> f64 {
        hs_inner(&self.m, &self.m)
    }

    /// `Re Tr[ρ E]`
    pub fn expectation(&self, e: &Mat2) -> f64 {
        hs_inner(&self.m, e)
    }
}

impl<'de> Deserialize<'de> for DensityMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = Mat2::deserialize(d)?;
        DensityMat::new(m).map_err(serde::de::Error::custom)
    }
}

pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: &Vec3) -> f64 {
    dot3(a, a).sqrt()
}

pub fn sub3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Euler-parametrised unitary `e^{iα} Rz(β) Ry(γ) Rz(δ)`.
pub fn euler_unitary(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Mat2 {
    let rz = |t: f64| Mat2::diag(phase(-0.5 * t), phase(0.5 * t));
    let (s, co) = (0.5 * gamma).sin_cos();
    let ry = Mat2::real(co, -s, s, co);
    (rz(beta) * ry * rz(delta)).scale(phase(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (*a - *b).max_abs() <= tol
    }

    fn random_hermitian(rng: &mut ChaCha8Rng) -> Mat2 {
        let a = rng.random_range(-3.0..3.0);
        let d = rng.random_range(-3.0..3.0);
        let b = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        Mat2::new(r(a), b, b.conj(), r(d))
    }

    #[test]
    fn products() {
        assert_eq!(Mat2::identity() * Mat2::identity(), Mat2::identity());
        assert_eq!(Mat2::pauli_x() * Mat2::pauli_x(), Mat2::identity());
        let coin = Mat2::real(0.6011, 0.7992, 0.7992, -0.6011);
        assert!(close(&(coin * coin), &Mat2::identity(), 1e-3));
    }

    #[test]
    fn eig_diagonal_and_projector() {
        let e = eig_hermitian(&Mat2::pauli_z()).unwrap();
        assert_eq!(e.values, [1.0, -1.0]);
        assert_eq!(e.vectors[0], PureQubit::h());
        assert_abs_diff_eq!(e.vectors[1].phase_free_distance(&PureQubit::v()), 0.0, epsilon = 1e-15);

        let e = eig_hermitian(&PureQubit::plus().projector()).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.values[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = Mat2::real(0.0, 1.0, 0.0, 0.0);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn eig_degenerate_uses_basis() {
        let e = eig_hermitian(&Mat2::identity().scale_re(0.3)).unwrap();
        assert_eq!(e.vectors[0], PureQubit::h());
        assert_abs_diff_eq!(e.values[1], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn eig_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let m = random_hermitian(&mut rng);
            let e = eig_hermitian(&m).unwrap();
            assert!((e.reconstruct() - m).frob_norm() <= 1e-10);
            assert!(e.values[0] >= e.values[1]);
        }
    }

    #[test]
    fn sqrt_cases() {
        assert_eq!(sqrt_psd(&Mat2::identity()).unwrap(), Mat2::identity());
        let m = PureQubit::h().projector().scale_re(4.0);
        assert!(close(&sqrt_psd(&m).unwrap(), &PureQubit::h().projector().scale_re(2.0), 1e-15));
        assert!(matches!(sqrt_psd(&Mat2::pauli_z()), Err(Error::NotPsd(_))));
        assert_eq!(sqrt_psd(&Mat2::zero()).unwrap(), Mat2::zero());
    }

    #[test]
    fn sqrt_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let a = random_hermitian(&mut rng);
            let m = a * a;
            let s = sqrt_psd(&m).unwrap();
            assert!(s.is_positive_semidefinite(1e-10));
            assert!((s * s - m).frob_norm() <= 1e-10, "{:?}", (s * s - m).frob_norm());
        }
    }

    #[test]
    fn hs_and_distances() {
        assert_eq!(hs_inner(&Mat2::identity(), &Mat2::identity()), 2.0);
        let h = PureQubit::h().projector();
        let v = PureQubit::v().projector();
        assert_abs_diff_eq!(trace_distance(&h, &v), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity(&h, &v), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity(&h, &h), 1.0, epsilon = 1e-15);
        let mixed = Mat2::identity().scale_re(0.5);
        assert_abs_diff_eq!(fidelity(&h, &mixed), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&h, &mixed), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn hs_symmetric_for_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let a = random_hermitian(&mut rng);
            let b = random_hermitian(&mut rng);
            assert!((hs_inner(&a, &b) - hs_inner(&b, &a)).abs() <= 1e-14);
        }
    }

    #[test]
    fn euler_unitaries_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..1000 {
            let u = euler_unitary(
                rng.random_range(0.0..6.3),
                rng.random_range(0.0..6.3),
                rng.random_range(0.0..6.3),
                rng.random_range(0.0..6.3),
            );
            assert!(u.unitarity_residual() <= 1e-12);
        }
    }

    #[test]
    fn bloch_round_trip() {
        let n = [0.3, -0.4, 0.5];
        let m = Mat2::from_bloch(0.7, n);
        let (t, v) = m.bloch_components();
        assert_abs_diff_eq!(t, 0.7, epsilon = 1e-15);
        for i in 0..3 {
            assert_abs_diff_eq!(v[i], 0.7 * n[i], epsilon = 1e-15);
        }
        let psi = PureQubit::from_angles(1.1, 0.4);
        let back = PureQubit::from_bloch(psi.bloch()).unwrap();
        assert!(psi.phase_free_distance(&back) < 1e-12);
    }

    #[test]
    fn constructors_reject_bad_input() {
        assert!(Mat2::try_new(r(f64::NAN), ZERO, ZERO, ONE).is_err());
        assert!(PureQubit::from_amplitudes(ZERO, ZERO).is_err());
        assert!(DensityMat::new(Mat2::identity()).is_err());
        assert!(DensityMat::new(Mat2::pauli_z().scale_re(0.5) + Mat2::identity().scale_re(0.5)).is_ok());
        assert!(DensityMat::from_bloch([1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn json_conventions() {
        let m = Mat2::new(c(1.0, 2.0), ZERO, ZERO, c(0.0, -1.0));
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,2.0],[0.0,0.0],[0.0,0.0],[0.0,-1.0]]");
        let back: Mat2 = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Mat2>("[[1.0,0.0]]").is_err());
    }
}
