//! The semi-SIC qubit family and general four-outcome POVM utilities.
//!
//! For `B ∈ (1/16, 1/12]` the family has rank-one elements
//!
//! ```text
//! E₁ = a₋|ψ₁⟩⟨ψ₁|   E₂ = a₋|ψ₂⟩⟨ψ₂|   E₃ = a₊|ψ₃⟩⟨ψ₃|   E₄ = a₊|ψ₄⟩⟨ψ₄|
//! a± = (1 ± √(1 − 12B))/2
//! |ψ₁⟩ = |0⟩,  |ψ₂⟩ = r|0⟩ + √(1 − r²)|1⟩,  |ψ₃,₄⟩ = |0⟩/√3 − √(2/3) e^{±iθ}|1⟩
//! ```
//!
//! with `Tr[E_x E_y] = B` for every pair. At `B = 1/12` all traces are 1/2 and
//! the set is the qubit SIC (a regular tetrahedron on the Bloch sphere).
//! Element order is fixed; port mappings and tables downstream rely on it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::overlap::check_range;
use crate::qmath::{
    c, dot3, eig_hermitian, hs_inner, norm3, phase, r, sqrt_psd, DensityMat, Mat2, PureQubit,
    Vec3, C64,
};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiSicParams {
    #[serde(rename = "B")]
    pub b: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    pub r: f64,
    pub theta: f64,
}

pub fn semi_sic_params(b: f64) -> Result<SemiSicParams> {
    check_range(b)?;
    let s = (1.0 - 12.0 * b).max(0.0).sqrt();
    let a_minus = 0.5 * (1.0 - s);
    let a_plus = 0.5 * (1.0 + s);
    let r = (2.0 * b.sqrt() / (1.0 - s)).min(1.0);
    let cos_theta = ((1.0 - 8.0 * b - s).max(0.0).sqrt() / (4.0 * b.sqrt())).clamp(-1.0, 1.0);
    Ok(SemiSicParams {
        b,
        a_minus,
        a_plus,
        r,
        theta: cos_theta.acos(),
    })
}

impl SemiSicParams {
    /// The four unit vectors `|ψ_x⟩` in element order.
    pub fn vectors(&self) -> [PureQubit; 4] {
        let s3 = 1.0 / 3f64.sqrt();
        let t3 = (2.0f64 / 3.0).sqrt();
        let mk = |a: C64, b: C64| PureQubit::from_amplitudes(a, b).expect("unit vector");
        [
            PureQubit::h(),
            mk(r(self.r), r((1.0 - self.r * self.r).max(0.0).sqrt())),
            mk(r(s3), -phase(self.theta) * t3),
            mk(r(s3), -phase(-self.theta) * t3),
        ]
    }

    pub fn weights(&self) -> [f64; 4] {
        [self.a_minus, self.a_minus, self.a_plus, self.a_plus]
    }

    /// The trace spectrum `{a₋, a₋, a₊, a₊}`, ascending.
    pub fn trace_spectrum(&self) -> [f64; 4] {
        self.weights()
    }
}

/// One effect `E_x = (a_x/2)(I + n_x·σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PovmElement {
    #[serde(rename = "matrix")]
    pub op: Mat2,
    pub weight: f64,
    /// `|ψ_x⟩` with `E_x = a_x|ψ_x⟩⟨ψ_x|`, present for rank-one effects.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<PureQubit>,
    pub bloch: Vec3,
}

impl PovmElement {
    /// Derives weight, Bloch direction and (when rank one) the unit vector.
    pub fn from_effect(op: Mat2, psd_tol: f64) -> Result<Self> {
        if !op.is_finite() {
            return Err(Error::NonFinite("POVM element"));
        }
        let herm = op.hermiticity_residual();
        if herm > psd_tol {
            return Err(Error::NotHermitian(herm));
        }
        let op = op.hermitian_part();
        let eig = eig_hermitian(&op)?;
        if eig.values[1] < -psd_tol {
            return Err(Error::NotPsd(eig.values[1]));
        }
        let (weight, v) = op.bloch_components();
        let bloch = if weight > 1e-300 {
            [v[0] / weight, v[1] / weight, v[2] / weight]
        } else {
            [0.0; 3]
        };
        let vector = (eig.values[1].abs() <= tol::POVM && eig.values[0] > tol::POVM)
            .then_some(eig.vectors[0]);
        Ok(PovmElement {
            op,
            weight,
            vector,
            bloch,
        })
    }

    pub fn rank_one(weight: f64, psi: &PureQubit) -> Self {
        PovmElement {
            op: psi.projector().scale_re(weight),
            weight,
            vector: Some(*psi),
            bloch: psi.bloch(),
        }
    }

    /// Smaller eigenvalue of the effect; zero for rank-one elements.
    pub fn second_eigenvalue(&self) -> f64 {
        self.op.eigenvalues()[1]
    }
}

/// An ordered list of effects on the qubit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Povm {
    pub label: String,
    /// Family parameter when the POVM was generated from one.
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub elements: Vec<PovmElement>,
}

impl Povm {
    /// Validates positivity and completeness at the default tolerance.
    pub fn new(label: impl Into<String>, effects: Vec<Mat2>) -> Result<Self> {
        Self::with_tolerance(label, effects, tol::POVM)
    }

    /// As [`Povm::new`] with an explicit positivity/completeness tolerance,
    /// for effects derived from rounded or measured data.
    pub fn with_tolerance(label: impl Into<String>, effects: Vec<Mat2>, tol: f64) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::InvalidPovm("no elements".into()));
        }
        let elements = effects
            .into_iter()
            .map(|e| PovmElement::from_effect(e, tol))
            .collect::<Result<Vec<_>>>()?;
        let povm = Povm {
            label: label.into(),
            b: None,
            elements,
        };
        let res = povm.completeness_residual();
        if res > tol {
            return Err(Error::InvalidPovm(format!(
                "completeness residual {res:.3e}"
            )));
        }
        Ok(povm)
    }

    pub fn with_b(mut self, b: Option<f64>) -> Self {
        self.b = b;
        self
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn effects(&self) -> Vec<Mat2> {
        self.elements.iter().map(|e| e.op).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.weight).collect()
    }

    /// `‖Σ_x E_x − I‖_F`
    pub fn completeness_residual(&self) -> f64 {
        (self.elements.iter().map(|e| e.op).sum::<Mat2>() - Mat2::identity()).frob_norm()
    }

    /// Pairwise `Tr[E_x E_y]` for `x < y`, in lexicographic pair order.
    pub fn pairwise_overlaps(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(hs_inner(&self.elements[i].op, &self.elements[j].op));
            }
        }
        out
    }

    /// Conjugates every effect, `E ↦ U E U†`.
    pub fn transformed(&self, u: &Mat2) -> Result<Povm> {
        let effects = self
            .elements
            .iter()
            .map(|e| *u * e.op * u.dagger())
            .collect();
        Ok(Povm::with_tolerance(self.label.clone(), effects, tol::COMPILE)?.with_b(self.b))
    }

    /// Largest entrywise deviation between corresponding effects.
    pub fn max_deviation(&self, other: &Povm) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        self.elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| (a.op - b.op).max_abs())
            .fold(0.0, f64::max)
    }
}

impl<'de> Deserialize<'de> for Povm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct RawElement {
            matrix: Mat2,
        }
        #[derive(Deserialize)]
        struct Raw {
            #[serde(default)]
            label: String,
            #[serde(rename = "B", default)]
            b: Option<f64>,
            elements: Vec<RawElement>,
        }
        let raw = Raw::deserialize(d)?;
        let effects = raw.elements.into_iter().map(|e| e.matrix).collect();
        Povm::new(raw.label, effects)
            .map(|p| p.with_b(raw.b))
            .map_err(serde::de::Error::custom)
    }
}

pub fn build_semi_sic(b: f64) -> Result<Povm> {
    let p = semi_sic_params(b)?;
    let elements = p
        .vectors()
        .iter()
        .zip(p.weights())
        .map(|(psi, w)| PovmElement::rank_one(w, psi))
        .collect();
    Ok(Povm {
        label: format!("semi-SIC B={b}"),
        b: Some(b),
        elements,
    })
}

/// `p_i = Tr[ρ E_i]`; rounding negatives down to −1e-12 are clamped to zero.
pub fn born_probabilities(povm: &Povm, rho: &DensityMat) -> Result<Vec<f64>> {
    povm.elements
        .iter()
        .map(|e| clamp_probability(rho.expectation(&e.op)))
        .collect()
}

pub(crate) fn clamp_probability(p: f64) -> Result<f64> {
    if p < -tol::NEG_PROB {
        Err(Error::NegativeProbability(p))
    } else {
        Ok(p.max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    pub residual: f64,
}

impl Check {
    fn at(residual: f64, tol: f64) -> Self {
        Check {
            passed: residual <= tol,
            residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub completeness: Check,
    pub positivity: Check,
    pub rank_one: Check,
    /// Against the supplied `B`, or against the mean overlap when none is given.
    pub symmetry: Check,
    /// `{a₋, a₋, a₊, a₊}` implied by the reference overlap; absent when that
    /// overlap lies outside the family range.
    pub trace_spectrum: Option<Check>,
    pub reference_b: f64,
    pub traces: Vec<f64>,
    pub overlaps: Vec<f64>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.completeness.passed
            && self.positivity.passed
            && self.rank_one.passed
            && self.symmetry.passed
            && self.trace_spectrum.is_some_and(|c| c.passed)
    }

    pub fn max_residual(&self) -> f64 {
        [
            self.completeness.residual,
            self.positivity.residual,
            self.rank_one.residual,
            self.symmetry.residual,
            self.trace_spectrum.map_or(f64::INFINITY, |c| c.residual),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn verify_povm(povm: &Povm, b: Option<f64>) -> VerificationReport {
    verify_povm_with(povm, b, tol::POVM)
}

pub fn verify_povm_with(povm: &Povm, b: Option<f64>, tol: f64) -> VerificationReport {
    let eigs: Vec<[f64; 2]> = povm.elements.iter().map(|e| e.op.eigenvalues()).collect();
    let min_eig = eigs.iter().map(|e| e[1]).fold(f64::INFINITY, f64::min);
    let positivity = Check::at((-min_eig).max(0.0), tol);
    let rank_one = Check::at(eigs.iter().map(|e| e[1].abs()).fold(0.0, f64::max), tol);
    let overlaps = povm.pairwise_overlaps();
    let reference_b =
        b.unwrap_or_else(|| overlaps.iter().sum::<f64>() / overlaps.len().max(1) as f64);
    let symmetry = Check::at(
        overlaps
            .iter()
            .map(|o| (o - reference_b).abs())
            .fold(0.0, f64::max),
        tol,
    );
    let mut traces = povm.weights();
    traces.sort_by(f64::total_cmp);
    let trace_spectrum = semi_sic_params(reference_b).ok().and_then(|p| {
        (traces.len() == 4).then(|| {
            let dev = traces
                .iter()
                .zip(p.trace_spectrum())
                .map(|(t, s)| (t - s).abs())
                .fold(0.0, f64::max);
            Check::at(dev, tol)
        })
    });
    VerificationReport {
        completeness: Check::at(povm.completeness_residual(), tol),
        positivity,
        rank_one,
        symmetry,
        trace_spectrum,
        reference_b,
        traces,
        overlaps,
    }
}

/// Bloch directions and weights with `E_x = (a_x/2)(I + n_x·σ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochSet {
    pub vectors: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl BlochSet {
    /// `Σ_x a_x n_x`, zero for any complete POVM.
    pub fn weighted_sum(&self) -> Vec3 {
        let mut s = [0.0; 3];
        for (v, w) in self.vectors.iter().zip(&self.weights) {
            for k in 0..3 {
                s[k] += w * v[k];
            }
        }
        s
    }

    /// Angle in radians between directions `i` and `j`.
    pub fn angle(&self, i: usize, j: usize) -> f64 {
        let a = &self.vectors[i];
        let b = &self.vectors[j];
        (dot3(a, b) / (norm3(a) * norm3(b))).clamp(-1.0, 1.0).acos()
    }
}

pub fn bloch_vectors(povm: &Povm) -> Result<BlochSet> {
    let mut vectors = Vec::with_capacity(povm.len());
    for (index, e) in povm.elements.iter().enumerate() {
        let second = e.second_eigenvalue();
        if second.abs() > tol::POVM || e.weight <= tol::POVM {
            return Err(Error::NotRankOne {
                index,
                eigenvalue: second,
            });
        }
        vectors.push(e.bloch);
    }
    Ok(BlochSet {
        vectors,
        weights: povm.weights(),
    })
}

/// A random rank-one four-outcome POVM: Gaussian vectors `v_i` mapped to
/// `k_i = v_i S^{-1/2}` with `S = Σ v_i v_i†`, so that `Σ k_i†k_i = I`.
pub fn random_rank_one_povm<R: Rng + ?Sized>(rng: &mut R) -> Povm {
    loop {
        let vs: Vec<[C64; 2]> = (0..4)
            .map(|_| {
                let mut g = || rng.sample::<f64, _>(StandardNormal);
                [c(g(), g()), c(g(), g())]
            })
            .collect();
        let frame: Mat2 = vs.iter().map(|v| Mat2::outer(v, v)).sum();
        let Ok(root) = sqrt_psd(&frame) else { continue };
        let Some(inv_root) = root.inverse() else { continue };
        let effects: Vec<Mat2> = vs
            .iter()
            .map(|v| {
                let w = inv_root.apply(v);
                Mat2::outer(&w, &w)
            })
            .collect();
        if let Ok(p) = Povm::new("random rank-one", effects) {
            if p.elements.iter().all(|e| e.vector.is_some()) {
                return p;
            }
        }
    }
}
