//! Jones-calculus layer: waveplates, plate chains, decomposition of coins
//! into plate angles, and the optical noise model.
//!
//! Conventions (fast-axis angle θ from horizontal, in degrees):
//!
//! ```text
//! HWP(θ) = [[cos2θ, sin2θ], [sin2θ, −cos2θ]]
//! QWP(θ) = [[cos²θ + i sin²θ, (1 − i) sinθ cosθ], [(1 − i) sinθ cosθ, sin²θ + i cos²θ]]
//! ```
//!
//! A chain lists plates in the order light meets them, so its matrix is the
//! product in reverse list order. `HWP(θ + 90°) = −HWP(θ)` and
//! `QWP(θ + 180°) = QWP(θ)`; canonical angles are taken in `(−45°, 45°]` for
//! half-wave and `(−90°, 90°]` for quarter-wave plates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{levenberg_marquardt, LmOptions};
use crate::qmath::{c, DensityMat, Mat2, PureQubit, C64, ONE};
use crate::tables::PlateRow;
use crate::tol;
use crate::walk::{effective_povm, run_walk, run_walk_mixed, CoinSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlateKind {
    #[serde(rename = "HWP")]
    Hwp,
    #[serde(rename = "QWP")]
    Qwp,
}

impl PlateKind {
    /// Angle period modulo global phase, in degrees.
    pub fn period(self) -> f64 {
        match self {
            PlateKind::Hwp => 90.0,
            PlateKind::Qwp => 180.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PlateKind::Hwp => "HWP",
            PlateKind::Qwp => "QWP",
        }
    }
}

impl std::fmt::Display for PlateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Representative of `angle` in `(−p/2, p/2]` for the plate's period `p`.
pub fn canonical_angle(kind: PlateKind, angle_deg: f64) -> f64 {
    let p = kind.period();
    let half = 0.5 * p;
    let a = half - (half - angle_deg).rem_euclid(p);
    if a <= -half {
        a + p
    } else {
        a
    }
}

/// Distance between two angles modulo the plate period, in degrees.
pub fn angle_distance(kind: PlateKind, a: f64, b: f64) -> f64 {
    canonical_angle(kind, a - b).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveplateSetting {
    pub kind: PlateKind,
    pub angle_deg: f64,
    pub label: String,
}

impl WaveplateSetting {
    pub fn new(kind: PlateKind, angle_deg: f64, label: impl Into<String>) -> Self {
        WaveplateSetting {
            kind,
            angle_deg,
            label: label.into(),
        }
    }

    pub fn matrix(&self) -> Mat2 {
        jones(self.kind, self.angle_deg)
    }

    pub fn canonical(&self) -> Self {
        WaveplateSetting {
            angle_deg: canonical_angle(self.kind, self.angle_deg),
            ..self.clone()
        }
    }
}

/// What a chain implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Realizes {
    Coin { step: u32, site: i64 },
    Preparation,
    Unassigned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateChain {
    pub plates: Vec<WaveplateSetting>,
    pub realizes: Realizes,
}

impl PlateChain {
    pub fn new(plates: Vec<WaveplateSetting>, realizes: Realizes) -> Self {
        PlateChain { plates, realizes }
    }

    /// Unlabelled chain from `(kind, angle)` pairs in light order.
    pub fn from_angles(plates: &[(PlateKind, f64)]) -> Self {
        PlateChain {
            plates: plates
                .iter()
                .map(|&(k, a)| WaveplateSetting::new(k, a, k.as_str()))
                .collect(),
            realizes: Realizes::Unassigned,
        }
    }

    pub fn kinds(&self) -> Vec<PlateKind> {
        self.plates.iter().map(|p| p.kind).collect()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.plates.iter().map(|p| p.angle_deg).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.plates.is_empty()
    }
}

pub fn jones(kind: PlateKind, angle_deg: f64) -> Mat2 {
    let t = angle_deg.to_radians();
    match kind {
        PlateKind::Hwp => {
            let (s2, c2) = (2.0 * t).sin_cos();
            Mat2::real(c2, s2, s2, -c2)
        }
        PlateKind::Qwp => {
            let (s, co) = t.sin_cos();
            let off = c(s * co, -s * co);
            Mat2::new(c(co * co, s * s), off, off, c(s * s, co * co))
        }
    }
}

fn product(kinds: &[PlateKind], angles: &[f64]) -> Mat2 {
    kinds
        .iter()
        .zip(angles)
        .fold(Mat2::identity(), |acc, (&k, &a)| jones(k, a) * acc)
}

/// Ordered Jones product; light traverses the list from first to last.
pub fn chain_matrix(chain: &PlateChain) -> Mat2 {
    product(&chain.kinds(), &chain.angles())
}

fn mat_residual(d: &Mat2) -> Vec<f64> {
    (0..2)
        .flat_map(|i| (0..2).flat_map(move |j| [d.entry(i, j).re, d.entry(i, j).im]))
        .collect()
}

fn global_phase(target: &Mat2, m: &Mat2) -> C64 {
    let z = (target.dagger() * *m).trace();
    if z.norm() > 1e-300 {
        z / z.norm()
    } else {
        ONE
    }
}

/// Multi-start least squares over plate angles. Returns the first start that
/// reaches `tol`, or the best found.
fn fit_angles<F>(n: usize, residual: F, tol: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    const STARTS: [f64; 5] = [0.0, 30.0, -30.0, 60.0, -60.0];
    let total = STARTS.len().pow(n as u32);
    let mut best: (Vec<f64>, f64) = (vec![0.0; n], f64::INFINITY);
    for idx in 0..total {
        let mut k = idx;
        let x0: Vec<f64> = (0..n)
            .map(|_| {
                let a = STARTS[k % STARTS.len()];
                k /= STARTS.len();
                a
            })
            .collect();
        let res = levenberg_marquardt(&residual, &x0, LmOptions::default());
        let norm = res.residual_norm();
        if norm < best.1 {
            best = (res.x, norm);
        }
        if best.1 <= tol {
            break;
        }
    }
    best
}

fn labelled(kinds: &[PlateKind], angles: &[f64], realizes: Realizes) -> PlateChain {
    PlateChain {
        plates: kinds
            .iter()
            .zip(angles)
            .map(|(&k, &a)| WaveplateSetting::new(k, canonical_angle(k, a), k.as_str()))
            .collect(),
        realizes,
    }
}

/// Plate angles whose chain equals `u` up to a global phase.
pub fn decompose_coin(u: &Mat2, template: &[PlateKind]) -> Result<PlateChain> {
    decompose_coin_with_tol(u, template, tol::DECOMPOSE)
}

pub fn decompose_coin_with_tol(u: &Mat2, template: &[PlateKind], tol: f64) -> Result<PlateChain> {
    if !u.is_finite() {
        return Err(Error::NonFinite("coin"));
    }
    if template.is_empty() {
        let d = u.phase_free_distance(&Mat2::identity());
        return if d <= tol {
            Ok(PlateChain::new(vec![], Realizes::Unassigned))
        } else {
            Err(Error::TemplateInsufficient(d))
        };
    }
    let residual = |x: &[f64]| {
        let m = product(template, x);
        mat_residual(&(m - u.scale(global_phase(u, &m))))
    };
    let (x, _) = fit_angles(template.len(), residual, tol * 0.1);
    let chain = labelled(template, &x, Realizes::Unassigned);
    let dist = chain_matrix(&chain).phase_free_distance(u);
    if dist <= tol {
        Ok(chain)
    } else {
        Err(Error::TemplateInsufficient(dist))
    }
}

/// Plate angles whose chain equals `D·u` for some diagonal unitary `D`
/// (a free phase on each output row). Returns the chain and `D`.
pub fn decompose_coin_row_free(u: &Mat2, template: &[PlateKind], tol: f64) -> Result<(PlateChain, [C64; 2])> {
    let diag_of = |m: &Mat2| -> ([C64; 2], f64) {
        let x = *m * u.dagger();
        let d = [x.entry(0, 0), x.entry(1, 1)].map(|z| if z.norm() > 1e-300 { z / z.norm() } else { ONE });
        let dist = (*m - Mat2::diag(d[0], d[1]) * *u).frob_norm();
        (d, dist)
    };
    if template.is_empty() {
        let (d, dist) = diag_of(&Mat2::identity());
        return if dist <= tol {
            Ok((PlateChain::new(vec![], Realizes::Unassigned), d))
        } else {
            Err(Error::TemplateInsufficient(dist))
        };
    }
    let residual = |x: &[f64]| {
        let m = product(template, x);
        let xm = m * u.dagger();
        vec![xm.entry(0, 1).re, xm.entry(0, 1).im, xm.entry(1, 0).re, xm.entry(1, 0).im]
    };
    let (x, _) = fit_angles(template.len(), residual, tol * 0.1);
    let chain = labelled(template, &x, Realizes::Unassigned);
    let (d, dist) = diag_of(&chain_matrix(&chain));
    if dist <= tol {
        Ok((chain, d))
    } else {
        Err(Error::TemplateInsufficient(dist))
    }
}

/// `HWP1` then `QWP1` preparing `ψ` from `|H⟩`, up to a global phase.
pub fn prep_angles(psi: &PureQubit) -> Result<PlateChain> {
    let target = psi.as_array();
    let kinds = [PlateKind::Hwp, PlateKind::Qwp];
    let residual = |x: &[f64]| {
        let v = product(&kinds, x).apply(&[ONE, C64::new(0.0, 0.0)]);
        let ov = target[0].conj() * v[0] + target[1].conj() * v[1];
        let ph = if ov.norm() > 1e-300 { ov / ov.norm() } else { ONE };
        let d = [v[0] - target[0] * ph, v[1] - target[1] * ph];
        vec![d[0].re, d[0].im, d[1].re, d[1].im]
    };
    let (x, _) = fit_angles(2, residual, 1e-12);
    let mut chain = labelled(&kinds, &x, Realizes::Preparation);
    chain.plates[0].label = "HWP1".into();
    chain.plates[1].label = "QWP1".into();
    let out = PureQubit::from_array(chain_matrix(&chain).apply(&[ONE, C64::new(0.0, 0.0)]))?;
    let dist = out.phase_free_distance(psi);
    if dist <= tol::DECOMPOSE {
        Ok(chain)
    } else {
        Err(Error::TemplateInsufficient(dist))
    }
}

/// Slot layout of the ten-plate five-step walk: coin position and plate labels.
const SLOTS: [(u32, i64, &[&str]); 7] = [
    (1, 0, &["QWP2", "HWP2"]),
    (2, 1, &["HWP3"]),
    (2, -1, &["HWP4"]),
    (3, 0, &["QWP3", "HWP5"]),
    (4, 1, &["HWP6"]),
    (4, -1, &["HWP7"]),
    (5, 0, &["QWP4", "HWP8"]),
];

fn slot_labels(step: u32, site: i64) -> &'static [&'static str] {
    SLOTS
        .iter()
        .find(|s| s.0 == step && s.1 == site)
        .map_or(&[], |s| s.2)
}

/// Plate chains for every coin slot of a five-step walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateSchedule {
    pub chains: Vec<PlateChain>,
}

impl PlateSchedule {
    /// Builds chains from labelled angles (`QWP2`…`HWP8`). Labels absent from
    /// the table leave their plates out; a slot with no plates is the identity.
    pub fn from_labelled(angles: &[(&str, f64)]) -> Result<Self> {
        let mut chains = Vec::new();
        for &(step, site, labels) in &SLOTS {
            let plates: Vec<WaveplateSetting> = labels
                .iter()
                .filter_map(|l| {
                    angles.iter().find(|(n, _)| n == l).map(|&(n, a)| {
                        let kind = if n.starts_with('Q') { PlateKind::Qwp } else { PlateKind::Hwp };
                        WaveplateSetting::new(kind, a, n)
                    })
                })
                .collect();
            if !plates.is_empty() {
                chains.push(PlateChain::new(plates, Realizes::Coin { step, site }));
            }
        }
        for (label, _) in angles {
            if !SLOTS.iter().any(|s| s.2.contains(label)) {
                return Err(Error::InvalidSchedule(format!("unknown plate label {label}")));
            }
        }
        Ok(PlateSchedule { chains })
    }

    pub fn from_table(row: &PlateRow) -> Result<Self> {
        Self::from_labelled(row.angles)
    }

    /// The realised coin schedule (exactly unitary by construction).
    pub fn to_schedule(&self) -> Result<CoinSchedule> {
        let mut s = CoinSchedule::new(5, 0)?;
        for ch in &self.chains {
            if let Realizes::Coin { step, site } = ch.realizes {
                s.insert(step, site, chain_matrix(ch))?;
            }
        }
        Ok(s)
    }

    /// All plates in beam order.
    pub fn settings(&self) -> Vec<WaveplateSetting> {
        self.chains.iter().flat_map(|c| c.plates.iter().cloned()).collect()
    }

    pub fn angle(&self, label: &str) -> Option<f64> {
        self.settings().into_iter().find(|p| p.label == label).map(|p| p.angle_deg)
    }

    /// Every plate angle perturbed by independent `N(0, σ²)` jitter.
    pub fn jittered(&self, sigma_deg: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let normal = Normal::new(0.0, sigma_deg).map_err(|e| Error::InvalidNoise(e.to_string()))?;
        let mut out = self.clone();
        for ch in &mut out.chains {
            for p in &mut ch.plates {
                p.angle_deg += normal.sample(rng);
            }
        }
        Ok(out)
    }
}

fn is_diagonal(m: &Mat2) -> bool {
    m.entry(0, 1).norm() <= 1e-12 && m.entry(1, 0).norm() <= 1e-12
}

/// Realises the stage coins at site 0 (steps 1, 3, 5) with the fewest plates
/// that reach them up to output-row phases, propagating those phases into the
/// next stage. Rotation coins at site ±1 become single half-wave plates.
///
/// The stage coins' output branches recombine two steps later with the roles
/// of `H` and `V` exchanged, so a row-phase `diag(p, q)` left on one stage
/// coin appears as `diag(q, p)` on the input of the next.
pub fn schedule_plates(schedule: &CoinSchedule) -> Result<PlateSchedule> {
    if schedule.steps() != 5 || schedule.initial_site() != 0 {
        return Err(Error::InvalidSchedule(
            "plate layout covers five-step schedules starting at site 0".into(),
        ));
    }
    for op in schedule.coins() {
        if slot_labels(op.step, op.site).is_empty()
            && op.matrix.phase_free_distance(&Mat2::identity()) > tol::DECOMPOSE
        {
            return Err(Error::InvalidSchedule(format!(
                "coin at step {}, site {} has no plate slot",
                op.step, op.site
            )));
        }
    }
    let mut chains = Vec::new();
    let mut carry = [ONE, ONE];
    for stage in [1u32, 3, 5] {
        let u = schedule.coin(stage, 0) * Mat2::diag(carry[0].inv(), carry[1].inv());
        let labels = slot_labels(stage, 0);
        let (chain, d) = if is_diagonal(&u) {
            (PlateChain::new(vec![], Realizes::Unassigned), [u.entry(0, 0), u.entry(1, 1)])
        } else {
            decompose_coin_row_free(&u, &[PlateKind::Hwp], tol::DECOMPOSE)
                .or_else(|_| decompose_coin_row_free(&u, &[PlateKind::Qwp, PlateKind::Hwp], tol::DECOMPOSE))
                .or_else(|_| {
                    decompose_coin_row_free(&u, &[PlateKind::Qwp, PlateKind::Hwp, PlateKind::Qwp], tol::DECOMPOSE)
                })?
        };
        if !chain.is_empty() {
            let mut chain = chain;
            let n = chain.plates.len();
            for (i, p) in chain.plates.iter_mut().enumerate() {
                p.label = match (n, p.kind) {
                    (1, _) => labels[1].to_string(),
                    (2, PlateKind::Qwp) => labels[0].to_string(),
                    (2, PlateKind::Hwp) => labels[1].to_string(),
                    _ => format!("{}{}", labels[i.min(1)], ["a", "b", "c"][i]),
                };
            }
            chain.realizes = Realizes::Coin { step: stage, site: 0 };
            chains.push(chain);
        }
        if stage == 5 {
            break;
        }
        // Rotation coins of the next step; their global phases ride along.
        let mut phases = [ONE, ONE];
        for (k, site) in [(0usize, 1i64), (1, -1)] {
            let target = schedule.coin(stage + 1, site);
            let mut ch = decompose_coin(&target, &[PlateKind::Hwp])?;
            phases[k] = global_phase(&target, &chain_matrix(&ch));
            ch.plates[0].label = slot_labels(stage + 1, site)[0].to_string();
            ch.realizes = Realizes::Coin { step: stage + 1, site };
            chains.push(ch);
        }
        // H at site 0 arrives through σx from site −1 (lower row of the stage
        // coin), V through the rotation at site +1 (upper row).
        carry = [phases[1] * d[1], phases[0] * d[0]];
    }
    chains.sort_by_key(|c| match c.realizes {
        Realizes::Coin { step, site } => (step, -site),
        _ => (0, 0),
    });
    Ok(PlateSchedule { chains })
}

/// One line of the angle-table CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleRow {
    #[serde(rename = "B")]
    pub b: String,
    pub label: String,
    pub kind: PlateKind,
    pub angle_deg: f64,
}

pub fn angle_rows(b_label: &str, plates: &PlateSchedule) -> Vec<AngleRow> {
    plates
        .settings()
        .into_iter()
        .map(|p| AngleRow {
            b: b_label.to_string(),
            label: p.label,
            kind: p.kind,
            angle_deg: p.angle_deg,
        })
        .collect()
}

/// Optical imperfections applied to port distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of Gaussian plate-angle jitter, degrees.
    #[serde(default)]
    pub plate_sigma: f64,
    /// Interferometer extinction ratio; `None` means ideal (infinite).
    #[serde(default)]
    pub extinction_ratio: Option<f64>,
    /// Per-port relative detection efficiency in `(0, 1]`.
    #[serde(default = "unit_efficiency")]
    pub efficiency: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn unit_efficiency() -> Vec<f64> {
    vec![1.0; 4]
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::ideal()
    }
}

impl NoiseModel {
    pub fn ideal() -> Self {
        NoiseModel {
            plate_sigma: 0.0,
            extinction_ratio: None,
            efficiency: unit_efficiency(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.plate_sigma.is_finite() && self.plate_sigma >= 0.0) {
            return Err(Error::InvalidNoise(format!("plate_sigma {}", self.plate_sigma)));
        }
        if let Some(er) = self.extinction_ratio {
            if !(er > 1.0) {
                return Err(Error::InvalidNoise(format!("extinction_ratio {er} must exceed 1")));
            }
        }
        if self.efficiency.is_empty() || self.efficiency.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::InvalidNoise("efficiencies must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// `max/min` of the per-port efficiencies.
    pub fn efficiency_ratio(&self) -> f64 {
        let max = self.efficiency.iter().copied().fold(f64::MIN, f64::max);
        let min = self.efficiency.iter().copied().fold(f64::MAX, f64::min);
        max / min
    }

    /// Coherence loss per recombination, `1/extinction_ratio`.
    pub fn dephasing(&self) -> f64 {
        self.extinction_ratio.map_or(0.0, |er| 1.0 / er)
    }

    fn reruns_walk(&self) -> bool {
        self.plate_sigma > 0.0 || self.extinction_ratio.is_some()
    }

    pub fn is_ideal(&self) -> bool {
        !self.reruns_walk() && self.efficiency.iter().all(|&e| e == 1.0)
    }
}

/// Scales each probability by its port efficiency and renormalises.
pub fn apply_efficiency(distribution: &[f64], efficiency: &[f64]) -> Result<Vec<f64>> {
    if distribution.len() != efficiency.len() {
        return Err(Error::InvalidNoise(format!(
            "{} efficiencies for {} outcomes",
            efficiency.len(),
            distribution.len()
        )));
    }
    let scaled: Vec<f64> = distribution.iter().zip(efficiency).map(|(p, e)| p * e).collect();
    let total: f64 = scaled.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidNoise("no detected probability".into()));
    }
    Ok(scaled.into_iter().map(|p| p / total).collect())
}

/// Applies the noise model to a port distribution (ports in descending
/// position order).
///
/// With plate jitter or a finite extinction ratio the walk is re-run: the
/// schedule is realised as plates, every angle is jittered, and the walk is
/// evolved as a density matrix with `H`/`V` coherences damped by
/// `1/extinction_ratio` at every recombination. Otherwise `distribution` is
/// taken as given. Efficiencies are applied last. Deterministic in `seed`.
pub fn apply_noise(
    distribution: &[f64],
    model: &NoiseModel,
    schedule: &CoinSchedule,
    psi: &PureQubit,
) -> Result<Vec<f64>> {
    model.validate()?;
    let base = if model.reruns_walk() {
        let ports = effective_povm(schedule).positions();
        if ports.len() != distribution.len() {
            return Err(Error::InvalidNoise(format!(
                "schedule has {} ports, distribution {}",
                ports.len(),
                distribution.len()
            )));
        }
        let realised = if model.plate_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
            schedule_plates(schedule)?
                .jittered(model.plate_sigma, &mut rng)?
                .to_schedule()?
        } else {
            schedule.clone()
        };
        if model.extinction_ratio.is_some() {
            let mixed = run_walk_mixed(&DensityMat::pure(psi), &realised, model.dephasing());
            ports
                .iter()
                .map(|x| mixed.iter().find(|p| p.0 == *x).map_or(0.0, |p| p.1))
                .collect()
        } else {
            run_walk(psi, &realised).at(&ports)
        }
    } else {
        distribution.to_vec()
    };
    apply_efficiency(&base, &model.efficiency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::build_semi_sic;
    use crate::tables::{povm_coins_b13, selftest_coins_b13, POVM_PLATES, SELFTEST_PLATES};
    use crate::walk::{compile_povm, round_trip_residual};
    use approx::assert_abs_diff_eq;

    #[test]
    fn jones_basics() {
        assert!((jones(PlateKind::Hwp, 45.0) - Mat2::pauli_x()).max_abs() < 1e-15);
        assert!((jones(PlateKind::Hwp, 0.0) - Mat2::pauli_z()).max_abs() < 1e-15);
        let h = jones(PlateKind::Hwp, 26.53);
        assert!((h - povm_coins_b13()[1].2).max_abs() < 1e-3);
        for a in [-170.0, -33.3, 0.0, 12.5, 91.0] {
            for k in [PlateKind::Hwp, PlateKind::Qwp] {
                assert!(jones(k, a).is_unitary(1e-12));
            }
        }
    }

    #[test]
    fn chain_products() {
        let ch = PlateChain::from_angles(&[(PlateKind::Hwp, 45.0), (PlateKind::Hwp, 45.0)]);
        assert!(chain_matrix(&ch).phase_free_distance(&Mat2::identity()) < 1e-12);
        let ch = PlateChain::from_angles(&[(PlateKind::Qwp, 96.26), (PlateKind::Hwp, 25.63)]);
        assert!(chain_matrix(&ch).phase_free_distance(&povm_coins_b13()[6].2) < 2e-3);
        let ch = PlateChain::from_angles(&[(PlateKind::Qwp, 15.28), (PlateKind::Hwp, 0.9)]);
        assert!(chain_matrix(&ch).phase_free_distance(&selftest_coins_b13()[0].2) < 2e-3);
    }

    #[test]
    fn canonical_ranges() {
        assert_eq!(canonical_angle(PlateKind::Hwp, 45.0), 45.0);
        assert_eq!(canonical_angle(PlateKind::Hwp, -45.0), 45.0);
        assert_abs_diff_eq!(canonical_angle(PlateKind::Hwp, 116.53), 26.53, epsilon = 1e-12);
        assert_abs_diff_eq!(canonical_angle(PlateKind::Qwp, 96.26), -83.74, epsilon = 1e-12);
        assert_eq!(canonical_angle(PlateKind::Qwp, -90.0), 90.0);
        assert_abs_diff_eq!(angle_distance(PlateKind::Hwp, 44.99, -45.0), 0.01, epsilon = 1e-9);
    }

    #[test]
    fn single_hwp_recovery() {
        let ch = decompose_coin_with_tol(&povm_coins_b13()[4].2, &[PlateKind::Hwp], 2e-3).unwrap();
        assert!(angle_distance(PlateKind::Hwp, ch.plates[0].angle_deg, 23.02) < 0.05);
        let ch = decompose_coin(&Mat2::pauli_x(), &[PlateKind::Hwp]).unwrap();
        assert_abs_diff_eq!(ch.plates[0].angle_deg, 45.0, epsilon = 1e-9);
        let err = decompose_coin(&jones(PlateKind::Qwp, 20.0), &[PlateKind::Hwp]);
        assert!(matches!(err, Err(Error::TemplateInsufficient(_))));
    }

    #[test]
    fn qwp_hwp_recovery_of_selftest_coin() {
        let u = selftest_coins_b13()[3].2;
        let ch = decompose_coin_with_tol(&u, &[PlateKind::Qwp, PlateKind::Hwp], 2e-3).unwrap();
        assert!(chain_matrix(&ch).phase_free_distance(&u) <= 2e-3);
        let expect = PlateChain::from_angles(&[(PlateKind::Qwp, -62.16), (PlateKind::Hwp, -19.31)]);
        assert!(chain_matrix(&expect).phase_free_distance(&chain_matrix(&ch)) < 2e-3);
    }

    #[test]
    fn preparation_examples() {
        let ch = prep_angles(&PureQubit::h()).unwrap();
        assert_eq!(ch.angles(), vec![0.0, 0.0]);
        for psi in [PureQubit::plus(), PureQubit::from_angles(1.1, -2.3), PureQubit::v()] {
            let ch = prep_angles(&psi).unwrap();
            let out = PureQubit::from_array(chain_matrix(&ch).apply(&[ONE, C64::new(0.0, 0.0)])).unwrap();
            assert!(out.phase_free_distance(&psi) < 1e-9);
        }
    }

    #[test]
    fn compiled_schedule_plates_round_trip() {
        for b in [1.0 / 12.0, 1.0 / 13.0, 1.0 / 14.0, 1.0 / 15.0] {
            let p = build_semi_sic(b).unwrap();
            let plates = schedule_plates(&compile_povm(&p).unwrap()).unwrap();
            let realised = plates.to_schedule().unwrap();
            assert!(round_trip_residual(&realised, &p.effects()) < 1e-9, "B={b}");
            assert!(plates.angle("QWP2").is_none());
        }
    }

    #[test]
    fn compiled_plates_match_table_single_hwps() {
        for row in &POVM_PLATES {
            let p = build_semi_sic(row.b_value()).unwrap();
            let plates = schedule_plates(&compile_povm(&p).unwrap()).unwrap();
            for label in ["HWP3", "HWP4", "HWP6", "HWP7"] {
                let got = plates.angle(label).unwrap();
                let want = row.angle(label).unwrap();
                assert!(angle_distance(PlateKind::Hwp, got, want) < 0.05, "{label}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn table_rows_realise_semi_sic() {
        for row in POVM_PLATES.iter().chain(SELFTEST_PLATES.iter()) {
            let s = PlateSchedule::from_table(row).unwrap().to_schedule().unwrap();
            let povm = effective_povm(&s).to_povm(1e-9).unwrap();
            for o in povm.pairwise_overlaps() {
                assert!((o - row.b_value()).abs() < 2e-3);
            }
        }
    }

    #[test]
    fn noise_model_basics() {
        let s = compile_povm(&build_semi_sic(1.0 / 13.0).unwrap()).unwrap();
        let psi = PureQubit::plus();
        let ideal = run_walk(&psi, &s).probabilities();
        let same = apply_noise(&ideal, &NoiseModel::ideal(), &s, &psi).unwrap();
        for (a, b) in same.iter().zip(&ideal) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let eff = NoiseModel {
            efficiency: vec![1.0, 1.0, 1.0, 0.95],
            ..NoiseModel::ideal()
        };
        let out = apply_noise(&[0.25; 4], &eff, &s, &psi).unwrap();
        assert_abs_diff_eq!(out[0], 0.2532, epsilon = 1e-4);
        assert_abs_diff_eq!(out[3], 0.2405, epsilon = 1e-4);
        let jitter = NoiseModel {
            plate_sigma: 0.5,
            seed: 9,
            ..NoiseModel::ideal()
        };
        let a = apply_noise(&ideal, &jitter, &s, &psi).unwrap();
        let b = apply_noise(&ideal, &jitter, &s, &psi).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(a.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn noise_model_validation() {
        let mut m = NoiseModel::ideal();
        m.extinction_ratio = Some(1.0);
        assert!(m.validate().is_err());
        m.extinction_ratio = Some(220.0);
        m.efficiency = vec![1.0, 0.0, 1.0, 1.0];
        assert!(m.validate().is_err());
        let json = r#"{"plate_sigma":0.1,"extinction_ratio":220,"efficiency":[1,0.97,0.99,0.95],"seed":4}"#;
        let m: NoiseModel = serde_json::from_str(json).unwrap();
        m.validate().unwrap();
        assert_abs_diff_eq!(m.efficiency_ratio(), 1.0 / 0.95, epsilon = 1e-12);
    }
}
