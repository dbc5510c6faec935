//! Prepare-and-measure self-testing of semi-SIC POVMs.
//!
//! Alice prepares `ρ_x` (`x = 1…4`); Bob performs either a dichotomic
//! measurement `M_{b|y} = (I ± O_y)/2` (`y = 1…3`) or the four-outcome POVM
//! (`y = 4`). The witness
//!
//! ```text
//! W = Σ_{x,y≤3} ω_xy ⟨O_y⟩_x − k Σ_x p(b = x | x, y = 4)
//! ```
//!
//! has qubit maximum `Q(B) = 24 √(B / (24B − 1))`, reached only when the
//! four-outcome measurement is the semi-SIC POVM with overlap `B`.

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{apply_noise, NoiseModel};
use crate::optim::{
    mat3_inverse, mat3_mul, mat3_transpose, mat3_vec, rotation_from_quaternion,
    rotation_from_vector, sym3_eigen, sym3_sqrt, Mat3,
};
use crate::overlap::{check_range, Overlap};
use crate::povm::{bloch_vectors, build_semi_sic, semi_sic_params, Povm};
use crate::qmath::{dot3, eig_hermitian, norm3, sub3, DensityMat, Mat2, PureQubit, Vec3};
use crate::walk::{compile_povm, run_walk};

/// Number of preparations and of four-outcome results.
pub const N_PREP: usize = 4;
/// Number of dichotomic settings.
pub const N_DICH: usize = 3;

/// `Q(B) = 24 √(B / (24B − 1))`
pub fn q_max(b: f64) -> Result<f64> {
    check_range(b)?;
    Ok(24.0 * (b / (24.0 * b - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PamScenario {
    pub preparations: [DensityMat; N_PREP],
    pub observables: [Mat2; N_DICH],
    pub povm4: Povm,
    /// Family parameter the scenario was generated for; enables `q_bound`.
    #[serde(rename = "B")]
    pub b_tag: Option<f64>,
}

impl PamScenario {
    pub fn new(
        preparations: [DensityMat; N_PREP],
        observables: [Mat2; N_DICH],
        povm4: Povm,
        b_tag: Option<f64>,
    ) -> Result<Self> {
        for (y, o) in observables.iter().enumerate() {
            if !o.is_hermitian(1e-10) {
                return Err(Error::InvalidScenario(format!("observable {} not Hermitian", y + 1)));
            }
            let [hi, lo] = o.eigenvalues();
            if hi > 1.0 + 1e-10 || lo < -1.0 - 1e-10 {
                return Err(Error::InvalidScenario(format!(
                    "observable {} spectrum outside [-1, 1]",
                    y + 1
                )));
            }
        }
        if povm4.len() != N_PREP {
            return Err(Error::InvalidScenario(format!(
                "four-outcome measurement has {} elements",
                povm4.len()
            )));
        }
        Ok(PamScenario {
            preparations,
            observables: observables.map(|o| o.hermitian_part()),
            povm4,
            b_tag,
        })
    }

    /// Pure preparations from state vectors.
    pub fn from_states(
        states: &[PureQubit; N_PREP],
        observables: [Mat2; N_DICH],
        povm4: Povm,
        b_tag: Option<f64>,
    ) -> Result<Self> {
        Self::new(states.map(|s| DensityMat::pure(&s)), observables, povm4, b_tag)
    }
}

impl<'de> Deserialize<'de> for PamScenario {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            preparations: [DensityMat; N_PREP],
            observables: [Mat2; N_DICH],
            povm4: Povm,
            #[serde(rename = "B", default)]
            b_tag: Option<f64>,
        }
        let r = Raw::deserialize(d)?;
        PamScenario::new(r.preparations, r.observables, r.povm4, r.b_tag).map_err(serde::de::Error::custom)
    }
}

/// `p(b|x,y)`: dichotomic rows indexed `[x][y][b]` with `b ∈ {0, 1}`, and
/// four-outcome rows indexed `[x][b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbTable {
    pub dichotomic: [[[f64; 2]; N_DICH]; N_PREP],
    pub four: [[f64; N_PREP]; N_PREP],
}

impl ProbTable {
    /// `E_xy = p(0|x,y) − p(1|x,y) = Tr[ρ_x O_y]`
    pub fn correlator(&self, x: usize, y: usize) -> f64 {
        self.dichotomic[x][y][0] - self.dichotomic[x][y][1]
    }

    /// `Σ_x p(b = x | x, y = 4)`
    pub fn penalty(&self) -> f64 {
        (0..N_PREP).map(|x| self.four[x][x]).sum()
    }

    /// The outcome distribution of setting `(x, y)` with `y ∈ 0..4`
    /// (0-based; `y = 3` is the four-outcome measurement).
    pub fn row(&self, x: usize, y: usize) -> Vec<f64> {
        if y < N_DICH {
            self.dichotomic[x][y].to_vec()
        } else {
            self.four[x].to_vec()
        }
    }

    fn set_row(&mut self, x: usize, y: usize, row: &[f64]) {
        if y < N_DICH {
            self.dichotomic[x][y] = [row[0], row[1]];
        } else {
            self.four[x].copy_from_slice(row);
        }
    }
}

fn clamp_unit(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

pub fn scenario_probabilities(s: &PamScenario) -> ProbTable {
    let mut t = ProbTable {
        dichotomic: [[[0.0; 2]; N_DICH]; N_PREP],
        four: [[0.0; N_PREP]; N_PREP],
    };
    for (x, rho) in s.preparations.iter().enumerate() {
        for (y, o) in s.observables.iter().enumerate() {
            let e = rho.expectation(o);
            t.dichotomic[x][y] = [clamp_unit(0.5 * (1.0 + e)), clamp_unit(0.5 * (1.0 - e))];
        }
        for (b, el) in s.povm4.elements.iter().enumerate() {
            t.four[x][b] = clamp_unit(rho.expectation(&el.op));
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessSpec {
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<Overlap>,
    pub omega: [[f64; N_DICH]; N_PREP],
    pub k: f64,
    /// Seed the spec was fitted with, when it came from [`fit_witness`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_seed: Option<u64>,
}

impl WitnessSpec {
    pub fn new(omega: [[f64; N_DICH]; N_PREP], k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidScenario(format!("k must be positive, got {k}")));
        }
        if omega.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("omega"));
        }
        Ok(WitnessSpec {
            b: None,
            omega,
            k,
            fit_seed: None,
        })
    }

    pub fn with_b(mut self, b: Option<Overlap>) -> Self {
        self.b = b;
        self
    }
}

impl<'de> Deserialize<'de> for WitnessSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(rename = "B", default)]
            b: Option<Overlap>,
            omega: [[f64; N_DICH]; N_PREP],
            k: f64,
            #[serde(default)]
            fit_seed: Option<u64>,
        }
        let r = Raw::deserialize(d)?;
        let mut spec = WitnessSpec::new(r.omega, r.k).map_err(serde::de::Error::custom)?;
        spec.b = r.b;
        spec.fit_seed = r.fit_seed;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessResult {
    pub w: f64,
    pub w1: f64,
    /// `Σ_x p(x|x, 4)`
    pub penalty_term: f64,
    pub k: f64,
    pub q_bound: Option<f64>,
    /// `q_bound − w`, negative when the value exceeds the bound.
    pub gap: Option<f64>,
    pub stderr: Option<f64>,
    /// Set when `w` exceeds `q_bound`.
    pub over_maximal: bool,
}

impl WitnessResult {
    fn from_parts(w1: f64, penalty: f64, k: f64, q_bound: Option<f64>, stderr: Option<f64>) -> Self {
        let w = w1 - k * penalty;
        WitnessResult {
            w,
            w1,
            penalty_term: penalty,
            k,
            q_bound,
            gap: q_bound.map(|q| q - w),
            stderr,
            over_maximal: q_bound.is_some_and(|q| w > q + 1e-9),
        }
    }
}

/// `W` as a linear functional of a probability table.
pub fn witness_from_table(t: &ProbTable, spec: &WitnessSpec) -> (f64, f64) {
    let mut w1 = 0.0;
    for x in 0..N_PREP {
        for y in 0..N_DICH {
            w1 += spec.omega[x][y] * t.correlator(x, y);
        }
    }
    (w1, t.penalty())
}

fn q_bound_of(s: &PamScenario) -> Option<f64> {
    s.b_tag.and_then(|b| q_max(b).ok())
}

pub fn evaluate_witness(s: &PamScenario, spec: &WitnessSpec) -> WitnessResult {
    let (w1, penalty) = witness_from_table(&scenario_probabilities(s), spec);
    WitnessResult::from_parts(w1, penalty, spec.k, q_bound_of(s), None)
}

// ---------------------------------------------------------------------------
// See-saw

#[derive(Debug, Clone)]
pub struct SeesawOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Worker threads for independent restarts; results do not depend on it.
    pub threads: usize,
    pub max_sweeps: usize,
    /// Stop once a sweep improves `W` by at most this much.
    pub tol: f64,
    /// Keeps the preparations fixed and optimises only the measurements.
    pub fixed_preparations: Option<[DensityMat; N_PREP]>,
    /// Tag for the returned scenario; defaults to the spec's `B`.
    pub b_tag: Option<f64>,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        SeesawOptions {
            restarts: 50,
            seed: 0,
            threads: 1,
            max_sweeps: 500,
            tol: 1e-10,
            fixed_preparations: None,
            b_tag: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeesawOutcome {
    pub scenario: PamScenario,
    pub result: WitnessResult,
    pub best_restart: usize,
    pub sweeps: usize,
    pub converged: bool,
    /// `W` after initialisation and after every sweep of the best restart.
    pub history: Vec<f64>,
    /// Final `W` of every restart.
    pub restart_values: Vec<f64>,
}

struct RestartRun {
    w: f64,
    rho: [Mat2; N_PREP],
    obs: [Mat2; N_DICH],
    effects: [Mat2; N_PREP],
    sweeps: usize,
    converged: bool,
    history: Vec<f64>,
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v: Vec3 = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = norm3(&v);
        if n > 1e-8 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn bloch_of(rho: &Mat2) -> Vec3 {
    rho.bloch_components().1
}

/// Sign operator of a Hermitian matrix; zero eigenvalues map to zero.
fn sign_operator(a: &Mat2) -> Mat2 {
    let eig = eig_hermitian(&a.hermitian_part()).expect("Hermitian");
    let scale = eig.values[0].abs().max(eig.values[1].abs());
    let sgn = |l: f64| if l.abs() <= 1e-14 * scale.max(1e-300) { 0.0 } else { l.signum() };
    eig.vectors
        .iter()
        .zip(eig.values)
        .map(|(v, l)| v.projector().scale_re(sgn(l)))
        .sum()
}

/// Smallest ball containing four points in ℝ³: centre, radius and the
/// barycentric weights of the centre over the supporting points.
fn min_enclosing_ball(pts: &[Vec3; N_PREP]) -> (Vec3, f64, [f64; N_PREP]) {
    let mut best: Option<(Vec3, f64, [f64; N_PREP])> = None;
    for mask in 1u32..16 {
        let idx: Vec<usize> = (0..N_PREP).filter(|i| mask & (1 << i) != 0).collect();
        let p0 = pts[idx[0]];
        let d: Vec<Vec3> = idx[1..].iter().map(|&i| sub3(&pts[i], &p0)).collect();
        let m = d.len();
        let t = if m == 0 {
            Vec::new()
        } else {
            let a: Vec<Vec<f64>> = (0..m)
                .map(|i| (0..m).map(|j| 2.0 * dot3(&d[i], &d[j])).collect())
                .collect();
            let b: Vec<f64> = d.iter().map(|v| dot3(v, v)).collect();
            match crate::optim::solve_linear(a, b) {
                Some(t) => t,
                None => continue,
            }
        };
        let mut centre = p0;
        for (ti, di) in t.iter().zip(&d) {
            for k in 0..3 {
                centre[k] += ti * di[k];
            }
        }
        let mut lambda = [0.0; N_PREP];
        lambda[idx[0]] = 1.0 - t.iter().sum::<f64>();
        for (ti, &i) in t.iter().zip(&idx[1..]) {
            lambda[i] = *ti;
        }
        if lambda.iter().any(|&l| l < -1e-12) {
            continue;
        }
        let radius = norm3(&sub3(&p0, &centre));
        if pts.iter().any(|p| norm3(&sub3(p, &centre)) > radius + 1e-12) {
            continue;
        }
        if best.as_ref().is_none_or(|b| radius < b.1) {
            best = Some((centre, radius, lambda.map(|l| l.max(0.0))));
        }
    }
    best.expect("a single farthest pair always qualifies")
}

/// The POVM minimising `Σ_x Tr[ρ_x E_x]`: with the smallest ball (centre
/// `c`, radius `R`) enclosing the state Bloch vectors `m_x`, the supporting
/// elements point away from `c` with weights `2λ_x`, where `λ` are the
/// barycentric coordinates of `c`. The minimum equals `1 − R`.
fn optimal_penalty_povm(rho: &[Mat2; N_PREP]) -> [Mat2; N_PREP] {
    let pts = rho.map(|r| bloch_of(&r));
    let (centre, radius, lambda) = min_enclosing_ball(&pts);
    if radius < 1e-12 {
        return [Mat2::identity().scale_re(0.25); N_PREP];
    }
    let total: f64 = lambda.iter().sum();
    let mut out = [Mat2::zero(); N_PREP];
    for x in 0..N_PREP {
        if lambda[x] > 0.0 {
            let n = sub3(&centre, &pts[x]).map(|v| v / radius);
            out[x] = Mat2::from_bloch(2.0 * lambda[x] / total, n);
        }
    }
    out
}

fn witness_value(spec: &WitnessSpec, rho: &[Mat2; N_PREP], obs: &[Mat2; N_DICH], eff: &[Mat2; N_PREP]) -> f64 {
    let mut w = 0.0;
    for x in 0..N_PREP {
        for y in 0..N_DICH {
            w += spec.omega[x][y] * (rho[x] * obs[y]).trace().re;
        }
        w -= spec.k * (rho[x] * eff[x]).trace().re;
    }
    w
}

fn run_restart(spec: &WitnessSpec, opts: &SeesawOptions, restart: usize) -> RestartRun {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(restart as u64);
    let mut rho: [Mat2; N_PREP] = match &opts.fixed_preparations {
        Some(p) => p.map(|d| *d.matrix()),
        None => std::array::from_fn(|_| Mat2::from_bloch(1.0, random_unit(&mut rng))),
    };
    let mut obs: [Mat2; N_DICH] = std::array::from_fn(|_| {
        let n = random_unit(&mut rng);
        Mat2::from_bloch(2.0, n) - Mat2::identity()
    });
    let mut eff = optimal_penalty_povm(&rho);
    let mut w = witness_value(spec, &rho, &obs, &eff);
    let mut history = vec![w];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        if opts.fixed_preparations.is_none() {
            for x in 0..N_PREP {
                let a: Mat2 = (0..N_DICH)
                    .map(|y| obs[y].scale_re(spec.omega[x][y]))
                    .sum::<Mat2>()
                    - eff[x].scale_re(spec.k);
                let eig = eig_hermitian(&a.hermitian_part()).expect("Hermitian");
                if eig.values[0] - eig.values[1] > 1e-14 {
                    rho[x] = eig.vectors[0].projector();
                }
            }
        }
        for y in 0..N_DICH {
            let a: Mat2 = (0..N_PREP).map(|x| rho[x].scale_re(spec.omega[x][y])).sum();
            obs[y] = sign_operator(&a);
        }
        eff = optimal_penalty_povm(&rho);
        let wn = witness_value(spec, &rho, &obs, &eff);
        history.push(wn);
        let gain = wn - w;
        w = wn.max(w);
        if gain <= opts.tol {
            converged = true;
            break;
        }
    }
    RestartRun {
        w,
        rho,
        obs,
        effects: eff,
        sweeps,
        converged,
        history,
    }
}

/// Alternating maximisation of `W` over preparations, dichotomic observables
/// and the four-outcome POVM, best of `restarts` random starts.
pub fn seesaw_optimize(spec: &WitnessSpec, restarts: usize, seed: u64) -> Result<SeesawOutcome> {
    seesaw_optimize_with(
        spec,
        &SeesawOptions {
            restarts,
            seed,
            ..SeesawOptions::default()
        },
    )
}

pub fn seesaw_optimize_with(spec: &WitnessSpec, opts: &SeesawOptions) -> Result<SeesawOutcome> {
    if opts.restarts == 0 {
        return Err(Error::InvalidScenario("restarts must be at least 1".into()));
    }
    let threads = opts.threads.clamp(1, opts.restarts);
    let runs: Vec<RestartRun> = if threads == 1 {
        (0..opts.restarts).map(|r| run_restart(spec, opts, r)).collect()
    } else {
        let mut slots: Vec<Option<RestartRun>> = (0..opts.restarts).map(|_| None).collect();
        std::thread::scope(|scope| {
            let chunk = opts.restarts.div_ceil(threads);
            for (t, part) in slots.chunks_mut(chunk).enumerate() {
                scope.spawn(move || {
                    for (i, slot) in part.iter_mut().enumerate() {
                        *slot = Some(run_restart(spec, opts, t * chunk + i));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("every restart ran")).collect()
    };
    let restart_values: Vec<f64> = runs.iter().map(|r| r.w).collect();
    let (best_restart, best) = runs
        .into_iter()
        .enumerate()
        .fold(None::<(usize, RestartRun)>, |acc, (i, r)| match acc {
            Some((j, b)) if b.w >= r.w => Some((j, b)),
            _ => Some((i, r)),
        })
        .expect("at least one restart");
    let povm4 = Povm::with_tolerance("see-saw optimum", best.effects.to_vec(), 1e-9)?;
    let preparations = best.rho.map(|m| {
        DensityMat::new(m).unwrap_or_else(|_| DensityMat::new(m.hermitian_part()).expect("valid state"))
    });
    let b_tag = opts.b_tag.or(spec.b.map(|b| b.value()));
    let scenario = PamScenario::new(preparations, best.obs, povm4, b_tag)?;
    let result = evaluate_witness(&scenario, spec);
    Ok(SeesawOutcome {
        scenario,
        result,
        best_restart,
        sweeps: best.sweeps,
        converged: best.converged,
        history: best.history,
        restart_values,
    })
}

// ---------------------------------------------------------------------------
// Witness construction

/// Residuals of a four-outcome POVM against the semi-SIC with overlap `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiSicResidual {
    pub overlap: f64,
    pub traces: f64,
}

pub fn semi_sic_residual(povm: &Povm, b: f64) -> Result<SemiSicResidual> {
    let p = semi_sic_params(b)?;
    let overlap = povm
        .pairwise_overlaps()
        .iter()
        .map(|o| (o - b).abs())
        .fold(0.0, f64::max);
    let mut traces = povm.weights();
    traces.sort_by(f64::total_cmp);
    let traces = traces
        .iter()
        .zip(p.trace_spectrum())
        .map(|(t, s)| (t - s).abs())
        .fold(0.0, f64::max);
    Ok(SemiSicResidual { overlap, traces })
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Random frames tried before local refinement.
    pub frames: usize,
    /// Penalty weight as a fraction of `Q`.
    pub k_fraction: f64,
    /// See-saw restarts used to certify the fit.
    pub verify_restarts: usize,
    pub threads: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            frames: 300,
            k_fraction: 0.25,
            verify_restarts: 20,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub spec: WitnessSpec,
    /// Smallest singular value of the row-product matrix; larger is more rigid.
    pub rigidity: f64,
    pub seesaw_w: f64,
    pub q: f64,
    pub residual: SemiSicResidual,
}

struct Frame {
    u: [Vec3; N_PREP],
    a: [f64; N_PREP],
    s: Mat3,
    q: f64,
}

impl Frame {
    fn new(b: f64) -> Result<Self> {
        let povm = build_semi_sic(b)?;
        let set = bloch_vectors(&povm)?;
        let u: [Vec3; N_PREP] = std::array::from_fn(|x| set.vectors[x].map(|v| -v));
        let a: [f64; N_PREP] = std::array::from_fn(|x| set.weights[x]);
        let mut f = [[0.0; 3]; 3];
        for x in 0..N_PREP {
            for i in 0..3 {
                for j in 0..3 {
                    f[i][j] += a[x] * u[x][i] * u[x][j];
                }
            }
        }
        Ok(Frame {
            u,
            a,
            s: sym3_sqrt(&f),
            q: q_max(b)?,
        })
    }

    /// `ω_x = (Q/2) a_x P⁻¹ u_x` with `P = S Rᵀ` column-normalised. At the
    /// states `u_x` and the target POVM, `W₁ = (Q/2) Σ_y ‖(S Rᵀ)_y‖² = Q`
    /// and the penalty vanishes.
    fn omega(&self, r: &Mat3) -> Option<[[f64; N_DICH]; N_PREP]> {
        let mut p = mat3_mul(&self.s, &mat3_transpose(r));
        for j in 0..3 {
            let n = (0..3).map(|i| p[i][j] * p[i][j]).sum::<f64>().sqrt();
            if n < 1e-12 {
                return None;
            }
            for row in p.iter_mut() {
                row[j] /= n;
            }
        }
        let pinv = mat3_inverse(&p)?;
        Some(std::array::from_fn(|x| {
            let v = mat3_vec(&pinv, &self.u[x]);
            v.map(|c| 0.5 * self.q * self.a[x] * c)
        }))
    }
}

/// Smallest singular value of the 4×3 matrix of pairwise products of the
/// normalised rows of `ω`. When it vanishes the optimum admits a flat
/// direction and the maximising POVM is not unique.
pub fn rigidity(omega: &[[f64; N_DICH]; N_PREP]) -> f64 {
    let mut m = [[0.0; 3]; 3];
    for row in omega {
        let n = norm3(row);
        if n < 1e-300 {
            return 0.0;
        }
        let w = row.map(|v| v / n);
        let prod = [w[0] * w[1], w[0] * w[2], w[1] * w[2]];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += prod[i] * prod[j];
            }
        }
    }
    sym3_eigen(&m).0[0].max(0.0).sqrt()
}

/// Builds a witness whose qubit maximum is `Q(B)` and whose maximiser is the
/// semi-SIC POVM with overlap `B`, then certifies it with the see-saw.
///
/// Optimal states are antipodal to the target Bloch directions; `ω` is chosen
/// so that the dichotomic part is maximised exactly there. The free frame
/// rotation is searched (random frames, then coordinate ascent) to maximise
/// [`rigidity`].
pub fn fit_witness(b: f64, seed: u64) -> Result<WitnessSpec> {
    fit_witness_with(b, seed, &FitOptions::default()).map(|r| r.spec)
}

pub fn fit_witness_with(b: f64, seed: u64, opts: &FitOptions) -> Result<FitReport> {
    let frame = Frame::new(b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let score = |r: &Mat3| frame.omega(r).map_or(0.0, |w| rigidity(&w));
    let mut best_r: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut best = score(&best_r);
    for _ in 0..opts.frames.max(1) {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let r = rotation_from_quaternion(q);
        let s = score(&r);
        if s > best {
            best = s;
            best_r = r;
        }
    }
    for step in [0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002] {
        loop {
            let mut improved = false;
            for axis in 0..3 {
                for sign in [1.0, -1.0] {
                    let mut w = [0.0; 3];
                    w[axis] = sign * step;
                    let r = mat3_mul(&rotation_from_vector(&w), &best_r);
                    let s = score(&r);
                    if s > best + 1e-12 {
                        best = s;
                        best_r = r;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    let omega = frame
        .omega(&best_r)
        .ok_or_else(|| Error::FitFailed("degenerate frame".into()))?;
    let mut spec = WitnessSpec::new(omega, opts.k_fraction * frame.q)?;
    spec.b = Some(Overlap::from_f64(b)?);
    spec.fit_seed = Some(seed);
    let out = seesaw_optimize_with(
        &spec,
        &SeesawOptions {
            restarts: opts.verify_restarts.max(1),
            seed,
            threads: opts.threads,
            ..SeesawOptions::default()
        },
    )?;
    let residual = semi_sic_residual(&out.scenario.povm4, b)?;
    let ok = (out.result.w - frame.q).abs() <= crate::tol::WITNESS
        && residual.overlap <= crate::tol::WITNESS
        && residual.traces <= crate::tol::WITNESS;
    if !ok {
        return Err(Error::FitFailed(format!(
            "see-saw reached {:.6} (Q = {:.6}), overlap residual {:.2e}",
            out.result.w, frame.q, residual.overlap
        )));
    }
    Ok(FitReport {
        spec,
        rigidity: best,
        seesaw_w: out.result.w,
        q: frame.q,
        residual,
    })
}

/// The optimal scenario of a witness built by [`fit_witness`]: states
/// antipodal to the semi-SIC directions, the semi-SIC POVM itself, and the
/// best dichotomic observables for those states.
pub fn reference_scenario(b: f64, spec: &WitnessSpec) -> Result<PamScenario> {
    let povm = build_semi_sic(b)?;
    let set = bloch_vectors(&povm)?;
    let preparations: [DensityMat; N_PREP] =
        std::array::from_fn(|x| DensityMat::from_bloch(set.vectors[x].map(|v| -v)).expect("unit vector"));
    let observables: [Mat2; N_DICH] = std::array::from_fn(|y| {
        let a: Mat2 = (0..N_PREP)
            .map(|x| preparations[x].matrix().scale_re(spec.omega[x][y]))
            .sum();
        sign_operator(&a)
    });
    PamScenario::new(preparations, observables, povm, Some(b))
}

// ---------------------------------------------------------------------------
// Finite statistics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShotBudget {
    /// Exact probabilities; no sampling.
    Infinite,
    PerSetting(u64),
}

impl ShotBudget {
    /// `0` denotes the infinite-shot limit.
    pub fn from_count(n: u64) -> Self {
        if n == 0 {
            ShotBudget::Infinite
        } else {
            ShotBudget::PerSetting(n)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub shots: ShotBudget,
    pub seed: u64,
    pub bootstrap: usize,
    /// Applied to the four-outcome distributions, realised as a walk.
    pub noise: Option<NoiseModel>,
}

impl SampleOptions {
    pub fn new(shots: ShotBudget, seed: u64) -> Self {
        SampleOptions {
            shots,
            seed,
            bootstrap: 1000,
            noise: None,
        }
    }
}

/// One line of the count table; `x`, `y` 1-based, `b ∈ {0, 1}` for `y ≤ 3`
/// and `b ∈ {1, …, 4}` for `y = 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub x: usize,
    pub y: usize,
    pub b: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledWitness {
    pub result: WitnessResult,
    /// Probabilities the counts were drawn from (after noise).
    pub model_table: ProbTable,
    pub counts: Vec<CountRow>,
}

/// Counts of `n` draws from the distribution `p` (renormalised).
pub fn multinomial_counts(p: &[f64], n: u64, seed: u64) -> Vec<u64> {
    multinomial(&mut ChaCha8Rng::seed_from_u64(seed), n, p)
}

fn multinomial(rng: &mut ChaCha8Rng, n: u64, p: &[f64]) -> Vec<u64> {
    let mut out = vec![0; p.len()];
    let mut left = n;
    let mut mass: f64 = p.iter().sum();
    for (i, &pi) in p.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == p.len() {
            out[i] = left;
            break;
        }
        let q = if mass > 0.0 { (pi / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, q).expect("probability in [0, 1]").sample(rng);
        out[i] = draw;
        left -= draw;
        mass -= pi;
    }
    out
}

fn noisy_table(s: &PamScenario, model: &NoiseModel) -> Result<ProbTable> {
    let mut t = scenario_probabilities(s);
    if model.is_ideal() {
        return Ok(t);
    }
    let schedule = compile_povm(&s.povm4)?;
    for (x, rho) in s.preparations.iter().enumerate() {
        if rho.purity() < 1.0 - 1e-9 {
            return Err(Error::InvalidScenario(
                "noise simulation needs pure preparations".into(),
            ));
        }
        let psi = eig_hermitian(rho.matrix())?.vectors[0];
        let ideal = run_walk(&psi, &schedule).at(&schedule.five_step_ports());
        let noisy = apply_noise(&ideal, model, &schedule, &psi)?;
        t.four[x].copy_from_slice(&noisy);
    }
    Ok(t)
}

/// Per-shot variance of the witness estimator, for choosing shot counts.
pub fn per_shot_variance(t: &ProbTable, spec: &WitnessSpec) -> f64 {
    let mut v = 0.0;
    for x in 0..N_PREP {
        for y in 0..N_DICH {
            let e = t.correlator(x, y);
            v += spec.omega[x][y].powi(2) * (1.0 - e * e).max(0.0);
        }
        let p = t.four[x][x];
        v += spec.k * spec.k * p * (1.0 - p);
    }
    v
}

/// Shots per setting giving a witness standard error of about `target`.
pub fn shots_for_stderr(s: &PamScenario, spec: &WitnessSpec, target: f64) -> u64 {
    let v = per_shot_variance(&scenario_probabilities(s), spec);
    ((v / (target * target)).ceil() as u64).max(1)
}

fn freq_table(counts: &[[Vec<u64>; N_DICH + 1]; N_PREP], n: u64) -> ProbTable {
    let mut t = ProbTable {
        dichotomic: [[[0.0; 2]; N_DICH]; N_PREP],
        four: [[0.0; N_PREP]; N_PREP],
    };
    for x in 0..N_PREP {
        for y in 0..=N_DICH {
            let row: Vec<f64> = counts[x][y].iter().map(|&c| c as f64 / n as f64).collect();
            t.set_row(x, y, &row);
        }
    }
    t
}

/// Estimates `W` from multinomial counts per setting, with a bootstrap
/// standard error. The infinite budget returns the exact value.
pub fn sample_witness(s: &PamScenario, spec: &WitnessSpec, opts: &SampleOptions) -> Result<SampledWitness> {
    let table = match &opts.noise {
        Some(m) => noisy_table(s, m)?,
        None => scenario_probabilities(s),
    };
    let q_bound = q_bound_of(s);
    let n = match opts.shots {
        ShotBudget::Infinite => {
            let (w1, pen) = witness_from_table(&table, spec);
            return Ok(SampledWitness {
                result: WitnessResult::from_parts(w1, pen, spec.k, q_bound, None),
                model_table: table,
                counts: Vec::new(),
            });
        }
        ShotBudget::PerSetting(0) => {
            return Err(Error::InvalidScenario("shots must be at least 1".into()))
        }
        ShotBudget::PerSetting(n) => n,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let counts: [[Vec<u64>; N_DICH + 1]; N_PREP] =
        std::array::from_fn(|x| std::array::from_fn(|y| multinomial(&mut rng, n, &table.row(x, y))));
    let observed = freq_table(&counts, n);
    let (w1, pen) = witness_from_table(&observed, spec);
    let stderr = if opts.bootstrap >= 2 {
        let mut boot_rng = ChaCha8Rng::seed_from_u64(opts.seed);
        boot_rng.set_stream(1);
        let values: Vec<f64> = (0..opts.bootstrap)
            .map(|_| {
                let re: [[Vec<u64>; N_DICH + 1]; N_PREP] = std::array::from_fn(|x| {
                    std::array::from_fn(|y| multinomial(&mut boot_rng, n, &observed.row(x, y)))
                });
                let (a, p) = witness_from_table(&freq_table(&re, n), spec);
                a - spec.k * p
            })
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
        Some(var.sqrt())
    } else {
        None
    };
    let mut rows = Vec::new();
    for (x, per_x) in counts.iter().enumerate() {
        for (y, c) in per_x.iter().enumerate() {
            for (b, &count) in c.iter().enumerate() {
                rows.push(CountRow {
                    x: x + 1,
                    y: y + 1,
                    b: if y < N_DICH { b } else { b + 1 },
                    count,
                });
            }
        }
    }
    Ok(SampledWitness {
        result: WitnessResult::from_parts(w1, pen, spec.k, q_bound, stderr),
        model_table: table,
        counts: rows,
    })
}
