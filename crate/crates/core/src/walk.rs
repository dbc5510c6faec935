//! One-dimensional coined quantum walk `U = T·C` with site-dependent coins.
//!
//! One step applies the coin `C_{x,n}` at every occupied site and then shifts
//! the `H` component one site right and the `V` component one site left.
//! After a five-step schedule the occupied final positions act as the output
//! ports of a four-outcome measurement on the initial coin state. Ports are
//! ordered by descending final position and map to elements `E₁…E₄`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{levenberg_marquardt, LmOptions};
use crate::povm::{bloch_vectors, Povm, PovmElement};
use crate::qmath::{
    canonical_phase, eig_hermitian, euler_unitary, norm2, orthogonal_complement, DensityMat, Mat2,
    PureQubit, C64, ONE, ZERO,
};
use crate::tol;

/// Probabilities and effect traces below this are treated as no support.
pub const SUPPORT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinOp {
    pub step: u32,
    pub site: i64,
    pub matrix: Mat2,
}

/// Sparse `(step, site) → coin` map; unspecified entries are the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinSchedule {
    steps: u32,
    initial_site: i64,
    coins: BTreeMap<(u32, i64), Mat2>,
}

impl CoinSchedule {
    pub fn new(steps: u32, initial_site: i64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidSchedule("steps must be at least 1".into()));
        }
        Ok(CoinSchedule {
            steps,
            initial_site,
            coins: BTreeMap::new(),
        })
    }

    /// The all-identity (ballistic) schedule.
    pub fn identity(steps: u32) -> Self {
        CoinSchedule::new(steps.max(1), 0).expect("nonzero steps")
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn initial_site(&self) -> i64 {
        self.initial_site
    }

    /// Adds a coin, rejecting duplicates and non-unitary matrices.
    pub fn insert(&mut self, step: u32, site: i64, matrix: Mat2) -> Result<()> {
        self.insert_with_tol(step, site, matrix, tol::UNITARY)
    }

    /// As [`CoinSchedule::insert`] with an explicit unitarity tolerance, for
    /// coins tabulated to a few decimals.
    pub fn insert_with_tol(&mut self, step: u32, site: i64, matrix: Mat2, unitary_tol: f64) -> Result<()> {
        if step == 0 || step > self.steps {
            return Err(Error::InvalidSchedule(format!(
                "step {step} outside 1..={}",
                self.steps
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite("coin"));
        }
        let res = matrix.unitarity_residual();
        if res > unitary_tol {
            return Err(Error::NotUnitary(res));
        }
        if self.coins.contains_key(&(step, site)) {
            return Err(Error::InvalidSchedule(format!(
                "duplicate coin at step {step}, site {site}"
            )));
        }
        self.coins.insert((step, site), matrix);
        Ok(())
    }

    pub fn with_coin(mut self, step: u32, site: i64, matrix: Mat2) -> Result<Self> {
        self.insert(step, site, matrix)?;
        Ok(self)
    }

    pub fn coin(&self, step: u32, site: i64) -> Mat2 {
        self.coins
            .get(&(step, site))
            .copied()
            .unwrap_or_else(Mat2::identity)
    }

    /// Explicitly specified coins in `(step, site)` order.
    pub fn coins(&self) -> impl Iterator<Item = CoinOp> + '_ {
        self.coins.iter().map(|(&(step, site), &matrix)| CoinOp { step, site, matrix })
    }

    /// Largest unitarity residual over the explicit coins.
    pub fn max_unitarity_residual(&self) -> f64 {
        self.coins
            .values()
            .map(Mat2::unitarity_residual)
            .fold(0.0, f64::max)
    }

    /// The four output ports of a five-step schedule, in element order.
    pub fn five_step_ports(&self) -> [i64; 4] {
        let s = self.initial_site;
        [s + 5, s + 3, s + 1, s - 1]
    }

    pub fn from_json_with_tol(json: &str, unitary_tol: f64) -> Result<Self> {
        let raw: ScheduleFile =
            serde_json::from_str(json).map_err(|e| Error::InvalidSchedule(e.to_string()))?;
        raw.into_schedule(unitary_tol)
    }
}

#[derive(Serialize, Deserialize)]
struct ScheduleFile {
    steps: u32,
    #[serde(default)]
    initial_site: i64,
    coins: Vec<CoinOp>,
}

impl ScheduleFile {
    fn into_schedule(self, unitary_tol: f64) -> Result<CoinSchedule> {
        let mut s = CoinSchedule::new(self.steps, self.initial_site)?;
        for c in self.coins {
            s.insert_with_tol(c.step, c.site, c.matrix, unitary_tol)?;
        }
        Ok(s)
    }
}

impl Serialize for CoinSchedule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ScheduleFile {
            steps: self.steps,
            initial_site: self.initial_site,
            coins: self.coins().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoinSchedule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ScheduleFile::deserialize(d)?
            .into_schedule(tol::UNITARY)
            .map_err(serde::de::Error::custom)
    }
}

/// Walker amplitudes keyed by position, `[amp_H, amp_V]` per site.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WalkState {
    pub amplitudes: BTreeMap<i64, [C64; 2]>,
}

impl WalkState {
    pub fn localized(site: i64, psi: &PureQubit) -> Self {
        Self::from_coin(site, psi.as_array())
    }

    pub fn from_coin(site: i64, coin: [C64; 2]) -> Self {
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(site, coin);
        WalkState { amplitudes }
    }

    pub fn amplitude(&self, position: i64, coin: usize) -> C64 {
        self.amplitudes.get(&position).map_or(ZERO, |a| a[coin])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes
            .values()
            .map(|a| a[0].norm_sqr() + a[1].norm_sqr())
            .sum()
    }

    pub fn position_probabilities(&self) -> BTreeMap<i64, f64> {
        self.amplitudes
            .iter()
            .map(|(&x, a)| (x, a[0].norm_sqr() + a[1].norm_sqr()))
            .collect()
    }

    /// Positions carrying probability above [`SUPPORT_TOL`].
    pub fn support(&self) -> Vec<i64> {
        self.position_probabilities()
            .into_iter()
            .filter(|&(_, p)| p > SUPPORT_TOL)
            .map(|(x, _)| x)
            .collect()
    }
}

/// Applies step `n`: coin at every occupied site, then the coin-conditioned shift.
pub fn step_walk(state: &WalkState, schedule: &CoinSchedule, n: u32) -> Result<WalkState> {
    if n == 0 || n > schedule.steps {
        return Err(Error::InvalidSchedule(format!(
            "step {n} outside 1..={}",
            schedule.steps
        )));
    }
    let mut out: BTreeMap<i64, [C64; 2]> = BTreeMap::new();
    for (&x, amp) in &state.amplitudes {
        let [h, v] = schedule.coin(n, x).apply(amp);
        out.entry(x + 1).or_insert([ZERO; 2])[0] += h;
        out.entry(x - 1).or_insert([ZERO; 2])[1] += v;
    }
    Ok(WalkState { amplitudes: out })
}

fn evolve(mut state: WalkState, schedule: &CoinSchedule) -> WalkState {
    for n in 1..=schedule.steps {
        state = step_walk(&state, schedule, n).expect("step within schedule");
    }
    state
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortProbability {
    pub position: i64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkRun {
    pub state: WalkState,
    /// Supported final positions, descending.
    pub ports: Vec<PortProbability>,
}

impl WalkRun {
    pub fn probabilities(&self) -> Vec<f64> {
        self.ports.iter().map(|p| p.probability).collect()
    }

    /// Probabilities at the given positions, zero where unsupported.
    pub fn at(&self, positions: &[i64]) -> Vec<f64> {
        let probs = self.state.position_probabilities();
        positions
            .iter()
            .map(|x| probs.get(x).copied().unwrap_or(0.0))
            .collect()
    }
}

/// Runs the full schedule from `ψ` at the initial site.
pub fn run_walk(psi: &PureQubit, schedule: &CoinSchedule) -> WalkRun {
    let state = evolve(WalkState::localized(schedule.initial_site, psi), schedule);
    let ports = state
        .position_probabilities()
        .into_iter()
        .rev()
        .filter(|&(_, p)| p > SUPPORT_TOL)
        .map(|(position, probability)| PortProbability { position, probability })
        .collect();
    WalkRun { state, ports }
}

/// Position distribution for a mixed initial coin state, with optional
/// dephasing of `H`/`V` coherences after every shift that precedes a coin.
///
/// `dephasing = ε` maps `ρ ↦ (1 − ε)ρ + ε Σ_c P_c ρ P_c` with `P_c` the
/// projector onto coin state `c` at all positions. Returned positions are
/// ascending.
pub fn run_walk_mixed(rho: &DensityMat, schedule: &CoinSchedule, dephasing: f64) -> Vec<(i64, f64)> {
    let steps = schedule.steps as i64;
    let lo = schedule.initial_site - steps;
    let sites = (2 * steps + 1) as usize;
    let dim = 2 * sites;
    let idx = |x: i64, c: usize| ((x - lo) as usize) * 2 + c;
    let mut m = vec![ZERO; dim * dim];
    let r0 = rho.matrix();
    for a in 0..2 {
        for b in 0..2 {
            m[idx(schedule.initial_site, a) * dim + idx(schedule.initial_site, b)] = r0.entry(a, b);
        }
    }
    let apply = |v: &[C64], n: u32| -> Vec<C64> {
        let mut out = vec![ZERO; dim];
        for s in 0..sites {
            let x = lo + s as i64;
            let amp = [v[2 * s], v[2 * s + 1]];
            if amp[0] == ZERO && amp[1] == ZERO {
                continue;
            }
            let [h, w] = schedule.coin(n, x).apply(&amp);
            if x + 1 <= lo + 2 * steps {
                out[idx(x + 1, 0)] += h;
            }
            if x - 1 >= lo {
                out[idx(x - 1, 1)] += w;
            }
        }
        out
    };
    for n in 1..=schedule.steps {
        // X = U ρ column by column, then ρ' = (U X†)†.
        let mut x = vec![ZERO; dim * dim];
        for col in 0..dim {
            let column: Vec<C64> = (0..dim).map(|row| m[row * dim + col]).collect();
            for (row, val) in apply(&column, n).into_iter().enumerate() {
                x[row * dim + col] = val;
            }
        }
        for row in 0..dim {
            let xr: Vec<C64> = (0..dim).map(|col| x[row * dim + col].conj()).collect();
            for (col, val) in apply(&xr, n).into_iter().enumerate() {
                m[row * dim + col] = val.conj();
            }
        }
        // Coherences recombine at the next coin; the last shift feeds the detectors.
        if dephasing > 0.0 && n < schedule.steps {
            for i in 0..dim {
                for j in 0..dim {
                    if i % 2 != j % 2 {
                        m[i * dim + j] *= 1.0 - dephasing;
                    }
                }
            }
        }
    }
    (0..sites)
        .map(|s| {
            let p = m[(2 * s) * dim + 2 * s].re + m[(2 * s + 1) * dim + 2 * s + 1].re;
            (lo + s as i64, p)
        })
        .collect()
}

/// One output port: its Kraus rows and effect.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Port {
    pub final_position: i64,
    pub kraus_rows: Vec<[C64; 2]>,
    #[serde(flatten)]
    pub element: PovmElement,
}

/// The measurement a schedule implements on the initial coin state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KrausSet {
    pub label: String,
    #[serde(rename = "elements")]
    pub ports: Vec<Port>,
}

impl KrausSet {
    pub fn effects(&self) -> Vec<Mat2> {
        self.ports.iter().map(|p| p.element.op).collect()
    }

    pub fn positions(&self) -> Vec<i64> {
        self.ports.iter().map(|p| p.final_position).collect()
    }

    /// Effects at the given positions, zero where a position has no support.
    pub fn effects_at(&self, positions: &[i64]) -> Vec<Mat2> {
        positions
            .iter()
            .map(|x| {
                self.ports
                    .iter()
                    .find(|p| p.final_position == *x)
                    .map_or(Mat2::zero(), |p| p.element.op)
            })
            .collect()
    }

    /// `‖Σ F − I‖_F`
    pub fn completeness_residual(&self) -> f64 {
        (self.effects().into_iter().sum::<Mat2>() - Mat2::identity()).frob_norm()
    }

    pub fn to_povm(&self, tol: f64) -> Result<Povm> {
        Povm::with_tolerance(self.label.clone(), self.effects(), tol)
    }
}

/// Propagates `|H⟩` and `|V⟩` from the initial site; each supported final
/// position `x_f` yields `F = A†A` with `A` the 2×2 map from initial coin
/// amplitudes to the coin amplitudes at `x_f`.
pub fn effective_povm(schedule: &CoinSchedule) -> KrausSet {
    let from_h = evolve(WalkState::from_coin(schedule.initial_site, [ONE, ZERO]), schedule);
    let from_v = evolve(WalkState::from_coin(schedule.initial_site, [ZERO, ONE]), schedule);
    let mut positions: Vec<i64> = from_h
        .amplitudes
        .keys()
        .chain(from_v.amplitudes.keys())
        .copied()
        .collect();
    positions.sort_unstable_by(|a, b| b.cmp(a));
    positions.dedup();
    let mut ports = Vec::new();
    for x in positions {
        let a = Mat2::from_rows(
            [from_h.amplitude(x, 0), from_v.amplitude(x, 0)],
            [from_h.amplitude(x, 1), from_v.amplitude(x, 1)],
        );
        let effect = (a.dagger() * a).hermitian_part();
        if effect.trace().re <= SUPPORT_TOL {
            continue;
        }
        let kraus_rows = [a.row(0), a.row(1)]
            .into_iter()
            .filter(|r| norm2(r) > SUPPORT_TOL)
            .collect();
        let element = PovmElement::from_effect(effect, f64::INFINITY)
            .expect("A†A is Hermitian and positive");
        ports.push(Port {
            final_position: x,
            kraus_rows,
            element,
        });
    }
    KrausSet {
        label: "walk effective POVM".into(),
        ports,
    }
}

/// Largest entrywise deviation between the schedule's port effects (in
/// element order) and the target effects.
pub fn round_trip_residual(schedule: &CoinSchedule, target: &[Mat2]) -> f64 {
    let ports = schedule.five_step_ports();
    let got = effective_povm(schedule).effects_at(&ports);
    let mut worst = got
        .iter()
        .zip(target)
        .map(|(g, t)| (*g - *t).max_abs())
        .fold(0.0, f64::max);
    // Leakage to any other position also counts against the round trip.
    let ks = effective_povm(schedule);
    for p in &ks.ports {
        if !ports.contains(&p.final_position) {
            worst = worst.max(p.element.op.max_abs());
        }
    }
    worst
}

fn real_rotation(c: f64, s: f64) -> Mat2 {
    Mat2::real(c, s, s, -c)
}

/// `M(s)`: maps the two branches leaving a stage-coin back onto site 0 two
/// steps later (lower branch through σx, upper branch through the V port of
/// a real rotation with off-diagonal `s`).
fn recombination(s: f64) -> Mat2 {
    Mat2::real(0.0, 1.0, s, 0.0)
}

/// Moore–Penrose pseudo-inverse of a 2×2 matrix of rank at most 2.
fn pinv(m: &Mat2) -> Mat2 {
    let fro = m.frob_norm();
    if fro < 1e-300 {
        return Mat2::zero();
    }
    if m.det().norm() > 1e-13 * fro * fro {
        return m.inverse().expect("nonsingular");
    }
    m.dagger().scale_re(1.0 / (fro * fro))
}

fn unit_row_or_h(k: &[C64; 2]) -> [C64; 2] {
    let n = norm2(k);
    if n <= 1e-14 {
        [ONE, ZERO]
    } else {
        canonical_phase([k[0] / n, k[1] / n])
    }
}

fn stage_coin(lead: [C64; 2]) -> Mat2 {
    Mat2::from_rows(lead, orthogonal_complement(lead))
}

fn row_times(k: &[C64; 2], m: &Mat2) -> [C64; 2] {
    m.left_apply(k)
}

/// The two rows of the final coin: `r0` normalised, `r1` its orthonormal
/// completion aligned with the data row.
fn final_coin(r0: [C64; 2], r1: [C64; 2]) -> Mat2 {
    let (a, b) = if norm2(&r0) > 1e-14 {
        (r0, r1)
    } else if norm2(&r1) > 1e-14 {
        let comp = orthogonal_complement(unit_row_or_h(&r1));
        return Mat2::from_rows(comp, unit_row_or_h(&r1));
    } else {
        return Mat2::identity();
    };
    let n0 = norm2(&a);
    let top = [a[0] / n0, a[1] / n0];
    let comp = orthogonal_complement(top);
    // Align the completion's phase with the data row when it is nonzero.
    let ov = comp[0].conj() * b[0] + comp[1].conj() * b[1];
    let bottom = if ov.norm() > 1e-14 {
        let f = ov / ov.norm();
        [comp[0] * f, comp[1] * f]
    } else {
        comp
    };
    Mat2::from_rows(top, bottom)
}

/// Canonical Kraus rows `k_x = √a_x ⟨ψ_x|` of a rank-one POVM.
pub fn kraus_rows(target: &Povm) -> Result<Vec<[C64; 2]>> {
    bloch_vectors(target)?;
    target
        .elements
        .iter()
        .map(|e| {
            let eig = eig_hermitian(&e.op)?;
            let v = eig.vectors[0].as_array();
            let s = eig.values[0].max(0.0).sqrt();
            Ok(canonical_phase([v[0].conj() * s, v[1].conj() * s]))
        })
        .collect()
}

/// Sequential peeling: each stage coin sends one Kraus direction to an exit
/// port and routes the remainder back to site 0 two steps later.
fn peel(ks: &[[C64; 2]]) -> Result<CoinSchedule> {
    let c01 = stage_coin(unit_row_or_h(&ks[0]));
    let c1 = norm2(&ks[0]).min(1.0);
    let s1 = (1.0 - c1 * c1).max(0.0).sqrt();
    let v1 = recombination(s1) * c01;
    let v1p = pinv(&v1);
    let k1: Vec<[C64; 2]> = ks[1..].iter().map(|k| row_times(k, &v1p)).collect();

    let c03 = stage_coin(unit_row_or_h(&k1[0]));
    let c2 = norm2(&k1[0]).min(1.0);
    let s2 = (1.0 - c2 * c2).max(0.0).sqrt();
    let v2 = recombination(s2) * c03;
    let v2p = pinv(&v2);
    let k2: Vec<[C64; 2]> = k1[1..].iter().map(|k| row_times(k, &v2p)).collect();
    let c05 = final_coin(k2[0], k2[1]);

    let mut s = CoinSchedule::new(5, 0)?;
    s.insert(1, 0, c01)?;
    s.insert(2, 1, real_rotation(c1, s1))?;
    s.insert(2, -1, Mat2::pauli_x())?;
    s.insert(3, 0, c03)?;
    s.insert(4, 1, real_rotation(c2, s2))?;
    s.insert(4, -1, Mat2::pauli_x())?;
    s.insert(5, 0, c05)?;
    Ok(s)
}

/// Schedule from the eleven free parameters of the five-step template.
fn template_schedule(p: &[f64]) -> CoinSchedule {
    let mut s = CoinSchedule::new(5, 0).expect("five steps");
    let (c1, s1) = (p[3].cos(), p[3].sin());
    let (c2, s2) = (p[7].cos(), p[7].sin());
    let coins = [
        (1, 0, euler_unitary(0.0, p[0], p[1], p[2])),
        (2, 1, real_rotation(c1, s1)),
        (2, -1, Mat2::pauli_x()),
        (3, 0, euler_unitary(0.0, p[4], p[5], p[6])),
        (4, 1, real_rotation(c2, s2)),
        (4, -1, Mat2::pauli_x()),
        (5, 0, euler_unitary(0.0, p[8], p[9], p[10])),
    ];
    for (step, site, m) in coins {
        s.insert_with_tol(step, site, m, 1e-8).expect("unitary template coin");
    }
    s
}

fn refine(target: &[Mat2], seed: &CoinSchedule) -> CoinSchedule {
    let ports = seed.five_step_ports();
    let residual = |p: &[f64]| -> Vec<f64> {
        let got = effective_povm(&template_schedule(p)).effects_at(&ports);
        got.iter()
            .zip(target)
            .flat_map(|(g, t)| {
                let d = *g - *t;
                (0..2).flat_map(move |i| (0..2).flat_map(move |j| [d.entry(i, j).re, d.entry(i, j).im]))
            })
            .collect()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in 0..24u32 {
        let x0: Vec<f64> = (0..11)
            .map(|i| ((start as f64 + 1.0) * 0.7548776662 * (i as f64 + 1.0) * 1.3247179572).fract() * std::f64::consts::TAU)
            .collect();
        let res = levenberg_marquardt(residual, &x0, LmOptions::default());
        if best.as_ref().is_none_or(|b| res.cost < b.0) {
            best = Some((res.cost, res.x));
        }
        if best.as_ref().is_some_and(|b| b.0 < 1e-26) {
            break;
        }
    }
    template_schedule(&best.expect("at least one start").1)
}

/// Compiles a rank-one four-outcome POVM into a five-step schedule whose
/// ports `{5, 3, 1, −1}` realise `E₁…E₄`.
///
/// The template is: a free coin at `(1, 0)`; real rotations at `(2, 1)` and
/// `(4, 1)`; σx at `(2, −1)` and `(4, −1)`; free coins at `(3, 0)` and `(5, 0)`.
/// Coins are solved analytically by peeling one Kraus direction per stage;
/// a least-squares fit over the template is the fallback.
pub fn compile_povm(target: &Povm) -> Result<CoinSchedule> {
    compile_povm_with_tol(target, tol::COMPILE)
}

pub fn compile_povm_with_tol(target: &Povm, tol: f64) -> Result<CoinSchedule> {
    if target.len() != 4 {
        return Err(Error::InvalidPovm(format!(
            "compiler needs 4 outcomes, got {}",
            target.len()
        )));
    }
    let ks = kraus_rows(target)?;
    let effects = target.effects();
    let analytic = peel(&ks)?;
    let res = round_trip_residual(&analytic, &effects);
    if res <= tol {
        return Ok(analytic);
    }
    let fitted = refine(&effects, &analytic);
    let res_fit = round_trip_residual(&fitted, &effects);
    if res_fit <= tol {
        Ok(fitted)
    } else {
        Err(Error::CompilationFailed(res.min(res_fit)))
    }
}
