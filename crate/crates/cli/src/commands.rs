use std::path::Path;

use serde::Serialize;
use serde_json::json;

use semisic::optics::{angle_rows, apply_noise, schedule_plates, PlateSchedule};
use semisic::povm::{bloch_vectors, born_probabilities, build_semi_sic, semi_sic_params, verify_povm};
use semisic::selftest::{
    fit_witness_with, multinomial_counts, q_max, sample_witness, seesaw_optimize_with, semi_sic_residual,
    FitOptions, SampleOptions, SeesawOptions, ShotBudget,
};
use semisic::tables::POVM_PLATES;
use semisic::walk::{compile_povm, effective_povm, round_trip_residual, run_walk};
use semisic::{CoinSchedule, DensityMat, NoiseModel, Overlap, Povm, PureQubit, WitnessSpec};

use crate::report::{write_csv, write_json, RunReport};
use crate::{CliError, CompileArgs, CoinSource, PovmArgs, SelftestArgs, SimulateArgs};

/// A failed command, with the partial report when there is one to show.
pub struct Failure {
    pub error: CliError,
    pub report: Option<Box<RunReport>>,
}

impl<E: Into<CliError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            error: e.into(),
            report: None,
        }
    }
}

pub type Outcome = Result<RunReport, Failure>;

fn parse_b(s: &str) -> Result<Overlap, CliError> {
    s.parse().map_err(|e: semisic::Error| CliError::Usage(e.to_string()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{what} {}: {e}", path.display())))
}

fn read_noise(path: Option<&Path>) -> Result<Option<NoiseModel>, CliError> {
    path.map(|p| {
        let m: NoiseModel = read_json(p, "noise model")?;
        m.validate()?;
        Ok(m)
    })
    .transpose()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Serialize)]
struct ElementRow {
    element: usize,
    weight: f64,
    bloch_x: f64,
    bloch_y: f64,
    bloch_z: f64,
}

pub fn povm(args: &PovmArgs) -> Outcome {
    let b = parse_b(&args.b)?;
    eprintln!("building semi-SIC POVM for B = {b}");
    let mut report = RunReport::new("povm", json!({ "args": args, "B": b.label(), "B_value": b.value() }));
    let povm = build_semi_sic(b.value())?;
    report.output("B", &b.label());
    report.output("params", &semi_sic_params(b.value())?);
    report.output("povm", &povm);
    report.residual("completeness", povm.completeness_residual());
    if let Some(path) = &args.json {
        write_json(path, &povm)?;
    }
    if let Some(path) = &args.csv {
        let set = bloch_vectors(&povm)?;
        let rows: Vec<ElementRow> = set
            .vectors
            .iter()
            .zip(&set.weights)
            .enumerate()
            .map(|(i, (n, &w))| ElementRow {
                element: i + 1,
                weight: w,
                bloch_x: n[0],
                bloch_y: n[1],
                bloch_z: n[2],
            })
            .collect();
        write_csv(path, &["element", "weight", "bloch_x", "bloch_y", "bloch_z"], &rows)?;
    }
    if args.verify {
        let v = verify_povm(&povm, Some(b.value()));
        report.output("verification", &v);
        report.residual("completeness", v.completeness.residual);
        report.residual("positivity", v.positivity.residual);
        report.residual("rank_one", v.rank_one.residual);
        report.residual("symmetry", v.symmetry.residual);
        if let Some(t) = v.trace_spectrum {
            report.residual("trace_spectrum", t.residual);
        }
        report.residual("max", v.max_residual());
        if !v.passed() {
            return Err(Failure {
                error: CliError::Numerical(format!("verification failed (max residual {:.3e})", v.max_residual())),
                report: Some(Box::new(report)),
            });
        }
        eprintln!("verification passed, max residual {:.3e}", v.max_residual());
    }
    Ok(report)
}

fn load_povm(b: Option<&str>, file: Option<&Path>) -> Result<(String, Povm), CliError> {
    match (b, file) {
        (Some(b), _) => {
            let b = parse_b(b)?;
            Ok((b.label(), build_semi_sic(b.value())?))
        }
        (None, Some(p)) => {
            let povm: Povm = read_json(p, "POVM")?;
            let label = povm.b.map_or_else(|| "custom".to_string(), |b| b.to_string());
            Ok((label, povm))
        }
        (None, None) => Err(CliError::Usage("one of --B or --povm is required".into())),
    }
}

pub fn compile(args: &CompileArgs) -> Outcome {
    let (label, povm) = load_povm(args.b.as_deref(), args.povm.as_deref())?;
    let mut report = RunReport::new("compile", json!({ "args": args, "B": label, "povm": povm }));
    eprintln!("compiling {} ({} elements)", povm.label, povm.len());
    let schedule = compile_povm(&povm)?;
    report.output("schedule", &schedule);
    report.output("ports", &schedule.five_step_ports());
    report.output("effective_povm", &effective_povm(&schedule));
    let residual = round_trip_residual(&schedule, &povm.effects());
    report.residual("round_trip", residual);
    report.residual("unitarity", schedule.max_unitarity_residual());
    eprintln!("round-trip residual {residual:.3e}");
    if let Some(angles) = &args.angles {
        let plates = schedule_plates(&schedule)?;
        let rows = angle_rows(&label, &plates);
        let realised = plates.to_schedule()?;
        report.residual("plate_round_trip", round_trip_residual(&realised, &povm.effects()));
        report.output("angles", &rows);
        if let Some(path) = angles {
            write_csv(path, &["B", "label", "kind", "angle_deg"], &rows)?;
        }
    }
    if let Some(path) = &args.out {
        write_json(path, &schedule)?;
    }
    Ok(report)
}

fn parse_state(s: &str) -> Result<PureQubit, CliError> {
    let bad = || CliError::Usage(format!("--state expects THETA,PHI in radians, got {s:?}"));
    let (t, p) = s.split_once(',').ok_or_else(bad)?;
    let theta: f64 = t.trim().parse().map_err(|_| bad())?;
    let phi: f64 = p.trim().parse().map_err(|_| bad())?;
    if !(theta.is_finite() && phi.is_finite()) {
        return Err(bad());
    }
    Ok(PureQubit::from_angles(theta, phi))
}

#[derive(Serialize)]
struct Fig3Row {
    #[serde(rename = "B")]
    b: String,
    outcome: usize,
    theory: f64,
    sampled: f64,
    stderr: f64,
}

pub fn simulate(args: &SimulateArgs) -> Outcome {
    let psi = parse_state(&args.state)?;
    let noise = read_noise(args.noise.as_deref())?;
    let (label, schedule, theory_povm) = match (&args.b, &args.schedule) {
        (Some(b), _) => {
            let b = parse_b(b)?;
            let povm = build_semi_sic(b.value())?;
            let schedule = match args.coins {
                CoinSource::Compiled => compile_povm(&povm)?,
                CoinSource::Table => {
                    let row = POVM_PLATES
                        .iter()
                        .find(|r| r.b_value() == b.value())
                        .ok_or_else(|| CliError::Usage(format!("no tabulated plate angles for B = {b}")))?;
                    PlateSchedule::from_table(row)?.to_schedule()?
                }
            };
            (b.label(), schedule, Some(povm))
        }
        (None, Some(p)) => ("custom".to_string(), read_json::<CoinSchedule>(p, "schedule")?, None),
        (None, None) => return Err(CliError::Usage("one of --B or --schedule is required".into()).into()),
    };
    let mut report = RunReport::new(
        "simulate",
        json!({
            "args": args,
            "B": label,
            "state": psi,
            "noise": noise,
        }),
    );
    eprintln!("running {}-step walk", schedule.steps());
    let ports: Vec<i64> = if theory_povm.is_some() {
        schedule.five_step_ports().to_vec()
    } else {
        effective_povm(&schedule).positions()
    };
    let walk = run_walk(&psi, &schedule).at(&ports);
    let theory = match &theory_povm {
        Some(p) => born_probabilities(p, &DensityMat::pure(&psi))?,
        None => walk.clone(),
    };
    report.output("ports", &ports);
    report.output("theory", &theory);
    report.output("walk", &walk);
    report.residual("walk_vs_theory", max_abs_diff(&walk, &theory));
    report.residual("port_leakage", (1.0 - walk.iter().sum::<f64>()).abs());
    let expected = match &noise {
        Some(m) => {
            let noisy = apply_noise(&walk, m, &schedule, &psi)?;
            report.output("noisy", &noisy);
            report.residual("noise_shift", max_abs_diff(&noisy, &walk));
            noisy
        }
        None => walk.clone(),
    };
    let (sampled, stderr) = if args.shots > 0 {
        eprintln!("sampling {} shots", args.shots);
        let counts = multinomial_counts(&expected, args.shots, args.seed);
        let n = args.shots as f64;
        let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let err: Vec<f64> = freq.iter().map(|f| (f * (1.0 - f) / n).sqrt()).collect();
        report.output("counts", &counts);
        report.output("sampled", &freq);
        report.output("stderr", &err);
        (freq, err)
    } else {
        (expected.clone(), vec![0.0; expected.len()])
    };
    if let Some(path) = &args.fig3_csv {
        let rows: Vec<Fig3Row> = (0..ports.len())
            .map(|i| Fig3Row {
                b: label.clone(),
                outcome: i + 1,
                theory: theory[i],
                sampled: sampled[i],
                stderr: stderr[i],
            })
            .collect();
        write_csv(path, &["B", "outcome", "theory", "sampled", "stderr"], &rows)?;
    }
    Ok(report)
}

/// Versioned witness defaults, fitted with the seed recorded in each file.
const SHIPPED_WITNESSES: [(&str, &str); 4] = [
    ("1/12", include_str!("../data/witness/v1/b12.json")),
    ("1/13", include_str!("../data/witness/v1/b13.json")),
    ("1/14", include_str!("../data/witness/v1/b14.json")),
    ("1/15", include_str!("../data/witness/v1/b15.json")),
];

pub fn shipped_witness(b: &Overlap) -> Option<WitnessSpec> {
    SHIPPED_WITNESSES.iter().find_map(|(label, text)| {
        let spec: WitnessSpec = serde_json::from_str(text).ok()?;
        let matches = label.parse::<Overlap>().ok()?.value() == b.value()
            && spec.b.is_some_and(|sb| sb.value() == b.value());
        matches.then_some(spec)
    })
}

#[derive(Serialize)]
struct Fig4Row {
    #[serde(rename = "B")]
    b: String,
    #[serde(rename = "W")]
    w: f64,
    stderr: f64,
    #[serde(rename = "Q")]
    q: f64,
}

pub fn selftest(args: &SelftestArgs) -> Outcome {
    let b = parse_b(&args.b)?;
    let noise = read_noise(args.noise.as_deref())?;
    let (spec, source) = if let Some(p) = &args.witness {
        (read_json::<WitnessSpec>(p, "witness")?, "file")
    } else if args.fit {
        eprintln!("fitting witness for B = {b} (seed {})", args.seed);
        let fit = fit_witness_with(
            b.value(),
            args.seed,
            &FitOptions {
                threads: args.threads,
                ..FitOptions::default()
            },
        )?;
        eprintln!("fit rigidity {:.4}", fit.rigidity);
        (WitnessSpec { b: Some(b), ..fit.spec }, "fit")
    } else if let Some(spec) = shipped_witness(&b) {
        (spec, "shipped")
    } else {
        eprintln!("no shipped witness for B = {b}; fitting with seed 0");
        let fit = fit_witness_with(
            b.value(),
            0,
            &FitOptions {
                threads: args.threads,
                ..FitOptions::default()
            },
        )?;
        (WitnessSpec { b: Some(b), ..fit.spec }, "fit")
    };
    if let Some(sb) = spec.b {
        if sb.value() != b.value() {
            eprintln!("warning: witness was built for B = {sb}, evaluating at B = {b}");
        }
    }
    if let Some(path) = &args.save_witness {
        std::fs::write(path, serde_json::to_string_pretty(&spec).expect("serialisable") + "\n")
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    let mut report = RunReport::new(
        "selftest",
        json!({
            "args": args,
            "B": b.label(),
            "B_value": b.value(),
            "noise": noise,
            "witness": spec,
            "witness_source": source,
        }),
    );
    eprintln!("see-saw with {} restarts", args.restarts);
    let out = seesaw_optimize_with(
        &spec,
        &SeesawOptions {
            restarts: args.restarts,
            seed: args.seed,
            threads: args.threads,
            b_tag: Some(b.value()),
            ..SeesawOptions::default()
        },
    )?;
    let q = q_max(b.value())?;
    let res = semi_sic_residual(&out.scenario.povm4, b.value())?;
    report.residual("seesaw_vs_q", (out.result.w - q).abs());
    report.residual("povm_overlap", res.overlap);
    report.residual("povm_traces", res.traces);
    report.output(
        "seesaw",
        &json!({
            "w": out.result.w,
            "best_restart": out.best_restart,
            "sweeps": out.sweeps,
            "converged": out.converged,
        }),
    );
    report.output("scenario", &out.scenario);
    let mut opts = SampleOptions::new(ShotBudget::from_count(args.shots), args.seed);
    opts.noise = noise;
    if args.shots > 0 {
        eprintln!("sampling {} shots per setting", args.shots);
    }
    let sampled = sample_witness(&out.scenario, &spec, &opts)?;
    report.output("result", &sampled.result);
    if args.shots > 0 {
        report.output("counts", &sampled.counts);
    }
    if let Some(path) = &args.counts_csv {
        write_csv(path, &["x", "y", "b", "count"], &sampled.counts)?;
    }
    if let Some(path) = &args.fig4_csv {
        let row = Fig4Row {
            b: b.label(),
            w: sampled.result.w,
            stderr: sampled.result.stderr.unwrap_or(0.0),
            q,
        };
        write_csv(path, &["B", "W", "stderr", "Q"], &[row])?;
    }
    if sampled.result.over_maximal {
        eprintln!("note: estimate exceeds the qubit maximum Q = {q:.6}");
    }
    Ok(report)
}
