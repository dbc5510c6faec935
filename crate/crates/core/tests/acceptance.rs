//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semisic::optics::{
    angle_distance, apply_noise, chain_matrix, decompose_coin, prep_angles, NoiseModel, PlateKind,
    PlateSchedule,
};
use semisic::povm::{
    born_probabilities, bloch_vectors, build_semi_sic, random_rank_one_povm, verify_povm,
};
use semisic::selftest::{
    fit_witness, q_max, reference_scenario, sample_witness, seesaw_optimize, semi_sic_residual,
    shots_for_stderr, SampleOptions, ShotBudget,
};
use semisic::tables::{
    povm_coins_b13, povm_schedule_b13, preparation_amplitudes_b13, preparations_b13, selftest_coins_b13,
    POVM_PLATES, SELFTEST_PLATES,
};
use semisic::walk::{compile_povm, effective_povm, round_trip_residual, run_walk};
use semisic::{DensityMat, Mat2, PureQubit};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn family_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..200 {
        let b = rng.random_range(1.0 / 16.0 + 1e-6..=1.0 / 12.0);
        let povm = build_semi_sic(b).expect("in range");
        let report = verify_povm(&povm, Some(b));
        worst = worst.max(report.max_residual());
        if !report.passed() {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && worst <= 1e-10 && elapsed < Duration::from_secs(1),
        format!("worst residual {worst:.2e}, {failures} failures, {elapsed:.2?}"),
    )
}

fn sic_limit() -> Outcome {
    let povm = build_semi_sic(1.0 / 12.0).unwrap();
    let set = bloch_vectors(&povm).unwrap();
    let target = (-1.0f64 / 3.0).acos();
    let mut angle_err = 0.0f64;
    for i in 0..4 {
        for j in i + 1..4 {
            angle_err = angle_err.max((set.angle(i, j) - target).abs());
        }
    }
    let trace_err = max_abs(povm.weights().iter().map(|w| w - 0.5));
    outcome(
        angle_err <= 1e-9 && trace_err <= 1e-9,
        format!("angle error {angle_err:.2e}, trace error {trace_err:.2e}"),
    )
}

fn port_probabilities() -> Outcome {
    let quoted = [0.1807, 0.3584, 0.2305, 0.2305];
    let plus = PureQubit::plus();
    let literal = povm_schedule_b13();
    let rounded = run_walk(&plus, &literal).at(&literal.five_step_ports());
    let povm = build_semi_sic(1.0 / 13.0).unwrap();
    let born = born_probabilities(&povm, &DensityMat::pure(&plus)).unwrap();
    let compiled = compile_povm(&povm).unwrap();
    let exact_walk = run_walk(&plus, &compiled).at(&compiled.five_step_ports());
    let vs_quoted = max_abs(rounded.iter().zip(quoted).map(|(a, b)| a - b));
    let self_consistency = max_abs(born.iter().zip(&exact_walk).map(|(a, b)| a - b));
    let vs_rounded = max_abs(born.iter().zip(&rounded).map(|(a, b)| a - b));
    outcome(
        vs_quoted <= 2e-3 && self_consistency <= 1e-10 && vs_rounded <= 2e-3,
        format!(
            "rounded walk vs quoted {vs_quoted:.2e}, Born vs compiled walk {self_consistency:.2e}, Born vs rounded walk {vs_rounded:.2e}"
        ),
    )
}

fn coin_round_trip() -> Outcome {
    let povm = build_semi_sic(1.0 / 13.0).unwrap();
    let s = compile_povm(&povm).unwrap();
    let entries = [
        s.coin(2, 1).entry(0, 0).re,
        s.coin(3, 0).entry(0, 0).re,
        s.coin(4, 1).entry(0, 0).re,
    ];
    let entry_err = max_abs(entries.iter().zip([0.6011, 0.5551, 0.6941]).map(|(a, b)| a - b));
    let literal = effective_povm(&povm_schedule_b13());
    let effects = literal.effects_at(&[5, 3, 1, -1]);
    let effect_err = max_abs(
        effects
            .iter()
            .zip(povm.effects())
            .map(|(a, b)| (*a - b).max_abs()),
    );
    outcome(
        entry_err <= 1e-3 && effect_err <= 2e-3,
        format!("coin entry error {entry_err:.2e}, literal schedule effect error {effect_err:.2e}"),
    )
}

fn table_consistency() -> Outcome {
    // Per-slot Jones products against the tabulated coins.
    let mut jones_err = 0.0f64;
    for (row, coins) in [(&POVM_PLATES[1], povm_coins_b13()), (&SELFTEST_PLATES[0], selftest_coins_b13())] {
        let plates = PlateSchedule::from_table(row).unwrap();
        for (step, site, coin) in coins {
            let realised = plates
                .chains
                .iter()
                .find(|c| c.realizes == semisic::optics::Realizes::Coin { step, site })
                .map_or(Mat2::identity(), chain_matrix);
            jones_err = jones_err.max(realised.phase_free_distance(&coin));
        }
    }
    // Single-HWP slots recovered from compiled coins.
    let mut angle_err = 0.0f64;
    for row in POVM_PLATES.iter() {
        let s = compile_povm(&build_semi_sic(row.b_value()).unwrap()).unwrap();
        for (label, step, site) in [("HWP3", 2, 1), ("HWP4", 2, -1), ("HWP5", 3, 0), ("HWP6", 4, 1), ("HWP7", 4, -1)] {
            let chain = decompose_coin(&s.coin(step, site), &[PlateKind::Hwp]).unwrap();
            let want = row.angle(label).unwrap();
            angle_err = angle_err.max(angle_distance(PlateKind::Hwp, chain.plates[0].angle_deg, want));
        }
    }
    outcome(
        jones_err <= 2e-3 && angle_err <= 0.05,
        format!("Jones vs coin {jones_err:.2e}, single-HWP angle error {angle_err:.3} deg"),
    )
}

fn q_formula() -> Outcome {
    let pairs = [(13.0, 7.2363), (14.0, 7.5895), (15.0, 8.0)];
    let err = max_abs(pairs.iter().map(|(d, q)| q_max(1.0 / d).unwrap() - q));
    outcome(err <= 1e-4, format!("max error {err:.2e}"))
}

fn selftest_optimum() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [13.0, 14.0, 15.0] {
        let b = 1.0 / d;
        let spec = match fit_witness(b, 0) {
            Ok(s) => s,
            Err(e) => {
                ok = false;
                parts.push(format!("1/{d}: fit failed: {e}"));
                continue;
            }
        };
        let start = Instant::now();
        let out = seesaw_optimize(&spec, 50, 0).unwrap();
        let elapsed = start.elapsed();
        let q = q_max(b).unwrap();
        let res = semi_sic_residual(&out.scenario.povm4, b).unwrap();
        let gap = (out.result.w - q).abs();
        ok &= gap <= 1e-3 && res.overlap <= 1e-3 && res.traces <= 1e-3 && elapsed < Duration::from_secs(60);
        parts.push(format!(
            "1/{d}: |W-Q| {gap:.1e}, overlap {:.1e}, traces {:.1e}, {elapsed:.2?}",
            res.overlap, res.traces
        ));
    }
    outcome(ok, parts.join("; "))
}

fn compiler_generality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut errors = 0;
    for _ in 0..200 {
        let povm = random_rank_one_povm(&mut rng);
        match compile_povm(&povm) {
            Ok(s) => worst = worst.max(round_trip_residual(&s, &povm.effects())),
            Err(_) => errors += 1,
        }
    }
    let elapsed = start.elapsed();
    outcome(
        errors == 0 && worst <= 1e-9 && elapsed < Duration::from_secs(10),
        format!("worst residual {worst:.2e}, {errors} compile errors, {elapsed:.2?}"),
    )
}

fn finite_statistics() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, d) in [13.0, 14.0, 15.0].into_iter().enumerate() {
        let b = 1.0 / d;
        let spec = fit_witness(b, 0).unwrap();
        let s = reference_scenario(b, &spec).unwrap();
        let shots = shots_for_stderr(&s, &spec, 0.03);
        let sampled = sample_witness(&s, &spec, &SampleOptions::new(ShotBudget::PerSetting(shots), 100 + i as u64))
            .unwrap()
            .result;
        let sigma = sampled.stderr.unwrap();
        let q = q_max(b).unwrap();
        let within = (sampled.w - q).abs() <= 3.0 * sigma;
        ok &= within;
        parts.push(format!("1/{d}: {:.4}±{sigma:.4} at {shots} shots", sampled.w));
    }
    // Extinction 220 and a 5% efficiency spread, worst over which port is
    // least efficient, the four B rows and the four tabulated input states.
    let shift = |extinction: Option<f64>, spread: bool| {
        let mut worst = 0.0f64;
        for row in POVM_PLATES.iter() {
            let povm = build_semi_sic(row.b_value()).unwrap();
            let schedule = compile_povm(&povm).unwrap();
            for psi in [PureQubit::plus(), PureQubit::h(), PureQubit::v()].into_iter().chain(preparations_b13()) {
                let ideal = run_walk(&psi, &schedule).at(&schedule.five_step_ports());
                for low in 0..4 {
                    let mut efficiency = vec![1.0; 4];
                    if spread {
                        efficiency[low] = 0.95;
                    }
                    let model = NoiseModel {
                        extinction_ratio: extinction,
                        efficiency,
                        ..NoiseModel::ideal()
                    };
                    let noisy = apply_noise(&ideal, &model, &schedule, &psi).unwrap();
                    worst = worst.max(max_abs(noisy.iter().zip(&ideal).map(|(a, b)| a - b)));
                }
            }
        }
        worst
    };
    let worst = shift(Some(220.0), true);
    let extinction_only = shift(Some(220.0), false);
    let efficiency_only = shift(None, true);
    ok &= worst < 0.005;
    parts.push(format!(
        "max noise shift {worst:.4} (extinction alone {extinction_only:.4}, efficiency alone {efficiency_only:.4})"
    ));
    outcome(ok, parts.join("; "))
}

fn tabulated_preparations() -> Outcome {
    let printed = preparation_amplitudes_b13();
    let mut amp_err = 0.0f64;
    let mut trip = 0.0f64;
    for (psi, [h, v]) in preparations_b13().iter().zip(printed) {
        amp_err = amp_err.max((psi.amp_h() - h).norm()).max((psi.amp_v() - v).norm());
        let chain = prep_angles(psi).unwrap();
        let out = chain_matrix(&chain).apply(&PureQubit::h().as_array());
        let out = PureQubit::from_array(out).unwrap();
        trip = trip.max(out.phase_free_distance(psi));
    }
    outcome(
        amp_err <= 1e-4 && trip <= 1e-6,
        format!("amplitude error {amp_err:.2e}, plate round trip {trip:.2e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("family algebra", family_algebra),
        ("SIC limit", sic_limit),
        ("port probabilities on |+>", port_probabilities),
        ("coin round trip", coin_round_trip),
        ("plate table consistency", table_consistency),
        ("witness maximum Q(B)", q_formula),
        ("self-testing optimum", selftest_optimum),
        ("compiler generality", compiler_generality),
        ("finite statistics and noise", finite_statistics),
        ("tabulated preparations", tabulated_preparations),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<30} {}  {}",
            i + 1,
            name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
