//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
//! its measured value and the pinned tolerance.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::{json, Value};
use singlet_core::config::{ExperimentConfig, LabeledPair};
use singlet_core::metrics::{
    chi_square_gof, chsh, chsh_analytic, free_will_m, normalization_check, two_sample_chi_square, ChshConfig, NormalizationMethod,
    CHSH_LABELS, CIRELSON_BOUND,
};
use singlet_core::models::{joint_table, CELLS};
use singlet_core::optimizer::{grid_maximum, maximize_chsh, SearchOptions};
use singlet_core::protocol::run_experiment;
use singlet_core::quadrature::QuadratureSpec;
use singlet_core::rng::{trial_seed, RandomStream};
use singlet_core::watches::{round_trip_suite, WatchBank};
use singlet_core::{ModelKind, SettingsPair, UnitVector};

const BIN: &str = env!("CARGO_BIN_EXE_singlet-sim");

// criterion 1
const LAW_TRIALS: u64 = 1_000_000;
const LAW_P: f64 = 1e-3;
const LAW_MIN_ANGLES: usize = 12;
const LAW_MAX_SECONDS: f64 = 60.0;
// criterion 2
const NORM_QUAD_TOL: f64 = 1e-6;
const NORM_MC_SAMPLES: usize = 1_000_000;
const NORM_MC_TOL: f64 = 1e-3;
// criterion 4
const CHSH_TRIALS: u64 = 100_000;
const CHSH_EMPIRICAL_TOL: f64 = 0.02;
// criterion 5
const CIRELSON_REACH: f64 = 2.8274;
const CIRELSON_SLACK: f64 = 1e-9;
// criterion 6
const ROUND_TRIPS: usize = 100_000;
const ROUND_TRIP_TOL: f64 = 1e-9;
const CONSERVATION_TOL: f64 = 1e-12;
// criterion 8
const EQUIV_TRIALS: u64 = 1_000_000;
const EQUIV_P: f64 = 1e-3;

/// Writes straight to the process's stderr so the line survives output capture.
fn report(n: usize, pass: bool, detail: &str) {
    let line = format!("{} criterion {n}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn cli(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("SINGLET_SIM_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("run singlet-sim")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn criterion_1() -> (bool, String) {
    let start = Instant::now();
    let mut worst = usize::MAX;
    let mut parts = Vec::new();
    for (mi, kind) in [ModelKind::A, ModelKind::B1, ModelKind::B2].into_iter().enumerate() {
        let mut ok = 0;
        let mut min_p = f64::INFINITY;
        for i in 0..13u64 {
            let theta = 15.0 * i as f64;
            let seed = trial_seed(2024, mi as u64 * 13 + i);
            let out = run_experiment(ExperimentConfig::fixed(kind, vec![LabeledPair::at_angle_deg(theta)], LAW_TRIALS, seed)).unwrap();
            let t = &out.tables[0];
            // the law itself, independently of the table's stored copy
            let c = SettingsPair::at_angle_deg(theta).cos_angle();
            for (k, (s, tau)) in CELLS.iter().enumerate() {
                assert!((t.analytic[k] - (1.0 - s.as_f64() * tau.as_f64() * c) / 4.0).abs() < 1e-15);
            }
            let g = chi_square_gof(t, kind).unwrap();
            min_p = min_p.min(g.p_value);
            ok += usize::from(g.p_value > LAW_P);
        }
        worst = worst.min(ok);
        parts.push(format!("{kind} {ok}/13 (min p {min_p:.2e})"));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst >= LAW_MIN_ANGLES && secs < LAW_MAX_SECONDS;
    (pass, format!("{}; p > {LAW_P:e} needed at >= {LAW_MIN_ANGLES}/13; {secs:.1} s < {LAW_MAX_SECONDS} s", parts.join(", ")))
}

fn criterion_2() -> (bool, String) {
    let spec = QuadratureSpec { tolerance: 1e-9, max_panels: 4000 };
    let mut rng = RandomStream::from_seed_u64(77);
    let (mut worst_q, mut worst_mc) = (0.0f64, 0.0f64);
    for theta in [1.0, 60.0, 90.0, 179.0] {
        let s = SettingsPair::at_angle_deg(theta);
        let q = normalization_check(&s, NormalizationMethod::Quadrature, &spec, &mut rng).unwrap();
        worst_q = worst_q.max((q.value - 1.0).abs());
        let mc = normalization_check(&s, NormalizationMethod::MonteCarlo { samples: NORM_MC_SAMPLES }, &spec, &mut rng).unwrap();
        worst_mc = worst_mc.max((mc.value - 1.0).abs());
    }
    let pass = worst_q < NORM_QUAD_TOL && worst_mc < NORM_MC_TOL;
    (pass, format!("quadrature |I-1| = {worst_q:.2e} < {NORM_QUAD_TOL:e}; Monte Carlo |I-1| = {worst_mc:.2e} < {NORM_MC_TOL:e}"))
}

fn criterion_3() -> (bool, String) {
    let spec = QuadratureSpec::default();
    let s = SettingsPair::new(UnitVector::normalized(0.3, 0.1, 0.9).unwrap(), UnitVector::normalized(-0.2, 0.8, 0.1).unwrap());
    let generic = SettingsPair::new(UnitVector::normalized(0.7, -0.3, 0.2).unwrap(), UnitVector::normalized(0.1, 0.1, -0.9).unwrap());
    let shared = SettingsPair::new(s.n_l, UnitVector::normalized(0.5, 0.5, -0.5).unwrap());
    let m = |t: &SettingsPair| free_will_m(ModelKind::A, &[(s, *t)], &spec).unwrap().m;
    let (g, i, h) = (m(&generic), m(&s), m(&shared));
    let pass = g == 2.0 && i == 0.0 && h == 1.0;
    (pass, format!("model A: generic M = {g}, identical M = {i}, shared n_L M = {h} (exact 2, 0, 1)"))
}

fn criterion_4() -> (bool, String) {
    let config = ChshConfig::coplanar_deg(0.0, 270.0, 135.0, 225.0);
    let analytic = chsh_analytic(ModelKind::C, &config).e;
    let pairs: Vec<LabeledPair> =
        config.pairs().iter().zip(CHSH_LABELS).map(|(p, l)| LabeledPair { label: l.into(), pair: *p }).collect();
    let out = run_experiment(ExperimentConfig::fixed(ModelKind::C, pairs, CHSH_TRIALS, 4)).unwrap();
    let empirical = chsh(&out.tables, &config).unwrap().e;
    let mut forbidden = 0u64;
    for t in &out.tables {
        let law = joint_table(ModelKind::C, t.pair.as_ref().unwrap());
        forbidden += law.iter().zip(t.counts).filter(|(p, _)| **p == 0.0).map(|(_, c)| c).sum::<u64>();
    }
    let pass = analytic == 4.0 && (empirical - 4.0).abs() <= CHSH_EMPIRICAL_TOL && forbidden == 0;
    (
        pass,
        format!("analytic E = {analytic} (exact 4); empirical E = {empirical:.6} within {CHSH_EMPIRICAL_TOL} of 4; forbidden-cell counts = {forbidden}"),
    )
}

fn criterion_5() -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [ModelKind::A, ModelKind::B1, ModelKind::B2, ModelKind::QM] {
        let reached = maximize_chsh(kind, &SearchOptions::analytic(5.0), 0).unwrap().e;
        let (_, scan) = grid_maximum(kind, 1.0).unwrap();
        pass &= (CIRELSON_REACH..=CIRELSON_BOUND + CIRELSON_SLACK).contains(&reached) && scan <= CIRELSON_BOUND + CIRELSON_SLACK;
        parts.push(format!("{kind} optimum {reached:.10}, 1-degree scan max {scan:.10}"));
    }
    (pass, format!("{}; need >= {CIRELSON_REACH} and <= 2*sqrt(2) + {CIRELSON_SLACK:e}", parts.join("; ")))
}

fn criterion_6() -> (bool, String) {
    let r = round_trip_suite(&WatchBank::default(), ROUND_TRIPS, 6).unwrap();
    let pass = r.worst_vector_error < ROUND_TRIP_TOL && r.worst_conservation_error < CONSERVATION_TOL;
    (
        pass,
        format!(
            "{} round trips: worst component {:.2e} < {ROUND_TRIP_TOL:e}; phase conservation {:.2e} < {CONSERVATION_TOL:e}",
            r.samples, r.worst_vector_error, r.worst_conservation_error
        ),
    )
}

fn read_log(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn write_log(path: &Path, lines: &[Value]) {
    let text: String = lines.iter().map(|v| serde_json::to_string(v).unwrap() + "\n").collect();
    std::fs::write(path, text).unwrap();
}

fn criterion_7() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in ["A", "B1", "B2", "C", "QM"] {
        let out = dir.path().join(kind);
        let o = cli(&["simulate", "--model", kind, "--theta-deg", "30,90,150", "--trials", "500", "--seed", "3", "--log-events", "--out", out.to_str().unwrap()], &[]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let a = cli(&["audit", "--log", out.join("events.ndjson").to_str().unwrap()], &[]);
        pass &= code(&a) == 0;
        parts.push(format!("{kind} exit {}", code(&a)));
    }

    let base = read_log(&dir.path().join("A").join("events.ndjson"));
    let last = base.last().unwrap().clone();
    let next = |sender: &str, receiver: &str| {
        json!({
            "seq": last["seq"].as_u64().unwrap() + 1,
            "trial_id": last["trial_id"],
            "t_send": last["t_send"],
            "sender": sender,
            "receiver": receiver,
            "kind": "result_report",
            "payload": {"outcome": 1}
        })
    };
    let mut cases = Vec::new();
    let mut b2b = base.clone();
    b2b.push(next("batter_l", "batter_r"));
    cases.push(("batter-to-batter", b2b, 1));
    let mut leak = base.clone();
    leak[1]["payload"]["n_R"] = json!([0.0, 1.0, 0.0]);
    cases.push(("settings in ball", leak, 3));
    let mut b2p = base.clone();
    b2p.push(next("batter_r", "pitcher"));
    cases.push(("batter-to-pitcher", b2p, 2));
    for (name, lines, rule) in cases {
        let path = dir.path().join(format!("fault_{rule}.ndjson"));
        write_log(&path, &lines);
        let a = cli(&["audit", "--log", path.to_str().unwrap(), "--model", "A"], &[]);
        let stdout = String::from_utf8_lossy(&a.stdout);
        let cited = stdout.contains(&format!("rule ({rule})"));
        let single = stdout.contains("1 violations");
        pass &= code(&a) == 3 && cited && single;
        parts.push(format!("{name}: exit {} rule ({rule}) cited {cited}", code(&a)));
    }
    let text = std::fs::read_to_string(dir.path().join("A").join("events.ndjson")).unwrap();
    let truncated = dir.path().join("truncated.ndjson");
    std::fs::write(&truncated, &text[..text.len() / 2 + 7]).unwrap();
    let t = cli(&["audit", "--log", truncated.to_str().unwrap()], &[]);
    pass &= code(&t) == 1;
    parts.push(format!("truncated log exit {}", code(&t)));
    (pass, format!("conforming runs exit 0, faults exit 3, malformed exit 1: {}", parts.join(", ")))
}

fn criterion_8() -> (bool, String) {
    let hist = |kind| run_experiment(ExperimentConfig::watch_driven(kind, EQUIV_TRIALS, 8)).unwrap().hidden_histogram.unwrap();
    let g = two_sample_chi_square(&hist(ModelKind::B1), &hist(ModelKind::B2)).unwrap();
    (g.p_value > EQUIV_P, format!("B1 vs B2 (octant, sigma, tau) bins, N = {EQUIV_TRIALS} each: chi2 = {:.2}, dof = {}, p = {:.3e} > {EQUIV_P:e}", g.statistic, g.dof, g.p_value))
}

fn criterion_9() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let runs: Vec<(&str, Vec<String>, Vec<&str>)> = vec![
        ("simulate", vec!["simulate", "--model", "B1", "--theta-deg", "0,45,90", "--trials", "20000", "--seed", "9", "--log-events"].into_iter().map(String::from).collect(), vec!["counts.csv", "curve.csv", "events.ndjson", "manifest.json"]),
        ("watch-driven", vec!["simulate", "--model", "A", "--watch-driven", "--trials", "20000", "--seed", "9"].into_iter().map(String::from).collect(), vec!["counts.csv", "curve.csv", "manifest.json"]),
        ("chsh", vec!["chsh", "--model", "B2", "--optimize", "--mode", "empirical", "--resolution", "90", "--trials", "5000", "--screening-trials", "200", "--seed", "9"].into_iter().map(String::from).collect(), vec!["chsh.json"]),
        ("freewill", vec!["freewill", "--model", "B1", "--grid", "4", "--refine", "5"].into_iter().map(String::from).collect(), vec!["freewill.json"]),
        ("verify", vec!["verify", "--model", "QM,C", "--grid", "5", "--trials", "20000", "--mc-samples", "1000", "--round-trips", "100", "--seed", "9"].into_iter().map(String::from).collect(), vec!["report.json", "report.csv"]),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, args, files) in runs {
        let mut outputs = Vec::new();
        for (i, threads) in ["1", "3", "8"].iter().enumerate() {
            let out = p(&format!("{name}_{i}"));
            let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
            a.extend(["--out", &out]);
            // one run sets the thread count through the environment
            let o = if i == 1 { cli(&a, &[("SINGLET_SIM_THREADS", threads)]) } else { a.extend(["--threads", threads]); cli(&a, &[]) };
            assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
            outputs.push(files.iter().map(|f| std::fs::read(Path::new(&out).join(f)).unwrap()).collect::<Vec<_>>());
        }
        let same = outputs.windows(2).all(|w| w[0] == w[1]);
        pass &= same;
        parts.push(format!("{name} {}", if same { "identical" } else { "DIFFERENT" }));
    }
    // a manifest alone reproduces its run
    let rerun = p("rerun");
    let o = cli(&["simulate", "--config-file", &p("simulate_0/manifest.json"), "--out", &rerun], &[]);
    let same = code(&o) == 0
        && ["counts.csv", "events.ndjson", "manifest.json"].iter().all(|f| {
            std::fs::read(Path::new(&rerun).join(f)).unwrap() == std::fs::read(Path::new(&p("simulate_0")).join(f)).unwrap()
        });
    pass &= same;
    parts.push(format!("manifest rerun {}", if same { "identical" } else { "DIFFERENT" }));
    (pass, format!("threads 1/3/8: {}", parts.join(", ")))
}

#[test]
fn acceptance() {
    let criteria: [fn() -> (bool, String); 9] =
        [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9];
    let mut failed = Vec::new();
    for (i, c) in criteria.iter().enumerate() {
        let (pass, detail) = catch_unwind(AssertUnwindSafe(c)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        report(i + 1, pass, &detail);
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
