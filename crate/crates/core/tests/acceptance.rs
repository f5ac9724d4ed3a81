//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;

use martingale_repair::constraints::{self, DetectOptions, SparseRow};
use martingale_repair::entropic::{
    duality_gap, dykstra_run, entropy, epsilon_sweep, kl_divergence, EntropicProblem, GibbsKernel, Sinkhorn,
};
use martingale_repair::lp::{self, LpOptions, LpProblem, LpStatus};
use martingale_repair::market_data::{apply_stress, CalibrationMark, NormalizedSurface, StressBand, StressScenario};
use martingale_repair::repair::{self, RepairConfig, RepairMode};
use martingale_repair::signed_measure::{check_lemma_identity, marginal_weights};

use common::*;

type Outcome = Result<String, String>;

fn sinkhorn_equals_dykstra() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let periods = 1 + case % 2;
        let atoms = rng.random_range(3..=6);
        let eps = if case % 4 < 2 { 0.5 } else { 1.0 };
        let (d, problem) = random_entropic_problem(&mut rng, periods, atoms);
        let kernel = GibbsKernel::new(&d, eps).map_err(|e| e.to_string())?;
        let trace = dykstra_run(&kernel, &problem, 50).map_err(|e| e.to_string())?;
        let mut solver = Sinkhorn::new(&kernel, &problem).map_err(|e| e.to_string())?;
        for sweep in &trace.iterates {
            for x in sweep {
                solver.substep().map_err(|e| e.to_string())?;
                worst = worst.max(max_abs_diff(&solver.coupling(), x));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("max |M - X| = {worst:.2e} over 20 instances x 50 sweeps, {secs:.1}s");
    if worst <= 1e-10 && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn stopping_criterion_soundness() -> Outcome {
    let mut rng = rng(2);
    let (mut checked, mut worst_scale, mut worst_constraint) = (0, 0.0f64, 0.0f64);
    for case in 0..10 {
        let atoms = rng.random_range(3..=6);
        let (d, problem) = random_entropic_problem(&mut rng, 1 + case % 2, atoms);
        let kernel = GibbsKernel::new(&d, 1.0).map_err(|e| e.to_string())?;
        let mut solver = Sinkhorn::new(&kernel, &problem).map_err(|e| e.to_string())?;
        let report = solver.run(1e-12, 200_000).map_err(|e| e.to_string())?;
        if !report.converged {
            continue;
        }
        checked += 1;
        let before = solver.state().clone();
        let m = solver.coupling();
        let sys = problem.system();
        let rows: Vec<f64> = m.row_iter().map(|r| r.sum()).collect();
        let cols: Vec<f64> = m.column_iter().map(|c| c.sum()).collect();
        let mu: Vec<f64> = rows.iter().zip(problem.nu_minus()).map(|(r, n)| r - n).collect();
        worst_constraint = worst_constraint
            .max(sys.residual(&mu))
            .max(mu.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max))
            .max(cols.iter().zip(problem.nu_plus()).map(|(c, n)| (c - n).abs()).fold(0.0, f64::max));
        // finish the current sweep, then one full sweep more
        while solver.next_block() != 0 {
            solver.substep().map_err(|e| e.to_string())?;
        }
        solver.sweep().map_err(|e| e.to_string())?;
        let after = solver.state();
        // scalings a^r as positive vectors: one per affine row, then the
        // lower-bound and column scalings
        let rel = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs()).fold(0.0, f64::max);
        let affine = (0..sys.num_rows())
            .map(|r| rel(&before.affine_scaling(r, sys), &after.affine_scaling(r, sys)))
            .fold(0.0, f64::max);
        let (low, col) = (rel(&before.lower_scale, &after.lower_scale), rel(&before.column_scale, &after.column_scale));
        worst_scale = worst_scale.max(affine).max(low).max(col);
    }
    let detail = format!(
        "{checked} converged instances; scaling change {worst_scale:.2e}, constraint violation {worst_constraint:.2e}"
    );
    if checked > 0 && worst_scale <= 1e-10 && worst_constraint <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn stressed_desk() -> NormalizedSurface {
    apply_stress(&desk_m1(), &scenario("atm_up20.json")).unwrap().surface
}

fn epsilon_to_zero() -> Outcome {
    let start = Instant::now();
    let surface = stressed_desk();
    let cfg = RepairConfig::default();
    let inputs = repair::prepare(&surface, &[], &cfg).map_err(|e| e.to_string())?;
    if inputs.theta.len() > 10 {
        return Err(format!("grid has {} atoms", inputs.theta.len()));
    }
    let exact = lp::solve_p_prime(&inputs.distance, &inputs.nu, &inputs.system, &LpOptions::default())
        .map_err(|e| e.to_string())?
        .value;
    let problem = EntropicProblem::new(inputs.system.clone(), &inputs.nu).map_err(|e| e.to_string())?;
    let eps = [1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4];
    let points = epsilon_sweep(&inputs.distance, &problem, &eps, 1e-7, 500_000, true).map_err(|e| e.to_string())?;
    let stable: Vec<_> = points.iter().take_while(|p| p.converged && p.cost.is_some()).collect();
    let Some(last) = stable.last() else {
        return Err("no epsilon converged".into());
    };
    let gaps: Vec<f64> = stable.iter().map(|p| (p.cost.unwrap() - exact).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-6);
    let rel = gaps.last().unwrap() / exact;
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "LP {exact:.6e}; smallest stable eps {:.0e} gives {:.6e} ({:.3}% off); gap non-increasing: {monotone}; {secs:.1}s",
        last.epsilon,
        last.cost.unwrap(),
        100.0 * rel
    );
    if rel <= 0.01 && monotone && secs < 300.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn strong_duality() -> Outcome {
    let mut solves = 0;
    let mut worst: f64 = 0.0;
    let mut check = |d: &DMatrix<f64>, problem: &EntropicProblem, eps: f64| -> Result<(), String> {
        let kernel = GibbsKernel::new(d, eps).map_err(|e| e.to_string())?;
        let mut solver = Sinkhorn::new(&kernel, problem).map_err(|e| e.to_string())?;
        let report = solver.run(1e-10, 200_000).map_err(|e| e.to_string())?;
        if report.converged {
            let m = solver.coupling();
            let primal = eps * kl_divergence(&m, kernel.matrix());
            let gap = duality_gap(&m, solver.state(), &kernel, problem).map_err(|e| e.to_string())?;
            worst = worst.max(gap.abs() / (1.0 + primal.abs()));
            solves += 1;
        }
        Ok(())
    };
    let mut rng = rng(4);
    for case in 0..20 {
        let atoms = rng.random_range(3..=6);
        let (d, problem) = random_entropic_problem(&mut rng, 1 + case % 2, atoms);
        check(&d, &problem, if case % 2 == 0 { 0.5 } else { 1.0 })?;
    }
    let inputs = repair::prepare(&stressed_desk(), &[], &RepairConfig::default()).map_err(|e| e.to_string())?;
    let problem = EntropicProblem::new(inputs.system.clone(), &inputs.nu).map_err(|e| e.to_string())?;
    for eps in [1.0, 0.1, 0.01] {
        check(&inputs.distance, &problem, eps)?;
    }
    let detail = format!("{solves} converged solves; max gap / (1 + |primal|) = {worst:.2e}");
    if solves > 0 && worst <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lemma_identity() -> Outcome {
    let mut rng = rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=10);
        let mut ks: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..3.0)).collect();
        ks.sort_by(f64::total_cmp);
        ks.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let mut strikes = vec![0.0];
        strikes.extend(&ks);
        strikes.push(ks.last().unwrap() + rng.random_range(0.05..1.0));
        let mut prices = vec![1.0];
        prices.extend(ks.iter().map(|_| rng.random_range(0.0..1.0)));
        prices.push(0.0);
        let m = marginal_weights(&strikes, &prices).map_err(|e| e.to_string())?;
        let mut probes = strikes.clone();
        probes.extend(strikes.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        for k in probes {
            worst = worst.max(check_lemma_identity(&m, &strikes, &prices, k));
        }
    }
    let detail = format!("max identity error {worst:.2e} over 100 smiles");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn kmax_feasibility() -> Outcome {
    let mut rng = rng(6);
    let (mut ok_plain, mut ok_cal, mut arbitrage) = (0, 0, 0);
    let mut failures = Vec::new();
    for case in 0..50 {
        let periods = 1 + case % 2;
        let strikes = rng.random_range(3..=4);
        let surface = random_surface(&mut rng, periods, strikes);
        let hit = rng.random_range(0..strikes);
        let k = surface.smiles()[0].strikes[hit];
        let scenario = StressScenario {
            bands: vec![StressBand {
                maturity: Some(rng.random_range(0..periods)),
                k_min: Some(k - 1e-9),
                k_max: Some(k + 1e-9),
                vol_multiplier: rng.random_range(0.5..1.6),
            }],
            calibration_marks: Vec::new(),
        };
        let stressed = apply_stress(&surface, &scenario).map_err(|e| e.to_string())?.surface;
        if !constraints::detect_arbitrage(&stressed).feasible {
            arbitrage += 1;
        }
        let node = (hit + 1 + rng.random_range(0..strikes - 1)) % strikes;
        let marks: Vec<CalibrationMark> = (0..periods)
            .filter(|&i| Some(i) != scenario.bands[0].maturity || node != hit)
            .map(|i| CalibrationMark { maturity: i, node })
            .collect();
        for (calibrated, marks) in [(false, Vec::new()), (true, marks)] {
            let cfg = RepairConfig {
                calibration_marks: marks,
                ..RepairConfig::default()
            };
            let solved = repair::calibration_for(&stressed, &cfg)
                .and_then(|cal| repair::prepare(&stressed, &cal, &cfg))
                .and_then(|inp| lp::solve_p_prime(&inp.distance, &inp.nu, &inp.system, &LpOptions::default()));
            match (solved, calibrated) {
                (Ok(_), false) => ok_plain += 1,
                (Ok(_), true) => ok_cal += 1,
                (Err(e), _) => failures.push(format!("case {case} calibrated={calibrated}: {e}")),
            }
        }
    }
    let detail = format!(
        "feasible {ok_plain}/50 unconstrained, {ok_cal}/50 calibrated ({arbitrage} inputs had arbitrage){}",
        failures.first().map(|f| format!("; first failure {f}")).unwrap_or_default()
    );
    if ok_plain == 50 && ok_cal == 50 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn repair_contract() -> Outcome {
    let cases = [
        ("desk_m1.csv", "atm_up20.json"),
        ("desk_m1.csv", "atm_up20_marked.json"),
        ("desk_m1.csv", "steepen.json"),
        ("desk_m2.csv", "joint_atm_down20.json"),
        ("desk_m2.csv", "calendar_flatten.json"),
    ];
    let mut lines = Vec::new();
    let mut all_ok = true;
    for (surface_file, scenario_file) in cases {
        let stressed = apply_stress(&load(surface_file), &scenario(scenario_file)).map_err(|e| e.to_string())?;
        if constraints::detect_arbitrage(&stressed.surface).feasible {
            return Err(format!("{scenario_file}: stressed input has no arbitrage to remove"));
        }
        for (mode, eps, e_tol) in [(RepairMode::LpExact, 1.0, 1e-8), (RepairMode::Entropic, 0.01, 1e-7)] {
            let cfg = RepairConfig {
                mode,
                epsilon: eps,
                e_tol,
                calibration_marks: stressed.calibration_marks.clone(),
                ..RepairConfig::default()
            };
            let result = repair::repair(&stressed.surface, &cfg).map_err(|e| format!("{scenario_file}: {e}"))?;
            let check = constraints::detect_arbitrage_with(
                &result.repaired,
                &DetectOptions {
                    tol: 1e-8,
                    ..DetectOptions::default()
                },
            );
            let mark_err = cfg
                .calibration_marks
                .iter()
                .map(|m| {
                    (result.repaired.smiles()[m.maturity].prices[m.node] - stressed.surface.smiles()[m.maturity].prices[m.node])
                        .abs()
                })
                .fold(0.0, f64::max);
            let ok = check.feasible && mark_err <= e_tol.max(1e-8);
            all_ok &= ok;
            lines.push(format!("{scenario_file}/{mode:?}: clean={} marks={mark_err:.1e}", check.feasible));
        }
    }
    let detail = lines.join("; ");
    if all_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn entropy_constants() -> Outcome {
    // couplings with two and three equal atoms, and their first marginals
    let h1 = entropy(&[0.5, 0.5]);
    let h2 = entropy(&[1.0 / 3.0; 3]);
    let m1 = entropy(&[0.5, 0.5]);
    let m2 = entropy(&[1.0]);
    let err = (h1 - (1.0 + 2f64.ln())).abs().max((h2 - (1.0 + 3f64.ln())).abs()).max((m2 - 1.0).abs());
    let detail = format!("H(pi1)={h1:.15}, H(pi2)={h2:.15}, error {err:.1e}; marginal order reversed: {}", m1 > m2);
    if err <= 1e-12 && h1 < h2 && m1 > m2 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lp_vs_vertices() -> Outcome {
    let mut rng = rng(9);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 10 {
        let rows = rng.random_range(2..=4);
        let free = rng.random_range(5..=11 - rows);
        let x0: Vec<f64> = (0..free).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut dense = DMatrix::zeros(rows + 1, free + 1);
        let mut b = Vec::new();
        for r in 0..rows {
            let mut v = 0.0;
            for j in 0..free {
                let a = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-2.0..2.0) };
                dense[(r, j)] = a;
                v += a * x0[j];
            }
            b.push(v);
        }
        // bounded feasible region: sum x + slack = total
        for j in 0..=free {
            dense[(rows, j)] = 1.0;
        }
        b.push(x0.iter().sum::<f64>() + 1.0);
        let c: Vec<f64> = (0..=free).map(|j| if j < free { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
        let problem = LpProblem::nonnegative(
            c.clone(),
            (0..=rows)
                .map(|r| SparseRow::from_dense(&dense.row(r).iter().copied().collect::<Vec<_>>()))
                .collect(),
            b.clone(),
        );
        let sol = lp::solve_lp(&problem, &LpOptions::default()).map_err(|e| e.to_string())?;
        let reference = vertex_enumeration(&c, &dense, &b).ok_or("reference found no vertex")?;
        if sol.status != LpStatus::Optimal {
            return Err(format!("case {cases}: status {:?}", sol.status));
        }
        worst = worst.max((sol.objective_value - reference).abs());
        cases += 1;
    }
    let detail = format!("10 instances with <= 12 variables; max |simplex - vertices| = {worst:.2e}");
    if worst <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_mrepair");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path().join("run");
    let data = |f: &str| data_path(f).display().to_string();
    let out_s = out.display().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["repair".into(), data("desk_m1.csv"), "--scenario".into(), data("steepen.json"), "--out".into(), out_s.clone()],
        vec![
            "repair".into(),
            data("desk_m2.csv"),
            "--scenario".into(),
            data("joint_atm_down20.json"),
            "--mode".into(),
            "entropic".into(),
            "--epsilon".into(),
            "0.05".into(),
            "--e-tol".into(),
            "1e-6".into(),
            "--out".into(),
            out_s.clone(),
        ],
        vec!["sweep".into(), data("desk_m1.csv"), "--scenario".into(), data("atm_up20.json"), "--eps".into(), "1,0.5,0.1".into(), "--out".into(), out_s.clone()],
        vec!["check".into(), data("desk_m2.csv"), "--out".into(), out_s.clone()],
    ];
    let mut compared = 0;
    for args in &runs {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let _ = std::fs::remove_dir_all(&out);
            let status = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&status.stderr)));
            }
            outputs.push(read_dir(&out));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{} outputs differ between runs", args[0]));
        }
        compared += outputs[0].len();
    }
    Ok(format!("{compared} files byte-identical across repeated runs of check, repair (lp, entropic) and sweep"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("sinkhorn iterates equal dykstra iterates", sinkhorn_equals_dykstra),
        ("stopping criterion soundness", stopping_criterion_soundness),
        ("entropic cost tends to the exact value", epsilon_to_zero),
        ("strong duality at converged solves", strong_duality),
        ("call prices from signed marginals", lemma_identity),
        ("feasibility after k_max choice", kmax_feasibility),
        ("repair contract on stress scenarios", repair_contract),
        ("entropy constants", entropy_constants),
        ("simplex against vertex enumeration", lp_vs_vertices),
        ("byte-identical reruns", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
