//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`); exits nonzero if any check fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use routerlab::bifurcation::{
    cusp_asymptote, n_expert_contrast_eigenvalue, n_expert_uniform_score, n_expert_vector_field,
};
use routerlab::experiments::{
    balancing_feedback, critical_temperature_scan, hard_moe_bias_sweep, hard_moe_lambda_scan,
    mean_field_comparison, saturation_h, soft_moe_bias_sweep, width_vs_a, BalancingConfig,
    CriticalTempConfig, Direction, HardSweepConfig, LambdaScanConfig, MeanFieldCompareConfig,
    SoftSweepConfig, SoftSweepRow, WidthVsAConfig,
};
use routerlab::moe::{sample_batch, HardMoe, SoftMoe, HARD_PARAMS, SOFT_PARAMS};
use routerlab::{critical_feedback, find_equilibria, hysteresis_boundary, RouterParams, Stability};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

fn c1_pitchfork() -> Check {
    use Stability::*;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let factors = [0.5, 0.9, 0.99, 0.999, 1.0011, 1.01, 1.1, 2.0, 5.0];
    for _ in 0..100 {
        let gamma = log_uniform(&mut rng, 0.1, 10.0);
        let temp = log_uniform(&mut rng, 0.1, 10.0);
        let ac = critical_feedback(gamma, temp);
        for f in factors {
            let p = RouterParams::new(f * ac, gamma, temp, 0.0).map_err(|e| e.to_string())?;
            let set = find_equilibria(&p);
            let pattern: Vec<Stability> = set.equilibria.iter().map(|e| e.stability).collect();
            let ok = if f < 1.0 {
                pattern == [Stable] && set.equilibria[0].y == 0.0
            } else {
                pattern == [Stable, Unstable, Stable]
            };
            if !ok {
                return Err(format!("gamma={gamma} T={temp} a={}ac: {pattern:?}", f));
            }
        }
    }
    Ok("100 (gamma, T) pairs x 9 values of a".into())
}

fn naive_root_count(a: f64, h: f64) -> usize {
    let f = |y: f64| a * (y / 2.0).tanh() - y + h;
    let l = a + h.abs() + 2.0;
    let n = 200_000;
    let mut prev = f(-l);
    let mut count = 0;
    for k in 1..=n {
        let v = f(-l + 2.0 * l * k as f64 / n as f64);
        if (prev > 0.0) != (v > 0.0) {
            count += 1;
        }
        prev = v;
    }
    count
}

fn c2_fold_oracle() -> Check {
    let step = 1e-4;
    let mut worst: f64 = 0.0;
    for a in [2.2, 3.0, 4.0, 6.0] {
        let predicted = hysteresis_boundary(a, 1.0, 1.0).map_err(|e| e.to_string())?;
        let (mut lo, mut hi) = (0usize, ((a + 1.0) / step) as usize);
        if naive_root_count(a, 0.0) != 3 || naive_root_count(a, hi as f64 * step) != 1 {
            return Err(format!("a={a}: bracket failed"));
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if naive_root_count(a, mid as f64 * step) == 3 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let measured = (lo as f64 + 0.5) * step;
        worst = worst.max((measured - predicted).abs());
    }
    ensure(
        worst < 2e-4,
        format!("max |brute - H| = {worst:.2e} (tol 2e-4)"),
    )
}

fn c3_cusp_scaling() -> Check {
    let mut details = Vec::new();
    let mut ok = true;
    for (gamma, temp) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.3)] {
        let n = 21;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for k in 0..n {
            let mu = 10f64.powf(-4.0 + 2.0 * k as f64 / (n - 1) as f64);
            let h = hysteresis_boundary(2.0 * temp * (gamma + mu), gamma, temp)
                .map_err(|e| e.to_string())?;
            xs.push(mu.ln());
            ys.push(h.ln());
        }
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        let prefactor = (my - slope * mx).exp();
        let expected = cusp_asymptote(1.0, gamma, temp);
        let rel = (prefactor / expected - 1.0).abs();
        ok &= (slope - 1.5).abs() <= 0.02 && rel < 0.05;
        details.push(format!(
            "g={gamma} T={temp}: slope {slope:.4}, prefactor err {:.2}%",
            100.0 * rel
        ));
    }
    ensure(ok, details.join("; "))
}

fn c4_mean_field() -> Check {
    let r = mean_field_comparison(&MeanFieldCompareConfig::default()).map_err(|e| e.to_string())?;
    ensure(
        r.max_deviation < 0.03,
        format!("max deviation {:.4} (tol 0.03)", r.max_deviation),
    )
}

fn c5_width_vs_a() -> Check {
    let (rows, _) = width_vs_a(&WidthVsAConfig::default()).map_err(|e| e.to_string())?;
    let mut ok = rows.len() == 4;
    let mut parts = Vec::new();
    for r in &rows {
        match r.measured_width {
            Some(w) => {
                let rel = (w / r.predicted_width - 1.0).abs();
                ok &= rel <= 0.15;
                parts.push(format!(
                    "a={}: {w:.3} vs {:.3} ({:.1}%)",
                    r.key,
                    r.predicted_width,
                    100.0 * rel
                ));
            }
            None => {
                ok = false;
                parts.push(format!("a={}: no switch", r.key));
            }
        }
    }
    ensure(ok, parts.join("; "))
}

fn c6_critical_temperature() -> Check {
    let (rows, _) =
        critical_temperature_scan(&CriticalTempConfig::default()).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut prev = f64::INFINITY;
    for r in &rows {
        let Some(t) = r.t_onset else {
            return Err(format!("gamma={}: no onset found", r.gamma));
        };
        let ratio = t / r.t_c;
        ok &= (0.5..=1.0).contains(&ratio) && t < prev;
        prev = t;
        parts.push(format!(
            "gamma={}: T_onset {t:.3} = {ratio:.3} T_c",
            r.gamma
        ));
    }
    ensure(ok, parts.join("; "))
}

fn c7_balancing() -> Check {
    let (rows, _) = balancing_feedback(&BalancingConfig::default()).map_err(|e| e.to_string())?;
    let width = |rho: f64| {
        rows.iter()
            .find(|r| r.key == rho)
            .map(|r| r.measured_width.unwrap_or(0.0))
    };
    let (Some(w0), Some(w22)) = (width(0.0), width(2.2)) else {
        return Err("rho = 0 and rho = 2.2 must both be in the grid".into());
    };
    let spacing = rows[0].grid_spacing;
    let widths: Vec<f64> = rows
        .iter()
        .map(|r| r.measured_width.unwrap_or(0.0))
        .collect();
    let monotone = widths.windows(2).all(|w| w[1] <= w[0] + spacing);
    ensure(
        w0 - w22 > 0.9 * w0 && monotone,
        format!(
            "width {w0:.3} at rho=0, {w22:.3} at rho=2.2, monotone within {spacing:.3}: {monotone}"
        ),
    )
}

fn c8_jacobian() -> Check {
    let mut worst: f64 = 0.0;
    for (a, gamma, temp) in [(3.0, 1.0, 1.0), (1.0, 0.4, 0.5), (7.0, 2.0, 0.8)] {
        for n in [2usize, 3, 5] {
            let r0 = vec![n_expert_uniform_score(n, a, gamma).map_err(|e| e.to_string())?; n];
            let drifts = vec![0.0; n];
            let e = 1e-5;
            let mut jac = DMatrix::zeros(n, n);
            for j in 0..n {
                let (mut rp, mut rm) = (r0.clone(), r0.clone());
                rp[j] += e;
                rm[j] -= e;
                let fp = n_expert_vector_field(&rp, &drifts, a, gamma, temp);
                let fm = n_expert_vector_field(&rm, &drifts, a, gamma, temp);
                for i in 0..n {
                    jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * e);
                }
            }
            let mut eig: Vec<f64> = jac.complex_eigenvalues().iter().map(|z| z.re).collect();
            eig.sort_by(f64::total_cmp);
            let contrast =
                n_expert_contrast_eigenvalue(n, a, gamma, temp).map_err(|e| e.to_string())?;
            let mut expected = vec![contrast; n - 1];
            expected.push(-gamma);
            expected.sort_by(f64::total_cmp);
            for (g, w) in eig.iter().zip(&expected) {
                worst = worst.max((g - w).abs());
            }
        }
    }
    ensure(
        worst < 1e-6,
        format!("max eigenvalue error {worst:.2e} (tol 1e-6)"),
    )
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn c9_gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let e = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let h = rng.random_range(-1.0..1.0);
        let temp = rng.random_range(0.2..2.0);
        let reg = rng.random_range(0.0..0.05);
        let mut soft = SoftMoe::random(&mut rng, h, temp, 0.05, reg);
        soft.beta = rng.random_range(-0.5..0.5);
        let batch = sample_batch(&mut rng, 32);
        let (_, grad) = soft.loss_and_grad(&batch);
        for k in 0..SOFT_PARAMS {
            let (mut plus, mut minus) = (soft, soft);
            let (mut pp, mut pm) = (soft.params(), soft.params());
            pp[k] += e;
            pm[k] -= e;
            plus.set_params(pp);
            minus.set_params(pm);
            let fd = (plus.loss(&batch) - minus.loss(&batch)) / (2.0 * e);
            worst = worst.max(rel_err(grad[k], fd));
        }

        let lambda = rng.random_range(0.0..3.0);
        let hard = HardMoe::random(&mut rng, h, temp.max(0.3), 0.05, lambda).with_reg(reg);
        let batch = sample_batch(&mut rng, 32);
        let (_, grad) = hard.stats_and_grad(&batch);
        for k in 0..HARD_PARAMS {
            let (mut plus, mut minus) = (hard, hard);
            let (mut pp, mut pm) = (hard.params(), hard.params());
            pp[k] += e;
            pm[k] -= e;
            plus.set_params(pp);
            minus.set_params(pm);
            let fd = (plus.straight_through_objective(&hard, &batch)
                - minus.straight_through_objective(&hard, &batch))
                / (2.0 * e);
            worst = worst.max(rel_err(grad[k], fd));
        }
    }
    ensure(
        worst <= 1e-5,
        format!("max relative error {worst:.2e} over 20 soft + 20 hard configs"),
    )
}

/// Central region: the `h` closest to 0 in each sweep. Saturated region: the grid ends `|h| = h_max`.
fn c10_soft_moe() -> Check {
    let cfg = SoftSweepConfig::default();
    let (rows, _) = soft_moe_bias_sweep(&cfg).map_err(|e| e.to_string())?;
    let n = rows.len() / 2;
    let centre = |sweep: &[SoftSweepRow]| {
        sweep
            .iter()
            .min_by(|a, b| a.h.abs().total_cmp(&b.h.abs()))
            .cloned()
    };
    let central: Vec<SoftSweepRow> = [centre(&rows[..n]), centre(&rows[n..])]
        .into_iter()
        .flatten()
        .collect();
    let x_max = central
        .iter()
        .map(|r| r.x_star.map_or(f64::INFINITY, f64::abs))
        .fold(0.0, f64::max);
    let central_mse = central.iter().map(|r| r.mse).fold(0.0, f64::max);
    let saturated: Vec<_> = rows.iter().filter(|r| r.h.abs() == cfg.h_max).collect();
    let sat_u = saturated
        .iter()
        .map(|r| r.expected_u.abs())
        .fold(1.0, f64::min);
    let sat_mse = saturated
        .iter()
        .map(|r| r.mse)
        .fold(f64::INFINITY, f64::min);
    let (up_end, down_end) = (rows[n - 1].expected_u, rows[2 * n - 1].expected_u);
    ensure(
        central.len() == 2 && saturated.len() == 4 && x_max < 0.2 && sat_u > 0.9 && sat_mse > central_mse
            && up_end * down_end < 0.0,
        format!(
            "central |x*| <= {x_max:.3}, saturated |E u| >= {sat_u:.3}, MSE {sat_mse:.3} vs central {central_mse:.3}, ends {up_end:+.3}/{down_end:+.3}"
        ),
    )
}

fn c11_hard_moe() -> Check {
    let sweep = HardSweepConfig::default();
    let (rows, _) = hard_moe_bias_sweep(&sweep).map_err(|e| e.to_string())?;
    let level = 0.95;
    let mut delayed = true;
    let mut parts = Vec::new();
    for dir in [Direction::Up, Direction::Down] {
        let s0 = saturation_h(&rows, 0.0, dir, level);
        let s1 = saturation_h(&rows, 1.0, dir, level);
        delayed &= match (s0, s1) {
            (Some(a), Some(b)) => b > a,
            (Some(_), None) => true,
            _ => false,
        };
        parts.push(format!("{} saturation h {s0:?} -> {s1:?}", dir.as_str()));
    }
    let (scan, _) =
        hard_moe_lambda_scan(&LambdaScanConfig::default()).map_err(|e| e.to_string())?;
    let first = scan.first().ok_or("empty scan")?;
    let last = scan.last().ok_or("empty scan")?;
    let ok = delayed
        && first.lambda == 0.0
        && last.mean_abs_u < 0.5 * first.mean_abs_u
        && last.mean_mse <= first.mean_mse;
    parts.push(format!(
        "scan |u| {:.3} -> {:.3}, MSE {:.4} -> {:.4}",
        first.mean_abs_u, last.mean_abs_u, first.mean_mse, last.mean_mse
    ));
    ensure(ok, parts.join("; "))
}

fn routerlab(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_routerlab"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn sidecar(dir: &Path, name: &str) -> Result<serde_json::Value, String> {
    let text = fs::read_to_string(dir.join(name)).map_err(|e| e.to_string())?;
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    v.as_object_mut()
        .ok_or("sidecar is not an object")?
        .remove("wall_time_s");
    Ok(v)
}

fn same_outputs(a: &Path, b: &Path) -> Result<usize, String> {
    let read = |d: &Path, n: &str| fs::read_to_string(d.join(n)).map_err(|e| format!("{n}: {e}"));
    let manifest = read(a, "manifest.json")?;
    if manifest != read(b, "manifest.json")? {
        return Err("manifest.json differs".into());
    }
    let m: serde_json::Value = serde_json::from_str(&manifest).map_err(|e| e.to_string())?;
    let files = m["outputs"].as_array().ok_or("manifest has no outputs")?;
    for f in files {
        let name = f.as_str().ok_or("bad output name")?;
        let same = if name.ends_with(".csv") {
            read(a, name)? == read(b, name)?
        } else {
            sidecar(a, name)? == sidecar(b, name)?
        };
        if !same {
            return Err(format!("{name} differs"));
        }
    }
    Ok(files.len() + 1)
}

fn c12_determinism() -> Check {
    let runs: &[&[&str]] = &[
        &["equilibria", "--a", "3.5", "--h", "0.1"],
        &["fold-curve", "--n", "21"],
        &["hysteresis-boundary", "--a", "2,3,4"],
        &["simulate", "--steps", "300", "--h", "0.05"],
        &["simulate", "--steps", "300", "--runs", "6"],
        &["mean-field", "--t-end", "1"],
        &["exp", "mean-field-compare", "--runs", "6", "--t-end", "0.5"],
        &[
            "exp",
            "hysteresis",
            "--n-values",
            "9",
            "--steps-per-value",
            "100",
        ],
        &[
            "exp",
            "collapse-map",
            "--temp-n",
            "3",
            "--gamma-n",
            "3",
            "--replicates",
            "2",
            "--t-end",
            "0.5",
        ],
        &[
            "exp",
            "critical-temp",
            "--replicates",
            "2",
            "--t-end",
            "1",
            "--scan-points",
            "4",
            "--refine-iters",
            "2",
        ],
        &[
            "exp",
            "width-vs-a",
            "--a-values",
            "3,4",
            "--n-values",
            "9",
            "--steps-per-value",
            "100",
        ],
        &[
            "exp",
            "balancing",
            "--rho-values",
            "0,1",
            "--n-values",
            "9",
            "--steps-per-value",
            "100",
        ],
        &[
            "exp",
            "soft-moe",
            "--n-values",
            "5",
            "--steps-per-value",
            "50",
            "--eval-points",
            "21",
        ],
        &[
            "exp",
            "hard-moe",
            "--n-values",
            "5",
            "--steps-per-value",
            "40",
            "--replicates",
            "2",
            "--scan-steps",
            "60",
            "--scan-lambdas",
            "0,1",
            "--eval-points",
            "21",
        ],
    ];
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (i, args) in runs.iter().enumerate() {
        let first = tmp.path().join(format!("{i}-first"));
        let sub: Vec<&str> = args
            .iter()
            .copied()
            .take_while(|a| !a.starts_with("--"))
            .collect();
        let mut cmd = vec!["--threads", "4"];
        cmd.extend_from_slice(args);
        cmd.extend(["--seed", "3", "--out-dir", first.to_str().unwrap()]);
        routerlab(&cmd)?;
        let manifest = first.join("manifest.json");
        for threads in ["1", "3"] {
            let replay = tmp.path().join(format!("{i}-replay-{threads}"));
            let mut cmd = vec!["--threads", threads];
            cmd.extend_from_slice(&sub);
            cmd.extend([
                "--config",
                manifest.to_str().unwrap(),
                "--out-dir",
                replay.to_str().unwrap(),
            ]);
            routerlab(&cmd)?;
            files +=
                same_outputs(&first, &replay).map_err(|e| format!("{}: {e}", sub.join(" ")))?;
        }
    }
    Ok(format!(
        "{} subcommand runs replayed with --threads 1 and 3, {files} files compared",
        runs.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("pitchfork root count and stability", c1_pitchfork),
        (
            "fold bias against brute-force root counting",
            c2_fold_oracle,
        ),
        ("cusp scaling of H", c3_cusp_scaling),
        ("stochastic ensemble against mean field", c4_mean_field),
        ("hysteresis width against 2H(a)", c5_width_vs_a),
        ("collapse onset temperature", c6_critical_temperature),
        ("hysteresis suppression by load feedback", c7_balancing),
        ("N-expert Jacobian spectrum", c8_jacobian),
        ("MoE gradients against finite differences", c9_gradients),
        ("soft MoE bias sweep shape", c10_soft_moe),
        ("hard MoE saturation and penalty scan", c11_hard_moe),
        ("manifest replay determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!(
                "criterion {:>2} {name} ... PASS [{secs:.1}s] {detail}",
                i + 1
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "criterion {:>2} {name} ... FAIL [{secs:.1}s] {detail}",
                    i + 1
                );
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
