//! Configuration-driven single-run executor: resolves the damping, integrates,
//! runs the enabled verification checks, and writes plot-ready CSV plus a
//! JSON summary with a fixed field list.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use heavyball::certificates::RateCertificate;
use heavyball::integrator::{self, Trajectory, DEFAULT_ABS_TOL, DEFAULT_REL_TOL};
use heavyball::moreau::{self, MoreauHandle};
use heavyball::verify;

use crate::config::{
    certificate_for_alpha, config_err, resolve_alpha, resolve_constants, CliError, CliResult,
    Dynamics, OutputPaths, RunConfig,
};

pub const DEFAULT_N_SAMPLES: usize = 2001;
pub const HORIZON_CAP: f64 = 1e4;
/// Default horizon covers ~40/m, i.e. about seventeen decades of predicted decay.
pub const HORIZON_DECADES: f64 = 40.0;

#[derive(Debug, Clone, Serialize)]
pub struct CheckVerdict {
    pub name: String,
    /// None when the check could not run (missing certificate, no velocities).
    pub passed: Option<bool>,
    pub marginal: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub exponent: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub function: serde_json::Value,
    pub dynamics: String,
    pub alpha_spec: Option<String>,
    pub alpha: Option<f64>,
    pub seed: u64,
    pub t_end: f64,
    pub n_samples: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub certificate: Option<RateCertificate>,
    pub fitted_rate: Option<FitResult>,
    pub checks: Vec<CheckVerdict>,
    pub final_value: f64,
    pub final_grad_sq: f64,
    pub steps: usize,
    pub wall_time_ms: u64,
    pub outputs: OutputPaths,
}

pub struct RunOutcome {
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    /// True when any enabled check failed beyond the marginal slack.
    pub failed: bool,
}

fn horizon_from(cert: &Option<RateCertificate>, mu: Option<f64>) -> Option<f64> {
    let m = cert.as_ref().map(|c| c.exponent_m).or(mu.map(|m| 2.0 * m))?;
    if m <= 0.0 {
        return None;
    }
    Some((HORIZON_DECADES / m).min(HORIZON_CAP))
}

fn write_file(path: &str, contents: &[u8]) -> CliResult<()> {
    if let Some(parent) = std::path::Path::new(path).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Config(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(contents))
        .map_err(|e| CliError::Config(format!("cannot write {path}: {e}")))
}

pub fn run(config: &RunConfig) -> CliResult<RunOutcome> {
    config.validate()?;
    let started = Instant::now();
    let objective = config.build_objective()?;
    if config.dynamics != Dynamics::MoreauHeavyBall && config.x0.len() != objective.dim {
        return config_err(format!(
            "field `x0` has length {} but function `{}` has dimension {}",
            config.x0.len(),
            config.function.id,
            objective.dim
        ));
    }

    let abs_tol = config.abs_tol.unwrap_or(DEFAULT_ABS_TOL);
    let rel_tol = config.rel_tol.unwrap_or(DEFAULT_REL_TOL);
    let n_samples = config.n_samples.unwrap_or(DEFAULT_N_SAMPLES);

    match config.dynamics {
        Dynamics::MoreauHeavyBall => run_moreau(config, abs_tol, rel_tol, n_samples, started),
        dynamics => {
            let (alpha, certificate) = match dynamics {
                Dynamics::HeavyBall => {
                    let spec = config.alpha_spec.as_deref().expect("validated");
                    let consts = resolve_constants(&objective, &config.x0, config.seed)?;
                    let alpha = resolve_alpha(spec, consts.l, consts.mu, config.eps)?;
                    let cert = certificate_for_alpha(
                        consts.l,
                        consts.mu,
                        objective.is_convex,
                        alpha,
                        config.eps,
                    );
                    (Some(alpha), cert)
                }
                _ => (None, None),
            };
            let t_end = match config.t_end {
                Some(t) if t > 0.0 => t,
                Some(t) => return config_err(format!("field `t_end` must be positive, got {t}")),
                None => horizon_from(&certificate, objective.pl_mu).ok_or_else(|| {
                    CliError::Config(
                        "field `t_end` required: no certificate or PL constant to derive it".into(),
                    )
                })?,
            };

            let trajectory = match dynamics {
                Dynamics::HeavyBall => {
                    let v0 = config.v0.clone().unwrap_or_else(|| vec![0.0; objective.dim]);
                    if v0.len() != objective.dim {
                        return config_err("field `v0` has the wrong dimension");
                    }
                    integrator::integrate_heavy_ball(
                        &objective,
                        alpha.expect("heavy-ball"),
                        &config.x0,
                        &v0,
                        t_end,
                        abs_tol,
                        rel_tol,
                        n_samples,
                    )?
                }
                _ => integrator::integrate_gradient_flow(
                    &objective, &config.x0, t_end, abs_tol, rel_tol, n_samples,
                )?,
            };

            let mut checks = Vec::new();
            let mut envelope_column: Option<Vec<f64>> = None;
            let mut lyapunov_column: Option<Vec<f64>> = None;
            for name in &config.checks {
                checks.push(run_check(
                    name,
                    &trajectory,
                    &objective,
                    &certificate,
                    &mut envelope_column,
                    &mut lyapunov_column,
                ));
            }
            let fitted_rate = fit(&trajectory);

            let mut extras: Vec<(&str, &[f64])> = Vec::new();
            let energy = trajectory
                .velocities
                .as_ref()
                .map(|_| verify::total_energy(&trajectory).expect("velocities present"));
            if let Some(e) = &energy {
                extras.push(("U", &e.total));
            }
            if let Some(v) = &lyapunov_column {
                extras.push(("V", v));
            }
            if let Some(env) = &envelope_column {
                extras.push(("envelope", env));
            }
            if let Some(path) = &config.output.csv {
                let mut buf = Vec::new();
                trajectory.write_csv(&mut buf, &extras).expect("in-memory write");
                write_file(path, &buf)?;
            }

            let failed = checks.iter().any(|c| c.passed == Some(false) && !c.marginal);
            let summary = RunSummary {
                function: serde_json::to_value(&config.function).expect("serializable"),
                dynamics: dynamics.as_str().into(),
                alpha_spec: config.alpha_spec.clone(),
                alpha,
                seed: config.seed,
                t_end,
                n_samples,
                abs_tol,
                rel_tol,
                certificate,
                fitted_rate,
                checks,
                final_value: *trajectory.values.last().unwrap(),
                final_grad_sq: *trajectory.grad_sq.last().unwrap(),
                steps: trajectory.meta.steps,
                wall_time_ms: started.elapsed().as_millis() as u64,
                outputs: config.output.clone(),
            };
            if let Some(path) = &config.output.summary {
                let text = serde_json::to_string_pretty(&summary).expect("serializable");
                write_file(path, text.as_bytes())?;
            }
            Ok(RunOutcome { summary, trajectory, failed })
        }
    }
}

fn fit(trajectory: &Trajectory) -> Option<FitResult> {
    verify::fit_decay_rate(&trajectory.times, &trajectory.values, 0.5)
        .ok()
        .map(|(exponent, r_squared)| FitResult { exponent, r_squared })
}

fn run_check(
    name: &str,
    trajectory: &Trajectory,
    objective: &heavyball::objectives::ObjectiveFunction,
    certificate: &Option<RateCertificate>,
    envelope_column: &mut Option<Vec<f64>>,
    lyapunov_column: &mut Option<Vec<f64>>,
) -> CheckVerdict {
    match name {
        "energy" => match verify::total_energy(trajectory) {
            Ok(e) => {
                let inc = e.max_forward_increase();
                let tol = 1e-9 * (1.0 + e.total[0]);
                CheckVerdict {
                    name: name.into(),
                    passed: Some(inc <= tol),
                    marginal: false,
                    detail: format!("max forward increase {inc:.3e} (tolerance {tol:.3e})"),
                }
            }
            Err(e) => CheckVerdict {
                name: name.into(),
                passed: None,
                marginal: false,
                detail: e.to_string(),
            },
        },
        "sublevel" => {
            let f0 = trajectory.values[0];
            let worst = trajectory.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ok = worst <= f0 + 1e-9 * (1.0 + f0);
            CheckVerdict {
                name: name.into(),
                passed: Some(ok),
                marginal: false,
                detail: format!("max value {worst:.6e} vs initial {f0:.6e}"),
            }
        }
        "envelope" => match certificate {
            Some(cert) => {
                let check = verify::check_envelope(trajectory, cert);
                *envelope_column = Some(
                    trajectory
                        .times
                        .iter()
                        .map(|&t| cert.envelope_factor(t) * trajectory.initial_gap())
                        .collect(),
                );
                CheckVerdict {
                    name: name.into(),
                    passed: Some(check.passed),
                    marginal: check.tolerance_marginal,
                    detail: format!(
                        "max observed/bound {:.6e}{}",
                        check.max_ratio,
                        check
                            .first_violation_time
                            .map(|t| format!(", first violation at t = {t:.3}"))
                            .unwrap_or_default()
                    ),
                }
            }
            None => CheckVerdict {
                name: name.into(),
                passed: None,
                marginal: false,
                detail: "no certificate available for the resolved damping".into(),
            },
        },
        "lyapunov" => match certificate.as_ref().and_then(|c| c.delta.map(|d| (c, d))) {
            Some((cert, delta)) => {
                match run_lyapunov(trajectory, objective, cert, delta) {
                    Ok((ok, detail, series)) => {
                        *lyapunov_column = Some(series);
                        CheckVerdict { name: name.into(), passed: Some(ok), marginal: false, detail }
                    }
                    Err(e) => CheckVerdict {
                        name: name.into(),
                        passed: None,
                        marginal: false,
                        detail: e.to_string(),
                    },
                }
            }
            None => CheckVerdict {
                name: name.into(),
                passed: None,
                marginal: false,
                detail: "lyapunov check needs a certificate carrying delta".into(),
            },
        },
        "fit" => match verify::fit_decay_rate(&trajectory.times, &trajectory.values, 0.5) {
            Ok((slope, r2)) => CheckVerdict {
                name: name.into(),
                passed: Some(slope > 0.0),
                marginal: false,
                detail: format!("fitted exponent {slope:.6} (r^2 = {r2:.4})"),
            },
            Err(e) => CheckVerdict {
                name: name.into(),
                passed: None,
                marginal: false,
                detail: e.to_string(),
            },
        },
        other => CheckVerdict {
            name: other.into(),
            passed: None,
            marginal: false,
            detail: "unknown check".into(),
        },
    }
}

fn run_lyapunov(
    trajectory: &Trajectory,
    objective: &heavyball::objectives::ObjectiveFunction,
    cert: &RateCertificate,
    delta: f64,
) -> heavyball::Result<(bool, String, Vec<f64>)> {
    let l = objective.lipschitz_l.unwrap_or(1.0 / delta.max(1e-300));
    let a = delta + 2.0 * l / delta - cert.alpha;
    let r = 2.0 * (cert.alpha - l / delta);
    let series = verify::lyapunov_series(trajectory, objective, a, delta)?;
    let v = series.lyapunov.clone().expect("lyapunov parameters supplied");
    let mut ok = r > 0.0;
    let mut worst_ratio: f64 = 0.0;
    for (i, &t) in trajectory.times.iter().enumerate() {
        let bound = v[0] * (-r * t).exp() + verify::ENVELOPE_FLOOR;
        if bound > 0.0 {
            let ratio = v[i] / bound;
            worst_ratio = worst_ratio.max(ratio);
            if ratio > 1.0 + verify::ENVELOPE_SLACK {
                ok = false;
            }
        }
    }
    Ok((ok, format!("max V/bound {worst_ratio:.6e} with a = {a:.6}, R = {r:.6}"), v))
}

fn run_moreau(
    config: &RunConfig,
    abs_tol: f64,
    rel_tol: f64,
    n_samples: usize,
    started: Instant,
) -> CliResult<RunOutcome> {
    let base = config.build_objective()?;
    if config.x0.len() != base.dim {
        return config_err(format!(
            "field `x0` has length {} but function `{}` has dimension {}",
            config.x0.len(),
            config.function.id,
            base.dim
        ));
    }
    let mut handle = MoreauHandle::new(base, config.lambda.expect("validated"))
        .map_err(|e| CliError::Config(format!("moreau handle: {e}")))?
        .with_mu_ns(config.mu_ns.expect("validated"));
    if let Some(m) = config.lipschitz_m {
        handle = handle.with_lipschitz_m(m);
    }
    let mu = config.mu_ns.expect("validated");
    let m = moreau::envelope_exponent(handle.lambda, mu);
    let t_end = match config.t_end {
        Some(t) if t > 0.0 => t,
        Some(t) => return config_err(format!("field `t_end` must be positive, got {t}")),
        None => (HORIZON_DECADES / m).min(HORIZON_CAP),
    };
    let run = moreau::nonsmooth_heavy_ball(&handle, &config.x0, t_end, abs_tol, rel_tol, n_samples)?;

    let mut checks = Vec::new();
    for name in &config.checks {
        let verdict = match name.as_str() {
            "envelope" => {
                let check = verify::check_envelope_series(
                    &run.trajectory.times,
                    &run.prox_gap,
                    &run.certificate,
                    run.trajectory.initial_gap(),
                );
                CheckVerdict {
                    name: name.clone(),
                    passed: Some(check.passed),
                    marginal: check.tolerance_marginal,
                    detail: format!("prox-gap max observed/bound {:.6e}", check.max_ratio),
                }
            }
            "energy" => {
                let e = verify::total_energy(&run.trajectory).expect("heavy-ball run");
                let inc = e.max_forward_increase();
                let tol = 1e-9 * (1.0 + e.total[0]);
                CheckVerdict {
                    name: name.clone(),
                    passed: Some(inc <= tol),
                    marginal: false,
                    detail: format!("max forward increase {inc:.3e} (tolerance {tol:.3e})"),
                }
            }
            "sublevel" => {
                let f0 = run.trajectory.values[0];
                let worst =
                    run.trajectory.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                CheckVerdict {
                    name: name.clone(),
                    passed: Some(worst <= f0 + 1e-9 * (1.0 + f0)),
                    marginal: false,
                    detail: format!("max envelope value {worst:.6e} vs initial {f0:.6e}"),
                }
            }
            "fit" => match verify::fit_decay_rate(&run.trajectory.times, &run.trajectory.values, 0.5)
            {
                Ok((slope, r2)) => CheckVerdict {
                    name: name.clone(),
                    passed: Some(slope > 0.0),
                    marginal: false,
                    detail: format!("fitted exponent {slope:.6} (r^2 = {r2:.4})"),
                },
                Err(e) => CheckVerdict {
                    name: name.clone(),
                    passed: None,
                    marginal: false,
                    detail: e.to_string(),
                },
            },
            other => CheckVerdict {
                name: other.into(),
                passed: None,
                marginal: false,
                detail: "check not applicable to moreau dynamics".into(),
            },
        };
        checks.push(verdict);
    }

    if let Some(path) = &config.output.csv {
        let mut buf = Vec::new();
        run.trajectory.write_csv(&mut buf, &[]).expect("in-memory write");
        write_file(path, &buf)?;
    }
    if let Some(path) = &config.output.bounds_csv {
        let mut buf = String::from("t,prox_gap,prox_gap_bound,base_gap,base_gap_bound\n");
        for i in 0..run.trajectory.times.len() {
            let base_bound = run
                .bound_base
                .as_ref()
                .map(|b| format!("{:e}", b[i]))
                .unwrap_or_default();
            buf.push_str(&format!(
                "{:e},{:e},{:e},{:e},{base_bound}\n",
                run.trajectory.times[i], run.prox_gap[i], run.bound_prox[i], run.base_gap[i]
            ));
        }
        write_file(path, buf.as_bytes())?;
    }

    let fitted_rate = fit(&run.trajectory);
    let failed = checks.iter().any(|c| c.passed == Some(false) && !c.marginal);
    let summary = RunSummary {
        function: serde_json::to_value(&config.function).expect("serializable"),
        dynamics: Dynamics::MoreauHeavyBall.as_str().into(),
        alpha_spec: config.alpha_spec.clone(),
        alpha: Some(run.alpha),
        seed: config.seed,
        t_end,
        n_samples,
        abs_tol,
        rel_tol,
        certificate: Some(run.certificate.clone()),
        fitted_rate,
        checks,
        final_value: *run.trajectory.values.last().unwrap(),
        final_grad_sq: *run.trajectory.grad_sq.last().unwrap(),
        steps: run.trajectory.meta.steps,
        wall_time_ms: started.elapsed().as_millis() as u64,
        outputs: config.output.clone(),
    };
    if let Some(path) = &config.output.summary {
        let text = serde_json::to_string_pretty(&summary).expect("serializable");
        write_file(path, text.as_bytes())?;
    }
    Ok(RunOutcome { summary, trajectory: run.trajectory, failed })
}
