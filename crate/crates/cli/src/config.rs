//! Run configuration: a single JSON document, with command-line flags
//! overriding individual keys.

use serde::{Deserialize, Serialize};

use heavyball::certificates::{self, RateCertificate};
use heavyball::error::Error as CoreError;
use heavyball::geometry::{self, SampleBox};
use heavyball::objectives::{build_from_registry, ObjectiveFunction};

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration; maps to exit code 2.
    Config(String),
    /// Library failure bubbling out of a validated run.
    Core(CoreError),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionConfig {
    pub id: String,
    #[serde(flatten)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dynamics {
    #[serde(rename = "heavy-ball")]
    HeavyBall,
    #[serde(rename = "gradient-flow")]
    GradientFlow,
    #[serde(rename = "moreau-heavy-ball")]
    MoreauHeavyBall,
}

impl Dynamics {
    pub fn as_str(&self) -> &'static str {
        match self {
            Dynamics::HeavyBall => "heavy-ball",
            Dynamics::GradientFlow => "gradient-flow",
            Dynamics::MoreauHeavyBall => "moreau-heavy-ball",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    /// Extra CSV with the decay bounds (moreau dynamics only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds_csv: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub function: FunctionConfig,
    pub dynamics: Dynamics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_spec: Option<String>,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Verification toggles: "energy", "sublevel", "envelope", "lyapunov", "fit".
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub output: OutputPaths,
    /// Moreau dynamics parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_m: Option<f64>,
    /// Epsilon for the small-kappa / kappa = 1 damping formulas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

pub const KNOWN_CHECKS: [&str; 5] = ["energy", "sublevel", "envelope", "lyapunov", "fit"];

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.x0.is_empty() {
            return config_err("field `x0` must be a nonempty array");
        }
        for c in &self.checks {
            if !KNOWN_CHECKS.contains(&c.as_str()) {
                return config_err(format!("field `checks` contains unknown toggle `{c}`"));
            }
        }
        if self.dynamics == Dynamics::MoreauHeavyBall {
            if self.lambda.is_none() {
                return config_err("field `lambda` is required for moreau-heavy-ball dynamics");
            }
            if self.mu_ns.is_none() {
                return config_err("field `mu_ns` is required for moreau-heavy-ball dynamics");
            }
        }
        if self.dynamics == Dynamics::HeavyBall && self.alpha_spec.is_none() {
            return config_err("field `alpha_spec` is required for heavy-ball dynamics");
        }
        Ok(())
    }

    pub fn build_objective(&self) -> CliResult<ObjectiveFunction> {
        build_from_registry(&self.function.id, &self.function.params)
            .map_err(|e| CliError::Config(format!("field `function`: {e}")))
    }
}

/// Resolved problem constants for damping selection: the function's own
/// metadata when present, otherwise a sampled sublevel-set estimate with a
/// 1.05 safety factor on L.
pub struct ResolvedConstants {
    pub l: f64,
    pub mu: f64,
    pub l_estimated: bool,
}

pub fn resolve_constants(
    objective: &ObjectiveFunction,
    x0: &[f64],
    seed: u64,
) -> CliResult<ResolvedConstants> {
    let mu = match objective.pl_mu {
        Some(m) => m,
        None => return config_err(format!("function `{}` has no PL constant", objective.id)),
    };
    if let Some(l) = objective.lipschitz_l {
        return Ok(ResolvedConstants { l, mu, l_estimated: false });
    }
    let radius = x0.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(5.0) * 2.0;
    let sample_box = SampleBox::cube(objective.dim, radius);
    let cap = objective.eval(x0);
    let l_hat =
        geometry::estimate_lipschitz_grad_filtered(objective, &sample_box, 4000, seed, Some(cap))?;
    Ok(ResolvedConstants { l: 1.05 * l_hat, mu, l_estimated: true })
}

/// Damping specification grammar: an explicit number, "optimal-convex",
/// "optimal-nonconvex", "2*sqrt(mu)", or "optimal[+-]offset" (convex optimum
/// shifted by a literal offset, as in the alpha* +- eps sweeps).
pub fn resolve_alpha(spec: &str, l: f64, mu: f64, eps: Option<f64>) -> CliResult<f64> {
    let spec = spec.trim();
    if let Ok(v) = spec.parse::<f64>() {
        if !(v > 0.0) {
            return config_err(format!("alpha_spec `{spec}` must be positive"));
        }
        return Ok(v);
    }
    let eps_or = |d: f64| eps.unwrap_or(d);
    let optimal_convex = |eps: f64| -> CliResult<f64> {
        Ok(certificates::optimal_damping_convex(l, mu, eps)?.1.alpha)
    };
    match spec {
        "optimal-convex" => optimal_convex(eps_or(0.1)),
        "optimal-nonconvex" => {
            Ok(certificates::optimal_damping_nonconvex(l, mu, eps_or(0.1))?.alpha)
        }
        "2*sqrt(mu)" => Ok(2.0 * mu.sqrt()),
        _ => {
            for (base, rest) in [
                ("optimal-convex", spec.strip_prefix("optimal-convex")),
                ("optimal-nonconvex", spec.strip_prefix("optimal-nonconvex")),
                ("optimal", spec.strip_prefix("optimal")),
            ] {
                if let Some(tail) = rest {
                    if let Ok(offset) = tail.parse::<f64>() {
                        let alpha0 = if base == "optimal-nonconvex" {
                            certificates::optimal_damping_nonconvex(l, mu, eps_or(0.1))?.alpha
                        } else {
                            optimal_convex(eps_or(0.1))?
                        };
                        let alpha = alpha0 + offset;
                        if !(alpha > 0.0) {
                            return config_err(format!(
                                "alpha_spec `{spec}` resolves to nonpositive damping {alpha}"
                            ));
                        }
                        return Ok(alpha);
                    }
                }
            }
            config_err(format!(
                "alpha_spec `{spec}` not understood; use a number, optimal-convex, \
                 optimal-nonconvex, 2*sqrt(mu), or optimal+-offset"
            ))
        }
    }
}

/// Best available certificate for a resolved damping value: the optimal
/// tuning when alpha matches it, otherwise the Lyapunov-parameter inversion,
/// otherwise a feasibility scan over delta maximizing the exponent.
pub fn certificate_for_alpha(
    l: f64,
    mu: f64,
    convex: bool,
    alpha: f64,
    eps: Option<f64>,
) -> Option<RateCertificate> {
    let optimal: Option<RateCertificate> = if convex {
        certificates::optimal_damping_convex(l, mu, eps.unwrap_or(0.1)).ok().map(|p| p.1)
    } else {
        certificates::optimal_damping_nonconvex(l, mu, eps.unwrap_or(0.1)).ok()
    };
    if let Some(c) = &optimal {
        if (c.alpha - alpha).abs() <= 1e-12 * alpha.abs().max(1.0) {
            return optimal;
        }
    }
    if let Ok(delta) = certificates::delta_for_alpha(alpha, l, mu) {
        if convex {
            if let Ok((_, gap)) = certificates::rate_convex(l, mu, delta, alpha) {
                return Some(gap);
            }
        }
        if let Ok(cert) = certificates::rate_nonconvex(l, mu, delta, alpha) {
            return Some(cert);
        }
    }
    // Scan delta for any feasible nonconvex certificate, keeping the best exponent.
    let mut best: Option<RateCertificate> = None;
    for i in 1..=400 {
        let delta = l.sqrt() * (0.05 + 4.0 * i as f64 / 400.0);
        if let Ok(cert) = certificates::rate_nonconvex(l, mu, delta, alpha) {
            if best.as_ref().is_none_or(|b| cert.exponent_m > b.exponent_m) {
                best = Some(cert);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_spec_grammar() {
        let l = 1.0;
        let mu = 0.1;
        let kappa: f64 = 10.0;
        let star = (2.0 * kappa.sqrt() - (kappa - 1.0).sqrt()) * mu.sqrt();
        assert!((resolve_alpha("optimal-convex", l, mu, None).unwrap() - star).abs() < 1e-14);
        assert!(
            (resolve_alpha("2*sqrt(mu)", l, mu, None).unwrap() - 2.0 * mu.sqrt()).abs() < 1e-14
        );
        assert!(
            (resolve_alpha("optimal+0.1", l, mu, None).unwrap() - (star + 0.1)).abs() < 1e-12
        );
        assert!(
            (resolve_alpha("optimal-convex-0.1", l, mu, None).unwrap() - (star - 0.1)).abs()
                < 1e-12
        );
        assert!((resolve_alpha("1.25", l, mu, None).unwrap() - 1.25).abs() < 1e-15);
        assert!(resolve_alpha("bogus", l, mu, None).is_err());
        assert!(resolve_alpha("-2", l, mu, None).is_err());
    }

    #[test]
    fn certificate_fallback_covers_off_optimal_alpha() {
        // alpha* - 0.1 is not the optimum but still certifiable.
        let (l, mu) = (1.0, 0.1);
        let star = resolve_alpha("optimal-convex", l, mu, None).unwrap();
        let c = certificate_for_alpha(l, mu, true, star - 0.1, None).unwrap();
        assert!(c.exponent_m > 0.0);
        let c = certificate_for_alpha(l, mu, true, star + 0.1, None).unwrap();
        assert!(c.exponent_m > 0.0);
        // 2 sqrt(mu) on a kappa = 10 quadratic.
        let c = certificate_for_alpha(l, mu, true, 2.0 * mu.sqrt(), None);
        assert!(c.is_some());
    }

    #[test]
    fn run_config_round_trip_and_validation() {
        let json = serde_json::json!({
            "function": {"id": "quadratic", "dim": 100, "mu": 0.1, "l": 1.0, "seed": 7},
            "dynamics": "heavy-ball",
            "alpha_spec": "optimal-convex",
            "x0": [1.0, 2.0],
            "checks": ["envelope", "energy"],
            "seed": 3
        });
        let cfg: RunConfig = serde_json::from_value(json).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.function.params.get("dim").unwrap().as_f64(), Some(100.0));

        let bad: RunConfig = serde_json::from_value(serde_json::json!({
            "function": {"id": "quadratic"},
            "dynamics": "heavy-ball",
            "alpha_spec": "optimal-convex",
            "x0": [1.0],
            "checks": ["nope"]
        }))
        .unwrap();
        assert!(matches!(bad.validate(), Err(CliError::Config(_))));
    }
}
