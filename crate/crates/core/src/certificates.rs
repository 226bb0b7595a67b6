//! Rate-certificate algebra: feasible damping regions, decay exponents and
//! multiplicative constants of the linear-rate theorems, optimal damping
//! selection, the inverse delta-from-alpha cubic, and cross-method
//! worst-case factor comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;

/// Which theorem produced a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "nonconvex-small-kappa")]
    NonconvexSmallKappa,
    #[serde(rename = "nonconvex-large-kappa")]
    NonconvexLargeKappa,
    #[serde(rename = "convex-kappa-one")]
    ConvexKappaOne,
    #[serde(rename = "convex-kappa-gt-one")]
    ConvexKappaGtOne,
    #[serde(rename = "theorem-6.1")]
    Theorem61,
    #[serde(rename = "theorem-6.2")]
    Theorem62,
    #[serde(rename = "moreau-4.1")]
    Moreau41,
}

/// Which trajectory series the certificate bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    #[serde(rename = "objective-gap")]
    ObjectiveGap,
    #[serde(rename = "grad-norm-sq")]
    GradNormSq,
}

/// A linear-rate certificate: series(t) <= constant_C * (F(x0) - F*) *
/// (1 + polynomial_factor * t) * exp(-exponent_m * t).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateCertificate {
    pub exponent_m: f64,
    pub constant_c: f64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub regime: Regime,
    pub quantity: Quantity,
    pub epsilon: f64,
    /// Linear-in-t envelope factor for the degenerate a = R tie; absent for
    /// the plain exponential envelope.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polynomial_factor: Option<f64>,
    /// Alternative constant printed elsewhere in the source derivations, kept
    /// for reference when it disagrees with `constant_c`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alt_constant: Option<f64>,
}

impl RateCertificate {
    /// Envelope value multiplying the initial objective gap at time t.
    pub fn envelope_factor(&self, t: f64) -> f64 {
        let poly = self.polynomial_factor.map_or(1.0, |a| 1.0 + a * t);
        self.constant_c * poly * (-self.exponent_m * t).exp()
    }

    /// Same certificate with the decay exponent scaled by `factor`
    /// (falsification controls inflate it above the certified value).
    pub fn with_exponent_scaled(&self, factor: f64) -> Self {
        let mut c = self.clone();
        c.exponent_m *= factor;
        c
    }
}

/// Feasible damping values (L/delta, alpha_-] U [alpha_+, delta + 2L/delta).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlphaRegion {
    pub lower_open: f64,
    pub left_closed_end: f64,
    pub right_closed_start: f64,
    pub upper_open: f64,
}

impl AlphaRegion {
    /// Interval semantics: alpha_- and alpha_+ attained, outer endpoints
    /// excluded. Closed endpoints carry a 1e-12 relative slack so values
    /// recomputed through algebraically equal expressions still land inside.
    pub fn contains(&self, alpha: f64) -> bool {
        let tol = 1e-12 * self.upper_open.abs().max(1.0);
        (alpha > self.lower_open && alpha <= self.left_closed_end + tol)
            || (alpha >= self.right_closed_start - tol && alpha < self.upper_open)
    }
}

fn validate_l_mu(l: f64, mu: f64) -> Result<()> {
    if !(mu > 0.0) {
        return Err(Error::InvalidConstants(format!("mu must be positive, got {mu}")));
    }
    if mu > l {
        return Err(Error::InvalidConstants(format!(
            "mu = {mu} exceeds L = {l}: kappa < 1 contradicts L-smoothness plus PL"
        )));
    }
    Ok(())
}

/// alpha_{+-}(delta) = (delta + 3L/delta +- sqrt((delta + L/delta)^2 - 4mu)) / 2.
/// The discriminant is nonnegative because delta + L/delta >= 2 sqrt(L) >= 2 sqrt(mu).
pub fn alpha_pm(l: f64, mu: f64, delta: f64) -> (f64, f64) {
    let s = delta + l / delta;
    let disc = (s * s - 4.0 * mu).max(0.0);
    let root = disc.sqrt();
    let base = delta + 3.0 * l / delta;
    (0.5 * (base - root), 0.5 * (base + root))
}

/// Damping values for which the Lyapunov conditions hold at Lyapunov
/// parameter `delta`.
pub fn feasible_alpha_region(l: f64, mu: f64, delta: f64) -> Result<AlphaRegion> {
    validate_l_mu(l, mu)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidConstants(format!("delta must be positive, got {delta}")));
    }
    let (am, ap) = alpha_pm(l, mu, delta);
    Ok(AlphaRegion {
        lower_open: l / delta,
        left_closed_end: am,
        right_closed_start: ap,
        upper_open: delta + 2.0 * l / delta,
    })
}

/// Objective-gap certificate for a PL function without convexity:
/// exponent m = min(delta + 2L/delta - alpha, 2(alpha - L/delta)) and
/// constant 1 + (delta + 2L/delta - alpha)/|delta + 4L/delta - 3 alpha|.
/// At the degenerate tie alpha = (delta + 4L/delta)/3 the envelope carries a
/// (1 + a t) factor instead of a constant.
pub fn rate_nonconvex(l: f64, mu: f64, delta: f64, alpha: f64) -> Result<RateCertificate> {
    let region = feasible_alpha_region(l, mu, delta)?;
    if !region.contains(alpha) {
        return Err(Error::InfeasibleDamping {
            alpha,
            detail: format!(
                "feasible region at delta = {delta} is ({:.6}, {:.6}] U [{:.6}, {:.6})",
                region.lower_open, region.left_closed_end, region.right_closed_start,
                region.upper_open
            ),
        });
    }
    let a = delta + 2.0 * l / delta - alpha;
    let r = 2.0 * (alpha - l / delta);
    let m = a.min(r);
    let tie = delta + 4.0 * l / delta - 3.0 * alpha;
    let tie_scale = delta + 4.0 * l / delta + 3.0 * alpha;
    let (constant_c, polynomial_factor) = if tie.abs() <= 1e-12 * tie_scale {
        // a = R: envelope (1 + a t) e^{-m t}.
        (1.0, Some(a))
    } else {
        (1.0 + a / tie.abs(), None)
    };
    Ok(RateCertificate {
        exponent_m: m,
        constant_c,
        alpha,
        delta: Some(delta),
        regime: Regime::Theorem61,
        quantity: Quantity::ObjectiveGap,
        epsilon: 0.0,
        polynomial_factor,
        alt_constant: None,
    })
}

/// Gradient-norm and objective-gap certificates for convex PL functions at
/// Lyapunov parameter `delta`. The gap constant is the one the derivation
/// actually establishes, (delta + 2L/delta - alpha)/(mu (delta + L/delta - alpha));
/// the looser headline value 2 C_{delta,alpha}/mu is kept in `alt_constant`.
pub fn rate_convex(
    l: f64,
    mu: f64,
    delta: f64,
    alpha: f64,
) -> Result<(RateCertificate, RateCertificate)> {
    validate_l_mu(l, mu)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidConstants(format!("delta must be positive, got {delta}")));
    }
    let (am, _) = alpha_pm(l, mu, delta);
    let tol = 1e-12 * am.abs().max(1.0);
    let strict_case = mu == l && delta <= l.sqrt();
    let in_window = if strict_case {
        alpha > l / delta && alpha < am
    } else {
        alpha > l / delta && alpha <= am + tol
    };
    if !in_window {
        let bracket = if strict_case {
            format!("({:.6}, {:.6}) (open: mu = L and delta <= sqrt(L))", l / delta, am)
        } else {
            format!("({:.6}, {:.6}]", l / delta, am)
        };
        return Err(Error::InfeasibleDamping {
            alpha,
            detail: format!("window at delta = {delta} is {bracket}"),
        });
    }

    let exponent = 2.0 * (alpha - l / delta);
    let c_grad = 2.0 * (1.0 + l / (delta * (delta + l / delta - alpha)));
    let grad_cert = RateCertificate {
        exponent_m: exponent,
        constant_c: c_grad,
        alpha,
        delta: Some(delta),
        regime: Regime::Theorem62,
        quantity: Quantity::GradNormSq,
        epsilon: 0.0,
        polynomial_factor: None,
        alt_constant: None,
    };
    let c_gap = (delta + 2.0 * l / delta - alpha) / (mu * (delta + l / delta - alpha));
    let gap_cert = RateCertificate {
        exponent_m: exponent,
        constant_c: c_gap,
        alpha,
        delta: Some(delta),
        regime: Regime::Theorem62,
        quantity: Quantity::ObjectiveGap,
        epsilon: 0.0,
        polynomial_factor: None,
        alt_constant: Some(2.0 * c_grad / mu),
    };
    Ok((grad_cert, gap_cert))
}

/// Sign choice for the small-kappa damping formula. The theorem statement
/// prints "+"; the underlying optimization permits either sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmallKappaSign {
    #[default]
    Plus,
    Minus,
}

/// Rate-optimal damping for PL functions without convexity.
/// kappa <= 9/8:  alpha = (sqrt(mu)/(2 sqrt 2))(5 + sqrt(9 - 8 kappa)) - eps/2,
///                m = sqrt(2 mu) - eps;
/// kappa >  9/8:  alpha = (2 sqrt(kappa) - sqrt(kappa - 1)) sqrt(mu),
///                m = 2 (sqrt(kappa) - sqrt(kappa - 1)) sqrt(mu), eps unused.
/// At kappa = 9/8 exactly the second branch applies (both exponents coincide).
pub fn optimal_damping_nonconvex(l: f64, mu: f64, eps: f64) -> Result<RateCertificate> {
    optimal_damping_nonconvex_with_sign(l, mu, eps, SmallKappaSign::Plus)
}

pub fn optimal_damping_nonconvex_with_sign(
    l: f64,
    mu: f64,
    eps: f64,
    sign: SmallKappaSign,
) -> Result<RateCertificate> {
    validate_l_mu(l, mu)?;
    let kappa = l / mu;
    if kappa < 9.0 / 8.0 {
        if !(eps > 0.0) {
            return Err(Error::InvalidConstants(format!(
                "eps must be positive when kappa <= 9/8, got {eps}"
            )));
        }
        if eps >= (2.0 * mu).sqrt() {
            return Err(Error::VacuousEpsilon { eps });
        }
        let root = (9.0 - 8.0 * kappa).sqrt();
        let signed = match sign {
            SmallKappaSign::Plus => 5.0 + root,
            SmallKappaSign::Minus => 5.0 - root,
        };
        let alpha = mu.sqrt() / (2.0 * std::f64::consts::SQRT_2) * signed - 0.5 * eps;
        let m = (2.0 * mu).sqrt() - eps;
        let c = (4.0 * eps + 2.0 * (2.0 * mu).sqrt()) / eps;
        // The derivation's own constant is a factor 3 smaller; both recorded.
        let c_alt = 2.0 * (2.0 * eps + (2.0 * mu).sqrt()) / (3.0 * eps);
        Ok(RateCertificate {
            exponent_m: m,
            constant_c: c,
            alpha,
            delta: None,
            regime: Regime::NonconvexSmallKappa,
            quantity: Quantity::ObjectiveGap,
            epsilon: eps,
            polynomial_factor: None,
            alt_constant: Some(c_alt),
        })
    } else {
        let sk = kappa.sqrt();
        let sk1 = (kappa - 1.0).sqrt();
        let alpha = (2.0 * sk - sk1) * mu.sqrt();
        let m = 2.0 * (sk - sk1) * mu.sqrt();
        let c = 4.0 * sk1 * (3.0 * sk1 + sk) / (8.0 * kappa - 9.0);
        Ok(RateCertificate {
            exponent_m: m,
            constant_c: c,
            alpha,
            delta: Some(l.sqrt()),
            regime: Regime::NonconvexLargeKappa,
            quantity: Quantity::ObjectiveGap,
            epsilon: 0.0,
            polynomial_factor: None,
            alt_constant: None,
        })
    }
}

/// Rate-optimal damping for convex PL functions: gradient-norm and
/// objective-gap certificates.
/// kappa = 1:  alpha = 2 sqrt(mu) - eps, constants 2(1 + sqrt(mu)/eps) and
///             (1/mu)(1 + sqrt(mu)/eps), exponent 2(sqrt(mu) - eps);
/// kappa > 1:  alpha = (2 sqrt(kappa) - sqrt(kappa-1)) sqrt(mu), constants
///             2(1 + sqrt(kappa/(kappa-1))) and (1/mu)(1 + sqrt(kappa/(kappa-1))),
///             exponent 2(sqrt(kappa) - sqrt(kappa-1)) sqrt(mu).
pub fn optimal_damping_convex(
    l: f64,
    mu: f64,
    eps: f64,
) -> Result<(RateCertificate, RateCertificate)> {
    validate_l_mu(l, mu)?;
    let kappa = l / mu;
    if kappa == 1.0 {
        if !(eps > 0.0) {
            return Err(Error::InvalidConstants(format!(
                "eps must be positive when kappa = 1, got {eps}"
            )));
        }
        if eps >= mu.sqrt() {
            return Err(Error::VacuousEpsilon { eps });
        }
        let alpha = 2.0 * mu.sqrt() - eps;
        let m = 2.0 * (mu.sqrt() - eps);
        let ratio = 1.0 + mu.sqrt() / eps;
        let grad = RateCertificate {
            exponent_m: m,
            constant_c: 2.0 * ratio,
            alpha,
            delta: Some(l.sqrt()),
            regime: Regime::ConvexKappaOne,
            quantity: Quantity::GradNormSq,
            epsilon: eps,
            polynomial_factor: None,
            alt_constant: None,
        };
        let gap = RateCertificate {
            exponent_m: m,
            constant_c: ratio / mu,
            alpha,
            delta: Some(l.sqrt()),
            regime: Regime::ConvexKappaOne,
            quantity: Quantity::ObjectiveGap,
            epsilon: eps,
            polynomial_factor: None,
            alt_constant: None,
        };
        Ok((grad, gap))
    } else {
        let sk = kappa.sqrt();
        let sk1 = (kappa - 1.0).sqrt();
        let alpha = (2.0 * sk - sk1) * mu.sqrt();
        let m = 2.0 * (sk - sk1) * mu.sqrt();
        let ratio = 1.0 + (kappa / (kappa - 1.0)).sqrt();
        let grad = RateCertificate {
            exponent_m: m,
            constant_c: 2.0 * ratio,
            alpha,
            delta: Some(l.sqrt()),
            regime: Regime::ConvexKappaGtOne,
            quantity: Quantity::GradNormSq,
            epsilon: 0.0,
            polynomial_factor: None,
            alt_constant: None,
        };
        let gap = RateCertificate {
            exponent_m: m,
            constant_c: ratio / mu,
            alpha,
            delta: Some(l.sqrt()),
            regime: Regime::ConvexKappaGtOne,
            quantity: Quantity::ObjectiveGap,
            epsilon: 0.0,
            polynomial_factor: None,
            alt_constant: None,
        };
        Ok((grad, gap))
    }
}

/// Inverts alpha_-(delta) = alpha by solving the cubic
/// alpha delta^3 - (alpha^2 + L + mu) delta^2 + 3 L alpha delta - 2 L^2 = 0
/// over bracketing intervals, keeping roots that back-substitute to alpha
/// within 1e-10 relative error and lie in the certifiable window (for mu = L
/// that excludes delta < sqrt(L), where the window is open at alpha_-).
/// Among valid roots, returns the one maximizing the exponent 2(alpha - L/delta).
pub fn delta_for_alpha(alpha: f64, l: f64, mu: f64) -> Result<f64> {
    validate_l_mu(l, mu)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidConstants(format!("alpha must be positive, got {alpha}")));
    }
    let cubic = |d: f64| {
        alpha * d.powi(3) - (alpha * alpha + l + mu) * d * d + 3.0 * l * alpha * d - 2.0 * l * l
    };
    let dcubic =
        |d: f64| 3.0 * alpha * d * d - 2.0 * (alpha * alpha + l + mu) * d + 3.0 * l * alpha;

    let hi = 10.0 * alpha.max(l.sqrt());
    let n_scan = 4000;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_d = hi * 1e-9;
    let mut prev_v = cubic(prev_d);
    for i in 1..=n_scan {
        let d = hi * i as f64 / n_scan as f64;
        let v = cubic(d);
        if v == 0.0 {
            roots.push(d);
        } else if prev_v * v < 0.0 {
            roots.push(numerics::newton_bisect(cubic, dcubic, prev_d, d, 1e-14 * hi, 200));
        }
        prev_d = d;
        prev_v = v;
    }
    // A multiple root touches zero without a sign change; probe the
    // stationary points of the cubic as candidates too.
    let disc = (alpha * alpha + l + mu).powi(2) - 3.0 * alpha * (3.0 * l * alpha);
    if disc >= 0.0 {
        for s in [-1.0, 1.0] {
            let d = ((alpha * alpha + l + mu) + s * disc.sqrt()) / (3.0 * alpha);
            if d > 0.0 && cubic(d).abs() <= 1e-9 * (1.0 + l * l) {
                roots.push(d);
            }
        }
    }

    let mut best: Option<(f64, f64)> = None; // (exponent, delta)
    for d in roots {
        if !(d > 0.0) {
            continue;
        }
        let (am, _) = alpha_pm(l, mu, d);
        let scale = alpha.abs().max(1.0);
        if (am - alpha).abs() > 1e-10 * scale {
            continue; // root of the squared system belonging to the other branch
        }
        if alpha <= l / d {
            continue; // nonpositive exponent
        }
        if mu == l && d < l.sqrt() * (1.0 - 1e-12) {
            continue; // open window: alpha_- itself is not certifiable here
        }
        let exponent = 2.0 * (alpha - l / d);
        if best.is_none_or(|(e, _)| exponent > e) {
            best = Some((exponent, d));
        }
    }
    best.map(|(_, d)| d).ok_or(Error::NoFeasibleDelta { alpha })
}

/// Worst-case convergence factors of the four methods compared in the
/// source analysis, the per-pair winners, and the crossing condition
/// numbers (closed form plus an independent bisection recomputation).
#[derive(Debug, Clone, Serialize)]
pub struct FactorComparison {
    pub kappa: f64,
    /// 2 (sqrt(kappa) - sqrt(kappa - 1)) sqrt(mu).
    pub heavy_ball_factor: f64,
    /// 2 mu.
    pub gradient_flow_factor: f64,
    /// (2 - sqrt 2) sqrt(mu): quadratic-growth analysis with unique minimizer.
    pub qg_unique_min_factor: f64,
    /// sqrt(2 mu / kappa): quasi-strong-convexity analysis.
    pub quasi_strong_factor: f64,
    pub heavy_ball_beats_gradient_flow: bool,
    pub heavy_ball_beats_qg: bool,
    pub heavy_ball_beats_quasi_strong: bool,
    /// kappa* = (19 + 6 sqrt 2)/8 where the heavy-ball and QG factors cross.
    pub kappa_star_qg: f64,
    pub kappa_star_qg_bisection: f64,
    /// kappa* = (1 + sqrt 2)/2 where the heavy-ball and qSC factors cross.
    pub kappa_star_quasi_strong: f64,
    pub kappa_star_quasi_strong_bisection: f64,
    /// Whether (mu, L) fall in the printed window 2 sqrt(L) - 1 <= mu <= 1
    /// (not scale-invariant; reported verbatim alongside the raw comparison).
    pub gf_window_3_9: bool,
}

fn hb_factor_unit_mu(kappa: f64) -> f64 {
    2.0 * (kappa.sqrt() - (kappa - 1.0).sqrt())
}

/// Crossing of the heavy-ball factor with `other` (both divided by sqrt(mu)),
/// found by bisection on kappa.
pub fn crossing_kappa<F: Fn(f64) -> f64>(other: F, lo: f64, hi: f64) -> f64 {
    numerics::bisect(|k| hb_factor_unit_mu(k) - other(k), lo, hi, 1e-12)
}

pub fn compare_factors(l: f64, mu: f64) -> Result<FactorComparison> {
    validate_l_mu(l, mu)?;
    let kappa = l / mu;
    let sqrt_mu = mu.sqrt();
    let hb = hb_factor_unit_mu(kappa) * sqrt_mu;
    let gf = 2.0 * mu;
    let qg = (2.0 - std::f64::consts::SQRT_2) * sqrt_mu;
    let qsc = (2.0 * mu / kappa).sqrt();
    Ok(FactorComparison {
        kappa,
        heavy_ball_factor: hb,
        gradient_flow_factor: gf,
        qg_unique_min_factor: qg,
        quasi_strong_factor: qsc,
        heavy_ball_beats_gradient_flow: hb >= gf,
        heavy_ball_beats_qg: hb >= qg,
        heavy_ball_beats_quasi_strong: hb >= qsc,
        kappa_star_qg: (19.0 + 6.0 * std::f64::consts::SQRT_2) / 8.0,
        kappa_star_qg_bisection: crossing_kappa(|_| 2.0 - std::f64::consts::SQRT_2, 1.0, 16.0),
        kappa_star_quasi_strong: (1.0 + std::f64::consts::SQRT_2) / 2.0,
        kappa_star_quasi_strong_bisection: crossing_kappa(|k| (2.0 / k).sqrt(), 1.0 + 1e-12, 16.0),
        gf_window_3_9: 2.0 * l.sqrt() - 1.0 <= mu && mu <= 1.0,
    })
}
