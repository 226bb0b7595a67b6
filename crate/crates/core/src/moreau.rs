//! Moreau-envelope layer for convex, possibly nondifferentiable objectives:
//! proximal operator, envelope value/gradient, PL-constant transfer between
//! a function and its envelope, and the heavy-ball-on-envelope solver with
//! its decay bounds.

use crate::certificates::{Quantity, RateCertificate, Regime};
use crate::error::{Error, Result};
use crate::integrator::{self, Trajectory};
use crate::numerics;
use crate::objectives::ObjectiveFunction;

pub const DEFAULT_PROX_TOL: f64 = 1e-12;
const PROX_ITER_CAP: usize = 2_000_000;

/// A convex base objective paired with a smoothing parameter lambda. The
/// (ns-PL) constant `mu_ns` is user-asserted (subgradients are not exposed
/// by the oracle interface, so it cannot be estimated honestly); `lipschitz_m`
/// is the Lipschitz constant of the base itself, needed only for the
/// direct-gap bound.
#[derive(Debug, Clone)]
pub struct MoreauHandle {
    pub base: ObjectiveFunction,
    pub lambda: f64,
    pub mu_ns: Option<f64>,
    pub lipschitz_m: Option<f64>,
}

impl MoreauHandle {
    pub fn new(base: ObjectiveFunction, lambda: f64) -> Result<Self> {
        if !base.is_convex {
            return Err(Error::InvalidArgument(
                "Moreau layer requires a convex base objective".into(),
            ));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidConstants(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self { base, lambda, mu_ns: None, lipschitz_m: None })
    }

    pub fn with_mu_ns(mut self, mu: f64) -> Self {
        self.mu_ns = Some(mu);
        self
    }

    pub fn with_lipschitz_m(mut self, m: f64) -> Self {
        self.lipschitz_m = Some(m);
        self
    }
}

/// prox_{lambda F}(x): the registered exact prox when available, otherwise a
/// numerical minimization of the strongly convex subproblem
/// F(y) + ||y - x||^2 / (2 lambda) to gradient-norm tolerance `tol`
/// (differentiable base) or by bracketed golden-section (1-D nonsmooth base).
pub fn prox(handle: &MoreauHandle, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    if let Some(p) = handle.base.exact_prox(handle.lambda, x) {
        return Ok(p);
    }
    let lambda = handle.lambda;
    let base = &handle.base;
    if base.has_gradient() {
        // Fixed-step gradient descent on the subproblem; step 1/(L + 1/lambda).
        let l_sub = base.lipschitz_l.unwrap_or(0.0) + 1.0 / lambda;
        let step = 1.0 / l_sub;
        let mut y = x.to_vec();
        for _ in 0..PROX_ITER_CAP {
            let mut g = base.gradient(&y)?;
            for i in 0..g.len() {
                g[i] += (y[i] - x[i]) / lambda;
            }
            if numerics::norm(&g) <= tol {
                return Ok(y);
            }
            for i in 0..y.len() {
                y[i] -= step * g[i];
            }
        }
        Err(Error::ProxBudgetExceeded)
    } else if base.dim == 1 {
        // The subproblem is strictly convex, hence unimodal: golden section on
        // an expanding bracket around x.
        let obj = |y: f64| base.eval(&[y]) + (y - x[0]) * (y - x[0]) / (2.0 * lambda);
        let mut radius = handle
            .lipschitz_m
            .map(|m| lambda * m)
            .unwrap_or(1.0)
            .max(1e-6);
        let mut expansions = 0;
        loop {
            let (lo, hi) = (x[0] - radius, x[0] + radius);
            let interior = obj(0.5 * (lo + hi)).min(obj(x[0]));
            if obj(lo) >= interior && obj(hi) >= interior {
                break;
            }
            radius *= 2.0;
            expansions += 1;
            if expansions > 200 {
                return Err(Error::ProxBudgetExceeded);
            }
        }
        let y = numerics::golden_section(obj, x[0] - radius, x[0] + radius, tol.max(1e-14));
        Ok(vec![y])
    } else {
        Err(Error::MissingGradient)
    }
}

/// Envelope value F_lambda(x) = F(p) + ||x - p||^2/(2 lambda) and gradient
/// (x - p)/lambda, with p = prox_{lambda F}(x).
pub fn envelope_value_grad(handle: &MoreauHandle, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let p = prox(handle, x, DEFAULT_PROX_TOL)?;
    let d = numerics::sub(x, &p);
    let value = handle.base.eval(&p) + numerics::norm_sq(&d) / (2.0 * handle.lambda);
    let grad = d.iter().map(|v| v / handle.lambda).collect();
    Ok((value, grad))
}

/// The smooth envelope as a first-class objective: convex, 1/lambda-Lipschitz
/// gradient, same minimum value and minimizers as the base. Carries the
/// transferred PL constant when the handle asserts one.
pub fn envelope_objective(handle: &MoreauHandle) -> ObjectiveFunction {
    let h_eval = handle.clone();
    let h_grad = handle.clone();
    let mut f = ObjectiveFunction::new(
        &format!("moreau({}, lambda={})", handle.base.id, handle.lambda),
        handle.base.dim,
        move |x: &[f64]| envelope_value_grad(&h_eval, x).expect("prox failed in envelope eval").0,
        handle.base.f_star,
    )
    .with_gradient(move |x: &[f64]| {
        envelope_value_grad(&h_grad, x).expect("prox failed in envelope grad").1
    })
    .with_lipschitz(1.0 / handle.lambda)
    .with_convexity(true);
    if let Some(mu) = handle.mu_ns {
        f = f.with_pl_mu(pl_transfer(mu, handle.lambda, TransferDirection::BaseToEnvelope));
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferDirection {
    /// (ns-PL) mu on the base gives PL mu/(lambda mu + 1) on the envelope.
    BaseToEnvelope,
    /// PL mu on the envelope gives (ns-PL) mu/4 on the base.
    EnvelopeToBase,
}

pub fn pl_transfer(mu: f64, lambda: f64, direction: TransferDirection) -> f64 {
    assert!(mu > 0.0 && lambda > 0.0, "mu and lambda must be positive");
    match direction {
        TransferDirection::BaseToEnvelope => mu / (lambda * mu + 1.0),
        TransferDirection::EnvelopeToBase => mu / 4.0,
    }
}

/// Damping prescribed for the heavy-ball system on the envelope:
/// (2 lambda mu + 1 + sqrt(lambda mu + 1)) / (sqrt(lambda) (lambda mu + 1 + sqrt(lambda mu + 1))),
/// which simplifies to (2s - 1)/(sqrt(lambda) s) with s = sqrt(lambda mu + 1).
pub fn envelope_alpha(lambda: f64, mu: f64) -> f64 {
    let s = (lambda * mu + 1.0).sqrt();
    (2.0 * lambda * mu + 1.0 + s) / (lambda.sqrt() * (lambda * mu + 1.0 + s))
}

/// Decay exponent of the prox-gap bound: 2 mu sqrt(lambda) / (mu lambda + 1 + sqrt(mu lambda + 1)).
pub fn envelope_exponent(lambda: f64, mu: f64) -> f64 {
    2.0 * mu * lambda.sqrt() / (mu * lambda + 1.0 + (mu * lambda + 1.0).sqrt())
}

/// Output of the heavy-ball-on-envelope solver: the trajectory of the smooth
/// surrogate, the base gap at the prox points, the base gap at the iterates,
/// and the certified envelope curves.
#[derive(Debug)]
pub struct NonsmoothRun {
    pub trajectory: Trajectory,
    /// F(prox(x(t))) - F* per sample.
    pub prox_gap: Vec<f64>,
    /// F(x(t)) - F* per sample (base evaluated at the iterate itself).
    pub base_gap: Vec<f64>,
    /// Bound on `prox_gap`.
    pub bound_prox: Vec<f64>,
    /// Bound on `base_gap`, present when the base Lipschitz constant is known.
    pub bound_base: Option<Vec<f64>>,
    pub certificate: RateCertificate,
    pub alpha: f64,
}

/// Runs the heavy-ball system on the Moreau envelope with the prescribed
/// damping and emits the two certified decay bounds: the prox-gap bound
///   (F_lambda(x0) - F*) (lambda + 1/mu)(1 + sqrt(lambda mu + 1)) e^{-m t},
/// and, when the base is M-Lipschitz, the direct-gap bound
///   2 max(sqrt(2) M lambda, (C/mu) e^{-m t / 2}) C e^{-m t / 2}
/// with C = sqrt((F_lambda(x0) - F*)(1 + sqrt(lambda mu + 1))).
pub fn nonsmooth_heavy_ball(
    handle: &MoreauHandle,
    x0: &[f64],
    t_end: f64,
    abs_tol: f64,
    rel_tol: f64,
    n_samples: usize,
) -> Result<NonsmoothRun> {
    let mu = handle.mu_ns.ok_or(Error::MissingConstant)?;
    let lambda = handle.lambda;
    let envelope = envelope_objective(handle);
    let alpha = envelope_alpha(lambda, mu);
    let v0 = vec![0.0; envelope.dim];
    let trajectory =
        integrator::integrate_heavy_ball(&envelope, alpha, x0, &v0, t_end, abs_tol, rel_tol, n_samples)?;

    let f_star = handle.base.f_star;
    let env_gap0 = trajectory.values[0];
    let s = (lambda * mu + 1.0).sqrt();
    let m = envelope_exponent(lambda, mu);
    let constant = (lambda + 1.0 / mu) * (1.0 + s);

    let mut prox_gap = Vec::with_capacity(trajectory.times.len());
    let mut base_gap = Vec::with_capacity(trajectory.times.len());
    for x in &trajectory.positions {
        let p = prox(handle, x, DEFAULT_PROX_TOL)?;
        prox_gap.push(handle.base.eval(&p) - f_star);
        base_gap.push(handle.base.eval(x) - f_star);
    }
    let bound_prox: Vec<f64> =
        trajectory.times.iter().map(|&t| env_gap0 * constant * (-m * t).exp()).collect();
    let bound_base = handle.lipschitz_m.map(|big_m| {
        let c = (env_gap0 * (1.0 + s)).sqrt();
        trajectory
            .times
            .iter()
            .map(|&t| {
                let half = (-0.5 * m * t).exp();
                2.0 * (std::f64::consts::SQRT_2 * big_m * lambda).max(c / mu * half) * c * half
            })
            .collect()
    });

    let certificate = RateCertificate {
        exponent_m: m,
        constant_c: constant,
        alpha,
        delta: Some((1.0 / lambda).sqrt()),
        regime: Regime::Moreau41,
        quantity: Quantity::ObjectiveGap,
        epsilon: 0.0,
        polynomial_factor: None,
        alt_constant: None,
    };
    Ok(NonsmoothRun { trajectory, prox_gap, base_gap, bound_prox, bound_base, certificate, alpha })
}
