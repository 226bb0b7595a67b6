//! Sampled verification of the geometric conditions (PL, quadratic growth,
//! error bound, quasi-strong convexity) and the constant conversions between
//! them. Distance-based checks rely on exact per-function projection oracles;
//! estimates are grid-based in dimension <= 2 and seeded Monte Carlo above.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;
use crate::objectives::ObjectiveFunction;

/// Axis-aligned sampling region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SampleBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidDimension("box bounds must have equal nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::InvalidArgument("box must satisfy lo < hi per axis".into()));
        }
        Ok(Self { lo, hi })
    }

    /// Symmetric cube [-r, r]^dim.
    pub fn cube(dim: usize, r: f64) -> Self {
        Self { lo: vec![-r; dim], hi: vec![r; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn clamp_point(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    /// Uniform grid for dim <= 2 (n points in 1-D, ~sqrt(n) per axis in 2-D),
    /// seeded Monte Carlo otherwise.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        match self.dim() {
            1 => {
                let span = self.hi[0] - self.lo[0];
                (0..n)
                    .map(|i| vec![self.lo[0] + span * i as f64 / (n.max(2) - 1) as f64])
                    .collect()
            }
            2 => {
                let side = (n as f64).sqrt().round().max(2.0) as usize;
                let mut pts = Vec::with_capacity(side * side);
                for i in 0..side {
                    let x = self.lo[0] + (self.hi[0] - self.lo[0]) * i as f64 / (side - 1) as f64;
                    for j in 0..side {
                        let y =
                            self.lo[1] + (self.hi[1] - self.lo[1]) * j as f64 / (side - 1) as f64;
                        pts.push(vec![x, y]);
                    }
                }
                pts
            }
            dim => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n)
                    .map(|_| {
                        (0..dim).map(|i| rng.gen_range(self.lo[i]..self.hi[i])).collect()
                    })
                    .collect()
            }
        }
    }
}

/// Geometric condition kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionKind {
    #[serde(rename = "PL")]
    Pl,
    #[serde(rename = "QG")]
    Qg,
    #[serde(rename = "EB")]
    Eb,
    #[serde(rename = "qSC")]
    Qsc,
    #[serde(rename = "ns-PL")]
    NsPl,
}

/// Result of checking one condition over a sample set. `worst_margin` is the
/// minimum over samples of RHS - LHS of the defining inequality; `holds`
/// tolerates -1e-10 relative to the objective scale at the witness.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub kind: ConditionKind,
    pub parameter: f64,
    pub sample_count: usize,
    pub worst_margin: f64,
    pub witness: Vec<f64>,
    pub holds: bool,
    /// Quasi-strong convexity quantifies over every projection of the sample;
    /// the sampled check covers only the one the oracle returns.
    pub single_projection_caveat: bool,
}

/// Sampled PL-constant estimate: the minimum over samples (excluding
/// near-minimum points) of ||grad F||^2 / (2 (F - F*)), with the attaining
/// sample as witness.
pub fn estimate_pl(
    objective: &ObjectiveFunction,
    sample_box: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    if !objective.has_gradient() {
        return Err(Error::MissingGradient);
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for x in sample_box.sample(n, seed) {
        let gap = objective.gap(&x);
        if gap <= 1e-12 {
            continue;
        }
        let ratio = objective.grad_norm_sq(&x)? / (2.0 * gap);
        if best.as_ref().is_none_or(|(r, _)| ratio < *r) {
            best = Some((ratio, x));
        }
    }
    best.ok_or(Error::EmptyEstimate)
}

/// Checks the defining inequality of `kind` with the given parameter at each
/// sample. QG/EB/qSC need a projection oracle; built-ins ship exact ones,
/// and an explicit oracle overrides the built-in.
pub fn check_condition(
    objective: &ObjectiveFunction,
    kind: ConditionKind,
    parameter: f64,
    projection_oracle: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
    sample_box: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if !(parameter > 0.0) {
        return Err(Error::InvalidConstants(format!(
            "condition parameter must be positive, got {parameter}"
        )));
    }
    let needs_projection = matches!(kind, ConditionKind::Qg | ConditionKind::Eb | ConditionKind::Qsc);
    let project = |x: &[f64]| -> Result<Vec<f64>> {
        if let Some(p) = projection_oracle {
            Ok(p(x))
        } else {
            objective
                .project_to_minimizers(x)
                .ok_or_else(|| Error::MissingOracle(format!("{kind:?}")))
        }
    };
    if needs_projection {
        // Fail fast when no oracle exists at all.
        if projection_oracle.is_none() && objective.project_to_minimizers(&sample_box.lo).is_none()
        {
            return Err(Error::MissingOracle(format!("{kind:?}")));
        }
    }

    let mut worst = f64::INFINITY;
    let mut witness = sample_box.lo.clone();
    let mut count = 0usize;
    for x in sample_box.sample(n, seed) {
        let margin = match kind {
            // F - F* <= ||grad||^2 / (2 mu), as  ||grad||^2 - 2 mu (F - F*).
            ConditionKind::Pl | ConditionKind::NsPl => {
                objective.grad_norm_sq(&x)? - 2.0 * parameter * objective.gap(&x)
            }
            // (theta/2) dist^2 <= F - F*.
            ConditionKind::Qg => {
                let p = project(&x)?;
                objective.gap(&x) - 0.5 * parameter * numerics::norm_sq(&numerics::sub(&x, &p))
            }
            // eta dist <= ||grad||.
            ConditionKind::Eb => {
                let p = project(&x)?;
                objective.grad_norm_sq(&x)?.sqrt() - parameter * numerics::dist(&x, &p)
            }
            // F(xbar) >= F(x) + <grad F(x), xbar - x> + (beta/2) ||x - xbar||^2.
            ConditionKind::Qsc => {
                let p = project(&x)?;
                let d = numerics::sub(&p, &x);
                objective.eval(&p)
                    - objective.eval(&x)
                    - numerics::dot(&objective.gradient(&x)?, &d)
                    - 0.5 * parameter * numerics::norm_sq(&d)
            }
        };
        count += 1;
        if margin < worst {
            worst = margin;
            witness = x;
        }
    }
    if count == 0 {
        return Err(Error::EmptyEstimate);
    }
    let scale = 1.0 + objective.eval(&witness).abs();
    Ok(ConditionReport {
        kind,
        parameter,
        sample_count: count,
        worst_margin: worst,
        witness,
        holds: worst >= -1e-10 * scale,
        single_projection_caveat: kind == ConditionKind::Qsc,
    })
}

/// Constant conversions between conditions:
/// qSC beta -> PL mu = beta;          PL mu -> QG theta = mu;
/// EB eta -> PL mu = eta^2/L (needs L);
/// QG theta -> EB eta = theta/2 and QG theta -> PL mu = theta/4 (convex);
/// PL mu -> qSC beta = mu^2/L (convex with L).
pub fn convert_constants(
    from: ConditionKind,
    to: ConditionKind,
    value: f64,
    is_convex: bool,
    l: Option<f64>,
) -> Result<f64> {
    use ConditionKind::*;
    if !(value > 0.0) {
        return Err(Error::InvalidConstants(format!("constant must be positive, got {value}")));
    }
    let need_l = || {
        l.filter(|v| *v > 0.0)
            .ok_or_else(|| Error::NoImplication(format!("{from:?} -> {to:?} needs L")))
    };
    let need_convex = |label: &str| {
        if is_convex {
            Ok(())
        } else {
            Err(Error::NoImplication(format!("{label} needs convexity")))
        }
    };
    match (from, to) {
        (Qsc, Pl) => Ok(value),
        (Pl, Qg) => Ok(value),
        (Eb, Pl) => Ok(value * value / need_l()?),
        (Qg, Eb) => {
            need_convex("QG -> EB")?;
            Ok(value / 2.0)
        }
        (Qg, Pl) => {
            need_convex("QG -> PL")?;
            Ok(value / 4.0)
        }
        (Pl, Qsc) => {
            need_convex("PL -> qSC")?;
            Ok(value * value / need_l()?)
        }
        _ => Err(Error::NoImplication(format!("{from:?} -> {to:?}"))),
    }
}

/// Sampled lower bound on the gradient Lipschitz constant: the maximum
/// difference quotient ||grad F(x) - grad F(y)|| / ||x - y|| over seeded
/// pairs (global and short-range), sharpened by a few gradient-difference
/// power iterations from the best direction found.
pub fn estimate_lipschitz_grad(
    objective: &ObjectiveFunction,
    sample_box: &SampleBox,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    estimate_lipschitz_grad_filtered(objective, sample_box, n_pairs, seed, None)
}

/// Same estimator restricted to the sublevel set {F <= cap} when `cap` is set.
pub fn estimate_lipschitz_grad_filtered(
    objective: &ObjectiveFunction,
    sample_box: &SampleBox,
    n_pairs: usize,
    seed: u64,
    sublevel_cap: Option<f64>,
) -> Result<f64> {
    if !objective.has_gradient() {
        return Err(Error::MissingGradient);
    }
    let dim = sample_box.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diag = numerics::dist(&sample_box.lo, &sample_box.hi);
    let inside = |x: &[f64]| sublevel_cap.is_none_or(|cap| objective.eval(x) <= cap);

    let mut l_hat: f64 = 0.0;
    let mut best_pair: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut drawn = 0usize;
    let mut attempts = 0usize;
    while drawn < n_pairs && attempts < 50 * n_pairs.max(1) {
        attempts += 1;
        let x: Vec<f64> =
            (0..dim).map(|i| rng.gen_range(sample_box.lo[i]..sample_box.hi[i])).collect();
        if !inside(&x) {
            continue;
        }
        // Alternate independent pairs with short-range pairs around x.
        let y: Vec<f64> = if drawn % 2 == 0 {
            (0..dim).map(|i| rng.gen_range(sample_box.lo[i]..sample_box.hi[i])).collect()
        } else {
            let scale = diag * 10f64.powf(rng.gen_range(-6.0..-1.0));
            let mut y: Vec<f64> = x
                .iter()
                .map(|&v| v + scale * rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            sample_box.clamp_point(&mut y);
            y
        };
        if !inside(&y) {
            continue;
        }
        drawn += 1;
        let d = numerics::dist(&x, &y);
        if d < 1e-14 * (1.0 + diag) {
            continue;
        }
        let q = numerics::dist(&objective.gradient(&x)?, &objective.gradient(&y)?) / d;
        if q > l_hat {
            l_hat = q;
            best_pair = Some((x, y));
        }
    }
    if best_pair.is_none() {
        return Err(Error::EmptyEstimate);
    }

    // Power refinement: iterate d <- grad F(c + h d) - grad F(c - h d), each
    // iterate being a genuine difference quotient (still a lower bound).
    let (bx, by) = best_pair.unwrap();
    let mut center: Vec<f64> = bx.iter().zip(&by).map(|(a, b)| 0.5 * (a + b)).collect();
    sample_box.clamp_point(&mut center);
    let mut dir = numerics::sub(&bx, &by);
    let nrm = numerics::norm(&dir);
    if nrm > 0.0 {
        for v in &mut dir {
            *v /= nrm;
        }
    }
    let h = 1e-5 * (1.0 + diag);
    for _ in 0..30 {
        let xp: Vec<f64> = center.iter().zip(&dir).map(|(c, d)| c + h * d).collect();
        let xm: Vec<f64> = center.iter().zip(&dir).map(|(c, d)| c - h * d).collect();
        if !(inside(&xp) && inside(&xm)) {
            break;
        }
        let gd = numerics::sub(&objective.gradient(&xp)?, &objective.gradient(&xm)?);
        let q = numerics::norm(&gd) / (2.0 * h);
        if q > l_hat {
            l_hat = q;
        }
        let n = numerics::norm(&gd);
        if n < 1e-300 {
            break;
        }
        dir = gd.iter().map(|v| v / n).collect();
    }
    Ok(l_hat)
}
