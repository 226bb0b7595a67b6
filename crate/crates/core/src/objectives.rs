//! Objective-function oracles: the built-in test functions with their known
//! constants (minimum value, gradient Lipschitz constant, PL constant), plus
//! a string-id registry used by config files.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics;

pub type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
pub type ProxFn = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;
pub type ProjFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Evaluation/gradient oracle plus metadata. Immutable after construction;
/// evaluation is reentrant and safe to share across threads.
#[derive(Clone)]
pub struct ObjectiveFunction {
    pub id: String,
    pub dim: usize,
    eval: Arc<EvalFn>,
    grad: Option<Arc<GradFn>>,
    pub f_star: f64,
    pub lipschitz_l: Option<f64>,
    pub pl_mu: Option<f64>,
    pub is_convex: bool,
    exact_prox: Option<Arc<ProxFn>>,
    /// Projection onto the minimizer set, when known exactly.
    projection: Option<Arc<ProjFn>>,
}

impl std::fmt::Debug for ObjectiveFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObjectiveFunction")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("f_star", &self.f_star)
            .field("lipschitz_l", &self.lipschitz_l)
            .field("pl_mu", &self.pl_mu)
            .field("is_convex", &self.is_convex)
            .finish()
    }
}

impl ObjectiveFunction {
    /// Programmatic registration of a custom function: id, dimension,
    /// evaluation closure and known minimum value. Optional pieces are
    /// attached with the `with_*` methods.
    pub fn new<F>(id: &str, dim: usize, eval: F, f_star: f64) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            dim,
            eval: Arc::new(eval),
            grad: None,
            f_star,
            lipschitz_l: None,
            pl_mu: None,
            is_convex: false,
            exact_prox: None,
            projection: None,
        }
    }

    pub fn with_gradient<G>(mut self, grad: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz_l = Some(l);
        self
    }

    pub fn with_pl_mu(mut self, mu: f64) -> Self {
        self.pl_mu = Some(mu);
        self
    }

    pub fn with_convexity(mut self, convex: bool) -> Self {
        self.is_convex = convex;
        self
    }

    pub fn with_exact_prox<P>(mut self, prox: P) -> Self
    where
        P: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.exact_prox = Some(Arc::new(prox));
        self
    }

    pub fn with_projection<P>(mut self, projection: P) -> Self
    where
        P: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.projection = Some(Arc::new(projection));
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        (self.eval)(x)
    }

    /// F(x) - F*.
    pub fn gap(&self, x: &[f64]) -> f64 {
        self.eval(x) - self.f_star
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(x.len(), self.dim);
        match &self.grad {
            Some(g) => Ok(g(x)),
            None => Err(Error::MissingGradient),
        }
    }

    pub fn grad_norm_sq(&self, x: &[f64]) -> Result<f64> {
        Ok(numerics::norm_sq(&self.gradient(x)?))
    }

    pub fn exact_prox(&self, lambda: f64, x: &[f64]) -> Option<Vec<f64>> {
        self.exact_prox.as_ref().map(|p| p(lambda, x))
    }

    pub fn has_exact_prox(&self) -> bool {
        self.exact_prox.is_some()
    }

    /// Projection of `x` onto the minimizer set, if the built-in ships one.
    pub fn project_to_minimizers(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.projection.as_ref().map(|p| p(x))
    }

    pub fn distance_to_minimizers(&self, x: &[f64]) -> Option<f64> {
        self.project_to_minimizers(x)
            .map(|p| numerics::dist(x, &p))
    }
}

/// Random quadratic F(x) = (1/2) <Ax, x> with prescribed extreme spectrum:
/// the Hessian A has eigenvalues {0, mu, L} plus dim-3 uniform draws from
/// [mu, L], conjugated by the Q factor of a seeded Gaussian matrix.
/// Deterministic for a fixed seed.
pub fn make_quadratic(dim: usize, mu: f64, l: f64, seed: u64) -> Result<ObjectiveFunction> {
    Ok(make_quadratic_with_hessian(dim, mu, l, seed)?.0)
}

/// Same as [`make_quadratic`] but also returns the Hessian matrix, for
/// callers that need the spectrum (tests, exact oracles).
pub fn make_quadratic_with_hessian(
    dim: usize,
    mu: f64,
    l: f64,
    seed: u64,
) -> Result<(ObjectiveFunction, DMatrix<f64>)> {
    if dim < 3 {
        return Err(Error::InvalidDimension(format!(
            "quadratic needs dim >= 3 to host the spectrum {{0, mu, L}}, got {dim}"
        )));
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidConstants(format!("mu must be positive, got {mu}")));
    }
    if mu > l {
        return Err(Error::InvalidConstants(format!("mu = {mu} exceeds L = {l}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = gaussian.qr().q();

    let mut eigs = Vec::with_capacity(dim);
    eigs.push(0.0);
    eigs.push(mu);
    eigs.push(l);
    for _ in 3..dim {
        eigs.push(rng.gen_range(mu..=l));
    }
    let d = DMatrix::from_diagonal(&DVector::from_vec(eigs));
    let a = q.transpose() * d * &q;
    // Symmetrize to kill round-off asymmetry.
    let a = 0.5 * (&a + a.transpose());

    let a = Arc::new(a);
    let a_eval = Arc::clone(&a);
    let a_grad = Arc::clone(&a);
    // Kernel direction: row 0 of Q is the eigenvector with eigenvalue 0.
    let kernel: Vec<f64> = q.row(0).iter().copied().collect();

    let objective = ObjectiveFunction {
        id: "quadratic".into(),
        dim,
        eval: Arc::new(move |x: &[f64]| {
            let v = DVector::from_column_slice(x);
            0.5 * (&*a_eval * &v).dot(&v)
        }),
        grad: Some(Arc::new(move |x: &[f64]| {
            let v = DVector::from_column_slice(x);
            (&*a_grad * v).iter().copied().collect()
        })),
        f_star: 0.0,
        lipschitz_l: Some(l),
        pl_mu: Some(mu),
        is_convex: true,
        exact_prox: None,
        projection: Some(Arc::new(move |x: &[f64]| {
            let c = numerics::dot(x, &kernel);
            kernel.iter().map(|k| c * k).collect()
        })),
    };
    Ok((objective, Arc::try_unwrap(a).unwrap_or_else(|arc| (*arc).clone())))
}

/// One-dimensional quadratic F(x) = (mu/2) x^2; the function behind the
/// closed-form damped-oscillator oracle.
pub fn make_scalar_quadratic(mu: f64) -> Result<ObjectiveFunction> {
    if !(mu > 0.0) {
        return Err(Error::InvalidConstants(format!("mu must be positive, got {mu}")));
    }
    Ok(ObjectiveFunction {
        id: "scalar-quadratic".into(),
        dim: 1,
        eval: Arc::new(move |x: &[f64]| 0.5 * mu * x[0] * x[0]),
        grad: Some(Arc::new(move |x: &[f64]| vec![mu * x[0]])),
        f_star: 0.0,
        lipschitz_l: Some(mu),
        pl_mu: Some(mu),
        is_convex: true,
        exact_prox: None,
        projection: Some(Arc::new(|x: &[f64]| vec![0.0 * x[0]])),
    })
}

/// Graph-residual function F(x, y) = c (y - f(x))^2 on R^2. Its minimizer
/// set is the graph of `f`; it satisfies PL with mu = 2c even though it is
/// not convex for curved `f`.
pub fn make_graph_residual<F, D>(c: f64, f: F, f_prime: D) -> Result<ObjectiveFunction>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
    D: Fn(f64) -> f64 + Send + Sync + 'static,
{
    if !(c > 0.0) {
        return Err(Error::InvalidConstants(format!("c must be positive, got {c}")));
    }
    let f = Arc::new(f);
    let fp = Arc::new(f_prime);
    let f_eval = Arc::clone(&f);
    let f_grad = Arc::clone(&f);
    let f_proj = Arc::clone(&f);

    Ok(ObjectiveFunction {
        id: "sin-valley".into(),
        dim: 2,
        eval: Arc::new(move |x: &[f64]| {
            let r = x[1] - f_eval(x[0]);
            c * r * r
        }),
        grad: Some(Arc::new(move |x: &[f64]| {
            let r = x[1] - f_grad(x[0]);
            vec![-2.0 * c * r * fp(x[0]), 2.0 * c * r]
        })),
        f_star: 0.0,
        lipschitz_l: None,
        pl_mu: Some(2.0 * c),
        is_convex: false,
        exact_prox: None,
        projection: Some(Arc::new(move |x: &[f64]| {
            let s = project_to_graph(&*f_proj, x[0], x[1]);
            vec![s, f_proj(s)]
        })),
    })
}

/// Closest abscissa s minimizing (x-s)^2 + (y-f(s))^2, by a multistart grid
/// plus golden-section refinement. The minimizer satisfies |x - s| <= |y - f(x)|,
/// which bounds the search window.
fn project_to_graph<F: Fn(f64) -> f64>(f: &F, x: f64, y: f64) -> f64 {
    let reach = (y - f(x)).abs() + 1.0;
    let lo = x - reach;
    let hi = x + reach;
    let obj = |s: f64| {
        let dx = x - s;
        let dy = y - f(s);
        dx * dx + dy * dy
    };
    let n = 400;
    let h = (hi - lo) / n as f64;
    let mut best = lo;
    let mut best_v = obj(lo);
    for i in 1..=n {
        let s = lo + h * i as f64;
        let v = obj(s);
        if v < best_v {
            best_v = v;
            best = s;
        }
    }
    numerics::golden_section(obj, best - h, best + h, 1e-12 * (1.0 + best.abs()))
}

/// The piecewise nonconvex function used to separate PL from quasi-strong
/// convexity: zero on [-eps, eps], (x -+ eps)^2 + 3 sin^2(x -+ eps) outside.
/// PL holds with mu = 1/32 and the gradient is Lipschitz with L <= 14, but
/// the function is not quasi-strongly convex.
pub fn make_piecewise_nonconvex(eps: f64) -> Result<ObjectiveFunction> {
    if !(eps > 0.0) {
        return Err(Error::InvalidConstants(format!("eps must be positive, got {eps}")));
    }
    let shifted = move |x: f64| -> f64 {
        if x < -eps {
            x + eps
        } else if x > eps {
            x - eps
        } else {
            0.0
        }
    };
    Ok(ObjectiveFunction {
        id: "piecewise".into(),
        dim: 1,
        eval: Arc::new(move |x: &[f64]| {
            let u = shifted(x[0]);
            u * u + 3.0 * u.sin().powi(2)
        }),
        grad: Some(Arc::new(move |x: &[f64]| {
            let u = shifted(x[0]);
            vec![2.0 * u + 3.0 * (2.0 * u).sin()]
        })),
        f_star: 0.0,
        lipschitz_l: Some(14.0),
        pl_mu: Some(1.0 / 32.0),
        is_convex: false,
        exact_prox: None,
        projection: Some(Arc::new(move |x: &[f64]| vec![x[0].clamp(-eps, eps)])),
    })
}

/// Flat-bottom convex function F(x) = max(|x| - 1, 0)^2 with minimizer set
/// [-1, 1]; PL holds with mu = 2 although the minimizer is not unique.
pub fn make_flat_bottom() -> ObjectiveFunction {
    ObjectiveFunction {
        id: "flat-bottom".into(),
        dim: 1,
        eval: Arc::new(|x: &[f64]| {
            let e = (x[0].abs() - 1.0).max(0.0);
            e * e
        }),
        grad: Some(Arc::new(|x: &[f64]| {
            let e = (x[0].abs() - 1.0).max(0.0);
            vec![2.0 * e * x[0].signum()]
        })),
        f_star: 0.0,
        lipschitz_l: Some(2.0),
        pl_mu: Some(2.0),
        is_convex: true,
        exact_prox: None,
        projection: Some(Arc::new(|x: &[f64]| vec![x[0].clamp(-1.0, 1.0)])),
    }
}

/// Nonsmooth demo input |x| on R, evaluation-only (no gradient), with the
/// soft-threshold as exact prox. No global (ns-PL) constant is carried: on a
/// bounded set the valid constant depends on the set, so the Moreau layer
/// takes it as explicit user input.
pub fn make_abs() -> ObjectiveFunction {
    ObjectiveFunction {
        id: "abs".into(),
        dim: 1,
        eval: Arc::new(|x: &[f64]| x[0].abs()),
        grad: None,
        f_star: 0.0,
        lipschitz_l: None,
        pl_mu: None,
        is_convex: true,
        exact_prox: Some(Arc::new(|lambda: f64, x: &[f64]| {
            vec![x[0].signum() * (x[0].abs() - lambda).max(0.0)]
        })),
        projection: Some(Arc::new(|_x: &[f64]| vec![0.0])),
    }
}

/// Registry ids accepted in config files, with their parameter keys.
pub const REGISTRY_IDS: [&str; 5] = ["quadratic", "sin-valley", "piecewise", "flat-bottom", "abs"];

/// Build a registered function from a string id and a JSON parameter map.
///
/// Parameter keys: `quadratic` takes dim/mu/l/seed, `sin-valley` takes c,
/// `piecewise` takes eps, `flat-bottom` and `abs` take none.
pub fn build_from_registry(
    id: &str,
    params: &serde_json::Map<String, serde_json::Value>,
) -> Result<ObjectiveFunction> {
    let num = |key: &str, default: f64| -> Result<f64> {
        match params.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| {
                Error::InvalidArgument(format!("parameter `{key}` must be a number"))
            }),
        }
    };
    match id {
        "quadratic" => {
            let dim = num("dim", 100.0)? as usize;
            let mu = num("mu", 0.1)?;
            let l = num("l", 1.0)?;
            let seed = num("seed", 0.0)? as u64;
            make_quadratic(dim, mu, l, seed)
        }
        "sin-valley" => {
            let c = num("c", 0.125)?;
            make_graph_residual(c, f64::sin, f64::cos)
        }
        "piecewise" => make_piecewise_nonconvex(num("eps", 1.0)?),
        "flat-bottom" => Ok(make_flat_bottom()),
        "abs" => Ok(make_abs()),
        other => Err(Error::InvalidArgument(format!(
            "unknown function id `{other}`; known: {REGISTRY_IDS:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn seeded_points(dim: usize, n: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(lo..hi)).collect())
            .collect()
    }

    #[test]
    fn quadratic_spectrum_mu_equals_l() {
        let (_, a) = make_quadratic_with_hessian(3, 1.0, 1.0, 0).unwrap();
        let mut eigs: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!(eigs[0].abs() < 1e-12);
        assert!((eigs[1] - 1.0).abs() < 1e-12);
        assert!((eigs[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_pl_ratio_over_gaussian_samples() {
        // Sampled PL ratio never drops below the smallest positive eigenvalue.
        let f = make_quadratic(100, 0.1, 1.0, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut mu_hat = f64::INFINITY;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..100).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let gap = f.gap(&x);
            if gap > 1e-12 {
                mu_hat = mu_hat.min(f.grad_norm_sq(&x).unwrap() / (2.0 * gap));
            }
        }
        assert!(mu_hat >= 0.1 * (1.0 - 1e-9), "mu_hat = {mu_hat}");
    }

    #[test]
    fn quadratic_condition_number() {
        let f = make_quadratic(100, 0.01, 1.0, 1).unwrap();
        let kappa = f.lipschitz_l.unwrap() / f.pl_mu.unwrap();
        assert_eq!(kappa, 100.0);
    }

    #[test]
    fn quadratic_is_deterministic() {
        let (_, a) = make_quadratic_with_hessian(20, 0.3, 2.0, 42).unwrap();
        let (_, b) = make_quadratic_with_hessian(20, 0.3, 2.0, 42).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let (_, c) = make_quadratic_with_hessian(20, 0.3, 2.0, 43).unwrap();
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn quadratic_rejects_bad_arguments() {
        assert!(matches!(make_quadratic(2, 1.0, 1.0, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(make_quadratic(3, 2.0, 1.0, 0), Err(Error::InvalidConstants(_))));
        assert!(matches!(make_quadratic(3, 0.0, 1.0, 0), Err(Error::InvalidConstants(_))));
        assert!(matches!(make_quadratic(3, -1.0, 1.0, 0), Err(Error::InvalidConstants(_))));
    }

    #[test]
    fn quadratic_kernel_projection() {
        let (f, a) = make_quadratic_with_hessian(10, 0.5, 2.0, 3).unwrap();
        let x = vec![1.0; 10];
        let p = f.project_to_minimizers(&x).unwrap();
        // Projection lands in the kernel and the residual is A-orthogonal to it.
        let pv = DVector::from_column_slice(&p);
        assert!((&a * &pv).norm() < 1e-10);
        let r = numerics::sub(&x, &p);
        assert!(numerics::dot(&r, &p).abs() < 1e-10);
    }

    #[test]
    fn sin_valley_constants_and_critical_point() {
        let f = make_graph_residual(1.0, f64::sin, f64::cos).unwrap();
        assert_eq!(f.pl_mu, Some(2.0));
        let f = make_graph_residual(0.125, f64::sin, f64::cos).unwrap();
        assert_eq!(f.pl_mu, Some(0.25));
        let x = [std::f64::consts::FRAC_PI_2, 1.0];
        assert_eq!(f.eval(&x), 0.0);
        assert_eq!(f.gradient(&x).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            make_graph_residual(0.0, f64::sin, f64::cos),
            Err(Error::InvalidConstants(_))
        ));
    }

    #[test]
    fn sin_valley_projection_is_on_curve_and_locally_optimal() {
        let f = make_graph_residual(0.125, f64::sin, f64::cos).unwrap();
        let x = [2.0, 3.0];
        let p = f.project_to_minimizers(&x).unwrap();
        assert!((p[1] - p[0].sin()).abs() < 1e-12);
        let d = f.distance_to_minimizers(&x).unwrap();
        // No grid abscissa gives a closer curve point.
        for i in 0..2000 {
            let s = -8.0 + 16.0 * i as f64 / 1999.0;
            let alt = ((x[0] - s).powi(2) + (x[1] - s.sin()).powi(2)).sqrt();
            assert!(d <= alt + 1e-9, "s = {s}: {d} > {alt}");
        }
    }

    #[test]
    fn piecewise_values() {
        let f = make_piecewise_nonconvex(1.0).unwrap();
        assert_eq!(f.eval(&[0.5]), 0.0);
        assert_eq!(f.gradient(&[0.5]).unwrap()[0], 0.0);
        let x = 1.0 + std::f64::consts::PI;
        let v = f.eval(&[x]);
        assert!((v - std::f64::consts::PI.powi(2)).abs() < 1e-12);
        let g = f.gradient(&[x]).unwrap()[0];
        assert!((g - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(matches!(make_piecewise_nonconvex(0.0), Err(Error::InvalidConstants(_))));
    }

    #[test]
    fn piecewise_pl_ratio_grid() {
        let f = make_piecewise_nonconvex(1.0).unwrap();
        let mut worst = f64::INFINITY;
        for i in 0..200_000 {
            let x = -10.0 + 20.0 * i as f64 / 199_999.0;
            if x.abs() < 1.0 {
                continue;
            }
            let gap = f.gap(&[x]);
            if gap > 1e-12 {
                worst = worst.min(f.grad_norm_sq(&[x]).unwrap() / (2.0 * gap));
            }
        }
        assert!(worst >= 1.0 / 32.0, "PL ratio {worst} < 1/32");
    }

    #[test]
    fn flat_bottom_values_and_pl_constant() {
        let f = make_flat_bottom();
        assert_eq!(f.eval(&[0.5]), 0.0);
        assert_eq!(f.eval(&[3.0]), 4.0);
        assert_eq!(f.gradient(&[3.0]).unwrap()[0], 4.0);
        // Grid oracle over [-5, 5] confirms the derived PL constant 2.
        let mut worst = f64::INFINITY;
        for i in 0..100_000 {
            let x = -5.0 + 10.0 * i as f64 / 99_999.0;
            let gap = f.gap(&[x]);
            if gap > 1e-12 {
                worst = worst.min(f.grad_norm_sq(&[x]).unwrap() / (2.0 * gap));
            }
        }
        assert!((worst - 2.0).abs() < 1e-6, "PL ratio inf = {worst}");
        assert_eq!(f.pl_mu, Some(2.0));
    }

    #[test]
    fn abs_values_and_prox() {
        let f = make_abs();
        assert_eq!(f.eval(&[0.0]), 0.0);
        assert_eq!(f.eval(&[-2.0]), 2.0);
        assert!(f.gradient(&[1.0]).is_err());
        assert_eq!(f.exact_prox(1.0, &[3.0]).unwrap(), vec![2.0]);
        assert_eq!(f.exact_prox(2.0, &[1.0]).unwrap(), vec![0.0]);
        // Brute-force check of the soft threshold at a third point.
        let (lam, x) = (0.7, -1.9);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..4_000_000 {
            let y = -4.0 + 8.0 * i as f64 / 3_999_999.0;
            let v = y.abs() + (y - x) * (y - x) / (2.0 * lam);
            if v < best.0 {
                best = (v, y);
            }
        }
        assert!((f.exact_prox(lam, &[x]).unwrap()[0] - best.1).abs() < 1e-5);
    }

    #[test]
    fn gradients_match_finite_differences() {
        // Central differences at seeded points away from nondifferentiability
        // loci, relative error <= 1e-5.
        let cases: Vec<(ObjectiveFunction, Vec<f64>)> = vec![
            (make_quadratic(5, 0.5, 3.0, 11).unwrap(), vec![1e-3; 0]),
            (make_graph_residual(0.125, f64::sin, f64::cos).unwrap(), vec![]),
            (make_piecewise_nonconvex(1.0).unwrap(), vec![1.0, -1.0]),
            (make_flat_bottom(), vec![1.0, -1.0]),
        ];
        for (f, loci) in cases {
            let pts = seeded_points(f.dim, 100, -5.0, 5.0, 17);
            for x in pts {
                if f.dim == 1 && loci.iter().any(|&l| (x[0].abs() - l.abs()).abs() < 1e-3) {
                    continue;
                }
                let g = f.gradient(&x).unwrap();
                let fd = numerics::central_difference_gradient(|p| f.eval(p), &x, 1e-6);
                let scale = numerics::norm(&g).max(1.0);
                for (gi, fi) in g.iter().zip(&fd) {
                    assert!(
                        (gi - fi).abs() <= 1e-5 * scale,
                        "{}: grad {gi} vs fd {fi} at {x:?}",
                        f.id
                    );
                }
            }
        }
    }

    #[test]
    fn pl_inequality_holds_on_samples() {
        let fns = vec![
            make_quadratic(4, 0.5, 2.0, 5).unwrap(),
            make_graph_residual(0.125, f64::sin, f64::cos).unwrap(),
            make_piecewise_nonconvex(1.0).unwrap(),
            make_flat_bottom(),
        ];
        for f in fns {
            let mu = f.pl_mu.unwrap();
            for x in seeded_points(f.dim, 1000, -5.0, 5.0, 23) {
                let gap = f.gap(&x);
                let gsq = f.grad_norm_sq(&x).unwrap();
                assert!(
                    2.0 * mu * gap <= gsq * (1.0 + 1e-12) + 1e-12,
                    "{}: PL violated at {x:?}: 2 mu gap = {} vs {}",
                    f.id,
                    2.0 * mu * gap,
                    gsq
                );
            }
        }
    }

    #[test]
    fn descent_and_baillon_haddad_inequalities() {
        // For convex built-ins with a Lipschitz gradient:
        //   F(x) - F(y) <= <grad F(y), x - y> + (L/2) ||x - y||^2
        //   F(y) - F(x) >= <grad F(x), y - x> + (1/2L) ||grad F(y) - grad F(x)||^2
        let fns = vec![make_quadratic(4, 0.5, 2.0, 5).unwrap(), make_flat_bottom()];
        for f in fns {
            let l = f.lipschitz_l.unwrap();
            let xs = seeded_points(f.dim, 1000, -5.0, 5.0, 31);
            let ys = seeded_points(f.dim, 1000, -5.0, 5.0, 37);
            for (x, y) in xs.iter().zip(&ys) {
                let gy = f.gradient(y).unwrap();
                let gx = f.gradient(x).unwrap();
                let d = numerics::sub(x, y);
                let lhs = f.eval(x) - f.eval(y);
                let rhs = numerics::dot(&gy, &d) + 0.5 * l * numerics::norm_sq(&d);
                assert!(lhs <= rhs + 1e-10, "{}: descent violated", f.id);
                let gd = numerics::sub(&gy, &gx);
                let bh = numerics::dot(&gx, &numerics::sub(y, x))
                    + numerics::norm_sq(&gd) / (2.0 * l);
                assert!(
                    f.eval(y) - f.eval(x) >= bh - 1e-10,
                    "{}: Baillon-Haddad violated",
                    f.id
                );
            }
        }
    }

    #[test]
    fn registry_round_trip() {
        let mut params = serde_json::Map::new();
        params.insert("c".into(), serde_json::json!(0.125));
        let f = build_from_registry("sin-valley", &params).unwrap();
        assert_eq!(f.pl_mu, Some(0.25));
        assert!(build_from_registry("nope", &serde_json::Map::new()).is_err());
        for id in REGISTRY_IDS {
            build_from_registry(id, &serde_json::Map::new()).unwrap();
        }
    }
}
