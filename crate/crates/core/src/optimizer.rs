//! Nelder–Mead simplex minimization following the Lagarias et al. variant
//! (the scheme behind MATLAB's `fminsearch`), including its initial simplex
//! and its stopping rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmOptions {
    /// Iteration budget; `None` means `200 · dim`.
    pub max_iter: Option<usize>,
    /// Function-evaluation budget; `None` means `200 · dim`.
    pub max_feval: Option<usize>,
    pub tol_x: f64,
    pub tol_f: f64,
    /// Relative offset of each initial simplex vertex along its coordinate.
    pub initial_step: f64,
    /// Absolute offset used where the start coordinate is zero.
    pub zero_step: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            max_iter: None,
            max_feval: None,
            tol_x: 1e-6,
            tol_f: 1e-8,
            initial_step: 0.05,
            zero_step: 0.00025,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

impl NmOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Err(Error::config(key, reason));
        if !(self.tol_x > 0.0) {
            return bad("tol_x", "must be positive");
        }
        if !(self.tol_f > 0.0) {
            return bad("tol_f", "must be positive");
        }
        if !(self.initial_step.is_finite() && self.initial_step != 0.0) {
            return bad("initial_step", "must be finite and non-zero");
        }
        if !(self.zero_step.is_finite() && self.zero_step != 0.0) {
            return bad("zero_step", "must be finite and non-zero");
        }
        if !(self.reflection > 0.0) {
            return bad("reflection", "must be positive");
        }
        if !(self.expansion > self.reflection) {
            return bad("expansion", "must exceed the reflection coefficient");
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return bad("contraction", "must lie in (0, 1)");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink", "must lie in (0, 1)");
        }
        if self.max_iter == Some(0) || self.max_feval == Some(0) {
            return bad("max_iter", "budgets must be positive");
        }
        Ok(())
    }

    pub fn iteration_budget(&self, dim: usize) -> usize {
        self.max_iter.unwrap_or(200 * dim)
    }

    pub fn evaluation_budget(&self, dim: usize) -> usize {
        self.max_feval.unwrap_or(200 * dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Both tolerances hold; the x-criterion was the last to be satisfied.
    TolX,
    /// Both tolerances hold; the f-criterion was the last to be satisfied.
    TolF,
    MaxIter,
    MaxFeval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmResult {
    pub x_opt: Vec<f64>,
    pub f_opt: f64,
    pub iterations: usize,
    pub fevals: usize,
    pub converged_on: Termination,
}

struct Counted<'a, F> {
    f: &'a F,
    fevals: usize,
}

impl<F: Fn(&[f64]) -> f64> Counted<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.fevals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            return Err(Error::NanObjective { point: x.to_vec() });
        }
        Ok(v)
    }
}

/// Vertex with its value and the order in which it entered the simplex, used
/// to break ties between equal values.
#[derive(Clone)]
struct Vertex {
    x: Vec<f64>,
    f: f64,
    age: usize,
}

fn affine(a: &[f64], wa: f64, b: &[f64], wb: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| wa * p + wb * q).collect()
}

/// Pulls every vertex but the best one towards the best by `sigma`.
fn shrink<F: Fn(&[f64]) -> f64>(
    simplex: &mut [Vertex],
    sigma: f64,
    next_age: &mut usize,
    counted: &mut Counted<'_, F>,
) -> Result<()> {
    let best_x = simplex[0].x.clone();
    for v in simplex.iter_mut().skip(1) {
        v.x = affine(&best_x, 1.0 - sigma, &v.x, sigma);
        v.f = counted.eval(&v.x)?;
        v.age = *next_age;
        *next_age += 1;
    }
    Ok(())
}

/// Minimizes `f` from `x0`.
///
/// `f` may return `+∞` to reject a point; such points are never kept as the
/// best vertex unless every candidate is infinite.
pub fn nelder_mead<F>(f: &F, x0: &[f64], opts: &NmOptions) -> Result<NmResult>
where
    F: Fn(&[f64]) -> f64,
{
    opts.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(Error::Shape("cannot optimize over zero variables".into()));
    }
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::config("x0", "must be finite"));
    }
    let max_iter = opts.iteration_budget(n);
    let max_feval = opts.evaluation_budget(n);
    let (rho, chi, psi, sigma) = (opts.reflection, opts.expansion, opts.contraction, opts.shrink);

    let mut counted = Counted { f, fevals: 0 };
    let f0 = counted.eval(x0)?;
    if f0 == f64::INFINITY {
        return Err(Error::InfiniteStart);
    }

    let mut simplex = Vec::with_capacity(n + 1);
    simplex.push(Vertex { x: x0.to_vec(), f: f0, age: 0 });
    for j in 0..n {
        let mut y = x0.to_vec();
        y[j] = if y[j] != 0.0 { (1.0 + opts.initial_step) * y[j] } else { opts.zero_step };
        let fy = counted.eval(&y)?;
        simplex.push(Vertex { x: y, f: fy, age: j + 1 });
    }
    let mut next_age = n + 1;
    let order =
        |s: &mut Vec<Vertex>| s.sort_by(|a, b| a.f.partial_cmp(&b.f).expect("NaN filtered").then(a.age.cmp(&b.age)));
    order(&mut simplex);

    let mut iterations = 1;
    let mut prev = (false, false);
    let converged_on = loop {
        let best = &simplex[0];
        let f_spread = simplex[1..].iter().map(|v| (v.f - best.f).abs()).fold(0.0, f64::max);
        let x_spread =
            simplex[1..].iter().flat_map(|v| v.x.iter().zip(&best.x).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        let x_scale = best.x.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let f_ok = f_spread <= opts.tol_f.max(10.0 * f64::EPSILON * best.f.abs());
        let x_ok = x_spread <= opts.tol_x.max(10.0 * f64::EPSILON * x_scale);
        if f_ok && x_ok {
            break if !prev.0 || prev.1 { Termination::TolX } else { Termination::TolF };
        }
        prev = (x_ok, f_ok);
        if counted.fevals >= max_feval {
            break Termination::MaxFeval;
        }
        if iterations >= max_iter {
            break Termination::MaxIter;
        }

        let worst = simplex[n].clone();
        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(&v.x) {
                *c += x / n as f64;
            }
        }

        let xr = affine(&centroid, 1.0 + rho, &worst.x, -rho);
        let fr = counted.eval(&xr)?;
        let mut replacement: Option<(Vec<f64>, f64)> = None;
        if fr < simplex[0].f {
            let xe = affine(&centroid, 1.0 + rho * chi, &worst.x, -rho * chi);
            let fe = counted.eval(&xe)?;
            replacement = Some(if fe < fr { (xe, fe) } else { (xr, fr) });
        } else if fr < simplex[n - 1].f {
            replacement = Some((xr, fr));
        } else if fr < worst.f {
            let xc = affine(&centroid, 1.0 + psi * rho, &worst.x, -psi * rho);
            let fc = counted.eval(&xc)?;
            if fc <= fr {
                replacement = Some((xc, fc));
            }
        } else {
            let xcc = affine(&centroid, 1.0 - psi, &worst.x, psi);
            let fcc = counted.eval(&xcc)?;
            if fcc < worst.f {
                replacement = Some((xcc, fcc));
            }
        }

        match replacement {
            Some((x, fx)) => {
                simplex[n] = Vertex { x, f: fx, age: next_age };
                next_age += 1;
            }
            None => shrink(&mut simplex, sigma, &mut next_age, &mut counted)?,
        }
        order(&mut simplex);
        iterations += 1;
    };

    let best = simplex.swap_remove(0);
    Ok(NmResult { x_opt: best.x, f_opt: best.f, iterations, fevals: counted.fevals, converged_on })
}
