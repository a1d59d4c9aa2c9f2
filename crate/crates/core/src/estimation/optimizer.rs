//! Bound-constrained local optimizers over the four free parameters.

use nalgebra::{Matrix4, Vector4};

use super::objectives::LikelihoodDerivatives;

/// Convergence settings shared by the simplex and scoring searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Tolerances {
    pub f_rel: f64,
    pub x_tol: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Bounds {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl Bounds {
    pub fn clamp(&self, x: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|i| x[i].clamp(self.lo[i], self.hi[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Outcome {
    pub x: [f64; 4],
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Nelder-Mead minimization with points clamped to the box. Non-finite
/// values count as `+inf`. Converged when the spread of values is below
/// `f_rel` relative and the simplex diameter (max-norm) below `x_tol`.
pub(crate) fn nelder_mead<F>(mut f: F, x0: [f64; 4], step: f64, bounds: &Bounds, tol: &Tolerances) -> Outcome
where
    F: FnMut(&[f64; 4]) -> f64,
{
    let mut evaluations = 0;
    let mut eval = |x: &[f64; 4]| {
        evaluations += 1;
        finite_or_inf(f(x))
    };
    let x0 = bounds.clamp(x0);
    let mut pts: Vec<([f64; 4], f64)> = Vec::with_capacity(5);
    pts.push((x0, eval(&x0)));
    for i in 0..4 {
        let mut x = x0;
        // Step inward if the vertex would sit on the box face.
        x[i] = if x0[i] + step <= bounds.hi[i] { x0[i] + step } else { x0[i] - step };
        let x = bounds.clamp(x);
        pts.push((x, eval(&x)));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < tol.max_iterations {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (pts[0].1, pts[4].1);
        let diameter = pts[1..]
            .iter()
            .map(|(x, _)| (0..4).map(|i| (x[i] - pts[0].0[i]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let spread_ok = worst.is_finite() && (worst - best) <= tol.f_rel * best.abs().max(f64::MIN_POSITIVE);
        if spread_ok && diameter < tol.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; 4];
        for (x, _) in &pts[..4] {
            for i in 0..4 {
                centroid[i] += x[i] / 4.0;
            }
        }
        let along = |t: f64| -> [f64; 4] {
            bounds.clamp(std::array::from_fn(|i| centroid[i] + t * (pts[4].0[i] - centroid[i])))
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < pts[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            pts[4] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < pts[3].1 {
            pts[4] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < pts[4].1 {
            let xc = along(-0.5);
            (xc, eval(&xc))
        } else {
            let xc = along(0.5);
            (xc, eval(&xc))
        };
        if fc < pts[4].1.min(fr) {
            pts[4] = (xc, fc);
            continue;
        }
        let x_best = pts[0].0;
        for p in pts.iter_mut().skip(1) {
            let x = std::array::from_fn(|i| x_best[i] + 0.5 * (p.0[i] - x_best[i]));
            *p = (x, eval(&x));
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    Outcome {
        x: pts[0].0,
        value: pts[0].1,
        iterations,
        evaluations,
        converged,
    }
}

/// Simplex search restarted from its own optimum until a restart no longer
/// improves the value (at most `restarts` extra rounds).
pub(crate) fn nelder_mead_restarted<F>(
    mut f: F,
    x0: [f64; 4],
    step: f64,
    bounds: &Bounds,
    tol: &Tolerances,
    restarts: usize,
) -> Outcome
where
    F: FnMut(&[f64; 4]) -> f64,
{
    let mut out = nelder_mead(&mut f, x0, step, bounds, tol);
    for _ in 0..restarts {
        if !out.converged {
            break;
        }
        let budget = Tolerances {
            max_iterations: tol.max_iterations.saturating_sub(out.iterations),
            ..*tol
        };
        let next = nelder_mead(&mut f, out.x, step, bounds, &budget);
        let improved = next.value < out.value - tol.f_rel * out.value.abs();
        let total_it = out.iterations + next.iterations;
        let total_ev = out.evaluations + next.evaluations;
        if next.value <= out.value {
            out = Outcome {
                iterations: total_it,
                evaluations: total_ev,
                ..next
            };
        } else {
            out.iterations = total_it;
            out.evaluations = total_ev;
        }
        if !improved {
            break;
        }
    }
    out
}

/// Projected Fisher scoring for maximizing a Whittle-type likelihood.
///
/// Each step solves `F d = g` on the free variables, where a variable is
/// fixed when it sits on a bound and the score pushes outward. Steps are
/// projected onto the box and backtracked until an Armijo increase holds.
/// Converged when the predicted increase `g.d / 2` falls below
/// `f_rel * max(1, |l|)`, or when the box-KKT conditions hold.
pub(crate) fn projected_scoring<V, D>(
    mut value: V,
    mut derivatives: D,
    x0: [f64; 4],
    bounds: &Bounds,
    tol: &Tolerances,
) -> Option<Outcome>
where
    V: FnMut(&[f64; 4]) -> f64,
    D: FnMut(&[f64; 4]) -> Option<LikelihoodDerivatives>,
{
    let mut x = bounds.clamp(x0);
    let mut evaluations = 1;
    let mut d = derivatives(&x)?;
    if !d.value.is_finite() {
        return None;
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < tol.max_iterations {
        iterations += 1;
        let free: [bool; 4] = std::array::from_fn(|i| {
            let span = (bounds.hi[i] - bounds.lo[i]).abs().max(1.0);
            let at_lo = x[i] <= bounds.lo[i] + 1e-12 * span;
            let at_hi = x[i] >= bounds.hi[i] - 1e-12 * span;
            !((at_lo && d.score[i] <= 0.0) || (at_hi && d.score[i] >= 0.0))
        });
        if !free.iter().any(|&b| b) {
            converged = true;
            break;
        }
        let dir = scoring_direction(&d, &free)?;
        let decrement: f64 = (0..4).map(|i| d.score[i] * dir[i]).sum();
        if !decrement.is_finite() {
            return None;
        }
        let small = 0.5 * decrement <= tol.f_rel * d.value.abs().max(1.0);

        // Backtracking along the projected path.
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = bounds.clamp(std::array::from_fn(|i| x[i] + t * dir[i]));
            let v = value(&trial);
            evaluations += 1;
            let gain: f64 = (0..4).map(|i| d.score[i] * (trial[i] - x[i])).sum();
            if v.is_finite() && v >= d.value + 1e-4 * gain {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            // No ascent possible along the scoring direction: stationary to
            // within rounding.
            converged = small;
            break;
        };
        let step_small = (0..4).all(|i| (next[i] - x[i]).abs() <= tol.x_tol * x[i].abs().max(1e-3));
        match derivatives(&next) {
            Some(nd) if nd.value.is_finite() && nd.value >= d.value => {
                evaluations += 1;
                x = next;
                d = nd;
            }
            _ => {
                converged = small;
                break;
            }
        }
        if small || step_small {
            converged = true;
            break;
        }
    }
    Some(Outcome {
        x,
        value: d.value,
        iterations,
        evaluations,
        converged,
    })
}

fn scoring_direction(d: &LikelihoodDerivatives, free: &[bool; 4]) -> Option<[f64; 4]> {
    let mut f = Matrix4::from_fn(|a, b| if free[a] && free[b] { d.information[a][b] } else { 0.0 });
    let g = Vector4::from_fn(|a, _| if free[a] { d.score[a] } else { 0.0 });
    let trace: f64 = (0..4).map(|a| f[(a, a)]).sum();
    for a in 0..4 {
        if !free[a] {
            f[(a, a)] = 1.0;
        }
    }
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut m = f;
        for a in 0..4 {
            if free[a] {
                m[(a, a)] += ridge;
            }
        }
        if let Some(ch) = m.cholesky() {
            let s = ch.solve(&g);
            if s.iter().all(|v| v.is_finite()) {
                return Some(std::array::from_fn(|i| if free[i] { s[i] } else { 0.0 }));
            }
        }
        ridge = if ridge == 0.0 { 1e-10 * trace.max(1e-300) } else { ridge * 100.0 };
    }
    None
}
