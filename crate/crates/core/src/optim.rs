//! Derivative-free minimization shared by the model-fitting engines.
//!
//! Plain Nelder-Mead with the textbook coefficients. Convergence is declared
//! when the simplex diameter in parameter space falls below `tolerance`, or
//! the evaluation budget runs out. Fully deterministic.

/// Options controlling a single Nelder-Mead run.
#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Per-dimension offsets used to build the initial simplex.
    pub initial_steps: Vec<f64>,
    pub max_evaluations: usize,
    pub tolerance: f64,
}

impl NelderMeadOptions {
    pub fn new(initial_steps: Vec<f64>) -> Self {
        Self {
            initial_steps,
            max_evaluations: 2000,
            tolerance: 1e-8,
        }
    }

    pub fn uniform(dim: usize, step: f64) -> Self {
        Self::new(vec![step; dim])
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` starting from `x0`. Zero-dimensional problems return the
/// starting point evaluated once.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> MinimizeResult
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    assert_eq!(opts.initial_steps.len(), dim, "one initial step per dimension");
    if dim == 0 {
        let fx = f(x0);
        return MinimizeResult {
            x: Vec::new(),
            fx,
            evaluations: 1,
            converged: true,
        };
    }

    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let mut evals = 0usize;
    let eval = |f: &mut F, x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let fx0 = eval(&mut f, x0, &mut evals);
    simplex.push((x0.to_vec(), fx0));
    for i in 0..dim {
        let mut x = x0.to_vec();
        let step = if opts.initial_steps[i] != 0.0 {
            opts.initial_steps[i]
        } else {
            0.05
        };
        x[i] += step;
        let fx = eval(&mut f, &x, &mut evals);
        simplex.push((x, fx));
    }

    let mut converged = false;
    while evals < opts.max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));

        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(simplex[0].0.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if diameter < opts.tolerance {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x.iter()) {
                *c += v;
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let worst = simplex[dim].clone();
        let reflected: Vec<f64> = centroid
            .iter()
            .zip(worst.0.iter())
            .map(|(c, w)| c + ALPHA * (c - w))
            .collect();
        let f_reflected = eval(&mut f, &reflected, &mut evals);

        if f_reflected < simplex[0].1 {
            // Try to expand past the reflection.
            let expanded: Vec<f64> = centroid
                .iter()
                .zip(worst.0.iter())
                .map(|(c, w)| c + GAMMA * ALPHA * (c - w))
                .collect();
            let f_expanded = eval(&mut f, &expanded, &mut evals);
            simplex[dim] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
            continue;
        }
        if f_reflected < simplex[dim - 1].1 {
            simplex[dim] = (reflected, f_reflected);
            continue;
        }

        // Contract toward the better of worst/reflected.
        let (anchor, f_anchor) = if f_reflected < worst.1 {
            (&reflected, f_reflected)
        } else {
            (&worst.0, worst.1)
        };
        let contracted: Vec<f64> = centroid
            .iter()
            .zip(anchor.iter())
            .map(|(c, a)| c + RHO * (a - c))
            .collect();
        let f_contracted = eval(&mut f, &contracted, &mut evals);
        if f_contracted < f_anchor {
            simplex[dim] = (contracted, f_contracted);
            continue;
        }

        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best
                .iter()
                .zip(vertex.0.iter())
                .map(|(b, v)| b + SIGMA * (v - b))
                .collect();
            let fx = eval(&mut f, &x, &mut evals);
            *vertex = (x, fx);
            if evals >= opts.max_evaluations {
                break;
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    MinimizeResult {
        x,
        fx,
        evaluations: evals,
        converged,
    }
}

/// Two-stage driver used by the fitting engines: one full run, then one
/// restart from the incumbent with quarter-size steps to escape stalls.
pub fn nelder_mead_with_restart<F>(
    mut f: F,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> MinimizeResult
where
    F: FnMut(&[f64]) -> f64,
{
    let first = nelder_mead(&mut f, x0, opts);
    let mut restart_opts = opts.clone();
    for s in restart_opts.initial_steps.iter_mut() {
        *s *= 0.25;
    }
    let second = nelder_mead(&mut f, &first.x, &restart_opts);
    if second.fx <= first.fx {
        MinimizeResult {
            evaluations: first.evaluations + second.evaluations,
            ..second
        }
    } else {
        MinimizeResult {
            evaluations: first.evaluations + second.evaluations,
            ..first
        }
    }
}
