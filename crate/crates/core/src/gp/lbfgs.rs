//! Box-constrained limited-memory BFGS used for hyperparameter fitting.
//!
//! Minimizes; callers negate to maximize. The objective returns `None` where
//! it cannot be evaluated, which the line search treats as an infinite value.

use std::collections::VecDeque;

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

const MEMORY: usize = 8;
const ARMIJO: f64 = 1e-4;

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Gradient components that point out of the box at an active bound.
fn blocked(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<bool> {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((v, gi), (l, h))| (*v <= *l && *gi > 0.0) || (*v >= *h && *gi < 0.0))
        .collect()
}

pub(crate) fn minimize_box<F>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iters: usize,
    tol: f64,
) -> Option<Outcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return None;
    }
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut stalls = 0;

    while iterations < max_iters {
        let fixed = blocked(&x, &g, lo, hi);
        let pg_norm = g
            .iter()
            .zip(&fixed)
            .map(|(gi, b)| if *b { 0.0 } else { gi.abs() })
            .fold(0.0, f64::max);
        if pg_norm < tol {
            break;
        }
        iterations += 1;

        // two-loop recursion on the free subspace
        let mut q: Vec<f64> = g.iter().zip(&fixed).map(|(gi, b)| if *b { 0.0 } else { *gi }).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let scale = 1.0 / pg_norm.max(1.0);
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().zip(&fixed).map(|(v, b)| if *b { 0.0 } else { -v }).collect();
        if dot(&dir, &g) >= 0.0 {
            hist.clear();
            let scale = 1.0 / pg_norm.max(1.0);
            dir = g
                .iter()
                .zip(&fixed)
                .map(|(gi, b)| if *b { 0.0 } else { -gi * scale })
                .collect();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            project(&mut trial, lo, hi);
            let moved: f64 = trial.iter().zip(&x).zip(&g).map(|((t, a), gi)| (t - a) * gi).sum();
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft <= fx + ARMIJO * moved {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if improvement <= 1e-12 * (1.0 + fx.abs()) {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Some(Outcome {
        x,
        value: fx,
        iterations,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
