//! Browser bindings for three small demos. Every export returns a JSON string;
//! failures come back as `{"error": "..."}` instead of throwing.

use mbmf::bayesopt::{build_response_surface, expected_improvement, propose_next, CostDataset, SurfaceConfig};
use mbmf::direct::{Direct, DirectConfig, SearchBox};
use mbmf::env::{rollout_real, EnvSpec};
use mbmf::gp::PriorMean;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Range shown by the response-surface demo.
const LO: f64 = -4.0;
const HI: f64 = 4.0;

fn finish(r: mbmf::Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// Rolls out the linear policy `u = K x + b` on the reference point mass.
/// `theta` holds the 2x4 gain row by row, then the two biases.
#[wasm_bindgen]
pub fn point_mass_rollout(theta: &[f64]) -> String {
    let env = EnvSpec::point_mass_reference();
    finish(rollout_real(&env, theta, 0).map(|traj| {
        let path: Vec<[f64; 2]> = traj.states.iter().map(|s| [s[0], s[1]]).collect();
        let obstacles: Vec<Value> = env
            .obstacles
            .iter()
            .map(|o| json!({ "center": o.center, "radius": o.radius }))
            .collect();
        json!({
            "path": path,
            "cost": traj.realized_cost,
            "goal_distance": env.goal_distance(traj.final_state()),
            "start": [env.start_state[0], env.start_state[1]],
            "goal": env.goal,
            "obstacles": obstacles,
        })
    }))
}

/// The 1-D cost the response-surface demo pretends to measure.
pub fn demo_cost(x: f64) -> f64 {
    0.3 * (x - 1.0).powi(2) + (2.0 * x).sin()
}

/// A model-predicted cost: the smooth part of `demo_cost`, scaled by
/// `quality` (0 gives the zero prior of plain BO).
fn demo_prior(quality: f64) -> PriorMean {
    PriorMean::uncached(move |x: &[f64]| quality * 0.3 * (x[0] - 1.0).powi(2))
}

/// GP posterior, prior and EI on a grid after observing `demo_cost` at `xs`,
/// plus the point EI would sample next.
#[wasm_bindgen]
pub fn response_surface(xs: &[f64], prior_quality: f64, grid_points: usize) -> String {
    finish((|| {
        let mut data = CostDataset::new(1);
        for &x in xs {
            data.push(vec![x], demo_cost(x))?;
        }
        let prior = demo_prior(prior_quality);
        let n = grid_points.clamp(2, 2000);
        let grid: Vec<f64> = (0..n).map(|i| LO + (HI - LO) * i as f64 / (n - 1) as f64).collect();
        let truth: Vec<f64> = grid.iter().map(|&x| demo_cost(x)).collect();
        let prior_curve: Vec<f64> = grid.iter().map(|&x| prior.eval(&[x])).collect();
        if data.is_empty() {
            return Ok(json!({ "grid": grid, "truth": truth, "prior": prior_curve, "observations": [] }));
        }
        let surface = build_response_surface(&data, prior, &SurfaceConfig::default(), None)?;
        let queries: Vec<[f64; 1]> = grid.iter().map(|&x| [x]).collect();
        let pred = surface.gp.predict_batch(&queries)?;
        let ei = queries
            .iter()
            .map(|q| expected_improvement(&surface, q))
            .collect::<mbmf::Result<Vec<f64>>>()?;
        let bounds = SearchBox::cube(1, LO, HI)?;
        let next = propose_next(
            &surface,
            &bounds,
            DirectConfig {
                budget: 60,
                epsilon: 1e-4,
            },
        )?;
        let observations: Vec<[f64; 2]> = data.records().iter().map(|r| [r.theta[0], r.observed_cost]).collect();
        Ok(json!({
            "grid": grid,
            "truth": truth,
            "prior": prior_curve,
            "mean": pred.iter().map(|p| p.0).collect::<Vec<_>>(),
            "std": pred.iter().map(|p| p.1.sqrt()).collect::<Vec<_>>(),
            "ei": ei,
            "next": next[0],
            "lengthscale": surface.gp.hyper().lengthscales[0],
            "observations": observations,
        }))
    })())
}

fn branin(x: &[f64]) -> f64 {
    use std::f64::consts::PI;
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    (x[1] - b * x[0] * x[0] + c * x[0] - 6.0).powi(2) + 10.0 * (1.0 - 1.0 / (8.0 * PI)) * x[0].cos() + 10.0
}

/// DIRECT on Branin over `[-5, 10] x [0, 15]`: every rectangle of the final
/// partition (in unit coordinates) and every evaluated point.
#[wasm_bindgen]
pub fn direct_branin(budget: usize) -> String {
    finish((|| {
        let bounds = SearchBox::new(vec![-5.0, 0.0], vec![10.0, 15.0])?;
        let mut run = Direct::new(
            branin,
            bounds,
            DirectConfig {
                budget: budget.clamp(1, 5000),
                epsilon: 1e-4,
            },
        )?;
        while run.step() {}
        let rects: Vec<Value> = run
            .rects()
            .iter()
            .map(|r| json!({ "center": r.center, "size": [r.side(0), r.side(1)], "value": r.f_center }))
            .collect();
        let result = run.finish()?;
        let points: Vec<[f64; 3]> = result.evaluations.iter().map(|(x, f)| [x[0], x[1], *f]).collect();
        Ok(json!({
            "rects": rects,
            "points": points,
            "best": result.best_point,
            "best_value": result.best_value,
            "evaluations": result.eval_count,
        }))
    })())
}
