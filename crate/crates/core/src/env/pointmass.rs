use super::spec::EnvSpec;

/// Semi-implicit Euler step of a point mass with linear drag. Positions that
/// end up inside an obstacle are projected radially onto its boundary and the
/// inward normal velocity is removed, so the mass slides along the surface.
///
/// State layout: `[px, py, vx, vy]`; the action is an acceleration and is
/// expected to be clipped already.
pub fn step_pointmass(state: &[f64], action: &[f64], spec: &EnvSpec) -> Vec<f64> {
    let dt = spec.dt;
    let mut v = [
        state[2] + dt * (action[0] - spec.drag * state[2]),
        state[3] + dt * (action[1] - spec.drag * state[3]),
    ];
    let mut p = [state[0] + dt * v[0], state[1] + dt * v[1]];

    // Obstacles may touch, so repeat until no projection was needed.
    for _ in 0..8 {
        let mut moved = false;
        for ob in &spec.obstacles {
            let dx = p[0] - ob.center[0];
            let dy = p[1] - ob.center[1];
            let d = (dx * dx + dy * dy).sqrt();
            if d >= ob.radius {
                continue;
            }
            let (nx, ny) = if d > 1e-12 {
                (dx / d, dy / d)
            } else {
                // dead center: push back toward where we came from
                let (bx, by) = (state[0] - ob.center[0], state[1] - ob.center[1]);
                let b = (bx * bx + by * by).sqrt();
                if b > 1e-12 {
                    (bx / b, by / b)
                } else {
                    (1.0, 0.0)
                }
            };
            p = [ob.center[0] + ob.radius * nx, ob.center[1] + ob.radius * ny];
            let vn = v[0] * nx + v[1] * ny;
            if vn < 0.0 {
                v = [v[0] - vn * nx, v[1] - vn * ny];
            }
            moved = true;
        }
        if !moved {
            break;
        }
    }
    vec![p[0], p[1], v[0], v[1]]
}
