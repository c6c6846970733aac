use super::spec::{EnvSpec, PusherGeometry};

/// End-effector position of the planar three-link arm based at the origin.
pub fn forward_kinematics(q: &[f64], geom: &PusherGeometry) -> [f64; 2] {
    let mut angle = 0.0;
    let mut e = [0.0, 0.0];
    for (qi, l) in q.iter().zip(geom.link_lengths) {
        angle += qi;
        e[0] += l * angle.cos();
        e[1] += l * angle.sin();
    }
    e
}

/// Kinematic arm step followed by quasi-static disc-disc pushing.
///
/// State layout: `[q1, q2, q3, ox, oy]`. The two actions are joint velocities
/// for q1 and q2; q3 is passive and never moves. If the end-effector disc
/// overlaps the object disc after the arm moves, the object is translated
/// along the contact normal by exactly the penetration depth.
pub fn step_pusher(state: &[f64], action: &[f64], spec: &EnvSpec) -> Vec<f64> {
    let geom = spec.pusher.as_ref().expect("pusher geometry");
    let mut next = state.to_vec();
    for j in 0..2 {
        let [lo, hi] = geom.joint_limits[j];
        next[j] = (state[j] + spec.dt * action[j]).clamp(lo, hi);
    }
    let e = forward_kinematics(&next[0..3], geom);
    let (dx, dy) = (next[3] - e[0], next[4] - e[1]);
    let d = (dx * dx + dy * dy).sqrt();
    let contact = geom.effector_radius + geom.object_radius;
    if d < contact {
        let (nx, ny) = if d > 1e-12 { (dx / d, dy / d) } else { (1.0, 0.0) };
        let depth = contact - d;
        next[3] += depth * nx;
        next[4] += depth * ny;
    }
    next
}
