use std::f64::consts::PI;

/// Cosine annealing with warm restarts, evaluated at a 0-based epoch.
///
/// Cycle `i` lasts `t0 * t_mult^i` epochs; within a cycle the rate falls from
/// `lr_max` to `eta_min` along half a cosine and jumps back at each restart.
pub fn cosine_warm_restart_lr(epoch: usize, t0: usize, t_mult: usize, lr_max: f64, eta_min: f64) -> f64 {
    assert!(t0 >= 1 && t_mult >= 1, "t0 and t_mult must be at least 1");
    let (mut t_cur, mut t_i) = (epoch, t0);
    while t_cur >= t_i {
        t_cur -= t_i;
        t_i *= t_mult;
    }
    eta_min + 0.5 * (lr_max - eta_min) * (1.0 + (PI * t_cur as f64 / t_i as f64).cos())
}
