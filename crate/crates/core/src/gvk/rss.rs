//! Responsibility-sensitive minimum safe distances.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RssError {
    #[error("`{0}` must be a finite number")]
    NonFinite(&'static str),
    #[error("`{0}` must be non-negative")]
    Negative(&'static str),
    #[error("`{0}` must be positive")]
    NonPositive(&'static str),
}

fn finite(name: &'static str, x: f64) -> Result<f64, RssError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(RssError::NonFinite(name))
    }
}

fn non_negative(name: &'static str, x: f64) -> Result<f64, RssError> {
    if finite(name, x)? < 0.0 {
        return Err(RssError::Negative(name));
    }
    Ok(x)
}

fn positive(name: &'static str, x: f64) -> Result<f64, RssError> {
    if finite(name, x)? <= 0.0 {
        return Err(RssError::NonPositive(name));
    }
    Ok(x)
}

/// Gap the rear vehicle needs so that, if the front vehicle brakes at
/// `a_brake_max_front` while the rear one keeps accelerating at
/// `a_accel_max` for the response time `rho` and then brakes at
/// `a_brake_min`, the two never touch.
///
/// `max(0, v_r ρ + ½ a ρ² + (v_r + ρ a)² / (2 b_min) − v_f² / (2 b_max))`
///
/// Non-decreasing in `v_rear`, `rho` and `a_brake_max_front`; non-increasing
/// in `v_front`.
pub fn rss_min_longitudinal(
    v_rear: f64,
    v_front: f64,
    rho: f64,
    a_accel_max: f64,
    a_brake_min: f64,
    a_brake_max_front: f64,
) -> Result<f64, RssError> {
    let v_r = non_negative("v_rear", v_rear)?;
    let v_f = non_negative("v_front", v_front)?;
    let rho = positive("rho", rho)?;
    let a = positive("a_accel_max", a_accel_max)?;
    let b_min = positive("a_brake_min", a_brake_min)?;
    let b_max = positive("a_brake_max_front", a_brake_max_front)?;
    let v_after = v_r + rho * a;
    let d = v_r * rho + 0.5 * a * rho * rho + v_after * v_after / (2.0 * b_min) - v_f * v_f / (2.0 * b_max);
    Ok(d.max(0.0))
}

/// Lateral analogue for two side-by-side vehicles. `u_a` and `u_b` are
/// each vehicle's lateral speed toward the other (negative when moving
/// apart); both may accelerate toward each other at `a_accel_max` for
/// `rho`, then brake laterally at `a_brake_min`. `margin` is added on top.
pub fn rss_min_lateral(
    u_a: f64,
    u_b: f64,
    rho: f64,
    a_accel_max: f64,
    a_brake_min: f64,
    margin: f64,
) -> Result<f64, RssError> {
    let u_a = finite("u_a", u_a)?;
    let u_b = finite("u_b", u_b)?;
    let rho = positive("rho", rho)?;
    let a = positive("a_accel_max", a_accel_max)?;
    let b = positive("a_brake_min", a_brake_min)?;
    let margin = non_negative("margin", margin)?;
    // Braking distance only counts while still closing after the response.
    let side = |u: f64| {
        let u_rho = (u + rho * a).max(0.0);
        (2.0 * u + rho * a) / 2.0 * rho + u_rho * u_rho / (2.0 * b)
    };
    Ok(margin + (side(u_a) + side(u_b)).max(0.0))
}
