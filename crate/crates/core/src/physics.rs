//! Ballistic truth model with quadratic drag, the drag-free parabolic range,
//! and a fixed-step RK4 integrator used to cross-check the closed forms.
//!
//! Drag acts on each velocity component separately:
//!
//! ```text
//! m dvx/dt = -C_D vx^2
//! m dvz/dt = -m g - C_D vz |vz|
//! ```
//!
//! The vertical motion splits into an ascent branch (closed-form apex time and
//! height) and a descent branch whose altitude is closed-form in time; the
//! flight time is the root of the descent altitude and is found by bisection.
//! Horizontal distance at time `t` is `(m/C_D) ln(1 + (C_D/m) vx0 t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Drag-to-weight ratio `C_D v^2 / (m g)` below which the vacuum closed forms are used.
const VACUUM_THRESHOLD: f64 = 1e-10;

const MAX_BRACKET_DOUBLINGS: u32 = 60;
const BISECTION_TOL_S: f64 = 1e-12;

/// Default step cap for the RK4 oracle.
pub const ORACLE_MAX_STEPS: usize = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    /// kg
    pub mass: f64,
    /// m/s²
    pub gravity: f64,
    /// kg/m
    pub drag_coeff: f64,
}

impl PhysicsParams {
    pub fn new(mass: f64, gravity: f64, drag_coeff: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mass must be > 0, got {mass}"
            )));
        }
        if !(gravity.is_finite() && gravity > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gravity must be > 0, got {gravity}"
            )));
        }
        if !(drag_coeff.is_finite() && drag_coeff >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "drag coefficient must be >= 0, got {drag_coeff}"
            )));
        }
        Ok(Self {
            mass,
            gravity,
            drag_coeff,
        })
    }

    /// Truth constants used to generate the training data: g = 9.8 m/s²,
    /// C_D/m = 0.01 1/m with the mass fixed at 1 kg.
    pub fn reference() -> Self {
        Self {
            mass: 1.0,
            gravity: 9.8,
            drag_coeff: 0.01,
        }
    }

    pub fn vacuum(gravity: f64) -> Result<Self> {
        Self::new(1.0, gravity, 0.0)
    }

    fn drag_per_mass(&self) -> f64 {
        self.drag_coeff / self.mass
    }

    /// Terminal speed `sqrt(m g / C_D)`.
    pub fn terminal_speed(&self) -> f64 {
        (self.mass * self.gravity / self.drag_coeff).sqrt()
    }

    /// Rate `sqrt(C_D g / m)` of the tanh/tan solutions, 1/s.
    fn drag_rate(&self) -> f64 {
        (self.drag_coeff * self.gravity / self.mass).sqrt()
    }

    fn near_vacuum(&self, speed: f64) -> bool {
        self.drag_coeff * speed * speed / (self.mass * self.gravity) < VACUUM_THRESHOLD
    }
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// A firing decision: muzzle speed and elevation angle.
///
/// Angles are carried in degrees and converted to radians only through
/// [`LaunchInput::psi_rad`]. The angle must lie in `(0°, 90°]`; straight up is
/// accepted so that an inclusive 1°..90° grid is valid, and has zero range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaunchInput {
    /// m/s
    pub v0: f64,
    /// degrees
    pub psi: f64,
}

impl LaunchInput {
    pub fn new(v0: f64, psi_deg: f64) -> Result<Self> {
        if !(v0.is_finite() && v0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "launch speed must be > 0, got {v0}"
            )));
        }
        if !(psi_deg.is_finite() && psi_deg > 0.0 && psi_deg <= 90.0) {
            return Err(Error::InvalidParameter(format!(
                "launch angle must lie in (0, 90] degrees, got {psi_deg}"
            )));
        }
        Ok(Self { v0, psi: psi_deg })
    }

    pub fn psi_rad(&self) -> f64 {
        self.psi.to_radians()
    }

    pub fn is_vertical(&self) -> bool {
        self.psi >= 90.0
    }

    /// Initial horizontal and vertical velocity components.
    pub fn velocity_components(&self) -> (f64, f64) {
        if self.is_vertical() {
            return (0.0, self.v0);
        }
        let (s, c) = self.psi_rad().sin_cos();
        (self.v0 * c, self.v0 * s)
    }

    /// Coordinates as a GP input point `[v0, psi]`.
    pub fn as_point(&self) -> [f64; 2] {
        [self.v0, self.psi]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub t: f64,
    pub x: f64,
    pub z: f64,
    pub vx: f64,
    pub vz: f64,
}

/// Time at which the vertical velocity vanishes.
pub fn peak_time(params: &PhysicsParams, vz0: f64) -> f64 {
    if params.near_vacuum(vz0) {
        return vz0 / params.gravity;
    }
    let a = (vz0 * (params.drag_coeff / (params.mass * params.gravity)).sqrt()).atan();
    a / params.drag_rate()
}

/// Apex altitude.
///
/// The ascent solution `z(t) = (m/C_D)(ln|cos(k t - a)| - ln|cos a|)` evaluated
/// at `t_p = a / k` reduces to `(m / 2C_D) ln(1 + C_D vz0² / (m g))`.
pub fn peak_height(params: &PhysicsParams, vz0: f64) -> f64 {
    if params.near_vacuum(vz0) {
        return vz0 * vz0 / (2.0 * params.gravity);
    }
    let m_over_c = params.mass / params.drag_coeff;
    0.5 * m_over_c * (params.drag_coeff * vz0 * vz0 / (params.mass * params.gravity)).ln_1p()
}

/// `ln cosh(x)` for `x >= 0` without overflow or cancellation.
fn ln_cosh(x: f64) -> f64 {
    if x > 20.0 {
        x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
    } else {
        let s = (0.5 * x).sinh();
        (2.0 * s * s).ln_1p()
    }
}

/// Altitude on the descent branch, `t >= t_peak`.
///
/// Equivalent to `z_p + sqrt(mg/C_D)(t_p - t) + (m/C_D)(ln 2 - ln(exp(2k(t_p - t)) + 1))`,
/// written as `z_p - (m/C_D) ln cosh(k (t - t_p))`.
pub fn descent_altitude(params: &PhysicsParams, z_peak: f64, t_peak: f64, t: f64) -> f64 {
    let tau = t - t_peak;
    let fall_speed = params.gravity * tau.abs();
    if params.near_vacuum(fall_speed.max((2.0 * params.gravity * z_peak.max(0.0)).sqrt())) {
        return z_peak - 0.5 * params.gravity * tau * tau;
    }
    z_peak - params.mass / params.drag_coeff * ln_cosh(params.drag_rate() * tau)
}

/// Time of ground impact, found by bracketed bisection on the descent branch.
pub fn solve_flight_time(params: &PhysicsParams, launch: &LaunchInput) -> Result<f64> {
    let (_, vz0) = launch.velocity_components();
    let t_p = peak_time(params, vz0);
    let z_p = peak_height(params, vz0);
    let z = |t: f64| descent_altitude(params, z_p, t_p, t);

    let lo_init = t_p;
    let mut hi = t_p + 2.0 * vz0 / params.gravity + 1.0;
    let mut doublings = 0;
    while z(hi) > 0.0 {
        if doublings == MAX_BRACKET_DOUBLINGS {
            return Err(Error::BracketExpansion {
                doublings,
                upper: hi,
            });
        }
        hi *= 2.0;
        doublings += 1;
    }

    let mut lo = lo_init;
    while hi - lo > BISECTION_TOL_S {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if z(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Horizontal distance at `t` given the initial horizontal speed.
fn horizontal_distance(params: &PhysicsParams, vx0: f64, t: f64) -> f64 {
    if params.near_vacuum(vx0) {
        return vx0 * t;
    }
    params.mass / params.drag_coeff * (params.drag_per_mass() * vx0 * t).ln_1p()
}

/// Ground range of the truth model.
pub fn impact_distance(params: &PhysicsParams, launch: &LaunchInput) -> Result<f64> {
    if launch.is_vertical() {
        return Ok(0.0);
    }
    let t_f = solve_flight_time(params, launch)?;
    let (vx0, _) = launch.velocity_components();
    Ok(horizontal_distance(params, vx0, t_f))
}

/// Drag-free parabolic range `(2 v0² / g) sin ψ cos ψ`.
pub fn simple_range(gravity: f64, launch: &LaunchInput) -> f64 {
    simple_range_factor(launch) / gravity
}

/// `2 v0² sin ψ cos ψ`, the part of the parabolic range that does not depend on g.
pub fn simple_range_factor(launch: &LaunchInput) -> f64 {
    if launch.is_vertical() {
        return 0.0;
    }
    let (s, c) = launch.psi_rad().sin_cos();
    2.0 * launch.v0 * launch.v0 * s * c
}

fn derivative(params: &PhysicsParams, s: &TrajectoryState) -> [f64; 4] {
    let k = params.drag_per_mass();
    [
        s.vx,
        s.vz,
        -k * s.vx * s.vx.abs(),
        -params.gravity - k * s.vz * s.vz.abs(),
    ]
}

fn rk4_step(params: &PhysicsParams, s: &TrajectoryState, dt: f64) -> TrajectoryState {
    let shift = |d: &[f64; 4], h: f64| TrajectoryState {
        t: s.t + h,
        x: s.x + h * d[0],
        z: s.z + h * d[1],
        vx: s.vx + h * d[2],
        vz: s.vz + h * d[3],
    };
    let k1 = derivative(params, s);
    let k2 = derivative(params, &shift(&k1, 0.5 * dt));
    let k3 = derivative(params, &shift(&k2, 0.5 * dt));
    let k4 = derivative(params, &shift(&k3, dt));
    let c = |i: usize| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
    TrajectoryState {
        t: s.t + dt,
        x: s.x + dt * c(0),
        z: s.z + dt * c(1),
        vx: s.vx + dt * c(2),
        vz: s.vz + dt * c(3),
    }
}

/// Steps the ODE from launch until the projectile crosses `z = 0` on descent,
/// calling `visit` on every state. The final state is linearly interpolated
/// onto `z = 0`.
fn integrate_with(
    params: &PhysicsParams,
    launch: &LaunchInput,
    dt: f64,
    max_steps: usize,
    mut visit: impl FnMut(&TrajectoryState),
) -> Result<TrajectoryState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be > 0, got {dt}"
        )));
    }
    let (vx, vz) = launch.velocity_components();
    let mut state = TrajectoryState {
        t: 0.0,
        x: 0.0,
        z: 0.0,
        vx,
        vz,
    };
    visit(&state);
    for _ in 0..max_steps {
        let next = rk4_step(params, &state, dt);
        if next.z <= 0.0 && next.vz < 0.0 {
            let frac = state.z / (state.z - next.z);
            let lerp = |a: f64, b: f64| a + frac * (b - a);
            let landed = TrajectoryState {
                t: lerp(state.t, next.t),
                x: lerp(state.x, next.x),
                z: 0.0,
                vx: lerp(state.vx, next.vx),
                vz: lerp(state.vz, next.vz),
            };
            visit(&landed);
            return Ok(landed);
        }
        state = next;
        visit(&state);
    }
    Err(Error::StepCapExceeded(max_steps))
}

/// Full RK4 trajectory at fixed step `dt`, ending at ground impact.
pub fn integrate_trajectory_oracle(
    params: &PhysicsParams,
    launch: &LaunchInput,
    dt: f64,
) -> Result<Vec<TrajectoryState>> {
    let mut states = Vec::new();
    integrate_with(params, launch, dt, ORACLE_MAX_STEPS, |s| states.push(*s))?;
    Ok(states)
}

/// Terminal state of the RK4 oracle without storing the trajectory.
pub fn oracle_impact(
    params: &PhysicsParams,
    launch: &LaunchInput,
    dt: f64,
) -> Result<TrajectoryState> {
    integrate_with(params, launch, dt, ORACLE_MAX_STEPS, |_| {})
}
