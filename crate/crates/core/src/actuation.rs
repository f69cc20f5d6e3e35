//! Low-level controller and simulated plant.
//!
//! A discrete PID loop tracks a shaft-velocity setpoint by adjusting a
//! normalized PWM duty. The duty becomes a motor voltage clamped to `v_max`,
//! which bounds current and therefore torque. A proportional outer loop on
//! spool angle shapes the velocity setpoint near the closure limits.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intent::Token;

/// Control loop period (100 Hz).
pub const CONTROL_DT: f64 = 0.01;
/// Spool radius of the 30 mm pulley, meters.
pub const SPOOL_RADIUS: f64 = 0.015;
pub const DEFAULT_FULL_STROKE: f64 = 0.06;
/// Battery voltage.
pub const SUPPLY_VOLTAGE: f64 = 11.1;
/// Closure at or above which the hand counts as closed.
pub const CLOSED_THRESHOLD: f64 = 0.95;
/// Closure at or below which the hand counts as open.
pub const OPEN_THRESHOLD: f64 = 0.02;

/// Upper bound on an RK4 sub-step inside [`plant_step`].
const MAX_SUBSTEP: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActuationError {
    #[error("time step must be positive, got {0}")]
    NonpositiveDt(f64),
    #[error("full stroke must be positive, got {0}")]
    NonpositiveStroke(f64),
    #[error("unknown command byte 0x{0:02x}")]
    UnknownCommand(u8),
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("invalid plant parameters: {0}")]
    InvalidPlant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub fn validate(&self) -> Result<(), ActuationError> {
        for (name, g) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(ActuationError::InvalidGains(format!("{name} = {g}")));
            }
        }
        Ok(())
    }
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 0.004,
            ki: 0.15,
            kd: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    /// Accumulated error·seconds.
    pub integral: f64,
    pub prev_error: f64,
    /// Last duty in [-1, 1].
    pub output: f64,
    /// False until the first sample, which has no predecessor to difference.
    pub primed: bool,
}

impl Default for PidState {
    fn default() -> Self {
        Self {
            integral: 0.0,
            prev_error: 0.0,
            output: 0.0,
            primed: false,
        }
    }
}

/// Anti-windup behavior of [`pid_step_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntiWindup {
    /// Skip integration while the output is saturated in the error's direction.
    pub freeze_when_saturated: bool,
    /// Absolute bound on the integral; infinite disables it.
    pub integral_limit: f64,
}

impl AntiWindup {
    pub fn disabled() -> Self {
        Self {
            freeze_when_saturated: false,
            integral_limit: f64::INFINITY,
        }
    }

    /// Freezing plus a bound at which the integral term alone saturates.
    pub fn for_gains(gains: &PidGains) -> Self {
        Self {
            freeze_when_saturated: true,
            integral_limit: if gains.ki > 0.0 { 1.0 / gains.ki } else { f64::INFINITY },
        }
    }
}

/// Discrete PID update with default anti-windup.
pub fn pid_step(
    gains: &PidGains,
    state: &PidState,
    error: f64,
    dt: f64,
) -> Result<(PidState, f64), ActuationError> {
    pid_step_with(gains, state, error, dt, &AntiWindup::for_gains(gains))
}

/// Trapezoidal integral, backward-difference derivative, output clamped to
/// [-1, 1]. The first sample integrates as a rectangle and has zero
/// derivative.
pub fn pid_step_with(
    gains: &PidGains,
    state: &PidState,
    error: f64,
    dt: f64,
    aw: &AntiWindup,
) -> Result<(PidState, f64), ActuationError> {
    if !(dt > 0.0) {
        return Err(ActuationError::NonpositiveDt(dt));
    }
    let prev = if state.primed { state.prev_error } else { error };
    let derivative = (error - prev) / dt;
    let candidate = (state.integral + 0.5 * (error + prev) * dt)
        .clamp(-aw.integral_limit, aw.integral_limit);
    let raw = |integral: f64| gains.kp * error + gains.ki * integral + gains.kd * derivative;

    let mut integral = candidate;
    let mut u_raw = raw(candidate);
    if aw.freeze_when_saturated && u_raw.abs() > 1.0 && u_raw.signum() == error.signum() {
        // integrating further would only deepen saturation
        integral = state.integral;
        u_raw = raw(integral);
    }
    let u = u_raw.clamp(-1.0, 1.0);
    Ok((
        PidState {
            integral,
            prev_error: error,
            output: u,
            primed: true,
        },
        u,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    /// Rotor inertia, kg·m².
    pub j: f64,
    /// Viscous friction, N·m·s.
    pub b: f64,
    /// Torque constant, N·m/A.
    pub kt: f64,
    /// Back-EMF constant, V·s/rad.
    pub ke: f64,
    /// Winding resistance, Ω.
    pub rm: f64,
    pub v_supply: f64,
    /// Voltage clamp that bounds torque.
    pub v_max: f64,
}

impl MotorParams {
    pub fn validate(&self) -> Result<(), ActuationError> {
        let fields = [
            ("j", self.j),
            ("b", self.b),
            ("kt", self.kt),
            ("ke", self.ke),
            ("rm", self.rm),
            ("v_supply", self.v_supply),
            ("v_max", self.v_max),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(ActuationError::InvalidPlant(format!("{name} must be positive, got {v}")));
            }
        }
        if self.v_max > self.v_supply {
            return Err(ActuationError::InvalidPlant("v_max exceeds v_supply".into()));
        }
        Ok(())
    }

    /// Mechanical time constant `J·Rm / (Kt·Ke + b·Rm)`.
    pub fn time_constant(&self) -> f64 {
        self.j * self.rm / (self.kt * self.ke + self.b * self.rm)
    }

    pub fn applied_voltage(&self, u: f64) -> f64 {
        (u * self.v_supply).clamp(-self.v_max, self.v_max)
    }

    pub fn current(&self, voltage: f64, omega: f64) -> f64 {
        (voltage - self.ke * omega) / self.rm
    }

    /// `Kt·(V_max + Ke·|ω|)/Rm`
    pub fn torque_bound(&self, omega_abs: f64) -> f64 {
        self.kt * (self.v_max + self.ke * omega_abs) / self.rm
    }
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            j: 2e-5,
            b: 1e-4,
            kt: 0.05,
            ke: 0.05,
            rm: 2.0,
            v_supply: SUPPLY_VOLTAGE,
            v_max: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorPlant {
    /// rad/s
    pub omega: f64,
    /// rad
    pub theta: f64,
    pub params: MotorParams,
}

impl MotorPlant {
    pub fn new(params: MotorParams) -> Self {
        Self {
            omega: 0.0,
            theta: 0.0,
            params,
        }
    }

    /// Motor torque `Kt·i` for duty `u` at the current speed.
    pub fn torque(&self, u: f64) -> f64 {
        let p = &self.params;
        p.kt * p.current(p.applied_voltage(u), self.omega)
    }
}

/// Advances the plant by `dt` with the duty held, using fixed RK4 sub-steps.
pub fn plant_step(plant: &MotorPlant, u: f64, dt: f64) -> Result<MotorPlant, ActuationError> {
    if !(dt > 0.0) {
        return Err(ActuationError::NonpositiveDt(dt));
    }
    let p = plant.params;
    let voltage = p.applied_voltage(u.clamp(-1.0, 1.0));
    let accel = |omega: f64| (p.kt * p.current(voltage, omega) - p.b * omega) / p.j;
    let n = (dt / MAX_SUBSTEP).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let (mut omega, mut theta) = (plant.omega, plant.theta);
    for _ in 0..n {
        let k1w = accel(omega);
        let k1t = omega;
        let k2w = accel(omega + 0.5 * h * k1w);
        let k2t = omega + 0.5 * h * k1w;
        let k3w = accel(omega + 0.5 * h * k2w);
        let k3t = omega + 0.5 * h * k2w;
        let k4w = accel(omega + h * k3w);
        let k4t = omega + h * k3w;
        omega += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        theta += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
    }
    Ok(MotorPlant { omega, theta, params: p })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableState {
    /// Meters.
    pub spool_radius: f64,
    /// Meters.
    pub cable_pulled: f64,
    pub closure: f64,
}

impl CableState {
    pub fn from_theta(theta: f64, spool_radius: f64, full_stroke: f64) -> Self {
        let cable_pulled = theta * spool_radius;
        let mut c = Self {
            spool_radius,
            cable_pulled,
            closure: 0.0,
        };
        c.closure = closure_of(&c, full_stroke).unwrap_or(0.0);
        c
    }
}

/// `clamp(cable_pulled / full_stroke, 0, 1)`
pub fn closure_of(cable: &CableState, full_stroke: f64) -> Result<f64, ActuationError> {
    if !(full_stroke > 0.0) {
        return Err(ActuationError::NonpositiveStroke(full_stroke));
    }
    Ok((cable.cable_pulled / full_stroke).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    #[default]
    Idle,
    Closing,
    Opening,
    /// Velocity hold at a closure limit.
    Holding,
    Stopped,
}

impl ControlMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControlMode::Idle => "idle",
            ControlMode::Closing => "closing",
            ControlMode::Opening => "opening",
            ControlMode::Holding => "holding",
            ControlMode::Stopped => "stopped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub gains: PidGains,
    pub plant: MotorParams,
    /// Velocity setpoint magnitude, rad/s.
    pub delta_v: f64,
    /// Outer position loop gain, 1/s.
    pub position_gain: f64,
    /// Angle error below which the outer loop switches to velocity hold, rad.
    pub hold_tolerance: f64,
    pub spool_radius: f64,
    pub full_stroke: f64,
    pub dt: f64,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ActuationError> {
        self.gains.validate()?;
        self.plant.validate()?;
        if !(self.dt > 0.0) {
            return Err(ActuationError::NonpositiveDt(self.dt));
        }
        if !(self.full_stroke > 0.0) {
            return Err(ActuationError::NonpositiveStroke(self.full_stroke));
        }
        if !(self.delta_v > 0.0 && self.position_gain > 0.0 && self.spool_radius > 0.0) {
            return Err(ActuationError::InvalidGains(
                "delta_v, position_gain and spool_radius must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Spool angle at full closure.
    pub fn theta_full(&self) -> f64 {
        self.full_stroke / self.spool_radius
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            gains: PidGains::default(),
            plant: MotorParams::default(),
            delta_v: 5.0,
            position_gain: 10.0,
            hold_tolerance: 0.02,
            spool_radius: SPOOL_RADIUS,
            full_stroke: DEFAULT_FULL_STROKE,
            dt: CONTROL_DT,
        }
    }
}

/// Per-tick telemetry line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    /// Seconds.
    pub t: f64,
    pub setpoint: f64,
    pub omega: f64,
    pub u: f64,
    pub closure: f64,
    pub phase: String,
    /// Motor torque `Kt·i`, N·m.
    #[serde(default)]
    pub torque: f64,
}

/// Velocity loop, outer position loop and plant, advanced one tick at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub config: ControllerConfig,
    pub pid: PidState,
    pub plant: MotorPlant,
    pub mode: ControlMode,
    /// Closure the outer loop is driving toward, if any.
    pub target_closure: Option<f64>,
    /// Current velocity setpoint, rad/s.
    pub setpoint: f64,
    /// Control ticks since construction.
    pub ticks: u64,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Result<Self, ActuationError> {
        config.validate()?;
        Ok(Self {
            pid: PidState::default(),
            plant: MotorPlant::new(config.plant),
            mode: ControlMode::Idle,
            target_closure: None,
            setpoint: 0.0,
            ticks: 0,
            config,
        })
    }

    /// Simulated seconds since construction.
    pub fn time(&self) -> f64 {
        self.ticks as f64 * self.config.dt
    }

    pub fn cable(&self) -> CableState {
        CableState::from_theta(self.plant.theta, self.config.spool_radius, self.config.full_stroke)
    }

    pub fn closure(&self) -> f64 {
        self.cable().closure
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.config).expect("config was validated");
    }

    /// Applies a command byte (`G`, `R` or `S`).
    pub fn execute_byte(&mut self, byte: u8) -> Result<(), ActuationError> {
        let token = Token::from_byte(byte).ok_or(ActuationError::UnknownCommand(byte))?;
        self.execute(token);
        Ok(())
    }

    pub fn execute(&mut self, token: Token) {
        match token {
            Token::Grip => {
                self.mode = ControlMode::Closing;
                self.target_closure = Some(1.0);
                self.setpoint = self.config.delta_v;
            }
            Token::Release => {
                self.mode = ControlMode::Opening;
                self.target_closure = Some(0.0);
                self.setpoint = -self.config.delta_v;
            }
            Token::Stop => {
                self.mode = ControlMode::Stopped;
                self.target_closure = None;
                self.setpoint = 0.0;
            }
        }
    }

    /// Sets a raw velocity setpoint with the outer loop disengaged.
    pub fn set_velocity(&mut self, setpoint: f64) {
        self.mode = ControlMode::Idle;
        self.target_closure = None;
        self.setpoint = setpoint;
    }

    fn update_setpoint(&mut self) {
        let Some(target) = self.target_closure else {
            return;
        };
        let theta_target = target * self.config.theta_full();
        let err = theta_target - self.plant.theta;
        if err.abs() <= self.config.hold_tolerance {
            self.mode = ControlMode::Holding;
            self.target_closure = None;
            self.setpoint = 0.0;
            return;
        }
        let dv = self.config.delta_v;
        self.setpoint = (self.config.position_gain * err).clamp(-dv, dv);
    }

    /// One control tick: outer loop, PID, plant.
    pub fn tick(&mut self) -> Telemetry {
        let dt = self.config.dt;
        self.update_setpoint();
        let error = self.setpoint - self.plant.omega;
        let (pid, u) = pid_step(&self.config.gains, &self.pid, error, dt).expect("dt validated");
        self.pid = pid;
        let torque = self.plant.torque(u);
        self.plant = plant_step(&self.plant, u, dt).expect("dt validated");
        self.ticks += 1;
        Telemetry {
            t: self.time(),
            setpoint: self.setpoint,
            omega: self.plant.omega,
            u,
            closure: self.closure(),
            phase: self.mode.as_str().to_string(),
            torque,
        }
    }
}

/// Single-slot command mailbox; a newer command overwrites an unread one.
#[derive(Debug, Default)]
pub struct CommandMailbox {
    slot: Mutex<Option<Token>>,
}

impl CommandMailbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn post(&self, token: Token) {
        *self.slot.lock().unwrap_or_else(|e| e.into_inner()) = Some(token);
    }

    pub fn take(&self) -> Option<Token> {
        self.slot.lock().unwrap_or_else(|e| e.into_inner()).take()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportional_clamps() {
        let g = PidGains { kp: 2.0, ki: 0.0, kd: 0.0 };
        let (_, u) = pid_step(&g, &PidState::default(), 1.5, 0.01).unwrap();
        assert_eq!(u, 1.0);
    }

    #[test]
    fn integral_accumulates() {
        let g = PidGains { kp: 0.0, ki: 1.0, kd: 0.0 };
        let mut s = PidState::default();
        let mut u = 0.0;
        for _ in 0..200 {
            let (ns, nu) = pid_step(&g, &s, 0.4, 0.01).unwrap();
            s = ns;
            u = nu;
        }
        assert!((u - 0.8).abs() < 1e-6, "u = {u}");
    }

    #[test]
    fn quiescent() {
        let (s, u) = pid_step(&PidGains::default(), &PidState::default(), 0.0, 0.01).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(s.integral, 0.0);
    }

    #[test]
    fn nonpositive_dt() {
        assert_eq!(
            pid_step(&PidGains::default(), &PidState::default(), 1.0, 0.0),
            Err(ActuationError::NonpositiveDt(0.0))
        );
        assert!(plant_step(&MotorPlant::new(MotorParams::default()), 0.0, -1.0).is_err());
    }

    #[test]
    fn integral_frozen_while_saturated() {
        let g = PidGains { kp: 2.0, ki: 1.0, kd: 0.0 };
        let (s, u) = pid_step(&g, &PidState::default(), 1.0, 0.01).unwrap();
        assert_eq!(u, 1.0);
        assert_eq!(s.integral, 0.0);
        let (s, _) = pid_step_with(&g, &PidState::default(), 1.0, 0.01, &AntiWindup::disabled()).unwrap();
        assert!(s.integral > 0.0);
    }

    #[test]
    fn derivative_backward_difference() {
        let g = PidGains { kp: 0.0, ki: 0.0, kd: 0.01 };
        let (s, u) = pid_step(&g, &PidState::default(), 1.0, 0.01).unwrap();
        assert_eq!(u, 0.0);
        let (_, u) = pid_step(&g, &s, 1.5, 0.01).unwrap();
        assert!((u - 0.5).abs() < 1e-12);
    }

    #[test]
    fn plant_equilibrium() {
        let p = MotorPlant::new(MotorParams::default());
        assert_eq!(plant_step(&p, 0.0, 0.01).unwrap(), p);
    }

    #[test]
    fn plant_no_load_speed() {
        let params = MotorParams {
            b: 1e-12,
            ..MotorParams::default()
        };
        let tau = params.time_constant();
        let target = params.v_max / params.ke;
        let mut p = MotorPlant::new(params);
        let steps = (5.0 * tau / 1e-3).ceil() as usize;
        for _ in 0..steps {
            p = plant_step(&p, 1.0, 1e-3).unwrap();
        }
        assert!(((p.omega - target) / target).abs() < 0.01, "omega {}", p.omega);
    }

    #[test]
    fn first_step_uses_clamped_voltage() {
        let params = MotorParams::default();
        assert_eq!(params.applied_voltage(1.0), params.v_max);
        let p = MotorPlant::new(params);
        assert!((p.torque(1.0) - params.kt * params.v_max / params.rm).abs() < 1e-15);
    }

    #[test]
    fn coasting_decays() {
        let mut p = MotorPlant::new(MotorParams::default());
        p.omega = 50.0;
        let mut last = p.omega.abs();
        for _ in 0..200 {
            p = plant_step(&p, 0.0, 0.01).unwrap();
            assert!(p.omega.abs() <= last);
            last = p.omega.abs();
        }
    }

    #[test]
    fn closure_examples() {
        let c = |pulled| CableState {
            spool_radius: SPOOL_RADIUS,
            cable_pulled: pulled,
            closure: 0.0,
        };
        assert_eq!(closure_of(&c(0.0), 0.06).unwrap(), 0.0);
        assert_eq!(closure_of(&c(0.06), 0.06).unwrap(), 1.0);
        assert!((CableState::from_theta(2.0, 0.015, 0.06).closure - 0.5).abs() < 1e-12);
        assert_eq!(
            closure_of(&c(0.01), 0.0),
            Err(ActuationError::NonpositiveStroke(0.0))
        );
        assert_eq!(closure_of(&c(-0.01), 0.06).unwrap(), 0.0);
    }

    #[test]
    fn grip_closes_monotonically() {
        let mut c = Controller::new(ControllerConfig::default()).unwrap();
        c.execute(Token::Grip);
        assert_eq!(c.setpoint, c.config.delta_v);
        let mut last = c.closure();
        for _ in 0..100 {
            let t = c.tick();
            assert!(t.closure >= last - 1e-12);
            last = t.closure;
        }
        assert!(last > 0.5);
    }

    #[test]
    fn stop_zeroes_setpoint_immediately() {
        let mut c = Controller::new(ControllerConfig::default()).unwrap();
        c.execute(Token::Grip);
        for _ in 0..20 {
            c.tick();
        }
        c.execute(Token::Stop);
        let t = c.tick();
        assert_eq!(t.setpoint, 0.0);
        assert_eq!(t.phase, "stopped");
    }

    #[test]
    fn release_reopens() {
        let mut c = Controller::new(ControllerConfig::default()).unwrap();
        c.execute(Token::Grip);
        for _ in 0..200 {
            c.tick();
        }
        assert!(c.closure() >= CLOSED_THRESHOLD);
        c.execute(Token::Release);
        let mut steps = 0;
        while c.closure() > OPEN_THRESHOLD {
            c.tick();
            steps += 1;
            assert!(steps < 1000, "never reopened");
        }
    }

    #[test]
    fn unknown_command_byte() {
        let mut c = Controller::new(ControllerConfig::default()).unwrap();
        assert_eq!(c.execute_byte(b'X'), Err(ActuationError::UnknownCommand(b'X')));
        c.execute_byte(b'G').unwrap();
        assert_eq!(c.mode, ControlMode::Closing);
    }

    #[test]
    fn mailbox_newest_wins() {
        let m = CommandMailbox::new();
        m.post(Token::Grip);
        m.post(Token::Stop);
        assert_eq!(m.take(), Some(Token::Stop));
        assert_eq!(m.take(), None);
    }

    #[test]
    fn params_validation() {
        let mut p = MotorParams {
            v_max: 20.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        p.v_max = 8.0;
        p.j = 0.0;
        assert!(p.validate().is_err());
        assert!(PidGains { kp: -1.0, ki: 0.0, kd: 0.0 }.validate().is_err());
    }
}
