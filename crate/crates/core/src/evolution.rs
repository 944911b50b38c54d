//! θ-method time integration of `(∂₀M₀ + M₁ + A)U = F` with a per-step
//! discrete energy balance.

use std::f64::consts::TAU;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::field::{Slot, StateLayout, StateVector};
use crate::grid::Grid;
use crate::material::{AssembledOperators, MaterialConfig};
use crate::operators::assemble_a;
use crate::solver::{PreparedSolver, SolverMethod, DEFAULT_TOLERANCE};
use crate::sparse::{dot, norm, LinearOperator, SparseOperator};

const SYMMETRY_RTOL: f64 = 1e-12;

/// The assembled triple `(M₀, M₁, A)` on a state layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    pub m0: LinearOperator,
    pub m1: LinearOperator,
    pub a: SparseOperator,
    pub layout: StateLayout,
    pub grid: Option<Grid>,
}

impl DiscreteSystem {
    pub fn new(
        m0: LinearOperator,
        m1: LinearOperator,
        a: SparseOperator,
        layout: StateLayout,
        grid: Option<Grid>,
    ) -> Result<Self> {
        let n = layout.dim();
        for (name, r, c) in [
            ("M0", m0.rows(), m0.cols()),
            ("M1", m1.rows(), m1.cols()),
            ("A", a.rows(), a.cols()),
        ] {
            if r != n || c != n {
                return Err(invalid(format!("{name} is {r}x{c}, layout needs {n}x{n}")));
            }
        }
        let asym = m0.relative_asymmetry();
        if asym > SYMMETRY_RTOL {
            return Err(invalid(format!(
                "M0 is not symmetric (relative asymmetry {asym:e})"
            )));
        }
        Ok(Self {
            m0,
            m1,
            a,
            layout,
            grid,
        })
    }

    /// Full 19-component system of a material on a grid.
    pub fn full(m: &MaterialConfig, grid: &Grid) -> Result<Self> {
        if m.cells() != grid.cells() {
            return Err(invalid(format!(
                "material has {} cells, grid has {}",
                m.cells(),
                grid.cells()
            )));
        }
        let ops = AssembledOperators::new(m)?;
        Self::new(
            ops.m0,
            ops.m1,
            assemble_a(grid).a,
            ops.layout,
            Some(grid.clone()),
        )
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// `½⟨M₀U, U⟩`
    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        Ok(0.5 * self.m0.form(u, u)?)
    }
}

/// Scalar time profile of a source channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeProfile {
    Constant,
    /// `sin(2π f t)`
    Sine {
        freq: f64,
    },
    /// Linear rise from 0 to 1 over `duration`, then 1.
    Ramp {
        duration: f64,
    },
    /// 0 before `t0`, 1 from `t0` on.
    Step {
        t0: f64,
    },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Sine { freq } => (TAU * freq * t).sin(),
            TimeProfile::Ramp { duration } => {
                if duration <= 0.0 {
                    if t >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (t / duration).clamp(0.0, 1.0)
                }
            }
            TimeProfile::Step { t0 } => {
                if t >= t0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Time derivative (used for `ψ̇` when `ψ` is given as a profile).
    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant | TimeProfile::Step { .. } => 0.0,
            TimeProfile::Sine { freq } => TAU * freq * (TAU * freq * t).cos(),
            TimeProfile::Ramp { duration } => {
                if duration > 0.0 && (0.0..duration).contains(&t) {
                    1.0 / duration
                } else {
                    0.0
                }
            }
        }
    }
}

/// One source channel: a spatial field on `slot` times a time profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceComponent {
    pub slot: Slot,
    pub field: Vec<f64>,
    pub profile: TimeProfile,
}

/// Right-hand side `F(t)`. Channels `F₀…F₅` map to the slots
/// `v, T, E, H, θ, q` of the state.
#[derive(Clone)]
pub enum SourceTerm {
    Zero,
    Channels(Vec<SourceComponent>),
    /// Arbitrary `t ↦ F(t)` on the whole state vector.
    Function(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
}

impl std::fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SourceTerm::Zero => write!(f, "Zero"),
            SourceTerm::Channels(c) => f.debug_tuple("Channels").field(c).finish(),
            SourceTerm::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl SourceTerm {
    pub fn function(f: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        SourceTerm::Function(Arc::new(f))
    }

    pub fn eval(&self, layout: &StateLayout, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; layout.dim()];
        match self {
            SourceTerm::Zero => {}
            SourceTerm::Channels(chans) => {
                for ch in chans {
                    let range = layout.range(ch.slot).ok_or_else(|| {
                        invalid(format!(
                            "source channel `{}` not in this system",
                            ch.slot.name()
                        ))
                    })?;
                    if ch.field.len() != range.len() {
                        return Err(invalid(format!(
                            "source channel `{}` has {} values, expected {}",
                            ch.slot.name(),
                            ch.field.len(),
                            range.len()
                        )));
                    }
                    let s = ch.profile.eval(t);
                    for (o, v) in out[range].iter_mut().zip(&ch.field) {
                        *o += s * v;
                    }
                }
            }
            SourceTerm::Function(f) => {
                out = f(t);
                if out.len() != layout.dim() {
                    return Err(invalid(format!(
                        "source function returned {} values, expected {}",
                        out.len(),
                        layout.dim()
                    )));
                }
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("source is not finite at t = {t}")));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub dt: f64,
    pub steps: usize,
    pub theta: f64,
}

impl Schedule {
    pub fn new(dt: f64, steps: usize, theta: f64) -> Result<Self> {
        let s = Self { dt, steps, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(invalid("steps must be at least 1"));
        }
        validate_theta(self.theta)
    }
}

fn validate_theta(theta: f64) -> Result<()> {
    if !(0.5..=1.0).contains(&theta) {
        return Err(invalid(format!("theta out of [0.5,1]: {theta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub method: SolverMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            method: SolverMethod::Direct,
        }
    }
}

/// A fixed-step θ-method: the step matrix is factorized once.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    sys: &'a DiscreteSystem,
    dt: f64,
    theta: f64,
    lhs: PreparedSolver,
    /// `M₀/dt − (1−θ)(M₁ + A)`
    rhs_op: LinearOperator,
    /// `M₁ + A`
    k: LinearOperator,
}

impl<'a> Integrator<'a> {
    pub fn new(sys: &'a DiscreteSystem, dt: f64, theta: f64, opts: SolverOptions) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        validate_theta(theta)?;
        let k = sys.m1.add(&LinearOperator::Sparse(sys.a.clone()))?;
        let m0dt = sys.m0.scale(1.0 / dt);
        let lhs_op = m0dt.add(&k.scale(theta))?;
        let rhs_op = m0dt.add(&k.scale(-(1.0 - theta)))?;
        let order = sys.layout.cell_interleaved_order();
        let lhs = PreparedSolver::new(lhs_op, opts.method, opts.tol, Some(&order))?;
        Ok(Self {
            sys,
            dt,
            theta,
            lhs,
            rhs_op,
            k,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// One step from `u` with source value `f`; returns the new state and the
    /// relative residual of the linear solve.
    pub fn step(&self, u: &[f64], f: &[f64]) -> Result<(Vec<f64>, f64)> {
        if u.len() != self.sys.dim() || f.len() != self.sys.dim() {
            return Err(invalid("state or source has the wrong length"));
        }
        let mut rhs = self.rhs_op.apply(u)?;
        for (r, fi) in rhs.iter_mut().zip(f) {
            *r += fi;
        }
        self.lhs.solve(&rhs)
    }

    /// `(M₁ + A)`, used by diagnostics.
    pub fn spatial_and_damping(&self) -> &LinearOperator {
        &self.k
    }
}

/// Single θ-method step:
/// `(M₀/dt + θ(M₁+A)) U' = (M₀/dt − (1−θ)(M₁+A)) U + f_mid`.
pub fn step(
    sys: &DiscreteSystem,
    u: &StateVector,
    f_mid: &[f64],
    dt: f64,
    theta: f64,
    opts: SolverOptions,
) -> Result<StateVector> {
    let integ = Integrator::new(sys, dt, theta, opts)?;
    let (next, _) = integ.step(u.values(), f_mid)?;
    StateVector::from_values(sys.layout.clone(), next)
}

/// One row of the energy log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub step: usize,
    pub time: f64,
    /// `½⟨M₀U, U⟩` at the end of the step.
    pub energy: f64,
    /// `⟨sym(M₁)U*, U*⟩·dt` with `U* = (Uⁿ + Uⁿ⁺¹)/2`.
    pub dissipation: f64,
    /// `⟨F*, U*⟩·dt`
    pub source_work: f64,
    /// `[E(Uⁿ⁺¹) − E(Uⁿ)]/dt + ⟨sym(M₁)U*, U*⟩ − ⟨F*, U*⟩`
    pub balance_residual: f64,
    pub solve_residual: f64,
    /// Euclidean norm of the state at the end of the step.
    pub state_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLog {
    pub rows: Vec<EnergyRow>,
}

impl EnergyLog {
    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy).collect()
    }

    /// `max |E(Uⁿ) − E(U⁰)| / E(U⁰)`
    pub fn max_relative_drift(&self) -> f64 {
        let Some(first) = self.rows.first() else {
            return 0.0;
        };
        let e0 = first.energy;
        self.rows
            .iter()
            .map(|r| (r.energy - e0).abs())
            .fold(0.0, f64::max)
            / e0.abs()
    }
}

/// Result of [`simulate`]. On a solver failure the run stops, `failure` is
/// set and `state`/`log` hold everything up to the last completed step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub state: StateVector,
    pub time: f64,
    pub log: EnergyLog,
    pub failure: Option<Error>,
}

/// Integrates `steps` steps from `u0`, evaluating the source at
/// `tₙ + θ·dt`. `observer` sees the initial state (step 0) and every new
/// state.
pub fn simulate(
    sys: &DiscreteSystem,
    u0: &StateVector,
    src: &SourceTerm,
    schedule: &Schedule,
    opts: SolverOptions,
    mut observer: impl FnMut(usize, f64, &StateVector) -> Result<()>,
) -> Result<Trajectory> {
    schedule.validate()?;
    if u0.layout() != &sys.layout {
        return Err(invalid("initial state layout does not match the system"));
    }
    let integ = Integrator::new(sys, schedule.dt, schedule.theta, opts)?;
    let sym_m1 = sys.m1.sym();
    let dt = schedule.dt;
    let mut u = u0.values().to_vec();
    let mut log = EnergyLog::default();
    log.rows.push(EnergyRow {
        step: 0,
        time: 0.0,
        energy: sys.energy(&u)?,
        dissipation: 0.0,
        source_work: 0.0,
        balance_residual: 0.0,
        solve_residual: 0.0,
        state_norm: norm(&u),
    });
    observer(0, 0.0, u0)?;
    let mut failure = None;
    let mut time = 0.0;
    for n in 0..schedule.steps {
        let t_n = n as f64 * dt;
        let f = src.eval(&sys.layout, t_n + schedule.theta * dt)?;
        let (next, solve_res) = match integ.step(&u, &f) {
            Ok(r) => r,
            Err(e @ Error::SolverFailure { .. }) => {
                failure = Some(e);
                break;
            }
            Err(e) => return Err(e),
        };
        let mid: Vec<f64> = u.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
        let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        // E(U') − E(U) = ⟨M₀(U' − U), U*⟩ for symmetric M₀
        let de = dot(&sys.m0.apply(&diff)?, &mid);
        let diss = sym_m1.form(&mid, &mid)?;
        let work = dot(&f, &mid);
        time = (n + 1) as f64 * dt;
        log.rows.push(EnergyRow {
            step: n + 1,
            time,
            energy: sys.energy(&next)?,
            dissipation: diss * dt,
            source_work: work * dt,
            balance_residual: de / dt + diss - work,
            solve_residual: solve_res,
            state_norm: norm(&next),
        });
        u = next;
        let state = StateVector::from_values(sys.layout.clone(), u.clone())?;
        observer(n + 1, time, &state)?;
    }
    Ok(Trajectory {
        state: StateVector::from_values(sys.layout.clone(), u)?,
        time,
        log,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Slot;
    use crate::sparse::TripletBuilder;
    use nalgebra::DMatrix;

    /// 1-dof system on a one-slot layout.
    fn scalar_system(m0: f64, m1: f64) -> DiscreteSystem {
        let layout = StateLayout::new(&[Slot::Theta], 1);
        let mk = |v: f64| LinearOperator::Dense(DMatrix::from_element(1, 1, v));
        DiscreteSystem::new(mk(m0), mk(m1), SparseOperator::zeros(1, 1), layout, None).unwrap()
    }

    #[test]
    fn backward_euler_decay() {
        let sys = scalar_system(1.0, 1.0);
        let u = StateVector::from_values(sys.layout.clone(), vec![3.0]).unwrap();
        let next = step(&sys, &u, &[0.0], 1.0, 1.0, SolverOptions::default()).unwrap();
        assert_eq!(next.values(), &[1.5]);
    }

    #[test]
    fn midpoint_constant_source() {
        let sys = scalar_system(1.0, 0.0);
        let u = StateVector::zeros(sys.layout.clone());
        let next = step(&sys, &u, &[1.0], 0.1, 0.5, SolverOptions::default()).unwrap();
        assert!((next.values()[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn midpoint_conserves_skew_energy() {
        // 2-dof rotation: M₀ = I, A = [[0, 1], [−1, 0]]
        let layout = StateLayout::new(&[Slot::Theta, Slot::Theta], 1);
        let mut tb = TripletBuilder::new(2, 2);
        tb.push(0, 1, 1.0);
        tb.push(1, 0, -1.0);
        let sys = DiscreteSystem::new(
            LinearOperator::Sparse(SparseOperator::identity(2)),
            LinearOperator::Sparse(SparseOperator::zeros(2, 2)),
            tb.finalize(),
            layout,
            None,
        )
        .unwrap();
        let u0 = StateVector::from_values(sys.layout.clone(), vec![1.0, 0.5]).unwrap();
        let sched = Schedule::new(0.3, 200, 0.5).unwrap();
        let tr = simulate(
            &sys,
            &u0,
            &SourceTerm::Zero,
            &sched,
            SolverOptions::default(),
            |_, _, _| Ok(()),
        )
        .unwrap();
        assert!(tr.log.max_relative_drift() < 1e-12);
        assert_eq!(tr.log.rows.len(), 201);
    }

    #[test]
    fn rejects_theta_out_of_range() {
        assert!(Schedule::new(0.1, 1, 0.3).is_err());
        assert!(Schedule::new(0.0, 1, 0.5).is_err());
        assert!(Schedule::new(0.1, 0, 0.5).is_err());
    }

    #[test]
    fn time_profiles() {
        assert_eq!(TimeProfile::Step { t0: 1.0 }.eval(0.99), 0.0);
        assert_eq!(TimeProfile::Step { t0: 1.0 }.eval(1.0), 1.0);
        assert_eq!(TimeProfile::Ramp { duration: 2.0 }.eval(1.0), 0.5);
        assert_eq!(TimeProfile::Ramp { duration: 2.0 }.eval(3.0), 1.0);
        assert!((TimeProfile::Sine { freq: 0.25 }.eval(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn channel_source_fills_slot() {
        let layout = StateLayout::full(1);
        let src = SourceTerm::Channels(vec![SourceComponent {
            slot: Slot::H,
            field: vec![1.0, 2.0, 3.0],
            profile: TimeProfile::Constant,
        }]);
        let f = src.eval(&layout, 0.0).unwrap();
        assert_eq!(&f[12..15], &[1.0, 2.0, 3.0]);
        assert_eq!(f.iter().sum::<f64>(), 6.0);
    }
}
