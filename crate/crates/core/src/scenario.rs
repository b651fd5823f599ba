//! Scenario descriptions and the closed loop they assemble: nominal controller,
//! DRD-CBF constraint, CBF-QP filter and RK4 integration.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Matrix3;
use rand::SeedableRng;

use crate::chain::{
    backstep_extend, hocbf_extend, Barrier, ChainController, Direct, LinearFeedback, OutputConstraint, SmoothSafe,
    ZeroController,
};
use crate::drd::{
    BacksteppingClf, DesiredAttitude, DrdCbf, DrdEval, HeadingClf, So3Clf, TrackingClf, REGION_TOLERANCE,
};
use crate::error::Error;
use crate::filter::{
    cbf_qp_filter, nominal_planar_quad, nominal_unicycle_tracker, FilterProblem, ReferenceTracker, Sinusoid,
};
use crate::math::{atan2, sin, SampleBox, PI};
use crate::models::{ControlAffineSystem, PlanarQuad, Quad3d, Quad3dRate, Unicycle};
use crate::sim::{integrate_rk4, step_count, Certificate, Trajectory};
use crate::{Result, Vector};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[cfg(feature = "serde")]
mod defaults {
    pub fn gravity() -> f64 {
        9.81
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn beta() -> f64 {
        0.5
    }
    pub fn eta() -> f64 {
        crate::drd::DEFAULT_ETA
    }
    pub fn kappa() -> f64 {
        crate::chain::DEFAULT_KAPPA
    }
    pub fn dt() -> f64 {
        1e-3
    }
    pub fn horizon() -> f64 {
        20.0
    }
    pub fn inertia() -> [[f64; 3]; 3] {
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "id", rename_all = "snake_case", deny_unknown_fields))]
pub enum ModelSpec {
    Unicycle {
        drift: [f64; 2],
    },
    PlanarQuad {
        #[cfg_attr(feature = "serde", serde(default = "defaults::gravity"))]
        gravity: f64,
    },
    /// Thrust and body moments, 13 states.
    Quad3d {
        #[cfg_attr(feature = "serde", serde(default = "defaults::one"))]
        mass: f64,
        #[cfg_attr(feature = "serde", serde(default = "defaults::inertia"))]
        inertia: [[f64; 3]; 3],
        #[cfg_attr(feature = "serde", serde(default = "defaults::gravity"))]
        gravity: f64,
    },
    /// Thrust and body rates, 10 states.
    Quad3dRate {
        #[cfg_attr(feature = "serde", serde(default = "defaults::one"))]
        mass: f64,
        #[cfg_attr(feature = "serde", serde(default = "defaults::gravity"))]
        gravity: f64,
    },
}

/// Safe velocity used inside the backstepping certificate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SafeVelocitySpec {
    pub goal: Vec<f64>,
    pub kp: f64,
    pub gamma: f64,
    pub epsilon: f64,
    #[cfg_attr(feature = "serde", serde(default = "defaults::kappa"))]
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum CertificateSpec {
    Ellipse { center: Vec<f64>, p: Vec<f64> },
    Obstacle { center: Vec<f64>, radius: f64 },
    ObstacleHocbf { center: Vec<f64>, radius: f64, alpha_e: f64 },
    ObstacleBackstep { center: Vec<f64>, radius: f64, mu_b: f64, safe_velocity: SafeVelocitySpec },
    GeofenceHocbf { axis: usize, limit: f64, alpha_e: f64 },
}

/// Nominal controller on the output chain, before the safety correction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum ChainNominalSpec {
    Zero,
    /// `−k_p(y − goal) − k_d ẏ` (the `k_d` term only on double integrators).
    Goal {
        goal: Vec<f64>,
        kp: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        kd: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum KhatSpec {
    /// `−ρ P^{1/2}(y − c)`; needs an ellipse certificate.
    Contraction { rho: f64 },
    Smooth {
        #[cfg_attr(feature = "serde", serde(default = "defaults::kappa"))]
        kappa: f64,
        nominal: ChainNominalSpec,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum ClfSpec {
    Geometric {
        lambda: f64,
        #[cfg_attr(feature = "serde", serde(default = "defaults::beta"))]
        beta: f64,
        #[cfg_attr(feature = "serde", serde(default = "defaults::eta"))]
        eta: f64,
    },
    Backstepping {
        lambda: f64,
        mu2: f64,
        k_theta: f64,
        #[cfg_attr(feature = "serde", serde(default = "defaults::beta"))]
        beta: f64,
        #[cfg_attr(feature = "serde", serde(default = "defaults::eta"))]
        eta: f64,
    },
    So3 {
        lambda: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        yaw: f64,
        #[cfg_attr(feature = "serde", serde(default = "defaults::beta"))]
        beta: f64,
        #[cfg_attr(feature = "serde", serde(default = "defaults::eta"))]
        eta: f64,
    },
}

impl ClfSpec {
    pub fn lambda(&self) -> f64 {
        match self {
            ClfSpec::Geometric { lambda, .. } | ClfSpec::Backstepping { lambda, .. } | ClfSpec::So3 { lambda, .. } => {
                *lambda
            }
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            ClfSpec::Geometric { beta, .. } | ClfSpec::Backstepping { beta, .. } | ClfSpec::So3 { beta, .. } => *beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct DrdSpec {
    pub mu: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

/// Heading used by the unicycle tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrackerHeading {
    /// Bearing to the goal.
    Goal,
    /// The DRD-CBF's desired heading.
    Safe,
}

/// Nominal input for the full system `u = (u₁, u₂)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum NominalSpec {
    Zero,
    /// `u₁ = k₁(x)`; `u₂ = −k_q sin(θ − θ_des)` on heading models, zero otherwise.
    Pullback {
        #[cfg_attr(feature = "serde", serde(default))]
        kq: f64,
    },
    UnicycleTracker {
        goal: [f64; 2],
        kp: f64,
        kq: f64,
        heading: TrackerHeading,
    },
    PlanarQuad {
        kp: f64,
        kq: f64,
    },
    Reference3d {
        reference: [Sinusoid; 3],
        kp: f64,
        kd: f64,
        k_attitude: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FilterInputs {
    /// `u₁ = k₁(x)` is applied as is; only `u₂` is filtered.
    #[default]
    Pullback,
    /// The whole input `(u₁, u₂)` is filtered.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct FilterSpec {
    #[cfg_attr(feature = "serde", serde(default))]
    pub inputs: FilterInputs,
    /// Multiplies `γ` inside the filter only; `1` except in mutation tests.
    #[cfg_attr(feature = "serde", serde(default = "defaults::one"))]
    pub gamma_scale: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec { inputs: FilterInputs::Pullback, gamma_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum InitialSpec {
    States {
        states: Vec<Vec<f64>>,
    },
    /// `count` copies of `base` with component `index` swept over `[from, to]`,
    /// or over the open interval when `open`.
    Sweep {
        base: Vec<f64>,
        index: usize,
        from: f64,
        to: f64,
        count: usize,
        #[cfg_attr(feature = "serde", serde(default))]
        open: bool,
    },
    /// Uniform draws from a box, seeded by `sim.seed`.
    Random {
        lower: Vec<f64>,
        upper: Vec<f64>,
        count: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SimSpec {
    #[cfg_attr(feature = "serde", serde(default = "defaults::dt"))]
    pub dt: f64,
    #[cfg_attr(feature = "serde", serde(default = "defaults::horizon"))]
    pub horizon: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec { dt: 1e-3, horizon: 20.0, seed: 0 }
    }
}

/// Verification suites runnable from a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Suite {
    DualRelativeDegree,
    ParameterCondition,
    Issf,
    Gradients,
    Lemma,
    ClfDecay,
    QpEquivalence,
    TrajectoryAudit,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct VerifySpec {
    pub suites: Vec<Suite>,
    #[cfg_attr(feature = "serde", serde(default = "default_samples"))]
    pub samples: usize,
    /// Box on output coordinates for the input-to-state-safe sampler.
    #[cfg_attr(feature = "serde", serde(default))]
    pub chain_box: Option<SampleBox>,
    /// Box on states for gradient, decay and rank samplers.
    #[cfg_attr(feature = "serde", serde(default))]
    pub state_box: Option<SampleBox>,
    /// Audit tolerance.
    #[cfg_attr(feature = "serde", serde(default = "default_audit_tol"))]
    pub audit_tol: f64,
}

#[cfg(feature = "serde")]
fn default_samples() -> usize {
    1000
}

#[cfg(feature = "serde")]
fn default_audit_tol() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub model: ModelSpec,
    pub h0: CertificateSpec,
    pub khat: KhatSpec,
    pub clf: ClfSpec,
    pub drd: DrdSpec,
    pub nominal: NominalSpec,
    #[cfg_attr(feature = "serde", serde(default))]
    pub filter: FilterSpec,
    pub initial: InitialSpec,
    #[cfg_attr(feature = "serde", serde(default))]
    pub sim: SimSpec,
    /// Also run the nominal controller without the filter.
    #[cfg_attr(feature = "serde", serde(default))]
    pub compare_unfiltered: bool,
    #[cfg_attr(feature = "serde", serde(default))]
    pub verify: Option<VerifySpec>,
}

/// Nominal law with the pieces it needs resolved.
#[derive(Clone)]
enum NominalLaw {
    Zero,
    Pullback { kq: f64, heading: Option<usize> },
    UnicycleTracker { goal: [f64; 2], kp: f64, kq: f64, heading: TrackerHeading },
    PlanarQuad { kp: f64, kq: f64, clf: BacksteppingClf },
    Reference(ReferenceTracker),
}

/// A validated scenario with every object constructed.
#[derive(Clone)]
pub struct Built {
    pub system: Arc<dyn ControlAffineSystem>,
    pub drd: DrdCbf,
    pub inputs: FilterInputs,
    pub filter_gamma: f64,
    pub initial: Vec<Vector>,
    pub horizon: f64,
    pub dt: f64,
    nominal: NominalLaw,
    backstepping: Option<BacksteppingClf>,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn dim_check(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what} has {got} entries, expected {want}")))
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<Arc<dyn ControlAffineSystem>> {
        Ok(match self {
            ModelSpec::Unicycle { drift } => Arc::new(Unicycle::new(*drift)),
            ModelSpec::PlanarQuad { gravity } => Arc::new(PlanarQuad::new(*gravity)),
            ModelSpec::Quad3d { mass, inertia, gravity } => {
                let j = Matrix3::from_fn(|r, c| inertia[r][c]);
                Arc::new(Quad3d::new(*mass, j, *gravity)?)
            }
            ModelSpec::Quad3dRate { mass, gravity } => Arc::new(Quad3dRate::new(*mass, *gravity)?),
        })
    }

    fn heading_offset(&self) -> Option<f64> {
        match self {
            ModelSpec::Unicycle { .. } => Some(0.0),
            ModelSpec::PlanarQuad { .. } => Some(PI / 2.0),
            _ => None,
        }
    }
}

impl CertificateSpec {
    pub fn build(&self, p: usize, r: usize) -> Result<Arc<dyn Barrier>> {
        let needs = |want: usize| {
            if r == want {
                Ok(())
            } else {
                Err(Error::invalid("h0.kind", format!("certificate needs a chain of order {want}, model has r = {r}")))
            }
        };
        Ok(match self {
            CertificateSpec::Ellipse { center, p: diag } => {
                needs(1)?;
                dim_check("h0.center", center.len(), p)?;
                Arc::new(Direct(OutputConstraint::ellipse(center, diag)?))
            }
            CertificateSpec::Obstacle { center, radius } => {
                needs(1)?;
                dim_check("h0.center", center.len(), p)?;
                Arc::new(Direct(OutputConstraint::obstacle(center, *radius)?))
            }
            CertificateSpec::ObstacleHocbf { center, radius, alpha_e } => {
                dim_check("h0.center", center.len(), p)?;
                Arc::new(hocbf_extend(OutputConstraint::obstacle(center, *radius)?, *alpha_e, r)?)
            }
            CertificateSpec::ObstacleBackstep { center, radius, mu_b, safe_velocity } => {
                needs(2)?;
                dim_check("h0.center", center.len(), p)?;
                dim_check("h0.safe_velocity.goal", safe_velocity.goal.len(), p)?;
                let base = OutputConstraint::obstacle(center, *radius)?;
                let kv = SmoothSafe::new(
                    Arc::new(Direct(base.clone())),
                    Arc::new(LinearFeedback::proportional(&safe_velocity.goal, safe_velocity.kp)),
                    safe_velocity.gamma,
                    safe_velocity.epsilon,
                    safe_velocity.kappa,
                )?;
                Arc::new(backstep_extend(base, Arc::new(kv), *mu_b)?)
            }
            CertificateSpec::GeofenceHocbf { axis, limit, alpha_e } => {
                Arc::new(hocbf_extend(OutputConstraint::geofence(p, *axis, *limit)?, *alpha_e, r)?)
            }
        })
    }
}

impl Scenario {
    /// Checks everything that can be checked without simulating, including
    /// the parameter condition.
    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    pub fn build(&self) -> Result<Built> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        step_count(self.sim.horizon, self.sim.dt)?;
        positive("filter.gamma_scale", self.filter.gamma_scale)?;
        let system = self.model.build()?;
        let (r, _) = system.dual_relative_degree();
        let p = system.output_dim();
        let barrier = self.h0.build(p, r)?;
        let DrdSpec { mu, gamma, epsilon } = self.drd;
        positive("drd.gamma", gamma)?;
        positive("drd.epsilon", epsilon)?;

        let khat: Arc<dyn ChainController> = match &self.khat {
            KhatSpec::Contraction { rho } => {
                positive("khat.rho", *rho)?;
                let CertificateSpec::Ellipse { center, p: diag } = &self.h0 else {
                    return Err(Error::invalid("khat.kind", "contraction needs an ellipse certificate"));
                };
                Arc::new(LinearFeedback::ellipse_contraction(*rho, center, diag))
            }
            KhatSpec::Smooth { kappa, nominal } => {
                let chain = barrier.chain();
                let nominal: Arc<dyn ChainController> = match nominal {
                    ChainNominalSpec::Zero => Arc::new(ZeroController { chain }),
                    ChainNominalSpec::Goal { goal, kp, kd } => {
                        dim_check("khat.nominal.goal", goal.len(), p)?;
                        if r == 1 {
                            Arc::new(LinearFeedback::proportional(goal, *kp))
                        } else if r == 2 {
                            Arc::new(LinearFeedback::pd(goal, *kp, *kd))
                        } else {
                            return Err(Error::invalid("khat.nominal", "goal nominal supports r ≤ 2"));
                        }
                    }
                };
                Arc::new(SmoothSafe::new(barrier.clone(), nominal, gamma, epsilon, *kappa)?)
            }
        };

        let offset = self.model.heading_offset();
        let mut backstepping = None;
        let clf: Arc<dyn TrackingClf> = match (&self.clf, &self.model) {
            (ClfSpec::Geometric { lambda, beta, eta }, _) => {
                let offset =
                    offset.ok_or_else(|| Error::invalid("clf.kind", "geometric CLF needs a planar heading model"))?;
                Arc::new(HeadingClf { heading_index: 2, offset, beta: *beta, lambda: *lambda, eta: *eta })
            }
            (ClfSpec::Backstepping { lambda, mu2, k_theta, beta, eta }, ModelSpec::PlanarQuad { .. }) => {
                positive("clf.mu2", *mu2)?;
                positive("clf.k_theta", *k_theta)?;
                let mut c = BacksteppingClf::planar_quad(*lambda, *mu2, *k_theta);
                c.heading.beta = *beta;
                c.heading.eta = *eta;
                backstepping = Some(c);
                Arc::new(c)
            }
            (ClfSpec::So3 { lambda, yaw, beta, eta }, ModelSpec::Quad3dRate { .. } | ModelSpec::Quad3d { .. }) => {
                Arc::new(So3Clf { quat_index: 6, yaw: *yaw, beta: *beta, lambda: *lambda, eta: *eta })
            }
            _ => return Err(Error::invalid("clf.kind", "CLF kind does not match the model")),
        };

        let drd = DrdCbf::new(system.clone(), barrier, khat, clf, mu, gamma, epsilon)?;

        let nominal = match &self.nominal {
            NominalSpec::Zero => NominalLaw::Zero,
            NominalSpec::Pullback { kq } => NominalLaw::Pullback { kq: *kq, heading: offset.map(|_| 2) },
            NominalSpec::UnicycleTracker { goal, kp, kq, heading } => {
                if !matches!(self.model, ModelSpec::Unicycle { .. }) {
                    return Err(Error::invalid("nominal.kind", "unicycle tracker needs the unicycle model"));
                }
                NominalLaw::UnicycleTracker { goal: *goal, kp: *kp, kq: *kq, heading: *heading }
            }
            NominalSpec::PlanarQuad { kp, kq } => match backstepping {
                Some(clf) => NominalLaw::PlanarQuad { kp: *kp, kq: *kq, clf },
                None => {
                    return Err(Error::invalid("nominal.kind", "planar quadrotor nominal needs the backstepping CLF"))
                }
            },
            NominalSpec::Reference3d { reference, kp, kd, k_attitude } => {
                let (mass, gravity, yaw) = match (&self.model, &self.clf) {
                    (ModelSpec::Quad3dRate { mass, gravity }, ClfSpec::So3 { yaw, .. }) => (*mass, *gravity, *yaw),
                    _ => return Err(Error::invalid("nominal.kind", "3D reference tracker needs the body-rate model")),
                };
                NominalLaw::Reference(ReferenceTracker {
                    reference: *reference,
                    kp: *kp,
                    kd: *kd,
                    k_attitude: *k_attitude,
                    yaw,
                    mass,
                    gravity,
                })
            }
        };

        let n = system.state_dim();
        let initial = self.initial_states(n)?;
        Ok(Built {
            system,
            drd,
            inputs: self.filter.inputs,
            filter_gamma: gamma * self.filter.gamma_scale,
            initial,
            horizon: self.sim.horizon,
            dt: self.sim.dt,
            nominal,
            backstepping,
        })
    }

    fn initial_states(&self, n: usize) -> Result<Vec<Vector>> {
        let states: Vec<Vec<f64>> = match &self.initial {
            InitialSpec::States { states } => states.clone(),
            InitialSpec::Sweep { base, index, from, to, count, open } => {
                if *index >= base.len() || *count == 0 {
                    return Err(Error::invalid("initial", "sweep index out of range or empty sweep"));
                }
                (0..*count)
                    .map(|i| {
                        let s = if *open {
                            (i + 1) as f64 / (*count + 1) as f64
                        } else if *count == 1 {
                            0.0
                        } else {
                            i as f64 / (*count - 1) as f64
                        };
                        let mut x = base.clone();
                        x[*index] = from + s * (to - from);
                        x
                    })
                    .collect()
            }
            InitialSpec::Random { lower, upper, count } => {
                dim_check("initial.lower", lower.len(), n)?;
                dim_check("initial.upper", upper.len(), n)?;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.sim.seed);
                SampleBox::new(lower.clone(), upper.clone())
                    .uniform_points(*count, &mut rng)
                    .into_iter()
                    .map(|x| x.iter().copied().collect())
                    .collect()
            }
        };
        if states.is_empty() {
            return Err(Error::invalid("initial", "no initial states"));
        }
        states
            .into_iter()
            .map(|s| {
                dim_check("initial state", s.len(), n)?;
                Ok(Vector::from_vec(s))
            })
            .collect()
    }
}

/// Result of running one initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub index: usize,
    pub filtered: Trajectory,
    pub unfiltered: Option<Trajectory>,
}

impl Built {
    /// The backstepping CLF, when the scenario uses one.
    pub fn backstepping(&self) -> Option<BacksteppingClf> {
        self.backstepping
    }

    fn nominal(&self, t: f64, x: &Vector, eval: &DrdEval) -> Result<Vector> {
        let (m1, m2) = self.system.input_dims();
        let target = &eval.clf.target;
        let heading = match eval.clf.attitude {
            DesiredAttitude::Heading(h) => h,
            DesiredAttitude::Rotation(_) => 0.0,
        };
        let mut u = Vector::zeros(m1 + m2);
        match &self.nominal {
            NominalLaw::Zero => {}
            NominalLaw::Pullback { kq, heading: idx } => {
                u.rows_mut(0, m1).copy_from(&target.k1);
                if let Some(i) = idx {
                    u[m1] = -kq * sin(x[*i] - heading);
                }
            }
            NominalLaw::UnicycleTracker { goal, kp, kq, heading: which } => {
                let theta_des = match which {
                    TrackerHeading::Goal => atan2(goal[1] - x[1], goal[0] - x[0]),
                    TrackerHeading::Safe => heading,
                };
                let [v, w] = nominal_unicycle_tracker(x, *goal, theta_des, *kp, *kq);
                u[0] = v;
                u[1] = w;
            }
            NominalLaw::PlanarQuad { kp, kq, clf } => {
                let held = DesiredAttitude::Heading(heading);
                let (rate, _, _) = clf.rate_target(self.system.as_ref(), self.drd.khat.as_ref(), x, Some(&held))?;
                let [tau, m] = nominal_planar_quad(x, target.k1[0], rate.theta_des, rate.theta_des_rate, *kp, *kq);
                u[0] = tau;
                u[1] = m;
            }
            NominalLaw::Reference(tracker) => u = tracker.command(t, x),
        }
        Ok(u)
    }

    /// Filtered (or raw nominal) input and the logged certificate channels.
    pub fn control(
        &self,
        t: f64,
        x: &Vector,
        held: Option<&DesiredAttitude>,
        filtered: bool,
    ) -> Result<(Vector, Certificate, DesiredAttitude)> {
        let eval = self.drd.evaluate(x, held)?;
        let (m1, _) = self.system.input_dims();
        let unom = self.nominal(t, x, &eval)?;
        let (lf, lg) = self.drd.lie(x, &eval);
        let offset = lf + self.filter_gamma * eval.h;
        let (u, active, infeasible) = if !filtered {
            (unom, false, false)
        } else {
            match self.inputs {
                FilterInputs::All => {
                    let out = cbf_qp_filter(&FilterProblem { nominal: unom, row: lg.clone(), offset });
                    (out.input, out.active, out.infeasible)
                }
                FilterInputs::Pullback => {
                    let k1 = &eval.clf.target.k1;
                    let lg1 = lg.rows(0, m1).into_owned();
                    let lg2 = lg.rows(m1, lg.len() - m1).into_owned();
                    let out = cbf_qp_filter(&FilterProblem {
                        nominal: unom.rows(m1, unom.len() - m1).into_owned(),
                        row: lg2,
                        offset: offset + lg1.dot(k1),
                    });
                    let mut u = unom.clone();
                    u.rows_mut(0, m1).copy_from(k1);
                    u.rows_mut(m1, out.input.len()).copy_from(&out.input);
                    (u, out.active, out.infeasible)
                }
            }
        };
        let lg2v = self.system.g2(x).transpose() * &eval.clf.gradient;
        let cert = Certificate {
            h: eval.h,
            h0: eval.h0,
            v: eval.v,
            e_norm: eval.clf.target.error.norm(),
            slack: lg.dot(&u) + offset,
            active,
            region: lg2v.amax() <= REGION_TOLERANCE,
            infeasible,
        };
        Ok((u, cert, eval.clf.attitude))
    }

    pub fn simulate(&self, x0: &Vector, filtered: bool) -> Result<Trajectory> {
        let sys = self.system.clone();
        let mut x0 = x0.clone();
        sys.normalize(&mut x0);
        let mut held: Option<DesiredAttitude> = None;
        let steps = integrate_rk4(
            |x, u| sys.dynamics(x, u),
            |x| sys.normalize(x),
            &x0,
            |t, x| {
                let (u, cert, att) = self.control(t, x, held.as_ref(), filtered)?;
                held = Some(att);
                Ok((u, cert))
            },
            self.horizon,
            self.dt,
        )?;
        Ok(Trajectory::from_steps(steps))
    }
}

/// Runs one initial condition of a scenario.
pub fn run_single(sc: &Scenario, built: &Built, index: usize) -> Result<RunResult> {
    let x0 = &built.initial[index];
    let filtered = built.simulate(x0, true)?;
    let unfiltered = if sc.compare_unfiltered { Some(built.simulate(x0, false)?) } else { None };
    Ok(RunResult { index, filtered, unfiltered })
}

/// Runs every initial condition in order.
pub fn run_scenario(sc: &Scenario) -> Result<Vec<RunResult>> {
    let built = sc.build()?;
    (0..built.initial.len()).map(|i| run_single(sc, &built, i)).collect()
}

/// Default verification boxes derived from the scenario when none is given.
pub fn default_state_box(sc: &Scenario) -> SampleBox {
    match &sc.model {
        ModelSpec::Unicycle { .. } => SampleBox::symmetric(&[1.5, 1.5, PI]),
        ModelSpec::PlanarQuad { .. } => SampleBox::symmetric(&[3.0, 3.0, PI, 1.5, 1.5, 2.0]),
        ModelSpec::Quad3dRate { .. } => SampleBox::new(
            vec![-1.5, -1.5, 0.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0],
            vec![1.5, 1.5, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        ),
        ModelSpec::Quad3d { .. } => SampleBox::new(
            vec![-1.5, -1.5, 0.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0],
            vec![1.5, 1.5, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        ),
    }
}

/// 1.5× the bounding box of the safe set on output coordinates (velocities in `[−1.5, 1.5]`).
pub fn default_chain_box(sc: &Scenario, p: usize, r: usize) -> SampleBox {
    let (lo, hi): (Vec<f64>, Vec<f64>) = match &sc.h0 {
        CertificateSpec::Ellipse { center, p: diag } => center
            .iter()
            .zip(diag)
            .map(|(c, d)| {
                let half = 1.5 / libm::sqrt(*d);
                (c - half, c + half)
            })
            .unzip(),
        CertificateSpec::Obstacle { center, radius }
        | CertificateSpec::ObstacleHocbf { center, radius, .. }
        | CertificateSpec::ObstacleBackstep { center, radius, .. } => {
            center.iter().map(|c| (c - 6.0 * radius, c + 6.0 * radius)).unzip()
        }
        CertificateSpec::GeofenceHocbf { axis, limit, .. } => {
            (0..p).map(|i| if i == *axis { (limit - 1.5, *limit) } else { (-1.5, 1.5) }).unzip()
        }
    };
    let mut lower = lo;
    let mut upper = hi;
    for _ in 1..r {
        lower.extend(core::iter::repeat_n(-1.5, p));
        upper.extend(core::iter::repeat_n(1.5, p));
    }
    SampleBox::new(lower, upper)
}
