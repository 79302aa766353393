//! The pricing problems: PDE coefficients, payoff, boundary conditions and
//! the built-in parameter sets.
//!
//! Time runs backwards from maturity, `tau = T - t`, so every model is
//! solved as `du/dtau = L u` with `u(0) = max(s - K, 0)`.

use serde::{Deserialize, Serialize};

use crate::geometry::{DomainBox, NodeTag, Side};
use crate::kernels::{OperatorCoeffs, MAX_DIM};
use crate::{Error, Result};

/// Quadratic local stochastic volatility; Heston when `(alpha, beta, gamma)
/// = (0, 1, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QlsvParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub eta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub rate: f64,
    pub strike: f64,
    pub maturity: f64,
}

impl QlsvParams {
    /// Local volatility factor `f(s) = alpha s^2 / 2 + beta s + gamma`.
    pub fn local_vol(&self, s: f64) -> f64 {
        0.5 * self.alpha * s * s + self.beta * s + self.gamma
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SabrParams {
    pub beta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub rate: f64,
    pub strike: f64,
    pub maturity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateModel {
    HullWhite,
    Cir,
}

/// Heston volatility with a Hull-White or CIR short rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonRateParams {
    pub kappa: f64,
    pub eta: f64,
    pub sigma_v: f64,
    pub a: f64,
    pub b: f64,
    pub sigma_r: f64,
    pub rho_sv: f64,
    pub rho_sr: f64,
    pub rho_vr: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rate_model: RateModel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    Qlsv(QlsvParams),
    Sabr(SabrParams),
    HestonRate(HestonRateParams),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Qlsv(_) | Model::Sabr(_) => 2,
            Model::HestonRate(_) => 3,
        }
    }

    pub fn strike(&self) -> f64 {
        match self {
            Model::Qlsv(p) => p.strike,
            Model::Sabr(p) => p.strike,
            Model::HestonRate(p) => p.strike,
        }
    }

    pub fn maturity(&self) -> f64 {
        match self {
            Model::Qlsv(p) => p.maturity,
            Model::Sabr(p) => p.maturity,
            Model::HestonRate(p) => p.maturity,
        }
    }

    /// The short rate seen at `x`: the constant rate for two-factor models,
    /// the rate coordinate otherwise.
    pub fn rate_at(&self, x: &[f64]) -> f64 {
        match self {
            Model::Qlsv(p) => p.rate,
            Model::Sabr(p) => p.rate,
            Model::HestonRate(_) => x[2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameters(format!("{name} must be positive, got {v}")))
            }
        };
        let correlation = |name: &str, v: f64| {
            if (-1.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameters(format!("{name} must lie in [-1, 1], got {v}")))
            }
        };
        match self {
            Model::Qlsv(p) => {
                positive("kappa", p.kappa)?;
                positive("sigma", p.sigma)?;
                positive("strike", p.strike)?;
                positive("maturity", p.maturity)?;
                correlation("rho", p.rho)
            }
            Model::Sabr(p) => {
                if !(p.beta > 0.0 && p.beta <= 1.0) {
                    return Err(Error::InvalidParameters(format!(
                        "SABR elasticity must lie in (0, 1], got {}",
                        p.beta
                    )));
                }
                positive("sigma", p.sigma)?;
                positive("strike", p.strike)?;
                positive("maturity", p.maturity)?;
                correlation("rho", p.rho)
            }
            Model::HestonRate(p) => {
                positive("kappa", p.kappa)?;
                positive("sigma_v", p.sigma_v)?;
                positive("a", p.a)?;
                positive("sigma_r", p.sigma_r)?;
                positive("strike", p.strike)?;
                positive("maturity", p.maturity)?;
                correlation("rho_sv", p.rho_sv)?;
                correlation("rho_sr", p.rho_sr)?;
                correlation("rho_vr", p.rho_vr)?;
                let corr = [
                    [1.0, p.rho_sv, p.rho_sr],
                    [p.rho_sv, 1.0, p.rho_vr],
                    [p.rho_sr, p.rho_vr, 1.0],
                ];
                if !is_positive_semidefinite(&corr, 3) {
                    return Err(Error::InvalidParameters(
                        "correlation matrix is not positive semidefinite".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Coefficients of the backward-time operator at `x`.
    pub fn operator_coeffs(&self, x: &[f64]) -> Result<OperatorCoeffs> {
        let mut op = OperatorCoeffs::zero(self.dim());
        match *self {
            Model::Qlsv(p) => {
                let (s, v) = (x[0], x[1]);
                let f = p.local_vol(s);
                op.a[0][0] = 0.5 * v * f * f;
                op.a[0][1] = p.rho * p.sigma * v * f;
                op.a[1][1] = 0.5 * p.sigma * p.sigma * v;
                op.b[0] = p.rate * s;
                op.b[1] = p.kappa * (p.eta - v);
                op.c = -p.rate;
            }
            Model::Sabr(p) => {
                let (s, v) = (x[0], x[1]);
                let sb = s.max(0.0).powf(p.beta);
                op.a[0][0] = 0.5 * v * v * sb * sb;
                op.a[0][1] = p.rho * p.sigma * v * v * sb;
                op.a[1][1] = 0.5 * p.sigma * p.sigma * v * v;
                op.c = -p.rate;
            }
            Model::HestonRate(p) => {
                let (s, v, r) = (x[0], x[1], x[2]);
                let sv = v.max(0.0).sqrt();
                let rate_diffusion = match p.rate_model {
                    RateModel::HullWhite => 1.0,
                    RateModel::Cir => {
                        if r < 0.0 {
                            return Err(Error::Domain(format!(
                                "CIR rate coordinate must be nonnegative, got {r}"
                            )));
                        }
                        r.sqrt()
                    }
                };
                op.a[0][0] = 0.5 * v * s * s;
                op.a[1][1] = 0.5 * p.sigma_v * p.sigma_v * v;
                op.a[2][2] = 0.5 * p.sigma_r * p.sigma_r * rate_diffusion * rate_diffusion;
                op.a[0][1] = p.rho_sv * p.sigma_v * v * s;
                op.a[0][2] = p.rho_sr * p.sigma_r * sv * rate_diffusion * s;
                op.a[1][2] = p.rho_vr * p.sigma_v * p.sigma_r * sv * rate_diffusion;
                op.b[0] = r * s;
                op.b[1] = p.kappa * (p.eta - v);
                op.b[2] = p.a * (p.b - r);
                op.c = -r;
            }
        }
        Ok(op)
    }
}

/// Positive semidefiniteness through symmetric Gaussian elimination.
pub(crate) fn is_positive_semidefinite(m: &[[f64; MAX_DIM]; MAX_DIM], dim: usize) -> bool {
    let scale = (0..dim).map(|i| m[i][i].abs()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-12 * scale;
    let mut a = *m;
    for k in 0..dim {
        let pivot = a[k][k];
        if pivot < -tol {
            return false;
        }
        if pivot <= tol {
            // a zero pivot requires a zero column below it
            if (k + 1..dim).any(|i| a[i][k].abs() > 1e-8 * scale) {
                return false;
            }
            continue;
        }
        for i in k + 1..dim {
            let f = a[i][k] / pivot;
            for j in k + 1..dim {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    true
}

/// Far-field condition at `s = s_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FarField {
    /// `d2u/ds2 = 0`
    VanishingSecondNormal,
    /// `u = s - K exp(-r tau)`
    Dirichlet,
}

/// Boundary condition attached to a node at backward time `tau`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BcKind {
    Dirichlet(f64),
    VanishingSecondNormal,
    VanishingFirstNormal,
}

/// A fully specified pricing problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub model: Model,
    pub domain: DomainBox,
    pub far_field: FarField,
    /// Spot prices at which the option value is reported.
    pub spots: Vec<f64>,
    pub v0: f64,
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default)]
    pub reference: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn strike(&self) -> f64 {
        self.model.strike()
    }

    pub fn maturity(&self) -> f64 {
        self.model.maturity()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        DomainBox::new(self.domain.lower().to_vec(), self.domain.upper().to_vec())?;
        if self.domain.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}-dimensional domain for a {}-factor model",
                self.domain.dim(),
                self.dim()
            )));
        }
        if self.dim() == 3 && self.r0.is_none() {
            return Err(Error::InvalidParameters("three-factor model needs r0".into()));
        }
        if let Some(reference) = &self.reference {
            if reference.len() != self.spots.len() {
                return Err(Error::InvalidParameters(format!(
                    "{} reference values for {} spot prices",
                    reference.len(),
                    self.spots.len()
                )));
            }
        }
        for x in self.evaluation_points() {
            if !self.domain.contains(&x) {
                return Err(Error::OutOfDomain { point: x });
            }
        }
        Ok(())
    }

    /// `(s, v0[, r0])` for every reported spot price.
    pub fn evaluation_points(&self) -> Vec<Vec<f64>> {
        self.spots
            .iter()
            .map(|&s| {
                let mut x = vec![s, self.v0];
                if self.dim() == 3 {
                    x.push(self.r0.unwrap_or(0.0));
                }
                x
            })
            .collect()
    }

    pub fn operator_coeffs(&self, x: &[f64]) -> Result<OperatorCoeffs> {
        self.model.operator_coeffs(x)
    }

    /// European call payoff `max(s - K, 0)`.
    pub fn payoff(&self, x: &[f64]) -> f64 {
        (x[0] - self.strike()).max(0.0)
    }

    /// Condition imposed on the face `(axis, side)` at `x`.
    pub fn boundary_condition(&self, axis: usize, side: Side, tau: f64, x: &[f64]) -> BcKind {
        match (axis, side) {
            (0, Side::Lower) => BcKind::Dirichlet(0.0),
            (0, Side::Upper) => match self.far_field {
                FarField::VanishingSecondNormal => BcKind::VanishingSecondNormal,
                FarField::Dirichlet => {
                    let r = self.model.rate_at(x);
                    BcKind::Dirichlet(x[0] - self.strike() * (-r * tau).exp())
                }
            },
            _ => BcKind::VanishingFirstNormal,
        }
    }

    /// Condition for a node with the given tag; `None` for interior nodes.
    pub fn node_condition(&self, tag: NodeTag, tau: f64, x: &[f64]) -> Option<BcKind> {
        match tag {
            NodeTag::Interior => None,
            NodeTag::Face { axis, side } => Some(self.boundary_condition(axis, side, tau, x)),
        }
    }

    /// Operator collocated at a node: the pricing operator inside the domain
    /// and on faces with a vanishing first normal derivative, the operator
    /// without its second normal derivative where that derivative vanishes,
    /// and `None` on Dirichlet faces.
    pub fn collocation_operator(&self, tag: NodeTag, x: &[f64]) -> Result<Option<OperatorCoeffs>> {
        if self.is_dirichlet(tag) {
            return Ok(None);
        }
        let mut op = self.operator_coeffs(x)?;
        if let NodeTag::Face { axis, side } = tag {
            if self.boundary_condition(axis, side, 0.0, x) == BcKind::VanishingSecondNormal {
                op.a[axis][axis] = 0.0;
            }
        }
        Ok(Some(op))
    }

    /// Whether nodes carrying `tag` hold Dirichlet values.
    pub fn is_dirichlet(&self, tag: NodeTag) -> bool {
        match tag {
            NodeTag::Interior => false,
            NodeTag::Face { axis: 0, side: Side::Lower } => true,
            NodeTag::Face { axis: 0, side: Side::Upper } => self.far_field == FarField::Dirichlet,
            NodeTag::Face { .. } => false,
        }
    }
}

/// Names of the built-in problems.
pub const BUILTIN_NAMES: [&str; 6] = ["qlsv1", "qlsv2", "sabr1", "sabr2", "hhw", "hcir"];

/// Every built-in problem, in [`BUILTIN_NAMES`] order.
pub fn builtin_problems() -> Vec<ProblemSpec> {
    BUILTIN_NAMES
        .iter()
        .map(|n| builtin(n).expect("built-in name"))
        .collect()
}

/// Looks up a built-in problem by name.
pub fn builtin(name: &str) -> Result<ProblemSpec> {
    let two_factor =
        || DomainBox::new(vec![0.0, 0.001], vec![2.0, 1.0]).expect("static domain");
    let spots = vec![0.75, 1.0, 1.25];
    let qlsv = |alpha, beta, gamma| QlsvParams {
        alpha,
        beta,
        gamma,
        kappa: 2.58,
        eta: 0.043,
        sigma: 1.0,
        rho: -0.36,
        rate: 0.0,
        strike: 1.0,
        maturity: 1.0,
    };
    let sabr = |rho| SabrParams {
        beta: 0.5,
        sigma: 0.4,
        rho,
        rate: 0.0,
        strike: 1.0,
        maturity: 1.0,
    };
    let heston_rate = |rate_model| HestonRateParams {
        kappa: 0.5,
        eta: 0.04,
        sigma_v: 0.25,
        a: 0.08,
        b: 0.1,
        sigma_r: 0.09,
        rho_sv: -0.9,
        rho_sr: 0.6,
        rho_vr: -0.7,
        strike: 1.0,
        maturity: 1.0,
        rate_model,
    };
    let spec = match name {
        "qlsv1" => ProblemSpec {
            name: name.into(),
            model: Model::Qlsv(qlsv(0.0, 1.0, 0.0)),
            domain: two_factor(),
            far_field: FarField::VanishingSecondNormal,
            spots,
            v0: 0.114,
            r0: None,
            reference: Some(vec![0.009085, 0.090467, 0.285148]),
        },
        "qlsv2" => ProblemSpec {
            name: name.into(),
            model: Model::Qlsv(qlsv(2.0, 0.0, 0.0)),
            domain: two_factor(),
            far_field: FarField::VanishingSecondNormal,
            spots,
            v0: 0.114,
            r0: None,
            reference: None,
        },
        "sabr1" => ProblemSpec {
            name: name.into(),
            model: Model::Sabr(sabr(0.0)),
            domain: two_factor(),
            far_field: FarField::VanishingSecondNormal,
            spots,
            v0: 0.2,
            r0: None,
            reference: Some(vec![0.009545, 0.080717, 0.264368]),
        },
        "sabr2" => ProblemSpec {
            name: name.into(),
            model: Model::Sabr(sabr(-0.5)),
            domain: two_factor(),
            far_field: FarField::VanishingSecondNormal,
            spots,
            v0: 0.2,
            r0: None,
            reference: None,
        },
        "hhw" => ProblemSpec {
            name: name.into(),
            model: Model::HestonRate(heston_rate(RateModel::HullWhite)),
            domain: DomainBox::new(vec![0.0, 0.005, -1.0], vec![4.0, 2.0, 1.0])?,
            far_field: FarField::Dirichlet,
            spots,
            v0: 0.04,
            r0: Some(0.1),
            reference: None,
        },
        "hcir" => ProblemSpec {
            name: name.into(),
            model: Model::HestonRate(heston_rate(RateModel::Cir)),
            domain: DomainBox::new(vec![0.0, 0.005, 0.0], vec![4.0, 2.0, 2.0])?,
            far_field: FarField::Dirichlet,
            spots,
            v0: 0.04,
            r0: Some(0.1),
            reference: None,
        },
        other => return Err(Error::UnknownProblem(other.into())),
    };
    Ok(spec)
}
