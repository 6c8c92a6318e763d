//! Innovation laws with unit second moment.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Law of the i.i.d. innovations `eta_t`, normalized so that `E[eta^2] = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InnovationDist {
    StandardNormal,
    /// Student-t with `nu` degrees of freedom divided by `sqrt(nu / (nu - 2))`.
    NormalizedStudentT { nu: u32 },
}

impl InnovationDist {
    pub fn student_t(nu: u32) -> Result<Self> {
        let d = Self::NormalizedStudentT { nu };
        d.validate()?;
        Ok(d)
    }

    /// `nu > 4` keeps the fourth moment finite.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::StandardNormal => Ok(()),
            Self::NormalizedStudentT { nu } if nu > 4 => Ok(()),
            Self::NormalizedStudentT { nu } => Err(Error::ParameterDomain(format!(
                "Student-t degrees of freedom must exceed 4, got {nu}"
            ))),
        }
    }

    /// Scale factor `sqrt(nu / (nu - 2))` applied to raw t draws.
    fn t_scale(nu: u32) -> f64 {
        let nu = f64::from(nu);
        (nu / (nu - 2.0)).sqrt()
    }

    /// Draws one innovation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::StandardNormal => StandardNormal.sample(rng),
            Self::NormalizedStudentT { nu } => {
                let t = StudentT::new(f64::from(nu)).expect("validated degrees of freedom");
                t.sample(rng) / Self::t_scale(nu)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::StandardNormal => 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2),
            Self::NormalizedStudentT { nu } => raw_t(nu).cdf(x * Self::t_scale(nu)),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Self::StandardNormal => std_normal().pdf(x),
            Self::NormalizedStudentT { nu } => {
                let s = Self::t_scale(nu);
                s * raw_t(nu).pdf(x * s)
            }
        }
    }

    /// Quantile `F^{-1}(u)`, polished with Newton steps on the cdf.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut x = match *self {
            Self::StandardNormal => std_normal().inverse_cdf(u),
            Self::NormalizedStudentT { nu } => raw_t(nu).inverse_cdf(u) / Self::t_scale(nu),
        };
        for _ in 0..3 {
            let f = self.pdf(x);
            if !(f > 0.0) {
                break;
            }
            let step = (self.cdf(x) - u) / f;
            if !step.is_finite() {
                break;
            }
            x -= step;
            if step.abs() < 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        x
    }

    /// Fourth moment `kappa = E[eta^4]`.
    pub fn kurtosis(&self) -> f64 {
        match *self {
            Self::StandardNormal => 3.0,
            Self::NormalizedStudentT { nu } => {
                let nu = f64::from(nu);
                3.0 * (nu - 2.0) / (nu - 4.0)
            }
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match *self {
            Self::StandardNormal => "normal".to_string(),
            Self::NormalizedStudentT { nu } => format!("t{nu}"),
        }
    }
}

impl std::fmt::Display for InnovationDist {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for InnovationDist {
    type Err = Error;

    /// Accepts `normal` and `t<nu>` (e.g. `t6`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "normal" | "gaussian" => Ok(Self::StandardNormal),
            _ => {
                let nu = s
                    .strip_prefix("student-t")
                    .or_else(|| s.strip_prefix('t'))
                    .map(|r| r.trim_start_matches([':', '-']))
                    .and_then(|r| r.parse::<u32>().ok())
                    .ok_or_else(|| Error::InvalidInput(format!("unknown innovation law '{s}'")))?;
                Self::student_t(nu)
            }
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn raw_t(nu: u32) -> StudentsT {
    StudentsT::new(0.0, 1.0, f64::from(nu)).expect("validated degrees of freedom")
}
