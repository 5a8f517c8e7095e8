use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LioError, Result};

/// Robust loss `ρ(s)` over the squared residual norm `s = ‖e‖²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobustKernel {
    None,
    Huber { delta: f64 },
    Cauchy { c: f64 },
}

impl Default for RobustKernel {
    fn default() -> Self {
        RobustKernel::Huber { delta: 0.1 }
    }
}

impl RobustKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RobustKernel::Huber { delta: k } | RobustKernel::Cauchy { c: k } if !(k > 0.0) => {
                Err(LioError::InvalidInput(format!("kernel scale must be positive, got {k}")))
            }
            _ => Ok(()),
        }
    }

    pub fn rho(&self, s: f64) -> f64 {
        match *self {
            RobustKernel::None => s,
            RobustKernel::Huber { delta } => {
                if s <= delta * delta {
                    s
                } else {
                    2.0 * delta * s.sqrt() - delta * delta
                }
            }
            RobustKernel::Cauchy { c } => c * c * (s / (c * c)).ln_1p(),
        }
    }

    /// `ρ'(s)`, the IRLS weight.
    pub fn weight(&self, s: f64) -> f64 {
        match *self {
            RobustKernel::None => 1.0,
            RobustKernel::Huber { delta } => {
                if s <= delta * delta {
                    1.0
                } else {
                    delta / s.sqrt()
                }
            }
            RobustKernel::Cauchy { c } => 1.0 / (1.0 + s / (c * c)),
        }
    }
}

impl fmt::Display for RobustKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RobustKernel::None => f.write_str("none"),
            RobustKernel::Huber { delta } => write!(f, "huber:{delta}"),
            RobustKernel::Cauchy { c } => write!(f, "cauchy:{c}"),
        }
    }
}

impl FromStr for RobustKernel {
    type Err = LioError;

    /// `none`, `huber[:δ]`, `cauchy[:c]`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.trim().split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.trim(), None),
        };
        let scale = |default: f64| -> Result<f64> {
            arg.map_or(Ok(default), |a| a.parse().map_err(|_| LioError::Config(format!("bad kernel scale `{a}`"))))
        };
        let k = match name {
            "none" => RobustKernel::None,
            "huber" => RobustKernel::Huber { delta: scale(0.1)? },
            "cauchy" => RobustKernel::Cauchy { c: scale(0.1)? },
            _ => return Err(LioError::Config(format!("unknown robust kernel `{s}`"))),
        };
        k.validate()?;
        Ok(k)
    }
}
