//! Log-concave latent densities and the interval log-probability map
//! `ψ(t1, t2) = ln{R(t2) - R(t1)}` with its gradient and Hessian.
//!
//! Every quantity is evaluated in log space so that intervals deep in either
//! tail keep full relative precision. Infinite endpoints are carried
//! explicitly by [`ExtReal`] rather than through IEEE infinities.

use crate::error::{Error, Result};
use crate::special::{
    clamped_exp, log1mexp, log_ndtr, ndtr, softplus, HALF_LN_2PI, LN_MIN_POSITIVE,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

/// The three built-in latent distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkFamily {
    /// Standard normal; probit-type models.
    Gaussian,
    /// Standard logistic.
    Logistic,
    /// Minimum extreme value, `R(w) = 1 - exp(-exp(w))`; complementary log-log.
    ExtremeValue,
}

impl LinkFamily {
    pub const ALL: [LinkFamily; 3] = [
        LinkFamily::Gaussian,
        LinkFamily::Logistic,
        LinkFamily::ExtremeValue,
    ];

    /// `ln R(w)`
    pub fn log_cdf(self, w: f64) -> f64 {
        match self {
            LinkFamily::Gaussian => log_ndtr(w),
            LinkFamily::Logistic => -softplus(-w),
            LinkFamily::ExtremeValue => {
                if w < -30.0 {
                    // ln(1 - exp(-e)) = w - e/2 + O(e^2)
                    w - 0.5 * clamped_exp(w)
                } else {
                    (-(-clamped_exp(w)).exp_m1()).ln()
                }
            }
        }
    }

    /// `ln{1 - R(w)}`
    pub fn log_sf(self, w: f64) -> f64 {
        match self {
            LinkFamily::Gaussian => log_ndtr(-w),
            LinkFamily::Logistic => -softplus(w),
            LinkFamily::ExtremeValue => -clamped_exp(w),
        }
    }

    /// `ln r(w)`
    pub fn log_pdf(self, w: f64) -> f64 {
        match self {
            LinkFamily::Gaussian => -0.5 * w * w - HALF_LN_2PI,
            LinkFamily::Logistic => -softplus(-w) - softplus(w),
            LinkFamily::ExtremeValue => w - clamped_exp(w),
        }
    }

    /// Score `r'(w) / r(w)`.
    pub fn score(self, w: f64) -> f64 {
        match self {
            LinkFamily::Gaussian => -w,
            LinkFamily::Logistic => -(0.5 * w).tanh(),
            LinkFamily::ExtremeValue => 1.0 - clamped_exp(w),
        }
    }

    /// `R(w)`
    pub fn cdf(self, w: f64) -> f64 {
        match self {
            LinkFamily::Gaussian => ndtr(w),
            LinkFamily::Logistic => {
                if w >= 0.0 {
                    1.0 / (1.0 + (-w).exp())
                } else {
                    let e = w.exp();
                    e / (1.0 + e)
                }
            }
            LinkFamily::ExtremeValue => -(-clamped_exp(w)).exp_m1(),
        }
    }

    /// Evaluate `R`, `r`, `r'` and `ln r` at a finite point.
    pub fn eval(self, w: f64) -> FamilyEval {
        let log_r = self.log_pdf(w);
        let r = log_r.exp();
        FamilyEval {
            cdf: self.cdf(w),
            pdf: r,
            pdf_deriv: self.score(w) * r,
            log_pdf: log_r,
        }
    }
}

impl fmt::Display for LinkFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkFamily::Gaussian => "gaussian",
            LinkFamily::Logistic => "logistic",
            LinkFamily::ExtremeValue => "extreme-value",
        })
    }
}

impl FromStr for LinkFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "gaussian" | "normal" | "probit" => Ok(LinkFamily::Gaussian),
            "logistic" | "logit" => Ok(LinkFamily::Logistic),
            "extreme-value" | "cloglog" | "gumbel" => Ok(LinkFamily::ExtremeValue),
            other => Err(Error::InvalidInput(format!("unknown family `{other}`"))),
        }
    }
}

/// Pointwise evaluation of one family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyEval {
    pub cdf: f64,
    pub pdf: f64,
    pub pdf_deriv: f64,
    pub log_pdf: f64,
}

/// A point of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "SerdeExtReal", try_from = "SerdeExtReal")]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Maps IEEE infinities onto the explicit variants.
    pub fn from_f64(v: f64) -> ExtReal {
        if v == f64::INFINITY {
            ExtReal::PosInf
        } else if v == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(v)
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    /// Strict order on the extended line; `false` whenever a NaN is involved.
    pub fn lt(self, other: ExtReal) -> bool {
        match (self, other) {
            (ExtReal::NegInf, ExtReal::NegInf) | (ExtReal::PosInf, _) => false,
            (ExtReal::NegInf, _) => true,
            (ExtReal::Finite(_), ExtReal::NegInf) => false,
            (ExtReal::Finite(_), ExtReal::PosInf) => true,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a < b,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => f.write_str("-inf"),
            ExtReal::PosInf => f.write_str("inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
        }
    }
}

/// JSON has no infinities; they travel as the strings "inf" / "-inf".
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SerdeExtReal {
    Num(f64),
    Text(String),
}

impl From<ExtReal> for SerdeExtReal {
    fn from(v: ExtReal) -> Self {
        match v {
            ExtReal::Finite(x) => SerdeExtReal::Num(x),
            ExtReal::NegInf => SerdeExtReal::Text("-inf".into()),
            ExtReal::PosInf => SerdeExtReal::Text("inf".into()),
        }
    }
}

impl TryFrom<SerdeExtReal> for ExtReal {
    type Error = String;

    fn try_from(v: SerdeExtReal) -> std::result::Result<Self, String> {
        match v {
            SerdeExtReal::Num(x) => Ok(ExtReal::from_f64(x)),
            SerdeExtReal::Text(s) => match s.to_ascii_lowercase().as_str() {
                "-inf" | "-infinity" => Ok(ExtReal::NegInf),
                "inf" | "+inf" | "infinity" => Ok(ExtReal::PosInf),
                _ => Err(format!("invalid extended real `{s}`")),
            },
        }
    }
}

/// Lower and upper end of a latent interval `[t1, t2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalEndpoints {
    pub lower: ExtReal,
    pub upper: ExtReal,
}

impl IntervalEndpoints {
    pub fn new(lower: ExtReal, upper: ExtReal) -> Self {
        IntervalEndpoints { lower, upper }
    }

    pub fn finite(t1: f64, t2: f64) -> Self {
        IntervalEndpoints::new(ExtReal::Finite(t1), ExtReal::Finite(t2))
    }
}

/// `ln{R(t2) - R(t1)}`; `0` for the whole line, `-inf` for empty or inverted intervals.
pub fn log_interval_prob(family: LinkFamily, e: IntervalEndpoints) -> f64 {
    match (e.lower, e.upper) {
        (ExtReal::NegInf, ExtReal::PosInf) => 0.0,
        (ExtReal::PosInf, _) | (_, ExtReal::NegInf) => f64::NEG_INFINITY,
        (ExtReal::NegInf, ExtReal::Finite(b)) => family.log_cdf(b),
        (ExtReal::Finite(a), ExtReal::PosInf) => family.log_sf(a),
        (ExtReal::Finite(a), ExtReal::Finite(b)) => {
            if !(a < b) {
                return f64::NEG_INFINITY;
            }
            let log_rb = family.log_cdf(b);
            if log_rb <= -LN_2 {
                return log_rb + log1mexp(family.log_cdf(a) - log_rb);
            }
            let log_sa = family.log_sf(a);
            if log_sa <= -LN_2 {
                return log_sa + log1mexp(family.log_sf(b) - log_sa);
            }
            // a below the median, b above it: both tails are at most 1/2.
            (-(family.log_cdf(a).exp() + family.log_sf(b).exp())).ln_1p()
        }
    }
}

/// Gradient and Hessian of `ψ` at one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalDerivs {
    pub g: [f64; 2],
    pub h: [[f64; 2]; 2],
}

/// Gradient and Hessian of `ψ`, with the rows belonging to infinite endpoints zeroed.
pub fn interval_grad_hess(family: LinkFamily, e: IntervalEndpoints) -> Result<IntervalDerivs> {
    if !e.lower.lt(e.upper) {
        return Err(Error::Domain(format!(
            "interval [{}, {}) is empty",
            e.lower, e.upper
        )));
    }
    // The ratios r/D are formed in log space, so D only needs a floor when
    // its logarithm is not representable at all.
    let log_d = log_interval_prob(family, e);
    let log_d = if log_d.is_finite() { log_d } else { LN_MIN_POSITIVE };
    let (q1, s1) = match e.lower {
        ExtReal::Finite(t) => (clamped_exp(family.log_pdf(t) - log_d), family.score(t)),
        _ => (0.0, 0.0),
    };
    let (q2, s2) = match e.upper {
        ExtReal::Finite(t) => (clamped_exp(family.log_pdf(t) - log_d), family.score(t)),
        _ => (0.0, 0.0),
    };
    let h12 = q1 * q2;
    Ok(IntervalDerivs {
        g: [-q1, q2],
        h: [[-q1 * (s1 + q1), h12], [h12, q2 * (s2 - q2)]],
    })
}
