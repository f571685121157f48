use serde::{Deserialize, Serialize};

use crate::general::GeneralGameParams;
use crate::winlose::WinLoseBound;

/// Which bound produced a P-value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Binomial,
    Bentkus,
    Mcdiarmid,
    Azuma,
    GaussianNonrigorous,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Binomial => "binomial",
            Method::Bentkus => "bentkus",
            Method::Mcdiarmid => "mcdiarmid",
            Method::Azuma => "azuma",
            Method::GaussianNonrigorous => "gaussian_nonrigorous",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binomial" => Ok(Method::Binomial),
            "bentkus" => Ok(Method::Bentkus),
            "mcdiarmid" => Ok(Method::Mcdiarmid),
            "azuma" => Ok(Method::Azuma),
            "gaussian" | "gaussian_nonrigorous" => Ok(Method::GaussianNonrigorous),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundParams {
    WinLose(WinLoseBound),
    General(GeneralGameParams),
}

/// A P-value bound with everything needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValueReport {
    pub method: Method,
    /// Number of trials.
    pub n: u64,
    /// Win count `c` or normalized score sum `delta`.
    pub statistic: f64,
    pub params: BoundParams,
    /// Bound capped at 1.
    pub p_value: f64,
    /// Bound before capping.
    pub raw_value: f64,
    /// False only for the Gaussian comparator.
    pub certifying: bool,
    /// Set when the method's precondition failed and 1 was reported instead.
    pub precondition_failed: bool,
}

impl PValueReport {
    pub(crate) fn new(method: Method, n: u64, statistic: f64, params: BoundParams, raw: f64) -> Self {
        Self {
            method,
            n,
            statistic,
            params,
            p_value: raw.clamp(0.0, 1.0),
            raw_value: raw,
            certifying: method != Method::GaussianNonrigorous,
            precondition_failed: false,
        }
    }

    pub(crate) fn no_evidence(method: Method, n: u64, statistic: f64, params: BoundParams) -> Self {
        Self {
            precondition_failed: true,
            ..Self::new(method, n, statistic, params, 1.0)
        }
    }
}
