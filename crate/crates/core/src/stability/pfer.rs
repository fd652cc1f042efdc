use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PferMethod {
    #[default]
    #[serde(rename = "MB", alias = "mb")]
    Mb,
    #[serde(rename = "SS", alias = "ss")]
    Ss,
}

impl std::str::FromStr for PferMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "MB" => Ok(Self::Mb),
            "SS" => Ok(Self::Ss),
            _ => Err(format!("unknown PFER bound {s:?} (expected MB or SS)")),
        }
    }
}

impl std::fmt::Display for PferMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mb => "MB",
            Self::Ss => "SS",
        })
    }
}

fn check_q_n(q: f64, n: usize) -> Result<()> {
    if n == 0 {
        return invalid("need at least one feature");
    }
    if !(q >= 0.0 && q.is_finite()) {
        return invalid(format!("average selection count must be finite and nonnegative, got {q}"));
    }
    Ok(())
}

/// q² / ((2π − 1) N).
pub fn pfer_mb(q: f64, n: usize, pi: f64) -> Result<f64> {
    check_q_n(q, n)?;
    if !(pi > 0.5 && pi <= 1.0) {
        return invalid(format!("PFER bound needs threshold in (0.5, 1], got {pi}"));
    }
    Ok(q * q / ((2.0 * pi - 1.0) * n as f64))
}

/// Bound under unimodality: q² / (2(2π − 1 − 1/K) N) for π ≤ 3/4,
/// 4(1 − π + 1/K) / (1 + 2/K) · q² / N above.
pub fn pfer_ss(q: f64, n: usize, pi: f64, k: usize) -> Result<f64> {
    check_q_n(q, n)?;
    if k < 2 {
        return invalid(format!("PFER bound needs K ≥ 2, got {k}"));
    }
    let kf = k as f64;
    if !(pi > 0.5 + 1.0 / (2.0 * kf) && pi <= 1.0) {
        return invalid(format!("PFER bound undefined for threshold {pi} with K = {k}"));
    }
    let q2n = q * q / n as f64;
    Ok(if pi <= 0.75 {
        q2n / (2.0 * (2.0 * pi - 1.0 - 1.0 / kf))
    } else {
        4.0 * (1.0 - pi + 1.0 / kf) / (1.0 + 2.0 / kf) * q2n
    })
}

pub fn pfer(method: PferMethod, q: f64, n: usize, pi: f64, k: usize) -> Result<f64> {
    match method {
        PferMethod::Mb => pfer_mb(q, n, pi),
        PferMethod::Ss => pfer_ss(q, n, pi, k),
    }
}
