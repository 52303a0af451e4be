//! Flow parameters (n, k, p, q) and the admissible exponent windows.
//!
//! The integer pair (n, k) fixes the ambient dimension R^n and the curvature
//! function σ_k; the real exponents (p, q) select the generalized problem.
//! Two parameter windows are meaningful:
//!
//! * **theorem window**: integer 1 ≤ k < n−1 and k+1 < q−n < p−k−1. Here the
//!   full convergence theory applies, including the fixed-η = 1 mechanism.
//! * **C0 window**: p > 1 and 0 ≤ q−n < p−k−1 (uniform a-priori bounds hold,
//!   but only the normalized flow is run).
//!
//! Both windows share q−n+k+1−p < 0, the sign that drives contraction of the
//! speed ratio F/h.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Classification of a parameter tuple (n, k, p, q).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Regime {
    /// 1 ≤ k < n−1 and k+1 < q−n < p−k−1.
    TheoremWindow,
    /// p > 1 and 0 ≤ q−n < p−k−1, outside the theorem window.
    C0Window,
    /// Anything else; `reason` names the first violated inequality.
    Invalid { reason: String },
}

impl Regime {
    pub fn is_valid(&self) -> bool {
        !matches!(self, Regime::Invalid { .. })
    }

    pub fn name(&self) -> &str {
        match self {
            Regime::TheoremWindow => "theorem-window",
            Regime::C0Window => "c0-window",
            Regime::Invalid { .. } => "invalid",
        }
    }
}

/// Classify a parameter tuple. Total: never panics, any input classifies.
///
/// The checks run in a fixed order and `Invalid` names the first violated
/// inequality, e.g. (n, k, p, q) = (3, 2, 10, 8) reports "k < n-1 violated".
pub fn validate_params(n: i64, k: i64, p: f64, q: f64) -> Regime {
    let invalid = |reason: &str| Regime::Invalid {
        reason: reason.to_string(),
    };
    if !(p.is_finite() && q.is_finite()) {
        return invalid("p and q must be finite");
    }
    if n < 3 {
        return invalid("n >= 3 violated");
    }
    if k < 1 {
        return invalid("k >= 1 violated");
    }
    if k >= n - 1 {
        return invalid("k < n-1 violated");
    }
    let (kf, qn) = (k as f64, q - n as f64);
    if kf + 1.0 < qn && qn < p - kf - 1.0 {
        // The theorem window implies the C0 inequalities; check the chain that
        // downstream code relies on.
        debug_assert!(p > 1.0 && qn >= 0.0);
        debug_assert!(p + kf - 1.0 - qn > 2.0 * kf);
        return Regime::TheoremWindow;
    }
    if p <= 1.0 {
        return invalid("p > 1 violated");
    }
    if qn < 0.0 {
        return invalid("0 <= q-n violated");
    }
    if qn >= p - kf - 1.0 {
        return invalid("q-n < p-k-1 violated");
    }
    Regime::C0Window
}

/// How the normalization η(t) in ∂h/∂t = F − η·h is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    /// η(t) = ∫ ρ^{q−n} h σ_k dx / ∫ h^p/f dx; conserves J = ∫ h^p/f dx.
    Normalized,
    /// η ≡ 1; needs the theorem window and initial min F/h > 1.
    FixedOne,
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("invalid parameters: {reason}")]
    Invalid { reason: String },
    #[error("fixed-one eta mode needs the theorem window k+1 < q-n < p-k-1 (got {regime})")]
    FixedOneNeedsTheoremWindow { regime: String },
    #[error("c_target must be a positive finite number (got {0})")]
    BadTarget(f64),
}

/// Validated parameter set for one flow problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub n: u32,
    pub k: u32,
    pub p: f64,
    pub q: f64,
    pub eta_mode: EtaMode,
    /// Right-hand side c of the elliptic equation targeted by residual
    /// evaluation; the fixed-one flow converges to c = 1.
    pub c_target: f64,
    regime: Regime,
}

impl ParamSet {
    pub fn new(
        n: u32,
        k: u32,
        p: f64,
        q: f64,
        eta_mode: EtaMode,
        c_target: f64,
    ) -> Result<Self, ParamError> {
        let regime = validate_params(n as i64, k as i64, p, q);
        if let Regime::Invalid { reason } = &regime {
            return Err(ParamError::Invalid {
                reason: reason.clone(),
            });
        }
        if eta_mode == EtaMode::FixedOne && regime != Regime::TheoremWindow {
            return Err(ParamError::FixedOneNeedsTheoremWindow {
                regime: regime.name().to_string(),
            });
        }
        if !(c_target.is_finite() && c_target > 0.0) {
            return Err(ParamError::BadTarget(c_target));
        }
        Ok(ParamSet {
            n,
            k,
            p,
            q,
            eta_mode,
            c_target,
            regime,
        })
    }

    pub fn regime(&self) -> &Regime {
        &self.regime
    }

    /// q − n, the radial exponent.
    pub fn q_minus_n(&self) -> f64 {
        self.q - self.n as f64
    }

    /// q − n + k + 1 − p: the homogeneity degree of F/h under h → λh.
    /// Strictly negative in both admissible windows.
    pub fn speed_exponent(&self) -> f64 {
        self.q_minus_n() + self.k as f64 + 1.0 - self.p
    }

    /// p + k − 1 − q + n: the zeroth-order coefficient in the convexity
    /// condition on f. Exceeds 2k in the theorem window.
    pub fn condition_a_constant(&self) -> f64 {
        self.p + self.k as f64 - 1.0 - self.q + self.n as f64
    }

    /// Coefficient of f_s²/f in the convexity condition:
    /// (1/(k+1)) · (k + (q−n)/(q−n−k−1) + (p−2)/(p+k−1)).
    /// Positive in the theorem window (each summand is positive there).
    pub fn condition_a_fs2_coefficient(&self) -> f64 {
        let (kf, qn) = (self.k as f64, self.q_minus_n());
        (kf + qn / (qn - kf - 1.0) + (self.p - 2.0) / (self.p + kf - 1.0)) / (kf + 1.0)
    }
}
