//! Equation parameters and the closed-form exponent algebra.
//!
//! Two equations are modelled, both written in flat comoving coordinates of
//! de Sitter spacetime with Hubble constant `H`:
//!
//! ```text
//! u_tt - e^{-2Ht} Δu = e^{-n(p-1)Ht/2} |u|^p                   (PowerU)
//! u_tt - e^{-2Ht} Δu = e^{-n(p-1)Ht/2} (|u_t|^p + |∇u|^p)       (PowerGrad)
//! ```
//!
//! `Linear` drops the right-hand side. The exponents that govern blow-up and
//! lifespan for each family live here as plain functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Nonlinearity {
    /// Source `|u|^p`.
    PowerU,
    /// Source `|u_t|^p + |∇u|^p`.
    PowerGrad,
    /// No source.
    Linear,
}

impl Nonlinearity {
    pub fn as_str(self) -> &'static str {
        match self {
            Nonlinearity::PowerU => "PowerU",
            Nonlinearity::PowerGrad => "PowerGrad",
            Nonlinearity::Linear => "Linear",
        }
    }
}

impl std::fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "PowerU" => Ok(Nonlinearity::PowerU),
            "PowerGrad" => Ok(Nonlinearity::PowerGrad),
            "Linear" => Ok(Nonlinearity::Linear),
            other => Err(Error::validation(format!("unknown nonlinearity `{other}`"))),
        }
    }
}

/// Spacetime and equation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Spatial dimension.
    pub n: u32,
    /// Hubble constant.
    #[serde(rename = "H")]
    pub hubble: f64,
    /// Nonlinearity exponent.
    pub p: f64,
    pub kind: Nonlinearity,
}

impl ModelParams {
    pub fn new(n: u32, hubble: f64, p: f64, kind: Nonlinearity) -> Result<Self> {
        let params = ModelParams { n, hubble, p, kind };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::validation(format!("dimension n = {} must be >= 2", self.n)));
        }
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(Error::validation(format!("exponent p = {} must be > 1", self.p)));
        }
        if !(self.hubble.is_finite() && self.hubble >= 0.0) {
            return Err(Error::validation(format!("Hubble constant H = {} must be >= 0", self.hubble)));
        }
        Ok(())
    }

    /// Cosmological constant, `Λ = 3H²`.
    pub fn lambda(&self) -> f64 {
        3.0 * self.hubble * self.hubble
    }

    /// Exponent of the time weight multiplying the source, `n(p-1)H/2`.
    pub fn source_decay(&self) -> f64 {
        0.5 * f64::from(self.n) * (self.p - 1.0) * self.hubble
    }

    /// Growth exponent, decay rate and amplitude feeding the ODE criterion.
    ///
    /// Returns `None` for `Linear`, which has no blow-up mechanism.
    pub fn derived(&self) -> Option<DerivedConstants> {
        let n = f64::from(self.n);
        let p = self.p;
        match self.kind {
            Nonlinearity::PowerU => Some(DerivedConstants {
                a1: (n - 1.0) * (1.0 - p / 2.0) + 2.0,
                b1: n * (p - 1.0),
                amplitude: None,
            }),
            Nonlinearity::PowerGrad => Some(DerivedConstants {
                a1: n * self.hubble / 2.0,
                b1: n * (p - 1.0) * self.hubble / 2.0 + 1.0,
                amplitude: None,
            }),
            Nonlinearity::Linear => None,
        }
    }

    /// Critical exponent for this family: Strauss for `PowerU`, Glassey for `PowerGrad`.
    pub fn critical_exponent(&self) -> Option<f64> {
        match self.kind {
            Nonlinearity::PowerU => strauss_exponent(self.n).ok(),
            Nonlinearity::PowerGrad => glassey_exponent(self.n).ok(),
            Nonlinearity::Linear => None,
        }
    }

    /// Theoretical lifespan exponent `γ` in `T(ε) ≲ ε^{-γ}`, when the
    /// exponent is subcritical.
    pub fn lifespan_exponent(&self) -> Option<f64> {
        match self.kind {
            Nonlinearity::PowerU => lifespan_exponent_strauss(self.n, self.p).ok(),
            Nonlinearity::PowerGrad => {
                let pc = glassey_exponent(self.n).ok()?;
                if self.p < pc {
                    lifespan_exponent_glassey(self.p).ok()
                } else {
                    None
                }
            }
            Nonlinearity::Linear => None,
        }
    }

    /// Amplitude window `[lo, 1]` over which the lifespan bound is asserted.
    pub fn epsilon_window(&self) -> Option<(f64, f64)> {
        let d = self.derived()?;
        let kappa = d.kappa(self.p);
        if kappa <= 0.0 {
            return None;
        }
        Some((2f64.powf(-kappa / (self.p - 1.0)), 1.0))
    }
}

/// Constants of the ODE criterion derived from the equation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub a1: f64,
    pub b1: f64,
    /// Criterion amplitude. It depends on constants the theory leaves
    /// unspecified, so it is only known when measured.
    pub amplitude: Option<f64>,
}

impl DerivedConstants {
    /// `(p-1)a₁ - b₁ + 2`, the denominator of the rescaling exponents.
    pub fn kappa(&self, p: f64) -> f64 {
        (p - 1.0) * self.a1 - self.b1 + 2.0
    }
}

fn check_dimension(n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("dimension n = {n} must be >= 2")));
    }
    Ok(f64::from(n))
}

/// Positive root of `(n-1)p² - (n+1)p - 2 = 0`.
pub fn strauss_exponent(n: u32) -> Result<f64> {
    let n = check_dimension(n)?;
    let a = n - 1.0;
    let b = -(n + 1.0);
    let c = -2.0;
    let disc = b * b - 4.0 * a * c;
    // b < 0, so -b + sqrt(disc) adds two positive numbers.
    let q = 0.5 * (-b + disc.sqrt());
    Ok(q / a)
}

/// `1 + 2/(n-1)`.
pub fn glassey_exponent(n: u32) -> Result<f64> {
    let n = check_dimension(n)?;
    Ok(1.0 + 2.0 / (n - 1.0))
}

/// Lifespan exponent for `|u|^p`: `(p-1) / ((p-1)[1-(n-1)p/2] + 2)`.
///
/// Defined on the open interval `1 < p < p_c(n)`.
pub fn lifespan_exponent_strauss(n: u32, p: f64) -> Result<f64> {
    let pc = strauss_exponent(n)?;
    if !(p > 1.0 && p < pc) {
        return Err(Error::domain(format!("p = {p} outside (1, {pc})")));
    }
    let nf = f64::from(n);
    let denom = (p - 1.0) * (1.0 - (nf - 1.0) * p / 2.0) + 2.0;
    if denom <= 0.0 {
        return Err(Error::domain(format!("vanishing denominator at p = {p}")));
    }
    Ok((p - 1.0) / denom)
}

/// Lifespan exponent for derivative nonlinearities: `p - 1`.
pub fn lifespan_exponent_glassey(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::domain(format!("p = {p} must be > 1")));
    }
    Ok(p - 1.0)
}

/// Hypothesis of the generalized Kato criterion: `b₁ - a₁(p-1) < 2`.
pub fn kato_condition(a1: f64, b1: f64, p: f64) -> bool {
    b1 - a1 * (p - 1.0) < 2.0
}
