//! Exponents derived from the power-law index `r` and the dimension `d`.

use std::fmt;

use crate::error::{FemError, Result};

/// The Sobolev embedding exponent `r* = dr/(d-r)`, infinite once `r >= d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SobolevExponent {
    Finite(f64),
    Infinite,
}

impl SobolevExponent {
    pub fn new(r: f64, d: usize) -> Self {
        let d = d as f64;
        if r >= d {
            SobolevExponent::Infinite
        } else {
            SobolevExponent::Finite(d * r / (d - r))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, SobolevExponent::Infinite)
    }

    /// `min{a, r*/2}`, exact when `r*` is infinite.
    fn min_with_half(&self, a: f64) -> f64 {
        match *self {
            SobolevExponent::Finite(s) => a.min(0.5 * s),
            SobolevExponent::Infinite => a,
        }
    }
}

impl fmt::Display for SobolevExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SobolevExponent::Finite(s) => fmt::Display::fmt(s, f),
            SobolevExponent::Infinite => f.pad("inf"),
        }
    }
}

/// Lower admissibility bound `2d/(d+2)` for the power-law index.
pub fn admissibility_bound(d: usize) -> f64 {
    let d = d as f64;
    2.0 * d / (d + 2.0)
}

/// Index `3d/(d+2)` at which the critical exponent is largest.
pub fn peak_index(d: usize) -> f64 {
    let d = d as f64;
    3.0 * d / (d + 2.0)
}

/// Largest value `3d/(2d-2)` of the critical exponent.
pub fn max_critical_exponent(d: usize) -> f64 {
    let d = d as f64;
    3.0 * d / (2.0 * d - 2.0)
}

fn check_admissible(r: f64, d: usize) -> Result<()> {
    if d != 2 && d != 3 {
        return Err(FemError::UnsupportedDimension(d));
    }
    let bound = admissibility_bound(d);
    if !r.is_finite() || r <= bound {
        return Err(FemError::InadmissibleExponent { r, d, bound });
    }
    Ok(())
}

/// Conjugate exponent `r' = r/(r-1)`.
pub fn conjugate(r: f64) -> f64 {
    r / (r - 1.0)
}

/// Critical exponent `r̃ = min{r', r*/2}`.
pub fn critical_exponent(r: f64, d: usize) -> Result<f64> {
    check_admissible(r, d)?;
    Ok(SobolevExponent::new(r, d).min_with_half(conjugate(r)))
}

/// Exponent `α(r)` of the stabilisation parameter `τ_F = h_F^α`.
///
/// Three regimes: `1` for `r >= 2`, `1 - d + 2d/r̃` on `[3d/(d+2), 2)` and
/// the constant `(d-1)/3` below `3d/(d+2)`.
pub fn alpha_exponent(r: f64, d: usize) -> Result<f64> {
    let r_tilde = critical_exponent(r, d)?;
    let df = d as f64;
    let alpha = if r >= 2.0 {
        1.0
    } else if r >= peak_index(d) {
        1.0 - df + 2.0 * df / r_tilde
    } else {
        (df - 1.0) / 3.0
    };
    Ok(alpha)
}

/// Default regularisation of the viscosity `(|∇u|^2 + ε^2)^{(r-2)/2}`.
pub fn default_epsilon(r: f64) -> f64 {
    if r < 2.0 {
        1e-8
    } else {
        0.0
    }
}

/// Default central-difference step used by the manufactured forcing.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Power-law index together with every exponent derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawParams {
    pub d: usize,
    pub r: f64,
    pub r_conj: f64,
    pub r_star: SobolevExponent,
    pub r_tilde: f64,
    pub alpha: f64,
    /// Regularisation of the viscous nonlinearity.
    pub epsilon_reg: f64,
    /// Finite-difference step for the manufactured flux divergence.
    pub fd_step: f64,
}

impl PowerLawParams {
    pub fn new(r: f64, d: usize) -> Result<Self> {
        Self::with_epsilon(r, d, default_epsilon(r))
    }

    pub fn with_epsilon(r: f64, d: usize, epsilon_reg: f64) -> Result<Self> {
        let r_tilde = critical_exponent(r, d)?;
        let alpha = alpha_exponent(r, d)?;
        if !(epsilon_reg >= 0.0 && epsilon_reg.is_finite()) {
            return Err(FemError::Config(format!(
                "epsilon_reg must be finite and non-negative (got {epsilon_reg})"
            )));
        }
        Ok(PowerLawParams {
            d,
            r,
            r_conj: conjugate(r),
            r_star: SobolevExponent::new(r, d),
            r_tilde,
            alpha,
            epsilon_reg,
            fd_step: DEFAULT_FD_STEP,
        })
    }

    /// Regularised viscosity for a velocity gradient of Frobenius norm `g`.
    pub fn viscosity(&self, g: f64) -> f64 {
        if self.r == 2.0 {
            return 1.0;
        }
        (g * g + self.epsilon_reg * self.epsilon_reg).powf(0.5 * (self.r - 2.0))
    }

    /// Stabilisation weight `τ_F = h_F^{α(r)}`.
    pub fn tau(&self, h_f: f64) -> f64 {
        h_f.powf(self.alpha)
    }

    /// Lines suitable for a CSV comment header.
    pub fn header_lines(&self) -> Vec<String> {
        vec![
            format!("# d = {}", self.d),
            format!("# r = {:.16e}", self.r),
            format!("# r_conj = {:.16e}", self.r_conj),
            format!("# r_star = {}", self.r_star),
            format!("# r_tilde = {:.16e}", self.r_tilde),
            format!("# alpha = {:.16e}", self.alpha),
            format!("# epsilon_reg = {:.16e}", self.epsilon_reg),
            format!("# fd_step = {:.16e}", self.fd_step),
        ]
    }
}
