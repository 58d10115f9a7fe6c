//! Edge-weight laws.
//!
//! Structural edges carry an exponential-family weight with canonical
//! parameter `eta` and dispersion `phi`:
//!
//! ```text
//! log f(w | eta, phi) = log h(w, phi) + (eta * y - A(eta)) / a(phi) - log Pr(w != 0 | eta)
//! ```
//!
//! where `y` is the sufficient statistic (`w` itself, or `ln w` for the
//! log-normal family). Noise edges carry an exponential weight with a fixed
//! rate.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WecanError};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightFamily {
    #[default]
    Normal,
    LogNormal,
}

impl WeightFamily {
    pub fn name(self) -> &'static str {
        match self {
            WeightFamily::Normal => "normal",
            WeightFamily::LogNormal => "lognormal",
        }
    }

    pub fn in_support(self, w: f64) -> bool {
        match self {
            WeightFamily::Normal => w.is_finite(),
            WeightFamily::LogNormal => w.is_finite() && w > 0.0,
        }
    }

    pub fn check_support(self, w: f64) -> Result<()> {
        if self.in_support(w) {
            Ok(())
        } else {
            Err(WecanError::OutOfSupport {
                weight: w,
                family: self.name(),
            })
        }
    }

    /// Sufficient statistic of a weight.
    #[inline]
    pub fn statistic(self, w: f64) -> f64 {
        match self {
            WeightFamily::Normal => w,
            WeightFamily::LogNormal => w.ln(),
        }
    }

    /// Parameter-free part of `log h`: zero for the normal family, the
    /// Jacobian `-ln w` for the log-normal family.
    #[inline]
    pub fn log_jacobian(self, w: f64) -> f64 {
        match self {
            WeightFamily::Normal => 0.0,
            WeightFamily::LogNormal => -w.ln(),
        }
    }

    #[inline]
    pub fn log_h(self, w: f64, phi: f64) -> f64 {
        let y = self.statistic(w);
        -HALF_LN_2PI - phi.ln() - y * y / (2.0 * phi * phi) + self.log_jacobian(w)
    }

    #[inline]
    pub fn dlog_h_dphi(self, w: f64, phi: f64) -> f64 {
        let y = self.statistic(w);
        y * y / phi.powi(3) - 1.0 / phi
    }

    /// Cumulant function `A(eta)`.
    #[inline]
    pub fn cumulant(self, eta: f64) -> f64 {
        0.5 * eta * eta
    }

    #[inline]
    pub fn cumulant_deriv(self, eta: f64) -> f64 {
        eta
    }

    /// Dispersion function `a(phi)`.
    #[inline]
    pub fn dispersion(self, phi: f64) -> f64 {
        phi * phi
    }

    #[inline]
    pub fn dispersion_deriv(self, phi: f64) -> f64 {
        2.0 * phi
    }

    /// `log Pr(w != 0 | eta)`; identically zero for continuous families.
    #[inline]
    pub fn log_pr_nonzero(self, _eta: f64) -> f64 {
        0.0
    }

    #[inline]
    pub fn dlog_pr_deta(self, _eta: f64) -> f64 {
        0.0
    }

    #[inline]
    pub fn dlog_pr_dphi(self, _eta: f64, _phi: f64) -> f64 {
        0.0
    }

    pub fn log_density(self, w: f64, eta: f64, phi: f64) -> Result<f64> {
        self.check_support(w)?;
        if !(phi > 0.0) {
            return Err(WecanError::InvalidArgument(format!(
                "dispersion must be positive, got {phi}"
            )));
        }
        Ok(self.log_density_unchecked(w, eta, phi))
    }

    #[inline]
    pub fn log_density_unchecked(self, w: f64, eta: f64, phi: f64) -> f64 {
        let y = self.statistic(w);
        self.log_h(w, phi) + (eta * y - self.cumulant(eta)) / self.dispersion(phi)
            - self.log_pr_nonzero(eta)
    }

    /// Log-density from a precomputed statistic `y` and Jacobian term; the
    /// form used in the hot loops.
    #[inline]
    pub(crate) fn log_density_stat(self, y: f64, log_jac: f64, eta: f64, phi: f64) -> f64 {
        let r = y - eta;
        -HALF_LN_2PI - phi.ln() - r * r / (2.0 * phi * phi) + log_jac
    }

    /// Derivatives of the log-density with respect to `eta` and `phi`.
    pub fn derivatives(self, w: f64, eta: f64, phi: f64) -> (f64, f64) {
        let y = self.statistic(w);
        let a = self.dispersion(phi);
        let d_eta =
            (y - self.cumulant_deriv(eta)) / a - self.dlog_pr_deta(eta);
        let d_phi = self.dlog_h_dphi(w, phi)
            - (eta * y - self.cumulant(eta)) / (a * a) * self.dispersion_deriv(phi)
            - self.dlog_pr_dphi(eta, phi);
        (d_eta, d_phi)
    }

    #[inline]
    pub(crate) fn derivatives_stat(self, y: f64, eta: f64, phi: f64) -> (f64, f64) {
        let r = y - eta;
        let phi2 = phi * phi;
        (r / phi2, r * r / (phi2 * phi) - 1.0 / phi)
    }

    /// Draws a weight given `eta` and `phi`.
    pub fn sample<R: Rng + ?Sized>(self, eta: f64, phi: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let y = eta + phi * z;
        match self {
            WeightFamily::Normal => y,
            WeightFamily::LogNormal => y.exp(),
        }
    }
}

impl fmt::Display for WeightFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightFamily {
    type Err = WecanError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(WeightFamily::Normal),
            "lognormal" | "log-normal" => Ok(WeightFamily::LogNormal),
            other => Err(WecanError::InvalidArgument(format!(
                "unknown weight family {other:?}"
            ))),
        }
    }
}

/// Exponential weight law of noise edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLaw {
    rate: f64,
}

impl NoiseLaw {
    pub fn new(rate: f64) -> Result<Self> {
        if rate.is_finite() && rate > 0.0 {
            Ok(Self { rate })
        } else {
            Err(WecanError::InvalidArgument(format!(
                "noise rate must be positive and finite, got {rate}"
            )))
        }
    }

    /// Rate `10 / m`, where `m` is the mean of the lowest decile of the
    /// positive weights (floored at machine epsilon).
    pub fn default_for_weights(weights: impl IntoIterator<Item = f64>) -> Self {
        let mut positive: Vec<f64> = weights.into_iter().filter(|w| *w > 0.0).collect();
        if positive.is_empty() {
            return Self { rate: 1.0 };
        }
        positive.sort_by(f64::total_cmp);
        let take = (positive.len() / 10).max(1);
        let mean = positive[..take].iter().sum::<f64>() / take as f64;
        Self {
            rate: 10.0 / mean.max(f64::EPSILON),
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn log_density(&self, w: f64) -> Result<f64> {
        if w > 0.0 && w.is_finite() {
            Ok(self.log_density_unchecked(w))
        } else {
            Err(WecanError::OutOfSupport {
                weight: w,
                family: "exponential noise",
            })
        }
    }

    /// `ln(rate) - rate * w` for positive `w`, `-inf` elsewhere.
    #[inline]
    pub fn log_density_unchecked(&self, w: f64) -> f64 {
        if w > 0.0 {
            self.rate.ln() - self.rate * w
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Exp::new(self.rate).expect("validated rate").sample(rng)
    }
}

/// Density of the normal law, written out directly; kept for cross-checks.
pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt())
}
