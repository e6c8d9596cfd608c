//! Gas constants and the far-field states joined by the contact wave.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Ideal polytropic gas, `p = R θ / v`, `e = R θ / (γ - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasModel {
    #[serde(rename = "R")]
    pub r: f64,
    pub gamma: f64,
    pub mu: f64,
    pub kappa: f64,
    /// Entropy-law constant; carried for completeness, the solver never needs it.
    #[serde(default = "one")]
    pub a_const: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for GasModel {
    fn default() -> Self {
        Self { r: 1.0, gamma: 5.0 / 3.0, mu: 1.0, kappa: 1.0, a_const: 1.0 }
    }
}

impl GasModel {
    pub fn new(r: f64, gamma: f64, mu: f64, kappa: f64) -> Result<Self> {
        let g = Self { r, gamma, mu, kappa, a_const: 1.0 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(self.r) && ok(self.mu) && ok(self.kappa) && ok(self.a_const)) {
            return invalid("gas constants must be finite and positive");
        }
        if !(self.gamma.is_finite() && self.gamma > 1.0) {
            return invalid("gamma must exceed 1");
        }
        Ok(())
    }

    #[inline]
    pub fn pressure(&self, v: f64, theta: f64) -> f64 {
        self.r * theta / v
    }

    /// `(γ-1)/R`, the factor converting energy densities to temperature units.
    #[inline]
    pub fn gm1_r(&self) -> f64 {
        (self.gamma - 1.0) / self.r
    }

    /// Heat-driven velocity coefficient `κ(γ-1)/(γR)`.
    #[inline]
    pub fn contact_coef(&self) -> f64 {
        self.kappa * (self.gamma - 1.0) / (self.gamma * self.r)
    }

    /// Diffusion coefficient `a = κ p₊ (γ-1) / (γ R²)` of the self-similar profile equation.
    pub fn diffusion_coef(&self, p_plus: f64) -> f64 {
        self.kappa * p_plus * (self.gamma - 1.0) / (self.gamma * self.r * self.r)
    }
}

/// Far-field states. `delta` is always recomputed from the endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndStates {
    pub v_minus: f64,
    pub v_plus: f64,
    pub theta_minus: f64,
    pub theta_plus: f64,
    #[serde(default)]
    pub u_minus: f64,
}

impl EndStates {
    pub fn new(gas: &GasModel, v_minus: f64, theta_minus: f64, theta_plus: f64) -> Result<Self> {
        // v₊ follows from pressure matching
        let p = gas.pressure(v_minus, theta_minus);
        let ends = Self { v_minus, v_plus: gas.r * theta_plus / p, theta_minus, theta_plus, u_minus: 0.0 };
        ends.validate(gas)?;
        Ok(ends)
    }

    /// Unit left state with `θ₊ = 1 + delta`.
    pub fn with_delta(gas: &GasModel, delta: f64) -> Result<Self> {
        Self::new(gas, 1.0, 1.0, 1.0 + delta)
    }

    pub fn validate(&self, gas: &GasModel) -> Result<()> {
        for (name, x) in [
            ("v_minus", self.v_minus),
            ("v_plus", self.v_plus),
            ("theta_minus", self.theta_minus),
            ("theta_plus", self.theta_plus),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return invalid(format!("{name} must be finite and positive"));
            }
        }
        if !self.u_minus.is_finite() {
            return invalid("u_minus must be finite");
        }
        let pm = gas.pressure(self.v_minus, self.theta_minus);
        let pp = gas.pressure(self.v_plus, self.theta_plus);
        if ((pm - pp) / pm).abs() > 1e-12 {
            return invalid(format!("end pressures differ: p- = {pm}, p+ = {pp}"));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        (self.theta_plus - self.theta_minus).abs()
    }

    pub fn p_minus(&self, gas: &GasModel) -> f64 {
        gas.pressure(self.v_minus, self.theta_minus)
    }

    pub fn p_plus(&self, gas: &GasModel) -> f64 {
        gas.pressure(self.v_plus, self.theta_plus)
    }

    /// `-√(γ p₋ / v₋)`
    pub fn lambda1_minus(&self, gas: &GasModel) -> f64 {
        -(gas.gamma * self.p_minus(gas) / self.v_minus).sqrt()
    }

    /// `√(γ p₊ / v₊)`
    pub fn lambda3_plus(&self, gas: &GasModel) -> f64 {
        (gas.gamma * self.p_plus(gas) / self.v_plus).sqrt()
    }
}
