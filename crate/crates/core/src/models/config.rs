use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{scaled_k, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Reads the last iteration's Q maps.
    #[serde(rename = "VIN")]
    Vin,
    /// Softmax-weighted average of the per-iteration value maps.
    #[serde(rename = "VIRN")]
    Virn,
    /// Gated convolutional-LSTM summary of the per-iteration value maps.
    #[serde(rename = "GSVIN")]
    GsVin,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Vin, Variant::Virn, Variant::GsVin];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Vin => "VIN",
            Variant::Virn => "VIRN",
            Variant::GsVin => "GSVIN",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "VIN" => Ok(Variant::Vin),
            "VIRN" => Ok(Variant::Virn),
            "GSVIN" => Ok(Variant::GsVin),
            other => Err(ModelError::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// Architecture hyperparameters. There is no explicit discount: it lives
/// inside the learned value-iteration kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Value-iteration kernel size `f` (odd).
    pub kernel_size: usize,
    /// Value-iteration sweeps `k`.
    pub iterations: usize,
    pub reward_hidden_channels: usize,
    pub reward_kernel_size: usize,
    pub actions: usize,
    pub gs_kernel_size: usize,
    pub leaky_slope: f64,
}

impl ModelConfig {
    pub fn new(variant: Variant, kernel_size: usize, iterations: usize) -> Self {
        Self {
            variant,
            kernel_size,
            iterations,
            reward_hidden_channels: 150,
            reward_kernel_size: 3,
            actions: 8,
            gs_kernel_size: 3,
            leaky_slope: 0.01,
        }
    }

    /// Iteration count from the propagation-radius rule scaled by `k_prime`.
    pub fn for_map(
        variant: Variant,
        height: usize,
        width: usize,
        kernel_size: usize,
        k_prime: f64,
    ) -> Result<Self, ModelError> {
        let k = scaled_k(height, width, kernel_size, k_prime)?;
        let cfg = Self::new(variant, kernel_size, k);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let odd = |v: usize| v % 2 == 1;
        if !odd(self.kernel_size) || !odd(self.reward_kernel_size) || !odd(self.gs_kernel_size) {
            return Err(ModelError::Config(format!(
                "kernel sizes must be odd (f={}, reward={}, gs={})",
                self.kernel_size, self.reward_kernel_size, self.gs_kernel_size
            )));
        }
        if self.iterations == 0 {
            return Err(ModelError::Config("need at least one iteration".into()));
        }
        if self.actions != crate::gridworld::Action::COUNT {
            return Err(ModelError::Config(format!(
                "grid domain has 8 actions, got {}",
                self.actions
            )));
        }
        if self.reward_hidden_channels == 0 {
            return Err(ModelError::Config(
                "reward head needs hidden channels".into(),
            ));
        }
        if !self.leaky_slope.is_finite() {
            return Err(ModelError::Config("leaky slope must be finite".into()));
        }
        Ok(())
    }

    /// Weights in the value-iteration kernel: `A * 2 * f^2`.
    pub fn vi_param_count(&self) -> usize {
        self.actions * 2 * self.kernel_size * self.kernel_size
    }

    /// Weights in the gated summarizer: `8 * f_gs^2`.
    pub fn gs_param_count(&self) -> usize {
        8 * self.gs_kernel_size * self.gs_kernel_size
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.name()));
        }
        assert_eq!("gs-vin".parse::<Variant>().unwrap(), Variant::GsVin);
        assert!("dbcnn".parse::<Variant>().is_err());
    }

    #[test]
    fn validation() {
        assert!(ModelConfig::new(Variant::Vin, 3, 1).validate().is_ok());
        assert!(ModelConfig::new(Variant::Vin, 4, 1).validate().is_err());
        assert!(ModelConfig::new(Variant::Vin, 3, 0).validate().is_err());
        let mut c = ModelConfig::new(Variant::GsVin, 7, 2);
        c.actions = 4;
        assert!(c.validate().is_err());
    }

    #[test]
    fn for_map_uses_scaled_rule() {
        let c = ModelConfig::for_map(Variant::GsVin, 32, 32, 11, 1.0).unwrap();
        assert_eq!(c.iterations, 10);
        let c = ModelConfig::for_map(Variant::Vin, 8, 8, 7, 1.0).unwrap();
        assert_eq!(c.iterations, 4);
    }

    #[test]
    fn parameter_count_formulas() {
        let c = ModelConfig::new(Variant::GsVin, 11, 5);
        assert_eq!(c.vi_param_count(), 8 * 2 * 121);
        assert_eq!(c.gs_param_count(), 72);
    }
}
