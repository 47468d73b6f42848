use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One 1-D convolution: `filters` output channels, kernel width `kernel`,
/// stride 1, zero "same" padding, ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
}

/// Architecture of the two-branch regression network.
///
/// The convolutional branch reads a window of `window` aggregate values; the
/// dense branch reads `exog_dim` explanatory variables. Each branch is
/// omitted when its input is empty. Flattened branch outputs are
/// concatenated and fed to a linear layer of width `outputs`. With
/// `window_skip` the standardized window is concatenated as well, giving the
/// head a linear path to the aggregate values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub window: usize,
    pub conv: Vec<ConvSpec>,
    pub exog_dim: usize,
    pub dense: Vec<usize>,
    pub outputs: usize,
    #[serde(default)]
    pub window_skip: bool,
}

impl NetworkSpec {
    /// Six convolutions of `filters x kernel` and three dense layers of
    /// `hidden` units.
    pub fn standard(window: usize, exog_dim: usize, outputs: usize, filters: usize, kernel: usize, hidden: usize) -> Self {
        Self::layered(window, exog_dim, outputs, 6, filters, kernel, 3, hidden)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn layered(
        window: usize,
        exog_dim: usize,
        outputs: usize,
        conv_layers: usize,
        filters: usize,
        kernel: usize,
        dense_layers: usize,
        hidden: usize,
    ) -> Self {
        Self {
            window,
            conv: if window > 0 { vec![ConvSpec { filters, kernel }; conv_layers] } else { Vec::new() },
            exog_dim,
            dense: if exog_dim > 0 { vec![hidden; dense_layers] } else { Vec::new() },
            outputs,
            window_skip: false,
        }
    }

    pub fn with_window_skip(mut self, on: bool) -> Self {
        self.window_skip = on;
        self
    }

    pub fn has_cnn(&self) -> bool {
        self.window > 0
    }

    pub fn has_mlp(&self) -> bool {
        self.exog_dim > 0
    }

    pub fn cnn_features(&self) -> usize {
        if !self.has_cnn() {
            return 0;
        }
        self.window * self.conv.last().map_or(1, |c| c.filters)
    }

    /// Head inputs taken directly from the standardized window.
    pub fn skip_features(&self) -> usize {
        if self.window_skip && self.has_cnn() && !self.conv.is_empty() { self.window } else { 0 }
    }

    pub fn mlp_features(&self) -> usize {
        if !self.has_mlp() {
            return 0;
        }
        self.dense.last().copied().unwrap_or(self.exog_dim)
    }

    pub fn head_inputs(&self) -> usize {
        self.cnn_features() + self.skip_features() + self.mlp_features()
    }

    pub fn validate(&self) -> Result<()> {
        if self.outputs == 0 {
            return Err(Error::Config("network needs at least one output".into()));
        }
        if !self.has_cnn() && !self.has_mlp() {
            return Err(Error::Config("network needs a window or explanatory inputs".into()));
        }
        if self.conv.iter().any(|c| c.filters == 0 || c.kernel == 0) || self.dense.contains(&0) {
            return Err(Error::Config("layer widths, filters and kernels must be at least 1".into()));
        }
        if !self.has_cnn() && !self.conv.is_empty() {
            return Err(Error::Config("convolution layers given without a window".into()));
        }
        if !self.has_mlp() && !self.dense.is_empty() {
            return Err(Error::Config("dense layers given without explanatory inputs".into()));
        }
        Ok(())
    }

    /// Number of trainable parameters.
    pub fn n_params(&self) -> usize {
        let mut n = 0;
        let mut ch = 1;
        for c in &self.conv {
            n += c.filters * ch * c.kernel + c.filters;
            ch = c.filters;
        }
        let mut width = self.exog_dim;
        for &d in &self.dense {
            n += d * width + d;
            width = d;
        }
        n + self.outputs * self.head_inputs() + self.outputs
    }
}

/// Optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the coherence term in the loss, in `(0, 1)`.
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    /// Chronological tail of the examples held out for validation.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            learning_rate: 0.001,
            batch_size: 32,
            max_epochs: 500,
            patience: 20,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "learning rate, batch size and epoch count must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_and_validation() {
        let spec = NetworkSpec {
            window: 5,
            conv: vec![ConvSpec { filters: 2, kernel: 3 }],
            exog_dim: 3,
            dense: vec![4],
            outputs: 2,
            window_skip: false,
        };
        spec.validate().unwrap();
        // conv 2*1*3+2, dense 4*3+4, head 2*(10+4)+2
        assert_eq!(spec.n_params(), 8 + 16 + 30);
        assert!(NetworkSpec { outputs: 0, ..spec.clone() }.validate().is_err());
        assert!(NetworkSpec { window: 0, exog_dim: 0, conv: vec![], dense: vec![], ..spec.clone() }.validate().is_err());
        assert!(NetworkSpec { conv: vec![ConvSpec { filters: 0, kernel: 3 }], ..spec }.validate().is_err());
    }

    #[test]
    fn standard_spec_drops_empty_branch() {
        let s = NetworkSpec::standard(30, 0, 4, 16, 4, 64);
        assert_eq!(s.conv.len(), 6);
        assert!(s.dense.is_empty());
        assert_eq!(s.head_inputs(), 30 * 16);
    }

    #[test]
    fn train_config_checks_alpha() {
        assert!(TrainConfig { alpha: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { alpha: 0.0, ..Default::default() }.validate().is_err());
        TrainConfig::default().validate().unwrap();
    }
}
