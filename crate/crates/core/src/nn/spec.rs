use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output head of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Element-wise sigmoid on the two output units, trained with binary cross-entropy.
    Sigmoid,
    /// Linear output units (raw margins), trained with the hinge loss.
    Svm,
}

impl Head {
    pub fn as_str(self) -> &'static str {
        match self {
            Head::Sigmoid => "sigmoid",
            Head::Svm => "svm",
        }
    }
}

impl std::str::FromStr for Head {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Head::Sigmoid),
            "svm" => Ok(Head::Svm),
            other => Err(Error::InvalidConfig(format!("unknown head {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub kernel_count: usize,
    pub kernel_side: usize,
    pub pool_side: usize,
}

/// Architecture description: conv/ReLU/max-pool blocks, then ReLU+dropout
/// dense layers, then a two-unit output layer and the head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_side: usize,
    pub conv_blocks: Vec<ConvBlock>,
    pub dense_widths: Vec<usize>,
    pub output_units: usize,
    pub dropout_rate: f64,
    pub head: Head,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self::with_widths(64, &[128, 256], &[64, 32, 16], Head::Sigmoid)
    }
}

/// Spatial geometry of one conv block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGeometry {
    pub in_channels: usize,
    pub in_side: usize,
    pub conv_side: usize,
    pub pool_out_side: usize,
    pub out_channels: usize,
}

impl NetworkSpec {
    /// Architecture with 3x3 kernels and 2x2 pooling in every block.
    pub fn with_widths(input_side: usize, kernels: &[usize], dense: &[usize], head: Head) -> Self {
        Self {
            input_side,
            conv_blocks: kernels
                .iter()
                .map(|&kernel_count| ConvBlock {
                    kernel_count,
                    kernel_side: 3,
                    pool_side: 2,
                })
                .collect(),
            dense_widths: dense.to_vec(),
            output_units: 2,
            dropout_rate: 0.2,
            head,
        }
    }

    /// Narrow variant of the default layout for fast experiments and gradient checks.
    pub fn tiny(input_side: usize, head: Head) -> Self {
        Self::with_widths(input_side, &[8, 16], &[32, 16, 8], head)
    }

    pub fn with_head(mut self, head: Head) -> Self {
        self.head = head;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry().map(|_| ())
    }

    /// Per-block geometry; fails if any extent collapses below 1.
    pub fn geometry(&self) -> Result<Vec<BlockGeometry>> {
        if self.input_side == 0 {
            return Err(Error::InvalidSpec("input_side must be positive".into()));
        }
        if self.conv_blocks.is_empty() {
            return Err(Error::InvalidSpec("at least one conv block is required".into()));
        }
        if self.output_units != 2 {
            return Err(Error::InvalidSpec(format!(
                "output_units must be 2, got {}",
                self.output_units
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidSpec(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.dense_widths.contains(&0) {
            return Err(Error::InvalidSpec("dense widths must be positive".into()));
        }
        let mut side = self.input_side;
        let mut channels = 1;
        let mut out = Vec::with_capacity(self.conv_blocks.len());
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.kernel_count == 0 || b.kernel_side == 0 || b.pool_side == 0 {
                return Err(Error::InvalidSpec(format!("conv block {i} has a zero extent")));
            }
            if side < b.kernel_side {
                return Err(Error::InvalidSpec(format!(
                    "conv block {i}: input side {side} smaller than kernel {}",
                    b.kernel_side
                )));
            }
            let conv_side = side - b.kernel_side + 1;
            let pool_out_side = conv_side / b.pool_side;
            if pool_out_side == 0 {
                return Err(Error::InvalidSpec(format!(
                    "conv block {i}: conv output side {conv_side} smaller than pool {}",
                    b.pool_side
                )));
            }
            out.push(BlockGeometry {
                in_channels: channels,
                in_side: side,
                conv_side,
                pool_out_side,
                out_channels: b.kernel_count,
            });
            side = pool_out_side;
            channels = b.kernel_count;
        }
        Ok(out)
    }

    /// Length of the flattened feature vector entering the first dense layer.
    pub fn flatten_len(&self) -> Result<usize> {
        let g = self.geometry()?;
        let last = g.last().expect("at least one block");
        Ok(last.out_channels * last.pool_out_side * last.pool_out_side)
    }

    /// `(out, in)` widths of every dense layer including the output layer.
    pub fn dense_shapes(&self) -> Result<Vec<(usize, usize)>> {
        let mut fan_in = self.flatten_len()?;
        let mut shapes = Vec::with_capacity(self.dense_widths.len() + 1);
        for &w in self.dense_widths.iter().chain(std::iter::once(&self.output_units)) {
            shapes.push((w, fan_in));
            fan_in = w;
        }
        Ok(shapes)
    }
}
