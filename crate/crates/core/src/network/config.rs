use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Layer widths and input geometry of the shared-encoder network.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchitectureConfig {
    /// Height and width of the square input.
    pub input_side: usize,
    /// Output channels of the encoder convolutions, one 2× pooling each.
    pub conv_channels: Vec<usize>,
    /// Widths of the encoder's dense layers; the last one is the bottleneck.
    pub fc_sizes: Vec<usize>,
    pub num_classes: usize,
    pub dropout_p: f64,
    /// Output channels of the decoder convolutions, one 2× upsampling each.
    pub decoder_channels: Vec<usize>,
    pub kernel_size: usize,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        ArchitectureConfig {
            input_side: 512,
            conv_channels: vec![8, 16, 32, 64],
            fc_sizes: vec![256, 64],
            num_classes: 2,
            dropout_p: 0.5,
            decoder_channels: vec![64, 32, 16, 8],
            kernel_size: 3,
        }
    }
}

impl ArchitectureConfig {
    pub fn with_side(input_side: usize) -> Self {
        ArchitectureConfig {
            input_side,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !self.input_side.is_power_of_two() || self.input_side < 16 {
            return cfg(format!(
                "input_side must be a power of two >= 16, got {}",
                self.input_side
            ));
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return cfg("conv_channels must be non-empty and positive".into());
        }
        if self.input_side >> self.conv_channels.len() == 0 {
            return cfg(format!(
                "{} poolings do not fit input_side {}",
                self.conv_channels.len(),
                self.input_side
            ));
        }
        if self.fc_sizes.len() != 2 || self.fc_sizes.contains(&0) {
            return cfg("fc_sizes must hold two positive widths".into());
        }
        if self.num_classes != 2 {
            return cfg(format!("num_classes must be 2, got {}", self.num_classes));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return cfg(format!("dropout_p must be in [0,1), got {}", self.dropout_p));
        }
        if self.decoder_channels.len() != self.conv_channels.len()
            || self.decoder_channels.contains(&0)
        {
            return cfg("decoder_channels must be positive and match conv_channels in length".into());
        }
        if self.kernel_size % 2 == 0 {
            return cfg(format!("kernel_size must be odd, got {}", self.kernel_size));
        }
        Ok(())
    }

    /// Spatial side after the last pooling.
    pub fn bottom_side(&self) -> usize {
        self.input_side >> self.conv_channels.len()
    }

    /// Length of the vector entering the first dense layer.
    pub fn flatten_size(&self) -> usize {
        let s = self.bottom_side();
        self.conv_channels.last().copied().unwrap_or(0) * s * s
    }

    pub fn bottleneck(&self) -> usize {
        self.fc_sizes[1]
    }

    /// `key=value` lines, one per field.
    pub fn to_header(&self) -> String {
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        let _ = writeln!(s, "input_side={}", self.input_side);
        let _ = writeln!(s, "conv_channels={}", list(&self.conv_channels));
        let _ = writeln!(s, "fc_sizes={}", list(&self.fc_sizes));
        let _ = writeln!(s, "num_classes={}", self.num_classes);
        let _ = writeln!(s, "dropout_p={}", self.dropout_p);
        let _ = writeln!(s, "decoder_channels={}", list(&self.decoder_channels));
        let _ = writeln!(s, "kernel_size={}", self.kernel_size);
        s
    }

    pub fn from_header(text: &str) -> Result<Self> {
        let bad = |m: String| Error::ArchitectureMismatch(m);
        let mut cfg = ArchitectureConfig::default();
        let mut seen = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
            let num = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| bad(format!("invalid value for {key}: {v:?}")))
            };
            let list = |v: &str| v.split(',').map(num).collect::<Result<Vec<_>>>();
            match key.trim() {
                "input_side" => cfg.input_side = num(value)?,
                "conv_channels" => cfg.conv_channels = list(value)?,
                "fc_sizes" => cfg.fc_sizes = list(value)?,
                "num_classes" => cfg.num_classes = num(value)?,
                "dropout_p" => {
                    cfg.dropout_p = value
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("invalid dropout_p {value:?}")))?
                }
                "decoder_channels" => cfg.decoder_channels = list(value)?,
                "kernel_size" => cfg.kernel_size = num(value)?,
                other => return Err(bad(format!("unknown header key {other:?}"))),
            }
            seen.push(key.trim().to_string());
        }
        for key in [
            "input_side",
            "conv_channels",
            "fc_sizes",
            "num_classes",
            "dropout_p",
            "decoder_channels",
            "kernel_size",
        ] {
            if !seen.iter().any(|k| k == key) {
                return Err(bad(format!("header lacks {key}")));
            }
        }
        cfg.validate().map_err(|e| bad(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_sizes() {
        assert_eq!(ArchitectureConfig::with_side(64).flatten_size(), 1024);
        assert_eq!(ArchitectureConfig::with_side(512).flatten_size(), 65536);
        assert_eq!(ArchitectureConfig::with_side(16).flatten_size(), 64);
    }

    #[test]
    fn rejects_bad_sides() {
        for side in [0, 8, 48, 100] {
            assert!(matches!(
                ArchitectureConfig::with_side(side).validate(),
                Err(Error::Config(_))
            ));
        }
        let mut c = ArchitectureConfig::with_side(64);
        c.num_classes = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn header_roundtrip() {
        let mut c = ArchitectureConfig::with_side(128);
        c.dropout_p = 0.3;
        assert_eq!(ArchitectureConfig::from_header(&c.to_header()).unwrap(), c);
        assert!(matches!(
            ArchitectureConfig::from_header("input_side=64\n"),
            Err(Error::ArchitectureMismatch(_))
        ));
    }
}
