//! Denoising diffusion score model: noise schedule, ε-prediction network,
//! training, and Hessian-diagonal variances from the input Jacobian.

mod hessian;
mod net;
mod schedule;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use hessian::{hessian_diag_variance, HessianInput};
pub use net::{default_width, ScoreNet, EMBED_DIM};
pub use schedule::{NoiseSchedule, BETA_END, BETA_START};
pub use train::{
    train, train_with_validation, TrainConfig, TrainReport, TrainedNet, ValidationSet,
};

use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "tcd-scorenet";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk network with the configuration that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub report: Option<TrainReport>,
    pub net: ScoreNet,
}

impl Checkpoint {
    pub fn new(net: ScoreNet, config: TrainConfig, report: Option<TrainReport>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config,
            report,
            net,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        ck.net.check_finite()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
