//! Run configuration: a single JSON document with a top-level `method`
//! discriminator selecting one of the five solvers.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_select::FeatureSelectConfig;
use crate::graph::GraphSpec;
use crate::io::MatrixFormat;
use crate::multi_graph::MultiGraphConfig;
use crate::multi_kernel::MultiKernelConfig;
use crate::nmf::NmfConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: PathBuf,
    pub format: MatrixFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodConfig {
    Nmf { nmf: NmfConfig },
    Gnmf { nmf: NmfConfig, graph: GraphSpec },
    MultiGraph { multi_graph: MultiGraphConfig },
    FeatureSelect { feature_select: FeatureSelectConfig },
    MultiKernel { multi_kernel: MultiKernelConfig },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: InputSpec,
    pub output_dir: PathBuf,
    #[serde(flatten)]
    pub method: MethodConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::param("config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.method {
            MethodConfig::Nmf { nmf } => nmf.validate(),
            MethodConfig::Gnmf { nmf, graph } => {
                nmf.validate()?;
                graph.validate()
            }
            MethodConfig::MultiGraph { multi_graph } => multi_graph.validate(),
            MethodConfig::FeatureSelect { feature_select } => feature_select.validate(),
            MethodConfig::MultiKernel { multi_kernel } => multi_kernel.validate(),
        }
    }

    pub fn method_name(&self) -> &'static str {
        match &self.method {
            MethodConfig::Nmf { .. } => "nmf",
            MethodConfig::Gnmf { .. } => "gnmf",
            MethodConfig::MultiGraph { .. } => "multi_graph",
            MethodConfig::FeatureSelect { .. } => "feature_select",
            MethodConfig::MultiKernel { .. } => "multi_kernel",
        }
    }
}
