// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON documents written by the command-line tool. The schemas under
//! `schema/` describe them; bump [`SCHEMA_VERSION`] on any breaking change.

use flsa_core::experiments::McReport;
use flsa_core::{KktReport, LambdaPath, Segmentation, TrendKktReport};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub command: String,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `sha256:<hex>` of the input bytes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_digest: Option<String>,
}

impl Provenance {
    pub fn new(command: &str, seed: Option<u64>, input_digest: Option<String>) -> Self {
        Self {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            input_digest,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationDocument {
    pub schema_version: u32,
    pub n: usize,
    pub lambda: f64,
    /// 0-based index of the first sample of each new segment.
    pub change_points: Vec<usize>,
    /// Jump direction at each change point, `1` or `-1`.
    pub signs: Vec<i8>,
    pub levels: Vec<f64>,
    /// Levels are plain segment averages rather than penalized levels.
    pub polished: bool,
    /// `N + 1` dual values of the penalized fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt: Option<KktReport>,
    pub provenance: Provenance,
}

impl SegmentationDocument {
    pub fn new(seg: &Segmentation, polished: bool, provenance: Provenance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: seg.n(),
            lambda: seg.lambda(),
            change_points: seg.change_points().to_vec(),
            signs: seg.sign_changes().iter().map(|c| c.sign.as_i8()).collect(),
            levels: seg.levels().to_vec(),
            polished,
            dual: None,
            kkt: None,
            provenance,
        }
    }

    pub fn segmentation(&self) -> flsa_core::Result<Segmentation> {
        Segmentation::new(self.n, self.change_points.clone(), self.levels.clone(), self.lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathEventDocument {
    pub lambda: f64,
    pub change_points: Vec<usize>,
    pub signs: Vec<i8>,
    pub levels: Vec<f64>,
    pub fused: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathDocument {
    pub schema_version: u32,
    pub n: usize,
    pub nested: bool,
    pub events: Vec<PathEventDocument>,
    pub provenance: Provenance,
}

impl PathDocument {
    pub fn new(path: &LambdaPath, nested: bool, provenance: Provenance) -> Self {
        let events = path
            .events()
            .iter()
            .map(|e| PathEventDocument {
                lambda: e.lambda,
                change_points: e.segmentation.change_points().to_vec(),
                signs: e.segmentation.sign_changes().iter().map(|c| c.sign.as_i8()).collect(),
                levels: e.segmentation.levels().to_vec(),
                fused: e.fused.clone(),
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            n: path.n(),
            nested,
            events,
            provenance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendDocument {
    pub schema_version: u32,
    pub n: usize,
    pub lambda: f64,
    pub fitted: Vec<f64>,
    pub kink_points: Vec<usize>,
    pub dual: Vec<f64>,
    pub kkt: TrendKktReport,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentDocument {
    pub schema_version: u32,
    pub report: McReport,
    pub provenance: Provenance,
}
