//! JSON fixtures for block Jacobi matrices and run headers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensembles::BlockJacobi;
use crate::error::{Error, Result};
use crate::randcore::FieldTag;
use crate::scalar::CMat;

/// One `r×r` block, row-major, entries `[re, im]`.
pub type BlockJson = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlocksJson {
    #[serde(rename = "A")]
    pub a: Vec<BlockJson>,
    #[serde(rename = "B")]
    pub b: Vec<BlockJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockJacobiJson {
    pub beta: u32,
    pub n: usize,
    pub r: usize,
    pub s: f64,
    pub blocks: BlocksJson,
}

fn block_to_json(m: &CMat) -> BlockJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn block_from_json(b: &BlockJson, r: usize) -> Result<CMat> {
    if b.len() != r || b.iter().any(|row| row.len() != r) {
        return Err(Error::Dimension(format!("block is not {r}x{r}")));
    }
    Ok(DMatrix::from_fn(r, r, |i, j| Complex64::new(b[i][j][0], b[i][j][1])))
}

impl BlockJacobiJson {
    pub fn from_matrix(t: &BlockJacobi, beta: FieldTag, s: f64) -> Self {
        Self {
            beta: beta.beta(),
            n: t.n(),
            r: t.r,
            s,
            blocks: BlocksJson {
                a: t.diag_blocks.iter().map(block_to_json).collect(),
                b: t.offdiag_blocks.iter().map(block_to_json).collect(),
            },
        }
    }

    pub fn to_matrix(&self) -> Result<BlockJacobi> {
        FieldTag::from_beta(self.beta)?;
        if self.blocks.a.len() != self.n || self.blocks.b.len() + 1 != self.n {
            return Err(Error::Dimension(format!("need {} A blocks and {} B blocks", self.n, self.n.saturating_sub(1))));
        }
        let diag = self.blocks.a.iter().map(|b| block_from_json(b, self.r)).collect::<Result<Vec<_>>>()?;
        let off = self.blocks.b.iter().map(|b| block_from_json(b, self.r)).collect::<Result<Vec<_>>>()?;
        Ok(BlockJacobi { r: self.r, diag_blocks: diag, offdiag_blocks: off })
    }
}

/// Self-describing header stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl RunHeader {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            tool: "blockbeta".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
        }
    }

    /// One-line JSON, suitable for a `#`-prefixed CSV comment.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("header serializes")
    }
}
