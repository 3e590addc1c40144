use serde::{Deserialize, Serialize};

use super::plane::Plane;

/// Position of a subband in the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubbandId {
    pub scale: usize,
    pub orientation: usize,
}

/// Block vectors of one subband, stored row-major (`n_blocks × dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandField {
    pub id: SubbandId,
    pub block_side: usize,
    pub stride: usize,
    /// Blocks per row and per column of the block grid.
    pub grid: (usize, usize),
    blocks: Vec<f64>,
}

impl SubbandField {
    pub fn from_blocks(
        id: SubbandId,
        block_side: usize,
        stride: usize,
        grid: (usize, usize),
        blocks: Vec<f64>,
    ) -> Self {
        assert_eq!(blocks.len(), grid.0 * grid.1 * block_side * block_side);
        Self {
            id,
            block_side,
            stride,
            grid,
            blocks,
        }
    }

    pub fn dim(&self) -> usize {
        self.block_side * self.block_side
    }

    pub fn n_blocks(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    pub fn block(&self, i: usize) -> &[f64] {
        let m = self.dim();
        &self.blocks[i * m..(i + 1) * m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.blocks.chunks_exact(self.dim())
    }

    pub fn raw(&self) -> &[f64] {
        &self.blocks
    }
}

/// Cuts `b × b` blocks at stride `s` in raster order and removes the mean of
/// all block samples.
pub fn vectorize(subband: &Plane, id: SubbandId, block_side: usize, stride: usize) -> SubbandField {
    assert!(block_side >= 1 && stride >= 1, "block side and stride must be positive");
    let cols = if subband.width() >= block_side {
        (subband.width() - block_side) / stride + 1
    } else {
        0
    };
    let rows = if subband.height() >= block_side {
        (subband.height() - block_side) / stride + 1
    } else {
        0
    };
    let m = block_side * block_side;
    let mut blocks = Vec::with_capacity(rows * cols * m);
    for by in 0..rows {
        for bx in 0..cols {
            for dy in 0..block_side {
                for dx in 0..block_side {
                    blocks.push(subband.get(bx * stride + dx, by * stride + dy));
                }
            }
        }
    }
    if !blocks.is_empty() {
        let mean = blocks.iter().sum::<f64>() / blocks.len() as f64;
        for v in &mut blocks {
            *v -= mean;
        }
    }
    SubbandField::from_blocks(id, block_side, stride, (cols, rows), blocks)
}
