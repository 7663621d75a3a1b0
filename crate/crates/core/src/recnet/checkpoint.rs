//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field                                             |
//! |-------|---------------------------------------------------|
//! | 8     | magic `SNETCKP1`                                  |
//! | 4     | input dimension D (u32)                           |
//! | 4     | hidden size H (u32)                               |
//! | 1     | direction: 0 bidirectional, 1 forward             |
//! | 1     | action head present: 0 or 1                       |
//! | 1     | progress head: 0 regression, 1 classification, 2 ordinal, 3 none |
//! | 1     | reserved, 0                                       |
//! | 8     | initialization seed (u64)                         |
//! | 8     | parameter count N (u64)                           |
//! | 8 N   | parameters as f64 in [`Params::tensors`] order    |

use std::fs;
use std::path::Path;

use super::model::SeqModel;
use super::params::{Direction, HeadKind, ModelConfig, Params};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SNETCKP1";
const HEADER_LEN: usize = 36;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: SeqModel,
    pub seed: u64,
}

pub fn write_checkpoint(model: &SeqModel, seed: u64) -> Vec<u8> {
    let c = &model.config;
    let flat = model.params.to_flat();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * flat.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(c.input_dim as u32).to_le_bytes());
    out.extend_from_slice(&(c.hidden as u32).to_le_bytes());
    out.push(match c.direction {
        Direction::Bidirectional => 0,
        Direction::Forward => 1,
    });
    out.push(u8::from(c.action_head));
    out.push(match c.progress_head {
        HeadKind::Regression => 0,
        HeadKind::Classification => 1,
        HeadKind::OrdinalClassification => 2,
        HeadKind::NoneSingleTask => 3,
    });
    out.push(0);
    out.extend_from_slice(&seed.to_le_bytes());
    out.extend_from_slice(&(flat.len() as u64).to_le_bytes());
    for v in flat {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint (bad magic or truncated header)"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let direction = match bytes[16] {
        0 => Direction::Bidirectional,
        1 => Direction::Forward,
        _ => return Err(bad("unknown direction code")),
    };
    let action_head = match bytes[17] {
        0 => false,
        1 => true,
        _ => return Err(bad("bad action-head flag")),
    };
    let progress_head = match bytes[18] {
        0 => HeadKind::Regression,
        1 => HeadKind::Classification,
        2 => HeadKind::OrdinalClassification,
        3 => HeadKind::NoneSingleTask,
        _ => return Err(bad("unknown progress head code")),
    };
    let config = ModelConfig {
        input_dim: u32_at(8),
        hidden: u32_at(12),
        direction,
        action_head,
        progress_head,
    };
    let seed = u64_at(20);
    let count = u64_at(28) as usize;
    let mut params = Params::zeros(&config);
    if count != params.len() || bytes.len() != HEADER_LEN + 8 * count {
        return Err(bad("parameter count does not match header configuration"));
    }
    let flat: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    params.set_flat(&flat);
    Ok(Checkpoint {
        model: SeqModel { config, params },
        seed,
    })
}

pub fn save_checkpoint(model: &SeqModel, seed: u64, path: &Path) -> Result<()> {
    fs::write(path, write_checkpoint(model, seed))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn head_from(i: u8) -> HeadKind {
        [
            HeadKind::Regression,
            HeadKind::Classification,
            HeadKind::OrdinalClassification,
            HeadKind::NoneSingleTask,
        ][i as usize]
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(d in 1usize..5, h in 1usize..6, bi in any::<bool>(), action in any::<bool>(), head in 0u8..4, seed in any::<u64>()) {
            let config = ModelConfig {
                input_dim: d,
                hidden: h,
                direction: if bi { Direction::Bidirectional } else { Direction::Forward },
                action_head: action,
                progress_head: head_from(head),
            };
            let model = SeqModel::new(config, seed);
            let bytes = write_checkpoint(&model, seed);
            let back = read_checkpoint(&bytes).unwrap();
            prop_assert_eq!(back.seed, seed);
            prop_assert_eq!(&back.model.config, &config);
            let a: Vec<u64> = model.params.to_flat().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.model.params.to_flat().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(write_checkpoint(&back.model, seed), bytes);
        }
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let config = ModelConfig {
            input_dim: 2,
            hidden: 2,
            direction: Direction::Forward,
            action_head: true,
            progress_head: HeadKind::Regression,
        };
        let bytes = write_checkpoint(&SeqModel::new(config, 1), 1);
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(read_checkpoint(&wrong).is_err());
        let mut wrong = bytes;
        wrong[18] = 9;
        assert!(read_checkpoint(&wrong).is_err());
    }
}
