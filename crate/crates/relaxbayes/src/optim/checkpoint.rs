//! Flat little-endian checkpoint of an [`OptimizerState`].
//!
//! Layout: 8-byte magic `RBCKPT01`, `P` as u64, then `omega`, `g_m` and `s`
//! as `P` f64 values each, then `step_count` as u64.

use std::io::{Read, Write};

use super::OptimizerState;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RBCKPT01";

pub fn save_checkpoint<W: Write>(state: &OptimizerState, mut out: W) -> Result<()> {
    let p = state.omega.len();
    let mut buf = Vec::with_capacity(24 + 24 * p);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(p as u64).to_le_bytes());
    for v in state.omega.iter().chain(&state.g_m).chain(&state.s) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&state.step_count.to_le_bytes());
    out.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint<R: Read>(mut input: R) -> Result<OptimizerState> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Parse {
            offset: 0,
            msg: "missing checkpoint magic".into(),
        });
    }
    let word = |off: usize| -> [u8; 8] { bytes[off..off + 8].try_into().expect("8-byte slice") };
    let p = u64::from_le_bytes(word(8)) as usize;
    let expected = 24usize.saturating_add(p.saturating_mul(24));
    if bytes.len() != expected {
        return Err(Error::Parse {
            offset: bytes.len().min(expected),
            msg: format!("checkpoint for P = {p} needs {expected} bytes, found {}", bytes.len()),
        });
    }
    let read_vec = |k: usize| -> Vec<f64> {
        (0..p)
            .map(|i| f64::from_le_bytes(word(16 + 8 * (k * p + i))))
            .collect()
    };
    Ok(OptimizerState {
        omega: read_vec(0),
        g_m: read_vec(1),
        s: read_vec(2),
        step_count: u64::from_le_bytes(word(16 + 24 * p)),
    })
}
