//! Binary checkpoint format for parameter vectors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8  b"MACRLCK1"
//! seed     8  u64, the master seed of the run that produced the params
//! nseg     4  u32
//! per segment:
//!   head_len u32, head bytes, tensor_len u32, tensor bytes,
//!   start u64, len u64, fan_in u64
//! nvalues  8  u64
//! values   8*nvalues, f64 little-endian
//! ```
//!
//! Doubles are written with `to_le_bytes`, so the round trip is bit-exact.

use std::io::{Read, Write};

use super::params::{LayoutBuilder, ParamVector};
use crate::error::CoreError;
use crate::Result;

const MAGIC: &[u8; 8] = b"MACRLCK1";

pub fn save_checkpoint<W: Write>(w: &mut W, params: &ParamVector, seed: u64) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&seed.to_le_bytes())?;
    let segments = params.layout().segments();
    w.write_all(&(segments.len() as u32).to_le_bytes())?;
    for seg in segments {
        write_str(w, &seg.head)?;
        write_str(w, &seg.tensor)?;
        w.write_all(&(seg.start as u64).to_le_bytes())?;
        w.write_all(&(seg.len as u64).to_le_bytes())?;
        w.write_all(&(seg.fan_in as u64).to_le_bytes())?;
    }
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for v in params.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a checkpoint, rebuilding the layout from the header. Returns the
/// parameters and the stored seed.
pub fn load_checkpoint<R: Read>(r: &mut R) -> Result<(ParamVector, u64)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CoreError::CheckpointFormat("bad magic".into()));
    }
    let seed = read_u64(r)?;
    let nseg = read_u32(r)? as usize;
    let mut builder = LayoutBuilder::new();
    let mut expected_start = 0u64;
    for _ in 0..nseg {
        let head = read_str(r)?;
        let tensor = read_str(r)?;
        let start = read_u64(r)?;
        let len = read_u64(r)?;
        let fan_in = read_u64(r)?;
        if start != expected_start {
            return Err(CoreError::CheckpointFormat(format!(
                "segment {head}/{tensor} starts at {start}, expected {expected_start}"
            )));
        }
        expected_start += len;
        builder.segment(&head, &tensor, len as usize, fan_in as usize);
    }
    let layout = builder.finish();
    let nvalues = read_u64(r)? as usize;
    if nvalues != layout.total_len() {
        return Err(CoreError::CheckpointFormat(format!(
            "value count {nvalues} does not match layout length {}",
            layout.total_len()
        )));
    }
    let mut values = Vec::with_capacity(nvalues);
    let mut buf = [0u8; 8];
    for _ in 0..nvalues {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok((ParamVector::from_values(layout, values)?, seed))
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(CoreError::CheckpointFormat("oversized name".into()));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| CoreError::CheckpointFormat("name is not utf-8".into()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn sample_params(values: Vec<f64>) -> ParamVector {
        let mut b = LayoutBuilder::new();
        b.segment("actor", "w", values.len(), 3);
        let layout = b.finish();
        ParamVector::from_values(layout, values).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut b = LayoutBuilder::new();
        b.segment("actor", "w", 10, 4);
        b.segment("critic_q", "table", 6, 6);
        let layout = b.finish();
        let params = ParamVector::init_uniform(layout, &mut rng_from_seed(7));

        let mut buf = Vec::new();
        save_checkpoint(&mut buf, &params, 0xDEAD_BEEF).unwrap();
        let (loaded, seed) = load_checkpoint(&mut buf.as_slice()).unwrap();

        assert_eq!(seed, 0xDEAD_BEEF);
        assert_eq!(loaded.layout().segments(), params.layout().segments());
        let same_bits = loaded
            .values()
            .iter()
            .zip(params.values())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same_bits);
    }

    #[test]
    fn rejects_garbage() {
        assert!(load_checkpoint(&mut &b"not a checkpoint"[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_preserves_awkward_floats(
            values in proptest::collection::vec(
                prop_oneof![
                    any::<f64>().prop_filter("finite", |v| v.is_finite()),
                    Just(-0.0f64),
                    Just(f64::MIN_POSITIVE / 2.0), // subnormal
                ],
                1..64,
            )
        ) {
            let params = sample_params(values);
            let mut buf = Vec::new();
            save_checkpoint(&mut buf, &params, 1).unwrap();
            let (loaded, _) = load_checkpoint(&mut buf.as_slice()).unwrap();
            for (a, b) in loaded.values().iter().zip(params.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
