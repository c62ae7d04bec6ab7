//! `DMCK` network files.
//!
//! Layout (little-endian): magic `DMCK`, u32 version, u32 net_count, then
//! per net: u32 layer_count, per layer (u32 in, u32 out), u8 output
//! activation, then f64 weights row-major followed by the biases, layer by
//! layer.

use std::fs;
use std::path::Path;

use super::{Layer, MlpParams, OutputActivation};
use crate::codec::{write_atomic, ByteReader, ByteWriter};
use crate::replay::FormatError;
use crate::replay::file::{check_field, check_magic, need};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_nets<S: Scalar>(nets: &[&MlpParams<S>]) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.u32(nets.len() as u32);
    for net in nets {
        w.u32(net.layers().len() as u32);
        for l in net.layers() {
            let (i, o) = l.shape();
            w.u32(i as u32);
            w.u32(o as u32);
        }
        w.u8(net.output_activation() as u8);
        for l in net.layers() {
            l.weights.iter().chain(&l.biases).for_each(|v| w.f64(v.to_f64_lossy()));
        }
    }
    w.buf
}

pub fn decode_nets<S: Scalar>(data: &[u8]) -> Result<Vec<MlpParams<S>>, FormatError> {
    let mut r = ByteReader::new(data);
    check_magic(need(&mut r, "magic", 4, |r| r.take(4))?, CHECKPOINT_MAGIC)?;
    check_field("version", CHECKPOINT_VERSION as u64, need(&mut r, "version", 4, |r| r.u32())? as u64)?;
    let net_count = need(&mut r, "net_count", 4, |r| r.u32())?;
    let invalid = |field: &'static str, record: usize, value: String| FormatError::InvalidField { record, field, value };

    let mut nets = Vec::with_capacity(net_count.min(64) as usize);
    for n in 0..net_count as usize {
        let layer_count = need(&mut r, "layer_count", 4, |r| r.u32())? as usize;
        if layer_count == 0 {
            return Err(invalid("layer_count", n, "0".into()));
        }
        let mut shapes = Vec::with_capacity(layer_count.min(64));
        for _ in 0..layer_count {
            let i = need(&mut r, "layer_in", 4, |r| r.u32())? as usize;
            let o = need(&mut r, "layer_out", 4, |r| r.u32())? as usize;
            shapes.push((i, o));
        }
        let output = match need(&mut r, "output_activation", 1, |r| r.u8())? {
            0 => OutputActivation::Identity,
            1 => OutputActivation::Logistic,
            v => return Err(invalid("output_activation", n, v.to_string())),
        };
        let mut layers = Vec::with_capacity(layer_count);
        for &(i, o) in &shapes {
            let count = i.checked_mul(o).and_then(|w| w.checked_add(o)).unwrap_or(usize::MAX);
            let bytes = need(&mut r, "parameters", count.saturating_mul(8), |r| r.take(count.checked_mul(8)?))?;
            let mut values = bytes
                .chunks_exact(8)
                .map(|b| S::from_f64(f64::from_le_bytes(b.try_into().unwrap())).unwrap_or_else(S::nan));
            let mut layer = Layer::zeros(i, o);
            layer.weights.iter_mut().for_each(|w| *w = values.next().unwrap());
            layer.biases.iter_mut().for_each(|b| *b = values.next().unwrap());
            layers.push(layer);
        }
        let net = MlpParams::from_layers(layers, output).map_err(|e| invalid("layer shapes", n, e.to_string()))?;
        nets.push(net);
    }
    if r.remaining() > 0 {
        return Err(FormatError::TrailingBytes(r.remaining()));
    }
    Ok(nets)
}

pub fn save_nets<S: Scalar>(nets: &[&MlpParams<S>], path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    write_atomic(path, &encode_nets(nets)).map_err(|e| FormatError::io(path, e))
}

pub fn load_nets<S: Scalar>(path: impl AsRef<Path>) -> Result<Vec<MlpParams<S>>, FormatError> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_nets(&data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn pair() -> (MlpParams<f64>, MlpParams<f64>) {
        let a = MlpParams::init(&[(4, 6), (6, 2)], OutputActivation::Logistic, &mut seeded(0)).unwrap();
        let b = MlpParams::init(&[(3, 1)], OutputActivation::Identity, &mut seeded(1)).unwrap();
        (a, b)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let (a, b) = pair();
        let bytes = encode_nets(&[&a, &b]);
        let back: Vec<MlpParams<f64>> = decode_nets(&bytes).unwrap();
        assert_eq!(back, vec![a, b]);
        assert_eq!(encode_nets(&back.iter().collect::<Vec<_>>()), bytes);
    }

    #[test]
    fn header_layout() {
        let (a, _) = pair();
        let bytes = encode_nets(&[&a]);
        assert_eq!(&bytes[..4], b"DMCK");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(bytes[32], OutputActivation::Logistic as u8);
        let first_weight = f64::from_le_bytes(bytes[33..41].try_into().unwrap());
        assert_eq!(first_weight, a.layers()[0].weight(0, 0));
        assert_eq!(bytes.len(), 33 + 8 * a.param_count());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (a, b) = pair();
        let bytes = encode_nets(&[&a, &b]);
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"DMRB");
        assert!(matches!(decode_nets::<f64>(&bad), Err(FormatError::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 7;
        assert!(matches!(decode_nets::<f64>(&bad), Err(FormatError::Mismatch { field: "version", .. })));
        assert!(matches!(decode_nets::<f64>(&bytes[..bytes.len() - 3]), Err(FormatError::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[32] = 5;
        assert!(matches!(
            decode_nets::<f64>(&bad),
            Err(FormatError::InvalidField { field: "output_activation", .. })
        ));
        let mut bad = bytes.clone();
        bad[24..28].copy_from_slice(&7u32.to_le_bytes());
        assert!(decode_nets::<f64>(&bad).is_err());
    }
}
