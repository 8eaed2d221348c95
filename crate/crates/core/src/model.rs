//! `SPNN` model file.
//!
//! Little-endian layout: magic `SPNN`, version `u32 = 1`, `n_layers: u32`, then
//! per layer `in_width: u32`, `out_width: u32`, `activation: u8` (0 = RELU,
//! 1 = LINEAR), row-major `f32` weights, `f32` biases.

use std::path::Path;

use crate::dataio::interchange::Reader;
use crate::error::{Error, Result};
use crate::network::{validate_chain, Activation, Layer, LayerSpec, Network};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"SPNN";
pub const VERSION: u32 = 1;

/// Parameters are narrowed to `f32`; a `Network<f32>` round-trips bit-exactly.
pub fn encode_model<T: Scalar>(net: &Network<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + net.parameter_count() * 4 + net.layers().len() * 9);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for l in net.layers() {
        out.extend_from_slice(&(l.in_width() as u32).to_le_bytes());
        out.extend_from_slice(&(l.out_width() as u32).to_le_bytes());
        out.push(l.activation().code());
        for v in l.weights().iter().chain(l.biases()) {
            out.extend_from_slice(&(v.widen() as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_model<T: Scalar>(bytes: &[u8]) -> Result<Network<T>> {
    let mut r = Reader::new(bytes, "model file");
    if r.take(4)? != MAGIC {
        return Err(r.fail(0, "bad magic (expected SPNN)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.fail(4, format!("unsupported version {version}")));
    }
    let n_layers = r.u32()? as usize;
    if n_layers == 0 {
        return Err(r.fail(8, "model has no layers"));
    }
    let mut specs: Vec<LayerSpec> = Vec::new();
    let mut layers = Vec::with_capacity(n_layers);
    for k in 0..n_layers {
        let at = r.offset();
        let in_width = r.u32()? as usize;
        let out_width = r.u32()? as usize;
        let code = r.u8()?;
        let activation = Activation::from_code(code)
            .ok_or_else(|| r.fail(at + 8, format!("layer {k}: unknown activation code {code}")))?;
        if in_width == 0 || out_width == 0 {
            return Err(r.fail(at, format!("layer {k}: zero width")));
        }
        specs.push(LayerSpec::new(in_width, out_width, activation));
        validate_chain(&specs).map_err(|e| match e {
            Error::Config(m) => r.fail(at, m),
            other => other,
        })?;
        let count = in_width
            .checked_mul(out_width)
            .and_then(|n| n.checked_add(out_width))
            .filter(|n| n.saturating_mul(4) <= bytes.len() - r.offset())
            .ok_or_else(|| r.fail(r.offset(), format!("layer {k}: truncated parameters")))?;
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let p_at = r.offset();
            let v = r.f32()?;
            if !v.is_finite() {
                return Err(r.fail(p_at, format!("layer {k}: non-finite parameter")));
            }
            params.push(T::narrow(v as f64));
        }
        let biases = params.split_off(in_width * out_width);
        layers.push(Layer::new(in_width, out_width, activation, params, biases)?);
    }
    r.finish()?;
    Network::from_layers(layers)
}

pub fn save_model<T: Scalar>(net: &Network<T>, path: &Path) -> Result<()> {
    crate::pipeline::write_atomic(path, &encode_model(net))
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Network<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_and_magic() {
        let net = Network::<f32>::init(&LayerSpec::chain(&[4, 3, 2], Activation::Relu), 3).unwrap();
        let bytes = encode_model(&net);
        assert_eq!(bytes.len(), 12 + 2 * 9 + (12 + 3 + 6 + 2) * 4);
        for cut in [0, 5, 11, 20, bytes.len() - 1] {
            assert!(matches!(decode_model::<f32>(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[3] = b'X';
        assert!(decode_model::<f32>(&bad).is_err());
        let mut bad = bytes;
        bad[4] = 2;
        assert!(decode_model::<f32>(&bad).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn broken_chain_names_layers() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"SPNN");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        for (i, o) in [(4u32, 3u32), (5, 2)] {
            bytes.extend_from_slice(&i.to_le_bytes());
            bytes.extend_from_slice(&o.to_le_bytes());
            bytes.push(0);
            for _ in 0..(i * o + o) {
                bytes.extend_from_slice(&0.5f32.to_le_bytes());
            }
        }
        let err = decode_model::<f32>(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        let msg = err.to_string();
        assert!(msg.contains("layers 0/1") && msg.contains("byte offset"), "{msg}");
    }
}
