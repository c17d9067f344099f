//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic          8 bytes  "VRCNNMDL"
//! version        u32      1
//! name length    u16, then that many UTF-8 bytes
//! residue        u8       0 or 1
//! layer count    u32
//! per layer      activation u8 (0 linear, 1 relu), branch count u32,
//!                per branch: in_channels u32, filters u32, kernel_h u32, kernel_w u32
//! payload length u64      4 * (weights + biases)
//! payload        per branch in spec order: weights as f32, then biases as f32
//! checksum       u32      CRC-32 (IEEE) of every preceding byte
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Activation, BranchSpec, ConvParams, LayerSpec, ModelParams, NetworkSpec};

pub const MAGIC: &[u8; 8] = b"VRCNNMDL";
pub const VERSION: u32 = 1;

/// Bytes taken by the f32 weight and bias payload.
pub fn payload_len(params: &ModelParams) -> usize {
    4 * (params.weight_count() + params.bias_count())
}

pub fn encode(spec: &NetworkSpec, params: &ModelParams) -> Result<Vec<u8>> {
    params.check(spec)?;
    let name = spec.name.as_bytes();
    let name_len = u16::try_from(name.len())
        .map_err(|_| Error::InvalidSpec(format!("model name is {} bytes long", name.len())))?;
    let mut out = Vec::with_capacity(256 + payload_len(params));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&name_len.to_le_bytes());
    out.extend_from_slice(name);
    out.push(u8::from(spec.residue));
    out.extend_from_slice(&(spec.layers.len() as u32).to_le_bytes());
    for (i, layer) in spec.layers.iter().enumerate() {
        out.push(match layer.activation {
            Activation::Linear => 0,
            Activation::Relu => 1,
        });
        out.extend_from_slice(&(layer.branches.len() as u32).to_le_bytes());
        for b in &layer.branches {
            for v in [spec.in_channels(i), b.filters, b.kernel_h, b.kernel_w] {
                out.extend_from_slice(&(v as u32).to_le_bytes());
            }
        }
    }
    out.extend_from_slice(&(payload_len(params) as u64).to_le_bytes());
    for conv in params.convs() {
        for &v in conv.weights().iter().chain(conv.biases()) {
            let v = v as f32;
            if !v.is_finite() {
                return Err(Error::NonFinite("model_file::encode"));
            }
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated {
                expected: (self.pos + n) as u64,
                actual: self.buf.len() as u64,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedHeader(msg.into())
}

pub fn decode(bytes: &[u8]) -> Result<(NetworkSpec, ModelParams)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic);
    }
    r.take(MAGIC.len())?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: VERSION,
        });
    }
    let name_len = r.u16()? as usize;
    let name = std::str::from_utf8(r.take(name_len)?)
        .map_err(|_| malformed("model name is not UTF-8"))?
        .to_owned();
    let residue = match r.u8()? {
        0 => false,
        1 => true,
        v => return Err(malformed(format!("residue flag {v}"))),
    };
    let layer_count = r.u32()? as usize;
    let mut layers = Vec::new();
    let mut geometry = Vec::new();
    for _ in 0..layer_count {
        let activation = match r.u8()? {
            0 => Activation::Linear,
            1 => Activation::Relu,
            v => return Err(malformed(format!("activation code {v}"))),
        };
        let branch_count = r.u32()? as usize;
        let mut branches = Vec::new();
        for _ in 0..branch_count {
            let in_channels = r.u32()? as usize;
            let b = BranchSpec {
                filters: r.u32()? as usize,
                kernel_h: r.u32()? as usize,
                kernel_w: r.u32()? as usize,
            };
            geometry.push(in_channels);
            branches.push(b);
        }
        layers.push(LayerSpec::new(branches, activation));
    }
    let spec = NetworkSpec::new(name, layers, residue).map_err(|e| malformed(e.to_string()))?;

    let mut geometry = geometry.into_iter();
    for (i, layer) in spec.layers.iter().enumerate() {
        for _ in &layer.branches {
            let stored = geometry.next().expect("one entry per branch");
            if stored != spec.in_channels(i) {
                return Err(malformed(format!(
                    "layer {} declares {stored} input channels, previous layer produces {}",
                    i + 1,
                    spec.in_channels(i)
                )));
            }
        }
    }

    let declared = r.u64()?;
    let spec_ref = &spec;
    let expected = spec
        .layers
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.branches.iter().map(move |b| (spec_ref.in_channels(i), b)))
        .try_fold(0u64, |acc, (c, b)| {
            let w = (c as u64)
                .checked_mul(b.filters as u64)?
                .checked_mul(b.kernel_h as u64)?
                .checked_mul(b.kernel_w as u64)?;
            acc.checked_add(w.checked_add(b.filters as u64)?.checked_mul(4)?)
        })
        .ok_or_else(|| malformed("layer table overflows"))?;
    if declared != expected {
        return Err(malformed(format!(
            "payload length {declared} does not match {expected} implied by the layer table"
        )));
    }
    let total = (r.pos as u64).saturating_add(expected).saturating_add(4);
    if (bytes.len() as u64) < total {
        return Err(Error::Truncated {
            expected: total,
            actual: bytes.len() as u64,
        });
    }
    let total = total as usize;
    if bytes.len() > total {
        return Err(Error::TrailingData {
            expected: total as u64,
            actual: bytes.len() as u64,
        });
    }
    let stored = u32::from_le_bytes(bytes[total - 4..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..total - 4]);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }

    let zeros = ModelParams::zeros(&spec)?;
    let mut out_layers = Vec::with_capacity(spec.layers.len());
    for convs in zeros.layers() {
        let mut loaded = Vec::with_capacity(convs.len());
        for c in convs {
            let weights = r.f32s(c.weight_count())?;
            let biases = r.f32s(c.out_channels())?;
            loaded.push(ConvParams::new(
                c.in_channels(),
                c.out_channels(),
                c.kernel_h(),
                c.kernel_w(),
                weights,
                biases,
            )?);
        }
        out_layers.push(loaded);
    }
    let params = ModelParams::from_layers(&spec, out_layers)?;
    if !params.is_finite() {
        return Err(Error::NonFinite("model_file::decode"));
    }
    Ok((spec, params))
}

/// Writes the model and returns the number of bytes written.
pub fn save_model(spec: &NetworkSpec, params: &ModelParams, path: impl AsRef<Path>) -> Result<u64> {
    let path = path.as_ref();
    let bytes = encode(spec, params)?;
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes.len() as u64)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(NetworkSpec, ModelParams)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Rounds every parameter to the nearest f32, the precision stored on disk.
pub fn round_to_storage(params: &ModelParams) -> ModelParams {
    let mut p = params.clone();
    for c in p.convs_mut() {
        for v in c.weights_mut() {
            *v = f64::from(*v as f32);
        }
        for v in c.biases_mut() {
            *v = f64::from(*v as f32);
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;
    use crate::zoo::{build_arcnn, build_vdsr, build_vrcnn, ModelKind};
    use proptest::prelude::*;

    #[test]
    fn payload_sizes() {
        for (spec, bytes, kib) in [
            (build_vrcnn(), 218_692, 213.6),
            (build_arcnn(), 426_244, 416.3),
            (build_vdsr(), 2_663_684, 2601.3),
        ] {
            let p = ModelParams::zeros(&spec).unwrap();
            assert_eq!(payload_len(&p), bytes);
            assert!(((bytes as f64 / 1024.0) - kib).abs() < 0.05);
            let total = encode(&spec, &p).unwrap().len();
            assert!(total > bytes && total - bytes < 1024);
        }
    }

    #[test]
    fn round_trip_all_builders() {
        for k in ModelKind::ALL {
            let spec = k.build();
            let p = init_params(&spec, 5).unwrap();
            let (s2, p2) = decode(&encode(&spec, &p).unwrap()).unwrap();
            assert_eq!(s2, spec);
            assert_eq!(p2, round_to_storage(&p));
        }
    }

    #[test]
    fn distinct_errors() {
        let spec = build_vrcnn();
        let good = encode(&spec, &init_params(&spec, 1).unwrap()).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::BadMagic)));

        let mut bad = good.clone();
        bad[8] = 2;
        assert!(matches!(
            decode(&bad),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));

        let mut bad = good.clone();
        let mid = bad.len() / 2;
        bad[mid] ^= 0x40;
        assert!(matches!(decode(&bad), Err(Error::ChecksumMismatch { .. })));

        assert!(matches!(
            decode(&good[..good.len() - 10]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(decode(&good[..20]), Err(Error::Truncated { .. })));

        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(decode(&bad), Err(Error::TrailingData { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn storage_round_trip_is_bit_exact(seed in any::<u64>(), scale in 1e-3f64..1e3) {
            let spec = build_vrcnn();
            let mut p = init_params(&spec, seed).unwrap();
            for c in p.convs_mut() {
                for (i, b) in c.biases_mut().iter_mut().enumerate() {
                    *b = scale * (i as f64 - 7.3);
                }
            }
            let (_, loaded) = decode(&encode(&spec, &p).unwrap()).unwrap();
            let again = encode(&spec, &loaded).unwrap();
            prop_assert_eq!(&again, &encode(&spec, &p).unwrap());
            prop_assert_eq!(loaded, round_to_storage(&p));
        }
    }
}
