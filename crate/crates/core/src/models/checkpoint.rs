//! `GSVINCK` checkpoint files: magic, version, JSON metadata, named tensors
//! as little-endian f64, CRC-32 trailer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, ModelParams};
use crate::codec::{open_frame, CodecError, Reader, Writer};
use crate::tensor::{Dims, Tensor};

pub const CHECKPOINT_MAGIC: &str = "GSVINCK";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Upper bound on a single tensor dimension.
const MAX_DIM: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Meta {
    model: ModelConfig,
    #[serde(default)]
    state: serde_json::Value,
}

/// Model weights plus optional extra tensors (optimizer state) and free-form
/// JSON state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub extra: Vec<(String, Tensor)>,
    pub state: serde_json::Value,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, params: ModelParams) -> Self {
        Self {
            config,
            params,
            extra: Vec::new(),
            state: serde_json::Value::Null,
        }
    }

    pub fn extra(&self, name: &str) -> Option<&Tensor> {
        self.extra.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let meta = Meta {
        model: ck.config.clone(),
        state: ck.state.clone(),
    };
    let mut w = Writer::with_magic(CHECKPOINT_MAGIC);
    w.u16(CHECKPOINT_VERSION);
    w.string(&serde_json::to_string(&meta).expect("metadata serializes"));
    let named: Vec<(&str, &Tensor)> = ck
        .params
        .named(&ck.config)
        .into_iter()
        .chain(ck.extra.iter().map(|(n, t)| (n.as_str(), t)))
        .collect();
    w.u32(named.len() as u32);
    for (name, t) in named {
        w.string(name);
        for d in t.dims().as_array() {
            w.u32(d as u32);
        }
        for &x in t.data() {
            w.f64(x);
        }
    }
    w.finish()
}

fn malformed(detail: impl Into<String>) -> CodecError {
    CodecError::Malformed {
        what: "checkpoint",
        detail: detail.into(),
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, ModelError> {
    let body = open_frame(bytes, CHECKPOINT_MAGIC)?;
    let mut r = Reader::new(body);
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(CodecError::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        }
        .into());
    }
    let meta: Meta = serde_json::from_str(r.string("metadata")?)
        .map_err(|e| malformed(format!("metadata: {e}")))?;
    meta.model.validate()?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let name = r.string("tensor name")?.to_string();
        let mut d = [0usize; 4];
        for slot in &mut d {
            let v = r.u32()?;
            if v == 0 || v > MAX_DIM {
                return Err(malformed(format!("{name}: dimension {v} out of range")).into());
            }
            *slot = v as usize;
        }
        let dims = Dims::new(d[0], d[1], d[2], d[3]);
        let len = d.iter().try_fold(1usize, |acc, &x| acc.checked_mul(x));
        match len {
            Some(n) if n.checked_mul(8).is_some_and(|b| b <= r.remaining()) => {}
            _ => {
                return Err(
                    malformed(format!("{name}: {dims} tensor exceeds the remaining input")).into(),
                )
            }
        }
        let data = (0..dims.len())
            .map(|_| r.f64())
            .collect::<Result<Vec<_>, _>>()?;
        if tensors.iter().any(|(n, _): &(String, Tensor)| *n == name) {
            return Err(malformed(format!("duplicate tensor {name}")).into());
        }
        tensors.push((name, Tensor::from_vec(dims, data)?));
    }
    if r.remaining() != 0 {
        return Err(malformed(format!("{} trailing bytes", r.remaining())).into());
    }
    let layout: Vec<&str> = super::param_layout(&meta.model)
        .into_iter()
        .map(|(n, _)| n)
        .collect();
    let (own, extra): (Vec<_>, Vec<_>) = tensors
        .into_iter()
        .partition(|(n, _)| layout.contains(&n.as_str()));
    let params = ModelParams::from_named(&meta.model, own)?;
    Ok(Checkpoint {
        config: meta.model,
        params,
        extra,
        state: meta.state,
    })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), ModelError> {
    std::fs::write(path, encode_checkpoint(ck))
        .map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let bytes =
        std::fs::read(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Variant;
    use proptest::prelude::*;

    fn sample() -> Checkpoint {
        let cfg = ModelConfig::new(Variant::GsVin, 5, 3);
        let params = ModelParams::init(&cfg, 7).unwrap();
        let mut ck = Checkpoint::new(cfg, params);
        ck.extra.push((
            "opt.sq.vi.kernel".into(),
            Tensor::filled(Dims::new(8, 2, 5, 5), 0.25),
        ));
        ck.state = serde_json::json!({"epoch": 4});
        ck
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let bytes = encode_checkpoint(&ck);
        assert!(bytes.starts_with(b"GSVINCK"));
        assert_eq!(decode_checkpoint(&bytes).unwrap(), ck);
        assert_eq!(
            encode_checkpoint(&decode_checkpoint(&bytes).unwrap()),
            bytes
        );
    }

    #[test]
    fn every_variant_round_trips() {
        for v in Variant::ALL {
            let cfg = ModelConfig::new(v, 3, 2);
            let ck = Checkpoint::new(cfg.clone(), ModelParams::init(&cfg, 1).unwrap());
            assert_eq!(decode_checkpoint(&encode_checkpoint(&ck)).unwrap(), ck);
        }
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = encode_checkpoint(&sample());
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(ModelError::Codec(CodecError::Checksum { .. }))
        ));
    }

    #[test]
    fn wrong_magic_and_truncation() {
        let bytes = encode_checkpoint(&sample());
        assert!(matches!(
            decode_checkpoint(&bytes[..20]),
            Err(ModelError::Codec(_))
        ));
        let mut other = bytes.clone();
        other[0] = b'X';
        assert!(matches!(
            decode_checkpoint(&other),
            Err(ModelError::Codec(CodecError::BadMagic { .. }))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn decoder_never_panics(data in proptest::collection::vec(any::<u8>(), 0..512)) {
            let _ = decode_checkpoint(&data);
        }

        #[test]
        fn decoder_survives_bit_flips(pos in 0usize..4096, bit in 0u8..8) {
            let mut bytes = encode_checkpoint(&sample());
            let p = pos % bytes.len();
            bytes[p] ^= 1 << bit;
            prop_assert!(decode_checkpoint(&bytes).is_err());
        }
    }
}
