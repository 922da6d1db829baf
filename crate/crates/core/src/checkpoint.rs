//! Binary checkpoints: a TOML header describing the model followed by every
//! named parameter as little-endian f64.

use std::io::Read;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FactModel, ModelConfig};
use crate::params::ParamStore;
use crate::types::write_atomic;

const MAGIC: &[u8; 8] = b"FINEFACT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    /// Epoch the parameters were taken from; 0 for an untrained model.
    pub epoch: usize,
    pub val_bacc: Option<f64>,
    pub val_f1: Option<f64>,
    pub threshold: f64,
    pub model: ModelConfig,
}

impl CheckpointMeta {
    pub fn new(model: ModelConfig, seed: u64) -> Self {
        Self {
            seed,
            epoch: 0,
            val_bacc: None,
            val_f1: None,
            threshold: 0.5,
            model,
        }
    }
}

fn encode(meta_text: &str, store: &ParamStore) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + meta_text.len() + store.num_scalars() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta_text.len() as u64).to_le_bytes());
    buf.extend_from_slice(meta_text.as_bytes());
    buf.extend_from_slice(&(store.len() as u64).to_le_bytes());
    for (_, p) in store.iter() {
        buf.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(p.name.as_bytes());
        buf.push(p.trainable as u8);
        buf.extend_from_slice(&(p.value.nrows() as u64).to_le_bytes());
        buf.extend_from_slice(&(p.value.ncols() as u64).to_le_bytes());
        for v in p.value.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("length overflow".into()))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

fn decode(bytes: &[u8]) -> Result<(String, ParamStore)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let meta_len = r.len()?;
    let meta = r.string(meta_len)?;
    let count = r.len()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = r.string(name_len)?;
        let trainable = r.take(1)?[0] != 0;
        let rows = r.len()?;
        let cols = r.len()?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint(format!("{name}: shape overflow")))?;
        let raw = r.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("size overflow".into()))?,
        )?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let value = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        if store.id(&name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate parameter {name}")));
        }
        store.add(name, value, trainable);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok((meta, store))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes)
}

/// Writes a bare parameter store, e.g. a pretrained encoder backbone.
pub fn write_params(path: &Path, store: &ParamStore) -> Result<()> {
    let bytes = encode("", store);
    write_atomic(path, &bytes)
}

/// Reads only the parameters of any checkpoint file.
pub fn read_params(path: &Path) -> Result<ParamStore> {
    Ok(decode(&read_bytes(path)?)?.1)
}

pub fn save_model(path: &Path, model: &FactModel, meta: &CheckpointMeta) -> Result<()> {
    let text = toml::to_string(meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let bytes = encode(&text, &model.store);
    write_atomic(path, &bytes)
}

pub fn load_model(path: &Path) -> Result<(FactModel, CheckpointMeta)> {
    let (text, store) = decode(&read_bytes(path)?)?;
    if text.is_empty() {
        return Err(Error::Checkpoint(format!(
            "{} holds parameters only, no model description",
            path.display()
        )));
    }
    let meta: CheckpointMeta =
        toml::from_str(&text).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    let mut model = FactModel::init(meta.model.clone(), meta.seed)?;
    let n = model.store.load_matching(&store)?;
    if n != model.store.len() || n != store.len() {
        return Err(Error::Checkpoint(format!(
            "{} holds {} parameters, model expects {} ({n} matched)",
            path.display(),
            store.len(),
            model.store.len()
        )));
    }
    Ok((model, meta))
}
