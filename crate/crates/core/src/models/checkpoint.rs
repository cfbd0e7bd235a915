//! Binary checkpoint format.
//!
//! Layout: magic `JSCCCKPT`, version u32 LE, length-prefixed UTF-8 config
//! text (canonical `key = value` lines, including training metadata), then a
//! parameter count and per-parameter records: name (length-prefixed), rank
//! u32, extents u32 each, data as little-endian f64. Save -> load -> save is
//! byte-identical.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"JSCCCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Enhancer,
    TransNet,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Enhancer => "enhancer",
            ModelKind::TransNet => "transnet",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "enhancer" => Ok(ModelKind::Enhancer),
            "transnet" => Ok(ModelKind::TransNet),
            other => Err(Error::format(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Training provenance carried inside the config text.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrainMeta {
    pub epochs: u32,
    pub best_val_loss: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub config_text: String,
    pub params: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn meta(&self) -> TrainMeta {
        let map = parse_config_text(&self.config_text);
        TrainMeta {
            epochs: map.get("meta.epochs").and_then(|v| v.parse().ok()).unwrap_or(0),
            best_val_loss: map
                .get("meta.best_val_loss")
                .and_then(|v| v.parse().ok())
                .unwrap_or(f64::NAN),
            seed: map.get("meta.seed").and_then(|v| v.parse().ok()).unwrap_or(0),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let cfg = self.config_text.as_bytes();
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(cfg);
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, t) in &self.params {
            let nb = name.as_bytes();
            out.extend_from_slice(&(nb.len() as u32).to_le_bytes());
            out.extend_from_slice(nb);
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &e in t.shape() {
                out.extend_from_slice(&(e as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(8)?;
        if magic != MAGIC {
            return Err(Error::format("bad checkpoint magic"));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::format(format!(
                "checkpoint version {version} not supported (expected {VERSION})"
            )));
        }
        let cfg_len = cur.u32()? as usize;
        let cfg = std::str::from_utf8(cur.take(cfg_len)?)
            .map_err(|_| Error::format("checkpoint config is not UTF-8"))?
            .to_string();
        let kind_str = parse_config_text(&cfg)
            .get("kind")
            .cloned()
            .ok_or_else(|| Error::format("checkpoint config missing 'kind'"))?;
        let kind = ModelKind::parse(&kind_str)?;
        let n_params = cur.u32()? as usize;
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            let name_len = cur.u32()? as usize;
            let name = std::str::from_utf8(cur.take(name_len)?)
                .map_err(|_| Error::format("parameter name is not UTF-8"))?
                .to_string();
            let rank = cur.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(cur.u32()? as usize);
            }
            let numel: usize = shape.iter().product();
            let mut data = Vec::with_capacity(numel);
            for _ in 0..numel {
                data.push(cur.f64()?);
            }
            params.push((name, Tensor::new(shape, data)?));
        }
        if cur.pos != bytes.len() {
            return Err(Error::format(format!(
                "{} trailing bytes after checkpoint payload",
                bytes.len() - cur.pos
            )));
        }
        Ok(Checkpoint {
            kind,
            config_text: cfg,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path.as_ref())?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref())?;
        Checkpoint::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(format!(
                "checkpoint truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes([
            b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
        ]))
    }
}

pub(crate) fn parse_config_text(text: &str) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    map
}

pub(crate) fn meta_lines(meta: &TrainMeta) -> String {
    format!(
        "meta.epochs = {}\nmeta.best_val_loss = {}\nmeta.seed = {}\n",
        meta.epochs, meta.best_val_loss, meta.seed
    )
}

/// Assign checkpoint parameters into a model via its `visit_mut`, validating
/// names and shapes both ways.
pub(crate) fn assign_params(
    params: &[(String, Tensor)],
    visit_mut: impl FnOnce(&mut dyn FnMut(&str, &mut Tensor)),
) -> Result<()> {
    let mut map: BTreeMap<&str, &Tensor> = BTreeMap::new();
    for (name, t) in params {
        map.insert(name.as_str(), t);
    }
    let mut problem: Option<String> = None;
    let mut used = 0usize;
    visit_mut(&mut |name, dst| {
        if problem.is_some() {
            return;
        }
        match map.get(name) {
            Some(src) if src.shape() == dst.shape() => {
                *dst = (*src).clone();
                used += 1;
            }
            Some(src) => {
                problem = Some(format!(
                    "parameter '{name}' has shape {:?} in checkpoint, model expects {:?}",
                    src.shape(),
                    dst.shape()
                ));
            }
            None => problem = Some(format!("checkpoint is missing parameter '{name}'")),
        }
    });
    if let Some(p) = problem {
        return Err(Error::format(p));
    }
    if used != params.len() {
        return Err(Error::format(format!(
            "checkpoint has {} parameters, model consumed {used}",
            params.len()
        )));
    }
    Ok(())
}
