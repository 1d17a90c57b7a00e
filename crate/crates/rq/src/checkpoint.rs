//! Binary checkpoint format.
//!
//! ```text
//! magic    8 bytes  "RQCKPT\0\0"
//! version  u32
//! count    u32
//! count × network:
//!   role u8, hidden activation u8, output activation u8
//!   n_dims u32, dims n_dims × u32
//!   has_aux u8, aux_layer u32, aux_width u32
//!   n_values u64, values n_values × f64
//! ```
//!
//! All integers and floats are little-endian. Trailing bytes are rejected.

use std::path::Path;

use rq_core::agent::{Networks, Role};
use rq_core::nn::{Activation, MlpParams, MlpShape};

use crate::error::{CliError, FormatError, Result};

pub const MAGIC: [u8; 8] = *b"RQCKPT\0\0";
pub const VERSION: u32 = 1;

pub fn encode(nets: &Networks) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let entries = nets.entries();
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (role, net) in entries {
        let shape = net.shape();
        out.push(role.tag());
        out.push(shape.hidden_activation.tag());
        out.push(shape.output_activation.tag());
        out.extend_from_slice(&(shape.layer_dims.len() as u32).to_le_bytes());
        for &d in &shape.layer_dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let (has, layer, width) = match shape.aux {
            Some(a) => (1u8, a.layer as u32, a.width as u32),
            None => (0, 0, 0),
        };
        out.push(has);
        out.extend_from_slice(&layer.to_le_bytes());
        out.extend_from_slice(&width.to_le_bytes());
        out.extend_from_slice(&(net.values().len() as u64).to_le_bytes());
        for v in net.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        if self.bytes.len() - self.pos < n {
            return Err(FormatError::Truncated {
                path: self.path.to_owned(),
                what,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, FormatError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn invalid(&self, reason: impl Into<String>) -> FormatError {
        FormatError::Invalid {
            path: self.path.to_owned(),
            reason: reason.into(),
        }
    }

    fn activation(&mut self, what: &'static str) -> Result<Activation, FormatError> {
        let tag = self.u8(what)?;
        Activation::from_tag(tag)
            .ok_or_else(|| self.invalid(format!("unknown activation tag {tag}")))
    }
}

/// Parses a checkpoint. `path` only labels error messages.
pub fn decode(bytes: &[u8], path: &str) -> Result<Networks, FormatError> {
    let mut r = Reader {
        bytes,
        pos: 0,
        path,
    };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(FormatError::BadMagic {
            path: path.to_owned(),
        });
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(FormatError::Version {
            path: path.to_owned(),
            found: version,
            supported: VERSION,
        });
    }
    let count = r.u32("network count")?;
    let mut entries: Vec<(Role, MlpParams)> = Vec::new();
    for _ in 0..count {
        let tag = r.u8("role")?;
        let role =
            Role::from_tag(tag).ok_or_else(|| r.invalid(format!("unknown role tag {tag}")))?;
        if entries.iter().any(|(x, _)| *x == role) {
            return Err(r.invalid(format!("duplicate {} network", role.name())));
        }
        let hidden = r.activation("hidden activation")?;
        let output = r.activation("output activation")?;
        let n_dims = r.u32("layer count")? as usize;
        let mut dims = Vec::new();
        for _ in 0..n_dims {
            dims.push(r.u32("layer dims")? as usize);
        }
        let has_aux = r.u8("aux flag")?;
        let aux_layer = r.u32("aux layer")? as usize;
        let aux_width = r.u32("aux width")? as usize;
        let mut shape = MlpShape::new(dims, hidden, output);
        match has_aux {
            0 => {}
            1 => shape = shape.with_aux(aux_layer, aux_width),
            other => return Err(r.invalid(format!("aux flag {other}"))),
        }
        let n_values = r.u64("value count")?;
        let byte_len = n_values
            .checked_mul(8)
            .and_then(|n| usize::try_from(n).ok())
            .ok_or_else(|| r.invalid("value count overflows"))?;
        let raw = r.take(byte_len, "values")?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let net = MlpParams::from_values(shape, values)
            .map_err(|e| r.invalid(format!("{} network: {e}", role.name())))?;
        entries.push((role, net));
    }
    if r.pos != bytes.len() {
        return Err(r.invalid(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Networks::from_entries(entries).map_err(|e| r.invalid(e.to_string()))
}

pub fn save(path: &Path, nets: &Networks) -> Result<()> {
    std::fs::write(path, encode(nets)).map_err(CliError::io(path))
}

pub fn load(path: &Path) -> Result<Networks> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    Ok(decode(&bytes, &path.display().to_string())?)
}
