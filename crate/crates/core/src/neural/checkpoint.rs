//! Binary parameter checkpoints.
//!
//! ```text
//! magic    b"RBNN"
//! version  u32 LE (= 1)
//! spec     u32 LE length + JSON-encoded NetworkSpec
//! opt      u8 kind, u64 LE step
//! tensors  u32 LE count, then per tensor: u32 name length, name,
//!          u32 rank, rank × u64 dims
//! values   every tensor's values in table order, f64 LE
//! ```
//!
//! Parameter tensors come first, followed by the optimiser's moment buffers
//! (`opt.m.<i>`, `opt.v.<i>`) when present.

use std::io::{Read, Write};

use super::{Network, NetworkSpec, NeuralError, OptimizerState, Result, Tensor};

const MAGIC: &[u8; 4] = b"RBNN";
const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> NeuralError {
    NeuralError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(net: &Network, mut out: W) -> Result<()> {
    let spec = serde_json::to_vec(net.spec()).map_err(|e| bad(e.to_string()))?;
    let opt = &net.optimizer;
    let mut table: Vec<(String, Vec<usize>, &[f64])> = net
        .spec()
        .parameter_shapes()
        .into_iter()
        .zip(net.params())
        .map(|((name, shape), t)| (name, shape, t.values()))
        .collect();
    for (i, m) in opt.first.iter().enumerate() {
        table.push((format!("opt.m.{i}"), vec![m.len()], m));
    }
    for (i, v) in opt.second.iter().enumerate() {
        table.push((format!("opt.v.{i}"), vec![v.len()], v));
    }

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(spec.len() as u32).to_le_bytes());
    buf.extend_from_slice(&spec);
    buf.push(opt.kind);
    buf.extend_from_slice(&opt.step.to_le_bytes());
    buf.extend_from_slice(&(table.len() as u32).to_le_bytes());
    for (name, shape, _) in &table {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for d in shape {
            buf.extend_from_slice(&(*d as u64).to_le_bytes());
        }
    }
    for (_, _, values) in &table {
        for v in *values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(|e| bad(e.to_string()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Network> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| bad(e.to_string()))?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(bad("not a network checkpoint"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let spec_len = c.u32()? as usize;
    let spec: NetworkSpec = serde_json::from_slice(c.take(spec_len)?).map_err(|e| bad(e.to_string()))?;
    let kind = c.take(1)?[0];
    let step = c.u64()?;
    let count = c.u32()? as usize;
    let mut table = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = c.u32()? as usize;
        let name = String::from_utf8(c.take(name_len)?.to_vec()).map_err(|_| bad("tensor name is not UTF-8"))?;
        let rank = c.u32()? as usize;
        let shape = (0..rank).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        table.push((name, shape));
    }
    let mut params = Vec::new();
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (name, shape) in table {
        let n: usize = shape.iter().product();
        let raw = c.take(n.checked_mul(8).ok_or_else(|| bad("tensor too large"))?)?;
        let values: Vec<f64> = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        if name.starts_with("opt.m.") {
            first.push(values);
        } else if name.starts_with("opt.v.") {
            second.push(values);
        } else {
            params.push(Tensor::new(shape, values)?);
        }
    }
    if c.pos != bytes.len() {
        return Err(bad("trailing bytes after checkpoint"));
    }
    let optimizer = OptimizerState {
        kind,
        step,
        first,
        second,
    };
    Network::from_parts(spec, params, optimizer)
}
