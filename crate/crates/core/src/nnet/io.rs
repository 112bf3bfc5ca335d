//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CVNN"  u32 version  u32×3 input shape  u32 layer count
//! per layer: u8 kind, then u32 hyperparameters
//!   0 conv (in_channels, filters, kernel)   1 maxpool (size, stride)
//!   2 relu   3 flatten   4 dense (inputs, units)   5 softmax
//! per parameter tensor, in layer order: u64 length, f64 values
//! u32 CRC-32 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use super::layers::LayerSpec;
use super::network::Network;
use super::tensor::Tensor;
use super::NnError;

pub const MAGIC: &[u8; 4] = b"CVNN";
pub const VERSION: u32 = 1;

pub fn to_bytes(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + net.param_count() * 8);
    out.extend_from_slice(MAGIC);
    let u32le = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    u32le(&mut out, VERSION as usize);
    for d in net.input_shape {
        u32le(&mut out, d);
    }
    u32le(&mut out, net.layers.len());
    for spec in &net.layers {
        match *spec {
            LayerSpec::Conv { in_channels, filters, kernel } => {
                out.push(0);
                for v in [in_channels, filters, kernel] {
                    u32le(&mut out, v);
                }
            }
            LayerSpec::MaxPool { size, stride } => {
                out.push(1);
                u32le(&mut out, size);
                u32le(&mut out, stride);
            }
            LayerSpec::Relu => out.push(2),
            LayerSpec::Flatten => out.push(3),
            LayerSpec::Dense { inputs, units } => {
                out.push(4);
                u32le(&mut out, inputs);
                u32le(&mut out, units);
            }
            LayerSpec::Softmax => out.push(5),
        }
    }
    for t in net.params.iter().flatten() {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(NnError::Truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Network, NnError> {
    if bytes.len() < 8 {
        return Err(NnError::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(NnError::Format("bad magic".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(NnError::Checksum);
    }
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(NnError::Format(format!("unsupported version {version}")));
    }
    let input_shape = [r.u32()?, r.u32()?, r.u32()?];
    let n = r.u32()?;
    let mut layers = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let spec = match r.u8()? {
            0 => LayerSpec::Conv { in_channels: r.u32()?, filters: r.u32()?, kernel: r.u32()? },
            1 => LayerSpec::MaxPool { size: r.u32()?, stride: r.u32()? },
            2 => LayerSpec::Relu,
            3 => LayerSpec::Flatten,
            4 => LayerSpec::Dense { inputs: r.u32()?, units: r.u32()? },
            5 => LayerSpec::Softmax,
            k => return Err(NnError::Format(format!("unknown layer kind {k}"))),
        };
        layers.push(spec);
    }
    let mut params = Vec::with_capacity(layers.len());
    for spec in &layers {
        let mut p = Vec::new();
        for shape in spec.param_shapes() {
            let len = r.u64()?;
            let expected: usize = shape.iter().product();
            if len != expected as u64 {
                return Err(NnError::Format(format!("{spec:?} stores {len} values, expected {expected}")));
            }
            let raw = r.take(expected.checked_mul(8).ok_or(NnError::Truncated)?)?;
            let data = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
            p.push(Tensor::new(shape, data)?);
        }
        params.push(p);
    }
    if r.pos != body.len() {
        return Err(NnError::Format(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Network::from_parts(input_shape, layers, params)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<(), NnError> {
    fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network, NnError> {
    from_bytes(&fs::read(path)?)
}
