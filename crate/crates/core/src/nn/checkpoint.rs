use serde::{Deserialize, Serialize};

use super::{Activation, DenseNet, LayerShape};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MSNN";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// JSON form of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub version: u32,
    pub layers: Vec<LayerRecord>,
}

impl From<&DenseNet> for NetCheckpoint {
    fn from(net: &DenseNet) -> Self {
        let layers = net
            .shapes()
            .iter()
            .enumerate()
            .map(|(l, s)| LayerRecord {
                inputs: s.inputs,
                outputs: s.outputs,
                activation: s.activation,
                weights: net.layer_weights(l).to_vec(),
                bias: net.layer_bias(l).to_vec(),
            })
            .collect();
        Self {
            version: FORMAT_VERSION,
            layers,
        }
    }
}

impl TryFrom<NetCheckpoint> for DenseNet {
    type Error = Error;

    fn try_from(ck: NetCheckpoint) -> Result<Self> {
        if ck.version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported network version {}", ck.version)));
        }
        let mut shapes = Vec::with_capacity(ck.layers.len());
        let mut params = Vec::new();
        for (i, layer) in ck.layers.into_iter().enumerate() {
            if layer.weights.len() != layer.inputs * layer.outputs || layer.bias.len() != layer.outputs {
                return Err(Error::Checkpoint(format!("layer {i} arrays do not match its shape")));
            }
            shapes.push(LayerShape {
                inputs: layer.inputs,
                outputs: layer.outputs,
                activation: layer.activation,
            });
            params.extend(layer.weights);
            params.extend(layer.bias);
        }
        DenseNet::from_parts(shapes, params)
    }
}

impl Serialize for DenseNet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        NetCheckpoint::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DenseNet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let ck = NetCheckpoint::deserialize(deserializer)?;
        DenseNet::try_from(ck).map_err(serde::de::Error::custom)
    }
}

impl DenseNet {
    /// Binary checkpoint: magic, version, layer shapes, then little-endian f64 parameters.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 9 * self.shapes().len() + 8 * self.parameter_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.shapes().len() as u32).to_le_bytes());
        for s in self.shapes() {
            out.extend_from_slice(&(s.inputs as u32).to_le_bytes());
            out.extend_from_slice(&(s.outputs as u32).to_le_bytes());
            out.push(s.activation.tag());
        }
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported network version {version}")));
        }
        let n_layers = cur.u32()? as usize;
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let inputs = cur.u32()? as usize;
            let outputs = cur.u32()? as usize;
            let tag = cur.take(1)?[0];
            let activation =
                Activation::from_tag(tag).ok_or_else(|| Error::Checkpoint(format!("unknown activation tag {tag}")))?;
            shapes.push(LayerShape {
                inputs,
                outputs,
                activation,
            });
        }
        let count: usize = shapes.iter().map(|s| s.param_count()).sum();
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let raw: [u8; 8] = cur.take(8)?.try_into().expect("8 bytes");
            params.push(f64::from_le_bytes(raw));
        }
        if cur.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        DenseNet::from_parts(shapes, params)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
