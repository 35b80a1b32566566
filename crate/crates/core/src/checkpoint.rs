//! Binary checkpoints: magic `LPRL`, a `u32` version, then one record per
//! tensor until end of file. A record is `u32` name length, UTF-8 name,
//! `u32` rank, `u64` dims and the `f64` payload, all little-endian.
//!
//! Record names encode the layer list, so a checkpoint rebuilds the whole
//! network without a separate architecture description.

use std::fs;
use std::path::Path;

use crate::activations::{ActivationKind, ActivationSpec, PARAM_COUNT};
use crate::error::{Error, Result};
use crate::layers::{ActivationLayer, Conv2d, Layer, Linear, MaxPool2d};
use crate::network::Network;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"LPRL";
pub const VERSION: u32 = 1;

/// One named tensor of a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Record {
    fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            shape,
            data,
        }
    }
}

pub fn encode(records: &[Record]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for r in records {
        out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.extend_from_slice(&(r.shape.len() as u32).to_le_bytes());
        for &d in &r.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &r.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(self.path, self.pos as u64, format!("truncated {what}"))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Vec<Record>> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(path, 0, "bad magic, expected LPRL"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(path, 4, format!("unsupported version {version}")));
    }
    let mut records = Vec::new();
    while r.pos < bytes.len() {
        let start = r.pos as u64;
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| Error::format(path, start + 4, "name is not UTF-8"))?
            .to_string();
        let rank = r.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64("dimension")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|n| n.checked_mul(8).is_some())
            .ok_or_else(|| Error::format(path, start, format!("record {name}: dimensions overflow")))?;
        let payload = r.take(n * 8, "payload")?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        records.push(Record { name, shape, data });
    }
    Ok(records)
}

fn tensor_record(name: String, t: &Tensor) -> Record {
    Record::new(name, t.shape().to_vec(), t.data().to_vec())
}

/// Flattens a network into records.
pub fn network_records(net: &Network) -> Vec<Record> {
    let mut out = vec![Record::new(
        "input_shape",
        vec![net.input_shape().len()],
        net.input_shape().iter().map(|&d| d as f64).collect(),
    )];
    for (i, layer) in net.layers().iter().enumerate() {
        match layer {
            Layer::Conv2d(c) => {
                out.push(tensor_record(format!("{i}.conv2d.weight"), &c.weight));
                out.push(tensor_record(format!("{i}.conv2d.bias"), &c.bias));
                out.push(Record::new(
                    format!("{i}.conv2d.hyper"),
                    vec![2],
                    vec![c.stride as f64, c.padding as f64],
                ));
            }
            Layer::MaxPool2d(p) => out.push(Record::new(
                format!("{i}.maxpool2d.hyper"),
                vec![2],
                vec![p.size as f64, p.stride as f64],
            )),
            Layer::Linear(l) => {
                out.push(tensor_record(format!("{i}.linear.weight"), &l.weight));
                out.push(tensor_record(format!("{i}.linear.bias"), &l.bias));
            }
            Layer::Activation(a) => {
                let s = a.spec;
                out.push(Record::new(
                    format!("{i}.act.{}", s.kind.name()),
                    vec![PARAM_COUNT],
                    s.values().to_vec(),
                ));
                out.push(Record::new(
                    format!("{i}.act.{}.mask", s.kind.name()),
                    vec![PARAM_COUNT],
                    s.learnable.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
                ));
            }
            Layer::Flatten => out.push(Record::new(format!("{i}.flatten"), vec![0], vec![])),
        }
    }
    out
}

fn parse_name(name: &str) -> Option<(usize, &str, &str)> {
    let (idx, rest) = name.split_once('.')?;
    let idx = idx.parse().ok()?;
    let (kind, field) = rest.split_once('.').unwrap_or((rest, ""));
    Some((idx, kind, field))
}

fn as_usize(v: f64) -> usize {
    v.max(0.0) as usize
}

/// Rebuilds a network from records produced by [`network_records`].
pub fn network_from_records(records: &[Record], path: &Path) -> Result<Network> {
    let bad = |reason: String| Error::format(path, 0, reason);
    let mut input_shape = None;
    let mut groups: Vec<(usize, String, Vec<&Record>)> = Vec::new();
    for r in records {
        if r.name == "input_shape" {
            input_shape = Some(r.data.iter().map(|&v| as_usize(v)).collect::<Vec<_>>());
            continue;
        }
        let (idx, kind, _) = parse_name(&r.name).ok_or_else(|| bad(format!("unrecognised record {}", r.name)))?;
        match groups.last_mut() {
            Some((i, _, members)) if *i == idx => members.push(r),
            _ => {
                if idx != groups.len() {
                    return Err(bad(format!("record {} out of layer order", r.name)));
                }
                groups.push((idx, kind.to_string(), vec![r]));
            }
        }
    }
    let input_shape = input_shape.ok_or_else(|| bad("missing input_shape record".into()))?;

    let find = |members: &[&Record], field: &str| -> Result<Tensor> {
        let r = members
            .iter()
            .find(|r| parse_name(&r.name).map(|(_, _, f)| f) == Some(field))
            .ok_or_else(|| bad(format!("layer {} lacks {field}", members[0].name)))?;
        Tensor::new(r.shape.clone(), r.data.clone())
    };

    let mut layers = Vec::with_capacity(groups.len());
    for (_, kind, members) in &groups {
        let layer = match kind.as_str() {
            "conv2d" => {
                let hyper = find(members, "hyper")?;
                let h = hyper.data();
                if h.len() != 2 {
                    return Err(bad(format!("{}: hyper needs 2 values", members[0].name)));
                }
                Layer::Conv2d(Conv2d {
                    weight: find(members, "weight")?.into_param(),
                    bias: find(members, "bias")?.into_param(),
                    stride: as_usize(h[0]).max(1),
                    padding: as_usize(h[1]),
                })
            }
            "maxpool2d" => {
                let hyper = find(members, "hyper")?;
                let h = hyper.data();
                if h.len() != 2 {
                    return Err(bad(format!("{}: hyper needs 2 values", members[0].name)));
                }
                Layer::MaxPool2d(MaxPool2d {
                    size: as_usize(h[0]).max(1),
                    stride: as_usize(h[1]).max(1),
                })
            }
            "linear" => Layer::Linear(Linear {
                weight: find(members, "weight")?.into_param(),
                bias: find(members, "bias")?.into_param(),
            }),
            "flatten" => Layer::Flatten,
            "act" => {
                let (values, mask) = activation_records(members, path)?;
                Layer::Activation(ActivationLayer::new(build_spec(values, mask, members[0], path)?))
            }
            other => return Err(bad(format!("unknown layer kind {other}"))),
        };
        layers.push(layer);
    }
    Network::new(layers, input_shape)
}

fn activation_records<'a>(members: &[&'a Record], path: &Path) -> Result<(&'a Record, Option<&'a Record>)> {
    let values = members
        .iter()
        .find(|r| !r.name.ends_with(".mask"))
        .ok_or_else(|| Error::format(path, 0, "activation without values"))?;
    let mask = members.iter().find(|r| r.name.ends_with(".mask")).copied();
    Ok((values, mask))
}

fn build_spec(values: &Record, mask: Option<&Record>, first: &Record, path: &Path) -> Result<ActivationSpec> {
    let kind_name = values
        .name
        .splitn(3, '.')
        .nth(2)
        .ok_or_else(|| Error::format(path, 0, format!("{}: activation kind missing", first.name)))?;
    let kind: ActivationKind = kind_name.parse()?;
    if values.data.len() != PARAM_COUNT {
        return Err(Error::format(path, 0, format!("{}: expected {PARAM_COUNT} values", values.name)));
    }
    let mut spec = ActivationSpec::init(kind);
    spec.a = values.data[0];
    spec.b = values.data[1];
    spec.alpha = values.data[2];
    spec.beta = values.data[3];
    spec.delta = values.data[4];
    if let Some(m) = mask {
        for (slot, &v) in spec.learnable.iter_mut().zip(&m.data) {
            *slot = v != 0.0;
        }
    }
    spec.validate()?;
    Ok(spec)
}

pub fn save(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(&network_records(net))).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    network_from_records(&decode(&bytes, path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Preset, Widths};

    fn small_net(kind: ActivationKind) -> Network {
        let widths = Widths {
            conv: [2, 3, 4],
            hidden: 5,
        };
        Network::preset(Preset::Conv3Fc2, ActivationSpec::init(kind), [1, 28, 28], 10, widths, 3).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut net = small_net(ActivationKind::LpRelu2);
        if let Layer::Activation(a) = &mut net.layers_mut()[1] {
            a.spec.a = 4.321_987_654_321;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.lprl");
        save(&net, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(network_records(&net), network_records(&back));
        let x = Tensor::new([1, 1, 28, 28], (0..784).map(|i| (i % 17) as f64 / 17.0).collect()).unwrap();
        assert_eq!(net.infer(&x).unwrap().data(), back.infer(&x).unwrap().data());
        assert_eq!(back.activation_specs()[0].a, 4.321_987_654_321);
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&[Record::new("w", vec![2], vec![1.0, -2.0])]);
        assert_eq!(&bytes[..4], b"LPRL");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), VERSION);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(bytes[12], b'w');
        assert_eq!(bytes.len(), 8 + 4 + 1 + 4 + 8 + 16);
    }

    #[test]
    fn corrupt_files_rejected() {
        let p = Path::new("ckpt");
        let good = encode(&network_records(&small_net(ActivationKind::Relu)));
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode(&bad_magic, p), Err(Error::Format { offset: 0, .. })));
        assert!(decode(&good[..good.len() - 3], p).is_err());
        let mut bad_version = good;
        bad_version[4] = 9;
        assert!(decode(&bad_version, p).is_err());
    }
}
