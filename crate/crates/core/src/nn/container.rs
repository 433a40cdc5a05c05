//! Binary model container.
//!
//! ```text
//! latefuse-model 1\n
//! kind <kind>\n
//! meta <key>=<value>\n        (zero or more, sorted by key)
//! array <name> <d0>,<d1>,..\n (zero or more, declaration order)
//! data\n
//! <f64 little-endian values of every array, concatenated in order>
//! ```
//!
//! The text manifest is UTF-8; keys, kinds and array names contain no
//! whitespace, values contain no newline. The payload length must equal the
//! sum of the array sizes times 8 bytes exactly.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

use super::layer::{format_arch, parse_arch};
use super::network::{InputShape, Network};

pub const MAGIC: &str = "latefuse-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelContainer {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    pub arrays: Vec<NamedArray>,
}

fn is_word(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

impl ModelContainer {
    pub fn new(kind: impl Into<String>) -> Self {
        ModelContainer {
            kind: kind.into(),
            meta: BTreeMap::new(),
            arrays: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Invalid(format!("model file lacks `{key}`")))
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::Invalid(format!("model file has bad `{key}` value `{raw}`")))
    }

    pub fn push_array(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        self.arrays.push(NamedArray {
            name: name.into(),
            shape,
            data,
        });
    }

    pub fn array(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Invalid(format!("model file lacks array `{name}`")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if !is_word(&self.kind) {
            return Err(Error::Invalid(format!("bad model kind `{}`", self.kind)));
        }
        let mut head = format!("{MAGIC} {FORMAT_VERSION}\nkind {}\n", self.kind);
        for (k, v) in &self.meta {
            if !is_word(k) || k.contains('=') || v.contains('\n') {
                return Err(Error::Invalid(format!("bad metadata entry `{k}`")));
            }
            head.push_str(&format!("meta {k}={v}\n"));
        }
        for a in &self.arrays {
            if !is_word(&a.name) || a.shape.iter().product::<usize>() != a.data.len() {
                return Err(Error::Invalid(format!("bad array `{}`", a.name)));
            }
            let dims: Vec<String> = a.shape.iter().map(usize::to_string).collect();
            head.push_str(&format!("array {} {}\n", a.name, dims.join(",")));
        }
        head.push_str("data\n");
        let mut bytes = head.into_bytes();
        for a in &self.arrays {
            for v in &a.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::Invalid(format!("corrupt model file: {msg}"));
        let mut pos = 0;
        let mut next_line = || -> Result<&str> {
            let rest = &bytes[pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("unterminated manifest".into()))?;
            pos += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|_| bad("manifest is not UTF-8".into()))
        };
        let magic = next_line()?;
        if magic != format!("{MAGIC} {FORMAT_VERSION}") {
            return Err(bad(format!("unsupported header `{magic}`")));
        }
        let kind = next_line()?
            .strip_prefix("kind ")
            .ok_or_else(|| bad("missing kind".into()))?
            .to_string();
        let mut c = ModelContainer::new(kind);
        let mut shapes = Vec::new();
        loop {
            let line = next_line()?;
            if line == "data" {
                break;
            } else if let Some(kv) = line.strip_prefix("meta ") {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("bad meta `{kv}`")))?;
                c.meta.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("array ") {
                let (name, dims) = rest
                    .split_once(' ')
                    .ok_or_else(|| bad(format!("bad array line `{rest}`")))?;
                let shape = dims
                    .split(',')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad(format!("bad shape `{dims}`")))?;
                shapes.push((name.to_string(), shape));
            } else {
                return Err(bad(format!("unexpected manifest line `{line}`")));
            }
        }
        let payload = &bytes[pos..];
        let total: usize = shapes.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        if payload.len() != total * 8 {
            return Err(bad(format!(
                "payload has {} bytes, manifest declares {}",
                payload.len(),
                total * 8
            )));
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunks are 8 bytes")));
        for (name, shape) in shapes {
            let n = shape.iter().product();
            let data = values.by_ref().take(n).collect();
            c.push_array(name, shape, data);
        }
        Ok(c)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Stores a network's input shape, architecture and parameters.
pub fn network_to_container(net: &Network, kind: &str) -> ModelContainer {
    let mut c = ModelContainer::new(kind);
    c.set("input", net.input_shape());
    c.set("arch", format_arch(&net.specs()));
    for ((name, shape), data) in net.param_names().into_iter().zip(net.params()) {
        c.push_array(name, shape, data.to_vec());
    }
    c
}

pub fn network_from_container(c: &ModelContainer) -> Result<Network> {
    let input: InputShape = c.get("input")?.parse()?;
    let specs = parse_arch(c.get("arch")?)?;
    let probe = Network::new(input, &specs, 0)?;
    let params = probe
        .param_names()
        .into_iter()
        .map(|(name, shape)| {
            let a = c.array(&name)?;
            if a.shape != shape {
                return Err(Error::Shape(format!(
                    "array `{name}` has shape {:?}, architecture needs {shape:?}",
                    a.shape
                )));
            }
            Ok(a.data.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Network::from_parts(input, &specs, params)
}
