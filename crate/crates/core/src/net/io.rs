//! Network files.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! b"STNN"  u32 version
//! u32 n  u32 p  u32 lambda  u32 l_layers
//! f64 activation_slope  u8 kind  u8 diag_mode  u8 independent_twiddles
//! f64 alpha.re  f64 alpha.im  u64 seed
//! u64 count, i64 delay exponents
//! u64 count, f64 parameters in segment order
//! ```

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DiagMode, ModelKind, Network, NetworkConfig, ParamCount, SegmentKind};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"STNN";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentValues {
    pub name: String,
    pub kind: SegmentKind,
    pub values: Vec<f64>,
}

/// Inspection view of a network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkExport {
    pub format_version: u32,
    pub config: NetworkConfig,
    pub chain_scale: f64,
    pub delay_exponents: Vec<i64>,
    pub param_count: ParamCount,
    pub segments: Vec<SegmentValues>,
}

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

struct Reader<'a>(Cursor<&'a [u8]>);

impl Reader<'_> {
    fn bytes<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut b = [0u8; K];
        self.0
            .read_exact(&mut b)
            .map_err(|_| Error::Format("network file is truncated".into()))?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

impl Network {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::with_capacity(96 + 8 * (self.params.len() + self.delay_exponents.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [c.n, c.p, c.lambda as usize, c.l_layers] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&c.activation_slope.to_le_bytes());
        out.push(match c.kind {
            ModelKind::Structured => 0,
            ModelKind::FullyConnected => 1,
        });
        out.push(match c.diag_mode {
            DiagMode::Complex => 0,
            DiagMode::RealSplit => 1,
        });
        out.push(c.independent_twiddles as u8);
        out.extend_from_slice(&c.delay_alpha.re.to_le_bytes());
        out.extend_from_slice(&c.delay_alpha.im.to_le_bytes());
        out.extend_from_slice(&c.seed.to_le_bytes());
        out.extend_from_slice(&(self.delay_exponents.len() as u64).to_le_bytes());
        for e in &self.delay_exponents {
            out.extend_from_slice(&e.to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for v in &self.params {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader(Cursor::new(bytes));
        if &r.bytes::<4>()? != MAGIC {
            return format_err("not a network file (bad magic)");
        }
        let version = r.u32()?;
        if version != VERSION {
            return format_err(format!("unsupported network format version {version}"));
        }
        let (n, p, lambda, l_layers) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        let activation_slope = r.f64()?;
        let kind = match r.u8()? {
            0 => ModelKind::Structured,
            1 => ModelKind::FullyConnected,
            k => return format_err(format!("unknown model kind tag {k}")),
        };
        let diag_mode = match r.u8()? {
            0 => DiagMode::Complex,
            1 => DiagMode::RealSplit,
            k => return format_err(format!("unknown diagonal mode tag {k}")),
        };
        let independent_twiddles = r.u8()? != 0;
        let delay_alpha = Complex64::new(r.f64()?, r.f64()?);
        let seed = r.u64()?;
        let config = NetworkConfig {
            n: n as usize,
            p: p as usize,
            lambda,
            l_layers: l_layers as usize,
            activation_slope,
            kind,
            delay_alpha,
            seed,
            diag_mode,
            independent_twiddles,
        };
        let mut net = Network::with_layout(config).map_err(|e| Error::Format(e.to_string()))?;
        let ne = r.u64()? as usize;
        if ne != net.delay_exponents.len() {
            return format_err(format!(
                "expected {} delay exponents, file has {ne}",
                net.delay_exponents.len()
            ));
        }
        let exps = (0..ne).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
        net.set_delay_exponents(exps)?;
        let np = r.u64()? as usize;
        if np != net.params.len() {
            return format_err(format!("expected {} parameters, file has {np}", net.params.len()));
        }
        for v in net.params.iter_mut() {
            *v = r.f64()?;
        }
        if (r.0.position() as usize) != bytes.len() {
            return format_err("trailing bytes after network parameters");
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn export(&self) -> NetworkExport {
        NetworkExport {
            format_version: VERSION,
            config: self.config.clone(),
            chain_scale: self.chain_scale,
            delay_exponents: self.delay_exponents.clone(),
            param_count: self.count_parameters(),
            segments: self
                .segments
                .iter()
                .map(|s| SegmentValues {
                    name: s.name.clone(),
                    kind: s.kind,
                    values: self.params[s.range()].to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.export())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::build_network;

    #[test]
    fn binary_round_trip() {
        let mut cfg = NetworkConfig::structured(8, 2, 3).with_delay_alpha(Complex64::from_polar(1.0, 0.4));
        cfg.independent_twiddles = true;
        let mut net = build_network(cfg).unwrap();
        net.randomize_all(8);
        let back = Network::from_bytes(&net.to_bytes()).unwrap();
        assert_eq!(back, net);
        let ffnn = build_network(NetworkConfig::fully_connected(4, 1).with_seed(2)).unwrap();
        assert_eq!(Network::from_bytes(&ffnn.to_bytes()).unwrap(), ffnn);
    }

    #[test]
    fn rejects_corrupt_files() {
        let net = build_network(NetworkConfig::structured(4, 1, 1)).unwrap();
        let mut bytes = net.to_bytes();
        assert!(Network::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        bytes[0] = b'X';
        assert!(matches!(Network::from_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn json_lists_every_segment() {
        let net = build_network(NetworkConfig::structured(4, 1, 2)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&net.to_json().unwrap()).unwrap();
        assert_eq!(v["segments"].as_array().unwrap().len(), net.segments().len());
        assert_eq!(v["param_count"]["total"], net.params().len());
    }
}
