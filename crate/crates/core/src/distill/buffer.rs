//! Distillation buffer and its binary file format.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  "XDBUF\0\0\1"
//! version    u32      1
//! obs_width  u32
//! n_sources  u32
//! per source: name_len u32, name (utf-8), layout_len u32, layout (JSON)
//! max_heads  u32      largest head count over sources
//! max_q      u32      largest total head width over sources
//! records    u64
//! records x { source u16, done u8, reward f64,
//!             obs [f64; obs_width], next_obs [f64; obs_width],
//!             actions [u32; max_heads]  (u32::MAX padding),
//!             teacher_q [f64; max_q]    (heads concatenated, 0.0 padding) }
//! ```

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::agents::Transition;
use crate::error::{Error, Result};
use crate::io::{read_file, write_atomic};
use crate::nn::HeadLayout;

pub const BUFFER_MAGIC: [u8; 8] = *b"XDBUF\0\0\x01";
pub const BUFFER_VERSION: u32 = 1;

/// Producer of some of the buffered transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceInfo {
    pub name: String,
    pub layout: HeadLayout,
}

/// Transitions tagged by source, each carrying the source's Q-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceBuffer {
    pub sources: Vec<SourceInfo>,
    pub obs_width: usize,
    pub transitions: Vec<Transition>,
}

impl ExperienceBuffer {
    pub fn new(sources: Vec<SourceInfo>, obs_width: usize) -> Self {
        Self {
            sources,
            obs_width,
            transitions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Number of transitions per source, in source order.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.sources.len()];
        for t in &self.transitions {
            c[t.source as usize] += 1;
        }
        c
    }

    /// Check every record against its source layout and the observation
    /// width.
    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.transitions.iter().enumerate() {
            let src = self
                .sources
                .get(t.source as usize)
                .ok_or_else(|| Error::Layout(format!("record {i} has unknown source {}", t.source)))?;
            if t.observation.len() != self.obs_width || t.next_observation.len() != self.obs_width {
                return Err(Error::Dimension {
                    context: "buffered observation",
                    expected: self.obs_width,
                    got: t.observation.len(),
                });
            }
            src.layout.check_actions(&t.actions)?;
            let q = t
                .teacher_q
                .as_ref()
                .ok_or_else(|| Error::Layout(format!("record {i} has no teacher Q-values")))?;
            let widths_ok = q.len() == src.layout.len()
                && q.iter().zip(src.layout.heads()).all(|(v, h)| v.len() == h.width);
            if !widths_ok {
                return Err(Error::Layout(format!("record {i}: teacher Q-values do not match {}", src.name)));
            }
        }
        Ok(())
    }

    fn max_heads(&self) -> usize {
        self.sources.iter().map(|s| s.layout.len()).max().unwrap_or(0)
    }

    fn max_q(&self) -> usize {
        self.sources.iter().map(|s| s.layout.total_width()).max().unwrap_or(0)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let (max_heads, max_q) = (self.max_heads(), self.max_q());
        let mut out = Vec::new();
        out.extend_from_slice(&BUFFER_MAGIC);
        out.write_u32::<LE>(BUFFER_VERSION).unwrap();
        out.write_u32::<LE>(u32_of(self.obs_width)?).unwrap();
        out.write_u32::<LE>(u32_of(self.sources.len())?).unwrap();
        for s in &self.sources {
            let layout = serde_json::to_vec(&s.layout)?;
            out.write_u32::<LE>(u32_of(s.name.len())?).unwrap();
            out.extend_from_slice(s.name.as_bytes());
            out.write_u32::<LE>(u32_of(layout.len())?).unwrap();
            out.extend_from_slice(&layout);
        }
        out.write_u32::<LE>(u32_of(max_heads)?).unwrap();
        out.write_u32::<LE>(u32_of(max_q)?).unwrap();
        out.write_u64::<LE>(self.transitions.len() as u64).unwrap();
        for t in &self.transitions {
            out.write_u16::<LE>(t.source).unwrap();
            out.write_u8(u8::from(t.done)).unwrap();
            out.write_f64::<LE>(t.reward).unwrap();
            for &v in t.observation.iter().chain(&t.next_observation) {
                out.write_f64::<LE>(v).unwrap();
            }
            for h in 0..max_heads {
                let a = t.actions.get(h).map_or(Ok(u32::MAX), |&a| u32_of(a))?;
                out.write_u32::<LE>(a).unwrap();
            }
            let q = t.teacher_q.as_deref().unwrap_or_default();
            let flat: Vec<f64> = q.iter().flatten().copied().collect();
            for k in 0..max_q {
                out.write_f64::<LE>(flat.get(k).copied().unwrap_or(0.0)).unwrap();
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::format(path, reason);
        let eof = |_| Error::format(path, "unexpected end of file");
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(eof)?;
        if magic != BUFFER_MAGIC {
            return Err(bad("not a distillation buffer"));
        }
        let version = r.read_u32::<LE>().map_err(eof)?;
        if version != BUFFER_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let obs_width = r.read_u32::<LE>().map_err(eof)? as usize;
        let n_sources = r.read_u32::<LE>().map_err(eof)? as usize;
        let mut sources = Vec::with_capacity(n_sources.min(1024));
        for _ in 0..n_sources {
            let name = read_chunk(&mut r).map_err(eof)?;
            let name = String::from_utf8(name).map_err(|_| bad("source name is not utf-8"))?;
            let layout = read_chunk(&mut r).map_err(eof)?;
            let layout: HeadLayout =
                serde_json::from_slice(&layout).map_err(|e| bad(&format!("source layout: {e}")))?;
            sources.push(SourceInfo { name, layout });
        }
        let max_heads = r.read_u32::<LE>().map_err(eof)? as usize;
        let max_q = r.read_u32::<LE>().map_err(eof)? as usize;
        let records = r.read_u64::<LE>().map_err(eof)?;
        let record_len = 2 + 1 + 8 + 16 * obs_width + 4 * max_heads + 8 * max_q;
        let remaining = bytes.len() as u64 - r.position();
        if records.checked_mul(record_len as u64) != Some(remaining) {
            return Err(bad(&format!(
                "expected {records} records of {record_len} bytes, found {remaining} bytes"
            )));
        }
        let mut transitions = Vec::with_capacity(records as usize);
        for _ in 0..records {
            let source = r.read_u16::<LE>().map_err(eof)?;
            let done = match r.read_u8().map_err(eof)? {
                0 => false,
                1 => true,
                _ => return Err(bad("done flag is not 0/1")),
            };
            let reward = r.read_f64::<LE>().map_err(eof)?;
            let mut floats = |n: usize| -> Result<Vec<f64>> {
                (0..n).map(|_| r.read_f64::<LE>().map_err(eof)).collect()
            };
            let observation = floats(obs_width)?;
            let next_observation = floats(obs_width)?;
            let src = sources
                .get(source as usize)
                .ok_or_else(|| bad(&format!("unknown source {source}")))?;
            let mut actions = Vec::with_capacity(src.layout.len());
            for h in 0..max_heads {
                let a = r.read_u32::<LE>().map_err(eof)?;
                if h < src.layout.len() {
                    actions.push(a as usize);
                }
            }
            let flat = (0..max_q)
                .map(|_| r.read_f64::<LE>().map_err(eof))
                .collect::<Result<Vec<f64>>>()?;
            let mut q = Vec::with_capacity(src.layout.len());
            let mut at = 0;
            for h in src.layout.heads() {
                q.push(flat[at..at + h.width].to_vec());
                at += h.width;
            }
            transitions.push(Transition {
                observation,
                actions,
                reward,
                next_observation,
                done,
                teacher_q: Some(q),
                source,
            });
        }
        let buf = Self {
            sources,
            obs_width,
            transitions,
        };
        buf.validate().map_err(|e| bad(&e.to_string()))?;
        Ok(buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }
}

fn u32_of(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("{n} does not fit the buffer format")))
}

fn read_chunk(r: &mut Cursor<&[u8]>) -> std::io::Result<Vec<u8>> {
    let n = r.read_u32::<LE>()? as usize;
    let left = r.get_ref().len() as u64 - r.position();
    if n as u64 > left {
        return Err(std::io::ErrorKind::UnexpectedEof.into());
    }
    let mut v = vec![0; n];
    r.read_exact(&mut v)?;
    Ok(v)
}
