//! Capture container layout (all integers little-endian):
//!
//! ```text
//! 0..4    magic "NACT"
//! 4..8    version (u32) = 1
//! 8..16   header_len (u64)
//! 16..    header: UTF-8 JSON, exactly header_len bytes
//! ...     payload: f32 LE blobs, each at a 64-byte aligned offset
//!         relative to the first payload byte
//! ```
//!
//! Tensors are written in the order `hidden.0 .. hidden.L, attn.0 .. attn.(L-1)`,
//! the first at offset 0 and each following one at the next multiple of 64
//! after the previous end. Gap bytes are zero. The file ends at the last byte
//! of the last tensor.

use std::collections::BTreeMap;
use std::io::{self, ErrorKind, Read, Write};

use serde::{Deserialize, Serialize};

use super::validate::{check_shapes, validate_record, ValidationConfig, ValidationReport};
use super::{CaptureError, CaptureRecord, ModelSpec, Result, Tensor};

pub const MAGIC: &[u8; 4] = b"NACT";
pub const FORMAT_VERSION: u32 = 1;
pub const TENSOR_ALIGNMENT: u64 = 64;
pub const CAPTURE_EXTENSION: &str = "nact";

const DTYPE: &str = "f32";
const MAX_HEADER_LEN: u64 = 64 << 20;
/// Target number of floats decoded per visitor call.
const CHUNK_FLOATS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub byte_len: u64,
}

impl TensorEntry {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn row_len(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    fn end(&self) -> u64 {
        self.offset + self.byte_len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TensorKind {
    Hidden(usize),
    Attention(usize),
}

impl TensorKind {
    pub fn parse(name: &str) -> Option<Self> {
        let (prefix, index) = name.split_once('.')?;
        if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if index.len() > 1 && index.starts_with('0') {
            return None;
        }
        let index = index.parse().ok()?;
        match prefix {
            "hidden" => Some(TensorKind::Hidden(index)),
            "attn" => Some(TensorKind::Attention(index)),
            _ => None,
        }
    }
}

/// JSON header of a capture file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureHeader {
    pub model: ModelSpec,
    pub category: String,
    pub prompt_id: String,
    pub prompt_text: String,
    pub seq_len: usize,
    pub dtype: String,
    pub tensors: Vec<TensorEntry>,
}

fn align_up(n: u64) -> u64 {
    n.div_ceil(TENSOR_ALIGNMENT) * TENSOR_ALIGNMENT
}

impl CaptureHeader {
    /// Header describing `record` with canonical tensor order and offsets.
    pub fn for_record(record: &CaptureRecord) -> Self {
        let mut tensors = Vec::with_capacity(record.hidden.len() + record.attention.len());
        let mut next = 0u64;
        for (name, t) in record.named_tensors() {
            let offset = align_up(next);
            let byte_len = t.byte_len() as u64;
            tensors.push(TensorEntry {
                name,
                shape: t.shape().to_vec(),
                offset,
                byte_len,
            });
            next = offset + byte_len;
        }
        Self {
            model: record.model.clone(),
            category: record.category.clone(),
            prompt_id: record.prompt_id.clone(),
            prompt_text: record.prompt_text.clone(),
            seq_len: record.seq_len,
            dtype: DTYPE.to_string(),
            tensors,
        }
    }

    pub fn payload_len(&self) -> u64 {
        self.tensors.iter().map(TensorEntry::end).max().unwrap_or(0)
    }

    /// Tensor entries sorted by payload offset, paired with their kind.
    pub fn layout(&self) -> Result<Vec<(TensorKind, &TensorEntry)>> {
        let mut entries = Vec::with_capacity(self.tensors.len());
        for t in &self.tensors {
            let kind = TensorKind::parse(&t.name)
                .ok_or_else(|| CaptureError::Format(format!("unknown tensor name {:?}", t.name)))?;
            entries.push((kind, t));
        }
        entries.sort_by_key(|(_, t)| t.offset);
        Ok(entries)
    }

    /// Shapes of `hidden.*` and `attn.*` ordered by index.
    pub fn shapes(&self) -> (Vec<&[usize]>, Vec<&[usize]>) {
        let mut hidden = BTreeMap::new();
        let mut attention = BTreeMap::new();
        for t in &self.tensors {
            match TensorKind::parse(&t.name) {
                Some(TensorKind::Hidden(i)) => {
                    hidden.insert(i, t.shape.as_slice());
                }
                Some(TensorKind::Attention(i)) => {
                    attention.insert(i, t.shape.as_slice());
                }
                None => {}
            }
        }
        (
            hidden.into_values().collect(),
            attention.into_values().collect(),
        )
    }

    /// Shape violations implied by the header alone.
    pub fn shape_report(&self) -> ValidationReport {
        let (hidden, attention) = self.shapes();
        let mut report = ValidationReport::new();
        check_shapes(&self.model, self.seq_len, &hidden, &attention, &mut report);
        report
    }

    /// Container-level consistency: dtype, names, alignment, sizes, overlap.
    fn check(&self) -> Result<()> {
        if self.dtype != DTYPE {
            return Err(CaptureError::Format(format!(
                "unsupported dtype {:?}, expected {DTYPE:?}",
                self.dtype
            )));
        }
        let layout = self.layout()?;
        let mut hidden = Vec::new();
        let mut attention = Vec::new();
        let mut prev_end = 0u64;
        for (kind, t) in &layout {
            match kind {
                TensorKind::Hidden(i) => hidden.push(*i),
                TensorKind::Attention(i) => attention.push(*i),
            }
            if t.offset % TENSOR_ALIGNMENT != 0 {
                return Err(CaptureError::Format(format!(
                    "{}: offset {} is not a multiple of {TENSOR_ALIGNMENT}",
                    t.name, t.offset
                )));
            }
            let expected = t
                .shape
                .iter()
                .try_fold(4u64, |acc, &d| acc.checked_mul(d as u64));
            if expected != Some(t.byte_len) {
                return Err(CaptureError::Corruption(format!(
                    "{}: byte_len {} does not match shape {:?}",
                    t.name, t.byte_len, t.shape
                )));
            }
            if t.offset < prev_end {
                return Err(CaptureError::Corruption(format!(
                    "{}: offset {} overlaps the previous tensor",
                    t.name, t.offset
                )));
            }
            prev_end = t
                .offset
                .checked_add(t.byte_len)
                .ok_or_else(|| CaptureError::Corruption(format!("{}: size overflow", t.name)))?;
        }
        for (label, mut indices) in [("hidden", hidden), ("attn", attention)] {
            indices.sort_unstable();
            for (expected, &got) in indices.iter().enumerate() {
                if got != expected {
                    let problem = if expected > 0 && indices[expected - 1] == got {
                        "duplicate"
                    } else {
                        "missing"
                    };
                    return Err(CaptureError::Format(format!(
                        "{problem} tensor index in {label}.* near {label}.{expected}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn eof_as(e: io::Error, what: impl FnOnce() -> CaptureError) -> CaptureError {
    if e.kind() == ErrorKind::UnexpectedEof {
        what()
    } else {
        CaptureError::Io(e)
    }
}

/// Reads and checks the preamble and JSON header, leaving `source` at the payload start.
pub fn read_header<R: Read>(source: &mut R) -> Result<CaptureHeader> {
    let mut preamble = [0u8; 16];
    source.read_exact(&mut preamble).map_err(|e| {
        eof_as(e, || {
            CaptureError::Format("file shorter than the preamble".into())
        })
    })?;
    if &preamble[0..4] != MAGIC {
        return Err(CaptureError::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&preamble[0..4]),
            std::str::from_utf8(MAGIC).unwrap()
        )));
    }
    let version = u32::from_le_bytes(preamble[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(CaptureError::Format(format!(
            "unsupported version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let header_len = u64::from_le_bytes(preamble[8..16].try_into().unwrap());
    if header_len > MAX_HEADER_LEN {
        return Err(CaptureError::Format(format!(
            "header_len {header_len} exceeds {MAX_HEADER_LEN}"
        )));
    }
    let mut json = vec![0u8; header_len as usize];
    source
        .read_exact(&mut json)
        .map_err(|e| eof_as(e, || CaptureError::Corruption("truncated header".into())))?;
    let header: CaptureHeader = serde_json::from_slice(&json)
        .map_err(|e| CaptureError::Format(format!("header JSON: {e}")))?;
    header.check()?;
    Ok(header)
}

fn skip_bytes<R: Read>(source: &mut R, n: u64, name: &str) -> Result<()> {
    let copied = io::copy(&mut source.by_ref().take(n), &mut io::sink())?;
    if copied != n {
        return Err(CaptureError::Corruption(format!(
            "payload truncated before {name}"
        )));
    }
    Ok(())
}

/// Streams the payload tensor by tensor in offset order.
///
/// `visit(kind, entry, first_element, values)` receives whole rows (multiples of
/// the innermost dimension) so row-wise reductions never straddle calls. Fails
/// with a corruption error if the payload is shorter or longer than declared.
pub fn scan_payload<R, F>(source: &mut R, header: &CaptureHeader, mut visit: F) -> Result<()>
where
    R: Read,
    F: FnMut(TensorKind, &TensorEntry, usize, &[f32]),
{
    let mut pos = 0u64;
    let mut bytes = Vec::new();
    let mut floats = Vec::new();
    for (kind, entry) in header.layout()? {
        skip_bytes(source, entry.offset - pos, &entry.name)?;
        let row_len = entry.row_len().max(1);
        let chunk = (CHUNK_FLOATS / row_len).max(1) * row_len;
        let total = entry.numel();
        let mut done = 0usize;
        while done < total {
            let n = chunk.min(total - done);
            bytes.resize(n * 4, 0);
            source.read_exact(&mut bytes).map_err(|e| {
                eof_as(e, || {
                    CaptureError::Corruption(format!("payload truncated inside {}", entry.name))
                })
            })?;
            floats.clear();
            floats.extend(
                bytes
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            );
            visit(kind, entry, done, &floats);
            done += n;
        }
        pos = entry.end();
    }
    let mut probe = [0u8; 1];
    loop {
        match source.read(&mut probe) {
            Ok(0) => return Ok(()),
            Ok(_) => {
                return Err(CaptureError::Corruption(format!(
                    "payload longer than the {} bytes the header declares",
                    header.payload_len()
                )))
            }
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
}

/// Parses a capture without checking record invariants.
pub fn read_record_unchecked<R: Read>(source: &mut R) -> Result<CaptureRecord> {
    let header = read_header(source)?;
    let (hidden_count, attention_count) =
        header
            .tensors
            .iter()
            .fold((0, 0), |(h, a), t| match TensorKind::parse(&t.name) {
                Some(TensorKind::Hidden(_)) => (h + 1, a),
                Some(TensorKind::Attention(_)) => (h, a + 1),
                None => (h, a),
            });
    // filled lazily so a lying header cannot force a huge allocation
    let mut hidden: Vec<Vec<f32>> = vec![Vec::new(); hidden_count];
    let mut attention: Vec<Vec<f32>> = vec![Vec::new(); attention_count];
    scan_payload(source, &header, |kind, _, _, values| match kind {
        TensorKind::Hidden(i) => hidden[i].extend_from_slice(values),
        TensorKind::Attention(i) => attention[i].extend_from_slice(values),
    })?;
    let (hidden_shapes, attention_shapes) = header.shapes();
    let build = |shapes: Vec<&[usize]>, data: Vec<Vec<f32>>| -> Result<Vec<Tensor>> {
        shapes
            .into_iter()
            .zip(data)
            .map(|(shape, d)| Tensor::new(shape.to_vec(), d))
            .collect()
    };
    let hidden = build(hidden_shapes, hidden)?;
    let attention = build(attention_shapes, attention)?;
    Ok(CaptureRecord {
        model: header.model,
        category: header.category,
        prompt_id: header.prompt_id,
        prompt_text: header.prompt_text,
        seq_len: header.seq_len,
        hidden,
        attention,
    })
}

/// Parses a capture and rejects it unless every record invariant holds.
pub fn read_record<R: Read>(source: &mut R) -> Result<CaptureRecord> {
    let record = read_record_unchecked(source)?;
    let report = validate_record(&record, &ValidationConfig::default());
    if !report.is_empty() {
        return Err(CaptureError::Validation(report));
    }
    Ok(record)
}

/// Serializes a valid record. Invalid records are rejected before any byte is written.
pub fn write_record<W: Write>(record: &CaptureRecord, sink: &mut W) -> Result<()> {
    let report = validate_record(record, &ValidationConfig::default());
    if !report.is_empty() {
        return Err(CaptureError::Validation(report));
    }
    let header = CaptureHeader::for_record(record);
    let json = serde_json::to_vec(&header)
        .map_err(|e| CaptureError::Format(format!("header JSON: {e}")))?;
    sink.write_all(MAGIC)?;
    sink.write_all(&FORMAT_VERSION.to_le_bytes())?;
    sink.write_all(&(json.len() as u64).to_le_bytes())?;
    sink.write_all(&json)?;

    let zeros = [0u8; TENSOR_ALIGNMENT as usize];
    let mut pos = 0u64;
    let mut buf = Vec::with_capacity(CHUNK_FLOATS * 4);
    for ((_, tensor), entry) in record.named_tensors().zip(&header.tensors) {
        sink.write_all(&zeros[..(entry.offset - pos) as usize])?;
        for chunk in tensor.data().chunks(CHUNK_FLOATS) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            sink.write_all(&buf)?;
        }
        pos = entry.end();
    }
    sink.flush()?;
    Ok(())
}
