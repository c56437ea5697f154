//! File-backed simulation of a storage cluster.
//!
//! Every node of every stripe is one chunk file under a store root. A chunk
//! holds `α` coordinates, each spanning `payload_units` independent
//! subsymbols, laid out instance-major: subsymbol `(x, p)` sits at byte
//! offset `(x·P + p)·b`. Reading coordinate `x` of a node is therefore a
//! single contiguous byte range.

use std::fs::{self, File};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::Elem;
use crate::linear_code::VectorCode;
use crate::piggyback::PiggybackCode;
use crate::trace::Role;

const MANIFEST_FILE: &str = "manifest.json";
const COORDINATOR: &str = "coord";

/// A directory of chunk files, one per stored node.
#[derive(Debug, Clone)]
pub struct NodeStore {
    root: PathBuf,
    subsymbol_bytes: usize,
    alpha: usize,
    payload_units: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stripe: usize,
    pub node: usize,
    /// Unknown until a conversion assigns roles.
    pub role: Option<Role>,
    /// Relative to the store root.
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub alpha: usize,
    pub payload_units: usize,
    pub subsymbol_bytes: usize,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn stripes(&self) -> usize {
        self.entries.iter().map(|e| e.stripe + 1).max().unwrap_or(0)
    }

    pub fn stripe(&self, stripe: usize) -> Vec<&ManifestEntry> {
        let mut nodes: Vec<&ManifestEntry> = self.entries.iter().filter(|e| e.stripe == stripe).collect();
        nodes.sort_by_key(|e| e.node);
        nodes
    }

    fn entry(&self, stripe: usize, node: usize) -> Result<&ManifestEntry> {
        self.entries
            .iter()
            .find(|e| e.stripe == stripe && e.node == node)
            .ok_or_else(|| Error::Malformed(format!("manifest has no chunk for stripe {stripe} node {node}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transfer {
    pub src: String,
    pub dst: String,
    pub bytes: u64,
    /// Role of the storage node at either end.
    pub role: Role,
}

/// Bytes moved between nodes and the coordinator during one conversion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransferLog {
    pub entries: Vec<Transfer>,
}

impl TransferLog {
    pub fn total_bytes(&self) -> u64 {
        self.entries.iter().map(|t| t.bytes).sum()
    }

    pub fn bytes_for(&self, role: Role) -> u64 {
        self.entries.iter().filter(|t| t.role == role).map(|t| t.bytes).sum()
    }

    /// CSV rows `src,dst,bytes`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["src", "dst", "bytes"])?;
        for t in &self.entries {
            w.write_record([t.src.as_str(), t.dst.as_str(), &t.bytes.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl NodeStore {
    /// Opens (creating if needed) a store for codes over `GF(2^field_width)`.
    pub fn create(root: impl Into<PathBuf>, field_width: u8, alpha: usize, payload_units: usize) -> Result<NodeStore> {
        let subsymbol_bytes = match field_width {
            4 | 8 => 1,
            16 => 2,
            w => return Err(Error::UnsupportedWidth(w)),
        };
        if alpha == 0 || payload_units == 0 {
            return Err(Error::InvalidParams("alpha and payload units must be positive".into()));
        }
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(NodeStore {
            root,
            subsymbol_bytes,
            alpha,
            payload_units,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn subsymbol_bytes(&self) -> usize {
        self.subsymbol_bytes
    }

    pub fn payload_units(&self) -> usize {
        self.payload_units
    }

    pub fn chunk_bytes(&self) -> u64 {
        (self.alpha * self.payload_units * self.subsymbol_bytes) as u64
    }

    fn coord_bytes(&self) -> usize {
        self.payload_units * self.subsymbol_bytes
    }

    pub fn path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    fn encode_values(&self, values: &[Elem], out: &mut Vec<u8>) {
        for &v in values {
            if self.subsymbol_bytes == 1 {
                out.push(v as u8);
            } else {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    fn decode_values(&self, bytes: &[u8]) -> Vec<Elem> {
        if self.subsymbol_bytes == 1 {
            bytes.iter().map(|&b| b as Elem).collect()
        } else {
            bytes.chunks_exact(2).map(|c| Elem::from_le_bytes([c[0], c[1]])).collect()
        }
    }

    /// Writes a chunk given `[coord][unit]` values and returns its entry.
    fn write_chunk(&self, rel: &str, stripe: usize, node: usize, role: Option<Role>, data: &[Vec<Elem>]) -> Result<ManifestEntry> {
        let mut bytes = Vec::with_capacity(self.chunk_bytes() as usize);
        for coord in data {
            self.encode_values(coord, &mut bytes);
        }
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, &bytes)?;
        Ok(ManifestEntry {
            stripe,
            node,
            role,
            path: rel.to_string(),
            bytes: bytes.len() as u64,
        })
    }

    fn check_size(&self, entry: &ManifestEntry, actual: u64) -> Result<()> {
        if actual != self.chunk_bytes() {
            return Err(Error::Malformed(format!(
                "chunk {} has {actual} bytes, expected {}",
                entry.path,
                self.chunk_bytes()
            )));
        }
        Ok(())
    }

    /// Reads a whole chunk as `[coord][unit]`.
    pub fn read_chunk(&self, entry: &ManifestEntry) -> Result<Vec<Vec<Elem>>> {
        let bytes = fs::read(self.path(entry))?;
        self.check_size(entry, bytes.len() as u64)?;
        Ok(bytes.chunks(self.coord_bytes()).map(|c| self.decode_values(c)).collect())
    }

    /// Reads the given ascending coordinates, merging adjacent ones into a
    /// single range read. Returns the values and the bytes read.
    fn read_coords(&self, entry: &ManifestEntry, coords: &[usize]) -> Result<(Vec<Vec<Elem>>, u64)> {
        let mut file = File::open(self.path(entry))?;
        self.check_size(entry, file.metadata()?.len())?;
        let cb = self.coord_bytes();
        let mut out = Vec::with_capacity(coords.len());
        let mut read = 0u64;
        let mut i = 0;
        while i < coords.len() {
            let mut j = i + 1;
            while j < coords.len() && coords[j] == coords[j - 1] + 1 {
                j += 1;
            }
            let mut buf = vec![0u8; (j - i) * cb];
            file.seek(SeekFrom::Start((coords[i] * cb) as u64))?;
            file.read_exact(&mut buf)?;
            read += buf.len() as u64;
            out.extend(buf.chunks(cb).map(|c| self.decode_values(c)));
            i = j;
        }
        Ok((out, read))
    }

    pub fn save_manifest(&self, manifest: &Manifest) -> Result<()> {
        let text = serde_json::to_string_pretty(manifest)?;
        fs::write(self.root.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn load_manifest(&self) -> Result<Manifest> {
        let text = fs::read_to_string(self.root.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Encodes each stripe's message with `code` and stores one chunk file per
/// node. A message holds `payload_units` blocks of `k·α` elements, one block
/// per unit.
pub fn write_stripes(store: &NodeStore, code: &VectorCode, messages: &[Vec<Elem>]) -> Result<Manifest> {
    if code.alpha() != store.alpha {
        return Err(Error::DimensionMismatch(format!(
            "code has alpha {}, store expects {}",
            code.alpha(),
            store.alpha
        )));
    }
    let units = store.payload_units;
    let block = code.k() * code.alpha();
    let mut entries = Vec::new();
    for (s, message) in messages.iter().enumerate() {
        if message.len() != block * units {
            return Err(Error::LengthMismatch {
                expected: block * units,
                got: message.len(),
            });
        }
        // chunks[node][coord][unit]
        let mut chunks = vec![vec![vec![0; units]; code.alpha()]; code.n()];
        for (p, unit) in message.chunks(block).enumerate() {
            let word = code.encode(unit)?;
            for (node, symbol) in word.symbols.iter().enumerate() {
                for (x, &v) in symbol.iter().enumerate() {
                    chunks[node][x][p] = v;
                }
            }
        }
        for (node, data) in chunks.iter().enumerate() {
            let rel = format!("stripe{s}/node{node}.chunk");
            entries.push(store.write_chunk(&rel, s, node, None, data)?);
        }
    }
    let manifest = Manifest {
        alpha: store.alpha,
        payload_units: units,
        subsymbol_bytes: store.subsymbol_bytes,
        entries,
    };
    store.save_manifest(&manifest)?;
    Ok(manifest)
}

/// Merges the `chosen_sigma` stripes of `manifest` into one final stripe
/// with `chosen_r` parities. Only the subsymbols named by the conversion plan
/// are read; new parity chunks are written and retired chunks deleted, while
/// the kept data chunks stay untouched and are renumbered into the final
/// stripe.
pub fn run_conversion(
    store: &NodeStore,
    manifest: &Manifest,
    code: &PiggybackCode,
    chosen_r: usize,
    chosen_sigma: usize,
) -> Result<(TransferLog, Manifest)> {
    let plan = code.plan(chosen_r, chosen_sigma)?;
    if manifest.stripes() != chosen_sigma {
        return Err(Error::LengthMismatch {
            expected: chosen_sigma,
            got: manifest.stripes(),
        });
    }
    if manifest.alpha != code.alpha() || manifest.payload_units != store.payload_units {
        return Err(Error::DimensionMismatch("manifest does not match the store or code".into()));
    }
    let k = code.k_initial();
    let units = store.payload_units;
    let mut log = TransferLog::default();
    let mut fetched = crate::piggyback::Fetched::new(&plan, units);
    for (s, nodes) in plan.reads.iter().enumerate() {
        for (node, coords) in nodes.iter().enumerate() {
            if coords.is_empty() {
                continue;
            }
            let entry = manifest.entry(s, node)?;
            let (values, bytes) = store.read_coords(entry, coords)?;
            for (&x, v) in coords.iter().zip(values) {
                fetched.insert(s, node, x, v)?;
            }
            log.entries.push(Transfer {
                src: format!("s{s}n{node}"),
                dst: COORDINATOR.into(),
                bytes,
                role: if node < k { Role::Unchanged } else { Role::Retired },
            });
        }
    }
    let parities = code.execute(&plan, &fetched)?;

    let mut entries = Vec::new();
    for s in 0..chosen_sigma {
        for node in 0..k {
            let mut e = manifest.entry(s, node)?.clone();
            e.stripe = 0;
            e.node = s * k + node;
            e.role = Some(Role::Unchanged);
            entries.push(e);
        }
    }
    for (j, parity) in parities.iter().enumerate() {
        let rel = format!("final/new{j}.chunk");
        let entry = store.write_chunk(&rel, 0, chosen_sigma * k + j, Some(Role::New), parity)?;
        log.entries.push(Transfer {
            src: COORDINATOR.into(),
            dst: format!("new{j}"),
            bytes: entry.bytes,
            role: Role::New,
        });
        entries.push(entry);
    }
    for s in 0..chosen_sigma {
        for node in k..code.n_initial() {
            fs::remove_file(store.path(manifest.entry(s, node)?))?;
        }
    }

    let expected = (plan.trace().gamma() * store.subsymbol_bytes * units) as u64;
    if log.total_bytes() != expected {
        return Err(Error::Internal(format!(
            "transferred {} bytes, analytical bandwidth gives {expected}",
            log.total_bytes()
        )));
    }
    let final_manifest = Manifest {
        alpha: manifest.alpha,
        payload_units: units,
        subsymbol_bytes: store.subsymbol_bytes,
        entries,
    };
    store.save_manifest(&final_manifest)?;
    Ok((log, final_manifest))
}

/// Recovers every stripe's message from the nodes not in `erased`, using
/// the first `k` survivors. Erased chunks are never opened.
pub fn failure_drill(
    store: &NodeStore,
    manifest: &Manifest,
    code: &VectorCode,
    erased: &[usize],
) -> Result<Vec<Vec<Elem>>> {
    let (n, k) = (code.n(), code.k());
    let tolerance = n - k;
    if erased.len() > tolerance {
        return Err(Error::TooManyErasures {
            erased: erased.len(),
            tolerance,
        });
    }
    if let Some(&bad) = erased.iter().find(|&&e| e >= n) {
        return Err(Error::IndexOutOfRange { index: bad, limit: n });
    }
    let picks: Vec<usize> = (0..n).filter(|i| !erased.contains(i)).take(k).collect();
    let decoder = code.decoder(&picks)?;
    let mut recovered = Vec::with_capacity(manifest.stripes());
    for s in 0..manifest.stripes() {
        let chunks: Vec<Vec<Vec<Elem>>> = picks
            .iter()
            .map(|&node| store.read_chunk(manifest.entry(s, node)?))
            .collect::<Result<_>>()?;
        let mut message = Vec::with_capacity(k * code.alpha() * store.payload_units);
        for p in 0..store.payload_units {
            let symbols: Vec<Vec<Elem>> = chunks
                .iter()
                .map(|c| c.iter().map(|coord| coord[p]).collect())
                .collect();
            let refs: Vec<&[Elem]> = symbols.iter().map(Vec::as_slice).collect();
            message.extend(decoder.decode(&refs)?);
        }
        recovered.push(message);
    }
    Ok(recovered)
}
