use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::chunk::Chunk;
use super::embed::{cosine, EmbedderSpec};
use super::MemoryError;
use crate::PlayerId;

/// On-disk layout version written to the manifest.
pub const STORE_FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartitionKey {
    pub player: PlayerId,
    pub world: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub player: PlayerId,
    pub world: String,
    pub record_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub key: RecordKey,
    pub chunk: Chunk,
    pub vector: Vec<f32>,
}

#[derive(Debug, Default)]
struct Partition {
    records: Vec<MemoryRecord>,
}

/// Exact cosine-similarity store, partitioned by (player, world).
///
/// Layout on disk:
///
/// ```text
/// <dir>/manifest.json          {"version", "dim", "partitions": [{player, world, file, records}]}
/// <dir>/p<player>-<n>.log      repeated records:
///                                u64 LE record_id
///                                u32 LE length, then that many bytes of chunk JSON
///                                dim × f32 LE vector
/// ```
#[derive(Debug)]
pub struct MemoryStore {
    dim: usize,
    partitions: RwLock<BTreeMap<PartitionKey, Partition>>,
}

pub type SharedStore = Arc<MemoryStore>;

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    dim: usize,
    partitions: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    player: PlayerId,
    world: String,
    file: String,
    records: usize,
}

impl MemoryStore {
    pub fn new(dim: usize) -> Self {
        MemoryStore { dim, partitions: RwLock::new(BTreeMap::new()) }
    }

    pub fn shared(dim: usize) -> SharedStore {
        Arc::new(MemoryStore::new(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&self, player: PlayerId, world: &str, chunk: Chunk, embedder: &EmbedderSpec) -> Result<u64, MemoryError> {
        if embedder.dim() != self.dim {
            return Err(MemoryError::DimensionMismatch { expected: self.dim, got: embedder.dim() });
        }
        let vector = embedder.embed(&chunk.text)?;
        self.insert_vector(player, world, chunk, vector)
    }

    /// Insert a precomputed unit vector.
    pub fn insert_vector(&self, player: PlayerId, world: &str, chunk: Chunk, vector: Vec<f32>) -> Result<u64, MemoryError> {
        if vector.len() != self.dim {
            return Err(MemoryError::DimensionMismatch { expected: self.dim, got: vector.len() });
        }
        let mut parts = self.partitions.write();
        let part = parts.entry(PartitionKey { player, world: world.to_string() }).or_default();
        let record_id = part.records.last().map_or(0, |r| r.key.record_id + 1);
        part.records.push(MemoryRecord {
            key: RecordKey { player, world: world.to_string(), record_id },
            chunk,
            vector,
        });
        Ok(record_id)
    }

    pub fn retrieve(
        &self,
        player: PlayerId,
        world: &str,
        query: &str,
        k: usize,
        embedder: &EmbedderSpec,
    ) -> Result<Vec<(MemoryRecord, f64)>, MemoryError> {
        if k == 0 || self.partition_len(player, world) == 0 {
            return Ok(Vec::new());
        }
        let q = embedder.embed(query)?;
        self.retrieve_vector(player, world, &q, k)
    }

    /// Top-`k` by cosine similarity, descending; ties by ascending record id.
    pub fn retrieve_vector(&self, player: PlayerId, world: &str, query: &[f32], k: usize) -> Result<Vec<(MemoryRecord, f64)>, MemoryError> {
        if query.len() != self.dim {
            return Err(MemoryError::DimensionMismatch { expected: self.dim, got: query.len() });
        }
        let parts = self.partitions.read();
        let Some(part) = parts.get(&PartitionKey { player, world: world.to_string() }) else {
            return Ok(Vec::new());
        };
        let mut scored: Vec<(usize, f64)> = part.records.iter().enumerate().map(|(i, r)| (i, cosine(&r.vector, query))).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(part.records[a.0].key.record_id.cmp(&part.records[b.0].key.record_id)));
        scored.truncate(k);
        Ok(scored.into_iter().map(|(i, s)| (part.records[i].clone(), s)).collect())
    }

    pub fn partition_len(&self, player: PlayerId, world: &str) -> usize {
        self.partitions
            .read()
            .get(&PartitionKey { player, world: world.to_string() })
            .map_or(0, |p| p.records.len())
    }

    pub fn partitions(&self) -> Vec<PartitionKey> {
        self.partitions.read().keys().cloned().collect()
    }

    pub fn records(&self, player: PlayerId, world: &str) -> Vec<MemoryRecord> {
        self.partitions
            .read()
            .get(&PartitionKey { player, world: world.to_string() })
            .map(|p| p.records.clone())
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.partitions.read().values().map(|p| p.records.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn save(&self, dir: &Path) -> Result<(), MemoryError> {
        fs::create_dir_all(dir)?;
        let parts = self.partitions.read();
        let mut entries = Vec::new();
        for (n, (key, part)) in parts.iter().enumerate() {
            let file = format!("p{}-{n}.log", key.player.index());
            let mut w = BufWriter::new(File::create(dir.join(&file))?);
            for r in &part.records {
                let meta = serde_json::to_vec(&r.chunk)?;
                w.write_all(&r.key.record_id.to_le_bytes())?;
                w.write_all(&(meta.len() as u32).to_le_bytes())?;
                w.write_all(&meta)?;
                for x in &r.vector {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            w.flush()?;
            entries.push(ManifestEntry { player: key.player, world: key.world.clone(), file, records: part.records.len() });
        }
        let manifest = Manifest { version: STORE_FORMAT_VERSION, dim: self.dim, partitions: entries };
        fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<MemoryStore, MemoryError> {
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
        if manifest.version != STORE_FORMAT_VERSION {
            return Err(MemoryError::Corrupt(format!("unsupported store version {}", manifest.version)));
        }
        let store = MemoryStore::new(manifest.dim);
        {
            let mut parts = store.partitions.write();
            for e in manifest.partitions {
                let mut r = BufReader::new(File::open(dir.join(&e.file))?);
                let mut records = Vec::with_capacity(e.records);
                for _ in 0..e.records {
                    let record_id = u64::from_le_bytes(read_array(&mut r)?);
                    let len = u32::from_le_bytes(read_array(&mut r)?) as usize;
                    let mut meta = vec![0u8; len];
                    r.read_exact(&mut meta)?;
                    let chunk: Chunk = serde_json::from_slice(&meta)?;
                    let vector = (0..manifest.dim)
                        .map(|_| read_array(&mut r).map(f32::from_le_bytes))
                        .collect::<Result<Vec<_>, _>>()?;
                    records.push(MemoryRecord { key: RecordKey { player: e.player, world: e.world.clone(), record_id }, chunk, vector });
                }
                parts.insert(PartitionKey { player: e.player, world: e.world }, Partition { records });
            }
        }
        Ok(store)
    }
}

fn read_array<const N: usize>(r: &mut impl Read) -> std::io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}
