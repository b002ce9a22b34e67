//! Embedding files.
//!
//! JSON Lines: one `{"id": .., "attrs": {..}, "vec": [..]}` object per line.
//! Binary: `EMB1`, little-endian `u32` dim and `u32` count, then per record a
//! `u64` id and `dim` IEEE-754 doubles. Attributes exist only in JSON Lines.
//! Generated files also get a `<path>.meta.json` sidecar.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use idshield::synthdata::{attribute_label, IdentityDatabase, IdentityRecord};
use idshield::UnitVector;
use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingRecord {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attrs: Option<BTreeMap<String, String>>,
    pub vec: Vec<f64>,
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write(&mut w).map_err(|e| CliError::io(path, e))?;
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

pub fn write_json_compact<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_atomic(path, |w| {
        serde_json::to_writer(&mut *w, value)?;
        writeln!(w)
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::data(path, e.to_string()))
}

fn check_dims(path: &Path, records: &[EmbeddingRecord]) -> CliResult<usize> {
    let Some(first) = records.first() else {
        return Err(CliError::data(path, "no records"));
    };
    let dim = first.vec.len();
    if dim == 0 {
        return Err(CliError::data(path, "record 1 has an empty vector"));
    }
    for (i, r) in records.iter().enumerate() {
        if r.vec.len() != dim {
            return Err(CliError::data(
                path,
                format!("record {} has dimension {}, expected {dim}", i + 1, r.vec.len()),
            ));
        }
        if r.vec.iter().any(|v| !v.is_finite()) {
            return Err(CliError::data(path, format!("record {} has a non-finite value", i + 1)));
        }
    }
    Ok(dim)
}

pub fn read_jsonl(path: &Path) -> CliResult<Vec<EmbeddingRecord>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| CliError::data(path, format!("line {}: {e}", n + 1)))?;
        records.push(rec);
    }
    check_dims(path, &records)?;
    Ok(records)
}

pub fn write_jsonl(path: &Path, records: &[EmbeddingRecord]) -> CliResult<()> {
    write_atomic(path, |w| {
        for r in records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn read_bin(path: &Path) -> CliResult<Vec<EmbeddingRecord>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path, e))?;
    let bad = |msg: &str| CliError::data(path, msg.to_string());
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("not an EMB1 file"));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let stride = 8 + 8 * dim;
    if dim == 0 || bytes.len() != 12 + count * stride {
        return Err(bad("length does not match header"));
    }
    let records: Vec<EmbeddingRecord> = bytes[12..]
        .chunks_exact(stride)
        .map(|chunk| EmbeddingRecord {
            id: u64::from_le_bytes(chunk[..8].try_into().unwrap()),
            attrs: None,
            vec: chunk[8..]
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        })
        .collect();
    check_dims(path, &records)?;
    Ok(records)
}

pub fn write_bin(path: &Path, records: &[EmbeddingRecord]) -> CliResult<()> {
    let dim = check_dims(path, records)?;
    let as_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| CliError::data(path, format!("{what} exceeds u32")))
    };
    let (dim32, count32) = (as_u32(dim, "dimension")?, as_u32(records.len(), "record count")?);
    write_atomic(path, |w| {
        w.write_all(MAGIC)?;
        w.write_all(&dim32.to_le_bytes())?;
        w.write_all(&count32.to_le_bytes())?;
        for r in records {
            w.write_all(&r.id.to_le_bytes())?;
            for v in &r.vec {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    })
}

pub fn read_embeddings(path: &Path, format: Format) -> CliResult<Vec<EmbeddingRecord>> {
    match format {
        Format::Jsonl => read_jsonl(path),
        Format::Bin => read_bin(path),
    }
}

pub fn write_embeddings(path: &Path, format: Format, records: &[EmbeddingRecord]) -> CliResult<()> {
    match format {
        Format::Jsonl => write_jsonl(path, records),
        Format::Bin => write_bin(path, records),
    }
}

/// Replay and database metadata stored next to an embedding file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    #[serde(default)]
    pub identity_means: BTreeMap<u64, Vec<f64>>,
    #[serde(default)]
    pub attribute_directions: BTreeMap<String, Vec<f64>>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn read_sidecar(path: &Path) -> CliResult<Option<Sidecar>> {
    let p = sidecar_path(path);
    if !p.exists() {
        return Ok(None);
    }
    read_json(&p).map(Some)
}

fn unit(path: &Path, v: Vec<f64>, what: &str) -> CliResult<UnitVector> {
    UnitVector::new(v).map_err(|e| CliError::data(path, format!("{what}: {e}")))
}

/// Loads an identity database. Vectors are normalized; means and attribute
/// directions come from the sidecar when present, and attribute labels that
/// the file does not carry (binary files) are derived from the means.
pub fn load_database(path: &Path, format: Format) -> CliResult<IdentityDatabase> {
    let raw = read_embeddings(path, format)?;
    let dim = raw[0].vec.len();
    let sidecar = read_sidecar(path)?;
    let mut identity_means = BTreeMap::new();
    let mut attribute_directions = BTreeMap::new();
    if let Some(meta) = sidecar {
        for (id, m) in meta.identity_means {
            identity_means.insert(id, unit(path, m, "identity mean")?);
        }
        for (name, d) in meta.attribute_directions {
            attribute_directions.insert(name, unit(path, d, "attribute direction")?);
        }
    }
    let mut records = Vec::with_capacity(raw.len());
    for (i, r) in raw.into_iter().enumerate() {
        let embedding = unit(path, r.vec, &format!("record {}", i + 1))?;
        let attributes = match r.attrs {
            Some(a) => a,
            None => match identity_means.get(&r.id) {
                Some(mean) => attribute_directions
                    .iter()
                    .map(|(n, d)| (n.clone(), attribute_label(d, mean.as_slice()).to_string()))
                    .collect(),
                None => BTreeMap::new(),
            },
        };
        records.push(IdentityRecord {
            identity_id: r.id,
            embedding,
            attributes,
        });
    }
    let db = IdentityDatabase {
        dim,
        records,
        identity_means,
        attribute_directions,
    };
    db.validate().map_err(|e| CliError::data(path, e.to_string()))?;
    Ok(db)
}

pub fn database_records(db: &IdentityDatabase) -> Vec<EmbeddingRecord> {
    db.records
        .iter()
        .map(|r| EmbeddingRecord {
            id: r.identity_id,
            attrs: (!r.attributes.is_empty()).then(|| r.attributes.clone()),
            vec: r.embedding.as_slice().to_vec(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<EmbeddingRecord> {
        vec![
            EmbeddingRecord {
                id: 3,
                attrs: Some([("a".to_string(), "pos".to_string())].into()),
                vec: vec![0.1, -0.2, 1e-300],
            },
            EmbeddingRecord {
                id: u64::MAX,
                attrs: None,
                vec: vec![f64::MIN_POSITIVE, 1.0 / 3.0, -0.0],
            },
        ]
    }

    #[test]
    fn jsonl_and_bin_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let j = dir.path().join("x.jsonl");
        let b = dir.path().join("x.bin");
        write_jsonl(&j, &sample()).unwrap();
        let back = read_jsonl(&j).unwrap();
        assert_eq!(back, sample());
        write_bin(&b, &back).unwrap();
        let from_bin = read_bin(&b).unwrap();
        for (x, y) in from_bin.iter().zip(&sample()) {
            assert_eq!(x.id, y.id);
            let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&x.vec), bits(&y.vec));
        }
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        std::fs::write(&p, "{\"id\": 1, \"vec\": [1.0, 0.0]}\n{\"id\": 2, \"vec\": [1.0]}\n").unwrap();
        assert!(read_jsonl(&p).unwrap_err().to_string().contains("record 2"));
        std::fs::write(&p, "{\"id\": 1, \"vec\": [1.0, 0.0]}\nnot json\n").unwrap();
        assert!(read_jsonl(&p).unwrap_err().to_string().contains("line 2"));
        let b = dir.path().join("bad.bin");
        std::fs::write(&b, b"EMB1\x02\x00\x00\x00\x01\x00\x00\x00").unwrap();
        assert_eq!(read_bin(&b).unwrap_err().exit_code(), 2);
        std::fs::write(&b, b"nope").unwrap();
        assert!(read_bin(&b).is_err());
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("a/b.bin")), PathBuf::from("a/b.bin.meta.json"));
    }
}
