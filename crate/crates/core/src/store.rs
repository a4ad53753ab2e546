//! File-backed sketch store, keyed by `(dimension, period)`.
//!
//! Layout under the store root: one file per sketch at
//! `<dimension>/<period>.skp`, and when elements were ingested directly
//! (rather than a pre-built sketch being put), their raw stream is kept at
//! `.raw/<dimension>/<period>.txt`, one element per line. Raw streams are
//! what makes salt rotation possible: a sketch alone cannot be re-hashed.
//!
//! All writes go through a temp-file-then-rename step so a crash can
//! strand a hidden `.*.tmp` file but never a half-written sketch.

use crate::hash::Salt;
use crate::sketch::{Algo, Sketch, SketchError};
use chrono::{DateTime, NaiveDate, Utc};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

/// Longest accepted dimension name.
pub const DIMENSION_MAX_LEN: usize = 128;

#[derive(Debug)]
pub enum StoreError {
    /// Dimension names are 1..=128 chars of `[A-Za-z0-9_-]`.
    InvalidDimension(String),
    /// Periods are calendar dates in `YYYY-MM-DD` form.
    InvalidPeriod(String),
    /// The key already holds a sketch and overwrite was not requested.
    DuplicateKey { dimension: String, period: NaiveDate },
    /// No sketch under the key.
    UnknownKey { dimension: String, period: NaiveDate },
    Sketch(SketchError),
    Io(io::Error),
}

impl fmt::Display for StoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoreError::InvalidDimension(d) => {
                write!(f, "invalid dimension {d:?}: need 1..=128 chars of [A-Za-z0-9_-]")
            }
            StoreError::InvalidPeriod(p) => {
                write!(f, "invalid period {p:?}: need a YYYY-MM-DD date")
            }
            StoreError::DuplicateKey { dimension, period } => {
                write!(f, "key ({dimension}, {period}) already exists; pass overwrite to replace")
            }
            StoreError::UnknownKey { dimension, period } => {
                write!(f, "no sketch under ({dimension}, {period})")
            }
            StoreError::Sketch(e) => write!(f, "sketch error: {e}"),
            StoreError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for StoreError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            StoreError::Sketch(e) => Some(e),
            StoreError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<SketchError> for StoreError {
    fn from(e: SketchError) -> StoreError {
        StoreError::Sketch(e)
    }
}

impl From<io::Error> for StoreError {
    fn from(e: io::Error) -> StoreError {
        StoreError::Io(e)
    }
}

/// A sketch pulled out of the store, with its key and file timestamp.
#[derive(Debug, Clone)]
pub struct SketchRecord {
    pub dimension: String,
    pub period: NaiveDate,
    pub sketch: Sketch,
    pub created_at: DateTime<Utc>,
}

impl SketchRecord {
    pub fn salt_fingerprint(&self) -> u64 {
        self.sketch.salt_fingerprint()
    }
}

/// What a salt rotation did.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub enum RotationOutcome {
    /// Every stored sketch was rebuilt from its raw stream under the new salt.
    Rotated { records: usize },
    /// Nothing was touched: the listed keys have no raw stream to rebuild
    /// from, and rotating only part of the store would leave sketches with
    /// mixed salts that can never be merged again.
    Refused { stranded: Vec<(String, NaiveDate)> },
}

/// Validates a dimension name.
pub fn validate_dimension(dimension: &str) -> Result<(), StoreError> {
    let ok_len = !dimension.is_empty() && dimension.len() <= DIMENSION_MAX_LEN;
    let ok_chars = dimension
        .bytes()
        .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
    if ok_len && ok_chars {
        Ok(())
    } else {
        Err(StoreError::InvalidDimension(dimension.to_string()))
    }
}

/// Parses a `YYYY-MM-DD` period, rejecting non-canonical spellings.
pub fn parse_period(s: &str) -> Result<NaiveDate, StoreError> {
    let date = NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| StoreError::InvalidPeriod(s.to_string()))?;
    if date.format("%Y-%m-%d").to_string() != s {
        return Err(StoreError::InvalidPeriod(s.to_string()));
    }
    Ok(date)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths always have a parent");
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .expect("store file names are valid UTF-8");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Directory-per-dimension sketch store.
#[derive(Debug, Clone)]
pub struct SketchStore {
    root: PathBuf,
}

impl SketchStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<SketchStore, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(SketchStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn sketch_path(&self, dimension: &str, period: NaiveDate) -> PathBuf {
        self.root.join(dimension).join(format!("{period}.skp"))
    }

    fn raw_path(&self, dimension: &str, period: NaiveDate) -> PathBuf {
        self.root
            .join(".raw")
            .join(dimension)
            .join(format!("{period}.txt"))
    }

    /// Stores a pre-built sketch under `(dimension, period)`.
    pub fn put(
        &self,
        dimension: &str,
        period: NaiveDate,
        sketch: &Sketch,
        overwrite: bool,
    ) -> Result<(), StoreError> {
        validate_dimension(dimension)?;
        let path = self.sketch_path(dimension, period);
        if !overwrite && path.exists() {
            return Err(StoreError::DuplicateKey {
                dimension: dimension.to_string(),
                period,
            });
        }
        write_atomic(&path, &sketch.serialize())
    }

    /// Loads the sketch under `(dimension, period)`.
    pub fn get(&self, dimension: &str, period: NaiveDate) -> Result<SketchRecord, StoreError> {
        validate_dimension(dimension)?;
        let path = self.sketch_path(dimension, period);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::UnknownKey {
                    dimension: dimension.to_string(),
                    period,
                })
            }
            Err(e) => return Err(e.into()),
        };
        let sketch = Sketch::deserialize(&bytes)?;
        let created_at = fs::metadata(&path)?.modified()?.into();
        Ok(SketchRecord {
            dimension: dimension.to_string(),
            period,
            sketch,
            created_at,
        })
    }

    fn periods_in_dir(&self, dimension: &str) -> Result<Vec<NaiveDate>, StoreError> {
        let dir = self.root.join(dimension);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut periods = Vec::new();
        for entry in entries {
            let entry = entry?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            // Skip in-flight temp files and anything that is not a sketch.
            let Some(stem) = name.strip_suffix(".skp") else { continue };
            if name.starts_with('.') {
                continue;
            }
            if let Ok(period) = parse_period(stem) {
                periods.push(period);
            }
        }
        periods.sort_unstable();
        Ok(periods)
    }

    fn dimensions(&self) -> Result<Vec<String>, StoreError> {
        let mut dims = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            if validate_dimension(name).is_ok() {
                dims.push(name.to_string());
            }
        }
        dims.sort_unstable();
        Ok(dims)
    }

    /// Every `(dimension, period)` key in the store, in key order.
    pub fn keys(&self) -> Result<Vec<(String, NaiveDate)>, StoreError> {
        let mut keys = Vec::new();
        for dim in self.dimensions()? {
            for period in self.periods_in_dir(&dim)? {
                keys.push((dim.clone(), period));
            }
        }
        Ok(keys)
    }

    /// All sketches of one dimension with period in `[from, to]`, sorted by
    /// period. A dimension with no directory yields an empty list.
    pub fn scan(
        &self,
        dimension: &str,
        from: NaiveDate,
        to: NaiveDate,
    ) -> Result<Vec<SketchRecord>, StoreError> {
        validate_dimension(dimension)?;
        let mut records = Vec::new();
        for period in self.periods_in_dir(dimension)? {
            if period >= from && period <= to {
                records.push(self.get(dimension, period)?);
            }
        }
        Ok(records)
    }

    /// All sketches of every dimension with period in `[from, to]`, sorted
    /// by `(dimension, period)`.
    pub fn scan_period_range(
        &self,
        from: NaiveDate,
        to: NaiveDate,
    ) -> Result<Vec<SketchRecord>, StoreError> {
        let mut records = Vec::new();
        for dim in self.dimensions()? {
            records.extend(self.scan(&dim, from, to)?);
        }
        Ok(records)
    }

    /// Builds a sketch from raw elements and stores both the sketch and the
    /// raw stream (the stream is what later makes salt rotation possible).
    ///
    /// The raw stream is newline-delimited, so elements must be non-empty
    /// and free of newline bytes. Returns the built sketch.
    pub fn ingest_elements(
        &self,
        dimension: &str,
        period: NaiveDate,
        algo: Algo,
        param: u32,
        salt: &Salt,
        elements: &[Vec<u8>],
        overwrite: bool,
    ) -> Result<Sketch, StoreError> {
        validate_dimension(dimension)?;
        let sketch_path = self.sketch_path(dimension, period);
        if !overwrite && sketch_path.exists() {
            return Err(StoreError::DuplicateKey {
                dimension: dimension.to_string(),
                period,
            });
        }
        let mut sketch = Sketch::empty(algo, param, salt)?;
        let mut raw = Vec::new();
        for e in elements {
            if e.is_empty() {
                return Err(SketchError::InvalidElement("elements must be non-empty").into());
            }
            if e.contains(&b'\n') {
                return Err(SketchError::InvalidElement(
                    "elements must not contain newline bytes",
                )
                .into());
            }
            sketch.add(e, salt)?;
            raw.extend_from_slice(e);
            raw.push(b'\n');
        }
        // Raw stream first: a crash between the two writes leaves a raw
        // stream without a sketch, which rotation and reads both tolerate,
        // while the reverse order would strand an unrotatable sketch.
        write_atomic(&self.raw_path(dimension, period), &raw)?;
        write_atomic(&sketch_path, &sketch.serialize())?;
        Ok(sketch)
    }

    /// [`Self::ingest_elements`] over a newline-delimited reader, skipping
    /// empty lines.
    pub fn ingest_stream(
        &self,
        dimension: &str,
        period: NaiveDate,
        algo: Algo,
        param: u32,
        salt: &Salt,
        reader: impl BufRead,
        overwrite: bool,
    ) -> Result<Sketch, StoreError> {
        let mut elements = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if !line.is_empty() {
                elements.push(line.into_bytes());
            }
        }
        self.ingest_elements(dimension, period, algo, param, salt, &elements, overwrite)
    }

    /// True when the key's raw element stream is on disk.
    pub fn has_raw_stream(&self, dimension: &str, period: NaiveDate) -> bool {
        self.raw_path(dimension, period).exists()
    }

    fn read_raw_elements(
        &self,
        dimension: &str,
        period: NaiveDate,
    ) -> Result<Vec<Vec<u8>>, StoreError> {
        let bytes = fs::read(self.raw_path(dimension, period))?;
        Ok(bytes
            .split(|&b| b == b'\n')
            .filter(|line| !line.is_empty())
            .map(|line| line.to_vec())
            .collect())
    }

    /// Rebuilds every stored sketch under `new_salt`, all or nothing.
    ///
    /// Sketches cannot be re-hashed, only rebuilt from their raw element
    /// streams. The caller asserts stream availability with
    /// `raw_streams_available`; when it is false, or when any stored key
    /// lacks its stream, the rotation is refused outright and the refusal
    /// lists the keys that block it. A partial rotation is never performed
    /// because sketches under different salts can no longer be merged.
    pub fn rotate_salt(
        &self,
        new_salt: &Salt,
        raw_streams_available: bool,
    ) -> Result<RotationOutcome, StoreError> {
        let keys = self.keys()?;
        if !raw_streams_available {
            return Ok(RotationOutcome::Refused { stranded: keys });
        }
        let missing: Vec<(String, NaiveDate)> = keys
            .iter()
            .filter(|(dim, period)| !self.has_raw_stream(dim, *period))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Ok(RotationOutcome::Refused { stranded: missing });
        }
        for (dim, period) in &keys {
            let old = self.get(dim, *period)?;
            let mut rebuilt =
                Sketch::empty(old.sketch.algo(), old.sketch.param(), new_salt)?;
            for e in self.read_raw_elements(dim, *period)? {
                rebuilt.add(&e, new_salt)?;
            }
            write_atomic(&self.sketch_path(dim, *period), &rebuilt.serialize())?;
        }
        Ok(RotationOutcome::Rotated {
            records: keys.len(),
        })
    }
}
