//! Precomputed image feature vectors and their file formats.
//!
//! Binary layout (all integers little endian):
//!
//! ```text
//! "MRNF" | version: u32 | count: u64 | dim: u32
//! repeated count times: id_len: u16 | id: utf-8 bytes | dim × f32
//! ```
//!
//! A tab-separated text form `id<TAB>v1<TAB>...<TAB>vD` is accepted on load.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binio::{read_array, read_exact};
use crate::error::{Error, Result};
use crate::numerics::DenseVector;

pub const FEATURE_MAGIC: [u8; 4] = *b"MRNF";
pub const FEATURE_VERSION: u32 = 1;

/// Map from image id to a fixed feature vector. Iteration is in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatureStore {
    dim: usize,
    entries: BTreeMap<String, DenseVector>,
}

impl ImageFeatureStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, feature: DenseVector) -> Result<()> {
        let id = id.into();
        if feature.dim() != self.dim {
            return Err(Error::InconsistentDimension {
                id,
                expected: self.dim,
                actual: feature.dim(),
            });
        }
        if !feature.is_finite() {
            return Err(Error::NonFinite(format!("feature `{id}`")));
        }
        if self.entries.contains_key(&id) {
            return Err(Error::Duplicate(id));
        }
        self.entries.insert(id, feature);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&DenseVector> {
        self.entries
            .get(id)
            .ok_or_else(|| Error::MissingFeature(id.to_owned()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseVector)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Restrict to the given ids.
    pub fn subset<'a, I: IntoIterator<Item = &'a str>>(&self, ids: I) -> Result<Self> {
        let mut out = Self::new(self.dim);
        for id in ids {
            if !out.contains(id) {
                out.insert(id, self.get(id)?.clone())?;
            }
        }
        Ok(out)
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(&FEATURE_MAGIC)?;
        w.write_all(&FEATURE_VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for (id, v) in &self.entries {
            let bytes = id.as_bytes();
            let len = u16::try_from(bytes.len())
                .map_err(|_| Error::InvalidConfig(format!("image id too long: {id}")))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(bytes)?;
            for &x in v.iter() {
                w.write_all(&(x as f32).to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "feature magic")?;
        if magic != FEATURE_MAGIC {
            return Err(Error::BadMagic {
                expected: FEATURE_MAGIC,
                found: magic,
            });
        }
        let version = u32::from_le_bytes(read_array(&mut r, "feature version")?);
        if version != FEATURE_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let count = u64::from_le_bytes(read_array(&mut r, "feature count")?);
        let dim = u32::from_le_bytes(read_array(&mut r, "feature dim")?) as usize;
        let mut store = Self::new(dim);
        for _ in 0..count {
            let len = u16::from_le_bytes(read_array(&mut r, "image id length")?) as usize;
            let mut id = vec![0u8; len];
            read_exact(&mut r, &mut id, "image id")?;
            let id = String::from_utf8(id).map_err(|e| Error::Parse {
                line: 0,
                message: format!("image id is not utf-8: {e}"),
            })?;
            let mut v = Vec::with_capacity(dim);
            for _ in 0..dim {
                v.push(f32::from_le_bytes(read_array(&mut r, "feature values")?) as f64);
            }
            store.insert(id, v.into())?;
        }
        Ok(store)
    }

    /// Parse the tab-separated text form. Every row must have the same width.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut store: Option<Self> = None;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default().to_owned();
            let values = fields
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad feature value `{f}`: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let store = store.get_or_insert_with(|| Self::new(values.len()));
            store.insert(id, values.into())?;
        }
        store.ok_or(Error::EmptyInput("feature file"))
    }

    pub fn write_tsv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        for (id, v) in &self.entries {
            write!(w, "{id}")?;
            for x in v.iter() {
                write!(w, "\t{x}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_binary(f)
    }

    /// Load either format: binary when the file starts with the magic,
    /// otherwise tab-separated text.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(&FEATURE_MAGIC) {
            return Self::read_binary(&bytes[..]);
        }
        match std::str::from_utf8(&bytes) {
            Ok(text) if text.contains('\t') => Self::read_tsv(text.as_bytes()),
            _ => {
                let mut found = [0u8; 4];
                let n = bytes.len().min(4);
                found[..n].copy_from_slice(&bytes[..n]);
                Err(Error::BadMagic {
                    expected: FEATURE_MAGIC,
                    found,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> ImageFeatureStore {
        let mut s = ImageFeatureStore::new(4);
        s.insert("img1", vec![0.5, -1.25, 3.0, 0.0].into()).unwrap();
        s.insert("img0", vec![1.0, 2.0, 3.0, 4.0].into()).unwrap();
        s
    }

    #[test]
    fn header_echo() {
        let mut buf = Vec::new();
        sample().write_binary(&mut buf).unwrap();
        let s = ImageFeatureStore::read_binary(&buf[..]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dim(), 4);
        assert_eq!(s.ids().collect::<Vec<_>>(), vec!["img0", "img1"]);
    }

    #[test]
    fn exact_byte_layout() {
        let mut s = ImageFeatureStore::new(1);
        s.insert("ab", vec![1.0].into()).unwrap();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        let mut want = b"MRNF".to_vec();
        want.extend(1u32.to_le_bytes());
        want.extend(1u64.to_le_bytes());
        want.extend(1u32.to_le_bytes());
        want.extend(2u16.to_le_bytes());
        want.extend(b"ab");
        want.extend(1.0f32.to_le_bytes());
        assert_eq!(buf, want);
    }

    #[test]
    fn wrong_row_length_rejected() {
        let mut s = ImageFeatureStore::new(4);
        let err = s.insert("x", vec![1.0, 2.0].into()).unwrap_err();
        assert!(matches!(err, Error::InconsistentDimension { .. }));
        let err = ImageFeatureStore::read_tsv(&b"a\t1\t2\nb\t1\n"[..]).unwrap_err();
        assert!(matches!(err, Error::InconsistentDimension { .. }));
    }

    #[test]
    fn distinct_errors_for_corrupt_files() {
        let mut buf = Vec::new();
        sample().write_binary(&mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            ImageFeatureStore::read_binary(&bad[..]),
            Err(Error::BadMagic { .. })
        ));
        assert!(matches!(
            ImageFeatureStore::read_binary(&buf[..buf.len() - 3]),
            Err(Error::Truncated(_))
        ));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(
            ImageFeatureStore::read_binary(&bad[..]),
            Err(Error::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn tsv_and_autodetect() {
        let dir = tempfile::tempdir().unwrap();
        let tsv = dir.path().join("f.tsv");
        sample().write_tsv(File::create(&tsv).unwrap()).unwrap();
        assert_eq!(ImageFeatureStore::load(&tsv).unwrap(), sample());

        let bin = dir.path().join("f.mrnf");
        sample().save(&bin).unwrap();
        assert_eq!(ImageFeatureStore::load(&bin).unwrap(), sample());

        let junk = dir.path().join("junk");
        std::fs::write(&junk, [0xffu8, 0, 1, 2, 3]).unwrap();
        assert!(matches!(
            ImageFeatureStore::load(&junk),
            Err(Error::BadMagic { .. })
        ));
        assert!(matches!(
            ImageFeatureStore::load(dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(
            rows in prop::collection::vec(prop::collection::vec(-1e6f32..1e6, 3), 1..10)
        ) {
            let mut s = ImageFeatureStore::new(3);
            for (i, row) in rows.iter().enumerate() {
                s.insert(format!("id{i}"), row.iter().map(|&x| x as f64).collect()).unwrap();
            }
            let mut a = Vec::new();
            s.write_binary(&mut a).unwrap();
            let back = ImageFeatureStore::read_binary(&a[..]).unwrap();
            let mut b = Vec::new();
            back.write_binary(&mut b).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(back, s);
        }
    }
}
