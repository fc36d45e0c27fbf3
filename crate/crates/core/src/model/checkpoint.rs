//! Binary checkpoint format (little endian):
//!
//! ```text
//! "MRNM" | version: u32 | variant: u32 (0 = mrnn, 1 = baseline)
//! vocab_size, embed1_dim, embed2_dim, recurrent_dim, multimodal_dim, image_dim: u32
//! block_count: u32
//! per block, in ModelParams::blocks order: rows: u32 | cols: u32 | rows × cols f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::config::{ModelConfig, Variant};
use super::params::ModelParams;
use crate::binio::{read_array, read_exact, read_u32};
use crate::error::{check_dim, Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MRNM";
pub const CHECKPOINT_VERSION: u32 = 1;

impl ModelParams {
    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let c = self.config();
        w.write_all(&CHECKPOINT_MAGIC)?;
        let variant = match c.variant {
            Variant::Multimodal => 0u32,
            Variant::SimpleRnn => 1,
        };
        let header = [
            CHECKPOINT_VERSION,
            variant,
            c.vocab_size as u32,
            c.embed1_dim as u32,
            c.embed2_dim as u32,
            c.recurrent_dim as u32,
            c.multimodal_dim as u32,
            c.image_dim as u32,
        ];
        for x in header {
            w.write_all(&x.to_le_bytes())?;
        }
        let blocks = self.blocks();
        w.write_all(&(blocks.len() as u32).to_le_bytes())?;
        for b in blocks {
            w.write_all(&(b.rows as u32).to_le_bytes())?;
            w.write_all(&(b.cols as u32).to_le_bytes())?;
            for x in b.data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "checkpoint magic")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic {
                expected: CHECKPOINT_MAGIC,
                found: magic,
            });
        }
        let version = read_u32(&mut r, "checkpoint version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let variant = match read_u32(&mut r, "model variant")? {
            0 => Variant::Multimodal,
            1 => Variant::SimpleRnn,
            other => {
                return Err(Error::InvalidConfig(format!("unknown variant tag {other}")));
            }
        };
        let mut dims = [0usize; 6];
        for d in &mut dims {
            *d = read_u32(&mut r, "model config")? as usize;
        }
        let config = ModelConfig {
            variant,
            vocab_size: dims[0],
            embed1_dim: dims[1],
            embed2_dim: dims[2],
            recurrent_dim: dims[3],
            multimodal_dim: dims[4],
            image_dim: dims[5],
        };
        let mut params = ModelParams::zeros(config)?;
        let n_blocks = read_u32(&mut r, "block count")? as usize;
        let mut blocks = params.blocks_mut();
        check_dim("checkpoint block count", blocks.len(), n_blocks)?;
        for b in &mut blocks {
            check_dim(b.name, b.rows, read_u32(&mut r, "block rows")? as usize)?;
            check_dim(b.name, b.cols, read_u32(&mut r, "block cols")? as usize)?;
            for x in b.data.iter_mut() {
                *x = f64::from_le_bytes(read_array(&mut r, "block data")?);
            }
        }
        drop(blocks);
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::InvalidConfig("trailing bytes after checkpoint".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(f)
    }
}
