//! Binary checkpoint format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "H2NN"
//! 4       4     format version, u32 little-endian
//! 8       32    SHA-256 of the network config's canonical text
//! 40      ...   f32 little-endian values: for each parameterized layer in
//!               declaration order, its weights (row-major) then its biases
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::config::NetworkConfig;
use crate::nn::params::Parameters;

pub const MAGIC: &[u8; 4] = b"H2NN";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut out: W, config: &NetworkConfig, params: &Parameters<f32>) -> Result<()> {
    if !params.matches(config) {
        return Err(Error::config("parameters do not match the network config"));
    }
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&config.hash())?;
    let mut buf = Vec::with_capacity(params.count() * 4);
    for slice in params.slices() {
        for v in slice {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R, config: &NetworkConfig) -> Result<Parameters<f32>> {
    let corrupt = |what: &str| Error::Data(format!("checkpoint: {what}"));
    let mut header = [0u8; 40];
    input
        .read_exact(&mut header)
        .map_err(|_| corrupt("truncated header"))?;
    if &header[..4] != MAGIC {
        return Err(corrupt("bad magic bytes"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(corrupt(&format!("unsupported format version {version}")));
    }
    if header[8..40] != config.hash() {
        return Err(Error::config("checkpoint was written for a different network config"));
    }
    let mut params = Parameters::<f32>::zeros(config)?;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != params.count() * 4 {
        return Err(corrupt(&format!(
            "expected {} parameter bytes, found {}",
            params.count() * 4,
            body.len()
        )));
    }
    let mut values = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()));
    for slice in params.slices_mut() {
        for v in slice.iter_mut() {
            *v = values.next().unwrap();
        }
    }
    Ok(params)
}

pub fn save_checkpoint(path: impl AsRef<Path>, config: &NetworkConfig, params: &Parameters<f32>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut out = std::io::BufWriter::new(file);
    write_checkpoint(&mut out, config, params)?;
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>, config: &NetworkConfig) -> Result<Parameters<f32>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    read_checkpoint(std::io::BufReader::new(file), config)
}
