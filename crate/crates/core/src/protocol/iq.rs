//! Raw IQ dumps: interleaved little-endian f32 real/imag pairs.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::signal::IQFrame;

/// Receives frames as a protocol round produces them.
pub trait IqSink {
    fn write_frame(&mut self, radio: usize, stage: u8, frame: &IQFrame) -> io::Result<()>;
}

/// Writes `<trial>_<radio>_<stage>.iq` files under a directory.
#[derive(Debug, Clone)]
pub struct DirSink {
    dir: PathBuf,
    trial: usize,
}

impl DirSink {
    pub fn new(dir: impl Into<PathBuf>, trial: usize) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, trial })
    }

    pub fn path_for(&self, radio: usize, stage: u8) -> PathBuf {
        self.dir.join(format!("{}_{}_{}.iq", self.trial, radio, stage))
    }
}

impl IqSink for DirSink {
    fn write_frame(&mut self, radio: usize, stage: u8, frame: &IQFrame) -> io::Result<()> {
        let mut buf = Vec::with_capacity(frame.len() * 8);
        for s in &frame.samples {
            buf.extend_from_slice(&(s.re as f32).to_le_bytes());
            buf.extend_from_slice(&(s.im as f32).to_le_bytes());
        }
        let mut f = io::BufWriter::new(fs::File::create(self.path_for(radio, stage))?);
        f.write_all(&buf)?;
        f.flush()
    }
}

pub fn read_iq(path: &Path) -> io::Result<Vec<Complex64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("{}: length {} is not a whole number of samples", path.display(), bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect())
}
