//! Binary checkpoints (`SEQ1`) and loss-trace CSV.
//!
//! Layout, little-endian: magic `SEQ1`, kind byte (0 bilstm, 1 fnn),
//! `u64` input dim, `u64` hidden size, `u64` parameter count, then the
//! parameters as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BiLstm, EpochLoss, Fnn, Tagger};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SEQ1";

pub fn write_checkpoint<W: Write>(tagger: &Tagger, w: &mut W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[match tagger {
        Tagger::Bilstm(_) => 0u8,
        Tagger::Fnn(_) => 1u8,
    }])?;
    let params = tagger.params();
    for v in [tagger.input_dim(), tagger.hidden(), params.len()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for p in params {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> std::result::Result<Tagger, String> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| e.to_string())?;
    if &magic != MAGIC {
        return Err("not a SEQ1 checkpoint".into());
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind).map_err(|e| e.to_string())?;
    let mut word = [0u8; 8];
    let mut header = [0usize; 3];
    for h in &mut header {
        r.read_exact(&mut word).map_err(|e| e.to_string())?;
        *h = usize::try_from(u64::from_le_bytes(word)).map_err(|e| e.to_string())?;
    }
    let [d, h, n] = header;
    let expected = match kind[0] {
        0 => BiLstm::n_params(d, h),
        1 => Fnn::n_params(d, h),
        k => return Err(format!("unknown model kind byte {k}")),
    };
    if n != expected {
        return Err(format!("parameter count {n} does not match shape (expected {expected})"));
    }
    let mut theta = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut word).map_err(|e| format!("truncated parameters: {e}"))?;
        let v = f64::from_le_bytes(word);
        if !v.is_finite() {
            return Err("non-finite parameter".into());
        }
        theta.push(v);
    }
    Ok(match kind[0] {
        0 => Tagger::Bilstm(BiLstm::from_params(d, h, theta).expect("size checked")),
        _ => Tagger::Fnn(Fnn::from_params(d, h, theta).expect("size checked")),
    })
}

pub fn save_checkpoint(tagger: &Tagger, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write_checkpoint(tagger, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Tagger> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    read_checkpoint(&mut r).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message,
    })
}

pub fn write_loss_trace<W: Write>(trace: &[EpochLoss], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "epoch,train_loss,val_loss")?;
    for e in trace {
        writeln!(w, "{},{},{}", e.epoch, e.train_loss, e.val_loss)?;
    }
    Ok(())
}
