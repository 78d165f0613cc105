//! Binary model container.
//!
//! Layout: the magic bytes `VBHM`, a little-endian `u32` version, a `u32`
//! header length and that many bytes of `key=value` lines, then
//! little-endian `f64` arrays: class labels, per-dimension outer edges
//! (lower, upper), and the probability tensor `[class][time_bin][dim][bin]`.

use std::io::{Read, Write};

use super::{HistogramConfig, LikelihoodModel, LocationClassSet, PerceptionError};

const MAGIC: &[u8; 4] = b"VBHM";
const VERSION: u32 = 1;

pub fn write_model<W: Write>(model: &LikelihoodModel, mut w: W) -> Result<(), PerceptionError> {
    let header = format!(
        "bins={}\nalpha={}\ntime_pooling={}\nclasses={}\nframes={}\nmarkers={}\n",
        model.config.bins,
        model.config.alpha,
        model.config.time_pooling,
        model.classes.len(),
        model.frames,
        model.markers,
    );
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    let mut buf =
        Vec::with_capacity(8 * (model.classes.len() + model.probs.len() + 2 * model.ranges.len()));
    for v in model.classes.labels() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for r in &model.ranges {
        buf.extend_from_slice(&r[0].to_le_bytes());
        buf.extend_from_slice(&r[1].to_le_bytes());
    }
    for p in &model.probs {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>, PerceptionError> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| PerceptionError::Format("truncated data".into()))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_model<R: Read>(mut r: R) -> Result<LikelihoodModel, PerceptionError> {
    let bad = |m: &str| PerceptionError::Format(m.to_string());
    let mut word = [0u8; 4];
    r.read_exact(&mut word)
        .map_err(|_| bad("truncated header"))?;
    if &word != MAGIC {
        return Err(bad("not a model file"));
    }
    r.read_exact(&mut word)
        .map_err(|_| bad("truncated header"))?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(PerceptionError::Format(format!(
            "unsupported version {version}"
        )));
    }
    r.read_exact(&mut word)
        .map_err(|_| bad("truncated header"))?;
    let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
    r.read_exact(&mut header)
        .map_err(|_| bad("truncated header"))?;
    let header = String::from_utf8(header).map_err(|_| bad("header is not UTF-8"))?;

    let (mut bins, mut alpha, mut pooling, mut classes, mut frames, mut markers) =
        (None, None, None, None, None, None);
    for line in header.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad("malformed header line"))?;
        let int = || {
            v.parse::<usize>()
                .map_err(|_| bad("malformed header value"))
        };
        match k {
            "bins" => bins = Some(int()?),
            "alpha" => alpha = Some(v.parse::<f64>().map_err(|_| bad("malformed alpha"))?),
            "time_pooling" => pooling = Some(int()?),
            "classes" => classes = Some(int()?),
            "frames" => frames = Some(int()?),
            "markers" => markers = Some(int()?),
            other => {
                return Err(PerceptionError::Format(format!(
                    "unknown header key {other:?}"
                )))
            }
        }
    }
    let missing = || bad("incomplete header");
    let config = HistogramConfig {
        bins: bins.ok_or_else(missing)?,
        alpha: alpha.ok_or_else(missing)?,
        time_pooling: pooling.ok_or_else(missing)?,
    };
    config.validate()?;
    let (n, frames, markers) = (
        classes.ok_or_else(missing)?,
        frames.ok_or_else(missing)?,
        markers.ok_or_else(missing)?,
    );
    let labels = LocationClassSet::from_labels(read_f64s(&mut r, n)?)?;
    let flat = read_f64s(&mut r, markers * 4)?;
    let ranges = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let tbins = frames.div_ceil(config.time_pooling);
    let probs = read_f64s(&mut r, n * tbins * markers * 2 * config.bins)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok(LikelihoodModel::from_parts(
        config, labels, frames, markers, ranges, probs,
    ))
}
