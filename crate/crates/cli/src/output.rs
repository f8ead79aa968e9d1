//! Raw float maps, colormapped PNG images and CSV tables.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{CliError, RoundStats};

const FLOAT_MAGIC: &str = "PF64";

/// Writes a `width × height` map of little-endian `f64` values after the text header
/// `PF64\n<width> <height>\n`. Values are stored row by row, bottom row first.
pub fn write_float_map(
    path: &Path,
    width: usize,
    height: usize,
    values: &[f64],
) -> Result<(), CliError> {
    assert_eq!(values.len(), width * height);
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "{FLOAT_MAGIC}\n{width} {height}\n")?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a map written by [`write_float_map`].
pub fn read_float_map(path: &Path) -> Result<(usize, usize, Vec<f64>), CliError> {
    let mut r = BufReader::new(File::open(path)?);
    let bad = |m: &str| CliError::Format(format!("{}: {m}", path.display()));
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != FLOAT_MAGIC {
        return Err(bad("not a float map"));
    }
    line.clear();
    r.read_line(&mut line)?;
    let dims: Vec<usize> = line
        .split_whitespace()
        .filter_map(|t| t.parse().ok())
        .collect();
    let [width, height] = dims[..] else {
        return Err(bad("malformed dimensions"));
    };
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != width * height * 8 {
        return Err(bad("size does not match dimensions"));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((width, height, values))
}

/// Maps `values` linearly from `[lo, hi]` through viridis; non-finite values and cells outside
/// `mask` take the minimum color. A degenerate range maps everything to the minimum color.
pub fn colorize(values: &[f64], mask: &[bool], lo: f64, hi: f64) -> Vec<[u8; 3]> {
    let span = hi - lo;
    values
        .iter()
        .zip(mask)
        .map(|(v, inside)| {
            let t = if *inside && v.is_finite() && span > 0.0 {
                ((v - lo) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let c = colorous::VIRIDIS.eval_continuous(t);
            [c.r, c.g, c.b]
        })
        .collect()
}

/// Writes an 8-bit RGB PNG; pixel rows are given bottom row first, as in the float maps.
pub fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    pixels: &[[u8; 3]],
) -> Result<(), CliError> {
    assert_eq!(pixels.len(), width * height);
    let w = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(w, width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    let mut data = Vec::with_capacity(width * height * 3);
    for row in (0..height).rev() {
        for p in &pixels[row * width..(row + 1) * width] {
            data.extend_from_slice(p);
        }
    }
    writer.write_image_data(&data)?;
    writer.finish()?;
    Ok(())
}

/// Range of the finite values inside `mask`, or `(0, 0)` when there are none.
pub fn masked_range(values: &[f64], mask: &[bool]) -> (f64, f64) {
    let (lo, hi) = values
        .iter()
        .zip(mask)
        .filter(|(v, m)| **m && v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| {
            (lo.min(*v), hi.max(*v))
        });
    if lo <= hi {
        (lo, hi)
    } else {
        (0.0, 0.0)
    }
}

/// `round,walks,mse`, one row per round. Timing lives in a separate file so that this one is
/// reproducible byte for byte.
pub fn write_convergence_csv(path: &Path, rounds: &[RoundStats]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "round,walks,mse")?;
    for r in rounds {
        writeln!(w, "{},{},{:.17e}", r.round, r.walks, r.mse)?;
    }
    w.flush()?;
    Ok(())
}

/// `round,walks,seconds`: cumulative wall-clock time after each round.
pub fn write_timing_csv(path: &Path, rounds: &[RoundStats]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "round,walks,seconds")?;
    for r in rounds {
        writeln!(w, "{},{},{:.6}", r.round, r.walks, r.seconds)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a file written by [`write_convergence_csv`] into `(round, walks, mse)` rows.
pub fn read_convergence_csv(path: &Path) -> Result<Vec<(u64, u64, f64)>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let bad = |m: String| CliError::Format(format!("{}: {m}", path.display()));
    let mut lines = text.lines();
    if lines.next() != Some("round,walks,mse") {
        return Err(bad("unexpected header".into()));
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let e = || bad(format!("malformed row `{l}`"));
            match f[..] {
                [a, b, c] => Ok((
                    a.parse().map_err(|_| e())?,
                    b.parse().map_err(|_| e())?,
                    c.parse().map_err(|_| e())?,
                )),
                _ => Err(e()),
            }
        })
        .collect()
}
