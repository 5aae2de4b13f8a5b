use std::io::{Read, Write};

use super::{PathBundle, SeedPolicy, SimConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HLABPTH1";

/// Binary dump: magic, then little-endian header `n: u64, T: f64, steps: u64,
/// n_paths: u64, seed: u64, record_every: u64, mirrored: u64`, then the row-major
/// `f64` data of [`PathBundle::data`].
pub fn write_binary<W: Write>(paths: &PathBundle, mut out: W) -> Result<()> {
    let c = paths.config();
    out.write_all(MAGIC)?;
    out.write_all(&(c.n as u64).to_le_bytes())?;
    out.write_all(&c.horizon.to_le_bytes())?;
    out.write_all(&(c.steps as u64).to_le_bytes())?;
    out.write_all(&(c.n_paths as u64).to_le_bytes())?;
    out.write_all(&c.seed.master.to_le_bytes())?;
    out.write_all(&(c.record_every as u64).to_le_bytes())?;
    out.write_all(&(paths.is_mirrored() as u64).to_le_bytes())?;
    for v in paths.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_binary<R: Read>(mut input: R) -> Result<PathBundle> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Usage("not a path bundle dump".into()));
    }
    let n = read_u64(&mut input)? as usize;
    let horizon = f64::from_bits(read_u64(&mut input)?);
    let steps = read_u64(&mut input)? as usize;
    let n_paths = read_u64(&mut input)? as usize;
    let seed = read_u64(&mut input)?;
    let record_every = read_u64(&mut input)? as usize;
    let mirrored = read_u64(&mut input)? != 0;
    let config = SimConfig {
        n,
        n_paths,
        steps,
        horizon,
        seed: SeedPolicy::new(seed),
        record_every,
    };
    config.validate()?;
    let record_steps = config.recorded_steps();
    let len = record_steps.len() * (2 * n + 1) * n_paths;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        data.push(f64::from_bits(read_u64(&mut input)?));
    }
    Ok(PathBundle {
        config,
        mirrored,
        record_steps,
        data,
    })
}

/// One CSV row per path with the terminal driver values and Lévy area.
pub fn write_terminal_csv<W: Write>(paths: &PathBundle, mut out: W) -> Result<()> {
    let n = paths.n();
    let mut header = vec!["path".to_string()];
    header.extend((1..=n).map(|i| format!("b{i}")));
    header.extend((1..=n).map(|i| format!("w{i}")));
    header.push("levy_z".into());
    writeln!(out, "{}", header.join(","))?;
    let last = paths.terminal_index();
    for j in 0..paths.n_paths() {
        let row: Vec<String> = paths.state(j, last).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{j},{}", row.join(","))?;
    }
    Ok(())
}
