//! `solution.bin` layout and plot-ready CSV slices.
//!
//! ```text
//! magic      8 bytes   "PLAPGF01"
//! dim        u64
//! counts     3 × u64   nodes per axis (1 for unused axes)
//! time_nodes u64
//! h, dt, t_start, t_end        4 × f64
//! half_width 3 × f64
//! values     f64 × time_nodes × Π counts, time-major, axis 0 fastest
//! ```
//!
//! All integers and floats are little-endian.

use std::io::{Read, Write};

use plap_core::{GridFunction, SpaceTimeGrid};

pub const MAGIC: &[u8; 8] = b"PLAPGF01";

pub fn write_grid_function(u: &GridFunction, mut w: impl Write) -> std::io::Result<()> {
    let g = u.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(g.dim() as u64).to_le_bytes())?;
    for c in g.counts() {
        w.write_all(&(c as u64).to_le_bytes())?;
    }
    w.write_all(&(g.time_nodes() as u64).to_le_bytes())?;
    for v in [g.h(), g.dt(), g.t_start(), g.t_end()] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in g.half_width() {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(8 * u.values().len());
    for v in u.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn to_bytes(u: &GridFunction) -> Vec<u8> {
    let mut out = Vec::new();
    write_grid_function(u, &mut out).expect("writing to a Vec cannot fail");
    out
}

fn bad(msg: impl Into<String>) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, msg.into())
}

fn u64_at(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn f64_at(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_grid_function(mut r: impl Read) -> std::io::Result<GridFunction> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a plap grid function (bad magic)"));
    }
    let dim = u64_at(&mut r)? as usize;
    let mut counts = [0usize; 3];
    for c in &mut counts {
        *c = u64_at(&mut r)? as usize;
    }
    let time_nodes = u64_at(&mut r)? as usize;
    let (h, dt, t0, t1) = (f64_at(&mut r)?, f64_at(&mut r)?, f64_at(&mut r)?, f64_at(&mut r)?);
    let mut half = [0.0; 3];
    for v in &mut half {
        *v = f64_at(&mut r)?;
    }
    if !(1..=3).contains(&dim) {
        return Err(bad(format!("dimension {dim} out of range")));
    }
    let grid = SpaceTimeGrid::new(dim, &half[..dim], h, dt, t0, t1).map_err(|e| bad(e.to_string()))?;
    if grid.counts() != counts || grid.time_nodes() != time_nodes {
        return Err(bad("header counts disagree with the grid metadata"));
    }
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() != 8 * grid.len() {
        return Err(bad(format!("expected {} values, found {} bytes", grid.len(), raw.len())));
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GridFunction::new(grid, values).map_err(|e| bad(e.to_string()))
}

/// Time slice `j` as CSV rows `x[,y[,z]],u`.
pub fn slice_csv(u: &GridFunction, j: usize) -> Result<Vec<u8>, csv::Error> {
    let g = u.grid();
    let dim = g.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = ["x", "y", "z"][..dim].to_vec();
    header.push("u");
    w.write_record(&header)?;
    for (s, v) in u.slice(j).iter().enumerate() {
        let x = g.node_point(s);
        let mut row: Vec<String> = x[..dim].iter().map(|c| c.to_string()).collect();
        row.push(v.to_string());
        w.write_record(&row)?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let grid = SpaceTimeGrid::new(2, &[0.5, 0.25], 0.125, 0.5, 0.0, 1.0).unwrap();
        let u = GridFunction::from_fn(grid, |x, t| x[0] - 2.0 * x[1] + t).unwrap();
        let bytes = to_bytes(&u);
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(bytes.len(), 8 + 8 * 5 + 8 * 7 + 8 * u.values().len());
        assert_eq!(read_grid_function(bytes.as_slice()).unwrap(), u);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let grid = SpaceTimeGrid::new(1, &[0.5], 0.25, 0.5, 0.0, 1.0).unwrap();
        let u = GridFunction::zeros(grid);
        let mut bytes = to_bytes(&u);
        bytes.pop();
        assert!(read_grid_function(bytes.as_slice()).is_err());
        bytes[0] = b'X';
        assert!(read_grid_function(bytes.as_slice()).is_err());
    }

    #[test]
    fn slice_csv_has_one_row_per_node() {
        let grid = SpaceTimeGrid::new(1, &[0.5], 0.25, 0.5, 0.0, 1.0).unwrap();
        let u = GridFunction::zeros(grid);
        let text = String::from_utf8(slice_csv(&u, 1).unwrap()).unwrap();
        assert!(text.starts_with("x,u\n"));
        assert_eq!(text.lines().count(), 1 + 5);
    }
}
