//! Raw tensor serialization: little-endian values prefixed by rank and
//! dimensions. Used by the checkpoint format.

use std::io::{self, Read, Write};

use super::Real;

pub fn write_tensor(w: &mut impl Write, shape: &[usize], data: &[Real]) -> io::Result<()> {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor(r: &mut impl Read) -> io::Result<(Vec<usize>, Vec<Real>)> {
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let rank = u32::from_le_bytes(buf4) as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        r.read_exact(&mut buf4)?;
        shape.push(u32::from_le_bytes(buf4) as usize);
    }
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    let mut elem = [0u8; std::mem::size_of::<Real>()];
    for _ in 0..n {
        r.read_exact(&mut elem)?;
        data.push(Real::from_le_bytes(elem));
    }
    Ok((shape, data))
}
