//! SLFD field dumps.
//!
//! Little-endian. Header: magic `SLFD`, version u32, N1 u32, N2 u32,
//! components u32, L1 f64, L2 f64, delta1 f64, delta2 f64. Body: row-major
//! f64 for a scalar (1 component); for a spinor (2 components) each
//! component in turn as interleaved `re, im` pairs.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{build_geometry, ScalarField, SpinorField, TorusGeometry};

pub const MAGIC: &[u8; 4] = b"SLFD";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 4 + 4 * 4 + 4 * 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Header {
    pub n1: u32,
    pub n2: u32,
    pub components: u32,
    pub lengths: [f64; 2],
    pub deltas: [f64; 2],
}

impl Header {
    fn of(g: &TorusGeometry, components: u32) -> Self {
        let [n1, n2] = g.resolution();
        Header {
            n1: n1 as u32,
            n2: n2 as u32,
            components,
            lengths: g.lengths(),
            deltas: g.deltas(),
        }
    }

    pub fn geometry(&self) -> Result<Arc<TorusGeometry>> {
        build_geometry(
            self.lengths[0],
            self.lengths[1],
            self.n1 as usize,
            self.n2 as usize,
            (self.deltas[0], self.deltas[1]),
        )
    }

    /// Whether `g` has the parameters recorded in this header.
    pub fn matches(&self, g: &TorusGeometry) -> bool {
        *self == Header::of(g, self.components)
    }
}

#[derive(Clone, Debug)]
pub enum FieldData {
    Scalar(Vec<f64>),
    Spinor(Vec<Complex64>),
}

#[derive(Clone, Debug)]
pub struct Dump {
    pub header: Header,
    pub data: FieldData,
}

impl Dump {
    /// The scalar field on `geometry`, which must match the header.
    pub fn into_scalar(self, geometry: &Arc<TorusGeometry>) -> Result<ScalarField> {
        self.require(geometry)?;
        match self.data {
            FieldData::Scalar(v) => ScalarField::new(geometry.clone(), v),
            FieldData::Spinor(_) => Err(Error::Format("expected a scalar dump, found a spinor".into())),
        }
    }

    pub fn into_spinor(self, geometry: &Arc<TorusGeometry>) -> Result<SpinorField> {
        self.require(geometry)?;
        match self.data {
            FieldData::Spinor(v) => SpinorField::new(geometry.clone(), v),
            FieldData::Scalar(_) => Err(Error::Format("expected a spinor dump, found a scalar".into())),
        }
    }

    fn require(&self, g: &TorusGeometry) -> Result<()> {
        if self.header.matches(g) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch)
        }
    }
}

fn write_header(w: &mut impl Write, h: &Header) -> Result<()> {
    w.write_all(MAGIC)?;
    for x in [VERSION, h.n1, h.n2, h.components] {
        w.write_all(&x.to_le_bytes())?;
    }
    for x in [h.lengths[0], h.lengths[1], h.deltas[0], h.deltas[1]] {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_scalar(w: &mut impl Write, u: &ScalarField) -> Result<()> {
    write_header(w, &Header::of(u.geometry(), 1))?;
    let mut buf = Vec::with_capacity(8 * u.values().len());
    for x in u.values() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_spinor(w: &mut impl Write, psi: &SpinorField) -> Result<()> {
    write_header(w, &Header::of(psi.geometry(), 2))?;
    let mut buf = Vec::with_capacity(16 * psi.values().len());
    for z in psi.values() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn take<const K: usize>(bytes: &[u8], pos: &mut usize) -> Result<[u8; K]> {
    let out = bytes
        .get(*pos..*pos + K)
        .ok_or_else(|| Error::Format(format!("truncated at byte {}", *pos)))?;
    *pos += K;
    Ok(out.try_into().expect("slice of length K"))
}

pub fn read_dump(r: &mut impl Read) -> Result<Dump> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    if &take::<4>(&bytes, &mut pos)? != MAGIC {
        return Err(Error::Format("bad magic, not an SLFD file".into()));
    }
    let mut word = || take::<4>(&bytes, &mut pos).map(u32::from_le_bytes);
    let version = word()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let (n1, n2, components) = (word()?, word()?, word()?);
    let mut real = || take::<8>(&bytes, &mut pos).map(f64::from_le_bytes);
    let header = Header {
        n1,
        n2,
        components,
        lengths: [real()?, real()?],
        deltas: [real()?, real()?],
    };
    let n = n1 as usize * n2 as usize;
    let reals = match components {
        1 => n,
        2 => 4 * n,
        c => return Err(Error::Format(format!("unsupported component count {c}"))),
    };
    if bytes.len() != HEADER_BYTES + 8 * reals {
        return Err(Error::Format(format!(
            "expected {} bytes for a {n1}x{n2} field with {components} component(s), found {}",
            HEADER_BYTES + 8 * reals,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[HEADER_BYTES..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let data = if components == 1 {
        FieldData::Scalar(values)
    } else {
        FieldData::Spinor(values.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
    };
    Ok(Dump { header, data })
}

pub fn save_scalar(path: &Path, u: &ScalarField) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_scalar(&mut f, u)?;
    f.flush()?;
    Ok(())
}

pub fn save_spinor(path: &Path, psi: &SpinorField) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_spinor(&mut f, psi)?;
    f.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Dump> {
    read_dump(&mut std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_and_spinor_round_trip_bit_exactly() {
        let g = build_geometry(3.0, 5.5, 8, 10, (0.5, 0.5)).unwrap();
        let u = ScalarField::from_fn(g.clone(), |x, y| (x * 1.3).sin() * y.cos() + 1e-300).unwrap();
        let psi = SpinorField::new(
            g.clone(),
            (0..2 * g.len()).map(|i| Complex64::new(i as f64 / 7.0, -(i as f64).sqrt())).collect(),
        )
        .unwrap();
        let mut bu = Vec::new();
        write_scalar(&mut bu, &u).unwrap();
        assert_eq!(bu.len(), HEADER_BYTES + 8 * 80);
        assert_eq!(&bu[..4], b"SLFD");
        let mut bp = Vec::new();
        write_spinor(&mut bp, &psi).unwrap();
        let du = read_dump(&mut bu.as_slice()).unwrap();
        let dp = read_dump(&mut bp.as_slice()).unwrap();
        let g2 = du.header.geometry().unwrap();
        assert!(g2.same_as(&g));
        let u2 = du.into_scalar(&g2).unwrap();
        let psi2 = dp.into_spinor(&g2).unwrap();
        assert!(u.values().iter().zip(u2.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(psi.values(), psi2.values());
    }

    #[test]
    fn header_layout() {
        let g = build_geometry(1.0, 2.0, 8, 8, (0.0, 0.5)).unwrap();
        let mut b = Vec::new();
        write_scalar(&mut b, &ScalarField::zeros(g)).unwrap();
        let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        let f64_at = |i: usize| f64::from_le_bytes(b[i..i + 8].try_into().unwrap());
        assert_eq!([u32_at(4), u32_at(8), u32_at(12), u32_at(16)], [1, 8, 8, 1]);
        assert_eq!([f64_at(20), f64_at(28), f64_at(36), f64_at(44)], [1.0, 2.0, 0.0, 0.5]);
    }

    #[test]
    fn rejects_corrupt_input() {
        let g = build_geometry(1.0, 1.0, 8, 8, (0.5, 0.0)).unwrap();
        let mut b = Vec::new();
        write_scalar(&mut b, &ScalarField::zeros(g.clone())).unwrap();
        assert!(read_dump(&mut &b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(read_dump(&mut bad.as_slice()).is_err());
        let mut bad = b.clone();
        bad[16] = 3;
        assert!(read_dump(&mut bad.as_slice()).is_err());
        let other = build_geometry(1.0, 1.0, 8, 8, (0.5, 0.5)).unwrap();
        assert!(read_dump(&mut b.as_slice()).unwrap().into_scalar(&other).is_err());
        assert!(read_dump(&mut b.as_slice()).unwrap().into_spinor(&g).is_err());
    }
}
