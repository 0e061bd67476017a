//! Single-file NIfTI-1 reader and writer.
//!
//! Only the subset needed by the pipeline is supported: little-endian,
//! `.nii` or gzip-wrapped `.nii.gz`, 3D axis-aligned grids, and the
//! `uint8`, `int16`, `uint16` and `float32` datatypes. Orientation fields
//! (qform/sform) are carried through unchanged so files round-trip, but no
//! orientation math is done on them.
//!
//! Data is stored in x-fastest order: voxel `(x, y, z)` lives at
//! `x + nx * (y + ny * z)`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};

pub const HEADER_SIZE: usize = 348;
pub const MIN_VOX_OFFSET: usize = 352;
pub const MAGIC: &[u8; 4] = b"n+1\0";
pub const MAX_DIM: usize = 4096;

/// Grid spacings closer than this (mm, per axis) are considered equal.
pub const SPACING_TOLERANCE_MM: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Uint8,
    Int16,
    Uint16,
    Float32,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Float32 => 16,
            Datatype::Uint16 => 512,
        }
    }

    pub fn from_code(code: i16) -> Option<Self> {
        Some(match code {
            2 => Datatype::Uint8,
            4 => Datatype::Int16,
            16 => Datatype::Float32,
            512 => Datatype::Uint16,
            _ => return None,
        })
    }

    pub fn bitpix(self) -> i16 {
        (self.bytes_per_voxel() * 8) as i16
    }

    pub fn bytes_per_voxel(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 | Datatype::Uint16 => 2,
            Datatype::Float32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Datatype::Uint8 => "uint8",
            Datatype::Int16 => "int16",
            Datatype::Uint16 => "uint16",
            Datatype::Float32 => "float32",
        }
    }

    fn integer_range(self) -> Option<(f64, f64)> {
        match self {
            Datatype::Uint8 => Some((0.0, u8::MAX as f64)),
            Datatype::Int16 => Some((i16::MIN as f64, i16::MAX as f64)),
            Datatype::Uint16 => Some((0.0, u16::MAX as f64)),
            Datatype::Float32 => None,
        }
    }

    /// Whether `value` survives a write/read cycle in this datatype unchanged
    /// (float32 accepts any finite value in range and rounds it).
    pub fn can_represent(self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match self.integer_range() {
            Some((lo, hi)) => value.fract() == 0.0 && value >= lo && value <= hi,
            None => value.abs() <= f32::MAX as f64,
        }
    }
}

/// Orientation fields kept only so they survive a round-trip.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Orientation {
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow_x: [f32; 4],
    pub srow_y: [f32; 4],
    pub srow_z: [f32; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dims: [usize; 3],
    /// Voxel size in mm, stored at file precision.
    pub pixdim: [f32; 3],
    pub datatype: Datatype,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub vox_offset: usize,
    pub xyzt_units: u8,
    pub orientation: Orientation,
}

impl NiftiHeader {
    /// A fresh header with millimetre units and identity scaling.
    pub fn new(dims: [usize; 3], pixdim: [f32; 3]) -> Self {
        NiftiHeader {
            dims,
            pixdim,
            datatype: Datatype::Float32,
            scl_slope: 1.0,
            scl_inter: 0.0,
            vox_offset: MIN_VOX_OFFSET,
            xyzt_units: 2,
            orientation: Orientation::default(),
        }
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.pixdim.map(f64::from)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }
}

/// Anything laid out on a NIfTI grid.
pub trait Grid {
    fn header(&self) -> &NiftiHeader;

    fn dims(&self) -> [usize; 3] {
        self.header().dims
    }

    fn spacing(&self) -> [f64; 3] {
        self.header().spacing()
    }
}

impl Grid for NiftiHeader {
    fn header(&self) -> &NiftiHeader {
        self
    }
}

/// Real-valued volume (CT intensities, encoded channels, distance maps).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    pub header: NiftiHeader,
    pub data: Vec<f64>,
}

impl Volume3D {
    pub fn new(header: NiftiHeader, data: Vec<f64>) -> Result<Self> {
        let expected = header.voxel_count();
        if data.len() != expected {
            return Err(Error::DataLength {
                len: data.len(),
                expected,
            });
        }
        Ok(Volume3D { header, data })
    }

    pub fn filled(header: NiftiHeader, value: f64) -> Self {
        let n = header.voxel_count();
        Volume3D {
            header,
            data: vec![value; n],
        }
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.header.index(x, y, z)]
    }
}

impl Grid for Volume3D {
    fn header(&self) -> &NiftiHeader {
        &self.header
    }
}

/// Small-integer mask aligned to a CT grid. Any non-zero voxel is foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub header: NiftiHeader,
    pub data: Vec<u8>,
}

impl LabelMap {
    pub fn new(header: NiftiHeader, data: Vec<u8>) -> Result<Self> {
        let expected = header.voxel_count();
        if data.len() != expected {
            return Err(Error::DataLength {
                len: data.len(),
                expected,
            });
        }
        let mut header = header;
        header.datatype = Datatype::Uint8;
        Ok(LabelMap { header, data })
    }

    pub fn empty(header: NiftiHeader) -> Self {
        let n = header.voxel_count();
        let mut header = header;
        header.datatype = Datatype::Uint8;
        LabelMap {
            header,
            data: vec![0; n],
        }
    }

    /// An empty mask on the same grid.
    pub fn empty_like(other: &impl Grid) -> Self {
        Self::empty(other.header().clone())
    }

    pub fn from_volume(volume: &Volume3D) -> Result<Self> {
        let data = volume
            .data
            .iter()
            .enumerate()
            .map(|(index, &value)| {
                if value.fract() == 0.0 && (0.0..=255.0).contains(&value) {
                    Ok(value as u8)
                } else {
                    Err(Error::InvalidLabel { index, value })
                }
            })
            .collect::<Result<Vec<u8>>>()?;
        LabelMap::new(volume.header.clone(), data)
    }

    pub fn to_volume(&self) -> Volume3D {
        Volume3D {
            header: self.header.clone(),
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    #[inline]
    pub fn is_set(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.header.index(x, y, z)] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: u8) {
        let i = self.header.index(x, y, z);
        self.data[i] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }
}

impl Grid for LabelMap {
    fn header(&self) -> &NiftiHeader {
        &self.header
    }
}

/// Succeeds iff both grids have identical dims and spacing within
/// [`SPACING_TOLERANCE_MM`] on every axis.
pub fn check_aligned(a: &impl Grid, b: &impl Grid) -> Result<()> {
    let (ha, hb) = (a.header(), b.header());
    let mut problems = Vec::new();
    for axis in 0..3 {
        if ha.dims[axis] != hb.dims[axis] {
            problems.push(format!(
                "axis {axis}: dims {} vs {}",
                ha.dims[axis], hb.dims[axis]
            ));
        }
        let (sa, sb) = (f64::from(ha.pixdim[axis]), f64::from(hb.pixdim[axis]));
        if (sa - sb).abs() > SPACING_TOLERANCE_MM {
            problems.push(format!("axis {axis}: pixdim {sa} vs {sb}"));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::GridMismatch(problems.join("; ")))
    }
}

fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

fn le_i16(b: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([b[off], b[off + 1]])
}

fn le_i32(b: &[u8], off: usize) -> i32 {
    i32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn le_f32(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn le_f32s<const N: usize>(b: &[u8], off: usize) -> [f32; N] {
    std::array::from_fn(|i| le_f32(b, off + 4 * i))
}

/// Parse a header from the first 348 bytes of an uncompressed file.
pub fn parse_header(bytes: &[u8]) -> Result<NiftiHeader> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::TruncatedFile {
            field: "header",
            needed: HEADER_SIZE,
            available: bytes.len(),
        });
    }
    let sizeof_hdr = le_i32(bytes, 0);
    if sizeof_hdr != HEADER_SIZE as i32 {
        if sizeof_hdr.swap_bytes() == HEADER_SIZE as i32 {
            return Err(Error::ByteSwapped);
        }
        return Err(Error::BadHeaderSize { value: sizeof_hdr });
    }
    let magic: [u8; 4] = bytes[344..348].try_into().unwrap();
    if &magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }

    let ndim = le_i16(bytes, 40);
    if !(1..=7).contains(&ndim) {
        return Err(Error::DimOutOfRange {
            axis: 0,
            value: ndim.into(),
        });
    }
    let mut dims = [1usize; 3];
    for axis in 1..=7usize {
        let value = le_i16(bytes, 40 + 2 * axis);
        if axis > ndim as usize {
            continue;
        }
        if axis <= 3 {
            if value < 1 || value as usize > MAX_DIM {
                return Err(Error::DimOutOfRange {
                    axis,
                    value: value.into(),
                });
            }
            dims[axis - 1] = value as usize;
        } else if value != 1 {
            // Only 3D grids; trailing singleton dims are tolerated.
            return Err(Error::DimOutOfRange {
                axis,
                value: value.into(),
            });
        }
    }

    let code = le_i16(bytes, 70);
    let datatype = Datatype::from_code(code).ok_or(Error::UnsupportedDatatype { code })?;
    let bitpix = le_i16(bytes, 72);
    if bitpix != datatype.bitpix() {
        return Err(Error::BitpixMismatch { code, bitpix });
    }

    let mut pixdim = [0f32; 3];
    for (axis, slot) in pixdim.iter_mut().enumerate() {
        let value = le_f32(bytes, 80 + 4 * axis);
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidPixdim {
                axis: axis + 1,
                value,
            });
        }
        *slot = value;
    }

    let raw_offset = le_f32(bytes, 108);
    if !(raw_offset.is_finite()
        && raw_offset >= MIN_VOX_OFFSET as f32
        && raw_offset.fract() == 0.0
        && raw_offset < 1e9)
    {
        return Err(Error::InvalidVoxOffset { value: raw_offset });
    }

    let mut scl_slope = le_f32(bytes, 112);
    let mut scl_inter = le_f32(bytes, 116);
    // slope 0 means "unscaled" by convention
    if scl_slope == 0.0 || !scl_slope.is_finite() {
        scl_slope = 1.0;
        scl_inter = 0.0;
    }
    if !scl_inter.is_finite() {
        scl_inter = 0.0;
    }

    let orientation = Orientation {
        qform_code: le_i16(bytes, 252),
        sform_code: le_i16(bytes, 254),
        quatern: le_f32s(bytes, 256),
        qoffset: le_f32s(bytes, 268),
        srow_x: le_f32s(bytes, 280),
        srow_y: le_f32s(bytes, 296),
        srow_z: le_f32s(bytes, 312),
    };

    Ok(NiftiHeader {
        dims,
        pixdim,
        datatype,
        scl_slope,
        scl_inter,
        vox_offset: raw_offset as usize,
        xyzt_units: bytes[123],
        orientation,
    })
}

/// Decode a complete file image (optionally gzip-wrapped) into a volume with
/// slope and intercept applied.
pub fn decode_volume(bytes: &[u8]) -> Result<Volume3D> {
    let inflated;
    let bytes = if is_gzip(bytes) {
        let mut out = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(Error::CorruptContainer)?;
        inflated = out;
        &inflated[..]
    } else {
        bytes
    };

    let header = parse_header(bytes)?;
    let n = header.voxel_count();
    let bpv = header.datatype.bytes_per_voxel();
    let start = header.vox_offset;
    let needed = start + n * bpv;
    if bytes.len() < needed {
        return Err(Error::TruncatedFile {
            field: "data",
            needed,
            available: bytes.len(),
        });
    }
    let payload = &bytes[start..needed];
    let slope = f64::from(header.scl_slope);
    let inter = f64::from(header.scl_inter);
    let raw: Vec<f64> = match header.datatype {
        Datatype::Uint8 => payload.iter().map(|&v| f64::from(v)).collect(),
        Datatype::Int16 => payload
            .chunks_exact(2)
            .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])))
            .collect(),
        Datatype::Uint16 => payload
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_le_bytes([c[0], c[1]])))
            .collect(),
        Datatype::Float32 => payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect(),
    };
    let identity = slope == 1.0 && inter == 0.0;
    let mut data = raw;
    for (index, v) in data.iter_mut().enumerate() {
        if !identity {
            *v = *v * slope + inter;
        }
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { index });
        }
    }
    Volume3D::new(header, data)
}

/// Encode a volume as an uncompressed single-file NIfTI-1 image, written
/// with slope 1 and intercept 0.
pub fn encode_volume(volume: &Volume3D, datatype: Datatype) -> Result<Vec<u8>> {
    let h = &volume.header;
    if volume.data.len() != h.voxel_count() {
        return Err(Error::DataLength {
            len: volume.data.len(),
            expected: h.voxel_count(),
        });
    }
    for (index, &value) in volume.data.iter().enumerate() {
        if !datatype.can_represent(value) {
            return Err(Error::ValueOverflow {
                index,
                value,
                datatype: datatype.name(),
            });
        }
    }
    let mut out = Vec::with_capacity(MIN_VOX_OFFSET + volume.data.len() * datatype.bytes_per_voxel());
    out.extend_from_slice(&header_bytes(h, datatype));
    match datatype {
        Datatype::Uint8 => out.extend(volume.data.iter().map(|&v| v as u8)),
        Datatype::Int16 => {
            for &v in &volume.data {
                out.extend_from_slice(&(v as i16).to_le_bytes());
            }
        }
        Datatype::Uint16 => {
            for &v in &volume.data {
                out.extend_from_slice(&(v as u16).to_le_bytes());
            }
        }
        Datatype::Float32 => {
            for &v in &volume.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn header_bytes(h: &NiftiHeader, datatype: Datatype) -> [u8; MIN_VOX_OFFSET] {
    let mut b = [0u8; MIN_VOX_OFFSET];
    let mut put = |off: usize, bytes: &[u8]| b[off..off + bytes.len()].copy_from_slice(bytes);
    put(0, &(HEADER_SIZE as i32).to_le_bytes());
    put(38, b"r");
    let dim: [i16; 8] = [3, h.dims[0] as i16, h.dims[1] as i16, h.dims[2] as i16, 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        put(40 + 2 * i, &d.to_le_bytes());
    }
    put(70, &datatype.code().to_le_bytes());
    put(72, &datatype.bitpix().to_le_bytes());
    let pixdim: [f32; 8] = [
        1.0, h.pixdim[0], h.pixdim[1], h.pixdim[2], 1.0, 1.0, 1.0, 1.0,
    ];
    for (i, p) in pixdim.iter().enumerate() {
        put(76 + 4 * i, &p.to_le_bytes());
    }
    put(108, &(MIN_VOX_OFFSET as f32).to_le_bytes());
    put(112, &1f32.to_le_bytes());
    put(116, &0f32.to_le_bytes());
    put(123, &[h.xyzt_units]);
    let o = &h.orientation;
    put(252, &o.qform_code.to_le_bytes());
    put(254, &o.sform_code.to_le_bytes());
    let floats = o
        .quatern
        .iter()
        .chain(&o.qoffset)
        .chain(&o.srow_x)
        .chain(&o.srow_y)
        .chain(&o.srow_z);
    for (i, f) in floats.enumerate() {
        put(256 + 4 * i, &f.to_le_bytes());
    }
    put(344, MAGIC);
    b
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_volume(&bytes)
}

/// Write `volume` as `datatype`; a `.gz` suffix selects the gzip container.
pub fn write_volume(volume: &Volume3D, path: impl AsRef<Path>, datatype: Datatype) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_volume(volume, datatype)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let gz = path.extension().is_some_and(|ext| ext == "gz");
    let result = if gz {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::new(6));
        enc.write_all(&bytes)
            .and_then(|_| enc.finish())
            .and_then(|mut w| w.flush())
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(&bytes).and_then(|_| w.flush())
    };
    result.map_err(|e| Error::io(path, e))
}

pub fn read_labelmap(path: impl AsRef<Path>) -> Result<LabelMap> {
    LabelMap::from_volume(&read_volume(path)?)
}

pub fn write_labelmap(mask: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    write_volume(&mask.to_volume(), path, Datatype::Uint8)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds a minimal header byte-by-byte, independently of `header_bytes`.
    fn handmade_file(dims: [i16; 3], code: i16, bitpix: i16, payload: &[u8]) -> Vec<u8> {
        let mut b = vec![0u8; 352];
        b[0..4].copy_from_slice(&348i32.to_le_bytes());
        b[40..42].copy_from_slice(&3i16.to_le_bytes());
        for (i, d) in dims.iter().enumerate() {
            b[42 + 2 * i..44 + 2 * i].copy_from_slice(&d.to_le_bytes());
        }
        b[70..72].copy_from_slice(&code.to_le_bytes());
        b[72..74].copy_from_slice(&bitpix.to_le_bytes());
        for i in 0..3 {
            b[80 + 4 * i..84 + 4 * i].copy_from_slice(&1f32.to_le_bytes());
        }
        b[108..112].copy_from_slice(&352f32.to_le_bytes());
        b[344..348].copy_from_slice(b"n+1\0");
        b.extend_from_slice(payload);
        b
    }

    fn gzip(bytes: &[u8]) -> Vec<u8> {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(bytes).unwrap();
        enc.finish().unwrap()
    }

    #[test]
    fn reads_minimal_uint8_file() {
        let file = handmade_file([2, 2, 2], 2, 8, &[0, 1, 2, 3, 4, 5, 6, 7]);
        let v = decode_volume(&file).unwrap();
        assert_eq!(v.header.dims, [2, 2, 2]);
        assert_eq!(v.data, (0..8).map(f64::from).collect::<Vec<_>>());
        assert_eq!(v.get(1, 1, 1), 7.0);
        assert_eq!(v.get(1, 0, 1), 5.0);
    }

    #[test]
    fn gzip_container_is_transparent() {
        let file = handmade_file([2, 2, 2], 2, 8, &[0, 1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(decode_volume(&gzip(&file)).unwrap(), decode_volume(&file).unwrap());
    }

    #[test]
    fn rejects_ni1_magic() {
        let mut file = handmade_file([2, 2, 2], 2, 8, &[0; 8]);
        file[344..348].copy_from_slice(b"ni1\0");
        assert!(matches!(decode_volume(&file), Err(Error::BadMagic { found }) if &found == b"ni1\0"));
    }

    #[test]
    fn rejects_byte_swapped() {
        let mut file = handmade_file([2, 2, 2], 2, 8, &[0; 8]);
        file[0..4].copy_from_slice(&348i32.to_be_bytes());
        assert!(matches!(decode_volume(&file), Err(Error::ByteSwapped)));
    }

    #[test]
    fn rejects_unsupported_datatype_and_dims() {
        let file = handmade_file([2, 2, 2], 64, 64, &[0; 64]);
        assert!(matches!(decode_volume(&file), Err(Error::UnsupportedDatatype { code: 64 })));
        let file = handmade_file([2, 0, 2], 2, 8, &[]);
        assert!(matches!(decode_volume(&file), Err(Error::DimOutOfRange { axis: 2, value: 0 })));
        let file = handmade_file([5000, 1, 1], 2, 8, &[]);
        assert!(matches!(decode_volume(&file), Err(Error::DimOutOfRange { axis: 1, .. })));
    }

    #[test]
    fn rejects_short_payload() {
        let file = handmade_file([2, 2, 2], 2, 8, &[0; 7]);
        assert!(matches!(
            decode_volume(&file),
            Err(Error::TruncatedFile { field: "data", needed: 360, available: 359 })
        ));
    }

    #[test]
    fn applies_slope_and_intercept() {
        let mut file = handmade_file([2, 1, 1], 4, 16, &[]);
        file.extend_from_slice(&10i16.to_le_bytes());
        file.extend_from_slice(&(-3i16).to_le_bytes());
        file[112..116].copy_from_slice(&2f32.to_le_bytes());
        file[116..120].copy_from_slice(&(-1024f32).to_le_bytes());
        let v = decode_volume(&file).unwrap();
        assert_eq!(v.data, vec![-1004.0, -1030.0]);
    }

    #[test]
    fn int16_overflow_is_reported() {
        let v = Volume3D::new(NiftiHeader::new([2, 1, 1], [1.0; 3]), vec![0.0, 1e40]).unwrap();
        assert!(matches!(
            encode_volume(&v, Datatype::Int16),
            Err(Error::ValueOverflow { index: 1, datatype: "int16", .. })
        ));
        assert!(encode_volume(&v, Datatype::Float32).is_err());
        let frac = Volume3D::new(NiftiHeader::new([1, 1, 1], [1.0; 3]), vec![0.5]).unwrap();
        assert!(encode_volume(&frac, Datatype::Uint8).is_err());
    }

    #[test]
    fn round_trip_preserves_spacing_and_orientation() {
        let dir = tempfile::tempdir().unwrap();
        let mut header = NiftiHeader::new([3, 2, 2], [0.98, 0.98, 5.0]);
        header.orientation.qform_code = 1;
        header.orientation.quatern = [0.0, 0.0, 1.0];
        header.orientation.srow_z = [0.0, 0.0, 5.0, -300.0];
        let v = Volume3D::new(header, (0..12).map(|i| i as f64 * 0.25 - 1.0).collect()).unwrap();
        for name in ["a.nii", "a.nii.gz"] {
            let path = dir.path().join(name);
            write_volume(&v, &path, Datatype::Float32).unwrap();
            let back = read_volume(&path).unwrap();
            assert_eq!(back.data, v.data);
            assert_eq!(back.header.pixdim, [0.98f32, 0.98, 5.0]);
            assert_eq!(back.header.orientation, v.header.orientation);
        }
    }

    #[test]
    fn alignment_checks() {
        let a = LabelMap::empty(NiftiHeader::new([512, 512, 300], [0.98, 0.98, 5.0]));
        assert!(check_aligned(&a, &a.clone()).is_ok());
        let b = LabelMap::empty(NiftiHeader::new([512, 512, 299], [0.98, 0.98, 5.0]));
        let err = check_aligned(&a, &b).unwrap_err().to_string();
        assert!(err.contains("axis 2"), "{err}");
        let c = LabelMap::empty(NiftiHeader::new([512, 512, 300], [0.98, 0.98001, 5.0]));
        assert!(check_aligned(&a, &c).is_ok());
        let d = LabelMap::empty(NiftiHeader::new([512, 512, 300], [0.98, 0.981, 5.0]));
        assert!(matches!(check_aligned(&a, &d), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn labelmap_rejects_non_integer_values() {
        let v = Volume3D::new(NiftiHeader::new([2, 1, 1], [1.0; 3]), vec![1.0, 256.0]).unwrap();
        assert!(matches!(LabelMap::from_volume(&v), Err(Error::InvalidLabel { index: 1, .. })));
    }
}
