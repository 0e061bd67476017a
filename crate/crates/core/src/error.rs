use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic: expected \"n+1\\0\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("sizeof_hdr is {value}, expected 348")]
    BadHeaderSize { value: i32 },

    #[error("big-endian NIfTI files are not supported")]
    ByteSwapped,

    #[error("unsupported datatype code {code}")]
    UnsupportedDatatype { code: i16 },

    #[error("bitpix {bitpix} does not match datatype code {code}")]
    BitpixMismatch { code: i16, bitpix: i16 },

    #[error("truncated file: {field} needs {needed} bytes, only {available} available")]
    TruncatedFile {
        field: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("dim[{axis}] = {value} is out of range")]
    DimOutOfRange { axis: usize, value: i64 },

    #[error("pixdim[{axis}] = {value} must be finite and positive")]
    InvalidPixdim { axis: usize, value: f32 },

    #[error("vox_offset = {value} must be an integer >= 352")]
    InvalidVoxOffset { value: f32 },

    #[error("non-finite value at voxel {index}")]
    NonFiniteValue { index: usize },

    #[error("value {value} at voxel {index} is not representable as {datatype}")]
    ValueOverflow {
        index: usize,
        value: f64,
        datatype: &'static str,
    },

    #[error("label value {value} at voxel {index} is not an integer in 0..=255")]
    InvalidLabel { index: usize, value: f64 },

    #[error("data length {len} does not match grid of {expected} voxels")]
    DataLength { len: usize, expected: usize },

    #[error("gzip container is corrupt: {0}")]
    CorruptContainer(std::io::Error),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("schema error in {context}: {message}")]
    Schema { context: String, message: String },

    #[error("unknown structure name {0:?}")]
    UnknownStructureName(String),

    #[error("duplicate patient id {0:?}")]
    DuplicatePatientId(String),

    #[error("patient {patient_id}: missing file {path}")]
    MissingFile { patient_id: String, path: PathBuf },

    #[error("{0} structures requested, at most 255 can be encoded")]
    TooManyStructures(usize),

    #[error("structure set is empty")]
    EmptyStructureSet,

    #[error("patient {patient_id}: missing structure {structure:?}")]
    MissingStructure {
        patient_id: String,
        structure: String,
    },

    #[error("patient {patient_id}: no prediction path")]
    MissingPrediction { patient_id: String },

    #[error("{which} mask is empty")]
    EmptyMask { which: &'static str },

    #[error("landmark {0} is empty")]
    EmptyLandmark(&'static str),

    #[error("landmarks are not ordered superior to inferior (b1={b1}, b2={b2}, b3={b3})")]
    NonMonotonicLandmarks { b1: usize, b2: usize, b3: usize },

    #[error("no {sex} samples in region {region}")]
    EmptyGroup { sex: String, region: String },

    #[error("slice {index} out of range for {len} slices")]
    SliceOutOfRange { index: usize, len: usize },

    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),

    #[error("percentile {0} outside (0, 100]")]
    InvalidPercentile(f64),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
