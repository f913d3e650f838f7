//! Binary field dumps.
//!
//! Layout: an ASCII header of newline-terminated lines
//!
//! ```text
//! STOKES-HOMOG-FIELD 1
//! kind cell
//! dims 3 64 64
//! meta <key> <value>      (zero or more)
//! END
//! ```
//!
//! followed by `prod(dims)` row-major little-endian `f64` values and nothing
//! else.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::cell::{CorrectorField, CorrectorSet, PAIRS};
use crate::stokes::{MacGrid, State};
use crate::Real;

pub const MAGIC: &str = "STOKES-HOMOG-FIELD 1";

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("bad magic line `{found}`")]
    BadMagic { found: String },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("dimensions {dims:?} overflow the addressable size")]
    DimOverflow { dims: Vec<usize> },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("{extra} trailing bytes after the payload")]
    TrailingBytes { extra: usize },

    #[error("field has {found} values but dims {dims:?} need {expected}")]
    Shape { dims: Vec<usize>, expected: usize, found: usize },

    #[error("unexpected field: {0}")]
    Content(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Cell,
    MacU,
    MacV,
    MacP,
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Cell => "cell",
            FieldKind::MacU => "mac-u",
            FieldKind::MacV => "mac-v",
            FieldKind::MacP => "mac-p",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FieldKind {
    type Err = DumpError;

    fn from_str(s: &str) -> Result<Self, DumpError> {
        match s {
            "cell" => Ok(FieldKind::Cell),
            "mac-u" => Ok(FieldKind::MacU),
            "mac-v" => Ok(FieldKind::MacV),
            "mac-p" => Ok(FieldKind::MacP),
            other => Err(DumpError::Header(format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub kind: FieldKind,
    pub dims: Vec<usize>,
    /// Keys are single words; values must not contain newlines.
    pub meta: BTreeMap<String, String>,
    pub data: Vec<f64>,
}

fn element_count(dims: &[usize]) -> Result<usize, DumpError> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(8).map(|_| n))
        .ok_or_else(|| DumpError::DimOverflow { dims: dims.to_vec() })
}

impl FieldDump {
    pub fn new(kind: FieldKind, dims: Vec<usize>, data: Vec<f64>) -> Result<Self, DumpError> {
        let expected = element_count(&dims)?;
        if data.len() != expected {
            return Err(DumpError::Shape { dims, expected, found: data.len() });
        }
        Ok(FieldDump { kind, dims, meta: BTreeMap::new(), data })
    }

    pub fn with_meta(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn meta(&self, key: &str) -> Result<&str, DumpError> {
        self.meta.get(key).map(String::as_str).ok_or_else(|| DumpError::Content(format!("missing meta `{key}`")))
    }

    pub fn encode(&self) -> Result<Vec<u8>, DumpError> {
        let expected = element_count(&self.dims)?;
        if self.data.len() != expected {
            return Err(DumpError::Shape { dims: self.dims.clone(), expected, found: self.data.len() });
        }
        let mut header = format!("{MAGIC}\nkind {}\ndims", self.kind);
        for d in &self.dims {
            header.push_str(&format!(" {d}"));
        }
        header.push('\n');
        for (k, v) in &self.meta {
            if k.is_empty() || k.contains(char::is_whitespace) || v.contains('\n') {
                return Err(DumpError::Header(format!("unencodable meta entry `{k}`")));
            }
            header.push_str(&format!("meta {k} {v}\n"));
        }
        header.push_str("END\n");
        let mut out = header.into_bytes();
        out.reserve(8 * expected);
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DumpError> {
        let mut pos = 0;
        let mut next_line = || -> Result<&str, DumpError> {
            let rest = &bytes[pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| DumpError::Header("unterminated header".into()))?;
            pos += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|_| DumpError::Header("header is not UTF-8".into()))
        };

        let magic = next_line().map_err(|_| DumpError::BadMagic {
            found: String::from_utf8_lossy(&bytes[..bytes.len().min(32)]).into_owned(),
        })?;
        if magic != MAGIC {
            return Err(DumpError::BadMagic { found: magic.to_string() });
        }
        let kind = match next_line()?.split_once(' ') {
            Some(("kind", k)) => k.parse()?,
            _ => return Err(DumpError::Header("expected `kind` line".into())),
        };
        let dims_line = next_line()?;
        let dims = match dims_line.split_once(' ') {
            Some(("dims", d)) => d
                .split_whitespace()
                .map(|x| {
                    x.parse::<usize>().map_err(|_| match x.bytes().all(|b| b.is_ascii_digit()) {
                        true => DumpError::DimOverflow { dims: Vec::new() },
                        false => DumpError::Header(format!("bad dimension `{x}`")),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
            _ => return Err(DumpError::Header("expected `dims` line".into())),
        };
        let mut meta = BTreeMap::new();
        loop {
            let line = next_line()?;
            if line == "END" {
                break;
            }
            match line.strip_prefix("meta ").and_then(|m| m.split_once(' ')) {
                Some((k, v)) => {
                    meta.insert(k.to_string(), v.to_string());
                }
                None => return Err(DumpError::Header(format!("unexpected header line `{line}`"))),
            }
        }
        let count = element_count(&dims)?;
        let payload = &bytes[pos..];
        let expected = count * 8;
        if payload.len() < expected {
            return Err(DumpError::Truncated { expected, found: payload.len() });
        }
        if payload.len() > expected {
            return Err(DumpError::TrailingBytes { extra: payload.len() - expected });
        }
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(FieldDump { kind, dims, meta, data })
    }
}

pub fn dump_field(path: &Path, field: &FieldDump) -> Result<(), DumpError> {
    fs::write(path, field.encode()?)?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<FieldDump, DumpError> {
    FieldDump::decode(&fs::read(path)?)
}

/// Velocity components then pressure, `dims = [3, n, n]`.
pub fn corrector_dump<T: Real>(chi: &CorrectorField<T>, coefficients: &str) -> FieldDump {
    let data = chi.velocity.iter().chain([&chi.pressure]).flat_map(|c| c.iter().map(|x| x.as_f64())).collect();
    FieldDump { kind: FieldKind::Cell, dims: vec![3, chi.n, chi.n], meta: BTreeMap::new(), data }
        .with_meta("i", chi.i)
        .with_meta("k", chi.k)
        .with_meta("coefficients", coefficients)
}

pub fn corrector_from_dump<T: Real>(dump: &FieldDump) -> Result<CorrectorField<T>, DumpError> {
    let bad = |what: &str| DumpError::Content(what.to_string());
    if dump.kind != FieldKind::Cell || dump.dims.len() != 3 || dump.dims[0] != 3 || dump.dims[1] != dump.dims[2] {
        return Err(bad("not a corrector dump"));
    }
    let index = |key| dump.meta(key)?.parse::<usize>().map_err(|_| bad("bad corrector index"));
    let (i, k, n) = (index("i")?, index("k")?, dump.dims[1]);
    let mut parts = dump.data.chunks_exact(n * n).map(|c| c.iter().map(|&x| T::lit(x)).collect::<Vec<T>>());
    let (v1, v2, p) = (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap());
    Ok(CorrectorField { i, k, n, velocity: [v1, v2], pressure: p })
}

/// Conventional file name of a corrector dump.
pub fn corrector_file(i: usize, k: usize) -> String {
    format!("chi_{i}{k}.field")
}

pub fn dump_correctors<T: Real>(dir: &Path, chi: &CorrectorSet<T>, coefficients: &str) -> Result<(), DumpError> {
    fs::create_dir_all(dir)?;
    for f in &chi.fields {
        dump_field(&dir.join(corrector_file(f.i, f.k)), &corrector_dump(f, coefficients))?;
    }
    Ok(())
}

/// Loads the four correctors written by [`dump_correctors`], checking that
/// they belong to `coefficients` on an `n_cell` lattice.
pub fn load_correctors<T: Real>(dir: &Path, coefficients: &str, n_cell: usize) -> Result<CorrectorSet<T>, DumpError> {
    let mut fields = Vec::with_capacity(4);
    for &(i, k) in &PAIRS {
        let dump = load_field(&dir.join(corrector_file(i, k)))?;
        if dump.meta("coefficients")? != coefficients {
            return Err(DumpError::Content(format!(
                "corrector chi_{i}{k} belongs to {} rather than {coefficients}",
                dump.meta("coefficients")?
            )));
        }
        let f = corrector_from_dump::<T>(&dump)?;
        if f.n != n_cell || (f.i, f.k) != (i, k) {
            return Err(DumpError::Content(format!("corrector file for ({i},{k}) holds chi_{}{} on {} cells", f.i, f.k, f.n)));
        }
        fields.push(f);
    }
    CorrectorSet::from_fields(fields, Vec::new()).map_err(|e| DumpError::Content(e.to_string()))
}

/// The three staggered components of a state, tagged with `label` and time.
pub fn state_dumps<T: Real>(grid: &MacGrid, state: &State<T>, label: &str) -> [FieldDump; 3] {
    let n = grid.n();
    let part = |kind, dims: Vec<usize>, v: &[T]| {
        FieldDump { kind, dims, meta: BTreeMap::new(), data: v.iter().map(|x| x.as_f64()).collect() }
            .with_meta("run", label)
            .with_meta("t", state.t.as_f64())
            .with_meta("n", n)
    };
    [
        part(FieldKind::MacU, vec![n - 1, n], &state.u),
        part(FieldKind::MacV, vec![n, n - 1], &state.v),
        part(FieldKind::MacP, vec![n, n], &state.p),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_cell_field_payload() {
        let f = FieldDump::new(FieldKind::Cell, vec![8, 8], vec![0.0; 64]).unwrap();
        let bytes = f.encode().unwrap();
        let header = format!("{MAGIC}\nkind cell\ndims 8 8\nEND\n");
        assert_eq!(bytes.len(), header.len() + 512);
        assert_eq!(&bytes[..header.len()], header.as_bytes());
        assert_eq!(FieldDump::decode(&bytes).unwrap(), f);
    }

    #[test]
    fn truncation_and_trailing() {
        let f = FieldDump::new(FieldKind::MacP, vec![2, 3], vec![1.5; 6]).unwrap().with_meta("eps", 0.125);
        let bytes = f.encode().unwrap();
        assert!(matches!(FieldDump::decode(&bytes[..bytes.len() - 3]), Err(DumpError::Truncated { expected: 48, found: 45 })));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(FieldDump::decode(&long), Err(DumpError::TrailingBytes { extra: 1 })));
    }

    #[test]
    fn bad_magic_and_overflow() {
        assert!(matches!(FieldDump::decode(b"NOT-A-FIELD\nkind cell\n"), Err(DumpError::BadMagic { .. })));
        let huge = format!("{MAGIC}\nkind cell\ndims {} 4\nEND\n", usize::MAX / 2);
        assert!(matches!(FieldDump::decode(huge.as_bytes()), Err(DumpError::DimOverflow { .. })));
        assert!(matches!(FieldDump::new(FieldKind::Cell, vec![2, 2], vec![0.0; 3]), Err(DumpError::Shape { .. })));
    }

    #[test]
    fn corrector_round_trip() {
        let mut chi = CorrectorField::<f64>::zeros(1, 2, 4);
        chi.velocity[0][3] = -0.25;
        chi.pressure[5] = 1e-300;
        let back: CorrectorField<f64> = corrector_from_dump(&corrector_dump(&chi, "trig(0.5)")).unwrap();
        assert_eq!(back, chi);
    }
}
