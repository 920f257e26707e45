//! On-disk formats: `PRCMP1` comparison files, `PRFAC1` factor checkpoints
//! and the two-column ID maps.
//!
//! All integers and floats are little-endian.

use std::io::{BufRead, Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ingest::IdMap;
use crate::model::{ComparisonSet, ComparisonTriple, FactorPair};

pub const COMPARISON_MAGIC: &[u8; 6] = b"PRCMP1";
pub const FACTOR_MAGIC: &[u8; 6] = b"PRFAC1";

/// Header `PRCMP1, d1, d2, m` then `m` records `(user, preferred, other)`
/// as `u32`. Triples are written in canonical form.
pub fn write_comparisons<W: Write>(mut w: W, set: &ComparisonSet) -> Result<()> {
    w.write_all(COMPARISON_MAGIC)?;
    for n in [set.d1(), set.d2(), set.len()] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for t in set.triples() {
        let t = t.canonical();
        for x in [t.user, t.preferred, t.other] {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_comparisons<R: Read>(mut r: R) -> Result<ComparisonSet> {
    read_magic(&mut r, COMPARISON_MAGIC)?;
    let d1 = read_usize(&mut r)?;
    let d2 = read_usize(&mut r)?;
    let m = read_usize(&mut r)?;
    if m > u32::MAX as usize {
        return Err(Error::Format(format!("comparison count {m} too large")));
    }
    let mut triples = Vec::with_capacity(m.min(1 << 24));
    let mut rec = [0u8; 12];
    for pos in 0..m {
        r.read_exact(&mut rec)
            .map_err(|e| truncated(e, format!("comparison record {pos} of {m}")))?;
        let field = |o: usize| u32::from_le_bytes(rec[o..o + 4].try_into().unwrap());
        triples.push(ComparisonTriple::new(field(0), field(4), field(8)));
    }
    ensure_eof(&mut r)?;
    ComparisonSet::new(d1, d2, triples)
}

/// Header `PRFAC1, d1, d2, r` then the rows of `U` followed by the rows of
/// `V` as `f64`.
pub fn write_factors<W: Write>(mut w: W, factors: &FactorPair) -> Result<()> {
    w.write_all(FACTOR_MAGIC)?;
    for n in [factors.d1(), factors.d2(), factors.rank()] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for x in factors.users().iter().chain(factors.items().iter()) {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_factors<R: Read>(mut r: R) -> Result<FactorPair> {
    read_magic(&mut r, FACTOR_MAGIC)?;
    let d1 = read_usize(&mut r)?;
    let d2 = read_usize(&mut r)?;
    let rank = read_usize(&mut r)?;
    let mut read_matrix = |rows: usize, what: &str| -> Result<Array2<f64>> {
        let n = rows
            .checked_mul(rank)
            .ok_or_else(|| Error::Format(format!("{what} shape {rows}x{rank} overflows")))?;
        let mut buf = [0u8; 8];
        let mut data = Vec::with_capacity(n.min(1 << 26));
        for idx in 0..n {
            r.read_exact(&mut buf)
                .map_err(|e| truncated(e, format!("{what} entry {idx} of {n}")))?;
            data.push(f64::from_le_bytes(buf));
        }
        Ok(Array2::from_shape_vec((rows, rank), data).expect("length matches shape"))
    };
    let users = read_matrix(d1, "user factor")?;
    let items = read_matrix(d2, "item factor")?;
    ensure_eof(&mut r)?;
    FactorPair::new(users, items)
}

/// One `raw<TAB>index` line per entry, in index order.
pub fn write_id_map<W: Write>(mut w: W, map: &IdMap) -> Result<()> {
    for (idx, raw) in map.iter() {
        writeln!(w, "{raw}\t{idx}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_id_map<R: BufRead>(r: R) -> Result<IdMap> {
    let mut raw: Vec<Option<String>> = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: n + 1,
            message,
        };
        let (name, idx) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `raw<TAB>index`".into()))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad index {idx:?}")))?;
        if idx >= raw.len() {
            raw.resize(idx + 1, None);
        }
        if raw[idx].replace(name.to_string()).is_some() {
            return Err(parse_err(format!("index {idx} assigned twice")));
        }
    }
    let raw = raw
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| Error::Format(format!("id map has no entry for index {i}"))))
        .collect::<Result<Vec<_>>>()?;
    IdMap::from_raw(raw)
}

fn read_magic<R: Read>(r: &mut R, magic: &[u8; 6]) -> Result<()> {
    let mut got = [0u8; 6];
    r.read_exact(&mut got)
        .map_err(|e| truncated(e, "header".into()))?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

fn read_usize<R: Read>(r: &mut R) -> Result<usize> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|e| truncated(e, "header".into()))?;
    usize::try_from(u64::from_le_bytes(buf))
        .map_err(|_| Error::Format("header value exceeds usize".into()))
}

fn ensure_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after last record".into())),
    }
}

fn truncated(e: std::io::Error, what: String) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format(format!("file truncated in {what}"))
    } else {
        Error::Io(e)
    }
}
