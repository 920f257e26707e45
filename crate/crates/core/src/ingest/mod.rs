//! Rating files, dense re-indexing, splits and comparison generation.

mod compare;
mod split;

use std::collections::HashMap;
use std::io::BufRead;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use compare::{
    binarize, binary_comparisons, brute_force_comparison_count, ratings_to_comparisons,
    subsample_comparisons_largest_gap, subsample_comparisons_uniform,
};
pub use split::{split, split_holdout, split_per_user, SplitMode, SplitSpec};

use crate::error::{Error, Result};

/// Field separator of a ratings file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingFormat {
    /// `user\titem\trating[\ttimestamp]` (MovieLens 100k `u.data`).
    TabSeparated,
    /// `user::item::rating[::timestamp]` (MovieLens 1M / 10M).
    DoubleColonSeparated,
}

impl RatingFormat {
    fn separator(self) -> &'static str {
        match self {
            RatingFormat::TabSeparated => "\t",
            RatingFormat::DoubleColonSeparated => "::",
        }
    }

    /// Picks the format from the first non-empty line.
    pub fn detect(first_line: &str) -> Self {
        if first_line.contains("::") {
            RatingFormat::DoubleColonSeparated
        } else {
            RatingFormat::TabSeparated
        }
    }
}

impl std::str::FromStr for RatingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" | "tab" => Ok(RatingFormat::TabSeparated),
            "dcolon" | "::" | "dat" => Ok(RatingFormat::DoubleColonSeparated),
            other => Err(Error::InvalidConfig(format!(
                "unknown ratings format {other:?}"
            ))),
        }
    }
}

/// Bijection between raw identifiers and dense 0-based indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMap {
    raw: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of `raw`, allocating the next one on first sight.
    pub fn intern(&mut self, raw: &str) -> u32 {
        if let Some(&idx) = self.index.get(raw) {
            return idx;
        }
        let idx = self.raw.len() as u32;
        self.raw.push(raw.to_owned());
        self.index.insert(raw.to_owned(), idx);
        idx
    }

    pub fn get(&self, raw: &str) -> Option<u32> {
        self.index.get(raw).copied()
    }

    pub fn raw(&self, idx: u32) -> Option<&str> {
        self.raw.get(idx as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.raw
            .iter()
            .enumerate()
            .map(|(i, s)| (i as u32, s.as_str()))
    }

    pub fn from_raw(raw: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(raw.len());
        for (i, r) in raw.iter().enumerate() {
            if index.insert(r.clone(), i as u32).is_some() {
                return Err(Error::Format(format!("identifier {r:?} mapped twice")));
            }
        }
        Ok(Self { raw, index })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMaps {
    pub users: IdMap,
    pub items: IdMap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub rating: f64,
    pub timestamp: Option<u64>,
}

/// `(user, item, rating)` entries, at most one per pair, kept sorted by
/// `(user, item)`.
#[derive(Debug, Clone)]
pub struct RatingsTable {
    d1: usize,
    d2: usize,
    entries: Vec<Rating>,
    offsets: Vec<usize>,
    ids: Option<Arc<IdMaps>>,
}

impl RatingsTable {
    pub fn new(d1: usize, d2: usize, mut entries: Vec<Rating>) -> Result<Self> {
        for e in &entries {
            if e.user as usize >= d1 || e.item as usize >= d2 {
                return Err(Error::IndexOutOfBounds(format!(
                    "rating ({}, {}) outside {d1} users x {d2} items",
                    e.user, e.item
                )));
            }
            if !e.rating.is_finite() {
                return Err(Error::InvalidComparison(format!(
                    "rating ({}, {}) is not finite",
                    e.user, e.item
                )));
            }
        }
        entries.sort_by_key(|e| (e.user, e.item));
        if let Some(w) = entries
            .windows(2)
            .find(|w| w[0].user == w[1].user && w[0].item == w[1].item)
        {
            return Err(Error::DuplicateRating {
                line: 0,
                user: w[0].user.to_string(),
                item: w[0].item.to_string(),
            });
        }
        let mut offsets = vec![0usize; d1 + 1];
        for e in &entries {
            offsets[e.user as usize + 1] += 1;
        }
        for i in 0..d1 {
            offsets[i + 1] += offsets[i];
        }
        Ok(Self {
            d1,
            d2,
            entries,
            offsets,
            ids: None,
        })
    }

    pub fn with_ids(mut self, ids: Arc<IdMaps>) -> Self {
        self.ids = Some(ids);
        self
    }

    /// A table over the same universe (dimensions and ID maps) holding `entries`.
    pub fn with_entries(&self, entries: Vec<Rating>) -> Result<Self> {
        let mut t = Self::new(self.d1, self.d2, entries)?;
        t.ids = self.ids.clone();
        Ok(t)
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    pub fn ids(&self) -> Option<&Arc<IdMaps>> {
        self.ids.as_ref()
    }

    /// User `i`'s ratings, sorted by item.
    pub fn user_entries(&self, user: usize) -> &[Rating] {
        &self.entries[self.offsets[user]..self.offsets[user + 1]]
    }

    pub fn rating(&self, user: usize, item: u32) -> Option<f64> {
        let row = self.user_entries(user);
        row.binary_search_by_key(&item, |e| e.item)
            .ok()
            .map(|p| row[p].rating)
    }

    pub fn users_with_ratings(&self) -> usize {
        (0..self.d1)
            .filter(|&i| !self.user_entries(i).is_empty())
            .count()
    }
}

/// Parses a ratings stream, assigning dense indices in order of first
/// appearance. One line is held in memory at a time.
pub fn parse_ratings<R: BufRead>(reader: R, format: RatingFormat) -> Result<RatingsTable> {
    let mut ids = IdMaps::default();
    let entries = read_lines(reader, format, |user, item| {
        Ok((ids.users.intern(user), ids.items.intern(item)))
    })?;
    finish(entries, ids)
}

/// Parses a ratings stream against existing ID maps; unknown identifiers are
/// an error because they fall outside the trained universe.
pub fn parse_ratings_with_ids<R: BufRead>(
    reader: R,
    format: RatingFormat,
    ids: Arc<IdMaps>,
) -> Result<RatingsTable> {
    let entries = read_lines(reader, format, |user, item| {
        let u = ids
            .users
            .get(user)
            .ok_or_else(|| format!("user {user:?} is not in the user map"))?;
        let i = ids
            .items
            .get(item)
            .ok_or_else(|| format!("item {item:?} is not in the item map"))?;
        Ok((u, i))
    })?;
    let d1 = ids.users.len();
    let d2 = ids.items.len();
    let entries = entries.into_iter().map(|(_, r)| r).collect();
    Ok(RatingsTable::new(d1, d2, entries)?.with_ids(ids))
}

fn finish(entries: Vec<(usize, Rating)>, ids: IdMaps) -> Result<RatingsTable> {
    let (d1, d2) = (ids.users.len(), ids.items.len());
    let mut seen = std::collections::HashSet::with_capacity(entries.len());
    for (line, r) in &entries {
        if !seen.insert((r.user, r.item)) {
            return Err(Error::DuplicateRating {
                line: *line,
                user: ids.users.raw(r.user).unwrap_or_default().to_owned(),
                item: ids.items.raw(r.item).unwrap_or_default().to_owned(),
            });
        }
    }
    let entries = entries.into_iter().map(|(_, r)| r).collect();
    Ok(RatingsTable::new(d1, d2, entries)?.with_ids(Arc::new(ids)))
}

fn read_lines<R, F>(
    mut reader: R,
    format: RatingFormat,
    mut resolve: F,
) -> Result<Vec<(usize, Rating)>>
where
    R: BufRead,
    F: FnMut(&str, &str) -> std::result::Result<(u32, u32), String>,
{
    let sep = format.separator();
    let mut entries = Vec::new();
    let mut buf = String::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = buf.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split(sep).map(str::trim).collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(parse_err(format!(
                "expected 3 or 4 fields separated by {sep:?}, found {}",
                fields.len()
            )));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(parse_err("empty user or item identifier".into()));
        }
        let rating: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("rating {:?} is not a number", fields[2])))?;
        if !rating.is_finite() {
            return Err(parse_err(format!("rating {:?} is not finite", fields[2])));
        }
        let timestamp =
            match fields.get(3) {
                Some(ts) => Some(ts.parse::<u64>().map_err(|_| {
                    parse_err(format!("timestamp {ts:?} is not an unsigned integer"))
                })?),
                None => None,
            };
        let (user, item) = resolve(fields[0], fields[1]).map_err(parse_err)?;
        entries.push((
            line_no,
            Rating {
                user,
                item,
                rating,
                timestamp,
            },
        ));
    }
    if entries.is_empty() {
        return Err(Error::EmptyInput(
            "ratings stream contains no entries".into(),
        ));
    }
    Ok(entries)
}

/// Per-user generator: the same `(seed, user)` always yields the same
/// stream, independent of how users are scheduled across threads.
pub(crate) fn user_rng(seed: u64, user: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(user as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn minimal_tab_parse() {
        let t = parse_ratings(
            Cursor::new("1\t10\t5\n1\t11\t3\n"),
            RatingFormat::TabSeparated,
        )
        .unwrap();
        assert_eq!((t.d1(), t.d2(), t.len()), (1, 2, 2));
        assert_eq!(t.rating(0, 0), Some(5.0));
        assert_eq!(t.rating(0, 1), Some(3.0));
        let ids = t.ids().unwrap();
        assert_eq!(ids.items.raw(1), Some("11"));
    }

    #[test]
    fn double_colon_parse_keeps_timestamp() {
        let t = parse_ratings(
            Cursor::new("1::10::5::978300760\n"),
            RatingFormat::DoubleColonSeparated,
        )
        .unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.entries()[0].rating, 5.0);
        assert_eq!(t.entries()[0].timestamp, Some(978300760));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err =
            parse_ratings(Cursor::new("1\t2\t3\n1\t3\n"), RatingFormat::TabSeparated).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err =
            parse_ratings(Cursor::new("1\t2\tfive\n"), RatingFormat::TabSeparated).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicate_pair_is_rejected() {
        let err = parse_ratings(
            Cursor::new("1\t2\t3\n4\t2\t1\n1\t2\t5\n"),
            RatingFormat::TabSeparated,
        )
        .unwrap_err();
        match err {
            Error::DuplicateRating { line, user, item } => {
                assert_eq!(line, 3);
                assert_eq!((user.as_str(), item.as_str()), ("1", "2"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_stream_is_rejected() {
        assert!(matches!(
            parse_ratings(Cursor::new("\n\n"), RatingFormat::TabSeparated),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn parse_against_existing_ids() {
        let t = parse_ratings(
            Cursor::new("a\tx\t1\nb\ty\t2\n"),
            RatingFormat::TabSeparated,
        )
        .unwrap();
        let ids = t.ids().unwrap().clone();
        let test = parse_ratings_with_ids(
            Cursor::new("b\tx\t4\n"),
            RatingFormat::TabSeparated,
            ids.clone(),
        )
        .unwrap();
        assert_eq!(test.rating(1, 0), Some(4.0));
        let err = parse_ratings_with_ids(Cursor::new("c\tx\t4\n"), RatingFormat::TabSeparated, ids)
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn detect_format() {
        assert_eq!(
            RatingFormat::detect("1::2::3"),
            RatingFormat::DoubleColonSeparated
        );
        assert_eq!(RatingFormat::detect("1\t2\t3"), RatingFormat::TabSeparated);
    }
}
