//! File plumbing shared by the subcommands.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use prefcomp::format::{read_comparisons, read_factors, read_id_map, write_id_map};
use prefcomp::ingest::{IdMaps, RatingsTable};
use prefcomp::{ComparisonSet, FactorPair};
use serde::Serialize;

pub const COMPARISONS: &str = "comparisons.prcmp";
pub const FACTORS: &str = "factors.prfac";
pub const USER_IDS: &str = "users.ids";
pub const ITEM_IDS: &str = "items.ids";
pub const TRAIN_RATINGS: &str = "train.ratings.tsv";
pub const TEST_RATINGS: &str = "test.ratings.tsv";

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// `path` itself, or `path/default_name` when `path` is a directory.
pub fn in_dir_or_file(path: &Path, default_name: &str) -> PathBuf {
    if path.is_dir() {
        path.join(default_name)
    } else {
        path.to_path_buf()
    }
}

pub fn load_comparisons(path: &Path) -> Result<ComparisonSet> {
    let path = in_dir_or_file(path, COMPARISONS);
    read_comparisons(open(&path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn load_factors(path: &Path) -> Result<FactorPair> {
    let path = in_dir_or_file(path, FACTORS);
    read_factors(open(&path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn write_ids(dir: &Path, ids: &IdMaps) -> Result<()> {
    for (name, map) in [(USER_IDS, &ids.users), (ITEM_IDS, &ids.items)] {
        let path = dir.join(name);
        let mut w = create(&path)?;
        write_id_map(&mut w, map).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn load_ids(dir: &Path) -> Result<Arc<IdMaps>> {
    let read = |name: &str| {
        let path = dir.join(name);
        read_id_map(open(&path)?).with_context(|| format!("reading {}", path.display()))
    };
    Ok(Arc::new(IdMaps {
        users: read(USER_IDS)?,
        items: read(ITEM_IDS)?,
    }))
}

/// Tab-separated ratings with the raw identifiers, so the file parses back
/// onto the same indices through the ID maps.
pub fn write_ratings(path: &Path, table: &RatingsTable, ids: &IdMaps) -> Result<()> {
    let mut w = create(path)?;
    for e in table.entries() {
        let user = ids.users.raw(e.user).context("user index without an id")?;
        let item = ids.items.raw(e.item).context("item index without an id")?;
        match e.timestamp {
            Some(ts) => writeln!(w, "{user}\t{item}\t{}\t{ts}", e.rating)?,
            None => writeln!(w, "{user}\t{item}\t{}", e.rating)?,
        }
    }
    w.flush()?;
    Ok(())
}
