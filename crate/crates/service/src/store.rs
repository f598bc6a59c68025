//! Append-only JSONL logs, one file per session.

use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::session::LogEntry;

#[derive(Clone, Debug)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: &Path) -> io::Result<Store> {
        fs::create_dir_all(dir)?;
        Ok(Store { dir: dir.to_path_buf() })
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn append(&self, id: &str, entries: &[LogEntry]) -> io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.path(id))?;
        for e in entries {
            let line = serde_json::to_string(e).map_err(io::Error::other)?;
            writeln!(f, "{line}")?;
        }
        f.sync_data()
    }

    /// Every stored log, sorted by session id.
    pub fn load_all(&self) -> io::Result<Vec<Vec<LogEntry>>> {
        let mut paths: Vec<PathBuf> =
            fs::read_dir(&self.dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "jsonl")).collect();
        paths.sort();
        paths
            .iter()
            .map(|p| {
                BufReader::new(fs::File::open(p)?)
                    .lines()
                    .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
                    .map(|l| serde_json::from_str(&l?).map_err(io::Error::other))
                    .collect()
            })
            .collect()
    }
}
