use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    /// Held-out true-speaker utterances for verification thresholds.
    Calib,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Calib => "calib",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "calib" => Ok(Split::Calib),
            other => Err(format!("unknown split '{other}' (train|test|calib)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub speaker: String,
    pub split: Split,
    /// Path as written in the manifest, relative to its directory.
    pub rel_path: PathBuf,
    pub path: PathBuf,
}

/// Explicit per-speaker train/test(/calib) partition of audio files.
///
/// Text format, one utterance per line, `#` starts a comment:
///
/// ```text
/// # speaker  split  path
/// spk01      train  spk01/utt01.wav
/// spk01      test   spk01/utt09.wav
/// ```
///
/// Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<Utterance>,
}

impl DatasetManifest {
    pub fn from_entries(
        root: impl Into<PathBuf>,
        entries: impl IntoIterator<Item = (String, Split, PathBuf)>,
    ) -> Result<Self> {
        let root = root.into();
        let entries = entries
            .into_iter()
            .map(|(speaker, split, rel_path)| Utterance {
                path: root.join(&rel_path),
                speaker,
                split,
                rel_path,
            })
            .collect();
        let m = Self { root, entries };
        m.check_structure(&m.root.join("<memory>"))?;
        Ok(m)
    }

    /// Assigns each speaker's files, in order, to `n_train` train then
    /// `n_test` test utterances; extra files are ignored.
    pub fn with_split(
        root: impl Into<PathBuf>,
        speakers: &[(String, Vec<PathBuf>)],
        n_train: usize,
        n_test: usize,
    ) -> Result<Self> {
        let mut entries = Vec::new();
        for (id, files) in speakers {
            if files.len() < n_train + n_test {
                return Err(Error::InsufficientData(format!(
                    "speaker {id} has {} files, needs {}",
                    files.len(),
                    n_train + n_test
                )));
            }
            for (i, f) in files.iter().take(n_train + n_test).enumerate() {
                let split = if i < n_train { Split::Train } else { Split::Test };
                entries.push((id.clone(), split, f.clone()));
            }
        }
        Self::from_entries(root, entries)
    }

    pub fn parse(text: &str, root: impl Into<PathBuf>, origin: &Path) -> Result<Self> {
        let root = root.into();
        let err = |line: usize, message: String| Error::Manifest {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (speaker, split, path) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(s), Some(sp), Some(p), None) => (s, sp, p),
                _ => return Err(err(i + 1, "expected: speaker split path".into())),
            };
            let split: Split = split.parse().map_err(|m| err(i + 1, m))?;
            let rel_path = PathBuf::from(path);
            entries.push(Utterance {
                speaker: speaker.to_string(),
                split,
                path: root.join(&rel_path),
                rel_path,
            });
        }
        let m = Self { root, entries };
        m.check_structure(origin)?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, root, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# speaker\tsplit\tpath\n");
        for u in &self.entries {
            writeln!(out, "{}\t{}\t{}", u.speaker, u.split.as_str(), u.rel_path.display()).unwrap();
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    fn check_structure(&self, origin: &Path) -> Result<()> {
        let err = |message: String| Error::Manifest {
            path: origin.to_path_buf(),
            line: 0,
            message,
        };
        if self.entries.is_empty() {
            return Err(err("no utterances".into()));
        }
        let mut seen = HashSet::new();
        for u in &self.entries {
            if !seen.insert(&u.rel_path) {
                return Err(err(format!(
                    "{} listed more than once (train/test overlap?)",
                    u.rel_path.display()
                )));
            }
        }
        Ok(())
    }

    /// Requires every speaker to have at least `n_train` train and `n_test`
    /// test utterances.
    pub fn validate_split(&self, n_train: usize, n_test: usize) -> Result<()> {
        for (speaker, counts) in self.split_counts() {
            let train = counts.get(&Split::Train).copied().unwrap_or(0);
            let test = counts.get(&Split::Test).copied().unwrap_or(0);
            if train < n_train || test < n_test {
                return Err(Error::InsufficientData(format!(
                    "speaker {speaker}: {train} train / {test} test utterances, need {n_train} / {n_test}"
                )));
            }
        }
        Ok(())
    }

    fn split_counts(&self) -> BTreeMap<&str, BTreeMap<Split, usize>> {
        let mut counts: BTreeMap<&str, BTreeMap<Split, usize>> = BTreeMap::new();
        for u in &self.entries {
            *counts.entry(&u.speaker).or_default().entry(u.split).or_default() += 1;
        }
        counts
    }

    /// Speaker ids in lexicographic order.
    pub fn speakers(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|u| u.speaker.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn utterances<'a>(&'a self, speaker: &'a str, split: Split) -> impl Iterator<Item = &'a Utterance> + 'a {
        self.entries
            .iter()
            .filter(move |u| u.speaker == speaker && u.split == split)
    }

    pub fn by_split(&self, split: Split) -> impl Iterator<Item = &Utterance> + '_ {
        self.entries.iter().filter(move |u| u.split == split)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "# demo\nspk1 train a/1.wav\nspk1 test a/2.wav  # trailing\n\nspk2 train b/1.wav\nspk2 test b/2.wav\n";

    #[test]
    fn parses_and_round_trips() {
        let m = DatasetManifest::parse(TEXT, "/data", Path::new("m.txt")).unwrap();
        assert_eq!(m.speakers(), ["spk1", "spk2"]);
        assert_eq!(m.entries[1].path, PathBuf::from("/data/a/2.wav"));
        assert_eq!(m.utterances("spk2", Split::Train).count(), 1);
        m.validate_split(1, 1).unwrap();
        assert!(m.validate_split(8, 2).is_err());
        let again = DatasetManifest::parse(&m.to_text(), "/data", Path::new("m.txt")).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_overlap_and_garbage() {
        let dup = "s train x.wav\ns test x.wav\n";
        let e = DatasetManifest::parse(dup, "/", Path::new("m")).unwrap_err();
        assert!(e.to_string().contains("more than once"));
        assert!(DatasetManifest::parse("s dev x.wav", "/", Path::new("m")).is_err());
        assert!(DatasetManifest::parse("s train", "/", Path::new("m")).is_err());
        assert!(DatasetManifest::parse("# nothing\n", "/", Path::new("m")).is_err());
    }

    #[test]
    fn automatic_split() {
        let files: Vec<PathBuf> = (0..11).map(|i| PathBuf::from(format!("{i}.wav"))).collect();
        let m = DatasetManifest::with_split("/", &[("a".into(), files.clone())], 8, 2).unwrap();
        assert_eq!(m.utterances("a", Split::Train).count(), 8);
        assert_eq!(m.utterances("a", Split::Test).count(), 2);
        assert!(DatasetManifest::with_split("/", &[("a".into(), files[..9].to_vec())], 8, 2).is_err());
    }
}
