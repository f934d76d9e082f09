use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imgprep::pairing::PairedSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split tag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub group_id: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn groups(&self, split: Split) -> BTreeSet<&str> {
        self.entries.iter().filter(|e| e.split == split).map(|e| e.group_id.as_str()).collect()
    }

    pub fn paths(&self, split: Split) -> impl Iterator<Item = &Path> {
        self.entries.iter().filter(move |e| e.split == split).map(|e| e.path.as_path())
    }

    pub fn count(&self, split: Split) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }

    /// Writes CSV with header `path,group_id,split`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["path", "group_id", "split"])?;
        for e in &self.entries {
            w.write_record([e.path.to_string_lossy().as_ref(), e.group_id.as_str(), &e.split.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["path", "group_id", "split"] {
            return Err(Error::Config(format!("{}: manifest header must be path,group_id,split", path.display())));
        }
        let mut entries = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            entries.push(ManifestEntry { path: PathBuf::from(&rec[0]), group_id: rec[1].to_owned(), split: rec[2].parse()? });
        }
        Ok(Self { entries })
    }
}

/// Holds out whole groups for testing.
///
/// Groups are visited in a seeded random order and moved to the test split
/// until the test count first reaches `test_fraction * total`. At least one
/// group always stays in training. Entries keep their input order.
pub fn split_by_group<'a, I>(items: I, test_fraction: f64, seed: u64) -> Result<DatasetManifest>
where
    I: IntoIterator<Item = (&'a Path, &'a str)>,
{
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction {test_fraction} must lie in (0, 1)")));
    }
    let items: Vec<(&Path, &str)> = items.into_iter().collect();
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for &(_, g) in &items {
        *sizes.entry(g).or_default() += 1;
    }
    if sizes.len() < 2 {
        return Err(Error::Config(format!(
            "need at least two distinct groups to hold one out, found {}",
            sizes.len()
        )));
    }

    let mut order: Vec<&str> = sizes.keys().copied().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let goal = test_fraction * items.len() as f64;
    let mut test_groups = BTreeSet::new();
    let mut test_count = 0usize;
    for g in &order[..order.len() - 1] {
        if test_count as f64 >= goal {
            break;
        }
        test_groups.insert(*g);
        test_count += sizes[g];
    }

    let entries = items
        .iter()
        .map(|&(p, g)| ManifestEntry {
            path: p.to_owned(),
            group_id: g.to_owned(),
            split: if test_groups.contains(g) { Split::Test } else { Split::Train },
        })
        .collect();
    Ok(DatasetManifest { entries })
}

/// [`split_by_group`] over in-memory samples, keyed by their paths.
pub fn split_samples(samples: &[PairedSample], test_fraction: f64, seed: u64) -> Result<DatasetManifest> {
    split_by_group(samples.iter().map(|s| (s.path.as_path(), s.group_id.as_str())), test_fraction, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn items(groups: &[(&str, usize)]) -> Vec<(PathBuf, String)> {
        let mut out = Vec::new();
        for (g, n) in groups {
            for i in 0..*n {
                out.push((PathBuf::from(format!("{g}_{i:04}.png")), g.to_string()));
            }
        }
        out
    }

    fn split(v: &[(PathBuf, String)], f: f64, seed: u64) -> Result<DatasetManifest> {
        split_by_group(v.iter().map(|(p, g)| (p.as_path(), g.as_str())), f, seed)
    }

    #[test]
    fn holdout_of_ninety_from_equal_groups() {
        // 2880 images in 192 groups of 15; holding out 6 groups gives 90 images.
        let names: Vec<String> = (0..192).map(|i| format!("obj{i:03}")).collect();
        let groups: Vec<(&str, usize)> = names.iter().map(|n| (n.as_str(), 15)).collect();
        let v = items(&groups);
        let m = split(&v, 90.0 / 2880.0, 7).unwrap();
        assert_eq!(m.count(Split::Test), 90);
        assert_eq!(m.count(Split::Train), 2790);
        assert!(m.groups(Split::Train).is_disjoint(&m.groups(Split::Test)));
    }

    #[test]
    fn two_groups_split_evenly() {
        let v = items(&[("a", 4), ("b", 4)]);
        let m = split(&v, 0.5, 1).unwrap();
        assert_eq!(m.groups(Split::Test).len(), 1);
        assert_eq!(m.groups(Split::Train).len(), 1);
    }

    #[test]
    fn never_empties_training() {
        let v = items(&[("a", 1), ("b", 9)]);
        for seed in 0..20 {
            let m = split(&v, 0.99, seed).unwrap();
            assert_eq!(m.groups(Split::Train).len(), 1);
        }
    }

    #[test]
    fn errors() {
        assert!(split(&items(&[("a", 5)]), 0.5, 0).is_err());
        assert!(split(&items(&[("a", 5), ("b", 1)]), 1.0, 0).is_err());
        assert!(split(&items(&[("a", 5), ("b", 1)]), 0.0, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let v = items(&[("a", 3), ("b", 2), ("c", 4)]);
        let m = split(&v, 0.3, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.csv");
        m.write_csv(&p).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("path,group_id,split\n"));
        assert_eq!(DatasetManifest::read_csv(&p).unwrap(), m);
    }

    proptest! {
        #[test]
        fn groups_never_straddle_splits(sizes in proptest::collection::vec(1usize..20, 2..12), f in 0.05f64..0.95, seed in any::<u64>()) {
            let names: Vec<String> = (0..sizes.len()).map(|i| format!("g{i}")).collect();
            let groups: Vec<(&str, usize)> = names.iter().map(String::as_str).zip(sizes.iter().copied()).collect();
            let v = items(&groups);
            let m = split(&v, f, seed).unwrap();
            prop_assert!(m.groups(Split::Train).is_disjoint(&m.groups(Split::Test)));
            prop_assert!(m.count(Split::Train) > 0 && m.count(Split::Test) > 0);
            prop_assert_eq!(&m, &split(&v, f, seed).unwrap());
        }
    }
}
