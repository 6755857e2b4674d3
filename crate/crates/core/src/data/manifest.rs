use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{load_pnm, DataError, PreprocessConfig, Sample, Task};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub task: Task,
    #[serde(rename = "class")]
    pub class_name: String,
}

impl ManifestEntry {
    pub fn label(&self) -> usize {
        self.task.label_of(&self.class_name).expect("validated on construction")
    }
}

/// Dataset listing: CSV with header `path,task,class`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    counts: BTreeMap<String, usize>,
    /// Directory that relative paths are resolved against.
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Result<Self, DataError> {
        let mut counts = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.task.label_of(&e.class_name).is_none() {
                return Err(DataError::Manifest(format!(
                    "row {}: class {:?} is not a {} class (expected one of {:?})",
                    i + 1,
                    e.class_name,
                    e.task,
                    e.task.classes()
                )));
            }
            *counts.entry(e.class_name.clone()).or_insert(0) += 1;
        }
        Ok(Self {
            entries,
            counts,
            base_dir: base_dir.into(),
        })
    }

    pub fn parse(csv_text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(csv_text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["path", "task", "class"] {
            return Err(DataError::Manifest(format!(
                "expected header path,task,class, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record?;
            entries.push(ManifestEntry {
                path: record[0].to_owned(),
                task: record[1].parse()?,
                class_name: record[2].to_owned(),
            });
        }
        Self::new(entries, base_dir)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn to_csv(&self) -> Result<String, DataError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["path", "task", "class"])?;
        for e in &self.entries {
            w.write_record([e.path.as_str(), e.task.as_str(), e.class_name.as_str()])?;
        }
        let bytes = w.into_inner().map_err(|e| DataError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn counts(&self) -> &BTreeMap<String, usize> {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }

    /// The single task shared by every entry.
    pub fn task(&self) -> Result<Task, DataError> {
        let first = self
            .entries
            .first()
            .ok_or_else(|| DataError::Input("empty manifest".into()))?
            .task;
        if self.entries.iter().any(|e| e.task != first) {
            return Err(DataError::Manifest("manifest mixes detection and classification rows".into()));
        }
        Ok(first)
    }

    /// Decodes and resizes every entry (values stay in `[0, 1]`).
    pub fn load_samples(&self, entries: &[ManifestEntry]) -> Result<Vec<Sample>, DataError> {
        let cfg = PreprocessConfig::default();
        entries
            .iter()
            .map(|e| {
                let path = self.resolve(e);
                let bytes = std::fs::read(&path)
                    .map_err(|err| DataError::Input(format!("cannot read {}: {err}", path.display())))?;
                let image = load_pnm(&bytes)?;
                let sized = if image.height == cfg.target_size && image.width == cfg.target_size {
                    image
                } else {
                    super::resize_bilinear(&image, cfg.target_size, cfg.target_size)?
                };
                Sample::new(sized, e.label(), e.path.clone(), e.task)
            })
            .collect()
    }
}

/// Per-class seeded shuffle, then the first `floor(0.9·n)` of each class go
/// to train and the rest to test. Classes are visited in sorted key order.
pub fn stratified_split<T: Clone, K: Ord>(items: &[T], class_of: impl Fn(&T) -> K, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut groups: BTreeMap<K, Vec<&T>> = BTreeMap::new();
    for item in items {
        groups.entry(class_of(item)).or_default().push(item);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut group) in groups {
        group.shuffle(&mut rng);
        let cut = group.len() * 9 / 10;
        train.extend(group[..cut].iter().map(|&t| t.clone()));
        test.extend(group[cut..].iter().map(|&t| t.clone()));
    }
    (train, test)
}

pub fn split_train_test(manifest: &DatasetManifest, seed: u64) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>), DataError> {
    if manifest.is_empty() {
        return Err(DataError::Input("cannot split an empty manifest".into()));
    }
    Ok(stratified_split(
        manifest.entries(),
        |e| (e.task, e.class_name.clone()),
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn manifest(per_class: &[(&str, usize)]) -> DatasetManifest {
        let mut entries = Vec::new();
        for (class, n) in per_class {
            for i in 0..*n {
                entries.push(ManifestEntry {
                    path: format!("{class}/{i}.pgm"),
                    task: Task::Classification,
                    class_name: (*class).into(),
                });
            }
        }
        DatasetManifest::new(entries, ".").unwrap()
    }

    #[test]
    fn parse_and_counts() {
        let text = "path,task,class\na.pgm,detection,Yes\nb.pgm,detection,No\nc.pgm,detection,Yes\n";
        let m = DatasetManifest::parse(text, "/data").unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.counts()["Yes"], 2);
        assert_eq!(m.counts()["No"], 1);
        assert_eq!(m.task().unwrap(), Task::Detection);
        assert_eq!(m.resolve(&m.entries()[0]), PathBuf::from("/data/a.pgm"));
        assert_eq!(m.to_csv().unwrap(), text);
    }

    #[test]
    fn bad_header_and_class_are_rejected() {
        assert!(DatasetManifest::parse("file,task,class\n", ".").is_err());
        assert!(DatasetManifest::parse("path,task,class\na,detection,Glioma Tumor\n", ".").is_err());
        assert!(DatasetManifest::parse("path,task,class\na,segmentation,Yes\n", ".").is_err());
    }

    #[test]
    fn ten_per_class_splits_nine_one() {
        let m = manifest(&[("Glioma Tumor", 10), ("Meningioma Tumor", 10), ("Pituitary Tumor", 10)]);
        let (train, test) = split_train_test(&m, 1).unwrap();
        assert_eq!((train.len(), test.len()), (27, 3));
        for class in ["Glioma Tumor", "Meningioma Tumor", "Pituitary Tumor"] {
            assert_eq!(test.iter().filter(|e| e.class_name == class).count(), 1);
        }
    }

    #[test]
    fn full_dataset_total_under_floor_rule() {
        let m = manifest(&[("Glioma Tumor", 31_354)]);
        let (train, test) = split_train_test(&m, 0).unwrap();
        assert_eq!((train.len(), test.len()), (28_218, 3_136));
    }

    #[test]
    fn split_is_seed_deterministic() {
        let m = manifest(&[("Glioma Tumor", 17), ("Pituitary Tumor", 5)]);
        assert_eq!(split_train_test(&m, 3).unwrap(), split_train_test(&m, 3).unwrap());
        assert_ne!(split_train_test(&m, 3).unwrap(), split_train_test(&m, 4).unwrap());
    }

    #[test]
    fn empty_manifest_is_an_input_error() {
        let m = DatasetManifest::new(vec![], ".").unwrap();
        assert!(matches!(split_train_test(&m, 0), Err(DataError::Input(_))));
    }

    proptest! {
        #[test]
        fn split_is_a_stratified_partition(a in 0usize..40, b in 0usize..40, c in 1usize..40, seed in any::<u64>()) {
            let m = manifest(&[("Glioma Tumor", a), ("Meningioma Tumor", b), ("Pituitary Tumor", c)]);
            let (train, test) = split_train_test(&m, seed).unwrap();
            let tr: HashSet<_> = train.iter().map(|e| e.path.clone()).collect();
            let te: HashSet<_> = test.iter().map(|e| e.path.clone()).collect();
            prop_assert!(tr.is_disjoint(&te));
            prop_assert_eq!(tr.len() + te.len(), m.len());
            for (class, n) in [("Glioma Tumor", a), ("Meningioma Tumor", b), ("Pituitary Tumor", c)] {
                let k = train.iter().filter(|e| e.class_name == class).count();
                prop_assert_eq!(k, n * 9 / 10);
                if n >= 2 {
                    prop_assert!((k as f64 - 0.9 * n as f64).abs() <= 1.0);
                }
            }
        }
    }
}
