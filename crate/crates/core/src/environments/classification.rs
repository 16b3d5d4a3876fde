use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::BanditEnv;
use crate::linalg::argmax;
use crate::reward_models::{forward_all_actions, init_params, HeadMode, MlpArchitecture};
use crate::{derive_seed, Error, Result};

/// Feature rows with integer class labels in `0..num_actions`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_actions: usize,
}

impl TabularDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<i64>, num_actions: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::shape("feature and label counts differ"));
        }
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let width = features[0].len();
        if width == 0 || features.iter().any(|r| r.len() != width) {
            return Err(Error::shape("feature rows must share a positive width"));
        }
        let mut out = Vec::with_capacity(labels.len());
        for (row, &label) in labels.iter().enumerate() {
            if label < 0 || label as usize >= num_actions {
                return Err(Error::LabelOutOfRange { row, label, num_actions });
            }
            out.push(label as usize);
        }
        Ok(Self {
            features,
            labels: out,
            num_actions,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.features[0].len()
    }
}

/// Read a CSV with a header row, numeric feature columns and a final
/// integer `label` column. Without `num_actions` the class count is the
/// largest label plus one.
pub fn read_csv_dataset(path: &Path, num_actions: Option<usize>) -> Result<TabularDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let ncol = headers.len();
    if ncol < 2 {
        return Err(Error::Schema {
            column: "label".into(),
            message: "need at least one feature column and a final `label` column".into(),
        });
    }
    if headers.get(ncol - 1).map(str::trim) != Some("label") {
        return Err(Error::Schema {
            column: headers.get(ncol - 1).unwrap_or("").to_string(),
            message: "final column must be named `label`".into(),
        });
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if rec.len() != ncol {
            return Err(Error::Parse {
                line,
                message: format!("expected {ncol} fields, found {}", rec.len()),
            });
        }
        let mut row = Vec::with_capacity(ncol - 1);
        for (c, field) in rec.iter().take(ncol - 1).enumerate() {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| Error::Schema {
                column: headers[c].to_string(),
                message: format!("line {line}: `{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Schema {
                    column: headers[c].to_string(),
                    message: format!("line {line}: missing or non-finite value"),
                });
            }
            row.push(v);
        }
        let raw = rec[ncol - 1].trim();
        let label: i64 = raw.parse().map_err(|_| Error::Schema {
            column: "label".into(),
            message: format!("line {line}: `{raw}` is not an integer"),
        })?;
        features.push(row);
        labels.push(label);
    }
    let n_act = match num_actions {
        Some(n) => n,
        None => labels.iter().copied().max().map(|m| (m.max(0) + 1) as usize).unwrap_or(0),
    };
    TabularDataset::new(features, labels, n_act)
}

/// Gaussian states labelled by a random ReLU teacher network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherConfig {
    pub num_samples: usize,
    pub state_dim: usize,
    pub num_actions: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            num_samples: 5000,
            state_dim: 9,
            num_actions: 7,
            hidden: vec![50],
            seed: 0,
        }
    }
}

/// Teacher logits are standardised per class over the sample before the
/// argmax, which keeps the classes roughly balanced.
pub fn synthetic_classification_dataset(cfg: &TeacherConfig) -> Result<TabularDataset> {
    if cfg.num_samples == 0 {
        return Err(Error::EmptyDataset);
    }
    let arch = MlpArchitecture::new(cfg.state_dim, cfg.hidden.clone(), cfg.num_actions, HeadMode::MultiHead)?;
    let theta = init_params(&arch, derive_seed(cfg.seed, 1));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2));
    let features: Vec<Vec<f64>> = (0..cfg.num_samples)
        .map(|_| (0..cfg.state_dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let logits: Vec<Vec<f64>> = features
        .iter()
        .map(|s| forward_all_actions(&arch, &theta, s))
        .collect::<Result<_>>()?;
    let n = cfg.num_samples as f64;
    let k = cfg.num_actions;
    let mut mean = vec![0.0; k];
    let mut sq = vec![0.0; k];
    for row in &logits {
        for a in 0..k {
            mean[a] += row[a] / n;
            sq[a] += row[a] * row[a] / n;
        }
    }
    let std: Vec<f64> = (0..k).map(|a| (sq[a] - mean[a] * mean[a]).max(1e-24).sqrt()).collect();
    let labels = logits
        .iter()
        .map(|row| {
            let z: Vec<f64> = (0..k).map(|a| (row[a] - mean[a]) / std[a]).collect();
            argmax(&z) as i64
        })
        .collect();
    TabularDataset::new(features, labels, k)
}

/// Classification as a bandit: reward 1 for the true label, 0 otherwise.
#[derive(Debug, Clone)]
pub struct ClassificationEnv {
    data: Arc<TabularDataset>,
    order: Vec<usize>,
}

impl ClassificationEnv {
    pub fn label(&self, t: usize) -> usize {
        self.data.labels[self.order[t]]
    }

    pub fn dataset(&self) -> &TabularDataset {
        &self.data
    }
}

/// Rows are served in file order, or in a permutation drawn from
/// `shuffle_seed`.
pub fn classification_env(data: Arc<TabularDataset>, shuffle_seed: Option<u64>) -> ClassificationEnv {
    let mut order: Vec<usize> = (0..data.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    ClassificationEnv { data, order }
}

impl BanditEnv for ClassificationEnv {
    fn name(&self) -> &str {
        "classification"
    }

    fn num_actions(&self) -> usize {
        self.data.num_actions
    }

    fn state_dim(&self) -> usize {
        self.data.state_dim()
    }

    fn horizon(&self) -> usize {
        self.order.len()
    }

    fn state(&self, t: usize) -> &[f64] {
        &self.data.features[self.order[t]]
    }

    fn reward(&self, t: usize, action: usize) -> f64 {
        if action == self.label(t) {
            1.0
        } else {
            0.0
        }
    }

    fn expected_rewards(&self, t: usize) -> Option<Vec<f64>> {
        let label = self.label(t);
        Some((0..self.num_actions()).map(|a| if a == label { 1.0 } else { 0.0 }).collect())
    }

    fn optimal_reward(&self, _t: usize) -> Option<f64> {
        Some(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_toy_csv() {
        let f = write_tmp("x1,x2,label\n0.5,1,0\n-1,2,2\n3,4.5,1\n");
        let d = read_csv_dataset(f.path(), None).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.state_dim(), 2);
        assert_eq!(d.num_actions, 3);
        assert_eq!(d.labels, vec![0, 2, 1]);
        assert_eq!(d.features[2], vec![3.0, 4.5]);
    }

    #[test]
    fn csv_errors_name_the_problem() {
        let f = write_tmp("x1,x2,y\n1,2,0\n");
        match read_csv_dataset(f.path(), None) {
            Err(Error::Schema { column, .. }) => assert_eq!(column, "y"),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("x1,x2,label\n1,2,0\n1,,0\n");
        match read_csv_dataset(f.path(), None) {
            Err(Error::Schema { column, message }) => {
                assert_eq!(column, "x2");
                assert!(message.contains("line 3"));
            }
            other => panic!("{other:?}"),
        }
        let f = write_tmp("x1,label\n1,0\n1,5\n");
        assert!(matches!(
            read_csv_dataset(f.path(), Some(3)),
            Err(Error::LabelOutOfRange { row: 1, label: 5, .. })
        ));
        let f = write_tmp("x1,label\n1,-1\n");
        assert!(matches!(read_csv_dataset(f.path(), Some(3)), Err(Error::LabelOutOfRange { .. })));
    }

    #[test]
    fn oracle_gets_every_step_and_shuffle_is_seeded() {
        let data = Arc::new(
            synthetic_classification_dataset(&TeacherConfig {
                num_samples: 300,
                ..Default::default()
            })
            .unwrap(),
        );
        let env = classification_env(data.clone(), Some(5));
        let total: f64 = (0..env.horizon()).map(|t| env.reward(t, env.label(t))).sum();
        assert_eq!(total, 300.0);
        let again = classification_env(data.clone(), Some(5));
        let other = classification_env(data, Some(6));
        assert!((0..300).all(|t| env.state(t) == again.state(t)));
        assert!((0..300).any(|t| env.state(t) != other.state(t)));
    }

    #[test]
    fn uniform_policy_on_balanced_classes() {
        let k = 7;
        let n = 10_000;
        let features = (0..n).map(|i| vec![i as f64]).collect();
        let labels = (0..n).map(|i| (i % k) as i64).collect();
        let data = Arc::new(TabularDataset::new(features, labels, k).unwrap());
        let env = classification_env(data, Some(1));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mean = (0..n).map(|t| env.reward(t, rng.random_range(0..k))).sum::<f64>() / n as f64;
        assert!((mean - 1.0 / 7.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn teacher_classes_are_all_present() {
        let d = synthetic_classification_dataset(&TeacherConfig::default()).unwrap();
        let mut counts = vec![0usize; 7];
        for &l in &d.labels {
            counts[l] += 1;
        }
        assert!(counts.iter().all(|&c| c > 200), "{counts:?}");
    }
}
