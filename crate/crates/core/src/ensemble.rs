//! Fixed-size ensembles of independently seeded machines.
//!
//! Members share every hyperparameter except the seed. Member `i` is seeded
//! with [`derive_member_seed`]`(base_seed, i)`. Raw member outputs are
//! averaged uniformly; classification decodes the averaged scores by argmax
//! (lowest class index on ties).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{standardize_apply, ScalerStats, TaskKind};
use crate::elm::{train_elm, ElmConfig, ElmModel};
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;

/// Ensemble size used when the caller does not choose one.
pub const DEFAULT_ENSEMBLE_SIZE: usize = 7;

/// Ordered class labels with one-hot encoding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCodec {
    classes: Vec<String>,
}

impl LabelCodec {
    pub fn new(classes: Vec<String>) -> Result<Self> {
        if classes.is_empty() {
            return Err(invalid("label codec needs at least one class"));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = classes.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(invalid(format!("duplicate class label '{dup}'")));
        }
        Ok(Self { classes })
    }

    /// Distinct labels in sorted order. Labels that all parse as numbers are
    /// ordered numerically, otherwise lexicographically.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut classes: Vec<String> = labels.iter().map(|l| l.as_ref().to_owned()).collect();
        classes.sort();
        classes.dedup();
        let numeric: Option<Vec<f64>> = classes.iter().map(|c| c.parse::<f64>().ok()).collect();
        if let Some(keys) = numeric {
            let mut paired: Vec<(f64, String)> = keys.into_iter().zip(classes).collect();
            paired.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            classes = paired.into_iter().map(|(_, c)| c).collect();
        }
        Self::new(classes)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn encode(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn decode(&self, index: usize) -> Option<&str> {
        self.classes.get(index).map(String::as_str)
    }

    /// Class indices for `labels`; unknown labels are an error.
    pub fn indices<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.encode(l.as_ref())
                    .ok_or_else(|| invalid(format!("unknown class label '{}'", l.as_ref())))
            })
            .collect()
    }

    /// `N × k` one-hot matrix.
    pub fn one_hot<S: AsRef<str>>(&self, labels: &[S]) -> Result<Matrix> {
        let k = self.len();
        let mut values = vec![0.0; labels.len() * k];
        for (r, c) in self.indices(labels)?.into_iter().enumerate() {
            values[r * k + c] = 1.0;
        }
        Matrix::from_row_major(labels.len(), k, values)
    }
}

/// SplitMix64 finalizer applied to `base_seed ^ index`.
///
/// The finalizer is a bijection on `u64`, so distinct indices under one base
/// seed always produce distinct member seeds.
pub fn derive_member_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = (base_seed ^ index).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains `ensemble_size` members in parallel; member `i` uses
/// `config.with_seed(derive_member_seed(base_seed, i))`.
pub fn train_ensemble(
    x: &Matrix,
    y: &Matrix,
    config: &ElmConfig,
    ensemble_size: usize,
    base_seed: u64,
) -> Result<Vec<ElmModel>> {
    if ensemble_size == 0 {
        return Err(invalid("ensemble_size must be >= 1"));
    }
    (0..ensemble_size)
        .into_par_iter()
        .map(|i| train_elm(x, y, &config.with_seed(derive_member_seed(base_seed, i as u64))))
        .collect()
}

/// Arithmetic mean of member predictions on already-standardized inputs.
pub fn average_scores(members: &[ElmModel], x: &Matrix) -> Result<Matrix> {
    let (first, rest) = members
        .split_first()
        .ok_or_else(|| invalid("ensemble has no members"))?;
    let mut sum = first.predict(x)?;
    for m in rest {
        let p = m.predict(x)?;
        sum = Matrix::from_inner(sum.into_inner() + p.into_inner());
    }
    Ok(sum.scale(1.0 / members.len() as f64))
}

/// A trained ensemble with its input scaler and (for classification) label codec.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    members: Vec<ElmModel>,
    scaler: ScalerStats,
    task: TaskKind,
    codec: Option<LabelCodec>,
    config: ElmConfig,
    base_seed: u64,
}

impl EnsembleModel {
    pub fn new(
        members: Vec<ElmModel>,
        scaler: ScalerStats,
        task: TaskKind,
        codec: Option<LabelCodec>,
        config: ElmConfig,
        base_seed: u64,
    ) -> Result<Self> {
        let first = members.first().ok_or_else(|| invalid("ensemble has no members"))?;
        let signature = |m: &ElmModel| (m.n_inputs(), m.n_outputs(), m.activation, m.neurons());
        if members.iter().any(|m| signature(m) != signature(first)) {
            return Err(invalid("ensemble members disagree on shape or activation"));
        }
        if first.n_inputs() != scaler.n_features() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} scaler features", first.n_inputs()),
                actual: format!("{} scaler features", scaler.n_features()),
            });
        }
        if first.neurons() != config.neurons || first.activation != config.activation {
            return Err(invalid("ensemble members do not match the recorded configuration"));
        }
        match (task, &codec) {
            (TaskKind::Classification, Some(c)) if c.len() == first.n_outputs() => {}
            (TaskKind::Classification, _) => {
                return Err(invalid("classification ensemble needs a codec matching its outputs"))
            }
            (TaskKind::Regression, None) if first.n_outputs() == 1 => {}
            (TaskKind::Regression, _) => {
                return Err(invalid("regression ensemble must have one output and no codec"))
            }
        }
        // The member seeds derive from `base_seed`; keep the recorded config
        // consistent with it.
        let config = ElmConfig { seed: base_seed, ..config };
        Ok(Self {
            members,
            scaler,
            task,
            codec,
            config,
            base_seed,
        })
    }

    pub fn members(&self) -> &[ElmModel] {
        &self.members
    }

    pub fn scaler(&self) -> &ScalerStats {
        &self.scaler
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn codec(&self) -> Option<&LabelCodec> {
        self.codec.as_ref()
    }

    pub fn config(&self) -> &ElmConfig {
        &self.config
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn n_features(&self) -> usize {
        self.scaler.n_features()
    }

    /// Standardizes `x_raw` with the stored statistics and averages member outputs.
    pub fn predict_scores(&self, x_raw: &Matrix) -> Result<Matrix> {
        let x = standardize_apply(x_raw, &self.scaler)?;
        average_scores(&self.members, &x)
    }

    pub fn predict_class_indices(&self, x_raw: &Matrix) -> Result<Vec<usize>> {
        if self.task != TaskKind::Classification {
            return Err(Error::InvalidState("label prediction on a regression model".into()));
        }
        Ok(self.predict_scores(x_raw)?.row_argmax())
    }

    pub fn predict_labels(&self, x_raw: &Matrix) -> Result<Vec<String>> {
        let codec = self.codec.as_ref().ok_or_else(|| {
            Error::InvalidState("label prediction on a regression model".into())
        })?;
        Ok(self
            .predict_class_indices(x_raw)?
            .into_iter()
            .map(|i| codec.decode(i).expect("argmax within codec range").to_owned())
            .collect())
    }

    pub fn predict_regression(&self, x_raw: &Matrix) -> Result<Vec<f64>> {
        if self.task != TaskKind::Regression {
            return Err(Error::InvalidState(
                "regression prediction on a classification model".into(),
            ));
        }
        Ok(self.predict_scores(x_raw)?.column_values(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::standardize_fit;
    use crate::elm::Activation;

    fn constant_member(n_inputs: usize, outputs: &[f64]) -> ElmModel {
        // one neuron with zero input weights and tanh(b) = 0.5, so output = 2 * beta * 0.5
        let beta = Matrix::from_row_major(1, outputs.len(), outputs.to_vec()).unwrap();
        ElmModel::from_parts(
            Matrix::zeros(n_inputs, 1),
            vec![0.5f64.atanh()],
            beta.scale(2.0),
            Activation::Tanh,
        )
        .unwrap()
    }

    fn config1() -> ElmConfig {
        ElmConfig {
            neurons: 1,
            ..ElmConfig::default()
        }
    }

    fn probe() -> Matrix {
        Matrix::from_rows(&[vec![0.3, -1.0], vec![2.0, 0.5], vec![-0.7, 0.0]]).unwrap()
    }

    fn classifier(members: Vec<ElmModel>, k: usize) -> EnsembleModel {
        let classes = (0..k).map(|i| format!("c{i}")).collect();
        EnsembleModel::new(
            members,
            standardize_fit(&probe()).unwrap(),
            TaskKind::Classification,
            Some(LabelCodec::new(classes).unwrap()),
            config1(),
            0,
        )
        .unwrap()
    }

    fn regressor(members: Vec<ElmModel>) -> EnsembleModel {
        EnsembleModel::new(
            members,
            standardize_fit(&probe()).unwrap(),
            TaskKind::Regression,
            None,
            config1(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn codec_round_trip_and_order() {
        let c = LabelCodec::from_labels(&["b", "a", "b"]).unwrap();
        assert_eq!(c.classes(), &["a".to_string(), "b".to_string()]);
        let c = LabelCodec::from_labels(&["10", "2", "1"]).unwrap();
        assert_eq!(c.classes(), &["1".to_string(), "2".to_string(), "10".to_string()]);
        for i in 0..c.len() {
            assert_eq!(c.encode(c.decode(i).unwrap()), Some(i));
        }
        assert!(LabelCodec::new(vec![]).is_err());
        assert!(LabelCodec::new(vec!["x".into(), "x".into()]).is_err());
        assert!(c.one_hot(&["3"]).is_err());
    }

    #[test]
    fn member_seeds() {
        assert_eq!(derive_member_seed(42, 3), derive_member_seed(42, 3));
        assert_ne!(derive_member_seed(42, 0), derive_member_seed(42, 1));
        let mut seeds: Vec<u64> = (0..1000).map(|i| derive_member_seed(42, i)).collect();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn member_seed_reference_values() {
        // SplitMix64 reference: the first output of a generator seeded with 0
        // is 0xE220A8397B1DCDAF; seeded with 1 it is 0x910A2DEC89025CC1.
        assert_eq!(derive_member_seed(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(derive_member_seed(0, 1), 0x910A_2DEC_8902_5CC1);
    }

    #[test]
    fn zero_members_rejected() {
        let x = probe();
        assert!(train_ensemble(&x, &Matrix::zeros(3, 1), &config1(), 0, 0).is_err());
        assert!(average_scores(&[], &x).is_err());
    }

    #[test]
    fn mean_of_two_members() {
        let m = classifier(
            vec![constant_member(2, &[1.0, 0.0]), constant_member(2, &[0.0, 1.0])],
            2,
        );
        let s = m.predict_scores(&probe()).unwrap();
        for r in 0..3 {
            assert!((s.get(r, 0) - 0.5).abs() < 1e-15);
            assert!((s.get(r, 1) - 0.5).abs() < 1e-15);
        }
        // ties go to the lowest index
        assert_eq!(m.predict_class_indices(&probe()).unwrap(), vec![0, 0, 0]);
        assert_eq!(m.predict_labels(&probe()).unwrap(), vec!["c0"; 3]);
    }

    #[test]
    fn member_order_does_not_matter() {
        let a = classifier(
            vec![constant_member(2, &[0.2, 0.9]), constant_member(2, &[0.7, 0.1])],
            2,
        );
        let b = classifier(
            vec![constant_member(2, &[0.7, 0.1]), constant_member(2, &[0.2, 0.9])],
            2,
        );
        assert_eq!(a.predict_scores(&probe()).unwrap(), b.predict_scores(&probe()).unwrap());
    }

    #[test]
    fn zero_weights_give_zero_scores() {
        let m = classifier(vec![constant_member(2, &[0.0, 0.0, 0.0])], 3);
        assert!(m.predict_scores(&probe()).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn argmax_decoding() {
        let m = classifier(vec![constant_member(2, &[0.2, 0.9, -0.1])], 3);
        assert_eq!(m.predict_class_indices(&probe()).unwrap(), vec![1, 1, 1]);
        let shifted = classifier(vec![constant_member(2, &[5.2, 5.9, 4.9])], 3);
        assert_eq!(shifted.predict_class_indices(&probe()).unwrap(), vec![1, 1, 1]);
    }

    #[test]
    fn regression_means() {
        let m = regressor(vec![constant_member(2, &[3.0]); 3]);
        for v in m.predict_regression(&probe()).unwrap() {
            assert!((v - 3.0).abs() < 1e-14);
        }
        let m = regressor(vec![constant_member(2, &[1.0]), constant_member(2, &[2.0])]);
        for v in m.predict_regression(&probe()).unwrap() {
            assert!((v - 1.5).abs() < 1e-15);
        }
        assert!(matches!(m.predict_labels(&probe()), Err(Error::InvalidState(_))));
        let c = classifier(vec![constant_member(2, &[1.0, 0.0])], 2);
        assert!(matches!(c.predict_regression(&probe()), Err(Error::InvalidState(_))));
    }

    #[test]
    fn single_member_matches_member() {
        let x = probe();
        let y = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![0.5]]).unwrap();
        let cfg = ElmConfig {
            neurons: 4,
            ..ElmConfig::default()
        };
        let members = train_ensemble(&x, &y, &cfg, 1, 9).unwrap();
        let direct = members[0].predict(&x).unwrap();
        assert_eq!(average_scores(&members, &x).unwrap(), direct);
    }

    #[test]
    fn identical_members_average_to_one() {
        let x = probe();
        let y = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![0.5]]).unwrap();
        let cfg = ElmConfig {
            neurons: 4,
            seed: 5,
            ..ElmConfig::default()
        };
        let one = train_elm(&x, &y, &cfg).unwrap();
        let members = vec![one.clone(), one.clone(), one.clone()];
        let avg = average_scores(&members, &x).unwrap();
        assert!(avg.max_abs_diff(&one.predict(&x).unwrap()) < 1e-15);
    }

    #[test]
    fn constructor_checks() {
        let scaler = standardize_fit(&probe()).unwrap();
        let codec = LabelCodec::new(vec!["a".into(), "b".into()]).unwrap();
        // wrong number of outputs for the codec
        assert!(EnsembleModel::new(
            vec![constant_member(2, &[1.0])],
            scaler.clone(),
            TaskKind::Classification,
            Some(codec),
            config1(),
            0
        )
        .is_err());
        // feature count mismatch with the scaler
        assert!(EnsembleModel::new(
            vec![constant_member(3, &[1.0])],
            scaler.clone(),
            TaskKind::Regression,
            None,
            config1(),
            0
        )
        .is_err());
        // mixed neuron counts
        let wide = train_elm(
            &probe(),
            &Matrix::zeros(3, 1),
            &ElmConfig {
                neurons: 2,
                ..ElmConfig::default()
            },
        )
        .unwrap();
        assert!(EnsembleModel::new(
            vec![constant_member(2, &[1.0]), wide],
            scaler,
            TaskKind::Regression,
            None,
            config1(),
            0
        )
        .is_err());
    }
}
