//! Generated datasets for offline checks and the bundled benchmark suite.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{Dataset, Targets};
use crate::error::{io_err, Error, Result};
use crate::linalg::Matrix;

/// Two isotropic 2-D Gaussians with centers ±(2, 2) and σ = 0.5. Rows
/// alternate between class "pos" and class "neg".
pub fn two_gaussians(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).expect("valid sigma");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (c, label) = if i % 2 == 0 { (2.0, "pos") } else { (-2.0, "neg") };
        rows.push(vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)]);
        labels.push(label.to_owned());
    }
    Dataset::new(Matrix::from_rows(&rows).expect("finite"), Targets::Labels(labels)).expect("aligned")
}

/// Three 2-D Gaussian classes with unequal sizes (roughly 60/30/10 %),
/// centered on a circle of radius 2.5 with σ = 0.8, so the classes overlap
/// and the smallest one is hardest.
pub fn imbalanced_blobs(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.8).expect("valid sigma");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = match i % 10 {
            0..=5 => 0,
            6..=8 => 1,
            _ => 2,
        };
        let angle = 2.0 * PI * class as f64 / 3.0;
        rows.push(vec![
            2.5 * angle.cos() + noise.sample(&mut rng),
            2.5 * angle.sin() + noise.sample(&mut rng),
        ]);
        labels.push(["a", "b", "c"][class].to_owned());
    }
    Dataset::new(Matrix::from_rows(&rows).expect("finite"), Targets::Labels(labels)).expect("aligned")
}

/// `y = sin(x)` with `x` uniform on `[−π, π]`, no noise.
pub fn sine(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..=PI)).collect();
    let ys = xs.iter().map(|x| x.sin()).collect();
    Dataset::new(Matrix::column(&xs).expect("finite"), Targets::Values(ys)).expect("aligned")
}

/// Features and targets drawn i.i.d. from the standard normal, independently.
pub fn pure_noise(n: usize, n_features: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n * n_features).map(|_| StandardNormal.sample(&mut rng)).collect();
    let ys = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    Dataset::new(
        Matrix::from_row_major(n, n_features, values).expect("finite"),
        Targets::Values(ys),
    )
    .expect("aligned")
}

/// Writes `x1..xd,y` columns with a header row.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut header: Vec<String> = (1..=data.features.cols()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    let fmt_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    w.write_record(&header).map_err(fmt_err)?;
    for r in 0..data.n_rows() {
        let mut record: Vec<String> = data.features.row(r).iter().map(|v| format!("{v:?}")).collect();
        record.push(match &data.targets {
            Targets::Labels(v) => v[r].clone(),
            Targets::Values(v) => format!("{:?}", v[r]),
        });
        w.write_record(&record).map_err(fmt_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Schema document matching [`write_csv`] output.
pub fn schema_json(n_features: usize) -> String {
    let mut cols: Vec<String> = (1..=n_features)
        .map(|i| format!("    {{ \"name\": \"x{i}\", \"kind\": \"numeric\" }}"))
        .collect();
    cols.push("    { \"name\": \"y\", \"kind\": \"target\" }".into());
    format!("{{\n  \"columns\": [\n{}\n  ]\n}}\n", cols.join(",\n"))
}
