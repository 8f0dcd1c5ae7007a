//! Uniform linear array signals and beamformed targets.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dvm::{build_bluestein_chain, build_scaled_dvm_dense, fast_dvm_apply, DvmSpec};
use crate::error::{config, Error, Result};
use crate::net::{real_join, real_split};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const DEFAULT_F_MAX_HZ: f64 = 32e9;
/// Largest tolerated `|target - Ã·input|` component when a file is loaded.
pub const LOAD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n: usize,
    pub spacing_m: f64,
    pub f_max_hz: f64,
    pub tau_s: f64,
}

impl ArrayGeometry {
    /// Half-wavelength spacing at `f_max_hz` and `τ = 1/(f_max·N)`.
    pub fn new(n: usize, f_max_hz: f64) -> Result<Self> {
        if n == 0 {
            return config("array needs at least one element");
        }
        if !(f_max_hz > 0.0) {
            return config(format!("f_max must be positive, got {f_max_hz}"));
        }
        Ok(Self {
            n,
            spacing_m: SPEED_OF_LIGHT / (2.0 * f_max_hz),
            f_max_hz,
            tau_s: 1.0 / (f_max_hz * n as f64),
        })
    }

    pub fn with_spacing(mut self, spacing_m: f64) -> Result<Self> {
        if !(spacing_m > 0.0) {
            return config(format!("antenna spacing must be positive, got {spacing_m}"));
        }
        self.spacing_m = spacing_m;
        Ok(self)
    }

    pub fn with_tau(mut self, tau_s: f64) -> Result<Self> {
        if !(tau_s > 0.0) {
            return config(format!("tau must be positive, got {tau_s}"));
        }
        self.tau_s = tau_s;
        Ok(self)
    }

    /// Node value `α = e^{-2πj·f·τ}` of the beamforming DVM at `freq_hz`.
    pub fn dvm(&self, freq_hz: f64) -> Result<DvmSpec> {
        DvmSpec::from_delay(self.n, freq_hz, self.tau_s)
    }
}

/// Delay at element `k` (1-based) for a plane wave from `angle_deg`.
pub fn steering_delay(k: usize, geometry: &ArrayGeometry, angle_deg: f64) -> Result<f64> {
    if k < 1 || k > geometry.n {
        return config(format!("element index {k} out of range 1..={}", geometry.n));
    }
    Ok((k - 1) as f64 * geometry.spacing_m * angle_deg.to_radians().sin() / SPEED_OF_LIGHT)
}

/// How `noise_std` is spread over the real and imaginary parts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConvention {
    /// Each component gets `noise_std/√2`; the complex noise has std `noise_std`.
    #[default]
    ComplexTotal,
    /// Each component gets `noise_std`.
    PerComponent,
}

impl NoiseConvention {
    fn component_std(self, noise_std: f64) -> f64 {
        match self {
            Self::ComplexTotal => noise_std / std::f64::consts::SQRT_2,
            Self::PerComponent => noise_std,
        }
    }
}

/// Received samples `u_k = e^{-2πj f (t - Δt_k)} + n_k`.
pub fn synth_received<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    freq_hz: f64,
    angle_deg: f64,
    t: f64,
    noise_std: f64,
    convention: NoiseConvention,
    rng: &mut R,
) -> Vec<Complex64> {
    let sigma = convention.component_std(noise_std);
    let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite std"));
    (1..=geometry.n)
        .map(|k| {
            let dt = steering_delay(k, geometry, angle_deg).expect("k in range");
            let arg = -2.0 * std::f64::consts::PI * freq_hz * (t - dt);
            let mut u = Complex64::from_polar(1.0, arg);
            if let Some(d) = &normal {
                u += Complex64::new(d.sample(rng), d.sample(rng));
            }
            u
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub angle_deg: f64,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub freq_hz: f64,
    pub tau_s: f64,
    pub angles_deg: Vec<f64>,
    pub noise_std: f64,
    pub noise_convention: NoiseConvention,
    pub seed: u64,
    pub samples: Vec<Sample>,
}

/// Everything besides the samples, as stored in the CSV sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub freq_hz: f64,
    pub tau_s: f64,
    pub angles_deg: Vec<f64>,
    pub noise_std: f64,
    pub noise_convention: NoiseConvention,
    pub seed: u64,
    pub samples: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dvm(&self) -> Result<DvmSpec> {
        DvmSpec::from_delay(self.n, self.freq_hz, self.tau_s)
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            n: self.n,
            freq_hz: self.freq_hz,
            tau_s: self.tau_s,
            angles_deg: self.angles_deg.clone(),
            noise_std: self.noise_std,
            noise_convention: self.noise_convention,
            seed: self.seed,
            samples: self.samples.len(),
        }
    }

    fn with_samples(&self, samples: Vec<Sample>) -> Self {
        Self {
            samples,
            angles_deg: self.angles_deg.clone(),
            ..*self
        }
    }

    /// Largest componentwise deviation of a stored target from the dense
    /// `Ã_N` product of its input.
    pub fn max_target_error(&self) -> Result<f64> {
        let a = build_scaled_dvm_dense(&self.dvm()?);
        let mut worst: f64 = 0.0;
        for s in &self.samples {
            if s.input.len() != 2 * self.n || s.target.len() != 2 * self.n {
                return Err(Error::Shape(format!(
                    "sample vectors must have length {} for N = {}",
                    2 * self.n,
                    self.n
                )));
            }
            let y = &a * DVector::from_vec(real_join(&s.input));
            let want = real_split(y.as_slice());
            for (a, b) in s.target.iter().zip(&want) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }
}

/// Builds the dataset: for every angle, `samples_per_angle` snapshots at
/// `t = i / samples_per_angle`, targets `real_split(Ã_N · u)`.
///
/// Sample `i` draws its noise from its own ChaCha stream `(seed, i)`, so the
/// result does not depend on thread count.
pub fn make_dataset(
    geometry: &ArrayGeometry,
    freq_hz: f64,
    angles_deg: &[f64],
    samples_per_angle: usize,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    make_dataset_with(
        geometry,
        freq_hz,
        angles_deg,
        samples_per_angle,
        noise_std,
        NoiseConvention::default(),
        seed,
    )
}

pub fn make_dataset_with(
    geometry: &ArrayGeometry,
    freq_hz: f64,
    angles_deg: &[f64],
    samples_per_angle: usize,
    noise_std: f64,
    convention: NoiseConvention,
    seed: u64,
) -> Result<Dataset> {
    if samples_per_angle == 0 {
        return config("samples per angle must be at least 1");
    }
    if angles_deg.is_empty() {
        return config("at least one angle is required");
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return config(format!("noise std must be finite and non-negative, got {noise_std}"));
    }
    let spec = geometry.dvm(freq_hz)?;
    let chain = build_bluestein_chain(&spec)?;
    let total = angles_deg.len() * samples_per_angle;
    let samples = (0..total)
        .into_par_iter()
        .map(|i| {
            let angle = angles_deg[i / samples_per_angle];
            let t = (i % samples_per_angle) as f64 / samples_per_angle as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let u = synth_received(geometry, freq_hz, angle, t, noise_std, convention, &mut rng);
            let y = fast_dvm_apply(&chain, &u)?;
            Ok(Sample {
                t,
                angle_deg: angle,
                input: real_split(&u),
                target: real_split(&y),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        n: geometry.n,
        freq_hz,
        tau_s: geometry.tau_s,
        angles_deg: angles_deg.to_vec(),
        noise_std,
        noise_convention: convention,
        seed,
        samples,
    })
}

/// Seeded stratified split: each angle keeps `round(fraction·count)` samples
/// for training.
pub fn split_dataset(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return config(format!("train fraction must lie in (0, 1), got {train_fraction}"));
    }
    if ds.is_empty() {
        return config("cannot split an empty dataset");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, s) in ds.samples.iter().enumerate() {
        match groups.iter_mut().find(|(a, _)| a.to_bits() == s.angle_deg.to_bits()) {
            Some((_, idx)) => idx.push(i),
            None => groups.push((s.angle_deg, vec![i])),
        }
    }
    for (_, mut idx) in groups {
        idx.shuffle(&mut rng);
        let k = (train_fraction * idx.len() as f64).round() as usize;
        train.extend(idx[..k].iter().map(|&i| ds.samples[i].clone()));
        val.extend(idx[k..].iter().map(|&i| ds.samples[i].clone()));
    }
    Ok((ds.with_samples(train), ds.with_samples(val)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Binary,
    Csv,
}

const MAGIC: &[u8; 4] = b"DVMB";
const VERSION: u32 = 1;

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>, format: DataFormat) -> Result<()> {
    match format {
        DataFormat::Binary => save_binary(ds, path.as_ref()),
        DataFormat::Csv => save_csv(ds, path.as_ref()),
    }
}

/// Reads a dataset and re-checks every target against the dense operator.
pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset> {
    let ds = match format {
        DataFormat::Binary => load_binary(path.as_ref())?,
        DataFormat::Csv => load_csv(path.as_ref())?,
    };
    let err = ds.max_target_error()?;
    if !(err <= LOAD_TOLERANCE) {
        return Err(Error::Format(format!(
            "stored targets deviate from the beamforming operator by {err:e} (limit {LOAD_TOLERANCE:e})"
        )));
    }
    Ok(ds)
}

fn save_binary(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(ds.n as u32).to_le_bytes())?;
    for v in [ds.freq_hz, ds.tau_s, ds.noise_std] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&[match ds.noise_convention {
        NoiseConvention::ComplexTotal => 0,
        NoiseConvention::PerComponent => 1,
    }])?;
    w.write_all(&ds.seed.to_le_bytes())?;
    w.write_all(&(ds.angles_deg.len() as u32).to_le_bytes())?;
    for a in &ds.angles_deg {
        w.write_all(&a.to_le_bytes())?;
    }
    w.write_all(&(ds.samples.len() as u64).to_le_bytes())?;
    for s in &ds.samples {
        for v in [s.t, s.angle_deg].iter().chain(&s.input).chain(&s.target) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

struct LeReader<R: Read>(R);

impl<R: Read> LeReader<R> {
    fn take<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut b = [0u8; K];
        self.0.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format("dataset file is truncated".into()),
            _ => Error::Io(e),
        })?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

fn load_binary(path: &Path) -> Result<Dataset> {
    let mut r = LeReader(BufReader::new(File::open(path)?));
    if &r.take::<4>()? != MAGIC {
        return bad(format!("{} is not a dataset file (bad magic)", path.display()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return bad(format!("unsupported dataset version {version}"));
    }
    let n = r.u32()? as usize;
    if n == 0 {
        return bad("dataset header has N = 0");
    }
    let (freq_hz, tau_s, noise_std) = (r.f64()?, r.f64()?, r.f64()?);
    let noise_convention = match r.take::<1>()?[0] {
        0 => NoiseConvention::ComplexTotal,
        1 => NoiseConvention::PerComponent,
        k => return bad(format!("unknown noise convention tag {k}")),
    };
    let seed = r.u64()?;
    let n_angles = r.u32()? as usize;
    let angles_deg = (0..n_angles).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let count = r.u64()? as usize;
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let t = r.f64()?;
        let angle_deg = r.f64()?;
        let input = (0..2 * n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let target = (0..2 * n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        samples.push(Sample {
            t,
            angle_deg,
            input,
            target,
        });
    }
    let mut rest = [0u8; 1];
    if r.0.read(&mut rest)? != 0 {
        return bad("trailing bytes after the last sample");
    }
    Ok(Dataset {
        n,
        freq_hz,
        tau_s,
        angles_deg,
        noise_std,
        noise_convention,
        seed,
        samples,
    })
}

/// Sidecar metadata path of a CSV dataset.
pub fn csv_meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["sample_id".to_string(), "t".into(), "angle_deg".into()];
    for prefix in ["x_re", "x_im", "y_re", "y_im"] {
        h.extend((0..n).map(|k| format!("{prefix}_{k}")));
    }
    h
}

fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(csv_header(ds.n))?;
    for (i, s) in ds.samples.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(
            [s.t, s.angle_deg]
                .iter()
                .chain(&s.input)
                .chain(&s.target)
                .map(|v| format!("{v:.16e}")),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    fs::write(csv_meta_path(path), serde_json::to_string_pretty(&ds.meta())?)?;
    Ok(())
}

fn load_csv(path: &Path) -> Result<Dataset> {
    let meta_path = csv_meta_path(path);
    let meta: DatasetMeta = serde_json::from_str(
        &fs::read_to_string(&meta_path)
            .map_err(|e| Error::Format(format!("missing metadata sidecar {}: {e}", meta_path.display())))?,
    )?;
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != csv_header(meta.n) {
        return bad(format!("csv header does not match N = {}", meta.n));
    }
    let n2 = 2 * meta.n;
    let mut samples = Vec::with_capacity(meta.samples);
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad number {f:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(Sample {
            t: vals[0],
            angle_deg: vals[1],
            input: vals[2..2 + n2].to_vec(),
            target: vals[2 + n2..].to_vec(),
        });
    }
    if samples.len() != meta.samples {
        return bad(format!(
            "metadata lists {} samples, csv has {}",
            meta.samples,
            samples.len()
        ));
    }
    Ok(Dataset {
        n: meta.n,
        freq_hz: meta.freq_hz,
        tau_s: meta.tau_s,
        angles_deg: meta.angles_deg,
        noise_std: meta.noise_std,
        noise_convention: meta.noise_convention,
        seed: meta.seed,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry(n: usize) -> ArrayGeometry {
        ArrayGeometry::new(n, DEFAULT_F_MAX_HZ).unwrap()
    }

    #[test]
    fn steering_delay_examples() {
        let g = geometry(8);
        assert_eq!(steering_delay(1, &g, 37.0).unwrap(), 0.0);
        assert_eq!(steering_delay(5, &g, 0.0).unwrap(), 0.0);
        let d = steering_delay(2, &g, 30.0).unwrap();
        assert!((d - 7.8125e-12).abs() < 1e-24, "{d}");
        assert!(steering_delay(0, &g, 30.0).is_err());
        assert!(steering_delay(9, &g, 30.0).is_err());
    }

    #[test]
    fn derived_tau() {
        let g = geometry(16);
        assert!((g.tau_s - 1.0 / (32e9 * 16.0)).abs() <= 1e-15 * g.tau_s);
        assert!((g.spacing_m - 4.684_257_156_25e-3).abs() < 1e-12);
    }

    #[test]
    fn noiseless_snapshots() {
        let g = geometry(8);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = synth_received(&g, 24e9, 40.0, 0.37, 0.0, NoiseConvention::ComplexTotal, &mut rng);
        assert!(u.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        let u = synth_received(&g, 24e9, 0.0, 0.37, 0.0, NoiseConvention::ComplexTotal, &mut rng);
        assert!(u.iter().all(|v| *v == u[0]));
    }

    #[test]
    fn noise_component_std() {
        let g = geometry(1);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let clean = synth_received(&g, 24e9, 30.0, 0.25, 0.0, NoiseConvention::ComplexTotal, &mut rng)[0];
        let draws: Vec<f64> = (0..100_000)
            .map(|_| {
                synth_received(&g, 24e9, 30.0, 0.25, 0.1, NoiseConvention::ComplexTotal, &mut rng)[0].re - clean.re
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        assert!((0.068..=0.073).contains(&sd), "{sd}");
    }

    #[test]
    fn dataset_targets_match_dense_operator() {
        let ds = make_dataset(&geometry(16), 24e9, &[30.0, 40.0, 50.0], 50, 0.1, 7).unwrap();
        assert_eq!(ds.len(), 150);
        assert!(ds.max_target_error().unwrap() <= 1e-10);
        assert_eq!(ds.samples[1].t, 1.0 / 50.0);
        assert_eq!(ds.samples[50].angle_deg, 40.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = make_dataset(&geometry(8), 27e9, &[30.0, 40.0], 20, 0.1, 3).unwrap();
        let b = make_dataset(&geometry(8), 27e9, &[30.0, 40.0], 20, 0.1, 3).unwrap();
        let c = make_dataset(&geometry(8), 27e9, &[30.0, 40.0], 20, 0.1, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_options() {
        let g = geometry(4);
        assert!(make_dataset(&g, 24e9, &[30.0], 0, 0.1, 0).is_err());
        assert!(make_dataset(&g, 24e9, &[], 10, 0.1, 0).is_err());
        assert!(make_dataset(&g, 24e9, &[30.0], 10, -1.0, 0).is_err());
    }

    #[test]
    fn stratified_split() {
        let ds = make_dataset(&geometry(4), 24e9, &[30.0, 40.0, 50.0], 1000, 0.1, 1).unwrap();
        let (tr, va) = split_dataset(&ds, 0.8, 9).unwrap();
        assert_eq!((tr.len(), va.len()), (2400, 600));
        for a in [30.0, 40.0, 50.0] {
            assert_eq!(tr.samples.iter().filter(|s| s.angle_deg == a).count(), 800);
            assert_eq!(va.samples.iter().filter(|s| s.angle_deg == a).count(), 200);
        }
        let mut all: Vec<u64> = tr
            .samples
            .iter()
            .chain(&va.samples)
            .map(|s| s.input[0].to_bits())
            .collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 3000);
        assert!(split_dataset(&ds, 1.0, 0).is_err());
        assert!(split_dataset(&ds, 0.0, 0).is_err());
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let ds = make_dataset(&geometry(4), 24e9, &[30.0, 50.0], 10, 0.1, 5).unwrap();
        save_dataset(&ds, &path, DataFormat::Binary).unwrap();
        assert_eq!(load_dataset(&path, DataFormat::Binary).unwrap(), ds);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = make_dataset(&geometry(4), 24e9, &[30.0, 50.0], 10, 0.1, 5).unwrap();
        save_dataset(&ds, &path, DataFormat::Csv).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), ds.len() + 1);
        assert!(text.starts_with("sample_id,t,angle_deg,x_re_0,"));
        let back = load_dataset(&path, DataFormat::Csv).unwrap();
        assert_eq!(back.len(), ds.len());
        for (a, b) in back.samples.iter().zip(&ds.samples) {
            for (x, y) in a.input.iter().chain(&a.target).zip(b.input.iter().chain(&b.target)) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn load_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        fs::write(&path, b"NOPE0000").unwrap();
        assert!(matches!(load_dataset(&path, DataFormat::Binary), Err(Error::Format(_))));

        let mut ds = make_dataset(&geometry(4), 24e9, &[30.0], 5, 0.0, 5).unwrap();
        ds.samples[2].target[3] += 1e-6;
        save_dataset(&ds, &path, DataFormat::Binary).unwrap();
        let err = load_dataset(&path, DataFormat::Binary).unwrap_err();
        assert!(err.to_string().contains("deviate"), "{err}");
    }
}
