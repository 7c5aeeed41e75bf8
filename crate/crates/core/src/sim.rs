//! Seeded synthetic channel simulator.
//!
//! Shielded captures are a material-specific attenuation curve plus small
//! measurement noise. Unshielded captures of the same material add an
//! environment model: a drifting multiplicative ripple across subcarriers,
//! slow whole-packet fading, a per-day static tilt, rare additive
//! interference bursts and AWGN.
//!
//! Every acquisition draws from its own ChaCha stream keyed by
//! (master seed, acquisition index), so generation order and thread count
//! never change the output.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csi::{data_subcarrier_indices, CsiMatrix, DATA_SUBCARRIERS, NULL_AND_PILOT_INDICES, TOTAL_SUBCARRIERS};
use crate::ingest::{
    write_csi_lines, Acquisition, Condition, CsiFrameRecord, DatasetManifest, ManifestEntry, Material,
    PACKETS_PER_ACQUISITION,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid simulator config: {0}")]
    Config(String),
}

/// Pilot subcarrier offsets within the 64-column layout.
const PILOT_INDICES: [usize; 4] = [11, 25, 39, 53];
const PILOT_AMPLITUDE: f64 = 1.0;

/// Attenuation signature of one material: a base level with Gaussian dips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialProfile {
    pub material: Material,
    pub bump_centers: Vec<f64>,
    pub bump_widths: Vec<f64>,
    pub bump_depths: Vec<f64>,
    pub base_level: f64,
}

impl MaterialProfile {
    pub fn flat(material: Material, base_level: f64) -> Self {
        MaterialProfile { material, bump_centers: vec![], bump_widths: vec![], bump_depths: vec![], base_level }
    }

    fn validate(&self) -> Result<(), SimError> {
        let n = self.bump_centers.len();
        if self.bump_widths.len() != n || self.bump_depths.len() != n {
            return Err(SimError::Config(format!("{}: bump vectors differ in length", self.material)));
        }
        if !(self.base_level > 0.0 && self.base_level <= 1.0) {
            return Err(SimError::Config(format!("{}: base_level must be in (0, 1]", self.material)));
        }
        if self.bump_depths.iter().any(|&d| !(d > 0.0 && d < 1.0)) || self.bump_widths.iter().any(|&w| w <= 0.0) {
            return Err(SimError::Config(format!("{}: bump depth in (0,1) and width > 0 required", self.material)));
        }
        Ok(())
    }
}

/// The five default signatures, one per class.
pub fn default_profiles() -> Vec<MaterialProfile> {
    let p = |material, centers: &[f64], widths: &[f64], depths: &[f64], base_level| MaterialProfile {
        material,
        bump_centers: centers.to_vec(),
        bump_widths: widths.to_vec(),
        bump_depths: depths.to_vec(),
        base_level,
    };
    vec![
        p(Material::Acrylic, &[12.0, 38.0], &[3.0, 3.0], &[0.30, 0.20], 0.90),
        p(Material::Aluminum, &[8.0, 26.0, 44.0], &[2.5, 2.5, 2.5], &[0.45, 0.35, 0.45], 0.70),
        p(Material::Copper, &[20.0, 33.0], &[3.5, 2.0], &[0.55, 0.25], 0.75),
        p(Material::Pine, &[30.0, 47.0], &[5.0, 2.0], &[0.30, 0.25], 0.85),
        p(Material::Background, &[26.0], &[12.0], &[0.12], 0.95),
    ]
}

/// Environment noise model for unshielded captures. All amplitudes are
/// relative to the clean amplitude scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainNoiseConfig {
    pub awgn_sigma: f64,
    pub ripple_amp: f64,
    /// Ripple period in subcarriers.
    pub ripple_period: f64,
    /// Ripple phase advance per packet, radians.
    pub ripple_phase_drift: f64,
    pub slow_fade_amp: f64,
    /// Fade period in packets.
    pub slow_fade_period: f64,
    /// Expected bursts per acquisition.
    pub burst_rate: f64,
    pub burst_amp: f64,
    /// Burst band width in subcarriers.
    pub burst_width: usize,
    /// Burst length in packets.
    pub burst_duration: usize,
    /// Spread of the per-day environment offsets.
    pub day_offset_sigma: f64,
    /// Static linear gain tilt across the band (set per day).
    pub static_tilt: f64,
    /// Ripple phase at packet 0 (set per day).
    pub ripple_phase_offset: f64,
}

impl Default for DomainNoiseConfig {
    fn default() -> Self {
        DomainNoiseConfig {
            awgn_sigma: 0.5,
            ripple_amp: 0.25,
            ripple_period: 9.0,
            ripple_phase_drift: 0.15,
            slow_fade_amp: 0.3,
            slow_fade_period: 150.0,
            burst_rate: 4.0,
            burst_amp: 1.5,
            burst_width: 8,
            burst_duration: 60,
            day_offset_sigma: 0.2,
            static_tilt: 0.0,
            ripple_phase_offset: 0.0,
        }
    }
}

impl DomainNoiseConfig {
    /// Every term disabled.
    pub fn zero() -> Self {
        DomainNoiseConfig {
            awgn_sigma: 0.0,
            ripple_amp: 0.0,
            ripple_period: 1.0,
            ripple_phase_drift: 0.0,
            slow_fade_amp: 0.0,
            slow_fade_period: 1.0,
            burst_rate: 0.0,
            burst_amp: 0.0,
            burst_width: 0,
            burst_duration: 0,
            day_offset_sigma: 0.0,
            static_tilt: 0.0,
            ripple_phase_offset: 0.0,
        }
    }

    pub fn awgn_only(sigma: f64) -> Self {
        DomainNoiseConfig { awgn_sigma: sigma, ..Self::zero() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let nonneg = [
            ("awgn_sigma", self.awgn_sigma),
            ("ripple_amp", self.ripple_amp),
            ("slow_fade_amp", self.slow_fade_amp),
            ("burst_rate", self.burst_rate),
            ("burst_amp", self.burst_amp),
            ("day_offset_sigma", self.day_offset_sigma),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::Config(format!("{name} must be finite and >= 0")));
            }
        }
        if self.ripple_period <= 0.0 || self.slow_fade_period <= 0.0 {
            return Err(SimError::Config("periods must be > 0".into()));
        }
        Ok(())
    }

    /// Environment of one acquisition day: a random static tilt and ripple
    /// phase, and log-normal jitter on the ripple and AWGN strengths.
    pub fn for_day(&self, day: u8, master_seed: u64) -> DomainNoiseConfig {
        let mut rng = stream_rng(master_seed, DAY_STREAM_BASE + day as u64);
        let s = self.day_offset_sigma;
        if s == 0.0 {
            return self.clone();
        }
        let normal = Normal::new(0.0, s).expect("finite sigma");
        DomainNoiseConfig {
            static_tilt: self.static_tilt + normal.sample(&mut rng),
            ripple_phase_offset: rng.random_range(0.0..2.0 * PI),
            ripple_amp: self.ripple_amp * normal.sample(&mut rng).exp(),
            awgn_sigma: self.awgn_sigma * normal.sample(&mut rng).exp(),
            ..self.clone()
        }
    }
}

/// Whole-dataset generation settings; loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub packets: usize,
    /// Multiplier applied to amplitudes before rounding to integer I/Q.
    pub iq_scale: f64,
    pub measurement_sigma: f64,
    pub days: u8,
    pub profiles: Vec<MaterialProfile>,
    pub noise: DomainNoiseConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            packets: PACKETS_PER_ACQUISITION,
            iq_scale: 1000.0,
            measurement_sigma: 0.01,
            days: 10,
            profiles: default_profiles(),
            noise: DomainNoiseConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.packets == 0 || self.days == 0 || self.iq_scale <= 0.0 || self.measurement_sigma < 0.0 {
            return Err(SimError::Config("packets, days, iq_scale must be positive".into()));
        }
        for p in &self.profiles {
            p.validate()?;
        }
        for m in Material::ALL {
            if !self.profiles.iter().any(|p| p.material == m) {
                return Err(SimError::Config(format!("no profile for {m}")));
            }
        }
        self.noise.validate()
    }

    pub fn profile(&self, material: Material) -> &MaterialProfile {
        self.profiles.iter().find(|p| p.material == material).expect("validated config has every material")
    }
}

const DAY_STREAM_BASE: u64 = 1 << 40;

/// Independent deterministic stream for one purpose under a master seed.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// `base_level` minus Gaussian dips, clamped to (0, 1].
pub fn material_curve(profile: &MaterialProfile, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| {
            let x = i as f64;
            let dip: f64 = profile
                .bump_centers
                .iter()
                .zip(&profile.bump_widths)
                .zip(&profile.bump_depths)
                .map(|((c, w), d)| d * (-(x - c).powi(2) / (2.0 * w * w)).exp())
                .sum();
            (profile.base_level - dip).clamp(1e-3, 1.0)
        })
        .collect()
}

/// Place per-packet data-subcarrier amplitudes into a 64-column CSI matrix,
/// with a per-packet common phase, zeroed guards/DC and fixed pilots.
fn embed(amplitudes: &Array2<f64>, phases: &[f64]) -> CsiMatrix {
    let n = amplitudes.nrows();
    let keep = data_subcarrier_indices();
    let mut data = Array2::<Complex64>::zeros((n, TOTAL_SUBCARRIERS));
    for p in 0..n {
        let rot = Complex64::from_polar(1.0, phases[p]);
        for (j, &col) in keep.iter().enumerate() {
            data[[p, col]] = rot * amplitudes[[p, j]];
        }
        for &col in &PILOT_INDICES {
            data[[p, col]] = rot * PILOT_AMPLITUDE;
        }
    }
    debug_assert!(NULL_AND_PILOT_INDICES.iter().all(|c| keep.binary_search(c).is_err()));
    CsiMatrix::from_array(data)
}

/// In-box capture: the material curve on every packet plus Gaussian
/// measurement noise of standard deviation `sigma`.
pub fn simulate_shielded(profile: &MaterialProfile, n: usize, seed: u64, sigma: f64) -> Acquisition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let curve = material_curve(profile, DATA_SUBCARRIERS);
    let mut amp = Array2::<f64>::zeros((n, DATA_SUBCARRIERS));
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut phases = Vec::with_capacity(n);
    for p in 0..n {
        phases.push(rng.random_range(0.0..2.0 * PI));
        for k in 0..DATA_SUBCARRIERS {
            let e = if sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            amp[[p, k]] = (curve[k] + e).max(0.0);
        }
    }
    Acquisition {
        id: format!("{}_shielded", profile.material),
        material: profile.material,
        condition: Condition::Shielded,
        day: 1,
        csi: embed(&amp, &phases),
    }
}

/// Out-of-box capture derived from a clean one:
/// `clean * tilt * (1 + ripple) * (1 + fade) + bursts + awgn`, clamped at 0.
/// Phases of the clean capture are kept.
pub fn simulate_unshielded(clean: &Acquisition, cfg: &DomainNoiseConfig, seed: u64) -> Acquisition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = data_subcarrier_indices();
    let src = clean.csi.as_array();
    let n = src.nrows();
    let kk = keep.len();

    let ripple_phase0 =
        cfg.ripple_phase_offset + if cfg.ripple_amp > 0.0 { rng.random_range(0.0..2.0 * PI) } else { 0.0 };
    let fade_phase0 = if cfg.slow_fade_amp > 0.0 { rng.random_range(0.0..2.0 * PI) } else { 0.0 };

    let mut additive = Array2::<f64>::zeros((n, kk));
    if cfg.burst_rate > 0.0 && cfg.burst_amp > 0.0 && cfg.burst_width > 0 && cfg.burst_duration > 0 {
        let count = Poisson::new(cfg.burst_rate).expect("positive rate").sample(&mut rng) as usize;
        for _ in 0..count {
            let t0 = rng.random_range(0..n);
            let dur = ((cfg.burst_duration as f64) * rng.random_range(0.5..1.5)).round().max(1.0) as usize;
            let width = cfg.burst_width.min(kk);
            let k0 = rng.random_range(0..=kk - width);
            let a = cfg.burst_amp * rng.random_range(0.5..1.5);
            for t in t0..(t0 + dur).min(n) {
                for k in k0..k0 + width {
                    additive[[t, k]] += a;
                }
            }
        }
    }
    let normal = Normal::new(0.0, cfg.awgn_sigma).expect("finite sigma");

    let mut out = src.clone();
    for p in 0..n {
        let fade = 1.0 + cfg.slow_fade_amp * (2.0 * PI * p as f64 / cfg.slow_fade_period + fade_phase0).sin();
        let ripple_phase = ripple_phase0 + cfg.ripple_phase_drift * p as f64;
        for (j, &col) in keep.iter().enumerate() {
            let h = src[[p, col]];
            let a = h.norm();
            let tilt = 1.0 + cfg.static_tilt * (j as f64 / (kk - 1) as f64 - 0.5);
            let ripple = 1.0 + cfg.ripple_amp * (2.0 * PI * j as f64 / cfg.ripple_period + ripple_phase).sin();
            let noise = if cfg.awgn_sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            let target = (a * tilt * ripple * fade + additive[[p, j]] + noise).max(0.0);
            if target != a {
                out[[p, col]] = if a > 0.0 { h * (target / a) } else { Complex64::new(target, 0.0) };
            }
        }
    }
    Acquisition {
        id: clean.id.replace("shielded", "unshielded"),
        material: clean.material,
        condition: Condition::Unshielded,
        day: clean.day,
        csi: CsiMatrix::from_array(out),
    }
}

/// Round a CSI matrix to the integer I/Q grid used on disk.
pub fn quantize(csi: &CsiMatrix, iq_scale: f64) -> Vec<CsiFrameRecord> {
    csi.as_array()
        .outer_iter()
        .enumerate()
        .map(|(p, row)| {
            let mut iq = Vec::with_capacity(2 * row.len());
            for h in row {
                iq.push((h.re * iq_scale).round() as i32);
                iq.push((h.im * iq_scale).round() as i32);
            }
            CsiFrameRecord { timestamp_us: 10_000 * p as u64, rssi: -45, iq }
        })
        .collect()
}

/// One planned acquisition in a generated dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedAcquisition {
    pub material: Material,
    pub condition: Condition,
    pub day: u8,
    pub ordinal: usize,
}

impl PlannedAcquisition {
    pub fn relative_path(&self) -> PathBuf {
        PathBuf::from(format!("{}/{}/day{:02}_{:02}.csv", self.condition, self.material, self.day, self.ordinal))
    }

    fn stream(&self) -> u64 {
        let cond = match self.condition {
            Condition::Shielded => 0,
            Condition::Unshielded => 1,
        };
        ((self.material.index() as u64 * 2 + cond) << 20) | self.ordinal as u64
    }
}

/// `count` acquisitions per (material, condition), spread over up to
/// `days` days in equal consecutive blocks.
pub fn plan_dataset(count: usize, days: u8) -> Vec<PlannedAcquisition> {
    let days_used = (days as usize).min(count).max(1);
    let per_day = count.div_ceil(days_used);
    let mut plan = Vec::with_capacity(count * 10);
    for condition in Condition::ALL {
        for material in Material::ALL {
            for ordinal in 0..count {
                plan.push(PlannedAcquisition { material, condition, day: (ordinal / per_day + 1) as u8, ordinal });
            }
        }
    }
    plan
}

fn simulate_planned_raw(plan: &PlannedAcquisition, cfg: &SimConfig, seed: u64) -> Acquisition {
    let mut rng = stream_rng(seed, plan.stream());
    let clean_seed: u64 = rng.random();
    let noise_seed: u64 = rng.random();
    let mut acq = simulate_shielded(cfg.profile(plan.material), cfg.packets, clean_seed, cfg.measurement_sigma);
    acq.day = plan.day;
    if plan.condition == Condition::Unshielded {
        acq = simulate_unshielded(&acq, &cfg.noise.for_day(plan.day, seed), noise_seed);
    }
    acq
}

fn manifest_entry(plan: &PlannedAcquisition) -> ManifestEntry {
    ManifestEntry { path: plan.relative_path(), material: plan.material, condition: plan.condition, day: plan.day }
}

/// Simulate one planned acquisition, rounded to the on-disk I/Q grid so it
/// equals what loading the written file yields.
pub fn simulate_planned(plan: &PlannedAcquisition, cfg: &SimConfig, seed: u64) -> Acquisition {
    let raw = simulate_planned_raw(plan, cfg, seed);
    let frames = quantize(&raw.csi, cfg.iq_scale);
    crate::ingest::acquisition_from_records(&frames, &manifest_entry(plan)).expect("simulator frames are uniform")
}

/// Simulate a whole dataset in memory (manifest order).
pub fn generate_acquisitions(count: usize, cfg: &SimConfig, seed: u64) -> Result<Vec<Acquisition>, SimError> {
    cfg.validate()?;
    Ok(plan_dataset(count, cfg.days).par_iter().map(|p| simulate_planned(p, cfg, seed)).collect())
}

/// Write `csi-lines` files and `manifest.toml` under `out_dir`.
pub fn generate_dataset(out_dir: &Path, count: usize, cfg: &SimConfig, seed: u64) -> Result<DatasetManifest, SimError> {
    cfg.validate()?;
    let plan = plan_dataset(count, cfg.days);
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SimError::Io { path, source }
    };
    plan.par_iter().try_for_each(|p| -> Result<(), SimError> {
        let acq = simulate_planned_raw(p, cfg, seed);
        let path = out_dir.join(p.relative_path());
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io(dir))?;
        }
        fs::write(&path, write_csi_lines(&quantize(&acq.csi, cfg.iq_scale))).map_err(io(&path))
    })?;
    let manifest = DatasetManifest { entries: plan.iter().map(manifest_entry).collect(), ..DatasetManifest::default() };
    let mpath = out_dir.join("manifest.toml");
    fs::write(&mpath, manifest.to_toml()).map_err(io(&mpath))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::{normalize_minmax, AmplitudeMatrix};
    use crate::eval::metrics::normalized_mse;

    #[test]
    fn flat_profile_gives_constant_curve() {
        let c = material_curve(&MaterialProfile::flat(Material::Pine, 0.8), 52);
        assert!(c.iter().all(|&v| v == 0.8));
    }

    #[test]
    fn single_dip_sets_argmin() {
        let p = MaterialProfile {
            material: Material::Copper,
            bump_centers: vec![26.0],
            bump_widths: vec![3.0],
            bump_depths: vec![0.3],
            base_level: 0.9,
        };
        let c = material_curve(&p, 52);
        let argmin = c.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        assert_eq!(argmin, 26);
        assert!(c.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn shielded_determinism_and_zero_sigma() {
        let p = &default_profiles()[2];
        let a = simulate_shielded(p, 50, 9, 0.01);
        let b = simulate_shielded(p, 50, 9, 0.01);
        assert_eq!(a, b);
        assert_ne!(a, simulate_shielded(p, 50, 10, 0.01));

        let z = simulate_shielded(p, 20, 9, 0.0);
        let amp = z.data_amplitudes().unwrap();
        let curve = material_curve(p, 52);
        for row in amp.0.outer_iter() {
            for (v, c) in row.iter().zip(&curve) {
                assert!((v - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn measurement_noise_tail() {
        let p = &default_profiles()[0];
        let a = simulate_shielded(p, 1000, 3, 0.01).data_amplitudes().unwrap();
        let curve = material_curve(p, 52);
        let within =
            a.0.outer_iter()
                .flat_map(|r| r.iter().zip(&curve).map(|(v, c)| (v - c).abs()).collect::<Vec<_>>())
                .filter(|d| *d < 0.05)
                .count();
        // P(|z| >= 5 sigma) ~ 6e-7, so essentially every entry is inside.
        assert!(within as f64 / 52_000.0 > 0.99);
    }

    #[test]
    fn zero_noise_is_identity() {
        let p = &default_profiles()[1];
        let clean = simulate_shielded(p, 30, 1, 0.01);
        let noisy = simulate_unshielded(&clean, &DomainNoiseConfig::zero(), 5);
        assert_eq!(noisy.csi, clean.csi);
        assert_eq!(noisy.condition, Condition::Unshielded);
    }

    #[test]
    fn awgn_mse_matches_closed_form_scale() {
        let p = &default_profiles()[0];
        let clean = simulate_shielded(p, 1000, 1, 0.01);
        let noisy = simulate_unshielded(&clean, &DomainNoiseConfig::awgn_only(0.05), 2);
        let (c, cs) = normalize_minmax(&clean.data_amplitudes().unwrap()).unwrap();
        // On the clean scale, additive noise of std 0.05 gives (0.05 / range)^2.
        let n = AmplitudeMatrix::new(noisy.data_amplitudes().unwrap().values().mapv(|a| (a - cs.min) / cs.range()));
        let mse = normalized_mse(&n, &c).unwrap();
        let expected = (0.05 / cs.range()).powi(2);
        assert!((mse / expected - 1.0).abs() < 0.1, "mse {mse} expected {expected}");
    }

    #[test]
    fn awgn_mse_is_monotone_in_sigma() {
        let p = &default_profiles()[3];
        let mean_mse = |sigma: f64| {
            (0..10)
                .map(|t| {
                    let clean = simulate_shielded(p, 200, 100 + t, 0.01);
                    let noisy = simulate_unshielded(&clean, &DomainNoiseConfig::awgn_only(sigma), 200 + t);
                    let a = clean.data_amplitudes().unwrap();
                    let b = noisy.data_amplitudes().unwrap();
                    normalized_mse(&a, &b).unwrap()
                })
                .sum::<f64>()
                / 10.0
        };
        let m: Vec<f64> = [0.02, 0.05, 0.1].iter().map(|&s| mean_mse(s)).collect();
        assert!(m[0] < m[1] && m[1] < m[2], "{m:?}");
    }

    #[test]
    fn plan_layout() {
        let plan = plan_dataset(30, 10);
        assert_eq!(plan.len(), 300);
        for day in 1..=10u8 {
            let n = plan
                .iter()
                .filter(|p| p.day == day && p.material == Material::Copper && p.condition == Condition::Shielded)
                .count();
            assert_eq!(n, 3);
        }
        assert_eq!(plan_dataset(1, 10).len(), 10);
        assert!(plan_dataset(1, 10).iter().all(|p| p.day == 1));
    }

    #[test]
    fn config_toml_roundtrip_and_unknown_keys() {
        let cfg = SimConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(SimConfig::from_toml(&text).unwrap(), cfg);
        assert!(SimConfig::from_toml("packets = 10\nbogus = 1\n").is_err());
        let partial = SimConfig::from_toml("packets = 200\n[noise]\nawgn_sigma = 0.2\n").unwrap();
        assert_eq!(partial.packets, 200);
        assert_eq!(partial.noise.awgn_sigma, 0.2);
        assert_eq!(partial.noise.ripple_amp, DomainNoiseConfig::default().ripple_amp);
    }
}
