//! Capture files, dataset manifests and shielded/unshielded pairing.
//!
//! Capture files use the `csi-lines` v1 text format:
//!
//! ```text
//! csi-lines,1,64
//! <timestamp_us>,<rssi>,<sc0_re>,<sc0_im>,...,<sc63_re>,<sc63_im>
//! ```
//!
//! One frame per line, LF terminated, all fields integers. Timestamps are
//! strictly increasing within a file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csi::{self, AmplitudeMatrix, CfrVector, CsiError, CsiMatrix, ScaleRecord, TOTAL_SUBCARRIERS};

pub const CSI_LINES_HEADER: &str = "csi-lines,1,64";
pub const MANIFEST_VERSION: &str = "1";
/// Packets per acquisition: 100 packets/s for 10 s.
pub const PACKETS_PER_ACQUISITION: usize = 1000;
/// Accepted deviation from [`PACKETS_PER_ACQUISITION`] before trimming/padding.
pub const PACKET_JITTER: usize = 10;
/// Acquisitions per (material, condition) cell in a complete dataset.
pub const FULL_CELL_COUNT: usize = 30;
pub const IQ_VALUES: usize = 2 * TOTAL_SUBCARRIERS;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("bad header {0:?}, expected {CSI_LINES_HEADER:?}")]
    BadHeader(String),
    #[error("only {0} frames found, at least {min} required", min = PACKETS_PER_ACQUISITION - PACKET_JITTER)]
    TooFewFrames(usize),
    #[error("{0} frames found, at most {max} accepted", max = PACKETS_PER_ACQUISITION + PACKET_JITTER)]
    TooManyFrames(usize),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csi(#[from] CsiError),
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    Acrylic,
    Aluminum,
    Copper,
    Pine,
    Background,
}

impl Material {
    pub const ALL: [Material; 5] =
        [Material::Acrylic, Material::Aluminum, Material::Copper, Material::Pine, Material::Background];

    /// Class index used by the classifiers (position in [`Material::ALL`]).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Material> {
        Material::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Material::Acrylic => "acrylic",
            Material::Aluminum => "aluminum",
            Material::Copper => "copper",
            Material::Pine => "pine",
            Material::Background => "background",
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Material {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Material::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown material {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Shielded,
    Unshielded,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Shielded, Condition::Unshielded];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Shielded => "shielded",
            Condition::Unshielded => "unshielded",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Order of the two integers describing one subcarrier in a capture line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IqOrder {
    #[default]
    RealFirst,
    ImagFirst,
}

/// One parsed line of a capture file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsiFrameRecord {
    pub timestamp_us: u64,
    pub rssi: i32,
    /// (re, im) pairs in ascending subcarrier order.
    pub iq: Vec<i32>,
}

impl CsiFrameRecord {
    pub fn cfr(&self) -> CfrVector {
        self.iq.chunks_exact(2).map(|p| Complex64::new(p[0] as f64, p[1] as f64)).collect::<Vec<_>>().into()
    }

    /// Render as one `csi-lines` row (no trailing newline).
    pub fn to_line(&self) -> String {
        use std::fmt::Write;
        let mut s = String::with_capacity(8 * (IQ_VALUES + 2));
        write!(s, "{},{}", self.timestamp_us, self.rssi).unwrap();
        for v in &self.iq {
            write!(s, ",{v}").unwrap();
        }
        s
    }
}

/// Parse one frame line. `line_no` is only used for error context.
pub fn parse_csi_line(line: &str, line_no: usize, order: IqOrder) -> Result<CsiFrameRecord, IngestError> {
    let malformed = |reason: String| IngestError::MalformedLine { line: line_no, reason };
    let fields: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
    if fields.len() != IQ_VALUES + 2 {
        return Err(malformed(format!("expected {} fields, found {}", IQ_VALUES + 2, fields.len())));
    }
    let timestamp_us =
        fields[0].trim().parse::<u64>().map_err(|e| malformed(format!("timestamp {:?}: {e}", fields[0])))?;
    let rssi = fields[1].trim().parse::<i32>().map_err(|e| malformed(format!("rssi {:?}: {e}", fields[1])))?;
    let mut iq = fields[2..]
        .iter()
        .enumerate()
        .map(|(i, f)| f.trim().parse::<i32>().map_err(|e| malformed(format!("iq value {i} {f:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if order == IqOrder::ImagFirst {
        for pair in iq.chunks_exact_mut(2) {
            pair.swap(0, 1);
        }
    }
    Ok(CsiFrameRecord { timestamp_us, rssi, iq })
}

/// Parse a whole capture file body (header included).
pub fn parse_csi_lines(text: &str, order: IqOrder) -> Result<Vec<CsiFrameRecord>, IngestError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == CSI_LINES_HEADER => {}
        Some((_, h)) => return Err(IngestError::BadHeader(h.to_string())),
        None => return Err(IngestError::BadHeader(String::new())),
    }
    let mut frames: Vec<CsiFrameRecord> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_csi_line(line, i + 1, order)?;
        if let Some(prev) = frames.last() {
            if rec.timestamp_us <= prev.timestamp_us {
                return Err(IngestError::MalformedLine {
                    line: i + 1,
                    reason: format!("timestamp {} not after previous {}", rec.timestamp_us, prev.timestamp_us),
                });
            }
        }
        frames.push(rec);
    }
    Ok(frames)
}

pub fn write_csi_lines(frames: &[CsiFrameRecord]) -> String {
    let mut out = String::with_capacity(frames.len() * 600 + 16);
    out.push_str(CSI_LINES_HEADER);
    out.push('\n');
    for f in frames {
        out.push_str(&f.to_line());
        out.push('\n');
    }
    out
}

/// A labelled 10-second capture.
#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    pub id: String,
    pub material: Material,
    pub condition: Condition,
    pub day: u8,
    pub csi: CsiMatrix,
}

impl Acquisition {
    /// Amplitudes of the 52 data subcarriers.
    pub fn data_amplitudes(&self) -> Result<AmplitudeMatrix, CsiError> {
        Ok(csi::select_data_subcarriers(&self.csi)?.amplitudes())
    }

    /// Data-subcarrier amplitudes scaled into [0, 1].
    pub fn normalized_amplitudes(&self) -> Result<(AmplitudeMatrix, ScaleRecord), CsiError> {
        csi::normalize_minmax(&self.data_amplitudes()?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub material: Material,
    pub condition: Condition,
    pub day: u8,
}

impl ManifestEntry {
    /// Identifier derived from the file name without extension.
    pub fn id(&self) -> String {
        self.path.with_extension("").to_string_lossy().replace(['/', '\\'], "_")
    }
}

/// Collection of labelled capture files. Entry paths are relative to the
/// manifest's directory unless absolute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: String,
    #[serde(default)]
    pub entries: Vec<ManifestEntry>,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        DatasetManifest { version: MANIFEST_VERSION.to_string(), entries: Vec::new() }
    }
}

impl DatasetManifest {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let m: DatasetManifest = toml::from_str(text).map_err(|e| IngestError::Manifest(e.to_string()))?;
        if m.version != MANIFEST_VERSION {
            return Err(IngestError::Manifest(format!(
                "unsupported version {:?}, expected {MANIFEST_VERSION:?}",
                m.version
            )));
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        fs::write(path, self.to_toml()).map_err(|e| IngestError::io(path, e))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Build an acquisition from parsed frames, trimming the tail or repeating
/// the last frame so exactly [`PACKETS_PER_ACQUISITION`] rows remain.
pub fn acquisition_from_frames(frames: &[CsiFrameRecord], entry: &ManifestEntry) -> Result<Acquisition, IngestError> {
    let n = frames.len();
    if n < PACKETS_PER_ACQUISITION - PACKET_JITTER {
        return Err(IngestError::TooFewFrames(n));
    }
    if n > PACKETS_PER_ACQUISITION + PACKET_JITTER {
        return Err(IngestError::TooManyFrames(n));
    }
    let mut kept = frames[..n.min(PACKETS_PER_ACQUISITION)].to_vec();
    while kept.len() < PACKETS_PER_ACQUISITION {
        let last = kept.last().expect("non-empty").clone();
        kept.push(last);
    }
    acquisition_from_records(&kept, entry)
}

/// Assemble frames into an acquisition as-is, without the packet-count rule.
pub(crate) fn acquisition_from_records(
    frames: &[CsiFrameRecord],
    entry: &ManifestEntry,
) -> Result<Acquisition, IngestError> {
    let cfrs: Vec<CfrVector> = frames.iter().map(|f| f.cfr()).collect();
    let csi = csi::assemble_csi(&cfrs)?;
    if csi.subcarriers() != TOTAL_SUBCARRIERS {
        return Err(CsiError::WrongWidth { expected: TOTAL_SUBCARRIERS, found: csi.subcarriers() }.into());
    }
    Ok(Acquisition { id: entry.id(), material: entry.material, condition: entry.condition, day: entry.day, csi })
}

pub fn load_acquisition(path: &Path, entry: &ManifestEntry) -> Result<Acquisition, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let frames = parse_csi_lines(&text, IqOrder::RealFirst)?;
    acquisition_from_frames(&frames, entry)
}

/// Load every manifest entry. Files are parsed in parallel; the result keeps
/// manifest order.
pub fn load_dataset(manifest: &DatasetManifest, base_dir: &Path) -> Result<Vec<Acquisition>, IngestError> {
    manifest.entries.par_iter().map(|e| load_acquisition(&resolve(base_dir, &e.path), e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCount {
    pub material: Material,
    pub condition: Condition,
    pub count: usize,
    pub days: BTreeSet<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// One row per (material, condition), all ten cells always present.
    pub cells: Vec<CellCount>,
    pub missing: Vec<PathBuf>,
    pub bad_days: Vec<PathBuf>,
    pub total: usize,
    pub valid: bool,
}

impl ValidationReport {
    pub fn count(&self, material: Material, condition: Condition) -> usize {
        self.cells.iter().find(|c| c.material == material && c.condition == condition).map_or(0, |c| c.count)
    }

    /// Cells whose count differs from a full dataset.
    pub fn incomplete_cells(&self) -> Vec<&CellCount> {
        self.cells.iter().filter(|c| c.count != FULL_CELL_COUNT).collect()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} entries, {} missing files, {}\n",
            self.total,
            self.missing.len(),
            if self.valid { "valid" } else { "INVALID" }
        );
        for c in &self.cells {
            let flag = if c.count == FULL_CELL_COUNT { "" } else { "  <-- incomplete" };
            s.push_str(&format!(
                "  {:<10} {:<10} {:>3} files, {} days{flag}\n",
                c.material.name(),
                c.condition.name(),
                c.count,
                c.days.len()
            ));
        }
        s
    }
}

/// Count entries per (material, condition), check files exist and days are
/// in 1..=10. A dataset is valid when every cell holds exactly 30 existing
/// files.
pub fn validate_dataset(manifest: &DatasetManifest, base_dir: &Path) -> ValidationReport {
    let mut cells: BTreeMap<(Material, Condition), CellCount> = BTreeMap::new();
    for m in Material::ALL {
        for c in Condition::ALL {
            cells.insert((m, c), CellCount { material: m, condition: c, count: 0, days: BTreeSet::new() });
        }
    }
    let mut missing = Vec::new();
    let mut bad_days = Vec::new();
    for e in &manifest.entries {
        let path = resolve(base_dir, &e.path);
        if !path.is_file() {
            missing.push(e.path.clone());
            continue;
        }
        if !(1..=10).contains(&e.day) {
            bad_days.push(e.path.clone());
        }
        let cell = cells.get_mut(&(e.material, e.condition)).expect("all cells seeded");
        cell.count += 1;
        cell.days.insert(e.day);
    }
    let cells: Vec<CellCount> = cells.into_values().collect();
    let valid = missing.is_empty() && bad_days.is_empty() && cells.iter().all(|c| c.count == FULL_CELL_COUNT);
    ValidationReport { cells, missing, bad_days, total: manifest.entries.len(), valid }
}

/// A training pair: unshielded input and shielded target, both scaled to
/// [0, 1] per acquisition over the 52 data subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub noisy: AmplitudeMatrix,
    pub clean: AmplitudeMatrix,
    pub noisy_scale: ScaleRecord,
    pub clean_scale: ScaleRecord,
    pub material: Material,
    pub day: u8,
    pub noisy_id: String,
    pub clean_id: String,
}

impl PairedSample {
    /// Keep only the first `n` packets on both sides.
    pub fn truncated(&self, n: usize) -> PairedSample {
        PairedSample { noisy: self.noisy.head(n), clean: self.clean.head(n), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leftover {
    pub id: String,
    pub material: Material,
    pub condition: Condition,
    pub day: u8,
}

#[derive(Debug, Clone, Default)]
pub struct PairingResult {
    pub pairs: Vec<PairedSample>,
    pub leftovers: Vec<Leftover>,
    /// (material, day) groups present on one side only.
    pub no_counterpart: Vec<(Material, u8)>,
}

/// Pair the i-th unshielded and i-th shielded acquisition of each
/// (material, day), ordered by id. Unmatched acquisitions are reported.
pub fn pair_acquisitions(shielded: &[Acquisition], unshielded: &[Acquisition]) -> Result<PairingResult, IngestError> {
    if shielded.is_empty() || unshielded.is_empty() {
        return Err(IngestError::Manifest("pairing needs shielded and unshielded acquisitions".into()));
    }
    type Groups<'a> = BTreeMap<(Material, u8), Vec<&'a Acquisition>>;
    fn group_by<'a>(acqs: &'a [Acquisition]) -> Groups<'a> {
        let mut g: Groups<'a> = BTreeMap::new();
        for a in acqs {
            g.entry((a.material, a.day)).or_default().push(a);
        }
        for v in g.values_mut() {
            v.sort_by(|a, b| a.id.cmp(&b.id));
        }
        g
    }
    let s_groups = group_by(shielded);
    let u_groups = group_by(unshielded);
    let keys: BTreeSet<(Material, u8)> = s_groups.keys().chain(u_groups.keys()).copied().collect();

    let mut result = PairingResult::default();
    for key in keys {
        let s = s_groups.get(&key).map(Vec::as_slice).unwrap_or(&[]);
        let u = u_groups.get(&key).map(Vec::as_slice).unwrap_or(&[]);
        if s.is_empty() || u.is_empty() {
            result.no_counterpart.push(key);
        }
        for (clean, noisy) in s.iter().zip(u.iter()) {
            let (clean_amp, clean_scale) = clean.normalized_amplitudes()?;
            let (noisy_amp, noisy_scale) = noisy.normalized_amplitudes()?;
            result.pairs.push(PairedSample {
                noisy: noisy_amp,
                clean: clean_amp,
                noisy_scale,
                clean_scale,
                material: key.0,
                day: key.1,
                noisy_id: noisy.id.clone(),
                clean_id: clean.id.clone(),
            });
        }
        let n = s.len().min(u.len());
        for a in s[n..].iter().chain(u[n..].iter()) {
            result.leftovers.push(Leftover {
                id: a.id.clone(),
                material: a.material,
                condition: a.condition,
                day: a.day,
            });
        }
    }
    Ok(result)
}

/// Validate, load and pair the dataset described by a manifest file.
pub fn load_paired_dataset(manifest_path: &Path) -> Result<(ValidationReport, PairingResult), IngestError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let report = validate_dataset(&manifest, base);
    if !report.missing.is_empty() {
        return Err(IngestError::Manifest(format!("{} listed files are missing", report.missing.len())));
    }
    let acqs = load_dataset(&manifest, base)?;
    let (shielded, unshielded): (Vec<_>, Vec<_>) = acqs.into_iter().partition(|a| a.condition == Condition::Shielded);
    let pairs = pair_acquisitions(&shielded, &unshielded)?;
    Ok((report, pairs))
}

pub const AMP_LINES_TAG: &str = "amp-lines";

/// Write an amplitude matrix in the `amp-lines` v1 text format:
///
/// ```text
/// amp-lines,1,<packets>,<subcarriers>
/// scale,<min>,<max>
/// <v0>,<v1>,...
/// ```
///
/// Values use the shortest round-tripping decimal form.
pub fn write_amp_lines(amp: &AmplitudeMatrix, scale: ScaleRecord) -> String {
    let mut out =
        format!("{AMP_LINES_TAG},1,{},{}\nscale,{:?},{:?}\n", amp.packets(), amp.subcarriers(), scale.min, scale.max);
    for row in amp.values().rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_amp_lines(text: &str) -> Result<(AmplitudeMatrix, ScaleRecord), IngestError> {
    let bad = |line: usize, reason: &str| IngestError::MalformedLine { line, reason: reason.to_string() };
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let h: Vec<&str> = header.split(',').collect();
    if h.len() != 4 || h[0] != AMP_LINES_TAG || h[1] != "1" {
        return Err(IngestError::BadHeader(header.to_string()));
    }
    let dims = |s: &str| s.parse::<usize>().map_err(|_| IngestError::BadHeader(header.to_string()));
    let (rows, cols) = (dims(h[2])?, dims(h[3])?);
    let scale_line = lines.next().ok_or_else(|| bad(2, "missing scale record"))?;
    let sc: Vec<&str> = scale_line.split(',').collect();
    let num = |s: &str, line: usize| s.trim().parse::<f64>().map_err(|_| bad(line, &format!("not a number: {s:?}")));
    if sc.len() != 3 || sc[0] != "scale" {
        return Err(bad(2, "expected scale,<min>,<max>"));
    }
    let scale = ScaleRecord { min: num(sc[1], 2)?, max: num(sc[2], 2)? };
    let mut values = Vec::with_capacity(rows * cols);
    let mut n = 0;
    for (i, line) in lines.enumerate() {
        let line_no = i + 3;
        let before = values.len();
        for f in line.split(',') {
            values.push(num(f, line_no)?);
        }
        if values.len() - before != cols {
            return Err(bad(line_no, &format!("expected {cols} values")));
        }
        n += 1;
    }
    if n != rows {
        return Err(bad(n + 2, &format!("expected {rows} rows, found {n}")));
    }
    let arr = ndarray::Array2::from_shape_vec((rows, cols), values).expect("row lengths checked");
    Ok((AmplitudeMatrix::new(arr), scale))
}
