//! Channel frequency response math: CFR estimation, CSI assembly, amplitude
//! extraction, data-subcarrier selection and min-max scaling.
//!
//! Everything here is a pure function of its inputs.

use ndarray::{Array2, ArrayView1, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One complex CFR sample (I, Q).
pub type ComplexSample = Complex64;

/// Subcarriers reported per packet.
pub const TOTAL_SUBCARRIERS: usize = 64;
/// Subcarriers that carry data after guard, DC and pilot removal.
pub const DATA_SUBCARRIERS: usize = 52;

/// Column indices (0..64, index = subcarrier offset + 32) removed by
/// [`select_data_subcarriers`]: guards at offsets -32..-29 and 29..31, DC at
/// offset 0, pilots at offsets -21, -7, +7, +21 (HT20 layout).
pub const NULL_AND_PILOT_INDICES: [usize; 12] = [0, 1, 2, 3, 11, 25, 32, 39, 53, 61, 62, 63];

/// Column indices kept by [`select_data_subcarriers`], ascending.
pub fn data_subcarrier_indices() -> [usize; DATA_SUBCARRIERS] {
    let mut out = [0usize; DATA_SUBCARRIERS];
    let mut n = 0;
    for k in 0..TOTAL_SUBCARRIERS {
        if !NULL_AND_PILOT_INDICES.contains(&k) {
            out[n] = k;
            n += 1;
        }
    }
    debug_assert_eq!(n, DATA_SUBCARRIERS);
    out
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsiError {
    #[error("transmitted symbol on subcarrier {0} is zero")]
    DivisionByZeroSubcarrier(usize),
    #[error("received and transmitted vectors differ in length ({received} vs {transmitted})")]
    LengthMismatch { received: usize, transmitted: usize },
    #[error("frame {frame} has {found} subcarriers, expected {expected}")]
    RaggedFrames { frame: usize, expected: usize, found: usize },
    #[error("no frames to assemble")]
    Empty,
    #[error("expected {expected} subcarrier columns, found {found}")]
    WrongWidth { expected: usize, found: usize },
    #[error("amplitude range is degenerate (all entries equal {0})")]
    DegenerateRange(f64),
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// One packet's channel frequency response over `K` subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct CfrVector(pub Vec<ComplexSample>);

impl CfrVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[ComplexSample] {
        &self.0
    }
}

impl From<Vec<ComplexSample>> for CfrVector {
    fn from(v: Vec<ComplexSample>) -> Self {
        CfrVector(v)
    }
}

/// Packets x subcarriers matrix of complex CFR values.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMatrix {
    data: Array2<ComplexSample>,
}

impl CsiMatrix {
    pub fn from_array(data: Array2<ComplexSample>) -> Self {
        CsiMatrix { data }
    }

    pub fn packets(&self) -> usize {
        self.data.nrows()
    }

    pub fn subcarriers(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_array(&self) -> &Array2<ComplexSample> {
        &self.data
    }

    pub fn into_array(self) -> Array2<ComplexSample> {
        self.data
    }

    pub fn row(&self, p: usize) -> CfrVector {
        CfrVector(self.data.row(p).to_vec())
    }

    pub fn rows(&self) -> impl Iterator<Item = CfrVector> + '_ {
        self.data.outer_iter().map(|r| CfrVector(r.to_vec()))
    }

    /// Elementwise magnitude of every CFR value.
    pub fn amplitudes(&self) -> AmplitudeMatrix {
        AmplitudeMatrix(self.data.mapv(|h| h.norm()))
    }
}

/// Non-negative real matrix of CFR magnitudes, packets x subcarriers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeMatrix(pub Array2<f64>);

impl AmplitudeMatrix {
    pub fn new(values: Array2<f64>) -> Self {
        AmplitudeMatrix(values)
    }

    pub fn packets(&self) -> usize {
        self.0.nrows()
    }

    pub fn subcarriers(&self) -> usize {
        self.0.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// First `n` packets (all of them when `n` exceeds the packet count).
    pub fn head(&self, n: usize) -> AmplitudeMatrix {
        let n = n.min(self.packets());
        AmplitudeMatrix(self.0.slice(ndarray::s![..n, ..]).to_owned())
    }

    pub fn check_finite(&self) -> Result<(), CsiError> {
        for ((row, col), v) in self.0.indexed_iter() {
            if !v.is_finite() {
                return Err(CsiError::NonFinite { row, col });
            }
        }
        Ok(())
    }
}

/// Per-acquisition scalars used by min-max scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub min: f64,
    pub max: f64,
}

impl ScaleRecord {
    pub fn is_degenerate(&self) -> bool {
        self.max <= self.min
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

/// Channel frequency response `H_k = Y_k / X_k` for every subcarrier.
pub fn cfr_from_symbols(received: &CfrVector, transmitted: &CfrVector) -> Result<CfrVector, CsiError> {
    if received.len() != transmitted.len() {
        return Err(CsiError::LengthMismatch { received: received.len(), transmitted: transmitted.len() });
    }
    received
        .0
        .iter()
        .zip(&transmitted.0)
        .enumerate()
        .map(|(k, (y, x))| if x.norm_sqr() == 0.0 { Err(CsiError::DivisionByZeroSubcarrier(k)) } else { Ok(y / x) })
        .collect::<Result<Vec<_>, _>>()
        .map(CfrVector)
}

/// `|H_k| = sqrt(Re^2 + Im^2)` for each subcarrier.
pub fn amplitude(cfr: &CfrVector) -> Vec<f64> {
    cfr.0.iter().map(|h| h.re.hypot(h.im)).collect()
}

/// Stack per-packet CFR vectors into an `n x K` matrix, preserving order.
pub fn assemble_csi(frames: &[CfrVector]) -> Result<CsiMatrix, CsiError> {
    let first = frames.first().ok_or(CsiError::Empty)?;
    let width = first.len();
    let mut data = Array2::<ComplexSample>::zeros((frames.len(), width));
    for (p, frame) in frames.iter().enumerate() {
        if frame.len() != width {
            return Err(CsiError::RaggedFrames { frame: p, expected: width, found: frame.len() });
        }
        data.row_mut(p).assign(&ArrayView1::from(frame.as_slice()));
    }
    Ok(CsiMatrix { data })
}

/// Drop guard, DC and pilot columns from a 64-wide CSI matrix.
pub fn select_data_subcarriers(csi: &CsiMatrix) -> Result<CsiMatrix, CsiError> {
    if csi.subcarriers() != TOTAL_SUBCARRIERS {
        return Err(CsiError::WrongWidth { expected: TOTAL_SUBCARRIERS, found: csi.subcarriers() });
    }
    let keep = data_subcarrier_indices();
    Ok(CsiMatrix { data: csi.data.select(Axis(1), &keep) })
}

/// Scale the whole matrix into [0, 1] with one (min, max) pair.
///
/// A constant matrix yields [`CsiError::DegenerateRange`]; use
/// [`normalize_minmax_lenient`] to get the all-zeros result instead.
pub fn normalize_minmax(amp: &AmplitudeMatrix) -> Result<(AmplitudeMatrix, ScaleRecord), CsiError> {
    let (out, scale) = normalize_minmax_lenient(amp)?;
    if scale.is_degenerate() {
        return Err(CsiError::DegenerateRange(scale.min));
    }
    Ok((out, scale))
}

/// Like [`normalize_minmax`] but a constant matrix maps to all zeros; the
/// returned [`ScaleRecord`] then reports `is_degenerate()`.
pub fn normalize_minmax_lenient(amp: &AmplitudeMatrix) -> Result<(AmplitudeMatrix, ScaleRecord), CsiError> {
    amp.check_finite()?;
    if amp.0.is_empty() {
        return Err(CsiError::Empty);
    }
    let (min, max) = amp.0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let scale = ScaleRecord { min, max };
    if scale.is_degenerate() {
        return Ok((AmplitudeMatrix(Array2::zeros(amp.0.raw_dim())), scale));
    }
    let range = max - min;
    let out = amp.0.mapv(|v| ((v - min) / range).clamp(0.0, 1.0));
    Ok((AmplitudeMatrix(out), scale))
}

/// Inverse of [`normalize_minmax`].
pub fn denormalize(amp01: &AmplitudeMatrix, scale: ScaleRecord) -> AmplitudeMatrix {
    let range = scale.range().max(0.0);
    AmplitudeMatrix(amp01.0.mapv(|v| scale.min + v * range))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> ComplexSample {
        ComplexSample::new(re, im)
    }

    #[test]
    fn cfr_division_examples() {
        let h = cfr_from_symbols(&vec![c(2.0, 0.0)].into(), &vec![c(1.0, 0.0)].into()).unwrap();
        assert_eq!(h.0, vec![c(2.0, 0.0)]);
        let h = cfr_from_symbols(&vec![c(0.0, 1.0)].into(), &vec![c(0.0, 1.0)].into()).unwrap();
        assert_eq!(h.0, vec![c(1.0, 0.0)]);
        // (1 + j) / (2j) = (1 + j)(-2j) / 4 = (2 - 2j) / 4
        let h = cfr_from_symbols(&vec![c(1.0, 1.0)].into(), &vec![c(0.0, 2.0)].into()).unwrap();
        assert!((h.0[0].re - 0.5).abs() < 1e-12);
        assert!((h.0[0].im + 0.5).abs() < 1e-12);
    }

    #[test]
    fn cfr_zero_symbol_is_reported() {
        let y: CfrVector = vec![c(1.0, 0.0), c(1.0, 0.0)].into();
        let x: CfrVector = vec![c(1.0, 0.0), c(0.0, 0.0)].into();
        assert_eq!(cfr_from_symbols(&y, &x), Err(CsiError::DivisionByZeroSubcarrier(1)));
    }

    #[test]
    fn amplitude_examples() {
        assert_eq!(amplitude(&vec![c(3.0, 4.0)].into()), vec![5.0]);
        assert_eq!(amplitude(&vec![c(0.0, 0.0)].into()), vec![0.0]);
        assert_eq!(amplitude(&vec![c(1.0, 0.0), c(0.0, 1.0)].into()), vec![1.0, 1.0]);
    }

    #[test]
    fn assemble_keeps_order_and_rejects_ragged() {
        let a: CfrVector = vec![c(1.0, 0.0); 64].into();
        let b: CfrVector = vec![c(2.0, 0.0); 64].into();
        let m = assemble_csi(&[a.clone(), b.clone()]).unwrap();
        assert_eq!((m.packets(), m.subcarriers()), (2, 64));
        assert_eq!(m.row(0), a);
        assert_eq!(m.row(1), b);

        let frames: Vec<CfrVector> = (0..1000).map(|_| a.clone()).collect();
        assert_eq!(assemble_csi(&frames).unwrap().packets(), 1000);

        let short: CfrVector = vec![c(1.0, 0.0); 63].into();
        assert_eq!(assemble_csi(&[a, short]), Err(CsiError::RaggedFrames { frame: 1, expected: 64, found: 63 }));
        assert_eq!(assemble_csi(&[]), Err(CsiError::Empty));
    }

    #[test]
    fn mask_keeps_52_columns() {
        let idx = data_subcarrier_indices();
        assert_eq!(idx.len(), 52);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        for k in NULL_AND_PILOT_INDICES {
            assert!(!idx.contains(&k));
        }
    }

    #[test]
    fn select_constant_and_wrong_width() {
        let m = CsiMatrix::from_array(Array2::from_elem((1000, 64), c(0.7, 0.0)));
        let s = select_data_subcarriers(&m).unwrap();
        assert_eq!((s.packets(), s.subcarriers()), (1000, 52));
        assert!(s.as_array().iter().all(|&h| h == c(0.7, 0.0)));

        assert_eq!(select_data_subcarriers(&s), Err(CsiError::WrongWidth { expected: 64, found: 52 }));
    }

    #[test]
    fn normalize_examples() {
        let amp = AmplitudeMatrix(array![[0.0, 5.0], [10.0, 5.0]]);
        let (out, scale) = normalize_minmax(&amp).unwrap();
        assert_eq!(out.0, array![[0.0, 0.5], [1.0, 0.5]]);
        assert_eq!(scale, ScaleRecord { min: 0.0, max: 10.0 });

        let constant = AmplitudeMatrix(Array2::from_elem((3, 4), 2.5));
        assert_eq!(normalize_minmax(&constant), Err(CsiError::DegenerateRange(2.5)));
        let (zeros, flag) = normalize_minmax_lenient(&constant).unwrap();
        assert!(flag.is_degenerate());
        assert!(zeros.0.iter().all(|&v| v == 0.0));

        let unit = AmplitudeMatrix(array![[0.0, 0.25], [1.0, 0.75]]);
        assert_eq!(normalize_minmax(&unit).unwrap().0, unit);
    }

    #[test]
    fn normalize_rejects_nan() {
        let amp = AmplitudeMatrix(array![[0.0, f64::NAN]]);
        assert_eq!(normalize_minmax(&amp), Err(CsiError::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn denormalize_examples() {
        let out = denormalize(&AmplitudeMatrix(array![[0.0, 1.0]]), ScaleRecord { min: 2.0, max: 4.0 });
        assert_eq!(out.0, array![[2.0, 4.0]]);
        let out = denormalize(&AmplitudeMatrix(Array2::zeros((2, 2))), ScaleRecord { min: 5.0, max: 5.0 });
        assert!(out.0.iter().all(|&v| v == 5.0));
    }
}
