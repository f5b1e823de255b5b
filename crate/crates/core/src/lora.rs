//! Low-rank adapters on a frozen linear layer.
//!
//! The adapted map is `y = W x + (alpha / r) * B (A x)` with `A: r x d_in` and
//! `B: d_out x r`. Merging folds the adapter into `W`.

use std::io::{self, Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoraError {
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("bad adapter magic {0:?}, expected \"ATLA\"")]
    BadMagic([u8; 4]),
    #[error("unsupported adapter version {0}")]
    UnsupportedVersion(u16),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Frozen `d_out x d_in` weight.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseLinear {
    weight: DMatrix<f64>,
}

impl BaseLinear {
    pub fn new(weight: DMatrix<f64>) -> Result<Self, LoraError> {
        if weight.iter().any(|v| !v.is_finite()) {
            return Err(LoraError::NonFinite("W"));
        }
        Ok(Self { weight })
    }

    pub fn weight(&self) -> &DMatrix<f64> {
        &self.weight
    }

    pub fn d_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>, LoraError> {
        check_len("x", x.len(), self.d_in())?;
        Ok(&self.weight * x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    alpha: f64,
}

impl LoraAdapter {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, alpha: f64) -> Result<Self, LoraError> {
        if a.nrows() == 0 {
            return Err(LoraError::ZeroRank);
        }
        if b.ncols() != a.nrows() {
            return Err(LoraError::Shape(format!(
                "A is {}x{} but B is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(LoraError::NonFinite("A"));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(LoraError::NonFinite("B"));
        }
        if !alpha.is_finite() {
            return Err(LoraError::NonFinite("alpha"));
        }
        Ok(Self { a, b, alpha })
    }

    /// `B = 0` and `A` uniform in `[-init, init]`: the adapted layer starts
    /// out identical to the base.
    pub fn init<R: Rng + ?Sized>(d_in: usize, d_out: usize, rank: usize, alpha: f64, init: f64, rng: &mut R) -> Result<Self, LoraError> {
        if rank == 0 {
            return Err(LoraError::ZeroRank);
        }
        let a = DMatrix::from_fn(rank, d_in, |_, _| rng.random_range(-init..=init));
        Self::new(a, DMatrix::zeros(d_out, rank), alpha)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn rank(&self) -> usize {
        self.a.nrows()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scaling(&self) -> f64 {
        self.alpha / self.rank() as f64
    }

    pub fn d_in(&self) -> usize {
        self.a.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.b.nrows()
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }

    /// `scaling * B A`, the dense update this adapter represents.
    pub fn delta(&self) -> DMatrix<f64> {
        (&self.b * &self.a) * self.scaling()
    }

    fn check_base(&self, base: &BaseLinear) -> Result<(), LoraError> {
        if base.d_in() != self.d_in() || base.d_out() != self.d_out() {
            return Err(LoraError::Shape(format!(
                "W is {}x{} but adapter maps {} -> {}",
                base.d_out(),
                base.d_in(),
                self.d_in(),
                self.d_out()
            )));
        }
        Ok(())
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<(), LoraError> {
    if got != want {
        return Err(LoraError::Shape(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

/// `W x + scaling * B (A x)` without forming `B A`.
pub fn lora_forward(base: &BaseLinear, ad: &LoraAdapter, x: &DVector<f64>) -> Result<DVector<f64>, LoraError> {
    ad.check_base(base)?;
    let y = base.forward(x)?;
    let ax = &ad.a * x;
    Ok(y + (&ad.b * ax) * ad.scaling())
}

/// `W' = W + scaling * B A`.
pub fn merge(base: &BaseLinear, ad: &LoraAdapter) -> Result<BaseLinear, LoraError> {
    ad.check_base(base)?;
    BaseLinear::new(&base.weight + ad.delta())
}

/// Trainable parameters added by rank-`r` adapters on each `(d_in, d_out)`.
pub fn param_count(specs: &[(usize, usize)], rank: usize) -> u64 {
    specs
        .iter()
        .map(|&(d_in, d_out)| rank as u64 * (d_in as u64 + d_out as u64))
        .sum()
}

/// Gradients of `loss = upstream . y` with respect to `A` and `B`.
#[derive(Debug, Clone)]
pub struct AdapterGrads {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

pub fn analytic_grads(ad: &LoraAdapter, x: &DVector<f64>, upstream: &DVector<f64>) -> AdapterGrads {
    let s = ad.scaling();
    let ax = &ad.a * x;
    let bt_up = ad.b.transpose() * upstream;
    AdapterGrads {
        a: (bt_up * x.transpose()) * s,
        b: (upstream * ax.transpose()) * s,
    }
}

pub const GRAD_CHECK_STEP: f64 = 1e-4;

/// Relative errors below this magnitude are measured against it instead.
const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Compares [`analytic_grads`] with central finite differences (step
/// [`GRAD_CHECK_STEP`]) and returns the largest relative error over all
/// entries of `A` and `B`.
pub fn grad_check(base: &BaseLinear, ad: &LoraAdapter, x: &DVector<f64>, upstream: &DVector<f64>) -> Result<f64, LoraError> {
    ad.check_base(base)?;
    check_len("x", x.len(), base.d_in())?;
    check_len("upstream", upstream.len(), base.d_out())?;
    let grads = analytic_grads(ad, x, upstream);
    let loss = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> f64 {
        let s = ad.alpha / a.nrows() as f64;
        let y = &base.weight * x + (b * (a * x)) * s;
        upstream.dot(&y)
    };
    let h = GRAD_CHECK_STEP;
    let mut worst = 0.0f64;
    let mut a = ad.a.clone();
    for i in 0..a.len() {
        let orig = a[i];
        a[i] = orig + h;
        let plus = loss(&a, &ad.b);
        a[i] = orig - h;
        let minus = loss(&a, &ad.b);
        a[i] = orig;
        worst = worst.max(rel_err(grads.a[i], (plus - minus) / (2.0 * h)));
    }
    let mut b = ad.b.clone();
    for i in 0..b.len() {
        let orig = b[i];
        b[i] = orig + h;
        let plus = loss(&ad.a, &b);
        b[i] = orig - h;
        let minus = loss(&ad.a, &b);
        b[i] = orig;
        worst = worst.max(rel_err(grads.b[i], (plus - minus) / (2.0 * h)));
    }
    Ok(worst)
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR)
}

/// Adapter file layout (little-endian): magic `ATLA`, version u16 = 1,
/// reserved u16, rank u32, d_in u32, d_out u32, alpha f64, then `A`
/// (`rank x d_in`) and `B` (`d_out x rank`) as row-major f64.
pub const ADAPTER_MAGIC: [u8; 4] = *b"ATLA";
pub const ADAPTER_HEADER_LEN: usize = 28;

pub fn write_adapter<W: Write>(ad: &LoraAdapter, mut sink: W) -> Result<u64, LoraError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&ADAPTER_MAGIC);
    buf.extend_from_slice(&1u16.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&(ad.rank() as u32).to_le_bytes());
    buf.extend_from_slice(&(ad.d_in() as u32).to_le_bytes());
    buf.extend_from_slice(&(ad.d_out() as u32).to_le_bytes());
    buf.extend_from_slice(&ad.alpha.to_le_bytes());
    for m in [&ad.a, &ad.b] {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                buf.extend_from_slice(&m[(r, c)].to_le_bytes());
            }
        }
    }
    sink.write_all(&buf)?;
    Ok(buf.len() as u64)
}

pub fn read_adapter<R: Read>(mut source: R) -> Result<LoraAdapter, LoraError> {
    let mut head = [0u8; ADAPTER_HEADER_LEN];
    source.read_exact(&mut head)?;
    let magic: [u8; 4] = head[0..4].try_into().unwrap();
    if magic != ADAPTER_MAGIC {
        return Err(LoraError::BadMagic(magic));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != 1 {
        return Err(LoraError::UnsupportedVersion(version));
    }
    let u = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap()) as usize;
    let (rank, d_in, d_out) = (u(8), u(12), u(16));
    let alpha = f64::from_le_bytes(head[20..28].try_into().unwrap());
    let mut read_matrix = |rows: usize, cols: usize| -> Result<DMatrix<f64>, LoraError> {
        let mut bytes = vec![0u8; rows * cols * 8];
        source.read_exact(&mut bytes)?;
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(DMatrix::from_row_slice(rows, cols, &vals))
    };
    let a = read_matrix(rank, d_in)?;
    let b = read_matrix(d_out, rank)?;
    LoraAdapter::new(a, b, alpha)
}
