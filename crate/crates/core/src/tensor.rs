//! Shapes, ring-element tensors and the clear tensor kernels.
//!
//! Everything here is plain `Z_2^64` arithmetic on row-major buffers. The
//! same kernels serve three masters: the secure gates (for their public-`Δ`
//! terms), the dealer/helper service (for mask cross terms) and the clear
//! fixed-point oracle.

use crate::error::{Error, Result};
use crate::ring::RingElem;

/// Row-major tensor shape, rank 1..=4 in practice.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Shape(pub Vec<usize>);

impl Shape {
    pub fn scalar() -> Shape {
        Shape(vec![1])
    }

    pub fn vector(n: usize) -> Shape {
        Shape(vec![n])
    }

    pub fn matrix(rows: usize, cols: usize) -> Shape {
        Shape(vec![rows, cols])
    }

    pub fn chw(ch: usize, rows: usize, cols: usize) -> Shape {
        Shape(vec![ch, rows, cols])
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let strs: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", strs.join("x"))
    }
}

/// Dense row-major tensor of ring elements.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RingTensor {
    pub shape: Shape,
    pub data: Vec<RingElem>,
}

impl RingTensor {
    pub fn new(shape: Shape, data: Vec<RingElem>) -> Result<RingTensor> {
        if shape.len() != data.len() {
            return Err(Error::Shape(format!(
                "shape {} needs {} elements, got {}",
                shape,
                shape.len(),
                data.len()
            )));
        }
        Ok(RingTensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> RingTensor {
        let n = shape.len();
        RingTensor {
            shape,
            data: vec![RingElem::ZERO; n],
        }
    }

    pub fn scalar(v: RingElem) -> RingTensor {
        RingTensor {
            shape: Shape::scalar(),
            data: vec![v],
        }
    }

    pub fn from_u64(shape: Shape, vals: &[u64]) -> Result<RingTensor> {
        RingTensor::new(shape, vals.iter().map(|&v| RingElem(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, shape: Shape) -> Result<RingTensor> {
        if shape.len() != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {} elements to {}",
                self.data.len(),
                shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(RingElem) -> RingElem) -> RingTensor {
        RingTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &RingTensor, f: impl Fn(RingElem, RingElem) -> RingElem) -> Result<RingTensor> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "elementwise op on {} vs {}",
                self.shape, other.shape
            )));
        }
        Ok(RingTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &RingTensor) -> Result<RingTensor> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RingTensor) -> Result<RingTensor> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &RingTensor) -> Result<RingTensor> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn negate(&self) -> RingTensor {
        self.map(|x| -x)
    }

    pub fn scale(&self, c: RingElem) -> RingTensor {
        self.map(|x| x * c)
    }
}

/// `a (m×k) · b (k×n)`, wrapping accumulation. Rank-1 operands are
/// promoted: the left to a row vector, the right to a column vector.
pub fn matmul(a: &RingTensor, b: &RingTensor) -> Result<RingTensor> {
    let (m, k1) = match a.shape.dims() {
        [n] => (1, *n),
        [m, k] => (*m, *k),
        _ => return Err(Error::Shape(format!("matmul lhs rank {} unsupported", a.shape.rank()))),
    };
    let (k2, n) = match b.shape.dims() {
        [k] => (*k, 1),
        [k, n] => (*k, *n),
        _ => return Err(Error::Shape(format!("matmul rhs rank {} unsupported", b.shape.rank()))),
    };
    if k1 != k2 {
        return Err(Error::Shape(format!(
            "matmul inner dims disagree: {} vs {}",
            a.shape, b.shape
        )));
    }
    let mut out = vec![RingElem::ZERO; m * n];
    for i in 0..m {
        for l in 0..k1 {
            let av = a.data[i * k1 + l];
            if av == RingElem::ZERO {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += av * b.data[l * n + j];
            }
        }
    }
    let shape = match (a.shape.rank(), b.shape.rank()) {
        (1, 2) => Shape::vector(n),
        (2, 1) => Shape::vector(m),
        (1, 1) => Shape::scalar(),
        _ => Shape::matrix(m, n),
    };
    RingTensor::new(shape, out)
}

/// Convolution geometry: kernel sizes, strides and per-edge padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvParams {
    pub n_ker: usize,
    pub k_row: usize,
    pub k_col: usize,
    pub i_ch: usize,
    /// `[s_row, s_col]`
    pub strides: [usize; 2],
    /// `[top, bottom, left, right]`
    pub padding: [usize; 4],
}

impl ConvParams {
    pub fn validate(&self) -> Result<()> {
        if self.strides[0] < 1 || self.strides[1] < 1 {
            return Err(Error::Shape("strides must be >= 1".into()));
        }
        if self.n_ker < 1 || self.i_ch < 1 || self.k_row < 1 || self.k_col < 1 {
            return Err(Error::Shape("kernel geometry must be >= 1".into()));
        }
        Ok(())
    }

    pub fn kernel_shape(&self) -> Shape {
        Shape(vec![self.n_ker, self.i_ch, self.k_row, self.k_col])
    }
}

/// Output dimensions `(o_ch, o_row, o_col)` of a convolution:
/// `o_row = ⌊(i_row + p_top + p_bottom − k_row) / s_row⌋ + 1`, columns
/// analogously, and `o_ch = n_ker`.
pub fn conv_output_dims(in_dims: (usize, usize, usize), p: &ConvParams) -> Result<(usize, usize, usize)> {
    p.validate()?;
    let (i_ch, i_row, i_col) = in_dims;
    if i_ch != p.i_ch {
        return Err(Error::Shape(format!(
            "input has {} channels, kernels expect {}",
            i_ch, p.i_ch
        )));
    }
    let padded_r = i_row + p.padding[0] + p.padding[1];
    let padded_c = i_col + p.padding[2] + p.padding[3];
    if p.k_row > padded_r || p.k_col > padded_c {
        return Err(Error::Shape(format!(
            "kernel {}x{} larger than padded input {}x{}",
            p.k_row, p.k_col, padded_r, padded_c
        )));
    }
    let o_row = (padded_r - p.k_row) / p.strides[0] + 1;
    let o_col = (padded_c - p.k_col) / p.strides[1] + 1;
    Ok((p.n_ker, o_row, o_col))
}

/// Total multiplications in the convolution: one inner product of
/// `i_ch·k_row·k_col` terms per output element.
pub fn mult_count_conv(in_dims: (usize, usize, usize), p: &ConvParams) -> Result<u64> {
    let (o_ch, o_row, o_col) = conv_output_dims(in_dims, p)?;
    Ok((o_ch * o_row * o_col) as u64 * (p.i_ch * p.k_row * p.k_col) as u64)
}

/// 2-D convolution of `x (i_ch, i_row, i_col)` with `kernels
/// (n_ker, i_ch, k_row, k_col)`, zero padding, wrapping accumulation.
pub fn conv2d(x: &RingTensor, kernels: &RingTensor, p: &ConvParams) -> Result<RingTensor> {
    let in_dims = match x.shape.dims() {
        [c, r, col] => (*c, *r, *col),
        _ => return Err(Error::Shape(format!("conv input rank {} != 3", x.shape.rank()))),
    };
    if kernels.shape != p.kernel_shape() {
        return Err(Error::Shape(format!(
            "kernel tensor {} does not match params {}",
            kernels.shape,
            p.kernel_shape()
        )));
    }
    let (o_ch, o_row, o_col) = conv_output_dims(in_dims, p)?;
    let (i_ch, i_row, i_col) = in_dims;
    let (p_top, p_left) = (p.padding[0] as isize, p.padding[2] as isize);
    let mut out = vec![RingElem::ZERO; o_ch * o_row * o_col];
    for k in 0..o_ch {
        for orow in 0..o_row {
            for ocol in 0..o_col {
                let mut acc = RingElem::ZERO;
                let base_r = (orow * p.strides[0]) as isize - p_top;
                let base_c = (ocol * p.strides[1]) as isize - p_left;
                for c in 0..i_ch {
                    for kr in 0..p.k_row {
                        let ir = base_r + kr as isize;
                        if ir < 0 || ir >= i_row as isize {
                            continue;
                        }
                        for kc in 0..p.k_col {
                            let icol = base_c + kc as isize;
                            if icol < 0 || icol >= i_col as isize {
                                continue;
                            }
                            let xv = x.data[(c * i_row + ir as usize) * i_col + icol as usize];
                            let kv = kernels.data[((k * i_ch + c) * p.k_row + kr) * p.k_col + kc];
                            acc += xv * kv;
                        }
                    }
                }
                out[(k * o_row + orow) * o_col + ocol] = acc;
            }
        }
    }
    RingTensor::new(Shape::chw(o_ch, o_row, o_col), out)
}

/// Materialise zero padding around a `(ch, rows, cols)` tensor.
pub fn pad_chw(x: &RingTensor, padding: [usize; 4]) -> Result<RingTensor> {
    let (ch, rows, cols) = match x.shape.dims() {
        [c, r, col] => (*c, *r, *col),
        _ => return Err(Error::Shape("pad_chw expects rank 3".into())),
    };
    let (pt, pb, pl, pr) = (padding[0], padding[1], padding[2], padding[3]);
    let (nr, nc) = (rows + pt + pb, cols + pl + pr);
    let mut out = RingTensor::zeros(Shape::chw(ch, nr, nc));
    for c in 0..ch {
        for r in 0..rows {
            let src = (c * rows + r) * cols;
            let dst = (c * nr + r + pt) * nc + pl;
            out.data[dst..dst + cols].copy_from_slice(&x.data[src..src + cols]);
        }
    }
    Ok(out)
}

/// Copy rows `[start, end)` (0-based) of every channel.
pub fn slice_rows_chw(x: &RingTensor, start: usize, end: usize) -> Result<RingTensor> {
    let (ch, rows, cols) = match x.shape.dims() {
        [c, r, col] => (*c, *r, *col),
        _ => return Err(Error::Shape("slice_rows_chw expects rank 3".into())),
    };
    if start >= end || end > rows {
        return Err(Error::Shape(format!(
            "row slice {}..{} out of 0..{}",
            start, end, rows
        )));
    }
    let n = end - start;
    let mut out = RingTensor::zeros(Shape::chw(ch, n, cols));
    for c in 0..ch {
        let src = (c * rows + start) * cols;
        let dst = c * n * cols;
        out.data[dst..dst + n * cols].copy_from_slice(&x.data[src..src + n * cols]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Shape, vals: &[u64]) -> RingTensor {
        RingTensor::from_u64(shape, vals).unwrap()
    }

    #[test]
    fn conv_dims_mnist_layer1() {
        // 1x28x28, 5 kernels of 5x5, pad [1,0,1,0], strides [2,2]
        let p = ConvParams {
            n_ker: 5,
            k_row: 5,
            k_col: 5,
            i_ch: 1,
            strides: [2, 2],
            padding: [1, 0, 1, 0],
        };
        assert_eq!(conv_output_dims((1, 28, 28), &p).unwrap(), (5, 13, 13));
        assert_eq!(mult_count_conv((1, 28, 28), &p).unwrap(), 21_125);
    }

    #[test]
    fn conv_dims_mnist_layer2() {
        let p = ConvParams {
            n_ker: 3,
            k_row: 4,
            k_col: 4,
            i_ch: 5,
            strides: [2, 2],
            padding: [1, 0, 1, 0],
        };
        assert_eq!(conv_output_dims((5, 13, 13), &p).unwrap(), (3, 6, 6));
        assert_eq!(mult_count_conv((5, 13, 13), &p).unwrap(), 8_640);
    }

    #[test]
    fn conv_dims_exact_fit() {
        let p = ConvParams {
            n_ker: 1,
            k_row: 5,
            k_col: 5,
            i_ch: 1,
            strides: [1, 1],
            padding: [0, 0, 0, 0],
        };
        assert_eq!(conv_output_dims((1, 5, 5), &p).unwrap(), (1, 1, 1));
        assert_eq!(mult_count_conv((1, 5, 5), &p).unwrap(), 25);
    }

    #[test]
    fn conv_kernel_too_large() {
        let p = ConvParams {
            n_ker: 1,
            k_row: 6,
            k_col: 6,
            i_ch: 1,
            strides: [1, 1],
            padding: [0, 0, 0, 0],
        };
        assert!(conv_output_dims((1, 5, 5), &p).is_err());
    }

    #[test]
    fn matmul_small() {
        let a = t(Shape::matrix(2, 2), &[1, 2, 3, 4]);
        let b = t(Shape::vector(2), &[5, 6]);
        let y = matmul(&a, &b).unwrap();
        assert_eq!(y.data, vec![RingElem(17), RingElem(39)]);
    }

    #[test]
    fn matmul_wraps() {
        let a = t(Shape::matrix(1, 1), &[u64::MAX]);
        let b = t(Shape::matrix(1, 1), &[2]);
        assert_eq!(matmul(&a, &b).unwrap().data[0], RingElem(u64::MAX - 1));
    }

    #[test]
    fn conv_identity_kernel() {
        let x = t(Shape::chw(1, 3, 3), &[1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let k = t(Shape(vec![1, 1, 1, 1]), &[1]);
        let p = ConvParams {
            n_ker: 1,
            k_row: 1,
            k_col: 1,
            i_ch: 1,
            strides: [1, 1],
            padding: [0, 0, 0, 0],
        };
        assert_eq!(conv2d(&x, &k, &p).unwrap().data, x.data);
    }

    #[test]
    fn conv_matches_padded_slide() {
        // Independent check: materialise padding, then slide without bounds logic.
        let p = ConvParams {
            n_ker: 2,
            k_row: 3,
            k_col: 2,
            i_ch: 2,
            strides: [2, 1],
            padding: [1, 2, 0, 1],
        };
        let x = RingTensor::new(
            Shape::chw(2, 4, 3),
            (0..24).map(|i| RingElem(i as u64 * 7 + 3)).collect(),
        )
        .unwrap();
        let k = RingTensor::new(
            p.kernel_shape(),
            (0..24).map(|i| RingElem(i as u64 * 11 + 1)).collect(),
        )
        .unwrap();
        let fast = conv2d(&x, &k, &p).unwrap();

        let padded = pad_chw(&x, p.padding).unwrap();
        let (ich, prow, pcol) = (2usize, 4 + 3, 3 + 1);
        let (och, orow, ocol) = conv_output_dims((2, 4, 3), &p).unwrap();
        let mut slow = RingTensor::zeros(Shape::chw(och, orow, ocol));
        for kk in 0..och {
            for orr in 0..orow {
                for occ in 0..ocol {
                    let mut acc = RingElem::ZERO;
                    for c in 0..ich {
                        for kr in 0..p.k_row {
                            for kc in 0..p.k_col {
                                let r = orr * p.strides[0] + kr;
                                let col = occ * p.strides[1] + kc;
                                acc += padded.data[(c * prow + r) * pcol + col]
                                    * k.data[((kk * ich + c) * p.k_row + kr) * p.k_col + kc];
                            }
                        }
                    }
                    slow.data[(kk * orow + orr) * ocol + occ] = acc;
                }
            }
        }
        assert_eq!(fast, slow);
    }

    #[test]
    fn slice_and_pad_roundtrip() {
        let x = t(Shape::chw(1, 2, 2), &[1, 2, 3, 4]);
        let padded = pad_chw(&x, [1, 0, 1, 0]).unwrap();
        assert_eq!(padded.shape, Shape::chw(1, 3, 3));
        assert_eq!(
            padded.data.iter().map(|e| e.0).collect::<Vec<_>>(),
            vec![0, 0, 0, 0, 1, 2, 0, 3, 4]
        );
        let rows = slice_rows_chw(&padded, 1, 3).unwrap();
        assert_eq!(
            rows.data.iter().map(|e| e.0).collect::<Vec<_>>(),
            vec![0, 1, 2, 0, 3, 4]
        );
    }
}
