use crate::{NnError, Real, Result};

/// Dense `(batch, channels, height, width)` array with an optional gradient
/// slot of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: [usize; 4],
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(NnError::shape(
                "tensor",
                format!("shape {shape:?} needs {len} values, got {}", data.len()),
            ));
        }
        Ok(Tensor {
            shape,
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: [usize; 4], value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.iter().product()],
            grad: None,
        }
    }

    /// Builds a tensor from `f(n, c, h, w)` in row-major order.
    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let [n, c, h, w] = shape;
        let mut data = Vec::with_capacity(n * c * h * w);
        for i in 0..n {
            for j in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(i, j, y, x));
                    }
                }
            }
        }
        Tensor {
            shape,
            data,
            grad: None,
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Vec<T>) -> Result<()> {
        if grad.len() != self.data.len() {
            return Err(NnError::shape(
                "set_grad",
                format!("gradient has {} values, tensor {}", grad.len(), self.data.len()),
            ));
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        let [_, cs, hs, ws] = self.shape;
        ((n * cs + c) * hs + h) * ws + w
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.index(n, c, h, w)]
    }

    pub fn map(&self, f: impl FnMut(T) -> T) -> Tensor<T> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().copied().map(f).collect(),
            grad: None,
        }
    }

    /// Converts the element type, rounding where needed.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::of(v.to_f64_lossless())).collect(),
            grad: None,
        }
    }

    /// Channels `start..start + len` of every batch item.
    pub fn narrow_channels(&self, start: usize, len: usize) -> Result<Tensor<T>> {
        let [n, c, h, w] = self.shape;
        if start + len > c {
            return Err(NnError::shape(
                "narrow_channels",
                format!("range {start}..{} exceeds {c} channels", start + len),
            ));
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * len * plane);
        for i in 0..n {
            let base = (i * c + start) * plane;
            data.extend_from_slice(&self.data[base..base + len * plane]);
        }
        Tensor::new([n, len, h, w], data)
    }

    /// Channel-wise concatenation, preserving order.
    pub fn concat_channels(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
        let first = parts.first().ok_or_else(|| NnError::shape("concat", "no inputs"))?;
        let [n, _, h, w] = first.shape;
        let mut total = 0;
        for p in parts {
            let [pn, pc, ph, pw] = p.shape;
            if (pn, ph, pw) != (n, h, w) {
                return Err(NnError::shape(
                    "concat",
                    format!("{:?} does not match batch/spatial dims of {:?}", p.shape, first.shape),
                ));
            }
            total += pc;
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * total * plane);
        for i in 0..n {
            for p in parts {
                let pc = p.shape[1];
                let base = i * pc * plane;
                data.extend_from_slice(&p.data[base..base + pc * plane]);
            }
        }
        Tensor::new([n, total, h, w], data)
    }

    /// Stacks single items (or batches) along the batch axis.
    pub fn stack_batch(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
        let first = parts
            .first()
            .ok_or_else(|| NnError::shape("stack_batch", "no inputs"))?;
        let [_, c, h, w] = first.shape;
        let mut n = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.shape[1..] != [c, h, w] {
                return Err(NnError::shape(
                    "stack_batch",
                    format!("{:?} does not match {:?}", p.shape, first.shape),
                ));
            }
            n += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        Tensor::new([n, c, h, w], data)
    }

    /// Batch item `i` as a one-item tensor.
    pub fn item(&self, i: usize) -> Result<Tensor<T>> {
        let [n, c, h, w] = self.shape;
        if i >= n {
            return Err(NnError::shape("item", format!("index {i} >= batch {n}")));
        }
        let len = c * h * w;
        Tensor::new([1, c, h, w], self.data[i * len..(i + 1) * len].to_vec())
    }
}
