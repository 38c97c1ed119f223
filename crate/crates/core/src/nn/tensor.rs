use crate::error::{invalid, Result};

/// Dense N x C x H x W array of `f64`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self { shape, data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: [usize; 4], value: f64) -> Self {
        Self { shape, data: vec![value; shape.iter().product()] }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return invalid(format!("tensor dims must be >= 1, got {shape:?}"));
        }
        if data.len() != shape.iter().product::<usize>() {
            return invalid(format!(
                "tensor of shape {shape:?} needs {} values, got {}",
                shape.iter().product::<usize>(),
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Self::zeros(other.shape)
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Elements in one sample (`C * H * W`).
    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn sample(&self, n: usize) -> &[f64] {
        let len = self.sample_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn sample_mut(&mut self, n: usize) -> &mut [f64] {
        let len = self.sample_len();
        &mut self.data[n * len..(n + 1) * len]
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.shape[1] + c) * self.shape[2] + h) * self.shape[3] + w
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.index(n, c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, value: f64) {
        let i = self.index(n, c, h, w);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Tensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Stacks equally shaped tensors along the batch axis.
    pub fn stack(items: &[Tensor]) -> Result<Tensor> {
        let Some(first) = items.first() else {
            return invalid("cannot stack zero tensors");
        };
        let [_, c, h, w] = first.shape;
        let mut data = Vec::with_capacity(items.len() * first.sample_len());
        let mut n = 0;
        for t in items {
            if t.shape[1..] != [c, h, w] {
                return invalid(format!("cannot stack {:?} with {:?}", t.shape, first.shape));
            }
            data.extend_from_slice(&t.data);
            n += t.shape[0];
        }
        Tensor::from_vec([n, c, h, w], data)
    }
}
