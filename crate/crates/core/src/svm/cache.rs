use std::collections::{BTreeMap, HashMap};

use super::kernel::Kernel;

/// Random access to rows of a kernel (Gram) matrix.
pub trait KernelRows {
    fn size(&self) -> usize;
    fn diagonal(&self, i: usize) -> f64;
    fn row(&mut self, i: usize) -> &[f64];
}

/// A fully materialized, row-major Gram matrix.
#[derive(Debug, Clone, Copy)]
pub struct DenseGram<'a> {
    data: &'a [f64],
    n: usize,
}

impl<'a> DenseGram<'a> {
    pub fn new(data: &'a [f64], n: usize) -> Self {
        assert_eq!(data.len(), n * n, "Gram matrix must be n x n");
        Self { data, n }
    }
}

impl KernelRows for DenseGram<'_> {
    fn size(&self) -> usize {
        self.n
    }

    fn diagonal(&self, i: usize) -> f64 {
        self.data[i * self.n + i]
    }

    fn row(&mut self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Kernel rows computed on demand and kept in a least-recently-used cache
/// bounded by a byte budget.
pub struct CachedKernel<'a> {
    vectors: &'a [&'a [f64]],
    kernel: Kernel,
    diag: Vec<f64>,
    rows: HashMap<usize, (Vec<f64>, u64)>,
    by_age: BTreeMap<u64, usize>,
    tick: u64,
    capacity_rows: usize,
}

impl<'a> CachedKernel<'a> {
    pub fn new(vectors: &'a [&'a [f64]], kernel: Kernel, cache_bytes: usize) -> Self {
        let row_bytes = (vectors.len() * std::mem::size_of::<f64>()).max(1);
        let capacity_rows = (cache_bytes / row_bytes).max(2);
        let diag = vectors.iter().map(|v| kernel.eval(v, v)).collect();
        Self {
            vectors,
            kernel,
            diag,
            rows: HashMap::new(),
            by_age: BTreeMap::new(),
            tick: 0,
            capacity_rows,
        }
    }

    pub fn cached_rows(&self) -> usize {
        self.rows.len()
    }
}

impl KernelRows for CachedKernel<'_> {
    fn size(&self) -> usize {
        self.vectors.len()
    }

    fn diagonal(&self, i: usize) -> f64 {
        self.diag[i]
    }

    fn row(&mut self, i: usize) -> &[f64] {
        self.tick += 1;
        let tick = self.tick;
        if let Some((_, age)) = self.rows.get_mut(&i) {
            self.by_age.remove(age);
            *age = tick;
            self.by_age.insert(tick, i);
        } else {
            if self.rows.len() >= self.capacity_rows {
                if let Some((_, oldest)) = self.by_age.pop_first() {
                    self.rows.remove(&oldest);
                }
            }
            let xi = self.vectors[i];
            let row = self.vectors.iter().map(|xj| self.kernel.eval(xi, xj)).collect();
            self.rows.insert(i, (row, tick));
            self.by_age.insert(tick, i);
        }
        &self.rows[&i].0
    }
}
