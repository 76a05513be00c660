//! Small numerical helpers: compensated summation and batch-means errors.

/// Kahan–Babuska compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Sums an iterator with compensation.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = KahanSum::default();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

/// Online mean and batch-means standard error for a correlated series.
///
/// The planned sample count is split into `n_batches` equal batches; the
/// standard error is estimated from the scatter of completed batch means,
/// which are close to independent once batches are much longer than the
/// autocorrelation time. The overall mean always uses every pushed value,
/// including any remainder past the last full batch.
#[derive(Clone, Debug)]
pub struct BatchMeans {
    batch_len: u64,
    count: u64,
    total: KahanSum,
    current: KahanSum,
    in_current: u64,
    batch_means: Vec<f64>,
}

impl BatchMeans {
    /// `planned` is the expected total number of samples; short runs simply
    /// complete fewer batches.
    pub fn new(planned: u64, n_batches: usize) -> Self {
        let n_batches = n_batches.max(2) as u64;
        Self {
            batch_len: (planned / n_batches).max(1),
            count: 0,
            total: KahanSum::default(),
            current: KahanSum::default(),
            in_current: 0,
            batch_means: Vec::new(),
        }
    }

    pub fn push(&mut self, value: f64) {
        self.count += 1;
        self.total.add(value);
        self.current.add(value);
        self.in_current += 1;
        if self.in_current == self.batch_len {
            self.batch_means.push(self.current.total() / self.batch_len as f64);
            self.current = KahanSum::default();
            self.in_current = 0;
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.total.total() / self.count as f64
        }
    }

    /// `None` until at least two batches have completed.
    pub fn std_err(&self) -> Option<f64> {
        let k = self.batch_means.len();
        if k < 2 {
            return None;
        }
        let mean = kahan_sum(self.batch_means.iter().copied()) / k as f64;
        let var = kahan_sum(self.batch_means.iter().map(|b| (b - mean) * (b - mean)))
            / (k as f64 - 1.0);
        Some((var / k as f64).sqrt())
    }
}
