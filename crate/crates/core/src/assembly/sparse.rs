/// Sparse correction matrix over interior unknowns, in compressed rows.
///
/// Stencil weights that land on constrained (exterior or boundary) nodes
/// multiply a zero value and are dropped from the matrix; their per-row sum
/// is kept so the extended row sums can still be checked.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCorrection {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    exterior: Vec<f64>,
}

impl SparseCorrection {
    /// Builds from per-row `(column, value)` lists and dropped-weight sums.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, exterior: Vec<f64>) -> Self {
        assert_eq!(rows.len(), exterior.len());
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let start = cols.len();
            for (c, v) in r {
                assert!(c < n, "column {c} out of range");
                if cols.len() > start && cols.last() == Some(&c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals, exterior }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_rows(vec![Vec::new(); n], vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(p) => v[p],
            Err(_) => 0.0,
        }
    }

    /// Sum of the weights of row `i` on constrained nodes.
    pub fn exterior_weight(&self, i: usize) -> f64 {
        self.exterior[i]
    }

    /// Row sum including the weights on constrained nodes.
    pub fn extended_row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum::<f64>() + self.exterior[i]
    }

    /// `y += C x`.
    pub fn apply_add(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi += c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum::<f64>();
        }
    }

    /// Largest `|C_ij − C_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst
    }
}
