//! Orthogonal projection onto a span in a weighted inner product
//! `⟨f, g⟩ = Σ w(o) f(o) g(o)`.

/// Pivots below this fraction of the largest Gram diagonal are treated as
/// linearly dependent.
pub const PIVOT_TOL: f64 = 1e-10;

fn dot(w: &[f64], f: &[f64], g: &[f64]) -> f64 {
    w.iter()
        .zip(f.iter().zip(g))
        .map(|(w, (a, b))| w * a * b)
        .sum()
}

/// Result of projecting a vector onto `span{vectors}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// The projected vector.
    pub vector: Vec<f64>,
    /// Indices of the spanning vectors kept, in pivot order.
    pub kept: Vec<usize>,
    /// Coefficients of `vector` on the kept spanning vectors.
    pub coefficients: Vec<f64>,
}

impl Projection {
    pub fn rank(&self) -> usize {
        self.kept.len()
    }
}

/// Pivoted Cholesky of the Gram matrix. Returns the kept indices and the
/// lower factor restricted to them.
fn pivoted_cholesky(gram: &[Vec<f64>]) -> (Vec<usize>, Vec<Vec<f64>>) {
    let k = gram.len();
    let scale = (0..k).map(|i| gram[i][i]).fold(0.0f64, f64::max);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut diag: Vec<f64> = (0..k).map(|i| gram[i][i]).collect();
    // Columns of the factor; l[c][r] is row r (pivot order) of column c.
    let mut l: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    if scale <= 0.0 {
        return (kept, l);
    }
    for step in 0..k {
        let (best, &d) = diag[step..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, d)| (i + step, d))
            .expect("nonempty");
        if d <= PIVOT_TOL * scale {
            break;
        }
        perm.swap(step, best);
        diag.swap(step, best);
        for row in l.iter_mut() {
            row.swap(step, best);
        }
        let pivot = d.sqrt();
        let mut col = vec![0.0; k];
        col[step] = pivot;
        for r in (step + 1)..k {
            let mut s = gram[perm[r]][perm[step]];
            for lc in &l {
                s -= lc[r] * lc[step];
            }
            col[r] = s / pivot;
            diag[r] -= col[r] * col[r];
        }
        l.push(col);
        kept.push(perm[step]);
    }
    (kept, l)
}

/// Projects `g` onto the span of `vectors` under weights `w`.
pub fn project(w: &[f64], vectors: &[Vec<f64>], g: &[f64]) -> Projection {
    let k = vectors.len();
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| dot(w, &vectors[i], &vectors[j])).collect())
        .collect();
    let (kept, l) = pivoted_cholesky(&gram);
    let r = kept.len();
    // Solve L Lᵀ c = b over the kept rows.
    let b: Vec<f64> = kept.iter().map(|&i| dot(w, &vectors[i], g)).collect();
    let mut y = vec![0.0; r];
    for i in 0..r {
        let mut s = b[i];
        for j in 0..i {
            s -= l[j][i] * y[j];
        }
        y[i] = s / l[i][i];
    }
    let mut c = vec![0.0; r];
    for i in (0..r).rev() {
        let mut s = y[i];
        for j in (i + 1)..r {
            s -= l[i][j] * c[j];
        }
        c[i] = s / l[i][i];
    }
    let mut vector = vec![0.0; g.len()];
    for (ci, &idx) in c.iter().zip(&kept) {
        for (o, x) in vector.iter_mut().enumerate() {
            *x += ci * vectors[idx][o];
        }
    }
    Projection {
        vector,
        kept,
        coefficients: c,
    }
}
