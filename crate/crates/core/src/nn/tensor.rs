use crate::graph::DualGraph;
use crate::par::{Exec, ROW_CHUNK};
use crate::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length");
        Tensor2 { rows, cols, data }
    }

    pub fn try_from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Tensor2 { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Tensor2 { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Tensor2) {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
    }

    pub fn axpy(&mut self, alpha: f64, other: &Tensor2) {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += alpha * b);
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor2 {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rows reordered: row `i` moves to `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Tensor2 {
        let mut out = Tensor2::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            out.row_mut(perm[i]).copy_from_slice(self.row(i));
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Tensor2) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `c[rows, m] += a[rows, k] · b` for row-major slices where `b` is `k × m`
/// with strides `(rsb, csb)`.
#[allow(clippy::too_many_arguments)]
fn gemm_rows(rows: usize, k: usize, m: usize, a: &[f64], b: &[f64], rsb: usize, csb: usize, c: &mut [f64]) {
    if rows == 0 || m == 0 {
        return;
    }
    if k == 0 {
        return;
    }
    debug_assert!(a.len() >= rows * k && c.len() >= rows * m);
    // SAFETY: slices cover the stated extents: `a` is rows×k row-major, `c` is
    // rows×m row-major, and `b` addresses k×m elements through its strides.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            k,
            m,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

fn check_inner(what: &str, a: (usize, usize), b: (usize, usize), ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{what}: incompatible shapes {}x{} and {}x{}",
            a.0, a.1, b.0, b.1
        )))
    }
}

/// `a · b`.
pub fn matmul(a: &Tensor2, b: &Tensor2, exec: Exec) -> Result<Tensor2> {
    check_inner("matmul", a.shape(), b.shape(), a.cols == b.rows)?;
    let (k, m) = (a.cols, b.cols);
    let mut out = Tensor2::zeros(a.rows, m);
    if m == 0 {
        return Ok(out);
    }
    exec.for_each_chunk_mut(&mut out.data, ROW_CHUNK * m, |ci, c| {
        let r0 = ci * ROW_CHUNK;
        let rows = c.len() / m;
        gemm_rows(rows, k, m, &a.data[r0 * k..(r0 + rows) * k], &b.data, m, 1, c);
    });
    Ok(out)
}

/// `a · bᵀ`.
pub fn matmul_nt(a: &Tensor2, b: &Tensor2, exec: Exec) -> Result<Tensor2> {
    check_inner("matmul_nt", a.shape(), b.shape(), a.cols == b.cols)?;
    let (k, m) = (a.cols, b.rows);
    let mut out = Tensor2::zeros(a.rows, m);
    if m == 0 {
        return Ok(out);
    }
    exec.for_each_chunk_mut(&mut out.data, ROW_CHUNK * m, |ci, c| {
        let r0 = ci * ROW_CHUNK;
        let rows = c.len() / m;
        gemm_rows(rows, k, m, &a.data[r0 * k..(r0 + rows) * k], &b.data, 1, k, c);
    });
    Ok(out)
}

/// `aᵀ · b`, reduced over row chunks in fixed order.
pub fn matmul_tn(a: &Tensor2, b: &Tensor2, exec: Exec) -> Result<Tensor2> {
    check_inner("matmul_tn", a.shape(), b.shape(), a.rows == b.rows)?;
    let (n, k, m) = (a.rows, a.cols, b.cols);
    let chunks = n.div_ceil(ROW_CHUNK);
    let partials = exec.map_range(chunks, |ci| {
        let r0 = ci * ROW_CHUNK;
        let r1 = (r0 + ROW_CHUNK).min(n);
        let mut part = vec![0.0; k * m];
        let mut at = vec![0.0; k * (r1 - r0)];
        for r in r0..r1 {
            for j in 0..k {
                at[j * (r1 - r0) + (r - r0)] = a.data[r * k + j];
            }
        }
        gemm_rows(k, r1 - r0, m, &at, &b.data[r0 * m..r1 * m], m, 1, &mut part);
        part
    });
    let mut out = Tensor2::zeros(k, m);
    for p in partials {
        out.data.iter_mut().zip(p).for_each(|(o, v)| *o += v);
    }
    Ok(out)
}

/// Adds the `1 × cols` row `bias` to every row.
pub fn add_row_bias(x: &mut Tensor2, bias: &Tensor2) -> Result<()> {
    if bias.rows != 1 || bias.cols != x.cols {
        return Err(Error::Shape(format!(
            "bias {}x{} for a tensor with {} columns",
            bias.rows, bias.cols, x.cols
        )));
    }
    let cols = x.cols;
    if cols == 0 {
        return Ok(());
    }
    for row in x.data.chunks_mut(cols) {
        row.iter_mut().zip(&bias.data).for_each(|(v, b)| *v += b);
    }
    Ok(())
}

/// Column sums as a `1 × cols` tensor, reduced over row chunks in fixed order.
pub fn column_sums(x: &Tensor2, exec: Exec) -> Tensor2 {
    let (n, m) = x.shape();
    let chunks = n.div_ceil(ROW_CHUNK);
    let partials = exec.map_range(chunks, |ci| {
        let mut part = vec![0.0; m];
        for r in ci * ROW_CHUNK..((ci + 1) * ROW_CHUNK).min(n) {
            part.iter_mut().zip(x.row(r)).for_each(|(p, v)| *p += v);
        }
        part
    });
    let mut out = Tensor2::zeros(1, m);
    for p in partials {
        out.data.iter_mut().zip(p).for_each(|(o, v)| *o += v);
    }
    out
}

fn check_graph_rows(x: &Tensor2, graph: &DualGraph) -> Result<()> {
    if x.rows != graph.n() {
        return Err(Error::Shape(format!(
            "{} rows for a graph with {} nodes",
            x.rows,
            graph.n()
        )));
    }
    Ok(())
}

/// Row `i` of the result is the mean of rows `N(i)` of `h` (zero when `i`
/// has no neighbors).
pub fn neighbor_mean(h: &Tensor2, graph: &DualGraph, exec: Exec) -> Result<Tensor2> {
    check_graph_rows(h, graph)?;
    let m = h.cols;
    let mut out = Tensor2::zeros(h.rows, m);
    if m == 0 {
        return Ok(out);
    }
    exec.for_each_chunk_mut(&mut out.data, ROW_CHUNK * m, |ci, c| {
        for (r, row) in c.chunks_mut(m).enumerate() {
            let i = ci * ROW_CHUNK + r;
            let nb = graph.neighbors(i);
            if nb.is_empty() {
                continue;
            }
            for &j in nb {
                row.iter_mut().zip(h.row(j)).for_each(|(o, v)| *o += v);
            }
            let inv = 1.0 / nb.len() as f64;
            row.iter_mut().for_each(|o| *o *= inv);
        }
    });
    Ok(out)
}

/// Adjoint of [`neighbor_mean`]: row `j` gathers `g_i / deg(i)` over `i ∈ N(j)`.
pub fn neighbor_mean_adjoint(g: &Tensor2, graph: &DualGraph, exec: Exec) -> Result<Tensor2> {
    check_graph_rows(g, graph)?;
    let m = g.cols;
    let mut out = Tensor2::zeros(g.rows, m);
    if m == 0 {
        return Ok(out);
    }
    exec.for_each_chunk_mut(&mut out.data, ROW_CHUNK * m, |ci, c| {
        for (r, row) in c.chunks_mut(m).enumerate() {
            let j = ci * ROW_CHUNK + r;
            for &i in graph.neighbors(j) {
                let inv = 1.0 / graph.degree(i) as f64;
                row.iter_mut().zip(g.row(i)).for_each(|(o, v)| *o += v * inv);
            }
        }
    });
    Ok(out)
}

pub fn tanh_inplace(x: &mut Tensor2) {
    x.data.iter_mut().for_each(|v| *v = v.tanh());
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Tensor2) -> Tensor2 {
    let mut out = x.clone();
    if x.cols == 0 {
        return out;
    }
    for row in out.data.chunks_mut(x.cols) {
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - mx).exp();
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Tensor2, b: &Tensor2) -> Tensor2 {
        Tensor2::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    fn rand_t(rows: usize, cols: usize, seed: u64) -> Tensor2 {
        use rand::Rng;
        let mut rng = crate::seed::rng(seed);
        Tensor2::from_fn(rows, cols, |_, _| rng.random::<f64>() - 0.5)
    }

    #[test]
    fn products_match_naive() {
        let a = rand_t(600, 7, 1);
        let b = rand_t(7, 5, 2);
        let c = rand_t(600, 5, 3);
        assert!(matmul(&a, &b, Exec::Sequential).unwrap().max_abs_diff(&naive(&a, &b)) < 1e-12);
        let bt = Tensor2::from_fn(5, 7, |i, j| b.get(j, i));
        assert!(matmul_nt(&a, &bt, Exec::Sequential).unwrap().max_abs_diff(&naive(&a, &b)) < 1e-12);
        let at = Tensor2::from_fn(7, 600, |i, j| a.get(j, i));
        assert!(matmul_tn(&a, &c, Exec::Sequential).unwrap().max_abs_diff(&naive(&at, &c)) < 1e-11);
        assert!(matmul(&a, &c, Exec::Sequential).is_err());
    }

    #[test]
    fn exec_policies_are_bitwise_equal() {
        let a = rand_t(1000, 9, 4);
        let b = rand_t(9, 6, 5);
        let c = rand_t(1000, 6, 6);
        assert_eq!(
            matmul(&a, &b, Exec::Sequential).unwrap(),
            matmul(&a, &b, Exec::Parallel).unwrap()
        );
        assert_eq!(
            matmul_tn(&a, &c, Exec::Sequential).unwrap(),
            matmul_tn(&a, &c, Exec::Parallel).unwrap()
        );
        assert_eq!(column_sums(&c, Exec::Sequential), column_sums(&c, Exec::Parallel));
    }

    #[test]
    fn softmax_is_stable() {
        let x = Tensor2::from_vec(2, 2, vec![1000.0, 0.0, -1000.0, -999.0]);
        let y = softmax_rows(&x);
        assert!(y.is_finite());
        for i in 0..2 {
            assert!((y.get(i, 0) + y.get(i, 1) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn neighbor_mean_and_adjoint() {
        let g = DualGraph::from_edges(4, &[(0, 1), (1, 2)]).unwrap();
        let h = Tensor2::from_vec(4, 1, vec![1.0, 2.0, 4.0, 8.0]);
        let m = neighbor_mean(&h, &g, Exec::Sequential).unwrap();
        assert_eq!(m.data(), &[2.0, 2.5, 2.0, 0.0]);
        // <M h, u> = <h, Mᵀ u>
        let u = Tensor2::from_vec(4, 1, vec![0.3, -1.0, 0.7, 2.0]);
        let mt = neighbor_mean_adjoint(&u, &g, Exec::Sequential).unwrap();
        let lhs: f64 = m.data().iter().zip(u.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = h.data().iter().zip(mt.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-14);
    }
}
