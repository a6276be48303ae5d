//! Dense generalized eigenproblem for `A_{bν}` on the stream-mode space.

use crate::error::{Error, Result};
use crate::fields::CoefficientFields;
use crate::scalar::{lit, norm2, to_f64, Real};
use crate::stream::{mode_loads, mode_norm, mode_spectrum, stream_modes, velocity_from_spectrum, StreamMode};
use crate::velocity::{stress_components, VelocityField};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

const MAGIC: &[u8; 8] = b"AIMLBAS2";
/// Spectral gaps below this (relative to `λ_max`) count as zero.
const CLUSTER_RTOL: f64 = 1e-9;
/// Eigenvalues this close are treated as one degenerate eigenspace when fixing rotations.
const DEGENERATE_RTOL: f64 = 1e-13;

/// `(·,·)_b`-orthonormal eigenpairs of the viscous operator on `{∇·(bu) = 0}`.
#[derive(Debug, Clone)]
pub struct ConstrainedBasis<T: Real> {
    pub fields: Arc<CoefficientFields<T>>,
    pub modes: Vec<StreamMode>,
    pub norms: Vec<T>,
    /// `inner_b` between mode velocities.
    pub gram: DMatrix<T>,
    /// `stress_form` between mode velocities.
    pub stiffness: DMatrix<T>,
    /// `∫ b ∇u:∇v` between mode velocities.
    pub h1: DMatrix<T>,
    pub eigenvalues: DVector<T>,
    /// Column `k` holds the mode coordinates of `w_k`.
    pub eigenvectors: DMatrix<T>,
    /// `h1` in eigencoordinates, so `‖u‖_b² = cᵀ K c`.
    pub h1_eigen: DMatrix<T>,
    pub hash: String,
}

/// Content hash of everything the basis depends on.
pub fn basis_hash<T: Real>(fields: &CoefficientFields<T>) -> String {
    let g = &fields.grid;
    let mut h = Sha256::new();
    h.update(std::any::type_name::<T>().as_bytes());
    h.update(g.side_length.to_le_bytes());
    h.update((g.points_per_side as u64).to_le_bytes());
    h.update((g.mode_cutoff as u64).to_le_bytes());
    for v in fields.b.iter().chain(&fields.nu) {
        h.update(to_f64(*v).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Columns of mode data scaled so that `XᵀX` is the wanted form.
fn assemble<T: Real>(fields: &CoefficientFields<T>, vels: &[VelocityField<T>]) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>) {
    let n = fields.grid.len();
    let d = vels.len();
    let w = lit::<T>(fields.grid.cell_area());
    let two = lit::<T>(2.0);
    let sb: Vec<T> = fields.b.iter().map(|&b| (w * b).sqrt()).collect();
    let sbn: Vec<T> = (0..n).map(|i| (two * w * fields.b[i] * fields.nu[i]).sqrt()).collect();
    let mut xg = DMatrix::<T>::zeros(2 * n, d);
    let mut xs = DMatrix::<T>::zeros(2 * n, d);
    let mut xh = DMatrix::<T>::zeros(4 * n, d);
    for (j, v) in vels.iter().enumerate() {
        let g = v.grad.as_ref().expect("synthesized fields carry gradients");
        let (mut cg, mut cs, mut ch) = (xg.column_mut(j), xs.column_mut(j), xh.column_mut(j));
        for i in 0..n {
            cg[i] = sb[i] * v.u[0][i];
            cg[n + i] = sb[i] * v.u[1][i];
            let (s11, s12) = stress_components(g, i);
            cs[i] = sbn[i] * s11;
            cs[n + i] = sbn[i] * s12;
            ch[i] = sb[i] * g[0][0][i];
            ch[n + i] = sb[i] * g[0][1][i];
            ch[2 * n + i] = sb[i] * g[1][0][i];
            ch[3 * n + i] = sb[i] * g[1][1][i];
        }
    }
    (sym(xg.tr_mul(&xg)), sym(xs.tr_mul(&xs)), sym(xh.tr_mul(&xh)))
}

fn sym<T: Real>(m: DMatrix<T>) -> DMatrix<T> {
    let half = lit::<T>(0.5);
    (&m + m.transpose()) * half
}

/// Solves `L X = B` for lower-triangular `L`.
fn solve_lower<T: Real>(l: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..x.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves `Lᵀ X = B` for lower-triangular `L`.
fn solve_lower_transpose<T: Real>(l: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Largest `λ` with `A v = λ B v` for symmetric `A` and positive-definite `B`.
pub fn max_generalized_eigenvalue<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<T> {
    let l = T::cholesky_lower(b.clone()).ok_or(Error::IllConditioned)?;
    let x = solve_lower(&l, a);
    let c = sym(solve_lower(&l, &x.transpose()));
    let (ev, _) = T::symmetric_eigen(c);
    Ok(ev.iter().fold(T::neg_infinity(), |m, &v| m.max(v)))
}

/// Eigenvalues ascending plus `G`-orthonormal eigenvectors of `S v = λ G v`.
pub fn generalized_eigen<T: Real>(gram: &DMatrix<T>, stiffness: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    let (gev, _) = T::symmetric_eigen(gram.clone());
    let (lo, hi) = gev.iter().fold((T::infinity(), T::zero()), |(a, b), &v| (a.min(v), b.max(v)));
    let cond = if lo > T::zero() { to_f64(hi / lo) } else { f64::INFINITY };
    if cond > 1e12 {
        return Err(Error::SingularGram { cond });
    }
    let l = T::cholesky_lower(gram.clone()).ok_or(Error::SingularGram { cond })?;
    let x = solve_lower(&l, stiffness);
    let c = sym(solve_lower(&l, &x.transpose()));
    let (ev, y) = T::symmetric_eigen(c);
    let v = solve_lower_transpose(&l, &y);
    let mut order: Vec<usize> = (0..ev.len()).collect();
    order.sort_by(|&a, &b| ev[a].partial_cmp(&ev[b]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = DVector::from_iterator(ev.len(), order.iter().map(|&i| ev[i]));
    let mut vecs = DMatrix::zeros(v.nrows(), v.ncols());
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &v.column(i));
    }
    canonicalize(gram, &vals, &mut vecs);
    Ok((vals, vecs))
}

/// Groups indices of eigenvalues equal up to `rtol·max|λ|`.
pub fn clusters<T: Real>(vals: &DVector<T>, rtol: f64) -> Vec<std::ops::Range<usize>> {
    let scale = vals.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let tol = lit::<T>(rtol) * scale;
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=vals.len() {
        if i == vals.len() || vals[i] - vals[i - 1] > tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Fixes the rotation inside each eigenvalue cluster.
///
/// Greedy Gram–Schmidt on the overlaps `a_j = V_cᵀ G e_j`: each new vector is
/// aligned with the stream mode whose overlap residual is largest (lowest index
/// on ties), then the cluster is ordered by that mode index. The overlap with
/// the chosen mode comes out positive, which also fixes signs of simple pairs.
fn canonicalize<T: Real>(gram: &DMatrix<T>, vals: &DVector<T>, vecs: &mut DMatrix<T>) {
    let d = gram.nrows();
    for r in clusters(vals, DEGENERATE_RTOL) {
        let m = r.len();
        let vc = vecs.columns(r.start, m).into_owned();
        let a = vc.transpose() * gram; // m × d
        let mut q: Vec<DVector<T>> = Vec::with_capacity(m);
        let mut picked: Vec<usize> = Vec::with_capacity(m);
        for _ in 0..m {
            let mut res: Vec<(T, DVector<T>)> = (0..d)
                .map(|j| {
                    let mut v = a.column(j).into_owned();
                    for qq in &q {
                        let p = qq.dot(&v);
                        v.axpy(-p, qq, T::one());
                    }
                    (norm2(&v), v)
                })
                .collect();
            let best = res.iter().fold(T::zero(), |acc, (n, _)| acc.max(*n));
            let tie = best * (T::one() - lit::<T>(1e-8));
            let j = (0..d).find(|&j| !picked.contains(&j) && res[j].0 >= tie).unwrap_or(0);
            let (n, v) = std::mem::replace(&mut res[j], (T::zero(), DVector::zeros(0)));
            q.push(v / n);
            picked.push(j);
        }
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by_key(|&i| picked[i]);
        for (slot, &i) in idx.iter().enumerate() {
            let col = &vc * &q[i];
            vecs.set_column(r.start + slot, &col);
        }
    }
}

impl<T: Real> ConstrainedBasis<T> {
    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    /// `λ_k` with the one-based index used throughout (`lambda(1)` is the smallest).
    pub fn lambda(&self, k: usize) -> T {
        self.eigenvalues[k - 1]
    }

    /// Velocity of the raw stream mode `j` (not an eigenfunction).
    pub fn mode_velocity(&self, j: usize) -> VelocityField<T> {
        let mut amps = vec![T::zero(); self.dim()];
        amps[j] = T::one();
        self.synthesize(&amps)
    }

    fn synthesize(&self, amps: &[T]) -> VelocityField<T> {
        let spec = mode_spectrum(&self.fields.grid, &self.modes, &self.norms, amps);
        velocity_from_spectrum(&self.fields, &spec)
    }

    /// Velocity with the given eigencoordinates.
    pub fn velocity(&self, coeffs: &DVector<T>) -> VelocityField<T> {
        let amps = &self.eigenvectors * coeffs;
        self.synthesize(amps.as_slice())
    }

    /// Eigenfunction `w_k`, zero-based.
    pub fn eigenfunction(&self, k: usize) -> VelocityField<T> {
        self.velocity(&DVector::from_fn(self.dim(), |i, _| if i == k { T::one() } else { T::zero() }))
    }

    /// `((g, w_k)_b)_k` for a physical vector field `g`, i.e. the orthogonal projection.
    pub fn project_field(&self, g: &[Vec<T>; 2]) -> DVector<T> {
        let (f1, f2) = self.fields.fft.forward_pair(&g[0], &g[1]);
        self.loads_from_spectra(&f1, &f2)
    }

    /// [`Self::project_field`] from precomputed spectra of the two components.
    pub(crate) fn loads_from_spectra(&self, f1: &[num_complex::Complex<T>], f2: &[num_complex::Complex<T>]) -> DVector<T> {
        let g = mode_loads(&self.fields.grid, &self.modes, &self.norms, f1, f2);
        self.eigenvectors.tr_mul(&g)
    }

    /// `∫ b s w_i·w_j` in eigencoordinates for a pointwise weight `s`.
    pub fn weighted_mass(&self, s: &[T]) -> DMatrix<T> {
        let n = self.fields.grid.len();
        let w = lit::<T>(self.fields.grid.cell_area());
        let rows: Vec<Vec<T>> = (0..self.dim())
            .into_par_iter()
            .map(|j| {
                let v = self.mode_velocity(j);
                let mut col = vec![T::zero(); 2 * n];
                for i in 0..n {
                    let r = (w * self.fields.b[i] * s[i]).sqrt();
                    col[i] = r * v.u[0][i];
                    col[n + i] = r * v.u[1][i];
                }
                col
            })
            .collect();
        let x = DMatrix::from_fn(2 * n, self.dim(), |i, j| rows[j][i]);
        let m = sym(x.tr_mul(&x));
        sym(self.eigenvectors.transpose() * m * &self.eigenvectors)
    }

    /// Whether `λ_n = λ_{n+1}` up to the clustering tolerance.
    pub fn gap_is_zero(&self, n: usize) -> bool {
        if n == 0 || n >= self.dim() {
            return false;
        }
        let tol = lit::<T>(CLUSTER_RTOL) * self.eigenvalues[self.dim() - 1];
        self.eigenvalues[n] - self.eigenvalues[n - 1] <= tol
    }

    /// Cuts `n` with a strictly positive spectral gap.
    pub fn cluster_boundaries(&self) -> Vec<usize> {
        clusters(&self.eigenvalues, CLUSTER_RTOL).iter().map(|r| r.end).filter(|&e| e < self.dim()).collect()
    }

    /// Smallest constant with `inner_b(u,u) ≤ Π²·h1_seminorm_b(u)` on the space.
    pub fn poincare_h1(&self) -> T {
        let (ev, _) = T::symmetric_eigen(self.h1_eigen.clone());
        let lo = ev.iter().fold(T::infinity(), |a, &v| a.min(v));
        (T::one() / lo).sqrt()
    }

    pub fn max_orthonormality_defect(&self) -> T {
        let v = &self.eigenvectors;
        let m = v.transpose() * &self.gram * v - DMatrix::identity(self.dim(), self.dim());
        m.iter().fold(T::zero(), |a, &x| a.max(x.abs()))
    }

    /// `max_k |S v_k − λ_k G v_k| / λ_k` (Euclidean norm in mode coordinates).
    pub fn max_eigen_residual(&self) -> T {
        (0..self.dim()).fold(T::zero(), |a, k| {
            let v = self.eigenvectors.column(k);
            let r = &self.stiffness * v - (&self.gram * v) * self.eigenvalues[k];
            a.max(norm2(&r) / self.eigenvalues[k])
        })
    }

    pub fn cache_path(dir: &Path, hash: &str) -> PathBuf {
        dir.join(format!("basis-{hash}.bin"))
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = Self::cache_path(dir, &self.hash);
        let g = &self.fields.grid;
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        for v in [self.dim() as u64, g.points_per_side as u64, g.mode_cutoff as u64] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&g.side_length.to_le_bytes());
        for m in [&self.gram, &self.stiffness, &self.h1] {
            m.iter().for_each(|x| buf.extend_from_slice(&to_f64(*x).to_le_bytes()));
        }
        self.eigenvalues.iter().for_each(|x| buf.extend_from_slice(&to_f64(*x).to_le_bytes()));
        self.eigenvectors.iter().for_each(|x| buf.extend_from_slice(&to_f64(*x).to_le_bytes()));
        let tmp = path.with_extension("tmp");
        std::fs::File::create(&tmp)?.write_all(&buf)?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Loads a cached basis for these fields, `Ok(None)` when absent.
    pub fn load(dir: &Path, fields: &CoefficientFields<T>) -> Result<Option<Self>> {
        let hash = basis_hash(fields);
        let path = Self::cache_path(dir, &hash);
        if !path.exists() {
            return Ok(None);
        }
        let bad = |m: &str| Error::Format { path: path.display().to_string(), message: m.to_string() };
        let mut bytes = Vec::new();
        std::fs::File::open(&path)?.read_to_end(&mut bytes)?;
        if bytes.len() >= 8 && bytes[..7] == MAGIC[..7] && bytes[..8] != MAGIC[..] {
            // Older layout: rebuild.
            return Ok(None);
        }
        if bytes.len() < 40 || &bytes[..8] != MAGIC {
            return Err(bad("bad magic"));
        }
        let u = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap()) as usize;
        let (d, m, k) = (u(8), u(16), u(24));
        let g = &fields.grid;
        if m != g.points_per_side || k != g.mode_cutoff || d != stream_modes(k).len() {
            return Err(bad("header does not match the grid"));
        }
        let need = 40 + 8 * (4 * d * d + d);
        if bytes.len() != need {
            return Err(bad("truncated"));
        }
        let mut off = 40;
        let mut take = |count: usize| -> Vec<T> {
            let v = bytes[off..off + 8 * count]
                .chunks_exact(8)
                .map(|c| lit::<T>(f64::from_le_bytes(c.try_into().unwrap())))
                .collect();
            off += 8 * count;
            v
        };
        let gram = DMatrix::from_vec(d, d, take(d * d));
        let stiffness = DMatrix::from_vec(d, d, take(d * d));
        let h1 = DMatrix::from_vec(d, d, take(d * d));
        let eigenvalues = DVector::from_vec(take(d));
        let eigenvectors = DMatrix::from_vec(d, d, take(d * d));
        let modes = stream_modes(k);
        let norms = modes.iter().map(|md| lit(mode_norm(g, md))).collect();
        let h1_eigen = sym(eigenvectors.transpose() * &h1 * &eigenvectors);
        Ok(Some(ConstrainedBasis {
            fields: Arc::new(fields.clone()),
            modes,
            norms,
            gram,
            stiffness,
            h1,
            eigenvalues,
            eigenvectors,
            h1_eigen,
            hash,
        }))
    }
}

/// Assembles and diagonalizes the operator on the retained stream modes.
pub fn build_basis<T: Real>(fields: &CoefficientFields<T>) -> Result<ConstrainedBasis<T>> {
    let g = &fields.grid;
    let modes = stream_modes(g.mode_cutoff);
    let norms: Vec<T> = modes.iter().map(|m| lit(mode_norm(g, m))).collect();
    let d = modes.len();
    let vels: Vec<VelocityField<T>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let mut amps = vec![T::zero(); d];
            amps[j] = T::one();
            velocity_from_spectrum(fields, &mode_spectrum(g, &modes, &norms, &amps))
        })
        .collect();
    let (gram, stiffness, h1) = assemble(fields, &vels);
    drop(vels);
    let (eigenvalues, eigenvectors) = generalized_eigen(&gram, &stiffness)?;
    if eigenvalues[0] <= T::zero() {
        return Err(Error::SingularOperator(to_f64(eigenvalues[0])));
    }
    let h1_eigen = sym(eigenvectors.transpose() * &h1 * &eigenvectors);
    Ok(ConstrainedBasis {
        fields: Arc::new(fields.clone()),
        modes,
        norms,
        gram,
        stiffness,
        h1,
        eigenvalues,
        eigenvectors,
        h1_eigen,
        hash: basis_hash(fields),
    })
}

/// Loads from `cache` when present, otherwise builds and stores.
pub fn build_or_load<T: Real>(fields: &CoefficientFields<T>, cache: Option<&Path>) -> Result<ConstrainedBasis<T>> {
    if let Some(dir) = cache {
        if let Some(b) = ConstrainedBasis::load(dir, fields)? {
            return Ok(b);
        }
        let b = build_basis(fields)?;
        b.save(dir)?;
        return Ok(b);
    }
    build_basis(fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample_fields, FieldSource, FieldSpec};
    use crate::grid::Grid;
    use std::f64::consts::PI;

    #[test]
    fn constant_coefficients_give_two_k_squared() {
        let g = Grid::new(2.0 * PI, 16, 2).unwrap();
        let f = sample_fields::<f64>(&g, &FieldSpec::constant(1.0, 1.0, 0.0)).unwrap();
        let b = build_basis(&f).unwrap();
        let want = [2.0, 2.0, 2.0, 2.0, 4.0, 4.0, 4.0, 4.0, 8.0, 8.0, 8.0, 8.0];
        for (k, w) in want.iter().enumerate() {
            assert!((b.eigenvalues[k] - w).abs() < 1e-9 * w, "{k}: {}", b.eigenvalues[k]);
        }
        assert!(b.max_orthonormality_defect() < 1e-10);
        assert!(b.max_eigen_residual() < 1e-9);
        // Each eigenvector is a single stream mode after canonicalization.
        for k in 0..b.dim() {
            let c = b.eigenvectors.column(k);
            let big = c.iter().filter(|x| x.abs() > 1e-8).count();
            assert_eq!(big, 1, "column {k}");
            assert!(c.iter().all(|&x| x > -1e-8));
        }
        assert_eq!(b.cluster_boundaries()[0], 4);
        assert!(b.gap_is_zero(2) && !b.gap_is_zero(4));
    }

    #[test]
    fn variable_depth_and_cache_round_trip() {
        let g = Grid::new(2.0 * PI, 16, 3).unwrap();
        let mut spec = FieldSpec::constant(1.0, 0.5, 0.0);
        spec.b = FieldSource::expr("2 + sin(x)").unwrap();
        let f = sample_fields::<f64>(&g, &spec).unwrap();
        let b = build_basis(&f).unwrap();
        assert!(b.eigenvalues[0] > 0.0);
        assert!(b.max_orthonormality_defect() < 1e-10);
        assert!(b.max_eigen_residual() < 1e-9);
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path()).unwrap();
        let c = ConstrainedBasis::load(dir.path(), &f).unwrap().unwrap();
        assert_eq!(b.eigenvalues, c.eigenvalues);
        assert_eq!(b.eigenvectors, c.eigenvectors);
        let w = b.eigenfunction(3);
        let p = b.project_field(&w.u);
        for k in 0..b.dim() {
            let want = if k == 3 { 1.0 } else { 0.0 };
            assert!((p[k] - want).abs() < 1e-10);
        }
    }
}
