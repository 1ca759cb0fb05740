//! Collocation solver for harmonic functions on axisymmetric domains.
//!
//! Boundary data generated by point charges in one meridian half-plane splits
//! into Legendre modes in the azimuthal angle. Each mode is fitted separately
//! with ring charges placed outside the domain along the profile normals, so a
//! four-dimensional problem becomes a family of small curve problems.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SVD};
use parking_lot::RwLock;
use rayon::prelude::*;

use crate::domain::{fibonacci_sphere, DomainDescriptor, MeridianNode};
use crate::error::{Result, SpikeError};
use crate::geometry::Point4;

use super::harmonics::{lm_index, real_harmonics, SphereRule};
use super::legendre::{kernel_modes, legendre_p};

const BATCH: usize = 8;

/// Truncated SVD of the column-scaled, row-weighted kernel of one mode.
struct ModeFactor {
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
    col_scale: Vec<f64>,
    /// Unweighted kernel at held-out nodes.
    held: DMatrix<f64>,
    condition: f64,
}

pub struct MeridianSolver {
    domain: DomainDescriptor,
    nodes: Vec<MeridianNode>,
    held: Vec<MeridianNode>,
    sqrt_w: Vec<f64>,
    /// Ring positions (z, r) and their distance from the boundary.
    charges: Vec<(f64, f64)>,
    charge_clearance: Vec<f64>,
    modes: RwLock<Vec<Arc<ModeFactor>>>,
    max_modes: usize,
}

/// Point charge in the source half-plane: meridian position and strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneCharge {
    pub z: f64,
    pub r: f64,
    pub strength: f64,
}

/// Fitted ring-charge coefficients for one source.
#[derive(Debug, Clone)]
pub struct MeridianFit {
    pub coefficients: Vec<DVector<f64>>,
    /// Max boundary defect over collocation nodes (bounded over the azimuth).
    pub residual: f64,
    /// Same on held-out nodes.
    pub held_residual: f64,
    pub data_scale: f64,
    pub condition: f64,
}

/// One (l, m) component of an extension of general boundary data.
#[derive(Debug, Clone)]
pub struct ExtensionTerm {
    pub l: usize,
    /// Packed (l, m) index of the transverse harmonic.
    pub index: usize,
    pub coefficients: DVector<f64>,
}

/// Harmonic extension of callback boundary data.
#[derive(Debug, Clone)]
pub struct Extension {
    pub terms: Vec<ExtensionTerm>,
    pub lmax: usize,
    /// Largest ring-averaged collocation defect plus the transverse truncation tail.
    pub residual: f64,
    /// Largest pointwise defect at held-out boundary points.
    pub held_residual: f64,
    pub data_scale: f64,
    pub condition: f64,
}

impl Extension {
    pub fn relative_residual(&self) -> f64 {
        self.residual.max(self.held_residual) / self.data_scale.max(f64::MIN_POSITIVE)
    }
}

const EXTENSION_DEGREES: [usize; 5] = [4, 8, 16, 32, 48];

impl MeridianSolver {
    pub fn new(domain: &DomainDescriptor) -> Result<Self> {
        let st = domain.settings;
        let (nodes, held) = domain.meridian_nodes(st.resolution);
        let sqrt_w = nodes.iter().map(|n| (n.ds * (n.r * n.r + n.ds * n.ds)).sqrt()).collect();
        let mut charges = Vec::new();
        let mut clearance = Vec::new();
        for n in nodes.iter().step_by(2) {
            let mut off = st.charge_offset * n.scale;
            for _ in 0..4 {
                let (zq, rq) = (n.z + off * n.nz, n.r + off * n.nr);
                let m = domain.margin_meridian(zq, rq.max(0.0));
                if rq > 0.0 && m <= -0.5 * off {
                    charges.push((zq, rq));
                    clearance.push(-m);
                    break;
                }
                off *= 0.5;
            }
        }
        if charges.is_empty() || nodes.len() < charges.len() {
            return Err(SpikeError::Precondition("collocation count must exceed charge count".into()));
        }
        Ok(Self {
            domain: domain.clone(),
            nodes,
            held,
            sqrt_w,
            charges,
            charge_clearance: clearance,
            modes: RwLock::new(Vec::new()),
            max_modes: 400,
        })
    }

    pub fn domain(&self) -> &DomainDescriptor {
        &self.domain
    }

    pub fn charges(&self) -> &[(f64, f64)] {
        &self.charges
    }

    /// Smallest distance between a ring charge and the boundary.
    pub fn min_clearance(&self) -> f64 {
        self.charge_clearance.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn node_count(&self) -> (usize, usize) {
        (self.nodes.len(), self.held.len())
    }

    fn ensure_modes(&self, count: usize) -> Result<()> {
        let count = count.min(self.max_modes);
        let have = self.modes.read().len();
        if have >= count {
            return Ok(());
        }
        let mut guard = self.modes.write();
        while guard.len() < count {
            let l0 = guard.len();
            let l1 = (l0 + BATCH).min(self.max_modes);
            let batch = self.factor_batch(l0, l1)?;
            guard.extend(batch);
        }
        Ok(())
    }

    fn factor_batch(&self, l0: usize, l1: usize) -> Result<Vec<Arc<ModeFactor>>> {
        let n = self.nodes.len();
        let nh = self.held.len();
        let k = self.charges.len();
        let nb = l1 - l0;
        let fill = |pts: &[MeridianNode]| -> Vec<DMatrix<f64>> {
            let rows: Vec<Vec<f64>> = pts
                .par_iter()
                .map(|p| {
                    let mut buf = vec![0.0; l1];
                    let mut row = vec![0.0; nb * k];
                    for (j, &(zq, rq)) in self.charges.iter().enumerate() {
                        kernel_modes(p.z, p.r, zq, rq, &mut buf);
                        for b in 0..nb {
                            row[b * k + j] = buf[l0 + b];
                        }
                    }
                    row
                })
                .collect();
            (0..nb)
                .map(|b| DMatrix::from_fn(pts.len(), k, |i, j| rows[i][b * k + j]))
                .collect()
        };
        let node_k = fill(&self.nodes);
        let held_k = fill(&self.held);
        let cutoff = self.domain.settings.svd_cutoff;
        node_k
            .into_par_iter()
            .zip(held_k)
            .map(|(mut a, held)| {
                for i in 0..n {
                    let w = self.sqrt_w[i];
                    a.row_mut(i).scale_mut(w);
                }
                let col_scale: Vec<f64> = (0..k)
                    .map(|j| {
                        let c = a.column(j).norm();
                        if c > 0.0 {
                            1.0 / c
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for (j, &c) in col_scale.iter().enumerate() {
                    a.column_mut(j).scale_mut(c);
                }
                truncated_svd(a, cutoff).map(|(u, s, v, condition)| {
                    Arc::new(ModeFactor { u, s, v, col_scale, held, condition })
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(|v| {
                debug_assert_eq!(v.len(), nb);
                debug_assert!(nh == 0 || v.iter().all(|f| f.held.nrows() == nh));
                v
            })
    }

    /// Mode data of a set of plane charges at the given nodes, plus a constant in mode 0.
    fn data_modes(&self, pts: &[MeridianNode], sources: &[PlaneCharge], constant: f64, count: usize) -> Vec<Vec<f64>> {
        let per_node: Vec<Vec<f64>> = pts
            .par_iter()
            .map(|p| {
                let mut acc = vec![0.0; count];
                let mut buf = vec![0.0; count];
                for s in sources {
                    kernel_modes(p.z, p.r, s.z, s.r, &mut buf);
                    for (a, b) in acc.iter_mut().zip(&buf) {
                        *a += s.strength * b;
                    }
                }
                acc[0] -= constant;
                acc
            })
            .collect();
        (0..count).map(|l| per_node.iter().map(|v| v[l]).collect()).collect()
    }

    /// Fits the harmonic function whose boundary values equal the potential of
    /// `sources` minus `constant`. All sources share one transverse direction.
    pub fn fit(&self, sources: &[PlaneCharge], constant: f64, data_scale: f64, on_axis: bool) -> Result<MeridianFit> {
        let tol = 1e-15 * data_scale;
        let mut count = if on_axis { 1 } else { 32.min(self.max_modes) };
        let data = loop {
            let d = self.data_modes(&self.nodes, sources, constant, count);
            if on_axis {
                break d;
            }
            let tail = d.iter().rev().take(3).all(|m| m.iter().all(|v| v.abs() <= tol));
            if tail {
                let mut used = count;
                while used > 1 && d[used - 1].iter().all(|v| v.abs() <= tol) {
                    used -= 1;
                }
                break d.into_iter().take(used).collect();
            }
            if count >= self.max_modes {
                return Err(SpikeError::Accuracy {
                    what: "azimuthal mode truncation".into(),
                    defect: d.last().map(|m| m.iter().fold(0.0f64, |a, v| a.max(v.abs()))).unwrap_or(0.0),
                    threshold: tol,
                });
            }
            count = (2 * count).min(self.max_modes);
        };
        let used = data.len();
        self.ensure_modes(used)?;
        let held_data = self.data_modes(&self.held, sources, constant, used);
        let modes = self.modes.read();
        let mut coefficients = Vec::with_capacity(used);
        let mut node_res = vec![0.0; self.nodes.len()];
        let mut held_res = vec![0.0; self.held.len()];
        let mut condition = 1.0f64;
        for (l, b) in data.iter().enumerate() {
            let f = &modes[l];
            let bw = DVector::from_iterator(b.len(), b.iter().zip(&self.sqrt_w).map(|(v, w)| v * w));
            let utb = f.u.tr_mul(&bw);
            let proj = &f.u * &utb;
            for i in 0..b.len() {
                let w = self.sqrt_w[i];
                if w > 0.0 {
                    node_res[i] += ((proj[i] - bw[i]) / w).abs();
                }
            }
            let mut c = &f.v * utb.component_div(&f.s);
            for (cj, s) in c.iter_mut().zip(&f.col_scale) {
                *cj *= s;
            }
            let fitted_held = &f.held * &c;
            for (i, r) in held_res.iter_mut().enumerate() {
                *r += (fitted_held[i] - held_data[l][i]).abs();
            }
            condition = condition.max(f.condition);
            coefficients.push(c);
        }
        let mx = |v: &[f64]| v.iter().cloned().fold(0.0f64, f64::max);
        Ok(MeridianFit {
            coefficients,
            residual: mx(&node_res),
            held_residual: mx(&held_res),
            data_scale,
            condition,
        })
    }

    /// Value of the fitted ring-charge field at meridian point (z, r) with cos γ to the source plane.
    pub fn evaluate(&self, fit: &MeridianFit, z: f64, r: f64, cos_gamma: f64) -> f64 {
        let l_count = if r == 0.0 { 1 } else { fit.coefficients.len() };
        let mut p = vec![0.0; l_count];
        legendre_p(cos_gamma.clamp(-1.0, 1.0), &mut p);
        let mut buf = vec![0.0; l_count];
        let mut acc = vec![0.0; l_count];
        for (j, &(zq, rq)) in self.charges.iter().enumerate() {
            kernel_modes(z, r, zq, rq, &mut buf);
            for l in 0..l_count {
                acc[l] += fit.coefficients[l][j] * buf[l];
            }
        }
        acc.iter().zip(&p).map(|(a, b)| a * b).sum()
    }
}

impl MeridianSolver {
    /// Transverse harmonic coefficients of `data` on each node ring, degree ≤ `lmax`.
    fn ring_coefficients<F>(&self, pts: &[MeridianNode], data: &F, lmax: usize) -> Vec<Vec<f64>>
    where
        F: Fn(&Point4) -> f64 + Sync,
    {
        let rule = SphereRule::new(lmax);
        let mut table = Vec::with_capacity(rule.dirs.len());
        let mut y = Vec::new();
        for d in &rule.dirs {
            real_harmonics(*d, lmax, &mut y);
            table.push(y.clone());
        }
        let n_lm = (lmax + 1) * (lmax + 1);
        pts.par_iter()
            .map(|p| {
                let mut c = vec![0.0; n_lm];
                if p.r == 0.0 {
                    let g = data(&self.domain.from_meridian(p.z, 0.0, [1.0, 0.0, 0.0]));
                    c[0] = g * (4.0 * std::f64::consts::PI).sqrt();
                    return c;
                }
                for ((d, w), yk) in rule.dirs.iter().zip(&rule.weights).zip(&table) {
                    let g = w * data(&self.domain.from_meridian(p.z, p.r, *d));
                    for (ci, yi) in c.iter_mut().zip(yk) {
                        *ci += g * yi;
                    }
                }
                c
            })
            .collect()
    }

    /// Harmonic function matching `data` on the boundary.
    ///
    /// The data on each boundary ring is expanded in real spherical harmonics of the
    /// transverse direction; each component is fitted with the ring kernel of its degree.
    pub fn extend<F>(&self, data: &F) -> Result<Extension>
    where
        F: Fn(&Point4) -> f64 + Sync,
    {
        let mut chosen = None;
        let mut tail = 0.0;
        let mut data_scale = 0.0f64;
        for &lmax in &EXTENSION_DEGREES {
            let coef = self.ring_coefficients(&self.nodes, data, lmax);
            data_scale = coef.iter().map(|c| c[0].abs()).fold(0.0, f64::max) / (4.0 * std::f64::consts::PI).sqrt();
            let top = |l: usize| -> f64 {
                coef.iter()
                    .map(|c| c[l * l..(l + 1) * (l + 1)].iter().map(|v| v * v).sum::<f64>().sqrt())
                    .fold(0.0, f64::max)
            };
            tail = top(lmax).max(top(lmax - 1));
            let scale = data_scale.max(coef.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())));
            data_scale = data_scale.max(scale / (4.0 * std::f64::consts::PI).sqrt());
            if tail <= 1e-13 * scale || lmax == *EXTENSION_DEGREES.last().unwrap() {
                chosen = Some((lmax, coef));
                break;
            }
        }
        let (lmax, coef) = chosen.expect("degree list is non-empty");
        if !(data_scale > 0.0) {
            return Ok(Extension {
                terms: Vec::new(),
                lmax: 0,
                residual: 0.0,
                held_residual: 0.0,
                data_scale: 0.0,
                condition: 1.0,
            });
        }
        let keep_tol = 1e-15 * data_scale;
        self.ensure_modes(lmax + 1)?;
        let modes = self.modes.read();
        let mut terms = Vec::new();
        let mut node_res2 = vec![0.0; self.nodes.len()];
        let mut condition = 1.0f64;
        for l in 0..=lmax {
            let f = &modes[l];
            for m in -(l as i64)..=l as i64 {
                let idx = lm_index(l, m);
                if coef.iter().all(|c| c[idx].abs() <= keep_tol) {
                    continue;
                }
                let bw = DVector::from_iterator(
                    self.nodes.len(),
                    coef.iter().zip(&self.sqrt_w).map(|(c, w)| c[idx] * w),
                );
                let utb = f.u.tr_mul(&bw);
                let proj = &f.u * &utb;
                for (i, r) in node_res2.iter_mut().enumerate() {
                    let w = self.sqrt_w[i];
                    if w > 0.0 {
                        *r += ((proj[i] - bw[i]) / w).powi(2);
                    }
                }
                let mut c = &f.v * utb.component_div(&f.s);
                for (cj, s) in c.iter_mut().zip(&f.col_scale) {
                    *cj *= s;
                }
                condition = condition.max(f.condition);
                terms.push(ExtensionTerm { l, index: idx, coefficients: c });
            }
        }
        drop(modes);
        let ring = (4.0 * std::f64::consts::PI).sqrt();
        let residual = node_res2.iter().map(|r| r.sqrt() / ring).fold(0.0, f64::max) + tail / ring;
        let mut ext = Extension { terms, lmax, residual, held_residual: 0.0, data_scale, condition };
        let dirs = fibonacci_sphere(8);
        ext.held_residual = self
            .held
            .par_iter()
            .map(|p| {
                dirs.iter()
                    .map(|d| {
                        let x = self.domain.from_meridian(p.z, p.r, *d);
                        (self.evaluate_extension(&ext, &x) - data(&x)).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        Ok(ext)
    }

    /// Value of an extension at a point of the closed domain.
    pub fn evaluate_extension(&self, ext: &Extension, x: &Point4) -> f64 {
        if ext.terms.is_empty() {
            return 0.0;
        }
        let (z, r, dir) = self.domain.meridian(x);
        let lmax = if dir.is_some() { ext.lmax } else { 0 };
        let mut y = Vec::new();
        real_harmonics(dir.unwrap_or([1.0, 0.0, 0.0]), lmax, &mut y);
        let mut buf = vec![0.0; lmax + 1];
        let mut acc = vec![0.0; ext.terms.len()];
        for (j, &(zq, rq)) in self.charges.iter().enumerate() {
            kernel_modes(z, r, zq, rq, &mut buf);
            for (a, t) in acc.iter_mut().zip(&ext.terms) {
                if t.l <= lmax {
                    *a += t.coefficients[j] * buf[t.l];
                }
            }
        }
        acc.iter()
            .zip(&ext.terms)
            .filter(|(_, t)| t.l <= lmax)
            .map(|(a, t)| a * y[t.index])
            .sum()
    }
}

/// SVD truncated at a relative singular-value threshold; returns (U, S, V, condition).
pub fn truncated_svd(a: DMatrix<f64>, cutoff: f64) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>, f64)> {
    let svd = SVD::new(a, true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(SpikeError::Conditioning { condition: f64::INFINITY });
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff * smax)
        .collect();
    let u_all = svd.u.expect("U requested");
    let vt_all = svd.v_t.expect("V requested");
    let u = DMatrix::from_fn(u_all.nrows(), keep.len(), |i, j| u_all[(i, keep[j])]);
    let v = DMatrix::from_fn(vt_all.ncols(), keep.len(), |i, j| vt_all[(keep[j], i)]);
    let s = DVector::from_fn(keep.len(), |j, _| svd.singular_values[keep[j]]);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((u, s, v, smax / smin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;

    fn check_extension(domain: &DomainDescriptor, g: impl Fn(&Point4) -> f64 + Sync, probes: &[Point4], tol: f64) {
        let solver = MeridianSolver::new(domain).unwrap();
        let ext = solver.extend(&g).unwrap();
        assert!(ext.relative_residual() < tol, "residual {}", ext.relative_residual());
        for x in probes {
            let e = (solver.evaluate_extension(&ext, x) - g(x)).abs();
            assert!(e < tol * ext.data_scale, "x={x:?} err={e}");
        }
    }

    #[test]
    fn extends_non_axisymmetric_harmonic_polynomial() {
        let d = DomainDescriptor::collocation_ball([0.0; 4], 1.0).unwrap();
        let g = |y: &Point4| y[1] * y[2] + 0.5 * (y[0] * y[0] - y[3] * y[3]) + y[3];
        let probes = [point([0.1, 0.2, -0.3, 0.4]), point([0.0; 4]), point([-0.6, 0.0, 0.0, 0.0])];
        check_extension(&d, g, &probes, 1e-10);
    }

    #[test]
    fn extends_off_axis_point_source_on_perforated_domain() {
        let d = DomainDescriptor::perforated(1.0, 0.4, 0.2).unwrap();
        let p = point([0.1, 1.3, 0.6, -0.2]);
        let g = move |y: &Point4| 1.0 / (y - p).norm_squared();
        let probes = [point([-0.5, 0.1, 0.0, 0.2]), point([0.4, 0.0, 0.35, 0.0])];
        check_extension(&d, g, &probes, 1e-6);
    }
}
