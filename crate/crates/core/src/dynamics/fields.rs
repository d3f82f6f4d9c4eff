use nalgebra::Vector3;

use super::{BinGrid, BinKey, DynError, EnsembleState, PhysParams};

/// Histogram estimates of density, mean velocity and osmotic velocity over the
/// bounding box of occupied bins.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEstimate {
    pub grid: BinGrid,
    /// Key of the first bin of the box.
    pub min_key: BinKey,
    /// Bins per axis; 1 on unbinned axes.
    pub dims: [usize; 3],
    pub counts: Vec<usize>,
    /// Per-bin density, normalised so that `Σ ρ · volume = 1`.
    pub rho: Vec<f64>,
    /// Mean member velocity; `None` for empty bins.
    pub velocity: Vec<Option<Vector3<f64>>>,
    /// `−ν ∇ ln ρ`; `None` where the gradient cannot be formed.
    pub osmotic: Vec<Option<Vector3<f64>>>,
}

impl FieldEstimate {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn index(&self, key: &BinKey) -> Option<usize> {
        let mut idx = 0;
        for a in 0..3 {
            let off = key[a] - self.min_key[a];
            if off < 0 || off as usize >= self.dims[a] {
                return None;
            }
            idx = idx * self.dims[a] + off as usize;
        }
        Some(idx)
    }

    pub fn key(&self, index: usize) -> BinKey {
        let mut rest = index;
        let mut key = [0i64; 3];
        for a in (0..3).rev() {
            key[a] = self.min_key[a] + (rest % self.dims[a]) as i64;
            rest /= self.dims[a];
        }
        key
    }

    pub fn center(&self, index: usize) -> Vector3<f64> {
        self.grid.center(&self.key(index))
    }
}

/// Bins the ensemble and derives `ρ`, `v` and `u = −ν ∇ ln ρ`.
///
/// The gradient uses central differences where both neighbours along an axis
/// are occupied and one-sided differences where only one is; otherwise the
/// bin's `u` is absent.
pub fn estimate_fields(state: &EnsembleState, p: &PhysParams) -> Result<FieldEstimate, DynError> {
    let grid = state.bins;
    if state.is_empty() {
        return Err(DynError::EmptyGrid);
    }
    let keys: Vec<BinKey> = state
        .trajectories()
        .iter()
        .map(|t| grid.key(&t.position))
        .collect();
    let mut lo = [i64::MAX; 3];
    let mut hi = [i64::MIN; 3];
    for k in &keys {
        for a in 0..3 {
            lo[a] = lo[a].min(k[a]);
            hi[a] = hi[a].max(k[a]);
        }
    }
    let dims = [0, 1, 2].map(|a| (hi[a] - lo[a] + 1) as usize);
    let n_bins = dims.iter().product();
    let mut est = FieldEstimate {
        grid,
        min_key: lo,
        dims,
        counts: vec![0; n_bins],
        rho: vec![0.0; n_bins],
        velocity: vec![None; n_bins],
        osmotic: vec![None; n_bins],
    };
    // Running means are exact when every member has the same velocity.
    let mut vmean = vec![Vector3::zeros(); n_bins];
    for (t, k) in state.trajectories().iter().zip(&keys) {
        let i = est.index(k).expect("key lies in its own bounding box");
        est.counts[i] += 1;
        let step = (t.velocity - vmean[i]) / est.counts[i] as f64;
        vmean[i] += step;
    }
    let norm = state.len() as f64 * grid.volume();
    for i in 0..n_bins {
        let c = est.counts[i];
        est.rho[i] = c as f64 / norm;
        if c > 0 {
            est.velocity[i] = Some(vmean[i]);
        }
    }

    let nu = p.nu();
    for i in 0..n_bins {
        if est.counts[i] == 0 {
            continue;
        }
        let key = est.key(i);
        let ln_at = |k: BinKey| {
            est.index(&k)
                .filter(|&j| est.counts[j] > 0)
                .map(|j| est.rho[j].ln())
        };
        let here = est.rho[i].ln();
        let mut grad = Vector3::zeros();
        let mut defined = true;
        for a in 0..3 {
            if !grid.is_binned(a) {
                continue;
            }
            let mut kp = key;
            kp[a] += 1;
            let mut km = key;
            km[a] -= 1;
            let w = grid.width[a];
            grad[a] = match (ln_at(km), ln_at(kp)) {
                (Some(m), Some(p)) => (p - m) / (2.0 * w),
                (None, Some(p)) => (p - here) / w,
                (Some(m), None) => (here - m) / w,
                (None, None) => {
                    defined = false;
                    0.0
                }
            };
        }
        if defined {
            est.osmotic[i] = Some(-nu * grad);
        }
    }
    Ok(est)
}
