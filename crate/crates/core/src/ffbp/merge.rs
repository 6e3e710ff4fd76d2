//! Subimages and the downconvert–interpolate–upconvert merge.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::SubimageGrid;
use crate::bpa::{backproject, backproject_point};
use crate::error::{Error, Result};
use crate::model::Point3;
use crate::rangecomp::RangeProfileSet;

/// Interpolation kernel used when resampling a child onto its parent grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Separable linear, 2 taps per axis.
    #[default]
    Linear,
    /// Keys cubic convolution (a = −0.5), 4 taps per axis.
    Cubic,
}

impl Kernel {
    /// Lattice cells on each side of a sample the stencil may touch.
    pub fn reach(self) -> f64 {
        match self {
            Kernel::Linear => 1.0,
            Kernel::Cubic => 2.0,
        }
    }
}

/// Complex subimage values on a [`SubimageGrid`]; masked points hold zero.
#[derive(Debug, Clone)]
pub struct Subimage {
    pub grid: SubimageGrid,
    values: Vec<Complex64>,
    downconverted: bool,
}

impl Subimage {
    pub fn new(grid: SubimageGrid, values: Vec<Complex64>, downconverted: bool) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        let mut s = Self {
            grid,
            values,
            downconverted,
        };
        for (v, ok) in s.values.iter_mut().zip(s.grid.valid()) {
            if !ok {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        Ok(s)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn is_downconverted(&self) -> bool {
        self.downconverted
    }

    /// `f′ = f·e^{−jΦ}` (no-op if already downconverted).
    pub fn downconvert(self) -> Result<Self> {
        if self.downconverted {
            return Ok(self);
        }
        self.rotate(-1.0)
    }

    /// `f = f′·e^{+jΦ}` (no-op if already raw).
    pub fn upconvert(self) -> Result<Self> {
        if !self.downconverted {
            return Ok(self);
        }
        self.rotate(1.0)
    }

    fn rotate(mut self, sign: f64) -> Result<Self> {
        let field = *self.grid.field();
        let positions = self.grid.positions();
        let valid = self.grid.valid();
        self.values
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(i, v)| -> Result<()> {
                if valid[i] {
                    let phi = field.phase(&positions[i])?;
                    *v *= Complex64::from_polar(1.0, sign * phi);
                }
                Ok(())
            })?;
        self.downconverted = !self.downconverted;
        Ok(self)
    }

    /// Interpolate the stored values at fractional lattice coordinate `q`.
    /// `None` if the stencil leaves the lattice or touches a masked point.
    fn sample(&self, q: &Point3, kernel: Kernel) -> Option<Complex64> {
        match kernel {
            Kernel::Linear => self.sample_linear(q),
            Kernel::Cubic => self.sample_cubic(q).or_else(|| self.sample_linear(q)),
        }
    }

    fn sample_linear(&self, q: &Point3) -> Option<Complex64> {
        let dims = self.grid.dims;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let x = q[a];
            let top = (dims[a] - 1) as f64;
            if !(x >= 0.0 && x <= top) {
                return None;
            }
            let i = (x.floor() as usize).min(dims[a] - 2);
            base[a] = i;
            frac[a] = x - i as f64;
        }
        let valid = self.grid.valid();
        let mut acc = Complex64::new(0.0, 0.0);
        for du in 0..2 {
            let wu = if du == 0 { 1.0 - frac[0] } else { frac[0] };
            for dv in 0..2 {
                let wv = if dv == 0 { 1.0 - frac[1] } else { frac[1] };
                for dn in 0..2 {
                    let i = self.grid.index(base[0] + du, base[1] + dv, base[2] + dn)?;
                    if !valid[i] {
                        return None;
                    }
                    let wn = if dn == 0 { 1.0 - frac[2] } else { frac[2] };
                    acc += self.values[i] * (wu * wv * wn);
                }
            }
        }
        Some(acc)
    }

    fn sample_cubic(&self, q: &Point3) -> Option<Complex64> {
        let dims = self.grid.dims;
        let mut base = [0usize; 3];
        let mut weights = [[0.0; 4]; 3];
        for a in 0..3 {
            let x = q[a];
            let fl = x.floor();
            if !(fl >= 1.0 && fl + 2.0 <= (dims[a] - 1) as f64) {
                return None;
            }
            base[a] = fl as usize - 1;
            let t = x - fl;
            weights[a] = [keys(1.0 + t), keys(t), keys(1.0 - t), keys(2.0 - t)];
        }
        let valid = self.grid.valid();
        let mut acc = Complex64::new(0.0, 0.0);
        for (du, wu) in weights[0].iter().enumerate() {
            for (dv, wv) in weights[1].iter().enumerate() {
                for (dn, wn) in weights[2].iter().enumerate() {
                    let i = self.grid.index(base[0] + du, base[1] + dv, base[2] + dn)?;
                    if !valid[i] {
                        return None;
                    }
                    acc += self.values[i] * (wu * wv * wn);
                }
            }
        }
        Some(acc)
    }
}

/// Keys cubic convolution kernel with `a = −0.5`.
fn keys(x: f64) -> f64 {
    let a = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Backproject a subarray's elements onto the valid points of its grid.
pub fn level1_reconstruct(profiles: &RangeProfileSet, grid: SubimageGrid) -> Result<Subimage> {
    let valid_points = grid.valid_positions();
    let computed = backproject(profiles, grid.subarray().elements.clone(), &valid_points)?;
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut it = computed.into_iter();
    for (v, ok) in values.iter_mut().zip(grid.valid()) {
        if *ok {
            *v = it.next().expect("one value per valid point");
        }
    }
    Subimage::new(grid, values, false)
}

/// Evaluate `Σ_c e^{+jΦ_c(p)}·interp(f′_c)(p)` at each point.
///
/// `children` must be downconverted. Points with `active = false` are left
/// at zero. A point where some child cannot be interpolated is flagged; with
/// `fallback` that child's term is backprojected directly from its elements,
/// otherwise the point is zeroed. Returns the values and the flag count.
pub fn merge_onto(
    children: &[&Subimage],
    points: &[Point3],
    active: &[bool],
    kernel: Kernel,
    fallback: Option<&RangeProfileSet>,
) -> Result<(Vec<Complex64>, usize)> {
    let merged = merge_points(children, points, active, kernel, fallback)?;
    let flagged = merged.iter().filter(|(_, f)| *f).count();
    let values = merged
        .into_iter()
        .map(|(v, _)| v.unwrap_or_default())
        .collect();
    Ok((values, flagged))
}

/// Per point: the merged value (`None` if it could not be formed) and
/// whether it was flagged.
fn merge_points(
    children: &[&Subimage],
    points: &[Point3],
    active: &[bool],
    kernel: Kernel,
    fallback: Option<&RangeProfileSet>,
) -> Result<Vec<(Option<Complex64>, bool)>> {
    if children.iter().any(|c| !c.is_downconverted()) {
        return Err(Error::invalid("merge expects downconverted children"));
    }
    points
        .par_iter()
        .zip(active.par_iter())
        .map(|(p, &on)| {
            if !on {
                return Ok((Some(Complex64::new(0.0, 0.0)), false));
            }
            let mut acc = Complex64::new(0.0, 0.0);
            let mut flagged = false;
            for child in children {
                let g = &child.grid;
                let (phi, uvn) = g.field().phase_and_forward(p)?;
                let q = (uvn - g.origin).component_div(&g.step);
                match (child.sample(&q, kernel), fallback) {
                    (Some(v), _) => acc += v * Complex64::from_polar(1.0, phi),
                    (None, Some(profiles)) => {
                        flagged = true;
                        acc += backproject_point(profiles, g.subarray().elements.clone(), p)?;
                    }
                    (None, None) => return Ok((None, true)),
                }
            }
            Ok((Some(acc), flagged))
        })
        .collect()
}

/// Merge two child subimages onto their parent's grid. Returns the raw
/// parent subimage and the number of flagged parent points. Without a
/// `fallback`, flagged points are zeroed and masked.
pub fn merge_pair(
    a: Subimage,
    b: Subimage,
    mut parent: SubimageGrid,
    kernel: Kernel,
    fallback: Option<&RangeProfileSet>,
) -> Result<(Subimage, usize)> {
    let a = a.downconvert()?;
    let b = b.downconvert()?;
    let merged = merge_points(
        &[&a, &b],
        parent.positions(),
        parent.valid(),
        kernel,
        fallback,
    )?;
    let mut flagged = 0;
    let values = merged
        .into_iter()
        .enumerate()
        .map(|(i, (v, f))| {
            flagged += usize::from(f);
            v.unwrap_or_else(|| {
                parent.mask(i);
                Complex64::new(0.0, 0.0)
            })
        })
        .collect();
    Ok((Subimage::new(parent, values, false)?, flagged))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_kernel_partition_of_unity() {
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let s = keys(1.0 + t) + keys(t) + keys(1.0 - t) + keys(2.0 - t);
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(keys(0.0), 1.0);
        assert_eq!(keys(1.0), 0.0);
        assert_eq!(keys(2.0), 0.0);
    }
}
